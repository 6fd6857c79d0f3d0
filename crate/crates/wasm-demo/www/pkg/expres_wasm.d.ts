/* tslint:disable */
/* eslint-disable */

/**
 * Enumerates up to `max` explanations for `target` and renders each one.
 */
export function explainPreference(instance: string, schedule: string, target: string, max: number, anonymize: boolean, detailed: boolean, budget_ms: number): string;

export function generateInstance(agents: number, seed: number): string;

/**
 * The eight-agent example week as instance JSON.
 */
export function scenarioOne(): string;

/**
 * The unsatisfied preference highlighted in the example week.
 */
export function scenarioOneTarget(): string;

/**
 * Returns the serialized schedule with its satisfied and unsatisfied preference ids.
 */
export function solveSchedule(instance: string, budget_ms: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly explainPreference: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: number) => [number, number, number, number];
    readonly generateInstance: (a: number, b: number) => [number, number, number, number];
    readonly scenarioOne: () => [number, number];
    readonly scenarioOneTarget: () => [number, number];
    readonly solveSchedule: (a: number, b: number, c: number) => [number, number, number, number];
    readonly __externref_table_alloc: () => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
