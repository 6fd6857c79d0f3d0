pub mod bench;
pub mod explain;
pub mod fixtures;
pub mod generator;
pub mod ilp;
pub mod model;
pub mod render;
pub mod scheduler;
