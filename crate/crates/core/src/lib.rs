pub mod blockpos;
pub mod capacity;
pub mod config;
pub mod distill;
pub mod error;
pub mod io;
pub mod qmap;
pub mod tensor;
pub mod twirl;
