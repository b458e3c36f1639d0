//! File formats, artifacts, the streaming server and the command-line
//! front end around [`steer_core`].

pub mod artifacts;
pub mod cli;
pub mod clip;
mod error;
pub mod fk_vectors;
pub mod latency;
pub mod protocol;
pub mod report;
pub mod server;
pub mod shared_buffer;
pub mod skeleton_file;
pub mod spans;
pub mod tensor;

pub use error::{Error, Result};
pub use steer_core as core;
