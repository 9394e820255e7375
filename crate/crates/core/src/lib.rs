pub mod checkpoint;
pub mod config;
pub mod description;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod io;
pub mod negsynth;
pub mod par;
pub mod pipeline;
pub mod scene;
pub mod seed;
pub mod store;
pub mod scorer;
pub mod trainer;

pub use error::{Error, Result};
