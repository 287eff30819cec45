pub mod contraction;
pub mod diagnostics;
pub mod dynsys;
pub mod error;
pub mod gs;
pub mod linalg;
pub mod presets;
pub mod statemaps;

pub use error::{Error, Result};
