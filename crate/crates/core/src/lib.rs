//! Curves of finite distortion: pointwise distortion, integrability thresholds
//! of the distortion function, and the explicit constructions that show the
//! thresholds are sharp.

pub mod analyzer;
pub mod bump;
pub mod error;
pub mod forms;
pub mod inequalities;
pub mod levelindex;
pub mod linalg;
pub mod lusin;
pub mod maps;
mod par;
pub mod roots;

pub use error::{Error, Result};
pub use levelindex::Radius;
