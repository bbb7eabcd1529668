//! Supervised training on expert traces with an error-driven curriculum.

mod check;
mod datadir;
mod dataset;
mod loss;
mod train;

pub use check::*;
pub use datadir::*;
pub use dataset::*;
pub use loss::*;
pub use train::*;
