//! Hierarchical program induction for manipulation tasks from demonstration.

pub mod error;
pub mod evalharness;
pub mod expert;
pub mod features;
pub mod interpreter;
pub mod ntpmodel;
pub mod numcore;
pub mod program;
pub mod scope;
pub mod taskgen;
pub mod trainer;
pub mod worldsim;

pub use error::{NtpError, Result};
pub use program::Program;
pub use taskgen::{Family, TaskInstance};
