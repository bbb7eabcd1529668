//! Neural program core, task specification encoder, scoping head and
//! argument pointer, built on the tape in `numcore`.
//!
//! Five variants share the same state and spec encoders. Hierarchical ones
//! select programs by key lookup in a learned memory; flat ones predict API
//! calls directly.

mod checkpoint;
mod config;
mod infer;
mod net;

pub use checkpoint::*;
pub use config::*;
pub use infer::*;
pub use net::*;

#[cfg(test)]
mod tests;
