//! Averaged geodesic chains on Cayley graphs of hyperbolic groups and the
//! ℓᵖ cocycle built from them.

pub mod analysis;
pub mod bicombing;
pub mod cayley;
pub mod chains;
pub mod cocycle;
pub mod error;
pub mod group;
pub mod mineyev;

pub use cayley::{CayleyBall, HalfInt};
pub use chains::Chain0;
pub use error::{Error, LoadError, Result};
pub use group::{Group, GroupElement, GroupSpec};
pub use mineyev::Mineyev;
