//! Deterministic, seeded simulation laboratory for noise-driven key
//! exchange: the Kirchhoff-loop Johnson-noise scheme with its detectors and
//! adversaries, a BB84 baseline for side-by-side comparison, and a wireless
//! thermal-noise-modulation link.
//!
//! Everything stochastic flows through an explicit [`seed::SeedPath`], so
//! any result — a single trace, a key-exchange session, a full experiment —
//! regenerates bit-for-bit from its seed coordinates.

pub mod adversary;
pub mod detection;
pub mod error;
pub mod kljn;
pub mod noise;
pub mod protocol;
pub mod qkd;
pub mod seed;
pub mod thermod;

pub use error::{Error, Result};
pub use seed::SeedPath;
