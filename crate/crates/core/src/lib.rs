//! Numerical laboratory for the isotropic 4-wave kinetic collision operator
//! with cross-section `64π³ ω₁^{β-1/2} (ω₂ω₃ω₄)^β min{√ω₁, √ω₂, √ω₃}`.
//!
//! The crate is organised bottom-up:
//!
//! * [`datum`]: spectra `n(ω)` (closed form and gridded) and weighted norms,
//! * [`kernel`]: resonance relation, cross-section, channels and domain pieces,
//! * [`quadrature`]: adaptive Gauss–Kronrod integration over the pieces,
//! * [`collision`]: channel operators, gain/loss/full operator and the
//!   oscillatory term decomposition,
//! * [`analysis`]: scaling fits, β-threshold sweeps, Picard runs and
//!   cascade exponents,
//! * [`averaging`]: the 3D sphere parametrization and angular averages.

pub mod analysis;
pub mod averaging;
pub mod collision;
pub mod datum;
mod error;
pub mod kernel;
pub mod quadrature;

pub use error::{Error, Result};
