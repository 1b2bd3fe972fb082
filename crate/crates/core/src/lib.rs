//! Spectra and Bloch-type eigenfunctions of incommensurate bilayer
//! Schrödinger operators `H = −½Δ + V₁ + V₂`.
//!
//! The bilayer is lifted to the product torus, regularized by
//! `−(δ/2)Σ(∂_r − ∂_r′)²`, and split into Bloch fibers `H̃^δ(k̃)` that are
//! discretized on planewaves. Sweeping `k̃` and continuing `δ → 0⁺` recovers the
//! spectrum of `H`; eigenvectors restricted to the diagonal `r′ = r` give
//! quasi-periodic generalized eigenfunctions with certified residuals.

pub mod bloch;
pub mod eigensolve;
pub mod error;
pub mod geometry;
pub mod operator;
pub mod potential;
pub mod reference;
pub mod sweep;

pub use error::{Error, Result};
