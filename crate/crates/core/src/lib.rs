//! Numerical two-scale homogenization on algebras with mean value.
//!
//! The crate realizes periodic and quasi-periodic algebras on their torus
//! spectrum ([`algebra`]), provides Σ-convergence diagnostics
//! ([`sigma`]), and homogenizes two nonlocal evolution problems: a shifted
//! Wilson–Cowan neural field ([`neural_field`]) and a nonlinear heat
//! equation with a memory term ([`heat`]).

pub mod algebra;
pub mod error;
pub mod heat;
pub mod io;
pub mod numerics;
pub mod registry;
pub mod neural_field;
pub mod sigma;
pub mod trajectory;

pub use error::{Error, Result};
