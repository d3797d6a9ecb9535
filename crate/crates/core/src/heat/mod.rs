//! Nonlocal nonlinear heat equation with memory and its homogenization.
//!
//! Fine problem on `Ω = (0, 1)` with zero boundary values:
//!
//! ```text
//! ρ(x/ε) ∂u/∂t - div a(x/ε, t/ε, ∇u) + ∫₀ᵗ K(x/ε, (t-σ)/ε) a₀(x/ε, σ/ε, ∇u(σ)) dσ = f
//! ```
//!
//! Macroscopic problem: `ρ̃ ∂u₀/∂t - div b(∇u₀) + b₀(∇u₀) = f`, with `b`,
//! `b₀` tabulated from cell problems on the `y`-torus, one per `τ`-slice.

mod cell;
mod config;
mod effective;
mod fd;
mod fine;
mod macro_solve;
mod study;

pub use cell::{solve_cell, CellGrid, CellSolution, CELL_TOLERANCE};
pub use config::{HeatConfig, HeatConstants};
pub use effective::{
    effective_coefficients, lambda_range_presolve, EffectiveChecks, EffectiveCoefficients, GRID_SLACK,
};
pub use fd::{interior_nodes, HeatGrid};
pub use fine::{solve_fine_heat, HeatTrajectory, SlabRecord, SLAB_CONTRACTION};
pub use macro_solve::solve_macro;
pub use study::{
    convergence_study, corrector_check, flux_convergence_check, ConvergenceStudy, CorrectorReport, CELLS_PER_PERIOD,
    ENERGY_SLACK,
};
