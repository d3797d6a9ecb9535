//! Shared numerical kernels.

pub mod fft;
pub mod grid;
pub mod iterate;
pub mod quad;

pub use fft::{convolve_axes, convolve_kernel, fft_convolve, AxisMode, ConvMode};
pub use grid::{Axis, Grid};
pub use iterate::{cg_solve, cg_solve_with, picard_drive, ConjugateGradient, IterationReport};

/// Deterministic low-discrepancy points in `[0, 1)^d` (additive recurrence),
/// used wherever assumptions are checked on samples.
pub fn low_discrepancy(d: usize, count: usize) -> Vec<Vec<f64>> {
    const ALPHA: [f64; 4] = [0.618_033_988_749_895, 0.414_213_562_373_095, 0.732_050_807_568_877, 0.236_067_977_499_79];
    (0..count)
        .map(|i| {
            (0..d)
                .map(|k| {
                    let v = 0.5 + ALPHA[k % 4] * (i + 1) as f64 * (1 + k / 4) as f64;
                    v - v.floor()
                })
                .collect()
        })
        .collect()
}
