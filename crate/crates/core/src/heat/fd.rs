//! Finite differences on `(0, 1)` with zero boundary values.
//!
//! Nodes `x_i = i h`, `i = 0..=n`; unknowns are the interior nodes. Fluxes
//! live on faces `x_{i+1/2}`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numerics::{cg_solve_with, picard_drive};

/// Space-time resolution of a heat solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatGrid {
    /// Number of cells on `(0, 1)`.
    pub cells: usize,
    pub dt: f64,
}

impl HeatGrid {
    pub fn h(&self) -> f64 {
        1.0 / self.cells as f64
    }

    /// Number of time steps covering `horizon`; `dt` must divide it.
    pub fn steps(&self, horizon: f64) -> Result<usize> {
        if self.cells < 2 || !(self.dt > 0.0) {
            return Err(invalid("heat grid needs >= 2 cells and a positive dt"));
        }
        let steps = (horizon / self.dt).round() as usize;
        if steps == 0 || ((steps as f64) * self.dt - horizon).abs() > 1e-9 * horizon {
            return Err(invalid(format!("dt = {} does not divide T = {horizon}", self.dt)));
        }
        Ok(steps)
    }
}

/// Interior node coordinates.
pub fn interior_nodes(cells: usize) -> Vec<f64> {
    let h = 1.0 / cells as f64;
    (1..cells).map(|i| i as f64 * h).collect()
}

/// Face gradients of an interior vector (boundary values zero).
pub(crate) fn face_gradients(u: &[f64], h: f64) -> Vec<f64> {
    let n = u.len() + 1;
    (0..n)
        .map(|f| {
            let left = if f == 0 { 0.0 } else { u[f - 1] };
            let right = if f == n - 1 { 0.0 } else { u[f] };
            (right - left) / h
        })
        .collect()
}

/// Node gradients at interior nodes: average of the adjacent faces.
pub(crate) fn node_gradients(faces: &[f64]) -> Vec<f64> {
    faces.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

/// Second-order backward differences as an implicit Euler step: returns the
/// shifted previous state and step size. The first step (no `before`) is
/// plain implicit Euler.
pub(crate) fn bdf2_history(cur: &[f64], before: Option<&[f64]>, dt: f64) -> (Vec<f64>, f64) {
    match before {
        None => (cur.to_vec(), dt),
        Some(b) => (
            cur.iter().zip(b).map(|(c, p)| (4.0 * c - p) / 3.0).collect(),
            2.0 * dt / 3.0,
        ),
    }
}

/// One implicit Euler step, nonlinear in the flux and solved by Kačanov
/// (lagged secant coefficient) sweeps with conjugate-gradient inner solves.
pub(crate) struct ImplicitStep<'a> {
    pub h: f64,
    pub dt: f64,
    /// Density at interior nodes.
    pub rho: &'a [f64],
    /// Source minus memory at interior nodes.
    pub load: &'a [f64],
    pub tol: f64,
    pub max_sweeps: usize,
}

impl ImplicitStep<'_> {
    /// Returns the new interior values and the number of sweeps.
    /// `secant(face, g)` is the flux secant at face `face`; `zeroth(node,
    /// g)` is an optional lower-order term evaluated on the lagged iterate.
    pub fn solve(
        &self,
        prev: &[f64],
        secant: &(dyn Fn(usize, f64) -> f64 + Sync),
        zeroth: Option<&(dyn Fn(usize, f64) -> f64 + Sync)>,
    ) -> Result<(Vec<f64>, usize)> {
        let m = prev.len();
        let h2 = self.h * self.h;
        let base: Vec<f64> = (0..m).map(|i| self.rho[i] / self.dt * prev[i] + self.load[i]).collect();
        let sweep = |u: &[f64]| -> Result<Vec<f64>> {
            let faces = face_gradients(u, self.h);
            let sigma: Vec<f64> = faces.iter().enumerate().map(|(f, g)| secant(f, *g)).collect();
            let mut rhs = base.clone();
            if let Some(z) = zeroth {
                let nodes = node_gradients(&faces);
                for (i, r) in rhs.iter_mut().enumerate() {
                    *r -= z(i, nodes[i]);
                }
            }
            let diag: Vec<f64> = (0..m)
                .map(|i| self.rho[i] / self.dt + (sigma[i] + sigma[i + 1]) / h2)
                .collect();
            let apply = |x: &[f64], out: &mut [f64]| {
                for i in 0..m {
                    let left = if i == 0 { 0.0 } else { x[i - 1] };
                    let right = if i + 1 == m { 0.0 } else { x[i + 1] };
                    out[i] = self.rho[i] / self.dt * x[i]
                        + (sigma[i] * (x[i] - left) + sigma[i + 1] * (x[i] - right)) / h2;
                }
            };
            let (x, _) = cg_solve_with(apply, &rhs, u.to_vec(), Some(&diag), 1e-13, 20 * m + 100)?;
            Ok(x)
        };
        let (u, report) = picard_drive(sweep, prev.to_vec(), self.tol, self.max_sweeps)?;
        Ok((u, report.iterations))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradients_on_a_line() {
        let u: Vec<f64> = interior_nodes(4).iter().map(|x| x * (1.0 - x)).collect();
        let g = face_gradients(&u, 0.25);
        assert_eq!(g.len(), 4);
        assert!((g[0] - 0.75).abs() < 1e-15);
        assert!((g[3] + 0.75).abs() < 1e-15);
        let n = node_gradients(&g);
        assert!((n[1]).abs() < 1e-15);
    }
}
