//! Cell problems on the `y`-torus, one per `τ`-slice.
//!
//! Unknowns live on torus nodes; gradients live at cell centers. Along torus
//! axis `k` the center difference is the average of the `2^{d-1}` parallel
//! edge differences of the cell, and the physical gradient is
//! `Σ_k ω_{k n} D_k v`. The discrete problem is `Gᵀ a(s, τ, λ + G v) = 0`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::HeatConfig;
use crate::algebra::TorusField;
use crate::error::{invalid, Error, Result};
use crate::numerics::cg_solve;
use crate::numerics::grid::strides;

/// Target for the dual-norm residual of an accepted cell solution.
pub const CELL_TOLERANCE: f64 = 1e-10;
const MAX_NEWTON: usize = 50;

/// Torus resolution and number of `τ`-slices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellGrid {
    pub y_dims: Vec<usize>,
    #[serde(default = "default_slices")]
    pub tau_slices: usize,
}

fn default_slices() -> usize {
    32
}

impl CellGrid {
    pub fn new(y_dims: Vec<usize>, tau_slices: usize) -> Self {
        Self { y_dims, tau_slices }
    }

    /// Slice positions `τ_j = j / n_τ`.
    pub fn taus(&self) -> Vec<f64> {
        (0..self.tau_slices).map(|j| j as f64 / self.tau_slices as f64).collect()
    }

    fn check(&self, torus_dim: usize) -> Result<()> {
        if self.y_dims.len() != torus_dim {
            return Err(invalid(format!(
                "cell grid has {} axes, the torus has {torus_dim}",
                self.y_dims.len()
            )));
        }
        if self.y_dims.iter().any(|d| *d < 4) || self.tau_slices == 0 {
            return Err(invalid("cell grid needs >= 4 nodes per axis and >= 1 slice"));
        }
        Ok(())
    }
}

/// Correctors `v(λ)` for every `τ`-slice.
#[derive(Debug, Clone)]
pub struct CellSolution {
    pub lambda: Vec<f64>,
    pub taus: Vec<f64>,
    /// Zero-mean corrector per slice.
    pub slices: Vec<TorusField>,
    /// `λ + G v` at cell centers, `N` values per center, per slice.
    pub gradients: Vec<Vec<f64>>,
    /// Worst slice residual `max_j |(1/M) (Gᵀ a)_j|`.
    pub residual: f64,
    /// Newton iterations summed over slices.
    pub iterations: usize,
}

/// Discrete gradient and its transpose on a torus grid.
pub(crate) struct CellOps {
    pub dims: Vec<usize>,
    pub omega: Vec<Vec<f64>>,
    pub n: usize,
    pub len: usize,
    corners: Vec<usize>,
}

impl CellOps {
    pub fn new(dims: &[usize], omega: &[Vec<f64>]) -> Self {
        let d = dims.len();
        let len: usize = dims.iter().product();
        let st = strides(dims);
        let nc = 1usize << d;
        let mut corners = Vec::with_capacity(len * nc);
        let mut idx = vec![0usize; d];
        for c in 0..len {
            let mut rest = c;
            for k in 0..d {
                idx[k] = rest / st[k];
                rest %= st[k];
            }
            for mask in 0..nc {
                let mut flat = 0;
                for k in 0..d {
                    let i = (idx[k] + ((mask >> k) & 1)) % dims[k];
                    flat += i * st[k];
                }
                corners.push(flat);
            }
        }
        Self {
            dims: dims.to_vec(),
            omega: omega.to_vec(),
            n: omega[0].len(),
            len,
            corners,
        }
    }

    /// Torus coordinates of the cell centers.
    pub fn centers(&self) -> Vec<Vec<f64>> {
        let st = strides(&self.dims);
        (0..self.len)
            .map(|c| {
                let mut rest = c;
                self.dims
                    .iter()
                    .zip(&st)
                    .map(|(d, s)| {
                        let i = rest / s;
                        rest %= s;
                        (i as f64 + 0.5) / *d as f64
                    })
                    .collect()
            })
            .collect()
    }

    fn axis_differences(&self, v: &[f64], c: usize, out: &mut [f64]) {
        let d = self.dims.len();
        let nc = 1usize << d;
        let corner = &self.corners[c * nc..(c + 1) * nc];
        let avg = 1.0 / (nc / 2) as f64;
        for (k, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for mask in (0..nc).filter(|m| (m >> k) & 1 == 0) {
                acc += v[corner[mask | (1 << k)]] - v[corner[mask]];
            }
            *o = acc * avg * self.dims[k] as f64;
        }
    }

    /// `G v`, `N` components per center.
    pub fn grad(&self, v: &[f64], out: &mut [f64]) {
        let d = self.dims.len();
        let n = self.n;
        out.par_chunks_mut(n).enumerate().for_each(|(c, o)| {
            let mut dk = vec![0.0; d];
            self.axis_differences(v, c, &mut dk);
            for (j, oj) in o.iter_mut().enumerate() {
                *oj = (0..d).map(|k| self.omega[k][j] * dk[k]).sum();
            }
        });
    }

    /// `Gᵀ a`.
    pub fn grad_t(&self, a: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let d = self.dims.len();
        let nc = 1usize << d;
        let avg = 1.0 / (nc / 2) as f64;
        for c in 0..self.len {
            let corner = &self.corners[c * nc..(c + 1) * nc];
            let ac = &a[c * self.n..(c + 1) * self.n];
            for k in 0..d {
                let coef = self.omega[k].iter().zip(ac).map(|(w, x)| w * x).sum::<f64>() * avg * self.dims[k] as f64;
                for mask in (0..nc).filter(|m| (m >> k) & 1 == 0) {
                    out[corner[mask | (1 << k)]] += coef;
                    out[corner[mask]] -= coef;
                }
            }
        }
    }
}

fn project_mean_zero(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct SliceResult {
    v: Vec<f64>,
    grads: Vec<f64>,
    residual: f64,
    iterations: usize,
}

/// Damped Newton on one slice. Jacobian products come from the flux
/// derivative, so no matrix is assembled.
fn solve_slice(cfg: &HeatConfig, ops: &CellOps, centers: &[Vec<f64>], lambda: &[f64], tau: f64) -> Result<SliceResult> {
    let (m, n) = (ops.len, ops.n);
    let tau = [tau];
    let scale = 1.0 / m as f64;
    let total = |v: &[f64], g: &mut [f64]| {
        ops.grad(v, g);
        g.chunks_mut(n).for_each(|gc| gc.iter_mut().zip(lambda).for_each(|(x, l)| *x += l));
    };
    let residual_of = |g: &[f64]| -> Vec<f64> {
        let mut a = vec![0.0; m * n];
        a.par_chunks_mut(n)
            .zip(g.par_chunks(n))
            .enumerate()
            .for_each(|(c, (ac, gc))| cfg.flux.eval(&centers[c], &tau, gc, ac));
        let mut r = vec![0.0; m];
        ops.grad_t(&a, &mut r);
        r.iter_mut().for_each(|x| *x *= scale);
        r
    };
    let mut v = vec![0.0; m];
    let mut g = vec![0.0; m * n];
    total(&v, &mut g);
    let mut r = residual_of(&g);
    let mut res = sup(&r);
    let mut history = vec![res];
    let mut iterations = 0;
    while res >= CELL_TOLERANCE {
        if iterations == MAX_NEWTON {
            return Err(Error::CellSolver { residual: res, history });
        }
        iterations += 1;
        let gl = g.clone();
        let apply = |w: &[f64], out: &mut [f64]| {
            let mut gw = vec![0.0; m * n];
            ops.grad(w, &mut gw);
            let mut jw = vec![0.0; m * n];
            jw.par_chunks_mut(n).enumerate().for_each(|(c, o)| {
                cfg.flux
                    .jacobian_apply(&centers[c], &tau, &gl[c * n..(c + 1) * n], &gw[c * n..(c + 1) * n], o)
            });
            ops.grad_t(&jw, out);
            out.iter_mut().for_each(|x| *x *= scale);
        };
        let mut rhs: Vec<f64> = r.iter().map(|x| -x).collect();
        project_mean_zero(&mut rhs);
        let (mut step, _) = cg_solve(apply, &rhs, 1e-13, 20 * m + 200)?;
        project_mean_zero(&mut step);
        let r_norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut alpha = 1.0;
        loop {
            let trial: Vec<f64> = v.iter().zip(&step).map(|(a, b)| a + alpha * b).collect();
            let mut gt = vec![0.0; m * n];
            total(&trial, &mut gt);
            let rt = residual_of(&gt);
            let rt_norm = rt.iter().map(|x| x * x).sum::<f64>().sqrt();
            if rt_norm <= (1.0 - 1e-4 * alpha) * r_norm || sup(&rt) < CELL_TOLERANCE {
                v = trial;
                g = gt;
                r = rt;
                break;
            }
            alpha *= 0.5;
            if alpha < 1.0 / 1024.0 {
                history.push(sup(&rt));
                return Err(Error::CellSolver { residual: res, history });
            }
        }
        res = sup(&r);
        history.push(res);
    }
    project_mean_zero(&mut v);
    Ok(SliceResult {
        v,
        grads: g,
        residual: res,
        iterations,
    })
}

/// Solves the cell problem at `λ` on every `τ`-slice.
pub fn solve_cell(cfg: &HeatConfig, lambda: &[f64], grid: &CellGrid) -> Result<CellSolution> {
    let spec = &cfg.algebra;
    grid.check(spec.torus_dim())?;
    if lambda.len() != spec.space_dim() || lambda.iter().any(|l| !l.is_finite()) {
        return Err(invalid("lambda must be a finite vector in R^N"));
    }
    let ops = CellOps::new(&grid.y_dims, spec.frequencies());
    let centers = ops.centers();
    let taus = grid.taus();
    let parts = taus
        .par_iter()
        .map(|t| solve_slice(cfg, &ops, &centers, lambda, *t))
        .collect::<Result<Vec<_>>>()?;
    let mut slices = Vec::with_capacity(parts.len());
    let mut gradients = Vec::with_capacity(parts.len());
    let (mut residual, mut iterations) = (0.0f64, 0);
    for p in parts {
        residual = residual.max(p.residual);
        iterations += p.iterations;
        slices.push(TorusField::new(spec, &grid.y_dims, p.v)?);
        gradients.push(p.grads);
    }
    Ok(CellSolution {
        lambda: lambda.to_vec(),
        taus,
        slices,
        gradients,
        residual,
        iterations,
    })
}
