//! ε-studies: L² convergence, corrector reconstruction and flux limits.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::HeatConfig;
use super::effective::EffectiveCoefficients;
use super::fd::HeatGrid;
use super::fine::{solve_fine_heat, HeatTrajectory};
use super::macro_solve::solve_macro;
use crate::algebra::dirac_point;
use crate::error::{invalid, Result};
use crate::io::fmt_f64;
use crate::numerics::quad::trapezoid_weights;
use crate::sigma::{
    check_eps_schedule, default_test_bank, gradient_decomposition_check, EpsSequence, MacroField, MacroGrid,
    SigmaTestResult, TestFunction, TwoScaleField, TwoScaleFn, DEFAULT_SIGMA_TOL,
};

/// Minimum grid cells per ε-period of the fine solves.
pub const CELLS_PER_PERIOD: f64 = 8.0;
/// Energy bound: this factor times the coarsest run's energy.
pub const ENERGY_SLACK: f64 = 1.5;

/// Per-ε errors and solver statistics, plus the solutions themselves.
#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub eps: Vec<f64>,
    /// `‖u_ε - u₀‖_{L²(Q_T)}`.
    pub l2_error: Vec<f64>,
    pub energy: Vec<f64>,
    pub picard_avg: Vec<f64>,
    /// `ENERGY_SLACK` times the energy of the coarsest run.
    pub energy_bound: f64,
    /// `‖u₀‖_{L²(Q_T)}` of the homogenized solution.
    pub limit_norm: f64,
    pub fine: Vec<HeatTrajectory>,
    pub homogenized: HeatTrajectory,
    /// Error of the first failing ε; the tables stop before it.
    pub failure: Option<String>,
}

impl ConvergenceStudy {
    /// Columns `eps, l2_error, energy, picard_avg`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eps,l2_error,energy,picard_avg\n");
        for i in 0..self.l2_error.len() {
            let row = [self.eps[i], self.l2_error[i], self.energy[i], self.picard_avg[i]].map(fmt_f64);
            out += &row.join(",");
            out.push('\n');
        }
        out
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.l2_error.windows(2).all(|w| w[1] < w[0])
    }

    pub fn energy_within_bound(&self) -> bool {
        self.energy.iter().all(|e| *e <= self.energy_bound)
    }
}

/// `L²(Q_T)` norm of the difference of two trajectories on the same grid
/// (trapezoid in time).
fn space_time_distance(a: &HeatTrajectory, b: Option<&HeatTrajectory>, grid: &HeatGrid) -> f64 {
    let nt = a.traj.states.len();
    let wt = trapezoid_weights(nt, grid.dt, false);
    let h = grid.h();
    let mut acc = 0.0;
    for (k, st) in a.traj.states.iter().enumerate() {
        let s: f64 = match b {
            Some(b) => st.values.iter().zip(&b.traj.states[k].values).map(|(x, y)| (x - y) * (x - y)).sum(),
            None => st.values.iter().map(|x| x * x).sum(),
        };
        acc += wt[k] * h * s;
    }
    acc.sqrt()
}

/// Fine solves over `eps_list` against the macro solve, on one grid.
pub fn convergence_study(
    cfg: &HeatConfig,
    eps_list: &[f64],
    grid: &HeatGrid,
    eff: &EffectiveCoefficients,
) -> Result<ConvergenceStudy> {
    check_eps_schedule(eps_list)?;
    let finest = eps_list[eps_list.len() - 1];
    if (grid.cells as f64) * finest < CELLS_PER_PERIOD * (1.0 - 1e-12) {
        return Err(invalid(format!(
            "{} cells do not resolve eps = {finest} with {CELLS_PER_PERIOD} cells per period",
            grid.cells
        )));
    }
    let homogenized = solve_macro(cfg, eff, grid)?;
    let runs: Vec<Result<HeatTrajectory>> = eps_list.par_iter().map(|e| solve_fine_heat(cfg, *e, grid)).collect();
    let mut study = ConvergenceStudy {
        eps: Vec::new(),
        l2_error: Vec::new(),
        energy: Vec::new(),
        picard_avg: Vec::new(),
        energy_bound: 0.0,
        limit_norm: space_time_distance(&homogenized, None, grid),
        fine: Vec::new(),
        homogenized,
        failure: None,
    };
    for (e, run) in eps_list.iter().zip(runs) {
        match run {
            Ok(tr) => {
                study.eps.push(*e);
                study.l2_error.push(space_time_distance(&tr, Some(&study.homogenized), grid));
                study.energy.push(tr.energy);
                study.picard_avg.push(tr.picard_avg());
                study.fine.push(tr);
            }
            Err(err) => {
                study.failure = Some(format!("eps = {e}: {err}"));
                break;
            }
        }
    }
    study.energy_bound = ENERGY_SLACK * study.energy.first().copied().unwrap_or(0.0);
    Ok(study)
}

/// Corrector diagnostics of a convergence study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrectorReport {
    pub eps: Vec<f64>,
    /// `‖u_ε - u₀ - ε u₁‖_{L²(Q_T)}`, `u₁ = v(∇u₀)(x/ε, t/ε) - v(∇u₀)(0, t/ε)`.
    pub reconstruction_error: Vec<f64>,
    pub l2_error: Vec<f64>,
    /// Weak Σ residuals of `∇u_ε` against `∇u₀ + ∂_y u₁`.
    pub gradient: SigmaTestResult,
}

impl CorrectorReport {
    /// `e(ε) / reconstruction error` per ε.
    pub fn gains(&self) -> Vec<f64> {
        self.l2_error
            .iter()
            .zip(&self.reconstruction_error)
            .map(|(e, r)| if *r > 0.0 { e / r } else { f64::INFINITY })
            .collect()
    }
}

/// Node gradients on the closed grid: centered inside, one-sided at the
/// boundary.
fn closed_gradients(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| {
            if i == 0 {
                (values[1] - values[0]) / h
            } else if i == n - 1 {
                (values[n - 1] - values[n - 2]) / h
            } else {
                (values[i + 1] - values[i - 1]) / (2.0 * h)
            }
        })
        .collect()
}

fn stride_for(n: usize, target: usize) -> usize {
    let mut s = (n / target.max(1)).max(1);
    while n % s != 0 {
        s -= 1;
    }
    s
}

/// Reconstruction errors and the gradient Σ check.
///
/// Correctors are unique up to functions of `(x, t)`; the reconstruction
/// uses the representative vanishing at the cell origin, which keeps the
/// zero boundary values when `1/ε` is an integer. The gradient check runs
/// on a coarse `(x, t)` grid of about `coarse` nodes per axis, with the
/// `τ`-mean of the corrector on a torus of `torus` nodes.
pub fn corrector_check(
    cfg: &HeatConfig,
    study: &ConvergenceStudy,
    eff: &EffectiveCoefficients,
    grid: &HeatGrid,
    coarse: usize,
    torus: usize,
) -> Result<CorrectorReport> {
    if study.fine.is_empty() {
        return Err(invalid("the study has no fine solutions"));
    }
    let h = grid.h();
    let dt = grid.dt;
    let homog = &study.homogenized;
    let nt = homog.traj.states.len();
    let wt = trapezoid_weights(nt, dt, false);
    let wx = trapezoid_weights(grid.cells + 1, h, false);
    let grads: Vec<Vec<f64>> = homog.traj.states.iter().map(|s| closed_gradients(&s.values, h)).collect();

    let reconstruction_error = study
        .eps
        .par_iter()
        .zip(&study.fine)
        .map(|(&e, fine)| -> Result<f64> {
            let mut acc = 0.0;
            let origin = vec![0.0; cfg.algebra.torus_dim()];
            for k in 0..nt {
                let tau = dirac_point(&[k as f64 * dt / e], &cfg.algebra_tau)?.coords()[0];
                let (uf, u0) = (&fine.traj.states[k].values, &homog.traj.states[k].values);
                for i in 0..=grid.cells {
                    let s = dirac_point(&[i as f64 * h / e], &cfg.algebra)?;
                    let v = eff.corrector(&[grads[k][i]], s.coords(), tau) - eff.corrector(&[grads[k][i]], &origin, tau);
                    let r = uf[i] - u0[i] - e * v;
                    acc += wt[k] * wx[i] * r * r;
                }
            }
            Ok(acc.sqrt())
        })
        .collect::<Result<Vec<_>>>()?;

    // gradient check
    let sx = stride_for(grid.cells, coarse);
    let st = stride_for(nt - 1, coarse);
    let (cx, ct) = (grid.cells / sx + 1, (nt - 1) / st + 1);
    let coarse_grid = MacroGrid::new(
        vec![
            crate::numerics::Axis::closed(0.0, 1.0, cx),
            crate::numerics::Axis::closed(0.0, cfg.horizon, ct),
        ],
        1,
    )?;
    let y_dims = &eff.cell_grid.y_dims;
    let sy: Vec<usize> = y_dims.iter().map(|d| stride_for(*d, torus)).collect();
    let t_dims: Vec<usize> = y_dims.iter().zip(&sy).map(|(d, s)| d / s).collect();
    let mut u0_vals = Vec::with_capacity(cx * ct);
    let mut u1_vals = Vec::new();
    for i in 0..cx {
        for k in 0..ct {
            let (fi, fk) = (i * sx, k * st);
            u0_vals.push(homog.traj.states[fk].values[fi]);
            let mean = eff.corrector_tau_mean(&[grads[fk][fi]]);
            if y_dims.len() != 1 {
                return Err(invalid("the gradient check expects a one-dimensional torus"));
            }
            u1_vals.extend((0..t_dims[0]).map(|j| mean[j * sy[0]]));
        }
    }
    let u0 = MacroField::new(coarse_grid.clone(), u0_vals)?;
    let u1 = TwoScaleField::new(coarse_grid.clone(), &cfg.algebra, &t_dims, u1_vals)?;
    let fields = study
        .fine
        .iter()
        .map(|f| f.traj.space_time())
        .collect::<Result<Vec<_>>>()?;
    let seq = EpsSequence::new(study.eps.clone(), fields, "fine heat solutions")?;
    let bank = default_test_bank(&coarse_grid, cfg.algebra.torus_dim(), 4, 3);
    let gradient = gradient_decomposition_check(&seq, &u0, &u1, &bank, DEFAULT_SIGMA_TOL)?;
    Ok(CorrectorReport {
        eps: study.eps.clone(),
        reconstruction_error,
        l2_error: study.l2_error.clone(),
        gradient,
    })
}

/// Spatial flux pairings at `τ = 0`:
/// `∫ a(x/ε, 0, ∇Φ_ε)·w(x, x/ε) dx` against
/// `∬ a(s, 0, ∇ψ₀ + ∂_s ψ₁)·w(x, s) ds dx`, with `Φ_ε = ψ₀ + ε ψ₁(x, x/ε)`.
/// Derivatives are central differences.
pub fn flux_convergence_check(
    cfg: &HeatConfig,
    eps_list: &[f64],
    psi0: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    psi1: Arc<TwoScaleFn>,
    bank: &[TestFunction],
    tol: f64,
) -> Result<SigmaTestResult> {
    check_eps_schedule(eps_list)?;
    if cfg.dim() != 1 || cfg.algebra.torus_dim() != 1 {
        return Err(invalid("the flux check works on (0, 1) with a one-dimensional torus"));
    }
    if bank.is_empty() {
        return Err(invalid("empty test bank"));
    }
    const D: f64 = 1e-5;
    let omega = cfg.algebra.frequencies()[0][0];
    let dpsi0 = |x: f64| (psi0(x + D) - psi0(x - D)) / (2.0 * D);
    let dx1 = |x: f64, s: f64| (psi1(&[x + D], &[s]) - psi1(&[x - D], &[s])) / (2.0 * D);
    let ds1 = |x: f64, s: f64| (psi1(&[x], &[s + D]) - psi1(&[x], &[s - D])) / (2.0 * D);
    let flux = |s: f64, g: f64| {
        let mut a = [0.0];
        cfg.flux.eval(&[s], &[0.0], &[g], &mut a);
        a[0]
    };
    let (nx, ns) = (1024usize, 256usize);
    let limits: Vec<f64> = bank
        .iter()
        .map(|w| {
            let wx = trapezoid_weights(nx + 1, 1.0 / nx as f64, false);
            let mut acc = 0.0;
            for (i, wi) in wx.iter().enumerate() {
                let x = i as f64 / nx as f64;
                let inner: f64 = (0..ns)
                    .map(|j| {
                        let s = j as f64 / ns as f64;
                        flux(s, dpsi0(x) + omega * ds1(x, s)) * w.eval(&[x], &[s])
                    })
                    .sum::<f64>()
                    / ns as f64;
                acc += wi * inner;
            }
            acc
        })
        .collect();
    let pairings = eps_list
        .par_iter()
        .map(|&e| -> Result<Vec<f64>> {
            let n = ((64.0 / e).ceil() as usize).max(4096);
            let wx = trapezoid_weights(n + 1, 1.0 / n as f64, false);
            let mut row = vec![0.0; bank.len()];
            for (i, wi) in wx.iter().enumerate() {
                let x = i as f64 / n as f64;
                let s = dirac_point(&[x / e], &cfg.algebra)?.coords()[0];
                let g = dpsi0(x) + e * dx1(x, s) + omega * ds1(x, s);
                let a = flux(s, g);
                for (r, w) in row.iter_mut().zip(bank) {
                    *r += wi * a * w.eval(&[x], &[s]);
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SigmaTestResult::from_pairings(
        eps_list.to_vec(),
        bank.iter().map(|w| w.id.clone()).collect(),
        pairings,
        limits,
        tol,
    ))
}
