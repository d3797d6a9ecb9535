//! Fine-scale solver: second-order backward differences (implicit Euler
//! start), Kačanov sweeps per step, and a
//! slab-wise fixed point for the memory term.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::HeatConfig;
use super::fd::{bdf2_history, face_gradients, interior_nodes, node_gradients, HeatGrid, ImplicitStep};
use crate::algebra::dirac_point;
use crate::error::{invalid, Error, Result};
use crate::numerics::iterate::ABS_FLOOR;
use crate::sigma::{MacroField, MacroGrid};
use crate::trajectory::FieldTrajectory;

/// Kačanov stopping tolerance (relative increment).
pub(crate) const STEP_TOL: f64 = 1e-10;
/// Sweep cap for both the per-step and the per-slab iterations.
pub(crate) const MAX_SWEEPS: usize = 200;
/// Slabs are halved until the measured contraction factor is below this.
pub const SLAB_CONTRACTION: f64 = 0.5;

/// Fixed-point statistics of one accepted memory slab.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlabRecord {
    pub start_step: usize,
    pub steps: usize,
    pub sweeps: usize,
    /// Largest measured quotient `‖z_{k+1} - z_k‖ / ‖z_k - z_{k-1}‖`.
    pub max_quotient: f64,
    /// Bound `c₀ sup|K| S / (π c₁)` for slab length `S`.
    pub apriori_factor: f64,
    /// How many times the slab was halved before it was accepted.
    pub halvings: usize,
}

/// A heat solution sampled at every time step, with solver statistics.
#[derive(Debug, Clone)]
pub struct HeatTrajectory {
    /// States on the closed grid of `(0, 1)`, boundary nodes included.
    pub traj: FieldTrajectory<MacroField>,
    pub steps: usize,
    pub picard_sweeps: usize,
    pub slabs: Vec<SlabRecord>,
    /// `sup_t ‖u(t)‖² + ∫ ‖∇u‖² dt`.
    pub energy: f64,
    /// True when a macroscopic gradient left the tabulated range.
    pub extrapolated: bool,
    grad_integral: f64,
}

impl HeatTrajectory {
    pub fn picard_avg(&self) -> f64 {
        self.picard_sweeps as f64 / self.steps.max(1) as f64
    }

    pub fn max_slab_quotient(&self) -> f64 {
        self.slabs.iter().map(|s| s.max_quotient).fold(0.0, f64::max)
    }

    pub(crate) fn start(grid: &HeatGrid, u0: &[f64]) -> Self {
        let mut out = Self {
            traj: FieldTrajectory::new(None),
            steps: 0,
            picard_sweeps: 0,
            slabs: Vec::new(),
            energy: 0.0,
            extrapolated: false,
            grad_integral: 0.0,
        };
        out.record(grid, 0.0, u0);
        out
    }

    /// Appends a state given by its interior values.
    pub(crate) fn record(&mut self, grid: &HeatGrid, t: f64, interior: &[f64]) {
        let h = grid.h();
        let mut full = Vec::with_capacity(interior.len() + 2);
        full.push(0.0);
        full.extend_from_slice(interior);
        full.push(0.0);
        let l1 = interior.iter().map(|v| v.abs()).sum::<f64>() * h;
        let l2sq = interior.iter().map(|v| v * v).sum::<f64>() * h;
        if t > 0.0 {
            let grad_sq: f64 = face_gradients(interior, h).iter().map(|g| g * g).sum::<f64>() * h;
            self.grad_integral += grid.dt * grad_sq;
        }
        let sup = self.traj.l2.iter().map(|v| v * v).fold(l2sq, f64::max);
        self.energy = sup + self.grad_integral;
        let grid_m = MacroGrid::interval(0.0, 1.0, interior.len() + 2).expect("valid unit grid");
        let field = MacroField::new(grid_m, full).expect("sizes match");
        self.traj.push(t, field, l1, l2sq.sqrt());
    }
}

/// Values of an interior vector stacked over a slab, weighted `L²(h·dt)`.
fn slab_norm(v: &[Vec<f64>], w: f64) -> f64 {
    (v.iter().flatten().map(|x| x * x).sum::<f64>() * w).sqrt()
}

fn slab_diff(a: &[Vec<f64>], b: &[Vec<f64>], w: f64) -> f64 {
    (a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        * w)
        .sqrt()
}

/// Trapezoid quadrature of the causal memory integral at level `n` over
/// levels `n - window..=n`.
fn memory_at<'a>(n: usize, window: usize, dt: f64, ktab: &[Vec<f64>], level: &dyn Fn(usize) -> &'a [f64]) -> Vec<f64> {
    let m = ktab[0].len();
    let j0 = n.saturating_sub(window);
    let mut mem = vec![0.0; m];
    if n == j0 {
        return mem;
    }
    for j in j0..=n {
        let w = if j == j0 || j == n { 0.5 * dt } else { dt };
        let k = &ktab[n - j];
        let a = level(j);
        for i in 0..m {
            mem[i] += w * k[i] * a[i];
        }
    }
    mem
}

/// Fine solve at one `ε`.
pub fn solve_fine_heat(cfg: &HeatConfig, eps: f64, grid: &HeatGrid) -> Result<HeatTrajectory> {
    if cfg.dim() != 1 {
        return Err(invalid("the heat solvers work on (0, 1)"));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid(format!("eps must be positive, got {eps}")));
    }
    let steps = grid.steps(cfg.horizon)?;
    let h = grid.h();
    let dt = grid.dt;
    let nodes = interior_nodes(grid.cells);
    let m = nodes.len();
    let delta_y = |x: f64| -> Result<Vec<f64>> { Ok(dirac_point(&[x / eps], &cfg.algebra)?.coords().to_vec()) };
    let delta_t = |t: f64| -> Result<Vec<f64>> { Ok(dirac_point(&[t / eps], &cfg.algebra_tau)?.coords().to_vec()) };
    let s_nodes = nodes.iter().map(|x| delta_y(*x)).collect::<Result<Vec<_>>>()?;
    let s_faces = (0..grid.cells)
        .map(|f| delta_y((f as f64 + 0.5) * h))
        .collect::<Result<Vec<_>>>()?;
    let rho: Vec<f64> = s_nodes.iter().map(|s| cfg.density.eval(s)).collect();
    let source: Vec<f64> = nodes.iter().map(|x| cfg.source.eval(&[*x])).collect();
    let u0: Vec<f64> = nodes.iter().map(|x| cfg.initial.eval(&[*x])).collect();
    let mut out = HeatTrajectory::start(grid, &u0);

    let step_with = |cur: &[f64], before: Option<&[f64]>, load: &[f64], n: usize| -> Result<(Vec<f64>, usize)> {
        let tau = delta_t(n as f64 * dt)?;
        let secant = |f: usize, g: f64| cfg.flux.secant(&s_faces[f], &tau, &[g]);
        let (prev, dt_eff) = bdf2_history(cur, before, dt);
        ImplicitStep { h, dt: dt_eff, rho: &rho, load, tol: STEP_TOL, max_sweeps: MAX_SWEEPS }.solve(&prev, &secant, None)
    };

    if !cfg.has_memory() {
        let mut u = u0;
        let mut before: Option<Vec<f64>> = None;
        for n in 1..=steps {
            let (next, sweeps) = step_with(&u, before.as_deref(), &source, n)?;
            out.picard_sweeps += sweeps;
            out.record(grid, n as f64 * dt, &next);
            before = Some(std::mem::replace(&mut u, next));
        }
        out.steps = steps;
        return Ok(out);
    }

    // Memory path. a0 history at interior nodes, one row per time level.
    let a0_at = |u: &[f64], n: usize| -> Result<Vec<f64>> {
        let tau = delta_t(n as f64 * dt)?;
        let g = node_gradients(&face_gradients(u, h));
        Ok((0..m).map(|i| cfg.zeroth.eval(&s_nodes[i], &tau, &[g[i]])).collect())
    };
    // kernel by lag
    let ktab: Vec<Vec<f64>> = (0..=steps)
        .into_par_iter()
        .map(|lag| -> Result<Vec<f64>> {
            let tau = delta_t(lag as f64 * dt)?;
            Ok(s_nodes.iter().map(|s| cfg.memory.eval(s, &tau)).collect())
        })
        .collect::<Result<_>>()?;
    let window = cfg
        .memory_horizon
        .map_or(steps, |hz| ((hz / dt).floor() as usize).min(steps));
    let c = cfg.constants;
    let ksup = cfg.memory_sup();
    let weight = h * dt;

    let mut history: Vec<Vec<f64>> = vec![a0_at(&u0, 0)?];
    let mut u = u0;
    let mut u_before: Option<Vec<f64>> = None;
    let mut done = 0;
    let mut slab_len = steps;
    while done < steps {
        let mut halvings = 0;
        'slab: loop {
            let len = slab_len.min(steps - done);
            let mut z: Vec<Vec<f64>> = vec![history[done].clone(); len];
            let mut prev_inc: Option<f64> = None;
            let mut max_q = 0.0f64;
            for sweep in 1..=MAX_SWEEPS {
                let mut states = Vec::with_capacity(len);
                let mut za = Vec::with_capacity(len);
                let mut sweeps_here = 0;
                let mut cur = u.clone();
                let mut before = u_before.clone();
                for k in 1..=len {
                    let n = done + k;
                    let level = |j: usize| -> &[f64] {
                        if j <= done {
                            &history[j]
                        } else {
                            &z[j - done - 1]
                        }
                    };
                    let mem = memory_at(n, window, dt, &ktab, &level);
                    let load: Vec<f64> = source.iter().zip(&mem).map(|(f, q)| f - q).collect();
                    let (next, s) = step_with(&cur, before.as_deref(), &load, n)?;
                    sweeps_here += s;
                    za.push(a0_at(&next, n)?);
                    states.push(next.clone());
                    before = Some(std::mem::replace(&mut cur, next));
                }
                let inc = slab_diff(&za, &z, weight);
                if !inc.is_finite() {
                    return Err(Error::Divergence(format!("memory iteration blew up at step {done}")));
                }
                if let Some(p) = prev_inc {
                    let q = if p > 0.0 { inc / p } else { 0.0 };
                    max_q = max_q.max(q);
                    if q >= SLAB_CONTRACTION && len > 1 {
                        slab_len = (len / 2).max(1);
                        halvings += 1;
                        continue 'slab;
                    }
                }
                z = za;
                if inc < (STEP_TOL * slab_norm(&z, weight).max(1.0)).max(ABS_FLOOR) {
                    for (k, st) in states.iter().enumerate() {
                        out.record(grid, (done + k + 1) as f64 * dt, st);
                    }
                    out.picard_sweeps += sweeps_here;
                    history.extend(z);
                    out.slabs.push(SlabRecord {
                        start_step: done,
                        steps: len,
                        sweeps: sweep,
                        max_quotient: max_q,
                        apriori_factor: c.c0 * ksup * len as f64 * dt / (PI * c.c1),
                        halvings,
                    });
                    let last = states.pop().expect("slab has at least one step");
                    u_before = Some(states.pop().unwrap_or_else(|| std::mem::take(&mut u)));
                    u = last;
                    done += len;
                    break 'slab;
                }
                prev_inc = Some(inc);
            }
            return Err(Error::Contraction {
                factor: max_q,
                sweeps: MAX_SWEEPS,
            });
        }
    }
    out.steps = steps;
    Ok(out)
}
