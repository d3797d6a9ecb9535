//! Homogenized coefficients tabulated on a tensor grid of `λ`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cell::{solve_cell, CellGrid, CellOps, CellSolution, CELL_TOLERANCE};
use super::config::{HeatConfig, HeatConstants};
use super::fd::{face_gradients, interior_nodes, HeatGrid, ImplicitStep};
use super::fine::{MAX_SWEEPS, STEP_TOL};
use crate::algebra::{spectrum_convolve, AlgebraSpec, TorusField};
use crate::error::{invalid, Error, Result};
use crate::io::fmt_f64;
use crate::numerics::grid::strides;
use crate::numerics::quad::interp_torus;

/// Slack on the effective monotonicity and Lipschitz checks.
pub const GRID_SLACK: f64 = 0.05;

/// `b`, `b₀` and `ρ̃` on a tensor grid of `λ`, interpolated multilinearly.
#[derive(Debug, Clone)]
pub struct EffectiveCoefficients {
    /// Sorted sample points per axis of `λ`.
    pub axes: Vec<Vec<f64>>,
    /// `b(λ)` per grid point (row-major over `axes`), `N` components each.
    pub b_table: Vec<Vec<f64>>,
    pub b0_table: Vec<f64>,
    pub rho_eff: f64,
    /// Worst cell residual over the table.
    pub cell_residual: f64,
    pub cell_grid: CellGrid,
    pub correctors: Vec<CellSolution>,
}

/// Outcome of the effective monotonicity and Lipschitz checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveChecks {
    /// Smallest `(b(λ)-b(λ'))·(λ-λ') / |λ-λ'|²` over tabulated pairs.
    pub monotonicity: f64,
    /// Largest `|b(λ)-b(λ')| / |λ-λ'|`.
    pub lipschitz: f64,
    pub monotone_ok: bool,
    pub lipschitz_ok: bool,
}

/// Corner weights of the cell of a tensor grid containing `x`; outside the
/// grid the boundary cell is extended linearly.
fn multilinear(axes: &[Vec<f64>], x: &[f64]) -> (Vec<(usize, f64)>, bool) {
    let st = strides(&axes.iter().map(Vec::len).collect::<Vec<_>>());
    let mut outside = false;
    let mut lo = Vec::with_capacity(axes.len());
    let mut frac = Vec::with_capacity(axes.len());
    for (ax, &xi) in axes.iter().zip(x) {
        let n = ax.len();
        if n == 1 {
            lo.push(0);
            frac.push(0.0);
            outside |= xi != ax[0];
            continue;
        }
        outside |= xi < ax[0] || xi > ax[n - 1];
        let i = ax.partition_point(|a| *a <= xi).clamp(1, n - 1) - 1;
        lo.push(i);
        frac.push((xi - ax[i]) / (ax[i + 1] - ax[i]));
    }
    let d = axes.len();
    let mut out = Vec::with_capacity(1 << d);
    for mask in 0..(1usize << d) {
        let mut w = 1.0;
        let mut flat = 0;
        let mut skip = false;
        for k in 0..d {
            let up = (mask >> k) & 1 == 1;
            if axes[k].len() == 1 && up {
                skip = true;
                break;
            }
            w *= if up { frac[k] } else { 1.0 - frac[k] };
            flat += (lo[k] + usize::from(up)) * st[k];
        }
        if !skip {
            out.push((flat, w));
        }
    }
    (out, outside)
}

impl EffectiveCoefficients {
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    /// Grid points in table order.
    pub fn lambda_points(&self) -> Vec<Vec<f64>> {
        let dims: Vec<usize> = self.axes.iter().map(Vec::len).collect();
        let st = strides(&dims);
        (0..dims.iter().product::<usize>())
            .map(|p| {
                let mut rest = p;
                self.axes
                    .iter()
                    .zip(&st)
                    .map(|(ax, s)| {
                        let i = rest / s;
                        rest %= s;
                        ax[i]
                    })
                    .collect()
            })
            .collect()
    }

    /// `(b(λ), b₀(λ), extrapolated)`.
    pub fn interpolate(&self, lambda: &[f64]) -> (Vec<f64>, f64, bool) {
        let (corners, outside) = multilinear(&self.axes, lambda);
        let mut b = vec![0.0; self.dim()];
        let mut b0 = 0.0;
        for (p, w) in corners {
            for (bi, t) in b.iter_mut().zip(&self.b_table[p]) {
                *bi += w * t;
            }
            b0 += w * self.b0_table[p];
        }
        (b, b0, outside)
    }

    /// Interpolated corrector `v(λ)(s, τ)`: multilinear in `λ` and on the
    /// torus, linear between `τ`-slices.
    pub fn corrector(&self, lambda: &[f64], s: &[f64], tau: f64) -> f64 {
        let (corners, _) = multilinear(&self.axes, lambda);
        let n_tau = self.cell_grid.tau_slices;
        let t = (tau - tau.floor()) * n_tau as f64;
        let j = (t.floor() as usize) % n_tau;
        let f = t - t.floor();
        let dims = &self.cell_grid.y_dims;
        corners
            .iter()
            .map(|&(p, w)| {
                let sl = &self.correctors[p].slices;
                let lo = interp_torus(dims, sl[j].values(), s);
                let hi = if f > 0.0 { interp_torus(dims, sl[(j + 1) % n_tau].values(), s) } else { lo };
                w * ((1.0 - f) * lo + f * hi)
            })
            .sum()
    }

    /// `τ`-mean of the corrector at `λ`, on the cell grid's torus nodes.
    pub fn corrector_tau_mean(&self, lambda: &[f64]) -> Vec<f64> {
        let (corners, _) = multilinear(&self.axes, lambda);
        let len: usize = self.cell_grid.y_dims.iter().product();
        let mut out = vec![0.0; len];
        for (p, w) in corners {
            let sl = &self.correctors[p].slices;
            let k = w / sl.len() as f64;
            for s in sl {
                out.iter_mut().zip(s.values()).for_each(|(o, v)| *o += k * v);
            }
        }
        out
    }

    /// Monotonicity and Lipschitz constants over all tabulated pairs.
    pub fn checks(&self, constants: &HeatConstants) -> EffectiveChecks {
        let pts = self.lambda_points();
        let mut mono = f64::INFINITY;
        let mut lip = 0.0f64;
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                let dl: Vec<f64> = pts[i].iter().zip(&pts[j]).map(|(a, b)| a - b).collect();
                let db: Vec<f64> = self.b_table[i].iter().zip(&self.b_table[j]).map(|(a, b)| a - b).collect();
                let dl2: f64 = dl.iter().map(|v| v * v).sum();
                let db2: f64 = db.iter().map(|v| v * v).sum();
                let dot: f64 = dl.iter().zip(&db).map(|(a, b)| a * b).sum();
                mono = mono.min(dot / dl2);
                lip = lip.max((db2 / dl2).sqrt());
            }
        }
        EffectiveChecks {
            monotonicity: mono,
            lipschitz: lip,
            monotone_ok: mono >= constants.c1 * (1.0 - GRID_SLACK),
            lipschitz_ok: lip <= constants.c0 * (1.0 + GRID_SLACK),
        }
    }

    /// Columns `lambda_0.., b_0.., b0, rho_eff`.
    pub fn to_csv(&self) -> String {
        let n = self.dim();
        let mut head: Vec<String> = (0..n).map(|i| format!("lambda_{i}")).collect();
        head.extend((0..n).map(|i| format!("b_{i}")));
        head.push("b0".into());
        head.push("rho_eff".into());
        let mut out = head.join(",") + "\n";
        for (p, l) in self.lambda_points().iter().enumerate() {
            let row: Vec<String> = l
                .iter()
                .chain(&self.b_table[p])
                .chain(std::iter::once(&self.b0_table[p]))
                .chain(std::iter::once(&self.rho_eff))
                .map(|v| fmt_f64(*v))
                .collect();
            out += &row.join(",");
            out.push('\n');
        }
        out
    }
}

/// `b₀(λ)` from one cell solution: per `y`-center, the `τ`-spectrum
/// convolution of `K` with `a₀`, averaged over both variables.
fn b0_of(cfg: &HeatConfig, sol: &CellSolution, centers: &[Vec<f64>]) -> Result<f64> {
    if cfg.zeroth.is_zero() || cfg.memory.is_zero() {
        return Ok(0.0);
    }
    let n = cfg.dim();
    let tau_spec = AlgebraSpec::periodic(1)?;
    let nt = sol.taus.len();
    let mut acc = 0.0;
    for (c, s) in centers.iter().enumerate() {
        let k = TorusField::new(&tau_spec, &[nt], sol.taus.iter().map(|t| cfg.memory.eval(s, &[*t])).collect())?;
        let a0 = TorusField::new(
            &tau_spec,
            &[nt],
            sol.taus
                .iter()
                .zip(&sol.gradients)
                .map(|(t, g)| cfg.zeroth.eval(s, &[*t], &g[c * n..(c + 1) * n]))
                .collect(),
        )?;
        acc += spectrum_convolve(&k, &a0)?.mean();
    }
    Ok(acc / centers.len() as f64)
}

/// Solves the cell problems on the tensor grid `axes` and tabulates the
/// effective coefficients.
pub fn effective_coefficients(cfg: &HeatConfig, axes: Vec<Vec<f64>>, grid: &CellGrid) -> Result<EffectiveCoefficients> {
    if axes.len() != cfg.dim() || axes.iter().any(|a| a.is_empty() || a.windows(2).any(|w| !(w[1] > w[0]))) {
        return Err(invalid("lambda axes must be one increasing list per space dimension"));
    }
    let ops = CellOps::new(&grid.y_dims, cfg.algebra.frequencies());
    let centers = ops.centers();
    let mut table = EffectiveCoefficients {
        axes,
        b_table: Vec::new(),
        b0_table: Vec::new(),
        rho_eff: 0.0,
        cell_residual: 0.0,
        cell_grid: grid.clone(),
        correctors: Vec::new(),
    };
    let points = table.lambda_points();
    let rows = points
        .par_iter()
        .map(|l| -> Result<(CellSolution, Vec<f64>, f64)> {
            let sol = solve_cell(cfg, l, grid)?;
            if sol.residual >= CELL_TOLERANCE {
                return Err(Error::CellSolver {
                    residual: sol.residual,
                    history: vec![sol.residual],
                });
            }
            let n = l.len();
            let mut b = vec![0.0; n];
            let mut a = vec![0.0; n];
            for (t, g) in sol.taus.iter().zip(&sol.gradients) {
                for (c, s) in centers.iter().enumerate() {
                    cfg.flux.eval(s, &[*t], &g[c * n..(c + 1) * n], &mut a);
                    b.iter_mut().zip(&a).for_each(|(x, y)| *x += y);
                }
            }
            let count = (sol.taus.len() * centers.len()) as f64;
            b.iter_mut().for_each(|x| *x /= count);
            let b0 = b0_of(cfg, &sol, &centers)?;
            Ok((sol, b, b0))
        })
        .collect::<Result<Vec<_>>>()?;
    for (sol, b, b0) in rows {
        table.cell_residual = table.cell_residual.max(sol.residual);
        table.correctors.push(sol);
        table.b_table.push(b);
        table.b0_table.push(b0);
    }
    table.rho_eff = cfg.density.mean();
    Ok(table)
}

/// Gradient box from a macro solve with `b = λ`, inflated by 50%.
/// Returns one symmetric axis of `count` points per space dimension.
pub fn lambda_range_presolve(cfg: &HeatConfig, grid: &HeatGrid, count: usize) -> Result<Vec<Vec<f64>>> {
    if cfg.dim() != 1 {
        return Err(invalid("the heat solvers work on (0, 1)"));
    }
    if count < 2 {
        return Err(invalid("lambda axis needs >= 2 points"));
    }
    let steps = grid.steps(cfg.horizon)?;
    let (h, dt) = (grid.h(), grid.dt);
    let nodes = interior_nodes(grid.cells);
    let rho_field = TorusField::from_fn(&cfg.algebra, &[64], |s| cfg.density.eval(s))?;
    let rho = vec![rho_field.mean(); nodes.len()];
    let load: Vec<f64> = nodes.iter().map(|x| cfg.source.eval(&[*x])).collect();
    let mut u: Vec<f64> = nodes.iter().map(|x| cfg.initial.eval(&[*x])).collect();
    let sup = |u: &[f64]| face_gradients(u, h).iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let mut reach = sup(&u);
    let step = ImplicitStep { h, dt, rho: &rho, load: &load, tol: STEP_TOL, max_sweeps: MAX_SWEEPS };
    for _ in 0..steps {
        u = step.solve(&u, &|_, _| 1.0, None)?.0;
        reach = reach.max(sup(&u));
    }
    let r = 1.5 * reach.max(1e-3);
    Ok(vec![(0..count)
        .map(|i| -r + 2.0 * r * i as f64 / (count - 1) as f64)
        .collect()])
}
