//! Σ-convergence diagnostics.
//!
//! A sequence `u_ε` on a macroscopic box weakly Σ-converges to a two-scale
//! limit `û₀(x, s)` when `∫ u_ε(x) ψ(x, x/ε) dx → ∬ û₀ ψ̂ dx dβ` for every
//! admissible test function. Test functions are given through their torus
//! profile `ψ̂(x, s)`; the oscillating trace is `ψ̂(x, δ(x/ε))`.
//!
//! Everything here is quadrature: trapezoid on the macro grid, plain
//! averages on the torus grid.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{dirac_point, frac, AlgebraSpec, TorusField, TorusPoint};
use crate::error::{invalid, Error, Result};
use crate::io::fmt_f64;
use crate::numerics::fft::{convolve_kernel, AxisMode};
use crate::numerics::grid::{require_pow2, strides};
use crate::numerics::quad::trapezoid_weights;
use crate::numerics::{Axis, Grid};

/// Uniform box grid for macroscopic variables. The first `n_space` axes are
/// physical space (they carry the oscillation `x/ε`); any remaining axes,
/// such as time, do not oscillate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroGrid {
    axes: Vec<Axis>,
    n_space: usize,
}

impl MacroGrid {
    pub fn new(axes: Vec<Axis>, n_space: usize) -> Result<Self> {
        if axes.is_empty() || n_space == 0 || n_space > axes.len() {
            return Err(invalid("macro grid needs at least one spatial axis"));
        }
        if axes.iter().any(|a| a.n < 2 || !(a.h > 0.0 && a.h.is_finite())) {
            return Err(invalid("macro axes need >= 2 nodes and positive spacing"));
        }
        Ok(Self { axes, n_space })
    }

    /// `n` nodes on `[lo, hi]` inclusive, one spatial axis.
    pub fn interval(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new(vec![Axis::closed(lo, hi, n)], 1)
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn n_space(&self) -> usize {
        self.n_space
    }

    pub fn dims(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.n).collect()
    }

    pub fn spacings(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a.h).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, flat: usize, x: &mut [f64]) {
        let mut rem = flat;
        for k in (0..self.axes.len()).rev() {
            let n = self.axes[k].n;
            x[k] = self.axes[k].node(rem % n);
            rem /= n;
        }
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut x = vec![0.0; self.axes.len()];
        (0..self.len())
            .map(|i| {
                self.point(i, &mut x);
                x.clone()
            })
            .collect()
    }

    /// Tensor trapezoid weights.
    pub fn weights(&self) -> Vec<f64> {
        let per_axis: Vec<Vec<f64>> = self
            .axes
            .iter()
            .map(|a| trapezoid_weights(a.n, a.h, false))
            .collect();
        let dims = self.dims();
        let st = strides(&dims);
        (0..self.len())
            .map(|flat| {
                let mut rem = flat;
                let mut w = 1.0;
                for k in 0..dims.len() {
                    w *= per_axis[k][rem / st[k]];
                    rem %= st[k];
                }
                w
            })
            .collect()
    }

    /// Same grid with every axis translated by `-shift`.
    pub fn shifted(&self, shift: &[f64]) -> Self {
        let axes = self
            .axes
            .iter()
            .enumerate()
            .map(|(k, a)| Axis::new(a.lo - shift.get(k).copied().unwrap_or(0.0), a.h, a.n))
            .collect();
        Self {
            axes,
            n_space: self.n_space,
        }
    }

    /// Multilinear stencil `(flat index, weight)` locating `x`, or `None`
    /// outside the box.
    fn stencil(&self, x: &[f64]) -> Option<Vec<(usize, f64)>> {
        let d = self.axes.len();
        let dims = self.dims();
        let st = strides(&dims);
        let mut base = vec![0usize; d];
        let mut frac_part = vec![0.0; d];
        for k in 0..d {
            let a = &self.axes[k];
            let t = (x[k] - a.lo) / a.h;
            let tol = 1e-9;
            if t < -tol || t > (a.n - 1) as f64 + tol {
                return None;
            }
            let t = t.clamp(0.0, (a.n - 1) as f64);
            let mut i = t.floor() as usize;
            if i == a.n - 1 {
                i -= 1;
            }
            base[k] = i;
            frac_part[k] = t - i as f64;
        }
        let mut out = Vec::with_capacity(1 << d);
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut flat = 0;
            for k in 0..d {
                let up = (corner >> k) & 1 == 1;
                w *= if up { frac_part[k] } else { 1.0 - frac_part[k] };
                flat += (base[k] + usize::from(up)) * st[k];
            }
            if w != 0.0 {
                out.push((flat, w));
            }
        }
        Some(out)
    }
}

/// Torus profile `ψ̂(x, s)` of a test function; `x` ranges over the full
/// macro coordinates, `s` over the torus.
pub type TwoScaleFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;

/// A named test function.
#[derive(Clone)]
pub struct TestFunction {
    pub id: String,
    pub f: Arc<TwoScaleFn>,
}

impl TestFunction {
    pub fn new(id: impl Into<String>, f: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            id: id.into(),
            f: Arc::new(f),
        }
    }

    pub fn eval(&self, x: &[f64], s: &[f64]) -> f64 {
        (self.f)(x, s)
    }
}

impl std::fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "TestFunction({})", self.id)
    }
}

/// Cubic B-spline bump supported on `|t| < 2`.
pub fn cubic_bspline(t: f64) -> f64 {
    let a = t.abs();
    if a >= 2.0 {
        0.0
    } else if a >= 1.0 {
        (2.0 - a).powi(3) / 6.0
    } else {
        (4.0 - 6.0 * a * a + 3.0 * a.powi(3)) / 6.0
    }
}

/// Low torus Fourier modes in the order `1, cos 2πs₁, sin 2πs₁, cos 4πs₁, …`
/// cycling through torus axes.
pub fn torus_mode(k: usize, torus_dim: usize, s: &[f64]) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let j = k - 1;
    let pair = j / 2;
    let axis = pair % torus_dim;
    let freq = (pair / torus_dim + 1) as f64;
    let arg = 2.0 * PI * freq * s[axis];
    if j % 2 == 0 {
        arg.cos()
    } else {
        arg.sin()
    }
}

/// Default separating family: tensor products of B-spline bumps (at most
/// eight) on the macro box with the first eight torus modes.
pub fn default_test_bank(grid: &MacroGrid, torus_dim: usize, n_bumps: usize, n_modes: usize) -> Vec<TestFunction> {
    let n_bumps = n_bumps.clamp(1, 8);
    let n_modes = n_modes.clamp(1, 8);
    let d = grid.axes().len();
    let per_axis = (n_bumps as f64).powf(1.0 / d as f64).ceil() as usize;
    let mut bank = Vec::new();
    for j in 0..n_bumps {
        let mut rem = j;
        let mut centers = Vec::with_capacity(d);
        let mut widths = Vec::with_capacity(d);
        for a in grid.axes() {
            let q = rem % per_axis;
            rem /= per_axis;
            let len = a.hi() - a.lo;
            centers.push(a.lo + len * (q as f64 + 1.0) / (per_axis as f64 + 1.0));
            widths.push(len / (2.0 * (per_axis as f64 + 1.0)));
        }
        for k in 0..n_modes {
            let (c, w) = (centers.clone(), widths.clone());
            bank.push(TestFunction::new(format!("b{j}m{k}"), move |x, s| {
                let bump: f64 = x.iter().zip(&c).zip(&w).map(|((xi, ci), wi)| cubic_bspline((xi - ci) / wi)).product();
                bump * torus_mode(k, torus_dim, s)
            }));
        }
    }
    bank
}

/// Samples of a function on a [`MacroGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct MacroField {
    pub grid: MacroGrid,
    pub values: Vec<f64>,
}

impl MacroField {
    pub fn new(grid: MacroGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(format!(
                "macro field has {} samples, grid has {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: MacroGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut x = vec![0.0; grid.axes().len()];
        let values = (0..grid.len())
            .map(|i| {
                grid.point(i, &mut x);
                f(&x)
            })
            .collect();
        Self { grid, values }
    }

    pub fn integral(&self) -> f64 {
        self.grid.weights().iter().zip(&self.values).map(|(w, v)| w * v).sum()
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        self.grid
            .weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v.abs().powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    }

    /// Derivative along axis `axis`: central differences inside, second-order
    /// one-sided differences at the ends.
    pub fn derivative(&self, axis: usize) -> Result<MacroField> {
        let dims = self.grid.dims();
        if axis >= dims.len() {
            return Err(invalid(format!("axis {axis} out of range")));
        }
        let n = dims[axis];
        let h = self.grid.axes()[axis].h;
        let st = strides(&dims)[axis];
        let mut out = vec![0.0; self.values.len()];
        for (flat, o) in out.iter_mut().enumerate() {
            let i = (flat / st) % n;
            let v = |j: usize| self.values[flat - i * st + j * st];
            *o = if n == 2 {
                (v(1) - v(0)) / h
            } else if i == 0 {
                (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * h)
            } else if i == n - 1 {
                (3.0 * v(n - 1) - 4.0 * v(n - 2) + v(n - 3)) / (2.0 * h)
            } else {
                (v(i + 1) - v(i - 1)) / (2.0 * h)
            };
        }
        MacroField::new(self.grid.clone(), out)
    }
}

/// A function of `(x, s)` sampled on macro grid × torus grid, stored
/// macro-major: sample `(i, j)` lives at `i * torus_len + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoScaleField {
    macro_grid: MacroGrid,
    spec: AlgebraSpec,
    torus: Grid,
    values: Vec<f64>,
}

impl TwoScaleField {
    pub fn new(macro_grid: MacroGrid, spec: &AlgebraSpec, torus_dims: &[usize], values: Vec<f64>) -> Result<Self> {
        if torus_dims.len() != spec.torus_dim() {
            return Err(invalid("torus grid rank differs from the algebra's torus dimension"));
        }
        let torus = Grid::torus(torus_dims)?;
        if values.len() != macro_grid.len() * torus.len() {
            return Err(invalid("two-scale sample count does not match grids"));
        }
        Ok(Self {
            macro_grid,
            spec: spec.clone(),
            torus,
            values,
        })
    }

    /// Samples a torus profile `f(x, s)`.
    pub fn from_fn(
        macro_grid: MacroGrid,
        spec: &AlgebraSpec,
        torus_dims: &[usize],
        f: impl Fn(&[f64], &[f64]) -> f64,
    ) -> Result<Self> {
        let torus = Grid::torus(torus_dims)?;
        let s_nodes = torus_nodes(&torus);
        let mut x = vec![0.0; macro_grid.axes().len()];
        let mut values = Vec::with_capacity(macro_grid.len() * torus.len());
        for i in 0..macro_grid.len() {
            macro_grid.point(i, &mut x);
            for s in &s_nodes {
                values.push(f(&x, s));
            }
        }
        Self::new(macro_grid, spec, torus_dims, values)
    }

    /// Lift of a test function: `ψ̂` sampled on the grids.
    pub fn lift(macro_grid: MacroGrid, spec: &AlgebraSpec, torus_dims: &[usize], psi: &TestFunction) -> Result<Self> {
        Self::from_fn(macro_grid, spec, torus_dims, |x, s| psi.eval(x, s))
    }

    /// A macro field viewed as constant in `s`.
    pub fn from_macro(field: &MacroField, spec: &AlgebraSpec, torus_dims: &[usize]) -> Result<Self> {
        let m: usize = torus_dims.iter().product();
        let values = field.values.iter().flat_map(|&v| std::iter::repeat_n(v, m)).collect();
        Self::new(field.grid.clone(), spec, torus_dims, values)
    }

    pub fn macro_grid(&self) -> &MacroGrid {
        &self.macro_grid
    }

    pub fn spec(&self) -> &AlgebraSpec {
        &self.spec
    }

    pub fn torus_grid(&self) -> &Grid {
        &self.torus
    }

    pub fn torus_dims(&self) -> &[usize] {
        self.torus.dims()
    }

    pub fn torus_len(&self) -> usize {
        self.torus.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            values,
            ..self.clone()
        }
    }

    pub fn slice(&self, macro_index: usize) -> &[f64] {
        let m = self.torus.len();
        &self.values[macro_index * m..(macro_index + 1) * m]
    }

    /// Torus average at each macro node.
    pub fn torus_mean(&self) -> MacroField {
        let m = self.torus.len() as f64;
        let values = (0..self.macro_grid.len())
            .map(|i| self.slice(i).iter().sum::<f64>() / m)
            .collect();
        MacroField {
            grid: self.macro_grid.clone(),
            values,
        }
    }

    /// `L^p(Ω × torus)` norm: macro trapezoid of torus averages of `|u|^p`.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let m = self.torus.len() as f64;
        let w = self.macro_grid.weights();
        (0..self.macro_grid.len())
            .map(|i| w[i] * self.slice(i).iter().map(|v| v.abs().powf(p)).sum::<f64>() / m)
            .sum::<f64>()
            .powf(1.0 / p)
    }

    /// Torus translation `s ↦ s + r` applied at every macro node.
    pub fn torus_translate(&self, r: &TorusPoint) -> Result<Self> {
        if r.dim() != self.torus.ndim() {
            return Err(invalid("translation dimension differs from torus dimension"));
        }
        if r.coords().iter().all(|c| *c == 0.0) {
            return Ok(self.clone());
        }
        let dims = self.torus.dims().to_vec();
        // grid-aligned shifts are exact index rolls
        let steps: Option<Vec<usize>> = r
            .coords()
            .iter()
            .zip(&dims)
            .map(|(c, &n)| {
                let t = c * n as f64;
                ((t - t.round()).abs() < 1e-9).then(|| (t.round() as usize) % n)
            })
            .collect();
        let m = self.torus.len();
        let mut out = vec![0.0; self.values.len()];
        match steps {
            Some(steps) => {
                let mut idx = vec![0; dims.len()];
                let mut src = vec![0; dims.len()];
                for j in 0..m {
                    self.torus.unravel(j, &mut idx);
                    for k in 0..dims.len() {
                        src[k] = (idx[k] + steps[k]) % dims[k];
                    }
                    let js = self.torus.ravel(&src);
                    for i in 0..self.macro_grid.len() {
                        out[i * m + j] = self.values[i * m + js];
                    }
                }
            }
            None => {
                out.par_chunks_mut(m).enumerate().try_for_each(|(i, chunk)| -> Result<()> {
                    let f = TorusField::new(&self.spec, &dims, self.slice(i).to_vec())?;
                    chunk.copy_from_slice(f.translate(r)?.values());
                    Ok(())
                })?;
            }
        }
        Ok(self.with_values(out))
    }
}

fn torus_nodes(torus: &Grid) -> Vec<Vec<f64>> {
    let dims = torus.dims();
    let mut idx = vec![0; dims.len()];
    (0..torus.len())
        .map(|j| {
            torus.unravel(j, &mut idx);
            idx.iter().zip(dims).map(|(&i, &n)| i as f64 / n as f64).collect()
        })
        .collect()
}

/// Oscillating trace `x ↦ ψ̂(x, δ(x/ε))` on a macro grid.
pub fn trace_sample(psi: &TwoScaleFn, eps: f64, grid: &MacroGrid, spec: &AlgebraSpec) -> Result<Vec<f64>> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid(format!("eps must be positive, got {eps}")));
    }
    if grid.n_space() != spec.space_dim() {
        return Err(invalid(format!(
            "macro grid has {} spatial axes, algebra lives on R^{}",
            grid.n_space(),
            spec.space_dim()
        )));
    }
    let ns = grid.n_space();
    let mut x = vec![0.0; grid.axes().len()];
    let mut y = vec![0.0; ns];
    (0..grid.len())
        .map(|i| {
            grid.point(i, &mut x);
            for k in 0..ns {
                y[k] = x[k] / eps;
            }
            let s = dirac_point(&y, spec)?;
            Ok(psi(&x, s.coords()))
        })
        .collect()
}

/// `∫_Ω u_ε(x) ψ(x, x/ε) dx` by the trapezoid rule.
pub fn weak_sigma_pairing(u_eps: &MacroField, psi: &TwoScaleFn, eps: f64, spec: &AlgebraSpec) -> Result<f64> {
    let trace = trace_sample(psi, eps, &u_eps.grid, spec)?;
    let w = u_eps.grid.weights();
    Ok(u_eps
        .values
        .iter()
        .zip(&trace)
        .zip(&w)
        .map(|((u, t), w)| u * t * w)
        .sum())
}

/// `∬_{Ω×K} û₀ ψ̂ dx dβ`: macro trapezoid of torus averages.
pub fn limit_pairing(u0: &TwoScaleField, psi: &TwoScaleFn) -> f64 {
    let nodes = torus_nodes(&u0.torus);
    let w = u0.macro_grid.weights();
    let m = nodes.len() as f64;
    let mut x = vec![0.0; u0.macro_grid.axes().len()];
    let mut acc = 0.0;
    for i in 0..u0.macro_grid.len() {
        u0.macro_grid.point(i, &mut x);
        let slice = u0.slice(i);
        let inner: f64 = slice.iter().zip(&nodes).map(|(v, s)| v * psi(&x, s)).sum();
        acc += w[i] * inner / m;
    }
    acc
}

/// An ε-indexed family of macro fields.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsSequence {
    pub eps_values: Vec<f64>,
    pub fields: Vec<MacroField>,
    pub provenance: String,
}

impl EpsSequence {
    pub fn new(eps_values: Vec<f64>, fields: Vec<MacroField>, provenance: impl Into<String>) -> Result<Self> {
        if eps_values.len() != fields.len() {
            return Err(invalid("one field per eps value required"));
        }
        check_eps_schedule(&eps_values)?;
        Ok(Self {
            eps_values,
            fields,
            provenance: provenance.into(),
        })
    }

    /// Samples `g(x, ε)` on per-ε grids.
    pub fn generate(
        eps_values: Vec<f64>,
        grid_for: impl Fn(f64) -> MacroGrid,
        g: impl Fn(&[f64], f64) -> f64,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let fields = eps_values
            .iter()
            .map(|&e| MacroField::from_fn(grid_for(e), |x| g(x, e)))
            .collect();
        Self::new(eps_values, fields, provenance)
    }

    pub fn len(&self) -> usize {
        self.eps_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps_values.is_empty()
    }
}

pub fn check_eps_schedule(eps: &[f64]) -> Result<()> {
    if eps.is_empty() {
        return Err(invalid("empty eps schedule"));
    }
    if eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(invalid("eps values must be positive"));
    }
    if eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid("eps values must be strictly decreasing"));
    }
    Ok(())
}

/// Default weak-Σ verdict tolerance (relative).
pub const DEFAULT_SIGMA_TOL: f64 = 5e-2;

/// Residual table of a Σ-convergence experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaTestResult {
    pub eps: Vec<f64>,
    pub psi_ids: Vec<String>,
    /// `pairings[j][k]`: ε_j against test function k.
    pub pairings: Vec<Vec<f64>>,
    pub limits: Vec<f64>,
    pub residuals: Vec<Vec<f64>>,
    /// Max over the bank of the residuals at each ε.
    pub max_residuals: Vec<f64>,
    /// Strong mode: `|‖u_ε‖ - ‖û₀‖|` per ε.
    pub norm_residuals: Option<Vec<f64>>,
    /// Normalization for relative residuals: the largest pairing or limit
    /// magnitude in the table (floored).
    pub scale: f64,
    pub tol: f64,
    pub monotone: bool,
    pub verdict: bool,
}

impl SigmaTestResult {
    pub fn from_pairings(
        eps: Vec<f64>,
        psi_ids: Vec<String>,
        pairings: Vec<Vec<f64>>,
        limits: Vec<f64>,
        tol: f64,
    ) -> Self {
        let residuals: Vec<Vec<f64>> = pairings
            .iter()
            .map(|row| row.iter().zip(&limits).map(|(p, l)| (p - l).abs()).collect())
            .collect();
        let max_residuals: Vec<f64> = residuals.iter().map(|r| r.iter().copied().fold(0.0, f64::max)).collect();
        let scale = pairings
            .iter()
            .flatten()
            .chain(&limits)
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1e-14);
        let monotone = tail_decreasing(&max_residuals, scale);
        let final_rel = max_residuals.last().copied().unwrap_or(0.0) / scale;
        Self {
            eps,
            psi_ids,
            pairings,
            limits,
            residuals,
            max_residuals,
            norm_residuals: None,
            scale,
            tol,
            monotone,
            verdict: monotone && final_rel < tol,
        }
    }

    /// Final max residual relative to [`Self::scale`].
    pub fn final_relative(&self) -> f64 {
        self.max_residuals.last().copied().unwrap_or(0.0) / self.scale
    }

    /// CSV: `eps, psi_id, pairing, limit, residual`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eps,psi_id,pairing,limit,residual\n");
        for (j, e) in self.eps.iter().enumerate() {
            for (k, id) in self.psi_ids.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    fmt_f64(*e),
                    id,
                    fmt_f64(self.pairings[j][k]),
                    fmt_f64(self.limits[k]),
                    fmt_f64(self.residuals[j][k])
                );
            }
        }
        out
    }
}

/// Non-increasing over the last three entries (all of them when shorter);
/// values below `1e-12·scale` count as settled.
fn tail_decreasing(r: &[f64], scale: f64) -> bool {
    let start = r.len().saturating_sub(3);
    r[start..]
        .windows(2)
        .all(|w| w[1] <= w[0] || w[1] <= 1e-12 * scale)
}

/// Weak or strong Σ residuals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaMode {
    Weak,
    /// Adds `|‖u_ε‖_{L^p} - ‖û₀‖_{L^p}|` per ε.
    Strong { p: f64 },
}

/// Residuals of `u_ε` against a candidate limit `û₀` over a test bank.
pub fn sigma_residuals(
    seq: &EpsSequence,
    u0: &TwoScaleField,
    bank: &[TestFunction],
    mode: SigmaMode,
    tol: f64,
) -> Result<SigmaTestResult> {
    if bank.is_empty() {
        return Err(invalid("empty test bank"));
    }
    let limits: Vec<f64> = bank.par_iter().map(|psi| limit_pairing(u0, psi.f.as_ref())).collect();
    let pairings = pair_sequence(seq, bank, u0.spec())?;
    let ids = bank.iter().map(|p| p.id.clone()).collect();
    let mut res = SigmaTestResult::from_pairings(seq.eps_values.clone(), ids, pairings, limits, tol);
    if let SigmaMode::Strong { p } = mode {
        if !(p >= 1.0) {
            return Err(invalid("strong-mode exponent must be >= 1"));
        }
        let target = u0.lp_norm(p);
        let norms: Vec<f64> = seq.fields.iter().map(|f| (f.lp_norm(p) - target).abs()).collect();
        let norm_ok = tail_decreasing(&norms, target.max(1e-14))
            && norms.last().copied().unwrap_or(0.0) < tol * target.max(1e-14);
        res.verdict = res.verdict && norm_ok;
        res.norm_residuals = Some(norms);
    }
    Ok(res)
}

fn pair_sequence(seq: &EpsSequence, bank: &[TestFunction], spec: &AlgebraSpec) -> Result<Vec<Vec<f64>>> {
    seq.eps_values
        .par_iter()
        .zip(&seq.fields)
        .map(|(&e, field)| {
            bank.iter()
                .map(|psi| weak_sigma_pairing(field, psi.f.as_ref(), e, spec))
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

/// Limit of the micro-translates `u_ε(x + εa)`: `û₀(x, s + δ(a))`.
pub fn micro_translate_limit(u0: &TwoScaleField, a: &[f64]) -> Result<TwoScaleField> {
    let r = dirac_point(a, u0.spec())?;
    u0.torus_translate(&r)
}

/// How values are supplied when a macro shift leaves the stored box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MacroExtension {
    /// Leaving the box is a domain error.
    Forbid,
    /// Zero outside the box.
    Zero,
    /// Periodic wrap of the box.
    Periodic,
}

/// Limit of the macro-translates `u_ε(x + a)` along a schedule with
/// `δ(a/ε) → r`: `û₀(x + a, s + r)`, on the grid of `u0`.
pub fn macro_translate_limit(
    u0: &TwoScaleField,
    a: &[f64],
    r: &TorusPoint,
    extension: MacroExtension,
) -> Result<TwoScaleField> {
    let mg = u0.macro_grid();
    let ns = mg.n_space();
    if a.len() != ns {
        return Err(invalid("macro shift dimension differs from spatial dimension"));
    }
    let m = u0.torus_len();
    let shifted = if a.iter().all(|v| *v == 0.0) {
        u0.values().to_vec()
    } else {
        let mut out = vec![0.0; u0.values().len()];
        let mut x = vec![0.0; mg.axes().len()];
        for i in 0..mg.len() {
            mg.point(i, &mut x);
            for k in 0..ns {
                x[k] += a[k];
                if extension == MacroExtension::Periodic {
                    let ax = &mg.axes()[k];
                    let len = ax.h * (ax.n - 1) as f64;
                    x[k] = ax.lo + frac((x[k] - ax.lo) / len) * len;
                }
            }
            match mg.stencil(&x) {
                Some(st) => {
                    for (src, w) in st {
                        for j in 0..m {
                            out[i * m + j] += w * u0.values()[src * m + j];
                        }
                    }
                }
                None => match extension {
                    MacroExtension::Forbid => {
                        return Err(Error::Domain(format!(
                            "shifted point {x:?} leaves the stored macro box"
                        )))
                    }
                    MacroExtension::Zero | MacroExtension::Periodic => {}
                },
            }
        }
        out
    };
    u0.with_values(shifted).torus_translate(r)
}

/// Relative size of the boundary samples of a kernel; must be negligible
/// for the truncation of `ℝ^N` to be sound.
pub fn boundary_ratio(field: &TwoScaleField) -> f64 {
    let mg = field.macro_grid();
    let dims = mg.dims();
    let max = field.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if max == 0.0 {
        return 0.0;
    }
    let st = strides(&dims);
    let mut edge = 0.0f64;
    for i in 0..mg.len() {
        let on_edge = (0..dims.len()).any(|k| {
            let q = (i / st[k]) % dims[k];
            q == 0 || q == dims[k] - 1
        });
        if on_edge {
            edge = field.slice(i).iter().fold(edge, |a, v| a.max(v.abs()));
        }
    }
    edge / max
}

/// Largest boundary-to-max ratio accepted for kernels on truncated `ℝ^N`.
pub const TRUNCATION_RATIO: f64 = 1e-8;

/// Double convolution `∬ u₀(t, r) v₀(x - t, s - r) dβ(r) dt`.
///
/// `u0` is extended by zero outside its box. `v0` is a kernel on a macro
/// grid with the same spacing, centered at the origin (node `n/2` at zero),
/// and must be negligible on its boundary. The result lives on `u0`'s grid.
pub fn double_convolution(u0: &TwoScaleField, v0: &TwoScaleField) -> Result<TwoScaleField> {
    if u0.torus_dims() != v0.torus_dims() {
        return Err(invalid(format!(
            "torus grids differ: {:?} vs {:?}",
            u0.torus_dims(),
            v0.torus_dims()
        )));
    }
    let (ug, vg) = (u0.macro_grid(), v0.macro_grid());
    if ug.axes().len() != vg.axes().len() {
        return Err(invalid("macro grids have different rank"));
    }
    let centers = kernel_centers(ug, vg)?;
    let ratio = boundary_ratio(v0);
    if ratio > TRUNCATION_RATIO {
        return Err(Error::Domain(format!(
            "kernel is not negligible at the truncation boundary (ratio {ratio:.2e})"
        )));
    }
    let mut u_dims = ug.dims();
    let mut v_dims = vg.dims();
    u_dims.extend_from_slice(u0.torus_dims());
    v_dims.extend_from_slice(v0.torus_dims());
    let mut centers_all = centers;
    centers_all.extend(std::iter::repeat_n(0, u0.torus_dims().len()));
    let mut spacings = ug.spacings();
    spacings.extend(u0.torus_grid().spacings());
    let mut modes = vec![AxisMode::Linear; ug.axes().len()];
    modes.extend(std::iter::repeat_n(AxisMode::Circular, u0.torus_dims().len()));
    let out = convolve_kernel(u0.values(), &u_dims, v0.values(), &v_dims, &centers_all, &spacings, &modes)?;
    Ok(u0.with_values(out))
}

/// Index of the origin on each axis of a kernel grid matching `field_grid`'s
/// spacing.
pub(crate) fn kernel_centers(field_grid: &MacroGrid, kernel_grid: &MacroGrid) -> Result<Vec<usize>> {
    field_grid
        .axes()
        .iter()
        .zip(kernel_grid.axes())
        .map(|(fa, ka)| {
            require_pow2(fa.n)?;
            require_pow2(ka.n)?;
            if ((fa.h - ka.h) / fa.h).abs() > 1e-12 {
                return Err(invalid("kernel grid spacing differs from field grid spacing"));
            }
            let c = -ka.lo / ka.h;
            if (c - c.round()).abs() > 1e-9 || c.round() < 0.0 || c.round() as usize >= ka.n {
                return Err(invalid("kernel grid must contain the origin as a node"));
            }
            Ok(c.round() as usize)
        })
        .collect()
}

/// Exponents `(p, q, m)` of a Young-type estimate, `1/p + 1/q = 1 + 1/m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YoungExponents {
    pub p: f64,
    pub q: f64,
    pub m: f64,
}

impl YoungExponents {
    pub fn new(p: f64, q: f64, m: f64) -> Result<Self> {
        if !(p >= 1.0 && q >= 1.0 && m >= 1.0) {
            return Err(invalid("Young exponents must be >= 1"));
        }
        if (1.0 / p + 1.0 / q - 1.0 - 1.0 / m).abs() > 1e-12 {
            return Err(invalid(format!("1/{p} + 1/{q} != 1 + 1/{m}")));
        }
        Ok(Self { p, q, m })
    }
}

/// Convolution-limit experiment: pairs `u_ε ∗ v_ε` (zero-padded macro
/// convolution) against the bank and compares with `u₀ ∗∗ v₀`.
///
/// `v_seq` fields are kernels on grids centered at the origin with the
/// spacing of the matching `u_seq` grid.
pub fn convolution_limit_check(
    u_seq: &EpsSequence,
    v_seq: &EpsSequence,
    u0: &TwoScaleField,
    v0: &TwoScaleField,
    bank: &[TestFunction],
    exponents: YoungExponents,
    tol: f64,
) -> Result<SigmaTestResult> {
    let _ = exponents;
    if bank.is_empty() {
        return Err(invalid("empty test bank"));
    }
    if u_seq.eps_values != v_seq.eps_values {
        return Err(invalid("u and v sequences use different eps schedules"));
    }
    let conv_seq = EpsSequence::new(
        u_seq.eps_values.clone(),
        u_seq
            .fields
            .par_iter()
            .zip(&v_seq.fields)
            .map(|(u, v)| macro_convolve(u, v))
            .collect::<Result<Vec<_>>>()?,
        format!("({}) * ({})", u_seq.provenance, v_seq.provenance),
    )?;
    let limit = double_convolution(u0, v0)?;
    sigma_residuals(&conv_seq, &limit, bank, SigmaMode::Weak, tol)
}

/// Zero-padded convolution of a field with a centered kernel.
pub fn macro_convolve(u: &MacroField, v: &MacroField) -> Result<MacroField> {
    let centers = kernel_centers(&u.grid, &v.grid)?;
    let modes = vec![AxisMode::Linear; u.grid.axes().len()];
    let out = convolve_kernel(
        &u.values,
        &u.grid.dims(),
        &v.values,
        &v.grid.dims(),
        &centers,
        &u.grid.spacings(),
        &modes,
    )?;
    MacroField::new(u.grid.clone(), out)
}

/// Checks `∇u_ε ⇀ ∇u₀ + ∇_y u₁` in weak Σ, one row of the bank per
/// spatial axis (ids suffixed `/d<axis>`).
pub fn gradient_decomposition_check(
    u_seq: &EpsSequence,
    u0: &MacroField,
    u1: &TwoScaleField,
    bank: &[TestFunction],
    tol: f64,
) -> Result<SigmaTestResult> {
    if bank.is_empty() {
        return Err(invalid("empty test bank"));
    }
    let spec = u1.spec();
    let ns = u1.macro_grid().n_space();
    if u0.grid != *u1.macro_grid() {
        return Err(invalid("u0 and u1 must share a macro grid"));
    }
    let mut ids = Vec::new();
    let mut limits = Vec::new();
    let mut per_axis_limit = Vec::with_capacity(ns);
    for axis in 0..ns {
        let du0 = u0.derivative(axis)?;
        let m = u1.torus_len();
        let mut vals = Vec::with_capacity(u1.values().len());
        for i in 0..u1.macro_grid().len() {
            let f = TorusField::new(spec, u1.torus_dims(), u1.slice(i).to_vec())?;
            let dy = crate::algebra::spectral_derivative(&f, axis)?;
            vals.extend(dy.values().iter().map(|v| v + du0.values[i]));
        }
        debug_assert_eq!(vals.len(), m * u1.macro_grid().len());
        let lim = u1.with_values(vals);
        for psi in bank {
            ids.push(format!("{}/d{axis}", psi.id));
            limits.push(limit_pairing(&lim, psi.f.as_ref()));
        }
        per_axis_limit.push(lim);
    }
    let pairings = u_seq
        .eps_values
        .par_iter()
        .zip(&u_seq.fields)
        .map(|(&e, field)| {
            let mut row = Vec::with_capacity(ns * bank.len());
            for axis in 0..ns {
                let du = field.derivative(axis)?;
                for psi in bank {
                    row.push(weak_sigma_pairing(&du, psi.f.as_ref(), e, spec)?);
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SigmaTestResult::from_pairings(
        u_seq.eps_values.clone(),
        ids,
        pairings,
        limits,
        tol,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p1() -> AlgebraSpec {
        AlgebraSpec::periodic(1).unwrap()
    }

    #[test]
    fn trace_examples() {
        let g = MacroGrid::interval(0.0, 1.0, 21).unwrap();
        let phi = |x: &[f64], _: &[f64]| x[0] * x[0];
        for eps in [0.5, 0.01] {
            let t = trace_sample(&phi, eps, &g, &p1()).unwrap();
            for (i, v) in t.iter().enumerate() {
                assert_eq!(*v, g.axes()[0].node(i).powi(2));
            }
        }
        let g = MacroGrid::interval(0.25, 0.35, 2).unwrap();
        let s = trace_sample(&|_, s| (2.0 * PI * s[0]).sin(), 0.5, &g, &p1()).unwrap();
        assert!(s[0].abs() < 1e-15);
        let c = trace_sample(&|x, s| x[0] * (2.0 * PI * s[0]).cos(), 0.1, &g, &p1()).unwrap();
        assert!((c[1] + 0.35).abs() < 1e-12);
        assert!(trace_sample(&phi, 0.0, &g, &p1()).is_err());
    }

    #[test]
    fn pairing_examples() {
        let g = MacroGrid::interval(0.0, 1.0, 1025).unwrap();
        let one = MacroField::from_fn(g.clone(), |_| 1.0);
        assert!((weak_sigma_pairing(&one, &|_, _| 1.0, 0.1, &p1()).unwrap() - 1.0).abs() < 1e-14);
        let eps = 1.0 / 8.0;
        let u = MacroField::from_fn(g.clone(), |x| (2.0 * PI * x[0] / eps).sin());
        let p = weak_sigma_pairing(&u, &|_, s| (2.0 * PI * s[0]).sin(), eps, &p1()).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        // ∫ x sin(32πx) dx over (0,1) = -1/(32π)
        let eps = 1.0 / 16.0;
        let u = MacroField::from_fn(g.clone(), |x| (2.0 * PI * x[0] / eps).sin());
        let p = weak_sigma_pairing(&u, &|x, _| x[0], eps, &p1()).unwrap();
        let exact = -1.0 / (32.0 * PI);
        assert!((p - exact).abs() < 1e-5);
        assert!(p.abs() < 1e-2);
    }

    #[test]
    fn limit_pairing_examples() {
        let g = MacroGrid::interval(0.0, 1.0, 65).unwrap();
        let u = TwoScaleField::from_fn(g.clone(), &p1(), &[32], |_, _| 1.0).unwrap();
        assert!((limit_pairing(&u, &|_, _| 1.0) - 1.0).abs() < 1e-14);
        let u = TwoScaleField::from_fn(g.clone(), &p1(), &[32], |_, s| (2.0 * PI * s[0]).sin()).unwrap();
        assert!((limit_pairing(&u, &|_, s| (2.0 * PI * s[0]).sin()) - 0.5).abs() < 1e-14);
        let u = TwoScaleField::from_fn(g, &p1(), &[32], |x, s| x[0] * (2.0 * PI * s[0]).sin()).unwrap();
        assert!((limit_pairing(&u, &|_, s| (2.0 * PI * s[0]).sin()) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn wrong_candidate_is_detected() {
        let eps = vec![1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
        let seq = EpsSequence::generate(
            eps,
            |_| MacroGrid::interval(0.0, 1.0, 4097).unwrap(),
            |x, e| (2.0 * PI * x[0] / e).sin(),
            "sin(2πx/ε)",
        )
        .unwrap();
        let bank = vec![TestFunction::new("sin", |_, s| (2.0 * PI * s[0]).sin())];
        let zero = TwoScaleField::from_fn(MacroGrid::interval(0.0, 1.0, 33).unwrap(), &p1(), &[16], |_, _| 0.0).unwrap();
        let r = sigma_residuals(&seq, &zero, &bank, SigmaMode::Weak, DEFAULT_SIGMA_TOL).unwrap();
        assert!((r.max_residuals[2] - 0.5).abs() < 1e-10);
        assert!(!r.verdict);
        assert!(sigma_residuals(&seq, &zero, &[], SigmaMode::Weak, 0.05).is_err());
    }

    #[test]
    fn eps_schedule_validation() {
        assert!(check_eps_schedule(&[0.5, 0.25]).is_ok());
        assert!(check_eps_schedule(&[0.25, 0.5]).is_err());
        assert!(check_eps_schedule(&[0.5, -0.25]).is_err());
        assert!(check_eps_schedule(&[]).is_err());
    }

    #[test]
    fn translations_at_zero_are_exact_identities() {
        let g = MacroGrid::interval(0.0, 1.0, 17).unwrap();
        let u = TwoScaleField::from_fn(g, &p1(), &[16], |x, s| x[0].exp() * (2.0 * PI * s[0]).sin() + s[0]).unwrap();
        assert_eq!(micro_translate_limit(&u, &[0.0]).unwrap(), u);
        let id = TorusPoint::identity(1);
        assert_eq!(macro_translate_limit(&u, &[0.0], &id, MacroExtension::Forbid).unwrap(), u);
    }

    #[test]
    fn quarter_shift_turns_sin_to_cos() {
        let g = MacroGrid::interval(0.0, 1.0, 9).unwrap();
        let u = TwoScaleField::from_fn(g.clone(), &p1(), &[32], |_, s| (2.0 * PI * s[0]).sin()).unwrap();
        let w = micro_translate_limit(&u, &[0.25]).unwrap();
        let want = TwoScaleField::from_fn(g, &p1(), &[32], |_, s| (2.0 * PI * s[0]).cos()).unwrap();
        for (a, b) in w.values().iter().zip(want.values()) {
            assert!((a - b).abs() < 1e-14);
        }
        let v = macro_translate_limit(&u, &[0.3], &TorusPoint::new(vec![0.25]), MacroExtension::Periodic).unwrap();
        for (a, b) in v.values().iter().zip(want.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn macro_shift_out_of_box_needs_extension() {
        let g = MacroGrid::interval(0.0, 1.0, 9).unwrap();
        let u = TwoScaleField::from_fn(g, &p1(), &[8], |x, _| x[0]).unwrap();
        let id = TorusPoint::identity(1);
        let err = macro_translate_limit(&u, &[0.5], &id, MacroExtension::Forbid).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
        let z = macro_translate_limit(&u, &[0.5], &id, MacroExtension::Zero).unwrap();
        // node x = 0.25 reads u at 0.75; node x = 0.75 is outside
        assert!((z.slice(2)[0] - 0.75).abs() < 1e-14);
        assert_eq!(z.slice(6)[0], 0.0);
    }

    #[test]
    fn double_convolution_zero_and_torus_mismatch() {
        let g = MacroGrid::interval(0.0, 1.0 - 1.0 / 16.0, 16).unwrap();
        let k = MacroGrid::new(vec![Axis::new(-0.5, 1.0 / 16.0, 16)], 1).unwrap();
        let u = TwoScaleField::from_fn(g.clone(), &p1(), &[8], |_, _| 0.0).unwrap();
        let v = TwoScaleField::from_fn(k.clone(), &p1(), &[8], |x, _| (-200.0 * x[0] * x[0]).exp()).unwrap();
        assert!(double_convolution(&u, &v).unwrap().values().iter().all(|v| *v == 0.0));
        let v4 = TwoScaleField::from_fn(k, &p1(), &[4], |_, _| 0.0).unwrap();
        assert!(double_convolution(&u, &v4).is_err());
    }

    #[test]
    fn young_exponent_identity() {
        assert!(YoungExponents::new(2.0, 1.0, 2.0).is_ok());
        assert!(YoungExponents::new(1.0, 1.0, 1.0).is_ok());
        assert!(YoungExponents::new(2.0, 2.0, 2.0).is_err());
    }

    #[test]
    fn csv_has_one_row_per_eps_and_psi() {
        let r = SigmaTestResult::from_pairings(
            vec![0.5, 0.25],
            vec!["a".into(), "b".into()],
            vec![vec![1.0, 2.0], vec![1.5, 2.5]],
            vec![1.6, 2.6],
            0.05,
        );
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.starts_with("eps,psi_id,pairing,limit,residual\n"));
        assert!(r.monotone);
    }

    #[test]
    fn bank_shape() {
        let g = MacroGrid::interval(0.0, 1.0, 33).unwrap();
        let bank = default_test_bank(&g, 1, 8, 8);
        assert_eq!(bank.len(), 64);
        // bumps vanish at the box ends
        assert_eq!(bank[0].eval(&[0.0], &[0.1]), 0.0);
        assert_eq!(bank[63].eval(&[1.0], &[0.1]), 0.0);
    }

    #[test]
    fn separable_double_convolution() {
        // g, h Gaussians: g * h is a Gaussian of summed variance; cos * cos = ½ cos.
        let h = 1.0 / 64.0;
        let g = MacroGrid::new(vec![Axis::new(-2.0, h, 256)], 1).unwrap();
        let k = MacroGrid::new(vec![Axis::new(-2.0, h, 256)], 1).unwrap();
        let (a, b) = (20.0, 30.0);
        let cos = |s: &[f64]| (2.0 * PI * s[0]).cos();
        let u = TwoScaleField::from_fn(g.clone(), &p1(), &[16], |x, s| (-a * x[0] * x[0]).exp() * cos(s)).unwrap();
        let v = TwoScaleField::from_fn(k, &p1(), &[16], |x, s| (-b * x[0] * x[0]).exp() * cos(s)).unwrap();
        let w = double_convolution(&u, &v).unwrap();
        let c = a * b / (a + b);
        let amp = (PI / (a + b)).sqrt();
        let want = TwoScaleField::from_fn(g, &p1(), &[16], |x, s| 0.5 * amp * (-c * x[0] * x[0]).exp() * cos(s)).unwrap();
        for (p, q) in w.values().iter().zip(want.values()) {
            assert!((p - q).abs() < 1e-10, "{p} vs {q}");
        }
    }

    #[test]
    fn kernel_must_decay_at_truncation_boundary() {
        let g = MacroGrid::new(vec![Axis::new(0.0, 0.125, 8)], 1).unwrap();
        let k = MacroGrid::new(vec![Axis::new(-0.5, 0.125, 8)], 1).unwrap();
        let u = TwoScaleField::from_fn(g, &p1(), &[4], |_, _| 1.0).unwrap();
        let v = TwoScaleField::from_fn(k, &p1(), &[4], |_, _| 1.0).unwrap();
        assert!(matches!(double_convolution(&u, &v), Err(Error::Domain(_))));
    }

    #[test]
    fn gradient_of_corrected_linear_profile() {
        // u_ε = x + ε sin(2πx/ε)/(2π): gradient tends to 1 + cos(2πs) weakly.
        let eps = vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0];
        let seq = EpsSequence::generate(
            eps,
            |_| MacroGrid::interval(0.0, 1.0, 4097).unwrap(),
            |x, e| x[0] + e * (2.0 * PI * x[0] / e).sin() / (2.0 * PI),
            "corrected linear",
        )
        .unwrap();
        let g = MacroGrid::interval(0.0, 1.0, 65).unwrap();
        let u0 = MacroField::from_fn(g.clone(), |x| x[0]);
        let u1 = TwoScaleField::from_fn(g.clone(), &p1(), &[32], |_, s| (2.0 * PI * s[0]).sin() / (2.0 * PI)).unwrap();
        let bank = default_test_bank(&g, 1, 4, 4);
        let r = gradient_decomposition_check(&seq, &u0, &u1, &bank, DEFAULT_SIGMA_TOL).unwrap();
        assert!(r.verdict, "final {}", r.final_relative());
        assert!(r.final_relative() < 1e-2);
    }
}
