//! Shifted Wilson–Cowan neural field and its two-scale limit.
//!
//! Fine problem on `ℝ^N` (truncated to the box `[-L, L)^N`):
//!
//! ```text
//! ∂u/∂t (x, t) = -u(x + a, t) + ∫ K(x - z, (x - z)/ε) f(z/ε, u(z, t)) dz
//! ```
//!
//! Limit along a schedule with `δ(a/ε) → r`, for `û₀(x, t, s)`:
//!
//! ```text
//! ∂û₀/∂t = -û₀(x + a, t, s + r) + (K̂ ∗∗ f̂(·, û₀))(x, t, s),  û₀(x, 0, s) = u⁰(x).
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{dirac_point, AlgebraSpec, TorusPoint};
use crate::error::{invalid, Error, Result};
use crate::numerics::fft::{convolve_kernel, AxisMode};
use crate::numerics::grid::{require_pow2, strides};
use crate::numerics::{low_discrepancy as sample_points, Axis, Grid};
use crate::registry::{Firing, Kernel, Profile};
use crate::sigma::{
    check_eps_schedule, default_test_bank, sigma_residuals, EpsSequence, MacroField, MacroGrid, SigmaMode,
    SigmaTestResult, TestFunction, TwoScaleField,
};
use crate::trajectory::FieldTrajectory;

/// How the truncated box treats values beyond its edge.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoxBoundary {
    /// Zero outside the box; the box must contain the activity.
    #[default]
    Zero,
    /// Periodic wrap.
    Periodic,
}

/// Data of the shifted Wilson–Cowan problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilsonCowanConfig {
    pub algebra: AlgebraSpec,
    pub kernel: Kernel,
    pub firing: Firing,
    /// Shift `a`, one entry per spatial axis.
    pub shift: Vec<f64>,
    pub initial: Profile,
    /// Box half-width `L`.
    pub half_width: f64,
    /// Horizon `T`.
    pub horizon: f64,
    /// Declared Lipschitz constant of the firing rate; the analytic bound
    /// of the family when absent.
    #[serde(default)]
    pub lipschitz: Option<f64>,
    #[serde(default)]
    pub boundary: BoxBoundary,
}

/// Space and time steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WcDiscretization {
    pub dx: f64,
    pub dt: f64,
    /// Number of snapshot intervals over `[0, T]`.
    pub snapshots: usize,
}

fn assumption(name: &str, detail: String) -> Error {
    Error::Assumption {
        assumption: name.to_string(),
        detail,
    }
}

impl WilsonCowanConfig {
    pub fn dim(&self) -> usize {
        self.algebra.space_dim()
    }

    pub fn declared_lipschitz(&self) -> f64 {
        self.lipschitz.unwrap_or_else(|| self.firing.lipschitz_bound())
    }

    /// Checks the data against the standing assumptions, with the kernel
    /// mass checked at every `eps`.
    pub fn validate(&self, eps_list: &[f64]) -> Result<()> {
        let n = self.dim();
        if self.shift.len() != n {
            return Err(invalid(format!("shift has {} entries, space is R^{n}", self.shift.len())));
        }
        if !(self.half_width > 0.0 && self.horizon > 0.0) {
            return Err(invalid("box half-width and horizon must be positive"));
        }
        self.kernel.validate_params().map_err(invalid)?;
        let td = self.algebra.torus_dim();
        let s_samples = sample_points(td, 64);
        let r = self.kernel.support_radius();

        // kernel sign
        let x_samples = sample_points(n, 256);
        for x in &x_samples {
            let x: Vec<f64> = x.iter().map(|v| (2.0 * v - 1.0) * r).collect();
            for s in &s_samples {
                let k = self.kernel.eval(&x, s);
                if k < 0.0 {
                    return Err(assumption(
                        "kernel nonnegativity",
                        format!("K({x:?}, {s:?}) = {k:.3e} < 0"),
                    ));
                }
            }
        }

        // kernel mass at each eps
        if !self.kernel.is_zero() {
            for &eps in eps_list {
                let m = self.kernel_mass(eps)?;
                if m > 1.0 + 1e-9 {
                    return Err(assumption(
                        "kernel mass",
                        format!("integral of K^eps is {m:.6} > 1 at eps = {eps}"),
                    ));
                }
            }
        }

        // firing sign and Lipschitz quotient
        let u_max = self.initial_sup().max(1.0);
        let lam_samples: Vec<f64> = sample_points(1, 64).iter().map(|v| 2.0 * u_max * v[0]).collect();
        for s in &s_samples {
            for &lam in &lam_samples {
                let f = self.firing.eval(s, lam);
                if f < 0.0 {
                    return Err(assumption("firing nonnegativity", format!("f({s:?}, {lam}) = {f:.3e} < 0")));
                }
            }
        }
        let k1 = self.declared_lipschitz();
        let quotient = self.empirical_lipschitz(u_max);
        if quotient > k1 * (1.0 + 1e-9) {
            return Err(assumption(
                "firing Lipschitz bound",
                format!("sampled quotient {quotient:.6} exceeds declared k1 = {k1}"),
            ));
        }

        if self.boundary == BoxBoundary::Zero {
            if let Some(r0) = self.initial.support_radius() {
                let need = r0 + r + self.shift_norm();
                if self.half_width < need {
                    return Err(invalid(format!(
                        "box half-width {} is smaller than initial support + kernel support + |a| = {need}",
                        self.half_width
                    )));
                }
            } else {
                return Err(invalid("initial data without bounded support needs a periodic box"));
            }
        }
        Ok(())
    }

    fn shift_norm(&self) -> f64 {
        self.shift.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    fn initial_sup(&self) -> f64 {
        let n = self.dim();
        sample_points(n, 512)
            .iter()
            .map(|x| {
                let x: Vec<f64> = x.iter().map(|v| (2.0 * v - 1.0) * self.half_width).collect();
                self.initial.eval(&x).abs()
            })
            .chain(std::iter::once(self.initial.eval(&vec![0.0; n]).abs()))
            .fold(0.0, f64::max)
    }

    /// Largest sampled `|f(s, μ₁) - f(s, μ₂)| / |μ₁ - μ₂|` over `μ ∈ [-2M, 2M]`.
    pub fn empirical_lipschitz(&self, scale: f64) -> f64 {
        let s_samples = sample_points(self.algebra.torus_dim(), 32);
        let pairs = sample_points(2, 256);
        let mut q = 0.0f64;
        for s in &s_samples {
            for p in &pairs {
                let (m1, m2) = ((4.0 * p[0] - 2.0) * scale, (4.0 * p[1] - 2.0) * scale);
                if (m1 - m2).abs() > 1e-9 * scale {
                    q = q.max((self.firing.eval(s, m1) - self.firing.eval(s, m2)).abs() / (m1 - m2).abs());
                }
            }
        }
        q
    }

    /// `∫ K(x, δ(x/ε)) dx` by the trapezoid rule, resolving both the kernel
    /// and the oscillation.
    pub fn kernel_mass(&self, eps: f64) -> Result<f64> {
        let n = self.dim();
        let r = self.kernel.support_radius();
        if r == 0.0 {
            return Ok(0.0);
        }
        let h = (eps / 64.0).min(r / 256.0);
        let m = (2.0 * r / h).ceil() as usize + 1;
        let h = 2.0 * r / (m - 1) as f64;
        let total = m.pow(n as u32);
        let mut x = vec![0.0; n];
        let mut acc = 0.0;
        for flat in 0..total {
            let mut rem = flat;
            let mut w = 1.0;
            for xk in x.iter_mut() {
                let i = rem % m;
                rem /= m;
                *xk = -r + i as f64 * h;
                w *= if i == 0 || i == m - 1 { 0.5 * h } else { h };
            }
            let y: Vec<f64> = x.iter().map(|v| v / eps).collect();
            let s = dirac_point(&y, &self.algebra)?;
            acc += w * self.kernel.eval(&x, s.coords());
        }
        Ok(acc)
    }

    /// Largest possible kernel mass over all `ε`.
    fn kernel_mass_cap(&self) -> f64 {
        match self.kernel {
            Kernel::Zero => 0.0,
            Kernel::Bspline { mass, modulation, .. } | Kernel::Gaussian { mass, modulation, .. } => {
                (mass.abs() * (1.0 + modulation.abs())).min(1.0)
            }
        }
    }

    fn box_grid(&self, dx: f64) -> Result<MacroGrid> {
        let n = (2.0 * self.half_width / dx).round() as usize;
        if ((n as f64) * dx - 2.0 * self.half_width).abs() > 1e-9 * self.half_width {
            return Err(invalid(format!("dx = {dx} does not divide the box width {}", 2.0 * self.half_width)));
        }
        require_pow2(n)?;
        let axes = vec![Axis::new(-self.half_width, dx, n); self.dim()];
        MacroGrid::new(axes, self.dim())
    }

    /// Grid steps of the shift; `a` must be a grid multiple.
    fn shift_steps(&self, dx: f64) -> Result<Vec<i64>> {
        self.shift
            .iter()
            .map(|a| {
                let t = a / dx;
                if (t - t.round()).abs() > 1e-9 * t.abs().max(1.0) {
                    Err(invalid(format!("shift {a} is not a multiple of dx = {dx}")))
                } else {
                    Ok(t.round() as i64)
                }
            })
            .collect()
    }

    /// A-priori bound `C` on `sup_t (‖u(t)‖₁ + ‖u(t)‖₂)`, uniform in `ε`.
    ///
    /// Translation preserves norms, `‖K^ε ∗ g‖_p ≤ ‖K^ε‖₁‖g‖_p` and
    /// `|f(s, λ)| ≤ f_rest + k₁|λ|`; Gronwall gives the bound below.
    pub fn a_priori_bound(&self, dx: f64) -> Result<f64> {
        let grid = self.box_grid(dx)?;
        let u0 = MacroField::from_fn(grid, |x| self.initial.eval(x));
        let cell = dx.powi(self.dim() as i32);
        let l1: f64 = u0.values.iter().map(|v| v.abs()).sum::<f64>() * cell;
        let l2 = (u0.values.iter().map(|v| v * v).sum::<f64>() * cell).sqrt();
        let mk = self.kernel_mass_cap();
        let vol = (2.0 * self.half_width).powi(self.dim() as i32);
        let rest = self.horizon * mk * self.firing.rest_level() * (vol + vol.sqrt());
        let growth = (1.0 + mk * self.declared_lipschitz()) * self.horizon;
        Ok((l1 + l2 + rest) * growth.exp())
    }
}

/// Time-step plan shared by both solvers.
struct Plan {
    steps: usize,
    stride: usize,
    dt: f64,
}

fn plan(cfg: &WilsonCowanConfig, disc: &WcDiscretization) -> Result<Plan> {
    if !(disc.dt > 0.0 && disc.dt <= 0.5) {
        return Err(invalid(format!("dt = {} must lie in (0, 1/2]", disc.dt)));
    }
    if disc.snapshots == 0 {
        return Err(invalid("need at least one snapshot interval"));
    }
    let steps = (cfg.horizon / disc.dt).round() as usize;
    if steps == 0 || ((steps as f64) * disc.dt - cfg.horizon).abs() > 1e-9 * cfg.horizon {
        return Err(invalid(format!("dt = {} does not divide T = {}", disc.dt, cfg.horizon)));
    }
    if steps % disc.snapshots != 0 {
        return Err(invalid(format!("{} snapshot intervals do not divide {steps} steps", disc.snapshots)));
    }
    Ok(Plan {
        steps,
        stride: steps / disc.snapshots,
        dt: disc.dt,
    })
}

/// Right-hand side `-u(· + a, s + r) + K ∗ f(·, u)` on a macro box,
/// optionally times a torus (macro-major layout).
struct Operator {
    macro_dims: Vec<usize>,
    torus_dims: Vec<usize>,
    shift: Vec<i64>,
    roll: Vec<usize>,
    periodic: bool,
    /// Kernel samples, or `None` for the zero kernel.
    kernel: Option<KernelSamples>,
    /// Torus coordinates at which `f` is evaluated, one per point.
    coords: Vec<Vec<f64>>,
    firing: Firing,
}

struct KernelSamples {
    values: Vec<f64>,
    dims: Vec<usize>,
    centers: Vec<usize>,
    spacings: Vec<f64>,
    modes: Vec<AxisMode>,
}

impl Operator {
    fn dims(&self) -> Vec<usize> {
        let mut d = self.macro_dims.clone();
        d.extend_from_slice(&self.torus_dims);
        d
    }

    fn shifted(&self, u: &[f64]) -> Vec<f64> {
        if self.shift.iter().all(|s| *s == 0) && self.roll.iter().all(|r| *r == 0) {
            return u.to_vec();
        }
        let dims = self.dims();
        let nm = self.macro_dims.len();
        let st = strides(&dims);
        let mut out = vec![0.0; u.len()];
        out.par_iter_mut().enumerate().for_each(|(flat, o)| {
            let mut src = 0;
            for k in 0..dims.len() {
                let i = ((flat / st[k]) % dims[k]) as i64;
                let j = if k < nm {
                    let j = i + self.shift[k];
                    let n = dims[k] as i64;
                    if self.periodic {
                        j.rem_euclid(n)
                    } else if j < 0 || j >= n {
                        return;
                    } else {
                        j
                    }
                } else {
                    (i + self.roll[k - nm] as i64).rem_euclid(dims[k] as i64)
                };
                src += j as usize * st[k];
            }
            *o = u[src];
        });
        out
    }

    fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.shifted(u);
        out.iter_mut().for_each(|v| *v = -*v);
        if let Some(k) = &self.kernel {
            let fu: Vec<f64> = u
                .par_iter()
                .zip(&self.coords)
                .map(|(v, s)| self.firing.eval(s, *v))
                .collect();
            let conv = convolve_kernel(&fu, &self.dims(), &k.values, &k.dims, &k.centers, &k.spacings, &k.modes)?;
            out.iter_mut().zip(conv).for_each(|(o, c)| *o += c);
        }
        Ok(out)
    }
}

/// Samples `K(x, s)` at macro offsets on a kernel grid matching the box.
/// `s_of(x)` gives the torus coordinates for the fine problem; for the
/// two-scale problem the torus nodes are appended as extra axes.
fn kernel_samples(
    cfg: &WilsonCowanConfig,
    dx: f64,
    box_n: usize,
    torus_dims: &[usize],
    s_of: impl Fn(&[f64]) -> Result<Vec<f64>> + Sync,
) -> Result<Option<KernelSamples>> {
    if cfg.kernel.is_zero() {
        return Ok(None);
    }
    let n = cfg.dim();
    let (kn, offsets): (usize, Box<dyn Fn(usize) -> f64 + Sync>) = match cfg.boundary {
        BoxBoundary::Zero => {
            let half = (cfg.kernel.support_radius() / dx).ceil() as usize + 1;
            let kn = (2 * half + 1).next_power_of_two();
            (kn, Box::new(move |i| (i as f64 - (kn / 2) as f64) * dx))
        }
        BoxBoundary::Periodic => (
            box_n,
            Box::new(move |i| {
                let c = (i + box_n / 2) % box_n;
                (c as f64 - (box_n / 2) as f64) * dx
            }),
        ),
    };
    let mut dims = vec![kn; n];
    dims.extend_from_slice(torus_dims);
    let torus_grid = if torus_dims.is_empty() {
        None
    } else {
        Some(Grid::torus(torus_dims)?)
    };
    let m = torus_grid.as_ref().map_or(1, |g| g.len());
    let macro_total = kn.pow(n as u32);
    let values = (0..macro_total)
        .into_par_iter()
        .map(|flat| -> Result<Vec<f64>> {
            let mut rem = flat;
            let mut x = vec![0.0; n];
            for k in (0..n).rev() {
                x[k] = offsets(rem % kn);
                rem /= kn;
            }
            match &torus_grid {
                None => Ok(vec![cfg.kernel.eval(&x, &s_of(&x)?)]),
                Some(g) => {
                    let mut idx = vec![0; torus_dims.len()];
                    Ok((0..m)
                        .map(|j| {
                            g.unravel(j, &mut idx);
                            let s: Vec<f64> = idx.iter().zip(torus_dims).map(|(&i, &d)| i as f64 / d as f64).collect();
                            cfg.kernel.eval(&x, &s)
                        })
                        .collect())
                }
            }
        })
        .collect::<Result<Vec<_>>>()?
        .concat();
    let (centers, mode, scale) = match cfg.boundary {
        BoxBoundary::Zero => (vec![kn / 2; n], AxisMode::Linear, 1.0),
        // circular weights are 1/n; the box integral needs dx
        BoxBoundary::Periodic => (vec![0; n], AxisMode::Circular, (box_n as f64 * dx).powi(n as i32)),
    };
    let mut centers = centers;
    centers.extend(std::iter::repeat_n(0, torus_dims.len()));
    let mut spacings = vec![dx; n];
    spacings.extend(torus_dims.iter().map(|d| 1.0 / *d as f64));
    let mut modes = vec![mode; n];
    modes.extend(std::iter::repeat_n(AxisMode::Circular, torus_dims.len()));
    Ok(Some(KernelSamples {
        values: values.into_iter().map(|v| v * scale).collect(),
        dims,
        centers,
        spacings,
        modes,
    }))
}

/// Norms and guard-band mass fraction of a state; `m` samples per macro
/// node are averaged (torus measure).
struct Monitor {
    cell: f64,
    m: usize,
    band: Vec<bool>,
}

impl Monitor {
    fn new(grid: &MacroGrid, m: usize, guard: f64, half_width: f64, periodic: bool) -> Self {
        let cell: f64 = grid.spacings().iter().product();
        let band = if periodic {
            vec![false; grid.len()]
        } else {
            grid.points()
                .iter()
                .map(|x| x.iter().any(|v| v.abs() > half_width - guard))
                .collect()
        };
        Self { cell, m, band }
    }

    fn norms(&self, u: &[f64]) -> (f64, f64, f64) {
        let w = self.cell / self.m as f64;
        let (mut l1, mut l2, mut edge) = (0.0, 0.0, 0.0);
        for (i, v) in u.iter().enumerate() {
            l1 += v.abs();
            l2 += v * v;
            if self.band[i / self.m] {
                edge += v.abs();
            }
        }
        let ratio = if l1 > 0.0 { edge / l1 } else { 0.0 };
        (l1 * w, (l2 * w).sqrt(), ratio)
    }
}

/// Guard-band mass fraction above which a warning is recorded.
pub const GUARD_TOLERANCE: f64 = 1e-6;

fn integrate<S>(
    op: &Operator,
    plan: &Plan,
    u0: Vec<f64>,
    monitor: &Monitor,
    bound: f64,
    make_state: impl Fn(Vec<f64>) -> Result<S>,
) -> Result<FieldTrajectory<S>> {
    let mut traj = FieldTrajectory::new(Some(bound));
    let mut u = u0;
    let mut worst_guard = 0.0f64;
    let record = |traj: &mut FieldTrajectory<S>, t: f64, u: &[f64], worst: &mut f64| -> Result<()> {
        let (l1, l2, g) = monitor.norms(u);
        if !(l1.is_finite() && l2.is_finite()) || l1 + l2 > 10.0 * bound {
            return Err(Error::Divergence(format!(
                "norms {l1:.3e} + {l2:.3e} exceed ten times the a-priori bound {bound:.3e} at t = {t}"
            )));
        }
        *worst = worst.max(g);
        traj.push(t, make_state(u.to_vec())?, l1, l2);
        Ok(())
    };
    record(&mut traj, 0.0, &u, &mut worst_guard)?;
    let dt = plan.dt;
    for step in 1..=plan.steps {
        // Heun
        let k1 = op.apply(&u)?;
        let pred: Vec<f64> = u.iter().zip(&k1).map(|(a, b)| a + dt * b).collect();
        let k2 = op.apply(&pred)?;
        u.iter_mut()
            .zip(k1.iter().zip(&k2))
            .for_each(|(v, (a, b))| *v += 0.5 * dt * (a + b));
        if step % plan.stride == 0 {
            record(&mut traj, step as f64 * dt, &u, &mut worst_guard)?;
        }
    }
    if worst_guard > GUARD_TOLERANCE {
        traj.warnings.push(format!(
            "guard-band mass fraction reached {worst_guard:.3e}; enlarge the box"
        ));
    }
    Ok(traj)
}

fn guard_width(cfg: &WilsonCowanConfig, dx: f64) -> f64 {
    (cfg.kernel.support_radius() + cfg.shift_norm()).max(2.0 * dx)
}

/// Fine-scale solve at one `ε` by Heun's method (explicit RK2).
pub fn solve_fine_wc(cfg: &WilsonCowanConfig, eps: f64, disc: &WcDiscretization) -> Result<FieldTrajectory<MacroField>> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid(format!("eps must be positive, got {eps}")));
    }
    let plan = plan(cfg, disc)?;
    let grid = cfg.box_grid(disc.dx)?;
    let shift = cfg.shift_steps(disc.dx)?;
    let bound = cfg.a_priori_bound(disc.dx)?;
    let box_n = grid.dims()[0];
    let s_of = |x: &[f64]| -> Result<Vec<f64>> {
        let y: Vec<f64> = x.iter().map(|v| v / eps).collect();
        Ok(dirac_point(&y, &cfg.algebra)?.coords().to_vec())
    };
    let kernel = kernel_samples(cfg, disc.dx, box_n, &[], s_of)?;
    let points = grid.points();
    let coords = points.iter().map(|x| s_of(x)).collect::<Result<Vec<_>>>()?;
    let op = Operator {
        macro_dims: grid.dims(),
        torus_dims: vec![],
        shift,
        roll: vec![],
        periodic: cfg.boundary == BoxBoundary::Periodic,
        kernel,
        coords,
        firing: cfg.firing.clone(),
    };
    let monitor = Monitor::new(&grid, 1, guard_width(cfg, disc.dx), cfg.half_width, op.periodic);
    let u0: Vec<f64> = points.iter().map(|x| cfg.initial.eval(x)).collect();
    let mut traj = integrate(&op, &plan, u0, &monitor, bound, |v| MacroField::new(grid.clone(), v))?;
    if disc.dt > disc.dx {
        traj.warnings.push(format!("dt = {} exceeds dx = {}", disc.dt, disc.dx));
    }
    Ok(traj)
}

/// Limit point `r` of `δ(a/ε_n)` along the schedule. The schedule must keep
/// the point fixed; anything else is refused with the observed trajectory.
pub fn shift_limit_point(a: &[f64], eps_schedule: &[f64], spec: &AlgebraSpec) -> Result<TorusPoint> {
    if eps_schedule.is_empty() {
        return Err(invalid("empty eps schedule"));
    }
    let pts = eps_schedule
        .iter()
        .map(|e| {
            if !(*e > 0.0) {
                return Err(invalid("eps values must be positive"));
            }
            let y: Vec<f64> = a.iter().map(|v| v / e).collect();
            dirac_point(&y, spec)
        })
        .collect::<Result<Vec<_>>>()?;
    if pts.iter().any(|p| p.dist(&pts[0]) > 1e-9) {
        return Err(Error::Subsequence {
            trajectory: pts.iter().map(|p| p.coords().to_vec()).collect(),
        });
    }
    Ok(pts[0].clone())
}

/// Two-scale limit solve on box × torus. `r` is snapped to the nearest torus
/// node when off-grid (recorded as a warning).
pub fn solve_homogenized_wc(
    cfg: &WilsonCowanConfig,
    r: &TorusPoint,
    disc: &WcDiscretization,
    torus_dims: &[usize],
) -> Result<FieldTrajectory<TwoScaleField>> {
    if torus_dims.len() != cfg.algebra.torus_dim() || r.dim() != torus_dims.len() {
        return Err(invalid("torus grid and shift point must match the algebra's torus dimension"));
    }
    let plan = plan(cfg, disc)?;
    let grid = cfg.box_grid(disc.dx)?;
    let shift = cfg.shift_steps(disc.dx)?;
    let bound = cfg.a_priori_bound(disc.dx)?;
    let tgrid = Grid::torus(torus_dims)?;
    let mut notes = Vec::new();
    let roll: Vec<usize> = r
        .coords()
        .iter()
        .zip(torus_dims)
        .map(|(c, &n)| {
            let t = c * n as f64;
            if (t - t.round()).abs() > 1e-9 {
                notes.push(format!("torus shift {c} snapped to node {}/{n}", t.round()));
            }
            (t.round() as usize) % n
        })
        .collect();
    let kernel = kernel_samples(cfg, disc.dx, grid.dims()[0], torus_dims, |_| Ok(vec![]))?;
    let m = tgrid.len();
    let mut idx = vec![0; torus_dims.len()];
    let nodes: Vec<Vec<f64>> = (0..m)
        .map(|j| {
            tgrid.unravel(j, &mut idx);
            idx.iter().zip(torus_dims).map(|(&i, &n)| i as f64 / n as f64).collect()
        })
        .collect();
    let coords: Vec<Vec<f64>> = (0..grid.len() * m).map(|p| nodes[p % m].clone()).collect();
    let op = Operator {
        macro_dims: grid.dims(),
        torus_dims: torus_dims.to_vec(),
        shift,
        roll,
        periodic: cfg.boundary == BoxBoundary::Periodic,
        kernel,
        coords,
        firing: cfg.firing.clone(),
    };
    let monitor = Monitor::new(&grid, m, guard_width(cfg, disc.dx), cfg.half_width, op.periodic);
    let u0: Vec<f64> = grid
        .points()
        .iter()
        .flat_map(|x| std::iter::repeat_n(cfg.initial.eval(x), m))
        .collect();
    let mut traj = integrate(&op, &plan, u0, &monitor, bound, |v| {
        TwoScaleField::new(grid.clone(), &cfg.algebra, torus_dims, v)
    })?;
    traj.warnings.extend(notes);
    Ok(traj)
}

/// Fine solves for every `ε`, in parallel.
pub fn solve_fine_family(
    cfg: &WilsonCowanConfig,
    eps_list: &[f64],
    disc: &WcDiscretization,
) -> Result<Vec<FieldTrajectory<MacroField>>> {
    check_eps_schedule(eps_list)?;
    eps_list.par_iter().map(|&e| solve_fine_wc(cfg, e, disc)).collect()
}

/// Default space-time test bank for [`compare_wc`].
pub fn space_time_bank(homog: &FieldTrajectory<TwoScaleField>) -> Result<Vec<TestFunction>> {
    let st = homog.space_time()?;
    Ok(default_test_bank(st.macro_grid(), st.spec().torus_dim(), 8, 8))
}

/// Weak-Σ residuals of the fine trajectories against the two-scale limit,
/// with space-time test functions `ψ(x, t, x/ε)`.
pub fn compare_wc(
    eps_list: &[f64],
    fine: &[FieldTrajectory<MacroField>],
    homog: &FieldTrajectory<TwoScaleField>,
    bank: &[TestFunction],
    tol: f64,
) -> Result<SigmaTestResult> {
    if fine.len() != eps_list.len() {
        return Err(invalid("one fine trajectory per eps required"));
    }
    for f in fine {
        if f.times.len() != homog.times.len()
            || f.times.iter().zip(&homog.times).any(|(a, b)| (a - b).abs() > 1e-12)
        {
            return Err(invalid("fine and homogenized snapshot times differ"));
        }
    }
    let fields = fine.iter().map(|f| f.space_time()).collect::<Result<Vec<_>>>()?;
    let seq = EpsSequence::new(eps_list.to_vec(), fields, "wilson-cowan fine solves")?;
    let limit = homog.space_time()?;
    sigma_residuals(&seq, &limit, bank, SigmaMode::Weak, tol)
}
