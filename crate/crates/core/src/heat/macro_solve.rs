//! Macroscopic solver with tabulated coefficients.

use super::config::HeatConfig;
use super::effective::EffectiveCoefficients;
use super::fd::{bdf2_history, interior_nodes, HeatGrid, ImplicitStep};
use super::fine::{HeatTrajectory, MAX_SWEEPS, STEP_TOL};
use crate::error::{invalid, Result};
use std::sync::atomic::{AtomicBool, Ordering};

/// Half-width of the difference quotient used for the secant at `λ = 0`.
const ZERO_SLOPE_STEP: f64 = 1e-6;

/// `ρ̃ ∂u₀/∂t - div b(∇u₀) + b₀(∇u₀) = f` with the fine solver's scheme. `b`
/// enters through its secant, `b₀` is lagged one sweep.
pub fn solve_macro(cfg: &HeatConfig, eff: &EffectiveCoefficients, grid: &HeatGrid) -> Result<HeatTrajectory> {
    if cfg.dim() != 1 || eff.dim() != 1 {
        return Err(invalid("the heat solvers work on (0, 1)"));
    }
    let steps = grid.steps(cfg.horizon)?;
    let (h, dt) = (grid.h(), grid.dt);
    let nodes = interior_nodes(grid.cells);
    let rho = vec![eff.rho_eff; nodes.len()];
    let load: Vec<f64> = nodes.iter().map(|x| cfg.source.eval(&[*x])).collect();
    let u0: Vec<f64> = nodes.iter().map(|x| cfg.initial.eval(&[*x])).collect();
    let outside = AtomicBool::new(false);
    let secant = |_: usize, g: f64| -> f64 {
        let (b, _, out) = eff.interpolate(&[g]);
        if out {
            outside.store(true, Ordering::Relaxed);
        }
        if g.abs() > ZERO_SLOPE_STEP {
            b[0] / g
        } else {
            let (hi, _, _) = eff.interpolate(&[ZERO_SLOPE_STEP]);
            let (lo, _, _) = eff.interpolate(&[-ZERO_SLOPE_STEP]);
            (hi[0] - lo[0]) / (2.0 * ZERO_SLOPE_STEP)
        }
    };
    let zeroth = |_: usize, g: f64| -> f64 {
        let (_, b0, out) = eff.interpolate(&[g]);
        if out {
            outside.store(true, Ordering::Relaxed);
        }
        b0
    };
    let has_b0 = eff.b0_table.iter().any(|v| *v != 0.0);
    let mut out = HeatTrajectory::start(grid, &u0);
    let mut u = u0;
    let mut before: Option<Vec<f64>> = None;
    for n in 1..=steps {
        let (prev, dt_eff) = bdf2_history(&u, before.as_deref(), dt);
        let step = ImplicitStep { h, dt: dt_eff, rho: &rho, load: &load, tol: STEP_TOL, max_sweeps: MAX_SWEEPS };
        let zeroth_ref: &(dyn Fn(usize, f64) -> f64 + Sync) = &zeroth;
        let (next, sweeps) = step.solve(&prev, &secant, has_b0.then_some(zeroth_ref))?;
        out.picard_sweeps += sweeps;
        if outside.swap(false, Ordering::Relaxed) && !out.extrapolated {
            out.extrapolated = true;
            out.traj
                .warnings
                .push(format!("gradient left the tabulated lambda range at step {n}; coefficients extrapolated linearly"));
        }
        out.record(grid, n as f64 * dt, &next);
        before = Some(std::mem::replace(&mut u, next));
    }
    out.steps = steps;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heat::cell::CellGrid;
    use crate::heat::config::HeatConstants;
    use crate::algebra::AlgebraSpec;
    use crate::registry::{Density, Flux, MemoryKernel, Modulation, Profile, ZerothOrder};
    use std::f64::consts::PI;

    fn table(slope: f64) -> EffectiveCoefficients {
        let axis = vec![-8.0, 0.0, 8.0];
        EffectiveCoefficients {
            b_table: axis.iter().map(|l| vec![slope * l]).collect(),
            b0_table: vec![0.0; 3],
            axes: vec![axis],
            rho_eff: 1.0,
            cell_residual: 0.0,
            cell_grid: CellGrid::new(vec![4], 1),
            correctors: Vec::new(),
        }
    }

    fn cfg(initial: Profile) -> HeatConfig {
        HeatConfig {
            algebra: AlgebraSpec::periodic(1).unwrap(),
            algebra_tau: AlgebraSpec::periodic(1).unwrap(),
            density: Density::Constant { value: 1.0 },
            flux: Flux::Linear(Modulation { base: 1.0, amplitude: 0.0, amplitude2: 0.0, tau_amplitude: 0.0 }),
            zeroth: ZerothOrder::Zero,
            memory: MemoryKernel::Zero,
            memory_horizon: None,
            source: Profile::Zero,
            initial,
            horizon: 0.1,
            constants: HeatConstants { c0: 1.0, c1: 1.0, c2: 1.0, lambda: 1.0 },
        }
    }

    #[test]
    fn scaled_conductivity_decay() {
        let c = cfg(Profile::SinPi { amp: 1.0, mode: 1.0 });
        let tr = solve_macro(&c, &table(3f64.sqrt()), &HeatGrid { cells: 256, dt: 1e-4 }).unwrap();
        let amp = tr.traj.last().unwrap().values[128];
        let exact = (-3f64.sqrt() * PI * PI * 0.1).exp();
        assert!((amp - exact).abs() < 1e-4, "{amp} vs {exact}");
        assert!(!tr.extrapolated);
    }

    #[test]
    fn zero_data_and_extrapolation_flag() {
        let tr = solve_macro(&cfg(Profile::Zero), &table(1.0), &HeatGrid { cells: 16, dt: 0.01 }).unwrap();
        assert!(tr.traj.states.iter().all(|s| s.values.iter().all(|v| *v == 0.0)));
        let steep = cfg(Profile::SinPi { amp: 4.0, mode: 1.0 });
        let tr = solve_macro(&steep, &table(1.0), &HeatGrid { cells: 16, dt: 0.01 }).unwrap();
        assert!(tr.extrapolated && tr.traj.warnings.len() == 1);
    }
}
