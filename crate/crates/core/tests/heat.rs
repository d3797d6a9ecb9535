use std::sync::Arc;

use sigmahom::algebra::AlgebraSpec;
use sigmahom::heat::{
    convergence_study, corrector_check, effective_coefficients, flux_convergence_check, lambda_range_presolve,
    solve_fine_heat, CellGrid, HeatConfig, HeatConstants, HeatGrid, SLAB_CONTRACTION,
};
use sigmahom::registry::{Density, Flux, MemoryKernel, Modulation, Profile, ZerothOrder};
use sigmahom::sigma::{TestFunction, DEFAULT_SIGMA_TOL};

fn modulation(base: f64, amplitude: f64) -> Modulation {
    Modulation { base, amplitude, amplitude2: 0.0, tau_amplitude: 0.0 }
}

fn harmonic(horizon: f64) -> HeatConfig {
    HeatConfig {
        algebra: AlgebraSpec::periodic(1).unwrap(),
        algebra_tau: AlgebraSpec::periodic(1).unwrap(),
        density: Density::Constant { value: 1.0 },
        flux: Flux::Linear(modulation(2.0, 1.0)),
        zeroth: ZerothOrder::Zero,
        memory: MemoryKernel::Zero,
        memory_horizon: None,
        source: Profile::Zero,
        initial: Profile::SinPi { amp: 1.0, mode: 1.0 },
        horizon,
        constants: HeatConstants { c0: 3.0, c1: 1.0, c2: 3.0, lambda: 1.0 },
    }
}

const EPS: [f64; 4] = [0.25, 0.125, 0.0625, 0.03125];

#[test]
fn harmonic_mean_configuration_converges() {
    let cfg = harmonic(0.125);
    cfg.validate().unwrap();
    let grid = HeatGrid { cells: 1024, dt: 1.0 / 1024.0 };
    let axes = lambda_range_presolve(&cfg, &grid, 33).unwrap();
    let eff = effective_coefficients(&cfg, axes, &CellGrid::new(vec![256], 32)).unwrap();
    let study = convergence_study(&cfg, &EPS, &grid, &eff).unwrap();
    assert!(study.failure.is_none());
    assert!(study.strictly_decreasing(), "{}", study.to_csv());
    assert!(study.l2_error[3] < 0.05 * study.limit_norm);
    assert!(study.energy_within_bound());
    assert!(!study.homogenized.extrapolated);
    let report = corrector_check(&cfg, &study, &eff, &grid, 64, 32).unwrap();
    assert!(report.gains()[3] >= 2.0, "{:?}", report.gains());
    assert!(report.gradient.verdict, "{}", report.gradient.final_relative());
}

#[test]
fn eps_independent_coefficients_give_equal_errors() {
    let mut cfg = harmonic(0.0625);
    cfg.flux = Flux::Linear(modulation(1.5, 0.0));
    let grid = HeatGrid { cells: 256, dt: 1.0 / 256.0 };
    let axes = lambda_range_presolve(&cfg, &grid, 9).unwrap();
    let eff = effective_coefficients(&cfg, axes, &CellGrid::new(vec![32], 4)).unwrap();
    let study = convergence_study(&cfg, &EPS, &grid, &eff).unwrap();
    for e in &study.l2_error {
        assert!((e - study.l2_error[0]).abs() < 1e-10);
    }
}

#[test]
fn zero_data_gives_zero_error() {
    let mut cfg = harmonic(0.0625);
    cfg.initial = Profile::Zero;
    let grid = HeatGrid { cells: 256, dt: 1.0 / 256.0 };
    let eff = effective_coefficients(&cfg, vec![vec![-1.0, 0.0, 1.0]], &CellGrid::new(vec![64], 2)).unwrap();
    let study = convergence_study(&cfg, &EPS, &grid, &eff).unwrap();
    assert!(study.l2_error.iter().all(|e| *e == 0.0));
}

#[test]
fn memory_slabs_stay_contractive() {
    let mut cfg = harmonic(0.25);
    cfg.zeroth = ZerothOrder::Linear(modulation(1.0, 0.5));
    cfg.memory = MemoryKernel::Modulated(Modulation { base: 3.0, amplitude: 1.0, amplitude2: 0.0, tau_amplitude: 0.5 });
    cfg.constants.c2 = 4.5;
    cfg.constants.c0 = 4.5;
    cfg.validate().unwrap();
    let tr = solve_fine_heat(&cfg, 0.125, &HeatGrid { cells: 128, dt: 1.0 / 256.0 }).unwrap();
    assert!(!tr.slabs.is_empty());
    for s in &tr.slabs {
        assert!(s.max_quotient < SLAB_CONTRACTION, "{s:?}");
    }
    assert!(tr.traj.states.iter().all(|s| s.values.iter().all(|v| v.is_finite())));
}

fn bump(x: f64) -> f64 {
    let r = (x - 0.5) / 0.3;
    if r.abs() < 1.0 { (1.0 - r * r).powi(3) } else { 0.0 }
}

#[test]
fn flux_pairings_converge() {
    let cfg = harmonic(0.1);
    let psi0: Arc<dyn Fn(f64) -> f64 + Send + Sync> = Arc::new(|x: f64| (std::f64::consts::PI * x).sin() * bump(x));
    let bank = vec![
        TestFunction::new("sin", |x, s| bump(x[0]) * (2.0 * std::f64::consts::PI * s[0]).sin()),
        TestFunction::new("zero", |_, _| 0.0),
    ];
    let eps = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    let res = flux_convergence_check(&cfg, &eps, psi0.clone(), Arc::new(|_: &[f64], _: &[f64]| 0.0), &bank, DEFAULT_SIGMA_TOL)
        .unwrap();
    assert!(res.residuals[3][0] < 1e-2, "{:?}", res.residuals);
    assert!(res.pairings.iter().all(|r| r[1] == 0.0) && res.limits[1] == 0.0);
    let mut plain = cfg.clone();
    plain.flux = Flux::Linear(modulation(1.0, 0.0));
    let flat = vec![TestFunction::new("bump", |x, _| bump(x[0]))];
    let res = flux_convergence_check(&plain, &eps, psi0, Arc::new(|_: &[f64], _: &[f64]| 0.0), &flat, DEFAULT_SIGMA_TOL)
        .unwrap();
    assert!(res.max_residuals.iter().all(|r| *r < 1e-6), "{:?}", res.max_residuals);
}
