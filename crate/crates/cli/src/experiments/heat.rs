use sigmahom::heat::{
    convergence_study, corrector_check, effective_coefficients, lambda_range_presolve, EffectiveCoefficients,
    HeatConfig, CELLS_PER_PERIOD, CELL_TOLERANCE, SLAB_CONTRACTION,
};
use sigmahom::io::{fmt_f64, CsvTable};
use sigmahom::sigma::check_eps_schedule;

use super::snapshot_csv;
use crate::config::{CellBlock, HeatBlock};
use crate::error::CliError;
use crate::plot;
use crate::report::Outcome;

fn check_axes(cfg: &HeatConfig, axes: &[Vec<f64>]) -> Result<(), CliError> {
    if axes.len() != cfg.dim() || axes.iter().any(|a| a.is_empty() || a.windows(2).any(|w| !(w[1] > w[0]))) {
        return Err(CliError::Validation(format!(
            "lambda_axes must hold {} increasing lists",
            cfg.dim()
        )));
    }
    Ok(())
}

pub fn validate(b: &HeatBlock) -> Result<(), CliError> {
    let cfg = &b.problem;
    cfg.validate().map_err(CliError::validation)?;
    if cfg.dim() != 1 {
        return Err(CliError::Validation("nonlocal-heat runs on (0, 1) only".into()));
    }
    check_eps_schedule(&b.eps_list).map_err(CliError::validation)?;
    b.grid.steps(cfg.horizon).map_err(CliError::validation)?;
    let finest = b.eps_list[b.eps_list.len() - 1];
    if (b.grid.cells as f64) * finest < CELLS_PER_PERIOD * (1.0 - 1e-12) {
        return Err(CliError::Validation(format!(
            "{} cells do not resolve eps = {finest} with {CELLS_PER_PERIOD} cells per period",
            b.grid.cells
        )));
    }
    if let Some(axes) = &b.lambda_axes {
        check_axes(cfg, axes)?;
    } else if b.lambda_points < 2 {
        return Err(CliError::Validation("lambda_points must be >= 2".into()));
    }
    if b.snapshots == 0 {
        return Err(CliError::Validation("snapshots must be >= 1".into()));
    }
    Ok(())
}

pub fn validate_cell(b: &CellBlock) -> Result<(), CliError> {
    let cfg = b.heat_config();
    cfg.validate().map_err(CliError::validation)?;
    check_axes(&cfg, &b.lambda_axes)
}

/// Table checks shared by both experiments.
fn table_checks(cfg: &HeatConfig, eff: &EffectiveCoefficients, out: &mut Outcome) {
    out.file("effective_coefficients.csv", eff.to_csv());
    out.check(
        "cell_residual",
        eff.cell_residual < CELL_TOLERANCE,
        format!("worst cell residual {:.3e} (tol {CELL_TOLERANCE:.0e})", eff.cell_residual),
    );
    let c = eff.checks(&cfg.constants);
    out.check(
        "effective_monotonicity",
        c.monotone_ok,
        format!("smallest difference quotient {:.6e}", c.monotonicity),
    );
    out.check(
        "effective_lipschitz",
        c.lipschitz_ok,
        format!("largest difference quotient {:.6e}", c.lipschitz),
    );
}

pub fn run_cell(b: &CellBlock) -> Result<Outcome, CliError> {
    let cfg = b.heat_config();
    let eff = effective_coefficients(&cfg, b.lambda_axes.clone(), &b.cell_grid).map_err(CliError::run)?;
    let mut out = Outcome::default();
    table_checks(&cfg, &eff, &mut out);
    let n = eff.dim();
    let mut head: Vec<String> = (0..n).map(|i| format!("lambda_{i}")).collect();
    head.extend(["residual", "iterations", "corrector_sup"].map(String::from));
    let mut t = CsvTable::new(&head.iter().map(String::as_str).collect::<Vec<_>>());
    for sol in &eff.correctors {
        let sup = sol.slices.iter().map(|s| s.sup_norm()).fold(0.0, f64::max);
        let mut row: Vec<String> = sol.lambda.iter().map(|v| fmt_f64(*v)).collect();
        row.extend([fmt_f64(sol.residual), sol.iterations.to_string(), fmt_f64(sup)]);
        t.push(row);
    }
    out.file("cell_summary.csv", t.render());
    Ok(out)
}

pub fn run(b: &HeatBlock) -> Result<Outcome, CliError> {
    let cfg = &b.problem;
    let mut out = Outcome::default();
    let axes = match &b.lambda_axes {
        Some(a) => a.clone(),
        None => lambda_range_presolve(cfg, &b.grid, b.lambda_points).map_err(CliError::run)?,
    };
    let eff = effective_coefficients(cfg, axes, &b.cell_grid).map_err(CliError::run)?;
    table_checks(cfg, &eff, &mut out);

    let study = convergence_study(cfg, &b.eps_list, &b.grid, &eff).map_err(CliError::run)?;
    let csv = study.to_csv();
    out.file("convergence.csv", csv.clone());
    if study.homogenized.extrapolated {
        out.warnings.extend(study.homogenized.traj.warnings.iter().cloned());
    }
    let complete = study.failure.is_none();
    if let Some(f) = &study.failure {
        out.warnings.push(format!("fine solve failed: {f}"));
    }
    out.check(
        "fine_solves",
        complete,
        study.failure.clone().unwrap_or_else(|| format!("{} runs", study.eps.len())),
    );

    if cfg.has_memory() {
        let why = "the macroscopic equation is not the limit of the fine one when the memory term is active";
        out.skip("monotone_error", why);
        out.skip("relative_error", why);
    } else {
        out.check(
            "monotone_error",
            complete && study.strictly_decreasing(),
            format!("{:?}", study.l2_error.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>()),
        );
        let rel = study.l2_error.last().copied().unwrap_or(f64::INFINITY) / study.limit_norm;
        out.check(
            "relative_error",
            complete && rel < b.tol,
            format!("final error / |u0| = {rel:.3e} (tol {:.1e})", b.tol),
        );
    }
    out.check(
        "energy_bound",
        study.energy_within_bound(),
        format!("largest energy {:.6e}, bound {:.6e}", study.energy.iter().copied().fold(0.0, f64::max), study.energy_bound),
    );

    if cfg.has_memory() {
        let mut t = CsvTable::new(&["eps", "start_step", "steps", "sweeps", "max_quotient", "apriori_factor", "halvings"]);
        let mut worst = 0.0f64;
        for (e, run) in study.eps.iter().zip(&study.fine) {
            for s in &run.slabs {
                worst = worst.max(s.max_quotient);
                t.push(vec![
                    fmt_f64(*e),
                    s.start_step.to_string(),
                    s.steps.to_string(),
                    s.sweeps.to_string(),
                    fmt_f64(s.max_quotient),
                    fmt_f64(s.apriori_factor),
                    s.halvings.to_string(),
                ]);
            }
        }
        out.file("slabs.csv", t.render());
        out.check(
            "slab_contraction",
            complete && worst < SLAB_CONTRACTION,
            format!("largest contraction quotient {worst:.3e} (limit {SLAB_CONTRACTION})"),
        );
    } else {
        out.skip("slab_contraction", "no memory term");
    }

    match &b.corrector {
        Some(c) if complete => {
            let report = corrector_check(cfg, &study, &eff, &b.grid, c.coarse, c.torus).map_err(CliError::run)?;
            let gains = report.gains();
            let mut t = CsvTable::new(&["eps", "l2_error", "reconstruction_error", "gain"]);
            for i in 0..report.eps.len() {
                t.push_numeric(&[report.eps[i], report.l2_error[i], report.reconstruction_error[i], gains[i]]);
            }
            out.file("corrector.csv", t.render());
            out.file("corrector_gradient.csv", report.gradient.to_csv());
            let last = gains.last().copied().unwrap_or(0.0);
            out.check("corrector_gain", last >= 2.0, format!("gain at the finest eps {last:.3}"));
            out.check(
                "corrector_gradient",
                report.gradient.verdict,
                format!("final relative residual {:.3e}", report.gradient.final_relative()),
            );
        }
        Some(_) => {
            out.skip("corrector_gain", "fine solves incomplete");
            out.skip("corrector_gradient", "fine solves incomplete");
        }
        None => {
            out.skip("corrector_gain", "no corrector block");
            out.skip("corrector_gradient", "no corrector block");
        }
    }

    let stride = (study.homogenized.steps / b.snapshots).max(1);
    out.file("snapshots_homogenized.csv", snapshot_csv(&study.homogenized.traj, stride));
    for (j, run) in study.fine.iter().enumerate() {
        out.file(format!("snapshots_fine_{j}.csv"), snapshot_csv(&run.traj, stride));
    }
    if b.plot {
        match plot::parse_study(&csv) {
            Ok(rows) => out.file("convergence.svg", plot::render_svg(&rows)),
            Err(e) => out.warnings.push(format!("no plot: {e}")),
        }
    }
    Ok(out)
}
