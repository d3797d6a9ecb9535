use sigmahom::io::{fmt_f64, CsvTable};
use sigmahom::neural_field::{compare_wc, shift_limit_point, solve_fine_family, solve_homogenized_wc, space_time_bank};
use sigmahom::registry::{Firing, Profile};
use sigmahom::sigma::MacroField;
use sigmahom::trajectory::FieldTrajectory;

use super::snapshot_csv;
use crate::config::WilsonCowanBlock;
use crate::error::CliError;
use crate::report::Outcome;

/// Bound on the error of the exact exponential-decay case.
const DECAY_TOL: f64 = 1e-6;

pub fn validate(b: &WilsonCowanBlock) -> Result<(), CliError> {
    b.problem.validate(&b.eps_list).map_err(CliError::validation)?;
    if b.torus_dims.len() != b.problem.algebra.torus_dim() || b.torus_dims.contains(&0) {
        return Err(CliError::Validation(format!(
            "torus_dims {:?} do not fit a torus of dimension {}",
            b.torus_dims,
            b.problem.algebra.torus_dim()
        )));
    }
    if b.compare {
        shift_limit_point(&b.problem.shift, &b.eps_list, &b.problem.algebra).map_err(CliError::validation)?;
    }
    Ok(())
}

pub fn run(b: &WilsonCowanBlock) -> Result<Outcome, CliError> {
    let cfg = &b.problem;
    let mut out = Outcome::default();
    let bound = cfg.a_priori_bound(b.disc.dx).map_err(CliError::run)?;
    let fine = solve_fine_family(cfg, &b.eps_list, &b.disc).map_err(CliError::run)?;

    let mut norms = CsvTable::new(&["eps", "t", "l1", "l2"]);
    norms.comment(format!("a_priori_bound = {}", fmt_f64(bound)));
    let mut peak = 0.0f64;
    for (j, (e, tr)) in b.eps_list.iter().zip(&fine).enumerate() {
        for k in 0..tr.times.len() {
            norms.push_numeric(&[*e, tr.times[k], tr.l1[k], tr.l2[k]]);
        }
        peak = peak.max(tr.norm_peak());
        out.file(format!("snapshots_fine_{j}.csv"), snapshot_csv(tr, 1));
        out.warnings.extend(tr.warnings.iter().map(|w| format!("eps = {e}: {w}")));
    }
    out.file("wc_norms.csv", norms.render());
    out.check(
        "a_priori_bound",
        peak <= bound,
        format!("largest sup_t(|u|_1 + |u|_2) = {peak:.6e}, C = {bound:.6e}"),
    );

    match (&cfg.initial, &cfg.firing, cfg.kernel.is_zero()) {
        (Profile::Constant { value }, Firing::Zero, true) => {
            let mut err = 0.0f64;
            for tr in &fine {
                for (t, s) in tr.times.iter().zip(&tr.states) {
                    let exact = value * (-t).exp();
                    err = s.values.iter().fold(err, |m, v| m.max((v - exact).abs()));
                }
            }
            out.check("exact_decay", err < DECAY_TOL, format!("max |u - c e^-t| = {err:.3e}"));
        }
        _ => out.skip("exact_decay", "needs K = 0, f = 0 and constant initial data"),
    }

    if !b.compare {
        out.skip("homogenization", "comparison disabled");
        return Ok(out);
    }
    let r = shift_limit_point(&cfg.shift, &b.eps_list, &cfg.algebra).map_err(CliError::validation)?;
    let homog = solve_homogenized_wc(cfg, &r, &b.disc, &b.torus_dims).map_err(CliError::run)?;
    let bank = space_time_bank(&homog).map_err(CliError::run)?;
    let res = compare_wc(&b.eps_list, &fine, &homog, &bank, b.tol).map_err(CliError::run)?;
    out.file("wc_residuals.csv", res.to_csv());
    let means: Vec<MacroField> = homog.states.iter().map(|s| s.torus_mean()).collect();
    let mean_traj = FieldTrajectory {
        times: homog.times.clone(),
        states: means,
        l1: homog.l1.clone(),
        l2: homog.l2.clone(),
        bound: homog.bound,
        warnings: Vec::new(),
    };
    out.file("snapshots_homogenized.csv", snapshot_csv(&mean_traj, 1));
    let decreasing = res.max_residuals.windows(2).all(|w| w[1] < w[0] || w[1] <= 1e-12 * res.scale);
    out.check(
        "homogenization",
        res.verdict && decreasing,
        format!(
            "max residuals {:?}, final relative {:.3e} (tol {:.1e})",
            res.max_residuals.iter().map(|r| format!("{r:.2e}")).collect::<Vec<_>>(),
            res.final_relative(),
            b.tol
        ),
    );
    Ok(out)
}
