use std::collections::BTreeMap;
use std::f64::consts::TAU;

use serde::Serialize;
use sigmahom::algebra::AlgebraSpec;
use sigmahom::neural_field::shift_limit_point;
use sigmahom::sigma::{
    check_eps_schedule, default_test_bank, macro_translate_limit, micro_translate_limit, sigma_residuals,
    EpsSequence, MacroExtension, MacroGrid, SigmaMode, SigmaTestResult, TestFunction, TwoScaleField,
    DEFAULT_SIGMA_TOL,
};

use crate::config::SigmaCheckBlock;
use crate::error::CliError;
use crate::report::Outcome;

fn spec() -> AlgebraSpec {
    AlgebraSpec::periodic(1).expect("periodic algebra")
}

pub fn validate(b: &SigmaCheckBlock) -> Result<(), CliError> {
    check_eps_schedule(&b.eps).map_err(CliError::validation)?;
    check_eps_schedule(&b.macro_eps).map_err(CliError::validation)?;
    shift_limit_point(&[b.macro_shift], &b.macro_eps, &spec()).map_err(CliError::validation)?;
    let finest = b.eps.iter().chain(&b.macro_eps).copied().fold(f64::INFINITY, f64::min);
    let per_period = (b.macro_nodes - 1) as f64 * finest / f64::from(b.mode.max(1));
    if b.macro_nodes < 2 || per_period < 16.0 {
        return Err(CliError::Validation(format!(
            "{} macro nodes give {per_period:.1} nodes per oscillation; at least 16 are needed",
            b.macro_nodes
        )));
    }
    if b.limit_nodes < 2 || b.torus_dims.len() != 1 || b.torus_dims[0] == 0 || b.mode == 0 {
        return Err(CliError::Validation("limit grid, torus grid and mode must be nonempty".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct Summary {
    final_max_residual: f64,
    final_relative: f64,
    monotone: bool,
    verdict: bool,
}

impl Summary {
    fn of(r: &SigmaTestResult) -> Self {
        Self {
            final_max_residual: r.max_residuals.last().copied().unwrap_or(0.0),
            final_relative: r.final_relative(),
            monotone: r.monotone,
            verdict: r.verdict,
        }
    }
}

pub fn run(b: &SigmaCheckBlock) -> Result<Outcome, CliError> {
    let spec = spec();
    let k = f64::from(b.mode);
    let fine_grid = MacroGrid::interval(0.0, 1.0, b.macro_nodes).map_err(CliError::run)?;
    let limit_grid = MacroGrid::interval(0.0, 1.0, b.limit_nodes).map_err(CliError::run)?;
    let u0 = TwoScaleField::from_fn(limit_grid.clone(), &spec, &b.torus_dims, |_, s| (TAU * k * s[0]).sin())
        .map_err(CliError::run)?;
    let mut bank = default_test_bank(&limit_grid, 1, b.bumps, b.modes);
    bank.push(TestFunction::new("sin-mode", move |_, s| (TAU * k * s[0]).sin()));
    bank.push(TestFunction::new("cos-mode", move |_, s| (TAU * k * s[0]).cos()));

    let sequence = |eps: &[f64], phase: &(dyn Fn(f64) -> f64 + Sync), name: &str| {
        EpsSequence::generate(
            eps.to_vec(),
            |_| fine_grid.clone(),
            |x, e| (TAU * k * x[0] / e + TAU * k * phase(e)).sin(),
            name,
        )
        .map_err(CliError::run)
    };
    let residuals = |seq: &EpsSequence, limit: &TwoScaleField| {
        sigma_residuals(seq, limit, &bank, SigmaMode::Weak, DEFAULT_SIGMA_TOL).map_err(CliError::run)
    };

    // u_ε(x + εa) = sin(2πk(x/ε + a)); u_ε(x + a) = sin(2πk(x + a)/ε)
    let a = b.micro_shift;
    let shift = b.macro_shift;
    let r = shift_limit_point(&[shift], &b.macro_eps, &spec).map_err(CliError::validation)?;
    let micro = sequence(&b.eps, &|_| a, "sin(2πk(x/ε + a))")?;
    let runs: [(&str, SigmaTestResult); 3] = [
        ("unshifted", residuals(&sequence(&b.eps, &|_| 0.0, "sin(2πkx/ε)")?, &u0)?),
        (
            "micro_translation",
            residuals(&micro, &micro_translate_limit(&u0, &[a]).map_err(CliError::run)?)?,
        ),
        (
            "macro_translation",
            residuals(
                &sequence(&b.macro_eps, &|e| shift / e, "sin(2πk(x + a)/ε)")?,
                &macro_translate_limit(&u0, &[shift], &r, MacroExtension::Periodic).map_err(CliError::run)?,
            )?,
        ),
    ];

    let mut out = Outcome::default();
    let mut summary = BTreeMap::new();
    for (name, res) in &runs {
        out.file(format!("sigma_{name}.csv"), res.to_csv());
        let last = res.max_residuals.last().copied().unwrap_or(0.0);
        out.check(
            name,
            last < b.residual_tol,
            format!("final max residual {last:.3e} (bound {:.1e})", b.residual_tol),
        );
        summary.insert(name.to_string(), Summary::of(res));
    }
    // the shifted sequence must not pass against the unshifted limit
    let control = residuals(&micro, &u0)?;
    let gap = control.max_residuals.last().copied().unwrap_or(0.0);
    if (k * a - (k * a).round()).abs() < 1e-9 {
        out.skip("shift_detected", "k·a is an integer, the shift is invisible");
    } else {
        out.check(
            "shift_detected",
            gap > b.residual_tol,
            format!("shifted sequence against the unshifted limit: {gap:.3e}"),
        );
    }
    let json = serde_json::json!({
        "macro_limit_point": r.coords(),
        "runs": summary,
        "control_max_residual": gap,
    });
    out.file("sigma_summary.json", serde_json::to_string_pretty(&json).expect("serializable") + "\n");
    Ok(out)
}
