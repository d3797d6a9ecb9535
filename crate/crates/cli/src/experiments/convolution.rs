use std::f64::consts::TAU;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sigmahom::algebra::{circle_dist, dirac_point, group_mul, spectrum_convolve, AlgebraSpec, TorusField};
use sigmahom::io::{fmt_f64, CsvTable};
use sigmahom::numerics::Axis;
use sigmahom::sigma::{
    check_eps_schedule, convolution_limit_check, default_test_bank, EpsSequence, MacroGrid, TwoScaleField,
    YoungExponents,
};

use crate::config::ConvolutionCheckBlock;
use crate::error::CliError;
use crate::report::Outcome;

/// Tolerance of the cos-mode comparisons.
const COS_TOL: f64 = 1e-12;

pub fn validate(b: &ConvolutionCheckBlock) -> Result<(), CliError> {
    check_eps_schedule(&b.eps).map_err(CliError::validation)?;
    let [p, q, m] = b.exponents;
    YoungExponents::new(p, q, m).map_err(CliError::validation)?;
    for (name, n) in [("nodes", b.nodes), ("kernel_nodes", b.kernel_nodes)] {
        if n < 4 || !n.is_power_of_two() {
            return Err(CliError::Validation(format!("{name} = {n} must be a power of two >= 4")));
        }
    }
    let h = 1.0 / (b.nodes - 1) as f64;
    let finest = b.eps[b.eps.len() - 1] / f64::from(b.mode.max(1));
    if finest / h < 16.0 || b.mode == 0 {
        return Err(CliError::Validation(format!(
            "{} nodes give {:.1} nodes per oscillation; at least 16 are needed",
            b.nodes,
            finest / h
        )));
    }
    if b.young_n < 2 || b.torus_dims.len() != 1 || b.torus_dims[0] == 0 {
        return Err(CliError::Validation("young_n and torus_dims must be nonempty".into()));
    }
    Ok(())
}

fn group_checks(b: &ConvolutionCheckBlock, rng: &mut ChaCha8Rng, out: &mut Outcome) -> Result<(), CliError> {
    // dyadic points keep x + y and every reduction mod 1 exact
    let spec = AlgebraSpec::periodic(2).map_err(CliError::run)?;
    let mut dyadic = || [0; 2].map(|_: i32| rng.random_range(-(1i64 << 30)..(1i64 << 30)) as f64 / 1024.0);
    let mut mismatches = 0usize;
    for _ in 0..b.homomorphism_pairs {
        let (x, y) = (dyadic(), dyadic());
        let sum = [x[0] + y[0], x[1] + y[1]];
        let lhs = dirac_point(&sum, &spec).map_err(CliError::run)?;
        let rhs = group_mul(
            &dirac_point(&x, &spec).map_err(CliError::run)?,
            &dirac_point(&y, &spec).map_err(CliError::run)?,
        )
        .map_err(CliError::run)?;
        mismatches += usize::from(lhs != rhs);
    }
    // generic floats agree up to rounding
    let qp = AlgebraSpec::quasi_periodic(vec![vec![1.0], vec![2f64.sqrt()]]).map_err(CliError::run)?;
    let mut rounding = 0.0f64;
    for _ in 0..b.homomorphism_pairs {
        let (x, y): (f64, f64) = (rng.random_range(-1e3..1e3), rng.random_range(-1e3..1e3));
        let lhs = dirac_point(&[x + y], &qp).map_err(CliError::run)?;
        let rhs = group_mul(
            &dirac_point(&[x], &qp).map_err(CliError::run)?,
            &dirac_point(&[y], &qp).map_err(CliError::run)?,
        )
        .map_err(CliError::run)?;
        for (a, c) in lhs.coords().iter().zip(rhs.coords()) {
            rounding = rounding.max(circle_dist(*a, *c));
        }
    }

    let p1 = AlgebraSpec::periodic(1).map_err(CliError::run)?;
    let n = b.young_n;
    let mut young = CsvTable::new(&["pair", "p", "q", "m", "lhs", "rhs"]);
    let mut violations = 0usize;
    for k in 0..b.young_pairs {
        let mut field = || {
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            TorusField::new(&p1, &[n], v).map_err(CliError::run)
        };
        let (u, v) = (field()?, field()?);
        let w = spectrum_convolve(&u, &v).map_err(CliError::run)?;
        for (p, q, m) in [(1.0, 1.0, 1.0), (2.0, 1.0, 2.0)] {
            let (lhs, rhs) = (w.norm(m), u.norm(p) * v.norm(q));
            violations += usize::from(lhs > rhs * (1.0 + 1e-12));
            young.push(vec![k.to_string(), fmt_f64(p), fmt_f64(q), fmt_f64(m), fmt_f64(lhs), fmt_f64(rhs)]);
        }
    }
    out.file("young.csv", young.render());

    let cos = TorusField::from_fn(&p1, &[n], |s| (TAU * s[0]).cos()).map_err(CliError::run)?;
    let w = spectrum_convolve(&cos, &cos).map_err(CliError::run)?;
    let c = cos.values();
    let (mut vs_direct, mut vs_half) = (0.0f64, 0.0f64);
    for i in 0..n {
        let direct: f64 = (0..n).map(|j| c[j] * c[(i + n - j) % n]).sum::<f64>() / n as f64;
        vs_direct = vs_direct.max((w.values()[i] - direct).abs());
        vs_half = vs_half.max((w.values()[i] - 0.5 * c[i]).abs());
    }

    let mut t = CsvTable::new(&["check", "value", "bound"]);
    t.push(vec!["homomorphism_mismatches".into(), mismatches.to_string(), "0".into()]);
    t.push(vec!["homomorphism_rounding".into(), fmt_f64(rounding), String::new()]);
    t.push(vec!["young_violations".into(), violations.to_string(), "0".into()]);
    t.push(vec!["cos_vs_direct_sum".into(), fmt_f64(vs_direct), fmt_f64(COS_TOL)]);
    t.push(vec!["cos_vs_half_cos".into(), fmt_f64(vs_half), fmt_f64(COS_TOL)]);
    out.file("group_checks.csv", t.render());

    out.check(
        "homomorphism",
        mismatches == 0,
        format!("{mismatches} of {} dyadic pairs differ; generic pairs within {rounding:.1e}", b.homomorphism_pairs),
    );
    out.check(
        "young",
        violations == 0,
        format!("{violations} violations over {} pairs and 2 exponent triples", b.young_pairs),
    );
    out.check(
        "cos_mode_convolution",
        vs_direct < COS_TOL && vs_half < COS_TOL,
        format!("{vs_direct:.1e} from the direct sum, {vs_half:.1e} from cos/2"),
    );
    Ok(())
}

pub fn run(b: &ConvolutionCheckBlock, seed: u64) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    group_checks(b, &mut rng, &mut out)?;

    let spec = AlgebraSpec::periodic(1).map_err(CliError::run)?;
    let h = 1.0 / (b.nodes - 1) as f64;
    let field_grid = MacroGrid::new(vec![Axis::new(0.0, h, b.nodes)], 1).map_err(CliError::run)?;
    let kernel_grid =
        MacroGrid::new(vec![Axis::new(-((b.kernel_nodes / 2) as f64) * h, h, b.kernel_nodes)], 1).map_err(CliError::run)?;
    let k = f64::from(b.mode);
    let (g, hp) = (&b.g, &b.h);
    let u_seq = EpsSequence::generate(
        b.eps.clone(),
        |_| field_grid.clone(),
        |x, e| g.eval(x) * (TAU * k * x[0] / e).sin(),
        "g(x) sin(2πkx/ε)",
    )
    .map_err(CliError::run)?;
    let v_seq = EpsSequence::generate(
        b.eps.clone(),
        |_| kernel_grid.clone(),
        |x, e| hp.eval(x) * (TAU * k * x[0] / e).sin(),
        "h(x) sin(2πkx/ε)",
    )
    .map_err(CliError::run)?;
    let u0 = TwoScaleField::from_fn(field_grid.clone(), &spec, &b.torus_dims, |x, s| g.eval(x) * (TAU * k * s[0]).sin())
        .map_err(CliError::run)?;
    let v0 = TwoScaleField::from_fn(kernel_grid, &spec, &b.torus_dims, |x, s| hp.eval(x) * (TAU * k * s[0]).sin())
        .map_err(CliError::run)?;
    let bank = default_test_bank(&field_grid, 1, b.bumps, b.modes);
    let [p, q, m] = b.exponents;
    let exps = YoungExponents::new(p, q, m).map_err(CliError::validation)?;
    let res = convolution_limit_check(&u_seq, &v_seq, &u0, &v0, &bank, exps, b.tol).map_err(CliError::run)?;
    out.file("convolution_limit.csv", res.to_csv());
    let decreasing = res.max_residuals.windows(2).all(|w| w[1] <= w[0]);
    out.check(
        "convolution_limit",
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
