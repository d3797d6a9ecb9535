use std::f64::consts::TAU;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sigmahom::algebra::{frac, mean_value, AlgebraSpec, TorusField};
use sigmahom::io::{fmt_f64, CsvTable};
use sigmahom::registry::{TorusFunction, TrigTerm};

use crate::config::MeanValueBlock;
use crate::error::CliError;
use crate::report::Outcome;

pub fn validate(b: &MeanValueBlock) -> Result<(), CliError> {
    if !(b.tol > 0.0) {
        return Err(CliError::Validation(format!("tolerance {} must be positive", b.tol)));
    }
    if b.radii.is_empty() || b.radii.iter().any(|r| !(*r > 0.0)) || b.radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Validation("radii must be positive and strictly increasing".into()));
    }
    if let Some(d) = &b.torus_dims {
        if d.len() != b.algebra.torus_dim() || d.contains(&0) {
            return Err(CliError::Validation(format!(
                "torus_dims {d:?} do not fit a torus of dimension {}",
                b.algebra.torus_dim()
            )));
        }
    }
    Ok(())
}

/// `f(y) = F(frac(ω·y))`.
fn on_space<'a>(spec: &'a AlgebraSpec, f: &'a TorusFunction) -> impl Fn(&[f64]) -> f64 + Sync + 'a {
    move |y: &[f64]| {
        let s: Vec<f64> = spec
            .frequencies()
            .iter()
            .map(|row| frac(row.iter().zip(y).map(|(w, x)| w * x).sum()))
            .collect();
        f.eval(&s)
    }
}

fn random_polynomial(rng: &mut ChaCha8Rng, torus_dim: usize) -> TorusFunction {
    let n = rng.random_range(1..=4usize);
    let terms = (0..n)
        .map(|_| TrigTerm {
            coef: rng.random_range(-1.0..1.0),
            modes: (0..torus_dim).map(|_| rng.random_range(-3..=3i64)).collect(),
            phase: rng.random_range(0.0..TAU),
        })
        .collect();
    TorusFunction::Trig { terms }
}

pub fn run(b: &MeanValueBlock, seed: u64) -> Result<Outcome, CliError> {
    let spec = &b.algebra;
    let dims = b.torus_dims.clone().unwrap_or_else(|| vec![256; spec.torus_dim()]);
    let mut out = Outcome::default();

    let compare = |f: &TorusFunction| -> Result<(sigmahom::algebra::MeanEstimate, f64), CliError> {
        let est = mean_value(&on_space(spec, f), spec, &b.radii, b.tol).map_err(CliError::run)?;
        let haar = TorusField::from_fn(spec, &dims, |s| f.eval(s)).map_err(CliError::run)?.mean();
        Ok((est, haar))
    };

    let (est, haar) = compare(&b.function)?;
    let mut t = CsvTable::new(&["radius", "average"]);
    t.comment(format!("torus_average = {}", fmt_f64(haar)));
    t.comment(format!("exact_mean = {}", fmt_f64(b.function.exact_mean())));
    for (r, a) in est.radii.iter().zip(&est.partial_averages) {
        t.push_numeric(&[*r, *a]);
    }
    out.file("mean.csv", t.render());
    let gap = (est.value - haar).abs();
    out.check(
        "mean_value",
        est.converged && gap < b.tol,
        format!("expanding average {:.6e}, torus average {haar:.6e}, gap {gap:.2e}", est.value),
    );

    if b.random_polynomials == 0 {
        out.skip("trig_polynomials", "no random polynomials requested");
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = CsvTable::new(&["index", "expanding_average", "torus_average", "difference"]);
    t.comment(format!("seed = {seed}"));
    let mut worst = 0.0f64;
    let mut all_converged = true;
    for k in 0..b.random_polynomials {
        let p = random_polynomial(&mut rng, spec.torus_dim());
        let (est, haar) = compare(&p)?;
        let d = (est.value - haar).abs();
        worst = worst.max(d);
        all_converged &= est.converged;
        t.comment(format!("p{k} = {}", serde_json::to_string(&p).expect("serializable")));
        t.push(vec![k.to_string(), fmt_f64(est.value), fmt_f64(haar), fmt_f64(d)]);
    }
    out.file("polynomials.csv", t.render());
    out.check(
        "trig_polynomials",
        all_converged && worst < b.tol,
        format!("{} polynomials, largest gap {worst:.2e}", b.random_polynomials),
    );
    Ok(out)
}
