//! End-to-end acceptance run: one line per criterion, nonzero exit on
//! any failure. Every experiment goes through the `sigmahom` binary.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use serde_json::Value;

const SQRT3_TOL: f64 = 1e-4;
const B0_TOL: f64 = 1e-6;
const CONSTANT_RESIDUAL: f64 = 1e-14;
const SIGMA_RESIDUAL: f64 = 1e-2;
const MEAN_TOL: f64 = 1e-3;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
    dir: PathBuf,
    elapsed: Duration,
    manifest: Value,
}

impl Run {
    fn verdict(&self, name: &str) -> &str {
        self.manifest["verdicts"][name]["verdict"].as_str().unwrap_or("missing")
    }

    fn passed(&self, names: &[&str]) -> Result<(), String> {
        for n in names {
            if self.verdict(n) != "pass" {
                return Err(format!("{n}: {} ({})", self.verdict(n), self.manifest["verdicts"][n]["detail"]));
            }
        }
        Ok(())
    }

    fn read(&self, file: &str) -> String {
        std::fs::read_to_string(self.dir.join(file)).unwrap_or_default()
    }

    /// Listed files equal the directory contents.
    fn manifest_complete(&self) -> Result<(), String> {
        let listed: BTreeSet<String> = self.manifest["files"]
            .as_array()
            .map(|a| a.iter().filter_map(|v| v.as_str().map(String::from)).collect())
            .unwrap_or_default();
        let present: BTreeSet<String> = std::fs::read_dir(&self.dir)
            .map_err(|e| e.to_string())?
            .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
            .collect();
        if listed == present {
            Ok(())
        } else {
            Err(format!("manifest lists {listed:?}, directory holds {present:?}"))
        }
    }
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn sigmahom(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_sigmahom"))
        .args(args)
        .output()
        .expect("spawn sigmahom");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn run(root: &Path, cfg: &str, tag: &str) -> Run {
    let dir = root.join(tag);
    let start = Instant::now();
    let (code, stdout, stderr) = sigmahom(&["run", config(cfg).to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    let elapsed = start.elapsed();
    let manifest = std::fs::read_to_string(dir.join("manifest.json"))
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok())
        .unwrap_or(Value::Null);
    Run { code, stdout, stderr, dir, elapsed, manifest }
}

fn exit_zero(r: &Run) -> Result<(), String> {
    if r.code == 0 {
        Ok(())
    } else {
        Err(format!("exit {}\n{}{}", r.code, r.stdout, r.stderr))
    }
}

fn within(r: &Run, limit: Duration) -> Result<(), String> {
    if r.elapsed <= limit {
        Ok(())
    } else {
        Err(format!("took {:.1?}, limit {limit:?}", r.elapsed))
    }
}

/// Rows of a CSV without comments, split on commas.
fn rows(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.is_empty());
    let head = lines.next().unwrap_or("").split(',').map(String::from).collect();
    let body = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap_or(f64::NAN)).collect())
        .collect();
    (head, body)
}

fn column(text: &str, name: &str) -> Vec<f64> {
    let (head, body) = rows(text);
    match head.iter().position(|h| h == name) {
        Some(i) => body.iter().map(|r| r[i]).collect(),
        None => Vec::new(),
    }
}

fn mean_value(root: &Path) -> Result<String, String> {
    let r = run(root, "mean_value.json", "c1");
    exit_zero(&r)?;
    r.manifest_complete()?;
    r.passed(&["mean_value", "trig_polynomials"])?;
    let text = r.read("mean.csv");
    let last = column(&text, "average").last().copied().unwrap_or(f64::NAN);
    if !((last - 0.5).abs() < MEAN_TOL) {
        return Err(format!("average at the largest radius {last}"));
    }
    if column(&text, "radius").last() != Some(&1000.0) {
        return Err("radius schedule does not reach 1000".into());
    }
    within(&r, Duration::from_secs(5))?;
    Ok(format!("M(sin²) = {last:.6}, {:.2?}", r.elapsed))
}

fn group_algebra(conv: &Run) -> Result<String, String> {
    exit_zero(conv)?;
    conv.manifest_complete()?;
    conv.passed(&["homomorphism", "young", "cos_mode_convolution"])?;
    let text = conv.read("group_checks.csv");
    let value = |name: &str| {
        text.lines()
            .find(|l| l.starts_with(name))
            .and_then(|l| l.split(',').nth(1))
            .and_then(|v| v.parse::<f64>().ok())
            .unwrap_or(f64::NAN)
    };
    if value("homomorphism_mismatches") != 0.0 || value("young_violations") != 0.0 {
        return Err(text);
    }
    if !(value("cos_vs_direct_sum") < 1e-12 && value("cos_vs_half_cos") < 1e-12) {
        return Err(text);
    }
    let young = rows(&conv.read("young.csv")).1.len();
    if young != 200 {
        return Err(format!("{young} Young rows, expected 200"));
    }
    Ok(format!("cos mode within {:.1e}", value("cos_vs_direct_sum").max(value("cos_vs_half_cos"))))
}

fn translations(root: &Path) -> Result<String, String> {
    let r = run(root, "sigma_check.json", "c3");
    exit_zero(&r)?;
    r.manifest_complete()?;
    r.passed(&["unshifted", "micro_translation", "macro_translation", "shift_detected"])?;
    let summary: Value = serde_json::from_str(&r.read("sigma_summary.json")).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for name in ["micro_translation", "macro_translation"] {
        let v = summary["runs"][name]["final_max_residual"].as_f64().unwrap_or(f64::NAN);
        if !(v < SIGMA_RESIDUAL) {
            return Err(format!("{name}: final residual {v}"));
        }
        worst = worst.max(v);
        let eps = column(&r.read(&format!("sigma_{name}.csv")), "eps");
        if eps.last() .map_or(true, |e| *e > 1.0 / 64.0 + 1e-12) {
            return Err(format!("{name}: schedule stops at {eps:?}"));
        }
    }
    within(&r, Duration::from_secs(30))?;
    Ok(format!("largest final residual {worst:.2e}, {:.2?}", r.elapsed))
}

fn convolution_limit(conv: &Run) -> Result<String, String> {
    exit_zero(conv)?;
    conv.passed(&["convolution_limit"])?;
    let text = conv.read("convolution_limit.csv");
    let (eps, res) = (column(&text, "eps"), column(&text, "residual"));
    let mut schedule: Vec<f64> = Vec::new();
    let mut maxima: Vec<f64> = Vec::new();
    for (e, r) in eps.iter().zip(&res) {
        if schedule.last() != Some(e) {
            schedule.push(*e);
            maxima.push(0.0);
        }
        let m = maxima.last_mut().unwrap();
        *m = m.max(*r);
    }
    if schedule != [0.125, 0.0625, 0.03125, 0.015625] {
        return Err(format!("schedule {schedule:?}"));
    }
    if !maxima.windows(2).all(|w| w[1] <= w[0]) {
        return Err(format!("max residuals {maxima:?} not decreasing"));
    }
    within(conv, Duration::from_secs(120))?;
    Ok(format!("max residuals {:?}, {:.2?}", maxima.iter().map(|m| format!("{m:.1e}")).collect::<Vec<_>>(), conv.elapsed))
}

fn wilson_cowan(root: &Path) -> Result<String, String> {
    let decay = run(root, "wilson_cowan_decay.json", "c5a");
    exit_zero(&decay)?;
    decay.manifest_complete()?;
    decay.passed(&["exact_decay", "a_priori_bound"])?;
    let r = run(root, "wilson_cowan.json", "c5");
    exit_zero(&r)?;
    r.manifest_complete()?;
    r.passed(&["a_priori_bound", "homogenization"])?;
    if !r.read("wc_norms.csv").lines().any(|l| l.starts_with("# a_priori_bound")) {
        return Err("wc_norms.csv does not record C".into());
    }
    within(&r, Duration::from_secs(300))?;
    Ok(format!("{}; {:.2?}", r.manifest["verdicts"]["homogenization"]["detail"].as_str().unwrap_or(""), r.elapsed))
}

fn cell_problem(root: &Path) -> Result<String, String> {
    let r = run(root, "cell_harmonic.json", "c6");
    exit_zero(&r)?;
    r.manifest_complete()?;
    r.passed(&["cell_residual", "effective_monotonicity", "effective_lipschitz"])?;
    let text = r.read("effective_coefficients.csv");
    let (lambda, b) = (column(&text, "lambda_0"), column(&text, "b_0"));
    let mut worst = 0.0f64;
    for (l, v) in lambda.iter().zip(&b) {
        if *l != 0.0 {
            worst = worst.max((v / l - 3f64.sqrt()).abs());
        }
    }
    if lambda.is_empty() || !(worst < SQRT3_TOL) {
        return Err(format!("b slope off √3 by {worst:e}"));
    }
    let rho = column(&text, "rho_eff");
    if rho.is_empty() || rho.iter().any(|v| *v != 2.0) {
        return Err(format!("rho_eff {rho:?}"));
    }
    let c = run(root, "cell_constant.json", "c6b");
    exit_zero(&c)?;
    c.manifest_complete()?;
    let summary = c.read("cell_summary.csv");
    let (sup, res) = (column(&summary, "corrector_sup"), column(&summary, "residual"));
    if sup.is_empty() || sup.iter().any(|v| *v != 0.0) || res.iter().any(|v| !(*v < CONSTANT_RESIDUAL)) {
        return Err(format!("constant case: corrector sup {sup:?}, residual {res:?}"));
    }
    within(&r, Duration::from_secs(30))?;
    Ok(format!("|b/λ - √3| ≤ {worst:.1e}, rho = 2, {:.2?}", r.elapsed))
}

fn homogenization(root: &Path) -> Result<String, String> {
    let r = run(root, "heat_harmonic.json", "c7");
    exit_zero(&r)?;
    r.manifest_complete()?;
    r.passed(&["fine_solves", "monotone_error", "relative_error", "energy_bound", "corrector_gain"])?;
    let text = r.read("convergence.csv");
    let (eps, err) = (column(&text, "eps"), column(&text, "l2_error"));
    if eps != [0.25, 0.125, 0.0625, 0.03125] || !err.windows(2).all(|w| w[1] < w[0]) {
        return Err(format!("eps {eps:?}, errors {err:?}"));
    }
    let corr = r.read("corrector.csv");
    let gain = column(&corr, "gain").last().copied().unwrap_or(0.0);
    if !(gain >= 2.0) {
        return Err(format!("corrector gain {gain}"));
    }
    // the plot command on the study itself
    let svg = r.dir.with_extension("svg");
    let (code, stdout, stderr) = sigmahom(&[
        "plot",
        r.dir.join("convergence.csv").to_str().unwrap(),
        "--out",
        svg.to_str().unwrap(),
    ]);
    let slope: f64 = stdout.trim().strip_prefix("slope = ").and_then(|s| s.parse().ok()).unwrap_or(f64::NAN);
    if code != 0 || !(slope > 0.5 && slope < 1.5) {
        return Err(format!("plot exit {code}, slope {slope}: {stderr}"));
    }
    within(&r, Duration::from_secs(600))?;
    Ok(format!("final error {:.3e}, corrector gain {gain:.2}, slope {slope:.3}, {:.2?}", err[3], r.elapsed))
}

fn memory(root: &Path) -> Result<String, String> {
    let r = run(root, "heat_memory.json", "c8");
    exit_zero(&r)?;
    r.manifest_complete()?;
    r.passed(&["fine_solves", "slab_contraction", "cell_residual"])?;
    let text = r.read("effective_coefficients.csv");
    let (lambda, b0) = (column(&text, "lambda_0"), column(&text, "b0"));
    // K = 3(1 + cos 2πτ / 2) has mean 3 and a₀ = λ
    let worst = lambda.iter().zip(&b0).map(|(l, v)| (v - 3.0 * l).abs()).fold(0.0, f64::max);
    if lambda.is_empty() || !(worst < B0_TOL) {
        return Err(format!("b0 off M(K)·λ by {worst:e}"));
    }
    within(&r, Duration::from_secs(120))?;
    Ok(format!("{}, |b0 - 3λ| ≤ {worst:.1e}", r.manifest["verdicts"]["slab_contraction"]["detail"].as_str().unwrap_or("")))
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .into_iter()
        .flatten()
        .flatten()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

fn determinism(root: &Path) -> Result<String, String> {
    let mut compared = 0;
    for cfg in ["mean_value.json", "wilson_cowan.json"] {
        let a = run(root, cfg, &format!("c9a_{cfg}"));
        let b = run(root, cfg, &format!("c9b_{cfg}"));
        exit_zero(&a)?;
        exit_zero(&b)?;
        let (fa, fb) = (csv_files(&a.dir), csv_files(&b.dir));
        if fa.is_empty() || fa != fb {
            return Err(format!("{cfg}: CSV outputs differ"));
        }
        compared += fa.len();
    }
    let bad = run(root, "heat_not_monotone.json", "c9c");
    if bad.code != 3 || !bad.stderr.contains("monotonicity") {
        return Err(format!("c1 = 0 gave exit {} with {:?}", bad.code, bad.stderr));
    }
    Ok(format!("{compared} CSV files identical; c1 = 0 rejected with exit 3"))
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let root = tmp.path();
    let conv = run(root, "convolution_check.json", "c2");
    let criteria: Vec<(&str, Result<String, String>)> = vec![
        ("1 mean value", mean_value(root)),
        ("2 group algebra", group_algebra(&conv)),
        ("3 translations", translations(root)),
        ("4 convolution limit", convolution_limit(&conv)),
        ("5 wilson-cowan", wilson_cowan(root)),
        ("6 cell problem", cell_problem(root)),
        ("7 homogenization", homogenization(root)),
        ("8 memory term", memory(root)),
        ("9 determinism", determinism(root)),
    ];
    let mut failed = 0;
    for (name, res) in &criteria {
        match res {
            Ok(detail) => println!("PASS  criterion {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  criterion {name}: {why}");
            }
        }
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
