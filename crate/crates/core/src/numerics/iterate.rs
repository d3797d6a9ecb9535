//! Iterative drivers: conjugate gradient and a monitored fixed-point loop.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute floor under every relative stopping test.
pub const ABS_FLOOR: f64 = 1e-14;

/// Outcome of an iterative solve.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iterations: usize,
    pub final_residual: f64,
    /// Per-sweep contraction quotients `‖x_{k+1}-x_k‖ / ‖x_k-x_{k-1}‖`
    /// (fixed-point drivers only).
    pub contraction: Vec<f64>,
    /// Residual after each iteration.
    pub history: Vec<f64>,
    pub converged: bool,
}

impl IterationReport {
    /// Largest recorded contraction quotient, or 0 if none.
    pub fn max_contraction(&self) -> f64 {
        self.contraction.iter().copied().fold(0.0, f64::max)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Step-wise conjugate gradient, optionally Jacobi-preconditioned.
///
/// Exposes its iterate so callers can watch the energy functional.
pub struct ConjugateGradient<'a, A> {
    apply: A,
    rhs: &'a [f64],
    inv_diag: Option<Vec<f64>>,
    x: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    p: Vec<f64>,
    ap: Vec<f64>,
    rz: f64,
}

impl<'a, A: FnMut(&[f64], &mut [f64])> ConjugateGradient<'a, A> {
    pub fn new(mut apply: A, rhs: &'a [f64], x0: Vec<f64>, diag: Option<&[f64]>) -> Self {
        let n = rhs.len();
        let mut ax = vec![0.0; n];
        apply(&x0, &mut ax);
        let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let inv_diag = diag.map(|d| d.iter().map(|v| 1.0 / v).collect::<Vec<_>>());
        let z = match &inv_diag {
            Some(m) => r.iter().zip(m).map(|(a, b)| a * b).collect(),
            None => r.clone(),
        };
        let rz = dot(&r, &z);
        Self {
            apply,
            rhs,
            inv_diag,
            x: x0,
            p: z.clone(),
            z,
            r,
            ap: vec![0.0; n],
            rz,
        }
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn residual_norm(&self) -> f64 {
        norm2(&self.r)
    }

    /// One CG update. Returns `false` if the search direction degenerated.
    pub fn step(&mut self) -> bool {
        (self.apply)(&self.p, &mut self.ap);
        let pap = dot(&self.p, &self.ap);
        if !(pap > 0.0) {
            return false;
        }
        let alpha = self.rz / pap;
        for i in 0..self.x.len() {
            self.x[i] += alpha * self.p[i];
            self.r[i] -= alpha * self.ap[i];
        }
        match &self.inv_diag {
            Some(m) => {
                for i in 0..self.z.len() {
                    self.z[i] = self.r[i] * m[i];
                }
            }
            None => self.z.copy_from_slice(&self.r),
        }
        let rz_new = dot(&self.r, &self.z);
        let beta = rz_new / self.rz;
        self.rz = rz_new;
        for i in 0..self.p.len() {
            self.p[i] = self.z[i] + beta * self.p[i];
        }
        true
    }

    pub fn into_solution(self) -> Vec<f64> {
        self.x
    }

    pub fn rhs(&self) -> &[f64] {
        self.rhs
    }
}

/// Deterministic probe vectors for the symmetry check.
fn probe(n: usize, k: usize) -> Vec<f64> {
    let a = 0.754_877_666 * (k + 1) as f64;
    let b = 1.324_717_957 * (k + 2) as f64;
    (0..n)
        .map(|i| ((i as f64 + 1.0) * a).sin() + 0.5 * ((i as f64 + 0.5) * b).cos())
        .collect()
}

/// Checks `⟨Ax, y⟩ = ⟨x, Ay⟩` on three probe pairs.
pub fn check_symmetric<A: FnMut(&[f64], &mut [f64])>(apply: &mut A, n: usize) -> Result<()> {
    let mut ax = vec![0.0; n];
    let mut ay = vec![0.0; n];
    for k in 0..3 {
        let x = probe(n, 2 * k);
        let y = probe(n, 2 * k + 1);
        apply(&x, &mut ax);
        apply(&y, &mut ay);
        let lhs = dot(&ax, &y);
        let rhs = dot(&x, &ay);
        let scale = (norm2(&ax) * norm2(&y)).max(norm2(&x) * norm2(&ay)).max(ABS_FLOOR);
        if (lhs - rhs).abs() > 1e-10 * scale {
            return Err(Error::OperatorContract(format!(
                "<Ax,y> = {lhs:.6e} but <x,Ay> = {rhs:.6e} on probe {k}"
            )));
        }
    }
    Ok(())
}

/// Solves `A x = rhs` for a symmetric positive-definite `A` given as a
/// matrix-free callback. Stops on `‖Ax - b‖ / ‖b‖ < tol`.
pub fn cg_solve<A: FnMut(&[f64], &mut [f64])>(
    apply: A,
    rhs: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, IterationReport)> {
    cg_solve_with(apply, rhs, vec![0.0; rhs.len()], None, tol, max_iter)
}

/// [`cg_solve`] with an initial guess and optional Jacobi diagonal.
pub fn cg_solve_with<A: FnMut(&[f64], &mut [f64])>(
    mut apply: A,
    rhs: &[f64],
    x0: Vec<f64>,
    diag: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, IterationReport)> {
    let n = rhs.len();
    check_symmetric(&mut apply, n)?;
    let bnorm = norm2(rhs);
    let threshold = (tol * bnorm).max(ABS_FLOOR);
    let mut report = IterationReport::default();
    let mut cg = ConjugateGradient::new(apply, rhs, x0, diag);
    let mut res = cg.residual_norm();
    report.history.push(res / bnorm.max(ABS_FLOOR));
    while res >= threshold {
        if report.iterations == max_iter || !cg.step() {
            return Err(Error::LinearSolver {
                iterations: report.iterations,
                residual: res / bnorm.max(ABS_FLOOR),
                history: report.history,
            });
        }
        report.iterations += 1;
        res = cg.residual_norm();
        report.history.push(res / bnorm.max(ABS_FLOOR));
    }
    report.final_residual = res / bnorm.max(ABS_FLOOR);
    report.converged = true;
    Ok((cg.into_solution(), report))
}

/// Fixed-point iteration `x ← step(x)` with contraction monitoring.
///
/// Stops once `‖x_{k+1} - x_k‖ < tol·max(‖x_{k+1}‖, 1) ` (floored at
/// [`ABS_FLOOR`]). Five consecutive quotients `≥ 1` raise
/// [`Error::Contraction`].
pub fn picard_drive<F>(
    mut step: F,
    init: Vec<f64>,
    tol: f64,
    max_sweeps: usize,
) -> Result<(Vec<f64>, IterationReport)>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut report = IterationReport::default();
    let mut x = init;
    let mut prev_inc: Option<f64> = None;
    let mut expanding = 0;
    for sweep in 1..=max_sweeps {
        let next = step(&x)?;
        let inc = next
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if !inc.is_finite() {
            return Err(Error::Divergence(format!("non-finite increment at sweep {sweep}")));
        }
        if let Some(p) = prev_inc {
            let q = if p > 0.0 { inc / p } else { 0.0 };
            report.contraction.push(q);
            if q >= 1.0 {
                expanding += 1;
                if expanding >= 5 {
                    return Err(Error::Contraction {
                        factor: q,
                        sweeps: sweep,
                    });
                }
            } else {
                expanding = 0;
            }
        }
        report.history.push(inc);
        report.iterations = sweep;
        x = next;
        if inc < (tol * norm2(&x).max(1.0)).max(ABS_FLOOR) {
            report.final_residual = inc;
            report.converged = true;
            return Ok((x, report));
        }
        prev_inc = Some(inc);
    }
    Err(Error::Contraction {
        factor: report.contraction.last().copied().unwrap_or(f64::NAN),
        sweeps: max_sweeps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn laplacian_1d(n: usize, h: f64) -> impl FnMut(&[f64], &mut [f64]) {
        move |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                let l = if i > 0 { x[i - 1] } else { 0.0 };
                let r = if i + 1 < n { x[i + 1] } else { 0.0 };
                y[i] = (2.0 * x[i] - l - r) / (h * h);
            }
        }
    }

    #[test]
    fn identity_solves_in_one_iteration() {
        let b = vec![1.0, -2.0, 3.5];
        let (x, rep) = cg_solve(|x, y| y.copy_from_slice(x), &b, 1e-12, 10).unwrap();
        assert_eq!(rep.iterations, 1);
        for (a, c) in x.iter().zip(&b) {
            assert!((a - c).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let (x, rep) = cg_solve(laplacian_1d(8, 0.1), &[0.0; 8], 1e-10, 50).unwrap();
        assert!(x.iter().all(|v| *v == 0.0));
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn discrete_laplacian_eigenvector() {
        // -D2 sin(pi x) = (2/h^2)(1 - cos(pi h)) sin(pi x) on interior nodes.
        let cells = 64;
        let h = 1.0 / cells as f64;
        let n = cells - 1;
        let b: Vec<f64> = (1..=n).map(|i| (PI * i as f64 * h).sin()).collect();
        let (x, _) = cg_solve(laplacian_1d(n, h), &b, 1e-13, 500).unwrap();
        let mu = 2.0 / (h * h) * (1.0 - (PI * h).cos());
        for (xi, bi) in x.iter().zip(&b) {
            assert!((xi - bi / mu).abs() < 1e-12);
            // and it approximates sin(pi x)/pi^2 to O(h^2)
            assert!((xi - bi / (PI * PI)).abs() < 1e-4);
        }
    }

    #[test]
    fn asymmetric_operator_is_rejected() {
        let apply = |x: &[f64], y: &mut [f64]| {
            y[0] = x[0] + 2.0 * x[1];
            y[1] = x[1];
        };
        match cg_solve(apply, &[1.0, 1.0], 1e-10, 10) {
            Err(Error::OperatorContract(_)) => {}
            other => panic!("expected operator-contract error, got {other:?}"),
        }
    }

    #[test]
    fn max_iter_exceeded_reports_history() {
        let err = cg_solve(laplacian_1d(100, 0.01), &vec![1.0; 100], 1e-14, 3).unwrap_err();
        match err {
            Error::LinearSolver { iterations, history, .. } => {
                assert_eq!(iterations, 3);
                assert_eq!(history.len(), 4);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn picard_constant_map() {
        let (x, rep) = picard_drive(|_| Ok(vec![3.0, -1.0]), vec![0.0, 0.0], 1e-12, 10).unwrap();
        assert_eq!(x, vec![3.0, -1.0]);
        // first sweep lands on the fixed point, the second confirms it
        assert!(rep.iterations <= 2);
        assert_eq!(rep.contraction, vec![0.0]);
    }

    #[test]
    fn picard_affine_contraction() {
        let (x, rep) =
            picard_drive(|x| Ok(vec![0.5 * x[0] + 1.0]), vec![0.0], 1e-12, 100).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-11);
        for q in &rep.contraction {
            assert!((q - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn picard_detects_expansion() {
        let err = picard_drive(|x| Ok(vec![2.0 * x[0]]), vec![1.0], 1e-12, 100).unwrap_err();
        assert!(matches!(err, Error::Contraction { .. }));
    }
}
