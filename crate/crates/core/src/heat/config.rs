use serde::{Deserialize, Serialize};

use crate::algebra::AlgebraSpec;
use crate::error::{invalid, Error, Result};
use crate::numerics::low_discrepancy;
use crate::registry::{Density, Flux, MemoryKernel, Profile, ZerothOrder};

/// Structural constants of the coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatConstants {
    /// Lipschitz constant of `(a, a₀)` in `λ`.
    pub c0: f64,
    /// Monotonicity constant of `a`.
    pub c1: f64,
    /// Linear growth constant of `|a| + |a₀|`.
    pub c2: f64,
    /// Density bounds `Λ⁻¹ ≤ ρ ≤ Λ`.
    #[serde(rename = "Lambda")]
    pub lambda: f64,
}

fn periodic_tau() -> AlgebraSpec {
    AlgebraSpec::periodic(1).expect("one-dimensional periodic algebra")
}

fn zero_profile() -> Profile {
    Profile::Zero
}

/// Data of the nonlocal heat problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatConfig {
    /// Algebra of the space oscillations.
    pub algebra: AlgebraSpec,
    /// Algebra of the time oscillations.
    #[serde(default = "periodic_tau")]
    pub algebra_tau: AlgebraSpec,
    pub density: Density,
    pub flux: Flux,
    #[serde(default = "ZerothOrder::default_zero")]
    pub zeroth: ZerothOrder,
    #[serde(default = "MemoryKernel::default_zero")]
    pub memory: MemoryKernel,
    /// Physical time after which the memory kernel is cut off; the whole
    /// history is used when absent.
    #[serde(default)]
    pub memory_horizon: Option<f64>,
    #[serde(default = "zero_profile")]
    pub source: Profile,
    pub initial: Profile,
    pub horizon: f64,
    pub constants: HeatConstants,
}

impl ZerothOrder {
    fn default_zero() -> Self {
        ZerothOrder::Zero
    }
}

impl MemoryKernel {
    fn default_zero() -> Self {
        MemoryKernel::Zero
    }
}

fn assumption(name: &str, detail: String) -> Error {
    Error::Assumption {
        assumption: name.to_string(),
        detail,
    }
}

/// Range of `|λ|` probed by the sampled checks.
const PROBE_RADIUS: f64 = 4.0;

impl HeatConfig {
    pub fn dim(&self) -> usize {
        self.algebra.space_dim()
    }

    pub fn has_memory(&self) -> bool {
        !self.memory.is_zero() && !self.zeroth.is_zero()
    }

    /// Checks the structural assumptions on samples. The error names the
    /// violated assumption.
    pub fn validate(&self) -> Result<()> {
        let HeatConstants { c0, c1, c2, lambda } = self.constants;
        if !(c1 > 0.0) {
            return Err(assumption(
                "monotonicity",
                format!("the monotonicity constant c1 must be positive, got {c1}"),
            ));
        }
        if !(c0 > 0.0 && c2 > 0.0 && lambda >= 1.0) {
            return Err(invalid("constants c0, c2 must be positive and Lambda >= 1"));
        }
        if !(self.horizon > 0.0) {
            return Err(invalid("horizon must be positive"));
        }
        if self.algebra_tau.space_dim() != 1 {
            return Err(invalid("the time algebra must live on R"));
        }
        if self.memory_horizon.is_some_and(|h| !(h > 0.0)) {
            return Err(invalid("memory horizon must be positive"));
        }
        let n = self.dim();
        let ys = low_discrepancy(self.algebra.torus_dim(), 48);
        let taus = low_discrepancy(1, 8);
        let pairs = low_discrepancy(2 * n, 96);
        let to_lambda = |p: &[f64]| -> Vec<f64> { p.iter().map(|v| (2.0 * v - 1.0) * PROBE_RADIUS).collect() };
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        for y in &ys {
            let rho = self.density.eval(y);
            if !(rho >= 1.0 / lambda && rho <= lambda) {
                return Err(assumption(
                    "density bounds",
                    format!("rho({y:?}) = {rho} outside [1/Lambda, Lambda] = [{}, {lambda}]", 1.0 / lambda),
                ));
            }
            for tau in &taus {
                self.flux.eval(y, tau, &vec![0.0; n], &mut a);
                if a.iter().any(|v| *v != 0.0) {
                    return Err(assumption("flux vanishes at zero gradient", format!("a({y:?}, {tau:?}, 0) = {a:?}")));
                }
                for p in &pairs {
                    let (l1, l2) = (to_lambda(&p[..n]), to_lambda(&p[n..]));
                    self.flux.eval(y, tau, &l1, &mut a);
                    self.flux.eval(y, tau, &l2, &mut b);
                    let dl: Vec<f64> = l1.iter().zip(&l2).map(|(x, y)| x - y).collect();
                    let dl2: f64 = dl.iter().map(|v| v * v).sum();
                    let da: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
                    let mono: f64 = da.iter().zip(&dl).map(|(x, y)| x * y).sum();
                    if mono < c1 * dl2 * (1.0 - 1e-12) {
                        return Err(assumption(
                            "monotonicity",
                            format!("(a(l)-a(l'))(l-l') = {mono:.6e} < c1|l-l'|^2 = {:.6e}", c1 * dl2),
                        ));
                    }
                    let a0 = self.zeroth.eval(y, tau, &l1);
                    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    let l1n = norm(&l1);
                    if norm(&a) + a0.abs() > c2 * (1.0 + l1n) * (1.0 + 1e-12) {
                        return Err(assumption(
                            "growth bound",
                            format!("|a| + |a0| = {:.6e} > c2 (1 + |l|) = {:.6e}", norm(&a) + a0.abs(), c2 * (1.0 + l1n)),
                        ));
                    }
                    let da0 = (a0 - self.zeroth.eval(y, tau, &l2)).abs();
                    if norm(&da) + da0 > c0 * dl2.sqrt() * (1.0 + 1e-12) {
                        return Err(assumption(
                            "Lipschitz bound",
                            format!(
                                "|a(l)-a(l')| + |a0(l)-a0(l')| = {:.6e} > c0|l-l'| = {:.6e}",
                                norm(&da) + da0,
                                c0 * dl2.sqrt()
                            ),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// `sup |K|` over samples.
    pub fn memory_sup(&self) -> f64 {
        let ys = low_discrepancy(self.algebra.torus_dim(), 64);
        let taus = low_discrepancy(1, 64);
        ys.iter()
            .flat_map(|y| taus.iter().map(move |t| (y, t)))
            .map(|(y, t)| self.memory.eval(y, t).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::Modulation;

    pub(crate) fn harmonic() -> HeatConfig {
        HeatConfig {
            algebra: AlgebraSpec::periodic(1).unwrap(),
            algebra_tau: periodic_tau(),
            density: Density::Constant { value: 1.0 },
            flux: Flux::Linear(Modulation { base: 2.0, amplitude: 1.0, amplitude2: 0.0, tau_amplitude: 0.0 }),
            zeroth: ZerothOrder::Zero,
            memory: MemoryKernel::Zero,
            memory_horizon: None,
            source: Profile::Zero,
            initial: Profile::SinPi { amp: 1.0, mode: 1.0 },
            horizon: 0.1,
            constants: HeatConstants { c0: 3.0, c1: 1.0, c2: 3.0, lambda: 1.0 },
        }
    }

    #[test]
    fn accepts_harmonic_configuration() {
        harmonic().validate().unwrap();
    }

    #[test]
    fn rejects_nonpositive_monotonicity_constant() {
        let mut cfg = harmonic();
        cfg.constants.c1 = 0.0;
        match cfg.validate() {
            Err(Error::Assumption { assumption, .. }) => assert_eq!(assumption, "monotonicity"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_overstated_constants() {
        let mut cfg = harmonic();
        cfg.constants.c1 = 1.5;
        assert!(matches!(cfg.validate(), Err(Error::Assumption { ref assumption, .. }) if assumption == "monotonicity"));
        let mut cfg = harmonic();
        cfg.constants.c0 = 2.0;
        assert!(matches!(cfg.validate(), Err(Error::Assumption { ref assumption, .. }) if assumption == "Lipschitz bound"));
        let mut cfg = harmonic();
        cfg.density = Density::Cosine { base: 2.0, amplitude: 1.0 };
        assert!(matches!(cfg.validate(), Err(Error::Assumption { ref assumption, .. }) if assumption == "density bounds"));
        cfg.constants.lambda = 3.0;
        cfg.validate().unwrap();
    }

    #[test]
    fn json_round_trip() {
        let cfg = harmonic();
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"Lambda\""));
        let back: HeatConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }
}
