//! Named parametric families used by configurations.
//!
//! Every family is written as `{"name": "...", "params": {...}}` in JSON.
//! Oscillating arguments are torus coordinates `s` (the image of `x/ε`
//! under the Dirac trajectory), so one definition serves the fine and the
//! homogenized problems.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::sigma::cubic_bspline;

fn sin_mode(s: &[f64], axis: usize) -> f64 {
    s.get(axis).map_or(0.0, |v| (2.0 * PI * v).sin())
}

fn cos_mode(s: &[f64], axis: usize) -> f64 {
    s.get(axis).map_or(0.0, |v| (2.0 * PI * v).cos())
}

/// Connectivity kernel `K(x, s)` for the neural field, compactly supported
/// in `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "kebab-case")]
pub enum Kernel {
    Zero,
    /// `mass·(1 + modulation·cos 2πs₁)·Π B(x_i/width)/width` with the unit
    /// mass cubic B-spline `B`.
    Bspline {
        mass: f64,
        width: f64,
        #[serde(default)]
        modulation: f64,
    },
    /// Normalized Gaussian of standard deviation `width`, cut at `8·width`.
    Gaussian {
        mass: f64,
        width: f64,
        #[serde(default)]
        modulation: f64,
    },
}

impl Kernel {
    pub fn eval(&self, x: &[f64], s: &[f64]) -> f64 {
        match *self {
            Kernel::Zero => 0.0,
            Kernel::Bspline { mass, width, modulation } => {
                let shape: f64 = x.iter().map(|xi| cubic_bspline(xi / width) / width).product();
                mass * (1.0 + modulation * cos_mode(s, 0)) * shape
            }
            Kernel::Gaussian { mass, width, modulation } => {
                if x.iter().any(|xi| xi.abs() > 8.0 * width) {
                    return 0.0;
                }
                let norm = (2.0 * PI).sqrt() * width;
                let shape: f64 = x.iter().map(|xi| (-xi * xi / (2.0 * width * width)).exp() / norm).product();
                mass * (1.0 + modulation * cos_mode(s, 0)) * shape
            }
        }
    }

    /// Radius (sup norm) outside which the kernel vanishes.
    pub fn support_radius(&self) -> f64 {
        match *self {
            Kernel::Zero => 0.0,
            Kernel::Bspline { width, .. } => 2.0 * width,
            Kernel::Gaussian { width, .. } => 8.0 * width,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Kernel::Zero) || matches!(*self, Kernel::Bspline { mass, .. } | Kernel::Gaussian { mass, .. } if mass == 0.0)
    }

    pub fn validate_params(&self) -> Result<(), String> {
        match *self {
            Kernel::Zero => Ok(()),
            Kernel::Bspline { width, mass, .. } | Kernel::Gaussian { width, mass, .. } => {
                if !(width > 0.0) || !mass.is_finite() {
                    Err("kernel width must be positive and mass finite".into())
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Firing rate `f(s, λ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "kebab-case")]
pub enum Firing {
    Zero,
    /// `g₀(s) + g₁(s)·λ` with `g₀ = offset·(1 + offset_mod·sin 2πks₁)` and
    /// `g₁ = gain·(1 + gain_mod·sin 2πks₁)`, `k = mode`.
    Affine {
        #[serde(default)]
        offset: f64,
        #[serde(default)]
        offset_mod: f64,
        gain: f64,
        #[serde(default)]
        gain_mod: f64,
        #[serde(default = "one")]
        mode: f64,
    },
    /// `gain·(1 + modulation·sin 2πs₁) / (1 + exp(-slope·(λ - threshold)))`.
    Sigmoid {
        gain: f64,
        slope: f64,
        threshold: f64,
        #[serde(default)]
        modulation: f64,
    },
}

impl Firing {
    pub fn eval(&self, s: &[f64], lambda: f64) -> f64 {
        match *self {
            Firing::Zero => 0.0,
            Firing::Affine { offset, offset_mod, gain, gain_mod, mode } => {
                let m = s.first().map_or(0.0, |v| (2.0 * PI * mode * v).sin());
                offset * (1.0 + offset_mod * m) + gain * (1.0 + gain_mod * m) * lambda
            }
            Firing::Sigmoid { gain, slope, threshold, modulation } => {
                gain * (1.0 + modulation * sin_mode(s, 0)) / (1.0 + (-slope * (lambda - threshold)).exp())
            }
        }
    }

    /// Analytic Lipschitz constant in `λ`.
    pub fn lipschitz_bound(&self) -> f64 {
        match *self {
            Firing::Zero => 0.0,
            Firing::Affine { gain, gain_mod, .. } => gain.abs() * (1.0 + gain_mod.abs()),
            Firing::Sigmoid { gain, slope, modulation, .. } => gain.abs() * (1.0 + modulation.abs()) * slope.abs() / 4.0,
        }
    }

    /// `sup_s |f(s, 0)|`.
    pub fn rest_level(&self) -> f64 {
        match *self {
            Firing::Zero => 0.0,
            Firing::Affine { offset, offset_mod, .. } => offset.abs() * (1.0 + offset_mod.abs()),
            Firing::Sigmoid { gain, slope, threshold, modulation } => {
                gain.abs() * (1.0 + modulation.abs()) / (1.0 + (slope * threshold).exp())
            }
        }
    }

    pub fn is_affine(&self) -> bool {
        matches!(self, Firing::Zero | Firing::Affine { .. })
    }
}

/// Scalar functions of the macroscopic variable: initial data and sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "kebab-case")]
pub enum Profile {
    Zero,
    Constant {
        value: f64,
    },
    /// `amp·exp(-|x - center|²/(2 width²))`.
    Gaussian {
        amp: f64,
        width: f64,
        #[serde(default)]
        center: Vec<f64>,
    },
    /// `amp·Π B((x_i - center_i)/width)` with the cubic B-spline `B`.
    Bump {
        amp: f64,
        width: f64,
        #[serde(default)]
        center: Vec<f64>,
    },
    /// `amp·Π sin(mode·π·x_i)`.
    SinPi {
        amp: f64,
        #[serde(default = "one")]
        mode: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Profile {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let c = |center: &[f64], i: usize| center.get(i).copied().unwrap_or(0.0);
        match self {
            Profile::Zero => 0.0,
            Profile::Constant { value } => *value,
            Profile::Gaussian { amp, width, center } => {
                let r2: f64 = x.iter().enumerate().map(|(i, xi)| (xi - c(center, i)).powi(2)).sum();
                amp * (-r2 / (2.0 * width * width)).exp()
            }
            Profile::Bump { amp, width, center } => {
                amp * x
                    .iter()
                    .enumerate()
                    .map(|(i, xi)| cubic_bspline((xi - c(center, i)) / width))
                    .product::<f64>()
            }
            Profile::SinPi { amp, mode } => amp * x.iter().map(|xi| (mode * PI * xi).sin()).product::<f64>(),
        }
    }

    /// Sup-norm radius around the origin containing the essential support
    /// (Gaussians are cut at eight widths); `None` when unbounded.
    pub fn support_radius(&self) -> Option<f64> {
        let off = |center: &[f64]| center.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        match self {
            Profile::Zero => Some(0.0),
            Profile::Constant { value } if *value == 0.0 => Some(0.0),
            Profile::Constant { .. } | Profile::SinPi { .. } => None,
            Profile::Gaussian { width, center, .. } => Some(off(center) + 8.0 * width),
            Profile::Bump { width, center, .. } => Some(off(center) + 2.0 * width),
        }
    }
}

/// Shared modulation `(base + amplitude·sin 2πs₁ + amplitude2·sin 2πs₂)·
/// (1 + tau_amplitude·cos 2πτ)` of the heat coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Modulation {
    pub base: f64,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default)]
    pub amplitude2: f64,
    #[serde(default)]
    pub tau_amplitude: f64,
}

impl Modulation {
    pub fn eval(&self, s: &[f64], tau: &[f64]) -> f64 {
        (self.base + self.amplitude * sin_mode(s, 0) + self.amplitude2 * sin_mode(s, 1))
            * (1.0 + self.tau_amplitude * cos_mode(tau, 0))
    }
}

/// Radial monotone flux `a(s, τ, λ) = c(s, τ)·φ(|λ|)·λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "kebab-case")]
pub enum Flux {
    /// `φ = 1`.
    Linear(Modulation),
    /// `φ = 1 + kappa/√(1 + |λ|²)`, `kappa ≥ 0`.
    Saturating {
        #[serde(flatten)]
        modulation: Modulation,
        kappa: f64,
    },
}

impl Flux {
    fn modulation(&self) -> &Modulation {
        match self {
            Flux::Linear(m) | Flux::Saturating { modulation: m, .. } => m,
        }
    }

    /// The scalar `c·φ(|λ|)`, so that `a = secant·λ`.
    pub fn secant(&self, s: &[f64], tau: &[f64], lambda: &[f64]) -> f64 {
        let c = self.modulation().eval(s, tau);
        match *self {
            Flux::Linear(_) => c,
            Flux::Saturating { kappa, .. } => {
                let r2: f64 = lambda.iter().map(|v| v * v).sum();
                c * (1.0 + kappa / (1.0 + r2).sqrt())
            }
        }
    }

    pub fn eval(&self, s: &[f64], tau: &[f64], lambda: &[f64], out: &mut [f64]) {
        let sec = self.secant(s, tau, lambda);
        for (o, l) in out.iter_mut().zip(lambda) {
            *o = sec * l;
        }
    }

    /// Jacobian `∂a/∂λ` applied to `w`.
    pub fn jacobian_apply(&self, s: &[f64], tau: &[f64], lambda: &[f64], w: &[f64], out: &mut [f64]) {
        let c = self.modulation().eval(s, tau);
        match *self {
            Flux::Linear(_) => {
                for (o, wi) in out.iter_mut().zip(w) {
                    *o = c * wi;
                }
            }
            Flux::Saturating { kappa, .. } => {
                let r2: f64 = lambda.iter().map(|v| v * v).sum();
                let q = 1.0 + r2;
                let lw: f64 = lambda.iter().zip(w).map(|(a, b)| a * b).sum();
                for ((o, wi), li) in out.iter_mut().zip(w).zip(lambda) {
                    *o = c * (wi * (1.0 + kappa / q.sqrt()) - kappa * li * lw / q.powf(1.5));
                }
            }
        }
    }

    /// Diagonal of the Jacobian.
    pub fn jacobian_diag(&self, s: &[f64], tau: &[f64], lambda: &[f64], out: &mut [f64]) {
        let c = self.modulation().eval(s, tau);
        match *self {
            Flux::Linear(_) => out.iter_mut().for_each(|o| *o = c),
            Flux::Saturating { kappa, .. } => {
                let r2: f64 = lambda.iter().map(|v| v * v).sum();
                let q = 1.0 + r2;
                for (o, li) in out.iter_mut().zip(lambda) {
                    *o = c * (1.0 + kappa / q.sqrt() - kappa * li * li / q.powf(1.5));
                }
            }
        }
    }
}

/// Zeroth-order term `a₀(s, τ, λ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "kebab-case")]
pub enum ZerothOrder {
    Zero,
    /// `c(s, τ)·Σ_i λ_i`.
    Linear(Modulation),
}

impl ZerothOrder {
    pub fn eval(&self, s: &[f64], tau: &[f64], lambda: &[f64]) -> f64 {
        match self {
            ZerothOrder::Zero => 0.0,
            ZerothOrder::Linear(m) => m.eval(s, tau) * lambda.iter().sum::<f64>(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ZerothOrder::Zero)
    }
}

/// Memory kernel `K(s, τ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "kebab-case")]
pub enum MemoryKernel {
    Zero,
    Modulated(Modulation),
}

impl MemoryKernel {
    pub fn eval(&self, s: &[f64], tau: &[f64]) -> f64 {
        match self {
            MemoryKernel::Zero => 0.0,
            MemoryKernel::Modulated(m) => m.eval(s, tau),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            MemoryKernel::Zero => true,
            MemoryKernel::Modulated(m) => m.base == 0.0 && m.amplitude == 0.0 && m.amplitude2 == 0.0,
        }
    }
}

/// Density `ρ(s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "kebab-case")]
pub enum Density {
    Constant { value: f64 },
    /// `base + amplitude·cos 2πs₁`.
    Cosine { base: f64, amplitude: f64 },
}

impl Density {
    pub fn eval(&self, s: &[f64]) -> f64 {
        match *self {
            Density::Constant { value } => value,
            Density::Cosine { base, amplitude } => base + amplitude * cos_mode(s, 0),
        }
    }

    /// Exact torus mean.
    pub fn mean(&self) -> f64 {
        match *self {
            Density::Constant { value } => value,
            Density::Cosine { base, .. } => base,
        }
    }
}

/// One term `coef·cos(2π m·s + phase)` of a torus trigonometric polynomial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub coef: f64,
    pub modes: Vec<i64>,
    #[serde(default)]
    pub phase: f64,
}

/// Functions on the torus used by mean-value experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "kebab-case")]
pub enum TorusFunction {
    /// `sin²(2π·mode·s₁)`.
    SinSquared {
        #[serde(default = "one_i64")]
        mode: i64,
    },
    Trig {
        terms: Vec<TrigTerm>,
    },
}

fn one_i64() -> i64 {
    1
}

impl TorusFunction {
    pub fn eval(&self, s: &[f64]) -> f64 {
        match self {
            TorusFunction::SinSquared { mode } => (2.0 * PI * *mode as f64 * s[0]).sin().powi(2),
            TorusFunction::Trig { terms } => terms
                .iter()
                .map(|t| {
                    let arg: f64 = t.modes.iter().zip(s).map(|(m, si)| *m as f64 * si).sum();
                    t.coef * (2.0 * PI * arg + t.phase).cos()
                })
                .sum(),
        }
    }

    /// Exact torus mean.
    pub fn exact_mean(&self) -> f64 {
        match self {
            TorusFunction::SinSquared { mode } => {
                if *mode == 0 {
                    0.0
                } else {
                    0.5
                }
            }
            TorusFunction::Trig { terms } => terms
                .iter()
                .filter(|t| t.modes.iter().all(|m| *m == 0))
                .map(|t| t.coef * t.phase.cos())
                .sum(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shapes() {
        let k: Kernel = serde_json::from_str(r#"{"name":"bspline","params":{"mass":0.5,"width":0.1}}"#).unwrap();
        assert_eq!(k, Kernel::Bspline { mass: 0.5, width: 0.1, modulation: 0.0 });
        let z: Kernel = serde_json::from_str(r#"{"name":"zero"}"#).unwrap();
        assert!(z.is_zero());
        let f: Flux =
            serde_json::from_str(r#"{"name":"saturating","params":{"base":2.0,"amplitude":1.0,"kappa":0.5}}"#).unwrap();
        let mut out = [0.0];
        f.eval(&[0.0], &[0.0], &[0.0], &mut out);
        assert_eq!(out[0], 0.0);
        let back: Flux = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
        assert_eq!(back, f);
        assert!(serde_json::from_str::<Kernel>(r#"{"name":"nope"}"#).is_err());
    }

    #[test]
    fn bspline_kernel_has_declared_mass() {
        let k = Kernel::Bspline { mass: 0.7, width: 0.1, modulation: 0.0 };
        let h = 1e-3;
        let total: f64 = (-300..=300).map(|i| k.eval(&[i as f64 * h], &[0.0]) * h).sum();
        assert!((total - 0.7).abs() < 1e-9);
    }

    #[test]
    fn saturating_jacobian_matches_differences() {
        let f = Flux::Saturating {
            modulation: Modulation { base: 2.0, amplitude: 1.0, amplitude2: 0.0, tau_amplitude: 0.3 },
            kappa: 0.8,
        };
        let (s, t) = ([0.2], [0.7]);
        let lam = [0.6, -1.1];
        let w = [0.3, 0.4];
        let mut jw = [0.0; 2];
        f.jacobian_apply(&s, &t, &lam, &w, &mut jw);
        let h = 1e-6;
        let (mut ap, mut am) = ([0.0; 2], [0.0; 2]);
        f.eval(&s, &t, &[lam[0] + h * w[0], lam[1] + h * w[1]], &mut ap);
        f.eval(&s, &t, &[lam[0] - h * w[0], lam[1] - h * w[1]], &mut am);
        for k in 0..2 {
            assert!(((ap[k] - am[k]) / (2.0 * h) - jw[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn trig_means() {
        assert_eq!(TorusFunction::SinSquared { mode: 1 }.exact_mean(), 0.5);
        let t = TorusFunction::Trig {
            terms: vec![
                TrigTerm { coef: 0.3, modes: vec![0], phase: 0.0 },
                TrigTerm { coef: 1.0, modes: vec![2], phase: 0.1 },
            ],
        };
        assert!((t.exact_mean() - 0.3).abs() < 1e-15);
    }
}
