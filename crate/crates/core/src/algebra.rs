//! Periodic and quasi-periodic algebras with mean value, realized on their
//! spectrum kernel: a finite-dimensional torus `[0,1)^d` with normalized
//! Lebesgue (Haar) measure.
//!
//! A function `u(y) = û(ω·y mod 1)` on `ℝ^N` is represented by its torus
//! profile `û`, sampled on a power-of-two grid ([`TorusField`]). Mean values
//! become grid averages, derivatives become Fourier multipliers, and the
//! group law is coordinatewise addition mod 1.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::fft::{fft_nd, ifft_nd, is_nyquist, real_part, to_complex, wavenumber};
use crate::numerics::{fft_convolve, ConvMode, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgebraKind {
    Periodic,
    QuasiPeriodic,
}

/// Which algebra a coefficient lives in, through its frequency matrix.
///
/// `frequencies` holds `d` rows of length `N`; the Dirac trajectory of
/// `y ∈ ℝ^N` is `frac(ω·y)` on the `d`-torus. Rational independence of the
/// rows of a quasi-periodic spec is asserted by the caller, not checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AlgebraSpecRepr", into = "AlgebraSpecRepr")]
pub struct AlgebraSpec {
    kind: AlgebraKind,
    frequencies: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum AlgebraSpecRepr {
    Periodic { dims: usize },
    Quasiperiodic { frequencies: Vec<Vec<f64>> },
}

impl TryFrom<AlgebraSpecRepr> for AlgebraSpec {
    type Error = Error;
    fn try_from(r: AlgebraSpecRepr) -> Result<Self> {
        match r {
            AlgebraSpecRepr::Periodic { dims } => AlgebraSpec::periodic(dims),
            AlgebraSpecRepr::Quasiperiodic { frequencies } => AlgebraSpec::quasi_periodic(frequencies),
        }
    }
}

impl From<AlgebraSpec> for AlgebraSpecRepr {
    fn from(a: AlgebraSpec) -> Self {
        match a.kind {
            AlgebraKind::Periodic => AlgebraSpecRepr::Periodic {
                dims: a.space_dim(),
            },
            AlgebraKind::QuasiPeriodic => AlgebraSpecRepr::Quasiperiodic {
                frequencies: a.frequencies,
            },
        }
    }
}

impl AlgebraSpec {
    /// Unit-period algebra on `ℝ^dims`; the torus has the same dimension.
    pub fn periodic(dims: usize) -> Result<Self> {
        if dims == 0 {
            return Err(invalid("periodic algebra needs dims >= 1"));
        }
        let frequencies = (0..dims)
            .map(|i| (0..dims).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Ok(Self {
            kind: AlgebraKind::Periodic,
            frequencies,
        })
    }

    /// Quasi-periodic algebra with frequency rows `ω_k ∈ ℝ^N`.
    pub fn quasi_periodic(frequencies: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = frequencies.first() else {
            return Err(invalid("quasi-periodic algebra needs at least one frequency row"));
        };
        let n = first.len();
        if n == 0 || frequencies.iter().any(|r| r.len() != n) {
            return Err(invalid("frequency rows must share a nonzero length"));
        }
        if frequencies.iter().flatten().any(|w| !w.is_finite()) {
            return Err(Error::NumericDomain("non-finite frequency".into()));
        }
        if frequencies.iter().any(|r| r.iter().all(|w| *w == 0.0)) {
            return Err(invalid("zero frequency row"));
        }
        Ok(Self {
            kind: AlgebraKind::QuasiPeriodic,
            frequencies,
        })
    }

    pub fn kind(&self) -> AlgebraKind {
        self.kind
    }

    pub fn frequencies(&self) -> &[Vec<f64>] {
        &self.frequencies
    }

    /// Dimension `d` of the torus `K(Δ(A))`.
    pub fn torus_dim(&self) -> usize {
        self.frequencies.len()
    }

    /// Dimension `N` of the physical space.
    pub fn space_dim(&self) -> usize {
        self.frequencies[0].len()
    }

    /// Largest row norm of `ω`, i.e. the fastest oscillation per unit length.
    pub fn max_frequency(&self) -> f64 {
        self.frequencies
            .iter()
            .map(|r| r.iter().map(|w| w * w).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// Fractional part in `[0, 1)`, robust for negative inputs.
pub fn frac(x: f64) -> f64 {
    let f = x - x.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// Distance between two coordinates on the unit circle.
pub fn circle_dist(a: f64, b: f64) -> f64 {
    let d = frac(a - b);
    d.min(1.0 - d)
}

/// A point of the spectrum kernel, coordinates in `[0,1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    coords: Vec<f64>,
}

impl TorusPoint {
    /// Reduces every coordinate mod 1.
    pub fn new(coords: Vec<f64>) -> Self {
        Self {
            coords: coords.into_iter().map(frac).collect(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            coords: vec![0.0; dim],
        }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Max over coordinates of the circle distance.
    pub fn dist(&self, other: &TorusPoint) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| circle_dist(*a, *b))
            .fold(0.0, f64::max)
    }
}

/// Dirac trajectory `δ_y`: the torus point `frac(ω·y)`.
pub fn dirac_point(y: &[f64], spec: &AlgebraSpec) -> Result<TorusPoint> {
    if y.len() != spec.space_dim() {
        return Err(invalid(format!(
            "point has dimension {}, algebra lives on R^{}",
            y.len(),
            spec.space_dim()
        )));
    }
    Ok(TorusPoint {
        coords: spec
            .frequencies
            .iter()
            .map(|row| frac(row.iter().zip(y).map(|(w, x)| w * x).sum()))
            .collect(),
    })
}

/// Group law of the torus: `(s + r) mod 1`.
pub fn group_mul(s: &TorusPoint, r: &TorusPoint) -> Result<TorusPoint> {
    if s.dim() != r.dim() {
        return Err(invalid(format!(
            "torus dimensions differ: {} vs {}",
            s.dim(),
            r.dim()
        )));
    }
    Ok(TorusPoint {
        coords: s.coords.iter().zip(&r.coords).map(|(a, b)| frac(a + b)).collect(),
    })
}

pub fn group_inv(s: &TorusPoint) -> TorusPoint {
    TorusPoint {
        coords: s.coords.iter().map(|a| frac(-a)).collect(),
    }
}

/// Expanding-ball estimate of a mean value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub value: f64,
    pub radii: Vec<f64>,
    pub partial_averages: Vec<f64>,
    pub tol: f64,
    pub converged: bool,
}

/// Default averaging radii `R_j = 10·2^j`, `j = 0..=10`.
pub fn default_radii() -> Vec<f64> {
    (0..=10).map(|j| 10.0 * f64::from(1u32 << j)).collect()
}

/// Points per unit frequency used by the ball quadrature.
const SAMPLES_PER_PERIOD: f64 = 64.0;
/// Cap on quadrature nodes per ball.
const MAX_BALL_NODES: f64 = 1.0 * (1u64 << 26) as f64;

fn ball_average(f: &(dyn Fn(&[f64]) -> f64 + Sync), n_dim: usize, radius: f64, h0: f64) -> Result<f64> {
    let per_axis_cap = MAX_BALL_NODES.powf(1.0 / n_dim as f64);
    let cells = ((2.0 * radius / h0).ceil()).min(per_axis_cap).max(2.0) as usize;
    let h = 2.0 * radius / cells as f64;
    let total = cells.pow(n_dim as u32);
    let chunk = 1 << 14;
    let n_chunks = total.div_ceil(chunk);
    let partial: Vec<Result<(f64, usize)>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut y = vec![0.0; n_dim];
            let mut sum = 0.0;
            let mut count = 0usize;
            for flat in c * chunk..((c + 1) * chunk).min(total) {
                let mut rem = flat;
                let mut r2 = 0.0;
                for yk in y.iter_mut().rev() {
                    *yk = -radius + (rem % cells) as f64 * h + 0.5 * h;
                    rem /= cells;
                    r2 += *yk * *yk;
                }
                if n_dim > 1 && r2 > radius * radius {
                    continue;
                }
                let v = f(&y);
                if !v.is_finite() {
                    return Err(Error::NumericDomain(format!("f({y:?}) = {v}")));
                }
                sum += v;
                count += 1;
            }
            Ok((sum, count))
        })
        .collect();
    let mut sum = 0.0;
    let mut count = 0usize;
    for p in partial {
        let (s, c) = p?;
        sum += s;
        count += c;
    }
    Ok(sum / count as f64)
}

/// Mean value `M(f)` by averages over balls `B_{R_j}` (midpoint rule).
///
/// `value` is the last average; `converged` records whether the final two
/// averages differ by less than `tol`.
pub fn mean_value(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    spec: &AlgebraSpec,
    radii: &[f64],
    tol: f64,
) -> Result<MeanEstimate> {
    if radii.is_empty() {
        return Err(invalid("empty radius schedule"));
    }
    if radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("radii must be positive and strictly increasing"));
    }
    let h0 = 1.0 / (SAMPLES_PER_PERIOD * spec.max_frequency());
    let partial_averages = radii
        .iter()
        .map(|&r| ball_average(f, spec.space_dim(), r, h0))
        .collect::<Result<Vec<_>>>()?;
    let n = partial_averages.len();
    let converged = n >= 2 && (partial_averages[n - 1] - partial_averages[n - 2]).abs() < tol;
    Ok(MeanEstimate {
        value: partial_averages[n - 1],
        radii: radii.to_vec(),
        partial_averages,
        tol,
        converged,
    })
}

/// Besicovitch seminorm `M(|f|^p)^{1/p}` on the same radius schedule.
pub fn besicovitch_seminorm(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    spec: &AlgebraSpec,
    p: f64,
    radii: &[f64],
    tol: f64,
) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(invalid(format!("seminorm exponent {p} < 1")));
    }
    let g = |y: &[f64]| f(y).abs().powf(p);
    Ok(mean_value(&g, spec, radii, tol)?.value.max(0.0).powf(1.0 / p))
}

/// Samples of a torus profile on a power-of-two grid over `[0,1)^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusField {
    grid: Grid,
    values: Vec<f64>,
    spec: AlgebraSpec,
}

impl TorusField {
    pub fn new(spec: &AlgebraSpec, dims: &[usize], values: Vec<f64>) -> Result<Self> {
        if dims.len() != spec.torus_dim() {
            return Err(invalid(format!(
                "grid has {} axes, torus has dimension {}",
                dims.len(),
                spec.torus_dim()
            )));
        }
        let grid = Grid::torus(dims)?;
        if values.len() != grid.len() {
            return Err(invalid("sample count does not match grid"));
        }
        Ok(Self {
            grid,
            values,
            spec: spec.clone(),
        })
    }

    /// Samples `f(s)` at the grid nodes `s_k = i_k / n_k`.
    pub fn from_fn(spec: &AlgebraSpec, dims: &[usize], f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let grid = Grid::torus(dims)?;
        let mut idx = vec![0; dims.len()];
        let mut s = vec![0.0; dims.len()];
        let values = (0..grid.len())
            .map(|flat| {
                grid.unravel(flat, &mut idx);
                for k in 0..dims.len() {
                    s[k] = idx[k] as f64 / dims[k] as f64;
                }
                f(&s)
            })
            .collect();
        Self::new(spec, dims, values)
    }

    pub fn constant(spec: &AlgebraSpec, dims: &[usize], c: f64) -> Result<Self> {
        let n = dims.iter().product();
        Self::new(spec, dims, vec![c; n])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dims(&self) -> &[usize] {
        self.grid.dims()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spec(&self) -> &AlgebraSpec {
        &self.spec
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            grid: self.grid.clone(),
            values,
            spec: self.spec.clone(),
        }
    }

    /// Haar integral: the plain grid average.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// `(mean |u|^p)^{1/p}`.
    pub fn norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.sup_norm();
        }
        let m = self.values.iter().map(|v| v.abs().powf(p)).sum::<f64>() / self.values.len() as f64;
        m.powf(1.0 / p)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn check_same_grid(&self, other: &TorusField) -> Result<()> {
        if !self.grid.same_shape(&other.grid) {
            return Err(invalid(format!(
                "torus grids differ: {:?} vs {:?}",
                self.dims(),
                other.dims()
            )));
        }
        Ok(())
    }

    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut z = to_complex(&self.values);
        fft_nd(&mut z, self.dims());
        z
    }

    fn from_spectrum(&self, mut z: Vec<Complex64>) -> Self {
        ifft_nd(&mut z, self.dims());
        self.with_values(real_part(&z))
    }

    /// Translation `(τ_a u)(s) = u(s + a)` by Fourier phase shift.
    pub fn translate(&self, a: &TorusPoint) -> Result<Self> {
        if a.dim() != self.dims().len() {
            return Err(invalid("translation dimension mismatch"));
        }
        let dims = self.dims().to_vec();
        let mut z = self.spectrum();
        let mut idx = vec![0; dims.len()];
        for (flat, c) in z.iter_mut().enumerate() {
            self.grid.unravel(flat, &mut idx);
            let phase: f64 = (0..dims.len())
                .map(|k| 2.0 * PI * wavenumber(idx[k], dims[k]) * a.coords()[k])
                .sum();
            *c *= Complex64::from_polar(1.0, phase);
        }
        Ok(self.from_spectrum(z))
    }

    /// Product computed on a 3/2-padded grid and truncated back, so that
    /// no aliased modes fold into the result.
    pub fn dealiased_product(&self, other: &TorusField) -> Result<Self> {
        self.check_same_grid(other)?;
        let dims = self.dims().to_vec();
        let pad: Vec<usize> = dims.iter().map(|n| 3 * n / 2).collect();
        let up_u = pad_spectrum(&self.spectrum(), &dims, &pad);
        let up_v = pad_spectrum(&other.spectrum(), &dims, &pad);
        let mut pu = up_u;
        let mut pv = up_v;
        ifft_nd(&mut pu, &pad);
        ifft_nd(&mut pv, &pad);
        let mut prod: Vec<Complex64> = pu
            .iter()
            .zip(&pv)
            .map(|(a, b)| Complex64::new(a.re * b.re, 0.0))
            .collect();
        fft_nd(&mut prod, &pad);
        let down = truncate_spectrum(&prod, &pad, &dims);
        Ok(self.from_spectrum(down))
    }

    pub fn add(&self, other: &TorusField) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(self.with_values(self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect()))
    }

    /// CSV export: `# torus d=<d> n=<n1,...>` then one value per line.
    pub fn to_csv(&self) -> String {
        let dims: Vec<String> = self.dims().iter().map(|n| n.to_string()).collect();
        let mut out = format!("# torus d={} n={}\n", self.dims().len(), dims.join(","));
        for v in &self.values {
            let _ = writeln!(out, "{}", crate::io::fmt_f64(*v));
        }
        out
    }

    pub fn from_csv(spec: &AlgebraSpec, text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| invalid("empty torus CSV"))?;
        let rest = header
            .strip_prefix("# torus d=")
            .ok_or_else(|| invalid("missing torus CSV header"))?;
        let (d, n) = rest
            .split_once(" n=")
            .ok_or_else(|| invalid("malformed torus CSV header"))?;
        let d: usize = d.trim().parse().map_err(|_| invalid("bad torus dimension"))?;
        let dims = n
            .trim()
            .split(',')
            .map(|s| s.parse::<usize>().map_err(|_| invalid("bad axis size")))
            .collect::<Result<Vec<_>>>()?;
        if dims.len() != d {
            return Err(invalid("header dimension disagrees with axis list"));
        }
        let values = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.trim().parse::<f64>().map_err(|_| invalid(format!("bad value '{l}'"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(spec, &dims, values)
    }
}

fn pad_spectrum(z: &[Complex64], dims: &[usize], pad: &[usize]) -> Vec<Complex64> {
    let total: usize = pad.iter().product();
    let mut out = vec![Complex64::new(0.0, 0.0); total];
    let src = Grid::torus(dims).expect("power-of-two dims");
    let dst_strides = crate::numerics::grid::strides(pad);
    let mut idx = vec![0; dims.len()];
    let scale = total as f64 / z.len() as f64;
    'outer: for (flat, c) in z.iter().enumerate() {
        src.unravel(flat, &mut idx);
        let mut w = 0;
        for k in 0..dims.len() {
            if is_nyquist(idx[k], dims[k]) {
                continue 'outer;
            }
            let m = wavenumber(idx[k], dims[k]) as i64;
            let j = m.rem_euclid(pad[k] as i64) as usize;
            w += j * dst_strides[k];
        }
        out[w] = *c * scale;
    }
    out
}

fn truncate_spectrum(z: &[Complex64], pad: &[usize], dims: &[usize]) -> Vec<Complex64> {
    let total: usize = dims.iter().product();
    let mut out = vec![Complex64::new(0.0, 0.0); total];
    let dst = Grid::torus(dims).expect("power-of-two dims");
    let pad_strides = crate::numerics::grid::strides(pad);
    let mut idx = vec![0; dims.len()];
    let scale = total as f64 / z.len() as f64;
    'outer: for (flat, c) in out.iter_mut().enumerate() {
        dst.unravel(flat, &mut idx);
        let mut w = 0;
        for k in 0..dims.len() {
            if is_nyquist(idx[k], dims[k]) {
                continue 'outer;
            }
            let m = wavenumber(idx[k], dims[k]) as i64;
            w += (m.rem_euclid(pad[k] as i64) as usize) * pad_strides[k];
        }
        *c = z[w] * scale;
    }
    out
}

/// Convolution on the spectrum kernel: `∫ u(r) v(s - r) dβ(r)` with `β`
/// of total mass one.
pub fn spectrum_convolve(u: &TorusField, v: &TorusField) -> Result<TorusField> {
    u.check_same_grid(v)?;
    let values = fft_convolve(u.values(), v.values(), u.grid(), ConvMode::Circular)?;
    Ok(u.with_values(values))
}

/// Derivative along physical axis `axis` of the lifted function
/// `y ↦ û(ω·y)`: the Fourier multiplier `2πi Σ_k ω_{k,axis} m_k`.
/// Nyquist modes are zeroed.
pub fn spectral_derivative(u: &TorusField, axis: usize) -> Result<TorusField> {
    let spec = u.spec();
    if axis >= spec.space_dim() {
        return Err(invalid(format!(
            "axis {axis} out of range for R^{}",
            spec.space_dim()
        )));
    }
    let dims = u.dims().to_vec();
    let omega: Vec<f64> = spec.frequencies().iter().map(|row| row[axis]).collect();
    let mut z = u.spectrum();
    let mut idx = vec![0; dims.len()];
    for (flat, c) in z.iter_mut().enumerate() {
        u.grid.unravel(flat, &mut idx);
        let mut symbol = 0.0;
        for k in 0..dims.len() {
            if omega[k] != 0.0 && !is_nyquist(idx[k], dims[k]) {
                symbol += omega[k] * wavenumber(idx[k], dims[k]);
            }
        }
        // zero the whole mode if it sits on a Nyquist line of an active axis
        let on_nyquist = (0..dims.len()).any(|k| omega[k] != 0.0 && is_nyquist(idx[k], dims[k]));
        *c = if on_nyquist {
            Complex64::new(0.0, 0.0)
        } else {
            *c * Complex64::new(0.0, 2.0 * PI * symbol)
        };
    }
    Ok(u.from_spectrum(z))
}

/// Spectral gradient over all physical axes.
pub fn spectral_gradient(u: &TorusField) -> Result<Vec<TorusField>> {
    (0..u.spec().space_dim()).map(|i| spectral_derivative(u, i)).collect()
}

/// Spectral divergence of a vector field given by its physical components.
pub fn spectral_divergence(components: &[TorusField]) -> Result<TorusField> {
    let first = components.first().ok_or_else(|| invalid("empty vector field"))?;
    if components.len() != first.spec().space_dim() {
        return Err(invalid("divergence needs one component per physical axis"));
    }
    let mut acc = spectral_derivative(first, 0)?;
    for (i, c) in components.iter().enumerate().skip(1) {
        acc = acc.add(&spectral_derivative(c, i)?)?;
    }
    Ok(acc)
}

/// True iff every derivative of `u` has sup norm below `tol`, i.e. `u`
/// lies in the invariant subspace.
pub fn is_invariant(u: &TorusField, tol: f64) -> Result<bool> {
    for i in 0..u.spec().space_dim() {
        if spectral_derivative(u, i)?.sup_norm() >= tol {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p1() -> AlgebraSpec {
        AlgebraSpec::periodic(1).unwrap()
    }

    #[test]
    fn mean_of_constant() {
        let est = mean_value(&|_| 2.5, &p1(), &[10.0, 20.0], 1e-12).unwrap();
        assert!((est.value - 2.5).abs() < 1e-12);
        assert!(est.converged);
    }

    #[test]
    fn mean_of_sin_squared() {
        let f = |y: &[f64]| (2.0 * PI * y[0]).sin().powi(2);
        let est = mean_value(&f, &p1(), &default_radii()[..7], 1e-3).unwrap();
        assert!((est.value - 0.5).abs() < 1e-3);
        assert!(est.converged);
        assert_eq!(est.partial_averages.len(), 7);
    }

    #[test]
    fn mean_rejects_bad_radii_and_nan() {
        assert!(mean_value(&|_| 1.0, &p1(), &[10.0, 5.0], 1e-3).is_err());
        assert!(mean_value(&|_| 1.0, &p1(), &[], 1e-3).is_err());
        let err = mean_value(&|_| f64::NAN, &p1(), &[1.0], 1e-3).unwrap_err();
        assert!(matches!(err, Error::NumericDomain(_)));
    }

    #[test]
    fn mean_in_two_dimensions() {
        let spec = AlgebraSpec::periodic(2).unwrap();
        let f = |y: &[f64]| 1.0 + (2.0 * PI * y[0]).cos() * (2.0 * PI * y[1]).cos();
        let est = mean_value(&f, &spec, &[20.0, 40.0], 1e-2).unwrap();
        assert!((est.value - 1.0).abs() < 1e-2, "{}", est.value);
    }

    #[test]
    fn seminorms() {
        let radii = [10.0, 20.0, 40.0];
        assert!((besicovitch_seminorm(&|_| 1.0, &p1(), 2.0, &radii, 1e-6).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(besicovitch_seminorm(&|_| 0.0, &p1(), 3.0, &radii, 1e-6).unwrap(), 0.0);
        let s = |y: &[f64]| (2.0 * PI * y[0]).sin();
        let v = besicovitch_seminorm(&s, &p1(), 2.0, &radii, 1e-6).unwrap();
        assert!((v - 0.5f64.sqrt()).abs() < 1e-3);
        assert!(besicovitch_seminorm(&s, &p1(), 0.5, &radii, 1e-6).is_err());
    }

    #[test]
    fn dirac_points() {
        assert_eq!(dirac_point(&[2.5], &p1()).unwrap().coords(), &[0.5]);
        assert_eq!(dirac_point(&[0.0], &p1()).unwrap().coords(), &[0.0]);
        assert_eq!(dirac_point(&[-0.25], &p1()).unwrap().coords(), &[0.75]);
        let q = AlgebraSpec::quasi_periodic(vec![vec![1.0], vec![2f64.sqrt()]]).unwrap();
        let p = dirac_point(&[1.0], &q).unwrap();
        assert_eq!(p.coords()[0], 0.0);
        assert!((p.coords()[1] - 0.414_213_562_373_095_1).abs() < 1e-15);
        assert!(dirac_point(&[1.0, 2.0], &p1()).is_err());
    }

    #[test]
    fn frac_of_tiny_negative_stays_below_one() {
        let f = frac(-1e-18);
        assert!((0.0..1.0).contains(&f));
    }

    #[test]
    fn group_law() {
        let a = TorusPoint::new(vec![0.3]);
        let b = TorusPoint::new(vec![0.9]);
        assert!((group_mul(&a, &b).unwrap().coords()[0] - 0.2).abs() < 1e-15);
        assert_eq!(group_inv(&TorusPoint::new(vec![0.25])).coords(), &[0.75]);
        let s = TorusPoint::new(vec![0.123, 0.875]);
        assert_eq!(group_mul(&s, &TorusPoint::identity(2)).unwrap(), s);
        let e = group_mul(&s, &group_inv(&s)).unwrap();
        assert!(e.dist(&TorusPoint::identity(2)) < 1e-15);
        assert!(group_mul(&a, &s).is_err());
    }

    #[test]
    fn convolution_examples() {
        let spec = p1();
        let one = TorusField::constant(&spec, &[32], 1.0).unwrap();
        let c = spectrum_convolve(&one, &one).unwrap();
        assert!(c.values().iter().all(|v| (v - 1.0).abs() < 1e-14));
        let u = TorusField::from_fn(&spec, &[32], |s| s[0] * s[0]).unwrap();
        let z = TorusField::constant(&spec, &[32], 0.0).unwrap();
        assert!(spectrum_convolve(&u, &z).unwrap().values().iter().all(|v| *v == 0.0));
        let other = TorusField::constant(&spec, &[16], 1.0).unwrap();
        assert!(spectrum_convolve(&u, &other).is_err());
    }

    #[test]
    fn derivative_examples() {
        let spec = p1();
        let c = TorusField::constant(&spec, &[16], 3.0).unwrap();
        assert!(spectral_derivative(&c, 0).unwrap().sup_norm() < 1e-14);
        let s = TorusField::from_fn(&spec, &[16], |s| (2.0 * PI * s[0]).sin()).unwrap();
        let ds = spectral_derivative(&s, 0).unwrap();
        let want = TorusField::from_fn(&spec, &[16], |s| 2.0 * PI * (2.0 * PI * s[0]).cos()).unwrap();
        for (a, b) in ds.values().iter().zip(want.values()) {
            assert!((a - b).abs() < 1e-13);
        }
        assert!(spectral_derivative(&s, 1).is_err());
    }

    #[test]
    fn quasi_periodic_derivative_uses_frequencies() {
        // u(y) = sin(2π ω₂ y) with ω₂ = √2 lifts to sin(2π s₂).
        let w = 2f64.sqrt();
        let spec = AlgebraSpec::quasi_periodic(vec![vec![1.0], vec![w]]).unwrap();
        let u = TorusField::from_fn(&spec, &[8, 8], |s| (2.0 * PI * s[1]).sin()).unwrap();
        let du = spectral_derivative(&u, 0).unwrap();
        let want = TorusField::from_fn(&spec, &[8, 8], |s| 2.0 * PI * w * (2.0 * PI * s[1]).cos()).unwrap();
        for (a, b) in du.values().iter().zip(want.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn invariance_examples() {
        let spec = p1();
        assert!(is_invariant(&TorusField::constant(&spec, &[8], 3.0).unwrap(), 1e-10).unwrap());
        let s = TorusField::from_fn(&spec, &[8], |s| (2.0 * PI * s[0]).sin()).unwrap();
        assert!(!is_invariant(&s, 1e-10).unwrap());
        let spec2 = AlgebraSpec::periodic(2).unwrap();
        let s2 = TorusField::from_fn(&spec2, &[8, 8], |s| (2.0 * PI * s[0]).sin()).unwrap();
        assert!(spectral_derivative(&s2, 1).unwrap().sup_norm() < 1e-12);
        assert!(!is_invariant(&s2, 1e-10).unwrap());
    }

    #[test]
    fn translate_by_quarter_turns_sin_into_cos() {
        let spec = p1();
        let s = TorusField::from_fn(&spec, &[16], |s| (2.0 * PI * s[0]).sin()).unwrap();
        let t = s.translate(&TorusPoint::new(vec![0.25])).unwrap();
        for (i, v) in t.values().iter().enumerate() {
            assert!((v - (2.0 * PI * i as f64 / 16.0).cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn csv_round_trip() {
        let spec = AlgebraSpec::periodic(2).unwrap();
        let u = TorusField::from_fn(&spec, &[4, 8], |s| (s[0] - 0.3).exp() * s[1]).unwrap();
        let text = u.to_csv();
        assert!(text.starts_with("# torus d=2 n=4,8\n"));
        assert_eq!(TorusField::from_csv(&spec, &text).unwrap(), u);
    }

    #[test]
    fn spec_json_forms() {
        let p: AlgebraSpec = serde_json::from_str(r#"{"kind":"periodic","dims":2}"#).unwrap();
        assert_eq!(p.torus_dim(), 2);
        let q: AlgebraSpec =
            serde_json::from_str(r#"{"kind":"quasiperiodic","frequencies":[[1.0],[1.5]]}"#).unwrap();
        assert_eq!(q.kind(), AlgebraKind::QuasiPeriodic);
        assert_eq!(q.torus_dim(), 2);
        assert_eq!(q.space_dim(), 1);
        assert!(serde_json::from_str::<AlgebraSpec>(r#"{"kind":"periodic","dims":0}"#).is_err());
        let back = serde_json::to_string(&p).unwrap();
        assert_eq!(back, r#"{"kind":"periodic","dims":2}"#);
    }
}
