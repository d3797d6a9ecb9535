//! Multi-dimensional FFTs on power-of-two grids and the convolutions built
//! on them.
//!
//! Forward transforms are unnormalized; [`ifft_nd`] divides by the total
//! number of samples, so `ifft_nd(fft_nd(u)) == u`.

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::grid::{require_pow2, strides, Grid};
use crate::error::{invalid, Result};

fn transform_axis(data: &mut [Complex64], dims: &[usize], axis: usize, inverse: bool) {
    let n = dims[axis];
    let st = strides(dims);
    let stride = st[axis];
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    let total: usize = dims.iter().product();
    let block = n * stride;
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for outer in (0..total).step_by(block) {
        for inner in 0..stride {
            let base = outer + inner;
            for (k, slot) in line.iter_mut().enumerate() {
                *slot = data[base + k * stride];
            }
            fft.process_with_scratch(&mut line, &mut scratch);
            for (k, v) in line.iter().enumerate() {
                data[base + k * stride] = *v;
            }
        }
    }
}

/// In-place forward transform over every axis.
pub fn fft_nd(data: &mut [Complex64], dims: &[usize]) {
    for axis in 0..dims.len() {
        transform_axis(data, dims, axis, false);
    }
}

/// In-place normalized inverse transform over every axis.
pub fn ifft_nd(data: &mut [Complex64], dims: &[usize]) {
    for axis in 0..dims.len() {
        transform_axis(data, dims, axis, true);
    }
    let scale = 1.0 / data.len() as f64;
    data.iter_mut().for_each(|v| *v *= scale);
}

pub fn to_complex(u: &[f64]) -> Vec<Complex64> {
    u.iter().map(|&x| Complex64::new(x, 0.0)).collect()
}

pub fn real_part(u: &[Complex64]) -> Vec<f64> {
    u.iter().map(|z| z.re).collect()
}

/// Signed integer wavenumber of FFT bin `k` on an axis with `n` points.
///
/// The Nyquist bin `n/2` is reported as `n/2`; callers that need an odd
/// symbol should zero it via [`is_nyquist`].
pub fn wavenumber(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

pub fn is_nyquist(k: usize, n: usize) -> bool {
    n % 2 == 0 && k == n / 2
}

/// How an axis participates in a convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisMode {
    /// Group convolution on the circle, normalized to unit total mass
    /// (an average, not a sum).
    Circular,
    /// Linear convolution on a bounded box, zero-padded, weighted by the
    /// grid spacing. The second operand is read as a kernel sampled at
    /// offsets `(k - n/2)·h`.
    Linear,
}

/// Convolution mode applied to every axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvMode {
    Circular,
    ZeroPadded,
}

/// Convolve two fields on the same power-of-two grid.
///
/// `Circular` realizes the torus convolution `∫ u(r) v(s - r) dr` with the
/// normalized measure. `ZeroPadded` realizes `∫ u(t) v(x - t) dt` over a
/// truncated box with `v` read as a centered kernel.
pub fn fft_convolve(u: &[f64], v: &[f64], grid: &Grid, mode: ConvMode) -> Result<Vec<f64>> {
    let axis_mode = match mode {
        ConvMode::Circular => AxisMode::Circular,
        ConvMode::ZeroPadded => AxisMode::Linear,
    };
    let modes = vec![axis_mode; grid.ndim()];
    convolve_axes(u, v, grid.dims(), grid.spacings(), &modes)
}

/// Mixed-mode convolution: each axis is circular or linear independently.
/// Both operands share `dims`; on linear axes `v` is a kernel centered at
/// index `n/2`.
pub fn convolve_axes(
    u: &[f64],
    v: &[f64],
    dims: &[usize],
    spacings: &[f64],
    modes: &[AxisMode],
) -> Result<Vec<f64>> {
    let centers: Vec<usize> = dims.iter().map(|n| n / 2).collect();
    convolve_kernel(u, dims, v, dims, &centers, spacings, modes)
}

/// Convolution of a field `u` (shape `u_dims`) with a kernel `v` (shape
/// `v_dims`) whose sample `centers[k]` sits at offset zero on linear axes.
/// The result has the shape of `u`. Circular axes must agree in size.
///
/// Output node `i` of a linear axis receives `h Σ_j u_j v(i - j + center)`.
pub fn convolve_kernel(
    u: &[f64],
    u_dims: &[usize],
    v: &[f64],
    v_dims: &[usize],
    centers: &[usize],
    spacings: &[f64],
    modes: &[AxisMode],
) -> Result<Vec<f64>> {
    let d = u_dims.len();
    let u_total: usize = u_dims.iter().product();
    let v_total: usize = v_dims.iter().product();
    if u.len() != u_total || v.len() != v_total {
        return Err(invalid(format!(
            "convolution operands have {} and {} samples, grids have {u_total} and {v_total}",
            u.len(),
            v.len()
        )));
    }
    if v_dims.len() != d || modes.len() != d || spacings.len() != d || centers.len() != d {
        return Err(invalid("axis description length mismatch"));
    }
    for k in 0..d {
        require_pow2(u_dims[k])?;
        require_pow2(v_dims[k])?;
        if modes[k] == AxisMode::Circular && u_dims[k] != v_dims[k] {
            return Err(invalid(format!(
                "circular axis {k} sizes differ: {} vs {}",
                u_dims[k], v_dims[k]
            )));
        }
    }

    // Work grid: linear axes are padded past u_n + v_n to avoid wrap-around.
    let work: Vec<usize> = (0..d)
        .map(|k| match modes[k] {
            AxisMode::Circular => u_dims[k],
            AxisMode::Linear => (u_dims[k] + v_dims[k]).next_power_of_two(),
        })
        .collect();
    let work_total: usize = work.iter().product();
    let work_strides = strides(&work);

    let embed = |f: &[f64], dims: &[usize]| {
        let st = strides(dims);
        let mut buf = vec![Complex64::new(0.0, 0.0); work_total];
        for (flat, &val) in f.iter().enumerate() {
            let mut rem = flat;
            let mut w = 0;
            for k in 0..d {
                w += (rem / st[k]) * work_strides[k];
                rem %= st[k];
            }
            buf[w] = Complex64::new(val, 0.0);
        }
        buf
    };

    let mut fu = embed(u, u_dims);
    let mut fv = embed(v, v_dims);
    fft_nd(&mut fu, &work);
    fft_nd(&mut fv, &work);
    fu.iter_mut().zip(&fv).for_each(|(a, b)| *a *= b);
    ifft_nd(&mut fu, &work);

    let weight: f64 = (0..d)
        .map(|k| match modes[k] {
            AxisMode::Circular => 1.0 / u_dims[k] as f64,
            AxisMode::Linear => spacings[k],
        })
        .product();

    let u_strides = strides(u_dims);
    let mut out = vec![0.0; u_total];
    for (flat, slot) in out.iter_mut().enumerate() {
        let mut rem = flat;
        let mut w = 0;
        for k in 0..d {
            let i = rem / u_strides[k];
            rem %= u_strides[k];
            let shifted = match modes[k] {
                AxisMode::Circular => i,
                AxisMode::Linear => i + centers[k],
            };
            w += shifted * work_strides[k];
        }
        *slot = fu[w].re * weight;
    }
    Ok(out)
}
