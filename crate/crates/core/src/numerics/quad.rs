//! Quadrature weights and interpolation on uniform grids.

use super::grid::Grid;

/// Trapezoid weights along one axis: `h` everywhere, halved at the ends of
/// a non-periodic axis.
pub fn trapezoid_weights(n: usize, h: f64, periodic: bool) -> Vec<f64> {
    let mut w = vec![h; n];
    if !periodic {
        w[0] *= 0.5;
        w[n - 1] *= 0.5;
    }
    w
}

/// Tensor trapezoid weights for a whole grid, row-major.
pub fn grid_weights(grid: &Grid) -> Vec<f64> {
    let axes: Vec<Vec<f64>> = grid
        .dims()
        .iter()
        .zip(grid.spacings())
        .zip(grid.periodic())
        .map(|((&n, &h), &p)| trapezoid_weights(n, h, p))
        .collect();
    let mut out = vec![1.0; grid.len()];
    let mut idx = vec![0; grid.ndim()];
    for (flat, w) in out.iter_mut().enumerate() {
        grid.unravel(flat, &mut idx);
        *w = idx.iter().zip(&axes).map(|(&i, a)| a[i]).product();
    }
    out
}

pub fn integrate(values: &[f64], weights: &[f64]) -> f64 {
    values.iter().zip(weights).map(|(v, w)| v * w).sum()
}

/// Linear interpolation on nodes `lo + i*h`, clamped at the ends.
pub fn interp_linear(lo: f64, h: f64, values: &[f64], x: f64) -> f64 {
    let n = values.len();
    let t = (x - lo) / h;
    if t <= 0.0 {
        return values[0];
    }
    if t >= (n - 1) as f64 {
        return values[n - 1];
    }
    let i = t.floor() as usize;
    let f = t - i as f64;
    values[i] * (1.0 - f) + values[i + 1] * f
}

/// Linear interpolation of a 1-periodic sample set on `[0, 1)`.
pub fn interp_periodic(values: &[f64], s: f64) -> f64 {
    let n = values.len();
    let t = (s - s.floor()) * n as f64;
    let i = (t.floor() as usize) % n;
    let f = t - t.floor();
    values[i] * (1.0 - f) + values[(i + 1) % n] * f
}

/// Multilinear interpolation of a unit-torus sample set at `s ∈ [0,1)^d`.
pub fn interp_torus(dims: &[usize], values: &[f64], s: &[f64]) -> f64 {
    let d = dims.len();
    let strides = super::grid::strides(dims);
    let mut base = vec![0usize; d];
    let mut frac = vec![0.0; d];
    for k in 0..d {
        let t = (s[k] - s[k].floor()) * dims[k] as f64;
        base[k] = (t.floor() as usize) % dims[k];
        frac[k] = t - t.floor();
    }
    let mut acc = 0.0;
    for corner in 0..(1usize << d) {
        let mut w = 1.0;
        let mut flat = 0;
        for k in 0..d {
            let up = (corner >> k) & 1 == 1;
            w *= if up { frac[k] } else { 1.0 - frac[k] };
            let i = if up { (base[k] + 1) % dims[k] } else { base[k] };
            flat += i * strides[k];
        }
        if w != 0.0 {
            acc += w * values[flat];
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_integrates_linear_exactly() {
        let n = 11;
        let h = 0.1;
        let w = trapezoid_weights(n, h, false);
        let vals: Vec<f64> = (0..n).map(|i| 3.0 * i as f64 * h + 1.0).collect();
        assert!((integrate(&vals, &w) - 2.5).abs() < 1e-14);
    }

    #[test]
    fn periodic_interp_wraps() {
        let v = [0.0, 1.0, 2.0, 3.0];
        assert!((interp_periodic(&v, 0.875) - 1.5).abs() < 1e-15);
        assert!((interp_periodic(&v, -0.125) - 1.5).abs() < 1e-15);
        assert!((interp_torus(&[4], &v, &[0.875]) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn clamped_linear_interp() {
        let v = [1.0, 3.0, 5.0];
        assert_eq!(interp_linear(0.0, 1.0, &v, -1.0), 1.0);
        assert_eq!(interp_linear(0.0, 1.0, &v, 0.5), 2.0);
        assert_eq!(interp_linear(0.0, 1.0, &v, 9.0), 5.0);
    }
}
