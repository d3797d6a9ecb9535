use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A uniform tensor-product grid.
///
/// Values living on a grid are stored row-major: the last axis varies
/// fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dims: Vec<usize>,
    spacings: Vec<f64>,
    periodic: Vec<bool>,
}

impl Grid {
    pub fn new(dims: Vec<usize>, spacings: Vec<f64>, periodic: Vec<bool>) -> Result<Self> {
        if dims.is_empty() {
            return Err(invalid("grid needs at least one axis"));
        }
        if dims.len() != spacings.len() || dims.len() != periodic.len() {
            return Err(invalid("grid axis descriptions have different lengths"));
        }
        if let Some(n) = dims.iter().find(|&&n| n < 2) {
            return Err(invalid(format!("grid axis of size {n}; need at least 2")));
        }
        if spacings.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(invalid("grid spacings must be positive and finite"));
        }
        Ok(Self {
            dims,
            spacings,
            periodic,
        })
    }

    /// Unit torus grid `[0,1)^d` with `n` points per axis.
    pub fn torus(dims: &[usize]) -> Result<Self> {
        for &n in dims {
            require_pow2(n)?;
        }
        Self::new(
            dims.to_vec(),
            dims.iter().map(|&n| 1.0 / n as f64).collect(),
            vec![true; dims.len()],
        )
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn spacings(&self) -> &[f64] {
        &self.spacings
    }

    pub fn periodic(&self) -> &[bool] {
        &self.periodic
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Volume of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacings.iter().product()
    }

    pub fn strides(&self) -> Vec<usize> {
        strides(&self.dims)
    }

    /// Multi-index of a flat index.
    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        for k in (0..self.dims.len()).rev() {
            out[k] = flat % self.dims[k];
            flat /= self.dims[k];
        }
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.dims)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    /// Fails unless every axis has a power-of-two size.
    pub fn require_fft(&self) -> Result<()> {
        self.dims.iter().try_for_each(|&n| require_pow2(n))
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.dims == other.dims
    }
}

pub fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

pub fn require_pow2(n: usize) -> Result<()> {
    if n >= 2 && n.is_power_of_two() {
        Ok(())
    } else {
        Err(invalid(format!("axis size {n} is not a power of two")))
    }
}

/// Uniform nodes of a bounded box axis, `lo + i*h` for `i = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub h: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(lo: f64, h: f64, n: usize) -> Self {
        Self { lo, h, n }
    }

    /// `n` nodes spanning `[lo, hi]` inclusive.
    pub fn closed(lo: f64, hi: f64, n: usize) -> Self {
        Self {
            lo,
            h: (hi - lo) / (n - 1) as f64,
            n,
        }
    }

    /// `n` nodes spanning `[lo, hi)`, as used by periodic boxes.
    pub fn half_open(lo: f64, hi: f64, n: usize) -> Self {
        Self {
            lo,
            h: (hi - lo) / n as f64,
            n,
        }
    }

    pub fn node(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.h
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.node(i))
    }

    pub fn hi(&self) -> f64 {
        self.node(self.n - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ravel_round_trip() {
        let g = Grid::new(vec![3, 4, 5], vec![1.0; 3], vec![false; 3]).unwrap();
        let mut idx = [0; 3];
        for flat in 0..g.len() {
            g.unravel(flat, &mut idx);
            assert_eq!(g.ravel(&idx), flat);
        }
        assert_eq!(g.strides(), vec![20, 5, 1]);
    }

    #[test]
    fn rejects_tiny_axes_and_non_pow2_fft() {
        assert!(Grid::new(vec![1], vec![1.0], vec![true]).is_err());
        assert!(Grid::torus(&[12]).is_err());
        let g = Grid::new(vec![6], vec![0.1], vec![false]).unwrap();
        assert!(g.require_fft().is_err());
    }
}
