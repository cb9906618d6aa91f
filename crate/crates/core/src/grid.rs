//! Regular tensor-product grids with periodic (spectral) boundaries.
//!
//! Each coordinate lives on its own 1D axis; the full grid is the tensor
//! product of the axes, stored row-major with the last axis contiguous.
//! `x_max` is the periodic wrap point and is not itself a grid node.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Default cap on the total number of grid points (complex amplitudes).
pub const DEFAULT_MEMORY_GUARD: usize = 1 << 24;

/// One spatial axis: `[x_min, x_max)` sampled at `n_points` equispaced nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl AxisSpec {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Self {
        AxisSpec {
            x_min,
            x_max,
            n_points,
        }
    }

    pub fn extent(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn dx(&self) -> f64 {
        self.extent() / self.n_points as f64
    }

    /// Node coordinates `x_min + i*dx`.
    pub fn coords(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.n_points).map(|i| self.x_min + i as f64 * dx).collect()
    }

    /// Angular wavenumbers in FFT ordering: `0, 1, ..., n/2-1, -n/2, ..., -1`
    /// times `2*pi/extent`.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n_points;
        let dk = 2.0 * PI / self.extent();
        (0..n)
            .map(|i| {
                let m = if i <= n / 2 - 1 { i as isize } else { i as isize - n as isize };
                m as f64 * dk
            })
            .collect()
    }

    fn validate(&self, axis: usize) -> Result<()> {
        if !(self.x_max > self.x_min) || !self.x_min.is_finite() || !self.x_max.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "axis {axis}: need finite x_max > x_min, got [{}, {}]",
                self.x_min, self.x_max
            )));
        }
        if self.n_points < 8 || !self.n_points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "axis {axis}: n_points must be a power of two >= 8, got {}",
                self.n_points
            )));
        }
        Ok(())
    }
}

/// Tensor-product grid over one axis per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    axes: Vec<AxisSpec>,
}

impl GridSpec {
    pub fn new(axes: Vec<AxisSpec>) -> Result<Self> {
        Self::with_guard(axes, DEFAULT_MEMORY_GUARD)
    }

    /// Build a grid with an explicit memory guard (total point cap).
    pub fn with_guard(axes: Vec<AxisSpec>, guard: usize) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidGrid("need at least one axis".into()));
        }
        let mut total: usize = 1;
        for (i, ax) in axes.iter().enumerate() {
            ax.validate(i)?;
            total = total.checked_mul(ax.n_points).ok_or_else(|| {
                Error::InvalidGrid("total point count overflows usize".into())
            })?;
        }
        if total > guard {
            return Err(Error::InvalidGrid(format!(
                "total point count {total} exceeds memory guard {guard}"
            )));
        }
        Ok(GridSpec { axes })
    }

    /// Identical axes `[x_min, x_max)` x `n_axes`.
    pub fn uniform(x_min: f64, x_max: f64, n_points: usize, n_axes: usize) -> Result<Self> {
        Self::new(vec![AxisSpec::new(x_min, x_max, n_points); n_axes])
    }

    pub fn axes(&self) -> &[AxisSpec] {
        &self.axes
    }

    pub fn n_axes(&self) -> usize {
        self.axes.len()
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n_points).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume element of the product quadrature.
    pub fn dv(&self) -> f64 {
        self.axes.iter().map(|a| a.dx()).product()
    }

    /// Row-major strides; last axis has stride 1.
    pub fn strides(&self) -> Vec<usize> {
        let n = self.axes.len();
        let mut s = vec![1usize; n];
        for a in (0..n.saturating_sub(1)).rev() {
            s[a] = s[a + 1] * self.axes[a + 1].n_points;
        }
        s
    }

    /// Visit every grid point in storage order with its per-axis indices.
    pub fn for_each_point<F: FnMut(usize, &[usize])>(&self, mut f: F) {
        let dims: Vec<usize> = self.axes.iter().map(|a| a.n_points).collect();
        let mut idx = vec![0usize; dims.len()];
        let total = self.len();
        for flat in 0..total {
            f(flat, &idx);
            for a in (0..dims.len()).rev() {
                idx[a] += 1;
                if idx[a] < dims[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_power_of_two() {
        let err = GridSpec::uniform(-1.0, 1.0, 100, 1);
        assert!(err.is_err());
        let err = GridSpec::uniform(-1.0, 1.0, 4, 1);
        assert!(err.is_err());
    }

    #[test]
    fn rejects_reversed_bounds() {
        assert!(GridSpec::uniform(1.0, -1.0, 16, 1).is_err());
    }

    #[test]
    fn memory_guard_enforced() {
        // 256^3 = 2^24 is exactly at the default guard.
        assert!(GridSpec::uniform(-1.0, 1.0, 256, 3).is_ok());
        assert!(GridSpec::uniform(-1.0, 1.0, 512, 3).is_err());
    }

    #[test]
    fn wavenumbers_fft_order() {
        let ax = AxisSpec::new(0.0, 2.0 * PI, 8);
        let k = ax.wavenumbers();
        assert_eq!(k, vec![0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0]);
    }

    #[test]
    fn strides_row_major() {
        let g = GridSpec::new(vec![
            AxisSpec::new(0.0, 1.0, 8),
            AxisSpec::new(0.0, 1.0, 16),
            AxisSpec::new(0.0, 1.0, 32),
        ])
        .unwrap();
        assert_eq!(g.strides(), vec![16 * 32, 32, 1]);
        assert_eq!(g.len(), 8 * 16 * 32);
    }
}
