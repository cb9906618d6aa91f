//! Wavefunctions on tensor-product grids and the reference states used by
//! the measurement scenarios.
//!
//! Width convention: `sigma` (and the superposition width `r`) is the
//! standard deviation of |psi|^2, so second moments read directly as
//! variances. All constructors return normalized fields. Operations are
//! pure: inputs are never mutated.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// A single Gaussian packet on one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketSpec {
    /// Packet center.
    pub center: f64,
    /// Standard deviation of |psi|^2.
    pub sigma: f64,
    /// Carrier wavenumber; <p> = hbar * momentum_k.
    pub momentum_k: f64,
}

impl PacketSpec {
    pub fn new(center: f64, sigma: f64, momentum_k: f64) -> Self {
        PacketSpec {
            center,
            sigma,
            momentum_k,
        }
    }

    pub fn at_rest(center: f64, sigma: f64) -> Self {
        Self::new(center, sigma, 0.0)
    }

    fn validate(&self, grid: &GridSpec, axis: usize) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "axis {axis}: sigma must be positive, got {}",
                self.sigma
            )));
        }
        let ax = &grid.axes()[axis];
        let lo = self.center - 6.0 * self.sigma;
        let hi = self.center + 6.0 * self.sigma;
        if lo < ax.x_min || hi > ax.x_max {
            return Err(Error::PacketOutOfBounds {
                axis,
                detail: format!(
                    "support [{lo:.6}, {hi:.6}] vs axis [{:.6}, {:.6}]",
                    ax.x_min, ax.x_max
                ),
            });
        }
        Ok(())
    }

    /// Unnormalized amplitude exp(-(x-c)^2/(4 sigma^2) + i k x).
    fn amplitude(&self, x: f64) -> Complex64 {
        let z = x - self.center;
        let mag = (-z * z / (4.0 * self.sigma * self.sigma)).exp();
        let phase = Complex64::new(0.0, self.momentum_k * x).exp();
        mag * phase
    }
}

/// True when the two-branch superposition (separation R, width r) has
/// negligible cross terms; the closed-form moment formulas assume this.
pub fn superposition_overlap_negligible(r: f64, big_r: f64) -> bool {
    big_r >= 4.0 * r
}

/// Complex amplitudes over a grid, with optional spin components.
///
/// Layout: `amps[spin * grid.len() + flat]`, grid flattened row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    grid: GridSpec,
    spin_components: usize,
    amps: Vec<Complex64>,
}

impl WaveField {
    /// Wrap raw amplitudes; does not normalize.
    pub fn from_amplitudes(
        grid: GridSpec,
        spin_components: usize,
        amps: Vec<Complex64>,
    ) -> Result<Self> {
        if spin_components == 0 {
            return Err(Error::InvalidParameter("spin_components must be >= 1".into()));
        }
        if amps.len() != spin_components * grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "amplitude buffer has {} entries, grid wants {}",
                amps.len(),
                spin_components * grid.len()
            )));
        }
        Ok(WaveField {
            grid,
            spin_components,
            amps,
        })
    }

    /// Normalized product of per-axis Gaussian packets.
    pub fn gaussian_packet(grid: GridSpec, specs: &[PacketSpec]) -> Result<Self> {
        if specs.len() != grid.n_axes() {
            return Err(Error::ShapeMismatch(format!(
                "{} packet specs for {} axes",
                specs.len(),
                grid.n_axes()
            )));
        }
        for (axis, spec) in specs.iter().enumerate() {
            spec.validate(&grid, axis)?;
        }
        let tables: Vec<Vec<Complex64>> = specs
            .iter()
            .zip(grid.axes())
            .map(|(spec, ax)| ax.coords().iter().map(|&x| spec.amplitude(x)).collect())
            .collect();
        let mut amps = vec![Complex64::default(); grid.len()];
        grid.for_each_point(|flat, idx| {
            let mut v = Complex64::new(1.0, 0.0);
            for (a, &i) in idx.iter().enumerate() {
                v *= tables[a][i];
            }
            amps[flat] = v;
        });
        WaveField {
            grid,
            spin_components: 1,
            amps,
        }
        .normalized()
    }

    /// Product over coordinates of two-branch superpositions
    /// (phi_r(x+R) + phi_r(x-R))/sqrt(2), normalized. Not a cat: the
    /// coordinates stay independent.
    pub fn product_superposition(grid: GridSpec, n: usize, r: f64, big_r: f64) -> Result<Self> {
        Self::check_two_branch(&grid, n, r, big_r)?;
        let tables = Self::branch_tables(&grid, r, big_r)?;
        let mut amps = vec![Complex64::default(); grid.len()];
        grid.for_each_point(|flat, idx| {
            let mut v = Complex64::new(1.0, 0.0);
            for (a, &i) in idx.iter().enumerate() {
                v *= tables[a].0[i] + tables[a].1[i];
            }
            amps[flat] = v;
        });
        WaveField {
            grid,
            spin_components: 1,
            amps,
        }
        .normalized()
    }

    /// Superposition of two product branches
    /// (prod_j phi_r(x_j+R) + prod_j phi_r(x_j-R))/sqrt(2), normalized:
    /// every coordinate displaces the same way. Coincides with
    /// `product_superposition` at n = 1.
    pub fn cat_state(grid: GridSpec, n: usize, r: f64, big_r: f64) -> Result<Self> {
        Self::check_two_branch(&grid, n, r, big_r)?;
        let tables = Self::branch_tables(&grid, r, big_r)?;
        let mut amps = vec![Complex64::default(); grid.len()];
        grid.for_each_point(|flat, idx| {
            let mut plus = Complex64::new(1.0, 0.0);
            let mut minus = Complex64::new(1.0, 0.0);
            for (a, &i) in idx.iter().enumerate() {
                plus *= tables[a].0[i];
                minus *= tables[a].1[i];
            }
            amps[flat] = plus + minus;
        });
        WaveField {
            grid,
            spin_components: 1,
            amps,
        }
        .normalized()
    }

    fn check_two_branch(grid: &GridSpec, n: usize, r: f64, big_r: f64) -> Result<()> {
        if n != grid.n_axes() {
            return Err(Error::ShapeMismatch(format!(
                "n = {n} but grid has {} axes",
                grid.n_axes()
            )));
        }
        if !(r > 0.0) || big_r < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "need r > 0 and R >= 0, got r = {r}, R = {big_r}"
            )));
        }
        Ok(())
    }

    /// Per-axis tables for the branches at -R and +R.
    #[allow(clippy::type_complexity)]
    fn branch_tables(
        grid: &GridSpec,
        r: f64,
        big_r: f64,
    ) -> Result<Vec<(Vec<Complex64>, Vec<Complex64>)>> {
        let mut tables = Vec::with_capacity(grid.n_axes());
        for (axis, ax) in grid.axes().iter().enumerate() {
            let minus = PacketSpec::at_rest(-big_r, r);
            let plus = PacketSpec::at_rest(big_r, r);
            minus.validate(grid, axis)?;
            plus.validate(grid, axis)?;
            let coords = ax.coords();
            tables.push((
                coords.iter().map(|&x| minus.amplitude(x)).collect(),
                coords.iter().map(|&x| plus.amplitude(x)).collect(),
            ));
        }
        Ok(tables)
    }

    /// Attach spin components to a spatial field:
    /// psi_s(x) = weights[s] * psi(x). Does not renormalize.
    pub fn with_spin(&self, weights: &[Complex64]) -> Result<Self> {
        if self.spin_components != 1 {
            return Err(Error::ShapeMismatch(
                "with_spin expects a spinless field".into(),
            ));
        }
        if weights.is_empty() {
            return Err(Error::InvalidParameter("need at least one spin weight".into()));
        }
        let n = self.grid.len();
        let mut amps = vec![Complex64::default(); weights.len() * n];
        for (s, &w) in weights.iter().enumerate() {
            for i in 0..n {
                amps[s * n + i] = w * self.amps[i];
            }
        }
        Ok(WaveField {
            grid: self.grid.clone(),
            spin_components: weights.len(),
            amps,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn spin_components(&self) -> usize {
        self.spin_components
    }

    pub fn n_axes(&self) -> usize {
        self.grid.n_axes()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    /// One spin block of the amplitude buffer.
    pub fn spin_block(&self, s: usize) -> &[Complex64] {
        let n = self.grid.len();
        &self.amps[s * n..(s + 1) * n]
    }

    /// Quadrature of |psi|^2 over the grid, summed over spin components.
    pub fn norm_sq(&self) -> f64 {
        let dv = self.grid.dv();
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>() * dv
    }

    /// Rescale to unit norm; errors on a zero (or non-finite) field.
    pub fn normalized(self) -> Result<Self> {
        let n2 = self.norm_sq();
        if !(n2 > 0.0) || !n2.is_finite() {
            return Err(Error::ZeroNorm);
        }
        Ok(self.scaled(Complex64::new(1.0 / n2.sqrt(), 0.0)))
    }

    pub fn scaled(mut self, factor: Complex64) -> Self {
        for a in self.amps.iter_mut() {
            *a *= factor;
        }
        self
    }

    /// a*f + b*g over identical grids and spin structure.
    pub fn lin_comb(a: Complex64, f: &WaveField, b: Complex64, g: &WaveField) -> Result<Self> {
        if f.grid != g.grid || f.spin_components != g.spin_components {
            return Err(Error::ShapeMismatch(
                "lin_comb needs identical grids and spin structure".into(),
            ));
        }
        let amps = f
            .amps
            .iter()
            .zip(g.amps.iter())
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(WaveField {
            grid: f.grid.clone(),
            spin_components: f.spin_components,
            amps,
        })
    }

    /// <f|g> with the grid quadrature, summed over spin components.
    pub fn inner(&self, other: &WaveField) -> Result<Complex64> {
        if self.grid != other.grid || self.spin_components != other.spin_components {
            return Err(Error::ShapeMismatch("inner product shape mismatch".into()));
        }
        let dv = self.grid.dv();
        let sum: Complex64 = self
            .amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(sum * dv)
    }

    /// L2 distance sqrt(|f - g|^2) between two fields.
    pub fn distance(&self, other: &WaveField) -> Result<f64> {
        let diff = WaveField::lin_comb(
            Complex64::new(1.0, 0.0),
            self,
            Complex64::new(-1.0, 0.0),
            other,
        )?;
        Ok(diff.norm_sq().sqrt())
    }

    /// Multiply by the plane wave exp(i sum_j k_j x_j): boosts <p_j> by
    /// hbar k_j without touching |psi|^2.
    pub fn boosted(&self, ks: &[f64]) -> Result<Self> {
        if ks.len() != self.n_axes() {
            return Err(Error::ShapeMismatch(format!(
                "{} boost wavenumbers for {} axes",
                ks.len(),
                self.n_axes()
            )));
        }
        let coords: Vec<Vec<f64>> = self.grid.axes().iter().map(|a| a.coords()).collect();
        let n = self.grid.len();
        let mut phase = vec![Complex64::default(); n];
        self.grid.for_each_point(|flat, idx| {
            let mut kx = 0.0;
            for (a, &i) in idx.iter().enumerate() {
                kx += ks[a] * coords[a][i];
            }
            phase[flat] = Complex64::new(0.0, kx).exp();
        });
        let mut out = self.clone();
        for s in 0..self.spin_components {
            for i in 0..n {
                out.amps[s * n + i] *= phase[i];
            }
        }
        Ok(out)
    }

    pub fn all_finite(&self) -> bool {
        self.amps.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }

    /// Probability mass in the outermost `cells` layers of every axis;
    /// a proxy for packets touching the periodic boundary.
    pub fn edge_mass(&self, cells: usize) -> f64 {
        let dims: Vec<usize> = self.grid.axes().iter().map(|a| a.n_points).collect();
        let dv = self.grid.dv();
        let n = self.grid.len();
        let mut mass = 0.0;
        self.grid.for_each_point(|flat, idx| {
            let on_edge = idx
                .iter()
                .zip(dims.iter())
                .any(|(&i, &d)| i < cells || i >= d - cells);
            if on_edge {
                for s in 0..self.spin_components {
                    mass += self.amps[s * n + flat].norm_sqr();
                }
            }
        });
        mass * dv
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn grid1(n: usize) -> GridSpec {
        GridSpec::uniform(-10.0, 10.0, n, 1).unwrap()
    }

    #[test]
    fn gaussian_is_normalized() {
        let f = WaveField::gaussian_packet(grid1(256), &[PacketSpec::at_rest(0.0, 1.0)]).unwrap();
        assert!((f.norm_sq() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn packet_out_of_bounds_names_axis() {
        let g = GridSpec::uniform(-2.0, 2.0, 64, 2).unwrap();
        let err = WaveField::gaussian_packet(
            g,
            &[PacketSpec::at_rest(0.0, 0.1), PacketSpec::at_rest(1.5, 0.2)],
        )
        .unwrap_err();
        match err {
            Error::PacketOutOfBounds { axis, .. } => assert_eq!(axis, 1),
            other => panic!("expected PacketOutOfBounds, got {other:?}"),
        }
    }

    #[test]
    fn normalize_scales_and_rejects_zero() {
        let f = WaveField::gaussian_packet(grid1(128), &[PacketSpec::at_rest(0.0, 1.0)]).unwrap();
        let scaled = f.clone().scaled(Complex64::new(3.0, 0.0));
        assert!((scaled.norm_sq() - 9.0).abs() < 1e-9);
        let back = scaled.normalized().unwrap();
        assert!((back.norm_sq() - 1.0).abs() < 1e-12);

        let zero =
            WaveField::from_amplitudes(grid1(16), 1, vec![Complex64::default(); 16]).unwrap();
        assert!(matches!(zero.normalized(), Err(Error::ZeroNorm)));
    }

    #[test]
    fn orthogonal_packet_sum_normalizes() {
        // Separation 8 sigma: overlap is negligible, so the norms add.
        let g = grid1(256);
        let a = WaveField::gaussian_packet(g.clone(), &[PacketSpec::at_rest(-4.0, 1.0)]).unwrap();
        let b = WaveField::gaussian_packet(g, &[PacketSpec::at_rest(4.0, 1.0)]).unwrap();
        let sum = WaveField::lin_comb(
            Complex64::new(1.0, 0.0),
            &a,
            Complex64::new(1.0, 0.0),
            &b,
        )
        .unwrap();
        assert!((sum.norm_sq() - 2.0).abs() < 1e-8, "norm_sq = {}", sum.norm_sq());
        let n = sum.normalized().unwrap();
        assert!((n.norm_sq() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cat_equals_product_at_n1() {
        let g = grid1(256);
        let cat = WaveField::cat_state(g.clone(), 1, 0.5, 3.0).unwrap();
        let prod = WaveField::product_superposition(g, 1, 0.5, 3.0).unwrap();
        let d = cat.distance(&prod).unwrap();
        assert!(d < 1e-14, "N=1 constructions should coincide, distance {d}");
    }

    #[test]
    fn spin_attachment_splits_population() {
        let f = WaveField::gaussian_packet(grid1(128), &[PacketSpec::at_rest(0.0, 1.0)]).unwrap();
        let w = (0.5f64).sqrt();
        let spinor = f
            .with_spin(&[Complex64::new(w, 0.0), Complex64::new(0.0, w)])
            .unwrap();
        assert_eq!(spinor.spin_components(), 2);
        assert!((spinor.norm_sq() - 1.0).abs() < 1e-10);
    }
}
