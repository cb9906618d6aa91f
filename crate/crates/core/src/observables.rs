//! Measurement functionals: centroid, dispersion of the coordinate
//! average, total momentum, reduced densities, and the centroid equation
//! of motion (Ehrenfest) residuals.
//!
//! The dispersion D_N of a coordinate subset S is the variance of
//! (1/N) sum_{j in S} x_j. It decomposes as
//! D_N = (1 - 1/N) C2 + (1/N) L2 with C2 the mean pair covariance and L2
//! the mean single-coordinate variance; `moments` computes D_N directly
//! from its defining quadrature and C2/L2 from separate accumulations, so
//! the identity is a genuine floating-point consistency check.

use num_complex::Complex64;

use crate::dynamics::TrajectoryRecord;
use crate::error::{Error, Result};
use crate::hamiltonians::{HamiltonianSpec, PotentialTerm};
use crate::spectral::SpectralEngine;
use crate::wavefield::WaveField;

/// Spatial and momentum moments of a coordinate subset.
#[derive(Debug, Clone)]
pub struct MomentReport {
    pub coords: Vec<usize>,
    /// Centroid <(1/N) sum x_j>.
    pub x: f64,
    /// Variance of the coordinate average.
    pub d_n: f64,
    /// <sum_{j in S} p_j>.
    pub p_total: f64,
    /// Mean single-coordinate variance.
    pub l2: f64,
    /// Mean pair covariance; absent for single-coordinate subsets.
    pub c2: Option<f64>,
    pub per_coord_mean: Vec<f64>,
    pub per_coord_var: Vec<f64>,
}

impl MomentReport {
    /// Residual of the decomposition identity
    /// D_N - [(1 - 1/N) C2 + (1/N) L2], relative to D_N's scale.
    pub fn decomposition_residual(&self) -> f64 {
        let n = self.coords.len() as f64;
        let recomposed = match self.c2 {
            Some(c2) => (1.0 - 1.0 / n) * c2 + self.l2 / n,
            None => self.l2,
        };
        (self.d_n - recomposed).abs() / self.d_n.abs().max(1e-12)
    }
}

/// Quadrature moments of |psi|^2 over the coordinate subset `coords`.
pub fn moments(field: &WaveField, coords: &[usize], hbar: f64) -> Result<MomentReport> {
    if coords.is_empty() {
        return Err(Error::InvalidParameter("moments: empty coordinate subset".into()));
    }
    let n_axes = field.n_axes();
    for &c in coords {
        if c >= n_axes {
            return Err(Error::InvalidParameter(format!(
                "moments: coordinate {c} out of range ({n_axes} axes)"
            )));
        }
    }
    let grid = field.grid();
    let n_sub = coords.len();
    let axis_coords: Vec<Vec<f64>> = grid.axes().iter().map(|a| a.coords()).collect();
    let n = grid.len();

    let mut wsum = 0.0;
    let mut m1 = vec![0.0f64; n_sub];
    let mut m2 = vec![0.0f64; n_sub];
    let mut cross = vec![0.0f64; n_sub * n_sub];
    let mut mean1 = 0.0; // < (1/N) sum x >
    let mut mean2 = 0.0; // < ((1/N) sum x)^2 >, direct route for D_N
    let inv_n = 1.0 / n_sub as f64;

    let spin = field.spin_components();
    let amps = field.amplitudes();
    let mut xs = vec![0.0f64; n_sub];
    grid.for_each_point(|flat, idx| {
        let mut w = 0.0;
        for s in 0..spin {
            w += amps[s * n + flat].norm_sqr();
        }
        if w == 0.0 {
            return;
        }
        wsum += w;
        let mut sum_x = 0.0;
        for (a, &c) in coords.iter().enumerate() {
            let x = axis_coords[c][idx[c]];
            xs[a] = x;
            sum_x += x;
            m1[a] += w * x;
            m2[a] += w * x * x;
        }
        for a in 0..n_sub {
            for b in (a + 1)..n_sub {
                cross[a * n_sub + b] += w * xs[a] * xs[b];
            }
        }
        let avg = sum_x * inv_n;
        mean1 += w * avg;
        mean2 += w * avg * avg;
    });

    if wsum <= 0.0 {
        return Err(Error::ZeroNorm);
    }
    let inv_w = 1.0 / wsum;
    let per_coord_mean: Vec<f64> = m1.iter().map(|v| v * inv_w).collect();
    let per_coord_var: Vec<f64> = m2
        .iter()
        .zip(per_coord_mean.iter())
        .map(|(v, m)| v * inv_w - m * m)
        .collect();
    let x = mean1 * inv_w;
    let d_n = mean2 * inv_w - x * x;
    let l2 = per_coord_var.iter().sum::<f64>() * inv_n;
    let c2 = if n_sub >= 2 {
        let mut acc = 0.0;
        for a in 0..n_sub {
            for b in (a + 1)..n_sub {
                acc += cross[a * n_sub + b] * inv_w - per_coord_mean[a] * per_coord_mean[b];
            }
        }
        Some(acc * 2.0 / (n_sub as f64 * (n_sub as f64 - 1.0)))
    } else {
        None
    };

    let p_total = momentum_sum(field, coords, hbar)?;

    Ok(MomentReport {
        coords: coords.to_vec(),
        x,
        d_n,
        p_total,
        l2,
        c2,
        per_coord_mean,
        per_coord_var,
    })
}

/// <sum_{j in coords} p_j> with p = -i hbar d/dx, evaluated spectrally.
pub fn momentum_sum(field: &WaveField, coords: &[usize], hbar: f64) -> Result<f64> {
    let grid = field.grid();
    let n = grid.len();
    let k_axis: Vec<Vec<f64>> = grid
        .axes()
        .iter()
        .enumerate()
        .map(|(a, ax)| {
            if coords.contains(&a) {
                ax.wavenumbers().iter().map(|&k| hbar * k).collect()
            } else {
                vec![0.0; ax.n_points]
            }
        })
        .collect();
    let mut engine = SpectralEngine::new(grid);
    let wk = grid.dv() / n as f64;
    let mut total = 0.0;
    let mut norm = 0.0;
    let mut buf = vec![Complex64::default(); n];
    for s in 0..field.spin_components() {
        buf.copy_from_slice(field.spin_block(s));
        engine.forward(&mut buf);
        grid.for_each_point(|flat, idx| {
            let w = buf[flat].norm_sqr();
            let p: f64 = idx.iter().enumerate().map(|(a, &i)| k_axis[a][i]).sum();
            total += p * w;
            norm += w;
        });
    }
    if norm <= 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(total / norm)
}

/// <sum_j p_j> over all axes.
pub fn total_momentum(field: &WaveField, hbar: f64) -> Result<f64> {
    let all: Vec<usize> = (0..field.n_axes()).collect();
    momentum_sum(field, &all, hbar)
}

/// Marginal of |psi|^2 onto the first `k` coordinates.
#[derive(Debug, Clone)]
pub struct ReducedDensity {
    pub k: usize,
    /// Node coordinates of the kept axes.
    pub axes: Vec<Vec<f64>>,
    /// Row-major values over the kept axes.
    pub values: Vec<f64>,
    /// False when the input was not interchange-symmetric (the marginal is
    /// still taken over the first coordinates).
    pub symmetric_input: bool,
}

impl ReducedDensity {
    /// Quadrature of the marginal (should be the field norm, ~1).
    pub fn integral(&self) -> f64 {
        let dv: f64 = self
            .axes
            .iter()
            .map(|c| {
                if c.len() > 1 {
                    c[1] - c[0]
                } else {
                    1.0
                }
            })
            .product();
        self.values.iter().sum::<f64>() * dv
    }
}

/// Reduced density over the first `k` coordinates (k = 1 or 2).
///
/// Constructors produce interchange-symmetric fields; an asymmetric input
/// is flagged, not rejected.
pub fn reduced_density(field: &WaveField, k: usize) -> Result<ReducedDensity> {
    if k == 0 || k > 2 {
        return Err(Error::InvalidParameter("reduced_density supports k = 1 or 2".into()));
    }
    if k > field.n_axes() {
        return Err(Error::InvalidParameter(format!(
            "reduced_density: k = {k} but field has {} axes",
            field.n_axes()
        )));
    }
    let grid = field.grid();
    let n = grid.len();
    let dims: Vec<usize> = grid.axes().iter().map(|a| a.n_points).collect();
    let kept: usize = dims[..k].iter().product();
    let rest_dv: f64 = grid.axes()[k..].iter().map(|a| a.dx()).product();

    let mut values = vec![0.0f64; kept];
    let spin = field.spin_components();
    let amps = field.amplitudes();
    let strides = grid.strides();
    let kept_stride = strides[k - 1];
    grid.for_each_point(|flat, _idx| {
        let mut w = 0.0;
        for s in 0..spin {
            w += amps[s * n + flat].norm_sqr();
        }
        values[flat / kept_stride] += w;
    });
    for v in values.iter_mut() {
        *v *= rest_dv;
    }

    Ok(ReducedDensity {
        k,
        axes: grid.axes()[..k].iter().map(|a| a.coords()).collect(),
        values,
        symmetric_input: interchange_symmetric(field),
    })
}

/// Max deviation |psi(..x_a..x_b..) - psi(..x_b..x_a..)| over the first
/// axis pair, relative to the amplitude scale.
fn interchange_symmetric(field: &WaveField) -> bool {
    let grid = field.grid();
    if grid.n_axes() < 2 {
        return true;
    }
    let dims: Vec<usize> = grid.axes().iter().map(|a| a.n_points).collect();
    if dims[0] != dims[1] || grid.axes()[0] != grid.axes()[1] {
        return false;
    }
    let strides = grid.strides();
    let n = grid.len();
    let amps = field.amplitudes();
    let mut max_amp: f64 = 0.0;
    let mut max_diff: f64 = 0.0;
    for s in 0..field.spin_components() {
        let base = s * n;
        grid.for_each_point(|flat, idx| {
            // Flat index with idx[0] and idx[1] exchanged.
            let f2 = flat as isize
                + (idx[1] as isize - idx[0] as isize) * strides[0] as isize
                + (idx[0] as isize - idx[1] as isize) * strides[1] as isize;
            let a = amps[base + flat];
            let b = amps[base + f2 as usize];
            max_amp = max_amp.max(a.norm());
            max_diff = max_diff.max((a - b).norm());
        });
    }
    max_diff <= 1e-8 * max_amp.max(1e-300)
}

/// Centroid equation-of-motion residuals from a trajectory with stored
/// fields. The second time derivative comes from 5-point central
/// differences on X(t); the truncation error is estimated from sixth
/// differences and reported alongside.
#[derive(Debug, Clone)]
pub struct EhrenfestReport {
    /// Interior sample times where the stencil applies.
    pub times: Vec<f64>,
    /// m Xdd + (1/N) sum_k <dV/dx_k> (external, pair and coupling forces).
    pub residual: Vec<f64>,
    /// m Xdd + V'(X): treats the centroid as a Newtonian particle in the
    /// per-coordinate external potential.
    pub naive_newton_residual: Vec<f64>,
    /// m Xdd + V'(X) + 3 c L2: the cubic-corrected centroid law.
    pub cubic_corrected_residual: Vec<f64>,
    /// 3 c L2 per sample (the cubic correction magnitude).
    pub three_c_l2: Vec<f64>,
    /// Finite-difference truncation estimate for m Xdd.
    pub fd_error_estimate: Vec<f64>,
}

impl EhrenfestReport {
    pub fn max_abs_residual(&self) -> f64 {
        self.residual.iter().map(|r| r.abs()).fold(0.0, f64::max)
    }

    pub fn max_abs_corrected(&self) -> f64 {
        self.cubic_corrected_residual
            .iter()
            .map(|r| r.abs())
            .fold(0.0, f64::max)
    }

    pub fn max_fd_error(&self) -> f64 {
        self.fd_error_estimate.iter().cloned().fold(0.0, f64::max)
    }
}

/// Compute Ehrenfest residuals over the coordinate subset `coords` from a
/// trajectory recorded with `store_fields = true`.
pub fn ehrenfest_residual(
    record: &TrajectoryRecord,
    ham: &HamiltonianSpec,
    coords: &[usize],
) -> Result<EhrenfestReport> {
    let fields = record.fields.as_ref().ok_or_else(|| {
        Error::InvalidParameter("ehrenfest_residual needs stored fields".into())
    })?;
    if fields.len() < 5 {
        return Err(Error::InvalidParameter(format!(
            "ehrenfest_residual needs >= 5 samples, got {}",
            fields.len()
        )));
    }
    let times = record.times();
    let h = times[1] - times[0];
    for w in times.windows(2) {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1.0) {
            return Err(Error::InvalidParameter(
                "ehrenfest_residual needs uniformly spaced samples".into(),
            ));
        }
    }
    if coords.is_empty() {
        return Err(Error::InvalidParameter("empty coordinate subset".into()));
    }
    let m = ham.masses[coords[0]];
    for &c in coords {
        if (ham.masses[c] - m).abs() > 1e-12 * m.abs() {
            return Err(Error::InvalidParameter(
                "ehrenfest_residual needs equal masses across the subset".into(),
            ));
        }
    }

    // Per-sample centroid, force average and cubic-correction pieces.
    let n_s = fields.len();
    let mut xs = Vec::with_capacity(n_s);
    let mut force_avg = Vec::with_capacity(n_s);
    let mut vprime_at_x = Vec::with_capacity(n_s);
    let mut three_c_l2_all = Vec::with_capacity(n_s);
    for f in fields {
        let rep = moments(f, coords, ham.hbar)?;
        xs.push(rep.x);
        force_avg.push(mean_potential_gradient(f, ham, coords)?);
        let (vp, ccl2) = external_poly_at(ham, coords, rep.x, rep.l2);
        vprime_at_x.push(vp);
        three_c_l2_all.push(ccl2);
    }

    let mut out = EhrenfestReport {
        times: Vec::new(),
        residual: Vec::new(),
        naive_newton_residual: Vec::new(),
        cubic_corrected_residual: Vec::new(),
        three_c_l2: Vec::new(),
        fd_error_estimate: Vec::new(),
    };
    for i in 2..n_s - 2 {
        let xdd = (-xs[i - 2] + 16.0 * xs[i - 1] - 30.0 * xs[i] + 16.0 * xs[i + 1] - xs[i + 2])
            / (12.0 * h * h);
        let fd_err = if i >= 3 && i + 3 < n_s {
            let d6 = xs[i - 3] - 6.0 * xs[i - 2] + 15.0 * xs[i - 1] - 20.0 * xs[i]
                + 15.0 * xs[i + 1]
                - 6.0 * xs[i + 2]
                + xs[i + 3];
            (d6 / (90.0 * h * h)).abs()
        } else {
            f64::NAN // patched below from the nearest interior estimate
        };
        out.times.push(times[i]);
        out.residual.push(m * xdd + force_avg[i]);
        out.naive_newton_residual.push(m * xdd + vprime_at_x[i]);
        out.cubic_corrected_residual
            .push(m * xdd + vprime_at_x[i] + three_c_l2_all[i]);
        out.three_c_l2.push(three_c_l2_all[i]);
        out.fd_error_estimate.push(fd_err);
    }
    // Fill edge error estimates with the nearest interior value.
    let interior: Vec<f64> = out
        .fd_error_estimate
        .iter()
        .cloned()
        .filter(|v| v.is_finite())
        .collect();
    if let (Some(&first), Some(&last)) = (interior.first(), interior.last()) {
        let len = out.fd_error_estimate.len();
        for (i, v) in out.fd_error_estimate.iter_mut().enumerate() {
            if !v.is_finite() {
                *v = if i < len / 2 { first } else { last };
            }
        }
    }
    Ok(out)
}

/// (1/N) sum_{k in S} <dV/dx_k> over all potential terms.
fn mean_potential_gradient(
    field: &WaveField,
    ham: &HamiltonianSpec,
    subset: &[usize],
) -> Result<f64> {
    let grid = field.grid();
    let axis_coords: Vec<Vec<f64>> = grid.axes().iter().map(|a| a.coords()).collect();
    let n = grid.len();
    let spin = field.spin_components();
    let amps = field.amplitudes();
    let inv_n = 1.0 / subset.len() as f64;

    let mut acc = 0.0;
    let mut wsum = 0.0;
    grid.for_each_point(|flat, idx| {
        let mut w = 0.0;
        let mut w_signed = 0.0; // sigma_z-weighted for the spin gradient
        for s in 0..spin {
            let p = amps[s * n + flat].norm_sqr();
            w += p;
            w_signed += if s == 0 { p } else { -p };
        }
        wsum += w;
        if w == 0.0 && w_signed == 0.0 {
            return;
        }
        let mut g_here = 0.0;
        for term in &ham.potentials {
            match term {
                PotentialTerm::ExternalPoly { a, b, c, d, coords } => {
                    for &k in subset {
                        if coords.contains(&k) {
                            let x = axis_coords[k][idx[k]];
                            g_here += w * (a + 2.0 * b * x + 3.0 * c * x * x + 4.0 * d * x * x * x);
                        }
                    }
                }
                PotentialTerm::PairShortRange { u0, lambda, coords } => {
                    let inv2l2 = 1.0 / (2.0 * lambda * lambda);
                    for &k in subset {
                        if !coords.contains(&k) {
                            continue;
                        }
                        for &j in coords {
                            if j == k {
                                continue;
                            }
                            let s = axis_coords[k][idx[k]] - axis_coords[j][idx[j]];
                            // d/dx_k of -u0 exp(-s^2/(2 lambda^2)) = u0 s/lambda^2 exp(..)
                            g_here += w * u0 * s * 2.0 * inv2l2 * (-s * s * inv2l2).exp();
                        }
                    }
                }
                PotentialTerm::LinearCoupling {
                    alpha,
                    coords,
                    micro_axis,
                } => {
                    let y = axis_coords[*micro_axis][idx[*micro_axis]];
                    for &k in subset {
                        if coords.contains(&k) {
                            g_here += w * alpha * y;
                        }
                    }
                }
                PotentialTerm::SpinGradient { g, micro_axis } => {
                    if subset.contains(micro_axis) {
                        g_here += w_signed * g;
                    }
                }
            }
        }
        acc += g_here;
    });
    if wsum <= 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(acc * inv_n / wsum)
}

/// External-poly V'(X) and 3 c L2 for the subset, weighted by the
/// fraction of subset coordinates each term covers.
fn external_poly_at(ham: &HamiltonianSpec, subset: &[usize], x: f64, l2: f64) -> (f64, f64) {
    let n = subset.len() as f64;
    let mut vp = 0.0;
    let mut ccl2 = 0.0;
    for term in &ham.potentials {
        if let PotentialTerm::ExternalPoly { a, b, c, d, coords } = term {
            let covered = subset.iter().filter(|k| coords.contains(k)).count() as f64;
            if covered == 0.0 {
                continue;
            }
            let frac = covered / n;
            vp += frac * (a + 2.0 * b * x + 3.0 * c * x * x + 4.0 * d * x * x * x);
            ccl2 += frac * 3.0 * c * l2;
        }
    }
    (vp, ccl2)
}
