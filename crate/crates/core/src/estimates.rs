//! Closed-form estimators: the free-coupling estimate from a double-well
//! transition, order-of-magnitude energy calculators in SI units, the
//! Gaussian-mixture scaling table, and the two-level correlation model.
//!
//! Everything here is exact arithmetic on the inputs; no grids involved.

use crate::error::{Error, Result};

/// w = delta_v / (n_c * r^2): the coupling at which a two-well cat of
/// n_c constituents just runs out of energy.
pub fn estimate_w(delta_v: f64, n_c: f64, r: f64) -> Result<f64> {
    for (name, v) in [("delta_v", delta_v), ("n_c", n_c), ("r", r)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "estimate_w: {name} must be positive, got {v}"
            )));
        }
    }
    Ok(delta_v / (n_c * r * r))
}

/// Order-of-magnitude energy calculators (SI inputs, Joule outputs).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimateRequest {
    /// Nonlinear energy of a fully formed cat: w R^2 N^2.
    CatFinal { w: f64, big_r: f64, n: f64 },
    /// Nonlinear energy of an undisturbed pointer: w N L^2.
    PointerInitial { w: f64, n: f64, pointer_size: f64 },
    /// Nonlinear energy at atomic scale: w length^2, with the ratio to a
    /// reference ground-state energy.
    Hydrogen {
        w: f64,
        length: f64,
        ground_state_energy: f64,
    },
    /// Correlation contribution for a normal object: w N^2 L epsilon.
    ThermalCorrelation {
        w: f64,
        n: f64,
        size: f64,
        correlation_length: f64,
    },
}

#[derive(Debug, Clone)]
pub struct EstimateReport {
    pub name: &'static str,
    /// The estimated energy in Joules.
    pub value_joules: f64,
    /// Inputs echoed back, in the order given.
    pub inputs: Vec<(&'static str, f64)>,
    /// Derived secondary quantities (e.g. a ratio).
    pub derived: Vec<(&'static str, f64)>,
}

pub fn paper_estimate(req: &EstimateRequest) -> Result<EstimateReport> {
    let check = |pairs: &[(&'static str, f64)]| -> Result<()> {
        for (name, v) in pairs {
            if !v.is_finite() || *v <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "estimate: {name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    };
    match *req {
        EstimateRequest::CatFinal { w, big_r, n } => {
            let inputs = vec![("w", w), ("R", big_r), ("N", n)];
            check(&inputs)?;
            Ok(EstimateReport {
                name: "cat_final",
                value_joules: w * big_r * big_r * n * n,
                inputs,
                derived: vec![],
            })
        }
        EstimateRequest::PointerInitial { w, n, pointer_size } => {
            let inputs = vec![("w", w), ("N", n), ("L", pointer_size)];
            check(&inputs)?;
            Ok(EstimateReport {
                name: "pointer_initial",
                value_joules: w * n * pointer_size * pointer_size,
                inputs,
                derived: vec![],
            })
        }
        EstimateRequest::Hydrogen {
            w,
            length,
            ground_state_energy,
        } => {
            let inputs = vec![("w", w), ("length", length), ("E_ground", ground_state_energy)];
            check(&inputs)?;
            let value = w * length * length;
            Ok(EstimateReport {
                name: "hydrogen",
                value_joules: value,
                inputs,
                derived: vec![("ratio_to_ground_state", value / ground_state_energy)],
            })
        }
        EstimateRequest::ThermalCorrelation {
            w,
            n,
            size,
            correlation_length,
        } => {
            let inputs = vec![
                ("w", w),
                ("N", n),
                ("L", size),
                ("epsilon", correlation_length),
            ];
            check(&inputs)?;
            Ok(EstimateReport {
                name: "thermal_correlation",
                value_joules: w * n * n * size * correlation_length,
                inputs,
                derived: vec![],
            })
        }
    }
}

/// One row of the dispersion/energy scaling table.
#[derive(Debug, Clone, Copy)]
pub struct ScalingRow {
    pub n: f64,
    /// Dispersion of the product-of-superpositions state: (R^2 + r^2)/N.
    pub d_product: f64,
    /// Dispersion of the cat state: R^2 + r^2/N.
    pub d_cat: f64,
    pub h_nl_product: f64,
    pub h_nl_cat: f64,
}

/// Closed-form Gaussian-mixture dispersions and nonlinear energies in the
/// negligible-overlap regime (R >> r).
pub fn scaling_table(n_list: &[f64], r: f64, big_r: f64, w: f64) -> Result<Vec<ScalingRow>> {
    if !(r > 0.0) || big_r < 0.0 || w < 0.0 {
        return Err(Error::InvalidParameter(
            "scaling_table: need r > 0, R >= 0, w >= 0".into(),
        ));
    }
    let r2 = r * r;
    let big_r2 = big_r * big_r;
    n_list
        .iter()
        .map(|&n| {
            if !(n >= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "scaling_table: N must be >= 1, got {n}"
                )));
            }
            let d_product = (big_r2 + r2) / n;
            let d_cat = big_r2 + r2 / n;
            Ok(ScalingRow {
                n,
                d_product,
                d_cat,
                h_nl_product: w * n * n * d_product,
                h_nl_cat: w * n * n * d_cat,
            })
        })
        .collect()
}

/// Two-level conditional-density correlation model on a flat density of
/// size L: f(s) = f1 on |s| <= epsilon, -f2 on epsilon < |s| <= eta, with
/// f2 fixed by the zero-mean constraint f1/f2 = (eta - epsilon)/epsilon.
#[derive(Debug, Clone, Copy)]
pub struct CorrelationModel {
    pub f1: f64,
    pub f2: f64,
    pub eta: f64,
    pub epsilon: f64,
    pub size: f64,
    /// Closed-form value L f1 epsilon / 6.
    pub c2_closed: f64,
    /// 2D quadrature of rho1 rho1 f x1 x2 over the support square.
    pub c2_quadrature: f64,
    /// Richardson-style estimate of the quadrature discretization error.
    pub quadrature_error_estimate: f64,
    /// Bulk integral (1/L) int f ds; zero when the ratio constraint holds.
    pub zero_mean_residual: f64,
}

pub fn correlation_model(f1: f64, eta: f64, epsilon: f64, size: f64) -> Result<CorrelationModel> {
    correlation_model_with_resolution(f1, eta, epsilon, size, 10_000)
}

/// As `correlation_model` with an explicit outer quadrature resolution
/// (the inner integral over the correlation variable is exact piecewise).
pub fn correlation_model_with_resolution(
    f1: f64,
    eta: f64,
    epsilon: f64,
    size: f64,
    resolution: usize,
) -> Result<CorrelationModel> {
    if !(epsilon > 0.0) || !(eta > epsilon) {
        return Err(Error::InvalidParameter(format!(
            "correlation_model: need 0 < epsilon < eta, got epsilon = {epsilon}, eta = {eta}"
        )));
    }
    if !(size > 0.0) || f1 < 0.0 {
        return Err(Error::InvalidParameter(
            "correlation_model: need size > 0 and f1 >= 0".into(),
        ));
    }
    if resolution < 2 {
        return Err(Error::InvalidParameter("correlation_model: resolution too small".into()));
    }
    let f2 = f1 * epsilon / (eta - epsilon);
    if f2 >= 1.0 {
        return Err(Error::ConstraintViolation(format!(
            "correlation_model: f2 = f1 epsilon/(eta - epsilon) = {f2} must be < 1"
        )));
    }
    if eta > size {
        return Err(Error::InvalidParameter(
            "correlation_model: correlation range eta exceeds the system size".into(),
        ));
    }

    let c2_closed = size * f1 * epsilon / 6.0;
    // Zero-mean constraint in the bulk convention the ratio is derived
    // from: (1/L) int f ds.
    let zero_mean_residual = ((2.0 * epsilon * f1 - 2.0 * (eta - epsilon) * f2) / size).abs();

    let c2_quadrature = c2_quadrature(f1, f2, eta, epsilon, size, resolution);
    let coarse = c2_quadrature_impl(f1, f2, eta, epsilon, size, resolution / 2);
    let quadrature_error_estimate = (c2_quadrature - coarse).abs().max(f64::EPSILON);

    Ok(CorrelationModel {
        f1,
        f2,
        eta,
        epsilon,
        size,
        c2_closed,
        c2_quadrature,
        quadrature_error_estimate,
        zero_mean_residual,
    })
}

fn c2_quadrature(f1: f64, f2: f64, eta: f64, epsilon: f64, size: f64, n: usize) -> f64 {
    c2_quadrature_impl(f1, f2, eta, epsilon, size, n)
}

/// Midpoint rule in x1; the x2 integral is taken exactly on each plateau
/// of f within the truncated support, so the effective resolution is
/// n x (continuum).
fn c2_quadrature_impl(f1: f64, f2: f64, eta: f64, epsilon: f64, size: f64, n: usize) -> f64 {
    let half = size / 2.0;
    let dx = size / n as f64;
    // Plateau regions of f(s), s = x1 - x2.
    let regions = [
        (-eta, -epsilon, -f2),
        (-epsilon, epsilon, f1),
        (epsilon, eta, -f2),
    ];
    let mut total = 0.0;
    for i in 0..n {
        let x1 = -half + (i as f64 + 0.5) * dx;
        // x2 = x1 - s must stay inside [-half, half]:
        let s_lo_support = x1 - half;
        let s_hi_support = x1 + half;
        let mut inner = 0.0;
        for &(lo, hi, fval) in &regions {
            let a = lo.max(s_lo_support);
            let b = hi.min(s_hi_support);
            if b <= a {
                continue;
            }
            // int_a^b x1 (x1 - s) ds = x1^2 (b - a) - x1 (b^2 - a^2)/2
            inner += fval * (x1 * x1 * (b - a) - x1 * (b * b - a * a) / 2.0);
        }
        total += inner * dx;
    }
    total / (size * size)
}
