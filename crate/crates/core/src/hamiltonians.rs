//! The Hamiltonian functional H = H_QM + H_NL and the right-hand side of
//! the evolution equation i hbar dpsi/dt = dH/dpsi*.
//!
//! H_QM is the usual quadratic energy functional (spectral kinetic term
//! plus multiplicative potentials). H_NL is the variance of the summed
//! coordinate (position form) or of the summed momentum (momentum form),
//! scaled by the coupling w. Both are invariant under global phase and
//! H_NL is nonnegative by construction.
//!
//! Functional derivatives are implemented analytically per term; the test
//! suite keeps an independent numerical-variation oracle.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::spectral::SpectralEngine;
use crate::wavefield::WaveField;

/// One additive term of the potential energy.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialTerm {
    /// V(x) = a x + b x^2 + c x^3 + d x^4, summed over `coords`.
    ExternalPoly {
        a: f64,
        b: f64,
        c: f64,
        d: f64,
        coords: Vec<usize>,
    },
    /// Gaussian pair well -u0 exp(-(x_j - x_k)^2 / (2 lambda^2)) over all
    /// unordered pairs of `coords`.
    PairShortRange {
        u0: f64,
        lambda: f64,
        coords: Vec<usize>,
    },
    /// alpha * (sum_{j in coords} x_j) * y, with y the `micro_axis`
    /// coordinate.
    LinearCoupling {
        alpha: f64,
        coords: Vec<usize>,
        micro_axis: usize,
    },
    /// g * y * sigma_z: equal and opposite linear potentials on the two
    /// spin components (inhomogeneous-field surrogate).
    SpinGradient { g: f64, micro_axis: usize },
}

/// Selector for the nonlinear energy term.
#[derive(Debug, Clone, PartialEq)]
pub enum NonlinearTerm {
    Off,
    /// w [ <(sum x_j)^2> - <sum x_j>^2 ] over `coords`; w in energy/length^2.
    Position { w: f64, coords: Vec<usize> },
    /// Same with momentum operators p_j = -i hbar d/dx_j; w in 1/mass.
    Momentum { w: f64, coords: Vec<usize> },
}

impl NonlinearTerm {
    pub fn is_off(&self) -> bool {
        matches!(self, NonlinearTerm::Off)
    }

    pub fn coupling(&self) -> f64 {
        match self {
            NonlinearTerm::Off => 0.0,
            NonlinearTerm::Position { w, .. } | NonlinearTerm::Momentum { w, .. } => *w,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpec {
    pub hbar: f64,
    /// One mass per coordinate; `f64::INFINITY` freezes a coordinate's
    /// kinetic motion.
    pub masses: Vec<f64>,
    pub potentials: Vec<PotentialTerm>,
    pub nonlinear: NonlinearTerm,
}

impl HamiltonianSpec {
    /// Free particles with hbar = m = 1 on every axis, no nonlinear term.
    pub fn free_natural(n_axes: usize) -> Self {
        HamiltonianSpec {
            hbar: 1.0,
            masses: vec![1.0; n_axes],
            potentials: Vec::new(),
            nonlinear: NonlinearTerm::Off,
        }
    }

    pub fn with_potential(mut self, term: PotentialTerm) -> Self {
        self.potentials.push(term);
        self
    }

    pub fn with_nonlinear(mut self, nl: NonlinearTerm) -> Self {
        self.nonlinear = nl;
        self
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        let n = grid.n_axes();
        if self.masses.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "{} masses for {} axes",
                self.masses.len(),
                n
            )));
        }
        if !(self.hbar > 0.0) || !self.hbar.is_finite() {
            return Err(Error::InvalidParameter(format!("hbar must be positive, got {}", self.hbar)));
        }
        for (i, &m) in self.masses.iter().enumerate() {
            if !(m > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "mass of coordinate {i} must be positive, got {m}"
                )));
            }
        }
        let check_coords = |coords: &[usize], what: &str| -> Result<()> {
            if coords.is_empty() {
                return Err(Error::InvalidParameter(format!("{what}: empty coordinate subset")));
            }
            let mut seen = vec![false; n];
            for &c in coords {
                if c >= n {
                    return Err(Error::InvalidParameter(format!(
                        "{what}: coordinate {c} out of range (grid has {n} axes)"
                    )));
                }
                if seen[c] {
                    return Err(Error::InvalidParameter(format!(
                        "{what}: coordinate {c} listed twice"
                    )));
                }
                seen[c] = true;
            }
            Ok(())
        };
        for term in &self.potentials {
            match term {
                PotentialTerm::ExternalPoly { a, b, c, d, coords } => {
                    for v in [a, b, c, d] {
                        if !v.is_finite() {
                            return Err(Error::InvalidParameter(
                                "external_poly: non-finite coefficient".into(),
                            ));
                        }
                    }
                    check_coords(coords, "external_poly")?;
                }
                PotentialTerm::PairShortRange { u0, lambda, coords } => {
                    if !u0.is_finite() || !(*lambda > 0.0) {
                        return Err(Error::InvalidParameter(
                            "pair_shortrange: need finite u0 and lambda > 0".into(),
                        ));
                    }
                    check_coords(coords, "pair_shortrange")?;
                    if coords.len() < 2 {
                        return Err(Error::InvalidParameter(
                            "pair_shortrange needs at least 2 coordinates".into(),
                        ));
                    }
                }
                PotentialTerm::LinearCoupling {
                    alpha,
                    coords,
                    micro_axis,
                } => {
                    if !alpha.is_finite() {
                        return Err(Error::InvalidParameter(
                            "linear_coupling: non-finite alpha".into(),
                        ));
                    }
                    check_coords(coords, "linear_coupling")?;
                    if *micro_axis >= n || coords.contains(micro_axis) {
                        return Err(Error::InvalidParameter(format!(
                            "linear_coupling: micro axis {micro_axis} invalid"
                        )));
                    }
                }
                PotentialTerm::SpinGradient { g, micro_axis } => {
                    if !g.is_finite() {
                        return Err(Error::InvalidParameter(
                            "spin_gradient: non-finite g".into(),
                        ));
                    }
                    if *micro_axis >= n {
                        return Err(Error::InvalidParameter(format!(
                            "spin_gradient: micro axis {micro_axis} out of range"
                        )));
                    }
                }
            }
        }
        match &self.nonlinear {
            NonlinearTerm::Off => {}
            NonlinearTerm::Position { w, coords } | NonlinearTerm::Momentum { w, coords } => {
                if !(*w >= 0.0) || !w.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "nonlinear coupling w must be >= 0, got {w}"
                    )));
                }
                check_coords(coords, "nonlinear")?;
            }
        }
        Ok(())
    }

    fn requires_spin(&self) -> bool {
        self.potentials
            .iter()
            .any(|t| matches!(t, PotentialTerm::SpinGradient { .. }))
    }
}

/// Grid-resolved evaluation machinery for one (grid, Hamiltonian) pair.
///
/// Caches the static potential table, the nonlinear coordinate (or
/// momentum) sums and the per-axis kinetic multipliers, plus FFT plans.
pub struct Operator {
    grid: GridSpec,
    ham: HamiltonianSpec,
    engine: SpectralEngine,
    /// Spin-independent potential per grid point.
    v_static: Vec<f64>,
    /// g*y table for the spin-gradient term (applied with sigma_z sign).
    v_spin: Option<Vec<f64>>,
    /// sum_{j in nl coords} x_j per grid point (position form only).
    coord_sum: Option<Vec<f64>>,
    /// Per-axis kinetic multipliers hbar^2 k^2 / (2 m_a) in FFT order.
    kin_axis: Vec<Vec<f64>>,
    /// Per-axis hbar*k tables for the momentum-form nonlinear term
    /// (zeroed on axes outside the subset).
    ksum_axis: Option<Vec<Vec<f64>>>,
    /// Scratch buffer of one spin block.
    buf: Vec<Complex64>,
}

impl Operator {
    pub fn new(grid: &GridSpec, ham: &HamiltonianSpec) -> Result<Self> {
        ham.validate(grid)?;
        let coords: Vec<Vec<f64>> = grid.axes().iter().map(|a| a.coords()).collect();
        let n = grid.len();

        let mut v_static = vec![0.0f64; n];
        let mut v_spin: Option<Vec<f64>> = None;
        for term in &ham.potentials {
            match term {
                PotentialTerm::ExternalPoly { a, b, c, d, coords: cs } => {
                    grid.for_each_point(|flat, idx| {
                        let mut v = 0.0;
                        for &j in cs {
                            let x = coords[j][idx[j]];
                            v += ((d * x + c) * x + b) * x * x + a * x;
                        }
                        v_static[flat] += v;
                    });
                }
                PotentialTerm::PairShortRange { u0, lambda, coords: cs } => {
                    let inv2l2 = 1.0 / (2.0 * lambda * lambda);
                    grid.for_each_point(|flat, idx| {
                        let mut v = 0.0;
                        for (pi, &j) in cs.iter().enumerate() {
                            for &k in &cs[pi + 1..] {
                                let s = coords[j][idx[j]] - coords[k][idx[k]];
                                v -= u0 * (-s * s * inv2l2).exp();
                            }
                        }
                        v_static[flat] += v;
                    });
                }
                PotentialTerm::LinearCoupling {
                    alpha,
                    coords: cs,
                    micro_axis,
                } => {
                    grid.for_each_point(|flat, idx| {
                        let y = coords[*micro_axis][idx[*micro_axis]];
                        let sum: f64 = cs.iter().map(|&j| coords[j][idx[j]]).sum();
                        v_static[flat] += alpha * sum * y;
                    });
                }
                PotentialTerm::SpinGradient { g, micro_axis } => {
                    let table = v_spin.get_or_insert_with(|| vec![0.0; n]);
                    grid.for_each_point(|flat, idx| {
                        table[flat] += g * coords[*micro_axis][idx[*micro_axis]];
                    });
                }
            }
        }

        let coord_sum = match &ham.nonlinear {
            NonlinearTerm::Position { coords: cs, .. } => {
                let mut table = vec![0.0f64; n];
                grid.for_each_point(|flat, idx| {
                    table[flat] = cs.iter().map(|&j| coords[j][idx[j]]).sum();
                });
                Some(table)
            }
            _ => None,
        };

        let kin_axis: Vec<Vec<f64>> = grid
            .axes()
            .iter()
            .zip(ham.masses.iter())
            .map(|(ax, &m)| {
                let coeff = if m.is_finite() {
                    ham.hbar * ham.hbar / (2.0 * m)
                } else {
                    0.0
                };
                ax.wavenumbers().iter().map(|&k| coeff * k * k).collect()
            })
            .collect();

        let ksum_axis = match &ham.nonlinear {
            NonlinearTerm::Momentum { coords: cs, .. } => Some(
                grid.axes()
                    .iter()
                    .enumerate()
                    .map(|(a, ax)| {
                        if cs.contains(&a) {
                            ax.wavenumbers().iter().map(|&k| ham.hbar * k).collect()
                        } else {
                            vec![0.0; ax.n_points]
                        }
                    })
                    .collect(),
            ),
            _ => None,
        };

        Ok(Operator {
            engine: SpectralEngine::new(grid),
            grid: grid.clone(),
            ham: ham.clone(),
            v_static,
            v_spin,
            coord_sum,
            kin_axis,
            ksum_axis,
            buf: vec![Complex64::default(); n],
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn ham(&self) -> &HamiltonianSpec {
        &self.ham
    }

    pub fn hbar(&self) -> f64 {
        self.ham.hbar
    }

    fn check_field(&self, field: &WaveField) -> Result<()> {
        if *field.grid() != self.grid {
            return Err(Error::ShapeMismatch("field grid differs from operator grid".into()));
        }
        if self.ham.requires_spin() && field.spin_components() != 2 {
            return Err(Error::ShapeMismatch(
                "spin_gradient term needs exactly 2 spin components".into(),
            ));
        }
        Ok(())
    }

    /// Static potential for spin component `s` at flat index `i`.
    #[inline]
    fn v_at(&self, i: usize, s: usize) -> f64 {
        let mut v = self.v_static[i];
        if let Some(vs) = &self.v_spin {
            v += if s == 0 { vs[i] } else { -vs[i] };
        }
        v
    }

    /// Kinetic multiplier sum_a hbar^2 k_a^2/(2 m_a) at a k-space point.
    #[inline]
    fn kin_at(&self, idx: &[usize]) -> f64 {
        idx.iter()
            .enumerate()
            .map(|(a, &i)| self.kin_axis[a][i])
            .sum()
    }

    /// The quadratic energy functional: spectral kinetic plus potentials.
    pub fn h_qm(&mut self, field: &WaveField) -> Result<f64> {
        self.check_field(field)?;
        let n = self.grid.len();
        let dv = self.grid.dv();
        let mut kinetic = 0.0;
        let mut potential = 0.0;
        for s in 0..field.spin_components() {
            self.buf.copy_from_slice(field.spin_block(s));
            self.engine.forward(&mut self.buf);
            let wk = dv / n as f64;
            let mut acc = 0.0;
            let buf = &self.buf;
            let kin_axis = &self.kin_axis;
            self.grid.for_each_point(|flat, idx| {
                let t: f64 = idx.iter().enumerate().map(|(a, &i)| kin_axis[a][i]).sum();
                acc += t * buf[flat].norm_sqr();
            });
            kinetic += acc * wk;
            for (i, a) in field.spin_block(s).iter().enumerate() {
                potential += self.v_at(i, s) * a.norm_sqr();
            }
        }
        potential *= dv;
        Ok(kinetic + potential)
    }

    /// <sum_{j in coords} x_j> and <(sum x_j)^2> under |psi|^2.
    fn coord_sum_moments(&self, field: &WaveField) -> (f64, f64) {
        let table = self.coord_sum.as_ref().expect("position-form table");
        let n = self.grid.len();
        let dv = self.grid.dv();
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for s in 0..field.spin_components() {
            let block = field.spin_block(s);
            for i in 0..n {
                let w = block[i].norm_sqr();
                m1 += table[i] * w;
                m2 += table[i] * table[i] * w;
            }
        }
        (m1 * dv, m2 * dv)
    }

    /// <sum_{j in coords} p_j> and <(sum p_j)^2> in the spectral basis.
    fn momentum_sum_moments(&mut self, field: &WaveField) -> (f64, f64) {
        let n = self.grid.len();
        let wk = self.grid.dv() / n as f64;
        let ks = self.ksum_axis.as_ref().expect("momentum-form table");
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for s in 0..field.spin_components() {
            self.buf.copy_from_slice(field.spin_block(s));
            self.engine.forward(&mut self.buf);
            let buf = &self.buf;
            self.grid.for_each_point(|flat, idx| {
                let p: f64 = idx.iter().enumerate().map(|(a, &i)| ks[a][i]).sum();
                let w = buf[flat].norm_sqr();
                m1 += p * w;
                m2 += p * p * w;
            });
        }
        (m1 * wk, m2 * wk)
    }

    /// The nonlinear energy functional; errors if the term is off.
    pub fn h_nl(&mut self, field: &WaveField) -> Result<f64> {
        self.check_field(field)?;
        match &self.ham.nonlinear {
            NonlinearTerm::Off => Err(Error::InvalidParameter(
                "h_nl called with nonlinear term off".into(),
            )),
            NonlinearTerm::Position { w, .. } => {
                let (m1, m2) = self.coord_sum_moments(field);
                Ok(w * (m2 - m1 * m1))
            }
            NonlinearTerm::Momentum { w, .. } => {
                let w = *w;
                let (m1, m2) = self.momentum_sum_moments(field);
                Ok(w * (m2 - m1 * m1))
            }
        }
    }

    /// Total energy; h_nl counts as zero when the term is off.
    pub fn h_total(&mut self, field: &WaveField) -> Result<f64> {
        let qm = self.h_qm(field)?;
        if self.ham.nonlinear.is_off() {
            Ok(qm)
        } else {
            Ok(qm + self.h_nl(field)?)
        }
    }

    /// Pointwise effective potential of the position-form nonlinear term:
    /// V_NL(x; psi) = w (sum x_j)^2 - 2 w <sum x_j> (sum x_j).
    pub fn effective_nl_potential(&self, field: &WaveField) -> Result<Vec<f64>> {
        self.check_field(field)?;
        let (w, table) = match (&self.ham.nonlinear, &self.coord_sum) {
            (NonlinearTerm::Position { w, .. }, Some(t)) => (*w, t),
            _ => {
                return Err(Error::InvalidParameter(
                    "effective_nl_potential needs the position-form nonlinear term".into(),
                ))
            }
        };
        let (m1, _) = self.coord_sum_moments(field);
        Ok(table.iter().map(|&s| w * s * s - 2.0 * w * m1 * s).collect())
    }

    /// Right-hand side (1/i hbar) dH/dpsi* of the evolution equation.
    pub fn rhs(&mut self, field: &WaveField) -> Result<WaveField> {
        self.check_field(field)?;
        let n = self.grid.len();
        let n_spin = field.spin_components();

        // k-space multiplier: kinetic, plus the momentum-form nonlinear
        // potential when active.
        let momentum_nl = match &self.ham.nonlinear {
            NonlinearTerm::Momentum { w, .. } => {
                let w = *w;
                let (m1, _) = self.momentum_sum_moments(field);
                Some((w, m1))
            }
            _ => None,
        };

        // Position-form nonlinear coefficient <sum x_j>, re-evaluated on
        // the input field every call (every integrator substage).
        let position_nl = match &self.ham.nonlinear {
            NonlinearTerm::Position { w, .. } => {
                let (m1, _) = self.coord_sum_moments(field);
                Some((*w, m1))
            }
            _ => None,
        };

        let mut out = vec![Complex64::default(); n_spin * n];
        for s in 0..n_spin {
            // Spectral part.
            self.buf.copy_from_slice(field.spin_block(s));
            self.engine.forward(&mut self.buf);
            {
                let buf = &mut self.buf;
                let kin_axis = &self.kin_axis;
                let ksum_axis = &self.ksum_axis;
                self.grid.for_each_point(|flat, idx| {
                    let mut mult: f64 =
                        idx.iter().enumerate().map(|(a, &i)| kin_axis[a][i]).sum();
                    if let Some((w, m1)) = momentum_nl {
                        let ks = ksum_axis.as_ref().unwrap();
                        let p: f64 = idx.iter().enumerate().map(|(a, &i)| ks[a][i]).sum();
                        mult += w * (p * p - 2.0 * m1 * p);
                    }
                    buf[flat] *= mult;
                });
            }
            self.engine.inverse(&mut self.buf);

            // Multiplicative part.
            let block = field.spin_block(s);
            let out_block = &mut out[s * n..(s + 1) * n];
            for i in 0..n {
                let mut v = self.v_at(i, s);
                if let Some((w, m1)) = position_nl {
                    let cs = self.coord_sum.as_ref().unwrap()[i];
                    v += w * cs * cs - 2.0 * w * m1 * cs;
                }
                out_block[i] = self.buf[i] + v * block[i];
            }
        }

        // 1/(i hbar) = -i/hbar.
        let factor = Complex64::new(0.0, -1.0 / self.ham.hbar);
        for v in out.iter_mut() {
            *v *= factor;
        }

        let result = WaveField::from_amplitudes(self.grid.clone(), n_spin, out)?;
        if !result.all_finite() {
            return Err(self.diagnose_nan(field));
        }
        Ok(result)
    }

    /// Name the term that produced non-finite output (failure path only).
    fn diagnose_nan(&mut self, field: &WaveField) -> Error {
        if !field.all_finite() {
            return Error::NumericalFailure { term: "input field".into() };
        }
        for s in 0..field.spin_components() {
            self.buf.copy_from_slice(field.spin_block(s));
            self.engine.forward(&mut self.buf);
            self.engine.inverse(&mut self.buf);
            if self.buf.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
                return Error::NumericalFailure { term: "kinetic".into() };
            }
            for (i, a) in field.spin_block(s).iter().enumerate() {
                if !(self.v_at(i, s) * a).is_finite() {
                    return Error::NumericalFailure { term: "potential".into() };
                }
            }
        }
        Error::NumericalFailure { term: "nonlinear".into() }
    }

    /// Largest magnitude of the static potential over the grid (both spin
    /// signs), used for time-step selection.
    pub fn potential_max_abs(&self) -> f64 {
        let mut vmax: f64 = 0.0;
        for i in 0..self.v_static.len() {
            let base = self.v_static[i];
            match &self.v_spin {
                Some(vs) => {
                    vmax = vmax.max((base + vs[i]).abs()).max((base - vs[i]).abs());
                }
                None => vmax = vmax.max(base.abs()),
            }
        }
        vmax
    }

    /// Analytic lower bound of H_QM on this grid: the kinetic term is
    /// nonnegative and the potential is bounded by its table minimum.
    pub fn h_qm_floor(&self) -> f64 {
        let mut vmin = f64::INFINITY;
        for i in 0..self.v_static.len() {
            let base = self.v_static[i];
            let v = match &self.v_spin {
                Some(vs) => (base + vs[i]).min(base - vs[i]),
                None => base,
            };
            if v < vmin {
                vmin = v;
            }
        }
        vmin.min(0.0)
    }

    pub(crate) fn engine_mut(&mut self) -> &mut SpectralEngine {
        &mut self.engine
    }

    pub(crate) fn kin_axis(&self) -> &[Vec<f64>] {
        &self.kin_axis
    }

    pub(crate) fn ksum_axis(&self) -> Option<&[Vec<f64>]> {
        self.ksum_axis.as_deref()
    }

    pub(crate) fn coord_sum_table(&self) -> Option<&[f64]> {
        self.coord_sum.as_deref()
    }

    pub(crate) fn v_static_table(&self) -> &[f64] {
        &self.v_static
    }

    pub(crate) fn v_spin_table(&self) -> Option<&[f64]> {
        self.v_spin.as_deref()
    }

    pub(crate) fn nl_mean(&mut self, field: &WaveField) -> Option<(f64, f64)> {
        match &self.ham.nonlinear {
            NonlinearTerm::Off => None,
            NonlinearTerm::Position { w, .. } => {
                let (m1, _) = self.coord_sum_moments(field);
                Some((*w, m1))
            }
            NonlinearTerm::Momentum { w, .. } => {
                let w = *w;
                let (m1, _) = self.momentum_sum_moments(field);
                Some((w, m1))
            }
        }
    }
}

/// Quadratic energy functional of `field` under `ham`.
pub fn h_qm(field: &WaveField, ham: &HamiltonianSpec) -> Result<f64> {
    Operator::new(field.grid(), ham)?.h_qm(field)
}

/// Nonlinear energy functional of `field` under `ham`.
pub fn h_nl(field: &WaveField, ham: &HamiltonianSpec) -> Result<f64> {
    Operator::new(field.grid(), ham)?.h_nl(field)
}

/// Pointwise effective potential of the position-form term with coupling
/// `w` over the coordinate subset `coords`.
pub fn effective_nl_potential(field: &WaveField, w: f64, coords: &[usize]) -> Result<Vec<f64>> {
    let ham = HamiltonianSpec {
        hbar: 1.0,
        masses: vec![1.0; field.n_axes()],
        potentials: Vec::new(),
        nonlinear: NonlinearTerm::Position {
            w,
            coords: coords.to_vec(),
        },
    };
    Operator::new(field.grid(), &ham)?.effective_nl_potential(field)
}

/// Right-hand side (1/i hbar) dH/dpsi* of the evolution equation.
pub fn rhs(field: &WaveField, ham: &HamiltonianSpec) -> Result<WaveField> {
    Operator::new(field.grid(), ham)?.rhs(field)
}
