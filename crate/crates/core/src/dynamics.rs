//! Time integration of the nonlinear evolution equation with conservation
//! monitoring.
//!
//! Two steppers: classical RK4 on the full right-hand side (the
//! psi-dependent coefficient in V_NL is re-evaluated at every substage),
//! and Strang splitting (kinetic half steps around a full multiplicative
//! phase, with the nonlinear coefficient frozen at the step midpoint via a
//! predictor half-step). The split scheme preserves the norm per step by
//! construction since every potential factor is a pure phase.
//!
//! Norm drift is a diagnostic under test here, so `evolve` never
//! renormalizes; it aborts with a status instead.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hamiltonians::{HamiltonianSpec, NonlinearTerm, Operator};
use crate::observables;
use crate::wavefield::WaveField;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Rk4,
    SplitStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    AbortedNan,
    AbortedDrift,
}

#[derive(Debug, Clone)]
pub struct IntegratorConfig {
    pub method: Method,
    pub dt: f64,
    pub t_end: f64,
    /// Observables are sampled every this many steps (plus t = 0).
    pub sample_every: usize,
    /// Abort threshold on |norm_sq(t) - norm_sq(0)|.
    pub norm_drift_tol: f64,
    /// Abort threshold on relative |E(t) - E(0)|.
    pub energy_drift_tol: f64,
    /// Coordinate subset for X/D_N/L2/C2 sampling; `None` means all axes.
    pub observe_coords: Option<Vec<usize>>,
    /// Keep a copy of the field at every sample time.
    pub store_fields: bool,
}

impl IntegratorConfig {
    pub fn new(method: Method, dt: f64, t_end: f64, sample_every: usize) -> Self {
        IntegratorConfig {
            method,
            dt,
            t_end,
            sample_every,
            norm_drift_tol: 1e-6,
            energy_drift_tol: 1e-3,
            observe_coords: None,
            store_fields: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if self.t_end < self.dt {
            return Err(Error::InvalidParameter(format!(
                "t_end = {} shorter than one step dt = {}",
                self.t_end, self.dt
            )));
        }
        if self.sample_every == 0 {
            return Err(Error::InvalidParameter("sample_every must be >= 1".into()));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt + 1e-9).floor() as usize
    }
}

/// One row of sampled observables.
#[derive(Debug, Clone, Copy)]
pub struct Sample {
    pub t: f64,
    pub norm_sq: f64,
    pub e_total: f64,
    pub e_qm: f64,
    pub e_nl: f64,
    pub x: f64,
    pub p_total: f64,
    pub d_n: f64,
    pub l2: f64,
    pub c2: Option<f64>,
    /// Probability mass near the periodic boundary (edge-contact guard).
    pub edge_mass: f64,
}

/// Sampled time series of one evolution run.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub samples: Vec<Sample>,
    pub status: RunStatus,
    /// Field snapshots at sample times when requested.
    pub fields: Option<Vec<WaveField>>,
    /// The field after the last successful step (absent after a
    /// non-finite failure).
    pub final_field: Option<WaveField>,
}

impl TrajectoryRecord {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn norm_drift(&self) -> f64 {
        let n0 = self.samples[0].norm_sq;
        self.samples
            .iter()
            .map(|s| (s.norm_sq - n0).abs())
            .fold(0.0, f64::max)
    }

    pub fn energy_drift_rel(&self) -> f64 {
        let e0 = self.samples[0].e_total;
        let denom = e0.abs().max(1e-12);
        self.samples
            .iter()
            .map(|s| (s.e_total - e0).abs() / denom)
            .fold(0.0, f64::max)
    }

    pub fn momentum_drift_rel(&self) -> f64 {
        let p0 = self.samples[0].p_total;
        let denom = p0.abs().max(1e-12);
        self.samples
            .iter()
            .map(|s| (s.p_total - p0).abs() / denom)
            .fold(0.0, f64::max)
    }

    pub fn max_e_nl(&self) -> f64 {
        self.samples.iter().map(|s| s.e_nl).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_d_n(&self) -> f64 {
        self.samples.iter().map(|s| s.d_n).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_edge_mass(&self) -> f64 {
        self.samples.iter().map(|s| s.edge_mass).fold(0.0, f64::max)
    }

    /// The cat-blocking bound: E_nl(t) <= E_total(0) - E_floor at every
    /// sample, within `slack`.
    pub fn nl_energy_within_budget(&self, e_floor: f64, slack: f64) -> bool {
        let budget = self.samples[0].e_total - e_floor;
        self.samples.iter().all(|s| s.e_nl <= budget + slack)
    }

    /// Concatenate a follow-on record (its t = 0 sample is dropped as the
    /// duplicate of our last sample; its times are shifted).
    pub fn extend_with(&mut self, next: TrajectoryRecord, t_offset: f64) {
        self.status = next.status;
        self.final_field = next.final_field;
        for s in next.samples.into_iter().skip(1) {
            let mut s = s;
            s.t += t_offset;
            self.samples.push(s);
        }
        if let (Some(ours), Some(theirs)) = (self.fields.as_mut(), next.fields) {
            ours.extend(theirs.into_iter().skip(1));
        }
    }
}

/// Step-size suggestion: min(0.05 m dx^2 / hbar, 0.05 hbar / V_max), with
/// V_max the largest static-plus-nonlinear potential magnitude on the
/// initial field.
pub fn default_dt(field: &WaveField, ham: &HamiltonianSpec) -> Result<f64> {
    let mut op = Operator::new(field.grid(), ham)?;
    let m_min = ham
        .masses
        .iter()
        .cloned()
        .filter(|m| m.is_finite())
        .fold(f64::INFINITY, f64::min);
    let dx_min = field
        .grid()
        .axes()
        .iter()
        .map(|a| a.dx())
        .fold(f64::INFINITY, f64::min);
    let mut dt = if m_min.is_finite() {
        0.05 * m_min * dx_min * dx_min / ham.hbar
    } else {
        f64::INFINITY
    };
    let mut v_max = op.potential_max_abs();
    if !ham.nonlinear.is_off() {
        if let NonlinearTerm::Position { .. } = ham.nonlinear {
            let v_nl = op.effective_nl_potential(field)?;
            v_max = v_nl.iter().fold(v_max, |m, &v| m.max(v.abs()));
        }
    }
    if v_max > 0.0 {
        dt = dt.min(0.05 * ham.hbar / v_max);
    }
    if !dt.is_finite() {
        return Err(Error::InvalidParameter(
            "cannot pick a default dt for a free massless system".into(),
        ));
    }
    Ok(dt)
}

/// One classical RK4 step on the full nonlinear right-hand side.
pub fn step_rk4(field: &WaveField, ham: &HamiltonianSpec, dt: f64) -> Result<WaveField> {
    let mut op = Operator::new(field.grid(), ham)?;
    rk4_step(&mut op, field, dt)
}

pub(crate) fn rk4_step(op: &mut Operator, field: &WaveField, dt: f64) -> Result<WaveField> {
    let one = Complex64::new(1.0, 0.0);
    let half = Complex64::new(0.5 * dt, 0.0);
    let full = Complex64::new(dt, 0.0);
    let k1 = op.rhs(field)?;
    let k2 = op.rhs(&WaveField::lin_comb(one, field, half, &k1)?)?;
    let k3 = op.rhs(&WaveField::lin_comb(one, field, half, &k2)?)?;
    let k4 = op.rhs(&WaveField::lin_comb(one, field, full, &k3)?)?;
    let sixth = dt / 6.0;
    let mut sum = WaveField::lin_comb(
        Complex64::new(sixth, 0.0),
        &k1,
        Complex64::new(2.0 * sixth, 0.0),
        &k2,
    )?;
    sum = WaveField::lin_comb(
        one,
        &sum,
        Complex64::new(2.0 * sixth, 0.0),
        &k3,
    )?;
    sum = WaveField::lin_comb(one, &sum, Complex64::new(sixth, 0.0), &k4)?;
    let out = WaveField::lin_comb(one, field, one, &sum)?;
    if !out.all_finite() {
        return Err(Error::NumericalFailure { term: "rk4 step".into() });
    }
    Ok(out)
}

/// Cached phase tables for the Strang splitting at a fixed dt.
pub(crate) struct SplitStepper {
    dt: f64,
    /// Position form: kinetic half-step phase; momentum form: full step.
    kin_phase: Vec<Complex64>,
    /// Static potential phase per spin component (full dt for position
    /// form, half dt for momentum form).
    v_phase: Vec<Vec<Complex64>>,
    momentum_form: bool,
}

impl SplitStepper {
    pub(crate) fn new(op: &mut Operator, spin_components: usize, dt: f64) -> Self {
        let momentum_form = matches!(op.ham().nonlinear, NonlinearTerm::Momentum { .. });
        let hbar = op.hbar();
        let grid = op.grid().clone();
        let n = grid.len();

        // Kinetic table in k-space: half step (position form) so the
        // multiplicative phase sits in the middle; full step for the
        // momentum form where the roles are swapped.
        let kin_dt = if momentum_form { dt } else { 0.5 * dt };
        let mut kin_phase = vec![Complex64::default(); n];
        {
            let kin_axis = op.kin_axis();
            grid.for_each_point(|flat, idx| {
                let t: f64 = idx.iter().enumerate().map(|(a, &i)| kin_axis[a][i]).sum();
                kin_phase[flat] = Complex64::new(0.0, -kin_dt * t / hbar).exp();
            });
        }

        let v_dt = if momentum_form { 0.5 * dt } else { dt };
        let v_static = op.v_static_table();
        let v_spin = op.v_spin_table();
        let mut v_phase = Vec::with_capacity(spin_components);
        for s in 0..spin_components {
            let mut table = vec![Complex64::default(); n];
            for i in 0..n {
                let mut v = v_static[i];
                if let Some(vs) = v_spin {
                    v += if s == 0 { vs[i] } else { -vs[i] };
                }
                table[i] = Complex64::new(0.0, -v_dt * v / hbar).exp();
            }
            v_phase.push(table);
        }

        SplitStepper {
            dt,
            kin_phase,
            v_phase,
            momentum_form,
        }
    }

    /// Advance one step. All potential factors are unit-modulus phases, so
    /// the norm is preserved to roundoff per step.
    pub(crate) fn step(&self, op: &mut Operator, field: &WaveField) -> Result<WaveField> {
        let mut out = field.clone();
        if self.momentum_form {
            self.apply_v(op, &mut out);
            self.apply_kinetic_and_momentum_nl(op, &mut out)?;
            self.apply_v(op, &mut out);
        } else {
            self.apply_kin_half(op, &mut out);
            self.apply_potential_with_nl(op, &mut out)?;
            self.apply_kin_half(op, &mut out);
        }
        if !out.all_finite() {
            return Err(Error::NumericalFailure { term: "split step".into() });
        }
        Ok(out)
    }

    fn apply_kin_half(&self, op: &mut Operator, field: &mut WaveField) {
        let n = field.grid().len();
        let n_spin = field.spin_components();
        for s in 0..n_spin {
            let range = s * n..(s + 1) * n;
            let block = &mut field.amplitudes_mut()[range];
            op.engine_mut().forward(block);
            for (v, p) in block.iter_mut().zip(self.kin_phase.iter()) {
                *v *= p;
            }
            op.engine_mut().inverse(block);
        }
    }

    /// Full potential phase including V_NL, with the mean coordinate sum
    /// frozen at the step midpoint (the incoming field already took its
    /// kinetic predictor half-step).
    fn apply_potential_with_nl(&self, op: &mut Operator, field: &mut WaveField) -> Result<()> {
        let nl = op.nl_mean(field);
        let n = field.grid().len();
        let n_spin = field.spin_components();
        let hbar = op.hbar();
        let coord_sum = op.coord_sum_table().map(|t| t.to_vec());
        for s in 0..n_spin {
            let range = s * n..(s + 1) * n;
            let block = &mut field.amplitudes_mut()[range];
            let table = &self.v_phase[s];
            match (&nl, &coord_sum) {
                (Some((w, m1)), Some(cs)) => {
                    for i in 0..n {
                        let v_nl = w * cs[i] * (cs[i] - 2.0 * m1);
                        let phase = Complex64::new(0.0, -self.dt * v_nl / hbar).exp();
                        block[i] *= table[i] * phase;
                    }
                }
                _ => {
                    for i in 0..n {
                        block[i] *= table[i];
                    }
                }
            }
        }
        Ok(())
    }

    fn apply_v(&self, _op: &mut Operator, field: &mut WaveField) {
        let n = field.grid().len();
        for s in 0..field.spin_components() {
            let range = s * n..(s + 1) * n;
            let block = &mut field.amplitudes_mut()[range];
            for (v, p) in block.iter_mut().zip(self.v_phase[s].iter()) {
                *v *= p;
            }
        }
    }

    /// Momentum form: the kinetic phase and the momentum-space nonlinear
    /// multiplier act together in k-space. The summed momentum is exactly
    /// conserved by this sub-flow, so its frozen value is self-consistent.
    fn apply_kinetic_and_momentum_nl(&self, op: &mut Operator, field: &mut WaveField) -> Result<()> {
        let (w, m1) = op
            .nl_mean(field)
            .expect("momentum-form stepper requires the nonlinear term");
        let hbar = op.hbar();
        let dt = self.dt;
        let n = field.grid().len();
        let grid = field.grid().clone();
        for s in 0..field.spin_components() {
            let range = s * n..(s + 1) * n;
            let block = &mut field.amplitudes_mut()[range];
            op.engine_mut().forward(block);
            {
                let ks = op.ksum_axis().expect("momentum-form tables");
                let kin_phase = &self.kin_phase;
                grid.for_each_point(|flat, idx| {
                    let p: f64 = idx.iter().enumerate().map(|(a, &i)| ks[a][i]).sum();
                    let w_nl = w * (p * p - 2.0 * m1 * p);
                    let phase = Complex64::new(0.0, -dt * w_nl / hbar).exp();
                    block[flat] *= kin_phase[flat] * phase;
                });
            }
            op.engine_mut().inverse(block);
        }
        Ok(())
    }
}

/// One Strang split step (kinetic half, full potential phase with the
/// midpoint-frozen nonlinear coefficient, kinetic half).
pub fn step_split(field: &WaveField, ham: &HamiltonianSpec, dt: f64) -> Result<WaveField> {
    let mut op = Operator::new(field.grid(), ham)?;
    let stepper = SplitStepper::new(&mut op, field.spin_components(), dt);
    stepper.step(&mut op, field)
}

/// Integrate and sample observables. Numerical failures are encoded in
/// the record status, never raised as errors.
pub fn evolve(
    field: &WaveField,
    ham: &HamiltonianSpec,
    cfg: &IntegratorConfig,
) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    let mut op = Operator::new(field.grid(), ham)?;
    let splitter = match cfg.method {
        Method::SplitStep => Some(SplitStepper::new(&mut op, field.spin_components(), cfg.dt)),
        Method::Rk4 => None,
    };

    let observe: Vec<usize> = cfg
        .observe_coords
        .clone()
        .unwrap_or_else(|| (0..field.n_axes()).collect());

    let mut samples = Vec::new();
    let mut fields = if cfg.store_fields { Some(Vec::new()) } else { None };
    let mut status = RunStatus::Completed;

    let mut current = field.clone();
    let mut take_sample = |psi: &WaveField, t: f64, op: &mut Operator| -> Result<Sample> {
        let norm_sq = psi.norm_sq();
        let e_qm = op.h_qm(psi)?;
        let e_nl = if ham.nonlinear.is_off() { 0.0 } else { op.h_nl(psi)? };
        let report = observables::moments(psi, &observe, ham.hbar)?;
        let p_all = observables::total_momentum(psi, ham.hbar)?;
        Ok(Sample {
            t,
            norm_sq,
            e_total: e_qm + e_nl,
            e_qm,
            e_nl,
            x: report.x,
            p_total: p_all,
            d_n: report.d_n,
            l2: report.l2,
            c2: report.c2,
            edge_mass: psi.edge_mass(2),
        })
    };

    let first = take_sample(&current, 0.0, &mut op)?;
    let norm0 = first.norm_sq;
    let e0 = first.e_total;
    samples.push(first);
    if let Some(f) = fields.as_mut() {
        f.push(current.clone());
    }

    let n_steps = cfg.n_steps();
    for step in 1..=n_steps {
        let next = match &splitter {
            Some(sp) => sp.step(&mut op, &current),
            None => rk4_step(&mut op, &current, cfg.dt),
        };
        match next {
            Ok(f) => current = f,
            Err(Error::NumericalFailure { .. }) => {
                status = RunStatus::AbortedNan;
                break;
            }
            Err(e) => return Err(e),
        }
        if step % cfg.sample_every == 0 {
            if !current.all_finite() {
                status = RunStatus::AbortedNan;
                break;
            }
            let s = take_sample(&current, step as f64 * cfg.dt, &mut op)?;
            let norm_drift = (s.norm_sq - norm0).abs();
            let energy_drift = (s.e_total - e0).abs() / e0.abs().max(1e-12);
            let drifted = norm_drift > cfg.norm_drift_tol || energy_drift > cfg.energy_drift_tol;
            samples.push(s);
            if let Some(f) = fields.as_mut() {
                f.push(current.clone());
            }
            if !s.norm_sq.is_finite() || !s.e_total.is_finite() {
                status = RunStatus::AbortedNan;
                break;
            }
            if drifted {
                status = RunStatus::AbortedDrift;
                break;
            }
        }
    }

    Ok(TrajectoryRecord {
        samples,
        status,
        fields,
    })
}

/// Final field of an evolution without sampling overhead (fixed step
/// count); used by cross-method comparisons.
pub fn propagate(
    field: &WaveField,
    ham: &HamiltonianSpec,
    method: Method,
    dt: f64,
    n_steps: usize,
) -> Result<WaveField> {
    let mut op = Operator::new(field.grid(), ham)?;
    let splitter = match method {
        Method::SplitStep => Some(SplitStepper::new(&mut op, field.spin_components(), dt)),
        Method::Rk4 => None,
    };
    let mut current = field.clone();
    for _ in 0..n_steps {
        current = match &splitter {
            Some(sp) => sp.step(&mut op, &current)?,
            None => rk4_step(&mut op, &current, dt)?,
        };
    }
    Ok(current)
}
