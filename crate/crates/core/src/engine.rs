//! Time evolution under pulsed and free phases.
//!
//! A pulsed phase repeats [free propagation for τ, instantaneous pulse P].
//! A free phase evolves continuously under the full Hamiltonian. Energies are
//! sampled as E^c = ⟨H^mc ⊗ 1⟩ and E^b = ⟨1 ⊗ H^b⟩.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use thiserror::Error;

use crate::model::{
    build_hmc, build_hmcb, pulse_operator, initial_state, ModelError, ModelParams,
};
use crate::qcore::{
    expectation_raw, herm_eig, kron, propagator, unitary_eig, ComplexMatrix, EigenDecomposition,
    LinalgError, StateVector, UnitarySpectrum, C64,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("schedule has no phases")]
    ScheduleEmpty,
    #[error("phase {index}: {reason}")]
    InvalidPhase { index: usize, reason: String },
    #[error("invalid sampling: {0}")]
    InvalidSampling(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("battery frequency {found} inconsistent with {regime} regime (expected {expected})")]
    RegimeMismatch {
        regime: &'static str,
        expected: f64,
        found: f64,
    },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseKind {
    /// Pulses every `tau`, the first after one full interval.
    Pulsed { tau: f64 },
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phase {
    pub kind: PhaseKind,
    pub duration: f64,
}

impl Phase {
    pub fn free(duration: f64) -> Self {
        Self {
            kind: PhaseKind::Free,
            duration,
        }
    }

    pub fn pulsed(tau: f64, duration: f64) -> Self {
        Self {
            kind: PhaseKind::Pulsed { tau },
            duration,
        }
    }

    pub fn is_pulsed(&self) -> bool {
        matches!(self.kind, PhaseKind::Pulsed { .. })
    }
}

/// Validated phase list. Pulsed durations are rounded down to a whole number
/// of inter-pulse intervals; [`phases`](Self::phases) reports the actual ones.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSchedule {
    requested: Vec<Phase>,
    actual: Vec<Phase>,
    pulse_counts: Vec<usize>,
}

impl PulseSchedule {
    pub fn new(phases: Vec<Phase>) -> Result<Self, EngineError> {
        if phases.is_empty() {
            return Err(EngineError::ScheduleEmpty);
        }
        let mut actual = Vec::with_capacity(phases.len());
        let mut pulse_counts = Vec::with_capacity(phases.len());
        for (index, phase) in phases.iter().enumerate() {
            if !(phase.duration.is_finite() && phase.duration > 0.0) {
                return Err(EngineError::InvalidPhase {
                    index,
                    reason: format!("duration must be > 0, got {}", phase.duration),
                });
            }
            match phase.kind {
                PhaseKind::Free => {
                    actual.push(*phase);
                    pulse_counts.push(0);
                }
                PhaseKind::Pulsed { tau } => {
                    if !(tau.is_finite() && tau > 0.0) {
                        return Err(EngineError::InvalidPhase {
                            index,
                            reason: format!("pulse interval must be > 0, got {tau}"),
                        });
                    }
                    // Relative slack absorbs round-off in durations given as k·τ.
                    let n = (phase.duration / tau * (1.0 + 1e-12)).floor() as usize;
                    if n == 0 {
                        return Err(EngineError::InvalidPhase {
                            index,
                            reason: format!(
                                "duration {} shorter than one pulse interval {tau}",
                                phase.duration
                            ),
                        });
                    }
                    actual.push(Phase::pulsed(tau, n as f64 * tau));
                    pulse_counts.push(n);
                }
            }
        }
        Ok(Self {
            requested: phases,
            actual,
            pulse_counts,
        })
    }

    pub fn single_pulsed(tau: f64, n_pulses: usize) -> Result<Self, EngineError> {
        Self::new(vec![Phase::pulsed(tau, n_pulses as f64 * tau)])
    }

    pub fn phases(&self) -> &[Phase] {
        &self.actual
    }

    pub fn requested(&self) -> &[Phase] {
        &self.requested
    }

    /// Pulses in each phase (0 for free phases).
    pub fn pulse_counts(&self) -> &[usize] {
        &self.pulse_counts
    }

    pub fn total_duration(&self) -> f64 {
        self.actual.iter().map(|p| p.duration).sum()
    }
}

/// Sampling strides for [`run_schedule`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sampling {
    /// Sample spacing inside free phases; `None` means π/(200g).
    pub free_dt: Option<f64>,
    /// Sample every this many pulses inside pulsed phases.
    pub pulse_stride: usize,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            free_dt: None,
            pulse_stride: 1,
        }
    }
}

impl Sampling {
    pub fn free_dt_for(&self, p: &ModelParams) -> f64 {
        self.free_dt.unwrap_or(PI / (200.0 * p.g()))
    }

    fn validate(&self, p: &ModelParams) -> Result<(), EngineError> {
        let dt = self.free_dt_for(p);
        if !(dt.is_finite() && dt > 0.0) {
            return Err(EngineError::InvalidSampling(format!("free_dt must be > 0, got {dt}")));
        }
        if self.pulse_stride == 0 {
            return Err(EngineError::InvalidSampling("pulse_stride must be >= 1".into()));
        }
        Ok(())
    }
}

/// Sampled (t, E^c, E^b) with the index of the phase each sample belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTimeSeries {
    pub times: Vec<f64>,
    pub ec: Vec<f64>,
    pub eb: Vec<f64>,
    pub phase_index: Vec<usize>,
    g: f64,
}

impl EnergyTimeSeries {
    /// Checks equal lengths and strictly increasing times. `g` sets the
    /// gt/π axis.
    pub fn new(
        times: Vec<f64>,
        ec: Vec<f64>,
        eb: Vec<f64>,
        phase_index: Vec<usize>,
        g: f64,
    ) -> Result<Self, EngineError> {
        let n = times.len();
        if ec.len() != n || eb.len() != n || phase_index.len() != n {
            return Err(EngineError::InvalidArgument("series columns differ in length".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(EngineError::InvalidArgument("times must be strictly increasing".into()));
        }
        Ok(Self {
            times,
            ec,
            eb,
            phase_index,
            g,
        })
    }

    fn with_capacity(g: f64, cap: usize) -> Self {
        Self {
            times: Vec::with_capacity(cap),
            ec: Vec::with_capacity(cap),
            eb: Vec::with_capacity(cap),
            phase_index: Vec::with_capacity(cap),
            g,
        }
    }

    fn push(&mut self, t: f64, ec: f64, eb: f64, phase: usize) {
        self.times.push(t);
        self.ec.push(ec);
        self.eb.push(eb);
        self.phase_index.push(phase);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn gt_over_pi(&self, i: usize) -> f64 {
        self.g * self.times[i] / PI
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("non-empty series")
    }

    pub fn max_eb(&self) -> f64 {
        self.eb.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Sample indices belonging to phase `k`.
    pub fn phase_range(&self, k: usize) -> std::ops::Range<usize> {
        let start = self.phase_index.iter().position(|&p| p == k).unwrap_or(self.len());
        let end = self.phase_index.iter().rposition(|&p| p == k).map_or(start, |e| e + 1);
        start..end
    }
}

/// Evolution result plus the final state for chaining.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub series: EnergyTimeSeries,
    pub final_state: StateVector,
}

/// Observables in the 8-dimensional space, evaluated on raw amplitudes.
struct EnergyProbe {
    hmc_full: ComplexMatrix,
    capacity: f64,
}

impl EnergyProbe {
    fn new(p: &ModelParams) -> Self {
        Self {
            hmc_full: kron(&build_hmc(p), &ComplexMatrix::identity(2)),
            capacity: p.battery_capacity(),
        }
    }

    fn charger(&self, psi: &[C64]) -> f64 {
        expectation_raw(psi, &self.hmc_full)
    }

    /// 2ω1 times the probability of battery excitation (odd basis indices).
    fn battery(&self, psi: &[C64]) -> f64 {
        self.capacity * psi.iter().skip(1).step_by(2).map(|z| z.norm_sqr()).sum::<f64>()
    }
}

/// Runs a schedule from the standard initial state `|v3⟩|0⟩`.
pub fn run_schedule(
    p: &ModelParams,
    schedule: &PulseSchedule,
    sampling: &Sampling,
) -> Result<RunOutput, EngineError> {
    run_schedule_from(p, schedule, sampling, &initial_state(p))
}

/// Exact piecewise-unitary evolution of `psi0` through `schedule`.
pub fn run_schedule_from(
    p: &ModelParams,
    schedule: &PulseSchedule,
    sampling: &Sampling,
    psi0: &StateVector,
) -> Result<RunOutput, EngineError> {
    sampling.validate(p)?;
    if psi0.dim() != 8 {
        return Err(LinalgError::DimensionMismatch {
            expected: 8,
            found: psi0.dim(),
        }
        .into());
    }
    let h = build_hmcb(p);
    let spectrum = herm_eig(&h)?;
    let pulse = pulse_operator(p, 3)?;
    let probe = EnergyProbe::new(p);
    let free_dt = sampling.free_dt_for(p);

    let mut series = EnergyTimeSeries::with_capacity(p.g(), 1024);
    let mut psi: Vec<C64> = psi0.amplitudes().to_vec();
    series.push(0.0, probe.charger(&psi), probe.battery(&psi), 0);
    let mut t0 = 0.0;

    for (k, (phase, &n_pulses)) in schedule
        .phases()
        .iter()
        .zip(schedule.pulse_counts())
        .enumerate()
    {
        match phase.kind {
            PhaseKind::Free => {
                psi = run_free_phase(&spectrum, &probe, &psi, t0, phase.duration, free_dt, k, &mut series);
            }
            PhaseKind::Pulsed { tau } => {
                let step = &pulse * &spectrum.reconstruct_with(|l| C64::from_polar(1.0, -l * tau));
                let mut scratch = vec![C64::new(0.0, 0.0); 8];
                for j in 1..=n_pulses {
                    step.mul_slice_into(&psi, &mut scratch);
                    std::mem::swap(&mut psi, &mut scratch);
                    if j % sampling.pulse_stride == 0 || j == n_pulses {
                        let t = t0 + j as f64 * tau;
                        series.push(t, probe.charger(&psi), probe.battery(&psi), k);
                    }
                }
            }
        }
        t0 += phase.duration;
    }

    Ok(RunOutput {
        series,
        final_state: StateVector::normalized(psi)?,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_free_phase(
    spectrum: &EigenDecomposition,
    probe: &EnergyProbe,
    psi: &[C64],
    t0: f64,
    duration: f64,
    dt: f64,
    phase: usize,
    series: &mut EnergyTimeSeries,
) -> Vec<C64> {
    let coeffs = spectrum.vectors.adjoint().mul_slice(psi);
    let mut rotated = vec![C64::new(0.0, 0.0); coeffs.len()];
    let mut out = vec![C64::new(0.0, 0.0); coeffs.len()];
    let mut evolve = |elapsed: f64, out: &mut Vec<C64>| {
        for ((r, c), &l) in rotated.iter_mut().zip(&coeffs).zip(&spectrum.values) {
            *r = c * C64::from_polar(1.0, -l * elapsed);
        }
        spectrum.vectors.mul_slice_into(&rotated, out);
    };
    let n_inner = (duration / dt * (1.0 - 1e-12)).ceil() as usize;
    for j in 1..n_inner {
        let elapsed = j as f64 * dt;
        evolve(elapsed, &mut out);
        series.push(t0 + elapsed, probe.charger(&out), probe.battery(&out), phase);
    }
    evolve(duration, &mut out);
    series.push(t0 + duration, probe.charger(&out), probe.battery(&out), phase);
    out
}

/// One-period evolution operator: pulse after free propagation for τ.
#[derive(Debug, Clone)]
pub struct FloquetOperator {
    pub matrix: ComplexMatrix,
    pub tau: f64,
}

impl FloquetOperator {
    pub fn apply(&self, psi: &StateVector) -> Vec<C64> {
        self.matrix.mul_slice(psi.amplitudes())
    }
}

/// `(P ⊗ 1)·e^{−iH^{mc}τ}` on m ⊗ c, or `(P ⊗ 1 ⊗ 1)·e^{−iH^{mcb}τ}` with the battery.
pub fn floquet_operator(
    p: &ModelParams,
    tau: f64,
    include_battery: bool,
) -> Result<FloquetOperator, EngineError> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(EngineError::InvalidArgument(format!("tau must be > 0, got {tau}")));
    }
    let (h, n) = if include_battery {
        (build_hmcb(p), 3)
    } else {
        (build_hmc(p), 2)
    };
    let matrix = &pulse_operator(p, n)? * &propagator(&h, tau)?;
    Ok(FloquetOperator { matrix, tau })
}

/// Single pulsed phase sampled at pulse boundaries, advanced through the
/// eigenphases of the one-period operator.
pub fn run_stroboscopic(
    p: &ModelParams,
    tau: f64,
    n_pulses: usize,
    sample_stride: usize,
) -> Result<EnergyTimeSeries, EngineError> {
    if n_pulses == 0 {
        return Err(EngineError::InvalidArgument("n_pulses must be >= 1".into()));
    }
    if sample_stride == 0 {
        return Err(EngineError::InvalidSampling("sample_stride must be >= 1".into()));
    }
    let floquet = floquet_operator(p, tau, true)?;
    let probe = EnergyProbe::new(p);
    let psi0 = initial_state(p);

    let capacity = n_pulses / sample_stride + 2;
    let mut series = EnergyTimeSeries::with_capacity(p.g(), capacity);
    series.push(0.0, probe.charger(psi0.amplitudes()), probe.battery(psi0.amplitudes()), 0);

    let sample_points = (1..=n_pulses).filter(|j| j % sample_stride == 0 || *j == n_pulses);
    let mut psi = vec![C64::new(0.0, 0.0); 8];
    match unitary_eig(&floquet.matrix)? {
        Some(spectrum) => {
            let coeffs = spectrum.coefficients(psi0.amplitudes());
            for j in sample_points {
                spectrum.power_apply(&coeffs, j as f64, &mut psi);
                series.push(j as f64 * tau, probe.charger(&psi), probe.battery(&psi), 0);
            }
        }
        None => {
            // Eigenbasis not resolvable: fall back to repeated application.
            stroboscopic_by_steps(&floquet.matrix, &probe, &psi0, tau, n_pulses, sample_stride, &mut series);
        }
    }
    Ok(series)
}

fn stroboscopic_by_steps(
    step: &ComplexMatrix,
    probe: &EnergyProbe,
    psi0: &StateVector,
    tau: f64,
    n_pulses: usize,
    stride: usize,
    series: &mut EnergyTimeSeries,
) {
    let mut psi = psi0.amplitudes().to_vec();
    let mut scratch = vec![C64::new(0.0, 0.0); psi.len()];
    for j in 1..=n_pulses {
        step.mul_slice_into(&psi, &mut scratch);
        std::mem::swap(&mut psi, &mut scratch);
        if j % stride == 0 || j == n_pulses {
            series.push(j as f64 * tau, probe.charger(&psi), probe.battery(&psi), 0);
        }
    }
}

/// Exposes the eigenphase path for inspection and tests.
pub fn floquet_spectrum(p: &ModelParams, tau: f64) -> Result<Option<UnitarySpectrum>, EngineError> {
    Ok(unitary_eig(&floquet_operator(p, tau, true)?.matrix)?)
}

/// RWA regimes with closed-form Rabi transfer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RabiRegime {
    /// No pulses, battery resonant with |v1⟩ ↔ |v3⟩: 2ω1 = λ3 − λ1, coupling g/√2.
    BareResonant,
    /// Dense pulsing, battery resonant with the frozen-modulator charger: 2ω1 = λ3, coupling g.
    PulsedDenseResonant,
}

impl RabiRegime {
    fn name(self) -> &'static str {
        match self {
            RabiRegime::BareResonant => "bare resonant",
            RabiRegime::PulsedDenseResonant => "pulsed dense resonant",
        }
    }

    /// Battery frequency the regime requires.
    pub fn required_omega1(self, p: &ModelParams) -> f64 {
        let l = p.lambdas();
        match self {
            RabiRegime::BareResonant => (l[2] - l[0]) / 2.0,
            RabiRegime::PulsedDenseResonant => l[2] / 2.0,
        }
    }

    pub fn effective_coupling(self, p: &ModelParams) -> f64 {
        match self {
            RabiRegime::BareResonant => p.g() * FRAC_1_SQRT_2,
            RabiRegime::PulsedDenseResonant => p.g(),
        }
    }
}

/// Two-level Rabi transfer `E^b = 2ω1·sin²(g_eff·t)`, `E^c = λ3 − E^b`.
pub fn rabi_oracle(p: &ModelParams, regime: RabiRegime, t: f64) -> Result<(f64, f64), EngineError> {
    let expected = regime.required_omega1(p);
    if (p.omega1() - expected).abs() > 1e-9 {
        return Err(EngineError::RegimeMismatch {
            regime: regime.name(),
            expected,
            found: p.omega1(),
        });
    }
    let eb = p.battery_capacity() * (regime.effective_coupling(p) * t).sin().powi(2);
    Ok((p.lambda3() - eb, eb))
}
