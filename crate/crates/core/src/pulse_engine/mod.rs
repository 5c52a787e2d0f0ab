//! Pulse-sequence execution on a hybrid triplet state.
//!
//! The triplet manifold is carried as a 3×3 density matrix (coherent
//! control), the singlet levels as classical populations. Laser, wait and
//! readout elements run the incoherent kinetics exactly; microwave elements
//! apply rotating-wave rotations to the density matrix. ISC only feeds the
//! diagonal of the triplet block, and coherences decay at the mean decay
//! rate of the two levels plus an optional pure-dephasing rate.
//!
//! The density matrix is expressed in the eigenbasis of the static
//! Hamiltonian, ordered by zero-field character (Tx, Ty, Tz), and in the
//! interaction picture of that Hamiltonian: free evolution only damps
//! coherences. At zero field this is the {Tx, Ty, Tz} basis itself.

mod protocols;

pub use protocols::*;

use log::warn;
use nalgebra::Vector3;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::linalg::{hermitian_eigen, hermiticity_error, CMatrix3, C64};
use crate::photokinetics::{
    integrated_fluorescence, propagate_vector, steady_state, KineticRates, LevelPopulations,
    PopulationVector, ReadoutParams,
};
use crate::rng::stream_rng;
use crate::spin_model::{
    build_hamiltonian, eigensystem, transition_frequencies, FieldVector, GyroRatio, TransitionPair,
    ZfsParams,
};

/// One element of a pulse sequence. Durations in s, frequencies in Hz,
/// phases in rad.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PulseElement {
    Laser {
        duration: f64,
        /// Multiplies the configured pump rate.
        intensity: f64,
    },
    Mw {
        transition: TransitionPair,
        rabi_freq: f64,
        duration: f64,
        phase: f64,
        detuning: f64,
    },
    Wait {
        duration: f64,
    },
    Readout {
        duration: f64,
    },
}

impl PulseElement {
    pub fn laser(duration: f64) -> Self {
        PulseElement::Laser {
            duration,
            intensity: 1.0,
        }
    }

    pub fn wait(duration: f64) -> Self {
        PulseElement::Wait { duration }
    }

    pub fn readout(duration: f64) -> Self {
        PulseElement::Readout { duration }
    }

    /// Resonant pulse rotating by `angle` (rad) about an axis at `phase`.
    pub fn rotation(transition: TransitionPair, rabi_freq: f64, angle: f64, phase: f64) -> Self {
        PulseElement::Mw {
            transition,
            rabi_freq,
            duration: angle / (2.0 * std::f64::consts::PI * rabi_freq),
            phase,
            detuning: 0.0,
        }
    }

    pub fn pi(transition: TransitionPair, rabi_freq: f64) -> Self {
        Self::rotation(transition, rabi_freq, std::f64::consts::PI, 0.0)
    }

    pub fn duration(&self) -> f64 {
        match *self {
            PulseElement::Laser { duration, .. }
            | PulseElement::Mw { duration, .. }
            | PulseElement::Wait { duration }
            | PulseElement::Readout { duration } => duration,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.duration();
        ensure_finite("duration", d)?;
        if d < 0.0 {
            return Err(Error::invalid(format!(
                "pulse duration must be >= 0, got {d}"
            )));
        }
        match *self {
            PulseElement::Laser { intensity, .. } => {
                ensure_finite("intensity", intensity)?;
                if intensity < 0.0 {
                    return Err(Error::invalid("laser intensity must be >= 0"));
                }
            }
            PulseElement::Mw {
                rabi_freq,
                phase,
                detuning,
                ..
            } => {
                ensure_finite("rabi_freq", rabi_freq)?;
                ensure_finite("phase", phase)?;
                ensure_finite("detuning", detuning)?;
                if rabi_freq < 0.0 {
                    return Err(Error::invalid("rabi_freq must be >= 0"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// The same element with the microwave amplitude switched off.
    pub fn without_mw(&self) -> Self {
        match *self {
            PulseElement::Mw {
                transition,
                duration,
                phase,
                detuning,
                ..
            } => PulseElement::Mw {
                transition,
                rabi_freq: 0.0,
                duration,
                phase,
                detuning,
            },
            other => other,
        }
    }
}

/// How the sequence's readouts turn into a contrast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Detection {
    /// Readout number `readout` (counted among Readout elements) against the
    /// same readout of an identical run with all microwave amplitudes zero.
    MwOffReference { readout: usize },
    /// Ratio of two readouts of the same run.
    Readouts { signal: usize, reference: usize },
}

impl Default for Detection {
    fn default() -> Self {
        Detection::MwOffReference { readout: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub elements: Vec<PulseElement>,
    pub repetitions: u32,
    pub detection: Detection,
}

impl PulseSequence {
    pub fn new(elements: Vec<PulseElement>) -> Result<Self> {
        let seq = PulseSequence {
            elements,
            repetitions: 1,
            detection: Detection::default(),
        };
        seq.validate()?;
        Ok(seq)
    }

    pub fn with_detection(mut self, detection: Detection) -> Result<Self> {
        self.detection = detection;
        self.validate()?;
        Ok(self)
    }

    pub fn with_repetitions(mut self, repetitions: u32) -> Result<Self> {
        self.repetitions = repetitions;
        self.validate()?;
        Ok(self)
    }

    pub fn readout_count(&self) -> usize {
        self.elements
            .iter()
            .filter(|e| matches!(e, PulseElement::Readout { .. }))
            .count()
    }

    pub fn validate(&self) -> Result<()> {
        if self.elements.is_empty() {
            return Err(Error::invalid("pulse sequence is empty"));
        }
        if self.repetitions == 0 {
            return Err(Error::invalid("repetitions must be >= 1"));
        }
        for e in &self.elements {
            e.validate()?;
        }
        let n = self.readout_count();
        if n == 0 {
            return Err(Error::invalid("pulse sequence has no readout"));
        }
        let max_index = match self.detection {
            Detection::MwOffReference { readout } => readout,
            Detection::Readouts { signal, reference } => signal.max(reference),
        };
        if max_index >= n {
            return Err(Error::invalid(format!(
                "detection refers to readout {max_index} but the sequence has {n}"
            )));
        }
        Ok(())
    }

    pub fn total_duration(&self) -> f64 {
        self.elements
            .iter()
            .map(PulseElement::duration)
            .sum::<f64>()
            * self.repetitions as f64
    }
}

/// 3×3 triplet density matrix; its trace is the triplet population share.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripletDensityMatrix(pub CMatrix3);

impl TripletDensityMatrix {
    pub fn zero() -> Self {
        TripletDensityMatrix(CMatrix3::zeros())
    }

    pub fn diagonal(p: [f64; 3]) -> Self {
        TripletDensityMatrix(CMatrix3::from_diagonal(&Vector3::new(
            C64::new(p[0], 0.0),
            C64::new(p[1], 0.0),
            C64::new(p[2], 0.0),
        )))
    }

    pub fn populations(&self) -> [f64; 3] {
        [self.0[(0, 0)].re, self.0[(1, 1)].re, self.0[(2, 2)].re]
    }

    pub fn trace(&self) -> f64 {
        self.populations().iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let scale = self.0.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return Ok(());
        }
        let dev = (self.0 - self.0.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if dev > 1e-10 {
            return Err(Error::invalid(format!(
                "density matrix not Hermitian (deviation {dev:.3e})"
            )));
        }
        let (vals, _) = hermitian_eigen(&self.0)?;
        if vals[0] < -1e-10 {
            return Err(Error::invalid(format!(
                "density matrix not positive semidefinite (eigenvalue {:.3e})",
                vals[0]
            )));
        }
        Ok(())
    }
}

/// Singlet populations plus the triplet density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridState {
    pub s0: f64,
    pub s1: f64,
    pub rho: TripletDensityMatrix,
}

impl HybridState {
    pub fn from_populations(p: &LevelPopulations) -> Self {
        HybridState {
            s0: p.s0,
            s1: p.s1,
            rho: TripletDensityMatrix::diagonal(p.triplet()),
        }
    }

    pub fn populations(&self) -> LevelPopulations {
        let t = self.rho.populations();
        LevelPopulations {
            s0: self.s0,
            s1: self.s1,
            x: t[0],
            y: t[1],
            z: t[2],
        }
    }

    pub fn total(&self) -> f64 {
        self.s0 + self.s1 + self.rho.trace()
    }

    fn population_vector(&self) -> PopulationVector {
        self.populations().to_vector()
    }
}

/// Two-level rotating-wave propagator embedded in the triplet space.
///
/// In the addressed subspace (a, b) the Hamiltonian (Hz) is
/// `[[-Δ/2, Ω/2·e^{-iφ}], [Ω/2·e^{iφ}, Δ/2]]`; the spectator level is left
/// untouched.
pub fn mw_propagator(
    transition: TransitionPair,
    rabi_freq: f64,
    duration: f64,
    phase: f64,
    detuning: f64,
) -> CMatrix3 {
    let (a, b) = transition.indices();
    let mut u = CMatrix3::identity();
    let generalized = (rabi_freq * rabi_freq + detuning * detuning).sqrt();
    if generalized == 0.0 || duration == 0.0 {
        return u;
    }
    let angle = std::f64::consts::PI * generalized * duration;
    let (s, c) = angle.sin_cos();
    let i = C64::new(0.0, 1.0);
    // U = cos(θ)·1 - i sin(θ)·(2H/Ω')
    let nz = detuning / generalized;
    let nperp = rabi_freq / generalized;
    u[(a, a)] = C64::new(c, 0.0) - i * s * (-nz);
    u[(b, b)] = C64::new(c, 0.0) - i * s * nz;
    u[(a, b)] = -i * s * nperp * C64::from_polar(1.0, -phase);
    u[(b, a)] = -i * s * nperp * C64::from_polar(1.0, phase);
    u
}

pub fn apply_mw_rotation(
    rho: &TripletDensityMatrix,
    transition: TransitionPair,
    rabi_freq: f64,
    duration: f64,
    phase: f64,
    detuning: f64,
) -> Result<TripletDensityMatrix> {
    PulseElement::Mw {
        transition,
        rabi_freq,
        duration,
        phase,
        detuning,
    }
    .validate()?;
    let u = mw_propagator(transition, rabi_freq, duration, phase, detuning);
    Ok(TripletDensityMatrix(u * rho.0 * u.adjoint()))
}

/// Everything the engine needs to know about the physical system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub zfs: ZfsParams,
    pub field: FieldVector,
    pub gamma: GyroRatio,
    pub kinetics: KineticRates,
    pub readout: ReadoutParams,
    /// Pure-dephasing time of triplet coherences during free evolution, s.
    pub dephasing_time: Option<f64>,
    /// Relative Gaussian noise added to each readout's photon count.
    pub count_noise: f64,
}

impl SystemParams {
    pub fn new(zfs: ZfsParams, kinetics: KineticRates) -> Self {
        SystemParams {
            zfs,
            field: FieldVector::zero(),
            gamma: GyroRatio::ELECTRON,
            kinetics,
            readout: ReadoutParams::default(),
            dephasing_time: None,
            count_noise: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.zfs.validate()?;
        self.field.validate()?;
        self.kinetics.validate()?;
        self.readout.validate()?;
        if let Some(t) = self.dephasing_time {
            ensure_finite("dephasing_time", t)?;
            if t <= 0.0 {
                return Err(Error::invalid("dephasing_time must be > 0"));
            }
        }
        ensure_finite("count_noise", self.count_noise)?;
        if self.count_noise < 0.0 {
            return Err(Error::invalid("count_noise must be >= 0"));
        }
        Ok(())
    }
}

/// One sample of the time-resolved trace, taken at the end of each element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceSample {
    pub time: f64,
    pub populations: LevelPopulations,
}

/// Outcome of executing a list of elements from a given state.
#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub state: HybridState,
    /// Photon counts of each Readout element, in order.
    pub readouts: Vec<f64>,
    pub trace: Vec<TraceSample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceResult {
    /// Contrast of the signal readout against its reference.
    pub signal: f64,
    pub signal_counts: f64,
    pub reference_counts: f64,
    pub final_state: HybridState,
    pub trace: Vec<TraceSample>,
}

/// Executes pulse elements for a fixed physical system.
#[derive(Debug, Clone)]
pub struct PulseEngine {
    params: SystemParams,
    /// Kinetics of the field-mixed eigenstates, ordered by zero-field label.
    level_rates: KineticRates,
    /// Transition frequencies (Hz) ordered XY, YZ, XZ.
    transitions: [f64; 3],
}

impl PulseEngine {
    pub fn new(params: SystemParams) -> Result<Self> {
        params.validate()?;
        let h = build_hamiltonian(params.zfs, params.field, params.gamma)?;
        let eig = eigensystem(&h)?;
        let vectors = eig.vectors_by_label();
        let mut weights = [[0.0; 3]; 3];
        for (c, row) in weights.iter_mut().enumerate() {
            for (n, cell) in row.iter_mut().enumerate() {
                *cell = vectors[(c, n)].norm_sqr();
            }
        }
        let level_rates = params.kinetics.mixed(&weights);
        let transitions = transition_frequencies(&eig).map(|t| t.frequency);
        Ok(PulseEngine {
            params,
            level_rates,
            transitions,
        })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn level_rates(&self) -> &KineticRates {
        &self.level_rates
    }

    pub fn transition_frequency(&self, pair: TransitionPair) -> f64 {
        self.transitions[pair.index()]
    }

    /// Laser-on steady state with a diagonal triplet block.
    pub fn steady_state(&self) -> HybridState {
        HybridState::from_populations(&steady_state(&self.level_rates).expect("validated rates"))
    }

    fn coherence_decay(&self, duration: f64) -> [[f64; 3]; 3] {
        let k = self.level_rates.decay_rates();
        let dephasing = self.params.dephasing_time.map_or(0.0, |t| 1.0 / t);
        let mut out = [[1.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                if i != j {
                    *cell = (-duration * (0.5 * (k[i] + k[j]) + dephasing)).exp();
                }
            }
        }
        out
    }

    /// Incoherent evolution with the laser at `intensity` (0 = off).
    /// Returns the new state and the photons collected if `count` is set.
    fn evolve(
        &self,
        state: &HybridState,
        duration: f64,
        intensity: f64,
        count: bool,
    ) -> (HybridState, f64) {
        if duration == 0.0 {
            return (*state, 0.0);
        }
        let rates = KineticRates {
            pump_rate: self.level_rates.pump_rate * intensity,
            ..self.level_rates
        };
        let laser_on = intensity > 0.0;
        let p = state.population_vector();
        let (photons, p) = if count {
            integrated_fluorescence(&rates, &self.params.readout, duration, &p)
        } else {
            (0.0, propagate_vector(&rates, laser_on, duration, &p))
        };
        let decay = self.coherence_decay(duration);
        let mut rho = state.rho.0;
        for i in 0..3 {
            for j in 0..3 {
                rho[(i, j)] = if i == j {
                    C64::new(p[2 + i], 0.0)
                } else {
                    rho[(i, j)] * decay[i][j]
                };
            }
        }
        (
            HybridState {
                s0: p[0],
                s1: p[1],
                rho: TripletDensityMatrix(rho),
            },
            photons,
        )
    }

    /// Applies one element. Microwave elements are treated as instantaneous
    /// on the kinetic timescale: they rotate the density matrix only.
    pub fn apply(
        &self,
        element: &PulseElement,
        state: &HybridState,
    ) -> Result<(HybridState, Option<f64>)> {
        element.validate()?;
        match *element {
            PulseElement::Laser {
                duration,
                intensity,
            } => Ok((self.evolve(state, duration, intensity, false).0, None)),
            PulseElement::Wait { duration } => {
                Ok((self.evolve(state, duration, 0.0, false).0, None))
            }
            PulseElement::Readout { duration } => {
                let (s, photons) = self.evolve(state, duration, 1.0, true);
                Ok((s, Some(photons)))
            }
            PulseElement::Mw {
                transition,
                rabi_freq,
                duration,
                phase,
                detuning,
            } => {
                let f = self.transition_frequency(transition);
                if rabi_freq > 0.1 * f {
                    warn!(
                        "Rabi frequency {:.3e} Hz exceeds 10% of the {transition} transition ({:.3e} Hz); \
                         rotating-wave approximation is questionable",
                        rabi_freq, f
                    );
                }
                let rho = apply_mw_rotation(
                    &state.rho, transition, rabi_freq, duration, phase, detuning,
                )?;
                Ok((HybridState { rho, ..*state }, None))
            }
        }
    }

    /// Runs the elements in order from `initial`.
    pub fn execute(&self, elements: &[PulseElement], initial: &HybridState) -> Result<Execution> {
        let mut state = *initial;
        let mut readouts = Vec::new();
        let mut trace = Vec::with_capacity(elements.len());
        let mut time = 0.0;
        for e in elements {
            let (next, photons) = self.apply(e, &state)?;
            state = next;
            if let Some(p) = photons {
                readouts.push(p);
            }
            time += e.duration();
            trace.push(TraceSample {
                time,
                populations: state.populations(),
            });
        }
        Ok(Execution {
            state,
            readouts,
            trace,
        })
    }

    fn execute_repeated(
        &self,
        seq: &PulseSequence,
        initial: &HybridState,
        mw_off: bool,
    ) -> Result<Execution> {
        let elements: Vec<PulseElement> = if mw_off {
            seq.elements.iter().map(PulseElement::without_mw).collect()
        } else {
            seq.elements.clone()
        };
        let mut state = *initial;
        let mut readouts = vec![0.0; seq.readout_count()];
        let mut trace = Vec::new();
        let mut offset = 0.0;
        for _ in 0..seq.repetitions {
            let run = self.execute(&elements, &state)?;
            for (acc, r) in readouts.iter_mut().zip(&run.readouts) {
                *acc += r;
            }
            trace.extend(run.trace.iter().map(|s| TraceSample {
                time: s.time + offset,
                ..*s
            }));
            offset += elements.iter().map(PulseElement::duration).sum::<f64>();
            state = run.state;
        }
        Ok(Execution {
            state,
            readouts,
            trace,
        })
    }

    /// Runs a sequence from `initial` and forms its contrast. Count noise, if
    /// enabled, is drawn from random stream `stream` of `seed`.
    pub fn run_from(
        &self,
        seq: &PulseSequence,
        initial: &HybridState,
        seed: u64,
        stream: u64,
    ) -> Result<SequenceResult> {
        seq.validate()?;
        check_state(initial)?;
        let run = self.execute_repeated(seq, initial, false)?;
        let (mut signal, mut reference) = match seq.detection {
            Detection::MwOffReference { readout } => {
                let off = self.execute_repeated(seq, initial, true)?;
                (run.readouts[readout], off.readouts[readout])
            }
            Detection::Readouts { signal, reference } => {
                (run.readouts[signal], run.readouts[reference])
            }
        };
        if self.params.count_noise > 0.0 {
            let normal = Normal::new(0.0, self.params.count_noise).expect("validated noise level");
            let mut rng = stream_rng(seed, stream);
            signal *= 1.0 + normal.sample(&mut rng);
            reference *= 1.0 + normal.sample(&mut rng);
        }
        if reference <= 0.0 {
            return Err(Error::DegenerateReadout);
        }
        Ok(SequenceResult {
            signal: signal / reference,
            signal_counts: signal,
            reference_counts: reference,
            final_state: run.state,
            trace: run.trace,
        })
    }
}

/// Runs a sequence starting from the laser-on steady state.
pub fn run_sequence(
    seq: &PulseSequence,
    system: &SystemParams,
    seed: u64,
) -> Result<SequenceResult> {
    let engine = PulseEngine::new(*system)?;
    let start = engine.steady_state();
    engine.run_from(seq, &start, seed, 0)
}

pub(crate) fn check_state(state: &HybridState) -> Result<()> {
    if hermiticity_error(&state.rho.0) > 1e-9 {
        return Err(Error::invalid("triplet density matrix lost Hermiticity"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn diag_state() -> TripletDensityMatrix {
        TripletDensityMatrix::diagonal([0.2, 0.5, 0.1])
    }

    #[test]
    fn pi_pulse_swaps_populations() {
        let rho = diag_state();
        let omega = 10e6;
        let out =
            apply_mw_rotation(&rho, TransitionPair::YZ, omega, 0.5 / omega, 0.0, 0.0).unwrap();
        let p = out.populations();
        assert_relative_eq!(p[0], 0.2, epsilon = 1e-15);
        assert_relative_eq!(p[1], 0.1, epsilon = 1e-14);
        assert_relative_eq!(p[2], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn two_pi_is_identity_on_block_states() {
        let mut rho = diag_state();
        rho.0[(1, 2)] = C64::new(0.05, 0.02);
        rho.0[(2, 1)] = C64::new(0.05, -0.02);
        let omega = 7e6;
        let out =
            apply_mw_rotation(&rho, TransitionPair::YZ, omega, 1.0 / omega, 0.3, 0.0).unwrap();
        assert!((out.0 - rho.0).iter().all(|z| z.norm() < 1e-12));
        assert_relative_eq!(out.trace(), rho.trace(), epsilon = 1e-12);
    }

    #[test]
    fn detuned_transfer_matches_two_level_formula() {
        let omega = 5e6;
        let delta = 5e6;
        for t in [13e-9, 57e-9, 101e-9, 233e-9] {
            let rho = TripletDensityMatrix::diagonal([1.0, 0.0, 0.0]);
            let out = apply_mw_rotation(&rho, TransitionPair::XY, omega, t, 0.0, delta).unwrap();
            let g = (omega * omega + delta * delta).sqrt();
            let expected = omega * omega / (g * g) * (PI * g * t).sin().powi(2);
            assert_relative_eq!(out.populations()[1], expected, epsilon = 1e-12);
            assert!(out.populations()[1] <= 0.5 + 1e-12);
        }
    }

    #[test]
    fn invalid_elements_rejected() {
        let rho = diag_state();
        assert!(apply_mw_rotation(&rho, TransitionPair::XY, -1.0, 1e-9, 0.0, 0.0).is_err());
        assert!(apply_mw_rotation(&rho, TransitionPair::XY, 1e6, -1e-9, 0.0, 0.0).is_err());
        assert!(PulseSequence::new(vec![]).is_err());
        assert!(PulseSequence::new(vec![PulseElement::laser(1e-6)]).is_err());
        let seq = PulseSequence::new(vec![PulseElement::readout(1e-6)]).unwrap();
        assert!(seq
            .with_detection(Detection::Readouts {
                signal: 0,
                reference: 1
            })
            .is_err());
    }

    #[test]
    fn sequence_without_microwave_has_unit_contrast() {
        let sys = SystemParams::new(ZfsParams::pentacene(), KineticRates::cryogenic());
        let seq = PulseSequence::new(vec![
            PulseElement::laser(15e-6),
            PulseElement::wait(60e-6),
            PulseElement::readout(1e-6),
        ])
        .unwrap();
        let r = run_sequence(&seq, &sys, 1).unwrap();
        assert_eq!(r.signal, 1.0);
        check_state(&r.final_state).unwrap();
    }

    #[test]
    fn density_matrix_validation() {
        assert!(diag_state().validate().is_ok());
        let bad = TripletDensityMatrix::diagonal([0.5, -0.1, 0.1]);
        assert!(bad.validate().is_err());
    }
}
