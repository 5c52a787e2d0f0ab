//! Experiment protocols built on the pulse engine: pulsed ODMR sweeps,
//! ensemble Rabi traces, field-dependent ODMR maps, shelf-and-probe
//! control and dynamical-decoupling blocks.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Detection, HybridState, PulseElement, PulseEngine, PulseSequence, SequenceResult};
use crate::error::{ensure_finite, Error, Result};
use crate::linalg::normal_quadrature;
use crate::photokinetics::{
    propagate_vector, readout_contrast, steady_state, KineticRates, LevelPopulations, ReadoutParams,
};
use crate::spin_model::{
    tracked_field_sweep, Axis, GyroRatio, Sublevel, TransitionPair, ZfsParams,
};

/// Quadrature points used for inhomogeneous ensembles.
pub const ENSEMBLE_SIZE: usize = 201;

/// Default delay between the last microwave pulse and the readout: three
/// Ty lifetimes, long enough for Ty to return to S0.
pub fn default_readout_delay(kinetics: &KineticRates) -> f64 {
    3.0 * kinetics.triplet_lifetimes[Sublevel::Ty.index()]
}

/// Settings of the pulsed ODMR protocol: laser initialization, microwave
/// probe, relaxation delay, readout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdmrProtocol {
    pub init_duration: f64,
    pub rabi_freq: f64,
    /// Wrap the probe in Ty↔Tz π pulses (multi-level variant).
    pub multilevel: bool,
    /// Delay before readout; `None` means three Ty lifetimes.
    pub delay: Option<f64>,
}

impl Default for OdmrProtocol {
    fn default() -> Self {
        OdmrProtocol {
            init_duration: 15e-6,
            rabi_freq: 5e6,
            multilevel: false,
            delay: None,
        }
    }
}

impl PulseEngine {
    /// Transition whose frequency lies closest to `freq`.
    pub fn nearest_transition(&self, freq: f64) -> TransitionPair {
        *TransitionPair::ALL
            .iter()
            .min_by(|a, b| {
                (self.transition_frequency(**a) - freq)
                    .abs()
                    .total_cmp(&(self.transition_frequency(**b) - freq).abs())
            })
            .expect("three transitions")
    }
}

/// Pulsed-ODMR sequence probing at microwave frequency `freq` (Hz).
///
/// The probe is a π pulse (at resonance) on whichever transition lies
/// nearest to `freq`, detuned by the frequency offset. The multi-level
/// variant sandwiches it between Ty↔Tz π pulses.
pub fn pulsed_odmr_sequence(
    engine: &PulseEngine,
    freq: f64,
    protocol: &OdmrProtocol,
) -> Result<PulseSequence> {
    ensure_finite("frequency", freq)?;
    if protocol.rabi_freq <= 0.0 {
        return Err(Error::invalid("ODMR probe rabi_freq must be > 0"));
    }
    let pair = engine.nearest_transition(freq);
    let probe = PulseElement::Mw {
        transition: pair,
        rabi_freq: protocol.rabi_freq,
        duration: 0.5 / protocol.rabi_freq,
        phase: 0.0,
        detuning: freq - engine.transition_frequency(pair),
    };
    let delay = protocol
        .delay
        .unwrap_or_else(|| default_readout_delay(&engine.params().kinetics));
    let mut elements = vec![PulseElement::laser(protocol.init_duration)];
    if protocol.multilevel {
        elements.push(PulseElement::pi(TransitionPair::YZ, protocol.rabi_freq));
    }
    elements.push(probe);
    if protocol.multilevel {
        elements.push(PulseElement::pi(TransitionPair::YZ, protocol.rabi_freq));
    }
    elements.push(PulseElement::wait(delay));
    elements.push(PulseElement::readout(engine.params().readout.window));
    PulseSequence::new(elements)
}

/// Contrast `I_MW,on / I_MW,off` at each probe frequency. Point `k` draws
/// its count noise from stream `k`.
pub fn pulsed_odmr_sweep(
    engine: &PulseEngine,
    freqs: &[f64],
    protocol: &OdmrProtocol,
    seed: u64,
) -> Result<Vec<f64>> {
    let start = engine.steady_state();
    freqs
        .par_iter()
        .enumerate()
        .map(|(k, &f)| {
            let seq = pulsed_odmr_sequence(engine, f, protocol)?;
            Ok(engine.run_from(&seq, &start, seed, k as u64)?.signal)
        })
        .collect()
}

/// Population transferred out of the initial level by a drive of Rabi
/// frequency `rabi` and detuning `detuning` after time `t`.
fn two_level_transfer(rabi: f64, detuning: f64, t: f64) -> f64 {
    let g2 = rabi * rabi + detuning * detuning;
    if g2 == 0.0 {
        return 0.0;
    }
    rabi * rabi / g2 * (PI * g2.sqrt() * t).sin().powi(2)
}

/// Width (Hz) of the Gaussian frequency spread whose free-induction decay
/// is `exp[-(t/T2*)²]`.
pub fn inhomogeneous_width(t2_star: f64) -> f64 {
    if t2_star.is_infinite() {
        0.0
    } else {
        std::f64::consts::SQRT_2 / (2.0 * PI * t2_star)
    }
}

/// Ensemble-averaged Rabi trace: transferred population versus drive time.
///
/// Each member sees a static detuning drawn from a Gaussian of width
/// `σ = √2/(2π·T2*)`, and a Rabi frequency drawn from a Gaussian of the
/// same width around `rabi_freq` (local drive disorder). The detuning
/// spread alone only damps the oscillation on a `Ω/σ²` timescale; the
/// amplitude spread gives the oscillating part an `exp[-(t/T2*)²]` envelope.
pub fn simulate_rabi(
    transition: TransitionPair,
    rabi_freq: f64,
    durations: &[f64],
    t2_star: f64,
) -> Result<Vec<f64>> {
    ensure_finite("rabi_freq", rabi_freq)?;
    if rabi_freq < 0.0 {
        return Err(Error::invalid("rabi_freq must be >= 0"));
    }
    if t2_star.is_nan() || t2_star <= 0.0 {
        return Err(Error::invalid(format!("T2* must be > 0, got {t2_star}")));
    }
    for &t in durations {
        ensure_finite("duration", t)?;
        if t < 0.0 {
            return Err(Error::invalid("Rabi durations must be >= 0"));
        }
    }
    log::debug!("Rabi ensemble on {transition}, Ω = {rabi_freq:.4e} Hz, T2* = {t2_star:.3e} s");
    let sigma = inhomogeneous_width(t2_star);
    let detunings = normal_quadrature(ENSEMBLE_SIZE, 0.0, sigma);
    let amplitudes = normal_quadrature(ENSEMBLE_SIZE, rabi_freq, sigma);
    Ok(durations
        .par_iter()
        .map(|&t| {
            amplitudes
                .iter()
                .map(|&(omega, wo)| {
                    wo * detunings
                        .iter()
                        .map(|&(delta, wd)| wd * two_level_transfer(omega, delta, t))
                        .sum::<f64>()
                })
                .sum()
        })
        .collect())
}

/// Settings for field-dependent ODMR maps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldOdmrSettings {
    pub kinetics: KineticRates,
    pub readout: ReadoutParams,
    pub gamma: GyroRatio,
    /// Lorentzian full width at half maximum, Hz.
    pub linewidth: f64,
    /// Delay between the swap and the readout; `None` means three Ty lifetimes.
    pub delay: Option<f64>,
}

impl FieldOdmrSettings {
    pub fn new(kinetics: KineticRates) -> Self {
        FieldOdmrSettings {
            kinetics,
            readout: ReadoutParams::default(),
            gamma: GyroRatio::ELECTRON,
            linewidth: 20e6,
            delay: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdmrLine {
    pub pair: TransitionPair,
    /// Line center, Hz.
    pub center: f64,
    /// `1 - C` of a resonant population swap; negative lines are bright.
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldOdmrMap {
    pub b: Vec<f64>,
    pub f: Vec<f64>,
    /// `contrast[i][j]` at field `b[i]` and frequency `f[j]`.
    pub contrast: Vec<Vec<f64>>,
    pub lines: Vec<[OdmrLine; 3]>,
}

fn lorentzian(detuning: f64, fwhm: f64) -> f64 {
    let x = 2.0 * detuning / fwhm;
    1.0 / (1.0 + x * x)
}

/// ODMR contrast map over field and microwave frequency.
///
/// At each field the eigenstates inherit ISC branching and decay rates from
/// their zero-field character weights. Each transition contributes a
/// Lorentzian whose depth is the readout contrast of a full population swap
/// between its two branches; centers are the tracked branch frequencies.
pub fn simulate_field_odmr(
    zfs: ZfsParams,
    axis: Axis,
    b_grid: &[f64],
    f_grid: &[f64],
    settings: &FieldOdmrSettings,
) -> Result<FieldOdmrMap> {
    if b_grid.is_empty() || f_grid.is_empty() {
        return Err(Error::invalid("field ODMR grids must be non-empty"));
    }
    settings.kinetics.validate()?;
    settings.readout.validate()?;
    if !(settings.linewidth > 0.0) {
        return Err(Error::invalid("linewidth must be > 0"));
    }
    let delay = settings
        .delay
        .unwrap_or_else(|| default_readout_delay(&settings.kinetics));
    let sweep = tracked_field_sweep(zfs, axis, b_grid, settings.gamma)?;

    let lines: Vec<[OdmrLine; 3]> = sweep
        .par_iter()
        .map(|(row, vectors)| {
            let mut weights = [[0.0; 3]; 3];
            for (c, wrow) in weights.iter_mut().enumerate() {
                for (n, cell) in wrow.iter_mut().enumerate() {
                    *cell = vectors[(c, n)].norm_sqr();
                }
            }
            let rates = settings.kinetics.mixed(&weights);
            let start = steady_state(&rates)?;
            let reference = LevelPopulations::from_vector(&propagate_vector(
                &rates,
                false,
                delay,
                &start.to_vector(),
            ));
            let mut out = Vec::with_capacity(3);
            for pair in TransitionPair::ALL {
                let (i, j) = pair.indices();
                let mut swapped = start.to_vector();
                swapped.swap_rows(2 + i, 2 + j);
                let swapped = LevelPopulations::from_vector(&propagate_vector(
                    &rates, false, delay, &swapped,
                ));
                let c = readout_contrast(&rates, &swapped, &reference, &settings.readout)?;
                out.push(OdmrLine {
                    pair,
                    center: row.frequency(pair),
                    depth: 1.0 - c,
                });
            }
            Ok([out[0], out[1], out[2]])
        })
        .collect::<Result<_>>()?;

    let contrast = lines
        .iter()
        .map(|ls| {
            f_grid
                .iter()
                .map(|&f| {
                    1.0 - ls
                        .iter()
                        .map(|l| l.depth * lorentzian(f - l.center, settings.linewidth))
                        .sum::<f64>()
                })
                .collect()
        })
        .collect();

    Ok(FieldOdmrMap {
        b: b_grid.to_vec(),
        f: f_grid.to_vec(),
        contrast,
        lines,
    })
}

/// Shelf-and-probe protocol settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShelfProbeProtocol {
    pub init_duration: f64,
    /// Rabi frequency of the Ty mapping pulses.
    pub map_rabi: f64,
    /// Which shelf level is mapped back to Ty for readout (Tz or Tx).
    pub readout_level: Sublevel,
    /// Delay before readout; `None` means three Ty lifetimes.
    pub delay: Option<f64>,
}

impl Default for ShelfProbeProtocol {
    fn default() -> Self {
        ShelfProbeProtocol {
            init_duration: 15e-6,
            map_rabi: 20e6,
            readout_level: Sublevel::Tz,
            delay: None,
        }
    }
}

/// Checks that an inner evolution only drives the long-lived {Tx, Tz}
/// manifold and never touches Ty or the laser.
pub fn check_shelf_inner(inner: &[PulseElement]) -> Result<()> {
    for (k, e) in inner.iter().enumerate() {
        match e {
            PulseElement::Wait { .. } => {}
            PulseElement::Mw {
                transition: TransitionPair::XZ,
                ..
            } => {}
            PulseElement::Mw { transition, .. } => {
                return Err(Error::ProtocolViolation(format!(
                    "inner element {k} drives {transition}, which involves Ty"
                )))
            }
            PulseElement::Laser { .. } | PulseElement::Readout { .. } => {
                return Err(Error::ProtocolViolation(format!(
                    "inner element {k} is optical; only waits and Tx<->Tz pulses are allowed"
                )))
            }
        }
    }
    Ok(())
}

/// Full shelf-and-probe sequence: laser init, Ty→Tz π map, inner evolution
/// in {Tx, Tz}, selective π map of the readout level back to Ty, delay,
/// readout.
pub fn shelf_and_probe_sequence(
    engine: &PulseEngine,
    inner: &[PulseElement],
    protocol: &ShelfProbeProtocol,
) -> Result<PulseSequence> {
    check_shelf_inner(inner)?;
    let back = match protocol.readout_level {
        Sublevel::Tz => TransitionPair::YZ,
        Sublevel::Tx => TransitionPair::XY,
        Sublevel::Ty => {
            return Err(Error::invalid(
                "readout level must be a shelf level (Tx or Tz)",
            ))
        }
    };
    let delay = protocol
        .delay
        .unwrap_or_else(|| default_readout_delay(&engine.params().kinetics));
    let mut elements = vec![
        PulseElement::laser(protocol.init_duration),
        PulseElement::pi(TransitionPair::YZ, protocol.map_rabi),
    ];
    elements.extend_from_slice(inner);
    elements.push(PulseElement::pi(back, protocol.map_rabi));
    elements.push(PulseElement::wait(delay));
    elements.push(PulseElement::readout(engine.params().readout.window));
    PulseSequence::new(elements)
}

pub fn simulate_shelf_and_probe(
    engine: &PulseEngine,
    inner: &[PulseElement],
    protocol: &ShelfProbeProtocol,
    seed: u64,
) -> Result<SequenceResult> {
    let seq = shelf_and_probe_sequence(engine, inner, protocol)?;
    engine.run_from(&seq, &engine.steady_state(), seed, 0)
}

/// Shelf-and-probe contrast for a family of inner sequences, one per
/// evolution time.
pub fn shelf_and_probe_trace<F>(
    engine: &PulseEngine,
    times: &[f64],
    inner: F,
    protocol: &ShelfProbeProtocol,
    seed: u64,
) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Vec<PulseElement> + Sync,
{
    let start = engine.steady_state();
    times
        .par_iter()
        .enumerate()
        .map(|(k, &t)| {
            let seq = shelf_and_probe_sequence(engine, &inner(t), protocol)?;
            Ok(engine.run_from(&seq, &start, seed, k as u64)?.signal)
        })
        .collect()
}

/// Refocusing pattern of a dynamical-decoupling block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scheme", content = "n", rename_all = "snake_case")]
pub enum DdScheme {
    Hahn,
    /// `n` π pulses about the axis orthogonal to the π/2 pulses.
    Cpmg(u32),
    /// `n` repetitions of the eight-pulse X-Y-X-Y-Y-X-Y-X cycle.
    Xy8(u32),
}

impl DdScheme {
    pub fn pulse_phases(self) -> Vec<f64> {
        match self {
            DdScheme::Hahn => vec![0.0],
            DdScheme::Cpmg(n) => vec![FRAC_PI_2; n as usize],
            DdScheme::Xy8(n) => {
                let cycle = [
                    0.0, FRAC_PI_2, 0.0, FRAC_PI_2, FRAC_PI_2, 0.0, FRAC_PI_2, 0.0,
                ];
                cycle.iter().copied().cycle().take(8 * n as usize).collect()
            }
        }
    }

    pub fn n_pulses(self) -> usize {
        self.pulse_phases().len()
    }
}

/// π/2 – [τ/2 – π – τ – … – π – τ/2] – π/2 block on one transition with
/// total free evolution `free_time`. The closing π/2 pulse has phase
/// `final_phase`.
pub fn dd_block(
    transition: TransitionPair,
    rabi_freq: f64,
    scheme: DdScheme,
    free_time: f64,
    final_phase: f64,
) -> Result<Vec<PulseElement>> {
    ensure_finite("free_time", free_time)?;
    if free_time < 0.0 || rabi_freq <= 0.0 {
        return Err(Error::invalid(
            "dd block needs free_time >= 0 and rabi_freq > 0",
        ));
    }
    let phases = scheme.pulse_phases();
    if phases.is_empty() {
        return Err(Error::invalid("dd block needs at least one π pulse"));
    }
    let spacing = free_time / phases.len() as f64;
    let mut out = vec![PulseElement::rotation(
        transition, rabi_freq, FRAC_PI_2, 0.0,
    )];
    out.push(PulseElement::wait(0.5 * spacing));
    for (k, &ph) in phases.iter().enumerate() {
        out.push(PulseElement::rotation(transition, rabi_freq, PI, ph));
        out.push(PulseElement::wait(if k + 1 == phases.len() {
            0.5 * spacing
        } else {
            spacing
        }));
    }
    out.push(PulseElement::rotation(
        transition,
        rabi_freq,
        FRAC_PI_2,
        final_phase,
    ));
    Ok(out)
}

/// Differential DD contrast `(I(φ=π) - I(φ=0)) / I_ref` of a block run
/// directly on `transition` after laser initialization.
pub fn direct_dd_contrast(
    engine: &PulseEngine,
    transition: TransitionPair,
    rabi_freq: f64,
    scheme: DdScheme,
    free_time: f64,
    init_duration: f64,
) -> Result<f64> {
    let delay = default_readout_delay(&engine.params().kinetics);
    let start = engine.steady_state();
    let run = |phase: f64| -> Result<SequenceResult> {
        let mut el = vec![PulseElement::laser(init_duration)];
        el.extend(dd_block(transition, rabi_freq, scheme, free_time, phase)?);
        el.push(PulseElement::wait(delay));
        el.push(PulseElement::readout(engine.params().readout.window));
        engine.run_from(&PulseSequence::new(el)?, &start, 0, 0)
    };
    Ok(run(PI)?.signal - run(0.0)?.signal)
}

/// Differential shelf-and-probe DD contrast with the block in {Tx, Tz}.
pub fn shelf_dd_contrast(
    engine: &PulseEngine,
    rabi_freq: f64,
    scheme: DdScheme,
    free_time: f64,
    protocol: &ShelfProbeProtocol,
) -> Result<f64> {
    let run = |phase: f64| -> Result<f64> {
        let inner = dd_block(TransitionPair::XZ, rabi_freq, scheme, free_time, phase)?;
        Ok(simulate_shelf_and_probe(engine, &inner, protocol, 0)?.signal)
    };
    Ok(run(PI)? - run(0.0)?)
}

/// Starting state helper for tests and callers that want a fresh molecule.
pub fn ground_state() -> HybridState {
    HybridState::from_populations(&LevelPopulations::ground())
}

impl PulseSequence {
    /// Same sequence with signal/reference readouts inside one run.
    pub fn with_internal_reference(self, signal: usize, reference: usize) -> Result<Self> {
        self.with_detection(Detection::Readouts { signal, reference })
    }
}
