//! Phenomenological coherence envelopes and sensing responses.
//!
//! Frequencies are in Hz (cycles per second); an angular frequency never
//! appears in a public field. Magnetic fields are in tesla.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::linalg::normal_quadrature;
use crate::rng::stream_rng;

/// Free-electron Zeeman frequency per unit g-factor, Hz/T.
pub const BOHR_HZ_PER_TESLA: f64 = 13.996245e9;

/// Default number of equispaced phase samples used for phase averages.
pub const DEFAULT_PHASE_SAMPLES: usize = 64;

/// Nuclear-spin echo modulation riding on the coherence decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eseem {
    pub a: f64,
    pub b: f64,
    /// Modulation frequency, Hz.
    pub omega: f64,
}

impl Eseem {
    /// Default weights for an unfitted modulation: `a = 1`, `b = a/2`.
    pub fn with_frequency(omega: f64) -> Self {
        Eseem {
            a: 1.0,
            b: 0.5,
            omega,
        }
    }

    /// `a - b sin²(2π·omega·t / 4)`.
    pub fn factor(&self, t: f64) -> f64 {
        self.a - self.b * (0.5 * PI * self.omega * t).sin().powi(2)
    }

    /// Time of the `k`-th minimum of the modulation factor.
    pub fn minimum(&self, k: u32) -> f64 {
        (2 * k + 1) as f64 / self.omega
    }
}

/// Stretched-exponential decay with optional echo envelope modulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceModel {
    pub t2: f64,
    pub nu: f64,
    #[serde(default)]
    pub eseem: Option<Eseem>,
}

impl CoherenceModel {
    pub fn new(t2: f64, nu: f64) -> Result<Self> {
        let m = CoherenceModel {
            t2,
            nu,
            eseem: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_eseem(mut self, eseem: Eseem) -> Result<Self> {
        self.eseem = Some(eseem);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t2 > 0.0) {
            return Err(Error::invalid(format!("t2 must be > 0, got {}", self.t2)));
        }
        if !(self.nu > 0.0 && self.nu <= 4.0) {
            return Err(Error::invalid(format!(
                "stretch exponent must lie in (0, 4], got {}",
                self.nu
            )));
        }
        if let Some(e) = self.eseem {
            ensure_finite("eseem a", e.a)?;
            ensure_finite("eseem b", e.b)?;
            ensure_finite("eseem omega", e.omega)?;
            if e.b > e.a {
                return Err(Error::invalid(format!(
                    "eseem requires b <= a, got a={} b={}",
                    e.a, e.b
                )));
            }
            if e.omega < 0.0 {
                return Err(Error::invalid("eseem omega must be >= 0"));
            }
        }
        Ok(())
    }
}

/// `exp[-(t/T2)^ν]·[a - b sin²(ωt/4)]`, or the bare decay without ESEEM.
pub fn echo_envelope(model: &CoherenceModel, t: f64) -> Result<f64> {
    model.validate()?;
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("echo time must be >= 0, got {t}")));
    }
    let decay = if t.is_infinite() {
        0.0
    } else {
        (-(t / model.t2).powf(model.nu)).exp()
    };
    Ok(decay * model.eseem.map_or(1.0, |e| e.factor(t)))
}

pub fn echo_trace(model: &CoherenceModel, times: &[f64]) -> Result<Vec<f64>> {
    times.iter().map(|&t| echo_envelope(model, t)).collect()
}

/// Coherence-time scaling with the number of refocusing pulses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DdScalingParams {
    pub t2_1: f64,
    pub nu: f64,
    pub t1_rho: f64,
}

impl DdScalingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.t2_1 > 0.0 && self.nu > 0.0 && self.t1_rho > 0.0)
            || self.t2_1.is_infinite()
            || !self.nu.is_finite()
        {
            return Err(Error::invalid(format!(
                "dd scaling parameters must be positive, got T2(1)={} nu={} T1rho={}",
                self.t2_1, self.nu, self.t1_rho
            )));
        }
        Ok(())
    }
}

/// `T2(N) = [(T2(1)·N^ν)⁻¹ + (2·T1ρ)⁻¹]⁻¹`.
pub fn dd_t2_scaling(params: &DdScalingParams, n_pulses: u32) -> Result<f64> {
    params.validate()?;
    if n_pulses == 0 {
        return Err(Error::invalid("dd scaling needs at least one pulse"));
    }
    let rate = 1.0 / (params.t2_1 * (n_pulses as f64).powf(params.nu)) + 0.5 / params.t1_rho;
    Ok(1.0 / rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhaseModel {
    /// Phase uniformly distributed and averaged over.
    RandomUniform,
    /// Phase locked to the sequence, radians.
    Fixed { phase: f64 },
}

/// How phase averages over a uniformly random phase are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhaseSampling {
    Equispaced { samples: usize },
    Random { samples: usize, seed: u64 },
}

impl Default for PhaseSampling {
    fn default() -> Self {
        PhaseSampling::Equispaced {
            samples: DEFAULT_PHASE_SAMPLES,
        }
    }
}

impl PhaseSampling {
    pub fn phases(&self) -> Result<Vec<f64>> {
        match *self {
            PhaseSampling::Equispaced { samples } if samples > 0 => Ok((0..samples)
                .map(|k| 2.0 * PI * k as f64 / samples as f64)
                .collect()),
            PhaseSampling::Random { samples, seed } if samples > 0 => {
                let mut rng = stream_rng(seed, 0);
                Ok((0..samples)
                    .map(|_| rng.random_range(0.0..2.0 * PI))
                    .collect())
            }
            _ => Err(Error::invalid("phase sampling needs at least one sample")),
        }
    }
}

/// Sinusoidal test field `amplitude·sin(2π·frequency·t + φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcSignal {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase_model: PhaseModel,
}

impl AcSignal {
    pub fn validate(&self) -> Result<()> {
        ensure_finite("ac amplitude", self.amplitude)?;
        ensure_finite("ac frequency", self.frequency)?;
        if self.amplitude < 0.0 || self.frequency <= 0.0 {
            return Err(Error::invalid(
                "ac signal needs amplitude >= 0 and frequency > 0",
            ));
        }
        if let PhaseModel::Fixed { phase } = self.phase_model {
            ensure_finite("ac phase", phase)?;
        }
        Ok(())
    }
}

/// Phase picked up during a Hahn echo of half-length `tau` (free evolution
/// `2τ`, sign flipped at `τ`) from the AC field with initial phase `phi`.
pub fn ac_echo_phase(ac: &AcSignal, probe_gamma: f64, tau: f64, phi: f64) -> f64 {
    let w = 2.0 * PI * ac.frequency;
    let integral = (phi.cos() - 2.0 * (w * tau + phi).cos() + (2.0 * w * tau + phi).cos()) / w;
    2.0 * PI * probe_gamma * ac.amplitude * integral
}

/// Echo contrast `⟨cos Φ⟩` versus `τ`. A random-uniform phase model averages
/// over `sampling`; a fixed phase uses that phase only.
pub fn ac_echo_response(
    ac: &AcSignal,
    probe_gamma: f64,
    tau_grid: &[f64],
    sampling: PhaseSampling,
) -> Result<Vec<f64>> {
    ac.validate()?;
    ensure_finite("probe gamma", probe_gamma)?;
    check_grid("tau", tau_grid)?;
    let phases = match ac.phase_model {
        PhaseModel::RandomUniform => sampling.phases()?,
        PhaseModel::Fixed { phase } => vec![phase],
    };
    let n = phases.len() as f64;
    Ok(tau_grid
        .par_iter()
        .map(|&tau| {
            phases
                .iter()
                .map(|&phi| ac_echo_phase(ac, probe_gamma, tau, phi).cos())
                .sum::<f64>()
                / n
        })
        .collect())
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid(format!("{name} grid is empty")));
    }
    for &x in grid {
        ensure_finite(name, x)?;
        if x < 0.0 {
            return Err(Error::invalid(format!(
                "{name} grid values must be >= 0, got {x}"
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuclearSpecies {
    pub name: String,
    /// Hz/T.
    pub gamma_n: f64,
}

impl NuclearSpecies {
    pub fn new(name: impl Into<String>, gamma_n: f64) -> Result<Self> {
        let s = NuclearSpecies {
            name: name.into(),
            gamma_n,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn proton() -> Self {
        NuclearSpecies {
            name: "1H".into(),
            gamma_n: 42.58e6,
        }
    }

    pub fn deuteron() -> Self {
        NuclearSpecies {
            name: "2H".into(),
            gamma_n: 6.54e6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("gamma_n", self.gamma_n)?;
        if self.gamma_n == 0.0 {
            return Err(Error::invalid("nuclear gyromagnetic ratio must be nonzero"));
        }
        Ok(())
    }
}

/// Larmor frequency `γn·B` in Hz.
pub fn nmr_frequency(species: &NuclearSpecies, b: f64) -> Result<f64> {
    species.validate()?;
    ensure_finite("field", b)?;
    if b < 0.0 {
        return Err(Error::invalid("field magnitude must be >= 0"));
    }
    Ok(species.gamma_n * b)
}

/// Settings of the echo–store–echo correlation measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSettings {
    /// Largest phase one echo block can pick up from the nuclear field, rad.
    pub max_block_phase: f64,
    pub sampling: PhaseSampling,
}

impl Default for CorrelationSettings {
    fn default() -> Self {
        CorrelationSettings {
            max_block_phase: 0.5,
            sampling: PhaseSampling::default(),
        }
    }
}

/// Correlation signal versus correlation time.
///
/// Each echo block of half-length `tau` converts the nuclear precession
/// into a phase `Φa·sin(φ)` with `Φa = max_block_phase·sin²(π·fn·τ)`. The
/// stored projections of the two blocks are multiplied and averaged over the
/// nuclear phase `φ`, then damped by `exp(-tc/T1n)`.
pub fn correlation_spectroscopy(
    species: &NuclearSpecies,
    b: f64,
    t_corr_grid: &[f64],
    tau: f64,
    nuclear_t1: f64,
    settings: &CorrelationSettings,
) -> Result<Vec<f64>> {
    let fn_ = nmr_frequency(species, b)?;
    check_grid("correlation time", t_corr_grid)?;
    ensure_finite("tau", tau)?;
    ensure_finite("block phase", settings.max_block_phase)?;
    if tau <= 0.0 || !(nuclear_t1 > 0.0) {
        return Err(Error::invalid(
            "correlation spectroscopy needs tau > 0 and nuclear_t1 > 0",
        ));
    }
    let phi_a = settings.max_block_phase * (PI * fn_ * tau).sin().powi(2);
    let phases = settings.sampling.phases()?;
    let n = phases.len() as f64;
    Ok(t_corr_grid
        .par_iter()
        .map(|&tc| {
            let theta = 2.0 * PI * fn_ * tc;
            let avg = phases
                .iter()
                .map(|&p| (phi_a * p.sin()).sin() * (phi_a * (p + theta).sin()).sin())
                .sum::<f64>()
                / n;
            avg * (-tc / nuclear_t1).exp()
        })
        .collect())
}

/// Block half-length that maximizes the correlation signal for `fn`.
pub fn optimal_correlation_tau(frequency: f64) -> f64 {
    0.5 / frequency
}

/// Frequency at which the Fourier magnitude of a uniformly sampled trace
/// peaks, searched over `(0, f_max]` and refined by golden-section search.
pub fn spectral_peak(times: &[f64], values: &[f64], f_max: f64) -> Result<f64> {
    if times.len() != values.len() || times.len() < 4 {
        return Err(Error::invalid(
            "spectral peak needs at least 4 matching samples",
        ));
    }
    if !(f_max > 0.0) {
        return Err(Error::invalid("f_max must be > 0"));
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let power = |f: f64| {
        let (mut re, mut im) = (0.0, 0.0);
        for (&t, &v) in times.iter().zip(values) {
            let (s, c) = (2.0 * PI * f * t).sin_cos();
            re += (v - mean) * c;
            im += (v - mean) * s;
        }
        re * re + im * im
    };
    let span = times[times.len() - 1] - times[0];
    if !(span > 0.0) {
        return Err(Error::invalid(
            "spectral peak needs increasing sample times",
        ));
    }
    // Coarse search at a quarter of the Fourier resolution.
    let step = 0.25 / span;
    let n = (f_max / step).ceil() as usize;
    let (k_best, _) = (1..=n)
        .map(|k| (k, power(k as f64 * step)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty search range");
    let (mut lo, mut hi) = ((k_best as f64 - 1.0) * step, (k_best as f64 + 1.0) * step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut p1, mut p2) = (power(x1), power(x2));
    while hi - lo > 1e-12 * hi.abs().max(1.0) {
        if p1 < p2 {
            lo = x1;
            x1 = x2;
            p1 = p2;
            x2 = lo + g * (hi - lo);
            p2 = power(x2);
        } else {
            hi = x2;
            x2 = x1;
            p2 = p1;
            x1 = hi - g * (hi - lo);
            p1 = power(x1);
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Dark electron-spin ensemble coupled to the probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DarkSpin {
    pub g_factor: f64,
    /// Mean dipolar coupling to the probe, Hz.
    pub coupling_mean: f64,
    /// Gaussian spread of the coupling, Hz.
    pub coupling_spread: f64,
    /// Resonance full width at half maximum, Hz.
    pub linewidth: f64,
}

impl DarkSpin {
    pub fn validate(&self) -> Result<()> {
        ensure_finite("g_factor", self.g_factor)?;
        ensure_finite("coupling mean", self.coupling_mean)?;
        ensure_finite("coupling spread", self.coupling_spread)?;
        ensure_finite("linewidth", self.linewidth)?;
        if self.g_factor <= 0.0 || self.coupling_spread < 0.0 || self.linewidth < 0.0 {
            return Err(Error::invalid(
                "dark spin needs g > 0, spread >= 0, linewidth >= 0",
            ));
        }
        Ok(())
    }

    /// Resonance frequency at field `b`, Hz.
    pub fn resonance(&self, b: f64) -> f64 {
        self.g_factor * BOHR_HZ_PER_TESLA * b
    }

    /// `1 - ⟨cos 2π·d·t⟩` over the coupling distribution.
    pub fn echo_deficit(&self, t_fix: f64, samples: usize) -> f64 {
        let nodes = normal_quadrature(samples.max(1), self.coupling_mean, self.coupling_spread);
        1.0 - nodes
            .iter()
            .map(|&(d, w)| w * (2.0 * PI * d * t_fix).cos())
            .sum::<f64>()
    }
}

fn lorentzian(detuning: f64, fwhm: f64) -> f64 {
    if fwhm == 0.0 {
        return if detuning == 0.0 { 1.0 } else { 0.0 };
    }
    let x = 2.0 * detuning / fwhm;
    1.0 / (1.0 + x * x)
}

/// Probe echo contrast versus pump frequency with the dark spins flipped
/// mid-echo.
pub fn deer_spectrum(
    dark: &DarkSpin,
    b: f64,
    f2_grid: &[f64],
    t_fix: f64,
    coupling_samples: usize,
) -> Result<Vec<f64>> {
    dark.validate()?;
    ensure_finite("field", b)?;
    check_grid("pump frequency", f2_grid)?;
    ensure_finite("t_fix", t_fix)?;
    if t_fix < 0.0 || coupling_samples == 0 {
        return Err(Error::invalid(
            "deer spectrum needs t_fix >= 0 and coupling_samples >= 1",
        ));
    }
    let f0 = dark.resonance(b);
    let deficit = dark.echo_deficit(t_fix, coupling_samples);
    Ok(f2_grid
        .iter()
        .map(|&f| 1.0 - deficit * lorentzian(f - f0, dark.linewidth))
        .collect())
}

/// Minimum of a sampled dip, refined by a parabola through the lowest point
/// and its neighbours.
pub fn dip_center(freqs: &[f64], values: &[f64]) -> Result<f64> {
    if freqs.len() != values.len() || freqs.len() < 3 {
        return Err(Error::invalid(
            "dip search needs at least 3 matching samples",
        ));
    }
    let k = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .expect("non-empty");
    if k == 0 || k + 1 == values.len() {
        return Ok(freqs[k]);
    }
    let (x0, x1, x2) = (freqs[k - 1], freqs[k], freqs[k + 1]);
    let (y0, y1, y2) = (values[k - 1], values[k], values[k + 1]);
    let denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
    let a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
    let bq = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
    if a <= 0.0 {
        return Ok(x1);
    }
    Ok(-bq / (2.0 * a))
}

/// Probe contrast while the dark spins are driven for time `t`.
///
/// The flip probability `Ω²/(Ω²+Δ²)·sin²(π√(Ω²+Δ²)·t)` is averaged over a
/// Gaussian detuning spread with full width `linewidth` around `detuning`,
/// then scales the echo deficit accumulated over `t_fix`.
pub fn deer_rabi(
    dark: &DarkSpin,
    drive_rabi: f64,
    t_grid: &[f64],
    detuning: f64,
    t_fix: f64,
    coupling_samples: usize,
) -> Result<Vec<f64>> {
    dark.validate()?;
    ensure_finite("drive rabi", drive_rabi)?;
    ensure_finite("detuning", detuning)?;
    check_grid("drive time", t_grid)?;
    if drive_rabi < 0.0 {
        return Err(Error::invalid("drive rabi must be >= 0"));
    }
    let sigma = dark.linewidth / (2.0 * (2.0 * 2f64.ln()).sqrt());
    let nodes = normal_quadrature(crate::pulse_engine::ENSEMBLE_SIZE, detuning, sigma);
    let deficit = dark.echo_deficit(t_fix, coupling_samples);
    Ok(t_grid
        .par_iter()
        .map(|&t| {
            let p: f64 = nodes
                .iter()
                .map(|&(d, w)| {
                    let g2 = drive_rabi * drive_rabi + d * d;
                    if g2 == 0.0 {
                        0.0
                    } else {
                        w * drive_rabi * drive_rabi / g2 * (PI * g2.sqrt() * t).sin().powi(2)
                    }
                })
                .sum();
            1.0 - deficit * p
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn envelope_basics() {
        let m = CoherenceModel::new(22.4e-6, 1.0).unwrap();
        assert_eq!(echo_envelope(&m, 0.0).unwrap(), 1.0);
        assert_relative_eq!(
            echo_envelope(&m, 22.4e-6).unwrap(),
            (-1f64).exp(),
            epsilon = 1e-12
        );
        let e = m
            .with_eseem(Eseem {
                a: 0.8,
                b: 0.3,
                omega: 140.2e3,
            })
            .unwrap();
        assert_eq!(echo_envelope(&e, 0.0).unwrap(), 0.8);
        assert!(echo_envelope(&m, -1.0).is_err());
        assert!(CoherenceModel::new(1e-6, 4.5).is_err());
        assert!(m
            .with_eseem(Eseem {
                a: 0.2,
                b: 0.3,
                omega: 1.0
            })
            .is_err());
    }

    #[test]
    fn eseem_minimum_position() {
        let e = Eseem::with_frequency(140.2e3);
        assert_relative_eq!(e.minimum(0), 7.1327e-6, max_relative = 1e-4);
        let t = e.minimum(0);
        assert!(e.factor(t) < e.factor(t * (1.0 - 1e-4)));
        assert!(e.factor(t) < e.factor(t * (1.0 + 1e-4)));
        assert_relative_eq!(e.factor(t), e.a - e.b, epsilon = 1e-15);
    }

    #[test]
    fn dd_scaling_limits() {
        let p = DdScalingParams {
            t2_1: 22.4e-6,
            nu: 0.53,
            t1_rho: f64::INFINITY,
        };
        assert_eq!(dd_t2_scaling(&p, 1).unwrap(), 22.4e-6);
        assert!(dd_t2_scaling(&p, 0).is_err());
    }

    #[test]
    fn ac_zero_amplitude_and_full_period() {
        let ac = AcSignal {
            amplitude: 0.0,
            frequency: 1e5,
            phase_model: PhaseModel::RandomUniform,
        };
        let taus: Vec<f64> = (0..20).map(|k| k as f64 * 1e-6).collect();
        assert!(ac_echo_response(&ac, 28e9, &taus, PhaseSampling::default())
            .unwrap()
            .iter()
            .all(|&c| c == 1.0));
        let fixed = AcSignal {
            amplitude: 1e-6,
            frequency: 1e5,
            phase_model: PhaseModel::Fixed { phase: 0.0 },
        };
        assert!(ac_echo_phase(&fixed, 28e9, 1e-5, 0.0).abs() < 1e-9);
    }

    #[test]
    fn nmr_and_deer_centers() {
        assert_relative_eq!(
            nmr_frequency(&NuclearSpecies::proton(), 0.15).unwrap(),
            6.387e6,
            max_relative = 1e-12
        );
        assert_eq!(nmr_frequency(&NuclearSpecies::proton(), 0.0).unwrap(), 0.0);
        let dark = DarkSpin {
            g_factor: 2.0,
            coupling_mean: 1e6,
            coupling_spread: 0.2e6,
            linewidth: 20e6,
        };
        assert_relative_eq!(dark.resonance(0.19), 5.3186e9, max_relative = 1e-4);
        let flat = DarkSpin {
            coupling_mean: 0.0,
            coupling_spread: 0.0,
            ..dark
        };
        let f: Vec<f64> = (0..50).map(|k| 5.2e9 + k as f64 * 5e6).collect();
        assert!(deer_spectrum(&flat, 0.19, &f, 5e-7, 16)
            .unwrap()
            .iter()
            .all(|&c| c == 1.0));
    }

    #[test]
    fn spectral_peak_of_pure_cosine() {
        let t: Vec<f64> = (0..400).map(|k| k as f64 * 1e-8).collect();
        let y: Vec<f64> = t.iter().map(|t| (2.0 * PI * 13.7e6 * t).cos()).collect();
        assert_relative_eq!(
            spectral_peak(&t, &y, 50e6).unwrap(),
            13.7e6,
            max_relative = 1e-3
        );
    }
}
