//! JSON experiment configuration.
//!
//! Config files use laboratory units: frequencies in MHz, times in µs,
//! fields in mT and angles in degrees. Everything is converted to SI at
//! this boundary.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::coherence_sensing::{CoherenceModel, DarkSpin, DdScalingParams, Eseem, NuclearSpecies};
use crate::error::{Error, Result};
use crate::fitting::FitModel;
use crate::photokinetics::{
    isc_branching_from_steady_state, KineticRates, ReadoutParams, DEFAULT_ISC_YIELD,
    DEFAULT_PUMP_RATE, DEFAULT_S1_DECAY_RATE, LIFETIMES_295K, LIFETIMES_4K, POPULATIONS_295K,
    POPULATIONS_4K,
};
use crate::pulse_engine::SystemParams;
use crate::spin_model::{Axis, FieldVector, GyroRatio, TransitionPair, ZfsParams};

pub const MHZ: f64 = 1e6;
pub const US: f64 = 1e-6;
pub const MT: f64 = 1e-3;
pub const DEG: f64 = std::f64::consts::PI / 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Spectrum,
    FieldOdmr,
    Odmr,
    Rabi,
    Echo,
    T1,
    DdScaling,
    AcSense,
    NmrCorrelation,
    Deer,
    DeerRabi,
    Fit,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 12] = [
        ExperimentKind::Spectrum,
        ExperimentKind::FieldOdmr,
        ExperimentKind::Odmr,
        ExperimentKind::Rabi,
        ExperimentKind::Echo,
        ExperimentKind::T1,
        ExperimentKind::DdScaling,
        ExperimentKind::AcSense,
        ExperimentKind::NmrCorrelation,
        ExperimentKind::Deer,
        ExperimentKind::DeerRabi,
        ExperimentKind::Fit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::FieldOdmr => "field-odmr",
            ExperimentKind::Odmr => "odmr",
            ExperimentKind::Rabi => "rabi",
            ExperimentKind::Echo => "echo",
            ExperimentKind::T1 => "t1",
            ExperimentKind::DdScaling => "dd-scaling",
            ExperimentKind::AcSense => "ac-sense",
            ExperimentKind::NmrCorrelation => "nmr-correlation",
            ExperimentKind::Deer => "deer",
            ExperimentKind::DeerRabi => "deer-rabi",
            ExperimentKind::Fit => "fit",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ExperimentKind::Spectrum => "triplet transition frequencies versus static field",
            ExperimentKind::FieldOdmr => {
                "ODMR contrast map over static field and microwave frequency"
            }
            ExperimentKind::Odmr => "pulsed ODMR spectrum, optionally gated by a Ty<->Tz pi pulse",
            ExperimentKind::Rabi => "ensemble Rabi oscillation with inhomogeneous dephasing",
            ExperimentKind::Echo => "Hahn-echo decay with optional envelope modulation",
            ExperimentKind::T1 => "triplet relaxation after the laser is switched off",
            ExperimentKind::DdScaling => "coherence time versus number of decoupling pulses",
            ExperimentKind::AcSense => "echo response to an AC magnetic field",
            ExperimentKind::NmrCorrelation => "correlation-spectroscopy trace of precessing nuclei",
            ExperimentKind::Deer => "double-resonance spectrum of dark electron spins",
            ExperimentKind::DeerRabi => "Rabi oscillation of dark spins read out by the probe",
            ExperimentKind::Fit => "least-squares fit of a model to a trace file",
        }
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "4K")]
    Cryogenic,
    #[serde(rename = "295K")]
    Ambient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KineticsConfig {
    pub preset: Option<Preset>,
    pub lifetimes_us: Option<[f64; 3]>,
    /// Steady-state triplet populations (fractions).
    pub populations: Option<[f64; 3]>,
    /// ISC branching ratios; alternative to `populations`.
    pub branching: Option<[f64; 3]>,
    pub pump_rate_mhz: f64,
    pub s1_decay_rate_mhz: f64,
    pub isc_yield: f64,
}

impl Default for KineticsConfig {
    fn default() -> Self {
        KineticsConfig {
            preset: Some(Preset::Cryogenic),
            lifetimes_us: None,
            populations: None,
            branching: None,
            pump_rate_mhz: DEFAULT_PUMP_RATE / MHZ,
            s1_decay_rate_mhz: DEFAULT_S1_DECAY_RATE / MHZ,
            isc_yield: DEFAULT_ISC_YIELD,
        }
    }
}

impl KineticsConfig {
    pub fn resolve(&self) -> Result<KineticRates> {
        let (lt, pops) = match self.preset {
            Some(Preset::Cryogenic) => (Some(LIFETIMES_4K), Some(POPULATIONS_4K)),
            Some(Preset::Ambient) => (Some(LIFETIMES_295K), Some(POPULATIONS_295K)),
            None => (None, None),
        };
        let lifetimes = match self.lifetimes_us {
            Some(l) => l.map(|t| t * US),
            None => {
                lt.ok_or_else(|| Error::Config("kinetics needs a preset or lifetimes_us".into()))?
            }
        };
        let branching = match (self.populations, self.branching) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "kinetics: give either populations or branching, not both".into(),
                ))
            }
            (Some(p), None) => isc_branching_from_steady_state(p, lifetimes)?,
            (None, Some(b)) => b,
            (None, None) => isc_branching_from_steady_state(
                pops.ok_or_else(|| {
                    Error::Config("kinetics needs a preset, populations or branching".into())
                })?,
                lifetimes,
            )?,
        };
        let rates = KineticRates {
            pump_rate: self.pump_rate_mhz * MHZ,
            s1_decay_rate: self.s1_decay_rate_mhz * MHZ,
            isc_yield: self.isc_yield,
            isc_branching: branching,
            triplet_lifetimes: lifetimes,
        };
        rates.validate()?;
        Ok(rates)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZfsConfig {
    pub d_mhz: f64,
    pub e_mhz: f64,
}

impl Default for ZfsConfig {
    fn default() -> Self {
        let z = ZfsParams::pentacene();
        ZfsConfig {
            d_mhz: z.d / MHZ,
            e_mhz: z.e / MHZ,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldConfig {
    pub bx_mt: f64,
    pub by_mt: f64,
    pub bz_mt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReadoutConfig {
    pub window_us: f64,
    pub radiative_efficiency: f64,
}

impl Default for ReadoutConfig {
    fn default() -> Self {
        ReadoutConfig {
            window_us: 1.0,
            radiative_efficiency: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub zfs: ZfsConfig,
    pub field: FieldConfig,
    pub gamma_mhz_per_mt: f64,
    pub kinetics: KineticsConfig,
    pub readout: ReadoutConfig,
    pub dephasing_time_us: Option<f64>,
    pub count_noise: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            zfs: ZfsConfig::default(),
            field: FieldConfig::default(),
            gamma_mhz_per_mt: GyroRatio::ELECTRON.hz_per_tesla() / MHZ * MT,
            kinetics: KineticsConfig::default(),
            readout: ReadoutConfig::default(),
            dephasing_time_us: None,
            count_noise: 0.0,
        }
    }
}

impl SystemConfig {
    pub fn zfs(&self) -> Result<ZfsParams> {
        ZfsParams::new(self.zfs.d_mhz * MHZ, self.zfs.e_mhz * MHZ)
    }

    pub fn gamma(&self) -> Result<GyroRatio> {
        GyroRatio::new(self.gamma_mhz_per_mt * MHZ / MT)
    }

    pub fn resolve(&self) -> Result<SystemParams> {
        let p = SystemParams {
            zfs: self.zfs()?,
            field: FieldVector::new(
                self.field.bx_mt * MT,
                self.field.by_mt * MT,
                self.field.bz_mt * MT,
            )?,
            gamma: self.gamma()?,
            kinetics: self.kinetics.resolve()?,
            readout: ReadoutParams {
                window: self.readout.window_us * US,
                radiative_efficiency: self.readout.radiative_efficiency,
            },
            dephasing_time: self.dephasing_time_us.map(|t| t * US),
            count_noise: self.count_noise,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub axis: Axis,
    pub b_min_mt: f64,
    pub b_max_mt: f64,
    pub points: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig {
            axis: Axis::Z,
            b_min_mt: 0.0,
            b_max_mt: 0.0,
            points: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldOdmrConfig {
    pub axis: Axis,
    pub b_min_mt: f64,
    pub b_max_mt: f64,
    pub b_points: usize,
    pub f_min_mhz: f64,
    pub f_max_mhz: f64,
    pub f_points: usize,
    pub linewidth_mhz: f64,
    pub delay_us: Option<f64>,
}

impl Default for FieldOdmrConfig {
    fn default() -> Self {
        FieldOdmrConfig {
            axis: Axis::Z,
            b_min_mt: 0.0,
            b_max_mt: 100.0,
            b_points: 51,
            f_min_mhz: 500.0,
            f_max_mhz: 3500.0,
            f_points: 301,
            linewidth_mhz: 20.0,
            delay_us: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdmrConfig {
    pub f_min_mhz: f64,
    pub f_max_mhz: f64,
    pub points: usize,
    pub rabi_mhz: f64,
    pub init_us: f64,
    pub multilevel: bool,
    pub delay_us: Option<f64>,
}

impl Default for OdmrConfig {
    fn default() -> Self {
        OdmrConfig {
            f_min_mhz: 800.0,
            f_max_mhz: 2600.0,
            points: 361,
            rabi_mhz: 5.0,
            init_us: 15.0,
            multilevel: false,
            delay_us: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RabiConfig {
    pub transition: TransitionPair,
    pub rabi_mhz: f64,
    pub t2_star_us: f64,
    pub t_max_us: f64,
    pub points: usize,
}

impl Default for RabiConfig {
    fn default() -> Self {
        RabiConfig {
            transition: TransitionPair::YZ,
            rabi_mhz: 58.9,
            t2_star_us: 0.195,
            t_max_us: 0.6,
            points: 301,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EseemConfig {
    pub a: f64,
    pub b: f64,
    pub omega_mhz: f64,
}

impl Default for EseemConfig {
    fn default() -> Self {
        EseemConfig {
            a: 1.0,
            b: 0.5,
            omega_mhz: 0.1402,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EchoConfig {
    pub t2_us: f64,
    pub nu: f64,
    pub eseem: Option<EseemConfig>,
    pub t_max_us: f64,
    pub points: usize,
}

impl Default for EchoConfig {
    fn default() -> Self {
        EchoConfig {
            t2_us: 22.4,
            nu: 1.10,
            eseem: Some(EseemConfig::default()),
            t_max_us: 60.0,
            points: 301,
        }
    }
}

impl EchoConfig {
    pub fn model(&self) -> Result<CoherenceModel> {
        let m = CoherenceModel::new(self.t2_us * US, self.nu)?;
        match self.eseem {
            Some(e) => m.with_eseem(Eseem {
                a: e.a,
                b: e.b,
                omega: e.omega_mhz * MHZ,
            }),
            None => Ok(m),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct T1Config {
    pub delay_min_us: f64,
    pub delay_max_us: f64,
    pub points: usize,
    pub log_spaced: bool,
    /// Relative Gaussian noise on each point.
    pub noise: f64,
}

impl Default for T1Config {
    fn default() -> Self {
        T1Config {
            delay_min_us: 1.0,
            delay_max_us: 500.0,
            points: 200,
            log_spaced: true,
            noise: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DdScalingConfig {
    pub t2_1_us: f64,
    pub nu: f64,
    pub t1_rho_us: f64,
    pub n_max: u32,
    pub n_values: Option<Vec<u32>>,
}

impl Default for DdScalingConfig {
    fn default() -> Self {
        DdScalingConfig {
            t2_1_us: 22.4,
            nu: 0.53,
            t1_rho_us: 405.0,
            n_max: 512,
            n_values: None,
        }
    }
}

impl DdScalingConfig {
    pub fn params(&self) -> DdScalingParams {
        DdScalingParams {
            t2_1: self.t2_1_us * US,
            nu: self.nu,
            t1_rho: self.t1_rho_us * US,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcSenseConfig {
    pub amplitude_mt: f64,
    pub frequency_mhz: f64,
    /// Fixed AC phase; absent means a uniformly random phase.
    pub phase_deg: Option<f64>,
    /// Draw random phases instead of equispaced ones.
    pub random_phases: bool,
    pub phase_samples: usize,
    pub probe_gamma_mhz_per_mt: f64,
    pub tau_max_us: f64,
    pub points: usize,
}

impl Default for AcSenseConfig {
    fn default() -> Self {
        AcSenseConfig {
            amplitude_mt: 1.8e-3,
            frequency_mhz: 0.1,
            phase_deg: None,
            random_phases: false,
            phase_samples: 64,
            probe_gamma_mhz_per_mt: 28.0,
            tau_max_us: 40.0,
            points: 801,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NmrCorrelationConfig {
    /// "1H", "2H", or any name when `gamma_mhz_per_mt` is given.
    pub species: String,
    pub gamma_mhz_per_mt: Option<f64>,
    pub b_mt: f64,
    pub tc_max_us: f64,
    pub points: usize,
    /// Echo half-length; absent means half a Larmor period.
    pub tau_us: Option<f64>,
    pub nuclear_t1_us: f64,
    pub block_phase: f64,
}

impl Default for NmrCorrelationConfig {
    fn default() -> Self {
        NmrCorrelationConfig {
            species: "1H".into(),
            gamma_mhz_per_mt: None,
            b_mt: 150.0,
            tc_max_us: 40.0,
            points: 2001,
            tau_us: None,
            nuclear_t1_us: 1000.0,
            block_phase: 0.5,
        }
    }
}

impl NmrCorrelationConfig {
    pub fn species(&self) -> Result<NuclearSpecies> {
        match (self.gamma_mhz_per_mt, self.species.as_str()) {
            (Some(g), name) => NuclearSpecies::new(name, g * MHZ / MT),
            (None, "1H") => Ok(NuclearSpecies::proton()),
            (None, "2H") => Ok(NuclearSpecies::deuteron()),
            (None, other) => Err(Error::Config(format!(
                "nmr-correlation.species: unknown species '{other}' (use 1H, 2H or set gamma_mhz_per_mt)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DarkSpinConfig {
    pub g_factor: f64,
    pub coupling_mean_mhz: f64,
    pub coupling_spread_mhz: f64,
    pub linewidth_mhz: f64,
}

impl Default for DarkSpinConfig {
    fn default() -> Self {
        DarkSpinConfig {
            g_factor: 2.0,
            coupling_mean_mhz: 1.0,
            coupling_spread_mhz: 0.5,
            linewidth_mhz: 20.0,
        }
    }
}

impl DarkSpinConfig {
    pub fn dark_spin(&self) -> Result<DarkSpin> {
        let d = DarkSpin {
            g_factor: self.g_factor,
            coupling_mean: self.coupling_mean_mhz * MHZ,
            coupling_spread: self.coupling_spread_mhz * MHZ,
            linewidth: self.linewidth_mhz * MHZ,
        };
        d.validate()?;
        Ok(d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeerConfig {
    pub dark: DarkSpinConfig,
    pub b_mt: f64,
    pub f_min_mhz: f64,
    pub f_max_mhz: f64,
    pub points: usize,
    pub t_fix_us: f64,
    pub coupling_samples: usize,
}

impl Default for DeerConfig {
    fn default() -> Self {
        DeerConfig {
            dark: DarkSpinConfig::default(),
            b_mt: 190.0,
            f_min_mhz: 5200.0,
            f_max_mhz: 5450.0,
            points: 251,
            t_fix_us: 0.5,
            coupling_samples: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeerRabiConfig {
    pub dark: DarkSpinConfig,
    pub rabi_mhz: f64,
    pub detuning_mhz: f64,
    pub t_max_us: f64,
    pub points: usize,
    pub t_fix_us: f64,
    pub coupling_samples: usize,
}

impl Default for DeerRabiConfig {
    fn default() -> Self {
        DeerRabiConfig {
            dark: DarkSpinConfig {
                linewidth_mhz: 1.0,
                ..DarkSpinConfig::default()
            },
            rabi_mhz: 35.4,
            detuning_mhz: 0.0,
            t_max_us: 0.2,
            points: 401,
            t_fix_us: 0.5,
            coupling_samples: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub model: FitModel,
    pub input: Option<PathBuf>,
    /// Column names (without unit) or zero-based indices.
    pub x_column: ColumnRef,
    pub y_column: ColumnRef,
    pub initial_guess: Option<Vec<f64>>,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            model: FitModel::DampedCosine,
            input: None,
            x_column: ColumnRef::Index(0),
            y_column: ColumnRef::Index(1),
            initial_guess: None,
            max_iter: 500,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub system: SystemConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default, rename = "field-odmr")]
    pub field_odmr: FieldOdmrConfig,
    #[serde(default)]
    pub odmr: OdmrConfig,
    #[serde(default)]
    pub rabi: RabiConfig,
    #[serde(default)]
    pub echo: EchoConfig,
    #[serde(default)]
    pub t1: T1Config,
    #[serde(default, rename = "dd-scaling")]
    pub dd_scaling: DdScalingConfig,
    #[serde(default, rename = "ac-sense")]
    pub ac_sense: AcSenseConfig,
    #[serde(default, rename = "nmr-correlation")]
    pub nmr_correlation: NmrCorrelationConfig,
    #[serde(default)]
    pub deer: DeerConfig,
    #[serde(default, rename = "deer-rabi")]
    pub deer_rabi: DeerRabiConfig,
    #[serde(default)]
    pub fit: FitConfig,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        ExperimentConfig {
            kind,
            seed: 0,
            output: OutputConfig::default(),
            system: SystemConfig::default(),
            spectrum: SpectrumConfig::default(),
            field_odmr: FieldOdmrConfig::default(),
            odmr: OdmrConfig::default(),
            rabi: RabiConfig::default(),
            echo: EchoConfig::default(),
            t1: T1Config::default(),
            dd_scaling: DdScalingConfig::default(),
            ac_sense: AcSenseConfig::default(),
            nmr_correlation: NmrCorrelationConfig::default(),
            deer: DeerConfig::default(),
            deer_rabi: DeerRabiConfig::default(),
            fit: FitConfig::default(),
        }
    }

    /// Checks the physical invariants of the system and of the selected
    /// experiment's section.
    pub fn validate(&self) -> Result<()> {
        let section = self.kind.name();
        self.system.resolve().map_err(|e| as_config("system", e))?;
        self.section_check().map_err(|e| as_config(section, e))
    }

    fn section_check(&self) -> Result<()> {
        match self.kind {
            ExperimentKind::Spectrum => grid(
                "points",
                self.spectrum.points,
                self.spectrum.b_min_mt,
                self.spectrum.b_max_mt,
            ),
            ExperimentKind::FieldOdmr => {
                let c = &self.field_odmr;
                grid("b_points", c.b_points, c.b_min_mt, c.b_max_mt)?;
                grid("f_points", c.f_points, c.f_min_mhz, c.f_max_mhz)?;
                positive("linewidth_mhz", c.linewidth_mhz)?;
                c.delay_us.map_or(Ok(()), |d| non_negative("delay_us", d))
            }
            ExperimentKind::Odmr => {
                let c = &self.odmr;
                grid("points", c.points, c.f_min_mhz, c.f_max_mhz)?;
                positive("rabi_mhz", c.rabi_mhz)?;
                non_negative("init_us", c.init_us)?;
                c.delay_us.map_or(Ok(()), |d| non_negative("delay_us", d))
            }
            ExperimentKind::Rabi => {
                let c = &self.rabi;
                grid("points", c.points, 0.0, c.t_max_us)?;
                non_negative("rabi_mhz", c.rabi_mhz)?;
                positive("t2_star_us", c.t2_star_us)
            }
            ExperimentKind::Echo => {
                grid("points", self.echo.points, 0.0, self.echo.t_max_us)?;
                self.echo.model().map(|_| ())
            }
            ExperimentKind::T1 => {
                let c = &self.t1;
                grid("points", c.points, c.delay_min_us, c.delay_max_us)?;
                non_negative("delay_min_us", c.delay_min_us)?;
                if c.log_spaced {
                    positive("delay_min_us", c.delay_min_us)?;
                }
                non_negative("noise", c.noise)
            }
            ExperimentKind::DdScaling => {
                let c = &self.dd_scaling;
                c.params().validate()?;
                match &c.n_values {
                    Some(v) if v.is_empty() || v.contains(&0) => {
                        Err(Error::Config("n_values must be non-empty and >= 1".into()))
                    }
                    None if c.n_max == 0 => Err(Error::Config("n_max must be >= 1".into())),
                    _ => Ok(()),
                }
            }
            ExperimentKind::AcSense => {
                let c = &self.ac_sense;
                grid("points", c.points, 0.0, c.tau_max_us)?;
                non_negative("amplitude_mt", c.amplitude_mt)?;
                positive("frequency_mhz", c.frequency_mhz)?;
                if c.phase_samples == 0 {
                    return Err(Error::Config("phase_samples must be >= 1".into()));
                }
                Ok(())
            }
            ExperimentKind::NmrCorrelation => {
                let c = &self.nmr_correlation;
                c.species()?;
                grid("points", c.points, 0.0, c.tc_max_us)?;
                non_negative("b_mt", c.b_mt)?;
                positive("nuclear_t1_us", c.nuclear_t1_us)?;
                c.tau_us.map_or(Ok(()), |t| positive("tau_us", t))
            }
            ExperimentKind::Deer => {
                let c = &self.deer;
                c.dark.dark_spin()?;
                grid("points", c.points, c.f_min_mhz, c.f_max_mhz)?;
                non_negative("t_fix_us", c.t_fix_us)?;
                if c.coupling_samples == 0 {
                    return Err(Error::Config("coupling_samples must be >= 1".into()));
                }
                Ok(())
            }
            ExperimentKind::DeerRabi => {
                let c = &self.deer_rabi;
                c.dark.dark_spin()?;
                grid("points", c.points, 0.0, c.t_max_us)?;
                non_negative("rabi_mhz", c.rabi_mhz)?;
                non_negative("t_fix_us", c.t_fix_us)?;
                if c.coupling_samples == 0 {
                    return Err(Error::Config("coupling_samples must be >= 1".into()));
                }
                Ok(())
            }
            ExperimentKind::Fit => {
                let c = &self.fit;
                if c.input.is_none() {
                    return Err(Error::Config(
                        "input: a trace file to fit is required".into(),
                    ));
                }
                if let Some(g) = &c.initial_guess {
                    c.model.check_params(g)?;
                }
                if c.max_iter == 0 || !(c.tol > 0.0) {
                    return Err(Error::Config("max_iter must be >= 1 and tol > 0".into()));
                }
                Ok(())
            }
        }
    }
}

fn as_config(section: &str, e: Error) -> Error {
    match e {
        Error::Config(m) => Error::Config(format!("{section}: {m}")),
        other => Error::Config(format!("{section}: {other}")),
    }
}

fn grid(name: &str, points: usize, lo: f64, hi: f64) -> Result<()> {
    if points == 0 {
        return Err(Error::Config(format!("{name} must be >= 1")));
    }
    if !lo.is_finite() || !hi.is_finite() || hi < lo {
        return Err(Error::Config(format!(
            "grid for {name} needs finite bounds with max >= min, got [{lo}, {hi}]"
        )));
    }
    Ok(())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be > 0, got {v}")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be >= 0, got {v}")))
    }
}

/// Parses config text into a JSON value, without schema checks.
pub fn parse_value(text: &str) -> Result<Value> {
    if text.trim().is_empty() {
        return Err(Error::Config("config is empty".into()));
    }
    serde_json::from_str(text).map_err(|e| Error::Config(format!("config is not valid JSON: {e}")))
}

/// Sets `path` (dot separated) in `root` to `raw`, parsed as JSON when
/// possible and kept as a string otherwise. Intermediate objects are
/// created as needed.
pub fn apply_override(root: &mut Value, path: &str, raw: &str) -> Result<()> {
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("invalid override key '{path}'")));
    }
    if !root.is_object() {
        *root = Value::Object(Default::default());
    }
    let mut node = root;
    for key in &keys[..keys.len() - 1] {
        let obj = node.as_object_mut().ok_or_else(|| {
            Error::Config(format!(
                "override '{path}': '{key}' is not inside an object"
            ))
        })?;
        let child = obj
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
        if child.is_null() {
            *child = Value::Object(Default::default());
        }
        node = child;
    }
    node.as_object_mut()
        .ok_or_else(|| Error::Config(format!("override '{path}': parent is not an object")))?
        .insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

/// Builds a validated config from a JSON value.
pub fn config_from_value(mut value: Value) -> Result<ExperimentConfig> {
    // `"kinetics": "4K"` is shorthand for `"kinetics": {"preset": "4K"}`.
    if let Some(k) = value.pointer_mut("/system/kinetics") {
        if k.is_string() {
            *k = serde_json::json!({ "preset": k.take() });
        }
    }
    let config: ExperimentConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            Error::Config(inner.to_string())
        } else {
            Error::Config(format!("{path}: {inner}"))
        }
    })?;
    config.validate()?;
    Ok(config)
}

/// Parses and validates config text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    config_from_value(parse_value(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_expands_to_table_values() {
        let c = parse_config(r#"{"kind": "t1", "system": {"kinetics": "4K"}}"#).unwrap();
        let r = c.system.kinetics.resolve().unwrap();
        assert_eq!(r.triplet_lifetimes, LIFETIMES_4K);
    }

    #[test]
    fn errors_name_the_key() {
        let e = parse_config(r#"{"kind": "odmr", "odmr": {"rabi_mhz": "fast"}}"#).unwrap_err();
        assert!(e.to_string().contains("odmr.rabi_mhz"), "{e}");
        let e = parse_config(r#"{"kind": "odmr", "odmr": {"rabbi_mhz": 1}}"#).unwrap_err();
        assert!(e.to_string().contains("rabbi_mhz"), "{e}");
        let e = parse_config(
            r#"{"kind": "spectrum", "system": {"zfs": {"d_mhz": 100, "e_mhz": 500}}}"#,
        )
        .unwrap_err();
        assert!(e.is_config() && e.to_string().contains("|E| <= |D|"), "{e}");
        assert!(parse_config("").unwrap_err().is_config());
    }

    #[test]
    fn overrides_create_and_replace() {
        let mut v = parse_value(r#"{"kind": "rabi", "rabi": {"points": 3}}"#).unwrap();
        apply_override(&mut v, "rabi.points", "7").unwrap();
        apply_override(&mut v, "system.kinetics.preset", "295K").unwrap();
        let c = config_from_value(v).unwrap();
        assert_eq!(c.rabi.points, 7);
        assert_eq!(c.system.kinetics.preset, Some(Preset::Ambient));
    }
}
