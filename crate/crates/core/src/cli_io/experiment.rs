//! Dispatch from a validated config to the simulation modules.

use rand_distr::{Distribution, Normal};
use serde_json::Value;

use super::config::*;
use super::trace::{ingest, Column, TraceRecord};
use crate::coherence_sensing::{
    ac_echo_response, correlation_spectroscopy, dd_t2_scaling, deer_rabi, deer_spectrum,
    echo_trace, nmr_frequency, optimal_correlation_tau, AcSignal, CorrelationSettings, PhaseModel,
    PhaseSampling,
};
use crate::error::{Error, Result};
use crate::fitting::{estimate_initial_guess, fit, FitOptions};
use crate::photokinetics::t1_relaxation_curve;
use crate::pulse_engine::{
    pulsed_odmr_sweep, simulate_field_odmr, simulate_rabi, FieldOdmrSettings, OdmrProtocol,
    PulseEngine,
};
use crate::rng::stream_rng;
use crate::spin_model::{field_sweep_spectrum, TransitionPair};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `points` evenly spaced values from `lo` to `hi`; a single point sits at `lo`.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        n => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

pub fn logspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    linspace(lo.ln(), hi.ln(), points)
        .into_iter()
        .map(f64::exp)
        .collect()
}

fn two_columns(x: (&str, &str), y: (&str, &str), xs: &[f64], ys: &[f64]) -> TraceRecord {
    let mut r = TraceRecord::new(vec![Column::new(x.0, x.1), Column::new(y.0, y.1)]);
    for (a, b) in xs.iter().zip(ys) {
        r.push(vec![*a, *b]);
    }
    r
}

/// Runs the experiment selected by `config.kind`. The returned record's
/// metadata carries the full config, the crate version and the seed.
pub fn run_experiment(config: &ExperimentConfig) -> Result<TraceRecord> {
    config.validate()?;
    let kind = config.kind;
    log::info!("running {kind} (seed {})", config.seed);
    let mut record = dispatch(config).map_err(|e| e.context(format!("{kind} experiment")))?;
    record
        .metadata
        .insert("kind".into(), Value::from(kind.name()));
    record
        .metadata
        .insert("seed".into(), Value::from(config.seed));
    record.metadata.insert(
        "version".into(),
        Value::from(format!("tripletsim {VERSION}")),
    );
    record.metadata.insert("config".into(), config_echo(config));
    Ok(record)
}

/// The parts of the config that determine the result: kind, seed, system
/// and the selected experiment's section. Output settings are left out so
/// the same run written to two places produces identical bytes.
pub fn config_echo(config: &ExperimentConfig) -> Value {
    let full = serde_json::to_value(config).expect("config serializes");
    let keep = ["kind", "seed", "system", config.kind.name()];
    Value::Object(
        full.as_object()
            .expect("config is an object")
            .iter()
            .filter(|(k, _)| keep.contains(&k.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect(),
    )
}

fn dispatch(config: &ExperimentConfig) -> Result<TraceRecord> {
    let sys = &config.system;
    match config.kind {
        ExperimentKind::Spectrum => {
            let c = &config.spectrum;
            let bs = linspace(c.b_min_mt, c.b_max_mt, c.points);
            let si: Vec<f64> = bs.iter().map(|b| b * MT).collect();
            let rows = field_sweep_spectrum(sys.zfs()?, c.axis, &si, sys.gamma()?)?;
            let mut r = TraceRecord::new(vec![
                Column::new("b", "mT"),
                Column::new("f_xy", "MHz"),
                Column::new("f_yz", "MHz"),
                Column::new("f_xz", "MHz"),
                Column::new("e_x", "MHz"),
                Column::new("e_y", "MHz"),
                Column::new("e_z", "MHz"),
            ]);
            for (b, row) in bs.iter().zip(&rows) {
                let mut v = vec![*b];
                v.extend(TransitionPair::ALL.iter().map(|p| row.frequency(*p) / MHZ));
                v.extend(row.energies.iter().map(|e| e / MHZ));
                r.push(v);
            }
            Ok(r)
        }
        ExperimentKind::FieldOdmr => {
            let c = &config.field_odmr;
            let bs = linspace(c.b_min_mt, c.b_max_mt, c.b_points);
            let fs = linspace(c.f_min_mhz, c.f_max_mhz, c.f_points);
            let p = sys.resolve()?;
            let settings = FieldOdmrSettings {
                kinetics: p.kinetics,
                readout: p.readout,
                gamma: p.gamma,
                linewidth: c.linewidth_mhz * MHZ,
                delay: c.delay_us.map(|d| d * US),
            };
            let si_b: Vec<f64> = bs.iter().map(|b| b * MT).collect();
            let si_f: Vec<f64> = fs.iter().map(|f| f * MHZ).collect();
            let map = simulate_field_odmr(p.zfs, c.axis, &si_b, &si_f, &settings)?;
            let mut r = TraceRecord::new(vec![
                Column::new("b", "mT"),
                Column::new("f", "MHz"),
                Column::new("contrast", "1"),
            ]);
            for (i, b) in bs.iter().enumerate() {
                for (j, f) in fs.iter().enumerate() {
                    r.push(vec![*b, *f, map.contrast[i][j]]);
                }
            }
            Ok(r)
        }
        ExperimentKind::Odmr => {
            let c = &config.odmr;
            let fs = linspace(c.f_min_mhz, c.f_max_mhz, c.points);
            let engine = PulseEngine::new(sys.resolve()?)?;
            let protocol = OdmrProtocol {
                init_duration: c.init_us * US,
                rabi_freq: c.rabi_mhz * MHZ,
                multilevel: c.multilevel,
                delay: c.delay_us.map(|d| d * US),
            };
            let si: Vec<f64> = fs.iter().map(|f| f * MHZ).collect();
            let contrast = pulsed_odmr_sweep(&engine, &si, &protocol, config.seed)?;
            Ok(two_columns(("f", "MHz"), ("contrast", "1"), &fs, &contrast))
        }
        ExperimentKind::Rabi => {
            let c = &config.rabi;
            let ts = linspace(0.0, c.t_max_us, c.points);
            let si: Vec<f64> = ts.iter().map(|t| t * US).collect();
            let p = simulate_rabi(c.transition, c.rabi_mhz * MHZ, &si, c.t2_star_us * US)?;
            Ok(two_columns(("t", "us"), ("transferred", "1"), &ts, &p))
        }
        ExperimentKind::Echo => {
            let c = &config.echo;
            let ts = linspace(0.0, c.t_max_us, c.points);
            let si: Vec<f64> = ts.iter().map(|t| t * US).collect();
            let y = echo_trace(&c.model()?, &si)?;
            Ok(two_columns(("t", "us"), ("echo", "1"), &ts, &y))
        }
        ExperimentKind::T1 => {
            let c = &config.t1;
            let ts = if c.log_spaced {
                logspace(c.delay_min_us, c.delay_max_us, c.points)
            } else {
                linspace(c.delay_min_us, c.delay_max_us, c.points)
            };
            let si: Vec<f64> = ts.iter().map(|t| t * US).collect();
            let mut y = t1_relaxation_curve(&sys.kinetics.resolve()?, &si)?;
            if c.noise > 0.0 {
                let normal =
                    Normal::new(0.0, c.noise).map_err(|e| Error::invalid(e.to_string()))?;
                for (k, v) in y.iter_mut().enumerate() {
                    *v *= 1.0 + normal.sample(&mut stream_rng(config.seed, k as u64));
                }
            }
            Ok(two_columns(("delay", "us"), ("signal", "1"), &ts, &y))
        }
        ExperimentKind::DdScaling => {
            let c = &config.dd_scaling;
            let ns: Vec<u32> = c
                .n_values
                .clone()
                .unwrap_or_else(|| (1..=c.n_max).collect());
            let params = c.params();
            let mut r =
                TraceRecord::new(vec![Column::new("n_pulses", "1"), Column::new("t2", "us")]);
            for n in ns {
                r.push(vec![n as f64, dd_t2_scaling(&params, n)? / US]);
            }
            Ok(r)
        }
        ExperimentKind::AcSense => {
            let c = &config.ac_sense;
            let taus = linspace(0.0, c.tau_max_us, c.points);
            let si: Vec<f64> = taus.iter().map(|t| t * US).collect();
            let ac = AcSignal {
                amplitude: c.amplitude_mt * MT,
                frequency: c.frequency_mhz * MHZ,
                phase_model: match c.phase_deg {
                    Some(p) => PhaseModel::Fixed { phase: p * DEG },
                    None => PhaseModel::RandomUniform,
                },
            };
            let sampling = if c.random_phases {
                PhaseSampling::Random {
                    samples: c.phase_samples,
                    seed: config.seed,
                }
            } else {
                PhaseSampling::Equispaced {
                    samples: c.phase_samples,
                }
            };
            let y = ac_echo_response(&ac, c.probe_gamma_mhz_per_mt * MHZ / MT, &si, sampling)?;
            Ok(two_columns(("tau", "us"), ("contrast", "1"), &taus, &y))
        }
        ExperimentKind::NmrCorrelation => {
            let c = &config.nmr_correlation;
            let species = c.species()?;
            let b = c.b_mt * MT;
            let tcs = linspace(0.0, c.tc_max_us, c.points);
            let si: Vec<f64> = tcs.iter().map(|t| t * US).collect();
            let tau = match c.tau_us {
                Some(t) => t * US,
                None => optimal_correlation_tau(nmr_frequency(&species, b)?.max(f64::MIN_POSITIVE)),
            };
            let settings = CorrelationSettings {
                max_block_phase: c.block_phase,
                ..Default::default()
            };
            let y =
                correlation_spectroscopy(&species, b, &si, tau, c.nuclear_t1_us * US, &settings)?;
            Ok(two_columns(("t_corr", "us"), ("signal", "1"), &tcs, &y))
        }
        ExperimentKind::Deer => {
            let c = &config.deer;
            let fs = linspace(c.f_min_mhz, c.f_max_mhz, c.points);
            let si: Vec<f64> = fs.iter().map(|f| f * MHZ).collect();
            let y = deer_spectrum(
                &c.dark.dark_spin()?,
                c.b_mt * MT,
                &si,
                c.t_fix_us * US,
                c.coupling_samples,
            )?;
            Ok(two_columns(("f", "MHz"), ("contrast", "1"), &fs, &y))
        }
        ExperimentKind::DeerRabi => {
            let c = &config.deer_rabi;
            let ts = linspace(0.0, c.t_max_us, c.points);
            let si: Vec<f64> = ts.iter().map(|t| t * US).collect();
            let y = deer_rabi(
                &c.dark.dark_spin()?,
                c.rabi_mhz * MHZ,
                &si,
                c.detuning_mhz * MHZ,
                c.t_fix_us * US,
                c.coupling_samples,
            )?;
            Ok(two_columns(("t", "us"), ("contrast", "1"), &ts, &y))
        }
        ExperimentKind::Fit => run_fit(&config.fit),
    }
}

fn resolve_column(trace: &TraceRecord, c: &ColumnRef) -> Result<usize> {
    match c {
        ColumnRef::Index(k) if *k < trace.columns.len() => Ok(*k),
        ColumnRef::Name(n) => trace
            .column_index(n)
            .ok_or_else(|| Error::Config(format!("fit: input has no column named '{n}'"))),
        ColumnRef::Index(k) => Err(Error::Config(format!("fit: input has no column {k}"))),
    }
}

fn run_fit(c: &FitConfig) -> Result<TraceRecord> {
    let path = c
        .input
        .as_ref()
        .ok_or_else(|| Error::Config("fit.input is required".into()))?;
    let bytes = std::fs::read(path)
        .map_err(|e| Error::Config(format!("fit.input '{}': {e}", path.display())))?;
    let trace = ingest(&bytes)?;
    let (xi, yi) = (
        resolve_column(&trace, &c.x_column)?,
        resolve_column(&trace, &c.y_column)?,
    );
    let (x, y) = (trace.column(xi), trace.column(yi));
    let guess = match &c.initial_guess {
        Some(g) => g.clone(),
        None => estimate_initial_guess(c.model, &x, &y)?,
    };
    let result = fit(
        c.model,
        &x,
        &y,
        &guess,
        &FitOptions {
            max_iter: c.max_iter,
            tol: c.tol,
        },
    )?;
    let mut columns = vec![Column::new("row", "value=0;stderr=1")];
    columns.extend(c.model.param_names().iter().map(|n| Column::new(n, "fit")));
    let mut r = TraceRecord::new(columns);
    let mut values = vec![0.0];
    values.extend(&result.params);
    let mut errors = vec![1.0];
    errors.extend(&result.std_errors);
    r.push(values);
    r.push(errors);
    r.metadata.insert("fit_rss".into(), Value::from(result.rss));
    r.metadata
        .insert("fit_converged".into(), Value::from(result.converged));
    r.metadata
        .insert("fit_iterations".into(), Value::from(result.iterations));
    r.metadata
        .insert("fit_model".into(), Value::from(c.model.name()));
    r.metadata.insert(
        "fit_input_units".into(),
        Value::from(format!(
            "{} vs {}",
            trace.columns[yi].header(),
            trace.columns[xi].header()
        )),
    );
    Ok(r)
}
