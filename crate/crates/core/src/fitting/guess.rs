use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::models::{FitModel, MAX_EXPONENT};
use crate::error::{Error, Result};

/// Heuristic starting parameters for `model`, always inside its bounds.
pub fn estimate_initial_guess(model: FitModel, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::invalid(
            "initial guess needs non-empty data of matching length",
        ));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("fit data must be finite"));
    }
    let (lo, hi) = min_max(y);
    if hi - lo <= 1e-14 * hi.abs().max(lo.abs()) {
        return Err(Error::FlatData);
    }
    let (x, y) = sorted(x, y);
    let guess = match model {
        FitModel::Linear => linear_guess(&x, &y),
        FitModel::StretchedExp => {
            let (t2, amp) = decay_guess(&x, &y);
            vec![t2, 1.0, amp]
        }
        FitModel::StretchedExpEseem => eseem_guess(&x, &y),
        FitModel::DampedCosine => cosine_guess(&x, &y),
        FitModel::DdScaling => dd_guess(&x, &y),
        FitModel::TripleExponential => {
            peel_triple(&x, &y).unwrap_or_else(|| spread_triple(&x, &y, 1.0))
        }
    };
    model.check_params(&guess)?;
    Ok(guess)
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        })
}

fn sorted(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    (
        idx.iter().map(|&k| x[k]).collect(),
        idx.iter().map(|&k| y[k]).collect(),
    )
}

/// Ordinary least-squares line `(slope, intercept)`.
fn line(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

fn linear_guess(x: &[f64], y: &[f64]) -> Vec<f64> {
    let (s, i) = line(x, y).unwrap_or((0.0, y.iter().sum::<f64>() / y.len() as f64));
    vec![s, i]
}

/// `(1/e time, amplitude)` of a decaying trace.
fn decay_guess(x: &[f64], y: &[f64]) -> (f64, f64) {
    let amp = y[0];
    let target = amp / std::f64::consts::E;
    let span = x[x.len() - 1] - x[0];
    let t = x
        .windows(2)
        .zip(y.windows(2))
        .find(|(_, w)| (w[0] - target) * (w[1] - target) <= 0.0 && w[0] != w[1])
        .map(|(xs, w)| xs[0] + (target - w[0]) * (xs[1] - xs[0]) / (w[1] - w[0]))
        .unwrap_or(span.max(f64::MIN_POSITIVE));
    let t = if t > 0.0 { t } else { span / 2.0 };
    let amp = if amp != 0.0 {
        amp
    } else {
        y.iter()
            .cloned()
            .fold(0.0_f64, |a, b| if b.abs() > a.abs() { b } else { a })
    };
    (t.max(f64::MIN_POSITIVE), amp)
}

fn eseem_guess(x: &[f64], y: &[f64]) -> Vec<f64> {
    let (t2, a) = decay_guess(x, y);
    let a = a.abs().max(f64::MIN_POSITIVE);
    // Undo the decay and read the modulation: sin²(πωt/2) oscillates at ω/2.
    let flat: Vec<f64> = x.iter().zip(y).map(|(t, v)| v * (t / t2).exp()).collect();
    let omega = 2.0
        * fft_peak(x, &flat).map_or(
            1.0 / (x[x.len() - 1] - x[0]).max(f64::MIN_POSITIVE),
            |(f, _, _)| f,
        );
    vec![t2, 1.0, a, 0.5 * a, omega]
}

/// Frequency, amplitude and phase of the strongest oscillation in a
/// roughly uniformly sampled trace, from a zero-padded FFT with parabolic
/// peak interpolation and a direct projection at the refined frequency.
pub(crate) fn fft_peak(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    let n = x.len();
    if n < 4 {
        return None;
    }
    let dt = (x[n - 1] - x[0]) / (n - 1) as f64;
    if !(dt > 0.0) {
        return None;
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let m = (8 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = y.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    buf.resize(m, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let mag: Vec<f64> = buf[..m / 2].iter().map(|c| c.norm()).collect();
    let k = (1..m / 2).max_by(|&a, &b| mag[a].total_cmp(&mag[b]))?;
    let shift = if k + 1 < m / 2 {
        let (a, b, c) = (mag[k - 1], mag[k], mag[k + 1]);
        let d = a - 2.0 * b + c;
        if d != 0.0 {
            0.5 * (a - c) / d
        } else {
            0.0
        }
    } else {
        0.0
    };
    let f = (k as f64 + shift) / (m as f64 * dt);
    let (mut re, mut im) = (0.0, 0.0);
    for (t, v) in x.iter().zip(y) {
        let (s, c) = (2.0 * PI * f * t).sin_cos();
        re += (v - mean) * c;
        im += (v - mean) * s;
    }
    let amp = 2.0 * (re * re + im * im).sqrt() / n as f64;
    Some((f, amp, (-im).atan2(re)))
}

fn cosine_guess(x: &[f64], y: &[f64]) -> Vec<f64> {
    let span = (x[x.len() - 1] - x[0]).max(f64::MIN_POSITIVE);
    let offset = y.iter().sum::<f64>() / y.len() as f64;
    let (lo, hi) = min_max(y);
    let (f, amp, phase) = fft_peak(x, y).unwrap_or((1.0 / span, 0.5 * (hi - lo), 0.0));
    // The projection underestimates a decaying amplitude; the first-sample
    // excursion is a better start when available.
    let amp = amp.max(0.5 * (hi - lo));
    vec![
        f.max(f64::MIN_POSITIVE),
        phase,
        span / 3.0,
        2.0,
        amp,
        offset,
    ]
}

fn dd_guess(x: &[f64], y: &[f64]) -> Vec<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(n, t)| **n > 0.0 && **t > 0.0)
        .map(|(a, b)| (*a, *b))
        .collect();
    let y_max = y.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
    if pts.len() < 2 {
        return vec![y_max, 1.0, y_max];
    }
    // Early points sit in the power-law regime.
    let head = &pts[..(pts.len() / 2).max(2)];
    let lx: Vec<f64> = head.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = head.iter().map(|p| p.1.ln()).collect();
    let (nu, c) = line(&lx, &ly).unwrap_or((1.0, ly[0]));
    let nu = nu.clamp(0.05, MAX_EXPONENT);
    vec![c.exp(), nu, y_max]
}

/// Exponential peeling: fits the slow tail in log space, subtracts it, and
/// repeats on the earlier data.
fn peel_triple(x: &[f64], y: &[f64]) -> Option<Vec<f64>> {
    let n = x.len();
    if n < 9 {
        return None;
    }
    let mut resid = y.to_vec();
    let mut comps = Vec::new();
    let bounds = [(2 * n / 3, n), (n / 3, 2 * n / 3), (0, n / 3)];
    for (a, b) in bounds {
        let pts: Vec<(f64, f64)> = (a..b)
            .filter(|&k| resid[k] > 0.0)
            .map(|k| (x[k], resid[k].ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let (xs, ls): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        let (slope, icept) = line(&xs, &ls)?;
        if !(slope < 0.0) {
            return None;
        }
        let (amp, tau) = (icept.exp(), -1.0 / slope);
        for k in 0..n {
            resid[k] -= amp * (-x[k] / tau).exp();
        }
        comps.push((amp, tau));
    }
    comps.sort_by(|a, b| a.1.total_cmp(&b.1));
    let out: Vec<f64> = comps.iter().flat_map(|&(a, t)| [a, t]).collect();
    out.iter().all(|v| v.is_finite()).then_some(out)
}

/// Three components of equal amplitude with lifetimes spread geometrically
/// across the sampled range; `stretch` widens or narrows the spread.
fn spread_triple(x: &[f64], y: &[f64], stretch: f64) -> Vec<f64> {
    let pos: Vec<f64> = x.iter().cloned().filter(|v| *v > 0.0).collect();
    let (xmin, xmax) = if pos.is_empty() {
        (1.0, 10.0)
    } else {
        min_max(&pos)
    };
    let xmax = xmax.max(xmin * 10.0);
    let mid = (xmin * xmax).sqrt();
    let ratio = (xmax / xmin).powf(0.25 * stretch);
    let amp = y[0] / 3.0;
    let amp = if amp != 0.0 { amp } else { 1.0 };
    vec![amp, mid / ratio, amp, mid, amp, mid * ratio]
}

/// Extra starting points used by the multi-start triple-exponential fit.
pub(crate) fn triple_exponential_starts(x: &[f64], y: &[f64]) -> Vec<Vec<f64>> {
    let (x, y) = sorted(x, y);
    [0.3, 0.6, 1.0, 1.5]
        .iter()
        .map(|&s| spread_triple(&x, &y, s))
        .collect()
}
