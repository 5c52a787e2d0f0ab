use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper limit of stretch and envelope exponents.
pub const MAX_EXPONENT: f64 = 4.0;

/// Model families the fitter understands. Parameter layouts:
///
/// | model | parameters |
/// |---|---|
/// | `TripleExponential` | `a1, τ1, a2, τ2, a3, τ3` |
/// | `StretchedExp` | `T2, ν, amplitude` |
/// | `StretchedExpEseem` | `T2, ν, a, b, ω` (ω in Hz) |
/// | `DampedCosine` | `f, phase, τ, p, amplitude, offset` |
/// | `DdScaling` | `T2(1), ν, T1ρ` |
/// | `Linear` | `slope, intercept` |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitModel {
    TripleExponential,
    StretchedExp,
    StretchedExpEseem,
    DampedCosine,
    DdScaling,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Bound {
    Free,
    Positive,
    /// Open at the lower end, closed at the upper end.
    Interval(f64, f64),
    /// `b` of the ESEEM model: `0 < b <= a`.
    BelowA,
}

impl FitModel {
    pub const ALL: [FitModel; 6] = [
        FitModel::TripleExponential,
        FitModel::StretchedExp,
        FitModel::StretchedExpEseem,
        FitModel::DampedCosine,
        FitModel::DdScaling,
        FitModel::Linear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FitModel::TripleExponential => "triple-exponential",
            FitModel::StretchedExp => "stretched-exp",
            FitModel::StretchedExpEseem => "stretched-exp-eseem",
            FitModel::DampedCosine => "damped-cosine",
            FitModel::DdScaling => "dd-scaling",
            FitModel::Linear => "linear",
        }
    }

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            FitModel::TripleExponential => &["a1", "tau1", "a2", "tau2", "a3", "tau3"],
            FitModel::StretchedExp => &["t2", "nu", "amplitude"],
            FitModel::StretchedExpEseem => &["t2", "nu", "a", "b", "omega"],
            FitModel::DampedCosine => &[
                "frequency",
                "phase",
                "tau",
                "exponent",
                "amplitude",
                "offset",
            ],
            FitModel::DdScaling => &["t2_1", "nu", "t1_rho"],
            FitModel::Linear => &["slope", "intercept"],
        }
    }

    pub fn n_params(self) -> usize {
        self.param_names().len()
    }

    pub(crate) fn bounds(self) -> &'static [Bound] {
        use Bound::*;
        const NU: Bound = Interval(0.0, MAX_EXPONENT);
        match self {
            FitModel::TripleExponential => &[Free, Positive, Free, Positive, Free, Positive],
            FitModel::StretchedExp => &[Positive, NU, Free],
            FitModel::StretchedExpEseem => &[Positive, NU, Positive, BelowA, Positive],
            FitModel::DampedCosine => &[Positive, Free, Positive, NU, Free, Free],
            FitModel::DdScaling => &[Positive, NU, Positive],
            FitModel::Linear => &[Free, Free],
        }
    }

    pub fn check_params(self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::invalid(format!(
                "{} takes {} parameters, got {}",
                self.name(),
                self.n_params(),
                params.len()
            )));
        }
        for (k, (&p, b)) in params.iter().zip(self.bounds()).enumerate() {
            let name = self.param_names()[k];
            let ok = p.is_finite()
                && match *b {
                    Bound::Free => true,
                    Bound::Positive => p > 0.0,
                    Bound::Interval(lo, hi) => p > lo && p <= hi,
                    Bound::BelowA => p > 0.0 && p <= params[k - 1],
                };
            if !ok {
                return Err(Error::invalid(format!(
                    "{} parameter {name} = {p} is out of bounds",
                    self.name()
                )));
            }
        }
        Ok(())
    }

    /// Evaluates the model at a single abscissa. Parameters are assumed valid.
    pub(crate) fn eval_unchecked(self, p: &[f64], x: f64) -> f64 {
        match self {
            FitModel::TripleExponential => {
                p[0] * (-x / p[1]).exp() + p[2] * (-x / p[3]).exp() + p[4] * (-x / p[5]).exp()
            }
            FitModel::StretchedExp => p[2] * (-(x / p[0]).powf(p[1])).exp(),
            FitModel::StretchedExpEseem => {
                (-(x / p[0]).powf(p[1])).exp() * (p[2] - p[3] * (0.5 * PI * p[4] * x).sin().powi(2))
            }
            FitModel::DampedCosine => {
                p[5] + p[4]
                    * (-(x.abs() / p[2]).powf(p[3])).exp()
                    * (2.0 * PI * p[0] * x + p[1]).cos()
            }
            FitModel::DdScaling => 1.0 / (1.0 / (p[0] * x.powf(p[1])) + 0.5 / p[2]),
            FitModel::Linear => p[0] * x + p[1],
        }
    }

    /// Maps external parameters to the unconstrained space the optimizer
    /// works in. Values on a closed upper bound are pulled just inside.
    pub(crate) fn to_internal(self, p: &[f64]) -> Vec<f64> {
        self.bounds()
            .iter()
            .enumerate()
            .map(|(k, b)| match *b {
                Bound::Free => p[k],
                Bound::Positive => p[k].ln(),
                Bound::Interval(lo, hi) => logit(((p[k] - lo) / (hi - lo)).min(1.0 - 1e-12)),
                Bound::BelowA => logit((p[k] / p[k - 1]).min(1.0 - 1e-12)),
            })
            .collect()
    }

    pub(crate) fn from_internal(self, u: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; u.len()];
        for (k, b) in self.bounds().iter().enumerate() {
            p[k] = match *b {
                Bound::Free => u[k],
                Bound::Positive => u[k].exp(),
                Bound::Interval(lo, hi) => lo + (hi - lo) * logistic(u[k]),
                Bound::BelowA => p[k - 1] * logistic(u[k]),
            };
        }
        p
    }
}

impl FitModel {
    /// `∂p/∂u` of the internal-to-external map; lower triangular.
    pub(crate) fn external_jacobian(self, u: &[f64]) -> DMatrix<f64> {
        let p = self.from_internal(u);
        let mut g = DMatrix::zeros(u.len(), u.len());
        for (k, b) in self.bounds().iter().enumerate() {
            match *b {
                Bound::Free => g[(k, k)] = 1.0,
                Bound::Positive => g[(k, k)] = p[k],
                Bound::Interval(lo, hi) => {
                    let s = logistic(u[k]);
                    g[(k, k)] = (hi - lo) * s * (1.0 - s);
                }
                Bound::BelowA => {
                    let s = logistic(u[k]);
                    g[(k, k)] = p[k - 1] * s * (1.0 - s);
                    for c in 0..k {
                        g[(k, c)] = g[(k - 1, c)] * s;
                    }
                }
            }
        }
        g
    }
}

fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

fn logit(s: f64) -> f64 {
    (s / (1.0 - s)).ln()
}

impl fmt::Display for FitModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FitModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FitModel::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown fit model '{s}'")))
    }
}

/// Evaluates `model` with `params` on every abscissa.
pub fn model_eval(model: FitModel, params: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    model.check_params(params)?;
    Ok(x.iter()
        .map(|&xi| model.eval_unchecked(params, xi))
        .collect())
}
