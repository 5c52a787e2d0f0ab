//! Five-level incoherent population kinetics: S0, S1 and the three triplet
//! sublevels.
//!
//! The generator is linear and piecewise constant (laser on or off), so every
//! evolution is an exact matrix exponential. Photon counts are obtained from
//! the same exponential by augmenting the state with an accumulator of the
//! S1 → S0 radiative flux.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

pub type RateMatrix = SMatrix<f64, 5, 5>;
pub type PopulationVector = SVector<f64, 5>;

const S0: usize = 0;
const S1: usize = 1;
const T0: usize = 2;

/// Rates of the S0/S1/triplet photophysical cycle. Rates in 1/s, lifetimes in s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KineticRates {
    /// S0 → S1 excitation rate while the laser is on.
    pub pump_rate: f64,
    /// Total S1 depopulation rate.
    pub s1_decay_rate: f64,
    /// Fraction of S1 decays that enter the triplet manifold.
    pub isc_yield: f64,
    /// Share of the ISC flux landing in each triplet sublevel.
    pub isc_branching: [f64; 3],
    /// Triplet → S0 lifetimes of the three sublevels.
    pub triplet_lifetimes: [f64; 3],
}

/// Default S1 decay rate (10 ns lifetime).
pub const DEFAULT_S1_DECAY_RATE: f64 = 1.0e8;
/// Default ISC yield; together with the S1 rate this fixes a 10 µs net
/// shelving time into the triplet under saturating pump.
pub const DEFAULT_ISC_YIELD: f64 = 1.0e-3;
/// Default pump rate, ten times the S1 decay rate.
pub const DEFAULT_PUMP_RATE: f64 = 1.0e9;

/// Measured sublevel lifetimes (s) and steady-state populations (fractions)
/// for the two characterized temperatures.
pub const LIFETIMES_4K: [f64; 3] = [514e-6, 21.2e-6, 111e-6];
pub const POPULATIONS_4K: [f64; 3] = [0.263, 0.538, 0.199];
pub const LIFETIMES_295K: [f64; 3] = [73e-6, 18.9e-6, 61e-6];
pub const POPULATIONS_295K: [f64; 3] = [0.305, 0.416, 0.279];

impl KineticRates {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("pump_rate", self.pump_rate),
            ("s1_decay_rate", self.s1_decay_rate),
            ("isc_yield", self.isc_yield),
        ] {
            ensure_finite(name, v)?;
            if v < 0.0 {
                return Err(Error::invalid(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.isc_yield > 1.0 {
            return Err(Error::invalid(format!(
                "isc_yield must be in [0, 1], got {}",
                self.isc_yield
            )));
        }
        if self
            .isc_branching
            .iter()
            .any(|b| !b.is_finite() || *b < 0.0)
        {
            return Err(Error::invalid(
                "isc_branching entries must be finite and >= 0",
            ));
        }
        let sum: f64 = self.isc_branching.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "isc_branching must sum to 1, got {sum}"
            )));
        }
        if self
            .triplet_lifetimes
            .iter()
            .any(|t| !t.is_finite() || *t <= 0.0)
        {
            return Err(Error::invalid("triplet lifetimes must be finite and > 0"));
        }
        Ok(())
    }

    /// Rates reproducing the given steady-state triplet populations and
    /// lifetimes, with default singlet rates.
    pub fn from_steady_state(populations: [f64; 3], lifetimes: [f64; 3]) -> Result<Self> {
        let rates = KineticRates {
            pump_rate: DEFAULT_PUMP_RATE,
            s1_decay_rate: DEFAULT_S1_DECAY_RATE,
            isc_yield: DEFAULT_ISC_YIELD,
            isc_branching: isc_branching_from_steady_state(populations, lifetimes)?,
            triplet_lifetimes: lifetimes,
        };
        rates.validate()?;
        Ok(rates)
    }

    /// Kinetics at 4 K.
    pub fn cryogenic() -> Self {
        Self::from_steady_state(POPULATIONS_4K, LIFETIMES_4K).expect("tabulated values are valid")
    }

    /// Kinetics at room temperature.
    pub fn ambient() -> Self {
        Self::from_steady_state(POPULATIONS_295K, LIFETIMES_295K)
            .expect("tabulated values are valid")
    }

    pub fn decay_rates(&self) -> [f64; 3] {
        self.triplet_lifetimes.map(|t| 1.0 / t)
    }

    /// Rate of S1 decays that do not cross into the triplet.
    pub fn singlet_return_rate(&self) -> f64 {
        self.s1_decay_rate * (1.0 - self.isc_yield)
    }

    /// Rates seen by field-mixed eigenstates. `weights[c][n]` is the weight of
    /// zero-field sublevel `c` in eigenstate `n`; branching and decay rates
    /// are averaged with those weights.
    pub fn mixed(&self, weights: &[[f64; 3]; 3]) -> Self {
        let k = self.decay_rates();
        let mut branching = [0.0; 3];
        let mut lifetimes = [0.0; 3];
        for n in 0..3 {
            let b: f64 = (0..3).map(|c| weights[c][n] * self.isc_branching[c]).sum();
            let rate: f64 = (0..3).map(|c| weights[c][n] * k[c]).sum();
            branching[n] = b;
            lifetimes[n] = 1.0 / rate;
        }
        let total: f64 = branching.iter().sum();
        branching.iter_mut().for_each(|b| *b /= total);
        KineticRates {
            isc_branching: branching,
            triplet_lifetimes: lifetimes,
            ..*self
        }
    }

    /// Column-stochastic generator `dp/dt = M p` over (S0, S1, T1, T2, T3).
    pub fn rate_matrix(&self, laser_on: bool) -> RateMatrix {
        let mut m = RateMatrix::zeros();
        let pump = if laser_on { self.pump_rate } else { 0.0 };
        m[(S0, S0)] = -pump;
        m[(S1, S0)] = pump;

        m[(S1, S1)] = -self.s1_decay_rate;
        m[(S0, S1)] = self.singlet_return_rate();
        for i in 0..3 {
            m[(T0 + i, S1)] = self.s1_decay_rate * self.isc_yield * self.isc_branching[i];
            let k = 1.0 / self.triplet_lifetimes[i];
            m[(T0 + i, T0 + i)] = -k;
            m[(S0, T0 + i)] = k;
        }
        let scale = m.amax().max(1.0);
        for col in m.column_iter() {
            assert!(
                col.sum().abs() <= 1e-12 * scale,
                "rate matrix column does not conserve probability"
            );
        }
        m
    }
}

/// Probabilities of the five levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelPopulations {
    pub s0: f64,
    pub s1: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl LevelPopulations {
    pub fn ground() -> Self {
        LevelPopulations {
            s0: 1.0,
            s1: 0.0,
            x: 0.0,
            y: 0.0,
            z: 0.0,
        }
    }

    pub fn new(s0: f64, s1: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let p = LevelPopulations { s0, s1, x, y, z };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.to_vector();
        if v.iter()
            .any(|p| !p.is_finite() || *p < -1e-12 || *p > 1.0 + 1e-12)
        {
            return Err(Error::invalid(format!(
                "populations must lie in [0, 1]: {self:?}"
            )));
        }
        if (v.sum() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "populations must sum to 1, got {}",
                v.sum()
            )));
        }
        Ok(())
    }

    pub fn triplet(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn triplet_total(&self) -> f64 {
        self.x + self.y + self.z
    }

    pub fn total(&self) -> f64 {
        self.s0 + self.s1 + self.triplet_total()
    }

    pub fn to_vector(&self) -> PopulationVector {
        PopulationVector::new(self.s0, self.s1, self.x, self.y, self.z)
    }

    pub fn from_vector(v: &PopulationVector) -> Self {
        LevelPopulations {
            s0: v[0],
            s1: v[1],
            x: v[2],
            y: v[3],
            z: v[4],
        }
    }

    /// Convex combination `w·self + (1-w)·other`.
    pub fn mix(&self, other: &Self, w: f64) -> Self {
        Self::from_vector(&(self.to_vector() * w + other.to_vector() * (1.0 - w)))
    }
}

/// ISC branching ratios that make `populations` the steady state of
/// sublevels with the given lifetimes: `b_i ∝ p_i / τ_i`.
pub fn isc_branching_from_steady_state(
    populations: [f64; 3],
    lifetimes: [f64; 3],
) -> Result<[f64; 3]> {
    for (p, t) in populations.iter().zip(&lifetimes) {
        ensure_finite("population", *p)?;
        ensure_finite("lifetime", *t)?;
        if *t <= 0.0 {
            return Err(Error::invalid(format!("lifetimes must be > 0, got {t}")));
        }
        if *p <= 0.0 {
            return Err(Error::invalid(format!("populations must be > 0, got {p}")));
        }
    }
    let flux: [f64; 3] = std::array::from_fn(|i| populations[i] / lifetimes[i]);
    let total: f64 = flux.iter().sum();
    Ok(flux.map(|f| f / total))
}

/// Exact propagator `exp(M t)` of the piecewise-constant generator.
pub fn propagator(rates: &KineticRates, laser_on: bool, duration: f64) -> RateMatrix {
    (rates.rate_matrix(laser_on) * duration).exp()
}

pub(crate) fn propagate_vector(
    rates: &KineticRates,
    laser_on: bool,
    duration: f64,
    p: &PopulationVector,
) -> PopulationVector {
    if duration == 0.0 {
        return *p;
    }
    propagator(rates, laser_on, duration) * p
}

pub fn evolve_populations(
    rates: &KineticRates,
    initial: &LevelPopulations,
    duration: f64,
    laser_on: bool,
) -> Result<LevelPopulations> {
    rates.validate()?;
    initial.validate()?;
    ensure_finite("duration", duration)?;
    if duration < 0.0 {
        return Err(Error::invalid(format!(
            "duration must be >= 0, got {duration}"
        )));
    }
    if duration == 0.0 {
        return Ok(*initial);
    }
    Ok(LevelPopulations::from_vector(&propagate_vector(
        rates,
        laser_on,
        duration,
        &initial.to_vector(),
    )))
}

/// Laser-on steady state. Flux balance on the cycle gives it in closed form:
/// `s0 = k1/kp · s1`, `T_i = k1 η b_i τ_i · s1`.
pub fn steady_state(rates: &KineticRates) -> Result<LevelPopulations> {
    rates.validate()?;
    if rates.pump_rate == 0.0 {
        return Ok(LevelPopulations::ground());
    }
    let k1 = rates.s1_decay_rate;
    let s1 = 1.0;
    let s0 = k1 / rates.pump_rate;
    let t: [f64; 3] = std::array::from_fn(|i| {
        k1 * rates.isc_yield * rates.isc_branching[i] * rates.triplet_lifetimes[i]
    });
    let total = s0 + s1 + t.iter().sum::<f64>();
    let p = LevelPopulations {
        s0: s0 / total,
        s1: s1 / total,
        x: t[0] / total,
        y: t[1] / total,
        z: t[2] / total,
    };
    let m = rates.rate_matrix(true);
    let residual = (m * p.to_vector()).amax() / m.amax();
    debug_assert!(residual < 1e-12, "steady state residual {residual}");
    Ok(p)
}

/// Readout window settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutParams {
    /// Length of the photon-counting window, s.
    pub window: f64,
    /// Fraction of the non-ISC S1 decays that emit a detected photon.
    pub radiative_efficiency: f64,
}

impl Default for ReadoutParams {
    fn default() -> Self {
        ReadoutParams {
            window: 1.0e-6,
            radiative_efficiency: 1.0,
        }
    }
}

impl ReadoutParams {
    pub fn validate(&self) -> Result<()> {
        ensure_finite("readout.window", self.window)?;
        ensure_finite("readout.radiative_efficiency", self.radiative_efficiency)?;
        if self.window < 0.0 || self.radiative_efficiency < 0.0 {
            return Err(Error::invalid("readout window and efficiency must be >= 0"));
        }
        Ok(())
    }
}

/// Integrated radiative flux over a laser-on window of length `window`
/// starting from `p`, together with the populations at the window's end.
pub(crate) fn integrated_fluorescence(
    rates: &KineticRates,
    readout: &ReadoutParams,
    window: f64,
    p: &PopulationVector,
) -> (f64, PopulationVector) {
    if window == 0.0 {
        return (0.0, *p);
    }
    let m = rates.rate_matrix(true);
    let mut aug = SMatrix::<f64, 6, 6>::zeros();
    aug.fixed_view_mut::<5, 5>(0, 0).copy_from(&m);
    aug[(5, S1)] = rates.singlet_return_rate() * readout.radiative_efficiency;
    let prop = (aug * window).exp();
    let mut v = SVector::<f64, 6>::zeros();
    v.fixed_rows_mut::<5>(0).copy_from(p);
    let out = prop * v;
    (out[5], out.fixed_rows::<5>(0).into_owned())
}

/// Photons emitted during the readout window from the given populations.
pub fn fluorescence(
    rates: &KineticRates,
    pop: &LevelPopulations,
    readout: &ReadoutParams,
) -> Result<f64> {
    rates.validate()?;
    readout.validate()?;
    Ok(integrated_fluorescence(rates, readout, readout.window, &pop.to_vector()).0)
}

/// ODMR contrast `C = I_on / I_off` of two pre-readout population states.
pub fn readout_contrast(
    rates: &KineticRates,
    pop_on: &LevelPopulations,
    pop_off: &LevelPopulations,
    readout: &ReadoutParams,
) -> Result<f64> {
    pop_on.validate()?;
    pop_off.validate()?;
    let off = fluorescence(rates, pop_off, readout)?;
    if off <= 0.0 {
        return Err(Error::DegenerateReadout);
    }
    Ok(fluorescence(rates, pop_on, readout)? / off)
}

/// Normalized triplet-relaxation trace after switching the laser off at the
/// laser-on steady state.
///
/// The signal is the S0 deficit `1 - s0(τ)` divided by the initial triplet
/// population. Past the nanosecond S1 transient it is
/// `Σ_i w_i exp(-τ/τ_i)` with `w_i` the steady-state triplet fractions, and
/// it relaxes to zero once S0 has fully recovered.
pub fn t1_relaxation_curve(rates: &KineticRates, delay_values: &[f64]) -> Result<Vec<f64>> {
    let start = steady_state(rates)?;
    let triplet0 = start.triplet_total();
    if triplet0 <= 0.0 {
        return Err(Error::invalid(
            "steady state has no triplet population to relax",
        ));
    }
    let p0 = start.to_vector();
    delay_values
        .iter()
        .map(|&tau| {
            ensure_finite("delay", tau)?;
            if tau < 0.0 {
                return Err(Error::invalid(format!("delays must be >= 0, got {tau}")));
            }
            let p = propagate_vector(rates, false, tau, &p0);
            Ok((1.0 - p[S0]) / triplet0)
        })
        .collect()
}

/// Fluorescence versus excitation polarization angle: `offset + amplitude·cos²(θ - θ0)`.
pub fn polarization_response(theta: f64, theta0: f64, amplitude: f64, offset: f64) -> f64 {
    offset + amplitude * (theta - theta0).cos().powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn branching_inversion_at_4k() {
        let b = isc_branching_from_steady_state(POPULATIONS_4K, LIFETIMES_4K).unwrap();
        assert_relative_eq!(b.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(b[0], 0.0185, epsilon = 1e-4);
        assert_relative_eq!(b[1], 0.9168, epsilon = 1e-4);
        assert_relative_eq!(b[2], 0.0648, epsilon = 1e-4);
    }

    #[test]
    fn branching_symmetry_and_errors() {
        let b = isc_branching_from_steady_state([0.2; 3], [5e-5; 3]).unwrap();
        for v in b {
            assert_relative_eq!(v, 1.0 / 3.0, epsilon = 1e-15);
        }
        assert!(isc_branching_from_steady_state([0.2; 3], [5e-5, 0.0, 5e-5]).is_err());
    }

    #[test]
    fn zero_duration_is_identity() {
        let r = KineticRates::cryogenic();
        let p = LevelPopulations::new(0.1, 0.2, 0.3, 0.25, 0.15).unwrap();
        assert_eq!(evolve_populations(&r, &p, 0.0, true).unwrap(), p);
        assert!(evolve_populations(&r, &p, -1e-6, true).is_err());
    }

    #[test]
    fn ty_decays_with_its_lifetime() {
        let r = KineticRates::cryogenic();
        let p = LevelPopulations::new(0.0, 0.0, 0.0, 1.0, 0.0).unwrap();
        let out = evolve_populations(&r, &p, 21.2e-6, false).unwrap();
        assert_relative_eq!(out.y, (-1.0f64).exp(), epsilon = 1e-6);
        assert_relative_eq!(out.s0, 1.0 - (-1.0f64).exp(), epsilon = 1e-6);
        assert_relative_eq!(out.total(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn no_isc_no_triplet() {
        let r = KineticRates {
            isc_yield: 0.0,
            ..KineticRates::cryogenic()
        };
        let p = steady_state(&r).unwrap();
        assert_eq!(p.triplet_total(), 0.0);
        let dark = KineticRates {
            pump_rate: 0.0,
            ..KineticRates::cryogenic()
        };
        assert_eq!(steady_state(&dark).unwrap(), LevelPopulations::ground());
    }

    #[test]
    fn steady_state_triplet_fractions_match_inputs() {
        for (pops, taus) in [
            (POPULATIONS_4K, LIFETIMES_4K),
            (POPULATIONS_295K, LIFETIMES_295K),
        ] {
            let r = KineticRates::from_steady_state(pops, taus).unwrap();
            let p = steady_state(&r).unwrap();
            let t = p.triplet();
            let total = p.triplet_total();
            for i in 0..3 {
                assert_relative_eq!(t[i] / total, pops[i], max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn equal_populations_give_unit_contrast() {
        let r = KineticRates::cryogenic();
        let p = steady_state(&r).unwrap();
        let c = readout_contrast(&r, &p, &p, &ReadoutParams::default()).unwrap();
        assert_eq!(c, 1.0);
        let zero = ReadoutParams {
            window: 0.0,
            ..Default::default()
        };
        assert_eq!(
            readout_contrast(&r, &p, &p, &zero),
            Err(Error::DegenerateReadout)
        );
    }

    #[test]
    fn polarization_law() {
        assert_eq!(polarization_response(0.3, 0.3, 2.0, 0.5), 2.5);
        let q = polarization_response(0.3 + std::f64::consts::FRAC_PI_2, 0.3, 2.0, 0.5);
        assert_relative_eq!(q, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn mixing_with_identity_weights_is_noop() {
        let r = KineticRates::cryogenic();
        let w = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let m = r.mixed(&w);
        for i in 0..3 {
            assert_relative_eq!(m.isc_branching[i], r.isc_branching[i], epsilon = 1e-15);
            assert_relative_eq!(
                m.triplet_lifetimes[i],
                r.triplet_lifetimes[i],
                max_relative = 1e-15
            );
        }
    }
}
