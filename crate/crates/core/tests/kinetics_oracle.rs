//! Five-level rate kinetics against closed forms and an RK4 integrator
//! written out from the rate equations.

use proptest::prelude::*;
use tripletsim::photokinetics::*;

/// Rate equations for (s0, s1, x, y, z) plus the integrated radiative flux.
fn derivative(r: &KineticRates, laser: bool, eff: f64, p: &[f64; 6]) -> [f64; 6] {
    let pump = if laser { r.pump_rate } else { 0.0 };
    let k1 = r.s1_decay_rate;
    let k: [f64; 3] = std::array::from_fn(|i| 1.0 / r.triplet_lifetimes[i]);
    let triplet_out: f64 = (0..3).map(|i| k[i] * p[2 + i]).sum();
    let mut d = [0.0; 6];
    d[0] = -pump * p[0] + k1 * (1.0 - r.isc_yield) * p[1] + triplet_out;
    d[1] = pump * p[0] - k1 * p[1];
    for i in 0..3 {
        d[2 + i] = k1 * r.isc_yield * r.isc_branching[i] * p[1] - k[i] * p[2 + i];
    }
    d[5] = eff * k1 * (1.0 - r.isc_yield) * p[1];
    d
}

fn rk4(r: &KineticRates, laser: bool, eff: f64, p0: [f64; 6], t: f64, steps: usize) -> [f64; 6] {
    let h = t / steps as f64;
    let mut p = p0;
    let add = |a: &[f64; 6], b: &[f64; 6], s: f64| -> [f64; 6] {
        std::array::from_fn(|i| a[i] + s * b[i])
    };
    for _ in 0..steps {
        let k1 = derivative(r, laser, eff, &p);
        let k2 = derivative(r, laser, eff, &add(&p, &k1, 0.5 * h));
        let k3 = derivative(r, laser, eff, &add(&p, &k2, 0.5 * h));
        let k4 = derivative(r, laser, eff, &add(&p, &k3, h));
        p = std::array::from_fn(|i| p[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    }
    p
}

fn as_array(p: &LevelPopulations) -> [f64; 6] {
    [p.s0, p.s1, p.x, p.y, p.z, 0.0]
}

fn max_diff(a: &LevelPopulations, b: &LevelPopulations) -> f64 {
    let (a, b) = (as_array(a), as_array(b));
    (0..5).map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max)
}

#[test]
fn branching_from_cryogenic_table() {
    let b = isc_branching_from_steady_state(POPULATIONS_4K, LIFETIMES_4K).unwrap();
    for (got, want) in b.iter().zip([0.0185, 0.9168, 0.0648]) {
        assert!((got - want).abs() < 1e-3, "{b:?}");
    }
    assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn branching_forward_check_reproduces_populations() {
    for (pops, life) in [
        (POPULATIONS_4K, LIFETIMES_4K),
        (POPULATIONS_295K, LIFETIMES_295K),
    ] {
        let rates = KineticRates::from_steady_state(pops, life).unwrap();
        // oracle: relax the RK4 rate equations from the ground state
        // until every triplet level has settled (laser-on, stiff S1 step)
        let mut p = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        for _ in 0..240 {
            p = rk4(&rates, true, 0.0, p, 25e-6, 25_000);
        }
        let total = p[2] + p[3] + p[4];
        for i in 0..3 {
            let frac = p[2 + i] / total;
            assert!(
                (frac / pops[i] - 1.0).abs() < 0.01,
                "{i}: {frac} vs {}",
                pops[i]
            );
        }
        let ss = steady_state(&rates).unwrap();
        let t = ss.triplet();
        let total = ss.triplet_total();
        for i in 0..3 {
            assert!((t[i] / total / pops[i] - 1.0).abs() < 0.01);
        }
    }
}

#[test]
fn equal_inputs_give_uniform_branching() {
    let b = isc_branching_from_steady_state([0.2; 3], [50e-6; 3]).unwrap();
    for v in b {
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }
    assert!(isc_branching_from_steady_state([0.2; 3], [50e-6, 0.0, 1e-6]).is_err());
}

#[test]
fn zero_duration_is_identity_and_negative_rejected() {
    let r = KineticRates::cryogenic();
    let p = LevelPopulations::new(0.5, 0.1, 0.2, 0.1, 0.1).unwrap();
    assert_eq!(evolve_populations(&r, &p, 0.0, true).unwrap(), p);
    assert!(evolve_populations(&r, &p, -1e-9, false).is_err());
}

#[test]
fn ty_decays_to_one_over_e_in_its_lifetime() {
    let r = KineticRates::cryogenic();
    let start = LevelPopulations::new(0.0, 0.0, 0.0, 1.0, 0.0).unwrap();
    let p = evolve_populations(&r, &start, 21.2e-6, false).unwrap();
    assert!((p.y - (-1.0f64).exp()).abs() < 1e-6);
    assert!((p.s0 - (1.0 - p.y)).abs() < 1e-12);
    assert!(p.x == 0.0 && p.z == 0.0);
}

#[test]
fn dark_decay_matches_closed_form() {
    let r = KineticRates::cryogenic();
    let start = LevelPopulations::new(0.4, 0.0, 0.2, 0.3, 0.1).unwrap();
    for t in [1e-6, 10e-6, 50e-6, 200e-6, 1e-3] {
        let p = evolve_populations(&r, &start, t, false).unwrap();
        let tri: [f64; 3] =
            std::array::from_fn(|i| start.triplet()[i] * (-t / r.triplet_lifetimes[i]).exp());
        for i in 0..3 {
            assert!((p.triplet()[i] - tri[i]).abs() < 1e-9);
        }
        assert!((p.s0 - (1.0 - tri.iter().sum::<f64>())).abs() < 1e-9);
    }
}

#[test]
fn laser_on_evolution_matches_rk4() {
    let r = KineticRates::ambient();
    let start = LevelPopulations::new(0.7, 0.0, 0.1, 0.1, 0.1).unwrap();
    let ours = evolve_populations(&r, &start, 2e-6, true).unwrap();
    let o = rk4(&r, true, 0.0, as_array(&start), 2e-6, 400_000);
    let oracle = LevelPopulations {
        s0: o[0],
        s1: o[1],
        x: o[2],
        y: o[3],
        z: o[4],
    };
    assert!(max_diff(&ours, &oracle) < 1e-9, "{ours:?} vs {oracle:?}");
}

#[test]
fn steady_state_limits() {
    let mut r = KineticRates::cryogenic();
    r.isc_yield = 0.0;
    assert_eq!(steady_state(&r).unwrap().triplet_total(), 0.0);
    let mut r = KineticRates::cryogenic();
    r.pump_rate = 0.0;
    assert_eq!(steady_state(&r).unwrap(), LevelPopulations::ground());
}

#[test]
fn long_evolution_converges_to_steady_state() {
    for r in [KineticRates::cryogenic(), KineticRates::ambient()] {
        let uniform = LevelPopulations::new(0.2, 0.2, 0.2, 0.2, 0.2).unwrap();
        let tmax = r.triplet_lifetimes.iter().cloned().fold(0.0, f64::max);
        let p = evolve_populations(&r, &uniform, 10.0 * tmax, true).unwrap();
        assert!(max_diff(&p, &steady_state(&r).unwrap()) < 1e-6);
    }
}

#[test]
fn generator_columns_sum_to_zero() {
    for laser in [false, true] {
        let m = KineticRates::cryogenic().rate_matrix(laser);
        for col in m.column_iter() {
            assert!(col.sum().abs() <= 1e-12 * m.amax());
        }
    }
}

#[test]
fn t1_curve_matches_closed_form() {
    for r in [KineticRates::cryogenic(), KineticRates::ambient()] {
        let ss = steady_state(&r).unwrap();
        let k1 = r.s1_decay_rate;
        let delays = [0.0, 1e-9, 1e-6, 21.2e-6, 100e-6, 500e-6, 3e-3];
        let got = t1_relaxation_curve(&r, &delays).unwrap();
        for (&t, g) in delays.iter().zip(got) {
            // triplet fed by the decaying S1 population left at laser-off
            let mut deficit = ss.s1 * (-k1 * t).exp();
            for i in 0..3 {
                let k = 1.0 / r.triplet_lifetimes[i];
                let feed = ss.s1 * r.isc_yield * r.isc_branching[i] * k1 / (k1 - k);
                deficit +=
                    ss.triplet()[i] * (-k * t).exp() + feed * ((-k * t).exp() - (-k1 * t).exp());
            }
            let want = deficit / ss.triplet_total();
            assert!(
                (g - want).abs() < 1e-9 * want.abs().max(1e-3),
                "t={t}: {g} vs {want}"
            );
        }
    }
}

#[test]
fn t1_curve_single_sublevel_is_single_exponential() {
    let mut r = KineticRates::cryogenic();
    r.isc_branching = [0.0, 1.0, 0.0];
    let delays: Vec<f64> = (1..50).map(|k| k as f64 * 5e-6).collect();
    let s = t1_relaxation_curve(&r, &delays).unwrap();
    let a = s[0] / (-delays[0] / 21.2e-6).exp();
    for (t, v) in delays.iter().zip(&s) {
        let want = a * (-t / 21.2e-6).exp();
        assert!((v - want).abs() < 1e-9 * a);
    }
    let late = t1_relaxation_curve(&r, &[1.0]).unwrap()[0];
    assert!(late.abs() < 1e-12);
}

#[test]
fn contrast_identities() {
    let r = KineticRates::cryogenic();
    let ro = ReadoutParams::default();
    let ss = steady_state(&r).unwrap();
    assert_eq!(readout_contrast(&r, &ss, &ss, &ro).unwrap(), 1.0);
    let swapped = LevelPopulations {
        y: ss.z,
        z: ss.y,
        ..ss
    };
    assert!(readout_contrast(&r, &swapped, &ss, &ro).unwrap() < 1.0);
    let dark = ReadoutParams {
        radiative_efficiency: 0.0,
        ..ro
    };
    assert!(matches!(
        readout_contrast(&r, &ss, &ss, &dark),
        Err(tripletsim::Error::DegenerateReadout)
    ));
}

#[test]
fn swap_contrast_matches_rk4() {
    let r = KineticRates::cryogenic();
    let ro = ReadoutParams::default();
    let ss = steady_state(&r).unwrap();
    let swapped = LevelPopulations {
        y: ss.z,
        z: ss.y,
        ..ss
    };
    let ours = readout_contrast(&r, &swapped, &ss, &ro).unwrap();
    let flux = |p: &LevelPopulations| rk4(&r, true, 1.0, as_array(p), ro.window, 200_000)[5];
    let oracle = flux(&swapped) / flux(&ss);
    assert!((ours - oracle).abs() < 1e-6, "{ours} vs {oracle}");
}

#[test]
fn polarization_response_shape() {
    let f = |t: f64| polarization_response(t, 0.3, 2.0, 0.5);
    assert_eq!(f(0.3), 2.5);
    assert!((f(0.3 + std::f64::consts::FRAC_PI_2) - 0.5).abs() < 1e-15);
    for k in 0..8 {
        let t = k as f64 * std::f64::consts::FRAC_PI_4;
        assert!((f(t) - f(t + std::f64::consts::PI)).abs() < 1e-12);
    }
}

fn populations() -> impl Strategy<Value = LevelPopulations> {
    prop::array::uniform5(0.0..1.0f64)
        .prop_filter("non-zero", |w| w.iter().sum::<f64>() > 1e-3)
        .prop_map(|w| {
            let s: f64 = w.iter().sum();
            LevelPopulations {
                s0: w[0] / s,
                s1: w[1] / s,
                x: w[2] / s,
                y: w[3] / s,
                z: w[4] / s,
            }
        })
}

proptest! {
    #[test]
    fn probability_conserved(p in populations(), t in 0.0..2e-3f64, laser in any::<bool>(), cold in any::<bool>()) {
        let r = if cold { KineticRates::cryogenic() } else { KineticRates::ambient() };
        let q = evolve_populations(&r, &p, t, laser).unwrap();
        prop_assert!((q.total() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn steady_state_is_fixed_point(t in 0.0..1e-3f64, cold in any::<bool>()) {
        let r = if cold { KineticRates::cryogenic() } else { KineticRates::ambient() };
        let ss = steady_state(&r).unwrap();
        let q = evolve_populations(&r, &ss, t, true).unwrap();
        prop_assert!(max_diff(&q, &ss) < 1e-8);
    }

    #[test]
    fn evolution_is_linear(a in populations(), b in populations(), w in 0.0..1.0f64, t in 0.0..5e-4f64, laser in any::<bool>()) {
        let r = KineticRates::cryogenic();
        let mixed = evolve_populations(&r, &a.mix(&b, w), t, laser).unwrap();
        let pa = evolve_populations(&r, &a, t, laser).unwrap();
        let pb = evolve_populations(&r, &b, t, laser).unwrap();
        prop_assert!(max_diff(&mixed, &pa.mix(&pb, w)) < 1e-9);
    }
}
