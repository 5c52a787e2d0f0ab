//! Spin Hamiltonian checked against an independently written matrix and
//! nalgebra's dense Hermitian eigensolver.

use nalgebra::{Complex, Matrix3};
use proptest::prelude::*;
use tripletsim::spin_model::*;

type M3 = Matrix3<Complex<f64>>;

const D: f64 = 1.905e9;
const E: f64 = -0.475e9;

/// Spin-1 operators in the {Tx, Ty, Tz} basis: (S_k)_ij = -i ε_kij.
fn spin_op(k: usize) -> M3 {
    let mut m = M3::zeros();
    let (i, j) = ((k + 1) % 3, (k + 2) % 3);
    m[(i, j)] = Complex::new(0.0, -1.0);
    m[(j, i)] = Complex::new(0.0, 1.0);
    m
}

fn oracle_matrix(diag: [f64; 3], gamma: f64, b: [f64; 3]) -> M3 {
    let mut h = M3::from_diagonal(&nalgebra::Vector3::new(
        Complex::new(diag[0], 0.0),
        Complex::new(diag[1], 0.0),
        Complex::new(diag[2], 0.0),
    ));
    for k in 0..3 {
        h += spin_op(k) * Complex::new(gamma * b[k], 0.0);
    }
    h
}

fn zfs_diag(d: f64, e: f64) -> [f64; 3] {
    [d / 3.0 - e, d / 3.0 + e, -2.0 * d / 3.0]
}

fn dense_eigenvalues(h: &M3) -> [f64; 3] {
    let v = h.symmetric_eigenvalues();
    let mut out = [v[0], v[1], v[2]];
    out.sort_by(f64::total_cmp);
    out
}

fn scale(x: &[f64; 3]) -> f64 {
    x.iter().fold(1.0_f64, |m, v| m.max(v.abs()))
}

fn ours(d: f64, e: f64, b: [f64; 3], gamma: f64) -> TripletEigensystem {
    let zfs = ZfsParams::new(d, e).unwrap();
    let field = FieldVector::new(b[0], b[1], b[2]).unwrap();
    let h = build_hamiltonian(zfs, field, GyroRatio::new(gamma).unwrap()).unwrap();
    eigensystem(&h).unwrap()
}

fn pentacene_lines(b: [f64; 3]) -> [f64; 3] {
    let eig = ours(D, E, b, -28e9);
    let t = transition_frequencies(&eig);
    let mut f = [0.0; 3];
    for tr in t {
        f[tr.pair.index()] = tr.frequency;
    }
    f
}

#[test]
fn zero_field_energies_and_labels() {
    let eig = ours(D, E, [0.0; 3], -28e9);
    let expect = [-1.270e9, 0.160e9, 1.110e9];
    for (a, b) in eig.energies.iter().zip(expect) {
        assert!((a - b).abs() < 1e-6 * b.abs(), "{a} vs {b}");
    }
    assert_eq!(eig.labels, [Sublevel::Tz, Sublevel::Ty, Sublevel::Tx]);
}

#[test]
fn zero_field_lines() {
    let f = pentacene_lines([0.0; 3]);
    let expect = [0.950e9, 1.430e9, 2.380e9];
    for (a, b) in f.iter().zip(expect) {
        assert!((a / b - 1.0).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn zero_matrix_for_vanishing_parameters() {
    let h = build_hamiltonian(
        ZfsParams::new(0.0, 0.0).unwrap(),
        FieldVector::zero(),
        GyroRatio::ELECTRON,
    )
    .unwrap();
    assert!(h.iter().all(|c| c.norm() == 0.0));
    let eig = eigensystem(&h).unwrap();
    assert!(transition_frequencies(&eig)
        .iter()
        .all(|t| t.frequency == 0.0));
}

#[test]
fn pure_zeeman_limit() {
    let eig = ours(0.0, 0.0, [0.0, 0.0, 0.1], -28e9);
    let expect = [-2.8e9, 0.0, 2.8e9];
    for (a, b) in eig.energies.iter().zip(expect) {
        assert!((a - b).abs() < 1e-9 * 2.8e9, "{a} vs {b}");
    }
}

#[test]
fn diagonal_input_keeps_identity_vectors() {
    let mut h = M3::zeros();
    for (k, v) in [1e9, 2e9, 3e9].into_iter().enumerate() {
        h[(k, k)] = Complex::new(v, 0.0);
    }
    let eig = eigensystem(&h).unwrap();
    assert_eq!(eig.energies, [1e9, 2e9, 3e9]);
    assert!((eig.eigenvectors - M3::identity()).norm() < 1e-15);
}

#[test]
fn non_hermitian_rejected() {
    let mut h = M3::zeros();
    h[(0, 1)] = Complex::new(1e9, 0.0);
    assert!(eigensystem(&h).is_err());
}

#[test]
fn axial_bz_matches_dense_oracle() {
    for bz in [0.01, 0.05, 0.1] {
        let eig = ours(D, E, [0.0, 0.0, bz], -28e9);
        let dense = dense_eigenvalues(&oracle_matrix(zfs_diag(D, E), -28e9, [0.0, 0.0, bz]));
        let s = scale(&dense);
        for k in 0..3 {
            assert!((eig.energies[k] - dense[k]).abs() < 1e-9 * s);
        }
    }
}

#[test]
fn x_and_y_sweeps_differ_when_e_nonzero() {
    let b = [0.0, 0.05, 0.1];
    let zfs = ZfsParams::pentacene();
    let sx = field_sweep_spectrum(zfs, Axis::X, &b, GyroRatio::ELECTRON).unwrap();
    let sy = field_sweep_spectrum(zfs, Axis::Y, &b, GyroRatio::ELECTRON).unwrap();
    assert_eq!(sx[0].frequencies, sy[0].frequencies);
    for k in 1..3 {
        assert!(sx[k]
            .frequencies
            .iter()
            .zip(sy[k].frequencies)
            .any(|(a, b)| (a - b).abs() > 1e6));
    }
}

#[test]
fn sweep_branches_are_continuous_and_match_oracle() {
    let n = 3001;
    let db = 0.3 / (n - 1) as f64;
    let b: Vec<f64> = (0..n).map(|k| k as f64 * db).collect();
    for axis in [Axis::X, Axis::Y, Axis::Z] {
        let rows =
            field_sweep_spectrum(ZfsParams::pentacene(), axis, &b, GyroRatio::ELECTRON).unwrap();
        // each level moves at most |γ| per tesla, so a line at most 2|γ|
        let bound = 2.0 * 28e9 * db * 2.0;
        for w in rows.windows(2) {
            for k in 0..3 {
                let step = (w[1].frequencies[k] - w[0].frequencies[k]).abs();
                assert!(step < bound, "{axis:?} jump {step} at {}", w[1].b);
            }
        }
        for row in rows.iter().step_by(100) {
            let mut bv = [0.0; 3];
            bv[axis as usize] = row.b;
            let dense = dense_eigenvalues(&oracle_matrix(zfs_diag(D, E), -28e9, bv));
            let mut lines = [
                dense[1] - dense[0],
                dense[2] - dense[1],
                dense[2] - dense[0],
            ];
            lines.sort_by(f64::total_cmp);
            let mut got = row.frequencies;
            got.sort_by(f64::total_cmp);
            for k in 0..3 {
                assert!((got[k] - lines[k]).abs() < 1e-9 * dense[2].abs().max(1.0));
            }
        }
    }
}

#[test]
fn high_field_outer_lines_track_oracle() {
    // B along Z at 2 T: |γB| = 56 GHz ≫ D
    let bz = 2.0;
    let f = pentacene_lines([0.0, 0.0, bz]);
    let dense = dense_eigenvalues(&oracle_matrix(zfs_diag(D, E), -28e9, [0.0, 0.0, bz]));
    let mut got = f;
    got.sort_by(f64::total_cmp);
    assert!((got[2] - (dense[2] - dense[0])).abs() < 1e-9 * dense[2]);
    // the outer pair straddles |γ|B
    let upper = dense[2] - dense[1];
    let lower = dense[1] - dense[0];
    assert!(lower < 28e9 * bz && upper > 28e9 * bz);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn eigenvalues_match_dense_oracle(
        d in -3e9..3e9f64,
        ratio in -1.0..1.0f64,
        bx in -0.5..0.5f64,
        by in -0.5..0.5f64,
        bz in -0.5..0.5f64,
    ) {
        let e = ratio * d;
        let b = [bx, by, bz];
        let eig = ours(d, e, b, -28e9);
        let dense = dense_eigenvalues(&oracle_matrix(zfs_diag(d, e), -28e9, b));
        let s = scale(&dense);
        for k in 0..3 {
            prop_assert!((eig.energies[k] - dense[k]).abs() < 1e-9 * s,
                "level {k}: {} vs {}", eig.energies[k], dense[k]);
        }
        // trace invariance
        let h = build_hamiltonian(ZfsParams::new(d, e).unwrap(),
            FieldVector::new(bx, by, bz).unwrap(), GyroRatio::ELECTRON).unwrap();
        let tr: f64 = (0..3).map(|k| h[(k, k)].re).sum();
        prop_assert!((eig.energies.iter().sum::<f64>() - tr).abs() < 1e-9 * s);
        // unitarity and residual
        let v = eig.eigenvectors;
        prop_assert!((v.adjoint() * v - M3::identity()).norm() < 1e-12);
        for k in 0..3 {
            let col = v.column(k);
            let r = h * col - col * Complex::new(eig.energies[k], 0.0);
            prop_assert!(r.norm() < 1e-9 * s);
        }
    }

    #[test]
    fn zero_field_identity(d in -3e9..3e9f64, ratio in -1.0..1.0f64) {
        let e = ratio * d;
        let mut got: Vec<f64> = transition_frequencies(&ours(d, e, [0.0; 3], -28e9))
            .iter().map(|t| t.frequency).collect();
        let mut expect = [(d + e).abs(), (d - e).abs(), (2.0 * e).abs()];
        got.sort_by(f64::total_cmp);
        expect.sort_by(f64::total_cmp);
        let s = expect[2].max(1.0);
        for k in 0..3 {
            prop_assert!((got[k] - expect[k]).abs() <= 1e-12 * s);
        }
    }

    #[test]
    fn x_field_equals_rotated_oracle(d in -3e9..3e9f64, ratio in -1.0..1.0f64, bx in -0.5..0.5f64) {
        let e = ratio * d;
        let eig = ours(d, e, [bx, 0.0, 0.0], -28e9);
        // cyclic relabeling x→z, y→x, z→y puts the field on the third axis
        let [ex, ey, ez] = zfs_diag(d, e);
        let dense = dense_eigenvalues(&oracle_matrix([ey, ez, ex], -28e9, [0.0, 0.0, bx]));
        let s = scale(&dense);
        for k in 0..3 {
            prop_assert!((eig.energies[k] - dense[k]).abs() < 1e-9 * s);
        }
    }
}
