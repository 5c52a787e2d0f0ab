//! Spin-1 triplet Hamiltonian with zero-field splitting and Zeeman terms.
//!
//! Everything here is written in the zero-field eigenbasis {Tx, Ty, Tz} and in
//! plain frequency units: matrix entries and energies are in Hz, with the
//! ħ and 2π factors absorbed. In that basis the spin operators are
//! `(S_k)_ij = -i ε_kij`, the ZFS part is diagonal with
//! `Ex = D/3 - E`, `Ey = D/3 + E`, `Ez = -2D/3`, and the Zeeman term
//! `γ B·S` is purely imaginary and off-diagonal.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::linalg::{hermitian_eigen, hermiticity_error, CMatrix3, C64};

/// Zero-field splitting parameters, both in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZfsParams {
    pub d: f64,
    pub e: f64,
}

impl ZfsParams {
    pub fn new(d: f64, e: f64) -> Result<Self> {
        let zfs = ZfsParams { d, e };
        zfs.validate()?;
        Ok(zfs)
    }

    /// Pentacene on hBN: D = 1.905 GHz, E = -0.475 GHz.
    pub fn pentacene() -> Self {
        ZfsParams {
            d: 1.905e9,
            e: -0.475e9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("zfs.d", self.d)?;
        ensure_finite("zfs.e", self.e)?;
        if self.e.abs() > self.d.abs() {
            return Err(Error::invalid(format!(
                "ZFS constraint |E| <= |D| violated (D = {} Hz, E = {} Hz)",
                self.d, self.e
            )));
        }
        Ok(())
    }
}

/// Magnetic field in tesla, in the molecular (X, Y, Z) frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FieldVector {
    pub bx: f64,
    pub by: f64,
    pub bz: f64,
}

impl FieldVector {
    pub fn new(bx: f64, by: f64, bz: f64) -> Result<Self> {
        let f = FieldVector { bx, by, bz };
        f.validate()?;
        Ok(f)
    }

    pub fn zero() -> Self {
        FieldVector::default()
    }

    pub fn along(axis: Axis, b: f64) -> Self {
        match axis {
            Axis::X => FieldVector {
                bx: b,
                by: 0.0,
                bz: 0.0,
            },
            Axis::Y => FieldVector {
                bx: 0.0,
                by: b,
                bz: 0.0,
            },
            Axis::Z => FieldVector {
                bx: 0.0,
                by: 0.0,
                bz: b,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("field.bx", self.bx)?;
        ensure_finite("field.by", self.by)?;
        ensure_finite("field.bz", self.bz)
    }

    pub fn magnitude(&self) -> f64 {
        (self.bx * self.bx + self.by * self.by + self.bz * self.bz).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Gyromagnetic ratio in Hz/T.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GyroRatio(f64);

impl GyroRatio {
    pub const ELECTRON: GyroRatio = GyroRatio(-28.0e9);

    pub fn new(gamma: f64) -> Result<Self> {
        ensure_finite("gamma", gamma)?;
        if gamma == 0.0 {
            return Err(Error::invalid("gyromagnetic ratio must be nonzero"));
        }
        Ok(GyroRatio(gamma))
    }

    pub fn hz_per_tesla(self) -> f64 {
        self.0
    }
}

impl Default for GyroRatio {
    fn default() -> Self {
        GyroRatio::ELECTRON
    }
}

/// Zero-field triplet sublevel, also used as the label of a field-mixed
/// eigenstate (its dominant zero-field character).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sublevel {
    Tx,
    Ty,
    Tz,
}

impl Sublevel {
    pub const ALL: [Sublevel; 3] = [Sublevel::Tx, Sublevel::Ty, Sublevel::Tz];

    pub fn index(self) -> usize {
        match self {
            Sublevel::Tx => 0,
            Sublevel::Ty => 1,
            Sublevel::Tz => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Sublevel::ALL.get(i).copied()
    }
}

impl fmt::Display for Sublevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Sublevel::Tx => "Tx",
            Sublevel::Ty => "Ty",
            Sublevel::Tz => "Tz",
        };
        f.write_str(s)
    }
}

/// The three triplet transitions, named by their zero-field character.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransitionPair {
    #[serde(rename = "xy")]
    XY,
    #[serde(rename = "yz")]
    YZ,
    #[serde(rename = "xz")]
    XZ,
}

impl TransitionPair {
    pub const ALL: [TransitionPair; 3] =
        [TransitionPair::XY, TransitionPair::YZ, TransitionPair::XZ];

    pub fn levels(self) -> (Sublevel, Sublevel) {
        match self {
            TransitionPair::XY => (Sublevel::Tx, Sublevel::Ty),
            TransitionPair::YZ => (Sublevel::Ty, Sublevel::Tz),
            TransitionPair::XZ => (Sublevel::Tx, Sublevel::Tz),
        }
    }

    pub fn indices(self) -> (usize, usize) {
        let (a, b) = self.levels();
        (a.index(), b.index())
    }

    /// The sublevel not addressed by this transition.
    pub fn spectator(self) -> Sublevel {
        match self {
            TransitionPair::XY => Sublevel::Tz,
            TransitionPair::YZ => Sublevel::Tx,
            TransitionPair::XZ => Sublevel::Ty,
        }
    }

    pub fn involves(self, level: Sublevel) -> bool {
        let (a, b) = self.levels();
        a == level || b == level
    }

    pub fn from_levels(a: Sublevel, b: Sublevel) -> Option<Self> {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        match (lo, hi) {
            (Sublevel::Tx, Sublevel::Ty) => Some(TransitionPair::XY),
            (Sublevel::Ty, Sublevel::Tz) => Some(TransitionPair::YZ),
            (Sublevel::Tx, Sublevel::Tz) => Some(TransitionPair::XZ),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        match self {
            TransitionPair::XY => 0,
            TransitionPair::YZ => 1,
            TransitionPair::XZ => 2,
        }
    }
}

impl fmt::Display for TransitionPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (a, b) = self.levels();
        write!(f, "{a}<->{b}")
    }
}

impl std::str::FromStr for TransitionPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "xy" | "yx" => Ok(TransitionPair::XY),
            "yz" | "zy" => Ok(TransitionPair::YZ),
            "xz" | "zx" => Ok(TransitionPair::XZ),
            other => Err(Error::invalid(format!("unknown transition '{other}'"))),
        }
    }
}

/// Spin-1 Hamiltonian `D(Sz² - S²/3) + E(Sx² - Sy²) + γ B·S` in the
/// {Tx, Ty, Tz} basis, entries in Hz.
pub fn build_hamiltonian(zfs: ZfsParams, field: FieldVector, gamma: GyroRatio) -> Result<CMatrix3> {
    zfs.validate()?;
    field.validate()?;
    let g = gamma.hz_per_tesla();
    ensure_finite("gamma", g)?;

    let (d, e) = (zfs.d, zfs.e);
    let zero = C64::new(0.0, 0.0);
    let mut h = CMatrix3::from_element(zero);
    h[(0, 0)] = C64::new(d / 3.0 - e, 0.0);
    h[(1, 1)] = C64::new(d / 3.0 + e, 0.0);
    h[(2, 2)] = C64::new(-2.0 * d / 3.0, 0.0);

    // H_ij = -i γ Σ_k ε_kij B_k
    h[(0, 1)] = C64::new(0.0, -g * field.bz);
    h[(1, 0)] = C64::new(0.0, g * field.bz);
    h[(1, 2)] = C64::new(0.0, -g * field.bx);
    h[(2, 1)] = C64::new(0.0, g * field.bx);
    h[(2, 0)] = C64::new(0.0, -g * field.by);
    h[(0, 2)] = C64::new(0.0, g * field.by);
    Ok(h)
}

/// Eigenstates of the triplet Hamiltonian together with their zero-field
/// character labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletEigensystem {
    /// Energies in Hz, ascending.
    pub energies: [f64; 3],
    /// Columns are eigenstates expressed in the {Tx, Ty, Tz} basis.
    pub eigenvectors: CMatrix3,
    /// `labels[n]` is the dominant zero-field character of eigenstate `n`.
    pub labels: [Sublevel; 3],
}

impl TripletEigensystem {
    /// Eigenstate index carrying the given zero-field label.
    pub fn state_of(&self, level: Sublevel) -> usize {
        self.labels
            .iter()
            .position(|&l| l == level)
            .expect("labels form a permutation")
    }

    pub fn energy_of(&self, level: Sublevel) -> f64 {
        self.energies[self.state_of(level)]
    }

    /// `weights[c][n] = |<c|n>|²`: zero-field character `c` of eigenstate `n`.
    pub fn character_weights(&self) -> [[f64; 3]; 3] {
        let mut w = [[0.0; 3]; 3];
        for (c, row) in w.iter_mut().enumerate() {
            for (n, cell) in row.iter_mut().enumerate() {
                *cell = self.eigenvectors[(c, n)].norm_sqr();
            }
        }
        w
    }

    /// Eigenvector matrix with columns reordered so column `c` is the state
    /// labelled by zero-field sublevel `c`.
    pub fn vectors_by_label(&self) -> CMatrix3 {
        let mut out = CMatrix3::zeros();
        for level in Sublevel::ALL {
            out.set_column(
                level.index(),
                &self.eigenvectors.column(self.state_of(level)),
            );
        }
        out
    }
}

const PERMUTATIONS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Permutation `perm` maximizing `Σ_n score[n][perm[n]]`; the first one in
/// lexicographic order wins ties.
fn best_assignment(score: &[[f64; 3]; 3]) -> [usize; 3] {
    let mut best = PERMUTATIONS[0];
    let mut best_score = f64::NEG_INFINITY;
    for perm in PERMUTATIONS {
        let s: f64 = (0..3).map(|n| score[n][perm[n]]).sum();
        if s > best_score + 1e-12 {
            best_score = s;
            best = perm;
        }
    }
    best
}

pub fn eigensystem(h: &CMatrix3) -> Result<TripletEigensystem> {
    if hermiticity_error(h) > 1e-9 {
        return Err(Error::invalid("Hamiltonian is not Hermitian within 1e-9"));
    }
    let (vals, vecs) = hermitian_eigen(h)?;
    let mut score = [[0.0; 3]; 3];
    for (n, row) in score.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            *cell = vecs[(c, n)].norm_sqr();
        }
    }
    let perm = best_assignment(&score);
    let labels = perm.map(|c| Sublevel::from_index(c).unwrap());
    Ok(TripletEigensystem {
        energies: [vals[0], vals[1], vals[2]],
        eigenvectors: vecs,
        labels,
    })
}

/// A labelled transition frequency in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub pair: TransitionPair,
    pub frequency: f64,
}

/// The three transition frequencies, ordered XY, YZ, XZ.
pub fn transition_frequencies(eig: &TripletEigensystem) -> [Transition; 3] {
    TransitionPair::ALL.map(|pair| {
        let (a, b) = pair.levels();
        Transition {
            pair,
            frequency: (eig.energy_of(a) - eig.energy_of(b)).abs(),
        }
    })
}

/// One row of a field sweep: field in tesla, then branch energies and
/// transition frequencies indexed by zero-field character (Hz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub b: f64,
    /// Energies of the branches that started as Tx, Ty, Tz.
    pub energies: [f64; 3],
    /// Transition frequencies ordered XY, YZ, XZ.
    pub frequencies: [f64; 3],
}

impl SpectrumRow {
    pub fn frequency(&self, pair: TransitionPair) -> f64 {
        self.frequencies[pair.index()]
    }
}

/// Transition frequencies for a field swept along one molecular axis.
///
/// Branches keep their identity through level crossings by maximal
/// eigenvector overlap with the previous grid point, so the labels do not
/// follow energy ordering. The first point is labelled by zero-field
/// character.
pub fn field_sweep_spectrum(
    zfs: ZfsParams,
    axis: Axis,
    b_values: &[f64],
    gamma: GyroRatio,
) -> Result<Vec<SpectrumRow>> {
    Ok(tracked_field_sweep(zfs, axis, b_values, gamma)?
        .into_iter()
        .map(|(row, _)| row)
        .collect())
}

/// Field sweep that also returns, per grid point, the tracked eigenvectors
/// (column `k` belongs to the branch that started with character `k`).
pub fn tracked_field_sweep(
    zfs: ZfsParams,
    axis: Axis,
    b_values: &[f64],
    gamma: GyroRatio,
) -> Result<Vec<(SpectrumRow, CMatrix3)>> {
    zfs.validate()?;
    for &b in b_values {
        ensure_finite("b", b)?;
    }
    let mut rows: Vec<(SpectrumRow, CMatrix3)> = Vec::with_capacity(b_values.len());
    for &b in b_values {
        let h = build_hamiltonian(zfs, FieldVector::along(axis, b), gamma)?;
        let eig = eigensystem(&h)?;
        // branch_state[branch] = eigenstate index
        let branch_state: [usize; 3] = match rows.last() {
            None => Sublevel::ALL.map(|l| eig.state_of(l)),
            Some((_, prev)) => {
                let mut score = [[0.0; 3]; 3];
                for (br, row) in score.iter_mut().enumerate() {
                    for (n, cell) in row.iter_mut().enumerate() {
                        *cell = (prev.column(br).adjoint() * eig.eigenvectors.column(n))[(0, 0)]
                            .norm_sqr();
                    }
                }
                best_assignment(&score)
            }
        };
        let energies = branch_state.map(|n| eig.energies[n]);
        let frequencies = TransitionPair::ALL.map(|pair| {
            let (i, j) = pair.indices();
            (energies[i] - energies[j]).abs()
        });
        let mut tracked = CMatrix3::zeros();
        for (br, &n) in branch_state.iter().enumerate() {
            tracked.set_column(br, &eig.eigenvectors.column(n));
        }
        rows.push((
            SpectrumRow {
                b,
                energies,
                frequencies,
            },
            tracked,
        ));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use approx::assert_relative_eq;

    #[test]
    fn zero_field_energies_follow_analytic_formulas() {
        let zfs = ZfsParams::pentacene();
        let h = build_hamiltonian(zfs, FieldVector::zero(), GyroRatio::ELECTRON).unwrap();
        assert_relative_eq!(h[(0, 0)].re, 1.110e9, max_relative = 1e-12);
        assert_relative_eq!(h[(1, 1)].re, 0.160e9, max_relative = 1e-12);
        assert_relative_eq!(h[(2, 2)].re, -1.270e9, max_relative = 1e-12);
        let trace: f64 = (0..3).map(|i| h[(i, i)].re).sum();
        assert!(trace.abs() < 1e-3);
        assert_eq!(h[(0, 1)], C64::new(0.0, 0.0));
    }

    #[test]
    fn zero_parameters_give_zero_matrix() {
        let h = build_hamiltonian(
            ZfsParams::new(0.0, 0.0).unwrap(),
            FieldVector::zero(),
            GyroRatio::ELECTRON,
        )
        .unwrap();
        assert_eq!(max_abs(&h), 0.0);
    }

    #[test]
    fn non_finite_inputs_rejected() {
        let zfs = ZfsParams {
            d: f64::NAN,
            e: 0.0,
        };
        assert!(build_hamiltonian(zfs, FieldVector::zero(), GyroRatio::ELECTRON).is_err());
        let field = FieldVector {
            bx: f64::INFINITY,
            by: 0.0,
            bz: 0.0,
        };
        assert!(build_hamiltonian(ZfsParams::pentacene(), field, GyroRatio::ELECTRON).is_err());
        assert!(ZfsParams::new(1.0e9, 1.5e9).is_err());
        assert!(GyroRatio::new(0.0).is_err());
    }

    #[test]
    fn zero_field_labels() {
        let h = build_hamiltonian(
            ZfsParams::pentacene(),
            FieldVector::zero(),
            GyroRatio::ELECTRON,
        )
        .unwrap();
        let eig = eigensystem(&h).unwrap();
        assert_eq!(eig.labels, [Sublevel::Tz, Sublevel::Ty, Sublevel::Tx]);
        assert_relative_eq!(eig.energies[0], -1.270e9, max_relative = 1e-12);
        assert_relative_eq!(eig.energies[1], 0.160e9, max_relative = 1e-12);
        assert_relative_eq!(eig.energies[2], 1.110e9, max_relative = 1e-12);
    }

    #[test]
    fn pure_zeeman_limit() {
        let zfs = ZfsParams::new(0.0, 0.0).unwrap();
        let h =
            build_hamiltonian(zfs, FieldVector::along(Axis::Z, 0.1), GyroRatio::ELECTRON).unwrap();
        let eig = eigensystem(&h).unwrap();
        assert_relative_eq!(eig.energies[0], -2.8e9, max_relative = 1e-12);
        assert!(eig.energies[1].abs() < 1e-3);
        assert_relative_eq!(eig.energies[2], 2.8e9, max_relative = 1e-12);
    }

    #[test]
    fn zero_field_transitions() {
        let h = build_hamiltonian(
            ZfsParams::pentacene(),
            FieldVector::zero(),
            GyroRatio::ELECTRON,
        )
        .unwrap();
        let t = transition_frequencies(&eigensystem(&h).unwrap());
        assert_eq!(t[0].pair, TransitionPair::XY);
        assert_relative_eq!(t[0].frequency, 0.950e9, max_relative = 1e-12);
        assert_relative_eq!(t[1].frequency, 1.430e9, max_relative = 1e-12);
        assert_relative_eq!(t[2].frequency, 2.380e9, max_relative = 1e-12);

        let h0 = build_hamiltonian(
            ZfsParams::new(0.0, 0.0).unwrap(),
            FieldVector::zero(),
            GyroRatio::ELECTRON,
        )
        .unwrap();
        assert!(transition_frequencies(&eigensystem(&h0).unwrap())
            .iter()
            .all(|t| t.frequency == 0.0));
    }

    #[test]
    fn sweep_axes_differ_for_nonzero_e() {
        let zfs = ZfsParams::pentacene();
        let bs = [0.0, 0.02, 0.05];
        let x = field_sweep_spectrum(zfs, Axis::X, &bs, GyroRatio::ELECTRON).unwrap();
        let y = field_sweep_spectrum(zfs, Axis::Y, &bs, GyroRatio::ELECTRON).unwrap();
        assert_eq!(x[0].frequencies, y[0].frequencies);
        for k in 1..bs.len() {
            assert_ne!(x[k].frequencies, y[k].frequencies);
        }
        assert!(field_sweep_spectrum(zfs, Axis::Z, &[], GyroRatio::ELECTRON)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn sweep_tracks_through_crossing() {
        // Along Z only Tx and Ty mix; Tz stays an exact eigenstate at -2D/3
        // and the lower mixed branch crosses it near 66 mT.
        let zfs = ZfsParams::pentacene();
        let bs: Vec<f64> = (0..=200).map(|k| k as f64 * 1e-3).collect();
        let rows = field_sweep_spectrum(zfs, Axis::Z, &bs, GyroRatio::ELECTRON).unwrap();
        for r in &rows {
            assert_relative_eq!(r.energies[2], -2.0 * zfs.d / 3.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn transition_pair_parsing() {
        assert_eq!("zy".parse::<TransitionPair>().unwrap(), TransitionPair::YZ);
        assert!("xx".parse::<TransitionPair>().is_err());
        assert_eq!(TransitionPair::XZ.spectator(), Sublevel::Ty);
        assert_eq!(
            TransitionPair::from_levels(Sublevel::Tz, Sublevel::Tx),
            Some(TransitionPair::XZ)
        );
    }
}
