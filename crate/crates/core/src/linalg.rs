//! Small dense linear algebra used across the crate: a Jacobi eigensolver
//! for 3×3 Hermitian matrices and Gauss–Hermite quadrature nodes.

use nalgebra::{DMatrix, Matrix3, SymmetricEigen, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix3 = Matrix3<C64>;

const MAX_SWEEPS: usize = 64;

/// Largest entry magnitude, used as the scale for relative tolerances.
pub fn max_abs(m: &CMatrix3) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest deviation from Hermiticity relative to the matrix scale.
pub fn hermiticity_error(m: &CMatrix3) -> f64 {
    let scale = max_abs(m);
    let dev = (m - m.adjoint())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if scale == 0.0 {
        dev
    } else {
        dev / scale
    }
}

/// Eigen-decomposition of a 3×3 Hermitian matrix by cyclic complex Jacobi
/// rotations.
///
/// Eigenvalues are returned ascending; column `k` of the returned matrix is
/// the eigenvector of eigenvalue `k`, phased so that its largest-magnitude
/// component is real and positive (first such component on ties).
pub fn hermitian_eigen(m: &CMatrix3) -> Result<(Vector3<f64>, CMatrix3)> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    if hermiticity_error(m) > 1e-9 {
        return Err(Error::invalid(format!(
            "matrix is not Hermitian (relative deviation {:.3e})",
            hermiticity_error(m)
        )));
    }
    // Symmetrize so round-off in the input cannot leak into the rotations.
    let mut a = (m + m.adjoint()).scale(0.5);
    let mut v = CMatrix3::identity();
    let scale = max_abs(&a);

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..3)
            .flat_map(|i| (0..3).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum();
        if off <= (f64::EPSILON * scale).powi(2) || scale == 0.0 {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            let apq = a[(p, q)];
            let b = apq.norm();
            if b <= f64::MIN_POSITIVE {
                continue;
            }
            let phase = apq / b;
            let tau = (a[(q, q)].re - a[(p, p)].re) / (2.0 * b);
            let t = if tau == 0.0 {
                1.0
            } else {
                tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
            };
            let c = 1.0 / (1.0 + t * t).sqrt();
            let s = t * c;

            let mut j = CMatrix3::identity();
            j[(p, p)] = C64::new(c, 0.0);
            j[(p, q)] = C64::new(s, 0.0);
            j[(q, p)] = -phase.conj() * s;
            j[(q, q)] = phase.conj() * c;

            a = j.adjoint() * a * j;
            a[(p, q)] = C64::new(0.0, 0.0);
            a[(q, p)] = C64::new(0.0, 0.0);
            v *= j;
        }
    }

    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &k| a[(i, i)].re.total_cmp(&a[(k, k)].re));

    let mut values = Vector3::zeros();
    let mut vectors = CMatrix3::zeros();
    for (col, &src) in order.iter().enumerate() {
        values[col] = a[(src, src)].re;
        let mut vec = v.column(src).into_owned();
        let norm = vec.norm();
        vec /= C64::new(norm, 0.0);
        let max = vec.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let lead = vec
            .iter()
            .position(|z| z.norm() >= max * (1.0 - 1e-12))
            .unwrap_or(0);
        let ph = vec[lead].conj() / vec[lead].norm();
        vec *= ph;
        vec[lead] = C64::new(vec[lead].re, 0.0);
        vectors.set_column(col, &vec);
    }
    Ok((values, vectors))
}

/// Physicists' Gauss–Hermite nodes and weights (weight function `exp(-x²)`)
/// via the Golub–Welsch construction.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Hermite rule needs at least one node");
    if n == 1 {
        return (vec![0.0], vec![std::f64::consts::PI.sqrt()]);
    }
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let off = (k as f64 / 2.0).sqrt();
        jac[(k - 1, k)] = off;
        jac[(k, k - 1)] = off;
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], std::f64::consts::PI.sqrt() * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Enforce the exact mirror symmetry of the rule.
    for k in 0..n / 2 {
        let x = 0.5 * (pairs[n - 1 - k].0 - pairs[k].0);
        let w = 0.5 * (pairs[n - 1 - k].1 + pairs[k].1);
        pairs[k] = (-x, w);
        pairs[n - 1 - k] = (x, w);
    }
    if n % 2 == 1 {
        pairs[n / 2].0 = 0.0;
    }
    pairs.into_iter().unzip()
}

/// Normal-distribution quadrature: sample points and probability weights
/// for `N(mean, sigma²)`. The weights sum to one.
pub fn normal_quadrature(n: usize, mean: f64, sigma: f64) -> Vec<(f64, f64)> {
    if sigma == 0.0 {
        return vec![(mean, 1.0)];
    }
    let (x, w) = gauss_hermite(n);
    let norm = std::f64::consts::PI.sqrt();
    x.into_iter()
        .zip(w)
        .map(|(x, w)| (mean + std::f64::consts::SQRT_2 * sigma * x, w / norm))
        .collect()
}
