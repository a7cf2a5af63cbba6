//! Test-only dense Hermitian eigendecomposition (cyclic Jacobi) and random
//! instance helpers. Deliberately slow and simple: this is the independent
//! oracle the library's power iteration is checked against, so it shares no
//! code path with it.

use isac_core::linalg::{conj_transpose, frobenius_norm, CMatrix};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Full eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order with matching unit eigenvectors as
/// the columns of the second result.
pub fn hermitian_eigen(input: &CMatrix) -> (Vec<f64>, CMatrix) {
    assert!(input.is_square(), "hermitian_eigen needs a square matrix");
    let n = input.rows();
    let mut a = input.clone();
    let mut vectors = CMatrix::identity(n);
    let scale = 1.0 + frobenius_norm(input);

    for _sweep in 0..200 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a.get(p, q).norm_sqr();
            }
        }
        if off.sqrt() <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                let r = apq.norm();
                if r <= 1e-300 {
                    continue;
                }
                let phase = Complex64::from_polar(1.0, apq.arg());
                let app = a.get(p, p).re;
                let aqq = a.get(q, q).re;
                // Angle that zeroes the (p, q) entry of the rotated matrix.
                let theta = 0.5 * (2.0 * r).atan2(app - aqq);
                let (s, c) = theta.sin_cos();
                let mut rotation = CMatrix::identity(n);
                rotation.set(p, p, Complex64::new(c, 0.0));
                rotation.set(p, q, phase.scale(-s));
                rotation.set(q, p, phase.conj().scale(s));
                rotation.set(q, q, Complex64::new(c, 0.0));
                a = conj_transpose(&rotation).mul(&a.mul(&rotation));
                vectors = vectors.mul(&rotation);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a.get(i, i)
            .re
            .partial_cmp(&a.get(j, j).re)
            .expect("non-finite eigenvalue")
    });
    let values: Vec<f64> = order.iter().map(|&i| a.get(i, i).re).collect();
    let sorted_vectors = CMatrix::from_fn(n, n, |r, c| vectors.get(r, order[c]));
    (values, sorted_vectors)
}

/// Smallest eigenvalue, for PSD checks.
pub fn min_eigenvalue(input: &CMatrix) -> f64 {
    hermitian_eigen(input).0[0]
}

/// Largest eigenvalue.
pub fn max_eigenvalue(input: &CMatrix) -> f64 {
    *hermitian_eigen(input).0.last().expect("nonempty spectrum")
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    })
}

pub fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let m = random_matrix(n, n, rng);
    m.add(&conj_transpose(&m)).scale_re(0.5).hermitized()
}

pub fn random_unimodular(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    CMatrix::column(
        (0..n)
            .map(|_| Complex64::from_polar(1.0, rng.gen::<f64>() * std::f64::consts::TAU))
            .collect(),
    )
}

pub fn quad_form(m: &CMatrix, x: &CMatrix) -> f64 {
    conj_transpose(x).mul(&m.mul(x)).get(0, 0).re
}
