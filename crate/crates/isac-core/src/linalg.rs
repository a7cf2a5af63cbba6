//! Dense complex linear-algebra kernels.
//!
//! Everything downstream (channel models, SNR quadratics, the power-iteration
//! solvers) is built on [`CMatrix`], a column-major dense matrix of
//! `Complex64` entries. Column-major vectorization is fixed globally: the
//! identity `vec(A B C) = (Cᵀ ⊗ A) vec(B)` used throughout the SNR
//! reformulations only holds under that convention.
//!
//! Kernels are pure functions on immutable inputs and safe to call from
//! multiple threads. Dimension and symmetry requirements are contracts:
//! violating them panics with a descriptive message.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Relative safety margin applied when an eigenvalue estimate is used as a
/// diagonal-loading bound, so that `λI − H` stays PSD under round-off.
pub const LOADING_MARGIN: f64 = 1e-6;

/// Dense complex matrix with column-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    /// Create a matrix from column-major data.
    pub fn from_data(rows: usize, cols: usize, data: Vec<Complex64>) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        assert_eq!(data.len(), rows * cols, "data length must be rows*cols");
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![Complex64::ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Complex64::ONE);
        }
        m
    }

    /// Build entrywise from a closure over (row, col).
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for c in 0..cols {
            for r in 0..rows {
                m.set(r, c, f(r, c));
            }
        }
        m
    }

    /// Column vector from entries.
    pub fn column(entries: Vec<Complex64>) -> Self {
        let rows = entries.len();
        Self::from_data(rows, 1, entries)
    }

    /// Diagonal matrix with the entries of `v` (a column vector).
    pub fn diag(v: &CMatrix) -> Self {
        assert_eq!(v.cols, 1, "diag expects a column vector");
        let n = v.rows;
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, v.get(i, 0));
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[c * self.rows + r]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: Complex64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[c * self.rows + r] = value;
    }

    /// Column-major entry slice.
    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn mul(&self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul dimension mismatch: {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for c in 0..rhs.cols {
            for k in 0..self.cols {
                let w = rhs.get(k, c);
                if w == Complex64::ZERO {
                    continue;
                }
                for r in 0..self.rows {
                    let v = out.get(r, c) + self.get(r, k) * w;
                    out.set(r, c, v);
                }
            }
        }
        out
    }

    pub fn add(&self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "add shape mismatch");
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect();
        CMatrix::from_data(self.rows, self.cols, data)
    }

    pub fn sub(&self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "sub shape mismatch");
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect();
        CMatrix::from_data(self.rows, self.cols, data)
    }

    pub fn scale(&self, s: Complex64) -> CMatrix {
        let data = self.data.iter().map(|a| a * s).collect();
        CMatrix::from_data(self.rows, self.cols, data)
    }

    pub fn scale_re(&self, s: f64) -> CMatrix {
        self.scale(Complex64::new(s, 0.0))
    }

    pub fn transpose(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn conj(&self) -> CMatrix {
        let data = self.data.iter().map(|z| z.conj()).collect();
        CMatrix::from_data(self.rows, self.cols, data)
    }

    /// Hermitian distance `max |A[i,j] − conj(A[j,i])|`, for contract checks.
    pub fn hermitian_defect(&self) -> f64 {
        assert!(self.is_square(), "hermitian_defect requires a square matrix");
        let mut worst = 0.0f64;
        for c in 0..self.cols {
            for r in 0..=c {
                let d = (self.get(r, c) - self.get(c, r).conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let scale = 1.0 + self.frobenius_norm_impl() / (self.rows as f64);
        self.hermitian_defect() <= tol * scale
    }

    /// `(A + Aᴴ)/2`, exactly Hermitian by construction.
    pub fn hermitized(&self) -> CMatrix {
        assert!(self.is_square(), "hermitized requires a square matrix");
        let mut out = CMatrix::zeros(self.rows, self.cols);
        for c in 0..self.cols {
            for r in 0..c {
                let v = (self.get(r, c) + self.get(c, r).conj()).scale(0.5);
                out.set(r, c, v);
                out.set(c, r, v.conj());
            }
            out.set(c, c, Complex64::new(self.get(c, c).re, 0.0));
        }
        out
    }

    /// Bordered Hermitian block matrix `[[A, e], [eᴴ, corner]]`.
    ///
    /// `A` must be Hermitian and `e` a column of matching height; the result
    /// is exactly Hermitian.
    pub fn bordered(a: &CMatrix, edge: &CMatrix, corner: f64) -> CMatrix {
        assert!(a.is_square(), "bordered: block must be square");
        assert_eq!(edge.cols, 1, "bordered: edge must be a column");
        assert_eq!(edge.rows, a.rows, "bordered: edge height mismatch");
        let n = a.rows + 1;
        let mut out = CMatrix::zeros(n, n);
        for c in 0..a.cols {
            for r in 0..a.rows {
                out.set(r, c, a.get(r, c));
            }
        }
        for r in 0..a.rows {
            out.set(r, n - 1, edge.get(r, 0));
            out.set(n - 1, r, edge.get(r, 0).conj());
        }
        out.set(n - 1, n - 1, Complex64::new(corner, 0.0));
        out
    }

    /// Zero-pad a square block into the top-left of an (n+1)×(n+1) matrix.
    pub fn pad_corner(a: &CMatrix) -> CMatrix {
        assert!(a.is_square(), "pad_corner: block must be square");
        let n = a.rows + 1;
        let mut out = CMatrix::zeros(n, n);
        for c in 0..a.cols {
            for r in 0..a.rows {
                out.set(r, c, a.get(r, c));
            }
        }
        out
    }

    /// First `n` rows of a column vector.
    pub fn head(&self, n: usize) -> CMatrix {
        assert_eq!(self.cols, 1, "head expects a column vector");
        assert!(n >= 1 && n <= self.rows, "head length out of range");
        CMatrix::column(self.data[..n].to_vec())
    }

    /// Column vector with extra unit entries appended.
    pub fn append_ones(&self, count: usize) -> CMatrix {
        assert_eq!(self.cols, 1, "append_ones expects a column vector");
        let mut data = self.data.clone();
        data.extend(std::iter::repeat(Complex64::ONE).take(count));
        CMatrix::column(data)
    }

    fn frobenius_norm_impl(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Kronecker product `A ⊗ B`: block (i, j) equals `A[i,j]·B`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(a.rows() * b.rows(), a.cols() * b.cols());
    for ca in 0..a.cols() {
        for ra in 0..a.rows() {
            let w = a.get(ra, ca);
            if w == Complex64::ZERO {
                continue;
            }
            for cb in 0..b.cols() {
                for rb in 0..b.rows() {
                    out.set(ra * b.rows() + rb, ca * b.cols() + cb, w * b.get(rb, cb));
                }
            }
        }
    }
    out
}

/// Elementwise (Hadamard) product. Panics on shape mismatch.
pub fn hadamard(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert_eq!(
        (a.rows(), a.cols()),
        (b.rows(), b.cols()),
        "hadamard shape mismatch"
    );
    let data = a
        .entries()
        .iter()
        .zip(b.entries())
        .map(|(x, y)| x * y)
        .collect();
    CMatrix::from_data(a.rows(), a.cols(), data)
}

/// Column-major stacking of a matrix into a column vector.
pub fn vectorize(a: &CMatrix) -> CMatrix {
    CMatrix::column(a.entries().to_vec())
}

/// The L²×L selection matrix whose column l is the vectorization of the
/// single-entry matrix with a 1 at (l, l), so that `T v = vec(Diag(v))`.
pub fn selection_matrix(l: usize) -> CMatrix {
    assert!(l >= 1, "selection_matrix requires L >= 1");
    let mut t = CMatrix::zeros(l * l, l);
    for c in 0..l {
        t.set(c * l + c, c, Complex64::ONE);
    }
    t
}

pub fn conj_transpose(a: &CMatrix) -> CMatrix {
    CMatrix::from_fn(a.cols(), a.rows(), |r, c| a.get(c, r).conj())
}

pub fn trace(a: &CMatrix) -> Complex64 {
    assert!(a.is_square(), "trace requires a square matrix");
    (0..a.rows()).map(|i| a.get(i, i)).sum()
}

pub fn frobenius_norm(a: &CMatrix) -> f64 {
    a.entries().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Euclidean norm of a column vector.
pub fn two_norm(x: &CMatrix) -> f64 {
    assert_eq!(x.cols(), 1, "two_norm expects a column vector");
    frobenius_norm(x)
}

/// `Mᴴ M`, exactly Hermitian by construction (upper triangle mirrored).
pub fn gram(m: &CMatrix) -> CMatrix {
    let n = m.cols();
    let mut out = CMatrix::zeros(n, n);
    for c in 0..n {
        for r in 0..=c {
            let mut acc = Complex64::ZERO;
            for k in 0..m.rows() {
                acc += m.get(k, r).conj() * m.get(k, c);
            }
            if r == c {
                out.set(r, c, Complex64::new(acc.re, 0.0));
            } else {
                out.set(r, c, acc);
                out.set(c, r, acc.conj());
            }
        }
    }
    out
}

/// `Sᴴ Q S` for Hermitian `Q`, exactly Hermitian by construction.
pub fn hermitian_sandwich(q: &CMatrix, s: &CMatrix) -> CMatrix {
    assert!(q.is_square(), "hermitian_sandwich: Q must be square");
    assert_eq!(q.rows(), s.rows(), "hermitian_sandwich shape mismatch");
    let w = q.mul(s);
    let n = s.cols();
    let mut out = CMatrix::zeros(n, n);
    for c in 0..n {
        for r in 0..=c {
            let mut acc = Complex64::ZERO;
            for k in 0..s.rows() {
                acc += s.get(k, r).conj() * w.get(k, c);
            }
            if r == c {
                out.set(r, c, Complex64::new(acc.re, 0.0));
            } else {
                out.set(r, c, acc);
                out.set(c, r, acc.conj());
            }
        }
    }
    out
}

/// Dominant eigenvalue/eigenvector of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct EigenPair {
    /// Rayleigh quotient at the returned vector (real for Hermitian input).
    pub value: f64,
    /// Unit-2-norm eigenvector estimate.
    pub vector: CMatrix,
    /// Set when the input was zero or the iteration hit a kernel vector;
    /// the vector is then only a seeded unit vector, not an eigenvector.
    pub degenerate: bool,
}

/// Default vector-change tolerance for [`dominant_eigenpair`].
pub const POWER_TOL: f64 = 1e-10;
/// Default iteration cap for [`dominant_eigenpair`].
pub const POWER_MAX_ITER: usize = 5000;

fn seeded_unit_vector(n: usize, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect();
    let v = CMatrix::column(entries);
    let norm = two_norm(&v);
    v.scale_re(1.0 / norm)
}

fn assert_hermitian_contract(h: &CMatrix, op: &str) {
    assert!(h.is_square(), "{op}: input must be square");
    let scale = 1.0 + frobenius_norm(h) / (h.rows() as f64);
    assert!(
        h.hermitian_defect() <= 1e-10 * scale,
        "{op}: input is not Hermitian within contract tolerance"
    );
}

/// Power iteration for the largest-magnitude eigenpair of a Hermitian matrix.
///
/// Iterates `x ← Hx/‖Hx‖₂` from a seeded start vector until the phase-aligned
/// iterate change drops below `tol` or `max_iter` is reached. The eigenvalue
/// is the Rayleigh quotient at the final iterate. A zero matrix (or an exact
/// kernel hit) returns value 0 with the `degenerate` flag set.
pub fn dominant_eigenpair(h: &CMatrix, tol: f64, max_iter: usize, rng_seed: u64) -> EigenPair {
    assert_hermitian_contract(h, "dominant_eigenpair");
    let n = h.rows();
    let mut x = seeded_unit_vector(n, rng_seed);
    if frobenius_norm(h) == 0.0 {
        return EigenPair {
            value: 0.0,
            vector: x,
            degenerate: true,
        };
    }
    for _ in 0..max_iter {
        let hx = h.mul(&x);
        let norm = two_norm(&hx);
        if norm == 0.0 {
            // Start vector landed exactly in the kernel.
            return EigenPair {
                value: 0.0,
                vector: x,
                degenerate: true,
            };
        }
        let next = hx.scale_re(1.0 / norm);
        // Change up to a global phase: rotate the old iterate onto the new
        // one before differencing. The componentwise subtraction keeps
        // resolution far below the 2−2|⟨x,x′⟩| cancellation floor.
        let mut inner = Complex64::ZERO;
        for i in 0..n {
            inner += x.get(i, 0).conj() * next.get(i, 0);
        }
        let change = if inner.norm() == 0.0 {
            2.0f64.sqrt()
        } else {
            let phase = inner / inner.norm();
            two_norm(&next.sub(&x.scale(phase)))
        };
        x = next;
        if change <= tol {
            break;
        }
    }
    let hx = h.mul(&x);
    let mut quotient = Complex64::ZERO;
    for i in 0..n {
        quotient += x.get(i, 0).conj() * hx.get(i, 0);
    }
    EigenPair {
        value: quotient.re,
        vector: x,
        degenerate: false,
    }
}

/// Largest *algebraic* eigenpair of a Hermitian matrix.
///
/// Runs [`dominant_eigenpair`]; when the dominant eigenvalue is negative the
/// iteration is repeated on `H + |λ|I` (same eigenvectors, spectrum shifted
/// nonnegative) and the shift removed. This is the quantity diagonal loading
/// needs: the smallest λ with `λI − H ⪰ 0`.
pub fn max_eigenpair(h: &CMatrix, tol: f64, max_iter: usize, rng_seed: u64) -> EigenPair {
    let first = dominant_eigenpair(h, tol, max_iter, rng_seed);
    if first.degenerate || first.value >= 0.0 {
        return first;
    }
    let shift = first.value.abs();
    let mut shifted = h.clone();
    for i in 0..h.rows() {
        let d = shifted.get(i, i) + Complex64::new(shift, 0.0);
        shifted.set(i, i, d);
    }
    let second = dominant_eigenpair(&shifted, tol, max_iter, rng_seed);
    EigenPair {
        value: second.value - shift,
        vector: second.vector,
        degenerate: second.degenerate,
    }
}

/// Diagonal-loading bound: largest algebraic eigenvalue inflated by a 1e−6
/// relative margin so `λI − H` stays PSD under floating-point error.
pub fn loading_bound(h: &CMatrix, rng_seed: u64) -> f64 {
    let pair = max_eigenpair(h, 1e-8, POWER_MAX_ITER, rng_seed);
    pair.value + LOADING_MARGIN * pair.value.abs()
}
