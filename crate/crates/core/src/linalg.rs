//! Small dense/sparse complex linear-algebra kernels.

use nalgebra::DMatrix;

use crate::{CMatrix, CVector, C64};

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Kronecker product `a ⊗ b` (row-major: `a` is the slow index).
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn hermiticity_error(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut err: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            err = err.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    err
}

pub fn unitarity_error(u: &CMatrix) -> f64 {
    let n = u.nrows();
    max_abs_diff(&(u.adjoint() * u), &identity(n))
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
/// Columns of the returned matrix are the matching orthonormal eigenvectors.
pub fn hermitian_eigen(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = h.nrows();
    // Symmetrize first so round-off asymmetry does not leak into the solver.
    let sym = (h + h.adjoint()) * C64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(h: &CMatrix) -> Vec<f64> {
    let sym = (h + h.adjoint()) * C64::new(0.5, 0.0);
    let mut v: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// `exp(-i t H)` for Hermitian `H`, via eigendecomposition.
pub fn expm_hermitian(h: &CMatrix, t: f64) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(h);
    phase_propagator(&vals, &vecs, t)
}

/// `V diag(e^{-i t λ}) V†` from a precomputed eigendecomposition.
pub fn phase_propagator(vals: &[f64], vecs: &CMatrix, t: f64) -> CMatrix {
    let n = vals.len();
    let mut scaled = vecs.clone();
    for (c, &lam) in vals.iter().enumerate() {
        let ph = C64::from_polar(1.0, -lam * t);
        for r in 0..n {
            scaled[(r, c)] *= ph;
        }
    }
    scaled * vecs.adjoint()
}

/// `exp(G)` for anti-Hermitian `G`. Writing `G = -iH` with `H = iG`
/// Hermitian gives an exactly unitary result up to round-off.
pub fn expm_antihermitian(g: &CMatrix) -> CMatrix {
    let h = g * C64::i();
    expm_hermitian(&h, 1.0)
}

pub fn vec_norm_sqr(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Compressed-sparse-row complex matrix used by the Lindblad right-hand side,
/// where ladder-built operators have O(D) non-zeros.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseMatrix {
    /// Keep every entry whose magnitude exceeds `tol`.
    pub fn from_dense(m: &CMatrix, tol: f64) -> Self {
        assert!(m.is_square());
        let n = m.nrows();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for r in 0..n {
            for c in 0..n {
                let z = m[(r, c)];
                if z.norm() > tol {
                    cols.push(c);
                    vals.push(z);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { n, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[k])] += self.vals[k];
            }
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        Self::from_dense(&self.to_dense().adjoint(), 0.0)
    }

    /// `out += scale * self * x`.
    pub fn mul_acc(&self, x: &CMatrix, scale: C64, out: &mut CMatrix) {
        let ncols = x.ncols();
        for c in 0..ncols {
            let xc = x.column(c);
            for r in 0..self.n {
                let mut acc = C64::new(0.0, 0.0);
                for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                    acc += self.vals[k] * xc[self.cols[k]];
                }
                out[(r, c)] += scale * acc;
            }
        }
    }

    /// `out += scale * x * self†`.
    pub fn mul_adjoint_right_acc(&self, x: &CMatrix, scale: C64, out: &mut CMatrix) {
        // (x A†)[i, r] = Σ_c x[i, c] conj(A[r, c])
        let nrows = x.nrows();
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let a = scale * self.vals[k].conj();
                let c = self.cols[k];
                let src = x.column(c);
                let mut dst = out.column_mut(r);
                for i in 0..nrows {
                    dst[i] += src[i] * a;
                }
            }
        }
    }

    pub fn mul_vec(&self, x: &CVector) -> CVector {
        let mut out = CVector::zeros(self.n);
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out[r] += self.vals[k] * x[self.cols[k]];
            }
        }
        out
    }
}

/// Real-valued convenience: symmetric positive-(semi)definite solve used by
/// ridge regression. Returns `None` when the Cholesky factorization fails.
pub fn solve_spd(a: &DMatrix<f64>, b: &nalgebra::DVector<f64>) -> Option<nalgebra::DVector<f64>> {
    a.clone().cholesky().map(|ch| ch.solve(b))
}
