//! Dense complex linear algebra for the qubit ⊗ resonator compound.
//!
//! All compound operators use the coin ⊗ walker ordering: the coin index is
//! outermost, so the compound index of (coin `c`, walker `n`) is `c * d + n`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

/// Elementwise tolerance for treating a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Max-norm tolerance for unitarity checks.
pub const UNITARY_TOL: f64 = 1e-10;

const EIG_EPS: f64 = 1e-15;
const EIG_MAX_ITER: usize = 10_000;

pub const I: Complex64 = Complex64::new(0.0, 1.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Column `k` is the eigenvector for `eigenvalues[k]`.
    pub eigenvectors: ComplexMatrix,
}

impl Spectrum {
    /// `V diag(f(λ)) V†`.
    pub fn map<F: Fn(f64) -> Complex64>(&self, f: F) -> ComplexMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            let w = f(lambda);
            for row in 0..scaled.nrows() {
                scaled[(row, k)] *= w;
            }
        }
        scaled * v.adjoint()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.map(|l| Complex64::new(l, 0.0))
    }
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// Number operator `a†a` on the truncated Fock space of dimension `d`.
pub fn number_operator(d: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(d, d, |i, j| {
        if i == j {
            Complex64::new(i as f64, 0.0)
        } else {
            ZERO
        }
    })
}

pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch in max_abs_diff");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Largest elementwise deviation `|M_ij − conj(M_ji)|`.
pub fn hermiticity_defect(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `‖M†M − I‖_max`.
pub fn unitarity_defect(m: &ComplexMatrix) -> f64 {
    let prod = m.adjoint() * m;
    max_abs_diff(&prod, &ComplexMatrix::identity(m.nrows(), m.ncols()))
}

pub fn trace(m: &ComplexMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

fn ensure_hermitian(m: &ComplexMatrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    let defect = hermiticity_defect(m);
    if defect > HERMITIAN_TOL * max_abs(m).max(1.0) {
        return Err(Error::NotHermitian(defect));
    }
    Ok(())
}

/// Hermitian eigendecomposition with eigenvalues sorted ascending.
pub fn hermitian_eig(m: &ComplexMatrix) -> Result<Spectrum> {
    ensure_hermitian(m)?;
    let n = m.nrows();
    // Symmetrize so the solver sees an exactly Hermitian input.
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = nalgebra::SymmetricEigen::try_new(sym, EIG_EPS, EIG_MAX_ITER)
        .ok_or(Error::NoConvergence(EIG_MAX_ITER))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, n, |i, k| eig.eigenvectors[(i, order[k])]);
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

/// `exp(i · scale · M)` for Hermitian `M`.
pub fn unitary_exp(m: &ComplexMatrix, scale: f64) -> Result<ComplexMatrix> {
    let spectrum = hermitian_eig(m)?;
    Ok(spectrum.map(|l| Complex64::from_polar(1.0, scale * l)))
}

/// Kronecker product, indices of `a` outermost.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

fn check_compound(rho: &ComplexMatrix, d: usize) -> Result<()> {
    if rho.nrows() != 2 * d || rho.ncols() != 2 * d {
        return Err(Error::DimensionMismatch {
            expected: 2 * d,
            found: rho.nrows().max(rho.ncols()),
        });
    }
    Ok(())
}

/// Trace out the coin: `ρ_w[n][m] = Σ_c ρ[(c,n),(c,m)]`.
pub fn partial_trace_coin(rho: &ComplexMatrix, d: usize) -> Result<ComplexMatrix> {
    check_compound(rho, d)?;
    Ok(ComplexMatrix::from_fn(d, d, |n, m| {
        rho[(n, m)] + rho[(d + n, d + m)]
    }))
}

/// Transpose over the coin factor: `(c,n),(c',m) → (c',n),(c,m)`.
pub fn partial_transpose_coin(rho: &ComplexMatrix, d: usize) -> Result<ComplexMatrix> {
    check_compound(rho, d)?;
    let mut out = ComplexMatrix::zeros(2 * d, 2 * d);
    for c in 0..2 {
        for c2 in 0..2 {
            for n in 0..d {
                for m in 0..d {
                    out[(c2 * d + n, c * d + m)] = rho[(c * d + n, c2 * d + m)];
                }
            }
        }
    }
    Ok(out)
}

/// `F[m][n] = e^{i 2π m n / d} / √d`. Column `m` is the phase state `|φ_m⟩`
/// expressed in the number basis.
pub fn dft_matrix(d: usize) -> ComplexMatrix {
    let norm = 1.0 / (d as f64).sqrt();
    ComplexMatrix::from_fn(d, d, |m, n| {
        // Reduce the product mod d before scaling to keep the angle small.
        let k = (m * n) % d;
        Complex64::from_polar(norm, 2.0 * PI * k as f64 / d as f64)
    })
}

/// Largest singular value, from the top eigenvalue of `M†M`.
pub fn spectral_norm(m: &ComplexMatrix) -> Result<f64> {
    let gram = m.adjoint() * m;
    let spectrum = hermitian_eig(&gram)?;
    let top = spectrum.eigenvalues.last().copied().unwrap_or(0.0);
    Ok(top.max(0.0).sqrt())
}
