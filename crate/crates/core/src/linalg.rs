//! Small dense complex matrices (d×d and d²×d²) used for on-site and bond
//! operators.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn diag_real(values: &[f64]) -> CMatrix {
    let n = values.len();
    CMatrix::from_fn(n, n, |r, c| {
        if r == c {
            Complex64::new(values[r], 0.0)
        } else {
            ZERO
        }
    })
}

pub fn diag(values: &[Complex64]) -> CMatrix {
    let n = values.len();
    CMatrix::from_fn(n, n, |r, c| if r == c { values[r] } else { ZERO })
}

/// Kronecker product `a ⊗ b` with `a` on the more significant index.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Largest absolute entry.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn hermitian_residual(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn unitary_residual(m: &CMatrix) -> f64 {
    max_abs(&(m.adjoint() * m - identity(m.nrows())))
}

pub fn is_diagonal(m: &CMatrix, tol: f64) -> bool {
    m.iter()
        .enumerate()
        .all(|(i, z)| i % m.nrows() == i / m.nrows() || z.norm() <= tol)
}

/// `exp(-i·t·H)` for Hermitian `H` via its eigendecomposition.
pub fn expm_hermitian(h: &CMatrix, t: f64) -> Result<CMatrix> {
    let res = hermitian_residual(h);
    if res > 1e-10 {
        return Err(Error::NotHermitian { residual: res });
    }
    let sym = (h + h.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let q = &eig.eigenvectors;
    let phases: Vec<Complex64> = eig
        .eigenvalues
        .iter()
        .map(|&e| Complex64::from_polar(1.0, -t * e))
        .collect();
    Ok(q * diag(&phases) * q.adjoint())
}

/// Spectral decomposition of a unitary: `w = Q diag(e^{iφ}) Q†`, with
/// principal phases `φ ∈ (-π, π]`.
///
/// The eigenbasis is taken from a Hermitian pencil `Re W + t·Im W` at an
/// irrational mixing weight, retrying with other weights if two distinct
/// eigenvalues collide in the pencil. A Schur decomposition is the fallback.
pub fn unitary_eigen(w: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let res = unitary_residual(w);
    if res > 1e-10 {
        return Err(Error::NotUnitary { residual: res });
    }
    let re = (w + w.adjoint()).scale(0.5);
    let im = (w - w.adjoint()) * Complex64::new(0.0, -0.5);
    for &t in &[0.618_033_988_749_895, std::f64::consts::SQRT_2, 0.271_828_182_845_904_5] {
        let pencil = &re + im.scale(t);
        let q = pencil.symmetric_eigen().eigenvectors;
        let d = q.adjoint() * w * &q;
        let mut off = 0.0f64;
        for r in 0..d.nrows() {
            for c in 0..d.ncols() {
                if r != c {
                    off = off.max(d[(r, c)].norm());
                }
            }
        }
        if off <= 1e-10 {
            let phases = (0..d.nrows()).map(|k| d[(k, k)].arg()).collect();
            return Ok((phases, q));
        }
    }
    let schur = nalgebra::Schur::try_new(w.clone(), 1e-15, 10_000)
        .ok_or_else(|| Error::LinAlg("Schur decomposition did not converge".into()))?;
    let (q, t) = schur.unpack();
    let phases = (0..t.nrows()).map(|k| t[(k, k)].arg()).collect();
    Ok((phases, q))
}

/// Principal matrix logarithm of a unitary, returned as the Hermitian `A`
/// with `w = exp(iA)`. Rejects eigenphases within `guard` of ±π.
pub fn unitary_log_hermitian(w: &CMatrix, guard: f64) -> Result<CMatrix> {
    let (phases, q) = unitary_eigen(w)?;
    if let Some(&p) = phases.iter().find(|p| p.abs() >= std::f64::consts::PI - guard) {
        return Err(Error::BranchCut { phase: p });
    }
    let a = q.clone() * diag_real(&phases) * q.adjoint();
    Ok((&a + a.adjoint()).scale(0.5))
}

/// Integer matrix power by repeated squaring.
pub fn matrix_power(m: &CMatrix, mut k: usize) -> CMatrix {
    let mut base = m.clone();
    let mut acc = identity(m.nrows());
    while k > 0 {
        if k & 1 == 1 {
            acc = &acc * &base;
        }
        base = &base * &base;
        k >>= 1;
    }
    acc
}

/// Dense matrix from a real-valued row-major table; convenient in tests and
/// presets.
pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<CMatrix> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidArgument("matrix rows must form a square".into()));
    }
    Ok(CMatrix::from_fn(n, n, |r, c| rows[r][c]))
}
