//! Dense state vectors over the `d^N` mixed-radix basis of a qudit chain.
//!
//! Configuration index = Σ_i level_i · d^(N−1−i), so site 0 is the most
//! significant digit. A single-site gate on site `i` acts on groups of `d`
//! amplitudes separated by the stride `d^(N−1−i)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, CMatrix};
use crate::par::{blocked_sum, blocked_sum_vec};
use crate::partition::LevelPartition;
use crate::{Complex64, Error, Result};

pub const DEFAULT_AMPLITUDE_CAP: usize = 1 << 27;

const STRUCT_TOL: f64 = 1e-12;
const NORM_TOL: f64 = 1e-10;
const PAR_MIN_LEN: usize = 1 << 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawShape")]
pub struct ChainShape {
    n_sites: usize,
    local_dim: usize,
    #[serde(skip)]
    dim: usize,
}

#[derive(Deserialize)]
struct RawShape {
    n_sites: usize,
    local_dim: usize,
}

impl TryFrom<RawShape> for ChainShape {
    type Error = Error;
    fn try_from(raw: RawShape) -> Result<Self> {
        ChainShape::new(raw.n_sites, raw.local_dim)
    }
}

impl ChainShape {
    pub fn new(n_sites: usize, local_dim: usize) -> Result<Self> {
        Self::with_cap(n_sites, local_dim, DEFAULT_AMPLITUDE_CAP)
    }

    pub fn with_cap(n_sites: usize, local_dim: usize, cap: usize) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::InvalidShape("chain needs at least one site".into()));
        }
        if local_dim < 2 {
            return Err(Error::InvalidShape(format!("local dimension {local_dim} < 2")));
        }
        let amplitudes = (local_dim as u128).checked_pow(n_sites as u32).unwrap_or(u128::MAX);
        if amplitudes > cap as u128 {
            return Err(Error::MemoryCap { n_sites, local_dim, amplitudes, cap });
        }
        Ok(Self { n_sites, local_dim, dim: amplitudes as usize })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    /// Hilbert-space dimension `d^N`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stride(&self, site: usize) -> usize {
        self.local_dim.pow((self.n_sites - 1 - site) as u32)
    }

    pub fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.n_sites {
            return Err(Error::SiteOutOfRange { site, n_sites: self.n_sites });
        }
        Ok(())
    }

    pub fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.dim {
            return Err(Error::IndexOutOfRange { index, dim: self.dim });
        }
        Ok(())
    }

    /// Level of `site` in configuration `index`.
    pub fn digit(&self, index: usize, site: usize) -> usize {
        (index / self.stride(site)) % self.local_dim
    }

    /// All levels of configuration `index`, site 0 first.
    pub fn digits(&self, index: usize) -> Vec<usize> {
        let mut out = vec![0; self.n_sites];
        self.digits_into(index, &mut out);
        out
    }

    pub fn digits_into(&self, mut index: usize, out: &mut [usize]) {
        for slot in out.iter_mut().rev() {
            *slot = index % self.local_dim;
            index /= self.local_dim;
        }
    }

    pub fn index_of(&self, digits: &[usize]) -> Result<usize> {
        if digits.len() != self.n_sites {
            return Err(Error::DimensionMismatch { expected: self.n_sites, got: digits.len() });
        }
        let mut idx = 0usize;
        for &l in digits {
            if l >= self.local_dim {
                return Err(Error::IndexOutOfRange { index: l, dim: self.local_dim });
            }
            idx = idx * self.local_dim + l;
        }
        Ok(idx)
    }
}

/// A dense `d×d` on-site operator with cached structural flags.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteOperator {
    matrix: CMatrix,
    hermitian: bool,
    unitary: bool,
}

impl SiteOperator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), got: matrix.ncols() });
        }
        if matrix.nrows() < 2 {
            return Err(Error::InvalidShape("site operator must be at least 2×2".into()));
        }
        let hermitian = linalg::hermitian_residual(&matrix) <= STRUCT_TOL;
        let unitary = linalg::unitary_residual(&matrix) <= STRUCT_TOL;
        Ok(Self { matrix, hermitian, unitary })
    }

    pub fn hermitian(matrix: CMatrix) -> Result<Self> {
        let op = Self::new(matrix)?;
        if !op.hermitian {
            return Err(Error::NotHermitian { residual: linalg::hermitian_residual(&op.matrix) });
        }
        Ok(op)
    }

    pub fn unitary(matrix: CMatrix) -> Result<Self> {
        let op = Self::new(matrix)?;
        if !op.unitary {
            return Err(Error::NotUnitary { residual: linalg::unitary_residual(&op.matrix) });
        }
        Ok(op)
    }

    pub fn local_dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    pub fn is_diagonal(&self) -> bool {
        linalg::is_diagonal(&self.matrix, 0.0)
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.local_dim()).map(|k| self.matrix[(k, k)]).collect()
    }
}

/// Row-major copy of a gate with a diagonal fast path.
#[derive(Clone, Debug)]
pub(crate) struct GateKernel {
    d: usize,
    entries: Vec<Complex64>,
    diagonal: bool,
}

impl GateKernel {
    pub(crate) fn new(m: &CMatrix) -> Self {
        let d = m.nrows();
        let mut entries = Vec::with_capacity(d * d);
        for r in 0..d {
            for c in 0..d {
                entries.push(m[(r, c)]);
            }
        }
        Self { d, entries, diagonal: linalg::is_diagonal(m, 0.0) }
    }

    #[allow(clippy::needless_range_loop)]
    fn apply_rows(&self, rows: &mut [&mut [Complex64]]) {
        let d = self.d;
        if self.diagonal {
            for (k, row) in rows.iter_mut().enumerate() {
                let u = self.entries[k * d + k];
                for a in row.iter_mut() {
                    *a *= u;
                }
            }
            return;
        }
        let len = rows[0].len();
        let mut tmp = [Complex64::new(0.0, 0.0); 16];
        let mut tmp_vec;
        let tmp: &mut [Complex64] = if d <= 16 {
            &mut tmp[..d]
        } else {
            tmp_vec = vec![Complex64::new(0.0, 0.0); d];
            &mut tmp_vec
        };
        for o in 0..len {
            for k in 0..d {
                tmp[k] = rows[k][o];
            }
            for j in 0..d {
                let row = &self.entries[j * d..(j + 1) * d];
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..d {
                    acc += row[k] * tmp[k];
                }
                rows[j][o] = acc;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuditState {
    shape: ChainShape,
    amplitudes: Vec<Complex64>,
}

impl QuditState {
    /// N-fold tensor power of a normalized single-site vector.
    pub fn prepare_product_state(shape: ChainShape, site_state: &[Complex64]) -> Result<Self> {
        let d = shape.local_dim();
        if site_state.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: site_state.len() });
        }
        let norm = site_state.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > STRUCT_TOL {
            return Err(Error::NotNormalized { norm });
        }
        let mut amps = vec![Complex64::new(1.0, 0.0)];
        for _ in 0..shape.n_sites() {
            let mut next = Vec::with_capacity(amps.len() * d);
            for a in &amps {
                for s in site_state {
                    next.push(a * s);
                }
            }
            amps = next;
        }
        Ok(Self { shape, amplitudes: amps })
    }

    /// Product state with a possibly different vector on every site.
    pub fn prepare_site_product(shape: ChainShape, site_states: &[Vec<Complex64>]) -> Result<Self> {
        let d = shape.local_dim();
        if site_states.len() != shape.n_sites() {
            return Err(Error::DimensionMismatch { expected: shape.n_sites(), got: site_states.len() });
        }
        let mut amps = vec![Complex64::new(1.0, 0.0)];
        for s in site_states {
            if s.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: s.len() });
            }
            let norm = s.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > STRUCT_TOL {
                return Err(Error::NotNormalized { norm });
            }
            let mut next = Vec::with_capacity(amps.len() * d);
            for a in &amps {
                for z in s {
                    next.push(a * z);
                }
            }
            amps = next;
        }
        Ok(Self { shape, amplitudes: amps })
    }

    pub fn basis_state(shape: ChainShape, index: usize) -> Result<Self> {
        shape.check_index(index)?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); shape.dim()];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Self { shape, amplitudes })
    }

    pub fn from_amplitudes(shape: ChainShape, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != shape.dim() {
            return Err(Error::DimensionMismatch { expected: shape.dim(), got: amplitudes.len() });
        }
        let s = Self { shape, amplitudes };
        let norm = s.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(s)
    }

    pub fn shape(&self) -> ChainShape {
        self.shape
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        let a = &self.amplitudes;
        blocked_sum(a.len(), 0.0, |r| a[r].iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &QuditState) -> Result<Complex64> {
        if self.shape != other.shape {
            return Err(Error::DimensionMismatch { expected: self.shape.dim(), got: other.shape.dim() });
        }
        let (a, b) = (&self.amplitudes, &other.amplitudes);
        Ok(blocked_sum(a.len(), Complex64::new(0.0, 0.0), |r| {
            a[r.clone()].iter().zip(&b[r]).map(|(x, y)| x.conj() * y).sum()
        }))
    }

    /// Applies `u` on `site`; `u` must be flagged unitary.
    pub fn apply_single_site_unitary(&mut self, site: usize, u: &SiteOperator) -> Result<()> {
        self.shape.check_site(site)?;
        if u.local_dim() != self.shape.local_dim() {
            return Err(Error::DimensionMismatch { expected: self.shape.local_dim(), got: u.local_dim() });
        }
        if !u.is_unitary() {
            return Err(Error::NotUnitary { residual: linalg::unitary_residual(u.matrix()) });
        }
        self.apply_kernel(site, &GateKernel::new(u.matrix()));
        Ok(())
    }

    /// Applies an arbitrary `d×d` matrix on `site` without structural checks.
    pub fn apply_site_matrix(&mut self, site: usize, m: &CMatrix) -> Result<()> {
        self.shape.check_site(site)?;
        if m.nrows() != self.shape.local_dim() || m.ncols() != self.shape.local_dim() {
            return Err(Error::DimensionMismatch { expected: self.shape.local_dim(), got: m.nrows() });
        }
        self.apply_kernel(site, &GateKernel::new(m));
        Ok(())
    }

    pub(crate) fn apply_kernel(&mut self, site: usize, k: &GateKernel) {
        let d = self.shape.local_dim();
        let stride = self.shape.stride(site);
        let chunk = d * stride;
        let n_chunks = self.amplitudes.len() / chunk;
        if n_chunks >= rayon::current_num_threads().max(2) * 4 || stride < PAR_MIN_LEN {
            let run = |c: &mut [Complex64]| {
                let mut rows: Vec<&mut [Complex64]> = c.chunks_mut(stride).collect();
                k.apply_rows(&mut rows);
            };
            if self.amplitudes.len() >= PAR_MIN_LEN {
                self.amplitudes.par_chunks_mut(chunk).for_each(run);
            } else {
                self.amplitudes.chunks_mut(chunk).for_each(run);
            }
        } else {
            // Few large chunks: split every row into aligned column blocks.
            for c in self.amplitudes.chunks_mut(chunk) {
                let mut columns: Vec<Vec<&mut [Complex64]>> = Vec::new();
                for row in c.chunks_mut(stride) {
                    for (b, piece) in row.chunks_mut(PAR_MIN_LEN).enumerate() {
                        if columns.len() <= b {
                            columns.push(Vec::with_capacity(d));
                        }
                        columns[b].push(piece);
                    }
                }
                columns.into_par_iter().for_each(|mut rows| k.apply_rows(&mut rows));
            }
        }
    }

    /// Single-site reduced density matrix `ρ[k][j] = Σ ψ_{..k..} ψ*_{..j..}`.
    pub fn reduced_density(&self, site: usize) -> Result<CMatrix> {
        self.shape.check_site(site)?;
        let d = self.shape.local_dim();
        let stride = self.shape.stride(site);
        let n_base = self.shape.dim() / d;
        let a = &self.amplitudes;
        let flat = blocked_sum_vec(n_base, 2 * d * d, |r, acc| {
            for b in r {
                let base = (b / stride) * stride * d + b % stride;
                for k in 0..d {
                    let ak = a[base + k * stride];
                    if ak.norm_sqr() == 0.0 {
                        continue;
                    }
                    for j in 0..d {
                        let v = ak * a[base + j * stride].conj();
                        acc[2 * (k * d + j)] += v.re;
                        acc[2 * (k * d + j) + 1] += v.im;
                    }
                }
            }
        });
        Ok(CMatrix::from_fn(d, d, |k, j| Complex64::new(flat[2 * (k * d + j)], flat[2 * (k * d + j) + 1])))
    }

    /// `⟨ψ|op_site|ψ⟩` for an arbitrary `d×d` matrix.
    pub fn expectation_site_complex(&self, site: usize, op: &CMatrix) -> Result<Complex64> {
        let d = self.shape.local_dim();
        if op.nrows() != d || op.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: op.nrows() });
        }
        let rho = self.reduced_density(site)?;
        // tr(ρ op) with ρ[k][j] = ψ_k ψ_j^*  →  Σ_{j,k} ψ_j^* op_{jk} ψ_k
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..d {
            for k in 0..d {
                acc += op[(j, k)] * rho[(k, j)];
            }
        }
        Ok(acc)
    }

    /// Real expectation of a Hermitian on-site operator.
    pub fn expectation_site(&self, site: usize, op: &SiteOperator) -> Result<f64> {
        if !op.is_hermitian() {
            return Err(Error::NotHermitian { residual: linalg::hermitian_residual(op.matrix()) });
        }
        Ok(self.expectation_site_complex(site, op.matrix())?.re)
    }

    /// Populations of each level on `site`.
    pub fn site_populations(&self, site: usize) -> Result<Vec<f64>> {
        self.shape.check_site(site)?;
        let d = self.shape.local_dim();
        let stride = self.shape.stride(site);
        let a = &self.amplitudes;
        Ok(blocked_sum_vec(a.len(), d, |r, acc| {
            for i in r {
                acc[(i / stride) % d] += a[i].norm_sqr();
            }
        }))
    }

    /// Level populations averaged over all sites.
    pub fn mean_level_populations(&self) -> Vec<f64> {
        let shape = self.shape;
        let d = shape.local_dim();
        let n = shape.n_sites();
        let a = &self.amplitudes;
        let mut pops = blocked_sum_vec(a.len(), d, |r, acc| {
            let mut digits = vec![0usize; n];
            for i in r {
                let p = a[i].norm_sqr();
                if p == 0.0 {
                    continue;
                }
                shape.digits_into(i, &mut digits);
                for &l in &digits {
                    acc[l] += p;
                }
            }
        });
        for p in &mut pops {
            *p /= n as f64;
        }
        pops
    }

    /// Per-site average population of each block of a complete partition.
    pub fn block_weights(&self, partition: &LevelPartition) -> Result<Vec<f64>> {
        if partition.local_dim() != self.shape.local_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.shape.local_dim(),
                got: partition.local_dim(),
            });
        }
        if !partition.is_complete() {
            return Err(Error::InvalidPartition(format!(
                "block weights need a complete partition; levels {:?} are uncovered",
                partition.inactive()
            )));
        }
        let pops = self.mean_level_populations();
        Ok(partition.blocks().iter().map(|b| b.iter().map(|&l| pops[l]).sum()).collect())
    }

    /// `Σ_c |ψ_c|² v_c` for a per-configuration weight vector.
    pub fn diagonal_expectation(&self, values: &[f64]) -> f64 {
        let a = &self.amplitudes;
        blocked_sum(a.len(), 0.0, |r| {
            a[r.clone()].iter().zip(&values[r]).map(|(z, v)| z.norm_sqr() * v).sum::<f64>()
        })
    }

    pub fn diagonal_expectation_complex(&self, values: &[Complex64]) -> Complex64 {
        let a = &self.amplitudes;
        blocked_sum(a.len(), Complex64::new(0.0, 0.0), |r| {
            a[r.clone()].iter().zip(&values[r]).map(|(z, v)| v * z.norm_sqr()).sum::<Complex64>()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kick::{spin_operator, two_level_rotation, Axis};
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn memory_cap_is_enforced() {
        assert!(ChainShape::new(14, 3).is_ok());
        assert!(ChainShape::new(10, 5).is_ok());
        let err = ChainShape::new(30, 3).unwrap_err();
        assert!(matches!(err, Error::MemoryCap { .. }));
        assert!(ChainShape::with_cap(3, 3, 26).is_err());
        assert!(ChainShape::new(0, 3).is_err());
        assert!(ChainShape::new(3, 1).is_err());
    }

    #[test]
    fn product_state_examples() {
        let s = QuditState::prepare_product_state(ChainShape::new(2, 3).unwrap(), &[c(1.0), c(0.0), c(0.0)])
            .unwrap();
        assert_eq!(s.amplitudes()[0], c(1.0));
        assert!(s.amplitudes()[1..].iter().all(|z| *z == c(0.0)));

        let s = QuditState::prepare_product_state(
            ChainShape::new(1, 4).unwrap(),
            &[c(0.0), c(FRAC_1_SQRT_2), c(0.0), c(FRAC_1_SQRT_2)],
        )
        .unwrap();
        assert_eq!(s.amplitudes(), &[c(0.0), c(FRAC_1_SQRT_2), c(0.0), c(FRAC_1_SQRT_2)]);

        let s = QuditState::prepare_product_state(
            ChainShape::new(2, 3).unwrap(),
            &[c(FRAC_1_SQRT_2), c(0.0), c(FRAC_1_SQRT_2)],
        )
        .unwrap();
        for (i, z) in s.amplitudes().iter().enumerate() {
            let expect = if [0, 2, 6, 8].contains(&i) { 0.5 } else { 0.0 };
            assert!((z.re - expect).abs() < 1e-15 && z.im == 0.0);
        }
    }

    #[test]
    fn product_state_rejects_bad_input() {
        let shape = ChainShape::new(2, 3).unwrap();
        assert!(matches!(
            QuditState::prepare_product_state(shape, &[c(1.0), c(1.0), c(0.0)]),
            Err(Error::NotNormalized { .. })
        ));
        assert!(matches!(
            QuditState::prepare_product_state(shape, &[c(1.0), c(0.0)]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn pi_rotation_on_outer_pair() {
        let shape = ChainShape::new(1, 3).unwrap();
        let mut s = QuditState::basis_state(shape, 0).unwrap();
        let r = two_level_rotation(3, 0, 2, std::f64::consts::PI).unwrap();
        s.apply_single_site_unitary(0, &r).unwrap();
        let a = s.amplitudes();
        assert!(a[0].norm() < 1e-15 && a[1].norm() < 1e-15);
        assert!((a[2] - Complex64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn diagonal_phase_on_second_digit() {
        let shape = ChainShape::new(2, 3).unwrap();
        let theta = 0.7;
        let sz = [-1.0, 0.0, 1.0];
        let u = SiteOperator::unitary(linalg::diag(
            &sz.iter().map(|m| Complex64::from_polar(1.0, theta * m)).collect::<Vec<_>>(),
        ))
        .unwrap();
        let mut s = QuditState::basis_state(shape, 0).unwrap();
        s.apply_single_site_unitary(1, &u).unwrap();
        assert!((s.amplitudes()[0] - Complex64::from_polar(1.0, -theta)).norm() < 1e-15);
    }

    #[test]
    fn identity_gate_is_bitwise_noop() {
        let shape = ChainShape::new(4, 3).unwrap();
        let site = [Complex64::new(0.6, 0.1), Complex64::new(0.0, -0.3), Complex64::new(0.5, 0.0)];
        let n = site.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let site: Vec<_> = site.iter().map(|z| z / n).collect();
        let s0 = QuditState::prepare_product_state(shape, &site).unwrap();
        let mut s = s0.clone();
        s.apply_single_site_unitary(2, &SiteOperator::unitary(linalg::identity(3)).unwrap()).unwrap();
        assert_eq!(s, s0);
    }

    #[test]
    fn rejects_bad_site_and_nonunitary() {
        let shape = ChainShape::new(2, 3).unwrap();
        let mut s = QuditState::basis_state(shape, 0).unwrap();
        let u = SiteOperator::unitary(linalg::identity(3)).unwrap();
        assert!(matches!(s.apply_single_site_unitary(2, &u), Err(Error::SiteOutOfRange { .. })));
        let m = SiteOperator::new(linalg::diag_real(&[1.0, 2.0, 1.0])).unwrap();
        assert!(matches!(s.apply_single_site_unitary(0, &m), Err(Error::NotUnitary { .. })));
    }

    #[test]
    fn sz_expectations() {
        let sz3 = spin_operator(3, Axis::Z).unwrap();
        let s = QuditState::basis_state(ChainShape::new(3, 3).unwrap(), 0).unwrap();
        for site in 0..3 {
            assert!((s.expectation_site(site, &sz3).unwrap() + 1.0).abs() < 1e-15);
        }
        let sz4 = spin_operator(4, Axis::Z).unwrap();
        let shape = ChainShape::new(3, 4).unwrap();
        let s = QuditState::basis_state(shape, shape.dim() - 1).unwrap();
        assert!((s.expectation_site(1, &sz4).unwrap() - 1.5).abs() < 1e-15);

        let s = QuditState::prepare_product_state(
            ChainShape::new(3, 3).unwrap(),
            &[c(FRAC_1_SQRT_2), c(0.0), c(FRAC_1_SQRT_2)],
        )
        .unwrap();
        assert!(s.expectation_site(0, &sz3).unwrap().abs() < 1e-15);
    }

    #[test]
    fn block_weights_examples() {
        let shape = ChainShape::new(3, 5).unwrap();
        let p = LevelPartition::complete(5, vec![vec![0, 2, 4], vec![1, 3]]).unwrap();
        let s0 = QuditState::basis_state(shape, 0).unwrap();
        assert_eq!(s0.block_weights(&p).unwrap(), vec![1.0, 0.0]);
        let s1 = QuditState::basis_state(shape, shape.index_of(&[1, 1, 1]).unwrap()).unwrap();
        assert_eq!(s1.block_weights(&p).unwrap(), vec![0.0, 1.0]);
        let mixed = QuditState::prepare_product_state(
            shape,
            &[c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2), c(0.0), c(0.0), c(0.0)],
        )
        .unwrap();
        let w = mixed.block_weights(&p).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-12 && (w[1] - 0.5).abs() < 1e-12);

        let incomplete = LevelPartition::new(5, vec![vec![0, 2, 4]]).unwrap();
        assert!(s0.block_weights(&incomplete).is_err());
    }

    #[test]
    fn digits_round_trip_exhaustive() {
        for (n, d) in [(8, 3), (6, 4), (5, 5), (13, 2)] {
            let shape = ChainShape::new(n, d).unwrap();
            for idx in 0..shape.dim() {
                let digits = shape.digits(idx);
                assert_eq!(shape.index_of(&digits).unwrap(), idx);
                for (site, &l) in digits.iter().enumerate() {
                    assert_eq!(shape.digit(idx, site), l);
                }
            }
        }
    }

    #[test]
    fn shape_serde_validates() {
        let s: ChainShape = serde_json::from_str(r#"{"n_sites":4,"local_dim":3}"#).unwrap();
        assert_eq!(s.dim(), 81);
        assert!(serde_json::from_str::<ChainShape>(r#"{"n_sites":40,"local_dim":5}"#).is_err());
    }

    #[test]
    fn large_stride_path_matches_small_path() {
        // Site 0 of a 3^10 chain takes the column-split branch.
        let shape = ChainShape::new(10, 3).unwrap();
        let site = [Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.64), Complex64::new(0.48, 0.0)];
        let mut s = QuditState::prepare_product_state(shape, &site).unwrap();
        let u = crate::kick::two_level_rotation(3, 0, 1, 1.1).unwrap();
        s.apply_single_site_unitary(0, &u).unwrap();
        let rho = s.reduced_density(0).unwrap();
        let v = u.matrix() * nalgebra::DVector::from_row_slice(&site);
        for k in 0..3 {
            for j in 0..3 {
                assert!((rho[(k, j)] - v[k] * v[j].conj()).norm() < 1e-12);
            }
        }
        let pops = s.site_populations(5).unwrap();
        for (k, p) in pops.iter().enumerate() {
            assert!((p - site[k].norm_sqr()).abs() < 1e-12);
        }
    }
}
