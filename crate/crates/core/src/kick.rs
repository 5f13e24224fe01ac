//! On-site kicks and the canonical operator library.
//!
//! A kick is an ordered list of unitary factors applied left to right. Global
//! kicks are a single rotation `exp[-i(2π/m)(1+ε)S^x]` of the whole multiplet.
//! Embedded kicks chain two-level `π(1+ε)` rotations inside each active block,
//! by default on adjacent pairs `(b0,b1), (b1,b2), …` of the block as listed.
//!
//! # Carriers
//!
//! The ideal (`ε = 0`) kick `K` of a compiled circuit generally satisfies
//! `K^m = I` only up to phases that are constant on each `K`-invariant set of
//! levels, e.g. `(−iX)² = −I` on a doublet. [`Carrier`] verifies that
//! structure and keeps a rephased copy `K̃ = K·diag(c_b^{−1/m})` with
//! `K̃^m = I` exactly. `K̃` and `K` induce the same conjugation on every
//! operator that is block diagonal with respect to those level sets; for
//! operators coupling different sets, `K̃` defines the `ℤ_m` grading.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::linalg::{self, CMatrix, ONE, ZERO};
use crate::partition::LevelPartition;
use crate::state::SiteOperator;
use crate::{Complex64, Error, Result};

/// Eigenphases of `K_ideal†K(ε)` closer than this to ±π are rejected.
pub const BRANCH_GUARD: f64 = 1e-6;

const CARRIER_TOL: f64 = 1e-10;

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    #[default]
    X,
    Y,
    Z,
}

/// Spin-`(d−1)/2` generator along `axis`.
pub fn spin_operator(d: usize, axis: Axis) -> Result<SiteOperator> {
    if d < 2 {
        return Err(Error::InvalidShape(format!("local dimension {d} < 2")));
    }
    let s = (d as f64 - 1.0) / 2.0;
    let m = |l: usize| l as f64 - s;
    // ⟨l+1|S^+|l⟩ = √(s(s+1) − m(m+1))
    let raise = |l: usize| (s * (s + 1.0) - m(l) * (m(l) + 1.0)).sqrt();
    let mat = match axis {
        Axis::Z => linalg::diag_real(&(0..d).map(m).collect::<Vec<_>>()),
        Axis::X => CMatrix::from_fn(d, d, |r, c| {
            if r == c + 1 {
                Complex64::new(raise(c) / 2.0, 0.0)
            } else if c == r + 1 {
                Complex64::new(raise(r) / 2.0, 0.0)
            } else {
                ZERO
            }
        }),
        // S^y = (S^+ − S^−)/2i
        Axis::Y => CMatrix::from_fn(d, d, |r, c| {
            if r == c + 1 {
                Complex64::new(0.0, -raise(c) / 2.0)
            } else if c == r + 1 {
                Complex64::new(0.0, raise(r) / 2.0)
            } else {
                ZERO
            }
        }),
    };
    SiteOperator::hermitian(mat)
}

/// `Z_d = diag(1, ω, ω², …)`, `ω = e^{2πi/d}`.
pub fn qudit_z_gate(d: usize) -> Result<SiteOperator> {
    if d < 2 {
        return Err(Error::InvalidShape(format!("local dimension {d} < 2")));
    }
    let w: Vec<Complex64> = (0..d).map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / d as f64)).collect();
    SiteOperator::unitary(linalg::diag(&w))
}

fn check_pair(d: usize, j: usize, k: usize) -> Result<()> {
    if j == k || j >= d || k >= d {
        return Err(Error::InvalidKick(format!("invalid level pair ({j}, {k}) for d = {d}")));
    }
    Ok(())
}

/// `X_{jk} = |j⟩⟨k| + |k⟩⟨j|`.
pub fn pair_x(d: usize, j: usize, k: usize) -> Result<CMatrix> {
    check_pair(d, j, k)?;
    let mut m = CMatrix::zeros(d, d);
    m[(j, k)] = ONE;
    m[(k, j)] = ONE;
    Ok(m)
}

/// `exp(−i(θ/2)X_{jk})` in closed form.
pub fn two_level_rotation(d: usize, j: usize, k: usize, theta: f64) -> Result<SiteOperator> {
    check_pair(d, j, k)?;
    let (s, c) = (theta / 2.0).sin_cos();
    let mut m = linalg::identity(d);
    m[(j, j)] = Complex64::new(c, 0.0);
    m[(k, k)] = Complex64::new(c, 0.0);
    m[(j, k)] = Complex64::new(0.0, -s);
    m[(k, j)] = Complex64::new(0.0, -s);
    SiteOperator::unitary(m)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KickKind {
    /// No kick; useful for isolating the static layer.
    Identity,
    Global {
        cycle: usize,
        #[serde(default)]
        axis: Axis,
    },
    Embedded {
        blocks: Vec<Vec<usize>>,
        cycles: Vec<usize>,
        /// Per-block rotation pairs in application order.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pairs: Option<Vec<Vec<(usize, usize)>>>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KickSpec {
    #[serde(flatten)]
    pub kind: KickKind,
    #[serde(default)]
    pub epsilon: f64,
    pub local_dim: usize,
}

impl KickSpec {
    pub fn identity(local_dim: usize) -> Self {
        Self { kind: KickKind::Identity, epsilon: 0.0, local_dim }
    }

    pub fn global(local_dim: usize, cycle: usize, epsilon: f64) -> Self {
        Self { kind: KickKind::Global { cycle, axis: Axis::X }, epsilon, local_dim }
    }

    pub fn embedded(local_dim: usize, blocks: Vec<Vec<usize>>, cycles: Vec<usize>, epsilon: f64) -> Self {
        Self { kind: KickKind::Embedded { blocks, cycles, pairs: None }, epsilon, local_dim }
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self { epsilon, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.local_dim;
        if d < 2 {
            return Err(Error::InvalidKick(format!("local dimension {d} < 2")));
        }
        if !self.epsilon.is_finite() {
            return Err(Error::InvalidKick("epsilon is not finite".into()));
        }
        match &self.kind {
            KickKind::Identity => Ok(()),
            KickKind::Global { cycle, axis } => {
                if *cycle < 2 {
                    return Err(Error::InvalidKick(format!("cycle order {cycle} < 2")));
                }
                if *axis == Axis::Z {
                    return Err(Error::InvalidKick("global kick generator must be S^x or S^y".into()));
                }
                Ok(())
            }
            KickKind::Embedded { blocks, cycles, pairs } => {
                if blocks.is_empty() {
                    return Err(Error::InvalidKick("embedded kick needs at least one block".into()));
                }
                LevelPartition::new(d, blocks.clone()).map_err(|e| Error::InvalidKick(e.to_string()))?;
                if cycles.len() != blocks.len() {
                    return Err(Error::InvalidKick(format!(
                        "{} cycle orders for {} blocks",
                        cycles.len(),
                        blocks.len()
                    )));
                }
                for (b, (block, &m)) in blocks.iter().zip(cycles).enumerate() {
                    if m < 2 {
                        return Err(Error::InvalidKick(format!("block {b}: cycle order {m} < 2")));
                    }
                    if block.len() < m {
                        return Err(Error::InvalidKick(format!(
                            "block {b} has {} levels, too small for a {m}-cycle",
                            block.len()
                        )));
                    }
                    if block.len() > m {
                        return Err(Error::InvalidKick(format!(
                            "block {b} has {} levels but cycle order {m}; list only the cycled levels",
                            block.len()
                        )));
                    }
                }
                if let Some(pairs) = pairs {
                    if pairs.len() != blocks.len() {
                        return Err(Error::InvalidKick("one pair list per block is required".into()));
                    }
                    for (b, (block, list)) in blocks.iter().zip(pairs).enumerate() {
                        if list.is_empty() {
                            return Err(Error::InvalidKick(format!("block {b}: empty pair list")));
                        }
                        for &(j, k) in list {
                            check_pair(d, j, k)?;
                            if !block.contains(&j) || !block.contains(&k) {
                                return Err(Error::InvalidKick(format!(
                                    "block {b}: pair ({j}, {k}) leaves the block"
                                )));
                            }
                        }
                    }
                }
                Ok(())
            }
        }
    }

    /// Cycle order `m` of the carrier; lcm of the block orders for mixed kicks.
    pub fn cycle_order(&self) -> usize {
        match &self.kind {
            KickKind::Identity => 1,
            KickKind::Global { cycle, .. } => *cycle,
            KickKind::Embedded { cycles, .. } => cycles.iter().fold(1, |a, &m| lcm(a, m)),
        }
    }

    /// Active-block partition of an embedded kick.
    pub fn partition(&self) -> Option<LevelPartition> {
        match &self.kind {
            KickKind::Embedded { blocks, .. } => LevelPartition::new(self.local_dim, blocks.clone()).ok(),
            _ => None,
        }
    }

    /// Per-block cycle orders of an embedded kick.
    pub fn block_cycles(&self) -> Option<&[usize]> {
        match &self.kind {
            KickKind::Embedded { cycles, .. } => Some(cycles),
            _ => None,
        }
    }

    /// Rotation pairs per block in application order.
    pub fn rotation_pairs(&self) -> Option<Vec<Vec<(usize, usize)>>> {
        match &self.kind {
            KickKind::Embedded { blocks, pairs, .. } => Some(match pairs {
                Some(p) => p.clone(),
                None => blocks.iter().map(|b| b.windows(2).map(|w| (w[0], w[1])).collect()).collect(),
            }),
            _ => None,
        }
    }

    fn factors_at(&self, epsilon: f64) -> Result<Vec<SiteOperator>> {
        let d = self.local_dim;
        match &self.kind {
            KickKind::Identity => Ok(vec![SiteOperator::unitary(linalg::identity(d))?]),
            KickKind::Global { cycle, axis } => {
                let g = spin_operator(d, *axis)?;
                let theta = 2.0 * PI / *cycle as f64 * (1.0 + epsilon);
                Ok(vec![SiteOperator::unitary(linalg::expm_hermitian(g.matrix(), theta)?)?])
            }
            KickKind::Embedded { .. } => {
                let theta = PI * (1.0 + epsilon);
                let mut out = Vec::new();
                for list in self.rotation_pairs().unwrap_or_default() {
                    for (j, k) in list {
                        out.push(two_level_rotation(d, j, k, theta)?);
                    }
                }
                Ok(out)
            }
        }
    }
}

/// Product of factors applied left to right: `F_n ⋯ F_1`.
fn fuse(factors: &[SiteOperator], d: usize) -> CMatrix {
    factors.iter().fold(linalg::identity(d), |acc, f| f.matrix() * acc)
}

/// An ideal kick together with its verified projective cycle structure.
#[derive(Clone, Debug)]
pub struct Carrier {
    matrix: CMatrix,
    rephased: CMatrix,
    order: usize,
}

impl Carrier {
    /// Checks that `K^m` is diagonal with unit-modulus phases constant on each
    /// `K`-invariant level set.
    pub fn new(k: CMatrix, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::ConjugationOrder { order });
        }
        let res = linalg::unitary_residual(&k);
        if res > 1e-12 {
            return Err(Error::NotUnitary { residual: res });
        }
        let n = k.nrows();
        let km = linalg::matrix_power(&k, order);
        if !linalg::is_diagonal(&km, CARRIER_TOL) {
            return Err(Error::ConjugationOrder { order });
        }
        // connected components of the support graph of K
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            p[x] = r;
            r
        }
        for r in 0..n {
            for c in 0..n {
                if k[(r, c)].norm() > 1e-12 {
                    let (a, b) = (find(&mut parent, r), find(&mut parent, c));
                    parent[a] = b;
                }
            }
        }
        let mut correction = vec![ONE; n];
        for l in 0..n {
            let root = find(&mut parent, l);
            let c = km[(l, l)];
            if (c.norm() - 1.0).abs() > CARRIER_TOL || (c - km[(root, root)]).norm() > CARRIER_TOL {
                return Err(Error::ConjugationOrder { order });
            }
            let c_root = km[(root, root)];
            correction[l] = Complex64::from_polar(1.0, -c_root.arg() / order as f64);
        }
        let rephased = &k * linalg::diag(&correction);
        Ok(Self { matrix: k, rephased, order })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// The ideal kick as compiled.
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// `K̃` with `K̃^m = I`.
    pub fn rephased(&self) -> &CMatrix {
        &self.rephased
    }

    /// `K̃ X K̃†`.
    pub fn conjugate(&self, x: &CMatrix) -> CMatrix {
        &self.rephased * x * self.rephased.adjoint()
    }

    /// `K X K†` with the compiled kick itself.
    pub fn conjugate_raw(&self, x: &CMatrix) -> CMatrix {
        &self.matrix * x * self.matrix.adjoint()
    }

    /// Carrier of a two-site bond, `K ⊗ K`.
    pub fn bond(&self) -> Carrier {
        Carrier {
            matrix: linalg::kron(&self.matrix, &self.matrix),
            rephased: linalg::kron(&self.rephased, &self.rephased),
            order: self.order,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CompiledKick {
    spec: KickSpec,
    factors: Vec<SiteOperator>,
    unitary: SiteOperator,
    carrier: Carrier,
}

impl CompiledKick {
    pub fn spec(&self) -> &KickSpec {
        &self.spec
    }

    /// Factors in application order.
    pub fn factors(&self) -> &[SiteOperator] {
        &self.factors
    }

    /// Full per-site unitary `K(ε)`.
    pub fn unitary(&self) -> &SiteOperator {
        &self.unitary
    }

    pub fn carrier(&self) -> &Carrier {
        &self.carrier
    }

    pub fn cycle_order(&self) -> usize {
        self.carrier.order
    }
}

pub fn compile_kick(spec: &KickSpec) -> Result<CompiledKick> {
    spec.validate()?;
    let d = spec.local_dim;
    let factors = spec.factors_at(spec.epsilon)?;
    let unitary = SiteOperator::unitary(fuse(&factors, d))?;
    let ideal = fuse(&spec.factors_at(0.0)?, d);
    let carrier = Carrier::new(ideal, spec.cycle_order())?;
    Ok(CompiledKick { spec: spec.clone(), factors, unitary, carrier })
}

/// `G(ε) = (i/ε)·log(K_ideal†K(ε))` on one site.
pub fn effective_error_generator(spec: &KickSpec) -> Result<SiteOperator> {
    if spec.epsilon == 0.0 {
        return Err(Error::InvalidKick("error generator needs epsilon ≠ 0".into()));
    }
    let kick = compile_kick(spec)?;
    let w = kick.carrier.matrix.adjoint() * kick.unitary.matrix();
    // w = exp(iA)  ⇒  log w = iA  ⇒  G = (i/ε)(iA) = −A/ε
    let a = linalg::unitary_log_hermitian(&w, BRANCH_GUARD)?;
    SiteOperator::hermitian(a.scale(-1.0 / spec.epsilon))
}

/// Two-level generator `(π/2)X_{jk}` of a single embedded π rotation.
pub fn pair_generator(d: usize, j: usize, k: usize) -> Result<CMatrix> {
    Ok(pair_x(d, j, k)?.scale(PI / 2.0))
}

/// Applies `K` to a basis vector `|l⟩`; returns the image column.
pub fn image_of_level(k: &CMatrix, l: usize) -> Vec<Complex64> {
    k.column(l).iter().copied().collect()
}
