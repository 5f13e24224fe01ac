//! Disordered static layer `H_z = Σ_i J_i m_z(i) m_z(i+1) + Σ_i h_i m_z(i)`
//! (open boundaries) and its per-configuration phases `e^{-iE(c)}`.
//!
//! Realizations are drawn with `ChaCha8Rng::seed_from_u64(seed)`: first
//! `h_0 … h_{N−1}`, then `J_0 … J_{N−2}`, each as `lo + (hi − lo)·u` with
//! `u ∈ [0, 1)`. Ensemble member `r` uses
//! `seed_r = splitmix64(splitmix64(base) ^ r·0x9E3779B97F4A7C15)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::state::{ChainShape, QuditState};
use crate::{Complex64, Error, Result};

/// Dimensions up to this size keep a precomputed phase vector.
pub const PHASE_CACHE_LIMIT: usize = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct StaticLayerParams {
    pub field_halfwidth: f64,
    pub coupling_center: f64,
    pub coupling_halfwidth: f64,
}

#[derive(Deserialize)]
struct RawParams {
    field_halfwidth: f64,
    coupling_center: f64,
    coupling_halfwidth: f64,
}

impl TryFrom<RawParams> for StaticLayerParams {
    type Error = Error;
    fn try_from(r: RawParams) -> Result<Self> {
        StaticLayerParams::new(r.field_halfwidth, r.coupling_center, r.coupling_halfwidth)
    }
}

impl StaticLayerParams {
    pub fn new(field_halfwidth: f64, coupling_center: f64, coupling_halfwidth: f64) -> Result<Self> {
        for (name, v) in [
            ("field_halfwidth", field_halfwidth),
            ("coupling_center", coupling_center),
            ("coupling_halfwidth", coupling_halfwidth),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} is not finite")));
            }
        }
        if field_halfwidth < 0.0 {
            return Err(Error::InvalidParams(format!("field_halfwidth {field_halfwidth} < 0")));
        }
        if coupling_halfwidth < 0.0 {
            return Err(Error::InvalidParams(format!("coupling_halfwidth {coupling_halfwidth} < 0")));
        }
        Ok(Self { field_halfwidth, coupling_center, coupling_halfwidth })
    }

    /// Shipped default: `W_h = π`, `J^z = π/2`, `W_J = π/4`.
    pub fn preset_default() -> Self {
        Self { field_halfwidth: PI, coupling_center: PI / 2.0, coupling_halfwidth: PI / 4.0 }
    }

    pub fn zero() -> Self {
        Self { field_halfwidth: 0.0, coupling_center: 0.0, coupling_halfwidth: 0.0 }
    }
}

impl Default for StaticLayerParams {
    fn default() -> Self {
        Self::preset_default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderRealization {
    pub seed: u64,
    pub params: StaticLayerParams,
    pub h: Vec<f64>,
    #[serde(rename = "J")]
    pub couplings: Vec<f64>,
}

impl DisorderRealization {
    /// Explicit values; `params` is set to the tightest box containing them.
    pub fn from_values(h: Vec<f64>, couplings: Vec<f64>) -> Result<Self> {
        if couplings.len() + 1 != h.len() {
            return Err(Error::DimensionMismatch { expected: h.len().saturating_sub(1), got: couplings.len() });
        }
        let wh = h.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let (lo, hi) = couplings
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        let (jc, wj) = if couplings.is_empty() { (0.0, 0.0) } else { ((lo + hi) / 2.0, (hi - lo) / 2.0) };
        let params = StaticLayerParams::new(wh, jc, wj)?;
        Ok(Self { seed: 0, params, h, couplings })
    }

    pub fn n_sites(&self) -> usize {
        self.h.len()
    }

    fn check(&self, shape: &ChainShape) -> Result<()> {
        if self.h.len() != shape.n_sites() {
            return Err(Error::DimensionMismatch { expected: shape.n_sites(), got: self.h.len() });
        }
        if self.couplings.len() + 1 != shape.n_sites() {
            return Err(Error::DimensionMismatch { expected: shape.n_sites() - 1, got: self.couplings.len() });
        }
        Ok(())
    }
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of ensemble member `index` under `base_seed`.
pub fn ensemble_seed(base_seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base_seed) ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

pub fn sample_disorder(params: StaticLayerParams, shape: ChainShape, seed: u64) -> Result<DisorderRealization> {
    let params = StaticLayerParams::new(params.field_halfwidth, params.coupling_center, params.coupling_halfwidth)?;
    let n = shape.n_sites();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wh = params.field_halfwidth;
    let (jc, wj) = (params.coupling_center, params.coupling_halfwidth);
    let h = (0..n).map(|_| -wh + 2.0 * wh * rng.random::<f64>()).collect();
    let couplings = (0..n - 1).map(|_| (jc - wj) + 2.0 * wj * rng.random::<f64>()).collect();
    Ok(DisorderRealization { seed, params, h, couplings })
}

/// Diagonal Hamiltonian `Σ_i f_i v(c_i) + Σ_(a,b) J_ab v(c_a) v(c_b)` over a
/// per-level value table `v`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalHamiltonian {
    shape: ChainShape,
    level_values: Vec<f64>,
    fields: Vec<f64>,
    couplings: Vec<(usize, usize, f64)>,
}

impl DiagonalHamiltonian {
    pub fn new(
        shape: ChainShape,
        level_values: Vec<f64>,
        fields: Vec<f64>,
        couplings: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        if level_values.len() != shape.local_dim() {
            return Err(Error::DimensionMismatch { expected: shape.local_dim(), got: level_values.len() });
        }
        if fields.len() != shape.n_sites() {
            return Err(Error::DimensionMismatch { expected: shape.n_sites(), got: fields.len() });
        }
        for &(a, b, _) in &couplings {
            shape.check_site(a)?;
            shape.check_site(b)?;
            if a == b {
                return Err(Error::InvalidParams(format!("coupling of site {a} to itself")));
            }
        }
        Ok(Self { shape, level_values, fields, couplings })
    }

    /// The qudit static layer with `m_z = level − (d−1)/2`.
    pub fn from_realization(shape: ChainShape, r: &DisorderRealization) -> Result<Self> {
        r.check(&shape)?;
        let d = shape.local_dim();
        let mz = (0..d).map(|l| l as f64 - (d as f64 - 1.0) / 2.0).collect();
        let couplings = r.couplings.iter().enumerate().map(|(i, &j)| (i, i + 1, j)).collect();
        Self::new(shape, mz, r.h.clone(), couplings)
    }

    pub fn shape(&self) -> ChainShape {
        self.shape
    }

    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    pub fn couplings(&self) -> &[(usize, usize, f64)] {
        &self.couplings
    }

    pub fn level_values(&self) -> &[f64] {
        &self.level_values
    }

    fn energy_digits(&self, digits: &[usize]) -> f64 {
        let v = &self.level_values;
        let mut e = 0.0;
        for (i, &l) in digits.iter().enumerate() {
            e += self.fields[i] * v[l];
        }
        for &(a, b, j) in &self.couplings {
            e += j * v[digits[a]] * v[digits[b]];
        }
        e
    }

    pub fn energy(&self, index: usize) -> Result<f64> {
        self.shape.check_index(index)?;
        Ok(self.energy_digits(&self.shape.digits(index)))
    }

    /// Sum of two Hamiltonians on the same shape and value table.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.shape != other.shape || self.level_values != other.level_values {
            return Err(Error::InvalidParams("Hamiltonians live on different chains".into()));
        }
        let fields = self.fields.iter().zip(&other.fields).map(|(a, b)| a + b).collect();
        let mut couplings = self.couplings.clone();
        couplings.extend_from_slice(&other.couplings);
        Self::new(self.shape, self.level_values.clone(), fields, couplings)
    }
}

/// `H_z` eigenvalue of a basis configuration.
pub fn hz_energy(index: usize, realization: &DisorderRealization, shape: ChainShape) -> Result<f64> {
    DiagonalHamiltonian::from_realization(shape, realization)?.energy(index)
}

/// The phases `e^{-iE(c)}`, precomputed below [`PHASE_CACHE_LIMIT`].
#[derive(Clone, Debug)]
pub enum PhaseLayer {
    Cached { ham: DiagonalHamiltonian, phases: Vec<Complex64> },
    OnTheFly { ham: DiagonalHamiltonian },
}

const PHASE_BLOCK: usize = 1 << 12;

impl PhaseLayer {
    pub fn new(ham: DiagonalHamiltonian) -> Self {
        if ham.shape.dim() <= PHASE_CACHE_LIMIT {
            Self::cached(ham)
        } else {
            Self::OnTheFly { ham }
        }
    }

    pub fn cached(ham: DiagonalHamiltonian) -> Self {
        let dim = ham.shape.dim();
        let mut phases = vec![Complex64::new(0.0, 0.0); dim];
        phases.par_chunks_mut(PHASE_BLOCK).enumerate().for_each(|(b, chunk)| {
            let mut digits = vec![0; ham.shape.n_sites()];
            for (o, p) in chunk.iter_mut().enumerate() {
                *p = phase_of(&ham, b * PHASE_BLOCK + o, &mut digits);
            }
        });
        Self::Cached { ham, phases }
    }

    pub fn on_the_fly(ham: DiagonalHamiltonian) -> Self {
        Self::OnTheFly { ham }
    }

    pub fn hamiltonian(&self) -> &DiagonalHamiltonian {
        match self {
            Self::Cached { ham, .. } | Self::OnTheFly { ham } => ham,
        }
    }

    pub fn apply(&self, state: &mut QuditState) -> Result<()> {
        let ham = self.hamiltonian();
        if state.shape() != ham.shape {
            return Err(Error::DimensionMismatch { expected: ham.shape.dim(), got: state.shape().dim() });
        }
        let amps = state.amplitudes_mut();
        match self {
            Self::Cached { phases, .. } => {
                amps.par_chunks_mut(PHASE_BLOCK).zip(phases.par_chunks(PHASE_BLOCK)).for_each(|(a, p)| {
                    for (x, y) in a.iter_mut().zip(p) {
                        *x *= y;
                    }
                });
            }
            Self::OnTheFly { ham } => {
                amps.par_chunks_mut(PHASE_BLOCK).enumerate().for_each(|(b, chunk)| {
                    let mut digits = vec![0; ham.shape.n_sites()];
                    for (o, x) in chunk.iter_mut().enumerate() {
                        *x *= phase_of(ham, b * PHASE_BLOCK + o, &mut digits);
                    }
                });
            }
        }
        Ok(())
    }
}

fn phase_of(ham: &DiagonalHamiltonian, index: usize, digits: &mut [usize]) -> Complex64 {
    ham.shape.digits_into(index, digits);
    let e = ham.energy_digits(digits);
    Complex64::new(e.cos(), -e.sin())
}

/// Multiplies every amplitude by `e^{-iE(c)}` of the qudit static layer.
pub fn apply_exp_hz(state: &mut QuditState, realization: &DisorderRealization) -> Result<()> {
    let ham = DiagonalHamiltonian::from_realization(state.shape(), realization)?;
    PhaseLayer::on_the_fly(ham).apply(state)
}
