//! Chain-averaged observables.
//!
//! [`ObservableSpec`] is the declarative form used in configs. Compiling it
//! against a chain yields [`CompiledObservable`], which evaluates diagonal
//! operators from a per-configuration value table in one pass over the state
//! and falls back to single-site reduced density matrices otherwise.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::kick::{spin_operator, Axis, Carrier};
use crate::linalg::{self, CMatrix, I, ONE};
use crate::partition::LevelPartition;
use crate::state::{ChainShape, QuditState, SiteOperator};
use crate::{Complex64, Error, Result};

const CHARGE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObservableSpec {
    /// `M_z = (1/N) Σ_i ⟨S_i^z⟩`.
    ChainMagnetization,
    SitewiseHermitian { name: String, matrix: Vec<Vec<Complex64>> },
    /// Complex probe `Ω` with `K Ω K† = e^{2πiq/m} Ω`.
    ChargedProbe { name: String, matrix: Vec<Vec<Complex64>>, charge: usize, cycle: usize },
    /// `(1/N) Σ_i ⟨Π_b O_i Π_b⟩` per block; blocks default to the kick's.
    BlockResolved {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        blocks: Option<Vec<Vec<usize>>>,
        inner: Box<ObservableSpec>,
    },
}

/// `Ω₄ = diag(1, i, −1, −i)`.
pub fn omega4() -> CMatrix {
    linalg::diag(&[ONE, I, -ONE, -I])
}

fn to_rows(m: &CMatrix) -> Vec<Vec<Complex64>> {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect()).collect()
}

impl ObservableSpec {
    pub fn omega4_probe() -> Self {
        Self::ChargedProbe { name: "Omega4".into(), matrix: to_rows(&omega4()), charge: 1, cycle: 4 }
    }

    /// Short names used in configs: `Mz`, `Omega4`, `block:Mz`.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "Mz" => Ok(Self::ChainMagnetization),
            "Omega4" => Ok(Self::omega4_probe()),
            _ => match name.strip_prefix("block:") {
                Some(inner) if inner != name => {
                    let inner = Self::from_name(inner)?;
                    if matches!(inner, Self::ChargedProbe { .. } | Self::BlockResolved { .. }) {
                        return Err(Error::InvalidArgument(format!("{name}: inner observable must be Hermitian")));
                    }
                    Ok(Self::BlockResolved { blocks: None, inner: Box::new(inner) })
                }
                _ => Err(Error::InvalidArgument(format!("unknown observable '{name}'"))),
            },
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::ChainMagnetization => "Mz".into(),
            Self::SitewiseHermitian { name, .. } | Self::ChargedProbe { name, .. } => name.clone(),
            Self::BlockResolved { inner, .. } => format!("block:{}", inner.label()),
        }
    }
}

fn matrix_of(rows: &[Vec<Complex64>], d: usize) -> Result<CMatrix> {
    let m = linalg::from_rows(rows)?;
    if m.nrows() != d {
        return Err(Error::DimensionMismatch { expected: d, got: m.nrows() });
    }
    Ok(m)
}

#[derive(Clone, Debug)]
enum Evaluator {
    Diagonal(Vec<f64>),
    DiagonalComplex(Vec<Complex64>),
    Dense(CMatrix),
}

#[derive(Clone, Debug)]
pub struct Column {
    name: String,
    complex: bool,
    eval: Evaluator,
}

impl Column {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_complex(&self) -> bool {
        self.complex
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Sample {
    Real(f64),
    Complex(Complex64),
}

#[derive(Clone, Debug)]
pub struct CompiledObservable {
    spec: ObservableSpec,
    columns: Vec<Column>,
}

/// Per-configuration chain average `(1/N) Σ_i w[digit_i(c)]`.
fn config_table<T>(shape: ChainShape, w: &[T]) -> Vec<T>
where
    T: Copy + Send + Sync + Default + std::ops::AddAssign + std::ops::Div<f64, Output = T>,
{
    let n = shape.n_sites();
    let mut out = vec![T::default(); shape.dim()];
    out.par_chunks_mut(1 << 12).enumerate().for_each(|(b, chunk)| {
        let mut digits = vec![0; n];
        for (o, v) in chunk.iter_mut().enumerate() {
            shape.digits_into(b * (1 << 12) + o, &mut digits);
            let mut acc = T::default();
            for &l in &digits {
                acc += w[l];
            }
            *v = acc / n as f64;
        }
    });
    out
}

fn column_for(shape: ChainShape, name: String, op: &CMatrix, complex: bool) -> Column {
    let d = shape.local_dim();
    let eval = if linalg::is_diagonal(op, 0.0) {
        if complex {
            Evaluator::DiagonalComplex(config_table(shape, &(0..d).map(|k| op[(k, k)]).collect::<Vec<_>>()))
        } else {
            Evaluator::Diagonal(config_table(shape, &(0..d).map(|k| op[(k, k)].re).collect::<Vec<_>>()))
        }
    } else {
        Evaluator::Dense(op.clone())
    };
    Column { name, complex, eval }
}

fn hermitian_inner(spec: &ObservableSpec, d: usize) -> Result<(String, CMatrix)> {
    match spec {
        ObservableSpec::ChainMagnetization => Ok(("Mz".into(), spin_operator(d, Axis::Z)?.into_matrix())),
        ObservableSpec::SitewiseHermitian { name, matrix } => {
            let m = matrix_of(matrix, d)?;
            let op = SiteOperator::hermitian(m)?;
            Ok((name.clone(), op.into_matrix()))
        }
        _ => Err(Error::InvalidArgument(format!("{} is not a Hermitian site observable", spec.label()))),
    }
}

/// Checks `K Ω K† = e^{2πiq/m} Ω`.
pub fn validate_charge(carrier: &Carrier, probe: &CMatrix, charge: usize, cycle: usize) -> Result<()> {
    if probe.nrows() != carrier.dim() {
        return Err(Error::DimensionMismatch { expected: carrier.dim(), got: probe.nrows() });
    }
    let phase = Complex64::from_polar(1.0, 2.0 * PI * charge as f64 / cycle as f64);
    let residual = linalg::max_abs(&(carrier.conjugate_raw(probe) - probe * phase));
    if residual > CHARGE_TOL {
        return Err(Error::ProbeCharge { charge, residual });
    }
    Ok(())
}

impl CompiledObservable {
    /// Validates the spec against the chain and, for probes, the carrier.
    pub fn compile(
        spec: &ObservableSpec,
        shape: ChainShape,
        carrier: Option<&Carrier>,
        kick_partition: Option<&LevelPartition>,
    ) -> Result<Self> {
        let d = shape.local_dim();
        let columns = match spec {
            ObservableSpec::ChainMagnetization | ObservableSpec::SitewiseHermitian { .. } => {
                let (name, op) = hermitian_inner(spec, d)?;
                vec![column_for(shape, name, &op, false)]
            }
            ObservableSpec::ChargedProbe { name, matrix, charge, cycle } => {
                let m = matrix_of(matrix, d)?;
                if *cycle == 0 || *charge >= *cycle {
                    return Err(Error::InvalidArgument(format!("charge {charge} outside ℤ_{cycle}")));
                }
                let carrier = carrier.ok_or_else(|| {
                    Error::InvalidArgument(format!("probe {name} needs a carrier for charge validation"))
                })?;
                validate_charge(carrier, &m, *charge, *cycle)?;
                vec![column_for(shape, name.clone(), &m, true)]
            }
            ObservableSpec::BlockResolved { blocks, inner } => {
                let partition = match blocks {
                    Some(b) => LevelPartition::new(d, b.clone())?,
                    None => kick_partition
                        .cloned()
                        .ok_or_else(|| Error::InvalidPartition("no partition given and the kick has none".into()))?,
                };
                if partition.local_dim() != d {
                    return Err(Error::DimensionMismatch { expected: d, got: partition.local_dim() });
                }
                let (name, op) = hermitian_inner(inner, d)?;
                (0..partition.n_blocks())
                    .map(|b| {
                        let p = partition.projector(b);
                        column_for(shape, format!("{name}_b{b}"), &(&p * &op * &p), false)
                    })
                    .collect()
            }
        };
        Ok(Self { spec: spec.clone(), columns })
    }

    pub fn spec(&self) -> &ObservableSpec {
        &self.spec
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn evaluate(&self, state: &QuditState) -> Result<Vec<Sample>> {
        self.columns.iter().map(|c| evaluate_column(c, state)).collect()
    }
}

fn evaluate_column(c: &Column, state: &QuditState) -> Result<Sample> {
    let dim = state.amplitudes().len();
    let table_len = match &c.eval {
        Evaluator::Diagonal(v) => Some(v.len()),
        Evaluator::DiagonalComplex(v) => Some(v.len()),
        Evaluator::Dense(_) => None,
    };
    if let Some(len) = table_len.filter(|&l| l != dim) {
        return Err(Error::DimensionMismatch { expected: len, got: dim });
    }
    Ok(match &c.eval {
        Evaluator::Diagonal(v) => Sample::Real(state.diagonal_expectation(v)),
        Evaluator::DiagonalComplex(v) => Sample::Complex(state.diagonal_expectation_complex(v)),
        Evaluator::Dense(op) => {
            let z = site_average(state, op)?;
            if c.complex {
                Sample::Complex(z)
            } else {
                Sample::Real(z.re)
            }
        }
    })
}

fn site_average(state: &QuditState, op: &CMatrix) -> Result<Complex64> {
    let n = state.shape().n_sites();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        acc += state.expectation_site_complex(i, op)?;
    }
    Ok(acc / n as f64)
}

/// `M_z = (1/N) Σ_i ⟨S_i^z⟩`, evaluated site by site.
pub fn chain_magnetization(state: &QuditState) -> Result<f64> {
    let sz = spin_operator(state.shape().local_dim(), Axis::Z)?;
    Ok(site_average(state, sz.matrix())?.re)
}

/// `(1/N) Σ_i ⟨Ω_i⟩`.
pub fn charged_probe(state: &QuditState, probe: &CMatrix) -> Result<Complex64> {
    let d = state.shape().local_dim();
    if probe.nrows() != d || probe.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: probe.nrows() });
    }
    site_average(state, probe)
}

/// `(1/N) Σ_i ⟨Π_b O_i Π_b⟩` for every block `b`.
pub fn block_resolved_expectation(
    state: &QuditState,
    partition: &LevelPartition,
    op: &SiteOperator,
) -> Result<Vec<f64>> {
    let d = state.shape().local_dim();
    if partition.local_dim() != d || op.local_dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: partition.local_dim() });
    }
    if !op.is_hermitian() {
        return Err(Error::NotHermitian { residual: linalg::hermitian_residual(op.matrix()) });
    }
    (0..partition.n_blocks())
        .map(|b| {
            let p = partition.projector(b);
            Ok(site_average(state, &(&p * op.matrix() * &p))?.re)
        })
        .collect()
}
