//! Qubit reference chains that reproduce selected qudit protocols exactly.
//!
//! * The d=3 embedded 2T protocol on `{0,2}` restricted to block-supported
//!   states is an Ising chain with `Z = diag(−1, +1)` and the same `h`, `J`.
//! * The d=4 contiguous protocol is the two-leg chain ENC: site `i` becomes
//!   qubits `A_i = 2i`, `B_i = 2i+1`, level `l = 2a + b`, `Z = diag(+1, −1)` so
//!   that `S^z = −Z_A − ½Z_B`. Under this layout the qubit basis index equals
//!   the qudit basis index.
//! * PLAIN keeps ENC's fields but couples legs as `Z_AZ_A + Z_BZ_B + λ(Z_AZ_B + Z_BZ_A)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::{DiagonalHamiltonian, DisorderRealization, PhaseLayer};
use crate::floquet::{line_metrics, AnalysisSpec, FloquetCircuit, FloquetProtocol, LineMetric, SeriesColumn, SeriesData, TimeSeries};
use crate::kick::{two_level_rotation, KickKind};
use crate::state::{ChainShape, QuditState, SiteOperator};
use crate::{Complex64, Error, Result};

const SUPPORT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "baseline", rename_all = "lowercase")]
pub enum BaselineKind {
    /// Single-qubit image of the d=3 `{0,2}` doublet.
    Doublet,
    Enc,
    Plain { lambda: f64 },
}

#[derive(Clone, Debug)]
pub struct QubitChainProtocol {
    kind: BaselineKind,
    hamiltonian: DiagonalHamiltonian,
    kicked_sites: Vec<usize>,
    epsilon: f64,
    /// Per-qubit weights of the mapped magnetization `Σ_q w_q Z_q / N`.
    mz_weights: Vec<f64>,
    n_qudits: usize,
}

impl QubitChainProtocol {
    pub fn kind(&self) -> BaselineKind {
        self.kind
    }

    pub fn shape(&self) -> ChainShape {
        self.hamiltonian.shape()
    }

    pub fn hamiltonian(&self) -> &DiagonalHamiltonian {
        &self.hamiltonian
    }

    pub fn kicked_sites(&self) -> &[usize] {
        &self.kicked_sites
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn lambda(&self) -> Option<f64> {
        match self.kind {
            BaselineKind::Plain { lambda } => Some(lambda),
            BaselineKind::Enc => Some(0.5),
            BaselineKind::Doublet => None,
        }
    }

    /// `exp(−i(π(1+ε)/2) X)` on one qubit.
    pub fn kick_gate(&self) -> Result<SiteOperator> {
        two_level_rotation(2, 0, 1, std::f64::consts::PI * (1.0 + self.epsilon))
    }

    pub fn circuit(&self) -> Result<FloquetCircuit> {
        let g = self.kick_gate()?;
        let gates = self.kicked_sites.iter().map(|&s| (s, g.clone())).collect();
        FloquetCircuit::new(PhaseLayer::new(self.hamiltonian.clone()), gates)
    }

    /// The qudit chain magnetization expressed on the qubit chain.
    pub fn mapped_magnetization(&self, state: &QuditState) -> Result<f64> {
        if state.shape() != self.shape() {
            return Err(Error::DimensionMismatch { expected: self.shape().dim(), got: state.shape().dim() });
        }
        let z = self.hamiltonian.level_values();
        let mut acc = 0.0;
        for (q, &w) in self.mz_weights.iter().enumerate() {
            let p = state.site_populations(q)?;
            acc += w * (p[0] * z[0] + p[1] * z[1]);
        }
        Ok(acc / self.n_qudits as f64)
    }

    /// Per-basis-state values of the mapped magnetization.
    pub fn magnetization_table(&self) -> Vec<f64> {
        let shape = self.shape();
        let z = self.hamiltonian.level_values();
        let n = self.n_qudits as f64;
        (0..shape.dim())
            .into_par_iter()
            .map(|idx| self.mz_weights.iter().enumerate().map(|(q, w)| w * z[shape.digit(idx, q)]).sum::<f64>() / n)
            .collect()
    }
}

fn is_doublet_kick(p: &FloquetProtocol) -> bool {
    p.kick.local_dim == 3
        && matches!(&p.kick.kind, KickKind::Embedded { blocks, .. } if blocks.len() == 1 && {
            let mut b = blocks[0].clone();
            b.sort_unstable();
            b == [0, 2]
        })
}

fn is_contiguous_kick(p: &FloquetProtocol) -> bool {
    if p.kick.local_dim != 4 {
        return false;
    }
    let Some(pairs) = p.kick.rotation_pairs() else { return false };
    let mut flat: Vec<(usize, usize)> =
        pairs.iter().flatten().map(|&(j, k)| (j.min(k), j.max(k))).collect();
    flat.sort_unstable();
    flat == [(0, 1), (2, 3)] && p.kick.block_cycles() == Some(&[2, 2][..])
}

/// Relabels a block-supported qutrit state onto qubits: `|0⟩ → |↓⟩`, `|2⟩ → |↑⟩`.
pub fn map_doublet_state(state: &QuditState) -> Result<QuditState> {
    let shape = state.shape();
    if shape.local_dim() != 3 {
        return Err(Error::InvalidBaseline("doublet map needs a qutrit chain".into()));
    }
    let n = shape.n_sites();
    let qshape = ChainShape::new(n, 2)?;
    let mut out = vec![Complex64::new(0.0, 0.0); qshape.dim()];
    let mut leaked = 0.0;
    let mut digits = vec![0; n];
    for (idx, a) in state.amplitudes().iter().enumerate() {
        shape.digits_into(idx, &mut digits);
        if digits.contains(&1) {
            leaked += a.norm_sqr();
            continue;
        }
        let q = digits.iter().fold(0, |acc, &l| 2 * acc + l / 2);
        out[q] = *a;
    }
    if leaked > SUPPORT_TOL {
        return Err(Error::InvalidBaseline(format!("state has weight {leaked:e} on level 1")));
    }
    QuditState::from_amplitudes(qshape, out)
}

/// The qubit image of the d=3 embedded 2T protocol together with the mapped
/// initial state.
pub fn map_qutrit_doublet_to_qubit(
    protocol: &FloquetProtocol,
    initial: &QuditState,
) -> Result<(QubitChainProtocol, QuditState)> {
    if !is_doublet_kick(protocol) {
        return Err(Error::InvalidBaseline("expected the d=3 embedded 2T kick on {0,2}".into()));
    }
    let qubit_state = map_doublet_state(initial)?;
    let n = protocol.shape.n_sites();
    let r = &protocol.realization;
    let couplings = r.couplings.iter().enumerate().map(|(i, &j)| (i, i + 1, j)).collect();
    let hamiltonian = DiagonalHamiltonian::new(ChainShape::new(n, 2)?, vec![-1.0, 1.0], r.h.clone(), couplings)?;
    let p = QubitChainProtocol {
        kind: BaselineKind::Doublet,
        hamiltonian,
        kicked_sites: (0..n).collect(),
        epsilon: protocol.kick.epsilon,
        mz_weights: vec![1.0; n],
        n_qudits: n,
    };
    Ok((p, qubit_state))
}

fn two_leg(kind: BaselineKind, r: &DisorderRealization, epsilon: f64) -> Result<QubitChainProtocol> {
    let n = r.n_sites();
    let shape = ChainShape::new(2 * n, 2)?;
    let mut fields = vec![0.0; 2 * n];
    for (i, &h) in r.h.iter().enumerate() {
        fields[2 * i] = -h;
        fields[2 * i + 1] = -h / 2.0;
    }
    let (aa, ab, bb) = match kind {
        BaselineKind::Enc => (1.0, 0.5, 0.25),
        BaselineKind::Plain { lambda } => (1.0, lambda, 1.0),
        BaselineKind::Doublet => unreachable!("doublet chains are single-leg"),
    };
    let mut couplings = Vec::with_capacity(4 * r.couplings.len());
    for (i, &j) in r.couplings.iter().enumerate() {
        let (a, b, a2, b2) = (2 * i, 2 * i + 1, 2 * i + 2, 2 * i + 3);
        couplings.extend([(a, a2, j * aa), (a, b2, j * ab), (b, a2, j * ab), (b, b2, j * bb)]);
    }
    let hamiltonian = DiagonalHamiltonian::new(shape, vec![1.0, -1.0], fields, couplings)?;
    Ok(QubitChainProtocol {
        kind,
        hamiltonian,
        kicked_sites: (0..n).map(|i| 2 * i + 1).collect(),
        epsilon,
        mz_weights: (0..2 * n).map(|q| if q % 2 == 0 { -1.0 } else { -0.5 }).collect(),
        n_qudits: n,
    })
}

/// The ENC two-qubit encoding of the d=4 contiguous embedded 2T protocol.
pub fn encode_d4_to_two_qubits(protocol: &FloquetProtocol) -> Result<QubitChainProtocol> {
    if !is_contiguous_kick(protocol) {
        return Err(Error::InvalidBaseline("expected the d=4 embedded 2T kick on {0,1} and {2,3}".into()));
    }
    two_leg(BaselineKind::Enc, &protocol.realization, protocol.kick.epsilon)
}

/// ENC with an explicit disorder draw.
pub fn build_enc_baseline(realization: &DisorderRealization, epsilon: f64) -> Result<QubitChainProtocol> {
    two_leg(BaselineKind::Enc, realization, epsilon)
}

/// PLAIN with cross-leg weight `λ ∈ [0, 1]`.
pub fn build_plain_baseline(realization: &DisorderRealization, lambda: f64, epsilon: f64) -> Result<QubitChainProtocol> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidBaseline(format!("lambda {lambda} outside [0, 1]")));
    }
    two_leg(BaselineKind::Plain { lambda }, realization, epsilon)
}

/// Reinterprets a d=4 chain state as the `2N`-qubit ENC/PLAIN state.
pub fn encode_d4_state(state: &QuditState) -> Result<QuditState> {
    let shape = state.shape();
    if shape.local_dim() != 4 {
        return Err(Error::InvalidBaseline("two-leg encoding needs a d=4 chain".into()));
    }
    QuditState::from_amplitudes(ChainShape::new(2 * shape.n_sites(), 2)?, state.amplitudes().to_vec())
}

/// Evolves the baseline and records the mapped magnetization as column `Mz`.
pub fn evolve_baseline(protocol: &QubitChainProtocol, state: &mut QuditState, n_t: usize) -> Result<TimeSeries> {
    if n_t < 2 {
        return Err(Error::TooShort(n_t));
    }
    if state.shape() != protocol.shape() {
        return Err(Error::DimensionMismatch { expected: protocol.shape().dim(), got: state.shape().dim() });
    }
    let circuit = protocol.circuit()?;
    let table = protocol.magnetization_table();
    let mut mz = Vec::with_capacity(n_t);
    for n in 0..n_t {
        if n > 0 {
            circuit.step(state)?;
        }
        mz.push(state.diagonal_expectation(&table));
    }
    Ok(TimeSeries { n_periods: n_t, columns: vec![SeriesColumn { name: "Mz".into(), data: SeriesData::Real(mz) }] })
}

/// One baseline run with its line metrics.
pub fn run_baseline(
    protocol: &QubitChainProtocol,
    initial: &QuditState,
    n_t: usize,
    analysis: &AnalysisSpec,
) -> Result<(TimeSeries, Vec<LineMetric>)> {
    let mut state = initial.clone();
    let series = evolve_baseline(protocol, &mut state, n_t)?;
    let metrics = line_metrics(&series, analysis)?;
    Ok((series, metrics))
}
