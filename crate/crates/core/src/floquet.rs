//! Stroboscopic evolution under `U_F = K(ε) e^{−iH_z}` and disorder ensembles.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::{ensemble_seed, sample_disorder, DiagonalHamiltonian, DisorderRealization, PhaseLayer};
use crate::kick::{compile_kick, CompiledKick, KickSpec};
use crate::observables::{CompiledObservable, ObservableSpec, Sample};
use crate::spectral::{self, PeakMetrics, Spectrum};
use crate::state::{ChainShape, GateKernel, QuditState, SiteOperator};
use crate::{Complex64, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloquetProtocol {
    pub shape: ChainShape,
    pub kick: KickSpec,
    pub realization: DisorderRealization,
}

impl FloquetProtocol {
    pub fn new(shape: ChainShape, kick: KickSpec, realization: DisorderRealization) -> Result<Self> {
        if kick.local_dim != shape.local_dim() {
            return Err(Error::DimensionMismatch { expected: shape.local_dim(), got: kick.local_dim });
        }
        if realization.h.len() != shape.n_sites() || realization.couplings.len() + 1 != shape.n_sites() {
            return Err(Error::DimensionMismatch { expected: shape.n_sites(), got: realization.h.len() });
        }
        kick.validate()?;
        Ok(Self { shape, kick, realization })
    }
}

/// A compiled period: a diagonal phase layer followed by on-site gates.
#[derive(Clone, Debug)]
pub struct FloquetCircuit {
    shape: ChainShape,
    layer: PhaseLayer,
    gates: Vec<(usize, SiteOperator)>,
    kernels: Vec<(usize, GateKernel)>,
    kick: Option<CompiledKick>,
}

impl FloquetCircuit {
    /// Generic period; each gate must be unitary.
    pub fn new(layer: PhaseLayer, gates: Vec<(usize, SiteOperator)>) -> Result<Self> {
        let shape = layer.hamiltonian().shape();
        for (site, g) in &gates {
            shape.check_site(*site)?;
            if g.local_dim() != shape.local_dim() {
                return Err(Error::DimensionMismatch { expected: shape.local_dim(), got: g.local_dim() });
            }
            if !g.is_unitary() {
                return Err(Error::NotUnitary { residual: crate::linalg::unitary_residual(g.matrix()) });
            }
        }
        let kernels = gates.iter().map(|(s, g)| (*s, GateKernel::new(g.matrix()))).collect();
        Ok(Self { shape, layer, gates, kernels, kick: None })
    }

    pub fn from_protocol(p: &FloquetProtocol) -> Result<Self> {
        let kick = compile_kick(&p.kick)?;
        let ham = DiagonalHamiltonian::from_realization(p.shape, &p.realization)?;
        let gates = (0..p.shape.n_sites()).map(|i| (i, kick.unitary().clone())).collect();
        let mut c = Self::new(PhaseLayer::new(ham), gates)?;
        c.kick = Some(kick);
        Ok(c)
    }

    pub fn shape(&self) -> ChainShape {
        self.shape
    }

    pub fn layer(&self) -> &PhaseLayer {
        &self.layer
    }

    pub fn gates(&self) -> &[(usize, SiteOperator)] {
        &self.gates
    }

    /// The compiled kick when built from a protocol.
    pub fn kick(&self) -> Option<&CompiledKick> {
        self.kick.as_ref()
    }

    /// One period: phase layer first, then the gates in order.
    pub fn step(&self, state: &mut QuditState) -> Result<()> {
        self.layer.apply(state)?;
        for (site, k) in &self.kernels {
            state.apply_kernel(*site, k);
        }
        Ok(())
    }
}

pub fn floquet_step(state: &mut QuditState, protocol: &FloquetProtocol) -> Result<()> {
    FloquetCircuit::from_protocol(protocol)?.step(state)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "values", rename_all = "lowercase")]
pub enum SeriesData {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesColumn {
    pub name: String,
    pub data: SeriesData,
}

impl SeriesColumn {
    pub fn spectrum(&self) -> Result<Spectrum> {
        match &self.data {
            SeriesData::Real(x) => spectral::periodogram(x),
            SeriesData::Complex(z) => spectral::periodogram_complex(z),
        }
    }

    pub fn real(&self) -> Option<&[f64]> {
        match &self.data {
            SeriesData::Real(x) => Some(x),
            SeriesData::Complex(_) => None,
        }
    }

    pub fn complex(&self) -> Option<&[Complex64]> {
        match &self.data {
            SeriesData::Complex(z) => Some(z),
            SeriesData::Real(_) => None,
        }
    }
}

/// Observables recorded at periods `n = 0 … N_t − 1`; `n = 0` is the initial state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub n_periods: usize,
    pub columns: Vec<SeriesColumn>,
}

impl TimeSeries {
    pub fn column(&self, name: &str) -> Option<&SeriesColumn> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// CSV with `n` first; complex columns become `re_<name>,im_<name>`.
    pub fn to_csv(&self) -> String {
        let mut header = vec!["n".to_string()];
        for c in &self.columns {
            match c.data {
                SeriesData::Real(_) => header.push(c.name.clone()),
                SeriesData::Complex(_) => {
                    header.push(format!("re_{}", c.name));
                    header.push(format!("im_{}", c.name));
                }
            }
        }
        let mut out = header.join(",");
        out.push('\n');
        for n in 0..self.n_periods {
            out.push_str(&n.to_string());
            for c in &self.columns {
                match &c.data {
                    SeriesData::Real(x) => out.push_str(&format!(",{}", x[n])),
                    SeriesData::Complex(z) => out.push_str(&format!(",{},{}", z[n].re, z[n].im)),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Records every observable before the first step and after each of the
/// following `n_t − 1` steps. `state` is left at the last recorded period.
pub fn evolve_record(
    circuit: &FloquetCircuit,
    state: &mut QuditState,
    n_t: usize,
    observables: &[CompiledObservable],
) -> Result<TimeSeries> {
    if n_t < 2 {
        return Err(Error::TooShort(n_t));
    }
    if state.shape() != circuit.shape {
        return Err(Error::DimensionMismatch { expected: circuit.shape.dim(), got: state.shape().dim() });
    }
    let mut columns: Vec<SeriesColumn> = observables
        .iter()
        .flat_map(|o| o.columns())
        .map(|c| SeriesColumn {
            name: c.name().to_string(),
            data: if c.is_complex() {
                SeriesData::Complex(Vec::with_capacity(n_t))
            } else {
                SeriesData::Real(Vec::with_capacity(n_t))
            },
        })
        .collect();
    for n in 0..n_t {
        if n > 0 {
            circuit.step(state)?;
        }
        let mut slot = 0;
        for o in observables {
            for s in o.evaluate(state)? {
                match (&mut columns[slot].data, s) {
                    (SeriesData::Real(v), Sample::Real(x)) => v.push(x),
                    (SeriesData::Complex(v), Sample::Complex(z)) => v.push(z),
                    _ => unreachable!("column kinds are fixed at compile time"),
                }
                slot += 1;
            }
        }
    }
    Ok(TimeSeries { n_periods: n_t, columns })
}

/// Everything about a run except the disorder draw.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleTemplate {
    pub shape: ChainShape,
    pub kick: KickSpec,
    pub params: crate::disorder::StaticLayerParams,
    /// Single-site vector; the initial state is its N-fold tensor power.
    pub initial_site_state: Vec<Complex64>,
    pub observables: Vec<ObservableSpec>,
}

/// Which lines to measure on every recorded column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSpec {
    pub targets: Vec<usize>,
    pub half_window: usize,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        Self { targets: vec![2], half_window: spectral::DEFAULT_HALF_WINDOW }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineMetric {
    pub column: String,
    pub m: usize,
    /// `None` when the column carries no power.
    pub weight: Option<f64>,
    pub peak: Option<PeakMetrics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizationRun {
    pub index: u64,
    pub realization: DisorderRealization,
    pub series: TimeSeries,
    pub metrics: Vec<LineMetric>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    pub n_excluded: usize,
}

impl Stat {
    /// Mean and standard error of the present values; `None` entries are
    /// counted as excluded.
    pub fn from_samples(values: &[Option<f64>]) -> Self {
        let xs: Vec<f64> = values.iter().flatten().copied().collect();
        let n = xs.len();
        let n_excluded = values.len() - n;
        if n == 0 {
            return Self { mean: f64::NAN, stderr: f64::NAN, n, n_excluded };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr, n, n_excluded }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineAggregate {
    pub column: String,
    pub m: usize,
    pub weight: Stat,
    pub delta_f: Stat,
    pub gamma: Stat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub base_seed: u64,
    pub runs: Vec<RealizationRun>,
    pub aggregate: Vec<LineAggregate>,
}

pub fn line_metrics(series: &TimeSeries, analysis: &AnalysisSpec) -> Result<Vec<LineMetric>> {
    let mut out = Vec::new();
    for col in &series.columns {
        let spec = col.spectrum()?;
        for &m in &analysis.targets {
            out.push(LineMetric {
                column: col.name.clone(),
                m,
                weight: spectral::subharmonic_weight(&spec, m),
                peak: spectral::peak_metrics(&spec, m, analysis.half_window)?,
            });
        }
    }
    Ok(out)
}

/// One ensemble member: disorder from `ensemble_seed(base_seed, index)`.
pub fn run_realization(
    template: &EnsembleTemplate,
    index: u64,
    base_seed: u64,
    n_t: usize,
    analysis: &AnalysisSpec,
) -> Result<RealizationRun> {
    let realization = sample_disorder(template.params, template.shape, ensemble_seed(base_seed, index))?;
    let protocol = FloquetProtocol::new(template.shape, template.kick.clone(), realization.clone())?;
    let circuit = FloquetCircuit::from_protocol(&protocol)?;
    let kick = circuit.kick().expect("protocol circuit carries its kick");
    let partition = template.kick.partition();
    let observables = template
        .observables
        .iter()
        .map(|o| CompiledObservable::compile(o, template.shape, Some(kick.carrier()), partition.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let mut state = QuditState::prepare_product_state(template.shape, &template.initial_site_state)?;
    let series = evolve_record(&circuit, &mut state, n_t, &observables)?;
    let metrics = line_metrics(&series, analysis)?;
    Ok(RealizationRun { index, realization, series, metrics })
}

/// Per-realization line metrics averaged in realization-index order.
pub fn aggregate(runs: &[RealizationRun]) -> Vec<LineAggregate> {
    let mut sorted: Vec<&RealizationRun> = runs.iter().collect();
    sorted.sort_by_key(|r| r.index);
    let Some(first) = sorted.first() else { return Vec::new() };
    first
        .metrics
        .iter()
        .enumerate()
        .map(|(slot, proto)| {
            let pick = |f: &dyn Fn(&LineMetric) -> Option<f64>| -> Vec<Option<f64>> {
                sorted.iter().map(|r| f(&r.metrics[slot])).collect()
            };
            LineAggregate {
                column: proto.column.clone(),
                m: proto.m,
                weight: Stat::from_samples(&pick(&|l| l.weight)),
                delta_f: Stat::from_samples(&pick(&|l| l.peak.map(|p| p.delta_f))),
                gamma: Stat::from_samples(&pick(&|l| l.peak.map(|p| p.gamma))),
            }
        })
        .collect()
}

/// Runs the given ensemble members in parallel and aggregates them.
pub fn run_members(
    template: &EnsembleTemplate,
    indices: &[u64],
    base_seed: u64,
    n_t: usize,
    analysis: &AnalysisSpec,
) -> Result<EnsembleResult> {
    let mut runs = indices
        .par_iter()
        .map(|&r| run_realization(template, r, base_seed, n_t, analysis))
        .collect::<Result<Vec<_>>>()?;
    runs.sort_by_key(|r| r.index);
    let aggregate = aggregate(&runs);
    Ok(EnsembleResult { base_seed, runs, aggregate })
}

pub fn run_ensemble(
    template: &EnsembleTemplate,
    n_realizations: usize,
    base_seed: u64,
    n_t: usize,
    analysis: &AnalysisSpec,
) -> Result<EnsembleResult> {
    if n_realizations == 0 {
        return Err(Error::InvalidArgument("need at least one realization".into()));
    }
    let indices: Vec<u64> = (0..n_realizations as u64).collect();
    run_members(template, &indices, base_seed, n_t, analysis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::StaticLayerParams;
    use crate::observables::chain_magnetization;

    fn zero_disorder(shape: ChainShape) -> DisorderRealization {
        sample_disorder(StaticLayerParams::zero(), shape, 0).unwrap()
    }

    fn basis_site(d: usize, l: usize) -> Vec<Complex64> {
        (0..d).map(|k| Complex64::new(if k == l { 1.0 } else { 0.0 }, 0.0)).collect()
    }

    #[test]
    fn embedded_2t_single_step() {
        let shape = ChainShape::new(4, 3).unwrap();
        let p = FloquetProtocol::new(shape, KickSpec::embedded(3, vec![vec![0, 2]], vec![2], 0.0), zero_disorder(shape))
            .unwrap();
        let mut s = QuditState::basis_state(shape, 0).unwrap();
        floquet_step(&mut s, &p).unwrap();
        let target = shape.index_of(&[2, 2, 2, 2]).unwrap();
        // (−i)^4 = 1
        assert!((s.amplitudes()[target] - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        floquet_step(&mut s, &p).unwrap();
        assert!((s.amplitudes()[0].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn identity_kick_keeps_basis_state() {
        let shape = ChainShape::new(4, 3).unwrap();
        let r = sample_disorder(StaticLayerParams::preset_default(), shape, 3).unwrap();
        let p = FloquetProtocol::new(shape, KickSpec::identity(3), r).unwrap();
        let mut s = QuditState::basis_state(shape, 17).unwrap();
        floquet_step(&mut s, &p).unwrap();
        assert!((s.amplitudes()[17].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn period_locked_sequences() {
        let shape = ChainShape::new(3, 3).unwrap();
        let mz = CompiledObservable::compile(&ObservableSpec::ChainMagnetization, shape, None, None).unwrap();
        for (kick, expect) in [
            (KickSpec::embedded(3, vec![vec![0, 2]], vec![2], 0.0), vec![-1.0, 1.0, -1.0, 1.0, -1.0, 1.0]),
            (KickSpec::embedded(3, vec![vec![0, 1, 2]], vec![3], 0.0), vec![-1.0, 1.0, 0.0, -1.0, 1.0, 0.0]),
            (KickSpec::identity(3), vec![-1.0; 6]),
        ] {
            let r = sample_disorder(StaticLayerParams::preset_default(), shape, 9).unwrap();
            let c = FloquetCircuit::from_protocol(&FloquetProtocol::new(shape, kick, r).unwrap()).unwrap();
            let mut s = QuditState::basis_state(shape, 0).unwrap();
            let ts = evolve_record(&c, &mut s, 6, std::slice::from_ref(&mz)).unwrap();
            for (a, b) in ts.columns[0].real().unwrap().iter().zip(&expect) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn record_rejects_short_runs() {
        let shape = ChainShape::new(2, 3).unwrap();
        let c = FloquetCircuit::from_protocol(
            &FloquetProtocol::new(shape, KickSpec::identity(3), zero_disorder(shape)).unwrap(),
        )
        .unwrap();
        let mut s = QuditState::basis_state(shape, 0).unwrap();
        assert!(matches!(evolve_record(&c, &mut s, 1, &[]), Err(Error::TooShort(1))));
    }

    #[test]
    fn protocol_shape_checks() {
        let shape = ChainShape::new(3, 3).unwrap();
        assert!(FloquetProtocol::new(shape, KickSpec::identity(4), zero_disorder(shape)).is_err());
        let other = zero_disorder(ChainShape::new(4, 3).unwrap());
        assert!(FloquetProtocol::new(shape, KickSpec::identity(3), other).is_err());
    }

    #[test]
    fn csv_layout() {
        let ts = TimeSeries {
            n_periods: 2,
            columns: vec![
                SeriesColumn { name: "Mz".into(), data: SeriesData::Real(vec![-1.0, 0.5]) },
                SeriesColumn {
                    name: "Omega4".into(),
                    data: SeriesData::Complex(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, -1.0)]),
                },
            ],
        };
        assert_eq!(ts.to_csv(), "n,Mz,re_Omega4,im_Omega4\n0,-1,1,0\n1,0.5,0,-1\n");
    }

    #[test]
    fn stat_basics() {
        let s = Stat::from_samples(&[Some(1.0), None, Some(3.0)]);
        assert_eq!((s.mean, s.n, s.n_excluded), (2.0, 2, 1));
        assert!((s.stderr - 1.0).abs() < 1e-15);
        let one = Stat::from_samples(&[Some(0.3)]);
        assert_eq!((one.mean, one.stderr), (0.3, 0.0));
    }

    fn template(params: StaticLayerParams) -> EnsembleTemplate {
        EnsembleTemplate {
            shape: ChainShape::new(4, 3).unwrap(),
            kick: KickSpec::embedded(3, vec![vec![0, 2]], vec![2], 0.05),
            params,
            initial_site_state: basis_site(3, 0),
            observables: vec![ObservableSpec::ChainMagnetization],
        }
    }

    #[test]
    fn single_member_aggregate_equals_run() {
        let t = template(StaticLayerParams::preset_default());
        let res = run_ensemble(&t, 1, 5, 40, &AnalysisSpec::default()).unwrap();
        let run = &res.runs[0];
        assert_eq!(res.aggregate[0].weight.mean, run.metrics[0].weight.unwrap());
        assert_eq!(res.aggregate[0].gamma.mean, run.metrics[0].peak.unwrap().gamma);
    }

    #[test]
    fn zero_disorder_members_agree() {
        let t = template(StaticLayerParams::zero());
        let res = run_ensemble(&t, 3, 5, 30, &AnalysisSpec::default()).unwrap();
        assert_eq!(res.runs[0].series, res.runs[1].series);
        assert_eq!(res.runs[1].series, res.runs[2].series);
        assert_eq!(res.aggregate[0].weight.stderr, 0.0);
    }

    #[test]
    fn member_order_does_not_matter() {
        let t = template(StaticLayerParams::preset_default());
        let a = run_members(&t, &[0, 1, 2, 3], 11, 40, &AnalysisSpec::default()).unwrap();
        let b = run_members(&t, &[3, 1, 0, 2], 11, 40, &AnalysisSpec::default()).unwrap();
        assert_eq!(a.aggregate, b.aggregate);
        let shuffled: Vec<RealizationRun> = a.runs.iter().rev().cloned().collect();
        assert_eq!(aggregate(&shuffled), a.aggregate);
    }

    #[test]
    fn circuit_step_matches_direct_magnetization() {
        let shape = ChainShape::new(3, 4).unwrap();
        let r = sample_disorder(StaticLayerParams::preset_default(), shape, 2).unwrap();
        let p = FloquetProtocol::new(shape, KickSpec::embedded(4, vec![vec![0, 3], vec![1, 2]], vec![2, 2], 0.1), r)
            .unwrap();
        let c = FloquetCircuit::from_protocol(&p).unwrap();
        let mz = CompiledObservable::compile(&ObservableSpec::ChainMagnetization, shape, None, None).unwrap();
        let site = vec![Complex64::new(0.5, 0.0); 4];
        let mut s = QuditState::prepare_product_state(shape, &site).unwrap();
        let ts = evolve_record(&c, &mut s, 5, std::slice::from_ref(&mz)).unwrap();
        assert!((ts.columns[0].real().unwrap()[4] - chain_magnetization(&s).unwrap()).abs() < 1e-12);
    }
}
