//! Wires configs to the simulator and writes the result directory.

use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use qudit_floquet::baselines::{
    build_enc_baseline, build_plain_baseline, encode_d4_state, map_qutrit_doublet_to_qubit, run_baseline,
    BaselineKind, QubitChainProtocol,
};
use qudit_floquet::disorder::{ensemble_seed, sample_disorder, StaticLayerParams};
use qudit_floquet::floquet::{
    aggregate, run_ensemble, AnalysisSpec, EnsembleResult, EnsembleTemplate, LineAggregate, RealizationRun,
    SeriesColumn, SeriesData, Stat, TimeSeries,
};
use qudit_floquet::kick::{compile_kick, KickKind};
use qudit_floquet::levels::{
    build_floquet_matrix, eigenphases, gap_ratio, histogram_of, normalized_spacings, DEFAULT_DENSE_CAP,
};
use qudit_floquet::normal_form::{carrier_commutator_residual, charged_scaling_fit, closed_form_identities, ChargedScaling, IdentityCheck};
use qudit_floquet::observables::ObservableSpec;
use qudit_floquet::spectral::Spectrum;
use qudit_floquet::{ChainShape, FloquetCircuit, FloquetProtocol, QuditState};

use crate::config::{ExperimentConfig, ProtocolDef};
use crate::output::{slug, FileEntry, Outputs};

/// Tolerance recorded in the identity report.
pub const IDENTITY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Run,
    Sweep,
    Stats,
    Identities,
    Baseline,
}

impl Mode {
    fn dynamics(self) -> bool {
        matches!(self, Mode::Run | Mode::Sweep | Mode::Baseline)
    }

    fn stats(self, cfg: &ExperimentConfig) -> bool {
        self == Mode::Stats || (matches!(self, Mode::Run | Mode::Sweep) && cfg.analyses.spectrum_stats)
    }

    fn identities(self, cfg: &ExperimentConfig) -> bool {
        self == Mode::Identities || (matches!(self, Mode::Run | Mode::Sweep) && cfg.analyses.identities)
    }

    fn baselines(self, cfg: &ExperimentConfig) -> bool {
        matches!(self, Mode::Run | Mode::Sweep | Mode::Baseline) && !cfg.analyses.baselines.is_empty()
    }

    /// Whether the default ε grid may stand in for a missing list.
    fn allows_default_grid(self) -> bool {
        self != Mode::Run
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub protocol: String,
    pub initial_state: String,
    pub epsilon: f64,
    /// Per-site weight of the initial state on each kick block (inactive levels last).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_weights: Option<Vec<f64>>,
    pub lines: Vec<LineAggregate>,
    pub timeseries_file: String,
    pub spectrum_files: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub protocol: String,
    pub baseline: BaselineKind,
    pub label: String,
    pub initial_state: String,
    pub epsilon: f64,
    pub lines: Vec<LineAggregate>,
    /// Largest `|M_z^{qudit} − M_z^{baseline}|` over periods and realizations,
    /// for baselines that encode the qudit protocol exactly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_deviation: Option<f64>,
    pub timeseries_file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub protocol: String,
    pub epsilon: f64,
    pub dim: usize,
    pub mean_r: Stat,
    pub excluded_pairs: usize,
    pub histogram_file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolIdentities {
    pub protocol: String,
    pub carrier_commutator_residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub charged_scaling: Option<ChargedScaling>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub tolerance: f64,
    pub identities: Vec<IdentityCheck>,
    pub protocols: Vec<ProtocolIdentities>,
    pub all_pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub mode: Mode,
    pub n_sites: usize,
    pub n_periods: usize,
    pub n_realizations: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub cases: Vec<CaseSummary>,
    #[serde(default)]
    pub baselines: Vec<BaselineSummary>,
    #[serde(default)]
    pub level_stats: Vec<LevelSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identity_report: Option<String>,
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub mode: Mode,
    /// Resolved config; feeding it back reproduces every CSV.
    pub config: ExperimentConfig,
    pub realization_seeds: Vec<u64>,
    pub threads: usize,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
    pub files: Vec<FileEntry>,
}

fn eps_tag(eps: f64) -> String {
    format!("eps{eps:.6}")
}

fn block_weights(def: &ProtocolDef, site: &[Complex64]) -> Option<Vec<f64>> {
    let p = def.kick.partition()?.completed();
    Some(p.blocks().iter().map(|b| b.iter().map(|&l| site[l].norm_sqr()).sum()).collect())
}

/// Ensemble-mean series and mean periodograms of an ensemble.
pub fn ensemble_means(runs: &[TimeSeries]) -> anyhow::Result<(TimeSeries, Vec<(String, Spectrum)>)> {
    let first = runs.first().context("empty ensemble")?;
    let n = runs.len() as f64;
    let mut columns = Vec::new();
    let mut spectra = Vec::new();
    for (c, proto) in first.columns.iter().enumerate() {
        let data = match &proto.data {
            SeriesData::Real(x) => {
                let mut acc = vec![0.0; x.len()];
                for r in runs {
                    for (a, v) in acc.iter_mut().zip(r.columns[c].real().context("column kind changed")?) {
                        *a += v;
                    }
                }
                SeriesData::Real(acc.into_iter().map(|a| a / n).collect())
            }
            SeriesData::Complex(z) => {
                let mut acc = vec![Complex64::new(0.0, 0.0); z.len()];
                for r in runs {
                    for (a, v) in acc.iter_mut().zip(r.columns[c].complex().context("column kind changed")?) {
                        *a += v;
                    }
                }
                SeriesData::Complex(acc.into_iter().map(|a| a / n).collect())
            }
        };
        let mut power = vec![0.0; first.n_periods];
        let mut complex = false;
        for r in runs {
            let s = r.columns[c].spectrum()?;
            complex = s.is_complex();
            for (a, p) in power.iter_mut().zip(s.power()) {
                *a += p / n;
            }
        }
        spectra.push((proto.name.clone(), Spectrum::from_power(power, complex)?));
        columns.push(SeriesColumn { name: proto.name.clone(), data });
    }
    Ok((TimeSeries { n_periods: first.n_periods, columns }, spectra))
}

/// `(ε, line aggregates)` rows of one sweep file.
type SweepRows = Vec<(f64, Vec<LineAggregate>)>;

fn sweep_csv(rows: &[(f64, &[LineAggregate])]) -> String {
    let mut out = String::from(
        "epsilon,column,m,weight_mean,weight_stderr,delta_f_mean,delta_f_stderr,gamma_mean,gamma_stderr,n,n_excluded\n",
    );
    for (eps, lines) in rows {
        for l in *lines {
            out.push_str(&format!(
                "{eps},{},{},{},{},{},{},{},{},{},{}\n",
                l.column,
                l.m,
                l.weight.mean,
                l.weight.stderr,
                l.delta_f.mean,
                l.delta_f.stderr,
                l.gamma.mean,
                l.gamma.stderr,
                l.weight.n,
                l.weight.n_excluded
            ));
        }
    }
    out
}

/// The ensemble for one (protocol, initial state, ε) point.
pub fn run_case(
    cfg: &ExperimentConfig,
    def: &ProtocolDef,
    site: &[Complex64],
    observables: &[ObservableSpec],
    epsilon: f64,
) -> anyhow::Result<EnsembleResult> {
    let template = EnsembleTemplate {
        shape: ChainShape::new(cfg.n_sites, def.kick.local_dim)?,
        kick: def.kick.with_epsilon(epsilon),
        params: cfg.disorder_for(def),
        initial_site_state: site.to_vec(),
        observables: observables.to_vec(),
    };
    let analysis = AnalysisSpec { targets: cfg.targets_for(def), half_window: cfg.analyses.half_window };
    Ok(run_ensemble(&template, cfg.n_realizations, cfg.base_seed, cfg.n_periods, &analysis)?)
}

pub fn baseline_label(kind: &BaselineKind) -> String {
    match kind {
        BaselineKind::Doublet => "doublet".into(),
        BaselineKind::Enc => "enc".into(),
        BaselineKind::Plain { lambda } => format!("plain{lambda}"),
    }
}

/// Whether `kind` applies to the protocol; ENC and the doublet map encode a
/// specific qudit protocol, PLAIN only needs a d=4 disorder draw.
pub fn baseline_applies(kind: &BaselineKind, def: &ProtocolDef) -> bool {
    let shape = match ChainShape::new(2, def.kick.local_dim) {
        Ok(s) => s,
        Err(_) => return false,
    };
    let zero = sample_disorder(StaticLayerParams::zero(), shape, 0).expect("zero disorder");
    let Ok(p) = FloquetProtocol::new(shape, def.kick.clone(), zero) else { return false };
    match kind {
        BaselineKind::Doublet => {
            let s = QuditState::basis_state(shape, 0).expect("basis state");
            map_qutrit_doublet_to_qubit(&p, &s).is_ok()
        }
        BaselineKind::Enc => qudit_floquet::baselines::encode_d4_to_two_qubits(&p).is_ok(),
        BaselineKind::Plain { .. } => def.kick.local_dim == 4,
    }
}

fn build_baseline(
    kind: &BaselineKind,
    protocol: &FloquetProtocol,
    initial: &QuditState,
) -> anyhow::Result<(QubitChainProtocol, QuditState)> {
    let eps = protocol.kick.epsilon;
    Ok(match kind {
        BaselineKind::Doublet => map_qutrit_doublet_to_qubit(protocol, initial)?,
        BaselineKind::Enc => (build_enc_baseline(&protocol.realization, eps)?, encode_d4_state(initial)?),
        BaselineKind::Plain { lambda } => {
            (build_plain_baseline(&protocol.realization, *lambda, eps)?, encode_d4_state(initial)?)
        }
    })
}

/// Baseline ensemble on the same disorder draws as the qudit ensemble.
pub fn run_baseline_case(
    cfg: &ExperimentConfig,
    def: &ProtocolDef,
    kind: &BaselineKind,
    site: &[Complex64],
    epsilon: f64,
) -> anyhow::Result<Vec<RealizationRun>> {
    let shape = ChainShape::new(cfg.n_sites, def.kick.local_dim)?;
    let params = cfg.disorder_for(def);
    let analysis = AnalysisSpec { targets: cfg.targets_for(def), half_window: cfg.analyses.half_window };
    let mut runs = (0..cfg.n_realizations as u64)
        .into_par_iter()
        .map(|r| -> anyhow::Result<RealizationRun> {
            let realization = sample_disorder(params, shape, ensemble_seed(cfg.base_seed, r))?;
            let protocol = FloquetProtocol::new(shape, def.kick.with_epsilon(epsilon), realization.clone())?;
            let initial = QuditState::prepare_product_state(shape, site)?;
            let (qp, qs) = build_baseline(kind, &protocol, &initial)?;
            let (series, metrics) = run_baseline(&qp, &qs, cfg.n_periods, &analysis)?;
            Ok(RealizationRun { index: r, realization, series, metrics })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    runs.sort_by_key(|r| r.index);
    Ok(runs)
}

/// Largest pointwise `M_z` difference between two ensembles run on the same seeds.
pub fn max_deviation(a: &[RealizationRun], b: &[RealizationRun]) -> Option<f64> {
    let mut worst: f64 = 0.0;
    for (x, y) in a.iter().zip(b) {
        let xs = x.series.column("Mz")?.real()?;
        let ys = y.series.column("Mz")?.real()?;
        for (u, v) in xs.iter().zip(ys) {
            worst = worst.max((u - v).abs());
        }
    }
    Some(worst)
}

pub struct LevelResult {
    pub dim: usize,
    pub per_realization: Vec<qudit_floquet::levels::GapRatio>,
    pub spacings: Vec<f64>,
}

/// Gap ratios of the dense Floquet operator over an ensemble.
pub fn level_statistics(
    def: &ProtocolDef,
    n_sites: usize,
    params: StaticLayerParams,
    epsilon: f64,
    n_realizations: usize,
    base_seed: u64,
) -> anyhow::Result<LevelResult> {
    let shape = ChainShape::new(n_sites, def.kick.local_dim)?;
    let per: Vec<(qudit_floquet::levels::GapRatio, Vec<f64>)> = (0..n_realizations as u64)
        .into_par_iter()
        .map(|r| -> anyhow::Result<_> {
            let realization = sample_disorder(params, shape, ensemble_seed(base_seed, r))?;
            let protocol = FloquetProtocol::new(shape, def.kick.with_epsilon(epsilon), realization)?;
            let circuit = FloquetCircuit::from_protocol(&protocol)?;
            let u = build_floquet_matrix(&circuit, DEFAULT_DENSE_CAP)?;
            let e = eigenphases(&u)?;
            Ok((gap_ratio(&e.phases)?, normalized_spacings(&e.phases)?))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let mut spacings = Vec::new();
    let mut per_realization = Vec::new();
    for (g, s) in per {
        per_realization.push(g);
        spacings.extend(s);
    }
    Ok(LevelResult { dim: shape.dim(), per_realization, spacings })
}

pub fn identity_report(protocols: &[ProtocolDef], grid: &[f64]) -> anyhow::Result<IdentityReport> {
    let identities = closed_form_identities(IDENTITY_TOL)?;
    let mut out = Vec::new();
    for def in protocols {
        if matches!(def.kick.kind, KickKind::Identity) {
            continue;
        }
        let kick = compile_kick(&def.kick)?;
        out.push(ProtocolIdentities {
            protocol: def.name.clone(),
            carrier_commutator_residual: carrier_commutator_residual(kick.carrier())?,
            charged_scaling: Some(charged_scaling_fit(&def.kick, grid)?),
        });
    }
    let all_pass = identities.iter().all(|c| c.pass) && out.iter().all(|p| p.carrier_commutator_residual <= IDENTITY_TOL);
    Ok(IdentityReport { tolerance: IDENTITY_TOL, identities, protocols: out, all_pass })
}

/// Runs `cfg` in `mode` and writes everything into `dir`; the manifest goes last.
pub fn execute(cfg: &ExperimentConfig, mode: Mode, dir: &Path) -> anyhow::Result<Summary> {
    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let resolved = cfg.resolve(mode.allows_default_grid())?;
    if mode == Mode::Baseline && cfg.analyses.baselines.is_empty() {
        bail!("analyses.baselines: the baseline command needs at least one baseline");
    }
    if mode.stats(cfg) {
        for def in &resolved.protocols {
            let dim = ChainShape::new(cfg.n_sites, def.kick.local_dim)?.dim();
            if dim > DEFAULT_DENSE_CAP {
                bail!(
                    "n_sites: level statistics need a dense {dim}x{dim} Floquet matrix for '{}', above the cap of {DEFAULT_DENSE_CAP}; reduce n_sites",
                    def.name
                );
            }
        }
    }
    let mut snapshot = cfg.clone();
    snapshot.epsilons = Some(resolved.epsilons.clone());
    let mut out = Outputs::create(dir)?;
    let mut summary = Summary {
        name: cfg.name.clone(),
        mode,
        n_sites: cfg.n_sites,
        n_periods: cfg.n_periods,
        n_realizations: cfg.n_realizations,
        base_seed: cfg.base_seed,
        cases: Vec::new(),
        baselines: Vec::new(),
        level_stats: Vec::new(),
        identity_report: None,
        notes: Vec::new(),
    };

    if mode.dynamics() {
        let mut jobs = Vec::new();
        for (p, def) in resolved.protocols.iter().enumerate() {
            for (s, state) in cfg.initial_states.iter().enumerate() {
                for &eps in &resolved.epsilons {
                    jobs.push((p, def, s, state, eps));
                }
            }
        }
        let results = jobs
            .par_iter()
            .map(|&(p, def, s, _, eps)| run_case(cfg, def, &resolved.site_vectors[p][s], &resolved.observables[p], eps))
            .collect::<anyhow::Result<Vec<_>>>()?;
        let mut sweep_rows: Vec<(String, SweepRows)> = Vec::new();
        for ((p, def, s, state, eps), result) in jobs.iter().zip(&results) {
            let tag = slug(&format!("{}_{}_{}", def.name, state.tag(), eps_tag(*eps)));
            let series: Vec<TimeSeries> = result.runs.iter().map(|r| r.series.clone()).collect();
            let (mean, spectra) = ensemble_means(&series)?;
            let ts_file = format!("timeseries_{tag}.csv");
            out.write(&ts_file, mean.to_csv())?;
            let mut spectrum_files = Vec::new();
            for (col, spec) in &spectra {
                let f = format!("spectrum_{tag}_{}.csv", slug(col));
                out.write(&f, spec.to_csv())?;
                spectrum_files.push(f);
            }
            summary.cases.push(CaseSummary {
                protocol: def.name.clone(),
                initial_state: state.tag(),
                epsilon: *eps,
                block_weights: block_weights(def, &resolved.site_vectors[*p][*s]),
                lines: result.aggregate.clone(),
                timeseries_file: ts_file,
                spectrum_files,
            });
            let key = slug(&format!("{}_{}", def.name, state.tag()));
            match sweep_rows.iter_mut().find(|(k, _)| *k == key) {
                Some((_, rows)) => rows.push((*eps, result.aggregate.clone())),
                None => sweep_rows.push((key.clone(), vec![(*eps, result.aggregate.clone())])),
            }

            if mode.baselines(cfg) {
                for kind in &cfg.analyses.baselines {
                    if !baseline_applies(kind, def) {
                        continue;
                    }
                    let runs = run_baseline_case(cfg, def, kind, &resolved.site_vectors[*p][*s], *eps)?;
                    let label = baseline_label(kind);
                    let exact = matches!(kind, BaselineKind::Enc | BaselineKind::Doublet);
                    let series: Vec<TimeSeries> = runs.iter().map(|r| r.series.clone()).collect();
                    let (mean, _) = ensemble_means(&series)?;
                    let f = format!("timeseries_{tag}_{}.csv", slug(&label));
                    out.write(&f, mean.to_csv())?;
                    let lines = aggregate(&runs);
                    let bkey = format!("{key}_{}", slug(&label));
                    match sweep_rows.iter_mut().find(|(k, _)| *k == bkey) {
                        Some((_, rows)) => rows.push((*eps, lines.clone())),
                        None => sweep_rows.push((bkey, vec![(*eps, lines.clone())])),
                    }
                    summary.baselines.push(BaselineSummary {
                        protocol: def.name.clone(),
                        baseline: *kind,
                        label,
                        initial_state: state.tag(),
                        epsilon: *eps,
                        lines,
                        max_deviation: if exact { max_deviation(&result.runs, &runs) } else { None },
                        timeseries_file: f,
                    });
                }
            }
        }
        for (key, rows) in &sweep_rows {
            let rows: Vec<(f64, &[LineAggregate])> = rows.iter().map(|(e, l)| (*e, l.as_slice())).collect();
            out.write(&format!("sweep_{key}.csv"), sweep_csv(&rows))?;
        }
        if mode.baselines(cfg) {
            for kind in &cfg.analyses.baselines {
                if !resolved.protocols.iter().any(|d| baseline_applies(kind, d)) {
                    summary.notes.push(format!("baseline {} matches no protocol; skipped", baseline_label(kind)));
                }
            }
        }
    }

    if mode.stats(cfg) {
        for def in &resolved.protocols {
            let mut table = String::from("epsilon,r_mean,r_stderr,n_realizations,excluded_pairs\n");
            for &eps in &resolved.epsilons {
                let lr = level_statistics(def, cfg.n_sites, cfg.disorder_for(def), eps, cfg.n_realizations, cfg.base_seed)?;
                let stat = Stat::from_samples(&lr.per_realization.iter().map(|g| Some(g.mean_r)).collect::<Vec<_>>());
                let excluded = lr.per_realization.iter().map(|g| g.n_excluded).sum();
                let h = histogram_of(&lr.spacings, cfg.analyses.histogram_bins, 4.0);
                let f = slug(&format!("spacings_{}_{}.csv", def.name, eps_tag(eps)));
                out.write(&f, h.to_csv())?;
                table.push_str(&format!("{eps},{},{},{},{excluded}\n", stat.mean, stat.stderr, stat.n));
                summary.level_stats.push(LevelSummary {
                    protocol: def.name.clone(),
                    epsilon: eps,
                    dim: lr.dim,
                    mean_r: stat,
                    excluded_pairs: excluded,
                    histogram_file: f,
                });
            }
            out.write(&slug(&format!("levels_{}.csv", def.name)), table)?;
        }
    }

    if mode.identities(cfg) {
        let report = identity_report(&resolved.protocols, &cfg.analyses.scaling_grid)?;
        out.write_json("identity_report.json", &report)?;
        summary.identity_report = Some("identity_report.json".into());
    }

    out.write_json("summary.json", &summary)?;
    let manifest = Manifest {
        tool: "qfloq".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        mode,
        config: snapshot,
        realization_seeds: (0..cfg.n_realizations as u64).map(|r| ensemble_seed(cfg.base_seed, r)).collect(),
        threads: rayon::current_num_threads(),
        started_unix,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        files: out.files().to_vec(),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(dir.join("manifest.json"), text)?;
    Ok(summary)
}
