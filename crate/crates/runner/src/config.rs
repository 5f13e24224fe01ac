//! Experiment configuration: JSON schema, defaults and validation.

use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use qudit_floquet::baselines::BaselineKind;
use qudit_floquet::disorder::StaticLayerParams;
use qudit_floquet::kick::KickSpec;
use qudit_floquet::observables::ObservableSpec;

use crate::presets;

/// JSON schema of [`ExperimentConfig`].
pub const SCHEMA: &str = include_str!("../schema/experiment_config.schema.json");

pub const DEFAULT_N_PERIODS: usize = 300;
pub const DEFAULT_REALIZATIONS: usize = 20;
pub const DEFAULT_BASE_SEED: u64 = 20_250_101;

/// Default sweep grid: 16 log-spaced points in `[1e−3, 0.2]`.
pub fn default_sweep_grid() -> Vec<f64> {
    log_grid(1e-3, 0.2, 16)
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolDef {
    pub name: String,
    pub kick: KickSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disorder: Option<StaticLayerParams>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub observables: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProtocolRef {
    Preset(String),
    Explicit(ProtocolDef),
}

impl ProtocolRef {
    pub fn resolve(&self) -> Option<ProtocolDef> {
        match self {
            Self::Preset(name) => presets::protocol(name),
            Self::Explicit(def) => Some(def.clone()),
        }
    }
}

/// An initial single-site state; the chain starts in its tensor power.
///
/// Labels: `L0`..`L14` (the d=4 preparation table), `ket:k`, or
/// `sup:a,b,...` for the equal superposition of the listed levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    Label(String),
    Vector { site_vector: Vec<Complex64> },
}

impl Default for InitialState {
    fn default() -> Self {
        Self::Label("ket:0".into())
    }
}

const TABLE_LABELS: [&[usize]; 15] = [
    &[0],
    &[1],
    &[2],
    &[3],
    &[0, 1],
    &[0, 2],
    &[1, 2],
    &[2, 3],
    &[1, 3],
    &[3, 0],
    &[0, 1, 2],
    &[1, 2, 3],
    &[2, 3, 0],
    &[3, 0, 1],
    &[0, 1, 2, 3],
];

impl InitialState {
    /// File-name-safe label; vectors are spelled out as rounded amplitudes
    /// so distinct states never share output files.
    pub fn tag(&self) -> String {
        match self {
            Self::Label(l) => l.replace([':', ','], "_"),
            Self::Vector { site_vector } => {
                let part = |x: f64| {
                    let s = format!("{:.4}", x);
                    let s = s.trim_end_matches('0').trim_end_matches('.');
                    if s == "-0" { "0".to_string() } else { s.to_string() }
                };
                let amps: Vec<String> = site_vector
                    .iter()
                    .map(|z| if z.im.abs() < 5e-5 { part(z.re) } else { format!("{}{}{}i", part(z.re), if z.im < 0.0 { "" } else { "+" }, part(z.im)) })
                    .collect();
                format!("vec_{}", amps.join("_"))
            }
        }
    }

    pub fn site_vector(&self, d: usize) -> Result<Vec<Complex64>, String> {
        let levels: Vec<usize> = match self {
            Self::Vector { site_vector } => {
                if site_vector.len() != d {
                    return Err(format!("site vector has {} entries, local dimension is {d}", site_vector.len()));
                }
                let norm: f64 = site_vector.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if (norm - 1.0).abs() > 1e-12 {
                    return Err(format!("site vector has norm {norm}, expected 1"));
                }
                return Ok(site_vector.clone());
            }
            Self::Label(label) => {
                if let Some(k) = label.strip_prefix('L').and_then(|s| s.parse::<usize>().ok()) {
                    let Some(levels) = TABLE_LABELS.get(k) else {
                        return Err(format!("label {label} is not in L0..L14"));
                    };
                    levels.to_vec()
                } else if let Some(k) = label.strip_prefix("ket:") {
                    vec![k.trim().parse().map_err(|_| format!("bad level in '{label}'"))?]
                } else if let Some(list) = label.strip_prefix("sup:") {
                    list.split(',')
                        .map(|s| s.trim().parse().map_err(|_| format!("bad level in '{label}'")))
                        .collect::<Result<_, _>>()?
                } else {
                    return Err(format!("unknown state label '{label}'"));
                }
            }
        };
        if levels.is_empty() {
            return Err("empty level list".into());
        }
        if let Some(&l) = levels.iter().find(|&&l| l >= d) {
            return Err(format!("level {l} does not exist for d = {d}"));
        }
        let mut v = vec![Complex64::new(0.0, 0.0); d];
        let a = 1.0 / (levels.len() as f64).sqrt();
        for l in levels {
            v[l] += a;
        }
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err("repeated levels in superposition".into());
        }
        Ok(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Analyses {
    /// Subharmonic orders to measure; empty means the protocol's block cycles.
    #[serde(default)]
    pub targets: Vec<usize>,
    #[serde(default = "default_half_window")]
    pub half_window: usize,
    #[serde(default)]
    pub spectrum_stats: bool,
    #[serde(default)]
    pub identities: bool,
    #[serde(default)]
    pub baselines: Vec<BaselineKind>,
    #[serde(default = "default_histogram_bins")]
    pub histogram_bins: usize,
    /// ε grid of the charged-scaling fit in the identity report.
    #[serde(default = "default_scaling_grid")]
    pub scaling_grid: Vec<f64>,
}

fn default_half_window() -> usize {
    qudit_floquet::spectral::DEFAULT_HALF_WINDOW
}

fn default_histogram_bins() -> usize {
    40
}

fn default_scaling_grid() -> Vec<f64> {
    log_grid(1e-3, 1e-1, 9)
}

impl Default for Analyses {
    fn default() -> Self {
        Self {
            targets: Vec::new(),
            half_window: default_half_window(),
            spectrum_stats: false,
            identities: false,
            baselines: Vec::new(),
            histogram_bins: default_histogram_bins(),
            scaling_grid: default_scaling_grid(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub protocols: Vec<ProtocolRef>,
    pub n_sites: usize,
    /// Explicit ε values; sweeps fall back to the default grid when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    #[serde(default = "default_states")]
    pub initial_states: Vec<InitialState>,
    #[serde(default = "default_periods")]
    pub n_periods: usize,
    #[serde(default = "default_realizations")]
    pub n_realizations: usize,
    #[serde(default = "default_seed")]
    pub base_seed: u64,
    /// Overrides every protocol's disorder box.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disorder: Option<StaticLayerParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observables: Option<Vec<String>>,
    #[serde(default)]
    pub analyses: Analyses,
    /// Relative to the output root; defaults to `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

fn default_states() -> Vec<InitialState> {
    vec![InitialState::default()]
}

fn default_periods() -> usize {
    DEFAULT_N_PERIODS
}

fn default_realizations() -> usize {
    DEFAULT_REALIZATIONS
}

fn default_seed() -> u64 {
    DEFAULT_BASE_SEED
}

/// A validation failure at a JSON field path such as `epsilons[2]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("invalid config:\n{}", .0.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<FieldError>),
}

/// What a config resolves to before any simulation.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub protocols: Vec<ProtocolDef>,
    pub epsilons: Vec<f64>,
    pub site_vectors: Vec<Vec<Vec<Complex64>>>,
    pub observables: Vec<Vec<ObservableSpec>>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        // a manifest carries its config snapshot
        let value = match value.get("config") {
            Some(c) if value.get("files").is_some() => c.clone(),
            _ => value,
        };
        serde_json::from_value(value).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Reads a config file, or a shipped experiment preset by name.
    pub fn load(source: &str) -> Result<Self, ConfigError> {
        if let Some(text) = presets::experiment(source) {
            return Self::from_json(text);
        }
        let path = Path::new(source);
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io { path: source.into(), source: e })?;
        Self::from_json(&text)
    }

    pub fn output_name(&self) -> String {
        self.output_dir.clone().unwrap_or_else(|| self.name.clone())
    }

    /// Checks every field and resolves presets. `sweep` enables the default grid.
    pub fn resolve(&self, sweep: bool) -> Result<Resolved, ConfigError> {
        let mut errs = Vec::new();
        let mut err = |path: String, message: String| errs.push(FieldError { path, message });
        if self.name.trim().is_empty() {
            err("name".into(), "must not be empty".into());
        }
        if self.n_sites < 2 {
            err("n_sites".into(), "need at least 2 sites".into());
        }
        if self.n_periods < 2 {
            err("n_periods".into(), "N_t must be at least 2".into());
        }
        if self.n_realizations == 0 {
            err("n_realizations".into(), "need at least one realization".into());
        }
        let epsilons = match (&self.epsilons, sweep) {
            (Some(e), _) => e.clone(),
            (None, true) => default_sweep_grid(),
            (None, false) => {
                err("epsilons".into(), "required outside sweeps".into());
                Vec::new()
            }
        };
        if self.epsilons.as_ref().is_some_and(|e| e.is_empty()) {
            err("epsilons".into(), "must not be empty".into());
        }
        for (i, e) in epsilons.iter().enumerate() {
            if !e.is_finite() {
                err(format!("epsilons[{i}]"), "must be finite".into());
            }
        }
        if self.protocols.is_empty() {
            err("protocols".into(), "must list at least one protocol".into());
        }
        if self.initial_states.is_empty() {
            err("initial_states".into(), "must list at least one state".into());
        }
        for (j, s) in self.initial_states.iter().enumerate() {
            if self.initial_states[..j].iter().any(|t| t.tag() == s.tag()) {
                err(format!("initial_states[{j}]"), format!("duplicates an earlier state (tag '{}')", s.tag()));
            }
        }
        for (i, &m) in self.analyses.targets.iter().enumerate() {
            if m < 2 {
                err(format!("analyses.targets[{i}]"), "subharmonic order must be at least 2".into());
            }
        }
        for (i, b) in self.analyses.baselines.iter().enumerate() {
            if let BaselineKind::Plain { lambda } = b {
                if !(0.0..=1.0).contains(lambda) {
                    err(format!("analyses.baselines[{i}].lambda"), "must lie in [0, 1]".into());
                }
            }
        }
        let mut protocols = Vec::new();
        let mut site_vectors = Vec::new();
        let mut observables = Vec::new();
        for (i, p) in self.protocols.iter().enumerate() {
            let Some(def) = p.resolve() else {
                let ProtocolRef::Preset(name) = p else { unreachable!() };
                err(format!("protocols[{i}]"), format!("unknown preset '{name}'"));
                continue;
            };
            if let Err(e) = def.kick.validate() {
                err(format!("protocols[{i}].kick"), e.to_string());
                continue;
            }
            let d = def.kick.local_dim;
            if let Err(e) = qudit_floquet::ChainShape::new(self.n_sites, d) {
                err("n_sites".into(), format!("{e}; reduce n_sites for d = {d}"));
            }
            let mut vecs = Vec::new();
            for (j, s) in self.initial_states.iter().enumerate() {
                match s.site_vector(d) {
                    Ok(v) => vecs.push(v),
                    Err(e) => err(format!("initial_states[{j}]"), format!("{e} (protocol '{}')", def.name)),
                }
            }
            let names = self.observables.clone().unwrap_or_else(|| {
                if def.observables.is_empty() { vec!["Mz".into()] } else { def.observables.clone() }
            });
            let mut obs = Vec::new();
            for (j, n) in names.iter().enumerate() {
                match ObservableSpec::from_name(n) {
                    Ok(o) => obs.push(o),
                    Err(e) => err(format!("observables[{j}]"), e.to_string()),
                }
            }
            site_vectors.push(vecs);
            observables.push(obs);
            protocols.push(def);
        }
        if !errs.is_empty() {
            return Err(ConfigError::Invalid(errs));
        }
        Ok(Resolved { protocols, epsilons, site_vectors, observables })
    }

    pub fn disorder_for(&self, p: &ProtocolDef) -> StaticLayerParams {
        self.disorder.or(p.disorder).unwrap_or_default()
    }

    /// Requested subharmonic orders, or the protocol's own cycles.
    pub fn targets_for(&self, p: &ProtocolDef) -> Vec<usize> {
        if !self.analyses.targets.is_empty() {
            return self.analyses.targets.clone();
        }
        let mut t: Vec<usize> = match p.kick.block_cycles() {
            Some(c) => c.to_vec(),
            None => vec![p.kick.cycle_order().max(2)],
        };
        t.sort_unstable();
        t.dedup();
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> ExperimentConfig {
        ExperimentConfig::from_json(r#"{"name":"t","protocols":["d3-embedded-2T"],"n_sites":4,"epsilons":[0.0]}"#)
            .unwrap()
    }

    #[test]
    fn defaults() {
        let c = minimal();
        assert_eq!((c.n_periods, c.n_realizations), (DEFAULT_N_PERIODS, DEFAULT_REALIZATIONS));
        let r = c.resolve(false).unwrap();
        assert_eq!(r.site_vectors[0][0][0], Complex64::new(1.0, 0.0));
        assert_eq!(c.targets_for(&r.protocols[0]), vec![2]);
    }

    #[test]
    fn empty_epsilon_list_is_rejected() {
        let mut c = minimal();
        c.epsilons = Some(vec![]);
        let ConfigError::Invalid(errs) = c.resolve(false).unwrap_err() else { panic!() };
        assert!(errs.iter().any(|e| e.path == "epsilons"));
    }

    #[test]
    fn field_paths_are_reported() {
        let mut c = minimal();
        c.epsilons = Some(vec![0.1, f64::NAN]);
        c.protocols.push(ProtocolRef::Preset("nope".into()));
        c.n_periods = 1;
        let ConfigError::Invalid(errs) = c.resolve(false).unwrap_err() else { panic!() };
        let paths: Vec<&str> = errs.iter().map(|e| e.path.as_str()).collect();
        assert!(paths.contains(&"epsilons[1]"));
        assert!(paths.contains(&"protocols[1]"));
        assert!(paths.contains(&"n_periods"));
    }

    #[test]
    fn sweep_uses_default_grid() {
        let mut c = minimal();
        c.epsilons = None;
        assert!(c.resolve(false).is_err());
        let r = c.resolve(true).unwrap();
        assert_eq!(r.epsilons.len(), 16);
        assert!((r.epsilons[0] - 1e-3).abs() < 1e-15 && (r.epsilons[15] - 0.2).abs() < 1e-14);
    }

    #[test]
    fn table_labels() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v = InitialState::Label("L8".into()).site_vector(4).unwrap();
        for (a, b) in v.iter().zip([0.0, h, 0.0, h]) {
            assert!((a - b).norm() < 1e-15);
        }
        assert!(InitialState::Label("L15".into()).site_vector(4).is_err());
        assert!(InitialState::Label("L3".into()).site_vector(3).is_err());
        assert!(InitialState::Label("sup:0,0".into()).site_vector(3).is_err());
        let v = InitialState::Label("sup:0,2,4".into()).site_vector(5).unwrap();
        assert!((v[2].re - 1.0 / 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn vector_tags_are_distinct() {
        let a = InitialState::Vector { site_vector: vec![Complex64::new(0.6, 0.0), Complex64::new(0.0, -0.8)] };
        let b = InitialState::Vector { site_vector: vec![Complex64::new(0.8, 0.0), Complex64::new(0.6, 0.0)] };
        assert_eq!(a.tag(), "vec_0.6_0-0.8i");
        assert_eq!(b.tag(), "vec_0.8_0.6");
        let mut c = minimal();
        c.initial_states = vec![InitialState::Label("ket:0".into()), InitialState::Label("ket:0".into())];
        let ConfigError::Invalid(errs) = c.resolve(false).unwrap_err() else { panic!() };
        assert_eq!(errs[0].path, "initial_states[1]");
    }

    #[test]
    fn memory_cap_is_actionable() {
        let mut c = minimal();
        c.n_sites = 40;
        let ConfigError::Invalid(errs) = c.resolve(false).unwrap_err() else { panic!() };
        assert!(errs.iter().any(|e| e.path == "n_sites" && e.message.contains("reduce n_sites")));
    }

    #[test]
    fn manifest_snapshot_is_accepted() {
        let inner = serde_json::to_value(minimal()).unwrap();
        let wrapped = serde_json::json!({"config": inner, "files": []});
        assert_eq!(ExperimentConfig::from_json(&wrapped.to_string()).unwrap(), minimal());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"name":"t","protocols":[],"n_sites":4,"bogus":1}"#).is_err());
    }
}
