use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;

use qudit_floquet_runner::config::{ConfigError, ExperimentConfig, SCHEMA};
use qudit_floquet_runner::experiment::{execute, Manifest, Mode, Summary};
use qudit_floquet_runner::output::{sha256_hex, verify};
use qudit_floquet_runner::plot::{render_all, PlotIndex};

fn cfg(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(text).unwrap()
}

fn small_run() -> ExperimentConfig {
    cfg(r#"{
        "name": "small",
        "protocols": ["d3-embedded-2T", "d3-global-2T"],
        "n_sites": 4,
        "epsilons": [0.0, 0.05],
        "initial_states": ["ket:0", "sup:0,2"],
        "n_periods": 64,
        "n_realizations": 3,
        "base_seed": 9
    }"#)
}

fn read_manifest(dir: &Path) -> Manifest {
    serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

fn listing(dir: &Path) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let e = e.unwrap();
        if e.file_type().unwrap().is_file() {
            out.insert(e.file_name().into_string().unwrap());
        }
    }
    out
}

#[test]
fn zero_disorder_embedded_2t_locks_exactly() {
    let c = cfg(r#"{
        "name": "lock",
        "protocols": ["d3-embedded-2T"],
        "n_sites": 6,
        "epsilons": [0.0],
        "n_periods": 300,
        "n_realizations": 2,
        "disorder": {"field_halfwidth": 0.0, "coupling_center": 0.0, "coupling_halfwidth": 0.0}
    }"#);
    let tmp = tempfile::tempdir().unwrap();
    let s = execute(&c, Mode::Run, tmp.path()).unwrap();
    let l = &s.cases[0].lines[0];
    assert_eq!((l.column.as_str(), l.m), ("Mz", 2));
    assert!((l.weight.mean - 1.0).abs() < 1e-9, "{}", l.weight.mean);
}

#[test]
fn trimer_only_state_gives_single_third_line() {
    let c = cfg(r#"{
        "name": "trimer",
        "protocols": ["d5-mixed"],
        "n_sites": 4,
        "epsilons": [0.02],
        "initial_states": ["ket:0"],
        "n_periods": 300,
        "n_realizations": 2,
        "observables": ["Mz"],
        "analyses": {"targets": [2, 3]}
    }"#);
    let tmp = tempfile::tempdir().unwrap();
    let s = execute(&c, Mode::Run, tmp.path()).unwrap();
    let lines = &s.cases[0].lines;
    let c2 = lines.iter().find(|l| l.m == 2).unwrap().weight.mean;
    let c3 = lines.iter().find(|l| l.m == 3).unwrap().weight.mean;
    let floor = 1.0 / 300.0;
    assert!(c3 >= 10.0 * floor, "C3 = {c3}");
    assert!(c2 <= floor, "C2 = {c2}");
    assert_eq!(s.cases[0].block_weights.as_deref(), Some(&[1.0, 0.0][..]));
}

#[test]
fn empty_epsilon_list_is_rejected() {
    let c = cfg(r#"{"name":"e","protocols":["d3-embedded-2T"],"n_sites":4,"epsilons":[]}"#);
    match c.resolve(true) {
        Err(ConfigError::Invalid(errs)) => assert!(errs.iter().any(|e| e.path == "epsilons"), "{errs:?}"),
        other => panic!("expected a validation error, got {other:?}"),
    }
    let tmp = tempfile::tempdir().unwrap();
    assert!(execute(&c, Mode::Sweep, tmp.path()).is_err());
    assert!(!tmp.path().join("manifest.json").exists());
}

#[test]
fn run_needs_epsilons_but_sweep_has_a_default_grid() {
    let c = cfg(r#"{"name":"g","protocols":["d3-embedded-2T"],"n_sites":3}"#);
    assert!(c.resolve(false).is_err());
    assert_eq!(c.resolve(true).unwrap().epsilons.len(), 16);
}

#[test]
fn oversized_chain_fails_with_field_path() {
    let c = cfg(r#"{"name":"big","protocols":["d5-mixed"],"n_sites":40,"epsilons":[0.0]}"#);
    let msg = c.resolve(false).unwrap_err().to_string();
    assert!(msg.contains("n_sites") && msg.contains("reduce"), "{msg}");
    let c = cfg(r#"{"name":"dense","protocols":["d3-embedded-2T"],"n_sites":9,"epsilons":[0.0]}"#);
    let tmp = tempfile::tempdir().unwrap();
    let msg = execute(&c, Mode::Stats, tmp.path()).unwrap_err().to_string();
    assert!(msg.contains("reduce n_sites"), "{msg}");
}

#[test]
fn outputs_are_bit_identical_across_runs_and_threads() {
    let c = small_run();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    execute(&c, Mode::Run, a.path()).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    pool.install(|| execute(&c, Mode::Run, b.path())).unwrap();
    let files = listing(a.path());
    assert_eq!(files, listing(b.path()));
    for f in files.iter().filter(|f| f.ends_with(".csv") || *f == "summary.json") {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn manifest_is_complete_and_replayable() {
    let c = small_run();
    let a = tempfile::tempdir().unwrap();
    execute(&c, Mode::Run, a.path()).unwrap();
    let m = read_manifest(a.path());
    let listed: BTreeSet<String> = m.files.iter().map(|f| f.path.clone()).collect();
    let mut on_disk = listing(a.path());
    assert!(on_disk.remove("manifest.json"));
    assert_eq!(listed, on_disk);
    assert!(verify(a.path(), &m.files).unwrap().is_empty());
    assert_eq!(m.realization_seeds.len(), 3);
    assert_eq!(m.config.epsilons.as_deref(), Some(&[0.0, 0.05][..]));

    // the manifest is itself a valid config source
    let replay = ExperimentConfig::from_json(&std::fs::read_to_string(a.path().join("manifest.json")).unwrap()).unwrap();
    let b = tempfile::tempdir().unwrap();
    execute(&replay, m.mode, b.path()).unwrap();
    for f in m.files.iter().filter(|f| f.path.ends_with(".csv")) {
        let data = std::fs::read(b.path().join(&f.path)).unwrap();
        assert_eq!(sha256_hex(&data), f.sha256, "{}", f.path);
    }
}

#[test]
fn seed_changes_disorder_dependent_outputs() {
    let mut c = small_run();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    execute(&c, Mode::Run, a.path()).unwrap();
    c.base_seed += 1;
    execute(&c, Mode::Run, b.path()).unwrap();
    let f = "timeseries_d3-embedded-2T_ket_0_eps0.050000.csv";
    assert_ne!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
}

#[test]
fn csv_headers_are_fixed() {
    let c = cfg(r#"{
        "name": "probe",
        "protocols": ["d4-cyclic-4T"],
        "n_sites": 3,
        "epsilons": [0.0],
        "n_periods": 40,
        "n_realizations": 1
    }"#);
    let tmp = tempfile::tempdir().unwrap();
    let s = execute(&c, Mode::Run, tmp.path()).unwrap();
    let ts = std::fs::read_to_string(tmp.path().join(&s.cases[0].timeseries_file)).unwrap();
    assert_eq!(ts.lines().next().unwrap(), "n,Mz,re_Omega4,im_Omega4");
    assert_eq!(ts.lines().count(), 41);
    for f in &s.cases[0].spectrum_files {
        let sp = std::fs::read_to_string(tmp.path().join(f)).unwrap();
        assert_eq!(sp.lines().next().unwrap(), "k,f,S");
    }
    let sweep = std::fs::read_to_string(tmp.path().join("sweep_d4-cyclic-4T_ket_0.csv")).unwrap();
    assert!(sweep.starts_with("epsilon,column,m,weight_mean,weight_stderr,"));
}

#[test]
fn stats_and_identities_modes() {
    let c = cfg(r#"{
        "name": "stats",
        "protocols": ["d3-embedded-2T", "d3-global-2T"],
        "n_sites": 4,
        "epsilons": [0.1],
        "n_realizations": 2,
        "analyses": {"histogram_bins": 10}
    }"#);
    let tmp = tempfile::tempdir().unwrap();
    let s = execute(&c, Mode::Stats, tmp.path()).unwrap();
    assert!(s.cases.is_empty());
    assert_eq!(s.level_stats.len(), 2);
    for l in &s.level_stats {
        assert_eq!(l.dim, 81);
        assert!(l.mean_r.mean > 0.0 && l.mean_r.mean < 1.0);
        assert!(tmp.path().join(&l.histogram_file).is_file());
    }
    assert!(tmp.path().join("levels_d3-global-2T.csv").is_file());

    let tmp = tempfile::tempdir().unwrap();
    let s = execute(&c, Mode::Identities, tmp.path()).unwrap();
    assert_eq!(s.identity_report.as_deref(), Some("identity_report.json"));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("identity_report.json")).unwrap()).unwrap();
    assert_eq!(report["all_pass"], true);
    assert_eq!(report["protocols"].as_array().unwrap().len(), 2);
}

#[test]
fn baseline_mode_records_exact_agreement() {
    let c = cfg(r#"{
        "name": "base",
        "protocols": ["d4-contiguous-2T", "d3-embedded-2T"],
        "n_sites": 3,
        "epsilons": [0.07],
        "initial_states": ["ket:0"],
        "n_periods": 50,
        "n_realizations": 2,
        "analyses": {"baselines": [{"baseline": "enc"}, {"baseline": "doublet"}, {"baseline": "plain", "lambda": 0.5}]}
    }"#);
    let tmp = tempfile::tempdir().unwrap();
    let s = execute(&c, Mode::Baseline, tmp.path()).unwrap();
    let labels: Vec<(&str, &str)> = s.baselines.iter().map(|b| (b.protocol.as_str(), b.label.as_str())).collect();
    assert_eq!(
        labels,
        vec![("d4-contiguous-2T", "enc"), ("d4-contiguous-2T", "plain0.5"), ("d3-embedded-2T", "doublet")]
    );
    for b in &s.baselines {
        match b.label.as_str() {
            "plain0.5" => assert!(b.max_deviation.is_none()),
            _ => assert!(b.max_deviation.unwrap() < 1e-10, "{}: {:?}", b.label, b.max_deviation),
        }
    }

    let none = cfg(r#"{"name":"nb","protocols":["d3-embedded-2T"],"n_sites":3,"epsilons":[0.0]}"#);
    assert!(execute(&none, Mode::Baseline, tempfile::tempdir().unwrap().path()).is_err());
}

#[test]
fn plots_are_deterministic_and_indexed() {
    let c = cfg(r#"{
        "name": "plots",
        "protocols": ["d3-embedded-2T"],
        "n_sites": 3,
        "epsilons": [0.05],
        "n_periods": 40,
        "n_realizations": 2,
        "analyses": {"spectrum_stats": true, "histogram_bins": 8}
    }"#);
    let tmp = tempfile::tempdir().unwrap();
    execute(&c, Mode::Run, tmp.path()).unwrap();
    let index = render_all(tmp.path()).unwrap();
    let manifest_sha = sha256_hex(&std::fs::read(tmp.path().join("manifest.json")).unwrap());
    assert_eq!(index.manifest_sha256, manifest_sha);
    let names: BTreeSet<&str> = index.files.iter().map(|f| f.path.as_str()).collect();
    // one timeseries, one spectrum, one sweep curve, <r> plot and one histogram
    assert_eq!(names.len(), 5, "{names:?}");
    assert!(names.contains("levels_r_vs_eps.svg"));
    let r_plot = std::fs::read_to_string(tmp.path().join("plots/levels_r_vs_eps.svg")).unwrap();
    assert!(r_plot.contains("0.3863") && r_plot.contains("0.5307"));
    for f in &index.files {
        let svg = std::fs::read_to_string(tmp.path().join("plots").join(&f.path)).unwrap();
        assert!(svg.contains(&manifest_sha), "{}", f.path);
    }
    let saved: PlotIndex =
        serde_json::from_slice(&std::fs::read(tmp.path().join("plots/index.json")).unwrap()).unwrap();
    assert_eq!(saved, index);
    assert_eq!(render_all(tmp.path()).unwrap(), index);
}

#[test]
fn plotting_lists_missing_inputs() {
    let c = small_run();
    let tmp = tempfile::tempdir().unwrap();
    let s: Summary = execute(&c, Mode::Run, tmp.path()).unwrap();
    std::fs::remove_file(tmp.path().join(&s.cases[0].timeseries_file)).unwrap();
    std::fs::remove_file(tmp.path().join(&s.cases[1].spectrum_files[0])).unwrap();
    let msg = render_all(tmp.path()).unwrap_err().to_string();
    assert!(msg.contains(&s.cases[0].timeseries_file) && msg.contains(&s.cases[1].spectrum_files[0]), "{msg}");
    assert!(render_all(&tmp.path().join("nowhere")).is_err());
}

#[test]
fn schema_covers_every_config_field() {
    let schema: serde_json::Value = serde_json::from_str(SCHEMA).unwrap();
    let props: BTreeSet<String> = schema["properties"].as_object().unwrap().keys().cloned().collect();
    let full = cfg(r#"{
        "name": "all",
        "protocols": ["d3-embedded-2T"],
        "n_sites": 3,
        "epsilons": [0.0],
        "disorder": {"field_halfwidth": 1.0, "coupling_center": 0.5, "coupling_halfwidth": 0.1},
        "observables": ["Mz"],
        "output_dir": "x"
    }"#);
    let value = serde_json::to_value(&full).unwrap();
    let fields: BTreeSet<String> = value.as_object().unwrap().keys().cloned().collect();
    assert_eq!(props, fields);
    let analyses: BTreeSet<String> =
        schema["properties"]["analyses"]["properties"].as_object().unwrap().keys().cloned().collect();
    let actual: BTreeSet<String> = value["analyses"].as_object().unwrap().keys().cloned().collect();
    assert_eq!(analyses, actual);
    let names: Vec<&str> = schema["properties"]["protocols"]["items"]["oneOf"][0]["enum"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert_eq!(names, qudit_floquet_runner::presets::PROTOCOLS);
}

#[test]
fn cli_runs_and_plots() {
    let exe = env!("CARGO_BIN_EXE_qfloq");
    let root = tempfile::tempdir().unwrap();
    let out = Command::new(exe).arg("list-presets").output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("d5_mixed"));

    let cfg_path = root.path().join("c.json");
    std::fs::write(
        &cfg_path,
        r#"{"name":"cli","protocols":["d3-embedded-2T"],"n_sites":3,"epsilons":[0.02],"n_periods":30,"n_realizations":2}"#,
    )
    .unwrap();
    let run = |extra: &[&str]| {
        Command::new(exe)
            .env("QFLOQ_OUTPUT_ROOT", root.path())
            .args(["--threads", "2", "--seed", "5", "run"])
            .arg(&cfg_path)
            .args(extra)
            .output()
            .unwrap()
    };
    let out = run(&["--plot"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = root.path().join("cli").join("run");
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), dir.display().to_string());
    assert_eq!(read_manifest(&dir).config.base_seed, 5);
    assert!(dir.join("plots/index.json").is_file());
    // a finished directory is not overwritten silently
    assert!(!run(&[]).status.success());
    assert!(run(&["--force"]).status.success());

    let bad = root.path().join("bad.json");
    std::fs::write(&bad, r#"{"name":"bad","protocols":["d9-none"],"n_sites":1,"epsilons":[]}"#).unwrap();
    let out = Command::new(exe).env("QFLOQ_OUTPUT_ROOT", root.path()).arg("run").arg(&bad).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    for path in ["n_sites", "epsilons", "protocols[0]"] {
        assert!(err.contains(path), "{err}");
    }
}
