//! Named protocols and shipped experiment configs.

use qudit_floquet::kick::KickSpec;

use crate::config::ProtocolDef;

pub const PROTOCOLS: [&str; 9] = [
    "d3-embedded-2T",
    "d3-global-2T",
    "d3-embedded-3T",
    "d3-global-3T",
    "d4-symmetric-2T",
    "d4-contiguous-2T",
    "d4-trimer-3T",
    "d4-cyclic-4T",
    "d5-mixed",
];

pub fn protocol(name: &str) -> Option<ProtocolDef> {
    let kick = match name {
        "d3-embedded-2T" => KickSpec::embedded(3, vec![vec![0, 2]], vec![2], 0.0),
        "d3-global-2T" => KickSpec::global(3, 2, 0.0),
        "d3-embedded-3T" => KickSpec::embedded(3, vec![vec![0, 1, 2]], vec![3], 0.0),
        "d3-global-3T" => KickSpec::global(3, 3, 0.0),
        "d4-symmetric-2T" => KickSpec::embedded(4, vec![vec![0, 3], vec![1, 2]], vec![2, 2], 0.0),
        "d4-contiguous-2T" => KickSpec::embedded(4, vec![vec![0, 1], vec![2, 3]], vec![2, 2], 0.0),
        "d4-trimer-3T" => KickSpec::embedded(4, vec![vec![0, 1, 2]], vec![3], 0.0),
        "d4-cyclic-4T" => KickSpec::embedded(4, vec![vec![0, 1, 2, 3]], vec![4], 0.0),
        "d5-mixed" => KickSpec::embedded(5, vec![vec![0, 2, 4], vec![1, 3]], vec![3, 2], 0.0),
        _ => return None,
    };
    let observables = match name {
        "d4-cyclic-4T" => vec!["Mz".into(), "Omega4".into()],
        "d5-mixed" => vec!["Mz".into(), "block:Mz".into()],
        _ => Vec::new(),
    };
    Some(ProtocolDef { name: name.into(), kick, disorder: None, observables })
}

pub const EXPERIMENTS: [(&str, &str); 7] = [
    ("r_vs_eps", include_str!("../presets/r_vs_eps.json")),
    ("d3_robustness", include_str!("../presets/d3_robustness.json")),
    ("d4_partitions", include_str!("../presets/d4_partitions.json")),
    ("d5_mixed", include_str!("../presets/d5_mixed.json")),
    ("size_effects", include_str!("../presets/size_effects.json")),
    ("baselines", include_str!("../presets/baselines.json")),
    ("d4_34", include_str!("../presets/d4_34.json")),
];

pub fn experiment(name: &str) -> Option<&'static str> {
    EXPERIMENTS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}
