use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use qudit_floquet::disorder::{sample_disorder, StaticLayerParams};
use qudit_floquet::kick::KickSpec;
use qudit_floquet::levels::{
    build_floquet_matrix, eigenphases, gap_ratio, gap_ratio_linear, normalized_spacings, spacing_histogram,
    DEFAULT_DENSE_CAP, GOE_MEAN_R, POISSON_MEAN_R,
};
use qudit_floquet::{ChainShape, FloquetCircuit, FloquetProtocol, QuditState};

#[test]
fn poisson_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut x = 0.0;
    let levels: Vec<f64> = (0..100_001)
        .map(|_| {
            let gap: f64 = Exp1.sample(&mut rng);
            x += gap;
            x
        })
        .collect();
    let r = gap_ratio_linear(&levels).unwrap();
    assert!((r.mean_r - POISSON_MEAN_R).abs() < 0.01, "{}", r.mean_r);
    assert_eq!(r.n_used, 99_999);
}

#[test]
fn poisson_on_the_circle() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let tau = 2.0 * std::f64::consts::PI;
    let phases: Vec<f64> = (0..20_000).map(|_| rand::Rng::random::<f64>(&mut rng) * tau).collect();
    let r = gap_ratio(&phases).unwrap();
    assert!((r.mean_r - POISSON_MEAN_R).abs() < 0.01, "{}", r.mean_r);
}

#[test]
fn goe_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let dim = 500;
    let mut total = 0.0;
    let mut used = 0;
    for _ in 0..20 {
        let a = DMatrix::<f64>::from_fn(dim, dim, |_, _| StandardNormal.sample(&mut rng));
        let h = (&a + a.transpose()) * std::f64::consts::FRAC_1_SQRT_2;
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let r = gap_ratio_linear(&ev).unwrap();
        total += r.mean_r * r.n_used as f64;
        used += r.n_used;
    }
    let mean = total / used as f64;
    assert!((mean - GOE_MEAN_R).abs() < 0.01, "{mean}");
}

#[test]
fn exponential_spacings_histogram() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let tau = 2.0 * std::f64::consts::PI;
    let mut phases: Vec<f64> = (0..50_000).map(|_| rand::Rng::random::<f64>(&mut rng) * tau).collect();
    phases.sort_by(f64::total_cmp);
    let s = normalized_spacings(&phases).unwrap();
    assert!((s.iter().sum::<f64>() / s.len() as f64 - 1.0).abs() < 1e-12);
    let h = spacing_histogram(&phases, 20, 4.0).unwrap();
    for (c, p) in h.centers.iter().zip(&h.density) {
        assert!((p - (-c).exp()).abs() < 0.05, "P({c}) = {p}");
    }
}

#[test]
fn floquet_matrix_columns_match_evolution() {
    let shape = ChainShape::new(3, 3).unwrap();
    let r = sample_disorder(StaticLayerParams::preset_default(), shape, 5).unwrap();
    let p = FloquetProtocol::new(shape, KickSpec::global(3, 2, 0.07), r).unwrap();
    let c = FloquetCircuit::from_protocol(&p).unwrap();
    let u = build_floquet_matrix(&c, DEFAULT_DENSE_CAP).unwrap();
    for col in [0, 4, 13, 26] {
        let mut s = QuditState::basis_state(shape, col).unwrap();
        c.step(&mut s).unwrap();
        for (row, a) in s.amplitudes().iter().enumerate() {
            assert!((u[(row, col)] - a).norm() < 1e-14);
        }
    }
    let e = eigenphases(&u).unwrap();
    assert_eq!(e.phases.len(), 27);
    assert!(e.unitarity_residual < 1e-10);
}

#[test]
fn dense_cap_is_enforced() {
    let shape = ChainShape::new(9, 3).unwrap();
    let r = sample_disorder(StaticLayerParams::zero(), shape, 0).unwrap();
    let p = FloquetProtocol::new(shape, KickSpec::global(3, 2, 0.0), r).unwrap();
    let c = FloquetCircuit::from_protocol(&p).unwrap();
    assert!(build_floquet_matrix(&c, 1000).is_err());
}
