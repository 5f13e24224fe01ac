use proptest::prelude::*;
use qudit_floquet::disorder::{sample_disorder, DiagonalHamiltonian, DisorderRealization, PhaseLayer, StaticLayerParams};
use qudit_floquet::kick::{compile_kick, KickSpec};
use qudit_floquet::levels::gap_ratio;
use qudit_floquet::linalg::{self, CMatrix};
use qudit_floquet::normal_form::grade;
use qudit_floquet::spectral::{periodogram, subharmonic_weight};
use qudit_floquet::{ChainShape, Complex64, FloquetCircuit, FloquetProtocol, QuditState, SiteOperator};

fn hermitian(d: usize, xs: &[f64]) -> CMatrix {
    let a = CMatrix::from_fn(d, d, |r, c| Complex64::new(xs[r * d + c], xs[d * d + r * d + c]));
    (&a + a.adjoint()).scale(0.5)
}

fn unitary(d: usize, xs: &[f64]) -> SiteOperator {
    SiteOperator::unitary(linalg::expm_hermitian(&hermitian(d, xs), 1.0).unwrap()).unwrap()
}

fn state(shape: ChainShape, xs: &[f64]) -> QuditState {
    let amps: Vec<Complex64> = (0..shape.dim()).map(|k| Complex64::new(xs[2 * k], xs[2 * k + 1])).collect();
    let n = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt().max(1e-3);
    let mut amps: Vec<Complex64> = amps.iter().map(|a| a / n).collect();
    if n <= 1e-3 {
        amps = vec![Complex64::new(0.0, 0.0); shape.dim()];
        amps[0] = Complex64::new(1.0, 0.0);
    }
    QuditState::from_amplitudes(shape, amps).unwrap()
}

fn kicks(d: usize) -> Vec<KickSpec> {
    match d {
        3 => vec![
            KickSpec::embedded(3, vec![vec![0, 2]], vec![2], 0.0),
            KickSpec::global(3, 2, 0.0),
            KickSpec::embedded(3, vec![vec![0, 1, 2]], vec![3], 0.0),
            KickSpec::global(3, 3, 0.0),
        ],
        4 => vec![
            KickSpec::embedded(4, vec![vec![0, 3], vec![1, 2]], vec![2, 2], 0.0),
            KickSpec::embedded(4, vec![vec![0, 1, 2, 3]], vec![4], 0.0),
        ],
        _ => vec![KickSpec::embedded(5, vec![vec![0, 2, 4], vec![1, 3]], vec![3, 2], 0.0)],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn site_unitaries_preserve_norm(
        xs in prop::collection::vec(-1.0f64..1.0, 2 * 81),
        hs in prop::collection::vec(-2.0f64..2.0, 18),
        site in 0usize..4,
    ) {
        let shape = ChainShape::new(4, 3).unwrap();
        let mut s = state(shape, &xs);
        s.apply_single_site_unitary(site, &unitary(3, &hs)).unwrap();
        prop_assert!((s.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gates_are_local(
        xs in prop::collection::vec(-1.0f64..1.0, 2 * 64),
        hs in prop::collection::vec(-2.0f64..2.0, 32),
        site in 0usize..3,
        other in 0usize..3,
    ) {
        prop_assume!(site != other);
        let shape = ChainShape::new(3, 4).unwrap();
        let mut s = state(shape, &xs);
        let before = s.reduced_density(other).unwrap();
        s.apply_single_site_unitary(site, &unitary(4, &hs)).unwrap();
        prop_assert!(linalg::max_abs(&(s.reduced_density(other).unwrap() - before)) < 1e-12);
    }

    #[test]
    fn floquet_period_preserves_norm(
        xs in prop::collection::vec(-1.0f64..1.0, 2 * 125),
        eps in 0.0f64..0.2,
        seed in any::<u64>(),
    ) {
        let shape = ChainShape::new(3, 5).unwrap();
        let r = sample_disorder(StaticLayerParams::preset_default(), shape, seed).unwrap();
        let p = FloquetProtocol::new(shape, kicks(5)[0].with_epsilon(eps), r).unwrap();
        let c = FloquetCircuit::from_protocol(&p).unwrap();
        let mut s = state(shape, &xs);
        for _ in 0..5 {
            c.step(&mut s).unwrap();
        }
        prop_assert!((s.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn subharmonic_weight_ignores_scale_and_offset(
        xs in prop::collection::vec(-1.0f64..1.0, 64),
        a in prop_oneof![-10.0f64..-0.1, 0.1f64..10.0],
        b in -5.0f64..5.0,
        m in 2usize..5,
    ) {
        let s = periodogram(&xs).unwrap();
        let t = periodogram(&xs.iter().map(|x| a * x + b).collect::<Vec<_>>()).unwrap();
        match (subharmonic_weight(&s, m), subharmonic_weight(&t, m)) {
            (Some(u), Some(v)) => prop_assert!((u - v).abs() < 1e-9),
            (u, v) => prop_assert_eq!(u.is_some(), v.is_some()),
        }
    }

    #[test]
    fn parseval(xs in prop::collection::vec(-3.0f64..3.0, 2..200)) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let energy: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
        let s = periodogram(&xs).unwrap();
        prop_assert!((s.total_power() - n * energy).abs() <= 1e-9 * (1.0 + n * energy));
    }

    #[test]
    fn charge_components_sum_back(d in 3usize..6, hs in prop::collection::vec(-1.0f64..1.0, 50), pick in 0usize..4) {
        let specs = kicks(d);
        let spec = &specs[pick % specs.len()];
        let k = compile_kick(spec).unwrap();
        let x = hermitian(d, &hs);
        let g = grade(&x, k.carrier()).unwrap();
        prop_assert!(linalg::max_abs(&(g.reconstruct() - &x)) < 1e-12);
        // every component carries its charge under the rephased carrier
        let m = g.order();
        for q in 0..m {
            let phase = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * q as f64 / m as f64);
            let c = g.component(q);
            prop_assert!(linalg::max_abs(&(k.carrier().conjugate(c) - c * phase)) < 1e-12);
        }
    }

    #[test]
    fn gap_ratio_is_rotation_invariant(
        raw in prop::collection::vec(0.0f64..1.0, 8..60),
        shift in -10.0f64..10.0,
    ) {
        let tau = 2.0 * std::f64::consts::PI;
        let phases: Vec<f64> = raw.iter().map(|u| u * tau).collect();
        let rotated: Vec<f64> = phases.iter().map(|p| (p + shift).rem_euclid(tau)).collect();
        let a = gap_ratio(&phases).unwrap();
        let b = gap_ratio(&rotated).unwrap();
        prop_assert!((a.mean_r - b.mean_r).abs() < 1e-9);
    }

    #[test]
    fn static_layer_is_additive(
        h1 in prop::collection::vec(-3.0f64..3.0, 4),
        j1 in prop::collection::vec(-3.0f64..3.0, 3),
        h2 in prop::collection::vec(-3.0f64..3.0, 4),
        j2 in prop::collection::vec(-3.0f64..3.0, 3),
        xs in prop::collection::vec(-1.0f64..1.0, 2 * 81),
    ) {
        let shape = ChainShape::new(4, 3).unwrap();
        let r1 = DisorderRealization::from_values(h1, j1).unwrap();
        let r2 = DisorderRealization::from_values(h2, j2).unwrap();
        let a = DiagonalHamiltonian::from_realization(shape, &r1).unwrap();
        let b = DiagonalHamiltonian::from_realization(shape, &r2).unwrap();
        let ab = a.add(&b).unwrap();
        for idx in 0..shape.dim() {
            let e = a.energy(idx).unwrap() + b.energy(idx).unwrap();
            prop_assert!((ab.energy(idx).unwrap() - e).abs() < 1e-12);
        }
        let mut s1 = state(shape, &xs);
        let mut s2 = s1.clone();
        PhaseLayer::new(a).apply(&mut s1).unwrap();
        PhaseLayer::new(b).apply(&mut s1).unwrap();
        PhaseLayer::new(ab).apply(&mut s2).unwrap();
        let diff = s1.amplitudes().iter().zip(s2.amplitudes()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        prop_assert!(diff < 1e-12);
    }

    #[test]
    fn cached_and_streamed_phase_layers_agree(seed in any::<u64>(), xs in prop::collection::vec(-1.0f64..1.0, 2 * 256)) {
        let shape = ChainShape::new(4, 4).unwrap();
        let r = sample_disorder(StaticLayerParams::preset_default(), shape, seed).unwrap();
        let ham = DiagonalHamiltonian::from_realization(shape, &r).unwrap();
        let mut a = state(shape, &xs);
        let mut b = a.clone();
        PhaseLayer::cached(ham.clone()).apply(&mut a).unwrap();
        PhaseLayer::on_the_fly(ham).apply(&mut b).unwrap();
        prop_assert_eq!(a.amplitudes(), b.amplitudes());
    }
}
