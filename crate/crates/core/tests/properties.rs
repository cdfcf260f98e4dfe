use comember::attacks::{AttackConfig, LinearGenerator};
use comember::metrics::{dispersion_exact, dispersion_greedy, generalization_gap, GapReport};
use comember::numcore::{
    backward, clip_weights, finite_diff_grad, forward, init_params, predict, Activation, FdMode,
    NetworkSpec,
};
use proptest::prelude::*;

fn activation() -> impl Strategy<Value = Activation> {
    prop_oneof![Just(Activation::Relu), Just(Activation::Tanh), Just(Activation::Sigmoid), Just(Activation::Identity)]
}

fn spec() -> impl Strategy<Value = NetworkSpec> {
    (proptest::collection::vec(1usize..=16, 2..=5), activation(), activation())
        .prop_map(|(sizes, h, o)| NetworkSpec::new(sizes, h, o).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn backward_agrees_with_central_differences(
        spec in spec(),
        raw in proptest::collection::vec(-1.0f64..1.0, 1200),
        xs in proptest::collection::vec(-2.0f64..2.0, 16),
    ) {
        let x = &xs[..spec.input_dim()];
        let w: Vec<f64> = (0..spec.output_dim()).map(|i| 1.0 - 0.3 * i as f64).collect();
        let params = &raw[..spec.param_count()];
        let (_, tape) = forward(&spec, params, x).unwrap();
        let g = backward(&spec, params, &tape, &w).unwrap();
        let loss = |p: &[f64]| predict(&spec, p, x).unwrap().iter().zip(&w).map(|(o, c)| o * c).sum::<f64>();
        let fd = finite_diff_grad(loss, params, 1e-5, FdMode::Central);
        for (a, b) in g.params.iter().zip(&fd) {
            let scale = a.abs().max(b.abs()).max(1e-6);
            prop_assert!((a - b).abs() / scale <= 1e-4, "{} vs {}", a, b);
        }
    }

    #[test]
    fn param_count_formula(sizes in proptest::collection::vec(1usize..=20, 2..=6)) {
        let spec = NetworkSpec::new(sizes.clone(), Activation::Relu, Activation::Identity).unwrap();
        let expect: usize = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        prop_assert_eq!(init_params(&spec, 0).len(), expect);
        prop_assert_eq!(spec.param_count(), expect);
    }

    #[test]
    fn bounded_params_stay_finite(
        spec in spec(),
        raw in proptest::collection::vec(-1e3f64..1e3, 2000),
        xs in proptest::collection::vec(-1e3f64..1e3, 16),
    ) {
        let params = &raw[..spec.param_count().min(raw.len())];
        prop_assume!(params.len() == spec.param_count());
        let x = &xs[..spec.input_dim()];
        let (out, tape) = forward(&spec, params, x).unwrap();
        prop_assert!(out.iter().all(|v| v.is_finite()));
        let g = backward(&spec, params, &tape, &vec![1.0; spec.output_dim()]).unwrap();
        prop_assert!(g.params.iter().chain(&g.input).all(|v| !v.is_nan()));
    }

    #[test]
    fn clipping_is_idempotent(mut p in proptest::collection::vec(-10.0f64..10.0, 1..50), c in 0.001f64..5.0) {
        clip_weights(&mut p, c);
        let once = p.clone();
        clip_weights(&mut p, c);
        prop_assert_eq!(p, once);
    }

    #[test]
    fn gap_flips_sign_when_samples_swap(
        a in proptest::collection::vec(0.0f64..5.0, 1..20),
        b in proptest::collection::vec(0.0f64..5.0, 1..20),
    ) {
        let fwd = GapReport::from_losses(a.clone(), b.clone());
        let back = GapReport::from_losses(b, a);
        prop_assert!((fwd.gap + back.gap).abs() < 1e-12);
    }

    #[test]
    fn dispersion_sandwich(
        pts in proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, 3), 2..=12),
        k in 2usize..=6,
    ) {
        prop_assume!(k <= pts.len());
        let exact = dispersion_exact(&pts, k).unwrap().value;
        let greedy = dispersion_greedy(&pts, k).unwrap().value;
        prop_assert!(exact >= greedy && greedy >= 0.5 * exact);
        if k == 2 {
            prop_assert_eq!(exact, greedy);
        }
    }
}

#[test]
fn identical_samples_have_no_gap() {
    let gen = LinearGenerator { rows: vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]] };
    let cfg = AttackConfig { hidden: vec![4], iterations: 30, restarts: 1, ..AttackConfig::default() };
    let xs = vec![vec![0.1, 0.2, 0.3], vec![0.9, 0.4, 0.2]];
    let r = generalization_gap(&gen, &xs, &xs, &cfg).unwrap();
    assert_eq!(r.gap, 0.0);
    assert_eq!(r.train_losses, r.test_losses);
    let swapped = generalization_gap(&gen, &xs[..1], &xs[1..], &cfg).unwrap();
    let back = generalization_gap(&gen, &xs[1..], &xs[..1], &cfg).unwrap();
    assert_eq!(swapped.gap, -back.gap);
}
