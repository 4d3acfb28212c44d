use mcpinn::config::Ini;
use mcpinn::estimator::{group_queries, EstimatorConfig, PdeCoefficients, ResidualPoint, SampleGroup};
use mcpinn::fmt::fmt_f64;
use mcpinn::net::{directional_derivative, init_params, parse_checkpoint, checkpoint_string, NetworkSpec};
use mcpinn::problems::{Ansatz, ProblemSpec};
use mcpinn::rng::RngKey;
use mcpinn::sampling::sample_beta_power;
use mcpinn::special::{gamma, mittag_leffler};
use mcpinn::train::relative_l2;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn gamma_recurrence(x in 0.1f64..20.0) {
        let lhs = gamma(x + 1.0).unwrap();
        let rhs = x * gamma(x).unwrap();
        prop_assert!((lhs / rhs - 1.0).abs() < 1e-11, "x={x}: {lhs} vs {rhs}");
    }

    #[test]
    fn mittag_leffler_one_one_is_exp(t in -5.0f64..5.0) {
        let e = mittag_leffler(1.0, 1.0, t).unwrap();
        prop_assert!((e / t.exp() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn numbers_round_trip(x in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
        prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn tangent_is_linear(
        seed in 0u64..1000,
        x in prop::array::uniform3(-1.0f64..1.0),
        v1 in prop::array::uniform3(-1.0f64..1.0),
        v2 in prop::array::uniform3(-1.0f64..1.0),
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
    ) {
        let p = init_params(&NetworkSpec::new(3, vec![6, 6]), &RngKey::new(seed));
        let mix: Vec<f64> = (0..3).map(|k| a * v1[k] + b * v2[k]).collect();
        let lhs = directional_derivative(&p, &x, &mix);
        let rhs = a * directional_derivative(&p, &x, &v1) + b * directional_derivative(&p, &x, &v2);
        prop_assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
    }

    #[test]
    fn ansatz_is_exactly_zero_outside(seed in 0u64..50, dir in prop::array::uniform2(-1.0f64..1.0), r in 1.0f64..5.0) {
        let spec = ProblemSpec::forward_laplacian(2, 1.5).unwrap().with_hidden(vec![8]);
        let p = spec.init_params(&RngKey::new(seed));
        let n = (dir[0] * dir[0] + dir[1] * dir[1]).sqrt().max(1e-9);
        let x = vec![dir[0] / n * r, dir[1] / n * r];
        let v = Ansatz::new(&p, 2).eval_rows(&[x]);
        prop_assert_eq!(v[0], 0.0);
    }

    #[test]
    fn estimator_clamps(
        seed in 0u64..10_000,
        alpha in 0.05f64..1.95,
        gamma_order in 0.05f64..0.95,
        r0 in 0.01f64..0.8,
        t in 1e-4f64..1.0,
    ) {
        let cfg = EstimatorConfig { m: 8, r0, ..Default::default() };
        let g = SampleGroup::draw(2, 8, &mut RngKey::new(seed).stream());
        let point = ResidualPoint { x: vec![0.1, 0.2], t: Some(t), extra: vec![] };
        let coeffs = PdeCoefficients { alpha, gamma: Some(gamma_order), c: 1.0, v: None, mu: 0.0 };
        let q = group_queries(&point, &coeffs, &cfg, &g);
        for r in &q.r_eps {
            prop_assert!(*r >= cfg.eps && *r <= r0);
        }
        for r in &q.r_out {
            prop_assert!(*r >= r0);
        }
        for h in &q.steps {
            prop_assert!(*h >= cfg.eps_t && *h <= t);
        }
    }

    #[test]
    fn same_path_same_stream(seed in any::<u64>(), path in prop::collection::vec(any::<u64>(), 0..5)) {
        let mut a = RngKey::new(seed).at(&path).stream();
        let mut b = RngKey::new(seed).at(&path).stream();
        for _ in 0..8 {
            prop_assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn relative_l2_is_scale_invariant(v in prop::collection::vec(-10.0f64..10.0, 1..20), s in 0.1f64..10.0) {
        prop_assume!(v.iter().any(|x| x.abs() > 1e-3));
        let pred: Vec<f64> = v.iter().map(|x| x + 0.5).collect();
        let e1 = relative_l2(&pred, &v).unwrap();
        let p2: Vec<f64> = pred.iter().map(|x| x * s).collect();
        let v2: Vec<f64> = v.iter().map(|x| x * s).collect();
        prop_assert!((relative_l2(&p2, &v2).unwrap() - e1).abs() < 1e-12 * e1.max(1.0));
        prop_assert_eq!(relative_l2(&v, &v).unwrap(), 0.0);
    }

    #[test]
    fn checkpoints_round_trip(seed in 0u64..1000, hidden in prop::collection::vec(1usize..6, 1..3)) {
        let p = init_params(&NetworkSpec::new(2, hidden), &RngKey::new(seed));
        let q = parse_checkpoint(&checkpoint_string(&p)).unwrap();
        prop_assert_eq!(p, q);
    }

    #[test]
    fn ini_echo_reparses(seed in any::<u64>(), m in 1usize..100, r0 in 0.01f64..1.0) {
        let text = format!("# run\n[run]\nseed = {seed}\n\n[estimator]\nm = {m}\nr0 = {}\n", fmt_f64(r0));
        let ini = Ini::parse(&text).unwrap();
        let again = Ini::parse(&ini.echo()).unwrap();
        prop_assert_eq!(ini.echo(), again.echo());
        let est = mcpinn::config::estimator(&again).unwrap();
        prop_assert_eq!(est.m, m);
        prop_assert_eq!(est.r0, r0);
    }
}

/// One-sample Kolmogorov-Smirnov statistic against the CDF `x^k`.
#[test]
fn beta_power_ks() {
    for k in [0.2, 0.5, 1.0, 1.5] {
        let mut s = RngKey::new(42).child((k * 10.0) as u64).stream();
        let mut xs: Vec<f64> = (0..100_000).map(|_| sample_beta_power(k, &mut s).unwrap().value).collect();
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let f = x.powf(k);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.006, "k={k}: KS {ks}");
    }
}
