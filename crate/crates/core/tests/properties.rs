use iterlab_core::analytics::{
    charfn_empirical, log_moment_iterated, mellin_weighted_chain, moment_iterated, MomentSpec,
};
use iterlab_core::densities::DensityEvaluator;
use iterlab_core::identities::ks_two_sample;
use iterlab_core::report::Range;
use iterlab_core::sampling::{sample_many, RngState};
use iterlab_core::{Hurst, ProcessModel};
use proptest::prelude::*;

fn hurst() -> impl Strategy<Value = Hurst> {
    (0.05f64..=1.0).prop_map(|h| Hurst::new(h).unwrap())
}

fn density_model() -> impl Strategy<Value = ProcessModel> {
    let h = (0.2f64..0.9).prop_map(|h| Hurst::new(h).unwrap());
    prop_oneof![
        h.clone().prop_map(|h| ProcessModel::FBm { h }),
        (h.clone(), h.clone()).prop_map(|(outer, inner)| ProcessModel::IteratedFBm { outer, inner }),
        h.clone().prop_map(|h| ProcessModel::WeightedJ { n: 1, h }),
        h.clone().prop_map(|h| ProcessModel::CauchyOfFBm { h }),
        Just(ProcessModel::Cauchy),
        Just(ProcessModel::CauchyOfCauchy),
        Just(ProcessModel::BmOfCauchy),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn empirical_charfn_is_bounded(values in prop::collection::vec(-1e3f64..1e3, 2..200), beta in -50f64..50.0) {
        let cf = charfn_empirical(&values, beta).unwrap();
        prop_assert!(cf.value.abs() <= 1.0 + 1e-15);
    }

    #[test]
    fn sampled_charfn_is_even_and_bounded(seed in 0u64..1000, beta in 0f64..5.0) {
        let model = ProcessModel::IteratedFBm { outer: Hurst::HALF, inner: Hurst::HALF };
        let s = sample_many(&model, 1.0, RngState::new(seed, 0), 2000).unwrap().values;
        let a = charfn_empirical(&s, beta).unwrap().value;
        let b = charfn_empirical(&s, -beta).unwrap().value;
        prop_assert!(a.abs() <= 1.0 + 1e-15);
        prop_assert!((a - b).abs() <= 1e-15);
    }

    #[test]
    fn densities_are_even_and_nonnegative(model in density_model(), x in 0.01f64..5.0, t in 0.1f64..4.0) {
        let ev = DensityEvaluator::new(model).unwrap();
        let p = ev.density(x, t).unwrap().value;
        let q = ev.density(-x, t).unwrap().value;
        prop_assert!(p >= 0.0);
        prop_assert!((p - q).abs() <= 1e-14 * p.max(1e-300));
    }

    #[test]
    fn cdf_is_monotone_and_symmetric(model in density_model(), x in 0.01f64..5.0, dx in 0.01f64..1.0, t in 0.2f64..3.0) {
        let ev = DensityEvaluator::new(model).unwrap();
        let a = ev.cdf(x, t).unwrap().value;
        let b = ev.cdf(x + dx, t).unwrap().value;
        let m = ev.cdf(-x, t).unwrap().value;
        prop_assert!((0.5..=1.0).contains(&a));
        prop_assert!(b >= a - 1e-12);
        prop_assert!((a + m - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn mellin_matches_single_fbm_moments(k in 1u32..8, h in hurst(), t in 0.1f64..10.0) {
        let mellin = mellin_weighted_chain(f64::from(2 * k + 1), 1, h, t).unwrap();
        let moment = moment_iterated(&MomentSpec::new(k, vec![h]).unwrap(), t).unwrap();
        prop_assert!((mellin - moment).abs() <= 1e-11 * moment);
    }

    /// `B_1(s) = s Z`, so `B_1(|B_H(t)|)` has the law of `J^1` with the same `H`.
    #[test]
    fn mellin_matches_unit_outer_chain(k in 1u32..8, h in hurst(), t in 0.1f64..10.0) {
        let mellin = mellin_weighted_chain(f64::from(2 * k + 1), 2, h, t).unwrap();
        let one = Hurst::new(1.0).unwrap();
        let moment = moment_iterated(&MomentSpec::new(k, vec![one, h]).unwrap(), t).unwrap();
        prop_assert!((mellin - moment).abs() <= 1e-11 * moment);
    }

    #[test]
    fn moments_are_self_similar(k in 1u32..6, hs in prop::collection::vec(hurst(), 1..4), t in 0.1f64..10.0, c in 0.1f64..10.0) {
        let spec = MomentSpec::new(k, hs.clone()).unwrap();
        let exponent = 2.0 * f64::from(k) * hs.iter().map(|h| h.value()).product::<f64>();
        let lhs = log_moment_iterated(&spec, c * t).unwrap();
        let rhs = log_moment_iterated(&spec, t).unwrap() + exponent * c.ln();
        prop_assert!((lhs - rhs).abs() <= 1e-11 * (1.0 + lhs.abs()));
    }

    #[test]
    fn log_moment_agrees_with_moment(k in 1u32..20, hs in prop::collection::vec(hurst(), 1..4), t in 0.1f64..10.0) {
        let spec = MomentSpec::new(k, hs).unwrap();
        let log = log_moment_iterated(&spec, t).unwrap();
        let m = moment_iterated(&spec, t).unwrap();
        prop_assert!((m.ln() - log).abs() <= 1e-12 * (1.0 + log.abs()));
    }

    #[test]
    fn model_grammar_round_trips(model in density_model()) {
        let text = model.to_string();
        let back: ProcessModel = text.parse().unwrap();
        prop_assert_eq!(back.to_string(), text);
    }

    #[test]
    fn sampling_is_reproducible(seed in any::<u64>(), stream in 0u64..100, n in 1usize..3000) {
        let model = ProcessModel::CauchyOfCauchy;
        let a = sample_many(&model, 1.0, RngState::new(seed, stream), n).unwrap();
        let b = sample_many(&model, 1.0, RngState::new(seed, stream), n).unwrap();
        prop_assert_eq!(a.values.len(), n);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn ks_statistic_is_symmetric_and_bounded(
        a in prop::collection::vec(-10f64..10.0, 1..100),
        b in prop::collection::vec(-10f64..10.0, 1..100),
    ) {
        let ab = ks_two_sample(&a, &b).unwrap();
        let ba = ks_two_sample(&b, &a).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab.statistic));
        prop_assert!((0.0..=1.0).contains(&ab.p_value));
        prop_assert_eq!(ab.statistic, ba.statistic);
    }

    #[test]
    fn ranges_cover_their_endpoints(a in -100f64..100.0, len in 0usize..200, step in 0.01f64..2.0) {
        let b = a + step * len as f64;
        let r: Range = format!("{a}:{b}:{step}").parse().unwrap();
        let g = r.grid().unwrap();
        prop_assert_eq!(g.len(), len + 1);
        prop_assert!((g.points()[len] - b).abs() <= 1e-9 * (1.0 + b.abs()));
    }
}
