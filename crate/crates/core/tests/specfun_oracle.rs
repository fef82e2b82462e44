//! Bessel and log-gamma values against 40-digit references.

use iterlab_core::numerics::{differentiate, integrate_halfline, DiffConfig, QuadratureConfig};
use iterlab_core::specfun::{bessel_k0, bessel_k1, log_gamma};

/// (x, K0(x), K1(x)) on 40 log-spaced points of [1e-8, 700].
const BESSEL: [(f64, f64, f64); 40] = [
    (1e-08, 1.8536612259610778388e+1, 99999999.999999902725),
    (1.897052879944406e-08, 1.7896310693482683466e+1, 52713343.448249171035),
    (3.598809629305365e-08, 1.7256009127354591404e+1, 27786965.774930599258),
    (6.827132171645417e-08, 1.6615707561226507754e+1, 14647438.702786220273),
    (1.2951430747981042e-07, 1.5975405995098462354e+1, 7721154.6697707407925),
    (2.456954899985797e-07, 1.5335104428970541329e+1, 4070078.7792454094376),
    (4.660973368911586e-07, 1.4694802862843048987e+1, 2145474.6055154268336),
    (8.842112952837904e-07, 1.4054501296717042942e+1, 1130951.3973957517705),
    (1.6773955841974882e-06, 1.3414199730596143335e+1, 596162.29433371998171),
    (3.182108123807874e-06, 1.2773898164492775995e+1, 314257.07770612901449),
    (6.036627380564218e-06, 1.2133596598449461778e+1, 165655.41265466424373),
    (1.1451801357450628e-05, 1.1493295032611318007e+1, 87322.506564696007244),
    (2.1724672745702974e-05, 1.0852993467472156169e+1, 46030.612705947773457),
    (4.121285299808557e-05, 1.0212691904706708417e+1, 24264.274811275567737),
    (7.818296147074383e-05, 9.5723903499735564102, 12790.510239114928833),
    (0.00014831721222065714, 8.9320888223108375389, 6742.3050992135630943),
    (0.0002813655945885233, 8.2917873854610264537, 3554.0935751383615485),
    (0.0005337654115314282, 7.6514862516471374354, 1873.48002923091243),
    (0.001012581211160407, 7.011186122813410752, 987.57130617423191771),
    (0.0019209201028094485, 6.3708893026961802108, 520.57725981385610069),
    (0.0036440870131777686, 5.7306032815376794345, 274.40580513355527644),
    (0.006913025763116895, 5.090352134654823796, 144.63513573362751277),
    (0.013114375433050806, 4.4502121386618847874, 76.219742910163121191),
    (0.024878663683941198, 3.8104205052081893698, 40.141470578722740848),
    (0.04719614059078896, 3.1716968297351421258, 21.101553972395724848),
    (0.08953357443001726, 2.5361496455860680664, 11.033223040897399647),
    (0.16984992522418108, 1.9096501875753236519, 5.68372153606861498),
    (0.3222142898048754, 1.3072945666117485854, 2.8165834191237884332),
    (0.6112575464335803, 7.6303992098219243691e-1, 1.2702495625024560975),
    (1.159587888849575, 3.3664153571352632072e-1, 0.46320069154113020653),
    (2.1997995440907445, 8.9290637003925345834e-2, 0.10792453965853585064),
    (4.17313606041773, 9.1985490090934557746e-3, 0.010246409477949893775),
    (7.916659781815323, 1.6001293893504500365e-4, 0.00016983383810605224785),
    (15.018322238632841, 9.6354679078497977354e-8, 9.9512413086792890787e-8),
    (28.49055145473149, 9.8979914693203806876e-14, 1.0070224546615147942e-13),
    (54.04808268840277, 5.7265152837571162136e-25, 5.7792507683173031879e-25),
    (102.53207091950766, 3.6558683637677325908e-46, 3.6736532383326599591e-46),
    (194.50876042451648, 3.0146065460395686874e-86, 3.0223459189608174875e-86),
    (368.9934041377462, 3.6526195451114386587e-162, 3.6575656382717638988e-162),
    (700.0000000000001, 4.6697764316848456098e-306, 4.673110796707434458e-306),
];

const LOG_GAMMA: [(f64, f64); 15] = [
    (1e-06, 13.815509980749431714),
    (0.01, 4.5994798780420217016),
    (0.3, 1.0957979948180755606),
    (0.5, 0.57236494292470008707),
    (0.9, 0.066376239734742954426),
    (1.0, 0.0),
    (1.5, -0.12078223763524522235),
    (2.0, 0.0),
    (2.5, 0.28468287047291915963),
    (3.7, 1.4280723266653881292),
    (10.0, 12.801827480081469611),
    (33.3, 82.603723581654943008),
    (171.5, 709.14316303092824227),
    (1000.0, 5905.2204232091812118),
    (100000.0, 1051287.7089736568949),
];

#[test]
fn bessel_against_reference() {
    let mut worst = (0.0f64, 0.0f64);
    for &(x, e0, e1) in BESSEL.iter() {
        let a = bessel_k0(x).unwrap();
        let b = bessel_k1(x).unwrap();
        let r0 = (a.value - e0).abs() / e0;
        let r1 = (b.value - e1).abs() / e1;
        worst = (worst.0.max(r0), worst.1.max(r1));
        assert!((a.value - e0).abs() <= a.est_abs_error, "K0({x}): {} vs {e0}, est {}", a.value, a.est_abs_error);
        assert!((b.value - e1).abs() <= b.est_abs_error, "K1({x}): {} vs {e1}, est {}", b.value, b.est_abs_error);
    }
    eprintln!("max relative error K0 {:e}, K1 {:e}", worst.0, worst.1);
    assert!(worst.0 < 1e-13 && worst.1 < 1e-13);
}

#[test]
fn log_gamma_against_reference() {
    for &(x, e) in LOG_GAMMA.iter() {
        let v = log_gamma(x).unwrap();
        assert!((v - e).abs() <= 1e-13 * e.abs().max(1.0), "lnΓ({x}) = {v} vs {e}");
    }
}

#[test]
fn k0_matches_integral_representation() {
    let cfg = QuadratureConfig::default().with_rel_tol(1e-13).with_abs_tol(1e-300);
    let mut x: f64 = 1e-4;
    let ratio = (50.0f64 / 1e-4).powf(1.0 / 49.0);
    for _ in 0..50 {
        let q = integrate_halfline(|s| (-x * x / (4.0 * s * s) - s * s).exp() / s, &cfg).unwrap();
        let k = bessel_k0(x).unwrap().value;
        assert!((q.value - k).abs() <= 1e-10 * k.max(1.0), "x={x}: {} vs {k}", q.value);
        x *= ratio;
    }
    let one = integrate_halfline(|s| (-1.0 / (4.0 * s * s) - s * s).exp() / s, &cfg).unwrap();
    assert!((one.value - 0.421_024_438_2).abs() < 1e-10);
}

#[test]
fn k2_recurrence() {
    // K2(x) = K0(x) + (2/x) K1(x); compare with the integral K2(x) = ∫ e^{-x cosh u} cosh 2u du
    let cfg = QuadratureConfig::default().with_rel_tol(1e-13).with_abs_tol(1e-300);
    let mut x: f64 = 1e-4;
    let ratio = (50.0f64 / 1e-4).powf(1.0 / 49.0);
    for _ in 0..50 {
        let k2 = integrate_halfline(
            |u| 0.5 * ((-x * u.cosh() + 2.0 * u).exp() + (-x * u.cosh() - 2.0 * u).exp()),
            &cfg,
        ).unwrap().value;
        let rec = bessel_k0(x).unwrap().value + 2.0 / x * bessel_k1(x).unwrap().value;
        assert!((k2 - rec).abs() <= 1e-10 * k2, "x={x}: {k2} vs {rec}");
        x *= ratio;
    }
    let at2 = bessel_k0(2.0).unwrap().value + bessel_k1(2.0).unwrap().value;
    assert!((at2 - 0.253_759_754_566_055_8).abs() < 1e-14);
}

#[test]
fn k1_is_minus_k0_derivative() {
    let d = differentiate(|x| bessel_k0(x).unwrap().value, 1.0, 1, &DiffConfig::default()).unwrap();
    assert!((-d.value - bessel_k1(1.0).unwrap().value).abs() < 1e-8);
    for x in [0.05, 0.7, 2.5, 3.0, 8.0] {
        let d = differentiate(|x| bessel_k0(x).unwrap().value, x, 1, &DiffConfig::default()).unwrap();
        let k1 = bessel_k1(x).unwrap().value;
        assert!((-d.value - k1).abs() < 1e-8 * k1.max(1.0), "{x}");
    }
}

#[test]
fn asymptotic_ratio_and_normalization() {
    let r = bessel_k1(100.0).unwrap().value / bessel_k0(100.0).unwrap().value;
    assert!((r - 1.0).abs() < 0.01);
    let cfg = QuadratureConfig::default();
    let mass = integrate_halfline(|u| bessel_k0(u).unwrap().value, &cfg).unwrap();
    assert!((2.0 / std::f64::consts::PI * mass.value - 1.0).abs() < 1e-10);
}
