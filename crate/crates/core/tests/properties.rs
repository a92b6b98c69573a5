//! Randomized invariants of the analytic chain.

use proptest::prelude::*;

use spsqkd_core::correlation::expected_double_count;
use spsqkd_core::keyrate::{estimate_single_photon, rate, secure_key};
use spsqkd_core::link_model::{error_k, totals, yield_k};
use spsqkd_core::optimize::{max_distance, optimize_attenuation, rule_of_thumb, AttenuationSearch, DistanceSearch};
use spsqkd_core::photon_stats::{attenuate, bound_multi_photon, g2_of_stats, infer_stats};
use spsqkd_core::timefilter::{filtered_brightness, filtered_dark, BrightnessSource, DecayModel, FilterWindow};
use spsqkd_core::{ChannelSpec, DetectionParams, PhotonStats, ProtocolConfig, SourceMeasurement};

const ALPHA: f64 = 0.17;

/// Truncated distribution with `p3 = 0` and non-trivial emission.
fn two_photon_stats() -> impl Strategy<Value = PhotonStats> {
    (1e-4..1.0f64, 0.0..1.0f64).prop_map(|(b, frac)| {
        let p2 = b * frac * 0.5;
        PhotonStats::from_emitting(b - p2, p2, 0.0).unwrap()
    })
}

fn any_stats() -> impl Strategy<Value = PhotonStats> {
    (0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64).prop_map(|(a, b, c, d)| {
        let sum = a + b + c + d + 1e-12;
        let (p1, p2, p3) = (b / sum, c / sum, d / sum);
        PhotonStats::from_emitting(p1, p2, p3).unwrap()
    })
}

/// Sub-Poissonian-like distribution with a non-zero three-photon term.
fn three_photon_stats() -> impl Strategy<Value = PhotonStats> {
    (1e-3..0.9f64, 0.0..1.0f64, 1e-3..1.0f64).prop_map(|(b, u, v)| {
        let p2 = u * b * b / 2.0;
        let p3 = v * b * b * b / 6.0;
        PhotonStats::from_emitting(b - p2 - p3, p2, p3).unwrap()
    })
}

fn measurement() -> impl Strategy<Value = SourceMeasurement> {
    (1e-3..1.0f64, 0.0..0.3f64).prop_map(|(b, g)| SourceMeasurement::new(b, g).unwrap())
}

fn detection() -> impl Strategy<Value = DetectionParams> {
    (0.3..1.0f64, -9.0..-4.0f64, 0.0..0.08f64)
        .prop_map(|(eta_d, log_y0, e_d)| DetectionParams::new(eta_d, 10f64.powf(log_y0), e_d).unwrap())
}

fn protocol() -> impl Strategy<Value = ProtocolConfig> {
    prop_oneof![Just(ProtocolConfig::bb84()), Just(ProtocolConfig::decoy())]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn attenuation_preserves_normalization(s in two_photon_stats(), eta in 0.0..=1.0f64) {
        let t = attenuate(&s, eta).unwrap();
        let total = t.p0() + t.p1() + t.p2() + t.p3();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(t.multi_photon() <= s.multi_photon());
    }

    #[test]
    fn attenuation_composes(s in two_photon_stats(), a in 0.0..=1.0f64, b in 0.0..=1.0f64) {
        let twice = attenuate(&attenuate(&s, a).unwrap(), b).unwrap();
        let once = attenuate(&s, a * b).unwrap();
        for k in 0..4 {
            prop_assert!((twice.p(k) - once.p(k)).abs() < 1e-12, "k={} {} vs {}", k, twice.p(k), once.p(k));
        }
    }

    #[test]
    fn key_rate_never_grows_with_distance(
        m in measurement(),
        det in detection(),
        cfg in protocol(),
        d1 in 0.0..400.0f64,
        step in 0.0..100.0f64,
    ) {
        let s = infer_stats(&m).unwrap();
        let near = rate(&s, &ChannelSpec::fiber(ALPHA, d1).unwrap(), &det, &cfg).unwrap().sk;
        let far = rate(&s, &ChannelSpec::fiber(ALPHA, d1 + step).unwrap(), &det, &cfg).unwrap().sk;
        prop_assert!(far <= near, "SK({}) = {} > SK({}) = {}", d1 + step, far, d1, near);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn bound_is_tight_without_three_photon_terms(p1 in 1e-3..1.0f64, frac in 0.0..0.999f64) {
        let p2 = frac * (p1 * p1 / 2.0).min(1.0 - p1);
        let s = PhotonStats::from_emitting(p1, p2, 0.0).unwrap();
        let g2 = g2_of_stats(&s).unwrap();
        prop_assume!(g2 < 1.0);
        let m = SourceMeasurement::new(s.brightness(), g2).unwrap();
        prop_assert!((bound_multi_photon(&m) - p2).abs() < 1e-10);
    }

    #[test]
    fn bound_exceeds_multi_photon_with_three_photon_terms(s in three_photon_stats()) {
        let g2 = g2_of_stats(&s).unwrap();
        prop_assume!(g2 < 1.0 && 2.0 * s.brightness() * g2 < 1.0);
        let m = SourceMeasurement::new(s.brightness(), g2).unwrap();
        prop_assert!(bound_multi_photon(&m) > s.multi_photon());
    }
}

proptest! {
    #[test]
    fn bound_increases_in_brightness_and_g2(b in 1e-4..0.8f64, g in 1e-4..0.4f64, db in 1e-4..0.1f64, dg in 1e-4..0.1f64) {
        let at = |b: f64, g: f64| bound_multi_photon(&SourceMeasurement::new(b, g).unwrap());
        prop_assert!(at(b + db, g) > at(b, g));
        prop_assert!(at(b, g + dg) > at(b, g));
    }

    #[test]
    fn double_counting_overestimates_brightness(s in any_stats()) {
        let apparent = expected_double_count(&s);
        prop_assert!(apparent >= s.brightness());
        prop_assert_eq!(apparent == s.brightness(), s.p2() == 0.0 && s.p3() == 0.0);
    }

    #[test]
    fn yields_and_errors_are_ordered(det in detection(), eta_ch in 1e-6..1.0f64) {
        let ch = ChannelSpec::transmission(eta_ch).unwrap();
        let lo = det.e_d.min(0.5);
        let hi = det.e_d.max(0.5);
        let mut last_yield = -1.0;
        let mut last_error = f64::INFINITY;
        for k in 0..=6 {
            let y = yield_k(k, &ch, &det);
            let e = error_k(k, &ch, &det).unwrap();
            prop_assert!(y > last_yield);
            prop_assert!((lo - 1e-15..=hi + 1e-15).contains(&e));
            if det.e_d < 0.5 {
                prop_assert!(e < last_error);
            }
            last_yield = y;
            last_error = e;
        }
    }

    #[test]
    fn exact_single_photon_terms_dominate_the_bound(m in measurement(), det in detection(), d in 0.0..300.0f64) {
        let s = infer_stats(&m).unwrap();
        let ch = ChannelSpec::fiber(ALPHA, d).unwrap();
        let t = totals(&s, &ch, &det).unwrap();
        let est = estimate_single_photon(&s, &t, &det).unwrap();
        let q1 = s.p1() * yield_k(1, &ch, &det);
        let e1 = error_k(1, &ch, &det).unwrap();
        prop_assert!(q1 >= est.q1 * (1.0 - 1e-12));
        if est.insecure.is_none() {
            prop_assert!(e1 <= est.e1 * (1.0 + 1e-12) + 1e-15);
        }
    }

    #[test]
    fn key_rate_only_sees_multi_photon_total(b in 0.01..0.9f64, pm_frac in 0.0..0.2f64, split in 0.0..1.0f64, d in 0.0..150.0f64) {
        let pm = b * pm_frac;
        let a = PhotonStats::from_emitting(b - pm, pm, 0.0).unwrap();
        let c = PhotonStats::from_emitting(b - pm, pm * split, pm * (1.0 - split)).unwrap();
        let det = DetectionParams::default();
        let t = totals(&a, &ChannelSpec::fiber(ALPHA, d).unwrap(), &det).unwrap();
        let ea = estimate_single_photon(&a, &t, &det).unwrap();
        let ec = estimate_single_photon(&c, &t, &det).unwrap();
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs());
        prop_assert!(close(ea.q1, ec.q1) && close(ea.e1, ec.e1));
        prop_assert_eq!(ea.insecure, ec.insecure);
        let cfg = ProtocolConfig::bb84();
        let (ska, ra) = secure_key(ea.q1, ea.e1, t.q_tot, t.e_tot, &cfg);
        let (skc, rc) = secure_key(ec.q1, ec.e1, t.q_tot, t.e_tot, &cfg);
        prop_assert!(close(ska, skc) || (ska - skc).abs() < 1e-18);
        prop_assert_eq!(ra, rc);
    }

    #[test]
    fn sifting_dominance_without_loss(b in 1e-3..=1.0f64, g in 0.0..0.3f64) {
        prop_assume!(2.0 * b * g < 1.0);
        let s = infer_stats(&SourceMeasurement::new(b, g).unwrap()).unwrap();
        let ch = ChannelSpec::transmission(1.0).unwrap();
        let det = DetectionParams::default();
        let bb84 = rate(&s, &ch, &det, &ProtocolConfig::bb84()).unwrap().sk;
        let decoy = rate(&s, &ch, &det, &ProtocolConfig::decoy()).unwrap().sk;
        prop_assert!(bb84 >= decoy);
    }

    #[test]
    fn optimized_attenuation_dominates_fixed(m in measurement(), d in 0.0..200.0f64, eta in 1e-4..1.0f64) {
        let s = infer_stats(&m).unwrap();
        let det = DetectionParams::default();
        let cfg = ProtocolConfig::bb84();
        let ch = ChannelSpec::fiber(ALPHA, d).unwrap();
        let best = optimize_attenuation(&s, &ch, &det, &cfg, &AttenuationSearch::default()).unwrap();
        let fixed = rate(&attenuate(&s, eta).unwrap(), &ch, &det, &cfg).unwrap().sk;
        prop_assert!(best.report.sk >= fixed - 1e-9);
    }

    #[test]
    fn gated_dark_counts_are_linear(y0 in 0.0..1e-4f64, tau in 1e-12..13e-9f64) {
        let t = 1.0 / 75.95e6;
        let w = FilterWindow::new(tau, 0.0, t).unwrap();
        let half = FilterWindow::new(tau / 2.0, 0.0, t).unwrap();
        prop_assert!((filtered_dark(y0, &w) - 2.0 * filtered_dark(y0, &half)).abs() <= 1e-15 * y0.max(1e-300));
    }

    #[test]
    fn gated_brightness_grows_with_the_gate(b in 0.0..1.0f64, t1 in 0.1e-9..3e-9f64, tau in 1e-12..13e-9f64, widen in 1.0..5.0f64) {
        let t = 1.0 / 75.95e6;
        let model = BrightnessSource::Model(DecayModel::new(t1, true).unwrap());
        let narrow = filtered_brightness(b, model, &FilterWindow::new(tau, 0.0, t).unwrap()).unwrap();
        let wide = filtered_brightness(b, model, &FilterWindow::new((tau * widen).min(t), 0.0, t).unwrap()).unwrap();
        prop_assert!(wide >= narrow);
        prop_assert!(wide <= b);
    }
}

#[test]
fn closed_form_distance_overestimates_numeric_distance() {
    let det = DetectionParams::default();
    let cfg = ProtocolConfig::bb84();
    for i in 0..5 {
        let b = 0.005 * (1.0f64 / 0.005).powf(i as f64 / 4.0);
        for j in 0..5 {
            let g = 0.01 + 0.09 * j as f64 / 4.0;
            let m = SourceMeasurement::new(b, g).unwrap();
            let s = infer_stats(&m).unwrap();
            let numeric = max_distance(&s, &det, &cfg, ALPHA, &DistanceSearch::default()).unwrap();
            let estimate = rule_of_thumb(&m, det.y0, ALPHA).unwrap();
            assert!(
                estimate.distance_km >= numeric.length_km,
                "B={b} g2={g}: {} < {}",
                estimate.distance_km,
                numeric.length_km
            );
        }
    }
}

#[test]
fn max_distance_bracket_is_valid() {
    let det = DetectionParams::default();
    let cfg = ProtocolConfig::bb84();
    for (b, g) in [(0.025, 0.018), (0.3, 0.05), (1.0, 0.043)] {
        let s = infer_stats(&SourceMeasurement::new(b, g).unwrap()).unwrap();
        let d = max_distance(&s, &det, &cfg, ALPHA, &DistanceSearch::default()).unwrap();
        let (lo, hi) = d.bracket;
        assert!(hi - lo <= 0.01);
        let sk = |l: f64| rate(&s, &ChannelSpec::fiber(ALPHA, l).unwrap(), &det, &cfg).unwrap().sk;
        assert!(sk(lo) > cfg.delta);
        assert!(sk(hi) <= cfg.delta);
    }
}
