//! Acceptance suite: one line per criterion, non-zero exit on any failure.
//!
//! Runs without the libtest harness so the report is always printed:
//! `cargo test -p spsqkd-core --test acceptance`.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spsqkd_core::correlation::{g2_zero, DEFAULT_REP_RATE_HZ};
use spsqkd_core::keyrate::rate;
use spsqkd_core::link_model::totals;
use spsqkd_core::map::make_sk_map;
use spsqkd_core::mc_oracle::{simulate, synth_histogram, SimConfig};
use spsqkd_core::optimize::{
    max_distance, optimal_brightness, optimize_attenuation, rule_of_thumb, AttenuationSearch, BrightnessSearch,
    DistanceSearch,
};
use spsqkd_core::photon_stats::{attenuate, bound_multi_photon, g2_of_stats, infer_stats};
use spsqkd_core::timefilter::{filtered_dark, filtered_g2, FilterWindow};
use spsqkd_core::{ChannelSpec, DetectionParams, PhotonStats, ProtocolConfig, SourceMeasurement};

const ALPHA: f64 = 0.17;
const T_REP: f64 = 1.0 / DEFAULT_REP_RATE_HZ;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn source(b: f64, g2: f64) -> PhotonStats {
    infer_stats(&SourceMeasurement::new(b, g2).unwrap()).unwrap()
}

fn decoy_penalty() -> Outcome {
    let s = source(0.025, 0.018);
    let ch = ChannelSpec::transmission(1.0).unwrap();
    let det = DetectionParams::default();
    let bb84 = rate(&s, &ch, &det, &ProtocolConfig::bb84()).unwrap().sk;
    let decoy = rate(&s, &ch, &det, &ProtocolConfig::decoy()).unwrap().sk;
    let ratio = bb84 / decoy;
    outcome(
        (2.5..=3.5).contains(&ratio),
        format!("SK_bb84 / SK_decoy = {ratio:.4} (band [2.5, 3.5])"),
    )
}

fn gated_dark_counts() -> Outcome {
    let y = filtered_dark(1.6e-6, &FilterWindow::new(0.2e-9, 0.0, T_REP).unwrap());
    let rel = (y / 2.4e-8 - 1.0).abs();
    outcome(rel <= 0.05, format!("Y0(0.2 ns) = {y:.4e}, {:.2}% from 2.4e-8 (tolerance 5%)", 100.0 * rel))
}

fn rule_of_thumb_gap() -> Outcome {
    let det = DetectionParams::default();
    let cfg = ProtocolConfig::bb84();
    let mut pass = true;
    let mut parts = Vec::new();
    for g2 in [0.018, 0.03, 0.043] {
        let m = SourceMeasurement::new(0.025, g2).unwrap();
        let numeric = max_distance(&infer_stats(&m).unwrap(), &det, &cfg, ALPHA, &DistanceSearch::default()).unwrap();
        let estimate = rule_of_thumb(&m, det.y0, ALPHA).unwrap();
        let gap = estimate.distance_km - numeric.length_km;
        pass &= (20.0..=40.0).contains(&gap);
        parts.push(format!("g2={g2}: {:.1} - {:.1} = {gap:.1} km", estimate.distance_km, numeric.length_km));
    }
    outcome(pass, format!("{} (band [20, 40])", parts.join("; ")))
}

fn ideal_brightness() -> Outcome {
    let det = DetectionParams::new(0.86, 1e-7, 0.02).unwrap();
    let o = optimal_brightness(0.02, &det, &ProtocolConfig::bb84(), ALPHA, &BrightnessSearch::default()).unwrap();
    outcome(
        (0.006..=0.012).contains(&o.brightness),
        format!(
            "B_opt = {:.4}% reaching {:.1} km (band [0.6%, 1.2%])",
            100.0 * o.brightness,
            o.distance_km
        ),
    )
}

fn three_region_envelope() -> Outcome {
    let s = source(1.0, 0.043);
    let det = DetectionParams::default();
    let cfg = ProtocolConfig::bb84();
    let search = AttenuationSearch::default();
    let mut first_interior = None;
    let mut d = 0.0;
    while d <= 200.0 {
        let o = optimize_attenuation(&s, &ChannelSpec::fiber(ALPHA, d).unwrap(), &det, &cfg, &search).unwrap();
        if o.eta_att < 1.0 && o.report.sk > cfg.delta {
            first_interior = Some(d);
            break;
        }
        d += 0.5;
    }
    let envelope = max_distance(
        &s,
        &det,
        &cfg,
        ALPHA,
        &DistanceSearch {
            attenuation: Some(search),
            ..DistanceSearch::default()
        },
    )
    .unwrap();
    let mid = optimize_attenuation(
        &s,
        &ChannelSpec::fiber(ALPHA, 0.5 * (first_interior.unwrap_or(0.0) + envelope.length_km)).unwrap(),
        &det,
        &cfg,
        &search,
    )
    .unwrap();
    let unit_until = first_interior.map_or(f64::NAN, |d| d - 0.5);
    let pass = (60.0..=90.0).contains(&unit_until)
        && (155.0..=185.0).contains(&envelope.length_km)
        && mid.eta_att < 1.0;
    outcome(
        pass,
        format!(
            "eta_opt = 1 up to {unit_until:.1} km (75 +- 15), interior optimum eta = {:.3} mid-range, \
             SK > delta until {:.2} km (170 +- 15)",
            mid.eta_att, envelope.length_km
        ),
    )
}

fn bound_tightness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    while checked < 10_000 {
        let p1: f64 = rng.random_range(1e-3..1.0);
        let p2 = rng.random_range(0.0..0.999) * (p1 * p1 / 2.0).min(1.0 - p1);
        let s = PhotonStats::from_emitting(p1, p2, 0.0).unwrap();
        let g2 = g2_of_stats(&s).unwrap();
        if g2 >= 1.0 {
            continue;
        }
        let pm = bound_multi_photon(&SourceMeasurement::new(s.brightness(), g2).unwrap());
        worst = worst.max((pm - p2).abs());
        checked += 1;
    }
    let mut exceeded = 0;
    let mut tried = 0;
    while tried < 10_000 {
        let b: f64 = rng.random_range(1e-3..0.9);
        let p2 = rng.random_range(0.0..1.0) * b * b / 2.0;
        let p3 = rng.random_range(1e-3..1.0) * b * b * b / 6.0;
        let s = PhotonStats::from_emitting(b - p2 - p3, p2, p3).unwrap();
        let g2 = g2_of_stats(&s).unwrap();
        if g2 >= 1.0 || 2.0 * b * g2 >= 1.0 {
            continue;
        }
        tried += 1;
        exceeded += usize::from(bound_multi_photon(&SourceMeasurement::new(b, g2).unwrap()) > s.multi_photon());
    }
    outcome(
        worst < 1e-10 && exceeded == tried,
        format!("max |bound - p2| = {worst:.2e} over {checked} samples (tolerance 1e-10); bound > p_m in {exceeded}/{tried} samples with p3 > 0"),
    )
}

fn monte_carlo_agreement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let s = source(rng.random_range(0.01..0.9), rng.random_range(0.0..0.2));
        let ch = ChannelSpec::transmission(10f64.powf(rng.random_range(-3.0..0.0))).unwrap();
        let det = DetectionParams::new(
            rng.random_range(0.5..1.0),
            10f64.powf(rng.random_range(-7.0..-5.0)),
            rng.random_range(0.005..0.05),
        )
        .unwrap();
        let r = simulate(&SimConfig::new(10_000_000, 100 + i, s, ch, det)).unwrap();
        let t = totals(&s, &ch, &det).unwrap();
        worst = worst
            .max((r.q_hat - t.q_tot).abs() / r.sigma_q)
            .max((r.e_hat - t.e_tot).abs() / r.sigma_e);
    }
    let mut worst_att: f64 = 0.0;
    let det = DetectionParams::default();
    for (i, (b, g2, eta_att, eta_ch)) in [(0.5, 0.1, 0.3, 0.5), (0.9, 0.05, 0.05, 1.0), (0.3, 0.2, 0.7, 0.02)]
        .into_iter()
        .enumerate()
    {
        let s = source(b, g2);
        let ch = ChannelSpec::transmission(eta_ch).unwrap();
        let seed = 200 + 2 * i as u64;
        let a = simulate(&SimConfig::new(10_000_000, seed, attenuate(&s, eta_att).unwrap(), ch, det)).unwrap();
        let l = simulate(&SimConfig::new(10_000_000, seed + 1, s, ch, det).with_extra_survival(eta_att)).unwrap();
        worst_att = worst_att
            .max((a.q_hat - l.q_hat).abs() / a.sigma_q.hypot(l.sigma_q))
            .max((a.e_hat - l.e_hat).abs() / a.sigma_e.hypot(l.sigma_e));
    }
    outcome(
        worst <= 3.0 && worst_att <= 3.0,
        format!(
            "10 random points at 1e7 pulses: worst deviation {worst:.2} sigma; attenuation equivalence at 3 points: \
             worst {worst_att:.2} sigma (limit 3)"
        ),
    )
}

fn histogram_round_trip() -> Outcome {
    let det = DetectionParams::new(1.0, 0.0, 0.02).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (g2, pulses) in [(0.0, 2_000_000u64), (0.02, 4_000_000), (0.1, 2_000_000)] {
        let s = source(0.3, g2);
        let target = g2_of_stats(&s).unwrap();
        let cfg = SimConfig::new(pulses, 31, s, ChannelSpec::transmission(1.0).unwrap(), det).with_lifetime(0.5e-9);
        let h = synth_histogram(&cfg, 100e-12, 10).unwrap();
        let est = g2_zero(&h, None, 5).unwrap();
        let full = filtered_g2(&h, None, &FilterWindow::full(T_REP).unwrap(), 5).unwrap();
        let ok = (est.g2 - target).abs() <= 3.0 * est.sigma && full.g2.to_bits() == est.g2.to_bits();
        pass &= ok;
        parts.push(format!("g2={target:.4}: {:.4} +- {:.4}", est.g2, est.sigma));
    }
    outcome(pass, format!("{}; full-window gate identical", parts.join("; ")))
}

fn randomized_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let b: f64 = rng.random_range(1e-4..1.0);
        let p2 = b * rng.random_range(0.0..0.5);
        let s = PhotonStats::from_emitting(b - p2, p2, 0.0).unwrap();
        let (x, y) = (rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0));
        let twice = attenuate(&attenuate(&s, x).unwrap(), y).unwrap();
        let once = attenuate(&s, x * y).unwrap();
        for k in 0..4 {
            worst = worst.max((twice.p(k) - once.p(k)).abs());
        }
    }
    let mut violations = 0;
    for i in 0..1000 {
        let s = source(rng.random_range(1e-3..1.0), rng.random_range(0.0..0.3));
        let det = DetectionParams::new(
            rng.random_range(0.3..1.0),
            10f64.powf(rng.random_range(-9.0..-4.0)),
            rng.random_range(0.0..0.08),
        )
        .unwrap();
        let cfg = if i % 2 == 0 { ProtocolConfig::bb84() } else { ProtocolConfig::decoy() };
        let d: f64 = rng.random_range(0.0..400.0);
        let step: f64 = rng.random_range(0.0..100.0);
        let near = rate(&s, &ChannelSpec::fiber(ALPHA, d).unwrap(), &det, &cfg).unwrap().sk;
        let far = rate(&s, &ChannelSpec::fiber(ALPHA, d + step).unwrap(), &det, &cfg).unwrap().sk;
        violations += usize::from(far > near);
    }
    outcome(
        worst < 1e-12 && violations == 0,
        format!(
            "composition: max deviation {worst:.1e} over 1000 cases (tolerance 1e-12); \
             SK increases with distance in {violations}/1000 cases"
        ),
    )
}

fn map_migration() -> Outcome {
    let g = common::synthetic_grid();
    let det = DetectionParams::default();
    let cfg = ProtocolConfig::bb84();
    let mut to_purity = Vec::new();
    let mut at_start = false;
    let mut closer_to_purity_at_end = false;
    for d in [0.0, 50.0, 90.0, 130.0, 170.0] {
        let m = make_sk_map(&g, &det, &cfg, ALPHA, d).unwrap();
        let best = m.marker_cell(m.markers.sk);
        let p = common::grid_distance(best, m.marker_cell(m.markers.purity));
        let b = common::grid_distance(best, m.marker_cell(m.markers.brightness));
        if d == 0.0 {
            at_start = m.markers.sk == m.markers.brightness;
        }
        if d == 170.0 {
            closer_to_purity_at_end = p < b;
        }
        to_purity.push(p);
    }
    let monotone = to_purity.windows(2).all(|w| w[1] <= w[0]) && to_purity[4] < to_purity[0];
    outcome(
        at_start && monotone && closer_to_purity_at_end,
        format!(
            "SK argmax on brightest cell at 0 km: {at_start}; distance to purest cell at 0/50/90/130/170 km: {}",
            to_purity.iter().map(|d| format!("{d:.2}")).collect::<Vec<_>>().join("/")
        ),
    )
}

type Check = fn() -> Outcome;

fn main() -> ExitCode {
    let criteria: [(&str, Check); 10] = [
        ("decoy penalty at zero distance", decoy_penalty),
        ("time-filtered dark counts", gated_dark_counts),
        ("rule-of-thumb overestimation", rule_of_thumb_gap),
        ("ideal long-distance brightness", ideal_brightness),
        ("three-region attenuation envelope", three_region_envelope),
        ("multi-photon bound tightness", bound_tightness),
        ("Monte Carlo agreement", monte_carlo_agreement),
        ("histogram round trip", histogram_round_trip),
        ("randomized composition and monotonicity", randomized_suites),
        ("map argmax migration", map_migration),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        failed += usize::from(!o.pass);
        println!(
            "criterion {:>2} [{}] {name}: {} ({:.2} s)",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
