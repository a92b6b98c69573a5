//! The per-pulse simulator against the analytic gain and error model.

use spsqkd_core::mc_oracle::{simulate, synth_histogram, SimConfig, SimResult};
use spsqkd_core::photon_stats::{attenuate, infer_stats};
use spsqkd_core::link_model::totals;
use spsqkd_core::{ChannelSpec, DetectionParams, PhotonStats, SourceMeasurement, Totals};

fn within(r: &SimResult, t: &Totals, sigmas: f64) -> bool {
    (r.q_hat - t.q_tot).abs() <= sigmas * r.sigma_q && (r.e_hat - t.e_tot).abs() <= sigmas * r.sigma_e
}

fn run_in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn reference_operating_point_matches_totals() {
    let s = infer_stats(&SourceMeasurement::new(0.025, 0.018).unwrap()).unwrap();
    let ch = ChannelSpec::transmission(0.1).unwrap();
    let det = DetectionParams::default();
    let r = simulate(&SimConfig::new(100_000_000, 2024, s, ch, det)).unwrap();
    let t = totals(&s, &ch, &det).unwrap();
    assert!(
        within(&r, &t, 3.0),
        "Q {} vs {} (sigma {}), E {} vs {} (sigma {})",
        r.q_hat,
        t.q_tot,
        r.sigma_q,
        r.e_hat,
        t.e_tot,
        r.sigma_e
    );
}

#[test]
fn estimators_are_consistent_across_seeds() {
    let s = PhotonStats::new(0.6, 0.35, 0.04, 0.01).unwrap();
    let ch = ChannelSpec::transmission(0.2).unwrap();
    let det = DetectionParams::new(0.86, 1e-3, 0.03).unwrap();
    let t = totals(&s, &ch, &det).unwrap();
    let (mut q_ok, mut e_ok) = (0, 0);
    for seed in 0..100 {
        let r = simulate(&SimConfig::new(200_000, seed, s, ch, det)).unwrap();
        q_ok += usize::from((r.q_hat - t.q_tot).abs() <= 3.0 * r.sigma_q);
        e_ok += usize::from((r.e_hat - t.e_tot).abs() <= 3.0 * r.sigma_e);
    }
    assert!(q_ok >= 99, "{q_ok}/100 gain estimates within 3 sigma");
    assert!(e_ok >= 99, "{e_ok}/100 error estimates within 3 sigma");
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let s = PhotonStats::new(0.7, 0.25, 0.04, 0.01).unwrap();
    let cfg = SimConfig::new(1_000_003, 99, s, ChannelSpec::transmission(0.3).unwrap(), DetectionParams::default());
    let one = run_in_pool(1, || simulate(&cfg).unwrap());
    let many = run_in_pool(4, || simulate(&cfg).unwrap());
    assert_eq!(one, many);

    let hcfg = cfg.with_lifetime(0.5e-9);
    let h1 = run_in_pool(1, || synth_histogram(&SimConfig { n_pulses: 200_000, ..hcfg }, 1e-10, 6).unwrap());
    let h4 = run_in_pool(3, || synth_histogram(&SimConfig { n_pulses: 200_000, ..hcfg }, 1e-10, 6).unwrap());
    assert_eq!(h1, h4);
}

#[test]
fn attenuator_equals_extra_photon_loss() {
    let det = DetectionParams::default();
    for (b, g, eta_att, eta_ch) in [(0.5, 0.1, 0.3, 0.5), (0.9, 0.05, 0.05, 1.0), (0.3, 0.2, 0.7, 0.02)] {
        let s = infer_stats(&SourceMeasurement::new(b, g).unwrap()).unwrap();
        let ch = ChannelSpec::transmission(eta_ch).unwrap();
        let attenuated = simulate(&SimConfig::new(4_000_000, 5, attenuate(&s, eta_att).unwrap(), ch, det)).unwrap();
        let lossy = simulate(&SimConfig::new(4_000_000, 6, s, ch, det).with_extra_survival(eta_att)).unwrap();
        let sq = attenuated.sigma_q.hypot(lossy.sigma_q);
        let se = attenuated.sigma_e.hypot(lossy.sigma_e);
        assert!((attenuated.q_hat - lossy.q_hat).abs() <= 3.0 * sq);
        assert!((attenuated.e_hat - lossy.e_hat).abs() <= 3.0 * se);
    }
}

#[test]
fn side_peaks_are_flat_without_blinking() {
    let s = infer_stats(&SourceMeasurement::new(0.4, 0.05).unwrap()).unwrap();
    let det = DetectionParams::new(1.0, 0.0, 0.02).unwrap();
    let cfg = SimConfig::new(1_000_000, 3, s, ChannelSpec::transmission(1.0).unwrap(), det).with_lifetime(0.5e-9);
    let h = synth_histogram(&cfg, 1e-10, 8).unwrap();
    let t = h.rep_period();
    let area = |n: i64| -> f64 {
        h.counts()
            .iter()
            .enumerate()
            .filter(|(i, _)| (h.delay(*i) / t).round() as i64 == n)
            .map(|(_, c)| *c as f64)
            .sum()
    };
    let areas: Vec<f64> = (1..=8).flat_map(|n| [area(n), area(-n)]).collect();
    let mean = areas.iter().sum::<f64>() / areas.len() as f64;
    let chi2: f64 = areas.iter().map(|a| (a - mean).powi(2) / mean).sum();
    // 15 degrees of freedom; the 99.9% quantile is 37.7.
    assert!(chi2 < 37.7, "chi2 = {chi2}, areas {areas:?}");
}
