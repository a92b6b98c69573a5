//! Seeded per-pulse Monte Carlo of source, channel and threshold detectors.
//!
//! Used as an independent check of the analytic gain and error model and
//! to generate synthetic coincidence histograms. Pulses are processed in
//! fixed-size blocks; block `i` draws from ChaCha8 stream `i` of the seed,
//! and tallies are integer sums, so results do not depend on the number of
//! worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::{CoincidenceHistogram, DEFAULT_REP_RATE_HZ};
use crate::error::{domain, Result};
use crate::link_model::{ChannelSpec, DetectionParams, BACKGROUND_ERROR};
use crate::photon_stats::PhotonStats;

/// Pulses per RNG stream.
pub const BLOCK_SIZE: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_pulses: u64,
    pub seed: u64,
    pub stats: PhotonStats,
    pub channel: ChannelSpec,
    pub detection: DetectionParams,
    /// Emission decay time (seconds); required for timestamped output.
    pub lifetime: Option<f64>,
    pub rep_period: f64,
    /// Additional independent per-photon survival probability (an attenuator).
    pub extra_survival: f64,
}

impl SimConfig {
    pub fn new(
        n_pulses: u64,
        seed: u64,
        stats: PhotonStats,
        channel: ChannelSpec,
        detection: DetectionParams,
    ) -> Self {
        Self {
            n_pulses,
            seed,
            stats,
            channel,
            detection,
            lifetime: None,
            rep_period: 1.0 / DEFAULT_REP_RATE_HZ,
            extra_survival: 1.0,
        }
    }

    pub fn with_lifetime(mut self, lifetime: f64) -> Self {
        self.lifetime = Some(lifetime);
        self
    }

    pub fn with_extra_survival(mut self, eta: f64) -> Self {
        self.extra_survival = eta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_pulses == 0 {
            return Err(domain("at least one pulse is required"));
        }
        if !(0.0..=1.0).contains(&self.extra_survival) {
            return Err(domain("extra survival probability outside [0, 1]"));
        }
        if !(self.rep_period > 0.0 && self.rep_period.is_finite()) {
            return Err(domain("repetition period must be positive"));
        }
        if let Some(t1) = self.lifetime {
            if !(t1 > 0.0 && t1.is_finite()) {
                return Err(domain("lifetime must be positive"));
            }
        }
        Ok(())
    }

    fn survival(&self) -> f64 {
        (self.detection.eta_d * self.channel.eta() * self.extra_survival).clamp(0.0, 1.0)
    }

    fn blocks(&self) -> u64 {
        self.n_pulses.div_ceil(BLOCK_SIZE)
    }

    fn block_rng(&self, block: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(block);
        rng
    }

    fn block_len(&self, block: u64) -> u64 {
        BLOCK_SIZE.min(self.n_pulses - block * BLOCK_SIZE)
    }
}

/// Photon number drawn from the truncated distribution.
fn draw_photons(rng: &mut ChaCha8Rng, cumulative: &[f64; 3]) -> usize {
    let u: f64 = rng.random();
    cumulative.iter().position(|&c| u < c).unwrap_or(3)
}

fn cumulative(s: &PhotonStats) -> [f64; 3] {
    let c0 = s.p0();
    let c1 = c0 + s.p1();
    let c2 = c1 + s.p2();
    [c0, c1, c2]
}

/// Per-photon-number tallies and the derived estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub n_pulses: u64,
    pub sent_by_k: [u64; 4],
    pub clicks_by_k: [u64; 4],
    pub errors_by_k: [u64; 4],
    /// Clicks from photon-carrying pulses per pulse sent.
    pub q_hat: f64,
    /// All erroneous clicks (including empty pulses) per photon-pulse click.
    pub e_hat: f64,
    pub sigma_q: f64,
    pub sigma_e: f64,
}

impl SimResult {
    fn from_tallies(n: u64, sent: [u64; 4], clicks: [u64; 4], errors: [u64; 4]) -> Self {
        let nf = n as f64;
        let photon_clicks: u64 = clicks[1..].iter().sum();
        let photon_errors: u64 = errors[1..].iter().sum();
        let all_errors: u64 = errors.iter().sum();
        let y = photon_clicks as f64 / nf;
        let x = all_errors as f64 / nf;
        let xy = photon_errors as f64 / nf;
        let q_hat = y;
        let sigma_q = (y * (1.0 - y) / nf).sqrt();
        let (e_hat, sigma_e) = if photon_clicks == 0 {
            (f64::NAN, f64::NAN)
        } else {
            let r = x / y;
            let var_x = x * (1.0 - x);
            let var_y = y * (1.0 - y);
            let cov = xy - x * y;
            let var = (var_x + r * r * var_y - 2.0 * r * cov) / (y * y * nf);
            (r, var.max(0.0).sqrt())
        };
        Self {
            n_pulses: n,
            sent_by_k: sent,
            clicks_by_k: clicks,
            errors_by_k: errors,
            q_hat,
            e_hat,
            sigma_q,
            sigma_e,
        }
    }

    /// Click probability of k-photon pulses.
    pub fn yield_hat(&self, k: usize) -> f64 {
        self.clicks_by_k[k] as f64 / self.sent_by_k[k] as f64
    }

    /// Error fraction among clicks of k-photon pulses.
    pub fn error_hat(&self, k: usize) -> f64 {
        self.errors_by_k[k] as f64 / self.clicks_by_k[k] as f64
    }
}

#[derive(Default, Clone, Copy)]
struct Tally {
    sent: [u64; 4],
    clicks: [u64; 4],
    errors: [u64; 4],
}

impl Tally {
    fn merge(mut self, o: Tally) -> Tally {
        for k in 0..4 {
            self.sent[k] += o.sent[k];
            self.clicks[k] += o.clicks[k];
            self.errors[k] += o.errors[k];
        }
        self
    }
}

/// Runs `n_pulses` pulses. A click happens when at least one photon survives
/// source, attenuator, channel and detector, or a dark count fires. Clicks
/// with a detected photon report the bit of one detected photon, which is
/// wrong with probability `e_d`; clicks from dark counts alone are wrong
/// with probability 1/2.
pub fn simulate(cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    let eta = cfg.survival();
    let y0 = cfg.detection.y0;
    let e_d = cfg.detection.e_d;
    let cum = cumulative(&cfg.stats);
    let tally = (0..cfg.blocks())
        .into_par_iter()
        .map(|block| {
            let mut rng = cfg.block_rng(block);
            let mut t = Tally::default();
            for _ in 0..cfg.block_len(block) {
                let k = draw_photons(&mut rng, &cum);
                t.sent[k] += 1;
                let detected = (0..k).filter(|_| rng.random_bool(eta)).count();
                let dark = rng.random_bool(y0);
                if detected == 0 && !dark {
                    continue;
                }
                t.clicks[k] += 1;
                let p_err = if detected > 0 { e_d } else { BACKGROUND_ERROR };
                if rng.random_bool(p_err) {
                    t.errors[k] += 1;
                }
            }
            t
        })
        .reduce(Tally::default, Tally::merge);
    Ok(SimResult::from_tallies(cfg.n_pulses, tally.sent, tally.clicks, tally.errors))
}

/// Hanbury Brown–Twiss histogram of `cfg.n_pulses` excitation pulses.
///
/// Each photon is emitted at `pulse * T_rep + Exp(lifetime)`, survives with
/// the configured efficiency and lands on one of two detectors with equal
/// probability; each detector also fires a dark count with probability
/// `Y0` per pulse at a uniform time. All cross-detector pairs with delay
/// inside `±(n_periods + 1/2) T_rep` are binned (no dead time).
pub fn synth_histogram(cfg: &SimConfig, bin_width: f64, n_periods: u32) -> Result<CoincidenceHistogram> {
    cfg.validate()?;
    let lifetime = cfg
        .lifetime
        .ok_or_else(|| domain("synthetic histograms need an emission lifetime"))?;
    let t_rep = cfg.rep_period;
    if !(bin_width > 0.0) || t_rep / bin_width < 10.0 {
        return Err(domain("bin width must be positive and at most a tenth of the period"));
    }
    let eta = cfg.survival();
    let y0 = cfg.detection.y0;
    let cum = cumulative(&cfg.stats);

    let events: Vec<(Vec<f64>, Vec<f64>)> = (0..cfg.blocks())
        .into_par_iter()
        .map(|block| {
            let mut rng = cfg.block_rng(block);
            let (mut a, mut b) = (Vec::new(), Vec::new());
            for j in 0..cfg.block_len(block) {
                let start = (block * BLOCK_SIZE + j) as f64 * t_rep;
                let k = draw_photons(&mut rng, &cum);
                for _ in 0..k {
                    let u: f64 = rng.random();
                    let t = start - lifetime * (1.0 - u).ln();
                    let survives = rng.random_bool(eta);
                    let first = rng.random_bool(0.5);
                    if survives {
                        if first { a.push(t) } else { b.push(t) }
                    }
                }
                for side in [&mut a, &mut b] {
                    if rng.random_bool(y0) {
                        let u: f64 = rng.random();
                        side.push(start + u * t_rep);
                    }
                }
            }
            (a, b)
        })
        .collect();
    let a: Vec<f64> = events.iter().flat_map(|e| e.0.iter().copied()).collect();
    let mut b: Vec<f64> = events.into_iter().flat_map(|e| e.1).collect();
    b.sort_by(f64::total_cmp);

    let half = ((f64::from(n_periods) + 0.5) * t_rep / bin_width).ceil() as i64;
    let n_bins = (2 * half + 1) as usize;
    let span = (half as f64 + 0.5) * bin_width;
    let counts = a
        .par_chunks(4096)
        .map(|chunk| {
            let mut h = vec![0u64; n_bins];
            for &ta in chunk {
                let lo = b.partition_point(|&tb| tb < ta - span);
                for &tb in &b[lo..] {
                    let delay = tb - ta;
                    if delay >= span {
                        break;
                    }
                    let idx = (delay / bin_width).round() as i64 + half;
                    if (0..n_bins as i64).contains(&idx) {
                        h[idx as usize] += 1;
                    }
                }
            }
            h
        })
        .reduce(
            || vec![0u64; n_bins],
            |mut x, y| {
                x.iter_mut().zip(y).for_each(|(p, q)| *p += q);
                x
            },
        );
    CoincidenceHistogram::new(bin_width, t_rep, half as usize, counts)
}
