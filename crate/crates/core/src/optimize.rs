//! Sender-side attenuation optimization, key-rate-versus-distance curves,
//! maximum-distance solving and the closed-form distance estimate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_range, domain, Error, Result};
use crate::keyrate::{self, InsecureReason, ProtocolConfig, RateReport};
use crate::link_model::{ChannelSpec, DetectionParams};
use crate::photon_stats::{attenuate, infer_stats, PhotonStats, SourceMeasurement};
use crate::search::{argmax, bisect_predicate, golden_section_max, log_space};

/// Grid-then-refine settings for the attenuation optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttenuationSearch {
    /// Number of log-spaced transmissions in `[eta_min, 1]`.
    pub grid_points: usize,
    pub eta_min: f64,
    /// Relative width `|d eta| / eta` at which golden-section refinement stops.
    pub rel_tol: f64,
}

impl Default for AttenuationSearch {
    fn default() -> Self {
        Self {
            grid_points: 200,
            eta_min: 1e-6,
            rel_tol: 1e-4,
        }
    }
}

/// Best attenuator transmission and the resulting report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttenuationOptimum {
    pub eta_att: f64,
    pub report: RateReport,
}

fn rate_at(
    s: &PhotonStats,
    eta_att: f64,
    ch: &ChannelSpec,
    det: &DetectionParams,
    cfg: &ProtocolConfig,
) -> Result<RateReport> {
    keyrate::rate(&attenuate(s, eta_att)?, ch, det, cfg)
}

/// Maximizes the key rate over the attenuator transmission.
///
/// A log-spaced grid locates the best region, then golden-section search
/// in `ln eta` refines it. Without an interior optimum that beats the
/// unattenuated source, `eta_att = 1` is returned.
pub fn optimize_attenuation(
    s: &PhotonStats,
    ch: &ChannelSpec,
    det: &DetectionParams,
    cfg: &ProtocolConfig,
    search: &AttenuationSearch,
) -> Result<AttenuationOptimum> {
    if search.grid_points < 2 || !(search.eta_min > 0.0 && search.eta_min < 1.0) {
        return Err(domain("attenuation search needs >= 2 points and eta_min in (0, 1)"));
    }
    let full = rate_at(s, 1.0, ch, det, cfg)?;
    let grid = log_space(search.eta_min, 1.0, search.grid_points);
    let sks = grid
        .iter()
        .map(|&eta| rate_at(s, eta, ch, det, cfg).map(|r| r.sk))
        .collect::<Result<Vec<_>>>()?;
    let best = argmax(&sks).unwrap_or(grid.len() - 1);
    if sks[best] <= 0.0 {
        return Ok(AttenuationOptimum {
            eta_att: 1.0,
            report: full,
        });
    }

    let lo = grid[best.saturating_sub(1)].ln();
    let hi = grid[(best + 1).min(grid.len() - 1)].ln();
    let (ln_eta, sk_refined) = golden_section_max(
        |x| rate_at(s, x.exp(), ch, det, cfg).map_or(0.0, |r| r.sk),
        lo,
        hi,
        search.rel_tol,
    );
    let (eta, sk) = if sk_refined >= sks[best] {
        (ln_eta.exp(), sk_refined)
    } else {
        (grid[best], sks[best])
    };
    if sk <= full.sk || eta >= 1.0 {
        return Ok(AttenuationOptimum {
            eta_att: 1.0,
            report: full,
        });
    }
    Ok(AttenuationOptimum {
        eta_att: eta,
        report: rate_at(s, eta, ch, det, cfg)?,
    })
}

/// One point of a key-rate-versus-distance curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    pub length_km: f64,
    pub sk: f64,
    pub eta_att_opt: f64,
    pub reason: Option<InsecureReason>,
}

/// Samples ordered by strictly increasing length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceCurve {
    samples: Vec<CurveSample>,
}

impl DistanceCurve {
    pub fn new(samples: Vec<CurveSample>) -> Result<Self> {
        if samples.windows(2).any(|w| w[1].length_km <= w[0].length_km) {
            return Err(domain("curve lengths must be strictly increasing"));
        }
        if samples.iter().any(|s| !(s.sk >= 0.0)) {
            return Err(domain("curve key rates must be non-negative"));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[CurveSample] {
        &self.samples
    }
}

/// Key rate at each fiber length, optionally with a point-wise optimized
/// attenuator. Samples are evaluated in parallel; the output order and
/// values do not depend on the worker count.
pub fn distance_curve(
    s: &PhotonStats,
    det: &DetectionParams,
    cfg: &ProtocolConfig,
    alpha: f64,
    lengths_km: &[f64],
    attenuation: Option<&AttenuationSearch>,
) -> Result<DistanceCurve> {
    let samples = lengths_km
        .par_iter()
        .map(|&length_km| {
            let ch = ChannelSpec::fiber(alpha, length_km)?;
            let (eta_att_opt, report) = match attenuation {
                Some(search) => {
                    let o = optimize_attenuation(s, &ch, det, cfg, search)?;
                    (o.eta_att, o.report)
                }
                None => (1.0, keyrate::rate(s, &ch, det, cfg)?),
            };
            Ok(CurveSample {
                length_km,
                sk: report.sk,
                eta_att_opt,
                reason: report.insecure,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    DistanceCurve::new(samples)
}

/// Settings for the maximum-distance bisection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceSearch {
    pub resolution_km: f64,
    /// Distances beyond this are reported as the cap with a flag.
    pub cap_km: f64,
    pub attenuation: Option<AttenuationSearch>,
}

impl Default for DistanceSearch {
    fn default() -> Self {
        Self {
            resolution_km: 0.01,
            cap_km: 1000.0,
            attenuation: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxDistance {
    /// Longest probed length with `SK > delta`.
    pub length_km: f64,
    /// Final bracket: key possible at `.0`, not at `.1`.
    pub bracket: (f64, f64),
    /// The key survives even at the search cap.
    pub capped: bool,
}

fn sk_at(
    s: &PhotonStats,
    det: &DetectionParams,
    cfg: &ProtocolConfig,
    alpha: f64,
    length_km: f64,
    attenuation: Option<&AttenuationSearch>,
) -> Result<f64> {
    let ch = ChannelSpec::fiber(alpha, length_km)?;
    Ok(match attenuation {
        Some(search) => optimize_attenuation(s, &ch, det, cfg, search)?.report.sk,
        None => keyrate::rate(s, &ch, det, cfg)?.sk,
    })
}

/// Longest fiber for which `SK > delta`, by bisection on length.
pub fn max_distance(
    s: &PhotonStats,
    det: &DetectionParams,
    cfg: &ProtocolConfig,
    alpha: f64,
    search: &DistanceSearch,
) -> Result<MaxDistance> {
    check_range("alpha", alpha, f64::MIN_POSITIVE, f64::MAX)?;
    let att = search.attenuation.as_ref();
    let sk0 = sk_at(s, det, cfg, alpha, 0.0, att)?;
    if !(sk0 > cfg.delta) {
        return Err(Error::NoKeyAtZeroDistance {
            sk: sk0,
            delta: cfg.delta,
        });
    }
    if sk_at(s, det, cfg, alpha, search.cap_km, att)? > cfg.delta {
        return Ok(MaxDistance {
            length_km: search.cap_km,
            bracket: (search.cap_km, search.cap_km),
            capped: true,
        });
    }
    let mut failure = None;
    let bracket = bisect_predicate(
        |d| match sk_at(s, det, cfg, alpha, d, att) {
            Ok(sk) => sk > cfg.delta,
            Err(e) => {
                failure.get_or_insert(e);
                false
            }
        },
        0.0,
        search.cap_km,
        search.resolution_km,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(MaxDistance {
        length_km: bracket.0,
        bracket,
        capped: false,
    })
}

/// Closed-form break-down estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleOfThumb {
    pub eta_ch_min: f64,
    /// Infinite when `eta_ch_min = 0`.
    pub distance_km: f64,
}

/// `eta_ch_min = B g2 / 2 + Y0`, converted to a fiber length with `alpha`.
pub fn rule_of_thumb(m: &SourceMeasurement, y0: f64, alpha: f64) -> Result<RuleOfThumb> {
    check_range("y0", y0, 0.0, 1.0)?;
    check_range("alpha", alpha, f64::MIN_POSITIVE, f64::MAX)?;
    let eta_ch_min = m.brightness() * m.g2() / 2.0 + y0;
    if eta_ch_min >= 1.0 {
        return Err(domain(format!("eta_ch_min = {eta_ch_min} >= 1")));
    }
    let distance_km = if eta_ch_min == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * eta_ch_min.log10() / alpha
    };
    Ok(RuleOfThumb {
        eta_ch_min,
        distance_km,
    })
}

/// Settings for the brightness scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrightnessSearch {
    /// Lower end of the search domain.
    pub b_min: f64,
    pub grid_points: usize,
    /// Relative tolerance on the optimal brightness.
    pub rel_tol: f64,
    /// Bisection resolution for each distance evaluation. Kept far below
    /// the curve flatness near the optimum so the objective is smooth.
    pub distance_resolution_km: f64,
    pub cap_km: f64,
}

impl Default for BrightnessSearch {
    fn default() -> Self {
        Self {
            b_min: 1e-5,
            grid_points: 41,
            rel_tol: 1e-3,
            distance_resolution_km: 1e-7,
            cap_km: 1000.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrightnessOptimum {
    pub brightness: f64,
    pub distance_km: f64,
    /// The optimum sits on the lower end of the search domain.
    pub at_lower_cap: bool,
}

/// Brightness that maximizes the key distance of a source with fixed `g2`
/// (no attenuator). Grid over `ln B`, then golden-section refinement.
pub fn optimal_brightness(
    g2: f64,
    det: &DetectionParams,
    cfg: &ProtocolConfig,
    alpha: f64,
    search: &BrightnessSearch,
) -> Result<BrightnessOptimum> {
    if !(g2 > 0.0 && g2 < 1.0) {
        return Err(domain(format!("g2 = {g2} outside (0, 1)")));
    }
    let b_max = (0.5 / g2 * (1.0 - 1e-12)).min(1.0);
    if !(search.b_min > 0.0 && search.b_min < b_max) || search.grid_points < 3 {
        return Err(domain("brightness search domain is empty"));
    }
    let dist_search = DistanceSearch {
        resolution_km: search.distance_resolution_km,
        cap_km: search.cap_km,
        attenuation: None,
    };
    let distance = |b: f64| -> Result<f64> {
        let stats = infer_stats(&SourceMeasurement::new(b, g2)?)?;
        match max_distance(&stats, det, cfg, alpha, &dist_search) {
            Ok(d) => Ok(d.length_km),
            Err(Error::NoKeyAtZeroDistance { .. }) => Ok(0.0),
            Err(e) => Err(e),
        }
    };

    let grid = log_space(search.b_min, b_max, search.grid_points);
    let dists = grid.iter().map(|&b| distance(b)).collect::<Result<Vec<_>>>()?;
    let best = argmax(&dists).unwrap_or(0);
    let lo = grid[best.saturating_sub(1)].ln();
    let hi = grid[(best + 1).min(grid.len() - 1)].ln();
    let (ln_b, d) = golden_section_max(|x| distance(x.exp()).unwrap_or(0.0), lo, hi, search.rel_tol);
    let (brightness, distance_km) = if d >= dists[best] {
        (ln_b.exp(), d)
    } else {
        (grid[best], dists[best])
    };
    Ok(BrightnessOptimum {
        brightness,
        distance_km,
        at_lower_cap: brightness <= search.b_min * (1.0 + 2.0 * search.rel_tol),
    })
}
