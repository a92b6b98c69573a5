//! Single-photon parameter estimation and asymptotic GLLP key rates.
//!
//! Two protocols are modelled:
//!
//! * [`Protocol::Bb84G2Bound`]: plain BB84. Single-photon gain and error
//!   are bounded from the source's multi-photon probability, assuming the
//!   adversary gets every multi-photon pulse and every dark count for free.
//! * [`Protocol::Bb84Decoy2`]: BB84 with two decoy intensities, which pin
//!   down `Y_1` and `e_1` exactly. The decoy rounds are paid for through
//!   the sifting factor (1/2 basis sifting times 1/3 signal fraction);
//!   decoy intensities are not modelled and the intensity modulator is
//!   lossless.
//!
//! `SK = eta_sif [Q1 (1 - H2(e1)) - f Q_tot H2(E_tot)]`, clamped at zero.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_range, domain, Result};
use crate::link_model::{self, ChannelSpec, DetectionParams, Totals};
use crate::photon_stats::PhotonStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Protocol {
    Bb84G2Bound,
    Bb84Decoy2,
}

impl Protocol {
    pub fn sifting(&self) -> f64 {
        match self {
            Protocol::Bb84G2Bound => 0.5,
            Protocol::Bb84Decoy2 => 1.0 / 6.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Bb84G2Bound => "bb84",
            Protocol::Bb84Decoy2 => "decoy",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Protocol choice plus the post-processing constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub protocol: Protocol,
    /// Error-correction inefficiency `f >= 1`.
    pub ec_inefficiency: f64,
    /// Threshold above which a key counts as possible.
    pub delta: f64,
}

impl ProtocolConfig {
    pub const DEFAULT_EC_INEFFICIENCY: f64 = 1.2;
    pub const DEFAULT_DELTA: f64 = 1e-8;

    pub fn new(protocol: Protocol, ec_inefficiency: f64, delta: f64) -> Result<Self> {
        if !(ec_inefficiency.is_finite() && ec_inefficiency >= 1.0) {
            return Err(domain(format!("f = {ec_inefficiency} must be >= 1")));
        }
        check_range("delta", delta, 0.0, 1.0)?;
        Ok(Self {
            protocol,
            ec_inefficiency,
            delta,
        })
    }

    pub fn bb84() -> Self {
        Self {
            protocol: Protocol::Bb84G2Bound,
            ec_inefficiency: Self::DEFAULT_EC_INEFFICIENCY,
            delta: Self::DEFAULT_DELTA,
        }
    }

    pub fn decoy() -> Self {
        Self {
            protocol: Protocol::Bb84Decoy2,
            ..Self::bb84()
        }
    }

    pub fn sifting(&self) -> f64 {
        self.protocol.sifting()
    }
}

/// Why an operating point yields no key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InsecureReason {
    /// All clicks can be attributed to multi-photon pulses and dark counts.
    NoSinglePhotonGain,
    /// Single-photon error rate at or above 1/2.
    SinglePhotonErrorTooHigh,
    /// Total error rate at or above 1/2.
    TotalErrorTooHigh,
    /// Error-correction cost exceeds the privacy-amplified single-photon yield.
    ErrorCorrectionCost,
}

impl InsecureReason {
    pub fn code(&self) -> &'static str {
        match self {
            InsecureReason::NoSinglePhotonGain => "no_single_photon_gain",
            InsecureReason::SinglePhotonErrorTooHigh => "e1_too_high",
            InsecureReason::TotalErrorTooHigh => "qber_too_high",
            InsecureReason::ErrorCorrectionCost => "ec_cost",
        }
    }
}

impl fmt::Display for InsecureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Everything computed for one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub q_tot: f64,
    pub e_tot: f64,
    pub q1: f64,
    pub e1: f64,
    /// Secure key bits per pulse, never negative.
    pub sk: f64,
    pub insecure: Option<InsecureReason>,
}

impl RateReport {
    /// Whether the key rate clears the threshold `delta`.
    pub fn is_secure(&self, delta: f64) -> bool {
        self.insecure.is_none() && self.sk > delta
    }

    /// Reason code for output files (`ok` for secure points).
    pub fn reason_code(&self) -> &'static str {
        self.insecure.map_or("ok", |r| r.code())
    }
}

/// Binary Shannon entropy in bits with `H2(0) = H2(1) = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    check_range("x", x, 0.0, 1.0)?;
    Ok(h2(x))
}

fn h2(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        -x * x.log2() - (1.0 - x) * (-x).ln_1p() / std::f64::consts::LN_2
    }
}

/// Single-photon gain lower bound and error upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinglePhotonEstimate {
    pub q1: f64,
    pub e1: f64,
    pub insecure: Option<InsecureReason>,
}

/// `Q1 >= Q_tot - p_m - Y0 p0` and `e1 <= (E_tot Q_tot - Y0 p0 / 2) / Q1`.
///
/// `Q1` is clamped to `[0, Q_tot]` and `e1` to `[0, 1/2]`; a bound that
/// leaves those ranges marks the point insecure.
pub fn estimate_single_photon(
    s: &PhotonStats,
    t: &Totals,
    det: &DetectionParams,
) -> Result<SinglePhotonEstimate> {
    if !(t.q_tot > 0.0) {
        return Err(domain("Q_tot must be positive"));
    }
    let vacuum = det.y0 * s.p0();
    let q1 = t.q_tot - s.multi_photon() - vacuum;
    if q1 <= 0.0 {
        return Ok(SinglePhotonEstimate {
            q1: 0.0,
            e1: 0.5,
            insecure: Some(InsecureReason::NoSinglePhotonGain),
        });
    }
    let q1 = q1.min(t.q_tot);
    let e1 = (t.e_tot * t.q_tot - 0.5 * vacuum) / q1;
    if e1 >= 0.5 {
        return Ok(SinglePhotonEstimate {
            q1,
            e1: 0.5,
            insecure: Some(InsecureReason::SinglePhotonErrorTooHigh),
        });
    }
    Ok(SinglePhotonEstimate {
        q1,
        e1: e1.max(0.0),
        insecure: None,
    })
}

/// GLLP key rate for populated report fields. Returns the clamped rate and
/// the reason it is zero, if it is.
pub fn secure_key(
    q1: f64,
    e1: f64,
    q_tot: f64,
    e_tot: f64,
    cfg: &ProtocolConfig,
) -> (f64, Option<InsecureReason>) {
    if q1 <= 0.0 {
        return (0.0, Some(InsecureReason::NoSinglePhotonGain));
    }
    if e1 >= 0.5 {
        return (0.0, Some(InsecureReason::SinglePhotonErrorTooHigh));
    }
    if e_tot >= 0.5 {
        return (0.0, Some(InsecureReason::TotalErrorTooHigh));
    }
    let raw = cfg.sifting()
        * (q1 * (1.0 - h2(e1.max(0.0))) - cfg.ec_inefficiency * q_tot * h2(e_tot.max(0.0)));
    if raw > 0.0 {
        (raw, None)
    } else {
        (0.0, Some(InsecureReason::ErrorCorrectionCost))
    }
}

fn finish(t: Totals, q1: f64, e1: f64, flag: Option<InsecureReason>, cfg: &ProtocolConfig) -> RateReport {
    let (sk, reason) = match flag {
        Some(r) => (0.0, Some(r)),
        None => secure_key(q1, e1, t.q_tot, t.e_tot, cfg),
    };
    RateReport {
        q_tot: t.q_tot,
        e_tot: t.e_tot,
        q1,
        e1,
        sk,
        insecure: reason,
    }
}

/// Plain BB84 with the `g2`-based single-photon estimate.
pub fn bb84_rate(
    s: &PhotonStats,
    ch: &ChannelSpec,
    det: &DetectionParams,
    cfg: &ProtocolConfig,
) -> Result<RateReport> {
    if cfg.protocol != Protocol::Bb84G2Bound {
        return Err(domain("bb84_rate requires the BB84 g2-bound protocol"));
    }
    let t = link_model::totals(s, ch, det)?;
    let est = estimate_single_photon(s, &t, det)?;
    Ok(finish(t, est.q1, est.e1, est.insecure, cfg))
}

/// Two-decoy BB84: exact `Q1 = p1 Y1` and `e1` from the channel model.
pub fn decoy_rate(
    s: &PhotonStats,
    ch: &ChannelSpec,
    det: &DetectionParams,
    cfg: &ProtocolConfig,
) -> Result<RateReport> {
    if cfg.protocol != Protocol::Bb84Decoy2 {
        return Err(domain("decoy_rate requires the two-decoy protocol"));
    }
    let t = link_model::totals(s, ch, det)?;
    let q1 = s.p1() * link_model::yield_k(1, ch, det);
    let e1 = link_model::error_k(1, ch, det)?;
    Ok(finish(t, q1, e1, None, cfg))
}

/// Key rate for whichever protocol `cfg` selects.
pub fn rate(
    s: &PhotonStats,
    ch: &ChannelSpec,
    det: &DetectionParams,
    cfg: &ProtocolConfig,
) -> Result<RateReport> {
    match cfg.protocol {
        Protocol::Bb84G2Bound => bb84_rate(s, ch, det, cfg),
        Protocol::Bb84Decoy2 => decoy_rate(s, ch, det, cfg),
    }
}
