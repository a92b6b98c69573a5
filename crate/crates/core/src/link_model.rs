//! Analytic detection model: yields, error rates and their totals for a
//! truncated photon-number distribution sent through a lossy channel.

use serde::{Deserialize, Serialize};

use crate::error::{check_range, domain, Result};
use crate::photon_stats::PhotonStats;

/// Error rate of background (dark-count) clicks.
pub const BACKGROUND_ERROR: f64 = 0.5;

/// Standard single-mode fiber loss in dB/km.
pub const DEFAULT_ALPHA_DB_PER_KM: f64 = 0.17;

/// Receiver-side detection parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionParams {
    /// Detector efficiency.
    pub eta_d: f64,
    /// Dark-count probability per pulse.
    pub y0: f64,
    /// Misalignment (detection) error probability.
    pub e_d: f64,
}

impl DetectionParams {
    pub fn new(eta_d: f64, y0: f64, e_d: f64) -> Result<Self> {
        check_range("eta_d", eta_d, 0.0, 1.0)?;
        check_range("y0", y0, 0.0, 1.0)?;
        if y0 >= 1.0 {
            return Err(domain("y0 must be below 1"));
        }
        check_range("e_d", e_d, 0.0, 0.5)?;
        Ok(Self { eta_d, y0, e_d })
    }

    pub fn with_y0(self, y0: f64) -> Result<Self> {
        Self::new(self.eta_d, y0, self.e_d)
    }

    /// Background error rate, fixed at 1/2.
    pub fn e_0(&self) -> f64 {
        BACKGROUND_ERROR
    }
}

impl Default for DetectionParams {
    /// SNSPD parameters used throughout: `eta_d = 0.86`, `Y0 = 1.6e-6`,
    /// `e_d = 0.02`.
    fn default() -> Self {
        Self {
            eta_d: 0.86,
            y0: 1.6e-6,
            e_d: 0.02,
        }
    }
}

/// Quantum channel, either a fiber of given length or a bare transmission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ChannelSpec {
    Fiber { alpha_db_per_km: f64, length_km: f64 },
    Transmission(f64),
}

impl ChannelSpec {
    pub fn fiber(alpha_db_per_km: f64, length_km: f64) -> Result<Self> {
        check_range("alpha", alpha_db_per_km, 0.0, f64::MAX)?;
        check_range("length", length_km, 0.0, f64::MAX)?;
        Ok(Self::Fiber {
            alpha_db_per_km,
            length_km,
        })
    }

    pub fn transmission(eta_ch: f64) -> Result<Self> {
        if !(eta_ch > 0.0 && eta_ch <= 1.0) {
            return Err(domain(format!("eta_ch = {eta_ch} outside (0, 1]")));
        }
        Ok(Self::Transmission(eta_ch))
    }

    /// Channel transmission `eta_ch = 10^(-alpha L / 10)` for fibers.
    pub fn eta(&self) -> f64 {
        match *self {
            ChannelSpec::Fiber {
                alpha_db_per_km,
                length_km,
            } => 10f64.powf(-alpha_db_per_km * length_km / 10.0),
            ChannelSpec::Transmission(eta) => eta,
        }
    }
}

/// `1 - (1 - eta)^k`, accurate for small `eta`.
fn detect_prob(eta: f64, k: u32) -> f64 {
    if k == 0 {
        return 0.0;
    }
    if eta >= 1.0 {
        return 1.0;
    }
    -(f64::from(k) * (-eta).ln_1p()).exp_m1()
}

/// Yield of a k-photon pulse, `Y_k = Y0 + (1 - Y0)(1 - (1 - eta_d eta_ch)^k)`.
pub fn yield_k(k: u32, ch: &ChannelSpec, det: &DetectionParams) -> f64 {
    let eta = det.eta_d * ch.eta();
    det.y0 + (1.0 - det.y0) * detect_prob(eta, k)
}

/// Numerator `e_k Y_k = e_0 Y0 + e_d (1 - (1 - eta)^k)` of the k-photon error rate.
fn error_weight(k: u32, eta: f64, det: &DetectionParams) -> f64 {
    det.e_0() * det.y0 + det.e_d * detect_prob(eta, k)
}

/// Error rate of a k-photon pulse, `e_k = (e_0 Y0 + e_d (1 - (1 - eta)^k)) / Y_k`.
pub fn error_k(k: u32, ch: &ChannelSpec, det: &DetectionParams) -> Result<f64> {
    let y = yield_k(k, ch, det);
    if y <= 0.0 {
        return Err(domain(format!("yield of the {k}-photon state is zero")));
    }
    Ok(error_weight(k, det.eta_d * ch.eta(), det) / y)
}

/// Total gain and error rate seen by the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    /// `Q_tot = sum_{k=1..3} p_k Y_k`.
    pub q_tot: f64,
    /// `E_tot = (sum_{k=1..3} e_k p_k Y_k + e_0 Y0 p0) / Q_tot`.
    pub e_tot: f64,
}

/// Gain and error totals of a source.
///
/// The gain sums the photon-carrying pulses only. The error budget of
/// empty-pulse dark counts, `e_0 Y0 p0`, is carried in `E_tot` so that
/// subtracting `Y0 p0 / 2` when estimating the single-photon error leaves
/// exactly the photon-pulse errors.
pub fn totals(s: &PhotonStats, ch: &ChannelSpec, det: &DetectionParams) -> Result<Totals> {
    let eta = det.eta_d * ch.eta();
    let mut q_tot = 0.0;
    let mut errors = det.e_0() * det.y0 * s.p0();
    for k in 1..=3u32 {
        let p = s.p(k as usize);
        q_tot += p * (det.y0 + (1.0 - det.y0) * detect_prob(eta, k));
        errors += p * error_weight(k, eta, det);
    }
    if q_tot <= 0.0 {
        return Err(domain("total gain is zero"));
    }
    Ok(Totals {
        q_tot,
        e_tot: errors / q_tot,
    })
}
