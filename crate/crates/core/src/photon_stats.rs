//! Photon-number distributions of a pulsed source.
//!
//! Distributions are truncated at three photons (`p_n = 0` for `n >= 4`).
//! When only the total multi-photon probability is known it is assigned to
//! the two-photon term, which is the case where the `g2`-based bound is
//! tight.

use serde::{Deserialize, Serialize};

use crate::error::{check_range, domain, Error, Result};

/// Tolerance on `p0 + p1 + p2 + p3 = 1`.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Truncated photon-number distribution per excitation pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonStats {
    p0: f64,
    p1: f64,
    p2: f64,
    p3: f64,
}

impl PhotonStats {
    /// Builds a distribution, rejecting negative entries or a sum that is
    /// not 1 within [`NORMALIZATION_TOL`]. Nothing is renormalized.
    pub fn new(p0: f64, p1: f64, p2: f64, p3: f64) -> Result<Self> {
        for (name, p) in [("p0", p0), ("p1", p1), ("p2", p2), ("p3", p3)] {
            check_range(name, p, 0.0, 1.0)?;
        }
        let sum = p0 + p1 + p2 + p3;
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(domain(format!("populations sum to {sum}, not 1")));
        }
        Ok(Self { p0, p1, p2, p3 })
    }

    /// Builds a distribution from the photon-emitting populations, with
    /// `p0 = 1 - p1 - p2 - p3`.
    pub fn from_emitting(p1: f64, p2: f64, p3: f64) -> Result<Self> {
        Self::new(1.0 - (p1 + p2 + p3), p1, p2, p3)
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn p2(&self) -> f64 {
        self.p2
    }

    pub fn p3(&self) -> f64 {
        self.p3
    }

    /// Population of photon number `k` (zero beyond three).
    pub fn p(&self, k: usize) -> f64 {
        match k {
            0 => self.p0,
            1 => self.p1,
            2 => self.p2,
            3 => self.p3,
            _ => 0.0,
        }
    }

    /// `B = p1 + p2 + p3`.
    pub fn brightness(&self) -> f64 {
        self.p1 + self.p2 + self.p3
    }

    /// `p_m = p2 + p3`.
    pub fn multi_photon(&self) -> f64 {
        self.p2 + self.p3
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.p1 + 2.0 * self.p2 + 3.0 * self.p3
    }

    /// Whether single-photon emission dominates (`p1 > p_m`). The `g2`
    /// bound is derived under this assumption; violating inputs are
    /// accepted and only reported through this flag.
    pub fn single_photon_dominant(&self) -> bool {
        self.p1 > self.multi_photon()
    }
}

/// Measured brightness and zero-delay autocorrelation of a source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceMeasurement {
    brightness: f64,
    g2: f64,
}

impl SourceMeasurement {
    /// Accepts `B` in `[0, 1]`, sub-Poissonian `g2` in `[0, 1)` and
    /// `B * g2 < 1/2`.
    pub fn new(brightness: f64, g2: f64) -> Result<Self> {
        check_range("brightness", brightness, 0.0, 1.0)?;
        if !(g2.is_finite() && (0.0..1.0).contains(&g2)) {
            return Err(domain(format!("g2 = {g2} outside the sub-Poissonian range [0, 1)")));
        }
        if 2.0 * brightness * g2 >= 1.0 {
            return Err(domain(format!(
                "2 * B * g2 = {} >= 1, the multi-photon bound is undefined",
                2.0 * brightness * g2
            )));
        }
        Ok(Self { brightness, g2 })
    }

    pub fn brightness(&self) -> f64 {
        self.brightness
    }

    pub fn g2(&self) -> f64 {
        self.g2
    }

    /// Single-photon purity `1 - g2`.
    pub fn purity(&self) -> f64 {
        1.0 - self.g2
    }
}

/// Upper bound on the multi-photon probability from `(B, g2)`:
/// `p_m <= (1 - B g2 - sqrt(1 - 2 B g2)) / g2`.
///
/// Evaluated as `B^2 g2 / (1 - B g2 + sqrt(1 - 2 B g2))`, which is the same
/// expression with the numerator rationalized. It reduces to `B^2 g2 / 2`
/// for small `B g2` without losing digits, and to 0 at `g2 = 0`.
pub fn bound_multi_photon(m: &SourceMeasurement) -> f64 {
    multi_photon_bound(m.brightness, m.g2)
}

/// Unchecked form of [`bound_multi_photon`] for `B, g2 >= 0`, `2 B g2 < 1`.
/// The `g2 < 1` restriction of [`SourceMeasurement`] is not needed here.
pub(crate) fn multi_photon_bound(b: f64, g2: f64) -> f64 {
    let x = b * g2;
    let pm = b * b * g2 / (1.0 - x + (1.0 - 2.0 * x).sqrt());
    pm.min(b)
}

/// Same bound for raw inputs, with the domain checks of the formula only.
pub fn bound_multi_photon_raw(brightness: f64, g2: f64) -> Result<f64> {
    check_range("brightness", brightness, 0.0, 1.0)?;
    if !(g2.is_finite() && g2 >= 0.0) {
        return Err(domain(format!("g2 = {g2} is negative or not finite")));
    }
    if 2.0 * brightness * g2 > 1.0 {
        return Err(domain("2 * B * g2 > 1, the multi-photon bound is undefined"));
    }
    Ok(multi_photon_bound(brightness, g2))
}

/// Photon-number distribution implied by a measurement: `p0 = 1 - B`,
/// `p2 = p_m` from the bound, `p3 = 0`, `p1 = B - p_m`.
pub fn infer_stats(m: &SourceMeasurement) -> Result<PhotonStats> {
    let b = m.brightness;
    let pm = bound_multi_photon(m);
    let p1 = b - pm;
    if p1 < 0.0 {
        return Err(Error::Inconsistent(format!(
            "multi-photon bound {pm} exceeds brightness {b}"
        )));
    }
    PhotonStats::new(1.0 - b, p1, pm, 0.0)
}

/// `g2 = (2 p2 + 6 p3) / (p1 + 2 p2 + 3 p3)^2`.
pub fn g2_of_stats(s: &PhotonStats) -> Result<f64> {
    let mean = s.mean_photon_number();
    if mean <= 0.0 {
        return Err(domain("g2 undefined for zero mean photon number"));
    }
    Ok((2.0 * s.p2 + 6.0 * s.p3) / (mean * mean))
}

/// Passes the source through a beam splitter with transmission `eta_att`.
///
/// Requires `p3 = 0`. The result keeps the multi-photon weight in `p2`:
/// `p0' = p0 + p1 (1-eta) + p_m (1-eta)^2`, `p1' = p1 eta + 2 p_m eta (1-eta)`,
/// `p_m' = p_m eta^2`.
pub fn attenuate(s: &PhotonStats, eta_att: f64) -> Result<PhotonStats> {
    check_range("eta_att", eta_att, 0.0, 1.0)?;
    if s.p3 != 0.0 {
        return Err(domain("attenuation model requires p3 = 0"));
    }
    let loss = 1.0 - eta_att;
    let pm = s.p2;
    let p0 = s.p0 + s.p1 * loss + pm * loss * loss;
    let p1 = s.p1 * eta_att + pm * 2.0 * eta_att * loss;
    let p2 = pm * eta_att * eta_att;
    PhotonStats::new(p0, p1, p2, 0.0)
}
