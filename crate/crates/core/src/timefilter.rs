//! Temporal post-selection: only detections inside a gate of width `tau_a`
//! per repetition period are kept. Gating scales the dark-count
//! probability linearly, cuts brightness according to the emission decay,
//! and suppresses late spurious emission in `g2`.
//!
//! [`compare_strategies`] contrasts two ways of trading brightness for
//! purity on a fixed-detuning set of excitation powers: picking the best
//! power at full window, or running at maximal power and tuning the gate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::{g2_in_window, reference_area, CoincidenceHistogram, DarkBackground, PeakWindow};
use crate::error::{domain, Error, Result};
use crate::keyrate::{rate, ProtocolConfig};
use crate::link_model::{ChannelSpec, DetectionParams};
use crate::map::GridCell;
use crate::photon_stats::{infer_stats, SourceMeasurement};
use crate::search::{argmax, golden_section_max, log_space};

/// Radiative lifetime of the reference emitter (seconds).
pub const DEFAULT_LIFETIME: f64 = 1.07e-9;
pub const TAU_GRID_MIN: f64 = 0.05e-9;
pub const TAU_GRID_POINTS: usize = 50;

/// Gate of width `tau_a` starting at delay `t0` within each repetition period.
/// The receiver gate is taken equal to the sender gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterWindow {
    tau_a: f64,
    t0: f64,
    rep_period: f64,
}

impl FilterWindow {
    pub fn new(tau_a: f64, t0: f64, rep_period: f64) -> Result<Self> {
        if !(rep_period > 0.0 && rep_period.is_finite()) {
            return Err(domain("repetition period must be positive"));
        }
        if !(tau_a > 0.0 && tau_a <= rep_period) {
            return Err(domain(format!("gate width {tau_a:e} s outside (0, {rep_period:e}]")));
        }
        if !t0.is_finite() {
            return Err(domain("gate offset must be finite"));
        }
        Ok(Self { tau_a, t0, rep_period })
    }

    /// Open gate covering the whole period.
    pub fn full(rep_period: f64) -> Result<Self> {
        Self::new(rep_period, 0.0, rep_period)
    }

    pub fn tau_a(&self) -> f64 {
        self.tau_a
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn rep_period(&self) -> f64 {
        self.rep_period
    }

    pub fn is_full(&self) -> bool {
        self.tau_a == self.rep_period
    }

    /// Coincidence-delay window: events within `tau_a` of each peak center.
    fn peak_window(&self) -> PeakWindow {
        PeakWindow {
            half_width: self.tau_a,
            offset: self.t0,
        }
    }
}

/// Mono-exponential emission decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayModel {
    lifetime: f64,
    window_start_at_peak: bool,
}

impl DecayModel {
    pub fn new(lifetime: f64, window_start_at_peak: bool) -> Result<Self> {
        if !(lifetime > 0.0 && lifetime.is_finite()) {
            return Err(domain("lifetime must be positive"));
        }
        Ok(Self {
            lifetime,
            window_start_at_peak,
        })
    }

    pub fn lifetime(&self) -> f64 {
        self.lifetime
    }

    /// Fraction of the emission (within one period) that falls inside the gate.
    pub fn gate_fraction(&self, w: &FilterWindow) -> f64 {
        if w.is_full() {
            return 1.0;
        }
        let start = if self.window_start_at_peak { 0.0 } else { w.t0.max(0.0) };
        let end = (start + w.tau_a).min(w.rep_period);
        let cdf = |t: f64| -(-t / self.lifetime).exp_m1();
        (cdf(end) - cdf(start)) / cdf(w.rep_period)
    }
}

impl Default for DecayModel {
    fn default() -> Self {
        Self {
            lifetime: DEFAULT_LIFETIME,
            window_start_at_peak: true,
        }
    }
}

/// `Y0 tau_a / T_rep`.
pub fn filtered_dark(y0: f64, w: &FilterWindow) -> f64 {
    y0 * (w.tau_a / w.rep_period)
}

/// Where the gated-brightness fraction comes from.
#[derive(Debug, Clone, Copy)]
pub enum BrightnessSource<'a> {
    Model(DecayModel),
    Histogram {
        histogram: &'a CoincidenceHistogram,
        dark: Option<&'a DarkBackground>,
        blink_far_peaks: usize,
    },
}

/// Brightness after gating. The model path scales by the decay fraction
/// inside the gate; the histogram path by the ratio of windowed to full
/// blinking-corrected side-peak areas.
pub fn filtered_brightness(b: f64, source: BrightnessSource<'_>, w: &FilterWindow) -> Result<f64> {
    match source {
        BrightnessSource::Model(model) => Ok(b * model.gate_fraction(w)),
        BrightnessSource::Histogram {
            histogram,
            dark,
            blink_far_peaks,
        } => {
            let full = reference_area(histogram, dark, blink_far_peaks, None)?;
            if !(full.area > 0.0) {
                return Err(Error::ZeroReference);
            }
            if w.is_full() {
                return Ok(b);
            }
            let gated = reference_area(histogram, dark, blink_far_peaks, Some(&w.peak_window()))?;
            Ok(b * gated.area / full.area)
        }
    }
}

/// `g2(0)` with the gate applied identically to the central and side peaks.
pub fn filtered_g2(
    h: &CoincidenceHistogram,
    dark: Option<&DarkBackground>,
    w: &FilterWindow,
    blink_far_peaks: usize,
) -> Result<crate::correlation::G2Estimate> {
    let window = (!w.is_full()).then(|| w.peak_window());
    g2_in_window(h, dark, blink_far_peaks, window.as_ref())
}

/// Source description for the gate-tuning branch of [`compare_strategies`].
#[derive(Debug, Clone, Copy)]
pub enum FilterSource<'a> {
    /// Decay model; `g2` is taken as unaffected by gating.
    Model(DecayModel),
    /// Measured histogram of the maximal-power cell.
    Histogram {
        histogram: &'a CoincidenceHistogram,
        dark: Option<&'a DarkBackground>,
        blink_far_peaks: usize,
    },
}

/// Gated source parameters `(B, g2, Y0)` and their key rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GatedOperatingPoint {
    pub brightness: f64,
    pub g2: f64,
    pub y0: f64,
    pub sk: f64,
}

/// Key rate of a gated source at one channel.
pub fn gated_key_rate(
    cell: &GridCell,
    source: FilterSource<'_>,
    w: &FilterWindow,
    ch: &ChannelSpec,
    det: &DetectionParams,
    cfg: &ProtocolConfig,
) -> Result<GatedOperatingPoint> {
    let (brightness, g2) = match source {
        FilterSource::Model(model) => (
            filtered_brightness(cell.brightness, BrightnessSource::Model(model), w)?,
            cell.g2,
        ),
        FilterSource::Histogram {
            histogram,
            dark,
            blink_far_peaks,
        } => {
            let b = filtered_brightness(
                cell.brightness,
                BrightnessSource::Histogram {
                    histogram,
                    dark,
                    blink_far_peaks,
                },
                w,
            )?;
            (b, filtered_g2(histogram, dark, w, blink_far_peaks)?.g2.max(0.0))
        }
    };
    let y0 = filtered_dark(det.y0, w);
    let m = SourceMeasurement::new(brightness, g2)?;
    let stats = infer_stats(&m)?;
    let report = rate(&stats, ch, &det.with_y0(y0)?, cfg)?;
    Ok(GatedOperatingPoint {
        brightness,
        g2,
        y0,
        sk: report.sk,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyPoint {
    pub distance_km: f64,
    /// Best key rate over the power settings at full window.
    pub sk_power: f64,
    /// Power label of the best setting.
    pub best_power: f64,
    /// Best key rate at maximal power over the gate width.
    pub sk_filter: f64,
    /// Optimal gate width (seconds), `None` when no gate yields a key.
    pub tau_opt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyComparison {
    pub max_power: f64,
    pub points: Vec<StrategyPoint>,
    /// First distance where gating beats power tuning by more than 10%.
    pub crossover_km: Option<f64>,
}

/// Best gate width at one channel: log grid over `[0.05 ns, T_rep]`, then
/// one golden-section refinement between the neighbours of the grid optimum.
pub fn optimize_gate(
    cell: &GridCell,
    source: FilterSource<'_>,
    rep_period: f64,
    ch: &ChannelSpec,
    det: &DetectionParams,
    cfg: &ProtocolConfig,
) -> Result<(Option<f64>, f64)> {
    let grid = log_space(TAU_GRID_MIN.min(rep_period), rep_period, TAU_GRID_POINTS);
    let sk_at = |tau: f64| -> Result<f64> {
        let w = FilterWindow::new(tau.min(rep_period), 0.0, rep_period)?;
        Ok(gated_key_rate(cell, source, &w, ch, det, cfg)?.sk)
    };
    let values = grid.iter().map(|&t| sk_at(t)).collect::<Result<Vec<_>>>()?;
    let Some(i) = argmax(&values) else {
        return Ok((None, 0.0));
    };
    if !(values[i] > cfg.delta) {
        return Ok((None, 0.0));
    }
    let lo = grid[i.saturating_sub(1)].ln();
    let hi = grid[(i + 1).min(grid.len() - 1)].ln();
    let (x, fx) = golden_section_max(|x| sk_at(x.exp()).unwrap_or(0.0), lo, hi, 1e-4);
    Ok(if fx > values[i] {
        (Some(x.exp()), fx)
    } else {
        (Some(grid[i]), values[i])
    })
}

/// Power tuning at full window versus gate tuning at maximal power, over
/// a list of fiber lengths. `cells` is the set of power settings at one
/// detuning.
pub fn compare_strategies(
    cells: &[GridCell],
    source: FilterSource<'_>,
    rep_period: f64,
    det: &DetectionParams,
    cfg: &ProtocolConfig,
    alpha_db_per_km: f64,
    distances_km: &[f64],
) -> Result<StrategyComparison> {
    let max_cell = cells
        .iter()
        .max_by(|a, b| a.power.total_cmp(&b.power))
        .ok_or_else(|| Error::MissingData("no power settings at the requested detuning".into()))?;
    let full = FilterWindow::full(rep_period)?;
    let points = distances_km
        .par_iter()
        .map(|&d| -> Result<StrategyPoint> {
            let ch = ChannelSpec::fiber(alpha_db_per_km, d)?;
            let mut sk_power = 0.0;
            let mut best_power = max_cell.power;
            for cell in cells {
                let m = SourceMeasurement::new(cell.brightness, cell.g2)?;
                let sk = rate(&infer_stats(&m)?, &ch, det, cfg)?.sk;
                if sk > sk_power {
                    sk_power = sk;
                    best_power = cell.power;
                }
            }
            let (tau_opt, sk_filter) = optimize_gate(max_cell, source, full.rep_period(), &ch, det, cfg)?;
            Ok(StrategyPoint {
                distance_km: d,
                sk_power,
                best_power,
                sk_filter,
                tau_opt,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let crossover_km = points
        .iter()
        .find(|p| p.sk_filter > 1.1 * p.sk_power)
        .map(|p| p.distance_km);
    Ok(StrategyComparison {
        max_power: max_cell.power,
        points,
        crossover_km,
    })
}
