//! Evaluation of Hanbury Brown–Twiss coincidence data: double-count
//! correction, measured brightness, dark-coincidence background and `g2(0)`
//! from the central repetition period against blinking-corrected side peaks.
//!
//! Histogram text format (one header line, then two columns in this order):
//!
//! ```text
//! # bin_width=1e-10 rep_period=1.316655694535879e-8
//! delay_s,counts
//! -7.2e-8,12
//! ...
//! ```
//!
//! The `delay_s,counts` column line is optional; columns may be separated
//! by a comma or whitespace.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_range, domain, Error, Result};
use crate::photon_stats::PhotonStats;
use crate::search::log_space;

pub const DEFAULT_BIN_WIDTH: f64 = 100e-12;
pub const DEFAULT_REP_RATE_HZ: f64 = 75.95e6;
pub const DEFAULT_SETUP_EFFICIENCY: f64 = 0.15;
pub const DEFAULT_BLINK_FAR_PEAKS: usize = 5;
/// Complete side peaks required on each side of zero delay.
pub const MIN_SIDE_PEAKS: usize = 5;

/// Coincidence counts versus detector delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceHistogram {
    bin_width: f64,
    rep_period: f64,
    center_index: usize,
    counts: Vec<u64>,
}

impl CoincidenceHistogram {
    /// `center_index` is the bin at zero delay; bin `i` sits at
    /// `(i - center_index) * bin_width`.
    pub fn new(bin_width: f64, rep_period: f64, center_index: usize, counts: Vec<u64>) -> Result<Self> {
        if !(bin_width > 0.0 && bin_width.is_finite() && rep_period.is_finite()) {
            return Err(domain("bin width and repetition period must be positive"));
        }
        if rep_period / bin_width < 10.0 {
            return Err(domain(format!(
                "repetition period spans {:.2} bins, need at least 10",
                rep_period / bin_width
            )));
        }
        if center_index >= counts.len() {
            return Err(domain("center index outside the histogram"));
        }
        Ok(Self {
            bin_width,
            rep_period,
            center_index,
            counts,
        })
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn rep_period(&self) -> f64 {
        self.rep_period
    }

    pub fn center_index(&self) -> usize {
        self.center_index
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn delay(&self, i: usize) -> f64 {
        (i as f64 - self.center_index as f64) * self.bin_width
    }

    /// Same histogram with every count multiplied by `factor`.
    pub fn scaled(&self, factor: u64) -> Self {
        Self {
            counts: self.counts.iter().map(|c| c * factor).collect(),
            ..self.clone()
        }
    }

    /// Serializes to the two-column text format.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# bin_width={:e} rep_period={:e}\ndelay_s,counts\n",
            self.bin_width, self.rep_period
        );
        for (i, c) in self.counts.iter().enumerate() {
            let _ = writeln!(out, "{:e},{}", self.delay(i), c);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        parse_histogram(text)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        parse_histogram(&std::fs::read_to_string(path)?)
    }

    /// Peak index of each bin: the nearest multiple of the repetition period.
    fn peak_of(&self, i: usize) -> i64 {
        (self.delay(i) / self.rep_period).round() as i64
    }

    /// Whether the bins cover the whole repetition period around peak `n`.
    fn peak_complete(&self, n: i64) -> bool {
        let half_bin = 0.5 * self.bin_width;
        let first = self.delay(0) - half_bin;
        let last = self.delay(self.counts.len() - 1) + half_bin;
        let center = n as f64 * self.rep_period;
        let slack = 1e-9 * self.bin_width;
        first <= center - 0.5 * self.rep_period + slack && last >= center + 0.5 * self.rep_period - slack
    }

    /// Raw counts and bin counts per complete peak, optionally restricted to
    /// a window around each peak center.
    fn peak_sums(&self, window: Option<&PeakWindow>) -> BTreeMap<i64, (u64, usize)> {
        let mut sums: BTreeMap<i64, (u64, usize)> = BTreeMap::new();
        for (i, &c) in self.counts.iter().enumerate() {
            let n = self.peak_of(i);
            if let Some(w) = window {
                let offset = self.delay(i) - n as f64 * self.rep_period - w.offset;
                if offset.abs() > w.half_width {
                    continue;
                }
            }
            let e = sums.entry(n).or_insert((0, 0));
            e.0 += c;
            e.1 += 1;
        }
        sums.retain(|&n, _| self.peak_complete(n));
        sums
    }
}

fn parse_histogram(text: &str) -> Result<CoincidenceHistogram> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i as u64 + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        message: "empty histogram file".into(),
    })?;
    let parse_err = |line: u64, message: String| Error::Parse { line, message };
    let fields: Vec<&str> = header
        .strip_prefix('#')
        .ok_or_else(|| parse_err(hline, "expected header '# bin_width=<s> rep_period=<s>'".into()))?
        .split_whitespace()
        .collect();
    let value = |field: Option<&&str>, key: &str| -> Result<f64> {
        field
            .and_then(|f| f.strip_prefix(key))
            .and_then(|v| v.strip_prefix('='))
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| parse_err(hline, format!("header must give {key}=<seconds> in order")))
    };
    let bin_width = value(fields.first(), "bin_width")?;
    let rep_period = value(fields.get(1), "rep_period")?;

    let mut delays: Vec<f64> = Vec::new();
    let mut counts = Vec::new();
    for (line, l) in lines {
        if l.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = l.split(|c: char| c == ',' || c.is_whitespace()).filter(|c| !c.is_empty()).collect();
        if cols == ["delay_s", "counts"] && delays.is_empty() {
            continue;
        }
        if cols.len() != 2 {
            return Err(parse_err(line, format!("expected 2 columns (delay_s, counts), got {}", cols.len())));
        }
        let delay: f64 = cols[0]
            .parse()
            .map_err(|_| parse_err(line, format!("bad delay '{}'", cols[0])))?;
        let count: u64 = cols[1]
            .parse()
            .map_err(|_| parse_err(line, format!("bad count '{}' (non-negative integer expected)", cols[1])))?;
        if let Some(&first) = delays.first() {
            let expected = first + delays.len() as f64 * bin_width;
            if (delay - expected).abs() > 1e-3 * bin_width {
                return Err(parse_err(line, format!("delay {delay:e} breaks the uniform bin spacing")));
            }
        }
        delays.push(delay);
        counts.push(count);
    }
    if counts.is_empty() {
        return Err(parse_err(hline, "histogram has no rows".into()));
    }
    let center_index = delays
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    if delays[center_index].abs() > 0.5 * bin_width {
        return Err(Error::Parse {
            line: hline,
            message: "no bin at zero delay".into(),
        });
    }
    CoincidenceHistogram::new(bin_width, rep_period, center_index, counts)
}

/// Detector and dark count rates of one measurement run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountRates {
    /// Raw count rates of the two detectors (Hz).
    pub r1: f64,
    pub r2: f64,
    /// Dark count rates (Hz).
    pub r1_dark: f64,
    pub r2_dark: f64,
    /// Coincidence rate within one repetition period (Hz).
    pub cc12: f64,
    /// Laser repetition rate (Hz).
    pub nu_rep: f64,
    pub eta_setup: f64,
    pub eta_d: f64,
}

impl CountRates {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("r1", self.r1),
            ("r2", self.r2),
            ("r1_dark", self.r1_dark),
            ("r2_dark", self.r2_dark),
            ("cc12", self.cc12),
            ("nu_rep", self.nu_rep),
        ] {
            check_range(name, v, 0.0, f64::MAX)?;
        }
        for (name, v) in [("eta_setup", self.eta_setup), ("eta_d", self.eta_d)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(domain(format!("{name} = {v} outside (0, 1]")));
            }
        }
        Ok(())
    }
}

/// Apparent brightness when both detector rates are summed naively:
/// `B + p2/2 + 3 p3/4`.
pub fn expected_double_count(s: &PhotonStats) -> f64 {
    s.brightness() + 0.5 * s.p2() + 0.75 * s.p3()
}

/// `B = (R1 + R2 - CC12) / (nu_rep eta_setup eta_d)`.
pub fn measured_brightness(c: &CountRates) -> Result<f64> {
    c.validate()?;
    let b = (c.r1 + c.r2 - c.cc12) / (c.nu_rep * c.eta_setup * c.eta_d);
    check_range("measured brightness", b, 0.0, 1.0)?;
    Ok(b)
}

/// Rate density of coincidences involving at least one dark count,
/// `R1 R2d + R2 R1d + R1d R2d` (Hz^2). Multiply by bin width and
/// acquisition time for counts per bin.
pub fn dark_coincidences(c: &CountRates) -> f64 {
    c.r1 * c.r2_dark + c.r2 * c.r1_dark + c.r1_dark * c.r2_dark
}

/// Flat background to subtract from every histogram bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DarkBackground {
    pub per_bin: f64,
}

impl DarkBackground {
    pub fn from_rates(c: &CountRates, bin_width: f64, acquisition_time: f64) -> Result<Self> {
        c.validate()?;
        check_range("acquisition_time", acquisition_time, 0.0, f64::MAX)?;
        Ok(Self {
            per_bin: dark_coincidences(c) * bin_width * acquisition_time,
        })
    }
}

/// Acceptance window applied around every peak center `n T_rep + offset`:
/// bins with `|delay - n T_rep - offset| <= half_width` are kept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakWindow {
    pub half_width: f64,
    pub offset: f64,
}

/// How the uncorrelated reference area was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ReferenceMethod {
    /// Asymptote of `A(n) = A_inf (1 - c exp(-|n| / n_b))` fitted to the side peaks.
    BlinkingFit { amplitude: f64, decay_peaks: f64 },
    /// Mean of the side peaks with `|n| >= from_peak`.
    FarPeakMean { from_peak: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceArea {
    pub area: f64,
    pub sigma: f64,
    pub method: ReferenceMethod,
    /// Side peaks per side that were available.
    pub side_peaks: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2Estimate {
    pub g2: f64,
    /// One-sigma statistical uncertainty from Poisson counting.
    pub sigma: f64,
    pub central_area: f64,
    pub reference: ReferenceArea,
    /// Background subtraction would have made some peak area negative.
    pub background_clamped: bool,
}

struct PeakAreas {
    /// Background-subtracted area and raw counts by peak index.
    areas: BTreeMap<i64, (f64, f64)>,
    clamped: bool,
}

fn peak_areas(h: &CoincidenceHistogram, dark: Option<&DarkBackground>, window: Option<&PeakWindow>) -> PeakAreas {
    let per_bin = dark.map_or(0.0, |d| d.per_bin);
    let mut clamped = false;
    let areas = h
        .peak_sums(window)
        .into_iter()
        .map(|(n, (raw, bins))| {
            let raw = raw as f64;
            let mut area = raw - per_bin * bins as f64;
            if area < 0.0 {
                clamped = true;
                area = 0.0;
            }
            (n, (area, raw))
        })
        .collect();
    PeakAreas { areas, clamped }
}

/// Number of consecutive complete side peaks present on both sides.
fn side_peak_count(areas: &BTreeMap<i64, (f64, f64)>) -> usize {
    let mut m = 0;
    while areas.contains_key(&(m as i64 + 1)) && areas.contains_key(&-(m as i64 + 1)) {
        m += 1;
    }
    m
}

fn estimate_reference(
    areas: &BTreeMap<i64, (f64, f64)>,
    blink_far_peaks: usize,
) -> Result<ReferenceArea> {
    let m_max = side_peak_count(areas);
    if m_max < MIN_SIDE_PEAKS {
        return Err(Error::InsufficientSpan {
            available: m_max,
            required: MIN_SIDE_PEAKS,
        });
    }
    if blink_far_peaks == 0 || blink_far_peaks > m_max {
        return Err(Error::InsufficientSpan {
            available: m_max,
            required: blink_far_peaks.max(1),
        });
    }
    // Symmetrized areas and their Poisson variances.
    let points: Vec<(f64, f64, f64)> = (1..=m_max as i64)
        .map(|m| {
            let (a_pos, r_pos) = areas[&m];
            let (a_neg, r_neg) = areas[&-m];
            (m as f64, 0.5 * (a_pos + a_neg), 0.25 * (r_pos + r_neg))
        })
        .collect();

    if let Some(fit) = fit_blinking(&points) {
        return Ok(ReferenceArea {
            side_peaks: m_max,
            ..fit
        });
    }
    let far: Vec<_> = points.iter().filter(|p| p.0 >= blink_far_peaks as f64).collect();
    let k = far.len() as f64;
    let area = far.iter().map(|p| p.1).sum::<f64>() / k;
    let var = far.iter().map(|p| p.2).sum::<f64>() / (k * k);
    Ok(ReferenceArea {
        area,
        sigma: var.sqrt(),
        method: ReferenceMethod::FarPeakMean {
            from_peak: blink_far_peaks,
        },
        side_peaks: m_max,
    })
}

/// Weighted least-squares fit of `a + b exp(-m / n_b)` with `n_b` scanned
/// on a grid. Returns `None` unless the blinking term is significant
/// (`|b| > 3 sigma_b`), well conditioned and decays within the span.
fn fit_blinking(points: &[(f64, f64, f64)]) -> Option<ReferenceArea> {
    let m_max = points.len() as f64;
    if points.len() < 4 {
        return None;
    }
    let mut best: Option<(f64, f64, f64, f64, f64, f64)> = None; // chi2, n_b, a, b, var_a, var_b
    for n_b in log_space(0.25, 0.5 * m_max, 48) {
        let (mut s00, mut s01, mut s11, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(m, y, var) in points {
            let w = 1.0 / var.max(1.0);
            let e = (-m / n_b).exp();
            s00 += w;
            s01 += w * e;
            s11 += w * e * e;
            t0 += w * y;
            t1 += w * e * y;
        }
        let det = s00 * s11 - s01 * s01;
        if !(det > 1e-12 * s00 * s11) {
            continue;
        }
        let a = (s11 * t0 - s01 * t1) / det;
        let b = (s00 * t1 - s01 * t0) / det;
        let chi2: f64 = points
            .iter()
            .map(|&(m, y, var)| {
                let r = y - a - b * (-m / n_b).exp();
                r * r / var.max(1.0)
            })
            .sum();
        if best.is_none_or(|bst| chi2 < bst.0) {
            best = Some((chi2, n_b, a, b, s11 / det, s00 / det));
        }
    }
    let (chi2, n_b, a, b, var_a, var_b) = best?;
    let dof = (points.len() as f64 - 3.0).max(1.0);
    let scale = (chi2 / dof).max(1.0);
    let (var_a, var_b) = (var_a * scale, var_b * scale);
    if !(a > 0.0) || b.abs() <= 3.0 * var_b.sqrt() || n_b >= 0.5 * m_max {
        return None;
    }
    Some(ReferenceArea {
        area: a,
        sigma: var_a.sqrt(),
        method: ReferenceMethod::BlinkingFit {
            amplitude: -b / a,
            decay_peaks: n_b,
        },
        side_peaks: 0,
    })
}

/// Blinking-corrected uncorrelated peak area, optionally within a window.
pub fn reference_area(
    h: &CoincidenceHistogram,
    dark: Option<&DarkBackground>,
    blink_far_peaks: usize,
    window: Option<&PeakWindow>,
) -> Result<ReferenceArea> {
    estimate_reference(&peak_areas(h, dark, window).areas, blink_far_peaks)
}

/// `g2(0)` with every peak restricted to `window` (full periods when `None`).
pub fn g2_in_window(
    h: &CoincidenceHistogram,
    dark: Option<&DarkBackground>,
    blink_far_peaks: usize,
    window: Option<&PeakWindow>,
) -> Result<G2Estimate> {
    let peaks = peak_areas(h, dark, window);
    let reference = estimate_reference(&peaks.areas, blink_far_peaks)?;
    if !(reference.area > 0.0) {
        return Err(Error::ZeroReference);
    }
    let (central, central_raw) = peaks.areas.get(&0).copied().ok_or(Error::InsufficientSpan {
        available: 0,
        required: MIN_SIDE_PEAKS,
    })?;
    let r = reference.area;
    let g2 = central / r;
    let var = central_raw / (r * r) + central * central * reference.sigma.powi(2) / r.powi(4);
    Ok(G2Estimate {
        g2,
        sigma: var.sqrt(),
        central_area: central,
        reference,
        background_clamped: peaks.clamped,
    })
}

/// `g2(0)` integrated over the full central repetition period and divided
/// by the blinking-corrected side-peak area.
pub fn g2_zero(
    h: &CoincidenceHistogram,
    dark: Option<&DarkBackground>,
    blink_far_peaks: usize,
) -> Result<G2Estimate> {
    g2_in_window(h, dark, blink_far_peaks, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    const T: f64 = 1.0 / DEFAULT_REP_RATE_HZ;

    /// Histogram with `peaks` side peaks per side; each peak puts
    /// `area(n)` counts into the bin nearest its center.
    pub(crate) fn comb(peaks: i64, area: impl Fn(i64) -> u64) -> CoincidenceHistogram {
        let bw = DEFAULT_BIN_WIDTH;
        let half = ((peaks as f64 + 0.5) * T / bw).ceil() as i64;
        let mut counts = vec![0u64; (2 * half + 1) as usize];
        for n in -peaks..=peaks {
            let idx = (n as f64 * T / bw).round() as i64 + half;
            counts[idx as usize] += area(n);
        }
        CoincidenceHistogram::new(bw, T, half as usize, counts).unwrap()
    }

    #[test]
    fn double_count_examples() {
        let s = PhotonStats::from_emitting(0.1, 0.0, 0.0).unwrap();
        assert_eq!(expected_double_count(&s), 0.1);
        let s = PhotonStats::from_emitting(0.0, 0.1, 0.0).unwrap();
        assert!((expected_double_count(&s) - 0.15).abs() < 1e-16);
    }

    #[test]
    fn double_count_matches_splitter_enumeration() {
        // Every n-photon pulse on a 50:50 splitter: enumerate the 2^n
        // detector assignments and count how many detectors fire.
        let s = PhotonStats::from_emitting(0.31, 0.07, 0.013).unwrap();
        let mut clicks = 0.0;
        for n in 1..=3u32 {
            let mut hit = 0.0;
            for assignment in 0..(1u32 << n) {
                let to_first = assignment.count_ones();
                hit += f64::from(u8::from(to_first > 0) + u8::from(to_first < n));
            }
            clicks += s.p(n as usize) * hit / f64::from(1u32 << n);
        }
        assert!((expected_double_count(&s) - clicks).abs() < 1e-15);
    }

    fn rates(r1: f64, r2: f64, r1d: f64, r2d: f64, cc: f64) -> CountRates {
        CountRates {
            r1,
            r2,
            r1_dark: r1d,
            r2_dark: r2d,
            cc12: cc,
            nu_rep: DEFAULT_REP_RATE_HZ,
            eta_setup: DEFAULT_SETUP_EFFICIENCY,
            eta_d: 0.86,
        }
    }

    #[test]
    fn measured_brightness_examples() {
        assert_eq!(measured_brightness(&rates(0.0, 0.0, 0.0, 0.0, 0.0)).unwrap(), 0.0);

        let full = DEFAULT_REP_RATE_HZ * DEFAULT_SETUP_EFFICIENCY * 0.86;
        let b = measured_brightness(&rates(full / 2.0, full / 2.0, 0.0, 0.0, 0.0)).unwrap();
        assert!((b - 1.0).abs() < 1e-15);

        let b = measured_brightness(&rates(1.2e5, 1.1e5, 0.0, 0.0, 300.0)).unwrap();
        assert!((b - 0.023_444_636_669_371_424).abs() < 1e-15, "{b}");

        assert!(measured_brightness(&rates(full, full, 0.0, 0.0, 0.0)).is_err());
        assert!(measured_brightness(&rates(-1.0, 0.0, 0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn dark_coincidence_examples() {
        assert_eq!(dark_coincidences(&rates(1e5, 2e5, 0.0, 0.0, 0.0)), 0.0);
        assert_eq!(dark_coincidences(&rates(1e5, 1e5, 100.0, 100.0, 0.0)), 2.001e7);
        let a = dark_coincidences(&rates(1e5, 3e4, 50.0, 120.0, 0.0));
        let b = dark_coincidences(&rates(3e4, 1e5, 120.0, 50.0, 0.0));
        assert_eq!(a, b);
    }

    #[test]
    fn g2_trivial_histograms() {
        let empty_center = comb(6, |n| if n == 0 { 0 } else { 1000 });
        let est = g2_zero(&empty_center, None, 5).unwrap();
        assert_eq!(est.g2, 0.0);

        let flat = comb(6, |_| 1000);
        let est = g2_zero(&flat, None, 5).unwrap();
        assert!((est.g2 - 1.0).abs() < 1e-12);
        assert!(matches!(est.reference.method, ReferenceMethod::FarPeakMean { from_peak: 5 }));
    }

    #[test]
    fn g2_is_scale_invariant() {
        let h = comb(7, |n| if n == 0 { 37 } else { 900 + (n.unsigned_abs() % 3) * 11 });
        let a = g2_zero(&h, None, 5).unwrap().g2;
        let b = g2_zero(&h.scaled(7), None, 5).unwrap().g2;
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn blinking_bunching_is_removed() {
        // Side peaks enhanced near zero delay, decaying over ~2 periods.
        let a_inf = 20_000.0;
        let h = comb(15, |n| {
            if n == 0 {
                400
            } else {
                (a_inf * (1.0 + 0.3 * (-(n.abs() as f64) / 2.0).exp())).round() as u64
            }
        });
        let est = g2_zero(&h, None, 5).unwrap();
        assert!(matches!(est.reference.method, ReferenceMethod::BlinkingFit { .. }));
        assert!((est.reference.area - a_inf).abs() < est.reference.sigma, "{:?}", est.reference);
        assert!((est.g2 - 0.02).abs() < 3.0 * est.sigma);
    }

    #[test]
    fn span_requirements() {
        let short = comb(4, |_| 100);
        assert!(matches!(
            g2_zero(&short, None, 3),
            Err(Error::InsufficientSpan { available: 4, required: 5 })
        ));
        let ok = comb(5, |_| 100);
        assert!(g2_zero(&ok, None, 6).is_err());
        assert!(g2_zero(&ok, None, 0).is_err());
    }

    #[test]
    fn zero_reference_is_an_error() {
        let h = comb(6, |n| if n == 0 { 10 } else { 0 });
        assert_eq!(g2_zero(&h, None, 5).unwrap_err(), Error::ZeroReference);
    }

    #[test]
    fn background_subtraction_clamps_at_zero() {
        let h = comb(6, |n| if n == 0 { 0 } else { 5000 });
        let dark = DarkBackground { per_bin: 1.0 };
        let est = g2_zero(&h, Some(&dark), 5).unwrap();
        assert_eq!(est.central_area, 0.0);
        assert!(est.background_clamped);
    }

    #[test]
    fn dark_background_scaling() {
        let c = rates(1e5, 1e5, 100.0, 100.0, 0.0);
        let d = DarkBackground::from_rates(&c, 1e-10, 60.0).unwrap();
        assert!((d.per_bin - 2.001e7 * 1e-10 * 60.0).abs() < 1e-12);
    }

    #[test]
    fn text_format_roundtrip_and_errors() {
        let h = comb(5, |n| 10 + n.unsigned_abs());
        let parsed = CoincidenceHistogram::parse(&h.to_text()).unwrap();
        assert_eq!(parsed.counts(), h.counts());
        assert_eq!(parsed.center_index(), h.center_index());

        let bad_header = "# rep_period=1e-8 bin_width=1e-10\n0,1\n";
        assert!(matches!(CoincidenceHistogram::parse(bad_header), Err(Error::Parse { line: 1, .. })));
        let swapped = "# bin_width=1e-10 rep_period=1e-8\n0,1\n1e-10,x\n";
        assert!(matches!(CoincidenceHistogram::parse(swapped), Err(Error::Parse { line: 3, .. })));
        let gap = "# bin_width=1e-10 rep_period=1e-8\n0,1\n3e-10,2\n";
        assert!(matches!(CoincidenceHistogram::parse(gap), Err(Error::Parse { line: 3, .. })));
        let coarse = "# bin_width=1e-9 rep_period=5e-9\n0,1\n";
        assert!(CoincidenceHistogram::parse(coarse).is_err());
    }
}
