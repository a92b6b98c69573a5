//! Subcommand implementations. Each one is a pure function of its input
//! files and flags; all numbers come straight from the core library.

use std::io;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use spsqkd_core::correlation::{
    g2_in_window, measured_brightness, CoincidenceHistogram, CountRates, DarkBackground, G2Estimate, PeakWindow,
};
use spsqkd_core::link_model::totals;
use spsqkd_core::map::{ingest_grid, make_sk_map, GridCell, SkMap};
use spsqkd_core::mc_oracle::{simulate as run_simulation, synth_histogram, SimConfig, SimResult};
use spsqkd_core::optimize::{
    distance_curve, max_distance as search_max_distance, optimal_brightness as search_brightness,
    optimize_attenuation as search_attenuation, rule_of_thumb, AttenuationSearch, BrightnessSearch, DistanceSearch,
};
use spsqkd_core::photon_stats::{attenuate, bound_multi_photon, infer_stats as infer};
use spsqkd_core::timefilter::{compare_strategies, DecayModel, FilterSource};
use spsqkd_core::{ChannelSpec, Error, PhotonStats, RateReport, SourceMeasurement, Totals};

use crate::emit::{fmt_num, sink, write_csv, write_json, write_text, Provenance};
use crate::svg::{self, Series};
use crate::{ChannelArgs, Outcome, RangeArgs, RateArgs, SharedParams, SourceArgs};

/// Photon energy times wavelength (meV nm).
const HC_MEV_NM: f64 = 1_239_841.98;

fn provenance(command: &str, p: &SharedParams) -> Provenance {
    let mut prov = Provenance::new(command);
    p.record(&mut prov);
    prov
}

fn source_stats(s: &SourceArgs, prov: &mut Provenance) -> Result<PhotonStats> {
    prov.num("brightness", s.brightness).num("g2", s.g2);
    Ok(infer(&SourceMeasurement::new(s.brightness, s.g2)?)?)
}

fn channel(p: &SharedParams, c: &ChannelArgs, prov: &mut Provenance) -> Result<ChannelSpec> {
    Ok(match c.eta_ch {
        Some(eta) => {
            prov.num("eta_ch", eta);
            ChannelSpec::transmission(eta)?
        }
        None => {
            let d = c.distance_km.unwrap_or(0.0);
            prov.num("distance_km", d);
            ChannelSpec::fiber(p.alpha, d)?
        }
    })
}

fn lengths(r: &RangeArgs) -> Result<Vec<f64>> {
    if !(r.step > 0.0) || !(r.to >= r.from) || !(r.from >= 0.0) {
        bail!("length range needs 0 <= from <= to and step > 0");
    }
    let n = ((r.to - r.from) / r.step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| r.from + i as f64 * r.step).collect())
}

fn record_range(prov: &mut Provenance, r: &RangeArgs) {
    prov.num("from_km", r.from).num("to_km", r.to).num("step_km", r.step);
}

/// Reason column: library code, `below_delta` for tiny positive keys, else `ok`.
fn reason(report_reason: Option<spsqkd_core::InsecureReason>, sk: f64, delta: f64) -> String {
    match report_reason {
        Some(r) => r.code().to_string(),
        None if sk <= delta => "below_delta".to_string(),
        None => "ok".to_string(),
    }
}

fn stdout() -> Result<Box<dyn io::Write>> {
    sink(None)
}

#[derive(Serialize)]
struct StatsOut {
    p0: f64,
    p1: f64,
    p2: f64,
    p3: f64,
    multi_photon_bound: f64,
    mean_photon_number: f64,
}

pub fn infer_stats(source: &SourceArgs) -> Result<Outcome> {
    let mut prov = Provenance::new("infer-stats");
    let s = source_stats(source, &mut prov)?;
    let m = SourceMeasurement::new(source.brightness, source.g2)?;
    let out = StatsOut {
        p0: s.p0(),
        p1: s.p1(),
        p2: s.p2(),
        p3: s.p3(),
        multi_photon_bound: bound_multi_photon(&m),
        mean_photon_number: s.mean_photon_number(),
    };
    write_json(stdout()?, &prov, &out)?;
    Ok(Outcome::Done)
}

#[derive(Serialize)]
struct RateOut {
    eta_ch: f64,
    eta_att: f64,
    reason: String,
    report: RateReport,
}

pub fn rate(p: &SharedParams, source: &SourceArgs, ch: &ChannelArgs, optimize: bool) -> Result<Outcome> {
    let mut prov = provenance("rate", p);
    let s = source_stats(source, &mut prov)?;
    let channel = channel(p, ch, &mut prov)?;
    let (det, cfg) = (p.detection()?, p.protocol()?);
    let (eta_att, report) = if optimize {
        prov.push("attenuator", "optimized");
        let o = search_attenuation(&s, &channel, &det, &cfg, &AttenuationSearch::default())?;
        (o.eta_att, o.report)
    } else {
        (1.0, spsqkd_core::keyrate::rate(&s, &channel, &det, &cfg)?)
    };
    let out = RateOut {
        eta_ch: channel.eta(),
        eta_att,
        reason: reason(report.insecure, report.sk, p.delta),
        report,
    };
    write_json(stdout()?, &prov, &out)?;
    Ok(if report.is_secure(p.delta) {
        Outcome::Done
    } else {
        Outcome::Insecure(format!("no key above delta ({})", out.reason))
    })
}

#[derive(Serialize)]
struct MarkerCells {
    brightness: GridCell,
    purity: GridCell,
    sk: GridCell,
}

#[derive(Serialize)]
struct MapOut<'a> {
    distance_km: f64,
    cells: usize,
    secure_cells: usize,
    max_sk: f64,
    markers: MarkerCells,
    contours: &'a [spsqkd_core::map::ContourSet],
}

fn detuning_mev(center_nm: f64, detuning_nm: f64) -> f64 {
    HC_MEV_NM / (center_nm - detuning_nm) - HC_MEV_NM / center_nm
}

fn map_rows(m: &SkMap, delta: f64, center_nm: Option<f64>) -> Vec<Vec<String>> {
    m.cells
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mut row = vec![fmt_num(c.cell.detuning_nm)];
            if let Some(center) = center_nm {
                row.push(fmt_num(detuning_mev(center, c.cell.detuning_nm)));
            }
            let r = &c.report;
            let marks: Vec<&str> = [
                (m.markers.brightness, "brightness"),
                (m.markers.purity, "purity"),
                (m.markers.sk, "sk"),
            ]
            .into_iter()
            .filter(|(idx, _)| *idx == i)
            .map(|(_, name)| name)
            .collect();
            row.extend([
                fmt_num(c.cell.power),
                fmt_num(c.cell.brightness),
                fmt_num(c.cell.g2),
                fmt_num(r.q_tot),
                fmt_num(r.e_tot),
                fmt_num(r.q1),
                fmt_num(r.e1),
                fmt_num(r.sk),
                reason(r.insecure, r.sk, delta),
                marks.join(";"),
            ]);
            row
        })
        .collect()
}

pub fn map(
    p: &SharedParams,
    grid_path: &Path,
    distances: &[f64],
    out: &Path,
    with_svg: bool,
    center_nm: Option<f64>,
) -> Result<Outcome> {
    let grid = ingest_grid(grid_path)?;
    if let Some(center) = center_nm {
        let max_detuning = grid.cells().iter().map(|c| c.detuning_nm).fold(f64::NEG_INFINITY, f64::max);
        if !(center > 0.0 && center > max_detuning) {
            bail!("center wavelength {center} nm must exceed every detuning");
        }
    }
    let (det, cfg) = (p.detection()?, p.protocol()?);
    let mut columns = vec!["detuning_nm"];
    if center_nm.is_some() {
        columns.push("detuning_mev");
    }
    columns.extend([
        "power", "brightness", "g2", "q_tot", "e_tot", "q1", "e1", "sk", "reason", "marker",
    ]);

    let mut any_secure = false;
    for &d in distances {
        let m = make_sk_map(&grid, &det, &cfg, p.alpha, d)?;
        any_secure |= m.any_secure(p.delta);
        let mut prov = provenance("map", p);
        prov.push("grid", grid_path.display())
            .push("cells", grid.len())
            .num("distance_km", d);
        if let Some(center) = center_nm {
            prov.num("center_wavelength_nm", center);
        }
        let base = format!("{}_{}km", out.display(), fmt_num(d));
        write_csv(
            sink(Some(Path::new(&format!("{base}.csv"))))?,
            &prov,
            &columns,
            map_rows(&m, p.delta, center_nm),
        )?;
        let doc = MapOut {
            distance_km: d,
            cells: m.cells.len(),
            secure_cells: m.cells.iter().filter(|c| c.report.is_secure(p.delta)).count(),
            max_sk: m.max_sk,
            markers: MarkerCells {
                brightness: *m.marker_cell(m.markers.brightness),
                purity: *m.marker_cell(m.markers.purity),
                sk: *m.marker_cell(m.markers.sk),
            },
            contours: &m.contours,
        };
        write_json(sink(Some(Path::new(&format!("{base}.json"))))?, &prov, &doc)?;
        if with_svg {
            write_text(sink(Some(Path::new(&format!("{base}.svg"))))?, &svg::heatmap(&m))?;
        }
    }
    Ok(if any_secure {
        Outcome::Done
    } else {
        Outcome::Insecure("no grid cell yields a key above delta at any requested distance".into())
    })
}

pub fn curve(
    p: &SharedParams,
    source: &SourceArgs,
    range: &RangeArgs,
    optimize: bool,
    out: Option<&Path>,
    svg_path: Option<&Path>,
) -> Result<Outcome> {
    let mut prov = provenance("curve", p);
    let s = source_stats(source, &mut prov)?;
    record_range(&mut prov, range);
    prov.push("attenuator", if optimize { "optimized" } else { "none" });
    let (det, cfg) = (p.detection()?, p.protocol()?);
    let search = AttenuationSearch::default();
    let c = distance_curve(&s, &det, &cfg, p.alpha, &lengths(range)?, optimize.then_some(&search))?;
    let rows = c.samples().iter().map(|x| {
        vec![
            fmt_num(x.length_km),
            fmt_num(x.sk),
            fmt_num(x.eta_att_opt),
            reason(x.reason, x.sk, p.delta),
        ]
    });
    write_csv(sink(out)?, &prov, &["distance_km", "sk", "eta_att_opt", "reason"], rows)?;
    if let Some(path) = svg_path {
        let series = [Series {
            label: if optimize { "SK, attenuator optimized" } else { "SK" },
            points: c.samples().iter().map(|x| (x.length_km, x.sk)).collect(),
        }];
        write_text(sink(Some(path))?, &svg::curves(&series, "fiber length (km)"))?;
    }
    Ok(if c.samples().iter().any(|x| x.reason.is_none() && x.sk > p.delta) {
        Outcome::Done
    } else {
        Outcome::Insecure("no sampled length yields a key above delta".into())
    })
}

#[derive(Serialize)]
struct AttenuationOut {
    eta_att_opt: f64,
    sk_opt: f64,
    sk_unattenuated: f64,
    reason: String,
    report: RateReport,
}

pub fn optimize_attenuation(
    p: &SharedParams,
    source: &SourceArgs,
    ch: &ChannelArgs,
    grid_points: usize,
    eta_min: f64,
) -> Result<Outcome> {
    let mut prov = provenance("optimize-attenuation", p);
    let s = source_stats(source, &mut prov)?;
    let channel = channel(p, ch, &mut prov)?;
    prov.push("grid_points", grid_points).num("eta_min", eta_min);
    let (det, cfg) = (p.detection()?, p.protocol()?);
    let search = AttenuationSearch {
        grid_points,
        eta_min,
        ..AttenuationSearch::default()
    };
    let o = search_attenuation(&s, &channel, &det, &cfg, &search)?;
    let plain = spsqkd_core::keyrate::rate(&s, &channel, &det, &cfg)?;
    let out = AttenuationOut {
        eta_att_opt: o.eta_att,
        sk_opt: o.report.sk,
        sk_unattenuated: plain.sk,
        reason: reason(o.report.insecure, o.report.sk, p.delta),
        report: o.report,
    };
    write_json(stdout()?, &prov, &out)?;
    Ok(if o.report.is_secure(p.delta) {
        Outcome::Done
    } else {
        Outcome::Insecure("no attenuator setting yields a key above delta".into())
    })
}

#[derive(Serialize)]
struct MaxDistanceOut {
    max_distance_km: f64,
    bracket_km: (f64, f64),
    capped: bool,
    rule_of_thumb_km: f64,
    eta_ch_min: f64,
}

pub fn max_distance(
    p: &SharedParams,
    source: &SourceArgs,
    optimize: bool,
    resolution_km: f64,
    cap_km: f64,
) -> Result<Outcome> {
    let mut prov = provenance("max-distance", p);
    let s = source_stats(source, &mut prov)?;
    prov.num("resolution_km", resolution_km)
        .num("cap_km", cap_km)
        .push("attenuator", if optimize { "optimized" } else { "none" });
    let (det, cfg) = (p.detection()?, p.protocol()?);
    let search = DistanceSearch {
        resolution_km,
        cap_km,
        attenuation: optimize.then(AttenuationSearch::default),
    };
    let found = match search_max_distance(&s, &det, &cfg, p.alpha, &search) {
        Ok(found) => found,
        Err(e @ Error::NoKeyAtZeroDistance { .. }) => return Ok(Outcome::Insecure(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let rot = rule_of_thumb(&SourceMeasurement::new(source.brightness, source.g2)?, p.y0, p.alpha)?;
    let out = MaxDistanceOut {
        max_distance_km: found.length_km,
        bracket_km: found.bracket,
        capped: found.capped,
        rule_of_thumb_km: rot.distance_km,
        eta_ch_min: rot.eta_ch_min,
    };
    write_json(stdout()?, &prov, &out)?;
    Ok(Outcome::Done)
}

pub fn optimal_brightness(p: &SharedParams, g2: f64, cap_km: f64) -> Result<Outcome> {
    let mut prov = provenance("max-distance", p);
    prov.num("g2", g2).num("cap_km", cap_km).push("mode", "optimal-brightness");
    let (det, cfg) = (p.detection()?, p.protocol()?);
    let search = BrightnessSearch {
        cap_km,
        ..BrightnessSearch::default()
    };
    let found = match search_brightness(g2, &det, &cfg, p.alpha, &search) {
        Ok(found) => found,
        Err(e @ Error::NoKeyAtZeroDistance { .. }) => return Ok(Outcome::Insecure(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    write_json(stdout()?, &prov, &found)?;
    Ok(Outcome::Done)
}

pub struct TimeFilterArgs {
    pub grid: PathBuf,
    pub detuning_nm: f64,
    pub detuning_tol: f64,
    pub lifetime_ns: f64,
    pub rep_rate_mhz: f64,
    pub histogram: Option<PathBuf>,
    pub blink_far_peaks: usize,
    pub range: RangeArgs,
}

pub fn time_filter(
    p: &SharedParams,
    a: &TimeFilterArgs,
    out: Option<&Path>,
    svg_path: Option<&Path>,
) -> Result<Outcome> {
    let grid = ingest_grid(&a.grid)?;
    let cells = grid.at_detuning(a.detuning_nm, a.detuning_tol);
    if cells.is_empty() {
        bail!("no grid cells at detuning {} nm", a.detuning_nm);
    }
    let histogram = a.histogram.as_ref().map(CoincidenceHistogram::read).transpose()?;
    let (source, rep_period) = match &histogram {
        Some(h) => (
            FilterSource::Histogram {
                histogram: h,
                dark: None,
                blink_far_peaks: a.blink_far_peaks,
            },
            h.rep_period(),
        ),
        None => {
            if !(a.rep_rate_mhz > 0.0) {
                bail!("repetition rate must be positive");
            }
            (
                FilterSource::Model(DecayModel::new(a.lifetime_ns * 1e-9, true)?),
                1.0 / (a.rep_rate_mhz * 1e6),
            )
        }
    };
    let (det, cfg) = (p.detection()?, p.protocol()?);
    let cmp = compare_strategies(&cells, source, rep_period, &det, &cfg, p.alpha, &lengths(&a.range)?)?;

    let mut prov = provenance("time-filter", p);
    prov.push("grid", a.grid.display())
        .num("detuning_nm", a.detuning_nm)
        .push("power_settings", cells.len())
        .num("rep_period_s", rep_period);
    match &a.histogram {
        Some(path) => prov
            .push("gate_source", "histogram")
            .push("histogram", path.display())
            .push("blink_far_peaks", a.blink_far_peaks),
        None => prov.push("gate_source", "decay-model").num("lifetime_ns", a.lifetime_ns),
    };
    record_range(&mut prov, &a.range);
    prov.num("max_power", cmp.max_power).push(
        "crossover_km",
        cmp.crossover_km.map_or_else(|| "none".to_string(), fmt_num),
    );
    let rows = cmp.points.iter().map(|x| {
        vec![
            fmt_num(x.distance_km),
            fmt_num(x.sk_power),
            fmt_num(x.best_power),
            fmt_num(x.sk_filter),
            x.tau_opt.map_or_else(String::new, |t| fmt_num(t * 1e9)),
        ]
    });
    write_csv(
        sink(out)?,
        &prov,
        &["distance_km", "sk_power", "best_power", "sk_filter", "tau_opt_ns"],
        rows,
    )?;
    if let Some(path) = svg_path {
        let series = [
            Series {
                label: "power tuning",
                points: cmp.points.iter().map(|x| (x.distance_km, x.sk_power)).collect(),
            },
            Series {
                label: "gated, max power",
                points: cmp.points.iter().map(|x| (x.distance_km, x.sk_filter)).collect(),
            },
        ];
        write_text(sink(Some(path))?, &svg::curves(&series, "fiber length (km)"))?;
    }
    Ok(
        if cmp.points.iter().any(|x| x.sk_power > p.delta || x.sk_filter > p.delta) {
            Outcome::Done
        } else {
            Outcome::Insecure("neither strategy yields a key above delta".into())
        },
    )
}

pub struct SimulateArgs {
    pub pulses: u64,
    pub seed: u64,
    pub attenuation: f64,
    pub histogram_out: Option<PathBuf>,
    pub lifetime_ns: f64,
    pub bin_ps: f64,
    pub periods: u32,
}

#[derive(Serialize)]
struct SimulateOut {
    simulated: SimResult,
    analytic: Totals,
    z_gain: f64,
    z_error: f64,
}

fn z(estimate: f64, expected: f64, sigma: f64) -> f64 {
    if sigma > 0.0 {
        (estimate - expected) / sigma
    } else if estimate == expected {
        0.0
    } else {
        f64::INFINITY
    }
}

pub fn simulate(p: &SharedParams, source: &SourceArgs, ch: &ChannelArgs, a: &SimulateArgs) -> Result<Outcome> {
    let mut prov = provenance("simulate", p);
    let s = source_stats(source, &mut prov)?;
    let channel = channel(p, ch, &mut prov)?;
    prov.push("pulses", a.pulses)
        .push("seed", a.seed)
        .num("attenuation", a.attenuation);
    let det = p.detection()?;
    let cfg = SimConfig::new(a.pulses, a.seed, s, channel, det).with_extra_survival(a.attenuation);
    let r = run_simulation(&cfg)?;
    let analytic = totals(&attenuate(&s, a.attenuation)?, &channel, &det)?;
    let out = SimulateOut {
        z_gain: z(r.q_hat, analytic.q_tot, r.sigma_q),
        z_error: z(r.e_hat, analytic.e_tot, r.sigma_e),
        simulated: r,
        analytic,
    };
    if let Some(path) = &a.histogram_out {
        let h = synth_histogram(&cfg.with_lifetime(a.lifetime_ns * 1e-9), a.bin_ps * 1e-12, a.periods)?;
        write_text(sink(Some(path))?, &h.to_text()).with_context(|| format!("writing {}", path.display()))?;
        prov.push("histogram_out", path.display())
            .num("lifetime_ns", a.lifetime_ns)
            .num("bin_ps", a.bin_ps)
            .push("periods", a.periods);
    }
    write_json(stdout()?, &prov, &out)?;
    Ok(Outcome::Done)
}

#[derive(Serialize)]
struct G2Out {
    estimate: G2Estimate,
    dark_per_bin: Option<f64>,
    measured_brightness: Option<f64>,
}

pub fn g2(
    p: &SharedParams,
    path: &Path,
    blink_far_peaks: usize,
    tau_ns: Option<f64>,
    offset_ns: f64,
    rates: &RateArgs,
) -> Result<Outcome> {
    let h = CoincidenceHistogram::read(path)?;
    let mut prov = Provenance::new("g2");
    prov.push("histogram", path.display())
        .num("bin_width_s", h.bin_width())
        .num("rep_period_s", h.rep_period())
        .push("blink_far_peaks", blink_far_peaks);
    let counts = match rates.r1 {
        Some(r1) => {
            let c = CountRates {
                r1,
                r2: rates.r2.unwrap_or_default(),
                r1_dark: rates.r1_dark.unwrap_or_default(),
                r2_dark: rates.r2_dark.unwrap_or_default(),
                cc12: rates.cc12.unwrap_or_default(),
                nu_rep: rates.rep_rate_mhz * 1e6,
                eta_setup: rates.eta_setup,
                eta_d: p.eta_d,
            };
            let acq = rates.acquisition_s.unwrap_or_default();
            prov.num("r1_hz", c.r1)
                .num("r2_hz", c.r2)
                .num("r1_dark_hz", c.r1_dark)
                .num("r2_dark_hz", c.r2_dark)
                .num("cc12_hz", c.cc12)
                .num("acquisition_s", acq)
                .num("rep_rate_hz", c.nu_rep)
                .num("eta_setup", c.eta_setup)
                .num("eta_d", c.eta_d);
            Some((DarkBackground::from_rates(&c, h.bin_width(), acq)?, measured_brightness(&c)?))
        }
        None => None,
    };
    let window = tau_ns.map(|t| PeakWindow {
        half_width: t * 1e-9,
        offset: offset_ns * 1e-9,
    });
    if let Some(w) = &window {
        prov.num("gate_half_width_ns", w.half_width * 1e9)
            .num("gate_offset_ns", w.offset * 1e9);
    }
    let estimate = g2_in_window(&h, counts.as_ref().map(|c| &c.0), blink_far_peaks, window.as_ref())?;
    let out = G2Out {
        estimate,
        dark_per_bin: counts.map(|c| c.0.per_bin),
        measured_brightness: counts.map(|c| c.1),
    };
    write_json(stdout()?, &prov, &out)?;
    Ok(Outcome::Done)
}
