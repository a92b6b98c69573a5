//! Static vector figures: key-rate heatmaps with iso-lines and markers, and
//! key-rate-versus-distance curves on a logarithmic axis.

use std::fmt::Write;

use spsqkd_core::map::contour::Raster;
use spsqkd_core::map::SkMap;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 520.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;

const PALETTE: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];
const SERIES_COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const DASHES: [&str; 3] = ["", "6 3", "2 3"];

/// Linear map from data to pixel coordinates.
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0) * (PALETTE.len() - 1) as f64;
    let i = (t.floor() as usize).min(PALETTE.len() - 2);
    let f = t - i as f64;
    let (a, b) = (PALETTE[i], PALETTE[i + 1]);
    let mix = |u: f64, v: f64| (u + (v - u) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// About five round tick positions inside `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![lo];
    }
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

fn label(v: f64) -> String {
    let s = format!("{v:.6}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn open(svg: &mut String) {
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
}

fn axes(svg: &mut String, fr: &Frame, xticks: &[(f64, String)], yticks: &[(f64, String)], xlabel: &str, ylabel: &str) {
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (HEIGHT - BOTTOM, TOP);
    let _ = writeln!(
        svg,
        r#"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y0 - y1
    );
    for (v, text) in xticks {
        let x = fr.px(*v);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
            y0 + 5.0,
            y0 + 18.0,
            escape(text)
        );
    }
    for (v, text) in yticks {
        let y = fr.py(*v);
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            y + 4.0,
            escape(text)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 15.0,
        escape(xlabel)
    );
    let _ = writeln!(
        svg,
        r#"<text transform="translate(20 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
}

/// Cell edges halfway between neighbouring nodes; a lone node gets unit width.
fn cell_edges(nodes: &[f64]) -> Vec<f64> {
    if nodes.len() == 1 {
        return vec![nodes[0] - 0.5, nodes[0] + 0.5];
    }
    let n = nodes.len();
    let mut e = Vec::with_capacity(n + 1);
    e.push(nodes[0] - (nodes[1] - nodes[0]) / 2.0);
    e.extend(nodes.windows(2).map(|w| (w[0] + w[1]) / 2.0));
    e.push(nodes[n - 1] + (nodes[n - 1] - nodes[n - 2]) / 2.0);
    e
}

/// Heatmap of the key rate over (detuning, power) with the iso-lines and
/// the brightness, purity and key-rate markers.
pub fn heatmap(map: &SkMap) -> String {
    let raster = Raster::from_scattered(
        &map.cells
            .iter()
            .map(|c| (c.cell.detuning_nm, c.cell.power, c.sk()))
            .collect::<Vec<_>>(),
    );
    let (ex, ey) = (cell_edges(&raster.xs), cell_edges(&raster.ys));
    let fr = Frame {
        x: (ex[0], ex[ex.len() - 1]),
        y: (ey[0], ey[ey.len() - 1]),
    };
    let mut svg = String::new();
    open(&mut svg);

    svg.push_str("<g shape-rendering=\"crispEdges\">\n");
    for iy in 0..raster.ys.len() {
        for ix in 0..raster.xs.len() {
            let v = raster.value(ix, iy);
            let fill = if v > 0.0 && map.max_sk > 0.0 {
                color(v / map.max_sk)
            } else {
                "#d9d9d9".to_string()
            };
            let (xa, xb) = (fr.px(ex[ix]), fr.px(ex[ix + 1]));
            let (ya, yb) = (fr.py(ey[iy + 1]), fr.py(ey[iy]));
            let _ = writeln!(
                svg,
                r#"<rect x="{xa:.2}" y="{ya:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                xb - xa,
                yb - ya
            );
        }
    }
    svg.push_str("</g>\n");

    for (i, set) in map.contours.iter().enumerate() {
        let dash = DASHES[i % DASHES.len()];
        for poly in &set.polylines {
            let pts: Vec<String> = poly.iter().map(|&(x, y)| format!("{:.2},{:.2}", fr.px(x), fr.py(y))).collect();
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="white" stroke-width="1.5" stroke-dasharray="{dash}"/>"#,
                pts.join(" ")
            );
        }
    }

    let marker = |svg: &mut String, idx: usize, shape: &str| {
        let c = map.marker_cell(idx);
        let (x, y) = (fr.px(c.detuning_nm), fr.py(c.power));
        let _ = match shape {
            "circle" => writeln!(
                svg,
                r##"<circle cx="{x:.2}" cy="{y:.2}" r="7" fill="none" stroke="#ff7f0e" stroke-width="2.5"/>"##
            ),
            "square" => writeln!(
                svg,
                r##"<rect x="{:.2}" y="{:.2}" width="12" height="12" fill="none" stroke="#17becf" stroke-width="2.5"/>"##,
                x - 6.0,
                y - 6.0
            ),
            _ => writeln!(
                svg,
                r##"<polygon points="{x:.2},{:.2} {:.2},{y:.2} {x:.2},{:.2} {:.2},{y:.2}" fill="#d62728" stroke="black"/>"##,
                y - 7.0,
                x + 7.0,
                y + 7.0,
                x - 7.0
            ),
        };
    };
    marker(&mut svg, map.markers.brightness, "circle");
    marker(&mut svg, map.markers.purity, "square");
    marker(&mut svg, map.markers.sk, "diamond");

    let xt: Vec<_> = ticks(fr.x.0, fr.x.1).into_iter().map(|t| (t, label(t))).collect();
    let yt: Vec<_> = ticks(fr.y.0, fr.y.1).into_iter().map(|t| (t, label(t))).collect();
    axes(&mut svg, &fr, &xt, &yt, "detuning (nm)", "excitation power");

    // Colour bar and legend.
    let bx = WIDTH - RIGHT + 20.0;
    let steps = 20;
    let h = (HEIGHT - TOP - BOTTOM) / 2.0;
    for i in 0..steps {
        let t = (i as f64 + 0.5) / steps as f64;
        let y = TOP + h * (1.0 - (i + 1) as f64 / steps as f64);
        let _ = writeln!(
            svg,
            r#"<rect x="{bx}" y="{y:.2}" width="16" height="{:.2}" fill="{}"/>"#,
            h / steps as f64 + 0.5,
            color(t)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}">{:.3e}</text><text x="{}" y="{:.2}">0</text>"#,
        bx + 22.0,
        TOP + 10.0,
        map.max_sk,
        bx + 22.0,
        TOP + h
    );
    let ly = TOP + h + 30.0;
    let legend = [
        ("#ff7f0e", "max brightness"),
        ("#17becf", "max purity"),
        ("#d62728", "max key rate"),
    ];
    for (i, (c, text)) in legend.iter().enumerate() {
        let y = ly + 20.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<rect x="{bx}" y="{:.2}" width="10" height="10" fill="{c}"/><text x="{}" y="{:.2}">{text}</text>"#,
            y - 9.0,
            bx + 16.0,
            y
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{bx}" y="{:.2}">SK at {} km</text>"#,
        ly + 70.0,
        label(map.distance_km)
    );
    svg.push_str("</svg>\n");
    svg
}

/// One named curve; non-positive values are gaps.
pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

/// Key rate against distance with a logarithmic key-rate axis spanning at
/// most twelve decades.
pub fn curves(series: &[Series<'_>], xlabel: &str) -> String {
    let all = || series.iter().flat_map(|s| s.points.iter());
    let positive: Vec<f64> = all().map(|p| p.1).filter(|v| *v > 0.0).collect();
    let hi = positive.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = positive.iter().copied().fold(f64::INFINITY, f64::min);
    let (dec_hi, dec_lo) = if positive.is_empty() {
        (0.0, -1.0)
    } else {
        let top = hi.log10().ceil();
        let bottom = lo.log10().floor().max(top - 12.0);
        (top, if bottom < top { bottom } else { top - 1.0 })
    };
    let xs = || all().map(|p| p.0);
    let (x0, x1) = (
        xs().fold(f64::INFINITY, f64::min),
        xs().fold(f64::NEG_INFINITY, f64::max),
    );
    let (x0, x1) = if x0.is_finite() && x1 > x0 { (x0, x1) } else { (0.0, 1.0) };
    let fr = Frame {
        x: (x0, x1),
        y: (dec_lo, dec_hi),
    };

    let mut svg = String::new();
    open(&mut svg);
    for (i, s) in series.iter().enumerate() {
        let c = SERIES_COLORS[i % SERIES_COLORS.len()];
        let mut run: Vec<String> = Vec::new();
        let flush = |run: &mut Vec<String>, svg: &mut String| {
            if run.len() > 1 {
                let _ = writeln!(
                    svg,
                    r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="2"/>"#,
                    run.join(" ")
                );
            }
            run.clear();
        };
        for &(x, y) in &s.points {
            if y > 0.0 && y.log10() >= dec_lo {
                run.push(format!("{:.2},{:.2}", fr.px(x), fr.py(y.log10())));
            } else {
                flush(&mut run, &mut svg);
            }
        }
        flush(&mut run, &mut svg);
        let ly = TOP + 20.0 * (i as f64 + 1.0);
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{:.2}" x2="{}" y2="{:.2}" stroke="{c}" stroke-width="2"/><text x="{}" y="{ly:.2}">{}</text>"#,
            ly - 4.0,
            lx + 20.0,
            ly - 4.0,
            lx + 26.0,
            escape(s.label)
        );
    }
    let xt: Vec<_> = ticks(x0, x1).into_iter().map(|t| (t, label(t))).collect();
    let yt: Vec<_> = (dec_lo as i32..=dec_hi as i32)
        .map(|d| (d as f64, format!("1e{d}")))
        .collect();
    axes(&mut svg, &fr, &xt, &yt, xlabel, "secure key (bits per pulse)");
    svg.push_str("</svg>\n");
    svg
}
