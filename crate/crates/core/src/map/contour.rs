//! Marching-squares iso-lines on a rectilinear raster.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub type Polyline = Vec<(f64, f64)>;

/// Values on the nodes of a rectilinear grid, row-major in `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Raster {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `values[iy * xs.len() + ix]`.
    pub values: Vec<f64>,
}

impl Raster {
    /// Rasterizes scattered `(x, y, value)` samples onto the grid of their
    /// distinct coordinates. Nodes without a sample take the value of the
    /// nearest sample in range-normalized coordinates (first one on ties).
    pub fn from_scattered(points: &[(f64, f64, f64)]) -> Self {
        let axis = |f: fn(&(f64, f64, f64)) -> f64| {
            let mut v: Vec<f64> = points.iter().map(f).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let xs = axis(|p| p.0);
        let ys = axis(|p| p.1);
        let span = |v: &[f64]| match (v.first(), v.last()) {
            (Some(a), Some(b)) if b > a => b - a,
            _ => 1.0,
        };
        let (sx, sy) = (span(&xs), span(&ys));
        let exact: HashMap<(u64, u64), f64> = points
            .iter()
            .rev()
            .map(|p| ((p.0.to_bits(), p.1.to_bits()), p.2))
            .collect();
        let mut values = Vec::with_capacity(xs.len() * ys.len());
        for &y in &ys {
            for &x in &xs {
                let v = exact.get(&(x.to_bits(), y.to_bits())).copied().unwrap_or_else(|| {
                    let mut best = (f64::INFINITY, 0.0);
                    for p in points {
                        let d = ((p.0 - x) / sx).powi(2) + ((p.1 - y) / sy).powi(2);
                        if d < best.0 {
                            best = (d, p.2);
                        }
                    }
                    best.1
                });
                values.push(v);
            }
        }
        Self { xs, ys, values }
    }

    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.xs.len() + ix]
    }

    /// Copy surrounded by a zero-width border of `fill`, so that iso-lines
    /// of levels above `fill` close along the bounding box.
    fn padded(&self, fill: f64) -> Raster {
        let pad = |v: &[f64]| {
            let mut out = Vec::with_capacity(v.len() + 2);
            out.push(v[0]);
            out.extend_from_slice(v);
            out.push(v[v.len() - 1]);
            out
        };
        let (nx, ny) = (self.xs.len(), self.ys.len());
        let mut values = Vec::with_capacity((nx + 2) * (ny + 2));
        for iy in 0..ny + 2 {
            for ix in 0..nx + 2 {
                let inner = (1..=nx).contains(&ix) && (1..=ny).contains(&iy);
                values.push(if inner { self.value(ix - 1, iy - 1) } else { fill });
            }
        }
        Raster {
            xs: pad(&self.xs),
            ys: pad(&self.ys),
            values,
        }
    }
}

/// Grid edge: horizontal from node `(i, j)` to `(i + 1, j)` or vertical
/// from `(i, j)` to `(i, j + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Edge {
    H(usize, usize),
    V(usize, usize),
}

/// Closed iso-lines at `level`. Regions with `value >= level` lie inside;
/// saddle cells are resolved by the average of their four corners.
pub fn marching_squares(raster: &Raster, level: f64) -> Vec<Polyline> {
    if raster.xs.is_empty() || raster.ys.is_empty() {
        return Vec::new();
    }
    let min = raster.values.iter().copied().fold(f64::INFINITY, f64::min);
    let r = raster.padded(min.min(level) - 1.0);
    let (nx, ny) = (r.xs.len(), r.ys.len());

    let point = |e: Edge| -> (f64, f64) {
        let ((ax, ay, va), (bx, by, vb)) = match e {
            Edge::H(i, j) => ((r.xs[i], r.ys[j], r.value(i, j)), (r.xs[i + 1], r.ys[j], r.value(i + 1, j))),
            Edge::V(i, j) => ((r.xs[i], r.ys[j], r.value(i, j)), (r.xs[i], r.ys[j + 1], r.value(i, j + 1))),
        };
        let t = ((level - va) / (vb - va)).clamp(0.0, 1.0);
        (ax + t * (bx - ax), ay + t * (by - ay))
    };

    let mut segments: Vec<(Edge, Edge)> = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let v = [r.value(i, j), r.value(i + 1, j), r.value(i + 1, j + 1), r.value(i, j + 1)];
            let case = v
                .iter()
                .enumerate()
                .fold(0u8, |acc, (b, &x)| acc | (u8::from(x >= level) << b));
            let (bottom, right, top, left) = (Edge::H(i, j), Edge::V(i + 1, j), Edge::H(i, j + 1), Edge::V(i, j));
            let center_in = v.iter().sum::<f64>() / 4.0 >= level;
            match case {
                1 | 14 => segments.push((left, bottom)),
                2 | 13 => segments.push((bottom, right)),
                3 | 12 => segments.push((left, right)),
                4 | 11 => segments.push((right, top)),
                6 | 9 => segments.push((bottom, top)),
                7 | 8 => segments.push((left, top)),
                5 if center_in => segments.extend([(bottom, right), (top, left)]),
                5 => segments.extend([(left, bottom), (right, top)]),
                10 if center_in => segments.extend([(left, bottom), (right, top)]),
                10 => segments.extend([(bottom, right), (top, left)]),
                _ => {}
            }
        }
    }

    let mut by_edge: HashMap<Edge, Vec<usize>> = HashMap::new();
    for (k, &(a, b)) in segments.iter().enumerate() {
        by_edge.entry(a).or_default().push(k);
        by_edge.entry(b).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];
    let mut lines = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (first, mut current) = segments[start];
        let mut line = vec![point(first), point(current)];
        while current != first {
            let next = by_edge[&current].iter().copied().find(|&k| !used[k]);
            let Some(k) = next else { break };
            used[k] = true;
            let (a, b) = segments[k];
            current = if a == current { b } else { a };
            line.push(point(current));
        }
        lines.push(line);
    }
    lines
}

/// Whether `p` lies inside or on the closed polyline.
pub fn encloses(poly: &[(f64, f64)], p: (f64, f64)) -> bool {
    let scale = poly
        .iter()
        .fold(0.0f64, |m, q| m.max(q.0.abs()).max(q.1.abs()))
        .max(1.0);
    let eps = 1e-9 * scale;
    let n = poly.len();
    for k in 0..n {
        let (a, b) = (poly[k], poly[(k + 1) % n]);
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let len2 = dx * dx + dy * dy;
        let t = if len2 > 0.0 {
            (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let (cx, cy) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
        if (cx * cx + cy * cy).sqrt() <= eps {
            return true;
        }
    }
    let mut inside = false;
    for k in 0..n {
        let (a, b) = (poly[k], poly[(k + 1) % n]);
        if (a.1 > p.1) != (b.1 > p.1) {
            let x = a.0 + (p.1 - a.1) / (b.1 - a.1) * (b.0 - a.0);
            if p.0 < x {
                inside = !inside;
            }
        }
    }
    inside
}
