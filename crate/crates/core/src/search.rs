//! Scalar search helpers shared by the optimizers.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for the maximum of `f` on `[a, b]`, stopping when
/// the bracket is narrower than `tol`. Returns `(x_max, f_max)`.
pub fn golden_section_max(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a).abs() > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Bisection on a predicate that holds at `lo` and fails at `hi`.
/// Returns the final bracket `(lo, hi)` with `hi - lo <= resolution`;
/// the predicate still holds at `lo` and fails at `hi`.
pub fn bisect_predicate(
    mut pred: impl FnMut(f64) -> bool,
    mut lo: f64,
    mut hi: f64,
    resolution: f64,
) -> (f64, f64) {
    while hi - lo > resolution {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

/// `n` points spaced evenly in log from `lo` to `hi` (both included).
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// Index of the largest value, first one on ties. NaN never wins.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        match best {
            Some(j) if values[j] >= *v => {}
            _ => best = Some(i),
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, fx) = golden_section_max(|x| -(x - 0.3) * (x - 0.3), -2.0, 5.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-9);
        assert!(fx.abs() < 1e-18);
    }

    #[test]
    fn golden_handles_monotone_function() {
        let (x, _) = golden_section_max(|x| x, 0.0, 1.0, 1e-9);
        assert!(x > 1.0 - 1e-8);
    }

    #[test]
    fn bisection_keeps_bracket_valid() {
        let (lo, hi) = bisect_predicate(|x| x < 2.0_f64.sqrt(), 0.0, 10.0, 1e-9);
        assert!(lo < 2.0_f64.sqrt() && hi >= 2.0_f64.sqrt());
        assert!(hi - lo <= 1e-9);
    }

    #[test]
    fn log_space_endpoints() {
        let g = log_space(1e-3, 1.0, 4);
        assert_eq!(g.len(), 4);
        assert!((g[0] - 1e-3).abs() < 1e-18);
        assert!((g[1] - 1e-2).abs() < 1e-15);
        assert_eq!(g[3], 1.0);
    }

    #[test]
    fn argmax_ties_and_nan() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, f64::NAN]), Some(1));
        assert_eq!(argmax(&[f64::NAN]), None);
        assert_eq!(argmax(&[]), None);
    }
}
