//! Least-squares slopes on log–log data.

/// Residuals at or below this are treated as numerical floor.
pub const FLOOR: f64 = 1e-14;

/// Least-squares slope of `ln y` against `ln x`. Returns `None` with fewer
/// than two usable points or when any residual sits at the floor.
pub fn loglog_slope(points: &[[f64; 2]]) -> Option<f64> {
    loglog_slope_with_floor(points, FLOOR)
}

pub fn loglog_slope_with_floor(points: &[[f64; 2]], floor: f64) -> Option<f64> {
    let usable = |p: &[f64; 2]| p[0].is_finite() && p[0] > 0.0 && p[1].is_finite() && p[1] > floor;
    if points.len() < 2 || !points.iter().all(usable) {
        return None;
    }
    let n = points.len() as f64;
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().map(|p| (p[0].ln(), p[1].ln())).unzip();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

/// `count` log-spaced points from `lo` to `hi` inclusive.
pub fn logspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let pts: Vec<[f64; 2]> = logspace(1e-3, 1e-1, 7)
            .into_iter()
            .map(|x| [x, 3.0 * x.powi(4)])
            .collect();
        assert!((loglog_slope(&pts).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn floor_and_degenerate() {
        assert!(loglog_slope(&[[0.1, 1.0]]).is_none());
        assert!(loglog_slope(&[[0.1, 1.0], [0.01, 0.0]]).is_none());
        assert!(loglog_slope(&[[0.1, 1.0], [0.1, 2.0]]).is_none());
    }

    #[test]
    fn logspace_endpoints() {
        let v = logspace(1e-3, 1e-1, 3);
        assert!(
            (v[0] - 1e-3).abs() < 1e-18
                && (v[1] - 1e-2).abs() < 1e-16
                && (v[2] - 1e-1).abs() < 1e-15
        );
    }
}
