/// Mean of the last `min(window, t + 1)` values at every `t`.
pub fn moving_average(series: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1, "moving-average window must be at least 1");
    (0..series.len())
        .map(|t| {
            let start = (t + 1).saturating_sub(window);
            let part = &series[start..=t];
            part.iter().sum::<f64>() / part.len() as f64
        })
        .collect()
}

/// Linear-interpolation quantile of sorted data, `p` in `[0, 1]`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Box-plot numbers and an empirical CDF.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionStats {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// `(x, F(x))` on a uniform grid from `min` to `max`.
    pub cdf: Vec<(f64, f64)>,
}

impl DistributionStats {
    /// Whiskers span the full range.
    pub fn whiskers(&self) -> (f64, f64) {
        (self.min, self.max)
    }
}

/// Quartiles, min/max whiskers and the CDF on `grid_points` points.
/// Returns `None` for an empty or non-finite series.
pub fn distribution_stats(series: &[f64], grid_points: usize) -> Option<DistributionStats> {
    if series.is_empty() || series.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let (min, max) = (sorted[0], sorted[n - 1]);
    let points = grid_points.max(1);
    let cdf = (0..points)
        .map(|i| {
            // The last point is pinned to `max`; `min + (max - min)` can round below it.
            let x = if i + 1 == points { max } else { min + (max - min) * i as f64 / (points - 1) as f64 };
            let below = sorted.partition_point(|&v| v <= x);
            (x, below as f64 / n as f64)
        })
        .collect();
    Some(DistributionStats {
        count: n,
        mean: series.iter().sum::<f64>() / n as f64,
        min,
        q1: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q3: quantile(&sorted, 0.75),
        max,
        cdf,
    })
}
