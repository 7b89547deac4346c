//! Named, easy-to-read statistics of a single metric column.

/// A feature extractor over one column.
#[derive(Clone, Copy)]
pub struct FeatureDef {
    pub name: &'static str,
    pub description: &'static str,
    pub compute: fn(&[f64]) -> f64,
}

impl std::fmt::Debug for FeatureDef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name)
    }
}

fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        x.iter().sum::<f64>() / x.len() as f64
    }
}

fn variance(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

fn central_moment(x: &[f64], k: i32) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(k)).sum::<f64>() / x.len().max(1) as f64
}

fn skewness(x: &[f64]) -> f64 {
    let var = variance(x);
    if var <= 0.0 {
        0.0
    } else {
        central_moment(x, 3) / var.powf(1.5)
    }
}

fn kurtosis(x: &[f64]) -> f64 {
    let var = variance(x);
    if var <= 0.0 {
        0.0
    } else {
        central_moment(x, 4) / (var * var) - 3.0
    }
}

fn range_count(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().filter(|v| (m - 1.0..=m + 1.0).contains(*v)).count() as f64
}

fn count_above_mean(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().filter(|v| **v > m).count() as f64
}

fn count_below_mean(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().filter(|v| **v < m).count() as f64
}

fn longest_run(x: &[f64], pred: impl Fn(f64) -> bool) -> f64 {
    let (mut best, mut cur) = (0usize, 0usize);
    for &v in x {
        if pred(v) {
            cur += 1;
            best = best.max(cur);
        } else {
            cur = 0;
        }
    }
    best as f64
}

fn longest_strike_above_mean(x: &[f64]) -> f64 {
    let m = mean(x);
    longest_run(x, |v| v > m)
}

fn longest_strike_below_mean(x: &[f64]) -> f64 {
    let m = mean(x);
    longest_run(x, |v| v < m)
}

fn number_peaks(x: &[f64]) -> f64 {
    x.windows(3).filter(|w| w[1] > w[0] && w[1] > w[2]).count() as f64
}

fn autocorrelation_lag1(x: &[f64]) -> f64 {
    let var = variance(x);
    if x.len() < 2 || var <= 0.0 {
        return 0.0;
    }
    let m = mean(x);
    let s: f64 = x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
    s / ((x.len() - 1) as f64 * var)
}

fn trend(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    if x.len() < 2 {
        return (0.0, x.first().copied().unwrap_or(0.0));
    }
    let tm = (n - 1.0) / 2.0;
    let m = mean(x);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, v) in x.iter().enumerate() {
        let dt = t as f64 - tm;
        sxy += dt * (v - m);
        sxx += dt * dt;
    }
    let slope = sxy / sxx;
    (slope, m - slope * tm)
}

fn changes(x: &[f64]) -> impl Iterator<Item = f64> + '_ {
    x.windows(2).map(|w| w[1] - w[0])
}

fn mean_abs_change(x: &[f64]) -> f64 {
    if x.len() < 2 {
        0.0
    } else {
        changes(x).map(f64::abs).sum::<f64>() / (x.len() - 1) as f64
    }
}

fn max_change(x: &[f64]) -> f64 {
    changes(x).fold(None, |a: Option<f64>, d| Some(a.map_or(d, |a| a.max(d)))).unwrap_or(0.0)
}

fn min_change(x: &[f64]) -> f64 {
    changes(x).fold(None, |a: Option<f64>, d| Some(a.map_or(d, |a| a.min(d)))).unwrap_or(0.0)
}

fn binned_entropy(x: &[f64]) -> f64 {
    const BINS: usize = 5;
    if x.is_empty() {
        return 0.0;
    }
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return 0.0;
    }
    let mut counts = [0usize; BINS];
    for &v in x {
        let b = (((v - lo) / (hi - lo)) * BINS as f64).floor() as usize;
        counts[b.min(BINS - 1)] += 1;
    }
    let n = x.len() as f64;
    counts.iter().filter(|&&c| c > 0).map(|&c| c as f64 / n).map(|p| -p * p.ln()).sum()
}

fn time_of_max(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let mut best = 0;
    for (i, &v) in x.iter().enumerate() {
        if v > x[best] {
            best = i;
        }
    }
    best as f64 / x.len() as f64
}

macro_rules! feature {
    ($name:literal, $desc:literal, $f:expr) => {
        FeatureDef { name: $name, description: $desc, compute: $f }
    };
}

/// The fixed, ordered feature catalog.
pub const CATALOG: &[FeatureDef] = &[
    feature!("mean", "average value", mean),
    feature!("variance", "population variance", variance),
    feature!("std", "population standard deviation", |x| variance(x).sqrt()),
    feature!("minimum", "smallest value", |x| x.iter().copied().reduce(f64::min).unwrap_or(0.0)),
    feature!("maximum", "largest value", |x| x.iter().copied().reduce(f64::max).unwrap_or(0.0)),
    feature!("last_value", "value at the failure time", |x| x.last().copied().unwrap_or(0.0)),
    feature!("abs_energy", "sum of squared values", |x| x.iter().map(|v| v * v).sum()),
    feature!("skewness", "third standardized moment", skewness),
    feature!("kurtosis", "excess fourth standardized moment", kurtosis),
    feature!("range_count", "values within one unit of the mean", range_count),
    feature!("count_above_mean", "values strictly above the mean", count_above_mean),
    feature!("count_below_mean", "values strictly below the mean", count_below_mean),
    feature!("longest_strike_above_mean", "longest run strictly above the mean", longest_strike_above_mean),
    feature!("longest_strike_below_mean", "longest run strictly below the mean", longest_strike_below_mean),
    feature!("number_peaks", "samples larger than both neighbours", number_peaks),
    feature!("autocorrelation_lag1", "correlation with the series shifted by one step", autocorrelation_lag1),
    feature!("linear_trend_slope", "least-squares slope per step", |x| trend(x).0),
    feature!("linear_trend_intercept", "least-squares value at the first step", |x| trend(x).1),
    feature!("mean_abs_change", "average absolute step-to-step change", mean_abs_change),
    feature!("max_change", "largest step-to-step increase", max_change),
    feature!("min_change", "largest step-to-step decrease (most negative change)", min_change),
    feature!("first_last_diff", "last value minus first value", |x| match (x.first(), x.last()) {
        (Some(a), Some(b)) => b - a,
        _ => 0.0,
    }),
    feature!("binned_entropy", "entropy of a 5-bin histogram", binned_entropy),
    feature!("time_of_max", "relative position of the first maximum", time_of_max),
];

pub fn feature(name: &str) -> Option<&'static FeatureDef> {
    CATALOG.iter().find(|f| f.name == name)
}

/// All catalog features of one column, in catalog order.
pub fn extract_ts_features(column: &[f64]) -> Vec<f64> {
    CATALOG.iter().map(|f| (f.compute)(column)).collect()
}
