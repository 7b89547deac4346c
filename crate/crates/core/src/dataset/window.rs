//! Fixed-length metric windows sliced at failure time.

use serde::{Deserialize, Serialize};

use super::series::MetricSeries;
use crate::error::{Error, Result};

pub const NORMALIZE_EPS: f64 = 1e-8;

/// Window geometry shared by every failure of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowConfig {
    /// Rows per window (W).
    pub length: usize,
    /// Sampling step in seconds.
    pub step: i64,
    /// Rows in the pre-failure reference period used for normalization.
    /// The period ends where the input window begins.
    pub baseline_length: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self { length: 20, step: 60, baseline_length: 60 }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.length == 0 || self.step <= 0 || self.baseline_length == 0 {
            return Err(Error::InvalidArgument(format!("invalid window config {self:?}")));
        }
        Ok(())
    }

    /// Seconds of history needed before a failure: baseline plus window.
    pub fn history_span(&self) -> i64 {
        (self.length + self.baseline_length) as i64 * self.step
    }
}

/// `rows` time steps by `cols` metrics, row-major. Column order follows the
/// unit's failure class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricWindow {
    pub unit_id: String,
    pub rows: usize,
    pub cols: usize,
    pub start_time: i64,
    pub data: Vec<f64>,
}

impl MetricWindow {
    pub fn new(unit_id: impl Into<String>, rows: usize, cols: usize, start_time: i64, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!("window data {} != {rows}x{cols}", data.len())));
        }
        Ok(Self { unit_id: unit_id.into(), rows, cols, start_time, data })
    }

    pub fn zeros(unit_id: impl Into<String>, rows: usize, cols: usize, start_time: i64) -> Self {
        Self { unit_id: unit_id.into(), rows, cols, start_time, data: vec![0.0; rows * cols] }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.cols).map(|c| self.column(c)).collect()
    }
}

/// Samples `series` (one per class metric, in class order) at
/// `failure_time - (length-1)*step ..= failure_time`.
///
/// Gaps are filled with the last observation at or before each sample time;
/// before the first observation the value is zero. A metric with no data at
/// all yields a zero column and a warning.
pub fn slice_window(
    unit_id: &str,
    series: &[&MetricSeries],
    failure_time: i64,
    length: usize,
    step: i64,
) -> Result<MetricWindow> {
    if length == 0 || step <= 0 {
        return Err(Error::InvalidArgument(format!("window length {length}, step {step}")));
    }
    let cols = series.len();
    let start = failure_time - (length as i64 - 1) * step;
    let mut data = vec![0.0; length * cols];
    for (c, s) in series.iter().enumerate() {
        if !s.has_observations() {
            log::warn!("no data for metric {} of {unit_id}; using a zero column", s.descriptor.name);
            continue;
        }
        for r in 0..length {
            let t = start + r as i64 * step;
            data[r * cols + c] = s.last_observation(t).unwrap_or(0.0);
        }
    }
    MetricWindow::new(unit_id, length, cols, start, data)
}

/// Per-column mean and population standard deviation.
pub fn column_stats(w: &MetricWindow) -> (Vec<f64>, Vec<f64>) {
    let n = w.rows.max(1) as f64;
    let mut means = vec![0.0; w.cols];
    let mut stds = vec![0.0; w.cols];
    for c in 0..w.cols {
        let mean = (0..w.rows).map(|r| w.get(r, c)).sum::<f64>() / n;
        let var = (0..w.rows).map(|r| (w.get(r, c) - mean).powi(2)).sum::<f64>() / n;
        means[c] = mean;
        stds[c] = var.sqrt();
    }
    (means, stds)
}

/// Baseline statistics from the reference period that ends right before
/// the input window starts.
pub fn baseline_stats(
    unit_id: &str,
    series: &[&MetricSeries],
    failure_time: i64,
    cfg: &WindowConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let end = failure_time - cfg.length as i64 * cfg.step;
    let reference = slice_window(unit_id, series, end, cfg.baseline_length, cfg.step)?;
    Ok(column_stats(&reference))
}

/// Maps each column `x` to `(x - mean) / (std + 1e-8)`.
pub fn normalize_window(w: &MetricWindow, mean: &[f64], std: &[f64]) -> Result<MetricWindow> {
    if mean.len() != w.cols || std.len() != w.cols {
        return Err(Error::Shape(format!(
            "baseline width {}/{} for a window of {} columns",
            mean.len(),
            std.len(),
            w.cols
        )));
    }
    let mut out = w.clone();
    for r in 0..w.rows {
        for c in 0..w.cols {
            out.data[r * w.cols + c] = (w.get(r, c) - mean[c]) / (std[c] + NORMALIZE_EPS);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fdg::MetricDescriptor;
    use proptest::prelude::*;

    fn series(name: &str, ts: Vec<i64>, vs: Vec<Option<f64>>) -> MetricSeries {
        MetricSeries::new(MetricDescriptor { name: name.into(), unit_id: "u".into() }, ts, vs).unwrap()
    }

    #[test]
    fn twenty_minute_window_ends_at_failure() {
        let t = 100_000;
        let ts: Vec<i64> = (0..40).map(|i| t - 39 * 60 + i * 60).collect();
        let a = series("a", ts.clone(), ts.iter().map(|&x| Some(x as f64)).collect());
        let b = series("b", ts.clone(), vec![Some(5.0); 40]);
        let w = slice_window("u", &[&a, &b], t, 20, 60).unwrap();
        assert_eq!((w.rows, w.cols), (20, 2));
        assert_eq!(w.start_time, t - 19 * 60);
        assert_eq!(w.get(19, 0), t as f64);
        assert_eq!(w.get(0, 0), (t - 19 * 60) as f64);
        assert!(w.column(1).iter().all(|&v| v == 5.0));
    }

    #[test]
    fn gaps_carry_forward_then_zero() {
        let s = series("m", vec![120, 300], vec![Some(2.0), Some(7.0)]);
        let empty = MetricSeries::empty(MetricDescriptor { name: "gone".into(), unit_id: "u".into() });
        let w = slice_window("u", &[&s, &empty], 300, 6, 60).unwrap();
        assert_eq!(w.column(0), vec![0.0, 0.0, 2.0, 2.0, 2.0, 7.0]);
        assert_eq!(w.column(1), vec![0.0; 6]);
    }

    #[test]
    fn rejects_bad_geometry() {
        let s = series("m", vec![0], vec![Some(1.0)]);
        assert!(slice_window("u", &[&s], 0, 0, 60).is_err());
        assert!(slice_window("u", &[&s], 0, 3, 0).is_err());
    }

    #[test]
    fn baseline_period_is_disjoint_from_window() {
        let cfg = WindowConfig { length: 3, step: 10, baseline_length: 4 };
        // values equal timestamps; window rows are t-20, t-10, t
        let ts: Vec<i64> = (0..=20).map(|i| i * 10).collect();
        let s = series("m", ts.clone(), ts.iter().map(|&x| Some(x as f64)).collect());
        let (mean, _) = baseline_stats("u", &[&s], 200, &cfg).unwrap();
        // baseline rows: 140,150,160,170
        assert_eq!(mean, vec![155.0]);
    }

    #[test]
    fn normalize_examples() {
        let w = MetricWindow::new("u", 3, 2, 0, vec![1.0, 4.0, 1.0, 4.0, 1.0, 4.0]).unwrap();
        let z = normalize_window(&w, &[1.0, 2.0], &[0.0, 2.0]).unwrap();
        assert_eq!(z.column(0), vec![0.0; 3]);
        assert!((z.get(0, 1) - 1.0).abs() < 1e-8);

        let spike = MetricWindow::new("u", 1, 1, 0, vec![2.0]).unwrap();
        let z = normalize_window(&spike, &[1.0], &[0.0]).unwrap();
        assert!(z.data[0].is_finite());
        assert!((z.data[0] - 1e8).abs() < 1e-2);
        assert!(normalize_window(&spike, &[1.0, 2.0], &[0.0]).is_err());
    }

    proptest! {
        #[test]
        fn normalization_is_affine_equivariant(
            xs in proptest::collection::vec(-100.0f64..100.0, 4..20),
            a in 0.1f64..10.0,
            b in -50.0f64..50.0,
        ) {
            let w = MetricWindow::new("u", xs.len(), 1, 0, xs.clone()).unwrap();
            let (m, s) = column_stats(&w);
            prop_assume!(s[0] > 1e-3);
            let shifted = MetricWindow::new("u", xs.len(), 1, 0, xs.iter().map(|x| a * x + b).collect()).unwrap();
            let z1 = normalize_window(&w, &m, &s).unwrap();
            let z2 = normalize_window(&shifted, &[a * m[0] + b], &[a * s[0]]).unwrap();
            for (p, q) in z1.data.iter().zip(&z2.data) {
                prop_assert!((p - q).abs() < 1e-6);
            }
        }
    }
}
