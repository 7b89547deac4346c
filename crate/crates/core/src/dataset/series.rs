//! Raw metric time series and the metrics CSV format
//! (`timestamp,unit_id,metric_name,value`; an empty value marks a missing
//! sample).

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fdg::MetricDescriptor;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    pub descriptor: MetricDescriptor,
    /// Strictly increasing epoch seconds.
    pub timestamps: Vec<i64>,
    /// `None` marks an explicitly missing sample.
    pub values: Vec<Option<f64>>,
}

impl MetricSeries {
    pub fn new(descriptor: MetricDescriptor, timestamps: Vec<i64>, values: Vec<Option<f64>>) -> Result<Self> {
        let s = Self { descriptor, timestamps, values };
        s.check()?;
        Ok(s)
    }

    pub fn empty(descriptor: MetricDescriptor) -> Self {
        Self { descriptor, timestamps: Vec::new(), values: Vec::new() }
    }

    fn check(&self) -> Result<()> {
        if self.timestamps.len() != self.values.len() {
            return Err(Error::Validation(format!(
                "series {}/{}: {} timestamps but {} values",
                self.descriptor.unit_id,
                self.descriptor.name,
                self.timestamps.len(),
                self.values.len()
            )));
        }
        if self.timestamps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation(format!(
                "series {}/{}: timestamps not strictly increasing",
                self.descriptor.unit_id, self.descriptor.name
            )));
        }
        if self.values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "series {}/{}: non-finite value",
                self.descriptor.unit_id, self.descriptor.name
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn has_observations(&self) -> bool {
        self.values.iter().any(Option::is_some)
    }

    /// Last observed (non-missing) value at or before `t`.
    pub fn last_observation(&self, t: i64) -> Option<f64> {
        let end = self.timestamps.partition_point(|&ts| ts <= t);
        self.values[..end].iter().rev().find_map(|v| *v)
    }
}

/// All metric series of a system, keyed by `(unit_id, metric_name)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricStore {
    series: BTreeMap<(String, String), MetricSeries>,
}

impl MetricStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, series: MetricSeries) {
        let key = (series.descriptor.unit_id.clone(), series.descriptor.name.clone());
        self.series.insert(key, series);
    }

    pub fn get(&self, unit_id: &str, metric: &str) -> Option<&MetricSeries> {
        self.series.get(&(unit_id.to_string(), metric.to_string()))
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &MetricSeries> {
        self.series.values()
    }

    /// Writes rows grouped by series (sorted by unit, then metric), each in
    /// time order. Values use the shortest round-trip decimal form.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = std::io::BufWriter::new(out);
        writeln!(w, "timestamp,unit_id,metric_name,value")?;
        for s in self.series.values() {
            let unit = csv_field(&s.descriptor.unit_id);
            let metric = csv_field(&s.descriptor.name);
            for (t, v) in s.timestamps.iter().zip(&s.values) {
                match v {
                    Some(v) => writeln!(w, "{t},{unit},{metric},{v:?}")?,
                    None => writeln!(w, "{t},{unit},{metric},")?,
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Parses the metrics CSV. Rows may appear in any order; each series is
    /// sorted by time and duplicate timestamps are rejected.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let headers = reader.headers()?.clone();
        let expected = ["timestamp", "unit_id", "metric_name", "value"];
        if headers.iter().map(str::trim).ne(expected.iter().copied()) {
            return Err(Error::Validation(format!(
                "metrics CSV header must be {}, got {:?}",
                expected.join(","),
                headers
            )));
        }
        let mut raw: BTreeMap<(String, String), Vec<(i64, Option<f64>)>> = BTreeMap::new();
        let mut record = csv::StringRecord::new();
        let mut line = 1usize;
        while reader.read_record(&mut record)? {
            line += 1;
            let bad = |what: &str| Error::Validation(format!("metrics CSV line {line}: bad {what}"));
            let t: i64 = record.get(0).ok_or_else(|| bad("row"))?.trim().parse().map_err(|_| bad("timestamp"))?;
            let unit = record.get(1).ok_or_else(|| bad("row"))?;
            let metric = record.get(2).ok_or_else(|| bad("row"))?;
            let value = record.get(3).map(str::trim).unwrap_or("");
            let value = if value.is_empty() {
                None
            } else {
                let v: f64 = value.parse().map_err(|_| bad("value"))?;
                if !v.is_finite() {
                    return Err(bad("value"));
                }
                Some(v)
            };
            match raw.get_mut(&(unit.to_string(), metric.to_string())) {
                Some(rows) => rows.push((t, value)),
                None => {
                    raw.insert((unit.to_string(), metric.to_string()), vec![(t, value)]);
                }
            }
        }
        let mut store = MetricStore::new();
        for ((unit, metric), mut rows) in raw {
            rows.sort_by_key(|r| r.0);
            let (timestamps, values): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
            let descriptor = MetricDescriptor { name: metric, unit_id: unit };
            store.insert(MetricSeries::new(descriptor, timestamps, values)?);
        }
        Ok(store)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desc(unit: &str, name: &str) -> MetricDescriptor {
        MetricDescriptor { name: name.into(), unit_id: unit.into() }
    }

    #[test]
    fn rejects_unsorted_and_ragged() {
        assert!(MetricSeries::new(desc("u", "m"), vec![2, 1], vec![Some(0.0), Some(1.0)]).is_err());
        assert!(MetricSeries::new(desc("u", "m"), vec![1, 2], vec![Some(0.0)]).is_err());
        assert!(MetricSeries::new(desc("u", "m"), vec![1], vec![Some(f64::NAN)]).is_err());
    }

    #[test]
    fn last_observation_skips_missing() {
        let s = MetricSeries::new(desc("u", "m"), vec![0, 60, 120], vec![Some(1.0), None, Some(3.0)]).unwrap();
        assert_eq!(s.last_observation(-1), None);
        assert_eq!(s.last_observation(0), Some(1.0));
        assert_eq!(s.last_observation(90), Some(1.0));
        assert_eq!(s.last_observation(500), Some(3.0));
    }

    #[test]
    fn csv_round_trip_keeps_missing_and_odd_names() {
        let mut store = MetricStore::new();
        store.insert(
            MetricSeries::new(desc("svc, 1", "rt"), vec![0, 60], vec![Some(0.1 + 0.2), None]).unwrap(),
        );
        store.insert(MetricSeries::new(desc("db", "q\"x"), vec![5], vec![Some(-1e-300)]).unwrap());
        let mut buf = Vec::new();
        store.write_csv(&mut buf).unwrap();
        let back = MetricStore::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, store);
    }

    #[test]
    fn csv_rejects_bad_header() {
        let text = "time,unit,metric,value\n0,u,m,1\n";
        assert!(MetricStore::read_csv(text.as_bytes()).is_err());
    }
}
