//! Uniformly sampled real-valued signals and their CSV form.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// A uniformly sampled real signal.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceTrace {
    sample_period: f64,
    samples: Vec<f64>,
    unit_label: String,
}

impl SourceTrace {
    pub fn new(
        sample_period: f64,
        samples: Vec<f64>,
        unit_label: impl Into<String>,
    ) -> Result<Self> {
        if !(sample_period > 0.0 && sample_period.is_finite()) {
            return Err(Error::config(format!(
                "sample period must be positive, got {sample_period}"
            )));
        }
        if samples.is_empty() {
            return Err(Error::config("trace must contain at least one sample"));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            sample_period,
            samples,
            unit_label: unit_label.into(),
        })
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.sample_period
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn unit_label(&self) -> &str {
        &self.unit_label
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 * self.sample_period
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.samples
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Same time base and label, new values.
    pub(crate) fn with_samples(&self, samples: Vec<f64>) -> Self {
        debug_assert!(!samples.is_empty());
        Self {
            sample_period: self.sample_period,
            samples,
            unit_label: self.unit_label.clone(),
        }
    }

    /// Keeps every `factor`-th sample starting at index 0 (sample-and-hold at
    /// block start).
    pub fn decimate(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::config("decimation factor must be >= 1"));
        }
        let samples: Vec<f64> = self.samples.iter().step_by(factor).copied().collect();
        Ok(Self {
            sample_period: self.sample_period * factor as f64,
            samples,
            unit_label: self.unit_label.clone(),
        })
    }

    /// `t_seconds,value` with LF line endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.samples.len() * 24 + 16);
        out.push_str("t_seconds,value\n");
        for (i, v) in self.samples.iter().enumerate() {
            let _ = writeln!(out, "{},{}", i as f64 * self.sample_period, v);
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Parses the CSV form. The sample period is taken from the first two
    /// timestamps; a single-row file needs `fallback_period`.
    pub fn from_csv(text: &str, fallback_period: Option<f64>, origin: &Path) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: origin.to_path_buf(),
            message: format!("line {line}: {message}"),
        };
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if idx == 0 && line.starts_with("t_seconds") {
                continue;
            }
            let (t, v) = line
                .split_once(',')
                .ok_or_else(|| parse_err(idx + 1, "expected `t_seconds,value`".into()))?;
            let t: f64 = t
                .trim()
                .parse()
                .map_err(|e| parse_err(idx + 1, format!("bad time: {e}")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|e| parse_err(idx + 1, format!("bad value: {e}")))?;
            times.push(t);
            values.push(v);
        }
        let period = match (times.first(), times.get(1)) {
            (Some(t0), Some(t1)) => t1 - t0,
            _ => {
                fallback_period.ok_or_else(|| parse_err(1, "cannot infer sample period".into()))?
            }
        };
        Self::new(period, values, "")
    }

    pub fn read_csv(path: impl AsRef<Path>, fallback_period: Option<f64>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text, fallback_period, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_invalid_construction() {
        assert!(SourceTrace::new(0.0, vec![1.0], "").is_err());
        assert!(SourceTrace::new(1e-3, vec![], "").is_err());
        assert!(SourceTrace::new(1e-3, vec![f64::NAN], "").is_err());
    }

    #[test]
    fn csv_round_trip() {
        let t = SourceTrace::new(1e-3, vec![0.1, -2.5, 3.0e-7], "V").unwrap();
        let csv = t.to_csv();
        assert!(csv.starts_with("t_seconds,value\n"));
        assert!(!csv.contains('\r'));
        let back = SourceTrace::from_csv(&csv, None, Path::new("mem")).unwrap();
        assert_eq!(back.samples(), t.samples());
        assert!((back.sample_period() - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn decimate_keeps_block_starts() {
        let t = SourceTrace::new(1e-3, (0..25).map(f64::from).collect(), "").unwrap();
        let d = t.decimate(10).unwrap();
        assert_eq!(d.samples(), &[0.0, 10.0, 20.0]);
        assert!((d.sample_period() - 1e-2).abs() < 1e-15);
    }
}
