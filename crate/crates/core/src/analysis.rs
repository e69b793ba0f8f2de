//! Receiver-side cleanup and evaluation: threshold and median filters, pulse
//! peak extraction, MSE, empirical CDFs, and Kolmogorov-Smirnov tests.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::SourceTrace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseEvent {
    pub time: f64,
    pub peak_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub reject_at_5pct: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsePair {
    pub mse_x1: f64,
    pub mse_x2: f64,
    pub sum: f64,
}

impl MsePair {
    pub fn new(mse_x1: f64, mse_x2: f64) -> Self {
        Self {
            mse_x1,
            mse_x2,
            sum: mse_x1 + mse_x2,
        }
    }
}

/// Zeroes every sample below `threshold`.
pub fn threshold_filter(trace: &SourceTrace, threshold: f64) -> Result<SourceTrace> {
    if !threshold.is_finite() {
        return Err(Error::config("threshold must be finite"));
    }
    Ok(trace.with_samples(
        trace
            .samples()
            .iter()
            .map(|&v| if v < threshold { 0.0 } else { v })
            .collect(),
    ))
}

/// Sliding median over `order + 1` samples centred on each output sample,
/// with half-sample symmetric reflection at the edges.
pub fn median_filter(trace: &SourceTrace, order: usize) -> Result<SourceTrace> {
    if order < 2 || !order.is_multiple_of(2) {
        return Err(Error::config(format!(
            "median order must be even and >= 2, got {order}"
        )));
    }
    let x = trace.samples();
    let n = x.len();
    if n <= order {
        return Err(Error::precondition(format!(
            "trace of {n} samples is shorter than the {}-sample window",
            order + 1
        )));
    }
    let half = order / 2;
    let at = |i: isize| -> f64 {
        let j = if i < 0 {
            -i - 1
        } else if i >= n as isize {
            2 * n as isize - i - 1
        } else {
            i
        };
        x[j as usize]
    };

    let mut window: Vec<f64> = (-(half as isize)..=half as isize).map(at).collect();
    window.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(n);
    out.push(window[half]);
    for i in 1..n as isize {
        let leaving = at(i - 1 - half as isize);
        let entering = at(i + half as isize);
        let pos = window.partition_point(|v| v.total_cmp(&leaving).is_lt());
        window.remove(pos);
        let pos = window.partition_point(|v| v.total_cmp(&entering).is_lt());
        window.insert(pos, entering);
        out.push(window[half]);
    }
    Ok(trace.with_samples(out))
}

/// Local maxima at or above `min_height`, thinned greedily (largest first)
/// so that accepted events are at least `min_separation` apart. Flat tops
/// report their first sample. Events are returned in time order.
pub fn detect_peaks(
    trace: &SourceTrace,
    min_height: f64,
    min_separation: f64,
) -> Result<Vec<PulseEvent>> {
    let dt = trace.sample_period();
    if min_separation < dt * (1.0 - 1e-9) {
        return Err(Error::precondition(format!(
            "min_separation {min_separation} s is below the sample period {dt} s"
        )));
    }
    let x = trace.samples();
    let n = x.len();
    let mut candidates = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if x[i] >= min_height && x[i] > x[i - 1] {
            let mut j = i;
            while j + 1 < n && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < n && x[j + 1] < x[i] {
                candidates.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    candidates.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));

    let sep = min_separation / dt - 1e-9;
    let mut accepted = BTreeSet::new();
    for c in candidates {
        let clash_before = accepted
            .range(..c)
            .next_back()
            .is_some_and(|&p| ((c - p) as f64) < sep);
        let clash_after = accepted
            .range(c..)
            .next()
            .is_some_and(|&p| ((p - c) as f64) < sep);
        if !clash_before && !clash_after {
            accepted.insert(c);
        }
    }
    Ok(accepted
        .into_iter()
        .map(|i| PulseEvent {
            time: i as f64 * dt,
            peak_value: x[i],
        })
        .collect())
}

pub fn mse(reference: &[f64], estimate: &[f64]) -> Result<f64> {
    if reference.len() != estimate.len() {
        return Err(Error::precondition(format!(
            "length mismatch: {} reference vs {} estimate samples",
            reference.len(),
            estimate.len()
        )));
    }
    if reference.is_empty() {
        return Err(Error::precondition("empty traces"));
    }
    Ok(reference
        .iter()
        .zip(estimate)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / reference.len() as f64)
}

/// Right-continuous empirical CDF as `(value, P[X <= value])` at each
/// distinct value.
pub fn empirical_cdf(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if values.is_empty() {
        return Err(Error::precondition("empirical CDF of an empty sample"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Input("NaN in CDF input".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        let p = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 = p,
            _ => out.push((v, p)),
        }
    }
    Ok(out)
}

/// Survival function of the Kolmogorov distribution,
/// `Q(λ) = 2 Σ_{k>=1} (-1)^{k-1} exp(-2 k² λ²)`.
///
/// For small `λ` the alternating series converges slowly, so the
/// equivalent theta-function form is used there.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 1.0;
    }
    if lambda < 1.18 {
        let l2 = lambda * lambda;
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let cdf = (std::f64::consts::TAU).sqrt() / lambda
            * (1..=20)
                .map(|k| {
                    let odd = (2 * k - 1) as f64;
                    (-odd * odd * pi2 / (8.0 * l2)).exp()
                })
                .sum::<f64>();
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 * sum.abs().max(1e-300) {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p_value(d: f64, effective_n: f64) -> f64 {
    let sq = effective_n.sqrt();
    kolmogorov_q((sq + 0.12 + 0.11 / sq) * d)
}

fn sorted_finite(values: &[f64]) -> Result<Vec<f64>> {
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Input("NaN in K-S sample".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Largest gap between the two empirical CDFs, evaluated at every pooled
/// sample value.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    let a = sorted_finite(a)?;
    let b = sorted_finite(b)?;
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(d)
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value at
/// effective size `n m / (n + m)`.
pub fn ks_two_sample(a: &[f64], b: &[f64], alpha: f64) -> Result<KsResult> {
    if a.len() < 5 || b.len() < 5 {
        return Err(Error::precondition(format!(
            "K-S test needs at least 5 values per sample, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let d = ks_statistic(a, b)?;
    let (n, m) = (a.len() as f64, b.len() as f64);
    let p = ks_p_value(d, n * m / (n + m));
    Ok(KsResult {
        statistic: d,
        p_value: p,
        reject_at_5pct: p < alpha,
    })
}

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
pub fn ks_one_sample(values: &[f64], cdf: impl Fn(f64) -> f64, alpha: f64) -> Result<KsResult> {
    if values.len() < 5 {
        return Err(Error::precondition("K-S test needs at least 5 values"));
    }
    let v = sorted_finite(values)?;
    let n = v.len() as f64;
    let d = v
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    let p = ks_p_value(d, n);
    Ok(KsResult {
        statistic: d,
        p_value: p,
        reject_at_5pct: p < alpha,
    })
}

/// Kendall's tau-b rank correlation.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::precondition(
            "kendall tau needs two equal-length series of >= 2 points",
        ));
    }
    let (mut concordant, mut discordant, mut ties_x, mut ties_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let dx = (x[j] - x[i])
                .partial_cmp(&0.0)
                .unwrap_or(std::cmp::Ordering::Equal);
            let dy = (y[j] - y[i])
                .partial_cmp(&0.0)
                .unwrap_or(std::cmp::Ordering::Equal);
            use std::cmp::Ordering::Equal;
            match (dx, dy) {
                (Equal, Equal) => {}
                (Equal, _) => ties_x += 1,
                (_, Equal) => ties_y += 1,
                (a, b) if a == b => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let n1 = (concordant + discordant + ties_x) as f64;
    let n2 = (concordant + discordant + ties_y) as f64;
    if n1 == 0.0 || n2 == 0.0 {
        return Ok(0.0);
    }
    Ok((concordant - discordant) as f64 / (n1 * n2).sqrt())
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Noise standard deviation estimated as 1.4826 x the median absolute
/// deviation; insensitive to a sparse pulse train riding on the baseline.
pub fn robust_noise_sd(values: &[f64]) -> f64 {
    let m = median(values);
    let dev: Vec<f64> = values.iter().map(|v| (v - m).abs()).collect();
    1.4826 * median(&dev)
}

pub fn peaks_csv(events: &[PulseEvent]) -> String {
    let mut out = String::from("time,peak\n");
    for e in events {
        let _ = writeln!(out, "{},{}", e.time, e.peak_value);
    }
    out
}

pub fn cdf_csv(cdf: &[(f64, f64)]) -> String {
    let mut out = String::from("value,cdf\n");
    for (v, p) in cdf {
        let _ = writeln!(out, "{v},{p}");
    }
    out
}
