//! Shared inputs for the criterion benchmarks.

use ajscc_core::codec::{self, AjsccParams, EncodedSample};

/// `n` encoded samples sweeping the whole code range: x2 ramps up while x1
/// cycles through its span.
pub fn encoded_ramp(p: &AjsccParams, n: usize) -> Vec<EncodedSample> {
    (0..n)
        .map(|i| {
            let x1 = p.x1_max * ((i * 37) % 101) as f64 / 101.0;
            let x2 = p.x2_max * i as f64 / n as f64;
            codec::encode(x1, x2, p).expect("finite inputs")
        })
        .collect()
}

/// Deterministic in-range source pairs.
pub fn source_pairs(p: &AjsccParams, n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let a = ((i * 7919) % 1000) as f64 / 1000.0;
            let b = ((i * 104_729) % 1000) as f64 / 1000.0;
            (a * p.x1_max, b * p.x2_max)
        })
        .collect()
}
