//! Rectangular-lattice AJSCC mapping.
//!
//! `x2` selects one of `L` parallel lines (quantized with spacing
//! `Δ = x2_max / L`), `x1` the position along it. Lines alternate direction
//! so the encoded value is continuous across line changes: even lines rise
//! with `x1`, odd lines fall.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of stages in the fixed stacked-stage hardware variant.
pub const DESIGN1_LEVELS: u32 = 11;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AjsccParams {
    pub levels: u32,
    pub x1_max: f64,
    pub x2_max: f64,
    /// Encoded span of one level (`V_R`). Defaults to `1 / levels`, which
    /// puts the encoded full scale at 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level_height: Option<f64>,
    /// Per-stage offset of the stacked-stage variant; zero for the ideal
    /// mapping.
    #[serde(default)]
    pub design1_bias: f64,
}

impl AjsccParams {
    pub fn new(levels: u32, x1_max: f64, x2_max: f64) -> Result<Self> {
        let p = Self {
            levels,
            x1_max,
            x2_max,
            level_height: None,
            design1_bias: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    /// Encoder input ranges used by the link simulations: `x1 <= 2.25 V`,
    /// `x2 <= 3.0 V`.
    pub fn link_default(levels: u32) -> Result<Self> {
        Self::new(levels, 2.25, 3.0)
    }

    pub fn with_level_height(mut self, v_r: f64) -> Result<Self> {
        self.level_height = Some(v_r);
        self.validate()?;
        Ok(self)
    }

    pub fn with_design1_bias(mut self, bias: f64) -> Result<Self> {
        self.design1_bias = bias;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 {
            return Err(Error::config(format!(
                "need at least 2 levels, got {}",
                self.levels
            )));
        }
        if !(self.x1_max > 0.0 && self.x1_max.is_finite()) {
            return Err(Error::config("x1_max must be positive"));
        }
        if !(self.x2_max > 0.0 && self.x2_max.is_finite()) {
            return Err(Error::config("x2_max must be positive"));
        }
        if !(self.level_height() > 0.0 && self.level_height().is_finite()) {
            return Err(Error::config("level height must be positive"));
        }
        if !self.design1_bias.is_finite() {
            return Err(Error::config("design1_bias must be finite"));
        }
        Ok(())
    }

    pub fn level_height(&self) -> f64 {
        self.level_height.unwrap_or(1.0 / self.levels as f64)
    }

    /// Level spacing on the `x2` axis.
    pub fn delta(&self) -> f64 {
        self.x2_max / self.levels as f64
    }

    /// Top of the encoded range, `L * V_R`.
    pub fn full_scale(&self) -> f64 {
        self.levels as f64 * self.level_height()
    }

    /// Line index of `x2`. Intervals are half-open `[kΔ, (k+1)Δ)`, except
    /// that `x2_max` itself belongs to the top line.
    pub fn level_of(&self, x2: f64) -> u32 {
        quantize(x2.clamp(0.0, self.x2_max), self.delta(), self.levels)
    }
}

/// `floor(v / step)` clamped to `[0, count - 1]`, with boundaries taken as
/// the products `k * step` so that `k * step` always lands in bin `k`.
fn quantize(v: f64, step: f64, count: u32) -> u32 {
    let top = count as i64 - 1;
    let mut q = ((v / step).floor() as i64).clamp(0, top);
    while q > 0 && v < q as f64 * step {
        q -= 1;
    }
    while q < top && v >= (q + 1) as f64 * step {
        q += 1;
    }
    q as u32
}

/// One encoded voltage, in `[0, L * V_R]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct EncodedSample(pub f64);

impl EncodedSample {
    pub fn value(self) -> f64 {
        self.0
    }
}

fn check_finite(x1: f64, x2: f64) -> Result<()> {
    if x1.is_finite() && x2.is_finite() {
        Ok(())
    } else {
        Err(Error::Input(format!("non-finite source pair ({x1}, {x2})")))
    }
}

pub fn encode(x1: f64, x2: f64, p: &AjsccParams) -> Result<EncodedSample> {
    check_finite(x1, x2)?;
    let v_r = p.level_height();
    let q = p.level_of(x2);
    let g = v_r * x1.clamp(0.0, p.x1_max) / p.x1_max;
    let along = if q.is_multiple_of(2) { g } else { v_r - g };
    Ok(EncodedSample(q as f64 * v_r + along))
}

/// Inverse mapping. Total on finite input: the value is clamped into
/// `[0, L * V_R]`, `x1` is read from the position along the line and `x2`
/// is reconstructed at the line's midpoint.
pub fn decode(s: EncodedSample, p: &AjsccParams) -> (f64, f64) {
    let v_r = p.level_height();
    let s = if s.0.is_nan() {
        0.0
    } else {
        s.0.clamp(0.0, p.full_scale())
    };
    let q = quantize(s, v_r, p.levels);
    let r = (s - q as f64 * v_r).clamp(0.0, v_r);
    let frac = if q.is_multiple_of(2) {
        r / v_r
    } else {
        (v_r - r) / v_r
    };
    let x1 = p.x1_max * frac;
    let x2 = (q as f64 + 0.5) * p.delta();
    (x1, x2)
}

/// Fixed-`x1` sweep of `x2` across `[0, x2_max]`, `n_points` evenly spaced
/// samples including both ends.
pub fn staircase(p: &AjsccParams, x1_fixed: f64, n_points: usize) -> Result<Vec<(f64, f64)>> {
    if n_points < 2 * p.levels as usize {
        return Err(Error::precondition(format!(
            "staircase needs at least {} points, got {n_points}",
            2 * p.levels
        )));
    }
    (0..n_points)
        .map(|i| {
            let x2 = p.x2_max * i as f64 / (n_points - 1) as f64;
            encode(x1_fixed, x2, p).map(|s| (x2, s.0))
        })
        .collect()
}

/// Collapses runs of equal (within `tol`) consecutive values.
pub fn plateaus(curve: &[(f64, f64)], tol: f64) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for &(_, y) in curve {
        match out.last() {
            Some(&last) if (y - last).abs() <= tol => {}
            _ => out.push(y),
        }
    }
    out
}

/// Stacked-stage variant: the ideal mapping with `L = 11` plus a bias that
/// accumulates once per active stage below the current one.
pub fn encode_design1(x1: f64, x2: f64, p: &AjsccParams) -> Result<EncodedSample> {
    if p.levels != DESIGN1_LEVELS {
        return Err(Error::config(format!(
            "stacked-stage encoder has {DESIGN1_LEVELS} levels, params ask for {}",
            p.levels
        )));
    }
    let ideal = encode(x1, x2, p)?;
    let q = p.level_of(x2);
    Ok(EncodedSample(ideal.0 + q as f64 * p.design1_bias))
}
