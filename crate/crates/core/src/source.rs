//! Synthetic source signals and their conditioning.
//!
//! Two sources feed the encoder: an impedance-cytometry pulse train (`x1`)
//! and a galvanic-skin-response conductance trace (`x2`). Both generators are
//! pure functions of their spec and seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::SourceTrace;

/// Default source grid: one sample per millisecond.
pub const DEFAULT_SAMPLE_PERIOD: f64 = 1e-3;

const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CytometrySynthSpec {
    /// Mean bead arrival rate, events per second.
    pub pulse_rate: f64,
    /// Full width at half maximum of one Gaussian pulse, seconds.
    pub pulse_width: f64,
    pub peak_amplitude_mean: f64,
    pub peak_amplitude_sd: f64,
    pub baseline: f64,
    pub noise_sd: f64,
}

impl Default for CytometrySynthSpec {
    fn default() -> Self {
        Self {
            pulse_rate: 5.0,
            pulse_width: 6e-3,
            peak_amplitude_mean: 1.0,
            peak_amplitude_sd: 0.15,
            baseline: 0.1,
            noise_sd: 0.005,
        }
    }
}

impl CytometrySynthSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.pulse_rate,
            self.pulse_width,
            self.peak_amplitude_mean,
            self.peak_amplitude_sd,
            self.baseline,
            self.noise_sd,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::config("cytometry spec has non-finite fields"));
        }
        if self.pulse_width <= 0.0 {
            return Err(Error::config("pulse_width must be positive"));
        }
        if self.pulse_rate < 0.0 {
            return Err(Error::config("pulse_rate must be non-negative"));
        }
        if !(self.peak_amplitude_mean > self.baseline && self.baseline >= 0.0) {
            return Err(Error::config("need peak_amplitude_mean > baseline >= 0"));
        }
        if self.pulse_rate * self.pulse_width >= 1.0 {
            return Err(Error::config("pulse_rate * pulse_width must be < 1"));
        }
        if self.peak_amplitude_sd < 0.0 || self.noise_sd < 0.0 {
            return Err(Error::config("standard deviations must be non-negative"));
        }
        Ok(())
    }

    fn sigma(&self) -> f64 {
        self.pulse_width / FWHM_PER_SIGMA
    }
}

/// One pulse placed by the cytometry scheduler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduledPulse {
    /// Pulse centre, seconds from trace start.
    pub time: f64,
    /// Absolute apex voltage (baseline included).
    pub peak: f64,
}

/// Poisson arrival schedule used by [`gen_cytometry`].
///
/// Inter-arrival gaps shorter than `2 * pulse_width` are redrawn, so pulses
/// never overlap. Centres stay at least `2 * pulse_width` away from both ends
/// of the trace.
pub fn cytometry_schedule(
    spec: &CytometrySynthSpec,
    duration: f64,
    seed: u64,
) -> Result<Vec<ScheduledPulse>> {
    spec.validate()?;
    if spec.pulse_rate == 0.0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let gap = Exp::new(spec.pulse_rate).map_err(|e| Error::config(e.to_string()))?;
    let amp = Normal::new(spec.peak_amplitude_mean, spec.peak_amplitude_sd)
        .map_err(|e| Error::config(e.to_string()))?;
    let min_gap = 2.0 * spec.pulse_width;
    let mut pulses = Vec::new();
    let mut t = 0.0;
    loop {
        let mut g: f64 = gap.sample(&mut rng);
        while g < min_gap {
            g = gap.sample(&mut rng);
        }
        t += g;
        if t > duration - min_gap {
            break;
        }
        let mut peak = amp.sample(&mut rng);
        // Truncated below at the baseline; bounded retries keep this total.
        let mut tries = 0;
        while peak <= spec.baseline && tries < 64 {
            peak = amp.sample(&mut rng);
            tries += 1;
        }
        if peak <= spec.baseline {
            peak = spec.peak_amplitude_mean;
        }
        pulses.push(ScheduledPulse { time: t, peak });
    }
    Ok(pulses)
}

/// Gaussian pulse train on a baseline plus white noise.
pub fn gen_cytometry(
    spec: &CytometrySynthSpec,
    duration: f64,
    sample_period: f64,
    seed: u64,
) -> Result<SourceTrace> {
    spec.validate()?;
    if !(sample_period > 0.0) {
        return Err(Error::config("sample_period must be positive"));
    }
    if !(duration >= 10.0 * spec.pulse_width) {
        return Err(Error::precondition(format!(
            "duration {duration} s is shorter than 10 pulse widths"
        )));
    }
    let n = (duration / sample_period).round() as usize;
    let mut samples = vec![spec.baseline; n.max(1)];

    let sigma = spec.sigma();
    let reach = 6.0 * sigma;
    for p in cytometry_schedule(spec, duration, seed)? {
        let height = p.peak - spec.baseline;
        let lo = ((p.time - reach) / sample_period).floor().max(0.0) as usize;
        let hi = (((p.time + reach) / sample_period).ceil() as usize).min(samples.len() - 1);
        for (i, s) in samples.iter_mut().enumerate().take(hi + 1).skip(lo) {
            let dt = i as f64 * sample_period - p.time;
            *s += height * (-0.5 * (dt / sigma).powi(2)).exp();
        }
    }

    if spec.noise_sd > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(2);
        for s in &mut samples {
            let z: f64 = StandardNormal.sample(&mut rng);
            *s += spec.noise_sd * z;
        }
    }
    SourceTrace::new(sample_period, samples, "V")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GsrSynthSpec {
    /// Upper bound of the conductance trace, inverse megaohms.
    pub conductance_max: f64,
    /// -3 dB bandwidth of the drift smoother, Hz. Zero disables drift.
    pub drift_bandwidth: f64,
    /// Rate of phasic (exponential-decay) responses, events per second.
    pub event_rate: f64,
    /// Decay time constant of a phasic response, seconds.
    pub event_decay: f64,
}

impl Default for GsrSynthSpec {
    fn default() -> Self {
        Self {
            conductance_max: 2.6,
            drift_bandwidth: 0.5,
            event_rate: 0.1,
            event_decay: 4.0,
        }
    }
}

/// Fraction of `conductance_max` the trace bottoms out at.
const GSR_FLOOR_FRACTION: f64 = 0.15;

impl GsrSynthSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.conductance_max > 0.0 && self.conductance_max.is_finite()) {
            return Err(Error::config("conductance_max must be positive"));
        }
        if !(self.drift_bandwidth >= 0.0 && self.drift_bandwidth.is_finite()) {
            return Err(Error::config("drift_bandwidth must be >= 0"));
        }
        if !(self.event_rate >= 0.0 && self.event_rate.is_finite()) {
            return Err(Error::config("event_rate must be >= 0"));
        }
        if !(self.event_decay > 0.0) {
            return Err(Error::config("event_decay must be positive"));
        }
        Ok(())
    }
}

/// Slowly varying conductance: a Gaussian random walk plus exponential-decay
/// events, smoothed by a Gaussian kernel whose -3 dB point is
/// `drift_bandwidth`, then mapped affinely into
/// `[0.15 * conductance_max, conductance_max]`.
pub fn gen_gsr(
    spec: &GsrSynthSpec,
    duration: f64,
    sample_period: f64,
    seed: u64,
) -> Result<SourceTrace> {
    spec.validate()?;
    if !(duration > 0.0) || !(sample_period > 0.0) {
        return Err(Error::precondition(
            "duration and sample_period must be positive",
        ));
    }
    if spec.drift_bandwidth >= 0.25 / sample_period {
        return Err(Error::config(
            "drift_bandwidth must be well below the sampling rate",
        ));
    }
    let n = ((duration / sample_period).round() as usize).max(1);
    let mut y = vec![0.0; n];

    if spec.drift_bandwidth > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let mut acc = 0.0;
        for v in &mut y {
            let z: f64 = StandardNormal.sample(&mut rng);
            acc += z;
            *v = acc;
        }
        normalize_unit(&mut y);
    }

    if spec.event_rate > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(2);
        let gap = Exp::new(spec.event_rate).map_err(|e| Error::config(e.to_string()))?;
        let mut t: f64 = gap.sample(&mut rng);
        while t < duration {
            let amplitude = rng.random_range(0.2..0.5);
            let start = (t / sample_period).ceil() as usize;
            for (i, v) in y.iter_mut().enumerate().skip(start) {
                let dt = i as f64 * sample_period - t;
                let e = (-dt / spec.event_decay).exp();
                if e < 1e-9 {
                    break;
                }
                *v += amplitude * e;
            }
            t += gap.sample(&mut rng);
        }
    }

    if spec.drift_bandwidth > 0.0 {
        y = gaussian_smooth(&y, spec.drift_bandwidth, sample_period);
    }

    let (lo, hi) = min_max(&y);
    let floor = GSR_FLOOR_FRACTION * spec.conductance_max;
    let out: Vec<f64> = if hi - lo > 1e-12 {
        y.iter()
            .map(|v| {
                (floor + (spec.conductance_max - floor) * (v - lo) / (hi - lo))
                    .min(spec.conductance_max)
            })
            .collect()
    } else {
        vec![0.5 * spec.conductance_max; n]
    };
    SourceTrace::new(sample_period, out, "uS")
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

fn normalize_unit(v: &mut [f64]) {
    let (lo, hi) = min_max(v);
    if hi - lo > 0.0 {
        for x in v.iter_mut() {
            *x = (*x - lo) / (hi - lo);
        }
    }
}

/// Zero-phase Gaussian smoothing with reflected edges. The kernel's power
/// response is `2^{-(f / bandwidth)^2}`, i.e. -3 dB at `bandwidth`.
fn gaussian_smooth(x: &[f64], bandwidth: f64, sample_period: f64) -> Vec<f64> {
    let sigma_s = (std::f64::consts::LN_2 / 2.0).sqrt() / (std::f64::consts::PI * bandwidth);
    let sigma = sigma_s / sample_period;
    let half = (4.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-half..=half)
        .map(|k| (-0.5 * (k as f64 / sigma).powi(2)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    let n = x.len() as isize;
    let reflect = |i: isize| -> usize {
        let mut j = i;
        // Repeated reflection handles kernels longer than the signal.
        loop {
            if j < 0 {
                j = -j - 1;
            } else if j >= n {
                j = 2 * n - j - 1;
            } else {
                return j as usize;
            }
        }
    };
    (0..n)
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * x[reflect(i + k as isize - half)])
                .sum::<f64>()
                / norm
        })
        .collect()
}

/// Behavioral lock-in amplifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontEndSpec {
    /// Excitation (and reference) frequency, Hz.
    pub excitation_frequency: f64,
    /// Cutoff of the second-order Butterworth output filter, Hz.
    pub lowpass_cutoff: f64,
    pub gain: f64,
    /// Output sample period after decimation; `None` keeps the input rate.
    pub decimate_to: Option<f64>,
}

impl Default for FrontEndSpec {
    fn default() -> Self {
        Self {
            excitation_frequency: 500e3,
            lowpass_cutoff: 2e3,
            gain: 1.0,
            decimate_to: Some(DEFAULT_SAMPLE_PERIOD),
        }
    }
}

/// Second-order low-pass section (bilinear Butterworth).
#[derive(Debug, Clone, Copy)]
pub struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    pub fn butterworth_lowpass(cutoff: f64, sample_rate: f64) -> Self {
        let w0 = 2.0 * std::f64::consts::PI * cutoff / sample_rate;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * std::f64::consts::FRAC_1_SQRT_2);
        let a0 = 1.0 + alpha;
        let b1 = (1.0 - cos) / a0;
        Self {
            b: [b1 / 2.0, b1, b1 / 2.0],
            a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
        }
    }

    pub fn filter(&self, input: impl IntoIterator<Item = f64>) -> Vec<f64> {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        input
            .into_iter()
            .map(|x0| {
                let y0 = self.b[0] * x0 + self.b[1] * x1 + self.b[2] * x2
                    - self.a[0] * y1
                    - self.a[1] * y2;
                x2 = x1;
                x1 = x0;
                y2 = y1;
                y1 = y0;
                y0
            })
            .collect()
    }
}

/// Recovers the resistance-change envelope from a carrier-excited
/// measurement: the envelope modulates `cos(2π f0 t)`, is mixed with a
/// synchronous `cos(2π f0 t)` reference and low-pass filtered. The output
/// settles at `gain * envelope / 2`.
pub fn lockin_frontend(envelope: &SourceTrace, spec: &FrontEndSpec) -> Result<SourceTrace> {
    let fs = envelope.sample_rate();
    let f0 = spec.excitation_frequency;
    if !(f0 > 0.0) {
        return Err(Error::config("excitation frequency must be positive"));
    }
    if fs < 4.0 * f0 * (1.0 - 1e-12) {
        return Err(Error::precondition(format!(
            "sample rate {fs} Hz is below 4 x excitation ({f0} Hz)"
        )));
    }
    if !(spec.lowpass_cutoff > 0.0 && spec.lowpass_cutoff < f0) {
        return Err(Error::config("lowpass cutoff must lie in (0, f0)"));
    }
    let lpf = Biquad::butterworth_lowpass(spec.lowpass_cutoff, fs);
    let w = 2.0 * std::f64::consts::PI * f0 / fs;
    let mixed = envelope.samples().iter().enumerate().map(|(n, &e)| {
        let c = (w * n as f64).cos();
        // excitation then synchronous reference
        e * c * c
    });
    let filtered: Vec<f64> = lpf
        .filter(mixed)
        .into_iter()
        .map(|v| spec.gain * v)
        .collect();
    let out = envelope.with_samples(filtered);
    match spec.decimate_to {
        Some(period) => {
            let factor = (period / envelope.sample_period()).round().max(1.0) as usize;
            out.decimate(factor)
        }
        None => Ok(out),
    }
}

/// Affine map of `[in_lo, in_hi]` onto `[out_lo, out_hi]`; inputs outside
/// the domain saturate.
pub fn rescale(
    trace: &SourceTrace,
    in_lo: f64,
    in_hi: f64,
    out_lo: f64,
    out_hi: f64,
) -> Result<SourceTrace> {
    let map = LinearMap::new(in_lo, in_hi, out_lo, out_hi)?;
    Ok(trace.with_samples(trace.samples().iter().map(|&v| map.apply(v)).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearMap {
    in_lo: f64,
    in_hi: f64,
    out_lo: f64,
    out_hi: f64,
}

impl LinearMap {
    pub fn new(in_lo: f64, in_hi: f64, out_lo: f64, out_hi: f64) -> Result<Self> {
        if !(in_hi > in_lo) || !in_lo.is_finite() || !in_hi.is_finite() {
            return Err(Error::config(format!(
                "degenerate input range [{in_lo}, {in_hi}]"
            )));
        }
        if !(out_hi > out_lo) || !out_lo.is_finite() || !out_hi.is_finite() {
            return Err(Error::config(format!(
                "degenerate output range [{out_lo}, {out_hi}]"
            )));
        }
        Ok(Self {
            in_lo,
            in_hi,
            out_lo,
            out_hi,
        })
    }

    pub fn apply(&self, v: f64) -> f64 {
        let c = v.clamp(self.in_lo, self.in_hi);
        self.out_lo + (c - self.in_lo) * (self.out_hi - self.out_lo) / (self.in_hi - self.in_lo)
    }

    pub fn inverse(&self) -> Self {
        Self {
            in_lo: self.out_lo,
            in_hi: self.out_hi,
            out_lo: self.in_lo,
            out_hi: self.in_hi,
        }
    }
}
