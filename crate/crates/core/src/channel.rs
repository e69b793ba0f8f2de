//! Propagation models applied to baseband blocks: AWGN, flat Rayleigh block
//! fading, and tapped-delay-line multipath with Jakes Doppler.
//!
//! CSNR is the ratio of channel-gain-weighted signal power to noise
//! variance. All fading models here have unit mean power gain, so the noise
//! variance is `P_sig / 10^(csnr_db / 10)` for every family.

use std::fmt;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::modem::{BasebandBlock, ModemConfig};

/// Channel SNR in dB. `+inf` disables noise.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Csnr(pub f64);

impl Csnr {
    pub const NOISELESS: Csnr = Csnr(f64::INFINITY);

    pub fn is_noiseless(self) -> bool {
        self.0 == f64::INFINITY
    }

    /// Noise variance for a given signal power.
    pub fn noise_variance(self, signal_power: f64) -> f64 {
        if self.is_noiseless() {
            0.0
        } else {
            signal_power / 10f64.powf(self.0 / 10.0)
        }
    }
}

impl fmt::Display for Csnr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_noiseless() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl std::str::FromStr for Csnr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "+inf" | "Inf" | "infinity" => Ok(Csnr::NOISELESS),
            other => {
                let v: f64 = other
                    .parse()
                    .map_err(|_| Error::config(format!("bad CSNR `{other}`")))?;
                if v.is_nan() || v == f64::NEG_INFINITY {
                    return Err(Error::config(format!("bad CSNR `{other}`")));
                }
                Ok(Csnr(v))
            }
        }
    }
}

impl Serialize for Csnr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_noiseless() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Csnr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(Csnr(v)),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelFamily {
    #[serde(rename = "awgn")]
    Awgn,
    #[serde(rename = "flat", alias = "flat_rayleigh")]
    FlatRayleigh,
    #[serde(rename = "jtc-indoor", alias = "jtc_indoor_a")]
    JtcIndoorA,
    #[serde(rename = "jtc-outdoor", alias = "jtc_outdoor_low_a")]
    JtcOutdoorLowA,
}

impl ChannelFamily {
    pub fn name(self) -> &'static str {
        match self {
            ChannelFamily::Awgn => "awgn",
            ChannelFamily::FlatRayleigh => "flat",
            ChannelFamily::JtcIndoorA => "jtc-indoor",
            ChannelFamily::JtcOutdoorLowA => "jtc-outdoor",
        }
    }

    pub fn is_multipath(self) -> bool {
        matches!(
            self,
            ChannelFamily::JtcIndoorA | ChannelFamily::JtcOutdoorLowA
        )
    }

    pub fn default_doppler(self) -> f64 {
        match self {
            ChannelFamily::JtcIndoorA => 5.0,
            ChannelFamily::JtcOutdoorLowA => 20.0,
            _ => 0.0,
        }
    }

    pub fn builtin_profile(self) -> Option<TapProfile> {
        let (name, text) = match self {
            ChannelFamily::JtcIndoorA => (
                "jtc-indoor-residential-a",
                include_str!("../profiles/jtc_indoor_residential_a.csv"),
            ),
            ChannelFamily::JtcOutdoorLowA => (
                "jtc-outdoor-residential-low-a",
                include_str!("../profiles/jtc_outdoor_residential_low_a.csv"),
            ),
            _ => return None,
        };
        Some(TapProfile::parse(name, text).expect("built-in profile parses"))
    }
}

impl std::str::FromStr for ChannelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "awgn" => Ok(ChannelFamily::Awgn),
            "flat" | "flat_rayleigh" => Ok(ChannelFamily::FlatRayleigh),
            "jtc-indoor" | "jtc_indoor_a" => Ok(ChannelFamily::JtcIndoorA),
            "jtc-outdoor" | "jtc_outdoor_low_a" => Ok(ChannelFamily::JtcOutdoorLowA),
            other => Err(Error::config(format!("unknown channel `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    pub delay: f64,
    /// Linear power, normalized so a profile sums to 1.
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TapProfile {
    pub name: String,
    pub taps: Vec<Tap>,
}

impl TapProfile {
    /// Parses `delay_seconds,power_db` lines; `#` starts a comment.
    pub fn parse(name: &str, text: &str) -> Result<Self> {
        let origin = PathBuf::from(name);
        let err = |line: usize, message: String| Error::Parse {
            path: origin.clone(),
            message: format!("line {line}: {message}"),
        };
        let mut raw = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (d, p) = line
                .split_once(',')
                .ok_or_else(|| err(idx + 1, "expected `delay_seconds,power_db`".into()))?;
            let delay: f64 = d
                .trim()
                .parse()
                .map_err(|e| err(idx + 1, format!("bad delay: {e}")))?;
            let power_db: f64 = p
                .trim()
                .parse()
                .map_err(|e| err(idx + 1, format!("bad power: {e}")))?;
            if !delay.is_finite() || power_db.is_nan() || power_db == f64::INFINITY {
                return Err(err(idx + 1, "values must be finite".into()));
            }
            raw.push((delay, power_db));
        }
        if raw.is_empty() {
            return Err(err(0, "profile has no taps".into()));
        }
        if raw[0].0 != 0.0 {
            return Err(err(0, "first tap delay must be 0".into()));
        }
        if raw.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(err(0, "tap delays must be strictly increasing".into()));
        }
        let linear: Vec<f64> = raw.iter().map(|&(_, db)| 10f64.powf(db / 10.0)).collect();
        let total: f64 = linear.iter().sum();
        if !(total > 0.0) {
            return Err(err(0, "all taps have zero power".into()));
        }
        Ok(Self {
            name: name.to_string(),
            taps: raw
                .iter()
                .zip(&linear)
                .map(|(&(delay, _), &p)| Tap {
                    delay,
                    power: p / total,
                })
                .collect(),
        })
    }

    pub fn single() -> Self {
        Self {
            name: "single".into(),
            taps: vec![Tap {
                delay: 0.0,
                power: 1.0,
            }],
        }
    }
}

pub fn load_profile(path: impl AsRef<Path>) -> Result<TapProfile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    TapProfile::parse(&path.display().to_string(), &text)
}

/// Propagation model and noise level of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub family: ChannelFamily,
    pub csnr_db: Csnr,
    /// Defaults per family: 0 for AWGN and flat, 5 Hz indoor, 20 Hz outdoor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doppler_hz: Option<f64>,
    /// Tap profile file; multipath families fall back to the built-in one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile_path: Option<PathBuf>,
}

impl ChannelSpec {
    pub fn new(family: ChannelFamily, csnr_db: Csnr) -> Self {
        Self {
            family,
            csnr_db,
            doppler_hz: None,
            profile_path: None,
        }
    }

    pub fn doppler(&self) -> f64 {
        self.doppler_hz
            .unwrap_or_else(|| self.family.default_doppler())
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.doppler();
        if !(d >= 0.0 && d.is_finite()) {
            return Err(Error::config("doppler_hz must be >= 0"));
        }
        if !self.family.is_multipath() && d != 0.0 {
            return Err(Error::config(format!(
                "{} channel has no Doppler; got {d} Hz",
                self.family.name()
            )));
        }
        if self.csnr_db.0.is_nan() {
            return Err(Error::config("csnr_db is NaN"));
        }
        Ok(())
    }

    pub fn resolve_profile(&self) -> Result<Option<TapProfile>> {
        if !self.family.is_multipath() {
            return Ok(None);
        }
        match &self.profile_path {
            Some(p) => load_profile(p).map(Some),
            None => Ok(self.family.builtin_profile()),
        }
    }
}

/// Circularly symmetric complex Gaussian noise.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    sigma_per_dim: f64,
    rng: ChaCha8Rng,
}

impl NoiseSource {
    pub fn new(variance: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        Self {
            sigma_per_dim: (variance / 2.0).sqrt(),
            rng,
        }
    }

    pub fn add(&mut self, samples: &mut [Complex64]) {
        if self.sigma_per_dim == 0.0 {
            return;
        }
        for s in samples {
            let re: f64 = StandardNormal.sample(&mut self.rng);
            let im: f64 = StandardNormal.sample(&mut self.rng);
            *s += Complex64::new(re, im) * self.sigma_per_dim;
        }
    }
}

fn complex_gaussian<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Oscillators per fading tap.
pub const JAKES_OSCILLATORS: usize = 64;

/// Rayleigh fading process with a Jakes (Clarke) Doppler spectrum, realized
/// as a Gaussian-weighted sum of sinusoids with stratified arrival angles.
#[derive(Debug, Clone)]
pub struct JakesProcess {
    /// Doppler shift of each oscillator, rad/s.
    omega: Vec<f64>,
    weight: Vec<Complex64>,
}

impl JakesProcess {
    pub fn new<R: Rng>(doppler_hz: f64, rng: &mut R) -> Self {
        let m = JAKES_OSCILLATORS;
        let theta: f64 = rng.random();
        let scale = 1.0 / (m as f64).sqrt();
        let mut omega = Vec::with_capacity(m);
        let mut weight = Vec::with_capacity(m);
        for n in 0..m {
            let alpha = std::f64::consts::TAU * (n as f64 + theta) / m as f64;
            omega.push(std::f64::consts::TAU * doppler_hz * alpha.cos());
            let phase: f64 = rng.random::<f64>() * std::f64::consts::TAU;
            weight.push(complex_gaussian(rng) * Complex64::from_polar(scale, phase));
        }
        Self { omega, weight }
    }

    pub fn gain_at(&self, t: f64) -> Complex64 {
        self.omega
            .iter()
            .zip(&self.weight)
            .map(|(&w, &a)| a * Complex64::from_polar(1.0, w * t))
            .sum()
    }
}

#[derive(Debug, Clone)]
struct FadingTap {
    delay_samples: usize,
    amplitude: f64,
    process: JakesProcess,
}

#[derive(Debug, Clone)]
enum Fading {
    None,
    /// One independent coefficient per block; `fixed` overrides the draw.
    Block {
        rng: Box<ChaCha8Rng>,
        fixed: Option<Complex64>,
    },
    Multipath {
        taps: Vec<FadingTap>,
        /// Last `max_delay` input samples of the previous block.
        history: Vec<Complex64>,
        update_every: usize,
    },
}

/// Streaming channel: feed blocks in order, each is transformed in place.
#[derive(Debug, Clone)]
pub struct ChannelSim {
    family: ChannelFamily,
    fading: Fading,
    noise: NoiseSource,
    sample_rate: f64,
    /// Global index of the next input sample.
    cursor: u64,
    scratch: Vec<Complex64>,
    last_gain: Option<Complex64>,
}

impl ChannelSim {
    /// `signal_power` is the mean `|x|^2` of the transmitted samples (1 for
    /// the unit-modulus modulator).
    pub fn new(
        spec: &ChannelSpec,
        profile: Option<&TapProfile>,
        modem: &ModemConfig,
        signal_power: f64,
        seed: u64,
    ) -> Result<Self> {
        spec.validate()?;
        let fs = modem.sample_rate;
        let mut fading_rng = ChaCha8Rng::seed_from_u64(seed);
        fading_rng.set_stream(2);
        let fading = match spec.family {
            ChannelFamily::Awgn => Fading::None,
            ChannelFamily::FlatRayleigh => Fading::Block {
                rng: Box::new(fading_rng),
                fixed: None,
            },
            ChannelFamily::JtcIndoorA | ChannelFamily::JtcOutdoorLowA => {
                let profile = profile.ok_or_else(|| {
                    Error::config(format!(
                        "{} channel needs a tap profile",
                        spec.family.name()
                    ))
                })?;
                let block = modem.block_duration();
                if let Some(t) = profile.taps.iter().find(|t| t.delay >= block / 4.0) {
                    return Err(Error::precondition(format!(
                        "tap delay {} s exceeds a quarter block ({} s)",
                        t.delay,
                        block / 4.0
                    )));
                }
                let doppler = spec.doppler();
                let taps: Vec<FadingTap> = profile
                    .taps
                    .iter()
                    .map(|t| FadingTap {
                        delay_samples: (t.delay * fs).round() as usize,
                        amplitude: t.power.sqrt(),
                        process: JakesProcess::new(doppler, &mut fading_rng),
                    })
                    .collect();
                let max_delay = taps.iter().map(|t| t.delay_samples).max().unwrap_or(0);
                let update_every = if doppler > 0.0 {
                    ((fs / (doppler * 100.0)).floor() as usize).clamp(1, 512)
                } else {
                    modem.fft_size.max(1)
                };
                Fading::Multipath {
                    taps,
                    history: vec![Complex64::new(0.0, 0.0); max_delay],
                    update_every,
                }
            }
        };
        Ok(Self {
            family: spec.family,
            fading,
            noise: NoiseSource::new(spec.csnr_db.noise_variance(signal_power), seed),
            sample_rate: fs,
            cursor: 0,
            scratch: Vec::new(),
            last_gain: None,
        })
    }

    pub fn family(&self) -> ChannelFamily {
        self.family
    }

    /// Test hook: pin the flat-fading coefficient.
    pub fn force_flat_gain(&mut self, h: Complex64) {
        if let Fading::Block { fixed, .. } = &mut self.fading {
            *fixed = Some(h);
        }
    }

    /// Coefficient applied to the most recent block (flat fading only).
    pub fn last_flat_gain(&self) -> Option<Complex64> {
        self.last_gain
    }

    /// Complex gains of each multipath tap at absolute time `t`, paired
    /// with their integer sample delays.
    pub fn tap_gains_at(&self, t: f64) -> Vec<(usize, Complex64)> {
        match &self.fading {
            Fading::Multipath { taps, .. } => taps
                .iter()
                .map(|tap| (tap.delay_samples, tap.process.gain_at(t) * tap.amplitude))
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Magnitude of the multipath frequency response at time `t`.
    pub fn frequency_response(&self, t: f64, freqs: &[f64]) -> Vec<f64> {
        let gains = self.tap_gains_at(t);
        freqs
            .iter()
            .map(|&f| {
                gains
                    .iter()
                    .map(|&(d, g)| {
                        g * Complex64::from_polar(
                            1.0,
                            -std::f64::consts::TAU * f * d as f64 / self.sample_rate,
                        )
                    })
                    .sum::<Complex64>()
                    .norm()
            })
            .collect()
    }

    pub fn process(&mut self, block: &mut [Complex64]) {
        let n = block.len();
        let t0 = self.cursor as f64 / self.sample_rate;
        match &mut self.fading {
            Fading::None => {}
            Fading::Block { rng, fixed } => {
                let h = fixed.unwrap_or_else(|| complex_gaussian(rng));
                self.last_gain = Some(h);
                for s in block.iter_mut() {
                    *s *= h;
                }
            }
            Fading::Multipath {
                taps,
                history,
                update_every,
            } => {
                let max_delay = history.len();
                self.scratch.clear();
                self.scratch.extend_from_slice(history);
                self.scratch.extend_from_slice(block);
                let fs = self.sample_rate;
                let step = *update_every;
                let mut start = 0;
                while start < n {
                    let end = (start + step).min(n);
                    let span = (end - start) as f64;
                    let ga: Vec<Complex64> = taps
                        .iter()
                        .map(|t| t.process.gain_at(t0 + start as f64 / fs) * t.amplitude)
                        .collect();
                    let gb: Vec<Complex64> = taps
                        .iter()
                        .map(|t| t.process.gain_at(t0 + end as f64 / fs) * t.amplitude)
                        .collect();
                    for (i, out) in block.iter_mut().enumerate().take(end).skip(start) {
                        let w = (i - start) as f64 / span;
                        let mut acc = Complex64::new(0.0, 0.0);
                        for (k, tap) in taps.iter().enumerate() {
                            let g = ga[k] + (gb[k] - ga[k]) * w;
                            acc += g * self.scratch[max_delay + i - tap.delay_samples];
                        }
                        *out = acc;
                    }
                    start = end;
                }
                let tail = self.scratch.len() - max_delay;
                history.copy_from_slice(&self.scratch[tail..]);
            }
        }
        self.noise.add(block);
        self.cursor += n as u64;
    }
}

fn mean_power(blocks: &[BasebandBlock]) -> f64 {
    let (sum, count) = blocks.iter().fold((0.0, 0usize), |(s, c), b| {
        (
            s + b.samples.iter().map(|z| z.norm_sqr()).sum::<f64>(),
            c + b.samples.len(),
        )
    });
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

fn apply_family(
    blocks: &[BasebandBlock],
    spec: &ChannelSpec,
    profile: Option<&TapProfile>,
    seed: u64,
) -> Result<Vec<BasebandBlock>> {
    let first = blocks
        .first()
        .ok_or_else(|| Error::precondition("no blocks to transmit"))?;
    // Only the sample rate matters for timing; use one block as the FFT size.
    let modem = ModemConfig {
        f_min: 0.0,
        f_max: 0.4,
        sample_rate: 1.0,
        fft_size: first.samples.len(),
        interpolate: false,
    };
    let mut sim = ChannelSim::new(spec, profile, &modem, mean_power(blocks), seed)?;
    Ok(blocks
        .iter()
        .map(|b| {
            let mut out = b.clone();
            sim.process(&mut out.samples);
            out
        })
        .collect())
}

/// AWGN at `csnr_db`, signal power measured from the input.
pub fn apply_awgn(
    blocks: &[BasebandBlock],
    csnr_db: Csnr,
    seed: u64,
) -> Result<Vec<BasebandBlock>> {
    apply_family(
        blocks,
        &ChannelSpec::new(ChannelFamily::Awgn, csnr_db),
        None,
        seed,
    )
}

/// Independent Rayleigh coefficient per block, then AWGN.
pub fn apply_flat_rayleigh(
    blocks: &[BasebandBlock],
    csnr_db: Csnr,
    seed: u64,
) -> Result<Vec<BasebandBlock>> {
    apply_family(
        blocks,
        &ChannelSpec::new(ChannelFamily::FlatRayleigh, csnr_db),
        None,
        seed,
    )
}

/// Tapped-delay-line fading per `spec`. Block timing assumes the modem's
/// sample rate, so `sample_rate` must be supplied.
pub fn apply_multipath(
    blocks: &[BasebandBlock],
    spec: &ChannelSpec,
    profile: Option<&TapProfile>,
    sample_rate: f64,
    seed: u64,
) -> Result<Vec<BasebandBlock>> {
    let first = blocks
        .first()
        .ok_or_else(|| Error::precondition("no blocks to transmit"))?;
    let modem = ModemConfig {
        f_min: 0.0,
        f_max: 0.4 * sample_rate,
        sample_rate,
        fft_size: first.samples.len(),
        interpolate: false,
    };
    let mut sim = ChannelSim::new(spec, profile, &modem, mean_power(blocks), seed)?;
    Ok(blocks
        .iter()
        .map(|b| {
            let mut out = b.clone();
            sim.process(&mut out.samples);
            out
        })
        .collect())
}
