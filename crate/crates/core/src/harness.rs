//! Run configuration and the end-to-end link pipeline:
//! generate, rescale, encode, modulate, channel, demodulate, decode, filter,
//! and score.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, KsResult, MsePair, PulseEvent};
use crate::channel::{ChannelFamily, ChannelSim, ChannelSpec, Csnr};
use crate::codec::{self, AjsccParams, EncodedSample};
use crate::error::{Error, Result, StageExt};
use crate::modem::{FftDetector, ModemConfig, Modulator, Profile};
use crate::source::{self, CytometrySynthSpec, GsrSynthSpec};
use crate::trace::SourceTrace;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Declared in every report: the simulator never sees the recorded sensor
/// data, only synthetic stand-ins.
pub const SYNTHETIC_SOURCE_NOTE: &str =
    "synthetic sources: Poisson-scheduled Gaussian pulse train for cytometry, \
smoothed random walk with exponential events for GSR; recorded sensor data is not used";

/// Where one source signal comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SourceSpec {
    Cytometry(CytometrySynthSpec),
    Gsr(GsrSynthSpec),
    /// Independent uniform samples on `[lo, hi]`.
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// `t_seconds,value` trace file.
    Csv {
        path: PathBuf,
    },
}

impl SourceSpec {
    fn generate(&self, duration: f64, sample_period: f64, seed: u64) -> Result<SourceTrace> {
        match self {
            SourceSpec::Cytometry(spec) => {
                source::gen_cytometry(spec, duration, sample_period, seed)
            }
            SourceSpec::Gsr(spec) => source::gen_gsr(spec, duration, sample_period, seed),
            SourceSpec::Uniform { lo, hi } => {
                let n = ((duration / sample_period).round() as usize).max(1);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let samples = (0..n).map(|_| rng.random_range(*lo..=*hi)).collect();
                SourceTrace::new(sample_period, samples, "V")
            }
            SourceSpec::Csv { path } => SourceTrace::read_csv(path, Some(sample_period)),
        }
    }

    /// Input range mapped onto the encoder's full scale when the config
    /// gives none: physical zero to the observed peak for pulse trains, the
    /// observed span otherwise.
    fn default_range(&self, trace: &SourceTrace) -> (f64, f64) {
        let (lo, hi) = match self {
            SourceSpec::Cytometry(_) => (0.0_f64.min(trace.min()), trace.max()),
            SourceSpec::Uniform { lo, hi } => (*lo, *hi),
            SourceSpec::Gsr(_) | SourceSpec::Csv { .. } => (trace.min(), trace.max()),
        };
        if hi > lo {
            (lo, hi)
        } else {
            (lo, lo + 1.0)
        }
    }
}

/// Encoder variant.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Design {
    #[default]
    Ideal,
    /// Stacked-stage encoder with per-stage bias; the receiver still
    /// decodes with the ideal inverse.
    Design1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSettings {
    /// Cytometry threshold, volts. Defaults to the peak-detection height.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x1_threshold: Option<f64>,
    /// GSR median filter order; `null` disables the filter.
    #[serde(default = "default_median_order")]
    pub x2_median_order: Option<usize>,
    /// Defaults to the source median plus six robust noise deviations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_min_height: Option<f64>,
    /// Seconds. Defaults to twice the cytometry pulse width.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_min_separation: Option<f64>,
    #[serde(default = "default_alpha")]
    pub ks_alpha: f64,
}

fn default_median_order() -> Option<usize> {
    Some(200)
}

fn default_alpha() -> f64 {
    0.05
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self {
            x1_threshold: None,
            x2_median_order: default_median_order(),
            peak_min_height: None,
            peak_min_separation: None,
            ks_alpha: default_alpha(),
        }
    }
}

fn default_duration() -> f64 {
    10.0
}

fn default_sample_period() -> f64 {
    source::DEFAULT_SAMPLE_PERIOD
}

fn default_true() -> bool {
    true
}

/// Everything that determines one link simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Cytometry-like source, encoded along the lines.
    pub x1: SourceSpec,
    /// GSR-like source, selects the line.
    pub x2: SourceSpec,
    /// Source values mapped to `[0, x1_max]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x1_range: Option<[f64; 2]>,
    /// Source values mapped to `[0, x2_max]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x2_range: Option<[f64; 2]>,
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default = "default_sample_period")]
    pub sample_period: f64,
    pub codec: AjsccParams,
    #[serde(default)]
    pub design: Design,
    pub profile: Profile,
    #[serde(default = "default_true")]
    pub interpolate: bool,
    pub channel: ChannelSpec,
    #[serde(default)]
    pub analysis: AnalysisSettings,
    pub seed: u64,
}

impl RunConfig {
    /// Synthetic cytometry and GSR over the link-default codec ranges.
    pub fn link_default(
        levels: u32,
        profile: Profile,
        channel: ChannelSpec,
        seed: u64,
    ) -> Result<Self> {
        Ok(Self {
            x1: SourceSpec::Cytometry(CytometrySynthSpec::default()),
            x2: SourceSpec::Gsr(GsrSynthSpec::default()),
            x1_range: None,
            x2_range: None,
            duration: default_duration(),
            sample_period: default_sample_period(),
            codec: AjsccParams::link_default(levels)?,
            design: Design::Ideal,
            profile,
            interpolate: true,
            channel,
            analysis: AnalysisSettings::default(),
            seed,
        })
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Reads a config file; relative source and profile paths are taken
    /// relative to the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text, path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for s in [&mut cfg.x1, &mut cfg.x2] {
            if let SourceSpec::Csv { path } = s {
                rebase(path);
            }
        }
        if let Some(p) = cfg.channel.profile_path.as_mut() {
            rebase(p);
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn modem(&self) -> ModemConfig {
        ModemConfig {
            interpolate: self.interpolate,
            ..self.profile.config()
        }
    }

    /// Source samples per emitted (decoded) sample.
    pub fn decimation(&self) -> Result<usize> {
        let ratio = self.modem().block_duration() / self.sample_period;
        let k = ratio.round();
        if k < 1.0 || (ratio - k).abs() > 1e-6 * k {
            return Err(Error::config(format!(
                "block duration {} s is not a whole multiple of the source period {} s",
                self.modem().block_duration(),
                self.sample_period
            )));
        }
        Ok(k as usize)
    }

    pub fn validate(&self) -> Result<()> {
        self.codec.validate()?;
        self.channel.validate()?;
        self.modem().validate()?;
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::config("duration must be positive"));
        }
        if !(self.sample_period > 0.0 && self.sample_period.is_finite()) {
            return Err(Error::config("sample_period must be positive"));
        }
        self.decimation()?;
        if self.design == Design::Design1 && self.codec.levels != codec::DESIGN1_LEVELS {
            return Err(Error::config(format!(
                "design1 has {} levels, codec asks for {}",
                codec::DESIGN1_LEVELS,
                self.codec.levels
            )));
        }
        for (name, s) in [("x1", &self.x1), ("x2", &self.x2)] {
            match s {
                SourceSpec::Csv { path } if !path.is_file() => {
                    return Err(Error::config(format!(
                        "{name} trace file {} not found",
                        path.display()
                    )));
                }
                SourceSpec::Uniform { lo, hi }
                    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() =>
                {
                    return Err(Error::config(format!(
                        "{name} uniform range [{lo}, {hi}] is empty"
                    )));
                }
                SourceSpec::Cytometry(c) => c.validate()?,
                SourceSpec::Gsr(g) => g.validate()?,
                _ => {}
            }
        }
        for (name, r) in [("x1_range", self.x1_range), ("x2_range", self.x2_range)] {
            if let Some([lo, hi]) = r {
                if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::config(format!("{name} [{lo}, {hi}] is empty")));
                }
            }
        }
        if let Some(p) = &self.channel.profile_path {
            if !p.is_file() {
                return Err(Error::config(format!(
                    "tap profile {} not found",
                    p.display()
                )));
            }
        }
        if let Some(order) = self.analysis.x2_median_order {
            if order < 2 || !order.is_multiple_of(2) {
                return Err(Error::config(format!(
                    "x2_median_order must be even and >= 2, got {order}"
                )));
            }
        }
        if !(self.analysis.ks_alpha > 0.0 && self.analysis.ks_alpha < 1.0) {
            return Err(Error::config("ks_alpha must lie in (0, 1)"));
        }
        Ok(())
    }

    fn source_seed(&self, tag: u64) -> u64 {
        splitmix64(splitmix64(self.seed) ^ tag)
    }

    /// Seed for the channel of this run; mixes in the level count and the
    /// channel family so sweep points draw independent noise.
    pub fn channel_seed(&self) -> u64 {
        derive_seed(self.seed, self.codec.levels, self.channel.family)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, levels: u32, family: ChannelFamily) -> u64 {
    let tag = family
        .name()
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325_u64, |h, b| {
            (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
        });
    splitmix64(splitmix64(splitmix64(master) ^ levels as u64) ^ tag)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub source_note: String,
    pub config: RunConfig,
    pub channel_seed: u64,
    /// Period of the decoded streams (one FFT block).
    pub emitted_sample_period: f64,
    pub samples: usize,
    /// Raw decoder output against the rescaled sources, before filtering.
    pub mse: MsePair,
    pub x1_threshold: f64,
    pub peak_min_height: f64,
    pub peak_min_separation: f64,
    pub source_peaks: Vec<PulseEvent>,
    pub receiver_peaks: Vec<PulseEvent>,
    /// Absent when either side has fewer than five peaks.
    pub ks: Option<KsResult>,
    pub wall_time_s: f64,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// A run's report plus the signals behind it, all in encoder-domain volts
/// at the emitted sample rate.
#[derive(Debug, Clone)]
pub struct LinkOutput {
    pub report: RunReport,
    pub reference_x1: SourceTrace,
    pub reference_x2: SourceTrace,
    pub decoded_x1: SourceTrace,
    pub decoded_x2: SourceTrace,
    pub filtered_x1: SourceTrace,
    pub filtered_x2: SourceTrace,
}

impl LinkOutput {
    /// `t_seconds,x1_ref,x2_ref,x1_hat,x2_hat,x1_filtered,x2_filtered`
    pub fn signals_csv(&self) -> String {
        let mut out =
            String::from("t_seconds,x1_ref,x2_ref,x1_hat,x2_hat,x1_filtered,x2_filtered\n");
        let dt = self.reference_x1.sample_period();
        for i in 0..self.reference_x1.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                i as f64 * dt,
                self.reference_x1.samples()[i],
                self.reference_x2.samples()[i],
                self.decoded_x1.samples()[i],
                self.decoded_x2.samples()[i],
                self.filtered_x1.samples()[i],
                self.filtered_x2.samples()[i],
            );
        }
        out
    }

    /// Writes `report.json`, `signals.csv`, `source_peaks.csv` and
    /// `receiver_peaks.csv` into `dir`.
    pub fn write_artifacts(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = [
            ("report.json", self.report.to_json()),
            ("signals.csv", self.signals_csv()),
            (
                "source_peaks.csv",
                analysis::peaks_csv(&self.report.source_peaks),
            ),
            (
                "receiver_peaks.csv",
                analysis::peaks_csv(&self.report.receiver_peaks),
            ),
        ];
        files
            .into_iter()
            .map(|(name, body)| write_file(&dir.join(name), &body))
            .collect()
    }
}

pub(crate) fn write_file(path: &Path, body: &str) -> Result<PathBuf> {
    std::fs::write(path, body).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

fn to_encoder_range(
    trace: &SourceTrace,
    range: Option<[f64; 2]>,
    spec: &SourceSpec,
    full: f64,
) -> Result<SourceTrace> {
    let (lo, hi) = match range {
        Some([lo, hi]) => (lo, hi),
        None => spec.default_range(trace),
    };
    source::rescale(trace, lo, hi, 0.0, full)
}

/// Detection height for pulse peaks: median plus six robust noise
/// deviations of the reference, or 5% of the pulse excursion when the
/// reference is noise-free.
fn auto_min_height(reference: &[f64]) -> f64 {
    let med = analysis::median(reference);
    let sd = analysis::robust_noise_sd(reference);
    let top = reference.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    med + (6.0 * sd).max(0.05 * (top - med))
}

/// Runs one link simulation and keeps the intermediate signals.
pub fn run_link_detailed(cfg: &RunConfig) -> Result<LinkOutput> {
    let started = Instant::now();
    cfg.validate()?;
    let p = &cfg.codec;
    let modem = cfg.modem();
    let factor = cfg.decimation()?;

    let raw_x1 = cfg
        .x1
        .generate(cfg.duration, cfg.sample_period, cfg.source_seed(1))
        .stage("generate x1")?;
    let raw_x2 = cfg
        .x2
        .generate(cfg.duration, cfg.sample_period, cfg.source_seed(2))
        .stage("generate x2")?;
    if (raw_x1.sample_period() - raw_x2.sample_period()).abs() > 1e-12 * raw_x1.sample_period() {
        return Err(Error::config(
            "x1 and x2 traces have different sample periods",
        ))
        .stage("generate");
    }

    let x1 = to_encoder_range(&raw_x1, cfg.x1_range, &cfg.x1, p.x1_max).stage("rescale x1")?;
    let x2 = to_encoder_range(&raw_x2, cfg.x2_range, &cfg.x2, p.x2_max).stage("rescale x2")?;
    let x1 = x1.decimate(factor).stage("rescale x1")?;
    let x2 = x2.decimate(factor).stage("rescale x2")?;
    let n = x1.len().min(x2.len());
    let ref_x1 = x1.with_samples(x1.samples()[..n].to_vec());
    let ref_x2 = x2.with_samples(x2.samples()[..n].to_vec());

    let encoded: Vec<EncodedSample> = ref_x1
        .samples()
        .iter()
        .zip(ref_x2.samples())
        .map(|(&a, &b)| match cfg.design {
            Design::Ideal => codec::encode(a, b, p),
            Design::Design1 => codec::encode_design1(a, b, p),
        })
        .collect::<Result<_>>()
        .stage("encode")?;

    let full_scale = match cfg.design {
        Design::Ideal => p.full_scale(),
        Design::Design1 => p.full_scale() + (p.levels - 1) as f64 * p.design1_bias.max(0.0),
    };
    let mut modulator = Modulator::new(&modem, full_scale).stage("modulate")?;
    let mut detector = FftDetector::new(&modem, full_scale).stage("demodulate")?;
    let profile = cfg.channel.resolve_profile().stage("channel")?;
    let channel_seed = cfg.channel_seed();
    let mut channel = ChannelSim::new(&cfg.channel, profile.as_ref(), &modem, 1.0, channel_seed)
        .stage("channel")?;

    let mut block = vec![Complex64::new(0.0, 0.0); modem.fft_size];
    let mut dec_x1 = Vec::with_capacity(n);
    let mut dec_x2 = Vec::with_capacity(n);
    for &s in &encoded {
        modulator.fill(s, &mut block);
        channel.process(&mut block);
        let r = detector.demodulate(&block).stage("demodulate")?;
        let (a, b) = codec::decode(r, p);
        dec_x1.push(a);
        dec_x2.push(b);
    }
    let decoded_x1 = ref_x1.with_samples(dec_x1);
    let decoded_x2 = ref_x2.with_samples(dec_x2);

    let min_height = cfg
        .analysis
        .peak_min_height
        .unwrap_or_else(|| auto_min_height(ref_x1.samples()));
    let threshold = cfg.analysis.x1_threshold.unwrap_or(min_height);
    let filtered_x1 = analysis::threshold_filter(&decoded_x1, threshold).stage("filter")?;
    let filtered_x2 = match cfg.analysis.x2_median_order {
        Some(order) => analysis::median_filter(&decoded_x2, order).stage("filter")?,
        None => decoded_x2.clone(),
    };

    let mse = MsePair::new(
        analysis::mse(ref_x1.samples(), decoded_x1.samples()).stage("metrics")?,
        analysis::mse(ref_x2.samples(), decoded_x2.samples()).stage("metrics")?,
    );
    let separation = cfg
        .analysis
        .peak_min_separation
        .unwrap_or(match &cfg.x1 {
            SourceSpec::Cytometry(c) => 2.0 * c.pulse_width,
            _ => 0.012,
        })
        .max(ref_x1.sample_period());
    let source_peaks = analysis::detect_peaks(&ref_x1, min_height, separation).stage("metrics")?;
    let receiver_peaks =
        analysis::detect_peaks(&filtered_x1, min_height, separation).stage("metrics")?;
    let ks = if source_peaks.len() >= 5 && receiver_peaks.len() >= 5 {
        let a: Vec<f64> = source_peaks.iter().map(|e| e.peak_value).collect();
        let b: Vec<f64> = receiver_peaks.iter().map(|e| e.peak_value).collect();
        Some(analysis::ks_two_sample(&a, &b, cfg.analysis.ks_alpha).stage("metrics")?)
    } else {
        None
    };

    let report = RunReport {
        version: VERSION.to_string(),
        source_note: SYNTHETIC_SOURCE_NOTE.to_string(),
        config: cfg.clone(),
        channel_seed,
        emitted_sample_period: ref_x1.sample_period(),
        samples: n,
        mse,
        x1_threshold: threshold,
        peak_min_height: min_height,
        peak_min_separation: separation,
        source_peaks,
        receiver_peaks,
        ks,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    Ok(LinkOutput {
        report,
        reference_x1: ref_x1,
        reference_x2: ref_x2,
        decoded_x1,
        decoded_x2,
        filtered_x1,
        filtered_x2,
    })
}

pub fn run_link(cfg: &RunConfig) -> Result<RunReport> {
    run_link_detailed(cfg).map(|o| o.report)
}

/// One run per level count, in the order given. The sources are the same
/// for every point; only the channel seed changes with `L`.
pub fn sweep_levels(cfg: &RunConfig, levels: &[u32]) -> Result<Vec<RunReport>> {
    if let Some(&l) = levels.iter().find(|&&l| l < 2) {
        return Err(Error::config(format!("level counts must be >= 2, got {l}")));
    }
    levels
        .iter()
        .map(|&l| {
            let mut c = cfg.clone();
            c.codec.levels = l;
            run_link(&c)
        })
        .collect()
}

/// `L,mse_x1,mse_x2,sum`
pub fn sweep_csv(reports: &[RunReport]) -> String {
    let mut out = String::from("L,mse_x1,mse_x2,sum\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.config.codec.levels, r.mse.mse_x1, r.mse.mse_x2, r.mse.sum
        );
    }
    out
}

/// Parses `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_levels(text: &str) -> Result<Vec<u32>> {
    let bad = || Error::config(format!("cannot parse level list `{text}`"));
    let text = text.trim();
    if text.contains(':') {
        let parts: Vec<u32> = text
            .split(':')
            .map(|s| s.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let (start, stop, step) = match parts[..] {
            [a, b] => (a, b, 1),
            [a, b, c] => (a, b, c),
            _ => return Err(bad()),
        };
        if step == 0 || stop < start {
            return Err(bad());
        }
        Ok((start..=stop).step_by(step as usize).collect())
    } else if text.is_empty() {
        Ok(Vec::new())
    } else {
        text.split(',')
            .map(|s| s.trim().parse().map_err(|_| bad()))
            .collect()
    }
}

/// Channel spec shorthand used by the experiments and the CLI.
pub fn channel(family: ChannelFamily, csnr_db: Csnr, doppler_hz: Option<f64>) -> ChannelSpec {
    ChannelSpec {
        doppler_hz,
        ..ChannelSpec::new(family, csnr_db)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noiseless(levels: u32) -> RunConfig {
        let mut c = RunConfig::link_default(
            levels,
            Profile::Fast,
            ChannelSpec::new(ChannelFamily::Awgn, Csnr::NOISELESS),
            7,
        )
        .unwrap();
        c.duration = 1.0;
        c
    }

    #[test]
    fn parse_level_lists() {
        assert_eq!(parse_levels("5:20:5").unwrap(), vec![5, 10, 15, 20]);
        assert_eq!(parse_levels("8,16, 32").unwrap(), vec![8, 16, 32]);
        assert_eq!(parse_levels("3:4").unwrap(), vec![3, 4]);
        assert!(parse_levels("").unwrap().is_empty());
        assert!(parse_levels("5:1:1").is_err());
        assert!(parse_levels("a,b").is_err());
        assert_eq!(parse_levels("5:100:5").unwrap().len(), 20);
    }

    #[test]
    fn seeds_differ_by_level_and_family() {
        let a = derive_seed(7, 30, ChannelFamily::Awgn);
        assert_ne!(a, derive_seed(7, 31, ChannelFamily::Awgn));
        assert_ne!(a, derive_seed(7, 30, ChannelFamily::FlatRayleigh));
        assert_ne!(a, derive_seed(8, 30, ChannelFamily::Awgn));
        assert_eq!(a, derive_seed(7, 30, ChannelFamily::Awgn));
    }

    #[test]
    fn config_json_round_trip() {
        let mut c = noiseless(16);
        c.channel = channel(ChannelFamily::JtcOutdoorLowA, Csnr(10.0), Some(20.0));
        c.x2_range = Some([0.1, 2.7]);
        let back = RunConfig::from_json(&c.to_json(), Path::new("mem")).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn minimal_json_fills_defaults() {
        let text = r#"{
            "x1": {"kind": "cytometry"},
            "x2": {"kind": "gsr", "conductance_max": 2.6},
            "codec": {"levels": 16, "x1_max": 2.25, "x2_max": 3.0},
            "profile": "fast",
            "channel": {"family": "awgn", "csnr_db": "inf"},
            "seed": 3
        }"#;
        let c = RunConfig::from_json(text, Path::new("mem")).unwrap();
        assert_eq!(c.duration, 10.0);
        assert!(c.interpolate);
        assert_eq!(c.analysis.x2_median_order, Some(200));
        assert!(c.channel.csnr_db.is_noiseless());
        c.validate().unwrap();
    }

    #[test]
    fn bad_json_is_a_config_error() {
        let e = RunConfig::from_json("{", Path::new("x.json")).unwrap_err();
        assert!(e.is_config());
    }

    #[test]
    fn validation_catches_bad_configs() {
        let mut c = noiseless(16);
        c.design = Design::Design1;
        assert!(c.validate().unwrap_err().is_config());

        let mut c = noiseless(16);
        c.x1 = SourceSpec::Csv {
            path: "/nonexistent/x1.csv".into(),
        };
        assert!(c.validate().unwrap_err().is_config());

        let mut c = noiseless(16);
        c.sample_period = 3e-4;
        assert!(c.validate().unwrap_err().is_config());

        let mut c = noiseless(16);
        c.analysis.x2_median_order = Some(7);
        assert!(c.validate().unwrap_err().is_config());
    }

    #[test]
    fn slow_profile_decimates_by_ten() {
        let mut c = noiseless(8);
        c.profile = Profile::Slow;
        assert_eq!(c.decimation().unwrap(), 10);
        assert_eq!(noiseless(8).decimation().unwrap(), 1);
    }

    #[test]
    fn noiseless_link_is_quantization_limited() {
        let out = run_link_detailed(&noiseless(16)).unwrap();
        let r = &out.report;
        assert_eq!(r.samples, 1000);
        assert!(r.mse.mse_x1 < 1e-12, "mse_x1 {}", r.mse.mse_x1);
        let delta = 3.0 / 16.0;
        assert!(r.mse.mse_x2 <= delta * delta / 4.0);
        // x1 at full scale is the code point shared with the next line.
        let x1_max = out.report.config.codec.x1_max;
        for i in 0..out.decoded_x2.len() {
            let err = (out.decoded_x2.samples()[i] - out.reference_x2.samples()[i]).abs();
            let bound = if out.reference_x1.samples()[i] > x1_max - 1e-6 {
                1.5 * delta
            } else {
                delta / 2.0
            };
            assert!(err <= bound + 1e-9, "sample {i}: error {err}");
        }
        assert_eq!(r.source_peaks.len(), r.receiver_peaks.len());
    }

    #[test]
    fn runs_are_deterministic() {
        let mut c = noiseless(12);
        c.channel = ChannelSpec::new(ChannelFamily::FlatRayleigh, Csnr(0.0));
        let mut a = run_link(&c).unwrap();
        let mut b = run_link(&c).unwrap();
        a.wall_time_s = 0.0;
        b.wall_time_s = 0.0;
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn stage_errors_name_the_stage() {
        let mut c = noiseless(16);
        c.analysis.x2_median_order = Some(2000);
        let e = run_link(&c).unwrap_err();
        assert!(e.to_string().contains("filter"), "{e}");
        assert!(!e.is_config());
    }

    #[test]
    fn sweep_of_nothing_is_empty() {
        assert!(sweep_levels(&noiseless(8), &[]).unwrap().is_empty());
        assert!(sweep_levels(&noiseless(8), &[1]).is_err());
    }

    #[test]
    fn sweep_csv_layout() {
        let mut c = noiseless(8);
        c.duration = 0.2;
        c.analysis.x2_median_order = None;
        let reports = sweep_levels(&c, &[4, 8]).unwrap();
        let csv = sweep_csv(&reports);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "L,mse_x1,mse_x2,sum");
        assert!(lines[1].starts_with("4,"));
        assert!(lines[2].starts_with("8,"));
    }
}
