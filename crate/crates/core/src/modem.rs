//! Voltage-controlled FM at complex baseband and an FFT peak receiver.
//!
//! Each encoded sample becomes one block of `N` unit-modulus samples at a
//! frequency linear in the voltage. The receiver takes an `N`-point FFT of
//! the block and maps the strongest in-band bin back to a voltage.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::codec::EncodedSample;
use crate::error::{Error, Result};

/// Receiver profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// 8.192 MHz, 8192-point FFT: one sample per millisecond.
    Fast,
    /// 500 kHz, 5000-point FFT: one sample per 10 ms.
    Slow,
}

impl Profile {
    pub fn config(self) -> ModemConfig {
        match self {
            Profile::Fast => ModemConfig {
                f_min: 500e3,
                f_max: 4.0e6,
                sample_rate: 8.192e6,
                fft_size: 8192,
                interpolate: true,
            },
            Profile::Slow => ModemConfig {
                f_min: 25e3,
                f_max: 225e3,
                sample_rate: 500e3,
                fft_size: 5000,
                interpolate: true,
            },
        }
    }
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Profile::Fast),
            "slow" => Ok(Profile::Slow),
            other => Err(Error::config(format!("unknown profile `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModemConfig {
    pub f_min: f64,
    pub f_max: f64,
    pub sample_rate: f64,
    pub fft_size: usize,
    /// Refine the peak bin with the three-point complex interpolator;
    /// `false` reports the raw bin frequency.
    pub interpolate: bool,
}

impl ModemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fft_size < 2 {
            return Err(Error::config("fft_size must be >= 2"));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::config("sample_rate must be positive"));
        }
        if !(0.0 <= self.f_min && self.f_min < self.f_max) {
            return Err(Error::config("need 0 <= f_min < f_max"));
        }
        if self.f_max > 0.98 * self.sample_rate / 2.0 {
            return Err(Error::config(format!(
                "f_max {} Hz too close to Nyquist for fs {} Hz",
                self.f_max, self.sample_rate
            )));
        }
        Ok(())
    }

    pub fn bin_hz(&self) -> f64 {
        self.sample_rate / self.fft_size as f64
    }

    /// Duration of one block, seconds.
    pub fn block_duration(&self) -> f64 {
        self.fft_size as f64 / self.sample_rate
    }
}

pub fn voltage_to_frequency(v: f64, full_scale: f64, cfg: &ModemConfig) -> f64 {
    let u = (v / full_scale).clamp(0.0, 1.0);
    cfg.f_min + u * (cfg.f_max - cfg.f_min)
}

pub fn frequency_to_voltage(f: f64, full_scale: f64, cfg: &ModemConfig) -> f64 {
    let u = ((f - cfg.f_min) / (cfg.f_max - cfg.f_min)).clamp(0.0, 1.0);
    u * full_scale
}

/// One FFT block of complex baseband samples.
#[derive(Debug, Clone, PartialEq)]
pub struct BasebandBlock {
    pub index: usize,
    pub samples: Vec<Complex64>,
}

/// Phase-continuous tone generator.
#[derive(Debug, Clone)]
pub struct Modulator {
    cfg: ModemConfig,
    full_scale: f64,
    phase: f64,
    next_index: usize,
}

/// Samples between exact `sin_cos` resyncs of the phasor recursion.
const RESYNC: usize = 256;

impl Modulator {
    pub fn new(cfg: &ModemConfig, full_scale: f64) -> Result<Self> {
        cfg.validate()?;
        if !(full_scale > 0.0) {
            return Err(Error::config("full_scale must be positive"));
        }
        Ok(Self {
            cfg: cfg.clone(),
            full_scale,
            phase: 0.0,
            next_index: 0,
        })
    }

    /// Writes the next block into `out` (length `N`) and returns its
    /// frequency.
    pub fn fill(&mut self, v: EncodedSample, out: &mut [Complex64]) -> f64 {
        let n = self.cfg.fft_size;
        assert_eq!(out.len(), n, "block buffer must hold fft_size samples");
        let f = voltage_to_frequency(v.0, self.full_scale, &self.cfg);
        let step = std::f64::consts::TAU * f / self.cfg.sample_rate;
        let rot = Complex64::from_polar(1.0, step);
        for (chunk_idx, chunk) in out.chunks_mut(RESYNC).enumerate() {
            let start = self.phase + step * (chunk_idx * RESYNC) as f64;
            let mut z = Complex64::from_polar(1.0, start);
            for s in chunk {
                *s = z;
                z *= rot;
            }
        }
        self.phase = (self.phase + step * n as f64).rem_euclid(std::f64::consts::TAU);
        self.next_index += 1;
        f
    }

    pub fn next_block(&mut self, v: EncodedSample) -> BasebandBlock {
        let index = self.next_index;
        let mut samples = vec![Complex64::new(0.0, 0.0); self.cfg.fft_size];
        self.fill(v, &mut samples);
        BasebandBlock { index, samples }
    }
}

pub fn modulate(
    encoded: &[EncodedSample],
    full_scale: f64,
    cfg: &ModemConfig,
) -> Result<Vec<BasebandBlock>> {
    if encoded.is_empty() {
        return Err(Error::precondition("nothing to modulate"));
    }
    let mut m = Modulator::new(cfg, full_scale)?;
    Ok(encoded.iter().map(|&v| m.next_block(v)).collect())
}

/// FFT peak frequency detector with a cached plan.
pub struct FftDetector {
    cfg: ModemConfig,
    full_scale: f64,
    fft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
    band: (usize, usize),
}

impl std::fmt::Debug for FftDetector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftDetector")
            .field("cfg", &self.cfg)
            .field("band", &self.band)
            .finish()
    }
}

impl FftDetector {
    pub fn new(cfg: &ModemConfig, full_scale: f64) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.fft_size;
        let fft = FftPlanner::new().plan_fft_forward(n);
        let scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        let bin = cfg.bin_hz();
        let lo = (cfg.f_min / bin).floor() as usize;
        let hi = ((cfg.f_max / bin).ceil() as usize).min(n - 1);
        Ok(Self {
            cfg: cfg.clone(),
            full_scale,
            fft,
            buf: vec![Complex64::new(0.0, 0.0); n],
            scratch,
            band: (lo, hi),
        })
    }

    pub fn config(&self) -> &ModemConfig {
        &self.cfg
    }

    /// Peak frequency of `block`, Hz.
    pub fn detect_frequency(&mut self, block: &[Complex64]) -> Result<f64> {
        let n = self.cfg.fft_size;
        if block.len() != n {
            return Err(Error::precondition(format!(
                "block has {} samples, receiver expects {n}",
                block.len()
            )));
        }
        self.buf.copy_from_slice(block);
        self.fft
            .process_with_scratch(&mut self.buf, &mut self.scratch);

        let (lo, hi) = self.band;
        let (k, peak) = (lo..=hi).map(|k| (k, self.buf[k].norm_sqr())).fold(
            (lo, f64::NEG_INFINITY),
            |best, cur| if cur.1 > best.1 { cur } else { best },
        );
        if !(peak > 0.0) || !peak.is_finite() {
            return Err(Error::Demodulation("no spectral peak in band".into()));
        }
        let offset = if self.cfg.interpolate {
            let prev = self.buf[(k + n - 1) % n];
            let next = self.buf[(k + 1) % n];
            let denom = self.buf[k] * 2.0 - prev - next;
            if denom.norm_sqr() > 0.0 {
                let nf = n as f64;
                let correction = (std::f64::consts::PI / nf).tan() / (std::f64::consts::PI / nf);
                (correction * ((prev - next) / denom).re).clamp(-0.5, 0.5)
            } else {
                0.0
            }
        } else {
            0.0
        };
        Ok((k as f64 + offset) * self.cfg.bin_hz())
    }

    pub fn demodulate(&mut self, block: &[Complex64]) -> Result<EncodedSample> {
        let f = self.detect_frequency(block)?;
        Ok(EncodedSample(frequency_to_voltage(
            f,
            self.full_scale,
            &self.cfg,
        )))
    }
}

pub fn demodulate(
    block: &BasebandBlock,
    full_scale: f64,
    cfg: &ModemConfig,
) -> Result<EncodedSample> {
    FftDetector::new(cfg, full_scale)?.demodulate(&block.samples)
}

/// Raw dump: little-endian interleaved `f64` (re, im), `N` pairs per block.
pub fn write_blocks_le<W: Write>(mut w: W, blocks: &[BasebandBlock]) -> std::io::Result<()> {
    for b in blocks {
        for z in &b.samples {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    Ok(())
}
