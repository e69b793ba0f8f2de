//! Canned experiments: the 16-level staircase, peak CDFs, MSE-vs-levels
//! sweeps per channel, and the K-S table.
//!
//! All of them use the raw-bin receiver (no spectral interpolation), as a
//! plain FFT peak picker would.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{self, KsResult};
use crate::channel::{ChannelFamily, ChannelSpec, Csnr};
use crate::codec::{self, AjsccParams};
use crate::error::{Error, Result};
use crate::harness::{self, channel, write_file, RunConfig, RunReport};
use crate::modem::Profile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Experiment {
    /// Encoded output against `x2` at mid-scale `x1`, 16 levels.
    Fig4,
    /// Cytometry peak CDFs at the source and after each channel.
    Fig5Cdf,
    /// MSE vs levels, AWGN 0 dB, fast receiver.
    Fig6a,
    /// MSE vs levels, AWGN 0 dB, slow receiver.
    Fig6b,
    /// MSE vs levels, flat Rayleigh 0 dB, fast receiver.
    Fig6c,
    /// MSE vs levels, indoor multipath with 5 Hz Doppler, 0 dB.
    Fig7a,
    /// MSE vs levels, outdoor multipath with 20 Hz Doppler, 0 dB.
    Fig7b,
    /// MSE vs levels, outdoor multipath with 20 Hz Doppler, 10 dB.
    Fig7c,
    /// K-S test of source vs receiver peaks, four channels by two level counts.
    Table1,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Fig4,
        Experiment::Fig5Cdf,
        Experiment::Fig6a,
        Experiment::Fig6b,
        Experiment::Fig6c,
        Experiment::Fig7a,
        Experiment::Fig7b,
        Experiment::Fig7c,
        Experiment::Table1,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Experiment::Fig4 => "fig4",
            Experiment::Fig5Cdf => "fig5cdf",
            Experiment::Fig6a => "fig6a",
            Experiment::Fig6b => "fig6b",
            Experiment::Fig6c => "fig6c",
            Experiment::Fig7a => "fig7a",
            Experiment::Fig7b => "fig7b",
            Experiment::Fig7c => "fig7c",
            Experiment::Table1 => "table1",
        }
    }

    /// Receiver profile and channel of the MSE sweeps.
    pub fn sweep_setup(self) -> Option<(Profile, ChannelSpec)> {
        use ChannelFamily::*;
        Some(match self {
            Experiment::Fig6a => (Profile::Fast, channel(Awgn, Csnr(0.0), None)),
            Experiment::Fig6b => (Profile::Slow, channel(Awgn, Csnr(0.0), None)),
            Experiment::Fig6c => (Profile::Fast, channel(FlatRayleigh, Csnr(0.0), None)),
            Experiment::Fig7a => (Profile::Fast, channel(JtcIndoorA, Csnr(0.0), Some(5.0))),
            Experiment::Fig7b => (
                Profile::Fast,
                channel(JtcOutdoorLowA, Csnr(0.0), Some(20.0)),
            ),
            Experiment::Fig7c => (
                Profile::Fast,
                channel(JtcOutdoorLowA, Csnr(10.0), Some(20.0)),
            ),
            _ => return None,
        })
    }
}

impl std::fmt::Display for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

impl std::str::FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.id() == s)
            .ok_or_else(|| {
                let known: Vec<&str> = Experiment::ALL.iter().map(|e| e.id()).collect();
                Error::Config(format!(
                    "unknown experiment `{s}` (known: {})",
                    known.join(", ")
                ))
            })
    }
}

pub const DEFAULT_SWEEP_LEVELS: [u32; 20] = [
    5, 10, 15, 20, 25, 30, 35, 40, 45, 50, 55, 60, 65, 70, 75, 80, 85, 90, 95, 100,
];
pub const TABLE1_LEVELS: [u32; 2] = [30, 50];
pub const SWEEP_DURATION: f64 = 10.0;
/// Long enough for well over 100 pulses at 5 per second.
pub const PEAK_DURATION: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOptions {
    pub seed: u64,
    /// Overrides the per-experiment signal duration, seconds.
    pub duration: Option<f64>,
    /// Overrides the sweep grid.
    pub levels: Option<Vec<u32>>,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            seed: 1,
            duration: None,
            levels: None,
        }
    }
}

/// Link-default sources and codec with the raw-bin receiver.
pub fn experiment_config(
    levels: u32,
    profile: Profile,
    channel: ChannelSpec,
    seed: u64,
    duration: f64,
) -> Result<RunConfig> {
    let mut cfg = RunConfig::link_default(levels, profile, channel, seed)?;
    cfg.interpolate = false;
    cfg.duration = duration;
    Ok(cfg)
}

pub fn mse_sweep(
    profile: Profile,
    channel: ChannelSpec,
    levels: &[u32],
    seed: u64,
    duration: f64,
) -> Result<Vec<RunReport>> {
    let cfg = experiment_config(
        levels.first().copied().unwrap_or(2),
        profile,
        channel,
        seed,
        duration,
    )?;
    harness::sweep_levels(&cfg, levels)
}

/// The four propagation conditions of the K-S table and the peak CDFs.
pub fn peak_channels() -> [ChannelSpec; 4] {
    use ChannelFamily::*;
    [
        channel(Awgn, Csnr(0.0), None),
        channel(FlatRayleigh, Csnr(0.0), None),
        channel(JtcIndoorA, Csnr(10.0), Some(5.0)),
        channel(JtcOutdoorLowA, Csnr(10.0), Some(20.0)),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub channel: String,
    pub csnr_db: Csnr,
    pub doppler_hz: f64,
    pub levels: u32,
    pub source_peaks: usize,
    pub receiver_peaks: usize,
    pub ks: Option<KsResult>,
}

pub fn table1(seed: u64, duration: f64) -> Result<Vec<Table1Row>> {
    let mut rows = Vec::new();
    for ch in peak_channels() {
        for levels in TABLE1_LEVELS {
            let cfg = experiment_config(levels, Profile::Fast, ch.clone(), seed, duration)?;
            let r = harness::run_link(&cfg)?;
            rows.push(Table1Row {
                channel: ch.family.name().to_string(),
                csnr_db: ch.csnr_db,
                doppler_hz: ch.doppler(),
                levels,
                source_peaks: r.source_peaks.len(),
                receiver_peaks: r.receiver_peaks.len(),
                ks: r.ks,
            });
        }
    }
    Ok(rows)
}

/// `channel,csnr_db,doppler_hz,L,source_peaks,receiver_peaks,ks_statistic,p_value,reject`
pub fn table1_csv(rows: &[Table1Row]) -> String {
    let mut out = String::from(
        "channel,csnr_db,doppler_hz,L,source_peaks,receiver_peaks,ks_statistic,p_value,reject\n",
    );
    for r in rows {
        let (d, p, reject) = match r.ks {
            Some(k) => (
                k.statistic.to_string(),
                k.p_value.to_string(),
                (k.reject_at_5pct as u8).to_string(),
            ),
            None => (String::new(), String::new(), String::new()),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{d},{p},{reject}",
            r.channel, r.csnr_db, r.doppler_hz, r.levels, r.source_peaks, r.receiver_peaks
        );
    }
    out
}

/// 16-level staircase at mid-scale `x1`, 64 points per level.
pub fn staircase_curve(levels: u32) -> Result<(AjsccParams, Vec<(f64, f64)>)> {
    let p = AjsccParams::link_default(levels)?;
    let curve = codec::staircase(&p, p.x1_max / 2.0, 64 * levels as usize + 1)?;
    Ok((p, curve))
}

/// `x2,encoded`
pub fn staircase_csv(curve: &[(f64, f64)]) -> String {
    let mut out = String::from("x2,encoded\n");
    for (x2, v) in curve {
        let _ = writeln!(out, "{x2},{v}");
    }
    out
}

/// Runs `experiment` and writes its CSV artifacts into `out_dir`.
pub fn reproduce(
    experiment: Experiment,
    out_dir: impl AsRef<Path>,
    opts: &ExperimentOptions,
) -> Result<Vec<PathBuf>> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let id = experiment.id();
    let mut written = Vec::new();
    match experiment {
        Experiment::Fig4 => {
            let (p, curve) = staircase_curve(16)?;
            written.push(write_file(
                &dir.join("fig4_staircase.csv"),
                &staircase_csv(&curve),
            )?);
            let mut plateaus = String::from("level,encoded\n");
            for (k, v) in codec::plateaus(&curve, 1e-9 * p.full_scale())
                .iter()
                .enumerate()
            {
                let _ = writeln!(plateaus, "{k},{v}");
            }
            written.push(write_file(&dir.join("fig4_plateaus.csv"), &plateaus)?);
        }
        Experiment::Fig5Cdf => {
            let duration = opts.duration.unwrap_or(PEAK_DURATION);
            for (i, ch) in peak_channels().into_iter().enumerate() {
                let name = ch.family.name();
                let cfg = experiment_config(30, Profile::Fast, ch, opts.seed, duration)?;
                let r = harness::run_link(&cfg)?;
                if i == 0 {
                    let v: Vec<f64> = r.source_peaks.iter().map(|e| e.peak_value).collect();
                    let cdf = analysis::empirical_cdf(&v)?;
                    written.push(write_file(
                        &dir.join("fig5cdf_source.csv"),
                        &analysis::cdf_csv(&cdf),
                    )?);
                }
                let v: Vec<f64> = r.receiver_peaks.iter().map(|e| e.peak_value).collect();
                let cdf = analysis::empirical_cdf(&v)?;
                written.push(write_file(
                    &dir.join(format!("fig5cdf_{name}.csv")),
                    &analysis::cdf_csv(&cdf),
                )?);
            }
        }
        Experiment::Table1 => {
            let rows = table1(opts.seed, opts.duration.unwrap_or(PEAK_DURATION))?;
            written.push(write_file(&dir.join("table1.csv"), &table1_csv(&rows))?);
        }
        sweep => {
            let (profile, ch) = sweep
                .sweep_setup()
                .expect("remaining experiments are sweeps");
            let levels = opts
                .levels
                .clone()
                .unwrap_or_else(|| DEFAULT_SWEEP_LEVELS.to_vec());
            let reports = mse_sweep(
                profile,
                ch,
                &levels,
                opts.seed,
                opts.duration.unwrap_or(SWEEP_DURATION),
            )?;
            written.push(write_file(
                &dir.join(format!("{id}.csv")),
                &harness::sweep_csv(&reports),
            )?);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.id().parse::<Experiment>().unwrap(), e);
        }
        assert!("fig9".parse::<Experiment>().unwrap_err().is_config());
    }

    #[test]
    fn fig4_has_sixteen_plateaus() {
        let dir = tempfile::tempdir().unwrap();
        let files = reproduce(Experiment::Fig4, dir.path(), &ExperimentOptions::default()).unwrap();
        assert_eq!(files.len(), 2);
        let text = std::fs::read_to_string(&files[1]).unwrap();
        let values: Vec<f64> = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        assert_eq!(values.len(), 16);
        for w in values.windows(2) {
            assert!((w[1] - w[0] - 1.0 / 16.0).abs() < 1e-9);
        }
    }

    #[test]
    fn table1_csv_layout() {
        let rows = vec![Table1Row {
            channel: "awgn".into(),
            csnr_db: Csnr(0.0),
            doppler_hz: 0.0,
            levels: 30,
            source_peaks: 140,
            receiver_peaks: 140,
            ks: Some(KsResult {
                statistic: 0.05,
                p_value: 0.9,
                reject_at_5pct: false,
            }),
        }];
        let csv = table1_csv(&rows);
        assert_eq!(
            csv.lines().nth(1).unwrap(),
            "awgn,0,0,30,140,140,0.05,0.9,0"
        );
    }

    #[test]
    fn sweeps_use_raw_bins() {
        let cfg = experiment_config(10, Profile::Slow, peak_channels()[0].clone(), 1, 1.0).unwrap();
        assert!(!cfg.interpolate);
        cfg.validate().unwrap();
    }
}
