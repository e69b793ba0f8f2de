//! `ajscc`: run link simulations, level sweeps and the canned experiments.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ajscc_core::experiments::{self, ExperimentOptions};
use ajscc_core::harness::{self, run_link_detailed};
use ajscc_core::{codec, ChannelFamily, ChannelSpec, Csnr, Error, Experiment, Profile, RunConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "ajscc", version, about = "AJSCC biosignal link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one link simulation and write its report and signals.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Number of AJSCC levels (overrides the config).
        #[arg(long)]
        levels: Option<u32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one simulation per level count and tabulate the MSE.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// `start:stop:step` or a comma-separated list.
        #[arg(long, default_value = "5:100:5")]
        levels: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Regenerate one of the figure or table experiments as CSV.
    Reproduce {
        /// fig4, fig5cdf, fig6a, fig6b, fig6c, fig7a, fig7b, fig7c or table1.
        #[arg(long)]
        id: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Signal duration in seconds (experiment default otherwise).
        #[arg(long)]
        duration: Option<f64>,
        /// Sweep grid for the MSE experiments.
        #[arg(long)]
        levels: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the encoder output against x2 at fixed x1.
    Staircase {
        #[arg(long, default_value_t = 16)]
        levels: u32,
        /// Fixed x1 in volts; defaults to mid-scale.
        #[arg(long)]
        x1: Option<f64>,
        #[arg(long, default_value_t = 1024)]
        points: usize,
        /// Write the CSV here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration; built-in synthetic defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_profile)]
    profile: Option<Profile>,
    /// awgn, flat, jtc-indoor or jtc-outdoor.
    #[arg(long, value_parser = parse_family)]
    channel: Option<ChannelFamily>,
    /// Channel SNR in dB, or `inf` for a noiseless link.
    #[arg(long, value_parser = parse_csnr, allow_hyphen_values = true)]
    csnr_db: Option<Csnr>,
    #[arg(long)]
    doppler_hz: Option<f64>,
    /// Tap-profile CSV for the multipath channels.
    #[arg(long)]
    tap_profile: Option<PathBuf>,
    /// Report the raw FFT bin instead of the interpolated peak.
    #[arg(long)]
    no_interp: bool,
    /// Signal duration, seconds.
    #[arg(long)]
    duration: Option<f64>,
}

fn parse_profile(s: &str) -> Result<Profile, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_family(s: &str) -> Result<ChannelFamily, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_csnr(s: &str) -> Result<Csnr, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl RunArgs {
    fn build(&self, levels: Option<u32>) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            // An unreadable config file is a configuration problem, not a
            // run failure.
            Some(path) => RunConfig::load(path).map_err(|e| match e {
                Error::Io { .. } => Error::Config(e.to_string()),
                other => other,
            })?,
            None => RunConfig::link_default(
                16,
                Profile::Fast,
                ChannelSpec::new(ChannelFamily::Awgn, Csnr::NOISELESS),
                1,
            )?,
        };
        if let Some(l) = levels {
            cfg.codec.levels = l;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(p) = self.profile {
            cfg.profile = p;
        }
        if let Some(family) = self.channel {
            if family != cfg.channel.family {
                cfg.channel = ChannelSpec::new(family, cfg.channel.csnr_db);
            }
        }
        if let Some(c) = self.csnr_db {
            cfg.channel.csnr_db = c;
        }
        if let Some(d) = self.doppler_hz {
            cfg.channel.doppler_hz = Some(d);
        }
        if let Some(p) = &self.tap_profile {
            cfg.channel.profile_path = Some(p.clone());
        }
        if self.no_interp {
            cfg.interpolate = false;
        }
        if let Some(d) = self.duration {
            cfg.duration = d;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write(path: &Path, body: &str) -> Result<(), Error> {
    std::fs::write(path, body).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate { run, levels, out } => {
            let cfg = run.build(levels)?;
            let result = run_link_detailed(&cfg)?;
            result.write_artifacts(&out)?;
            let r = &result.report;
            println!(
                "L={} mse_x1={} mse_x2={} sum={} peaks={}/{} ks_p={}",
                cfg.codec.levels,
                r.mse.mse_x1,
                r.mse.mse_x2,
                r.mse.sum,
                r.source_peaks.len(),
                r.receiver_peaks.len(),
                r.ks.map_or("n/a".to_string(), |k| k.p_value.to_string())
            );
        }
        Command::Sweep { run, levels, out } => {
            let cfg = run.build(None)?;
            let grid = harness::parse_levels(&levels)?;
            let reports = harness::sweep_levels(&cfg, &grid)?;
            create_dir(&out)?;
            let table = harness::sweep_csv(&reports);
            write(&out.join("sweep.csv"), &table)?;
            for r in &reports {
                write(
                    &out.join(format!("report_L{}.json", r.config.codec.levels)),
                    &r.to_json(),
                )?;
            }
            print!("{table}");
        }
        Command::Reproduce {
            id,
            seed,
            duration,
            levels,
            out,
        } => {
            let experiment: Experiment = id.parse()?;
            let opts = ExperimentOptions {
                seed,
                duration,
                levels: levels.as_deref().map(harness::parse_levels).transpose()?,
            };
            for path in experiments::reproduce(experiment, &out, &opts)? {
                println!("{}", path.display());
            }
        }
        Command::Staircase {
            levels,
            x1,
            points,
            out,
        } => {
            let p = codec::AjsccParams::link_default(levels)?;
            let curve = codec::staircase(&p, x1.unwrap_or(p.x1_max / 2.0), points)?;
            let csv = experiments::staircase_csv(&curve);
            match out {
                Some(path) => write(&path, &csv)?,
                None => {
                    let _ = std::io::stdout().write_all(csv.as_bytes());
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
