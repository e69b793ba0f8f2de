//! Acceptance suite. Each test prints one PASS/FAIL line; run with
//! `cargo test -p ajscc-core --test acceptance -- --nocapture` to see them.

use std::time::Instant;

use ajscc_core::analysis::{self, kendall_tau};
use ajscc_core::channel::{ChannelSim, JakesProcess};
use ajscc_core::codec::{self, AjsccParams};
use ajscc_core::experiments::{
    self, ExperimentOptions, DEFAULT_SWEEP_LEVELS, PEAK_DURATION, SWEEP_DURATION,
};
use ajscc_core::harness::{self, channel, run_link_detailed};
use ajscc_core::{
    ChannelFamily, ChannelSpec, Csnr, CytometrySynthSpec, Design, Experiment, Profile, RunConfig,
    SourceSpec,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 1;

fn verdict(name: &str, ok: bool, detail: String) {
    println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "{name}: {detail}");
}

fn awgn0() -> ChannelSpec {
    channel(ChannelFamily::Awgn, Csnr(0.0), None)
}

#[test]
fn codec_round_trip() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst_x1: f64 = 0.0;
    let mut worst_x2_ratio: f64 = 0.0;
    for levels in [2, 11, 16, 30, 50] {
        let p = AjsccParams::link_default(levels).unwrap();
        let half = p.delta() / 2.0;
        for _ in 0..1_000_000 {
            let x1 = rng.random_range(0.0..p.x1_max);
            let x2 = rng.random_range(0.0..=p.x2_max);
            let (a, b) = codec::decode(codec::encode(x1, x2, &p).unwrap(), &p);
            worst_x1 = worst_x1.max((a - x1).abs());
            worst_x2_ratio = worst_x2_ratio.max((b - x2).abs() / half);
        }
    }
    let secs = started.elapsed().as_secs_f64();
    verdict(
        "codec round-trip",
        worst_x1 <= 1e-9 && worst_x2_ratio <= 1.0 + 1e-9 && secs < 10.0,
        format!("5 x 1e6 pairs, max |x1 err| = {worst_x1:.2e} V, max |x2 err| = {worst_x2_ratio:.6} x Delta/2, {secs:.2} s"),
    );
}

#[test]
fn quantization_law() {
    let mut mses = Vec::new();
    let mut details = Vec::new();
    let mut ok = true;
    for levels in [8, 16, 32] {
        let mut cfg = RunConfig::link_default(
            levels,
            Profile::Fast,
            channel(ChannelFamily::Awgn, Csnr::NOISELESS, None),
            SEED,
        )
        .unwrap();
        cfg.x2 = SourceSpec::Uniform { lo: 0.0, hi: 3.0 };
        cfg.x2_range = Some([0.0, 3.0]);
        let r = harness::run_link(&cfg).unwrap();
        let delta = cfg.codec.delta();
        let ratio = r.mse.mse_x2 / (delta * delta / 12.0);
        ok &= (ratio - 1.0).abs() <= 0.05;
        details.push(format!("L={levels}: mse_x2/(Delta^2/12) = {ratio:.4}"));
        mses.push(r.mse.mse_x2);
    }
    for w in mses.windows(2) {
        let step = w[1] / w[0];
        ok &= (step - 0.25).abs() <= 0.025;
        details.push(format!("doubling ratio {step:.4}"));
    }
    verdict("quantization law", ok, details.join(", "));
}

#[test]
fn sixteen_level_staircase() {
    let (p, curve) = experiments::staircase_curve(16).unwrap();
    let plateaus = codec::plateaus(&curve, 1e-9);
    let v_r = p.level_height();
    let worst = plateaus
        .windows(2)
        .map(|w| (w[1] - w[0] - v_r).abs())
        .fold(0.0, f64::max);
    let increasing = plateaus.windows(2).all(|w| w[1] > w[0]);
    verdict(
        "16-level staircase",
        plateaus.len() == 16 && worst <= 1e-9 && increasing,
        format!(
            "{} plateaus, max |step - V_R| = {worst:.2e}",
            plateaus.len()
        ),
    );
}

#[test]
fn mse_tradeoff_shape() {
    let started = Instant::now();
    let reports = experiments::mse_sweep(
        Profile::Fast,
        awgn0(),
        &DEFAULT_SWEEP_LEVELS,
        SEED,
        SWEEP_DURATION,
    )
    .unwrap();
    let secs = started.elapsed().as_secs_f64();
    let l: Vec<f64> = reports
        .iter()
        .map(|r| r.config.codec.levels as f64)
        .collect();
    let x1: Vec<f64> = reports.iter().map(|r| r.mse.mse_x1).collect();
    let x2: Vec<f64> = reports.iter().map(|r| r.mse.mse_x2).collect();
    let sum: Vec<f64> = reports.iter().map(|r| r.mse.sum).collect();

    let tau_x2 = kendall_tau(&l, &x2).unwrap();
    let upper = l.len() / 2;
    let tau_x1 = kendall_tau(&l[upper..], &x1[upper..]).unwrap();
    let best = sum
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    let interior = best != 0 && best != sum.len() - 1;
    verdict(
        "MSE trade-off",
        tau_x2 <= -0.8 && tau_x1 >= 0.6 && interior && secs < 300.0,
        format!(
            "tau(mse_x2) = {tau_x2:.3}, tau(mse_x1, L >= {}) = {tau_x1:.3}, sum-MSE minimum at L = {}, {secs:.1} s",
            l[upper], l[best]
        ),
    );
}

#[test]
fn fast_profile_beats_slow() {
    let levels = [5, 10, 15, 20];
    let fast =
        experiments::mse_sweep(Profile::Fast, awgn0(), &levels, SEED, SWEEP_DURATION).unwrap();
    let slow =
        experiments::mse_sweep(Profile::Slow, awgn0(), &levels, SEED, SWEEP_DURATION).unwrap();
    let pairs: Vec<String> = fast
        .iter()
        .zip(&slow)
        .map(|(f, s)| {
            format!(
                "L={}: {:.2e} < {:.2e}",
                f.config.codec.levels, f.mse.mse_x1, s.mse.mse_x1
            )
        })
        .collect();
    let ok = fast
        .iter()
        .zip(&slow)
        .all(|(f, s)| f.mse.mse_x1 < s.mse.mse_x1);
    verdict("fast vs slow receiver", ok, pairs.join(", "));
}

#[test]
fn peak_distributions_survive_the_link() {
    let rows = experiments::table1(SEED, PEAK_DURATION).unwrap();
    let mut ok = rows.len() == 8;
    let mut lines = Vec::new();
    for r in &rows {
        let enough = r.source_peaks >= 100 && r.receiver_peaks >= 100;
        let kept = r.ks.is_some_and(|k| !k.reject_at_5pct && k.p_value > 0.05);
        ok &= enough && kept;
        lines.push(format!(
            "{} {} dB L={}: {}/{} peaks, p = {}",
            r.channel,
            r.csnr_db,
            r.levels,
            r.source_peaks,
            r.receiver_peaks,
            r.ks.map_or("n/a".to_string(), |k| format!("{:.4}", k.p_value))
        ));
    }
    verdict("K-S table", ok, lines.join("; "));
}

fn bessel_j0(x: f64) -> f64 {
    // (1/pi) * integral_0^pi cos(x sin t) dt by composite Simpson.
    let n = 2000;
    let h = std::f64::consts::PI / n as f64;
    let f = |t: f64| (x * t.sin()).cos();
    let mut s = f(0.0) + f(std::f64::consts::PI);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    s * h / 3.0 / std::f64::consts::PI
}

#[test]
fn channel_statistics() {
    let modem = Profile::Fast.config();
    let mut notes = Vec::new();

    // AWGN power at 0 dB over >= 1e6 samples.
    let mut sim = ChannelSim::new(&awgn0(), None, &modem, 1.0, SEED).unwrap();
    let blocks = 1_000_000usize.div_ceil(modem.fft_size);
    let mut power = 0.0;
    for _ in 0..blocks {
        let mut b = vec![Complex64::new(0.0, 0.0); modem.fft_size];
        sim.process(&mut b);
        power += b.iter().map(|z| z.norm_sqr()).sum::<f64>();
    }
    let variance = power / (blocks * modem.fft_size) as f64;
    let awgn_ok = (variance - 1.0).abs() <= 0.02;
    notes.push(format!("AWGN variance {variance:.4} (expected 1)"));

    // Flat Rayleigh magnitude against F(r) = 1 - exp(-r^2).
    let small = ajscc_core::ModemConfig {
        fft_size: 64,
        ..modem.clone()
    };
    let mut sim = ChannelSim::new(
        &channel(ChannelFamily::FlatRayleigh, Csnr::NOISELESS, None),
        None,
        &small,
        1.0,
        SEED,
    )
    .unwrap();
    let mags: Vec<f64> = (0..100_000)
        .map(|_| {
            let mut b = vec![Complex64::new(1.0, 0.0); 64];
            sim.process(&mut b);
            sim.last_flat_gain().unwrap().norm()
        })
        .collect();
    let ks = analysis::ks_one_sample(&mags, |r| 1.0 - (-r * r).exp(), 0.01).unwrap();
    let rayleigh_ok = ks.p_value > 0.01;
    notes.push(format!(
        "|h| vs Rayleigh: D = {:.4}, p = {:.3}",
        ks.statistic, ks.p_value
    ));

    // Ensemble autocorrelation of one fading tap against J0(2 pi fD tau).
    let mut jakes_ok = true;
    for doppler in [5.0, 20.0] {
        let realizations = 10_000;
        let lags: Vec<f64> = (0..=50).map(|k| k as f64 * 1e-3).collect();
        let mut acc = vec![Complex64::new(0.0, 0.0); lags.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(SEED);
        let mut energy = 0.0;
        for _ in 0..realizations {
            let p = JakesProcess::new(doppler, &mut rng);
            let h0 = p.gain_at(0.25);
            energy += h0.norm_sqr();
            for (a, &tau) in acc.iter_mut().zip(&lags) {
                *a += h0.conj() * p.gain_at(0.25 + tau);
            }
        }
        let worst = acc
            .iter()
            .zip(&lags)
            .map(|(a, &tau)| {
                (a.re / energy - bessel_j0(std::f64::consts::TAU * doppler * tau)).abs()
            })
            .fold(0.0, f64::max);
        jakes_ok &= worst <= 0.05;
        notes.push(format!("Jakes {doppler} Hz max |R - J0| = {worst:.4}"));
    }
    verdict(
        "channel statistics",
        awgn_ok && rayleigh_ok && jakes_ok,
        notes.join(", "),
    );
}

#[test]
fn reruns_are_byte_identical() {
    let opts = ExperimentOptions {
        seed: SEED,
        duration: Some(2.0),
        levels: Some(vec![5, 50, 100]),
    };
    let ids = [
        Experiment::Fig4,
        Experiment::Fig5Cdf,
        Experiment::Fig6c,
        Experiment::Fig7b,
        Experiment::Table1,
    ];
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut compared = 0;
    let mut ok = true;
    for id in ids {
        let fa = experiments::reproduce(id, a.path(), &opts).unwrap();
        let fb = experiments::reproduce(id, b.path(), &opts).unwrap();
        for (x, y) in fa.iter().zip(&fb) {
            ok &= std::fs::read(x).unwrap() == std::fs::read(y).unwrap();
            compared += 1;
        }
    }

    let mut cfg = RunConfig::link_default(
        30,
        Profile::Fast,
        channel(ChannelFamily::JtcOutdoorLowA, Csnr(10.0), Some(20.0)),
        SEED,
    )
    .unwrap();
    cfg.duration = 2.0;
    let one = run_link_detailed(&cfg).unwrap();
    let two = run_link_detailed(&cfg).unwrap();
    ok &= one.signals_csv() == two.signals_csv();
    compared += 1;
    verdict(
        "determinism",
        ok,
        format!("{compared} CSV artifacts compared byte-for-byte"),
    );
}

#[test]
fn biased_design_floor_and_spike_removal() {
    let mut cfg = RunConfig::link_default(
        11,
        Profile::Slow,
        channel(ChannelFamily::Awgn, Csnr::NOISELESS, None),
        SEED,
    )
    .unwrap();
    cfg.duration = 30.0;
    cfg.x1 = SourceSpec::Cytometry(CytometrySynthSpec {
        baseline: 0.0,
        noise_sd: 0.0,
        ..CytometrySynthSpec::default()
    });
    cfg.codec = AjsccParams::new(11, 10.0, 3.0)
        .unwrap()
        .with_design1_bias(0.001)
        .unwrap();
    cfg.design = Design::Design1;
    let out = run_link_detailed(&cfg).unwrap();

    let gaps: Vec<usize> = (0..out.reference_x1.len())
        .filter(|&i| out.reference_x1.samples()[i] == 0.0)
        .collect();
    let floor: Vec<f64> = gaps.iter().map(|&i| out.decoded_x1.samples()[i]).collect();
    let floor_max = floor.iter().copied().fold(0.0, f64::max);
    let floor_mean = floor.iter().sum::<f64>() / floor.len() as f64;

    let threshold = floor_max * 1.01;
    let cleaned = analysis::threshold_filter(&out.decoded_x1, threshold).unwrap();
    let cleared = gaps.iter().all(|&i| cleaned.samples()[i] == 0.0);
    // Every pulse well clear of the floor must still show up within one sample.
    let dt = cleaned.sample_period();
    let received = analysis::detect_peaks(&cleaned, threshold, 0.012).unwrap();
    let strong: Vec<f64> = analysis::detect_peaks(&out.reference_x1, 3.0 * floor_max, 0.012)
        .unwrap()
        .iter()
        .map(|e| e.time)
        .collect();
    let pulses_kept = strong
        .iter()
        .filter(|&&t| received.iter().any(|e| (e.time - t).abs() <= dt * 1.001))
        .count();
    let pulses_sent = strong.len();

    let mut ideal = cfg.clone();
    ideal.design = Design::Ideal;
    ideal.codec.design1_bias = 0.0;
    let ideal_out = run_link_detailed(&ideal).unwrap();
    let ideal_floor = gaps
        .iter()
        .map(|&i| ideal_out.decoded_x1.samples()[i])
        .fold(0.0, f64::max);

    // Isolated spikes on the decoded GSR.
    let delta = cfg.codec.delta();
    let clean = &out.decoded_x2;
    let mut spiked = clean.samples().to_vec();
    let spikes: Vec<usize> = (150..spiked.len() - 150).step_by(250).collect();
    for &i in &spikes {
        spiked[i] += 5.0 * delta;
    }
    let spiked = ajscc_core::SourceTrace::new(clean.sample_period(), spiked, "uS").unwrap();
    let filtered = analysis::median_filter(&spiked, 200).unwrap();
    let reference = analysis::median_filter(clean, 200).unwrap();
    // One outlier in a 201-sample window moves the median by at most one
    // order statistic, i.e. one level of the quantized GSR.
    let worst_spike = filtered
        .samples()
        .iter()
        .zip(reference.samples())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let spikes_gone = worst_spike <= delta * (1.0 + 1e-9) && filtered.max() <= clean.max() + 1e-12;

    verdict(
        "biased encoder floor and filters",
        floor_mean > 1e-3 && ideal_floor < 1e-6 && cleared && pulses_sent > 50 && pulses_kept == pulses_sent && spikes_gone,
        format!(
            "floor mean {floor_mean:.3} V / max {floor_max:.3} V (ideal {ideal_floor:.1e}), threshold clears {} gap samples, \
             {pulses_kept}/{pulses_sent} pulses kept, {} spikes, worst residual {worst_spike:.3} (Delta {delta:.3})",
            gaps.len(),
            spikes.len()
        ),
    );
}
