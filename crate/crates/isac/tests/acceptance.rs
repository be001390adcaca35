//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! fails if any criterion fails.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use isac::config::SnrGrid;
use isac::harness::{sensing_pilot, SensingLink};
use isac::{run_experiment, to_csv, Experiment, ExperimentConfig, ResultRow};
use isac_core::channel::{apply_channel, ChannelPath, ChannelRealization};
use isac_core::comm::qam16_point;
use isac_core::pilot::{inner_product_2d, phase_matrix, PhaseModel};
use isac_core::sensing::natural_pilot;
use isac_core::transform::{isfft, ofdm_demodulate, ofdm_modulate, sfft, superimpose};
use isac_core::{Domain, FrameGeometry, Grid, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn value(rows: &[ResultRow], snr: f64, metric: &str) -> (f64, f64) {
    let r = rows
        .iter()
        .find(|r| r.snr_db == Some(snr) && r.metric == metric)
        .unwrap_or_else(|| panic!("missing {metric} at {snr} dB"));
    (r.value, r.stderr.unwrap_or(0.0))
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn correlation_exactness() -> Outcome {
    let mut worst = 0.0f64;
    for size in [7usize, 15] {
        let (p, _) = natural_pilot(size).map_err(|e| e.to_string())?;
        let l = size as f64;
        let allowed = [1.0 / l, 1.0 / (l * l)];
        let shifts: Vec<Grid> = (0..size * size)
            .map(|i| p.shifted((i / size) as i64, (i % size) as i64))
            .collect();
        for (i, x) in shifts.iter().enumerate() {
            for (j, y) in shifts.iter().enumerate() {
                let v = inner_product_2d(x, y).unwrap().norm();
                let err = if i == j {
                    (v - 1.0).abs()
                } else {
                    allowed.iter().map(|a| (v - a).abs()).fold(f64::INFINITY, f64::min)
                };
                worst = worst.max(err);
            }
        }
    }
    check(worst < 1e-12, format!("max deviation {worst:.2e}"))
}

fn dd_coupling() -> Outcome {
    let geom = FrameGeometry::new(16, 8, 15e3, 4).unwrap();
    let p = sensing_pilot(&geom).map_err(|e| e.to_string())?;
    let sig = ofdm_modulate(&isfft(p.matrix(), &geom).unwrap(), &geom).unwrap();
    let gain = C64::new(0.8, 0.35);
    let mut worst = 0.0f64;
    for k in 0..geom.n() {
        for l in 0..geom.cp_length() {
            let ch = ChannelRealization::new(vec![ChannelPath::new(gain, l as f64, k as f64)], geom);
            let y = apply_channel(&sig, &ch).unwrap();
            let r = sfft(&ofdm_demodulate(&y, &geom).unwrap(), &geom).unwrap();
            let xi = phase_matrix((k, l), &geom, PhaseModel::PerSymbolCp).unwrap();
            let expect = p.shifted(k as i64, l as i64).hadamard(xi.entries()).unwrap().scaled(gain);
            worst = worst.max(r.max_abs_diff(&expect).unwrap());
        }
    }
    check(worst < 1e-9, format!("max elementwise error {worst:.2e}"))
}

fn noise_free_detection() -> Outcome {
    let cfg = ExperimentConfig::default();
    let link = SensingLink::new(&cfg, 64).map_err(|e| e.to_string())?;
    let geom = link.geom;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut misses, mut false_alarms) = (0usize, 0usize);
    for trial in 0..200 {
        let count = if trial % 2 == 0 { 1 } else { 3 };
        let mut delays: Vec<usize> = (0..geom.cp_length()).collect();
        for i in 0..count {
            let j = rng.random_range(i..delays.len());
            delays.swap(i, j);
        }
        let amp = 1.0 / (count as f64).sqrt();
        let paths: Vec<ChannelPath> = delays[..count]
            .iter()
            .map(|&l| {
                let gain = C64::from_polar(amp, rng.random::<f64>() * std::f64::consts::TAU);
                ChannelPath::new(gain, l as f64, rng.random_range(0..geom.n()) as f64)
            })
            .collect();
        let truth: BTreeSet<(usize, usize)> =
            paths.iter().map(|p| (p.doppler_taps as usize, p.delay_taps as usize)).collect();
        let data = Grid::from_fn(Domain::TimeFrequency, geom.m(), geom.n(), |_, _| {
            qam16_point(rng.random_range(0..16u8))
        });
        let x = superimpose(&link.pilot_tf, &data, cfg.power_ratio).unwrap();
        let ch = ChannelRealization::new(paths, geom);
        let y = apply_channel(&ofdm_modulate(&x, &geom).unwrap(), &ch).unwrap();
        let r = sfft(&ofdm_demodulate(&y, &geom).unwrap(), &geom).unwrap();
        let found: BTreeSet<(usize, usize)> = link
            .detect(&r)
            .unwrap()
            .detections
            .iter()
            .map(|d| (d.doppler, d.delay))
            .collect();
        misses += truth.difference(&found).count();
        false_alarms += found.difference(&truth).count();
    }
    check(
        misses == 0 && false_alarms == 0,
        format!("200 placements, {misses} misses, {false_alarms} false alarms"),
    )
}

fn doppler_trend() -> Outcome {
    let cfg = ExperimentConfig {
        snr_db: SnrGrid::single(0.0),
        ..Default::default()
    };
    let rows = run_experiment(&cfg, Experiment::DopplerError).map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut detail = Vec::new();
    let mut prev = [f64::INFINITY; 2];
    for n in &cfg.sensing.doppler_taps {
        let (int, _) = value(&rows, 0.0, &format!("doppler_error_rate_integer_n{n}"));
        let (refd, _) = value(&rows, 0.0, &format!("doppler_error_rate_refined_n{n}"));
        ok &= int < prev[0] && refd < prev[1] && refd < int;
        prev = [int, refd];
        detail.push(format!("N={n}: {int:.4}/{refd:.4}"));
    }
    check(ok, format!("integer/refined {}", detail.join(", ")))
}

fn ber_agreement() -> Outcome {
    let cfg = ExperimentConfig {
        snr_db: SnrGrid {
            start: 0.0,
            stop: 20.0,
            step: 2.0,
        },
        ..Default::default()
    };
    let rows = run_experiment(&cfg, Experiment::BerPerfectCsi).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for snr in cfg.snr_db.points() {
        let (a, sa) = value(&rows, snr, "ber_ofdm");
        let (b, sb) = value(&rows, snr, "ber_spu_ofdm");
        worst = worst.max((a - b).abs() / (2.0 * sa.max(sb)));
    }
    check(
        worst <= 1.0,
        format!("{} frames/point, max |diff| = {worst:.3} x (2 stderr)", cfg.comm.trials),
    )
}

fn nmse_gap() -> Outcome {
    let cfg = ExperimentConfig::default();
    let rows = run_experiment(&cfg, Experiment::Nmse).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for snr in cfg.snr_db.points() {
        let (ofdm, _) = value(&rows, snr, "nmse_ofdm");
        let (eq, _) = value(&rows, snr, "nmse_spu_equivalent_rs");
        worst = worst.max((eq - ofdm).abs());
    }
    let (eq20, _) = value(&rows, 20.0, "nmse_spu_equivalent_rs");
    let (ign20, _) = value(&rows, 20.0, "nmse_spu_pilot_ignorant");
    let penalty = ign20 - eq20;
    check(
        worst <= 1.0 && penalty >= 5.0,
        format!("max gap {worst:.3} dB, pilot-ignorant penalty at 20 dB {penalty:.2} dB"),
    )
}

fn ccdf_concentration() -> Outcome {
    let cfg = ExperimentConfig::default();
    let rows = run_experiment(&cfg, Experiment::Ccdf).map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut detail = Vec::new();
    for source in ["qam", "noise"] {
        let q: Vec<f64> = cfg
            .ccdf
            .sizes
            .iter()
            .map(|n| {
                rows.iter()
                    .find(|r| r.metric == format!("ccdf_{source}_n{n}_q90"))
                    .expect("0.9 quantile row")
                    .value
            })
            .collect();
        ok &= q.windows(2).all(|w| w[1] < w[0]);
        let shown: Vec<String> = q.iter().map(|v| format!("{v:.4}")).collect();
        detail.push(format!("{source} q90 {}", shown.join(" > ")));
    }
    check(ok, detail.join("; "))
}

fn determinism() -> Outcome {
    let mut cfg = ExperimentConfig::default();
    cfg.comm.trials = 20;
    cfg.sensing.trials = 10;
    cfg.ccdf.trials = 50;
    cfg.snr_db = SnrGrid {
        start: 0.0,
        stop: 20.0,
        step: 10.0,
    };
    for e in Experiment::ALL {
        let a = to_csv(&run_experiment(&cfg, e).map_err(|e| e.to_string())?);
        let b = to_csv(&run_experiment(&cfg, e).map_err(|e| e.to_string())?);
        if a != b {
            return Err(format!("{e} output differs between runs"));
        }
    }
    Ok("all five experiments byte-identical across reruns".into())
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("pilot correlation exactness", Duration::from_secs(1), correlation_exactness),
        ("delay-Doppler coupling oracle", Duration::from_secs(5), dd_coupling),
        ("noise-free detection", Duration::from_secs(10), noise_free_detection),
        ("Doppler error trend", Duration::from_secs(600), doppler_trend),
        ("BER with and without pilot", Duration::from_secs(900), ber_agreement),
        ("equivalent-RS NMSE", Duration::from_secs(300), nmse_gap),
        ("correlation CCDF concentration", Duration::from_secs(120), ccdf_concentration),
        ("determinism", Duration::MAX, determinism),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) => (elapsed < *budget, d),
            Err(d) => (false, d),
        };
        let limit = if *budget == Duration::MAX {
            String::new()
        } else {
            format!(" (limit {}s)", budget.as_secs())
        };
        println!(
            "{} {}. {name}: {detail} [{:.2}s{limit}]",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64()
        );
        failed += usize::from(!ok);
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
