//! Monte Carlo experiment runner.
//!
//! Trial `t` draws from `ChaCha8Rng` seeded with the master seed (mixed with a
//! per-experiment salt) on stream `t`, so a trial's draws do not depend on how
//! many threads run or in which order trials finish. Within a trial the
//! channel, payload and unit-variance noise are drawn once and reused for
//! every SNR point and pilot setting.

use std::fmt;
use std::str::FromStr;

use isac_core::channel::{
    add_scaled_noise, apply_channel, fractional_doppler_channel, sample_pdp_channel,
    sample_sensing_targets_with_rng, tf_channel, unit_noise, noise_variance, ChannelRealization,
};
use isac_core::comm::{
    self, build_equivalent_rs, cancel_and_equalize, data_symbols, estimate_channel, plain_rs,
    qam16_demodulate, qam16_point, ChannelEstimate, CsiSource, QamFrame, RsMask,
};
use isac_core::geometry::doppler_from_velocity;
use isac_core::pilot::{build_pilot, Pilot2D};
use isac_core::sensing::{
    correlation_ccdf, detect, CcdfSource, DetectionConfig, SensingReport, Threshold,
};
use isac_core::sequence::m_sequence_for_length;
use isac_core::transform::{isfft, ofdm_demodulate, ofdm_modulate, sfft, superimpose, TimeSignal};
use isac_core::{Domain, FrameGeometry, Grid, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Refinement};
use crate::error::{HarnessError, Result};

/// Data power per TF cell; the SNR reference.
const DATA_POWER: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    BerPerfectCsi,
    BerEstimatedCsi,
    Nmse,
    DopplerError,
    Ccdf,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::BerPerfectCsi,
        Experiment::BerEstimatedCsi,
        Experiment::Nmse,
        Experiment::DopplerError,
        Experiment::Ccdf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::BerPerfectCsi => "ber-perfect-csi",
            Experiment::BerEstimatedCsi => "ber-estimated-csi",
            Experiment::Nmse => "nmse",
            Experiment::DopplerError => "doppler-error",
            Experiment::Ccdf => "ccdf",
        }
    }

    fn salt(self) -> u64 {
        match self {
            Experiment::BerPerfectCsi => 0x1000,
            Experiment::BerEstimatedCsi => 0x2000,
            Experiment::Nmse => 0x3000,
            Experiment::DopplerError => 0x4000,
            Experiment::Ccdf => 0x5000,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
                HarnessError::Config(format!("unknown experiment '{s}' (expected one of {})", names.join(", ")))
            })
    }
}

/// One CSV line.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: Experiment,
    pub snr_db: Option<f64>,
    pub metric: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    pub config_hash: String,
}

pub const CSV_HEADER: &str = "experiment,snr_db,metric,value,stderr,trials,seed,config_hash";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Render rows as CSV (LF line endings).
pub fn to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.experiment,
            opt(r.snr_db),
            r.metric,
            r.value,
            opt(r.stderr),
            r.trials,
            r.seed,
            r.config_hash
        ));
    }
    out
}

/// Independent generator for one trial.
pub fn trial_rng(master_seed: u64, salt: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed ^ salt);
    rng.set_stream(trial as u64);
    rng
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

pub fn summarize(values: &[f64]) -> Summary {
    let n = values.len();
    if n == 0 {
        return Summary {
            mean: f64::NAN,
            stderr: f64::NAN,
            count: 0,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let stderr = if n > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    Summary { mean, stderr, count: n }
}

/// `(1/p)·Σ |(est − truth) / truth|` over targets with nonzero truth. Zero
/// truths are skipped with a warning; `None` when nothing is left.
pub fn doppler_error_rate(estimates: &[f64], truths: &[f64]) -> Result<Option<f64>> {
    if estimates.len() != truths.len() {
        return Err(HarnessError::Config(format!(
            "{} estimates for {} truths",
            estimates.len(),
            truths.len()
        )));
    }
    let mut sum = 0.0;
    let mut used = 0usize;
    for (e, t) in estimates.iter().zip(truths) {
        if *t == 0.0 {
            log::warn!("skipping a target with zero Doppler in the error rate");
            continue;
        }
        sum += ((e - t) / t).abs();
        used += 1;
    }
    Ok((used > 0).then(|| sum / used as f64))
}

/// Run one experiment.
pub fn run_experiment(cfg: &ExperimentConfig, experiment: Experiment) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    match experiment {
        Experiment::BerPerfectCsi | Experiment::BerEstimatedCsi | Experiment::Nmse => run_comm(cfg, experiment),
        Experiment::DopplerError => run_doppler(cfg),
        Experiment::Ccdf => run_ccdf(cfg),
    }
}

#[derive(Debug, Clone, Copy)]
enum CommMetric {
    Ber,
    Nmse,
}

#[derive(Debug, Clone, Copy)]
struct Variant {
    metric: &'static str,
    pilot_on: bool,
    csi: CsiSource,
}

fn comm_variants(experiment: Experiment) -> (CommMetric, Vec<Variant>) {
    let v = |metric, pilot_on, csi| Variant { metric, pilot_on, csi };
    match experiment {
        Experiment::BerPerfectCsi => (
            CommMetric::Ber,
            vec![
                v("ber_ofdm", false, CsiSource::Perfect),
                v("ber_spu_ofdm", true, CsiSource::Perfect),
            ],
        ),
        Experiment::BerEstimatedCsi => (
            CommMetric::Ber,
            vec![
                v("ber_ofdm", false, CsiSource::EquivalentRs),
                v("ber_spu_ofdm", true, CsiSource::EquivalentRs),
                v("ber_spu_pilot_ignorant", true, CsiSource::PilotIgnorantRs),
            ],
        ),
        _ => (
            CommMetric::Nmse,
            vec![
                v("nmse_ofdm", false, CsiSource::EquivalentRs),
                v("nmse_spu_equivalent_rs", true, CsiSource::EquivalentRs),
                v("nmse_spu_pilot_ignorant", true, CsiSource::PilotIgnorantRs),
            ],
        ),
    }
}

/// Fixed parts of the communication link.
pub struct CommLink {
    pub geom: FrameGeometry,
    pub rs: RsMask,
    /// Unit-power TF pilot.
    pub pilot_tf: Grid,
    pub power_ratio: f64,
    pub max_doppler_hz: f64,
    pub refinement: comm::Refinement,
    pub min_reference: f64,
    pdp: isac_core::channel::PowerDelayProfile,
}

impl CommLink {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let c = &cfg.comm;
        let geom = c.geometry()?;
        let mut symbols = vec![0, geom.n() / 2];
        symbols.dedup();
        let rs = RsMask::comb(&geom, c.rs_spacing, &symbols, c.rs_seed)?;
        let pilot = sensing_pilot(&geom)?;
        Ok(Self {
            geom,
            rs,
            pilot_tf: isfft(pilot.matrix(), &geom)?,
            power_ratio: cfg.power_ratio,
            max_doppler_hz: doppler_from_velocity(c.velocity_kmh, cfg.carrier_hz),
            refinement: match c.refinement {
                Refinement::Ls => comm::Refinement::LeastSquares,
                Refinement::Mmse => comm::Refinement::Mmse { channel_power: 1.0 },
            },
            min_reference: c.min_reference,
            pdp: c.pdp.profile()?,
        })
    }

    pub fn draw_channel<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ChannelRealization> {
        Ok(sample_pdp_channel(rng, &self.pdp, self.max_doppler_hz, &self.geom)?)
    }

    /// Transmitted TF pilot, `√ρ·P_tf`, or zero with the pilot off.
    pub fn scaled_pilot(&self, pilot_on: bool) -> Grid {
        let amp = if pilot_on { self.power_ratio.sqrt() } else { 0.0 };
        self.pilot_tf.scaled(C64::new(amp, 0.0))
    }

    /// Noise-free received time signal.
    pub fn transmit(&self, frame: &QamFrame, ch: &ChannelRealization, pilot_on: bool) -> Result<TimeSignal> {
        let rho = if pilot_on { self.power_ratio } else { 0.0 };
        let x = superimpose(&self.pilot_tf, frame.grid(), rho)?;
        Ok(apply_channel(&ofdm_modulate(&x, &self.geom)?, ch)?)
    }

    pub fn estimate(
        &self,
        y: &Grid,
        frame: &QamFrame,
        truth: &Grid,
        pilot_on: bool,
        csi: CsiSource,
        noise_var: f64,
    ) -> Result<ChannelEstimate> {
        let refs = match csi {
            CsiSource::Perfect => return Ok(ChannelEstimate::perfect(truth.clone())),
            CsiSource::EquivalentRs => {
                build_equivalent_rs(&self.rs, frame.grid(), &self.scaled_pilot(pilot_on), self.min_reference)?
            }
            CsiSource::PilotIgnorantRs => plain_rs(&self.rs),
        };
        Ok(estimate_channel(y, &refs, csi, self.refinement, noise_var)?)
    }
}

/// Pilot for a frame: m-sequences of the longest natural length that fits
/// each axis, cyclically extended; the two axes use different polynomials.
pub fn sensing_pilot(geom: &FrameGeometry) -> Result<Pilot2D> {
    let a = m_sequence_for_length(geom.n(), 0)?;
    let b = m_sequence_for_length(geom.m(), 1)?;
    Ok(build_pilot(&a, &b, geom)?)
}

fn comm_trial(
    link: &CommLink,
    variants: &[Variant],
    metric: CommMetric,
    snrs: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let ch = link.draw_channel(rng)?;
    let frame = QamFrame::random(rng, &link.rs)?;
    let noise = unit_noise(rng, link.geom.frame_len());
    let truth = tf_channel(&ch, &link.geom)?;
    let clean_off = link.transmit(&frame, &ch, false)?;
    let clean_on = link.transmit(&frame, &ch, true)?;

    let mut out = Vec::with_capacity(snrs.len() * variants.len());
    for &snr in snrs {
        let var = noise_variance(snr, DATA_POWER)?;
        let y_off = ofdm_demodulate(&add_scaled_noise(&clean_off, &noise, var)?, &link.geom)?;
        let y_on = ofdm_demodulate(&add_scaled_noise(&clean_on, &noise, var)?, &link.geom)?;
        for v in variants {
            let y = if v.pilot_on { &y_on } else { &y_off };
            let est = link.estimate(y, &frame, &truth, v.pilot_on, v.csi, var)?;
            out.push(match metric {
                CommMetric::Nmse => comm::nmse(&est.h_tf, &truth)?,
                CommMetric::Ber => {
                    let eq = cancel_and_equalize(y, &est, &link.scaled_pilot(v.pilot_on), var)?;
                    let bits = qam16_demodulate(&data_symbols(&eq.symbols, &link.rs));
                    comm::ber(frame.bits(), &bits)?
                }
            });
        }
    }
    Ok(out)
}

fn to_db(mean: f64, stderr: f64) -> (f64, f64) {
    (10.0 * mean.log10(), 10.0 / std::f64::consts::LN_10 * stderr / mean)
}

fn run_comm(cfg: &ExperimentConfig, experiment: Experiment) -> Result<Vec<ResultRow>> {
    let link = CommLink::new(cfg)?;
    let (metric, variants) = comm_variants(experiment);
    let snrs = cfg.snr_db.points();
    let trials = cfg.comm.trials;
    let per_trial: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(cfg.seed, experiment.salt(), t);
            comm_trial(&link, &variants, metric, &snrs, &mut rng)
        })
        .collect::<Result<_>>()?;

    let hash = cfg.config_hash();
    let mut rows = Vec::new();
    for (si, &snr) in snrs.iter().enumerate() {
        for (vi, v) in variants.iter().enumerate() {
            let idx = si * variants.len() + vi;
            let samples: Vec<f64> = per_trial.iter().map(|t| t[idx]).collect();
            let s = summarize(&samples);
            let (value, stderr) = match metric {
                CommMetric::Ber => (s.mean, s.stderr),
                CommMetric::Nmse => to_db(s.mean, s.stderr),
            };
            rows.push(ResultRow {
                experiment,
                snr_db: Some(snr),
                metric: v.metric.to_string(),
                value,
                stderr: Some(stderr),
                trials,
                seed: cfg.seed,
                config_hash: hash.clone(),
            });
        }
    }
    Ok(rows)
}

/// One sensing frame setup for a given Doppler size.
pub struct SensingLink {
    pub geom: FrameGeometry,
    pub pilot: Pilot2D,
    pub pilot_tf: Grid,
    pub detection: DetectionConfig,
    pub power_ratio: f64,
    pub max_doppler_hz: f64,
    pub targets: usize,
}

impl SensingLink {
    pub fn new(cfg: &ExperimentConfig, doppler_taps: usize) -> Result<Self> {
        let s = &cfg.sensing;
        let geom = s.geometry(doppler_taps)?;
        let pilot = sensing_pilot(&geom)?;
        let detection = DetectionConfig {
            threshold: Threshold::MedianRelative(s.threshold_factor),
            sidelobe_guard: s.sidelobe_guard,
            refine_width: s.refine_width,
            ..DetectionConfig::for_geometry(&geom)
        };
        Ok(Self {
            pilot_tf: isfft(pilot.matrix(), &geom)?,
            geom,
            pilot,
            detection,
            power_ratio: cfg.power_ratio,
            max_doppler_hz: doppler_from_velocity(s.max_velocity_kmh, cfg.carrier_hz),
            targets: s.targets,
        })
    }

    /// Draw targets, payload and unit noise for one frame.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SensingFrame> {
        let targets = sample_sensing_targets_with_rng(rng, self.targets, self.max_doppler_hz, &self.geom)?;
        let (m, n) = (self.geom.m(), self.geom.n());
        let data = Grid::from_fn(Domain::TimeFrequency, m, n, |_, _| qam16_point(rng.random_range(0..16u8)));
        let noise = unit_noise(rng, self.geom.frame_len());
        let x = superimpose(&self.pilot_tf, &data, self.power_ratio)?;
        let clean = fractional_doppler_channel(&ofdm_modulate(&x, &self.geom)?, &targets.paths)?;
        Ok(SensingFrame { targets, clean, noise })
    }

    /// Received DD grid at an SNR.
    pub fn receive(&self, frame: &SensingFrame, snr_db: f64) -> Result<Grid> {
        let var = noise_variance(snr_db, DATA_POWER)?;
        let y = add_scaled_noise(&frame.clean, &frame.noise, var)?;
        Ok(sfft(&ofdm_demodulate(&y, &self.geom)?, &self.geom)?)
    }

    pub fn detect(&self, r: &Grid) -> Result<SensingReport> {
        Ok(detect(r, &self.pilot, &self.detection, &self.geom)?)
    }
}

pub struct SensingFrame {
    pub targets: ChannelRealization,
    pub clean: TimeSignal,
    pub noise: Vec<C64>,
}

/// Doppler estimates assigned to one target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetEstimate {
    pub truth: f64,
    pub integer: f64,
    pub refined: f64,
    pub missed: bool,
}

fn unwrap_near(value: f64, truth: f64, period: f64) -> f64 {
    value - ((value - truth) / period).round() * period
}

/// Pair each true target with the detection on its delay row nearest in
/// (cyclic) Doppler. A target with no detection on its row is a miss and is
/// given an estimate of zero, i.e. an error rate of one.
pub fn associate(report: &SensingReport, targets: &ChannelRealization, period: usize) -> Vec<TargetEstimate> {
    let period = period as f64;
    targets
        .paths
        .iter()
        .map(|p| {
            let truth = p.doppler_taps;
            let best = report
                .detections
                .iter()
                .enumerate()
                .filter(|(_, d)| d.delay as f64 == p.delay_taps)
                .min_by(|(_, a), (_, b)| {
                    let da = (unwrap_near(a.doppler as f64, truth, period) - truth).abs();
                    let db = (unwrap_near(b.doppler as f64, truth, period) - truth).abs();
                    da.total_cmp(&db)
                });
            match best {
                Some((i, d)) => {
                    let refined = report.refined.get(i).map(|r| r.doppler).unwrap_or(d.doppler as f64);
                    TargetEstimate {
                        truth,
                        integer: unwrap_near(d.doppler as f64, truth, period),
                        refined: unwrap_near(refined, truth, period),
                        missed: false,
                    }
                }
                None => TargetEstimate {
                    truth,
                    integer: 0.0,
                    refined: 0.0,
                    missed: true,
                },
            }
        })
        .collect()
}

/// Per trial and SNR: (integer error rate, refined error rate, miss fraction).
type DopplerSample = Option<(f64, f64, f64)>;

fn doppler_trial(link: &SensingLink, snrs: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<DopplerSample>> {
    let frame = link.draw(rng)?;
    snrs.iter()
        .map(|&snr| {
            let report = link.detect(&link.receive(&frame, snr)?)?;
            let est = associate(&report, &frame.targets, link.geom.n());
            let truths: Vec<f64> = est.iter().map(|e| e.truth).collect();
            let ints: Vec<f64> = est.iter().map(|e| e.integer).collect();
            let refs: Vec<f64> = est.iter().map(|e| e.refined).collect();
            let miss = est.iter().filter(|e| e.missed).count() as f64 / est.len() as f64;
            let a = doppler_error_rate(&ints, &truths)?;
            let b = doppler_error_rate(&refs, &truths)?;
            Ok(a.zip(b).map(|(a, b)| (a, b, miss)))
        })
        .collect()
}

fn run_doppler(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let snrs = cfg.snr_db.points();
    let trials = cfg.sensing.trials;
    let hash = cfg.config_hash();
    let mut rows = Vec::new();
    for (ni, &n) in cfg.sensing.doppler_taps.iter().enumerate() {
        let link = SensingLink::new(cfg, n)?;
        let salt = Experiment::DopplerError.salt() + ni as u64;
        let per_trial: Vec<Vec<DopplerSample>> = (0..trials)
            .into_par_iter()
            .map(|t| doppler_trial(&link, &snrs, &mut trial_rng(cfg.seed, salt, t)))
            .collect::<Result<_>>()?;
        for (si, &snr) in snrs.iter().enumerate() {
            let valid: Vec<(f64, f64, f64)> = per_trial.iter().filter_map(|t| t[si]).collect();
            let columns: [(String, Vec<f64>); 3] = [
                (format!("doppler_error_rate_integer_n{n}"), valid.iter().map(|v| v.0).collect()),
                (format!("doppler_error_rate_refined_n{n}"), valid.iter().map(|v| v.1).collect()),
                (format!("miss_rate_n{n}"), valid.iter().map(|v| v.2).collect()),
            ];
            for (metric, samples) in columns {
                let s = summarize(&samples);
                rows.push(ResultRow {
                    experiment: Experiment::DopplerError,
                    snr_db: Some(snr),
                    metric,
                    value: s.mean,
                    stderr: Some(s.stderr),
                    trials: s.count,
                    seed: cfg.seed,
                    config_hash: hash.clone(),
                });
            }
        }
    }
    Ok(rows)
}

fn source_name(source: CcdfSource) -> &'static str {
    match source {
        CcdfSource::QamData => "qam",
        CcdfSource::Noise => "noise",
    }
}

fn run_ccdf(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let k = &cfg.ccdf;
    let jobs: Vec<(usize, CcdfSource)> = k
        .sizes
        .iter()
        .flat_map(|&s| [(s, CcdfSource::QamData), (s, CcdfSource::Noise)])
        .collect();
    let tables = jobs
        .par_iter()
        .enumerate()
        .map(|(i, &(size, source))| {
            let seed = cfg.seed ^ Experiment::Ccdf.salt() ^ ((i as u64) << 32);
            correlation_ccdf(size, source, k.trials, seed)
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let hash = cfg.config_hash();
    let mut rows = Vec::new();
    for ((size, source), table) in jobs.iter().zip(&tables) {
        let base = format!("ccdf_{}_n{size}", source_name(*source));
        let s = summarize(table.samples());
        let mut push = |metric: String, value: f64| {
            rows.push(ResultRow {
                experiment: Experiment::Ccdf,
                snr_db: None,
                metric,
                value,
                stderr: None,
                trials: k.trials,
                seed: cfg.seed,
                config_hash: hash.clone(),
            })
        };
        push(format!("{base}_mean"), s.mean);
        for &q in &k.quantiles {
            push(format!("{base}_q{}", q * 100.0), table.quantile(q));
        }
    }
    Ok(rows)
}

/// Correlation map of one sensing frame, for plotting.
pub fn single_map(cfg: &ExperimentConfig, doppler_taps: usize, snr_db: f64) -> Result<(SensingReport, ChannelRealization)> {
    let link = SensingLink::new(cfg, doppler_taps)?;
    let mut rng = trial_rng(cfg.seed, Experiment::DopplerError.salt(), 0);
    let frame = link.draw(&mut rng)?;
    let report = link.detect(&link.receive(&frame, snr_db)?)?;
    Ok((report, frame.targets))
}
