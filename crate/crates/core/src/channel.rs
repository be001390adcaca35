//! Discrete-time delay-Doppler multipath channel.
//!
//! A path with gain `h`, delay `l` taps and Doppler `k` taps acts on the frame
//! samples as `y[t] += h·x[t − l]·exp(j2π·k·(t − l) / (N(M+L_cp)))`, with `t`
//! the sample index inside the frame and `x[t] = 0` for `t < 0`. Delays must be
//! integers that the cyclic prefix absorbs; Doppler may be fractional.

use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::geometry::{doppler_from_velocity, FrameGeometry};
use crate::grid::{Domain, Grid};
use crate::transform::TimeSignal;
use crate::C64;

/// One propagation path or radar echo.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelPath {
    pub gain: C64,
    /// Delay in samples at rate `M·Δf`.
    pub delay_taps: f64,
    /// Doppler in taps of width [`FrameGeometry::doppler_bin_width`].
    pub doppler_taps: f64,
}

impl ChannelPath {
    pub fn new(gain: C64, delay_taps: f64, doppler_taps: f64) -> Self {
        Self {
            gain,
            delay_taps,
            doppler_taps,
        }
    }
}

/// A set of paths tied to the frame geometry they were drawn for.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub paths: Vec<ChannelPath>,
    pub geometry: FrameGeometry,
    pub rng_seed: Option<u64>,
}

impl ChannelRealization {
    pub fn new(paths: Vec<ChannelPath>, geometry: FrameGeometry) -> Self {
        Self {
            paths,
            geometry,
            rng_seed: None,
        }
    }

    /// `Σ|h_i|²`.
    pub fn total_power(&self) -> f64 {
        self.paths.iter().map(|p| p.gain.norm_sqr()).sum()
    }

    /// Largest delay tap, rounded up.
    pub fn max_delay_taps(&self) -> usize {
        self.paths
            .iter()
            .map(|p| p.delay_taps.ceil() as usize)
            .max()
            .unwrap_or(0)
    }
}

fn integer_delay(path: &ChannelPath, geom: &FrameGeometry) -> Result<usize> {
    let l = path.delay_taps;
    if !(l.is_finite() && l >= 0.0) {
        return Err(invalid(format!("delay {l} must be a non-negative number")));
    }
    if l.fract() != 0.0 {
        return Err(invalid(format!("fractional delay {l} is not supported")));
    }
    let l = l as usize;
    if l > 0 && l >= geom.cp_length() {
        return Err(Error::Config(format!(
            "delay of {l} taps is not covered by a cyclic prefix of {}",
            geom.cp_length()
        )));
    }
    Ok(l)
}

/// Pass a frame through the multipath channel.
///
/// Every delay must be an integer below `L_cp` (zero delay is always allowed).
pub fn apply_channel(sig: &TimeSignal, ch: &ChannelRealization) -> Result<TimeSignal> {
    apply_paths(sig, &ch.paths)
}

/// Same operator as [`apply_channel`]; named for the fractional-Doppler use,
/// which needs nothing beyond a real-valued phase ramp.
pub fn fractional_doppler_channel(sig: &TimeSignal, paths: &[ChannelPath]) -> Result<TimeSignal> {
    apply_paths(sig, paths)
}

fn apply_paths(sig: &TimeSignal, paths: &[ChannelPath]) -> Result<TimeSignal> {
    let geom = *sig.geometry();
    let span = geom.frame_len() as f64;
    let x = sig.samples();
    let mut y = TimeSignal::zeros(geom);
    let out = y.samples_mut();
    for path in paths {
        let l = integer_delay(path, &geom)?;
        if !path.doppler_taps.is_finite() {
            return Err(invalid("Doppler must be finite"));
        }
        let step = 2.0 * PI * path.doppler_taps / span;
        for t in l..x.len() {
            let s = (t - l) as f64;
            out[t] += path.gain * x[t - l] * C64::from_polar(1.0, step * s);
        }
    }
    Ok(y)
}

/// One-tap TF channel seen by each subcarrier/symbol, ignoring inter-carrier
/// leakage: the diagonal of `F_M·H_n·F_M^H` for every symbol `n`.
pub fn tf_channel(ch: &ChannelRealization, geom: &FrameGeometry) -> Result<Grid> {
    let (m, n) = (geom.m(), geom.n());
    let span = geom.frame_len() as f64;
    let mut out = Grid::zeros(Domain::TimeFrequency, m, n);
    for path in &ch.paths {
        let l = integer_delay(path, geom)?;
        let step = 2.0 * PI * path.doppler_taps / span;
        for sym in 0..n {
            let start = (sym * geom.symbol_len() + geom.cp_length()) as f64 - l as f64;
            let avg: C64 = (0..m)
                .map(|i| C64::from_polar(1.0, step * (start + i as f64)))
                .sum::<C64>()
                / m as f64;
            for f in 0..m {
                let delay_phase = C64::from_polar(1.0, -2.0 * PI * ((f * l) % m) as f64 / m as f64);
                let cur = out.get(f, sym);
                out.set(f, sym, cur + path.gain * delay_phase * avg);
            }
        }
    }
    Ok(out)
}

/// Power delay profile: path delays in nanoseconds and relative powers in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerDelayProfile {
    pub delays_ns: Vec<f64>,
    pub powers_db: Vec<f64>,
}

impl PowerDelayProfile {
    /// Extended Vehicular A.
    pub fn eva() -> Self {
        Self {
            delays_ns: alloc::vec![0.0, 30.0, 150.0, 310.0, 370.0, 710.0, 1090.0, 1730.0, 2510.0],
            powers_db: alloc::vec![0.0, -1.5, -1.4, -3.6, -0.6, -9.1, -7.0, -12.0, -16.9],
        }
    }

    pub fn new(delays_ns: Vec<f64>, powers_db: Vec<f64>) -> Result<Self> {
        let pdp = Self { delays_ns, powers_db };
        pdp.validate()?;
        Ok(pdp)
    }

    pub fn validate(&self) -> Result<()> {
        if self.delays_ns.is_empty() || self.delays_ns.len() != self.powers_db.len() {
            return Err(Error::Config(format!(
                "power delay profile needs matching non-empty delay and power lists ({} vs {})",
                self.delays_ns.len(),
                self.powers_db.len()
            )));
        }
        if self.delays_ns.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::Config("path delays must be non-negative".into()));
        }
        if self.powers_db.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config("path powers must be finite".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.delays_ns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays_ns.is_empty()
    }

    /// Delays rounded to the nearest sample at rate `M·Δf`.
    pub fn delay_taps(&self, geom: &FrameGeometry) -> Vec<usize> {
        self.delays_ns
            .iter()
            .map(|d| geom.delay_s_to_taps(d * 1e-9).round() as usize)
            .collect()
    }
}

/// Circularly-symmetric complex Gaussian sample with variance `var`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * s, im * s)
}

/// Draw a multipath channel from a power delay profile.
///
/// Gains are complex Gaussian with the profile's powers, rescaled so the
/// realized total power is one. Each path's Doppler is uniform in
/// `[−max_doppler_hz, max_doppler_hz]`.
pub fn sample_pdp_channel<R: Rng + ?Sized>(
    rng: &mut R,
    pdp: &PowerDelayProfile,
    max_doppler_hz: f64,
    geom: &FrameGeometry,
) -> Result<ChannelRealization> {
    pdp.validate()?;
    let taps = pdp.delay_taps(geom);
    let mut paths: Vec<ChannelPath> = taps
        .iter()
        .zip(&pdp.powers_db)
        .map(|(&l, &p_db)| {
            let gain = complex_gaussian(rng, 10f64.powf(p_db / 10.0));
            let u: f64 = rng.random();
            let doppler = (2.0 * u - 1.0) * max_doppler_hz;
            ChannelPath::new(gain, l as f64, geom.doppler_hz_to_taps(doppler))
        })
        .collect();
    let total: f64 = paths.iter().map(|p| p.gain.norm_sqr()).sum();
    if total > 0.0 {
        let s = 1.0 / total.sqrt();
        for p in &mut paths {
            p.gain *= s;
        }
    }
    let ch = ChannelRealization::new(paths, *geom);
    integer_delay_all(&ch)?;
    Ok(ch)
}

fn integer_delay_all(ch: &ChannelRealization) -> Result<()> {
    for p in &ch.paths {
        integer_delay(p, &ch.geometry)?;
    }
    Ok(())
}

/// EVA channel with Doppler spread `max_doppler_hz`, seeded.
pub fn sample_eva_channel(seed: u64, max_doppler_hz: f64, geom: &FrameGeometry) -> Result<ChannelRealization> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ch = sample_pdp_channel(&mut rng, &PowerDelayProfile::eva(), max_doppler_hz, geom)?;
    ch.rng_seed = Some(seed);
    Ok(ch)
}

/// Point targets for sensing: equal magnitudes `1/√count`, uniform phases,
/// distinct integer delays in `[0, L_cp)` and Doppler uniform in
/// `(0, max_doppler_hz)`.
pub fn sample_sensing_targets_with_rng<R: Rng + ?Sized>(
    rng: &mut R,
    count: usize,
    max_doppler_hz: f64,
    geom: &FrameGeometry,
) -> Result<ChannelRealization> {
    let cp = geom.cp_length().max(1);
    if count == 0 || count > cp {
        return Err(invalid(format!(
            "target count {count} must be between 1 and the {cp} available delay taps"
        )));
    }
    let mut delays: Vec<usize> = (0..cp).collect();
    // partial Fisher-Yates: the first `count` entries are a uniform draw
    for i in 0..count {
        let j = rng.random_range(i..cp);
        delays.swap(i, j);
    }
    let amp = 1.0 / (count as f64).sqrt();
    let paths = delays[..count]
        .iter()
        .map(|&l| {
            let phase: f64 = rng.random::<f64>() * 2.0 * PI;
            let u: f64 = rng.random();
            ChannelPath::new(
                C64::from_polar(amp, phase),
                l as f64,
                geom.doppler_hz_to_taps(u * max_doppler_hz),
            )
        })
        .collect();
    Ok(ChannelRealization::new(paths, *geom))
}

/// Seeded form of [`sample_sensing_targets_with_rng`]; `max_velocity_kmh`
/// is converted to Doppler at `carrier_hz`.
pub fn sample_sensing_targets(
    seed: u64,
    count: usize,
    max_velocity_kmh: f64,
    carrier_hz: f64,
    geom: &FrameGeometry,
) -> Result<ChannelRealization> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_doppler = doppler_from_velocity(max_velocity_kmh, carrier_hz);
    let mut ch = sample_sensing_targets_with_rng(&mut rng, count, max_doppler, geom)?;
    ch.rng_seed = Some(seed);
    Ok(ch)
}

/// Noise variance `ref_power / 10^(snr_db/10)`; zero for `snr_db = +∞`.
pub fn noise_variance(snr_db: f64, signal_power_ref: f64) -> Result<f64> {
    if !(signal_power_ref > 0.0 && signal_power_ref.is_finite()) {
        return Err(invalid("reference signal power must be positive"));
    }
    if snr_db.is_nan() {
        return Err(invalid("SNR must not be NaN"));
    }
    if snr_db == f64::INFINITY {
        return Ok(0.0);
    }
    Ok(signal_power_ref / 10f64.powf(snr_db / 10.0))
}

/// `len` independent unit-variance complex Gaussian samples.
pub fn unit_noise<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<C64> {
    (0..len).map(|_| complex_gaussian(rng, 1.0)).collect()
}

/// Add `sqrt(σ²)·noise` to the signal; `noise` must be unit variance.
pub fn add_scaled_noise(sig: &TimeSignal, noise: &[C64], variance: f64) -> Result<TimeSignal> {
    if noise.len() != sig.len() {
        return Err(invalid(format!(
            "noise has {} samples, signal {}",
            noise.len(),
            sig.len()
        )));
    }
    let s = variance.sqrt();
    let samples = sig.samples().iter().zip(noise).map(|(x, w)| x + w * s).collect();
    TimeSignal::new(samples, *sig.geometry())
}

/// Add AWGN drawn from `rng`; returns the noisy signal and `σ²`.
pub fn add_awgn_with_rng<R: Rng + ?Sized>(
    rng: &mut R,
    sig: &TimeSignal,
    snr_db: f64,
    signal_power_ref: f64,
) -> Result<(TimeSignal, f64)> {
    let var = noise_variance(snr_db, signal_power_ref)?;
    if var == 0.0 {
        return Ok((sig.clone(), 0.0));
    }
    let noise = unit_noise(rng, sig.len());
    Ok((add_scaled_noise(sig, &noise, var)?, var))
}

/// Seeded AWGN; returns the noisy signal and `σ²`.
pub fn add_awgn(sig: &TimeSignal, snr_db: f64, signal_power_ref: f64, seed: u64) -> Result<(TimeSignal, f64)> {
    add_awgn_with_rng(&mut ChaCha8Rng::seed_from_u64(seed), sig, snr_db, signal_power_ref)
}
