//! Correlation-based delay-Doppler detector.
//!
//! Each `(doppler, delay)` hypothesis correlates the received DD grid with the
//! correspondingly shifted, phase-compensated pilot. The map is normalized so a
//! lone matched path of gain `h` scores `|h|` per unit of pilot amplitude.
//! Detections are the local maxima of the map above a threshold.
//!
//! Under [`PhaseModel::PerSymbolCp`] the phase matrix depends on the delay row
//! only, so the Doppler correlation of every row is taken once with a DFT and
//! each hypothesis costs `O(M)`. Other models fall back to the literal inner
//! product per hypothesis.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{complex_gaussian, ChannelPath};
use crate::comm::qam16_point;
use crate::dft::{cyclic_xcorr_with, Dft};
use crate::error::{invalid, Result};
use crate::geometry::FrameGeometry;
use crate::grid::{Domain, Grid};
use crate::pilot::{build_pilot, cyclic_shift_2d, inner_product_2d, phase_matrix, row_phase, PhaseModel, Pilot2D};
use crate::sequence::default_m_sequence;
use crate::transform::isfft;
use crate::C64;

/// Detection threshold on the normalized map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// `factor × median(map)`.
    MedianRelative(f64),
    /// Fixed level.
    Absolute(f64),
}

impl Default for Threshold {
    fn default() -> Self {
        Threshold::MedianRelative(8.0)
    }
}

/// Cells a candidate peak is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PeakNeighbourhood {
    /// Doppler neighbours `k ± 1` on the same delay row. Fractional Doppler
    /// leaks along this axis only, and targets on adjacent delay rows stay
    /// separate.
    #[default]
    DopplerAxis,
    /// All eight surrounding cells.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionConfig {
    /// Largest Doppler hypothesis (taps).
    pub k_max: usize,
    /// Largest delay hypothesis (taps).
    pub l_max: usize,
    pub threshold: Threshold,
    pub neighbourhood: PeakNeighbourhood,
    /// Floor of `guard × (ε_a + ε_b) × max(map)` on the threshold, where `ε`
    /// are the pilot components' peak periodic-autocorrelation sidelobes.
    /// Zero disables it.
    pub sidelobe_guard: f64,
    pub refine: bool,
    /// Odd window width for refinement.
    pub refine_width: usize,
    pub refine_delay: bool,
    pub compensate_phase: bool,
    pub phase_model: PhaseModel,
}

impl DetectionConfig {
    /// Full Doppler axis and every delay the CP can hold.
    pub fn for_geometry(geom: &FrameGeometry) -> Self {
        Self {
            k_max: geom.n() - 1,
            l_max: geom.cp_length().max(1) - 1,
            threshold: Threshold::default(),
            neighbourhood: PeakNeighbourhood::default(),
            sidelobe_guard: 2.0,
            refine: true,
            refine_width: 3,
            refine_delay: false,
            compensate_phase: true,
            phase_model: PhaseModel::default(),
        }
    }

    pub fn validate(&self, geom: &FrameGeometry) -> Result<()> {
        if self.k_max >= geom.n() {
            return Err(invalid(format!("k_max {} must be below N = {}", self.k_max, geom.n())));
        }
        let delay_limit = geom.m().min(geom.cp_length().max(1));
        if self.l_max >= delay_limit {
            return Err(invalid(format!("l_max {} must be below {delay_limit}", self.l_max)));
        }
        if self.refine_width == 0 || self.refine_width.is_multiple_of(2) {
            return Err(invalid("refinement width must be odd and positive"));
        }
        let level = match self.threshold {
            Threshold::MedianRelative(x) | Threshold::Absolute(x) => x,
        };
        if !(level >= 0.0 && level.is_finite()) {
            return Err(invalid("threshold must be finite and non-negative"));
        }
        if !(self.sidelobe_guard >= 0.0 && self.sidelobe_guard.is_finite()) {
            return Err(invalid("sidelobe guard must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Normalized correlation magnitudes over the hypothesis window.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMap {
    /// `values[k * delays + l]`.
    values: Vec<f64>,
    dopplers: usize,
    delays: usize,
    doppler_period: usize,
}

impl CorrelationMap {
    pub fn new(values: Vec<f64>, dopplers: usize, delays: usize, doppler_period: usize) -> Result<Self> {
        if values.len() != dopplers * delays || dopplers == 0 || delays == 0 {
            return Err(invalid("map dimensions do not match its values"));
        }
        if dopplers > doppler_period {
            return Err(invalid("map spans more Doppler taps than the frame has"));
        }
        Ok(Self {
            values,
            dopplers,
            delays,
            doppler_period,
        })
    }

    pub fn get(&self, doppler: usize, delay: usize) -> f64 {
        self.values[doppler * self.delays + delay]
    }

    /// Number of Doppler hypotheses, `k_max + 1`.
    pub fn dopplers(&self) -> usize {
        self.dopplers
    }

    /// Number of delay hypotheses, `l_max + 1`.
    pub fn delays(&self) -> usize {
        self.delays
    }

    /// True when the map covers the whole Doppler axis and wraps around.
    pub fn doppler_cyclic(&self) -> bool {
        self.dopplers == self.doppler_period
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn median(&self) -> f64 {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }

    /// `(doppler, delay)` with the largest value; earliest wins ties.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        (best / self.delays, best % self.delays)
    }

    fn neighbour_doppler(&self, k: usize, step: i64) -> Option<usize> {
        let t = k as i64 + step;
        if self.doppler_cyclic() {
            Some(t.rem_euclid(self.dopplers as i64) as usize)
        } else if t >= 0 && (t as usize) < self.dopplers {
            Some(t as usize)
        } else {
            None
        }
    }

    /// Whether `(k, l)` is a local maximum over the given neighbourhood.
    /// Equal neighbours are broken by scan order so a plateau yields one
    /// maximum.
    pub fn is_local_max(&self, k: usize, l: usize, neighbourhood: PeakNeighbourhood) -> bool {
        let here = k * self.delays + l;
        let v = self.values[here];
        let reach = match neighbourhood {
            PeakNeighbourhood::DopplerAxis => 0,
            PeakNeighbourhood::Full => 1,
        };
        for dk in -1..=1i64 {
            let Some(nk) = self.neighbour_doppler(k, dk) else { continue };
            for dl in -reach..=reach {
                let nl = l as i64 + dl;
                if nl < 0 || nl as usize >= self.delays {
                    continue;
                }
                let there = nk * self.delays + nl as usize;
                if there == here {
                    continue;
                }
                let w = self.values[there];
                if (there < here && v <= w) || (there > here && v < w) {
                    return false;
                }
            }
        }
        true
    }

    /// Write the map as CSV with header `k,l,vd`.
    pub fn write_csv<W: fmt::Write>(&self, out: &mut W) -> fmt::Result {
        writeln!(out, "k,l,vd")?;
        for k in 0..self.dopplers {
            for l in 0..self.delays {
                writeln!(out, "{k},{l},{}", self.get(k, l))?;
            }
        }
        Ok(())
    }
}

/// An integer-grid detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub doppler: usize,
    pub delay: usize,
    pub metric: f64,
    pub doppler_hz: f64,
    pub delay_s: f64,
}

/// Refined estimate in (fractional) taps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinedEstimate {
    pub doppler: f64,
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensingReport {
    /// Sorted by decreasing metric.
    pub detections: Vec<Detection>,
    /// One entry per detection when refinement is on, otherwise empty.
    pub refined: Vec<RefinedEstimate>,
    pub map: CorrelationMap,
    /// Threshold actually applied.
    pub threshold: f64,
    pub diagnostics: Option<SinrBreakdown>,
}

fn check_inputs(r: &Grid, pilot: &Pilot2D, geom: &FrameGeometry) -> Result<()> {
    r.check_geometry(geom)?;
    pilot.matrix().check_geometry(geom)?;
    if r.domain() != Domain::DelayDoppler {
        return Err(invalid("detector expects a delay-Doppler grid"));
    }
    if pilot.power() <= 0.0 {
        return Err(invalid("pilot has zero power"));
    }
    Ok(())
}

/// Map value of one hypothesis by the literal inner product
/// `|⟨P_[k,l] ⊙ Ξ, R⟩| / pilot power`.
pub fn hypothesis_metric(
    r: &Grid,
    pilot: &Pilot2D,
    hypothesis: (usize, usize),
    compensate_phase: bool,
    model: PhaseModel,
    geom: &FrameGeometry,
) -> Result<f64> {
    check_inputs(r, pilot, geom)?;
    let (k, l) = hypothesis;
    let mut det = pilot.shifted(k as i64, l as i64);
    if compensate_phase {
        det = det.hadamard(phase_matrix(hypothesis, geom, model)?.entries())?;
    }
    Ok(inner_product_2d(&det, r)?.norm() / pilot.power())
}

/// Compute the correlation map over `0..=k_max × 0..=l_max`.
pub fn correlation_map(r: &Grid, pilot: &Pilot2D, cfg: &DetectionConfig, geom: &FrameGeometry) -> Result<CorrelationMap> {
    cfg.validate(geom)?;
    check_inputs(r, pilot, geom)?;
    let (dk, dl) = (cfg.k_max + 1, cfg.l_max + 1);
    let mut values = Vec::with_capacity(dk * dl);
    if cfg.compensate_phase && cfg.phase_model != PhaseModel::PerSymbolCp {
        for k in 0..dk {
            for l in 0..dl {
                values.push(hypothesis_metric(r, pilot, (k, l), true, cfg.phase_model, geom)?);
            }
        }
        return CorrelationMap::new(values, dk, dl, geom.n());
    }

    let (m, n) = (geom.m(), geom.n());
    let plan = Dft::new(n);
    let mut a_spec: Vec<C64> = pilot.a().values().iter().map(|v| C64::new(*v, 0.0)).collect();
    plan.forward(&mut a_spec);
    // xc[l][k] = Σ_t a[t − k]·R[l, t]
    let xc: Vec<Vec<C64>> = (0..m).map(|l| cyclic_xcorr_with(&plan, &a_spec, &r.row(l))).collect();
    let b = pilot.b().values();
    let norm = 1.0 / ((m * n) as f64 * pilot.power());
    for k in 0..dk {
        for l in 0..dl {
            let mut acc = C64::new(0.0, 0.0);
            for (row, xrow) in xc.iter().enumerate() {
                let weight = b[(row + m - l) % m];
                let term = xrow[k] * weight;
                acc += if cfg.compensate_phase {
                    term * row_phase(geom, k as f64, l, row).conj()
                } else {
                    term
                };
            }
            values.push(acc.norm() * norm);
        }
    }
    CorrelationMap::new(values, dk, dl, n)
}

/// Threshold actually applied to a map.
pub fn effective_threshold(map: &CorrelationMap, pilot: &Pilot2D, cfg: &DetectionConfig) -> f64 {
    let base = match cfg.threshold {
        Threshold::MedianRelative(f) => f * map.median(),
        Threshold::Absolute(g) => g,
    };
    let guard = if cfg.sidelobe_guard > 0.0 {
        cfg.sidelobe_guard * (pilot.a().peak_sidelobe() + pilot.b().peak_sidelobe()) * map.max()
    } else {
        0.0
    };
    base.max(guard)
}

/// Run the detector.
pub fn detect(r: &Grid, pilot: &Pilot2D, cfg: &DetectionConfig, geom: &FrameGeometry) -> Result<SensingReport> {
    let map = correlation_map(r, pilot, cfg, geom)?;
    let threshold = effective_threshold(&map, pilot, cfg);
    let mut detections = Vec::new();
    for k in 0..map.dopplers() {
        for l in 0..map.delays() {
            let v = map.get(k, l);
            if v > threshold && map.is_local_max(k, l, cfg.neighbourhood) {
                detections.push(Detection {
                    doppler: k,
                    delay: l,
                    metric: v,
                    doppler_hz: geom.doppler_taps_to_hz(k as f64),
                    delay_s: geom.delay_taps_to_s(l as f64),
                });
            }
        }
    }
    detections.sort_by(|a, b| b.metric.total_cmp(&a.metric));
    let refined = if cfg.refine {
        detections
            .iter()
            .map(|d| RefinedEstimate {
                doppler: refine_doppler(&map, (d.doppler, d.delay), cfg.refine_width),
                delay: if cfg.refine_delay {
                    refine_delay(&map, (d.doppler, d.delay), cfg.refine_width)
                } else {
                    d.delay as f64
                },
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(SensingReport {
        detections,
        refined,
        map,
        threshold,
        diagnostics: None,
    })
}

fn weighted_offset(samples: &[(i64, f64)]) -> f64 {
    let peak = samples.iter().map(|s| s.1).fold(0.0, f64::max);
    if peak <= 0.0 {
        return 0.0;
    }
    let (mut num, mut den) = (0.0, 0.0);
    for &(offset, v) in samples {
        let w = (v / peak).exp();
        num += w * offset as f64;
        den += w;
    }
    num / den
}

/// Fractional Doppler by an exponentially weighted centroid over a window of
/// `width` taps centred on the peak: `ν̂ = k* + Σ w_j·o_j / Σ w_j` with
/// `w_j = exp(p̄_j)` and `p̄_j` the window values divided by their maximum.
/// The window wraps when the map covers the whole Doppler axis, so the result
/// may fall below zero or reach past `N − 1`.
pub fn refine_doppler(map: &CorrelationMap, peak: (usize, usize), width: usize) -> f64 {
    let (k, l) = peak;
    let half = (width / 2) as i64;
    let samples: Vec<(i64, f64)> = (-half..=half)
        .filter_map(|o| map.neighbour_doppler(k, o).map(|nk| (o, map.get(nk, l))))
        .collect();
    k as f64 + weighted_offset(&samples)
}

/// Delay counterpart of [`refine_doppler`]; the delay axis never wraps.
pub fn refine_delay(map: &CorrelationMap, peak: (usize, usize), width: usize) -> f64 {
    let (k, l) = peak;
    let half = (width / 2) as i64;
    let samples: Vec<(i64, f64)> = (-half..=half)
        .filter(|o| {
            let t = l as i64 + o;
            t >= 0 && (t as usize) < map.delays()
        })
        .map(|o| (o, map.get(k, (l as i64 + o) as usize)))
        .collect();
    l as f64 + weighted_offset(&samples)
}

/// Terms of the matched-hypothesis correlator output, all on the pilot's
/// normalized scale.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrBreakdown {
    /// Gain of the matched path.
    pub signal: C64,
    /// `ϑ_0i = ⟨P_[k0,l0], P_[ki,li]⟩` for every other path.
    pub pilot_interference: Vec<C64>,
    /// `ρ_0i = ⟨P_[k0,l0], data shifted by (ki, li)⟩` for every path.
    pub data_interference: Vec<C64>,
    pub noise_term: C64,
    /// `|h_0| / |Σ h_i ϑ_0i + Σ h_i ρ_0i + ς|`; infinite when the denominator vanishes.
    pub sinr_z: f64,
}

/// Split the matched correlator output into signal, pilot, data and noise
/// terms. Paths need integer delay and Doppler; the path at `matched` is the
/// signal. `data_dd` and `noise_dd` are expressed relative to the pilot
/// amplitude.
pub fn sinr_breakdown(
    pilot: &Pilot2D,
    matched: (usize, usize),
    paths: &[ChannelPath],
    data_dd: &Grid,
    noise_dd: &Grid,
) -> Result<SinrBreakdown> {
    let shift_of = |p: &ChannelPath| -> Result<(i64, i64)> {
        if p.doppler_taps.fract() != 0.0 || p.delay_taps.fract() != 0.0 {
            return Err(invalid("SINR breakdown needs integer path shifts"));
        }
        Ok((p.doppler_taps as i64, p.delay_taps as i64))
    };
    let p0 = pilot.shifted(matched.0 as i64, matched.1 as i64);
    let (m, n) = pilot.matrix().shape();
    let same = |s: (i64, i64)| {
        s.0.rem_euclid(n as i64) as usize == matched.0 && s.1.rem_euclid(m as i64) as usize == matched.1
    };
    let mut signal = C64::new(0.0, 0.0);
    let mut pilot_interference = Vec::new();
    let mut data_interference = Vec::new();
    let mut denom = C64::new(0.0, 0.0);
    let mut found = false;
    for p in paths {
        let s = shift_of(p)?;
        let rho = inner_product_2d(&p0, &cyclic_shift_2d(data_dd, s.0, s.1))?;
        data_interference.push(rho);
        denom += p.gain * rho;
        if same(s) && !found {
            signal = p.gain;
            found = true;
        } else {
            let theta = inner_product_2d(&p0, &pilot.shifted(s.0, s.1))?;
            pilot_interference.push(theta);
            denom += p.gain * theta;
        }
    }
    if !found {
        return Err(invalid("no path matches the chosen hypothesis"));
    }
    let noise_term = inner_product_2d(&p0, noise_dd)?;
    denom += noise_term;
    let sinr_z = if denom.norm() == 0.0 {
        f64::INFINITY
    } else {
        signal.norm() / denom.norm()
    };
    Ok(SinrBreakdown {
        signal,
        pilot_interference,
        data_interference,
        noise_term,
        sinr_z,
    })
}

/// Interference source for the correlation CCDF.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcdfSource {
    /// Random 16QAM on every TF cell.
    QamData,
    /// Unit-variance complex Gaussian in the DD plane.
    Noise,
}

/// Empirical distribution of sampled values.
#[derive(Debug, Clone, PartialEq)]
pub struct CcdfTable {
    sorted: Vec<f64>,
}

impl CcdfTable {
    pub fn from_samples(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(invalid("no samples"));
        }
        if samples.iter().any(|v| v.is_nan()) {
            return Err(invalid("NaN sample"));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { sorted: samples })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Fraction of samples strictly above `x`.
    pub fn ccdf(&self, x: f64) -> f64 {
        let at_or_below = self.sorted.partition_point(|v| *v <= x);
        (self.sorted.len() - at_or_below) as f64 / self.sorted.len() as f64
    }

    /// Empirical quantile with linear interpolation between order statistics.
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        let pos = p * (self.sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let t = pos - lo as f64;
        self.sorted[lo] * (1.0 - t) + self.sorted[hi] * t
    }

    /// `(value, P(X > value))` at every sample.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.sorted.iter().map(|v| (*v, self.ccdf(*v))).collect()
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }
}

/// Square pilot at a natural m-sequence size `2^m − 1`.
pub fn natural_pilot(size: usize) -> Result<(Pilot2D, FrameGeometry)> {
    let degree = (size + 1).trailing_zeros();
    if size < 3 || (size + 1) != 1 << degree {
        return Err(invalid(format!("{size} is not an m-sequence length")));
    }
    let geom = FrameGeometry::new(size, size, 60e3, 0)?;
    let a = default_m_sequence(degree, 0)?;
    let b = default_m_sequence(degree, 1)?;
    Ok((build_pilot(&a, &b, &geom)?, geom))
}

/// `|⟨P, S⟩|` for one random grid `S`. QAM grids are drawn in the TF plane and
/// correlated against the pilot's ISFFT, which equals the DD correlation
/// because the transform is unitary.
pub fn correlation_sample<R: Rng + ?Sized>(
    rng: &mut R,
    pilot_dd: &Grid,
    pilot_tf: &Grid,
    source: CcdfSource,
) -> Result<f64> {
    let (m, n) = pilot_dd.shape();
    let v = match source {
        CcdfSource::QamData => {
            let s = Grid::from_fn(Domain::TimeFrequency, m, n, |_, _| qam16_point(rng.random_range(0..16u8)));
            inner_product_2d(pilot_tf, &s)?
        }
        CcdfSource::Noise => {
            let s = Grid::from_fn(Domain::DelayDoppler, m, n, |_, _| complex_gaussian(rng, 1.0));
            inner_product_2d(pilot_dd, &s)?
        }
    };
    Ok(v.norm())
}

/// Monte Carlo CCDF of `|⟨P, S⟩|` for a `size × size` natural pilot.
pub fn correlation_ccdf(size: usize, source: CcdfSource, trials: usize, seed: u64) -> Result<CcdfTable> {
    if trials == 0 {
        return Err(invalid("CCDF needs at least one trial"));
    }
    let (pilot, geom) = natural_pilot(size)?;
    let tf = isfft(pilot.matrix(), &geom)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..trials)
        .map(|_| correlation_sample(&mut rng, pilot.matrix(), &tf, source))
        .collect::<Result<Vec<_>>>()?;
    CcdfTable::from_samples(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply_channel, fractional_doppler_channel, ChannelRealization};
    use crate::transform::{ofdm_demodulate, ofdm_modulate, sfft};
    use alloc::vec;
    use alloc::string::String;
    use proptest::prelude::{prop_assert_eq, proptest};

    fn receive(pilot: &Pilot2D, paths: &[ChannelPath], geom: &FrameGeometry) -> Grid {
        let sig = ofdm_modulate(&isfft(pilot.matrix(), geom).unwrap(), geom).unwrap();
        let y = fractional_doppler_channel(&sig, paths).unwrap();
        sfft(&ofdm_demodulate(&y, geom).unwrap(), geom).unwrap()
    }

    fn pilot16() -> (Pilot2D, FrameGeometry) {
        let geom = FrameGeometry::new(16, 16, 60e3, 4).unwrap();
        let a = default_m_sequence(4, 0).unwrap();
        let b = default_m_sequence(4, 1).unwrap();
        (build_pilot(&a, &b, &geom).unwrap(), geom)
    }

    fn natural15() -> (Pilot2D, FrameGeometry) {
        let geom = FrameGeometry::new(15, 15, 60e3, 4).unwrap();
        let a = default_m_sequence(4, 0).unwrap();
        let b = default_m_sequence(4, 1).unwrap();
        (build_pilot(&a, &b, &geom).unwrap(), geom)
    }

    fn unit(k: f64, l: f64) -> ChannelPath {
        ChannelPath::new(C64::new(1.0, 0.0), l, k)
    }

    #[test]
    fn fast_map_matches_literal_inner_products() {
        let (pilot, geom) = pilot16();
        let r = receive(&pilot, &[unit(5.0, 3.0), ChannelPath::new(C64::new(0.3, -0.2), 1.0, 11.4)], &geom);
        for compensate in [true, false] {
            let cfg = DetectionConfig {
                compensate_phase: compensate,
                ..DetectionConfig::for_geometry(&geom)
            };
            let map = correlation_map(&r, &pilot, &cfg, &geom).unwrap();
            for k in 0..16 {
                for l in 0..4 {
                    let direct = hypothesis_metric(&r, &pilot, (k, l), compensate, PhaseModel::PerSymbolCp, &geom).unwrap();
                    assert!((map.get(k, l) - direct).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn single_path_noise_free() {
        let (pilot, geom) = natural15();
        let r = receive(&pilot, &[unit(5.0, 3.0)], &geom);
        let cfg = DetectionConfig::for_geometry(&geom);
        let rep = detect(&r, &pilot, &cfg, &geom).unwrap();
        assert!((rep.map.get(5, 3) - 1.0).abs() < 1e-9);
        let bound = 1.0 / 15.0 + 1.0 / 15.0;
        for k in 0..15 {
            for l in 0..4 {
                if (k, l) != (5, 3) {
                    assert!(rep.map.get(k, l) <= bound + 1e-12, "({k},{l}) {}", rep.map.get(k, l));
                }
            }
        }
        assert_eq!(rep.detections.len(), 1);
        assert_eq!((rep.detections[0].doppler, rep.detections[0].delay), (5, 3));
        assert_eq!(rep.refined.len(), 1);
    }

    #[test]
    fn zero_grid_detects_nothing() {
        let (pilot, geom) = pilot16();
        let r = Grid::zeros(Domain::DelayDoppler, 16, 16);
        for g in [1e-9, 0.5] {
            let cfg = DetectionConfig {
                threshold: Threshold::Absolute(g),
                ..DetectionConfig::for_geometry(&geom)
            };
            assert!(detect(&r, &pilot, &cfg, &geom).unwrap().detections.is_empty());
        }
        let rep = detect(&r, &pilot, &DetectionConfig::for_geometry(&geom), &geom).unwrap();
        assert!(rep.detections.is_empty());
    }

    #[test]
    fn three_integer_targets() {
        let geom = FrameGeometry::new(64, 64, 60e3, 8).unwrap();
        let pilot = build_pilot(&default_m_sequence(6, 0).unwrap(), &default_m_sequence(6, 1).unwrap(), &geom).unwrap();
        let h = 1.0 / 3f64.sqrt();
        let paths = [
            ChannelPath::new(C64::new(h, 0.0), 0.0, 0.0),
            ChannelPath::new(C64::from_polar(h, 1.0), 1.0, 3.0),
            ChannelPath::new(C64::from_polar(h, -2.0), 2.0, 6.0),
        ];
        let r = receive(&pilot, &paths, &geom);
        let rep = detect(&r, &pilot, &DetectionConfig::for_geometry(&geom), &geom).unwrap();
        let mut found: Vec<(usize, usize)> = rep.detections.iter().map(|d| (d.doppler, d.delay)).collect();
        found.sort_unstable();
        assert_eq!(found, vec![(0, 0), (3, 1), (6, 2)]);
    }

    #[test]
    fn exhaustive_single_path_argmax_16x16() {
        let (pilot, geom) = pilot16();
        let cfg = DetectionConfig::for_geometry(&geom);
        let sig = ofdm_modulate(&isfft(pilot.matrix(), &geom).unwrap(), &geom).unwrap();
        for k in 0..16 {
            for l in 0..4 {
                let ch = ChannelRealization::new(vec![ChannelPath::new(C64::new(0.8, 0.6), l as f64, k as f64)], geom);
                let r = sfft(&ofdm_demodulate(&apply_channel(&sig, &ch).unwrap(), &geom).unwrap(), &geom).unwrap();
                let compensated = correlation_map(&r, &pilot, &cfg, &geom).unwrap();
                assert_eq!(compensated.argmax(), (k, l));
                assert!((compensated.get(k, l) - 1.0).abs() < 1e-9);
                let bare = correlation_map(&r, &pilot, &DetectionConfig { compensate_phase: false, ..cfg }, &geom).unwrap();
                assert!(bare.get(k, l) <= compensated.get(k, l) + 1e-12);
            }
        }
    }

    #[test]
    fn pulse_boundary_model_uses_direct_path() {
        let (pilot, geom) = pilot16();
        let r = receive(&pilot, &[unit(2.0, 1.0)], &geom);
        let cfg = DetectionConfig {
            phase_model: PhaseModel::PulseBoundary,
            ..DetectionConfig::for_geometry(&geom)
        };
        let map = correlation_map(&r, &pilot, &cfg, &geom).unwrap();
        let direct = hypothesis_metric(&r, &pilot, (2, 1), true, PhaseModel::PulseBoundary, &geom).unwrap();
        assert_eq!(map.get(2, 1), direct);
        assert_eq!(map.argmax(), (2, 1));
    }

    #[test]
    fn config_validation() {
        let (pilot, geom) = pilot16();
        let r = Grid::zeros(Domain::DelayDoppler, 16, 16);
        let base = DetectionConfig::for_geometry(&geom);
        for cfg in [
            DetectionConfig { k_max: 16, ..base },
            DetectionConfig { l_max: 4, ..base },
            DetectionConfig { refine_width: 2, ..base },
            DetectionConfig { threshold: Threshold::Absolute(-1.0), ..base },
        ] {
            assert!(detect(&r, &pilot, &cfg, &geom).is_err());
        }
    }

    #[test]
    fn local_maxima_and_plateaus() {
        use PeakNeighbourhood::{DopplerAxis, Full};
        let map = CorrelationMap::new(vec![0.0, 1.0, 1.0, 0.0, 0.2, 0.0], 3, 2, 6).unwrap();
        assert!(map.is_local_max(0, 1, Full));
        assert!(!map.is_local_max(1, 0, Full));
        // diagonal neighbours only compete in the full neighbourhood
        assert!(map.is_local_max(1, 0, DopplerAxis));
        assert!(map.is_local_max(0, 1, DopplerAxis));
        // cyclic wrap: last Doppler row neighbours the first
        let map = CorrelationMap::new(vec![0.5, 0.0, 0.0, 0.0, 0.9, 0.0], 3, 2, 3).unwrap();
        for n in [DopplerAxis, Full] {
            assert!(!map.is_local_max(0, 0, n));
            assert!(map.is_local_max(2, 0, n));
        }
        // plateau along Doppler keeps the first cell
        let map = CorrelationMap::new(vec![0.0, 0.7, 0.7, 0.0], 4, 1, 8).unwrap();
        assert!(map.is_local_max(1, 0, DopplerAxis));
        assert!(!map.is_local_max(2, 0, DopplerAxis));
    }

    #[test]
    fn refinement_symmetric_window() {
        let map = CorrelationMap::new(vec![0.0, 0.3, 0.0, 1.0, 0.0, 0.3], 3, 2, 3).unwrap();
        assert_eq!(refine_doppler(&map, (1, 1), 3), 1.0);
        assert_eq!(refine_doppler(&map, (1, 1), 1), 1.0);
    }

    #[test]
    fn refinement_moves_toward_fractional_truth() {
        let geom = FrameGeometry::new(64, 64, 60e3, 8).unwrap();
        let pilot = build_pilot(&default_m_sequence(6, 0).unwrap(), &default_m_sequence(6, 1).unwrap(), &geom).unwrap();
        let cfg = DetectionConfig::for_geometry(&geom);
        for (truth, lo, hi) in [(3.5, 3.0, 4.0), (3.3, 3.0, 3.5), (6.5, 6.0, 7.0)] {
            let r = receive(&pilot, &[unit(truth, 1.0)], &geom);
            let rep = detect(&r, &pilot, &cfg, &geom).unwrap();
            let d = rep.detections[0];
            assert_eq!(d.delay, 1);
            let est = rep.refined[0].doppler;
            assert!(est > lo && est < hi, "truth {truth} est {est}");
            assert!((est - truth).abs() < (d.doppler as f64 - truth).abs());
        }
    }

    #[test]
    fn fractional_leakage_pattern() {
        let geom = FrameGeometry::new(64, 64, 60e3, 8).unwrap();
        let pilot = build_pilot(&default_m_sequence(6, 0).unwrap(), &default_m_sequence(6, 1).unwrap(), &geom).unwrap();
        let cfg = DetectionConfig::for_geometry(&geom);
        let r = receive(&pilot, &[unit(3.3, 1.0)], &geom);
        let map = correlation_map(&r, &pilot, &cfg, &geom).unwrap();
        assert_eq!(map.argmax(), (3, 1));
        assert!(map.get(4, 1) > map.get(2, 1));
        let r = receive(&pilot, &[unit(6.5, 2.0)], &geom);
        let map = correlation_map(&r, &pilot, &cfg, &geom).unwrap();
        let (a, b) = (map.get(6, 2), map.get(7, 2));
        assert!((a - b).abs() / a.max(b) < 0.1, "{a} {b}");
    }

    #[test]
    fn refine_delay_mirrors_doppler() {
        let map = CorrelationMap::new(vec![0.2, 1.0, 0.6], 1, 3, 4).unwrap();
        let d = refine_delay(&map, (0, 1), 3);
        assert!(d > 1.0 && d < 1.5);
        let edge = refine_delay(&map, (0, 0), 3);
        assert!(edge > 0.0);
    }

    #[test]
    fn csv_export() {
        let map = CorrelationMap::new(vec![0.5, 0.25], 2, 1, 2).unwrap();
        let mut s = String::new();
        map.write_csv(&mut s).unwrap();
        assert_eq!(s, "k,l,vd\n0,0,0.5\n1,0,0.25\n");
    }

    #[test]
    fn sinr_single_path_is_infinite() {
        let (pilot, _) = natural15();
        let zero = Grid::zeros(Domain::DelayDoppler, 15, 15);
        let s = sinr_breakdown(&pilot, (2, 1), &[unit(2.0, 1.0)], &zero, &zero).unwrap();
        assert_eq!(s.sinr_z, f64::INFINITY);
        assert_eq!(s.signal, C64::new(1.0, 0.0));
    }

    #[test]
    fn sinr_two_paths_correlation_values() {
        let (pilot, _) = natural15();
        let zero = Grid::zeros(Domain::DelayDoppler, 15, 15);
        let l = 15.0;
        let allowed = [1.0 / l, 1.0 / (l * l)];
        for (k1, l1) in [(2.0, 1.0), (0.0, 3.0), (7.0, 0.0)] {
            let paths = [unit(0.0, 0.0), unit(k1, l1)];
            let s = sinr_breakdown(&pilot, (0, 0), &paths, &zero, &zero).unwrap();
            let v = s.pilot_interference[0].norm();
            assert!(allowed.iter().any(|a| (v - a).abs() < 1e-12), "{v}");
            assert!((s.sinr_z - 1.0 / v).abs() < 1e-9);
        }
    }

    #[test]
    fn ccdf_table_basics() {
        let t = CcdfTable::from_samples(vec![0.3, 0.1, 0.2, 0.4]).unwrap();
        assert_eq!(t.ccdf(0.0), 1.0);
        assert_eq!(t.ccdf(0.2), 0.5);
        assert_eq!(t.ccdf(1.0), 0.0);
        assert!((t.quantile(0.5) - 0.25).abs() < 1e-15);
        assert!(CcdfTable::from_samples(vec![]).is_err());
        assert!(correlation_ccdf(15, CcdfSource::Noise, 0, 1).is_err());
        assert!(natural_pilot(16).is_err());
    }

    #[test]
    fn ccdf_concentrates_with_size() {
        for source in [CcdfSource::QamData, CcdfSource::Noise] {
            let small = correlation_ccdf(15, source, 300, 1).unwrap();
            let large = correlation_ccdf(63, source, 300, 1).unwrap();
            assert!(large.quantile(0.9) < small.quantile(0.9));
            // autocorrelation reference sits far above the interference
            assert!(small.quantile(1.0) < 1.0);
        }
    }

    #[test]
    fn qam_correlation_equals_dd_correlation() {
        let (pilot, geom) = natural_pilot(15).unwrap();
        let tf = isfft(pilot.matrix(), &geom).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = Grid::from_fn(Domain::TimeFrequency, 15, 15, |_, _| qam16_point(rng.random_range(0..16u8)));
        let dd = sfft(&s, &geom).unwrap();
        let a = inner_product_2d(&tf, &s).unwrap();
        let b = inner_product_2d(pilot.matrix(), &dd).unwrap();
        assert!((a - b).norm() < 1e-12);
    }

    proptest! {
        #[test]
        fn map_scales_with_received_power(scale in 0.01f64..100.0, k in 0usize..16, l in 0usize..4) {
            let (pilot, geom) = pilot16();
            let r = receive(&pilot, &[unit(k as f64, l as f64), ChannelPath::new(C64::new(0.5, 0.1), 2.0, 9.0)], &geom);
            let cfg = DetectionConfig::for_geometry(&geom);
            let a = detect(&r, &pilot, &cfg, &geom).unwrap();
            let b = detect(&r.scaled(C64::new(scale, 0.0)), &pilot, &cfg, &geom).unwrap();
            let da: Vec<_> = a.detections.iter().map(|d| (d.doppler, d.delay)).collect();
            let db: Vec<_> = b.detections.iter().map(|d| (d.doppler, d.delay)).collect();
            prop_assert_eq!(da, db);
        }
    }
}
