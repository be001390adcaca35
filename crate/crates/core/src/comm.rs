//! Communication receiver for OFDM carrying an underlaid sensing pilot.
//!
//! The known TF pilot is added to the reference signal before LS estimation,
//! the estimate is interpolated over the whole grid, and the pilot is then
//! rebuilt through the estimated channel and subtracted ahead of one-tap
//! MMSE equalization.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_1_SQRT_2;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, mismatch, Result};
use crate::geometry::FrameGeometry;
use crate::grid::{Domain, Grid};
use crate::C64;

/// Per-axis Gray levels indexed by the two bits `(b0 << 1) | b1`.
const GRAY_LEVELS: [f64; 4] = [-3.0, -1.0, 3.0, 1.0];

fn qam_scale() -> f64 {
    1.0 / 10f64.sqrt()
}

fn level_bits(level: f64) -> (u8, u8) {
    // nearest of -3, -1, 1, 3 on the unscaled axis
    if level < -2.0 {
        (0, 0)
    } else if level < 0.0 {
        (0, 1)
    } else if level < 2.0 {
        (1, 1)
    } else {
        (1, 0)
    }
}

/// Constellation point for a nibble `b0 b1 b2 b3` (b0 most significant).
/// The first two bits pick the in-phase level, the last two the quadrature.
pub fn qam16_point(nibble: u8) -> C64 {
    let i = GRAY_LEVELS[((nibble >> 2) & 3) as usize];
    let q = GRAY_LEVELS[(nibble & 3) as usize];
    C64::new(i, q) * qam_scale()
}

/// Gray-mapped, unit-energy 16QAM. `bits` holds one bit (0 or 1) per byte.
pub fn qam16_modulate(bits: &[u8]) -> Result<Vec<C64>> {
    if !bits.len().is_multiple_of(4) {
        return Err(invalid(format!("{} bits is not a multiple of 4", bits.len())));
    }
    if bits.iter().any(|b| *b > 1) {
        return Err(invalid("bits must be 0 or 1"));
    }
    Ok(bits
        .chunks_exact(4)
        .map(|c| qam16_point((c[0] << 3) | (c[1] << 2) | (c[2] << 1) | c[3]))
        .collect())
}

/// Hard-decision nearest-point demodulation.
pub fn qam16_demodulate(symbols: &[C64]) -> Vec<u8> {
    let inv = 1.0 / qam_scale();
    let mut bits = Vec::with_capacity(symbols.len() * 4);
    for s in symbols {
        let (i0, i1) = level_bits(s.re * inv);
        let (q0, q1) = level_bits(s.im * inv);
        bits.extend_from_slice(&[i0, i1, q0, q1]);
    }
    bits
}

/// Reference-signal positions and values on the TF grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RsMask {
    mask: Vec<bool>,
    values: Grid,
}

impl RsMask {
    /// Validate a mask (column-major, `M·N` flags) and its values; values off
    /// the mask are ignored, values on it must have unit modulus.
    pub fn new(mask: Vec<bool>, values: &Grid) -> Result<Self> {
        if mask.len() != values.samples().len() {
            return Err(mismatch(format!("{} mask flags", values.samples().len()), format!("{}", mask.len())));
        }
        if !mask.iter().any(|m| *m) {
            return Err(invalid("RS mask must contain at least one position"));
        }
        let mut kept = Grid::zeros(Domain::TimeFrequency, values.rows(), values.cols());
        for k in 0..values.cols() {
            for l in 0..values.rows() {
                if mask[k * values.rows() + l] {
                    let v = values.get(l, k);
                    if (v.norm() - 1.0).abs() > 1e-9 {
                        return Err(invalid(format!("RS value at ({l}, {k}) is not unit modulus")));
                    }
                    kept.set(l, k, v);
                }
            }
        }
        Ok(Self { mask, values: kept })
    }

    /// Comb pattern: every `spacing`-th subcarrier on the listed symbols, with
    /// QPSK-phase values from a seeded generator.
    pub fn comb(geom: &FrameGeometry, spacing: usize, symbols: &[usize], seed: u64) -> Result<Self> {
        if spacing == 0 || spacing > geom.m() {
            return Err(invalid(format!("RS spacing {spacing} outside 1..={}", geom.m())));
        }
        if symbols.is_empty() || symbols.iter().any(|n| *n >= geom.n()) {
            return Err(invalid("RS symbols must be a non-empty subset of the frame"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, n) = (geom.m(), geom.n());
        let mut mask = vec![false; m * n];
        let mut values = Grid::zeros(Domain::TimeFrequency, m, n);
        for &sym in symbols {
            for f in (0..m).step_by(spacing) {
                mask[sym * m + f] = true;
                let q: u8 = rng.random_range(0..4);
                let phase = match q {
                    0 => C64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2),
                    1 => C64::new(-FRAC_1_SQRT_2, FRAC_1_SQRT_2),
                    2 => C64::new(-FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
                    _ => C64::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
                };
                values.set(f, sym, phase);
            }
        }
        Ok(Self { mask, values })
    }

    /// Default pattern: every 4th subcarrier on symbols `0` and `N/2`.
    pub fn default_comb(geom: &FrameGeometry, seed: u64) -> Result<Self> {
        let mut symbols = vec![0, geom.n() / 2];
        symbols.dedup();
        Self::comb(geom, 4, &symbols, seed)
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    pub fn is_rs(&self, row: usize, col: usize) -> bool {
        self.mask[col * self.rows() + row]
    }

    /// RS values on the mask, zero elsewhere.
    pub fn values(&self) -> &Grid {
        &self.values
    }

    /// Mask positions as `(row, col)`, column by column.
    pub fn positions(&self) -> Vec<(usize, usize)> {
        let rows = self.rows();
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, m)| **m)
            .map(|(i, _)| (i % rows, i / rows))
            .collect()
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    pub fn data_cells(&self) -> usize {
        self.mask.len() - self.count()
    }
}

/// OFDM resource grid: 16QAM on data cells, RS on the mask.
#[derive(Debug, Clone, PartialEq)]
pub struct QamFrame {
    bits: Vec<u8>,
    grid: Grid,
}

impl QamFrame {
    /// Fill the data cells with the given bits (4 per cell, column by column).
    pub fn from_bits(bits: Vec<u8>, rs: &RsMask) -> Result<Self> {
        if bits.len() != 4 * rs.data_cells() {
            return Err(mismatch(format!("{} bits", 4 * rs.data_cells()), format!("{}", bits.len())));
        }
        let symbols = qam16_modulate(&bits)?;
        let mut grid = rs.values().clone();
        let mut it = symbols.into_iter();
        for k in 0..rs.cols() {
            for l in 0..rs.rows() {
                if !rs.is_rs(l, k) {
                    grid.set(l, k, it.next().expect("symbol count checked above"));
                }
            }
        }
        Ok(Self { bits, grid })
    }

    /// Uniformly random payload.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, rs: &RsMask) -> Result<Self> {
        let bits = (0..4 * rs.data_cells()).map(|_| rng.random_range(0..2u8)).collect();
        Self::from_bits(bits, rs)
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// TF grid `D` including the RS.
    pub fn grid(&self) -> &Grid {
        &self.grid
    }
}

/// Symbols on the data cells of a TF grid, column by column.
pub fn data_symbols(grid: &Grid, rs: &RsMask) -> Vec<C64> {
    let mut out = Vec::with_capacity(rs.data_cells());
    for k in 0..grid.cols() {
        for l in 0..grid.rows() {
            if !rs.is_rs(l, k) {
                out.push(grid.get(l, k));
            }
        }
    }
    out
}

/// One reference cell used for LS estimation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceCell {
    pub row: usize,
    pub col: usize,
    pub value: C64,
    /// False when `|value|` fell below the usability floor.
    pub usable: bool,
}

/// Smallest `|S_eff|` accepted as a reference by default.
pub const DEFAULT_MIN_REFERENCE: f64 = 0.05;

/// `S_eff = D + pilot_tf` on the mask. `pilot_tf` must already carry the
/// transmit scaling. Cells with `|S_eff| < min_magnitude` are marked unusable.
pub fn build_equivalent_rs(
    rs: &RsMask,
    data: &Grid,
    pilot_tf: &Grid,
    min_magnitude: f64,
) -> Result<Vec<ReferenceCell>> {
    data.check_shape(rs.rows(), rs.cols())?;
    pilot_tf.check_same_shape(data)?;
    Ok(rs
        .positions()
        .into_iter()
        .map(|(row, col)| {
            let value = data.get(row, col) + pilot_tf.get(row, col);
            ReferenceCell {
                row,
                col,
                value,
                usable: value.norm() >= min_magnitude,
            }
        })
        .collect())
}

/// Reference taken from the RS alone.
pub fn plain_rs(rs: &RsMask) -> Vec<ReferenceCell> {
    rs.positions()
        .into_iter()
        .map(|(row, col)| ReferenceCell {
            row,
            col,
            value: rs.values().get(row, col),
            usable: true,
        })
        .collect()
}

/// Where a channel estimate came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsiSource {
    Perfect,
    EquivalentRs,
    PilotIgnorantRs,
}

/// Per-cell treatment of the raw reference estimates before interpolation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Refinement {
    /// `Y/S`.
    #[default]
    LeastSquares,
    /// `conj(S)·Y / (|S|² + σ²/E|H|²)` with the given channel power `E|H|²`.
    Mmse { channel_power: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub h_tf: Grid,
    pub source: CsiSource,
}

impl ChannelEstimate {
    pub fn perfect(h_tf: Grid) -> Self {
        Self {
            h_tf,
            source: CsiSource::Perfect,
        }
    }
}

/// Raw per-cell estimates at the usable reference cells.
pub fn reference_estimates(
    y: &Grid,
    refs: &[ReferenceCell],
    refinement: Refinement,
    noise_var: f64,
) -> Result<Vec<(usize, usize, C64)>> {
    if noise_var < 0.0 {
        return Err(invalid("noise variance must be non-negative"));
    }
    refs.iter()
        .filter(|c| c.usable)
        .map(|c| {
            if c.row >= y.rows() || c.col >= y.cols() {
                return Err(invalid(format!("reference cell ({}, {}) outside grid", c.row, c.col)));
            }
            let obs = y.get(c.row, c.col);
            let h = match refinement {
                Refinement::LeastSquares => obs / c.value,
                Refinement::Mmse { channel_power } => {
                    if channel_power <= 0.0 {
                        return Err(invalid("channel power must be positive"));
                    }
                    c.value.conj() * obs / (c.value.norm_sqr() + noise_var / channel_power)
                }
            };
            Ok((c.row, c.col, h))
        })
        .collect()
}

/// Linear interpolation with edge replication of sorted `(x, v)` samples
/// onto `0..len`.
fn interpolate_line(samples: &[(usize, C64)], len: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); len];
    let (first, last) = (samples[0], samples[samples.len() - 1]);
    let mut seg = 0;
    for (x, o) in out.iter_mut().enumerate() {
        if x <= first.0 {
            *o = first.1;
        } else if x >= last.0 {
            *o = last.1;
        } else {
            while samples[seg + 1].0 < x {
                seg += 1;
            }
            let (x0, v0) = samples[seg];
            let (x1, v1) = samples[seg + 1];
            let t = (x - x0) as f64 / (x1 - x0) as f64;
            *o = v0 * (1.0 - t) + v1 * t;
        }
    }
    out
}

/// Separable bilinear interpolation: along frequency inside each symbol that
/// holds estimates, then along time for every subcarrier. Edges are
/// replicated.
pub fn interpolate_estimates(points: &[(usize, usize, C64)], rows: usize, cols: usize) -> Result<Grid> {
    if points.is_empty() {
        return Err(invalid("no usable reference cells to interpolate from"));
    }
    let mut by_col: Vec<Vec<(usize, C64)>> = vec![Vec::new(); cols];
    for &(r, c, v) in points {
        if r >= rows || c >= cols {
            return Err(invalid(format!("estimate at ({r}, {c}) outside {rows}x{cols} grid")));
        }
        by_col[c].push((r, v));
    }
    let mut freq_lines: Vec<(usize, Vec<C64>)> = Vec::new();
    for (c, mut pts) in by_col.into_iter().enumerate() {
        if pts.is_empty() {
            continue;
        }
        pts.sort_by_key(|p| p.0);
        pts.dedup_by_key(|p| p.0);
        freq_lines.push((c, interpolate_line(&pts, rows)));
    }
    let mut out = Grid::zeros(Domain::TimeFrequency, rows, cols);
    let mut line = Vec::with_capacity(freq_lines.len());
    for r in 0..rows {
        line.clear();
        line.extend(freq_lines.iter().map(|(c, v)| (*c, v[r])));
        for (c, v) in interpolate_line(&line, cols).into_iter().enumerate() {
            out.set(r, c, v);
        }
    }
    Ok(out)
}

/// LS (optionally MMSE-refined) estimate from a reference set, interpolated
/// over the whole grid.
pub fn estimate_channel(
    y: &Grid,
    refs: &[ReferenceCell],
    source: CsiSource,
    refinement: Refinement,
    noise_var: f64,
) -> Result<ChannelEstimate> {
    let pts = reference_estimates(y, refs, refinement, noise_var)?;
    Ok(ChannelEstimate {
        h_tf: interpolate_estimates(&pts, y.rows(), y.cols())?,
        source,
    })
}

/// Output of pilot cancellation and one-tap equalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Equalized {
    pub symbols: Grid,
    /// Column-major flags for cells whose equalizer denominator was zero.
    pub erased: Vec<bool>,
}

impl Equalized {
    pub fn erased_count(&self) -> usize {
        self.erased.iter().filter(|e| **e).count()
    }
}

/// `D̂ = conj(Ĥ)·(Y − pilot_tf·Ĥ) / (|Ĥ|² + σ²)`, elementwise.
pub fn cancel_and_equalize(y: &Grid, est: &ChannelEstimate, pilot_tf: &Grid, noise_var: f64) -> Result<Equalized> {
    if noise_var.is_nan() || noise_var < 0.0 {
        return Err(invalid("noise variance must be non-negative"));
    }
    y.check_same_shape(&est.h_tf)?;
    y.check_same_shape(pilot_tf)?;
    let mut erased = vec![false; y.samples().len()];
    let data = y
        .samples()
        .iter()
        .zip(est.h_tf.samples())
        .zip(pilot_tf.samples())
        .zip(erased.iter_mut())
        .map(|(((yv, h), p), e)| {
            let den = h.norm_sqr() + noise_var;
            if den == 0.0 {
                *e = true;
                C64::new(0.0, 0.0)
            } else {
                h.conj() * (yv - p * h) / den
            }
        })
        .collect();
    Ok(Equalized {
        symbols: Grid::from_columns(Domain::TimeFrequency, y.rows(), y.cols(), data)?,
        erased,
    })
}

/// Number of differing bits.
pub fn bit_errors(tx: &[u8], rx: &[u8]) -> Result<usize> {
    if tx.len() != rx.len() {
        return Err(mismatch(format!("{} bits", tx.len()), format!("{}", rx.len())));
    }
    Ok(tx.iter().zip(rx).filter(|(a, b)| a != b).count())
}

/// Bit error ratio.
pub fn ber(tx: &[u8], rx: &[u8]) -> Result<f64> {
    if tx.is_empty() {
        return Err(invalid("empty bit vectors"));
    }
    Ok(bit_errors(tx, rx)? as f64 / tx.len() as f64)
}

/// `‖Ĥ − H‖² / ‖H‖²`.
pub fn nmse(est: &Grid, truth: &Grid) -> Result<f64> {
    est.check_same_shape(truth)?;
    let norm = truth.energy();
    if norm == 0.0 {
        return Err(invalid("reference channel has zero energy"));
    }
    let err: f64 = est
        .samples()
        .iter()
        .zip(truth.samples())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    Ok(err / norm)
}

/// NMSE in dB; `-inf` for an exact estimate.
pub fn nmse_db(est: &Grid, truth: &Grid) -> Result<f64> {
    Ok(10.0 * nmse(est, truth)?.log10())
}
