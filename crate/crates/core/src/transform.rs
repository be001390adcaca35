//! DD ↔ TF transforms, pilot/data superposition and CP-OFDM (de)modulation.
//!
//! With unitary DFT matrices the ISFFT is `X = F_M · P · F_N^H`: a forward
//! DFT down each column (delay → subcarrier) and an inverse DFT along each row
//! (Doppler → symbol). OFDM modulation applies `F_M^H` per symbol, so a DD
//! pilot reaches the time-delay plane as `P · F_N^H`.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use crate::dft::Dft;
use crate::error::{invalid, mismatch, Result};
use crate::geometry::FrameGeometry;
use crate::grid::{Domain, Grid};
use crate::C64;

/// Time-domain samples of one frame, CP included.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignal {
    samples: Vec<C64>,
    geometry: FrameGeometry,
}

impl TimeSignal {
    pub fn new(samples: Vec<C64>, geometry: FrameGeometry) -> Result<Self> {
        if samples.len() != geometry.frame_len() {
            return Err(mismatch(
                format!("{} samples", geometry.frame_len()),
                format!("{}", samples.len()),
            ));
        }
        Ok(Self { samples, geometry })
    }

    pub fn zeros(geometry: FrameGeometry) -> Self {
        Self {
            samples: alloc::vec![C64::new(0.0, 0.0); geometry.frame_len()],
            geometry,
        }
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [C64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<C64> {
        self.samples
    }

    pub fn geometry(&self) -> &FrameGeometry {
        &self.geometry
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|x| x.norm_sqr()).sum()
    }
}

/// Transform every column in place.
fn columns(grid: &mut Grid, plan: &Dft, inverse: bool) {
    for k in 0..grid.cols() {
        let col = grid.column_mut(k);
        if inverse {
            plan.inverse(col);
        } else {
            plan.forward(col);
        }
    }
}

/// Transform every row in place.
fn rows(grid: &mut Grid, plan: &Dft, inverse: bool) {
    let (m, n) = grid.shape();
    let mut buf = alloc::vec![C64::new(0.0, 0.0); n];
    for l in 0..m {
        for (k, b) in buf.iter_mut().enumerate() {
            *b = grid.get(l, k);
        }
        if inverse {
            plan.inverse(&mut buf);
        } else {
            plan.forward(&mut buf);
        }
        for (k, b) in buf.iter().enumerate() {
            grid.set(l, k, *b);
        }
    }
}

fn expect_domain(grid: &Grid, domain: Domain) -> Result<()> {
    if grid.domain() != domain {
        return Err(invalid(format!(
            "expected a {domain:?} grid, got {:?}",
            grid.domain()
        )));
    }
    Ok(())
}

/// ISFFT: DD grid → TF grid, `F_M · dd · F_N^H`.
pub fn isfft(dd: &Grid, geom: &FrameGeometry) -> Result<Grid> {
    dd.check_geometry(geom)?;
    expect_domain(dd, Domain::DelayDoppler)?;
    let mut out = dd.clone().with_domain(Domain::TimeFrequency);
    columns(&mut out, &Dft::new(geom.m()), false);
    rows(&mut out, &Dft::new(geom.n()), true);
    Ok(out)
}

/// SFFT: TF grid → DD grid, the exact inverse of [`isfft`].
pub fn sfft(tf: &Grid, geom: &FrameGeometry) -> Result<Grid> {
    tf.check_geometry(geom)?;
    expect_domain(tf, Domain::TimeFrequency)?;
    let mut out = tf.clone().with_domain(Domain::DelayDoppler);
    columns(&mut out, &Dft::new(geom.m()), true);
    rows(&mut out, &Dft::new(geom.n()), false);
    Ok(out)
}

/// `X = sqrt(ρ)·pilot_tf + data_tf`.
///
/// With unit-power inputs the pilot ends up at `ρ` times the data power.
pub fn superimpose(pilot_tf: &Grid, data_tf: &Grid, power_ratio: f64) -> Result<Grid> {
    if !(power_ratio >= 0.0 && power_ratio.is_finite()) {
        return Err(invalid("power ratio must be a finite non-negative number"));
    }
    pilot_tf.check_same_shape(data_tf)?;
    expect_domain(pilot_tf, Domain::TimeFrequency)?;
    expect_domain(data_tf, Domain::TimeFrequency)?;
    let amp = power_ratio.sqrt();
    let data = pilot_tf
        .samples()
        .iter()
        .zip(data_tf.samples())
        .map(|(p, d)| p * amp + d)
        .collect();
    Grid::from_columns(Domain::TimeFrequency, pilot_tf.rows(), pilot_tf.cols(), data)
}

/// CP-OFDM modulation: per symbol, `F_M^H` of the column with the last
/// `L_cp` samples prepended.
pub fn ofdm_modulate(tf: &Grid, geom: &FrameGeometry) -> Result<TimeSignal> {
    tf.check_geometry(geom)?;
    expect_domain(tf, Domain::TimeFrequency)?;
    let (m, cp) = (geom.m(), geom.cp_length());
    let plan = Dft::new(m);
    let mut samples = Vec::with_capacity(geom.frame_len());
    let mut sym = alloc::vec![C64::new(0.0, 0.0); m];
    for n in 0..geom.n() {
        sym.copy_from_slice(tf.column(n));
        plan.inverse(&mut sym);
        samples.extend_from_slice(&sym[m - cp..]);
        samples.extend_from_slice(&sym);
    }
    TimeSignal::new(samples, *geom)
}

/// CP-OFDM demodulation: drop each symbol's CP and apply `F_M`.
pub fn ofdm_demodulate(sig: &TimeSignal, geom: &FrameGeometry) -> Result<Grid> {
    if sig.len() != geom.frame_len() {
        return Err(invalid(format!(
            "signal has {} samples, frame needs {}",
            sig.len(),
            geom.frame_len()
        )));
    }
    let (m, cp) = (geom.m(), geom.cp_length());
    let plan = Dft::new(m);
    let mut out = Grid::zeros_for(Domain::TimeFrequency, geom);
    for (n, chunk) in sig.samples().chunks_exact(geom.symbol_len()).enumerate() {
        let col = out.column_mut(n);
        col.copy_from_slice(&chunk[cp..]);
        plan.forward(col);
    }
    Ok(out)
}

/// TF grid → time-delay grid (per-symbol `F_M^H`, no CP).
pub fn tf_to_time_delay(tf: &Grid, geom: &FrameGeometry) -> Result<Grid> {
    tf.check_geometry(geom)?;
    expect_domain(tf, Domain::TimeFrequency)?;
    let mut out = tf.clone().with_domain(Domain::TimeDelay);
    columns(&mut out, &Dft::new(geom.m()), true);
    Ok(out)
}
