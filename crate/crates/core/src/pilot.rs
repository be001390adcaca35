//! Two-dimensional delay-Doppler pilot, 2D shifts and inner products, and the
//! phase matrix a single echo path imprints on the received pilot.

use alloc::format;
use core::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::geometry::FrameGeometry;
use crate::grid::{Domain, Grid};
use crate::sequence::ComponentSequence;
use crate::C64;

/// Outer-product pilot `P[l, k] = b[l]·a[k]`.
///
/// `a` runs along the Doppler axis (length `N`), `b` along the delay axis
/// (length `M`).
#[derive(Debug, Clone, PartialEq)]
pub struct Pilot2D {
    matrix: Grid,
    a: ComponentSequence,
    b: ComponentSequence,
}

impl Pilot2D {
    pub fn matrix(&self) -> &Grid {
        &self.matrix
    }

    /// Doppler-axis component, length `N`.
    pub fn a(&self) -> &ComponentSequence {
        &self.a
    }

    /// Delay-axis component, length `M`.
    pub fn b(&self) -> &ComponentSequence {
        &self.b
    }

    /// Mean per-element power of the pilot matrix.
    pub fn power(&self) -> f64 {
        self.a.mean_power() * self.b.mean_power()
    }

    /// `P_[q, ℓ]`: the pilot cyclically shifted by `q` Doppler and `ℓ` delay taps.
    pub fn shifted(&self, doppler: i64, delay: i64) -> Grid {
        cyclic_shift_2d(&self.matrix, doppler, delay)
    }
}

/// Build the pilot `P = b·aᵀ` for a frame.
///
/// Components whose length differs from the grid dimension are cyclically
/// extended (or truncated) to fit: `a` to `N`, `b` to `M`.
pub fn build_pilot(a: &ComponentSequence, b: &ComponentSequence, geom: &FrameGeometry) -> Result<Pilot2D> {
    let a = if a.len() == geom.n() { a.clone() } else { a.cyclic_extend(geom.n())? };
    let b = if b.len() == geom.m() { b.clone() } else { b.cyclic_extend(geom.m())? };
    let matrix = Grid::from_fn(Domain::DelayDoppler, geom.m(), geom.n(), |l, k| {
        C64::new(b.get(l) * a.get(k), 0.0)
    });
    Ok(Pilot2D { matrix, a, b })
}

/// `out[l, k] = in[(l − ℓ) mod M, (k − q) mod N]`.
pub fn cyclic_shift_2d(grid: &Grid, doppler: i64, delay: i64) -> Grid {
    let (m, n) = grid.shape();
    if m == 0 || n == 0 {
        return grid.clone();
    }
    let q = doppler.rem_euclid(n as i64) as usize;
    let p = delay.rem_euclid(m as i64) as usize;
    Grid::from_fn(grid.domain(), m, n, |l, k| {
        grid.get((l + m - p) % m, (k + n - q) % n)
    })
}

/// Normalized inner product `(1/MN)·Σ conj(A[l,k])·B[l,k]`.
pub fn inner_product_2d(a: &Grid, b: &Grid) -> Result<C64> {
    a.check_same_shape(b)?;
    let len = a.samples().len();
    if len == 0 {
        return Err(invalid("inner product of empty grids"));
    }
    let acc: C64 = a
        .samples()
        .iter()
        .zip(b.samples())
        .map(|(x, y)| x.conj() * y)
        .sum();
    Ok(acc / len as f64)
}

/// How the phase a path leaves on the received DD pilot is modelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseModel {
    /// Per-symbol cyclic prefix with the delay absorbed by the CP. The phase
    /// depends on the delay row only:
    /// `exp(j2π·k_d·(L_cp + l − l_d) / (N(M+L_cp)))`.
    /// This is what the OFDM chain in this crate produces.
    #[default]
    PerSymbolCp,
    /// Adds the pulse-boundary factor
    /// `((N−1)/N)·exp(−j2π((k − k_d) mod N)/N)` on rows `l < l_d`, the form
    /// obtained when the delayed samples spill across a frame-wide pulse
    /// instead of being absorbed by a per-symbol prefix.
    PulseBoundary,
}

/// Phase matrix `Ξ` for one `(doppler, delay)` hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMatrix {
    entries: Grid,
    hypothesis: (usize, usize),
    geometry: FrameGeometry,
    model: PhaseModel,
}

impl PhaseMatrix {
    pub fn entries(&self) -> &Grid {
        &self.entries
    }

    /// `(doppler, delay)`.
    pub fn hypothesis(&self) -> (usize, usize) {
        self.hypothesis
    }

    pub fn geometry(&self) -> &FrameGeometry {
        &self.geometry
    }

    pub fn model(&self) -> PhaseModel {
        self.model
    }
}

/// The row phase `exp(j2π·k_d·(L_cp + l − l_d) / (N(M+L_cp)))`, with real
/// Doppler allowed.
pub fn row_phase(geom: &FrameGeometry, doppler: f64, delay: usize, row: usize) -> C64 {
    let span = geom.frame_len() as f64;
    let offset = geom.cp_length() as f64 + row as f64 - delay as f64;
    C64::from_polar(1.0, 2.0 * PI * doppler * offset / span)
}

/// Build `Ξ_<k_d, l_d>` under the chosen model.
pub fn phase_matrix(
    hypothesis: (usize, usize),
    geom: &FrameGeometry,
    model: PhaseModel,
) -> Result<PhaseMatrix> {
    let (kd, ld) = hypothesis;
    let (m, n) = (geom.m(), geom.n());
    if kd >= n || ld >= m {
        return Err(invalid(format!(
            "hypothesis ({kd}, {ld}) outside {n} Doppler x {m} delay taps"
        )));
    }
    let shrink = (n as f64 - 1.0) / n as f64;
    let entries = Grid::from_fn(Domain::DelayDoppler, m, n, |l, k| {
        let base = row_phase(geom, kd as f64, ld, l);
        match model {
            PhaseModel::PulseBoundary if l < ld => {
                let wrap = ((k + n - kd) % n) as f64;
                base * C64::from_polar(shrink, -2.0 * PI * wrap / n as f64)
            }
            _ => base,
        }
    });
    Ok(PhaseMatrix {
        entries,
        hypothesis,
        geometry: *geom,
        model,
    })
}
