//! Signal processing core for a sensing pilot underlaid on OFDM data.
//!
//! A two-dimensional pilot is built in the delay-Doppler (DD) plane from the
//! outer product of two m-sequences, moved to the time-frequency (TF) plane
//! with the ISFFT and superimposed on ordinary OFDM data. The sensing receiver
//! correlates the received DD grid against shifted, phase-compensated copies of
//! the pilot; the communication receiver folds the known pilot into its
//! reference signal, then cancels it before one-tap equalization.
//!
//! Grid orientation is shared by every module: rows are delay taps / subcarriers
//! (`l`, `m` in `0..M`), columns are Doppler taps / OFDM symbols (`k`, `n` in
//! `0..N`). Every API that takes a shift pair takes it as `(doppler, delay)`.
//!
//! The crate is `no_std` and only needs `alloc`.
//!
//! ```
//! use isac_core::pilot::build_pilot;
//! use isac_core::sensing::{detect, DetectionConfig};
//! use isac_core::sequence::m_sequence_for_length;
//! use isac_core::transform::{isfft, ofdm_demodulate, ofdm_modulate, sfft};
//! use isac_core::channel::{apply_channel, ChannelPath, ChannelRealization};
//! use isac_core::{FrameGeometry, C64};
//!
//! let geom = FrameGeometry::new(64, 64, 60e3, 8)?;
//! let a = m_sequence_for_length(geom.n(), 0)?;
//! let b = m_sequence_for_length(geom.m(), 1)?;
//! let pilot = build_pilot(&a, &b, &geom)?;
//!
//! let tx = ofdm_modulate(&isfft(pilot.matrix(), &geom)?, &geom)?;
//! let target = ChannelPath::new(C64::new(1.0, 0.0), 3.0, 12.0);
//! let rx = apply_channel(&tx, &ChannelRealization::new(vec![target], geom))?;
//! let r = sfft(&ofdm_demodulate(&rx, &geom)?, &geom)?;
//!
//! let report = detect(&r, &pilot, &DetectionConfig::for_geometry(&geom), &geom)?;
//! assert_eq!((report.detections[0].doppler, report.detections[0].delay), (12, 3));
//! # Ok::<(), isac_core::Error>(())
//! ```

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod channel;
pub mod comm;
pub mod dft;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod pilot;
pub mod sensing;
pub mod sequence;
pub mod transform;

pub use error::{Error, Result};
pub use geometry::FrameGeometry;
pub use grid::{Domain, Grid};

/// Complex sample type used throughout the crate.
pub type C64 = num_complex::Complex64;

/// Speed of light used for velocity/Doppler conversions, m/s.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;
