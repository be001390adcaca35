use crate::error::{invalid, Result};

/// Dimensions and numerology of one frame.
///
/// `M` delay taps double as subcarriers and `N` Doppler taps double as OFDM
/// symbols. The useful symbol lasts `T = 1/Δf`; the cyclic prefix stretches
/// each transmitted symbol to `M + L_cp` samples at the sample rate `M·Δf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameGeometry {
    num_delay_taps: usize,
    num_doppler_taps: usize,
    subcarrier_spacing: f64,
    cp_length: usize,
}

impl FrameGeometry {
    pub fn new(
        num_delay_taps: usize,
        num_doppler_taps: usize,
        subcarrier_spacing: f64,
        cp_length: usize,
    ) -> Result<Self> {
        if num_delay_taps == 0 || num_doppler_taps == 0 {
            return Err(invalid("grid dimensions must be positive"));
        }
        if !(subcarrier_spacing.is_finite() && subcarrier_spacing > 0.0) {
            return Err(invalid("subcarrier spacing must be a positive finite number"));
        }
        if cp_length >= num_delay_taps {
            return Err(invalid("cyclic prefix must be shorter than the symbol"));
        }
        Ok(Self {
            num_delay_taps,
            num_doppler_taps,
            subcarrier_spacing,
            cp_length,
        })
    }

    /// Geometry with the default cyclic prefix of `M/8` samples.
    pub fn with_default_cp(
        num_delay_taps: usize,
        num_doppler_taps: usize,
        subcarrier_spacing: f64,
    ) -> Result<Self> {
        Self::new(
            num_delay_taps,
            num_doppler_taps,
            subcarrier_spacing,
            num_delay_taps / 8,
        )
    }

    /// `M`: delay taps per frame, equal to the number of subcarriers.
    pub fn m(&self) -> usize {
        self.num_delay_taps
    }

    /// `N`: Doppler taps per frame, equal to the number of OFDM symbols.
    pub fn n(&self) -> usize {
        self.num_doppler_taps
    }

    pub fn subcarrier_spacing(&self) -> f64 {
        self.subcarrier_spacing
    }

    pub fn cp_length(&self) -> usize {
        self.cp_length
    }

    /// Useful symbol duration `T = 1/Δf`, CP excluded.
    pub fn symbol_time(&self) -> f64 {
        1.0 / self.subcarrier_spacing
    }

    pub fn sample_rate(&self) -> f64 {
        self.num_delay_taps as f64 * self.subcarrier_spacing
    }

    /// Samples per transmitted symbol, `M + L_cp`.
    pub fn symbol_len(&self) -> usize {
        self.num_delay_taps + self.cp_length
    }

    /// Samples per frame, `N·(M + L_cp)`.
    pub fn frame_len(&self) -> usize {
        self.num_doppler_taps * self.symbol_len()
    }

    pub fn grid_len(&self) -> usize {
        self.num_delay_taps * self.num_doppler_taps
    }

    /// Delay resolution `T/M`, seconds.
    pub fn delay_resolution(&self) -> f64 {
        self.symbol_time() / self.num_delay_taps as f64
    }

    /// Nominal Doppler resolution `1/(N·T)`, Hz.
    pub fn doppler_resolution(&self) -> f64 {
        1.0 / (self.num_doppler_taps as f64 * self.symbol_time())
    }

    /// Width of one Doppler tap as used by the channel phase ramp,
    /// `M·Δf / (N·(M + L_cp))`: the inverse of the CP-inclusive frame duration.
    ///
    /// All Hz ↔ tap conversions go through this value, so a path of `k` taps
    /// advances by exactly `2πk` over the transmitted frame.
    pub fn doppler_bin_width(&self) -> f64 {
        self.sample_rate() / self.frame_len() as f64
    }

    pub fn doppler_hz_to_taps(&self, doppler_hz: f64) -> f64 {
        doppler_hz / self.doppler_bin_width()
    }

    pub fn doppler_taps_to_hz(&self, taps: f64) -> f64 {
        taps * self.doppler_bin_width()
    }

    pub fn delay_s_to_taps(&self, delay_s: f64) -> f64 {
        delay_s * self.sample_rate()
    }

    pub fn delay_taps_to_s(&self, taps: f64) -> f64 {
        taps / self.sample_rate()
    }
}

/// Doppler shift `f_d = v·f_c/c` for a radial velocity in km/h.
pub fn doppler_from_velocity(velocity_kmh: f64, carrier_hz: f64) -> f64 {
    velocity_kmh / 3.6 * carrier_hz / crate::SPEED_OF_LIGHT
}
