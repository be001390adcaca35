//! Experiment configuration, loaded from TOML. Every field has a default, so
//! an empty file reproduces the reference system parameters.

use std::path::Path;

use isac_core::channel::PowerDelayProfile;
use isac_core::FrameGeometry;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub carrier_hz: f64,
    /// Pilot-to-data power ratio ρ.
    pub power_ratio: f64,
    pub snr_db: SnrGrid,
    pub comm: CommConfig,
    pub sensing: SensingConfig,
    pub ccdf: CcdfConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            carrier_hz: 6e9,
            power_ratio: 0.2,
            snr_db: SnrGrid::default(),
            comm: CommConfig::default(),
            sensing: SensingConfig::default(),
            ccdf: CcdfConfig::default(),
        }
    }
}

/// Inclusive SNR sweep in dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnrGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for SnrGrid {
    fn default() -> Self {
        Self {
            start: 0.0,
            stop: 30.0,
            step: 2.0,
        }
    }
}

impl SnrGrid {
    pub fn single(snr_db: f64) -> Self {
        Self {
            start: snr_db,
            stop: snr_db,
            step: 1.0,
        }
    }

    pub fn points(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.start + i as f64 * self.step).collect()
    }

    fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.stop.is_finite() && self.step.is_finite()) {
            return Err(HarnessError::Config("SNR grid must be finite".into()));
        }
        if self.step <= 0.0 || self.stop < self.start {
            return Err(HarnessError::Config(format!(
                "SNR grid {}:{}:{} is empty",
                self.start, self.stop, self.step
            )));
        }
        Ok(())
    }
}

impl std::str::FromStr for SnrGrid {
    type Err = HarnessError;

    /// `start:stop:step`, or a single value.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| HarnessError::Config(format!("bad SNR value '{t}'")))
        };
        let grid = match parts.as_slice() {
            [v] => SnrGrid::single(num(v)?),
            [a, b, c] => SnrGrid {
                start: num(a)?,
                stop: num(b)?,
                step: num(c)?,
            },
            _ => return Err(HarnessError::Config(format!("SNR grid '{s}' is not start:stop:step"))),
        };
        grid.validate()?;
        Ok(grid)
    }
}

/// How raw per-RS estimates are treated before interpolation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Refinement {
    Ls,
    Mmse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommConfig {
    pub subcarriers: usize,
    pub symbols: usize,
    pub subcarrier_spacing_hz: f64,
    pub cp_length: usize,
    pub velocity_kmh: f64,
    pub rs_spacing: usize,
    pub rs_seed: u64,
    /// Frames per SNR point.
    pub trials: usize,
    pub refinement: Refinement,
    /// Smallest equivalent-RS magnitude used for estimation.
    pub min_reference: f64,
    pub pdp: PdpConfig,
}

impl Default for CommConfig {
    fn default() -> Self {
        Self {
            subcarriers: 64,
            symbols: 16,
            subcarrier_spacing_hz: 60e3,
            // the longest EVA path lands on tap 10 at 3.84 MHz
            cp_length: 16,
            velocity_kmh: 30.0,
            rs_spacing: 4,
            rs_seed: 7,
            trials: 10_000,
            refinement: Refinement::Mmse,
            // drops reference cells where the pilot nearly cancels the RS
            min_reference: 0.2,
            pdp: PdpConfig::default(),
        }
    }
}

impl CommConfig {
    pub fn geometry(&self) -> Result<FrameGeometry> {
        Ok(FrameGeometry::new(
            self.subcarriers,
            self.symbols,
            self.subcarrier_spacing_hz,
            self.cp_length,
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdpConfig {
    pub delays_ns: Vec<f64>,
    pub powers_db: Vec<f64>,
}

impl Default for PdpConfig {
    fn default() -> Self {
        let eva = PowerDelayProfile::eva();
        Self {
            delays_ns: eva.delays_ns,
            powers_db: eva.powers_db,
        }
    }
}

impl PdpConfig {
    pub fn profile(&self) -> Result<PowerDelayProfile> {
        Ok(PowerDelayProfile::new(self.delays_ns.clone(), self.powers_db.clone())?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensingConfig {
    pub delay_taps: usize,
    pub doppler_taps: Vec<usize>,
    pub subcarrier_spacing_hz: f64,
    pub cp_length: usize,
    pub targets: usize,
    pub max_velocity_kmh: f64,
    pub trials: usize,
    pub refine_width: usize,
    /// Threshold as a multiple of the map median.
    pub threshold_factor: f64,
    pub sidelobe_guard: f64,
}

impl Default for SensingConfig {
    fn default() -> Self {
        Self {
            delay_taps: 64,
            doppler_taps: vec![64, 128, 256, 512],
            subcarrier_spacing_hz: 60e3,
            cp_length: 8,
            targets: 3,
            max_velocity_kmh: 500.0,
            trials: 500,
            refine_width: 3,
            threshold_factor: 8.0,
            sidelobe_guard: 2.0,
        }
    }
}

impl SensingConfig {
    pub fn geometry(&self, doppler_taps: usize) -> Result<FrameGeometry> {
        Ok(FrameGeometry::new(
            self.delay_taps,
            doppler_taps,
            self.subcarrier_spacing_hz,
            self.cp_length,
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CcdfConfig {
    /// Square pilot sizes; each must be `2^m − 1`.
    pub sizes: Vec<usize>,
    pub trials: usize,
    pub quantiles: Vec<f64>,
}

impl Default for CcdfConfig {
    fn default() -> Self {
        Self {
            sizes: vec![15, 63, 255],
            trials: 2000,
            quantiles: vec![0.5, 0.9, 0.99],
        }
    }
}

fn cfg_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| cfg_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Reject inconsistent settings before any simulation runs.
    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_hz > 0.0 && self.carrier_hz.is_finite()) {
            return Err(cfg_err("carrier frequency must be positive"));
        }
        if !(self.power_ratio >= 0.0 && self.power_ratio.is_finite()) {
            return Err(cfg_err("power ratio must be non-negative"));
        }
        self.snr_db.validate()?;

        let c = &self.comm;
        let geom = c.geometry()?;
        let pdp = c.pdp.profile()?;
        let max_tap = pdp.delay_taps(&geom).into_iter().max().unwrap_or(0);
        if max_tap > 0 && max_tap >= c.cp_length {
            return Err(cfg_err(format!(
                "comm cyclic prefix of {} samples does not cover the longest path at tap {max_tap}",
                c.cp_length
            )));
        }
        if c.rs_spacing == 0 || c.rs_spacing > c.subcarriers {
            return Err(cfg_err("RS spacing must be between 1 and the subcarrier count"));
        }
        if c.symbols < 2 {
            return Err(cfg_err("comm frame needs at least two symbols"));
        }
        if c.trials == 0 {
            return Err(cfg_err("comm trials must be positive"));
        }
        if !(c.velocity_kmh >= 0.0 && c.min_reference >= 0.0) {
            return Err(cfg_err("velocity and reference floor must be non-negative"));
        }

        let s = &self.sensing;
        if s.doppler_taps.is_empty() {
            return Err(cfg_err("sensing needs at least one Doppler size"));
        }
        for &n in &s.doppler_taps {
            s.geometry(n)?;
        }
        if s.targets == 0 || s.targets > s.cp_length {
            return Err(cfg_err(format!(
                "{} targets cannot take distinct delays below a CP of {}",
                s.targets, s.cp_length
            )));
        }
        if s.trials == 0 {
            return Err(cfg_err("sensing trials must be positive"));
        }
        if s.refine_width.is_multiple_of(2) {
            return Err(cfg_err("refine width must be odd"));
        }
        if !(s.max_velocity_kmh >= 0.0 && s.threshold_factor >= 0.0 && s.sidelobe_guard >= 0.0) {
            return Err(cfg_err("sensing velocity, threshold and guard must be non-negative"));
        }

        let k = &self.ccdf;
        if k.trials == 0 {
            return Err(cfg_err("ccdf trials must be positive"));
        }
        for &size in &k.sizes {
            if size < 3 || !(size + 1).is_power_of_two() || size > 1023 {
                return Err(cfg_err(format!("ccdf size {size} is not an m-sequence length")));
            }
        }
        if k.quantiles.iter().any(|q| !(0.0..=1.0).contains(q)) {
            return Err(cfg_err("quantiles must lie in [0, 1]"));
        }
        Ok(())
    }

    /// First 16 hex digits of SHA-256 over the canonical JSON form.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(digest)[..16].to_string()
    }
}
