//! FMCW chirp parameters and the quantities derived from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Operating band of the cascaded 77 GHz front end, Hz.
pub const BAND_77_GHZ_HZ: (f64, f64) = (76e9, 81e9);

/// Chirp and frame timing of one radar configuration.
///
/// The fast-time ADC window `n_adc / fs` is identified with the chirp
/// duration `T`, so the swept bandwidth is `k_chirp * n_adc / fs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChirpConfig {
    /// Carrier (start) frequency, Hz.
    pub fc: f64,
    /// Pulse repetition time, s.
    pub prt: f64,
    /// Frame duration, s. Slow-time sampling interval.
    pub t_frame: f64,
    /// ADC samples per chirp.
    pub n_adc: usize,
    /// ADC sampling frequency, Hz.
    pub fs: f64,
    /// Chirp slope, Hz/s.
    pub k_chirp: f64,
    pub n_chirps_per_frame: usize,
    pub n_frames: usize,
}

impl ChirpConfig {
    /// Single-target simulation chirp: 512 samples at 7 MHz, 50 frames of 135 ms.
    pub fn single_target() -> Self {
        Self {
            fc: 77e9,
            prt: 85.3e-6,
            t_frame: 0.135,
            n_adc: 512,
            fs: 7e6,
            k_chirp: 63.005e12,
            n_chirps_per_frame: 128,
            n_frames: 50,
        }
    }

    /// Chest-phantom chirp: 256 samples at 5 MHz, 20 Hz frame rate, 3 minutes.
    pub fn phantom() -> Self {
        Self {
            fc: 77e9,
            prt: 70e-6,
            t_frame: 0.05,
            n_adc: 256,
            fs: 5e6,
            k_chirp: 65.998e12,
            n_chirps_per_frame: 1,
            n_frames: 3600,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("fc", self.fc),
            ("prt", self.prt),
            ("t_frame", self.t_frame),
            ("fs", self.fs),
            ("k_chirp", self.k_chirp),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be finite and strictly positive, got {value}"
                )));
            }
        }
        let counts = [
            ("n_adc", self.n_adc),
            ("n_chirps_per_frame", self.n_chirps_per_frame),
            ("n_frames", self.n_frames),
        ];
        for (name, value) in counts {
            if value == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be non-zero")));
            }
        }
        let window = self.n_adc as f64 / self.fs;
        if window > self.prt {
            return Err(Error::InvalidConfig(format!(
                "ADC window {window:.3e} s exceeds the pulse repetition time {:.3e} s",
                self.prt
            )));
        }
        Ok(())
    }

    /// [`validate`](Self::validate) plus the 76-81 GHz band check.
    pub fn validate_band(&self) -> Result<()> {
        self.validate()?;
        let (lo, hi) = BAND_77_GHZ_HZ;
        if !(lo..=hi).contains(&self.fc) {
            return Err(Error::InvalidConfig(format!(
                "carrier {} Hz outside the {lo}..{hi} Hz band",
                self.fc
            )));
        }
        Ok(())
    }

    pub fn frame_rate(&self) -> f64 {
        1.0 / self.t_frame
    }
}

/// Quantities that follow from a [`ChirpConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedWaveform {
    /// Swept bandwidth over the ADC window, Hz.
    pub bandwidth_b: f64,
    /// c / 2B, m.
    pub range_resolution: f64,
    /// c / fc, m.
    pub wavelength: f64,
    /// ADC window n_adc / fs, s.
    pub pulse_window_t: f64,
}

pub fn derive_waveform(cfg: &ChirpConfig) -> Result<DerivedWaveform> {
    cfg.validate()?;
    let pulse_window_t = cfg.n_adc as f64 / cfg.fs;
    let bandwidth_b = cfg.k_chirp * pulse_window_t;
    Ok(DerivedWaveform {
        bandwidth_b,
        range_resolution: SPEED_OF_LIGHT / (2.0 * bandwidth_b),
        wavelength: SPEED_OF_LIGHT / cfg.fc,
        pulse_window_t,
    })
}
