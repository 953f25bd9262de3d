//! JSON run configuration. Unknown keys are rejected with their path.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::array::ArrayGeometry;
use crate::doa::DEFAULT_N_FFT_AZIMUTH;
use crate::error::{Error, Result};
use crate::metrics::SensorLayout;
use crate::range::Window;
use crate::scg::ScgOptions;
use crate::sim::Scene;
use crate::vitals::DEFAULT_BAND_HZ;
use crate::waveform::ChirpConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GeometryPreset {
    #[serde(rename = "paper-default")]
    CascadeBoard,
}

/// Either a named preset or explicit element lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GeometrySpec {
    Preset(GeometryPreset),
    Explicit(ArrayGeometry),
}

impl Default for GeometrySpec {
    fn default() -> Self {
        GeometrySpec::Preset(GeometryPreset::CascadeBoard)
    }
}

impl GeometrySpec {
    pub fn resolve(&self) -> ArrayGeometry {
        match self {
            GeometrySpec::Preset(GeometryPreset::CascadeBoard) => ArrayGeometry::cascade_board(),
            GeometrySpec::Explicit(g) => g.clone(),
        }
    }
}

fn default_n_fft_azimuth() -> usize {
    DEFAULT_N_FFT_AZIMUTH
}

fn default_true() -> bool {
    true
}

fn default_band() -> (f64, f64) {
    DEFAULT_BAND_HZ
}

fn default_n_elevation() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Range FFT length; defaults to the next power of two ≥ `n_adc`.
    #[serde(default)]
    pub n_fft_range: Option<usize>,
    #[serde(default = "default_n_fft_azimuth")]
    pub n_fft_azimuth: usize,
    #[serde(default = "default_true")]
    pub near_field: bool,
    #[serde(default = "default_band")]
    pub band_hz: (f64, f64),
    #[serde(default)]
    pub window: Window,
    /// Elevation grid size of exported angle maps.
    #[serde(default = "default_n_elevation")]
    pub n_elevation: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            n_fft_range: None,
            n_fft_azimuth: DEFAULT_N_FFT_AZIMUTH,
            near_field: true,
            band_hz: DEFAULT_BAND_HZ,
            window: Window::Rectangular,
            n_elevation: default_n_elevation(),
        }
    }
}

impl PipelineConfig {
    pub fn range_fft_len(&self, n_adc: usize) -> usize {
        self.n_fft_range
            .unwrap_or_else(|| n_adc.next_power_of_two())
    }
}

fn default_scg_rate() -> f64 {
    1000.0
}

fn default_axis_weights() -> [f64; 3] {
    [0.5, 0.25, 1.0]
}

fn default_scg_noise() -> f64 {
    1e-3
}

/// Synthetic accelerometer recording derived from the scene, for end-to-end
/// runs. Each labelled scatterer drives the sensor of its region; axis
/// weights scale the chest-normal motion into the three sensor axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScgSynthConfig {
    #[serde(default = "default_scg_rate")]
    pub sample_rate_hz: f64,
    #[serde(default = "default_axis_weights")]
    pub axis_weights: [f64; 3],
    /// White-noise standard deviation added to every axis, m/s².
    #[serde(default = "default_scg_noise")]
    pub noise_m_s2: f64,
    /// Constant offset added to every axis, m/s².
    #[serde(default)]
    pub bias_m_s2: f64,
    #[serde(default)]
    pub options: ScgOptions,
}

impl Default for ScgSynthConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: default_scg_rate(),
            axis_weights: default_axis_weights(),
            noise_m_s2: default_scg_noise(),
            bias_m_s2: 0.0,
            options: ScgOptions::default(),
        }
    }
}

/// Output file names used by `e2e`, relative to its output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputPaths {
    pub cube: PathBuf,
    pub traces: PathBuf,
    pub angle_map: PathBuf,
    pub scg_channels: PathBuf,
    pub scg_traces: PathBuf,
    pub report: PathBuf,
}

impl Default for OutputPaths {
    fn default() -> Self {
        Self {
            cube: "cube.mvdc".into(),
            traces: "traces.csv".into(),
            angle_map: "angle_map.csv".into(),
            scg_channels: "scg_channels.csv".into(),
            scg_traces: "scg_traces.csv".into(),
            report: "report.json".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub chirp: ChirpConfig,
    #[serde(default)]
    pub geometry: GeometrySpec,
    pub scene: Scene,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub layout: Option<SensorLayout>,
    #[serde(default)]
    pub scg: Option<ScgSynthConfig>,
    #[serde(default)]
    pub outputs: OutputPaths,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.chirp.validate()?;
        self.scene.validate()?;
        let p = &self.pipeline;
        let n_range = p.range_fft_len(self.chirp.n_adc);
        if !n_range.is_power_of_two() || n_range < self.chirp.n_adc {
            return Err(Error::InvalidNfft {
                n_fft: n_range,
                reason: "range FFT must be a power of two no shorter than n_adc",
            });
        }
        if !p.n_fft_azimuth.is_power_of_two() {
            return Err(Error::InvalidNfft {
                n_fft: p.n_fft_azimuth,
                reason: "azimuth FFT must be a power of two",
            });
        }
        if p.n_elevation < 2 {
            return Err(Error::InvalidConfig("n_elevation must be >= 2".into()));
        }
        if !(p.band_hz.0 >= 0.0 && p.band_hz.1 > p.band_hz.0) {
            return Err(Error::InvalidConfig(
                "band_hz must be an increasing pair".into(),
            ));
        }
        if let Some(layout) = &self.layout {
            layout.validate()?;
        }
        Ok(())
    }

    pub fn geometry(&self) -> ArrayGeometry {
        self.geometry.resolve()
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| Error::ConfigSchema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "chirp": {"fc": 77e9, "prt": 85.3e-6, "t_frame": 0.135, "n_adc": 512,
                  "fs": 7e6, "k_chirp": 63.005e12, "n_chirps_per_frame": 128, "n_frames": 50},
        "scene": {"points": [{"position": [3, 4, 0],
                   "motion": {"type": "sinusoid", "direction": [0.6, 0.8, 0],
                              "amplitude_m": 0.001, "frequency_hz": 1.0}}]}
    }"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.geometry(), ArrayGeometry::cascade_board());
        assert_eq!(cfg.pipeline.n_fft_azimuth, 128);
        assert_eq!(cfg.pipeline.range_fft_len(512), 512);
        assert!(cfg.layout.is_none());
    }

    #[test]
    fn unknown_key_reports_its_path() {
        let text = MINIMAL.replace("\"n_adc\": 512", "\"n_adc\": 512, \"bogus\": 1");
        match parse_config(&text) {
            Err(Error::ConfigSchema { path, message }) => {
                assert!(path.starts_with("chirp"), "{path}");
                assert!(message.contains("bogus"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
        let text = MINIMAL.replace("\"amplitude_m\"", "\"amp\": 1, \"amplitude_m\"");
        match parse_config(&text) {
            Err(Error::ConfigSchema { path, .. }) => {
                assert!(path.starts_with("scene.points[0].motion"), "{path}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn explicit_geometry_accepted() {
        let text = MINIMAL.replacen(
            "\"scene\"",
            "\"geometry\": {\"tx\": [[0,0]], \"rx\": [[0,0],[1,0]]}, \"scene\"",
            1,
        );
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.geometry().rx.len(), 2);
    }

    #[test]
    fn unknown_preset_rejected() {
        let text = MINIMAL.replacen("\"scene\"", "\"geometry\": \"round\", \"scene\"", 1);
        assert!(matches!(
            parse_config(&text),
            Err(Error::ConfigSchema { .. })
        ));
    }

    #[test]
    fn non_power_of_two_fft_rejected() {
        let text = MINIMAL.replacen(
            "\"scene\"",
            "\"pipeline\": {\"n_fft_azimuth\": 100}, \"scene\"",
            1,
        );
        assert!(matches!(
            parse_config(&text),
            Err(Error::InvalidNfft { .. })
        ));
    }
}
