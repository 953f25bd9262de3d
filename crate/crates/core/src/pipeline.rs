//! End-to-end processing: range profile, subject bin, beamforming and
//! per-region displacement, plus synthetic accelerometer records for
//! simulated scenes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::array::ArrayGeometry;
use crate::doa::{AngleMap, DoaProcessor};
use crate::error::{Error, Result};
use crate::io::{PipelineConfig, ScgRecord, ScgSynthConfig};
use crate::metrics::{compute_alignment, ComparisonReport, RegionAngles, SensorLayout};
use crate::range::{
    bin_width_m, extract_range_bin_direct, locate_in_profile, range_profile_streaming,
    SubjectLocation, Window,
};
use crate::scg::ScgChannel;
use crate::sim::{RawDataCube, Scene};
use crate::vitals::{displacement_trace, dominant_frequency, DisplacementTrace};
use crate::waveform::derive_waveform;

/// Region name used when no sensor layout is given and the strongest
/// direction is tracked instead.
pub const PEAK_REGION: &str = "peak";

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessOptions {
    pub n_fft_range: usize,
    pub n_fft_azimuth: usize,
    pub near_field: bool,
    pub window: Window,
    pub n_elevation: usize,
}

impl ProcessOptions {
    pub fn from_config(p: &PipelineConfig, n_adc: usize) -> Self {
        Self {
            n_fft_range: p.range_fft_len(n_adc),
            n_fft_azimuth: p.n_fft_azimuth,
            near_field: p.near_field,
            window: p.window,
            n_elevation: p.n_elevation,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProcessOutput {
    pub location: SubjectLocation,
    /// Peak of the azimuth power summed over frames, rad.
    pub azimuth_peak_rad: f64,
    /// Elevation of the strongest cell in the first frame's angle map, rad.
    pub elevation_peak_rad: f64,
    /// Boresight range used for near-field compensation, if enabled.
    pub calibration_range_m: Option<f64>,
    pub angle_map: AngleMap,
    pub regions: Vec<RegionAngles>,
    pub traces: Vec<DisplacementTrace>,
}

/// Runs the radar chain on a cube. With a layout, one trace per sensor
/// region is produced at its alignment angles and the compensation range is
/// `z_A`; without one, a single trace follows the strongest direction and the
/// compensation range is the detected subject range.
pub fn process_cube(
    cube: &RawDataCube,
    geom: &ArrayGeometry,
    opts: &ProcessOptions,
    layout: Option<&SensorLayout>,
) -> Result<ProcessOutput> {
    cube.validate()?;
    if cube.n_tx != geom.n_tx() || cube.n_rx != geom.n_rx() {
        return Err(Error::InvalidConfig(format!(
            "cube has {}x{} channels, geometry {}x{}",
            cube.n_tx,
            cube.n_rx,
            geom.n_tx(),
            geom.n_rx()
        )));
    }
    let wf = derive_waveform(&cube.chirp)?;
    let profile = range_profile_streaming(cube, opts.n_fft_range, opts.window)?;
    let location = locate_in_profile(&profile, bin_width_m(cube, opts.n_fft_range)?);
    let bins = extract_range_bin_direct(cube, opts.n_fft_range, location.bin, opts.window)?;

    let mut doa = DoaProcessor::new(geom, opts.n_fft_azimuth)?;
    let mut calibration_range_m = None;
    if opts.near_field {
        let z = layout.map_or(location.range_m, |l| l.z_a);
        if z > 0.0 {
            doa = doa.with_calibration(wf.wavelength, z)?;
            calibration_range_m = Some(z);
        }
    }

    let power = doa.integrated_azimuth_power(&bins)?;
    let az_l = crate::doa::argmax_grid(&power, opts.n_fft_azimuth);
    let azimuth_peak_rad = crate::doa::grid_angle(az_l, opts.n_fft_azimuth);
    let angle_map = doa.angle_map(&bins.snapshot(0), opts.n_elevation)?;
    let elevation_peak_rad = angle_map.peak().1;

    let regions = match layout {
        Some(l) => compute_alignment(l)?,
        None => vec![RegionAngles {
            region: PEAK_REGION.into(),
            azimuth_rad: azimuth_peak_rad,
            elevation_rad: elevation_peak_rad,
        }],
    };
    let targets: Vec<(String, f64, f64)> = regions
        .iter()
        .map(|r| (r.region.clone(), r.azimuth_rad, r.elevation_rad))
        .collect();
    let signals = doa.select_region_signals(&bins, &targets)?;
    let traces = signals
        .iter()
        .map(|s| {
            displacement_trace(
                &s.region,
                &s.slowtime,
                wf.wavelength,
                cube.chirp.frame_rate(),
            )
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ProcessOutput {
        location,
        azimuth_peak_rad,
        elevation_peak_rad,
        calibration_range_m,
        angle_map,
        regions,
        traces,
    })
}

/// Per-region figures of a processed run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSummary {
    pub region: String,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub dominant_frequency_hz: Option<f64>,
    pub phase_peak_to_peak_rad: Option<f64>,
    pub displacement_peak_to_peak_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub subject_bin: usize,
    pub subject_range_m: f64,
    pub azimuth_peak_deg: f64,
    pub elevation_peak_deg: f64,
    pub near_field: bool,
    pub calibration_range_m: Option<f64>,
    pub regions: Vec<RegionSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ComparisonReport>,
}

impl RunReport {
    pub fn new(out: &ProcessOutput, band: (f64, f64)) -> Self {
        let regions = out
            .regions
            .iter()
            .zip(&out.traces)
            .map(|(r, t)| RegionSummary {
                region: r.region.clone(),
                azimuth_deg: r.azimuth_rad.to_degrees(),
                elevation_deg: r.elevation_rad.to_degrees(),
                dominant_frequency_hz: dominant_frequency(t, band).ok(),
                phase_peak_to_peak_rad: t.phase_peak_to_peak(),
                displacement_peak_to_peak_mm: t.peak_to_peak_mm(),
            })
            .collect();
        Self {
            subject_bin: out.location.bin,
            subject_range_m: out.location.range_m,
            azimuth_peak_deg: out.azimuth_peak_rad.to_degrees(),
            elevation_peak_deg: out.elevation_peak_rad.to_degrees(),
            near_field: out.calibration_range_m.is_some(),
            calibration_range_m: out.calibration_range_m,
            regions,
            comparison: None,
        }
    }
}

/// Accelerometer recording matching a simulated scene: the sensor of each
/// region follows the acceleration of the scatterer labelled with that
/// region, scaled per axis, plus bias and white noise. The ECG column holds
/// a narrow pulse at each cycle of the first scatterer's motion.
pub fn synthesize_scg_record(
    scene: &Scene,
    cfg: &ScgSynthConfig,
    regions: &[&str],
    duration_s: f64,
) -> Result<ScgRecord> {
    let fs = cfg.sample_rate_hz;
    if !(fs.is_finite() && fs > 0.0) {
        return Err(Error::InvalidConfig("SCG sample rate must be > 0".into()));
    }
    let n = (duration_s * fs).round() as usize;
    let time_s: Vec<f64> = (0..n).map(|i| i as f64 / fs).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
    rng.set_stream(u64::MAX);
    let noise = Normal::new(0.0, cfg.noise_m_s2.max(0.0))
        .map_err(|e| Error::InvalidConfig(format!("SCG noise: {e}")))?;

    let channels = regions
        .iter()
        .map(|&region| {
            let point = scene
                .points
                .iter()
                .find(|p| p.region.as_deref() == Some(region));
            let accel: Vec<f64> = time_s
                .iter()
                .map(|&t| point.map_or(0.0, |p| p.motion.acceleration(t)))
                .collect();
            let mut axis = |w: f64| -> Vec<f64> {
                accel
                    .iter()
                    .map(|a| w * a + cfg.bias_m_s2 + noise.sample(&mut rng))
                    .collect()
            };
            let ax = axis(cfg.axis_weights[0]);
            let ay = axis(cfg.axis_weights[1]);
            let az = axis(cfg.axis_weights[2]);
            ScgChannel {
                region: region.to_string(),
                fs,
                ax,
                ay,
                az,
            }
        })
        .collect();

    let beat = scene.points.first().and_then(|p| match &p.motion {
        crate::sim::Motion::Sinusoid {
            frequency_hz,
            phase_rad,
            ..
        } if *frequency_hz > 0.0 => Some((*frequency_hz, *phase_rad)),
        _ => None,
    });
    let ecg = time_s
        .iter()
        .map(|&t| match beat {
            Some((f, ph)) => {
                let cycle = t * f + ph / (2.0 * std::f64::consts::PI);
                let d = (cycle - cycle.round()) / f;
                (-0.5 * (d / 0.01).powi(2)).exp()
            }
            None => 0.0,
        })
        .collect();
    Ok(ScgRecord {
        time_s,
        channels,
        ecg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{simulate, Motion, ScatterPoint, SimMode};
    use crate::waveform::ChirpConfig;

    #[test]
    fn single_boresight_target_without_layout() {
        let cfg = ChirpConfig {
            n_adc: 128,
            fs: 2e6,
            prt: 70e-6,
            n_frames: 40,
            t_frame: 0.05,
            ..ChirpConfig::phantom()
        };
        let mut p = ScatterPoint::fixed([0.0, 1.0, 0.0]);
        p.motion = Motion::Sinusoid {
            direction: [0.0, 1.0, 0.0],
            amplitude_m: 2e-4,
            frequency_hz: 1.0,
            phase_rad: 0.0,
        };
        let mut scene = Scene::new(vec![p]);
        scene.mode = SimMode::PlaneWave;
        let geom = ArrayGeometry::cascade_board();
        let cube = simulate(&scene, &cfg, &geom).unwrap();
        let opts = ProcessOptions {
            n_fft_range: 128,
            n_fft_azimuth: 128,
            near_field: false,
            window: Window::Rectangular,
            n_elevation: 32,
        };
        let out = process_cube(&cube, &geom, &opts, None).unwrap();
        assert_eq!(out.traces.len(), 1);
        assert_eq!(out.traces[0].region, PEAK_REGION);
        assert!(out.azimuth_peak_rad.abs() < 1e-12);
        let bw = out.location.range_m - 1.0;
        assert!(bw.abs() < derive_waveform(&cfg).unwrap().range_resolution);
    }

    #[test]
    fn synthetic_scg_follows_labelled_point() {
        let mut p = ScatterPoint::fixed([0.0, 0.5, 0.0]);
        p.region = Some("A".into());
        p.motion = Motion::Sinusoid {
            direction: [0.0, 1.0, 0.0],
            amplitude_m: 1e-4,
            frequency_hz: 1.0,
            phase_rad: 0.0,
        };
        let scene = Scene::new(vec![p]);
        let cfg = ScgSynthConfig {
            noise_m_s2: 0.0,
            ..ScgSynthConfig::default()
        };
        let rec = synthesize_scg_record(&scene, &cfg, &["A", "P"], 2.0).unwrap();
        assert_eq!(rec.time_s.len(), 2000);
        let w = 2.0 * std::f64::consts::PI;
        let want = -1e-4 * w * w * (w * 0.25).sin();
        assert!((rec.channels[0].az[250] - want).abs() < 1e-12);
        assert!(rec.channels[1].az.iter().all(|v| *v == 0.0));
        assert!((rec.ecg[1000] - 1.0).abs() < 1e-12);
    }
}
