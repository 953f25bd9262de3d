//! Point-scatterer scene simulation producing complex IF data cubes.
//!
//! Each frame is a single chirp: scatterer delays are frozen for the frame and
//! evaluated at `m * t_frame`. Fast time is centred on the chirp so the phase of
//! a range bin equals `2π fc τ` plus a delay-independent constant.

use std::f64::consts::PI;

use num_complex::{Complex, Complex32, Complex64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::{build_virtual_array, cosines_of_point, ArrayGeometry};
use crate::error::{Error, Result};
use crate::waveform::{derive_waveform, ChirpConfig, SPEED_OF_LIGHT};

/// Displacement of a scatterer along a fixed unit direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Motion {
    Static,
    /// `amplitude_m * sin(2π f t + phase_rad)`.
    Sinusoid {
        direction: [f64; 3],
        amplitude_m: f64,
        frequency_hz: f64,
        #[serde(default)]
        phase_rad: f64,
    },
    /// Uniformly sampled displacement, linearly interpolated and held at the ends.
    Series {
        direction: [f64; 3],
        sample_rate_hz: f64,
        values_m: Vec<f64>,
    },
}

impl Motion {
    pub fn direction(&self) -> [f64; 3] {
        match self {
            Motion::Static => [0.0; 3],
            Motion::Sinusoid { direction, .. } | Motion::Series { direction, .. } => *direction,
        }
    }

    /// Signed displacement along [`direction`](Self::direction) at time `t`, metres.
    pub fn displacement(&self, t: f64) -> f64 {
        match self {
            Motion::Static => 0.0,
            Motion::Sinusoid {
                amplitude_m,
                frequency_hz,
                phase_rad,
                ..
            } => amplitude_m * (2.0 * PI * frequency_hz * t + phase_rad).sin(),
            Motion::Series {
                sample_rate_hz,
                values_m,
                ..
            } => {
                if values_m.is_empty() {
                    return 0.0;
                }
                let x = (t * sample_rate_hz).max(0.0);
                let i = x.floor() as usize;
                if i + 1 >= values_m.len() {
                    return *values_m.last().expect("non-empty");
                }
                let frac = x - i as f64;
                values_m[i] * (1.0 - frac) + values_m[i + 1] * frac
            }
        }
    }

    /// Second time derivative of [`displacement`](Self::displacement), m/s².
    /// Sampled series use a central difference one sample wide.
    pub fn acceleration(&self, t: f64) -> f64 {
        match self {
            Motion::Static => 0.0,
            Motion::Sinusoid {
                amplitude_m,
                frequency_hz,
                phase_rad,
                ..
            } => {
                let w = 2.0 * PI * frequency_hz;
                -amplitude_m * w * w * (w * t + phase_rad).sin()
            }
            Motion::Series { sample_rate_hz, .. } => {
                let h = 1.0 / sample_rate_hz;
                (self.displacement(t + h) - 2.0 * self.displacement(t) + self.displacement(t - h))
                    / (h * h)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let check_dir = |d: &[f64; 3]| {
            let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            if (n - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidConfig(format!(
                    "motion direction must be a unit vector, |d| = {n}"
                )));
            }
            Ok(())
        };
        match self {
            Motion::Static => Ok(()),
            Motion::Sinusoid {
                direction,
                amplitude_m,
                frequency_hz,
                phase_rad,
            } => {
                check_dir(direction)?;
                if !(amplitude_m.is_finite() && *amplitude_m >= 0.0) {
                    return Err(Error::InvalidConfig("amplitude_m must be >= 0".into()));
                }
                if !(frequency_hz.is_finite() && phase_rad.is_finite()) {
                    return Err(Error::InvalidConfig("non-finite motion parameter".into()));
                }
                Ok(())
            }
            Motion::Series {
                direction,
                sample_rate_hz,
                values_m,
            } => {
                check_dir(direction)?;
                if !(sample_rate_hz.is_finite() && *sample_rate_hz > 0.0) {
                    return Err(Error::InvalidConfig(
                        "series sample_rate_hz must be > 0".into(),
                    ));
                }
                if values_m.is_empty() || values_m.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidConfig(
                        "series values_m must be non-empty and finite".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

fn default_reflectivity() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatterPoint {
    /// Rest position `[x, y, z]` in metres: `x` along the azimuth axis of the
    /// array, `y` boresight, `z` elevation.
    pub position: [f64; 3],
    pub motion: Motion,
    #[serde(default = "default_reflectivity")]
    pub reflectivity: f64,
    /// Optional region label, used to tie a point to a sensor position.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
}

impl ScatterPoint {
    pub fn fixed(position: [f64; 3]) -> Self {
        Self {
            position,
            motion: Motion::Static,
            reflectivity: 1.0,
            region: None,
        }
    }

    pub fn position_at(&self, t: f64) -> [f64; 3] {
        let d = self.motion.displacement(t);
        let dir = self.motion.direction();
        [
            self.position[0] + d * dir[0],
            self.position[1] + d * dir[1],
            self.position[2] + d * dir[2],
        ]
    }
}

/// Plane-wave factorisation or exact per-channel path lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimMode {
    PlaneWave,
    ExactPath,
    /// Exact paths when any scatterer lies inside `2 D² / λ`, otherwise plane wave.
    #[default]
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub points: Vec<ScatterPoint>,
    /// Per-sample SNR; `None` (or +∞) disables noise.
    #[serde(default)]
    pub snr_db: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: SimMode,
}

impl Scene {
    pub fn new(points: Vec<ScatterPoint>) -> Self {
        Self {
            points,
            snr_db: None,
            seed: 0,
            mode: SimMode::Auto,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::InvalidConfig(
                "scene needs at least one point".into(),
            ));
        }
        for p in &self.points {
            if p.position.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig("non-finite point position".into()));
            }
            if !(p.reflectivity.is_finite() && p.reflectivity > 0.0) {
                return Err(Error::InvalidConfig("reflectivity must be > 0".into()));
            }
            p.motion.validate()?;
        }
        if let Some(snr) = self.snr_db {
            if snr.is_nan() || snr == f64::NEG_INFINITY {
                return Err(Error::InvalidConfig("snr_db must be finite".into()));
            }
        }
        Ok(())
    }

    /// Mode actually used for `geom` at `wavelength`.
    pub fn resolved_mode(&self, geom: &ArrayGeometry, wavelength: f64) -> SimMode {
        match self.mode {
            SimMode::Auto => {
                let d = geom.aperture_m(wavelength);
                let far = 2.0 * d * d / wavelength;
                let near = self.points.iter().any(|p| norm(p.position) < far);
                if near {
                    SimMode::ExactPath
                } else {
                    SimMode::PlaneWave
                }
            }
            m => m,
        }
    }
}

/// Complex IF samples indexed `(frame, tx, rx, sample)`, frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataCube {
    pub chirp: ChirpConfig,
    pub n_frames: usize,
    pub n_tx: usize,
    pub n_rx: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub samples: Vec<Complex32>,
}

impl RawDataCube {
    /// All-zero cube. The stored chirp records one chirp per frame, the only
    /// one the cube holds.
    pub fn zeros(chirp: ChirpConfig, n_tx: usize, n_rx: usize) -> Self {
        let chirp = ChirpConfig {
            n_chirps_per_frame: 1,
            ..chirp
        };
        let len = chirp.n_frames * n_tx * n_rx * chirp.n_adc;
        Self {
            chirp,
            n_frames: chirp.n_frames,
            n_tx,
            n_rx,
            n_samples: chirp.n_adc,
            seed: 0,
            samples: vec![Complex32::new(0.0, 0.0); len],
        }
    }

    pub fn n_channels(&self) -> usize {
        self.n_tx * self.n_rx
    }

    pub fn frame_len(&self) -> usize {
        self.n_channels() * self.n_samples
    }

    pub fn index(&self, frame: usize, tx: usize, rx: usize, sample: usize) -> usize {
        ((frame * self.n_tx + tx) * self.n_rx + rx) * self.n_samples + sample
    }

    /// Fast-time samples of channel `c = tx * n_rx + rx` in `frame`.
    pub fn channel(&self, frame: usize, c: usize) -> &[Complex32] {
        let start = (frame * self.n_channels() + c) * self.n_samples;
        &self.samples[start..start + self.n_samples]
    }

    pub fn frame(&self, frame: usize) -> &[Complex32] {
        let n = self.frame_len();
        &self.samples[frame * n..(frame + 1) * n]
    }

    /// Checks dimensions against the metadata and that all samples are finite.
    pub fn validate(&self) -> Result<()> {
        if self.n_samples != self.chirp.n_adc || self.n_frames != self.chirp.n_frames {
            return Err(Error::InvalidConfig(
                "cube dimensions disagree with its chirp configuration".into(),
            ));
        }
        if self.samples.len() != self.n_frames * self.frame_len() {
            return Err(Error::InvalidConfig("cube sample count mismatch".into()));
        }
        if self
            .samples
            .iter()
            .any(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(Error::InvalidConfig(
                "cube contains non-finite samples".into(),
            ));
        }
        Ok(())
    }
}

fn norm(p: [f64; 3]) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    norm([a[0] - b[0], a[1] - b[1], a[2] - b[2]])
}

/// Two-way delay `2 |p(t)| / c` of a scatterer seen from the array origin.
pub fn point_delay(p: &ScatterPoint, frame_time: f64) -> f64 {
    2.0 * norm(p.position_at(frame_time)) / SPEED_OF_LIGHT
}

/// Fast-time instant of ADC sample `n`, centred on the chirp.
pub fn fast_time(n: usize, cfg: &ChirpConfig) -> f64 {
    (n as f64 - 0.5 * (cfg.n_adc as f64 - 1.0)) / cfg.fs
}

/// Adds `amp * exp(j (2π K τ t_n + 2π fc τ))` to `out` for every fast-time sample.
fn add_tone(out: &mut [Complex64], cfg: &ChirpConfig, tau: f64, amp: Complex64) {
    let w = 2.0 * PI * cfg.k_chirp * tau;
    let start = amp * Complex64::from_polar(1.0, w * fast_time(0, cfg) + 2.0 * PI * cfg.fc * tau);
    let step = Complex64::from_polar(1.0, w / cfg.fs);
    // Re-anchor periodically so the recurrence cannot drift.
    const ANCHOR: usize = 64;
    let mut z = start;
    for (n, o) in out.iter_mut().enumerate() {
        if n % ANCHOR == 0 && n > 0 {
            z = amp * Complex64::from_polar(1.0, w * fast_time(n, cfg) + 2.0 * PI * cfg.fc * tau);
        }
        *o += z;
        z *= step;
    }
}

/// Noise-free IF samples of frame `m`, laid out `(tx, rx, sample)`.
pub fn synthesize_frame(
    scene: &Scene,
    cfg: &ChirpConfig,
    geom: &ArrayGeometry,
    m: usize,
) -> Result<Vec<Complex64>> {
    let wf = derive_waveform(cfg)?;
    if m >= cfg.n_frames {
        return Err(Error::OutOfRange {
            index: m,
            limit: cfg.n_frames,
        });
    }
    let va = build_virtual_array(geom)?;
    let mode = scene.resolved_mode(geom, wf.wavelength);
    let t = m as f64 * cfg.t_frame;
    let n = cfg.n_adc;
    let mut out = vec![Complex64::new(0.0, 0.0); va.elements.len() * n];

    let tx_m: Vec<[f64; 3]> = geom.tx.iter().map(|p| p.to_meters(wf.wavelength)).collect();
    let rx_m: Vec<[f64; 3]> = geom.rx.iter().map(|p| p.to_meters(wf.wavelength)).collect();

    for point in &scene.points {
        let pos = point.position_at(t);
        let amp = Complex64::new(point.reflectivity, 0.0);
        match mode {
            SimMode::ExactPath => {
                let d_tx: Vec<f64> = tx_m.iter().map(|&e| dist(pos, e)).collect();
                let d_rx: Vec<f64> = rx_m.iter().map(|&e| dist(pos, e)).collect();
                for (c, e) in va.elements.iter().enumerate() {
                    let tau = (d_tx[e.tx] + d_rx[e.rx]) / SPEED_OF_LIGHT;
                    add_tone(&mut out[c * n..(c + 1) * n], cfg, tau, amp);
                }
            }
            _ => {
                let tau = 2.0 * norm(pos) / SPEED_OF_LIGHT;
                let (u, v) = cosines_of_point(pos);
                for (c, e) in va.elements.iter().enumerate() {
                    add_tone(
                        &mut out[c * n..(c + 1) * n],
                        cfg,
                        tau,
                        amp * e.channel_factor(u, v),
                    );
                }
            }
        }
    }
    Ok(out)
}

/// Simulates every frame (in parallel) and adds noise when `scene.snr_db` is set.
pub fn simulate(scene: &Scene, cfg: &ChirpConfig, geom: &ArrayGeometry) -> Result<RawDataCube> {
    scene.validate()?;
    cfg.validate()?;
    let frames: Vec<Vec<Complex64>> = (0..cfg.n_frames)
        .into_par_iter()
        .map(|m| synthesize_frame(scene, cfg, geom, m))
        .collect::<Result<_>>()?;
    let mut cube = RawDataCube::zeros(*cfg, geom.n_tx(), geom.n_rx());
    cube.seed = scene.seed;
    let frame_len = cube.frame_len();
    cube.samples
        .par_chunks_mut(frame_len)
        .zip(frames.par_iter())
        .for_each(|(dst, src)| {
            for (d, s) in dst.iter_mut().zip(src) {
                *d = Complex::new(s.re as f32, s.im as f32);
            }
        });
    match scene.snr_db {
        Some(snr) if snr.is_finite() => add_noise(cube, snr, scene.seed),
        _ => Ok(cube),
    }
}

/// Adds circularly-symmetric complex Gaussian noise at `snr_db` relative to the
/// cube's mean sample power. Frame `m` draws from ChaCha8 stream `m` of `seed`,
/// so the result does not depend on thread scheduling. `+∞` is a no-op.
pub fn add_noise(mut cube: RawDataCube, snr_db: f64, seed: u64) -> Result<RawDataCube> {
    if snr_db == f64::INFINITY {
        return Ok(cube);
    }
    if !snr_db.is_finite() {
        return Err(Error::InvalidConfig("snr_db must be finite".into()));
    }
    let total: f64 = cube.samples.par_iter().map(|z| z.norm_sqr() as f64).sum();
    let signal_power = total / cube.samples.len().max(1) as f64;
    let noise_power = signal_power / 10f64.powf(snr_db / 10.0);
    let sigma = (noise_power / 2.0).sqrt();
    if sigma == 0.0 {
        return Ok(cube);
    }
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and positive");
    let frame_len = cube.frame_len();
    cube.samples
        .par_chunks_mut(frame_len)
        .enumerate()
        .for_each(|(m, frame)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(m as u64);
            for z in frame.iter_mut() {
                let re = normal.sample(&mut rng);
                let im = normal.sample(&mut rng);
                *z += Complex32::new(re as f32, im as f32);
            }
        });
    Ok(cube)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::Position;
    use approx::assert_relative_eq;

    fn small_cfg(n_frames: usize) -> ChirpConfig {
        ChirpConfig {
            n_frames,
            ..ChirpConfig::single_target()
        }
    }

    fn single_pair() -> ArrayGeometry {
        ArrayGeometry {
            tx: vec![Position::new(0, 0)],
            rx: vec![Position::new(0, 0)],
        }
    }

    #[test]
    fn static_point_delay_at_five_metres() {
        let p = ScatterPoint::fixed([3.0, 4.0, 0.0]);
        assert_relative_eq!(point_delay(&p, 0.0), 10.0 / SPEED_OF_LIGHT);
        assert_relative_eq!(point_delay(&p, 0.0), 33.356e-9, max_relative = 1e-4);
    }

    #[test]
    fn point_at_origin_has_zero_delay() {
        assert_eq!(point_delay(&ScatterPoint::fixed([0.0; 3]), 1.0), 0.0);
    }

    #[test]
    fn delay_at_sinusoid_peak() {
        let p = ScatterPoint {
            position: [0.0, 5.0, 0.0],
            motion: Motion::Sinusoid {
                direction: [0.0, 1.0, 0.0],
                amplitude_m: 1e-3,
                frequency_hz: 1.0,
                phase_rad: 0.0,
            },
            reflectivity: 1.0,
            region: None,
        };
        assert_relative_eq!(
            point_delay(&p, 0.25),
            2.0 * 5.001 / SPEED_OF_LIGHT,
            max_relative = 1e-12
        );
    }

    #[test]
    fn series_motion_interpolates_and_holds() {
        let m = Motion::Series {
            direction: [0.0, 1.0, 0.0],
            sample_rate_hz: 2.0,
            values_m: vec![0.0, 1.0, 3.0],
        };
        assert_relative_eq!(m.displacement(0.25), 0.5);
        assert_relative_eq!(m.displacement(0.75), 2.0);
        assert_relative_eq!(m.displacement(10.0), 3.0);
    }

    #[test]
    fn single_static_point_is_constant_modulus_tone() {
        let cfg = small_cfg(1);
        let scene = Scene::new(vec![ScatterPoint::fixed([3.0, 4.0, 0.0])]);
        let frame = synthesize_frame(&scene, &cfg, &single_pair(), 0).unwrap();
        for z in &frame {
            assert_relative_eq!(z.norm(), 1.0, epsilon = 1e-9);
        }
        // Phase step equals 2π K τ / fs.
        let tau = 10.0 / SPEED_OF_LIGHT;
        let want = 2.0 * PI * cfg.k_chirp * tau / cfg.fs;
        for w in frame.windows(2) {
            let got = (w[1] * w[0].conj()).arg();
            assert!((got - want).abs() < 1e-9);
        }
    }

    #[test]
    fn beat_frequency_of_five_metre_target() {
        let cfg = small_cfg(1);
        let tau = 10.0 / SPEED_OF_LIGHT;
        let f_beat = cfg.k_chirp * tau;
        assert_relative_eq!(f_beat, 2.10e6, max_relative = 5e-3);
        let bin = f_beat / cfg.fs * cfg.n_adc as f64;
        assert!((bin - 154.0).abs() < 1.0, "bin {bin}");
    }

    #[test]
    fn frame_index_out_of_range() {
        let cfg = small_cfg(2);
        let scene = Scene::new(vec![ScatterPoint::fixed([0.0, 1.0, 0.0])]);
        assert!(matches!(
            synthesize_frame(&scene, &cfg, &single_pair(), 2),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn rejects_zero_samples() {
        let mut cfg = small_cfg(1);
        cfg.n_adc = 0;
        let scene = Scene::new(vec![ScatterPoint::fixed([0.0, 1.0, 0.0])]);
        assert!(matches!(
            simulate(&scene, &cfg, &single_pair()),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn rejects_bad_scene() {
        let cfg = small_cfg(1);
        assert!(simulate(&Scene::new(vec![]), &cfg, &single_pair()).is_err());
        let mut p = ScatterPoint::fixed([0.0, 1.0, 0.0]);
        p.motion = Motion::Sinusoid {
            direction: [1.0, 1.0, 0.0],
            amplitude_m: 1e-3,
            frequency_hz: 1.0,
            phase_rad: 0.0,
        };
        assert!(simulate(&Scene::new(vec![p]), &cfg, &single_pair()).is_err());
    }

    #[test]
    fn static_scene_frames_identical() {
        let cfg = ChirpConfig {
            n_adc: 64,
            n_frames: 4,
            ..ChirpConfig::single_target()
        };
        let mut p = ScatterPoint::fixed([0.2, 1.0, 0.1]);
        p.motion = Motion::Sinusoid {
            direction: [0.0, 1.0, 0.0],
            amplitude_m: 0.0,
            frequency_hz: 1.0,
            phase_rad: 0.0,
        };
        let cube = simulate(&Scene::new(vec![p]), &cfg, &ArrayGeometry::cascade_board()).unwrap();
        for m in 1..cfg.n_frames {
            assert_eq!(cube.frame(0), cube.frame(m));
        }
    }

    #[test]
    fn auto_mode_picks_exact_path_in_near_field() {
        let geom = ArrayGeometry::cascade_board();
        let lambda = SPEED_OF_LIGHT / 77e9;
        let near = Scene::new(vec![ScatterPoint::fixed([0.0, 0.5, 0.0])]);
        let far = Scene::new(vec![ScatterPoint::fixed([0.0, 100.0, 0.0])]);
        assert_eq!(near.resolved_mode(&geom, lambda), SimMode::ExactPath);
        assert_eq!(far.resolved_mode(&geom, lambda), SimMode::PlaneWave);
    }

    #[test]
    fn noise_power_matches_snr() {
        let cfg = ChirpConfig {
            n_adc: 256,
            n_frames: 8,
            ..ChirpConfig::phantom()
        };
        let geom = ArrayGeometry::cascade_board();
        let scene = Scene::new(vec![ScatterPoint::fixed([0.0, 1.0, 0.0])]);
        let clean = simulate(&scene, &cfg, &geom).unwrap();
        let noisy = add_noise(clean.clone(), 20.0, 7).unwrap();
        let p_sig: f64 = clean
            .samples
            .iter()
            .map(|z| z.norm_sqr() as f64)
            .sum::<f64>()
            / clean.samples.len() as f64;
        let p_noise: f64 = clean
            .samples
            .iter()
            .zip(&noisy.samples)
            .map(|(a, b)| (b - a).norm_sqr() as f64)
            .sum::<f64>()
            / clean.samples.len() as f64;
        let snr = 10.0 * (p_sig / p_noise).log10();
        assert!((snr - 20.0).abs() < 0.5, "snr {snr}");
        assert_relative_eq!(p_sig, 1.0, max_relative = 1e-6);
    }

    #[test]
    fn noise_deterministic_and_infinite_snr_is_noop() {
        let cfg = ChirpConfig {
            n_adc: 32,
            n_frames: 3,
            ..ChirpConfig::phantom()
        };
        let geom = ArrayGeometry::cascade_board();
        let scene = Scene::new(vec![ScatterPoint::fixed([0.0, 1.0, 0.0])]);
        let clean = simulate(&scene, &cfg, &geom).unwrap();
        assert_eq!(add_noise(clean.clone(), f64::INFINITY, 1).unwrap(), clean);
        let a = add_noise(clean.clone(), 10.0, 3).unwrap();
        let b = add_noise(clean.clone(), 10.0, 3).unwrap();
        let c = add_noise(clean, 10.0, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
