//! Fast-time FFT, range profile and subject localisation.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::RawDataCube;
use crate::waveform::derive_waveform;

/// Fast-time window applied before the range transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Window {
    #[default]
    Rectangular,
    Hann,
}

impl Window {
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann if n <= 1 => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
                .collect(),
        }
    }
}

/// Range spectra indexed `(frame, channel, bin)`, frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeCube {
    pub n_frames: usize,
    pub n_channels: usize,
    pub n_fft_range: usize,
    pub bin_width_m: f64,
    pub bins: Vec<Complex64>,
}

impl RangeCube {
    pub fn spectrum(&self, frame: usize, channel: usize) -> &[Complex64] {
        let start = (frame * self.n_channels + channel) * self.n_fft_range;
        &self.bins[start..start + self.n_fft_range]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubjectLocation {
    pub bin: usize,
    pub range_m: f64,
}

/// Slow-time samples of one range bin: `data[c * n_frames + m]`, channels in
/// row-major `(tx, rx)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct BinSignals {
    pub n_channels: usize,
    pub n_frames: usize,
    pub data: Vec<Complex64>,
}

impl BinSignals {
    pub fn channel(&self, c: usize) -> &[Complex64] {
        &self.data[c * self.n_frames..(c + 1) * self.n_frames]
    }

    pub fn get(&self, c: usize, m: usize) -> Complex64 {
        self.data[c * self.n_frames + m]
    }

    /// All channels of one frame.
    pub fn snapshot(&self, m: usize) -> Vec<Complex64> {
        (0..self.n_channels).map(|c| self.get(c, m)).collect()
    }
}

fn check_nfft(n_fft: usize, n_adc: usize) -> Result<()> {
    if n_fft < n_adc {
        return Err(Error::InvalidNfft {
            n_fft,
            reason: "must be at least the number of ADC samples",
        });
    }
    if !n_fft.is_power_of_two() {
        return Err(Error::InvalidNfft {
            n_fft,
            reason: "must be a power of two",
        });
    }
    Ok(())
}

/// Bin width in metres after zero-padding to `n_fft`.
pub fn bin_width_m(cube: &RawDataCube, n_fft: usize) -> Result<f64> {
    let wf = derive_waveform(&cube.chirp)?;
    Ok(wf.range_resolution * cube.n_samples as f64 / n_fft as f64)
}

/// Zero-padded FFT of every `(frame, channel)` fast-time vector.
pub fn range_fft(cube: &RawDataCube, n_fft_range: usize, window: Window) -> Result<RangeCube> {
    check_nfft(n_fft_range, cube.n_samples)?;
    let bin_width_m = bin_width_m(cube, n_fft_range)?;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft_range);
    let w = window.coefficients(cube.n_samples);
    let n_vectors = cube.n_frames * cube.n_channels();
    let mut bins = vec![Complex64::new(0.0, 0.0); n_vectors * n_fft_range];
    bins.par_chunks_mut(n_fft_range)
        .zip(cube.samples.par_chunks(cube.n_samples))
        .for_each(|(out, x)| {
            for ((o, s), wi) in out.iter_mut().zip(x).zip(&w) {
                *o = Complex64::new(s.re as f64, s.im as f64) * wi;
            }
            fft.process(out);
        });
    Ok(RangeCube {
        n_frames: cube.n_frames,
        n_channels: cube.n_channels(),
        n_fft_range,
        bin_width_m,
        bins,
    })
}

/// Magnitude summed over all channels and frames, per bin.
pub fn range_profile(rc: &RangeCube) -> Vec<f64> {
    rc.bins
        .par_chunks(rc.n_fft_range)
        .fold(
            || vec![0.0; rc.n_fft_range],
            |mut acc, spec| {
                for (a, z) in acc.iter_mut().zip(spec) {
                    *a += z.norm();
                }
                acc
            },
        )
        .reduce(
            || vec![0.0; rc.n_fft_range],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        )
}

/// Same profile as [`range_profile`] computed straight from the cube without
/// materialising the range cube.
pub fn range_profile_streaming(
    cube: &RawDataCube,
    n_fft_range: usize,
    window: Window,
) -> Result<Vec<f64>> {
    check_nfft(n_fft_range, cube.n_samples)?;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft_range);
    let w = window.coefficients(cube.n_samples);
    let frame_len = cube.frame_len();
    let profile = cube
        .samples
        .par_chunks(frame_len)
        .fold(
            || {
                (
                    vec![0.0; n_fft_range],
                    vec![Complex64::new(0.0, 0.0); n_fft_range],
                )
            },
            |(mut acc, mut buf), frame| {
                for x in frame.chunks(cube.n_samples) {
                    buf.fill(Complex64::new(0.0, 0.0));
                    for ((o, s), wi) in buf.iter_mut().zip(x).zip(&w) {
                        *o = Complex64::new(s.re as f64, s.im as f64) * wi;
                    }
                    fft.process(&mut buf);
                    for (a, z) in acc.iter_mut().zip(&buf) {
                        *a += z.norm();
                    }
                }
                (acc, buf)
            },
        )
        .map(|(acc, _)| acc)
        .reduce(
            || vec![0.0; n_fft_range],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(profile)
}

/// Argmax of a range profile; the lowest bin wins ties.
pub fn locate_in_profile(profile: &[f64], bin_width_m: f64) -> SubjectLocation {
    let mut best = 0;
    for (i, &v) in profile.iter().enumerate() {
        if v > profile[best] {
            best = i;
        }
    }
    SubjectLocation {
        bin: best,
        range_m: best as f64 * bin_width_m,
    }
}

pub fn locate_subject(rc: &RangeCube) -> SubjectLocation {
    locate_in_profile(&range_profile(rc), rc.bin_width_m)
}

pub fn extract_range_bin(rc: &RangeCube, bin: usize) -> Result<BinSignals> {
    if bin >= rc.n_fft_range {
        return Err(Error::OutOfRange {
            index: bin,
            limit: rc.n_fft_range,
        });
    }
    let mut data = vec![Complex64::new(0.0, 0.0); rc.n_channels * rc.n_frames];
    for m in 0..rc.n_frames {
        for c in 0..rc.n_channels {
            data[c * rc.n_frames + m] = rc.spectrum(m, c)[bin];
        }
    }
    Ok(BinSignals {
        n_channels: rc.n_channels,
        n_frames: rc.n_frames,
        data,
    })
}

/// One bin of the zero-padded range FFT evaluated directly for every channel
/// and frame. Matches [`extract_range_bin`] of [`range_fft`] to rounding.
pub fn extract_range_bin_direct(
    cube: &RawDataCube,
    n_fft_range: usize,
    bin: usize,
    window: Window,
) -> Result<BinSignals> {
    check_nfft(n_fft_range, cube.n_samples)?;
    if bin >= n_fft_range {
        return Err(Error::OutOfRange {
            index: bin,
            limit: n_fft_range,
        });
    }
    let w = window.coefficients(cube.n_samples);
    let kernel: Vec<Complex64> = (0..cube.n_samples)
        .map(|n| {
            let k = (bin * n) % n_fft_range;
            Complex64::from_polar(w[n], -2.0 * PI * k as f64 / n_fft_range as f64)
        })
        .collect();
    let n_ch = cube.n_channels();
    let per_frame: Vec<Vec<Complex64>> = (0..cube.n_frames)
        .into_par_iter()
        .map(|m| {
            (0..n_ch)
                .map(|c| {
                    cube.channel(m, c)
                        .iter()
                        .zip(&kernel)
                        .map(|(s, k)| Complex64::new(s.re as f64, s.im as f64) * k)
                        .sum()
                })
                .collect()
        })
        .collect();
    let mut data = vec![Complex64::new(0.0, 0.0); n_ch * cube.n_frames];
    for (m, row) in per_frame.iter().enumerate() {
        for (c, z) in row.iter().enumerate() {
            data[c * cube.n_frames + m] = *z;
        }
    }
    Ok(BinSignals {
        n_channels: n_ch,
        n_frames: cube.n_frames,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::ChirpConfig;
    use num_complex::Complex32;

    fn tone_cube(n_adc: usize, freqs: &[(f64, f64)]) -> RawDataCube {
        let cfg = ChirpConfig {
            n_adc,
            n_frames: 1,
            ..ChirpConfig::single_target()
        };
        let mut cube = RawDataCube::zeros(cfg, 1, 1);
        for (n, s) in cube.samples.iter_mut().enumerate() {
            let z: Complex64 = freqs
                .iter()
                .map(|&(cyc, a)| Complex64::from_polar(a, 2.0 * PI * cyc * n as f64 / n_adc as f64))
                .sum();
            *s = Complex32::new(z.re as f32, z.im as f32);
        }
        cube
    }

    #[test]
    fn bin_centred_tone_has_single_dominant_bin() {
        let cube = tone_cube(64, &[(10.0, 1.0)]);
        let rc = range_fft(&cube, 64, Window::Rectangular).unwrap();
        let mut mags: Vec<f64> = rc.spectrum(0, 0).iter().map(|z| z.norm()).collect();
        assert_eq!(locate_subject(&rc).bin, 10);
        mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!(mags[0] / mags[1] > 10.0);
    }

    #[test]
    fn zero_cube_gives_zero_spectrum() {
        let cube = tone_cube(32, &[]);
        let rc = range_fft(&cube, 64, Window::Rectangular).unwrap();
        assert!(rc.bins.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn invalid_sizes_rejected() {
        let cube = tone_cube(64, &[(1.0, 1.0)]);
        assert!(matches!(
            range_fft(&cube, 32, Window::Rectangular),
            Err(Error::InvalidNfft { .. })
        ));
        assert!(matches!(
            range_fft(&cube, 96, Window::Rectangular),
            Err(Error::InvalidNfft { .. })
        ));
    }

    #[test]
    fn weaker_scatterer_does_not_win() {
        let cube = tone_cube(128, &[(20.0, 1.0), (40.0, 0.1)]);
        let rc = range_fft(&cube, 256, Window::Rectangular).unwrap();
        assert_eq!(locate_subject(&rc).bin, 40);
    }

    #[test]
    fn ties_go_to_lowest_bin() {
        let loc = locate_in_profile(&[1.0, 3.0, 3.0, 2.0], 0.5);
        assert_eq!(loc.bin, 1);
        assert_eq!(loc.range_m, 0.5);
        let zeros = tone_cube(16, &[]);
        let rc = range_fft(&zeros, 16, Window::Rectangular).unwrap();
        assert_eq!(locate_subject(&rc).bin, 0);
    }

    #[test]
    fn bin_out_of_range() {
        let cube = tone_cube(16, &[(1.0, 1.0)]);
        let rc = range_fft(&cube, 16, Window::Rectangular).unwrap();
        assert!(matches!(
            extract_range_bin(&rc, 16),
            Err(Error::OutOfRange { .. })
        ));
        assert!(extract_range_bin_direct(&cube, 16, 16, Window::Rectangular).is_err());
    }

    #[test]
    fn streaming_matches_materialised() {
        let cube = tone_cube(64, &[(5.3, 1.0), (17.0, 0.4)]);
        for window in [Window::Rectangular, Window::Hann] {
            let rc = range_fft(&cube, 128, window).unwrap();
            let a = range_profile(&rc);
            let b = range_profile_streaming(&cube, 128, window).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()));
            }
            for bin in [0, 11, 34, 127] {
                let e = extract_range_bin(&rc, bin).unwrap();
                let d = extract_range_bin_direct(&cube, 128, bin, window).unwrap();
                for (x, y) in e.data.iter().zip(&d.data) {
                    assert!((x - y).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn bin_width_accounts_for_padding() {
        let cube = tone_cube(512, &[]);
        let rc = range_fft(&cube, 1024, Window::Rectangular).unwrap();
        let dr = derive_waveform(&cube.chirp).unwrap().range_resolution;
        assert!((rc.bin_width_m - dr / 2.0).abs() < 1e-15);
    }
}
