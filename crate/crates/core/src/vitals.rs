//! Phase extraction, unwrapping, displacement conversion and dominant
//! frequency of slow-time traces.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default heartbeat search band, Hz.
pub const DEFAULT_BAND_HZ: (f64, f64) = (0.5, 3.0);

/// Displacement of one region (or sensor axis) over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplacementTrace {
    pub region: String,
    /// Time of the first sample, s.
    pub t0: f64,
    pub sample_rate: f64,
    pub displacement_mm: Vec<f64>,
    /// Unwrapped phase, rad; absent for traces that do not come from radar.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_rad: Option<Vec<f64>>,
}

impl DisplacementTrace {
    pub fn len(&self) -> usize {
        self.displacement_mm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.displacement_mm.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 / self.sample_rate
    }

    pub fn peak_to_peak_mm(&self) -> f64 {
        peak_to_peak(&self.displacement_mm)
    }

    pub fn phase_peak_to_peak(&self) -> Option<f64> {
        self.phase_rad.as_deref().map(peak_to_peak)
    }
}

pub fn peak_to_peak(x: &[f64]) -> f64 {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if x.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// Wrapped phase in `(-π, π]` plus the indices of zero-magnitude samples,
/// whose phase is carried over from the previous sample (0 at the start).
pub fn extract_phase(s: &[Complex64]) -> Result<(Vec<f64>, Vec<usize>)> {
    if s.is_empty() {
        return Err(Error::InvalidConfig("empty slow-time signal".into()));
    }
    let mut flagged = Vec::new();
    let mut out = Vec::with_capacity(s.len());
    let mut prev = 0.0;
    for (i, z) in s.iter().enumerate() {
        let ph = if z.norm_sqr() == 0.0 {
            flagged.push(i);
            prev
        } else {
            let a = z.arg();
            // atan2 yields -π for negative reals with -0 imaginary part.
            if a == -PI {
                PI
            } else {
                a
            }
        };
        out.push(ph);
        prev = ph;
    }
    Ok((out, flagged))
}

/// Removes 2π jumps so successive differences fall in `(-π, π]`.
pub fn unwrap(phase: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phase.len());
    let mut offset = 0.0;
    for (i, &p) in phase.iter().enumerate() {
        if i > 0 {
            let mut d = p - phase[i - 1];
            let mut k = 0.0;
            while d > PI {
                d -= 2.0 * PI;
                k -= 1.0;
            }
            while d <= -PI {
                d += 2.0 * PI;
                k += 1.0;
            }
            offset += 2.0 * PI * k;
        }
        out.push(p + offset);
    }
    out
}

/// `λ (φ - φ[0]) / 4π`, in millimetres.
pub fn phase_to_displacement(phase: &[f64], wavelength: f64) -> Vec<f64> {
    let Some(&first) = phase.first() else {
        return Vec::new();
    };
    let scale = wavelength * 1e3 / (4.0 * PI);
    phase.iter().map(|p| (p - first) * scale).collect()
}

/// Phase extraction, unwrapping and conversion in one step.
pub fn displacement_trace(
    region: &str,
    s: &[Complex64],
    wavelength: f64,
    frame_rate: f64,
) -> Result<DisplacementTrace> {
    let (wrapped, _) = extract_phase(s)?;
    let phase = unwrap(&wrapped);
    Ok(DisplacementTrace {
        region: region.to_string(),
        t0: 0.0,
        sample_rate: frame_rate,
        displacement_mm: phase_to_displacement(&phase, wavelength),
        phase_rad: Some(phase),
    })
}

/// Frequency of the largest spectral peak of `x` (mean removed) within
/// `band`, refined by quadratic interpolation of the magnitude spectrum.
pub fn dominant_frequency_of(x: &[f64], sample_rate: f64, band: (f64, f64)) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::InvalidConfig("need at least two samples".into()));
    }
    let nyquist = sample_rate / 2.0;
    let (lo, hi) = band;
    if !(lo >= 0.0 && hi > lo && lo < nyquist) {
        return Err(Error::BandEmpty {
            low_hz: lo,
            high_hz: hi,
            rate_hz: sample_rate,
        });
    }
    let n_fft = (4 * x.len()).next_power_of_two();
    let df = sample_rate / n_fft as f64;
    let k_lo = (lo / df).ceil() as usize;
    let k_hi = ((hi.min(nyquist)) / df).floor() as usize;
    if k_lo > k_hi {
        return Err(Error::BandEmpty {
            low_hz: lo,
            high_hz: hi,
            rate_hz: sample_rate,
        });
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let mut buf: Vec<Complex64> = x.iter().map(|v| Complex64::new(v - mean, 0.0)).collect();
    buf.resize(n_fft, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(n_fft).process(&mut buf);
    let mag: Vec<f64> = buf[..=n_fft / 2].iter().map(|z| z.norm()).collect();

    let mut k = k_lo;
    for i in k_lo..=k_hi {
        if mag[i] > mag[k] {
            k = i;
        }
    }
    let largest = mag.iter().cloned().fold(0.0, f64::max);
    if mag[k] == 0.0 || mag[k] < 1e-9 * largest {
        return Err(Error::NoPeak);
    }
    let delta = if k > 0 && k + 1 < mag.len() {
        let (a, b, c) = (mag[k - 1], mag[k], mag[k + 1]);
        let den = a - 2.0 * b + c;
        if den.abs() > 0.0 {
            (0.5 * (a - c) / den).clamp(-0.5, 0.5)
        } else {
            0.0
        }
    } else {
        0.0
    };
    Ok((k as f64 + delta) * df)
}

pub fn dominant_frequency(trace: &DisplacementTrace, band: (f64, f64)) -> Result<f64> {
    dominant_frequency_of(&trace.displacement_mm, trace.sample_rate, band)
}
