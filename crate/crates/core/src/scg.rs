//! Accelerometer (SCG) to displacement: detrend, remove mean and high-pass
//! before each of two trapezoidal integrations, then a final high-pass.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{butterworth, filtfilt, zero_phase, FilterSpec};
use crate::vitals::DisplacementTrace;

/// Triaxial acceleration of one chest sensor, m/s².
#[derive(Debug, Clone, PartialEq)]
pub struct ScgChannel {
    pub region: String,
    pub fs: f64,
    pub ax: Vec<f64>,
    pub ay: Vec<f64>,
    pub az: Vec<f64>,
}

impl ScgChannel {
    pub fn validate(&self) -> Result<()> {
        if !(self.fs.is_finite() && self.fs > 0.0) {
            return Err(Error::InvalidConfig("SCG sample rate must be > 0".into()));
        }
        if self.ax.len() != self.ay.len() || self.ax.len() != self.az.len() {
            return Err(Error::InvalidConfig(format!(
                "SCG axes of {} differ in length",
                self.region
            )));
        }
        Ok(())
    }

    pub fn duration_s(&self) -> f64 {
        self.ax.len() as f64 / self.fs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScgOptions {
    pub filter: FilterSpec,
    /// Seconds dropped at each end of the output to hide filter transients.
    pub trim_s: f64,
    /// Decimate to at most this rate before integrating.
    pub decimate_to_hz: Option<f64>,
}

impl Default for ScgOptions {
    fn default() -> Self {
        Self {
            filter: FilterSpec::default(),
            trim_s: 2.0,
            decimate_to_hz: None,
        }
    }
}

impl ScgOptions {
    /// Shortest record the chain accepts: ten filter time constants plus the
    /// trimmed ends.
    pub fn min_duration_s(&self) -> f64 {
        10.0 * self.filter.time_constant() + 2.0 * self.trim_s
    }
}

/// Subtracts the least-squares straight line.
pub fn detrend(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let nf = n as f64;
    let t_mean = (nf - 1.0) / 2.0;
    let x_mean = x.iter().sum::<f64>() / nf;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &v) in x.iter().enumerate() {
        let dt = i as f64 - t_mean;
        sxy += dt * (v - x_mean);
        sxx += dt * dt;
    }
    let slope = sxy / sxx;
    x.iter()
        .enumerate()
        .map(|(i, &v)| v - x_mean - slope * (i as f64 - t_mean))
        .collect()
}

pub fn remove_mean(x: &[f64]) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - mean).collect()
}

/// Cumulative trapezoidal integral starting at zero.
pub fn cumtrapz(x: &[f64], fs: f64) -> Vec<f64> {
    let dt = 1.0 / fs;
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    for (i, &v) in x.iter().enumerate() {
        if i > 0 {
            acc += 0.5 * dt * (v + x[i - 1]);
        }
        out.push(acc);
    }
    out
}

/// Zero-phase anti-alias low-pass then keep every `q`-th sample, where `q`
/// is the smallest factor bringing `fs` to at most `max_rate`.
pub fn decimate(x: &[f64], fs: f64, max_rate: f64) -> Result<(Vec<f64>, f64)> {
    if !(max_rate > 0.0) {
        return Err(Error::InvalidConfig("decimation rate must be > 0".into()));
    }
    let q = (fs / max_rate).ceil().max(1.0) as usize;
    if q == 1 {
        return Ok((x.to_vec(), fs));
    }
    let new_fs = fs / q as f64;
    let smooth = zero_phase(&FilterSpec::lowpass(0.4 * new_fs, 8), fs, x)?;
    Ok((smooth.into_iter().step_by(q).collect(), new_fs))
}

/// Zero-phase high-pass with tapered edges: the mean is removed, the first
/// and last `taper` samples are faded in and out with a raised cosine, and the
/// record is zero-padded by five cutoff periods so both passes start and end at
/// rest. The tapered ends must lie inside the trimmed part of the output.
pub fn tapered_highpass(x: &[f64], fs: f64, filter: &FilterSpec, taper: usize) -> Result<Vec<f64>> {
    let sos = butterworth(filter, fs)?;
    let n = x.len();
    let taper = taper.min(n / 2);
    let pad = (5.0 * fs / filter.cutoff_hz).ceil() as usize;
    let mut ext = vec![0.0; n + 2 * pad];
    let centred = remove_mean(x);
    for (i, v) in centred.iter().enumerate() {
        let edge = i.min(n - 1 - i);
        let w = if edge < taper {
            0.5 - 0.5 * (std::f64::consts::PI * edge as f64 / taper as f64).cos()
        } else {
            1.0
        };
        ext[pad + i] = v * w;
    }
    let y = filtfilt(&sos, &ext, 0);
    Ok(y[pad..pad + n].to_vec())
}

/// Untrimmed displacement in metres for one acceleration axis. `taper` is
/// the edge fade length in samples used by each high-pass stage.
pub fn acceleration_to_displacement(
    a: &[f64],
    fs: f64,
    filter: &FilterSpec,
    taper: usize,
) -> Result<Vec<f64>> {
    let hpf = |x: &[f64]| tapered_highpass(x, fs, filter, taper);
    let a = hpf(&remove_mean(&detrend(a)))?;
    let v = cumtrapz(&a, fs);
    let v = hpf(&remove_mean(&detrend(&v)))?;
    let d = cumtrapz(&v, fs);
    hpf(&d)
}

/// Per-axis displacement traces (`"<region>-x"`, `-y`, `-z`) in mm with the
/// first and last `trim_s` seconds removed.
pub fn scg_to_displacement(ch: &ScgChannel, opts: &ScgOptions) -> Result<Vec<DisplacementTrace>> {
    ch.validate()?;
    let need = opts.min_duration_s();
    let have = ch.duration_s();
    if have < need {
        return Err(Error::TooShortRecord {
            have_s: have,
            need_s: need,
        });
    }
    let axes = [("x", &ch.ax), ("y", &ch.ay), ("z", &ch.az)];
    axes.par_iter()
        .map(|(label, data)| {
            let (x, fs) = match opts.decimate_to_hz {
                Some(rate) => decimate(data, ch.fs, rate)?,
                None => (data.to_vec(), ch.fs),
            };
            let trim = (opts.trim_s * fs).round() as usize;
            let d = acceleration_to_displacement(&x, fs, &opts.filter, trim / 2)?;
            let end = d.len().saturating_sub(trim);
            let kept = &d[trim.min(end)..end];
            Ok(DisplacementTrace {
                region: format!("{}-{label}", ch.region),
                t0: trim as f64 / fs,
                sample_rate: fs,
                displacement_mm: kept.iter().map(|v| v * 1e3).collect(),
                phase_rad: None,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn sine(fs: f64, secs: f64, f: f64, amp: f64) -> Vec<f64> {
        (0..(fs * secs) as usize)
            .map(|i| amp * (2.0 * PI * f * i as f64 / fs).sin())
            .collect()
    }

    fn channel(a: Vec<f64>, fs: f64) -> ScgChannel {
        ScgChannel {
            region: "A".into(),
            fs,
            ax: a.clone(),
            ay: a.clone(),
            az: a,
        }
    }

    #[test]
    fn detrend_removes_lines_and_constants() {
        let line: Vec<f64> = (0..50).map(|i| 3.0 - 0.2 * i as f64).collect();
        assert!(detrend(&line).iter().all(|v| v.abs() < 1e-12));
        assert!(detrend(&[4.0; 10]).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn detrend_of_whole_period_sinusoid_removes_its_ls_slope() {
        // Over T whole periods the fitted slope of sin(2πt) is -6/(πT²), so the
        // largest change, at either end, is 3/(πT).
        for secs in [10.0, 100.0] {
            let x = sine(100.0, secs, 1.0, 1.0);
            let d = detrend(&x);
            let max_dev = x
                .iter()
                .zip(&d)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let want = 3.0 / (PI * secs);
            assert!((max_dev / want - 1.0).abs() < 0.05, "{max_dev} vs {want}");
        }
    }

    #[test]
    fn detrend_and_remove_mean_are_idempotent() {
        let x: Vec<f64> = (0..64).map(|i| ((i * i) % 13) as f64).collect();
        let d = detrend(&x);
        let dd = detrend(&d);
        let m = remove_mean(&x);
        let mm = remove_mean(&m);
        for i in 0..64 {
            assert!((d[i] - dd[i]).abs() < 1e-12);
            assert!((m[i] - mm[i]).abs() < 1e-12);
        }
        // Refit slope of the detrended output is zero.
        let re = detrend(&d);
        assert!(d.iter().zip(&re).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn trapezoid_integrates_ramp_exactly() {
        let x: Vec<f64> = (0..11).map(|i| i as f64).collect();
        let y = cumtrapz(&x, 1.0);
        for (i, v) in y.iter().enumerate() {
            assert_relative_eq!(*v, 0.5 * (i * i) as f64);
        }
    }

    #[test]
    fn zero_acceleration_gives_zero_displacement() {
        let out = scg_to_displacement(&channel(vec![0.0; 10_000], 1000.0), &ScgOptions::default())
            .unwrap();
        assert_eq!(out.len(), 3);
        assert!(out
            .iter()
            .all(|t| t.displacement_mm.iter().all(|v| *v == 0.0)));
        assert_eq!(out[0].region, "A-x");
        assert_relative_eq!(out[0].t0, 2.0);
    }

    #[test]
    fn five_hertz_sinusoid_amplitude() {
        let fs = 1000.0;
        let out = scg_to_displacement(
            &channel(sine(fs, 20.0, 5.0, 0.1), fs),
            &ScgOptions::default(),
        )
        .unwrap();
        let amp = out[2].peak_to_peak_mm() / 2.0;
        let want = 0.1 / (2.0 * PI * 5.0).powi(2) * 1e3;
        assert!((amp / want - 1.0).abs() < 0.02, "{amp} vs {want}");
    }

    #[test]
    fn short_record_rejected() {
        let r = scg_to_displacement(&channel(vec![0.0; 3000], 1000.0), &ScgOptions::default());
        assert!(matches!(r, Err(Error::TooShortRecord { .. })));
    }

    #[test]
    fn decimation_preserves_passband() {
        let fs = 2000.0;
        let x = sine(fs, 20.0, 5.0, 0.1);
        let opts = ScgOptions {
            decimate_to_hz: Some(200.0),
            ..ScgOptions::default()
        };
        let out = scg_to_displacement(&channel(x, fs), &opts).unwrap();
        assert_relative_eq!(out[0].sample_rate, 200.0);
        let amp = out[0].peak_to_peak_mm() / 2.0;
        let want = 0.1 / (2.0 * PI * 5.0).powi(2) * 1e3;
        assert!((amp / want - 1.0).abs() < 0.02, "{amp} vs {want}");
    }
}
