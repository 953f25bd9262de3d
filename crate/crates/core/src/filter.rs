//! Butterworth IIR design as second-order sections and zero-phase filtering.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterKind {
    Highpass,
    Lowpass,
}

/// Maximally-flat (Butterworth) filter of a given order and cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub kind: FilterKind,
    pub cutoff_hz: f64,
    pub order: usize,
}

impl FilterSpec {
    pub fn highpass(cutoff_hz: f64, order: usize) -> Self {
        Self {
            kind: FilterKind::Highpass,
            cutoff_hz,
            order,
        }
    }

    pub fn lowpass(cutoff_hz: f64, order: usize) -> Self {
        Self {
            kind: FilterKind::Lowpass,
            cutoff_hz,
            order,
        }
    }

    /// Time constant `1 / (2π f_c)`, s.
    pub fn time_constant(&self) -> f64 {
        1.0 / (2.0 * PI * self.cutoff_hz)
    }
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self::highpass(0.5, 4)
    }
}

/// Biquad `b0 + b1 z⁻¹ + b2 z⁻²` over `1 + a1 z⁻¹ + a2 z⁻²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn dc_gain(&self) -> f64 {
        let den = self.a.iter().sum::<f64>();
        self.b.iter().sum::<f64>() / den
    }

    /// Transposed direct-form-II state for a steady input of 1.
    fn steady_state(&self) -> [f64; 2] {
        let y = self.dc_gain();
        [y - self.b[0], self.b[2] - self.a[2] * y]
    }

    pub fn response(&self, f: f64, fs: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -2.0 * PI * f / fs);
        let z2 = z1 * z1;
        (self.b[0] + self.b[1] * z1 + self.b[2] * z2)
            / (self.a[0] + self.a[1] * z1 + self.a[2] * z2)
    }
}

/// Cascade of biquads.
#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    pub sections: Vec<Biquad>,
}

impl Sos {
    pub fn response(&self, f: f64, fs: f64) -> Complex64 {
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(f, fs))
    }

    /// Causal filtering with per-section initial states scaled by `x0`.
    fn filter_from(&self, x: &mut [f64], x0: f64) {
        let mut level = x0;
        for s in &self.sections {
            let zi = s.steady_state();
            let (mut z1, mut z2) = (zi[0] * level, zi[1] * level);
            for v in x.iter_mut() {
                let xin = *v;
                let y = s.b[0] * xin + z1;
                z1 = s.b[1] * xin - s.a[1] * y + z2;
                z2 = s.b[2] * xin - s.a[2] * y;
                *v = y;
            }
            level *= s.dc_gain();
        }
    }

    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        self.filter_from(&mut y, 0.0);
        y
    }
}

/// Bilinear-transform Butterworth design with frequency pre-warping.
pub fn butterworth(spec: &FilterSpec, fs: f64) -> Result<Sos> {
    if spec.order == 0 {
        return Err(Error::InvalidConfig("filter order must be >= 1".into()));
    }
    if !(spec.cutoff_hz > 0.0 && spec.cutoff_hz < fs / 2.0) {
        return Err(Error::InvalidConfig(format!(
            "cutoff {} Hz must lie in (0, {}) Hz",
            spec.cutoff_hz,
            fs / 2.0
        )));
    }
    let k = 2.0 * fs;
    let wc = k * (PI * spec.cutoff_hz / fs).tan();
    let n = spec.order;
    let mut sections = Vec::with_capacity(n.div_ceil(2));
    // Prototype poles in the left half plane, one per conjugate pair.
    for i in 0..n / 2 {
        let theta = PI * (2 * i + n + 1) as f64 / (2 * n) as f64;
        let p = Complex64::from_polar(1.0, theta);
        // Denominator s² + a1 s + a0 of the analog section.
        let (a1, a0, num) = match spec.kind {
            FilterKind::Lowpass => (-2.0 * wc * p.re, wc * wc, [wc * wc, 2.0 * wc * wc, wc * wc]),
            FilterKind::Highpass => {
                let q = wc * p.conj();
                (-2.0 * q.re, q.norm_sqr(), [k * k, -2.0 * k * k, k * k])
            }
        };
        let d0 = k * k + a1 * k + a0;
        let d1 = 2.0 * a0 - 2.0 * k * k;
        let d2 = k * k - a1 * k + a0;
        sections.push(Biquad {
            b: [num[0] / d0, num[1] / d0, num[2] / d0],
            a: [1.0, d1 / d0, d2 / d0],
        });
    }
    if n % 2 == 1 {
        let d0 = k + wc;
        let d1 = wc - k;
        let b = match spec.kind {
            FilterKind::Lowpass => [wc / d0, wc / d0, 0.0],
            FilterKind::Highpass => [k / d0, -k / d0, 0.0],
        };
        sections.push(Biquad {
            b,
            a: [1.0, d1 / d0, 0.0],
        });
    }
    Ok(Sos { sections })
}

/// Forward-backward filtering with odd-reflection padding and steady-state
/// initial conditions, so the result has zero phase and squared magnitude.
pub fn filtfilt(sos: &Sos, x: &[f64], padlen: usize) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let pad = padlen.min(n.saturating_sub(1));
    let mut ext = Vec::with_capacity(n + 2 * pad);
    for i in (1..=pad).rev() {
        ext.push(2.0 * x[0] - x[i]);
    }
    ext.extend_from_slice(x);
    for i in 1..=pad {
        ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
    }
    let first = ext[0];
    sos.filter_from(&mut ext, first);
    ext.reverse();
    let first = ext[0];
    sos.filter_from(&mut ext, first);
    ext.reverse();
    ext[pad..pad + n].to_vec()
}

/// Zero-phase filter of `x` at `fs`, padding by one period of the cutoff.
pub fn zero_phase(spec: &FilterSpec, fs: f64, x: &[f64]) -> Result<Vec<f64>> {
    let sos = butterworth(spec, fs)?;
    let padlen = ((fs / spec.cutoff_hz).ceil() as usize).max(3 * (2 * sos.sections.len() + 1));
    Ok(filtfilt(&sos, x, padlen))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn butter_mag(f: f64, fc: f64, n: usize, kind: FilterKind) -> f64 {
        let r = match kind {
            FilterKind::Lowpass => f / fc,
            FilterKind::Highpass => fc / f,
        };
        1.0 / (1.0 + r.powi(2 * n as i32)).sqrt()
    }

    #[test]
    fn magnitude_matches_analog_prototype_after_prewarp() {
        let fs = 1000.0;
        for kind in [FilterKind::Highpass, FilterKind::Lowpass] {
            for order in 1..=6 {
                let spec = FilterSpec {
                    kind,
                    cutoff_hz: 20.0,
                    order,
                };
                let sos = butterworth(&spec, fs).unwrap();
                for f in [2.0, 10.0, 20.0, 40.0, 150.0] {
                    // Pre-warped analog frequency.
                    let fa = fs / PI * (PI * f / fs).tan();
                    let fca = fs / PI * (PI * 20.0 / fs).tan();
                    let want = butter_mag(fa, fca, order, kind);
                    assert_relative_eq!(sos.response(f, fs).norm(), want, max_relative = 1e-9);
                }
            }
        }
    }

    #[test]
    fn half_power_at_cutoff() {
        let sos = butterworth(&FilterSpec::highpass(0.5, 4), 1000.0).unwrap();
        assert_relative_eq!(
            sos.response(0.5, 1000.0).norm(),
            0.5f64.sqrt(),
            max_relative = 1e-6
        );
        assert!(sos.response(0.0, 1000.0).norm() < 1e-12);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(butterworth(&FilterSpec::highpass(600.0, 4), 1000.0).is_err());
        assert!(butterworth(&FilterSpec::highpass(0.0, 4), 1000.0).is_err());
        assert!(butterworth(&FilterSpec::highpass(1.0, 0), 1000.0).is_err());
    }

    #[test]
    fn filtfilt_is_zero_phase() {
        let fs = 200.0;
        let spec = FilterSpec::highpass(0.5, 4);
        let x: Vec<f64> = (0..12_000)
            .map(|i| (2.0 * PI * 3.0 * i as f64 / fs).sin())
            .collect();
        let y = zero_phase(&spec, fs, &x).unwrap();
        let gain = butterworth(&spec, fs).unwrap().response(3.0, fs).norm_sqr();
        for i in 4000..8000 {
            assert!((y[i] - gain * x[i]).abs() < 1e-6, "{i}");
        }
    }

    #[test]
    fn filtfilt_passes_constant_through_lowpass() {
        let y = zero_phase(&FilterSpec::lowpass(5.0, 4), 100.0, &vec![2.5; 300]).unwrap();
        for v in y {
            assert_relative_eq!(v, 2.5, epsilon = 1e-9);
        }
    }
}
