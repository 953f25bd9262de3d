//! Sensor-to-radar angle alignment and radar/reference comparison metrics.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vitals::{dominant_frequency_of, DisplacementTrace};

/// Chest-plane sensor positions `(x, y)` in metres plus the boresight range
/// of the reference point `A`, on which the radar is centred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorLayout {
    pub positions: BTreeMap<String, [f64; 2]>,
    pub z_a: f64,
}

impl SensorLayout {
    pub fn validate(&self) -> Result<()> {
        if !self.positions.contains_key("A") {
            return Err(Error::InvalidConfig(
                "sensor layout must contain point A".into(),
            ));
        }
        if !(self.z_a.is_finite() && self.z_a > 0.0) {
            return Err(Error::InvalidConfig("z_a must be > 0".into()));
        }
        Ok(())
    }
}

/// Ground-truth angles of one region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionAngles {
    pub region: String,
    pub azimuth_rad: f64,
    pub elevation_rad: f64,
}

/// `φ* = atan((x_i - x_A)/|z_A|)`, `θ* = atan((y_i - y_A)/|z_A|)`, in region
/// name order.
pub fn compute_alignment(layout: &SensorLayout) -> Result<Vec<RegionAngles>> {
    layout.validate()?;
    let [xa, ya] = layout.positions["A"];
    let z = layout.z_a.abs();
    Ok(layout
        .positions
        .iter()
        .map(|(name, &[x, y])| RegionAngles {
            region: name.clone(),
            azimuth_rad: ((x - xa) / z).atan(),
            elevation_rad: ((y - ya) / z).atan(),
        })
        .collect())
}

/// Peak of the normalised cross-correlation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XcorrPeak {
    /// `max_m |C(m)|` in `[0, 1]`.
    pub rho: f64,
    /// Lag in samples at the peak: `C(m) = Σ_n r[n + m] x[n]`.
    pub lag: i64,
}

/// Mean-removed copy of `x` and its sum of squares.
fn centre(x: &[f64]) -> Result<(Vec<f64>, f64)> {
    if x.is_empty() {
        return Err(Error::ConstantInput);
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let centred: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let energy = centred.iter().map(|v| v * v).sum::<f64>();
    let scale = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if !(energy.sqrt() > 1e-12 * scale * (x.len() as f64).sqrt()) {
        return Err(Error::ConstantInput);
    }
    Ok((centred, energy))
}

/// Mean-removed, unit-energy, full-lag cross-correlation maximum. The lag is
/// found with an FFT; the value at that lag is then summed directly so that
/// identical inputs give exactly 1.
pub fn normalized_xcorr_max(r: &[f64], x: &[f64]) -> Result<XcorrPeak> {
    let (r, er) = centre(r)?;
    let (x, ex) = centre(x)?;
    let n = (r.len() + x.len() - 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let pad = |v: &[f64]| {
        let mut b: Vec<Complex64> = v.iter().map(|&a| Complex64::new(a, 0.0)).collect();
        b.resize(n, Complex64::new(0.0, 0.0));
        b
    };
    let mut fr = pad(&r);
    let mut fx = pad(&x);
    fwd.process(&mut fr);
    fwd.process(&mut fx);
    let mut c: Vec<Complex64> = fr.iter().zip(&fx).map(|(a, b)| a * b.conj()).collect();
    inv.process(&mut c);
    // Circular index k holds lag k for k < r.len(), lag k - n otherwise.
    let mut best_lag = 0;
    let mut best = -1.0;
    for lag in (-(x.len() as i64 - 1))..(r.len() as i64) {
        let v = c[lag.rem_euclid(n as i64) as usize].re.abs();
        if v > best {
            best = v;
            best_lag = lag;
        }
    }
    let dot: f64 = x
        .iter()
        .enumerate()
        .filter_map(|(i, xv)| {
            let j = i as i64 + best_lag;
            (j >= 0 && (j as usize) < r.len()).then(|| r[j as usize] * xv)
        })
        .sum();
    Ok(XcorrPeak {
        rho: (dot.abs() / (er * ex).sqrt()).min(1.0),
        lag: best_lag,
    })
}

/// `|f_r - f_x|` of the dominant frequencies inside `band`.
pub fn max_freq_difference(
    r: &[f64],
    x: &[f64],
    sample_rate: f64,
    band: (f64, f64),
) -> Result<f64> {
    let fr = dominant_frequency_of(r, sample_rate, band)?;
    let fx = dominant_frequency_of(x, sample_rate, band)?;
    Ok((fr - fx).abs())
}

/// Band-limited resampling through the spectrum: truncates or zero-extends
/// the DFT and inverts it at the new length.
pub fn resample_fft(x: &[f64], rate_in: f64, rate_out: f64) -> Vec<f64> {
    let n = x.len();
    if n == 0 || rate_in == rate_out {
        return x.to_vec();
    }
    let m = ((n as f64 * rate_out / rate_in).round() as usize).max(1);
    let mut planner = FftPlanner::<f64>::new();
    let mut spec: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut spec);
    let mut out = vec![Complex64::new(0.0, 0.0); m];
    let keep = n.min(m);
    // Positive frequencies (and DC), then negative ones.
    let pos = keep.div_ceil(2);
    let neg = keep / 2;
    out[..pos].copy_from_slice(&spec[..pos]);
    for i in 1..=neg {
        out[m - i] = spec[n - i];
    }
    if keep % 2 == 0 && keep > 0 {
        // Split the shared Nyquist bin so the result stays real.
        let k = keep / 2;
        if m > n {
            let half = spec[k] * 0.5;
            out[k] = half;
            out[m - k] = half;
        } else {
            let v = out[m - k];
            out[m - k] = Complex64::new(v.re, 0.0);
        }
    }
    planner.plan_fft_inverse(m).process(&mut out);
    let scale = 1.0 / n as f64;
    out.iter().map(|z| z.re * scale).collect()
}

/// Brings two traces to the lower of their rates and cuts them to their
/// common time span. Returns `(r, x, rate)`.
pub fn align_traces(
    r: &DisplacementTrace,
    x: &DisplacementTrace,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let rate = r.sample_rate.min(x.sample_rate);
    let to_rate = |t: &DisplacementTrace| resample_fft(&t.displacement_mm, t.sample_rate, rate);
    let (rv, xv) = (to_rate(r), to_rate(x));
    let start = r.t0.max(x.t0);
    let end = (r.t0 + rv.len() as f64 / rate).min(x.t0 + xv.len() as f64 / rate);
    if end <= start {
        return Err(Error::InvalidConfig(format!(
            "traces {} and {} do not overlap in time",
            r.region, x.region
        )));
    }
    let len = ((end - start) * rate).floor() as usize;
    let slice = |v: &[f64], t0: f64| {
        let i0 = ((start - t0) * rate).round() as usize;
        v[i0.min(v.len())..(i0 + len).min(v.len())].to_vec()
    };
    let (a, b) = (slice(&rv, r.t0), slice(&xv, x.t0));
    let n = a.len().min(b.len());
    Ok((a[..n].to_vec(), b[..n].to_vec(), rate))
}

/// Result of comparing one radar trace against one reference trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub region: String,
    pub reference: String,
    pub rho: Option<f64>,
    pub lag_s: Option<f64>,
    pub delta_f_max_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub band_hz: (f64, f64),
    pub comparisons: Vec<Comparison>,
}

/// Both metrics for one pair of traces after alignment.
pub fn compare_pair(r: &DisplacementTrace, x: &DisplacementTrace, band: (f64, f64)) -> Comparison {
    let result = align_traces(r, x).and_then(|(a, b, rate)| {
        let peak = normalized_xcorr_max(&a, &b)?;
        let df = max_freq_difference(&a, &b, rate, band)?;
        Ok((peak, df, rate))
    });
    match result {
        Ok((peak, df, rate)) => Comparison {
            region: r.region.clone(),
            reference: x.region.clone(),
            rho: Some(peak.rho),
            lag_s: Some(peak.lag as f64 / rate),
            delta_f_max_hz: Some(df),
            error: None,
        },
        Err(e) => Comparison {
            region: r.region.clone(),
            reference: x.region.clone(),
            rho: None,
            lag_s: None,
            delta_f_max_hz: None,
            error: Some(e.to_string()),
        },
    }
}

/// Compares each radar trace with every reference trace of the same region
/// (reference labels `"<region>"` or `"<region>-<axis>"`).
pub fn compare_traces(
    radar: &[DisplacementTrace],
    reference: &[DisplacementTrace],
    band: (f64, f64),
) -> ComparisonReport {
    let mut comparisons = Vec::new();
    for r in radar {
        let prefix = format!("{}-", r.region);
        for x in reference {
            if x.region == r.region || x.region.starts_with(&prefix) {
                comparisons.push(compare_pair(r, x, band));
            }
        }
    }
    ComparisonReport {
        band_hz: band,
        comparisons,
    }
}
