//! CSV tables: displacement traces, angle maps and multi-channel SCG records.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use crate::doa::AngleMap;
use crate::error::{Error, Result};
use crate::scg::ScgChannel;
use crate::vitals::DisplacementTrace;

const TRACE_HEADER: [&str; 4] = ["time_s", "region", "phase_rad", "displacement_mm"];

/// Default region order of the 15 accelerometer columns.
pub const SCG_REGIONS: [&str; 5] = ["A", "P", "T", "E", "M"];

fn fmt(v: f64) -> String {
    // `Display` prints the shortest representation that parses back exactly.
    format!("{v}")
}

/// Region-major rows `time_s, region, phase_rad, displacement_mm`; the phase
/// field is empty for traces without phase.
pub fn write_traces(traces: &[DisplacementTrace], path: &Path) -> Result<()> {
    if traces.is_empty() {
        return Err(Error::InvalidConfig("no traces to export".into()));
    }
    super::write_atomic(path, |w| {
        let mut csv = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        csv.write_record(TRACE_HEADER)?;
        for t in traces {
            for (i, d) in t.displacement_mm.iter().enumerate() {
                let phase = t
                    .phase_rad
                    .as_ref()
                    .and_then(|p| p.get(i))
                    .map(|&p| fmt(p))
                    .unwrap_or_default();
                csv.write_record([fmt(t.time(i)), t.region.clone(), phase, fmt(*d)])?;
            }
        }
        csv.flush()?;
        Ok(())
    })
}

fn malformed(path: &Path, message: impl Into<String>) -> Error {
    Error::Malformed {
        file: path.to_path_buf(),
        message: message.into(),
    }
}

fn parse_f64(path: &Path, line: u64, field: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| malformed(path, format!("line {line}: `{field}` is not a number")))
}

/// Reads traces written by [`write_traces`], grouped by region in order of
/// first appearance. Sample rates are recovered from the time column.
pub fn read_traces(path: &Path) -> Result<Vec<DisplacementTrace>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != TRACE_HEADER {
        return Err(malformed(path, format!("unexpected header {headers:?}")));
    }
    struct Acc {
        region: String,
        times: Vec<f64>,
        phase: Vec<Option<f64>>,
        disp: Vec<f64>,
    }
    let mut groups: Vec<Acc> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 2;
        if rec.len() != 4 {
            return Err(malformed(path, format!("line {line}: expected 4 fields")));
        }
        let t = parse_f64(path, line, &rec[0])?;
        let region = rec[1].to_string();
        let phase = if rec[2].trim().is_empty() {
            None
        } else {
            Some(parse_f64(path, line, &rec[2])?)
        };
        let d = parse_f64(path, line, &rec[3])?;
        let idx = match groups.iter().position(|g| g.region == region) {
            Some(idx) => idx,
            None => {
                groups.push(Acc {
                    region,
                    times: Vec::new(),
                    phase: Vec::new(),
                    disp: Vec::new(),
                });
                groups.len() - 1
            }
        };
        let g = &mut groups[idx];
        g.times.push(t);
        g.phase.push(phase);
        g.disp.push(d);
    }
    if groups.is_empty() {
        return Err(malformed(path, "no data rows"));
    }
    groups
        .into_iter()
        .map(|g| {
            let n = g.times.len();
            let sample_rate = if n >= 2 {
                (n - 1) as f64 / (g.times[n - 1] - g.times[0])
            } else {
                f64::NAN
            };
            if n >= 2 && !(sample_rate.is_finite() && sample_rate > 0.0) {
                return Err(malformed(
                    path,
                    format!("region {} has a non-increasing time axis", g.region),
                ));
            }
            let phase_rad = if g.phase.iter().all(Option::is_some) {
                Some(g.phase.into_iter().map(|p| p.unwrap_or_default()).collect())
            } else {
                None
            };
            Ok(DisplacementTrace {
                region: g.region,
                t0: g.times[0],
                sample_rate,
                displacement_mm: g.disp,
                phase_rad,
            })
        })
        .collect()
}

/// Long-format grid `azimuth_deg, elevation_deg, power`.
pub fn write_angle_map(map: &AngleMap, path: &Path) -> Result<()> {
    super::write_atomic(path, |w| {
        let mut csv = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        csv.write_record(["azimuth_deg", "elevation_deg", "power"])?;
        for (i, az) in map.azimuth.iter().enumerate() {
            for (j, el) in map.elevation.iter().enumerate() {
                csv.write_record([
                    fmt(az.to_degrees()),
                    fmt(el.to_degrees()),
                    fmt(map.get(i, j)),
                ])?;
            }
        }
        csv.flush()?;
        Ok(())
    })
}

/// Multi-channel accelerometer recording: five triaxial sensors plus ECG.
#[derive(Debug, Clone, PartialEq)]
pub struct ScgRecord {
    pub time_s: Vec<f64>,
    pub channels: Vec<ScgChannel>,
    pub ecg: Vec<f64>,
}

impl ScgRecord {
    pub fn sample_rate(&self) -> f64 {
        self.channels.first().map_or(f64::NAN, |c| c.fs)
    }

    /// ECG as an untouched trace named `ECG`; values are in the recording's
    /// own units.
    pub fn ecg_trace(&self) -> DisplacementTrace {
        DisplacementTrace {
            region: "ECG".into(),
            t0: self.time_s.first().copied().unwrap_or(0.0),
            sample_rate: self.sample_rate(),
            displacement_mm: self.ecg.clone(),
            phase_rad: None,
        }
    }
}

fn region_of(header: &str, fallback: &str) -> String {
    match header.rfind(['-', '_', '.']) {
        Some(i) if i > 0 => header[..i].to_string(),
        _ => fallback.to_string(),
    }
}

/// Reads `time_s`, 15 acceleration columns (sensor-major, x/y/z) and an ECG
/// column. Region names come from the column headers (`A-x` → `A`), falling
/// back to A, P, T, E, M.
pub fn read_scg_csv(path: &Path) -> Result<ScgRecord> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.len() != 17 {
        return Err(malformed(
            path,
            format!(
                "expected 17 columns (time, 15 acceleration, ECG), found {}",
                headers.len()
            ),
        ));
    }
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); 17];
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 2;
        if rec.len() != 17 {
            return Err(malformed(path, format!("line {line}: expected 17 fields")));
        }
        for (c, field) in rec.iter().enumerate() {
            cols[c].push(parse_f64(path, line, field)?);
        }
    }
    let time_s = std::mem::take(&mut cols[0]);
    if time_s.len() < 2 {
        return Err(malformed(path, "need at least two samples"));
    }
    let span = time_s[time_s.len() - 1] - time_s[0];
    let fs = (time_s.len() - 1) as f64 / span;
    if !(fs.is_finite() && fs > 0.0) {
        return Err(malformed(path, "time column must increase"));
    }
    let channels = (0..5)
        .map(|s| {
            let base = 1 + 3 * s;
            ScgChannel {
                region: region_of(&headers[base], SCG_REGIONS[s]),
                fs,
                ax: std::mem::take(&mut cols[base]),
                ay: std::mem::take(&mut cols[base + 1]),
                az: std::mem::take(&mut cols[base + 2]),
            }
        })
        .collect();
    Ok(ScgRecord {
        time_s,
        channels,
        ecg: std::mem::take(&mut cols[16]),
    })
}

pub fn write_scg_csv(record: &ScgRecord, path: &Path) -> Result<()> {
    if record.channels.len() != 5 {
        return Err(Error::InvalidConfig(
            "SCG record needs exactly five sensors".into(),
        ));
    }
    super::write_atomic(path, |w| {
        let mut csv = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        let mut header = vec!["time_s".to_string()];
        for ch in &record.channels {
            for axis in ["x", "y", "z"] {
                header.push(format!("{}-{axis}", ch.region));
            }
        }
        header.push("ECG".into());
        csv.write_record(&header)?;
        for (i, t) in record.time_s.iter().enumerate() {
            let mut row = Vec::with_capacity(17);
            row.push(fmt(*t));
            for ch in &record.channels {
                row.push(fmt(ch.ax[i]));
                row.push(fmt(ch.ay[i]));
                row.push(fmt(ch.az[i]));
            }
            row.push(fmt(record.ecg[i]));
            csv.write_record(&row)?;
        }
        csv.flush()?;
        Ok(())
    })
}
