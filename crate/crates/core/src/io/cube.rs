//! MVDC: a small binary container for raw data cubes.
//!
//! Little-endian throughout. Header (72 bytes):
//!
//! | offset | type     | field                |
//! |-------:|----------|----------------------|
//! | 0      | `[u8;4]` | magic `"MVDC"`       |
//! | 4      | u32      | version (1)          |
//! | 8      | u32 × 4  | frames, tx, rx, samples |
//! | 24     | f64 × 5  | fc, fs, k_chirp, prt, t_frame |
//! | 64     | u64      | RNG seed             |
//!
//! The payload follows as `f32` I/Q pairs in frame, tx, rx, sample order.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use num_complex::Complex32;

use crate::error::{Error, Result};
use crate::sim::RawDataCube;
use crate::waveform::ChirpConfig;

pub const MVDC_MAGIC: [u8; 4] = *b"MVDC";
pub const MVDC_VERSION: u32 = 1;
pub const MVDC_HEADER_LEN: usize = 72;

pub fn write_cube(cube: &RawDataCube, w: &mut dyn Write) -> Result<()> {
    let mut header = Vec::with_capacity(MVDC_HEADER_LEN);
    header.extend_from_slice(&MVDC_MAGIC);
    header.extend_from_slice(&MVDC_VERSION.to_le_bytes());
    for v in [cube.n_frames, cube.n_tx, cube.n_rx, cube.n_samples] {
        let v = u32::try_from(v)
            .map_err(|_| Error::InvalidConfig("cube dimension exceeds u32".into()))?;
        header.extend_from_slice(&v.to_le_bytes());
    }
    let c = &cube.chirp;
    for v in [c.fc, c.fs, c.k_chirp, c.prt, c.t_frame] {
        header.extend_from_slice(&v.to_le_bytes());
    }
    header.extend_from_slice(&cube.seed.to_le_bytes());
    debug_assert_eq!(header.len(), MVDC_HEADER_LEN);
    w.write_all(&header)?;

    let mut buf = Vec::with_capacity(8 * 4096);
    for chunk in cube.samples.chunks(4096) {
        buf.clear();
        for z in chunk {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

fn u32_at(b: &[u8], off: usize) -> u32 {
    u32::from_le_bytes(b[off..off + 4].try_into().expect("4 bytes"))
}

fn f64_at(b: &[u8], off: usize) -> f64 {
    f64::from_le_bytes(b[off..off + 8].try_into().expect("8 bytes"))
}

/// Reads a cube; `total_len` (when known) lets truncation be reported with
/// exact byte counts before the payload is read.
pub fn read_cube(r: &mut dyn Read, total_len: Option<u64>) -> Result<RawDataCube> {
    let mut header = [0u8; MVDC_HEADER_LEN];
    let mut got = 0;
    while got < MVDC_HEADER_LEN {
        let n = r.read(&mut header[got..])?;
        if n == 0 {
            break;
        }
        got += n;
    }
    if got >= 4 && header[..4] != MVDC_MAGIC {
        return Err(Error::BadMagic {
            found: header[..4].try_into().expect("4 bytes"),
        });
    }
    if got < MVDC_HEADER_LEN {
        if got < 4 {
            let mut found = [0u8; 4];
            found[..got].copy_from_slice(&header[..got]);
            return Err(Error::BadMagic { found });
        }
        return Err(Error::TruncatedPayload {
            expected: MVDC_HEADER_LEN as u64,
            actual: got as u64,
        });
    }
    let version = u32_at(&header, 4);
    if version != MVDC_VERSION {
        return Err(Error::VersionUnsupported(version));
    }
    let n_frames = u32_at(&header, 8) as usize;
    let n_tx = u32_at(&header, 12) as usize;
    let n_rx = u32_at(&header, 16) as usize;
    let n_samples = u32_at(&header, 20) as usize;
    let chirp = ChirpConfig {
        fc: f64_at(&header, 24),
        fs: f64_at(&header, 32),
        k_chirp: f64_at(&header, 40),
        prt: f64_at(&header, 48),
        t_frame: f64_at(&header, 56),
        n_adc: n_samples,
        n_chirps_per_frame: 1,
        n_frames,
    };
    let seed = u64::from_le_bytes(header[64..72].try_into().expect("8 bytes"));

    let count = (n_frames as u64) * (n_tx as u64) * (n_rx as u64) * (n_samples as u64);
    let expected = MVDC_HEADER_LEN as u64 + 8 * count;
    if let Some(total) = total_len {
        if total != expected {
            return Err(Error::TruncatedPayload {
                expected,
                actual: total,
            });
        }
    }
    let mut payload = Vec::with_capacity(8 * count as usize);
    r.take(8 * count).read_to_end(&mut payload)?;
    if payload.len() as u64 != 8 * count {
        return Err(Error::TruncatedPayload {
            expected,
            actual: MVDC_HEADER_LEN as u64 + payload.len() as u64,
        });
    }
    let samples = payload
        .chunks_exact(8)
        .map(|b| {
            Complex32::new(
                f32::from_le_bytes(b[..4].try_into().expect("4 bytes")),
                f32::from_le_bytes(b[4..].try_into().expect("4 bytes")),
            )
        })
        .collect();
    Ok(RawDataCube {
        chirp,
        n_frames,
        n_tx,
        n_rx,
        n_samples,
        seed,
        samples,
    })
}

pub fn save_cube(cube: &RawDataCube, path: &Path) -> Result<()> {
    super::write_atomic(path, |w| write_cube(cube, w))
}

pub fn load_cube(path: &Path) -> Result<RawDataCube> {
    let file = File::open(path)?;
    let len = file.metadata()?.len();
    read_cube(&mut BufReader::new(file), Some(len))
}
