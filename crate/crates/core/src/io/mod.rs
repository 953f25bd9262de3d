//! File formats: JSON run configuration, the MVDC cube container and CSV
//! trace, angle-map and accelerometer tables.

mod config;
mod cube;
mod tables;

use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;

pub use config::{
    load_config, parse_config, GeometryPreset, GeometrySpec, OutputPaths, PipelineConfig,
    RunConfig, ScgSynthConfig,
};
pub use cube::{
    load_cube, read_cube, save_cube, write_cube, MVDC_HEADER_LEN, MVDC_MAGIC, MVDC_VERSION,
};
pub use tables::{
    read_scg_csv, read_traces, write_angle_map, write_scg_csv, write_traces, ScgRecord, SCG_REGIONS,
};

/// Writes through a temporary file in the target directory and renames it
/// into place once `body` succeeds.
pub fn write_atomic<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        std::fs::set_permissions(tmp.path(), std::fs::Permissions::from_mode(0o644))?;
    }
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
