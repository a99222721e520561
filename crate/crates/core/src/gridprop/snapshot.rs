//! Binary snapshot format: raw little-endian `f64` pairs `(re, im)` in
//! row-major order with nothing before them, plus a TOML sidecar.

use std::fs;
use std::io;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{GridSpec, GridWaveField};
use crate::fields::PhysicalUnits;

/// Sidecar contents describing one snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub nx: usize,
    pub ny: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub time: f64,
    pub hbar: f64,
    pub mass: f64,
    pub stage: usize,
    pub label: String,
}

impl SnapshotMeta {
    pub fn of(field: &GridWaveField, stage: usize, label: &str) -> Self {
        let s = &field.spec;
        Self {
            nx: s.nx,
            ny: s.ny,
            x_min: s.x_min,
            x_max: s.x_max,
            y_min: s.y_min,
            y_max: s.y_max,
            time: field.time,
            hbar: field.units.hbar,
            mass: field.units.mass,
            stage,
            label: label.to_string(),
        }
    }
}

pub fn encode_amplitudes(amps: &[Complex64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(amps.len() * 16);
    for a in amps {
        out.extend_from_slice(&a.re.to_le_bytes());
        out.extend_from_slice(&a.im.to_le_bytes());
    }
    out
}

pub fn decode_amplitudes(bytes: &[u8]) -> io::Result<Vec<Complex64>> {
    if !bytes.len().is_multiple_of(16) {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "snapshot length is not a multiple of 16"));
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect())
}

/// Writes `<stem>.bin` and `<stem>.toml`; returns both paths.
pub fn write_snapshot(
    dir: &Path,
    stem: &str,
    field: &GridWaveField,
    stage: usize,
    label: &str,
) -> io::Result<(std::path::PathBuf, std::path::PathBuf)> {
    let bin = dir.join(format!("{stem}.bin"));
    let side = dir.join(format!("{stem}.toml"));
    fs::write(&bin, encode_amplitudes(&field.amplitudes))?;
    let meta = toml::to_string(&SnapshotMeta::of(field, stage, label))
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
    fs::write(&side, meta)?;
    Ok((bin, side))
}

/// Reads a snapshot written by [`write_snapshot`].
pub fn read_snapshot(dir: &Path, stem: &str) -> io::Result<(GridWaveField, SnapshotMeta)> {
    let bad = |e: String| io::Error::new(io::ErrorKind::InvalidData, e);
    let meta: SnapshotMeta =
        toml::from_str(&fs::read_to_string(dir.join(format!("{stem}.toml")))?).map_err(|e| bad(e.to_string()))?;
    let amps = decode_amplitudes(&fs::read(dir.join(format!("{stem}.bin")))?)?;
    let spec = GridSpec::new(meta.nx, meta.ny, (meta.x_min, meta.x_max), (meta.y_min, meta.y_max))
        .map_err(|e| bad(e.to_string()))?;
    let units = PhysicalUnits::new(meta.hbar, meta.mass).map_err(|e| bad(e.to_string()))?;
    let field = GridWaveField::new(spec, amps, meta.time, units).map_err(|e| bad(e.to_string()))?;
    Ok((field, meta))
}
