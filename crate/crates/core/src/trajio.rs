//! Binary trajectory dump with a JSON sidecar.
//!
//! Layout: 16-byte header (`SKYTRAJ\0`, u32 version, u32 reserved), then little-endian
//! u64 particle count and u64 snapshot count, then for every snapshot the wrapped
//! positions as row-major f32 pairs `x0 y0 x1 y1 ...`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{Snapshot, Trajectory};
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::vec2::{min_image, wrap, Vec2};

pub const MAGIC: [u8; 8] = *b"SKYTRAJ\0";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 16 + 16;

/// Everything needed to interpret (and regenerate) a dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryMeta {
    pub format_version: u32,
    pub code_version: String,
    pub seed: u64,
    pub n_iter: u64,
    pub record_stride: u64,
    pub dt: f64,
    pub n_particles: u64,
    pub n_snapshots: u64,
    pub params: ModelParams,
    /// Configuration that produced this output, when run from a config.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

impl TrajectoryMeta {
    pub fn new(seed: u64, n_iter: u64, params: &ModelParams, trajectory: &Trajectory) -> Self {
        TrajectoryMeta {
            format_version: FORMAT_VERSION,
            code_version: crate::CODE_VERSION.to_string(),
            seed,
            n_iter,
            record_stride: trajectory.record_stride,
            dt: params.dt,
            n_particles: trajectory.n_particles() as u64,
            n_snapshots: trajectory.snapshots.len() as u64,
            params: params.clone(),
            config: None,
        }
    }
}

/// `<path>.json`
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn encode(trajectory: &Trajectory) -> Vec<u8> {
    let n = trajectory.n_particles();
    let mut out = Vec::with_capacity(HEADER_LEN + trajectory.snapshots.len() * n * 8);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(trajectory.snapshots.len() as u64).to_le_bytes());
    for snap in &trajectory.snapshots {
        for p in &snap.positions {
            out.extend_from_slice(&(p.x as f32).to_le_bytes());
            out.extend_from_slice(&(p.y as f32).to_le_bytes());
        }
    }
    out
}

/// Frames of wrapped positions stored in a dump.
pub fn decode(bytes: &[u8]) -> std::result::Result<Vec<Vec<Vec2>>, String> {
    if bytes.len() < HEADER_LEN {
        return Err(format!("file too short ({} bytes)", bytes.len()));
    }
    if bytes[..8] != MAGIC {
        return Err("bad magic".into());
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let long = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
    let version = word(8);
    if version != FORMAT_VERSION {
        return Err(format!("unsupported format version {version}"));
    }
    let (n, frames) = (long(16) as usize, long(24) as usize);
    let expected = n
        .checked_mul(frames)
        .and_then(|c| c.checked_mul(8))
        .and_then(|c| c.checked_add(HEADER_LEN));
    if expected != Some(bytes.len()) {
        return Err(format!(
            "length {} does not match {n} particles x {frames} snapshots",
            bytes.len()
        ));
    }
    let float = |at: usize| f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as f64;
    Ok((0..frames)
        .map(|f| {
            (0..n)
                .map(|i| {
                    let at = HEADER_LEN + (f * n + i) * 8;
                    Vec2::new(float(at), float(at + 4))
                })
                .collect()
        })
        .collect())
}

/// Write the dump and its sidecar.
pub fn write(path: &Path, trajectory: &Trajectory, meta: &TrajectoryMeta) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, encode(trajectory)).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let mut json = serde_json::to_string_pretty(meta)?;
    json.push('\n');
    fs::write(&side, json).map_err(|e| Error::io(&side, e))
}

/// Read a dump back.
///
/// Only wrapped positions are stored, so true displacements are rebuilt from consecutive
/// frames by the minimum-image rule. That is exact as long as no particle moves half a box
/// between snapshots.
pub fn read(path: &Path) -> Result<(Trajectory, TrajectoryMeta)> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let meta: TrajectoryMeta = serde_json::from_str(&text).map_err(|e| Error::Format {
        path: side.clone(),
        message: e.to_string(),
    })?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let frames = decode(&bytes).map_err(|message| Error::Format {
        path: path.to_path_buf(),
        message,
    })?;
    let n_first = frames.first().map_or(meta.n_particles, |f| f.len() as u64);
    if frames.len() as u64 != meta.n_snapshots || n_first != meta.n_particles {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "dump disagrees with its sidecar".into(),
        });
    }
    let box_l = meta.params.box_l;
    let mut snapshots: Vec<Snapshot> = Vec::with_capacity(frames.len());
    for (k, frame) in frames.into_iter().enumerate() {
        let positions: Vec<Vec2> = frame.into_iter().map(|p| wrap(p, box_l)).collect();
        let unwrapped = match snapshots.last() {
            None => positions.clone(),
            Some(prev) => prev
                .unwrapped
                .iter()
                .zip(&prev.positions)
                .zip(&positions)
                .map(|((&u, &a), &b)| u + min_image(b, a, box_l))
                .collect(),
        };
        snapshots.push(Snapshot {
            iteration: (k as u64 + 1) * meta.record_stride,
            positions,
            unwrapped,
        });
    }
    let trajectory = Trajectory {
        box_l,
        dt: meta.dt,
        record_stride: meta.record_stride,
        snapshots,
    };
    Ok((trajectory, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Trajectory {
        let snap = |k: u64, x: f64| Snapshot {
            iteration: 15 * k,
            positions: vec![Vec2::new(x, 1.0), Vec2::new(2.0, 35.5)],
            unwrapped: vec![Vec2::new(x, 1.0), Vec2::new(2.0, 35.5)],
        };
        Trajectory {
            box_l: 36.0,
            dt: 1.0,
            record_stride: 15,
            snapshots: vec![snap(1, 35.75), snap(2, 0.25)],
        }
    }

    #[test]
    fn header_layout() {
        let bytes = encode(&tiny());
        assert_eq!(&bytes[..8], b"SKYTRAJ\0");
        assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(bytes[24..32].try_into().unwrap()), 2);
        assert_eq!(bytes.len(), 32 + 2 * 2 * 8);
        assert_eq!(f32::from_le_bytes(bytes[32..36].try_into().unwrap()), 35.75);
    }

    #[test]
    fn decode_rejects_damage() {
        let bytes = encode(&tiny());
        assert!(decode(&bytes[..20]).is_err());
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
    }

    #[test]
    fn round_trip_rebuilds_unwrapped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.bin");
        let traj = tiny();
        let meta = TrajectoryMeta::new(5, 30, &ModelParams::default(), &traj);
        write(&path, &traj, &meta).unwrap();
        let (back, meta_back) = read(&path).unwrap();
        assert_eq!(meta_back, meta);
        assert_eq!(back.snapshots.len(), 2);
        // crossed the x boundary: +0.5 in true coordinates
        let d = back.snapshots[1].unwrapped[0] - back.snapshots[0].unwrapped[0];
        assert!((d.x - 0.5).abs() < 1e-6 && d.y == 0.0);
    }
}
