//! Field stacks on disk and the JSON artifacts of the pipeline.
//!
//! Field file layout, all little-endian:
//!
//! ```text
//! "PAFF" | version u16 | height u32 | width u32 | channels u32
//! | channels × height × width f32 | topology hash u64
//! ```

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::PartCandidate;
use crate::fields::{FieldStack, Grid};
use crate::parse::ParseResult;
use crate::topology::SkeletonTopology;

pub const MAGIC: &[u8; 4] = b"PAFF";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 4 + 4;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("not a field file (bad magic or truncated header)")]
    BadMagic,
    #[error("unsupported field file version {0}")]
    VersionUnsupported(u16),
    #[error("field file is {got} bytes, header implies {expected}")]
    Truncated { got: usize, expected: usize },
    #[error("field file does not match the topology: {0}")]
    TopologyHashMismatch(String),
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.display().to_string(), source }
}

/// Writes `bytes` through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| IoError::Io { path: path.display().to_string(), source: e.error })?;
    Ok(())
}

pub fn encode_fields(stack: &FieldStack) -> Vec<u8> {
    let channels = stack.channels();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * stack.data.len() + 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(stack.height as u32).to_le_bytes());
    out.extend_from_slice(&(stack.width as u32).to_le_bytes());
    out.extend_from_slice(&(channels as u32).to_le_bytes());
    for v in &stack.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&stack.topology_hash.to_le_bytes());
    out
}

/// Raw header fields of a field file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldHeader {
    pub version: u16,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

fn u32_at(b: &[u8], at: usize) -> usize {
    u32::from_le_bytes(b[at..at + 4].try_into().expect("4 bytes")) as usize
}

pub fn decode_header(bytes: &[u8]) -> Result<FieldHeader, IoError> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(IoError::BadMagic);
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(IoError::VersionUnsupported(version));
    }
    Ok(FieldHeader { version, height: u32_at(bytes, 6), width: u32_at(bytes, 10), channels: u32_at(bytes, 14) })
}

/// Decodes a field file and checks it against `topology`.
pub fn decode_fields(bytes: &[u8], topology: &SkeletonTopology) -> Result<FieldStack, IoError> {
    let h = decode_header(bytes)?;
    let expected = h
        .channels
        .checked_mul(h.height)
        .and_then(|n| n.checked_mul(h.width))
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN + 8))
        .ok_or(IoError::BadMagic)?;
    if bytes.len() != expected {
        return Err(IoError::Truncated { got: bytes.len(), expected });
    }
    if h.channels != topology.total_channels() {
        return Err(IoError::TopologyHashMismatch(format!(
            "{} channels, topology `{}` has {}",
            h.channels,
            topology.name(),
            topology.total_channels()
        )));
    }
    let tail = &bytes[expected - 8..];
    let hash = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
    if hash != topology.hash() {
        return Err(IoError::TopologyHashMismatch(format!(
            "file hash {hash:016x}, topology `{}` hashes to {:016x}",
            topology.name(),
            topology.hash()
        )));
    }
    let data = bytes[HEADER_LEN..expected - 8]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Ok(FieldStack {
        width: h.width,
        height: h.height,
        num_parts: topology.num_parts(),
        num_limbs: topology.num_limbs(),
        topology_hash: hash,
        data,
    })
}

pub fn write_fields(stack: &FieldStack, path: &Path) -> Result<(), IoError> {
    write_atomic(path, &encode_fields(stack))
}

pub fn read_fields(path: &Path, topology: &SkeletonTopology) -> Result<FieldStack, IoError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode_fields(&bytes, topology)
}

/// Topology identity recorded in JSON artifacts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyRef {
    pub name: String,
    /// FNV-1a 64 of the canonical topology, as 16 hex digits.
    pub hash: String,
}

impl TopologyRef {
    pub fn of(topology: &SkeletonTopology) -> Self {
        Self { name: topology.name().to_owned(), hash: format!("{:016x}", topology.hash()) }
    }

    pub fn check(&self, topology: &SkeletonTopology) -> Result<(), IoError> {
        let own = Self::of(topology);
        if own.hash != self.hash {
            return Err(IoError::TopologyHashMismatch(format!(
                "artifact hash {}, topology `{}` hashes to {}",
                self.hash, own.name, own.hash
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosePerson {
    pub score: f64,
    /// `[x, y, confidence]` in image pixels, one entry per part.
    pub keypoints: Vec<Option<[f64; 3]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseFile {
    pub topology: TopologyRef,
    /// Sorted by descending score.
    pub people: Vec<PosePerson>,
}

impl PoseFile {
    pub fn from_parse(
        result: &ParseResult,
        candidates: &[Vec<PartCandidate>],
        grid: &Grid,
        topology: &SkeletonTopology,
    ) -> Self {
        let mut people: Vec<PosePerson> = result
            .persons
            .iter()
            .map(|p| PosePerson {
                score: p.score,
                keypoints: p
                    .parts
                    .iter()
                    .enumerate()
                    .map(|(j, m)| {
                        m.map(|m| {
                            let c = &candidates[j][m];
                            let q = grid.to_image(c.position);
                            [q.x, q.y, c.score]
                        })
                    })
                    .collect(),
            })
            .collect();
        people.sort_by(|a, b| b.score.total_cmp(&a.score));
        Self { topology: TopologyRef::of(topology), people }
    }
}

/// Detected candidates with the grid they were found on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateFile {
    pub topology: TopologyRef,
    pub grid: Grid,
    /// Per part, positions in grid coordinates.
    pub candidates: Vec<Vec<PartCandidate>>,
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact serializes");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), IoError> {
    write_atomic(path, to_json_pretty(value).as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&text)?)
}
