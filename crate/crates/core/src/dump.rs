//! Tensor dumps: a JSON manifest next to a raw little-endian `f32` payload.
//!
//! A dump named `base` consists of `base.json` and `base.f32`. The manifest
//! carries the row-major `shape`, `dtype` (always `"f32"`), a `role` tag, a
//! free-form `model` object and an optional `seed`. Attention dumps also carry
//! `heads`, `grid_h`, `grid_w` and `patch_size`. Unknown keys are preserved.
//! The payload is exactly `product(shape)` IEEE-754 binary32 values, no header.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

pub const DTYPE: &str = "f32";
pub const ROW_MAJOR: &str = "row-major";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Image,
    PatchAttention,
    PixelAttention,
    Mask,
    ScalarSeries,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Role::Image => "image",
            Role::PatchAttention => "patch_attention",
            Role::PixelAttention => "pixel_attention",
            Role::Mask => "mask",
            Role::ScalarSeries => "scalar_series",
        };
        f.write_str(s)
    }
}

fn row_major() -> String {
    ROW_MAJOR.to_owned()
}

fn empty_object() -> Value {
    Value::Object(Map::new())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub shape: Vec<usize>,
    pub dtype: String,
    #[serde(default = "row_major")]
    pub order: String,
    pub role: Role,
    #[serde(default = "empty_object")]
    pub model: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_h: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_w: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patch_size: Option<usize>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl Manifest {
    pub fn new(role: Role, shape: Vec<usize>) -> Self {
        Manifest {
            shape,
            dtype: DTYPE.to_owned(),
            order: row_major(),
            role,
            model: empty_object(),
            seed: None,
            heads: None,
            grid_h: None,
            grid_w: None,
            patch_size: None,
            extra: Map::new(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_model(mut self, model: Value) -> Self {
        self.model = model;
        self
    }

    pub fn element_count(&self) -> usize {
        self.shape.iter().product()
    }
}

/// A decoded dump.
#[derive(Debug, Clone, PartialEq)]
pub struct Dump {
    pub manifest: Manifest,
    pub data: Vec<f32>,
}

/// `base.json` and `base.f32`.
pub fn dump_paths(base: &Path) -> (PathBuf, PathBuf) {
    let with = |ext: &str| {
        let mut s: OsString = base.as_os_str().to_owned();
        s.push(ext);
        PathBuf::from(s)
    };
    (with(".json"), with(".f32"))
}

/// Encodes values as little-endian binary32.
pub fn encode_payload(data: &[f32]) -> Vec<u8> {
    data.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn decode_payload(bytes: &[u8]) -> Option<Vec<f32>> {
    if bytes.len() % 4 != 0 {
        return None;
    }
    Some(
        bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect(),
    )
}

/// Writes `base.json` + `base.f32`. Returns the manifest path.
pub fn write_dump(base: impl AsRef<Path>, manifest: &Manifest, data: &[f32]) -> Result<PathBuf> {
    let base = base.as_ref();
    let (json_path, payload_path) = dump_paths(base);
    if manifest.element_count() != data.len() {
        return Err(Error::Shape(format!(
            "manifest shape {:?} holds {} elements, payload has {}",
            manifest.shape,
            manifest.element_count(),
            data.len()
        )));
    }
    if manifest.dtype != DTYPE {
        return Err(Error::Manifest {
            path: json_path,
            message: format!("dtype must be \"{DTYPE}\", got {:?}", manifest.dtype),
        });
    }
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&payload_path, encode_payload(data)).map_err(|e| Error::io(&payload_path, e))?;
    fs::write(&json_path, text).map_err(|e| Error::io(&json_path, e))?;
    Ok(json_path)
}

/// Convenience wrapper converting `f64` values to `f32`.
pub fn write_dump_f64(base: impl AsRef<Path>, manifest: &Manifest, data: &[f64]) -> Result<PathBuf> {
    let narrowed: Vec<f32> = data.iter().map(|&v| v as f32).collect();
    write_dump(base, manifest, &narrowed)
}

/// Reads a dump from its manifest path; the payload is the sibling `.f32` file.
pub fn read_dump(manifest_path: impl AsRef<Path>) -> Result<Dump> {
    let json_path = manifest_path.as_ref();
    let payload_path = json_path.with_extension("f32");
    let text = fs::read_to_string(json_path).map_err(|e| Error::io(json_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Manifest {
        path: json_path.to_path_buf(),
        message: e.to_string(),
    })?;
    let bad = |message: String| Error::Manifest {
        path: json_path.to_path_buf(),
        message,
    };
    if manifest.dtype != DTYPE {
        return Err(bad(format!("unsupported dtype {:?}", manifest.dtype)));
    }
    if manifest.order != ROW_MAJOR {
        return Err(bad(format!("unsupported element order {:?}", manifest.order)));
    }
    let bytes = fs::read(&payload_path).map_err(|e| Error::io(&payload_path, e))?;
    let data = decode_payload(&bytes)
        .ok_or_else(|| bad(format!("payload length {} is not a multiple of 4", bytes.len())))?;
    if data.len() != manifest.element_count() {
        return Err(Error::Shape(format!(
            "{}: manifest shape {:?} holds {} elements, payload has {}",
            json_path.display(),
            manifest.shape,
            manifest.element_count(),
            data.len()
        )));
    }
    Ok(Dump { manifest, data })
}

/// [`read_dump`] plus a role check.
pub fn read_dump_as(manifest_path: impl AsRef<Path>, role: Role) -> Result<Dump> {
    let dump = read_dump(manifest_path)?;
    if dump.manifest.role != role {
        return Err(Error::RoleMismatch {
            expected: role,
            found: dump.manifest.role,
        });
    }
    Ok(dump)
}
