//! Raw float32 blob with a JSON sidecar header.
//!
//! ```json
//! {"dims":[nx,ny,nz],"voxel_size_mm":[a,b,c],"data_file":"v.raw","dtype":"float32","byte_order":"little"}
//! ```
//! `data_file` is resolved relative to the directory holding the sidecar.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Volume;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawJsonHeader {
    pub dims: [usize; 3],
    pub voxel_size_mm: [f32; 3],
    pub data_file: String,
    pub dtype: String,
    pub byte_order: String,
}

pub fn load_raw_json(path: impl AsRef<Path>) -> Result<Volume> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let header: RawJsonHeader = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    if header.dtype != "float32" {
        return Err(Error::UnknownDtype(header.dtype));
    }
    let big = match header.byte_order.as_str() {
        "little" => false,
        "big" => true,
        other => return Err(Error::UnknownByteOrder(other.to_string())),
    };

    let blob_path = path
        .parent()
        .unwrap_or_else(|| Path::new(""))
        .join(&header.data_file);
    let blob = fs::read(&blob_path).map_err(|e| Error::io(&blob_path, e))?;
    let expected: usize = header.dims.iter().product();
    if blob.len() % 4 != 0 || blob.len() / 4 != expected {
        return Err(Error::LengthMismatch {
            expected,
            actual: blob.len() / 4,
        });
    }
    let values = blob
        .chunks_exact(4)
        .map(|c| {
            let bytes = [c[0], c[1], c[2], c[3]];
            let v = if big {
                f32::from_be_bytes(bytes)
            } else {
                f32::from_le_bytes(bytes)
            };
            v as f64
        })
        .collect();
    Volume::from_loaded(header.dims, header.voxel_size_mm, values)
}

/// Writes `vol` as a sidecar at `json_path` plus a little-endian float32 blob
/// named after the sidecar's stem.
pub fn write_raw_json(vol: &Volume, json_path: impl AsRef<Path>) -> Result<()> {
    let json_path = json_path.as_ref();
    let stem = json_path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::InvalidArgument(format!("bad output path {json_path:?}")))?;
    let data_file = format!("{stem}.raw");
    let header = RawJsonHeader {
        dims: vol.dims(),
        voxel_size_mm: vol.voxel_size_mm(),
        data_file: data_file.clone(),
        dtype: "float32".into(),
        byte_order: "little".into(),
    };
    let blob: Vec<u8> = vol.data().iter().flat_map(|v| v.to_le_bytes()).collect();
    let blob_path = json_path.with_file_name(&data_file);
    fs::write(&blob_path, blob).map_err(|e| Error::io(&blob_path, e))?;
    let mut text = serde_json::to_string_pretty(&header).expect("header serializes");
    text.push('\n');
    fs::write(json_path, text).map_err(|e| Error::io(json_path, e))
}
