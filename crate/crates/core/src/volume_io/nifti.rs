//! NIfTI-1 reader (single file `.nii`, `.nii.gz`, or `.hdr`/`.img` pairs).

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use byteorder::{BigEndian, ByteOrder, LittleEndian};
use flate2::read::MultiGzDecoder;

use super::{SourceFormat, Volume, VolumeHeaderInfo};
use crate::error::{Error, Result};

pub const NIFTI1_HEADER_SIZE: usize = 348;

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

mod offsets {
    pub const DIM: usize = 40;
    pub const DATATYPE: usize = 70;
    pub const BITPIX: usize = 72;
    pub const PIXDIM: usize = 76;
    pub const VOX_OFFSET: usize = 108;
    pub const SCL_SLOPE: usize = 112;
    pub const SCL_INTER: usize = 116;
    pub const MAGIC: usize = 344;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Datatype {
    Uint8,
    Int16,
    Int32,
    Float32,
    Float64,
}

impl Datatype {
    fn from_code(code: i16) -> Result<Self> {
        Ok(match code {
            2 => Datatype::Uint8,
            4 => Datatype::Int16,
            8 => Datatype::Int32,
            16 => Datatype::Float32,
            64 => Datatype::Float64,
            other => return Err(Error::UnsupportedDatatype(other)),
        })
    }

    fn bytes(self) -> usize {
        match self {
            Datatype::Uint8 => 1,
            Datatype::Int16 => 2,
            Datatype::Int32 | Datatype::Float32 => 4,
            Datatype::Float64 => 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Endian {
    Little,
    Big,
}

#[derive(Debug)]
struct Header {
    endian: Endian,
    dims: [usize; 3],
    datatype: Datatype,
    pixdim: [f32; 3],
    vox_offset: usize,
    scl_slope: f32,
    scl_inter: f32,
    pair: bool,
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(&GZIP_MAGIC) {
        let mut out = Vec::new();
        MultiGzDecoder::new(bytes.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(bytes)
    }
}

fn detect_endian(bytes: &[u8]) -> Result<Endian> {
    if bytes.len() < NIFTI1_HEADER_SIZE {
        return Err(Error::MalformedHeader(format!(
            "file is {} bytes, shorter than the {NIFTI1_HEADER_SIZE}-byte header",
            bytes.len()
        )));
    }
    if LittleEndian::read_i32(bytes) == NIFTI1_HEADER_SIZE as i32 {
        Ok(Endian::Little)
    } else if BigEndian::read_i32(bytes) == NIFTI1_HEADER_SIZE as i32 {
        Ok(Endian::Big)
    } else {
        Err(Error::MalformedHeader(
            "sizeof_hdr is not 348 in either byte order".into(),
        ))
    }
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let endian = detect_endian(bytes)?;
    let i16_at = |off: usize| match endian {
        Endian::Little => LittleEndian::read_i16(&bytes[off..]),
        Endian::Big => BigEndian::read_i16(&bytes[off..]),
    };
    let f32_at = |off: usize| match endian {
        Endian::Little => LittleEndian::read_f32(&bytes[off..]),
        Endian::Big => BigEndian::read_f32(&bytes[off..]),
    };

    let pair = match &bytes[offsets::MAGIC..offsets::MAGIC + 4] {
        b"n+1\0" => false,
        b"ni1\0" => true,
        other => {
            return Err(Error::MalformedHeader(format!("bad magic {other:?}")));
        }
    };

    let ndim = i16_at(offsets::DIM);
    if !(1..=7).contains(&ndim) {
        return Err(Error::MalformedHeader(format!("dim[0] = {ndim}")));
    }
    let dim = |k: usize| -> Result<usize> {
        if k as i16 > ndim {
            return Ok(1);
        }
        let d = i16_at(offsets::DIM + 2 * k);
        if d < 1 {
            return Err(Error::MalformedHeader(format!("dim[{k}] = {d}")));
        }
        Ok(d as usize)
    };
    let dims = [dim(1)?, dim(2)?, dim(3)?];
    let frames = dim(4)?;
    if frames > 1 {
        return Err(Error::MultiFrame(frames));
    }
    for k in 5..=7 {
        if dim(k)? > 1 {
            return Err(Error::MalformedHeader(format!(
                "dim[{k}] > 1; only 3D volumes are supported"
            )));
        }
    }

    let datatype = Datatype::from_code(i16_at(offsets::DATATYPE))?;
    let bitpix = i16_at(offsets::BITPIX);
    if bitpix as usize != datatype.bytes() * 8 {
        return Err(Error::MalformedHeader(format!(
            "bitpix {bitpix} does not match datatype {datatype:?}"
        )));
    }

    let pixdim = [1, 2, 3].map(|k| {
        let p = f32_at(offsets::PIXDIM + 4 * k).abs();
        // Unset spacing is common in hand-made files.
        if p.is_finite() && p > 0.0 {
            p
        } else {
            1.0
        }
    });

    let vox_offset = f32_at(offsets::VOX_OFFSET);
    if !(vox_offset.is_finite() && vox_offset >= 0.0) {
        return Err(Error::MalformedHeader(format!("vox_offset = {vox_offset}")));
    }
    let vox_offset = vox_offset as usize;
    if !pair && vox_offset < NIFTI1_HEADER_SIZE {
        return Err(Error::MalformedHeader(format!(
            "vox_offset {vox_offset} overlaps the header"
        )));
    }

    Ok(Header {
        endian,
        dims,
        datatype,
        pixdim,
        vox_offset,
        scl_slope: f32_at(offsets::SCL_SLOPE),
        scl_inter: f32_at(offsets::SCL_INTER),
        pair,
    })
}

fn image_path_for(header_path: &Path) -> PathBuf {
    let name = header_path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or_default();
    let stem = name
        .strip_suffix(".hdr.gz")
        .or_else(|| name.strip_suffix(".hdr"))
        .unwrap_or(name);
    let plain = header_path.with_file_name(format!("{stem}.img"));
    if plain.exists() {
        plain
    } else {
        header_path.with_file_name(format!("{stem}.img.gz"))
    }
}

fn decode(header: &Header, payload: &[u8]) -> Result<Vec<f64>> {
    let n = header.dims.iter().product::<usize>();
    let width = header.datatype.bytes();
    let needed = n * width;
    if payload.len() < needed {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: payload.len() / width,
        });
    }
    let payload = &payload[..needed];
    let mut out = Vec::with_capacity(n);
    macro_rules! decode_with {
        ($order:ty) => {
            match header.datatype {
                Datatype::Uint8 => out.extend(payload.iter().map(|&b| b as f64)),
                Datatype::Int16 => out.extend(
                    payload
                        .chunks_exact(2)
                        .map(|c| <$order>::read_i16(c) as f64),
                ),
                Datatype::Int32 => out.extend(
                    payload
                        .chunks_exact(4)
                        .map(|c| <$order>::read_i32(c) as f64),
                ),
                Datatype::Float32 => out.extend(
                    payload
                        .chunks_exact(4)
                        .map(|c| <$order>::read_f32(c) as f64),
                ),
                Datatype::Float64 => {
                    out.extend(payload.chunks_exact(8).map(|c| <$order>::read_f64(c)))
                }
            }
        };
    }
    match header.endian {
        Endian::Little => decode_with!(LittleEndian),
        Endian::Big => decode_with!(BigEndian),
    }
    Ok(out)
}

/// Reads a NIfTI-1 volume and reports what the header contained.
pub fn read_nifti(path: impl AsRef<Path>) -> Result<(Volume, VolumeHeaderInfo)> {
    let path = path.as_ref();
    let bytes = read_maybe_gz(path)?;
    let header = parse_header(&bytes)?;

    let image;
    let payload = if header.pair {
        image = read_maybe_gz(&image_path_for(path))?;
        image.get(header.vox_offset..).unwrap_or_default()
    } else {
        bytes.get(header.vox_offset..).unwrap_or_default()
    };
    let mut values = decode(&header, payload)?;

    let slope = header.scl_slope as f64;
    let inter = header.scl_inter as f64;
    let scale_applied = if slope != 0.0 && slope.is_finite() && inter.is_finite() {
        for v in &mut values {
            *v = slope * *v + inter;
        }
        Some((slope, inter))
    } else {
        None
    };

    let volume = Volume::from_loaded(header.dims, header.pixdim, values)?;
    let info = VolumeHeaderInfo {
        source_format: SourceFormat::Nifti1,
        original_dims: header.dims,
        scale_applied,
    };
    Ok((volume, info))
}

pub fn load_nifti(path: impl AsRef<Path>) -> Result<Volume> {
    read_nifti(path).map(|(v, _)| v)
}
