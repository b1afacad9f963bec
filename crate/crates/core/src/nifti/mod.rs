//! NIfTI-1 reading and writing, plain or gzip-compressed.
//!
//! Reads accept single-file (`n+1`) and paired `.hdr`/`.img` (`ni1`)
//! layouts in either byte order; writes produce a single file
//! (little-endian unless asked otherwise) with `vox_offset = 352` and the
//! sform set from the grid affine. A `.gz` suffix on the output path selects gzip.

mod header;

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{BigEndian, ByteOrder, LittleEndian};
use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

pub use header::{Datatype, NiftiHeader, DEFAULT_VOX_OFFSET, HEADER_SIZE};

use crate::error::{Error, Result};
use crate::volume::{Grid, Mask, Volume};

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

#[derive(Debug, Clone, Copy)]
pub struct WriteOptions {
    pub datatype: Datatype,
    /// Round and clamp instead of failing when the datatype cannot hold
    /// the intensities exactly.
    pub allow_lossy: bool,
    pub big_endian: bool,
}

impl WriteOptions {
    pub fn new(datatype: Datatype) -> Self {
        Self {
            datatype,
            allow_lossy: false,
            big_endian: false,
        }
    }
}

impl Default for WriteOptions {
    fn default() -> Self {
        Self::new(Datatype::Float32)
    }
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&GZIP_MAGIC) {
        let mut out = Vec::new();
        MultiGzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn paired_image_path(header_path: &Path) -> PathBuf {
    let s = header_path.to_string_lossy();
    let img = if let Some(stem) = s.strip_suffix(".hdr.gz") {
        format!("{stem}.img.gz")
    } else if let Some(stem) = s.strip_suffix(".hdr") {
        format!("{stem}.img")
    } else {
        format!("{s}.img")
    };
    PathBuf::from(img)
}

pub fn read_nifti(path: impl AsRef<Path>) -> Result<Volume> {
    let path = path.as_ref();
    let bytes = read_maybe_gz(path)?;
    let header = NiftiHeader::from_bytes(&bytes)?;
    if header.is_paired() {
        let img = read_maybe_gz(&paired_image_path(path))?;
        decode_volume(header, &img)
    } else {
        decode_volume(header, &bytes)
    }
}

/// Read a file and binarize it (nonzero is foreground).
pub fn read_mask(path: impl AsRef<Path>) -> Result<Mask> {
    read_nifti(path).map(|v| Mask::from_volume(&v))
}

/// Parse an in-memory single-file image (already decompressed).
pub fn parse_nifti(bytes: &[u8]) -> Result<Volume> {
    let header = NiftiHeader::from_bytes(bytes)?;
    if header.is_paired() {
        return Err(Error::Format(
            "paired header has no data section; read it from a path".into(),
        ));
    }
    decode_volume(header, bytes)
}

fn decode_volume(header: NiftiHeader, bytes: &[u8]) -> Result<Volume> {
    let n = header.voxel_count();
    let width = header.datatype.byte_size();
    let start = header.vox_offset as usize;
    let expected = n * width;
    let available = bytes.len().saturating_sub(start);
    if available < expected {
        return Err(Error::Truncated {
            expected,
            actual: available,
        });
    }
    let raw = &bytes[start..start + expected];
    let mut data = if header.little_endian {
        decode_samples::<LittleEndian>(raw, header.datatype, n)
    } else {
        decode_samples::<BigEndian>(raw, header.datatype, n)
    };

    let (slope, inter) = header.scaling();
    if slope != 1.0 || inter != 0.0 {
        for v in &mut data {
            *v = (slope * *v as f64 + inter) as f32;
        }
    }

    let grid = Grid::new(header.dims(), header.spacing(), header.affine())?;
    Volume::with_header(header, grid, data)
}

fn decode_samples<E: ByteOrder>(raw: &[u8], datatype: Datatype, n: usize) -> Vec<f32> {
    match datatype {
        Datatype::UInt8 => raw.iter().map(|&b| b as f32).collect(),
        Datatype::Int16 => {
            let mut tmp = vec![0i16; n];
            E::read_i16_into(raw, &mut tmp);
            tmp.into_iter().map(|v| v as f32).collect()
        }
        Datatype::Float32 => {
            let mut tmp = vec![0f32; n];
            E::read_f32_into(raw, &mut tmp);
            tmp
        }
        Datatype::Float64 => {
            let mut tmp = vec![0f64; n];
            E::read_f64_into(raw, &mut tmp);
            tmp.into_iter().map(|v| v as f32).collect()
        }
    }
}

/// Checks every intensity fits `datatype` exactly, or rounds and
/// clamps when `allow_lossy` is set.
fn integral_samples(data: &[f32], datatype: Datatype, lo: f32, hi: f32, allow_lossy: bool) -> Result<Vec<f32>> {
    if !allow_lossy {
        if let Some(&bad) = data
            .iter()
            .find(|v| !(v.is_finite() && v.fract() == 0.0 && **v >= lo && **v <= hi))
        {
            return Err(Error::Precision {
                datatype: datatype.name(),
                detail: format!("value {bad} is not an integer in [{lo}, {hi}]"),
            });
        }
        return Ok(data.to_vec());
    }
    Ok(data
        .iter()
        .map(|v| if v.is_nan() { 0.0 } else { v.round().clamp(lo, hi) })
        .collect())
}

fn encode_samples<E: ByteOrder>(data: &[f32], opts: &WriteOptions) -> Result<Vec<u8>> {
    let n = data.len();
    let mut out = vec![0u8; n * opts.datatype.byte_size()];
    match opts.datatype {
        Datatype::UInt8 => {
            let vals = integral_samples(data, opts.datatype, 0.0, 255.0, opts.allow_lossy)?;
            for (o, v) in out.iter_mut().zip(vals) {
                *o = v as u8;
            }
        }
        Datatype::Int16 => {
            let vals = integral_samples(data, opts.datatype, -32768.0, 32767.0, opts.allow_lossy)?;
            let ints: Vec<i16> = vals.into_iter().map(|v| v as i16).collect();
            E::write_i16_into(&ints, &mut out);
        }
        Datatype::Float32 => E::write_f32_into(data, &mut out),
        Datatype::Float64 => {
            let wide: Vec<f64> = data.iter().map(|&v| v as f64).collect();
            E::write_f64_into(&wide, &mut out);
        }
    }
    Ok(out)
}

/// Serialize to an uncompressed single-file image.
pub fn encode_nifti(volume: &Volume, opts: &WriteOptions) -> Result<Vec<u8>> {
    let grid = volume.grid();
    if grid.dims().iter().any(|&d| d > i16::MAX as usize) {
        return Err(Error::Format(format!(
            "dims {:?} exceed the NIfTI-1 limit of 32767",
            grid.dims()
        )));
    }
    let mut header = NiftiHeader::for_grid(grid, opts.datatype);
    header.descrip = volume.header().descrip.clone();
    header.little_endian = !opts.big_endian;

    let mut bytes = header.to_bytes();
    // no extensions follow the header
    bytes.extend_from_slice(&[0u8; DEFAULT_VOX_OFFSET - HEADER_SIZE]);
    let data = if opts.big_endian {
        encode_samples::<BigEndian>(volume.data(), opts)?
    } else {
        encode_samples::<LittleEndian>(volume.data(), opts)?
    };
    bytes.extend_from_slice(&data);
    Ok(bytes)
}

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("gz"))
}

pub fn write_nifti(volume: &Volume, path: impl AsRef<Path>, opts: &WriteOptions) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_nifti(volume, opts)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res = if is_gz(path) {
        let mut enc = GzEncoder::new(&mut w, Compression::default());
        enc.write_all(&bytes).and_then(|_| enc.finish().map(|_| ()))
    } else {
        w.write_all(&bytes)
    };
    res.and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// Write a mask as unsigned 8-bit 0/1.
pub fn write_mask(mask: &Mask, path: impl AsRef<Path>) -> Result<()> {
    write_nifti(&mask.to_volume(), path, &WriteOptions::new(Datatype::UInt8))
}
