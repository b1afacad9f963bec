//! The 348-byte NIfTI-1 header.

use byteorder::{BigEndian, ByteOrder, LittleEndian};

use crate::error::{Error, Result};
use crate::geometry::AffineTransform;
use crate::volume::Grid;

pub const HEADER_SIZE: usize = 348;
/// Data offset used for every file this crate writes: header plus the
/// 4-byte extension flag.
pub const DEFAULT_VOX_OFFSET: usize = 352;

mod offsets {
    pub const SIZEOF_HDR: usize = 0;
    pub const DIM: usize = 40;
    pub const DATATYPE: usize = 70;
    pub const BITPIX: usize = 72;
    pub const PIXDIM: usize = 76;
    pub const VOX_OFFSET: usize = 108;
    pub const SCL_SLOPE: usize = 112;
    pub const SCL_INTER: usize = 116;
    pub const XYZT_UNITS: usize = 123;
    pub const DESCRIP: usize = 148;
    pub const QFORM_CODE: usize = 252;
    pub const SFORM_CODE: usize = 254;
    pub const QUATERN_B: usize = 256;
    pub const QOFFSET_X: usize = 268;
    pub const SROW_X: usize = 280;
    pub const SROW_Y: usize = 296;
    pub const SROW_Z: usize = 312;
    pub const MAGIC: usize = 344;
}

/// On-disk scalar types this crate reads and writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(i16)]
pub enum Datatype {
    UInt8 = 2,
    Int16 = 4,
    Float32 = 16,
    Float64 = 64,
}

impl Datatype {
    pub const ALL: [Datatype; 4] = [
        Datatype::UInt8,
        Datatype::Int16,
        Datatype::Float32,
        Datatype::Float64,
    ];

    pub fn from_code(code: i16) -> Result<Self> {
        match code {
            2 => Ok(Self::UInt8),
            4 => Ok(Self::Int16),
            16 => Ok(Self::Float32),
            64 => Ok(Self::Float64),
            other => Err(Error::UnsupportedDatatype(other)),
        }
    }

    pub fn code(self) -> i16 {
        self as i16
    }

    pub fn byte_size(self) -> usize {
        match self {
            Self::UInt8 => 1,
            Self::Int16 => 2,
            Self::Float32 => 4,
            Self::Float64 => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::UInt8 => "uint8",
            Self::Int16 => "int16",
            Self::Float32 => "float32",
            Self::Float64 => "float64",
        }
    }
}

impl std::str::FromStr for Datatype {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "u8" | "uint8" => Ok(Self::UInt8),
            "i16" | "int16" => Ok(Self::Int16),
            "f32" | "float32" => Ok(Self::Float32),
            "f64" | "float64" => Ok(Self::Float64),
            _ => Err(Error::Input(format!(
                "unknown datatype '{s}' (expected uint8, int16, float32 or float64)"
            ))),
        }
    }
}

/// Parsed NIfTI-1 header. Numeric fields keep their on-disk widths.
#[derive(Debug, Clone, PartialEq)]
pub struct NiftiHeader {
    pub dim: [i16; 8],
    pub datatype: Datatype,
    pub bitpix: i16,
    pub pixdim: [f32; 8],
    pub vox_offset: f32,
    pub scl_slope: f32,
    pub scl_inter: f32,
    pub xyzt_units: u8,
    pub descrip: String,
    pub qform_code: i16,
    pub sform_code: i16,
    pub quatern: [f32; 3],
    pub qoffset: [f32; 3],
    pub srow: [[f32; 4]; 3],
    pub magic: [u8; 4],
    pub little_endian: bool,
}

impl NiftiHeader {
    /// Single-file (`n+1`) header describing `grid`, with the sform taken
    /// from the grid affine.
    pub fn for_grid(grid: &Grid, datatype: Datatype) -> Self {
        let [nx, ny, nz] = grid.dims();
        let [sx, sy, sz] = grid.spacing();
        let rows = grid.affine().rows();
        Self {
            dim: [3, nx as i16, ny as i16, nz as i16, 1, 1, 1, 1],
            datatype,
            bitpix: (datatype.byte_size() * 8) as i16,
            pixdim: [1.0, sx as f32, sy as f32, sz as f32, 1.0, 1.0, 1.0, 1.0],
            vox_offset: DEFAULT_VOX_OFFSET as f32,
            scl_slope: 1.0,
            scl_inter: 0.0,
            // millimetres
            xyzt_units: 2,
            descrip: String::new(),
            qform_code: 0,
            sform_code: 1,
            quatern: [0.0; 3],
            qoffset: [0.0; 3],
            srow: rows.map(|r| r.map(|v| v as f32)),
            magic: *b"n+1\0",
            little_endian: true,
        }
    }

    /// `true` for the paired `.hdr`/`.img` layout.
    pub fn is_paired(&self) -> bool {
        &self.magic[..3] == b"ni1"
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.dim[1], self.dim[2], self.dim[3]].map(|d| d as usize)
    }

    pub fn spacing(&self) -> [f64; 3] {
        [self.pixdim[1], self.pixdim[2], self.pixdim[3]].map(|s| s as f64)
    }

    pub fn voxel_count(&self) -> usize {
        self.dims().iter().product()
    }

    /// Effective intensity scaling; a zero or non-finite slope means 1.
    pub fn scaling(&self) -> (f64, f64) {
        let slope = if self.scl_slope == 0.0 || !self.scl_slope.is_finite() {
            1.0
        } else {
            self.scl_slope as f64
        };
        let inter = if self.scl_inter.is_finite() {
            self.scl_inter as f64
        } else {
            0.0
        };
        (slope, inter)
    }

    /// Voxel-to-world affine: sform when its code is set, else the
    /// quaternion qform, else plain spacing scaling.
    pub fn affine(&self) -> AffineTransform {
        if self.sform_code > 0 {
            AffineTransform::from_rows(self.srow.map(|r| r.map(|v| v as f64)))
        } else if self.qform_code > 0 {
            self.qform_affine()
        } else {
            AffineTransform::diagonal(self.spacing(), [0.0; 3])
        }
    }

    fn qform_affine(&self) -> AffineTransform {
        let [mut b, mut c, mut d] = self.quatern.map(|v| v as f64);
        let norm = b * b + c * c + d * d;
        let a = if 1.0 - norm < 1e-7 {
            let s = 1.0 / norm.sqrt();
            b *= s;
            c *= s;
            d *= s;
            0.0
        } else {
            (1.0 - norm).sqrt()
        };
        let pos = |v: f32| if v > 0.0 { v as f64 } else { 1.0 };
        let (xd, yd) = (pos(self.pixdim[1]), pos(self.pixdim[2]));
        let qfac = if self.pixdim[0] < 0.0 { -1.0 } else { 1.0 };
        let zd = pos(self.pixdim[3]) * qfac;
        let [ox, oy, oz] = self.qoffset.map(|v| v as f64);
        AffineTransform::from_rows([
            [
                (a * a + b * b - c * c - d * d) * xd,
                2.0 * (b * c - a * d) * yd,
                2.0 * (b * d + a * c) * zd,
                ox,
            ],
            [
                2.0 * (b * c + a * d) * xd,
                (a * a + c * c - b * b - d * d) * yd,
                2.0 * (c * d - a * b) * zd,
                oy,
            ],
            [
                2.0 * (b * d - a * c) * xd,
                2.0 * (c * d + a * b) * yd,
                (a * a + d * d - c * c - b * b) * zd,
                oz,
            ],
        ])
    }

    /// Parse a header, detecting byte order from `dim[0]`.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_SIZE {
            return Err(Error::Format(format!(
                "header needs {HEADER_SIZE} bytes, file has {}",
                bytes.len()
            )));
        }
        let ndim_le = LittleEndian::read_i16(&bytes[offsets::DIM..]);
        let ndim_be = BigEndian::read_i16(&bytes[offsets::DIM..]);
        if (1..=7).contains(&ndim_le) {
            Self::parse::<LittleEndian>(bytes, true)
        } else if (1..=7).contains(&ndim_be) {
            Self::parse::<BigEndian>(bytes, false)
        } else {
            Err(Error::Format(format!(
                "dim[0] is {ndim_le} (little-endian) / {ndim_be} (big-endian), expected 1..=7"
            )))
        }
    }

    fn parse<E: ByteOrder>(bytes: &[u8], little_endian: bool) -> Result<Self> {
        use offsets::*;

        let sizeof_hdr = E::read_i32(&bytes[SIZEOF_HDR..]);
        if sizeof_hdr != HEADER_SIZE as i32 {
            return Err(Error::Format(format!("sizeof_hdr is {sizeof_hdr}, expected 348")));
        }
        let mut magic = [0u8; 4];
        magic.copy_from_slice(&bytes[MAGIC..MAGIC + 4]);
        if &magic[..3] != b"n+1" && &magic[..3] != b"ni1" {
            return Err(Error::Format(format!("bad magic {magic:?}")));
        }

        let mut dim = [0i16; 8];
        E::read_i16_into(&bytes[DIM..DIM + 16], &mut dim);
        let ndim = dim[0] as usize;
        // axes beyond ndim are implicitly 1
        for d in dim.iter_mut().skip(ndim + 1) {
            *d = 1;
        }
        if let Some(axis) = (1..=3).find(|&a| dim[a] < 1) {
            return Err(Error::Format(format!("dim[{axis}] = {} must be >= 1", dim[axis])));
        }
        if let Some(axis) = (4..=ndim).find(|&a| dim[a] != 1) {
            return Err(Error::Format(format!(
                "only 3D volumes are supported; dim[{axis}] = {}",
                dim[axis]
            )));
        }

        let datatype = Datatype::from_code(E::read_i16(&bytes[DATATYPE..]))?;
        let bitpix = E::read_i16(&bytes[BITPIX..]);
        if bitpix as usize != datatype.byte_size() * 8 {
            return Err(Error::Format(format!(
                "bitpix {bitpix} does not match datatype {}",
                datatype.name()
            )));
        }

        let mut pixdim = [0f32; 8];
        E::read_f32_into(&bytes[PIXDIM..PIXDIM + 32], &mut pixdim);
        if let Some(axis) = (1..=3).find(|&a| !(pixdim[a] > 0.0 && pixdim[a].is_finite())) {
            return Err(Error::Format(format!(
                "pixdim[{axis}] = {} must be positive",
                pixdim[axis]
            )));
        }

        let vox_offset = E::read_f32(&bytes[VOX_OFFSET..]);
        if !(vox_offset >= 0.0 && vox_offset.is_finite() && vox_offset.fract() == 0.0) {
            return Err(Error::Format(format!("invalid vox_offset {vox_offset}")));
        }

        let descrip = String::from_utf8_lossy(&bytes[DESCRIP..DESCRIP + 80])
            .trim_end_matches('\0')
            .to_string();

        let mut quatern = [0f32; 3];
        E::read_f32_into(&bytes[QUATERN_B..QUATERN_B + 12], &mut quatern);
        let mut qoffset = [0f32; 3];
        E::read_f32_into(&bytes[QOFFSET_X..QOFFSET_X + 12], &mut qoffset);
        let mut srow = [[0f32; 4]; 3];
        for (row, off) in srow.iter_mut().zip([SROW_X, SROW_Y, SROW_Z]) {
            E::read_f32_into(&bytes[off..off + 16], row);
        }

        Ok(Self {
            dim,
            datatype,
            bitpix,
            pixdim,
            vox_offset,
            scl_slope: E::read_f32(&bytes[SCL_SLOPE..]),
            scl_inter: E::read_f32(&bytes[SCL_INTER..]),
            xyzt_units: bytes[XYZT_UNITS],
            descrip,
            qform_code: E::read_i16(&bytes[QFORM_CODE..]),
            sform_code: E::read_i16(&bytes[SFORM_CODE..]),
            quatern,
            qoffset,
            srow,
            magic,
            little_endian,
        })
    }

    /// Serialize in the byte order recorded in `little_endian`.
    pub fn to_bytes(&self) -> Vec<u8> {
        if self.little_endian {
            self.encode::<LittleEndian>()
        } else {
            self.encode::<BigEndian>()
        }
    }

    fn encode<E: ByteOrder>(&self) -> Vec<u8> {
        use offsets::*;

        let mut buf = vec![0u8; HEADER_SIZE];
        E::write_i32(&mut buf[SIZEOF_HDR..], HEADER_SIZE as i32);
        // "regular" flag, kept for Analyze 7.5 readers
        buf[38] = b'r';
        E::write_i16_into(&self.dim, &mut buf[DIM..DIM + 16]);
        E::write_i16(&mut buf[DATATYPE..], self.datatype.code());
        E::write_i16(&mut buf[BITPIX..], self.bitpix);
        E::write_f32_into(&self.pixdim, &mut buf[PIXDIM..PIXDIM + 32]);
        E::write_f32(&mut buf[VOX_OFFSET..], self.vox_offset);
        E::write_f32(&mut buf[SCL_SLOPE..], self.scl_slope);
        E::write_f32(&mut buf[SCL_INTER..], self.scl_inter);
        buf[XYZT_UNITS] = self.xyzt_units;
        let descrip = self.descrip.as_bytes();
        let n = descrip.len().min(79);
        buf[DESCRIP..DESCRIP + n].copy_from_slice(&descrip[..n]);
        E::write_i16(&mut buf[QFORM_CODE..], self.qform_code);
        E::write_i16(&mut buf[SFORM_CODE..], self.sform_code);
        E::write_f32_into(&self.quatern, &mut buf[QUATERN_B..QUATERN_B + 12]);
        E::write_f32_into(&self.qoffset, &mut buf[QOFFSET_X..QOFFSET_X + 12]);
        for (row, off) in self.srow.iter().zip([SROW_X, SROW_Y, SROW_Z]) {
            E::write_f32_into(row, &mut buf[off..off + 16]);
        }
        buf[MAGIC..MAGIC + 4].copy_from_slice(&self.magic);
        buf
    }
}
