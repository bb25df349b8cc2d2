//! Binary container for assembled matrices.
//!
//! Layout (little-endian):
//!
//! ```text
//! "EHYB" | version: u32 | precision tag: u32 (4 or 8) | payload | crc32(payload): u32
//! ```
//!
//! The payload holds the scalar parameters followed by every array of the
//! matrix, each prefixed with its element count as `u64`. Offsets are
//! stored as `u64`, tables as `u32`, ELL columns as `u16` and values with
//! the tagged precision.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::format::{DeviceProfile, EhybMatrix, EhybParams, ReorderPlan};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"EHYB";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 12;

/// A container read without knowing its precision in advance.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyEhyb {
    Single(EhybMatrix<f32>),
    Double(EhybMatrix<f64>),
}

impl AnyEhyb {
    pub fn tau(&self) -> usize {
        match self {
            AnyEhyb::Single(_) => 4,
            AnyEhyb::Double(_) => 8,
        }
    }
}

struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn len(&mut self, n: usize) {
        self.u64(n as u64);
    }
    fn usizes(&mut self, v: &[usize]) {
        self.len(v.len());
        v.iter().for_each(|&x| self.u64(x as u64));
    }
    fn u32s(&mut self, v: &[u32]) {
        self.len(v.len());
        v.iter().for_each(|&x| self.u32(x));
    }
    fn u16s(&mut self, v: &[u16]) {
        self.len(v.len());
        v.iter().for_each(|&x| self.buf.extend_from_slice(&x.to_le_bytes()));
    }
    fn values<T: Scalar>(&mut self, v: &[T]) {
        self.len(v.len());
        v.iter().for_each(|&x| x.write_le(&mut self.buf));
    }
}

pub fn write_ehyb_container<T: Scalar, W: Write>(m: &EhybMatrix<T>, mut sink: W) -> Result<()> {
    let mut enc = Encoder { buf: Vec::new() };
    let p = &m.params;
    for v in [
        p.dimension,
        p.k,
        p.n_parts,
        p.vec_cache_size,
        p.tau,
        p.profile.num_processors,
        p.profile.warp_size,
        p.profile.shm_max,
        m.plan.dimension,
        m.plan.padded_dimension,
    ] {
        enc.u64(v as u64);
    }
    enc.u32s(&m.plan.reorder_table);
    enc.u32s(&m.plan.inverse_table);
    enc.u32s(&m.plan.er_rows);
    enc.u32s(&m.plan.y_idx_er);
    enc.values(&m.val_ell);
    enc.u16s(&m.col_ell);
    enc.usizes(&m.position_ell);
    enc.u32s(&m.width_ell);
    enc.u32s(&m.row_len_ell);
    enc.usizes(&m.part_boundary);
    enc.values(&m.val_er);
    enc.u32s(&m.col_er);
    enc.usizes(&m.position_er);
    enc.u32s(&m.width_er);
    enc.u32s(&m.row_len_er);

    sink.write_all(MAGIC)?;
    sink.write_all(&VERSION.to_le_bytes())?;
    sink.write_all(&(T::TAU as u32).to_le_bytes())?;
    sink.write_all(&enc.buf)?;
    sink.write_all(&crc32fast::hash(&enc.buf).to_le_bytes())?;
    sink.flush()?;
    Ok(())
}

struct Decoder<'a> {
    buf: &'a [u8],
}

impl<'a> Decoder<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::Truncated);
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Corrupt("value exceeds usize".into()))
    }
    fn array<T>(&mut self, width: usize, f: impl Fn(&[u8]) -> T) -> Result<Vec<T>> {
        let n = self.usize()?;
        let bytes = n.checked_mul(width).ok_or(Error::Truncated)?;
        Ok(self.take(bytes)?.chunks_exact(width).map(f).collect())
    }
    fn usizes(&mut self) -> Result<Vec<usize>> {
        self.array(8, |b| u64::from_le_bytes(b.try_into().unwrap()) as usize)
    }
    fn u32s(&mut self) -> Result<Vec<u32>> {
        self.array(4, |b| u32::from_le_bytes(b.try_into().unwrap()))
    }
    fn u16s(&mut self) -> Result<Vec<u16>> {
        self.array(2, |b| u16::from_le_bytes(b.try_into().unwrap()))
    }
    fn values<T: Scalar>(&mut self) -> Result<Vec<T>> {
        self.array(T::TAU, T::read_le)
    }
}

fn decode<T: Scalar>(payload: &[u8]) -> Result<EhybMatrix<T>> {
    let mut d = Decoder { buf: payload };
    let mut s = [0usize; 10];
    for v in &mut s {
        *v = d.usize()?;
    }
    let [dimension, k, n_parts, vec_cache_size, tau, num_processors, warp_size, shm_max, plan_dim, padded] = s;
    let params = EhybParams {
        dimension,
        k,
        n_parts,
        vec_cache_size,
        tau,
        profile: DeviceProfile { num_processors, warp_size, shm_max },
    };
    let plan = ReorderPlan {
        dimension: plan_dim,
        padded_dimension: padded,
        reorder_table: d.u32s()?,
        inverse_table: d.u32s()?,
        er_rows: d.u32s()?,
        y_idx_er: d.u32s()?,
    };
    let m = EhybMatrix {
        params,
        plan,
        val_ell: d.values()?,
        col_ell: d.u16s()?,
        position_ell: d.usizes()?,
        width_ell: d.u32s()?,
        row_len_ell: d.u32s()?,
        part_boundary: d.usizes()?,
        val_er: d.values()?,
        col_er: d.u32s()?,
        position_er: d.usizes()?,
        width_er: d.u32s()?,
        row_len_er: d.u32s()?,
    };
    if !d.buf.is_empty() {
        return Err(Error::Corrupt(format!("{} trailing payload bytes", d.buf.len())));
    }
    if m.params.tau != T::TAU {
        return Err(Error::PrecisionMismatch { expected: T::TAU as u32, found: m.params.tau as u32 });
    }
    m.validate()?;
    Ok(m)
}

/// Read a container, checking magic, version and checksum, then the
/// structural consistency of the decoded matrix.
pub fn read_ehyb_container<R: Read>(mut source: R) -> Result<AnyEhyb> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    if bytes.len() < 4 {
        return Err(Error::Truncated);
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes.len() < HEADER_LEN + 4 {
        return Err(Error::Truncated);
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let tag = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let (payload, crc) = bytes[HEADER_LEN..].split_at(bytes.len() - HEADER_LEN - 4);
    let stored = u32::from_le_bytes(crc.try_into().unwrap());
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(Error::ChecksumMismatch { stored, computed });
    }
    match tag {
        4 => decode(payload).map(AnyEhyb::Single),
        8 => decode(payload).map(AnyEhyb::Double),
        other => Err(Error::Corrupt(format!("unknown precision tag {other}"))),
    }
}

/// Read a container that must hold values of type `T`.
pub fn read_ehyb_container_as<T: Scalar, R: Read>(source: R) -> Result<EhybMatrix<T>> {
    let any = read_ehyb_container(source)?;
    let found = any.tau() as u32;
    let boxed: Box<dyn std::any::Any> = match any {
        AnyEhyb::Single(m) => Box::new(m),
        AnyEhyb::Double(m) => Box::new(m),
    };
    boxed
        .downcast::<EhybMatrix<T>>()
        .map(|b| *b)
        .map_err(|_| Error::PrecisionMismatch { expected: T::TAU as u32, found })
}
