//! N2RT binary tensor container.
//!
//! Layout of a single tensor:
//!
//! ```text
//! magic "N2RT" | version u32 LE | dtype u8 | ndim u8 | dims u64 LE each | data row-major
//! ```
//!
//! dtype 0 = complex64 stored as interleaved f32 (re, im); dtype 1 = f32.
//!
//! A multi-tensor archive is a u32 LE record count followed by
//! `(name-length u16 LE, UTF-8 name, tensor)` records, each record embedding
//! a full single-tensor blob including its magic.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"N2RT";
pub const VERSION: u32 = 1;

const DTYPE_COMPLEX64: u8 = 0;
const DTYPE_F32: u8 = 1;

/// A tensor as stored on disk. Complex data is f32-valued in the container;
/// in-memory math runs in f64 and converts at the boundary.
#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    Complex(ArrayD<Complex64>),
    F32(ArrayD<f32>),
}

impl TensorData {
    pub fn shape(&self) -> &[usize] {
        match self {
            TensorData::Complex(a) => a.shape(),
            TensorData::F32(a) => a.shape(),
        }
    }

    pub fn as_complex(&self) -> Result<&ArrayD<Complex64>> {
        match self {
            TensorData::Complex(a) => Ok(a),
            TensorData::F32(_) => Err(Error::parse("expected complex64 tensor, found f32")),
        }
    }

    pub fn as_f32(&self) -> Result<&ArrayD<f32>> {
        match self {
            TensorData::F32(a) => Ok(a),
            TensorData::Complex(_) => Err(Error::parse("expected f32 tensor, found complex64")),
        }
    }
}

pub fn write_tensor<W: Write>(w: &mut W, t: &TensorData) -> Result<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let (dtype, shape) = match t {
        TensorData::Complex(a) => (DTYPE_COMPLEX64, a.shape()),
        TensorData::F32(a) => (DTYPE_F32, a.shape()),
    };
    w.write_all(&[dtype, shape.len() as u8])?;
    for d in shape {
        w.write_all(&(*d as u64).to_le_bytes())?;
    }
    match t {
        TensorData::Complex(a) => {
            for v in a.iter() {
                w.write_all(&(v.re as f32).to_le_bytes())?;
                w.write_all(&(v.im as f32).to_le_bytes())?;
            }
        }
        TensorData::F32(a) => {
            for v in a.iter() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_tensor<R: Read>(r: &mut R) -> Result<TensorData> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(Error::parse("bad magic, not an N2RT tensor"));
    }
    let mut buf4 = [0u8; 4];
    r.read_exact(&mut buf4)?;
    let version = u32::from_le_bytes(buf4);
    if version != VERSION {
        return Err(Error::parse(format!("unsupported N2RT version {version}")));
    }
    let mut hdr = [0u8; 2];
    r.read_exact(&mut hdr)?;
    let (dtype, ndim) = (hdr[0], hdr[1] as usize);
    let mut dims = Vec::with_capacity(ndim);
    let mut buf8 = [0u8; 8];
    for _ in 0..ndim {
        r.read_exact(&mut buf8)?;
        dims.push(u64::from_le_bytes(buf8) as usize);
    }
    let n: usize = dims.iter().product();
    match dtype {
        DTYPE_COMPLEX64 => {
            let mut raw = vec![0u8; n * 8];
            r.read_exact(&mut raw)?;
            let vals: Vec<Complex64> = raw
                .chunks_exact(8)
                .map(|c| {
                    let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64;
                    let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]) as f64;
                    Complex64::new(re, im)
                })
                .collect();
            let arr = ArrayD::from_shape_vec(IxDyn(&dims), vals)
                .map_err(|e| Error::parse(format!("shape mismatch in tensor: {e}")))?;
            Ok(TensorData::Complex(arr))
        }
        DTYPE_F32 => {
            let mut raw = vec![0u8; n * 4];
            r.read_exact(&mut raw)?;
            let vals: Vec<f32> = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            let arr = ArrayD::from_shape_vec(IxDyn(&dims), vals)
                .map_err(|e| Error::parse(format!("shape mismatch in tensor: {e}")))?;
            Ok(TensorData::F32(arr))
        }
        other => Err(Error::parse(format!("unknown dtype code {other}"))),
    }
}

/// Write a multi-tensor archive. Record order is preserved on read.
pub fn write_archive(path: &Path, records: &[(String, TensorData)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&(records.len() as u32).to_le_bytes())?;
    for (name, tensor) in records {
        let bytes = name.as_bytes();
        if bytes.len() > u16::MAX as usize {
            return Err(Error::usage(format!("record name too long: {name}")));
        }
        w.write_all(&(bytes.len() as u16).to_le_bytes())?;
        w.write_all(bytes)?;
        write_tensor(&mut w, tensor)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_archive(path: &Path) -> Result<Vec<(String, TensorData)>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut buf4 = [0u8; 4];
    r.read_exact(&mut buf4)?;
    let count = u32::from_le_bytes(buf4) as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut buf2 = [0u8; 2];
        r.read_exact(&mut buf2)?;
        let len = u16::from_le_bytes(buf2) as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| Error::parse("record name not UTF-8"))?;
        out.push((name, read_tensor(&mut r)?));
    }
    Ok(out)
}

/// Look up a record by name in an archive read with [`read_archive`].
pub fn find<'a>(records: &'a [(String, TensorData)], name: &str) -> Result<&'a TensorData> {
    records
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, t)| t)
        .ok_or_else(|| Error::parse(format!("archive record not found: {name}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array;

    #[test]
    fn tensor_roundtrip() {
        let a = Array::from_shape_vec(
            IxDyn(&[2, 3]),
            (0..6).map(|i| Complex64::new(i as f64, -(i as f64))).collect(),
        )
        .unwrap();
        let t = TensorData::Complex(a);
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        assert_eq!(&buf[0..4], b"N2RT");
        let back = read_tensor(&mut buf.as_slice()).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn archive_roundtrip_preserves_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.n2rt");
        let recs = vec![
            ("b".to_string(), TensorData::F32(Array::zeros(IxDyn(&[4])))),
            ("a".to_string(), TensorData::F32(Array::ones(IxDyn(&[2, 2])))),
        ];
        write_archive(&path, &recs).unwrap();
        let back = read_archive(&path).unwrap();
        assert_eq!(recs, back);
        assert_eq!(find(&back, "a").unwrap().shape(), &[2, 2]);
    }

    #[test]
    fn rejects_bad_magic() {
        let buf = b"XXXX\x01\x00\x00\x00".to_vec();
        assert!(read_tensor(&mut buf.as_slice()).is_err());
    }
}
