//! Flat binary container for fields and spectra.
//!
//! Layout, all little-endian:
//!
//! ```text
//! offset  size  content
//! 0       8     magic "CONELAB1"
//! 8       1     kind: 0 = spatial samples, 1 = Fourier coefficients
//! 9       1     layout: 0 = row-major, last axis fastest
//! 10      1     grid offset flag: 0 = centered, 1 = half-cell
//! 11      1     reserved, must be 0
//! 12      4     dimension n (u32)
//! 16      4     samples per axis N (u32)
//! 20      8     period L (f64)
//! 28      16*T  payload: T = N^n entries, interleaved re, im (f64 each)
//! ```
//!
//! Values are stored as 64-bit floats regardless of the in-memory scalar.

use crate::error::{CoreError, Result};
use crate::lattice::{GridSpec, SpatialField, Spectrum};
use crate::scalar::Scalar;
use num_complex::Complex;
use std::io::{Read, Write};

const MAGIC: &[u8; 8] = b"CONELAB1";
const KIND_SPATIAL: u8 = 0;
const KIND_SPECTRUM: u8 = 1;
const LAYOUT_ROW_MAJOR: u8 = 0;

fn write_header<S: Scalar, W: Write>(w: &mut W, spec: &GridSpec<S>, kind: u8) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&[kind, LAYOUT_ROW_MAJOR, spec.is_offset() as u8, 0])?;
    w.write_all(&(spec.n() as u32).to_le_bytes())?;
    w.write_all(&(spec.samples() as u32).to_le_bytes())?;
    w.write_all(&spec.length().as_f64().to_le_bytes())?;
    Ok(())
}

fn write_payload<S: Scalar, W: Write>(w: &mut W, values: &[Complex<S>]) -> Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 16);
    for z in values {
        buf.extend_from_slice(&z.re.as_f64().to_le_bytes());
        buf.extend_from_slice(&z.im.as_f64().to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_header<S: Scalar, R: Read>(r: &mut R, want_kind: u8) -> Result<GridSpec<S>> {
    let mut head = [0u8; 28];
    r.read_exact(&mut head)?;
    if &head[..8] != MAGIC {
        return Err(CoreError::BadContainer("bad magic".into()));
    }
    let kind = head[8];
    if kind != want_kind {
        return Err(CoreError::BadContainer(format!(
            "kind {kind} where {want_kind} was expected"
        )));
    }
    if head[9] != LAYOUT_ROW_MAJOR {
        return Err(CoreError::BadContainer(format!("unknown layout {}", head[9])));
    }
    if head[11] != 0 {
        return Err(CoreError::BadContainer("reserved byte set".into()));
    }
    let n = u32::from_le_bytes(head[12..16].try_into().unwrap()) as usize;
    let samples = u32::from_le_bytes(head[16..20].try_into().unwrap()) as usize;
    let length = f64::from_le_bytes(head[20..28].try_into().unwrap());
    let spec = if head[10] == 1 {
        GridSpec::new_offset(n, S::lit(length), samples)
    } else if head[10] == 0 {
        GridSpec::new(n, S::lit(length), samples)
    } else {
        return Err(CoreError::BadContainer(format!("bad offset flag {}", head[10])));
    }?;
    Ok(spec)
}

fn read_payload<S: Scalar, R: Read>(r: &mut R, total: usize) -> Result<Vec<Complex<S>>> {
    let mut buf = vec![0u8; total * 16];
    r.read_exact(&mut buf)?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(CoreError::BadContainer("trailing bytes after payload".into()));
    }
    let mut values = Vec::with_capacity(total);
    for chunk in buf.chunks_exact(16) {
        let re = f64::from_le_bytes(chunk[..8].try_into().unwrap());
        let im = f64::from_le_bytes(chunk[8..].try_into().unwrap());
        values.push(Complex::new(S::lit(re), S::lit(im)));
    }
    Ok(values)
}

pub fn write_spatial<S: Scalar, W: Write>(w: &mut W, field: &SpatialField<S>) -> Result<()> {
    write_header(w, field.spec(), KIND_SPATIAL)?;
    write_payload(w, field.values())
}

pub fn read_spatial<S: Scalar, R: Read>(r: &mut R) -> Result<SpatialField<S>> {
    let spec = read_header::<S, R>(r, KIND_SPATIAL)?;
    let values = read_payload(r, spec.total())?;
    SpatialField::from_values(spec, values)
}

pub fn write_spectrum<S: Scalar, W: Write>(w: &mut W, spectrum: &Spectrum<S>) -> Result<()> {
    write_header(w, spectrum.spec(), KIND_SPECTRUM)?;
    write_payload(w, spectrum.coeffs())
}

pub fn read_spectrum<S: Scalar, R: Read>(r: &mut R) -> Result<Spectrum<S>> {
    let spec = read_header::<S, R>(r, KIND_SPECTRUM)?;
    let coeffs = read_payload(r, spec.total())?;
    Spectrum::from_coeffs(spec, coeffs)
}
