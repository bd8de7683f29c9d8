//! Raw field files: one ASCII header line followed by little-endian `f64`
//! samples in natural grid order (`x1` fastest). Complex samples are stored
//! as interleaved real/imaginary pairs.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::C64;

use super::DiscretizationError;

const MAGIC: &str = "helmsweep-field v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldHeader {
    pub dim: usize,
    pub n: usize,
    pub complex: bool,
}

impl FieldHeader {
    fn line(&self) -> String {
        let kind = if self.complex { "complex" } else { "real" };
        format!("{MAGIC} dim={} n={} kind={kind}\n", self.dim, self.n)
    }

    fn parse(line: &str) -> Result<Self, DiscretizationError> {
        let bad = || DiscretizationError::Format(format!("bad header line '{}'", line.trim_end()));
        let rest = line.strip_prefix(MAGIC).ok_or_else(bad)?;
        let (mut dim, mut n, mut complex) = (None, None, None);
        for tok in rest.split_whitespace() {
            let (k, v) = tok.split_once('=').ok_or_else(bad)?;
            match k {
                "dim" => dim = v.parse().ok(),
                "n" => n = v.parse().ok(),
                "kind" => {
                    complex = match v {
                        "real" => Some(false),
                        "complex" => Some(true),
                        _ => None,
                    }
                }
                _ => return Err(bad()),
            }
        }
        Ok(Self { dim: dim.ok_or_else(bad)?, n: n.ok_or_else(bad)?, complex: complex.ok_or_else(bad)? })
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldData {
    Real(Vec<f64>),
    Complex(Vec<C64>),
}

fn write_raw(path: &Path, header: FieldHeader, values: impl Iterator<Item = f64>) -> Result<(), DiscretizationError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(header.line().as_bytes())?;
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_real_field(path: &Path, dim: usize, n: usize, values: &[f64]) -> Result<(), DiscretizationError> {
    let header = FieldHeader { dim, n, complex: false };
    if values.len() != header.len() {
        return Err(DiscretizationError::SizeMismatch { expected: header.len(), got: values.len() });
    }
    write_raw(path, header, values.iter().copied())
}

pub fn write_complex_field(path: &Path, dim: usize, n: usize, values: &[C64]) -> Result<(), DiscretizationError> {
    let header = FieldHeader { dim, n, complex: true };
    if values.len() != header.len() {
        return Err(DiscretizationError::SizeMismatch { expected: header.len(), got: values.len() });
    }
    write_raw(path, header, values.iter().flat_map(|z| [z.re, z.im]))
}

pub fn read_field(path: &Path) -> Result<(FieldHeader, FieldData), DiscretizationError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header = FieldHeader::parse(&line)?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let per = if header.complex { 16 } else { 8 };
    if bytes.len() != per * header.len() {
        return Err(DiscretizationError::Format(format!(
            "expected {} payload bytes, found {}",
            per * header.len(),
            bytes.len()
        )));
    }
    let floats: Vec<f64> =
        bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();
    let data = if header.complex {
        FieldData::Complex(floats.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect())
    } else {
        FieldData::Real(floats)
    };
    Ok((header, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("u.field");
        let vals: Vec<C64> = (0..27).map(|k| C64::new(k as f64 / 3.0, -(k as f64).sqrt())).collect();
        write_complex_field(&p, 3, 3, &vals).unwrap();
        let (h, d) = read_field(&p).unwrap();
        assert_eq!(h, FieldHeader { dim: 3, n: 3, complex: true });
        assert_eq!(d, FieldData::Complex(vals));

        let q = dir.path().join("c.field");
        let reals: Vec<f64> = (0..16).map(|k| 1.0 + k as f64 * 0.1).collect();
        write_real_field(&q, 2, 4, &reals).unwrap();
        assert_eq!(read_field(&q).unwrap().1, FieldData::Real(reals));
        let head = std::fs::read(&q).unwrap();
        assert!(head.starts_with(b"helmsweep-field v1 dim=2 n=4 kind=real\n"));
    }

    #[test]
    fn truncated_payload_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.field");
        std::fs::write(&p, b"helmsweep-field v1 dim=2 n=4 kind=real\n\x00\x00").unwrap();
        assert!(matches!(read_field(&p), Err(DiscretizationError::Format(_))));
        std::fs::write(&p, b"not a field\n").unwrap();
        assert!(read_field(&p).is_err());
    }
}
