//! Versioned binary container of named matrices and string lists.
//!
//! Layout (all integers and floats little-endian):
//!
//! | field | type |
//! |---|---|
//! | magic | 8 bytes `STEERTNS` |
//! | version | `u32` (= 1) |
//! | entry count | `u32` |
//!
//! followed by each entry: name length `u32`, UTF-8 name, kind `u8`, and
//! either (kind 0) rows `u64`, cols `u64`, `rows * cols` row-major `f64`,
//! or (kind 1) count `u64` and per string a `u32` length plus UTF-8 bytes.

use std::path::Path;

use crate::error::{Error, Result};

pub const TENSOR_MAGIC: &[u8; 8] = b"STEERTNS";
pub const TENSOR_VERSION: u32 = 1;

const WHAT: &str = "tensor container";

#[derive(Debug, Clone, PartialEq)]
pub enum Tensor {
    Matrix { rows: usize, cols: usize, data: Vec<f64> },
    Strings(Vec<String>),
}

impl Tensor {
    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix shape");
        Tensor::Matrix { rows, cols, data }
    }

    pub fn row(data: Vec<f64>) -> Self {
        Tensor::Matrix {
            rows: 1,
            cols: data.len(),
            data,
        }
    }

    /// Stacks equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::format(WHAT, "rows of unequal length"));
        }
        Ok(Tensor::Matrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TensorFile {
    pub entries: Vec<(String, Tensor)>,
}

impl TensorFile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, t: Tensor) -> &mut Self {
        self.entries.retain(|(n, _)| n != name);
        self.entries.push((name.into(), t));
        self
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| Error::format(WHAT, format!("missing entry {name:?}")))
    }

    /// `(rows, cols, row-major data)` of a matrix entry.
    pub fn matrix(&self, name: &str) -> Result<(usize, usize, &[f64])> {
        match self.get(name)? {
            Tensor::Matrix { rows, cols, data } => Ok((*rows, *cols, data)),
            Tensor::Strings(_) => Err(Error::format(WHAT, format!("entry {name:?} is not a matrix"))),
        }
    }

    pub fn rows(&self, name: &str) -> Result<Vec<Vec<f64>>> {
        let (r, c, d) = self.matrix(name)?;
        Ok((0..r).map(|i| d[i * c..(i + 1) * c].to_vec()).collect())
    }

    pub fn strings(&self, name: &str) -> Result<&[String]> {
        match self.get(name)? {
            Tensor::Strings(s) => Ok(s),
            Tensor::Matrix { .. } => Err(Error::format(WHAT, format!("entry {name:?} is not a string list"))),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = TENSOR_MAGIC.to_vec();
        out.extend(TENSOR_VERSION.to_le_bytes());
        out.extend((self.entries.len() as u32).to_le_bytes());
        for (name, t) in &self.entries {
            put_str(&mut out, name);
            match t {
                Tensor::Matrix { rows, cols, data } => {
                    out.push(0);
                    out.extend((*rows as u64).to_le_bytes());
                    out.extend((*cols as u64).to_le_bytes());
                    for v in data {
                        out.extend(v.to_le_bytes());
                    }
                }
                Tensor::Strings(s) => {
                    out.push(1);
                    out.extend((s.len() as u64).to_le_bytes());
                    for x in s {
                        put_str(&mut out, x);
                    }
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, at: 0 };
        if r.take(8)? != TENSOR_MAGIC {
            return Err(Error::format(WHAT, "missing STEERTNS magic"));
        }
        let version = r.u32()?;
        if version != TENSOR_VERSION {
            return Err(Error::Version {
                what: WHAT,
                found: version.to_string(),
                expected: TENSOR_VERSION.to_string(),
            });
        }
        let n = r.u32()?;
        let mut entries = Vec::new();
        for _ in 0..n {
            let name = r.string()?;
            let t = match r.take(1)?[0] {
                0 => {
                    let rows = r.u64()? as usize;
                    let cols = r.u64()? as usize;
                    let count = rows
                        .checked_mul(cols)
                        .filter(|c| c.checked_mul(8).is_some())
                        .ok_or_else(|| Error::format(WHAT, "matrix too large"))?;
                    let raw = r.take(8 * count)?;
                    let data: Vec<f64> = raw
                        .chunks_exact(8)
                        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                        .collect();
                    if data.iter().any(|v| !v.is_finite()) {
                        return Err(Error::format(WHAT, format!("matrix {name:?} holds a non-finite value")));
                    }
                    Tensor::Matrix { rows, cols, data }
                }
                1 => {
                    let count = r.u64()?;
                    let mut s = Vec::new();
                    for _ in 0..count {
                        s.push(r.string()?);
                    }
                    Tensor::Strings(s)
                }
                k => return Err(Error::format(WHAT, format!("unknown entry kind {k} for {name:?}"))),
            };
            entries.push((name, t));
        }
        if r.at != bytes.len() {
            return Err(Error::format(WHAT, format!("{} trailing bytes", bytes.len() - r.at)));
        }
        Ok(Self { entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend((s.len() as u32).to_le_bytes());
    out.extend(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let have = self.bytes.len() - self.at;
        if have < n {
            return Err(Error::Truncated {
                what: WHAT,
                offset: self.bytes.len(),
                needed: n - have,
            });
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::format(WHAT, "string is not UTF-8"))
    }
}
