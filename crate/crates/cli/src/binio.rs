//! Plain binary arrays: a 16-byte header of two little-endian `u64`
//! (`rows`, `cols`) followed by `rows·cols` little-endian `f64` in row-major
//! order. Vectors are stored as `n × 1`.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const HEADER_BYTES: u64 = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct Array2 {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

pub fn write_array(path: &Path, rows: usize, cols: usize, data: &[f64]) -> io::Result<()> {
    assert_eq!(rows * cols, data.len());
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&(rows as u64).to_le_bytes())?;
    w.write_all(&(cols as u64).to_le_bytes())?;
    for v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()
}

pub fn write_vector(path: &Path, v: &[f64]) -> io::Result<()> {
    write_array(path, v.len(), 1, v)
}

pub fn read_array(path: &Path) -> io::Result<Array2> {
    let mut r = BufReader::new(File::open(path)?);
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let rows = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let cols = u64::from_le_bytes(word) as usize;
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "dimension overflow"))?;
    let mut data = Vec::with_capacity(len);
    for _ in 0..len {
        r.read_exact(&mut word)?;
        data.push(f64::from_le_bytes(word));
    }
    if r.read(&mut word)? != 0 {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "trailing bytes after array"));
    }
    Ok(Array2 { rows, cols, data })
}
