//! `SPEM` binary sparse matrix format, little-endian:
//!
//! ```text
//! magic   "SPEM"           4 bytes
//! version u32              currently 1
//! rows    u64
//! cols    u64
//! nnz     u64
//! layout  u32              0 = CSR, 1 = CSC
//! offsets u64 × (major+1)  major = rows for CSR, cols for CSC
//! indices u32 × nnz
//! values  f32 × nnz
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{CscMatrix, CsrMatrix};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SPEM";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum Layout {
    Csr = 0,
    Csc = 1,
}

/// A matrix read back from disk, in whichever layout it was written.
#[derive(Debug, Clone, PartialEq)]
pub enum SpemMatrix {
    Csr(CsrMatrix),
    Csc(CscMatrix),
}

impl SpemMatrix {
    pub fn into_csr(self) -> CsrMatrix {
        match self {
            SpemMatrix::Csr(m) => m,
            SpemMatrix::Csc(m) => m.to_csr(),
        }
    }

    pub fn layout(&self) -> Layout {
        match self {
            SpemMatrix::Csr(_) => Layout::Csr,
            SpemMatrix::Csc(_) => Layout::Csc,
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn write_raw<W: Write>(
    w: &mut W,
    layout: Layout,
    rows: usize,
    cols: usize,
    indptr: &[usize],
    indices: &[u32],
    values: &[f32],
) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(rows as u64).to_le_bytes())?;
    w.write_all(&(cols as u64).to_le_bytes())?;
    w.write_all(&(indices.len() as u64).to_le_bytes())?;
    w.write_all(&(layout as u32).to_le_bytes())?;
    for &o in indptr {
        w.write_all(&(o as u64).to_le_bytes())?;
    }
    for &i in indices {
        w.write_all(&i.to_le_bytes())?;
    }
    for &v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_csr<W: Write>(w: &mut W, m: &CsrMatrix) -> Result<()> {
    write_raw(w, Layout::Csr, m.rows(), m.cols(), m.indptr(), m.indices(), m.values())?;
    Ok(())
}

pub fn write_csc<W: Write>(w: &mut W, m: &CscMatrix) -> Result<()> {
    write_raw(w, Layout::Csc, m.rows(), m.cols(), m.indptr(), m.indices(), m.values())?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn to_usize(v: u64, what: &str) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::Format(format!("{what} {v} does not fit in memory")))
}

pub fn read<R: Read>(r: &mut R) -> Result<SpemMatrix> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let rows = to_usize(read_u64(r)?, "rows")?;
    let cols = to_usize(read_u64(r)?, "cols")?;
    let nnz = to_usize(read_u64(r)?, "nnz")?;
    let layout = match read_u32(r)? {
        0 => Layout::Csr,
        1 => Layout::Csc,
        other => return Err(Error::Format(format!("unknown layout tag {other}"))),
    };
    let major = match layout {
        Layout::Csr => rows,
        Layout::Csc => cols,
    };
    let mut indptr = Vec::with_capacity(major + 1);
    for _ in 0..=major {
        indptr.push(to_usize(read_u64(r)?, "offset")?);
    }
    if indptr.last() != Some(&nnz) {
        return Err(Error::Format("last offset disagrees with nnz".into()));
    }
    let mut indices = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        indices.push(read_u32(r)?);
    }
    let mut values = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        values.push(f32::from_bits(read_u32(r)?));
    }
    Ok(match layout {
        Layout::Csr => SpemMatrix::Csr(CsrMatrix::try_new(rows, cols, indptr, indices, values)?),
        Layout::Csc => SpemMatrix::Csc(CscMatrix::try_new(rows, cols, indptr, indices, values)?),
    })
}

pub fn save_csr(path: impl AsRef<Path>, m: &CsrMatrix) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_csr(&mut w, m)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<SpemMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read(&mut BufReader::new(file))
}
