//! Binary field snapshots.
//!
//! Layout, all integers and floats little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 8     | magic `MCSFIELD` |
//! | 4     | format version (`u32`, currently 1) |
//! | 4     | `N` (`u32`) |
//! | 8     | side length `L` (`f64`) |
//! | 4 + k | field name (`u32` byte count, UTF-8) |
//! | 4 + m | metadata (`u32` byte count, UTF-8, free form) |
//! | 8 N²  | values in row-major grid order (`f64`) |

use std::io::{self, Read, Write};

use crate::torus::{GridSpec, ScalarField};

pub const MAGIC: &[u8; 8] = b"MCSFIELD";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub name: String,
    pub metadata: String,
    pub field: ScalarField,
}

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not a field snapshot (bad magic)")]
    BadMagic,
    #[error("unsupported snapshot version {0}")]
    Version(u32),
    #[error("corrupt snapshot: {0}")]
    Corrupt(String),
}

impl Snapshot {
    pub fn new(name: impl Into<String>, metadata: impl Into<String>, field: ScalarField) -> Self {
        Self {
            name: name.into(),
            metadata: metadata.into(),
            field,
        }
    }

    pub fn write_to(&self, mut out: impl Write) -> io::Result<()> {
        let grid = self.field.grid();
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&(grid.n() as u32).to_le_bytes())?;
        out.write_all(&grid.length().to_le_bytes())?;
        for s in [&self.name, &self.metadata] {
            out.write_all(&(s.len() as u32).to_le_bytes())?;
            out.write_all(s.as_bytes())?;
        }
        let mut buf = Vec::with_capacity(8 * grid.len());
        for v in self.field.values() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)
    }

    pub fn read_from(mut input: impl Read) -> Result<Self, SnapshotError> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(SnapshotError::BadMagic);
        }
        let version = read_u32(&mut input)?;
        if version != VERSION {
            return Err(SnapshotError::Version(version));
        }
        let n = read_u32(&mut input)? as usize;
        let mut l = [0u8; 8];
        input.read_exact(&mut l)?;
        let grid = GridSpec::new(n, f64::from_le_bytes(l))
            .map_err(|e| SnapshotError::Corrupt(e.to_string()))?;
        let name = read_string(&mut input)?;
        let metadata = read_string(&mut input)?;
        let mut bytes = vec![0u8; 8 * grid.len()];
        input.read_exact(&mut bytes)?;
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        let mut rest = Vec::new();
        input.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(SnapshotError::Corrupt(format!("{} trailing bytes", rest.len())));
        }
        let field =
            ScalarField::new(grid, values).map_err(|e| SnapshotError::Corrupt(e.to_string()))?;
        Ok(Self {
            name,
            metadata,
            field,
        })
    }
}

fn read_u32(input: &mut impl Read) -> io::Result<u32> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_string(input: &mut impl Read) -> Result<String, SnapshotError> {
    let len = read_u32(input)? as usize;
    if len > 1 << 24 {
        return Err(SnapshotError::Corrupt(format!("string of {len} bytes")));
    }
    let mut b = vec![0u8; len];
    input.read_exact(&mut b)?;
    String::from_utf8(b).map_err(|e| SnapshotError::Corrupt(e.to_string()))
}
