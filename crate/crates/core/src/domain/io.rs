//! Snapshot container: `LIEFIELD`, u32 version, u32 n, n x u32 grid,
//! n x f64 lengths, u32 m, f64 time, then the values as f64. Little-endian.

use std::io::{Read, Write};
use std::path::Path;

use super::{DomainKind, DomainSpec, Field};
use crate::error::{Error, Result};

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"LIEFIELD";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub grid: Vec<usize>,
    pub lengths: Vec<f64>,
    pub m: usize,
    pub time: f64,
    pub values: Vec<f64>,
}

impl Snapshot {
    pub fn from_field(field: &Field, time: f64) -> Self {
        Snapshot {
            grid: field.domain().grid().to_vec(),
            lengths: field.domain().lengths().to_vec(),
            m: field.algebra_dim(),
            time,
            values: field.values().to_vec(),
        }
    }

    pub fn to_field(&self, kind: DomainKind) -> Result<Field> {
        let d = DomainSpec::new(kind, self.lengths.clone(), self.grid.clone())?;
        Field::new(d, self.m, self.values.clone())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + self.values.len() * 8);
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.grid.len() as u32).to_le_bytes());
        for &g in &self.grid {
            out.extend_from_slice(&(g as u32).to_le_bytes());
        }
        for &l in &self.lengths {
            out.extend_from_slice(&l.to_le_bytes());
        }
        out.extend_from_slice(&(self.m as u32).to_le_bytes());
        out.extend_from_slice(&self.time.to_le_bytes());
        for &v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0, path };
        if cur.take(8)? != SNAPSHOT_MAGIC {
            return Err(Error::format(path, "bad magic"));
        }
        let version = cur.u32()?;
        if version != SNAPSHOT_VERSION {
            return Err(Error::format(path, format!("unsupported version {version}")));
        }
        let n = cur.u32()? as usize;
        if n == 0 || n > 3 {
            return Err(Error::format(path, format!("space dimension {n}")));
        }
        let grid = (0..n).map(|_| cur.u32().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let lengths = (0..n).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
        let m = cur.u32()? as usize;
        let time = cur.f64()?;
        let count = grid.iter().product::<usize>() * m;
        let rest = bytes.len() - cur.pos;
        if rest != count * 8 {
            return Err(Error::format(
                path,
                format!("expected {} data bytes, found {rest}", count * 8),
            ));
        }
        let values = (0..count).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::format(path, "non-finite value in snapshot"));
        }
        Ok(Snapshot { grid, lengths, m, time, values })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        if self.pos + k > self.bytes.len() {
            return Err(Error::format(self.path, "truncated header"));
        }
        let s = &self.bytes[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn write_snapshot(path: &Path, snap: &Snapshot) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&snap.encode()).map_err(|e| Error::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    Snapshot::decode(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_corruption() {
        let d = DomainSpec::torus(&[1.0, 2.0], &[4, 5]).unwrap();
        let f = Field::from_fn(&d, 3, |x, o| {
            o[0] = x[0];
            o[1] = x[1];
            o[2] = -1.5;
        });
        let s = Snapshot::from_field(&f, 0.25);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("snap.fld");
        write_snapshot(&p, &s).unwrap();
        let back = read_snapshot(&p).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_field(DomainKind::FlatTorus).unwrap(), f);
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..8], b"LIEFIELD");
        std::fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
        let err = read_snapshot(&p).unwrap_err();
        assert!(err.to_string().contains("snap.fld"));
    }
}
