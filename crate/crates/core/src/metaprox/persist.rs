//! Binary container for proximity bundles.
//!
//! A file is a sequence of sections, one per meta path, all little endian:
//!
//! ```text
//! magic      9 bytes  "DIMEPROX1"
//! n_users    u64
//! path id    u8       0..=7
//! nnz        u64
//! nnz x { row u64, col u64, value f64 }   sorted row-major
//! ```

use std::io::{self, Read, Write};

use super::{CsrMatrix, MetaPath, ProximityBundle, ProximityMatrix};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 9] = b"DIMEPROX1";

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format {
        kind: "proximity bundle",
        msg: msg.into(),
    }
}

pub fn write_bundle<W: Write>(bundle: &ProximityBundle, mut w: W) -> Result<()> {
    for m in bundle.matrices() {
        w.write_all(MAGIC)?;
        w.write_all(&(bundle.n_users() as u64).to_le_bytes())?;
        w.write_all(&[m.path.id()])?;
        w.write_all(&(m.values.nnz() as u64).to_le_bytes())?;
        for (r, c, v) in m.values.triplets() {
            w.write_all(&(r as u64).to_le_bytes())?;
            w.write_all(&(c as u64).to_le_bytes())?;
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u64(r: &mut impl Read) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Reads every section until end of input. Path counts are not stored, so
/// reloaded matrices carry `counts: None`.
pub fn read_bundle<R: Read>(mut r: R) -> Result<ProximityBundle> {
    let mut matrices = Vec::new();
    let mut n_users: Option<usize> = None;
    loop {
        let mut magic = [0u8; 9];
        match r.read_exact(&mut magic[..1]) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        r.read_exact(&mut magic[1..])
            .map_err(|_| format_err("truncated header"))?;
        if &magic != MAGIC {
            return Err(format_err("bad magic"));
        }
        let n = read_u64(&mut r).map_err(|_| format_err("truncated header"))? as usize;
        if *n_users.get_or_insert(n) != n {
            return Err(format_err("sections disagree on user count"));
        }
        let mut id = [0u8; 1];
        r.read_exact(&mut id).map_err(|_| format_err("truncated header"))?;
        let path = MetaPath::from_id(id[0]).ok_or_else(|| format_err(format!("unknown path id {}", id[0])))?;
        let nnz = read_u64(&mut r).map_err(|_| format_err("truncated header"))? as usize;
        let mut triplets = Vec::with_capacity(nnz.min(1 << 24));
        for _ in 0..nnz {
            let row = read_u64(&mut r).map_err(|_| format_err("truncated triplets"))? as usize;
            let col = read_u64(&mut r).map_err(|_| format_err("truncated triplets"))? as usize;
            let val = f64::from_bits(read_u64(&mut r).map_err(|_| format_err("truncated triplets"))?);
            if row >= n || col >= n {
                return Err(format_err(format!("entry ({row}, {col}) outside {n}x{n}")));
            }
            triplets.push((row, col, val));
        }
        matrices.push(ProximityMatrix {
            path,
            values: CsrMatrix::from_triplets(n, n, &triplets),
            counts: None,
        });
    }
    ProximityBundle::new(n_users.unwrap_or(0), matrices)
}
