//! Binary model checkpoints. All integers are u64 and all floats f64,
//! little endian, matrices row-major:
//!
//! ```text
//! magic          5 bytes  "DIME1"
//! n_networks     u8       1 or 2
//! per network:
//!   input_dim    u64
//!   n_paths      u64, then n_paths path ids as u8
//!   n_layers     u64, then n_layers encoder widths
//!   fusion_width u64
//!   d            u64
//! has_projection u8
//! tensors        every parameter in visit order
//! ```
//!
//! Visit order per network is, for each path: encoder (W, b) per layer,
//! fusion W, dispatch (W, b), decoder (W, b) per layer; then the fusion
//! bias, bottleneck (W, b) and expand (W, b). The projection comes last.

use std::io::{Read, Write};

use super::model::{ArchitectureSpec, DimeParams, NetworkParams};
use crate::error::{Error, Result};
use crate::metaprox::MetaPath;

pub const MAGIC: &[u8; 5] = b"DIME1";

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format {
        kind: "checkpoint",
        msg: msg.into(),
    }
}

fn put(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn get(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_u8(r: &mut impl Read) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn get_usize(r: &mut impl Read, what: &str) -> Result<usize> {
    let v = get(r)?;
    if v > (1 << 32) {
        return Err(format_err(format!("implausible {what} {v}")));
    }
    Ok(v as usize)
}

fn write_header(w: &mut impl Write, net: &NetworkParams) -> Result<()> {
    put(w, net.input_dim as u64)?;
    put(w, net.paths.len() as u64)?;
    for p in &net.paths {
        w.write_all(&[p.id()])?;
    }
    let widths = net.encoder_widths();
    put(w, widths.len() as u64)?;
    for x in widths {
        put(w, x as u64)?;
    }
    put(w, net.fusion_width() as u64)?;
    put(w, net.embedding_dim() as u64)
}

fn read_header(r: &mut impl Read) -> Result<(ArchitectureSpec, usize)> {
    let input_dim = get_usize(r, "input dimension")?;
    let n_paths = get_usize(r, "path count")?;
    let mut paths = Vec::with_capacity(n_paths.min(8));
    for _ in 0..n_paths {
        let id = get_u8(r)?;
        paths.push(MetaPath::from_id(id).ok_or_else(|| format_err(format!("unknown meta path id {id}")))?);
    }
    let n_layers = get_usize(r, "layer count")?;
    let mut encoder_widths = Vec::with_capacity(n_layers.min(64));
    for _ in 0..n_layers {
        encoder_widths.push(get_usize(r, "layer width")?);
    }
    let fusion_width = get_usize(r, "fusion width")?;
    let embedding_dim = get_usize(r, "embedding dimension")?;
    let arch = ArchitectureSpec {
        encoder_widths,
        fusion_width,
        embedding_dim,
        paths,
    };
    arch.validate().map_err(|e| format_err(e.to_string()))?;
    Ok((arch, input_dim))
}

pub fn write_checkpoint<W: Write>(params: &DimeParams, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    let nets: Vec<&NetworkParams> = std::iter::once(&params.emerging).chain(params.mature.as_ref()).collect();
    w.write_all(&[nets.len() as u8])?;
    for net in &nets {
        write_header(&mut w, net)?;
    }
    w.write_all(&[params.projection.is_some() as u8])?;
    let mut status = Ok(());
    params.visit(&mut |_, t| {
        for v in t {
            if status.is_ok() {
                status = w.write_all(&v.to_le_bytes());
            }
        }
    });
    status?;
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<DimeParams> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(format_err("bad magic"));
    }
    let n_nets = get_u8(&mut r)?;
    if !(1..=2).contains(&n_nets) {
        return Err(format_err(format!("expected 1 or 2 networks, found {n_nets}")));
    }
    let mut nets = Vec::new();
    for _ in 0..n_nets {
        let (arch, n) = read_header(&mut r)?;
        nets.push(NetworkParams::init(&arch, n, 0)?.zeros_like());
    }
    let has_projection = match get_u8(&mut r)? {
        0 => false,
        1 => true,
        b => return Err(format_err(format!("bad projection flag {b}"))),
    };
    if has_projection != (n_nets == 2) {
        return Err(format_err("projection present iff two networks"));
    }
    let mut nets = nets.into_iter();
    let emerging = nets.next().unwrap();
    let mature = nets.next();
    let projection = mature
        .as_ref()
        .map(|m| ndarray::Array2::zeros((emerging.embedding_dim(), m.embedding_dim())));
    let mut params = DimeParams {
        emerging,
        mature,
        projection,
    };
    let mut status: Result<()> = Ok(());
    params.visit_mut(&mut |_, t| {
        for v in t.iter_mut() {
            if status.is_ok() {
                let mut b = [0u8; 8];
                match r.read_exact(&mut b) {
                    Ok(()) => *v = f64::from_le_bytes(b),
                    Err(e) => status = Err(e.into()),
                }
            }
        }
    });
    status?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(format_err("trailing bytes"));
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deepalign::model::init_params;

    fn arch() -> ArchitectureSpec {
        ArchitectureSpec {
            encoder_widths: vec![4, 3],
            fusion_width: 3,
            embedding_dim: 2,
            paths: vec![MetaPath::Phi0, MetaPath::Phi2, MetaPath::Phi6],
        }
    }

    #[test]
    fn round_trip_pair() {
        let p = init_params(&arch(), 7, Some((&arch().with_paths(&[MetaPath::Phi1]), 5)), 3).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&p, &mut buf).unwrap();
        assert_eq!(&buf[..5], b"DIME1");
        assert_eq!(read_checkpoint(&buf[..]).unwrap(), p);
    }

    #[test]
    fn round_trip_single() {
        let p = DimeParams::single(NetworkParams::init(&arch(), 4, 1).unwrap());
        let mut buf = Vec::new();
        write_checkpoint(&p, &mut buf).unwrap();
        assert_eq!(read_checkpoint(&buf[..]).unwrap(), p);
        assert_eq!(buf.len(), 5 + 1 + (8 * 2 + 3 + 8 * 3 + 16) + 1 + 8 * p.emerging.n_params());
    }

    #[test]
    fn truncated_and_corrupt() {
        let p = DimeParams::single(NetworkParams::init(&arch(), 4, 1).unwrap());
        let mut buf = Vec::new();
        write_checkpoint(&p, &mut buf).unwrap();
        assert!(read_checkpoint(&buf[..buf.len() - 1]).is_err());
        let mut longer = buf.clone();
        longer.push(0);
        assert!(read_checkpoint(&longer[..]).is_err());
        buf[0] = b'X';
        assert!(matches!(read_checkpoint(&buf[..]), Err(Error::Format { .. })));
    }
}
