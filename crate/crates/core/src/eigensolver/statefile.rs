//! Binary state-vector dumps.
//!
//! Layout: a 16-byte header (magic `SPN1`, `u32` site count, then eight
//! reserved zero bytes) followed by `3^N` pairs of little-endian `f64` `(re, im)` in basis order.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::operators::{hilbert_dim, C64};

pub const STATE_MAGIC: [u8; 4] = *b"SPN1";

#[derive(Debug, Clone, PartialEq)]
pub struct StateDump {
    pub site_count: usize,
    pub amplitudes: Vec<C64>,
}

pub fn write_state<W: Write>(mut out: W, site_count: usize, amplitudes: &[C64]) -> Result<()> {
    let expected = hilbert_dim(site_count);
    if amplitudes.len() != expected {
        return Err(Error::DimensionMismatch { expected, actual: amplitudes.len() });
    }
    out.write_all(&STATE_MAGIC)?;
    out.write_all(&(site_count as u32).to_le_bytes())?;
    out.write_all(&[0u8; 8])?;
    let mut buf = Vec::with_capacity(16 * amplitudes.len());
    for z in amplitudes {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_state<R: Read>(mut input: R) -> Result<StateDump> {
    let mut header = [0u8; 16];
    input.read_exact(&mut header)?;
    if header[..4] != STATE_MAGIC {
        return Err(Error::Format { what: "state dump", detail: "bad magic".into() });
    }
    let site_count = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    if !(2..=16).contains(&site_count) {
        return Err(Error::Format { what: "state dump", detail: format!("site count {site_count}") });
    }
    let dim = hilbert_dim(site_count);
    let mut body = Vec::with_capacity(16 * dim);
    input.read_to_end(&mut body)?;
    if body.len() != 16 * dim {
        return Err(Error::Format {
            what: "state dump",
            detail: format!("expected {} payload bytes, found {}", 16 * dim, body.len()),
        });
    }
    let amplitudes = body
        .chunks_exact(16)
        .map(|c| {
            C64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    Ok(StateDump { site_count, amplitudes })
}
