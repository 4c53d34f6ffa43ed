//! Portable Float Map (single channel, `Pf`) reader and writer.
//!
//! Layout: `Pf\n<W> <H>\n<scale>\n` followed by `W*H` 32-bit floats, rows
//! stored bottom-to-top. A negative scale means little-endian samples.
//! The writer always emits little-endian with scale `-1.0`.

use std::io::{self, Read, Write};

use super::DepthMap;

#[derive(Debug, thiserror::Error)]
pub enum PfmError {
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("malformed PFM header: {0}")]
    Header(String),
    #[error("PFM payload truncated: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
}

fn read_token(bytes: &[u8], pos: &mut usize) -> Result<String, PfmError> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(PfmError::Header("unexpected end of header".into()));
    }
    Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

pub fn read_pfm<R: Read>(mut r: R) -> Result<DepthMap, PfmError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut pos = 0;
    let magic = read_token(&bytes, &mut pos)?;
    if magic != "Pf" {
        return Err(PfmError::Header(format!(
            "expected single-channel magic `Pf`, found `{magic}`"
        )));
    }
    let width: u32 = read_token(&bytes, &mut pos)?
        .parse()
        .map_err(|e| PfmError::Header(format!("width: {e}")))?;
    let height: u32 = read_token(&bytes, &mut pos)?
        .parse()
        .map_err(|e| PfmError::Header(format!("height: {e}")))?;
    let scale: f32 = read_token(&bytes, &mut pos)?
        .parse()
        .map_err(|e| PfmError::Header(format!("scale: {e}")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(PfmError::Header(format!("invalid scale {scale}")));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let n = width as usize * height as usize;
    let payload = bytes.get(pos..).unwrap_or(&[]);
    if payload.len() < n * 4 {
        return Err(PfmError::Truncated {
            expected: n * 4,
            got: payload.len(),
        });
    }
    let little = scale < 0.0;
    let w = width as usize;
    let mut values = vec![0f32; n];
    for (i, chunk) in payload[..n * 4].chunks_exact(4).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little {
            f32::from_le_bytes(b)
        } else {
            f32::from_be_bytes(b)
        };
        let file_row = i / w;
        let col = i % w;
        let row = height as usize - 1 - file_row;
        values[row * w + col] = v;
    }
    Ok(DepthMap::from_raw(width, height, values))
}

pub fn write_pfm<W: Write>(mut w: W, depth: &DepthMap) -> io::Result<()> {
    write!(w, "Pf\n{} {}\n-1.0\n", depth.width(), depth.height())?;
    let width = depth.width() as usize;
    let mut buf = Vec::with_capacity(depth.values().len() * 4);
    for row in depth.values().chunks_exact(width.max(1)).rev() {
        for v in row {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&buf)
}
