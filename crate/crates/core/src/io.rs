//! Image file formats.
//!
//! PGM: plain (`P2`) and binary (`P5`) graymaps with maxval up to 65535.
//! Reading divides by maxval; writing stores `round(clamp(v, 0, 1) * maxval)`.
//! Binary samples above 255 are two bytes, most significant first.
//!
//! Raw float64 dump, for lossless round trips:
//!
//! ```text
//! offset  size  content
//! 0       8     magic b"PSYNF64\0"
//! 8       8     height, u64 little-endian
//! 16      8     width, u64 little-endian
//! 24      8*N   pixels, f64 little-endian, row-major
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::ImageBuffer;

pub const F64_MAGIC: &[u8; 8] = b"PSYNF64\0";

/// PGM encoding variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmKind {
    Plain,
    Binary,
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws_and_comments(&mut self) {
        while self.pos < self.buf.len() {
            let b = self.buf[self.pos];
            if b == b'#' {
                while self.pos < self.buf.len() && self.buf[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Option<&'a [u8]> {
        self.skip_ws_and_comments();
        let start = self.pos;
        while self.pos < self.buf.len() && !self.buf[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.buf[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let tok = self
            .token()
            .ok_or_else(|| Error::format("PGM", format!("missing {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format("PGM", format!("invalid {what}")))
    }
}

/// Decodes a PGM byte buffer.
pub fn decode_pgm(bytes: &[u8]) -> Result<ImageBuffer> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    let kind = match cur.token() {
        Some(b"P2") => PgmKind::Plain,
        Some(b"P5") => PgmKind::Binary,
        _ => return Err(Error::format("PGM", "expected magic P2 or P5")),
    };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::format("PGM", "zero image dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::format(
            "PGM",
            format!("maxval {maxval} out of range"),
        ));
    }
    let n = width * height;
    let maxf = maxval as f64;
    let mut data = Vec::with_capacity(n);
    match kind {
        PgmKind::Plain => {
            for _ in 0..n {
                let v = cur.number("sample")?;
                if v > maxval {
                    return Err(Error::format("PGM", format!("sample {v} exceeds maxval")));
                }
                data.push(v as f64 / maxf);
            }
        }
        PgmKind::Binary => {
            // exactly one whitespace byte after maxval
            let start = cur.pos + 1;
            let bps = if maxval > 255 { 2 } else { 1 };
            let raw = bytes
                .get(start..start + n * bps)
                .ok_or_else(|| Error::format("PGM", "truncated raster"))?;
            for s in raw.chunks_exact(bps) {
                let v = if bps == 2 {
                    u16::from_be_bytes([s[0], s[1]]) as usize
                } else {
                    s[0] as usize
                };
                if v > maxval {
                    return Err(Error::format("PGM", format!("sample {v} exceeds maxval")));
                }
                data.push(v as f64 / maxf);
            }
        }
    }
    ImageBuffer::new(height, width, data)
}

fn quantize(v: f64, maxval: u16) -> u16 {
    (v.clamp(0.0, 1.0) * maxval as f64).round() as u16
}

/// Encodes an image as PGM.
pub fn encode_pgm(img: &ImageBuffer, kind: PgmKind, maxval: u16) -> Result<Vec<u8>> {
    if maxval == 0 {
        return Err(Error::InvalidInput("PGM maxval must be positive".into()));
    }
    let magic = match kind {
        PgmKind::Plain => "P2",
        PgmKind::Binary => "P5",
    };
    let mut out = format!("{magic}\n{} {}\n{maxval}\n", img.width(), img.height()).into_bytes();
    match kind {
        PgmKind::Plain => {
            for row in img.data().chunks(img.width()) {
                let line: Vec<String> = row
                    .iter()
                    .map(|&v| quantize(v, maxval).to_string())
                    .collect();
                out.extend_from_slice(line.join(" ").as_bytes());
                out.push(b'\n');
            }
        }
        PgmKind::Binary => {
            for &v in img.data() {
                let q = quantize(v, maxval);
                if maxval > 255 {
                    out.extend_from_slice(&q.to_be_bytes());
                } else {
                    out.push(q as u8);
                }
            }
        }
    }
    Ok(out)
}

pub fn encode_f64(img: &ImageBuffer) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + 8 * img.len());
    out.extend_from_slice(F64_MAGIC);
    out.extend_from_slice(&(img.height() as u64).to_le_bytes());
    out.extend_from_slice(&(img.width() as u64).to_le_bytes());
    for v in img.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_f64(bytes: &[u8]) -> Result<ImageBuffer> {
    if bytes.len() < 24 || &bytes[..8] != F64_MAGIC {
        return Err(Error::format("f64 dump", "bad magic or truncated header"));
    }
    let word = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap()) as usize;
    let (height, width) = (word(8), word(16));
    let n = height
        .checked_mul(width)
        .ok_or_else(|| Error::format("f64 dump", "dimension overflow"))?;
    if bytes.len() != 24 + 8 * n {
        return Err(Error::format(
            "f64 dump",
            format!(
                "expected {} payload bytes, found {}",
                8 * n,
                bytes.len() - 24
            ),
        ));
    }
    let data = bytes[24..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ImageBuffer::new(height, width, data)
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Writes `bytes` to a temporary sibling file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_pgm(path: &Path) -> Result<ImageBuffer> {
    decode_pgm(&read_file(path)?).map_err(|e| match e {
        Error::Format { message, .. } => Error::format(path.display().to_string(), message),
        other => other,
    })
}

pub fn write_pgm(path: &Path, img: &ImageBuffer, kind: PgmKind, maxval: u16) -> Result<()> {
    write_atomic(path, &encode_pgm(img, kind, maxval)?)
}

pub fn read_f64(path: &Path) -> Result<ImageBuffer> {
    decode_f64(&read_file(path)?)
}

pub fn write_f64(path: &Path, img: &ImageBuffer) -> Result<()> {
    write_atomic(path, &encode_f64(img))
}

/// Reads either format, dispatching on the leading magic bytes.
pub fn read_image(path: &Path) -> Result<ImageBuffer> {
    let bytes = read_file(path)?;
    if bytes.starts_with(F64_MAGIC) {
        decode_f64(&bytes)
    } else {
        decode_pgm(&bytes)
    }
}
