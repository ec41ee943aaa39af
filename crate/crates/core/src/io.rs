//! Deterministic image file I/O.
//!
//! Two formats are supported:
//!
//! * **PGM (P5)** — binary portable graymap, maxval up to 65535, 16-bit
//!   samples big-endian. Loading maps samples to their numeric value
//!   (no normalization); saving clamps to `[0, maxval]` and rounds.
//! * **RAWF64** — lossless dump: magic `SPKF`, little-endian `u32` width
//!   and height, then `width*height` little-endian `f64` values row-major.
//!   Saving and loading round-trip bit-exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::ImageGrid;

const RAWF64_MAGIC: &[u8; 4] = b"SPKF";

/// On-disk pixel formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    /// Binary portable graymap (`P5`).
    PgmP5,
    /// Raw little-endian f64 dump with `SPKF` magic.
    RawF64,
}

impl ImageFormat {
    /// Guesses the format from a file extension (`.pgm` or `.spkf`).
    pub fn from_path(path: &Path) -> Option<ImageFormat> {
        match path.extension()?.to_str()? {
            "pgm" | "PGM" => Some(ImageFormat::PgmP5),
            "spkf" | "SPKF" => Some(ImageFormat::RawF64),
            _ => None,
        }
    }
}

/// Loads an image file in the given format.
pub fn load_image(path: &Path, format: ImageFormat) -> Result<ImageGrid> {
    let mut reader = BufReader::new(File::open(path)?);
    match format {
        ImageFormat::PgmP5 => read_pgm(&mut reader),
        ImageFormat::RawF64 => read_rawf64(&mut reader),
    }
}

/// Saves an image in the given format. PGM output uses maxval 255; use
/// [`write_pgm`] directly for 16-bit output.
pub fn save_image(image: &ImageGrid, path: &Path, format: ImageFormat) -> Result<()> {
    let mut writer = BufWriter::new(File::create(path)?);
    match format {
        ImageFormat::PgmP5 => write_pgm(image, &mut writer, 255)?,
        ImageFormat::RawF64 => write_rawf64(image, &mut writer)?,
    }
    Ok(())
}

/// Parses a binary PGM (P5) stream.
pub fn read_pgm<R: Read>(reader: &mut R) -> Result<ImageGrid> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let mut pos = 0usize;

    if bytes.len() < 2 || &bytes[0..2] != b"P5" {
        return Err(Error::MalformedHeader("missing P5 magic".into()));
    }
    pos += 2;

    let width = read_header_int(&bytes, &mut pos)?;
    let height = read_header_int(&bytes, &mut pos)?;
    let maxval = read_header_int(&bytes, &mut pos)?;
    if maxval == 0 {
        return Err(Error::MalformedHeader("maxval 0".into()));
    }
    if maxval > 65535 {
        return Err(Error::UnsupportedMaxval(maxval));
    }
    // exactly one whitespace byte separates the header from the payload
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => {
            return Err(Error::MalformedHeader(
                "missing whitespace before payload".into(),
            ))
        }
    }

    if width == 0 || height == 0 {
        return Err(Error::MalformedHeader("zero dimension".into()));
    }
    let (width, height) = (width as usize, height as usize);
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::MalformedHeader("dimension overflow".into()))?;
    let bytes_per_sample = if maxval > 255 { 2 } else { 1 };
    let expected = n * bytes_per_sample;
    let payload = &bytes[pos..];
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }

    let mut data = Vec::with_capacity(n);
    if bytes_per_sample == 1 {
        data.extend(payload[..n].iter().map(|&b| b as f64));
    } else {
        for chunk in payload[..expected].chunks_exact(2) {
            data.push(u16::from_be_bytes([chunk[0], chunk[1]]) as f64);
        }
    }
    ImageGrid::from_vec(width, height, data)
}

fn read_header_int(bytes: &[u8], pos: &mut usize) -> Result<u64> {
    // skip whitespace and '#' comments
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' {
                        break;
                    }
                }
            }
            _ => break,
        }
    }
    let start = *pos;
    while matches!(bytes.get(*pos), Some(b) if b.is_ascii_digit()) {
        *pos += 1;
    }
    if *pos == start {
        return Err(Error::MalformedHeader("expected integer field".into()));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::MalformedHeader("unparseable integer field".into()))
}

/// Writes binary PGM (P5) with the given maxval, clamping and rounding
/// pixel values to `[0, maxval]`.
pub fn write_pgm<W: Write>(image: &ImageGrid, writer: &mut W, maxval: u16) -> Result<()> {
    if maxval == 0 {
        return Err(Error::InvalidParameter {
            name: "maxval",
            value: 0.0,
            constraint: "at least 1",
        });
    }
    write!(writer, "P5\n{} {}\n{}\n", image.width(), image.height(), maxval)?;
    let top = maxval as f64;
    if maxval > 255 {
        for &v in image.as_slice() {
            let q = v.clamp(0.0, top).round() as u16;
            writer.write_all(&q.to_be_bytes())?;
        }
    } else {
        for &v in image.as_slice() {
            writer.write_all(&[v.clamp(0.0, top).round() as u8])?;
        }
    }
    Ok(())
}

/// Parses the RAWF64 format.
pub fn read_rawf64<R: Read>(reader: &mut R) -> Result<ImageGrid> {
    let mut magic = [0u8; 4];
    reader.read_exact(&mut magic).map_err(|_| {
        Error::MalformedHeader("missing SPKF magic".into())
    })?;
    if &magic != RAWF64_MAGIC {
        return Err(Error::MalformedHeader("missing SPKF magic".into()));
    }
    let mut dims = [0u8; 8];
    reader
        .read_exact(&mut dims)
        .map_err(|_| Error::MalformedHeader("truncated dimensions".into()))?;
    let width = u32::from_le_bytes(dims[0..4].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(dims[4..8].try_into().unwrap()) as usize;
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::MalformedHeader("dimension overflow".into()))?;

    let mut payload = Vec::new();
    reader.read_to_end(&mut payload)?;
    if payload.len() < n * 8 {
        return Err(Error::TruncatedPayload {
            expected: n * 8,
            found: payload.len(),
        });
    }
    let data = payload[..n * 8]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ImageGrid::from_vec(width, height, data)
}

/// Writes the RAWF64 format.
pub fn write_rawf64<W: Write>(image: &ImageGrid, writer: &mut W) -> Result<()> {
    writer.write_all(RAWF64_MAGIC)?;
    writer.write_all(&(image.width() as u32).to_le_bytes())?;
    writer.write_all(&(image.height() as u32).to_le_bytes())?;
    for &v in image.as_slice() {
        writer.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}
