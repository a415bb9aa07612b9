//! Reader and writer for a strict subset of the NRRD format.
//!
//! Accepted: magic `NRRD0001`..`NRRD0005`, `dimension: 3`, `sizes`, `type`
//! (uchar, short, ushort, float and their aliases), `encoding: raw`,
//! `endian: little`, either `spacings` or diagonal `space directions`,
//! `space origin`, plus the purely descriptive `space`, `space dimension`,
//! `kinds` and `content` fields. Comments (`#`) and `key:=value` pairs are
//! skipped. Anything else is rejected with the offending line attached.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::volume::{Grid, LabelVolume, ScalarData, ScalarKind, ScalarVolume, VolumeError};

#[derive(Debug, Error)]
pub enum NrrdError {
    #[error("unsupported NRRD field: {line}")]
    UnsupportedField { line: String },
    #[error("malformed NRRD header: {reason}: {line}")]
    MalformedHeader { line: String, reason: String },
    #[error("truncated NRRD payload: expected {expected} bytes, found {actual}")]
    TruncatedPayload { expected: usize, actual: usize },
    #[error("NRRD payload has {extra} bytes beyond the {expected} declared by the header")]
    TrailingPayload { expected: usize, extra: usize },
    #[error("label volumes must have type uchar, found {0:?}")]
    NotLabelType(ScalarKind),
    #[error(transparent)]
    InvalidVolume(#[from] VolumeError),
    #[error("i/o failure: {0}")]
    Io(#[from] io::Error),
}

impl NrrdError {
    /// True when the failure is an operating-system I/O problem rather than bad content.
    pub fn is_io(&self) -> bool {
        matches!(self, NrrdError::Io(_))
    }
}

fn malformed(line: &str, reason: impl Into<String>) -> NrrdError {
    NrrdError::MalformedHeader {
        line: line.to_string(),
        reason: reason.into(),
    }
}

fn unsupported(line: &str) -> NrrdError {
    NrrdError::UnsupportedField {
        line: line.to_string(),
    }
}

/// A decoded NRRD file before the caller picks an interpretation.
#[derive(Debug, Clone, PartialEq)]
pub struct NrrdVolume {
    pub grid: Grid,
    pub data: ScalarData,
}

impl NrrdVolume {
    pub fn into_scalar(self) -> Result<ScalarVolume, NrrdError> {
        Ok(ScalarVolume::new(self.grid, self.data)?)
    }

    /// Only `uchar` files can be read as label maps.
    pub fn into_labels(self) -> Result<LabelVolume, NrrdError> {
        match self.data {
            ScalarData::U8(v) => Ok(LabelVolume::new(self.grid, v)?),
            other => Err(NrrdError::NotLabelType(other.kind())),
        }
    }
}

/// Anything that can be serialized as an NRRD volume.
pub enum NrrdSource<'a> {
    Scalar(&'a ScalarVolume),
    Labels(&'a LabelVolume),
}

impl<'a> From<&'a ScalarVolume> for NrrdSource<'a> {
    fn from(v: &'a ScalarVolume) -> Self {
        NrrdSource::Scalar(v)
    }
}

impl<'a> From<&'a LabelVolume> for NrrdSource<'a> {
    fn from(v: &'a LabelVolume) -> Self {
        NrrdSource::Labels(v)
    }
}

pub fn read_nrrd(path: impl AsRef<Path>) -> Result<NrrdVolume, NrrdError> {
    let bytes = fs::read(path)?;
    parse_nrrd(&bytes)
}

pub fn read_scalar(path: impl AsRef<Path>) -> Result<ScalarVolume, NrrdError> {
    read_nrrd(path)?.into_scalar()
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<LabelVolume, NrrdError> {
    read_nrrd(path)?.into_labels()
}

pub fn write_nrrd<'a>(
    vol: impl Into<NrrdSource<'a>>,
    path: impl AsRef<Path>,
) -> Result<(), NrrdError> {
    fs::write(path, encode_nrrd(vol))?;
    Ok(())
}

fn parse_type(value: &str) -> Option<ScalarKind> {
    match value {
        "uchar" | "unsigned char" | "uint8" | "uint8_t" => Some(ScalarKind::U8),
        "short" | "short int" | "signed short" | "signed short int" | "int16" | "int16_t" => {
            Some(ScalarKind::I16)
        }
        "ushort" | "unsigned short" | "unsigned short int" | "uint16" | "uint16_t" => {
            Some(ScalarKind::U16)
        }
        "float" => Some(ScalarKind::F32),
        _ => None,
    }
}

fn type_name(kind: ScalarKind) -> &'static str {
    match kind {
        ScalarKind::U8 => "uchar",
        ScalarKind::I16 => "short",
        ScalarKind::U16 => "ushort",
        ScalarKind::F32 => "float",
    }
}

fn parse_f64(token: &str, line: &str) -> Result<f64, NrrdError> {
    token
        .trim()
        .parse::<f64>()
        .map_err(|_| malformed(line, format!("not a number: {token:?}")))
}

/// Parses `(a,b,c)`.
fn parse_vector(token: &str, line: &str) -> Result<[f64; 3], NrrdError> {
    let inner = token
        .trim()
        .strip_prefix('(')
        .and_then(|t| t.strip_suffix(')'))
        .ok_or_else(|| malformed(line, format!("expected (x,y,z), got {token:?}")))?;
    let parts: Vec<&str> = inner.split(',').collect();
    if parts.len() != 3 {
        return Err(malformed(line, "vector must have 3 components"));
    }
    Ok([
        parse_f64(parts[0], line)?,
        parse_f64(parts[1], line)?,
        parse_f64(parts[2], line)?,
    ])
}

/// Splits `(a,b,c) (d,e,f) ...` into its parenthesized groups.
fn split_vectors(value: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in value.char_indices() {
        match c {
            '(' => start = Some(i),
            ')' => {
                if let Some(s) = start.take() {
                    out.push(&value[s..=i]);
                }
            }
            _ => {}
        }
    }
    out
}

#[derive(Default)]
struct Header {
    dimension: Option<usize>,
    sizes: Option<[usize; 3]>,
    kind: Option<ScalarKind>,
    encoding_seen: bool,
    spacing: Option<[f64; 3]>,
    origin: Option<[f64; 3]>,
}

/// Decodes an in-memory NRRD file.
pub fn parse_nrrd(bytes: &[u8]) -> Result<NrrdVolume, NrrdError> {
    let mut pos = 0usize;
    let next_line = |pos: &mut usize| -> Option<String> {
        if *pos >= bytes.len() {
            return None;
        }
        let rest = &bytes[*pos..];
        let end = rest.iter().position(|&b| b == b'\n').unwrap_or(rest.len());
        let raw = &rest[..end];
        *pos += (end + 1).min(rest.len());
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        Some(String::from_utf8_lossy(raw).into_owned())
    };

    let magic = next_line(&mut pos).ok_or_else(|| malformed("", "empty file"))?;
    match magic.strip_prefix("NRRD000") {
        Some("1" | "2" | "3" | "4" | "5") => {}
        _ => return Err(malformed(&magic, "missing NRRD magic")),
    }

    let mut h = Header::default();
    let mut saw_blank = false;
    while let Some(line) = next_line(&mut pos) {
        if line.is_empty() {
            saw_blank = true;
            break;
        }
        if line.starts_with('#') {
            continue;
        }
        if let Some((key, _)) = line.split_once(":=") {
            if !key.contains(':') {
                continue;
            }
        }
        let (key, value) = line
            .split_once(": ")
            .ok_or_else(|| malformed(&line, "expected \"field: value\""))?;
        let value = value.trim();
        match key {
            "dimension" => {
                let d: usize = value
                    .parse()
                    .map_err(|_| malformed(&line, "dimension is not an integer"))?;
                if d != 3 {
                    return Err(unsupported(&line));
                }
                h.dimension = Some(d);
            }
            "sizes" => {
                let parts: Vec<&str> = value.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(malformed(&line, "sizes must list 3 values"));
                }
                let mut sizes = [0usize; 3];
                for (s, p) in sizes.iter_mut().zip(parts) {
                    *s = p
                        .parse()
                        .map_err(|_| malformed(&line, format!("bad size {p:?}")))?;
                    if *s == 0 {
                        return Err(malformed(&line, "sizes must be positive"));
                    }
                }
                h.sizes = Some(sizes);
            }
            "type" => {
                h.kind = Some(parse_type(value).ok_or_else(|| unsupported(&line))?);
            }
            "encoding" => {
                if value != "raw" {
                    return Err(unsupported(&line));
                }
                h.encoding_seen = true;
            }
            "endian" => {
                if value != "little" {
                    return Err(unsupported(&line));
                }
            }
            "spacings" => {
                if h.spacing.is_some() {
                    return Err(malformed(&line, "spacing given twice"));
                }
                let parts: Vec<&str> = value.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(malformed(&line, "spacings must list 3 values"));
                }
                let mut sp = [0.0; 3];
                for (s, p) in sp.iter_mut().zip(parts) {
                    *s = parse_f64(p, &line)?;
                }
                if sp.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
                    return Err(unsupported(&line));
                }
                h.spacing = Some(sp);
            }
            "space directions" => {
                if h.spacing.is_some() {
                    return Err(malformed(&line, "spacing given twice"));
                }
                let vecs = split_vectors(value);
                if vecs.len() != 3 {
                    return Err(malformed(&line, "space directions must list 3 vectors"));
                }
                let mut sp = [0.0; 3];
                for (axis, v) in vecs.iter().enumerate() {
                    let d = parse_vector(v, &line)?;
                    for (c, &comp) in d.iter().enumerate() {
                        if c != axis && comp != 0.0 {
                            return Err(unsupported(&line));
                        }
                    }
                    if !(d[axis].is_finite() && d[axis] > 0.0) {
                        return Err(unsupported(&line));
                    }
                    sp[axis] = d[axis];
                }
                h.spacing = Some(sp);
            }
            "space origin" => {
                h.origin = Some(parse_vector(value, &line)?);
            }
            "space dimension" => {
                if value != "3" {
                    return Err(unsupported(&line));
                }
            }
            "space" | "content" => {}
            "kinds" => {
                let parts: Vec<&str> = value.split_whitespace().collect();
                if parts.len() != 3 || parts.iter().any(|k| !matches!(*k, "domain" | "space")) {
                    return Err(unsupported(&line));
                }
            }
            _ => return Err(unsupported(&line)),
        }
    }

    if !saw_blank {
        return Err(malformed("", "header not terminated by a blank line"));
    }
    if h.dimension.is_none() {
        return Err(malformed("", "missing field: dimension"));
    }
    let dims = h
        .sizes
        .ok_or_else(|| malformed("", "missing field: sizes"))?;
    let kind = h.kind.ok_or_else(|| malformed("", "missing field: type"))?;
    if !h.encoding_seen {
        return Err(malformed("", "missing field: encoding"));
    }
    let spacing = h
        .spacing
        .ok_or_else(|| malformed("", "missing field: spacings or space directions"))?;
    let origin = h.origin.unwrap_or([0.0; 3]);
    let grid = Grid::new(dims, spacing, origin)?;

    let count = grid.len();
    let expected = count * kind.byte_width();
    let payload = &bytes[pos.min(bytes.len())..];
    if payload.len() < expected {
        return Err(NrrdError::TruncatedPayload {
            expected,
            actual: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(NrrdError::TrailingPayload {
            expected,
            extra: payload.len() - expected,
        });
    }

    let data = match kind {
        ScalarKind::U8 => ScalarData::U8(payload.to_vec()),
        ScalarKind::I16 => ScalarData::I16(
            payload
                .chunks_exact(2)
                .map(|c| i16::from_le_bytes([c[0], c[1]]))
                .collect(),
        ),
        ScalarKind::U16 => ScalarData::U16(
            payload
                .chunks_exact(2)
                .map(|c| u16::from_le_bytes([c[0], c[1]]))
                .collect(),
        ),
        ScalarKind::F32 => ScalarData::F32(
            payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        ),
    };
    Ok(NrrdVolume { grid, data })
}

/// Serializes a volume into NRRD bytes. `spacings` carries the voxel size;
/// `space origin` is emitted only for a nonzero origin.
pub fn encode_nrrd<'a>(vol: impl Into<NrrdSource<'a>>) -> Vec<u8> {
    let (grid, kind) = match vol.into() {
        NrrdSource::Scalar(v) => (*v.grid(), Payload::Scalar(v.data())),
        NrrdSource::Labels(v) => (*v.grid(), Payload::Labels(v.labels())),
    };
    let scalar_kind = match kind {
        Payload::Scalar(d) => d.kind(),
        Payload::Labels(_) => ScalarKind::U8,
    };
    let [nx, ny, nz] = grid.dims;
    let [sx, sy, sz] = grid.spacing;
    let mut header = format!(
        "NRRD0004\ntype: {}\ndimension: 3\nsizes: {nx} {ny} {nz}\nspacings: {sx} {sy} {sz}\n",
        type_name(scalar_kind)
    );
    if grid.origin != [0.0; 3] {
        let [ox, oy, oz] = grid.origin;
        header.push_str(&format!("space origin: ({ox},{oy},{oz})\n"));
    }
    header.push_str("endian: little\nencoding: raw\n\n");

    let mut out = header.into_bytes();
    out.reserve(grid.len() * scalar_kind.byte_width());
    match kind {
        Payload::Labels(l) => out.extend_from_slice(l),
        Payload::Scalar(ScalarData::U8(v)) => out.extend_from_slice(v),
        Payload::Scalar(ScalarData::I16(v)) => v.iter().for_each(|x| out.extend(x.to_le_bytes())),
        Payload::Scalar(ScalarData::U16(v)) => v.iter().for_each(|x| out.extend(x.to_le_bytes())),
        Payload::Scalar(ScalarData::F32(v)) => v.iter().for_each(|x| out.extend(x.to_le_bytes())),
    }
    out
}

enum Payload<'a> {
    Scalar(&'a ScalarData),
    Labels(&'a [u8]),
}
