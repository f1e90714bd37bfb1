//! Binary feature files.
//!
//! Layout (little-endian):
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 4    | magic `AFF1`                            |
//! | 4      | 1    | modality code (0 rgb, 1 flow, 2 audio)  |
//! | 5      | 3    | reserved, zero                          |
//! | 8      | 4    | dim (u32)                               |
//! | 12     | 4    | windows (u32)                           |
//! | 16     | ...  | `windows × dim` f32, row-major          |

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, FormatError, Result};

pub const MAGIC: [u8; 4] = *b"AFF1";
pub const HEADER_LEN: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Rgb,
    Flow,
    Audio,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Rgb, Modality::Flow, Modality::Audio];

    /// Feature width produced by the upstream extractors.
    pub const fn dim(self) -> usize {
        match self {
            Modality::Rgb => 2048,
            Modality::Flow => 2048,
            Modality::Audio => 1582,
        }
    }

    pub const fn code(self) -> u8 {
        match self {
            Modality::Rgb => 0,
            Modality::Flow => 1,
            Modality::Audio => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Modality::Rgb),
            1 => Ok(Modality::Flow),
            2 => Ok(Modality::Audio),
            c => Err(FormatError::UnknownModality(c).into()),
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            Modality::Rgb => "rgb",
            Modality::Flow => "flow",
            Modality::Audio => "audio",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rgb" => Ok(Modality::Rgb),
            "flow" => Ok(Modality::Flow),
            "audio" => Ok(Modality::Audio),
            other => Err(Error::invalid(format!(
                "unknown modality {other:?}; valid names are rgb, flow, audio"
            ))),
        }
    }
}

/// All windows of one modality for one clip, stored as in the file.
#[derive(Clone, Debug, PartialEq)]
pub struct ModalityStream {
    modality: Modality,
    windows: usize,
    values: Vec<f32>,
}

impl ModalityStream {
    pub fn new(modality: Modality, windows: usize, values: Vec<f32>) -> Result<Self> {
        let dim = modality.dim();
        if values.len() != windows * dim {
            return Err(Error::shape(
                "ModalityStream values",
                format!("{windows} x {dim}"),
                values.len(),
            ));
        }
        Ok(ModalityStream {
            modality,
            windows,
            values,
        })
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn dim(&self) -> usize {
        self.modality.dim()
    }

    pub fn windows(&self) -> usize {
        self.windows
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row(&self, window: usize) -> &[f32] {
        let d = self.dim();
        &self.values[window * d..(window + 1) * d]
    }

    /// Rows `start..start + len` as a new stream.
    pub fn slice(&self, start: usize, len: usize) -> ModalityStream {
        let d = self.dim();
        ModalityStream {
            modality: self.modality,
            windows: len,
            values: self.values[start * d..(start + len) * d].to_vec(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.values.len() * 4);
        out.extend_from_slice(&MAGIC);
        out.push(self.modality.code());
        out.extend_from_slice(&[0u8; 3]);
        out.extend_from_slice(&(self.dim() as u32).to_le_bytes());
        out.extend_from_slice(&(self.windows as u32).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(FormatError::TruncatedHeader(bytes.len()).into());
        }
        let magic: [u8; 4] = bytes[0..4].try_into().expect("4-byte slice");
        if magic != MAGIC {
            return Err(FormatError::BadMagic {
                expected: MAGIC,
                found: magic,
            }
            .into());
        }
        let modality = Modality::from_code(bytes[4])?;
        let dim = u32::from_le_bytes(bytes[8..12].try_into().expect("4-byte slice")) as usize;
        let windows = u32::from_le_bytes(bytes[12..16].try_into().expect("4-byte slice")) as usize;
        if dim != modality.dim() {
            return Err(FormatError::DimMismatch {
                modality: modality.to_string(),
                expected: modality.dim(),
                declared: dim,
            }
            .into());
        }
        let payload = &bytes[HEADER_LEN..];
        let expected = windows * dim * 4;
        if payload.len() != expected {
            return Err(FormatError::PayloadLength {
                expected,
                actual: payload.len(),
            }
            .into());
        }
        let values = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
            .collect();
        ModalityStream::new(modality, windows, values)
    }
}

pub fn read_feature_file(path: impl AsRef<Path>) -> Result<ModalityStream> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    ModalityStream::decode(&bytes)
}

pub fn write_feature_file(path: impl AsRef<Path>, stream: &ModalityStream) -> Result<()> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&stream.encode()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn header(code: u8, dim: u32, windows: u32) -> Vec<u8> {
        let mut b = MAGIC.to_vec();
        b.push(code);
        b.extend_from_slice(&[0, 0, 0]);
        b.extend_from_slice(&dim.to_le_bytes());
        b.extend_from_slice(&windows.to_le_bytes());
        b
    }

    #[test]
    fn empty_stream_loads() {
        let s = ModalityStream::decode(&header(1, 2048, 0)).unwrap();
        assert_eq!(s.modality(), Modality::Flow);
        assert_eq!(s.windows(), 0);
    }

    #[test]
    fn declared_dim_must_match_modality() {
        let err = ModalityStream::decode(&header(2, 2048, 0)).unwrap_err();
        assert!(matches!(err, Error::Format(FormatError::DimMismatch { declared: 2048, .. })));
    }

    #[test]
    fn distinct_errors_for_each_failure() {
        let mut bad = header(0, 2048, 0);
        bad[0] = b'X';
        assert!(matches!(ModalityStream::decode(&bad), Err(Error::Format(FormatError::BadMagic { .. }))));
        assert!(matches!(
            ModalityStream::decode(&header(9, 2048, 0)),
            Err(Error::Format(FormatError::UnknownModality(9)))
        ));
        let mut short = header(0, 2048, 1);
        short.extend_from_slice(&[0u8; 100]);
        assert!(matches!(
            ModalityStream::decode(&short),
            Err(Error::Format(FormatError::PayloadLength { expected: 8192, actual: 100 }))
        ));
        assert!(matches!(
            ModalityStream::decode(&[0u8; 5]),
            Err(Error::Format(FormatError::TruncatedHeader(5)))
        ));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.aff");
        let values: Vec<f32> = (0..2 * 1582).map(|i| (i as f32).sin()).collect();
        let s = ModalityStream::new(Modality::Audio, 2, values).unwrap();
        write_feature_file(&path, &s).unwrap();
        assert_eq!(read_feature_file(&path).unwrap(), s);
        assert!(matches!(read_feature_file(dir.path().join("missing")), Err(Error::Io { .. })));
    }

    #[test]
    fn modality_names_parse() {
        assert_eq!("Audio".parse::<Modality>().unwrap(), Modality::Audio);
        let err = "depth".parse::<Modality>().unwrap_err().to_string();
        assert!(err.contains("rgb, flow, audio"));
    }

    proptest! {
        #[test]
        fn encode_decode_is_bit_exact(
            code in 0u8..3,
            windows in 0usize..3,
            seed in any::<u32>(),
        ) {
            let m = Modality::from_code(code).unwrap();
            let n = windows * m.dim();
            // arbitrary bit patterns, including NaN payloads and subnormals
            let values: Vec<f32> = (0..n as u32)
                .map(|i| f32::from_bits(i.wrapping_mul(2_654_435_761).wrapping_add(seed)))
                .collect();
            let s = ModalityStream::new(m, windows, values).unwrap();
            let back = ModalityStream::decode(&s.encode()).unwrap();
            prop_assert_eq!(back.modality(), m);
            let a: Vec<u32> = s.values().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = back.values().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }
}
