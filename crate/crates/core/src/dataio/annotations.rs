use std::fs;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, FormatError, Result};

pub const FRAMES_PER_SECOND: u32 = 25;

/// Per-frame valence/arousal ratings in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AnnotationTrack {
    valence: Vec<f64>,
    arousal: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    frame: usize,
    valence: f64,
    arousal: f64,
}

impl AnnotationTrack {
    pub fn new(valence: Vec<f64>, arousal: Vec<f64>) -> Result<Self> {
        if valence.len() != arousal.len() {
            return Err(FormatError::Annotation(format!(
                "valence has {} frames, arousal {}",
                valence.len(),
                arousal.len()
            ))
            .into());
        }
        for (frame, (v, a)) in valence.iter().zip(&arousal).enumerate() {
            if !in_range(*v) || !in_range(*a) {
                return Err(FormatError::Annotation(format!(
                    "frame {frame}: values ({v}, {a}) outside [-1, 1]"
                ))
                .into());
            }
        }
        Ok(AnnotationTrack { valence, arousal })
    }

    pub fn frames_per_second(&self) -> u32 {
        FRAMES_PER_SECOND
    }

    pub fn len(&self) -> usize {
        self.valence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valence.is_empty()
    }

    pub fn valence(&self) -> &[f64] {
        &self.valence
    }

    pub fn arousal(&self) -> &[f64] {
        &self.arousal
    }

    pub fn from_csv_reader(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| FormatError::Annotation(e.to_string()))?
            .clone();
        if headers.iter().map(str::trim).collect::<Vec<_>>() != ["frame", "valence", "arousal"] {
            return Err(FormatError::Annotation(format!(
                "expected header frame,valence,arousal, got {}",
                headers.iter().collect::<Vec<_>>().join(",")
            ))
            .into());
        }
        let mut valence = Vec::new();
        let mut arousal = Vec::new();
        for (i, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| FormatError::Annotation(e.to_string()))?;
            if row.frame != i {
                return Err(FormatError::Annotation(format!(
                    "row {i} has frame {}, frames must be consecutive from 0",
                    row.frame
                ))
                .into());
            }
            valence.push(row.valence);
            arousal.push(row.arousal);
        }
        AnnotationTrack::new(valence, arousal)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("frame,valence,arousal\n");
        for (i, (v, a)) in self.valence.iter().zip(&self.arousal).enumerate() {
            // `{}` prints the shortest representation that round-trips
            out.push_str(&format!("{i},{v},{a}\n"));
        }
        out
    }
}

fn in_range(v: f64) -> bool {
    v.is_finite() && (-1.0..=1.0).contains(&v)
}

pub fn read_annotations(path: impl AsRef<Path>) -> Result<AnnotationTrack> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    AnnotationTrack::from_csv_reader(file)
}

pub fn write_annotations(path: impl AsRef<Path>, track: &AnnotationTrack) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, track.to_csv_string()).map_err(|e| Error::io(path, e))
}
