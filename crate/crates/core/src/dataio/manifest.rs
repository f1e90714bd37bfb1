use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::annotations::read_annotations;
use super::clip::{align_clip, ClipDataset};
use super::features::read_feature_file;
use crate::error::{Error, FormatError, Result};

/// Binds the three feature files and the annotation file of one clip.
/// Relative paths are resolved against the manifest's directory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipManifest {
    pub clip_id: String,
    pub rgb: PathBuf,
    pub flow: PathBuf,
    pub audio: PathBuf,
    pub annotations: PathBuf,
    #[serde(default)]
    pub pre_aligned: bool,
}

impl ClipManifest {
    fn resolved(&self, base: &Path) -> ClipManifest {
        let r = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        ClipManifest {
            clip_id: self.clip_id.clone(),
            rgb: r(&self.rgb),
            flow: r(&self.flow),
            audio: r(&self.audio),
            annotations: r(&self.annotations),
            pre_aligned: self.pre_aligned,
        }
    }

    pub fn load(&self) -> Result<ClipDataset> {
        let rgb = read_feature_file(&self.rgb)?;
        let flow = read_feature_file(&self.flow)?;
        let audio = read_feature_file(&self.audio)?;
        let ann = read_annotations(&self.annotations)?;
        align_clip(self.clip_id.clone(), &rgb, &flow, &audio, &ann, self.pre_aligned)
    }
}

/// Reads a dataset manifest (JSON array of clip manifests) and resolves
/// its paths. Clip ids must be unique.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ClipManifest>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let clips: Vec<ClipManifest> =
        serde_json::from_str(&text).map_err(|e| FormatError::Manifest(e.to_string()))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut seen = std::collections::BTreeSet::new();
    for c in &clips {
        if !seen.insert(c.clip_id.as_str()) {
            return Err(FormatError::Manifest(format!("duplicate clip_id {:?}", c.clip_id)).into());
        }
    }
    Ok(clips.iter().map(|c| c.resolved(base)).collect())
}

pub fn write_manifest(path: impl AsRef<Path>, clips: &[ClipManifest]) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(clips).map_err(|e| FormatError::Manifest(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Loads and aligns every clip of a dataset manifest.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<ClipDataset>> {
    read_manifest(path)?.iter().map(ClipManifest::load).collect()
}
