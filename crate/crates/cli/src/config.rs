use std::fs;
use std::path::{Path, PathBuf};

use affectfuse::models::{Architecture, ModalitySet};
use affectfuse::{EmotionDimension, ReconstructionConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// A run description. Every field has a default, so `{}` plus a manifest and
/// an output directory reproduces the reference hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: Architecture,
    pub dimension: EmotionDimension,
    pub modalities: ModalitySet,
    pub manifest: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub train: TrainConfig,
    pub reconstruction: ReconstructionConfig,
    pub parallel_folds: usize,
    /// `train` only; all clips when absent.
    pub train_clips: Option<Vec<String>>,
    /// `eval` only; all clips when absent.
    pub test_clips: Option<Vec<String>>,
    /// Checkpoint written by `train` and read by `eval`; defaults to a name
    /// under the output directory.
    pub checkpoint: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: Architecture::Fc,
            dimension: EmotionDimension::Arousal,
            modalities: ModalitySet::all(),
            manifest: None,
            output_dir: None,
            train: TrainConfig::default(),
            reconstruction: ReconstructionConfig::default(),
            parallel_folds: 1,
            train_clips: None,
            test_clips: None,
            checkpoint: None,
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub manifest: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub parallel_folds: Option<usize>,
    pub model: Option<Architecture>,
    pub dimension: Option<EmotionDimension>,
    pub modalities: Option<ModalitySet>,
}

impl RunConfig {
    /// Reads `path` (relative paths inside resolve against its directory), or
    /// starts from defaults, then applies `overrides`.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", p.display())))?;
                let mut cfg: RunConfig = serde_json::from_str(&text)
                    .map_err(|e| CliError::Validation(format!("invalid config {}: {e}", p.display())))?;
                let base = p.parent().unwrap_or_else(|| Path::new("."));
                for slot in [&mut cfg.manifest, &mut cfg.output_dir, &mut cfg.checkpoint] {
                    if let Some(v) = slot.as_mut() {
                        if v.is_relative() {
                            *v = base.join(&*v);
                        }
                    }
                }
                cfg
            }
            None => RunConfig::default(),
        };
        if let Some(v) = &overrides.manifest {
            cfg.manifest = Some(v.clone());
        }
        if let Some(v) = &overrides.output_dir {
            cfg.output_dir = Some(v.clone());
        }
        if let Some(v) = overrides.seed {
            cfg.train.seed = v;
        }
        if let Some(v) = overrides.parallel_folds {
            cfg.parallel_folds = v;
        }
        if let Some(v) = overrides.model {
            cfg.model = v;
        }
        if let Some(v) = overrides.dimension {
            cfg.dimension = v;
        }
        if let Some(v) = &overrides.modalities {
            cfg.modalities = v.clone();
        }
        Ok(cfg)
    }

    /// Every problem found, one per line.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut problems = Vec::new();
        match &self.manifest {
            None => problems.push("manifest: no dataset manifest given".to_string()),
            Some(p) if !p.is_file() => problems.push(format!("manifest: {} does not exist", p.display())),
            Some(_) => {}
        }
        if self.output_dir.is_none() {
            problems.push("output_dir: no output directory given".to_string());
        }
        if self.parallel_folds == 0 {
            problems.push("parallel_folds: must be at least 1".to_string());
        }
        if let Err(e) = self.train.validate() {
            problems.push(format!("train: {e}"));
        }
        if let Err(e) = self.reconstruction.validate() {
            problems.push(format!("reconstruction: {e}"));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(problems.join("\n")))
        }
    }

    pub fn manifest_path(&self) -> &Path {
        self.manifest.as_deref().expect("validated")
    }

    pub fn out_dir(&self) -> &Path {
        self.output_dir.as_deref().expect("validated")
    }

    /// Short name for output files, e.g. `fc_arousal_rgb+flow+audio`.
    pub fn tag(&self) -> String {
        let mods: Vec<&str> = self.modalities.iter().map(|m| m.name()).collect();
        format!("{}_{}_{}", self.model, self.dimension, mods.join("+"))
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint
            .clone()
            .unwrap_or_else(|| self.out_dir().join(format!("model_{}.afm", self.tag())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use affectfuse::Modality;

    #[test]
    fn empty_config_uses_reference_hyperparameters() {
        let cfg: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.train, TrainConfig::default());
        assert_eq!(cfg.modalities, ModalitySet::all());
        assert_eq!(cfg.tag(), "fc_arousal_rgb+flow+audio");
    }

    #[test]
    fn unknown_modality_lists_valid_names() {
        let err = serde_json::from_str::<RunConfig>(r#"{"modalities": ["rgb", "depth"]}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("rgb") && msg.contains("audio"), "{msg}");
        assert!(serde_json::from_str::<RunConfig>(r#"{"modalities": []}"#).is_err());
    }

    #[test]
    fn overrides_win_and_paths_resolve() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        fs::write(&path, r#"{"manifest": "data/manifest.json", "model": "lstm", "train": {"seed": 4}}"#).unwrap();
        let o = Overrides {
            seed: Some(9),
            modalities: Some(ModalitySet::new([Modality::Audio]).unwrap()),
            ..Default::default()
        };
        let cfg = RunConfig::load(Some(&path), &o).unwrap();
        assert_eq!(cfg.manifest.unwrap(), dir.path().join("data/manifest.json"));
        assert_eq!(cfg.model, Architecture::Lstm);
        assert_eq!(cfg.train.seed, 9);
        assert_eq!(cfg.modalities.len(), 1);
    }

    #[test]
    fn validation_enumerates_problems() {
        let cfg = RunConfig {
            parallel_folds: 0,
            ..Default::default()
        };
        let CliError::Validation(msg) = cfg.validate().unwrap_err() else { panic!() };
        assert_eq!(msg.lines().count(), 3, "{msg}");
    }
}
