//! Feature-file, annotation and manifest formats; modality alignment; and
//! min-max normalization.

mod annotations;
mod clip;
mod features;
mod manifest;
mod normalize;

pub use annotations::{read_annotations, write_annotations, AnnotationTrack, FRAMES_PER_SECOND};
pub use clip::{align_clip, ClipDataset, EmotionDimension, FeatureWindow, LENGTH_TOLERANCE, WARMUP_FRAMES};
pub use features::{read_feature_file, write_feature_file, Modality, ModalityStream, HEADER_LEN, MAGIC};
pub use manifest::{load_dataset, read_manifest, write_manifest, ClipManifest};
pub use normalize::{apply_minmax, fit_minmax, MinMax, NormalizationStats};
