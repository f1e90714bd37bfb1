//! Inputs shared by the benchmarks.

use affectfuse::models::{FusionInput, ModalitySet};
use affectfuse::FeatureWindow;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_window(rng: &mut ChaCha8Rng) -> FeatureWindow {
    let mut v = |d: usize| (0..d).map(|_| rng.gen::<f64>()).collect::<Vec<_>>().into();
    FeatureWindow {
        index: 0,
        rgb: v(2048),
        flow: v(2048),
        audio: v(1582),
        label_valence: 0.0,
        label_arousal: 0.0,
    }
}

pub fn random_batch(rng: &mut ChaCha8Rng, n: usize, modalities: &ModalitySet) -> FusionInput {
    let windows: Vec<FeatureWindow> = (0..n).map(|_| random_window(rng)).collect();
    FusionInput::from_windows(&windows.iter().collect::<Vec<_>>(), modalities)
}
