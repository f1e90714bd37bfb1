use affectfuse::dataio::{ClipDataset, EmotionDimension};
use affectfuse::evaluation::{run_loocv, score_clip, FoldOutcome, LoocvSpec};
use affectfuse::labeling::quantize;
use affectfuse::models::{Architecture, ModalitySet};
use affectfuse::synth::{synthesize, SynthSpec};
use affectfuse::{Modality, ReconstructionConfig, TrainConfig};

fn spec(arch: Architecture) -> LoocvSpec {
    LoocvSpec {
        architecture: arch,
        dimension: EmotionDimension::Valence,
        modalities: ModalitySet::new([Modality::Audio]).unwrap(),
        train: TrainConfig {
            epochs: 3,
            patience: 3,
            ..TrainConfig::default()
        },
        reconstruction: ReconstructionConfig::default(),
        parallel_folds: 1,
    }
}

fn synth(clips: usize) -> Vec<affectfuse::synth::SynthClip> {
    synthesize(&SynthSpec {
        clips,
        frames_per_clip: 600,
        seed: 21,
        separability: 0.9,
        drift_period: 150.0,
    })
    .unwrap()
}

#[test]
fn identical_clips_give_identical_folds() {
    let base = synth(2).remove(0);
    let mut twin = base.clone();
    twin.clip_id = "twin".into();
    let clips: Vec<ClipDataset> = [base, twin].iter().map(|c| c.align().unwrap()).collect();
    for arch in [Architecture::Fc, Architecture::Lstm] {
        let report = run_loocv(&clips, &spec(arch), None).unwrap();
        let folds: Vec<_> = report.completed().collect();
        assert_eq!(folds.len(), 2);
        assert_eq!(folds[0].metrics, folds[1].metrics);
        assert_eq!(folds[0].training, folds[1].training);
    }
}

#[test]
fn folds_follow_clip_id_order_and_aggregate_is_mean() {
    let mut clips: Vec<ClipDataset> = synth(3).iter().map(|c| c.align().unwrap()).collect();
    clips.reverse();
    let report = run_loocv(&clips, &spec(Architecture::Fc), None).unwrap();
    let ids: Vec<&str> = report.folds.iter().map(|f| f.test_clip_id()).collect();
    assert_eq!(ids, ["synth_00", "synth_01", "synth_02"]);
    assert!(!report.partial);
    let agg = report.aggregate.unwrap();
    let mean = report.completed().map(|f| f.metrics.accuracy).sum::<f64>() / 3.0;
    assert!((agg.accuracy - mean).abs() < 1e-15);
    for f in report.completed() {
        assert_eq!(f.evaluated_windows, 600 - 9);
    }
}

#[test]
fn parallel_folds_match_sequential() {
    let clips: Vec<ClipDataset> = synth(3).iter().map(|c| c.align().unwrap()).collect();
    let seq = run_loocv(&clips, &spec(Architecture::Fc), None).unwrap();
    let par = run_loocv(&clips, &LoocvSpec { parallel_folds: 3, ..spec(Architecture::Fc) }, None).unwrap();
    assert_eq!(seq, par);
}

#[test]
fn lstm_folds_skip_warmup_windows() {
    let clips: Vec<ClipDataset> = synth(2).iter().map(|c| c.align().unwrap()).collect();
    let report = run_loocv(&clips, &spec(Architecture::Lstm), None).unwrap();
    assert_eq!(report.completed().count(), 2);
    for f in report.completed() {
        assert_eq!(f.evaluated_windows, clips[0].len() - 40);
        assert_eq!(f.curves.as_ref().unwrap().frames[0], clips[0].frames()[40]);
    }
}

#[test]
fn diverging_folds_are_reported_not_raised() {
    let clips: Vec<ClipDataset> = synth(2).iter().map(|c| c.align().unwrap()).collect();
    let mut s = spec(Architecture::Fc);
    s.train.learning_rate = 1e200;
    let report = run_loocv(&clips, &s, None).unwrap();
    assert!(report.partial);
    for f in &report.folds {
        let FoldOutcome::Failed { error, .. } = f else { panic!() };
        assert!(error.contains("diverged"), "{error}");
    }
    assert!(report.aggregate.is_none());
    assert!(report.folds.iter().all(|f| matches!(f, FoldOutcome::Failed { .. })));
}

#[test]
fn perfect_predictions_score_perfectly() {
    let clip = synth(2)[0].align().unwrap();
    let truth = clip
        .labels(EmotionDimension::Valence)
        .iter()
        .map(|&v| quantize(v))
        .collect::<affectfuse::Result<Vec<_>>>()
        .unwrap();
    let (m, zero_variance, curves) =
        score_clip(&clip, EmotionDimension::Valence, 0, truth, &ReconstructionConfig::default()).unwrap();
    assert_eq!(m.accuracy, 1.0);
    assert_eq!(m.accuracy_pm1, 1.0);
    assert!(!zero_variance);
    assert!(m.pearson > 0.95, "{}", m.pearson);
    assert!(m.mae < 0.15, "{}", m.mae);
    assert_eq!(curves.true_class, curves.predicted_class);
}

#[test]
fn too_few_clips_is_an_error() {
    let clips: Vec<ClipDataset> = vec![synth(2)[0].align().unwrap()];
    assert!(run_loocv(&clips, &spec(Architecture::Fc), None).is_err());
}
