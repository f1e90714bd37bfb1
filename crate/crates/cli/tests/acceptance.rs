//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::fs;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use affectfuse::dataio::{fit_minmax, load_dataset, EmotionDimension, FeatureWindow, Modality};
use affectfuse::evaluation::{
    accuracy, accuracy_pm1, mae_mse, pearson, render_table, run_loocv, EvalReport, FoldEvent, FoldOutcome, LoocvSpec,
    Metrics,
};
use affectfuse::labeling::{bin_center, quantize, savitzky_golay, ReconstructionConfig};
use affectfuse::models::{
    fc_forward, fc_loss_and_gradients, lstm_cell_step, lstm_loss_and_gradients, Architecture, FcFusionParams,
    FusionInput, LstmCellParams, LstmFusionParams, LstmState, ModalitySet, SequenceLayout,
};
use affectfuse::nn::gradcheck::{check_gradients, GradCheckReport, DEFAULT_STEP};
use affectfuse::nn::{
    dense_backward_batch, dense_forward_batch, relu_backward_in_place, relu_in_place, softmax_cross_entropy_batch,
    DenseLayerParams, Matrix, ParamRole, ParamView, ParamViewMut, Parameters, Vector,
};
use affectfuse::synth::{generate, oracle_forward_fc, oracle_lstm_step, SynthSpec};
use affectfuse::{EmotionLabel, TrainConfig};
use affectfuse_cli::{cmd_loocv, Overrides};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRAD_TOLERANCE: f64 = 1e-4;
const GRAD_COORDINATES: usize = 100;
const GRAD_BUDGET: Duration = Duration::from_secs(120);
const LSTM_ORACLE_TOLERANCE: f64 = 1e-12;
const FC_ORACLE_TOLERANCE: f64 = 1e-10;
const ORACLE_INSTANCES: usize = 1000;
const LABEL_GRID: usize = 10_001;
const SG_TOLERANCE: f64 = 1e-9;
const METRIC_TOLERANCE: f64 = 1e-12;
const CHANCE: f64 = 1.0 / 7.0;
const CHANCE_BAND: f64 = 0.05;
const LEARN_ACCURACY: f64 = 0.60;
const LEARN_ACCURACY_PM1: f64 = 0.90;
const LEARN_BUDGET: Duration = Duration::from_secs(15 * 60);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn window(rng: &mut ChaCha8Rng) -> FeatureWindow {
    let mut v = |d: usize| -> Vector { (0..d).map(|_| rng.gen::<f64>()).collect::<Vec<_>>().into() };
    FeatureWindow {
        index: 0,
        rgb: v(2048),
        flow: v(2048),
        audio: v(1582),
        label_valence: 0.0,
        label_arousal: 0.0,
    }
}

fn random_subset(rng: &mut ChaCha8Rng) -> ModalitySet {
    loop {
        let picked: Vec<Modality> = Modality::ALL.into_iter().filter(|_| rng.gen_bool(0.5)).collect();
        if let Ok(set) = ModalitySet::new(picked) {
            return set;
        }
    }
}

fn randomize<P: Parameters>(p: &mut P, rng: &mut ChaCha8Rng, scale: f64) {
    for t in p.params_mut() {
        t.values.iter_mut().for_each(|v| *v = rng.gen_range(-scale..scale));
    }
}

#[derive(Clone)]
struct Logits(Matrix);

impl Parameters for Logits {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<ParamView<'a>>) {
        out.push(ParamView::matrix(format!("{prefix}.logits"), &self.0, ParamRole::Weight));
    }
    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<ParamViewMut<'a>>) {
        out.push(ParamViewMut::matrix(format!("{prefix}.logits"), &mut self.0, ParamRole::Weight));
    }
}

fn summarize(name: &str, r: &GradCheckReport) -> (bool, String) {
    let ok = r.checked() >= GRAD_COORDINATES && r.max_relative_error() < GRAD_TOLERANCE;
    (ok, format!("{name} {} coords max {:.1e}", r.checked(), r.max_relative_error()))
}

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut parts = Vec::new();

    // dense layer followed by ReLU under a fixed random linear readout
    let layer = DenseLayerParams::glorot(24, 40, &mut rng);
    let x = Matrix::from_fn(6, 40, |_, _| rng.gen_range(-1.0..1.0));
    let readout = Matrix::from_fn(6, 24, |_, _| rng.gen_range(-1.0..1.0));
    let dense_loss = |l: &DenseLayerParams| -> f64 {
        let mut y = dense_forward_batch(l, &x).unwrap();
        relu_in_place(y.as_mut_slice());
        y.as_slice().iter().zip(readout.as_slice()).map(|(a, b)| a * b).sum()
    };
    let mut y = dense_forward_batch(&layer, &x).unwrap();
    relu_in_place(y.as_mut_slice());
    let mut g = readout.clone();
    relu_backward_in_place(y.as_slice(), g.as_mut_slice());
    let mut grads = DenseLayerParams::zeros(24, 40);
    dense_backward_batch(&layer, &x, &g, &mut grads, false).unwrap();
    parts.push(summarize(
        "dense",
        &check_gradients(&layer, &grads, dense_loss, 160, DEFAULT_STEP, &mut rng),
    ));

    // temperature softmax + cross-entropy with respect to the logits
    let logits = Logits(Matrix::from_fn(16, 7, |_, _| rng.gen_range(-3.0..3.0)));
    let targets: Vec<usize> = (0..16).map(|_| rng.gen_range(0..7)).collect();
    let ce = softmax_cross_entropy_batch(&logits.0, &targets, 2.0).unwrap();
    let ce_loss = |l: &Logits| softmax_cross_entropy_batch(&l.0, &targets, 2.0).unwrap().loss;
    parts.push(summarize(
        "softmax-ce",
        &check_gradients(&logits, &Logits(ce.grad_logits), ce_loss, 112, DEFAULT_STEP, &mut rng),
    ));

    // full FC model
    let set = ModalitySet::all();
    let fc = FcFusionParams::glorot(&set, &mut rng);
    let ws: Vec<FeatureWindow> = (0..4).map(|_| window(&mut rng)).collect();
    let input = FusionInput::from_windows(&ws.iter().collect::<Vec<_>>(), &set);
    let t = [0, 3, 6, 2];
    let (_, fc_grads) = fc_loss_and_gradients(&fc, &input, &t, 2.0).unwrap();
    let fc_loss = |p: &FcFusionParams| fc_loss_and_gradients(p, &input, &t, 2.0).unwrap().0;
    parts.push(summarize(
        "fc",
        &check_gradients(&fc, &fc_grads, fc_loss, 120, DEFAULT_STEP, &mut rng),
    ));

    // two-layer LSTM through 5 steps
    let lstm = LstmFusionParams::glorot(&set, SequenceLayout::default(), &mut rng);
    let seqs: Vec<Vec<FeatureWindow>> = (0..3).map(|_| (0..5).map(|_| window(&mut rng)).collect()).collect();
    let steps: Vec<FusionInput> = (0..5)
        .map(|s| FusionInput::from_windows(&seqs.iter().map(|q| &q[s]).collect::<Vec<_>>(), &set))
        .collect();
    let lt = [1, 5, 4];
    let (_, lstm_grads) = lstm_loss_and_gradients(&lstm, &steps, &lt, 2.0).unwrap();
    let lstm_loss = |p: &LstmFusionParams| lstm_loss_and_gradients(p, &steps, &lt, 2.0).unwrap().0;
    parts.push(summarize(
        "lstm",
        &check_gradients(&lstm, &lstm_grads, lstm_loss, 150, DEFAULT_STEP, &mut rng),
    ));

    let elapsed = start.elapsed();
    let ok = parts.iter().all(|(p, _)| *p) && elapsed < GRAD_BUDGET;
    let details: Vec<String> = parts.into_iter().map(|(_, d)| d).collect();
    outcome(
        ok,
        format!(
            "{}; {:.1}s (rel err < {GRAD_TOLERANCE:e}, >= {GRAD_COORDINATES} coords, < {}s)",
            details.join(", "),
            elapsed.as_secs_f64(),
            GRAD_BUDGET.as_secs()
        ),
    )
}

fn oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut lstm_worst = 0.0f64;
    for _ in 0..ORACLE_INSTANCES {
        let hidden = rng.gen_range(2..=8);
        let input = rng.gen_range(1..=12);
        let mut cell = LstmCellParams::zeros(input, hidden);
        randomize(&mut cell, &mut rng, 1.5);
        let x: Vec<f64> = (0..input).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let prev = LstmState {
            c: (0..hidden).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<_>>().into(),
            h: (0..hidden).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>().into(),
        };
        let a = lstm_cell_step(&cell, &x, &prev).unwrap();
        let b = oracle_lstm_step(&cell, &x, &prev).unwrap();
        for (u, v) in a.c.iter().chain(a.h.iter()).zip(b.c.iter().chain(b.h.iter())) {
            lstm_worst = lstm_worst.max((u - v).abs());
        }
    }
    let mut fc_worst = 0.0f64;
    for _ in 0..ORACLE_INSTANCES {
        let set = random_subset(&mut rng);
        let params = FcFusionParams::glorot(&set, &mut rng);
        let w = window(&mut rng);
        let t = rng.gen_range(0.5..4.0);
        let a = fc_forward(&w, &params, t).unwrap();
        let b = oracle_forward_fc(&w, &params, t).unwrap();
        for (u, v) in a.iter().zip(b.iter()) {
            fc_worst = fc_worst.max((u - v).abs());
        }
    }
    outcome(
        lstm_worst <= LSTM_ORACLE_TOLERANCE && fc_worst <= FC_ORACLE_TOLERANCE,
        format!(
            "lstm cell max |diff| {lstm_worst:.1e} (<= {LSTM_ORACLE_TOLERANCE:e}), fc forward max |diff| {fc_worst:.1e} (<= {FC_ORACLE_TOLERANCE:e}), {ORACLE_INSTANCES} instances each"
        ),
    )
}

fn labeling() -> Outcome {
    let round_trip = (0..7).all(|k| quantize(bin_center(k).unwrap()).unwrap().index() == k);
    let grid: Vec<usize> = (0..LABEL_GRID)
        .map(|i| quantize(-1.0 + 2.0 * i as f64 / (LABEL_GRID - 1) as f64).unwrap().index())
        .collect();
    let monotone = grid.windows(2).all(|w| w[0] <= w[1]);
    let covers = grid.first() == Some(&0) && grid.last() == Some(&6);
    outcome(
        round_trip && monotone && covers,
        format!("bin centre round trip {round_trip}, monotone over {LABEL_GRID}-point grid {monotone}"),
    )
}

fn savitzky_golay_reproduction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    for degree in 0..=3 {
        for _ in 0..5 {
            let c: Vec<f64> = (0..=degree).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let n = 240;
            let signal: Vec<f64> = (0..n)
                .map(|i| {
                    let x = (i as f64 - 120.0) / 40.0;
                    c.iter().rev().fold(0.0, |acc, k| acc * x + k)
                })
                .collect();
            let out = savitzky_golay(&signal, 51, 3).unwrap();
            for i in 25..n - 25 {
                worst = worst.max((out[i] - signal[i]).abs());
            }
        }
    }
    outcome(
        worst <= SG_TOLERANCE,
        format!("degree 0-3, window 51, order 3: interior max |diff| {worst:.1e} (<= {SG_TOLERANCE:e})"),
    )
}

fn metric_examples() -> Outcome {
    let l = |v: &[usize]| -> Vec<EmotionLabel> { v.iter().map(|&i| EmotionLabel::new(i).unwrap()).collect() };
    let mut checks: Vec<(&str, bool)> = Vec::new();
    checks.push(("acc identical", accuracy(&l(&[0, 1, 2]), &l(&[0, 1, 2])).unwrap() == 1.0));
    checks.push(("acc 1/3", accuracy(&l(&[0, 1, 2]), &l(&[2, 1, 0])).unwrap() == 1.0 / 3.0));
    checks.push(("acc disjoint", accuracy(&l(&[0, 1]), &l(&[4, 5])).unwrap() == 0.0));
    checks.push(("pm1 +1", accuracy_pm1(&l(&[1, 2, 3]), &l(&[0, 1, 2])).unwrap() == 1.0));
    checks.push(("pm1 +2", accuracy_pm1(&l(&[2, 3, 4]), &l(&[0, 1, 2])).unwrap() == 0.0));
    checks.push(("pm1 3v5", accuracy_pm1(&l(&[3]), &l(&[5])).unwrap() == 0.0));
    checks.push(("pm1 3v4", accuracy_pm1(&l(&[3]), &l(&[4])).unwrap() == 1.0));
    checks.push(("mae/mse identical", mae_mse(&[0.1, 0.2], &[0.1, 0.2]).unwrap() == (0.0, 0.0)));
    checks.push(("mae/mse offset", mae_mse(&[0.5, 0.0, 1.0], &[0.0, -0.5, 0.5]).unwrap() == (0.5, 0.25)));
    checks.push(("mae/mse swap", mae_mse(&[0.0, 1.0], &[1.0, 0.0]).unwrap() == (1.0, 1.0)));
    let x = [0.3, -1.2, 2.5, 0.0, 4.1];
    let affine: Vec<f64> = x.iter().map(|v| 2.0 * v + 3.0).collect();
    let neg: Vec<f64> = x.iter().map(|v| -v).collect();
    checks.push(("pearson affine", (pearson(&x, &affine).unwrap() - 1.0).abs() <= METRIC_TOLERANCE));
    checks.push(("pearson negated", (pearson(&x, &neg).unwrap() + 1.0).abs() <= METRIC_TOLERANCE));
    checks.push((
        "pearson 0.5",
        (pearson(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap() - 0.5).abs() <= METRIC_TOLERANCE,
    ));
    let failed: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    outcome(
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} examples exact (pearson within {METRIC_TOLERANCE:e})", checks.len())
        } else {
            format!("failed: {}", failed.join(", "))
        },
    )
}

/// Reduced epoch budget so both 12-fold runs fit the time limit on one core;
/// every other hyperparameter keeps its reference value.
fn learnability_config() -> TrainConfig {
    TrainConfig {
        epochs: 8,
        patience: 3,
        ..TrainConfig::default()
    }
}

struct ProtocolLog {
    tested: Vec<String>,
    leaks: Vec<String>,
}

fn learnability_and_protocol() -> (Outcome, Outcome) {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let spec = LoocvSpec {
        architecture: Architecture::Fc,
        dimension: EmotionDimension::Arousal,
        modalities: ModalitySet::all(),
        train: learnability_config(),
        reconstruction: ReconstructionConfig::default(),
        parallel_folds: 1,
    };

    let mut separable = None;
    let mut noise = None;
    let mut protocol = outcome(false, "not run");
    for sep in [1.0, 0.0] {
        let data_dir = dir.path().join(format!("sep{sep}"));
        let synth = SynthSpec {
            clips: 12,
            frames_per_clip: 2000,
            seed: 7,
            separability: sep,
            ..SynthSpec::default()
        };
        let manifest = generate(&synth, &data_dir).unwrap();
        let clips = load_dataset(&manifest).unwrap();
        let log = Mutex::new(ProtocolLog {
            tested: Vec::new(),
            leaks: Vec::new(),
        });
        let observer = |e: &FoldEvent<'_>| {
            if let FoldEvent::Normalized {
                test_clip_id,
                stats,
                ..
            } = e
            {
                let mut log = log.lock().unwrap();
                log.tested.push(test_clip_id.to_string());
                let others: Vec<_> = clips.iter().filter(|c| c.clip_id() != *test_clip_id).collect();
                let expected = fit_minmax(&others).unwrap();
                if stats.fitted_on.iter().any(|id| id == test_clip_id)
                    || stats.fitted_on.len() != clips.len() - 1
                    || **stats != expected
                {
                    log.leaks.push(test_clip_id.to_string());
                }
            }
        };
        let report = run_loocv(&clips, &spec, Some(&observer)).unwrap();
        let agg = report.aggregate.expect("completed folds");
        if sep == 1.0 {
            let log = log.into_inner().unwrap();
            let mut tested = log.tested.clone();
            tested.sort();
            let mut ids: Vec<String> = clips.iter().map(|c| c.clip_id().to_string()).collect();
            ids.sort();
            let completed = report.folds.iter().filter(|f| matches!(f, FoldOutcome::Completed(_))).count();
            let ok = report.folds.len() == 12 && completed == 12 && tested == ids && log.leaks.is_empty();
            protocol = outcome(
                ok,
                format!(
                    "{} folds, {} completed, each clip tested once: {}, stats fitted without the test clip: {}",
                    report.folds.len(),
                    completed,
                    tested == ids,
                    log.leaks.is_empty()
                ),
            );
            separable = Some(agg);
        } else {
            noise = Some(agg);
        }
        fs::remove_dir_all(&data_dir).ok();
    }
    let elapsed = start.elapsed();
    let s = separable.unwrap();
    let n = noise.unwrap();
    let ok = s.accuracy >= LEARN_ACCURACY
        && s.accuracy_pm1 >= LEARN_ACCURACY_PM1
        && (n.accuracy - CHANCE).abs() <= CHANCE_BAND
        && elapsed < LEARN_BUDGET;
    let learn = outcome(
        ok,
        format!(
            "separable acc {:.4} (>= {LEARN_ACCURACY}) acc±1 {:.4} (>= {LEARN_ACCURACY_PM1}); noise acc {:.4} (1/7 ± {CHANCE_BAND}); {:.0}s (< {}s); {} epochs max",
            s.accuracy,
            s.accuracy_pm1,
            n.accuracy,
            elapsed.as_secs_f64(),
            LEARN_BUDGET.as_secs(),
            learnability_config().epochs
        ),
    );
    (learn, protocol)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let synth = SynthSpec {
        clips: 3,
        frames_per_clip: 300,
        seed: 11,
        separability: 0.8,
        drift_period: 120.0,
    };
    let manifest = generate(&synth, &dir.path().join("data")).unwrap();
    let config = dir.path().join("run.json");
    fs::write(
        &config,
        r#"{"model": "lstm", "train": {"epochs": 2, "patience": 2, "seed": 5, "batch_size": 64}}"#,
    )
    .unwrap();
    let run = |name: &str, parallel: usize| -> Vec<u8> {
        let o = Overrides {
            manifest: Some(manifest.clone()),
            output_dir: Some(dir.path().join(name)),
            parallel_folds: Some(parallel),
            ..Default::default()
        };
        let out = cmd_loocv(Some(&config), &o).unwrap();
        fs::read(out.report).unwrap()
    };
    let a = run("a", 1);
    let b = run("b", 1);
    let c = run("c", 2);
    outcome(
        a == b && a == c,
        format!(
            "two sequential runs identical: {}, parallel-fold run identical: {} ({} bytes)",
            a == b,
            a == c,
            a.len()
        ),
    )
}

fn table_golden() -> Outcome {
    let rows = [
        (Architecture::Fc, "rgb", 0.4904, 0.9284, 0.17, 0.05, 0.31),
        (Architecture::Fc, "flow", 0.5108, 0.9390, 0.18, 0.05, 0.34),
        (Architecture::Fc, "audio", 0.5110, 0.9567, 0.15, 0.04, 0.44),
        (Architecture::Fc, "rgb,flow", 0.5011, 0.9301, 0.17, 0.05, 0.35),
        (Architecture::Fc, "rgb,audio", 0.5209, 0.9488, 0.16, 0.04, 0.43),
        (Architecture::Fc, "flow,audio", 0.5230, 0.9512, 0.15, 0.04, 0.45),
        (Architecture::Fc, "rgb,flow,audio", 0.5332, 0.9475, 0.15, 0.04, 0.46),
        (Architecture::Lstm, "rgb,flow,audio", 0.4864, 0.9528, 0.37, 0.17, 0.43),
    ];
    let reports: Vec<EvalReport> = rows
        .iter()
        .map(|&(arch, mods, acc, acc1, mae, mse, r)| EvalReport {
            architecture: arch,
            dimension: EmotionDimension::Arousal,
            modalities: ModalitySet::parse_list(mods).unwrap(),
            train_config: TrainConfig::default(),
            reconstruction: ReconstructionConfig::default(),
            folds: Vec::new(),
            aggregate: Some(Metrics {
                accuracy: acc,
                accuracy_pm1: acc1,
                mae,
                mse,
                pearson: r,
            }),
            partial: false,
            pearson_zero_variance_folds: 0,
        })
        .rev()
        .collect();
    let rendered = render_table(&reports).unwrap();
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/table_arousal.txt");
    if std::env::var_os("AFFECTFUSE_BLESS").is_some() {
        fs::write(&path, &rendered).unwrap();
    }
    let golden = fs::read_to_string(&path).unwrap_or_default();
    let mut headings = true;
    for h in ["Discrete case", "Continuous case", "Accuracy (%)", "Accuracy ± 1 (%)", "MAE", "MSE", "Correlation"] {
        headings &= rendered.contains(h);
    }
    outcome(
        rendered == golden && headings,
        format!(
            "{} ablation rows in two model groups, matches golden file: {}",
            rows.len(),
            rendered == golden
        ),
    )
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut report = |name: &'static str, o: Outcome| {
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((name, o));
    };
    report("gradient suite", gradient_suite());
    report("equation oracles", oracles());
    report("labeling round trip", labeling());
    report("savitzky-golay polynomial reproduction", savitzky_golay_reproduction());
    report("metric examples", metric_examples());
    report("table emission", table_golden());
    report("determinism", determinism());
    let (learn, protocol) = learnability_and_protocol();
    report("synthetic learnability", learn);
    report("loocv protocol", protocol);

    let failed = results.iter().filter(|(_, o)| !o.pass).count();
    println!("acceptance: {} passed, {} failed", results.len() - failed, failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
