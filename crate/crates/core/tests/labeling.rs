use affectfuse::labeling::{
    bin_center, moving_average, quantize, reconstruct_continuous, savitzky_golay, EmotionLabel, ReconstructionConfig,
};
use proptest::prelude::*;

fn poly(coeffs: &[f64], n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let x = (i as f64 - n as f64 / 2.0) / 30.0;
            coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
        })
        .collect()
}

proptest! {
    #[test]
    fn quantize_is_monotone(a in -1.0f64..=1.0, b in -1.0f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(quantize(lo).unwrap().index() <= quantize(hi).unwrap().index());
    }

    #[test]
    fn quantized_value_lies_in_its_bin(v in -1.0f64..=1.0) {
        let k = quantize(v).unwrap();
        prop_assert!((v - bin_center(k.index()).unwrap()).abs() <= 1.0 / 7.0 + 1e-12);
    }

    #[test]
    fn savitzky_golay_keeps_cubics(
        coeffs in prop::collection::vec(-3.0f64..3.0, 1..=4),
        n in 60usize..200,
    ) {
        let signal = poly(&coeffs, n);
        let out = savitzky_golay(&signal, 51, 3).unwrap();
        for i in 25..n - 25 {
            prop_assert!((out[i] - signal[i]).abs() < 1e-9, "i {i}: {} vs {}", out[i], signal[i]);
        }
    }

    #[test]
    fn moving_average_keeps_length_and_range(
        signal in prop::collection::vec(-1.0f64..1.0, 1..300),
        window in (0usize..40).prop_map(|k| 2 * k + 1),
    ) {
        let out = moving_average(&signal, window).unwrap();
        prop_assert_eq!(out.len(), signal.len());
        let lo = signal.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = signal.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(out.iter().all(|v| *v >= lo - 1e-12 && *v <= hi + 1e-12));
    }

    #[test]
    fn reconstruction_spans_unit_range(classes in prop::collection::vec(0usize..7, 2..400)) {
        let labels: Vec<EmotionLabel> = classes.iter().map(|&c| EmotionLabel::new(c).unwrap()).collect();
        let curve = reconstruct_continuous(&labels, &ReconstructionConfig::default()).unwrap();
        prop_assert_eq!(curve.len(), labels.len());
        prop_assert!(curve.iter().all(|v| v.is_finite() && (-1.0 - 1e-12..=1.0 + 1e-12).contains(v)));
    }
}

#[test]
fn constant_prediction_reconstructs_to_constant() {
    let labels = vec![EmotionLabel::new(4).unwrap(); 300];
    let curve = reconstruct_continuous(&labels, &ReconstructionConfig::default()).unwrap();
    let first = curve[0];
    assert!(curve.iter().all(|v| (v - first).abs() < 1e-12));
}
