use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::EmotionLabel;

fn check_lengths(a: usize, b: usize, what: &'static str) -> Result<()> {
    if a != b {
        return Err(Error::shape(what, a, b));
    }
    if a == 0 {
        return Err(Error::InsufficientData(format!("{what}: empty input")));
    }
    Ok(())
}

pub fn accuracy(pred: &[EmotionLabel], truth: &[EmotionLabel]) -> Result<f64> {
    check_lengths(pred.len(), truth.len(), "accuracy")?;
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Share of predictions at most one class away from the truth.
pub fn accuracy_pm1(pred: &[EmotionLabel], truth: &[EmotionLabel]) -> Result<f64> {
    check_lengths(pred.len(), truth.len(), "accuracy_pm1")?;
    let hits = pred
        .iter()
        .zip(truth)
        .filter(|(p, t)| p.index().abs_diff(t.index()) <= 1)
        .count();
    Ok(hits as f64 / pred.len() as f64)
}

pub fn mae_mse(pred: &[f64], truth: &[f64]) -> Result<(f64, f64)> {
    check_lengths(pred.len(), truth.len(), "mae_mse")?;
    if !pred.iter().chain(truth).all(|v| v.is_finite()) {
        return Err(Error::NonFinite("mae_mse input"));
    }
    let (mut abs, mut sq) = (0.0, 0.0);
    for (p, t) in pred.iter().zip(truth) {
        let d = p - t;
        abs += d.abs();
        sq += d * d;
    }
    let n = pred.len() as f64;
    Ok((abs / n, sq / n))
}

/// Sample Pearson correlation, or 0 when either curve is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    Ok(pearson_flagged(x, y)?.value)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub value: f64,
    /// Set when either input had zero variance and `value` is the 0 fallback.
    pub zero_variance: bool,
}

pub fn pearson_flagged(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(Error::shape("pearson", x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "pearson needs at least 2 samples, got {}",
            x.len()
        )));
    }
    if !x.iter().chain(y).all(|v| v.is_finite()) {
        return Err(Error::NonFinite("pearson input"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(Correlation {
            value: 0.0,
            zero_variance: true,
        });
    }
    Ok(Correlation {
        value: (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0),
        zero_variance: false,
    })
}

/// The five scores reported per fold and in aggregate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub accuracy_pm1: f64,
    pub mae: f64,
    pub mse: f64,
    pub pearson: f64,
}

impl Metrics {
    /// Unweighted mean over folds.
    pub fn mean(items: &[Metrics]) -> Option<Metrics> {
        if items.is_empty() {
            return None;
        }
        let n = items.len() as f64;
        let avg = |f: fn(&Metrics) -> f64| items.iter().map(f).sum::<f64>() / n;
        Some(Metrics {
            accuracy: avg(|m| m.accuracy),
            accuracy_pm1: avg(|m| m.accuracy_pm1),
            mae: avg(|m| m.mae),
            mse: avg(|m| m.mse),
            pearson: avg(|m| m.pearson),
        })
    }
}
