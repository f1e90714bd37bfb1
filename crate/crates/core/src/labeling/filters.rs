//! Moving-average and Savitzky–Golay smoothing.

use crate::error::{Error, Result};

fn check_window(window: usize, what: &str) -> Result<()> {
    if window == 0 || window % 2 == 0 {
        return Err(Error::invalid(format!("{what} window must be odd and >= 1, got {window}")));
    }
    Ok(())
}

/// Centred moving average. Near the edges the window is truncated to the
/// samples that exist, so the first output averages `x[0..=half]`.
pub fn moving_average(signal: &[f64], window: usize) -> Result<Vec<f64>> {
    check_window(window, "moving average")?;
    if signal.is_empty() {
        return Err(Error::InsufficientData("moving average of an empty signal".into()));
    }
    let n = signal.len();
    let half = window / 2;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for &x in signal {
        prefix.push(prefix.last().unwrap() + x);
    }
    Ok((0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            if hi == lo {
                signal[i]
            } else {
                (prefix[hi + 1] - prefix[lo]) / (hi + 1 - lo) as f64
            }
        })
        .collect())
}

/// Convolution weights that evaluate, at offset `eval_at` from the window
/// centre, the least-squares polynomial of degree `polyorder` through a
/// window of `window` samples.
pub fn savgol_coefficients(window: usize, polyorder: usize, eval_at: isize) -> Result<Vec<f64>> {
    check_window(window, "Savitzky-Golay")?;
    if polyorder >= window {
        return Err(Error::invalid(format!(
            "polyorder {polyorder} must be below the window {window}"
        )));
    }
    let half = (window / 2) as isize;
    if eval_at.abs() > half {
        return Err(Error::invalid(format!("evaluation offset {eval_at} outside the window")));
    }
    if half == 0 {
        return Ok(vec![1.0]);
    }
    // Positions scaled into [-1, 1] keep the normal equations well conditioned.
    let scale = half as f64;
    let terms = polyorder + 1;
    let powers = |u: f64| -> Vec<f64> {
        let mut p = Vec::with_capacity(terms);
        let mut acc = 1.0;
        for _ in 0..terms {
            p.push(acc);
            acc *= u;
        }
        p
    };
    let design: Vec<Vec<f64>> = (-half..=half).map(|i| powers(i as f64 / scale)).collect();
    let mut gram = vec![vec![0.0; terms]; terms];
    for row in &design {
        for a in 0..terms {
            for b in 0..terms {
                gram[a][b] += row[a] * row[b];
            }
        }
    }
    let target = powers(eval_at as f64 / scale);
    let solved = solve_spd(gram, target)?;
    Ok(design
        .iter()
        .map(|row| row.iter().zip(&solved).map(|(x, y)| x * y).sum())
        .collect())
}

/// Cholesky solve of a small symmetric positive definite system.
fn solve_spd(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for j in 0..n {
        let mut d = a[j][j];
        for k in 0..j {
            d -= a[j][k] * a[j][k];
        }
        if d <= 0.0 {
            return Err(Error::invalid("singular Savitzky-Golay normal equations"));
        }
        let d = d.sqrt();
        a[j][j] = d;
        for i in j + 1..n {
            let mut s = a[i][j];
            for k in 0..j {
                s -= a[i][k] * a[j][k];
            }
            a[i][j] = s / d;
        }
    }
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i][k] * b[k];
        }
        b[i] = s / a[i][i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= a[k][i] * b[k];
        }
        b[i] = s / a[i][i];
    }
    Ok(b)
}

/// Savitzky–Golay smoothing. Interior samples take the centre value of the
/// local fit; the first and last `window / 2` samples are read off the fit
/// of the first and last full window.
pub fn savitzky_golay(signal: &[f64], window: usize, polyorder: usize) -> Result<Vec<f64>> {
    check_window(window, "Savitzky-Golay")?;
    if polyorder >= window {
        return Err(Error::invalid(format!(
            "polyorder {polyorder} must be below the window {window}"
        )));
    }
    let n = signal.len();
    if n < window {
        return Err(Error::InsufficientData(format!(
            "signal of {n} samples is shorter than the window {window}"
        )));
    }
    let half = window / 2;
    let apply = |coeffs: &[f64], start: usize| -> f64 {
        coeffs.iter().zip(&signal[start..start + window]).map(|(c, x)| c * x).sum()
    };
    let centre = savgol_coefficients(window, polyorder, 0)?;
    let mut out = vec![0.0; n];
    for i in 0..half {
        let c = savgol_coefficients(window, polyorder, i as isize - half as isize)?;
        out[i] = apply(&c, 0);
        let c = savgol_coefficients(window, polyorder, half as isize - i as isize)?;
        out[n - 1 - i] = apply(&c, n - window);
    }
    for i in half..n - half {
        out[i] = apply(&centre, i - half);
    }
    Ok(out)
}

/// The largest odd window `<= len` (at least 1).
pub fn largest_odd_at_most(len: usize) -> usize {
    if len == 0 {
        1
    } else if len % 2 == 1 {
        len
    } else {
        len - 1
    }
}
