//! Savitzky-Golay smoothing: least-squares polynomial fit over a sliding
//! window, evaluated at the window center. Edge samples are fit on the
//! truncated window instead of being padded.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::linalg;

/// Weights reproducing the degree-`order` least-squares fit evaluated at
/// offset 0, for a window spanning offsets `-left..=right`.
fn fit_weights(left: usize, right: usize, order: usize) -> Result<Vec<f64>> {
    let rows = left + right + 1;
    // A truncated edge window may hold fewer points than the requested
    // polynomial order needs; drop to an exact interpolation in that case.
    let order = order.min(rows - 1);
    let cols = order + 1;
    let design: Vec<Vec<f64>> = (0..rows)
        .map(|r| {
            let x = r as f64 - left as f64;
            (0..cols).map(|p| x.powi(p as i32)).collect()
        })
        .collect();
    let mut normal = vec![vec![0.0; cols]; cols];
    for i in 0..cols {
        for j in 0..cols {
            normal[i][j] = (0..rows).map(|r| design[r][i] * design[r][j]).sum();
        }
    }
    let mut e0 = vec![0.0; cols];
    e0[0] = 1.0;
    let z = linalg::solve_dense(&mut normal, &mut e0)
        .ok_or_else(|| Error::Config("smoothing normal equations are singular".into()))?;
    Ok(design.iter().map(|row| linalg::dot(row, &z)).collect())
}

/// Smooths one series. `window` must be odd and no longer than the signal;
/// `polyorder` must be smaller than `window`.
pub fn savitzky_golay(signal: &[f64], window: usize, polyorder: usize) -> Result<Vec<f64>> {
    let t = signal.len();
    if window % 2 == 0 || window == 0 {
        return Err(Error::Config(format!("window must be odd, got {window}")));
    }
    if window > t {
        return Err(Error::Config(format!(
            "window {window} exceeds signal length {t}"
        )));
    }
    if polyorder >= window {
        return Err(Error::Config(format!(
            "polyorder {polyorder} must be smaller than window {window}"
        )));
    }
    let half = window / 2;
    let mut cache: HashMap<(usize, usize), Vec<f64>> = HashMap::new();
    let mut out = vec![0.0; t];
    for s in 0..t {
        let left = s.min(half);
        let right = (t - 1 - s).min(half);
        let weights = match cache.get(&(left, right)) {
            Some(w) => w,
            None => {
                let w = fit_weights(left, right, polyorder)?;
                cache.entry((left, right)).or_insert(w)
            }
        };
        out[s] = weights
            .iter()
            .enumerate()
            .map(|(r, w)| w * signal[s - left + r])
            .sum();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reproduces_low_degree_polynomials() {
        let t = 30;
        let signal: Vec<f64> = (0..t)
            .map(|s| {
                let x = s as f64;
                0.5 - 1.25 * x + 0.03 * x * x - 0.001 * x * x * x
            })
            .collect();
        let out = savitzky_golay(&signal, 11, 3).unwrap();
        for s in 5..t - 5 {
            assert!((out[s] - signal[s]).abs() < 1e-9, "sample {s}");
        }
    }

    #[test]
    fn constant_signal_unchanged_everywhere() {
        let signal = vec![4.25; 20];
        let out = savitzky_golay(&signal, 7, 2).unwrap();
        for (a, b) in out.iter().zip(&signal) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn reduces_noise_variance_on_sine() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let t = 400;
        let clean: Vec<f64> = (0..t)
            .map(|s| (2.0 * std::f64::consts::PI * s as f64 / 50.0).sin())
            .collect();
        let mut noisy_var = 0.0;
        let mut smooth_var = 0.0;
        for _ in 0..10 {
            let noisy: Vec<f64> = clean
                .iter()
                .map(|c| c + 0.2 * rng.gen_range(-1.0..1.0))
                .collect();
            let smooth = savitzky_golay(&noisy, 11, 3).unwrap();
            noisy_var += clean
                .iter()
                .zip(&noisy)
                .map(|(c, x)| (c - x).powi(2))
                .sum::<f64>();
            smooth_var += clean
                .iter()
                .zip(&smooth)
                .map(|(c, x)| (c - x).powi(2))
                .sum::<f64>();
        }
        assert!(
            smooth_var < noisy_var,
            "smoothing failed to reduce residual variance: {smooth_var} vs {noisy_var}"
        );
    }

    #[test]
    fn rejects_bad_parameters() {
        let signal = vec![0.0; 10];
        assert!(savitzky_golay(&signal, 4, 2).is_err());
        assert!(savitzky_golay(&signal, 11, 2).is_err());
        assert!(savitzky_golay(&signal, 5, 5).is_err());
    }
}
