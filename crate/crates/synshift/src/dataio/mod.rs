//! Dataset ingestion and preprocessing: differentiation of glove angles into
//! velocities, discrete integration back to postures, smoothing, the CSV
//! formats, and the planted synthetic generator.

mod csv;
mod savgol;
mod synth;

pub use csv::{
    angle_csv_string, load_dataset_csv, parse_dataset_csv, save_angle_csv, save_velocity_csv,
    velocity_csv_string, CsvContent,
};
pub use savgol::savitzky_golay;
pub use synth::{generate_synthetic, SyntheticSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Joint angles for one task: `n` joints over `t` samples, stored time-major
/// like velocity vectors, in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleTrajectory {
    n: usize,
    t: usize,
    sample_rate: f64,
    angles: Vec<f64>,
}

impl AngleTrajectory {
    pub fn new(n: usize, t: usize, sample_rate: f64, angles: Vec<f64>) -> Result<Self> {
        if n == 0 || t == 0 {
            return Err(Error::Config("trajectory needs n >= 1 and t >= 1".into()));
        }
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::Config(format!(
                "sample_rate must be positive and finite, got {sample_rate}"
            )));
        }
        if angles.len() != n * t {
            return Err(Error::dim("angle trajectory", n * t, angles.len()));
        }
        if !linalg::all_finite(&angles) {
            return Err(Error::Input("angle trajectory has non-finite entries".into()));
        }
        Ok(AngleTrajectory {
            n,
            t,
            sample_rate,
            angles,
        })
    }

    pub fn joint_count(&self) -> usize {
        self.n
    }

    pub fn window(&self) -> usize {
        self.t
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn samples(&self) -> &[f64] {
        &self.angles
    }

    pub fn at(&self, joint: usize, t: usize) -> f64 {
        self.angles[t * self.n + joint]
    }
}

/// Central differences at interior samples, one-sided at the endpoints,
/// scaled by the sample rate. Returns one time-major velocity task vector.
pub fn differentiate(angles: &AngleTrajectory) -> Result<Vec<f64>> {
    let (n, t, rate) = (angles.n, angles.t, angles.sample_rate);
    if t < 2 {
        return Err(Error::Input(
            "differentiation needs at least two samples".into(),
        ));
    }
    let a = &angles.angles;
    let mut v = vec![0.0; n * t];
    for i in 0..n {
        v[i] = (a[n + i] - a[i]) * rate;
        for s in 1..t - 1 {
            v[s * n + i] = (a[(s + 1) * n + i] - a[(s - 1) * n + i]) * rate * 0.5;
        }
        v[(t - 1) * n + i] = (a[(t - 1) * n + i] - a[(t - 2) * n + i]) * rate;
    }
    Ok(v)
}

/// Cumulative left-rectangle integration of a time-major velocity vector from
/// the given initial angles. Left inverse of [`differentiate`] up to O(h)
/// endpoint effects.
pub fn integrate(
    velocities: &[f64],
    initial_angles: &[f64],
    sample_rate: f64,
) -> Result<AngleTrajectory> {
    let n = initial_angles.len();
    if n == 0 {
        return Err(Error::Input("initial angles must be non-empty".into()));
    }
    if velocities.len() % n != 0 || velocities.is_empty() {
        return Err(Error::dim("velocity vector", n, velocities.len()));
    }
    if !linalg::all_finite(velocities) || !linalg::all_finite(initial_angles) {
        return Err(Error::Input("integration inputs must be finite".into()));
    }
    let t = velocities.len() / n;
    let dt = 1.0 / sample_rate;
    let mut angles = vec![0.0; n * t];
    angles[..n].copy_from_slice(initial_angles);
    for s in 1..t {
        for i in 0..n {
            angles[s * n + i] = angles[(s - 1) * n + i] + velocities[(s - 1) * n + i] * dt;
        }
    }
    AngleTrajectory::new(n, t, sample_rate, angles)
}
