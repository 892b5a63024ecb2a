//! Constant-velocity Kalman filter over `(u, v, aspect, h)` box
//! measurements with per-frame derivatives.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};
use crate::skeleton::BBox;

pub type StateVec = SVector<f64, 8>;
pub type StateCov = SMatrix<f64, 8, 8>;
pub type MeasVec = SVector<f64, 4>;
pub type MeasCov = SMatrix<f64, 4, 4>;

/// 0.95 quantile of the chi-square distribution with 4 degrees of freedom.
pub const CHI2_95_4DOF: f64 = 9.4877;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanConfig {
    /// Position noise std as a fraction of box height.
    pub std_weight_position: f64,
    /// Velocity noise std as a fraction of box height.
    pub std_weight_velocity: f64,
    /// Multiplier on the process noise covariance (0 disables it).
    pub process_noise_scale: f64,
    /// Multiplier on the measurement noise covariance.
    pub measurement_noise_scale: f64,
}

impl Default for KalmanConfig {
    fn default() -> Self {
        KalmanConfig {
            std_weight_position: 1.0 / 20.0,
            std_weight_velocity: 1.0 / 160.0,
            process_noise_scale: 1.0,
            measurement_noise_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub mean: StateVec,
    pub covariance: StateCov,
}

impl Gaussian {
    pub fn bbox(&self) -> BBox {
        state_bbox(&self.mean)
    }
}

/// Box center, aspect ratio `w/h` and height.
pub fn measurement(b: &BBox) -> MeasVec {
    let (cx, cy) = b.center();
    MeasVec::new(cx, cy, b.w / b.h, b.h)
}

pub fn state_bbox(mean: &StateVec) -> BBox {
    let h = mean[3];
    let w = mean[2] * h;
    BBox::new(mean[0] - w / 2.0, mean[1] - h / 2.0, w, h)
}

fn transition() -> StateCov {
    let mut f = StateCov::identity();
    for i in 0..4 {
        f[(i, i + 4)] = 1.0;
    }
    f
}

fn projection() -> SMatrix<f64, 4, 8> {
    let mut m = SMatrix::<f64, 4, 8>::zeros();
    for i in 0..4 {
        m[(i, i)] = 1.0;
    }
    m
}

fn symmetrize<const N: usize>(m: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    (m + m.transpose()) * 0.5
}

#[derive(Debug, Clone, Copy, Default)]
pub struct KalmanFilter {
    pub config: KalmanConfig,
}

impl KalmanFilter {
    pub fn new(config: KalmanConfig) -> Self {
        KalmanFilter { config }
    }

    /// Track from an unassociated measurement: zero velocity, with velocity
    /// variances ten times the matching position variances.
    pub fn initiate(&self, z: &MeasVec) -> Gaussian {
        let h = z[3];
        let wp = self.config.std_weight_position;
        let pos_std = [2.0 * wp * h, 2.0 * wp * h, 1e-2, 2.0 * wp * h];
        let mut mean = StateVec::zeros();
        mean.fixed_rows_mut::<4>(0).copy_from(z);
        let mut cov = StateCov::zeros();
        for (i, s) in pos_std.iter().enumerate() {
            cov[(i, i)] = s * s;
            cov[(i + 4, i + 4)] = 10.0 * s * s;
        }
        Gaussian { mean, covariance: cov }
    }

    fn process_noise(&self, h: f64) -> StateCov {
        let wp = self.config.std_weight_position * h;
        let wv = self.config.std_weight_velocity * h;
        let std = [wp, wp, 1e-2, wp, wv, wv, 1e-5, wv];
        let s = self.config.process_noise_scale;
        StateCov::from_diagonal(&StateVec::from_iterator(std.iter().map(|x| s * x * x)))
    }

    fn measurement_noise(&self, h: f64) -> MeasCov {
        let wp = self.config.std_weight_position * h;
        let std = [wp, wp, 1e-1, wp];
        let s = self.config.measurement_noise_scale;
        MeasCov::from_diagonal(&MeasVec::from_iterator(std.iter().map(|x| s * x * x)))
    }

    /// One-frame constant-velocity prediction.
    pub fn predict(&self, g: &Gaussian) -> Gaussian {
        let f = transition();
        let q = self.process_noise(g.mean[3]);
        Gaussian {
            mean: f * g.mean,
            covariance: symmetrize(&(f * g.covariance * f.transpose() + q)),
        }
    }

    /// Predicted measurement distribution.
    pub fn project(&self, g: &Gaussian) -> (MeasVec, MeasCov) {
        let hm = projection();
        let s = hm * g.covariance * hm.transpose() + self.measurement_noise(g.mean[3]);
        (hm * g.mean, symmetrize(&s))
    }

    /// Squared Mahalanobis distance of a measurement to the prediction.
    pub fn gating_distance(&self, g: &Gaussian, z: &MeasVec) -> f64 {
        let (m, s) = self.project(g);
        let d = z - m;
        match s.cholesky() {
            Some(ch) => d.dot(&ch.solve(&d)),
            None => f64::INFINITY,
        }
    }

    pub fn update(&self, g: &Gaussian, z: &MeasVec) -> Result<Gaussian> {
        let hm = projection();
        let (m, s) = self.project(g);
        let ch = s.cholesky().ok_or(Error::NotPositiveDefinite)?;
        // K = P H^T S^-1, computed as (S^-1 H P)^T.
        let gain = ch.solve(&(hm * g.covariance)).transpose();
        let mean = g.mean + gain * (z - m);
        let cov = symmetrize(&(g.covariance - gain * s * gain.transpose()));
        if cov.cholesky().is_none() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Gaussian { mean, covariance: cov })
    }
}
