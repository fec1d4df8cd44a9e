//! Constant-velocity Kalman filter over head position and orientation.
//!
//! State (12): position, linear velocity, rotation vector of the head
//! orientation relative to a reference rotation fixed at the first
//! measurement, angular velocity. The small-angle rotation-vector state is
//! adequate for head motion of a few tens of degrees around the reference.

use nalgebra::{SMatrix, SVector};

use crate::geometry::{exp_so3, log_so3, Mat3, Pose, Vec3};

type State = SVector<f64, 12>;
type Cov = SMatrix<f64, 12, 12>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictorConfig {
    /// White-noise acceleration spectral density, m²/s³.
    pub position_process_noise: f64,
    /// White-noise angular acceleration spectral density, rad²/s³.
    pub orientation_process_noise: f64,
    /// Measurement standard deviations, m and rad.
    pub position_measurement_noise: f64,
    pub orientation_measurement_noise: f64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            position_process_noise: 0.05,
            orientation_process_noise: 2.0,
            position_measurement_noise: 0.002,
            orientation_measurement_noise: 0.01,
        }
    }
}

/// Variance assumed for the unobserved velocities at initialization.
const INITIAL_VELOCITY_VAR: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PredictorState {
    pub config: PredictorConfig,
    pub mean: State,
    pub covariance: Cov,
    pub reference: Mat3,
    pub initialized: bool,
}

impl PredictorState {
    pub fn new(config: PredictorConfig) -> Self {
        Self {
            config,
            mean: State::zeros(),
            covariance: Cov::identity(),
            reference: Mat3::identity(),
            initialized: false,
        }
    }

    pub fn position(&self) -> Vec3 {
        self.mean.fixed_rows::<3>(0).into_owned()
    }

    pub fn velocity(&self) -> Vec3 {
        self.mean.fixed_rows::<3>(3).into_owned()
    }

    pub fn angular_velocity(&self) -> Vec3 {
        self.mean.fixed_rows::<3>(9).into_owned()
    }

    /// Posterior mean as a pose.
    pub fn pose(&self) -> Pose {
        self.extrapolate(0.0)
    }

    /// Posterior mean carried forward `h` seconds at constant velocity.
    pub fn extrapolate(&self, h: f64) -> Pose {
        let p = self.position() + self.velocity() * h;
        let theta = self.mean.fixed_rows::<3>(6).into_owned() + self.angular_velocity() * h;
        Pose::new(exp_so3(theta) * self.reference, p)
    }

    fn initialize(&mut self, m: &Pose) {
        let c = &self.config;
        self.reference = m.rotation;
        self.mean = State::zeros();
        self.mean.fixed_rows_mut::<3>(0).copy_from(&m.translation);
        let mut cov = Cov::zeros();
        for i in 0..3 {
            cov[(i, i)] = c.position_measurement_noise.powi(2);
            cov[(3 + i, 3 + i)] = INITIAL_VELOCITY_VAR;
            cov[(6 + i, 6 + i)] = c.orientation_measurement_noise.powi(2);
            cov[(9 + i, 9 + i)] = INITIAL_VELOCITY_VAR;
        }
        self.covariance = cov;
        self.initialized = true;
    }

    fn predict(&mut self, dt: f64) {
        let mut f = Cov::identity();
        let mut q = Cov::zeros();
        let c = &self.config;
        for (block, qc) in [
            (0, c.position_process_noise),
            (6, c.orientation_process_noise),
        ] {
            for i in 0..3 {
                let (x, v) = (block + i, block + 3 + i);
                f[(x, v)] = dt;
                q[(x, x)] = qc * dt.powi(3) / 3.0;
                q[(x, v)] = qc * dt.powi(2) / 2.0;
                q[(v, x)] = q[(x, v)];
                q[(v, v)] = qc * dt;
            }
        }
        self.mean = f * self.mean;
        let p = f * self.covariance * f.transpose() + q;
        self.covariance = (p + p.transpose()) * 0.5;
    }

    fn update(&mut self, m: &Pose) {
        let c = &self.config;
        let theta = log_so3(&(m.rotation * self.reference.transpose()));
        let mut z = SVector::<f64, 6>::zeros();
        z.fixed_rows_mut::<3>(0).copy_from(&m.translation);
        z.fixed_rows_mut::<3>(3).copy_from(&theta);
        let mut h = SMatrix::<f64, 6, 12>::zeros();
        for i in 0..3 {
            h[(i, i)] = 1.0;
            h[(3 + i, 6 + i)] = 1.0;
        }
        // A tiny floor keeps the innovation covariance invertible with
        // noise-free measurements.
        let mut r = SMatrix::<f64, 6, 6>::zeros();
        for i in 0..3 {
            r[(i, i)] = c.position_measurement_noise.powi(2).max(1e-18);
            r[(3 + i, 3 + i)] = c.orientation_measurement_noise.powi(2).max(1e-18);
        }
        let y = z - h * self.mean;
        let s = h * self.covariance * h.transpose() + r;
        let Some(s_inv) = s.cholesky().map(|ch| ch.inverse()) else {
            return;
        };
        let k = self.covariance * h.transpose() * s_inv;
        self.mean += k * y;
        // Joseph form keeps the covariance symmetric positive semidefinite.
        let ikh = Cov::identity() - k * h;
        let p = ikh * self.covariance * ikh.transpose() + k * r * k.transpose();
        self.covariance = (p + p.transpose()) * 0.5;
        self.rebase();
    }

    /// Folds a large rotation-vector state into the reference so the
    /// small-angle model stays accurate.
    fn rebase(&mut self) {
        let theta = self.mean.fixed_rows::<3>(6).into_owned();
        if theta.norm() < 0.5 {
            return;
        }
        self.reference = exp_so3(theta) * self.reference;
        self.mean.fixed_rows_mut::<3>(6).fill(0.0);
    }
}

/// Advances the filter by `dt` (predict, then update when a measurement is
/// present) and returns the posterior mean extrapolated `horizon` seconds.
/// The first measurement initializes the filter; before that the returned
/// pose is meaningless and the state is unchanged.
pub fn predictor_step(
    state: &PredictorState,
    measurement: Option<&Pose>,
    dt: f64,
    horizon: f64,
) -> (PredictorState, Pose) {
    let mut next = state.clone();
    match (next.initialized, measurement) {
        (false, Some(m)) => next.initialize(m),
        (false, None) => {}
        (true, m) => {
            if dt > 0.0 {
                next.predict(dt);
            }
            if let Some(m) = m {
                next.update(m);
            }
        }
    }
    let predicted = next.extrapolate(horizon);
    (next, predicted)
}
