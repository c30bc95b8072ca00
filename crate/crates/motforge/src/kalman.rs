//! Constant-velocity Kalman filter over box measurements
//! `(center_x, center_y, aspect, height)`, with Mahalanobis gating.
//!
//! State is the measurement plus its per-frame velocities (8 components).
//! Noise scales with box height; all constants sit in [`KalmanConfig`].

use nalgebra::{Cholesky, SMatrix, SVector};
use thiserror::Error;

use crate::bbox::{measurement_to_bbox, BBox, Measurement};

pub type StateVector = SVector<f64, 8>;
pub type StateCovariance = SMatrix<f64, 8, 8>;

/// Chi-square 95% quantile for 4 degrees of freedom; the default gate on
/// squared Mahalanobis distances.
pub const GATE_CHI2_95_4DOF: f64 = 9.4877;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KalmanError {
    #[error("measurement height must be positive, got {0}")]
    NonPositiveHeight(f64),
    #[error("measurement contains a non-finite component")]
    NonFiniteMeasurement,
    #[error("innovation covariance is not positive definite")]
    SingularInnovation,
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct KalmanConfig {
    /// Position/measurement noise per unit of box height.
    pub std_weight_position: f64,
    /// Velocity process noise per unit of box height.
    pub std_weight_velocity: f64,
    /// Process and initiation noise for the aspect component.
    pub aspect_process_std: f64,
    /// Process and initiation noise for the aspect velocity.
    pub aspect_velocity_std: f64,
    /// Measurement noise for the aspect component.
    pub aspect_measurement_std: f64,
    /// Added to every noise diagonal to keep innovations invertible.
    pub noise_floor: f64,
}

impl Default for KalmanConfig {
    fn default() -> Self {
        Self {
            std_weight_position: 1.0 / 20.0,
            std_weight_velocity: 1.0 / 160.0,
            aspect_process_std: 1e-2,
            aspect_velocity_std: 1e-5,
            aspect_measurement_std: 1e-1,
            noise_floor: 1e-9,
        }
    }
}

/// Filter state of one track: mean and covariance of
/// `(cx, cy, aspect, height, vcx, vcy, vaspect, vheight)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    mean: StateVector,
    covariance: StateCovariance,
}

impl KalmanState {
    pub fn mean(&self) -> &StateVector {
        &self.mean
    }

    pub fn covariance(&self) -> &StateCovariance {
        &self.covariance
    }

    pub fn to_measurement(&self) -> Measurement {
        [self.mean[0], self.mean[1], self.mean[2], self.mean[3]]
    }

    /// The state as a box; `None` when the mean has degenerated to a
    /// non-positive aspect or height (possible after long coasting).
    pub fn to_bbox(&self) -> Option<BBox> {
        measurement_to_bbox(&self.to_measurement()).ok()
    }

    pub fn covariance_trace(&self) -> f64 {
        self.covariance.trace()
    }

    pub fn covariance_max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..8 {
            for j in (i + 1)..8 {
                worst = worst.max((self.covariance[(i, j)] - self.covariance[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn covariance_min_eigenvalue(&self) -> f64 {
        let sym = (self.covariance + self.covariance.transpose()) * 0.5;
        sym.symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |acc, &e| acc.min(e))
    }
}

#[derive(Debug, Clone, Default)]
pub struct KalmanFilter {
    config: KalmanConfig,
}

impl KalmanFilter {
    pub fn new(config: KalmanConfig) -> Self {
        Self { config }
    }

    pub fn config(&self) -> &KalmanConfig {
        &self.config
    }

    fn motion_matrix() -> StateCovariance {
        let mut f = StateCovariance::identity();
        for i in 0..4 {
            f[(i, i + 4)] = 1.0;
        }
        f
    }

    fn validate(m: &Measurement) -> Result<(), KalmanError> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(KalmanError::NonFiniteMeasurement);
        }
        if m[3] <= 0.0 {
            return Err(KalmanError::NonPositiveHeight(m[3]));
        }
        Ok(())
    }

    /// Height used to scale noise; floored so a degenerated mean cannot
    /// produce zero or negative standard deviations.
    fn noise_height(state_height: f64) -> f64 {
        state_height.max(1e-3)
    }

    pub fn initiate(&self, measurement: &Measurement) -> Result<KalmanState, KalmanError> {
        Self::validate(measurement)?;
        let c = &self.config;
        let h = measurement[3];
        let mean = StateVector::from_column_slice(&[
            measurement[0],
            measurement[1],
            measurement[2],
            measurement[3],
            0.0,
            0.0,
            0.0,
            0.0,
        ]);
        let stds = [
            2.0 * c.std_weight_position * h,
            2.0 * c.std_weight_position * h,
            c.aspect_process_std,
            2.0 * c.std_weight_position * h,
            10.0 * c.std_weight_velocity * h,
            10.0 * c.std_weight_velocity * h,
            c.aspect_velocity_std,
            10.0 * c.std_weight_velocity * h,
        ];
        let mut covariance = StateCovariance::zeros();
        for (i, s) in stds.iter().enumerate() {
            covariance[(i, i)] = s * s + c.noise_floor;
        }
        Ok(KalmanState { mean, covariance })
    }

    pub fn predict(&self, state: &KalmanState) -> KalmanState {
        let c = &self.config;
        let h = Self::noise_height(state.mean[3]);
        let stds = [
            c.std_weight_position * h,
            c.std_weight_position * h,
            c.aspect_process_std,
            c.std_weight_position * h,
            c.std_weight_velocity * h,
            c.std_weight_velocity * h,
            c.aspect_velocity_std,
            c.std_weight_velocity * h,
        ];
        let f = Self::motion_matrix();
        let mean = f * state.mean;
        let mut covariance = f * state.covariance * f.transpose();
        for (i, s) in stds.iter().enumerate() {
            covariance[(i, i)] += s * s + c.noise_floor;
        }
        covariance = (covariance + covariance.transpose()) * 0.5;
        KalmanState { mean, covariance }
    }

    /// Project the state into measurement space: `(H mean, H P Hᵀ + R)`.
    pub fn project(&self, state: &KalmanState) -> (SVector<f64, 4>, SMatrix<f64, 4, 4>) {
        let c = &self.config;
        let h = Self::noise_height(state.mean[3]);
        let stds = [
            c.std_weight_position * h,
            c.std_weight_position * h,
            c.aspect_measurement_std,
            c.std_weight_position * h,
        ];
        let projected_mean = state.mean.fixed_rows::<4>(0).into_owned();
        let mut s = state.covariance.fixed_view::<4, 4>(0, 0).into_owned();
        for (i, sd) in stds.iter().enumerate() {
            s[(i, i)] += sd * sd + c.noise_floor;
        }
        (projected_mean, s)
    }

    pub fn update(
        &self,
        state: &KalmanState,
        measurement: &Measurement,
    ) -> Result<KalmanState, KalmanError> {
        Self::validate(measurement)?;
        let (projected_mean, s) = self.project(state);
        let chol = Cholesky::new(s).ok_or(KalmanError::SingularInnovation)?;

        // K = P Hᵀ S⁻¹; H selects the first four state rows.
        let ph_t = state.covariance.fixed_columns::<4>(0).into_owned(); // 8x4
        let gain = chol.solve(&ph_t.transpose()).transpose(); // 8x4

        let z = SVector::<f64, 4>::from_column_slice(measurement);
        let innovation = z - projected_mean;
        let mean = state.mean + gain * innovation;

        // P - K S Kᵀ, computed as P - (K L)(K L)ᵀ so the subtracted term is
        // PSD by construction and the trace can never grow.
        let m = gain * chol.l();
        let mut covariance = state.covariance - m * m.transpose();
        covariance = (covariance + covariance.transpose()) * 0.5;
        Ok(KalmanState { mean, covariance })
    }

    /// Squared Mahalanobis distance from the state's projected measurement
    /// distribution to each candidate measurement.
    pub fn gating_distance(
        &self,
        state: &KalmanState,
        measurements: &[Measurement],
    ) -> Result<Vec<f64>, KalmanError> {
        let (projected_mean, s) = self.project(state);
        let chol = Cholesky::new(s).ok_or(KalmanError::SingularInnovation)?;
        measurements
            .iter()
            .map(|m| {
                if m.iter().any(|v| !v.is_finite()) {
                    return Err(KalmanError::NonFiniteMeasurement);
                }
                let y = SVector::<f64, 4>::from_column_slice(m) - projected_mean;
                Ok(y.dot(&chol.solve(&y)))
            })
            .collect()
    }
}
