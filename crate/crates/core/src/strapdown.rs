//! Strapdown mechanization in the local-level NED frame.
//!
//! Attitude takes an exact exponential-map increment per step (body rate on
//! the right, navigation-frame rate on the left). Velocity is integrated with
//! the specific force rotated through the mid-interval attitude, and position
//! with the mean of the old and new velocity. IMU samples are held constant
//! over each interval.

use nalgebra::{Rotation3, Vector3};

use crate::error::{Error, Result};
use crate::geodesy::{orthonormality_error, orthonormalize, EarthParams, GeodeticPosition, NedVector, WGS84};

/// Largest step accepted by [`propagate`].
pub const MAX_STEP: f64 = 0.1;

/// Tolerance on `R^T R - I` for an attitude to be accepted.
pub const ATTITUDE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavState {
    pub position: GeodeticPosition,
    pub velocity: NedVector,
    /// Body-to-NED rotation.
    pub attitude: Rotation3<f64>,
    pub timestamp: f64,
}

impl NavState {
    pub fn new(position: GeodeticPosition, velocity: NedVector, attitude: Rotation3<f64>, timestamp: f64) -> Self {
        Self {
            position,
            velocity,
            attitude,
            timestamp,
        }
    }

    /// Roll, pitch and yaw of the attitude (radians).
    pub fn euler_angles(&self) -> (f64, f64, f64) {
        self.attitude.euler_angles()
    }

    pub fn check_attitude(&self) -> Result<()> {
        let err = orthonormality_error(self.attitude.matrix());
        let det = self.attitude.matrix().determinant();
        if err > ATTITUDE_TOLERANCE || (det - 1.0).abs() > ATTITUDE_TOLERANCE || !err.is_finite() {
            return Err(Error::NotOrthonormal(err));
        }
        Ok(())
    }
}

/// Specific force and angular rate in the body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    pub timestamp: f64,
    /// m/s^2
    pub specific_force: Vector3<f64>,
    /// rad/s
    pub angular_rate: Vector3<f64>,
}

impl ImuSample {
    pub fn new(timestamp: f64, specific_force: Vector3<f64>, angular_rate: Vector3<f64>) -> Self {
        Self {
            timestamp,
            specific_force,
            angular_rate,
        }
    }
}

/// Advances `state` by `dt` seconds using the (bias-corrected) IMU sample.
pub fn propagate(state: &NavState, imu: &ImuSample, dt: f64) -> Result<NavState> {
    if !(dt > 0.0 && dt <= MAX_STEP) {
        return Err(Error::InvalidTimeStep(dt));
    }
    state.check_attitude()?;
    step(&WGS84, state, imu, dt)
}

/// Applies the body-rate and navigation-rate rotations over `dt`:
/// `R' = exp(-[w_nav x] dt) R exp([w_body x] dt)`.
pub fn integrate_attitude(
    attitude: &Rotation3<f64>,
    body_rate: &Vector3<f64>,
    nav_rate: &Vector3<f64>,
    dt: f64,
) -> Result<Rotation3<f64>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidTimeStep(dt));
    }
    Ok(rotate(attitude, body_rate, nav_rate, dt))
}

fn rotate(attitude: &Rotation3<f64>, body_rate: &Vector3<f64>, nav_rate: &Vector3<f64>, dt: f64) -> Rotation3<f64> {
    let body = Rotation3::new(body_rate * dt);
    let nav = Rotation3::new(-nav_rate * dt);
    orthonormalize((nav * attitude * body).matrix())
}

/// One integration step; `dt` may be negative (used to check time symmetry).
pub(crate) fn step(earth: &EarthParams, state: &NavState, imu: &ImuSample, dt: f64) -> Result<NavState> {
    let pos = &state.position;
    let v0 = state.velocity;
    let (rm, _) = earth.radii_of_curvature(pos.latitude)?;
    let w_ie = earth.earth_rate_ned(pos.latitude)?;
    let w_en = earth.transport_rate_ned(&v0, pos)?;
    let w_in = w_ie + w_en;

    let attitude = rotate(&state.attitude, &imu.angular_rate, &w_in, dt);
    let mid = Rotation3::new(-w_in * (0.5 * dt)) * state.attitude * Rotation3::new(imu.angular_rate * (0.5 * dt));

    let gravity = earth.gravity_ned(pos.latitude, pos.height)?;
    let accel = mid * imu.specific_force + gravity - (w_en + 2.0 * w_ie).cross(&v0);
    let v1 = v0 + accel * dt;
    let v_mean = 0.5 * (v0 + v1);

    let h1 = pos.height - v_mean.z * dt;
    let h_mid = 0.5 * (pos.height + h1);
    let lat1 = pos.latitude + v_mean.x * dt / (rm + h_mid);
    let lat_mid = 0.5 * (pos.latitude + lat1);
    let (_, rn_mid) = earth.radii_of_curvature(lat_mid)?;
    let lon1 = pos.longitude + v_mean.y * dt / ((rn_mid + h_mid) * lat_mid.cos());

    Ok(NavState {
        position: GeodeticPosition::new(lat1, lon1, h1)?,
        velocity: v1,
        attitude,
        timestamp: state.timestamp + dt,
    })
}
