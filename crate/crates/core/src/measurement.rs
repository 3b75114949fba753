//! Position and GNSS-acceleration measurement models.
//!
//! Both residuals are linear in the error state as `dz = H dx` under the
//! conventions documented in [`crate::ekf`]. For position that is estimate
//! minus fix; for acceleration it is GNSS acceleration minus the INS-predicted
//! acceleration, which is the sign that makes `[0 0 R[f x] -R 0]` the exact
//! Jacobian.

use nalgebra::{DMatrix, DVector, Dyn, Matrix3, OMatrix, SMatrix, Vector3, U15};

use crate::ekf::{Measurement, ACC_BIAS, ATT, POS};
use crate::error::{Error, Result};
use crate::geodesy::{gravity_ned, llh_to_local_ned, skew, NedVector};
use crate::gnss_accel::{AccelEstimate, GnssFix};
use crate::strapdown::NavState;

pub type Jacobian3x15 = SMatrix<f64, 3, 15>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionMeasurement {
    pub residual: Vector3<f64>,
    pub jacobian: Jacobian3x15,
    pub noise: Matrix3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccelMeasurement {
    pub residual: Vector3<f64>,
    pub jacobian: Jacobian3x15,
    pub noise: Matrix3<f64>,
}

fn to_dynamic(residual: &Vector3<f64>, jacobian: &Jacobian3x15, noise: &Matrix3<f64>) -> Result<Measurement> {
    Measurement::new(
        DVector::from_column_slice(residual.as_slice()),
        OMatrix::<f64, Dyn, U15>::from_row_iterator(3, jacobian.transpose().iter().copied()),
        DMatrix::from_column_slice(3, 3, noise.as_slice()),
    )
}

impl PositionMeasurement {
    pub fn to_measurement(&self) -> Result<Measurement> {
        to_dynamic(&self.residual, &self.jacobian, &self.noise)
    }
}

impl AccelMeasurement {
    pub fn to_measurement(&self) -> Result<Measurement> {
        to_dynamic(&self.residual, &self.jacobian, &self.noise)
    }
}

/// INS-predicted navigation-frame acceleration `R f + g`.
///
/// Coriolis and transport terms are left out; at ground-vehicle speeds they
/// stay below 0.01 m/s^2.
pub fn predict_accel_ned(state: &NavState, specific_force: &Vector3<f64>) -> Result<NedVector> {
    let g = gravity_ned(state.position.latitude, state.position.height)?;
    Ok(state.attitude * specific_force + g)
}

/// `H_a = [0 0 R[f x] -R 0]`.
pub fn accel_jacobian(state: &NavState, specific_force: &Vector3<f64>) -> Jacobian3x15 {
    let r = state.attitude.matrix();
    let mut h = Jacobian3x15::zeros();
    h.fixed_view_mut::<3, 3>(0, ATT).copy_from(&(r * skew(specific_force)));
    h.fixed_view_mut::<3, 3>(0, ACC_BIAS).copy_from(&(-r));
    h
}

pub fn position_jacobian() -> Jacobian3x15 {
    let mut h = Jacobian3x15::zeros();
    h.fixed_view_mut::<3, 3>(0, POS).copy_from(&Matrix3::identity());
    h
}

/// Acceleration residual `a_gnss - (R f + g)` with its Jacobian and noise.
pub fn accel_residual(
    state: &NavState,
    specific_force: &Vector3<f64>,
    est: &AccelEstimate,
) -> Result<AccelMeasurement> {
    if est.accel.iter().chain(est.noise_cov.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite acceleration estimate".into()));
    }
    let predicted = predict_accel_ned(state, specific_force)?;
    Ok(AccelMeasurement {
        residual: est.accel - predicted,
        jacobian: accel_jacobian(state, specific_force),
        noise: est.noise_cov,
    })
}

/// Position residual: estimate minus fix, in NED meters about the fix.
pub fn position_residual(state: &NavState, fix: &GnssFix) -> Result<PositionMeasurement> {
    let residual = llh_to_local_ned(&fix.position, &state.position)?;
    Ok(PositionMeasurement {
        residual,
        jacobian: position_jacobian(),
        noise: Matrix3::from_diagonal(&fix.sigma.component_mul(&fix.sigma)),
    })
}

/// Stacks measurements vertically with block-diagonal noise (cross terms zero).
pub fn stack(measurements: &[Measurement]) -> Result<Measurement> {
    if measurements.is_empty() {
        return Err(Error::Empty("measurement list"));
    }
    let k: usize = measurements.iter().map(Measurement::dim).sum();
    let mut residual = DVector::zeros(k);
    let mut jacobian = OMatrix::<f64, Dyn, U15>::zeros(k);
    let mut noise = DMatrix::zeros(k, k);
    let mut row = 0;
    for m in measurements {
        let d = m.dim();
        residual.rows_mut(row, d).copy_from(&m.residual);
        jacobian.rows_mut(row, d).copy_from(&m.jacobian);
        noise.view_mut((row, row), (d, d)).copy_from(&m.noise);
        row += d;
    }
    Measurement::new(residual, jacobian, noise)
}
