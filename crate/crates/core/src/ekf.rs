//! Fifteen-state error-state EKF: linearized error dynamics, covariance
//! propagation, measurement update and closed-loop correction.
//!
//! Error-state conventions (these fix every sign in `F`, `H` and injection):
//!
//! * `dp`, `dv`: estimate minus truth, NED meters and m/s.
//! * `phi`: body-frame misalignment with `R_est = R_true (I + [phi x])`.
//! * `b_a`, `b_g`: residual biases left in the corrected IMU output, so the
//!   true specific force is `f_corrected - b_a` (truth minus estimate).
//!
//! Under these conventions the acceleration-measurement Jacobian is exactly
//! `[0 0 R[f x] -R 0]` and the velocity row of `F` couples to `b_a` through `+R`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Matrix3, OMatrix, Rotation3, SMatrix, SVector, Vector3, U15};

use crate::error::{Error, Result};
use crate::geodesy::{local_ned_to_llh, skew, EarthParams, WGS84};
use crate::strapdown::{propagate, ImuSample, NavState, MAX_STEP};

pub const STATE_DIM: usize = 15;
pub const NOISE_DIM: usize = 12;

pub type Matrix15 = SMatrix<f64, 15, 15>;
pub type Vector15 = SVector<f64, 15>;
pub type Matrix15x12 = SMatrix<f64, 15, 12>;

/// Block offsets inside the error state.
pub const POS: usize = 0;
pub const VEL: usize = 3;
pub const ATT: usize = 6;
pub const ACC_BIAS: usize = 9;
pub const GYRO_BIAS: usize = 12;

/// Relative PSD tolerance: eigenvalues may dip to `-PSD_TOLERANCE * trace`.
pub const PSD_TOLERANCE: f64 = 1e-9;

/// Innovation covariances with a larger condition number are rejected.
pub const MAX_INNOVATION_CONDITION: f64 = 1e12;

/// Injection refuses misalignment corrections larger than this (rad).
pub const MAX_MISALIGNMENT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub misalignment: Vector3<f64>,
    pub accel_bias: Vector3<f64>,
    pub gyro_bias: Vector3<f64>,
}

impl ErrorState {
    pub fn from_vector(x: &Vector15) -> Self {
        let block = |i: usize| x.fixed_rows::<3>(i).into_owned();
        Self {
            position: block(POS),
            velocity: block(VEL),
            misalignment: block(ATT),
            accel_bias: block(ACC_BIAS),
            gyro_bias: block(GYRO_BIAS),
        }
    }

    pub fn to_vector(&self) -> Vector15 {
        let mut x = Vector15::zeros();
        x.fixed_rows_mut::<3>(POS).copy_from(&self.position);
        x.fixed_rows_mut::<3>(VEL).copy_from(&self.velocity);
        x.fixed_rows_mut::<3>(ATT).copy_from(&self.misalignment);
        x.fixed_rows_mut::<3>(ACC_BIAS).copy_from(&self.accel_bias);
        x.fixed_rows_mut::<3>(GYRO_BIAS).copy_from(&self.gyro_bias);
        x
    }
}

/// Symmetric positive semi-definite 15x15 error covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Covariance15(Matrix15);

impl Covariance15 {
    /// Symmetrizes `m` and checks it is positive semi-definite.
    pub fn new(m: Matrix15) -> Result<Self> {
        let p = symmetrize(&m);
        check_psd(&p)?;
        Ok(Self(p))
    }

    pub fn from_diagonal(diag: &Vector15) -> Result<Self> {
        Self::new(Matrix15::from_diagonal(diag))
    }

    pub fn matrix(&self) -> &Matrix15 {
        &self.0
    }

    pub fn std_devs(&self) -> Vector15 {
        self.0.diagonal().map(|v| v.max(0.0).sqrt())
    }
}

pub fn symmetrize(m: &Matrix15) -> Matrix15 {
    (m + m.transpose()) * 0.5
}

/// Cheap PSD test: `P + tol * trace * I` must admit a Cholesky factorization,
/// which holds iff the smallest eigenvalue exceeds `-tol * trace`.
fn check_psd(p: &Matrix15) -> Result<()> {
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveSemiDefinite);
    }
    let trace = p.trace();
    if trace < 0.0 {
        return Err(Error::NotPositiveSemiDefinite);
    }
    let shift = PSD_TOLERANCE * trace.max(f64::MIN_POSITIVE);
    let shifted = p + Matrix15::identity() * shift;
    if Cholesky::new(shifted).is_none() {
        return Err(Error::NotPositiveSemiDefinite);
    }
    Ok(())
}

/// White-noise and bias random-walk densities (per axis, SI units per sqrt(Hz)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessNoiseParams {
    /// m/s^2/sqrt(Hz)
    pub accel_noise: Vector3<f64>,
    /// rad/s/sqrt(Hz)
    pub gyro_noise: Vector3<f64>,
    /// m/s^3/sqrt(Hz)
    pub accel_bias_walk: Vector3<f64>,
    /// rad/s^2/sqrt(Hz)
    pub gyro_bias_walk: Vector3<f64>,
}

impl ProcessNoiseParams {
    pub fn isotropic(accel: f64, gyro: f64, accel_walk: f64, gyro_walk: f64) -> Self {
        Self {
            accel_noise: Vector3::repeat(accel),
            gyro_noise: Vector3::repeat(gyro),
            accel_bias_walk: Vector3::repeat(accel_walk),
            gyro_bias_walk: Vector3::repeat(gyro_walk),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.accel_noise,
            self.gyro_noise,
            self.accel_bias_walk,
            self.gyro_bias_walk,
        ];
        if all.iter().flat_map(|v| v.iter()).all(|d| d.is_finite() && *d >= 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidInput("noise densities must be non-negative".into()))
        }
    }

    /// Diagonal of the 12x12 spectral-density matrix.
    pub fn spectral_densities(&self) -> SVector<f64, 12> {
        let mut w = SVector::<f64, 12>::zeros();
        for (i, v) in [
            self.accel_noise,
            self.gyro_noise,
            self.accel_bias_walk,
            self.gyro_bias_walk,
        ]
        .iter()
        .enumerate()
        {
            w.fixed_rows_mut::<3>(3 * i).copy_from(&v.map(|d| d * d));
        }
        w
    }
}

/// Linear measurement: residual, Jacobian (k x 15) and noise covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub residual: DVector<f64>,
    pub jacobian: OMatrix<f64, Dyn, U15>,
    pub noise: DMatrix<f64>,
}

impl Measurement {
    pub fn new(residual: DVector<f64>, jacobian: OMatrix<f64, Dyn, U15>, noise: DMatrix<f64>) -> Result<Self> {
        let k = residual.len();
        if k == 0 {
            return Err(Error::Empty("measurement"));
        }
        if jacobian.nrows() != k || noise.nrows() != k || noise.ncols() != k {
            return Err(Error::DimensionMismatch(format!(
                "residual {k}, jacobian {}x15, noise {}x{}",
                jacobian.nrows(),
                noise.nrows(),
                noise.ncols()
            )));
        }
        if (&noise - noise.transpose()).amax() > 1e-12 * noise.amax().max(1.0) {
            return Err(Error::InvalidInput("measurement noise is not symmetric".into()));
        }
        if noise.clone().cholesky().is_none() {
            return Err(Error::InvalidInput("measurement noise is not positive definite".into()));
        }
        Ok(Self {
            residual,
            jacobian,
            noise,
        })
    }

    pub fn dim(&self) -> usize {
        self.residual.len()
    }
}

/// Continuous-time error dynamics matrix for the current estimate and
/// bias-corrected IMU output.
pub fn build_f(state: &NavState, specific_force: &Vector3<f64>, angular_rate: &Vector3<f64>) -> Result<Matrix15> {
    build_f_with(&WGS84, state, specific_force, angular_rate)
}

pub fn build_f_with(
    earth: &EarthParams,
    state: &NavState,
    specific_force: &Vector3<f64>,
    angular_rate: &Vector3<f64>,
) -> Result<Matrix15> {
    let pos = &state.position;
    let v = state.velocity;
    let r = *state.attitude.matrix();
    let lat = pos.latitude;
    let (rm, rn) = earth.radii_of_curvature(lat)?;
    let (rm_h, rn_h) = (rm + pos.height, rn + pos.height);
    let w_ie = earth.earth_rate_ned(lat)?;
    let w_en = earth.transport_rate_ned(&v, pos)?;
    let g = earth.gravity_ned(lat, pos.height)?.z;

    // d(w_en)/d(v)
    let dwen_dv = Matrix3::new(0.0, 1.0 / rn_h, 0.0, -1.0 / rm_h, 0.0, 0.0, 0.0, -lat.tan() / rn_h, 0.0);
    // d(w_ie + w_en)/d(dp), with dp in NED meters (north -> latitude, down -> -height).
    let sec2 = 1.0 / lat.cos().powi(2);
    let mut dwin_dp = Matrix3::zeros();
    dwin_dp[(0, 0)] = -earth.rotation_rate * lat.sin() / rm_h;
    dwin_dp[(2, 0)] = (-earth.rotation_rate * lat.cos() - v.y * sec2 / rn_h) / rm_h;
    dwin_dp[(0, 2)] = v.y / (rn_h * rn_h);
    dwin_dp[(1, 2)] = -v.x / (rm_h * rm_h);
    dwin_dp[(2, 2)] = -v.y * lat.tan() / (rn_h * rn_h);

    let mut f = Matrix15::zeros();
    // position
    f.fixed_view_mut::<3, 3>(POS, POS).copy_from(&(-skew(&w_en)));
    f.fixed_view_mut::<3, 3>(POS, VEL).copy_from(&Matrix3::identity());
    // velocity
    let mut f_vp = Matrix3::zeros();
    f_vp[(2, 2)] = 2.0 * g / ((rm * rn).sqrt() + pos.height);
    f.fixed_view_mut::<3, 3>(VEL, POS).copy_from(&f_vp);
    f.fixed_view_mut::<3, 3>(VEL, VEL)
        .copy_from(&(-skew(&(2.0 * w_ie + w_en)) + skew(&v) * dwen_dv));
    f.fixed_view_mut::<3, 3>(VEL, ATT)
        .copy_from(&(-r * skew(specific_force)));
    f.fixed_view_mut::<3, 3>(VEL, ACC_BIAS).copy_from(&r);
    // attitude
    let r_t = r.transpose();
    f.fixed_view_mut::<3, 3>(ATT, POS).copy_from(&(-r_t * dwin_dp));
    f.fixed_view_mut::<3, 3>(ATT, VEL).copy_from(&(-r_t * dwen_dv));
    f.fixed_view_mut::<3, 3>(ATT, ATT).copy_from(&(-skew(angular_rate)));
    f.fixed_view_mut::<3, 3>(ATT, GYRO_BIAS).copy_from(&Matrix3::identity());
    Ok(f)
}

/// Noise shaping matrix mapping `[w_a, w_g, w_ab, w_gb]` into the error state.
pub fn build_g(state: &NavState) -> Matrix15x12 {
    let mut g = Matrix15x12::zeros();
    g.fixed_view_mut::<3, 3>(VEL, 0).copy_from(state.attitude.matrix());
    // The misalignment is resolved in the body frame, where gyro noise enters directly.
    g.fixed_view_mut::<3, 3>(ATT, 3).copy_from(&Matrix3::identity());
    g.fixed_view_mut::<3, 3>(ACC_BIAS, 6).copy_from(&Matrix3::identity());
    g.fixed_view_mut::<3, 3>(GYRO_BIAS, 9).copy_from(&Matrix3::identity());
    g
}

/// First-order transition matrix `I + F dt`.
pub fn discretize(f: &Matrix15, dt: f64) -> Result<Matrix15> {
    if !(dt > 0.0) {
        return Err(Error::InvalidTimeStep(dt));
    }
    Ok(Matrix15::identity() + f * dt)
}

/// `Q = G W G^T dt`.
pub fn build_q(g: &Matrix15x12, params: &ProcessNoiseParams, dt: f64) -> Result<Matrix15> {
    if !(dt > 0.0) {
        return Err(Error::InvalidTimeStep(dt));
    }
    let w = SMatrix::<f64, 12, 12>::from_diagonal(&params.spectral_densities());
    Ok(symmetrize(&(g * w * g.transpose() * dt)))
}

/// `P- = Phi P Phi^T + Q`, symmetrized and checked for PSD.
pub fn predict(p: &Covariance15, phi: &Matrix15, q: &Matrix15) -> Result<Covariance15> {
    let next = symmetrize(&(phi * p.0 * phi.transpose() + q));
    check_psd(&next)?;
    Ok(Covariance15(next))
}

/// Result of a measurement update.
#[derive(Debug, Clone)]
pub struct UpdateOutcome {
    pub correction: ErrorState,
    pub covariance: Covariance15,
    pub gain: OMatrix<f64, U15, Dyn>,
}

/// Kalman gain, updated covariance and error-state correction.
pub fn update(p_minus: &Covariance15, meas: &Measurement) -> Result<UpdateOutcome> {
    let p = &p_minus.0;
    let h = &meas.jacobian;
    let ph_t: OMatrix<f64, U15, Dyn> = p * h.transpose();
    let s: DMatrix<f64> = h * &ph_t + &meas.noise;
    let s = (&s + s.transpose()) * 0.5;

    let sv = s.clone().singular_values();
    let (max, min) = (sv.max(), sv.min());
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= MAX_INNOVATION_CONDITION) {
        return Err(Error::SingularInnovation(condition));
    }

    // K^T = S^-1 (P H^T)^T, solved without forming S^-1.
    let ph_t_t = ph_t.transpose();
    let k_t = match s.clone().cholesky() {
        Some(chol) => chol.solve(&ph_t_t),
        None => s
            .clone()
            .lu()
            .solve(&ph_t_t)
            .ok_or(Error::SingularInnovation(condition))?,
    };
    let gain: OMatrix<f64, U15, Dyn> = k_t.transpose();
    let kh: Matrix15 = &gain * h;
    let p_plus = symmetrize(&((Matrix15::identity() - kh) * p));
    check_psd(&p_plus)?;
    let dx: Vector15 = &gain * &meas.residual;
    Ok(UpdateOutcome {
        correction: ErrorState::from_vector(&dx),
        covariance: Covariance15(p_plus),
        gain,
    })
}

/// Accumulated IMU bias estimates, subtracted from raw samples.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ImuBiases {
    pub accel: Vector3<f64>,
    pub gyro: Vector3<f64>,
}

impl ImuBiases {
    pub fn correct(&self, raw: &ImuSample) -> ImuSample {
        ImuSample {
            timestamp: raw.timestamp,
            specific_force: raw.specific_force - self.accel,
            angular_rate: raw.angular_rate - self.gyro,
        }
    }
}

/// Applies an estimated error state to the navigation solution and biases.
/// The error state is implicitly reset to zero afterwards.
pub fn inject_and_reset(state: &NavState, biases: &ImuBiases, dx: &ErrorState) -> Result<(NavState, ImuBiases)> {
    let angle = dx.misalignment.norm();
    if !(angle < MAX_MISALIGNMENT) {
        return Err(Error::LargeMisalignment(angle));
    }
    let position = local_ned_to_llh(&state.position, &(-dx.position))?;
    let velocity = state.velocity - dx.velocity;
    let attitude = crate::geodesy::orthonormalize((state.attitude * Rotation3::new(-dx.misalignment)).matrix());
    let corrected = NavState {
        position,
        velocity,
        attitude,
        timestamp: state.timestamp,
    };
    let biases = ImuBiases {
        accel: biases.accel + dx.accel_bias,
        gyro: biases.gyro + dx.gyro_bias,
    };
    Ok((corrected, biases))
}

/// A running filter: navigation solution, error covariance and bias estimates.
#[derive(Debug, Clone)]
pub struct NavFilter {
    pub nav: NavState,
    pub covariance: Covariance15,
    pub biases: ImuBiases,
    pub noise: ProcessNoiseParams,
    last_imu: Option<ImuSample>,
}

impl NavFilter {
    pub fn new(nav: NavState, covariance: Covariance15, noise: ProcessNoiseParams) -> Result<Self> {
        noise.validate()?;
        nav.check_attitude()?;
        Ok(Self {
            nav,
            covariance,
            biases: ImuBiases::default(),
            noise,
            last_imu: None,
        })
    }

    /// Bias-corrected IMU sample most recently used for propagation.
    pub fn last_corrected_imu(&self) -> Option<&ImuSample> {
        self.last_imu.as_ref()
    }

    /// Propagates the navigation state and covariance to the sample time.
    /// Intervals longer than [`MAX_STEP`] are split into equal sub-steps with
    /// the sample held constant.
    pub fn propagate(&mut self, raw: &ImuSample) -> Result<()> {
        let total = raw.timestamp - self.nav.timestamp;
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidTimeStep(total));
        }
        let steps = (total / MAX_STEP).ceil().max(1.0) as usize;
        let dt = total / steps as f64;
        let imu = self.biases.correct(raw);
        for k in 1..=steps {
            let f = build_f(&self.nav, &imu.specific_force, &imu.angular_rate)?;
            let phi = discretize(&f, dt)?;
            let q = build_q(&build_g(&self.nav), &self.noise, dt)?;
            let nav = propagate(&self.nav, &imu, dt)?;
            self.covariance = predict(&self.covariance, &phi, &q)?;
            let timestamp = if k == steps { raw.timestamp } else { nav.timestamp };
            self.nav = NavState { timestamp, ..nav };
        }
        self.last_imu = Some(imu);
        Ok(())
    }

    /// Runs a measurement update and closed-loop correction.
    pub fn update(&mut self, meas: &Measurement) -> Result<ErrorState> {
        let outcome = update(&self.covariance, meas)?;
        let (nav, biases) = inject_and_reset(&self.nav, &self.biases, &outcome.correction)?;
        self.nav = nav;
        self.biases = biases;
        self.covariance = outcome.covariance;
        Ok(outcome.correction)
    }
}
