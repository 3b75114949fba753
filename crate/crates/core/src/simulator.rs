//! Reference trajectories and synthetic IMU / GNSS streams.
//!
//! A profile is described analytically by its horizontal speed `s(t)`,
//! heading `psi(t)` and vertical velocity, so velocity and acceleration are
//! exact at every instant. Geodetic position is integrated from the analytic
//! velocity with RK4. IMU samples are obtained by inverting one step of the
//! strapdown mechanization between consecutive truth samples, which makes an
//! error-free IMU reproduce the truth attitude and velocity to rounding.

use std::f64::consts::PI;

use nalgebra::{Rotation3, UnitQuaternion, Vector3};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geodesy::{local_ned_to_llh, GeodeticPosition, NedVector, WGS84};
use crate::gnss_accel::GnssFix;
use crate::strapdown::{ImuSample, NavState};

/// First zero of the Bessel function J0. A heading oscillation of this
/// amplitude closes the figure-eight after one period.
const FIGURE_EIGHT_AMPLITUDE: f64 = 2.404_825_557_695_773;

const IMU_STREAM: u64 = 1;
const GNSS_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfileKind {
    /// Constant heading and speed.
    Straight,
    /// A closed figure-eight traversed once per `period` seconds.
    FigureEight { period: f64 },
    /// Two straights joined by half-circle turns.
    Racetrack { straight_length: f64, turn_radius: f64 },
    /// Repeated smooth ramp-up, cruise, ramp-down and stop. A non-zero
    /// `grade` (rise over run) makes the vehicle climb while it moves.
    StopAndGo {
        ramp_time: f64,
        cruise_time: f64,
        stop_time: f64,
        grade: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryProfile {
    pub kind: ProfileKind,
    /// Horizontal speed (cruise speed for stop-and-go), m/s.
    pub speed: f64,
    /// s
    pub duration: f64,
    pub origin: GeodeticPosition,
    /// Initial heading (the mean heading for the figure-eight), rad.
    pub heading: f64,
}

/// Instantaneous analytic motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Motion {
    pub velocity: NedVector,
    pub accel: NedVector,
    pub heading: f64,
    pub heading_rate: f64,
    pub pitch: f64,
}

impl TrajectoryProfile {
    pub fn new(kind: ProfileKind, speed: f64, duration: f64, origin: GeodeticPosition, heading: f64) -> Result<Self> {
        let profile = Self {
            kind,
            speed,
            duration,
            origin,
            heading,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidInput(format!("profile {what}")));
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad("duration must be positive");
        }
        if !(self.speed >= 0.0 && self.speed.is_finite()) {
            return bad("speed must be non-negative");
        }
        if !self.heading.is_finite() {
            return bad("heading must be finite");
        }
        match self.kind {
            ProfileKind::Straight => {}
            ProfileKind::FigureEight { period } => {
                if !(period > 0.0 && period.is_finite()) {
                    return bad("figure-eight period must be positive");
                }
            }
            ProfileKind::Racetrack {
                straight_length,
                turn_radius,
            } => {
                if !(straight_length >= 0.0 && turn_radius > 0.0)
                    || !straight_length.is_finite()
                    || !turn_radius.is_finite()
                {
                    return bad("racetrack needs a non-negative straight and a positive radius");
                }
            }
            ProfileKind::StopAndGo {
                ramp_time,
                cruise_time,
                stop_time,
                grade,
            } => {
                if !(ramp_time > 0.0 && cruise_time >= 0.0 && stop_time >= 0.0)
                    || !(cruise_time + stop_time).is_finite()
                {
                    return bad("stop-and-go needs a positive ramp and non-negative phases");
                }
                if !(grade.abs() < 1.0) {
                    return bad("grade must lie in (-1, 1)");
                }
            }
        }
        Ok(())
    }

    /// Velocity, acceleration and heading at time `t` from the start.
    pub fn motion(&self, t: f64) -> Motion {
        let v = self.speed;
        let (s, s_dot, psi, psi_dot, grade) = match self.kind {
            ProfileKind::Straight => (v, 0.0, self.heading, 0.0, 0.0),
            ProfileKind::FigureEight { period } => {
                let w = 2.0 * PI / period;
                let c = FIGURE_EIGHT_AMPLITUDE;
                let psi = self.heading - c * (w * t).cos();
                let psi_dot = c * w * (w * t).sin();
                (v, 0.0, psi, psi_dot, 0.0)
            }
            ProfileKind::Racetrack {
                straight_length,
                turn_radius,
            } => {
                if v == 0.0 {
                    (0.0, 0.0, self.heading, 0.0, 0.0)
                } else {
                    let (psi, psi_dot) = racetrack_heading(straight_length, turn_radius, v, t);
                    (v, 0.0, self.heading + psi, psi_dot, 0.0)
                }
            }
            ProfileKind::StopAndGo {
                ramp_time,
                cruise_time,
                stop_time,
                grade,
            } => {
                let (s, s_dot) = stop_and_go_speed(v, ramp_time, cruise_time, stop_time, t);
                (s, s_dot, self.heading, 0.0, grade)
            }
        };
        let (sin, cos) = psi.sin_cos();
        Motion {
            velocity: Vector3::new(s * cos, s * sin, -grade * s),
            accel: Vector3::new(
                s_dot * cos - s * psi_dot * sin,
                s_dot * sin + s * psi_dot * cos,
                -grade * s_dot,
            ),
            heading: psi,
            heading_rate: psi_dot,
            pitch: grade.atan(),
        }
    }

    /// Largest centripetal acceleration over the profile, from its analytic
    /// curvature.
    pub fn max_centripetal_accel(&self) -> f64 {
        match self.kind {
            ProfileKind::Straight | ProfileKind::StopAndGo { .. } => 0.0,
            ProfileKind::FigureEight { period } => self.speed * FIGURE_EIGHT_AMPLITUDE * 2.0 * PI / period,
            ProfileKind::Racetrack { turn_radius, .. } => self.speed * self.speed / turn_radius,
        }
    }
}

impl TrajectoryProfile {
    /// The first instant in `(t0, t1)` where the acceleration is
    /// discontinuous (racetrack straight/turn transitions), if any.
    fn accel_jump_within(&self, t0: f64, t1: f64) -> Option<f64> {
        let ProfileKind::Racetrack {
            straight_length,
            turn_radius,
        } = self.kind
        else {
            return None;
        };
        if self.speed == 0.0 {
            return None;
        }
        let straight = straight_length / self.speed;
        let turn = PI * turn_radius / self.speed;
        let lap = 2.0 * (straight + turn);
        let base = (t0 / lap).floor() * lap;
        [straight, straight + turn, 2.0 * straight + turn, lap, lap + straight]
            .into_iter()
            .map(|b| base + b)
            .find(|b| *b > t0 && *b < t1)
    }
}

/// Heading offset and rate on a racetrack lap starting on a straight.
fn racetrack_heading(length: f64, radius: f64, v: f64, t: f64) -> (f64, f64) {
    let straight = length / v;
    let turn = PI * radius / v;
    let lap = 2.0 * (straight + turn);
    let laps = (t / lap).floor();
    let tau = t - laps * lap;
    let base = 2.0 * PI * laps;
    let rate = v / radius;
    if tau < straight {
        (base, 0.0)
    } else if tau < straight + turn {
        (base + rate * (tau - straight), rate)
    } else if tau < 2.0 * straight + turn {
        (base + PI, 0.0)
    } else {
        (base + PI + rate * (tau - 2.0 * straight - turn), rate)
    }
}

/// Speed and its rate for the stop-and-go cycle; ramps are half cosines.
fn stop_and_go_speed(v: f64, ramp: f64, cruise: f64, stop: f64, t: f64) -> (f64, f64) {
    let cycle = 2.0 * ramp + cruise + stop;
    let tau = t - (t / cycle).floor() * cycle;
    let k = PI / ramp;
    if tau < ramp {
        (0.5 * v * (1.0 - (k * tau).cos()), 0.5 * v * k * (k * tau).sin())
    } else if tau < ramp + cruise {
        (v, 0.0)
    } else if tau < 2.0 * ramp + cruise {
        let u = tau - ramp - cruise;
        (0.5 * v * (1.0 + (k * u).cos()), -0.5 * v * k * (k * u).sin())
    } else {
        (0.0, 0.0)
    }
}

/// One truth epoch: navigation state and the true NED acceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthSample {
    pub state: NavState,
    pub accel: NedVector,
}

/// Samples the profile at `rate` Hz from `t = 0` to `duration` inclusive.
pub fn generate_truth(profile: &TrajectoryProfile, rate: f64) -> Result<Vec<TruthSample>> {
    profile.validate()?;
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::InvalidInput(format!("truth rate {rate}")));
    }
    let dt = 1.0 / rate;
    let steps = (profile.duration * rate + 1e-9).floor() as usize;
    let o = profile.origin;
    let mut y = [o.latitude, o.longitude, o.height];
    let mut out = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = k as f64 * dt;
        if k > 0 {
            let t0 = t - dt;
            y = match profile.accel_jump_within(t0, t) {
                Some(b) => rk4_position(profile, rk4_position(profile, y, t0, b - t0)?, b, t - b)?,
                None => rk4_position(profile, y, t0, dt)?,
            };
        }
        let m = profile.motion(t);
        let attitude = Rotation3::from_euler_angles(0.0, m.pitch, m.heading);
        out.push(TruthSample {
            state: NavState::new(GeodeticPosition::new(y[0], y[1], y[2])?, m.velocity, attitude, t),
            accel: m.accel,
        });
    }
    Ok(out)
}

fn position_rate(profile: &TrajectoryProfile, y: [f64; 3], t: f64) -> Result<[f64; 3]> {
    let v = profile.motion(t).velocity;
    let (rm, rn) = WGS84.radii_of_curvature(y[0])?;
    Ok([v.x / (rm + y[2]), v.y / ((rn + y[2]) * y[0].cos()), -v.z])
}

fn rk4_position(profile: &TrajectoryProfile, y: [f64; 3], t: f64, h: f64) -> Result<[f64; 3]> {
    let add = |a: [f64; 3], b: [f64; 3], s: f64| [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]];
    let k1 = position_rate(profile, y, t)?;
    let k2 = position_rate(profile, add(y, k1, 0.5 * h), t + 0.5 * h)?;
    let k3 = position_rate(profile, add(y, k2, 0.5 * h), t + 0.5 * h)?;
    let k4 = position_rate(profile, add(y, k3, h), t + h)?;
    Ok([0, 1, 2].map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])))
}

/// Constant biases and white noise of an IMU.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuErrorModel {
    /// m/s^2
    pub accel_bias: Vector3<f64>,
    /// rad/s
    pub gyro_bias: Vector3<f64>,
    /// m/s^2/sqrt(Hz)
    pub accel_noise_density: f64,
    /// rad/s/sqrt(Hz)
    pub gyro_noise_density: f64,
    /// Hz
    pub rate: f64,
    pub seed: u64,
}

/// White position noise of a GNSS receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GnssErrorModel {
    /// North, east, down standard deviation, m.
    pub sigma: Vector3<f64>,
    /// Hz
    pub rate: f64,
    pub seed: u64,
}

/// Default sensor error magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensorGrade {
    Consumer,
    Tactical,
}

impl SensorGrade {
    pub fn imu_model(self, rate: f64, seed: u64) -> ImuErrorModel {
        let (ba, bg, na, ng) = match self {
            SensorGrade::Consumer => (0.02, 2e-4, 2e-3, 1e-4),
            SensorGrade::Tactical => (0.002, 2e-5, 5e-4, 1e-5),
        };
        ImuErrorModel {
            accel_bias: Vector3::new(ba, -ba, ba),
            gyro_bias: Vector3::new(bg, -bg, bg),
            accel_noise_density: na,
            gyro_noise_density: ng,
            rate,
            seed,
        }
    }

    pub fn gnss_model(self, rate: f64, seed: u64) -> GnssErrorModel {
        let sigma = match self {
            SensorGrade::Consumer => 1.5,
            SensorGrade::Tactical => 0.5,
        };
        GnssErrorModel {
            sigma: Vector3::repeat(sigma),
            rate,
            seed,
        }
    }
}

impl ImuErrorModel {
    /// A model with no bias and no noise.
    pub fn ideal(rate: f64) -> Self {
        Self {
            accel_bias: Vector3::zeros(),
            gyro_bias: Vector3::zeros(),
            accel_noise_density: 0.0,
            gyro_noise_density: 0.0,
            rate,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self
            .accel_bias
            .iter()
            .chain(self.gyro_bias.iter())
            .all(|b| b.is_finite());
        if !finite
            || !(self.accel_noise_density >= 0.0 && self.accel_noise_density.is_finite())
            || !(self.gyro_noise_density >= 0.0 && self.gyro_noise_density.is_finite())
        {
            return Err(Error::InvalidInput(
                "IMU error model densities must be non-negative".into(),
            ));
        }
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(Error::InvalidInput(format!("IMU rate {}", self.rate)));
        }
        Ok(())
    }
}

impl GnssErrorModel {
    pub fn validate(&self) -> Result<()> {
        if self.sigma.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidInput("GNSS sigma must be positive".into()));
        }
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(Error::InvalidInput(format!("GNSS rate {}", self.rate)));
        }
        Ok(())
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian3(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    Vector3::from_fn(|_, _| StandardNormal.sample(rng))
}

/// Error-free IMU output that carries `from` to `to` in one strapdown step.
pub fn ideal_imu(from: &NavState, to: &NavState) -> Result<ImuSample> {
    let dt = to.timestamp - from.timestamp;
    if !(dt > 0.0) {
        return Err(Error::InvalidTimeStep(dt));
    }
    let pos = &from.position;
    let v0 = from.velocity;
    let w_ie = WGS84.earth_rate_ned(pos.latitude)?;
    let w_en = WGS84.transport_rate_ned(&v0, pos)?;
    let w_in = w_ie + w_en;
    let body = from.attitude.inverse() * Rotation3::new(w_in * dt) * to.attitude;
    let angular_rate = UnitQuaternion::from_rotation_matrix(&body).scaled_axis() / dt;
    let mid = Rotation3::new(-w_in * (0.5 * dt)) * from.attitude * Rotation3::new(angular_rate * (0.5 * dt));
    let gravity = WGS84.gravity_ned(pos.latitude, pos.height)?;
    let accel = (to.velocity - v0) / dt;
    let specific_force = mid.inverse() * (accel - gravity + (w_en + 2.0 * w_ie).cross(&v0));
    Ok(ImuSample::new(to.timestamp, specific_force, angular_rate))
}

/// One IMU sample per truth interval, stamped at the interval end.
pub fn synthesize_imu(truth: &[TruthSample], model: &ImuErrorModel) -> Result<Vec<ImuSample>> {
    model.validate()?;
    let mut rng = stream_rng(model.seed, IMU_STREAM);
    let sd_a = model.accel_noise_density * model.rate.sqrt();
    let sd_g = model.gyro_noise_density * model.rate.sqrt();
    let period = 1.0 / model.rate;
    truth
        .windows(2)
        .map(|pair| {
            let (a, b) = (&pair[0].state, &pair[1].state);
            let dt = b.timestamp - a.timestamp;
            if (dt - period).abs() > 1e-6 * period {
                return Err(Error::InvalidInput(format!(
                    "truth spacing {dt} s does not match the IMU rate {} Hz",
                    model.rate
                )));
            }
            let mut s = ideal_imu(a, b)?;
            s.specific_force += model.accel_bias + gaussian3(&mut rng) * sd_a;
            s.angular_rate += model.gyro_bias + gaussian3(&mut rng) * sd_g;
            Ok(s)
        })
        .collect()
}

/// Noisy fixes at the model rate, starting one period after the first truth
/// epoch. Each fix takes the nearest truth sample's timestamp.
pub fn synthesize_gnss(truth: &[TruthSample], model: &GnssErrorModel) -> Result<Vec<GnssFix>> {
    model.validate()?;
    let (first, last) = match (truth.first(), truth.last()) {
        (Some(f), Some(l)) => (f.state.timestamp, l.state.timestamp),
        _ => return Err(Error::Empty("truth")),
    };
    let mut rng = stream_rng(model.seed, GNSS_STREAM);
    let period = 1.0 / model.rate;
    let mut fixes = Vec::new();
    let mut cursor = 0;
    for j in 1.. {
        let t = first + j as f64 * period;
        if t > last + 1e-9 {
            break;
        }
        while cursor + 1 < truth.len()
            && (truth[cursor + 1].state.timestamp - t).abs() <= (truth[cursor].state.timestamp - t).abs()
        {
            cursor += 1;
        }
        let state = &truth[cursor].state;
        if fixes.last().is_some_and(|f: &GnssFix| f.timestamp >= state.timestamp) {
            continue;
        }
        let noise = gaussian3(&mut rng).component_mul(&model.sigma);
        let position = local_ned_to_llh(&state.position, &noise)?;
        fixes.push(GnssFix::new(state.timestamp, position, model.sigma)?);
    }
    Ok(fixes)
}

/// Truth plus the synthesized sensor streams of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedData {
    pub truth: Vec<TruthSample>,
    pub imu: Vec<ImuSample>,
    pub gnss: Vec<GnssFix>,
}

pub fn simulate(profile: &TrajectoryProfile, imu: &ImuErrorModel, gnss: &GnssErrorModel) -> Result<SimulatedData> {
    let truth = generate_truth(profile, imu.rate)?;
    Ok(SimulatedData {
        imu: synthesize_imu(&truth, imu)?,
        gnss: synthesize_gnss(&truth, gnss)?,
        truth,
    })
}
