//! Run configuration as a flat `key = value` text file.
//!
//! Omitted keys take their defaults, unknown keys are rejected, and every
//! value is validated with an error naming the offending field. Three-vectors
//! are written as `x, y, z`; a single number sets all three components.
//! `sensor_grade` is applied first, as a preset for the sensor error keys,
//! wherever it appears in the file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::Vector3;

use crate::ekf::{Covariance15, ProcessNoiseParams, Vector15};
use crate::error::{Error, Result};
use crate::geodesy::GeodeticPosition;
use crate::simulator::{GnssErrorModel, ImuErrorModel, ProfileKind, SensorGrade, TrajectoryProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileName {
    Straight,
    FigureEight,
    Racetrack,
    StopAndGo,
}

impl ProfileName {
    pub const ALL: [ProfileName; 4] = [
        ProfileName::Straight,
        ProfileName::FigureEight,
        ProfileName::Racetrack,
        ProfileName::StopAndGo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProfileName::Straight => "straight",
            ProfileName::FigureEight => "figure8",
            ProfileName::Racetrack => "racetrack",
            ProfileName::StopAndGo => "stop_and_go",
        }
    }
}

impl FromStr for ProfileName {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("expected one of straight, figure8, racetrack, stop_and_go; found '{s}'"))
    }
}

/// How the filter's initial navigation state is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// The true state at the first epoch (simulation only).
    Truth,
    /// `init_*` keys.
    Config,
    /// Position of the first GNSS fix; velocity and attitude from `init_*`.
    FirstFix,
}

impl InitMode {
    fn name(self) -> &'static str {
        match self {
            InitMode::Truth => "truth",
            InitMode::Config => "config",
            InitMode::FirstFix => "first_fix",
        }
    }
}

impl FromStr for InitMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [InitMode::Truth, InitMode::Config, InitMode::FirstFix]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("expected truth, config or first_fix; found '{s}'"))
    }
}

/// Epochs at which estimates are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalEpochs {
    Gnss,
    Imu,
}

impl FromStr for EvalEpochs {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gnss" => Ok(EvalEpochs::Gnss),
            "imu" => Ok(EvalEpochs::Imu),
            _ => Err(format!("expected gnss or imu; found '{s}'")),
        }
    }
}

impl fmt::Display for EvalEpochs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalEpochs::Gnss => "gnss",
            EvalEpochs::Imu => "imu",
        })
    }
}

fn grade_name(g: SensorGrade) -> &'static str {
    match g {
        SensorGrade::Consumer => "consumer",
        SensorGrade::Tactical => "tactical",
    }
}

fn parse_grade(s: &str) -> std::result::Result<SensorGrade, String> {
    match s {
        "consumer" => Ok(SensorGrade::Consumer),
        "tactical" => Ok(SensorGrade::Tactical),
        _ => Err(format!("expected consumer or tactical; found '{s}'")),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: String,

    pub profile: ProfileName,
    pub speed: f64,
    pub duration: f64,
    pub origin_lat_deg: f64,
    pub origin_lon_deg: f64,
    pub origin_height: f64,
    pub heading_deg: f64,
    pub figure8_period: f64,
    pub racetrack_straight: f64,
    pub racetrack_radius: f64,
    pub stop_ramp: f64,
    pub stop_cruise: f64,
    pub stop_pause: f64,
    pub stop_grade: f64,

    pub sensor_grade: SensorGrade,
    pub imu_rate: f64,
    pub gnss_rate: f64,
    pub accel_bias: Vector3<f64>,
    pub gyro_bias: Vector3<f64>,
    pub accel_noise_density: f64,
    pub gyro_noise_density: f64,
    pub gnss_sigma: Vector3<f64>,
    pub seed: u64,
    pub repetitions: usize,

    pub window_fixes: usize,
    pub window_min_span: f64,
    pub accel_update: bool,
    pub p0_position_var: f64,
    pub p0_velocity_var: f64,
    pub p0_attitude_var: f64,
    pub p0_accel_bias_var: f64,
    pub p0_gyro_bias_var: f64,
    pub q_accel_noise: f64,
    pub q_gyro_noise: f64,
    pub q_accel_bias_walk: f64,
    pub q_gyro_bias_walk: f64,
    pub r_position_scale: f64,
    pub r_accel_scale: f64,

    pub init: InitMode,
    pub init_lat_deg: f64,
    pub init_lon_deg: f64,
    pub init_height: f64,
    pub init_velocity: Vector3<f64>,
    pub init_rpy_deg: Vector3<f64>,
    pub init_time: f64,
    pub eval_epochs: EvalEpochs,
    pub dataset_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let imu = SensorGrade::Consumer.imu_model(100.0, 0);
        let gnss = SensorGrade::Consumer.gnss_model(1.0, 0);
        Self {
            scenario: "default".into(),
            profile: ProfileName::FigureEight,
            speed: 5.0,
            duration: 300.0,
            origin_lat_deg: 32.0,
            origin_lon_deg: 34.8,
            origin_height: 30.0,
            heading_deg: 0.0,
            figure8_period: 60.0,
            racetrack_straight: 100.0,
            racetrack_radius: 20.0,
            stop_ramp: 4.0,
            stop_cruise: 20.0,
            stop_pause: 5.0,
            stop_grade: 0.0,
            sensor_grade: SensorGrade::Consumer,
            imu_rate: 100.0,
            gnss_rate: 1.0,
            accel_bias: imu.accel_bias,
            gyro_bias: imu.gyro_bias,
            accel_noise_density: imu.accel_noise_density,
            gyro_noise_density: imu.gyro_noise_density,
            gnss_sigma: gnss.sigma,
            seed: 1,
            repetitions: 1,
            window_fixes: 3,
            window_min_span: 0.0,
            accel_update: true,
            p0_position_var: 1.0,
            p0_velocity_var: 0.01,
            p0_attitude_var: 1e-4,
            p0_accel_bias_var: 1e-3,
            p0_gyro_bias_var: 1e-7,
            q_accel_noise: imu.accel_noise_density,
            q_gyro_noise: imu.gyro_noise_density,
            q_accel_bias_walk: 1e-5,
            q_gyro_bias_walk: 1e-7,
            r_position_scale: 1.0,
            r_accel_scale: 1.0,
            init: InitMode::Truth,
            init_lat_deg: 32.0,
            init_lon_deg: 34.8,
            init_height: 30.0,
            init_velocity: Vector3::zeros(),
            init_rpy_deg: Vector3::zeros(),
            init_time: 0.0,
            eval_epochs: EvalEpochs::Gnss,
            dataset_dir: None,
        }
    }
}

fn num<T: FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse '{v}'"))
}

fn vec3(v: &str) -> std::result::Result<Vector3<f64>, String> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [x] => Ok(Vector3::repeat(num(x)?)),
        [x, y, z] => Ok(Vector3::new(num(x)?, num(y)?, num(z)?)),
        _ => Err(format!("expected one or three numbers, found '{v}'")),
    }
}

fn fmt_vec3(v: &Vector3<f64>) -> String {
    format!("{}, {}, {}", v.x, v.y, v.z)
}

fn boolean(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, found '{v}'")),
    }
}

impl RunConfig {
    /// Sets one key; `Ok(false)` for an unknown key.
    fn set(&mut self, key: &str, v: &str) -> std::result::Result<bool, String> {
        match key {
            "scenario" => self.scenario = v.to_string(),
            "profile" => self.profile = v.parse()?,
            "speed" => self.speed = num(v)?,
            "duration" => self.duration = num(v)?,
            "origin_lat_deg" => self.origin_lat_deg = num(v)?,
            "origin_lon_deg" => self.origin_lon_deg = num(v)?,
            "origin_height" => self.origin_height = num(v)?,
            "heading_deg" => self.heading_deg = num(v)?,
            "figure8_period" => self.figure8_period = num(v)?,
            "racetrack_straight" => self.racetrack_straight = num(v)?,
            "racetrack_radius" => self.racetrack_radius = num(v)?,
            "stop_ramp" => self.stop_ramp = num(v)?,
            "stop_cruise" => self.stop_cruise = num(v)?,
            "stop_pause" => self.stop_pause = num(v)?,
            "stop_grade" => self.stop_grade = num(v)?,
            "sensor_grade" => self.apply_grade(parse_grade(v)?),
            "imu_rate" => self.imu_rate = num(v)?,
            "gnss_rate" => self.gnss_rate = num(v)?,
            "accel_bias" => self.accel_bias = vec3(v)?,
            "gyro_bias" => self.gyro_bias = vec3(v)?,
            "accel_noise_density" => self.accel_noise_density = num(v)?,
            "gyro_noise_density" => self.gyro_noise_density = num(v)?,
            "gnss_sigma" => self.gnss_sigma = vec3(v)?,
            "seed" => self.seed = num(v)?,
            "repetitions" => self.repetitions = num(v)?,
            "window_fixes" => self.window_fixes = num(v)?,
            "window_min_span" => self.window_min_span = num(v)?,
            "accel_update" => self.accel_update = boolean(v)?,
            "p0_position_var" => self.p0_position_var = num(v)?,
            "p0_velocity_var" => self.p0_velocity_var = num(v)?,
            "p0_attitude_var" => self.p0_attitude_var = num(v)?,
            "p0_accel_bias_var" => self.p0_accel_bias_var = num(v)?,
            "p0_gyro_bias_var" => self.p0_gyro_bias_var = num(v)?,
            "q_accel_noise" => self.q_accel_noise = num(v)?,
            "q_gyro_noise" => self.q_gyro_noise = num(v)?,
            "q_accel_bias_walk" => self.q_accel_bias_walk = num(v)?,
            "q_gyro_bias_walk" => self.q_gyro_bias_walk = num(v)?,
            "r_position_scale" => self.r_position_scale = num(v)?,
            "r_accel_scale" => self.r_accel_scale = num(v)?,
            "init" => self.init = v.parse()?,
            "init_lat_deg" => self.init_lat_deg = num(v)?,
            "init_lon_deg" => self.init_lon_deg = num(v)?,
            "init_height" => self.init_height = num(v)?,
            "init_velocity" => self.init_velocity = vec3(v)?,
            "init_rpy_deg" => self.init_rpy_deg = vec3(v)?,
            "init_time" => self.init_time = num(v)?,
            "eval_epochs" => self.eval_epochs = v.parse()?,
            "dataset_dir" => self.dataset_dir = (!v.is_empty()).then(|| PathBuf::from(v)),
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Every key with its current value, in file order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("scenario", self.scenario.clone()),
            ("profile", self.profile.name().into()),
            ("speed", self.speed.to_string()),
            ("duration", self.duration.to_string()),
            ("origin_lat_deg", self.origin_lat_deg.to_string()),
            ("origin_lon_deg", self.origin_lon_deg.to_string()),
            ("origin_height", self.origin_height.to_string()),
            ("heading_deg", self.heading_deg.to_string()),
            ("figure8_period", self.figure8_period.to_string()),
            ("racetrack_straight", self.racetrack_straight.to_string()),
            ("racetrack_radius", self.racetrack_radius.to_string()),
            ("stop_ramp", self.stop_ramp.to_string()),
            ("stop_cruise", self.stop_cruise.to_string()),
            ("stop_pause", self.stop_pause.to_string()),
            ("stop_grade", self.stop_grade.to_string()),
            ("sensor_grade", grade_name(self.sensor_grade).into()),
            ("imu_rate", self.imu_rate.to_string()),
            ("gnss_rate", self.gnss_rate.to_string()),
            ("accel_bias", fmt_vec3(&self.accel_bias)),
            ("gyro_bias", fmt_vec3(&self.gyro_bias)),
            ("accel_noise_density", self.accel_noise_density.to_string()),
            ("gyro_noise_density", self.gyro_noise_density.to_string()),
            ("gnss_sigma", fmt_vec3(&self.gnss_sigma)),
            ("seed", self.seed.to_string()),
            ("repetitions", self.repetitions.to_string()),
            ("window_fixes", self.window_fixes.to_string()),
            ("window_min_span", self.window_min_span.to_string()),
            ("accel_update", self.accel_update.to_string()),
            ("p0_position_var", self.p0_position_var.to_string()),
            ("p0_velocity_var", self.p0_velocity_var.to_string()),
            ("p0_attitude_var", self.p0_attitude_var.to_string()),
            ("p0_accel_bias_var", self.p0_accel_bias_var.to_string()),
            ("p0_gyro_bias_var", self.p0_gyro_bias_var.to_string()),
            ("q_accel_noise", self.q_accel_noise.to_string()),
            ("q_gyro_noise", self.q_gyro_noise.to_string()),
            ("q_accel_bias_walk", self.q_accel_bias_walk.to_string()),
            ("q_gyro_bias_walk", self.q_gyro_bias_walk.to_string()),
            ("r_position_scale", self.r_position_scale.to_string()),
            ("r_accel_scale", self.r_accel_scale.to_string()),
            ("init", self.init.name().into()),
            ("init_lat_deg", self.init_lat_deg.to_string()),
            ("init_lon_deg", self.init_lon_deg.to_string()),
            ("init_height", self.init_height.to_string()),
            ("init_velocity", fmt_vec3(&self.init_velocity)),
            ("init_rpy_deg", fmt_vec3(&self.init_rpy_deg)),
            ("init_time", self.init_time.to_string()),
            ("eval_epochs", self.eval_epochs.to_string()),
            (
                "dataset_dir",
                self.dataset_dir
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_default(),
            ),
        ]
    }

    fn apply_grade(&mut self, grade: SensorGrade) {
        let imu = grade.imu_model(self.imu_rate, self.seed);
        let gnss = grade.gnss_model(self.gnss_rate, self.seed);
        self.sensor_grade = grade;
        self.accel_bias = imu.accel_bias;
        self.gyro_bias = imu.gyro_bias;
        self.accel_noise_density = imu.accel_noise_density;
        self.gyro_noise_density = imu.gyro_noise_density;
        self.gnss_sigma = gnss.sigma;
        self.q_accel_noise = imu.accel_noise_density;
        self.q_gyro_noise = imu.gyro_noise_density;
    }

    /// Parses configuration text; `path` is only used in error messages.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = (idx + 1) as u64;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("expected `key = value`, found '{content}'"),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if entries.iter().any(|(_, k, _): &(u64, &str, &str)| *k == key) {
                return Err(Error::ConfigField {
                    field: key.to_string(),
                    message: format!("set twice (line {line})"),
                });
            }
            entries.push((line, key, value));
        }
        let mut config = RunConfig::default();
        // the grade preset goes first so explicit keys override it
        entries.sort_by_key(|(_, k, _)| *k != "sensor_grade");
        for (line, key, value) in entries {
            match config.set(key, value) {
                Ok(true) => {}
                Ok(false) => {
                    return Err(Error::UnknownKey {
                        path: path.to_path_buf(),
                        line,
                        key: key.to_string(),
                    })
                }
                Err(message) => {
                    return Err(Error::ConfigField {
                        field: key.to_string(),
                        message,
                    })
                }
            }
        }
        config.validate()?;
        Ok(config)
    }

    /// The effective configuration as re-loadable text.
    pub fn echo(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, message: &str| {
            Err(Error::ConfigField {
                field: name.to_string(),
                message: message.to_string(),
            })
        };
        let finite = |v: f64| v.is_finite();
        for (name, v) in [
            ("speed", self.speed),
            ("window_min_span", self.window_min_span),
            ("accel_noise_density", self.accel_noise_density),
            ("gyro_noise_density", self.gyro_noise_density),
            ("p0_position_var", self.p0_position_var),
            ("p0_velocity_var", self.p0_velocity_var),
            ("p0_attitude_var", self.p0_attitude_var),
            ("p0_accel_bias_var", self.p0_accel_bias_var),
            ("p0_gyro_bias_var", self.p0_gyro_bias_var),
            ("q_accel_noise", self.q_accel_noise),
            ("q_gyro_noise", self.q_gyro_noise),
            ("q_accel_bias_walk", self.q_accel_bias_walk),
            ("q_gyro_bias_walk", self.q_gyro_bias_walk),
            ("stop_cruise", self.stop_cruise),
            ("stop_pause", self.stop_pause),
            ("racetrack_straight", self.racetrack_straight),
        ] {
            if !(v >= 0.0 && finite(v)) {
                return field(name, "must be a non-negative number");
            }
        }
        for (name, v) in [
            ("duration", self.duration),
            ("imu_rate", self.imu_rate),
            ("gnss_rate", self.gnss_rate),
            ("figure8_period", self.figure8_period),
            ("racetrack_radius", self.racetrack_radius),
            ("stop_ramp", self.stop_ramp),
            ("r_position_scale", self.r_position_scale),
            ("r_accel_scale", self.r_accel_scale),
        ] {
            if !(v > 0.0 && finite(v)) {
                return field(name, "must be positive");
            }
        }
        if self.gnss_sigma.iter().any(|s| !(*s > 0.0 && finite(*s))) {
            return field("gnss_sigma", "must be positive");
        }
        for (name, v) in [
            ("accel_bias", self.accel_bias),
            ("gyro_bias", self.gyro_bias),
            ("init_velocity", self.init_velocity),
            ("init_rpy_deg", self.init_rpy_deg),
        ] {
            if v.iter().any(|x| !finite(*x)) {
                return field(name, "must be finite");
            }
        }
        for (name, v) in [
            ("origin_lat_deg", self.origin_lat_deg),
            ("init_lat_deg", self.init_lat_deg),
        ] {
            if !(v.abs() < 89.9) {
                return field(name, "must lie within 89.9 degrees of the equator");
            }
        }
        for (name, v) in [
            ("origin_lon_deg", self.origin_lon_deg),
            ("origin_height", self.origin_height),
            ("heading_deg", self.heading_deg),
            ("init_lon_deg", self.init_lon_deg),
            ("init_height", self.init_height),
            ("init_time", self.init_time),
        ] {
            if !finite(v) {
                return field(name, "must be finite");
            }
        }
        if !(self.stop_grade.abs() < 1.0) {
            return field("stop_grade", "must lie in (-1, 1)");
        }
        if self.window_fixes < 3 {
            return field("window_fixes", "a quadratic fit needs at least 3 fixes");
        }
        if self.repetitions < 1 {
            return field("repetitions", "must be at least 1");
        }
        Ok(())
    }

    pub fn profile(&self) -> Result<TrajectoryProfile> {
        let kind = match self.profile {
            ProfileName::Straight => ProfileKind::Straight,
            ProfileName::FigureEight => ProfileKind::FigureEight {
                period: self.figure8_period,
            },
            ProfileName::Racetrack => ProfileKind::Racetrack {
                straight_length: self.racetrack_straight,
                turn_radius: self.racetrack_radius,
            },
            ProfileName::StopAndGo => ProfileKind::StopAndGo {
                ramp_time: self.stop_ramp,
                cruise_time: self.stop_cruise,
                stop_time: self.stop_pause,
                grade: self.stop_grade,
            },
        };
        let origin = GeodeticPosition::from_degrees(self.origin_lat_deg, self.origin_lon_deg, self.origin_height)?;
        TrajectoryProfile::new(kind, self.speed, self.duration, origin, self.heading_deg.to_radians())
    }

    pub fn imu_model(&self, seed: u64) -> ImuErrorModel {
        ImuErrorModel {
            accel_bias: self.accel_bias,
            gyro_bias: self.gyro_bias,
            accel_noise_density: self.accel_noise_density,
            gyro_noise_density: self.gyro_noise_density,
            rate: self.imu_rate,
            seed,
        }
    }

    pub fn gnss_model(&self, seed: u64) -> GnssErrorModel {
        GnssErrorModel {
            sigma: self.gnss_sigma,
            rate: self.gnss_rate,
            seed,
        }
    }

    pub fn process_noise(&self) -> ProcessNoiseParams {
        ProcessNoiseParams::isotropic(
            self.q_accel_noise,
            self.q_gyro_noise,
            self.q_accel_bias_walk,
            self.q_gyro_bias_walk,
        )
    }

    pub fn initial_covariance(&self) -> Result<Covariance15> {
        let mut d = Vector15::zeros();
        let vars = [
            self.p0_position_var,
            self.p0_velocity_var,
            self.p0_attitude_var,
            self.p0_accel_bias_var,
            self.p0_gyro_bias_var,
        ];
        for (block, var) in vars.iter().enumerate() {
            d.fixed_rows_mut::<3>(3 * block).fill(*var);
        }
        Covariance15::from_diagonal(&d)
    }
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    RunConfig::parse(&text, path)
}
