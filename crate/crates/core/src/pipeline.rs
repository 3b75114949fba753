//! The filter run loop, Monte-Carlo batches and run output files.
//!
//! For every IMU sample the current bias estimates are removed and the state
//! and covariance are propagated. Each GNSS fix that falls at or before the
//! sample time (1 ms tolerance) is then pushed into the fix window and fused:
//! a position update, stacked with an acceleration update in the aided
//! variant once the window is full.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;

use crate::config::{EvalEpochs, InitMode, RunConfig};
use crate::ekf::{ImuBiases, NavFilter};
use crate::error::{Error, Result};
use crate::eval::{aggregate, align_nearest, ComparisonRow, RunResult, Variant};
use crate::geodesy::{attitude_from_euler, GeodeticPosition};
use crate::gnss_accel::{extract_accel, FixWindow, GnssFix};
use crate::io::{format_f64, write_dataset, write_text, DatasetBundle, DatasetPaths, TruthPoint};
use crate::measurement::{accel_residual, position_residual, stack};
use crate::simulator::{simulate, TruthSample};
use crate::strapdown::NavState;

/// IMU and GNSS timestamps closer than this are simultaneous.
pub const SIMULTANEITY: f64 = 1e-3;

/// Gaps longer than this many nominal IMU periods are reported.
pub const GAP_FACTOR: f64 = 10.0;

/// Filter state recorded at a GNSS epoch, after the update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub timestamp: f64,
    pub position: GeodeticPosition,
    pub velocity: Vector3<f64>,
    /// Roll, pitch, yaw in radians.
    pub euler: Vector3<f64>,
    pub biases: ImuBiases,
    /// One-sigma position uncertainty (north, east, down), m.
    pub position_sigma: Vector3<f64>,
    pub accel_update: bool,
}

/// Everything one filter run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub variant: Variant,
    /// Position estimates at the scoring epochs.
    pub estimates: Vec<(f64, GeodeticPosition)>,
    pub trace: Vec<TraceRow>,
    pub final_state: NavState,
    pub final_biases: ImuBiases,
    pub warnings: Vec<String>,
}

/// Initial navigation state per the configured mode. `truth` is the true
/// first state when the data are simulated.
pub fn initial_state(config: &RunConfig, bundle: &DatasetBundle, truth: Option<&NavState>) -> Result<NavState> {
    let attitude = {
        let d = config.init_rpy_deg.map(f64::to_radians);
        attitude_from_euler(d.x, d.y, d.z)
    };
    match config.init {
        InitMode::Truth => truth.copied().ok_or_else(|| Error::ConfigField {
            field: "init".into(),
            message: "truth initialization needs simulated data".into(),
        }),
        InitMode::Config => Ok(NavState::new(
            GeodeticPosition::from_degrees(config.init_lat_deg, config.init_lon_deg, config.init_height)?,
            config.init_velocity,
            attitude,
            config.init_time,
        )),
        InitMode::FirstFix => {
            let fix = bundle.gnss.first().ok_or(Error::Empty("GNSS stream"))?;
            let start = bundle.imu.first().map_or(fix.timestamp, |s| s.timestamp);
            Ok(NavState::new(fix.position, config.init_velocity, attitude, start))
        }
    }
}

/// Runs one filter variant over a dataset.
pub fn run_filter(
    bundle: &DatasetBundle,
    config: &RunConfig,
    variant: Variant,
    initial: &NavState,
) -> Result<RunOutput> {
    config.validate()?;
    let mut filter = NavFilter::new(*initial, config.initial_covariance()?, config.process_noise())?;
    let mut window = FixWindow::with_min_span(config.window_fixes, config.window_min_span)?;
    let aided = variant == Variant::AccelAided && config.accel_update;
    let nominal = 1.0 / config.imu_rate;
    let mut out = RunOutput {
        variant,
        estimates: Vec::new(),
        trace: Vec::new(),
        final_state: *initial,
        final_biases: ImuBiases::default(),
        warnings: Vec::new(),
    };

    // fixes before the start are never applied
    let mut next_fix = bundle
        .gnss
        .partition_point(|f| f.timestamp < initial.timestamp - SIMULTANEITY);
    let mut clock = initial.timestamp;
    let mut last_update = f64::NEG_INFINITY;

    for raw in &bundle.imu {
        if raw.timestamp <= clock {
            if raw.timestamp < clock - SIMULTANEITY {
                out.warnings
                    .push(format!("IMU sample at {} s precedes the filter start", raw.timestamp));
            }
            continue;
        }
        let gap = raw.timestamp - clock;
        if gap > GAP_FACTOR * nominal {
            out.warnings
                .push(format!("IMU gap of {gap:.3} s ending at {} s", raw.timestamp));
        }
        filter.propagate(raw)?;
        clock = raw.timestamp;

        while let Some(fix) = bundle
            .gnss
            .get(next_fix)
            .filter(|f| f.timestamp <= clock + SIMULTANEITY)
        {
            next_fix += 1;
            assert!(fix.timestamp > last_update, "measurements applied out of order");
            last_update = fix.timestamp;
            let used_accel = apply_fix(&mut filter, &mut window, fix, config, aided, &mut out.warnings)?;
            if config.eval_epochs == EvalEpochs::Gnss {
                out.estimates.push((fix.timestamp, filter.nav.position));
            }
            out.trace.push(trace_row(&filter, fix.timestamp, used_accel));
        }
        if config.eval_epochs == EvalEpochs::Imu {
            out.estimates.push((clock, filter.nav.position));
        }
    }
    if next_fix < bundle.gnss.len() {
        out.warnings.push(format!(
            "{} GNSS fixes after the last IMU sample were not used",
            bundle.gnss.len() - next_fix
        ));
    }
    out.final_state = filter.nav;
    out.final_biases = filter.biases;
    Ok(out)
}

fn apply_fix(
    filter: &mut NavFilter,
    window: &mut FixWindow,
    fix: &GnssFix,
    config: &RunConfig,
    aided: bool,
    warnings: &mut Vec<String>,
) -> Result<bool> {
    window.push_fix(*fix)?;
    let mut position = position_residual(&filter.nav, fix)?;
    position.noise *= config.r_position_scale;
    let mut measurements = vec![position.to_measurement()?];
    let mut used_accel = false;
    if aided && window.is_full() {
        let force = filter
            .last_corrected_imu()
            .map(|s| s.specific_force)
            .ok_or(Error::Empty("IMU history"))?;
        match extract_accel(window) {
            Ok(est) => {
                let mut accel = accel_residual(&filter.nav, &force, &est)?;
                accel.noise *= config.r_accel_scale;
                measurements.push(accel.to_measurement()?);
                used_accel = true;
            }
            Err(e @ (Error::RankDeficient | Error::WindowNotFull { .. })) => {
                warnings.push(format!("no acceleration update at {} s: {e}", fix.timestamp));
            }
            Err(e) => return Err(e),
        }
    }
    filter.update(&stack(&measurements)?)?;
    Ok(used_accel)
}

fn trace_row(filter: &NavFilter, timestamp: f64, accel_update: bool) -> TraceRow {
    let (roll, pitch, yaw) = filter.nav.euler_angles();
    let sd = filter.covariance.std_devs();
    TraceRow {
        timestamp,
        position: filter.nav.position,
        velocity: filter.nav.velocity,
        euler: Vector3::new(roll, pitch, yaw),
        biases: filter.biases,
        position_sigma: Vector3::new(sd[0], sd[1], sd[2]),
        accel_update,
    }
}

/// Pairs a run's estimates with truth, within half the truth sample period.
pub fn score(output: &RunOutput, truth: &[TruthPoint], scenario: &str, seed: u64) -> Result<RunResult> {
    if truth.is_empty() {
        return Err(Error::MissingTruth);
    }
    let period = truth
        .windows(2)
        .map(|w| w[1].timestamp - w[0].timestamp)
        .fold(f64::INFINITY, f64::min);
    let tolerance = if period.is_finite() {
        0.5 * period + 1e-9
    } else {
        SIMULTANEITY
    };
    let pairs: Vec<(f64, GeodeticPosition)> = truth.iter().map(|t| (t.timestamp, t.position)).collect();
    let epochs = align_nearest(&output.estimates, &pairs, tolerance);
    if epochs.is_empty() {
        return Err(Error::Empty("estimates aligned with truth"));
    }
    Ok(RunResult {
        scenario: scenario.to_string(),
        variant: output.variant,
        seed,
        epochs,
    })
}

/// A simulated dataset with its full truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedRun {
    pub bundle: DatasetBundle,
    pub truth: Vec<TruthSample>,
}

pub fn simulate_dataset(config: &RunConfig, seed: u64) -> Result<SimulatedRun> {
    let data = simulate(&config.profile()?, &config.imu_model(seed), &config.gnss_model(seed))?;
    let truth_points = data
        .truth
        .iter()
        .map(|t| TruthPoint {
            timestamp: t.state.timestamp,
            position: t.state.position,
        })
        .collect();
    Ok(SimulatedRun {
        bundle: DatasetBundle {
            imu: data.imu,
            gnss: data.gnss,
            truth: Some(truth_points),
        },
        truth: data.truth,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Simulate,
    Replay,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunPlan {
    pub mode: Mode,
    pub variants: Vec<Variant>,
    pub repetitions: usize,
    pub config: RunConfig,
    pub out_dir: PathBuf,
}

impl RunPlan {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions < 1 {
            return Err(Error::ConfigField {
                field: "repetitions".into(),
                message: "must be at least 1".into(),
            });
        }
        if self.variants.is_empty() {
            return Err(Error::InvalidInput("no filter variant selected".into()));
        }
        self.config.validate()
    }
}

/// Scores of one repetition across the selected variants.
#[derive(Debug, Clone, PartialEq)]
pub struct RepetitionOutcome {
    pub repetition: usize,
    pub seed: u64,
    pub runs: BTreeMap<Variant, (RunOutput, RunResult)>,
    /// True accelerometer bias when known (simulation).
    pub true_accel_bias: Option<Vector3<f64>>,
}

impl RepetitionOutcome {
    pub fn prmse(&self, variant: Variant) -> Option<f64> {
        self.runs.get(&variant).and_then(|(_, r)| r.prmse().ok())
    }

    /// `|b_a estimate - b_a true|` at the end of the run.
    pub fn accel_bias_error(&self, variant: Variant) -> Option<f64> {
        let truth = self.true_accel_bias?;
        self.runs
            .get(&variant)
            .map(|(o, _)| (o.final_biases.accel - truth).norm())
    }

    pub fn comparison(&self) -> Option<Result<ComparisonRow>> {
        let (b, a) = (self.prmse(Variant::Baseline)?, self.prmse(Variant::AccelAided)?);
        Some(ComparisonRow::new(self.repetition.to_string(), b, a))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutput {
    pub repetitions: Vec<RepetitionOutcome>,
    pub rows: Vec<ComparisonRow>,
    pub summary: Option<ComparisonRow>,
}

/// Seed of repetition `rep`.
pub fn repetition_seed(base: u64, rep: usize) -> u64 {
    base.wrapping_add(rep as u64)
}

/// Runs every selected variant on one repetition's data.
pub fn run_repetition(plan: &RunPlan, rep: usize, replay: Option<&DatasetBundle>) -> Result<RepetitionOutcome> {
    let seed = repetition_seed(plan.config.seed, rep);
    let wrap = |e: Error| Error::RunFailed {
        seed,
        source: Box::new(e),
    };
    let (bundle, truth_start, true_bias) = match (plan.mode, replay) {
        (Mode::Replay, Some(b)) => (b.clone(), None, None),
        (Mode::Replay, None) => return Err(Error::InvalidInput("replay needs a dataset".into())),
        (Mode::Simulate, _) => {
            let sim = simulate_dataset(&plan.config, seed).map_err(wrap)?;
            let start = sim.truth.first().map(|t| t.state);
            (sim.bundle, start, Some(plan.config.accel_bias))
        }
    };
    let truth = bundle.truth.as_deref().ok_or(Error::MissingTruth)?;
    let initial = initial_state(&plan.config, &bundle, truth_start.as_ref()).map_err(wrap)?;
    let mut runs = BTreeMap::new();
    for &variant in &plan.variants {
        let output = run_filter(&bundle, &plan.config, variant, &initial).map_err(wrap)?;
        let result = score(&output, truth, &plan.config.scenario, seed).map_err(wrap)?;
        runs.insert(variant, (output, result));
    }
    Ok(RepetitionOutcome {
        repetition: rep,
        seed,
        runs,
        true_accel_bias: true_bias,
    })
}

#[cfg(feature = "parallel")]
fn map_repetitions<F>(n: usize, f: F) -> Vec<Result<RepetitionOutcome>>
where
    F: Fn(usize) -> Result<RepetitionOutcome> + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_repetitions<F>(n: usize, f: F) -> Vec<Result<RepetitionOutcome>>
where
    F: Fn(usize) -> Result<RepetitionOutcome>,
{
    (0..n).map(f).collect()
}

/// Executes all repetitions and variants, without writing anything.
pub fn execute(plan: &RunPlan, replay: Option<&DatasetBundle>) -> Result<BatchOutput> {
    plan.validate()?;
    let outcomes = map_repetitions(plan.repetitions, |rep| run_repetition(plan, rep, replay));
    let repetitions = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let rows = repetitions
        .iter()
        .filter_map(RepetitionOutcome::comparison)
        .collect::<Result<Vec<_>>>()?;
    let summary = if rows.is_empty() { None } else { Some(aggregate(&rows)?) };
    Ok(BatchOutput {
        repetitions,
        rows,
        summary,
    })
}

/// Executes the plan and writes `config.echo`, `comparison.csv`,
/// `errors_<variant>.csv` and `trace_<variant>.csv` into the output directory.
pub fn run_batch(plan: &RunPlan, replay: Option<&DatasetBundle>) -> Result<BatchOutput> {
    let output = execute(plan, replay)?;
    write_outputs(plan, &output)?;
    Ok(output)
}

fn csv_line(fields: &[String]) -> String {
    let mut line = fields.join(",");
    line.push('\n');
    line
}

pub fn write_outputs(plan: &RunPlan, output: &BatchOutput) -> Result<()> {
    let dir = &plan.out_dir;
    write_text(&dir.join("config.echo"), &plan.config.echo())?;
    write_text(&dir.join("comparison.csv"), &comparison_csv(output))?;
    for &variant in &plan.variants {
        let mut errors = csv_line(&["rep", "seed", "t", "en", "ee", "ed", "norm"].map(String::from));
        let mut trace = csv_line(
            &[
                "rep",
                "seed",
                "t",
                "lat",
                "lon",
                "h",
                "vn",
                "ve",
                "vd",
                "roll",
                "pitch",
                "yaw",
                "bax",
                "bay",
                "baz",
                "bgx",
                "bgy",
                "bgz",
                "sn",
                "se",
                "sd",
                "accel_update",
            ]
            .map(String::from),
        );
        for rep in &output.repetitions {
            let Some((run, result)) = rep.runs.get(&variant) else {
                continue;
            };
            let head = [rep.repetition.to_string(), rep.seed.to_string()];
            for (epoch, e) in result.epochs.iter().zip(result.errors()?) {
                let mut fields = head.to_vec();
                fields.extend([epoch.timestamp, e.x, e.y, e.z, e.norm()].map(format_f64));
                errors.push_str(&csv_line(&fields));
            }
            for row in &run.trace {
                let p = row.position;
                let mut fields = head.to_vec();
                fields.extend(
                    [
                        row.timestamp,
                        p.latitude,
                        p.longitude,
                        p.height,
                        row.velocity.x,
                        row.velocity.y,
                        row.velocity.z,
                        row.euler.x,
                        row.euler.y,
                        row.euler.z,
                        row.biases.accel.x,
                        row.biases.accel.y,
                        row.biases.accel.z,
                        row.biases.gyro.x,
                        row.biases.gyro.y,
                        row.biases.gyro.z,
                        row.position_sigma.x,
                        row.position_sigma.y,
                        row.position_sigma.z,
                    ]
                    .map(format_f64),
                );
                fields.push(u8::from(row.accel_update).to_string());
                trace.push_str(&csv_line(&fields));
            }
        }
        write_text(&dir.join(format!("errors_{}.csv", variant.name())), &errors)?;
        write_text(&dir.join(format!("trace_{}.csv", variant.name())), &trace)?;
    }
    Ok(())
}

fn comparison_csv(output: &BatchOutput) -> String {
    let opt = |v: Option<f64>| v.map(format_f64).unwrap_or_default();
    let mut text = csv_line(&["id", "seed", "prmse_baseline", "prmse_accel", "improvement"].map(String::from));
    for rep in &output.repetitions {
        let (b, a) = (rep.prmse(Variant::Baseline), rep.prmse(Variant::AccelAided));
        let improvement = rep.comparison().and_then(|r| r.ok()).map(|r| r.improvement);
        text.push_str(&csv_line(&[
            rep.repetition.to_string(),
            rep.seed.to_string(),
            opt(b),
            opt(a),
            opt(improvement),
        ]));
    }
    if let Some(s) = &output.summary {
        text.push_str(&csv_line(&[
            s.id.clone(),
            String::new(),
            format_f64(s.prmse_baseline),
            format_f64(s.prmse_accel),
            format_f64(s.improvement),
        ]));
    }
    text
}

/// Human-readable summary table.
pub fn summary_table(output: &BatchOutput) -> String {
    let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"));
    let mut text = format!(
        "{:>6} {:>20} {:>14} {:>14} {:>12}\n",
        "rep", "seed", "baseline [m]", "accel [m]", "improv [%]"
    );
    for rep in &output.repetitions {
        let improvement = rep.comparison().and_then(|r| r.ok()).map(|r| r.improvement);
        text.push_str(&format!(
            "{:>6} {:>20} {:>14} {:>14} {:>12}\n",
            rep.repetition,
            rep.seed,
            cell(rep.prmse(Variant::Baseline)),
            cell(rep.prmse(Variant::AccelAided)),
            cell(improvement)
        ));
    }
    if let Some(s) = &output.summary {
        text.push_str(&format!(
            "{:>6} {:>20} {:>14.3} {:>14.3} {:>12.3}\n",
            "mean", "", s.prmse_baseline, s.prmse_accel, s.improvement
        ));
    }
    text
}

/// Writes the simulated dataset of one seed in the replay CSV format.
pub fn export_simulation(config: &RunConfig, seed: u64, dir: &Path) -> Result<()> {
    let sim = simulate_dataset(config, seed)?;
    write_dataset(&DatasetPaths::in_dir(dir), &sim.bundle)
}
