//! Acceleration from a sliding window of GNSS fixes.
//!
//! Each window is mapped to a tangent plane anchored at its oldest fix and a
//! second-order polynomial `p0 + v0 dt + a dt^2 / 2` is fitted per axis by
//! least squares, with `dt` measured from the oldest fix. The acceleration is
//! the third fitted parameter, i.e. a fixed linear combination `B p` of the
//! window positions.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, Matrix3, OMatrix, Vector3, U3};

use crate::error::{Error, Result};
use crate::geodesy::{llh_to_local_ned, GeodeticPosition, NedVector};

/// Number of polynomial parameters per axis.
const PARAMS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GnssFix {
    pub timestamp: f64,
    pub position: GeodeticPosition,
    /// Per-axis (north, east, down) standard deviation in meters.
    pub sigma: Vector3<f64>,
}

impl GnssFix {
    pub fn new(timestamp: f64, position: GeodeticPosition, sigma: Vector3<f64>) -> Result<Self> {
        if !timestamp.is_finite() {
            return Err(Error::InvalidInput(format!("fix timestamp {timestamp}")));
        }
        if sigma.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidInput(format!("fix sigma {sigma:?} must be positive")));
        }
        Ok(Self {
            timestamp,
            position,
            sigma,
        })
    }
}

/// Acceleration extracted from a full window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccelEstimate {
    /// NED acceleration, m/s^2.
    pub accel: NedVector,
    /// Noise covariance of `accel`, (m/s^2)^2.
    pub noise_cov: Matrix3<f64>,
    /// Window reference time (oldest fix).
    pub timestamp: f64,
}

/// The `capacity` most recent fixes, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct FixWindow {
    capacity: usize,
    min_span: f64,
    fixes: VecDeque<GnssFix>,
}

impl FixWindow {
    pub fn new(capacity: usize) -> Result<Self> {
        Self::with_min_span(capacity, 0.0)
    }

    /// A window that additionally refuses extraction when its fixes span
    /// less than `min_span` seconds.
    pub fn with_min_span(capacity: usize, min_span: f64) -> Result<Self> {
        if capacity < PARAMS {
            return Err(Error::InvalidInput(format!(
                "window capacity {capacity} is below {PARAMS}"
            )));
        }
        if !(min_span >= 0.0) {
            return Err(Error::InvalidInput(format!("minimum span {min_span}")));
        }
        Ok(Self {
            capacity,
            min_span,
            fixes: VecDeque::with_capacity(capacity + 1),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.fixes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixes.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.fixes.len() == self.capacity
    }

    pub fn fixes(&self) -> impl Iterator<Item = &GnssFix> {
        self.fixes.iter()
    }

    /// Position of the oldest fix, the tangent-plane origin for the fit.
    pub fn anchor(&self) -> Option<&GeodeticPosition> {
        self.fixes.front().map(|f| &f.position)
    }

    /// Appends a fix, evicting the oldest once the window is over capacity.
    pub fn push_fix(&mut self, fix: GnssFix) -> Result<()> {
        if let Some(last) = self.fixes.back() {
            if !(fix.timestamp > last.timestamp) {
                return Err(Error::NonIncreasingTimestamp {
                    last: last.timestamp,
                    new: fix.timestamp,
                });
            }
        }
        self.fixes.push_back(fix);
        if self.fixes.len() > self.capacity {
            self.fixes.pop_front();
        }
        Ok(())
    }

    pub fn clear(&mut self) {
        self.fixes.clear();
    }
}

/// Rows `[1, dt, dt^2 / 2]` with `dt = t_j - t0`.
pub fn design_matrix(times: &[f64], t0: f64) -> Result<DMatrix<f64>> {
    check_times(times)?;
    Ok(DMatrix::from_fn(times.len(), PARAMS, |j, c| {
        let dt = times[j] - t0;
        match c {
            0 => 1.0,
            1 => dt,
            _ => 0.5 * dt * dt,
        }
    }))
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.len() < PARAMS {
        return Err(Error::WindowNotFull {
            len: times.len(),
            needed: PARAMS,
        });
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidInput("non-finite timestamp".into()));
    }
    Ok(())
}

/// The least-squares operator `(A^T A)^-1 A^T` (3 x m).
///
/// Time is normalized by the window span before forming the normal equations
/// and the rows are rescaled afterwards, which keeps `A^T A` well conditioned
/// for any window length.
pub fn least_squares_operator(times: &[f64], t0: f64) -> Result<OMatrix<f64, U3, nalgebra::Dyn>> {
    check_times(times)?;
    let mut distinct = times.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < PARAMS {
        return Err(Error::RankDeficient);
    }
    let span = distinct[distinct.len() - 1] - distinct[0];
    let scale = if span > 0.0 { span } else { 1.0 };
    let scaled: Vec<f64> = times.iter().map(|t| (t - t0) / scale).collect();
    let a = design_matrix(&scaled, 0.0)?;
    let ata = a.transpose() * &a;
    let chol = ata.cholesky().ok_or(Error::RankDeficient)?;
    let op = chol.solve(&a.transpose());
    if op.iter().any(|v| !v.is_finite()) {
        return Err(Error::RankDeficient);
    }
    let mut op = op.fixed_rows::<3>(0).into_owned();
    op.row_mut(1).scale_mut(1.0 / scale);
    op.row_mut(2).scale_mut(1.0 / (scale * scale));
    Ok(op)
}

/// Acceleration extraction weights `B`: third row of the LS operator.
pub fn extraction_weights(times: &[f64], t0: f64) -> Result<DVector<f64>> {
    Ok(least_squares_operator(times, t0)?.row(2).transpose())
}

/// Variance of `B p` for independent per-fix noise: `sum_j B_j^2 sigma_j^2`.
pub fn accel_noise_cov(weights: &DVector<f64>, sigma_axis: &[f64]) -> Result<f64> {
    if weights.len() != sigma_axis.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} sigmas",
            weights.len(),
            sigma_axis.len()
        )));
    }
    if sigma_axis.iter().any(|s| !(*s >= 0.0)) {
        return Err(Error::InvalidInput("negative sigma".into()));
    }
    Ok(weights.iter().zip(sigma_axis).map(|(b, s)| b * b * s * s).sum())
}

/// Per-axis quadratic fit of a short position series.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticFit {
    pub position: NedVector,
    pub velocity: NedVector,
    pub accel: NedVector,
    /// Measured minus fitted position for each sample.
    pub residuals: Vec<NedVector>,
}

pub fn fit_quadratic(times: &[f64], t0: f64, positions: &[NedVector]) -> Result<QuadraticFit> {
    if times.len() != positions.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} times for {} positions",
            times.len(),
            positions.len()
        )));
    }
    let op = least_squares_operator(times, t0)?;
    let mut theta = [Vector3::zeros(); PARAMS];
    for (k, row) in theta.iter_mut().enumerate() {
        for (j, p) in positions.iter().enumerate() {
            *row += p * op[(k, j)];
        }
    }
    let residuals = times
        .iter()
        .zip(positions)
        .map(|(t, p)| {
            let dt = t - t0;
            p - (theta[0] + theta[1] * dt + theta[2] * (0.5 * dt * dt))
        })
        .collect();
    Ok(QuadraticFit {
        position: theta[0],
        velocity: theta[1],
        accel: theta[2],
        residuals,
    })
}

/// Fits the full window and returns the acceleration with its noise covariance.
pub fn extract_accel(window: &FixWindow) -> Result<AccelEstimate> {
    if !window.is_full() {
        return Err(Error::WindowNotFull {
            len: window.len(),
            needed: window.capacity,
        });
    }
    let first = window.fixes.front().expect("full window is non-empty");
    let last = window.fixes.back().expect("full window is non-empty");
    if last.timestamp - first.timestamp < window.min_span {
        return Err(Error::InvalidInput(format!(
            "window spans {} s, below the {} s minimum",
            last.timestamp - first.timestamp,
            window.min_span
        )));
    }
    let anchor = first.position;
    let t0 = first.timestamp;
    let times: Vec<f64> = window.fixes.iter().map(|f| f.timestamp).collect();
    let weights = extraction_weights(&times, t0)?;

    let mut accel = Vector3::zeros();
    for (b, fix) in weights.iter().zip(&window.fixes) {
        accel += llh_to_local_ned(&anchor, &fix.position)? * *b;
    }
    let mut noise = Matrix3::zeros();
    for axis in 0..3 {
        let sigmas: Vec<f64> = window.fixes.iter().map(|f| f.sigma[axis]).collect();
        noise[(axis, axis)] = accel_noise_cov(&weights, &sigmas)?;
    }
    Ok(AccelEstimate {
        accel,
        noise_cov: noise,
        timestamp: t0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::local_ned_to_llh;
    use proptest::prelude::*;

    fn origin() -> GeodeticPosition {
        GeodeticPosition::from_degrees(32.1, 34.8, 40.0).unwrap()
    }

    fn fix_at(t: f64, ned: NedVector) -> GnssFix {
        let pos = local_ned_to_llh(&origin(), &ned).unwrap();
        GnssFix::new(t, pos, Vector3::repeat(1.0)).unwrap()
    }

    #[test]
    fn push_fix_ring_buffer() {
        let mut w = FixWindow::new(3).unwrap();
        let f0 = fix_at(0.0, Vector3::zeros());
        w.push_fix(f0).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w.anchor(), Some(&f0.position));
        for k in 1..4 {
            w.push_fix(fix_at(k as f64, Vector3::new(k as f64, 0.0, 0.0))).unwrap();
        }
        assert_eq!(w.len(), 3);
        assert_eq!(w.fixes().next().unwrap().timestamp, 1.0);
        assert!(matches!(
            w.push_fix(fix_at(2.5, Vector3::zeros())),
            Err(Error::NonIncreasingTimestamp { .. })
        ));
        assert!(FixWindow::new(2).is_err());
    }

    #[test]
    fn design_matrix_rows() {
        let a = design_matrix(&[0.0, 1.0, 2.0], 0.0).unwrap();
        assert_eq!(
            a,
            DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 1.0, 1.0, 0.5, 1.0, 2.0, 2.0])
        );
        let shifted = design_matrix(&[10.0, 11.0, 12.0], 10.0).unwrap();
        assert_eq!(a, shifted);
        assert!(matches!(
            design_matrix(&[0.0, 1.0], 0.0),
            Err(Error::WindowNotFull { .. })
        ));
    }

    #[test]
    fn unit_spaced_weights_are_second_differences() {
        let b = extraction_weights(&[0.0, 1.0, 2.0], 0.0).unwrap();
        for (got, want) in b.iter().zip([1.0, -2.0, 1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        let var = accel_noise_cov(&b, &[1.0, 1.0, 1.0]).unwrap();
        assert!((var - 6.0).abs() < 1e-11);
        assert_eq!(accel_noise_cov(&b, &[0.0; 3]).unwrap(), 0.0);
        let scaled = accel_noise_cov(&b, &[2.5; 3]).unwrap();
        assert!((scaled - 6.0 * 6.25).abs() < 1e-10);
    }

    #[test]
    fn exact_quadratic_recovered() {
        let a = Vector3::new(0.2, -0.1, 0.05);
        let v0 = Vector3::new(3.0, 1.0, 0.0);
        let mut w = FixWindow::new(3).unwrap();
        for k in 0..3 {
            let t = 100.0 + k as f64;
            let dt = k as f64;
            w.push_fix(fix_at(t, v0 * dt + a * (0.5 * dt * dt))).unwrap();
        }
        let est = extract_accel(&w).unwrap();
        // geodetic storage of the fixes limits agreement to ~1e-9 m per fix
        assert!((est.accel - a).norm() < 1e-8, "{}", est.accel);
        let ned: Vec<NedVector> = (0..3)
            .map(|k| {
                let dt = k as f64;
                v0 * dt + a * (0.5 * dt * dt)
            })
            .collect();
        let fit = fit_quadratic(&[100.0, 101.0, 102.0], 100.0, &ned).unwrap();
        assert!((fit.accel - a).norm() < 1e-14);
        assert_eq!(est.timestamp, 100.0);
        assert!((est.noise_cov - Matrix3::identity() * 6.0).norm() < 1e-10);
    }

    #[test]
    fn constant_window_gives_zero() {
        let mut w = FixWindow::new(4).unwrap();
        for k in 0..4 {
            w.push_fix(fix_at(k as f64 * 0.7, Vector3::new(5.0, -2.0, 1.0)))
                .unwrap();
        }
        assert!(extract_accel(&w).unwrap().accel.norm() < 1e-9);
    }

    #[test]
    fn extraction_requires_full_window() {
        let mut w = FixWindow::new(3).unwrap();
        w.push_fix(fix_at(0.0, Vector3::zeros())).unwrap();
        assert!(matches!(
            extract_accel(&w),
            Err(Error::WindowNotFull { len: 1, needed: 3 })
        ));
    }

    #[test]
    fn repeated_timestamps_are_rank_deficient() {
        assert!(matches!(
            extraction_weights(&[0.0, 1.0, 1.0, 0.0], 0.0),
            Err(Error::RankDeficient)
        ));
    }

    #[test]
    fn short_span_is_refused() {
        let mut w = FixWindow::with_min_span(3, 2.5).unwrap();
        for k in 0..3 {
            w.push_fix(fix_at(k as f64, Vector3::zeros())).unwrap();
        }
        assert!(extract_accel(&w).is_err());
    }

    #[test]
    fn three_point_fit_has_zero_residual() {
        let times = [0.0, 0.9, 2.3];
        let pos = [
            Vector3::new(1.0, 2.0, 3.0),
            Vector3::new(-4.0, 0.5, 2.0),
            Vector3::new(7.0, -1.0, 0.0),
        ];
        let fit = fit_quadratic(&times, 0.0, &pos).unwrap();
        for r in &fit.residuals {
            assert!(r.norm() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn weights_annihilate_constants_and_ramps(
            gaps in prop::collection::vec(0.2f64..2.0, 2..9),
            start in -1e3f64..1e3,
        ) {
            let mut times = vec![start];
            for g in gaps {
                let last = *times.last().unwrap();
                times.push(last + g);
            }
            let b = extraction_weights(&times, start).unwrap();
            let dts: Vec<f64> = times.iter().map(|t| t - start).collect();
            let sum: f64 = b.iter().sum();
            let ramp: f64 = b.iter().zip(&dts).map(|(b, d)| b * d).sum();
            let quad: f64 = b.iter().zip(&dts).map(|(b, d)| 0.5 * b * d * d).sum();
            prop_assert!(sum.abs() < 1e-9);
            prop_assert!(ramp.abs() < 1e-9);
            prop_assert!((quad - 1.0).abs() < 1e-9);
        }
    }
}
