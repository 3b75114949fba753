//! Position RMSE scoring and baseline-versus-aided comparison tables.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geodesy::{radii_of_curvature, wrap_longitude, GeodeticPosition, NedVector};

/// Which measurement set the filter fuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    /// GNSS position updates only.
    Baseline,
    /// GNSS position plus GNSS-derived acceleration updates.
    AccelAided,
}

impl Variant {
    pub const ALL: [Variant; 2] = [Variant::Baseline, Variant::AccelAided];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::AccelAided => "accel",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Variant::Baseline),
            "accel" => Ok(Variant::AccelAided),
            other => Err(Error::InvalidInput(format!("unknown variant '{other}'"))),
        }
    }
}

/// One estimate paired with the truth sample nearest in time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignedEpoch {
    pub timestamp: f64,
    pub estimate: GeodeticPosition,
    pub truth: GeodeticPosition,
}

impl AlignedEpoch {
    /// Estimate minus truth in the local NED frame about `origin`.
    ///
    /// The tangent-plane mapping is linear in latitude, longitude and height
    /// differences, so the difference of the two mapped points is formed
    /// directly and no range limit applies.
    pub fn error(&self, origin: &GeodeticPosition) -> Result<NedVector> {
        let (rm, rn) = radii_of_curvature(origin.latitude)?;
        let (e, t) = (&self.estimate, &self.truth);
        Ok(NedVector::new(
            (e.latitude - t.latitude) * (rm + origin.height),
            wrap_longitude(e.longitude - t.longitude) * (rn + origin.height) * origin.latitude.cos(),
            -(e.height - t.height),
        ))
    }
}

/// Aligned estimate/truth series of one filter run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub scenario: String,
    pub variant: Variant,
    pub seed: u64,
    pub epochs: Vec<AlignedEpoch>,
}

impl RunResult {
    /// Per-epoch errors in the local NED frame about the first truth point.
    pub fn errors(&self) -> Result<Vec<NedVector>> {
        let Some(origin) = self.epochs.first().map(|e| e.truth) else {
            return Ok(Vec::new());
        };
        self.epochs.iter().map(|e| e.error(&origin)).collect()
    }

    pub fn prmse(&self) -> Result<f64> {
        prmse(&self.errors()?)
    }
}

/// Root of the mean squared 3D error norm.
pub fn prmse(errors: &[NedVector]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::Empty("error series"));
    }
    let sum: f64 = errors.iter().map(|e| e.norm_squared()).sum();
    Ok((sum / errors.len() as f64).sqrt())
}

/// Pairs each estimate with the nearest truth sample. Estimates with no truth
/// sample within `tolerance` seconds are dropped. Both inputs must be sorted
/// by time.
pub fn align_nearest(
    estimates: &[(f64, GeodeticPosition)],
    truth: &[(f64, GeodeticPosition)],
    tolerance: f64,
) -> Vec<AlignedEpoch> {
    let mut out = Vec::with_capacity(estimates.len());
    if truth.is_empty() {
        return out;
    }
    for &(t, estimate) in estimates {
        let i = truth.partition_point(|(tt, _)| *tt < t);
        let nearest = [i.checked_sub(1), (i < truth.len()).then_some(i)]
            .into_iter()
            .flatten()
            .min_by(|&a, &b| (truth[a].0 - t).abs().total_cmp(&(truth[b].0 - t).abs()));
        if let Some(j) = nearest {
            if (truth[j].0 - t).abs() <= tolerance {
                out.push(AlignedEpoch {
                    timestamp: t,
                    estimate,
                    truth: truth[j].1,
                });
            }
        }
    }
    out
}

/// Relative reduction of `proposed` against `baseline`, in percent.
pub fn improvement_pct(baseline: f64, proposed: f64) -> Result<f64> {
    if !(baseline > 0.0 && baseline.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "baseline PRMSE {baseline} must be positive"
        )));
    }
    if !(proposed >= 0.0 && proposed.is_finite()) {
        return Err(Error::InvalidInput(format!("PRMSE {proposed} must be non-negative")));
    }
    Ok(100.0 * (1.0 - proposed / baseline))
}

/// One line of a comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub id: String,
    pub prmse_baseline: f64,
    pub prmse_accel: f64,
    pub improvement: f64,
}

impl ComparisonRow {
    pub fn new(id: impl Into<String>, prmse_baseline: f64, prmse_accel: f64) -> Result<Self> {
        Ok(Self {
            id: id.into(),
            prmse_baseline,
            prmse_accel,
            improvement: improvement_pct(prmse_baseline, prmse_accel)?,
        })
    }

    /// A row whose improvement was reported separately from rounded PRMSE
    /// values. The reported figure must agree with the PRMSEs to within what
    /// two-decimal rounding of both can explain.
    pub fn reported(id: impl Into<String>, prmse_baseline: f64, prmse_accel: f64, improvement: f64) -> Result<Self> {
        let implied = improvement_pct(prmse_baseline, prmse_accel)?;
        let half_unit = 0.005;
        let slack =
            100.0 * half_unit * (1.0 / prmse_baseline + prmse_accel / (prmse_baseline * prmse_baseline)) + half_unit;
        if !((implied - improvement).abs() <= slack) {
            return Err(Error::InvalidInput(format!(
                "improvement {improvement}% disagrees with PRMSEs ({implied:.3}%)"
            )));
        }
        Ok(Self {
            id: id.into(),
            prmse_baseline,
            prmse_accel,
            improvement,
        })
    }
}

/// Column means: mean baseline PRMSE, mean aided PRMSE and the mean of the
/// per-row improvements (not the improvement of the means).
pub fn aggregate(rows: &[ComparisonRow]) -> Result<ComparisonRow> {
    if rows.is_empty() {
        return Err(Error::Empty("comparison rows"));
    }
    let n = rows.len() as f64;
    let mean = |f: fn(&ComparisonRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    Ok(ComparisonRow {
        id: "average".into(),
        prmse_baseline: mean(|r| r.prmse_baseline),
        prmse_accel: mean(|r| r.prmse_accel),
        improvement: mean(|r| r.improvement),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::local_ned_to_llh;
    use nalgebra::Vector3;
    use proptest::prelude::*;

    fn anchor() -> GeodeticPosition {
        GeodeticPosition::from_degrees(45.0, 7.0, 250.0).unwrap()
    }

    /// Series built in the tangent plane of the first truth point, the frame
    /// `prmse` scores in.
    fn result_from(pairs: &[(NedVector, NedVector)]) -> RunResult {
        let first = pairs[0].1;
        let a = local_ned_to_llh(&anchor(), &first).unwrap();
        RunResult {
            scenario: "test".into(),
            variant: Variant::Baseline,
            seed: 0,
            epochs: pairs
                .iter()
                .enumerate()
                .map(|(k, (est, tru))| AlignedEpoch {
                    timestamp: k as f64,
                    estimate: local_ned_to_llh(&a, &(est - first)).unwrap(),
                    truth: local_ned_to_llh(&a, &(tru - first)).unwrap(),
                })
                .collect(),
        }
    }

    #[test]
    fn prmse_examples() {
        let z = Vector3::zeros();
        assert_eq!(prmse(&[z, z]).unwrap(), 0.0);
        assert_eq!(prmse(&[Vector3::new(3.0, 4.0, 0.0)]).unwrap(), 5.0);
        assert_eq!(
            prmse(&[Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.0, 7.0, 0.0)]).unwrap(),
            5.0
        );
        assert!(matches!(prmse(&[]), Err(Error::Empty(_))));
    }

    #[test]
    fn prmse_through_geodetic_positions() {
        let p = Vector3::new(10.0, -20.0, 1.0);
        let same = result_from(&[(p, p)]);
        assert!(same.prmse().unwrap() < 1e-9);
        let r = result_from(&[(p + Vector3::new(3.0, 4.0, 0.0), p)]);
        assert!((r.prmse().unwrap() - 5.0).abs() < 1e-6);
    }

    #[test]
    fn improvement_examples() {
        assert!((improvement_pct(4.84, 4.28).unwrap() - 11.57).abs() < 0.01);
        assert!((improvement_pct(4.43, 3.37).unwrap() - 23.93).abs() < 0.01);
        assert_eq!(improvement_pct(2.0, 2.0).unwrap(), 0.0);
        assert!(improvement_pct(0.0, 1.0).is_err());
        assert!(improvement_pct(-1.0, 1.0).is_err());
    }

    #[test]
    fn aggregate_examples() {
        let row = ComparisonRow::new("1", 4.0, 3.0).unwrap();
        assert_eq!(aggregate(std::slice::from_ref(&row)).unwrap().prmse_accel, 3.0);
        assert_eq!(aggregate(std::slice::from_ref(&row)).unwrap().improvement, 25.0);
        assert!(aggregate(&[]).is_err());
        let rows = [
            ComparisonRow::new("a", 10.0, 5.0).unwrap(),
            ComparisonRow::new("b", 2.0, 2.0).unwrap(),
        ];
        let avg = aggregate(&rows).unwrap();
        // mean of improvements (50, 0), not the improvement of the means
        assert_eq!(avg.improvement, 25.0);
        assert_eq!(avg.prmse_baseline, 6.0);
    }

    #[test]
    fn reported_rows_are_checked_for_consistency() {
        assert!(ComparisonRow::reported("1", 4.84, 4.28, 11.60).is_ok());
        assert!(ComparisonRow::reported("1", 4.84, 4.28, 15.0).is_err());
    }

    #[test]
    fn alignment_picks_nearest_within_tolerance() {
        let a = anchor();
        let truth: Vec<_> = (0..10).map(|k| (k as f64 * 0.1, a)).collect();
        let est = [(0.04, a), (0.26, a), (0.5, a), (5.0, a)];
        let aligned = align_nearest(&est, &truth, 0.05);
        let times: Vec<f64> = aligned.iter().map(|e| e.timestamp).collect();
        assert_eq!(times, vec![0.04, 0.26, 0.5]);
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("both".parse::<Variant>().is_err());
    }

    proptest! {
        #[test]
        fn translation_invariance_and_scaling(
            errs in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -2.0f64..2.0), 1..20),
            shift in (-500.0f64..500.0, -500.0f64..500.0, -20.0f64..20.0),
            scale in 0.1f64..10.0,
        ) {
            let shift = Vector3::new(shift.0, shift.1, shift.2);
            let base: Vec<_> = errs
                .iter()
                .enumerate()
                .map(|(k, e)| (Vector3::new(e.0, e.1, e.2) + Vector3::new(k as f64, 0.0, 0.0), Vector3::new(k as f64, 0.0, 0.0)))
                .collect();
            let moved: Vec<_> = base.iter().map(|(e, t)| (e + shift, t + shift)).collect();
            let p0 = result_from(&base).prmse().unwrap();
            let p1 = result_from(&moved).prmse().unwrap();
            prop_assert!((p0 - p1).abs() < 1e-6 * p0.max(1.0));

            let raw: Vec<NedVector> = errs.iter().map(|e| Vector3::new(e.0, e.1, e.2)).collect();
            let scaled: Vec<NedVector> = raw.iter().map(|e| e * scale).collect();
            let (a, b) = (prmse(&raw).unwrap(), prmse(&scaled).unwrap());
            prop_assert!((b - scale * a).abs() <= 1e-12 * b.max(1.0));
        }
    }
}
