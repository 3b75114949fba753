//! WGS84 Earth model and the frame helpers shared by the rest of the crate.
//!
//! The navigation frame is north-east-down (NED) everywhere. Gravity is
//! down-positive and follows the Somigliana normal-gravity formula with a
//! linear free-air height correction.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

/// A vector resolved in the local north-east-down frame.
pub type NedVector = Vector3<f64>;

/// Largest tangent-plane displacement accepted by [`llh_to_local_ned`].
pub const MAX_TANGENT_PLANE_DISPLACEMENT: f64 = 10_000.0;

/// Transport rate is refused above this latitude magnitude (89.9 deg).
pub const MAX_TRANSPORT_LATITUDE: f64 = 89.9 * PI / 180.0;

/// Ellipsoidal position: latitude and longitude in radians, height in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodeticPosition {
    pub latitude: f64,
    pub longitude: f64,
    pub height: f64,
}

impl GeodeticPosition {
    /// Builds a validated position, wrapping longitude into (-pi, pi].
    pub fn new(latitude: f64, longitude: f64, height: f64) -> Result<Self> {
        if !latitude.is_finite() || latitude.abs() > FRAC_PI_2 {
            return Err(Error::LatitudeOutOfRange(latitude));
        }
        if !longitude.is_finite() || !height.is_finite() {
            return Err(Error::InvalidInput(format!(
                "non-finite position ({latitude}, {longitude}, {height})"
            )));
        }
        Ok(Self {
            latitude,
            longitude: wrap_longitude(longitude),
            height,
        })
    }

    pub fn from_degrees(lat_deg: f64, lon_deg: f64, height: f64) -> Result<Self> {
        Self::new(lat_deg.to_radians(), lon_deg.to_radians(), height)
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_longitude(lon: f64) -> f64 {
    let mut wrapped = (lon + PI).rem_euclid(2.0 * PI) - PI;
    if wrapped <= -PI {
        wrapped += 2.0 * PI;
    }
    wrapped
}

/// Ellipsoid, rotation and normal-gravity constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarthParams {
    /// Semi-major axis (m).
    pub semi_major_axis: f64,
    /// First eccentricity squared.
    pub eccentricity_sq: f64,
    /// Earth rotation rate (rad/s).
    pub rotation_rate: f64,
    /// Normal gravity at the equator (m/s^2).
    pub gravity_equator: f64,
    /// Normal gravity at the poles (m/s^2).
    pub gravity_pole: f64,
    /// Free-air gradient (m/s^2 per m of height).
    pub free_air_gradient: f64,
}

pub const WGS84: EarthParams = EarthParams {
    semi_major_axis: 6_378_137.0,
    eccentricity_sq: 6.694_379_990_14e-3,
    rotation_rate: 7.292_115e-5,
    gravity_equator: 9.780_325_335_9,
    gravity_pole: 9.832_184_937_8,
    free_air_gradient: 3.086e-6,
};

fn check_latitude(lat: f64) -> Result<()> {
    if lat.is_finite() && lat.abs() <= FRAC_PI_2 {
        Ok(())
    } else {
        Err(Error::LatitudeOutOfRange(lat))
    }
}

impl EarthParams {
    pub fn semi_minor_axis(&self) -> f64 {
        self.semi_major_axis * (1.0 - self.eccentricity_sq).sqrt()
    }

    /// Meridian and normal (prime vertical) radii of curvature.
    pub fn radii_of_curvature(&self, lat: f64) -> Result<(f64, f64)> {
        check_latitude(lat)?;
        let s = lat.sin();
        let denom = 1.0 - self.eccentricity_sq * s * s;
        let normal = self.semi_major_axis / denom.sqrt();
        let meridian = self.semi_major_axis * (1.0 - self.eccentricity_sq) / denom.powf(1.5);
        Ok((meridian, normal))
    }

    /// Gravity vector `[0, 0, g]` in NED.
    pub fn gravity_ned(&self, lat: f64, height: f64) -> Result<NedVector> {
        check_latitude(lat)?;
        if !(height > -10_000.0) {
            return Err(Error::InvalidInput(format!("height {height} m below -10 km")));
        }
        let s2 = lat.sin().powi(2);
        let k = self.semi_minor_axis() * self.gravity_pole / (self.semi_major_axis * self.gravity_equator) - 1.0;
        let surface = self.gravity_equator * (1.0 + k * s2) / (1.0 - self.eccentricity_sq * s2).sqrt();
        Ok(Vector3::new(0.0, 0.0, surface - self.free_air_gradient * height))
    }

    pub fn earth_rate_ned(&self, lat: f64) -> Result<Vector3<f64>> {
        check_latitude(lat)?;
        Ok(Vector3::new(
            self.rotation_rate * lat.cos(),
            0.0,
            -self.rotation_rate * lat.sin(),
        ))
    }

    pub fn transport_rate_ned(&self, velocity: &NedVector, pos: &GeodeticPosition) -> Result<Vector3<f64>> {
        check_latitude(pos.latitude)?;
        if pos.latitude.abs() > MAX_TRANSPORT_LATITUDE {
            return Err(Error::NearPole(pos.latitude));
        }
        let (rm, rn) = self.radii_of_curvature(pos.latitude)?;
        let rn_h = rn + pos.height;
        Ok(Vector3::new(
            velocity.y / rn_h,
            -velocity.x / (rm + pos.height),
            -velocity.y * pos.latitude.tan() / rn_h,
        ))
    }

    /// Small-displacement tangent-plane coordinates of `p` about `anchor`.
    pub fn llh_to_local_ned(&self, anchor: &GeodeticPosition, p: &GeodeticPosition) -> Result<NedVector> {
        let (rm, rn) = self.radii_of_curvature(anchor.latitude)?;
        check_latitude(p.latitude)?;
        let d_lon = wrap_longitude(p.longitude - anchor.longitude);
        let ned = Vector3::new(
            (p.latitude - anchor.latitude) * (rm + anchor.height),
            d_lon * (rn + anchor.height) * anchor.latitude.cos(),
            -(p.height - anchor.height),
        );
        let dist = ned.norm();
        if dist > MAX_TANGENT_PLANE_DISPLACEMENT {
            return Err(Error::DisplacementTooLarge(dist));
        }
        Ok(ned)
    }

    /// Inverse of [`EarthParams::llh_to_local_ned`].
    pub fn local_ned_to_llh(&self, anchor: &GeodeticPosition, ned: &NedVector) -> Result<GeodeticPosition> {
        let (rm, rn) = self.radii_of_curvature(anchor.latitude)?;
        GeodeticPosition::new(
            anchor.latitude + ned.x / (rm + anchor.height),
            anchor.longitude + ned.y / ((rn + anchor.height) * anchor.latitude.cos()),
            anchor.height - ned.z,
        )
    }
}

pub fn radii_of_curvature(lat: f64) -> Result<(f64, f64)> {
    WGS84.radii_of_curvature(lat)
}

pub fn gravity_ned(lat: f64, height: f64) -> Result<NedVector> {
    WGS84.gravity_ned(lat, height)
}

pub fn earth_rate_ned(lat: f64) -> Result<Vector3<f64>> {
    WGS84.earth_rate_ned(lat)
}

pub fn transport_rate_ned(velocity: &NedVector, pos: &GeodeticPosition) -> Result<Vector3<f64>> {
    WGS84.transport_rate_ned(velocity, pos)
}

pub fn llh_to_local_ned(anchor: &GeodeticPosition, p: &GeodeticPosition) -> Result<NedVector> {
    WGS84.llh_to_local_ned(anchor, p)
}

pub fn local_ned_to_llh(anchor: &GeodeticPosition, ned: &NedVector) -> Result<GeodeticPosition> {
    WGS84.local_ned_to_llh(anchor, ned)
}

/// Cross-product matrix: `skew(v) * u == v.cross(u)`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Frobenius norm of `R^T R - I`.
pub fn orthonormality_error(m: &Matrix3<f64>) -> f64 {
    (m.transpose() * m - Matrix3::identity()).norm()
}

/// Projects a nearly orthonormal matrix onto the closest rotation.
///
/// Uses the Newton iteration for the orthogonal polar factor, which converges
/// quadratically from any matrix within the usual integration drift.
pub fn orthonormalize(m: &Matrix3<f64>) -> Rotation3<f64> {
    let mut r = *m;
    for _ in 0..4 {
        let err = orthonormality_error(&r);
        if err < 1e-15 {
            break;
        }
        if err > 0.5 {
            // Far from orthonormal: fall back to the SVD polar factor.
            let svd = r.svd(true, true);
            let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
            let mut q = u * v_t;
            if q.determinant() < 0.0 {
                let mut u = u;
                u.column_mut(2).neg_mut();
                q = u * v_t;
            }
            r = q;
            continue;
        }
        r = r * (Matrix3::identity() * 3.0 - r.transpose() * r) * 0.5;
    }
    Rotation3::from_matrix_unchecked(r)
}

/// Angle of the rotation taking `a` to `b` (robust near zero).
pub fn rotation_angle_between(a: &Rotation3<f64>, b: &Rotation3<f64>) -> f64 {
    UnitQuaternion::from_rotation_matrix(&(a.inverse() * b)).angle()
}

/// Body-to-NED rotation from roll, pitch, yaw (Z-Y-X sequence).
pub fn attitude_from_euler(roll: f64, pitch: f64, yaw: f64) -> Rotation3<f64> {
    Rotation3::from_euler_angles(roll, pitch, yaw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn radii_at_equator_and_pole() {
        let (rm, rn) = radii_of_curvature(0.0).unwrap();
        assert!((rm - 6_335_439.327).abs() < 1e-3);
        assert_eq!(rn, WGS84.semi_major_axis);
        let (rm, rn) = radii_of_curvature(FRAC_PI_2).unwrap();
        assert!((rm - 6_399_593.626).abs() < 1e-3);
        assert!((rn - 6_399_593.626).abs() < 1e-3);
        assert!(radii_of_curvature(1.6).is_err());
    }

    #[test]
    fn radii_monotone_in_latitude() {
        let mut prev = radii_of_curvature(0.0).unwrap();
        let (polar, _) = radii_of_curvature(FRAC_PI_2).unwrap();
        for i in 1..=90 {
            let cur = radii_of_curvature((i as f64).to_radians()).unwrap();
            assert!(cur.0 > prev.0 && cur.1 > prev.1);
            assert!(cur.0 <= polar + 1e-6 && cur.1 <= polar + 1e-6);
            prev = cur;
        }
    }

    #[test]
    fn somigliana_gravity() {
        let g = gravity_ned(0.0, 0.0).unwrap();
        assert!((g.z - 9.780_325_335_9).abs() < 1e-9);
        assert_eq!((g.x, g.y), (0.0, 0.0));
        let g = gravity_ned(FRAC_PI_2, 0.0).unwrap();
        assert!((g.z - 9.832_184_937_9).abs() < 1e-9);
        let lower = gravity_ned(0.7, 0.0).unwrap().z;
        let higher = gravity_ned(0.7, 1000.0).unwrap().z;
        assert!((lower - higher - 3.086e-3).abs() < 1e-12);
    }

    #[test]
    fn skew_examples() {
        assert_eq!(skew(&Vector3::zeros()), Matrix3::zeros());
        let s = skew(&Vector3::x());
        assert_eq!(s, Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0));
    }

    #[test]
    fn earth_rate_examples() {
        let w = WGS84.rotation_rate;
        assert_eq!(earth_rate_ned(0.0).unwrap(), Vector3::new(w, 0.0, 0.0));
        let p = earth_rate_ned(FRAC_PI_2).unwrap();
        assert!(p.x.abs() < 1e-20 && (p.z + w).abs() < 1e-20);
        for i in -9..=9 {
            let n = earth_rate_ned(i as f64 * 0.17).unwrap().norm();
            assert!((n - w).abs() < 1e-18);
        }
    }

    #[test]
    fn transport_rate_examples() {
        let pos = GeodeticPosition::new(0.0, 0.0, 100.0).unwrap();
        assert_eq!(transport_rate_ned(&Vector3::zeros(), &pos).unwrap(), Vector3::zeros());
        let (rm, _) = radii_of_curvature(0.0).unwrap();
        let w = transport_rate_ned(&Vector3::new(rm + 100.0, 0.0, 0.0), &pos).unwrap();
        assert!((w - Vector3::new(0.0, -1.0, 0.0)).norm() < 1e-15);

        let pos = GeodeticPosition::from_degrees(37.0, -122.0, 250.0).unwrap();
        let v = Vector3::new(12.0, -7.0, 0.4);
        let (rm, rn2) = radii_of_curvature(pos.latitude).unwrap();
        let expect = Vector3::new(
            -7.0 / (rn2 + 250.0),
            -12.0 / (rm + 250.0),
            7.0 * pos.latitude.tan() / (rn2 + 250.0),
        );
        assert!((transport_rate_ned(&v, &pos).unwrap() - expect).norm() < 1e-18);

        let polar = GeodeticPosition::from_degrees(89.95, 0.0, 0.0).unwrap();
        assert!(matches!(transport_rate_ned(&v, &polar), Err(Error::NearPole(_))));
    }

    #[test]
    fn tangent_plane_examples() {
        let anchor = GeodeticPosition::from_degrees(45.0, 7.0, 300.0).unwrap();
        assert_eq!(llh_to_local_ned(&anchor, &anchor).unwrap(), Vector3::zeros());
        let up = GeodeticPosition {
            height: 305.0,
            ..anchor
        };
        assert_eq!(llh_to_local_ned(&anchor, &up).unwrap(), Vector3::new(0.0, 0.0, -5.0));
        let (rm, _) = radii_of_curvature(anchor.latitude).unwrap();
        let north = GeodeticPosition {
            latitude: anchor.latitude + 1.0 / (rm + 300.0),
            ..anchor
        };
        assert!((llh_to_local_ned(&anchor, &north).unwrap().x - 1.0).abs() < 1e-8);
        let far = GeodeticPosition {
            latitude: anchor.latitude + 0.01,
            ..anchor
        };
        assert!(matches!(
            llh_to_local_ned(&anchor, &far),
            Err(Error::DisplacementTooLarge(_))
        ));
    }

    #[test]
    fn longitude_wraps_into_half_open_interval() {
        assert_eq!(wrap_longitude(PI), PI);
        assert_eq!(wrap_longitude(-PI), PI);
        assert!((wrap_longitude(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn orthonormalize_restores_rotation() {
        let r = attitude_from_euler(0.1, -0.2, 2.5);
        let noisy = r.matrix() + Matrix3::from_fn(|i, j| 1e-6 * ((i * 3 + j) as f64).sin());
        let fixed = orthonormalize(&noisy);
        assert!(orthonormality_error(fixed.matrix()) < 1e-14);
        assert!((fixed.matrix().determinant() - 1.0).abs() < 1e-12);
        assert!((fixed.matrix() - r.matrix()).norm() < 1e-5);
    }

    fn ulp(x: f64) -> f64 {
        let x = x.abs();
        f64::from_bits(x.to_bits() + 1) - x
    }

    proptest! {
        #[test]
        fn skew_matches_cross_product(v in prop::array::uniform3(-10.0f64..10.0), u in prop::array::uniform3(-10.0f64..10.0)) {
            let (v, u) = (Vector3::from(v), Vector3::from(u));
            let direct = Vector3::new(v.y * u.z - v.z * u.y, v.z * u.x - v.x * u.z, v.x * u.y - v.y * u.x);
            prop_assert!((skew(&v) * u - direct).norm() < 1e-12);
            prop_assert_eq!(skew(&v).transpose(), -skew(&v));
        }

        #[test]
        fn skew_is_linear(a in -5.0f64..5.0, b in -5.0f64..5.0, u in prop::array::uniform3(-10.0f64..10.0), v in prop::array::uniform3(-10.0f64..10.0)) {
            let (u, v) = (Vector3::from(u), Vector3::from(v));
            let lhs = skew(&(u * a + v * b));
            let rhs = skew(&u) * a + skew(&v) * b;
            prop_assert!((lhs - rhs).norm() < 1e-12);
        }

        #[test]
        fn tangent_plane_round_trip(lat in -1.4f64..1.4, lon in -3.1f64..3.1, h in -100.0f64..3000.0,
                                    n in -700.0f64..700.0, e in -700.0f64..700.0, d in -50.0f64..50.0) {
            let anchor = GeodeticPosition::new(lat, lon, h).unwrap();
            let ned = Vector3::new(n, e, d);
            let p = local_ned_to_llh(&anchor, &ned).unwrap();
            let back = llh_to_local_ned(&anchor, &p).unwrap();
            // 1e-9 m, widened by a few f64 angle spacings (rounding on store and difference)
            let (rm, rn) = radii_of_curvature(lat).unwrap();
            let spacing = ulp(p.latitude) * (rm + h) + ulp(p.longitude) * (rn + h) * lat.cos();
            prop_assert!((back - ned).norm() < 1e-9 + 4.0 * spacing, "{}", (back - ned).norm());
        }

        #[test]
        fn euler_attitudes_are_rotations(r in -3.1f64..3.1, p in -1.5f64..1.5, y in -3.1f64..3.1) {
            let m = *attitude_from_euler(r, p, y).matrix();
            prop_assert!(orthonormality_error(&m) < 1e-9);
            prop_assert!((m.determinant() - 1.0).abs() < 1e-9);
        }
    }
}
