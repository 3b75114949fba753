//! Normalized CSV datasets: `imu.csv`, `gnss.csv` and an optional `truth.csv`.
//!
//! Numbers are written with 17 significant digits so that a written dataset
//! loads back bit for bit.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geodesy::GeodeticPosition;
use crate::gnss_accel::GnssFix;
use crate::strapdown::ImuSample;

pub const IMU_HEADER: [&str; 7] = ["t", "fx", "fy", "fz", "wx", "wy", "wz"];
pub const GNSS_HEADER: [&str; 7] = ["t", "lat", "lon", "h", "sn", "se", "sd"];
pub const TRUTH_HEADER: [&str; 4] = ["t", "lat", "lon", "h"];

/// A timestamped reference position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthPoint {
    pub timestamp: f64,
    pub position: GeodeticPosition,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetBundle {
    pub imu: Vec<ImuSample>,
    pub gnss: Vec<GnssFix>,
    pub truth: Option<Vec<TruthPoint>>,
}

/// Locations of the three stream files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetPaths {
    pub imu: PathBuf,
    pub gnss: PathBuf,
    pub truth: PathBuf,
}

impl DatasetPaths {
    /// The standard file names inside `dir`.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        Self {
            imu: dir.join("imu.csv"),
            gnss: dir.join("gnss.csv"),
            truth: dir.join("truth.csv"),
        }
    }
}

/// Formats a number with 17 significant digits.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads a CSV file with an exact header into rows of finite numbers whose
/// first column strictly increases. Returns `(line, values)` pairs.
fn read_numeric(path: &Path, header: &[&str]) -> Result<Vec<(u64, Vec<f64>)>> {
    let file = File::open(path).map_err(|e| io_error(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let found = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(parse_err(
            1,
            format!(
                "expected header '{}', found '{}'",
                header.join(","),
                found.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut rows = Vec::new();
    let mut last_t = f64::NEG_INFINITY;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        let mut values = Vec::with_capacity(header.len());
        for (field, name) in record.iter().zip(header) {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, format!("column '{name}': cannot parse '{field}'")))?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    path: path.to_path_buf(),
                    line,
                    column: name.to_string(),
                });
            }
            values.push(v);
        }
        if !(values[0] > last_t) {
            return Err(Error::NonMonotone {
                path: path.to_path_buf(),
                line,
            });
        }
        last_t = values[0];
        rows.push((line, values));
    }
    Ok(rows)
}

fn position_at(path: &Path, line: u64, v: &[f64]) -> Result<GeodeticPosition> {
    GeodeticPosition::new(v[0], v[1], v[2]).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    })
}

pub fn load_imu(path: &Path) -> Result<Vec<ImuSample>> {
    Ok(read_numeric(path, &IMU_HEADER)?
        .into_iter()
        .map(|(_, v)| ImuSample::new(v[0], Vector3::new(v[1], v[2], v[3]), Vector3::new(v[4], v[5], v[6])))
        .collect())
}

pub fn load_gnss(path: &Path) -> Result<Vec<GnssFix>> {
    read_numeric(path, &GNSS_HEADER)?
        .into_iter()
        .map(|(line, v)| {
            let position = position_at(path, line, &v[1..4])?;
            GnssFix::new(v[0], position, Vector3::new(v[4], v[5], v[6])).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn load_truth(path: &Path) -> Result<Vec<TruthPoint>> {
    read_numeric(path, &TRUTH_HEADER)?
        .into_iter()
        .map(|(line, v)| {
            Ok(TruthPoint {
                timestamp: v[0],
                position: position_at(path, line, &v[1..4])?,
            })
        })
        .collect()
}

/// Loads the IMU and GNSS streams, and the truth stream when its file exists.
pub fn load_dataset(paths: &DatasetPaths) -> Result<DatasetBundle> {
    let imu = load_imu(&paths.imu)?;
    let gnss = load_gnss(&paths.gnss)?;
    let truth = if paths.truth.exists() {
        Some(load_truth(&paths.truth)?)
    } else {
        None
    };
    if imu.is_empty() {
        return Err(Error::Empty("IMU stream"));
    }
    Ok(DatasetBundle { imu, gnss, truth })
}

/// Writes rows of numbers under `header`.
pub fn write_numeric<'a, I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let fields: Vec<String> = row.iter().map(|v| format_f64(*v)).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    write_text(path, &out)
}

/// Writes `text` to `path`, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
    }
    let mut file = File::create(path).map_err(|e| io_error(path, e))?;
    file.write_all(text.as_bytes()).map_err(|e| io_error(path, e))
}

pub fn write_dataset(paths: &DatasetPaths, bundle: &DatasetBundle) -> Result<()> {
    let imu: Vec<[f64; 7]> = bundle
        .imu
        .iter()
        .map(|s| {
            let (f, w) = (s.specific_force, s.angular_rate);
            [s.timestamp, f.x, f.y, f.z, w.x, w.y, w.z]
        })
        .collect();
    write_numeric(&paths.imu, &IMU_HEADER, imu.iter().map(|r| r.as_slice()))?;
    let gnss: Vec<[f64; 7]> = bundle
        .gnss
        .iter()
        .map(|g| {
            let p = g.position;
            [
                g.timestamp,
                p.latitude,
                p.longitude,
                p.height,
                g.sigma.x,
                g.sigma.y,
                g.sigma.z,
            ]
        })
        .collect();
    write_numeric(&paths.gnss, &GNSS_HEADER, gnss.iter().map(|r| r.as_slice()))?;
    if let Some(truth) = &bundle.truth {
        let rows: Vec<[f64; 4]> = truth
            .iter()
            .map(|t| {
                [
                    t.timestamp,
                    t.position.latitude,
                    t.position.longitude,
                    t.position.height,
                ]
            })
            .collect();
        write_numeric(&paths.truth, &TRUTH_HEADER, rows.iter().map(|r| r.as_slice()))?;
    }
    Ok(())
}
