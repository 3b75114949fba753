//! Browser bindings for three interactive views: the least-squares window
//! explorer, the baseline versus acceleration-aided comparison and the Earth
//! model curves. Each view has a plain Rust entry point returning a flat
//! `Vec<f64>` and a thin `wasm_bindgen` wrapper around it.

use insnav::config::{ProfileName, RunConfig};
use insnav::eval::Variant;
use insnav::geodesy::{earth_rate_ned, gravity_ned, radii_of_curvature, NedVector};
use insnav::gnss_accel::{accel_noise_cov, extraction_weights, fit_quadratic};
use insnav::pipeline::{execute, Mode, RunPlan};
use nalgebra::Vector3;
use wasm_bindgen::prelude::*;

/// Single-axis quadratic fit of a fix window.
///
/// Output layout: `[accel, velocity, position, accel_sigma, B_0 .. B_{m-1}, r_0 .. r_{m-1}]`
/// where `B` are the extraction weights, `r` the fit residuals, and the
/// polynomial is expressed about the first timestamp.
pub fn window_fit(times: &[f64], positions: &[f64], sigma: f64) -> Result<Vec<f64>, String> {
    if times.len() != positions.len() {
        return Err(format!("{} times for {} positions", times.len(), positions.len()));
    }
    let t0 = *times.first().ok_or("empty window")?;
    let ned: Vec<NedVector> = positions.iter().map(|p| Vector3::new(*p, 0.0, 0.0)).collect();
    let fit = fit_quadratic(times, t0, &ned).map_err(|e| e.to_string())?;
    let weights = extraction_weights(times, t0).map_err(|e| e.to_string())?;
    let var = accel_noise_cov(&weights, &vec![sigma; times.len()]).map_err(|e| e.to_string())?;
    let mut out = vec![fit.accel.x, fit.velocity.x, fit.position.x, var.sqrt()];
    out.extend(weights.iter());
    out.extend(fit.residuals.iter().map(|r| r.x));
    Ok(out)
}

/// Simulates one seed and runs both filter variants on it.
///
/// Output layout: `[prmse_baseline, prmse_accel, improvement_pct,
/// bias_error_baseline, bias_error_accel, n]` followed by `n` triples
/// `(t, |error| baseline, |error| accel)`.
pub fn compare_variants(
    profile: &str,
    duration: f64,
    seed: u64,
    accel_bias: f64,
    gnss_sigma: f64,
) -> Result<Vec<f64>, String> {
    let mut config = RunConfig {
        profile: profile.parse::<ProfileName>()?,
        duration,
        seed,
        ..RunConfig::default()
    };
    config.accel_bias = Vector3::new(accel_bias, -accel_bias, accel_bias);
    config.gnss_sigma = Vector3::repeat(gnss_sigma);
    let plan = RunPlan {
        mode: Mode::Simulate,
        variants: Variant::ALL.to_vec(),
        repetitions: 1,
        config,
        out_dir: Default::default(),
    };
    let batch = execute(&plan, None).map_err(|e| e.to_string())?;
    let rep = &batch.repetitions[0];
    let row = rep.comparison().ok_or("missing variant")?.map_err(|e| e.to_string())?;
    let norms = |v: Variant| -> Result<Vec<(f64, f64)>, String> {
        let (_, result) = &rep.runs[&v];
        let errors = result.errors().map_err(|e| e.to_string())?;
        Ok(result
            .epochs
            .iter()
            .zip(errors)
            .map(|(e, err)| (e.timestamp, err.norm()))
            .collect())
    };
    let (base, aided) = (norms(Variant::Baseline)?, norms(Variant::AccelAided)?);
    let mut out = vec![
        row.prmse_baseline,
        row.prmse_accel,
        row.improvement,
        rep.accel_bias_error(Variant::Baseline).unwrap_or(f64::NAN),
        rep.accel_bias_error(Variant::AccelAided).unwrap_or(f64::NAN),
        base.len() as f64,
    ];
    for ((t, b), (_, a)) in base.iter().zip(&aided) {
        out.extend([*t, *b, *a]);
    }
    Ok(out)
}

/// Earth model along a latitude sweep.
///
/// Output: `n` rows of `(lat_deg, gravity_down, meridian_radius,
/// transverse_radius, earth_rate_north, earth_rate_down)`.
pub fn earth_curves(lat_from_deg: f64, lat_to_deg: f64, n: usize, height: f64) -> Result<Vec<f64>, String> {
    if n < 2 {
        return Err("need at least two samples".into());
    }
    let mut out = Vec::with_capacity(6 * n);
    for k in 0..n {
        let lat_deg = lat_from_deg + (lat_to_deg - lat_from_deg) * k as f64 / (n - 1) as f64;
        let lat = lat_deg.to_radians();
        let g = gravity_ned(lat, height).map_err(|e| e.to_string())?;
        let (rm, rn) = radii_of_curvature(lat).map_err(|e| e.to_string())?;
        let w = earth_rate_ned(lat).map_err(|e| e.to_string())?;
        out.extend([lat_deg, g.z, rm, rn, w.x, w.z]);
    }
    Ok(out)
}

#[wasm_bindgen(js_name = windowFit)]
pub fn window_fit_js(times: &[f64], positions: &[f64], sigma: f64) -> Result<Vec<f64>, JsError> {
    window_fit(times, positions, sigma).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = compareVariants)]
pub fn compare_variants_js(
    profile: &str,
    duration: f64,
    seed: u32,
    accel_bias: f64,
    gnss_sigma: f64,
) -> Result<Vec<f64>, JsError> {
    compare_variants(profile, duration, seed.into(), accel_bias, gnss_sigma).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = earthCurves)]
pub fn earth_curves_js(lat_from_deg: f64, lat_to_deg: f64, n: usize, height: f64) -> Result<Vec<f64>, JsError> {
    earth_curves(lat_from_deg, lat_to_deg, n, height).map_err(|e| JsError::new(&e))
}
