//! Browser bindings for three views: the radial bump u, the distortion of the
//! catalog maps along a radius, and the square-filling path of the Lusin G.
//!
//! Each export returns a flat `Float64Array` of interleaved samples.

use std::sync::Arc;

use fdcurve::bump::BumpTables;
use fdcurve::forms::VolumeForm;
use fdcurve::lusin::{LusinConstruction, LusinParams, LusinPart};
use fdcurve::maps::{distortion_at, MapInstance};
use fdcurve::Radius;
use wasm_bindgen::prelude::*;

/// (level index, u, gradient margin) triples from |x| = 1/e down to a_{depth+1}.
pub fn bump_samples(depth: usize, samples: usize) -> Result<Vec<f64>, String> {
    let b = BumpTables::build(2, depth, 1e-10).map_err(|e| e.to_string())?;
    let top = Radius::from_neg_log(1.0 + 1e-9).level();
    let bottom = b.a(depth + 1).level();
    let m = samples.max(2);
    let mut out = Vec::with_capacity(3 * m);
    for i in 0..m {
        let r = Radius::from_level(top + (bottom - top) * i as f64 / (m - 1) as f64);
        out.push(r.level());
        out.push(b.u(r).map_err(|e| e.to_string())?);
        out.push(b.gradient_bound_margin(r).map_err(|e| e.to_string())?);
    }
    Ok(out)
}

/// (log10 |z|, K, reference K) triples along the positive axis for a catalog map.
pub fn distortion_samples(map: &str, samples: usize) -> Result<Vec<f64>, String> {
    let f = MapInstance::from_catalog(map).map_err(|e| e.to_string())?;
    let omega = VolumeForm::standard(f.domain_dim(), f.ambient_dim()).map_err(|e| e.to_string())?;
    let m = samples.max(2);
    let mut out = Vec::with_capacity(3 * m);
    for i in 0..m {
        // |z| from 1e-12 to 1
        let t = -12.0 + 12.0 * i as f64 / (m - 1) as f64;
        let s = distortion_at(&f, &omega, &[10f64.powf(t), 0.0]).map_err(|e| e.to_string())?;
        out.extend([t, s.distortion, s.reference_distortion.unwrap_or(f64::NAN)]);
    }
    Ok(out)
}

/// (x, F_1(x, 0), G_1, G_2) quadruples for x in [0, 1].
pub fn lusin_samples(depth: usize, epsilon: f64, samples: usize) -> Result<Vec<f64>, String> {
    let bump = Arc::new(BumpTables::build(2, 12, 1e-12).map_err(|e| e.to_string())?);
    let c = LusinConstruction::build(LusinParams { lambda: 1.0, epsilon, depth }, bump).map_err(|e| e.to_string())?;
    let m = samples.max(2);
    let mut out = Vec::with_capacity(4 * m);
    for i in 0..m {
        let x = i as f64 / (m - 1) as f64;
        let v = c.value_plain(LusinPart::Curve, [x, 0.0]).map_err(|e| e.to_string())?;
        out.extend([x, v[0], v[2], v[3]]);
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn bump_profile(depth: usize, samples: usize) -> Result<Vec<f64>, JsError> {
    bump_samples(depth, samples).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn distortion_profile(map: &str, samples: usize) -> Result<Vec<f64>, JsError> {
    distortion_samples(map, samples).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn lusin_graph(depth: usize, epsilon: f64, samples: usize) -> Result<Vec<f64>, JsError> {
    lusin_samples(depth, epsilon, samples).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_rises_through_the_shells() {
        let v = bump_samples(4, 50).unwrap();
        assert_eq!(v.len(), 150);
        let u: Vec<f64> = v.chunks(3).map(|c| c[1]).collect();
        assert!(u.windows(2).all(|w| w[1] >= w[0]));
        assert!((u[49] - 5.0).abs() < 1e-6);
        assert!(v.chunks(3).all(|c| c[2] <= 1.0));
    }

    #[test]
    fn radial_distortion_is_e_minus_log() {
        let v = distortion_samples("radial_log_e", 13).unwrap();
        // the last sample sits on the unit circle, where the map is z/e
        for c in v.chunks(3).filter(|c| c[0] < 0.0) {
            let l = std::f64::consts::E - c[0] * std::f64::consts::LN_10;
            assert!((c[1] - l).abs() < 1e-9 * l);
        }
        assert!(distortion_samples("lusin_G", 3).is_err());
    }

    #[test]
    fn lusin_path_reaches_square_centres() {
        let v = lusin_samples(2, 0.25, 101).unwrap();
        let g: Vec<[f64; 2]> = v.chunks(4).map(|c| [c[2], c[3]]).collect();
        assert!(g.iter().all(|p| p[0].abs() <= 1.0 && p[1].abs() <= 1.0));
        assert!(v.chunks(4).all(|c| c[1] >= 0.0 && c[1] <= 1.0));
        assert!(lusin_samples(2, 0.0, 3).is_err());
    }
}
