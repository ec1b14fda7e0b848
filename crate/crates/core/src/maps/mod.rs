//! Map catalog: closed-form values and Jacobians, operator norms, distortion sampling.

mod distortion;
mod scalar;

use std::f64::consts::E;
use std::sync::Arc;

pub use distortion::{
    condition_d_scan, distortion_at, operator_norm, CandidatePoint, DScanLevel, DScanReport, DScanSpec, DistortionSample,
};
pub use scalar::ScalarField;

use crate::error::{invalid, Error, Result};
use crate::linalg::Mat;
use crate::lusin::{LusinConstruction, LusinPart};

/// Catalog entries: (id, description).
pub const CATALOG: &[(&str, &str)] = &[
    ("radial_log_e", "R^2 -> R^2, z |-> z/(|z|(e - log|z|)) in the unit disc, z/e outside"),
    ("radial_log_1", "R^2 -> R^2, z |-> z/(|z|(1 - log|z|)) in the unit disc, identity outside"),
    ("thm2_curve", "R^2 -> R^3, radial_log_e with third coordinate log log(e + |log|z||)"),
    ("lusin_F", "R^2 -> R^2, recursive radial stretching of the Lusin construction (params: lambda, epsilon, depth)"),
    ("lusin_G", "R^2 -> R^2, square-filling part of the Lusin construction (params: lambda, epsilon, depth)"),
    ("lusin_curve", "R^2 -> R^4, (F, G) of the Lusin construction (params: lambda, epsilon, depth)"),
    ("affine", "R^n -> R^m, x |-> A x + b (params: matrix, offset)"),
];

/// Scalar fields that are not maps in the m >= n sense.
pub const SCALAR_CATALOG: &[(&str, &str)] = &[
    ("loglog_third", "R^2 -> R, log log(e + |log|z||)"),
    ("orlicz_bump_u", "R^2 -> R, the radial bump u built from the h_k / a_k tables (param: depth)"),
];

#[derive(Clone, Debug)]
pub enum MapKind {
    RadialLog { base: f64 },
    Thm2Curve,
    Affine { matrix: Mat, offset: Vec<f64> },
    Lusin { construction: Arc<LusinConstruction>, part: LusinPart },
    Compose { outer: Arc<MapInstance>, inner: Arc<MapInstance> },
}

/// A map from (a domain in) R^n to R^m.
#[derive(Clone, Debug)]
pub struct MapInstance {
    id: String,
    domain_dim: usize,
    ambient_dim: usize,
    kind: MapKind,
    singular_points: Vec<Vec<f64>>,
}

impl MapInstance {
    pub fn radial_log_e() -> MapInstance {
        MapInstance::radial("radial_log_e", E)
    }

    pub fn radial_log_1() -> MapInstance {
        MapInstance::radial("radial_log_1", 1.0)
    }

    fn radial(id: &str, base: f64) -> MapInstance {
        MapInstance {
            id: id.into(),
            domain_dim: 2,
            ambient_dim: 2,
            kind: MapKind::RadialLog { base },
            singular_points: vec![vec![0.0, 0.0]],
        }
    }

    pub fn thm2_curve() -> MapInstance {
        MapInstance {
            id: "thm2_curve".into(),
            domain_dim: 2,
            ambient_dim: 3,
            kind: MapKind::Thm2Curve,
            singular_points: vec![vec![0.0, 0.0]],
        }
    }

    pub fn affine(matrix: Mat, offset: Vec<f64>) -> Result<MapInstance> {
        if matrix.rows != offset.len() {
            return Err(invalid("offset", format!("length {} does not match {} matrix rows", offset.len(), matrix.rows)));
        }
        if matrix.cols == 0 || matrix.cols > matrix.rows {
            return Err(invalid("matrix", format!("need 1 <= n <= m, got a {}x{} matrix", matrix.rows, matrix.cols)));
        }
        if !matrix.is_finite() || offset.iter().any(|b| !b.is_finite()) {
            return Err(invalid("matrix", "entries must be finite"));
        }
        Ok(MapInstance {
            id: "affine".into(),
            domain_dim: matrix.cols,
            ambient_dim: matrix.rows,
            kind: MapKind::Affine { matrix, offset },
            singular_points: vec![],
        })
    }

    pub fn lusin(construction: Arc<LusinConstruction>, part: LusinPart) -> MapInstance {
        let singular_points = construction.level0_centers().iter().map(|c| vec![*c, 0.0]).collect();
        MapInstance {
            id: part.catalog_id().into(),
            domain_dim: 2,
            ambient_dim: part.ambient_dim(),
            kind: MapKind::Lusin { construction, part },
            singular_points,
        }
    }

    /// outer o inner.
    pub fn compose(outer: MapInstance, inner: MapInstance) -> Result<MapInstance> {
        if outer.domain_dim != inner.ambient_dim {
            return Err(Error::Dimension(format!(
                "cannot compose {} (from R^{}) after {} (into R^{})",
                outer.id, outer.domain_dim, inner.id, inner.ambient_dim
            )));
        }
        if inner.domain_dim > outer.ambient_dim {
            return Err(Error::Dimension("composition would have n > m".into()));
        }
        Ok(MapInstance {
            id: format!("{}∘{}", outer.id, inner.id),
            domain_dim: inner.domain_dim,
            ambient_dim: outer.ambient_dim,
            singular_points: inner.singular_points.clone(),
            kind: MapKind::Compose { outer: Arc::new(outer), inner: Arc::new(inner) },
        })
    }

    /// Catalog lookup for parameter-free entries.
    pub fn from_catalog(id: &str) -> Result<MapInstance> {
        match id {
            "radial_log_e" => Ok(MapInstance::radial_log_e()),
            "radial_log_1" => Ok(MapInstance::radial_log_1()),
            "thm2_curve" => Ok(MapInstance::thm2_curve()),
            "affine" | "lusin_F" | "lusin_G" | "lusin_curve" => {
                Err(invalid("map.id", format!("`{id}` needs parameters")))
            }
            other => Err(invalid("map.id", format!("unknown catalog map `{other}`"))),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn kind(&self) -> &MapKind {
        &self.kind
    }

    pub fn domain_dim(&self) -> usize {
        self.domain_dim
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn singular_points(&self) -> &[Vec<f64>] {
        &self.singular_points
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.domain_dim {
            return Err(Error::Dimension(format!("{} takes points of R^{}, got {}", self.id, self.domain_dim, x.len())));
        }
        if x.iter().any(|c| !c.is_finite()) {
            return Err(Error::Evaluation(format!("non-finite point {x:?}")));
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        match &self.kind {
            MapKind::RadialLog { base } => {
                let rho = x[0].hypot(x[1]);
                if rho == 0.0 {
                    return Ok(vec![0.0, 0.0]);
                }
                let s = radial_profile(*base, rho).0 / rho;
                Ok(vec![s * x[0], s * x[1]])
            }
            MapKind::Thm2Curve => {
                let rho = x[0].hypot(x[1]);
                if rho == 0.0 {
                    return Err(Error::Evaluation("log log(e + |log|z||) is infinite at the origin".into()));
                }
                let s = radial_profile(E, rho).0 / rho;
                Ok(vec![s * x[0], s * x[1], loglog_third(rho)])
            }
            MapKind::Affine { matrix, offset } => {
                Ok(matrix.mul_vec(x).iter().zip(offset).map(|(a, b)| a + b).collect())
            }
            MapKind::Lusin { construction, part } => construction.value_plain(*part, [x[0], x[1]]),
            MapKind::Compose { outer, inner } => outer.value(&inner.value(x)?),
        }
    }

    pub fn jacobian(&self, x: &[f64]) -> Result<Mat> {
        self.check_point(x)?;
        match &self.kind {
            MapKind::RadialLog { base } => {
                let rho = x[0].hypot(x[1]);
                if rho == 0.0 {
                    return Err(Error::Evaluation(format!("{} is not differentiable at the origin", self.id)));
                }
                Ok(radial_jacobian(*base, x[0], x[1]))
            }
            MapKind::Thm2Curve => {
                let rho = x[0].hypot(x[1]);
                if rho == 0.0 {
                    return Err(Error::Evaluation("thm2_curve is not differentiable at the origin".into()));
                }
                let mut j = radial_jacobian(E, x[0], x[1]);
                let g = loglog_third_slope(rho) / rho;
                j.data.extend_from_slice(&[g * x[0], g * x[1]]);
                j.rows = 3;
                Ok(j)
            }
            MapKind::Affine { matrix, .. } => Ok(matrix.clone()),
            MapKind::Lusin { construction, part } => construction.jacobian_plain(*part, [x[0], x[1]]),
            MapKind::Compose { outer, inner } => {
                let ji = inner.jacobian(x)?;
                let jo = outer.jacobian(&inner.value(x)?)?;
                let mut out = Mat::zeros(jo.rows, ji.cols);
                for i in 0..jo.rows {
                    for j in 0..ji.cols {
                        out[(i, j)] = (0..jo.cols).map(|k| jo[(i, k)] * ji[(k, j)]).sum();
                    }
                }
                Ok(out)
            }
        }
    }

    /// Central differences with step 1e-6 * max(1, |x|).
    pub fn jacobian_fd(&self, x: &[f64]) -> Result<Mat> {
        self.check_point(x)?;
        let h = 1e-6 * crate::linalg::norm(x).max(1.0);
        let mut out = Mat::zeros(self.ambient_dim, self.domain_dim);
        for j in 0..self.domain_dim {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] += h;
            xm[j] -= h;
            let (fp, fm) = (self.value(&xp)?, self.value(&xm)?);
            for i in 0..self.ambient_dim {
                out[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        Ok(out)
    }

    /// The paper's closed-form distortion where it gives one.
    pub fn reference_distortion(&self, x: &[f64]) -> Option<f64> {
        let rho = x.first().copied()?.hypot(x.get(1).copied()?);
        match &self.kind {
            MapKind::RadialLog { base } if rho > 0.0 => Some(if rho < 1.0 { base - rho.ln() } else { 1.0 }),
            MapKind::Thm2Curve if rho > 0.0 && rho <= 1.0 => {
                let l = E - rho.ln();
                Some((1.0 / l.ln() + 1.0).powi(2) * l)
            }
            _ => None,
        }
    }
}

/// |F(z)| and d|F|/d rho for the radial maps: 1/(b - log rho) inside the unit disc.
fn radial_profile(base: f64, rho: f64) -> (f64, f64) {
    if rho < 1.0 {
        let l = base - rho.ln();
        (1.0 / l, 1.0 / (rho * l * l))
    } else {
        (rho / base, 1.0 / base)
    }
}

fn radial_jacobian(base: f64, x: f64, y: f64) -> Mat {
    let rho = x.hypot(y);
    let (phi, dphi) = radial_profile(base, rho);
    let t = phi / rho;
    let (ux, uy) = (x / rho, y / rho);
    // t (I - u u^T) + phi' u u^T
    Mat {
        rows: 2,
        cols: 2,
        data: vec![
            t + (dphi - t) * ux * ux,
            (dphi - t) * ux * uy,
            (dphi - t) * ux * uy,
            t + (dphi - t) * uy * uy,
        ],
    }
}

/// log log(e + |log rho|).
pub fn loglog_third(rho: f64) -> f64 {
    (E + rho.ln().abs()).ln().ln()
}

/// d/drho of [`loglog_third`].
pub fn loglog_third_slope(rho: f64) -> f64 {
    let l = E + rho.ln().abs();
    rho.ln().signum() / (rho * l * l.ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn radial_log_e_unit_circle() {
        let f = MapInstance::radial_log_e();
        let j = f.jacobian(&[1.0, 0.0]).unwrap();
        assert!(close(j[(1, 1)], 1.0 / E, 1e-14) && close(j[(0, 0)], 1.0 / E, 1e-14));
        // just inside: tangential 1/e, radial 1/e^2
        let j = f.jacobian(&[1.0 - 1e-12, 0.0]).unwrap();
        assert!(close(j[(1, 1)], 1.0 / E, 1e-10));
        assert!(close(j[(0, 0)], 1.0 / (E * E), 1e-10));
        assert!(close(f.value(&[1.0, 0.0]).unwrap()[0], 1.0 / E, 1e-15));
        assert!(close(f.value(&[2.0, 0.0]).unwrap()[0], 2.0 / E, 1e-15));
    }

    #[test]
    fn affine_rejects_bad_shapes() {
        assert!(MapInstance::affine(Mat::from_rows(&[vec![1.0, 0.0]]), vec![0.0]).is_err());
        assert!(MapInstance::affine(Mat::identity(2), vec![0.0]).is_err());
    }

    #[test]
    fn thm2_reference_at_unit_circle() {
        let k = MapInstance::thm2_curve().reference_distortion(&[0.0, 1.0]).unwrap();
        assert!(close(k, 4.0 * E, 1e-15));
    }

    #[test]
    fn composition_chain_rule() {
        let a = MapInstance::affine(Mat::from_rows(&[vec![2.0, 1.0], vec![0.0, 1.0]]), vec![0.1, 0.2]).unwrap();
        let c = MapInstance::compose(MapInstance::radial_log_1(), a).unwrap();
        let x = [0.13, -0.21];
        let j = c.jacobian(&x).unwrap();
        let fd = c.jacobian_fd(&x).unwrap();
        for k in 0..4 {
            assert!((j.data[k] - fd.data[k]).abs() < 1e-6 * j.max_abs());
        }
    }
}
