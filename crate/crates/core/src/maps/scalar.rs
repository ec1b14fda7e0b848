use std::sync::Arc;

use super::{loglog_third, loglog_third_slope, MapInstance};
use crate::bump::BumpTables;
use crate::error::{Error, Result};
use crate::Radius;

/// Real-valued fields on R^2 used by the oscillation and integrability checks.
#[derive(Clone, Debug)]
pub enum ScalarField {
    /// log log(e + |log|z||), singular at the origin.
    LogLogThird,
    /// The radial bump u(|z|); constant 1 outside the unit disc.
    Bump(Arc<BumpTables>),
    /// One coordinate (0-based) of a map.
    Coordinate { map: Arc<MapInstance>, index: usize },
    /// a . x + b
    Linear { coeffs: Vec<f64>, offset: f64 },
}

impl ScalarField {
    pub fn name(&self) -> String {
        match self {
            ScalarField::LogLogThird => "loglog_third".into(),
            ScalarField::Bump(_) => "orlicz_bump_u".into(),
            ScalarField::Coordinate { map, index } => format!("{}[{}]", map.id(), index + 1),
            ScalarField::Linear { .. } => "linear".into(),
        }
    }

    pub fn singular_points(&self) -> Vec<Vec<f64>> {
        match self {
            ScalarField::LogLogThird | ScalarField::Bump(_) => vec![vec![0.0, 0.0]],
            ScalarField::Coordinate { map, .. } => map.singular_points().to_vec(),
            ScalarField::Linear { .. } => vec![],
        }
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        match self {
            ScalarField::LogLogThird => {
                let rho = x[0].hypot(x[1]);
                if rho == 0.0 {
                    return Err(Error::Evaluation("loglog_third is infinite at the origin".into()));
                }
                Ok(loglog_third(rho))
            }
            ScalarField::Bump(t) => {
                let rho = x[0].hypot(x[1]);
                if rho >= 1.0 {
                    return Ok(1.0);
                }
                if rho == 0.0 {
                    return Err(Error::Evaluation("u is infinite at the origin".into()));
                }
                t.u(Radius::new(rho))
            }
            ScalarField::Coordinate { map, index } => Ok(map.value(x)?[*index]),
            ScalarField::Linear { coeffs, offset } => {
                Ok(coeffs.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + offset)
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let radial = |slope: f64| {
            let rho = x[0].hypot(x[1]);
            vec![slope * x[0] / rho, slope * x[1] / rho]
        };
        match self {
            ScalarField::LogLogThird => Ok(radial(loglog_third_slope(x[0].hypot(x[1])))),
            ScalarField::Bump(t) => {
                let rho = x[0].hypot(x[1]);
                if rho >= 1.0 {
                    return Ok(vec![0.0, 0.0]);
                }
                Ok(radial(-t.slope(Radius::new(rho))?))
            }
            ScalarField::Coordinate { map, index } => Ok(map.jacobian(x)?.row(*index).to_vec()),
            ScalarField::Linear { coeffs, .. } => Ok(coeffs.clone()),
        }
    }
}
