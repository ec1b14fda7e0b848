//! Map and form instances from the `[map]` / `[form]` tables.

use std::sync::Arc;

use fdcurve::bump::BumpTables;
use fdcurve::forms::VolumeForm;
use fdcurve::linalg::Mat;
use fdcurve::lusin::{LusinConstruction, LusinParams, LusinPart};
use fdcurve::maps::MapInstance;

use crate::config::{FormConfig, MapConfig, RunConfig};
use crate::CliError;

pub(crate) struct Context {
    pub map: Option<MapInstance>,
    pub form: Option<VolumeForm>,
}

impl Context {
    pub fn build(cfg: &RunConfig) -> Result<Context, CliError> {
        let map = cfg.map.as_ref().map(build_map).transpose()?;
        let form = build_form(cfg.form.as_ref(), map.as_ref())?;
        if let (Some(m), Some(f)) = (&map, &form) {
            if f.degree() != m.domain_dim() || f.ambient_dim() != m.ambient_dim() {
                return Err(CliError::config(
                    "form",
                    format!(
                        "a {}-form on R^{} does not pull back along {} (R^{} -> R^{})",
                        f.degree(),
                        f.ambient_dim(),
                        m.id(),
                        m.domain_dim(),
                        m.ambient_dim()
                    ),
                ));
            }
        }
        Ok(Context { map, form })
    }

    pub fn map(&self) -> &MapInstance {
        self.map.as_ref().expect("validated: task needs a map")
    }

    pub fn form(&self) -> &VolumeForm {
        self.form.as_ref().expect("a form exists whenever a map does")
    }
}

fn unused(key: &str, present: bool, id: &str) -> Result<(), CliError> {
    if present {
        Err(CliError::config(&format!("map.{key}"), format!("not a parameter of `{id}`")))
    } else {
        Ok(())
    }
}

fn build_map(m: &MapConfig) -> Result<MapInstance, CliError> {
    let id = m.id.as_str();
    let lusin_keys = m.lambda.is_some() || m.epsilon.is_some() || m.depth.is_some();
    let core = |e| CliError::from_core(e, "map");
    match id {
        "affine" => {
            unused("lambda", lusin_keys, id)?;
            let rows = m.matrix.as_ref().ok_or_else(|| CliError::config("map.matrix", "affine maps need a matrix"))?;
            if rows.is_empty() || rows.iter().any(|r| r.len() != rows[0].len()) {
                return Err(CliError::config("map.matrix", "rows must be nonempty and of equal length"));
            }
            let offset = m.offset.clone().unwrap_or_else(|| vec![0.0; rows.len()]);
            MapInstance::affine(Mat::from_rows(rows), offset).map_err(core)
        }
        "lusin_F" | "lusin_G" | "lusin_curve" => {
            unused("matrix", m.matrix.is_some(), id)?;
            unused("offset", m.offset.is_some(), id)?;
            let d = LusinParams::default();
            let params = LusinParams {
                lambda: m.lambda.unwrap_or(d.lambda),
                epsilon: m.epsilon.unwrap_or(d.epsilon),
                depth: m.depth.unwrap_or(d.depth),
            };
            let part = match id {
                "lusin_F" => LusinPart::F,
                "lusin_G" => LusinPart::G,
                _ => LusinPart::Curve,
            };
            let bump = Arc::new(BumpTables::build(2, 12, 1e-12).map_err(core)?);
            let c = LusinConstruction::build(params, bump).map_err(core)?;
            Ok(MapInstance::lusin(Arc::new(c), part))
        }
        _ => {
            unused("matrix", m.matrix.is_some(), id)?;
            unused("offset", m.offset.is_some(), id)?;
            unused("lambda", lusin_keys, id)?;
            MapInstance::from_catalog(id).map_err(|e| CliError::from_core(e, "map").rekey("map.map.id", "map.id"))
        }
    }
}

fn build_form(f: Option<&FormConfig>, map: Option<&MapInstance>) -> Result<Option<VolumeForm>, CliError> {
    let core = |e| CliError::from_core(e, "form");
    let Some(f) = f else {
        return map.map(|m| VolumeForm::standard(m.domain_dim(), m.ambient_dim()).map_err(core)).transpose();
    };
    let ambient = f
        .ambient_dim
        .or(map.map(|m| m.ambient_dim()))
        .ok_or_else(|| CliError::config("form.ambient_dim", "needed when there is no [map]"))?;
    match (&f.named, &f.terms) {
        (Some(name), None) => VolumeForm::named(name, ambient).map(Some).map_err(core),
        (None, Some(terms)) => {
            let pairs: Vec<(Vec<usize>, f64)> = terms.iter().map(|t| (t.index.clone(), t.value)).collect();
            VolumeForm::constant(ambient, &pairs).map(Some).map_err(core)
        }
        (Some(_), Some(_)) => Err(CliError::config("form.terms", "give either `named` or `terms`, not both")),
        (None, None) => {
            let m = map.ok_or_else(|| CliError::config("form.terms", "a [form] table needs `named` or `terms`"))?;
            VolumeForm::standard(m.domain_dim(), ambient).map(Some).map_err(core)
        }
    }
}

impl CliError {
    /// Replace a doubled scope ("map.map.id") produced by keys that already carry one.
    fn rekey(self, from: &str, to: &str) -> CliError {
        match self {
            CliError::Config { key, msg } if key == from => CliError::Config { key: to.into(), msg },
            other => other,
        }
    }
}
