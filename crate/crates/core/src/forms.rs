//! n-volume forms on R^m: pullback Hodge-star scalars, comass and the l1 / inf norms.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::Mat;
use crate::maps::MapInstance;

/// Strictly increasing 1-based multi-index.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex {
    indices: Vec<usize>,
    ambient_dim: usize,
}

impl MultiIndex {
    pub fn new(indices: Vec<usize>, ambient_dim: usize) -> Result<MultiIndex> {
        if indices.is_empty() {
            return Err(invalid("index", "empty multi-index"));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("index", format!("{indices:?} is not strictly increasing")));
        }
        if indices[0] < 1 || *indices.last().unwrap() > ambient_dim {
            return Err(invalid("index", format!("{indices:?} outside 1..={ambient_dim}")));
        }
        Ok(MultiIndex { indices, ambient_dim })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn degree(&self) -> usize {
        self.indices.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    /// 0-based rows of a Jacobian selected by this index.
    pub fn rows(&self) -> Vec<usize> {
        self.indices.iter().map(|i| i - 1).collect()
    }
}

/// Coefficient functions available to forms.  Axes are 1-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Coefficient {
    Constant(f64),
    /// scale * cos(x_axis)
    Cos { axis: usize, scale: f64 },
    /// scale * sin(x_axis)
    Sin { axis: usize, scale: f64 },
    /// offset + scale * sin(x_axis)
    ShiftedSin { axis: usize, offset: f64, scale: f64 },
}

impl Coefficient {
    pub fn eval(&self, p: &[f64]) -> f64 {
        match *self {
            Coefficient::Constant(c) => c,
            Coefficient::Cos { axis, scale } => scale * p[axis - 1].cos(),
            Coefficient::Sin { axis, scale } => scale * p[axis - 1].sin(),
            Coefficient::ShiftedSin { axis, offset, scale } => offset + scale * p[axis - 1].sin(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Coefficient::Constant(_))
    }

    /// Upper bound for |coefficient| over R^m.
    pub fn sup_abs(&self) -> f64 {
        match *self {
            Coefficient::Constant(c) => c.abs(),
            Coefficient::Cos { scale, .. } | Coefficient::Sin { scale, .. } => scale.abs(),
            Coefficient::ShiftedSin { offset, scale, .. } => offset.abs() + scale.abs(),
        }
    }

    fn axis(&self) -> Option<usize> {
        match *self {
            Coefficient::Constant(_) => None,
            Coefficient::Cos { axis, .. }
            | Coefficient::Sin { axis, .. }
            | Coefficient::ShiftedSin { axis, .. } => Some(axis),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub index: MultiIndex,
    pub coefficient: Coefficient,
}

/// Built-in bounded forms: (name, description).
pub const NAMED_FORMS: &[(&str, &str)] = &[
    ("rotating_pair", "cos(x1) dx1^dx2 + sin(x1) dx3^dx4 in R^m, m >= 4; comass >= 1/sqrt2"),
    ("modulated_area", "(2 + sin(x1)) dx1^dx2 in R^m, m >= 2; comass in [1, 3]"),
];

/// An n-volume form on R^m.
#[derive(Clone, Debug)]
pub struct VolumeForm {
    degree: usize,
    ambient_dim: usize,
    terms: Vec<Term>,
    lower_bound: f64,
    constant_comass: OnceLock<ComassEstimate>,
}

impl PartialEq for VolumeForm {
    fn eq(&self, other: &Self) -> bool {
        self.degree == other.degree
            && self.ambient_dim == other.ambient_dim
            && self.terms == other.terms
            && self.lower_bound == other.lower_bound
    }
}

impl VolumeForm {
    /// Form from explicit terms.  `lower_bound` is the declared c with ||omega|| > c;
    /// for constant forms it is computed when omitted.
    pub fn new(degree: usize, ambient_dim: usize, terms: Vec<Term>, lower_bound: Option<f64>) -> Result<VolumeForm> {
        if degree == 0 || degree > ambient_dim {
            return Err(invalid("degree", format!("need 1 <= n <= m, got n = {degree}, m = {ambient_dim}")));
        }
        if terms.is_empty() {
            return Err(invalid("terms", "a volume form needs at least one term"));
        }
        for (k, t) in terms.iter().enumerate() {
            if t.index.degree() != degree || t.index.ambient_dim() != ambient_dim {
                return Err(invalid("terms", format!("term {k} has index {:?} of the wrong shape", t.index.indices())));
            }
            if terms[..k].iter().any(|s| s.index == t.index) {
                return Err(invalid("terms", format!("repeated index {:?}", t.index.indices())));
            }
            if t.coefficient == Coefficient::Constant(0.0) {
                return Err(invalid("terms", format!("index {:?} has a zero coefficient", t.index.indices())));
            }
            if let Some(a) = t.coefficient.axis() {
                if a < 1 || a > ambient_dim {
                    return Err(invalid("terms", format!("coefficient axis {a} outside 1..={ambient_dim}")));
                }
            }
        }
        let mut form = VolumeForm {
            degree,
            ambient_dim,
            terms,
            lower_bound: 0.0,
            constant_comass: OnceLock::new(),
        };
        form.lower_bound = match lower_bound {
            Some(c) if c > 0.0 => c,
            Some(c) => return Err(invalid("lower_bound", format!("must be positive, got {c}"))),
            None if form.is_constant() => form.comass(&vec![0.0; ambient_dim], &ComassSettings::default()).value,
            None => return Err(invalid("lower_bound", "bounded forms must declare a positive lower bound")),
        };
        Ok(form)
    }

    /// Constant-coefficient form from (1-based index, value) pairs.
    pub fn constant(ambient_dim: usize, terms: &[(Vec<usize>, f64)]) -> Result<VolumeForm> {
        let degree = terms.first().map_or(0, |t| t.0.len());
        let terms = terms
            .iter()
            .map(|(idx, c)| {
                Ok(Term { index: MultiIndex::new(idx.clone(), ambient_dim)?, coefficient: Coefficient::Constant(*c) })
            })
            .collect::<Result<Vec<_>>>()?;
        VolumeForm::new(degree, ambient_dim, terms, None)
    }

    /// dx_1 ^ ... ^ dx_n on R^m.
    pub fn standard(degree: usize, ambient_dim: usize) -> Result<VolumeForm> {
        VolumeForm::constant(ambient_dim, &[((1..=degree).collect(), 1.0)])
    }

    pub fn named(name: &str, ambient_dim: usize) -> Result<VolumeForm> {
        let term = |idx: Vec<usize>, coefficient| -> Result<Term> {
            Ok(Term { index: MultiIndex::new(idx, ambient_dim)?, coefficient })
        };
        match name {
            "rotating_pair" => {
                if ambient_dim < 4 {
                    return Err(invalid("ambient_dim", "rotating_pair needs m >= 4"));
                }
                let terms = vec![
                    term(vec![1, 2], Coefficient::Cos { axis: 1, scale: 1.0 })?,
                    term(vec![3, 4], Coefficient::Sin { axis: 1, scale: 1.0 })?,
                ];
                VolumeForm::new(2, ambient_dim, terms, Some(0.5f64.sqrt() - 1e-12))
            }
            "modulated_area" => {
                let terms = vec![term(vec![1, 2], Coefficient::ShiftedSin { axis: 1, offset: 2.0, scale: 1.0 })?];
                VolumeForm::new(2, ambient_dim, terms, Some(1.0 - 1e-12))
            }
            other => Err(invalid("form", format!("unknown named form `{other}`"))),
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn declared_lower_bound(&self) -> f64 {
        self.lower_bound
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|t| t.coefficient.is_constant())
    }

    /// The index set H_omega.
    pub fn support(&self) -> Vec<MultiIndex> {
        self.terms.iter().map(|t| t.index.clone()).collect()
    }

    /// Same form with every coefficient multiplied by `c` (constant forms only).
    pub fn scaled(&self, c: f64) -> Result<VolumeForm> {
        let terms: Vec<(Vec<usize>, f64)> = self
            .terms
            .iter()
            .map(|t| match t.coefficient {
                Coefficient::Constant(v) => Ok((t.index.indices().to_vec(), v * c)),
                _ => Err(Error::Unsupported("scaling a form with non-constant coefficients".into())),
            })
            .collect::<Result<_>>()?;
        VolumeForm::constant(self.ambient_dim, &terms)
    }

    /// Sum of two constant forms of the same shape, a*self + b*other.
    pub fn combine(&self, a: f64, other: &VolumeForm, b: f64) -> Result<VolumeForm> {
        if self.degree != other.degree || self.ambient_dim != other.ambient_dim {
            return Err(Error::Dimension("forms of different shape".into()));
        }
        let mut acc: Vec<(Vec<usize>, f64)> = Vec::new();
        for (form, w) in [(self, a), (other, b)] {
            for t in &form.terms {
                let Coefficient::Constant(v) = t.coefficient else {
                    return Err(Error::Unsupported("combining forms with non-constant coefficients".into()));
                };
                match acc.iter_mut().find(|(i, _)| i == t.index.indices()) {
                    Some(e) => e.1 += w * v,
                    None => acc.push((t.index.indices().to_vec(), w * v)),
                }
            }
        }
        acc.retain(|(_, v)| *v != 0.0);
        VolumeForm::constant(self.ambient_dim, &acc)
    }

    /// Coefficients phi_I(p), in term order.
    pub fn coefficients_at(&self, p: &[f64]) -> Vec<f64> {
        self.terms.iter().map(|t| t.coefficient.eval(p)).collect()
    }

    /// omega_p(v_1, ..., v_n) where the v_k are the columns of `v` (m x n).
    pub fn evaluate(&self, coefficients: &[f64], v: &Mat) -> f64 {
        self.terms
            .iter()
            .zip(coefficients)
            .map(|(t, c)| c * v.select_rows(&t.index.rows()).det())
            .sum()
    }

    /// Pullback scalar sum_I phi_I(image) det(rows I of jac).
    pub fn star_pullback_with(&self, image: &[f64], jac: &Mat) -> f64 {
        self.evaluate(&self.coefficients_at(image), jac)
    }

    /// Comass at p: sup over unit n-tuples of |omega_p(v_1, ..., v_n)|.
    pub fn comass(&self, p: &[f64], settings: &ComassSettings) -> ComassEstimate {
        if self.terms.len() == 1 {
            return ComassEstimate { value: self.terms[0].coefficient.eval(p).abs(), converged: true };
        }
        if self.is_constant() && *settings == ComassSettings::default() {
            return *self.constant_comass.get_or_init(|| self.comass_search(&self.coefficients_at(p), settings));
        }
        self.comass_search(&self.coefficients_at(p), settings)
    }

    /// Multi-start block-coordinate ascent.  omega is linear in each v_k, so
    /// the best unit v_k with the others fixed is the normalised gradient.
    fn comass_search(&self, coefficients: &[f64], settings: &ComassSettings) -> ComassEstimate {
        let (m, n) = (self.ambient_dim, self.degree);
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
        let mut results = Vec::with_capacity(settings.restarts);
        for _ in 0..settings.restarts.max(1) {
            let mut v = Mat::zeros(m, n);
            for k in 0..n {
                let col: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
                let nrm = col.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-300);
                for i in 0..m {
                    v[(i, k)] = col[i] / nrm;
                }
            }
            let mut value = self.evaluate(coefficients, &v).abs();
            for _ in 0..settings.max_sweeps {
                let before = value;
                for k in 0..n {
                    let mut g = vec![0.0; m];
                    for (i, gi) in g.iter_mut().enumerate() {
                        let mut e = v.clone();
                        for r in 0..m {
                            e[(r, k)] = if r == i { 1.0 } else { 0.0 };
                        }
                        *gi = self.evaluate(coefficients, &e);
                    }
                    let gn = g.iter().map(|a| a * a).sum::<f64>().sqrt();
                    if gn > 0.0 {
                        for i in 0..m {
                            v[(i, k)] = g[i] / gn;
                        }
                    }
                }
                value = self.evaluate(coefficients, &v).abs();
                if value - before <= settings.tol * value.max(1.0) {
                    break;
                }
            }
            results.push(value);
        }
        let best = results.iter().copied().fold(0.0, f64::max);
        let hits = results.iter().filter(|&&r| best - r <= 1e-6 * best.max(1e-300)).count();
        ComassEstimate { value: best, converged: hits >= 2 || settings.restarts <= 1 }
    }

    /// (l1, inf) norms.  Exact for constant forms; sampled over `region` otherwise.
    pub fn norms(&self, budget: usize, region: Option<(&[f64], &[f64])>, seed: u64) -> Result<FormNorms> {
        let settings = ComassSettings::default();
        if self.is_constant() {
            let p = vec![0.0; self.ambient_dim];
            let l1 = self.coefficients_at(&p).iter().map(|c| c.abs()).sum();
            let c = self.comass(&p, &settings);
            return Ok(FormNorms { l1, inf: c.value, estimated: !c.converged });
        }
        let default_lo = vec![-std::f64::consts::PI; self.ambient_dim];
        let default_hi = vec![std::f64::consts::PI; self.ambient_dim];
        let (lo, hi) = region.unwrap_or((&default_lo, &default_hi));
        if lo.len() != self.ambient_dim || hi.len() != self.ambient_dim {
            return Err(Error::Dimension("sampling region does not match the ambient dimension".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut l1, mut inf) = (0.0f64, f64::INFINITY);
        let coarse = ComassSettings { restarts: 8, ..settings };
        for _ in 0..budget.max(1) {
            let p: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| rng.random_range(*a..=*b)).collect();
            let coeffs = self.coefficients_at(&p);
            if coeffs.iter().any(|c| !c.is_finite() || c.abs() > 1e12) {
                return Err(Error::Unbounded(format!("coefficient blows up near {p:?}")));
            }
            l1 = l1.max(coeffs.iter().map(|c| c.abs()).sum());
            inf = inf.min(self.comass_search(&coeffs, &coarse).value);
        }
        Ok(FormNorms { l1, inf, estimated: true })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComassSettings {
    pub restarts: usize,
    pub tol: f64,
    pub max_sweeps: usize,
    pub seed: u64,
}

impl Default for ComassSettings {
    fn default() -> Self {
        ComassSettings { restarts: 64, tol: 1e-8, max_sweeps: 500, seed: 0x00c0_4a55 }
    }
}

/// Comass value; `converged = false` means the value is only a lower bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComassEstimate {
    pub value: f64,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormNorms {
    pub l1: f64,
    pub inf: f64,
    pub estimated: bool,
}

/// Hodge star of the pullback, star(f^* omega), at x.
pub fn star_pullback(f: &MapInstance, omega: &VolumeForm, x: &[f64]) -> Result<f64> {
    if f.ambient_dim() != omega.ambient_dim() || f.domain_dim() != omega.degree() {
        return Err(Error::Dimension(format!(
            "map R^{} -> R^{} against a {}-form on R^{}",
            f.domain_dim(),
            f.ambient_dim(),
            omega.degree(),
            omega.ambient_dim()
        )));
    }
    let jac = f.jacobian(x)?;
    let image = f.value(x)?;
    Ok(omega.star_pullback_with(&image, &jac))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multi_index_validation() {
        assert!(MultiIndex::new(vec![1, 3], 3).is_ok());
        assert!(MultiIndex::new(vec![3, 1], 3).is_err());
        assert!(MultiIndex::new(vec![1, 4], 3).is_err());
        assert!(MultiIndex::new(vec![1, 1], 3).is_err());
    }

    #[test]
    fn single_term_comass_is_exact() {
        let w = VolumeForm::constant(3, &[(vec![1, 2], -2.5)]).unwrap();
        assert_eq!(w.comass(&[0.0; 3], &ComassSettings::default()).value, 2.5);
    }

    #[test]
    fn split_two_form_has_unit_comass() {
        let w = VolumeForm::constant(4, &[(vec![1, 2], 1.0), (vec![3, 4], 1.0)]).unwrap();
        let c = w.comass(&[0.0; 4], &ComassSettings::default());
        assert!((c.value - 1.0).abs() < 1e-8 && c.converged);
        let n = w.norms(1, None, 1).unwrap();
        assert_eq!(n.l1, 2.0);
        assert!((n.inf - 1.0).abs() < 1e-8);
    }

    #[test]
    fn rejects_degenerate_forms() {
        assert!(VolumeForm::constant(3, &[]).is_err());
        assert!(VolumeForm::constant(3, &[(vec![1, 2], 1.0), (vec![1, 2], 2.0)]).is_err());
        assert!(VolumeForm::constant(3, &[(vec![1, 2], 0.0)]).is_err());
        assert!(VolumeForm::named("modulated_area", 1).is_err());
    }

    #[test]
    fn bounded_forms_respect_declared_bound() {
        for (name, _) in NAMED_FORMS {
            let w = VolumeForm::named(name, 4).unwrap();
            let n = w.norms(64, None, 7).unwrap();
            assert!(n.inf >= w.declared_lower_bound() - 1e-9, "{name}: {n:?}");
            assert!(n.estimated);
        }
    }
}
