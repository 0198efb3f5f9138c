//! Finsler metric families and the zeroth layer of tensors derived from them:
//! fundamental tensor `g`, angular metric `ℏ`, Cartan tensor `T`, contracted
//! torsion `C` and its dual vector `C̄`.
//!
//! All coordinate formulas use the Hessian-of-½L² convention:
//! `g_ij = ½ ∂²L²/∂yⁱ∂yʲ`, `T_ijk = ½ ∂g_ij/∂yᵏ`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::diffcore::fd::{default_step, richardson2};
use crate::diffcore::{Jet, MultiIndex, Scalar, ScalarFn};
use crate::error::{FinslerError, Result};
use crate::expr::Expr;
use crate::local::LocalGeometry;
use crate::tensor::{PointTensor, Symmetry, Variance};

/// Largest dimension the jet machinery supports (`2n` variables).
pub const MAX_DIM: usize = crate::diffcore::MAX_VARS / 2;

/// A base point `x` together with a non-zero direction `y`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JetPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl JetPoint {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> JetPoint {
        assert_eq!(x.len(), y.len(), "x and y must have the same dimension");
        JetPoint { x, y }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// `(x¹..xⁿ, y¹..yⁿ)` as one flat vector.
    pub fn flat(&self) -> Vec<f64> {
        self.x.iter().chain(&self.y).copied().collect()
    }

    pub fn scaled(&self, lambda: f64) -> JetPoint {
        JetPoint::new(self.x.clone(), self.y.iter().map(|v| v * lambda).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetricFamily {
    Euclidean,
    /// `L² = a_ij(x) yⁱ yʲ`
    Riemannian { a: Vec<Expr> },
    /// `L = sqrt(a_ij(x) yⁱ yʲ) + b_i(x) yⁱ`
    Randers { a: Vec<Expr>, b: Vec<Expr> },
    /// `L` given directly as an expression in `(x, y)`.
    Expression { l: Expr },
}

impl MetricFamily {
    pub fn name(&self) -> &'static str {
        match self {
            MetricFamily::Euclidean => "euclidean",
            MetricFamily::Riemannian { .. } => "riemannian",
            MetricFamily::Randers { .. } => "randers",
            MetricFamily::Expression { .. } => "expression",
        }
    }
}

/// Name and one-line description of every shipped family.
pub fn shipped_families() -> Vec<(&'static str, &'static str)> {
    vec![
        ("euclidean", "L = |y|, flat and y-independent"),
        ("riemannian", "L = sqrt(a_ij(x) y^i y^j) with a given positive-definite matrix field"),
        ("randers", "L = sqrt(a_ij(x) y^i y^j) + b_i(x) y^i with |b|_a < 1"),
        ("expression", "L given directly as an expression in x1..xn, y1..yn"),
    ]
}

/// A Finsler function together with the box its base points are drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricModel {
    n: usize,
    family: MetricFamily,
    x_box: (f64, f64),
}

impl MetricModel {
    pub fn new(n: usize, family: MetricFamily) -> Result<MetricModel> {
        if !(2..=MAX_DIM).contains(&n) {
            return Err(FinslerError::InvalidModel(format!(
                "dimension must be between 2 and {MAX_DIM}, got {n}"
            )));
        }
        match &family {
            MetricFamily::Euclidean => {}
            MetricFamily::Riemannian { a } => check_matrix(n, a)?,
            MetricFamily::Randers { a, b } => {
                check_matrix(n, a)?;
                if b.len() != n {
                    return Err(FinslerError::InvalidModel(format!(
                        "b needs {n} components, got {}",
                        b.len()
                    )));
                }
                for e in b {
                    e.check_dimension(n)?;
                    if e.depends_on_y() {
                        return Err(FinslerError::InvalidModel(format!("b component `{e}` depends on y")));
                    }
                }
            }
            MetricFamily::Expression { l } => l.check_dimension(n)?,
        }
        Ok(MetricModel {
            n,
            family,
            x_box: (-0.5, 0.5),
        })
    }

    pub fn euclidean(n: usize) -> Result<MetricModel> {
        MetricModel::new(n, MetricFamily::Euclidean)
    }

    /// Riemannian metric from row-major expression strings for `a_ij(x)`.
    pub fn riemannian(n: usize, a: &[&str]) -> Result<MetricModel> {
        MetricModel::new(n, MetricFamily::Riemannian { a: parse_all(a)? })
    }

    /// Randers metric; `a = None` means the identity matrix.
    pub fn randers(n: usize, a: Option<&[&str]>, b: &[&str]) -> Result<MetricModel> {
        let a = match a {
            Some(a) => parse_all(a)?,
            None => identity_exprs(n),
        };
        MetricModel::new(n, MetricFamily::Randers { a, b: parse_all(b)? })
    }

    pub fn expression(n: usize, l: &str) -> Result<MetricModel> {
        MetricModel::new(n, MetricFamily::Expression { l: Expr::parse(l)? })
    }

    pub fn with_box(mut self, lo: f64, hi: f64) -> Result<MetricModel> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(FinslerError::InvalidModel(format!("invalid x-box [{lo}, {hi}]")));
        }
        self.x_box = (lo, hi);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn family(&self) -> &MetricFamily {
        &self.family
    }

    pub fn x_box(&self) -> (f64, f64) {
        self.x_box
    }

    /// `L²(x, y)`.
    pub fn lsq<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<S> {
        match &self.family {
            MetricFamily::Euclidean => Ok(sum_squares(y)),
            MetricFamily::Riemannian { a } => quadratic_form(self.n, a, x, y),
            MetricFamily::Randers { .. } | MetricFamily::Expression { .. } => {
                let l = self.l(x, y)?;
                Ok(l.clone() * l)
            }
        }
    }

    /// `L(x, y)`.
    pub fn l<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<S> {
        let out = match &self.family {
            MetricFamily::Euclidean => sum_squares(y).sqrt(),
            MetricFamily::Riemannian { a } => quadratic_form(self.n, a, x, y)?.sqrt(),
            MetricFamily::Randers { a, b } => {
                let alpha = quadratic_form(self.n, a, x, y)?.sqrt();
                let mut beta = b[0].eval(x, y)? * y[0].clone();
                for i in 1..self.n {
                    beta = beta + b[i].eval(x, y)? * y[i].clone();
                }
                alpha + beta
            }
            MetricFamily::Expression { l } => l.eval(x, y)?,
        };
        if !out.all_finite() {
            return Err(FinslerError::Domain {
                expr: "L".into(),
                detail: format!("non-finite Finsler function (value {})", out.value()),
            });
        }
        Ok(out)
    }

    /// `a_ij(x)` for the Riemannian and Randers families.
    pub fn base_matrix(&self, x: &[f64]) -> Result<Option<DMatrix<f64>>> {
        let a = match &self.family {
            MetricFamily::Riemannian { a } | MetricFamily::Randers { a, .. } => a,
            _ => return Ok(None),
        };
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                m[(i, j)] = a[i * self.n + j].eval(x, x)?;
            }
        }
        Ok(Some(m))
    }

    /// Checks `L > 0`, positive definiteness of `g` and, for Randers, `|b|_a < 1`.
    pub fn check_admissible(&self, p: &JetPoint) -> Result<()> {
        if p.n() != self.n {
            return Err(FinslerError::Dimension(format!(
                "point has dimension {}, metric has {}",
                p.n(),
                self.n
            )));
        }
        if p.y.iter().all(|v| *v == 0.0) {
            return Err(FinslerError::Inadmissible("y lies on the zero section".into()));
        }
        if let MetricFamily::Randers { b, .. } = &self.family {
            let a = self.base_matrix(&p.x)?.expect("randers has a base matrix");
            let bv = DVector::from_iterator(
                self.n,
                b.iter().map(|e| e.eval(&p.x, &p.x)).collect::<Result<Vec<f64>>>()?,
            );
            let a_inv = a.clone().try_inverse().ok_or_else(|| {
                FinslerError::Inadmissible("Randers base matrix is singular".into())
            })?;
            let norm_sq = (bv.transpose() * a_inv * &bv)[(0, 0)];
            if !(norm_sq < 1.0) {
                return Err(FinslerError::Inadmissible(format!(
                    "|b|_a = {:.6} is not below 1",
                    norm_sq.max(0.0).sqrt()
                )));
            }
        }
        let l = self.l(&p.x, &p.y)?;
        if !(l > 0.0) {
            return Err(FinslerError::Inadmissible(format!("L = {l} is not positive")));
        }
        let g = self.hessian_g(p)?;
        let eig = g.symmetric_eigen();
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(min > 0.0) {
            return Err(FinslerError::Inadmissible(format!(
                "fundamental tensor is not positive definite (smallest eigenvalue {min:e})"
            )));
        }
        Ok(())
    }

    fn hessian_g(&self, p: &JetPoint) -> Result<DMatrix<f64>> {
        let vars = Jet::variables(&p.flat(), 2);
        let (xs, ys) = vars.split_at(self.n);
        let lsq = self.lsq(xs, ys)?;
        let mut g = DMatrix::zeros(self.n, self.n);
        let mut exps = vec![0u8; 2 * self.n];
        for i in 0..self.n {
            for j in 0..self.n {
                exps.iter_mut().for_each(|e| *e = 0);
                exps[self.n + i] += 1;
                exps[self.n + j] += 1;
                g[(i, j)] = 0.5 * lsq.partial(&exps).expect("order 2");
            }
        }
        Ok(g)
    }

    /// Draws an admissible point: `x` uniform in the box, `y` uniform on the unit
    /// sphere and rescaled so that `L(x, y) = 1`. Gives up after `max_tries`.
    pub fn sample_point<R: Rng>(&self, rng: &mut R, max_tries: usize) -> Result<JetPoint> {
        let (lo, hi) = self.x_box;
        let mut last = None;
        for _ in 0..max_tries {
            let x: Vec<f64> = (0..self.n).map(|_| rng.gen_range(lo..hi)).collect();
            let mut y: Vec<f64> = (0..self.n).map(|_| rng.sample(StandardNormal)).collect();
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-12 {
                continue;
            }
            y.iter_mut().for_each(|v| *v /= norm);
            let l = match self.l(&x, &y) {
                Ok(l) if l > 0.0 => l,
                Ok(l) => {
                    last = Some(FinslerError::Inadmissible(format!("L = {l} is not positive")));
                    continue;
                }
                Err(e) => {
                    last = Some(e);
                    continue;
                }
            };
            y.iter_mut().for_each(|v| *v /= l);
            let p = JetPoint::new(x, y);
            match self.check_admissible(&p) {
                Ok(()) => return Ok(p),
                Err(e) => last = Some(e),
            }
        }
        Err(last.unwrap_or_else(|| {
            FinslerError::Inadmissible(format!("no admissible point after {max_tries} tries"))
        }))
    }

    /// `count` admissible points from a seeded generator.
    pub fn sample_corpus(&self, count: usize, seed: u64) -> Result<Vec<JetPoint>> {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| self.sample_point(&mut rng, 100)).collect()
    }
}

/// `L²` as a [`ScalarFn`] of the flat `(x, y)` variables.
pub struct LsqFn<'a>(pub &'a MetricModel);

impl ScalarFn for LsqFn<'_> {
    fn nvars(&self) -> usize {
        2 * self.0.n
    }

    fn eval<S: Scalar>(&self, vars: &[S]) -> Result<S> {
        let (x, y) = vars.split_at(self.0.n);
        self.0.lsq(x, y)
    }
}

/// `g_ij(x, y)`.
pub fn fundamental_tensor(m: &MetricModel, p: &JetPoint) -> Result<PointTensor> {
    let local = LocalGeometry::new(m, p, 4)?;
    PointTensor::new(
        m.n(),
        vec![Variance::Covariant; 2],
        local.g.iter().map(Jet::value).collect(),
        p.clone(),
        &[Symmetry::Symmetric(0, 1)],
    )
}

/// `ℏ = g − ℓ ⊗ ℓ` with `ℓ_i = g_ij yʲ / L`.
pub fn angular_metric(m: &MetricModel, p: &JetPoint) -> Result<PointTensor> {
    let local = LocalGeometry::new(m, p, 4)?;
    PointTensor::new(
        m.n(),
        vec![Variance::Covariant; 2],
        local.angular_values(),
        p.clone(),
        &[Symmetry::Symmetric(0, 1)],
    )
}

/// Lowered Cartan tensor `T_ijk = ¼ ∂³L²/∂yⁱ∂yʲ∂yᵏ`.
pub fn cartan_tensor(m: &MetricModel, p: &JetPoint) -> Result<PointTensor> {
    let local = LocalGeometry::new(m, p, 4)?;
    PointTensor::new(
        m.n(),
        vec![Variance::Covariant; 3],
        local.cartan.iter().map(Jet::value).collect(),
        p.clone(),
        &[Symmetry::Symmetric(0, 1), Symmetry::Symmetric(1, 2)],
    )
}

/// Contracted torsion `C_i = gʲᵏ T_ijk`, its dual `C̄ⁱ = gⁱʲ C_j`, and `C² = C_i C̄ⁱ`.
pub fn contracted_torsion(m: &MetricModel, p: &JetPoint) -> Result<(PointTensor, PointTensor, f64)> {
    let local = LocalGeometry::new(m, p, 4)?;
    let (c, cbar, c2) = local.contracted_torsion_values();
    Ok((
        PointTensor::new(m.n(), vec![Variance::Covariant], c, p.clone(), &[])?,
        PointTensor::new(m.n(), vec![Variance::Contravariant], cbar, p.clone(), &[])?,
        c2,
    ))
}

fn parse_all(src: &[&str]) -> Result<Vec<Expr>> {
    src.iter().map(|s| Expr::parse(s)).collect()
}

pub(crate) fn identity_exprs(n: usize) -> Vec<Expr> {
    (0..n * n)
        .map(|k| Expr::num(if k / n == k % n { 1.0 } else { 0.0 }))
        .collect()
}

fn check_matrix(n: usize, a: &[Expr]) -> Result<()> {
    if a.len() != n * n {
        return Err(FinslerError::InvalidModel(format!(
            "a needs {} entries, got {}",
            n * n,
            a.len()
        )));
    }
    for i in 0..n {
        for j in 0..n {
            let e = &a[i * n + j];
            e.check_dimension(n)?;
            if e.depends_on_y() {
                return Err(FinslerError::InvalidModel(format!("a entry `{e}` depends on y")));
            }
            if *e != a[j * n + i] {
                return Err(FinslerError::InvalidModel(format!(
                    "a is not symmetric: a[{i}][{j}] = `{e}` but a[{j}][{i}] = `{}`",
                    a[j * n + i]
                )));
            }
        }
    }
    Ok(())
}

fn sum_squares<S: Scalar>(y: &[S]) -> S {
    let mut acc = y[0].clone() * y[0].clone();
    for v in &y[1..] {
        acc = acc + v.clone() * v.clone();
    }
    acc
}

fn quadratic_form<S: Scalar>(n: usize, a: &[Expr], x: &[S], y: &[S]) -> Result<S> {
    let mut acc: Option<S> = None;
    for i in 0..n {
        for j in i..n {
            let e = &a[i * n + j];
            if e.is_zero() {
                continue;
            }
            let coeff = if i == j { 1.0 } else { 2.0 };
            let term = e.eval(x, y)? * (y[i].clone() * y[j].clone()) * coeff;
            acc = Some(match acc {
                Some(a) => a + term,
                None => term,
            });
        }
    }
    acc.ok_or_else(|| FinslerError::InvalidModel("base matrix is identically zero".into()))
}

/// Worst disagreement between jet partials of `L²` and two-level Richardson differences.
#[derive(Debug, Clone, Serialize)]
pub struct FidelityReport {
    pub points: usize,
    pub max_order: usize,
    /// Partials compared per point.
    pub partials: usize,
    pub max_rel_error: f64,
    pub worst_index: Vec<u8>,
    pub worst_point: Option<JetPoint>,
}

/// Compares every partial of `L²` up to `max_order` against finite differences,
/// with relative error `|ad − fd| / max(1, |ad|)`.
pub fn derivative_fidelity(m: &MetricModel, corpus: &[JetPoint], max_order: usize) -> Result<FidelityReport> {
    let f = LsqFn(m);
    let indices = MultiIndex::all_up_to(2 * m.n, max_order);
    let per_point = corpus
        .par_iter()
        .map(|p| {
            let flat = p.flat();
            let jet = f.eval(&Jet::variables(&flat, max_order))?;
            let mut worst = (0.0f64, Vec::new());
            for idx in &indices {
                let ad = jet.partial(idx.counts()).expect("order within jet");
                let fd = richardson2(&f, &flat, idx, 2.0 * default_step(idx.order()))?;
                let err = (ad - fd).abs() / ad.abs().max(1.0);
                if !(err <= worst.0) {
                    worst = (err, idx.counts().to_vec());
                }
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = FidelityReport {
        points: corpus.len(),
        max_order,
        partials: indices.len(),
        max_rel_error: 0.0,
        worst_index: Vec::new(),
        worst_point: None,
    };
    for (p, (err, idx)) in corpus.iter().zip(per_point) {
        if !(err <= report.max_rel_error) {
            report.max_rel_error = err;
            report.worst_index = idx;
            report.worst_point = Some(p.clone());
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_models() {
        assert!(MetricModel::euclidean(1).is_err());
        assert!(MetricModel::euclidean(MAX_DIM + 1).is_err());
        assert!(MetricModel::riemannian(2, &["1", "x1", "0", "1"]).is_err());
        assert!(MetricModel::riemannian(2, &["1", "0", "0"]).is_err());
        assert!(MetricModel::riemannian(2, &["1+y1", "0", "0", "1"]).is_err());
        assert!(MetricModel::randers(2, None, &["0.1", "y2"]).is_err());
        assert!(MetricModel::expression(2, "sqrt(y1^2 + y3^2)").is_err());
    }

    #[test]
    fn randers_norm_bound_is_enforced() {
        let m = MetricModel::randers(2, None, &["1.2", "0"]).unwrap();
        let p = JetPoint::new(vec![0.0, 0.0], vec![0.0, 1.0]);
        assert!(matches!(m.check_admissible(&p), Err(FinslerError::Inadmissible(_))));
    }

    #[test]
    fn sampling_normalizes_and_is_deterministic() {
        let m = MetricModel::randers(3, None, &["0.3", "0.1*x1", "0"]).unwrap();
        let a = m.sample_corpus(10, 7).unwrap();
        let b = m.sample_corpus(10, 7).unwrap();
        assert_eq!(a, b);
        for p in &a {
            let l = m.l(&p.x, &p.y).unwrap();
            assert!((l - 1.0).abs() < 1e-12);
            assert!(p.x.iter().all(|v| (-0.5..0.5).contains(v)));
        }
    }

    #[test]
    fn sampling_gives_up_on_hopeless_model() {
        let m = MetricModel::expression(2, "sqrt(y1^2 + y2^2) - 2").unwrap();
        assert!(m.sample_corpus(1, 1).is_err());
    }

    #[test]
    fn homogeneity_of_shipped_families() {
        let models = [
            MetricModel::euclidean(2).unwrap(),
            MetricModel::riemannian(2, &["1 + x1^2", "0.2*x2", "0.2*x2", "2"]).unwrap(),
            MetricModel::randers(2, None, &["0.3", "0.2*sin(x1)"]).unwrap(),
        ];
        for m in &models {
            for p in m.sample_corpus(5, 3).unwrap() {
                let l = m.l(&p.x, &p.y).unwrap();
                for lambda in [0.5, 2.0, 3.0] {
                    let y: Vec<f64> = p.y.iter().map(|v| v * lambda).collect();
                    let ll = m.l(&p.x, &y).unwrap();
                    assert!((ll - lambda * l).abs() < 1e-9 * lambda * l);
                }
            }
        }
    }
}
