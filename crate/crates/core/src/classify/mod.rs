//! Residual-based predicates for special Finsler spaces, recurrence fits, and
//! the implication harness over (metric, candidate) pairs.

pub mod forms;
pub mod harness;
pub mod recurrence;

use rayon::prelude::*;
use serde::Serialize;

use crate::check::Tolerance;
use crate::connection::TensorField;
use crate::curvature::CurvatureJets;
use crate::diffcore::Jet;
use crate::error::{FinslerError, Result};
use crate::local::{Connection, Direction, LocalGeometry};
use crate::metric::{JetPoint, MetricModel};
use crate::tensor::{max_abs, Variance};
use forms::FormFit;
pub use recurrence::{fit_recurrence, RecurrencePoint, RecurrenceReport, TensorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// The defining tensor is below tolerance everywhere.
    Vacuous,
    /// Dimension gate or `C² = 0`.
    NotApplicable,
}

#[derive(Debug, Clone, Default)]
pub struct ClassifyOptions {
    /// Symmetric covariant 2-tensor for the quasi-C-reducible form;
    /// defaults to `ℏ/(n+1)`, which makes it agree with C-reducibility.
    pub quasi_a: Option<TensorField>,
}

/// Raw residuals and fitted quantities at one sample.
#[derive(Debug, Clone, Serialize)]
pub struct PointClassification {
    pub at: JetPoint,
    pub g: Vec<f64>,
    pub ginv: Vec<f64>,
    pub t_max: f64,
    pub ht_max: f64,
    pub phat_max: f64,
    pub s_max: f64,
    pub p_max: f64,
    pub r_max: f64,
    pub c_squared: f64,
    pub c_reducible: FormFit,
    pub c_recovered: Vec<f64>,
    pub c2_like: FormFit,
    pub semi_c: FormFit,
    pub sc_mu: f64,
    pub quasi_c: FormFit,
    pub quasi_a: Vec<f64>,
    pub s3_like: FormFit,
    pub s3_kappa: f64,
    pub sc_v: f64,
    pub p2_like: FormFit,
    pub phi: Vec<f64>,
    /// `φ` refitted at the same `x` and another direction.
    pub phi_other_y: Option<Vec<f64>>,
    pub p_reducible: FormFit,
    pub delta: Vec<f64>,
    pub h_isotropic: FormFit,
    pub k0: f64,
    pub recurrence: Vec<RecurrencePoint>,
}

fn values(v: &[Jet]) -> Vec<f64> {
    v.iter().map(Jet::value).collect()
}

fn other_direction(m: &MetricModel, p: &JetPoint) -> Option<JetPoint> {
    let n = p.y.len();
    let norm = p.y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let k = (0..n).min_by(|&a, &b| p.y[a].abs().total_cmp(&p.y[b].abs()))?;
    let mut y = p.y.clone();
    y[k] += 0.5 * norm;
    let l = m.l(&p.x, &y).ok()?;
    let y: Vec<f64> = y.iter().map(|v| v / l).collect();
    let q = JetPoint::new(p.x.clone(), y);
    m.check_admissible(&q).ok().map(|_| q)
}

fn p2_at(geo: &LocalGeometry, cj: &CurvatureJets) -> (FormFit, Vec<f64>) {
    let p_low = CurvatureJets::lowered(&cj.p, geo).values();
    forms::p2_like(&p_low, &values(&geo.cartan), geo.n)
}

pub fn classify_point(m: &MetricModel, p: &JetPoint, opts: &ClassifyOptions) -> Result<PointClassification> {
    let geo = LocalGeometry::new(m, p, 5)?;
    let n = geo.n;
    let cj = CurvatureJets::new(&geo);
    let t = values(&geo.cartan);
    let g = values(&geo.g);
    let ginv = values(&geo.ginv);
    let hbar = geo.angular_values();
    let ht = geo
        .cov_derive(&geo.cartan_tensor(), Direction::Horizontal, Connection::Cartan)
        .values();
    let phat_low = cj.phat(&geo).transform_slot(2, &geo.g, Variance::Covariant).values();
    let s_low = CurvatureJets::lowered(&cj.s, &geo).values();
    let r = cj.r.values();

    let (c_reducible, c_recovered) = forms::c_reducible(&t, &hbar, &ginv, n);
    let c_squared = forms::c_squared(&c_recovered, &ginv, n);
    let (semi_c, sc_mu) = forms::semi_c_reducible(&t, &hbar, &ginv, n);
    let quasi_a = match &opts.quasi_a {
        Some(field) => field.jets(&geo)?.values(),
        None => hbar.iter().map(|v| v / (n as f64 + 1.0)).collect(),
    };
    let quasi_c = forms::quasi_c_reducible(&t, &quasi_a, &p.y, &ginv, n);
    let (s3_like, s3_kappa) = forms::s3_like(&s_low, &hbar, n);
    let (p2_like, phi) = p2_at(&geo, &cj);
    let phi_other_y = match other_direction(m, p) {
        Some(q) => {
            let geo2 = LocalGeometry::new(m, &q, 4)?;
            let cj2 = CurvatureJets::new(&geo2);
            Some(p2_at(&geo2, &cj2).1)
        }
        None => None,
    };
    let c_jets = geo.torsion_trace();
    let hc = geo
        .cov_derive(
            &crate::tensor::JetTensor::new(n, vec![Variance::Covariant], c_jets),
            Direction::Horizontal,
            Connection::Cartan,
        )
        .values();
    let delta: Vec<f64> = (0..n)
        .map(|a| (0..n).map(|k| hc[a * n + k] * p.y[k]).sum::<f64>() / (n as f64 + 1.0))
        .collect();
    let p_reducible = forms::p_reducible(&phat_low, &delta, &hbar, n);
    let (h_isotropic, k0) = forms::h_isotropic(&r, &g, n);

    Ok(PointClassification {
        at: p.clone(),
        g: g.clone(),
        ginv: ginv.clone(),
        t_max: max_abs(&t),
        ht_max: max_abs(&ht),
        phat_max: max_abs(&phat_low),
        s_max: max_abs(&s_low),
        p_max: cj.p.max_abs(),
        r_max: max_abs(&r),
        c_squared,
        c_reducible,
        c_recovered,
        c2_like: forms::c2_like(&t, &ginv, n),
        semi_c,
        sc_mu,
        quasi_c,
        quasi_a,
        s3_like,
        s3_kappa,
        sc_v: cj.scalar_v(&geo).value(),
        p2_like,
        phi,
        phi_other_y,
        p_reducible,
        delta,
        h_isotropic,
        k0,
        recurrence: recurrence::recurrence_points(&geo, &cj),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Fitted {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

impl Fitted {
    fn over(name: &str, values: impl IntoIterator<Item = f64>) -> Fitted {
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            min = min.min(v);
            max = max.max(v);
        }
        if min > max {
            (min, max) = (0.0, 0.0);
        }
        Fitted {
            name: name.to_string(),
            min,
            max,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Predicate {
    pub name: String,
    pub verdict: Verdict,
    pub residual: f64,
    pub scale: f64,
    pub tolerance: f64,
    pub fitted: Vec<Fitted>,
    #[serde(skip)]
    dimension_ok: bool,
    /// Max of the defining tensor; below tolerance makes the form vacuous.
    #[serde(skip)]
    defining_max: Option<f64>,
    /// Min of `C²` for forms that divide by it.
    #[serde(skip)]
    min_c_squared: Option<f64>,
}

impl Predicate {
    pub fn verdict_at(&self, tol: &Tolerance) -> Verdict {
        let floor = tol.threshold(0.0);
        if !self.dimension_ok {
            Verdict::NotApplicable
        } else if self.defining_max.is_some_and(|d| d < floor) {
            Verdict::Vacuous
        } else if self.min_c_squared.is_some_and(|c| !(c > floor)) {
            Verdict::NotApplicable
        } else if tol.holds(self.residual, self.scale) {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    /// Pass or vacuous.
    pub fn holds_at(&self, tol: &Tolerance) -> bool {
        matches!(self.verdict_at(tol), Verdict::Pass | Verdict::Vacuous)
    }
}

struct PredicateDef<'a> {
    name: &'a str,
    min_n: usize,
    fit: fn(&PointClassification) -> FormFit,
    defining: Option<fn(&PointClassification) -> f64>,
    needs_c2: bool,
}

fn zero_form(max: f64) -> FormFit {
    FormFit { residual: max, scale: 0.0 }
}

const PREDICATES: &[PredicateDef<'static>] = &[
    PredicateDef { name: "riemannian", min_n: 2, fit: |p| zero_form(p.t_max), defining: None, needs_c2: false },
    PredicateDef { name: "berwald", min_n: 2, fit: |p| zero_form(p.ht_max), defining: None, needs_c2: false },
    PredicateDef { name: "landsberg", min_n: 2, fit: |p| zero_form(p.phat_max), defining: None, needs_c2: false },
    PredicateDef { name: "c2_like", min_n: 2, fit: |p| p.c2_like, defining: Some(|p| p.t_max), needs_c2: true },
    PredicateDef { name: "c_reducible", min_n: 3, fit: |p| p.c_reducible, defining: Some(|p| p.t_max), needs_c2: false },
    PredicateDef { name: "semi_c_reducible", min_n: 3, fit: |p| p.semi_c, defining: Some(|p| p.t_max), needs_c2: true },
    PredicateDef { name: "quasi_c_reducible", min_n: 3, fit: |p| p.quasi_c, defining: Some(|p| p.t_max), needs_c2: false },
    PredicateDef { name: "s3_like", min_n: 4, fit: |p| p.s3_like, defining: Some(|p| p.s_max), needs_c2: false },
    PredicateDef { name: "p2_like", min_n: 3, fit: |p| p.p2_like, defining: Some(|p| p.p_max.max(p.t_max)), needs_c2: false },
    PredicateDef { name: "p_reducible", min_n: 3, fit: |p| p.p_reducible, defining: Some(|p| p.phat_max), needs_c2: false },
    PredicateDef { name: "h_isotropic", min_n: 3, fit: |p| p.h_isotropic, defining: None, needs_c2: false },
];

fn fitted_for(name: &str, samples: &[PointClassification]) -> Vec<Fitted> {
    let all = |f: fn(&PointClassification) -> Vec<f64>| samples.iter().flat_map(f).collect::<Vec<_>>();
    match name {
        "c_reducible" => vec![Fitted::over("C", all(|p| p.c_recovered.clone()))],
        "c2_like" => vec![Fitted::over("C^2", samples.iter().map(|p| p.c_squared))],
        "semi_c_reducible" => vec![
            Fitted::over("sc_mu", samples.iter().map(|p| p.sc_mu)),
            Fitted::over("tau", samples.iter().map(|p| 1.0 - p.sc_mu)),
        ],
        "s3_like" => vec![
            Fitted::over("kappa", samples.iter().map(|p| p.s3_kappa)),
            Fitted::over("Sc^v", samples.iter().map(|p| p.sc_v)),
        ],
        "p2_like" => {
            let variation = samples.iter().filter_map(|p| {
                p.phi_other_y
                    .as_ref()
                    .map(|o| o.iter().zip(&p.phi).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
            });
            vec![
                Fitted::over("phi", all(|p| p.phi.clone())),
                Fitted::over("phi y-variation", variation),
            ]
        }
        "p_reducible" => vec![Fitted::over("delta", all(|p| p.delta.clone()))],
        "h_isotropic" => vec![Fitted::over("k0", samples.iter().map(|p| p.k0))],
        _ => Vec::new(),
    }
}

fn predicate(def: &PredicateDef<'_>, n: usize, samples: &[PointClassification], tol: &Tolerance) -> Predicate {
    let (residual, scale) = samples.iter().fold((0.0f64, 0.0f64), |(r, s), p| {
        let f = (def.fit)(p);
        (r.max(f.residual), s.max(f.scale))
    });
    let mut pred = Predicate {
        name: def.name.to_string(),
        verdict: Verdict::Fail,
        residual,
        scale,
        tolerance: tol.threshold(scale),
        fitted: fitted_for(def.name, samples),
        dimension_ok: n >= def.min_n,
        defining_max: def
            .defining
            .map(|d| samples.iter().fold(0.0f64, |m, p| m.max(d(p)))),
        min_c_squared: def
            .needs_c2
            .then(|| samples.iter().fold(f64::INFINITY, |m, p| m.min(p.c_squared))),
    };
    pred.verdict = pred.verdict_at(tol);
    pred
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassificationReport {
    pub points: usize,
    pub n: usize,
    pub predicates: Vec<Predicate>,
    pub recurrence: Vec<RecurrenceReport>,
    #[serde(skip)]
    pub samples: Vec<PointClassification>,
}

impl ClassificationReport {
    pub fn predicate(&self, name: &str) -> &Predicate {
        self.predicates
            .iter()
            .find(|p| p.name == name)
            .unwrap_or_else(|| panic!("unknown predicate `{name}`"))
    }

    pub fn recurrence(&self, kind: TensorKind, dir: Direction) -> &RecurrenceReport {
        self.recurrence
            .iter()
            .find(|r| r.kind == kind && r.direction == dir)
            .expect("all recurrence kinds are reported")
    }

    /// Per-point recurrence forms for one tensor and direction.
    pub fn lambdas(&self, kind: TensorKind, dir: Direction) -> Vec<&[f64]> {
        self.samples
            .iter()
            .map(|s| {
                s.recurrence
                    .iter()
                    .find(|r| r.kind == kind && r.direction == dir)
                    .map(|r| r.lambda.as_slice())
                    .expect("all recurrence kinds are fitted")
            })
            .collect()
    }
}

pub fn classify_special(
    m: &MetricModel,
    corpus: &[JetPoint],
    tol: &Tolerance,
    opts: &ClassifyOptions,
) -> Result<ClassificationReport> {
    if corpus.is_empty() {
        return Err(FinslerError::InvalidArgument("empty corpus".into()));
    }
    if let Some(a) = &opts.quasi_a {
        if a.n() != m.n() || a.slots() != [Variance::Covariant, Variance::Covariant] {
            return Err(FinslerError::Dimension(
                "quasi-C-reducible tensor must be a covariant 2-tensor of the metric's dimension".into(),
            ));
        }
    }
    let samples = corpus
        .par_iter()
        .map(|p| classify_point(m, p, opts))
        .collect::<Result<Vec<_>>>()?;
    let n = m.n();
    let predicates = PREDICATES.iter().map(|s| predicate(s, n, &samples, tol)).collect();
    let mut recurrence = Vec::new();
    for kind in recurrence::KINDS {
        for dir in recurrence::DIRECTIONS {
            let pts: Vec<&RecurrencePoint> = samples
                .iter()
                .map(|s| {
                    s.recurrence
                        .iter()
                        .find(|r| r.kind == kind && r.direction == dir)
                        .expect("all recurrence kinds are fitted")
                })
                .collect();
            recurrence.push(recurrence::aggregate(&pts, kind, dir, tol));
        }
    }
    Ok(ClassificationReport {
        points: samples.len(),
        n,
        predicates,
        recurrence,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_verdicts() {
        let m = MetricModel::euclidean(3).unwrap();
        let corpus = m.sample_corpus(5, 1).unwrap();
        let r = classify_special(&m, &corpus, &Tolerance::default(), &ClassifyOptions::default()).unwrap();
        for name in ["riemannian", "berwald", "landsberg", "h_isotropic"] {
            assert_eq!(r.predicate(name).verdict, Verdict::Pass, "{name}");
        }
        for name in ["c_reducible", "c2_like", "semi_c_reducible", "p2_like", "p_reducible"] {
            assert_eq!(r.predicate(name).verdict, Verdict::Vacuous, "{name}");
        }
        assert_eq!(r.predicate("s3_like").verdict, Verdict::NotApplicable);
        assert_eq!(r.predicate("h_isotropic").fitted[0].max, 0.0);
    }

    #[test]
    fn randers_is_c_reducible_but_not_riemannian() {
        let m = MetricModel::randers(3, None, &["0.2 + 0.1*x1", "0.1*x2*x3", "-0.15"]).unwrap();
        let corpus = m.sample_corpus(8, 6).unwrap();
        let tol = Tolerance::default();
        let r = classify_special(&m, &corpus, &tol, &ClassifyOptions::default()).unwrap();
        let riem = r.predicate("riemannian");
        assert_eq!(riem.verdict, Verdict::Fail);
        assert!(riem.residual > 1e-3);
        let cred = r.predicate("c_reducible");
        assert_eq!(cred.verdict, Verdict::Pass);
        assert!(cred.residual < 1e-10);
        assert_eq!(r.predicate("quasi_c_reducible").verdict, Verdict::Pass);
        // C-reducible with C ≠ 0 has sc_mu = 1
        let semi = r.predicate("semi_c_reducible");
        assert_eq!(semi.verdict, Verdict::Pass);
        assert!((semi.fitted[0].min - 1.0).abs() < 1e-8 && (semi.fitted[0].max - 1.0).abs() < 1e-8);
        assert_eq!(r.predicate("c2_like").verdict, Verdict::Fail);
    }

    #[test]
    fn tighter_tolerance_never_turns_fail_into_pass() {
        let m = MetricModel::randers(3, None, &["0.2", "0.1*x2", "0"]).unwrap();
        let corpus = m.sample_corpus(4, 3).unwrap();
        let r = classify_special(&m, &corpus, &Tolerance::default(), &ClassifyOptions::default()).unwrap();
        for p in &r.predicates {
            for f in [1.0, 0.1, 1e-3, 1e-6] {
                let tight = Tolerance::default().scaled(f);
                if p.verdict == Verdict::Fail {
                    assert_ne!(p.verdict_at(&tight), Verdict::Pass, "{}", p.name);
                }
            }
        }
    }
}
