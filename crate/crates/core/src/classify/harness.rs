//! Implication instances: each result about special spaces admitting a
//! concircular field is checked as "hypotheses hold ⇒ conclusion holds" on
//! one (metric, candidate) pair. Hypotheses are judged at a tolerance ten
//! times stricter than conclusions, and non-vanishing hypotheses at a floor
//! ten times larger.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::{classify_special, ClassificationReport, ClassifyOptions, TensorKind, Verdict};
use crate::check::Tolerance;
use crate::concircular::{fit_and_verify, CandidateField, ConcircularReport};
use crate::error::{FinslerError, Result};
use crate::local::Direction;
use crate::metric::{JetPoint, MetricModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Satisfied,
    Violated,
    /// Some hypothesis does not hold.
    Vacuous,
}

#[derive(Debug, Clone, Serialize)]
pub struct Condition {
    pub name: String,
    pub holds: bool,
    /// Holds only because its defining tensor vanishes.
    pub trivial: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosedForm {
    pub quantity: String,
    pub max_rel_difference: f64,
    pub rel_tolerance: f64,
    pub fitted_min: f64,
    pub fitted_max: f64,
    pub closed_min: f64,
    pub closed_max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Instance {
    pub statement: String,
    pub metric: String,
    pub candidate: String,
    pub outcome: Outcome,
    /// Satisfied, but some hypothesis held only trivially.
    pub trivial: bool,
    pub hypotheses: Vec<Condition>,
    pub conclusion: Condition,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_form: Option<ClosedForm>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HarnessReport {
    pub satisfied: usize,
    pub satisfied_non_trivial: usize,
    pub violated: usize,
    pub vacuous: usize,
    pub pass: bool,
    pub instances: Vec<Instance>,
}

impl HarnessReport {
    pub fn from_instances(instances: Vec<Instance>) -> HarnessReport {
        let count = |o: Outcome| instances.iter().filter(|i| i.outcome == o).count();
        let satisfied_non_trivial = instances
            .iter()
            .filter(|i| i.outcome == Outcome::Satisfied && !i.trivial)
            .count();
        let violated = count(Outcome::Violated);
        HarnessReport {
            satisfied: count(Outcome::Satisfied),
            satisfied_non_trivial,
            violated,
            vacuous: count(Outcome::Vacuous),
            pass: violated == 0,
            instances,
        }
    }
}

/// Precomputed reports for one (metric, candidate) pair on a shared corpus.
pub struct HarnessCase<'a> {
    pub metric_name: &'a str,
    pub classification: &'a ClassificationReport,
    pub concircular: &'a ConcircularReport,
    /// Relative tolerance for comparing fitted and closed-form `k₀`.
    pub closed_form_rel: f64,
}

struct Ctx<'a> {
    case: &'a HarnessCase<'a>,
    tol: Tolerance,
    hyp: Tolerance,
    floor: f64,
}

fn cond(name: &str, holds: bool) -> Condition {
    Condition {
        name: name.to_string(),
        holds,
        trivial: false,
    }
}

fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

impl Ctx<'_> {
    fn cls(&self) -> &ClassificationReport {
        self.case.classification
    }

    fn conc(&self) -> &ConcircularReport {
        self.case.concircular
    }

    fn n(&self) -> usize {
        self.cls().n
    }

    fn concircular(&self) -> Condition {
        let c = self.conc();
        let holds = c.degenerate_points == 0
            && self.hyp.holds(c.fit_h.residual, c.fit_h.scale)
            && self.hyp.holds(c.fit_v.residual, c.fit_v.scale)
            && c.min_abs_psi > c.psi_min;
        cond("concircular", holds)
    }

    fn concurrent(&self) -> Condition {
        let c = self.conc();
        let one = self.hyp.threshold(1.0);
        let holds = self.concircular().holds && c.max_abs_psi_plus_one < one && c.max_abs_alpha < one;
        cond("concurrent", holds)
    }

    fn predicate(&self, name: &str, hypothesis: bool) -> Condition {
        let tol = if hypothesis { &self.hyp } else { &self.tol };
        let v = self.cls().predicate(name).verdict_at(tol);
        Condition {
            name: name.to_string(),
            holds: matches!(v, Verdict::Pass | Verdict::Vacuous),
            trivial: v == Verdict::Vacuous,
        }
    }

    fn recurrent(&self, kind: TensorKind, dir: Direction) -> Condition {
        let r = self.cls().recurrence(kind, dir);
        let v = r.verdict_at(&self.hyp);
        Condition {
            name: r.name.clone(),
            holds: matches!(v, Verdict::Pass | Verdict::Vacuous),
            trivial: v == Verdict::Vacuous,
        }
    }

    fn vanishes(&self, name: &str, max: impl Fn(&super::PointClassification) -> f64) -> Condition {
        let m = self.cls().samples.iter().fold(0.0f64, |a, s| a.max(max(s)));
        cond(name, self.tol.holds(m, 0.0))
    }

    /// Holds when `|f| > floor` at every sample.
    fn nonzero(&self, name: &str, f: impl Fn(usize) -> f64) -> Condition {
        let holds = (0..self.cls().samples.len()).all(|i| f(i).abs() > self.floor);
        cond(name, holds)
    }

    /// `(μ − ψα − ψλ₁)(η)` at sample `i`.
    fn p_recurrence_scalar(&self, i: usize) -> f64 {
        let s = &self.conc().samples[i];
        let lambda = self.cls().lambdas(TensorKind::P, Direction::Horizontal)[i];
        let y = &s.at.y;
        (0..self.n())
            .map(|k| (s.mu_form[k] - s.psi_hat * s.alpha_hat[k] - s.psi_hat * lambda[k]) * y[k])
            .sum()
    }

    fn instance(&self, statement: &str, hypotheses: Vec<Condition>, conclusion: Condition) -> Instance {
        let holds = hypotheses.iter().all(|h| h.holds);
        let outcome = match (holds, conclusion.holds) {
            (false, _) => Outcome::Vacuous,
            (true, true) => Outcome::Satisfied,
            (true, false) => Outcome::Violated,
        };
        Instance {
            statement: statement.to_string(),
            metric: self.case.metric_name.to_string(),
            candidate: self.conc().candidate.clone(),
            outcome,
            trivial: outcome == Outcome::Satisfied && hypotheses.iter().any(|h| h.trivial),
            hypotheses,
            conclusion,
            closed_form: None,
        }
    }

    fn closed_form(&self, statement: &str, hypotheses: Vec<Condition>, fitted: Vec<f64>, closed: Vec<f64>) -> Instance {
        let rel = self.case.closed_form_rel;
        let max_rel = fitted
            .iter()
            .zip(&closed)
            .fold(0.0f64, |m, (a, b)| m.max(rel_diff(*a, *b)));
        let iso = self.predicate("h_isotropic", false);
        let conclusion = Condition {
            name: "h_isotropic with matching k0".into(),
            holds: iso.holds && max_rel <= rel,
            trivial: false,
        };
        let range = |v: &[f64]| {
            v.iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(*x), hi.max(*x)))
        };
        let (fitted_min, fitted_max) = range(&fitted);
        let (closed_min, closed_max) = range(&closed);
        let mut inst = self.instance(statement, hypotheses, conclusion);
        inst.closed_form = Some(ClosedForm {
            quantity: "k0".into(),
            max_rel_difference: max_rel,
            rel_tolerance: rel,
            fitted_min,
            fitted_max,
            closed_min,
            closed_max,
        });
        inst
    }

    /// `k₀ = −A(m)/g(m, ζ)` per sample.
    fn k0_from_field(&self) -> Vec<f64> {
        self.conc()
            .samples
            .iter()
            .map(|s| {
                let am: f64 = s.a_form.iter().zip(&s.m_field).map(|(a, m)| a * m).sum();
                let gmz: f64 = s.omega.iter().zip(&s.m_field).map(|(w, m)| w * m).sum();
                -am / gmz
            })
            .collect()
    }

    /// `φ₀/n` per sample, with `ψφ(X,Y) = α(Y)A(X) + λ₁(Y)A(X) − (∇_{βY}A)(X)`.
    fn k0_from_recurrence(&self) -> Vec<f64> {
        let n = self.n();
        let lambdas = self.cls().lambdas(TensorKind::R, Direction::Horizontal);
        self.conc()
            .samples
            .iter()
            .zip(&self.cls().samples)
            .zip(lambdas)
            .map(|((s, c), lambda)| {
                let mut phi0 = 0.0;
                for x in 0..n {
                    for y in 0..n {
                        let phi = (s.alpha_hat[y] * s.a_form[x] + lambda[y] * s.a_form[x] - s.h_a_form[x * n + y])
                            / s.psi_hat;
                        phi0 += c.ginv[x * n + y] * phi;
                    }
                }
                phi0 / n as f64
            })
            .collect()
    }

    fn instances(&self) -> Vec<Instance> {
        use Direction::{Horizontal as H, Vertical as V};
        use TensorKind::{P, R, S, T};
        let n = self.n();
        let conc = || self.concircular();
        let riem = || self.predicate("riemannian", false);
        let s_zero = || self.vanishes("S = 0", |s| s.s_max);
        let r_zero = || self.vanishes("R = 0", |s| s.r_max);
        let zeta_of = |i: usize| &self.conc().samples[i].zeta;
        let mut out = Vec::new();

        out.push(self.instance(
            "Landsberg with a concircular field is Riemannian",
            vec![conc(), self.predicate("landsberg", true)],
            riem(),
        ));
        out.push(self.instance(
            "Berwald with a concircular field is Riemannian",
            vec![conc(), self.predicate("berwald", true)],
            riem(),
        ));
        let a_zz = self.nonzero("A(zeta,zeta) != 0", |i| {
            let a = &self.cls().samples[i].quasi_a;
            let z = zeta_of(i);
            (0..n).map(|p| (0..n).map(|q| a[p * n + q] * z[p] * z[q]).sum::<f64>()).sum()
        });
        out.push(self.instance(
            "quasi-C-reducible with a concircular field and A(zeta,zeta) != 0 is Riemannian",
            vec![conc(), self.predicate("quasi_c_reducible", true), a_zz],
            riem(),
        ));
        out.push(self.instance(
            "C-reducible with a concircular field is Riemannian",
            vec![conc(), self.predicate("c_reducible", true)],
            riem(),
        ));
        out.push(self.instance(
            "semi-C-reducible with a concircular field is C2-like",
            vec![conc(), self.predicate("semi_c_reducible", true)],
            self.predicate("c2_like", false),
        ));
        out.push(self.instance(
            "S3-like with a concircular field has S = 0",
            vec![conc(), self.predicate("s3_like", true)],
            s_zero(),
        ));
        let phi_psi = self.nonzero("phi(zeta) != psi", |i| {
            let c = &self.cls().samples[i];
            let s = &self.conc().samples[i];
            c.phi.iter().zip(&s.zeta).map(|(p, z)| p * z).sum::<f64>() - s.psi_hat
        });
        out.push(self.instance(
            "P2-like with a concircular field and phi(zeta) != psi is Riemannian",
            vec![conc(), self.predicate("p2_like", true), phi_psi],
            riem(),
        ));
        out.push(self.instance(
            "P-reducible with a concircular field is Landsberg",
            vec![conc(), self.predicate("p_reducible", true)],
            self.predicate("landsberg", false),
        ));
        if self.conc().degenerate_points == 0 {
            out.push(self.closed_form(
                "h-isotropic with a concircular field has k0 = -A(m)/g(m,zeta)",
                vec![conc(), self.predicate("h_isotropic", true)],
                self.cls().samples.iter().map(|s| s.k0).collect(),
                self.k0_from_field(),
            ));
        }
        out.push(self.instance(
            "h-isotropic with a concurrent field has R = 0",
            vec![self.concurrent(), self.predicate("h_isotropic", true)],
            r_zero(),
        ));

        let lambda1_zeta = self.nonzero("lambda1(zeta) != 0", |i| {
            let l = self.cls().lambdas(T, H)[i];
            l.iter().zip(zeta_of(i)).map(|(a, b)| a * b).sum()
        });
        out.push(self.instance(
            "T^h-recurrent with a concircular field and lambda1(zeta) != 0 is Riemannian",
            vec![conc(), self.recurrent(T, H), lambda1_zeta],
            riem(),
        ));
        out.push(self.instance(
            "T^v-recurrent is Riemannian",
            vec![self.recurrent(T, V)],
            riem(),
        ));
        out.push(self.instance(
            "S^h-recurrent with a concircular field has S = 0",
            vec![conc(), self.recurrent(S, H)],
            s_zero(),
        ));
        out.push(self.instance(
            "S^v-recurrent has S = 0",
            vec![self.recurrent(S, V)],
            s_zero(),
        ));
        let p_scalar_zero = {
            let all = (0..self.cls().samples.len()).all(|i| self.tol.holds(self.p_recurrence_scalar(i), 0.0));
            cond("(mu - psi alpha - psi lambda1)(eta) = 0", all)
        };
        let riem_or = {
            let r = riem();
            cond("riemannian or (mu - psi alpha - psi lambda1)(eta) = 0", r.holds || p_scalar_zero.holds)
        };
        out.push(self.instance(
            "P^h-recurrent with a concircular field is Riemannian or has (mu - psi alpha - psi lambda1)(eta) = 0",
            vec![conc(), self.recurrent(P, H)],
            riem_or,
        ));
        out.push(self.instance(
            "P^v-recurrent has P = 0",
            vec![self.recurrent(P, V)],
            self.vanishes("P = 0", |s| s.p_max),
        ));
        let p_scalar_nonzero = self.nonzero("(mu - psi alpha - psi lambda1)(eta) != 0", |i| self.p_recurrence_scalar(i));
        out.push(self.instance(
            "P^h-recurrent with a concircular field and (mu - psi alpha - psi lambda1)(eta) != 0 is Riemannian",
            vec![conc(), self.recurrent(P, H), p_scalar_nonzero],
            riem(),
        ));
        out.push(self.instance(
            "P^v-recurrent with a concircular field is Riemannian",
            vec![conc(), self.recurrent(P, V)],
            riem(),
        ));
        if self.conc().degenerate_points == 0 {
            let gate = cond("dimension >= 3", n >= 3);
            out.push(self.closed_form(
                "R^h-recurrent with a concircular field is h-isotropic with k0 = phi0/n",
                vec![conc(), gate, self.recurrent(R, H)],
                self.cls().samples.iter().map(|s| s.k0).collect(),
                self.k0_from_recurrence(),
            ));
        }
        let lambda2_eta = self.nonzero("lambda2(eta) != 0", |i| {
            let l = self.cls().lambdas(R, V)[i];
            l.iter().zip(&self.cls().samples[i].at.y).map(|(a, b)| a * b).sum()
        });
        out.push(self.instance(
            "R^v-recurrent with a concircular field and lambda2(eta) != 0 has R = 0",
            vec![conc(), self.recurrent(R, V), lambda2_eta],
            r_zero(),
        ));
        out.push(self.instance(
            "R^h-recurrent with a concurrent field has R = 0",
            vec![self.concurrent(), self.recurrent(R, H)],
            r_zero(),
        ));
        out
    }
}

/// All implication instances for one pair.
pub fn evaluate_case(case: &HarnessCase<'_>, tol: &Tolerance) -> Result<Vec<Instance>> {
    if case.classification.samples.len() != case.concircular.samples.len() {
        return Err(FinslerError::InvalidArgument(
            "classification and concircular reports must share a corpus".into(),
        ));
    }
    let ctx = Ctx {
        case,
        tol: *tol,
        hyp: tol.scaled(0.1),
        floor: 10.0 * tol.threshold(0.0),
    };
    Ok(ctx.instances())
}

#[derive(Debug, Clone)]
pub struct HarnessPair {
    pub metric_name: String,
    pub metric: MetricModel,
    pub candidate: CandidateField,
}

/// Fits every pair on `corpus_for(metric)` and evaluates all instances.
/// Classifications are shared between pairs with the same metric name.
pub fn theorem_harness(
    pairs: &[HarnessPair],
    corpora: &BTreeMap<String, Vec<JetPoint>>,
    tol: &Tolerance,
    psi_min: f64,
    closed_form_rel: f64,
    opts: &BTreeMap<String, ClassifyOptions>,
) -> Result<HarnessReport> {
    let mut classifications: BTreeMap<&str, ClassificationReport> = BTreeMap::new();
    for pair in pairs {
        if classifications.contains_key(pair.metric_name.as_str()) {
            continue;
        }
        let corpus = corpora
            .get(&pair.metric_name)
            .ok_or_else(|| FinslerError::InvalidArgument(format!("no corpus for `{}`", pair.metric_name)))?;
        let o = opts.get(&pair.metric_name).cloned().unwrap_or_default();
        classifications.insert(&pair.metric_name, classify_special(&pair.metric, corpus, tol, &o)?);
    }
    let per_pair = pairs
        .par_iter()
        .map(|pair| {
            let corpus = &corpora[&pair.metric_name];
            let conc = fit_and_verify(&pair.metric, &pair.candidate, corpus, tol, psi_min)?;
            let case = HarnessCase {
                metric_name: &pair.metric_name,
                classification: &classifications[pair.metric_name.as_str()],
                concircular: &conc,
                closed_form_rel,
            };
            evaluate_case(&case, tol)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HarnessReport::from_instances(per_pair.into_iter().flatten().collect()))
}
