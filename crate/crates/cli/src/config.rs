//! TOML run configuration.

use std::collections::BTreeSet;

use finsler_core::check::Tolerance;
use finsler_core::classify::ClassifyOptions;
use finsler_core::concircular::CandidateField;
use finsler_core::connection::TensorField;
use finsler_core::expr::Expr;
use finsler_core::metric::MetricModel;
use finsler_core::tensor::Variance;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Tensors,
    IdentityBattery,
    Classify,
    Concircular,
    VerifyTheorems,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    Concurrent,
    /// Concircular but not concurrent.
    Concircular,
    NotConcircular,
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    Euclidean,
    Riemannian,
    Randers,
    Expression,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    #[serde(default = "default_abs")]
    pub abs: f64,
    #[serde(default = "default_rel")]
    pub rel: f64,
    #[serde(default = "default_psi_min")]
    pub psi_min: f64,
    /// Relative agreement required between fitted and closed-form `k0`.
    #[serde(default = "default_closed_form_rel")]
    pub closed_form_rel: f64,
    /// Relative agreement required between jet and finite-difference partials.
    #[serde(default = "default_fd_rel")]
    pub fd_rel: f64,
}

fn default_abs() -> f64 {
    1e-8
}
fn default_rel() -> f64 {
    1e-7
}
fn default_psi_min() -> f64 {
    finsler_core::concircular::PSI_MIN
}
fn default_closed_form_rel() -> f64 {
    1e-5
}
fn default_fd_rel() -> f64 {
    1e-5
}

impl Default for ToleranceConfig {
    fn default() -> ToleranceConfig {
        ToleranceConfig {
            abs: default_abs(),
            rel: default_rel(),
            psi_min: default_psi_min(),
            closed_form_rel: default_closed_form_rel(),
            fd_rel: default_fd_rel(),
        }
    }
}

impl ToleranceConfig {
    pub fn tolerance(&self) -> Tolerance {
        Tolerance::new(self.abs, self.rel)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    pub name: String,
    pub family: FamilyName,
    pub n: usize,
    /// Row-major `a_ij(x)`; identity when omitted for Randers.
    pub a: Option<Vec<String>>,
    pub b: Option<Vec<String>>,
    /// `L(x, y)` for the expression family.
    pub l: Option<String>,
    #[serde(rename = "box")]
    pub x_box: Option<[f64; 2]>,
    /// Row-major `A_ij` for the quasi-C-reducible form.
    pub quasi_a: Option<Vec<String>>,
    /// π-vector field for the bridge identities; a fixed x-dependent field by default.
    pub bridge_field: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateConfig {
    pub name: String,
    pub metric: String,
    pub components: Vec<String>,
    #[serde(default)]
    pub y_independent: bool,
    pub expect: Option<Expectation>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_tasks")]
    pub tasks: Vec<Task>,
    /// Include per-sample concircular data in the report.
    #[serde(default)]
    pub include_samples: bool,
    #[serde(default)]
    pub tolerance: ToleranceConfig,
    #[serde(default, rename = "metric")]
    pub metrics: Vec<MetricConfig>,
    #[serde(default, rename = "candidate")]
    pub candidates: Vec<CandidateConfig>,
}

fn default_seed() -> u64 {
    1
}
fn default_points() -> usize {
    50
}
fn default_tasks() -> Vec<Task> {
    vec![Task::Tensors, Task::IdentityBattery, Task::Classify, Task::Concircular, Task::VerifyTheorems]
}

/// A validated metric declaration.
#[derive(Debug, Clone)]
pub struct PreparedMetric {
    pub name: String,
    pub family: FamilyName,
    pub model: MetricModel,
    pub options: ClassifyOptions,
    pub bridge_field: TensorField,
}

#[derive(Debug, Clone)]
pub struct PreparedCandidate {
    pub metric: String,
    pub field: CandidateField,
    pub expect: Option<Expectation>,
}

impl RunConfig {
    pub fn parse(text: &str, path: &str) -> Result<RunConfig, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config {
            path: path.to_string(),
            message: e.to_string(),
        })
    }

    pub fn has(&self, task: Task) -> bool {
        self.tasks.contains(&task)
    }

    pub fn prepare(&self, path: &str) -> Result<(Vec<PreparedMetric>, Vec<PreparedCandidate>), CliError> {
        let err = |at: String, message: String| CliError::Config {
            path: format!("{path}: {at}"),
            message,
        };
        if self.points == 0 {
            return Err(err("points".into(), "must be positive".into()));
        }
        let t = &self.tolerance;
        for (key, v) in [("abs", t.abs), ("rel", t.rel), ("psi_min", t.psi_min), ("closed_form_rel", t.closed_form_rel), ("fd_rel", t.fd_rel)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(err(format!("tolerance.{key}"), format!("must be a non-negative number, got {v}")));
            }
        }
        if self.metrics.is_empty() {
            return Err(err("metric".into(), "at least one [[metric]] is required".into()));
        }
        let tasks: BTreeSet<Task> = self.tasks.iter().copied().collect();
        if tasks.len() != self.tasks.len() {
            return Err(err("tasks".into(), "duplicate task".into()));
        }

        let mut names = BTreeSet::new();
        let mut metrics = Vec::new();
        for (i, mc) in self.metrics.iter().enumerate() {
            let at = format!("metric[{i}] `{}`", mc.name);
            if !names.insert(mc.name.clone()) {
                return Err(err(at, "duplicate metric name".into()));
            }
            let model = build_metric(mc).map_err(|m| err(at.clone(), m))?;
            let n = mc.n;
            let options = ClassifyOptions {
                quasi_a: match &mc.quasi_a {
                    Some(a) => Some(tensor(n, vec![Variance::Covariant; 2], a).map_err(|m| err(format!("{at}.quasi_a"), m))?),
                    None => None,
                },
            };
            let default_field: Vec<String> = (1..=n)
                .map(|i| format!("1 + 0.5*sin(x{i}) + 0.3*x{}", i % n + 1))
                .collect();
            let bridge_field = tensor(n, vec![Variance::Contravariant], mc.bridge_field.as_ref().unwrap_or(&default_field))
                .map_err(|m| err(format!("{at}.bridge_field"), m))?;
            metrics.push(PreparedMetric {
                name: mc.name.clone(),
                family: mc.family,
                model,
                options,
                bridge_field,
            });
        }

        let mut cnames = BTreeSet::new();
        let mut candidates = Vec::new();
        for (i, cc) in self.candidates.iter().enumerate() {
            let at = format!("candidate[{i}] `{}`", cc.name);
            if !cnames.insert(cc.name.clone()) {
                return Err(err(at, "duplicate candidate name".into()));
            }
            let metric = metrics
                .iter()
                .find(|m| m.name == cc.metric)
                .ok_or_else(|| err(at.clone(), format!("unknown metric `{}`", cc.metric)))?;
            let comps: Vec<&str> = cc.components.iter().map(String::as_str).collect();
            let field = CandidateField::new(&cc.name, metric.model.n(), &comps, cc.y_independent)
                .map_err(|e| err(at.clone(), e.to_string()))?;
            if cc.components.len() != metric.model.n() {
                return Err(err(at, format!("needs {} components", metric.model.n())));
            }
            candidates.push(PreparedCandidate {
                metric: cc.metric.clone(),
                field,
                expect: cc.expect,
            });
        }
        Ok((metrics, candidates))
    }
}

fn strs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

fn tensor(n: usize, slots: Vec<Variance>, comps: &[String]) -> Result<TensorField, String> {
    let exprs = comps
        .iter()
        .map(|c| Expr::parse(c).map_err(|e| format!("`{c}`: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    TensorField::new(n, slots, exprs).map_err(|e| e.to_string())
}

fn build_metric(mc: &MetricConfig) -> Result<MetricModel, String> {
    let n = mc.n;
    let unused = |key: &str, present: bool| {
        if present {
            Err(format!("`{key}` is not used by the {:?} family", mc.family))
        } else {
            Ok(())
        }
    };
    let model = match mc.family {
        FamilyName::Euclidean => {
            unused("a", mc.a.is_some())?;
            unused("b", mc.b.is_some())?;
            unused("l", mc.l.is_some())?;
            MetricModel::euclidean(n)
        }
        FamilyName::Riemannian => {
            unused("b", mc.b.is_some())?;
            unused("l", mc.l.is_some())?;
            let a = mc.a.as_ref().ok_or("riemannian needs `a`")?;
            MetricModel::riemannian(n, &strs(a))
        }
        FamilyName::Randers => {
            unused("l", mc.l.is_some())?;
            let b = mc.b.as_ref().ok_or("randers needs `b`")?;
            let a = mc.a.as_ref().map(|a| strs(a));
            MetricModel::randers(n, a.as_deref(), &strs(b))
        }
        FamilyName::Expression => {
            unused("a", mc.a.is_some())?;
            unused("b", mc.b.is_some())?;
            let l = mc.l.as_ref().ok_or("expression needs `l`")?;
            MetricModel::expression(n, l)
        }
    }
    .map_err(|e| e.to_string())?;
    match mc.x_box {
        Some([lo, hi]) => model.with_box(lo, hi).map_err(|e| e.to_string()),
        None => Ok(model),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = RunConfig::parse("[[metric]]\nname = \"e\"\nfamily = \"euclidean\"\nn = 2\n", "c.toml").unwrap();
        assert_eq!(c.points, 50);
        assert_eq!(c.tasks.len(), 5);
        assert_eq!(c.tolerance, ToleranceConfig::default());
        let (m, cands) = c.prepare("c.toml").unwrap();
        assert_eq!(m.len(), 1);
        assert!(cands.is_empty());
    }

    #[test]
    fn errors_carry_locations() {
        let e = RunConfig::parse("points = \"many\"\n", "c.toml").unwrap_err().to_string();
        assert!(e.contains("c.toml") && e.contains("line 1"), "{e}");
        let text = "[[metric]]\nname = \"e\"\nfamily = \"euclidean\"\nn = 2\n\
                    [[candidate]]\nname = \"z\"\nmetric = \"nope\"\ncomponents = [\"x1\", \"x2\"]\n";
        let e = RunConfig::parse(text, "c.toml").unwrap().prepare("c.toml").unwrap_err().to_string();
        assert!(e.contains("candidate[0]") && e.contains("unknown metric"), "{e}");
        let text = "[[metric]]\nname = \"r\"\nfamily = \"randers\"\nn = 2\nb = [\"0.3\", \"0\"]\nl = \"y1\"\n";
        let e = RunConfig::parse(text, "c.toml").unwrap().prepare("c.toml").unwrap_err().to_string();
        assert!(e.contains("`l` is not used"), "{e}");
    }
}
