use std::path::Path;

use finsler_core::classify::harness::{evaluate_case, HarnessCase, HarnessReport};
use finsler_core::classify::{classify_special, ClassificationReport};
use finsler_core::concircular::{fit_and_battery, ConcircularReport, FitVerdict};
use finsler_core::connection::connection_report;
use finsler_core::curvature::identity_battery;
use finsler_core::local::LocalGeometry;
use finsler_core::metric::{derivative_fidelity, JetPoint};
use sha2::{Digest, Sha256};

use crate::config::{Expectation, PreparedCandidate, PreparedMetric, RunConfig, Task};
use crate::error::CliError;
use crate::report::{CandidateSection, MetricSection, PointTensors, Provenance, Report, Summary, TensorsSection};

/// Command-line values that replace the configuration's.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub tol_abs: Option<f64>,
    pub tol_rel: Option<f64>,
    pub seed: Option<u64>,
    pub points: Option<usize>,
}

pub fn run_file(path: &Path, overrides: &Overrides) -> Result<Report, CliError> {
    let display = path.display().to_string();
    let bytes = std::fs::read(path).map_err(|source| CliError::Io {
        path: display.clone(),
        source,
    })?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| CliError::Config {
        path: display.clone(),
        message: format!("not UTF-8: {e}"),
    })?;
    let mut config = RunConfig::parse(&text, &display)?;
    if let Some(v) = overrides.tol_abs {
        config.tolerance.abs = v;
    }
    if let Some(v) = overrides.tol_rel {
        config.tolerance.rel = v;
    }
    if let Some(v) = overrides.seed {
        config.seed = v;
    }
    if let Some(v) = overrides.points {
        config.points = v;
    }
    run(&config, &hex_sha256(&bytes), &display)
}

fn hex_sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Evaluates every requested task. `Err` is a configuration or admissibility
/// problem; failed checks are reported in the summary.
pub fn run(config: &RunConfig, config_sha256: &str, path: &str) -> Result<Report, CliError> {
    let (metrics, candidates) = config.prepare(path)?;
    let tol = config.tolerance.tolerance();
    let mut failures = Vec::new();

    let corpora = metrics
        .iter()
        .map(|m| {
            m.model
                .sample_corpus(config.points, config.seed)
                .map_err(CliError::compute(format!("sampling metric `{}`", m.name)))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut sections = Vec::new();
    let mut classifications: Vec<Option<ClassificationReport>> = Vec::new();
    for (m, corpus) in metrics.iter().zip(&corpora) {
        let tensors = if config.has(Task::Tensors) {
            Some(tensors_section(m, corpus, config, &mut failures)?)
        } else {
            None
        };
        let identity_battery = if config.has(Task::IdentityBattery) {
            let r = identity_battery(&m.model, corpus, &tol)
                .map_err(CliError::compute(format!("identity battery on `{}`", m.name)))?;
            for c in r.checks.iter().filter(|c| !c.pass) {
                failures.push(format!("{}/identity_battery: {}", m.name, c.name));
            }
            Some(r)
        } else {
            None
        };
        let classification = if config.has(Task::Classify) || config.has(Task::VerifyTheorems) {
            Some(
                classify_special(&m.model, corpus, &tol, &m.options)
                    .map_err(CliError::compute(format!("classifying `{}`", m.name)))?,
            )
        } else {
            None
        };
        let (lo, hi) = m.model.x_box();
        sections.push(MetricSection {
            name: m.name.clone(),
            family: m.family,
            n: m.model.n(),
            x_box: [lo, hi],
            tensors,
            identity_battery,
            classification: classification.clone().filter(|_| config.has(Task::Classify)),
        });
        classifications.push(classification);
    }

    let mut cand_sections = Vec::new();
    let mut instances = Vec::new();
    if config.has(Task::Concircular) || config.has(Task::VerifyTheorems) {
        for c in &candidates {
            let idx = metrics.iter().position(|m| m.name == c.metric).expect("validated");
            let m = &metrics[idx];
            let (fit, battery) = fit_and_battery(&m.model, &c.field, &corpora[idx], &tol, config.tolerance.psi_min)
                .map_err(CliError::compute(format!("fitting candidate `{}`", c.field.name)))?;
            if config.has(Task::VerifyTheorems) {
                let case = HarnessCase {
                    metric_name: &m.name,
                    classification: classifications[idx].as_ref().expect("computed for verify-theorems"),
                    concircular: &fit,
                    closed_form_rel: config.tolerance.closed_form_rel,
                };
                instances.extend(
                    evaluate_case(&case, &tol)
                        .map_err(CliError::compute(format!("harness on `{}`", c.field.name)))?,
                );
            }
            if config.has(Task::Concircular) {
                cand_sections.push(candidate_section(c, fit, battery, config, &mut failures));
            }
        }
    }

    let theorems = config.has(Task::VerifyTheorems).then(|| HarnessReport::from_instances(instances));
    if let Some(h) = &theorems {
        for i in h.instances.iter().filter(|i| i.outcome == finsler_core::classify::harness::Outcome::Violated) {
            failures.push(format!("theorems/{}/{}: {}", i.metric, i.candidate, i.statement));
        }
    }

    Ok(Report {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        provenance: Provenance {
            config_sha256: config_sha256.to_string(),
            seed: config.seed,
            points: config.points,
            tasks: config.tasks.clone(),
            tolerance: config.tolerance.clone(),
        },
        metrics: sections,
        candidates: cand_sections,
        theorems,
        summary: Summary {
            pass: failures.is_empty(),
            failures,
        },
    })
}

fn tensors_section(
    m: &PreparedMetric,
    corpus: &[JetPoint],
    config: &RunConfig,
    failures: &mut Vec<String>,
) -> Result<TensorsSection, CliError> {
    let tol = config.tolerance.tolerance();
    let fidelity =
        derivative_fidelity(&m.model, corpus, 4).map_err(CliError::compute(format!("fidelity on `{}`", m.name)))?;
    let fidelity_pass = fidelity.max_rel_error < config.tolerance.fd_rel;
    if !fidelity_pass {
        failures.push(format!("{}/tensors: derivative fidelity", m.name));
    }
    let connection = connection_report(&m.model, corpus, &m.bridge_field, &tol)
        .map_err(CliError::compute(format!("connections on `{}`", m.name)))?;
    for (group, checks) in [("cartan", &connection.cartan), ("berwald", &connection.berwald), ("bridge", &connection.bridge)] {
        for c in checks.iter().filter(|c| !c.pass) {
            failures.push(format!("{}/tensors/{group}: {}", m.name, c.name));
        }
    }
    let p = &corpus[0];
    let geo = LocalGeometry::new(&m.model, p, 4).map_err(CliError::compute(format!("expanding `{}`", m.name)))?;
    let values = |v: &[finsler_core::diffcore::Jet]| v.iter().map(|j| j.value()).collect::<Vec<_>>();
    let first_point = PointTensors {
        x: p.x.clone(),
        y: p.y.clone(),
        l: geo.l.value(),
        g: values(&geo.g),
        spray: values(&geo.spray),
        nonlinear: values(&geo.nonlinear),
        cartan_torsion: geo.cartan_tensor().values(),
    };
    Ok(TensorsSection {
        fidelity,
        fidelity_tolerance: config.tolerance.fd_rel,
        fidelity_pass,
        connection,
        first_point,
    })
}

fn candidate_section(
    c: &PreparedCandidate,
    mut fit: ConcircularReport,
    battery: finsler_core::concircular::ConsequenceReport,
    config: &RunConfig,
    failures: &mut Vec<String>,
) -> CandidateSection {
    let tol = config.tolerance.tolerance();
    let name = &c.field.name;
    let mut fail = |what: &str| failures.push(format!("{name}/concircular: {what}"));
    let expectation_met = c.expect.map(|e| match e {
        Expectation::Concurrent => fit.concircular && fit.concurrent,
        Expectation::Concircular => fit.concircular && !fit.concurrent,
        Expectation::NotConcircular => fit.verdict == FitVerdict::NotConcircular,
        Expectation::Indeterminate => fit.verdict == FitVerdict::Indeterminate,
    });
    if expectation_met == Some(false) {
        fail("expectation not met");
    }
    if fit.declared_y_independent && fit.max_y_derivative >= tol.threshold(0.0) {
        fail("declared y-independent but depends on y");
    }
    if fit.concircular {
        if !fit.berwald.agrees {
            fail("Berwald refit disagrees");
        }
        for ch in battery.checks.iter().chain(battery.concurrent_checks.iter().flatten()) {
            if !ch.pass {
                fail(&ch.name);
            }
        }
        for nz in battery.nonzero.iter().filter(|nz| !nz.pass) {
            fail(&format!("{} vanishes", nz.name));
        }
    }
    if !config.include_samples {
        fit.samples.clear();
    }
    CandidateSection {
        name: name.clone(),
        metric: c.metric.clone(),
        expect: c.expect,
        expectation_met,
        fit,
        battery,
    }
}
