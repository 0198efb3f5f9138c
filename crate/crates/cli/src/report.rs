//! Report document. Field order is serialization order, so the JSON is stable.

use finsler_core::classify::harness::HarnessReport;
use finsler_core::classify::ClassificationReport;
use finsler_core::concircular::{ConcircularReport, ConsequenceReport};
use finsler_core::connection::ConnectionReport;
use finsler_core::curvature::IdentityReport;
use finsler_core::metric::FidelityReport;
use serde::Serialize;

use crate::config::{Expectation, FamilyName, Task, ToleranceConfig};

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub provenance: Provenance,
    pub metrics: Vec<MetricSection>,
    pub candidates: Vec<CandidateSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theorems: Option<HarnessReport>,
    pub summary: Summary,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    /// SHA-256 of the configuration file bytes.
    pub config_sha256: String,
    pub seed: u64,
    pub points: usize,
    pub tasks: Vec<Task>,
    pub tolerance: ToleranceConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricSection {
    pub name: String,
    pub family: FamilyName,
    pub n: usize,
    pub x_box: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tensors: Option<TensorsSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub identity_battery: Option<IdentityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassificationReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TensorsSection {
    pub fidelity: FidelityReport,
    pub fidelity_tolerance: f64,
    pub fidelity_pass: bool,
    pub connection: ConnectionReport,
    /// Tensors at the first sample point, row-major.
    pub first_point: PointTensors,
}

#[derive(Debug, Clone, Serialize)]
pub struct PointTensors {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub l: f64,
    pub g: Vec<f64>,
    pub spray: Vec<f64>,
    pub nonlinear: Vec<f64>,
    /// Lowered Cartan tensor `T_ijk`.
    pub cartan_torsion: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CandidateSection {
    pub name: String,
    pub metric: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expect: Option<Expectation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expectation_met: Option<bool>,
    pub fit: ConcircularReport,
    pub battery: ConsequenceReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub pass: bool,
    /// One line per failed check, `section: check`.
    pub failures: Vec<String>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn exit_code(&self) -> u8 {
        if self.summary.pass {
            0
        } else {
            1
        }
    }
}
