//! Recurrence `∇W = λ ⊗ W` of `T, S, P, R` along horizontal (`λ₁`) and
//! vertical (`λ₂`) directions of the Cartan connection.

use rayon::prelude::*;
use serde::Serialize;

use super::forms::{recurrence, FormFit};
use super::Verdict;
use crate::check::Tolerance;
use crate::curvature::CurvatureJets;
use crate::error::Result;
use crate::local::{Connection, Direction, LocalGeometry};
use crate::metric::{JetPoint, MetricModel};
use crate::tensor::max_abs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TensorKind {
    T,
    S,
    P,
    R,
}

pub const KINDS: [TensorKind; 4] = [TensorKind::T, TensorKind::S, TensorKind::P, TensorKind::R];
pub const DIRECTIONS: [Direction; 2] = [Direction::Horizontal, Direction::Vertical];

pub fn label(kind: TensorKind, dir: Direction) -> String {
    let d = match dir {
        Direction::Horizontal => "h",
        Direction::Vertical => "v",
    };
    format!("{kind:?}^{d}-recurrent")
}

#[derive(Debug, Clone, Serialize)]
pub struct RecurrencePoint {
    pub kind: TensorKind,
    pub direction: Direction,
    pub fit: FormFit,
    /// `max |W|` at the point.
    pub tensor_max: f64,
    pub lambda: Vec<f64>,
}

/// All eight recurrence fits at one point. Needs an expansion of order 5.
pub fn recurrence_points(geo: &LocalGeometry, cj: &CurvatureJets) -> Vec<RecurrencePoint> {
    let n = geo.n;
    let t = geo.cartan_map();
    let mut out = Vec::with_capacity(8);
    for kind in KINDS {
        let w = match kind {
            TensorKind::T => &t,
            TensorKind::S => &cj.s,
            TensorKind::P => &cj.p,
            TensorKind::R => &cj.r,
        };
        let values = w.values();
        for dir in DIRECTIONS {
            let dw = geo.cov_derive(w, dir, Connection::Cartan).values();
            let (fit, lambda) = recurrence(&values, &dw, n);
            out.push(RecurrencePoint {
                kind,
                direction: dir,
                fit,
                tensor_max: max_abs(&values),
                lambda,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct RecurrenceReport {
    pub name: String,
    pub kind: TensorKind,
    pub direction: Direction,
    pub verdict: Verdict,
    /// The tensor is below tolerance everywhere, so any `λ` works.
    pub trivially_recurrent: bool,
    pub residual: f64,
    pub scale: f64,
    pub tolerance: f64,
    pub tensor_max: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl RecurrenceReport {
    pub fn verdict_at(&self, tol: &Tolerance) -> Verdict {
        if self.tensor_max < tol.threshold(0.0) {
            Verdict::Vacuous
        } else if tol.holds(self.residual, self.scale) {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

pub fn aggregate(points: &[&RecurrencePoint], kind: TensorKind, dir: Direction, tol: &Tolerance) -> RecurrenceReport {
    let mut residual: f64 = 0.0;
    let mut scale: f64 = 0.0;
    let mut tensor_max: f64 = 0.0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in points {
        residual = residual.max(p.fit.residual);
        scale = scale.max(p.fit.scale);
        tensor_max = tensor_max.max(p.tensor_max);
        for &l in &p.lambda {
            lo = lo.min(l);
            hi = hi.max(l);
        }
    }
    if points.is_empty() {
        lo = 0.0;
        hi = 0.0;
    }
    let mut report = RecurrenceReport {
        name: label(kind, dir),
        kind,
        direction: dir,
        verdict: Verdict::Fail,
        trivially_recurrent: false,
        residual,
        scale,
        tolerance: tol.threshold(scale),
        tensor_max,
        lambda_min: lo,
        lambda_max: hi,
    };
    report.verdict = report.verdict_at(tol);
    report.trivially_recurrent = report.verdict == Verdict::Vacuous;
    report
}

/// Fits `λ` per point for one tensor and direction.
pub fn fit_recurrence(
    m: &MetricModel,
    corpus: &[JetPoint],
    kind: TensorKind,
    dir: Direction,
    tol: &Tolerance,
) -> Result<(RecurrenceReport, Vec<Vec<f64>>)> {
    let points = corpus
        .par_iter()
        .map(|p| {
            let geo = LocalGeometry::new(m, p, 5)?;
            let cj = CurvatureJets::new(&geo);
            Ok(recurrence_points(&geo, &cj)
                .into_iter()
                .find(|r| r.kind == kind && r.direction == dir)
                .expect("all kinds are fitted"))
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&RecurrencePoint> = points.iter().collect();
    let report = aggregate(&refs, kind, dir, tol);
    Ok((report, points.into_iter().map(|p| p.lambda).collect()))
}
