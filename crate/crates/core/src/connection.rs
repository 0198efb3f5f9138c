//! Geodesic spray, nonlinear connection, the Cartan and Berwald connections and
//! their covariant derivatives, and the identities relating the two.

use rayon::prelude::*;
use serde::Serialize;

use crate::check::{Check, Residuals, Tolerance};
use crate::curvature::CurvatureJets;
use crate::diffcore::Jet;
use crate::error::{FinslerError, Result};
use crate::expr::Expr;
use crate::local::{LocalGeometry, Direction};
use crate::metric::{JetPoint, MetricModel};
use crate::tensor::{JetTensor, PointTensor, Variance};

pub use crate::local::Connection;

/// Connection coefficients at one point. Arrays are row-major with the upper
/// index first, e.g. `cartan_h[(i*n + j)*n + k] = Fⁱⱼₖ`.
#[derive(Debug, Clone, Serialize)]
pub struct ConnectionData {
    pub spray: Vec<f64>,
    pub nonlinear: Vec<f64>,
    pub cartan_h: Vec<f64>,
    pub cv: Vec<f64>,
    pub berwald: Vec<f64>,
    pub at: JetPoint,
}

impl ConnectionData {
    pub fn from_local(geo: &LocalGeometry) -> ConnectionData {
        let v = |a: &[Jet]| a.iter().map(Jet::value).collect::<Vec<_>>();
        ConnectionData {
            spray: v(&geo.spray),
            nonlinear: v(&geo.nonlinear),
            cartan_h: v(&geo.cartan_h),
            cv: v(&geo.cv),
            berwald: v(&geo.berwald),
            at: geo.point.clone(),
        }
    }
}

/// A π-tensor field given by closed-form component expressions in `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    n: usize,
    slots: Vec<Variance>,
    components: Vec<Expr>,
}

impl TensorField {
    pub fn new(n: usize, slots: Vec<Variance>, components: Vec<Expr>) -> Result<TensorField> {
        let expected = n.pow(slots.len() as u32);
        if components.len() != expected {
            return Err(FinslerError::Dimension(format!(
                "field needs {expected} components, got {}",
                components.len()
            )));
        }
        for c in &components {
            c.check_dimension(n)?;
        }
        Ok(TensorField {
            n,
            slots,
            components,
        })
    }

    /// A π-vector field `ζⁱ`.
    pub fn vector(n: usize, components: &[&str]) -> Result<TensorField> {
        let parsed = components
            .iter()
            .map(|s| Expr::parse(s))
            .collect::<Result<Vec<_>>>()?;
        TensorField::new(n, vec![Variance::Contravariant], parsed)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn slots(&self) -> &[Variance] {
        &self.slots
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn depends_on_y(&self) -> bool {
        self.components.iter().any(Expr::depends_on_y)
    }

    /// Components as jets in the expansion of `geo`.
    pub fn jets(&self, geo: &LocalGeometry) -> Result<JetTensor> {
        if self.n != geo.n {
            return Err(FinslerError::Dimension(format!(
                "field has dimension {}, metric has {}",
                self.n, geo.n
            )));
        }
        let comps = self
            .components
            .iter()
            .map(|e| e.eval(&geo.xs, &geo.ys))
            .collect::<Result<Vec<_>>>()?;
        Ok(JetTensor::new(self.n, self.slots.clone(), comps))
    }
}

/// `(Gⁱ, Nⁱⱼ)` with `nonlinear[i*n + j] = Nⁱⱼ`.
pub fn spray_and_nonlinear(m: &MetricModel, p: &JetPoint) -> Result<(Vec<f64>, Vec<f64>)> {
    let data = cartan_coefficients(m, p)?;
    Ok((data.spray, data.nonlinear))
}

pub fn cartan_coefficients(m: &MetricModel, p: &JetPoint) -> Result<ConnectionData> {
    Ok(ConnectionData::from_local(&LocalGeometry::new(m, p, 4)?))
}

/// Horizontal covariant derivative; the derivative index is the last slot.
pub fn h_cov_derive(
    m: &MetricModel,
    p: &JetPoint,
    field: &TensorField,
    conn: Connection,
) -> Result<PointTensor> {
    cov_derive(m, p, field, Direction::Horizontal, conn)
}

/// Vertical covariant derivative; for the Berwald connection this is the plain `∂̇`.
pub fn v_cov_derive(
    m: &MetricModel,
    p: &JetPoint,
    field: &TensorField,
    conn: Connection,
) -> Result<PointTensor> {
    cov_derive(m, p, field, Direction::Vertical, conn)
}

fn cov_derive(
    m: &MetricModel,
    p: &JetPoint,
    field: &TensorField,
    dir: Direction,
    conn: Connection,
) -> Result<PointTensor> {
    let geo = LocalGeometry::new(m, p, 4)?;
    let w = field.jets(&geo)?;
    Ok(geo.cov_derive(&w, dir, conn).to_point(p))
}

/// Residuals of the defining properties of the Cartan connection and the
/// nonlinear connection at one point.
pub fn cartan_axiom_residuals(geo: &LocalGeometry) -> Residuals {
    let n = geo.n;
    let mut out = Residuals::new();
    let hg = geo.cov_derive(&geo.g_tensor(), Direction::Horizontal, Connection::Cartan);
    out.zero("h-metricity", &hg.values());

    let mut dg = Vec::with_capacity(n * n * n);
    let mut two_t = Vec::with_capacity(n * n * n);
    for ij in 0..n * n {
        for k in 0..n {
            dg.push(geo.dot(&geo.g[ij], k).value());
            two_t.push(2.0 * geo.cartan[ij * n + k].value());
        }
    }
    out.compare("v-metricity", &dg, &two_t);

    let f = |i: usize, j: usize, k: usize| geo.cartan_h[(i * n + j) * n + k].value();
    let mut fsym = Vec::new();
    let mut tsym = Vec::new();
    let mut deflection = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                fsym.push(f(i, j, k) - f(i, k, j));
                // g(T(X,Y),Z) = g(T(X,Z),Y)
                let t = |a: usize, b: usize, c: usize| geo.cartan[(a * n + b) * n + c].value();
                tsym.push(t(i, j, k) - t(i, k, j));
            }
            let fy: f64 = (0..n).map(|a| f(i, a, j) * geo.point.y[a]).sum();
            deflection.push(fy - geo.nonlinear[i * n + j].value());
        }
    }
    out.zero("F symmetry", &fsym);
    out.zero("T symmetry", &tsym);
    out.zero("deflection F(y) = N", &deflection);

    let euler: Vec<f64> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| geo.nonlinear[i * n + j].value() * geo.point.y[j])
                .sum::<f64>()
                - 2.0 * geo.spray[i].value()
        })
        .collect();
    out.zero("N(y) = 2G", &euler);
    out
}

/// Torsion-freeness of the Berwald connection, `Gⁱⱼₖyᵏ = Nⁱⱼ`, and `D°_{β·}L = 0`.
pub fn berwald_axiom_residuals(geo: &LocalGeometry) -> Residuals {
    let n = geo.n;
    let mut out = Residuals::new();
    let gb = |i: usize, j: usize, k: usize| geo.berwald[(i * n + j) * n + k].value();
    let mut sym = Vec::new();
    let mut contraction = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                sym.push(gb(i, j, k) - gb(i, k, j));
            }
            let gy: f64 = (0..n).map(|k| gb(i, j, k) * geo.point.y[k]).sum();
            contraction.push(gy - geo.nonlinear[i * n + j].value());
        }
    }
    out.zero("Berwald symmetry", &sym);
    out.zero("Berwald G(y) = N", &contraction);
    let dl: Vec<f64> = (0..n).map(|k| geo.delta(&geo.l, k).value()).collect();
    out.zero("h-derivative of L", &dl);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BridgeResiduals {
    /// `D°_{γX}Y − ∇_{γX}Y + T(X, Y)`
    pub vertical: f64,
    /// `D°_{βX}Y − ∇_{βX}Y − P̂(X, Y)`
    pub horizontal: f64,
}

/// Compares Berwald and Cartan derivatives of a π-vector field through the
/// Cartan tensor and the (v)hv-torsion.
pub fn berwald_bridge_check(m: &MetricModel, p: &JetPoint, field: &TensorField) -> Result<BridgeResiduals> {
    if field.slots() != [Variance::Contravariant] {
        return Err(FinslerError::InvalidArgument(
            "the bridge identities are checked on π-vector fields".into(),
        ));
    }
    let geo = LocalGeometry::new(m, p, 4)?;
    let w = field.jets(&geo)?;
    Ok(bridge_residuals(&geo, &w))
}

pub fn bridge_residuals(geo: &LocalGeometry, w: &JetTensor) -> BridgeResiduals {
    let n = geo.n;
    let phat = CurvatureJets::new(geo).phat(geo);
    let t_map = geo.cartan_map();
    let mut vertical: f64 = 0.0;
    let mut horizontal: f64 = 0.0;
    let cv = geo.cov_derive(w, Direction::Vertical, Connection::Cartan);
    let bv = geo.cov_derive(w, Direction::Vertical, Connection::Berwald);
    let ch = geo.cov_derive(w, Direction::Horizontal, Connection::Cartan);
    let bh = geo.cov_derive(w, Direction::Horizontal, Connection::Berwald);
    for i in 0..n {
        for k in 0..n {
            // X = ∂̄ₖ, Y = w
            let mut t_xy = 0.0;
            let mut p_xy = 0.0;
            for j in 0..n {
                let wj = w.comps[j].value();
                t_xy += t_map.at(&[k, j, i]).value() * wj;
                p_xy += phat.at(&[k, j, i]).value() * wj;
            }
            let idx = i * n + k;
            vertical = vertical.max((bv.comps[idx].value() - cv.comps[idx].value() + t_xy).abs());
            horizontal =
                horizontal.max((bh.comps[idx].value() - ch.comps[idx].value() - p_xy).abs());
        }
    }
    BridgeResiduals {
        vertical,
        horizontal,
    }
}

/// Axioms of both connections and the bridge identities over a corpus.
#[derive(Debug, Clone, Serialize)]
pub struct ConnectionReport {
    pub points: usize,
    pub cartan: Vec<Check>,
    pub berwald: Vec<Check>,
    /// Bridge identities on `field`.
    pub bridge: Vec<Check>,
    pub pass: bool,
}

pub fn connection_report(
    m: &MetricModel,
    corpus: &[JetPoint],
    field: &TensorField,
    tol: &Tolerance,
) -> Result<ConnectionReport> {
    if field.slots() != [Variance::Contravariant] || field.n() != m.n() {
        return Err(FinslerError::InvalidArgument(
            "the bridge identities are checked on π-vector fields of the metric's dimension".into(),
        ));
    }
    let per_point = corpus
        .par_iter()
        .map(|p| {
            let geo = LocalGeometry::new(m, p, 4)?;
            let w = field.jets(&geo)?;
            let b = bridge_residuals(&geo, &w);
            let mut bridge = Residuals::new();
            bridge.record("bridge vertical: D(gamma X)Y - nabla(gamma X)Y + T(X,Y) = 0", b.vertical, 0.0);
            bridge.record("bridge horizontal: D(beta X)Y - nabla(beta X)Y - P^(X,Y) = 0", b.horizontal, 0.0);
            Ok((cartan_axiom_residuals(&geo), berwald_axiom_residuals(&geo), bridge))
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut c, mut b, mut br) = (Residuals::new(), Residuals::new(), Residuals::new());
    for (pc, pb, pbr) in per_point {
        c = c.merge(pc);
        b = b.merge(pb);
        br = br.merge(pbr);
    }
    let (cartan, berwald, bridge) = (c.into_checks(tol), b.into_checks(tol), br.into_checks(tol));
    let pass = cartan.iter().chain(&berwald).chain(&bridge).all(|c| c.pass);
    Ok(ConnectionReport {
        points: corpus.len(),
        cartan,
        berwald,
        bridge,
        pass,
    })
}
