//! h-, hv- and v-curvature of the Cartan connection, their contractions with
//! `η̄`, the vertical Ricci tensor, and the battery of unconditional identities.
//!
//! Sign: `R(X,Y)Z = −K(βX,βY)Z` and likewise for `P`, `S`, where `K` is the
//! classical commutator curvature `∇_U∇_V − ∇_V∇_U − ∇_[U,V]`. With this
//! sign the unit sphere has `R(X,Y)Z = g(X,Z)Y − g(Y,Z)X`.
//!
//! Map-form tensors have slots `(X, Y, Z, out)`; lowered forms are
//! `R(X,Y,Z,W) = g(R(X,Y)Z, W)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::check::{Check, Residuals, Tolerance};
use crate::diffcore::Jet;
use crate::error::Result;
use crate::local::{Connection, Direction, LocalGeometry};
use crate::metric::{JetPoint, MetricModel};
use crate::tensor::{JetTensor, Variance};

/// Curvature tensors in map form, still differentiable when the expansion
/// order allows.
#[derive(Debug, Clone)]
pub struct CurvatureJets {
    pub r: JetTensor,
    pub p: JetTensor,
    pub s: JetTensor,
}

fn map_slots() -> Vec<Variance> {
    vec![
        Variance::Covariant,
        Variance::Covariant,
        Variance::Covariant,
        Variance::Contravariant,
    ]
}

impl CurvatureJets {
    pub fn new(geo: &LocalGeometry) -> CurvatureJets {
        let n = geo.n;
        let f = &geo.cartan_h;
        let c = &geo.cv;
        let i3 = |i: usize, j: usize, k: usize| (i * n + j) * n + k;
        let delta_all = |a: &[Jet]| -> Vec<Vec<Jet>> {
            (0..n).map(|k| a.iter().map(|e| geo.delta(e, k)).collect()).collect()
        };
        let dot_all = |a: &[Jet]| -> Vec<Vec<Jet>> {
            (0..n).map(|k| a.iter().map(|e| geo.dot(e, k)).collect()).collect()
        };
        let df = delta_all(f);
        let vf = dot_all(f);
        let dc = delta_all(c);
        let vc = dot_all(c);
        let dn = delta_all(&geo.nonlinear);
        // ℛᵐ_ab = δ_b Nᵐ_a − δ_a Nᵐ_b, the coefficient of [δ_a, δ_b] along ∂̇_m
        let mut bracket = Vec::with_capacity(n * n * n);
        for m in 0..n {
            for a in 0..n {
                for b in 0..n {
                    bracket.push(&dn[b][m * n + a] - &dn[a][m * n + b]);
                }
            }
        }

        let order = geo.order.saturating_sub(4);
        let mut r = Vec::with_capacity(n.pow(4));
        let mut p = Vec::with_capacity(n.pow(4));
        let mut s = Vec::with_capacity(n.pow(4));
        for a in 0..n {
            for b in 0..n {
                for cc in 0..n {
                    for i in 0..n {
                        let mut kr = &df[a][i3(i, cc, b)] - &df[b][i3(i, cc, a)];
                        let mut kp = &dc[a][i3(i, cc, b)] - &vf[b][i3(i, cc, a)];
                        let mut ks = &vc[a][i3(i, cc, b)] - &vc[b][i3(i, cc, a)];
                        for m in 0..n {
                            kr = kr + &f[i3(m, cc, b)] * &f[i3(i, m, a)]
                                - &f[i3(m, cc, a)] * &f[i3(i, m, b)]
                                - &bracket[i3(m, a, b)] * &c[i3(i, cc, m)];
                            kp = kp + &c[i3(m, cc, b)] * &f[i3(i, m, a)]
                                - &f[i3(m, cc, a)] * &c[i3(i, m, b)]
                                - &geo.berwald[i3(m, a, b)] * &c[i3(i, cc, m)];
                            ks = ks + &c[i3(m, cc, b)] * &c[i3(i, m, a)]
                                - &c[i3(m, cc, a)] * &c[i3(i, m, b)];
                        }
                        r.push(kr.truncate(order).scale(-1.0));
                        p.push(kp.truncate(order).scale(-1.0));
                        s.push(ks.truncate(order).scale(-1.0));
                    }
                }
            }
        }
        CurvatureJets {
            r: JetTensor::new(n, map_slots(), r),
            p: JetTensor::new(n, map_slots(), p),
            s: JetTensor::new(n, map_slots(), s),
        }
    }

    /// `R̂(X,Y) = R(X,Y)η̄`, slots `(X, Y, out)`.
    pub fn rhat(&self, geo: &LocalGeometry) -> JetTensor {
        self.r.contract(2, &geo.ys)
    }

    pub fn phat(&self, geo: &LocalGeometry) -> JetTensor {
        self.p.contract(2, &geo.ys)
    }

    pub fn shat(&self, geo: &LocalGeometry) -> JetTensor {
        self.s.contract(2, &geo.ys)
    }

    /// `X(X,Y,Z,W) = g(X(X,Y)Z, W)` for a map-form curvature tensor.
    pub fn lowered(t: &JetTensor, geo: &LocalGeometry) -> JetTensor {
        t.transform_slot(3, &geo.g, Variance::Covariant)
    }

    /// `Ric(X,Y) = Tr{Z ↦ S(X,Z)Y}`.
    pub fn ricci_v(&self) -> Vec<Jet> {
        let n = self.s.n;
        let mut out = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                let mut acc = self.s.at(&[a, 0, b, 0]).clone();
                for i in 1..n {
                    acc = acc + self.s.at(&[a, i, b, i]);
                }
                out.push(acc);
            }
        }
        out
    }

    /// `Sc = gᵃᵇ Ric_ab`.
    pub fn scalar_v(&self, geo: &LocalGeometry) -> Jet {
        let ric = self.ricci_v();
        let mut acc = &geo.ginv[0] * &ric[0];
        for k in 1..ric.len() {
            acc = acc + &geo.ginv[k] * &ric[k];
        }
        acc
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvatureData {
    /// Lowered `R(X,Y,Z,W)`, row-major over `(X,Y,Z,W)`.
    pub r: Vec<f64>,
    pub p: Vec<f64>,
    pub s: Vec<f64>,
    /// `R̂(X,Y)` with the output index last.
    pub rhat: Vec<f64>,
    pub phat: Vec<f64>,
    pub shat: Vec<f64>,
    pub ric_v: Vec<f64>,
    pub sc_v: f64,
    pub at: JetPoint,
}

impl CurvatureData {
    pub fn from_local(geo: &LocalGeometry) -> CurvatureData {
        let cj = CurvatureJets::new(geo);
        CurvatureData {
            r: CurvatureJets::lowered(&cj.r, geo).values(),
            p: CurvatureJets::lowered(&cj.p, geo).values(),
            s: CurvatureJets::lowered(&cj.s, geo).values(),
            rhat: cj.rhat(geo).values(),
            phat: cj.phat(geo).values(),
            shat: cj.shat(geo).values(),
            ric_v: cj.ricci_v().iter().map(Jet::value).collect(),
            sc_v: cj.scalar_v(geo).value(),
            at: geo.point.clone(),
        }
    }
}

pub fn curvatures(m: &MetricModel, p: &JetPoint) -> Result<CurvatureData> {
    Ok(CurvatureData::from_local(&LocalGeometry::new(m, p, 4)?))
}

/// Identity names in report order.
pub const IDENTITIES: [&str; 10] = [
    "g(P(X,Y)Z,Z) = 0",
    "P^ = h-derivative of T along eta",
    "P(X,eta)Z = 0",
    "g(R(X,Y)Z,Z) = 0",
    "R antisymmetric in last two slots",
    "v-derivative of R along eta = 0",
    "P expansion in h-derivative of T and P^",
    "T(X,eta) = 0",
    "S^ = 0",
    "h-derivative of T totally symmetric",
];

/// Residuals of every identity at one point. Needs an expansion of order 5.
pub fn identity_residuals(geo: &LocalGeometry) -> Residuals {
    assert!(geo.order >= 5, "identity battery needs a fifth-order expansion");
    let n = geo.n;
    let cj = CurvatureJets::new(geo);
    let mut out = Residuals::new();
    let r_low = CurvatureJets::lowered(&cj.r, geo).values();
    let p_low = CurvatureJets::lowered(&cj.p, geo).values();
    let i4 = |a: usize, b: usize, c: usize, d: usize| ((a * n + b) * n + c) * n + d;

    let mut pzz = Vec::new();
    let mut rzz = Vec::new();
    let mut ranti_l = Vec::new();
    let mut ranti_r = Vec::new();
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                pzz.push(p_low[i4(a, b, c, c)]);
                rzz.push(r_low[i4(a, b, c, c)]);
                for d in c + 1..n {
                    // polarized: Z = ∂̄_c + ∂̄_d
                    let q = |t: &[f64]| t[i4(a, b, c, c)] + t[i4(a, b, c, d)] + t[i4(a, b, d, c)] + t[i4(a, b, d, d)];
                    pzz.push(q(&p_low));
                    rzz.push(q(&r_low));
                }
                for d in 0..n {
                    ranti_l.push(r_low[i4(a, b, c, d)]);
                    ranti_r.push(-r_low[i4(a, b, d, c)]);
                }
            }
        }
    }
    out.zero(IDENTITIES[0], &pzz);

    let phat = cj.phat(geo);
    let ht = geo.cov_derive(&geo.cartan_map(), Direction::Horizontal, Connection::Cartan);
    let ht_eta = ht.contract(3, &geo.ys);
    out.compare(IDENTITIES[1], &phat.values(), &ht_eta.values());

    out.zero(IDENTITIES[2], &cj.p.contract(1, &geo.ys).values());
    out.zero(IDENTITIES[3], &rzz);
    out.compare(IDENTITIES[4], &ranti_l, &ranti_r);

    let vr = geo.cov_derive(&cj.r, Direction::Vertical, Connection::Cartan);
    out.zero(IDENTITIES[5], &vr.contract(4, &geo.ys).values());

    // P(X,Y,Z,W) = ∇T(Y,X,W;Z) − ∇T(Y,X,Z;W) − T(X,W,P̂(Z,Y)) + T(X,Z,P̂(W,Y))
    let ht_low = geo
        .cov_derive(&geo.cartan_tensor(), Direction::Horizontal, Connection::Cartan)
        .values();
    let phat_v = phat.values();
    let t = |a: usize, b: usize, c: usize| geo.cartan[(a * n + b) * n + c].value();
    let ph = |a: usize, b: usize, i: usize| phat_v[(a * n + b) * n + i];
    let mut rhs = Vec::with_capacity(n.pow(4));
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                for w in 0..n {
                    let mut v = ht_low[i4(y, x, w, z)] - ht_low[i4(y, x, z, w)];
                    for m in 0..n {
                        v += -t(x, w, m) * ph(z, y, m) + t(x, z, m) * ph(w, y, m);
                    }
                    rhs.push(v);
                }
            }
        }
    }
    out.compare(IDENTITIES[6], &p_low, &rhs);

    out.zero(IDENTITIES[7], &geo.cartan_tensor().contract(2, &geo.ys).values());
    out.zero(IDENTITIES[8], &cj.shat(geo).values());

    let mut sym_l = Vec::new();
    let mut sym_r = Vec::new();
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for k in 0..n {
                    sym_l.push(ht_low[i4(a, b, c, k)]);
                    sym_r.push(ht_low[i4(a, c, b, k)]);
                    sym_l.push(ht_low[i4(a, b, c, k)]);
                    sym_r.push(ht_low[i4(b, a, c, k)]);
                }
            }
        }
    }
    out.compare(IDENTITIES[9], &sym_l, &sym_r);
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub points: usize,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl IdentityReport {
    pub fn residual(&self, name: &str) -> Option<f64> {
        self.checks.iter().find(|c| c.name == name).map(|c| c.residual)
    }

    pub fn max_residual(&self) -> f64 {
        self.checks.iter().fold(0.0, |m, c| m.max(c.residual))
    }
}

pub fn identity_battery(m: &MetricModel, corpus: &[JetPoint], tol: &Tolerance) -> Result<IdentityReport> {
    identity_battery_with(m, corpus, tol, |_| {})
}

/// As [`identity_battery`], with `tamper` applied to every local expansion
/// before the identities are evaluated.
pub fn identity_battery_with(
    m: &MetricModel,
    corpus: &[JetPoint],
    tol: &Tolerance,
    tamper: impl Fn(&mut LocalGeometry) + Sync,
) -> Result<IdentityReport> {
    let per_point = corpus
        .par_iter()
        .map(|p| {
            let mut geo = LocalGeometry::new(m, p, 5)?;
            tamper(&mut geo);
            Ok(identity_residuals(&geo))
        })
        .collect::<Result<Vec<_>>>()?;
    let total = per_point
        .into_iter()
        .fold(Residuals::new(), Residuals::merge);
    let checks = total.into_checks(tol);
    Ok(IdentityReport {
        points: corpus.len(),
        pass: checks.iter().all(|c| c.pass),
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::max_abs;

    fn randers3() -> MetricModel {
        MetricModel::randers(3, None, &["0.3 + 0.1*x2", "0.1*sin(x3)", "0.05*x1*x2"]).unwrap()
    }

    #[test]
    fn euclidean_curvature_vanishes() {
        let m = MetricModel::euclidean(3).unwrap();
        let p = m.sample_corpus(1, 1).unwrap().remove(0);
        let c = curvatures(&m, &p).unwrap();
        assert_eq!(max_abs(&c.r), 0.0);
        assert_eq!(max_abs(&c.p), 0.0);
        assert_eq!(max_abs(&c.s), 0.0);
    }

    #[test]
    fn s_has_both_antisymmetries_on_randers() {
        let m = randers3();
        let n = 3;
        for p in m.sample_corpus(5, 2).unwrap() {
            let c = curvatures(&m, &p).unwrap();
            assert!(max_abs(&c.s) > 1e-4);
            for a in 0..n {
                for b in 0..n {
                    for cc in 0..n {
                        for d in 0..n {
                            let s = |a: usize, b: usize, e: usize, d: usize| c_at(&c.s, n, a, b, e, d);
                            assert!((s(a, b, cc, d) + s(b, a, cc, d)).abs() < 1e-9);
                            assert!((s(a, b, cc, d) + s(a, b, d, cc)).abs() < 1e-9);
                        }
                    }
                }
            }
        }
    }

    fn c_at(t: &[f64], n: usize, a: usize, b: usize, c: usize, d: usize) -> f64 {
        t[((a * n + b) * n + c) * n + d]
    }

    #[test]
    fn battery_passes_on_randers() {
        let m = randers3();
        let corpus = m.sample_corpus(8, 3).unwrap();
        let report = identity_battery(&m, &corpus, &Tolerance::default()).unwrap();
        assert!(report.pass, "{report:#?}");
        assert!(report.max_residual() < 1e-8);
    }

    #[test]
    fn corrupted_horizontal_coefficients_break_the_battery() {
        let m = randers3();
        let corpus = m.sample_corpus(4, 3).unwrap();
        let report = identity_battery_with(&m, &corpus, &Tolerance::default(), |geo| {
            let bump = geo.constant(0.05);
            geo.cartan_h[1] = &geo.cartan_h[1] + &bump;
            geo.cartan_h[3] = &geo.cartan_h[3] + &bump;
        })
        .unwrap();
        assert!(!report.pass);
        assert!(report.residual(IDENTITIES[1]).unwrap() > 1e-2, "{report:#?}");
    }
}
