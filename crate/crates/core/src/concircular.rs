//! Concircular π-vector fields: `∇_{βX}ζ = α(X)ζ + ψX` and `∇_{γX}ζ = 0`.
//!
//! `(α, ψ)` are fitted per point by least squares over the `n²` equations
//! `(h∇ζ)ⁱₖ = αₖζⁱ + ψδⁱₖ`. The fit has the closed form
//! `ψ = (tr H − ζ·w/|ζ|²)/(n−1)`, `αₖ = (wₖ − ψζᵏ)/|ζ|²` with `wₖ = ζⁱHⁱₖ`,
//! and is evaluated on jets, so `μ = dψ(β·)` and `∇α` come out exactly.

use rayon::prelude::*;
use serde::Serialize;

use crate::check::{Check, Residuals, Tolerance};
use crate::connection::TensorField;
use crate::curvature::CurvatureJets;
use crate::diffcore::{Jet, Scalar};
use crate::error::{FinslerError, Result};
use crate::local::{Connection, Direction, LocalGeometry};
use crate::metric::{JetPoint, MetricModel};
use crate::tensor::{max_abs, JetTensor, Variance};

/// Default floor on `|ψ|`.
pub const PSI_MIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateField {
    pub name: String,
    field: TensorField,
    pub declared_y_independent: bool,
}

impl CandidateField {
    pub fn new(name: &str, n: usize, components: &[&str], declared_y_independent: bool) -> Result<CandidateField> {
        Ok(CandidateField {
            name: name.to_string(),
            field: TensorField::vector(n, components)?,
            declared_y_independent,
        })
    }

    pub fn from_field(name: &str, field: TensorField, declared_y_independent: bool) -> Result<CandidateField> {
        if field.slots() != [Variance::Contravariant] {
            return Err(FinslerError::InvalidArgument(format!(
                "candidate `{name}` must be a π-vector field"
            )));
        }
        Ok(CandidateField {
            name: name.to_string(),
            field,
            declared_y_independent,
        })
    }

    pub fn n(&self) -> usize {
        self.field.n()
    }

    pub fn field(&self) -> &TensorField {
        &self.field
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitVerdict {
    Concircular,
    NotConcircular,
    /// `ζ` vanished at some sample, so `(α, ψ)` are not determined there.
    Indeterminate,
}

/// Fitted quantities as jets.
#[derive(Debug, Clone)]
pub struct FitJets {
    pub zeta: JetTensor,
    pub alpha: Vec<Jet>,
    pub psi: Jet,
    pub residual_h: f64,
    pub scale_h: f64,
    pub residual_v: f64,
    pub degenerate: bool,
}

/// Least-squares fit of `(α, ψ)` with the given connection. The vertical
/// residual uses the vertical derivative of the same connection.
pub fn fit_jets(geo: &LocalGeometry, zeta: &JetTensor, conn: Connection) -> FitJets {
    let n = geo.n;
    let h = geo.cov_derive(zeta, Direction::Horizontal, conn);
    let v = geo.cov_derive(zeta, Direction::Vertical, conn);
    let z = &zeta.comps;
    let order = h.order();
    let z2 = z.iter().fold(geo.zero(order), |acc, c| acc + c * c);
    let h_vals = h.values();
    let scale_h = max_abs(&h_vals);
    let residual_v = max_abs(&v.values());
    if !(z2.value() > 1e-24) {
        return FitJets {
            zeta: zeta.clone(),
            alpha: vec![geo.zero(order); n],
            psi: geo.zero(order),
            residual_h: f64::INFINITY,
            scale_h,
            residual_v,
            degenerate: true,
        };
    }
    let inv_z2 = z2.recip();
    let w: Vec<Jet> = (0..n)
        .map(|k| (0..n).fold(geo.zero(order), |acc, i| acc + &z[i] * &h.comps[i * n + k]))
        .collect();
    let trace = (0..n).fold(geo.zero(order), |acc, i| acc + &h.comps[i * n + i]);
    let zw = (0..n).fold(geo.zero(order), |acc, k| acc + &z[k] * &w[k]);
    let psi = (trace - zw * &inv_z2).scale(1.0 / (n as f64 - 1.0));
    let alpha: Vec<Jet> = (0..n).map(|k| (&w[k] - &z[k] * &psi) * &inv_z2).collect();
    let mut residual_h: f64 = 0.0;
    for i in 0..n {
        for k in 0..n {
            let mut model = alpha[k].value() * z[i].value();
            if i == k {
                model += psi.value();
            }
            residual_h = residual_h.max((h_vals[i * n + k] - model).abs());
        }
    }
    FitJets {
        zeta: zeta.clone(),
        alpha,
        psi,
        residual_h,
        scale_h,
        residual_v,
        degenerate: false,
    }
}

/// Derived scalars and forms at one sample.
#[derive(Debug, Clone, Serialize)]
pub struct ConcircularData {
    pub at: JetPoint,
    pub zeta: Vec<f64>,
    pub alpha_hat: Vec<f64>,
    pub psi_hat: f64,
    /// `μ(X) = dψ(βX)`.
    pub mu_form: Vec<f64>,
    /// `A = μ − ψα`.
    pub a_form: Vec<f64>,
    /// `(∇_{βY}A)(X)` at `[x*n + y]`.
    pub h_a_form: Vec<f64>,
    /// `ω = i_ζ g`.
    pub omega: Vec<f64>,
    /// `B = g(ζ, η)`.
    pub b: f64,
    /// `m = ζ − (B/L²)η`.
    pub m_field: Vec<f64>,
    /// `⟨A, ω⟩/⟨ω, ω⟩`, the best scalar with `A ≈ λω`; `None` when `ω ≈ 0`.
    pub lambda: Option<f64>,
    pub residual_h: f64,
    pub residual_v: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BerwaldRefit {
    pub fit_h: Check,
    pub fit_v: Check,
    pub verdict: FitVerdict,
    /// Largest difference between the Berwald and Cartan `(α, ψ)`.
    pub max_fit_difference: f64,
    pub agrees: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConcircularReport {
    pub candidate: String,
    pub points: usize,
    pub verdict: FitVerdict,
    pub concircular: bool,
    pub concurrent: bool,
    pub fit_h: Check,
    pub fit_v: Check,
    pub psi_min: f64,
    pub min_abs_psi: f64,
    pub max_abs_psi_plus_one: f64,
    pub max_abs_alpha: f64,
    pub degenerate_points: usize,
    pub declared_y_independent: bool,
    /// `max|∂̇ζ|` over the corpus.
    pub max_y_derivative: f64,
    pub berwald: BerwaldRefit,
    pub samples: Vec<ConcircularData>,
}

/// Smallest value of a quantity that must stay away from zero.
#[derive(Debug, Clone, Serialize)]
pub struct NonZeroCheck {
    pub name: String,
    pub min_abs: f64,
    pub floor: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsequenceReport {
    pub candidate: String,
    /// Whether the fit accepted the candidate; the battery is informative only then.
    pub applicable: bool,
    pub checks: Vec<Check>,
    pub nonzero: Vec<NonZeroCheck>,
    /// Specializations for concurrent fields, present only for concurrent candidates.
    pub concurrent_checks: Option<Vec<Check>>,
    pub pass: bool,
}

impl ConsequenceReport {
    pub fn residual(&self, name: &str) -> Option<f64> {
        self.checks
            .iter()
            .chain(self.concurrent_checks.iter().flatten())
            .find(|c| c.name == name)
            .map(|c| c.residual)
    }

    pub fn max_residual(&self) -> f64 {
        self.checks
            .iter()
            .chain(self.concurrent_checks.iter().flatten())
            .fold(0.0, |m, c| m.max(c.residual))
    }
}

struct PointOutcome {
    data: ConcircularData,
    fit_scale: f64,
    degenerate: bool,
    dy_zeta: f64,
    berwald_h: f64,
    berwald_scale: f64,
    berwald_v: f64,
    berwald_degenerate: bool,
    fit_difference: f64,
    battery: Option<(Residuals, Residuals, Vec<(String, f64)>)>,
}

fn analyze_point(m: &MetricModel, cand: &CandidateField, p: &JetPoint, battery: bool) -> Result<PointOutcome> {
    let geo = LocalGeometry::new(m, p, 5)?;
    analyze_local(&geo, cand, battery)
}

fn analyze_local(geo: &LocalGeometry, cand: &CandidateField, battery: bool) -> Result<PointOutcome> {
    let n = geo.n;
    let zeta = cand.field.jets(geo)?;
    let fit = fit_jets(geo, &zeta, Connection::Cartan);
    let bfit = fit_jets(geo, &zeta, Connection::Berwald);

    let z: Vec<f64> = zeta.values();
    let alpha: Vec<f64> = fit.alpha.iter().map(Jet::value).collect();
    let psi = fit.psi.value();
    let mu_j: Vec<Jet> = (0..n).map(|k| geo.delta(&fit.psi, k)).collect();
    let a_j: Vec<Jet> = (0..n).map(|k| &mu_j[k] - &fit.psi * &fit.alpha[k]).collect();
    let mu: Vec<f64> = mu_j.iter().map(Jet::value).collect();
    let a: Vec<f64> = a_j.iter().map(Jet::value).collect();
    let a_t = JetTensor::new(n, vec![Variance::Covariant], a_j.clone());
    let h_a = geo.cov_derive(&a_t, Direction::Horizontal, Connection::Cartan).values();
    let omega_j = geo.lower(&zeta.comps);
    let omega: Vec<f64> = omega_j.iter().map(Jet::value).collect();
    let gv: Vec<f64> = geo.g.iter().map(Jet::value).collect();
    let y = &geo.point.y;
    let b: f64 = (0..n).map(|i| omega[i] * y[i]).sum();
    let l2 = geo.lsq.value();
    let m_field: Vec<f64> = (0..n).map(|i| z[i] - b / l2 * y[i]).collect();
    let ww: f64 = (0..n)
        .map(|i| (0..n).map(|j| omega[i] * geo.ginv[i * n + j].value() * omega[j]).sum::<f64>())
        .sum();
    let aw: f64 = (0..n)
        .map(|i| (0..n).map(|j| a[i] * geo.ginv[i * n + j].value() * omega[j]).sum::<f64>())
        .sum();
    let lambda = if ww > 1e-20 { Some(aw / ww) } else { None };
    let dy_zeta = (0..n)
        .flat_map(|i| (0..n).map(move |k| (i, k)))
        .fold(0.0f64, |mx, (i, k)| mx.max(geo.dot(&zeta.comps[i], k).value().abs()));

    let bal: Vec<f64> = bfit.alpha.iter().map(Jet::value).collect();
    let fit_difference = alpha
        .iter()
        .zip(&bal)
        .fold((psi - bfit.psi.value()).abs(), |mx, (x, w)| mx.max((x - w).abs()));

    let battery = if battery && !fit.degenerate {
        let ctx = Ctx {
            geo,
            n,
            z: &z,
            alpha: &alpha,
            psi,
            mu: &mu,
            a: &a,
            gv: &gv,
            omega: &omega,
        };
        Some(ctx.battery(&fit, &zeta, &mu_j, &omega_j, &m_field, b))
    } else {
        None
    };

    Ok(PointOutcome {
        data: ConcircularData {
            at: geo.point.clone(),
            zeta: z,
            alpha_hat: alpha,
            psi_hat: psi,
            mu_form: mu,
            a_form: a,
            h_a_form: h_a,
            omega,
            b,
            m_field,
            lambda,
            residual_h: fit.residual_h,
            residual_v: fit.residual_v,
        },
        fit_scale: fit.scale_h,
        degenerate: fit.degenerate,
        dy_zeta,
        berwald_h: bfit.residual_h,
        berwald_scale: bfit.scale_h,
        berwald_v: bfit.residual_v,
        berwald_degenerate: bfit.degenerate,
        fit_difference,
        battery,
    })
}

struct Ctx<'a> {
    geo: &'a LocalGeometry,
    n: usize,
    z: &'a [f64],
    alpha: &'a [f64],
    psi: f64,
    mu: &'a [f64],
    a: &'a [f64],
    gv: &'a [f64],
    omega: &'a [f64],
}

fn delta(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        0.0
    }
}

impl Ctx<'_> {
    /// `Σ_c t[.., c, ..] ζᶜ` over `slot` of a value array of the given rank.
    fn with_zeta(&self, t: &[f64], rank: usize, slot: usize) -> Vec<f64> {
        let n = self.n;
        let inner = n.pow((rank - slot - 1) as u32);
        let outer = t.len() / (inner * n);
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for c in 0..n {
                for r in 0..inner {
                    out[o * inner + r] += t[(o * n + c) * inner + r] * self.z[c];
                }
            }
        }
        out
    }

    fn tabulate(&self, rank: usize, f: impl Fn(&[usize]) -> f64) -> Vec<f64> {
        crate::tensor::MultiIndexIter::new(self.n, rank).map(|idx| f(&idx)).collect()
    }

    fn battery(
        &self,
        fit: &FitJets,
        zeta: &JetTensor,
        mu_j: &[Jet],
        omega_j: &[Jet],
        m_field: &[f64],
        b: f64,
    ) -> (Residuals, Residuals, Vec<(String, f64)>) {
        let geo = self.geo;
        let n = self.n;
        let (z, alpha, psi, mu, a, gv) = (self.z, self.alpha, self.psi, self.mu, self.a, self.gv);
        let cj = CurvatureJets::new(geo);
        let h = |t: &JetTensor| geo.cov_derive(t, Direction::Horizontal, Connection::Cartan).values();
        let v = |t: &JetTensor| geo.cov_derive(t, Direction::Vertical, Connection::Cartan).values();
        let s = cj.s.values();
        let p = cj.p.values();
        let r = cj.r.values();
        let s_low = CurvatureJets::lowered(&cj.s, geo).values();
        let p_low = CurvatureJets::lowered(&cj.p, geo).values();
        let r_low = CurvatureJets::lowered(&cj.r, geo).values();
        let (hs, vs, hp, vp, hr, vr) = (h(&cj.s), v(&cj.s), h(&cj.p), v(&cj.p), h(&cj.r), v(&cj.r));
        let t_map = geo.cartan_map();
        let t = t_map.values();
        let t_low: Vec<f64> = geo.cartan.iter().map(Jet::value).collect();
        let ht = h(&t_map);
        let vt = v(&t_map);
        let phat = cj.phat(geo).values();
        let cov = |c: &[Jet]| JetTensor::new(n, vec![Variance::Covariant], c.to_vec());
        let h_mu = h(&cov(mu_j));
        let h_alpha = h(&cov(&fit.alpha));
        let h_omega = h(&cov(omega_j));
        let v_omega = v(&cov(omega_j));

        let i3 = |a: usize, b: usize, c: usize| (a * n + b) * n + c;
        let i4 = |a: usize, b: usize, c: usize, d: usize| ((a * n + b) * n + c) * n + d;
        let dotn = |u: &[f64], w: &[f64]| u.iter().zip(w).map(|(x, y)| x * y).sum::<f64>();
        let a_zeta = dotn(a, z);
        let mu_zeta = dotn(mu, z);
        let alpha_zeta = dotn(alpha, z);

        let mut out = Residuals::new();
        // curvature S
        out.zero("S(X,Y)zeta = 0", &self.with_zeta(&s, 4, 2));
        out.zero("S(X,Y,Z,zeta) = 0", &self.with_zeta(&s_low, 4, 3));
        let vs_z = self.with_zeta(&vs, 5, 2);
        out.zero("v-derivative of S(X,Y)zeta = 0", &vs_z);
        let hs_z = self.with_zeta(&hs, 5, 2);
        let rhs = self.tabulate(4, |ix| -psi * s[i4(ix[0], ix[1], ix[3], ix[2])]);
        out.compare("h-derivative of S(X,Y)zeta = -psi S(X,Y)Z", &hs_z, &rhs);
        out.zero("h-derivative along zeta of S(X,Y)zeta = 0", &self.with_zeta(&hs_z, 4, 3));
        // curvature P
        let p_z = self.with_zeta(&p, 4, 2);
        let rhs: Vec<f64> = t.iter().map(|v| psi * v).collect();
        out.compare("P(X,Y)zeta = psi T(X,Y)", &p_z, &rhs);
        let rhs: Vec<f64> = t_low.iter().map(|v| -psi * v).collect();
        out.compare("P(X,Y,Z,zeta) = -psi T(X,Y,Z)", &self.with_zeta(&p_low, 4, 3), &rhs);
        let vp_z = self.with_zeta(&vp, 5, 2);
        let rhs: Vec<f64> = vt.iter().map(|v| psi * v).collect();
        out.compare("v-derivative of P(X,Y)zeta = psi v-derivative of T", &vp_z, &rhs);
        let hp_z = self.with_zeta(&hp, 5, 2);
        let rhs = self.tabulate(4, |ix| {
            let (x, yy, i, k) = (ix[0], ix[1], ix[2], ix[3]);
            a[k] * t[i3(x, yy, i)] + psi * ht[i4(x, yy, i, k)] - psi * p[i4(x, yy, k, i)]
        });
        out.compare("h-derivative of P(X,Y)zeta", &hp_z, &rhs);
        let ht_z = self.with_zeta(&ht, 4, 3);
        let rhs: Vec<f64> = (0..t.len())
            .map(|k| (a_zeta - psi * psi) * t[k] + psi * ht_z[k])
            .collect();
        out.compare("h-derivative along zeta of P(X,Y)zeta", &self.with_zeta(&hp_z, 4, 3), &rhs);
        // curvature R
        let r_z = self.with_zeta(&r, 4, 2);
        let rhs = self.tabulate(3, |ix| a[ix[1]] * delta(ix[2], ix[0]) - a[ix[0]] * delta(ix[2], ix[1]));
        out.compare("R(X,Y)zeta = A(Y)X - A(X)Y", &r_z, &rhs);
        let rhs = self.tabulate(3, |ix| a[ix[0]] * gv[ix[1] * n + ix[2]] - a[ix[1]] * gv[ix[0] * n + ix[2]]);
        out.compare("R(X,Y,Z,zeta) = A(X)g(Y,Z) - A(Y)g(X,Z)", &self.with_zeta(&r_low, 4, 3), &rhs);
        // as printed: [μ(T(Z,Y)) − α(T(Z,Y))]X alternated
        let mt = |zz: usize, yy: usize| -> f64 {
            (0..n).map(|m| (mu[m] - alpha[m]) * t[i3(zz, yy, m)]).sum()
        };
        let rhs = self.tabulate(4, |ix| {
            let (x, yy, i, k) = (ix[0], ix[1], ix[2], ix[3]);
            mt(k, yy) * delta(i, x) - mt(k, x) * delta(i, yy)
        });
        out.compare("v-derivative of R(X,Y)zeta", &self.with_zeta(&vr, 5, 2), &rhs);
        let q = |k: usize, yy: usize| {
            h_mu[yy * n + k] - psi * h_alpha[yy * n + k] + psi * alpha[k] * alpha[yy]
                - mu[k] * alpha[yy]
                - alpha[k] * mu[yy]
        };
        let hr_z = self.with_zeta(&hr, 5, 2);
        let rhs = self.tabulate(4, |ix| {
            let (x, yy, i, k) = (ix[0], ix[1], ix[2], ix[3]);
            q(k, yy) * delta(i, x) - q(k, x) * delta(i, yy) - psi * r[i4(x, yy, k, i)]
        });
        out.compare("h-derivative of R(X,Y)zeta", &hr_z, &rhs);
        let h_mu_z = self.with_zeta(&h_mu, 2, 1);
        let h_alpha_z = self.with_zeta(&h_alpha, 2, 1);
        let q2 = |yy: usize| {
            h_mu_z[yy] - psi * h_alpha_z[yy] - (mu_zeta * alpha[yy] + alpha_zeta * mu[yy])
                + psi * alpha_zeta * alpha[yy]
                - psi * mu[yy]
                + psi * psi * alpha[yy]
        };
        let rhs = self.tabulate(3, |ix| q2(ix[1]) * delta(ix[2], ix[0]) - q2(ix[0]) * delta(ix[2], ix[1]));
        out.compare("h-derivative along zeta of R(X,Y)zeta", &self.with_zeta(&hr_z, 4, 3), &rhs);

        // ω
        let rhs = self.tabulate(2, |ix| alpha[ix[1]] * self.omega[ix[0]] + psi * gv[ix[1] * n + ix[0]]);
        out.compare("h-derivative of omega", &h_omega, &rhs);
        out.zero("v-derivative of omega = 0", &v_omega);

        // T, P̂, P against ζ
        let mut tz = self.with_zeta(&t, 3, 1);
        tz.extend(self.with_zeta(&t, 3, 0));
        out.zero("T(X,zeta) = T(zeta,X) = 0", &tz);
        let mut pz = self.with_zeta(&phat, 3, 1);
        pz.extend(self.with_zeta(&phat, 3, 0));
        out.zero("P^(X,zeta) = P^(zeta,X) = 0", &pz);
        let mut pxz = self.with_zeta(&p, 4, 1);
        pxz.extend(self.with_zeta(&p, 4, 0));
        out.zero("P(X,zeta)Y = P(zeta,X)Y = 0", &pxz);
        let alt = self.tabulate(2, |ix| a[ix[1]] * self.omega[ix[0]] - a[ix[0]] * self.omega[ix[1]]);
        out.zero("A(Y)omega(X) - A(X)omega(Y) = 0", &alt);
        let lhs = self.tabulate(2, |ix| (0..n).map(|m| mu[m] * t[i3(ix[0], ix[1], m)]).sum());
        let rhs = self.tabulate(2, |ix| (0..n).map(|m| psi * alpha[m] * t[i3(ix[0], ix[1], m)]).sum());
        out.compare("mu(T(X,Y)) = psi alpha(T(X,Y))", &lhs, &rhs);

        // y-independence
        let dz: Vec<f64> = (0..n)
            .flat_map(|i| (0..n).map(move |k| (i, k)))
            .map(|(i, k)| geo.dot(&zeta.comps[i], k).value())
            .collect();
        out.zero("y-derivative of zeta = 0", &dz);
        let dw: Vec<f64> = (0..n)
            .flat_map(|i| (0..n).map(move |k| (i, k)))
            .map(|(i, k)| geo.dot(&omega_j[i], k).value())
            .collect();
        out.zero("y-derivative of omega = 0", &dw);

        // ζ split along and across η
        let y = &geo.point.y;
        let g_of = |u: &[f64], w: &[f64]| -> f64 {
            (0..n).map(|i| (0..n).map(|j| gv[i * n + j] * u[i] * w[j]).sum::<f64>()).sum()
        };
        out.zero("g(m,eta) = 0", &[g_of(m_field, y)]);
        out.compare("g(m,zeta) = g(m,m)", &[g_of(m_field, z)], &[g_of(m_field, m_field)]);
        let l2 = geo.lsq.value();
        let hbar_zz = g_of(z, z) - b * b / l2;
        let nonzero = vec![
            ("|zeta|".to_string(), g_of(z, z).sqrt()),
            ("B = g(zeta,eta)".to_string(), b),
            ("|m|".to_string(), g_of(m_field, m_field).sqrt()),
            ("g(m,zeta)".to_string(), g_of(m_field, z)),
            ("hbar(zeta,zeta)".to_string(), hbar_zz),
        ];

        // concurrent specializations: ψ = −1, α = 0, μ = 0
        let mut conc = Residuals::new();
        let rhs = self.tabulate(4, |ix| s[i4(ix[0], ix[1], ix[3], ix[2])]);
        conc.compare("h-derivative of S(X,Y)zeta = S(X,Y)Z", &hs_z, &rhs);
        let rhs = self.tabulate(3, |ix| -t[i3(ix[1], ix[0], ix[2])]);
        conc.compare("P(X,Y)zeta = -T(Y,X)", &p_z, &rhs);
        conc.compare("P(X,Y,Z,zeta) = T(X,Y,Z)", &self.with_zeta(&p_low, 4, 3), &t_low);
        let rhs = self.tabulate(4, |ix| -vt[i4(ix[1], ix[0], ix[2], ix[3])]);
        conc.compare("v-derivative of P(X,Y)zeta", &vp_z, &rhs);
        let rhs = self.tabulate(4, |ix| {
            -ht[i4(ix[1], ix[0], ix[2], ix[3])] + p[i4(ix[0], ix[1], ix[3], ix[2])]
        });
        conc.compare("h-derivative of P(X,Y)zeta", &hp_z, &rhs);
        let rhs = self.tabulate(3, |ix| {
            -ht_z[i3(ix[1], ix[0], ix[2])] - t[i3(ix[1], ix[0], ix[2])]
        });
        conc.compare("h-derivative along zeta of P(X,Y)zeta", &self.with_zeta(&hp_z, 4, 3), &rhs);
        conc.zero("R(X,Y)zeta = 0", &r_z);
        conc.zero("v-derivative of R(X,Y)zeta = 0", &self.with_zeta(&vr, 5, 2));
        let rhs = self.tabulate(4, |ix| r[i4(ix[0], ix[1], ix[3], ix[2])]);
        conc.compare("h-derivative of R(X,Y)zeta = R(X,Y)Z", &hr_z, &rhs);
        conc.zero("h-derivative along zeta of R(X,Y)zeta = 0", &self.with_zeta(&hr_z, 4, 3));

        (out, conc, nonzero)
    }
}

fn aggregate_fit(outcomes: &[PointOutcome], cand: &CandidateField, tol: &Tolerance, psi_min: f64) -> ConcircularReport {
    let mut fit_h = (0.0f64, 0.0f64);
    let mut fit_v = 0.0f64;
    let mut bh = (0.0f64, 0.0f64);
    let mut bv = 0.0f64;
    let mut min_psi = f64::INFINITY;
    let mut psi_dev = 0.0f64;
    let mut max_alpha = 0.0f64;
    let mut degenerate = 0;
    let mut b_degenerate = 0;
    let mut dy = 0.0f64;
    let mut diff = 0.0f64;
    for o in outcomes {
        if o.degenerate {
            degenerate += 1;
        } else {
            fit_h = (fit_h.0.max(o.data.residual_h), fit_h.1.max(o.fit_scale));
            min_psi = min_psi.min(o.data.psi_hat.abs());
            psi_dev = psi_dev.max((o.data.psi_hat + 1.0).abs());
            max_alpha = max_alpha.max(max_abs(&o.data.alpha_hat));
            diff = diff.max(o.fit_difference);
        }
        if o.berwald_degenerate {
            b_degenerate += 1;
        } else {
            bh = (bh.0.max(o.berwald_h), bh.1.max(o.berwald_scale));
        }
        fit_v = fit_v.max(o.data.residual_v);
        bv = bv.max(o.berwald_v);
        dy = dy.max(o.dy_zeta);
    }
    let fit_h = Check::new("h-derivative fit", fit_h.0, fit_h.1, tol);
    let fit_v = Check::new("v-derivative", fit_v, 0.0, tol);
    let verdict = |h: &Check, v: &Check, degenerate: usize| {
        if !(h.pass && v.pass) && h.residual.is_finite() {
            FitVerdict::NotConcircular
        } else if degenerate > 0 {
            FitVerdict::Indeterminate
        } else if h.pass && v.pass && min_psi > psi_min {
            FitVerdict::Concircular
        } else {
            FitVerdict::NotConcircular
        }
    };
    let cartan_verdict = verdict(&fit_h, &fit_v, degenerate);
    let b_fit_h = Check::new("Berwald h-derivative fit", bh.0, bh.1, tol);
    let b_fit_v = Check::new("Berwald v-derivative", bv, 0.0, tol);
    let berwald_verdict = verdict(&b_fit_h, &b_fit_v, b_degenerate);
    let concircular = cartan_verdict == FitVerdict::Concircular;
    let one = tol.threshold(1.0);
    ConcircularReport {
        candidate: cand.name.clone(),
        points: outcomes.len(),
        verdict: cartan_verdict,
        concircular,
        concurrent: concircular && psi_dev < one && max_alpha < one,
        fit_h,
        fit_v,
        psi_min,
        min_abs_psi: if min_psi.is_finite() { min_psi } else { 0.0 },
        max_abs_psi_plus_one: psi_dev,
        max_abs_alpha: max_alpha,
        degenerate_points: degenerate,
        declared_y_independent: cand.declared_y_independent,
        max_y_derivative: dy,
        berwald: BerwaldRefit {
            fit_h: b_fit_h,
            fit_v: b_fit_v,
            verdict: berwald_verdict,
            max_fit_difference: diff,
            agrees: berwald_verdict == cartan_verdict,
        },
        samples: outcomes.iter().map(|o| o.data.clone()).collect(),
    }
}

fn check_candidate(m: &MetricModel, cand: &CandidateField, corpus: &[JetPoint]) -> Result<()> {
    if cand.n() != m.n() {
        return Err(FinslerError::Dimension(format!(
            "candidate `{}` has dimension {}, metric has {}",
            cand.name,
            cand.n(),
            m.n()
        )));
    }
    if corpus.is_empty() {
        return Err(FinslerError::InvalidArgument("empty corpus".into()));
    }
    Ok(())
}

pub fn fit_and_verify(
    m: &MetricModel,
    cand: &CandidateField,
    corpus: &[JetPoint],
    tol: &Tolerance,
    psi_min: f64,
) -> Result<ConcircularReport> {
    check_candidate(m, cand, corpus)?;
    let outcomes = corpus
        .par_iter()
        .map(|p| analyze_point(m, cand, p, false))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate_fit(&outcomes, cand, tol, psi_min))
}

/// Fit and consequence battery together, sharing one expansion per point.
pub fn fit_and_battery(
    m: &MetricModel,
    cand: &CandidateField,
    corpus: &[JetPoint],
    tol: &Tolerance,
    psi_min: f64,
) -> Result<(ConcircularReport, ConsequenceReport)> {
    check_candidate(m, cand, corpus)?;
    let outcomes = corpus
        .par_iter()
        .map(|p| analyze_point(m, cand, p, true))
        .collect::<Result<Vec<_>>>()?;
    let fit = aggregate_fit(&outcomes, cand, tol, psi_min);
    let mut main = Residuals::new();
    let mut conc = Residuals::new();
    let mut nonzero: Vec<(String, f64)> = Vec::new();
    for o in &outcomes {
        if let Some((r, c, nz)) = &o.battery {
            main = main.merge(r.clone());
            conc = conc.merge(c.clone());
            for (name, v) in nz {
                match nonzero.iter_mut().find(|e| &e.0 == name) {
                    Some(e) => e.1 = e.1.min(v.abs()),
                    None => nonzero.push((name.clone(), v.abs())),
                }
            }
        }
    }
    let floor = tol.threshold(1.0);
    let checks = main.into_checks(tol);
    let nonzero: Vec<NonZeroCheck> = nonzero
        .into_iter()
        .map(|(name, min_abs)| NonZeroCheck {
            name,
            min_abs,
            floor,
            pass: min_abs > floor,
        })
        .collect();
    let concurrent_checks = fit.concurrent.then(|| conc.into_checks(tol));
    let pass = checks.iter().all(|c| c.pass)
        && nonzero.iter().all(|c| c.pass)
        && concurrent_checks.iter().flatten().all(|c| c.pass);
    let battery = ConsequenceReport {
        candidate: cand.name.clone(),
        applicable: fit.concircular,
        checks,
        nonzero,
        concurrent_checks,
        pass,
    };
    Ok((fit, battery))
}

pub fn consequence_battery(
    m: &MetricModel,
    cand: &CandidateField,
    corpus: &[JetPoint],
    tol: &Tolerance,
) -> Result<ConsequenceReport> {
    Ok(fit_and_battery(m, cand, corpus, tol, PSI_MIN)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn euclid(n: usize) -> (MetricModel, Vec<JetPoint>) {
        let m = MetricModel::euclidean(n).unwrap();
        let c = m.sample_corpus(10, 1).unwrap();
        (m, c)
    }

    #[test]
    fn position_field_is_concurrent_up_to_sign() {
        let (m, corpus) = euclid(3);
        let tol = Tolerance::default();
        let neg = CandidateField::new("neg", 3, &["-x1", "-x2", "-x3"], true).unwrap();
        let r = fit_and_verify(&m, &neg, &corpus, &tol, PSI_MIN).unwrap();
        assert!(r.concircular && r.concurrent, "{r:#?}");
        assert!(r.max_abs_psi_plus_one < 1e-12 && r.max_abs_alpha < 1e-12);
        let pos = CandidateField::new("pos", 3, &["x1", "x2", "x3"], true).unwrap();
        let r = fit_and_verify(&m, &pos, &corpus, &tol, PSI_MIN).unwrap();
        assert!(r.concircular && !r.concurrent);
        assert!(r.samples.iter().all(|s| (s.psi_hat - 1.0).abs() < 1e-12));
    }

    #[test]
    fn constant_field_is_not_concircular() {
        let (m, corpus) = euclid(2);
        let c = CandidateField::new("c", 2, &["1", "0.5"], true).unwrap();
        let r = fit_and_verify(&m, &c, &corpus, &Tolerance::default(), PSI_MIN).unwrap();
        assert_eq!(r.verdict, FitVerdict::NotConcircular);
        assert!(r.min_abs_psi < 1e-12);
    }

    #[test]
    fn zero_field_is_indeterminate() {
        let (m, corpus) = euclid(2);
        let c = CandidateField::new("zero", 2, &["0", "0"], true).unwrap();
        let r = fit_and_verify(&m, &c, &corpus, &Tolerance::default(), PSI_MIN).unwrap();
        assert_eq!(r.verdict, FitVerdict::Indeterminate);
    }

    #[test]
    fn fit_recovers_exact_coefficients_on_flat_space() {
        // ζ = e^{x1}(x + c): h∇ζ = e^{x1}I + ζ ⊗ dx1, so α = dx1, ψ = e^{x1}
        let (m, corpus) = euclid(3);
        let c = CandidateField::new(
            "scaled",
            3,
            &["exp(x1)*(x1 + 2)", "exp(x1)*(x2 - 1)", "exp(x1)*(x3 + 0.5)"],
            true,
        )
        .unwrap();
        let r = fit_and_verify(&m, &c, &corpus, &Tolerance::default(), PSI_MIN).unwrap();
        assert!(r.concircular && !r.concurrent);
        for s in &r.samples {
            assert!((s.psi_hat - s.at.x[0].exp()).abs() < 1e-10);
            assert!((s.alpha_hat[0] - 1.0).abs() < 1e-10);
            assert!(s.alpha_hat[1].abs() < 1e-10 && s.alpha_hat[2].abs() < 1e-10);
            // μ = dψ = e^{x1} dx1
            assert!((s.mu_form[0] - s.at.x[0].exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn battery_is_trivial_on_euclidean() {
        let (m, corpus) = euclid(3);
        let c = CandidateField::new("neg", 3, &["-x1", "-x2", "-x3"], true).unwrap();
        let (fit, bat) = fit_and_battery(&m, &c, &corpus, &Tolerance::default(), PSI_MIN).unwrap();
        assert!(fit.concurrent && bat.applicable && bat.pass, "{bat:#?}");
        assert!(bat.max_residual() < 1e-12);
        assert!(bat.concurrent_checks.is_some());
    }
}
