//! Jets of every coordinate object at one point, built from a single Taylor
//! expansion of `L²` in `(x, y)`.
//!
//! An expansion of order `K` leaves `g` exact to order `K−2`, the spray to
//! `K−2`, `T`, `N` and `F` to `K−3`, and the Berwald coefficients to `K−4`.
//! Curvature needs `K = 4`; one further covariant derivative of curvature
//! needs `K = 5`.
//!
//! Coefficient arrays are row-major with the upper index first:
//! `cv[i][j][k] = Cⁱⱼₖ`, `nonlinear[i][j] = Nⁱⱼ`, `cartan_h[i][j][k] = Fⁱⱼₖ`,
//! `berwald[i][j][k] = Gⁱⱼₖ`, where `∇_{δₖ}∂̄ⱼ = Fⁱⱼₖ ∂̄ᵢ` and
//! `∇_{∂̇ₖ}∂̄ⱼ = Cⁱⱼₖ ∂̄ᵢ`.

use std::sync::Arc;

use serde::Serialize;

use crate::diffcore::{Jet, JetSpace, MAX_ORDER};
use crate::error::{FinslerError, Result};
use crate::metric::{JetPoint, MetricModel};
use crate::tensor::{flat_index, JetTensor, MultiIndexIter, Variance};

/// Which linear connection a covariant derivative uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connection {
    Cartan,
    Berwald,
}

/// Horizontal (`β`-lift, `δₖ`) or vertical (`γ`-lift, `∂̇ₖ`) direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone)]
pub struct LocalGeometry {
    pub n: usize,
    pub order: usize,
    pub point: JetPoint,
    pub space: Arc<JetSpace>,
    pub xs: Vec<Jet>,
    pub ys: Vec<Jet>,
    pub lsq: Jet,
    pub l: Jet,
    pub g: Vec<Jet>,
    pub ginv: Vec<Jet>,
    /// Lowered `T_ijk`.
    pub cartan: Vec<Jet>,
    pub cv: Vec<Jet>,
    pub spray: Vec<Jet>,
    pub nonlinear: Vec<Jet>,
    pub berwald: Vec<Jet>,
    pub cartan_h: Vec<Jet>,
}

impl LocalGeometry {
    pub fn new(m: &MetricModel, p: &JetPoint, order: usize) -> Result<LocalGeometry> {
        if order < 4 {
            return Err(FinslerError::OrderTooLow { order, min: 4 });
        }
        if order > MAX_ORDER {
            return Err(FinslerError::OrderTooHigh {
                order,
                max: MAX_ORDER,
            });
        }
        let n = m.n();
        if p.n() != n {
            return Err(FinslerError::Dimension(format!(
                "point has dimension {}, metric has {n}",
                p.n()
            )));
        }
        let vars = Jet::variables(&p.flat(), order);
        let space = vars[0].space().clone();
        let (xs, ys) = vars.split_at(n);
        let (xs, ys) = (xs.to_vec(), ys.to_vec());
        let lsq = m.lsq(&xs, &ys)?;
        let l = m.l(&xs, &ys)?;
        if !(l.value() > 0.0) || !lsq.coeffs().iter().all(|c| c.is_finite()) {
            return Err(FinslerError::Inadmissible(format!(
                "L = {} at x = {:?}, y = {:?}",
                l.value(),
                p.x,
                p.y
            )));
        }

        let dy = |f: &Jet, k: usize| f.derivative(n + k);
        let dx = |f: &Jet, k: usize| f.derivative(k);

        let half_lsq_y: Vec<Jet> = (0..n).map(|i| dy(&lsq, i)).collect();
        let mut g = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                g.push(dy(&half_lsq_y[i], j).scale(0.5));
            }
        }
        let ginv = invert(n, &g)?;

        let mut cartan = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    cartan.push(dy(&g[i * n + j], k).scale(0.5));
                }
            }
        }
        let cv = raise_first(n, &ginv, &cartan);

        // Gⁱ = ¼ gⁱˡ (∂²L²/∂yˡ∂xᵏ yᵏ − ∂L²/∂xˡ)
        let mut inner = Vec::with_capacity(n);
        for l_ in 0..n {
            let mut acc = dx(&lsq, l_).scale(-1.0);
            for k in 0..n {
                acc = acc + dx(&half_lsq_y[l_], k) * &ys[k];
            }
            inner.push(acc);
        }
        let spray: Vec<Jet> = (0..n)
            .map(|i| {
                let mut acc = &ginv[i * n] * &inner[0];
                for l_ in 1..n {
                    acc = acc + &ginv[i * n + l_] * &inner[l_];
                }
                acc.scale(0.25)
            })
            .collect();

        let mut nonlinear = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                nonlinear.push(dy(&spray[i], j));
            }
        }
        let mut berwald = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    berwald.push(dy(&nonlinear[i * n + j], k));
                }
            }
        }

        let mut geo = LocalGeometry {
            n,
            order,
            point: p.clone(),
            space,
            xs,
            ys,
            lsq,
            l,
            g,
            ginv,
            cartan,
            cv,
            spray,
            nonlinear,
            berwald,
            cartan_h: Vec::new(),
        };

        // Fⁱⱼₖ = ½ gⁱˡ (δⱼ g_lk + δₖ g_jl − δ_l g_jk)
        let dg: Vec<Vec<Jet>> = (0..n)
            .map(|a| geo.g.iter().map(|e| geo.delta(e, a)).collect())
            .collect();
        let mut lowered = Vec::with_capacity(n * n * n);
        for l_ in 0..n {
            for j in 0..n {
                for k in 0..n {
                    lowered.push(
                        (&dg[j][l_ * n + k] + &dg[k][j * n + l_] - &dg[l_][j * n + k]).scale(0.5),
                    );
                }
            }
        }
        geo.cartan_h = raise_first(n, &geo.ginv, &lowered);
        Ok(geo)
    }

    pub fn zero(&self, order: usize) -> Jet {
        Jet::constant(&self.space, order, 0.0)
    }

    pub fn constant(&self, value: f64) -> Jet {
        Jet::constant(&self.space, self.order, value)
    }

    /// `∂/∂yᵏ`.
    pub fn dot(&self, f: &Jet, k: usize) -> Jet {
        f.derivative(self.n + k)
    }

    /// `δₖ = ∂/∂xᵏ − Nᵐₖ ∂/∂yᵐ`.
    pub fn delta(&self, f: &Jet, k: usize) -> Jet {
        let n = self.n;
        let mut acc = f.derivative(k);
        for m in 0..n {
            acc = acc - &self.nonlinear[m * n + k] * &f.derivative(n + m);
        }
        acc
    }

    /// Coefficients `Γⁱₘₖ` (flat `[i][m][k]`) of the chosen derivative, or `None`
    /// for the plain vertical derivative of the Berwald connection.
    fn coefficients(&self, dir: Direction, conn: Connection) -> Option<&[Jet]> {
        match (dir, conn) {
            (Direction::Horizontal, Connection::Cartan) => Some(&self.cartan_h),
            (Direction::Horizontal, Connection::Berwald) => Some(&self.berwald),
            (Direction::Vertical, Connection::Cartan) => Some(&self.cv),
            (Direction::Vertical, Connection::Berwald) => None,
        }
    }

    /// Covariant derivative of `w`; the derivative index is appended as a new
    /// last covariant slot.
    pub fn cov_derive(&self, w: &JetTensor, dir: Direction, conn: Connection) -> JetTensor {
        let n = self.n;
        assert_eq!(w.n, n);
        let rank = w.rank();
        let coef = self.coefficients(dir, conn);
        let mut comps = Vec::with_capacity(w.comps.len() * n);
        for idx in MultiIndexIter::new(n, rank) {
            let base = &w.comps[flat_index(n, &idx)];
            for k in 0..n {
                let mut acc = match dir {
                    Direction::Horizontal => self.delta(base, k),
                    Direction::Vertical => self.dot(base, k),
                };
                if let Some(coef) = coef {
                    let mut moved = idx.clone();
                    for (s, variance) in w.slots.iter().enumerate() {
                        let orig = idx[s];
                        for m in 0..n {
                            moved[s] = m;
                            let wm = &w.comps[flat_index(n, &moved)];
                            match variance {
                                Variance::Contravariant => {
                                    acc = acc + &coef[(orig * n + m) * n + k] * wm;
                                }
                                Variance::Covariant => {
                                    acc = acc - &coef[(m * n + orig) * n + k] * wm;
                                }
                            }
                        }
                        moved[s] = orig;
                    }
                }
                comps.push(acc);
            }
        }
        let mut slots = w.slots.clone();
        slots.push(Variance::Covariant);
        JetTensor::new(n, slots, comps)
    }

    pub fn g_tensor(&self) -> JetTensor {
        JetTensor::new(self.n, vec![Variance::Covariant; 2], self.g.clone())
    }

    pub fn cartan_tensor(&self) -> JetTensor {
        JetTensor::new(self.n, vec![Variance::Covariant; 3], self.cartan.clone())
    }

    /// `T(X, Y)` as a map with slots `(X, Y, out)`.
    pub fn cartan_map(&self) -> JetTensor {
        let n = self.n;
        let mut comps = Vec::with_capacity(n * n * n);
        for a in 0..n {
            for b in 0..n {
                for i in 0..n {
                    comps.push(self.cv[(i * n + b) * n + a].clone());
                }
            }
        }
        JetTensor::new(
            n,
            vec![Variance::Covariant, Variance::Covariant, Variance::Contravariant],
            comps,
        )
    }

    /// `η̄ = yⁱ ∂̄ᵢ`.
    pub fn eta(&self) -> JetTensor {
        JetTensor::new(self.n, vec![Variance::Contravariant], self.ys.clone())
    }

    /// `ℓ_i = g_ij yʲ / L`.
    pub fn ell(&self) -> Vec<Jet> {
        let n = self.n;
        let inv_l = crate::diffcore::Scalar::recip(&self.l);
        (0..n)
            .map(|i| {
                let mut acc = &self.g[i * n] * &self.ys[0];
                for j in 1..n {
                    acc = acc + &self.g[i * n + j] * &self.ys[j];
                }
                acc * &inv_l
            })
            .collect()
    }

    /// `ℏ_ij = g_ij − ℓ_i ℓ_j`.
    pub fn angular(&self) -> Vec<Jet> {
        let n = self.n;
        let ell = self.ell();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(&self.g[i * n + j] - &ell[i] * &ell[j]);
            }
        }
        out
    }

    pub fn angular_values(&self) -> Vec<f64> {
        self.angular().iter().map(Jet::value).collect()
    }

    /// `C_i = gʲᵏ T_ijk`.
    pub fn torsion_trace(&self) -> Vec<Jet> {
        let n = self.n;
        (0..n)
            .map(|i| {
                let mut acc = self.zero(self.order);
                for j in 0..n {
                    acc = acc + &self.cv[(j * n + i) * n + j];
                }
                acc
            })
            .collect()
    }

    /// `(C_i, C̄ⁱ, C²)` at the point.
    pub fn contracted_torsion_values(&self) -> (Vec<f64>, Vec<f64>, f64) {
        let n = self.n;
        let c: Vec<f64> = self.torsion_trace().iter().map(Jet::value).collect();
        let cbar: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| self.ginv[i * n + j].value() * c[j]).sum())
            .collect();
        let c2 = c.iter().zip(&cbar).map(|(a, b)| a * b).sum();
        (c, cbar, c2)
    }

    /// `g(u, v)` for contravariant jet vectors.
    pub fn inner(&self, u: &[Jet], v: &[Jet]) -> Jet {
        let n = self.n;
        let mut acc = self.zero(self.order);
        for i in 0..n {
            for j in 0..n {
                acc = acc + &self.g[i * n + j] * &u[i] * &v[j];
            }
        }
        acc
    }

    /// Lowers a contravariant vector: `u_i = g_ij uʲ`.
    pub fn lower(&self, u: &[Jet]) -> Vec<Jet> {
        let n = self.n;
        (0..n)
            .map(|i| {
                let mut acc = &self.g[i * n] * &u[0];
                for j in 1..n {
                    acc = acc + &self.g[i * n + j] * &u[j];
                }
                acc
            })
            .collect()
    }

    /// Raises a covariant vector: `uⁱ = gⁱʲ u_j`.
    pub fn raise(&self, u: &[Jet]) -> Vec<Jet> {
        let n = self.n;
        (0..n)
            .map(|i| {
                let mut acc = &self.ginv[i * n] * &u[0];
                for j in 1..n {
                    acc = acc + &self.ginv[i * n + j] * &u[j];
                }
                acc
            })
            .collect()
    }
}

/// `Aⁱ.. = gⁱˡ A_l..` on the first index of a flat array.
fn raise_first(n: usize, ginv: &[Jet], lowered: &[Jet]) -> Vec<Jet> {
    let rest = lowered.len() / n;
    let mut out = Vec::with_capacity(lowered.len());
    for i in 0..n {
        for r in 0..rest {
            let mut acc = &ginv[i * n] * &lowered[r];
            for l_ in 1..n {
                acc = acc + &ginv[i * n + l_] * &lowered[l_ * rest + r];
            }
            out.push(acc);
        }
    }
    out
}

/// Gauss–Jordan inverse of a jet matrix, pivoting on the values.
fn invert(n: usize, a: &[Jet]) -> Result<Vec<Jet>> {
    let space = a[0].space().clone();
    let order = a.iter().map(Jet::order).min().unwrap_or(0);
    let mut m: Vec<Jet> = a.to_vec();
    let mut inv: Vec<Jet> = (0..n * n)
        .map(|k| Jet::constant(&space, order, if k / n == k % n { 1.0 } else { 0.0 }))
        .collect();
    let scale = a.iter().fold(0.0f64, |s, e| s.max(e.value().abs()));
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r, &s| {
                m[r * n + col]
                    .value()
                    .abs()
                    .total_cmp(&m[s * n + col].value().abs())
            })
            .expect("non-empty range");
        if !(m[pivot_row * n + col].value().abs() > 1e-13 * scale.max(1e-300)) {
            return Err(FinslerError::Inadmissible("fundamental tensor is singular".into()));
        }
        if pivot_row != col {
            for c in 0..n {
                m.swap(pivot_row * n + c, col * n + c);
                inv.swap(pivot_row * n + c, col * n + c);
            }
        }
        let p = crate::diffcore::Scalar::recip(&m[col * n + col]);
        for c in 0..n {
            m[col * n + c] = &m[col * n + c] * &p;
            inv[col * n + c] = &inv[col * n + c] * &p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[r * n + col].clone();
            for c in 0..n {
                m[r * n + c] = &m[r * n + c] - &f * &m[col * n + c];
                inv[r * n + c] = &inv[r * n + c] - &f * &inv[col * n + c];
            }
        }
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::max_abs;

    fn randers3() -> MetricModel {
        MetricModel::randers(3, None, &["0.3 + 0.1*x2", "0.1*sin(x3)", "0.05*x1*x2"]).unwrap()
    }

    #[test]
    fn inverse_times_matrix_is_identity_as_jets() {
        let m = randers3();
        let p = m.sample_corpus(1, 11).unwrap().remove(0);
        let geo = LocalGeometry::new(&m, &p, 4).unwrap();
        let n = 3;
        for i in 0..n {
            for j in 0..n {
                let mut acc = geo.zero(2);
                for k in 0..n {
                    acc = acc + &geo.g[i * n + k] * &geo.ginv[k * n + j];
                }
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((acc.value() - target).abs() < 1e-12);
                assert!(acc.coeffs()[1..].iter().all(|c| c.abs() < 1e-11));
            }
        }
    }

    #[test]
    fn covariant_derivative_of_metric_vanishes() {
        let m = randers3();
        for p in m.sample_corpus(5, 2).unwrap() {
            let geo = LocalGeometry::new(&m, &p, 4).unwrap();
            for dir in [Direction::Horizontal, Direction::Vertical] {
                let d = geo.cov_derive(&geo.g_tensor(), dir, Connection::Cartan);
                assert!(max_abs(&d.values()) < 1e-10, "{dir:?}");
            }
        }
    }

    #[test]
    fn rejects_orders_outside_range() {
        let m = MetricModel::euclidean(2).unwrap();
        let p = JetPoint::new(vec![0.0, 0.0], vec![1.0, 0.0]);
        assert!(LocalGeometry::new(&m, &p, 3).is_err());
        assert!(LocalGeometry::new(&m, &p, MAX_ORDER + 1).is_err());
    }
}
