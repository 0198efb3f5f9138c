//! Riemannian metrics against independently computed Christoffel symbols and
//! Riemann tensors.
//!
//! The metrics are conformally flat, `a = e^{2u} δ`, so the Christoffel
//! symbols are `Γⁱⱼₖ = δⁱⱼ u_k + δⁱₖ u_j − δ_jk u_i`; their x-derivatives for
//! the Riemann tensor are taken by Richardson-extrapolated central differences.

use finsler_core::connection::cartan_coefficients;
use finsler_core::curvature::curvatures;
use finsler_core::metric::{cartan_tensor, fundamental_tensor, JetPoint, MetricModel};
use finsler_core::tensor::max_abs;

struct Conformal {
    model: MetricModel,
    u: fn(&[f64]) -> f64,
    du: fn(&[f64]) -> Vec<f64>,
}

fn sphere() -> Conformal {
    let d = "4/(1 + x1^2 + x2^2 + x3^2)^2";
    Conformal {
        model: MetricModel::riemannian(3, &[d, "0", "0", "0", d, "0", "0", "0", d]).unwrap(),
        u: |x| 2f64.ln() - (1.0 + x.iter().map(|v| v * v).sum::<f64>()).ln(),
        du: |x| {
            let s = 1.0 + x.iter().map(|v| v * v).sum::<f64>();
            x.iter().map(|v| -2.0 * v / s).collect()
        },
    }
}

fn lumpy() -> Conformal {
    let d = "exp(0.6*x1*x2 + 0.4*sin(x3) + 0.2*x1^2)";
    Conformal {
        model: MetricModel::riemannian(3, &[d, "0", "0", "0", d, "0", "0", "0", d]).unwrap(),
        u: |x| 0.3 * x[0] * x[1] + 0.2 * x[2].sin() + 0.1 * x[0] * x[0],
        du: |x| vec![0.3 * x[1] + 0.2 * x[0], 0.3 * x[0], 0.2 * x[2].cos()],
    }
}

impl Conformal {
    fn christoffel(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let du = (self.du)(x);
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        let mut out = vec![0.0; n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    out[(i * n + j) * n + k] = d(i, j) * du[k] + d(i, k) * du[j] - d(j, k) * du[i];
                }
            }
        }
        out
    }

    fn christoffel_dx(&self, x: &[f64], l: usize) -> Vec<f64> {
        let h = 1e-3;
        let diff = |h: f64| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[l] += h;
            xm[l] -= h;
            let (a, b) = (self.christoffel(&xp), self.christoffel(&xm));
            a.iter().zip(&b).map(|(p, m)| (p - m) / (2.0 * h)).collect::<Vec<_>>()
        };
        let coarse = diff(h);
        let fine = diff(h / 2.0);
        fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect()
    }

    /// `R(∂a,∂b)∂c` lowered with `∂d`, in the sign where the unit sphere has
    /// `R(X,Y)Z = g(X,Z)Y − g(Y,Z)X`.
    fn riemann_lowered(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let gam = self.christoffel(x);
        let dgam: Vec<Vec<f64>> = (0..n).map(|l| self.christoffel_dx(x, l)).collect();
        let g = |i: usize, j: usize| if i == j { (2.0 * (self.u)(x)).exp() } else { 0.0 };
        let c = |i: usize, j: usize, k: usize| gam[(i * n + j) * n + k];
        let mut out = vec![0.0; n.pow(4)];
        for a in 0..n {
            for b in 0..n {
                for cc in 0..n {
                    for d in 0..n {
                        let mut v = 0.0;
                        for i in 0..n {
                            // textbook Rⁱ_cab = ∂_a Γⁱ_bc − ∂_b Γⁱ_ac + Γⁱ_am Γᵐ_bc − Γⁱ_bm Γᵐ_ac
                            let mut std = dgam[a][(i * n + b) * n + cc] - dgam[b][(i * n + a) * n + cc];
                            for m in 0..n {
                                std += c(i, a, m) * c(m, b, cc) - c(i, b, m) * c(m, a, cc);
                            }
                            v -= std * g(i, d);
                        }
                        out[((a * n + b) * n + cc) * n + d] = v;
                    }
                }
            }
        }
        out
    }
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    diff / max_abs(a).max(max_abs(b)).max(1.0)
}

fn corpus(m: &MetricModel) -> Vec<JetPoint> {
    m.sample_corpus(30, 42).unwrap()
}

#[test]
fn fundamental_tensor_is_the_base_matrix_and_cartan_vanishes() {
    let c = lumpy();
    for p in corpus(&c.model) {
        let g = fundamental_tensor(&c.model, &p).unwrap();
        let a = c.model.base_matrix(&p.x).unwrap().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((g.get(&[i, j]) - a[(i, j)]).abs() < 1e-12);
            }
        }
        assert!(cartan_tensor(&c.model, &p).unwrap().max_abs() < 1e-12);
    }
}

#[test]
fn connection_matches_christoffel_symbols() {
    for c in [sphere(), lumpy()] {
        for p in corpus(&c.model) {
            let data = cartan_coefficients(&c.model, &p).unwrap();
            let gam = c.christoffel(&p.x);
            assert!(rel(&data.cartan_h, &gam) < 1e-10);
            assert!(rel(&data.berwald, &gam) < 1e-10);
            let n = 3;
            let spray: Vec<f64> = (0..n)
                .map(|i| {
                    let mut s = 0.0;
                    for j in 0..n {
                        for k in 0..n {
                            s += 0.5 * gam[(i * n + j) * n + k] * p.y[j] * p.y[k];
                        }
                    }
                    s
                })
                .collect();
            assert!(rel(&data.spray, &spray) < 1e-10);
        }
    }
}

#[test]
fn curvature_matches_riemann_tensor() {
    for c in [sphere(), lumpy()] {
        let mut worst: f64 = 0.0;
        for p in corpus(&c.model) {
            let data = curvatures(&c.model, &p).unwrap();
            worst = worst.max(rel(&data.r, &c.riemann_lowered(&p.x)));
            assert!(max_abs(&data.p) < 1e-9);
            assert!(max_abs(&data.s) < 1e-9);
        }
        assert!(worst < 1e-7, "worst relative error {worst:e}");
    }
}

#[test]
fn sphere_has_unit_constant_curvature() {
    let c = sphere();
    let n: usize = 3;
    for p in corpus(&c.model) {
        let data = curvatures(&c.model, &p).unwrap();
        let a = c.model.base_matrix(&p.x).unwrap().unwrap();
        let mut want = vec![0.0; n.pow(4)];
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    for w in 0..n {
                        want[((x * n + y) * n + z) * n + w] =
                            a[(x, z)] * a[(y, w)] - a[(y, z)] * a[(x, w)];
                    }
                }
            }
        }
        assert!(rel(&data.r, &want) < 1e-10);
    }
}
