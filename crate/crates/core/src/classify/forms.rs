//! Defining forms of the special spaces as functions of component arrays at
//! one point. Each returns the defect of the best fit together with the
//! fitted scalars or forms. Least squares is taken over coordinate components.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FormFit {
    /// `max |target − best fit|`.
    pub residual: f64,
    /// `max |target|`.
    pub scale: f64,
}

impl FormFit {
    fn new(target: &[f64], model: &[f64]) -> FormFit {
        let residual = target
            .iter()
            .zip(model)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        FormFit {
            residual,
            scale: crate::tensor::max_abs(target),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Best `s` with `target ≈ s·basis`; zero when the basis vanishes.
fn scalar_fit(target: &[f64], basis: &[f64]) -> f64 {
    let bb = dot(basis, basis);
    if bb > 1e-300 {
        dot(target, basis) / bb
    } else {
        0.0
    }
}

fn i3(n: usize, a: usize, b: usize, c: usize) -> usize {
    (a * n + b) * n + c
}

fn i4(n: usize, a: usize, b: usize, c: usize, d: usize) -> usize {
    ((a * n + b) * n + c) * n + d
}

/// `C_a = gᵇᶜ T_abc`.
pub fn torsion_trace(t: &[f64], ginv: &[f64], n: usize) -> Vec<f64> {
    (0..n)
        .map(|a| {
            let mut s = 0.0;
            for b in 0..n {
                for c in 0..n {
                    s += ginv[b * n + c] * t[i3(n, a, b, c)];
                }
            }
            s
        })
        .collect()
}

/// `C(C̄) = gᵃᵇ C_a C_b`.
pub fn c_squared(c: &[f64], ginv: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for a in 0..n {
        for b in 0..n {
            s += ginv[a * n + b] * c[a] * c[b];
        }
    }
    s
}

/// Cyclic sum `A_ab C_c + A_bc C_a + A_ca C_b`.
pub fn cyclic(a_t: &[f64], c: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n * n];
    for a in 0..n {
        for b in 0..n {
            for k in 0..n {
                out[i3(n, a, b, k)] = a_t[a * n + b] * c[k] + a_t[b * n + k] * c[a] + a_t[k * n + a] * c[b];
            }
        }
    }
    out
}

fn cube(c: &[f64], c2: f64, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n * n];
    for a in 0..n {
        for b in 0..n {
            for k in 0..n {
                out[i3(n, a, b, k)] = c[a] * c[b] * c[k] / c2;
            }
        }
    }
    out
}

fn c_reducible_model(hbar: &[f64], c: &[f64], n: usize) -> Vec<f64> {
    let scale = 1.0 / (n as f64 + 1.0);
    cyclic(hbar, c, n).into_iter().map(|v| v * scale).collect()
}

/// `T = (1/(n+1)) 𝔖{ℏ ⊗ C}` with `C` recovered as the trace of `T`.
/// Returns the defect and the recovered `C`.
pub fn c_reducible(t: &[f64], hbar: &[f64], ginv: &[f64], n: usize) -> (FormFit, Vec<f64>) {
    let c = torsion_trace(t, ginv, n);
    let model = c_reducible_model(hbar, &c, n);
    (FormFit::new(t, &model), c)
}

/// `T = C ⊗ C ⊗ C / C²`. Meaningful only for `C² ≠ 0`.
pub fn c2_like(t: &[f64], ginv: &[f64], n: usize) -> FormFit {
    let c = torsion_trace(t, ginv, n);
    let c2 = c_squared(&c, ginv, n);
    FormFit::new(t, &cube(&c, c2, n))
}

/// `T = (μ/(n+1)) 𝔖{ℏ ⊗ C} + (τ/C²) C ⊗ C ⊗ C` with `μ + τ = 1`.
/// Returns the defect and the fitted `μ`.
pub fn semi_c_reducible(t: &[f64], hbar: &[f64], ginv: &[f64], n: usize) -> (FormFit, f64) {
    let c = torsion_trace(t, ginv, n);
    let c2 = c_squared(&c, ginv, n);
    let red = c_reducible_model(hbar, &c, n);
    let cub = cube(&c, c2, n);
    let target: Vec<f64> = t.iter().zip(&cub).map(|(a, b)| a - b).collect();
    let basis: Vec<f64> = red.iter().zip(&cub).map(|(a, b)| a - b).collect();
    let mu = scalar_fit(&target, &basis);
    let model: Vec<f64> = red.iter().zip(&cub).map(|(r, q)| mu * r + (1.0 - mu) * q).collect();
    (FormFit::new(t, &model), mu)
}

/// `T = 𝔖{A ⊗ C}` for a given symmetric `A`. The defect also covers `A(X, η) = 0`.
pub fn quasi_c_reducible(t: &[f64], a_t: &[f64], y: &[f64], ginv: &[f64], n: usize) -> FormFit {
    let c = torsion_trace(t, ginv, n);
    let mut fit = FormFit::new(t, &cyclic(a_t, &c, n));
    for a in 0..n {
        let ay: f64 = (0..n).map(|b| a_t[a * n + b] * y[b]).sum();
        fit.residual = fit.residual.max(ay.abs());
    }
    fit
}

/// `S = κ (ℏ_ac ℏ_bd − ℏ_ad ℏ_bc)` on the lowered `S`. Returns the defect and `κ`,
/// which the definition ties to `Sc/((n−1)(n−2))`.
pub fn s3_like(s_low: &[f64], hbar: &[f64], n: usize) -> (FormFit, f64) {
    let mut basis = vec![0.0; n.pow(4)];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    basis[i4(n, a, b, c, d)] = hbar[a * n + c] * hbar[b * n + d] - hbar[a * n + d] * hbar[b * n + c];
                }
            }
        }
    }
    let kappa = scalar_fit(s_low, &basis);
    let model: Vec<f64> = basis.iter().map(|v| kappa * v).collect();
    (FormFit::new(s_low, &model), kappa)
}

/// `P(X,Y,Z,W) = φ(Z)T(X,Y,W) − φ(W)T(X,Y,Z)` on the lowered `P`, with `φ`
/// fitted by least squares. Returns the defect and `φ`.
pub fn p2_like(p_low: &[f64], t: &[f64], n: usize) -> (FormFit, Vec<f64>) {
    let rows = n.pow(4);
    let mut m = DMatrix::<f64>::zeros(rows, n);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let r = i4(n, a, b, c, d);
                    m[(r, c)] += t[i3(n, a, b, d)];
                    m[(r, d)] -= t[i3(n, a, b, c)];
                }
            }
        }
    }
    let rhs = DVector::from_column_slice(p_low);
    let phi: Vec<f64> = match m.clone().svd(true, true).solve(&rhs, 1e-12) {
        Ok(sol) => sol.iter().copied().collect(),
        Err(_) => vec![0.0; n],
    };
    let model: Vec<f64> = (&m * DVector::from_column_slice(&phi)).iter().copied().collect();
    (FormFit::new(p_low, &model), phi)
}

/// `P̂(X,Y,Z) = δ(X)ℏ(Y,Z) + δ(Y)ℏ(X,Z) + δ(Z)ℏ(X,Y)` for the given `δ`.
pub fn p_reducible(phat_low: &[f64], delta: &[f64], hbar: &[f64], n: usize) -> FormFit {
    let mut model = vec![0.0; n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                model[i3(n, a, b, c)] =
                    delta[a] * hbar[b * n + c] + delta[b] * hbar[a * n + c] + delta[c] * hbar[a * n + b];
            }
        }
    }
    FormFit::new(phat_low, &model)
}

/// `R(X,Y)Z = k₀{g(X,Z)Y − g(Y,Z)X}` on the map-form `R` with slots
/// `(X, Y, Z, out)`. Returns the defect and `k₀`.
pub fn h_isotropic(r: &[f64], g: &[f64], n: usize) -> (FormFit, f64) {
    let mut basis = vec![0.0; n.pow(4)];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                basis[i4(n, a, b, c, b)] += g[a * n + c];
                basis[i4(n, a, b, c, a)] -= g[b * n + c];
            }
        }
    }
    let k0 = scalar_fit(r, &basis);
    let model: Vec<f64> = basis.iter().map(|v| k0 * v).collect();
    (FormFit::new(r, &model), k0)
}

/// `∇W = λ ⊗ W`, where `dw` carries the derivative index last.
/// Returns the defect and `λ`.
pub fn recurrence(w: &[f64], dw: &[f64], n: usize) -> (FormFit, Vec<f64>) {
    let ww = dot(w, w);
    let lambda: Vec<f64> = (0..n)
        .map(|k| {
            if ww > 1e-300 {
                w.iter().enumerate().map(|(r, v)| v * dw[r * n + k]).sum::<f64>() / ww
            } else {
                0.0
            }
        })
        .collect();
    let mut model = vec![0.0; dw.len()];
    for (r, v) in w.iter().enumerate() {
        for k in 0..n {
            model[r * n + k] = lambda[k] * v;
        }
    }
    (FormFit::new(dw, &model), lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(n: usize, d: &[f64]) -> Vec<f64> {
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            m[i * n + i] = d[i];
        }
        m
    }

    #[test]
    fn semi_c_recovers_injected_mu() {
        let n = 3;
        // orthonormal frame with y along e1: ℏ = diag(0,1,1), C(y) = 0
        let g = diag(n, &[1.0, 1.0, 1.0]);
        let hbar = diag(n, &[0.0, 1.0, 1.0]);
        let c = [0.0, 0.4, -0.3];
        let c2 = 0.25;
        let mu = 0.35;
        let t: Vec<f64> = c_reducible_model(&hbar, &c, n)
            .iter()
            .zip(cube(&c, c2, n))
            .map(|(r, q)| mu * r + (1.0 - mu) * q)
            .collect();
        let (fit, got) = semi_c_reducible(&t, &hbar, &g, n);
        assert!(fit.residual < 1e-14);
        assert!((got - mu).abs() < 1e-12);
        let (red, _) = c_reducible(&t, &hbar, &g, n);
        assert!(red.residual > 1e-3);
    }

    #[test]
    fn p2_like_recovers_phi() {
        let n = 3;
        let mut t = vec![0.0; 27];
        for (k, v) in t.iter_mut().enumerate() {
            *v = ((k * 7 % 11) as f64 - 5.0) * 0.1;
        }
        let phi = [0.3, -0.2, 0.5];
        let mut p = vec![0.0; 81];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        p[i4(n, a, b, c, d)] = phi[c] * t[i3(n, a, b, d)] - phi[d] * t[i3(n, a, b, c)];
                    }
                }
            }
        }
        let (fit, got) = p2_like(&p, &t, n);
        assert!(fit.residual < 1e-13);
        for k in 0..n {
            assert!((got[k] - phi[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn isotropic_and_s3_constants() {
        let n = 3;
        let g = diag(n, &[2.0, 1.0, 0.5]);
        let mut r = vec![0.0; 81];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    r[i4(n, a, b, c, b)] += 0.7 * g[a * n + c];
                    r[i4(n, a, b, c, a)] -= 0.7 * g[b * n + c];
                }
            }
        }
        let (fit, k0) = h_isotropic(&r, &g, n);
        assert!(fit.residual < 1e-15 && (k0 - 0.7).abs() < 1e-14);
        let (fit, kappa) = s3_like(&vec![0.0; 81], &g, n);
        assert_eq!((fit.residual, kappa), (0.0, 0.0));
    }

    #[test]
    fn recurrence_of_scaled_tensor() {
        let n = 2;
        let w = [1.0, -2.0, 0.5, 3.0];
        let lambda = [0.25, -1.5];
        let dw: Vec<f64> = w.iter().flat_map(|v| lambda.iter().map(move |l| l * v)).collect();
        let (fit, got) = recurrence(&w, &dw, n);
        assert!(fit.residual < 1e-15);
        assert!((got[0] - 0.25).abs() < 1e-15 && (got[1] + 1.5).abs() < 1e-15);
        let (fit, got) = recurrence(&[0.0; 4], &[0.0; 8], n);
        assert_eq!((fit.residual, got), (0.0, vec![0.0, 0.0]));
    }
}
