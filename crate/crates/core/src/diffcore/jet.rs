use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use super::scalar::Scalar;
use super::space::JetSpace;

/// Truncated multivariate Taylor series `Σ c_α h^α` around a point.
///
/// Coefficients are Taylor coefficients (`∂^α f / α!`). Binary operations
/// truncate at the smaller of the two operand orders; differentiation lowers
/// the order by one.
#[derive(Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    order: usize,
    coeffs: Vec<f64>,
}

impl Jet {
    pub fn constant(space: &Arc<JetSpace>, order: usize, value: f64) -> Jet {
        let mut coeffs = vec![0.0; space.len(order)];
        coeffs[0] = value;
        Jet {
            space: space.clone(),
            order,
            coeffs,
        }
    }

    /// The independent variable `var` expanded around `value`.
    pub fn variable(space: &Arc<JetSpace>, order: usize, var: usize, value: f64) -> Jet {
        let mut jet = Jet::constant(space, order, value);
        if order > 0 {
            // degree-1 monomials follow the constant, one per variable in order
            jet.coeffs[1 + var] = 1.0;
        }
        jet
    }

    /// One jet per variable, expanded around `point`.
    pub fn variables(point: &[f64], order: usize) -> Vec<Jet> {
        let space = JetSpace::get(point.len(), order);
        point
            .iter()
            .enumerate()
            .map(|(v, &value)| Jet::variable(&space, order, v, value))
            .collect()
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Partial derivative `∂^α f` at the expansion point for exponent vector `exps`.
    ///
    /// Returns `None` when the requested order exceeds the jet order.
    pub fn partial(&self, exps: &[u8]) -> Option<f64> {
        let degree: usize = exps.iter().map(|&e| e as usize).sum();
        if degree > self.order {
            return None;
        }
        let k = self.space.index_of(exps)?;
        Some(self.coeffs[k] * self.space.factorial(k))
    }

    /// `∂/∂x_var`, one order lower.
    ///
    /// # Panics
    /// If the jet has order zero.
    pub fn derivative(&self, var: usize) -> Jet {
        assert!(self.order > 0, "cannot differentiate an order-0 jet");
        let order = self.order - 1;
        let coeffs = self
            .space
            .deriv_table(var, order)
            .iter()
            .map(|&(src, factor)| factor * self.coeffs[src as usize])
            .collect();
        Jet {
            space: self.space.clone(),
            order,
            coeffs,
        }
    }

    /// Copy truncated at `order` (no-op when already lower).
    pub fn truncate(&self, order: usize) -> Jet {
        if order >= self.order {
            return self.clone();
        }
        Jet {
            space: self.space.clone(),
            order,
            coeffs: self.coeffs[..self.space.len(order)].to_vec(),
        }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            space: self.space.clone(),
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// `Σ_k series[k] h^k` where `h = self - self.value()`.
    fn compose(&self, series: &[f64]) -> Jet {
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        let mut acc = Jet::constant(&self.space, self.order, series[series.len() - 1]);
        for &c in series[..series.len() - 1].iter().rev() {
            acc = &acc * &h;
            acc.coeffs[0] += c;
        }
        acc
    }

    fn combine(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        let space = pick_space(&self.space, &other.space);
        let order = self.order.min(other.order);
        let len = space.len(order);
        let coeffs = self.coeffs[..len]
            .iter()
            .zip(&other.coeffs[..len])
            .map(|(&a, &b)| f(a, b))
            .collect();
        Jet {
            space,
            order,
            coeffs,
        }
    }

    fn product(&self, other: &Jet) -> Jet {
        let space = pick_space(&self.space, &other.space);
        let order = self.order.min(other.order);
        let mut coeffs = vec![0.0; space.len(order)];
        for &(a, b, out) in space.mul_table(order) {
            coeffs[out as usize] += self.coeffs[a as usize] * other.coeffs[b as usize];
        }
        Jet {
            space,
            order,
            coeffs,
        }
    }
}

fn pick_space(a: &Arc<JetSpace>, b: &Arc<JetSpace>) -> Arc<JetSpace> {
    assert_eq!(a.nvars(), b.nvars(), "jets over different variable sets");
    if a.max_order() >= b.max_order() {
        a.clone()
    } else {
        b.clone()
    }
}

/// Taylor coefficients of `t^p` around `t0`, up to `order`.
fn power_series(t0: f64, p: f64, order: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(order + 1);
    let mut binom = 1.0;
    for k in 0..=order {
        out.push(binom * t0.powf(p - k as f64));
        binom *= (p - k as f64) / (k as f64 + 1.0);
    }
    out
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("order", &self.order)
            .field("value", &self.coeffs[0])
            .field("terms", &self.coeffs.len())
            .finish()
    }
}

impl Scalar for Jet {
    fn lift(&self, c: f64) -> Self {
        Jet::constant(&self.space, self.order, c)
    }

    fn value(&self) -> f64 {
        self.coeffs[0]
    }

    fn all_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    fn recip(&self) -> Self {
        let t0 = self.value();
        let series: Vec<f64> = (0..=self.order)
            .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 } / t0.powi(k as i32 + 1))
            .collect();
        self.compose(&series)
    }

    fn sqrt(&self) -> Self {
        let t0 = self.value();
        if t0 < 0.0 {
            return self.lift(f64::NAN);
        }
        self.compose(&power_series(t0, 0.5, self.order))
    }

    fn exp(&self) -> Self {
        let e0 = self.value().exp();
        let mut series = Vec::with_capacity(self.order + 1);
        let mut fact = 1.0;
        for k in 0..=self.order {
            if k > 0 {
                fact *= k as f64;
            }
            series.push(e0 / fact);
        }
        self.compose(&series)
    }

    fn ln(&self) -> Self {
        let t0 = self.value();
        if t0 <= 0.0 {
            return self.lift(f64::NAN);
        }
        let series: Vec<f64> = (0..=self.order)
            .map(|k| match k {
                0 => t0.ln(),
                _ => {
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    sign / (k as f64 * t0.powi(k as i32))
                }
            })
            .collect();
        self.compose(&series)
    }

    fn sin(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.compose(&trig_series(s, c, self.order))
    }

    fn cos(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        // cos(t0 + h) = sin(t0 + π/2 + h)
        self.compose(&trig_series(c, -s, self.order))
    }

    fn powi(&self, k: i32) -> Self {
        if k < 0 {
            return self.powi(-k).recip();
        }
        let mut result = self.lift(1.0);
        let mut base = self.clone();
        let mut e = k as u32;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        result
    }

    fn powf(&self, p: f64) -> Self {
        let t0 = self.value();
        if t0 < 0.0 {
            return self.lift(f64::NAN);
        }
        self.compose(&power_series(t0, p, self.order))
    }
}

/// Taylor coefficients of `sin(t0 + h)` given `sin t0`, `cos t0`.
fn trig_series(s: f64, c: f64, order: usize) -> Vec<f64> {
    let cycle = [s, c, -s, -c];
    let mut fact = 1.0;
    (0..=order)
        .map(|k| {
            if k > 0 {
                fact *= k as f64;
            }
            cycle[k % 4] / fact
        })
        .collect()
}

impl Add<&Jet> for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.combine(rhs, |a, b| a + b)
    }
}

impl Sub<&Jet> for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.combine(rhs, |a, b| a - b)
    }
}

impl Mul<&Jet> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.product(rhs)
    }
}

impl Div<&Jet> for &Jet {
    type Output = Jet;
    fn div(self, rhs: &Jet) -> Jet {
        self.product(&rhs.recip())
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($($tr:ident :: $method:ident),*) => {$(
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                (&self).$method(rhs)
            }
        }
        impl $tr<Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                self.$method(&rhs)
            }
        }
    )*};
}

forward_owned!(Add::add, Sub::sub, Mul::mul, Div::div);

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.coeffs[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.coeffs[0] -= rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

/// `Σ a_k b_k` with the usual truncation.
pub fn dot(a: &[Jet], b: &[Jet]) -> Jet {
    assert_eq!(a.len(), b.len());
    let mut acc = &a[0] * &b[0];
    for (x, y) in a.iter().zip(b).skip(1) {
        acc = &acc + &(x * y);
    }
    acc
}
