//! Monomial bookkeeping for truncated multivariate Taylor series.
//!
//! Monomials are stored in graded order (all degree-0 terms, then degree 1,
//! ...), so a series truncated at order `d` is a prefix of the coefficient
//! vector. Multiplication and differentiation are driven by precomputed index
//! tables that are shared between every series living in the same space.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Highest total order any [`JetSpace`] can be built with.
pub const MAX_ORDER: usize = 6;

/// Highest number of independent variables (twice the largest supported dimension).
pub const MAX_VARS: usize = 12;

#[derive(Debug)]
pub struct JetSpace {
    nvars: usize,
    max_order: usize,
    exps: Vec<u8>,
    degree_end: Vec<usize>,
    lookup: HashMap<Vec<u8>, u32>,
    mul: Vec<(u32, u32, u32)>,
    mul_end: Vec<usize>,
    deriv: Vec<Vec<(u32, f64)>>,
    factorials: Vec<f64>,
}

impl JetSpace {
    /// Returns the shared space for `nvars` variables truncated at `max_order`.
    pub fn get(nvars: usize, max_order: usize) -> Arc<JetSpace> {
        assert!(
            (1..=MAX_VARS).contains(&nvars),
            "jet space supports 1..={MAX_VARS} variables, got {nvars}"
        );
        assert!(max_order <= MAX_ORDER, "jet order {max_order} exceeds {MAX_ORDER}");
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetSpace>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("jet space cache poisoned");
        guard
            .entry((nvars, max_order))
            .or_insert_with(|| Arc::new(JetSpace::build(nvars, max_order)))
            .clone()
    }

    fn build(nvars: usize, max_order: usize) -> JetSpace {
        let mut exps = Vec::new();
        let mut degree_end = Vec::with_capacity(max_order + 1);
        let mut current = vec![0u8; nvars];
        for degree in 0..=max_order {
            push_compositions(&mut exps, &mut current, 0, degree);
            degree_end.push(exps.len() / nvars);
        }
        let count = exps.len() / nvars;
        let mono = |k: usize| &exps[k * nvars..(k + 1) * nvars];
        let degree_of = |k: usize| degree_end.iter().position(|&end| k < end).unwrap();

        let mut lookup = HashMap::with_capacity(count);
        for k in 0..count {
            lookup.insert(mono(k).to_vec(), k as u32);
        }

        let mut mul = Vec::new();
        let mut buf = vec![0u8; nvars];
        for a in 0..count {
            let da = degree_of(a);
            for b in 0..degree_end[max_order - da] {
                for v in 0..nvars {
                    buf[v] = mono(a)[v] + mono(b)[v];
                }
                mul.push((a as u32, b as u32, lookup[&buf]));
            }
        }
        mul.sort_by_key(|&(_, _, out)| out);
        let mut mul_end = Vec::with_capacity(max_order + 1);
        for d in 0..=max_order {
            let limit = degree_end[d] as u32;
            mul_end.push(mul.partition_point(|&(_, _, out)| out < limit));
        }

        let mut deriv = vec![Vec::new(); nvars];
        if max_order > 0 {
            for (v, table) in deriv.iter_mut().enumerate() {
                for m in 0..degree_end[max_order - 1] {
                    buf.copy_from_slice(mono(m));
                    buf[v] += 1;
                    table.push((lookup[&buf], f64::from(buf[v])));
                }
            }
        }

        let factorials = (0..count)
            .map(|k| mono(k).iter().map(|&e| factorial(e as usize)).product())
            .collect();

        JetSpace {
            nvars,
            max_order,
            exps,
            degree_end,
            lookup,
            mul,
            mul_end,
            deriv,
            factorials,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// Number of coefficients of a series truncated at `order`.
    pub fn len(&self, order: usize) -> usize {
        self.degree_end[order]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Exponent vector of monomial `k`.
    pub fn exponents(&self, k: usize) -> &[u8] {
        &self.exps[k * self.nvars..(k + 1) * self.nvars]
    }

    pub fn index_of(&self, exps: &[u8]) -> Option<usize> {
        self.lookup.get(exps).map(|&k| k as usize)
    }

    /// Product table restricted to outputs of degree `<= order`.
    pub(crate) fn mul_table(&self, order: usize) -> &[(u32, u32, u32)] {
        &self.mul[..self.mul_end[order]]
    }

    /// `(source, factor)` for each output monomial of `∂/∂v`, outputs in graded order.
    pub(crate) fn deriv_table(&self, var: usize, out_order: usize) -> &[(u32, f64)] {
        &self.deriv[var][..self.degree_end[out_order]]
    }

    /// `α!` for monomial `k`: converts Taylor coefficients to partial derivatives.
    pub fn factorial(&self, k: usize) -> f64 {
        self.factorials[k]
    }
}

fn push_compositions(out: &mut Vec<u8>, current: &mut [u8], pos: usize, remaining: usize) {
    if pos + 1 == current.len() {
        current[pos] = remaining as u8;
        out.extend_from_slice(current);
        current[pos] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        current[pos] = e as u8;
        push_compositions(out, current, pos + 1, remaining - e);
    }
    current[pos] = 0;
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binomial(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn monomial_counts_match_binomials() {
        for nvars in 1..=6 {
            for order in 0..=4 {
                let space = JetSpace::get(nvars, order);
                assert_eq!(space.len(order), binomial(nvars + order, order));
            }
        }
    }

    #[test]
    fn graded_prefix_is_shared() {
        let small = JetSpace::get(3, 2);
        let large = JetSpace::get(3, 4);
        for k in 0..small.len(2) {
            assert_eq!(small.exponents(k), large.exponents(k));
        }
    }

    #[test]
    fn product_table_size_is_double_space_count() {
        // pairs (a, b) with deg a + deg b <= d are in bijection with monomials
        // of degree <= d in twice as many variables
        let space = JetSpace::get(4, 3);
        assert_eq!(space.mul_table(3).len(), binomial(8 + 3, 3));
    }
}
