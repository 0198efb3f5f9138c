//! Exact higher-order partial derivatives through truncated Taylor arithmetic,
//! with a finite-difference cross-check.
//!
//! The variables of a point are laid out as `(x¹..xⁿ, y¹..yⁿ)`. Everything
//! downstream (metric tensors, connection coefficients, curvature) is built by
//! differentiating [`Jet`]s, so residuals stay at round-off scale.

pub mod fd;
mod jet;
mod scalar;
mod space;

pub use jet::{dot, Jet};
pub use scalar::{Scalar, ScalarFn};
pub use space::{JetSpace, MAX_ORDER, MAX_VARS};

use crate::error::{FinslerError, Result};

/// Derivative specification: how many times each variable is differentiated.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    counts: Vec<u8>,
}

impl MultiIndex {
    pub fn from_counts(counts: Vec<u8>) -> MultiIndex {
        MultiIndex { counts }
    }

    /// Builds the index from a list of variables, e.g. `[0, 0, 3]` is `∂³/∂v₀∂v₀∂v₃`.
    pub fn from_vars(nvars: usize, vars: &[usize]) -> Result<MultiIndex> {
        let mut counts = vec![0u8; nvars];
        for &v in vars {
            if v >= nvars {
                return Err(FinslerError::Dimension(format!(
                    "variable {v} out of range for {nvars} variables"
                )));
            }
            counts[v] += 1;
        }
        Ok(MultiIndex { counts })
    }

    pub fn counts(&self) -> &[u8] {
        &self.counts
    }

    pub fn order(&self) -> usize {
        self.counts.iter().map(|&c| c as usize).sum()
    }

    pub fn nvars(&self) -> usize {
        self.counts.len()
    }

    /// Every multi-index over `nvars` variables with total order in `1..=max_order`.
    pub fn all_up_to(nvars: usize, max_order: usize) -> Vec<MultiIndex> {
        let space = JetSpace::get(nvars, max_order);
        (1..space.len(max_order))
            .map(|k| MultiIndex::from_counts(space.exponents(k).to_vec()))
            .collect()
    }
}

/// Exact `∂^I f` at `point`.
pub fn derive<F: ScalarFn>(f: &F, point: &[f64], index: &MultiIndex) -> Result<f64> {
    check_shape(f, point, index)?;
    let order = index.order();
    if order > MAX_ORDER {
        return Err(FinslerError::OrderTooHigh {
            order,
            max: MAX_ORDER,
        });
    }
    let vars = Jet::variables(point, order);
    let value = f.eval(&vars)?;
    if !value.all_finite() {
        return Err(FinslerError::Domain {
            expr: "<function>".into(),
            detail: "non-finite Taylor coefficient".into(),
        });
    }
    Ok(value
        .partial(index.counts())
        .expect("jet order matches the requested index"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdComparison {
    pub ad_value: f64,
    pub fd_value: f64,
    /// `|ad − fd| / max(1, |ad|)`
    pub rel_error: f64,
}

/// Compares [`derive`] with a Richardson-extrapolated central difference of step `h`.
pub fn fd_check<F: ScalarFn>(
    f: &F,
    point: &[f64],
    index: &MultiIndex,
    h: f64,
) -> Result<FdComparison> {
    if !(h > 0.0) {
        return Err(FinslerError::InvalidArgument(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    let ad_value = derive(f, point, index)?;
    let fd_value = fd::richardson(f, point, index, h)?;
    Ok(FdComparison {
        ad_value,
        fd_value,
        rel_error: (ad_value - fd_value).abs() / ad_value.abs().max(1.0),
    })
}

fn check_shape<F: ScalarFn>(f: &F, point: &[f64], index: &MultiIndex) -> Result<()> {
    if point.len() != f.nvars() || index.nvars() != f.nvars() {
        return Err(FinslerError::Dimension(format!(
            "function takes {} variables, point has {}, index has {}",
            f.nvars(),
            point.len(),
            index.nvars()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    // Test functions over (x¹, x², y¹, y²) unless noted.
    struct YOneSquared;
    impl ScalarFn for YOneSquared {
        fn nvars(&self) -> usize {
            4
        }
        fn eval<S: Scalar>(&self, v: &[S]) -> Result<S> {
            Ok(v[2].clone() * v[2].clone())
        }
    }

    struct XOneTimesYTwo;
    impl ScalarFn for XOneTimesYTwo {
        fn nvars(&self) -> usize {
            4
        }
        fn eval<S: Scalar>(&self, v: &[S]) -> Result<S> {
            Ok(v[0].clone() * v[3].clone())
        }
    }

    struct NormSquared;
    impl ScalarFn for NormSquared {
        fn nvars(&self) -> usize {
            4
        }
        fn eval<S: Scalar>(&self, v: &[S]) -> Result<S> {
            Ok(v[2].clone() * v[2].clone() + v[3].clone() * v[3].clone())
        }
    }

    struct YCubed;
    impl ScalarFn for YCubed {
        fn nvars(&self) -> usize {
            2
        }
        fn eval<S: Scalar>(&self, v: &[S]) -> Result<S> {
            Ok(v[1].powi(3))
        }
    }

    struct ExpX;
    impl ScalarFn for ExpX {
        fn nvars(&self) -> usize {
            2
        }
        fn eval<S: Scalar>(&self, v: &[S]) -> Result<S> {
            Ok(v[0].exp())
        }
    }

    struct Constant;
    impl ScalarFn for Constant {
        fn nvars(&self) -> usize {
            2
        }
        fn eval<S: Scalar>(&self, v: &[S]) -> Result<S> {
            Ok(v[0].lift(4.2))
        }
    }

    struct SqrtX;
    impl ScalarFn for SqrtX {
        fn nvars(&self) -> usize {
            1
        }
        fn eval<S: Scalar>(&self, v: &[S]) -> Result<S> {
            Ok(v[0].sqrt())
        }
    }

    struct Wavy;
    impl ScalarFn for Wavy {
        fn nvars(&self) -> usize {
            3
        }
        fn eval<S: Scalar>(&self, v: &[S]) -> Result<S> {
            Ok((v[0].clone() * v[1].clone()).sin() * v[2].exp() + (v[1].clone() * v[1].clone() + 1.0).sqrt())
        }
    }

    #[test]
    fn second_derivative_of_square() {
        let idx = MultiIndex::from_vars(4, &[2, 2]).unwrap();
        assert_eq!(derive(&YOneSquared, &[0.1, 0.2, 0.7, -0.3], &idx).unwrap(), 2.0);
    }

    #[test]
    fn bilinear_mixed_partial() {
        let idx = MultiIndex::from_vars(4, &[0, 3]).unwrap();
        assert_eq!(derive(&XOneTimesYTwo, &[3.0, 0.0, 0.0, 5.0], &idx).unwrap(), 1.0);
    }

    #[test]
    fn quadratic_has_no_third_derivatives() {
        let idx = MultiIndex::from_vars(4, &[2, 2, 2]).unwrap();
        assert_eq!(derive(&NormSquared, &[0.0, 0.0, 1.0, 2.0], &idx).unwrap(), 0.0);
    }

    #[test]
    fn fd_check_on_cubic() {
        let idx = MultiIndex::from_vars(2, &[1]).unwrap();
        let cmp = fd_check(&YCubed, &[0.0, 2.0], &idx, 1e-4).unwrap();
        assert_eq!(cmp.ad_value, 12.0);
        assert!(cmp.rel_error < 1e-7, "{cmp:?}");
    }

    #[test]
    fn fd_check_on_exp() {
        let idx = MultiIndex::from_vars(2, &[0]).unwrap();
        let cmp = fd_check(&ExpX, &[0.0, 0.0], &idx, 1e-3).unwrap();
        assert_eq!(cmp.ad_value, 1.0);
        assert!((cmp.fd_value - 1.0).abs() < 1e-7);
        assert!(cmp.rel_error < 1e-7);
    }

    #[test]
    fn fd_check_on_constant() {
        let idx = MultiIndex::from_vars(2, &[0, 1]).unwrap();
        let cmp = fd_check(&Constant, &[0.3, 0.4], &idx, 1e-2).unwrap();
        assert_eq!(cmp.ad_value, 0.0);
        assert!(cmp.fd_value.abs() < 1e-9);
    }

    #[test]
    fn domain_error_for_sqrt_of_negative() {
        let idx = MultiIndex::from_vars(1, &[0]).unwrap();
        assert!(matches!(
            derive(&SqrtX, &[-1.0], &idx),
            Err(FinslerError::Domain { .. })
        ));
    }

    #[test]
    fn rejects_nonpositive_step() {
        let idx = MultiIndex::from_vars(2, &[0]).unwrap();
        assert!(fd_check(&ExpX, &[0.0, 0.0], &idx, 0.0).is_err());
    }

    #[test]
    fn mixed_partials_are_permutation_invariant() {
        let p = [0.3, -0.2, 0.5];
        for vars in [[0usize, 1, 2, 1], [1, 0, 1, 2], [2, 1, 1, 0]] {
            let a = derive(&Wavy, &p, &MultiIndex::from_vars(3, &vars).unwrap()).unwrap();
            let b = derive(&Wavy, &p, &MultiIndex::from_vars(3, &[0, 1, 1, 2]).unwrap()).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn every_index_up_to_order_four_matches_fd() {
        let p = [0.3, -0.2, 0.5];
        for idx in MultiIndex::all_up_to(3, 4) {
            let cmp = fd_check(&Wavy, &p, &idx, fd::default_step(idx.order())).unwrap();
            assert!(cmp.rel_error < 1e-6, "{idx:?}: {cmp:?}");
        }
    }
}
