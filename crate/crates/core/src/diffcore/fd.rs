//! Central finite differences with one Richardson step, used as an
//! independent check on the Taylor arithmetic.

use super::scalar::ScalarFn;
use super::MultiIndex;
use crate::error::{FinslerError, Result};

/// Central stencil for a derivative of the given multiplicity: `(offset, weight)`
/// pairs in units of the step, to be divided by `h^m`. All have `O(h²)` error.
fn stencil(multiplicity: u8) -> Option<&'static [(i32, f64)]> {
    const S1: &[(i32, f64)] = &[(-1, -0.5), (1, 0.5)];
    const S2: &[(i32, f64)] = &[(-1, 1.0), (0, -2.0), (1, 1.0)];
    const S3: &[(i32, f64)] = &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)];
    const S4: &[(i32, f64)] = &[(-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)];
    match multiplicity {
        1 => Some(S1),
        2 => Some(S2),
        3 => Some(S3),
        4 => Some(S4),
        _ => None,
    }
}

/// Tensor-product central difference of `f` at `point` with step `h`.
pub fn central_difference<F: ScalarFn>(
    f: &F,
    point: &[f64],
    index: &MultiIndex,
    h: f64,
) -> Result<f64> {
    let active: Vec<(usize, &'static [(i32, f64)])> = index
        .counts()
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > 0)
        .map(|(v, &m)| {
            stencil(m)
                .map(|s| (v, s))
                .ok_or(FinslerError::OrderTooHigh {
                    order: m as usize,
                    max: 4,
                })
        })
        .collect::<Result<_>>()?;

    if active.is_empty() {
        return f.eval(point);
    }

    let mut shifted = point.to_vec();
    let mut total = 0.0;
    let mut cursor = vec![0usize; active.len()];
    loop {
        let mut weight = 1.0;
        for (slot, &(v, s)) in active.iter().enumerate() {
            let (off, w) = s[cursor[slot]];
            shifted[v] = point[v] + off as f64 * h;
            weight *= w;
        }
        if weight != 0.0 {
            total += weight * f.eval(&shifted)?;
        }
        // odometer over stencil entries
        let mut slot = 0;
        loop {
            if slot == active.len() {
                return Ok(total / h.powi(index.order() as i32));
            }
            cursor[slot] += 1;
            if cursor[slot] < active[slot].1.len() {
                break;
            }
            cursor[slot] = 0;
            slot += 1;
        }
    }
}

/// Richardson-extrapolated estimate from steps `h` and `h/2`.
pub fn richardson<F: ScalarFn>(f: &F, point: &[f64], index: &MultiIndex, h: f64) -> Result<f64> {
    let coarse = central_difference(f, point, index, h)?;
    let fine = central_difference(f, point, index, 0.5 * h)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Second extrapolation level over steps `h`, `h/2` and `h/4`, error `O(h⁶)`.
/// Tolerates steps about twice [`default_step`].
pub fn richardson2<F: ScalarFn>(f: &F, point: &[f64], index: &MultiIndex, h: f64) -> Result<f64> {
    let coarse = richardson(f, point, index, h)?;
    let fine = richardson(f, point, index, 0.5 * h)?;
    Ok((16.0 * fine - coarse) / 15.0)
}

/// Step that balances truncation and round-off for a derivative of `order`.
pub fn default_step(order: usize) -> f64 {
    match order {
        0 | 1 => 1e-3,
        2 => 4e-3,
        3 => 1e-2,
        _ => 2e-2,
    }
}
