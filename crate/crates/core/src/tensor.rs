//! Coordinate components of π-tensor fields at a point.
//!
//! Slot order follows the argument order of the multilinear map; for
//! vector-valued maps such as `T(X, Y)` or `R(X, Y)Z` the output index is the
//! last slot and is contravariant.

use serde::Serialize;

use crate::diffcore::Jet;
use crate::error::{FinslerError, Result};
use crate::metric::JetPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variance {
    Covariant,
    Contravariant,
}

/// Symmetry declared on a tensor and verified on construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    Symmetric(usize, usize),
    Antisymmetric(usize, usize),
}

const SYMMETRY_TOL: f64 = 1e-10;

/// Dense component array of a tensor at one point.
#[derive(Debug, Clone)]
pub struct PointTensor {
    n: usize,
    slots: Vec<Variance>,
    components: Vec<f64>,
    at: JetPoint,
}

impl PointTensor {
    pub fn new(
        n: usize,
        slots: Vec<Variance>,
        components: Vec<f64>,
        at: JetPoint,
        symmetries: &[Symmetry],
    ) -> Result<PointTensor> {
        let expected = n.pow(slots.len() as u32);
        if components.len() != expected {
            return Err(FinslerError::Dimension(format!(
                "rank-{} tensor in dimension {n} needs {expected} components, got {}",
                slots.len(),
                components.len()
            )));
        }
        let tensor = PointTensor {
            n,
            slots,
            components,
            at,
        };
        for &sym in symmetries {
            let defect = tensor.symmetry_defect(sym);
            if !(defect < SYMMETRY_TOL) {
                return Err(FinslerError::InvalidArgument(format!(
                    "declared {sym:?} violated by {defect:e}"
                )));
            }
        }
        Ok(tensor)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.slots.len()
    }

    pub fn slots(&self) -> &[Variance] {
        &self.slots
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn at(&self) -> &JetPoint {
        &self.at
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.components[flat_index(self.n, idx)]
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.components)
    }

    /// Largest `|A_{..i..j..} ∓ A_{..j..i..}|`.
    pub fn symmetry_defect(&self, sym: Symmetry) -> f64 {
        let (a, b, sign) = match sym {
            Symmetry::Symmetric(a, b) => (a, b, -1.0),
            Symmetry::Antisymmetric(a, b) => (a, b, 1.0),
        };
        let mut worst: f64 = 0.0;
        for (k, idx) in MultiIndexIter::new(self.n, self.rank()).enumerate() {
            let mut swapped = idx.clone();
            swapped.swap(a, b);
            let other = self.components[flat_index(self.n, &swapped)];
            worst = worst.max((self.components[k] + sign * other).abs());
        }
        worst
    }
}

/// A tensor whose components are jets, so it can still be differentiated.
#[derive(Debug, Clone)]
pub struct JetTensor {
    pub n: usize,
    pub slots: Vec<Variance>,
    pub comps: Vec<Jet>,
}

impl JetTensor {
    pub fn new(n: usize, slots: Vec<Variance>, comps: Vec<Jet>) -> JetTensor {
        assert_eq!(comps.len(), n.pow(slots.len() as u32));
        JetTensor { n, slots, comps }
    }

    pub fn rank(&self) -> usize {
        self.slots.len()
    }

    pub fn at(&self, idx: &[usize]) -> &Jet {
        &self.comps[flat_index(self.n, idx)]
    }

    pub fn order(&self) -> usize {
        self.comps.iter().map(Jet::order).min().unwrap_or(0)
    }

    pub fn values(&self) -> Vec<f64> {
        self.comps.iter().map(Jet::value).collect()
    }

    pub fn to_point(&self, at: &JetPoint) -> PointTensor {
        PointTensor {
            n: self.n,
            slots: self.slots.clone(),
            components: self.values(),
            at: at.clone(),
        }
    }

    pub fn map(&self, f: impl Fn(&Jet) -> Jet) -> JetTensor {
        JetTensor {
            n: self.n,
            slots: self.slots.clone(),
            comps: self.comps.iter().map(f).collect(),
        }
    }

    pub fn zip(&self, other: &JetTensor, f: impl Fn(&Jet, &Jet) -> Jet) -> JetTensor {
        assert_eq!(self.comps.len(), other.comps.len());
        JetTensor {
            n: self.n,
            slots: self.slots.clone(),
            comps: self.comps.iter().zip(&other.comps).map(|(a, b)| f(a, b)).collect(),
        }
    }

    /// `Σ_m W[.., m, ..] vᵐ` over `slot`, which is removed.
    pub fn contract(&self, slot: usize, v: &[Jet]) -> JetTensor {
        let n = self.n;
        let rank = self.rank();
        let mut slots = self.slots.clone();
        slots.remove(slot);
        let mut comps = Vec::with_capacity(self.comps.len() / n);
        for idx in MultiIndexIter::new(n, rank - 1) {
            let mut full = idx.clone();
            full.insert(slot, 0);
            let mut acc = &self.comps[flat_index(n, &full)] * &v[0];
            for m in 1..n {
                full[slot] = m;
                acc = acc + &self.comps[flat_index(n, &full)] * &v[m];
            }
            comps.push(acc);
        }
        JetTensor { n, slots, comps }
    }

    /// Applies the matrix `mat` (flat `[m][d]`) to `slot`: `W'[.., d, ..] = Σ_m mat[m][d] W[.., m, ..]`.
    /// With `g` this lowers a contravariant slot, with `g⁻¹` it raises a covariant one.
    pub fn transform_slot(&self, slot: usize, mat: &[Jet], variance: Variance) -> JetTensor {
        let n = self.n;
        let mut slots = self.slots.clone();
        slots[slot] = variance;
        let mut comps = Vec::with_capacity(self.comps.len());
        for idx in MultiIndexIter::new(n, self.rank()) {
            let d = idx[slot];
            let mut src = idx.clone();
            src[slot] = 0;
            let mut acc = &mat[d] * &self.comps[flat_index(n, &src)];
            for m in 1..n {
                src[slot] = m;
                acc = acc + &mat[m * n + d] * &self.comps[flat_index(n, &src)];
            }
            comps.push(acc);
        }
        JetTensor { n, slots, comps }
    }

    /// Reorders slots: slot `s` of the result is slot `perm[s]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> JetTensor {
        let n = self.n;
        assert_eq!(perm.len(), self.rank());
        let slots = perm.iter().map(|&s| self.slots[s]).collect();
        let mut src = vec![0; perm.len()];
        let comps = MultiIndexIter::new(n, perm.len())
            .map(|idx| {
                for (s, &p) in perm.iter().enumerate() {
                    src[p] = idx[s];
                }
                self.comps[flat_index(n, &src)].clone()
            })
            .collect();
        JetTensor { n, slots, comps }
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().fold(0.0, |m, c| m.max(c.value().abs()))
    }
}

/// Row-major offset of `idx` in an `n^rank` array.
pub fn flat_index(n: usize, idx: &[usize]) -> usize {
    idx.iter().fold(0, |acc, &i| acc * n + i)
}

pub fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Iterates `[0..n)^rank` in row-major order.
#[derive(Debug, Clone)]
pub struct MultiIndexIter {
    n: usize,
    current: Vec<usize>,
    done: bool,
}

impl MultiIndexIter {
    pub fn new(n: usize, rank: usize) -> MultiIndexIter {
        MultiIndexIter {
            n,
            current: vec![0; rank],
            done: n == 0,
        }
    }
}

impl Iterator for MultiIndexIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        let mut pos = self.current.len();
        loop {
            if pos == 0 {
                self.done = true;
                break;
            }
            pos -= 1;
            self.current[pos] += 1;
            if self.current[pos] < self.n {
                break;
            }
            self.current[pos] = 0;
        }
        Some(out)
    }
}
