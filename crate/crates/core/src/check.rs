//! Residual bookkeeping shared by every verification report.

use serde::Serialize;

/// `A = B` holds when `max|A − B| < abs + rel · max(1, ‖A‖, ‖B‖)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-8,
            rel: 1e-7,
        }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Tolerance {
        Tolerance { abs, rel }
    }

    pub fn threshold(&self, scale: f64) -> f64 {
        self.abs + self.rel * scale.max(1.0)
    }

    pub fn holds(&self, residual: f64, scale: f64) -> bool {
        residual < self.threshold(scale)
    }

    /// Both parts multiplied by `factor`; hypotheses use `0.1`.
    pub fn scaled(&self, factor: f64) -> Tolerance {
        Tolerance {
            abs: self.abs * factor,
            rel: self.rel * factor,
        }
    }
}

/// One named residual with the threshold it was judged against.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    /// `max(‖A‖, ‖B‖)` over the corpus.
    pub scale: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, residual: f64, scale: f64, tol: &Tolerance) -> Check {
        let tolerance = tol.threshold(scale);
        Check {
            name: name.into(),
            residual,
            scale,
            tolerance,
            pass: residual < tolerance,
        }
    }
}

/// Running `(max residual, max scale)` over a corpus, keyed by name in insertion order.
#[derive(Debug, Clone, Default)]
pub struct Residuals {
    entries: Vec<(String, f64, f64)>,
}

impl Residuals {
    pub fn new() -> Residuals {
        Residuals::default()
    }

    /// Records `max|a − b|` with scale `max(‖a‖, ‖b‖)`.
    pub fn compare(&mut self, name: &str, a: &[f64], b: &[f64]) {
        assert_eq!(a.len(), b.len(), "{name}: shape mismatch");
        let residual = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        let scale = crate::tensor::max_abs(a).max(crate::tensor::max_abs(b));
        self.record(name, residual, scale);
    }

    /// Records `max|a|` against zero.
    pub fn zero(&mut self, name: &str, a: &[f64]) {
        self.record(name, crate::tensor::max_abs(a), 0.0);
    }

    pub fn record(&mut self, name: &str, residual: f64, scale: f64) {
        // NaN must never look like a pass
        let residual = if residual.is_nan() { f64::INFINITY } else { residual };
        match self.entries.iter_mut().find(|e| e.0 == name) {
            Some(e) => {
                e.1 = e.1.max(residual);
                e.2 = e.2.max(scale);
            }
            None => self.entries.push((name.to_string(), residual, scale)),
        }
    }

    pub fn merge(mut self, other: Residuals) -> Residuals {
        for (name, r, s) in other.entries {
            self.record(&name, r, s);
        }
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.0 == name).map(|e| e.1)
    }

    pub fn into_checks(self, tol: &Tolerance) -> Vec<Check> {
        self.entries
            .into_iter()
            .map(|(name, r, s)| Check::new(name, r, s, tol))
            .collect()
    }
}
