//! Symmetric tridiagonal matrices: products, `LDLᵀ` solves and inertia.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    /// `off[i]` couples rows `i` and `i+1`.
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn zeros(n: usize) -> Self {
        Self {
            diag: vec![0.0; n],
            off: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `Σ c_j·M_j`.
    pub fn combine(terms: &[(f64, &SymTridiag)]) -> Self {
        let n = terms[0].1.len();
        let mut out = Self::zeros(n);
        for (c, m) in terms {
            for i in 0..n {
                out.diag[i] += c * m.diag[i];
            }
            for i in 0..n.saturating_sub(1) {
                out.off[i] += c * m.off[i];
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut v = self.diag[i] * x[i];
                if i > 0 {
                    v += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    v += self.off[i] * x[i + 1];
                }
                v
            })
            .collect()
    }

    /// `xᵀ M x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let n = self.len();
        let mut s = 0.0;
        for i in 0..n {
            s += self.diag[i] * x[i] * x[i];
        }
        for i in 0..n.saturating_sub(1) {
            s += 2.0 * self.off[i] * x[i] * x[i + 1];
        }
        s
    }

    /// `LDLᵀ` pivots of `self − σ·other` (no pivoting). Zero pivots are
    /// nudged to a tiny negative value so the inertia count stays defined.
    pub fn ldlt_pivots(&self, sigma: f64, other: &SymTridiag) -> Vec<f64> {
        let n = self.len();
        let mut d = vec![0.0; n];
        let mut prev_off = 0.0;
        for i in 0..n {
            let a = self.diag[i] - sigma * other.diag[i];
            let mut di = if i == 0 {
                a
            } else {
                a - prev_off * prev_off / d[i - 1]
            };
            if di == 0.0 {
                di = -f64::MIN_POSITIVE;
            }
            d[i] = di;
            if i + 1 < n {
                prev_off = self.off[i] - sigma * other.off[i];
            }
        }
        d
    }

    /// Number of eigenvalues of the pencil `(self, other)` below `σ`, for
    /// positive definite `other` (Sylvester's law of inertia).
    pub fn count_below(&self, sigma: f64, other: &SymTridiag) -> usize {
        self.ldlt_pivots(sigma, other)
            .iter()
            .filter(|d| **d < 0.0)
            .count()
    }

    /// Solves `(self − σ·other) x = b` by `LDLᵀ`.
    pub fn solve_shifted(&self, sigma: f64, other: &SymTridiag, b: &[f64]) -> Vec<f64> {
        let n = self.len();
        let d = self.ldlt_pivots(sigma, other);
        let mut l = vec![0.0; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            l[i] = (self.off[i] - sigma * other.off[i]) / d[i];
        }
        let mut y = b.to_vec();
        for i in 1..n {
            y[i] -= l[i - 1] * y[i - 1];
        }
        for i in 0..n {
            y[i] /= d[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            y[i] -= l[i] * y[i + 1];
        }
        y
    }

    /// Solves `self·x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_shifted(0.0, &Self::zeros(self.len()), b)
    }

    /// Coordinate triplets `i j value` (1-based, both triangles).
    pub fn to_triplets(&self) -> String {
        let mut out = String::new();
        for i in 0..self.len() {
            if i > 0 {
                out.push_str(&format!("{} {} {:.16e}\n", i + 1, i, self.off[i - 1]));
            }
            out.push_str(&format!("{} {} {:.16e}\n", i + 1, i + 1, self.diag[i]));
            if i + 1 < self.len() {
                out.push_str(&format!("{} {} {:.16e}\n", i + 1, i + 2, self.off[i]));
            }
        }
        out
    }
}
