//! Dense min-plus (tropical) matrix arithmetic and minimum cycle means.
//!
//! Entries may be `+∞` (absent edge).  The n-th min-plus power of a one-step
//! cost matrix is the n-step minimal cost table, which is all these routines
//! exist to compute.

use rayon::prelude::*;

/// Square cost matrix over the min-plus semiring.
#[derive(Clone, Debug)]
pub struct CostMatrix {
    pub n: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn infinite(n: usize) -> Self {
        CostMatrix {
            n,
            data: vec![f64::INFINITY; n * n],
        }
    }

    /// Min-plus identity: zero diagonal, `+∞` elsewhere.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::infinite(n);
        for i in 0..n {
            m.set(i, i, 0.0);
        }
        m
    }

    pub fn from_rows(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n);
        CostMatrix { n, data }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// `(self ⊗ other)[i][j] = min_k self[i][k] + other[k][j]`.
    pub fn multiply(&self, other: &CostMatrix) -> CostMatrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let data: Vec<f64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                let mut row = vec![f64::INFINITY; n];
                for k in 0..n {
                    let a = self.at(i, k);
                    if !a.is_finite() {
                        continue;
                    }
                    let orow = other.row(k);
                    for (j, cell) in row.iter_mut().enumerate() {
                        let cand = a + orow[j];
                        if cand < *cell {
                            *cell = cand;
                        }
                    }
                }
                row.into_iter()
            })
            .collect();
        CostMatrix { n, data }
    }

    /// Entry-wise minimum.
    pub fn min_with(&self, other: &CostMatrix) -> CostMatrix {
        assert_eq!(self.n, other.n);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a.min(b))
            .collect();
        CostMatrix { n: self.n, data }
    }

    /// Largest decrease between two tables, ignoring `∞ → ∞` cells.
    pub fn max_decrease_from(&self, previous: &CostMatrix) -> f64 {
        self.data
            .iter()
            .zip(&previous.data)
            .map(|(&now, &before)| {
                if before.is_finite() && now.is_finite() {
                    (before - now).max(0.0)
                } else if before.is_infinite() && now.is_finite() {
                    f64::INFINITY
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    }

    /// Min-plus power by repeated squaring.
    pub fn power(&self, exponent: usize) -> CostMatrix {
        assert!(exponent >= 1);
        let mut result: Option<CostMatrix> = None;
        let mut base = self.clone();
        let mut e = exponent;
        while e > 0 {
            if e & 1 == 1 {
                result = Some(match result {
                    None => base.clone(),
                    Some(r) => r.multiply(&base),
                });
            }
            e >>= 1;
            if e > 0 {
                base = base.multiply(&base);
            }
        }
        result.unwrap()
    }

    /// Uniform shift of all finite entries.
    pub fn shift(&self, delta: f64) -> CostMatrix {
        let data = self
            .data
            .iter()
            .map(|&v| if v.is_finite() { v + delta } else { v })
            .collect();
        CostMatrix { n: self.n, data }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.at(i, i)).collect()
    }
}

/// Karp's minimum mean cycle.  Returns `+∞` when the graph has no cycle
/// (cannot happen for kernels, which keep their self loops finite).
pub fn min_mean_cycle(m: &CostMatrix) -> f64 {
    let n = m.n;
    // d[k][v] = minimal cost of a walk with exactly k edges ending at v,
    // starting anywhere.
    let mut d = vec![vec![f64::INFINITY; n]; n + 1];
    d[0] = vec![0.0; n];
    for k in 1..=n {
        let (head, tail) = d.split_at_mut(k);
        let prev = &head[k - 1];
        let cur = &mut tail[0];
        cur.par_iter_mut().enumerate().for_each(|(j, out)| {
            let mut best = f64::INFINITY;
            for i in 0..n {
                let p = prev[i];
                if p.is_finite() {
                    let cand = p + m.at(i, j);
                    if cand < best {
                        best = cand;
                    }
                }
            }
            *out = best;
        });
    }
    let mut best = f64::INFINITY;
    for v in 0..n {
        if !d[n][v].is_finite() {
            continue;
        }
        let mut worst = f64::NEG_INFINITY;
        for k in 0..n {
            if d[k][v].is_finite() {
                worst = worst.max((d[n][v] - d[k][v]) / (n - k) as f64);
            }
        }
        if worst > f64::NEG_INFINITY {
            best = best.min(worst);
        }
    }
    best
}

/// `min over 1 ≤ p ≤ horizon` of the min-plus powers of `m`, by doubling.
///
/// With no negative cycles the sequence stabilizes once the horizon covers
/// the graph diameter; the returned flag reports whether the last doubling
/// still changed anything by more than `tol`.
pub fn min_over_powers(m: &CostMatrix, horizon: usize, tol: f64) -> (CostMatrix, bool) {
    let mut acc = m.clone();
    let mut reached = 1usize;
    let mut stable = false;
    while reached < horizon {
        let next = acc.min_with(&acc.multiply(&acc));
        let change = next.max_decrease_from(&acc);
        acc = next;
        reached *= 2;
        if change <= tol {
            stable = true;
            break;
        }
    }
    (acc, stable)
}
