//! Dense two-phase revised simplex for equality-form programs
//! `min cᵀx  s.t.  A x = b,  x ≥ 0`.
//!
//! Sized for occupation-measure problems: tens of thousands of columns
//! against a few dozen rows, so the basis inverse is kept explicitly and
//! pricing is a dense pass over the column-major constraint matrix.
//!
//! Pivoting is deterministic: Dantzig pricing with lowest-index tie breaks,
//! falling back to Bland's rule whenever the objective stalls, which
//! guarantees termination on the heavily degenerate programs the flat of the
//! alpha function produces.

use crate::error::{Error, Result};

const REDUCED_COST_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-10;
const RATIO_TIE_TOL: f64 = 1e-9;
const STALL_LIMIT: usize = 32;
const REFACTOR_EVERY: usize = 64;
const MAX_PIVOTS: usize = 200_000;

/// Equality-form linear program with dense columns.
#[derive(Clone, Debug)]
pub struct DenseLp {
    pub num_rows: usize,
    pub num_cols: usize,
    /// Column-major constraint entries, column `j` at `[j*m .. (j+1)*m]`.
    pub columns: Vec<f64>,
    pub objective: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl DenseLp {
    pub fn new(num_rows: usize, num_cols: usize) -> Self {
        DenseLp {
            num_rows,
            num_cols,
            columns: vec![0.0; num_rows * num_cols],
            objective: vec![0.0; num_cols],
            rhs: vec![0.0; num_rows],
        }
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j * self.num_rows..(j + 1) * self.num_rows]
    }

    pub fn column_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.columns[j * self.num_rows..(j + 1) * self.num_rows]
    }
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective_value: f64,
    pub pivots: usize,
    /// Largest violation of `A x = b` at the returned point.
    pub residual: f64,
}

struct Tableau<'a> {
    lp: &'a DenseLp,
    m: usize,
    /// Basis variable per row; ids `>= lp.num_cols` are artificials.
    basis: Vec<usize>,
    binv: Vec<f64>,
    x_basic: Vec<f64>,
    rhs: Vec<f64>,
    pivots: usize,
}

impl<'a> Tableau<'a> {
    fn new(lp: &'a DenseLp, rhs: Vec<f64>) -> Self {
        let m = lp.num_rows;
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        Tableau {
            lp,
            m,
            basis: (lp.num_cols..lp.num_cols + m).collect(),
            binv: binv.clone(),
            x_basic: rhs.clone(),
            rhs,
            pivots: 0,
        }
    }

    /// Column of A (artificials are unit vectors) premultiplied by B⁻¹.
    fn basis_direction(&self, j: usize, out: &mut [f64]) {
        let m = self.m;
        if j >= self.lp.num_cols {
            let r = j - self.lp.num_cols;
            for i in 0..m {
                out[i] = self.binv[i * m + r];
            }
            return;
        }
        let col = self.lp.column(j);
        for i in 0..m {
            let mut acc = 0.0;
            let row = &self.binv[i * m..(i + 1) * m];
            for k in 0..m {
                acc += row[k] * col[k];
            }
            out[i] = acc;
        }
    }

    fn simplex_multipliers(&self, cost: &dyn Fn(usize) -> f64, out: &mut [f64]) {
        let m = self.m;
        for (k, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in 0..m {
                acc += cost(self.basis[i]) * self.binv[i * m + k];
            }
            *slot = acc;
        }
    }

    fn reduced_cost(&self, j: usize, y: &[f64], cost: &dyn Fn(usize) -> f64) -> f64 {
        if j >= self.lp.num_cols {
            return cost(j) - y[j - self.lp.num_cols];
        }
        let col = self.lp.column(j);
        let mut dot = 0.0;
        for i in 0..self.m {
            dot += y[i] * col[i];
        }
        cost(j) - dot
    }

    fn pivot(&mut self, entering: usize, leaving_row: usize, direction: &[f64]) {
        let m = self.m;
        let piv = direction[leaving_row];
        let theta = self.x_basic[leaving_row] / piv;
        for i in 0..m {
            if i != leaving_row {
                self.x_basic[i] -= theta * direction[i];
                if self.x_basic[i] < 0.0 && self.x_basic[i] > -1e-11 {
                    self.x_basic[i] = 0.0;
                }
            }
        }
        self.x_basic[leaving_row] = theta;

        let inv_piv = 1.0 / piv;
        for k in 0..m {
            self.binv[leaving_row * m + k] *= inv_piv;
        }
        for i in 0..m {
            if i == leaving_row {
                continue;
            }
            let factor = direction[i];
            if factor != 0.0 {
                for k in 0..m {
                    self.binv[i * m + k] -= factor * self.binv[leaving_row * m + k];
                }
            }
        }
        self.basis[leaving_row] = entering;
        self.pivots += 1;
        if self.pivots % REFACTOR_EVERY == 0 {
            self.refactor();
        }
    }

    /// Rebuild B⁻¹ and the basic values from scratch (Gauss-Jordan with
    /// partial pivoting).
    fn refactor(&mut self) {
        let m = self.m;
        let mut aug = vec![0.0; m * 2 * m];
        for (r, &var) in self.basis.iter().enumerate() {
            if var >= self.lp.num_cols {
                aug[(var - self.lp.num_cols) * 2 * m + r] = 1.0;
            } else {
                let col = self.lp.column(var);
                for i in 0..m {
                    aug[i * 2 * m + r] = col[i];
                }
            }
        }
        for i in 0..m {
            aug[i * 2 * m + m + i] = 1.0;
        }
        for col in 0..m {
            let mut best = col;
            for r in col + 1..m {
                if aug[r * 2 * m + col].abs() > aug[best * 2 * m + col].abs() {
                    best = r;
                }
            }
            if best != col {
                // row swaps are ordinary row operations on [B | I]; the
                // right block still converges to B⁻¹ and the basis order is
                // untouched
                for k in 0..2 * m {
                    aug.swap(col * 2 * m + k, best * 2 * m + k);
                }
            }
            let piv = aug[col * 2 * m + col];
            if piv.abs() < 1e-14 {
                continue; // singular direction; leave as is
            }
            let inv = 1.0 / piv;
            for k in 0..2 * m {
                aug[col * 2 * m + k] *= inv;
            }
            for r in 0..m {
                if r != col {
                    let f = aug[r * 2 * m + col];
                    if f != 0.0 {
                        for k in 0..2 * m {
                            aug[r * 2 * m + k] -= f * aug[col * 2 * m + k];
                        }
                    }
                }
            }
        }
        for i in 0..m {
            for k in 0..m {
                self.binv[i * m + k] = aug[i * 2 * m + m + k];
            }
        }
        for i in 0..m {
            let mut acc = 0.0;
            for k in 0..m {
                acc += self.binv[i * m + k] * self.rhs[k];
            }
            self.x_basic[i] = acc.max(0.0);
        }
    }

    fn objective_of(&self, cost: &dyn Fn(usize) -> f64) -> f64 {
        self.basis
            .iter()
            .zip(&self.x_basic)
            .map(|(&var, &val)| cost(var) * val)
            .sum()
    }

    /// Run simplex iterations for the given cost, pricing only columns below
    /// `price_limit` (this keeps artificials out of phase 2).
    fn optimize(&mut self, cost: &dyn Fn(usize) -> f64, price_limit: usize) -> Result<()> {
        let m = self.m;
        let mut y = vec![0.0; m];
        let mut direction = vec![0.0; m];
        let mut stall = 0usize;
        let mut last_obj = self.objective_of(cost);

        loop {
            if self.pivots > MAX_PIVOTS {
                return Err(Error::IterationLimit(self.pivots));
            }
            self.simplex_multipliers(cost, &mut y);
            let bland = stall >= STALL_LIMIT;

            let mut entering: Option<usize> = None;
            let mut best = -REDUCED_COST_TOL;
            for j in 0..price_limit {
                let r = self.reduced_cost(j, &y, cost);
                if r < best {
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = r;
                }
            }
            let Some(entering) = entering else {
                return Ok(()); // optimal
            };

            self.basis_direction(entering, &mut direction);
            let mut leaving: Option<usize> = None;
            let mut theta = f64::INFINITY;
            for i in 0..m {
                if direction[i] > PIVOT_TOL {
                    let ratio = self.x_basic[i] / direction[i];
                    if ratio < theta - RATIO_TIE_TOL {
                        theta = ratio;
                        leaving = Some(i);
                    } else if ratio <= theta + RATIO_TIE_TOL {
                        // tie: keep the row holding the lowest variable id
                        if let Some(cur) = leaving {
                            if self.basis[i] < self.basis[cur] {
                                leaving = Some(i);
                            }
                        }
                    }
                }
            }
            let Some(leaving_row) = leaving else {
                return Err(Error::Unbounded(format!(
                    "column {entering} improves without bound"
                )));
            };

            self.pivot(entering, leaving_row, &direction);
            let obj = self.objective_of(cost);
            if obj < last_obj - 1e-13 * (1.0 + last_obj.abs()) {
                stall = 0;
                last_obj = obj;
            } else {
                stall += 1;
            }
        }
    }
}

/// Solve the program.  Degenerate, infeasible and unbounded inputs are
/// reported through the error type.
pub fn solve(lp: &DenseLp) -> Result<LpSolution> {
    let m = lp.num_rows;
    let n = lp.num_cols;
    if lp.objective.len() != n || lp.rhs.len() != m || lp.columns.len() != m * n {
        return Err(Error::InvalidArgument("lp dimension mismatch".to_string()));
    }

    // Normalize to b >= 0 by flipping rows.
    let mut work = lp.clone();
    for i in 0..m {
        if work.rhs[i] < 0.0 {
            work.rhs[i] = -work.rhs[i];
            for j in 0..n {
                work.columns[j * m + i] = -work.columns[j * m + i];
            }
        }
    }

    let rhs = work.rhs.clone();
    let mut tab = Tableau::new(&work, rhs);

    // Phase 1: minimize the artificial mass.
    let phase1 = |var: usize| if var >= n { 1.0 } else { 0.0 };
    tab.optimize(&phase1, n)?;
    let infeas = tab.objective_of(&phase1);
    if infeas > 1e-7 {
        return Err(Error::Infeasible(format!(
            "phase-1 residual {infeas:.3e}"
        )));
    }

    // Drive surviving artificials out of the basis where possible.  A row
    // whose direction is zero across all real columns is redundant; its
    // artificial stays pinned at zero and can never move again.
    let mut direction = vec![0.0; m];
    for row in 0..m {
        if tab.basis[row] < n {
            continue;
        }
        let mut replacement = None;
        for j in 0..n {
            tab.basis_direction(j, &mut direction);
            if direction[row].abs() > 1e-8 && !tab.basis.contains(&j) {
                replacement = Some(j);
                break;
            }
        }
        if let Some(j) = replacement {
            tab.basis_direction(j, &mut direction);
            tab.pivot(j, row, &direction);
            tab.x_basic[row] = 0.0;
        }
    }

    // Phase 2.
    let objective = work.objective.clone();
    let phase2 = move |var: usize| if var < n { objective[var] } else { 0.0 };
    tab.optimize(&phase2, n)?;

    let mut x = vec![0.0; n];
    for (row, &var) in tab.basis.iter().enumerate() {
        if var < n {
            x[var] = tab.x_basic[row].max(0.0);
        }
    }
    let mut residual = 0.0f64;
    for i in 0..m {
        let mut acc = 0.0;
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                acc += lp.columns[j * m + i] * xj;
            }
        }
        residual = residual.max((acc - lp.rhs[i]).abs());
    }
    let objective_value = x
        .iter()
        .zip(&lp.objective)
        .map(|(&xj, &cj)| xj * cj)
        .sum();
    Ok(LpSolution {
        x,
        objective_value,
        pivots: tab.pivots,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lp_from(rows: &[&[f64]], objective: &[f64], rhs: &[f64]) -> DenseLp {
        let m = rows.len();
        let n = objective.len();
        let mut lp = DenseLp::new(m, n);
        lp.objective = objective.to_vec();
        lp.rhs = rhs.to_vec();
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                lp.column_mut(j)[i] = v;
            }
        }
        lp
    }

    #[test]
    fn textbook_optimum() {
        // min -x - y  s.t.  x + 2y + s1 = 4, 3x + y + s2 = 6
        let lp = lp_from(
            &[&[1.0, 2.0, 1.0, 0.0], &[3.0, 1.0, 0.0, 1.0]],
            &[-1.0, -1.0, 0.0, 0.0],
            &[4.0, 6.0],
        );
        let sol = solve(&lp).unwrap();
        assert!((sol.objective_value + 2.8).abs() < 1e-9, "{}", sol.objective_value);
        assert!((sol.x[0] - 1.6).abs() < 1e-9);
        assert!((sol.x[1] - 1.2).abs() < 1e-9);
        assert!(sol.residual < 1e-9);
    }

    #[test]
    fn detects_infeasible() {
        // x1 + x2 = -1 with x >= 0
        let lp = lp_from(&[&[1.0, 1.0]], &[1.0, 1.0], &[-1.0]);
        assert!(matches!(solve(&lp), Err(Error::Infeasible(_))));
    }

    #[test]
    fn detects_unbounded() {
        // min -x1 with x2 = 1: x1 unconstrained above
        let lp = lp_from(&[&[0.0, 1.0]], &[-1.0, 0.0], &[1.0]);
        assert!(matches!(solve(&lp), Err(Error::Unbounded(_))));
    }

    #[test]
    fn degenerate_vertex() {
        // redundant constraints meeting at the optimum
        let lp = lp_from(
            &[
                &[1.0, 1.0, 1.0, 0.0, 0.0],
                &[1.0, 1.0, 0.0, 1.0, 0.0],
                &[1.0, 0.0, 0.0, 0.0, 1.0],
            ],
            &[-2.0, -1.0, 0.0, 0.0, 0.0],
            &[1.0, 1.0, 1.0],
        );
        let sol = solve(&lp).unwrap();
        assert!((sol.objective_value + 2.0).abs() < 1e-9);
    }

    #[test]
    fn redundant_row_survives() {
        // second row is a copy of the first
        let lp = lp_from(
            &[&[1.0, 1.0], &[1.0, 1.0]],
            &[1.0, 2.0],
            &[1.0, 1.0],
        );
        let sol = solve(&lp).unwrap();
        assert!((sol.objective_value - 1.0).abs() < 1e-9);
        assert!((sol.x[0] - 1.0).abs() < 1e-9);
    }

    /// Brute-force oracle: enumerate all candidate bases.
    fn enumerate_optimum(lp: &DenseLp) -> Option<f64> {
        let m = lp.num_rows;
        let n = lp.num_cols;
        assert_eq!(m, 2);
        let mut best: Option<f64> = None;
        for a in 0..n {
            for b in 0..n {
                if a == b {
                    continue;
                }
                let (a11, a21) = (lp.column(a)[0], lp.column(a)[1]);
                let (a12, a22) = (lp.column(b)[0], lp.column(b)[1]);
                let det = a11 * a22 - a12 * a21;
                if det.abs() < 1e-9 {
                    continue;
                }
                let xa = (lp.rhs[0] * a22 - lp.rhs[1] * a12) / det;
                let xb = (a11 * lp.rhs[1] - a21 * lp.rhs[0]) / det;
                if xa >= -1e-9 && xb >= -1e-9 {
                    let obj = lp.objective[a] * xa + lp.objective[b] * xb;
                    best = Some(best.map_or(obj, |cur: f64| cur.min(obj)));
                }
            }
        }
        best
    }

    proptest! {
        #[test]
        fn matches_vertex_enumeration(
            cols in proptest::collection::vec(0.1..2.0f64, 12),
            obj in proptest::collection::vec(0.0..1.0f64, 6),
            x0 in 0.1..2.0f64, x1 in 0.1..2.0f64,
        ) {
            // feasible by construction: b = A (x0, x1, 0, ...)
            let mut lp = DenseLp::new(2, 6);
            lp.columns = cols;
            lp.objective = obj;
            lp.rhs = vec![
                lp.column(0)[0] * x0 + lp.column(1)[0] * x1,
                lp.column(0)[1] * x0 + lp.column(1)[1] * x1,
            ];
            let sol = solve(&lp).unwrap();
            let oracle = enumerate_optimum(&lp).expect("feasible program has a vertex");
            prop_assert!((sol.objective_value - oracle).abs() <= 1e-7,
                "simplex {} vs enumeration {}", sol.objective_value, oracle);
        }
    }
}
