//! Critical values α(c), the conjugate β(h), and minimizing occupation
//! measures.
//!
//! Two independent routes to α(c):
//!
//! * [`alpha_lax_oleinik`] — value iteration `u_{n+1}(j) = min_i u_n(i) +
//!   a[i][j]`; the per-step decrement of `min u` converges to `−α·τ`.
//! * [`alpha_lp`] — a linear program over nonnegative weights on the phase
//!   grid, minimizing `Σ μ (L − c·v)` subject to unit mass and closedness
//!   against the truncated test basis `{sin kx, cos kx : k ≤ K}`.
//!
//! The two discretize differently, so their agreement is a genuine
//! cross-check rather than a tautology.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::{ActionKernel, PhaseGrid};
use crate::model::{CohomologyClass, LagrangianSpec};
use crate::simplex::{self, DenseLp};

/// Nonnegative weights on the `(x_i, v_j)` grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OccupationMeasure {
    pub nx: usize,
    pub nv: usize,
    /// Row-major weights, `weights[i * nv + j]`.
    pub weights: Vec<f64>,
    pub total_mass: f64,
    /// `ρ(μ) = Σ μ[i][j] v_j`, the homology drift of the measure.
    pub rotation: f64,
}

impl OccupationMeasure {
    pub fn from_weights(grid: &PhaseGrid, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.nx * grid.nv {
            return Err(Error::InvalidArgument(
                "weight vector does not match grid".to_string(),
            ));
        }
        let total_mass: f64 = weights.iter().sum();
        if !(total_mass > 0.0) {
            return Err(Error::DegenerateMeasure(total_mass));
        }
        let mut rotation = 0.0;
        for i in 0..grid.nx {
            for j in 0..grid.nv {
                rotation += weights[i * grid.nv + j] * grid.velocity(j);
            }
        }
        Ok(OccupationMeasure {
            nx: grid.nx,
            nv: grid.nv,
            weights,
            total_mass,
            rotation,
        })
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.nv + j]
    }

    /// Cells carrying positive weight, heaviest first.
    pub fn support_cells(&self) -> Vec<(usize, usize, f64)> {
        let mut cells: Vec<(usize, usize, f64)> = Vec::new();
        for i in 0..self.nx {
            for j in 0..self.nv {
                let w = self.weight(i, j);
                if w > 0.0 {
                    cells.push((i, j, w));
                }
            }
        }
        cells.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
        cells
    }

    /// Worst closedness residual `|Σ μ φ'_k(x) v|` over the test basis.
    pub fn closedness_residual(&self, grid: &PhaseGrid, fourier_order: usize) -> f64 {
        let mut worst = 0.0f64;
        for k in 1..=fourier_order {
            let kf = k as f64;
            let mut s_sin = 0.0; // test function sin(kx), derivative k cos(kx)
            let mut s_cos = 0.0; // test function cos(kx), derivative -k sin(kx)
            for i in 0..self.nx {
                let x = grid.position(i);
                let mut flux = 0.0;
                for j in 0..self.nv {
                    flux += self.weight(i, j) * grid.velocity(j);
                }
                s_sin += kf * (kf * x).cos() * flux;
                s_cos += -kf * (kf * x).sin() * flux;
            }
            worst = worst.max(s_sin.abs()).max(s_cos.abs());
        }
        worst
    }

    /// Mass and closedness invariants at the given tolerance.
    pub fn validate(&self, grid: &PhaseGrid, fourier_order: usize, tol: f64) -> Result<()> {
        if (self.total_mass - 1.0).abs() > 1e-9 {
            return Err(Error::DegenerateMeasure(self.total_mass));
        }
        let resid = self.closedness_residual(grid, fourier_order);
        if resid > tol {
            return Err(Error::InvalidArgument(format!(
                "closedness residual {resid:.3e} exceeds {tol:.1e}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    LaxOleinik,
    Lp,
}

/// Outcome of one critical-value computation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriticalValueReport {
    pub alpha: f64,
    pub method: Method,
    /// Method-specific convergence diagnostic: decrement oscillation for the
    /// value iteration, constraint residual for the LP.
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measure: Option<OccupationMeasure>,
}

/// Critical value by Lax-Oleinik value iteration.
///
/// Starts from `u ≡ 0`, runs `max_iters` sweeps, and estimates the per-step
/// decrement from the second half of the run:
/// `α̂ = −(min u_N − min u_{N/2}) / ((N − N/2)·τ)`.  The residual is the
/// oscillation of the last ten one-step decrements; above `tol` the report
/// is flagged as not converged rather than silently returned.
pub fn alpha_lax_oleinik(
    kernel: &ActionKernel,
    grid: &PhaseGrid,
    max_iters: usize,
    tol: f64,
) -> Result<CriticalValueReport> {
    grid.check_connected()?;
    if max_iters < 4 {
        return Err(Error::InvalidArgument(
            "need at least 4 iterations".to_string(),
        ));
    }
    let matrix = kernel.to_cost_matrix(0.0);
    let n = matrix.n;
    let mut u = vec![0.0f64; n];
    let mut next = vec![0.0f64; n];
    let mut min_history = Vec::with_capacity(max_iters + 1);
    min_history.push(0.0);
    for _ in 0..max_iters {
        for (j, slot) in next.iter_mut().enumerate() {
            let mut best = f64::INFINITY;
            for (i, &ui) in u.iter().enumerate() {
                let a = matrix.at(i, j);
                if a.is_finite() {
                    let cand = ui + a;
                    if cand < best {
                        best = cand;
                    }
                }
            }
            *slot = best;
        }
        std::mem::swap(&mut u, &mut next);
        min_history.push(u.iter().copied().fold(f64::INFINITY, f64::min));
    }
    let half = max_iters / 2;
    let span = (max_iters - half) as f64;
    let decrement = (min_history[max_iters] - min_history[half]) / span;
    let alpha = -decrement / kernel.tau;

    let tail = &min_history[max_iters - 10..];
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for w in tail.windows(2) {
        let d = w[1] - w[0];
        lo = lo.min(d);
        hi = hi.max(d);
    }
    let residual = hi - lo;

    Ok(CriticalValueReport {
        alpha,
        method: Method::LaxOleinik,
        residual,
        converged: residual <= tol,
        iterations: max_iters,
        measure: None,
    })
}

/// Build the occupation-measure program for `(spec, grid, c)`.
fn build_occupation_lp(
    spec: &LagrangianSpec,
    grid: &PhaseGrid,
    c: CohomologyClass,
    fourier_order: usize,
) -> DenseLp {
    let nx = grid.nx;
    let nv = grid.nv;
    let m = 2 * fourier_order + 1;
    let mut lp = DenseLp::new(m, nx * nv);
    lp.rhs[0] = 1.0;
    for i in 0..nx {
        let x = grid.position(i);
        let mut basis = Vec::with_capacity(m);
        basis.push(1.0);
        for k in 1..=fourier_order {
            let kf = k as f64;
            basis.push(kf * (kf * x).cos());
            basis.push(-kf * (kf * x).sin());
        }
        for j in 0..nv {
            let v = grid.velocity(j);
            let col = lp.column_mut(i * nv + j);
            col[0] = 1.0;
            for (r, &bk) in basis.iter().enumerate().skip(1) {
                col[r] = bk * v;
            }
            lp.objective[i * nv + j] = spec.lagrangian(x, v) - c.value() * v;
        }
    }
    lp
}

/// Critical value by the closed-measure linear program.
///
/// Minimizes `Σ μ (L − c·v)` over unit-mass nonnegative grid measures whose
/// flux is orthogonal to the derivatives of `{sin kx, cos kx : k ≤ K}`;
/// `α̂ = −optimum` and the optimal vertex is returned as the measure.
pub fn alpha_lp(
    spec: &LagrangianSpec,
    grid: &PhaseGrid,
    c: CohomologyClass,
    fourier_order: usize,
) -> Result<CriticalValueReport> {
    spec.validate()?;
    grid.validate()?;
    if fourier_order < 1 {
        return Err(Error::InvalidArgument(
            "fourier order must be at least 1".to_string(),
        ));
    }
    let lp = build_occupation_lp(spec, grid, c, fourier_order);
    // Infeasibility would contradict the uniform rest measure; surface it.
    let solution = simplex::solve(&lp)?;
    let mut weights = solution.x;
    for w in weights.iter_mut() {
        if *w < 0.0 {
            *w = 0.0;
        }
    }
    let measure = OccupationMeasure::from_weights(grid, weights)?;
    let residual = solution
        .residual
        .max((measure.total_mass - 1.0).abs());
    Ok(CriticalValueReport {
        alpha: -solution.objective_value,
        method: Method::Lp,
        residual,
        converged: residual <= 1e-7,
        iterations: solution.pivots,
        measure: Some(measure),
    })
}

/// β estimate from sampled α values.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BetaEstimate {
    pub value: f64,
    pub attained_at: f64,
    /// The maximum sat on the boundary of the sampled c-range, so the value
    /// is only a lower bound for the true conjugate.
    pub at_boundary: bool,
}

/// Legendre-Fenchel conjugate `β̂(h) = max_c (c·h − α̂(c))` over the sample
/// table.
pub fn beta_fenchel(alpha_samples: &[(f64, f64)], h: f64) -> Result<BetaEstimate> {
    if alpha_samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut best = f64::NEG_INFINITY;
    let mut best_c = alpha_samples[0].0;
    let mut c_lo = f64::INFINITY;
    let mut c_hi = f64::NEG_INFINITY;
    for &(c, alpha) in alpha_samples {
        c_lo = c_lo.min(c);
        c_hi = c_hi.max(c);
        let val = c * h - alpha;
        if val > best {
            best = val;
            best_c = c;
        }
    }
    Ok(BetaEstimate {
        value: best,
        attained_at: best_c,
        at_boundary: best_c == c_lo || best_c == c_hi,
    })
}

/// One-sided slopes `[left, right]` of sampled α at an interior class.
///
/// Uses the nearest sample on each side; fails when `c` sits on the boundary
/// of the sampled range.
pub fn subdifferential_alpha(alpha_samples: &[(f64, f64)], c: f64) -> Result<(f64, f64)> {
    if alpha_samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut sorted = alpha_samples.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let pos = sorted
        .iter()
        .position(|&(cs, _)| (cs - c).abs() < 1e-12)
        .ok_or_else(|| Error::InvalidArgument(format!("class {c} not among the samples")))?;
    if pos == 0 || pos == sorted.len() - 1 {
        return Err(Error::InvalidArgument(format!(
            "class {c} lies on the boundary of the sampled range"
        )));
    }
    let (c_prev, a_prev) = sorted[pos - 1];
    let (c_mid, a_mid) = sorted[pos];
    let (c_next, a_next) = sorted[pos + 1];
    let left = (a_mid - a_prev) / (c_mid - c_prev);
    let right = (a_next - a_mid) / (c_next - c_mid);
    Ok((left, right))
}
