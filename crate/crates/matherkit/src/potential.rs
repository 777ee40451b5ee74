//! Fixed-time minimal actions, the Mañé potential, the pseudo-metric `d_c`,
//! and the Peierls-type barrier.
//!
//! Everything here is a min-plus power of the α-corrected one-step kernel
//! `B = a + α̂·τ`.  Before building long-horizon tables the exact minimum
//! cycle mean of `B` is measured (Karp); a small negative mean means the
//! supplied α̂ slightly undershoots the grid's own critical value, and the
//! kernel is re-centered so the closure stabilizes and the triangle
//! inequality holds to float precision.  The applied correction is recorded
//! in `alpha_used`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::{ActionKernel, PhaseGrid};
use crate::minplus::{self, CostMatrix};
use crate::model::CohomologyClass;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TableKind {
    /// `h_c(x, y, n·τ)`: minimal α-corrected action in exactly `n` steps.
    FixedTime { n_steps: usize },
    /// `Φ_c(x, y) = inf over horizons` of the fixed-time tables.
    ManePotential,
    /// `min over n ∈ [t_min, t_max]` steps: finite-window stand-in for the
    /// long-time lim inf.
    Barrier { t_min_steps: usize, t_max_steps: usize },
}

impl TableKind {
    fn name(&self) -> &'static str {
        match self {
            TableKind::FixedTime { .. } => "fixed_time",
            TableKind::ManePotential => "mane_potential",
            TableKind::Barrier { .. } => "barrier",
        }
    }
}

/// An `nx × nx` action table over position pairs.
#[derive(Clone, Debug)]
pub struct PotentialTable {
    pub values: CostMatrix,
    pub kind: TableKind,
    pub c: CohomologyClass,
    /// The α actually applied per step, including any re-centering.
    pub alpha_used: f64,
}

impl PotentialTable {
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values.at(i, j)
    }

    pub fn nx(&self) -> usize {
        self.values.n
    }

    pub fn diag_max(&self) -> f64 {
        self.values.diag().into_iter().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Re-center `B` so its minimum cycle mean is nonnegative.
///
/// Returns the corrected matrix and the per-step α actually in force.
/// A negative mean larger than `eps_pot` is an error: the caller's α̂ was
/// too low and the tables would diverge.
fn centered_kernel(
    kernel: &ActionKernel,
    alpha_hat: f64,
    eps_pot: f64,
) -> Result<(CostMatrix, f64)> {
    let b = kernel.to_cost_matrix(alpha_hat);
    let mcm = minplus::min_mean_cycle(&b);
    if !mcm.is_finite() {
        return Err(Error::InvalidArgument(
            "kernel admits no finite cycle".to_string(),
        ));
    }
    if mcm < -eps_pot {
        return Err(Error::NegativeCycle {
            mean_per_step: mcm,
            alpha_defect: -mcm / kernel.tau,
        });
    }
    if mcm < 0.0 {
        Ok((b.shift(-mcm), alpha_hat - mcm / kernel.tau))
    } else {
        Ok((b, alpha_hat))
    }
}

/// Fixed-time table: the `n_steps`-fold min-plus power of `a + α̂·τ`.
pub fn h_c_table(
    kernel: &ActionKernel,
    grid: &PhaseGrid,
    alpha_hat: f64,
    n_steps: usize,
) -> Result<PotentialTable> {
    grid.check_connected()?;
    if n_steps < 1 {
        return Err(Error::InvalidArgument("need n_steps >= 1".to_string()));
    }
    let b = kernel.to_cost_matrix(alpha_hat);
    Ok(PotentialTable {
        values: b.power(n_steps),
        kind: TableKind::FixedTime { n_steps },
        c: kernel.c,
        alpha_used: alpha_hat,
    })
}

/// Mañé potential `Φ̂ = min over horizons ≥ 1` of the corrected powers.
///
/// Computed as a doubling closure run past `t_max_steps` until stabilized.
/// The diagonal convention `Φ̂(x, x) := min(0, computed)` folds in the
/// constant-curve bound for horizons below one step.
pub fn mane_potential(
    kernel: &ActionKernel,
    grid: &PhaseGrid,
    alpha_hat: f64,
    t_max_steps: usize,
    eps_pot: f64,
) -> Result<PotentialTable> {
    grid.check_connected()?;
    let (b, alpha_used) = centered_kernel(kernel, alpha_hat, eps_pot)?;
    let horizon = t_max_steps.max(2 * grid.nx).max(4);
    let (mut closure, _stable) = minplus::min_over_powers(&b, horizon, 1e-9);
    for i in 0..closure.n {
        let d = closure.at(i, i);
        closure.set(i, i, d.min(0.0));
    }
    Ok(PotentialTable {
        values: closure,
        kind: TableKind::ManePotential,
        c: kernel.c,
        alpha_used,
    })
}

/// Symmetrized potential `d_c(x, y) = Φ̂(x, y) + Φ̂(y, x)`.
pub fn d_c(table: &PotentialTable, i: usize, j: usize) -> Result<f64> {
    match table.kind {
        TableKind::ManePotential => Ok(table.at(i, j) + table.at(j, i)),
        other => Err(Error::WrongTableKind {
            expected: "mane_potential",
            got: other.name(),
        }),
    }
}

/// Peierls-type barrier: `min over n ∈ [t_min_steps, t_max_steps]` of the
/// fixed-time tables, the finite-window stand-in for `lim inf h_c`.
///
/// Split as `B^t_min ⊗ (I ∧ B)^(t_max − t_min)` so the window costs a
/// handful of min-plus products.
pub fn peierls_barrier(
    kernel: &ActionKernel,
    grid: &PhaseGrid,
    alpha_hat: f64,
    t_min_steps: usize,
    t_max_steps: usize,
) -> Result<PotentialTable> {
    grid.check_connected()?;
    if t_min_steps < 1 || t_max_steps < t_min_steps {
        return Err(Error::InvalidArgument(format!(
            "bad barrier window [{t_min_steps}, {t_max_steps}]"
        )));
    }
    let (b, alpha_used) = centered_kernel(kernel, alpha_hat, crate::defaults::EPS_POT)?;
    let head = b.power(t_min_steps);
    let values = if t_max_steps > t_min_steps {
        let padded = CostMatrix::identity(b.n).min_with(&b);
        head.multiply(&padded.power(t_max_steps - t_min_steps))
    } else {
        head
    };
    Ok(PotentialTable {
        values,
        kind: TableKind::Barrier {
            t_min_steps,
            t_max_steps,
        },
        c: kernel.c,
        alpha_used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critical::alpha_lax_oleinik;
    use crate::grids::build_kernel;
    use crate::model::LagrangianSpec;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn grid(nx: usize) -> PhaseGrid {
        PhaseGrid {
            nx,
            nv: 65,
            vmax: 4.0,
            tau: 0.2,
            lift_window: 1,
        }
    }

    fn pipeline(spec: &LagrangianSpec, g: &PhaseGrid, c: f64) -> (ActionKernel, f64) {
        let kernel = build_kernel(spec, g, CohomologyClass(c)).unwrap();
        let alpha = alpha_lax_oleinik(&kernel, g, 3000, 1e-2).unwrap().alpha;
        (kernel, alpha)
    }

    #[test]
    fn rest_curve_bounds_fixed_time_diagonal() {
        let spec = LagrangianSpec::pendulum();
        let g = grid(64);
        let (kernel, alpha) = pipeline(&spec, &g, 0.0);
        let table = h_c_table(&kernel, &g, alpha, 10).unwrap();
        for i in 0..g.nx {
            let x = g.position(i);
            let rest = 10.0 * g.tau * (spec.lagrangian(x, 0.0) + alpha);
            assert!(
                table.at(i, i) <= rest + 1e-9,
                "diagonal beats the rest curve at {x:.3}"
            );
        }
    }

    #[test]
    fn free_fixed_time_matches_parabola() {
        // h(x, y, t) = dist(x,y)²/(2t) for the free Lagrangian
        let spec = LagrangianSpec::free();
        let g = grid(64);
        let kernel = build_kernel(&spec, &g, CohomologyClass(0.0)).unwrap();
        let table = h_c_table(&kernel, &g, 0.0, 5).unwrap();
        let t = 5.0 * g.tau;
        for (i, j) in [(0usize, 8usize), (3, 10), (20, 25), (60, 2)] {
            let d = crate::model::torus_dist(g.position(i), g.position(j));
            let expect = d * d / (2.0 * t);
            assert!(
                (table.at(i, j) - expect).abs() < 0.1,
                "h({i},{j}) = {} vs {expect}",
                table.at(i, j)
            );
        }
    }

    #[test]
    fn semigroup_inequality() {
        let spec = LagrangianSpec::pendulum();
        let g = grid(48);
        let (kernel, alpha) = pipeline(&spec, &g, 0.5);
        let h3 = h_c_table(&kernel, &g, alpha, 3).unwrap();
        let h5 = h_c_table(&kernel, &g, alpha, 5).unwrap();
        let h8 = h_c_table(&kernel, &g, alpha, 8).unwrap();
        let composed = h3.values.multiply(&h5.values);
        for i in 0..g.nx {
            for j in 0..g.nx {
                assert!(
                    h8.at(i, j) <= composed.at(i, j) + 1e-9,
                    "semigroup violated at ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn pendulum_separatrix_action() {
        // zero-energy minimal action 0 -> π equals ∫ 2 sin(x/2) dx = 4
        let spec = LagrangianSpec::pendulum();
        let g = PhaseGrid::default();
        let (kernel, alpha) = pipeline(&spec, &g, 0.0);
        let table = h_c_table(&kernel, &g, alpha, 100).unwrap();
        let value = table.at(0, g.nx / 2);
        assert!((value - 4.0).abs() < 0.15, "h(0, π, 20) = {value}");

        let phi = mane_potential(&kernel, &g, alpha, 200, 5e-2).unwrap();
        assert!((phi.at(0, g.nx / 2) - 4.0).abs() < 0.15);
        assert!((phi.at(g.nx / 2, 0) - 4.0).abs() < 0.15);
        let d = d_c(&phi, 0, g.nx / 2).unwrap();
        assert!((d - 8.0).abs() < 0.3, "d_c(0, π) = {d}");
    }

    #[test]
    fn mane_diagonal_and_triangle() {
        let spec = LagrangianSpec::pendulum();
        let g = grid(96);
        for c in [0.0, 0.5, 1.0] {
            let (kernel, alpha) = pipeline(&spec, &g, c);
            let phi = mane_potential(&kernel, &g, alpha, 200, 5e-2).unwrap();
            for i in 0..g.nx {
                assert!(phi.at(i, i).abs() <= 5e-2, "diag at {i}: {}", phi.at(i, i));
            }
            // triangle inequality on random triples
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
            for _ in 0..1000 {
                let (i, j, k) = (
                    rng.gen_range(0..g.nx),
                    rng.gen_range(0..g.nx),
                    rng.gen_range(0..g.nx),
                );
                assert!(
                    phi.at(i, k) <= phi.at(i, j) + phi.at(j, k) + 1e-6,
                    "triangle at ({i},{j},{k}), c={c}"
                );
            }
            // d_c stays nonnegative
            let mut worst = f64::INFINITY;
            for i in 0..g.nx {
                for j in 0..g.nx {
                    worst = worst.min(phi.at(i, j) + phi.at(j, i));
                }
            }
            assert!(worst >= -0.1, "min d_c = {worst} at c={c}");
        }
    }

    #[test]
    fn free_potential_vanishes() {
        let spec = LagrangianSpec::free();
        let g = grid(64);
        let (kernel, alpha) = pipeline(&spec, &g, 0.0);
        let phi = mane_potential(&kernel, &g, alpha, 200, 5e-2).unwrap();
        for i in (0..g.nx).step_by(7) {
            for j in (0..g.nx).step_by(11) {
                assert!(
                    phi.at(i, j).abs() <= 5e-2,
                    "Φ({i},{j}) = {} should vanish",
                    phi.at(i, j)
                );
            }
        }
        let barrier = peierls_barrier(&kernel, &g, alpha, 50, 200).unwrap();
        for i in 0..g.nx {
            assert!(barrier.at(i, i).abs() <= 5e-2);
        }
    }

    #[test]
    fn pendulum_barrier_values() {
        let spec = LagrangianSpec::pendulum();
        let g = PhaseGrid::default();
        // c = 0: the cheapest long-run return to π runs the full separatrix loop
        let (kernel, alpha) = pipeline(&spec, &g, 0.0);
        let barrier = peierls_barrier(&kernel, &g, alpha, 50, 200).unwrap();
        let at_pi = barrier.at(g.nx / 2, g.nx / 2);
        assert!((at_pi - 8.0).abs() < 0.3, "barrier(π,π) = {at_pi}");

        // c = 4/π: the loop is free and every point sits on a static loop
        let edge = 4.0 / PI;
        let (kernel, alpha) = pipeline(&spec, &g, edge);
        let barrier = peierls_barrier(&kernel, &g, alpha, 50, 200).unwrap();
        for i in (0..g.nx).step_by(5) {
            assert!(
                barrier.at(i, i).abs() <= 0.3,
                "barrier diag {} at {i}",
                barrier.at(i, i)
            );
        }
        let phi = mane_potential(&kernel, &g, alpha, 200, 5e-2).unwrap();
        let d = d_c(&phi, 0, g.nx / 2).unwrap();
        assert!(d.abs() <= 0.3, "d_c(0,π) at the edge = {d}");
    }

    #[test]
    fn negative_cycle_reported() {
        let spec = LagrangianSpec::pendulum();
        let g = grid(48);
        let kernel = build_kernel(&spec, &g, CohomologyClass(0.0)).unwrap();
        // an alpha far below critical leaves negative cycles in the
        // corrected kernel
        let err = mane_potential(&kernel, &g, -1.0, 200, 5e-2).unwrap_err();
        assert!(matches!(err, Error::NegativeCycle { .. }), "{err}");
    }

    #[test]
    fn wrong_kind_rejected() {
        let spec = LagrangianSpec::free();
        let g = grid(32);
        let kernel = build_kernel(&spec, &g, CohomologyClass(0.0)).unwrap();
        let table = h_c_table(&kernel, &g, 0.0, 3).unwrap();
        assert!(matches!(
            d_c(&table, 0, 1),
            Err(Error::WrongTableKind { .. })
        ));
    }
}
