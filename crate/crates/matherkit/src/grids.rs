//! Phase-space discretization and the one-step action kernel.
//!
//! The kernel entry `a[i][j][w] = τ·L(x_mid, Δ/τ) − c·Δ` with
//! `Δ = wrap(x_j − x_i) + 2πw` is the discrete `A_c` integrand without the
//! `+α(c)·t` term; consumers add that per step.  Edges faster than the
//! velocity box are kept in the table as `+∞` so dense indexing stays simple.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::defaults;
use crate::error::{Error, Result};
use crate::minplus::CostMatrix;
use crate::model::{wrap_position, wrap_signed, CohomologyClass, LagrangianSpec, CIRCLE};

/// Uniform discretization of `[0, 2π) × [−v_max, v_max]` with time step `tau`
/// and per-step winding window `±lift_window`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PhaseGrid {
    #[serde(default = "d_nx")]
    pub nx: usize,
    #[serde(default = "d_nv")]
    pub nv: usize,
    #[serde(default = "d_vmax", alias = "v_max")]
    pub vmax: f64,
    #[serde(default = "d_tau")]
    pub tau: f64,
    #[serde(default = "d_w")]
    pub lift_window: i32,
}

fn d_nx() -> usize {
    defaults::NX
}
fn d_nv() -> usize {
    defaults::NV
}
fn d_vmax() -> f64 {
    defaults::V_MAX
}
fn d_tau() -> f64 {
    defaults::TAU
}
fn d_w() -> i32 {
    defaults::LIFT_WINDOW
}

impl Default for PhaseGrid {
    fn default() -> Self {
        PhaseGrid {
            nx: defaults::NX,
            nv: defaults::NV,
            vmax: defaults::V_MAX,
            tau: defaults::TAU,
            lift_window: defaults::LIFT_WINDOW,
        }
    }
}

impl PhaseGrid {
    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.nv < 2 {
            return Err(Error::InvalidGrid(format!(
                "need nx, nv >= 2, got {}, {}",
                self.nx, self.nv
            )));
        }
        if !(self.vmax > 0.0) || !(self.tau > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "need vmax > 0 and tau > 0, got {}, {}",
                self.vmax, self.tau
            )));
        }
        if self.lift_window < 0 {
            return Err(Error::InvalidGrid("negative lift window".to_string()));
        }
        Ok(())
    }

    /// Position spacing `2π/nx`.
    pub fn hx(&self) -> f64 {
        CIRCLE / self.nx as f64
    }

    /// Velocity spacing `2 v_max/(nv−1)`.
    pub fn hv(&self) -> f64 {
        2.0 * self.vmax / (self.nv - 1) as f64
    }

    pub fn position(&self, i: usize) -> f64 {
        i as f64 * self.hx()
    }

    pub fn velocity(&self, j: usize) -> f64 {
        -self.vmax + j as f64 * self.hv()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.position(i)).collect()
    }

    pub fn velocities(&self) -> Vec<f64> {
        (0..self.nv).map(|j| self.velocity(j)).collect()
    }

    /// Index of the grid position nearest to `x` (positions wrap).
    pub fn position_index(&self, x: f64) -> usize {
        let i = (wrap_position(x) / self.hx()).round() as usize;
        i % self.nx
    }

    /// Index of the grid velocity nearest to `v`, clamped into the box.
    pub fn velocity_index(&self, v: f64) -> usize {
        let j = ((v + self.vmax) / self.hv()).round();
        (j.max(0.0) as usize).min(self.nv - 1)
    }

    /// Largest per-step displacement the velocity box allows.
    pub fn speed_window(&self) -> f64 {
        self.vmax * self.tau
    }

    /// Fails when even nearest-neighbor hops are inadmissible.
    pub fn check_connected(&self) -> Result<()> {
        if self.speed_window() + 1e-12 < self.hx() {
            return Err(Error::DisconnectedGrid {
                speed_window: self.speed_window(),
                hx: self.hx(),
            });
        }
        Ok(())
    }

    /// Distance between two phase points under the torus-aware metric
    /// `sqrt(torus_dist(x₁,x₂)² + (v₁−v₂)²)`.
    pub fn phase_dist(a: (f64, f64), b: (f64, f64)) -> f64 {
        let dx = wrap_signed(a.0 - b.0);
        (dx * dx + (a.1 - b.1) * (a.1 - b.1)).sqrt()
    }

    /// Chebyshev distance in cell units, used by the "within k cells" checks.
    pub fn cell_dist(&self, a: (f64, f64), b: (f64, f64)) -> f64 {
        let dx = wrap_signed(a.0 - b.0).abs() / self.hx();
        let dv = (a.1 - b.1).abs() / self.hv();
        dx.max(dv)
    }
}

/// Dense one-step cost table `a[i][j][w]` for a fixed cohomology class.
///
/// The cost depends on `c` affinely: `a_c = a_0 − c·Δ`.
#[derive(Clone, Debug)]
pub struct ActionKernel {
    pub nx: usize,
    pub lift_window: i32,
    pub tau: f64,
    pub c: CohomologyClass,
    hx: f64,
    entries: Vec<f64>,
}

impl ActionKernel {
    fn winding_count(&self) -> usize {
        (2 * self.lift_window + 1) as usize
    }

    fn index(&self, i: usize, j: usize, w: i32) -> usize {
        let wi = (w + self.lift_window) as usize;
        (i * self.nx + j) * self.winding_count() + wi
    }

    /// Displacement `wrap(x_j − x_i) + 2πw` realized by the edge.
    pub fn displacement(&self, i: usize, j: usize, w: i32) -> f64 {
        wrap_signed((j as f64 - i as f64) * self.hx) + CIRCLE * w as f64
    }

    /// One-step cost; `+∞` marks an inadmissible edge.
    pub fn at(&self, i: usize, j: usize, w: i32) -> f64 {
        self.entries[self.index(i, j, w)]
    }

    pub fn is_admissible(&self, i: usize, j: usize, w: i32) -> bool {
        self.at(i, j, w).is_finite()
    }

    /// Collapse windings and add `alpha_hat·τ` per step, producing the matrix
    /// the value iteration and the min-plus closures consume.
    pub fn to_cost_matrix(&self, alpha_hat: f64) -> CostMatrix {
        let shift = alpha_hat * self.tau;
        let n = self.nx;
        let mut m = CostMatrix::infinite(n);
        for i in 0..n {
            for j in 0..n {
                let mut best = f64::INFINITY;
                for w in -self.lift_window..=self.lift_window {
                    best = best.min(self.at(i, j, w));
                }
                m.set(i, j, if best.is_finite() { best + shift } else { best });
            }
        }
        m
    }
}

/// Build the one-step kernel `a[i][j][w] = τ·L(x_mid, Δ/τ) − c·Δ`.
///
/// `x_mid` is the segment midpoint reduced mod 2π; midpoint evaluation keeps
/// the table second-order accurate in `τ`.
pub fn build_kernel(
    spec: &LagrangianSpec,
    grid: &PhaseGrid,
    c: CohomologyClass,
) -> Result<ActionKernel> {
    spec.validate()?;
    grid.validate()?;
    let nx = grid.nx;
    let w_max = grid.lift_window;
    let nw = (2 * w_max + 1) as usize;
    let tau = grid.tau;
    let hx = grid.hx();
    let cap = grid.speed_window();

    let entries: Vec<f64> = (0..nx * nx * nw)
        .into_par_iter()
        .map(|flat| {
            let i = flat / (nx * nw);
            let j = (flat / nw) % nx;
            let w = (flat % nw) as i32 - w_max;
            let delta = wrap_signed((j as f64 - i as f64) * hx) + CIRCLE * w as f64;
            if delta.abs() > cap + 1e-12 {
                f64::INFINITY
            } else {
                let x_mid = wrap_position(i as f64 * hx + 0.5 * delta);
                tau * spec.lagrangian(x_mid, delta / tau) - c.value() * delta
            }
        })
        .collect();

    debug_assert_eq!(entries.len(), nx * nx * nw);
    Ok(ActionKernel {
        nx,
        lift_window: w_max,
        tau,
        c,
        hx,
        entries,
    })
}

/// All admissible `(i, j, w)` edges of a grid.
pub fn admissible_edges(grid: &PhaseGrid) -> Result<Vec<(usize, usize, i32)>> {
    grid.validate()?;
    let hx = grid.hx();
    let cap = grid.speed_window();
    let mut edges = Vec::new();
    for i in 0..grid.nx {
        for j in 0..grid.nx {
            for w in -grid.lift_window..=grid.lift_window {
                let delta = wrap_signed((j as f64 - i as f64) * hx) + CIRCLE * w as f64;
                if delta.abs() <= cap + 1e-12 {
                    edges.push((i, j, w));
                }
            }
        }
    }
    Ok(edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn free_kernel(nx: usize, vmax: f64, tau: f64, w: i32, c: f64) -> ActionKernel {
        let grid = PhaseGrid {
            nx,
            nv: 5,
            vmax,
            tau,
            lift_window: w,
        };
        build_kernel(&LagrangianSpec::free(), &grid, CohomologyClass(c)).unwrap()
    }

    #[test]
    fn kernel_values_free() {
        // zero displacement costs nothing
        let k = free_kernel(8, 10.0, 1.0, 1, 0.0);
        assert_eq!(k.at(3, 3, 0), 0.0);
        // full winding at tau = 1: cost 2π²
        assert!((k.at(3, 3, 1) - 2.0 * PI * PI).abs() < 1e-12);
        // subtracting c·Δ
        let k1 = free_kernel(8, 10.0, 1.0, 1, 1.0);
        assert!((k1.at(3, 3, 1) - (2.0 * PI * PI - 2.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn admissible_edges_cases() {
        // speed window below hx: only self loops
        let g = PhaseGrid {
            nx: 8,
            nv: 5,
            vmax: 0.5,
            tau: 0.1,
            lift_window: 0,
        };
        let edges = admissible_edges(&g).unwrap();
        assert_eq!(edges.len(), 8);
        assert!(edges.iter().all(|&(i, j, w)| i == j && w == 0));

        // big box: every (i, j) carries all three windings
        let g = PhaseGrid {
            nx: 6,
            nv: 5,
            vmax: 10.0,
            tau: 1.0,
            lift_window: 1,
        };
        let edges = admissible_edges(&g).unwrap();
        assert_eq!(edges.len(), 6 * 6 * 3);

        // nx = 4 with window π: wrapped displacements all fit
        let g = PhaseGrid {
            nx: 4,
            nv: 5,
            vmax: PI,
            tau: 1.0,
            lift_window: 0,
        };
        let edges = admissible_edges(&g).unwrap();
        assert_eq!(edges.len(), 16, "all pairs admissible via wrapped Δ");
    }

    #[test]
    fn kernel_symmetry_even_potential() {
        let grid = PhaseGrid {
            nx: 16,
            nv: 5,
            vmax: 6.0,
            tau: 0.5,
            lift_window: 1,
        };
        let k = build_kernel(&LagrangianSpec::pendulum(), &grid, CohomologyClass(0.0)).unwrap();
        for i in 0..16usize {
            for j in 0..16usize {
                for w in -1..=1 {
                    let im = (16 - i) % 16;
                    let jm = (16 - j) % 16;
                    let a = k.at(i, j, w);
                    let b = k.at(im, jm, -w);
                    if a.is_finite() || b.is_finite() {
                        assert!((a - b).abs() < 1e-12, "asymmetry at {i},{j},{w}");
                    }
                }
            }
        }
    }

    #[test]
    fn refinement_never_much_worse() {
        // composing two τ/2 steps beats or matches one τ step up to the
        // displacement-lattice quantization h_x²/τ.
        let g = PhaseGrid {
            nx: 64,
            nv: 5,
            vmax: 4.0,
            tau: 0.2,
            lift_window: 0,
        };
        let g_half = PhaseGrid { tau: 0.1, ..g };
        let coarse = build_kernel(&LagrangianSpec::free(), &g, CohomologyClass(0.0)).unwrap();
        let fine = build_kernel(&LagrangianSpec::free(), &g_half, CohomologyClass(0.0)).unwrap();
        let slack = g.hx() * g.hx() / g.tau + g.tau * g.tau;
        for (i, j) in [(0, 1), (0, 2), (5, 9), (10, 10), (3, 63), (60, 2), (7, 12), (20, 21), (40, 44), (63, 0)] {
            let direct = coarse.at(i, j, 0);
            if !direct.is_finite() {
                continue;
            }
            let mut best = f64::INFINITY;
            for k in 0..64usize {
                best = best.min(fine.at(i, k, 0) + fine.at(k, j, 0));
            }
            assert!(
                best <= direct + slack,
                "two half steps {best} vs direct {direct} at ({i},{j})"
            );
        }
    }

    proptest! {
        #[test]
        fn affine_in_c(
            i in 0usize..32, j in 0usize..32, w in -1i32..=1,
            c1 in -3.0..3.0f64, c2 in -3.0..3.0f64,
        ) {
            let grid = PhaseGrid { nx: 32, nv: 5, vmax: 40.0, tau: 0.5, lift_window: 1 };
            let spec = LagrangianSpec::pendulum();
            let ka = build_kernel(&spec, &grid, CohomologyClass(c1)).unwrap();
            let kb = build_kernel(&spec, &grid, CohomologyClass(c2)).unwrap();
            let delta = ka.displacement(i, j, w);
            let gap = ka.at(i, j, w) - kb.at(i, j, w) + (c1 - c2) * delta;
            prop_assert!(gap.abs() <= 1e-9 * (1.0 + delta.abs()), "affine identity off by {gap}");
        }
    }
}
