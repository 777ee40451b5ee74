//! Numerical Mather, Aubry and Mañé set approximations, Hausdorff distances,
//! and the Lipschitz-graph check.
//!
//! All set membership is tolerance-based: the grids cannot produce the exact
//! invariant sets, only ε-clouds around them.  Extraction scales derive from
//! `eps_pot`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::PhaseGrid;
use crate::model::{self, action_leg, LagrangianSpec};
use crate::critical::OccupationMeasure;
use crate::potential::{PotentialTable, TableKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CloudLabel {
    Mather,
    Aubry,
    Mane,
    Reference,
}

/// A finite subset of phase space with the ε used to extract it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<(f64, f64)>,
    pub label: CloudLabel,
    pub tolerance: f64,
}

impl PointCloud {
    pub fn new(points: Vec<(f64, f64)>, label: CloudLabel, tolerance: f64) -> Self {
        PointCloud {
            points,
            label,
            tolerance,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Union, dropping points that coincide at grid resolution.
    pub fn merged_with(&self, other: &PointCloud, grid: &PhaseGrid) -> PointCloud {
        let mut points = self.points.clone();
        for &p in &other.points {
            if !points.iter().any(|&q| grid.cell_dist(p, q) < 0.5) {
                points.push(p);
            }
        }
        PointCloud {
            points,
            label: self.label,
            tolerance: self.tolerance.max(other.tolerance),
        }
    }
}

/// Smallest set of cells (by descending weight) capturing `mass_fraction`
/// of the measure.
pub fn mather_support(
    measure: &OccupationMeasure,
    grid: &PhaseGrid,
    mass_fraction: f64,
) -> Result<PointCloud> {
    if !(0.0 < mass_fraction && mass_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "mass fraction must lie in (0, 1), got {mass_fraction}"
        )));
    }
    if !(measure.total_mass > 0.0) {
        return Err(Error::DegenerateMeasure(measure.total_mass));
    }
    let target = mass_fraction * measure.total_mass;
    let mut captured = 0.0;
    let mut points = Vec::new();
    for (i, j, w) in measure.support_cells() {
        points.push((grid.position(i), grid.velocity(j)));
        captured += w;
        if captured >= target {
            break;
        }
    }
    Ok(PointCloud::new(points, CloudLabel::Mather, grid.hx()))
}

/// Positions whose barrier diagonal sits below `epsilon` — the projected
/// Aubry set approximation.
pub fn projected_aubry(barrier: &PotentialTable, epsilon: f64) -> Result<Vec<usize>> {
    match barrier.kind {
        TableKind::Barrier { .. } => {}
        other => {
            return Err(Error::WrongTableKind {
                expected: "barrier",
                got: match other {
                    TableKind::FixedTime { .. } => "fixed_time",
                    TableKind::ManePotential => "mane_potential",
                    TableKind::Barrier { .. } => unreachable!(),
                },
            })
        }
    }
    Ok((0..barrier.nx())
        .filter(|&i| barrier.at(i, i) <= epsilon)
        .collect())
}

/// Static defect of the short centered orbit window through `(x, v)`:
/// `A_c(γ|[-T/2, T/2]) + Φ̂(γ(T/2), γ(-T/2))`, which vanishes on static
/// orbits.
fn static_defect(
    spec: &LagrangianSpec,
    grid: &PhaseGrid,
    phi: &PotentialTable,
    c: f64,
    alpha_hat: f64,
    x: f64,
    v: f64,
    window: f64,
    dt: f64,
) -> (f64, f64) {
    let n = ((0.5 * window / dt).round() as usize).max(1);
    let fwd = action_leg(spec, x, v, dt, n, c, false);
    let bwd = action_leg(spec, x, v, dt, n, c, true);
    if fwd.max_speed > grid.vmax || bwd.max_speed > grid.vmax {
        return (f64::INFINITY, f64::INFINITY);
    }
    let start = grid.position_index(bwd.x_end);
    let end = grid.position_index(fwd.x_end);
    let action = fwd.action + bwd.action + alpha_hat * (2 * n) as f64 * dt;
    let static_d = action + phi.at(end, start);
    let semistatic_d = action - phi.at(start, end);
    (static_d, semistatic_d)
}

/// Lift projected Aubry positions to phase space.
///
/// Each accepted position gets the grid velocity minimizing the static
/// calibration defect; near ties are broken toward forward calibration so
/// the lift lands on the branch the class `c` actually selects.
pub fn lift_aubry(
    spec: &LagrangianSpec,
    grid: &PhaseGrid,
    phi: &PotentialTable,
    c: f64,
    alpha_hat: f64,
    positions: &[usize],
    epsilon: f64,
) -> Result<PointCloud> {
    spec.validate()?;
    let dt = crate::defaults::ORBIT_SUBSTEP;
    let window = crate::defaults::LIFT_WINDOW_TIME;
    let points: Vec<(f64, f64)> = positions
        .par_iter()
        .map(|&i| {
            let x = grid.position(i);
            let mut best_v = 0.0;
            let mut best_score = (f64::INFINITY, f64::INFINITY);
            for j in 0..grid.nv {
                let v = grid.velocity(j);
                let (stat, semi) = static_defect(spec, grid, phi, c, alpha_hat, x, v, window, dt);
                // lexicographic with a coarse first key: static defect wins,
                // forward calibration breaks near ties
                let key = ((stat / 1e-4).round(), semi);
                if key.0 < best_score.0
                    || (key.0 == best_score.0 && key.1 < best_score.1)
                {
                    best_score = key;
                    best_v = v;
                }
            }
            (x, best_v)
        })
        .collect();
    Ok(PointCloud::new(points, CloudLabel::Aubry, epsilon))
}

/// Mañé-set extraction report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ManeSetResult {
    pub cloud: PointCloud,
    pub samples_total: usize,
    /// Samples whose orbit left the velocity box.
    pub rejected_out_of_box: usize,
}

/// Numerical Mañé set: grid samples whose Euler-Lagrange orbit calibrates
/// the potential over a centered window.
///
/// The orbit through `(x, v)` is integrated over `[-T/2, T/2]` and accepted
/// when the discrete `A_c` along it (with `+α̂·T`) exceeds
/// `Φ̂(x(-T/2), x(T/2))` by at most `epsilon`.  The centered window is what
/// rejects separatrix creepers at interior classes: their full window wraps
/// the hyperbolic point and exposes the loop cost that a forward-only
/// window hides.
pub fn mane_set(
    spec: &LagrangianSpec,
    grid: &PhaseGrid,
    phi: &PotentialTable,
    c: f64,
    alpha_hat: f64,
    horizon: f64,
    epsilon: f64,
) -> Result<ManeSetResult> {
    spec.validate()?;
    grid.validate()?;
    if phi.kind != TableKind::ManePotential {
        return Err(Error::WrongTableKind {
            expected: "mane_potential",
            got: "other",
        });
    }
    let dt = crate::defaults::ORBIT_SUBSTEP;
    let n = ((0.5 * horizon / dt).round() as usize).max(1);
    let total_time = (2 * n) as f64 * dt;

    let results: Vec<(bool, bool)> = (0..grid.nx * grid.nv)
        .into_par_iter()
        .map(|idx| {
            let i = idx / grid.nv;
            let j = idx % grid.nv;
            let x = grid.position(i);
            let v = grid.velocity(j);
            let fwd = action_leg(spec, x, v, dt, n, c, false);
            let bwd = action_leg(spec, x, v, dt, n, c, true);
            if fwd.max_speed > grid.vmax || bwd.max_speed > grid.vmax {
                return (false, true);
            }
            let start = grid.position_index(bwd.x_end);
            let end = grid.position_index(fwd.x_end);
            let action = fwd.action + bwd.action + alpha_hat * total_time;
            let defect = action - phi.at(start, end);
            (defect <= epsilon, false)
        })
        .collect();

    let mut points = Vec::new();
    let mut rejected_out_of_box = 0;
    for (idx, &(accepted, out)) in results.iter().enumerate() {
        if out {
            rejected_out_of_box += 1;
        } else if accepted {
            let i = idx / grid.nv;
            let j = idx % grid.nv;
            points.push((grid.position(i), grid.velocity(j)));
        }
    }
    Ok(ManeSetResult {
        cloud: PointCloud::new(points, CloudLabel::Mane, epsilon),
        samples_total: grid.nx * grid.nv,
        rejected_out_of_box,
    })
}

/// Distance under the torus-aware phase metric.
pub fn point_dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    PhaseGrid::phase_dist(a, b)
}

/// `sup over a ∈ A` of the distance from `a` to `B`.
pub fn one_sided_hausdorff(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCloud("hausdorff needs non-empty clouds"));
    }
    Ok(a.points
        .par_iter()
        .map(|&p| {
            b.points
                .iter()
                .map(|&q| point_dist(p, q))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::NEG_INFINITY, f64::max))
}

/// Hausdorff distance: the larger of the two one-sided distances.
pub fn hausdorff(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    Ok(one_sided_hausdorff(a, b)?.max(one_sided_hausdorff(b, a)?))
}

/// Graph-property report for a phase cloud.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphReport {
    /// Worst velocity spread inside a single position cell.
    pub max_spread: f64,
    /// Worst quantization-discounted slope between neighboring occupied
    /// cells.
    pub max_slope: f64,
    /// Position cells excluded around detected hyperbolic fixed points.
    pub excluded_cells: usize,
    pub passes: bool,
}

/// Positions of hyperbolic equilibria: force vanishes with positive slope.
fn hyperbolic_fixed_points(spec: &LagrangianSpec, grid: &PhaseGrid) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..grid.nx {
        let x0 = grid.position(i);
        let x1 = grid.position((i + 1) % grid.nx);
        let f0 = spec.force(x0);
        let f1 = spec.force(x1);
        if f0 == 0.0 && f1 > 0.0 {
            out.push(x0);
        } else if f0 < 0.0 && f1 > 0.0 {
            // sign change with increasing force: hyperbolic
            out.push(x0 + grid.hx() * f0.abs() / (f1 - f0));
        }
    }
    out
}

/// Check the Lipschitz-graph property of a cloud.
///
/// Points are grouped by position cell; the report carries the worst
/// per-cell velocity spread and the worst cell-to-cell slope
/// `max(0, |Δv| − h_v)/|Δx|` (one velocity quantum is measurement
/// resolution, not slope).  Cells within `2 h_x` of a hyperbolic fixed
/// point are excluded from the slope test: the discretization smears the
/// corner where separatrix branches meet.
pub fn graph_check(
    cloud: &PointCloud,
    grid: &PhaseGrid,
    spec: &LagrangianSpec,
    lipschitz_bound: f64,
) -> Result<GraphReport> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud("graph check needs points"));
    }
    let nx = grid.nx;
    let mut cells: Vec<Vec<f64>> = vec![Vec::new(); nx];
    for &(x, v) in &cloud.points {
        cells[grid.position_index(x)].push(v);
    }

    let mut max_spread = 0.0f64;
    for vs in cells.iter().filter(|vs| vs.len() > 1) {
        let lo = vs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        max_spread = max_spread.max(hi - lo);
    }

    let fixed = hyperbolic_fixed_points(spec, grid);
    let near_fixed = |i: usize| {
        fixed
            .iter()
            .any(|&fx| model::torus_dist(grid.position(i), fx) <= 2.0 * grid.hx())
    };
    let excluded_cells = (0..nx)
        .filter(|&i| !cells[i].is_empty() && near_fixed(i))
        .count();

    let occupied: Vec<usize> = (0..nx).filter(|&i| !cells[i].is_empty()).collect();
    let mean = |i: usize| cells[i].iter().sum::<f64>() / cells[i].len() as f64;
    let mut max_slope = 0.0f64;
    for (a, b) in occupied.iter().zip(occupied.iter().cycle().skip(1)) {
        let gap = model::torus_dist(grid.position(*a), grid.position(*b));
        if gap <= 2.0 * grid.hx() + 1e-12 && gap > 0.0 {
            if near_fixed(*a) || near_fixed(*b) {
                continue;
            }
            let dv = (mean(*a) - mean(*b)).abs();
            max_slope = max_slope.max((dv - grid.hv()).max(0.0) / gap);
        }
    }

    Ok(GraphReport {
        max_spread,
        max_slope,
        excluded_cells,
        passes: max_spread <= 2.0 * grid.hv() && max_slope <= lipschitz_bound,
    })
}
