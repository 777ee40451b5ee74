//! Experiment orchestration: cohomology scans, the collapse perturbation,
//! flat detection, and the semicontinuity probe.
//!
//! Everything funnels through [`analyze_class`], which runs the full
//! pipeline for one `(spec, c)` pair: both critical-value methods, the
//! potential tables, and the three set approximations.  Per-class failures
//! are turned into flags so a scan never aborts halfway.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::critical::{self, CriticalValueReport};
use crate::defaults;
use crate::error::{Error, Result};
use crate::grids::{build_kernel, PhaseGrid};
use crate::model::{CohomologyClass, LagrangianSpec, Potential};
use crate::potential::{mane_potential, peierls_barrier, PotentialTable};
use crate::sets::{
    hausdorff, lift_aubry, mane_set, mather_support, one_sided_hausdorff, projected_aubry,
    CloudLabel, PointCloud,
};

/// Knobs for one pipeline run.  Everything defaults from [`crate::defaults`];
/// the set-extraction tolerances derive from `eps_pot`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PipelineParams {
    pub eps_pot: f64,
    pub alpha_tol: f64,
    pub lp_feas: f64,
    pub fourier_order: usize,
    pub lax_max_iters: usize,
    pub mass_fraction: f64,
    pub aubry_epsilon: f64,
    pub mane_horizon: f64,
    pub mane_epsilon: f64,
    /// Barrier window in time units, converted to steps with `tau`.
    pub barrier_t_min: f64,
    pub barrier_t_max: f64,
    pub lipschitz_bound: f64,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            eps_pot: defaults::EPS_POT,
            alpha_tol: defaults::ALPHA_TOL,
            lp_feas: defaults::LP_FEAS,
            fourier_order: defaults::FOURIER_ORDER,
            lax_max_iters: defaults::LAX_MAX_ITERS,
            mass_fraction: defaults::MASS_FRACTION,
            aubry_epsilon: defaults::AUBRY_EPS,
            mane_horizon: defaults::MANE_HORIZON,
            mane_epsilon: defaults::MANE_EPS,
            barrier_t_min: defaults::BARRIER_T_MIN,
            barrier_t_max: defaults::BARRIER_T_MAX,
            lipschitz_bound: defaults::GRAPH_LIPSCHITZ_BOUND,
        }
    }
}

impl PipelineParams {
    pub fn barrier_steps(&self, grid: &PhaseGrid) -> (usize, usize) {
        let t_min = ((self.barrier_t_min / grid.tau).round() as usize).max(2);
        let t_max = ((self.barrier_t_max / grid.tau).round() as usize).max(t_min);
        (t_min, t_max)
    }
}

/// Full pipeline output for a single cohomology class.
#[derive(Clone, Debug)]
pub struct ClassAnalysis {
    pub c: f64,
    pub alpha_lax: CriticalValueReport,
    pub alpha_lp: CriticalValueReport,
    pub phi: PotentialTable,
    pub barrier: PotentialTable,
    pub mather: PointCloud,
    pub aubry: PointCloud,
    /// Orbit-accepted Mañé samples merged with the Aubry cloud (static
    /// orbits are semi-static, so the numerical Mañé proxy must contain the
    /// Aubry approximation).
    pub mane: PointCloud,
    pub mane_rejected_out_of_box: usize,
    pub d_mather_aubry: f64,
    pub d_aubry_mane: f64,
    pub flags: Vec<String>,
}

/// Run critical values, potentials and set extraction for one class.
pub fn analyze_class(
    spec: &LagrangianSpec,
    grid: &PhaseGrid,
    params: &PipelineParams,
    c: f64,
) -> Result<ClassAnalysis> {
    let mut flags = Vec::new();
    let class = CohomologyClass(c);
    let kernel = build_kernel(spec, grid, class)?;

    let alpha_lax =
        critical::alpha_lax_oleinik(&kernel, grid, params.lax_max_iters, params.alpha_tol)?;
    if !alpha_lax.converged {
        flags.push("lax_not_converged".to_string());
    }
    let alpha_lp = critical::alpha_lp(spec, grid, class, params.fourier_order)?;
    if alpha_lp.residual > params.lp_feas {
        flags.push("lp_residual_high".to_string());
    }
    if (alpha_lax.alpha - alpha_lp.alpha).abs() > 5e-3 {
        flags.push("alpha_methods_disagree".to_string());
    }

    let alpha_hat = alpha_lax.alpha;
    let (t_min, t_max) = params.barrier_steps(grid);
    let phi = mane_potential(&kernel, grid, alpha_hat, t_max, params.eps_pot)?;
    let barrier = peierls_barrier(&kernel, grid, alpha_hat, t_min, t_max)?;

    let measure = alpha_lp
        .measure
        .as_ref()
        .expect("lp report always carries its measure");
    let mather = mather_support(measure, grid, params.mass_fraction)?;

    let positions = projected_aubry(&barrier, params.aubry_epsilon)?;
    if positions.is_empty() {
        flags.push("aubry_empty".to_string());
    }
    let aubry = lift_aubry(
        spec,
        grid,
        &phi,
        c,
        phi.alpha_used,
        &positions,
        params.aubry_epsilon,
    )?;

    let mane_result = mane_set(
        spec,
        grid,
        &phi,
        c,
        phi.alpha_used,
        params.mane_horizon,
        params.mane_epsilon,
    )?;
    let mane = mane_result.cloud.merged_with(&aubry, grid);
    if mane.is_empty() {
        flags.push("mane_empty".to_string());
    }

    let d_mather_aubry = match hausdorff(&mather, &aubry) {
        Ok(d) => d,
        Err(_) => {
            flags.push("hausdorff_undefined_mather_aubry".to_string());
            f64::NAN
        }
    };
    let d_aubry_mane = match hausdorff(&aubry, &mane) {
        Ok(d) => d,
        Err(_) => {
            flags.push("hausdorff_undefined_aubry_mane".to_string());
            f64::NAN
        }
    };

    Ok(ClassAnalysis {
        c,
        alpha_lax,
        alpha_lp,
        phi,
        barrier,
        mather,
        aubry,
        mane,
        mane_rejected_out_of_box: mane_result.rejected_out_of_box,
        d_mather_aubry,
        d_aubry_mane,
        flags,
    })
}

/// One row of a cohomology scan.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanRow {
    pub c: f64,
    pub alpha: f64,
    pub d_h_mather_aubry: f64,
    pub d_h_aubry_mane: f64,
    pub measure_support_size: usize,
    pub flags: Vec<String>,
}

/// Scan `n` classes uniformly over `[c_lo, c_hi]`, running the full
/// pipeline per class.  Per-class failures land in the row flags.
pub fn scan_c(
    spec: &LagrangianSpec,
    grid: &PhaseGrid,
    params: &PipelineParams,
    c_lo: f64,
    c_hi: f64,
    n: usize,
) -> Result<Vec<ScanRow>> {
    if n < 2 {
        return Err(Error::InvalidArgument("scan needs n >= 2".to_string()));
    }
    let classes: Vec<f64> = (0..n)
        .map(|k| c_lo + (c_hi - c_lo) * k as f64 / (n - 1) as f64)
        .collect();
    let rows: Vec<ScanRow> = classes
        .par_iter()
        .map(|&c| match analyze_class(spec, grid, params, c) {
            Ok(a) => ScanRow {
                c,
                alpha: a.alpha_lp.alpha,
                d_h_mather_aubry: a.d_mather_aubry,
                d_h_aubry_mane: a.d_aubry_mane,
                measure_support_size: a
                    .alpha_lp
                    .measure
                    .as_ref()
                    .map_or(0, |m| m.support_cells().len()),
                flags: a.flags,
            },
            Err(err) => ScanRow {
                c,
                alpha: f64::NAN,
                d_h_mather_aubry: f64::NAN,
                d_h_aubry_mane: f64::NAN,
                measure_support_size: 0,
                flags: vec![format!("pipeline_error: {err}")],
            },
        })
        .collect();
    Ok(rows)
}

/// Before/after record of the collapse perturbation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Step1Report {
    pub c: f64,
    pub amplitude: f64,
    pub bump_width: f64,
    pub mather_positions: Vec<f64>,
    pub alpha_before: f64,
    pub alpha_after: f64,
    pub d_mather_aubry_before: f64,
    pub d_mather_aubry_after: f64,
    /// Hausdorff distance between the Mather clouds before and after.
    pub mather_shift: f64,
    pub flags: Vec<String>,
}

/// Build the collapse perturbation for `(spec, c)` and re-run the pipeline.
///
/// The bump `φ(x) = ε_φ · (1 − exp(−(d/δ)²))` vanishes on the projected
/// Mather positions and is strictly positive away from them (δ = 4 h_x), so
/// adding it to `L` keeps the minimizing measure and prices every other
/// would-be static orbit out.
pub fn step1_perturbation(
    spec: &LagrangianSpec,
    grid: &PhaseGrid,
    params: &PipelineParams,
    c: f64,
    amplitude: f64,
) -> Result<(LagrangianSpec, Step1Report)> {
    if !(amplitude > 0.0) {
        return Err(Error::InvalidArgument(
            "perturbation amplitude must be positive".to_string(),
        ));
    }
    let before = analyze_class(spec, grid, params, c)?;
    if before.mather.is_empty() {
        return Err(Error::EmptyCloud("no Mather support to perturb around"));
    }

    let mut centers: Vec<f64> = Vec::new();
    for &(x, _) in &before.mather.points {
        if !centers
            .iter()
            .any(|&y| crate::model::torus_dist(x, y) < 0.5 * grid.hx())
        {
            centers.push(x);
        }
    }
    centers.sort_by(f64::total_cmp);
    let delta = defaults::BUMP_WIDTH_CELLS * grid.hx();
    let bump = Potential::Bump {
        centers: centers.clone(),
        delta,
        amplitude,
    };
    let perturbed = spec.with_perturbation(bump);
    let after = analyze_class(&perturbed, grid, params, c)?;

    let mather_shift = hausdorff(&before.mather, &after.mather)?;
    let mut flags = before.flags.clone();
    flags.extend(after.flags.iter().map(|f| format!("after_{f}")));

    let report = Step1Report {
        c,
        amplitude,
        bump_width: delta,
        mather_positions: centers,
        alpha_before: before.alpha_lp.alpha,
        alpha_after: after.alpha_lp.alpha,
        d_mather_aubry_before: before.d_mather_aubry,
        d_mather_aubry_after: after.d_mather_aubry,
        mather_shift,
        flags,
    };
    Ok((perturbed, report))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlatProbe {
    pub c: f64,
    pub alpha: f64,
    pub on_flat: bool,
}

/// Flat-detection report around a base class.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlatReport {
    pub c: f64,
    pub alpha_at_c: f64,
    /// Rotation estimate `h ≈ α'(c)` from a central difference.
    pub rotation: f64,
    pub probes: Vec<FlatProbe>,
    /// Extent of the contiguous on-flat run around `c`, when one exists.
    pub extent: Option<(f64, f64)>,
    /// The run touches the probe boundary, so the flat may extend further.
    pub extent_touches_boundary: bool,
    /// True when the run extends beyond a single probe spacing.
    pub flat_detected: bool,
}

fn lax_alpha_at(
    spec: &LagrangianSpec,
    grid: &PhaseGrid,
    params: &PipelineParams,
    c: f64,
) -> Result<f64> {
    let kernel = build_kernel(spec, grid, CohomologyClass(c))?;
    Ok(critical::alpha_lax_oleinik(&kernel, grid, params.lax_max_iters, params.alpha_tol)?.alpha)
}

/// Probe classes around `c` and classify them against the supporting line
/// `α(c) + h·(c' − c)`; with `h = 0` the on-flat run is the detected flat
/// interval.
pub fn flat_detector(
    spec: &LagrangianSpec,
    grid: &PhaseGrid,
    params: &PipelineParams,
    c: f64,
    probe_radius: f64,
    n_probes: usize,
) -> Result<FlatReport> {
    if n_probes < 3 || !(probe_radius > 0.0) {
        return Err(Error::InvalidArgument(
            "need at least 3 probes and a positive radius".to_string(),
        ));
    }
    let spacing = 2.0 * probe_radius / (n_probes - 1) as f64;
    let alpha_at_c = lax_alpha_at(spec, grid, params, c)?;
    let rotation = {
        let plus = lax_alpha_at(spec, grid, params, c + spacing)?;
        let minus = lax_alpha_at(spec, grid, params, c - spacing)?;
        (plus - minus) / (2.0 * spacing)
    };

    let classes: Vec<f64> = (0..n_probes)
        .map(|k| c - probe_radius + spacing * k as f64)
        .collect();
    let alphas: Vec<Result<f64>> = classes
        .par_iter()
        .map(|&ck| lax_alpha_at(spec, grid, params, ck))
        .collect();
    let mut probes = Vec::with_capacity(n_probes);
    for (ck, alpha) in classes.iter().zip(alphas) {
        let alpha = alpha?;
        let gap = (alpha - alpha_at_c - rotation * (ck - c)).abs();
        probes.push(FlatProbe {
            c: *ck,
            alpha,
            on_flat: gap <= params.alpha_tol,
        });
    }

    // contiguous on-flat run around the probe nearest to c
    let center = probes
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1.c - c).abs().total_cmp(&(b.1.c - c).abs()))
        .map(|(k, _)| k)
        .unwrap();
    let (extent, touches) = if probes[center].on_flat {
        let mut lo = center;
        while lo > 0 && probes[lo - 1].on_flat {
            lo -= 1;
        }
        let mut hi = center;
        while hi + 1 < probes.len() && probes[hi + 1].on_flat {
            hi += 1;
        }
        (
            Some((probes[lo].c, probes[hi].c)),
            lo == 0 || hi == probes.len() - 1,
        )
    } else {
        (None, false)
    };
    let flat_detected = extent.map_or(false, |(lo, hi)| hi - lo > 1.5 * spacing);

    Ok(FlatReport {
        c,
        alpha_at_c,
        rotation,
        probes,
        extent,
        extent_touches_boundary: touches,
        flat_detected,
    })
}

/// One perturbation step of the semicontinuity probe.
#[derive(Clone, Debug)]
pub struct ProbeStep {
    pub perturbation: Option<Potential>,
    pub c: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SemicontRow {
    pub k: usize,
    pub c: f64,
    /// `sup over the perturbed Mañé cloud` of the distance into the base
    /// cloud — the upper-semicontinuity direction.
    pub mane_new_into_old: f64,
    /// Reverse direction; stays large when lower semicontinuity fails.
    pub mane_old_into_new: f64,
    pub d_h_mather: f64,
    pub d_h_aubry: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SemicontReport {
    pub base_c: f64,
    pub rows: Vec<SemicontRow>,
    pub flags: Vec<String>,
}

/// Drive the pipeline along a sequence `(φ_k, c_k) → (0, c)` and record how
/// the set approximations move relative to the base point.
pub fn semicontinuity_probe(
    spec: &LagrangianSpec,
    grid: &PhaseGrid,
    params: &PipelineParams,
    c: f64,
    steps: &[ProbeStep],
) -> Result<SemicontReport> {
    let base = analyze_class(spec, grid, params, c)?;
    let analyses: Vec<Result<ClassAnalysis>> = steps
        .par_iter()
        .map(|step| {
            let perturbed = match &step.perturbation {
                Some(p) => spec.with_perturbation(p.clone()),
                None => spec.clone(),
            };
            analyze_class(&perturbed, grid, params, step.c)
        })
        .collect();

    let mut rows = Vec::with_capacity(steps.len());
    let mut flags = Vec::new();
    for (k, (step, analysis)) in steps.iter().zip(analyses).enumerate() {
        let a = analysis?;
        rows.push(SemicontRow {
            k: k + 1,
            c: step.c,
            mane_new_into_old: one_sided_hausdorff(&a.mane, &base.mane)?,
            mane_old_into_new: one_sided_hausdorff(&base.mane, &a.mane)?,
            d_h_mather: hausdorff(&a.mather, &base.mather)?,
            d_h_aubry: hausdorff(&a.aubry, &base.aubry)?,
        });
    }

    for pair in rows.windows(2) {
        if pair[1].mane_new_into_old > pair[0].mane_new_into_old + 2.0 * params.eps_pot {
            flags.push(format!(
                "mane_sequence_increases_at_k{}",
                pair[1].k
            ));
        }
    }
    if let Some(last) = rows.last() {
        if last.mane_new_into_old > 3.0 * params.eps_pot {
            flags.push("mane_limit_above_tolerance".to_string());
        }
    }
    Ok(SemicontReport {
        base_c: c,
        rows,
        flags,
    })
}

/// Reference cloud for tests and examples: the upper (`+`) or lower (`−`)
/// pendulum separatrix sampled on the position grid, fixed point included.
pub fn separatrix_cloud(grid: &PhaseGrid, upper: bool) -> PointCloud {
    let sign = if upper { 1.0 } else { -1.0 };
    let points = (0..grid.nx)
        .map(|i| {
            let x = grid.position(i);
            (x, sign * 2.0 * (0.5 * x).sin())
        })
        .collect();
    PointCloud::new(points, CloudLabel::Reference, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coarse() -> PhaseGrid {
        PhaseGrid {
            nx: 64,
            nv: 65,
            vmax: 4.0,
            tau: 0.2,
            lift_window: 1,
        }
    }

    fn fast_params() -> PipelineParams {
        PipelineParams {
            lax_max_iters: 2000,
            ..PipelineParams::default()
        }
    }

    #[test]
    fn scan_row_count_and_symmetry() {
        let spec = LagrangianSpec::pendulum();
        let grid = coarse();
        let params = fast_params();
        let rows = scan_c(&spec, &grid, &params, -1.0, 1.0, 2).unwrap();
        assert_eq!(rows.len(), 2);
        // ±c symmetry of the even Lagrangian
        assert!((rows[0].alpha - rows[1].alpha).abs() < 2e-2);
        assert!(scan_c(&spec, &grid, &params, 0.0, 1.0, 1).is_err());
    }

    #[test]
    fn free_scan_distances_stay_small() {
        let spec = LagrangianSpec::free();
        let grid = coarse();
        let params = fast_params();
        let rows = scan_c(&spec, &grid, &params, -0.5, 0.5, 3).unwrap();
        for row in &rows {
            assert!(row.alpha.is_finite(), "flags: {:?}", row.flags);
            // all three clouds hug the band v = c; the Mather vertex is a
            // sparse subset so the symmetric distance scales with its gaps
            assert!(
                row.d_h_mather_aubry <= 0.45,
                "c={}: d(M,A)={}",
                row.c,
                row.d_h_mather_aubry
            );
            assert!(row.d_h_aubry_mane <= 0.25, "d(A,N)={}", row.d_h_aubry_mane);
        }
    }

    #[test]
    fn flat_detector_free_has_no_flat() {
        let spec = LagrangianSpec::free();
        // full position resolution: the displacement-lattice noise at nx=64
        // rivals the quadratic gap the classifier needs to see
        let grid = PhaseGrid {
            nx: 256,
            nv: 5,
            vmax: 4.0,
            tau: 0.2,
            lift_window: 1,
        };
        let report = flat_detector(&spec, &grid, &fast_params(), 1.0, 1.0, 9).unwrap();
        assert!(!report.flat_detected, "extent: {:?}", report.extent);
        assert!((report.rotation - 1.0).abs() < 5e-2, "h = {}", report.rotation);
        // only the base class itself may classify as on-flat at this spacing
        for probe in &report.probes {
            if (probe.c - 1.0).abs() > 0.13 {
                assert!(!probe.on_flat, "probe at {} on-flat", probe.c);
            }
        }
    }

    #[test]
    fn flat_detector_pendulum_interior() {
        let spec = LagrangianSpec::pendulum();
        let grid = coarse();
        let report = flat_detector(&spec, &grid, &fast_params(), 0.0, 1.0, 11).unwrap();
        assert!(report.flat_detected);
        assert!(report.extent_touches_boundary, "flat wider than the probe radius");
        assert!(report.rotation.abs() < 5e-2);
    }

    #[test]
    fn step1_noop_on_free_lagrangian() {
        // Mather positions cover every cell, so the bump vanishes everywhere
        let spec = LagrangianSpec::free();
        let grid = coarse();
        let (_, report) = step1_perturbation(&spec, &grid, &fast_params(), 1.0, 0.05).unwrap();
        assert!(
            report.mather_shift <= 2.0 * grid.hv().max(grid.hx()),
            "support moved by {}",
            report.mather_shift
        );
    }

    #[test]
    fn step1_keeps_pendulum_interior_measure() {
        let spec = LagrangianSpec::pendulum();
        let grid = coarse();
        let (perturbed, report) =
            step1_perturbation(&spec, &grid, &fast_params(), 0.0, 0.05).unwrap();
        let max_cells = 2.0 * grid.hx().max(grid.hv());
        assert!(report.mather_shift <= max_cells, "shift {}", report.mather_shift);
        // the bump really is in the new spec
        assert!(perturbed.perturbation.is_some());
        assert!(step1_perturbation(&spec, &grid, &fast_params(), 0.0, 0.0).is_err());
    }

    #[test]
    fn semicont_trivial_sequence_is_exact() {
        let spec = LagrangianSpec::pendulum();
        let grid = coarse();
        let steps = vec![
            ProbeStep {
                perturbation: None,
                c: 0.0,
            },
            ProbeStep {
                perturbation: None,
                c: 0.0,
            },
        ];
        let report = semicontinuity_probe(&spec, &grid, &fast_params(), 0.0, &steps).unwrap();
        for row in &report.rows {
            assert_eq!(row.mane_new_into_old, 0.0);
            assert_eq!(row.d_h_mather, 0.0);
            assert_eq!(row.d_h_aubry, 0.0);
        }
        assert!(report.flags.is_empty());
    }

    #[test]
    fn semicont_shrinking_bump_converges() {
        let spec = LagrangianSpec::pendulum();
        let grid = coarse();
        let steps: Vec<ProbeStep> = (1..=3)
            .map(|k| ProbeStep {
                perturbation: Some(Potential::Fourier {
                    constant: 0.1 / (1 << k) as f64,
                    coefficients: vec![(-0.1 / (1 << k) as f64, 0.0)],
                }),
                c: 0.0,
            })
            .collect();
        let report = semicontinuity_probe(&spec, &grid, &fast_params(), 0.0, &steps).unwrap();
        let last = report.rows.last().unwrap();
        assert!(
            last.mane_new_into_old <= 3.0 * defaults::EPS_POT,
            "limit {}",
            last.mane_new_into_old
        );
    }
}
