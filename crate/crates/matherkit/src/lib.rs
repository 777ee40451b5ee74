//! Numerical toolkit for the variational structures of mechanical
//! Lagrangians on the circle.
//!
//! Given `L(x, v) = m v²/2 − U(x)` on the circle of circumference 2π, the
//! crate computes:
//!
//! * the critical value α(c) per cohomology class, by two independent
//!   methods — Lax-Oleinik value iteration and an occupation-measure linear
//!   program solved by an in-crate dense simplex ([`critical`]);
//! * its conjugate β(h) and one-sided subdifferentials ([`critical`]);
//! * fixed-time minimal actions, the Mañé potential Φ_c, the pseudo-metric
//!   `d_c`, and a Peierls-type barrier ([`potential`]);
//! * grid approximations of the Mather, Aubry and Mañé sets with Hausdorff
//!   distances and the Lipschitz-graph check ([`sets`]);
//! * the experiment layer: cohomology scans, flat detection, the collapse
//!   perturbation that forces Mather = Aubry = Mañé, and a semicontinuity
//!   probe ([`experiments`]).
//!
//! The pendulum `L = v²/2 + 1 − cos x` is the reference system: α vanishes
//! exactly on `[−4/π, 4/π]`, the Mather set on that flat is the hyperbolic
//! fixed point, and at the flat's edge the Aubry set jumps to a full
//! separatrix branch.  The `examples/` directory walks through each
//! capability; `matherkit` (the one binary) exposes the same pipelines as
//! subcommands.

pub mod cli;
pub mod config;
pub mod critical;
pub mod defaults;
pub mod error;
pub mod experiments;
pub mod grids;
pub mod minplus;
pub mod model;
pub mod potential;
pub mod sets;
pub mod simplex;

pub use config::{RunConfig, Tolerances};
pub use critical::{
    alpha_lax_oleinik, alpha_lp, beta_fenchel, subdifferential_alpha, CriticalValueReport, Method,
    OccupationMeasure,
};
pub use error::{Error, Result};
pub use experiments::{
    analyze_class, flat_detector, scan_c, semicontinuity_probe, step1_perturbation, ClassAnalysis,
    FlatReport, PipelineParams, ProbeStep, ScanRow, SemicontReport, Step1Report,
};
pub use grids::{admissible_edges, build_kernel, ActionKernel, PhaseGrid};
pub use model::{
    integrate_orbit, torus_dist, wrap_position, wrap_signed, CohomologyClass, LagrangianSpec,
    OrbitSegment, Potential, CIRCLE,
};
pub use potential::{d_c, h_c_table, mane_potential, peierls_barrier, PotentialTable, TableKind};
pub use sets::{
    graph_check, hausdorff, lift_aubry, mane_set, mather_support, one_sided_hausdorff,
    projected_aubry, CloudLabel, GraphReport, ManeSetResult, PointCloud,
};
