//! The single table of numeric defaults.
//!
//! Every tolerance and discretization parameter used by the pipelines lives
//! here; config files override these, and command-line flags override config.
//!
//! | constant              | value    | role                                              |
//! |-----------------------|----------|---------------------------------------------------|
//! | `NX`                  | 256      | position cells on `[0, 2π)`                       |
//! | `NV`                  | 129      | velocity nodes on `[-V_MAX, V_MAX]`               |
//! | `V_MAX`               | 4.0      | velocity box half-width                           |
//! | `TAU`                 | 0.2      | kernel time step                                  |
//! | `LIFT_WINDOW`         | 1        | windings allowed per kernel step                  |
//! | `EPS_POT`             | 5e-2     | action-potential tolerance at the default grid    |
//! | `ALPHA_TOL`           | 1e-2     | Lax-Oleinik decrement-oscillation tolerance       |
//! | `LP_FEAS`             | 1e-8     | occupation-measure feasibility tolerance          |
//! | `FOURIER_ORDER`       | 8        | closedness test-function order K                  |
//! | `LAX_MAX_ITERS`       | 4000     | value-iteration count                             |
//! | `MASS_FRACTION`       | 0.99     | Mather support mass capture                       |
//! | `MANE_HORIZON`        | 20.0     | Mañé orbit window length (time units)             |
//! | `ORBIT_SUBSTEP`       | 0.02     | integrator step inside set extraction             |
//! | `LIFT_WINDOW_TIME`    | 2.0      | Aubry lift defect window (time units)             |
//! | `BUMP_WIDTH_CELLS`    | 4        | Step-1 bump width in units of `h_x`               |

pub const NX: usize = 256;
pub const NV: usize = 129;
pub const V_MAX: f64 = 4.0;
pub const TAU: f64 = 0.2;
pub const LIFT_WINDOW: i32 = 1;

pub const EPS_POT: f64 = 5e-2;
pub const ALPHA_TOL: f64 = 1e-2;
pub const LP_FEAS: f64 = 1e-8;

pub const FOURIER_ORDER: usize = 8;
pub const LAX_MAX_ITERS: usize = 4000;
pub const MASS_FRACTION: f64 = 0.99;

/// Aubry extraction threshold: barrier diagonal at most `EPS_POT`.
pub const AUBRY_EPS: f64 = EPS_POT;
/// Mañé acceptance defect: orbit integration error stacks on table error.
pub const MANE_EPS: f64 = 3.0 * EPS_POT;
pub const MANE_HORIZON: f64 = 20.0;
pub const ORBIT_SUBSTEP: f64 = 0.02;
pub const LIFT_WINDOW_TIME: f64 = 2.0;

/// Peierls barrier window `[T_MIN, T_MAX]` in time units, converted to steps
/// by dividing by `tau`.
pub const BARRIER_T_MIN: f64 = 10.0;
pub const BARRIER_T_MAX: f64 = 40.0;

pub const BUMP_WIDTH_CELLS: f64 = 4.0;
pub const GRAPH_LIPSCHITZ_BOUND: f64 = 1.5;
pub const SEED: u64 = 0;
