//! Mechanical Lagrangians on the circle, the Legendre transform, and a
//! symplectic orbit integrator.
//!
//! The configuration space is the circle of circumference `2π`.  A spec holds
//! `L(x, v) = m v²/2 − U(x) + φ(x)` with `U` the base potential and `φ` an
//! optional perturbation; the conjugate Hamiltonian is
//! `H(x, p) = p²/(2m) + U(x) − φ(x)`.  With the pendulum potential
//! `U(x) = cos x − 1` this gives `L = v²/2 + 1 − cos x`, whose hyperbolic
//! fixed point sits at `(0, 0)` and whose separatrix is `v = ±2 sin(x/2)`.
//!
//! Positions are stored as plain reals and reduced mod `2π` only for metric
//! purposes, so lifts of orbits stay available.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Circumference of the configuration circle.
pub const CIRCLE: f64 = std::f64::consts::TAU;

/// Reduce a position to the fundamental domain `[0, 2π)`.
pub fn wrap_position(x: f64) -> f64 {
    let r = x % CIRCLE;
    if r < 0.0 {
        r + CIRCLE
    } else {
        r
    }
}

/// Signed displacement wrapped to `(-π, π]`.
pub fn wrap_signed(d: f64) -> f64 {
    let r = wrap_position(d);
    if r > std::f64::consts::PI {
        r - CIRCLE
    } else {
        r
    }
}

/// Shortest distance between two positions on the circle.
pub fn torus_dist(a: f64, b: f64) -> f64 {
    wrap_signed(a - b).abs()
}

/// A constant closed 1-form `c·dx`, i.e. a class in H¹ of the circle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohomologyClass(pub f64);

impl CohomologyClass {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<f64> for CohomologyClass {
    fn from(c: f64) -> Self {
        CohomologyClass(c)
    }
}

/// Scalar potential on the circle.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Potential {
    /// `U(x) = cos x − 1`.
    Pendulum,
    /// `U ≡ 0`.
    Free,
    /// `constant + Σ_k (a_k cos kx + b_k sin kx)`, coefficients listed as
    /// `[a_k, b_k]` pairs starting at `k = 1`.
    Fourier {
        #[serde(default)]
        constant: f64,
        coefficients: Vec<(f64, f64)>,
    },
    /// Smooth bump vanishing on a set of centers:
    /// `amplitude · (1 − exp(−(d/delta)²))` with `d` the torus distance to
    /// the nearest center.
    Bump {
        centers: Vec<f64>,
        delta: f64,
        amplitude: f64,
    },
    /// Pointwise sum of other potentials.
    Sum { terms: Vec<Potential> },
}

impl Potential {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Potential::Pendulum => x.cos() - 1.0,
            Potential::Free => 0.0,
            Potential::Fourier {
                constant,
                coefficients,
            } => {
                let mut u = *constant;
                for (k, (a, b)) in coefficients.iter().enumerate() {
                    let kx = (k + 1) as f64 * x;
                    u += a * kx.cos() + b * kx.sin();
                }
                u
            }
            Potential::Bump {
                centers,
                delta,
                amplitude,
            } => {
                let d = centers
                    .iter()
                    .map(|&c| torus_dist(x, c))
                    .fold(f64::INFINITY, f64::min);
                if d.is_finite() {
                    amplitude * (1.0 - (-(d / delta).powi(2)).exp())
                } else {
                    0.0
                }
            }
            Potential::Sum { terms } => terms.iter().map(|t| t.eval(x)).sum(),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Potential::Pendulum => -x.sin(),
            Potential::Free => 0.0,
            Potential::Fourier { coefficients, .. } => {
                let mut du = 0.0;
                for (k, (a, b)) in coefficients.iter().enumerate() {
                    let kf = (k + 1) as f64;
                    let kx = kf * x;
                    du += -a * kf * kx.sin() + b * kf * kx.cos();
                }
                du
            }
            Potential::Bump {
                centers,
                delta,
                amplitude,
            } => {
                let mut best = f64::INFINITY;
                let mut signed = 0.0;
                for &c in centers {
                    let s = wrap_signed(x - c);
                    if s.abs() < best {
                        best = s.abs();
                        signed = s;
                    }
                }
                if !best.is_finite() {
                    return 0.0;
                }
                let d = best;
                amplitude * (-(d / delta).powi(2)).exp() * 2.0 * signed / (delta * delta)
            }
            Potential::Sum { terms } => terms.iter().map(|t| t.derivative(x)).sum(),
        }
    }
}

/// A mechanical Lagrangian `L(x, v) = m v²/2 − U(x) + φ(x)` on the circle.
///
/// `L_vv = m > 0` gives convexity and the quadratic kinetic term gives
/// superlinearity, so every spec that validates is Tonelli.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LagrangianSpec {
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    #[serde(default = "default_mass")]
    pub mass: f64,
    pub potential: Potential,
    #[serde(default)]
    pub perturbation: Option<Potential>,
}

fn default_dimension() -> usize {
    1
}

fn default_mass() -> f64 {
    1.0
}

impl LagrangianSpec {
    pub fn pendulum() -> Self {
        LagrangianSpec {
            dimension: 1,
            mass: 1.0,
            potential: Potential::Pendulum,
            perturbation: None,
        }
    }

    pub fn free() -> Self {
        LagrangianSpec {
            dimension: 1,
            mass: 1.0,
            potential: Potential::Free,
            perturbation: None,
        }
    }

    /// Same spec with an extra perturbation term added on top of any
    /// existing one.
    pub fn with_perturbation(&self, bump: Potential) -> Self {
        let perturbation = match &self.perturbation {
            None => Some(bump),
            Some(p) => Some(Potential::Sum {
                terms: vec![p.clone(), bump],
            }),
        };
        LagrangianSpec {
            perturbation,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension != 1 {
            return Err(Error::InvalidLagrangian(format!(
                "only dimension 1 is supported, got {}",
                self.dimension
            )));
        }
        if !(self.mass > 0.0) || !self.mass.is_finite() {
            return Err(Error::InvalidLagrangian(format!(
                "mass must be positive and finite, got {}",
                self.mass
            )));
        }
        Ok(())
    }

    /// The potential-energy term of the Hamiltonian, `U(x) − φ(x)`.
    pub fn hamiltonian_potential(&self, x: f64) -> f64 {
        let u = self.potential.eval(x);
        match &self.perturbation {
            Some(p) => u - p.eval(x),
            None => u,
        }
    }

    /// Configuration force `m ẍ = −(U − φ)'(x)`.
    pub fn force(&self, x: f64) -> f64 {
        let du = self.potential.derivative(x);
        match &self.perturbation {
            Some(p) => -du + p.derivative(x),
            None => -du,
        }
    }

    /// `L(x, v) = m v²/2 − U(x) + φ(x)`.
    pub fn lagrangian(&self, x: f64, v: f64) -> f64 {
        0.5 * self.mass * v * v - self.hamiltonian_potential(x)
    }

    /// Legendre transform at `(x, v)`: momentum `p = m v` and energy
    /// `H(x, p) = p²/(2m) + U(x) − φ(x)`, so `⟨p, v⟩ − L = H` exactly.
    pub fn legendre(&self, x: f64, v: f64) -> (f64, f64) {
        let p = self.mass * v;
        let h = p * p / (2.0 * self.mass) + self.hamiltonian_potential(x);
        (p, h)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let spec: LagrangianSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_json_file(path: &std::path::Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

/// One integrated trajectory with per-sample energies.
#[derive(Clone, Debug)]
pub struct OrbitSegment {
    pub times: Vec<f64>,
    /// `(x, v)` pairs; positions are unwrapped lifts.
    pub states: Vec<(f64, f64)>,
    pub energy: Vec<f64>,
}

impl OrbitSegment {
    pub fn max_energy_drift(&self) -> f64 {
        let e0 = self.energy.first().copied().unwrap_or(0.0);
        self.energy
            .iter()
            .map(|e| (e - e0).abs())
            .fold(0.0, f64::max)
    }
}

/// One velocity-Verlet step for `m ẍ = force(x)`.
fn verlet_step(spec: &LagrangianSpec, x: f64, v: f64, dt: f64) -> (f64, f64) {
    let inv_m = 1.0 / spec.mass;
    let v_half = v + 0.5 * dt * spec.force(x) * inv_m;
    let x_new = x + dt * v_half;
    let v_new = v_half + 0.5 * dt * spec.force(x_new) * inv_m;
    (x_new, v_new)
}

/// Integrate the Euler-Lagrange flow from `(x0, v0)` with a fixed step.
///
/// Second-order symplectic (velocity Verlet), so the energy drift over
/// `n_steps` stays `O(step²)`.
pub fn integrate_orbit(
    spec: &LagrangianSpec,
    x0: f64,
    v0: f64,
    step: f64,
    n_steps: usize,
) -> Result<OrbitSegment> {
    spec.validate()?;
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "integrator step must be positive and finite, got {step}"
        )));
    }
    if !x0.is_finite() || !v0.is_finite() {
        return Err(Error::InvalidArgument(
            "non-finite initial state".to_string(),
        ));
    }
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut energy = Vec::with_capacity(n_steps + 1);
    let (mut x, mut v) = (x0, v0);
    for k in 0..=n_steps {
        times.push(k as f64 * step);
        states.push((x, v));
        energy.push(spec.legendre(x, v).1);
        if k < n_steps {
            let (xn, vn) = verlet_step(spec, x, v, step);
            x = xn;
            v = vn;
        }
    }
    Ok(OrbitSegment {
        times,
        states,
        energy,
    })
}

/// Result of one streamed orbit leg used by the set extractors.
pub(crate) struct ActionLeg {
    pub x_end: f64,
    /// Accumulated `∫ (L − c·v) dt` along the true (possibly backward) leg.
    pub action: f64,
    pub max_speed: f64,
}

/// Integrate one leg of length `n·dt` and accumulate the c-corrected action
/// without storing the trajectory.
///
/// With `backward` the leg covers `[-n·dt, 0]` of the true orbit through
/// `(x0, v0)`: since `L` is even in `v`, running the reversed state forward
/// while flipping the sign on the `c·v` term integrates the same action.
pub(crate) fn action_leg(
    spec: &LagrangianSpec,
    x0: f64,
    v0: f64,
    dt: f64,
    n: usize,
    c: f64,
    backward: bool,
) -> ActionLeg {
    let sign = if backward { -1.0 } else { 1.0 };
    let mut x = x0;
    let mut v = sign * v0;
    let mut action = 0.0;
    let mut max_speed = v.abs();
    let inv_m = 1.0 / spec.mass;
    for _ in 0..n {
        let v_half = v + 0.5 * dt * spec.force(x) * inv_m;
        let x_mid = x + 0.5 * dt * v_half;
        action += dt * (spec.lagrangian(x_mid, v_half) - sign * c * v_half);
        x += dt * v_half;
        v = v_half + 0.5 * dt * spec.force(x) * inv_m;
        max_speed = max_speed.max(v.abs());
    }
    ActionLeg {
        x_end: x,
        action,
        max_speed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn pendulum_lagrangian_values() {
        let p = LagrangianSpec::pendulum();
        assert!((p.lagrangian(0.0, 0.0) - 0.0).abs() < 1e-15);
        assert!((p.lagrangian(PI, 0.0) - 2.0).abs() < 1e-15);
        let f = LagrangianSpec::free();
        assert!((f.lagrangian(1.7, 2.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn legendre_values() {
        let p = LagrangianSpec::pendulum();
        assert_eq!(p.legendre(0.0, 0.0), (0.0, 0.0));
        let (mom, h) = p.legendre(PI, 0.0);
        assert_eq!(mom, 0.0);
        assert!((h + 2.0).abs() < 1e-15);
        let f = LagrangianSpec::free();
        let (mom, h) = f.legendre(0.3, 3.0);
        assert!((mom - 3.0).abs() < 1e-15);
        assert!((h - 4.5).abs() < 1e-15);
    }

    #[test]
    fn fixed_points_stay_put() {
        let p = LagrangianSpec::pendulum();
        for x0 in [0.0, PI] {
            let orbit = integrate_orbit(&p, x0, 0.0, 0.01, 1000).unwrap();
            let (x, v) = *orbit.states.last().unwrap();
            assert!((x - x0).abs() < 1e-12 && v.abs() < 1e-12);
        }
    }

    #[test]
    fn energy_drift_near_separatrix() {
        // Oracle: the integrator itself at halved step.  Second order means
        // the drift shrinks by about 4x; both must sit under 1e-4.
        let p = LagrangianSpec::pendulum();
        let drift = |step: f64, n: usize| {
            integrate_orbit(&p, PI, 2.0 - 1e-3, step, n)
                .unwrap()
                .max_energy_drift()
        };
        let d1 = drift(1e-3, 10_000);
        let d2 = drift(5e-4, 20_000);
        assert!(d1 <= 1e-4, "drift {d1}");
        assert!(d2 <= d1 / 2.0, "no second-order gain: {d1} -> {d2}");
    }

    #[test]
    fn integrator_reversible() {
        let p = LagrangianSpec::pendulum();
        let fwd = integrate_orbit(&p, 1.0, 0.5, 1e-3, 5000).unwrap();
        let (xe, ve) = *fwd.states.last().unwrap();
        let back = integrate_orbit(&p, xe, -ve, 1e-3, 5000).unwrap();
        let (xb, vb) = *back.states.last().unwrap();
        assert!((xb - 1.0).abs() < 1e-6, "x came back to {xb}");
        assert!((-vb - 0.5).abs() < 1e-6, "v came back to {}", -vb);
    }

    #[test]
    fn rejects_bad_input() {
        let p = LagrangianSpec::pendulum();
        assert!(integrate_orbit(&p, 0.0, 0.0, 0.0, 10).is_err());
        assert!(integrate_orbit(&p, 0.0, 0.0, -0.1, 10).is_err());
        assert!(integrate_orbit(&p, f64::NAN, 0.0, 0.1, 10).is_err());
        let bad = LagrangianSpec {
            mass: -1.0,
            ..LagrangianSpec::free()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{
            "mass": 1.0,
            "potential": {"kind": "pendulum"},
            "perturbation": null
        }"#;
        let spec = LagrangianSpec::from_json_str(text).unwrap();
        assert!((spec.lagrangian(PI, 0.0) - 2.0).abs() < 1e-15);

        let fourier = r#"{
            "potential": {"kind": "fourier", "coefficients": [[0.5, 0.0], [0.0, -0.25]]}
        }"#;
        let spec = LagrangianSpec::from_json_str(fourier).unwrap();
        let expect = 0.5 * (1.3f64).cos() - 0.25 * (2.0 * 1.3f64).sin();
        assert!((spec.hamiltonian_potential(1.3) - expect).abs() < 1e-15);
    }

    #[test]
    fn bump_vanishes_on_centers() {
        let bump = Potential::Bump {
            centers: vec![0.0, PI],
            delta: 0.1,
            amplitude: 0.05,
        };
        assert!(bump.eval(0.0).abs() < 1e-15);
        assert!(bump.eval(PI).abs() < 1e-15);
        assert!(bump.eval(PI / 2.0) > 0.04);
        // derivative vanishes at the centers and at the far midpoint
        assert!(bump.derivative(0.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn lagrangian_is_periodic(x in -50.0..50.0f64, v in -5.0..5.0f64) {
            let p = LagrangianSpec::pendulum();
            let a = p.lagrangian(x, v);
            let b = p.lagrangian(x + CIRCLE, v);
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }

        #[test]
        fn legendre_consistency(x in 0.0..CIRCLE, v in -8.0..8.0f64, m in 0.5..3.0f64) {
            let spec = LagrangianSpec {
                mass: m,
                ..LagrangianSpec::pendulum()
            };
            let (p, h) = spec.legendre(x, v);
            let gap = p * v - spec.lagrangian(x, v) - h;
            prop_assert!(gap.abs() <= 1e-12, "Fenchel identity violated by {gap}");
        }
    }
}
