//! Classical relativistic motion along the symmetry line `z = 0`.
//!
//! These integrators are deliberately independent of the lattice code: they
//! evaluate the on-axis forces from closed-form expressions and share only
//! the unit system with the solver.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::{ObservableRecord, ObservableSeries};
use crate::potentials::{DipoleLineSpec, DipoleOrientation, SolenoidPairSpec};
use crate::units::{UnitSystem, C, ELECTRON_REST_ENERGY_MEV};

/// Point on a one-dimensional trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalState {
    pub t: f64,
    pub x: f64,
    /// Units of c.
    pub v: f64,
    /// Kinetic momentum (MeV/c).
    pub p: f64,
}

impl ClassicalState {
    /// State with momentum `p` at `x`, `t = 0`.
    pub fn from_momentum(x: f64, p: f64, mass: f64) -> Self {
        Self {
            t: 0.0,
            x,
            v: speed_of(p, mass),
            p,
        }
    }
}

/// Charge (units of e) and rest energy (MeV) of the classical particle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub charge: f64,
    pub mass: f64,
}

impl Particle {
    pub fn electron() -> Self {
        Self {
            charge: -1.0,
            mass: ELECTRON_REST_ENERGY_MEV,
        }
    }

    pub fn positron() -> Self {
        Self {
            charge: 1.0,
            ..Self::electron()
        }
    }
}

#[inline]
fn speed_of(p: f64, mass: f64) -> f64 {
    p * C / (p * p * C * C + mass * mass).sqrt()
}

#[inline]
fn momentum_of(v: f64, mass: f64) -> f64 {
    mass * v / (C * (1.0 - v * v).sqrt())
}

/// On-axis force law of one configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Model {
    /// `dp/dt = -q dA0/dx` for dipoles along x.
    DipoleParallel { prefactor: f64, a: f64 },
    /// `dp/dt = -q dA0/dx` for anti-parallel dipoles along z.
    DipolePerpendicular { prefactor: f64, a: f64 },
    /// `dp/dt = -q v dAx/dx` (conserves `p + q Ax`).
    CanonicalConservation { flux: f64, a: f64 },
}

impl Model {
    pub fn dipoles(spec: &DipoleLineSpec) -> Result<Self> {
        spec.validate()?;
        let prefactor = spec.sign * UnitSystem::natural().dipole_prefactor(spec.line_density);
        let a = spec.half_separation;
        Ok(match spec.orientation {
            DipoleOrientation::Parallel => Model::DipoleParallel { prefactor, a },
            DipoleOrientation::Perpendicular => Model::DipolePerpendicular { prefactor, a },
        })
    }

    pub fn solenoids(spec: &SolenoidPairSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Model::CanonicalConservation {
            flux: UnitSystem::natural().weber_to_internal(spec.flux),
            a: spec.half_separation,
        })
    }

    /// Scalar potential on the axis (MV).
    pub fn scalar_potential(&self, x: f64) -> f64 {
        match *self {
            Model::DipoleParallel { prefactor, a } => prefactor * 2.0 * x / (x * x + a * a),
            Model::DipolePerpendicular { prefactor, a } => -prefactor * 2.0 * a / (x * x + a * a),
            Model::CanonicalConservation { .. } => 0.0,
        }
    }

    /// x-component of the vector potential on the axis.
    pub fn vector_potential_x(&self, x: f64) -> f64 {
        match *self {
            Model::CanonicalConservation { flux, a } => -flux * a / (PI * (x * x + a * a)),
            _ => 0.0,
        }
    }

    /// `dp/dt` (MeV per nm) for charge `q` at position `x` and speed `v`.
    pub fn force(&self, q: f64, x: f64, v: f64) -> f64 {
        let d = |a: f64| x * x + a * a;
        match *self {
            Model::DipoleParallel { prefactor, a } => {
                -q * 2.0 * prefactor * (a * a - x * x) / (d(a) * d(a))
            }
            Model::DipolePerpendicular { prefactor, a } => {
                -q * 4.0 * prefactor * a * x / (d(a) * d(a))
            }
            Model::CanonicalConservation { flux, a } => {
                let slope = 2.0 * flux * a * x / (PI * d(a) * d(a));
                -q * slope * v * C
            }
        }
    }
}

/// Sampled classical trajectory with the derivatives needed for
/// fourth-order dense output.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<ClassicalState>,
    /// `dp/dt` at each state.
    pub forces: Vec<f64>,
}

impl Trajectory {
    /// Speed at position `x` by cubic Hermite interpolation in time.
    ///
    /// Returns `None` outside the covered range. Assumes monotonic motion.
    pub fn velocity_at(&self, x: f64, particle: &Particle) -> Option<f64> {
        let s = &self.states;
        let idx = s.windows(2).position(|w| {
            let (lo, hi) = (w[0].x.min(w[1].x), w[0].x.max(w[1].x));
            (lo..=hi).contains(&x)
        })?;
        let (a, b) = (s[idx], s[idx + 1]);
        let (fa, fb) = (self.forces[idx], self.forces[idx + 1]);
        let h = b.t - a.t;
        // Newton iteration for the time at which x(t) = x on the Hermite
        // cubic of position (derivatives are the velocities).
        let pos = |tau: f64| hermite(a.x, b.x, a.v * C, b.v * C, h, tau);
        let vel = |tau: f64| hermite_slope(a.x, b.x, a.v * C, b.v * C, h, tau);
        let mut tau = if b.x != a.x { (x - a.x) / (b.x - a.x) } else { 0.0 };
        for _ in 0..20 {
            let f = pos(tau) - x;
            let df = vel(tau) * h;
            if df == 0.0 {
                break;
            }
            let next = (tau - f / df).clamp(0.0, 1.0);
            if (next - tau).abs() < 1e-15 {
                tau = next;
                break;
            }
            tau = next;
        }
        let p = hermite(a.p, b.p, fa, fb, h, tau);
        Some(speed_of(p, particle.mass))
    }

    /// `(x, v)` pairs of the stored states.
    pub fn velocity_profile(&self) -> Vec<(f64, f64)> {
        self.states.iter().map(|s| (s.x, s.v)).collect()
    }

    pub fn last(&self) -> Option<&ClassicalState> {
        self.states.last()
    }

    /// Converts to the quantum series layout: `x` in the centre column,
    /// `v` in `vx`, `p` in `pmx`, `E_kin + q A0` in `energy` and
    /// `p + q Ax` in `pcx`.
    pub fn to_series(&self, model: &Model, particle: &Particle) -> ObservableSeries {
        let q = particle.charge;
        let records = self
            .states
            .iter()
            .map(|s| ObservableRecord {
                t: s.t,
                norm: 1.0,
                center: [s.x, 0.0, 0.0],
                velocity: [s.v, 0.0, 0.0],
                energy: (s.p * s.p * C * C + particle.mass * particle.mass).sqrt()
                    + q * model.scalar_potential(s.x),
                p_mech: [s.p, 0.0, 0.0],
                p_canon: [s.p + q * model.vector_potential_x(s.x), 0.0, 0.0],
            })
            .collect();
        ObservableSeries {
            records,
            failure: None,
        }
    }
}

fn hermite(y0: f64, y1: f64, d0: f64, d1: f64, h: f64, s: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * d0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * d1
}

/// d/ds of [`hermite`] divided by `h`.
fn hermite_slope(y0: f64, y1: f64, d0: f64, d1: f64, h: f64, s: f64) -> f64 {
    let s2 = s * s;
    ((6.0 * s2 - 6.0 * s) * y0
        + (3.0 * s2 - 4.0 * s + 1.0) * h * d0
        + (-6.0 * s2 + 6.0 * s) * y1
        + (3.0 * s2 - 2.0 * s) * h * d1)
        / h
}

/// When to stop integrating.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Stop {
    /// First step at which `x` reaches or passes the value (direction of
    /// the initial velocity).
    Position(f64),
    /// Exactly `n` steps.
    Steps(usize),
}

const MAX_STEPS: usize = 50_000_000;

fn check(state: &ClassicalState) -> Result<()> {
    if !(state.x.is_finite() && state.p.is_finite() && state.v.is_finite()) {
        return Err(Error::Trajectory(format!("non-finite state at t = {}", state.t)));
    }
    if state.v.abs() >= 1.0 - 1e-12 {
        return Err(Error::Trajectory(format!(
            "speed reached c at x = {} (t = {})",
            state.x, state.t
        )));
    }
    Ok(())
}

/// Classic fourth-order Runge-Kutta on `(x, p)`.
pub fn integrate(
    model: &Model,
    particle: &Particle,
    initial: ClassicalState,
    dt: f64,
    stop: Stop,
) -> Result<Trajectory> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("time step {dt} must be positive")));
    }
    check(&initial)?;
    let (q, m) = (particle.charge, particle.mass);
    let rhs = |x: f64, p: f64| {
        let v = speed_of(p, m);
        (v * C, model.force(q, x, v))
    };
    let dir = initial.v.signum();
    let mut s = ClassicalState {
        v: speed_of(initial.p, m),
        ..initial
    };
    let mut traj = Trajectory::default();
    traj.states.push(s);
    traj.forces.push(rhs(s.x, s.p).1);
    let mut n = 0usize;
    loop {
        match stop {
            Stop::Steps(total) if n >= total => break,
            Stop::Position(x_end) if dir * (s.x - x_end) >= 0.0 && n > 0 => break,
            _ => {}
        }
        if n >= MAX_STEPS {
            return Err(Error::Trajectory("step limit exceeded".into()));
        }
        let (k1x, k1p) = rhs(s.x, s.p);
        let (k2x, k2p) = rhs(s.x + 0.5 * dt * k1x, s.p + 0.5 * dt * k1p);
        let (k3x, k3p) = rhs(s.x + 0.5 * dt * k2x, s.p + 0.5 * dt * k2p);
        let (k4x, k4p) = rhs(s.x + dt * k3x, s.p + dt * k3p);
        let x = s.x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        let p = s.p + dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        n += 1;
        s = ClassicalState {
            t: initial.t + n as f64 * dt,
            x,
            v: speed_of(p, m),
            p,
        };
        check(&s)?;
        if let Stop::Position(_) = stop {
            if s.v * dir <= 0.0 {
                return Err(Error::Trajectory(format!(
                    "particle turned back at x = {}",
                    s.x
                )));
            }
        }
        traj.states.push(s);
        traj.forces.push(rhs(s.x, s.p).1);
    }
    Ok(traj)
}

/// Same dynamics integrated as `dv/dt = F (1 - v^2)^(3/2) / m` (RK4 on
/// `(x, v)`); used to cross-check [`integrate`].
pub fn integrate_velocity_form(
    model: &Model,
    particle: &Particle,
    initial: ClassicalState,
    dt: f64,
    steps: usize,
) -> Result<Vec<ClassicalState>> {
    check(&initial)?;
    let (q, m) = (particle.charge, particle.mass);
    let rhs = |x: f64, v: f64| {
        let g = (1.0 - v * v).powf(1.5);
        (v * C, model.force(q, x, v) * g * C / m)
    };
    let mut out = Vec::with_capacity(steps + 1);
    let mut s = initial;
    out.push(s);
    for n in 1..=steps {
        let (k1x, k1v) = rhs(s.x, s.v);
        let (k2x, k2v) = rhs(s.x + 0.5 * dt * k1x, s.v + 0.5 * dt * k1v);
        let (k3x, k3v) = rhs(s.x + 0.5 * dt * k2x, s.v + 0.5 * dt * k2v);
        let (k4x, k4v) = rhs(s.x + dt * k3x, s.v + dt * k3v);
        let x = s.x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        let v = s.v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        s = ClassicalState {
            t: initial.t + n as f64 * dt,
            x,
            v,
            p: momentum_of(v, m),
        };
        check(&s)?;
        out.push(s);
    }
    Ok(out)
}

/// Integrates to `x_end`, halving `dt` until the speed at a set of sample
/// positions changes by less than `rtol` (relative). Returns the finest
/// trajectory and the step that produced it.
pub fn integrate_converged(
    model: &Model,
    particle: &Particle,
    initial: ClassicalState,
    x_end: f64,
    dt: f64,
    rtol: f64,
) -> Result<(Trajectory, f64)> {
    const SAMPLES: usize = 64;
    let probes: Vec<f64> = (1..SAMPLES)
        .map(|i| initial.x + (x_end - initial.x) * i as f64 / SAMPLES as f64)
        .collect();
    let sample = |t: &Trajectory| -> Vec<f64> {
        probes
            .iter()
            .map(|&x| t.velocity_at(x, particle).unwrap_or(f64::NAN))
            .collect()
    };
    let mut dt = dt;
    let mut prev = integrate(model, particle, initial, dt, Stop::Position(x_end))?;
    let mut prev_v = sample(&prev);
    for _ in 0..20 {
        dt *= 0.5;
        let next = integrate(model, particle, initial, dt, Stop::Position(x_end))?;
        let next_v = sample(&next);
        let change = prev_v
            .iter()
            .zip(&next_v)
            .map(|(a, b)| ((a - b) / b).abs())
            .fold(0.0, f64::max);
        prev = next;
        prev_v = next_v;
        if change < rtol {
            return Ok((prev, dt));
        }
    }
    Err(Error::Trajectory("step halving did not converge".into()))
}

fn require_orientation(spec: &DipoleLineSpec, want: DipoleOrientation) -> Result<()> {
    if spec.orientation != want {
        return Err(Error::InvalidParameter(format!(
            "expected {} dipoles, got {}",
            want.name(),
            spec.orientation.name()
        )));
    }
    Ok(())
}

/// Motion on the axis between dipole lines oriented along x.
pub fn integrate_dipole_parallel(
    spec: &DipoleLineSpec,
    particle: &Particle,
    initial: ClassicalState,
    x_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    require_orientation(spec, DipoleOrientation::Parallel)?;
    integrate(&Model::dipoles(spec)?, particle, initial, dt, Stop::Position(x_end))
}

/// Motion on the axis between anti-parallel dipole lines oriented along z.
pub fn integrate_dipole_perpendicular(
    spec: &DipoleLineSpec,
    particle: &Particle,
    initial: ClassicalState,
    x_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    require_orientation(spec, DipoleOrientation::Perpendicular)?;
    integrate(&Model::dipoles(spec)?, particle, initial, dt, Stop::Position(x_end))
}

/// Motion on the mid-line of a solenoid pair assuming `p + q Ax` is conserved.
pub fn integrate_canonical_conservation(
    spec: &SolenoidPairSpec,
    particle: &Particle,
    initial: ClassicalState,
    x_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    if initial.x.abs() < 8.0 * spec.half_separation {
        return Err(Error::InvalidParameter(format!(
            "start |x| = {} must be at least 8 half-separations ({})",
            initial.x.abs(),
            8.0 * spec.half_separation
        )));
    }
    integrate(&Model::solenoids(spec)?, particle, initial, dt, Stop::Position(x_end))
}

/// Largest `|p + q Ax - (p0 + q Ax0)|` along a trajectory (MeV/c).
pub fn conserved_quantity_check(
    traj: &Trajectory,
    spec: &SolenoidPairSpec,
    particle: &Particle,
) -> Result<f64> {
    let model = Model::solenoids(spec)?;
    Ok(max_deviation(traj, |s| {
        s.p + particle.charge * model.vector_potential_x(s.x)
    }))
}

/// Largest `|E_kin + q A0 - initial|` along a trajectory (MeV).
pub fn energy_check(traj: &Trajectory, model: &Model, particle: &Particle) -> f64 {
    max_deviation(traj, |s| {
        (s.p * s.p * C * C + particle.mass * particle.mass).sqrt()
            + particle.charge * model.scalar_potential(s.x)
    })
}

fn max_deviation(traj: &Trajectory, f: impl Fn(&ClassicalState) -> f64) -> f64 {
    let Some(first) = traj.states.first() else {
        return 0.0;
    };
    let f0 = f(first);
    traj.states
        .iter()
        .map(|s| (f(s) - f0).abs())
        .fold(0.0, f64::max)
}

/// Size of the `q (dv/dt) Ax` term dropped when canonical-momentum
/// conservation is derived from energy balance, at each state (MeV per nm).
pub fn neglected_term(traj: &Trajectory, model: &Model, particle: &Particle) -> Vec<f64> {
    traj.states
        .iter()
        .zip(&traj.forces)
        .map(|(s, &f)| {
            let accel = f * (1.0 - s.v * s.v).powf(1.5) * C / particle.mass;
            (particle.charge * accel * model.vector_potential_x(s.x)).abs()
        })
        .collect()
}

/// Radius `p / (|q| B)` (nm) of the circular orbit of momentum `p` (MeV/c)
/// in a uniform field `b0` (tesla).
pub fn classical_orbit_radius(p: f64, b0: f64) -> Result<f64> {
    if b0 == 0.0 || !b0.is_finite() {
        return Err(Error::InvalidParameter(format!("field {b0} T must be non-zero")));
    }
    Ok(p.abs() / UnitSystem::natural().tesla_to_internal(b0.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const M: f64 = ELECTRON_REST_ENERGY_MEV;

    fn reference_dipoles(orientation: DipoleOrientation) -> DipoleLineSpec {
        DipoleLineSpec {
            line_density: 1.7e-17,
            half_separation: 0.19,
            orientation,
            sign: 1.0,
        }
    }

    fn pair(flux: f64) -> SolenoidPairSpec {
        SolenoidPairSpec {
            flux,
            half_separation: 0.05,
            radius: 0.01,
        }
    }

    #[test]
    fn orbit_radius_values() {
        let r = classical_orbit_radius(0.53, 1e8).unwrap();
        assert!((r - 1.768e-2).abs() < 1e-5, "{r}");
        assert!((classical_orbit_radius(0.64, 1e8).unwrap() - 2.135e-2).abs() < 1e-5);
        assert_eq!(classical_orbit_radius(1.06, 1e8).unwrap(), 2.0 * r);
        assert!(classical_orbit_radius(0.5, 0.0).is_err());
    }

    #[test]
    fn zero_strength_means_constant_speed() {
        let e = Particle::electron();
        let s0 = ClassicalState::from_momentum(-0.4, 0.09, M);
        let mut spec = reference_dipoles(DipoleOrientation::Parallel);
        spec.line_density = 0.0;
        let t = integrate_dipole_parallel(&spec, &e, s0, 0.4, 1e-3).unwrap();
        assert!(t.states.iter().all(|s| s.v == s0.v && s.p == s0.p));
        let s0 = ClassicalState::from_momentum(-0.8, 0.53, M);
        let t = integrate_canonical_conservation(&pair(0.0), &e, s0, 0.8, 1e-3).unwrap();
        assert!(t.states.iter().all(|s| s.v == s0.v));
    }

    #[test]
    fn perpendicular_force_vanishes_at_center() {
        let m = Model::dipoles(&reference_dipoles(DipoleOrientation::Perpendicular)).unwrap();
        assert_eq!(m.force(-1.0, 0.0, 0.2), 0.0);
        assert!((m.force(-1.0, 0.1, 0.2) + m.force(-1.0, -0.1, 0.2)).abs() < 1e-15);
    }

    #[test]
    fn charge_flip_mirrors_force() {
        for o in [DipoleOrientation::Parallel, DipoleOrientation::Perpendicular] {
            let m = Model::dipoles(&reference_dipoles(o)).unwrap();
            for x in [-0.3, -0.05, 0.2] {
                assert_eq!(m.force(1.0, x, 0.1), -m.force(-1.0, x, 0.1));
            }
        }
    }

    #[test]
    fn velocity_form_agrees() {
        let e = Particle::electron();
        let model = Model::solenoids(&pair(-5.2e-14)).unwrap();
        let s0 = ClassicalState::from_momentum(-0.8, 0.53, M);
        let dt = 2e-4;
        let n = 8000;
        let a = integrate(&model, &e, s0, dt, Stop::Steps(n)).unwrap();
        let b = integrate_velocity_form(&model, &e, s0, dt, n).unwrap();
        for (x, y) in a.states.iter().zip(&b) {
            assert!((x.v - y.v).abs() < 1e-9, "{} vs {}", x.v, y.v);
        }
    }

    #[test]
    fn hermite_interpolation_recovers_states() {
        let e = Particle::electron();
        let s0 = ClassicalState::from_momentum(-0.4, 0.09, M);
        let t = integrate_dipole_parallel(&reference_dipoles(DipoleOrientation::Parallel), &e, s0, 0.4, 1e-2)
            .unwrap();
        let mid = t.states[t.states.len() / 2];
        let v = t.velocity_at(mid.x, &e).unwrap();
        assert!((v - mid.v).abs() < 1e-12);
        assert!(t.velocity_at(5.0, &e).is_none());
    }

    #[test]
    fn flux_and_charge_flip_together_is_identity() {
        let s0 = ClassicalState::from_momentum(-0.8, 0.53, M);
        let a = integrate_canonical_conservation(&pair(5.2e-14), &Particle::electron(), s0, 0.8, 1e-3)
            .unwrap();
        let b = integrate_canonical_conservation(&pair(-5.2e-14), &Particle::positron(), s0, 0.8, 1e-3)
            .unwrap();
        assert_eq!(a.states, b.states);
    }

    #[test]
    fn start_too_close_is_rejected() {
        let s0 = ClassicalState::from_momentum(-0.2, 0.53, M);
        assert!(integrate_canonical_conservation(&pair(5.2e-14), &Particle::electron(), s0, 0.8, 1e-3).is_err());
    }

    proptest! {
        #[test]
        fn charge_flip_reverses_force(x in -1.0f64..1.0, v in 0.01f64..0.99) {
            for model in [
                Model::dipoles(&reference_dipoles(DipoleOrientation::Parallel)).unwrap(),
                Model::dipoles(&reference_dipoles(DipoleOrientation::Perpendicular)).unwrap(),
                Model::solenoids(&pair(-5.2e-14)).unwrap(),
            ] {
                prop_assert_eq!(model.force(-1.0, x, v), -model.force(1.0, x, v));
            }
        }

        #[test]
        fn momentum_and_velocity_agree(p in -2.0f64..2.0) {
            let s = ClassicalState::from_momentum(0.0, p, M);
            let back = s.v * M / (1.0 - s.v * s.v).sqrt();
            prop_assert!((back - p).abs() < 1e-12 * p.abs().max(1e-3));
            prop_assert!(s.v.abs() < 1.0);
        }
    }
}
