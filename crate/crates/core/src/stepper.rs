//! Leapfrog update of the Dirac spinor.
//!
//! With `H = c alpha.(p - q A) + beta m c^2 + q A0` in the Dirac
//! representation, each pair of components is driven only by the other
//! pair through the off-diagonal `alpha` blocks. Components 1-2 therefore
//! live half a step before components 3-4 and the two pairs are advanced
//! alternately:
//!
//! ```text
//! psi_12(n + 1/2) = R_+ psi_12(n - 1/2) + (dt / C_+) L psi_34(n)
//! psi_34(n + 1)   = R_- psi_34(n)       + (dt / C_-) L psi_12(n + 1/2)
//! ```
//!
//! where `C_+- = 1 + i dt/(2 hbar) (+-m c^2 + q A0)` and `R = (2 - C)/C`
//! treat the diagonal term by the trapezoidal rule, and `L` holds the
//! centred differences (over `2 delta`) and the vector-potential coupling.
//! Cells are independent within one half-update, so the result is
//! bit-identical for any number of worker threads.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::observables::{self, ObservableRecord, ObservableSeries, RunFailure};
use crate::potentials::{FourPotential, SampledPotential};
use crate::spinor::SpinorField;
use crate::units::{C, ELECTRON_REST_ENERGY_MEV, HBAR};

/// Outer boundary treatment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Boundary {
    /// The outermost shell of cells is held at zero.
    Reflecting,
    /// Reflecting shell plus a layer of `width` cells in which the field is
    /// multiplied after every step by `1 - strength * (1 + cos(pi d / width)) / 2`,
    /// `d` being the distance (in cells) from the outer shell.
    DampingLayer { width: usize, strength: f64 },
}

/// Particle parameters for the update.
///
/// `charge` is in units of `e`: `-1` is an electron, `+1` a positron
/// (modelled as a sign flip of the coupling, not as a charge-conjugated
/// spinor). `mass` is the rest energy in MeV.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepperConfig {
    pub charge: f64,
    pub mass: f64,
    pub boundary: Boundary,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self::electron()
    }
}

impl StepperConfig {
    pub fn electron() -> Self {
        Self {
            charge: -1.0,
            mass: ELECTRON_REST_ENERGY_MEV,
            boundary: Boundary::Reflecting,
        }
    }

    pub fn positron() -> Self {
        Self {
            charge: 1.0,
            ..Self::electron()
        }
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if !(self.mass >= 0.0 && self.mass.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "mass {} must be finite and >= 0",
                self.mass
            )));
        }
        if !self.charge.is_finite() {
            return Err(Error::InvalidParameter("charge must be finite".into()));
        }
        if let Boundary::DampingLayer { width, strength } = self.boundary {
            let min = grid.n_x.min(grid.n_y).min(grid.n_z);
            if 4 * width >= min {
                return Err(Error::InvalidParameter(format!(
                    "damping width {width} must be < min grid dimension / 4 ({min} / 4)"
                )));
            }
            if !(0.0..=1.0).contains(&strength) {
                return Err(Error::InvalidParameter(format!(
                    "damping strength {strength} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

struct Coefficients {
    /// `c dt / (2 delta)`
    g: f64,
    /// `q dt / hbar`
    h: f64,
    dt: f64,
    mass: f64,
    charge: f64,
}

impl Coefficients {
    fn new(grid: &GridSpec, cfg: &StepperConfig) -> Self {
        Self::with_step(grid, cfg, grid.delta_t)
    }

    /// Coefficients for an update of length `dt` (may be negative).
    fn with_step(grid: &GridSpec, cfg: &StepperConfig, dt: f64) -> Self {
        Self {
            g: C * dt / (2.0 * grid.delta),
            h: cfg.charge * dt / HBAR,
            dt,
            mass: cfg.mass,
            charge: cfg.charge,
        }
    }
}

#[inline]
fn diagonal_factors(energy: f64, delta_t: f64) -> (Complex64, Complex64) {
    // C = 1 + i theta; (2 - C)/C and 1/C
    let theta = delta_t * energy / (2.0 * HBAR);
    let inv = 1.0 / (1.0 + theta * theta);
    (
        Complex64::new((1.0 - theta * theta) * inv, -2.0 * theta * inv),
        Complex64::new(inv, -theta * inv),
    )
}

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };


/// Advances one pair of components given the other pair.
///
/// `sign = +1` updates components 1-2 (source 3-4), `sign = -1` updates 3-4
/// (source 1-2). The stencil is identical for both pairs; only the sign of
/// the mass term differs. Returns the sum of `|psi|^2` over updated cells,
/// which doubles as a finiteness check.
fn half_update(
    grid: &GridSpec,
    target: (&mut [Complex64], &mut [Complex64]),
    source: (&[Complex64], &[Complex64]),
    pot: &SampledPotential,
    co: &Coefficients,
    sign: f64,
) -> f64 {
    let (ny, nz) = (grid.n_y, grid.n_z);
    let sx = ny * nz;
    let sy = nz;
    let (sa, sb) = source;
    let has_scalar = pot.has_scalar();
    let has_vector = pot.has_vector();
    let [a0, a1, a2, a3] = &pot.a;
    let (ratio0, inv0) = diagonal_factors(sign * co.mass, co.dt);
    let g = co.g;
    let h = co.h;

    target
        .0
        .par_chunks_mut(sx)
        .zip(target.1.par_chunks_mut(sx))
        .enumerate()
        .filter(|(i, _)| *i > 0 && *i + 1 < grid.n_x)
        .map(|(i, (ta, tb))| {
            let mut acc = 0.0;
            for j in 1..ny - 1 {
                let row = i * sx + j * sy;
                for k in 1..nz - 1 {
                    let n = row + k;
                    let m = j * sy + k;
                    // d/dz, d/dx, d/dy of the two source components
                    let az = sa[n + 1] - sa[n - 1];
                    let ax = sa[n + sx] - sa[n - sx];
                    let ay = sa[n + sy] - sa[n - sy];
                    let bz = sb[n + 1] - sb[n - 1];
                    let bx = sb[n + sx] - sb[n - sx];
                    let by = sb[n + sy] - sb[n - sy];
                    // sigma . grad acting on (a, b)
                    let mut ra = -g * (az + bx - I * by);
                    let mut rb = -g * (ax + I * ay - bz);
                    if has_vector {
                        let (v1, v2, v3) = (a1[n], a2[n], a3[n]);
                        let minus = Complex64::new(v1, -v2);
                        let plus = Complex64::new(v1, v2);
                        ra += I * h * (v3 * sa[n] + minus * sb[n]);
                        rb += I * h * (plus * sa[n] - v3 * sb[n]);
                    }
                    let (ratio, inv) = if has_scalar {
                        diagonal_factors(sign * co.mass + co.charge * a0[n], co.dt)
                    } else {
                        (ratio0, inv0)
                    };
                    let na = ratio * ta[m] + inv * ra;
                    let nb = ratio * tb[m] + inv * rb;
                    ta[m] = na;
                    tb[m] = nb;
                    acc += na.norm_sqr() + nb.norm_sqr();
                }
            }
            acc
        })
        .sum()
}

fn damping_profile(len: usize, width: usize, strength: f64) -> Vec<f64> {
    (0..len)
        .map(|n| {
            let d = n.min(len - 1 - n);
            if d >= width {
                1.0
            } else {
                let x = std::f64::consts::PI * d as f64 / width as f64;
                1.0 - strength * 0.5 * (1.0 + x.cos())
            }
        })
        .collect()
}

fn apply_damping(field: &mut SpinorField, width: usize, strength: f64) {
    let g = *field.grid();
    let px = damping_profile(g.n_x, width, strength);
    let py = damping_profile(g.n_y, width, strength);
    let pz = damping_profile(g.n_z, width, strength);
    let sx = g.plane_len();
    for comp in field.components_mut().iter_mut() {
        comp.par_chunks_mut(sx).enumerate().for_each(|(i, plane)| {
            for j in 0..g.n_y {
                let fy = px[i] * py[j];
                for k in 0..g.n_z {
                    let f = fy * pz[k];
                    if f != 1.0 {
                        plane[j * g.n_z + k] *= f;
                    }
                }
            }
        });
    }
}

/// Advances `field` by one full time step under the sampled potential.
pub fn step(field: &mut SpinorField, pot: &SampledPotential, cfg: &StepperConfig) -> Result<()> {
    let grid = *field.grid();
    debug_assert_eq!(grid.counts(), pot.grid().counts());
    let co = Coefficients::new(&grid, cfg);
    let step_index = field.steps + 1;
    let [p1, p2, p3, p4] = field.components_mut();
    let s12 = half_update(&grid, (p1, p2), (p3, p4), pot, &co, 1.0);
    let s34 = half_update(&grid, (p3, p4), (p1, p2), pot, &co, -1.0);
    if !(s12 + s34).is_finite() {
        return Err(Error::BlowUp { step: step_index });
    }
    if let Boundary::DampingLayer { width, strength } = cfg.boundary {
        if width > 0 && strength > 0.0 {
            apply_damping(field, width, strength);
        }
    }
    field.stagger.time_of_12 += grid.delta_t;
    field.stagger.time_of_34 += grid.delta_t;
    field.steps = step_index;
    Ok(())
}

/// Copy of `field` with components 1-2 brought to the integer time level.
///
/// Components 1-2 are advanced by half a step from `n - 1/2` and taken back
/// by half a step from `n + 1/2`, both with components 3-4 held at `n`; the
/// two estimates are averaged. The half-step source offsets cancel, leaving
/// an error quadratic in `delta_t`, and unlike a plain average of the two
/// stored levels the result does not lose amplitude to the carrier phase.
pub fn synchronized(field: &SpinorField, pot: &SampledPotential, cfg: &StepperConfig) -> SpinorField {
    let grid = *field.grid();
    let dt = grid.delta_t;
    let mut out = field.clone();
    {
        let [p1, p2, p3, p4] = out.components_mut();
        let half = Coefficients::with_step(&grid, cfg, 0.5 * dt);
        half_update(&grid, (p1, p2), (p3, p4), pot, &half, 1.0);
    }
    let mut b1 = field.component(0).to_vec();
    let mut b2 = field.component(1).to_vec();
    let (p3, p4) = (field.component(2), field.component(3));
    let full = Coefficients::with_step(&grid, cfg, dt);
    half_update(&grid, (&mut b1, &mut b2), (p3, p4), pot, &full, 1.0);
    let back = Coefficients::with_step(&grid, cfg, -0.5 * dt);
    half_update(&grid, (&mut b1, &mut b2), (p3, p4), pot, &back, 1.0);
    for (c, b) in [b1, b2].iter().enumerate() {
        out.component_mut(c)
            .par_iter_mut()
            .zip(b.par_iter())
            .for_each(|(a, b)| *a = 0.5 * (*a + *b));
    }
    out.stagger.time_of_12 = out.stagger.time_of_34;
    out
}

/// Read-only hook invoked between steps.
pub trait Observer {
    /// Call every `stride` steps (including step 0). Zero disables the observer.
    fn stride(&self) -> usize;
    fn observe(
        &mut self,
        step: usize,
        field: &SpinorField,
        pot: &SampledPotential,
        cfg: &StepperConfig,
    ) -> Result<()>;
}

/// Follows a packet travelling along +x by shifting the lattice by whole
/// cells (the potential is re-evaluated on the new cells).
///
/// Dispersion spreads a packet more towards the rear than the front, so the
/// centre is normally held ahead of the lattice middle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MovingWindow {
    /// Where the centre of probability is held, as a fraction of the x
    /// extent measured from the first cell.
    pub anchor: f64,
    /// How often (in steps) to check.
    pub check_every: usize,
}

impl Default for MovingWindow {
    fn default() -> Self {
        Self {
            anchor: 0.6,
            check_every: 4,
        }
    }
}

impl MovingWindow {
    pub fn validate(&self) -> Result<()> {
        if !(self.anchor > 0.0 && self.anchor < 1.0) || self.check_every == 0 {
            return Err(Error::InvalidParameter(format!(
                "moving window needs 0 < anchor < 1 and check_every > 0, got {} and {}",
                self.anchor, self.check_every
            )));
        }
        Ok(())
    }
}

/// A field together with everything needed to advance it.
pub struct Simulation {
    pub field: SpinorField,
    pub potential: FourPotential,
    pub sampled: SampledPotential,
    pub cfg: StepperConfig,
    pub window: Option<MovingWindow>,
    /// Norm carried out of the lattice by window shifts.
    pub norm_lost: f64,
    /// Total number of cells the window has moved.
    pub window_shift: usize,
}

impl Simulation {
    pub fn new(field: SpinorField, potential: FourPotential, cfg: StepperConfig) -> Result<Self> {
        cfg.validate(field.grid())?;
        let sampled = crate::potentials::sample_on_grid(&potential, field.grid(), field.time());
        Ok(Self {
            field,
            potential,
            sampled,
            cfg,
            window: None,
            norm_lost: 0.0,
            window_shift: 0,
        })
    }

    pub fn with_window(mut self, window: MovingWindow) -> Result<Self> {
        window.validate()?;
        self.window = Some(window);
        Ok(self)
    }

    pub fn step(&mut self) -> Result<()> {
        step(&mut self.field, &self.sampled, &self.cfg)?;
        if let Some(w) = self.window {
            if self.field.steps % w.check_every == 0 {
                self.recenter(w)?;
            }
        }
        Ok(())
    }

    fn recenter(&mut self, w: MovingWindow) -> Result<()> {
        let g = *self.field.grid();
        let center = observables::center_of_probability(&self.field)?;
        let anchor = g.origin[0] + g.delta * (g.n_x - 1) as f64 * w.anchor;
        let lead = ((center[0] - anchor) / g.delta).floor();
        if lead >= 1.0 {
            let cells = lead as usize;
            self.norm_lost += self.field.shift_window_x(cells);
            self.sampled
                .shift_window_x(&self.potential, self.field.time(), cells);
            self.window_shift += cells;
        }
        Ok(())
    }

    /// Runs `n_steps` steps, recording observables every `record_stride`
    /// steps (0 disables recording) and calling the extra observers.
    ///
    /// A blow-up stops the run; the partial series is returned with its
    /// failure marker set.
    pub fn run(
        &mut self,
        n_steps: usize,
        record_stride: usize,
        observers: &mut [&mut dyn Observer],
    ) -> ObservableSeries {
        let mut series = ObservableSeries::default();
        let mut notify = |sim: &Simulation, step: usize, series: &mut ObservableSeries| -> Result<()> {
            if record_stride > 0 && step % record_stride == 0 {
                series
                    .records
                    .push(ObservableRecord::measure(&sim.field, &sim.sampled, &sim.cfg)?);
            }
            for obs in observers.iter_mut() {
                let s = obs.stride();
                if s > 0 && step % s == 0 {
                    obs.observe(step, &sim.field, &sim.sampled, &sim.cfg)?;
                }
            }
            Ok(())
        };
        if n_steps == 0 {
            return series;
        }
        if let Err(e) = notify(self, 0, &mut series) {
            series.failure = Some(RunFailure::from_error(0, &e));
            return series;
        }
        for s in 1..=n_steps {
            let result = self.step().and_then(|_| notify(self, s, &mut series));
            if let Err(e) = result {
                series.failure = Some(RunFailure::from_error(s, &e));
                break;
            }
        }
        series.fill_velocities();
        series
    }
}

/// Fixed-grid convenience wrapper around [`Simulation::run`].
pub fn run(
    field: &mut SpinorField,
    pot: &SampledPotential,
    cfg: &StepperConfig,
    n_steps: usize,
    record_stride: usize,
    observers: &mut [&mut dyn Observer],
) -> ObservableSeries {
    let mut series = ObservableSeries::default();
    if n_steps == 0 {
        return series;
    }
    let mut notify = |field: &SpinorField, step: usize, series: &mut ObservableSeries| -> Result<()> {
        if record_stride > 0 && step % record_stride == 0 {
            series
                .records
                .push(ObservableRecord::measure(field, pot, cfg)?);
        }
        for obs in observers.iter_mut() {
            let s = obs.stride();
            if s > 0 && step % s == 0 {
                obs.observe(step, field, pot, cfg)?;
            }
        }
        Ok(())
    };
    if let Err(e) = notify(field, 0, &mut series) {
        series.failure = Some(RunFailure::from_error(0, &e));
        return series;
    }
    for s in 1..=n_steps {
        let result = step(field, pot, cfg).and_then(|_| notify(field, s, &mut series));
        if let Err(e) = result {
            series.failure = Some(RunFailure::from_error(s, &e));
            break;
        }
    }
    series.fill_velocities();
    series
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{sample_on_grid, zero};

    #[test]
    fn diagonal_factor_is_unitary() {
        for e in [0.0, 0.511, -3.0, 40.0] {
            let (r, inv) = diagonal_factors(e, 1e-4);
            assert!((r.norm() - 1.0).abs() < 1e-15);
            let c = Complex64::new(1.0, 1e-4 * e / (2.0 * HBAR));
            assert!((inv * c - 1.0).norm() < 1e-15);
            assert!((r - (2.0 - c) / c).norm() < 1e-14);
        }
    }

    #[test]
    fn damping_validation() {
        let g = GridSpec::new([16, 16, 20], 1e-3, [0.0; 3]).unwrap();
        let mut cfg = StepperConfig::electron();
        cfg.boundary = Boundary::DampingLayer {
            width: 4,
            strength: 0.1,
        };
        assert!(cfg.validate(&g).is_err());
        cfg.boundary = Boundary::DampingLayer {
            width: 3,
            strength: 0.1,
        };
        assert!(cfg.validate(&g).is_ok());
        cfg.mass = -1.0;
        assert!(cfg.validate(&g).is_err());
    }

    #[test]
    fn zero_steps_leave_field_alone() {
        let g = GridSpec::new([8, 8, 8], 1e-3, [0.0; 3]).unwrap();
        let mut f = SpinorField::zeros(g);
        f.component_mut(0)[200] = Complex64::new(1.0, 0.0);
        let before = f.clone();
        let pot = sample_on_grid(&zero(), &g, 0.0);
        let series = run(&mut f, &pot, &StepperConfig::electron(), 0, 1, &mut []);
        assert!(series.records.is_empty());
        assert_eq!(f.component(0), before.component(0));
    }

    #[test]
    fn moving_window_matches_fixed_grid() {
        use crate::packet::{init_packet, PacketSpec, Spin};
        let delta = 1e-4;
        let spec = PacketSpec {
            width: 4.0 * delta,
            momentum: [0.53, 0.0, 0.0],
            center: [0.0; 3],
            spin: Spin::Up,
        };
        let dt = 0.5 * delta / 3f64.sqrt();
        let origin = [-32.0 * delta, -25.5 * delta, -25.5 * delta];
        let big = GridSpec::with_time_step([100, 52, 52], delta, dt, origin, 0.5).unwrap();
        let small = GridSpec::with_time_step([64, 52, 52], delta, dt, origin, 0.5).unwrap();
        let mass = ELECTRON_REST_ENERGY_MEV;
        let cfg = StepperConfig::electron();
        let mut fixed = Simulation::new(init_packet(&big, &spec, mass).unwrap(), zero(), cfg).unwrap();
        let window = MovingWindow { anchor: 0.5, check_every: 2 };
        let mut moving = Simulation::new(init_packet(&small, &spec, mass).unwrap(), zero(), cfg)
            .unwrap()
            .with_window(window)
            .unwrap();
        for _ in 0..60 {
            fixed.step().unwrap();
            moving.step().unwrap();
        }
        let s = moving.window_shift;
        assert!(s >= 3, "window moved {s} cells");
        let (gb, gs) = (*fixed.field.grid(), *moving.field.grid());
        assert!((gb.coordinate(crate::grid::Axis::X, s) - gs.origin[0]).abs() < 1e-15);
        let mut worst: f64 = 0.0;
        for i in 8..gs.n_x - 8 {
            for j in 0..gs.n_y {
                for k in 0..gs.n_z {
                    let a = fixed.field.spinor_at(i + s, j, k);
                    let b = moving.field.spinor_at(i, j, k);
                    for c in 0..4 {
                        worst = worst.max((a[c] - b[c]).norm());
                    }
                }
            }
        }
        assert!(worst < 1e-3 * moving.field.peak_amplitude(), "{worst}");
        assert!(moving.norm_lost < 5e-4, "{}", moving.norm_lost);
    }

    #[test]
    fn blow_up_is_reported_with_step_index() {
        let g = GridSpec::new([8, 8, 8], 1e-3, [0.0; 3]).unwrap();
        let mut f = SpinorField::zeros(g);
        f.component_mut(2)[g.linear_index(4, 4, 4)] = Complex64::new(f64::INFINITY, 0.0);
        let pot = sample_on_grid(&zero(), &g, 0.0);
        let err = step(&mut f, &pot, &StepperConfig::electron()).unwrap_err();
        assert!(matches!(err, Error::BlowUp { step: 1 }));
    }
}
