//! Analytic four-potentials and their lattice samples.
//!
//! All evaluators return potentials already multiplied by the elementary
//! charge (see [`crate::units`]): `a0` in MV, `a_vec` in MeV/(c e).

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Vec3};
use crate::units::UnitSystem;

/// Which vector potential represents the uniform field `B = (0, B0, 0)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gauge {
    /// `A = B0/2 (z, 0, -x)`
    Symmetric,
    /// `A = B0 (z, 0, 0)`
    LandauX,
    /// `A = B0 (0, 0, -x)`
    LandauZ,
}

impl std::str::FromStr for Gauge {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetric" => Ok(Gauge::Symmetric),
            "landau_x" => Ok(Gauge::LandauX),
            "landau_z" => Ok(Gauge::LandauZ),
            other => Err(Error::InvalidParameter(format!("unknown gauge `{other}`"))),
        }
    }
}

impl Gauge {
    pub fn name(self) -> &'static str {
        match self {
            Gauge::Symmetric => "symmetric",
            Gauge::LandauX => "landau_x",
            Gauge::LandauZ => "landau_z",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DipoleOrientation {
    /// Dipoles along x, parallel to the direction of motion.
    Parallel,
    /// Dipoles along z, anti-parallel to each other.
    Perpendicular,
}

impl std::str::FromStr for DipoleOrientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parallel" => Ok(DipoleOrientation::Parallel),
            "perpendicular" => Ok(DipoleOrientation::Perpendicular),
            other => Err(Error::InvalidParameter(format!(
                "unknown dipole orientation `{other}`"
            ))),
        }
    }
}

impl DipoleOrientation {
    pub fn name(self) -> &'static str {
        match self {
            DipoleOrientation::Parallel => "parallel",
            DipoleOrientation::Perpendicular => "perpendicular",
        }
    }
}

/// Two infinite solenoids along y at `z = +a` (flux `+flux`) and `z = -a`
/// (flux `-flux`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolenoidPairSpec {
    /// Weber.
    pub flux: f64,
    /// nm.
    pub half_separation: f64,
    /// nm.
    pub radius: f64,
}

impl SolenoidPairSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.flux.is_finite() {
            return Err(Error::InvalidParameter("solenoid flux must be finite".into()));
        }
        if !(self.radius >= 0.0 && self.half_separation > self.radius) {
            return Err(Error::InvalidParameter(format!(
                "solenoid pair needs half_separation ({}) > radius ({}) >= 0",
                self.half_separation, self.radius
            )));
        }
        Ok(())
    }
}

/// Two infinite lines of electric dipoles along y at `z = +-a`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DipoleLineSpec {
    /// Line density of dipoles in C m / m.
    pub line_density: f64,
    /// nm.
    pub half_separation: f64,
    pub orientation: DipoleOrientation,
    /// Overall sign, +1 or -1.
    pub sign: f64,
}

impl DipoleLineSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.line_density.is_finite() {
            return Err(Error::InvalidParameter("dipole line density must be finite".into()));
        }
        if !(self.half_separation > 0.0) {
            return Err(Error::InvalidParameter(
                "dipole half_separation must be positive".into(),
            ));
        }
        if self.sign != 1.0 && self.sign != -1.0 {
            return Err(Error::InvalidParameter("dipole sign must be +1 or -1".into()));
        }
        Ok(())
    }
}

/// Tagged parameter record identifying a potential configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialDescriptor {
    Zero,
    UniformB {
        /// Tesla.
        b0: f64,
        gauge: Gauge,
    },
    DipoleLines(DipoleLineSpec),
    Solenoid {
        /// Weber.
        flux: f64,
        /// nm.
        radius: f64,
        /// (x, z) of the axis, nm.
        center: [f64; 2],
    },
    SolenoidPair(SolenoidPairSpec),
}

#[derive(Clone, Copy, Debug)]
enum Kind {
    Zero,
    Uniform { b: f64, gauge: Gauge },
    Dipoles { prefactor: f64, a: f64, orientation: DipoleOrientation },
    Solenoids { parts: [SolenoidPart; 2], count: usize },
}

#[derive(Clone, Copy, Debug)]
struct SolenoidPart {
    flux: f64,
    radius: f64,
    center: [f64; 2],
}

impl SolenoidPart {
    #[inline]
    fn eval(&self, p: Vec3) -> Vec3 {
        let dx = p[0] - self.center[0];
        let dz = p[2] - self.center[1];
        let r2 = dx * dx + dz * dz;
        if r2 == 0.0 {
            return [0.0; 3];
        }
        let denom = if r2 <= self.radius * self.radius {
            self.radius * self.radius
        } else {
            r2
        };
        let s = self.flux / (2.0 * PI * denom);
        [s * dz, 0.0, -s * dx]
    }
}

/// A static electromagnetic four-potential `(A0, A)`.
#[derive(Clone, Debug)]
pub struct FourPotential {
    descriptor: PotentialDescriptor,
    kind: Kind,
}

impl FourPotential {
    pub fn from_descriptor(descriptor: &PotentialDescriptor) -> Result<Self> {
        let u = UnitSystem::natural();
        let kind = match *descriptor {
            PotentialDescriptor::Zero => Kind::Zero,
            PotentialDescriptor::UniformB { b0, gauge } => {
                if !b0.is_finite() {
                    return Err(Error::InvalidParameter("B0 must be finite".into()));
                }
                Kind::Uniform {
                    b: u.tesla_to_internal(b0),
                    gauge,
                }
            }
            PotentialDescriptor::DipoleLines(spec) => {
                spec.validate()?;
                Kind::Dipoles {
                    prefactor: spec.sign * u.dipole_prefactor(spec.line_density),
                    a: spec.half_separation,
                    orientation: spec.orientation,
                }
            }
            PotentialDescriptor::Solenoid {
                flux,
                radius,
                center,
            } => {
                if !(radius >= 0.0) || !flux.is_finite() {
                    return Err(Error::InvalidParameter(
                        "solenoid needs finite flux and radius >= 0".into(),
                    ));
                }
                let part = SolenoidPart {
                    flux: u.weber_to_internal(flux),
                    radius,
                    center,
                };
                Kind::Solenoids {
                    parts: [part, part],
                    count: 1,
                }
            }
            PotentialDescriptor::SolenoidPair(spec) => {
                spec.validate()?;
                let flux = u.weber_to_internal(spec.flux);
                let a = spec.half_separation;
                Kind::Solenoids {
                    parts: [
                        SolenoidPart {
                            flux,
                            radius: spec.radius,
                            center: [0.0, a],
                        },
                        SolenoidPart {
                            flux: -flux,
                            radius: spec.radius,
                            center: [0.0, -a],
                        },
                    ],
                    count: 2,
                }
            }
        };
        Ok(Self {
            descriptor: descriptor.clone(),
            kind,
        })
    }

    pub fn descriptor(&self) -> &PotentialDescriptor {
        &self.descriptor
    }

    /// All supported configurations are time independent.
    pub fn is_static(&self) -> bool {
        true
    }

    pub fn has_vector_part(&self) -> bool {
        matches!(self.kind, Kind::Uniform { .. } | Kind::Solenoids { .. })
    }

    /// Scalar potential (MV). Errors exactly on a dipole line.
    pub fn a0(&self, p: Vec3, _t: f64) -> Result<f64> {
        match self.kind {
            Kind::Dipoles {
                prefactor,
                a,
                orientation,
            } => {
                let (x, z) = (p[0], p[2]);
                let rm = x * x + (z - a) * (z - a);
                let rp = x * x + (z + a) * (z + a);
                let tiny = (1e-12 * a) * (1e-12 * a);
                if rm <= tiny || rp <= tiny {
                    return Err(Error::SingularPotential {
                        x: p[0],
                        y: p[1],
                        z: p[2],
                    });
                }
                let g = match orientation {
                    DipoleOrientation::Parallel => x / rm + x / rp,
                    DipoleOrientation::Perpendicular => (z - a) / rm - (z + a) / rp,
                };
                Ok(prefactor * g)
            }
            _ => Ok(0.0),
        }
    }

    /// Vector potential (MeV / (c e)).
    pub fn a_vec(&self, p: Vec3, _t: f64) -> Vec3 {
        match self.kind {
            Kind::Uniform { b, gauge } => match gauge {
                Gauge::Symmetric => [0.5 * b * p[2], 0.0, -0.5 * b * p[0]],
                Gauge::LandauX => [b * p[2], 0.0, 0.0],
                Gauge::LandauZ => [0.0, 0.0, -b * p[0]],
            },
            Kind::Solenoids { parts, count } => {
                let mut acc = [0.0; 3];
                for part in &parts[..count] {
                    let v = part.eval(p);
                    for (a, b) in acc.iter_mut().zip(v) {
                        *a += b;
                    }
                }
                acc
            }
            _ => [0.0; 3],
        }
    }

    /// `[A0, Ax, Ay, Az]` at one point.
    pub fn eval(&self, p: Vec3, t: f64) -> Result<[f64; 4]> {
        let a0 = self.a0(p, t)?;
        let a = self.a_vec(p, t);
        Ok([a0, a[0], a[1], a[2]])
    }
}

pub fn zero() -> FourPotential {
    FourPotential::from_descriptor(&PotentialDescriptor::Zero).expect("zero potential")
}

fn uniform(b0: f64, gauge: Gauge) -> FourPotential {
    FourPotential {
        descriptor: PotentialDescriptor::UniformB { b0, gauge },
        kind: Kind::Uniform {
            b: UnitSystem::natural().tesla_to_internal(b0),
            gauge,
        },
    }
}

/// Uniform `B = (0, B0, 0)` (tesla) in the rotationally invariant gauge.
pub fn uniform_b_symmetric(b0: f64) -> FourPotential {
    uniform(b0, Gauge::Symmetric)
}

pub fn uniform_b_landau_x(b0: f64) -> FourPotential {
    uniform(b0, Gauge::LandauX)
}

pub fn uniform_b_landau_z(b0: f64) -> FourPotential {
    uniform(b0, Gauge::LandauZ)
}

pub fn dipole_lines(spec: DipoleLineSpec) -> Result<FourPotential> {
    FourPotential::from_descriptor(&PotentialDescriptor::DipoleLines(spec))
}

/// Single infinite solenoid along y with axis at `center = (x, z)`.
pub fn solenoid_single(flux: f64, radius: f64, center: [f64; 2]) -> Result<FourPotential> {
    FourPotential::from_descriptor(&PotentialDescriptor::Solenoid {
        flux,
        radius,
        center,
    })
}

pub fn solenoid_pair(spec: SolenoidPairSpec) -> Result<FourPotential> {
    FourPotential::from_descriptor(&PotentialDescriptor::SolenoidPair(spec))
}

/// Central-difference curl of the vector potential with step `h`.
pub fn numerical_curl(pot: &FourPotential, p: Vec3, h: f64) -> Vec3 {
    let d = |axis: usize, comp: usize| {
        let mut hi = p;
        let mut lo = p;
        hi[axis] += h;
        lo[axis] -= h;
        (pot.a_vec(hi, 0.0)[comp] - pot.a_vec(lo, 0.0)[comp]) / (2.0 * h)
    };
    [d(1, 2) - d(2, 1), d(2, 0) - d(0, 2), d(0, 1) - d(1, 0)]
}

/// `integral of A . dl` along the straight segment `from -> to`
/// (composite Simpson, exact for potentials linear in position).
pub fn line_integral(pot: &FourPotential, from: Vec3, to: Vec3) -> f64 {
    if !pot.has_vector_part() {
        return 0.0;
    }
    const N: usize = 16;
    let d = [to[0] - from[0], to[1] - from[1], to[2] - from[2]];
    let mut acc = 0.0;
    for s in 0..=N {
        let w = if s == 0 || s == N {
            1.0
        } else if s % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let f = s as f64 / N as f64;
        let a = pot.a_vec([from[0] + f * d[0], from[1] + f * d[1], from[2] + f * d[2]], 0.0);
        acc += w * (a[0] * d[0] + a[1] * d[1] + a[2] * d[2]);
    }
    acc / (3.0 * N as f64)
}

/// Central-difference gradient of the scalar potential with step `h`.
pub fn numerical_gradient_a0(pot: &FourPotential, p: Vec3, h: f64) -> Result<Vec3> {
    let mut g = [0.0; 3];
    for (axis, out) in g.iter_mut().enumerate() {
        let mut hi = p;
        let mut lo = p;
        hi[axis] += h;
        lo[axis] -= h;
        *out = (pot.a0(hi, 0.0)? - pot.a0(lo, 0.0)?) / (2.0 * h);
    }
    Ok(g)
}

/// Potential values cached at every cell of a grid.
#[derive(Clone, Debug)]
pub struct SampledPotential {
    grid: GridSpec,
    /// `A0, Ax, Ay, Az`, each in lattice storage order. All four are empty
    /// for the zero potential; use [`SampledPotential::value`] for reads that
    /// must work in that case too.
    pub a: [Vec<f64>; 4],
    /// Linear indices of cells where the evaluator was singular.
    pub flagged: Vec<usize>,
    has_scalar: bool,
    has_vector: bool,
}

impl SampledPotential {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// The zero potential on `grid` (no storage is allocated).
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            a: std::array::from_fn(|_| Vec::new()),
            flagged: Vec::new(),
            has_scalar: false,
            has_vector: false,
        }
    }

    fn allocate(&mut self) {
        let n = self.grid.len();
        self.a = std::array::from_fn(|_| vec![0.0; n]);
    }

    fn is_allocated(&self) -> bool {
        !self.a[0].is_empty()
    }

    /// Component `c` (0 = `A0`, 1..=3 = `A`) at linear index `n`.
    #[inline]
    pub fn value(&self, c: usize, n: usize) -> f64 {
        self.a[c].get(n).copied().unwrap_or(0.0)
    }

    pub fn has_scalar(&self) -> bool {
        self.has_scalar
    }

    pub fn has_vector(&self) -> bool {
        self.has_vector
    }

    /// Number of singular cells that were zeroed.
    pub fn warning_count(&self) -> usize {
        self.flagged.len()
    }

    /// Distinct `(i, k)` columns containing flagged cells.
    pub fn flagged_columns(&self) -> usize {
        let g = self.grid;
        let mut cols: Vec<(usize, usize)> = self
            .flagged
            .iter()
            .map(|&n| (n / g.plane_len(), n % g.n_z))
            .collect();
        cols.sort_unstable();
        cols.dedup();
        cols.len()
    }

    /// Largest `|A|` over the lattice (MeV / (c e)).
    pub fn max_vector_magnitude(&self) -> f64 {
        if !self.is_allocated() {
            return 0.0;
        }
        (0..self.grid.len())
            .map(|n| (self.a[1][n].powi(2) + self.a[2][n].powi(2) + self.a[3][n].powi(2)).sqrt())
            .fold(0.0, f64::max)
    }

    fn fill_planes(&mut self, pot: &FourPotential, t: f64, planes: std::ops::Range<usize>) {
        let g = self.grid;
        let plane = g.plane_len();
        let results: Vec<(Vec<[f64; 4]>, Vec<usize>)> = planes
            .clone()
            .into_par_iter()
            .map(|i| {
                let mut vals = Vec::with_capacity(plane);
                let mut bad = Vec::new();
                for j in 0..g.n_y {
                    for k in 0..g.n_z {
                        let p = g.position_unchecked(i, j, k);
                        match pot.eval(p, t) {
                            Ok(v) => vals.push(v),
                            Err(_) => {
                                bad.push(g.linear_index(i, j, k));
                                vals.push([0.0; 4]);
                            }
                        }
                    }
                }
                (vals, bad)
            })
            .collect();
        for (i, (vals, bad)) in planes.zip(results) {
            for (m, v) in vals.into_iter().enumerate() {
                let n = i * plane + m;
                for c in 0..4 {
                    self.a[c][n] = v[c];
                }
            }
            self.flagged.extend(bad);
        }
    }

    /// Matches [`crate::spinor::SpinorField::shift_window_x`]: drops the
    /// first `cells` planes and evaluates the newly exposed ones.
    pub(crate) fn shift_window_x(&mut self, pot: &FourPotential, t: f64, cells: usize) {
        let plane = self.grid.plane_len();
        let cells = cells.min(self.grid.n_x);
        if !self.is_allocated() {
            self.grid.origin[0] += self.grid.delta * cells as f64;
            return;
        }
        for c in self.a.iter_mut() {
            c.copy_within(cells * plane.., 0);
        }
        let cut = cells * plane;
        self.flagged.retain(|&n| n >= cut);
        for n in self.flagged.iter_mut() {
            *n -= cut;
        }
        self.grid.origin[0] += self.grid.delta * cells as f64;
        let n_x = self.grid.n_x;
        self.fill_planes(pot, t, n_x - cells..n_x);
    }
}

/// Evaluates `pot` at every cell of `grid` at time `t`.
///
/// Cells where the evaluator is singular are set to zero and recorded in
/// [`SampledPotential::flagged`].
pub fn sample_on_grid(pot: &FourPotential, grid: &GridSpec, t: f64) -> SampledPotential {
    let mut s = SampledPotential::zeros(*grid);
    s.has_scalar = matches!(pot.kind, Kind::Dipoles { .. });
    s.has_vector = pot.has_vector_part();
    if matches!(pot.kind, Kind::Zero) {
        return s;
    }
    s.allocate();
    s.fill_planes(pot, t, 0..grid.n_x);
    s
}
