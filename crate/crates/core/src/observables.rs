//! Expectation values of a spinor field.
//!
//! Derivatives use the same centred differences as the stepper and are
//! evaluated on interior cells only. The half-step offset between the two
//! component pairs is ignored, as in [`SpinorField::total_norm`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Vec3;
use crate::potentials::SampledPotential;
use crate::spinor::SpinorField;
use crate::stepper::StepperConfig;
use crate::units::{C, HBAR};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Observables at one instant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableRecord {
    pub t: f64,
    pub norm: f64,
    pub center: Vec3,
    /// Filled from the centre track after a run (units of c).
    pub velocity: Vec3,
    /// MeV.
    pub energy: f64,
    /// Kinetic momentum `<-i hbar grad> - q <A>` (MeV/c).
    pub p_mech: Vec3,
    /// Canonical momentum `<-i hbar grad>` (MeV/c).
    pub p_canon: Vec3,
}

/// Why a run stopped early.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub step: usize,
    pub blow_up: bool,
    pub message: String,
}

impl RunFailure {
    pub fn from_error(step: usize, e: &Error) -> Self {
        Self {
            step,
            blow_up: matches!(e, Error::BlowUp { .. }),
            message: e.to_string(),
        }
    }
}

/// Time-ordered records of one run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub records: Vec<ObservableRecord>,
    pub failure: Option<RunFailure>,
}

// Layout of the fused reduction.
const NORM: usize = 0;
const X: usize = 1;
const ENERGY: usize = 4;
const PCAN: usize = 5;
const AVG_A: usize = 8;
const FIELDS: usize = 11;

fn fused(field: &SpinorField, pot: Option<(&SampledPotential, &StepperConfig)>) -> [f64; FIELDS] {
    let g = *field.grid();
    let [p1, p2, p3, p4] = field.components();
    let (sx, sy) = (g.plane_len(), g.n_z);
    let inv2d = 1.0 / (2.0 * g.delta);
    let hc = HBAR * C;
    field.reduce_cells_n::<FIELDS, _>(|n, i, j, k| {
        let mut out = [0.0; FIELDS];
        let rho = field.density_at(n);
        if rho == 0.0 {
            return out;
        }
        let pos = g.position_unchecked(i, j, k);
        out[NORM] = rho;
        for a in 0..3 {
            out[X + a] = pos[a] * rho;
        }
        let interior = i > 0 && j > 0 && k > 0 && i + 1 < g.n_x && j + 1 < g.n_y && k + 1 < g.n_z;
        if !interior {
            return out;
        }
        let psi = [p1[n], p2[n], p3[n], p4[n]];
        // d/dx, d/dy, d/dz of every component
        let d = |c: &[Complex64], s: usize| (c[n + s] - c[n - s]) * inv2d;
        let comps = [p1, p2, p3, p4];
        let grad: [[Complex64; 3]; 4] = std::array::from_fn(|c| {
            [d(comps[c], sx), d(comps[c], sy), d(comps[c], 1)]
        });
        for a in 0..3 {
            let mut s = 0.0;
            for c in 0..4 {
                s += (psi[c].conj() * (-I * HBAR) * grad[c][a]).re;
            }
            out[PCAN + a] = s;
        }
        let Some((pot, cfg)) = pot else {
            return out;
        };
        let (a0, av) = (pot.value(0, n), [pot.value(1, n), pot.value(2, n), pot.value(3, n)]);
        let q = cfg.charge;
        let m = cfg.mass;
        let minus = Complex64::new(av[0], -av[1]);
        let plus = Complex64::new(av[0], av[1]);
        let [dx, dy, dz] = [0, 1, 2];
        let h1 = -I * hc * (grad[2][dz] + grad[3][dx] - I * grad[3][dy])
            - q * (av[2] * psi[2] + minus * psi[3])
            + (m + q * a0) * psi[0];
        let h2 = -I * hc * (grad[2][dx] + I * grad[2][dy] - grad[3][dz])
            - q * (plus * psi[2] - av[2] * psi[3])
            + (m + q * a0) * psi[1];
        let h3 = -I * hc * (grad[0][dz] + grad[1][dx] - I * grad[1][dy])
            - q * (av[2] * psi[0] + minus * psi[1])
            + (-m + q * a0) * psi[2];
        let h4 = -I * hc * (grad[0][dx] + I * grad[0][dy] - grad[1][dz])
            - q * (plus * psi[0] - av[2] * psi[1])
            + (-m + q * a0) * psi[3];
        out[ENERGY] = (psi[0].conj() * h1
            + psi[1].conj() * h2
            + psi[2].conj() * h3
            + psi[3].conj() * h4)
            .re;
        for a in 0..3 {
            out[AVG_A + a] = av[a] * rho;
        }
        out
    })
}

fn normalized(sums: &[f64; FIELDS]) -> Result<f64> {
    let norm = sums[NORM];
    if !norm.is_finite() {
        return Err(Error::BlowUp { step: 0 });
    }
    if norm <= 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(norm)
}

/// `sum x |Psi|^2 / sum |Psi|^2`.
pub fn center_of_probability(field: &SpinorField) -> Result<Vec3> {
    let g = *field.grid();
    let [s0, s1, s2, s3] = field.reduce_cells_n::<4, _>(|n, i, j, k| {
        let rho = field.density_at(n);
        let p = g.position_unchecked(i, j, k);
        [rho, p[0] * rho, p[1] * rho, p[2] * rho]
    });
    if !s0.is_finite() {
        return Err(Error::BlowUp { step: field.steps });
    }
    if s0 <= 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok([s1 / s0, s2 / s0, s3 / s0])
}

/// `Re <Psi| H |Psi> / <Psi|Psi>` (MeV).
pub fn expectation_energy(
    field: &SpinorField,
    pot: &SampledPotential,
    cfg: &StepperConfig,
) -> Result<f64> {
    let s = fused(field, Some((pot, cfg)));
    Ok(s[ENERGY] / normalized(&s)?)
}

/// `<-i hbar grad>` (MeV/c).
pub fn expectation_canonical_momentum(field: &SpinorField) -> Result<Vec3> {
    let s = fused(field, None);
    let norm = normalized(&s)?;
    Ok(std::array::from_fn(|a| s[PCAN + a] / norm))
}

/// `<-i hbar grad> - q <A>` (MeV/c).
pub fn expectation_mechanical_momentum(
    field: &SpinorField,
    pot: &SampledPotential,
    cfg: &StepperConfig,
) -> Result<Vec3> {
    let s = fused(field, Some((pot, cfg)));
    let norm = normalized(&s)?;
    Ok(std::array::from_fn(|a| (s[PCAN + a] - cfg.charge * s[AVG_A + a]) / norm))
}

impl ObservableRecord {
    /// Evaluates every observable on the time-synchronized field (see
    /// [`crate::stepper::synchronized`]); `velocity` is left at zero.
    pub fn measure(
        field: &SpinorField,
        pot: &SampledPotential,
        cfg: &StepperConfig,
    ) -> Result<Self> {
        let sync = crate::stepper::synchronized(field, pot, cfg);
        let s = fused(&sync, Some((pot, cfg)));
        let norm = normalized(&s).map_err(|e| match e {
            Error::BlowUp { .. } => Error::BlowUp { step: field.steps },
            e => e,
        })?;
        Ok(Self {
            t: field.time(),
            norm: norm * field.grid().cell_volume(),
            center: std::array::from_fn(|a| s[X + a] / norm),
            velocity: [0.0; 3],
            energy: s[ENERGY] / norm,
            p_mech: std::array::from_fn(|a| (s[PCAN + a] - cfg.charge * s[AVG_A + a]) / norm),
            p_canon: std::array::from_fn(|a| s[PCAN + a] / norm),
        })
    }

    /// `p_mech c^2 / E` (units of c).
    pub fn momentum_velocity(&self) -> Vec3 {
        self.p_mech.map(|p| p * C / self.energy)
    }
}

/// Centre velocities from a uniformly sampled track (units of c).
///
/// Central differences in the interior, one-sided at the ends.
pub fn velocity_series(times: &[f64], centers: &[Vec3]) -> Result<Vec<Vec3>> {
    let n = centers.len();
    if n < 2 || times.len() != n {
        return Err(Error::InvalidParameter(format!(
            "velocity needs at least 2 matching samples, got {n} centres and {} times",
            times.len()
        )));
    }
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter("sample times must increase".into()));
    }
    for w in times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-6 * dt {
            return Err(Error::InvalidParameter("sample times must be uniform".into()));
        }
    }
    let diff = |a: usize, b: usize| -> Vec3 {
        let span = (b - a) as f64 * dt * C;
        std::array::from_fn(|k| (centers[b][k] - centers[a][k]) / span)
    };
    Ok((0..n)
        .map(|i| match i {
            0 => diff(0, 1),
            _ if i == n - 1 => diff(n - 2, n - 1),
            _ => diff(i - 1, i + 1),
        })
        .collect())
}

impl ObservableSeries {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn centers(&self) -> Vec<Vec3> {
        self.records.iter().map(|r| r.center).collect()
    }

    /// Recomputes `velocity` of every record from the centre track.
    pub fn fill_velocities(&mut self) {
        if let Ok(v) = velocity_series(&self.times(), &self.centers()) {
            for (r, v) in self.records.iter_mut().zip(v) {
                r.velocity = v;
            }
        }
    }

    /// `max |f(r) - f(r0)| / |f(r0)|` over the series.
    pub fn relative_drift(&self, f: impl Fn(&ObservableRecord) -> f64) -> f64 {
        let Some(first) = self.records.first() else {
            return 0.0;
        };
        let f0 = f(first);
        self.records
            .iter()
            .map(|r| ((f(r) - f0) / f0).abs())
            .fold(0.0, f64::max)
    }

    pub fn norm_drift(&self) -> f64 {
        self.relative_drift(|r| r.norm)
    }

    pub fn energy_drift(&self) -> f64 {
        self.relative_drift(|r| r.energy)
    }

    pub fn canonical_drift(&self, axis: usize) -> f64 {
        self.relative_drift(|r| r.p_canon[axis])
    }

    /// `(position, velocity)` pairs along one axis.
    pub fn velocity_profile(&self, axis: usize) -> Vec<(f64, f64)> {
        self.records
            .iter()
            .map(|r| (r.center[axis], r.velocity[axis]))
            .collect()
    }
}
