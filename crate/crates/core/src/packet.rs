//! Gaussian spinor wave packets.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Axis, GridSpec, Vec3};
use crate::potentials::{line_integral, FourPotential};
use crate::spinor::SpinorField;
use crate::units::{C, HBAR};

/// Spin projection along z.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub fn name(self) -> &'static str {
        match self {
            Spin::Up => "up",
            Spin::Down => "down",
        }
    }
}

impl std::str::FromStr for Spin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "up" => Ok(Spin::Up),
            "down" => Ok(Spin::Down),
            other => Err(Error::InvalidParameter(format!("unknown spin `{other}`"))),
        }
    }
}

/// Positive-energy Gaussian packet.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PacketSpec {
    /// Envelope width `x0` (nm); `|Psi|^2 ~ exp(-r^2 / (2 x0^2))`.
    pub width: f64,
    /// Central kinetic momentum (MeV/c).
    pub momentum: Vec3,
    /// Initial centre (nm).
    pub center: Vec3,
    pub spin: Spin,
}

impl PacketSpec {
    /// Total energy `sqrt(p^2 c^2 + m^2 c^4)` for rest energy `mass`.
    pub fn energy(&self, mass: f64) -> f64 {
        let p2: f64 = self.momentum.iter().map(|p| p * p).sum();
        (p2 * C * C + mass * mass).sqrt()
    }

    /// Speed `|p| c^2 / E` of the central plane wave, in units of c.
    pub fn speed(&self, mass: f64) -> f64 {
        let p = self.momentum.iter().map(|p| p * p).sum::<f64>().sqrt();
        p * C / self.energy(mass)
    }

    /// Momentum spread `hbar / (2 x0)` of the envelope.
    pub fn momentum_spread(&self) -> f64 {
        HBAR / (2.0 * self.width)
    }

    /// Frequency (as an energy, MeV) at which the discrete scheme rotates the
    /// central plane wave of this packet.
    ///
    /// `vector_potential` is `q A` at the packet centre (MeV/c); the canonical
    /// wave number is then `(p + q A) / hbar`. For the leapfrog update the
    /// plane-wave dispersion relation reads
    /// `2 tan(E dt / 2 hbar) = sqrt(tau^2 + theta^2) / sqrt(1 - tau^2 / 4)` with
    /// `tau = |p_lat| c dt / hbar`, `theta = m dt / hbar` and the lattice
    /// kinetic momentum `p_lat = hbar sin(k delta) / delta - q A`.
    pub fn scheme_energy(&self, grid: &GridSpec, mass: f64, vector_potential: Vec3) -> f64 {
        let dt = grid.delta_t;
        let p_lat: f64 = (0..3)
            .map(|a| {
                let k = (self.momentum[a] + vector_potential[a]) / HBAR;
                let p = HBAR * (k * grid.delta).sin() / grid.delta - vector_potential[a];
                p * p
            })
            .sum::<f64>()
            .sqrt();
        let tau = p_lat * C * dt / HBAR;
        let theta = mass * dt / HBAR;
        let ratio = (tau * tau + theta * theta).sqrt() / (2.0 * (1.0 - tau * tau / 4.0).sqrt());
        2.0 * HBAR / dt * ratio.atan()
    }

    /// Constant spinor weights of the plane-wave factor (before normalization).
    pub fn spinor_weights(&self, mass: f64) -> [Complex64; 4] {
        let e = self.energy(mass);
        let [p1, p2, p3] = self.momentum;
        let d = e + mass;
        let z = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        match self.spin {
            Spin::Up => [
                one,
                z,
                Complex64::new(p3 * C / d, 0.0),
                Complex64::new(p1 * C / d, p2 * C / d),
            ],
            Spin::Down => [
                z,
                one,
                Complex64::new(p1 * C / d, -p2 * C / d),
                Complex64::new(-p3 * C / d, 0.0),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "packet width {} must be positive",
                self.width
            )));
        }
        if self.momentum.iter().chain(&self.center).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("packet parameters must be finite".into()));
        }
        Ok(())
    }

    /// Checks that `center +- margin * x0` lies inside the lattice on every
    /// axis that is not flat. On a flat axis the centre must sit on the
    /// interior plane.
    pub fn check_support(&self, grid: &GridSpec, margin: f64) -> Result<()> {
        let b = grid.bounds();
        for a in 0..3 {
            if grid.is_flat(Axis::from_index(a).expect("axis index")) {
                if self.momentum[a] != 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "packet momentum along flat axis {a} must be zero"
                    )));
                }
                let plane = b[a][0] + grid.delta;
                if (self.center[a] - plane).abs() > 1e-9 * grid.delta.max(plane.abs()) {
                    return Err(Error::InvalidParameter(format!(
                        "packet centre {} on flat axis {a} must equal the interior plane {plane}",
                        self.center[a]
                    )));
                }
                continue;
            }
            let lo = self.center[a] - margin * self.width;
            let hi = self.center[a] + margin * self.width;
            if lo < b[a][0] || hi > b[a][1] {
                return Err(Error::InvalidParameter(format!(
                    "packet support [{lo}, {hi}] on axis {a} exceeds grid [{}, {}]",
                    b[a][0], b[a][1]
                )));
            }
        }
        Ok(())
    }
}

/// Support radius, in widths, that must fit inside the lattice.
pub const SUPPORT_WIDTHS: f64 = 6.0;

/// Builds the free packet on `grid` for a particle of rest energy `mass`.
///
/// The boundary shell is left at zero (it is never updated). The field is
/// renormalized so that `total_norm() == 1`, and components
/// 1-2 are taken back by half a step with the scheme's own frequency for the
/// central momentum ([`PacketSpec::scheme_energy`]) so that they sit at
/// `-delta_t / 2`.
pub fn init_packet(grid: &GridSpec, spec: &PacketSpec, mass: f64) -> Result<SpinorField> {
    build(grid, spec, mass, None)
}

/// Like [`init_packet`], with the minimal-coupling phase
/// `exp(i q / hbar * integral A . dl)` (straight path from the packet centre)
/// so that `momentum` is the kinetic momentum even where `A != 0`.
pub fn init_packet_in(
    grid: &GridSpec,
    spec: &PacketSpec,
    mass: f64,
    charge: f64,
    potential: &FourPotential,
) -> Result<SpinorField> {
    build(grid, spec, mass, Some((charge, potential)))
}

fn build(
    grid: &GridSpec,
    spec: &PacketSpec,
    mass: f64,
    coupling: Option<(f64, &FourPotential)>,
) -> Result<SpinorField> {
    spec.validate()?;
    spec.check_support(grid, SUPPORT_WIDTHS)?;
    let weights = spec.spinor_weights(mass);
    let coupling = coupling.filter(|(_, pot)| pot.has_vector_part());
    let qa = match coupling {
        Some((q, pot)) => pot.a_vec(spec.center, 0.0).map(|a| q * a),
        None => [0.0; 3],
    };
    let energy = spec.scheme_energy(grid, mass, qa);
    let half_step = Complex64::from_polar(1.0, energy * grid.delta_t / (2.0 * HBAR));
    let inv4w2 = 1.0 / (4.0 * spec.width * spec.width);
    let k = spec.momentum.map(|p| p / HBAR);

    let mut field = SpinorField::zeros(*grid);
    let g = *grid;
    let plane = g.plane_len();
    let planes: Vec<Vec<Complex64>> = (0..g.n_x)
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::with_capacity(plane);
            for j in 0..g.n_y {
                for kk in 0..g.n_z {
                    let shell = i == 0 || j == 0 || kk == 0 || i + 1 == g.n_x || j + 1 == g.n_y || kk + 1 == g.n_z;
                    if shell {
                        out.push(Complex64::new(0.0, 0.0));
                        continue;
                    }
                    let p = g.position_unchecked(i, j, kk);
                    let d = [
                        p[0] - spec.center[0],
                        p[1] - spec.center[1],
                        p[2] - spec.center[2],
                    ];
                    let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
                    let mut phase = k[0] * d[0] + k[1] * d[1] + k[2] * d[2];
                    if let Some((q, pot)) = coupling {
                        phase += q * line_integral(pot, spec.center, p) / HBAR;
                    }
                    out.push(Complex64::from_polar((-r2 * inv4w2).exp(), phase));
                }
            }
            out
        })
        .collect();
    for (c, comp) in field.components_mut().iter_mut().enumerate() {
        let w = if c < 2 { weights[c] * half_step } else { weights[c] };
        if w == Complex64::new(0.0, 0.0) {
            continue;
        }
        for (i, vals) in planes.iter().enumerate() {
            for (dst, v) in comp[i * plane..(i + 1) * plane].iter_mut().zip(vals) {
                *dst = w * v;
            }
        }
    }
    let norm = field.total_norm()?;
    if norm <= 0.0 {
        return Err(Error::ZeroNorm);
    }
    field.scale(1.0 / norm.sqrt());
    Ok(field)
}
