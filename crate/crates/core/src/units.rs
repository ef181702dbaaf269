//! Unit system shared by every part of the solver.
//!
//! Internally everything is expressed in "natural simulation units":
//!
//! * energy in MeV, momentum in MeV/c, length in nm,
//! * time in nm/c (so the speed of light is exactly 1),
//! * charges in multiples of the elementary charge `e`.
//!
//! Potentials are stored already multiplied by `e`: the scalar potential in
//! MV (so `q * a0` is an energy in MeV for `q` in units of `e`) and the
//! vector potential in MeV/(c e) (so `q * a` is a momentum in MeV/c). The
//! helpers below convert the SI quantities used in scenario files
//! (tesla, weber, coulomb-metre per metre) to and from these units.

/// `hbar * c` in MeV nm (CODATA 2018: 197.3269804 MeV fm).
pub const HBAR_C_MEV_NM: f64 = 197.326_980_4e-6;

/// Speed of light in internal units.
pub const C: f64 = 1.0;

/// Reduced Planck constant in MeV (nm/c).
pub const HBAR: f64 = HBAR_C_MEV_NM / C;

/// Electron rest energy `m c^2` in MeV.
pub const ELECTRON_REST_ENERGY_MEV: f64 = 0.510_998_95;

/// Speed of light in m/s (exact).
pub const SPEED_OF_LIGHT_SI: f64 = 299_792_458.0;

/// Elementary charge in coulomb (exact).
pub const ELEMENTARY_CHARGE_SI: f64 = 1.602_176_634e-19;

/// Vacuum permittivity in F/m (CODATA 2018).
pub const EPSILON_0_SI: f64 = 8.854_187_812_8e-12;

const NM_PER_M: f64 = 1e9;
const EV_PER_MEV: f64 = 1e6;

/// One tesla expressed as `e * B` in MeV/(c nm).
///
/// `e B r` for `B` in tesla and `r` in nm gives a momentum in MeV/c after
/// multiplying by this factor (`c / (1e9 * 1e6)` numerically).
pub const TESLA: f64 = SPEED_OF_LIGHT_SI / (NM_PER_M * EV_PER_MEV);

/// One weber expressed as `e * Phi` in MeV nm / c.
pub const WEBER: f64 = TESLA * NM_PER_M * NM_PER_M;

/// One volt expressed as `e * A0` in MeV.
pub const VOLT: f64 = 1.0 / EV_PER_MEV;

/// Bundle of the fundamental constants in internal units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitSystem {
    pub hbar: f64,
    pub c: f64,
    pub electron_rest_energy: f64,
    pub elementary_charge_magnitude: f64,
}

impl Default for UnitSystem {
    fn default() -> Self {
        Self::natural()
    }
}

impl UnitSystem {
    /// MeV / nm / (nm/c) units with charges measured in `e`.
    pub const fn natural() -> Self {
        Self {
            hbar: HBAR,
            c: C,
            electron_rest_energy: ELECTRON_REST_ENERGY_MEV,
            elementary_charge_magnitude: 1.0,
        }
    }

    pub fn tesla_to_internal(&self, b: f64) -> f64 {
        b * TESLA
    }

    pub fn internal_to_tesla(&self, b: f64) -> f64 {
        b / TESLA
    }

    pub fn weber_to_internal(&self, flux: f64) -> f64 {
        flux * WEBER
    }

    pub fn internal_to_weber(&self, flux: f64) -> f64 {
        flux / WEBER
    }

    /// Converts a dipole line density (C m / m) into the prefactor
    /// `line_density / (2 pi eps0)` expressed in MV nm, i.e. the factor
    /// multiplying a geometric term measured in 1/nm.
    pub fn dipole_prefactor(&self, line_density: f64) -> f64 {
        line_density / (2.0 * std::f64::consts::PI * EPSILON_0_SI) * NM_PER_M * VOLT
    }

    /// Inverse of [`UnitSystem::dipole_prefactor`].
    pub fn dipole_prefactor_to_si(&self, prefactor: f64) -> f64 {
        prefactor * (2.0 * std::f64::consts::PI * EPSILON_0_SI) / (NM_PER_M * VOLT)
    }

    /// Time unit in seconds.
    pub fn time_unit_seconds(&self) -> f64 {
        1.0 / (NM_PER_M * SPEED_OF_LIGHT_SI)
    }
}
