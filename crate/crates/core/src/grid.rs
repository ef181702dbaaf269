//! Lattice geometry and the explicit time-step bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::C;

pub type Vec3 = [f64; 3];

/// Default fraction of the free-streaming bound `delta / (c sqrt 3)`.
pub const DEFAULT_CFL_SAFETY: f64 = 0.5;

/// Largest safety factor for which the free leapfrog update is stable.
///
/// A Fourier mode of the centred-difference operator has an eigenvalue of
/// magnitude at most `c sqrt(3) / delta`; the staggered update is stable while
/// that magnitude times `delta_t` stays below 2. The diagonal mass / `A0`
/// factor is unitary and does not move this bound, the off-diagonal vector
/// coupling does (see [`stability_limit`]).
pub const MAX_CFL_SAFETY: f64 = 2.0;

/// `s * delta / (c sqrt 3)` with the default safety factor `s = 0.5`.
pub fn cfl_limit(delta: f64) -> f64 {
    cfl_limit_with(delta, DEFAULT_CFL_SAFETY)
}

pub fn cfl_limit_with(delta: f64, safety: f64) -> f64 {
    safety * delta / (C * 3f64.sqrt())
}

/// Hard stability bound of the leapfrog update including a vector-potential
/// coupling of magnitude `max_coupling = max |q A| / hbar` (1/nm).
pub fn stability_limit(delta: f64, max_coupling: f64) -> f64 {
    MAX_CFL_SAFETY / (C * 3f64.sqrt() / delta + C * max_coupling)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Axis> {
        match i {
            0 => Some(Axis::X),
            1 => Some(Axis::Y),
            2 => Some(Axis::Z),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            "z" | "Z" => Ok(Axis::Z),
            other => Err(Error::InvalidParameter(format!("unknown axis `{other}`"))),
        }
    }
}

/// Uniform cubic lattice.
///
/// Index `(i, j, k)` maps to `origin + delta * (i, j, k)`, with `i` along x,
/// `j` along y and `k` along z. Storage order everywhere is `k` fastest, then
/// `j`, then `i`.
///
/// An axis with exactly three cells is *flat*: it has a single interior
/// plane, centred differences across it vanish, and the field is treated as
/// uniform along it. This models configurations that are translation
/// invariant along that axis (for example sources that are infinite lines).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_x: usize,
    pub n_y: usize,
    pub n_z: usize,
    pub delta: f64,
    pub delta_t: f64,
    pub origin: Vec3,
    pub cfl_safety: f64,
}

impl GridSpec {
    /// Grid using the default time step `cfl_limit(delta)`.
    pub fn new(counts: [usize; 3], delta: f64, origin: Vec3) -> Result<Self> {
        Self::with_time_step(counts, delta, cfl_limit(delta), origin, DEFAULT_CFL_SAFETY)
    }

    /// Grid with an explicit time step, checked against `cfl_limit_with(delta, safety)`.
    pub fn with_time_step(
        counts: [usize; 3],
        delta: f64,
        delta_t: f64,
        origin: Vec3,
        safety: f64,
    ) -> Result<Self> {
        let [n_x, n_y, n_z] = counts;
        if counts.iter().any(|&n| n < 3) {
            return Err(Error::InvalidGrid(format!(
                "cell counts {counts:?} must all be at least 3"
            )));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidGrid(format!("delta = {delta} must be positive")));
        }
        if !(safety > 0.0 && safety <= MAX_CFL_SAFETY) {
            return Err(Error::InvalidGrid(format!(
                "CFL safety factor {safety} outside (0, {MAX_CFL_SAFETY}]"
            )));
        }
        if !(delta_t.is_finite() && delta_t > 0.0) {
            return Err(Error::InvalidGrid(format!("delta_t = {delta_t} must be positive")));
        }
        let limit = cfl_limit_with(delta, safety);
        // allow for round-off when delta_t was computed from the same formula
        if delta_t > limit * (1.0 + 1e-12) {
            return Err(Error::InvalidGrid(format!(
                "delta_t = {delta_t} exceeds CFL limit {limit} (safety {safety})"
            )));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        Ok(Self {
            n_x,
            n_y,
            n_z,
            delta,
            delta_t,
            origin,
            cfl_safety: safety,
        })
    }

    /// Grid of the given counts whose geometric centre sits at `center`.
    pub fn centered(counts: [usize; 3], delta: f64, center: Vec3) -> Result<Self> {
        let origin = centered_origin(counts, delta, center);
        Self::new(counts, delta, origin)
    }

    pub fn counts(&self) -> [usize; 3] {
        [self.n_x, self.n_y, self.n_z]
    }

    pub fn len(&self) -> usize {
        self.n_x * self.n_y * self.n_z
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of cells in one `i = const` plane.
    pub fn plane_len(&self) -> usize {
        self.n_y * self.n_z
    }

    pub fn cell_volume(&self) -> f64 {
        self.delta * self.delta * self.delta
    }

    #[inline]
    pub fn linear_index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n_y + j) * self.n_z + k
    }

    pub fn contains(&self, i: usize, j: usize, k: usize) -> bool {
        i < self.n_x && j < self.n_y && k < self.n_z
    }

    /// Physical position of a lattice index.
    ///
    /// Panics on out-of-bounds indices; use [`GridSpec::try_position`] when
    /// the index is not known to be valid.
    #[inline]
    pub fn index_to_position(&self, i: usize, j: usize, k: usize) -> Vec3 {
        assert!(
            self.contains(i, j, k),
            "index ({i}, {j}, {k}) outside {:?}",
            self.counts()
        );
        self.position_unchecked(i, j, k)
    }

    pub fn try_position(&self, i: usize, j: usize, k: usize) -> Result<Vec3> {
        if !self.contains(i, j, k) {
            return Err(Error::OutOfBounds {
                i,
                j,
                k,
                nx: self.n_x,
                ny: self.n_y,
                nz: self.n_z,
            });
        }
        Ok(self.position_unchecked(i, j, k))
    }

    #[inline]
    pub(crate) fn position_unchecked(&self, i: usize, j: usize, k: usize) -> Vec3 {
        [
            self.origin[0] + self.delta * i as f64,
            self.origin[1] + self.delta * j as f64,
            self.origin[2] + self.delta * k as f64,
        ]
    }

    /// Coordinate of index `n` along one axis.
    #[inline]
    pub fn coordinate(&self, axis: Axis, n: usize) -> f64 {
        self.origin[axis.index()] + self.delta * n as f64
    }

    /// Physical extent `[lo, hi]` covered by cell centres along each axis.
    pub fn bounds(&self) -> [[f64; 2]; 3] {
        let c = self.counts();
        std::array::from_fn(|a| {
            [
                self.origin[a],
                self.origin[a] + self.delta * (c[a] - 1) as f64,
            ]
        })
    }

    /// True when `axis` has a single interior plane.
    pub fn is_flat(&self, axis: Axis) -> bool {
        self.counts()[axis.index()] == 3
    }

    /// Number of interior (updated) cells.
    pub fn interior_len(&self) -> usize {
        self.counts().iter().map(|n| n - 2).product()
    }

    pub fn duration(&self, steps: usize) -> f64 {
        self.delta_t * steps as f64
    }
}

/// Origin that puts the geometric centre of a grid at `center`.
pub fn centered_origin(counts: [usize; 3], delta: f64, center: Vec3) -> Vec3 {
    std::array::from_fn(|a| center[a] - delta * (counts[a] - 1) as f64 / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cfl_reference_values() {
        let t = cfl_limit(1e-3);
        assert!((t - 0.5e-3 / 3f64.sqrt()).abs() < 1e-18);
        assert!((t - 2.887e-4).abs() < 1e-7);
        assert_eq!(cfl_limit(2e-3), 2.0 * t);
    }

    #[test]
    fn positions() {
        let g = GridSpec::new([4, 4, 4], 0.5, [0.0; 3]).unwrap();
        assert_eq!(g.index_to_position(0, 0, 0), [0.0, 0.0, 0.0]);
        assert_eq!(g.index_to_position(1, 2, 3), [0.5, 1.0, 1.5]);

        let c = GridSpec::centered([5, 7, 9], 0.1, [0.0; 3]).unwrap();
        let p = c.index_to_position(2, 3, 4);
        assert!(p.iter().all(|v| v.abs() < 1e-15), "{p:?}");
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new([2, 4, 4], 1.0, [0.0; 3]).is_err());
        assert!(GridSpec::new([4, 4, 4], 0.0, [0.0; 3]).is_err());
        assert!(GridSpec::with_time_step([4, 4, 4], 1.0, 1.0, [0.0; 3], 0.5).is_err());
        assert!(GridSpec::with_time_step([4, 4, 4], 1.0, 0.5, [0.0; 3], 1.0).is_ok());
        assert!(GridSpec::with_time_step([4, 4, 4], 1.0, 0.1, [0.0; 3], 3.0).is_err());
        let g = GridSpec::new([4, 4, 4], 1.0, [0.0; 3]).unwrap();
        assert!(g.try_position(4, 0, 0).is_err());
    }

    #[test]
    #[should_panic]
    fn out_of_bounds_position_panics() {
        let g = GridSpec::new([4, 4, 4], 1.0, [0.0; 3]).unwrap();
        g.index_to_position(0, 0, 4);
    }

    proptest! {
        #[test]
        fn cfl_is_homogeneous(delta in 1e-6f64..1.0, scale in 0.01f64..100.0) {
            let a = cfl_limit(delta * scale);
            let b = scale * cfl_limit(delta);
            prop_assert!(((a - b) / b).abs() < 1e-14);
        }

        #[test]
        fn positions_are_affine(i in 0usize..30, j in 0usize..30, k in 0usize..30,
                                delta in 1e-4f64..1.0, ox in -1.0f64..1.0) {
            let g = GridSpec::new([32, 32, 32], delta, [ox, 0.0, -ox]).unwrap();
            let p0 = g.index_to_position(i, j, k);
            let p1 = g.index_to_position(i + 1, j, k);
            prop_assert!((p1[0] - p0[0] - delta).abs() < 1e-12);
            prop_assert_eq!(p1[1], p0[1]);
            prop_assert_eq!(p1[2], p0[2]);
        }
    }
}
