//! Four-component spinor storage and its elementary reductions.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Axis, GridSpec};

/// Time levels of the two component pairs.
///
/// Components 1-2 and 3-4 are advanced alternately and therefore never live
/// at the same instant: between steps components 1-2 trail by `delta_t / 2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stagger {
    pub time_of_12: f64,
    pub time_of_34: f64,
}

impl Stagger {
    pub fn at(t: f64, delta_t: f64) -> Self {
        Self {
            time_of_12: t - 0.5 * delta_t,
            time_of_34: t,
        }
    }
}

/// The wave function on the lattice, one array per spinor component.
#[derive(Clone, Debug)]
pub struct SpinorField {
    grid: GridSpec,
    psi: [Vec<Complex64>; 4],
    pub stagger: Stagger,
    /// Number of full steps taken so far.
    pub steps: usize,
}

/// A 2D real array in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct Slice2D {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Slice2D {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Row and column of the largest entry.
    pub fn argmax(&self) -> (usize, usize) {
        let (idx, _) = self
            .data
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| {
                if v > acc.1 {
                    (i, v)
                } else {
                    acc
                }
            });
        (idx / self.cols, idx % self.cols)
    }
}

impl SpinorField {
    pub fn zeros(grid: GridSpec) -> Self {
        let n = grid.len();
        Self {
            grid,
            psi: std::array::from_fn(|_| vec![Complex64::new(0.0, 0.0); n]),
            stagger: Stagger::at(0.0, grid.delta_t),
            steps: 0,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Component `c` in `0..4` (Psi_1 is component 0).
    pub fn component(&self, c: usize) -> &[Complex64] {
        &self.psi[c]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        &mut self.psi[c]
    }

    pub fn components(&self) -> &[Vec<Complex64>; 4] {
        &self.psi
    }

    pub(crate) fn components_mut(&mut self) -> &mut [Vec<Complex64>; 4] {
        &mut self.psi
    }

    pub fn spinor_at(&self, i: usize, j: usize, k: usize) -> [Complex64; 4] {
        let n = self.grid.linear_index(i, j, k);
        std::array::from_fn(|c| self.psi[c][n])
    }

    pub fn set_spinor(&mut self, i: usize, j: usize, k: usize, value: [Complex64; 4]) {
        let n = self.grid.linear_index(i, j, k);
        for (c, v) in value.into_iter().enumerate() {
            self.psi[c][n] = v;
        }
    }

    /// Time of the integer-level components, used to stamp observables.
    pub fn time(&self) -> f64 {
        self.stagger.time_of_34
    }

    #[inline]
    pub(crate) fn density_at(&self, n: usize) -> f64 {
        self.psi[0][n].norm_sqr()
            + self.psi[1][n].norm_sqr()
            + self.psi[2][n].norm_sqr()
            + self.psi[3][n].norm_sqr()
    }

    pub fn is_finite(&self) -> bool {
        self.psi
            .iter()
            .all(|c| c.par_iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }

    pub fn scale(&mut self, factor: f64) {
        for c in self.psi.iter_mut() {
            c.par_iter_mut().for_each(|z| *z *= factor);
        }
    }

    /// Multiplies every component by `exp(i theta)`.
    pub fn rotate_phase(&mut self, theta: f64) {
        let w = Complex64::from_polar(1.0, theta);
        for c in self.psi.iter_mut() {
            c.par_iter_mut().for_each(|z| *z *= w);
        }
    }

    /// Fixed-order reduction of a per-cell quantity.
    ///
    /// Each `i` plane is summed sequentially in storage order and the plane
    /// sums are then added in increasing `i`, so the result does not depend
    /// on the number of worker threads.
    pub(crate) fn reduce_cells<F>(&self, f: F) -> f64
    where
        F: Fn(usize, usize, usize, usize) -> f64 + Sync,
    {
        let g = self.grid;
        let partial: Vec<f64> = (0..g.n_x)
            .into_par_iter()
            .map(|i| {
                let mut acc = 0.0;
                for j in 0..g.n_y {
                    for k in 0..g.n_z {
                        acc += f(g.linear_index(i, j, k), i, j, k);
                    }
                }
                acc
            })
            .collect();
        partial.iter().sum()
    }

    /// Vector-valued variant of [`SpinorField::reduce_cells`].
    pub(crate) fn reduce_cells_n<const N: usize, F>(&self, f: F) -> [f64; N]
    where
        F: Fn(usize, usize, usize, usize) -> [f64; N] + Sync,
    {
        let g = self.grid;
        let partial: Vec<[f64; N]> = (0..g.n_x)
            .into_par_iter()
            .map(|i| {
                let mut acc = [0.0; N];
                for j in 0..g.n_y {
                    for k in 0..g.n_z {
                        let v = f(g.linear_index(i, j, k), i, j, k);
                        for (a, b) in acc.iter_mut().zip(v) {
                            *a += b;
                        }
                    }
                }
                acc
            })
            .collect();
        partial.iter().fold([0.0; N], |mut acc, v| {
            for (a, b) in acc.iter_mut().zip(v) {
                *a += b;
            }
            acc
        })
    }

    /// `sum |Psi|^2 delta^3`, ignoring the half-step skew between the pairs.
    pub fn total_norm(&self) -> Result<f64> {
        let s = self.reduce_cells(|n, _, _, _| self.density_at(n));
        if !s.is_finite() {
            return Err(Error::BlowUp { step: 0 });
        }
        Ok(s * self.grid.cell_volume())
    }

    /// `|Psi|^2` on one lattice plane.
    ///
    /// The plane normal to `axis` at `index`; rows/cols are the remaining
    /// axes in x, y, z order (so the y-normal "horizontal" plane has rows
    /// along x and columns along z).
    pub fn probability_density_slice(&self, axis: Axis, index: usize) -> Result<Slice2D> {
        let g = self.grid;
        let len = g.counts()[axis.index()];
        if index >= len {
            return Err(Error::PlaneOutOfBounds { index, len });
        }
        let slice = match axis {
            Axis::X => {
                let mut s = Slice2D::zeros(g.n_y, g.n_z);
                for j in 0..g.n_y {
                    for k in 0..g.n_z {
                        s.data[j * g.n_z + k] = self.density_at(g.linear_index(index, j, k));
                    }
                }
                s
            }
            Axis::Y => {
                let mut s = Slice2D::zeros(g.n_x, g.n_z);
                for i in 0..g.n_x {
                    for k in 0..g.n_z {
                        s.data[i * g.n_z + k] = self.density_at(g.linear_index(i, index, k));
                    }
                }
                s
            }
            Axis::Z => {
                let mut s = Slice2D::zeros(g.n_x, g.n_y);
                for i in 0..g.n_x {
                    for j in 0..g.n_y {
                        s.data[i * g.n_y + j] = self.density_at(g.linear_index(i, j, index));
                    }
                }
                s
            }
        };
        Ok(slice)
    }

    /// Largest `|Psi|` (over all components) anywhere on the lattice.
    pub fn peak_amplitude(&self) -> f64 {
        let g = self.grid;
        (0..g.len())
            .into_par_iter()
            .map(|n| self.density_at(n).sqrt())
            .reduce(|| 0.0, f64::max)
    }

    /// Largest `|Psi|` within `depth` cells of the outer faces. Faces of
    /// flat axes (see [`GridSpec`]) are not boundaries and are skipped.
    pub fn boundary_amplitude(&self, depth: usize) -> f64 {
        let g = self.grid;
        let near = |n: usize, len: usize| len != 3 && (n < depth || n + depth >= len);
        (0..g.n_x)
            .into_par_iter()
            .map(|i| {
                let mut m: f64 = 0.0;
                for j in 0..g.n_y {
                    for k in 0..g.n_z {
                        if near(i, g.n_x) || near(j, g.n_y) || near(k, g.n_z) {
                            m = m.max(self.density_at(g.linear_index(i, j, k)));
                        }
                    }
                }
                m.sqrt()
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Moves the lattice content `cells` planes towards lower `i` and
    /// advances the origin by the same distance, so physical positions of
    /// the retained values do not change. Planes entering at the high-`i`
    /// end are zero. Returns the norm carried out through the low face.
    pub(crate) fn shift_window_x(&mut self, cells: usize) -> f64 {
        let g = self.grid;
        let cells = cells.min(g.n_x);
        let plane = g.plane_len();
        let lost: f64 = (0..cells * plane).map(|n| self.density_at(n)).sum::<f64>() * g.cell_volume();
        for c in self.psi.iter_mut() {
            c.copy_within(cells * plane.., 0);
            let len = c.len();
            c[len - cells * plane..].fill(Complex64::new(0.0, 0.0));
        }
        self.grid.origin[0] += g.delta * cells as f64;
        lost
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_field() -> SpinorField {
        let g = GridSpec::new([6, 5, 4], 0.1, [0.0; 3]).unwrap();
        let mut f = SpinorField::zeros(g);
        for i in 0..6 {
            for j in 0..5 {
                for k in 0..4 {
                    let x = (i * 31 + j * 7 + k) as f64;
                    f.set_spinor(
                        i,
                        j,
                        k,
                        [
                            Complex64::new(x.sin(), 0.3),
                            Complex64::new(0.1, x.cos()),
                            Complex64::new(0.0, 0.01 * x),
                            Complex64::new(-0.2, 0.0),
                        ],
                    );
                }
            }
        }
        f
    }

    #[test]
    fn zero_field_has_zero_norm() {
        let g = GridSpec::new([4, 4, 4], 1.0, [0.0; 3]).unwrap();
        assert_eq!(SpinorField::zeros(g).total_norm().unwrap(), 0.0);
    }

    #[test]
    fn norm_is_quadratic_and_phase_invariant() {
        let mut f = test_field();
        let n0 = f.total_norm().unwrap();
        f.scale(2.0);
        assert!((f.total_norm().unwrap() - 4.0 * n0).abs() < 1e-12 * n0);
        f.scale(0.5);
        f.rotate_phase(0.731);
        assert!((f.total_norm().unwrap() - n0).abs() < 1e-13 * n0);
    }

    #[test]
    fn non_finite_norm_is_an_error() {
        let mut f = test_field();
        f.component_mut(2)[7] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(f.total_norm(), Err(Error::BlowUp { .. })));
        assert!(!f.is_finite());
    }

    #[test]
    fn slices_add_up_to_norm() {
        let f = test_field();
        let g = *f.grid();
        let norm = f.total_norm().unwrap();
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            let len = g.counts()[axis.index()];
            let total: f64 = (0..len)
                .map(|n| f.probability_density_slice(axis, n).unwrap().sum() * g.delta * g.delta)
                .sum();
            assert!(((total - norm / g.delta) / (norm / g.delta)).abs() < 1e-12);
        }
        assert!(f.probability_density_slice(Axis::Z, 4).is_err());
    }

    #[test]
    fn window_shift_moves_content() {
        let mut f = test_field();
        let before = f.spinor_at(3, 2, 1);
        let pos_before = f.grid().index_to_position(3, 2, 1);
        f.shift_window_x(2);
        assert_eq!(f.spinor_at(1, 2, 1), before);
        assert_eq!(f.grid().index_to_position(1, 2, 1), pos_before);
        assert_eq!(f.spinor_at(5, 0, 0), [Complex64::new(0.0, 0.0); 4]);
    }
}
