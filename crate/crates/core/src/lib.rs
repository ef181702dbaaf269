//! Finite-difference time-domain solver for the time-dependent Dirac
//! equation in three dimensions.
//!
//! Units: energies in MeV, lengths in nm, times in nm/c (so `c = 1`).
//! Potentials are stored multiplied by the elementary charge.

pub mod classical;
pub mod error;
pub mod grid;
pub mod io;
pub mod observables;
pub mod packet;
pub mod potentials;
pub mod runner;
pub mod scenario;
pub mod spinor;
pub mod stepper;
pub mod units;

pub use error::{Error, Result};
pub use grid::{Axis, GridSpec, Vec3};
pub use observables::{ObservableRecord, ObservableSeries, RunFailure};
pub use packet::{init_packet, init_packet_in, PacketSpec, Spin};
pub use potentials::{FourPotential, PotentialDescriptor, SampledPotential};
pub use runner::{run_scenario, RunReport};
pub use scenario::{parse_scenario, parse_with_overrides, preset, preset_names, PlaneSpec, Scenario};
pub use spinor::{Slice2D, SpinorField, Stagger};
pub use stepper::{Boundary, MovingWindow, Observer, Simulation, StepperConfig};
