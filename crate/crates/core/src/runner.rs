//! Executes a [`Scenario`] and writes its outputs.
//!
//! Layout of the output directory:
//!
//! - `series.csv`: observables every `record_stride` steps
//! - `snap_<axis><index>_<step>.bin`: one file per plane and snapshot step
//! - `oracle.csv`: classical on-axis trajectory (dipole lines, solenoid pair)
//! - `manifest.json`: parameters, drifts and the list of files

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::classical::{self, ClassicalState, Model, Particle, Trajectory};
use crate::error::{Error, Result};
use crate::io::{self, Manifest, OracleSummary, SnapshotMeta, BOUNDARY_CLEAR};
use crate::observables::ObservableSeries;
use crate::packet::{init_packet, init_packet_in};
use crate::potentials::{FourPotential, PotentialDescriptor, SampledPotential};
use crate::scenario::{PlaneSpec, Scenario};
use crate::spinor::SpinorField;
use crate::stepper::{Observer, Simulation, StepperConfig};

pub const SERIES_FILE: &str = "series.csv";
pub const ORACLE_FILE: &str = "oracle.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Relative tolerance used when converging the classical trajectory.
const ORACLE_RTOL: f64 = 1e-10;

/// Everything a run produced, in memory.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub manifest: Manifest,
    pub series: ObservableSeries,
    pub oracle: Option<ObservableSeries>,
    pub output_dir: PathBuf,
}

impl RunReport {
    /// True when the solver stopped on a non-finite field.
    pub fn blew_up(&self) -> bool {
        self.manifest.failure.as_ref().is_some_and(|f| f.blow_up)
    }
}

pub fn snapshot_file_name(plane: &PlaneSpec, step: usize) -> String {
    format!("snap_{}{}_{:07}.bin", plane.axis.name(), plane.index, step)
}

struct SnapshotWriter<'a> {
    dir: &'a Path,
    planes: &'a [PlaneSpec],
    stride: usize,
    name_hash: u64,
    written: Vec<PathBuf>,
    error: Option<Error>,
}

impl Observer for SnapshotWriter<'_> {
    fn stride(&self) -> usize {
        self.stride
    }

    fn observe(
        &mut self,
        step: usize,
        field: &SpinorField,
        _pot: &SampledPotential,
        _cfg: &StepperConfig,
    ) -> Result<()> {
        for plane in self.planes {
            let slice = field.probability_density_slice(plane.axis, plane.index)?;
            let name = snapshot_file_name(plane, step);
            let meta = SnapshotMeta {
                time: field.time(),
                axis: plane.axis,
                index: plane.index as u32,
                name_hash: self.name_hash,
                step: step as u64,
            };
            let path = self.dir.join(&name);
            if let Err(e) = io::write_snapshot(&path, &slice, &meta) {
                let msg = e.to_string();
                self.error = Some(e);
                return Err(Error::InvalidParameter(msg));
            }
            self.written.push(PathBuf::from(name));
        }
        Ok(())
    }
}

/// Builds the initial field of a scenario.
pub fn initial_field(s: &Scenario, potential: &FourPotential) -> Result<SpinorField> {
    if potential.has_vector_part() {
        init_packet_in(
            &s.grid,
            &s.packet,
            s.stepper.mass,
            s.stepper.charge,
            potential,
        )
    } else {
        init_packet(&s.grid, &s.packet, s.stepper.mass)
    }
}

/// On-axis classical model, when the configuration has one.
pub fn oracle_model(descriptor: &PotentialDescriptor) -> Result<Option<Model>> {
    Ok(match descriptor {
        PotentialDescriptor::DipoleLines(spec) => Some(Model::dipoles(spec)?),
        PotentialDescriptor::SolenoidPair(spec) => Some(Model::solenoids(spec)?),
        _ => None,
    })
}

/// Classical trajectory from the packet centre to `x_end` along x.
pub fn oracle_trajectory(s: &Scenario, x_end: f64) -> Result<Option<(Trajectory, f64, Model)>> {
    let Some(model) = oracle_model(&s.potential)? else {
        return Ok(None);
    };
    let particle = Particle {
        charge: s.stepper.charge,
        mass: s.stepper.mass,
    };
    let start = ClassicalState::from_momentum(s.packet.center[0], s.packet.momentum[0], s.stepper.mass);
    let dt0 = (x_end - start.x).abs() / (start.v.abs().max(1e-3) * 256.0);
    let (traj, dt) = classical::integrate_converged(&model, &particle, start, x_end, dt0, ORACLE_RTOL)?;
    Ok(Some((traj, dt, model)))
}

/// Runs `s`, writing into `out` (or the scenario's own output directory).
///
/// A blow-up is not an error: the partial outputs are written and the
/// failure is recorded in the manifest.
pub fn run_scenario(s: &Scenario, out: Option<&Path>) -> Result<RunReport> {
    s.validate()?;
    let dir = out.unwrap_or(&s.output_dir).to_path_buf();
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let started = Instant::now();

    let potential = FourPotential::from_descriptor(&s.potential)?;
    let field = initial_field(s, &potential)?;
    let mut sim = Simulation::new(field, potential, s.stepper)?;
    if let Some(w) = s.window {
        sim = sim.with_window(w)?;
    }
    let mut snaps = SnapshotWriter {
        dir: &dir,
        planes: &s.snapshot_planes,
        stride: if s.snapshot_planes.is_empty() { 0 } else { s.snapshot_stride },
        name_hash: io::name_hash(&s.name),
        written: Vec::new(),
        error: None,
    };
    let mut series = sim.run(s.n_steps, s.record_stride, &mut [&mut snaps]);
    if let Some(e) = snaps.error.take() {
        return Err(e);
    }
    let mut files = std::mem::take(&mut snaps.written);

    io::write_series(&dir.join(SERIES_FILE), &series)?;
    files.push(PathBuf::from(SERIES_FILE));

    let mut oracle = None;
    let mut oracle_summary = None;
    if let Some(last) = series.records.last() {
        let x_end = last.center[0];
        if x_end > s.packet.center[0] {
            match oracle_trajectory(s, x_end) {
                Ok(Some((traj, dt, model))) => {
                    let particle = Particle {
                        charge: s.stepper.charge,
                        mass: s.stepper.mass,
                    };
                    let overlay = traj.to_series(&model, &particle);
                    io::write_series(&dir.join(ORACLE_FILE), &overlay)?;
                    files.push(PathBuf::from(ORACLE_FILE));
                    oracle_summary = Some(OracleSummary {
                        time_step: dt,
                        max_neglected_term: classical::neglected_term(&traj, &model, &particle)
                            .into_iter()
                            .fold(0.0, f64::max),
                        error: None,
                    });
                    oracle = Some(overlay);
                }
                Ok(None) => {}
                Err(e) => {
                    oracle_summary = Some(OracleSummary {
                        time_step: 0.0,
                        max_neglected_term: 0.0,
                        error: Some(e.to_string()),
                    })
                }
            }
        }
    }

    let peak = sim.field.peak_amplitude();
    let boundary_to_peak = if peak > 0.0 {
        sim.field.boundary_amplitude(2) / peak
    } else {
        f64::NAN
    };
    files.push(PathBuf::from(MANIFEST_FILE));
    let manifest = Manifest {
        scenario: s.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: started.elapsed().as_secs_f64(),
        steps_completed: sim.field.steps,
        width_nm: s.packet.width,
        width_source: s.width_source,
        norm_drift: series.norm_drift(),
        energy_drift: series.energy_drift(),
        canonical_momentum_drift: std::array::from_fn(|a| {
            // drift relative to |p| so that zero components stay finite
            let p = s.packet.momentum.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            series
                .records
                .iter()
                .map(|r| (r.p_canon[a] - series.records[0].p_canon[a]).abs() / p)
                .fold(0.0, f64::max)
        }),
        norm_lost: sim.norm_lost,
        window_shift_cells: sim.window_shift,
        boundary_to_peak,
        boundary_clear: boundary_to_peak < BOUNDARY_CLEAR,
        flagged_cells: sim.sampled.warning_count(),
        oracle: oracle_summary,
        failure: series.failure.take(),
        files,
    };
    io::write_manifest(&dir.join(MANIFEST_FILE), &manifest)?;
    series.failure = manifest.failure.clone();
    Ok(RunReport {
        manifest,
        series,
        oracle,
        output_dir: dir,
    })
}
