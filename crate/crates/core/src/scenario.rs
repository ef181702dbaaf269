//! Scenario documents: parsing, overrides, validation and the preset catalog.
//!
//! A scenario is a TOML document with the sections `[run]`, `[grid]`,
//! `[packet]`, `[potential]` and `[stepper]`. Keys carry their unit in the
//! name. Unknown sections or keys are rejected. The repository README lists
//! every key.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{cfl_limit_with, stability_limit, Axis, GridSpec, Vec3, DEFAULT_CFL_SAFETY};
use crate::packet::{PacketSpec, Spin, SUPPORT_WIDTHS};
use crate::potentials::{
    DipoleLineSpec, DipoleOrientation, FourPotential, Gauge, PotentialDescriptor, SolenoidPairSpec,
};
use crate::stepper::{Boundary, MovingWindow, StepperConfig};
use crate::units::{C, ELECTRON_REST_ENERGY_MEV, HBAR};

/// Distance, in packet widths, between the packet centre and every
/// non-flat lattice face.
pub const MARGIN_WIDTHS: f64 = 8.0;

/// Largest default momentum spread `hbar / (2 x0)` as a fraction of `|p|`.
pub const DEFAULT_SPREAD_FRACTION: f64 = 0.1;

/// Where a packet width came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WidthSource {
    Explicit,
    /// Derived from [`DEFAULT_SPREAD_FRACTION`].
    Default,
}

/// One lattice plane to snapshot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaneSpec {
    pub axis: Axis,
    pub index: usize,
}

impl std::str::FromStr for PlaneSpec {
    type Err = Error;

    /// `"y:1"` style: axis name, colon, index.
    fn from_str(s: &str) -> Result<Self> {
        let (axis, index) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidParameter(format!("plane `{s}` is not of the form axis:index")))?;
        let index = index
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("plane index in `{s}` is not an integer")))?;
        Ok(Self {
            axis: axis.trim().parse()?,
            index,
        })
    }
}

impl std::fmt::Display for PlaneSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.axis.name(), self.index)
    }
}

/// A fully specified, validated simulation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub grid: GridSpec,
    pub packet: PacketSpec,
    pub width_source: WidthSource,
    pub potential: PotentialDescriptor,
    pub stepper: StepperConfig,
    pub n_steps: usize,
    /// Observables are recorded every this many steps.
    pub record_stride: usize,
    /// Snapshots are written every this many steps (0 disables them).
    pub snapshot_stride: usize,
    pub snapshot_planes: Vec<PlaneSpec>,
    pub window: Option<MovingWindow>,
    pub output_dir: PathBuf,
}

// ---------------------------------------------------------------------------
// raw document

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    run: RawRun,
    grid: RawGrid,
    packet: RawPacket,
    #[serde(default)]
    potential: RawPotential,
    #[serde(default)]
    stepper: RawStepper,
}

fn one() -> usize {
    1
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    name: String,
    steps: usize,
    #[serde(default = "one")]
    record_stride: usize,
    #[serde(default)]
    snapshot_stride: usize,
    #[serde(default)]
    snapshot_planes: Vec<String>,
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    cells: [usize; 3],
    delta_nm: f64,
    center_nm: Option<Vec3>,
    origin_nm: Option<Vec3>,
    cfl_safety: Option<f64>,
    time_step_nm_c: Option<f64>,
    #[serde(default)]
    moving_window: bool,
    window_anchor: Option<f64>,
    window_check_every: Option<usize>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawPacket {
    momentum_mev_c: Vec3,
    center_nm: Vec3,
    width_nm: Option<f64>,
    spin: Option<Spin>,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
enum PotentialKind {
    #[default]
    None,
    UniformB,
    DipoleLines,
    Solenoid,
    SolenoidPair,
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawPotential {
    #[serde(default)]
    kind: PotentialKind,
    field_t: Option<f64>,
    gauge: Option<Gauge>,
    line_density_c_m_per_m: Option<f64>,
    half_separation_nm: Option<f64>,
    orientation: Option<DipoleOrientation>,
    sign: Option<f64>,
    flux_wb: Option<f64>,
    radius_nm: Option<f64>,
    axis_nm: Option<[f64; 2]>,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
enum BoundaryKind {
    #[default]
    Reflecting,
    Damping,
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawStepper {
    charge_e: Option<f64>,
    rest_energy_mev: Option<f64>,
    #[serde(default)]
    boundary: BoundaryKind,
    damping_width_cells: Option<usize>,
    damping_strength: Option<f64>,
}

const SECTIONS: [&str; 5] = ["run", "grid", "packet", "potential", "stepper"];

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key` inside `[section]`, or 0 when it cannot be found (for
/// example when the value came from an override).
fn locate(text: &str, section: &str, key: &str) -> usize {
    let mut current = String::new();
    for (n, line) in text.lines().enumerate() {
        let t = line.trim();
        if let Some(name) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            current = name.trim().to_string();
        } else if current == section {
            if let Some((k, _)) = t.split_once('=') {
                if k.trim() == key {
                    return n + 1;
                }
            }
        }
    }
    0
}

fn syntax(text: &str, e: toml::de::Error) -> Error {
    let line = e.span().map(|s| line_of_offset(text, s.start)).unwrap_or(0);
    Error::Syntax {
        line,
        message: e.message().trim().to_string(),
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    parse_with_overrides(text, &[])
}

/// Like [`parse_scenario`], after applying `section.key=value` overrides.
///
/// Values are read as TOML; anything that is not a valid TOML value is taken
/// as a bare string, so `packet.spin=down` works without quotes.
pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<Scenario> {
    if overrides.is_empty() {
        let raw: RawDocument = toml::from_str(text).map_err(|e| syntax(text, e))?;
        return build(raw, text);
    }
    let mut table: toml::Table = toml::from_str(text).map_err(|e| syntax(text, e))?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let merged = toml::to_string(&table).map_err(|e| Error::Syntax {
        line: 0,
        message: e.to_string(),
    })?;
    // line numbers no longer refer to the user's file once overrides are merged
    let raw: RawDocument = toml::from_str(&merged).map_err(|e| Error::Syntax {
        line: 0,
        message: format!("after overrides: {}", e.message().trim()),
    })?;
    build(raw, "")
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let bad = |m: String| Error::Syntax { line: 0, message: m };
    let (path, value) = spec
        .split_once('=')
        .ok_or_else(|| bad(format!("override `{spec}` is not of the form section.key=value")))?;
    let (section, key) = path
        .trim()
        .split_once('.')
        .ok_or_else(|| bad(format!("override path `{path}` is not of the form section.key")))?;
    if !SECTIONS.contains(&section) {
        return Err(bad(format!("unknown section `{section}` in override `{spec}`")));
    }
    let value = value.trim();
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    let toml::Value::Table(sec) = entry else {
        return Err(bad(format!("`{section}` is not a section")));
    };
    sec.insert(key.trim().to_string(), parsed);
    Ok(())
}

fn invalid(rule: &'static str, detail: impl Into<String>) -> Error {
    Error::Validation {
        rule,
        detail: detail.into(),
    }
}

fn require<T>(value: Option<T>, text: &str, key: &str, kind: &str) -> Result<T> {
    value.ok_or_else(|| Error::Syntax {
        line: locate(text, "potential", "kind"),
        message: format!("potential kind `{kind}` needs `{key}`"),
    })
}

fn reject(present: bool, text: &str, key: &str, kind: &str) -> Result<()> {
    if present {
        return Err(Error::Syntax {
            line: locate(text, "potential", key),
            message: format!("key `{key}` does not apply to potential kind `{kind}`"),
        });
    }
    Ok(())
}

fn build_potential(p: &RawPotential, text: &str) -> Result<PotentialDescriptor> {
    let kind = p.kind;
    let name = match kind {
        PotentialKind::None => "none",
        PotentialKind::UniformB => "uniform_b",
        PotentialKind::DipoleLines => "dipole_lines",
        PotentialKind::Solenoid => "solenoid",
        PotentialKind::SolenoidPair => "solenoid_pair",
    };
    let uses = |key: &str| -> bool {
        match kind {
            PotentialKind::None => false,
            PotentialKind::UniformB => matches!(key, "field_t" | "gauge"),
            PotentialKind::DipoleLines => matches!(
                key,
                "line_density_c_m_per_m" | "half_separation_nm" | "orientation" | "sign"
            ),
            PotentialKind::Solenoid => matches!(key, "flux_wb" | "radius_nm" | "axis_nm"),
            PotentialKind::SolenoidPair => {
                matches!(key, "flux_wb" | "radius_nm" | "half_separation_nm")
            }
        }
    };
    let present = [
        ("field_t", p.field_t.is_some()),
        ("gauge", p.gauge.is_some()),
        ("line_density_c_m_per_m", p.line_density_c_m_per_m.is_some()),
        ("half_separation_nm", p.half_separation_nm.is_some()),
        ("orientation", p.orientation.is_some()),
        ("sign", p.sign.is_some()),
        ("flux_wb", p.flux_wb.is_some()),
        ("radius_nm", p.radius_nm.is_some()),
        ("axis_nm", p.axis_nm.is_some()),
    ];
    for (key, is_set) in present {
        reject(is_set && !uses(key), text, key, name)?;
    }
    let desc = match kind {
        PotentialKind::None => PotentialDescriptor::Zero,
        PotentialKind::UniformB => PotentialDescriptor::UniformB {
            b0: require(p.field_t, text, "field_t", name)?,
            gauge: p.gauge.unwrap_or(Gauge::Symmetric),
        },
        PotentialKind::DipoleLines => PotentialDescriptor::DipoleLines(DipoleLineSpec {
            line_density: require(p.line_density_c_m_per_m, text, "line_density_c_m_per_m", name)?,
            half_separation: require(p.half_separation_nm, text, "half_separation_nm", name)?,
            orientation: require(p.orientation, text, "orientation", name)?,
            sign: p.sign.unwrap_or(1.0),
        }),
        PotentialKind::Solenoid => PotentialDescriptor::Solenoid {
            flux: require(p.flux_wb, text, "flux_wb", name)?,
            radius: require(p.radius_nm, text, "radius_nm", name)?,
            center: p.axis_nm.unwrap_or([0.0, 0.0]),
        },
        PotentialKind::SolenoidPair => {
            let a = require(p.half_separation_nm, text, "half_separation_nm", name)?;
            PotentialDescriptor::SolenoidPair(SolenoidPairSpec {
                flux: require(p.flux_wb, text, "flux_wb", name)?,
                half_separation: a,
                // the exterior field does not depend on the radius at fixed flux
                radius: p.radius_nm.unwrap_or(a / 5.0),
            })
        }
    };
    // evaluator constructors perform the parameter checks
    FourPotential::from_descriptor(&desc).map_err(|e| invalid("potential", e.to_string()))?;
    Ok(desc)
}

fn build(raw: RawDocument, text: &str) -> Result<Scenario> {
    let g = &raw.grid;
    let safety = g.cfl_safety.unwrap_or(DEFAULT_CFL_SAFETY);
    let origin = match (g.center_nm, g.origin_nm) {
        (Some(_), Some(_)) => {
            return Err(Error::Syntax {
                line: locate(text, "grid", "origin_nm"),
                message: "give either grid.center_nm or grid.origin_nm, not both".into(),
            })
        }
        (Some(c), None) => crate::grid::centered_origin(g.cells, g.delta_nm, c),
        (None, Some(o)) => o,
        (None, None) => crate::grid::centered_origin(g.cells, g.delta_nm, [0.0; 3]),
    };
    let dt = g
        .time_step_nm_c
        .unwrap_or_else(|| cfl_limit_with(g.delta_nm, safety));
    let grid = GridSpec::with_time_step(g.cells, g.delta_nm, dt, origin, safety)
        .map_err(|e| invalid("cfl", e.to_string()))?;
    let window = if g.moving_window {
        let d = MovingWindow::default();
        Some(MovingWindow {
            anchor: g.window_anchor.unwrap_or(d.anchor),
            check_every: g.window_check_every.unwrap_or(d.check_every),
        })
    } else {
        if g.window_anchor.is_some() || g.window_check_every.is_some() {
            return Err(Error::Syntax {
                line: locate(text, "grid", "window_anchor").max(locate(text, "grid", "window_check_every")),
                message: "window settings given but grid.moving_window is false".into(),
            });
        }
        None
    };

    let p = &raw.packet;
    let p_mag = p.momentum_mev_c.iter().map(|v| v * v).sum::<f64>().sqrt();
    let (width, width_source) = match p.width_nm {
        Some(w) => (w, WidthSource::Explicit),
        None if p_mag > 0.0 => (HBAR / (2.0 * DEFAULT_SPREAD_FRACTION * p_mag), WidthSource::Default),
        None => {
            return Err(Error::Syntax {
                line: locate(text, "packet", "momentum_mev_c"),
                message: "packet.width_nm is required for a packet at rest".into(),
            })
        }
    };
    let packet = PacketSpec {
        width,
        momentum: p.momentum_mev_c,
        center: p.center_nm,
        spin: p.spin.unwrap_or(Spin::Up),
    };

    let s = &raw.stepper;
    let boundary = match s.boundary {
        BoundaryKind::Reflecting => {
            if s.damping_width_cells.is_some() || s.damping_strength.is_some() {
                return Err(Error::Syntax {
                    line: locate(text, "stepper", "damping_width_cells")
                        .max(locate(text, "stepper", "damping_strength")),
                    message: "damping settings need stepper.boundary = \"damping\"".into(),
                });
            }
            Boundary::Reflecting
        }
        BoundaryKind::Damping => Boundary::DampingLayer {
            width: s.damping_width_cells.unwrap_or(8),
            strength: s.damping_strength.unwrap_or(0.05),
        },
    };
    let stepper = StepperConfig {
        charge: s.charge_e.unwrap_or(-1.0),
        mass: s.rest_energy_mev.unwrap_or(ELECTRON_REST_ENERGY_MEV),
        boundary,
    };

    let r = &raw.run;
    let snapshot_planes = r
        .snapshot_planes
        .iter()
        .map(|s| {
            s.parse().map_err(|e: Error| Error::Syntax {
                line: locate(text, "run", "snapshot_planes"),
                message: e.to_string(),
            })
        })
        .collect::<Result<Vec<PlaneSpec>>>()?;

    let scenario = Scenario {
        name: r.name.clone(),
        grid,
        packet,
        width_source,
        potential: build_potential(&raw.potential, text)?,
        stepper,
        n_steps: r.steps,
        record_stride: r.record_stride,
        snapshot_stride: r.snapshot_stride,
        snapshot_planes,
        window,
        output_dir: r
            .output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("out").join(&r.name)),
    };
    scenario.validate()?;
    Ok(scenario)
}

// ---------------------------------------------------------------------------
// validation

impl Scenario {
    /// Checks every documented rule; the error names the first one violated.
    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return Err(invalid(
                "name",
                format!("`{}` must be non-empty ASCII letters, digits, `_` or `-`", self.name),
            ));
        }
        if self.record_stride == 0 {
            return Err(invalid("run", "record_stride must be at least 1"));
        }
        for plane in &self.snapshot_planes {
            let len = self.grid.counts()[plane.axis.index()];
            if plane.index >= len {
                return Err(invalid(
                    "snapshot_plane",
                    format!("plane {plane} outside axis of {len} cells"),
                ));
            }
        }
        self.stepper
            .validate(&self.grid)
            .map_err(|e| invalid("stepper", e.to_string()))?;
        if let Some(w) = &self.window {
            w.validate().map_err(|e| invalid("window", e.to_string()))?;
        }
        self.packet
            .validate()
            .map_err(|e| invalid("packet", e.to_string()))?;
        self.check_flat_axes()?;
        self.packet
            .check_support(&self.grid, MARGIN_WIDTHS)
            .map_err(|e| invalid("packet_margin", e.to_string()))?;
        self.check_keep_out()?;
        self.check_stability()
    }

    fn check_flat_axes(&self) -> Result<()> {
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            if !self.grid.is_flat(axis) {
                continue;
            }
            let a = axis.index();
            if self.packet.momentum[a] != 0.0 {
                return Err(invalid(
                    "flat_axis",
                    format!("momentum along flat axis {} must be zero", axis.name()),
                ));
            }
            let plane = self.grid.coordinate(axis, 1);
            if (self.packet.center[a] - plane).abs() > 1e-9 * self.grid.delta.max(plane.abs()) {
                return Err(invalid(
                    "flat_axis",
                    format!(
                        "packet centre {} on flat axis {} must equal the interior plane {plane}",
                        self.packet.center[a],
                        axis.name()
                    ),
                ));
            }
            if self.window.is_some() && axis == Axis::X {
                return Err(invalid("flat_axis", "a moving window needs a non-flat x axis"));
            }
        }
        Ok(())
    }

    /// Packet support must not overlap solenoid interiors or singular
    /// dipole lines (distances measured in the x-z plane).
    fn check_keep_out(&self) -> Result<()> {
        let support = SUPPORT_WIDTHS * self.packet.width;
        let [x, _, z] = self.packet.center;
        let dist = |cx: f64, cz: f64| ((x - cx).powi(2) + (z - cz).powi(2)).sqrt();
        match &self.potential {
            PotentialDescriptor::SolenoidPair(s) => {
                for cz in [s.half_separation, -s.half_separation] {
                    let d = dist(0.0, cz);
                    if d < s.radius + support {
                        return Err(invalid(
                            "solenoid_keep_out",
                            format!(
                                "packet support (radius {support} nm) reaches the solenoid at z = {cz} nm (distance {d} nm, solenoid radius {} nm)",
                                s.radius
                            ),
                        ));
                    }
                }
            }
            PotentialDescriptor::Solenoid { radius, center, .. } => {
                let d = dist(center[0], center[1]);
                if d < radius + support {
                    return Err(invalid(
                        "solenoid_keep_out",
                        format!("packet support reaches the solenoid at {center:?} (distance {d} nm)"),
                    ));
                }
            }
            PotentialDescriptor::DipoleLines(s) => {
                for cz in [s.half_separation, -s.half_separation] {
                    let d = dist(0.0, cz);
                    if d < support {
                        return Err(invalid(
                            "dipole_line_keep_out",
                            format!("packet support reaches the dipole line at z = {cz} nm (distance {d} nm)"),
                        ));
                    }
                }
            }
            PotentialDescriptor::Zero | PotentialDescriptor::UniformB { .. } => {}
        }
        Ok(())
    }

    /// Region the lattice covers during the run (the window extends it
    /// along +x by at most the light-cone distance).
    pub fn swept_bounds(&self) -> [[f64; 2]; 3] {
        let mut b = self.grid.bounds();
        if self.window.is_some() {
            b[0][1] += C * self.grid.duration(self.n_steps);
        }
        b
    }

    /// Time step against the vector-coupling stability bound, with `|q A|`
    /// sampled over the swept region.
    fn check_stability(&self) -> Result<()> {
        let pot = FourPotential::from_descriptor(&self.potential)
            .map_err(|e| invalid("potential", e.to_string()))?;
        if !pot.has_vector_part() {
            return Ok(());
        }
        let b = self.swept_bounds();
        let n = 64;
        let mut max_a: f64 = 0.0;
        for i in 0..=n {
            for k in 0..=n {
                let x = b[0][0] + (b[0][1] - b[0][0]) * i as f64 / n as f64;
                let z = b[2][0] + (b[2][1] - b[2][0]) * k as f64 / n as f64;
                for y in [b[1][0], b[1][1]] {
                    let a = pot.a_vec([x, y, z], 0.0);
                    max_a = max_a.max((a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt());
                }
            }
        }
        let coupling = self.stepper.charge.abs() * max_a / HBAR;
        let limit = stability_limit(self.grid.delta, coupling);
        if self.grid.delta_t > limit {
            return Err(invalid(
                "cfl",
                format!(
                    "delta_t = {} exceeds the stability bound {limit} for max |qA| / hbar = {coupling} per nm",
                    self.grid.delta_t
                ),
            ));
        }
        Ok(())
    }

    /// Energy of the central plane wave (MeV).
    pub fn packet_energy(&self) -> f64 {
        self.packet.energy(self.stepper.mass)
    }
}

// ---------------------------------------------------------------------------
// presets

struct Preset {
    name: &'static str,
    summary: &'static str,
    text: &'static str,
}

macro_rules! preset {
    ($name:literal, $summary:literal) => {
        Preset {
            name: $name,
            summary: $summary,
            text: include_str!(concat!("../presets/", $name, ".toml")),
        }
    };
}

const PRESETS: &[Preset] = &[
    preset!("free_particle", "free packet, p = 0.53 MeV/c"),
    preset!("fig2_uniform_b", "uniform B = 1e8 T, symmetric gauge, one orbit"),
    preset!("fig2_uniform_b_landau_x", "uniform B = 1e8 T, gauge A = B (z, 0, 0)"),
    preset!("fig2_uniform_b_landau_z", "uniform B = 1e8 T, gauge A = B (0, 0, -x)"),
    preset!("fig6_dipoles_parallel", "two dipole lines, dipoles along the path"),
    preset!("fig6_dipoles_perpendicular", "two dipole lines, dipoles across the path"),
    preset!("fig8_two_solenoids", "solenoid pair 2a = 0.1 nm, p = 0.53 MeV/c"),
    preset!("fig8_two_solenoids_p064", "solenoid pair 2a = 0.1 nm, p = 0.64 MeV/c"),
    preset!("fig9_electron_positron", "solenoid pair 2a = 0.072 nm, electron (set charge_e = 1 for the positron)"),
    preset!("fig10_oracle_overlay", "solenoid pair 2a = 0.1 nm with dense records for the classical overlay"),
];

/// Names of all built-in scenarios.
pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.name).collect()
}

/// One-line description of a preset.
pub fn preset_summary(name: &str) -> Result<&'static str> {
    find(name).map(|p| p.summary)
}

/// Source document of a preset.
pub fn preset_text(name: &str) -> Result<&'static str> {
    find(name).map(|p| p.text)
}

/// Parsed and validated preset.
pub fn preset(name: &str) -> Result<Scenario> {
    parse_scenario(preset_text(name)?)
}

fn find(name: &str) -> Result<&'static Preset> {
    PRESETS
        .iter()
        .find(|p| p.name == name)
        .ok_or_else(|| Error::UnknownPreset(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MINIMAL: &str = r#"
[run]
name = "tiny"
steps = 10

[grid]
cells = [40, 40, 40]
delta_nm = 1e-3

[packet]
momentum_mev_c = [0.1, 0.0, 0.0]
center_nm = [0.0, 0.0, 0.0]
width_nm = 2e-3
"#;

    #[test]
    fn minimal_document() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.potential, PotentialDescriptor::Zero);
        assert_eq!(s.grid.counts(), [40, 40, 40]);
        assert_eq!(s.stepper, StepperConfig::electron());
        assert_eq!(s.output_dir, PathBuf::from("out/tiny"));
        assert_eq!(s.width_source, WidthSource::Explicit);
        assert!(s.window.is_none());
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let text = MINIMAL.replace("delta_nm = 1e-3", "delta_nm = 1e-3\nspacing = 2");
        match parse_scenario(&text) {
            Err(Error::Syntax { line, message }) => {
                assert_eq!(line, 9, "{message}");
                assert!(message.contains("spacing"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_section_rejected() {
        let text = format!("{MINIMAL}\n[extras]\nfoo = 1\n");
        assert!(matches!(parse_scenario(&text), Err(Error::Syntax { .. })));
    }

    #[test]
    fn malformed_line_is_a_syntax_error() {
        let text = MINIMAL.replace("steps = 10", "steps = = 10");
        match parse_scenario(&text) {
            Err(Error::Syntax { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn default_width_from_momentum_spread() {
        let text = MINIMAL
            .replace("width_nm = 2e-3\n", "")
            .replace("[0.1, 0.0, 0.0]", "[0.5, 0.0, 0.0]");
        let s = parse_scenario(&text).unwrap();
        assert_eq!(s.width_source, WidthSource::Default);
        assert!((s.packet.momentum_spread() / 0.5 - DEFAULT_SPREAD_FRACTION).abs() < 1e-12);
    }

    #[test]
    fn margin_rule_named() {
        let text = MINIMAL.replace("center_nm = [0.0, 0.0, 0.0]", "center_nm = [0.005, 0.0, 0.0]");
        match parse_scenario(&text) {
            Err(Error::Validation { rule, .. }) => assert_eq!(rule, "packet_margin"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn packet_over_solenoid_violates_keep_out() {
        let text = MINIMAL.replace("[40, 40, 40]", "[60, 60, 60]").replace(
            "width_nm = 2e-3\n",
            "width_nm = 2e-3\n\n[potential]\nkind = \"solenoid_pair\"\nflux_wb = 5.2e-14\nhalf_separation_nm = 0.01\n",
        );
        match parse_scenario(&text) {
            Err(Error::Validation { rule, .. }) => assert_eq!(rule, "solenoid_keep_out"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn key_of_other_potential_kind_rejected() {
        let text = format!("{MINIMAL}\n[potential]\nkind = \"uniform_b\"\nfield_t = 1.0\nflux_wb = 1e-14\n");
        match parse_scenario(&text) {
            Err(Error::Syntax { line, message }) => {
                assert!(message.contains("flux_wb"), "{message}");
                assert_eq!(line, 18);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn overrides() {
        let s = parse_with_overrides(
            MINIMAL,
            &[
                "packet.spin=down".into(),
                "run.steps = 3".into(),
                "stepper.charge_e=1".into(),
                "grid.cfl_safety=1.0".into(),
            ],
        )
        .unwrap();
        assert_eq!(s.packet.spin, Spin::Down);
        assert_eq!(s.n_steps, 3);
        assert_eq!(s.stepper.charge, 1.0);
        assert!((s.grid.delta_t - cfl_limit_with(1e-3, 1.0)).abs() < 1e-18);
        assert!(parse_with_overrides(MINIMAL, &["nosuch.key=1".into()]).is_err());
        assert!(parse_with_overrides(MINIMAL, &["grid.bogus=1".into()]).is_err());
        assert!(parse_with_overrides(MINIMAL, &["steps=1".into()]).is_err());
    }

    #[test]
    fn time_step_beyond_cfl_rejected() {
        let text = MINIMAL.replace("delta_nm = 1e-3", "delta_nm = 1e-3\ntime_step_nm_c = 1e-3");
        match parse_scenario(&text) {
            Err(Error::Validation { rule, .. }) => assert_eq!(rule, "cfl"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn vector_coupling_tightens_the_bound() {
        // a huge field makes |qA|/hbar comparable to the lattice term
        let text = MINIMAL.replace("delta_nm = 1e-3", "delta_nm = 1e-3\ncfl_safety = 1.9")
            + "\n[potential]\nkind = \"uniform_b\"\nfield_t = 1e11\n";
        match parse_scenario(&text) {
            Err(Error::Validation { rule, .. }) => assert_eq!(rule, "cfl"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn flat_axis_rules() {
        let text = MINIMAL.replace("[40, 40, 40]", "[40, 3, 40]");
        parse_scenario(&text).unwrap();
        let off = text.replace("center_nm = [0.0, 0.0, 0.0]", "center_nm = [0.0, 5e-4, 0.0]");
        match parse_scenario(&off) {
            Err(Error::Validation { rule, .. }) => assert_eq!(rule, "flat_axis"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn plane_spec_round_trip() {
        let p: PlaneSpec = "y:17".parse().unwrap();
        assert_eq!(p, PlaneSpec { axis: Axis::Y, index: 17 });
        assert_eq!(p.to_string(), "y:17");
        assert!("q:1".parse::<PlaneSpec>().is_err());
        assert!("y1".parse::<PlaneSpec>().is_err());
    }

    #[test]
    fn every_preset_validates() {
        for name in preset_names() {
            let s = preset(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(s.name, name);
        }
        assert!(matches!(preset("nope"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn two_solenoid_preset_parameters() {
        let s = preset("fig8_two_solenoids").unwrap();
        let PotentialDescriptor::SolenoidPair(p) = s.potential else {
            panic!("{:?}", s.potential)
        };
        assert_eq!(p.flux.abs(), 5.2e-14);
        assert_eq!(2.0 * p.half_separation, 0.1);
        assert_eq!(s.packet.momentum, [0.53, 0.0, 0.0]);
        let s = preset("fig9_electron_positron").unwrap();
        let PotentialDescriptor::SolenoidPair(p) = s.potential else {
            panic!()
        };
        assert_eq!(p.flux.abs(), 4.2e-14);
        assert!((2.0 * p.half_separation - 0.072).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn numeric_overrides_are_applied(steps in 1usize..100_000, stride in 1usize..50, q in prop_oneof![Just(-1.0), Just(1.0)]) {
            let s = parse_with_overrides(
                MINIMAL,
                &[format!("run.steps={steps}"), format!("run.record_stride={stride}"), format!("stepper.charge_e={q:?}")],
            )
            .unwrap();
            prop_assert_eq!(s.n_steps, steps);
            prop_assert_eq!(s.record_stride, stride);
            prop_assert_eq!(s.stepper.charge, q);
        }

        #[test]
        fn plane_specs_survive_display(axis in 0usize..3, index in 0usize..100_000) {
            let text = format!("{}:{index}", ["x", "y", "z"][axis]);
            let plane: PlaneSpec = text.parse().unwrap();
            prop_assert_eq!(plane.to_string(), text);
        }

        #[test]
        fn arbitrary_text_never_panics(text in "\\PC{0,200}") {
            let _ = parse_scenario(&text);
        }
    }
}
