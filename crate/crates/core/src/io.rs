//! Output files: plane snapshots, observable series and the run manifest.
//!
//! # Snapshot layout
//!
//! All integers and floats are little-endian.
//!
//! | offset | size | content |
//! |---|---|---|
//! | 0 | 8 | ASCII `DFDTSNAP` |
//! | 8 | 2 | `u16` format version (1) |
//! | 10 | 6 | zero padding |
//! | 16 | 4 | `u32` rows |
//! | 20 | 4 | `u32` cols |
//! | 24 | 8 rows cols | `f64` payload, row-major |
//! | end - 32 | 8 | `f64` time (nm/c) |
//! | end - 24 | 4 | `u32` plane normal axis (0 x, 1 y, 2 z) |
//! | end - 20 | 4 | `u32` plane index |
//! | end - 16 | 8 | `u64` scenario name hash |
//! | end - 8 | 8 | `u64` step number |
//!
//! The name hash is the first 8 bytes of the SHA-256 digest of the UTF-8
//! scenario name, read as a little-endian `u64`.
//!
//! # Series layout
//!
//! CSV with the header `t,norm,x,y,z,vx,vy,vz,energy,pmx,pmy,pmz,pcx,pcy,pcz`,
//! one record per line, every value written as `{:.16e}` (17 significant
//! digits, exact round trip), LF line endings.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::Axis;
use crate::observables::{ObservableRecord, ObservableSeries, RunFailure};
use crate::scenario::{Scenario, WidthSource};
use crate::spinor::Slice2D;

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"DFDTSNAP";
pub const SNAPSHOT_VERSION: u16 = 1;
pub const SNAPSHOT_HEADER_LEN: usize = 16;
pub const SNAPSHOT_DIMS_LEN: usize = 8;
pub const SNAPSHOT_META_LEN: usize = 32;

pub const SERIES_HEADER: &str = "t,norm,x,y,z,vx,vy,vz,energy,pmx,pmy,pmz,pcx,pcy,pcz";

/// Trailer of a snapshot file.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub time: f64,
    pub axis: Axis,
    pub index: u32,
    pub name_hash: u64,
    pub step: u64,
}

/// Scenario name hash stored in snapshots.
pub fn name_hash(name: &str) -> u64 {
    let digest = Sha256::digest(name.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Exact byte length of a snapshot with the given dimensions.
pub fn snapshot_len(rows: usize, cols: usize) -> usize {
    SNAPSHOT_HEADER_LEN + SNAPSHOT_DIMS_LEN + 8 * rows * cols + SNAPSHOT_META_LEN
}

pub fn encode_snapshot(slice: &Slice2D, meta: &SnapshotMeta) -> Result<Vec<u8>> {
    let dims = (u32::try_from(slice.rows), u32::try_from(slice.cols));
    let (Ok(rows), Ok(cols)) = dims else {
        return Err(Error::InvalidParameter("snapshot dimensions exceed u32".into()));
    };
    if slice.data.len() != slice.rows * slice.cols {
        return Err(Error::InvalidParameter(format!(
            "slice has {} values for {} x {}",
            slice.data.len(),
            slice.rows,
            slice.cols
        )));
    }
    let mut out = Vec::with_capacity(snapshot_len(slice.rows, slice.cols));
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    out.extend_from_slice(&[0u8; 6]);
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    for v in &slice.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&meta.time.to_le_bytes());
    out.extend_from_slice(&(meta.axis.index() as u32).to_le_bytes());
    out.extend_from_slice(&meta.index.to_le_bytes());
    out.extend_from_slice(&meta.name_hash.to_le_bytes());
    out.extend_from_slice(&meta.step.to_le_bytes());
    Ok(out)
}

pub fn decode_snapshot(bytes: &[u8], path: &Path) -> Result<(Slice2D, SnapshotMeta)> {
    let bad = |m: &str| Error::format(path, m);
    if bytes.len() < SNAPSHOT_HEADER_LEN + SNAPSHOT_DIMS_LEN + SNAPSHOT_META_LEN {
        return Err(bad("file too short"));
    }
    if &bytes[..8] != SNAPSHOT_MAGIC {
        return Err(bad("bad magic"));
    }
    let version = u16::from_le_bytes([bytes[8], bytes[9]]);
    if version != SNAPSHOT_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    if bytes[10..16].iter().any(|&b| b != 0) {
        return Err(bad("non-zero header padding"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let rows = u32_at(16) as usize;
    let cols = u32_at(20) as usize;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .map(|n| n + SNAPSHOT_HEADER_LEN + SNAPSHOT_DIMS_LEN + SNAPSHOT_META_LEN);
    if expected != Some(bytes.len()) {
        return Err(bad(&format!(
            "length {} does not match {rows} x {cols} payload",
            bytes.len()
        )));
    }
    let start = SNAPSHOT_HEADER_LEN + SNAPSHOT_DIMS_LEN;
    let data = (0..rows * cols).map(|i| f64_at(start + 8 * i)).collect();
    let m = start + 8 * rows * cols;
    let axis = Axis::from_index(u32_at(m + 8) as usize).ok_or_else(|| bad("bad plane axis"))?;
    let meta = SnapshotMeta {
        time: f64_at(m),
        axis,
        index: u32_at(m + 12),
        name_hash: u64_at(m + 16),
        step: u64_at(m + 24),
    };
    Ok((Slice2D { rows, cols, data }, meta))
}

pub fn write_snapshot(path: &Path, slice: &Slice2D, meta: &SnapshotMeta) -> Result<()> {
    let bytes = encode_snapshot(slice, meta)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<(Slice2D, SnapshotMeta)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_snapshot(&bytes, path)
}

fn record_values(r: &ObservableRecord) -> [f64; 15] {
    [
        r.t,
        r.norm,
        r.center[0],
        r.center[1],
        r.center[2],
        r.velocity[0],
        r.velocity[1],
        r.velocity[2],
        r.energy,
        r.p_mech[0],
        r.p_mech[1],
        r.p_mech[2],
        r.p_canon[0],
        r.p_canon[1],
        r.p_canon[2],
    ]
}

pub fn series_to_csv(series: &ObservableSeries) -> String {
    use std::fmt::Write;
    let mut out = String::with_capacity(64 + series.len() * 15 * 24);
    out.push_str(SERIES_HEADER);
    out.push('\n');
    for r in &series.records {
        for (i, v) in record_values(r).iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write!(out, "{v:.16e}").expect("write to string");
        }
        out.push('\n');
    }
    out
}

pub fn parse_series_csv(text: &str, path: &Path) -> Result<ObservableSeries> {
    let mut lines = text.split('\n');
    if lines.next() != Some(SERIES_HEADER) {
        return Err(Error::format(path, "missing or wrong header"));
    }
    let mut records = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let values = line
            .split(',')
            .map(str::parse::<f64>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::format(path, format!("line {}: {e}", n + 2)))?;
        let v: [f64; 15] = values
            .try_into()
            .map_err(|v: Vec<f64>| Error::format(path, format!("line {}: {} fields", n + 2, v.len())))?;
        records.push(ObservableRecord {
            t: v[0],
            norm: v[1],
            center: [v[2], v[3], v[4]],
            velocity: [v[5], v[6], v[7]],
            energy: v[8],
            p_mech: [v[9], v[10], v[11]],
            p_canon: [v[12], v[13], v[14]],
        });
    }
    Ok(ObservableSeries {
        records,
        failure: None,
    })
}

pub fn write_series(path: &Path, series: &ObservableSeries) -> Result<()> {
    fs::write(path, series_to_csv(series)).map_err(|e| Error::io(path, e))
}

pub fn read_series(path: &Path) -> Result<ObservableSeries> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_series_csv(&text, path)
}

/// Summary written next to the outputs of every run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub scenario: Scenario,
    pub version: String,
    pub wall_time_s: f64,
    pub steps_completed: usize,
    pub width_nm: f64,
    pub width_source: WidthSource,
    /// Relative drifts, `max |f - f0| / |f0|` over the recorded series.
    pub norm_drift: f64,
    pub energy_drift: f64,
    pub canonical_momentum_drift: [f64; 3],
    /// Norm carried off the lattice by the moving window.
    pub norm_lost: f64,
    pub window_shift_cells: usize,
    /// Largest `|psi|` within two cells of the outer faces relative to the
    /// peak, at the end of the run.
    pub boundary_to_peak: f64,
    /// `boundary_to_peak < 1e-6`.
    pub boundary_clear: bool,
    /// Cells where a singular potential was replaced by zero.
    pub flagged_cells: usize,
    pub oracle: Option<OracleSummary>,
    pub failure: Option<RunFailure>,
    /// Written files, relative to the output directory.
    pub files: Vec<PathBuf>,
}

/// Classical comparison attached to runs with an on-axis model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    /// Final integration step (nm/c).
    pub time_step: f64,
    /// Largest magnitude of the dropped `q (dv/dt) . A` term (MeV/nm).
    pub max_neglected_term: f64,
    /// Why no overlay was written, if it was not.
    pub error: Option<String>,
}

pub const BOUNDARY_CLEAR: f64 = 1e-6;

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::format(path, e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn meta() -> SnapshotMeta {
        SnapshotMeta {
            time: 0.125,
            axis: Axis::Y,
            index: 1,
            name_hash: name_hash("demo"),
            step: 42,
        }
    }

    #[test]
    fn zero_slice_has_exact_length() {
        let bytes = encode_snapshot(&Slice2D::zeros(2, 2), &meta()).unwrap();
        assert_eq!(bytes.len(), 16 + 8 + 32 + SNAPSHOT_META_LEN);
        assert_eq!(&bytes[..8], b"DFDTSNAP");
        assert_eq!(&bytes[8..10], &[1, 0]);
        assert_eq!(&bytes[16..24], &[2, 0, 0, 0, 2, 0, 0, 0]);
    }

    #[test]
    fn snapshot_round_trip() {
        let slice = Slice2D {
            rows: 3,
            cols: 2,
            data: vec![0.0, 1.5, -2.25, f64::MIN_POSITIVE, 1e300, 3.0],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.bin");
        write_snapshot(&path, &slice, &meta()).unwrap();
        let (back, m) = read_snapshot(&path).unwrap();
        assert_eq!(back, slice);
        assert_eq!(m, meta());
        let bytes = fs::read(&path).unwrap();
        assert_eq!(encode_snapshot(&back, &m).unwrap(), bytes);
    }

    #[test]
    fn corrupt_snapshots_rejected() {
        let mut bytes = encode_snapshot(&Slice2D::zeros(2, 3), &meta()).unwrap();
        let p = Path::new("x");
        assert!(decode_snapshot(&bytes[..bytes.len() - 1], p).is_err());
        bytes[0] = b'X';
        assert!(decode_snapshot(&bytes, p).is_err());
    }

    #[test]
    fn name_hash_is_sha256_prefix() {
        // SHA-256("abc") begins ba 78 16 bf 8f 01 cf ea
        assert_eq!(
            name_hash("abc"),
            u64::from_le_bytes([0xba, 0x78, 0x16, 0xbf, 0x8f, 0x01, 0xcf, 0xea])
        );
    }

    #[test]
    fn empty_series_is_header_only() {
        assert_eq!(
            series_to_csv(&ObservableSeries::default()),
            format!("{SERIES_HEADER}\n")
        );
    }

    #[test]
    fn series_round_trip() {
        let r = ObservableRecord {
            t: 1.0 / 3.0,
            norm: 0.999_999_999_9,
            center: [-0.4, 1e-300, 2.5e-17],
            velocity: [0.72, -0.0, 1.0 / 7.0],
            energy: 0.736_189_021_3,
            p_mech: [0.53, 1e-20, -3.0],
            p_canon: [0.6, f64::EPSILON, 0.1],
        };
        let series = ObservableSeries {
            records: vec![r],
            failure: None,
        };
        let text = series_to_csv(&series);
        assert!(!text.contains('\r'));
        let back = parse_series_csv(&text, Path::new("x")).unwrap();
        assert_eq!(back.records, series.records);
        assert_eq!(series_to_csv(&back), text);
    }

    #[test]
    fn malformed_series_rejected() {
        let p = Path::new("x");
        assert!(parse_series_csv("t,x\n", p).is_err());
        assert!(parse_series_csv(&format!("{SERIES_HEADER}\n1,2\n"), p).is_err());
        assert!(parse_series_csv(&format!("{SERIES_HEADER}\n{}\n", ["a"; 15].join(",")), p).is_err());
    }

    fn finite() -> impl Strategy<Value = f64> {
        proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO
    }

    proptest! {
        #[test]
        fn any_snapshot_round_trips(rows in 1usize..6, cols in 1usize..6, seed in proptest::collection::vec(finite(), 36),
                                    time in finite(), step in 0u64..u64::MAX, index in 0u32..1000) {
            let slice = Slice2D { rows, cols, data: seed[..rows * cols].to_vec() };
            let m = SnapshotMeta { time, axis: Axis::Z, index, name_hash: name_hash("p"), step };
            let bytes = encode_snapshot(&slice, &m).unwrap();
            prop_assert_eq!(bytes.len(), snapshot_len(rows, cols));
            let (back, bm) = decode_snapshot(&bytes, Path::new("x")).unwrap();
            prop_assert_eq!(encode_snapshot(&back, &bm).unwrap(), bytes);
            prop_assert_eq!(back, slice);
        }

        #[test]
        fn any_series_round_trips(values in proptest::collection::vec(finite(), 15 * 3)) {
            let records = values
                .chunks(15)
                .map(|v| ObservableRecord {
                    t: v[0],
                    norm: v[1],
                    center: [v[2], v[3], v[4]],
                    velocity: [v[5], v[6], v[7]],
                    energy: v[8],
                    p_mech: [v[9], v[10], v[11]],
                    p_canon: [v[12], v[13], v[14]],
                })
                .collect();
            let series = ObservableSeries { records, failure: None };
            let text = series_to_csv(&series);
            let back = parse_series_csv(&text, Path::new("x")).unwrap();
            prop_assert_eq!(series_to_csv(&back), text);
        }
    }
}
