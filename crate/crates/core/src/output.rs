//! Result serialisation: CSV probe time series and legacy-VTK field snapshots.
//!
//! Numbers are written with the shortest representation that round-trips, so
//! identical runs produce byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::macroscale::Trajectory;
use crate::mesh::{CurveMesh, Point, TriMesh};

/// Names of the per-probe series, in column order of the time series.
pub const SERIES: [&str; 7] = ["c_e", "coupling", "r_f", "r_b", "p_d", "p_a", "c_i"];

/// Cells of a snapshot.
#[derive(Debug, Clone, PartialEq)]
pub enum Cells {
    Triangles(Vec<[usize; 3]>),
    Segments(Vec<[usize; 2]>),
}

/// Nodal fields on a triangulation or a curve.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSnapshot {
    pub title: String,
    pub points: Vec<Point>,
    pub cells: Cells,
    pub fields: Vec<(String, Vec<f64>)>,
}

impl FieldSnapshot {
    pub fn on_mesh(title: impl Into<String>, mesh: &TriMesh, fields: Vec<(String, Vec<f64>)>) -> Self {
        FieldSnapshot {
            title: title.into(),
            points: mesh.nodes.clone(),
            cells: Cells::Triangles(mesh.triangles.clone()),
            fields,
        }
    }

    pub fn on_curve(title: impl Into<String>, curve: &CurveMesh, fields: Vec<(String, Vec<f64>)>) -> Self {
        FieldSnapshot {
            title: title.into(),
            points: curve.nodes.clone(),
            cells: Cells::Segments(curve.segments.clone()),
            fields,
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// CSV text with header `time,probe_id,species,value`.
pub fn timeseries_csv(traj: &Trajectory) -> String {
    let mut out = String::from("time,probe_id,species,value\n");
    for s in &traj.samples {
        for (p, v) in traj.probes.iter().zip(&s.probes) {
            let values = [v.c_e, v.coupling, v.means[0], v.means[1], v.means[2], v.means[3], v.means[4]];
            for (name, value) in SERIES.iter().zip(values) {
                let _ = writeln!(out, "{},{},{},{}", s.time, p.id, name, value);
            }
        }
    }
    out
}

pub fn write_timeseries(traj: &Trajectory, path: &Path) -> Result<()> {
    write_file(path, &timeseries_csv(traj))
}

/// Legacy-VTK ASCII polydata text.
pub fn snapshot_vtk(snap: &FieldSnapshot) -> Result<String> {
    let n = snap.points.len();
    for (name, values) in &snap.fields {
        if values.len() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                actual: values.len(),
            });
        }
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::Input(format!("field name `{name}` must be a single word")));
        }
    }
    let title = snap.title.replace('\n', " ");
    let mut out = format!("# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET POLYDATA\nPOINTS {n} double\n");
    for p in &snap.points {
        let _ = writeln!(out, "{} {} 0", p[0], p[1]);
    }
    match &snap.cells {
        Cells::Triangles(t) => {
            let _ = writeln!(out, "POLYGONS {} {}", t.len(), 4 * t.len());
            for c in t {
                let _ = writeln!(out, "3 {} {} {}", c[0], c[1], c[2]);
            }
        }
        Cells::Segments(s) => {
            let _ = writeln!(out, "LINES {} {}", s.len(), 3 * s.len());
            for c in s {
                let _ = writeln!(out, "2 {} {}", c[0], c[1]);
            }
        }
    }
    if !snap.fields.is_empty() {
        let _ = writeln!(out, "POINT_DATA {n}");
        for (name, values) in &snap.fields {
            let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for v in values {
                let _ = writeln!(out, "{v}");
            }
        }
    }
    Ok(out)
}

pub fn write_snapshot(snap: &FieldSnapshot, path: &Path) -> Result<()> {
    write_file(path, &snapshot_vtk(snap)?)
}
