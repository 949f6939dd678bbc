//! Triangulations of the macroscopic domain and of the unit cell, plus the
//! polygonal membrane curve induced by the cell interior mesh.
//!
//! Three kinds of planar mesh are produced by [`generate_mesh`]:
//!
//! * structured squares (the macroscopic domain),
//! * structured discs pushed through a smooth map (the cell interior),
//! * perforated squares built by radial blending between a star-shaped hole
//!   and the outer square (the extracellular part of the unit cell).
//!
//! All meshes are linear (P1) and counter-clockwise oriented.

mod curve;
mod generate;
mod io;
mod periodic;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use curve::{extract_boundary_curve, CurveMesh};
pub use generate::{generate_mesh, DiscMap, GeometrySpec, HoleShape, PerforatedSquare};
pub use io::{read_mesh, read_mesh_str, write_mesh, write_mesh_string};
pub use periodic::{default_tolerance, match_periodic_nodes};

pub type Point = [f64; 2];

/// Label attached to a boundary edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Marker {
    Outer,
    Hole,
}

impl fmt::Display for Marker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Marker::Outer => "outer",
            Marker::Hole => "hole",
        })
    }
}

impl FromStr for Marker {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "outer" => Ok(Marker::Outer),
            "hole" => Ok(Marker::Hole),
            other => Err(format!("unknown boundary marker `{other}`")),
        }
    }
}

/// Which domain a triangulation discretises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainTag {
    Macro,
    CellInterior,
    CellExterior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub marker: Marker,
}

/// Conforming P1 triangulation of a planar domain.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub nodes: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    /// Equivalence classes of nodes identified by periodicity (may be empty).
    pub periodic_classes: Vec<Vec<usize>>,
    pub domain_tag: DomainTag,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshStats {
    pub h_max: f64,
    /// Smallest interior angle, in degrees.
    pub min_angle: f64,
    pub total_area: f64,
    pub node_count: usize,
    pub triangle_count: usize,
}

/// Twice the signed area of the triangle `(a, b, c)`.
#[inline]
pub fn signed_area2(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
}

#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl TriMesh {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        0.5 * signed_area2(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Nodes that lie on at least one boundary edge, sorted.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        let mut on = vec![false; self.nodes.len()];
        for e in &self.boundary_edges {
            on[e.nodes[0]] = true;
            on[e.nodes[1]] = true;
        }
        (0..self.nodes.len()).filter(|&i| on[i]).collect()
    }

    /// Check every structural invariant: index ranges, positive orientation,
    /// conformity (interior edges shared twice, boundary edges once and listed),
    /// and disjoint in-range periodic classes.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        for (i, p) in self.nodes.iter().enumerate() {
            if !p[0].is_finite() || !p[1].is_finite() {
                return Err(Error::InvalidMesh(format!("node {i} has non-finite coordinates")));
            }
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&v| v >= n) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} references node {bad} but there are {n} nodes"
                )));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidMesh(format!("triangle {t} repeats a vertex")));
            }
            if self.triangle_area(t) <= 0.0 {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} has non-positive signed area (clockwise or degenerate)"
                )));
            }
        }

        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *edge_count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        if let Some((&(a, b), &c)) = edge_count.iter().find(|(_, &c)| c > 2) {
            return Err(Error::InvalidMesh(format!(
                "edge ({a}, {b}) is shared by {c} triangles"
            )));
        }
        let mut listed: HashMap<(usize, usize), usize> = HashMap::new();
        for (k, e) in self.boundary_edges.iter().enumerate() {
            let [a, b] = e.nodes;
            if a >= n || b >= n {
                return Err(Error::InvalidMesh(format!(
                    "boundary edge {k} references a node out of range"
                )));
            }
            let key = (a.min(b), a.max(b));
            if edge_count.get(&key) != Some(&1) {
                return Err(Error::InvalidMesh(format!(
                    "boundary edge {k} ({a}, {b}) is not a boundary edge of the triangulation"
                )));
            }
            if listed.insert(key, k).is_some() {
                return Err(Error::InvalidMesh(format!("boundary edge ({a}, {b}) listed twice")));
            }
        }
        let unlisted = edge_count
            .iter()
            .filter(|(key, &c)| c == 1 && !listed.contains_key(key))
            .count();
        if unlisted > 0 {
            return Err(Error::InvalidMesh(format!(
                "{unlisted} boundary edges of the triangulation carry no marker"
            )));
        }

        let mut seen = vec![false; n];
        for (c, class) in self.periodic_classes.iter().enumerate() {
            for &v in class {
                if v >= n {
                    return Err(Error::InvalidMesh(format!(
                        "periodic class {c} references node {v} out of range"
                    )));
                }
                if std::mem::replace(&mut seen[v], true) {
                    return Err(Error::InvalidMesh(format!(
                        "node {v} appears in more than one periodic class"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Element-size and quality summary of a triangulation.
pub fn mesh_stats(mesh: &TriMesh) -> MeshStats {
    let mut h_max: f64 = 0.0;
    let mut min_angle = f64::INFINITY;
    for t in 0..mesh.triangles.len() {
        let p = mesh.triangle_points(t);
        let e = [dist(p[1], p[2]), dist(p[2], p[0]), dist(p[0], p[1])];
        h_max = h_max.max(e[0]).max(e[1]).max(e[2]);
        for k in 0..3 {
            let (a, b, c) = (e[k], e[(k + 1) % 3], e[(k + 2) % 3]);
            // law of cosines for the angle opposite edge a
            let cos = ((b * b + c * c - a * a) / (2.0 * b * c)).clamp(-1.0, 1.0);
            min_angle = min_angle.min(cos.acos().to_degrees());
        }
    }
    MeshStats {
        h_max,
        min_angle,
        total_area: mesh.total_area(),
        node_count: mesh.nodes.len(),
        triangle_count: mesh.triangles.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn two_triangle_square() -> TriMesh {
        generate_mesh(
            &GeometrySpec::Square {
                lower: [0.0, 0.0],
                upper: [1.0, 1.0],
                divisions: 1,
            },
            0,
        )
        .unwrap()
    }

    #[test]
    fn stats_of_unit_square() {
        let s = mesh_stats(&two_triangle_square());
        assert!((s.h_max - 2f64.sqrt()).abs() < 1e-15);
        assert!((s.total_area - 1.0).abs() < 1e-15);
        assert!((s.min_angle - 45.0).abs() < 1e-9);
        assert_eq!((s.node_count, s.triangle_count), (4, 2));
    }

    #[test]
    fn stats_of_halved_grid() {
        let m = generate_mesh(
            &GeometrySpec::Square {
                lower: [0.0, 0.0],
                upper: [1.0, 1.0],
                divisions: 2,
            },
            0,
        )
        .unwrap();
        assert!((mesh_stats(&m).h_max - 2f64.sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn disc_area_increases_towards_pi() {
        let mut prev = 0.0;
        for level in 0..5 {
            let m = generate_mesh(
                &GeometrySpec::MappedDisc {
                    map: DiscMap::Identity,
                    rings: 1,
                    segments: 8,
                },
                level,
            )
            .unwrap();
            let a = mesh_stats(&m).total_area;
            assert!(a > prev && a < std::f64::consts::PI);
            prev = a;
        }
        assert!(std::f64::consts::PI - prev < 2e-3);
    }

    #[test]
    fn validate_rejects_clockwise_triangle() {
        let mut m = two_triangle_square();
        m.triangles[1].swap(0, 1);
        let err = m.validate().unwrap_err().to_string();
        assert!(err.contains("triangle 1"), "{err}");
    }

    #[test]
    fn validate_rejects_out_of_range_index() {
        let mut m = two_triangle_square();
        m.triangles[0][2] = 4;
        assert!(matches!(m.validate(), Err(Error::InvalidMesh(_))));
    }

    #[test]
    fn validate_rejects_missing_boundary_marker() {
        let mut m = two_triangle_square();
        m.boundary_edges.pop();
        assert!(m.validate().is_err());
    }
}
