use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{dist, signed_area2, BoundaryEdge, DomainTag, Marker, Point, TriMesh};
use crate::error::{Error, Result};

/// Smooth map applied to a structured mesh of the unit disc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DiscMap {
    Identity,
    /// Axis-aligned ellipse with semi-axes `a` (along x) and `b` (along y).
    Ellipse { a: f64, b: f64 },
    /// `(u1, u2) -> (u1 - 0.2 + u2^2, u2)`, whose image of the unit disc is
    /// `{(x1 + 0.2 - x2^2)^2 + x2^2 < 1}`.
    Dziuk,
}

impl DiscMap {
    /// Ellipse `c1 x^2 + c2 y^2 < 1`.
    pub fn ellipse_from_coeffs(c: [f64; 2]) -> Self {
        DiscMap::Ellipse {
            a: 1.0 / c[0].sqrt(),
            b: 1.0 / c[1].sqrt(),
        }
    }

    pub fn apply(&self, u: Point) -> Point {
        match *self {
            DiscMap::Identity => u,
            DiscMap::Ellipse { a, b } => [a * u[0], b * u[1]],
            DiscMap::Dziuk => [u[0] - 0.2 + u[1] * u[1], u[1]],
        }
    }

    pub fn jacobian_det(&self, _u: Point) -> f64 {
        match *self {
            DiscMap::Identity | DiscMap::Dziuk => 1.0,
            DiscMap::Ellipse { a, b } => a * b,
        }
    }
}

/// Star-shaped hole cut out of a perforated square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum HoleShape {
    Circle { radius: f64 },
    /// `c[0] x^2 + c[1] y^2 < 1`.
    Ellipse { coeffs: [f64; 2] },
    /// `(x1 + 0.2 - x2^2)^2 + x2^2 < 1`.
    Dziuk,
    /// Closed polygon, vertices in order (either orientation).
    Polygon { vertices: Vec<Point> },
}

impl HoleShape {
    /// Point about which the hole is star-shaped, used when none is given.
    pub fn default_centre(&self) -> Point {
        match self {
            HoleShape::Circle { .. } | HoleShape::Ellipse { .. } => [0.0, 0.0],
            HoleShape::Dziuk => [-0.2, 0.0],
            HoleShape::Polygon { vertices } => {
                let n = vertices.len().max(1) as f64;
                let sx: f64 = vertices.iter().map(|v| v[0]).sum();
                let sy: f64 = vertices.iter().map(|v| v[1]).sum();
                [sx / n, sy / n]
            }
        }
    }

    /// Negative inside, positive outside (smooth shapes only).
    fn level_set(&self, p: Point) -> f64 {
        let [x, y] = p;
        match self {
            HoleShape::Circle { radius } => x * x + y * y - radius * radius,
            HoleShape::Ellipse { coeffs } => coeffs[0] * x * x + coeffs[1] * y * y - 1.0,
            HoleShape::Dziuk => {
                let s = x + 0.2 - y * y;
                s * s + y * y - 1.0
            }
            HoleShape::Polygon { .. } => unreachable!("polygons are intersected exactly"),
        }
    }

    /// Parameter `t` in (0, 1) at which the segment `centre + t (target - centre)`
    /// leaves the hole. Errors if the segment crosses the boundary other than once.
    fn ray_exit(&self, centre: Point, target: Point) -> Result<f64> {
        let d = [target[0] - centre[0], target[1] - centre[1]];
        let at = |t: f64| [centre[0] + t * d[0], centre[1] + t * d[1]];
        let not_star = |crossings: usize| {
            Error::Geometry(format!(
                "hole is not star-shaped about ({}, {}): blend ray towards ({}, {}) crosses the hole boundary {crossings} times",
                centre[0], centre[1], target[0], target[1]
            ))
        };
        if let HoleShape::Polygon { vertices } = self {
            let mut hits = Vec::new();
            for k in 0..vertices.len() {
                let a = vertices[k];
                let b = vertices[(k + 1) % vertices.len()];
                let e = [b[0] - a[0], b[1] - a[1]];
                let den = d[0] * e[1] - d[1] * e[0];
                if den.abs() < 1e-300 {
                    continue;
                }
                let w = [a[0] - centre[0], a[1] - centre[1]];
                let t = (w[0] * e[1] - w[1] * e[0]) / den;
                let s = (w[0] * d[1] - w[1] * d[0]) / den;
                if (0.0..1.0).contains(&s) && t > 0.0 {
                    hits.push(t);
                }
            }
            return match hits.as_slice() {
                [t] if *t < 1.0 => Ok(*t),
                [_] => Err(Error::Geometry("hole polygon extends past the outer square".into())),
                _ => Err(not_star(hits.len())),
            };
        }

        if self.level_set(centre) >= 0.0 {
            return Err(Error::Geometry(format!(
                "star centre ({}, {}) is not inside the hole",
                centre[0], centre[1]
            )));
        }
        const SAMPLES: usize = 400;
        let mut bracket = None;
        let mut crossings = 0;
        let mut prev = self.level_set(centre);
        for k in 1..=SAMPLES {
            let t = k as f64 / SAMPLES as f64;
            let f = self.level_set(at(t));
            if (f > 0.0) != (prev > 0.0) {
                crossings += 1;
                bracket.get_or_insert(((k - 1) as f64 / SAMPLES as f64, t));
            }
            prev = f;
        }
        if crossings != 1 {
            if crossings == 0 {
                return Err(Error::Geometry("hole extends past the outer square".into()));
            }
            return Err(not_star(crossings));
        }
        let (mut lo, mut hi) = bracket.unwrap();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.level_set(at(mid)) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Square with a star-shaped hole, meshed by transfinite radial blending from
/// the hole boundary to the outer boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerforatedSquare {
    pub hole: HoleShape,
    pub lower: Point,
    pub upper: Point,
    /// Outer-boundary segments per face at level 0.
    pub face_segments: usize,
    /// Radial layers between hole and outer boundary at level 0.
    pub layers: usize,
    /// Thickness ratio between the outermost and the innermost layer (1 = uniform).
    #[serde(default = "one")]
    pub grading: f64,
    /// Node clustering towards the face midpoint, in [0, 1), for the
    /// left/right faces and the bottom/top faces respectively.
    #[serde(default)]
    pub face_clustering: [f64; 2],
    #[serde(default)]
    pub star_centre: Option<Point>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeometrySpec {
    Square {
        lower: Point,
        upper: Point,
        divisions: usize,
    },
    MappedDisc {
        map: DiscMap,
        rings: usize,
        segments: usize,
    },
    PerforatedSquare(PerforatedSquare),
}

/// Build the mesh described by `spec`; every increment of `level` doubles the
/// resolution in each direction.
pub fn generate_mesh(spec: &GeometrySpec, level: u32) -> Result<TriMesh> {
    let factor = 1usize
        .checked_shl(level)
        .filter(|&f| f <= 1 << 16)
        .ok_or_else(|| Error::Geometry(format!("refinement level {level} is too large")))?;
    let mesh = match spec {
        GeometrySpec::Square {
            lower,
            upper,
            divisions,
        } => square(*lower, *upper, divisions * factor)?,
        GeometrySpec::MappedDisc {
            map,
            rings,
            segments,
        } => mapped_disc(*map, rings * factor, segments * factor)?,
        GeometrySpec::PerforatedSquare(p) => perforated_square(p, factor)?,
    };
    mesh.validate()?;
    Ok(mesh)
}

fn square(lower: Point, upper: Point, n: usize) -> Result<TriMesh> {
    if n == 0 || !(upper[0] > lower[0] && upper[1] > lower[1]) {
        return Err(Error::Geometry(
            "square needs positive extent and at least one division".into(),
        ));
    }
    let stride = n + 1;
    let mut nodes = Vec::with_capacity(stride * stride);
    for j in 0..=n {
        for i in 0..=n {
            nodes.push([
                lerp(lower[0], upper[0], i as f64 / n as f64),
                lerp(lower[1], upper[1], j as f64 / n as f64),
            ]);
        }
    }
    let id = |i: usize, j: usize| j * stride + i;
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let boundary_edges = boundary_from_triangles(&triangles, |_, _| Marker::Outer);
    Ok(TriMesh {
        nodes,
        triangles,
        boundary_edges,
        periodic_classes: Vec::new(),
        domain_tag: DomainTag::Macro,
    })
}

fn mapped_disc(map: DiscMap, rings: usize, segments: usize) -> Result<TriMesh> {
    if rings == 0 || segments < 3 {
        return Err(Error::Geometry(
            "disc needs at least one ring and three segments".into(),
        ));
    }
    let mut reference = Vec::with_capacity(1 + rings * segments);
    reference.push([0.0, 0.0]);
    for k in 1..=rings {
        let r = k as f64 / rings as f64;
        for j in 0..segments {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / segments as f64;
            // the rim lies exactly on the unit circle
            let (s, c) = phi.sin_cos();
            reference.push([r * c, r * s]);
        }
    }
    let id = |k: usize, j: usize| 1 + (k - 1) * segments + j % segments;
    let mut triangles = Vec::with_capacity(segments * (2 * rings - 1));
    for j in 0..segments {
        triangles.push([0, id(1, j), id(1, j + 1)]);
    }
    for k in 1..rings {
        for j in 0..segments {
            triangles.push([id(k, j), id(k + 1, j), id(k + 1, j + 1)]);
            triangles.push([id(k, j), id(k + 1, j + 1), id(k, j + 1)]);
        }
    }
    for (i, u) in reference.iter().enumerate() {
        let det = map.jacobian_det(*u);
        if !(det > 0.0) || !det.is_finite() {
            return Err(Error::Geometry(format!(
                "degenerate map Jacobian ({det}) at reference node {i}"
            )));
        }
    }
    let nodes: Vec<Point> = reference.iter().map(|&u| map.apply(u)).collect();
    for (t, tri) in triangles.iter().enumerate() {
        if signed_area2(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]) <= 0.0 {
            return Err(Error::Geometry(format!(
                "disc map inverts triangle {t} (degenerate map Jacobian at this resolution)"
            )));
        }
    }
    let boundary_edges = boundary_from_triangles(&triangles, |_, _| Marker::Outer);
    Ok(TriMesh {
        nodes,
        triangles,
        boundary_edges,
        periodic_classes: Vec::new(),
        domain_tag: DomainTag::CellInterior,
    })
}

/// Monotone map of [0, 1] onto itself that is odd about 1/2, clustering
/// points towards the midpoint with strength `c` in [0, 1).
fn cluster(t: f64, c: f64) -> f64 {
    let u = 2.0 * t - 1.0;
    0.5 * (u + c * (u * u * u - u) + 1.0)
}

fn outer_boundary_points(p: &PerforatedSquare, per_face: usize) -> Vec<Point> {
    let [x0, y0] = p.lower;
    let [x1, y1] = p.upper;
    let [cx, cy] = p.face_clustering;
    let mut pts = Vec::with_capacity(4 * per_face);
    let s = |i: usize, c: f64| cluster(i as f64 / per_face as f64, c);
    // counter-clockwise, starting at the bottom-right corner
    for i in 0..per_face {
        pts.push([x1, lerp(y0, y1, s(i, cx))]);
    }
    for i in 0..per_face {
        pts.push([lerp(x1, x0, s(i, cy)), y1]);
    }
    for i in 0..per_face {
        pts.push([x0, lerp(y1, y0, s(i, cx))]);
    }
    for i in 0..per_face {
        pts.push([lerp(x0, x1, s(i, cy)), y0]);
    }
    pts
}

fn perforated_square(p: &PerforatedSquare, factor: usize) -> Result<TriMesh> {
    let per_face = p.face_segments * factor;
    let layers = p.layers * factor;
    if per_face == 0 || layers == 0 {
        return Err(Error::Geometry(
            "perforated square needs face segments and layers".into(),
        ));
    }
    if !(p.upper[0] > p.lower[0] && p.upper[1] > p.lower[1]) {
        return Err(Error::Geometry("outer square has non-positive extent".into()));
    }
    if !(p.grading > 0.0) || p.face_clustering.iter().any(|c| !(0.0..1.0).contains(c)) {
        return Err(Error::Geometry(
            "grading must be positive and face clustering in [0, 1)".into(),
        ));
    }
    let centre = p.star_centre.unwrap_or_else(|| p.hole.default_centre());
    let outer = outer_boundary_points(p, per_face);
    let ring = outer.len();
    let hole: Vec<Point> = outer
        .iter()
        .map(|&o| {
            let t = p.hole.ray_exit(centre, o)?;
            Ok([
                centre[0] + t * (o[0] - centre[0]),
                centre[1] + t * (o[1] - centre[1]),
            ])
        })
        .collect::<Result<_>>()?;

    // geometric layer spacing: thickness ratio `grading` between last and first layer
    let params: Vec<f64> = if (p.grading - 1.0).abs() < 1e-14 || layers == 1 {
        (0..=layers).map(|k| k as f64 / layers as f64).collect()
    } else {
        let g = p.grading.powf(1.0 / (layers - 1) as f64);
        let total = (g.powi(layers as i32) - 1.0) / (g - 1.0);
        (0..=layers)
            .map(|k| ((g.powi(k as i32) - 1.0) / (g - 1.0)) / total)
            .collect()
    };

    let mut nodes = Vec::with_capacity((layers + 1) * ring);
    for (k, &s) in params.iter().enumerate() {
        for j in 0..ring {
            if k == layers {
                nodes.push(outer[j]);
            } else {
                let (h, o) = (hole[j], outer[j]);
                nodes.push([lerp(h[0], o[0], s), lerp(h[1], o[1], s)]);
            }
        }
    }
    let id = |k: usize, j: usize| k * ring + j % ring;
    let mut triangles = Vec::with_capacity(2 * layers * ring);
    for k in 0..layers {
        for j in 0..ring {
            let (a, b, c, d) = (id(k, j), id(k, j + 1), id(k + 1, j + 1), id(k + 1, j));
            let quad = if dist(nodes[a], nodes[c]) <= dist(nodes[b], nodes[d]) {
                [[a, b, c], [a, c, d]]
            } else {
                [[a, b, d], [b, c, d]]
            };
            for mut tri in quad {
                let area2 = signed_area2(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
                if area2 < 0.0 {
                    tri.swap(1, 2);
                } else if area2 == 0.0 {
                    return Err(Error::Geometry(format!(
                        "radial blend produced a degenerate triangle near ({}, {})",
                        nodes[a][0], nodes[a][1]
                    )));
                }
                triangles.push(tri);
            }
        }
    }
    let hole_ring = ring;
    let boundary_edges = boundary_from_triangles(&triangles, |a, b| {
        if a < hole_ring && b < hole_ring {
            Marker::Hole
        } else {
            Marker::Outer
        }
    });
    Ok(TriMesh {
        nodes,
        triangles,
        boundary_edges,
        periodic_classes: Vec::new(),
        domain_tag: DomainTag::CellExterior,
    })
}

/// Edges used by exactly one triangle, oriented as in that triangle and
/// sorted for a deterministic order.
fn boundary_from_triangles(
    triangles: &[[usize; 3]],
    marker: impl Fn(usize, usize) -> Marker,
) -> Vec<BoundaryEdge> {
    let mut count: BTreeMap<(usize, usize), (usize, [usize; 2])> = BTreeMap::new();
    for tri in triangles {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            count
                .entry((a.min(b), a.max(b)))
                .and_modify(|e| e.0 += 1)
                .or_insert((1, [a, b]));
        }
    }
    count
        .into_values()
        .filter(|(c, _)| *c == 1)
        .map(|(_, nodes)| BoundaryEdge {
            nodes,
            marker: marker(nodes[0], nodes[1]),
        })
        .collect()
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}
