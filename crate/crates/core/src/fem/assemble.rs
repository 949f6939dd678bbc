use serde::{Deserialize, Serialize};

use super::{DiagonalOperator, SparseOperator};
use crate::error::{Error, Result};
use crate::mesh::{dist, CurveMesh, Point, TriMesh};

/// Constant 2x2 tensor, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tensor2(pub [[f64; 2]; 2]);

impl Tensor2 {
    pub fn identity() -> Self {
        Tensor2([[1.0, 0.0], [0.0, 1.0]])
    }

    pub fn scalar(c: f64) -> Self {
        Tensor2([[c, 0.0], [0.0, c]])
    }

    pub fn diag(a: f64, b: f64) -> Self {
        Tensor2([[a, 0.0], [0.0, b]])
    }

    pub fn scaled(&self, s: f64) -> Self {
        Tensor2(self.0.map(|r| r.map(|v| v * s)))
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        let a = self.0;
        [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
    }

    pub fn transpose(&self) -> Self {
        let a = self.0;
        Tensor2([[a[0][0], a[1][0]], [a[0][1], a[1][1]]])
    }

    /// `(A + A^T) / 2`.
    pub fn symmetrised(&self) -> Self {
        let a = self.0;
        let off = 0.5 * (a[0][1] + a[1][0]);
        Tensor2([[a[0][0], off], [off, a[1][1]]])
    }

    pub fn is_symmetric(&self) -> bool {
        self.0[0][1] == self.0[1][0]
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let s = self.symmetrised().0;
        let mean = 0.5 * (s[0][0] + s[1][1]);
        let r = (0.5 * (s[0][0] - s[1][1])).hypot(s[0][1]);
        [mean - r, mean + r]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }
}

/// Gradients of the three barycentric basis functions and the area.
fn p1_gradients(p: [Point; 3]) -> Option<([[f64; 2]; 3], f64)> {
    let area2 = crate::mesh::signed_area2(p[0], p[1], p[2]);
    if !(area2 > 0.0) {
        return None;
    }
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
        g[i] = [(a[1] - b[1]) / area2, (b[0] - a[0]) / area2];
    }
    Some((g, 0.5 * area2))
}

/// Element stiffness `area * (D grad phi_j) . grad phi_i`, symmetric by construction.
pub fn local_stiffness(p: [Point; 3], coeff: Tensor2) -> Option<[[f64; 3]; 3]> {
    let (g, area) = p1_gradients(p)?;
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            let dg = coeff.apply(g[j]);
            k[i][j] = area * (dg[0] * g[i][0] + dg[1] * g[i][1]);
            k[j][i] = k[i][j];
        }
    }
    Some(k)
}

pub fn assemble_stiffness(mesh: &TriMesh, coeff: Tensor2) -> Result<SparseOperator> {
    if !coeff.is_finite() || !coeff.is_symmetric() {
        return Err(Error::Assembly(format!(
            "stiffness coefficient {:?} must be finite and symmetric",
            coeff.0
        )));
    }
    let mut t = Vec::with_capacity(9 * mesh.triangles.len());
    for (e, tri) in mesh.triangles.iter().enumerate() {
        let k = local_stiffness(mesh.triangle_points(e), coeff)
            .ok_or_else(|| Error::Assembly(format!("triangle {e} is degenerate")))?;
        for i in 0..3 {
            for j in 0..3 {
                t.push((tri[i], tri[j], k[i][j]));
            }
        }
    }
    Ok(SparseOperator::from_triplets(mesh.nodes.len(), &t, true))
}

pub fn assemble_lumped_mass(mesh: &TriMesh) -> DiagonalOperator {
    let mut values = vec![0.0; mesh.nodes.len()];
    for (e, tri) in mesh.triangles.iter().enumerate() {
        let third = mesh.triangle_area(e) / 3.0;
        for &v in tri {
            values[v] += third;
        }
    }
    DiagonalOperator { values }
}

/// Exact P1 mass matrix: `area / 12 * [[2,1,1],[1,2,1],[1,1,2]]` per triangle.
pub fn assemble_consistent_mass(mesh: &TriMesh) -> SparseOperator {
    let mut t = Vec::with_capacity(9 * mesh.triangles.len());
    for (e, tri) in mesh.triangles.iter().enumerate() {
        let a = mesh.triangle_area(e) / 12.0;
        for i in 0..3 {
            for j in 0..3 {
                t.push((tri[i], tri[j], if i == j { 2.0 * a } else { a }));
            }
        }
    }
    SparseOperator::from_triplets(mesh.nodes.len(), &t, true)
}

/// 1D P1 stiffness of one segment of length `h`.
pub fn segment_stiffness(h: f64, coeff: f64) -> Option<[[f64; 2]; 2]> {
    if !(h > 0.0) {
        return None;
    }
    let k = coeff / h;
    Some([[k, -k], [-k, k]])
}

/// Laplace-Beltrami stiffness on a polygonal curve (arc-length 1D Laplacian).
pub fn assemble_curve_stiffness(curve: &CurveMesh, coeff: f64) -> Result<SparseOperator> {
    if !(coeff >= 0.0) || !coeff.is_finite() {
        return Err(Error::Assembly(format!(
            "curve diffusion coefficient {coeff} must be finite and non-negative"
        )));
    }
    let mut t = Vec::with_capacity(4 * curve.segments.len());
    for (k, s) in curve.segments.iter().enumerate() {
        let h = dist(curve.nodes[s[0]], curve.nodes[s[1]]);
        let m = segment_stiffness(h, coeff)
            .ok_or_else(|| Error::Assembly(format!("curve segment {k} has zero length")))?;
        for i in 0..2 {
            for j in 0..2 {
                t.push((s[i], s[j], m[i][j]));
            }
        }
    }
    Ok(SparseOperator::from_triplets(curve.nodes.len(), &t, true))
}

pub fn assemble_curve_lumped_mass(curve: &CurveMesh) -> DiagonalOperator {
    let mut values = vec![0.0; curve.nodes.len()];
    for s in &curve.segments {
        let half = 0.5 * dist(curve.nodes[s[0]], curve.nodes[s[1]]);
        values[s[0]] += half;
        values[s[1]] += half;
    }
    DiagonalOperator { values }
}

/// Exact P1 mass on a polygonal curve: `h / 6 * [[2,1],[1,2]]` per segment.
pub fn assemble_curve_consistent_mass(curve: &CurveMesh) -> SparseOperator {
    let mut t = Vec::with_capacity(4 * curve.segments.len());
    for s in &curve.segments {
        let a = dist(curve.nodes[s[0]], curve.nodes[s[1]]) / 6.0;
        for i in 0..2 {
            for j in 0..2 {
                t.push((s[i], s[j], if i == j { 2.0 * a } else { a }));
            }
        }
    }
    SparseOperator::from_triplets(curve.nodes.len(), &t, true)
}
