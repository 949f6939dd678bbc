//! Periodic unit-cell problems, the effective diffusion tensor and porosity.
//!
//! The corrector `w^j` solves the periodic problem
//! `-div(D_e (grad w^j + e_j)) = 0` in the extracellular part of the cell with
//! zero flux on the membrane, normalised to zero mean. The effective tensor is
//! `D_ij = 1/|Y| sum_K |K| (D_e,ij + (D_e grad w^j)_i)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{
    apply_periodic_constraints, assemble_lumped_mass, assemble_stiffness, expand_vector,
    restrict_vector, solve_spd_semidefinite, Tensor2, DEFAULT_TOLERANCE,
};
use crate::mesh::{
    default_tolerance, generate_mesh, match_periodic_nodes, mesh_stats, DiscMap, GeometrySpec,
    HoleShape, PerforatedSquare, Point, TriMesh,
};

/// Shape of the biological cell inside the unit cell (centred at the origin).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum CellShape {
    /// No cell: the extracellular domain is the whole unit cell.
    None,
    Circle { radius: f64 },
    /// `c[0] x^2 + c[1] y^2 < 1`.
    Ellipse { coeffs: [f64; 2] },
    /// `(x1 + 0.2 - x2^2)^2 + x2^2 < 1`.
    Dziuk,
}

impl CellShape {
    pub fn name(&self) -> &'static str {
        match self {
            CellShape::None => "none",
            CellShape::Circle { .. } => "circle",
            CellShape::Ellipse { .. } => "ellipse",
            CellShape::Dziuk => "dziuk",
        }
    }

    /// The two semi-axis extents of the cell along x and y, from the origin.
    fn extent(&self) -> ([f64; 2], [f64; 2]) {
        match *self {
            CellShape::None => ([0.0; 2], [0.0; 2]),
            CellShape::Circle { radius } => ([-radius, radius], [-radius, radius]),
            CellShape::Ellipse { coeffs } => {
                let (a, b) = (1.0 / coeffs[0].sqrt(), 1.0 / coeffs[1].sqrt());
                ([-a, a], [-b, b])
            }
            // x = u1 - 0.2 + u2^2 on the unit disc spans [-1.2, 1.05]; |y| <= 1
            CellShape::Dziuk => ([-1.2, 1.05], [-1.0, 1.0]),
        }
    }

    /// Check the cell is well defined and lies strictly inside the unit cell.
    pub fn check_fits(&self, lower: Point, upper: Point) -> Result<()> {
        match *self {
            CellShape::Circle { radius } if !(radius > 0.0) => {
                return Err(Error::Geometry(format!("cell radius {radius} must be positive")))
            }
            CellShape::Ellipse { coeffs } if !(coeffs[0] > 0.0 && coeffs[1] > 0.0) => {
                return Err(Error::Geometry("ellipse coefficients must be positive".into()))
            }
            _ => {}
        }
        if !(upper[0] > lower[0] && upper[1] > lower[1]) {
            return Err(Error::Geometry("unit cell has non-positive extent".into()));
        }
        let (x, y) = self.extent();
        if *self != CellShape::None
            && !(x[0] > lower[0] && x[1] < upper[0] && y[0] > lower[1] && y[1] < upper[1])
        {
            return Err(Error::Geometry(format!(
                "{} cell does not fit inside the unit cell [{}, {}] x [{}, {}]",
                self.name(),
                lower[0],
                upper[0],
                lower[1],
                upper[1]
            )));
        }
        Ok(())
    }

    /// Generator for the extracellular domain at refinement level 0.
    pub fn exterior_spec(&self, lower: Point, upper: Point) -> GeometrySpec {
        let hole = match *self {
            CellShape::None => {
                return GeometrySpec::Square {
                    lower,
                    upper,
                    divisions: 8,
                }
            }
            CellShape::Circle { radius } => HoleShape::Circle { radius },
            CellShape::Ellipse { coeffs } => HoleShape::Ellipse { coeffs },
            CellShape::Dziuk => HoleShape::Dziuk,
        };
        // the elongated ellipse nearly touches the left and right faces, so
        // face nodes there are concentrated towards the narrow gap
        let face_clustering = match self {
            CellShape::Ellipse { coeffs } if coeffs[0] < coeffs[1] => [0.8, 0.0],
            CellShape::Ellipse { .. } => [0.0, 0.8],
            _ => [0.0, 0.0],
        };
        GeometrySpec::PerforatedSquare(PerforatedSquare {
            hole,
            lower,
            upper,
            face_segments: 8,
            layers: 13,
            grading: 1.0,
            face_clustering,
            star_centre: None,
        })
    }

    /// Generator for the cell interior at refinement level 0 (`None` for no cell).
    pub fn interior_spec(&self) -> Option<GeometrySpec> {
        let map = match *self {
            CellShape::None => return None,
            CellShape::Circle { radius } => DiscMap::Ellipse {
                a: radius,
                b: radius,
            },
            CellShape::Ellipse { coeffs } => DiscMap::ellipse_from_coeffs(coeffs),
            CellShape::Dziuk => DiscMap::Dziuk,
        };
        Some(GeometrySpec::MappedDisc {
            map,
            rings: 1,
            segments: 8,
        })
    }

    /// Periodic extracellular mesh ready for [`solve_cell_problems`].
    pub fn exterior_mesh(&self, lower: Point, upper: Point, level: u32) -> Result<TriMesh> {
        self.check_fits(lower, upper)?;
        let mesh = generate_mesh(&self.exterior_spec(lower, upper), level)?;
        let period = [[upper[0] - lower[0], 0.0], [0.0, upper[1] - lower[1]]];
        match_periodic_nodes(&mesh, period, default_tolerance(&mesh))
    }
}

/// Effective coefficients of the unit cell.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogenizedData {
    pub d_hom: Tensor2,
    pub theta_e: f64,
    /// Correctors `w^1, w^2` as nodal vectors on the (unreduced) extracellular
    /// mesh; periodic partner nodes carry equal values.
    pub cell_solutions: [Vec<f64>; 2],
    /// Longest edge of the extracellular mesh.
    pub mesh_h: f64,
    /// Unknowns of the reduced periodic system.
    pub dofs: usize,
}

impl HomogenizedData {
    /// Coefficients supplied directly rather than computed from a cell mesh.
    pub fn prescribed(d_hom: Tensor2, theta_e: f64) -> Self {
        HomogenizedData {
            d_hom,
            theta_e,
            cell_solutions: [Vec::new(), Vec::new()],
            mesh_h: 0.0,
            dofs: 0,
        }
    }
}

fn check_coefficient(d_e: Tensor2) -> Result<()> {
    let [lo, _] = d_e.eigenvalues();
    if !d_e.is_finite() || !d_e.is_symmetric() || !(lo > 0.0) {
        return Err(Error::Config(format!(
            "extracellular diffusivity {:?} must be symmetric positive definite",
            d_e.0
        )));
    }
    Ok(())
}

/// Solve both periodic cell problems (concurrently).
pub fn solve_cell_problems(mesh: &TriMesh, d_e: Tensor2) -> Result<[Vec<f64>; 2]> {
    if mesh.periodic_classes.is_empty() {
        return Err(Error::Config(
            "cell mesh has no periodic classes; match the periodic faces first".into(),
        ));
    }
    check_coefficient(d_e)?;
    let k = assemble_stiffness(mesh, d_e)?;
    let (kr, map) = apply_periodic_constraints(&k, &mesh.periodic_classes)?;
    let reduced = kr.dimension();
    let mass = assemble_lumped_mass(mesh);

    let solve = |j: usize| -> Result<Vec<f64>> {
        let mut e = [0.0; 2];
        e[j] = 1.0;
        let flux = d_e.apply(e);
        let mut b = vec![0.0; mesh.nodes.len()];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let p = mesh.triangle_points(t);
            let area2 = crate::mesh::signed_area2(p[0], p[1], p[2]);
            for i in 0..3 {
                let (a, c) = (p[(i + 1) % 3], p[(i + 2) % 3]);
                // area * grad(phi_i), with grad(phi_i) = rot(a - c) / (2 area)
                let g = [0.5 * (a[1] - c[1]), 0.5 * (c[0] - a[0])];
                debug_assert!(area2 > 0.0);
                b[tri[i]] -= flux[0] * g[0] + flux[1] * g[1];
            }
        }
        let br = restrict_vector(&b, &map, reduced);
        let wr = solve_spd_semidefinite(&kr, &br, DEFAULT_TOLERANCE)?;
        let mut w = expand_vector(&wr, &map);
        let mean = mass.integrate(&w) / mass.sum();
        w.iter_mut().for_each(|v| *v -= mean);
        Ok(w)
    };
    let (w1, w2) = rayon::join(|| solve(0), || solve(1));
    Ok([w1?, w2?])
}

/// Effective tensor from the correctors, symmetrised as `(A + A^T) / 2`.
pub fn homogenized_tensor(
    mesh: &TriMesh,
    d_e: Tensor2,
    cell_solutions: &[Vec<f64>; 2],
    cell_volume: f64,
) -> Result<Tensor2> {
    for w in cell_solutions {
        if w.len() != mesh.nodes.len() {
            return Err(Error::SizeMismatch {
                expected: mesh.nodes.len(),
                actual: w.len(),
            });
        }
    }
    if !(cell_volume > 0.0) {
        return Err(Error::invalid("cell_volume", "must be positive"));
    }
    let mut a = [[0.0; 2]; 2];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let p = mesh.triangle_points(t);
        let area2 = crate::mesh::signed_area2(p[0], p[1], p[2]);
        let area = 0.5 * area2;
        for (j, w) in cell_solutions.iter().enumerate() {
            let mut grad = [0.0; 2];
            for i in 0..3 {
                let (q, c) = (p[(i + 1) % 3], p[(i + 2) % 3]);
                grad[0] += w[tri[i]] * (q[1] - c[1]) / area2;
                grad[1] += w[tri[i]] * (c[0] - q[0]) / area2;
            }
            let dg = d_e.apply(grad);
            for i in 0..2 {
                a[i][j] += area * (d_e.0[i][j] + dg[i]);
            }
        }
    }
    Ok(Tensor2(a).scaled(1.0 / cell_volume).symmetrised())
}

/// Volume fraction of the extracellular domain.
pub fn porosity(mesh: &TriMesh, cell_volume: f64) -> f64 {
    mesh.total_area() / cell_volume
}

/// Correctors, effective tensor and porosity for one periodic cell mesh.
pub fn homogenize(mesh: &TriMesh, d_e: Tensor2, cell_volume: f64) -> Result<HomogenizedData> {
    let cell_solutions = solve_cell_problems(mesh, d_e)?;
    let d_hom = homogenized_tensor(mesh, d_e, &cell_solutions, cell_volume)?;
    let stats = mesh_stats(mesh);
    let (_, dofs) = crate::fem::periodic_index_map(mesh.nodes.len(), &mesh.periodic_classes)?;
    Ok(HomogenizedData {
        d_hom,
        theta_e: porosity(mesh, cell_volume),
        cell_solutions,
        mesh_h: stats.h_max,
        dofs,
    })
}
