//! Manufactured-solution convergence study for the four-species two-scale
//! system on `[-0.5, 0.5]^2` with a unit-disc cell.
//!
//! The exact fields are
//! `c_e = cos(pi t) exp(-10|x|^2)`, `c_i = (1 + |x|^2) exp(-4t (y1 y2)^2)` and
//! `r_f = p_a = (5 + 5|x|^2) exp(-4t (z1 z2)^2)`, with reactions
//! `G_e = c_e r_f - p_a` and `G_i = p_a - c_i`. Sources `f1..f4` make these
//! fields exact; `g1`, `g2` are natural boundary loads compensating the
//! mismatch with the zero-flux and Robin conditions.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{
    assemble_consistent_mass, assemble_curve_consistent_mass, assemble_lumped_mass, interpolate, SparseOperator,
    Tensor2,
};
use crate::macroscale::{build_macro_operator, BoundarySpec, TwoScaleField};
use crate::mesh::{extract_boundary_curve, generate_mesh, mesh_stats, CurveMesh, DiscMap, GeometrySpec, Marker, Point, TriMesh};
use crate::micro::{build_micro_operators, Decays, MicroDiffusions, SurfaceSpecies};

pub const END_TIME: f64 = 0.25;
pub const MAX_LEVEL: u32 = 4;
pub const SPECIES: [&str; 4] = ["c_e", "c_i", "r_f", "p_a"];

/// Modified Bessel function `I_0` by its power series (adequate for `|x| < 10`).
pub fn bessel_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let (mut term, mut sum) = (1.0, 1.0);
    for k in 1..60 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

fn r2(x: Point) -> f64 {
    x[0] * x[0] + x[1] * x[1]
}

fn q(z: Point) -> f64 {
    (z[0] * z[1]).powi(2)
}

/// Closed-form exact solution and derived data.
#[derive(Debug, Clone, Copy, Default)]
pub struct BenchmarkSolution;

impl BenchmarkSolution {
    pub fn c_e(&self, x: Point, t: f64) -> f64 {
        (PI * t).cos() * (-10.0 * r2(x)).exp()
    }

    pub fn grad_c_e(&self, x: Point, t: f64) -> Point {
        let c = self.c_e(x, t);
        [-20.0 * x[0] * c, -20.0 * x[1] * c]
    }

    pub fn c_i(&self, x: Point, y: Point, t: f64) -> f64 {
        (1.0 + r2(x)) * (-4.0 * t * q(y)).exp()
    }

    pub fn grad_c_i(&self, x: Point, y: Point, t: f64) -> Point {
        let c = self.c_i(x, y, t);
        [
            -8.0 * t * y[0] * y[1] * y[1] * c,
            -8.0 * t * y[0] * y[0] * y[1] * c,
        ]
    }

    /// Common value of `r_f` and `p_a`.
    pub fn membrane(&self, x: Point, z: Point, t: f64) -> f64 {
        5.0 * (1.0 + r2(x)) * (-4.0 * t * q(z)).exp()
    }

    /// Ambient gradient of [`Self::membrane`] in `z`.
    pub fn grad_membrane(&self, x: Point, z: Point, t: f64) -> Point {
        let p = self.membrane(x, z, t);
        [
            -8.0 * t * z[0] * z[1] * z[1] * p,
            -8.0 * t * z[0] * z[0] * z[1] * p,
        ]
    }

    /// `int_Gamma G_e dsigma` over the unit circle.
    pub fn membrane_integral(&self, x: Point, t: f64) -> f64 {
        // int_0^{2pi} exp(-t sin^2 2s) ds = 2 pi exp(-t/2) I0(t/2)
        (self.c_e(x, t) - 1.0) * 5.0 * (1.0 + r2(x)) * 2.0 * PI * (-0.5 * t).exp() * bessel_i0(0.5 * t)
    }

    /// `d_t c_e - lap c_e + int_Gamma G_e`.
    pub fn f1(&self, x: Point, t: f64) -> f64 {
        let s = r2(x);
        let g = (-10.0 * s).exp();
        -PI * (PI * t).sin() * g + (PI * t).cos() * g * (40.0 - 400.0 * s) + self.membrane_integral(x, t)
    }

    /// `d_t c_i - lap_y c_i`.
    pub fn f2(&self, x: Point, y: Point, t: f64) -> f64 {
        let (qq, ry) = (q(y), r2(y));
        self.c_i(x, y, t) * (-4.0 * qq - 64.0 * t * t * qq * ry + 8.0 * t * ry)
    }

    /// `d_t u - lap_Gamma u` for the membrane field on the unit circle.
    fn membrane_operator(&self, x: Point, z: Point, t: f64) -> f64 {
        let qq = q(z);
        let c4 = 1.0 - 8.0 * qq;
        self.membrane(x, z, t) * (-4.0 * qq + 8.0 * t * c4 - 4.0 * t * t * (1.0 - c4 * c4))
    }

    fn g_e(&self, x: Point, z: Point, t: f64) -> f64 {
        (self.c_e(x, t) - 1.0) * self.membrane(x, z, t)
    }

    fn g_i(&self, x: Point, z: Point, t: f64) -> f64 {
        self.membrane(x, z, t) - self.c_i(x, z, t)
    }

    /// `d_t r_f - lap_Gamma r_f + G_e` at `z` on the unit circle.
    pub fn f3(&self, x: Point, z: Point, t: f64) -> f64 {
        self.membrane_operator(x, z, t) + self.g_e(x, z, t)
    }

    /// `d_t p_a - lap_Gamma p_a - G_e + G_i` at `z` on the unit circle.
    pub fn f4(&self, x: Point, z: Point, t: f64) -> f64 {
        self.membrane_operator(x, z, t) - self.g_e(x, z, t) + self.g_i(x, z, t)
    }

    /// `grad c_e . nu` on the outer boundary with unit normal `nu`.
    pub fn g1(&self, x: Point, nu: Point, t: f64) -> f64 {
        let g = self.grad_c_e(x, t);
        g[0] * nu[0] + g[1] * nu[1]
    }

    /// `grad_y c_i . nu - G_i` at `z` on the unit circle.
    pub fn g2(&self, x: Point, z: Point, t: f64) -> f64 {
        let g = self.grad_c_i(x, z, t);
        g[0] * z[0] + g[1] * z[1] - self.g_i(x, z, t)
    }
}

/// Errors of one benchmark run, species in [`SPECIES`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRecord {
    pub level: u32,
    /// `[h_omega, h_cell, h_membrane]`.
    pub h: [f64; 3],
    pub tau: f64,
    pub steps: usize,
    /// `L^2(0,T; H^1)` errors.
    pub l2h1: [f64; 4],
    /// `L^inf(0,T; L^2)` errors.
    pub linfl2: [f64; 4],
}

impl ErrorRecord {
    pub fn h_max(&self) -> f64 {
        self.h.iter().cloned().fold(0.0, f64::max)
    }
}

/// Meshes and operators of one refinement level.
pub struct BenchmarkSetup {
    pub level: u32,
    pub omega: TriMesh,
    pub cell: TriMesh,
    pub membrane: CurveMesh,
    outer: CurveMesh,
}

impl BenchmarkSetup {
    /// Level `k`: `2^k x 2^k` macroscopic squares, a disc with `2^k` rings and
    /// `8 * 2^k` boundary segments.
    pub fn new(level: u32) -> Result<Self> {
        if level > 8 {
            return Err(Error::invalid("level", format!("refinement level {level} exceeds 8")));
        }
        let omega = generate_mesh(
            &GeometrySpec::Square {
                lower: [-0.5, -0.5],
                upper: [0.5, 0.5],
                divisions: 1,
            },
            level,
        )?;
        let cell = generate_mesh(
            &GeometrySpec::MappedDisc {
                map: DiscMap::Identity,
                rings: 1,
                segments: 8,
            },
            level,
        )?;
        let membrane = extract_boundary_curve(&cell, Marker::Outer)?;
        let outer = extract_boundary_curve(&omega, Marker::Outer)?;
        Ok(BenchmarkSetup {
            level,
            omega,
            cell,
            membrane,
            outer,
        })
    }

    /// Step count of the `tau ~ h^2` schedule.
    pub fn default_steps(&self) -> usize {
        4 * 4usize.pow(self.level)
    }

    pub fn h(&self) -> [f64; 3] {
        [
            mesh_stats(&self.omega).h_max,
            mesh_stats(&self.cell).h_max,
            self.membrane.h_max(),
        ]
    }

    /// Nodal loads `int_{boundary} g1 phi_i` by the trapezoidal rule per segment.
    fn boundary_load(&self, t: f64) -> Vec<f64> {
        let exact = BenchmarkSolution;
        let mut load = vec![0.0; self.omega.node_count()];
        let c = &self.outer;
        for (s, seg) in c.segments.iter().enumerate() {
            let (a, b) = (c.nodes[seg[0]], c.nodes[seg[1]]);
            let len = c.segment_length(s);
            // counter-clockwise boundary: outward normal is the tangent turned clockwise
            let nu = [(b[1] - a[1]) / len, -(b[0] - a[0]) / len];
            load[c.parent_indices[seg[0]]] += 0.5 * len * exact.g1(a, nu, t);
            load[c.parent_indices[seg[1]]] += 0.5 * len * exact.g1(b, nu, t);
        }
        load
    }
}

/// Discrete benchmark fields at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkState {
    pub step: usize,
    pub time: f64,
    pub c_e: Vec<f64>,
    pub c_i: TwoScaleField,
    pub r_f: TwoScaleField,
    pub p_a: TwoScaleField,
}

fn exact_state(setup: &BenchmarkSetup, t: f64) -> Result<BenchmarkState> {
    let exact = BenchmarkSolution;
    let nx = setup.omega.node_count();
    let c_e = interpolate(&setup.omega.nodes, |x| exact.c_e(x, t))?;
    let mut c_i = TwoScaleField::zeros(nx, setup.cell.node_count());
    let mut r_f = TwoScaleField::zeros(nx, setup.membrane.node_count());
    for (k, &x) in setup.omega.nodes.iter().enumerate() {
        for (v, &y) in c_i.node_mut(k).iter_mut().zip(&setup.cell.nodes) {
            *v = exact.c_i(x, y, t);
        }
        for (v, &z) in r_f.node_mut(k).iter_mut().zip(&setup.membrane.nodes) {
            *v = exact.membrane(x, z, t);
        }
    }
    Ok(BenchmarkState {
        step: 0,
        time: t,
        c_e,
        c_i,
        p_a: r_f.clone(),
        r_f,
    })
}

/// Run the benchmark with `steps` uniform steps to the end time, calling
/// `observe` on the initial state and after every step.
pub fn solve_benchmark(
    setup: &BenchmarkSetup,
    steps: usize,
    mut observe: impl FnMut(&BenchmarkState) -> Result<()>,
) -> Result<BenchmarkState> {
    let exact = BenchmarkSolution;
    let mut state = exact_state(setup, 0.0)?;
    observe(&state)?;
    if steps == 0 {
        return Ok(state);
    }
    let tau = END_TIME / steps as f64;
    let macro_op = build_macro_operator(&setup.omega, Tensor2::identity(), 1.0, tau, &BoundarySpec::neumann())?;
    let ops = build_micro_operators(
        &setup.membrane,
        &setup.cell,
        MicroDiffusions {
            d_f: 1.0,
            d_b: 1.0,
            d_d: 1.0,
            d_a: 1.0,
            d_i: 1.0,
        },
        Decays::default(),
        tau,
        1.0,
    )?;
    let xs = &setup.omega.nodes;
    let zs = &setup.membrane.nodes;
    let ys = &setup.cell.nodes;
    for n in 1..=steps {
        let t = n as f64 * tau;
        let prev = &state;
        let fail = |species: &'static str, node: usize| Error::Step { step: n, species, node };

        // f2 is (1 + |x|^2) times a profile in y
        let f2_profile: Vec<f64> = ys.iter().map(|&y| exact.f2([0.0; 2], y, t)).collect();
        let mut coupling = vec![0.0; xs.len()];
        let micro: Vec<Result<(Vec<f64>, Vec<f64>, Vec<f64>)>> = (0..xs.len())
            .into_par_iter()
            .map(|k| {
                let x = xs[k];
                let (rf, pa, ci) = (prev.r_f.node(k), prev.p_a.node(k), prev.c_i.node(k));
                let ce = prev.c_e[k];
                let nz = zs.len();
                let (mut load_f, mut load_a, mut flux) = (vec![0.0; nz], vec![0.0; nz], vec![0.0; nz]);
                for j in 0..nz {
                    let ge = ce * rf[j] - pa[j];
                    let gi = pa[j] - ci[ops.trace[j]];
                    load_f[j] = -ge + exact.f3(x, zs[j], t);
                    load_a[j] = ge - gi + exact.f4(x, zs[j], t);
                    flux[j] = gi + exact.g2(x, zs[j], t);
                }
                let bulk_load: Vec<f64> = f2_profile.iter().map(|v| (1.0 + r2(x)) * v).collect();
                let r = ops.solve_surface(SurfaceSpecies::Free, rf, &load_f)?;
                let p = ops.solve_surface(SurfaceSpecies::Active, pa, &load_a)?;
                let c = ops.solve_bulk(ci, &bulk_load, &flux)?;
                Ok((r, p, c))
            })
            .collect();
        for (k, g) in coupling.iter_mut().enumerate() {
            let (rf, pa) = (prev.r_f.node(k), prev.p_a.node(k));
            *g = ops
                .curve_mass
                .iter()
                .enumerate()
                .map(|(j, m)| m * (prev.c_e[k] * rf[j] - pa[j]))
                .sum();
        }
        let load: Vec<f64> = xs.iter().zip(&coupling).map(|(&x, g)| exact.f1(x, t) - g).collect();
        let c_e = macro_op.advance(&prev.c_e, &load, Some(&setup.boundary_load(t)))?;
        if let Some(i) = c_e.iter().position(|v| !v.is_finite()) {
            return Err(fail("c_e", i));
        }
        let mut next = BenchmarkState {
            step: n,
            time: t,
            c_e,
            c_i: TwoScaleField::zeros(xs.len(), ys.len()),
            r_f: TwoScaleField::zeros(xs.len(), zs.len()),
            p_a: TwoScaleField::zeros(xs.len(), zs.len()),
        };
        for (k, m) in micro.into_iter().enumerate() {
            let (r, p, c) = m?;
            for (name, v) in [("r_f", &r), ("p_a", &p), ("c_i", &c)] {
                if v.iter().any(|v| !v.is_finite()) {
                    return Err(fail(name, k));
                }
            }
            next.r_f.node_mut(k).copy_from_slice(&r);
            next.p_a.node_mut(k).copy_from_slice(&p);
            next.c_i.node_mut(k).copy_from_slice(&c);
        }
        state = next;
        observe(&state)?;
    }
    Ok(state)
}

/// Degree-4 symmetric triangle rule: barycentric points and weights summing to one.
const TRI_RULE: [([f64; 3], f64); 6] = [
    ([0.445948490915965, 0.445948490915965, 0.108103018168070], 0.223381589678011),
    ([0.445948490915965, 0.108103018168070, 0.445948490915965], 0.223381589678011),
    ([0.108103018168070, 0.445948490915965, 0.445948490915965], 0.223381589678011),
    ([0.091576213509771, 0.091576213509771, 0.816847572980459], 0.109951743655322),
    ([0.091576213509771, 0.816847572980459, 0.091576213509771], 0.109951743655322),
    ([0.816847572980459, 0.091576213509771, 0.091576213509771], 0.109951743655322),
];

/// Three-point Gauss rule on `[0, 1]`.
const SEG_RULE: [(f64, f64); 3] = [
    (0.112701665379258_3, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887298334620741_7, 5.0 / 18.0),
];

/// Squared `L^2` and `H^1`-seminorm errors of a P1 field against `(u, grad u)`.
/// `exact` receives the running quadrature-point index and the point.
fn bulk_error(mesh: &TriMesh, values: &[f64], exact: impl Fn(usize, Point) -> (f64, Point)) -> (f64, f64) {
    let (mut l2, mut h1) = (0.0, 0.0);
    let mut qp = 0;
    for t in 0..mesh.triangle_count() {
        let tri = mesh.triangles[t];
        let p = mesh.triangle_points(t);
        let area2 = crate::mesh::signed_area2(p[0], p[1], p[2]);
        let mut grad = [0.0; 2];
        for i in 0..3 {
            let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
            grad[0] += values[tri[i]] * (a[1] - b[1]) / area2;
            grad[1] += values[tri[i]] * (b[0] - a[0]) / area2;
        }
        for (bary, w) in TRI_RULE {
            let x = [
                bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0],
                bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1],
            ];
            let uh: f64 = (0..3).map(|i| bary[i] * values[tri[i]]).sum();
            let (u, g) = exact(qp, x);
            qp += 1;
            let weight = 0.5 * area2 * w;
            l2 += weight * (uh - u).powi(2);
            h1 += weight * ((grad[0] - g[0]).powi(2) + (grad[1] - g[1]).powi(2));
        }
    }
    (l2, h1)
}

/// Squared `L^2` and tangential `H^1`-seminorm errors on a polygonal curve.
fn curve_error(curve: &CurveMesh, values: &[f64], exact: impl Fn(usize, Point) -> (f64, Point)) -> (f64, f64) {
    let (mut l2, mut h1) = (0.0, 0.0);
    let mut qp = 0;
    for (s, seg) in curve.segments.iter().enumerate() {
        let (a, b) = (curve.nodes[seg[0]], curve.nodes[seg[1]]);
        let len = curve.segment_length(s);
        let tangent = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
        let (ua, ub) = (values[seg[0]], values[seg[1]]);
        let duh = (ub - ua) / len;
        for (xi, w) in SEG_RULE {
            let z = [a[0] + xi * (b[0] - a[0]), a[1] + xi * (b[1] - a[1])];
            let (u, g) = exact(qp, z);
            qp += 1;
            let uh = ua + xi * (ub - ua);
            l2 += len * w * (uh - u).powi(2);
            h1 += len * w * (duh - (g[0] * tangent[0] + g[1] * tangent[1])).powi(2);
        }
    }
    (l2, h1)
}

/// Quadrature points of every triangle, in the order visited by [`bulk_error`].
fn triangle_points(mesh: &TriMesh) -> impl Iterator<Item = Point> + '_ {
    (0..mesh.triangle_count()).flat_map(move |t| {
        let p = mesh.triangle_points(t);
        TRI_RULE.iter().map(move |(b, _)| {
            [
                b[0] * p[0][0] + b[1] * p[1][0] + b[2] * p[2][0],
                b[0] * p[0][1] + b[1] * p[1][1] + b[2] * p[2][1],
            ]
        })
    })
}

/// Quadrature points of every segment, in the order visited by [`curve_error`].
fn segment_points(curve: &CurveMesh) -> impl Iterator<Item = Point> + '_ {
    curve.segments.iter().flat_map(move |seg| {
        let (a, b) = (curve.nodes[seg[0]], curve.nodes[seg[1]]);
        SEG_RULE
            .iter()
            .map(move |(xi, _)| [a[0] + xi * (b[0] - a[0]), a[1] + xi * (b[1] - a[1])])
    })
}

/// Squared `(L^2, H^1-seminorm)` errors per species at the state's time level.
/// Two-scale norms use the lumped macroscopic quadrature.
pub fn state_errors(setup: &BenchmarkSetup, state: &BenchmarkState) -> [(f64, f64); 4] {
    let exact = BenchmarkSolution;
    let t = state.time;
    let ce = bulk_error(&setup.omega, &state.c_e, |_, x| (exact.c_e(x, t), exact.grad_c_e(x, t)));
    let weights = assemble_lumped_mass(&setup.omega).values;
    // the exact micro fields are (macro amplitude) * (micro profile)
    let cell_table: Vec<(f64, Point)> = triangle_points(&setup.cell)
        .map(|y| (exact.c_i([0.0; 2], y, t), exact.grad_c_i([0.0; 2], y, t)))
        .collect();
    let curve_table: Vec<(f64, Point)> = segment_points(&setup.membrane)
        .map(|z| (exact.membrane([0.0; 2], z, t), exact.grad_membrane([0.0; 2], z, t)))
        .collect();
    let scaled = |table: &[(f64, Point)], q: usize, a: f64| -> (f64, Point) {
        let (u, g) = table[q];
        (a * u, [a * g[0], a * g[1]])
    };
    let per_node: Vec<[(f64, f64); 3]> = (0..setup.omega.node_count())
        .into_par_iter()
        .map(|k| {
            let a = 1.0 + r2(setup.omega.nodes[k]);
            [
                bulk_error(&setup.cell, state.c_i.node(k), |q, _| scaled(&cell_table, q, a)),
                curve_error(&setup.membrane, state.r_f.node(k), |q, _| scaled(&curve_table, q, a)),
                curve_error(&setup.membrane, state.p_a.node(k), |q, _| scaled(&curve_table, q, a)),
            ]
        })
        .collect();
    let mut out = [ce, (0.0, 0.0), (0.0, 0.0), (0.0, 0.0)];
    for (m, e) in weights.iter().zip(&per_node) {
        for s in 0..3 {
            out[s + 1].0 += m * e[s].0;
            out[s + 1].1 += m * e[s].1;
        }
    }
    out
}

/// Run one level with `steps` steps and accumulate the error norms; the
/// time integral uses the right-endpoint rule.
pub fn run_benchmark_with_steps(level: u32, steps: usize) -> Result<ErrorRecord> {
    let setup = BenchmarkSetup::new(level)?;
    let tau = if steps == 0 { 0.0 } else { END_TIME / steps as f64 };
    let mut l2h1 = [0.0; 4];
    let mut linfl2 = [0.0f64; 4];
    solve_benchmark(&setup, steps, |state| {
        let e = state_errors(&setup, state);
        for s in 0..4 {
            linfl2[s] = linfl2[s].max(e[s].0.sqrt());
            if state.step > 0 {
                l2h1[s] += tau * (e[s].0 + e[s].1);
            }
        }
        Ok(())
    })
    .map_err(|e| match e {
        Error::Step { .. } => Error::Config(format!("benchmark level {level}: {e}")),
        other => other,
    })?;
    Ok(ErrorRecord {
        level,
        h: setup.h(),
        tau,
        steps,
        l2h1: l2h1.map(f64::sqrt),
        linfl2,
    })
}

/// Run one level of the `tau ~ h^2` refinement schedule.
pub fn run_benchmark(level: u32) -> Result<ErrorRecord> {
    if level > MAX_LEVEL {
        return Err(Error::invalid(
            "level",
            format!("benchmark levels run from 0 to {MAX_LEVEL}, got {level}"),
        ));
    }
    let steps = 4 * 4usize.pow(level);
    run_benchmark_with_steps(level, steps)
}

/// `ln(e_{i+1}/e_i) / ln(h_{i+1}/h_i)` for consecutive pairs.
pub fn compute_eoc(errors: &[f64], hs: &[f64]) -> Result<Vec<f64>> {
    if errors.len() != hs.len() || errors.len() < 2 {
        return Err(Error::Input(format!(
            "need equally many errors and mesh sizes, at least two (got {} and {})",
            errors.len(),
            hs.len()
        )));
    }
    if let Some(v) = errors.iter().chain(hs).find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::Input(format!("errors and mesh sizes must be positive, got {v}")));
    }
    let eoc: Vec<f64> = errors
        .windows(2)
        .zip(hs.windows(2))
        .map(|(e, h)| (e[1] / e[0]).ln() / (h[1] / h[0]).ln())
        .collect();
    if eoc.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("consecutive mesh sizes must differ".into()));
    }
    Ok(eoc)
}

/// Consistent-mass `L^2` norms of the difference of two states, per species.
fn difference_norms(m: &Matrices, a: &BenchmarkState, b: &BenchmarkState) -> [f64; 4] {
    let diff = |u: &[f64], v: &[f64]| -> Vec<f64> { u.iter().zip(v).map(|(x, y)| x - y).collect() };
    let mut out = [m.omega.quadratic_form(&diff(&a.c_e, &b.c_e)), 0.0, 0.0, 0.0];
    for (k, w) in m.weights.iter().enumerate() {
        out[1] += w * m.cell.quadratic_form(&diff(a.c_i.node(k), b.c_i.node(k)));
        out[2] += w * m.curve.quadratic_form(&diff(a.r_f.node(k), b.r_f.node(k)));
        out[3] += w * m.curve.quadratic_form(&diff(a.p_a.node(k), b.p_a.node(k)));
    }
    out.map(f64::sqrt)
}

struct Matrices {
    omega: SparseOperator,
    cell: SparseOperator,
    curve: SparseOperator,
    weights: Vec<f64>,
}

/// Time-refinement study at a fixed level: runs with `steps`, `2 steps` and
/// `4 steps` and returns, per species, the ratio
/// `max_n |U_N - U_2N| / max_n |U_2N - U_4N|` over the coarse time levels.
/// First-order time stepping gives ratios near two.
pub fn time_error_ratios(level: u32, steps: usize) -> Result<[f64; 4]> {
    if steps == 0 {
        return Err(Error::Input("time refinement needs at least one step".into()));
    }
    let setup = BenchmarkSetup::new(level)?;
    let mats = Matrices {
        omega: assemble_consistent_mass(&setup.omega),
        cell: assemble_consistent_mass(&setup.cell),
        curve: assemble_curve_consistent_mass(&setup.membrane),
        weights: assemble_lumped_mass(&setup.omega).values,
    };
    let collect = |n: usize| -> Result<Vec<BenchmarkState>> {
        let stride = n / steps;
        let mut out = Vec::with_capacity(steps + 1);
        solve_benchmark(&setup, n, |s| {
            if s.step % stride == 0 {
                out.push(s.clone());
            }
            Ok(())
        })?;
        Ok(out)
    };
    let (u1, u2, u4) = (collect(steps)?, collect(2 * steps)?, collect(4 * steps)?);
    let mut d1 = [0.0f64; 4];
    let mut d2 = [0.0f64; 4];
    for n in 0..=steps {
        let a = difference_norms(&mats, &u1[n], &u2[n]);
        let b = difference_norms(&mats, &u2[n], &u4[n]);
        for s in 0..4 {
            d1[s] = d1[s].max(a[s]);
            d2[s] = d2[s].max(b[s]);
        }
    }
    Ok(std::array::from_fn(|s| d1[s] / d2[s]))
}
