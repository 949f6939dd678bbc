//! Macroscopic ligand equation and the two-scale time loop.
//!
//! Each step consumes level `n-1` data only: the membrane fluxes `g_k` are
//! evaluated at every macroscopic node, the macroscopic system
//! `(theta M + tau K(D_hom)) C^n = M (theta C^{n-1} + tau (theta F_e - g))`
//! is solved, and every node's micro state is advanced independently.

use serde::{Deserialize, Serialize};

use crate::cell::{homogenize, CellShape, HomogenizedData};
use crate::config::{Coefficient, ScenarioConfig};
use crate::error::{Error, Result};
use crate::fem::{assemble_lumped_mass, assemble_stiffness, FactoredSpd, Tensor2, DEFAULT_TOLERANCE};
use crate::mesh::{dist, extract_boundary_curve, generate_mesh, CurveMesh, GeometrySpec, Marker, Point, TriMesh};
use crate::micro::{
    build_micro_operators, coupling_flux, micro_step, MicroDiffusions, MicroOperators, MicroState,
    ReactionSpec,
};

/// Boundary nodes held at a fixed value; all other boundary is zero-flux.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DirichletRegion {
    None,
    /// Every boundary node.
    All,
    /// Boundary nodes with `max(x1, x2) < threshold`.
    MaxBelow { threshold: f64 },
    /// Explicit node list; every node must lie on the boundary.
    Nodes { nodes: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    pub dirichlet: DirichletRegion,
    #[serde(default = "one")]
    pub value: f64,
}

fn one() -> f64 {
    1.0
}

impl BoundarySpec {
    pub fn neumann() -> Self {
        BoundarySpec {
            dirichlet: DirichletRegion::None,
            value: 0.0,
        }
    }

    /// Sorted Dirichlet node set of `mesh`.
    pub fn dirichlet_nodes(&self, mesh: &TriMesh) -> Result<Vec<usize>> {
        let boundary = mesh.boundary_nodes();
        Ok(match &self.dirichlet {
            DirichletRegion::None => Vec::new(),
            DirichletRegion::All => boundary,
            DirichletRegion::MaxBelow { threshold } => boundary
                .into_iter()
                .filter(|&i| mesh.nodes[i][0].max(mesh.nodes[i][1]) < *threshold)
                .collect(),
            DirichletRegion::Nodes { nodes } => {
                let mut nodes = nodes.clone();
                nodes.sort_unstable();
                nodes.dedup();
                if let Some(&bad) = nodes.iter().find(|n| boundary.binary_search(n).is_err()) {
                    return Err(Error::Config(format!(
                        "Dirichlet node {bad} is not a boundary node of the macroscopic mesh"
                    )));
                }
                nodes
            }
        })
    }
}

/// Macroscopic ligand concentration at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroField {
    pub values: Vec<f64>,
    pub time_index: usize,
}

/// Factored macroscopic system with Dirichlet elimination.
#[derive(Debug, Clone)]
pub struct MacroOperator {
    solver: Option<FactoredSpd>,
    free_nodes: Vec<usize>,
    dirichlet_nodes: Vec<usize>,
    dirichlet_value: f64,
    /// `A_{free, dirichlet} u_D`, subtracted from every reduced right-hand side.
    lifted: Vec<f64>,
    pub mass: Vec<f64>,
    pub theta: f64,
    pub tau: f64,
}

pub fn build_macro_operator(
    mesh: &TriMesh,
    d_hom: Tensor2,
    theta: f64,
    tau: f64,
    bc: &BoundarySpec,
) -> Result<MacroOperator> {
    if mesh.nodes.is_empty() || mesh.triangles.is_empty() {
        return Err(Error::Config("macroscopic mesh is empty".into()));
    }
    if !(tau > 0.0) || !(theta > 0.0) {
        return Err(Error::Config(format!(
            "time step ({tau}) and porosity ({theta}) must be positive"
        )));
    }
    let mass = assemble_lumped_mass(mesh).values;
    let k = assemble_stiffness(mesh, d_hom)?;
    let scaled_mass: Vec<f64> = mass.iter().map(|m| theta * m).collect();
    let a = k.scaled_plus_diagonal(tau, &scaled_mass)?;

    let dirichlet_nodes = bc.dirichlet_nodes(mesh)?;
    let mut is_dirichlet = vec![false; mesh.nodes.len()];
    for &i in &dirichlet_nodes {
        is_dirichlet[i] = true;
    }
    let free_nodes: Vec<usize> = (0..mesh.nodes.len()).filter(|&i| !is_dirichlet[i]).collect();
    let mut index = vec![usize::MAX; mesh.nodes.len()];
    for (r, &i) in free_nodes.iter().enumerate() {
        index[i] = r;
    }
    let mut triplets = Vec::new();
    let mut lifted = vec![0.0; free_nodes.len()];
    for (r, &i) in free_nodes.iter().enumerate() {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if is_dirichlet[j] {
                lifted[r] += v * bc.value;
            } else {
                triplets.push((r, index[j], v));
            }
        }
    }
    let solver = if free_nodes.is_empty() {
        None
    } else {
        let reduced = crate::fem::SparseOperator::from_triplets(free_nodes.len(), &triplets, true);
        Some(FactoredSpd::new(&reduced, DEFAULT_TOLERANCE)?)
    };
    Ok(MacroOperator {
        solver,
        free_nodes,
        dirichlet_nodes,
        dirichlet_value: bc.value,
        lifted,
        mass,
        theta,
        tau,
    })
}

impl MacroOperator {
    pub fn dirichlet_nodes(&self) -> &[usize] {
        &self.dirichlet_nodes
    }

    /// Set the Dirichlet values in place.
    pub fn impose(&self, values: &mut [f64]) {
        for &i in &self.dirichlet_nodes {
            values[i] = self.dirichlet_value;
        }
    }

    /// Solve for `C^n` with right-hand side `M (theta C^{n-1} + tau load) + tau boundary`,
    /// where `boundary` is an already integrated load vector.
    pub fn advance(&self, prev: &[f64], load: &[f64], boundary: Option<&[f64]>) -> Result<Vec<f64>> {
        let n = self.mass.len();
        if prev.len() != n || load.len() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                actual: prev.len().min(load.len()),
            });
        }
        let mut rhs: Vec<f64> = self
            .free_nodes
            .iter()
            .enumerate()
            .map(|(r, &i)| {
                self.mass[i] * (self.theta * prev[i] + self.tau * load[i]) - self.lifted[r]
            })
            .collect();
        if let Some(b) = boundary {
            for (r, &i) in self.free_nodes.iter().enumerate() {
                rhs[r] += self.tau * b[i];
            }
        }
        let mut out = vec![0.0; n];
        if let Some(solver) = &self.solver {
            let u = solver.solve(&rhs)?;
            for (r, &i) in self.free_nodes.iter().enumerate() {
                out[i] = u[r];
            }
        }
        self.impose(&mut out);
        Ok(out)
    }

    /// `theta sum_i m_i c_i`.
    pub fn mass_of(&self, values: &[f64]) -> f64 {
        self.theta * self.mass.iter().zip(values).map(|(m, c)| m * c).sum::<f64>()
    }
}

/// One macroscopic step with membrane fluxes `coupling` from the same level.
pub fn macro_step(
    c_e: &MacroField,
    coupling: &[f64],
    spec: &ReactionSpec,
    op: &MacroOperator,
) -> Result<MacroField> {
    let step = c_e.time_index + 1;
    let load: Vec<f64> = c_e
        .values
        .iter()
        .zip(coupling)
        .map(|(&c, &g)| op.theta * spec.f_e.eval(c) - g)
        .collect();
    if let Some(node) = load.iter().position(|v| !v.is_finite()) {
        return Err(Error::Step {
            step,
            species: "c_e",
            node,
        });
    }
    let values = op.advance(&c_e.values, &load, None)?;
    if let Some(node) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Step {
            step,
            species: "c_e",
            node,
        });
    }
    Ok(MacroField {
        values,
        time_index: step,
    })
}

/// One micro species across all macroscopic nodes, stored node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoScaleField {
    pub macro_nodes: usize,
    pub micro_nodes: usize,
    pub values: Vec<f64>,
}

impl TwoScaleField {
    pub fn zeros(macro_nodes: usize, micro_nodes: usize) -> Self {
        TwoScaleField {
            macro_nodes,
            micro_nodes,
            values: vec![0.0; macro_nodes * micro_nodes],
        }
    }

    pub fn node(&self, k: usize) -> &[f64] {
        &self.values[k * self.micro_nodes..(k + 1) * self.micro_nodes]
    }

    pub fn node_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.values[k * self.micro_nodes..(k + 1) * self.micro_nodes]
    }
}

/// Full two-scale state: the macroscopic field and five micro species.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoScaleState {
    pub c_e: MacroField,
    pub r_f: TwoScaleField,
    pub r_b: TwoScaleField,
    pub p_d: TwoScaleField,
    pub p_a: TwoScaleField,
    pub c_i: TwoScaleField,
}

impl TwoScaleState {
    pub fn micro(&self, k: usize) -> MicroState {
        MicroState {
            r_f: self.r_f.node(k).to_vec(),
            r_b: self.r_b.node(k).to_vec(),
            p_d: self.p_d.node(k).to_vec(),
            p_a: self.p_a.node(k).to_vec(),
            c_i: self.c_i.node(k).to_vec(),
            time_index: self.c_e.time_index,
        }
    }

    fn set_micro(&mut self, k: usize, s: &MicroState) {
        self.r_f.node_mut(k).copy_from_slice(&s.r_f);
        self.r_b.node_mut(k).copy_from_slice(&s.r_b);
        self.p_d.node_mut(k).copy_from_slice(&s.p_d);
        self.p_a.node_mut(k).copy_from_slice(&s.p_a);
        self.c_i.node_mut(k).copy_from_slice(&s.c_i);
    }

    /// Species fields in [`SPECIES`] order (the first is the macroscopic field).
    pub fn species_values(&self) -> [&[f64]; 6] {
        [
            &self.c_e.values,
            &self.r_f.values,
            &self.r_b.values,
            &self.p_d.values,
            &self.p_a.values,
            &self.c_i.values,
        ]
    }
}

pub const SPECIES: [&str; 6] = ["c_e", "r_f", "r_b", "p_d", "p_a", "c_i"];

/// Initial data presets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// Spatially constant values.
    Constant {
        #[serde(default)]
        c_e: f64,
        #[serde(default)]
        r_f: f64,
        #[serde(default)]
        r_b: f64,
        #[serde(default)]
        p_d: f64,
        #[serde(default)]
        p_a: f64,
        #[serde(default)]
        c_i: f64,
    },
    /// Perturbed resting state of the signalling model:
    /// `c_i = 1 + A sin(pi(2y1 + y2/2)) sin(5 pi|x|)`,
    /// `r_f = 0.17 (1 + A cos(pi(z1 + 4z2)) cos(30 pi|x|))`,
    /// `p_d = 0.065 (1 + A cos(pi(2z1 + z2/2)) cos(10 pi|x|))`, others zero.
    Perturbed { amplitude: f64 },
}

impl InitialSpec {
    pub fn c_e(&self, _x: Point) -> f64 {
        match self {
            InitialSpec::Constant { c_e, .. } => *c_e,
            InitialSpec::Perturbed { .. } => 0.0,
        }
    }

    /// Micro initial state at macroscopic position `x`.
    pub fn micro(&self, x: Point, curve: &CurveMesh, interior: &TriMesh) -> MicroState {
        use std::f64::consts::PI;
        let mut s = MicroState::zeros(curve.node_count(), interior.node_count());
        match *self {
            InitialSpec::Constant {
                r_f,
                r_b,
                p_d,
                p_a,
                c_i,
                ..
            } => {
                s.r_f.fill(r_f);
                s.r_b.fill(r_b);
                s.p_d.fill(p_d);
                s.p_a.fill(p_a);
                s.c_i.fill(c_i);
            }
            InitialSpec::Perturbed { amplitude: a } => {
                let r = x[0].hypot(x[1]);
                for (j, z) in curve.nodes.iter().enumerate() {
                    s.r_f[j] = 0.17 * (1.0 + a * (PI * (z[0] + 4.0 * z[1])).cos() * (30.0 * PI * r).cos());
                    s.p_d[j] =
                        0.065 * (1.0 + a * (PI * (2.0 * z[0] + 0.5 * z[1])).cos() * (10.0 * PI * r).cos());
                }
                for (k, y) in interior.nodes.iter().enumerate() {
                    s.c_i[k] = 1.0 + a * (PI * (2.0 * y[0] + 0.5 * y[1])).sin() * (5.0 * PI * r).sin();
                }
            }
        }
        s
    }
}

/// Observation point snapped to the nearest macroscopic node.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub id: usize,
    pub point: Point,
    pub node: usize,
}

/// Values at one probe: `c_e`, membrane flux and mass-weighted means of the
/// five micro species.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeValues {
    pub c_e: f64,
    pub coupling: f64,
    pub means: [f64; 5],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub step: usize,
    pub time: f64,
    pub c_e: Vec<f64>,
    pub probes: Vec<ProbeValues>,
    /// Micro states at the probe nodes (only when requested).
    pub probe_micro: Vec<MicroState>,
}

/// Sampled output of a two-scale run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub probes: Vec<Probe>,
    pub samples: Vec<Sample>,
    /// Per species (in [`SPECIES`] order) minimum and maximum over every node
    /// and every time level, including the initial one.
    pub minima: [f64; 6],
    pub maxima: [f64; 6],
    /// Per species maximum of the initial data (and Dirichlet value for `c_e`).
    pub initial_maxima: [f64; 6],
    pub steps: usize,
    pub tau: f64,
}

impl Trajectory {
    /// First time at which `c_e` at probe `p` reaches `level`, linearly
    /// interpolated between samples.
    pub fn crossing_time(&self, p: usize, level: f64) -> Option<f64> {
        let mut prev: Option<(f64, f64)> = None;
        for s in &self.samples {
            let v = s.probes[p].c_e;
            if v >= level {
                return Some(match prev {
                    Some((t0, v0)) if v > v0 => t0 + (level - v0) / (v - v0) * (s.time - t0),
                    _ => s.time,
                });
            }
            prev = Some((s.time, v));
        }
        None
    }
}

/// Micro geometry and operators shared by every macroscopic node.
pub struct MicroSetup {
    pub interior: TriMesh,
    pub curve: CurveMesh,
    pub ops: MicroOperators,
}

/// A prepared two-scale run that can be stepped and inspected.
pub struct Simulation {
    pub macro_mesh: TriMesh,
    pub hom: HomogenizedData,
    pub macro_op: MacroOperator,
    pub micro: Option<MicroSetup>,
    pub spec: ReactionSpec,
    pub state: TwoScaleState,
    /// Membrane fluxes used by the most recent step.
    pub last_coupling: Vec<f64>,
    pub probes: Vec<Probe>,
    pub steps: usize,
    pub cadence: usize,
    store_probe_micro: bool,
    pool: rayon::ThreadPool,
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var("TSFEM_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("TSFEM_THREADS=`{v}` is not a thread count")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker threads: {e}")))
}

fn nearest_node(mesh: &TriMesh, p: Point) -> usize {
    let mut best = 0;
    for (i, q) in mesh.nodes.iter().enumerate() {
        if dist(*q, p) < dist(mesh.nodes[best], p) {
            best = i;
        }
    }
    best
}

impl Simulation {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let g = &config.geometry;
        let macro_mesh = generate_mesh(
            &GeometrySpec::Square {
                lower: g.macro_lower,
                upper: g.macro_upper,
                divisions: g.macro_divisions,
            },
            g.macro_level,
        )?;
        let cell_volume = (g.cell_upper[0] - g.cell_lower[0]) * (g.cell_upper[1] - g.cell_lower[1]);
        let d_e = match config.diffusion.d_e {
            Coefficient::Scalar(c) => Tensor2::scalar(c),
            Coefficient::Tensor(t) => t,
        };
        let hom = match (config.diffusion.d_hom, config.diffusion.theta_e) {
            (Some(d), Some(theta)) => HomogenizedData::prescribed(d, theta),
            (Some(d), None) => {
                let theta = if g.cell == CellShape::None {
                    1.0
                } else {
                    let m = g.cell.exterior_mesh(g.cell_lower, g.cell_upper, g.exterior_level)?;
                    m.total_area() / cell_volume
                };
                HomogenizedData::prescribed(d, theta)
            }
            (None, theta) => {
                let mut h = if g.cell == CellShape::None {
                    HomogenizedData::prescribed(d_e, 1.0)
                } else {
                    let m = g.cell.exterior_mesh(g.cell_lower, g.cell_upper, g.exterior_level)?;
                    homogenize(&m, d_e, cell_volume)?
                };
                if let Some(t) = theta {
                    h.theta_e = t;
                }
                h
            }
        };
        let tau = config.time.tau;
        let macro_op = build_macro_operator(&macro_mesh, hom.d_hom, hom.theta_e, tau, &config.bc)?;

        let micro = match g.cell.interior_spec() {
            None => None,
            Some(spec) => {
                let interior = generate_mesh(&spec, g.interior_level)?;
                let curve = extract_boundary_curve(&interior, Marker::Outer)?;
                let d = &config.diffusion;
                let ops = build_micro_operators(
                    &curve,
                    &interior,
                    MicroDiffusions {
                        d_f: d.d_f,
                        d_b: d.d_b,
                        d_d: d.d_d,
                        d_a: d.d_a,
                        d_i: d.d_i,
                    },
                    config.reactions.decays(),
                    tau,
                    cell_volume,
                )?;
                Some(MicroSetup {
                    interior,
                    curve,
                    ops,
                })
            }
        };

        let n_macro = macro_mesh.node_count();
        let (nc, nb) = micro
            .as_ref()
            .map_or((0, 0), |m| (m.curve.node_count(), m.interior.node_count()));
        let mut c_e: Vec<f64> = macro_mesh.nodes.iter().map(|&x| config.initial.c_e(x)).collect();
        macro_op.impose(&mut c_e);
        let mut state = TwoScaleState {
            c_e: MacroField {
                values: c_e,
                time_index: 0,
            },
            r_f: TwoScaleField::zeros(n_macro, nc),
            r_b: TwoScaleField::zeros(n_macro, nc),
            p_d: TwoScaleField::zeros(n_macro, nc),
            p_a: TwoScaleField::zeros(n_macro, nc),
            c_i: TwoScaleField::zeros(n_macro, nb),
        };
        if let Some(m) = &micro {
            for (k, &x) in macro_mesh.nodes.iter().enumerate() {
                state.set_micro(k, &config.initial.micro(x, &m.curve, &m.interior));
            }
        }
        let probes = config
            .output
            .probes
            .iter()
            .enumerate()
            .map(|(id, &p)| Probe {
                id,
                point: p,
                node: nearest_node(&macro_mesh, p),
            })
            .collect();
        let steps = config.time.steps();
        Ok(Simulation {
            macro_mesh,
            hom,
            macro_op,
            micro,
            spec: config.reactions,
            state,
            last_coupling: vec![0.0; n_macro],
            probes,
            steps,
            cadence: config.time.cadence.unwrap_or_else(|| steps.div_ceil(200).max(1)),
            store_probe_micro: config.output.micro_snapshots,
            pool: thread_pool()?,
        })
    }

    pub fn time(&self) -> f64 {
        self.state.c_e.time_index as f64 * self.macro_op.tau
    }

    /// `theta sum_i m_i c_e,i`.
    pub fn macro_mass(&self) -> f64 {
        self.macro_op.mass_of(&self.state.c_e.values)
    }

    /// Advance every field by one step.
    pub fn step(&mut self) -> Result<()> {
        let n_macro = self.macro_mesh.node_count();
        let state = &self.state;
        let spec = &self.spec;
        let (coupling, micro_next) = match &self.micro {
            None => (vec![0.0; n_macro], None),
            Some(m) => self.pool.install(|| {
                use rayon::prelude::*;
                let results: Vec<Result<(f64, MicroState)>> = (0..n_macro)
                    .into_par_iter()
                    .map(|k| {
                        let s = state.micro(k);
                        let c = state.c_e.values[k];
                        let g = coupling_flux(&s, c, spec, &m.ops);
                        Ok((g, micro_step(&s, c, spec, &m.ops)?))
                    })
                    .collect();
                let mut coupling = Vec::with_capacity(n_macro);
                let mut next = Vec::with_capacity(n_macro);
                for r in results {
                    let (g, s) = r?;
                    coupling.push(g);
                    next.push(s);
                }
                Ok::<_, Error>((coupling, Some(next)))
            })?,
        };
        let c_e = macro_step(&self.state.c_e, &coupling, &self.spec, &self.macro_op)?;
        self.state.c_e = c_e;
        if let Some(next) = micro_next {
            for (k, s) in next.iter().enumerate() {
                self.state.set_micro(k, s);
            }
        }
        self.last_coupling = coupling;
        Ok(())
    }

    fn sample(&self) -> Sample {
        let probes = self
            .probes
            .iter()
            .map(|p| {
                let k = p.node;
                let mut means = [0.0; 5];
                if let Some(m) = &self.micro {
                    let curve_len: f64 = m.ops.curve_mass.iter().sum();
                    let area: f64 = m.ops.bulk_mass.iter().sum();
                    let fields = [&self.state.r_f, &self.state.r_b, &self.state.p_d, &self.state.p_a];
                    for (s, f) in fields.iter().enumerate() {
                        means[s] = m.ops.curve_mass.iter().zip(f.node(k)).map(|(a, b)| a * b).sum::<f64>()
                            / curve_len;
                    }
                    means[4] = m
                        .ops
                        .bulk_mass
                        .iter()
                        .zip(self.state.c_i.node(k))
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
                        / area;
                }
                ProbeValues {
                    c_e: self.state.c_e.values[k],
                    coupling: self.last_coupling[k],
                    means,
                }
            })
            .collect();
        let probe_micro = if self.store_probe_micro && self.micro.is_some() {
            self.probes.iter().map(|p| self.state.micro(p.node)).collect()
        } else {
            Vec::new()
        };
        Sample {
            step: self.state.c_e.time_index,
            time: self.time(),
            c_e: self.state.c_e.values.clone(),
            probes,
            probe_micro,
        }
    }

    fn extremes(&self, minima: &mut [f64; 6], maxima: &mut [f64; 6]) {
        for (s, values) in self.state.species_values().iter().enumerate() {
            for &v in values.iter() {
                minima[s] = minima[s].min(v);
                maxima[s] = maxima[s].max(v);
            }
        }
    }

    /// Run all remaining steps, sampling every `cadence` steps and at the end.
    pub fn run(mut self) -> Result<Trajectory> {
        let mut minima = [f64::INFINITY; 6];
        let mut maxima = [f64::NEG_INFINITY; 6];
        self.extremes(&mut minima, &mut maxima);
        let initial_maxima = maxima;
        let mut samples = vec![self.sample()];
        for n in 1..=self.steps {
            self.step()?;
            self.extremes(&mut minima, &mut maxima);
            if n % self.cadence == 0 || n == self.steps {
                samples.push(self.sample());
            }
        }
        Ok(Trajectory {
            probes: self.probes,
            samples,
            minima,
            maxima,
            initial_maxima,
            steps: self.steps,
            tau: self.macro_op.tau,
        })
    }
}

/// Prepare and run a full two-scale simulation.
pub fn run_two_scale(config: &ScenarioConfig) -> Result<Trajectory> {
    Simulation::new(config)?.run()
}
