//! Micro-scale dynamics at one macroscopic node: four membrane species on the
//! curve and the intracellular concentration in the cell interior.
//!
//! Reactions are explicit (time level `n-1`, nodal quadrature); diffusion and
//! linear decay are implicit, so every species solves a fixed SPD system
//! `A u^n = M (u^{n-1} + tau * load)` whose factorisation is shared by all
//! macroscopic nodes and all steps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{
    assemble_curve_lumped_mass, assemble_curve_stiffness, assemble_lumped_mass,
    assemble_stiffness, FactoredSpd, Tensor2, DEFAULT_TOLERANCE,
};
use crate::mesh::{CurveMesh, TriMesh};

/// Production term of one species as a function of its own value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Source {
    #[default]
    Zero,
    Constant { value: f64 },
    /// `rate * u`.
    Linear { rate: f64 },
}

impl Source {
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            Source::Zero => 0.0,
            Source::Constant { value } => value,
            Source::Linear { rate } => rate * u,
        }
    }

    fn is_finite(&self) -> bool {
        match *self {
            Source::Zero => true,
            Source::Constant { value } => value.is_finite(),
            Source::Linear { rate } => rate.is_finite(),
        }
    }
}

/// Rate constants, linear decays and production terms.
///
/// Binding `G_e = a_e c_e r_f - b_e r_b`, activation
/// `G_d = a_i r_b p_d - b_i p_a`, and internalisation
/// `G_i = gamma_i p_a - kappa_i c_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionSpec {
    pub a_e: f64,
    pub b_e: f64,
    pub a_i: f64,
    pub b_i: f64,
    pub gamma_i: f64,
    pub kappa_i: f64,
    #[serde(default)]
    pub d_f: f64,
    #[serde(default)]
    pub d_b: f64,
    #[serde(default)]
    pub d_d: f64,
    #[serde(default)]
    pub d_a: f64,
    #[serde(default)]
    pub f_e: Source,
    #[serde(default)]
    pub f_i: Source,
    #[serde(default)]
    pub f_f: Source,
    #[serde(default)]
    pub f_d: Source,
}

impl ReactionSpec {
    /// Every rate, decay and source zero.
    pub fn inert() -> Self {
        ReactionSpec {
            a_e: 0.0,
            b_e: 0.0,
            a_i: 0.0,
            b_i: 0.0,
            gamma_i: 0.0,
            kappa_i: 0.0,
            d_f: 0.0,
            d_b: 0.0,
            d_d: 0.0,
            d_a: 0.0,
            f_e: Source::Zero,
            f_i: Source::Zero,
            f_f: Source::Zero,
            f_d: Source::Zero,
        }
    }

    pub fn decays(&self) -> Decays {
        Decays {
            f: self.d_f,
            b: self.d_b,
            d: self.d_d,
            a: self.d_a,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("a_e", self.a_e),
            ("b_e", self.b_e),
            ("a_i", self.a_i),
            ("b_i", self.b_i),
            ("gamma_i", self.gamma_i),
            ("kappa_i", self.kappa_i),
            ("d_f", self.d_f),
            ("d_b", self.d_b),
            ("d_d", self.d_d),
            ("d_a", self.d_a),
        ];
        for (key, v) in rates {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(
                    &format!("reactions.{key}"),
                    format!("{v} must be finite and non-negative"),
                ));
            }
        }
        for (key, s) in [("f_e", self.f_e), ("f_i", self.f_i), ("f_f", self.f_f), ("f_d", self.f_d)] {
            if !s.is_finite() {
                return Err(Error::invalid(&format!("reactions.{key}"), "must be finite"));
            }
        }
        Ok(())
    }

    pub fn binding(&self, c_e: f64, r_f: f64, r_b: f64) -> f64 {
        self.a_e * c_e * r_f - self.b_e * r_b
    }

    pub fn activation(&self, r_b: f64, p_d: f64, p_a: f64) -> f64 {
        self.a_i * r_b * p_d - self.b_i * p_a
    }

    pub fn internalisation(&self, p_a: f64, c_i: f64) -> f64 {
        self.gamma_i * p_a - self.kappa_i * c_i
    }

    /// Largest step for which the explicit reactions keep a nonnegative state
    /// nonnegative, given bounds on `c_e` and `p_d`.
    pub fn positivity_step_bound(&self, max_c_e: f64, max_p_d: f64) -> f64 {
        let decay = self.d_f.max(self.d_b).max(self.d_d).max(self.d_a);
        let total = self.a_e * max_c_e
            + self.b_e
            + self.a_i * max_p_d
            + self.b_i
            + self.gamma_i
            + self.kappa_i
            + decay;
        if total > 0.0 {
            0.5 / total
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Decays {
    pub f: f64,
    pub b: f64,
    pub d: f64,
    pub a: f64,
}

/// Diffusivities of the membrane species and of the intracellular field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicroDiffusions {
    pub d_f: f64,
    pub d_b: f64,
    pub d_d: f64,
    pub d_a: f64,
    pub d_i: f64,
}

/// Membrane species, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SurfaceSpecies {
    Free,
    Bound,
    Inactive,
    Active,
}

impl SurfaceSpecies {
    pub const ALL: [SurfaceSpecies; 4] = [
        SurfaceSpecies::Free,
        SurfaceSpecies::Bound,
        SurfaceSpecies::Inactive,
        SurfaceSpecies::Active,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SurfaceSpecies::Free => "r_f",
            SurfaceSpecies::Bound => "r_b",
            SurfaceSpecies::Inactive => "p_d",
            SurfaceSpecies::Active => "p_a",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Micro state at one macroscopic node.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroState {
    pub r_f: Vec<f64>,
    pub r_b: Vec<f64>,
    pub p_d: Vec<f64>,
    pub p_a: Vec<f64>,
    pub c_i: Vec<f64>,
    pub time_index: usize,
}

impl MicroState {
    pub fn zeros(curve_nodes: usize, bulk_nodes: usize) -> Self {
        MicroState {
            r_f: vec![0.0; curve_nodes],
            r_b: vec![0.0; curve_nodes],
            p_d: vec![0.0; curve_nodes],
            p_a: vec![0.0; curve_nodes],
            c_i: vec![0.0; bulk_nodes],
            time_index: 0,
        }
    }

    pub fn surface(&self, s: SurfaceSpecies) -> &[f64] {
        match s {
            SurfaceSpecies::Free => &self.r_f,
            SurfaceSpecies::Bound => &self.r_b,
            SurfaceSpecies::Inactive => &self.p_d,
            SurfaceSpecies::Active => &self.p_a,
        }
    }
}

/// Fixed operators shared by every macroscopic node.
#[derive(Debug, Clone)]
pub struct MicroOperators {
    surface: [FactoredSpd; 4],
    bulk: FactoredSpd,
    /// Bulk node of each curve node.
    pub trace: Vec<usize>,
    pub curve_mass: Vec<f64>,
    pub bulk_mass: Vec<f64>,
    pub tau: f64,
    /// `|Y|`, the unit-cell area.
    pub cell_volume: f64,
}

pub fn build_micro_operators(
    curve: &CurveMesh,
    y_i_mesh: &TriMesh,
    diffusions: MicroDiffusions,
    decays: Decays,
    tau: f64,
    cell_volume: f64,
) -> Result<MicroOperators> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::Config(format!("time step {tau} must be positive")));
    }
    if !(cell_volume > 0.0) {
        return Err(Error::Config(format!("cell volume {cell_volume} must be positive")));
    }
    let coeffs = [
        ("d_f", diffusions.d_f),
        ("d_b", diffusions.d_b),
        ("d_d", diffusions.d_d),
        ("d_a", diffusions.d_a),
        ("d_i", diffusions.d_i),
        ("decay f", decays.f),
        ("decay b", decays.b),
        ("decay d", decays.d),
        ("decay a", decays.a),
    ];
    if let Some((name, v)) = coeffs.iter().find(|(_, v)| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::Config(format!(
            "micro coefficient {name} = {v} must be finite and non-negative"
        )));
    }
    for (j, &p) in curve.parent_indices.iter().enumerate() {
        if p >= y_i_mesh.nodes.len() || y_i_mesh.nodes[p] != curve.nodes[j] {
            return Err(Error::Config(format!(
                "curve node {j} does not coincide with its parent node in the cell mesh"
            )));
        }
    }
    let m_curve = assemble_curve_lumped_mass(curve);
    let k_curve = assemble_curve_stiffness(curve, 1.0)?;
    let build = |d: f64, decay: f64| -> Result<FactoredSpd> {
        let diag: Vec<f64> = m_curve.values.iter().map(|m| m * (1.0 + tau * decay)).collect();
        FactoredSpd::new(&k_curve.scaled_plus_diagonal(tau * d, &diag)?, DEFAULT_TOLERANCE)
            .map_err(|e| Error::Config(format!("membrane system is not SPD: {e}")))
    };
    let surface = [
        build(diffusions.d_f, decays.f)?,
        build(diffusions.d_b, decays.b)?,
        build(diffusions.d_d, decays.d)?,
        build(diffusions.d_a, decays.a)?,
    ];
    let m_bulk = assemble_lumped_mass(y_i_mesh);
    let k_bulk = assemble_stiffness(y_i_mesh, Tensor2::identity())?;
    let bulk = FactoredSpd::new(
        &k_bulk.scaled_plus_diagonal(tau * diffusions.d_i, &m_bulk.values)?,
        DEFAULT_TOLERANCE,
    )
    .map_err(|e| Error::Config(format!("intracellular system is not SPD: {e}")))?;
    Ok(MicroOperators {
        surface,
        bulk,
        trace: curve.parent_indices.clone(),
        curve_mass: m_curve.values,
        bulk_mass: m_bulk.values,
        tau,
        cell_volume,
    })
}

impl MicroOperators {
    pub fn curve_nodes(&self) -> usize {
        self.curve_mass.len()
    }

    pub fn bulk_nodes(&self) -> usize {
        self.bulk_mass.len()
    }

    /// `A_s u = M (u_prev + tau * load)` for one membrane species.
    pub fn solve_surface(&self, s: SurfaceSpecies, u_prev: &[f64], load: &[f64]) -> Result<Vec<f64>> {
        let rhs: Vec<f64> = self
            .curve_mass
            .iter()
            .zip(u_prev.iter().zip(load))
            .map(|(m, (u, f))| m * (u + self.tau * f))
            .collect();
        self.surface[s.index()].solve(&rhs)
    }

    /// `A_i c = M_i (c_prev + tau * load) + tau * T^T (M_curve * flux)`, where
    /// `flux` is a membrane nodal field entering through the trace map.
    pub fn solve_bulk(&self, c_prev: &[f64], load: &[f64], flux: &[f64]) -> Result<Vec<f64>> {
        let mut rhs: Vec<f64> = self
            .bulk_mass
            .iter()
            .zip(c_prev.iter().zip(load))
            .map(|(m, (u, f))| m * (u + self.tau * f))
            .collect();
        for (j, &k) in self.trace.iter().enumerate() {
            rhs[k] += self.tau * self.curve_mass[j] * flux[j];
        }
        self.bulk.solve(&rhs)
    }
}

fn check_finite(values: &[f64], step: usize, species: &'static str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(node) => Err(Error::Step {
            step,
            species,
            node,
        }),
        None => Ok(()),
    }
}

/// Advance one macroscopic node's micro state by one step.
pub fn micro_step(
    state: &MicroState,
    c_e_node: f64,
    spec: &ReactionSpec,
    ops: &MicroOperators,
) -> Result<MicroState> {
    let step = state.time_index + 1;
    let n = ops.curve_nodes();
    let mut loads = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut g_i = vec![0.0; n];
    for j in 0..n {
        let (rf, rb, pd, pa) = (state.r_f[j], state.r_b[j], state.p_d[j], state.p_a[j]);
        let ge = spec.binding(c_e_node, rf, rb);
        let gd = spec.activation(rb, pd, pa);
        let gi = spec.internalisation(pa, state.c_i[ops.trace[j]]);
        loads[0][j] = spec.f_f.eval(rf) - ge;
        loads[1][j] = ge - gd;
        loads[2][j] = spec.f_d.eval(pd) - gd;
        loads[3][j] = gd - gi;
        g_i[j] = gi;
    }
    for (s, load) in SurfaceSpecies::ALL.iter().zip(&loads) {
        check_finite(load, step, s.name())?;
    }
    check_finite(&g_i, step, "c_i")?;
    let bulk_load: Vec<f64> = state.c_i.iter().map(|&c| spec.f_i.eval(c)).collect();
    check_finite(&bulk_load, step, "c_i")?;

    let mut next = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
    for (k, s) in SurfaceSpecies::ALL.into_iter().enumerate() {
        next[k] = ops.solve_surface(s, state.surface(s), &loads[k])?;
        check_finite(&next[k], step, s.name())?;
    }
    let c_i = ops.solve_bulk(&state.c_i, &bulk_load, &g_i)?;
    check_finite(&c_i, step, "c_i")?;
    let [r_f, r_b, p_d, p_a] = next;
    Ok(MicroState {
        r_f,
        r_b,
        p_d,
        p_a,
        c_i,
        time_index: step,
    })
}

/// `1/|Y| sum_j m_j G_e(c_e, r_f, r_b)_j`: the ligand flux into the membrane.
pub fn coupling_flux(state: &MicroState, c_e_node: f64, spec: &ReactionSpec, ops: &MicroOperators) -> f64 {
    let total: f64 = ops
        .curve_mass
        .iter()
        .enumerate()
        .map(|(j, m)| m * spec.binding(c_e_node, state.r_f[j], state.r_b[j]))
        .sum();
    total / ops.cell_volume
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{extract_boundary_curve, generate_mesh, DiscMap, GeometrySpec, Marker};

    fn disc(level: u32) -> (CurveMesh, TriMesh) {
        let m = generate_mesh(
            &GeometrySpec::MappedDisc {
                map: DiscMap::Identity,
                rings: 1,
                segments: 8,
            },
            level,
        )
        .unwrap();
        (extract_boundary_curve(&m, Marker::Outer).unwrap(), m)
    }

    fn diffusions(d: f64) -> MicroDiffusions {
        MicroDiffusions {
            d_f: d,
            d_b: d,
            d_d: d,
            d_a: d,
            d_i: d,
        }
    }

    fn wavy_state(curve: &CurveMesh, mesh: &TriMesh) -> MicroState {
        let f = |p: [f64; 2], k: f64| 1.0 + 0.5 * (k * p[0] + 2.0 * p[1]).sin();
        MicroState {
            r_f: curve.nodes.iter().map(|&p| f(p, 1.0)).collect(),
            r_b: curve.nodes.iter().map(|&p| f(p, 2.0)).collect(),
            p_d: curve.nodes.iter().map(|&p| f(p, 3.0)).collect(),
            p_a: curve.nodes.iter().map(|&p| f(p, 4.0)).collect(),
            c_i: mesh.nodes.iter().map(|&p| f(p, 5.0)).collect(),
            time_index: 0,
        }
    }

    #[test]
    fn no_diffusion_and_no_decay_gives_lumped_mass() {
        let (c, m) = disc(1);
        let ops = build_micro_operators(&c, &m, diffusions(0.0), Decays::default(), 0.1, 16.0).unwrap();
        let u0: Vec<f64> = (0..c.node_count()).map(|j| j as f64).collect();
        let u = ops.solve_surface(SurfaceSpecies::Free, &u0, &vec![0.0; u0.len()]).unwrap();
        for (a, b) in u.iter().zip(&u0) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn unit_decay_halves() {
        let (c, m) = disc(1);
        let decays = Decays {
            f: 1.0,
            b: 1.0,
            d: 1.0,
            a: 1.0,
        };
        let ops = build_micro_operators(&c, &m, diffusions(0.0), decays, 1.0, 16.0).unwrap();
        let u0: Vec<f64> = (0..c.node_count()).map(|j| 1.0 + j as f64).collect();
        for s in SurfaceSpecies::ALL {
            let u = ops.solve_surface(s, &u0, &vec![0.0; u0.len()]).unwrap();
            for (a, b) in u.iter().zip(&u0) {
                assert!((a - b / 2.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn negative_inputs_are_config_errors() {
        let (c, m) = disc(0);
        assert!(matches!(
            build_micro_operators(&c, &m, diffusions(-1.0), Decays::default(), 0.1, 16.0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            build_micro_operators(&c, &m, diffusions(1.0), Decays::default(), 0.0, 16.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn inert_reactions_preserve_equilibrium() {
        let (c, m) = disc(2);
        let ops = build_micro_operators(&c, &m, diffusions(3.0), Decays::default(), 0.05, 16.0).unwrap();
        let mut s = MicroState::zeros(c.node_count(), m.node_count());
        s.r_f.fill(0.7);
        s.c_i.fill(2.0);
        let next = micro_step(&s, 0.4, &ReactionSpec::inert(), &ops).unwrap();
        assert!(next.r_f.iter().all(|v| (v - 0.7).abs() < 1e-13));
        assert!(next.c_i.iter().all(|v| (v - 2.0).abs() < 1e-13));
        assert_eq!(next.time_index, 1);
    }

    #[test]
    fn explicit_euler_caricature() {
        let (c, m) = disc(1);
        let ops = build_micro_operators(&c, &m, diffusions(0.0), Decays::default(), 0.1, 16.0).unwrap();
        let mut spec = ReactionSpec::inert();
        spec.a_e = 1.0;
        let mut s = MicroState::zeros(c.node_count(), m.node_count());
        s.r_f.fill(1.0);
        let next = micro_step(&s, 1.0, &spec, &ops).unwrap();
        assert!(next.r_f.iter().all(|v| (v - 0.9).abs() < 1e-14));
        assert!(next.r_b.iter().all(|v| (v - 0.1).abs() < 1e-14));
    }

    #[test]
    fn internalisation_transfers_exactly() {
        let (c, m) = disc(2);
        let ops = build_micro_operators(&c, &m, diffusions(1.0), Decays::default(), 0.1, 16.0).unwrap();
        let mut spec = ReactionSpec::inert();
        spec.gamma_i = 1.0;
        let mut s = MicroState::zeros(c.node_count(), m.node_count());
        s.p_a.fill(0.8);
        let next = micro_step(&s, 0.0, &spec, &ops).unwrap();
        let mc = |u: &[f64]| ops.curve_mass.iter().zip(u).map(|(a, b)| a * b).sum::<f64>();
        let mb = |u: &[f64]| ops.bulk_mass.iter().zip(u).map(|(a, b)| a * b).sum::<f64>();
        let lost = mc(&s.p_a) - mc(&next.p_a);
        let gained = mb(&next.c_i) - mb(&s.c_i);
        assert!(lost > 0.0);
        assert!((lost - gained).abs() <= 1e-13 * lost);
    }

    #[test]
    fn coupling_flux_closed_form() {
        let (c, m) = disc(1);
        let ops = build_micro_operators(&c, &m, diffusions(1.0), Decays::default(), 0.1, 16.0).unwrap();
        let mut spec = ReactionSpec::inert();
        let mut s = MicroState::zeros(c.node_count(), m.node_count());
        assert_eq!(coupling_flux(&s, 1.0, &spec, &ops), 0.0);
        spec.a_e = 2.0;
        spec.b_e = 0.5;
        s.r_f.fill(0.3);
        s.r_b.fill(0.4);
        let l = c.total_length();
        let expect = l / 16.0 * (2.0 * 1.5 * 0.3 - 0.5 * 0.4);
        assert!((coupling_flux(&s, 1.5, &spec, &ops) - expect).abs() < 1e-15);
        assert_eq!(coupling_flux(&s, 1.5, &ReactionSpec::inert(), &ops), 0.0);
    }

    #[test]
    fn blow_up_names_species() {
        let (c, m) = disc(0);
        let ops = build_micro_operators(&c, &m, diffusions(1.0), Decays::default(), 0.1, 16.0).unwrap();
        let mut spec = ReactionSpec::inert();
        spec.a_i = 1.0;
        let mut s = wavy_state(&c, &m);
        s.r_b[2] = f64::MAX;
        s.p_d[2] = f64::MAX;
        match micro_step(&s, 0.0, &spec, &ops) {
            Err(Error::Step { species, node, step }) => {
                assert_eq!((species, node, step), ("r_b", 2, 1));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn combined_membrane_and_interior_amount_is_conserved() {
        let (c, m) = disc(2);
        let ops = build_micro_operators(&c, &m, diffusions(0.5), Decays::default(), 0.01, 16.0).unwrap();
        let spec = ReactionSpec {
            a_i: 3.0,
            b_i: 1.0,
            gamma_i: 2.0,
            kappa_i: 1.0,
            ..ReactionSpec::inert()
        };
        let total = |s: &MicroState| {
            let mc: f64 = (0..c.node_count())
                .map(|j| ops.curve_mass[j] * (s.r_f[j] + s.r_b[j] + s.p_a[j]))
                .sum();
            mc + ops.bulk_mass.iter().zip(&s.c_i).map(|(a, b)| a * b).sum::<f64>()
        };
        let mut s = wavy_state(&c, &m);
        let t0 = total(&s);
        for _ in 0..20 {
            s = micro_step(&s, 0.0, &spec, &ops).unwrap();
        }
        assert!((total(&s) - t0).abs() <= 1e-12 * t0);
    }
}
