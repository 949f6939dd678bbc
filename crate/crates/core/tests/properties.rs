//! Randomised invariants of the mesh, assembly, solver, cell, micro,
//! benchmark and configuration layers.

use proptest::prelude::*;

use tsfem::benchmark::compute_eoc;
use tsfem::cell::{homogenized_tensor, solve_cell_problems, CellShape};
use tsfem::config::{bio_scenario, Resolution, ScenarioConfig};
use tsfem::fem::{
    assemble_curve_lumped_mass, assemble_lumped_mass, assemble_stiffness, solve_spd, SparseOperator, Tensor2,
};
use tsfem::macroscale::{BoundarySpec, DirichletRegion};
use tsfem::mesh::{
    extract_boundary_curve, generate_mesh, mesh_stats, DiscMap, GeometrySpec, HoleShape, Marker,
    PerforatedSquare, TriMesh,
};
use tsfem::micro::{
    build_micro_operators, coupling_flux, micro_step, Decays, MicroDiffusions, MicroOperators, MicroState,
    ReactionSpec,
};

fn square(n: usize) -> TriMesh {
    generate_mesh(
        &GeometrySpec::Square {
            lower: [0.0, 0.0],
            upper: [1.0, 1.0],
            divisions: n,
        },
        0,
    )
    .unwrap()
}

/// Square mesh with interior nodes displaced by up to 20% of the spacing.
fn jittered(n: usize, jitter: &[(f64, f64)]) -> TriMesh {
    let mut m = square(n);
    let h = 1.0 / n as f64;
    let boundary = m.boundary_nodes();
    for (i, p) in m.nodes.iter_mut().enumerate() {
        if boundary.binary_search(&i).is_err() {
            let (dx, dy) = jitter[i % jitter.len()];
            p[0] += 0.2 * h * dx;
            p[1] += 0.2 * h * dy;
        }
    }
    m.validate().unwrap();
    m
}

fn spd_tensor() -> impl Strategy<Value = Tensor2> {
    (0.1f64..3.0, 0.1f64..3.0, 0.0f64..std::f64::consts::PI).prop_map(|(l1, l2, angle)| {
        let (c, s) = (angle.cos(), angle.sin());
        Tensor2([
            [l1 * c * c + l2 * s * s, (l1 - l2) * c * s],
            [(l1 - l2) * c * s, l1 * s * s + l2 * c * c],
        ])
    })
}

/// Dense Gaussian elimination with partial pivoting.
fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

fn micro_fixture(tau: f64) -> (MicroOperators, usize, usize) {
    let interior = generate_mesh(
        &GeometrySpec::MappedDisc {
            map: DiscMap::Identity,
            rings: 1,
            segments: 8,
        },
        1,
    )
    .unwrap();
    let curve = extract_boundary_curve(&interior, Marker::Outer).unwrap();
    let ops = build_micro_operators(
        &curve,
        &interior,
        MicroDiffusions {
            d_f: 0.3,
            d_b: 0.2,
            d_d: 0.1,
            d_a: 0.4,
            d_i: 1.5,
        },
        Decays::default(),
        tau,
        16.0,
    )
    .unwrap();
    (ops, curve.node_count(), interior.node_count())
}

fn state_from(seed: &[f64], nc: usize, nb: usize) -> MicroState {
    let mut s = MicroState::zeros(nc, nb);
    let mut k = 0;
    let mut next = || {
        k += 1;
        seed[k % seed.len()] * (1.0 + 0.3 * ((k * 7919) % 13) as f64 / 13.0)
    };
    for v in s.r_f.iter_mut().chain(&mut s.r_b).chain(&mut s.p_d).chain(&mut s.p_a) {
        *v = next();
    }
    for v in s.c_i.iter_mut() {
        *v = next();
    }
    s
}

fn rates() -> impl Strategy<Value = ReactionSpec> {
    (0.0f64..50.0, 0.0f64..10.0, 0.0f64..100.0, 0.0f64..10.0, 0.0f64..5.0, 0.0f64..5.0).prop_map(
        |(a_e, b_e, a_i, b_i, gamma_i, kappa_i)| ReactionSpec {
            a_e,
            b_e,
            a_i,
            b_i,
            gamma_i,
            kappa_i,
            ..ReactionSpec::inert()
        },
    )
}

fn weighted(m: &[f64], u: &[f64]) -> f64 {
    m.iter().zip(u).map(|(a, b)| a * b).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn stiffness_rows_sum_to_zero(
        n in 2usize..7,
        jitter in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..20),
        d in spd_tensor(),
    ) {
        let m = jittered(n, &jitter);
        let k = assemble_stiffness(&m, d).unwrap();
        let scale = (0..k.dimension()).map(|i| k.row(i).1.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        for s in k.row_sums() {
            prop_assert!(s.abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn lumped_mass_totals_match_measure(
        n in 1usize..7,
        jitter in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..20),
        radius in 0.3f64..1.5,
    ) {
        let m = jittered(n, &jitter);
        let total = assemble_lumped_mass(&m).sum();
        prop_assert!((total - m.total_area()).abs() <= 1e-13 * m.total_area());
        let hole = generate_mesh(&GeometrySpec::PerforatedSquare(PerforatedSquare {
            hole: HoleShape::Circle { radius },
            lower: [-2.0, -2.0],
            upper: [2.0, 2.0],
            face_segments: 4,
            layers: 4,
            grading: 1.0,
            face_clustering: [0.0, 0.0],
            star_centre: None,
        }), 0).unwrap();
        let curve = extract_boundary_curve(&hole, Marker::Hole).unwrap();
        let length = assemble_curve_lumped_mass(&curve).sum();
        prop_assert!((length - curve.total_length()).abs() <= 1e-13 * length);
    }

    #[test]
    fn assembly_is_permutation_equivariant(
        n in 2usize..6,
        keys in prop::collection::vec(any::<u32>(), 36),
        d in spd_tensor(),
    ) {
        let m = square(n);
        let count = m.node_count();
        let mut perm: Vec<usize> = (0..count).collect();
        perm.sort_by_key(|&i| (keys[i % keys.len()], i));
        // new label of old node i is perm[i]
        let mut renamed = m.clone();
        for (i, p) in m.nodes.iter().enumerate() {
            renamed.nodes[perm[i]] = *p;
        }
        for t in renamed.triangles.iter_mut() {
            *t = [perm[t[0]], perm[t[1]], perm[t[2]]];
        }
        for e in renamed.boundary_edges.iter_mut() {
            e.nodes = [perm[e.nodes[0]], perm[e.nodes[1]]];
        }
        let a = assemble_stiffness(&m, d).unwrap();
        let b = assemble_stiffness(&renamed, d).unwrap();
        let ma = assemble_lumped_mass(&m);
        let mb = assemble_lumped_mass(&renamed);
        for i in 0..count {
            prop_assert!((ma.values[i] - mb.values[perm[i]]).abs() <= 1e-15);
            for j in 0..count {
                prop_assert!((a.get(i, j) - b.get(perm[i], perm[j])).abs() <= 1e-13);
            }
        }
    }

    #[test]
    fn pcg_matches_dense_solve(
        n in 2usize..60,
        entries in prop::collection::vec((0usize..60, 0usize..60, -1.0f64..1.0), 0..200),
        rhs_seed in prop::collection::vec(-1.0f64..1.0, 60),
    ) {
        // diagonally dominant symmetric matrix
        let mut triplets = Vec::new();
        let mut diag = vec![0.5; n];
        for &(i, j, v) in &entries {
            let (i, j) = (i % n, j % n);
            if i != j {
                triplets.push((i, j, v));
                triplets.push((j, i, v));
                diag[i] += v.abs();
                diag[j] += v.abs();
            }
        }
        for (i, d) in diag.iter().enumerate() {
            triplets.push((i, i, *d));
        }
        let a = SparseOperator::from_triplets(n, &triplets, true);
        let b: Vec<f64> = rhs_seed[..n].to_vec();
        let x = solve_spd(&a, &b, 1e-13).unwrap();
        let y = dense_solve(a.to_dense(), b);
        let scale = y.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for (u, v) in x.iter().zip(&y) {
            prop_assert!((u - v).abs() <= 1e-10 * scale.max(1e-300));
        }
    }

    #[test]
    fn refinement_halves_mesh_size(radius in 0.4f64..1.6, segments in 2usize..5) {
        let spec = GeometrySpec::PerforatedSquare(PerforatedSquare {
            hole: HoleShape::Circle { radius },
            lower: [-2.0, -2.0],
            upper: [2.0, 2.0],
            face_segments: 2 * segments,
            layers: 3,
            grading: 1.0,
            face_clustering: [0.0, 0.0],
            star_centre: None,
        });
        let h0 = mesh_stats(&generate_mesh(&spec, 1).unwrap()).h_max;
        let h1 = mesh_stats(&generate_mesh(&spec, 2).unwrap()).h_max;
        prop_assert!(h1 <= 0.5 * h0 * 1.1 && h1 >= 0.5 * h0 / 1.1, "{h0} -> {h1}");
        let disc = GeometrySpec::MappedDisc { map: DiscMap::Ellipse { a: radius, b: 1.0 }, rings: 2, segments: 4 * segments };
        let d0 = mesh_stats(&generate_mesh(&disc, 1).unwrap()).h_max;
        let d1 = mesh_stats(&generate_mesh(&disc, 2).unwrap()).h_max;
        prop_assert!(d1 <= 0.5 * d0 * 1.1 && d1 >= 0.5 * d0 / 1.1, "{d0} -> {d1}");
    }

    #[test]
    fn symmetric_holes_give_reflection_invariant_meshes(c0 in 0.3f64..3.0, c1 in 0.3f64..3.0) {
        let m = CellShape::Ellipse { coeffs: [c0, c1] }.exterior_mesh([-2.0, -2.0], [2.0, 2.0], 0).unwrap();
        for p in &m.nodes {
            for q in [[-p[0], p[1]], [p[0], -p[1]]] {
                let found = m.nodes.iter().any(|r| (r[0] - q[0]).abs() < 1e-9 && (r[1] - q[1]).abs() < 1e-9);
                prop_assert!(found, "{q:?} missing");
            }
        }
    }

    #[test]
    fn micro_amount_is_conserved_without_binding(
        spec in rates(),
        seed in prop::collection::vec(0.0f64..2.0, 1..8),
        c_e in 0.0f64..2.0,
    ) {
        let spec = ReactionSpec { a_e: 0.0, b_e: 0.0, ..spec };
        let (ops, nc, nb) = micro_fixture(1e-3);
        let amount = |s: &MicroState| {
            weighted(&ops.curve_mass, &s.r_f) + weighted(&ops.curve_mass, &s.r_b) + weighted(&ops.curve_mass, &s.p_a)
                + weighted(&ops.bulk_mass, &s.c_i)
        };
        let mut s = state_from(&seed, nc, nb);
        let start = amount(&s);
        for _ in 0..5 {
            s = micro_step(&s, c_e, &spec, &ops).unwrap();
        }
        prop_assert!((amount(&s) - start).abs() <= 1e-10 * start.max(1e-12));
    }

    #[test]
    fn receptor_balance_follows_binding_flux(
        spec in rates(),
        seed in prop::collection::vec(0.0f64..2.0, 1..8),
        c_e in 0.0f64..2.0,
    ) {
        let spec = ReactionSpec { a_i: 0.0, b_i: 0.0, gamma_i: 0.0, kappa_i: 0.0, ..spec };
        let (ops, nc, nb) = micro_fixture(1e-3);
        let s = state_from(&seed, nc, nb);
        let next = micro_step(&s, c_e, &spec, &ops).unwrap();
        let total = |s: &MicroState| weighted(&ops.curve_mass, &s.r_f) + weighted(&ops.curve_mass, &s.r_b);
        let scale = total(&s).max(1e-12);
        prop_assert!((total(&next) - total(&s)).abs() <= 1e-10 * scale);
        let free_change = weighted(&ops.curve_mass, &next.r_f) - weighted(&ops.curve_mass, &s.r_f);
        let expect = -ops.tau * ops.cell_volume * coupling_flux(&s, c_e, &spec, &ops);
        prop_assert!((free_change - expect).abs() <= 1e-10 * scale);
    }

    #[test]
    fn positivity_under_step_bound(
        spec in rates(),
        seed in prop::collection::vec(0.0f64..2.0, 1..8),
        c_e in 0.0f64..2.0,
    ) {
        let (_, nc, nb) = micro_fixture(1e-3);
        let s = state_from(&seed, nc, nb);
        let max_pd = s.p_d.iter().cloned().fold(0.0, f64::max);
        let tau = spec.positivity_step_bound(c_e, max_pd).min(0.1);
        let (ops, _, _) = micro_fixture(tau);
        let next = micro_step(&s, c_e, &spec, &ops).unwrap();
        for v in next.r_f.iter().chain(&next.r_b).chain(&next.p_d).chain(&next.p_a).chain(&next.c_i) {
            prop_assert!(*v >= -1e-12, "{v}");
        }
    }

    #[test]
    fn micro_steps_commute_with_node_permutation(
        seeds in prop::collection::vec(prop::collection::vec(0.0f64..2.0, 1..5), 2..6),
        spec in rates(),
    ) {
        let (ops, nc, nb) = micro_fixture(1e-3);
        let states: Vec<MicroState> = seeds.iter().map(|s| state_from(s, nc, nb)).collect();
        let c_e: Vec<f64> = (0..states.len()).map(|k| 0.1 * k as f64).collect();
        let forward: Vec<MicroState> = states.iter().zip(&c_e).map(|(s, c)| micro_step(s, *c, &spec, &ops).unwrap()).collect();
        let backward: Vec<MicroState> = states.iter().zip(&c_e).rev().map(|(s, c)| micro_step(s, *c, &spec, &ops).unwrap()).collect();
        for (a, b) in forward.iter().zip(backward.iter().rev()) {
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn eoc_recovers_power_laws(c in 1e-6f64..1e3, p in 0.5f64..4.0, scale in 1e-6f64..1e6) {
        let hs = [0.5f64, 0.25, 0.125, 0.0625];
        let errors: Vec<f64> = hs.iter().map(|&h| c * h.powf(p)).collect();
        let scaled: Vec<f64> = errors.iter().map(|e| scale * e).collect();
        let a = compute_eoc(&errors, &hs).unwrap();
        let b = compute_eoc(&scaled, &hs).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - p).abs() <= 1e-12 * p.max(1.0) * 10.0);
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn config_round_trips(
        tau in 1e-5f64..1e-2,
        steps in 1usize..1000,
        a_i in 0.0f64..1e4,
        threshold in 0.0f64..0.1,
        dziuk in any::<bool>(),
        probes in prop::collection::vec((0.0f64..0.1, 0.0f64..0.1), 0..4),
    ) {
        let cell = if dziuk { CellShape::Dziuk } else { CellShape::Ellipse { coeffs: [0.26, 5.0] } };
        let mut c = bio_scenario(cell, Resolution::desk(), tau, tau * steps as f64);
        c.reactions.a_i = a_i;
        c.bc = BoundarySpec { dirichlet: DirichletRegion::MaxBelow { threshold }, value: 1.0 };
        c.output.probes = probes.iter().map(|&(x, y)| [x, y]).collect();
        let text = c.to_toml_string().unwrap();
        let back = ScenarioConfig::from_toml_str(&text, "p.toml").unwrap();
        prop_assert_eq!(back, c);
    }
}

#[test]
fn homogenised_tensor_is_linear_in_the_coefficient() {
    let m = CellShape::Circle { radius: 1.0 }.exterior_mesh([-2.0, -2.0], [2.0, 2.0], 0).unwrap();
    let d = Tensor2([[1.0, 0.2], [0.2, 0.5]]);
    let sols = solve_cell_problems(&m, d).unwrap();
    let base = homogenized_tensor(&m, d, &sols, 16.0).unwrap();
    for lambda in [1e-3, 0.5, 7.0] {
        let scaled_sols = solve_cell_problems(&m, d.scaled(lambda)).unwrap();
        let t = homogenized_tensor(&m, d.scaled(lambda), &scaled_sols, 16.0).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((t.0[i][j] - lambda * base.0[i][j]).abs() <= 1e-12 * lambda);
            }
        }
    }
}

#[test]
fn homogenised_diagonal_decreases_with_hole_size() {
    let mut previous = f64::INFINITY;
    for radius in [0.4, 0.8, 1.2, 1.6] {
        let m = CellShape::Circle { radius }.exterior_mesh([-2.0, -2.0], [2.0, 2.0], 1).unwrap();
        let sols = solve_cell_problems(&m, Tensor2::identity()).unwrap();
        let t = homogenized_tensor(&m, Tensor2::identity(), &sols, 16.0).unwrap();
        assert!(t.0[0][0] < previous * 1.01, "radius {radius}: {} !< {previous}", t.0[0][0]);
        assert!(t.0[0][1].abs() <= 1e-2 * (t.0[0][0] + t.0[1][1]));
        previous = t.0[0][0];
    }
}
