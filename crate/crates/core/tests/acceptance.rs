//! Acceptance suite. Each test prints one `PASS` or `FAIL` line with the
//! measured values and the pinned tolerance, then asserts.
//!
//! Run with `cargo test -p tsfem-core --test acceptance -- --nocapture --test-threads 1`.

use std::time::Instant;

use tsfem::benchmark::{compute_eoc, run_benchmark, time_error_ratios, SPECIES as BENCH_SPECIES};
use tsfem::cell::{homogenize, CellShape};
use tsfem::config::{bio_scenario, Resolution};
use tsfem::fem::Tensor2;
use tsfem::macroscale::{run_two_scale, BoundarySpec, Simulation, Trajectory, SPECIES};
use tsfem::micro::ReactionSpec;

const LOWER: [f64; 2] = [-2.0, -2.0];
const UPPER: [f64; 2] = [2.0, 2.0];
const CELL_VOLUME: f64 = 16.0;

fn report(id: u32, name: &str, ok: bool, detail: &str) {
    println!("criterion {id} {}: {name}: {detail}", if ok { "PASS" } else { "FAIL" });
}

fn within(value: f64, target: f64, rel: f64) -> bool {
    (value - target).abs() <= rel * target.abs()
}

fn tensor_criterion(id: u32, name: &str, shape: CellShape, target: [f64; 2], check_off_diagonal: bool) {
    // allowed relative deviation of each diagonal entry
    const BAND: f64 = 0.03;
    const OFF_DIAGONAL: f64 = 1e-5;
    const MIN_DOFS: usize = 100_000;
    const LEVEL: u32 = 4;
    let start = Instant::now();
    let mesh = shape.exterior_mesh(LOWER, UPPER, LEVEL).expect("mesh");
    let h = homogenize(&mesh, Tensor2::scalar(1e-2), CELL_VOLUME).expect("cell problems");
    let d = h.d_hom.0;
    let off = d[0][1].abs().max(d[1][0].abs());
    let ok = h.dofs >= MIN_DOFS
        && within(d[0][0], target[0], BAND)
        && within(d[1][1], target[1], BAND)
        && (!check_off_diagonal || off <= OFF_DIAGONAL);
    report(
        id,
        name,
        ok,
        &format!(
            "dofs {} (>= {MIN_DOFS}), diag ({:.5e}, {:.5e}) vs ({:.4e}, {:.4e}) deviations ({:+.2}%, {:+.2}%) band {:.0}%, off-diagonal {:.1e}{}, {:.1} s",
            h.dofs,
            d[0][0],
            d[1][1],
            target[0],
            target[1],
            100.0 * (d[0][0] / target[0] - 1.0),
            100.0 * (d[1][1] / target[1] - 1.0),
            100.0 * BAND,
            off,
            if check_off_diagonal { format!(" (<= {OFF_DIAGONAL:.0e})") } else { String::new() },
            start.elapsed().as_secs_f64()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_1_ellipse_tensor() {
    tensor_criterion(
        1,
        "ellipse homogenised tensor",
        CellShape::Ellipse { coeffs: [0.26, 5.0] },
        [8.167e-3, 1.841e-3],
        true,
    );
}

#[test]
fn criterion_2_dziuk_tensor() {
    tensor_criterion(2, "dziuk homogenised tensor", CellShape::Dziuk, [6.556e-3, 6.149e-3], false);
}

#[test]
fn criterion_3_degenerate_geometries() {
    const EXACT: f64 = 1e-10;
    const ISOTROPY: f64 = 0.01;
    let d_e = 1e-2;
    let none = CellShape::None.exterior_mesh(LOWER, UPPER, 2).unwrap();
    let h = homogenize(&none, Tensor2::scalar(d_e), CELL_VOLUME).unwrap();
    let err = (0..2)
        .flat_map(|i| (0..2).map(move |j| (i, j)))
        .map(|(i, j)| (h.d_hom.0[i][j] - if i == j { d_e } else { 0.0 }).abs())
        .fold(0.0, f64::max);
    let circle = CellShape::Circle { radius: 1.0 }.exterior_mesh(LOWER, UPPER, 2).unwrap();
    let c = homogenize(&circle, Tensor2::scalar(d_e), CELL_VOLUME).unwrap().d_hom.0;
    let gap = (c[0][0] - c[1][1]).abs();
    let ok = err <= EXACT && h.theta_e == 1.0 && gap <= ISOTROPY * c[0][0];
    report(
        3,
        "degenerate geometries",
        ok,
        &format!(
            "no hole: max |d_hom - d_e I| {err:.1e} (<= {EXACT:.0e}), theta_e {}; circle: |d11 - d22| / d11 {:.1e} (<= {ISOTROPY})",
            h.theta_e,
            gap / c[0][0]
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_4_benchmark_convergence() {
    const L2H1: (f64, f64) = (0.85, 1.25);
    const LINFL2: (f64, f64) = (1.7, 2.3);
    let start = Instant::now();
    let records: Vec<_> = (1..=4).map(|l| run_benchmark(l).unwrap()).collect();
    let hs: Vec<f64> = records.iter().map(|r| r.h_max()).collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for (s, name) in BENCH_SPECIES.iter().enumerate() {
        let a: Vec<f64> = records.iter().map(|r| r.l2h1[s]).collect();
        let b: Vec<f64> = records.iter().map(|r| r.linfl2[s]).collect();
        let ea = compute_eoc(&a, &hs).unwrap();
        let eb = compute_eoc(&b, &hs).unwrap();
        let ma = 0.5 * (ea[1] + ea[2]);
        let mb = 0.5 * (eb[1] + eb[2]);
        ok &= (L2H1.0..=L2H1.1).contains(&ma) && (LINFL2.0..=LINFL2.1).contains(&mb);
        parts.push(format!("{name} {ma:.3}/{mb:.3}"));
    }
    report(
        4,
        "benchmark convergence rates",
        ok,
        &format!(
            "mean of two finest EOCs L2(H1)/Linf(L2): {} (bands [{}, {}] and [{}, {}]), levels 1-4, {:.0} s",
            parts.join(", "),
            L2H1.0,
            L2H1.1,
            LINFL2.0,
            LINFL2.1,
            start.elapsed().as_secs_f64()
        ),
    );
    assert!(ok);
}

fn small_two_scale(reactions: ReactionSpec) -> Simulation {
    let mut c = bio_scenario(
        CellShape::Ellipse { coeffs: [0.26, 5.0] },
        Resolution {
            macro_divisions: 6,
            macro_level: 0,
            interior_level: 1,
            exterior_level: 0,
        },
        1e-3,
        1.0,
    );
    c.reactions = reactions;
    c.bc = BoundarySpec::neumann();
    let mut sim = Simulation::new(&c).unwrap();
    for (v, p) in sim.state.c_e.values.iter_mut().zip(&sim.macro_mesh.nodes) {
        *v = 0.5 + 0.4 * (20.0 * p[0]).sin() * (30.0 * p[1]).cos();
    }
    // give the species that start at zero a nonzero, non-uniform amount
    let s = &mut sim.state;
    for (i, v) in s.r_b.values.iter_mut().enumerate() {
        *v = 0.1 + 0.05 * ((i % 7) as f64);
    }
    for (i, v) in s.p_a.values.iter_mut().enumerate() {
        *v = 0.2 + 0.03 * ((i % 5) as f64);
    }
    sim
}

/// Macroscopic-weighted totals: `c_e` and the five micro species.
fn totals(sim: &Simulation) -> [f64; 6] {
    let m = &sim.macro_op.mass;
    let micro = sim.micro.as_ref().unwrap();
    let field = |f: &tsfem::macroscale::TwoScaleField, w: &[f64]| -> f64 {
        (0..f.macro_nodes)
            .map(|k| m[k] * f.node(k).iter().zip(w).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    };
    let s = &sim.state;
    let cm = &micro.ops.curve_mass;
    [
        sim.macro_mass(),
        field(&s.r_f, cm),
        field(&s.r_b, cm),
        field(&s.p_d, cm),
        field(&s.p_a, cm),
        field(&s.c_i, &micro.ops.bulk_mass),
    ]
}

#[test]
fn criterion_5_conservation() {
    const REL: f64 = 1e-10;
    const STEPS: usize = 100;
    let mut inert = small_two_scale(ReactionSpec::inert());
    let start = totals(&inert);
    for _ in 0..STEPS {
        inert.step().unwrap();
    }
    let end = totals(&inert);
    let drift: Vec<f64> = start.iter().zip(&end).map(|(a, b)| (a - b).abs() / a.abs()).collect();
    let worst_inert = drift.iter().cloned().fold(0.0, |a: f64, b| if b.is_nan() { f64::INFINITY } else { a.max(b) });

    let exchange = ReactionSpec {
        gamma_i: 2.0,
        kappa_i: 1.0,
        ..ReactionSpec::inert()
    };
    let mut sim = small_two_scale(exchange);
    let combined = |t: [f64; 6]| t[4] + t[5];
    let before = combined(totals(&sim));
    for _ in 0..STEPS {
        sim.step().unwrap();
    }
    let after = combined(totals(&sim));
    let exchange_drift = (after - before).abs() / before;
    let ok = worst_inert <= REL && exchange_drift <= REL;
    let names: Vec<String> = SPECIES.iter().zip(&drift).map(|(n, d)| format!("{n} {d:.1e}")).collect();
    report(
        5,
        "discrete conservation",
        ok,
        &format!(
            "{STEPS} inert steps, relative drift {} ; exchange-only p_a + c_i drift {exchange_drift:.1e} (<= {REL:.0e})",
            names.join(", ")
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_6_coupling_bookkeeping() {
    const REL: f64 = 1e-10;
    let mut c = bio_scenario(CellShape::Dziuk, Resolution::desk(), 5e-4, 1.0);
    c.bc = BoundarySpec::neumann();
    let mut sim = Simulation::new(&c).unwrap();
    for (v, p) in sim.state.c_e.values.iter_mut().zip(&sim.macro_mesh.nodes) {
        *v = 1.0 - 5.0 * p[0];
    }
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let before = sim.macro_mass();
        sim.step().unwrap();
        let tau = sim.macro_op.tau;
        let expect: f64 = -tau * sim.macro_op.mass.iter().zip(&sim.last_coupling).map(|(m, g)| m * g).sum::<f64>();
        let change = sim.macro_mass() - before;
        worst = worst.max((change - expect).abs() / expect.abs());
    }
    let ok = worst <= REL;
    report(
        6,
        "coupling bookkeeping",
        ok,
        &format!("50 steps, worst relative mismatch of mass change vs -tau sum m g: {worst:.1e} (<= {REL:.0e})"),
    );
    assert!(ok);
}

/// Positivity and boundedness of a trajectory; returns (ok, description).
fn bounds_check(t: &Trajectory) -> (bool, String) {
    const NEGATIVE: f64 = -1e-10;
    const GROWTH: f64 = 10.0;
    // species that start at zero are measured against the largest initial or boundary value
    let overall = t.initial_maxima.iter().cloned().fold(0.0, f64::max);
    let mut ok = true;
    let mut parts = Vec::new();
    for s in 0..6 {
        let reference = if t.initial_maxima[s] > 0.0 { t.initial_maxima[s] } else { overall };
        let cap = GROWTH * reference;
        ok &= t.minima[s] >= NEGATIVE && t.maxima[s] < cap;
        parts.push(format!("{} [{:.2e}, {:.2e}]", SPECIES[s], t.minima[s], t.maxima[s]));
    }
    (ok, parts.join(" "))
}

fn bio_run(shape: CellShape, tau: f64, t_end: f64) -> tsfem::Result<Trajectory> {
    let mut c = bio_scenario(shape, Resolution::desk(), tau, t_end);
    c.output.probes = vec![[0.09, 0.01], [0.01, 0.09]];
    run_two_scale(&c)
}

const CROSSING_LEVEL: f64 = 0.1;
const DZIUK_GAP: f64 = 0.25;

fn show(t: Option<f64>) -> String {
    t.map_or_else(|| "never".into(), |t| format!("{t:.3}"))
}

fn anisotropy_checks(ellipse: &Trajectory, dziuk: &Trajectory) -> (bool, String) {
    let e = (ellipse.crossing_time(0, CROSSING_LEVEL), ellipse.crossing_time(1, CROSSING_LEVEL));
    let d = (dziuk.crossing_time(0, CROSSING_LEVEL), dziuk.crossing_time(1, CROSSING_LEVEL));
    let ellipse_ok = matches!(e, (Some(a), Some(b)) if a < b) || matches!(e, (Some(_), None));
    let dziuk_ok = matches!(d, (Some(a), Some(b)) if (a - b).abs() < DZIUK_GAP * a.max(b));
    (
        ellipse_ok && dziuk_ok,
        format!(
            "c_e = {CROSSING_LEVEL} crossing times (east, north): ellipse ({}, {}), dziuk ({}, {}) (dziuk gap < {:.0}%)",
            show(e.0),
            show(e.1),
            show(d.0),
            show(d.1),
            100.0 * DZIUK_GAP
        ),
    )
}

#[test]
fn criterion_7_bio_desk_scenario() {
    const TAU: f64 = 1e-2;
    const T_END: f64 = 50.0;
    let start = Instant::now();
    let ellipse = bio_run(CellShape::Ellipse { coeffs: [0.26, 5.0] }, TAU, T_END);
    let dziuk = bio_run(CellShape::Dziuk, TAU, T_END);
    let (ok, detail) = match (&ellipse, &dziuk) {
        (Ok(e), Ok(d)) => {
            let (b1, s1) = bounds_check(e);
            let (b2, s2) = bounds_check(d);
            let (a, s3) = anisotropy_checks(e, d);
            (b1 && b2 && a, format!("ellipse {s1}; dziuk {s2}; {s3}"))
        }
        _ => (
            false,
            format!(
                "tau {TAU}, T {T_END}: ellipse {}, dziuk {}",
                ellipse.as_ref().map_or_else(|e| format!("failed ({e})"), |_| "completed".into()),
                dziuk.as_ref().map_or_else(|e| format!("failed ({e})"), |_| "completed".into()),
            ),
        ),
    };
    report(7, "bio scenario at desk scale", ok, &format!("{detail}, {:.1} s", start.elapsed().as_secs_f64()));

    // Informational: the same checks at a step inside the explicit reaction
    // stability limit, over the horizon containing both crossings.
    const STABLE_TAU: f64 = 1e-3;
    const SHORT_T: f64 = 1.0;
    let e = bio_run(CellShape::Ellipse { coeffs: [0.26, 5.0] }, STABLE_TAU, SHORT_T).unwrap();
    let d = bio_run(CellShape::Dziuk, STABLE_TAU, SHORT_T).unwrap();
    let (b1, r1) = bounds_check(&e);
    let (b2, r2) = bounds_check(&d);
    let (a, s) = anisotropy_checks(&e, &d);
    println!(
        "criterion 7 info: tau {STABLE_TAU}, T {SHORT_T}: bounds {} (ellipse {r1}; dziuk {r2}), anisotropy {}; {s}",
        if b1 && b2 { "hold" } else { "violated" },
        if a { "holds" } else { "violated" }
    );
    assert!(ok);
}

#[test]
fn criterion_8_time_accuracy() {
    const BAND: (f64, f64) = (1.6, 2.6);
    const LEVEL: u32 = 2;
    const STEPS: usize = 32;
    let r = time_error_ratios(LEVEL, STEPS).unwrap();
    let ok = r.iter().all(|v| (BAND.0..=BAND.1).contains(v));
    let parts: Vec<String> = BENCH_SPECIES.iter().zip(&r).map(|(n, v)| format!("{n} {v:.3}")).collect();
    report(
        8,
        "first-order time accuracy",
        ok,
        &format!(
            "Linf(L2) difference ratios for tau = T/{STEPS}, T/{}, T/{} at level {LEVEL}: {} (band [{}, {}])",
            2 * STEPS,
            4 * STEPS,
            parts.join(", "),
            BAND.0,
            BAND.1
        ),
    );
    assert!(ok);
}
