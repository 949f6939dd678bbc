//! Command-line front end: mesh generation, cell problems, the convergence
//! benchmark and two-scale simulations.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tsfem::benchmark::{compute_eoc, run_benchmark, ErrorRecord, MAX_LEVEL, SPECIES as BENCH_SPECIES};
use tsfem::cell::{homogenize, CellShape};
use tsfem::config::ScenarioConfig;
use tsfem::fem::Tensor2;
use tsfem::macroscale::Simulation;
use tsfem::mesh::{
    default_tolerance, generate_mesh, match_periodic_nodes, mesh_stats, read_mesh, write_mesh, GeometrySpec,
    Marker,
};
use tsfem::output::{timeseries_csv, write_snapshot, FieldSnapshot};
use tsfem::{Error, Result};

#[derive(Parser)]
#[command(name = "tsfem", version, about = "Two-scale bulk-surface finite element solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or inspect meshes.
    #[command(subcommand)]
    Mesh(MeshCommand),
    /// Solve the periodic cell problems and print the homogenised tensor.
    CellProblem(CellArgs),
    /// Run the manufactured-solution convergence study and print a CSV table.
    Benchmark(BenchArgs),
    /// Run a two-scale simulation from a configuration file.
    Simulate(SimArgs),
}

#[derive(Subcommand)]
enum MeshCommand {
    /// Write a generated mesh.
    Gen(GenArgs),
    /// Print statistics of a mesh file.
    Info { path: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Geometry {
    None,
    Circle,
    Ellipse,
    Dziuk,
}

#[derive(Clone, Copy, ValueEnum)]
enum Part {
    /// Periodic unit cell with the cell removed.
    Exterior,
    /// The cell itself.
    Interior,
}

#[derive(Args)]
struct ShapeArgs {
    /// Cell shape.
    #[arg(long, value_enum, default_value = "ellipse")]
    geometry: Geometry,
    /// Radius of a circular cell.
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Ellipse coefficients `c1,c2` of `c1 x^2 + c2 y^2 < 1`.
    #[arg(long, value_delimiter = ',', default_values_t = [0.26, 5.0])]
    coeffs: Vec<f64>,
    /// Half-width of the square unit cell.
    #[arg(long, default_value_t = 2.0)]
    half_width: f64,
}

impl ShapeArgs {
    fn shape(&self) -> Result<CellShape> {
        if self.coeffs.len() != 2 {
            return Err(Error::Invalid {
                key: "coeffs".into(),
                message: format!("expected two comma-separated values, got {}", self.coeffs.len()),
            });
        }
        Ok(match self.geometry {
            Geometry::None => CellShape::None,
            Geometry::Circle => CellShape::Circle { radius: self.radius },
            Geometry::Ellipse => CellShape::Ellipse {
                coeffs: [self.coeffs[0], self.coeffs[1]],
            },
            Geometry::Dziuk => CellShape::Dziuk,
        })
    }

    fn bounds(&self) -> Result<([f64; 2], [f64; 2])> {
        let h = self.half_width;
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Invalid {
                key: "half-width".into(),
                message: format!("must be positive, got {h}"),
            });
        }
        Ok(([-h, -h], [h, h]))
    }
}

#[derive(Args)]
struct GenArgs {
    /// Geometry description as a TOML file; overrides the cell options.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[command(flatten)]
    shape: ShapeArgs,
    /// Which part of the unit cell to mesh.
    #[arg(long, value_enum, default_value = "exterior")]
    part: Part,
    /// Refinement level; each level halves the mesh size.
    #[arg(long, default_value_t = 0)]
    level: u32,
    /// Match nodes on opposite faces of the bounding box (spec files only).
    #[arg(long)]
    periodic: bool,
    /// Output mesh file.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct CellArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    /// Refinement level of the extracellular mesh.
    #[arg(long, default_value_t = 2)]
    level: u32,
    /// Isotropic extracellular diffusivity.
    #[arg(long, default_value_t = 1e-2)]
    d_e: f64,
    /// Directory for the corrector fields (VTK).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Inclusive level range `a..b`.
    #[arg(long, default_value = "0..3")]
    levels: String,
    /// Write the table to a file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimArgs {
    /// Scenario configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for the time series and snapshots.
    #[arg(long, default_value = "tsfem-out")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("error[usage]: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {message}", e.code());
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Mesh(MeshCommand::Gen(a)) => mesh_gen(&a),
        Command::Mesh(MeshCommand::Info { path }) => mesh_info(&path),
        Command::CellProblem(a) => cell_problem(&a),
        Command::Benchmark(a) => benchmark(&a),
        Command::Simulate(a) => simulate(&a),
    }
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn mesh_gen(a: &GenArgs) -> Result<()> {
    let mesh = match &a.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            let spec: GeometrySpec = toml::from_str(&text).map_err(|e| Error::Parse {
                path: path.display().to_string(),
                line: e.span().map_or(0, |s| text[..s.start].matches('\n').count() + 1),
                message: e.message().trim().to_string(),
            })?;
            let mesh = generate_mesh(&spec, a.level)?;
            if a.periodic {
                let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
                for p in &mesh.nodes {
                    for d in 0..2 {
                        lo[d] = lo[d].min(p[d]);
                        hi[d] = hi[d].max(p[d]);
                    }
                }
                let tol = default_tolerance(&mesh);
                match_periodic_nodes(&mesh, [[hi[0] - lo[0], 0.0], [0.0, hi[1] - lo[1]]], tol)?
            } else {
                mesh
            }
        }
        None => {
            let shape = a.shape.shape()?;
            let (lo, hi) = a.shape.bounds()?;
            shape.check_fits(lo, hi)?;
            match a.part {
                Part::Exterior => shape.exterior_mesh(lo, hi, a.level)?,
                Part::Interior => match shape.interior_spec() {
                    Some(spec) => generate_mesh(&spec, a.level)?,
                    None => {
                        return Err(Error::Invalid {
                            key: "part".into(),
                            message: "geometry `none` has no interior".into(),
                        })
                    }
                },
            }
        }
    };
    write_mesh(&mesh, &a.out)?;
    let s = mesh_stats(&mesh);
    println!(
        "wrote {}: {} nodes, {} triangles, h_max {:.6e}",
        a.out.display(),
        s.node_count,
        s.triangle_count,
        s.h_max
    );
    Ok(())
}

fn mesh_info(path: &Path) -> Result<()> {
    let mesh = read_mesh(path)?;
    let s = mesh_stats(&mesh);
    let count = |m: Marker| mesh.boundary_edges.iter().filter(|e| e.marker == m).count();
    println!("nodes {}", s.node_count);
    println!("triangles {}", s.triangle_count);
    println!("boundary_edges outer {} hole {}", count(Marker::Outer), count(Marker::Hole));
    println!("periodic_classes {}", mesh.periodic_classes.len());
    println!("area {:.12e}", s.total_area);
    println!("h_max {:.6e}", s.h_max);
    println!("min_angle_deg {:.3}", s.min_angle);
    Ok(())
}

fn cell_problem(a: &CellArgs) -> Result<()> {
    let shape = a.shape.shape()?;
    let (lo, hi) = a.shape.bounds()?;
    shape.check_fits(lo, hi)?;
    if !(a.d_e > 0.0 && a.d_e.is_finite()) {
        return Err(Error::Invalid {
            key: "d-e".into(),
            message: format!("must be positive, got {}", a.d_e),
        });
    }
    let start = Instant::now();
    let mesh = shape.exterior_mesh(lo, hi, a.level)?;
    let volume = (hi[0] - lo[0]) * (hi[1] - lo[1]);
    let h = homogenize(&mesh, Tensor2::scalar(a.d_e), volume)?;
    let d = h.d_hom.0;
    println!("geometry {} level {} dofs {} h {:.4e}", shape.name(), a.level, h.dofs, h.mesh_h);
    println!("d_hom [[{:.6e}, {:.6e}], [{:.6e}, {:.6e}]]", d[0][0], d[0][1], d[1][0], d[1][1]);
    println!("theta_e {:.12}", h.theta_e);
    println!("seconds {:.2}", start.elapsed().as_secs_f64());
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        let [w1, w2] = h.cell_solutions;
        let snap = FieldSnapshot::on_mesh(
            format!("cell correctors ({})", shape.name()),
            &mesh,
            vec![("w1".into(), w1), ("w2".into(), w2)],
        );
        write_snapshot(&snap, &dir.join("correctors.vtk"))?;
    }
    Ok(())
}

fn parse_levels(text: &str) -> Result<(u32, u32)> {
    let bad = || Error::Invalid {
        key: "levels".into(),
        message: format!("expected `a..b` with 0 <= a < b <= {MAX_LEVEL}, got `{text}`"),
    };
    let (a, b) = text.split_once("..").ok_or_else(bad)?;
    let a: u32 = a.trim().parse().map_err(|_| bad())?;
    let b: u32 = b.trim().parse().map_err(|_| bad())?;
    if a >= b || b > MAX_LEVEL {
        return Err(bad());
    }
    Ok((a, b))
}

fn benchmark_table(records: &[ErrorRecord]) -> Result<String> {
    let mut header = vec!["level", "h_omega", "h_cell", "h_membrane", "tau"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    for s in BENCH_SPECIES {
        for col in ["l2h1", "linfl2", "eoc_l2h1", "eoc_linfl2"] {
            header.push(format!("{s}_{col}"));
        }
    }
    let hs: Vec<f64> = records.iter().map(ErrorRecord::h_max).collect();
    let mut eocs = Vec::new();
    for s in 0..4 {
        let a: Vec<f64> = records.iter().map(|r| r.l2h1[s]).collect();
        let b: Vec<f64> = records.iter().map(|r| r.linfl2[s]).collect();
        eocs.push((compute_eoc(&a, &hs)?, compute_eoc(&b, &hs)?));
    }
    let mut out = header.join(",") + "\n";
    for (i, r) in records.iter().enumerate() {
        let mut row = vec![
            r.level.to_string(),
            format!("{:.6e}", r.h[0]),
            format!("{:.6e}", r.h[1]),
            format!("{:.6e}", r.h[2]),
            format!("{:.6e}", r.tau),
        ];
        for (s, (e1, e2)) in eocs.iter().enumerate() {
            row.push(format!("{:.6e}", r.l2h1[s]));
            row.push(format!("{:.6e}", r.linfl2[s]));
            for e in [e1, e2] {
                row.push(if i == 0 { String::new() } else { format!("{:.4}", e[i - 1]) });
            }
        }
        out += &(row.join(",") + "\n");
    }
    Ok(out)
}

fn benchmark(a: &BenchArgs) -> Result<()> {
    let (lo, hi) = parse_levels(&a.levels)?;
    let records = (lo..=hi).map(run_benchmark).collect::<Result<Vec<_>>>()?;
    let table = benchmark_table(&records)?;
    match &a.out {
        Some(path) => std::fs::write(path, table).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        }),
        None => {
            print!("{table}");
            Ok(())
        }
    }
}

fn simulate(a: &SimArgs) -> Result<()> {
    let config = ScenarioConfig::from_file(&a.config)?;
    create_dir(&a.out)?;
    let start = Instant::now();
    let sim = Simulation::new(&config)?;
    let macro_mesh = sim.macro_mesh.clone();
    let micro = sim.micro.as_ref().map(|m| (m.interior.clone(), m.curve.clone()));
    let d = sim.hom.d_hom.0;
    println!(
        "scenario {}: {} macro nodes, {} steps, d_hom [[{:.4e}, {:.4e}], [{:.4e}, {:.4e}]], theta_e {:.6}",
        config.scenario,
        macro_mesh.node_count(),
        sim.steps,
        d[0][0],
        d[0][1],
        d[1][0],
        d[1][1],
        sim.hom.theta_e
    );
    let traj = sim.run()?;
    std::fs::write(a.out.join("timeseries.csv"), timeseries_csv(&traj)).map_err(|e| Error::Io {
        path: a.out.join("timeseries.csv"),
        source: e,
    })?;
    for s in &traj.samples {
        let snap = FieldSnapshot::on_mesh(
            format!("c_e at t = {}", s.time),
            &macro_mesh,
            vec![("c_e".into(), s.c_e.clone())],
        );
        write_snapshot(&snap, &a.out.join(format!("c_e_{:06}.vtk", s.step)))?;
        if let Some((interior, curve)) = &micro {
            for (p, m) in traj.probes.iter().zip(&s.probe_micro) {
                let cell = FieldSnapshot::on_mesh(
                    format!("probe {} cell at t = {}", p.id, s.time),
                    interior,
                    vec![("c_i".into(), m.c_i.clone())],
                );
                write_snapshot(&cell, &a.out.join(format!("probe{}_cell_{:06}.vtk", p.id, s.step)))?;
                let membrane = FieldSnapshot::on_curve(
                    format!("probe {} membrane at t = {}", p.id, s.time),
                    curve,
                    vec![
                        ("r_f".into(), m.r_f.clone()),
                        ("r_b".into(), m.r_b.clone()),
                        ("p_d".into(), m.p_d.clone()),
                        ("p_a".into(), m.p_a.clone()),
                    ],
                );
                write_snapshot(&membrane, &a.out.join(format!("probe{}_membrane_{:06}.vtk", p.id, s.step)))?;
            }
        }
    }
    println!(
        "wrote {} samples to {} in {:.1} s",
        traj.samples.len(),
        a.out.display(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
