//! Command-line interface: run configuration, solver dispatch and artifact
//! output.

use crate::error::{Error, Result};
use crate::fem::assemble::VecEval;
use crate::fem::field::Field;
use crate::fem::space::{build_space, BcSpec, Kind};
use crate::io::{
    write_flux_matrix_csv, write_json, write_rate_csv, write_vtk,
};
use crate::kernel::compute_harmonic_basis;
use crate::mesh::{hollow_box, two_cavity_box, unit_cube, Mesh};
use crate::mhd::{
    solve_dual, solve_elliptic_en, solve_linearized, solve_stokes_sn, LinearizedProblem,
    VectorData,
};
use crate::nonlinear::{picard_solve, NonlinearData, PicardOptions};
use crate::verify::{case_by_name, convergence_study, run_invariants, MmsCase, SolverId};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Parser, Debug)]
#[command(
    name = "mhdpress",
    about = "Tetrahedral FEM solver for stationary incompressible MHD with pressure boundary conditions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve one problem and write fields (VTK), constants and a report (JSON).
    Solve(CommonOpts),
    /// Run the named-invariant registry; nonzero exit on any failure.
    Verify(CommonOpts),
    /// Convergence study: uniform refinements with a CSV rate table.
    Rates(CommonOpts),
}

#[derive(Args, Debug, Default, Clone)]
pub struct CommonOpts {
    /// Flat key=value config file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Mesh file (gmsh MSH 2.2 ASCII or native mhdmesh).
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// Builtin mesh: cube:N, hollow-box:N:M (shell N cells, cavity M^3),
    /// two-cavity:N:M, sphere-shell:N:M.
    #[arg(long)]
    pub builtin: Option<String>,
    /// Manufactured case providing the data (stream-cube | nonzero-div).
    #[arg(long)]
    pub case: Option<String>,
    /// Amplitude of the manufactured data.
    #[arg(long)]
    pub amplitude: Option<f64>,
    /// stokes | elliptic | linearized | nonlinear | kernel | dual
    #[arg(long)]
    pub solver: Option<String>,
    /// Element degree (1 or 2).
    #[arg(long)]
    pub degree: Option<usize>,
    /// Picard increment tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Picard iteration budget.
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Picard damping factor in (0, 1].
    #[arg(long)]
    pub damping: Option<f64>,
    /// Parallelism cap for element assembly.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Refinement levels for `rates`.
    #[arg(long)]
    pub levels: Option<usize>,
    /// Invariant name filter for `verify`.
    #[arg(long)]
    pub filter: Option<String>,
}

/// The resolved run configuration.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub mesh_path: Option<PathBuf>,
    pub builtin: String,
    pub case: String,
    pub amplitude: f64,
    pub solver: String,
    pub degree: usize,
    pub tol: f64,
    pub max_iters: usize,
    pub damping: f64,
    pub jobs: Option<usize>,
    pub out: PathBuf,
    pub levels: usize,
    pub filter: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mesh_path: None,
            builtin: "cube:2".into(),
            case: "stream-cube".into(),
            amplitude: 0.1,
            solver: "nonlinear".into(),
            degree: 1,
            tol: 1e-8,
            max_iters: 50,
            damping: 1.0,
            jobs: None,
            out: PathBuf::from("out"),
            levels: 3,
            filter: None,
        }
    }
}

impl RunConfig {
    /// Apply a flat key=value config file, then flag overrides.
    pub fn resolve(opts: &CommonOpts) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &opts.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    Error::Config(format!("config line {} is not key=value", lineno + 1))
                })?;
                cfg.apply(key.trim(), value.trim())?;
            }
        }
        if let Some(v) = &opts.mesh {
            cfg.mesh_path = Some(v.clone());
        }
        if let Some(v) = &opts.builtin {
            cfg.builtin = v.clone();
        }
        if let Some(v) = &opts.case {
            cfg.case = v.clone();
        }
        if let Some(v) = opts.amplitude {
            cfg.amplitude = v;
        }
        if let Some(v) = &opts.solver {
            cfg.solver = v.clone();
        }
        if let Some(v) = opts.degree {
            cfg.degree = v;
        }
        if let Some(v) = opts.tol {
            cfg.tol = v;
        }
        if let Some(v) = opts.max_iters {
            cfg.max_iters = v;
        }
        if let Some(v) = opts.damping {
            cfg.damping = v;
        }
        if let Some(v) = opts.jobs {
            cfg.jobs = Some(v);
        }
        if let Some(v) = &opts.out {
            cfg.out = v.clone();
        }
        if let Some(v) = opts.levels {
            cfg.levels = v;
        }
        if let Some(v) = &opts.filter {
            cfg.filter = Some(v.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |k: &str, v: &str| Error::Config(format!("bad value '{v}' for key '{k}'"));
        match key {
            "mesh" => self.mesh_path = Some(PathBuf::from(value)),
            "builtin" => self.builtin = value.into(),
            "case" => self.case = value.into(),
            "amplitude" => self.amplitude = value.parse().map_err(|_| bad(key, value))?,
            "solver" => self.solver = value.into(),
            "degree" => self.degree = value.parse().map_err(|_| bad(key, value))?,
            "tol" => self.tol = value.parse().map_err(|_| bad(key, value))?,
            "max-iters" => self.max_iters = value.parse().map_err(|_| bad(key, value))?,
            "damping" => self.damping = value.parse().map_err(|_| bad(key, value))?,
            "jobs" => self.jobs = Some(value.parse().map_err(|_| bad(key, value))?),
            "out" => self.out = PathBuf::from(value),
            "levels" => self.levels = value.parse().map_err(|_| bad(key, value))?,
            "filter" => self.filter = Some(value.into()),
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        if self.degree != 1 && self.degree != 2 {
            return Err(Error::Config(format!("degree must be 1 or 2, got {}", self.degree)));
        }
        if !self.amplitude.is_finite() {
            return Err(Error::Config("amplitude must be finite".into()));
        }
        if let Some(p) = &self.mesh_path {
            if !p.exists() {
                return Err(Error::Config(format!("mesh file not found: {}", p.display())));
            }
        }
        Ok(())
    }

    pub fn load_mesh(&self) -> Result<Arc<Mesh>> {
        if let Some(p) = &self.mesh_path {
            return Ok(Arc::new(crate::mesh::io::load_mesh(p)?));
        }
        parse_builtin(&self.builtin)
    }

    pub fn mms_case(&self) -> Result<MmsCase> {
        case_by_name(&self.case, self.amplitude)
            .ok_or_else(|| Error::Config(format!("unknown case '{}'", self.case)))
    }
}

pub fn parse_builtin(desc: &str) -> Result<Arc<Mesh>> {
    let parts: Vec<&str> = desc.split(':').collect();
    let n = |s: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::Config(format!("bad builtin parameter '{s}'")))
    };
    let mesh = match parts.as_slice() {
        ["cube", a] => unit_cube(n(a)?)?,
        ["hollow-box", a, b] => hollow_box(n(a)?, n(b)?)?,
        ["two-cavity", a, b] => two_cavity_box(n(a)?, n(b)?)?,
        ["sphere-shell", a, b] => crate::mesh::spherical_shell(n(a)?, n(b)?, 0.25, 0.5)?,
        _ => {
            return Err(Error::Config(format!(
                "unknown builtin '{desc}' (use cube:N, hollow-box:N:M, two-cavity:N:M, sphere-shell:N:M)"
            )))
        }
    };
    Ok(Arc::new(mesh))
}

/// Exit-code contract: 0 success, 1 config error, 2 solver failure.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Parse(_) | Error::Io(_) => 1,
        _ => 2,
    }
}

#[derive(Serialize)]
struct SolveArtifacts<'a> {
    config: &'a RunConfig,
    constants: Vec<f64>,
    constants_kind: &'a str,
    report: serde_json::Value,
}

pub fn cmd_solve(cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.out)?;
    let mesh = cfg.load_mesh()?;
    log::info!(
        "mesh: {} vertices, {} tets, {} boundary components",
        mesh.vertices.len(),
        mesh.tets.len(),
        mesh.n_components
    );
    match cfg.solver.as_str() {
        "kernel" => {
            let basis = compute_harmonic_basis(&mesh, cfg.degree)?;
            write_flux_matrix_csv(&basis, &cfg.out.join("flux_matrix.csv"))?;
            for (i, q) in basis.q.iter().enumerate() {
                write_vtk(q, &format!("q{}", i + 1), &cfg.out.join(format!("q{}.vtk", i + 1)))?;
            }
            #[derive(Serialize)]
            struct KernelReport {
                dim: usize,
                flux_matrix: Vec<Vec<f64>>,
                flux_matrix_surface: Vec<Vec<f64>>,
                boundary_constants: Vec<Vec<f64>>,
            }
            write_json(
                &KernelReport {
                    dim: basis.dim(),
                    flux_matrix: basis.flux_matrix.clone(),
                    flux_matrix_surface: basis.flux_matrix_surface.clone(),
                    boundary_constants: basis.boundary_constants.clone(),
                },
                &cfg.out.join("report.json"),
            )?;
            println!(
                "kernel basis: I = {}, flux matrix written to {}",
                basis.dim(),
                cfg.out.join("flux_matrix.csv").display()
            );
            Ok(())
        }
        "stokes" => {
            let case = cfg.mms_case()?;
            let basis = compute_harmonic_basis(&mesh, 1)?;
            let f_fn = |p| case.f_stokes(p);
            let h_fn = |p| case.h(p);
            let p0_fn = |p| case.p0(p);
            let f = VectorData::from_volume(VecEval::Fn(&f_fn));
            let sol = solve_stokes_sn(
                &mesh,
                &basis,
                cfg.degree,
                &f,
                case.nonzero_div.then_some(&h_fn as &dyn Fn(_) -> f64),
                Some(&p0_fn),
            )?;
            write_vtk(&sol.u, "u", &cfg.out.join("u.vtk"))?;
            write_vtk(&sol.p, "P", &cfg.out.join("P.vtk"))?;
            finish_solve(cfg, sol.c.clone(), "c", serde_json::to_value(&sol.report).unwrap())
        }
        "elliptic" => {
            let case = cfg.mms_case()?;
            let basis = compute_harmonic_basis(&mesh, 1)?;
            let g_fn = |p| case.g_elliptic(p);
            let g = VectorData::from_volume(VecEval::Fn(&g_fn));
            let sol = solve_elliptic_en(&mesh, &basis, cfg.degree, &g, true)?;
            write_vtk(&sol.b, "b", &cfg.out.join("b.vtk"))?;
            write_vtk(&sol.chi, "chi", &cfg.out.join("chi.vtk"))?;
            finish_solve(cfg, sol.beta.clone(), "beta", serde_json::to_value(&sol.report).unwrap())
        }
        "linearized" => {
            let case = cfg.mms_case()?;
            let basis = compute_harmonic_basis(&mesh, 1)?;
            let space = Arc::new(build_space(&mesh, Kind::Vector, cfg.degree, BcSpec::None)?);
            let w = Field::interpolate_vector(&space, |p| case.u(p));
            let d = Field::interpolate_vector(&space, |p| case.b(p));
            let f_fn = |p| case.f_mhd(p);
            let g_fn = |p| case.g_mhd(p);
            let h_fn = |p| case.h(p);
            let p0_fn = |p| case.p0(p);
            let mut prob = LinearizedProblem::new(&mesh, &basis, cfg.degree);
            prob.w = Some(&w);
            prob.d = Some(&d);
            prob.f = VectorData::from_volume(VecEval::Fn(&f_fn));
            prob.g = VectorData::from_volume(VecEval::Fn(&g_fn));
            prob.h = case.nonzero_div.then_some(&h_fn as &dyn Fn(_) -> f64);
            prob.p0 = Some(&p0_fn);
            let sol = solve_linearized(&prob)?;
            write_vtk(&sol.u, "u", &cfg.out.join("u.vtk"))?;
            write_vtk(&sol.b, "b", &cfg.out.join("b.vtk"))?;
            write_vtk(&sol.p, "P", &cfg.out.join("P.vtk"))?;
            write_vtk(&sol.chi, "chi", &cfg.out.join("chi.vtk"))?;
            finish_solve(cfg, sol.c.clone(), "c", serde_json::to_value(&sol.report).unwrap())
        }
        "nonlinear" => {
            let case = cfg.mms_case()?;
            if case.nonzero_div {
                return Err(Error::Config(
                    "the nonlinear solver requires the h = 0 case (stream-cube)".into(),
                ));
            }
            let basis = compute_harmonic_basis(&mesh, 1)?;
            let f_fn = |p| case.f_mhd(p);
            let g_fn = |p| case.g_mhd(p);
            let p0_fn = |p| case.p0(p);
            let data = NonlinearData {
                f: VectorData::from_volume(VecEval::Fn(&f_fn)),
                g: VectorData::from_volume(VecEval::Fn(&g_fn)),
                p0: Some(&p0_fn),
                h: None,
            };
            let opts = PicardOptions {
                max_iterations: cfg.max_iters,
                tolerance: cfg.tol,
                damping: cfg.damping,
                initial: None,
            };
            let sol = picard_solve(&mesh, &basis, cfg.degree, &data, &opts)?;
            write_vtk(&sol.u, "u", &cfg.out.join("u.vtk"))?;
            write_vtk(&sol.b, "b", &cfg.out.join("b.vtk"))?;
            write_vtk(&sol.p, "P", &cfg.out.join("P.vtk"))?;
            log::info!(
                "picard converged in {} iterations; contraction {:?}",
                sol.report.iterations,
                sol.report.contraction_factor
            );
            finish_solve(
                cfg,
                sol.alpha.clone(),
                "alpha",
                serde_json::to_value(&sol.report).unwrap(),
            )
        }
        "dual" => {
            let case = cfg.mms_case()?;
            let basis = compute_harmonic_basis(&mesh, 1)?;
            let space = Arc::new(build_space(&mesh, Kind::Vector, cfg.degree, BcSpec::None)?);
            let w = Field::interpolate_vector(&space, |p| case.u(p));
            let d = Field::interpolate_vector(&space, |p| case.b(p));
            let f_fn = |p| case.f_mhd(p);
            let g_fn = |p| case.g_mhd(p);
            let f = VectorData::from_volume(VecEval::Fn(&f_fn));
            let g = VectorData::from_volume(VecEval::Fn(&g_fn));
            let sol = solve_dual(&mesh, &basis, cfg.degree, Some(&w), Some(&d), &f, &g, None)?;
            write_vtk(&sol.v, "v", &cfg.out.join("u.vtk"))?;
            write_vtk(&sol.a, "a", &cfg.out.join("b.vtk"))?;
            write_vtk(&sol.theta, "theta", &cfg.out.join("P.vtk"))?;
            write_vtk(&sol.tau, "tau", &cfg.out.join("chi.vtk"))?;
            finish_solve(cfg, sol.beta.clone(), "beta", serde_json::to_value(&sol.report).unwrap())
        }
        other => Err(Error::Config(format!(
            "unknown solver '{other}' (stokes|elliptic|linearized|nonlinear|kernel|dual)"
        ))),
    }
}

fn finish_solve(
    cfg: &RunConfig,
    constants: Vec<f64>,
    kind: &str,
    report: serde_json::Value,
) -> Result<()> {
    write_json(
        &SolveArtifacts {
            config: cfg,
            constants,
            constants_kind: kind,
            report,
        },
        &cfg.out.join("report.json"),
    )?;
    println!("artifacts written to {}", cfg.out.display());
    Ok(())
}

#[derive(Serialize)]
struct VerifySummary {
    passed: usize,
    failed: usize,
    results: Vec<crate::verify::InvariantResult>,
}

/// Run the invariant registry; `Ok(false)` means a check failed.
pub fn cmd_verify(cfg: &RunConfig) -> Result<bool> {
    // a user-supplied mesh is validated up front (corrupted -> config error)
    if cfg.mesh_path.is_some() {
        let _ = cfg.load_mesh()?;
    }
    let results = run_invariants(cfg.filter.as_deref());
    let mut failed = 0;
    for r in &results {
        println!(
            "[{}] {} - {}",
            if r.passed { "pass" } else { "FAIL" },
            r.name,
            r.detail
        );
        if !r.passed {
            failed += 1;
        }
    }
    std::fs::create_dir_all(&cfg.out)?;
    write_json(
        &VerifySummary {
            passed: results.len() - failed,
            failed,
            results,
        },
        &cfg.out.join("verify.json"),
    )?;
    Ok(failed == 0)
}

pub fn cmd_rates(cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.out)?;
    let case = cfg.mms_case()?;
    let solver = SolverId::parse(&cfg.solver)?;
    let table = convergence_study(&case, solver, cfg.degree, cfg.levels, 2)?;
    let path = cfg.out.join(format!("rates_{}_{}.csv", cfg.solver, cfg.degree));
    write_rate_csv(&table, &path)?;
    write_json(&table, &cfg.out.join("rates.json"))?;
    for (norm, ratios) in &table.ratios {
        println!("{norm}: ratios {ratios:?}");
    }
    println!("rate table written to {}", path.display());
    Ok(())
}

pub fn run(cli: Cli) -> i32 {
    let (opts, which) = match &cli.command {
        Command::Solve(o) => (o.clone(), 0),
        Command::Verify(o) => (o.clone(), 1),
        Command::Rates(o) => (o.clone(), 2),
    };
    let cfg = match RunConfig::resolve(&opts) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    if let Some(jobs) = cfg.jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    let outcome: Result<bool> = match which {
        0 => cmd_solve(&cfg).map(|_| true),
        1 => cmd_verify(&cfg),
        _ => cmd_rates(&cfg).map(|_| true),
    };
    match outcome {
        Ok(true) => 0,
        Ok(false) => 2,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
