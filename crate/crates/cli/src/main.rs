//! `wssfem`: runs the benchmark cases, convergence studies and WSS exports.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use wssfem::harness::{
    build_problem, compute_wss, emit_report, level_mesh, ns_config, run_convergence_partial, run_on_mesh, CaseKind,
    CaseSpec, Overrides, ReportFormat,
};
use wssfem::mesh::{read_gmsh, write_gmsh, Mesh, RegionTags, TagMap};
use wssfem::navier_stokes::newton_solve_from;
use wssfem::stokes::{assemble_stokes, solve_stokes, ElementPair, FlowProblem, Solution};
use wssfem::wss::{lsa, write_wss_csv, write_wss_vtu, wss_stats, WssMethod};
use wssfem::{Error, Result};

#[derive(Parser)]
#[command(name = "wssfem", version, about = "Finite element Stokes/Navier-Stokes solver with wall shear stress evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Runs a convergence study and writes the report.
    Convergence(ConvergenceArgs),
    /// Solves one level (or a mesh file) and prints the errors.
    Solve(SolveArgs),
    /// Solves one level (or a mesh file) and exports the WSS fields.
    Wss(WssArgs),
    /// Writes the mesh of a level as Gmsh MSH 2.2.
    Mesh(MeshArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum CaseArg {
    Stokes2d,
    Poiseuille3d,
    #[value(name = "ns_pipe")]
    NsPipe,
}

impl From<CaseArg> for CaseKind {
    fn from(c: CaseArg) -> CaseKind {
        match c {
            CaseArg::Stokes2d => CaseKind::Stokes2d,
            CaseArg::Poiseuille3d => CaseKind::Poiseuille3d,
            CaseArg::NsPipe => CaseKind::NsPipe,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ElementArg {
    P2p1,
    P1p1,
}

impl From<ElementArg> for ElementPair {
    fn from(e: ElementArg) -> ElementPair {
        match e {
            ElementArg::P2p1 => ElementPair::P2P1,
            ElementArg::P1p1 => ElementPair::P1P1,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WssArg {
    Bflux,
    Cg1,
    Dg1,
    Dg0,
    All,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Plotdata,
    Vtu,
}

/// Options shared by all solving subcommands.
#[derive(Args)]
struct Common {
    #[arg(long, value_enum, default_value = "stokes2d")]
    case: CaseArg,
    #[arg(long, value_enum, default_value = "p2p1")]
    element: ElementArg,
    /// WSS methods, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "all")]
    wss: Vec<WssArg>,
    /// Nitsche penalty.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma_p: Option<f64>,
    #[arg(long)]
    gamma_v: Option<f64>,
    #[arg(long)]
    alpha_i: Option<f64>,
    #[arg(long)]
    alpha_v: Option<f64>,
    #[arg(long)]
    alpha_p: Option<f64>,
    /// Relative residual at which Newton stops.
    #[arg(long)]
    newton_tol: Option<f64>,
    #[arg(long)]
    max_newton_iters: Option<usize>,
    /// Worker threads.
    #[arg(long, env = "WSSFEM_WORKERS", default_value_t = 1)]
    workers: usize,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            beta: self.beta,
            gamma_p: self.gamma_p,
            gamma_v: self.gamma_v,
            alpha_i: self.alpha_i,
            alpha_v: self.alpha_v,
            alpha_p: self.alpha_p,
            newton_tol: self.newton_tol,
            max_newton_iters: self.max_newton_iters,
        }
    }

    fn methods(&self) -> Vec<WssMethod> {
        if self.wss.contains(&WssArg::All) {
            return WssMethod::ALL.to_vec();
        }
        let mut out: Vec<WssMethod> = self
            .wss
            .iter()
            .map(|w| match w {
                WssArg::Bflux => WssMethod::Bflux,
                WssArg::Cg1 => WssMethod::Cg1,
                WssArg::Dg1 => WssMethod::Dg1,
                _ => WssMethod::Dg0,
            })
            .collect();
        out.sort();
        out.dedup();
        out
    }

    fn spec(&self) -> CaseSpec {
        let mut spec = CaseSpec::new(self.case.into(), self.element.into()).with_wss(self.methods());
        spec.overrides = self.overrides();
        spec.workers = self.workers;
        spec
    }
}

/// Mesh selection for single-level subcommands.
#[derive(Args)]
struct MeshSource {
    /// Generated mesh level.
    #[arg(long, default_value_t = 0)]
    level: usize,
    /// Gmsh MSH 2.2 file used instead of a generated level.
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Physical group map such as `1=inlet,2=outlet,3=wall` or a JSON object.
    #[arg(long)]
    tags: Option<String>,
}

impl MeshSource {
    /// The mesh and, for generated levels, its target edge length.
    fn load(&self, case: CaseKind) -> Result<(Arc<Mesh>, Option<f64>)> {
        match &self.mesh {
            Some(path) => {
                let map = match &self.tags {
                    Some(text) => TagMap::parse(text, &RegionTags::STANDARD)?,
                    None => TagMap::identity(),
                };
                Ok((Arc::new(read_gmsh(path, &map)?), None))
            }
            None => {
                let lm = level_mesh(case, self.level)?;
                Ok((lm.mesh, Some(lm.target_edge)))
            }
        }
    }
}

#[derive(Args)]
struct ConvergenceArgs {
    #[command(flatten)]
    common: Common,
    /// Levels as `0..4` (inclusive) or a comma separated list.
    #[arg(long, default_value = "0..4")]
    levels: String,
    /// Coarsest levels left out of the rate fits.
    #[arg(long, default_value_t = 0)]
    fit_skip: usize,
    /// Report formats, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "csv,json")]
    format: Vec<FormatArg>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    source: MeshSource,
    /// Writes the assembled Stokes matrix in MatrixMarket format.
    #[arg(long)]
    dump_matrix: Option<PathBuf>,
}

#[derive(Args)]
struct WssArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    source: MeshSource,
    /// Field formats, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "vtu,csv")]
    format: Vec<FormatArg>,
    /// Reference mean |tau| for the low shear area; LSA is skipped without it.
    #[arg(long)]
    lsa_reference: Option<f64>,
}

#[derive(Args)]
struct MeshArgs {
    #[arg(long, value_enum, default_value = "stokes2d")]
    case: CaseArg,
    #[arg(long, default_value_t = 0)]
    level: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // Help and version output.
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.render().to_string();
            eprintln!("{}", json!({ "kind": "usage", "message": message.trim() }));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary is valid JSON"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<serde_json::Value> {
    match cli.command {
        Command::Convergence(args) => convergence(args),
        Command::Solve(args) => solve_level(args),
        Command::Wss(args) => export_wss(args),
        Command::Mesh(args) => mesh(args),
    }
}

fn init_workers(workers: usize) -> Result<()> {
    if workers == 0 {
        return Err(Error::InvalidArgument("workers must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| Error::InvalidArgument(format!("cannot start workers: {e}")))
}

fn parse_levels(text: &str) -> Result<Vec<usize>> {
    let bad = || Error::InvalidArgument(format!("cannot parse levels '{text}'"));
    if let Some((a, b)) = text.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if b < a {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    text.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
}

fn convergence(args: ConvergenceArgs) -> Result<serde_json::Value> {
    init_workers(args.common.workers)?;
    let mut spec = args.common.spec();
    spec.levels = parse_levels(&args.levels)?;
    spec.fit_skip = args.fit_skip;
    let mut formats = Vec::new();
    for f in &args.format {
        formats.push(match f {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Plotdata => ReportFormat::Plotdata,
            FormatArg::Vtu => {
                return Err(Error::InvalidArgument(
                    "vtu is a field format; use the wss subcommand".into(),
                ))
            }
        });
    }
    let (report, error) = run_convergence_partial(&spec);
    // A failed study still leaves the report of the completed levels.
    let mut files = Vec::new();
    for f in formats {
        files.extend(emit_report(&report, f, &args.common.out)?);
    }
    if let Some(e) = error {
        return Err(e);
    }
    Ok(json!({
        "case": report.case,
        "element": report.element.name(),
        "levels": report.levels.len(),
        "rates": report.rates.iter().map(|(k, r)| (k.clone(), json!(r.rate))).collect::<serde_json::Map<_, _>>(),
        "files": files,
    }))
}

/// Solves the case on a mesh; Navier-Stokes starts from the Stokes solution.
fn solve_case(case: CaseKind, problem: &FlowProblem, overrides: &Overrides) -> Result<Solution> {
    let stokes = solve_stokes(problem)?;
    if case == CaseKind::NsPipe {
        Ok(newton_solve_from(problem, &ns_config(overrides), &stokes)?.solution)
    } else {
        Ok(stokes)
    }
}

fn solve_level(args: SolveArgs) -> Result<serde_json::Value> {
    init_workers(args.common.workers)?;
    let spec = args.common.spec();
    let (mesh, target_edge) = args.source.load(spec.case)?;
    if let Some(path) = &args.dump_matrix {
        let problem = build_problem(spec.case, spec.element, mesh.clone(), &spec.overrides)?;
        let assembled = assemble_stokes(&problem)?;
        assembled.system.matrix.write_matrix_market(path)?;
    }
    let result = run_on_mesh(&spec, args.source.level, mesh, target_edge)?;
    Ok(serde_json::to_value(result)?)
}

fn export_wss(args: WssArgs) -> Result<serde_json::Value> {
    init_workers(args.common.workers)?;
    let spec = args.common.spec();
    let (mesh, _) = args.source.load(spec.case)?;
    let problem = build_problem(spec.case, spec.element, mesh, &spec.overrides)?;
    let solution = solve_case(spec.case, &problem, &spec.overrides)?;
    std::fs::create_dir_all(&args.common.out)?;
    let mut fields = serde_json::Map::new();
    for m in &spec.wss {
        let field = compute_wss(spec.case, &problem, &solution, *m)?;
        let stem = format!("{}_{}_wss_{m}", spec.case, spec.element.name());
        let mut files = Vec::new();
        for f in &args.format {
            let path = match f {
                FormatArg::Vtu => field_file(&args.common.out, &stem, "vtu", |p| write_wss_vtu(&field, p))?,
                FormatArg::Csv => field_file(&args.common.out, &stem, "csv", |p| write_wss_csv(&field, p))?,
                _ => {
                    return Err(Error::InvalidArgument(
                        "WSS fields are written as vtu or csv".into(),
                    ))
                }
            };
            files.push(path);
        }
        let mut entry = json!({ "stats": wss_stats(&field)?, "files": files });
        if let Some(reference) = args.lsa_reference {
            entry["lsa_percent"] = json!(lsa(&field, reference)?);
        }
        fields.insert(m.to_string(), entry);
    }
    Ok(json!({ "case": spec.case, "element": spec.element.name(), "wss": fields }))
}

fn field_file(dir: &Path, stem: &str, ext: &str, write: impl FnOnce(&Path) -> Result<()>) -> Result<PathBuf> {
    let path = dir.join(format!("{stem}.{ext}"));
    write(&path)?;
    Ok(path)
}

fn mesh(args: MeshArgs) -> Result<serde_json::Value> {
    let case: CaseKind = args.case.into();
    let lm = level_mesh(case, args.level)?;
    std::fs::create_dir_all(&args.out)?;
    let path = args.out.join(format!("{case}_level{}.msh", args.level));
    write_gmsh(&lm.mesh, &path)?;
    Ok(json!({
        "file": path,
        "dim": lm.mesh.dim(),
        "vertices": lm.mesh.n_vertices(),
        "cells": lm.mesh.n_cells(),
        "h": lm.mesh.max_h(),
        "target_edge": lm.target_edge,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_ranges_and_lists() {
        assert_eq!(parse_levels("0..4").unwrap(), vec![0, 1, 2, 3, 4]);
        assert_eq!(parse_levels("1..=2").unwrap(), vec![1, 2]);
        assert_eq!(parse_levels("0,2,3").unwrap(), vec![0, 2, 3]);
        assert!(parse_levels("3..1").is_err());
        assert!(parse_levels("a").is_err());
    }
}
