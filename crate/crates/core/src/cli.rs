//! Batch experiment runner: mesh generation, single eigensolves,
//! convergence studies, stabilization sweeps, and spurious-mode scans as
//! subcommands.
//!
//! Every option can come from a flat `key=value` config file (`--config`);
//! command-line flags override file entries, and built-in defaults fill
//! the rest. Config keys are the flag names with underscores: `domain`,
//! `bc`, `family`, `n`, `n_list`, `w`, `w_list`, `modes`, `seed`,
//! `backend`, `out`, `mesh_out`, `vtk_out`, `dump_matrices`. Each run
//! writes a `manifest.json` into the output directory, also when it
//! fails.

use crate::analysis::{
    auto_backend, convergence_study, detect_spurious, exact_spectrum, extrapolate,
    stabilization_sweep, ConvergenceStudy, SpuriousReport, StudyConfig, SweepTable,
};
use crate::assembly::assemble;
use crate::eigensolver::{solve_eigen, Backend, EigenResult, SolveOptions};
use crate::io::{
    dump_matrices, fmt_sig, write_csv, write_json, write_poly_mesh, write_vtk_modes, RunManifest,
    StageClock,
};
use crate::mesh::{generate, quality, tag_boundary, BcSpec, Domain, MeshFamily, PolygonalMesh};
use crate::vem_local::StabWeight;
use crate::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

const MANIFEST_FILE: &str = "manifest.json";
const SPURIOUS_WINDOW: f64 = 0.35;

#[derive(Debug, Parser)]
#[command(
    name = "vemlap",
    version,
    about = "Mixed virtual element solver for the Laplace eigenproblem on polygonal meshes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a mesh, write it, and report its quality.
    Mesh(CommonArgs),
    /// Solve for the smallest eigenvalues on one mesh.
    Solve(CommonArgs),
    /// Run a refinement study and fit convergence orders.
    Convergence(CommonArgs),
    /// Sweep the stabilization weight over a refinement grid.
    Sweep(CommonArgs),
    /// Match a computed spectrum against the reference spectrum.
    Spurious(CommonArgs),
}

impl Command {
    fn parts(&self) -> (&'static str, &CommonArgs) {
        match self {
            Command::Mesh(a) => ("mesh", a),
            Command::Solve(a) => ("solve", a),
            Command::Convergence(a) => ("convergence", a),
            Command::Sweep(a) => ("sweep", a),
            Command::Spurious(a) => ("spurious", a),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Flat key=value config file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub domain: Option<DomainArg>,
    #[arg(long, value_enum)]
    pub bc: Option<BcArg>,
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    /// Refinement level (cells per side for structured families).
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma-separated refinement levels for studies and sweeps.
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    /// Stabilization weight.
    #[arg(long)]
    pub w: Option<f64>,
    /// Comma-separated stabilization weights for sweeps.
    #[arg(long, value_delimiter = ',')]
    pub w_list: Option<Vec<f64>>,
    /// Number of eigenpairs.
    #[arg(long)]
    pub modes: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendArg>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the mesh in poly-mesh v1 format to this path.
    #[arg(long)]
    pub mesh_out: Option<PathBuf>,
    /// Write per-mode fields as legacy VTK into this directory.
    #[arg(long)]
    pub vtk_out: Option<PathBuf>,
    /// Dump assembled matrices as coordinate text into this directory.
    #[arg(long)]
    pub dump_matrices: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DomainArg {
    UnitSquare,
    SymSquare,
    Lshape,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BcArg {
    Dirichlet,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    T1,
    T2,
    T3,
    T4,
    T5,
    T6,
    T7,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Auto,
    Dense,
    ShiftInvert,
}

impl DomainArg {
    fn to_domain(self) -> Domain {
        match self {
            DomainArg::UnitSquare => Domain::UnitSquare,
            DomainArg::SymSquare => Domain::SymSquare,
            DomainArg::Lshape => Domain::LShape,
        }
    }
}

impl BcArg {
    fn to_bc(self) -> BcSpec {
        match self {
            BcArg::Dirichlet => BcSpec::AllDirichlet,
            BcArg::Mixed => BcSpec::MixedTopBottomDirichlet,
        }
    }
}

impl FamilyArg {
    fn to_family(self) -> MeshFamily {
        match self {
            FamilyArg::T1 => MeshFamily::T1Triangles,
            FamilyArg::T2 => MeshFamily::T2Squares,
            FamilyArg::T3 => MeshFamily::T3PerturbedSquares,
            FamilyArg::T4 => MeshFamily::T4Trapezoids,
            FamilyArg::T5 => MeshFamily::T5Hexagons,
            FamilyArg::T6 => MeshFamily::T6LshapeTriangles,
            FamilyArg::T7 => MeshFamily::T7LshapeSquares,
        }
    }
}

fn enum_token<E: ValueEnum>(value: E) -> String {
    value.to_possible_value().unwrap().get_name().to_string()
}

fn enum_from_token<E: ValueEnum>(key: &str, token: &str) -> Result<E> {
    E::from_str(token, false)
        .map_err(|_| Error::InvalidConfig(format!("invalid value {token:?} for {key}")))
}

/// Fully resolved run parameters after merging flags, config file, and
/// defaults.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub domain: Domain,
    pub bc: BcSpec,
    pub family: MeshFamily,
    pub n: usize,
    pub n_list: Vec<usize>,
    pub w: f64,
    pub w_list: Vec<f64>,
    pub modes: usize,
    pub seed: u64,
    pub backend: Option<Backend>,
    pub out: PathBuf,
    pub mesh_out: Option<PathBuf>,
    pub vtk_out: Option<PathBuf>,
    pub dump_matrices: Option<PathBuf>,
    domain_arg: DomainArg,
    bc_arg: BcArg,
    family_arg: FamilyArg,
    backend_arg: BackendArg,
}

fn default_w_list() -> Vec<f64> {
    let mut list: Vec<f64> = (-6..=6).rev().map(|k| 4f64.powi(k)).collect();
    list.push(0.0);
    list
}

fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::InvalidConfig(format!("config line {} is not key=value: {raw:?}", idx + 1))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    const KNOWN: [&str; 14] = [
        "domain",
        "bc",
        "family",
        "n",
        "n_list",
        "w",
        "w_list",
        "modes",
        "seed",
        "backend",
        "out",
        "mesh_out",
        "vtk_out",
        "dump_matrices",
    ];
    for key in map.keys() {
        if !KNOWN.contains(&key.as_str()) {
            return Err(Error::InvalidConfig(format!("unknown config key {key:?}")));
        }
    }
    Ok(map)
}

fn parse_scalar<T: std::str::FromStr>(key: &str, token: &str) -> Result<T> {
    token
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("invalid value {token:?} for {key}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, token: &str) -> Result<Vec<T>> {
    token
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| parse_scalar(key, t))
        .collect()
}

impl CommonArgs {
    /// Merge flags over config-file entries over defaults.
    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let file = match &self.config {
            Some(path) => parse_config_file(path)?,
            None => BTreeMap::new(),
        };
        let get = |key: &str| file.get(key).map(String::as_str);

        let domain_arg = match (self.domain, get("domain")) {
            (Some(v), _) => v,
            (None, Some(t)) => enum_from_token("domain", t)?,
            (None, None) => DomainArg::UnitSquare,
        };
        let bc_arg = match (self.bc, get("bc")) {
            (Some(v), _) => v,
            (None, Some(t)) => enum_from_token("bc", t)?,
            (None, None) => BcArg::Dirichlet,
        };
        let family_arg = match (self.family, get("family")) {
            (Some(v), _) => v,
            (None, Some(t)) => enum_from_token("family", t)?,
            (None, None) => FamilyArg::T2,
        };
        let backend_arg = match (self.backend, get("backend")) {
            (Some(v), _) => v,
            (None, Some(t)) => enum_from_token("backend", t)?,
            (None, None) => BackendArg::Auto,
        };
        let n = match (self.n, get("n")) {
            (Some(v), _) => v,
            (None, Some(t)) => parse_scalar("n", t)?,
            (None, None) => 8,
        };
        let n_list = match (&self.n_list, get("n_list")) {
            (Some(v), _) => v.clone(),
            (None, Some(t)) => parse_list("n_list", t)?,
            (None, None) => vec![8, 16, 32, 64],
        };
        let w = match (self.w, get("w")) {
            (Some(v), _) => v,
            (None, Some(t)) => parse_scalar("w", t)?,
            (None, None) => 1.0,
        };
        let w_list = match (&self.w_list, get("w_list")) {
            (Some(v), _) => v.clone(),
            (None, Some(t)) => parse_list("w_list", t)?,
            (None, None) => default_w_list(),
        };
        let modes = match (self.modes, get("modes")) {
            (Some(v), _) => v,
            (None, Some(t)) => parse_scalar("modes", t)?,
            (None, None) => 6,
        };
        let seed = match (self.seed, get("seed")) {
            (Some(v), _) => v,
            (None, Some(t)) => parse_scalar("seed", t)?,
            (None, None) => 0,
        };
        let out = match (&self.out, get("out")) {
            (Some(v), _) => v.clone(),
            (None, Some(t)) => PathBuf::from(t),
            (None, None) => PathBuf::from("."),
        };
        let path_opt = |flag: &Option<PathBuf>, key: &str| -> Option<PathBuf> {
            flag.clone().or_else(|| get(key).map(PathBuf::from))
        };
        let mesh_out = path_opt(&self.mesh_out, "mesh_out");
        let vtk_out = path_opt(&self.vtk_out, "vtk_out");
        let dump = path_opt(&self.dump_matrices, "dump_matrices");

        StabWeight::new(w)?;
        for &wi in &w_list {
            StabWeight::new(wi)?;
        }
        if modes == 0 {
            return Err(Error::InvalidConfig("modes must be positive".into()));
        }
        if n == 0 || n_list.iter().any(|&ni| ni == 0) {
            return Err(Error::InvalidConfig("refinement level must be positive".into()));
        }

        let backend = match backend_arg {
            BackendArg::Auto => None,
            BackendArg::Dense => Some(Backend::Dense),
            BackendArg::ShiftInvert => Some(Backend::ShiftInvert),
        };
        Ok(ResolvedConfig {
            domain: domain_arg.to_domain(),
            bc: bc_arg.to_bc(),
            family: family_arg.to_family(),
            n,
            n_list,
            w,
            w_list,
            modes,
            seed,
            backend,
            out,
            mesh_out,
            vtk_out,
            dump_matrices: dump,
            domain_arg,
            bc_arg,
            family_arg,
            backend_arg,
        })
    }

    /// Echo of only the flags that were given, for failure manifests.
    fn raw_echo(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        if let Some(p) = &self.config {
            map.insert("config".into(), p.display().to_string());
        }
        if let Some(v) = self.domain {
            map.insert("domain".into(), enum_token(v));
        }
        if let Some(v) = self.bc {
            map.insert("bc".into(), enum_token(v));
        }
        if let Some(v) = self.family {
            map.insert("family".into(), enum_token(v));
        }
        if let Some(v) = self.n {
            map.insert("n".into(), v.to_string());
        }
        if let Some(v) = &self.n_list {
            map.insert("n_list".into(), join_items(v));
        }
        if let Some(v) = self.w {
            map.insert("w".into(), v.to_string());
        }
        if let Some(v) = &self.w_list {
            map.insert("w_list".into(), join_items(v));
        }
        if let Some(v) = self.modes {
            map.insert("modes".into(), v.to_string());
        }
        if let Some(v) = self.seed {
            map.insert("seed".into(), v.to_string());
        }
        if let Some(v) = self.backend {
            map.insert("backend".into(), enum_token(v));
        }
        if let Some(p) = &self.out {
            map.insert("out".into(), p.display().to_string());
        }
        map
    }
}

fn join_items<T: ToString>(items: &[T]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

impl ResolvedConfig {
    /// Full resolved configuration for the manifest.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        map.insert("domain".into(), enum_token(self.domain_arg));
        map.insert("bc".into(), enum_token(self.bc_arg));
        map.insert("family".into(), enum_token(self.family_arg));
        map.insert("n".into(), self.n.to_string());
        map.insert("n_list".into(), join_items(&self.n_list));
        map.insert("w".into(), self.w.to_string());
        map.insert("w_list".into(), join_items(&self.w_list));
        map.insert("modes".into(), self.modes.to_string());
        map.insert("seed".into(), self.seed.to_string());
        map.insert("backend".into(), enum_token(self.backend_arg));
        map.insert("out".into(), self.out.display().to_string());
        if let Some(p) = &self.mesh_out {
            map.insert("mesh_out".into(), p.display().to_string());
        }
        if let Some(p) = &self.vtk_out {
            map.insert("vtk_out".into(), p.display().to_string());
        }
        if let Some(p) = &self.dump_matrices {
            map.insert("dump_matrices".into(), p.display().to_string());
        }
        map
    }

    fn build_mesh(&self) -> Result<PolygonalMesh> {
        let mesh = generate(self.domain, self.family, self.n, self.seed)?;
        tag_boundary(mesh, self.bc)
    }
}

fn record_file(manifest: &mut RunManifest, path: &Path) {
    manifest.files.push(path.display().to_string());
}

fn cmd_mesh(cfg: &ResolvedConfig, manifest: &mut RunManifest, clock: &mut StageClock) -> Result<()> {
    let mesh = cfg.build_mesh()?;
    clock.mark("mesh");
    let q = quality(&mesh);
    let path = cfg
        .mesh_out
        .clone()
        .unwrap_or_else(|| cfg.out.join("mesh.txt"));
    write_poly_mesh(&mesh, &path)?;
    record_file(manifest, &path);
    clock.mark("write");
    println!(
        "vertices: {}  edges: {}  cells: {}",
        mesh.vertices.len(),
        mesh.edges.len(),
        mesh.cells.len()
    );
    println!(
        "quality: min edge/diameter {}  min inradius/diameter {}  all convex {}",
        fmt_sig(q.min_edge_to_diameter, 6),
        fmt_sig(q.min_inradius_to_diameter, 6),
        q.all_convex
    );
    Ok(())
}

#[derive(Serialize)]
struct SolveSummary {
    lambdas: Vec<f64>,
    residuals: Vec<f64>,
    backend: String,
    n_sigma: usize,
    n_u: usize,
}

fn solve_once(cfg: &ResolvedConfig, clock: &mut StageClock) -> Result<(PolygonalMesh, crate::assembly::DofMap, crate::assembly::GlobalPencil, EigenResult, Backend)> {
    let mesh = cfg.build_mesh()?;
    clock.mark("mesh");
    let (pencil, dofs) = assemble(&mesh, StabWeight::new(cfg.w)?)?;
    clock.mark("assemble");
    let backend = cfg
        .backend
        .unwrap_or_else(|| auto_backend(pencil.w, pencil.n_u()));
    let result = solve_eigen(
        &pencil,
        &SolveOptions {
            m: cfg.modes,
            tol: 1e-10,
            backend,
        },
    )?;
    clock.mark("solve");
    Ok((mesh, dofs, pencil, result, backend))
}

fn cmd_solve(cfg: &ResolvedConfig, manifest: &mut RunManifest, clock: &mut StageClock) -> Result<()> {
    let (mesh, dofs, pencil, result, backend) = solve_once(cfg, clock)?;
    let mut rows = vec![vec![
        "mode".to_string(),
        "lambda".to_string(),
        "residual".to_string(),
    ]];
    for (i, (lam, res)) in result.lambdas.iter().zip(&result.residuals).enumerate() {
        rows.push(vec![
            (i + 1).to_string(),
            fmt_sig(*lam, 6),
            format!("{res:.5e}"),
        ]);
        println!("lambda_{} = {}", i + 1, fmt_sig(*lam, 6));
    }
    let csv_path = cfg.out.join("eigenvalues.csv");
    write_csv(&csv_path, &rows)?;
    record_file(manifest, &csv_path);
    let json_path = cfg.out.join("eigenvalues.json");
    write_json(
        &json_path,
        &SolveSummary {
            lambdas: result.lambdas.clone(),
            residuals: result.residuals.clone(),
            backend: backend.to_string(),
            n_sigma: pencil.n_sigma(),
            n_u: pencil.n_u(),
        },
    )?;
    record_file(manifest, &json_path);
    if let Some(path) = &cfg.mesh_out {
        write_poly_mesh(&mesh, path)?;
        record_file(manifest, path);
    }
    if let Some(dir) = &cfg.vtk_out {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("modes.vtk");
        write_vtk_modes(&mesh, &dofs, &result, &path)?;
        record_file(manifest, &path);
    }
    if let Some(dir) = &cfg.dump_matrices {
        for path in dump_matrices(&pencil, dir)? {
            record_file(manifest, &path);
        }
    }
    clock.mark("write");
    Ok(())
}

#[derive(Serialize)]
struct FittedModel {
    lambda_limit: f64,
    order: f64,
    constant: f64,
}

#[derive(Serialize)]
struct ConvergenceSummary {
    study: ConvergenceStudy,
    fits: Vec<Option<FittedModel>>,
}

fn convergence_rows(study: &ConvergenceStudy) -> Vec<Vec<String>> {
    let modes = study.lambda_series.len();
    let mut rows = Vec::new();
    let mut header = vec!["N".to_string()];
    for j in 0..modes {
        header.push(format!("lambda_{}", j + 1));
    }
    rows.push(header);
    for (level, &n) in study.n_values.iter().enumerate() {
        let mut row = vec![n.to_string()];
        for series in &study.lambda_series {
            row.push(fmt_sig(series[level], 6));
        }
        rows.push(row);
    }
    let mut order_row = vec!["Order".to_string()];
    for &o in &study.orders {
        order_row.push(fmt_sig(o, 6));
    }
    rows.push(order_row);
    let label = match study.reference_provenance {
        crate::analysis::Provenance::ClosedForm => "Exact",
        crate::analysis::Provenance::Extrapolated => "Extrap.",
    };
    let mut ref_row = vec![label.to_string()];
    for &r in &study.reference {
        ref_row.push(fmt_sig(r, 6));
    }
    rows.push(ref_row);
    rows
}

fn cmd_convergence(
    cfg: &ResolvedConfig,
    manifest: &mut RunManifest,
    clock: &mut StageClock,
) -> Result<()> {
    let study = convergence_study(&StudyConfig {
        domain: cfg.domain,
        family: cfg.family,
        bc: cfg.bc,
        n_list: cfg.n_list.clone(),
        w: StabWeight::new(cfg.w)?,
        modes: cfg.modes,
        seed: cfg.seed,
        backend: cfg.backend,
        tol: 1e-10,
    })?;
    clock.mark("study");
    let csv_path = cfg.out.join("convergence.csv");
    write_csv(&csv_path, &convergence_rows(&study))?;
    record_file(manifest, &csv_path);
    let fits = study
        .lambda_series
        .iter()
        .map(|series| {
            if study.h_values.len() < 3 {
                return None;
            }
            extrapolate(&study.h_values, series)
                .ok()
                .map(|(lambda_limit, order, constant)| FittedModel {
                    lambda_limit,
                    order,
                    constant,
                })
        })
        .collect();
    let json_path = cfg.out.join("convergence.json");
    write_json(&json_path, &ConvergenceSummary { study: study.clone(), fits })?;
    record_file(manifest, &json_path);
    clock.mark("write");
    for (j, o) in study.orders.iter().enumerate() {
        println!("order lambda_{} = {}", j + 1, fmt_sig(*o, 6));
    }
    Ok(())
}

fn sweep_rows(table: &SweepTable) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    let mut header = vec!["w".to_string()];
    for &n in &table.n_list {
        header.push(format!("N={n}"));
    }
    header.push("Order".to_string());
    rows.push(header);
    for row in &table.rows {
        let mut line = vec![fmt_sig(row.w, 6)];
        for level in &row.lambdas {
            line.push(fmt_sig(level[0], 6));
        }
        line.push(fmt_sig(row.order_mode1, 6));
        rows.push(line);
    }
    rows
}

fn cmd_sweep(cfg: &ResolvedConfig, manifest: &mut RunManifest, clock: &mut StageClock) -> Result<()> {
    let table = stabilization_sweep(
        cfg.domain,
        cfg.family,
        &cfg.n_list,
        &cfg.w_list,
        cfg.bc,
        cfg.modes,
        cfg.seed,
    )?;
    clock.mark("sweep");
    let csv_path = cfg.out.join("sweep.csv");
    write_csv(&csv_path, &sweep_rows(&table))?;
    record_file(manifest, &csv_path);
    let json_path = cfg.out.join("sweep.json");
    write_json(&json_path, &table)?;
    record_file(manifest, &json_path);
    clock.mark("write");
    for row in &table.rows {
        println!("w = {}  order = {}", fmt_sig(row.w, 6), fmt_sig(row.order_mode1, 6));
    }
    Ok(())
}

#[derive(Serialize)]
struct SpuriousSummary {
    computed: Vec<f64>,
    reference: Vec<f64>,
    report: SpuriousReport,
}

fn cmd_spurious(
    cfg: &ResolvedConfig,
    manifest: &mut RunManifest,
    clock: &mut StageClock,
) -> Result<()> {
    let (_, _, _, result, _) = solve_once(cfg, clock)?;
    let exact = exact_spectrum(cfg.domain, cfg.bc, cfg.modes + 6)?;
    let report = detect_spurious(&result.lambdas, &exact, SPURIOUS_WINDOW);
    clock.mark("match");
    let json_path = cfg.out.join("spurious.json");
    write_json(
        &json_path,
        &SpuriousSummary {
            computed: result.lambdas.clone(),
            reference: exact.values.clone(),
            report: report.clone(),
        },
    )?;
    record_file(manifest, &json_path);
    clock.mark("write");
    println!(
        "flagged {} of {} computed eigenvalues",
        report.flagged.len(),
        result.lambdas.len()
    );
    for v in &report.flagged {
        println!("spurious: {}", fmt_sig(*v, 6));
    }
    Ok(())
}

fn dispatch(
    name: &str,
    cfg: &ResolvedConfig,
    manifest: &mut RunManifest,
    clock: &mut StageClock,
) -> Result<()> {
    std::fs::create_dir_all(&cfg.out)?;
    match name {
        "mesh" => cmd_mesh(cfg, manifest, clock),
        "solve" => cmd_solve(cfg, manifest, clock),
        "convergence" => cmd_convergence(cfg, manifest, clock),
        "sweep" => cmd_sweep(cfg, manifest, clock),
        "spurious" => cmd_spurious(cfg, manifest, clock),
        other => Err(Error::InvalidConfig(format!("unknown subcommand {other}"))),
    }
}

/// Run a parsed command line to completion, writing the manifest in every
/// case.
pub fn execute(cli: &Cli) -> Result<()> {
    let (name, args) = cli.command.parts();
    let cfg = match args.resolve() {
        Ok(cfg) => cfg,
        Err(e) => {
            let mut manifest = RunManifest::new(name, args.raw_echo());
            manifest.status = format!("error: {e}");
            let out = args.out.clone().unwrap_or_else(|| PathBuf::from("."));
            if std::fs::create_dir_all(&out).is_ok() {
                let _ = manifest.write(&out.join(MANIFEST_FILE));
            }
            return Err(e);
        }
    };
    let mut manifest = RunManifest::new(name, cfg.echo());
    let mut clock = StageClock::new();
    let result = dispatch(name, &cfg, &mut manifest, &mut clock);
    manifest.stages = clock.stages().to_vec();
    if let Err(e) = &result {
        manifest.status = format!("error: {e}");
    }
    let manifest_path = cfg.out.join(MANIFEST_FILE);
    manifest.write(&manifest_path)?;
    result
}

/// Parse the process arguments, run, and translate errors to exit codes.
pub fn run() -> std::process::ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::ExitCode::from(e.exit_code())
        }
    }
}
