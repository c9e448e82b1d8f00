//! Batch command line front end: mesh generation, single solves and the three
//! experiment suites, each writing its outputs plus a run manifest.

mod config;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::analysis::{
    benchmark_grad, benchmark_u, convergence_study, decay_exponent, energy_error_pi, energy_seminorm, inverse_lab_bubble,
    inverse_lab_gll, inverse_lab_hminus1, inverse_lab_triangle, inverse_lab_weighted, skeleton_l2_error, stability_table,
    ConvergenceConfig, ConvergenceStudy, DegreePolicy, InverseLabRecord, LinearFit, Method, Shape, SpectrumReport,
    StabilityOptions, SINGULAR_REFINEMENT_LEVELS,
};
use crate::assemble::{assign_degrees, solve_poisson};
use crate::error::Error;
use crate::fem_quad::fem_assemble_solve;
use crate::mesh::{build_graded_mesh, serialize_mesh, MeshFamily};
use crate::oracle::{DEFAULT_FEM_DEGREE, DEFAULT_LEVEL};
use crate::Point;

pub use config::{parse_sigma, parse_stabilization, ConfigFile, Settings};

/// Exit status for invalid input (flags, config values, library preconditions).
pub const EXIT_USAGE: i32 = 2;
/// Exit status for failures while running a valid configuration.
pub const EXIT_RUNTIME: i32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{flag}: {message}")]
    Usage { flag: String, message: String },

    #[error(transparent)]
    Library(#[from] Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn usage(flag: &str, message: impl Into<String>) -> Self {
        CliError::Usage { flag: flag.into(), message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage { .. } => EXIT_USAGE,
            CliError::Library(e) => match e.root() {
                Error::InvalidParameter(_)
                | Error::InvalidDegree(_)
                | Error::DegreeTooLow(_)
                | Error::Parse { .. }
                | Error::NonConforming(_) => EXIT_USAGE,
                _ => EXIT_RUNTIME,
            },
            CliError::Io { .. } => EXIT_RUNTIME,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "hpvem", version, about = "hp virtual elements on graded meshes of the L-shaped domain")]
pub struct Cli {
    /// Worker threads (defaults to the machine's parallelism).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Flat key-value TOML file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Directory for outputs named by config hash when `--out` is not given.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a graded mesh and write it as JSON.
    Mesh(MeshArgs),
    /// Solve the corner-singularity benchmark once and write the solution.
    Solve(SolveArgs),
    /// Convergence study of the benchmark over a range of meshes.
    Convergence(StudyArgs),
    /// VEM on the polygonal families against hp-FEM on the tensor mesh.
    CompareFem(CompareArgs),
    /// Extreme eigenvalues of the local stability experiment.
    StabilityTable(StabilityArgs),
    /// Numerical checks of polynomial inverse estimates.
    InverseLab(InverseArgs),
}

#[derive(Debug, Args, Default)]
pub struct MeshArgs {
    /// a, b, c or d.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Number in (0, 1) or one of `1/2`, `sqrt2-1`, `(sqrt2-1)^2`.
    #[arg(long)]
    pub sigma: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct SolveArgs {
    #[command(flatten)]
    pub mesh: MeshArgs,
    /// `uniform:k`, `layered:μ` or `uniform:n+1`.
    #[arg(long)]
    pub degrees: Option<String>,
    /// boundary, gll, table or dofi-dofi.
    #[arg(long)]
    pub stab: Option<String>,
    /// vem or fem (fem needs family d).
    #[arg(long)]
    pub method: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct StudyArgs {
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub sigma: Option<String>,
    #[arg(long)]
    pub degrees: Option<String>,
    #[arg(long)]
    pub stab: Option<String>,
    #[arg(long)]
    pub nmin: Option<usize>,
    #[arg(long)]
    pub nmax: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct CompareArgs {
    /// VEM families to compare, comma separated.
    #[arg(long)]
    pub families: Option<String>,
    #[arg(long)]
    pub sigma: Option<String>,
    #[arg(long)]
    pub degrees: Option<String>,
    #[arg(long)]
    pub stab: Option<String>,
    #[arg(long)]
    pub nmin: Option<usize>,
    #[arg(long)]
    pub nmax: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct StabilityArgs {
    /// square, decagon, hexagon or all.
    #[arg(long)]
    pub shape: Option<String>,
    #[arg(long)]
    pub pmin: Option<usize>,
    #[arg(long)]
    pub pmax: Option<usize>,
    #[arg(long)]
    pub stab: Option<String>,
    /// Refinement level of the fine reference space.
    #[arg(long)]
    pub level: Option<usize>,
    /// Element degree of the fine reference space.
    #[arg(long)]
    pub fem_degree: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct InverseArgs {
    /// weighted, gll, triangle, hminus1, bubble or all.
    #[arg(long)]
    pub test: Option<String>,
    #[arg(long)]
    pub pmin: Option<usize>,
    #[arg(long)]
    pub pmax: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Random polynomials per degree for the Gauss–Lobatto test.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub level: Option<usize>,
    #[arg(long)]
    pub fem_degree: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(report) => {
            println!("{report}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command on a pool of `--jobs` threads; returns a short summary.
pub fn execute(cli: &Cli) -> CliResult<String> {
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let jobs = match cli.jobs.or(file.get_parsed::<usize>("jobs")?) {
        Some(0) => return Err(CliError::usage("--jobs", "must be at least 1")),
        j => j,
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| CliError::usage("--jobs", e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Mesh(a) => run_mesh(a, &file, &cli.out_dir),
        Command::Solve(a) => run_solve(a, &file, &cli.out_dir),
        Command::Convergence(a) => run_convergence(a, &file, &cli.out_dir),
        Command::CompareFem(a) => run_compare(a, &file, &cli.out_dir),
        Command::StabilityTable(a) => run_stability(a, &file, &cli.out_dir),
        Command::InverseLab(a) => run_inverse(a, &file, &cli.out_dir),
    })
}

/// Manifest written next to every output.
#[derive(Debug, Serialize)]
struct Manifest {
    command: String,
    version: String,
    config_hash: String,
    started_unix: u64,
    outputs: Vec<String>,
    config: BTreeMap<String, String>,
    /// Wall time per stage in seconds.
    stages: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    fits: BTreeMap<String, LinearFit>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    summary: BTreeMap<String, f64>,
    /// Wall time of every CSV row, in row order.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    row_seconds: Vec<f64>,
}

impl Manifest {
    fn new(settings: &Settings) -> Self {
        Manifest {
            command: settings.command.clone(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: settings.hash(),
            started_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            outputs: Vec::new(),
            config: settings.values.clone(),
            stages: BTreeMap::new(),
            fits: BTreeMap::new(),
            summary: BTreeMap::new(),
            row_seconds: Vec::new(),
        }
    }

    fn write(&self, output: &Path) -> CliResult<PathBuf> {
        let path = output.with_extension("manifest.toml");
        let text = toml::to_string(self).map_err(|e| CliError::Library(Error::InvalidParameter(e.to_string())))?;
        write_file(&path, &text)?;
        Ok(path)
    }
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    }
    fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn output_path(out: &Option<PathBuf>, out_dir: &Path, settings: &Settings, ext: &str) -> PathBuf {
    out.clone()
        .unwrap_or_else(|| out_dir.join(format!("{}-{}.{ext}", settings.command, &settings.hash()[..12])))
}

/// CSV text: a `# config <hash>` line, then header and rows.
fn csv_text<R: Serialize>(hash: &str, rows: &[R]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Library(Error::InvalidParameter(e.to_string())))?;
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv");
    Ok(format!("# config {hash}\n{body}"))
}

fn finish(manifest: &mut Manifest, output: &Path, text: &str) -> CliResult<String> {
    write_file(output, text)?;
    manifest.outputs.push(output.display().to_string());
    let m = manifest.write(output)?;
    Ok(format!("wrote {} and {}", output.display(), m.display()))
}

fn run_mesh(a: &MeshArgs, file: &ConfigFile, out_dir: &Path) -> CliResult<String> {
    let mut s = Settings::new("mesh", file);
    let family: MeshFamily = s.parse("family", &a.family, Some("a"))?;
    let n: usize = s.value("n", a.n, Some(4))?;
    let sigma = s.sigma(&a.sigma)?;
    let start = Instant::now();
    let mesh = build_graded_mesh(family, n, sigma)?;
    let mut manifest = Manifest::new(&s);
    manifest.stages.insert("build".into(), start.elapsed().as_secs_f64());
    let out = output_path(&a.out, out_dir, &s, "json");
    let msg = finish(&mut manifest, &out, &serialize_mesh(&mesh))?;
    Ok(format!("{} cells, {} vertices; {msg}", mesh.n_cells(), mesh.vertices.len()))
}

#[derive(Debug, Serialize)]
struct SolutionFile {
    kind: Method,
    config_hash: String,
    family: MeshFamily,
    sigma: f64,
    n: usize,
    rule: String,
    n_dofs: usize,
    n_free: usize,
    solver: String,
    relative_residual: f64,
    err_energy: f64,
    err_skeleton: f64,
    values: Vec<f64>,
}

fn run_solve(a: &SolveArgs, file: &ConfigFile, out_dir: &Path) -> CliResult<String> {
    let mut s = Settings::new("solve", file);
    let family: MeshFamily = s.parse("family", &a.mesh.family, Some("a"))?;
    let n: usize = s.value("n", a.mesh.n, Some(4))?;
    let sigma = s.sigma(&a.mesh.sigma)?;
    let policy: DegreePolicy = s.parse("degrees", &a.degrees, Some("layered:1"))?;
    let stab = s.stabilization(&a.stab)?;
    let method = match s.string("method", &a.method, Some("vem"))?.as_str() {
        "vem" => Method::Vem,
        "fem" => Method::Fem,
        other => return Err(CliError::usage("--method", format!("`{other}` is not one of vem, fem"))),
    };
    let rule = policy.rule_for(n);
    let start = Instant::now();
    let mesh = build_graded_mesh(family, n, sigma)?;
    let norm = energy_seminorm(&mesh, 2, benchmark_grad)?;
    let file_out = match method {
        Method::Vem => {
            let degrees = assign_degrees(&mesh, rule)?;
            let (sys, sol) = solve_poisson(&mesh, &degrees, stab, |_| 0.0, benchmark_u)?;
            SolutionFile {
                kind: method,
                config_hash: s.hash(),
                family,
                sigma,
                n,
                rule: rule.to_string(),
                n_dofs: sys.dof_map.n_dofs,
                n_free: sys.dof_map.n_free,
                solver: format!("{:?}", sol.solver),
                relative_residual: sol.relative_residual,
                err_energy: energy_error_pi(&sys, &mesh, &sol.values, benchmark_grad)? / norm,
                err_skeleton: skeleton_l2_error(&mesh, &sys.dof_map, &sol.values, benchmark_u),
                values: sol.values,
            }
        }
        Method::Fem => {
            let sol = fem_assemble_solve(&mesh, rule, |_| 0.0, benchmark_u)?;
            SolutionFile {
                kind: method,
                config_hash: s.hash(),
                family,
                sigma,
                n,
                rule: rule.to_string(),
                n_dofs: sol.n_dofs,
                n_free: sol.n_free,
                solver: format!("{:?}", sol.solver.solver),
                relative_residual: sol.solver.relative_residual,
                err_energy: sol.energy_error(benchmark_grad, Point::origin(), SINGULAR_REFINEMENT_LEVELS) / norm,
                err_skeleton: sol.skeleton_l2_error(benchmark_u),
                values: sol.values.clone(),
            }
        }
    };
    let mut manifest = Manifest::new(&s);
    manifest.stages.insert("solve".into(), start.elapsed().as_secs_f64());
    manifest.summary.insert("err_energy".into(), file_out.err_energy);
    manifest.summary.insert("err_skeleton".into(), file_out.err_skeleton);
    let out = output_path(&a.mesh.out, out_dir, &s, "json");
    let mut text = serde_json::to_string_pretty(&file_out).expect("serializable");
    text.push('\n');
    let msg = finish(&mut manifest, &out, &text)?;
    Ok(format!(
        "N = {}, relative energy error {:.4e}, skeleton error {:.4e}; {msg}",
        file_out.n_free, file_out.err_energy, file_out.err_skeleton
    ))
}

#[derive(Debug, Serialize)]
struct ConvergenceRow {
    family: MeshFamily,
    sigma: f64,
    rule: String,
    n: usize,
    #[serde(rename = "N")]
    n_dofs: usize,
    err_energy: f64,
    err_skeleton: f64,
    /// Left empty so reruns are byte-identical; timings are in the manifest.
    seconds: Option<f64>,
}

fn study_rows(study: &ConvergenceStudy) -> Vec<ConvergenceRow> {
    study
        .records
        .iter()
        .map(|r| ConvergenceRow {
            family: r.family,
            sigma: r.sigma,
            rule: r.rule.clone(),
            n: r.n,
            n_dofs: r.n_dofs,
            err_energy: r.err_energy,
            err_skeleton: r.err_skeleton,
            seconds: None,
        })
        .collect()
}

fn record_study(manifest: &mut Manifest, tag: &str, study: &ConvergenceStudy) {
    if let Some(f) = study.energy_fit {
        manifest.fits.insert(format!("{tag}energy"), f);
    }
    if let Some(f) = study.skeleton_fit {
        manifest.fits.insert(format!("{tag}skeleton"), f);
    }
    manifest.row_seconds.extend(study.records.iter().map(|r| r.seconds));
    for r in study.records.iter().filter(|r| r.failure.is_some()) {
        eprintln!("warning: {tag}n = {} failed: {}", r.n, r.failure.as_deref().unwrap_or_default());
    }
}

fn range(s: &mut Settings, lo: (&str, Option<usize>, usize), hi: (&str, Option<usize>, usize)) -> CliResult<(usize, usize)> {
    let a: usize = s.value(lo.0, lo.1, Some(lo.2))?;
    let b: usize = s.value(hi.0, hi.1, Some(hi.2))?;
    if a > b {
        return Err(CliError::usage(&format!("--{}", lo.0), format!("{a} exceeds --{} = {b}", hi.0)));
    }
    Ok((a, b))
}

fn run_convergence(a: &StudyArgs, file: &ConfigFile, out_dir: &Path) -> CliResult<String> {
    let mut s = Settings::new("convergence", file);
    let family: MeshFamily = s.parse("family", &a.family, Some("a"))?;
    let sigma = s.sigma(&a.sigma)?;
    let degrees: DegreePolicy = s.parse("degrees", &a.degrees, Some("layered:1"))?;
    let stabilization = s.stabilization(&a.stab)?;
    let (n_min, n_max) = range(&mut s, ("nmin", a.nmin, 1), ("nmax", a.nmax, 8))?;
    let method = if family == MeshFamily::TensorQuadsFem { Method::Fem } else { Method::Vem };
    let start = Instant::now();
    let study = convergence_study(&ConvergenceConfig { family, sigma, degrees, stabilization, n_min, n_max, method })?;
    let mut manifest = Manifest::new(&s);
    manifest.stages.insert("study".into(), start.elapsed().as_secs_f64());
    record_study(&mut manifest, "", &study);
    let out = output_path(&a.out, out_dir, &s, "csv");
    let text = csv_text(&manifest.config_hash, &study_rows(&study))?;
    let msg = finish(&mut manifest, &out, &text)?;
    let fit = study.energy_fit.map_or("no fit".into(), |f| format!("fit slope {:.4}, R² {:.4}", f.slope, f.r2));
    Ok(format!("{} rows, {fit}; {msg}", study.records.len()))
}

fn run_compare(a: &CompareArgs, file: &ConfigFile, out_dir: &Path) -> CliResult<String> {
    let mut s = Settings::new("compare-fem", file);
    let families_text = s.string("families", &a.families, Some("a,b,c"))?;
    let families = families_text
        .split(',')
        .map(|t| t.trim().parse::<MeshFamily>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::usage("--families", e.to_string()))?;
    if families.contains(&MeshFamily::TensorQuadsFem) {
        return Err(CliError::usage("--families", "family d is the FEM side and is always included"));
    }
    let sigma = s.sigma(&a.sigma)?;
    let degrees: DegreePolicy = s.parse("degrees", &a.degrees, Some("layered:1"))?;
    let stabilization = s.stabilization(&a.stab)?;
    let (n_min, n_max) = range(&mut s, ("nmin", a.nmin, 1), ("nmax", a.nmax, 6))?;
    let mut manifest = Manifest::new(&s);
    let mut rows = Vec::new();
    let runs = std::iter::once((MeshFamily::TensorQuadsFem, Method::Fem)).chain(families.iter().map(|&f| (f, Method::Vem)));
    for (family, method) in runs {
        let start = Instant::now();
        let study = convergence_study(&ConvergenceConfig { family, sigma, degrees, stabilization, n_min, n_max, method })?;
        manifest.stages.insert(format!("{method}-{family}"), start.elapsed().as_secs_f64());
        record_study(&mut manifest, &format!("{method}-{family}-"), &study);
        rows.extend(study_rows(&study));
    }
    let out = output_path(&a.out, out_dir, &s, "csv");
    let text = csv_text(&manifest.config_hash, &rows)?;
    let msg = finish(&mut manifest, &out, &text)?;
    Ok(format!("{} rows; {msg}", rows.len()))
}

#[derive(Debug, Serialize)]
struct StabilityRow {
    shape: Shape,
    p: usize,
    lambda_min: f64,
    lambda_max: f64,
    oracle_level: usize,
    converged: bool,
}

fn run_stability(a: &StabilityArgs, file: &ConfigFile, out_dir: &Path) -> CliResult<String> {
    let mut s = Settings::new("stability-table", file);
    let shape_text = s.string("shape", &a.shape, Some("all"))?;
    let shapes = match shape_text.as_str() {
        "all" => Shape::ALL.to_vec(),
        t => vec![t.parse::<Shape>().map_err(|e| CliError::usage("--shape", e.to_string()))?],
    };
    let (p_min, p_max) = range(&mut s, ("pmin", a.pmin, 2), ("pmax", a.pmax, 10))?;
    if p_min < 2 {
        return Err(CliError::usage("--pmin", format!("{p_min} is below the minimum degree 2")));
    }
    let stabilization = s.stabilization(&a.stab)?;
    let level: usize = s.value("level", a.level, Some(DEFAULT_LEVEL))?;
    let fem_degree: usize = s.value("fem-degree", a.fem_degree, Some(DEFAULT_FEM_DEGREE))?;
    if !(1..=6).contains(&fem_degree) {
        return Err(CliError::usage("--fem-degree", format!("{fem_degree} is outside 1..=6")));
    }
    let opts = StabilityOptions { stabilization, level, fem_degree, check_convergence: true };
    let degrees: Vec<usize> = (p_min..=p_max).collect();
    let mut manifest = Manifest::new(&s);
    let mut reports: Vec<SpectrumReport> = Vec::new();
    for shape in shapes {
        let start = Instant::now();
        let r = stability_table(shape, &shape.polygon(), &degrees, &opts)?;
        manifest.stages.insert(shape.to_string(), start.elapsed().as_secs_f64());
        if let Some(e) = decay_exponent(&r) {
            manifest.summary.insert(format!("{shape}-decay-exponent"), e);
        }
        let worst = r.iter().map(|x| x.change).fold(0.0, f64::max);
        manifest.summary.insert(format!("{shape}-oracle-change"), worst);
        reports.extend(r);
    }
    let rows: Vec<StabilityRow> = reports
        .iter()
        .map(|r| StabilityRow {
            shape: r.shape,
            p: r.p,
            lambda_min: r.lambda_min,
            lambda_max: r.lambda_max,
            oracle_level: r.oracle_level,
            converged: r.converged,
        })
        .collect();
    let unconverged = rows.iter().filter(|r| !r.converged).count();
    if unconverged > 0 {
        eprintln!("warning: {unconverged} rows changed by 1% or more against the coarser reference space");
    }
    let out = output_path(&a.out, out_dir, &s, "csv");
    let text = csv_text(&manifest.config_hash, &rows)?;
    let msg = finish(&mut manifest, &out, &text)?;
    Ok(format!("{} rows; {msg}", rows.len()))
}

#[derive(Debug, Serialize)]
struct InverseRow {
    test: String,
    p: usize,
    constant: f64,
    fitted_exponent: f64,
}

const INVERSE_TESTS: [&str; 5] = ["weighted", "gll", "triangle", "hminus1", "bubble"];

fn run_inverse(a: &InverseArgs, file: &ConfigFile, out_dir: &Path) -> CliResult<String> {
    let mut s = Settings::new("inverse-lab", file);
    let test = s.string("test", &a.test, Some("all"))?;
    let tests: Vec<&str> = match test.as_str() {
        "all" => INVERSE_TESTS.to_vec(),
        t if INVERSE_TESTS.contains(&t) => vec![INVERSE_TESTS[INVERSE_TESTS.iter().position(|x| *x == t).unwrap()]],
        t => return Err(CliError::usage("--test", format!("`{t}` is not one of {} or all", INVERSE_TESTS.join(", ")))),
    };
    let p_min: Option<usize> = s.optional("pmin", a.pmin)?;
    let p_max: Option<usize> = s.optional("pmax", a.pmax)?;
    let alpha: f64 = s.value("alpha", a.alpha, Some(0.0))?;
    let beta: f64 = s.value("beta", a.beta, Some(1.0))?;
    let samples: usize = s.value("samples", a.samples, Some(500))?;
    let seed: u64 = s.value("seed", a.seed, Some(0))?;
    let level: usize = s.value("level", a.level, Some(DEFAULT_LEVEL))?;
    let fem_degree: usize = s.value("fem-degree", a.fem_degree, Some(DEFAULT_FEM_DEGREE))?;
    let mut manifest = Manifest::new(&s);
    let mut rows: Vec<InverseLabRecord> = Vec::new();
    for t in tests {
        let (lo, hi) = match t {
            "gll" => (1, 20),
            "hminus1" => (0, 10),
            _ => (0, 20),
        };
        let lo = p_min.unwrap_or(lo).max(if t == "gll" { 1 } else { 0 });
        let hi = p_max.unwrap_or(hi);
        if lo > hi {
            return Err(CliError::usage("--pmin", format!("{lo} exceeds --pmax = {hi}")));
        }
        let ps: Vec<usize> = (lo..=hi).collect();
        let start = Instant::now();
        let r = match t {
            "weighted" => inverse_lab_weighted(alpha, beta, &ps)?,
            "gll" => inverse_lab_gll(&ps, samples, seed)?,
            "triangle" => inverse_lab_triangle(&ps)?,
            "hminus1" => inverse_lab_hminus1(&Shape::Square.polygon(), &ps, level, fem_degree)?,
            _ => inverse_lab_bubble(&ps)?,
        };
        manifest.stages.insert(t.into(), start.elapsed().as_secs_f64());
        if r.iter().any(|x| !x.holds) {
            eprintln!("warning: sampled inequality violated in test {t}");
        }
        rows.extend(r);
    }
    let csv_rows: Vec<InverseRow> = rows
        .iter()
        .map(|r| InverseRow { test: r.test.clone(), p: r.p, constant: r.constant, fitted_exponent: r.fitted_exponent })
        .collect();
    let out = output_path(&a.out, out_dir, &s, "csv");
    let text = csv_text(&manifest.config_hash, &csv_rows)?;
    let msg = finish(&mut manifest, &out, &text)?;
    Ok(format!("{} rows; {msg}", csv_rows.len()))
}
