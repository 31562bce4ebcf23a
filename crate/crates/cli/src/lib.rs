//! Command-line driver: single solves, convergence studies and mesh export.

pub mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mixedfem::analysis::{FieldKind, NormKind, Rate};
use mixedfem::harness::{run_study, solve_at_level, HarnessError, StudySpec, PRESETS};
use mixedfem::io::{save_mesh_text, save_vertex_csv, save_vtk};
use mixedfem::linsolve::PreconditionerKind;
use mixedfem::mesh::{build_initial_mesh, refine_to_level, RefinementConfig};
use mixedfem::singular::CutoffProfile;
use mixedfem::solver::{Method, SolverError};

use config::{config_help, CliConfig, QuadratureSection, SolverSection, SourceValue};

pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_NUMERICAL: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "mixedfem", version, about = "P1 mixed finite elements for the Navier biharmonic problem")]
#[command(after_long_help = config_help())]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve on one level of a graded hierarchy and write fields and a report.
    #[command(after_long_help = config_help())]
    Solve(Common),
    /// Run a convergence study and write rate, gap and level tables.
    #[command(after_long_help = config_help())]
    Study {
        /// Built-in experiment: table1, table2 or table3-4.
        #[arg(long)]
        preset: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Write the refined mesh hierarchy as plain text and VTK.
    #[command(after_long_help = config_help())]
    Mesh(Common),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// TOML config file; see the key list below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in domain: square2 or lshape.
    #[arg(long)]
    pub domain: Option<String>,
    /// Initial triangulation in the plain text mesh format.
    #[arg(long)]
    pub mesh_file: Option<PathBuf>,
    /// Right-hand side: a number or "manufactured".
    #[arg(long)]
    pub f: Option<String>,
    /// Method (repeatable): modified or usual.
    #[arg(long = "method")]
    pub methods: Vec<Method>,
    /// Grading parameter in (0, 0.5] (repeatable for studies).
    #[arg(long = "kappa")]
    pub kappas: Vec<f64>,
    /// Number of refinement levels.
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub radius: Option<f64>,
    /// Cut-off profile: quintic or smooth.
    #[arg(long)]
    pub profile: Option<CutoffProfile>,
    /// Increment norm for rates.csv: h1 or h1semi.
    #[arg(long)]
    pub norm: Option<NormKind>,
    #[arg(long)]
    pub reference_level: Option<usize>,
    #[arg(long)]
    pub vtk_max_level: Option<usize>,
    /// Output directory.
    #[arg(long, short = 'o')]
    pub output_dir: Option<PathBuf>,
    /// none, jacobi or multigrid.
    #[arg(long)]
    pub preconditioner: Option<PreconditionerKind>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub subdivision_depth: Option<usize>,
}

impl Common {
    fn as_config(&self) -> CliConfig {
        let solver = (self.preconditioner.is_some()
            || self.tolerance.is_some()
            || self.max_iterations.is_some())
        .then_some(SolverSection {
            relative_tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            preconditioner: self.preconditioner,
        });
        let quadrature = self.subdivision_depth.map(|d| QuadratureSection {
            subdivision_depth: Some(d),
            base_rule_degree: None,
        });
        CliConfig {
            domain: self.domain.clone(),
            mesh_file: self.mesh_file.clone(),
            f: self.f.as_ref().map(|s| match s.parse::<f64>() {
                Ok(x) => SourceValue::Number(x),
                Err(_) => SourceValue::Name(s.clone()),
            }),
            methods: non_empty(&self.methods),
            kappas: non_empty(&self.kappas),
            levels: self.levels,
            tau: self.tau,
            radius: self.radius,
            profile: self.profile,
            norm: self.norm,
            reference_level: self.reference_level,
            vtk_max_level: self.vtk_max_level,
            output_dir: self.output_dir.clone(),
            solver,
            quadrature,
            ..CliConfig::default()
        }
    }

    /// The config file (if any) with the flags on top.
    pub fn resolve(&self) -> Result<CliConfig> {
        let file = match &self.config {
            Some(path) => CliConfig::load(path)?,
            None => CliConfig::default(),
        };
        Ok(file.overlay(self.as_config()))
    }
}

/// A failure inside a numerical computation rather than in the input.
#[derive(Debug)]
pub struct NumericalFailure(pub String);

impl std::fmt::Display for NumericalFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NumericalFailure {}

fn is_numerical_solver(e: &SolverError) -> bool {
    matches!(e, SolverError::Linear { .. } | SolverError::XiNormNotPositive(_))
}

/// Exit status for an error: numerical failures get 2, everything else 1.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<NumericalFailure>().is_some() {
            return EXIT_NUMERICAL;
        }
        if let Some(e) = cause.downcast_ref::<SolverError>() {
            if is_numerical_solver(e) {
                return EXIT_NUMERICAL;
            }
        }
        if let Some(HarnessError::Solver(e)) = cause.downcast_ref::<HarnessError>() {
            if is_numerical_solver(e) {
                return EXIT_NUMERICAL;
            }
        }
    }
    EXIT_VALIDATION
}

fn non_empty<T: Clone>(v: &[T]) -> Option<Vec<T>> {
    (!v.is_empty()).then(|| v.to_vec())
}

fn single<T: Copy + std::fmt::Display>(values: &[T], what: &str) -> Result<T> {
    match values {
        [v] => Ok(*v),
        _ => bail!("solve takes exactly one {what}, got {}", values.len()),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn cmd_solve(common: &Common, out: &mut impl Write) -> Result<()> {
    let cfg = common.resolve()?;
    let spec = cfg.to_study("solve", None)?;
    let kappa = single(&spec.kappas, "kappa")?;
    let level = spec.max_level;
    let dir = cfg.output_dir();
    create_dir(&dir)?;
    for &method in &spec.methods {
        let (mesh, report) = solve_at_level(&spec, kappa, level, method)?;
        let stem = format!("{method}_{kappa}_{level}");
        let mut fields: Vec<(&str, &[f64])> = vec![("u", report.u.values()), ("w", report.w.values())];
        if let Some(z) = &report.zeta {
            fields.push(("zeta", z.values()));
        }
        let title = format!("{} {method} kappa={kappa} level={level}", spec.domain_label);
        save_vtk(&dir.join(format!("{stem}.vtk")), &mesh, &title, &fields)?;
        save_vertex_csv(&dir.join(format!("{stem}.csv")), &mesh, &fields)?;
        let text = format!(
            "domain = \"{}\"\nf = \"{}\"\nkappa = {kappa}\nlevel = {level}\ntriangles = {}\ndofs = {}\n{}",
            spec.domain_label,
            spec.source,
            mesh.num_triangles(),
            mesh.num_free_vertices(),
            report.summary()
        );
        let path = dir.join(format!("{stem}_report.txt"));
        fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
        writeln!(out, "{text}")?;
    }
    Ok(())
}

pub fn cmd_study(preset: Option<&str>, common: &Common, out: &mut impl Write) -> Result<()> {
    let cfg = common.resolve()?;
    let base = preset.map(StudySpec::preset).transpose()?;
    let name = preset.unwrap_or("study");
    let spec = cfg.to_study(name, base)?;
    let result = run_study(&spec)?;
    writeln!(out, "study {name}: {} cells", result.cells.len())?;
    for cell in &result.cells {
        for field in [FieldKind::U, FieldKind::W] {
            let Some(table) = cell.rate_table(field, result.norm) else { continue };
            let rates: Vec<String> = table
                .records
                .iter()
                .filter_map(|r| {
                    r.rate.map(|x| match x {
                        Rate::Value(v) => format!("{}:{v:.2}", r.level),
                        Rate::Undefined => format!("{}:undefined", r.level),
                    })
                })
                .collect();
            writeln!(
                out,
                "{} kappa={} {field} rates [{}]",
                cell.method,
                cell.kappa,
                rates.join(" ")
            )?;
        }
    }
    for g in &result.gaps {
        writeln!(
            out,
            "gap {} kappa={} level={} vs {}: {:.6e}",
            g.method, g.kappa, g.level, g.reference_level, g.linf_gap
        )?;
    }
    writeln!(out, "wrote {} files to {}", result.files.len(), cfg.output_dir().display())?;
    let failed: Vec<String> = result
        .cells
        .iter()
        .filter_map(|c| c.error.as_ref().map(|e| format!("{} kappa={}: {e}", c.method, c.kappa)))
        .collect();
    if !failed.is_empty() {
        return Err(NumericalFailure(format!("failed cells: {}", failed.join("; "))).into());
    }
    Ok(())
}

pub fn cmd_mesh(common: &Common, out: &mut impl Write) -> Result<()> {
    let cfg = common.resolve()?;
    let spec = cfg.to_study("mesh", None)?;
    let kappa = single(&spec.kappas, "kappa")?;
    let config = RefinementConfig {
        kappa,
        levels: spec.max_level,
    };
    config.validate()?;
    let mesh0 = build_initial_mesh(&spec.domain, spec.initial_mesh.clone())?;
    let dir = cfg.output_dir();
    create_dir(&dir)?;
    for mesh in refine_to_level(&mesh0, config)? {
        let level = mesh.level();
        save_mesh_text(&dir.join(format!("mesh_{level}.txt")), &mesh)?;
        let title = format!("{} kappa={kappa} level={level}", spec.domain_label);
        save_vtk(&dir.join(format!("mesh_{level}.vtk")), &mesh, &title, &[])?;
        writeln!(
            out,
            "level {level}: {} vertices, {} triangles",
            mesh.num_vertices(),
            mesh.num_triangles()
        )?;
    }
    Ok(())
}

pub fn run(cli: &Cli, out: &mut impl Write) -> Result<()> {
    match &cli.command {
        Command::Solve(c) => cmd_solve(c, out),
        Command::Study { preset, common } => {
            if let Some(p) = preset {
                if !PRESETS.contains(&p.as_str()) {
                    bail!("unknown preset {p:?} (expected one of {})", PRESETS.join(", "));
                }
            }
            cmd_study(preset.as_deref(), common, out)
        }
        Command::Mesh(c) => cmd_mesh(c, out),
    }
}

/// Parses arguments, runs, and maps the outcome to an exit status.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_VALIDATION)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let stdout = std::io::stdout();
    match run(&cli, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
