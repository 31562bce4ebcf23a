//! Convergence studies over graded hierarchies: rate tables for `u` and `w`,
//! vertex gaps against a reference solve, per-level solver data, VTK fields
//! and a JSON manifest.
//!
//! Levels are processed one at a time and only the current mesh is kept;
//! fields from earlier levels that still matter (for increments and gaps)
//! are carried forward by prolongation.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::analysis::{
    diff_norm, FieldKind, NormKind, RateTable, RATE_CSV_HEADER,
};
use crate::assembly::FeFunction;
use crate::geometry::{DomainSpec, GeometryError, Point};
use crate::io::{save_vtk, IoError};
use crate::linsolve::{PreconditionerKind, SolverConfig};
use crate::mesh::{build_initial_mesh, prolong, refine, Mesh, MeshError, RefinementConfig};
use crate::quadrature::SingularQuadConfig;
use crate::singular::{lambda1, CutoffProfile, SingularError, SingularSpec};
use crate::solver::{
    solve_level, HierarchySolver, InitialGuess, Method, Methods, SolveConfigs, SolveReport,
    SolverError, SourceSpec,
};

pub const PRESETS: [&str; 3] = ["table1", "table2", "table3-4"];
pub const MANIFEST_SCHEMA: &str = "mixedfem-study/1";
pub const GAP_CSV_HEADER: &str = "method,kappa,level,reference_level,linf_gap";
pub const LEVEL_CSV_HEADER: &str =
    "method,kappa,level,vertices,triangles,dofs,c,xi_norm_sq,iterations_w,iterations_zeta,iterations_u,max_relative_residual";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("a study needs max_level >= 3 to produce rates, got {0}")]
    TooFewLevels(usize),
    #[error("kappa = {0} is outside (0, 0.5]")]
    InvalidKappa(f64),
    #[error("the study lists no {0}")]
    Empty(&'static str),
    #[error("method {0} is listed twice")]
    DuplicateMethod(Method),
    #[error("reference level {reference} exceeds max_level {max_level}")]
    ReferenceLevel { reference: usize, max_level: usize },
    #[error("margin {margin} must lie in [0, pi/omega = {limit})")]
    Margin { margin: f64, limit: f64 },
    #[error("unknown preset {0:?} (expected one of table1, table2, table3-4)")]
    UnknownPreset(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Singular(#[from] SingularError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// `2^(-1/a)` with `a = pi/omega - margin`: the grading that restores the
/// optimal rate for a corner of angle `omega`.
pub fn grading_for_optimal(omega: f64, margin: f64) -> Result<f64, HarnessError> {
    let lambda = lambda1(omega)?;
    if !(margin >= 0.0 && margin < lambda) {
        return Err(HarnessError::Margin {
            margin,
            limit: lambda,
        });
    }
    Ok(2f64.powf(-1.0 / (lambda - margin)))
}

pub const DEFAULT_GRADING_MARGIN: f64 = 0.01;

/// Everything a study needs.
#[derive(Debug, Clone)]
pub struct StudySpec {
    pub name: String,
    /// Label recorded in the manifest (a built-in name or a file path).
    pub domain_label: String,
    pub domain: DomainSpec,
    /// Explicit initial triangulation; the built-in one when absent.
    pub initial_mesh: Option<(Vec<Point>, Vec<[usize; 3]>)>,
    pub source: SourceSpec,
    pub methods: Vec<Method>,
    pub kappas: Vec<f64>,
    pub max_level: usize,
    pub tau: f64,
    /// Cut-off radius; the domain default when absent.
    pub radius: Option<f64>,
    pub profile: CutoffProfile,
    pub configs: SolveConfigs,
    /// Norm of the increments in `rates.csv`; the other H1 variant goes to a
    /// second file.
    pub norm: NormKind,
    /// Level of the modified solve used as the gap reference; `max_level`
    /// when absent.
    pub reference_level: Option<usize>,
    /// VTK files are written for levels up to this one.
    pub vtk_max_level: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

impl StudySpec {
    /// A study on a built-in domain with default parameters.
    pub fn new(name: &str, domain: &str) -> Result<Self, HarnessError> {
        Ok(Self {
            name: name.to_string(),
            domain_label: domain.to_string(),
            domain: DomainSpec::builtin(domain)?,
            initial_mesh: None,
            source: SourceSpec::Constant(1.0),
            methods: vec![Method::Modified],
            kappas: vec![0.5],
            max_level: 5,
            tau: SingularSpec::DEFAULT_TAU,
            radius: None,
            profile: CutoffProfile::Quintic,
            configs: SolveConfigs {
                linear: SolverConfig {
                    preconditioner: PreconditionerKind::Multigrid,
                    ..SolverConfig::default()
                },
                quadrature: SingularQuadConfig::default(),
            },
            norm: NormKind::H1,
            reference_level: None,
            vtk_max_level: None,
            output_dir: None,
        })
    }

    /// Built-in study set-ups: `table1`, `table2` and `table3-4`.
    pub fn preset(name: &str) -> Result<Self, HarnessError> {
        let mut spec = match name {
            "table1" => {
                let mut s = Self::new(name, "square2")?;
                s.source = SourceSpec::Constant(10.0);
                s.methods = vec![Method::Modified, Method::Usual];
                s.kappas = vec![0.5];
                s.max_level = 7;
                s
            }
            "table2" => {
                let mut s = Self::new(name, "lshape")?;
                s.methods = vec![Method::Modified, Method::Usual];
                s.kappas = vec![0.5];
                s.max_level = 9;
                s
            }
            "table3-4" => {
                let mut s = Self::new(name, "lshape")?;
                s.methods = vec![Method::Modified, Method::Usual];
                s.kappas = vec![0.1, 0.2, 0.3, 0.4, 0.5];
                s.max_level = 10;
                s.reference_level = Some(9);
                s
            }
            other => return Err(HarnessError::UnknownPreset(other.to_string())),
        };
        spec.vtk_max_level = Some(5);
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.max_level < 3 {
            return Err(HarnessError::TooFewLevels(self.max_level));
        }
        if self.kappas.is_empty() {
            return Err(HarnessError::Empty("grading parameters"));
        }
        for &k in &self.kappas {
            RefinementConfig { kappa: k, levels: 0 }
                .validate()
                .map_err(|_| HarnessError::InvalidKappa(k))?;
        }
        if self.methods.is_empty() {
            return Err(HarnessError::Empty("methods"));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(HarnessError::DuplicateMethod(*m));
            }
        }
        if let Some(r) = self.reference_level {
            if r > self.max_level {
                return Err(HarnessError::ReferenceLevel {
                    reference: r,
                    max_level: self.max_level,
                });
            }
        }
        self.configs
            .linear
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        self.configs
            .quadrature
            .base_rule()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        self.singular_spec()?;
        Ok(())
    }

    /// The singular function for a domain with a reentrant corner.
    pub fn singular_spec(&self) -> Result<Option<SingularSpec>, HarnessError> {
        if self.domain.reentrant_point().is_none() {
            return Ok(None);
        }
        let radius = match self.radius {
            Some(r) => r,
            None => SingularSpec::default_radius(&self.domain)?,
        };
        Ok(Some(SingularSpec::new(
            &self.domain,
            self.tau,
            radius,
            self.profile,
        )?))
    }

    pub fn reference_level(&self) -> usize {
        self.reference_level.unwrap_or(self.max_level)
    }

    fn initial_mesh(&self) -> Result<Mesh, HarnessError> {
        Ok(build_initial_mesh(&self.domain, self.initial_mesh.clone())?)
    }
}

/// Per-level data of one (method, kappa) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelRecord {
    pub level: usize,
    pub vertices: usize,
    pub triangles: usize,
    pub dofs: usize,
    pub c: Option<f64>,
    pub xi_norm_sq: Option<f64>,
    pub iterations: BTreeMap<String, usize>,
    pub max_relative_residual: f64,
    /// `||u_j - u_{j-1}||` and `||w_j - w_{j-1}||` in the H1 norm and
    /// seminorm; zero on level 0.
    pub increments: Increments,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Increments {
    pub u_h1: f64,
    pub u_h1semi: f64,
    pub w_h1: f64,
    pub w_h1semi: f64,
}

impl Increments {
    fn get(&self, field: FieldKind, norm: NormKind) -> f64 {
        match (field, norm) {
            (FieldKind::U, NormKind::H1Semi) => self.u_h1semi,
            (FieldKind::U, _) => self.u_h1,
            (FieldKind::W, NormKind::H1Semi) => self.w_h1semi,
            (FieldKind::W, _) => self.w_h1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub method: Method,
    pub kappa: f64,
    pub levels: Vec<LevelRecord>,
    /// Set when the cell stopped early.
    pub error: Option<String>,
    pub seconds: f64,
}

impl CellResult {
    pub fn rate_table(&self, field: FieldKind, norm: NormKind) -> Option<RateTable> {
        let dofs: Vec<usize> = self.levels.iter().map(|l| l.dofs).collect();
        let inc: Vec<f64> = self
            .levels
            .iter()
            .map(|l| l.increments.get(field, norm))
            .collect();
        RateTable::from_increments(self.method, self.kappa, field, norm, &dofs, &inc).ok()
    }

    pub fn rate(&self, field: FieldKind, norm: NormKind, level: usize) -> Option<f64> {
        self.rate_table(field, norm)?.rate_at(level)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapRecord {
    pub method: Method,
    pub kappa: f64,
    pub level: usize,
    pub reference_level: usize,
    pub linf_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub cells: Vec<CellResult>,
    pub gaps: Vec<GapRecord>,
    pub norm: NormKind,
    pub files: Vec<String>,
}

impl StudyResult {
    pub fn cell(&self, method: Method, kappa: f64) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.kappa == kappa)
    }

    pub fn gap(&self, method: Method, kappa: f64, level: usize) -> Option<f64> {
        self.gaps
            .iter()
            .find(|g| g.method == method && g.kappa == kappa && g.level == level)
            .map(|g| g.linf_gap)
    }

    pub fn rates_csv(&self, norm: NormKind) -> String {
        let mut out = format!("{RATE_CSV_HEADER}\n");
        for cell in &self.cells {
            for field in [FieldKind::U, FieldKind::W] {
                if let Some(t) = cell.rate_table(field, norm) {
                    out.push_str(&t.csv_rows());
                }
            }
        }
        out
    }

    pub fn gaps_csv(&self) -> String {
        let mut out = format!("{GAP_CSV_HEADER}\n");
        for g in &self.gaps {
            out.push_str(&format!(
                "{},{},{},{},{:.10e}\n",
                g.method, g.kappa, g.level, g.reference_level, g.linf_gap
            ));
        }
        out
    }

    pub fn levels_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.12e}")).unwrap_or_default();
        let mut out = format!("{LEVEL_CSV_HEADER}\n");
        for cell in &self.cells {
            for l in &cell.levels {
                let it = |s: &str| l.iterations.get(s).map(|n| n.to_string()).unwrap_or_default();
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{:.3e}\n",
                    cell.method,
                    cell.kappa,
                    l.level,
                    l.vertices,
                    l.triangles,
                    l.dofs,
                    opt(l.c),
                    opt(l.xi_norm_sq),
                    it("w"),
                    it("zeta"),
                    it("u"),
                    l.max_relative_residual
                ));
            }
        }
        out
    }
}

#[derive(Serialize)]
struct ManifestCell<'a> {
    method: Method,
    kappa: f64,
    status: &'static str,
    error: Option<&'a str>,
    levels_completed: usize,
    seconds: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema: &'static str,
    name: &'a str,
    domain: &'a str,
    source: String,
    methods: &'a [Method],
    kappas: &'a [f64],
    max_level: usize,
    reference_level: usize,
    tau: f64,
    radius: Option<f64>,
    profile: CutoffProfile,
    norm: NormKind,
    solver: SolverConfig,
    quadrature: SingularQuadConfig,
    files: &'a [String],
    cells: Vec<ManifestCell<'a>>,
}

/// State of one method while walking up the levels.
struct Track {
    method: Method,
    levels: Vec<LevelRecord>,
    error: Option<String>,
    prev: Option<SolveReport>,
    /// Earlier `u` fields, prolonged to the current mesh, for the gap table.
    carried: Vec<(usize, FeFunction)>,
}

impl Track {
    fn alive(&self) -> bool {
        self.error.is_none()
    }
}

fn vtk_name(method: Method, kappa: f64, level: usize) -> String {
    format!("{method}_{kappa}_{level}.vtk")
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<(), HarnessError> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|source| HarnessError::Write {
        path: path.display().to_string(),
        source,
    })
}

/// Solves every requested method on `mesh`, isolating failures per method.
fn solve_methods(
    mesh: &Mesh,
    solver: &HierarchySolver,
    spec: &StudySpec,
    singular: Option<&SingularSpec>,
    active: &[Method],
    guess: &InitialGuess,
) -> Vec<(Method, Result<SolveReport, String>)> {
    let methods = Methods {
        modified: active.contains(&Method::Modified),
        usual: active.contains(&Method::Usual),
    };
    let run = |methods| {
        solve_level(
            mesh,
            solver,
            spec.source,
            singular,
            methods,
            &spec.configs.quadrature,
            guess,
        )
    };
    match run(methods) {
        Ok(sol) => active
            .iter()
            .map(|&m| {
                let r = match m {
                    Method::Modified => sol.modified.clone(),
                    Method::Usual => sol.usual.clone(),
                };
                (m, r.ok_or_else(|| "method produced no report".to_string()))
            })
            .collect(),
        Err(e) if active.len() == 1 => vec![(active[0], Err(e.to_string()))],
        Err(_) => active
            .iter()
            .map(|&m| {
                let only = Methods {
                    modified: m == Method::Modified,
                    usual: m == Method::Usual,
                };
                let r = run(only).map_err(|e| e.to_string()).and_then(|s| {
                    match m {
                        Method::Modified => s.modified,
                        Method::Usual => s.usual,
                    }
                    .ok_or_else(|| "method produced no report".to_string())
                });
                (m, r)
            })
            .collect(),
    }
}

fn level_record(mesh: &Mesh, report: &SolveReport, prev: Option<&SolveReport>) -> Result<LevelRecord, String> {
    let mut increments = Increments::default();
    if let Some(prev) = prev {
        let d = |a: &FeFunction, b: &FeFunction, k| diff_norm(a, b, mesh, k).map_err(|e| e.to_string());
        increments = Increments {
            u_h1: d(&prev.u, &report.u, NormKind::H1)?,
            u_h1semi: d(&prev.u, &report.u, NormKind::H1Semi)?,
            w_h1: d(&prev.w, &report.w, NormKind::H1)?,
            w_h1semi: d(&prev.w, &report.w, NormKind::H1Semi)?,
        };
    }
    let iterations = report
        .linear_solve_stats
        .iter()
        .map(|s| (s.step.to_string(), s.stats.iterations))
        .collect();
    let max_relative_residual = report
        .linear_solve_stats
        .iter()
        .map(|s| s.stats.relative_residual())
        .fold(0.0, f64::max);
    Ok(LevelRecord {
        level: mesh.level(),
        vertices: mesh.num_vertices(),
        triangles: mesh.num_triangles(),
        dofs: mesh.num_free_vertices(),
        c: report.c,
        xi_norm_sq: report.xi_norm_sq,
        iterations,
        max_relative_residual,
        increments,
    })
}

fn prolong_opt(f: Option<&FeFunction>, mesh: &Mesh) -> Option<Vec<f64>> {
    f.and_then(|f| prolong(f, mesh).ok()).map(FeFunction::into_values)
}

/// All methods for one grading parameter, sharing mesh, solver and `w`.
fn run_kappa(
    spec: &StudySpec,
    kappa: f64,
    singular: Option<&SingularSpec>,
    mesh0: &Mesh,
    files: &mut Vec<String>,
) -> Result<(Vec<CellResult>, Vec<GapRecord>), HarnessError> {
    let start = Instant::now();
    let reference_level = spec.reference_level();
    let mut tracks: Vec<Track> = spec
        .methods
        .iter()
        .map(|&method| Track {
            method,
            levels: Vec::new(),
            error: None,
            prev: None,
            carried: Vec::new(),
        })
        .collect();
    let mut gaps = Vec::new();
    let fail_all = |tracks: &mut Vec<Track>, msg: String| {
        for t in tracks.iter_mut().filter(|t| t.alive()) {
            t.error = Some(msg.clone());
        }
    };

    let mut mesh = mesh0.clone();
    let mut solver = match HierarchySolver::new(&mesh, spec.configs.linear) {
        Ok(s) => Some(s),
        Err(e) => {
            fail_all(&mut tracks, e.to_string());
            None
        }
    };

    for level in 0..=spec.max_level {
        let Some(solver_ref) = solver.as_mut() else { break };
        if level > 0 {
            let step = refine(&mesh, kappa)
                .map_err(|e| e.to_string())
                .and_then(|fine| solver_ref.advance(&fine).map(|_| fine).map_err(|e| e.to_string()));
            match step {
                Ok(fine) => {
                    for t in tracks.iter_mut() {
                        for (_, f) in t.carried.iter_mut() {
                            *f = prolong(f, &fine)?;
                        }
                    }
                    mesh = fine;
                }
                Err(e) => {
                    fail_all(&mut tracks, e);
                    break;
                }
            }
        }
        let active: Vec<Method> = tracks.iter().filter(|t| t.alive()).map(|t| t.method).collect();
        if active.is_empty() {
            break;
        }

        let prev_of = |m: Method| tracks.iter().find(|t| t.method == m).and_then(|t| t.prev.as_ref());
        let any_prev = tracks.iter().find_map(|t| t.prev.as_ref());
        let guess = InitialGuess {
            w: prolong_opt(any_prev.map(|p| &p.w), &mesh),
            zeta: prolong_opt(prev_of(Method::Modified).and_then(|p| p.zeta.as_ref()), &mesh),
            u_modified: prolong_opt(prev_of(Method::Modified).map(|p| &p.u), &mesh),
            u_usual: prolong_opt(prev_of(Method::Usual).map(|p| &p.u), &mesh),
        };
        let solver_ref = solver.as_ref().expect("checked above");
        let results = solve_methods(&mesh, solver_ref, spec, singular, &active, &guess);
        drop(guess);

        for (method, result) in results {
            let track = tracks.iter_mut().find(|t| t.method == method).expect("listed");
            let report = match result {
                Ok(r) => r,
                Err(e) => {
                    track.error = Some(format!("level {level}: {e}"));
                    continue;
                }
            };
            match level_record(&mesh, &report, track.prev.as_ref()) {
                Ok(rec) => track.levels.push(rec),
                Err(e) => {
                    track.error = Some(format!("level {level}: {e}"));
                    continue;
                }
            }
            if let (Some(dir), Some(max)) = (&spec.output_dir, spec.vtk_max_level) {
                if level <= max {
                    let name = vtk_name(method, kappa, level);
                    let mut fields: Vec<(&str, &[f64])> =
                        vec![("u", report.u.values()), ("w", report.w.values())];
                    if let Some(z) = &report.zeta {
                        fields.push(("zeta", z.values()));
                    }
                    let title = format!("{} {} kappa={} level={}", spec.name, method, kappa, level);
                    save_vtk(&dir.join(&name), &mesh, &title, &fields)?;
                    files.push(name);
                }
            }
            if level < reference_level {
                track.carried.push((level, report.u.clone()));
            }
            track.prev = Some(report);
        }

        if level == reference_level {
            let reference = tracks
                .iter()
                .find(|t| t.method == Method::Modified && t.alive())
                .and_then(|t| t.prev.as_ref())
                .map(|r| r.u.clone());
            for t in tracks.iter_mut() {
                if let Some(r) = &reference {
                    for (l, f) in &t.carried {
                        let gap = f
                            .values()
                            .iter()
                            .zip(r.values())
                            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                        gaps.push(GapRecord {
                            method: t.method,
                            kappa,
                            level: *l,
                            reference_level,
                            linf_gap: gap,
                        });
                    }
                    if t.alive() {
                        gaps.push(GapRecord {
                            method: t.method,
                            kappa,
                            level: reference_level,
                            reference_level,
                            linf_gap: linf(t.prev.as_ref().map(|p| &p.u), r),
                        });
                    }
                }
                t.carried.clear();
            }
        }
    }

    let seconds = start.elapsed().as_secs_f64();
    let cells = tracks
        .into_iter()
        .map(|t| CellResult {
            method: t.method,
            kappa,
            levels: t.levels,
            error: t.error,
            seconds,
        })
        .collect();
    Ok((cells, gaps))
}

fn linf(a: Option<&FeFunction>, b: &FeFunction) -> f64 {
    a.map_or(f64::NAN, |a| {
        a.values()
            .iter()
            .zip(b.values())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
    })
}

/// Runs every (method, kappa) cell and, with an output directory, writes
/// `rates.csv`, the alternate-norm rates, `gaps.csv`, `levels.csv`, VTK
/// fields and `manifest.json`. Numerical failures are recorded per cell.
pub fn run_study(spec: &StudySpec) -> Result<StudyResult, HarnessError> {
    spec.validate()?;
    let singular = spec.singular_spec()?;
    let mesh0 = spec.initial_mesh()?;
    if let Some(dir) = &spec.output_dir {
        fs::create_dir_all(dir).map_err(|source| HarnessError::Write {
            path: dir.display().to_string(),
            source,
        })?;
    }
    let mut files = Vec::new();
    let mut cells = Vec::new();
    let mut gaps = Vec::new();
    for &kappa in &spec.kappas {
        let (c, g) = run_kappa(spec, kappa, singular.as_ref(), &mesh0, &mut files)?;
        cells.extend(c);
        gaps.extend(g);
    }
    let alt = if spec.norm == NormKind::H1Semi {
        NormKind::H1
    } else {
        NormKind::H1Semi
    };
    let rates_norm = if spec.norm == NormKind::H1Semi {
        NormKind::H1Semi
    } else {
        NormKind::H1
    };
    let mut result = StudyResult {
        cells,
        gaps,
        norm: rates_norm,
        files: Vec::new(),
    };
    if let Some(dir) = &spec.output_dir {
        let alt_name = format!("rates_{alt}.csv");
        write_text(dir, "rates.csv", &result.rates_csv(rates_norm))?;
        write_text(dir, &alt_name, &result.rates_csv(alt))?;
        write_text(dir, "gaps.csv", &result.gaps_csv())?;
        write_text(dir, "levels.csv", &result.levels_csv())?;
        let mut all_files = vec![
            "rates.csv".to_string(),
            alt_name,
            "gaps.csv".to_string(),
            "levels.csv".to_string(),
        ];
        all_files.extend(files);
        all_files.push("manifest.json".to_string());
        let manifest = Manifest {
            schema: MANIFEST_SCHEMA,
            name: &spec.name,
            domain: &spec.domain_label,
            source: spec.source.to_string(),
            methods: &spec.methods,
            kappas: &spec.kappas,
            max_level: spec.max_level,
            reference_level: spec.reference_level(),
            tau: spec.tau,
            radius: singular.map(|s| s.radius),
            profile: spec.profile,
            norm: rates_norm,
            solver: spec.configs.linear,
            quadrature: spec.configs.quadrature,
            files: &all_files,
            cells: result
                .cells
                .iter()
                .map(|c| ManifestCell {
                    method: c.method,
                    kappa: c.kappa,
                    status: if c.error.is_none() { "ok" } else { "failed" },
                    error: c.error.as_deref(),
                    levels_completed: c.levels.len(),
                    seconds: c.seconds,
                })
                .collect(),
        };
        write_text(dir, "manifest.json", &serde_json::to_string_pretty(&manifest)?)?;
        result.files = all_files;
    }
    Ok(result)
}

/// One solve at `level` of a graded hierarchy, returning the final mesh.
/// Intermediate levels are only refined (and, for multigrid, their operators
/// assembled).
pub fn solve_at_level(
    spec: &StudySpec,
    kappa: f64,
    level: usize,
    method: Method,
) -> Result<(Mesh, SolveReport), HarnessError> {
    RefinementConfig { kappa, levels: level }.validate()?;
    let singular = spec.singular_spec()?;
    let mut mesh = spec.initial_mesh()?;
    let mut solver = HierarchySolver::new(&mesh, spec.configs.linear)?;
    for _ in 0..level {
        mesh = refine(&mesh, kappa)?;
        solver.advance(&mesh)?;
    }
    let methods = Methods {
        modified: method == Method::Modified,
        usual: method == Method::Usual,
    };
    let sol = solve_level(
        &mesh,
        &solver,
        spec.source,
        singular.as_ref(),
        methods,
        &spec.configs.quadrature,
        &InitialGuess::default(),
    )?;
    let report = match method {
        Method::Modified => sol.modified,
        Method::Usual => sol.usual,
    }
    .expect("requested");
    Ok((mesh, report))
}
