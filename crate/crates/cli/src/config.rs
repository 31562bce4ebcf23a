//! TOML scenario files and their merge with command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use mixedfem::analysis::NormKind;
use mixedfem::geometry::{DomainSpec, Point};
use mixedfem::harness::StudySpec;
use mixedfem::io::load_mesh_text;
use mixedfem::linsolve::PreconditionerKind;
use mixedfem::singular::CutoffProfile;
use mixedfem::solver::{Method, SourceSpec};

/// Every key accepted in a config file, with its documentation. Printed by
/// `--help`.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("domain", "built-in domain: \"square2\" or \"lshape\""),
    ("vertices", "custom polygon as [[x, y], ...], counterclockwise; replaces `domain`"),
    ("reentrant_vertex", "index of the reentrant vertex of `vertices` (detected when absent)"),
    ("frame_origin_edge", "boundary edge carrying theta = 0 at the reentrant vertex"),
    ("mesh_file", "initial triangulation in the plain text mesh format (required for custom polygons)"),
    ("f", "right-hand side: a number or \"manufactured\" (default 1)"),
    ("methods", "list of \"modified\" and/or \"usual\" (default [\"modified\"])"),
    ("kappas", "grading parameters in (0, 0.5] (default [0.5])"),
    ("levels", "number of refinement levels (default 5)"),
    ("tau", "inner cut-off fraction in (0, 1) (default 0.125)"),
    ("radius", "cut-off radius (default 9/5 on lshape, else 0.9 of the largest sector)"),
    ("profile", "cut-off profile: \"quintic\" or \"smooth\" (default \"quintic\")"),
    ("norm", "increment norm for rates.csv: \"h1\" or \"h1semi\" (default \"h1\")"),
    ("reference_level", "level of the modified gap reference (default: levels)"),
    ("vtk_max_level", "write VTK fields up to this level (study only; default none)"),
    ("output_dir", "output directory (default \"mixedfem-out\")"),
    ("solver", "table of linear solver settings"),
    ("solver.relative_tolerance", "CG stopping tolerance on ||b - Ax|| / ||b|| (default 1e-12)"),
    ("solver.max_iterations", "CG iteration cap (default 20000)"),
    ("solver.preconditioner", "\"none\", \"jacobi\" or \"multigrid\" (default \"multigrid\")"),
    ("quadrature", "table of singular quadrature settings"),
    ("quadrature.subdivision_depth", "graded subdivisions toward the corner (default 48)"),
    ("quadrature.base_rule_degree", "degree of the triangle rule: 2, 5 or 8 (default 5)"),
];

pub fn config_help() -> String {
    let width = CONFIG_KEYS.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::from("Config file keys (TOML, unknown keys are rejected):\n");
    for (key, doc) in CONFIG_KEYS {
        out.push_str(&format!("  {key:width$}  {doc}\n"));
    }
    out.push_str("Command-line flags override the file.\n");
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SourceValue {
    Number(f64),
    Name(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub relative_tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
    pub preconditioner: Option<PreconditionerKind>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSection {
    pub subdivision_depth: Option<usize>,
    pub base_rule_degree: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub domain: Option<String>,
    pub vertices: Option<Vec<Point>>,
    pub reentrant_vertex: Option<usize>,
    pub frame_origin_edge: Option<usize>,
    pub mesh_file: Option<PathBuf>,
    pub f: Option<SourceValue>,
    pub methods: Option<Vec<Method>>,
    pub kappas: Option<Vec<f64>>,
    pub levels: Option<usize>,
    pub tau: Option<f64>,
    pub radius: Option<f64>,
    pub profile: Option<CutoffProfile>,
    pub norm: Option<NormKind>,
    pub reference_level: Option<usize>,
    pub vtk_max_level: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub solver: Option<SolverSection>,
    pub quadrature: Option<QuadratureSection>,
}

impl CliConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// A config with every key set, used by the documentation check.
    pub fn example() -> Self {
        Self {
            domain: None,
            vertices: Some(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
            reentrant_vertex: Some(0),
            frame_origin_edge: Some(0),
            mesh_file: Some("mesh.txt".into()),
            f: Some(SourceValue::Number(1.0)),
            methods: Some(vec![Method::Modified, Method::Usual]),
            kappas: Some(vec![0.2, 0.5]),
            levels: Some(5),
            tau: Some(0.125),
            radius: Some(1.8),
            profile: Some(CutoffProfile::Quintic),
            norm: Some(NormKind::H1),
            reference_level: Some(5),
            vtk_max_level: Some(3),
            output_dir: Some("out".into()),
            solver: Some(SolverSection {
                relative_tolerance: Some(1e-12),
                max_iterations: Some(20000),
                preconditioner: Some(PreconditionerKind::Multigrid),
            }),
            quadrature: Some(QuadratureSection {
                subdivision_depth: Some(48),
                base_rule_degree: Some(5),
            }),
        }
    }

    /// Fields of `other` that are set win.
    pub fn overlay(mut self, other: CliConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            domain, vertices, reentrant_vertex, frame_origin_edge, mesh_file, f, methods, kappas,
            levels, tau, radius, profile, norm, reference_level, vtk_max_level, output_dir
        );
        if let Some(s) = other.solver {
            let mut base = self.solver.unwrap_or_default();
            macro_rules! take_s {
                ($($f:ident),*) => { $( if s.$f.is_some() { base.$f = s.$f; } )* };
            }
            take_s!(relative_tolerance, max_iterations, preconditioner);
            self.solver = Some(base);
        }
        if let Some(q) = other.quadrature {
            let mut base = self.quadrature.unwrap_or_default();
            if q.subdivision_depth.is_some() {
                base.subdivision_depth = q.subdivision_depth;
            }
            if q.base_rule_degree.is_some() {
                base.base_rule_degree = q.base_rule_degree;
            }
            self.quadrature = Some(base);
        }
        self
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("mixedfem-out"))
    }

    fn domain_spec(&self) -> Result<(String, DomainSpec)> {
        match (&self.domain, &self.vertices) {
            (Some(_), Some(_)) => bail!("set either `domain` or `vertices`, not both"),
            (Some(name), None) => {
                let mut d = DomainSpec::builtin(name)?;
                if let Some(e) = self.frame_origin_edge {
                    d = d.with_frame_origin_edge(e)?;
                }
                Ok((name.clone(), d))
            }
            (None, Some(v)) => {
                let mut d = match self.reentrant_vertex {
                    Some(i) => DomainSpec::new(v.clone(), Some(i))?,
                    None => DomainSpec::with_detected_corner(v.clone())?,
                };
                if let Some(e) = self.frame_origin_edge {
                    d = d.with_frame_origin_edge(e)?;
                }
                let label = self
                    .mesh_file
                    .as_ref()
                    .map_or_else(|| "custom".to_string(), |p| p.display().to_string());
                Ok((label, d))
            }
            (None, None) => bail!("no domain given (use --domain, or `domain`/`vertices` in the config)"),
        }
    }

    /// Applies the set keys on top of `base`, or on top of the defaults
    /// for the configured domain when `base` is absent.
    pub fn to_study(&self, name: &str, base: Option<StudySpec>) -> Result<StudySpec> {
        let mut spec = match base {
            Some(mut spec) => {
                if self.domain.is_some() || self.vertices.is_some() {
                    let (label, domain) = self.domain_spec()?;
                    spec.domain_label = label;
                    spec.domain = domain;
                }
                spec
            }
            None => {
                let (label, domain) = self.domain_spec()?;
                let mut spec = StudySpec::new(name, "square2")?;
                spec.domain_label = label;
                spec.domain = domain;
                spec
            }
        };
        if let Some(path) = &self.mesh_file {
            spec.initial_mesh = Some(load_mesh_text(path)?);
        }
        if let Some(f) = &self.f {
            spec.source = match f {
                SourceValue::Number(x) => SourceSpec::Constant(*x),
                SourceValue::Name(s) => s.parse().map_err(anyhow::Error::msg)?,
            };
        }
        if let Some(m) = &self.methods {
            spec.methods = m.clone();
        }
        if let Some(k) = &self.kappas {
            spec.kappas = k.clone();
        }
        if let Some(l) = self.levels {
            spec.max_level = l;
            if spec.reference_level.is_some_and(|r| r > l) {
                spec.reference_level = None;
            }
        }
        if let Some(t) = self.tau {
            spec.tau = t;
        }
        if self.radius.is_some() {
            spec.radius = self.radius;
        }
        if let Some(p) = self.profile {
            spec.profile = p;
        }
        if let Some(n) = self.norm {
            spec.norm = n;
        }
        if self.reference_level.is_some() {
            spec.reference_level = self.reference_level;
        }
        if self.vtk_max_level.is_some() {
            spec.vtk_max_level = self.vtk_max_level;
        }
        spec.output_dir = Some(self.output_dir());
        if let Some(s) = &self.solver {
            let lin = &mut spec.configs.linear;
            if let Some(t) = s.relative_tolerance {
                lin.relative_tolerance = t;
            }
            if let Some(m) = s.max_iterations {
                lin.max_iterations = m;
            }
            if let Some(p) = s.preconditioner {
                lin.preconditioner = p;
            }
        }
        if let Some(q) = &self.quadrature {
            let quad = &mut spec.configs.quadrature;
            if let Some(d) = q.subdivision_depth {
                quad.subdivision_depth = d;
            }
            if let Some(d) = q.base_rule_degree {
                quad.base_rule_degree = d;
            }
        }
        Ok(spec)
    }
}
