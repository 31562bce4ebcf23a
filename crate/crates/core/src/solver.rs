//! The modified mixed method with a singular-function correction, and the
//! usual mixed method for comparison.
//!
//! Both methods split `Δ²u = f` into two Poisson problems. The modified one
//! additionally solves for `ζ` with `-Δζ = Δs⁻` and removes the component of
//! `w` along `ξ = ζ + s⁻` before the second solve. `ξ` is only ever handled
//! as the pair (P1 field `ζ`, closed-form `s⁻`).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{
    assemble_load_constant, assemble_load_field, assemble_singular_loads, assemble_stiffness_on,
    mass_apply, AssemblyError, CsrMatrix, DofMap, FeFunction, SingularLoads,
};
use crate::geometry::Point;
use crate::linsolve::{
    dot, pcg, IdentityPreconditioner, JacobiPreconditioner, LinsolveError, PreconditionerKind,
    SolveStats, SolverConfig,
};
use crate::mesh::{Mesh, MeshError};
use crate::multigrid::{Multigrid, Prolongation};
use crate::quadrature::SingularQuadConfig;
use crate::singular::{SingularError, SingularSpec};

/// Right-hand side `f` of `Δ²u = f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceSpec {
    Constant(f64),
    /// `(π⁴/4) sin(πx/2) sin(πy/2)`, whose solution on `[0,2]²` is
    /// [`manufactured_solution`].
    Manufactured,
}

impl SourceSpec {
    pub fn eval(&self, p: Point) -> f64 {
        match *self {
            Self::Constant(v) => v,
            Self::Manufactured => PI.powi(4) / 4.0 * manufactured_solution(p),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Constant(v) if *v == 0.0)
    }

    /// `(f, φ_i)` on every vertex.
    pub fn load(&self, mesh: &Mesh, quad: &SingularQuadConfig) -> Result<Vec<f64>, AssemblyError> {
        match *self {
            Self::Constant(v) => Ok(assemble_load_constant(mesh, v)),
            Self::Manufactured => assemble_load_field(mesh, |p| self.eval(p), false, quad),
        }
    }
}

impl fmt::Display for SourceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(v) => write!(f, "{v}"),
            Self::Manufactured => f.write_str("manufactured"),
        }
    }
}

impl FromStr for SourceSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "manufactured" {
            return Ok(Self::Manufactured);
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Self::Constant(v)),
            _ => Err(format!(
                "source must be a finite number or \"manufactured\", got {s:?}"
            )),
        }
    }
}

/// `sin(πx/2) sin(πy/2)`
pub fn manufactured_solution(p: Point) -> f64 {
    (0.5 * PI * p[0]).sin() * (0.5 * PI * p[1]).sin()
}

pub fn manufactured_gradient(p: Point) -> [f64; 2] {
    let (sx, cx) = (0.5 * PI * p[0]).sin_cos();
    let (sy, cy) = (0.5 * PI * p[1]).sin_cos();
    [0.5 * PI * cx * sy, 0.5 * PI * sx * cy]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Modified,
    Usual,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Modified => "modified",
            Self::Usual => "usual",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "modified" => Ok(Self::Modified),
            "usual" => Ok(Self::Usual),
            _ => Err(format!("unknown method {s:?} (expected modified or usual)")),
        }
    }
}

/// The linear solves in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Step {
    W,
    Zeta,
    U,
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::W => "w",
            Self::Zeta => "zeta",
            Self::U => "u",
        })
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("linear solve for {step} failed: {source}")]
    Linear {
        step: Step,
        #[source]
        source: LinsolveError,
    },
    #[error("||xi||^2 = {0:e} is not positive; the singular quadrature is broken")]
    XiNormNotPositive(f64),
    #[error("multilevel solver holds mesh {expected}, got a mesh refined from {got:?}")]
    NotARefinement { expected: u64, got: Option<u64> },
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Singular(#[from] SingularError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveConfigs {
    pub linear: SolverConfig,
    pub quadrature: SingularQuadConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: Step,
    pub stats: SolveStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub method: Method,
    pub w: FeFunction,
    pub zeta: Option<FeFunction>,
    pub c: Option<f64>,
    pub u: FeFunction,
    pub w_dot_xi: Option<f64>,
    pub xi_norm_sq: Option<f64>,
    pub linear_solve_stats: Vec<StepReport>,
}

impl SolveReport {
    /// `key = value` lines with the coefficient and per-step solver data.
    pub fn summary(&self) -> String {
        let mut out = format!("method = \"{}\"\n", self.method);
        out.push_str(&format!("vertices = {}\n", self.u.values().len()));
        if let Some(c) = self.c {
            out.push_str(&format!("c = {c:.17e}\n"));
        }
        if let Some(x) = self.w_dot_xi {
            out.push_str(&format!("w_dot_xi = {x:.17e}\n"));
        }
        if let Some(x) = self.xi_norm_sq {
            out.push_str(&format!("xi_norm_sq = {x:.17e}\n"));
        }
        for s in &self.linear_solve_stats {
            out.push_str(&format!(
                "\n[step.{}]\niterations = {}\nresidual = {:.6e}\nrelative_residual = {:.6e}\n",
                s.step,
                s.stats.iterations,
                s.stats.residual_norm,
                s.stats.relative_residual()
            ));
        }
        out
    }
}

/// A reusable solver for the Dirichlet Laplacian on one mesh.
pub trait PoissonSolve {
    fn dofs(&self) -> &DofMap;
    fn matrix(&self) -> &CsrMatrix;
    fn solve(
        &self,
        rhs: &[f64],
        guess: Option<&[f64]>,
    ) -> Result<(Vec<f64>, SolveStats), LinsolveError>;
}

/// Stiffness on the interior vertices with plain or Jacobi-preconditioned CG.
pub struct PoissonSystem {
    dofs: DofMap,
    matrix: CsrMatrix,
    config: SolverConfig,
}

impl PoissonSystem {
    pub fn new(mesh: &Mesh, config: SolverConfig) -> Result<Self, SolverError> {
        let lin = |source| SolverError::Linear { step: Step::W, source };
        config.validate().map_err(lin)?;
        if config.preconditioner == PreconditionerKind::Multigrid {
            return Err(lin(LinsolveError::InvalidConfig(
                "the multigrid preconditioner needs a mesh hierarchy".into(),
            )));
        }
        let dofs = DofMap::interior(mesh);
        let matrix = assemble_stiffness_on(mesh, &dofs)?;
        Ok(Self {
            dofs,
            matrix,
            config,
        })
    }
}

impl PoissonSolve for PoissonSystem {
    fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    fn solve(
        &self,
        rhs: &[f64],
        guess: Option<&[f64]>,
    ) -> Result<(Vec<f64>, SolveStats), LinsolveError> {
        match self.config.preconditioner {
            PreconditionerKind::None => {
                pcg(&self.matrix, rhs, guess, &IdentityPreconditioner, &self.config)
            }
            PreconditionerKind::Jacobi | PreconditionerKind::Multigrid => pcg(
                &self.matrix,
                rhs,
                guess,
                &JacobiPreconditioner::new(&self.matrix)?,
                &self.config,
            ),
        }
    }
}

/// Multigrid-preconditioned CG on the finest mesh of a nested hierarchy,
/// extended one level at a time. Only the operators are kept, not the meshes.
pub struct MultilevelPoisson {
    mg: Multigrid,
    dofs: DofMap,
    mesh_id: u64,
    config: SolverConfig,
}

impl MultilevelPoisson {
    pub fn new(mesh0: &Mesh, config: SolverConfig) -> Result<Self, SolverError> {
        let lin = |source| SolverError::Linear { step: Step::W, source };
        config.validate().map_err(lin)?;
        let dofs = DofMap::interior(mesh0);
        let matrix = assemble_stiffness_on(mesh0, &dofs)?;
        let mg = Multigrid::new(matrix, Multigrid::DEFAULT_SMOOTHING_STEPS).map_err(lin)?;
        Ok(Self {
            mg,
            dofs,
            mesh_id: mesh0.id(),
            config,
        })
    }

    /// Moves the finest level to `fine`, which must be the refinement of the
    /// current finest mesh.
    pub fn refine_onto(&mut self, fine: &Mesh) -> Result<(), SolverError> {
        if fine.parent_id() != Some(self.mesh_id) {
            return Err(SolverError::NotARefinement {
                expected: self.mesh_id,
                got: fine.parent_id(),
            });
        }
        let dofs = DofMap::interior(fine);
        let matrix = assemble_stiffness_on(fine, &dofs)?;
        let prolong = Prolongation::from_links(fine, &dofs, &self.dofs).ok_or(
            SolverError::NotARefinement {
                expected: self.mesh_id,
                got: None,
            },
        )?;
        self.mg
            .push_level(matrix, prolong)
            .map_err(|source| SolverError::Linear { step: Step::W, source })?;
        self.dofs = dofs;
        self.mesh_id = fine.id();
        Ok(())
    }

    pub fn mesh_id(&self) -> u64 {
        self.mesh_id
    }

    pub fn num_levels(&self) -> usize {
        self.mg.num_levels()
    }
}

impl PoissonSolve for MultilevelPoisson {
    fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    fn matrix(&self) -> &CsrMatrix {
        self.mg.finest()
    }

    fn solve(
        &self,
        rhs: &[f64],
        guess: Option<&[f64]>,
    ) -> Result<(Vec<f64>, SolveStats), LinsolveError> {
        pcg(self.mg.finest(), rhs, guess, &self.mg, &self.config)
    }
}

/// Follows a hierarchy one level at a time with the solver named in the
/// configuration: multigrid keeps every level's operator, the others only
/// the current one.
pub enum HierarchySolver {
    Single(PoissonSystem),
    Multilevel(MultilevelPoisson),
}

impl HierarchySolver {
    pub fn new(mesh0: &Mesh, config: SolverConfig) -> Result<Self, SolverError> {
        Ok(match config.preconditioner {
            PreconditionerKind::Multigrid => Self::Multilevel(MultilevelPoisson::new(mesh0, config)?),
            _ => Self::Single(PoissonSystem::new(mesh0, config)?),
        })
    }

    /// Moves to the refinement `fine` of the current mesh.
    pub fn advance(&mut self, fine: &Mesh) -> Result<(), SolverError> {
        match self {
            Self::Single(p) => *p = PoissonSystem::new(fine, p.config)?,
            Self::Multilevel(m) => m.refine_onto(fine)?,
        }
        Ok(())
    }

    fn inner(&self) -> &dyn PoissonSolve {
        match self {
            Self::Single(p) => p,
            Self::Multilevel(m) => m,
        }
    }
}

impl PoissonSolve for HierarchySolver {
    fn dofs(&self) -> &DofMap {
        self.inner().dofs()
    }

    fn matrix(&self) -> &CsrMatrix {
        self.inner().matrix()
    }

    fn solve(
        &self,
        rhs: &[f64],
        guess: Option<&[f64]>,
    ) -> Result<(Vec<f64>, SolveStats), LinsolveError> {
        self.inner().solve(rhs, guess)
    }
}

/// Starting vectors (full vertex vectors on the current mesh) for the
/// individual solves, typically prolonged from the previous level.
#[derive(Debug, Clone, Default)]
pub struct InitialGuess {
    pub w: Option<Vec<f64>>,
    pub zeta: Option<Vec<f64>>,
    pub u_modified: Option<Vec<f64>>,
    pub u_usual: Option<Vec<f64>>,
}

/// Which methods [`solve_level`] runs; `w` is shared between them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Methods {
    pub modified: bool,
    pub usual: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LevelSolution {
    pub modified: Option<SolveReport>,
    pub usual: Option<SolveReport>,
}

struct Context<'a> {
    mesh: &'a Mesh,
    poisson: &'a dyn PoissonSolve,
}

impl Context<'_> {
    fn solve(
        &self,
        step: Step,
        load: &[f64],
        guess: Option<&Vec<f64>>,
    ) -> Result<(FeFunction, StepReport), SolverError> {
        let dofs = self.poisson.dofs();
        let rhs = dofs.restrict(load);
        let guess = guess
            .filter(|g| g.len() == dofs.num_vertices())
            .map(|g| dofs.restrict(g));
        let (x, stats) = self
            .poisson
            .solve(&rhs, guess.as_deref())
            .map_err(|source| SolverError::Linear { step, source })?;
        let field = FeFunction::new(self.mesh, dofs.expand(&x))?;
        Ok((field, StepReport { step, stats }))
    }
}

/// `(w, ξ)` and `‖ξ‖²` from `Mζ`, the singular loads and `ζ`.
fn xi_products(w: &[f64], zeta: &[f64], m_zeta: &[f64], loads: &SingularLoads) -> (f64, f64) {
    let w_dot_xi = dot(w, m_zeta) + dot(w, &loads.s_load);
    let xi_norm_sq = dot(zeta, m_zeta) + 2.0 * dot(zeta, &loads.s_load) + loads.s_norm_sq;
    (w_dot_xi, xi_norm_sq)
}

/// `(w, ξ)` and `‖ξ‖²` for `ξ = ζ + s⁻`, with P1 products through the mass
/// matrix and products against `s⁻` by corner-graded quadrature.
pub fn xi_inner(
    w: &FeFunction,
    zeta: &FeFunction,
    spec: &SingularSpec,
    mesh: &Mesh,
    quad: &SingularQuadConfig,
) -> Result<(f64, f64), SolverError> {
    w.check_mesh(mesh)?;
    zeta.check_mesh(mesh)?;
    let loads = assemble_singular_loads(mesh, spec, quad)?;
    let m_zeta = mass_apply(mesh, zeta.values());
    let (w_dot_xi, xi_norm_sq) = xi_products(w.values(), zeta.values(), &m_zeta, &loads);
    if xi_norm_sq.is_nan() || xi_norm_sq <= 0.0 {
        return Err(SolverError::XiNormNotPositive(xi_norm_sq));
    }
    Ok((w_dot_xi, xi_norm_sq))
}

/// Runs the requested methods on one mesh. With `singular == None` the
/// modified method reduces to the usual one (no `ζ`, no `c`).
pub fn solve_level(
    mesh: &Mesh,
    poisson: &dyn PoissonSolve,
    f: SourceSpec,
    singular: Option<&SingularSpec>,
    methods: Methods,
    quad: &SingularQuadConfig,
    guess: &InitialGuess,
) -> Result<LevelSolution, SolverError> {
    let ctx = Context { mesh, poisson };
    let load = f.load(mesh, quad)?;
    let (w, w_stats) = ctx.solve(Step::W, &load, guess.w.as_ref())?;
    let m_w = mass_apply(mesh, w.values());
    let mut out = LevelSolution::default();

    if methods.usual {
        let (u, u_stats) = ctx.solve(Step::U, &m_w, guess.u_usual.as_ref())?;
        out.usual = Some(SolveReport {
            method: Method::Usual,
            w: w.clone(),
            zeta: None,
            c: None,
            u,
            w_dot_xi: None,
            xi_norm_sq: None,
            linear_solve_stats: vec![w_stats.clone(), u_stats],
        });
    }

    if methods.modified {
        let report = match singular {
            None => {
                let (u, u_stats) = ctx.solve(Step::U, &m_w, guess.u_modified.as_ref())?;
                SolveReport {
                    method: Method::Modified,
                    w,
                    zeta: None,
                    c: None,
                    u,
                    w_dot_xi: None,
                    xi_norm_sq: None,
                    linear_solve_stats: vec![w_stats, u_stats],
                }
            }
            Some(spec) => {
                let loads = assemble_singular_loads(mesh, spec, quad)?;
                let (zeta, zeta_stats) =
                    ctx.solve(Step::Zeta, &loads.laplacian_load, guess.zeta.as_ref())?;
                let m_zeta = mass_apply(mesh, zeta.values());
                let (w_dot_xi, xi_norm_sq) =
                    xi_products(w.values(), zeta.values(), &m_zeta, &loads);
                if xi_norm_sq.is_nan() || xi_norm_sq <= 0.0 {
                    return Err(SolverError::XiNormNotPositive(xi_norm_sq));
                }
                let c = w_dot_xi / xi_norm_sq;
                let rhs: Vec<f64> = m_w
                    .iter()
                    .zip(&m_zeta)
                    .zip(&loads.s_load)
                    .map(|((mw, mz), sl)| mw - c * (mz + sl))
                    .collect();
                let (u, u_stats) = ctx.solve(Step::U, &rhs, guess.u_modified.as_ref())?;
                SolveReport {
                    method: Method::Modified,
                    w,
                    zeta: Some(zeta),
                    c: Some(c),
                    u,
                    w_dot_xi: Some(w_dot_xi),
                    xi_norm_sq: Some(xi_norm_sq),
                    linear_solve_stats: vec![w_stats, zeta_stats, u_stats],
                }
            }
        };
        out.modified = Some(report);
    }
    Ok(out)
}

/// Modified mixed method on a single mesh; `spec == None` is the convex
/// case.
pub fn solve_modified(
    mesh: &Mesh,
    f: SourceSpec,
    spec: Option<&SingularSpec>,
    configs: &SolveConfigs,
) -> Result<SolveReport, SolverError> {
    let poisson = PoissonSystem::new(mesh, configs.linear)?;
    let methods = Methods {
        modified: true,
        usual: false,
    };
    let out = solve_level(
        mesh,
        &poisson,
        f,
        spec,
        methods,
        &configs.quadrature,
        &InitialGuess::default(),
    )?;
    Ok(out.modified.expect("requested"))
}

/// Usual mixed method: two chained Poisson solves.
pub fn solve_usual(
    mesh: &Mesh,
    f: SourceSpec,
    configs: &SolveConfigs,
) -> Result<SolveReport, SolverError> {
    let poisson = PoissonSystem::new(mesh, configs.linear)?;
    let methods = Methods {
        modified: false,
        usual: true,
    };
    let out = solve_level(
        mesh,
        &poisson,
        f,
        None,
        methods,
        &configs.quadrature,
        &InitialGuess::default(),
    )?;
    Ok(out.usual.expect("requested"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainSpec;
    use crate::mesh::{build_initial_mesh, refine_to_level, RefinementConfig};

    fn lshape_level(levels: usize) -> Mesh {
        let m0 = build_initial_mesh(&DomainSpec::lshape(), None).unwrap();
        refine_to_level(&m0, RefinementConfig { kappa: 0.3, levels })
            .unwrap()
            .pop()
            .unwrap()
    }

    #[test]
    fn source_parsing() {
        assert_eq!("manufactured".parse(), Ok(SourceSpec::Manufactured));
        assert_eq!("2.5".parse(), Ok(SourceSpec::Constant(2.5)));
        assert!("nan".parse::<SourceSpec>().is_err());
        assert!("x".parse::<SourceSpec>().is_err());
    }

    #[test]
    fn manufactured_source_is_bilaplacian_of_solution() {
        // Δ of sin(ax)sin(ay) is -2a² times itself, so Δ² multiplies by 4a⁴.
        let a = 0.5 * PI;
        for p in [[0.3, 1.1], [1.7, 0.2], [1.0, 1.0]] {
            let expected = 4.0 * a.powi(4) * manufactured_solution(p);
            assert!((SourceSpec::Manufactured.eval(p) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn manufactured_gradient_matches_differences() {
        let p = [0.7, 1.3];
        let h = 1e-6;
        let g = manufactured_gradient(p);
        let dx = (manufactured_solution([p[0] + h, p[1]]) - manufactured_solution([p[0] - h, p[1]]))
            / (2.0 * h);
        let dy = (manufactured_solution([p[0], p[1] + h]) - manufactured_solution([p[0], p[1] - h]))
            / (2.0 * h);
        assert!((g[0] - dx).abs() < 1e-8 && (g[1] - dy).abs() < 1e-8);
    }

    #[test]
    fn zero_source_gives_zero_fields() {
        let mesh = lshape_level(2);
        let spec = SingularSpec::with_defaults(&DomainSpec::lshape()).unwrap();
        let cfg = SolveConfigs::default();
        let m = solve_modified(&mesh, SourceSpec::Constant(0.0), Some(&spec), &cfg).unwrap();
        assert!(m.w.values().iter().all(|&v| v == 0.0));
        assert!(m.u.values().iter().all(|&v| v == 0.0));
        assert_eq!(m.c, Some(0.0));
        assert_eq!(m.w_dot_xi, Some(0.0));
        let u = solve_usual(&mesh, SourceSpec::Constant(0.0), &cfg).unwrap();
        assert!(u.u.values().iter().all(|&v| v == 0.0));
        assert!(u.zeta.is_none() && u.c.is_none());
    }

    #[test]
    fn xi_inner_of_zero_w() {
        let mesh = lshape_level(2);
        let spec = SingularSpec::with_defaults(&DomainSpec::lshape()).unwrap();
        let cfg = SolveConfigs::default();
        let r = solve_modified(&mesh, SourceSpec::Constant(1.0), Some(&spec), &cfg).unwrap();
        let zero = FeFunction::zeros(&mesh);
        let (wx, xn) =
            xi_inner(&zero, r.zeta.as_ref().unwrap(), &spec, &mesh, &cfg.quadrature).unwrap();
        assert_eq!(wx, 0.0);
        assert_eq!(Some(xn), r.xi_norm_sq);
        let (wx2, _) =
            xi_inner(&r.w, r.zeta.as_ref().unwrap(), &spec, &mesh, &cfg.quadrature).unwrap();
        assert_eq!(Some(wx2), r.w_dot_xi);
    }

    #[test]
    fn boundary_values_vanish_and_steps_are_ordered() {
        let mesh = lshape_level(3);
        let spec = SingularSpec::with_defaults(&DomainSpec::lshape()).unwrap();
        let r = solve_modified(&mesh, SourceSpec::Constant(1.0), Some(&spec), &Default::default())
            .unwrap();
        for v in 0..mesh.num_vertices() {
            if mesh.is_boundary(v) {
                assert_eq!(r.w.values()[v], 0.0);
                assert_eq!(r.u.values()[v], 0.0);
            }
        }
        let steps: Vec<_> = r.linear_solve_stats.iter().map(|s| s.step).collect();
        assert_eq!(steps, vec![Step::W, Step::Zeta, Step::U]);
        assert!(r.c.unwrap().is_finite());
        assert!(r.summary().contains("[step.zeta]"));
    }

    #[test]
    fn multilevel_matches_single_level() {
        let m0 = build_initial_mesh(&DomainSpec::lshape(), None).unwrap();
        let h = refine_to_level(&m0, RefinementConfig { kappa: 0.3, levels: 4 }).unwrap();
        let cfg = SolveConfigs::default();
        let mg_config = SolverConfig {
            preconditioner: PreconditionerKind::Multigrid,
            ..cfg.linear
        };
        assert!(PoissonSystem::new(&h[0], mg_config).is_err());
        let mut ml = MultilevelPoisson::new(&h[0], mg_config).unwrap();
        for m in &h[1..] {
            ml.refine_onto(m).unwrap();
        }
        assert!(ml.refine_onto(&h[2]).is_err());
        let fine = h.last().unwrap();
        let spec = SingularSpec::with_defaults(&DomainSpec::lshape()).unwrap();
        let both = Methods {
            modified: true,
            usual: true,
        };
        let a = solve_level(
            fine,
            &ml,
            SourceSpec::Constant(1.0),
            Some(&spec),
            both,
            &cfg.quadrature,
            &InitialGuess::default(),
        )
        .unwrap();
        let b = solve_modified(fine, SourceSpec::Constant(1.0), Some(&spec), &cfg).unwrap();
        let am = a.modified.unwrap();
        let scale = b.u.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in am.u.values().iter().zip(b.u.values()) {
            assert!((x - y).abs() < 1e-9 * scale);
        }
        assert!((am.c.unwrap() - b.c.unwrap()).abs() < 1e-9 * b.c.unwrap().abs());
        assert_eq!(a.usual.unwrap().w, am.w);
    }
}
