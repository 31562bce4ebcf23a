//! Preconditioned conjugate gradients for the symmetric positive definite
//! systems produced by assembly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::CsrMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinsolveError {
    #[error("CG did not converge in {iterations} iterations (residual {residual:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },
    #[error("non-positive curvature {curvature:e} at iteration {iteration}; matrix or preconditioner is not SPD")]
    Indefinite { iteration: usize, curvature: f64 },
    #[error("dimension mismatch: matrix {matrix}, vector {vector}")]
    DimensionMismatch { matrix: usize, vector: usize },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("diagonal entry {0} is not positive")]
    NonPositiveDiagonal(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PreconditionerKind {
    None,
    #[default]
    Jacobi,
    /// Geometric multigrid V-cycle; needs a nested mesh hierarchy, so it is
    /// only available through the hierarchy-aware solvers.
    Multigrid,
}

impl std::str::FromStr for PreconditionerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Self::None),
            "jacobi" => Ok(Self::Jacobi),
            "multigrid" => Ok(Self::Multigrid),
            _ => Err(format!(
                "unknown preconditioner {s:?} (expected none, jacobi or multigrid)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub relative_tolerance: f64,
    pub max_iterations: usize,
    pub preconditioner: PreconditionerKind,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            relative_tolerance: 1e-12,
            max_iterations: 20000,
            preconditioner: PreconditionerKind::Jacobi,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), LinsolveError> {
        if !(self.relative_tolerance > 0.0 && self.relative_tolerance < 1.0) {
            return Err(LinsolveError::InvalidConfig(format!(
                "relative_tolerance {} not in (0, 1)",
                self.relative_tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(LinsolveError::InvalidConfig(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Iteration report. `residual_norm` is `||b - A x||` recomputed from the
/// returned `x`; `rounding_floor` is the attainable residual level there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual_norm: f64,
    pub rhs_norm: f64,
    pub rounding_floor: f64,
    pub history: Vec<f64>,
}

impl SolveStats {
    pub fn relative_residual(&self) -> f64 {
        if self.rhs_norm == 0.0 {
            0.0
        } else {
            self.residual_norm / self.rhs_norm
        }
    }

    /// True when convergence was declared at the rounding floor rather than
    /// at the requested tolerance.
    pub fn floor_limited(&self, config: &SolverConfig) -> bool {
        self.residual_norm > config.relative_tolerance * self.rhs_norm
    }
}

pub trait Preconditioner {
    /// `z = M^-1 r`
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

pub struct JacobiPreconditioner {
    inv_diag: Vec<f64>,
}

impl JacobiPreconditioner {
    pub fn new(matrix: &CsrMatrix) -> Result<Self, LinsolveError> {
        let inv_diag = matrix
            .diagonal()
            .into_iter()
            .enumerate()
            .map(|(i, d)| {
                if d > 0.0 {
                    Ok(1.0 / d)
                } else {
                    Err(LinsolveError::NonPositiveDiagonal(i))
                }
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { inv_diag })
    }
}

impl Preconditioner for JacobiPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), d) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * d;
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn residual(matrix: &CsrMatrix, rhs: &[f64], x: &[f64], r: &mut [f64]) {
    matrix.mul_vec_into(x, r);
    for (ri, bi) in r.iter_mut().zip(rhs) {
        *ri = bi - *ri;
    }
}

/// Size of the rounding error committed when forming `b - A x` in double
/// precision, `eps || |A| |x| + |b| ||`. Below this the residual carries no
/// information and CG cannot reduce it further.
pub fn rounding_floor(matrix: &CsrMatrix, rhs: &[f64], x: &[f64]) -> f64 {
    let mut sum = 0.0;
    for (i, b) in rhs.iter().enumerate() {
        let (cols, vals) = matrix.row(i);
        let mut t = b.abs();
        for (&j, v) in cols.iter().zip(vals) {
            t += (v * x[j as usize]).abs();
        }
        sum += t * t;
    }
    f64::EPSILON * sum.sqrt()
}


/// Solves with the preconditioner named in `config`, starting from zero.
pub fn solve_spd(
    matrix: &CsrMatrix,
    rhs: &[f64],
    config: &SolverConfig,
) -> Result<(Vec<f64>, SolveStats), LinsolveError> {
    match config.preconditioner {
        PreconditionerKind::None => pcg(matrix, rhs, None, &IdentityPreconditioner, config),
        PreconditionerKind::Jacobi => {
            pcg(matrix, rhs, None, &JacobiPreconditioner::new(matrix)?, config)
        }
        PreconditionerKind::Multigrid => Err(LinsolveError::InvalidConfig(
            "the multigrid preconditioner needs a mesh hierarchy".into(),
        )),
    }
}

/// Preconditioned CG from `guess` (or zero).
///
/// Converged means the explicitly recomputed residual satisfies
/// `||b - A x|| <= max(tol ||b||, floor)` where `floor` is
/// [`rounding_floor`] at the returned `x`; for large, poorly conditioned
/// systems `tol ||b||` can sit below the rounding level of the residual
/// itself. When the recursive residual passes the threshold but the true one
/// has not, the iteration restarts from the true residual.
pub fn pcg(
    matrix: &CsrMatrix,
    rhs: &[f64],
    guess: Option<&[f64]>,
    precond: &dyn Preconditioner,
    config: &SolverConfig,
) -> Result<(Vec<f64>, SolveStats), LinsolveError> {
    config.validate()?;
    let n = matrix.nrows();
    if rhs.len() != n {
        return Err(LinsolveError::DimensionMismatch {
            matrix: n,
            vector: rhs.len(),
        });
    }
    let rhs_norm = dot(rhs, rhs).sqrt();
    let done = |x: Vec<f64>, iterations, residual_norm, floor, history| {
        Ok((
            x,
            SolveStats {
                iterations,
                residual_norm,
                rhs_norm,
                rounding_floor: floor,
                history,
            },
        ))
    };
    if rhs_norm == 0.0 {
        return done(vec![0.0; n], 0, 0.0, 0.0, Vec::new());
    }
    let mut x = match guess {
        Some(g) if g.len() == n => g.to_vec(),
        Some(g) => {
            return Err(LinsolveError::DimensionMismatch {
                matrix: n,
                vector: g.len(),
            })
        }
        None => vec![0.0; n],
    };
    let target = config.relative_tolerance * rhs_norm;
    let mut r = vec![0.0; n];
    residual(matrix, rhs, &x, &mut r);
    let mut rnorm = dot(&r, &r).sqrt();
    let mut history = vec![rnorm];
    let mut floor = rounding_floor(matrix, rhs, &x);
    if rnorm <= target.max(floor) {
        return done(x, 0, rnorm, floor, history);
    }
    let mut z = vec![0.0; n];
    let mut ap = vec![0.0; n];
    precond.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut iterations = 0;
    while iterations < config.max_iterations {
        iterations += 1;
        matrix.mul_vec_into(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if curvature <= 0.0 || rz <= 0.0 {
            return Err(LinsolveError::Indefinite {
                iteration: iterations,
                curvature: if curvature <= 0.0 { curvature } else { rz },
            });
        }
        let alpha = rz / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rnorm = dot(&r, &r).sqrt();
        history.push(rnorm);
        if rnorm <= target.max(floor) {
            residual(matrix, rhs, &x, &mut r);
            rnorm = dot(&r, &r).sqrt();
            floor = rounding_floor(matrix, rhs, &x);
            if rnorm <= target.max(floor) {
                return done(x, iterations, rnorm, floor, history);
            }
            precond.apply(&r, &mut z);
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            continue;
        }
        precond.apply(&r, &mut z);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    residual(matrix, rhs, &x, &mut r);
    Err(LinsolveError::NotConverged {
        iterations,
        residual: dot(&r, &r).sqrt(),
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_in_one_iteration() {
        let a = CsrMatrix::identity(5);
        let b = vec![1.0, -2.0, 3.0, 0.5, 4.0];
        let (x, stats) = solve_spd(&a, &b, &SolverConfig::default()).unwrap();
        assert_eq!(x, b);
        assert_eq!(stats.iterations, 1);
    }

    #[test]
    fn two_by_two() {
        let a = CsrMatrix::from_triplets(
            2,
            &[(0, 0, 2.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0)],
        );
        for kind in [PreconditionerKind::None, PreconditionerKind::Jacobi] {
            let cfg = SolverConfig {
                preconditioner: kind,
                ..Default::default()
            };
            let (x, stats) = solve_spd(&a, &[1.0, 1.0], &cfg).unwrap();
            assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
            assert!(stats.iterations <= 2);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = CsrMatrix::identity(3);
        let (x, stats) = solve_spd(&a, &[0.0; 3], &SolverConfig::default()).unwrap();
        assert_eq!(x, vec![0.0; 3]);
        assert_eq!(stats.iterations, 0);
    }

    #[test]
    fn indefinite_is_detected() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (1, 1, -1.0)]);
        let cfg = SolverConfig {
            preconditioner: PreconditionerKind::None,
            ..Default::default()
        };
        assert!(matches!(
            solve_spd(&a, &[0.0, 1.0], &cfg),
            Err(LinsolveError::Indefinite { .. })
        ));
        assert!(matches!(
            solve_spd(&a, &[0.0, 1.0], &SolverConfig::default()),
            Err(LinsolveError::NonPositiveDiagonal(1))
        ));
    }

    #[test]
    fn reports_non_convergence() {
        let n = 50;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, &t);
        let cfg = SolverConfig {
            max_iterations: 3,
            ..Default::default()
        };
        match solve_spd(&a, &vec![1.0; n], &cfg) {
            Err(LinsolveError::NotConverged {
                iterations,
                history,
                ..
            }) => {
                assert_eq!(iterations, 3);
                assert_eq!(history.len(), 4);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let bad = SolverConfig {
            relative_tolerance: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            max_iterations: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
