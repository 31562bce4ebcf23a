//! Geometric multigrid V-cycle over a nested P1 hierarchy, used as a CG
//! preconditioner.
//!
//! Forward Gauss-Seidel before the coarse correction and backward
//! Gauss-Seidel after it keep the cycle symmetric; the coarsest level is
//! solved exactly by a dense Cholesky factorization.

use std::cell::RefCell;

use crate::assembly::{CsrMatrix, DofMap};
use crate::linsolve::{LinsolveError, Preconditioner};
use crate::mesh::{Mesh, ParentLink};

const NONE: u32 = u32::MAX;

/// Interpolation from coarse unknowns to fine unknowns; each fine unknown
/// depends on at most two coarse ones.
#[derive(Debug, Clone, PartialEq)]
pub struct Prolongation {
    rows: Vec<[(u32, f64); 2]>,
    coarse_len: usize,
}

impl Prolongation {
    pub fn from_links(
        fine: &Mesh,
        fine_dofs: &DofMap,
        coarse_dofs: &DofMap,
    ) -> Option<Self> {
        let links = fine.parent_links()?;
        let entry = |v: usize, w: f64| match coarse_dofs.dof(v) {
            Some(j) if w != 0.0 => (j as u32, w),
            _ => (NONE, 0.0),
        };
        let rows = fine_dofs
            .vertices()
            .iter()
            .map(|&v| match links[v] {
                ParentLink::Inherited(p) => [entry(p, 1.0), (NONE, 0.0)],
                ParentLink::Edge { a, b, t } => [entry(a, 1.0 - t), entry(b, t)],
            })
            .collect();
        Some(Self {
            rows,
            coarse_len: coarse_dofs.len(),
        })
    }

    /// `fine += P coarse`
    fn add_apply(&self, coarse: &[f64], fine: &mut [f64]) {
        for (row, f) in self.rows.iter().zip(fine.iter_mut()) {
            for &(j, w) in row {
                if j != NONE {
                    *f += w * coarse[j as usize];
                }
            }
        }
    }

    /// `coarse = P^T fine`
    fn apply_transpose(&self, fine: &[f64], coarse: &mut [f64]) {
        coarse.iter_mut().for_each(|c| *c = 0.0);
        for (row, f) in self.rows.iter().zip(fine) {
            for &(j, w) in row {
                if j != NONE {
                    coarse[j as usize] += w * f;
                }
            }
        }
    }
}

/// Dense Cholesky factor, lower triangle stored row by row.
#[derive(Debug, Clone)]
struct DenseCholesky {
    n: usize,
    l: Vec<f64>,
}

impl DenseCholesky {
    fn new(a: &CsrMatrix) -> Result<Self, LinsolveError> {
        let n = a.nrows();
        let mut l = vec![0.0; n * n];
        for (i, row) in a.to_dense().into_iter().enumerate() {
            l[i * n..(i + 1) * n].copy_from_slice(&row);
        }
        for j in 0..n {
            let mut d = l[j * n + j];
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if d <= 0.0 {
                return Err(LinsolveError::NonPositiveDiagonal(j));
            }
            let d = d.sqrt();
            l[j * n + j] = d;
            for i in (j + 1)..n {
                let mut s = l[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        Ok(Self { n, l })
    }

    fn solve(&self, b: &[f64], x: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let s = b[i] - row.iter().zip(&x[..i]).map(|(a, v)| a * v).sum::<f64>();
            x[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for (k, xk) in x.iter().enumerate().skip(i + 1) {
                s -= self.l[k * n + i] * xk;
            }
            x[i] = s / self.l[i * n + i];
        }
    }
}

#[derive(Debug, Clone)]
struct Level {
    matrix: CsrMatrix,
    inv_diag: Vec<f64>,
    /// From the next coarser level; absent on level 0.
    prolong: Option<Prolongation>,
}

#[derive(Debug, Default)]
struct Scratch {
    rhs: Vec<f64>,
    sol: Vec<f64>,
    res: Vec<f64>,
}

/// V-cycle preconditioner for the finest level pushed so far.
#[derive(Debug)]
pub struct Multigrid {
    levels: Vec<Level>,
    coarse: DenseCholesky,
    smoothing_steps: usize,
    scratch: RefCell<Vec<Scratch>>,
}

fn inverse_diagonal(m: &CsrMatrix) -> Result<Vec<f64>, LinsolveError> {
    m.diagonal()
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            if d > 0.0 {
                Ok(1.0 / d)
            } else {
                Err(LinsolveError::NonPositiveDiagonal(i))
            }
        })
        .collect()
}

impl Multigrid {
    pub fn new(coarsest: CsrMatrix, smoothing_steps: usize) -> Result<Self, LinsolveError> {
        let coarse = DenseCholesky::new(&coarsest)?;
        let n = coarsest.nrows();
        Ok(Self {
            levels: vec![Level {
                inv_diag: inverse_diagonal(&coarsest)?,
                matrix: coarsest,
                prolong: None,
            }],
            coarse,
            smoothing_steps: smoothing_steps.max(1),
            scratch: RefCell::new(vec![Scratch {
                rhs: vec![0.0; n],
                sol: vec![0.0; n],
                res: vec![0.0; n],
            }]),
        })
    }

    /// Adds a finer level; `prolong` maps the current finest level into it.
    pub fn push_level(
        &mut self,
        matrix: CsrMatrix,
        prolong: Prolongation,
    ) -> Result<(), LinsolveError> {
        let finest = self.levels.last().expect("non-empty").matrix.nrows();
        if prolong.coarse_len != finest || prolong.rows.len() != matrix.nrows() {
            return Err(LinsolveError::DimensionMismatch {
                matrix: matrix.nrows(),
                vector: prolong.rows.len(),
            });
        }
        let n = matrix.nrows();
        self.levels.push(Level {
            inv_diag: inverse_diagonal(&matrix)?,
            matrix,
            prolong: Some(prolong),
        });
        self.scratch.get_mut().push(Scratch {
            rhs: vec![0.0; n],
            sol: vec![0.0; n],
            res: vec![0.0; n],
        });
        Ok(())
    }

    pub const DEFAULT_SMOOTHING_STEPS: usize = 2;

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn finest(&self) -> &CsrMatrix {
        &self.levels.last().expect("non-empty").matrix
    }

    fn smooth(level: &Level, b: &[f64], x: &mut [f64], forward: bool) {
        let m = &level.matrix;
        let mut sweep = |i: usize| {
            let (cols, vals) = m.row(i);
            let mut s = b[i];
            for (&j, v) in cols.iter().zip(vals) {
                if j as usize != i {
                    s -= v * x[j as usize];
                }
            }
            x[i] = s * level.inv_diag[i];
        };
        if forward {
            (0..m.nrows()).for_each(&mut sweep);
        } else {
            (0..m.nrows()).rev().for_each(&mut sweep);
        }
    }

    /// Approximately solves level `l` with `scratch[l].rhs`, result in
    /// `scratch[l].sol`.
    fn vcycle(&self, l: usize, scratch: &mut [Scratch]) {
        if l == 0 {
            let s = &mut scratch[0];
            self.coarse.solve(&s.rhs, &mut s.sol);
            return;
        }
        let level = &self.levels[l];
        let (lower, upper) = scratch.split_at_mut(l);
        let s = &mut upper[0];
        s.sol.iter_mut().for_each(|v| *v = 0.0);
        for _ in 0..self.smoothing_steps {
            Self::smooth(level, &s.rhs, &mut s.sol, true);
        }
        level.matrix.mul_vec_into(&s.sol, &mut s.res);
        for (r, b) in s.res.iter_mut().zip(&s.rhs) {
            *r = b - *r;
        }
        let prolong = level.prolong.as_ref().expect("fine levels have prolongation");
        prolong.apply_transpose(&s.res, &mut lower[l - 1].rhs);
        self.vcycle(l - 1, lower);
        prolong.add_apply(&lower[l - 1].sol, &mut s.sol);
        for _ in 0..self.smoothing_steps {
            Self::smooth(level, &s.rhs, &mut s.sol, false);
        }
    }
}

impl Preconditioner for Multigrid {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let mut scratch = self.scratch.borrow_mut();
        let top = self.levels.len() - 1;
        scratch[top].rhs.copy_from_slice(r);
        self.vcycle(top, &mut scratch);
        z.copy_from_slice(&scratch[top].sol);
    }
}
