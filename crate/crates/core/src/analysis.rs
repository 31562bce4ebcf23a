//! Norms of P1 fields, cross-level increments, vertex gaps and the rate
//! indicator `R_j = log2(|v_j - v_{j-1}| / |v_{j+1} - v_j|)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{local_stiffness, FeFunction};
use crate::geometry::Point;
use crate::mesh::{prolong, Mesh, MeshError};
use crate::quadrature::{for_each_point, QuadRule};
use crate::solver::{Method, SolveReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("rates need at least 3 levels, got {0}")]
    TooFewLevels(usize),
    #[error("field on mesh {0} is not part of the given hierarchy")]
    NotInHierarchy(u64),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum NormKind {
    #[serde(rename = "l2")]
    L2,
    #[default]
    #[serde(rename = "h1")]
    H1,
    #[serde(rename = "h1semi")]
    H1Semi,
    #[serde(rename = "linf")]
    LinfVertices,
}

impl NormKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::L2 => "l2",
            Self::H1 => "h1",
            Self::H1Semi => "h1semi",
            Self::LinfVertices => "linf",
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NormKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "l2" => Ok(Self::L2),
            "h1" => Ok(Self::H1),
            "h1semi" => Ok(Self::H1Semi),
            "linf" => Ok(Self::LinfVertices),
            _ => Err(format!("unknown norm {s:?} (expected l2, h1, h1semi or linf)")),
        }
    }
}

/// Squared L2 norm from the element mass matrices.
fn l2_sq(mesh: &Mesh, v: &[f64]) -> f64 {
    let mut total = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let x = [v[tri[0]], v[tri[1]], v[tri[2]]];
        let s = x[0] + x[1] + x[2];
        let sq = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        total += mesh.triangle_area(t) / 12.0 * (sq + s * s);
    }
    total
}

/// Squared H1 seminorm from the element stiffness matrices.
fn h1semi_sq(mesh: &Mesh, v: &[f64]) -> f64 {
    let mut total = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let k = local_stiffness(&mesh.corners(t));
        let x = [v[tri[0]], v[tri[1]], v[tri[2]]];
        for i in 0..3 {
            for j in 0..3 {
                total += x[i] * k[i][j] * x[j];
            }
        }
    }
    total.max(0.0)
}

pub fn norm_of_values(mesh: &Mesh, v: &[f64], kind: NormKind) -> f64 {
    assert_eq!(v.len(), mesh.num_vertices());
    match kind {
        NormKind::L2 => l2_sq(mesh, v).sqrt(),
        NormKind::H1Semi => h1semi_sq(mesh, v).sqrt(),
        NormKind::H1 => (l2_sq(mesh, v) + h1semi_sq(mesh, v)).sqrt(),
        NormKind::LinfVertices => v.iter().fold(0.0, |m, x| m.max(x.abs())),
    }
}

pub fn norm(field: &FeFunction, mesh: &Mesh, kind: NormKind) -> Result<f64, AnalysisError> {
    field.check_mesh(mesh)?;
    Ok(norm_of_values(mesh, field.values(), kind))
}

/// `||fine - P coarse||` on the fine mesh.
pub fn diff_norm(
    coarse: &FeFunction,
    fine: &FeFunction,
    fine_mesh: &Mesh,
    kind: NormKind,
) -> Result<f64, AnalysisError> {
    fine.check_mesh(fine_mesh)?;
    let p = prolong(coarse, fine_mesh)?;
    let d: Vec<f64> = fine
        .values()
        .iter()
        .zip(p.values())
        .map(|(a, b)| a - b)
        .collect();
    Ok(norm_of_values(fine_mesh, &d, kind))
}

/// Largest vertex difference after prolonging the coarser field through the
/// hierarchy to the finer one's mesh.
pub fn linf_gap(a: &FeFunction, b: &FeFunction, hierarchy: &[Mesh]) -> Result<f64, AnalysisError> {
    let position = |f: &FeFunction| {
        hierarchy
            .iter()
            .position(|m| m.id() == f.mesh_id())
            .ok_or(AnalysisError::NotInHierarchy(f.mesh_id()))
    };
    let (ia, ib) = (position(a)?, position(b)?);
    let (mut low, high, il, ih) = if ia <= ib {
        (a.clone(), b, ia, ib)
    } else {
        (b.clone(), a, ib, ia)
    };
    for mesh in &hierarchy[il + 1..=ih] {
        low = prolong(&low, mesh)?;
    }
    Ok(low
        .values()
        .iter()
        .zip(high.values())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs())))
}

/// Error of a P1 field against a smooth function, by degree-5 quadrature on
/// every triangle.
pub fn error_against_exact(
    field: &FeFunction,
    mesh: &Mesh,
    exact: impl Fn(Point) -> f64,
    gradient: impl Fn(Point) -> [f64; 2],
    kind: NormKind,
) -> Result<f64, AnalysisError> {
    field.check_mesh(mesh)?;
    let rule = QuadRule::degree5();
    let v = field.values();
    let (mut l2, mut semi, mut linf) = (0.0, 0.0, 0.0f64);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let c = mesh.corners(t);
        let two_area =
            (c[1][0] - c[0][0]) * (c[2][1] - c[0][1]) - (c[2][0] - c[0][0]) * (c[1][1] - c[0][1]);
        let mut grad = [0.0; 2];
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            grad[0] += v[tri[i]] * (c[j][1] - c[k][1]) / two_area;
            grad[1] += v[tri[i]] * (c[k][0] - c[j][0]) / two_area;
        }
        for_each_point(&c, rule, |x, b, w| {
            let uh = b[0] * v[tri[0]] + b[1] * v[tri[1]] + b[2] * v[tri[2]];
            let e = exact(x) - uh;
            let g = gradient(x);
            l2 += w * e * e;
            semi += w * ((g[0] - grad[0]).powi(2) + (g[1] - grad[1]).powi(2));
        });
        for &vi in tri {
            linf = linf.max((exact(mesh.points()[vi]) - v[vi]).abs());
        }
    }
    Ok(match kind {
        NormKind::L2 => l2.sqrt(),
        NormKind::H1Semi => semi.sqrt(),
        NormKind::H1 => (l2 + semi).sqrt(),
        NormKind::LinfVertices => linf,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    U,
    W,
}

impl FieldKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::U => "u",
            Self::W => "w",
        }
    }

    pub fn select(self, report: &SolveReport) -> &FeFunction {
        match self {
            Self::U => &report.u,
            Self::W => &report.w,
        }
    }
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Rate indicator at one level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Rate {
    Value(f64),
    /// The next increment is zero.
    Undefined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRecord {
    pub level: usize,
    pub dofs: usize,
    /// `||v_j - v_{j-1}||`; absent on level 0.
    pub increment: Option<f64>,
    /// `R_j`; absent on the first and last level.
    pub rate: Option<Rate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub method: Method,
    pub kappa: f64,
    pub field: FieldKind,
    pub norm: NormKind,
    pub records: Vec<RateRecord>,
}

pub const RATE_CSV_HEADER: &str = "method,kappa,field,level,dofs,increment,rate";

impl RateTable {
    /// `increments[j]` is `||v_j - v_{j-1}||` (ignored for `j = 0`).
    pub fn from_increments(
        method: Method,
        kappa: f64,
        field: FieldKind,
        norm: NormKind,
        dofs: &[usize],
        increments: &[f64],
    ) -> Result<Self, AnalysisError> {
        let n = dofs.len();
        if n < 3 {
            return Err(AnalysisError::TooFewLevels(n));
        }
        assert_eq!(increments.len(), n, "one increment slot per level");
        let records = (0..n)
            .map(|j| {
                let rate = (j >= 1 && j + 1 < n).then(|| {
                    let (a, b) = (increments[j], increments[j + 1]);
                    if b == 0.0 || a == 0.0 {
                        Rate::Undefined
                    } else {
                        Rate::Value((a / b).log2())
                    }
                });
                RateRecord {
                    level: j,
                    dofs: dofs[j],
                    increment: (j >= 1).then_some(increments[j]),
                    rate,
                }
            })
            .collect();
        Ok(Self {
            method,
            kappa,
            field,
            norm,
            records,
        })
    }

    pub fn rate_at(&self, level: usize) -> Option<f64> {
        match self.records.get(level)?.rate? {
            Rate::Value(r) => Some(r),
            Rate::Undefined => None,
        }
    }

    /// CSV rows without header; empty cells mean "not applicable".
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let inc = r.increment.map(|v| format!("{v:.10e}")).unwrap_or_default();
            let rate = match r.rate {
                Some(Rate::Value(v)) => format!("{v:.6}"),
                Some(Rate::Undefined) => "undefined".into(),
                None => String::new(),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                self.method, self.kappa, self.field, r.level, r.dofs, inc, rate
            ));
        }
        out
    }
}

/// Rate table from stored solves on all levels of one hierarchy.
pub fn rate_table(
    reports: &[SolveReport],
    hierarchy: &[Mesh],
    field: FieldKind,
    kind: NormKind,
    kappa: f64,
) -> Result<RateTable, AnalysisError> {
    if reports.len() < 3 {
        return Err(AnalysisError::TooFewLevels(reports.len()));
    }
    let method = reports[0].method;
    let mut dofs = Vec::with_capacity(reports.len());
    let mut increments = vec![0.0; reports.len()];
    for (j, report) in reports.iter().enumerate() {
        let mesh = hierarchy
            .get(j)
            .filter(|m| m.id() == field.select(report).mesh_id())
            .ok_or(AnalysisError::NotInHierarchy(field.select(report).mesh_id()))?;
        dofs.push(mesh.num_free_vertices());
        if j > 0 {
            increments[j] = diff_norm(
                field.select(&reports[j - 1]),
                field.select(report),
                mesh,
                kind,
            )?;
        }
    }
    RateTable::from_increments(method, kappa, field, kind, &dofs, &increments)
}
