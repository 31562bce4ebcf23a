//! P1 stiffness and mass matrices, load vectors, Dirichlet elimination and
//! L2 inner products involving the singular function.

use thiserror::Error;

use crate::geometry::{point_segment_distance, Point};
use crate::mesh::{signed_double_area, Mesh, MeshError};
use crate::quadrature::{
    for_each_point, for_each_point_singular, QuadRule, QuadratureError, SingularQuadConfig,
};
use crate::singular::SingularSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("triangle {triangle} is degenerate (area {area:e})")]
    Degenerate { triangle: usize, area: f64 },
    #[error("every vertex lies on the boundary; no free degrees of freedom")]
    NoInteriorDofs,
    #[error("load has {got} entries, matrix has {expected} rows")]
    LoadLength { got: usize, expected: usize },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Nodal values of a continuous piecewise-linear field on one mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct FeFunction {
    mesh_id: u64,
    level: usize,
    values: Vec<f64>,
}

impl FeFunction {
    pub fn new(mesh: &Mesh, values: Vec<f64>) -> Result<Self, MeshError> {
        if values.len() != mesh.num_vertices() {
            return Err(MeshError::LengthMismatch {
                got: values.len(),
                expected: mesh.num_vertices(),
            });
        }
        Ok(Self {
            mesh_id: mesh.id(),
            level: mesh.level(),
            values,
        })
    }

    pub fn zeros(mesh: &Mesh) -> Self {
        Self {
            mesh_id: mesh.id(),
            level: mesh.level(),
            values: vec![0.0; mesh.num_vertices()],
        }
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(mesh: &Mesh, f: impl Fn(Point) -> f64) -> Self {
        Self {
            mesh_id: mesh.id(),
            level: mesh.level(),
            values: mesh.points().iter().map(|p| f(*p)).collect(),
        }
    }

    pub fn mesh_id(&self) -> u64 {
        self.mesh_id
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn check_mesh(&self, mesh: &Mesh) -> Result<(), MeshError> {
        if self.mesh_id != mesh.id() {
            return Err(MeshError::MeshMismatch {
                field_mesh: self.mesh_id,
                fine_mesh: mesh.id(),
            });
        }
        Ok(())
    }

    /// Value inside triangle `t` at barycentric coordinates `b`.
    pub fn eval_bary(&self, mesh: &Mesh, t: usize, b: [f64; 3]) -> f64 {
        let [i, j, k] = mesh.triangles()[t];
        b[0] * self.values[i] + b[1] * self.values[j] + b[2] * self.values[k]
    }

    /// `self - other`, both on the same mesh.
    pub fn sub(&self, other: &FeFunction) -> Result<FeFunction, MeshError> {
        if self.mesh_id != other.mesh_id {
            return Err(MeshError::MeshMismatch {
                field_mesh: other.mesh_id,
                fine_mesh: self.mesh_id,
            });
        }
        Ok(FeFunction {
            mesh_id: self.mesh_id,
            level: self.level,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }
}

/// Maps mesh vertices to unknowns. Constrained vertices carry `u32::MAX`.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    free: Vec<usize>,
    index: Vec<u32>,
}

const CONSTRAINED: u32 = u32::MAX;

impl DofMap {
    /// Every vertex is an unknown.
    pub fn all(mesh: &Mesh) -> Self {
        let n = mesh.num_vertices();
        Self {
            free: (0..n).collect(),
            index: (0..n as u32).collect(),
        }
    }

    /// Homogeneous Dirichlet: boundary vertices are eliminated.
    pub fn interior(mesh: &Mesh) -> Self {
        let mut free = Vec::with_capacity(mesh.num_free_vertices());
        let index = mesh
            .boundary()
            .iter()
            .enumerate()
            .map(|(v, &on_boundary)| {
                if on_boundary {
                    CONSTRAINED
                } else {
                    free.push(v);
                    (free.len() - 1) as u32
                }
            })
            .collect();
        Self { free, index }
    }

    pub fn len(&self) -> usize {
        self.free.len()
    }

    pub fn is_empty(&self) -> bool {
        self.free.is_empty()
    }

    pub fn num_vertices(&self) -> usize {
        self.index.len()
    }

    pub fn dof(&self, vertex: usize) -> Option<usize> {
        match self.index[vertex] {
            CONSTRAINED => None,
            i => Some(i as usize),
        }
    }

    /// Unknown index -> vertex index.
    pub fn vertices(&self) -> &[usize] {
        &self.free
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&v| full[v]).collect()
    }

    /// Full vertex vector with zeros at constrained vertices.
    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.index.len()];
        for (&v, x) in self.free.iter().zip(reduced) {
            full[v] = *x;
        }
        full
    }
}

/// Square sparse matrix in compressed-row form, columns sorted per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Sparsity of the P1 operator on `mesh` restricted to `dofs`.
    pub fn p1_pattern(mesh: &Mesh, dofs: &DofMap) -> Self {
        let nv = mesh.num_vertices();
        let tris = mesh.triangles();
        // Vertex -> incident triangles.
        let mut start = vec![0usize; nv + 1];
        for t in tris {
            for &v in t {
                start[v + 1] += 1;
            }
        }
        for v in 0..nv {
            start[v + 1] += start[v];
        }
        let mut fill = start.clone();
        let mut incident = vec![0u32; start[nv]];
        for (k, t) in tris.iter().enumerate() {
            for &v in t {
                incident[fill[v]] = k as u32;
                fill[v] += 1;
            }
        }
        drop(fill);
        let n = dofs.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut col_idx: Vec<u32> = Vec::with_capacity(n * 7);
        let mut buf: Vec<u32> = Vec::with_capacity(32);
        for &v in dofs.vertices() {
            buf.clear();
            for &k in &incident[start[v]..start[v + 1]] {
                for &w in &tris[k as usize] {
                    if let Some(j) = dofs.dof(w) {
                        buf.push(j as u32);
                    }
                }
            }
            buf.sort_unstable();
            buf.dedup();
            col_idx.extend_from_slice(&buf);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        Self {
            n,
            row_ptr,
            col_idx,
            values: vec![0.0; nnz],
        }
    }

    /// Builds from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            assert!(i < n && j < n, "triplet ({i}, {j}) outside {n}x{n}");
            rows[i].push((j as u32, v));
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (j, v) in row {
                if col_idx.len() > *row_ptr.last().unwrap() && *col_idx.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n as u32).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let lo = self.row_ptr[i];
        let cols = &self.col_idx[lo..self.row_ptr[i + 1]];
        cols.binary_search(&(j as u32)).ok().map(|k| lo + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.values[k])
    }

    /// Adds to an entry that must exist in the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .position(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) not in sparsity pattern"));
        self.values[k] += v;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k] as usize];
            }
            *yi = s;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `x^T A x`
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| {
                let (cols, vals) = self.row(i);
                x[i] * cols
                    .iter()
                    .zip(vals)
                    .map(|(&j, v)| v * x[j as usize])
                    .sum::<f64>()
            })
            .sum()
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j as usize, i)).abs());
            }
        }
        worst
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).1.iter().sum()).collect()
    }

    /// Principal submatrix on the rows/columns selected by `dofs`.
    pub fn restrict(&self, dofs: &DofMap) -> Self {
        let mut row_ptr = Vec::with_capacity(dofs.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for &v in dofs.vertices() {
            let (cols, vals) = self.row(v);
            for (&j, &x) in cols.iter().zip(vals) {
                if let Some(jj) = dofs.dof(j as usize) {
                    col_idx.push(jj as u32);
                    values.push(x);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n: dofs.len(),
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, v) in cols.iter().zip(vals) {
                row[j as usize] = *v;
            }
        }
        d
    }
}

fn diameter2(c: &[Point; 3]) -> f64 {
    let d = |a: Point, b: Point| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
    d(c[0], c[1]).max(d(c[1], c[2])).max(d(c[2], c[0]))
}

fn checked_area(mesh: &Mesh, t: usize) -> Result<f64, AssemblyError> {
    let c = mesh.corners(t);
    let area = 0.5 * signed_double_area(c[0], c[1], c[2]);
    if area <= 1e-14 * diameter2(&c) {
        return Err(AssemblyError::Degenerate { triangle: t, area });
    }
    Ok(area)
}

/// Element stiffness `int grad(phi_i) . grad(phi_j)` on one triangle.
pub fn local_stiffness(c: &[Point; 3]) -> [[f64; 3]; 3] {
    let area = 0.5 * signed_double_area(c[0], c[1], c[2]);
    let mut b = [0.0; 3];
    let mut g = [0.0; 3];
    for i in 0..3 {
        let (p, q) = (c[(i + 1) % 3], c[(i + 2) % 3]);
        b[i] = p[1] - q[1];
        g[i] = q[0] - p[0];
    }
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = (b[i] * b[j] + g[i] * g[j]) / (4.0 * area);
        }
    }
    k
}

/// Element mass `int phi_i phi_j` on a triangle of the given area.
pub fn local_mass(area: f64) -> [[f64; 3]; 3] {
    let d = area / 6.0;
    let o = area / 12.0;
    [[d, o, o], [o, d, o], [o, o, d]]
}

fn assemble_with(
    mesh: &Mesh,
    dofs: &DofMap,
    local: impl Fn(&[Point; 3], f64) -> [[f64; 3]; 3],
) -> Result<CsrMatrix, AssemblyError> {
    let mut m = CsrMatrix::p1_pattern(mesh, dofs);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = checked_area(mesh, t)?;
        let e = local(&mesh.corners(t), area);
        let idx = tri.map(|v| dofs.dof(v));
        for a in 0..3 {
            let Some(i) = idx[a] else { continue };
            for b in 0..3 {
                if let Some(j) = idx[b] {
                    m.add(i, j, e[a][b]);
                }
            }
        }
    }
    Ok(m)
}

/// Stiffness on every vertex (singular: constants are in the kernel).
pub fn assemble_stiffness(mesh: &Mesh) -> Result<CsrMatrix, AssemblyError> {
    assemble_with(mesh, &DofMap::all(mesh), |c, _| local_stiffness(c))
}

pub fn assemble_stiffness_on(mesh: &Mesh, dofs: &DofMap) -> Result<CsrMatrix, AssemblyError> {
    assemble_with(mesh, dofs, |c, _| local_stiffness(c))
}

pub fn assemble_mass(mesh: &Mesh) -> Result<CsrMatrix, AssemblyError> {
    assemble_with(mesh, &DofMap::all(mesh), |_, area| local_mass(area))
}

pub fn assemble_mass_on(mesh: &Mesh, dofs: &DofMap) -> Result<CsrMatrix, AssemblyError> {
    assemble_with(mesh, dofs, |_, area| local_mass(area))
}

/// `M x` on full vertex vectors without storing `M`.
pub fn mass_apply(mesh: &Mesh, x: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), mesh.num_vertices());
    let mut y = vec![0.0; x.len()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let o = mesh.triangle_area(t) / 12.0;
        let s = x[tri[0]] + x[tri[1]] + x[tri[2]];
        for &v in tri {
            y[v] += o * (s + x[v]);
        }
    }
    y
}

/// `int f phi_i` for constant `f`, on every vertex.
pub fn assemble_load_constant(mesh: &Mesh, f_value: f64) -> Vec<f64> {
    let mut load = vec![0.0; mesh.num_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let share = f_value * mesh.triangle_area(t) / 3.0;
        for &v in tri {
            load[v] += share;
        }
    }
    load
}

/// Visits the quadrature points of triangle `t`, using the corner rule when
/// `singular` is set and the triangle touches the mesh's `Q` vertex.
fn visit_triangle(
    mesh: &Mesh,
    t: usize,
    singular: Option<&SingularQuadConfig>,
    rule: &QuadRule,
    visit: impl FnMut(Point, [f64; 3], f64),
) -> Result<(), QuadratureError> {
    let corners = mesh.corners(t);
    let corner = match (singular, mesh.q_vertex()) {
        (Some(_), Some(q)) => mesh.triangles()[t].iter().position(|&v| v == q),
        _ => None,
    };
    match (corner, singular) {
        (Some(c), Some(cfg)) => {
            for_each_point_singular(&corners, c, cfg, cfg.base_rule()?, visit);
        }
        _ => for_each_point(&corners, rule, visit),
    }
    Ok(())
}

/// `int g phi_i` with the degree-5 rule; triangles at `Q` use the corner rule
/// when `singular_at_q`.
pub fn assemble_load_field(
    mesh: &Mesh,
    g: impl Fn(Point) -> f64,
    singular_at_q: bool,
    quad: &SingularQuadConfig,
) -> Result<Vec<f64>, AssemblyError> {
    let rule = QuadRule::degree5();
    let singular = singular_at_q.then_some(quad);
    let mut load = vec![0.0; mesh.num_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let mut local = [0.0; 3];
        visit_triangle(mesh, t, singular, rule, |x, b, w| {
            let gw = w * g(x);
            for k in 0..3 {
                local[k] += gw * b[k];
            }
        })?;
        for k in 0..3 {
            load[tri[k]] += local[k];
        }
    }
    Ok(load)
}

/// Everything the singular function contributes on one mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularLoads {
    /// `int s phi_i` per vertex.
    pub s_load: Vec<f64>,
    /// `int lap(s) phi_i` per vertex.
    pub laplacian_load: Vec<f64>,
    /// `int s^2`.
    pub s_norm_sq: f64,
}

fn distance_to_triangle(p: Point, c: &[Point; 3]) -> f64 {
    let s0 = signed_double_area(c[0], c[1], p);
    let s1 = signed_double_area(c[1], c[2], p);
    let s2 = signed_double_area(c[2], c[0], p);
    if s0 >= 0.0 && s1 >= 0.0 && s2 >= 0.0 {
        return 0.0;
    }
    (0..3)
        .map(|k| point_segment_distance(p, c[k], c[(k + 1) % 3]))
        .fold(f64::INFINITY, f64::min)
}

/// One pass over the triangles meeting the disc `r < R` about `Q`.
pub fn assemble_singular_loads(
    mesh: &Mesh,
    spec: &SingularSpec,
    quad: &SingularQuadConfig,
) -> Result<SingularLoads, AssemblyError> {
    let rule = QuadRule::degree5();
    let n = mesh.num_vertices();
    let mut s_load = vec![0.0; n];
    let mut laplacian_load = vec![0.0; n];
    let mut s_norm_sq = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let corners = mesh.corners(t);
        if distance_to_triangle(spec.q, &corners) >= spec.radius {
            continue;
        }
        let mut ls = [0.0; 3];
        let mut ll = [0.0; 3];
        let mut ss = 0.0;
        visit_triangle(mesh, t, Some(quad), rule, |x, b, w| {
            let sample = spec.sample(x);
            let sw = w * sample.s;
            let lw = w * sample.laplacian;
            for k in 0..3 {
                ls[k] += sw * b[k];
                ll[k] += lw * b[k];
            }
            ss += sw * sample.s;
        })?;
        for k in 0..3 {
            s_load[tri[k]] += ls[k];
            laplacian_load[tri[k]] += ll[k];
        }
        s_norm_sq += ss;
    }
    Ok(SingularLoads {
        s_load,
        laplacian_load,
        s_norm_sq,
    })
}

/// Homogeneous-Dirichlet system on the interior vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub dofs: DofMap,
}

pub fn apply_dirichlet(
    matrix: &CsrMatrix,
    load: &[f64],
    mesh: &Mesh,
) -> Result<ReducedSystem, AssemblyError> {
    if load.len() != matrix.nrows() || matrix.nrows() != mesh.num_vertices() {
        return Err(AssemblyError::LoadLength {
            got: load.len(),
            expected: matrix.nrows(),
        });
    }
    let dofs = DofMap::interior(mesh);
    if dofs.is_empty() {
        return Err(AssemblyError::NoInteriorDofs);
    }
    Ok(ReducedSystem {
        matrix: matrix.restrict(&dofs),
        rhs: dofs.restrict(load),
        dofs,
    })
}

/// Operand of an L2 inner product.
#[derive(Clone, Copy)]
pub enum L2Operand<'a> {
    Field(&'a FeFunction),
    SMinus(&'a SingularSpec),
    Function(&'a dyn Fn(Point) -> f64),
}

impl L2Operand<'_> {
    fn eval(&self, mesh: &Mesh, t: usize, x: Point, b: [f64; 3]) -> f64 {
        match self {
            Self::Field(f) => f.eval_bary(mesh, t, b),
            Self::SMinus(spec) => spec.sample(x).s,
            Self::Function(g) => g(x),
        }
    }

    fn check(&self, mesh: &Mesh) -> Result<(), MeshError> {
        match self {
            Self::Field(f) => f.check_mesh(mesh),
            _ => Ok(()),
        }
    }
}

/// `int a b`: exact for two P1 fields, degree-5 (plus the corner rule when
/// `singular_at_q`) otherwise.
pub fn inner_product_l2(
    a: L2Operand<'_>,
    b: L2Operand<'_>,
    mesh: &Mesh,
    singular_at_q: bool,
    quad: &SingularQuadConfig,
) -> Result<f64, AssemblyError> {
    a.check(mesh)?;
    b.check(mesh)?;
    if let (L2Operand::Field(fa), L2Operand::Field(fb)) = (a, b) {
        let mb = mass_apply(mesh, fb.values());
        return Ok(fa.values().iter().zip(&mb).map(|(x, y)| x * y).sum());
    }
    let rule = QuadRule::degree5();
    let singular = singular_at_q.then_some(quad);
    let mut total = 0.0;
    for t in 0..mesh.num_triangles() {
        let mut local = 0.0;
        visit_triangle(mesh, t, singular, rule, |x, bary, w| {
            local += w * a.eval(mesh, t, x, bary) * b.eval(mesh, t, x, bary);
        })?;
        total += local;
    }
    Ok(total)
}
