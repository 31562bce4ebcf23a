//! Conforming triangulations and graded 1-to-4 refinement toward the
//! reentrant vertex.
//!
//! Each refinement step places one new node on every edge: the midpoint, or,
//! when one endpoint is `Q`, the point at distance `kappa * |pq|` from `Q`.
//! Every triangle is then split into four by joining its three edge nodes.
//! Children of coarse triangle `k` are stored at `4k..4k+4`, so the hierarchy
//! is nested by construction.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::FeFunction;
use crate::geometry::{distance, DomainSpec, Point};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("grading parameter kappa = {0} is outside (0, 0.5]")]
    InvalidKappa(f64),
    #[error("graded refinement (kappa = {0}) needs a mesh with a marked Q vertex")]
    MissingQVertex(f64),
    #[error("triangle {0} references vertex {1}, but the mesh has {2} vertices")]
    IndexOutOfRange(usize, usize, usize),
    #[error("triangle {0} is degenerate (signed area {1:e})")]
    Degenerate(usize, f64),
    #[error("edge ({0}, {1}) is shared by more than two triangles")]
    OverSharedEdge(usize, usize),
    #[error("edge ({0}, {1}) has a single triangle but does not lie on the domain boundary")]
    InteriorEdgeUnmatched(usize, usize),
    #[error("polygon vertex {0} is not a vertex of the triangulation")]
    MissingPolygonVertex(usize),
    #[error("vertex {0} is not used by any triangle")]
    UnusedVertex(usize),
    #[error("vertex {0} lies outside the domain")]
    VertexOutsideDomain(usize),
    #[error("domain is not a built-in; supply a triangulation file")]
    TriangulationRequired,
    #[error("field lives on mesh {field_mesh}, expected the parent of mesh {fine_mesh}")]
    MeshMismatch { field_mesh: u64, fine_mesh: u64 },
    #[error("field has {got} values but the mesh has {expected} vertices")]
    LengthMismatch { got: usize, expected: usize },
}

/// Where a vertex of a refined mesh came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ParentLink {
    /// Same vertex as parent vertex `.0`.
    Inherited(usize),
    /// Point `(1 - t) * a + t * b` on the parent edge `(a, b)`.
    Edge { a: usize, b: usize, t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinementConfig {
    pub kappa: f64,
    pub levels: usize,
}

impl RefinementConfig {
    pub fn uniform(levels: usize) -> Self {
        Self { kappa: 0.5, levels }
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        if self.kappa > 0.0 && self.kappa <= 0.5 {
            Ok(())
        } else {
            Err(MeshError::InvalidKappa(self.kappa))
        }
    }
}

static NEXT_MESH_ID: AtomicU64 = AtomicU64::new(1);

fn next_id() -> u64 {
    NEXT_MESH_ID.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone)]
pub struct Mesh {
    id: u64,
    parent_id: Option<u64>,
    points: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    q_vertex: Option<usize>,
    level: usize,
    parent_links: Option<Vec<ParentLink>>,
}

pub(crate) fn signed_double_area(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Number of triangles using each (sorted) edge.
fn edge_counts(triangles: &[[usize; 3]]) -> HashMap<(usize, usize), u8> {
    let mut counts = HashMap::with_capacity(triangles.len() * 3 / 2 + 8);
    for t in triangles {
        for k in 0..3 {
            *counts.entry(edge_key(t[k], t[(k + 1) % 3])).or_insert(0u8) += 1;
        }
    }
    counts
}

impl Mesh {
    /// Validates a user triangulation against its domain. Clockwise triangles
    /// are reoriented; boundary flags come from edges used by one triangle.
    pub fn from_triangulation(
        domain: &DomainSpec,
        points: Vec<Point>,
        mut triangles: Vec<[usize; 3]>,
    ) -> Result<Self, MeshError> {
        let n = points.len();
        let tol = 1e-12 * domain.diameter();
        let scale = domain.diameter().powi(2);
        for (k, t) in triangles.iter_mut().enumerate() {
            for &v in t.iter() {
                if v >= n {
                    return Err(MeshError::IndexOutOfRange(k, v, n));
                }
            }
            let a2 = signed_double_area(points[t[0]], points[t[1]], points[t[2]]);
            if a2.abs() <= 2e-14 * scale {
                return Err(MeshError::Degenerate(k, 0.5 * a2));
            }
            if a2 < 0.0 {
                t.swap(1, 2);
            }
        }
        let mut used = vec![false; n];
        for t in &triangles {
            for &v in t {
                used[v] = true;
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(MeshError::UnusedVertex(v));
        }
        for (i, p) in points.iter().enumerate() {
            if !domain.contains(*p) && !domain.on_boundary(*p, tol) {
                return Err(MeshError::VertexOutsideDomain(i));
            }
        }
        let mut boundary = vec![false; n];
        for (&(a, b), &count) in &edge_counts(&triangles) {
            match count {
                1 => {
                    let (pa, pb) = (points[a], points[b]);
                    let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
                    let on = |p| domain.on_boundary(p, tol);
                    if !(on(pa) && on(pb) && on(mid)) {
                        return Err(MeshError::InteriorEdgeUnmatched(a, b));
                    }
                    boundary[a] = true;
                    boundary[b] = true;
                }
                2 => {}
                _ => return Err(MeshError::OverSharedEdge(a, b)),
            }
        }
        let find = |target: Point| points.iter().position(|p| distance(*p, target) <= tol);
        for (i, v) in domain.vertices.iter().enumerate() {
            if find(*v).is_none() {
                return Err(MeshError::MissingPolygonVertex(i));
            }
        }
        let q_vertex = domain.reentrant_point().and_then(find);
        Ok(Mesh {
            id: next_id(),
            parent_id: None,
            points,
            triangles,
            boundary,
            q_vertex,
            level: 0,
            parent_links: None,
        })
    }

    /// Skips validation; boundary flags all false.
    #[cfg(test)]
    pub(crate) fn unchecked(points: Vec<Point>, triangles: Vec<[usize; 3]>) -> Self {
        Mesh {
            id: next_id(),
            parent_id: None,
            boundary: vec![false; points.len()],
            points,
            triangles,
            q_vertex: None,
            level: 0,
            parent_links: None,
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn parent_id(&self) -> Option<u64> {
        self.parent_id
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary(&self) -> &[bool] {
        &self.boundary
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn q_vertex(&self) -> Option<usize> {
        self.q_vertex
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// `None` on an initial mesh.
    pub fn parent_links(&self) -> Option<&[ParentLink]> {
        self.parent_links.as_deref()
    }

    pub fn num_vertices(&self) -> usize {
        self.points.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_free_vertices(&self) -> usize {
        self.boundary.iter().filter(|b| !**b).count()
    }

    pub fn corners(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.points[a], self.points[b], self.points[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        0.5 * signed_double_area(a, b, c)
    }

    /// Index of the coarse triangle containing fine triangle `t`.
    pub fn parent_triangle(&self, t: usize) -> Option<usize> {
        self.parent_id.map(|_| t / 4)
    }

    /// Every edge used by more than two triangles, or used once without
    /// both endpoints being boundary vertices, is reported.
    pub fn check_conforming(&self) -> Result<(), MeshError> {
        for (&(a, b), &count) in &edge_counts(&self.triangles) {
            match count {
                1 if !(self.boundary[a] && self.boundary[b]) => {
                    return Err(MeshError::InteriorEdgeUnmatched(a, b))
                }
                1 | 2 => {}
                _ => return Err(MeshError::OverSharedEdge(a, b)),
            }
        }
        Ok(())
    }

    /// Minimum interior angle over all triangles.
    pub fn shape_quality(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| min_angle(self.corners(t)))
            .fold(f64::INFINITY, f64::min)
    }

    /// Total area.
    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Smallest distance from `Q` to any other vertex.
    pub fn q_neighbor_distance(&self) -> Option<f64> {
        let q = self.q_vertex?;
        let origin = self.points[q];
        self.triangles
            .iter()
            .filter(|t| t.contains(&q))
            .flat_map(|t| t.iter().copied())
            .filter(|&v| v != q)
            .map(|v| distance(origin, self.points[v]))
            .reduce(f64::min)
    }
}

fn min_angle(c: [Point; 3]) -> f64 {
    (0..3)
        .map(|k| {
            let p = c[k];
            let u = [c[(k + 1) % 3][0] - p[0], c[(k + 1) % 3][1] - p[1]];
            let v = [c[(k + 2) % 3][0] - p[0], c[(k + 2) % 3][1] - p[1]];
            (u[0] * v[1] - u[1] * v[0])
                .abs()
                .atan2(u[0] * v[0] + u[1] * v[1])
        })
        .fold(PI, f64::min)
}

/// Square `[x0, x0 + s] x [y0, y0 + s]` split by both diagonals through a
/// centre vertex. `corner` maps counterclockwise corner points to indices.
fn crossed_square(corner: [usize; 4], center: usize, out: &mut Vec<[usize; 3]>) {
    for k in 0..4 {
        out.push([corner[k], corner[(k + 1) % 4], center]);
    }
}

/// Canonical coarse mesh for a built-in domain, or a validated user mesh.
pub fn build_initial_mesh(
    domain: &DomainSpec,
    triangulation: Option<(Vec<Point>, Vec<[usize; 3]>)>,
) -> Result<Mesh, MeshError> {
    if let Some((points, triangles)) = triangulation {
        return Mesh::from_triangulation(domain, points, triangles);
    }
    if domain.vertices == DomainSpec::square2().vertices {
        let (points, triangles) = square2_triangulation(true);
        Mesh::from_triangulation(domain, points, triangles)
    } else if domain.vertices == DomainSpec::lshape().vertices {
        let (points, triangles) = lshape_triangulation();
        Mesh::from_triangulation(domain, points, triangles)
    } else {
        Err(MeshError::TriangulationRequired)
    }
}

/// 3x3 vertex grid on `(0,2)^2`. With `toward_center` every cell diagonal
/// passes through `(1,1)`; otherwise all diagonals are parallel to `y = x`.
pub fn square2_triangulation(toward_center: bool) -> (Vec<Point>, Vec<[usize; 3]>) {
    let mut points = Vec::with_capacity(9);
    for j in 0..3 {
        for i in 0..3 {
            points.push([i as f64, j as f64]);
        }
    }
    let p = |i: usize, j: usize| 3 * j + i;
    let mut triangles = Vec::with_capacity(8);
    for j in 0..2 {
        for i in 0..2 {
            let (a, b, c, d) = (p(i, j), p(i + 1, j), p(i + 1, j + 1), p(i, j + 1));
            // Diagonal a-c runs through (1,1) for cells (0,0) and (1,1).
            if !toward_center || i == j {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
    }
    (points, triangles)
}

/// The three `2x2` quadrants of the L-shape, each cut into four triangles by
/// its diagonals.
pub fn lshape_triangulation() -> (Vec<Point>, Vec<[usize; 3]>) {
    let points = vec![
        [-2.0, -2.0], // 0
        [0.0, -2.0],  // 1
        [0.0, 0.0],   // 2 = Q
        [2.0, 0.0],   // 3
        [2.0, 2.0],   // 4
        [0.0, 2.0],   // 5
        [-2.0, 2.0],  // 6
        [-2.0, 0.0],  // 7
        [-1.0, -1.0], // 8
        [1.0, 1.0],   // 9
        [-1.0, 1.0],  // 10
    ];
    let mut triangles = Vec::with_capacity(12);
    crossed_square([0, 1, 2, 7], 8, &mut triangles);
    crossed_square([2, 3, 4, 5], 9, &mut triangles);
    crossed_square([7, 2, 5, 6], 10, &mut triangles);
    (points, triangles)
}

/// One graded refinement step.
pub fn refine(mesh: &Mesh, kappa: f64) -> Result<Mesh, MeshError> {
    if !(kappa > 0.0 && kappa <= 0.5) {
        return Err(MeshError::InvalidKappa(kappa));
    }
    let q = mesh.q_vertex;
    if kappa < 0.5 && q.is_none() {
        return Err(MeshError::MissingQVertex(kappa));
    }
    let nv = mesh.points.len();
    let ntri = mesh.triangles.len();
    let mut points = mesh.points.clone();
    let mut boundary = mesh.boundary.clone();
    let mut links: Vec<ParentLink> = (0..nv).map(ParentLink::Inherited).collect();
    points.reserve(ntri * 3 / 2 + 4);
    links.reserve(ntri * 3 / 2 + 4);
    // Edge key -> (new vertex, number of triangles seen).
    let mut edges: HashMap<(usize, usize), (usize, u8)> =
        HashMap::with_capacity(ntri * 3 / 2 + 8);
    let mut triangles = Vec::with_capacity(ntri * 4);
    for t in &mesh.triangles {
        let mut node = [0usize; 3];
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            let entry = edges.entry(edge_key(a, b)).or_insert_with(|| {
                // Orient the edge so that `t` is measured from Q.
                let (from, to, ratio) = match q {
                    Some(qv) if b == qv => (b, a, kappa),
                    Some(qv) if a == qv => (a, b, kappa),
                    _ => (a, b, 0.5),
                };
                let (pa, pb) = (mesh.points[from], mesh.points[to]);
                points.push([
                    pa[0] + ratio * (pb[0] - pa[0]),
                    pa[1] + ratio * (pb[1] - pa[1]),
                ]);
                links.push(ParentLink::Edge {
                    a: from,
                    b: to,
                    t: ratio,
                });
                (points.len() - 1, 0)
            });
            entry.1 += 1;
            node[k] = entry.0;
        }
        let [v0, v1, v2] = *t;
        let [m01, m12, m20] = node;
        triangles.push([v0, m01, m20]);
        triangles.push([m01, v1, m12]);
        triangles.push([m20, m12, v2]);
        triangles.push([m01, m12, m20]);
    }
    boundary.resize(points.len(), false);
    for &(v, count) in edges.values() {
        if count == 1 {
            boundary[v] = true;
        }
    }
    Ok(Mesh {
        id: next_id(),
        parent_id: Some(mesh.id),
        points,
        triangles,
        boundary,
        q_vertex: q,
        level: mesh.level + 1,
        parent_links: Some(links),
    })
}

/// The nested hierarchy `[mesh0, refine(mesh0), ...]`, `config.levels + 1`
/// meshes in total.
pub fn refine_to_level(mesh0: &Mesh, config: RefinementConfig) -> Result<Vec<Mesh>, MeshError> {
    config.validate()?;
    let mut out = Vec::with_capacity(config.levels + 1);
    out.push(mesh0.clone());
    for _ in 0..config.levels {
        let next = refine(out.last().expect("non-empty"), config.kappa)?;
        out.push(next);
    }
    Ok(out)
}

/// Exact re-expression of a coarse P1 field on the child mesh.
pub fn prolong(coarse: &FeFunction, fine_mesh: &Mesh) -> Result<FeFunction, MeshError> {
    if fine_mesh.parent_id != Some(coarse.mesh_id()) {
        return Err(MeshError::MeshMismatch {
            field_mesh: coarse.mesh_id(),
            fine_mesh: fine_mesh.id,
        });
    }
    let links = fine_mesh
        .parent_links
        .as_ref()
        .expect("refined meshes carry parent links");
    let c = coarse.values();
    let values = links
        .iter()
        .map(|link| match *link {
            ParentLink::Inherited(p) => c[p],
            ParentLink::Edge { a, b, t } => (1.0 - t) * c[a] + t * c[b],
        })
        .collect();
    Ok(FeFunction::new(fine_mesh, values).expect("length matches"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_triangle(kappa_q: bool) -> Mesh {
        let domain = DomainSpec::new(vec![[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]], None).unwrap();
        let mut m =
            Mesh::from_triangulation(&domain, domain.vertices.clone(), vec![[0, 1, 2]]).unwrap();
        if kappa_q {
            m.q_vertex = Some(0);
        }
        m
    }

    #[test]
    fn initial_meshes() {
        let sq = build_initial_mesh(&DomainSpec::square2(), None).unwrap();
        assert_eq!(sq.num_triangles(), 8);
        assert_eq!(sq.num_free_vertices(), 1);
        assert!((sq.area() - 4.0).abs() < 1e-15);
        assert_eq!(sq.q_vertex(), None);
        let l = build_initial_mesh(&DomainSpec::lshape(), None).unwrap();
        assert_eq!(l.num_triangles(), 12);
        assert_eq!(l.num_vertices(), 11);
        assert_eq!(l.q_vertex(), Some(2));
        assert!((l.area() - 12.0).abs() < 1e-15);
        assert!(l.is_boundary(2));
        assert_eq!(l.num_free_vertices(), 3);
        l.check_conforming().unwrap();
        sq.check_conforming().unwrap();
    }

    #[test]
    fn lshape_initial_mesh_is_symmetric_about_antidiagonal() {
        // Reflection across y = -x maps (x, y) to (-y, -x).
        let (points, triangles) = lshape_triangulation();
        let key = |p: Point| ((p[0] * 8.0).round() as i64, (p[1] * 8.0).round() as i64);
        let mut original: Vec<_> = triangles
            .iter()
            .map(|t| {
                let mut k: Vec<_> = t.iter().map(|&v| key(points[v])).collect();
                k.sort();
                k
            })
            .collect();
        let mut reflected: Vec<_> = triangles
            .iter()
            .map(|t| {
                let mut k: Vec<_> = t
                    .iter()
                    .map(|&v| key([-points[v][1], -points[v][0]]))
                    .collect();
                k.sort();
                k
            })
            .collect();
        original.sort();
        reflected.sort();
        assert_eq!(original, reflected);
    }

    #[test]
    fn user_polygon_needs_triangulation() {
        let domain = DomainSpec::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], None).unwrap();
        assert_eq!(
            build_initial_mesh(&domain, None).unwrap_err(),
            MeshError::TriangulationRequired
        );
    }

    #[test]
    fn rejects_hanging_node() {
        let domain = DomainSpec::square2();
        let points = vec![
            [0.0, 0.0],
            [2.0, 0.0],
            [2.0, 2.0],
            [0.0, 2.0],
            [1.0, 1.0],
        ];
        // Triangle (0,1,2) plus the two halves of (0,2,3) split at (1,1):
        // edge 0-2 is used once but is interior.
        let triangles = vec![[0, 1, 2], [0, 4, 3], [4, 2, 3]];
        assert!(matches!(
            Mesh::from_triangulation(&domain, points, triangles),
            Err(MeshError::InteriorEdgeUnmatched(..))
        ));
    }

    #[test]
    fn reorients_clockwise_triangles() {
        let domain = DomainSpec::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], None).unwrap();
        let m = Mesh::from_triangulation(&domain, domain.vertices.clone(), vec![[0, 2, 1]])
            .unwrap();
        assert!(m.triangle_area(0) > 0.0);
    }

    #[test]
    fn kappa_validation() {
        let m = build_initial_mesh(&DomainSpec::lshape(), None).unwrap();
        assert_eq!(refine(&m, 0.7).unwrap_err(), MeshError::InvalidKappa(0.7));
        assert_eq!(refine(&m, 0.0).unwrap_err(), MeshError::InvalidKappa(0.0));
        let sq = build_initial_mesh(&DomainSpec::square2(), None).unwrap();
        assert_eq!(refine(&sq, 0.3).unwrap_err(), MeshError::MissingQVertex(0.3));
    }

    #[test]
    fn uniform_refinement_uses_midpoints() {
        let sq = build_initial_mesh(&DomainSpec::square2(), None).unwrap();
        let fine = refine(&sq, 0.5).unwrap();
        assert_eq!(fine.num_triangles(), 32);
        for (i, link) in fine.parent_links().unwrap().iter().enumerate() {
            if let ParentLink::Edge { a, b, t } = *link {
                assert_eq!(t, 0.5);
                let (pa, pb) = (sq.points()[a], sq.points()[b]);
                assert_eq!(
                    fine.points()[i],
                    [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
                );
            }
        }
        fine.check_conforming().unwrap();
    }

    #[test]
    fn graded_node_on_q_edge() {
        let m = build_initial_mesh(&DomainSpec::lshape(), None).unwrap();
        let fine = refine(&m, 0.2).unwrap();
        let target = [0.4, 0.0];
        let i = fine
            .points()
            .iter()
            .position(|p| distance(*p, target) < 1e-15)
            .expect("graded node at (0.4, 0)");
        assert_eq!(
            fine.parent_links().unwrap()[i],
            ParentLink::Edge { a: 2, b: 3, t: 0.2 }
        );
        assert!(fine.is_boundary(i));
    }

    #[test]
    fn two_graded_steps_compose() {
        let m0 = single_triangle(true);
        let meshes = refine_to_level(&m0, RefinementConfig { kappa: 0.3, levels: 2 }).unwrap();
        let m2 = &meshes[2];
        // Q-edges of length 2: nearest vertices at 0.09 * 2 along each.
        for target in [[0.18, 0.0], [0.0, 0.18]] {
            assert!(m2
                .points()
                .iter()
                .any(|p| distance(*p, target) < 1e-15));
        }
        assert!((m2.q_neighbor_distance().unwrap() - 0.18).abs() < 1e-15);
    }

    #[test]
    fn hierarchy_sizes() {
        let m = build_initial_mesh(&DomainSpec::lshape(), None).unwrap();
        let h0 = refine_to_level(&m, RefinementConfig { kappa: 0.5, levels: 0 }).unwrap();
        assert_eq!(h0.len(), 1);
        let h = refine_to_level(&m, RefinementConfig { kappa: 0.3, levels: 3 }).unwrap();
        assert_eq!(h[3].num_triangles(), 768);
        assert_eq!(h[3].level(), 3);
        for (j, mesh) in h.iter().enumerate() {
            assert_eq!(mesh.num_triangles(), 12 * 4usize.pow(j as u32));
            assert_eq!(mesh.q_vertex(), Some(2));
            mesh.check_conforming().unwrap();
        }
    }

    #[test]
    fn shape_quality_basics() {
        let domain = DomainSpec::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.5, 3f64.sqrt() / 2.0]],
            None,
        )
        .unwrap();
        let m = Mesh::from_triangulation(&domain, domain.vertices.clone(), vec![[0, 1, 2]])
            .unwrap();
        assert!((m.shape_quality() - PI / 3.0).abs() < 1e-15);
        let sq = build_initial_mesh(&DomainSpec::square2(), None).unwrap();
        let h = refine_to_level(&sq, RefinementConfig::uniform(3)).unwrap();
        for mesh in &h {
            assert!((mesh.shape_quality() - PI / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn prolong_checks_mesh() {
        let m = build_initial_mesh(&DomainSpec::lshape(), None).unwrap();
        let h = refine_to_level(&m, RefinementConfig { kappa: 0.2, levels: 2 }).unwrap();
        let f = FeFunction::zeros(&h[0]);
        assert!(matches!(
            prolong(&f, &h[2]),
            Err(MeshError::MeshMismatch { .. })
        ));
        let mut hat = FeFunction::zeros(&h[0]);
        hat.values_mut()[2] = 1.0;
        let fine = prolong(&hat, &h[1]).unwrap();
        let i = h[1]
            .points()
            .iter()
            .position(|p| distance(*p, [0.4, 0.0]) < 1e-15)
            .unwrap();
        assert!((fine.values()[i] - 0.8).abs() < 1e-15);
    }
}
