//! Polygonal domains, reentrant-corner detection and the local polar frame at
//! the reentrant vertex.
//!
//! Boundary loops are stored counterclockwise. When a reentrant vertex `Q` is
//! marked, the frame puts `theta = 0` on one of the two boundary edges at `Q`
//! and `theta = omega` on the other, with the domain locally occupying
//! `0 < theta < omega`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Point = [f64; 2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("vertex index {index} out of range for a polygon with {len} vertices")]
    VertexOutOfRange { index: usize, len: usize },
    #[error("edge adjacent to vertex {0} has zero length")]
    DegenerateEdge(usize),
    #[error("boundary loop is not simple: edges {0} and {1} intersect")]
    SelfIntersecting(usize, usize),
    #[error("boundary loop is clockwise (signed area {0})")]
    Clockwise(f64),
    #[error("vertex {index} has interior angle {angle} rad, not in (pi, 2pi)")]
    NotReentrant { index: usize, angle: f64 },
    #[error("domain has {0} reentrant corners; at most one is supported")]
    MultipleReentrant(usize),
    #[error("edge {edge} is not adjacent to the reentrant vertex {vertex}")]
    FrameEdgeNotAdjacent { edge: usize, vertex: usize },
    #[error("domain has no marked reentrant vertex")]
    NoReentrantVertex,
    #[error("unknown built-in domain `{0}`")]
    UnknownDomain(String),
}

/// Local polar frame `(r, theta)` centred at the reentrant vertex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarFrame {
    pub origin: Point,
    /// Direction angle (global, radians) of the `theta = 0` ray.
    pub zero_direction: f64,
    /// `true` when theta increases counterclockwise from the `theta = 0` ray.
    pub counterclockwise: bool,
    pub omega: f64,
}

impl PolarFrame {
    /// Polar coordinates of `p`. At the origin itself `(0, 0)` is returned.
    ///
    /// Angles that fall outside `[0, omega]` (rounding on the `theta = 0` ray,
    /// or points outside the sector's angular range) are snapped to the
    /// nearer of the two bounding rays.
    pub fn polar(&self, p: Point) -> (f64, f64) {
        let dx = p[0] - self.origin[0];
        let dy = p[1] - self.origin[1];
        let r = dx.hypot(dy);
        if r == 0.0 {
            return (0.0, 0.0);
        }
        let mut phi = dy.atan2(dx) - self.zero_direction;
        if !self.counterclockwise {
            phi = -phi;
        }
        let mut theta = phi.rem_euclid(2.0 * PI);
        if theta > self.omega {
            theta = if theta > 0.5 * (self.omega + 2.0 * PI) {
                0.0
            } else {
                self.omega
            };
        }
        (r, theta)
    }

    /// Inverse of [`PolarFrame::polar`].
    pub fn point_at(&self, r: f64, theta: f64) -> Point {
        let phi = if self.counterclockwise { theta } else { -theta };
        let a = self.zero_direction + phi;
        [self.origin[0] + r * a.cos(), self.origin[1] + r * a.sin()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub vertices: Vec<Point>,
    pub reentrant_index: Option<usize>,
    pub omega: Option<f64>,
    /// Boundary edge `i` runs from `vertices[i]` to `vertices[i + 1]`.
    pub frame_origin_edge: Option<usize>,
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    if len2 == 0.0 {
        return distance(p, a);
    }
    let t = (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0);
    distance(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let o1 = cross(sub(b, a), sub(c, a));
    let o2 = cross(sub(b, a), sub(d, a));
    let o3 = cross(sub(d, c), sub(a, c));
    let o4 = cross(sub(d, c), sub(b, c));
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0))
        && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0))
    {
        return true;
    }
    let on = |p: Point, q: Point, r: Point, o: f64| {
        o == 0.0
            && r[0] >= p[0].min(q[0])
            && r[0] <= p[0].max(q[0])
            && r[1] >= p[1].min(q[1])
            && r[1] <= p[1].max(q[1])
    };
    on(a, b, c, o1) || on(a, b, d, o2) || on(c, d, a, o3) || on(c, d, b, o4)
}

/// Twice the signed area of a closed loop (positive when counterclockwise).
pub fn signed_area(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    0.5 * (0..n)
        .map(|i| cross(vertices[i], vertices[(i + 1) % n]))
        .sum::<f64>()
}

impl DomainSpec {
    /// Validates the loop and marks `reentrant` (if given) as `Q`, with the
    /// `theta = 0` ray on the outgoing edge at `Q`.
    pub fn new(vertices: Vec<Point>, reentrant: Option<usize>) -> Result<Self, GeometryError> {
        let mut domain = DomainSpec {
            vertices,
            reentrant_index: None,
            omega: None,
            frame_origin_edge: None,
        };
        domain.validate_loop()?;
        if let Some(q) = reentrant {
            domain.mark_reentrant(q)?;
        }
        Ok(domain)
    }

    /// Like [`DomainSpec::new`] but finds the reentrant vertex itself.
    pub fn with_detected_corner(vertices: Vec<Point>) -> Result<Self, GeometryError> {
        let mut domain = Self::new(vertices, None)?;
        let found = domain.reentrant_vertices()?;
        match found.as_slice() {
            [] => {}
            [q] => domain.mark_reentrant(*q)?,
            many => return Err(GeometryError::MultipleReentrant(many.len())),
        }
        Ok(domain)
    }

    /// `(0,2)^2`
    pub fn square2() -> Self {
        Self::new(vec![[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]], None)
            .expect("built-in square is valid")
    }

    /// `(-2,2)^2 \ (0,2)x(-2,0)` with `Q = (0,0)`; `theta = 0` runs along the
    /// edge toward `(2,0)` and `theta = 3pi/2` along the edge toward `(0,-2)`.
    pub fn lshape() -> Self {
        Self::new(
            vec![
                [-2.0, -2.0],
                [0.0, -2.0],
                [0.0, 0.0],
                [2.0, 0.0],
                [2.0, 2.0],
                [-2.0, 2.0],
            ],
            Some(2),
        )
        .expect("built-in L-shape is valid")
    }

    pub fn builtin(name: &str) -> Result<Self, GeometryError> {
        match name {
            "square2" => Ok(Self::square2()),
            "lshape" => Ok(Self::lshape()),
            other => Err(GeometryError::UnknownDomain(other.to_string())),
        }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn is_convex(&self) -> bool {
        self.reentrant_index.is_none()
    }

    pub fn edge(&self, i: usize) -> (Point, Point) {
        let n = self.vertices.len();
        (self.vertices[i % n], self.vertices[(i + 1) % n])
    }

    /// Diameter of the vertex set, used to scale geometric tolerances.
    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                d = d.max(distance(*a, *b));
            }
        }
        d
    }

    fn validate_loop(&self) -> Result<(), GeometryError> {
        let n = self.vertices.len();
        if n < 3 {
            return Err(GeometryError::TooFewVertices(n));
        }
        for i in 0..n {
            let (a, b) = self.edge(i);
            if a == b {
                return Err(GeometryError::DegenerateEdge(i));
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                let (a, b) = self.edge(i);
                let (c, d) = self.edge(j);
                if adjacent {
                    // Adjacent edges may only share their common endpoint:
                    // reject fold-backs along the same line.
                    let (shared, p, q) = if j == i + 1 { (b, a, d) } else { (a, b, c) };
                    let u = sub(p, shared);
                    let v = sub(q, shared);
                    if cross(u, v) == 0.0 && dot(u, v) > 0.0 {
                        return Err(GeometryError::SelfIntersecting(i, j));
                    }
                } else if segments_intersect(a, b, c, d) {
                    return Err(GeometryError::SelfIntersecting(i, j));
                }
            }
        }
        let area = signed_area(&self.vertices);
        if area <= 0.0 {
            return Err(GeometryError::Clockwise(area));
        }
        Ok(())
    }

    /// Interior angle at `vertex_index`, in `(0, 2pi)`.
    pub fn interior_angle(&self, vertex_index: usize) -> Result<f64, GeometryError> {
        let n = self.vertices.len();
        if vertex_index >= n {
            return Err(GeometryError::VertexOutOfRange {
                index: vertex_index,
                len: n,
            });
        }
        let v = self.vertices[vertex_index];
        let next = sub(self.vertices[(vertex_index + 1) % n], v);
        let prev = sub(self.vertices[(vertex_index + n - 1) % n], v);
        if dot(next, next) == 0.0 || dot(prev, prev) == 0.0 {
            return Err(GeometryError::DegenerateEdge(vertex_index));
        }
        // Counterclockwise sweep from the outgoing edge to the incoming one.
        Ok(cross(next, prev).atan2(dot(next, prev)).rem_euclid(2.0 * PI))
    }

    pub fn reentrant_vertices(&self) -> Result<Vec<usize>, GeometryError> {
        let mut out = Vec::new();
        for i in 0..self.vertices.len() {
            if self.interior_angle(i)? > PI {
                out.push(i);
            }
        }
        Ok(out)
    }

    fn mark_reentrant(&mut self, q: usize) -> Result<(), GeometryError> {
        let angle = self.interior_angle(q)?;
        if !(angle > PI && angle < 2.0 * PI) {
            return Err(GeometryError::NotReentrant { index: q, angle });
        }
        let others = self.reentrant_vertices()?.into_iter().filter(|&i| i != q).count();
        if others > 0 {
            return Err(GeometryError::MultipleReentrant(others + 1));
        }
        self.reentrant_index = Some(q);
        self.omega = Some(angle);
        self.frame_origin_edge = Some(q);
        Ok(())
    }

    /// Moves the `theta = 0` ray to another boundary edge adjacent to `Q`.
    pub fn with_frame_origin_edge(mut self, edge: usize) -> Result<Self, GeometryError> {
        let q = self.reentrant_index.ok_or(GeometryError::NoReentrantVertex)?;
        let n = self.vertices.len();
        if edge != q && edge != (q + n - 1) % n {
            return Err(GeometryError::FrameEdgeNotAdjacent { edge, vertex: q });
        }
        self.frame_origin_edge = Some(edge);
        Ok(self)
    }

    pub fn reentrant_point(&self) -> Option<Point> {
        self.reentrant_index.map(|q| self.vertices[q])
    }

    pub fn frame(&self) -> Result<PolarFrame, GeometryError> {
        let q = self.reentrant_index.ok_or(GeometryError::NoReentrantVertex)?;
        let omega = self.omega.ok_or(GeometryError::NoReentrantVertex)?;
        let n = self.vertices.len();
        let origin = self.vertices[q];
        let edge = self.frame_origin_edge.unwrap_or(q);
        // Outgoing edge: sweep counterclockwise; incoming edge: clockwise.
        let (other, counterclockwise) = if edge == q {
            (self.vertices[(q + 1) % n], true)
        } else {
            (self.vertices[(q + n - 1) % n], false)
        };
        let d = sub(other, origin);
        Ok(PolarFrame {
            origin,
            zero_direction: d[1].atan2(d[0]),
            counterclockwise,
            omega,
        })
    }

    /// Polar coordinates about `Q`; `Q` itself maps to `(0, 0)`.
    pub fn polar_at(&self, point: Point) -> Result<(f64, f64), GeometryError> {
        Ok(self.frame()?.polar(point))
    }

    /// Largest `R` with the closed sector of radius `R` at `Q` inside the
    /// closure of the domain: the distance from `Q` to the nearest boundary
    /// edge not touching `Q`.
    pub fn max_sector_radius(&self) -> Result<f64, GeometryError> {
        let q = self.reentrant_index.ok_or(GeometryError::NoReentrantVertex)?;
        let n = self.vertices.len();
        let origin = self.vertices[q];
        Ok((0..n)
            .filter(|&e| e != q && e != (q + n - 1) % n)
            .map(|e| {
                let (a, b) = self.edge(e);
                point_segment_distance(origin, a, b)
            })
            .fold(f64::INFINITY, f64::min))
    }

    /// Is `p` on the boundary loop, within `tol` (absolute)?
    pub fn on_boundary(&self, p: Point, tol: f64) -> bool {
        (0..self.vertices.len()).any(|e| {
            let (a, b) = self.edge(e);
            point_segment_distance(p, a, b) <= tol
        })
    }

    /// Even-odd point-in-polygon test (boundary points may go either way).
    pub fn contains(&self, p: Point) -> bool {
        let n = self.vertices.len();
        let mut inside = false;
        for i in 0..n {
            let (a, b) = self.edge(i);
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                if p[0] < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }
}
