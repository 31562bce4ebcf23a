//! Symmetric quadrature on triangles, and a composite rule for integrands
//! with an `r^-p` singularity at one vertex.
//!
//! The singular rule cuts the corner triangle at its two edge midpoints,
//! applies the base rule to the three pieces away from the corner and
//! recurses into the corner piece (a half-scale copy) `subdivision_depth`
//! times. The innermost corner piece gets the base rule.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{distance, Point};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("no shipped rule of degree {0} (available: 2, 5, 8)")]
    UnsupportedDegree(usize),
}

/// Barycentric points with weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    pub degree: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

fn orbit3(a: f64, w: f64, pts: &mut Vec<[f64; 3]>, wts: &mut Vec<f64>) {
    let b = 1.0 - 2.0 * a;
    for p in [[a, a, b], [a, b, a], [b, a, a]] {
        pts.push(p);
        wts.push(w);
    }
}

fn orbit6(a: f64, b: f64, w: f64, pts: &mut Vec<[f64; 3]>, wts: &mut Vec<f64>) {
    let c = 1.0 - a - b;
    for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
        pts.push(p);
        wts.push(w);
    }
}

impl QuadRule {
    /// Three-point rule, exact to degree 2.
    pub fn degree2() -> &'static QuadRule {
        static RULE: OnceLock<QuadRule> = OnceLock::new();
        RULE.get_or_init(|| {
            let (mut points, mut weights) = (Vec::new(), Vec::new());
            orbit3(1.0 / 6.0, 1.0 / 3.0, &mut points, &mut weights);
            QuadRule {
                degree: 2,
                points,
                weights,
            }
        })
    }

    /// Seven-point Radon rule, exact to degree 5.
    pub fn degree5() -> &'static QuadRule {
        static RULE: OnceLock<QuadRule> = OnceLock::new();
        RULE.get_or_init(|| {
            let s = 15f64.sqrt();
            let mut points = vec![[1.0 / 3.0; 3]];
            let mut weights = vec![9.0 / 40.0];
            orbit3((6.0 - s) / 21.0, (155.0 - s) / 1200.0, &mut points, &mut weights);
            orbit3((6.0 + s) / 21.0, (155.0 + s) / 1200.0, &mut points, &mut weights);
            QuadRule {
                degree: 5,
                points,
                weights,
            }
        })
    }

    /// Sixteen-point Dunavant rule, exact to degree 8.
    pub fn degree8() -> &'static QuadRule {
        static RULE: OnceLock<QuadRule> = OnceLock::new();
        RULE.get_or_init(|| {
            let mut points = vec![[1.0 / 3.0; 3]];
            let mut weights = vec![0.144_315_607_677_787];
            orbit3(0.459_292_588_292_723, 0.095_091_634_267_285, &mut points, &mut weights);
            orbit3(0.170_569_307_751_760, 0.103_217_370_534_718, &mut points, &mut weights);
            orbit3(0.050_547_228_317_031, 0.032_458_497_623_198, &mut points, &mut weights);
            orbit6(
                0.008_394_777_409_958,
                0.263_112_829_634_638,
                0.027_230_314_174_435,
                &mut points,
                &mut weights,
            );
            QuadRule {
                degree: 8,
                points,
                weights,
            }
        })
    }

    /// Cheapest shipped rule exact to at least `degree`.
    pub fn of_degree(degree: usize) -> Result<&'static QuadRule, QuadratureError> {
        match degree {
            0..=2 => Ok(Self::degree2()),
            3..=5 => Ok(Self::degree5()),
            6..=8 => Ok(Self::degree8()),
            d => Err(QuadratureError::UnsupportedDegree(d)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingularQuadConfig {
    pub subdivision_depth: usize,
    pub base_rule_degree: usize,
}

impl Default for SingularQuadConfig {
    fn default() -> Self {
        Self {
            subdivision_depth: 48,
            base_rule_degree: 5,
        }
    }
}

impl SingularQuadConfig {
    pub fn base_rule(&self) -> Result<&'static QuadRule, QuadratureError> {
        QuadRule::of_degree(self.base_rule_degree)
    }
}

fn tri_area(t: &[Point; 3]) -> f64 {
    0.5 * ((t[1][0] - t[0][0]) * (t[2][1] - t[0][1]) - (t[1][1] - t[0][1]) * (t[2][0] - t[0][0]))
        .abs()
}

/// Calls `visit(x, bary, weight)` for every quadrature point; weights carry
/// the triangle area.
pub fn for_each_point(
    triangle: &[Point; 3],
    rule: &QuadRule,
    mut visit: impl FnMut(Point, [f64; 3], f64),
) {
    let area = tri_area(triangle);
    for (b, w) in rule.points.iter().zip(&rule.weights) {
        let x = [
            b[0] * triangle[0][0] + b[1] * triangle[1][0] + b[2] * triangle[2][0],
            b[0] * triangle[0][1] + b[1] * triangle[1][1] + b[2] * triangle[2][1],
        ];
        visit(x, *b, w * area);
    }
}

/// Composite corner rule on a triangle whose vertex `corner` is singular.
///
/// Barycentric coordinates passed to `visit` are those of the outer
/// triangle. Points are formed as offsets from the corner so that they stay
/// distinct from it at any depth; recursion stops early once the corner
/// piece is below rounding resolution of the corner's coordinates.
pub fn for_each_point_singular(
    triangle: &[Point; 3],
    corner: usize,
    config: &SingularQuadConfig,
    rule: &QuadRule,
    mut visit: impl FnMut(Point, [f64; 3], f64),
) {
    let q = triangle[corner];
    let (ia, ib) = ((corner + 1) % 3, (corner + 2) % 3);
    let da = [triangle[ia][0] - q[0], triangle[ia][1] - q[1]];
    let db = [triangle[ib][0] - q[0], triangle[ib][1] - q[1]];
    let outer_area = tri_area(triangle);
    let diam = distance(triangle[ia], q)
        .max(distance(triangle[ib], q))
        .max(distance(triangle[ia], triangle[ib]));
    let floor = 1e3 * f64::EPSILON * q[0].abs().max(q[1].abs());

    // A sub-triangle in outer barycentrics is given by its (sa, sb) pairs;
    // the corner barycentric is 1 - sa - sb.
    let mut emit = |sub: [[f64; 2]; 3], scale2: f64| {
        for (b, w) in rule.points.iter().zip(&rule.weights) {
            let sa = b[0] * sub[0][0] + b[1] * sub[1][0] + b[2] * sub[2][0];
            let sb = b[0] * sub[0][1] + b[1] * sub[1][1] + b[2] * sub[2][1];
            let x = [q[0] + sa * da[0] + sb * db[0], q[1] + sa * da[1] + sb * db[1]];
            let mut bary = [0.0; 3];
            bary[corner] = 1.0 - sa - sb;
            bary[ia] = sa;
            bary[ib] = sb;
            visit(x, bary, w * outer_area * scale2);
        }
    };

    let mut s = 1.0f64;
    for _ in 0..config.subdivision_depth {
        if s * diam < floor {
            break;
        }
        let h = 0.5 * s;
        // Pieces away from the corner: (ma, A, mab), (mb, mab, B), (ma, mab, mb),
        // each with area s^2/4 of the outer triangle.
        let ma = [h, 0.0];
        let mb = [0.0, h];
        let a = [s, 0.0];
        let b = [0.0, s];
        let mab = [h, h];
        let scale2 = h * h;
        emit([ma, a, mab], scale2);
        emit([mb, mab, b], scale2);
        emit([ma, mab, mb], scale2);
        s = h;
    }
    emit([[0.0, 0.0], [s, 0.0], [0.0, s]], s * s);
}

/// Approximation of the integral of `f` over `triangle`.
pub fn integrate(triangle: &[Point; 3], f: impl Fn(Point) -> f64, rule: &QuadRule) -> f64 {
    let mut sum = 0.0;
    for_each_point(triangle, rule, |x, _, w| sum += w * f(x));
    sum
}

/// Local index of `q` among the triangle's vertices, if it is one.
pub fn corner_index(triangle: &[Point; 3], q: Point) -> Option<usize> {
    let diam = distance(triangle[0], triangle[1])
        .max(distance(triangle[1], triangle[2]))
        .max(distance(triangle[2], triangle[0]));
    triangle
        .iter()
        .position(|p| distance(*p, q) <= 1e-14 * diam)
}

/// Integral of `f`, which may be singular at `q`. Falls back to the base
/// rule when `q` is not a vertex of the triangle.
pub fn integrate_singular(
    triangle: &[Point; 3],
    f: impl Fn(Point) -> f64,
    config: &SingularQuadConfig,
    q: Point,
) -> Result<f64, QuadratureError> {
    let rule = config.base_rule()?;
    let mut sum = 0.0;
    match corner_index(triangle, q) {
        Some(c) => for_each_point_singular(triangle, c, config, rule, |x, _, w| sum += w * f(x)),
        None => for_each_point(triangle, rule, |x, _, w| sum += w * f(x)),
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    const REF: [Point; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    /// Exact integral of x^i y^j over the reference triangle.
    fn monomial(i: usize, j: usize) -> f64 {
        factorial(i) * factorial(j) / factorial(i + j + 2)
    }

    #[test]
    fn weights_sum_to_one() {
        for rule in [QuadRule::degree2(), QuadRule::degree5(), QuadRule::degree8()] {
            let s: f64 = rule.weights.iter().sum();
            assert!((s - 1.0).abs() < 1e-14, "degree {}", rule.degree);
            for p in &rule.points {
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn monomial_exactness() {
        for rule in [QuadRule::degree2(), QuadRule::degree5(), QuadRule::degree8()] {
            for i in 0..=rule.degree {
                for j in 0..=(rule.degree - i) {
                    let got = integrate(&REF, |p| p[0].powi(i as i32) * p[1].powi(j as i32), rule);
                    let err = (got - monomial(i, j)).abs();
                    assert!(err <= 1e-14, "deg {} x^{i} y^{j}: err {err:e}", rule.degree);
                }
            }
        }
    }

    #[test]
    fn degree_lookup() {
        assert_eq!(QuadRule::of_degree(5).unwrap().points.len(), 7);
        assert_eq!(QuadRule::of_degree(3).unwrap().degree, 5);
        assert_eq!(QuadRule::of_degree(8).unwrap().points.len(), 16);
        assert_eq!(
            QuadRule::of_degree(9).unwrap_err(),
            QuadratureError::UnsupportedDegree(9)
        );
    }

    #[test]
    fn constant_gives_area() {
        let t = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        assert!((integrate(&t, |_| 1.0, QuadRule::degree5()) - 0.5).abs() < 1e-15);
        let t = [[1.0, 2.0], [4.0, 2.5], [2.0, 6.0]];
        let area = 0.5 * ((3.0 * 4.0) - (0.5 * 1.0));
        assert!((integrate(&t, |_| 1.0, QuadRule::degree2()) - area).abs() < 1e-13);
    }

    #[test]
    fn x2y_on_reference() {
        let got = integrate(&REF, |p| p[0] * p[0] * p[1], QuadRule::degree5());
        assert!((got - 1.0 / 60.0).abs() < 1e-16);
    }

    #[test]
    fn hat_products() {
        let t = [[0.3, 0.1], [1.7, 0.4], [0.9, 1.3]];
        let area = tri_area(&t);
        let mut m = [[0.0; 3]; 3];
        for_each_point(&t, QuadRule::degree2(), |_, b, w| {
            for i in 0..3 {
                for j in 0..3 {
                    m[i][j] += w * b[i] * b[j];
                }
            }
        });
        for (i, row) in m.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let expected = if i == j { area / 6.0 } else { area / 12.0 };
                assert!((v - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn depth_zero_is_base_rule() {
        let t = [[0.0, 0.0], [0.5, 0.1], [0.2, 0.6]];
        let f = |p: Point| (1.0 + p[0]).ln() * (2.0 - p[1]).sqrt();
        let cfg = SingularQuadConfig {
            subdivision_depth: 0,
            base_rule_degree: 5,
        };
        let a = integrate_singular(&t, f, &cfg, t[0]).unwrap();
        let b = integrate(&t, f, QuadRule::degree5());
        assert!((a - b).abs() < 1e-16);
    }

    #[test]
    fn polynomials_are_partition_exact() {
        let t = [[0.0, 0.0], [0.7, 0.2], [0.1, 0.9]];
        let f = |p: Point| 1.0 + p[0] - 3.0 * p[1] * p[1] + p[0].powi(3) * p[1] * p[1];
        let plain = integrate(&t, f, QuadRule::degree5());
        for depth in [1, 4, 16, 48] {
            let cfg = SingularQuadConfig {
                subdivision_depth: depth,
                base_rule_degree: 5,
            };
            for corner in 0..3 {
                let sub = integrate_singular(&t, f, &cfg, t[corner]).unwrap();
                assert!((sub - plain).abs() < 1e-13, "depth {depth} corner {corner}");
            }
        }
    }

    #[test]
    fn falls_back_when_q_is_not_a_vertex() {
        let t = [[1.0, 1.0], [2.0, 1.0], [1.0, 2.0]];
        let f = |p: Point| 1.0 / p[0].hypot(p[1]);
        let cfg = SingularQuadConfig::default();
        let a = integrate_singular(&t, f, &cfg, [0.0, 0.0]).unwrap();
        assert_eq!(a, integrate(&t, f, QuadRule::degree5()));
    }

    #[test]
    fn corner_points_never_hit_the_corner() {
        let t = [[0.25, -0.5], [1.0, 0.0], [0.0, 1.0]];
        let cfg = SingularQuadConfig {
            subdivision_depth: 200,
            base_rule_degree: 8,
        };
        let mut n = 0;
        for_each_point_singular(&t, 0, &cfg, QuadRule::degree8(), |x, b, w| {
            assert!(x != t[0]);
            assert!(w > 0.0);
            assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            n += 1;
        });
        // The floor stops recursion well before 200 levels.
        assert!(n < 200 * 48);
    }
}
