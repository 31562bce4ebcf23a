//! The cut-off `eta`, the dual singular function
//! `s(r, theta) = eta(r) r^(-lambda) sin(lambda theta)` with
//! `lambda = pi / omega`, and its Laplacian.
//!
//! `r^(-lambda) sin(lambda theta)` is harmonic, so the Laplacian of `s` only
//! involves derivatives of `eta` and is supported on the annulus
//! `tau R < r < R`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{DomainSpec, GeometryError, Point, PolarFrame};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SingularError {
    #[error("omega = {0} is outside (pi, 2pi); no singular correction is defined")]
    OmegaOutOfRange(f64),
    #[error("tau = {0} is outside (0, 1)")]
    InvalidTau(f64),
    #[error("cut-off radius R = {radius} must lie in (0, {max}]")]
    InvalidRadius { radius: f64, max: f64 },
    #[error("the singular function is not defined at the corner itself")]
    AtCorner,
    #[error("unknown cut-off profile `{0}` (expected `quintic` or `smooth`)")]
    UnknownProfile(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// `pi / omega` for a reentrant angle; lies in `(1/2, 1)`.
pub fn lambda1(omega: f64) -> Result<f64, SingularError> {
    if omega > PI && omega < 2.0 * PI {
        Ok(PI / omega)
    } else {
        Err(SingularError::OmegaOutOfRange(omega))
    }
}

/// Radial transition from 1 (at `tau R`) to 0 (at `R`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CutoffProfile {
    /// Odd quintic in the rescaled variable; C^2 across both seams.
    #[default]
    Quintic,
    /// `exp(-1/t)`-based smooth step; C^infinity.
    Smooth,
}

impl std::str::FromStr for CutoffProfile {
    type Err = SingularError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "quintic" => Ok(Self::Quintic),
            "smooth" => Ok(Self::Smooth),
            other => Err(SingularError::UnknownProfile(other.to_string())),
        }
    }
}

/// `eta`, `eta'`, `eta''` at radius `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

const PLATEAU_ONE: Cutoff = Cutoff {
    value: 1.0,
    d1: 0.0,
    d2: 0.0,
};
const PLATEAU_ZERO: Cutoff = Cutoff {
    value: 0.0,
    d1: 0.0,
    d2: 0.0,
};

fn quintic(r: f64, tau: f64, radius: f64) -> Cutoff {
    let ds = 2.0 / (radius * (1.0 - tau));
    let s = ds * r - (1.0 + tau) / (1.0 - tau);
    let s2 = s * s;
    let one_minus = 1.0 - s2;
    Cutoff {
        value: 0.5 - (15.0 / 16.0) * s + (5.0 / 8.0) * s * s2 - (3.0 / 16.0) * s * s2 * s2,
        d1: -(15.0 / 16.0) * one_minus * one_minus * ds,
        d2: (15.0 / 4.0) * s * one_minus * ds * ds,
    }
}

/// `e(t) = exp(-1/t)` and its first two derivatives, zero for `t <= 0`.
fn bump_edge(t: f64) -> (f64, f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let e = (-1.0 / t).exp();
    let t2 = t * t;
    (e, e / t2, e * (1.0 - 2.0 * t) / (t2 * t2))
}

fn smooth(r: f64, tau: f64, radius: f64) -> Cutoff {
    // g(t) = e(t) / (e(t) + e(1 - t)) with t = (R - r) / (R - tau R).
    let dt = -1.0 / (radius * (1.0 - tau));
    let t = (radius - r) / (radius * (1.0 - tau));
    let (a, a1, a2) = bump_edge(t);
    let (b, b1, b2) = bump_edge(1.0 - t);
    // d/dt e(1 - t) = -b1, second derivative b2.
    let (b1, b2) = (-b1, b2);
    let d = a + b;
    let d1 = a1 + b1;
    let d2 = a2 + b2;
    let g = a / d;
    let g1 = (a1 - g * d1) / d;
    let g2 = (a2 - 2.0 * g1 * d1 - g * d2) / d;
    Cutoff {
        value: g,
        d1: g1 * dt,
        d2: g2 * dt * dt,
    }
}

impl CutoffProfile {
    pub fn eval(self, r: f64, tau: f64, radius: f64) -> Cutoff {
        if r <= tau * radius {
            return PLATEAU_ONE;
        }
        if r >= radius {
            return PLATEAU_ZERO;
        }
        match self {
            Self::Quintic => quintic(r, tau, radius),
            Self::Smooth => smooth(r, tau, radius),
        }
    }
}

/// Parameters of the singular function attached to one reentrant corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularSpec {
    pub omega: f64,
    pub q: Point,
    pub tau: f64,
    pub radius: f64,
    pub frame: PolarFrame,
    pub profile: CutoffProfile,
}

/// Value of `s` and of its Laplacian at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularSample {
    pub s: f64,
    pub laplacian: f64,
}

impl SingularSpec {
    pub const DEFAULT_TAU: f64 = 1.0 / 8.0;

    /// Checks `tau` in `(0,1)` and `0 < R <= max_sector_radius`.
    pub fn new(
        domain: &DomainSpec,
        tau: f64,
        radius: f64,
        profile: CutoffProfile,
    ) -> Result<Self, SingularError> {
        let frame = domain.frame()?;
        lambda1(frame.omega)?;
        if !(tau > 0.0 && tau < 1.0) {
            return Err(SingularError::InvalidTau(tau));
        }
        let max = domain.max_sector_radius()?;
        if !(radius > 0.0 && radius <= max) {
            return Err(SingularError::InvalidRadius { radius, max });
        }
        Ok(Self {
            omega: frame.omega,
            q: frame.origin,
            tau,
            radius,
            frame,
            profile,
        })
    }

    /// `tau = 1/8`; `R = 9/5` on the built-in L-shape, otherwise
    /// `0.9 * max_sector_radius`.
    pub fn with_defaults(domain: &DomainSpec) -> Result<Self, SingularError> {
        let radius = Self::default_radius(domain)?;
        Self::new(domain, Self::DEFAULT_TAU, radius, CutoffProfile::Quintic)
    }

    pub fn default_radius(domain: &DomainSpec) -> Result<f64, SingularError> {
        if domain.vertices == DomainSpec::lshape().vertices {
            Ok(9.0 / 5.0)
        } else {
            Ok(0.9 * domain.max_sector_radius()?)
        }
    }

    pub fn lambda(&self) -> f64 {
        PI / self.omega
    }

    pub fn eta(&self, r: f64) -> Cutoff {
        self.profile.eval(r, self.tau, self.radius)
    }

    pub fn polar(&self, p: Point) -> (f64, f64) {
        self.frame.polar(p)
    }

    /// `s` at polar coordinates `(r, theta)`, `r > 0`.
    pub fn s_minus_polar(&self, r: f64, theta: f64) -> f64 {
        if r >= self.radius {
            return 0.0;
        }
        let lambda = self.lambda();
        self.eta(r).value * r.powf(-lambda) * (lambda * theta).sin()
    }

    pub fn s_minus(&self, p: Point) -> Result<f64, SingularError> {
        let (r, theta) = self.polar(p);
        if r == 0.0 {
            return Err(SingularError::AtCorner);
        }
        Ok(self.s_minus_polar(r, theta))
    }

    /// Laplacian of `s`; zero off the annulus and at the corner.
    pub fn laplacian_polar(&self, r: f64, theta: f64) -> f64 {
        if r <= self.tau * self.radius || r >= self.radius {
            return 0.0;
        }
        let lambda = self.lambda();
        let eta = self.eta(r);
        let sin = (lambda * theta).sin();
        let u = r.powf(-lambda) * sin;
        let du = -lambda * u / r;
        u * (eta.d2 + eta.d1 / r) + 2.0 * eta.d1 * du
    }

    pub fn laplacian_s_minus(&self, p: Point) -> f64 {
        let (r, theta) = self.polar(p);
        self.laplacian_polar(r, theta)
    }

    /// Both quantities from one polar evaluation; `s` is `NaN` at the corner.
    pub fn sample(&self, p: Point) -> SingularSample {
        let (r, theta) = self.polar(p);
        let s = if r == 0.0 {
            f64::NAN
        } else {
            self.s_minus_polar(r, theta)
        };
        SingularSample {
            s,
            laplacian: self.laplacian_polar(r, theta),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SingularSpec {
        SingularSpec::with_defaults(&DomainSpec::lshape()).unwrap()
    }

    #[test]
    fn lambda_values() {
        assert!((lambda1(1.5 * PI).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(lambda1(PI * (1.0 + 1e-9)).unwrap() < 1.0);
        assert!(lambda1(PI * (1.0 + 1e-9)).unwrap() > 1.0 - 1e-8);
        assert!((lambda1(2.0 * PI * (1.0 - 1e-12)).unwrap() - 0.5).abs() < 1e-11);
        assert!(lambda1(2.0 * PI).is_err());
        assert!(lambda1(PI).is_err());
        assert!(lambda1(0.5 * PI).is_err());
    }

    #[test]
    fn defaults_on_lshape() {
        let s = spec();
        assert_eq!(s.tau, 0.125);
        assert_eq!(s.radius, 1.8);
        assert_eq!(s.q, [0.0, 0.0]);
        assert!(SingularSpec::with_defaults(&DomainSpec::square2()).is_err());
        let d = DomainSpec::lshape();
        assert!(matches!(
            SingularSpec::new(&d, 0.1, 2.5, CutoffProfile::Quintic),
            Err(SingularError::InvalidRadius { .. })
        ));
        assert!(matches!(
            SingularSpec::new(&d, 1.0, 1.0, CutoffProfile::Quintic),
            Err(SingularError::InvalidTau(_))
        ));
    }

    #[test]
    fn eta_plateaus_and_midpoint() {
        let s = spec();
        let (tr, r) = (s.tau * s.radius, s.radius);
        assert_eq!(s.eta(tr / 2.0).value, 1.0);
        assert_eq!(s.eta(1.1 * r).value, 0.0);
        assert!((s.eta(0.5 * (tr + r)).value - 0.5).abs() < 1e-15);
        assert!("smooth".parse::<CutoffProfile>().is_ok());
        assert!("cubic".parse::<CutoffProfile>().is_err());
    }

    #[test]
    fn quintic_vanishing_derivatives_at_seams() {
        let s = spec();
        for r in [s.tau * s.radius, s.radius] {
            let c = quintic(r, s.tau, s.radius);
            assert!(c.d1.abs() < 1e-12, "eta' at {r}: {}", c.d1);
            assert!(c.d2.abs() < 1e-12, "eta'' at {r}: {}", c.d2);
        }
        assert!((quintic(s.tau * s.radius, s.tau, s.radius).value - 1.0).abs() < 1e-12);
        assert!(quintic(s.radius, s.tau, s.radius).value.abs() < 1e-12);
    }

    #[test]
    fn cutoff_is_c2_across_seams() {
        for profile in [CutoffProfile::Quintic, CutoffProfile::Smooth] {
            let (tau, radius) = (0.125, 1.8);
            for seam in [tau * radius, radius] {
                let inside = profile.eval(seam * (1.0 - 1e-13), tau, radius);
                let outside = profile.eval(seam * (1.0 + 1e-13), tau, radius);
                assert!((inside.value - outside.value).abs() < 1e-12);
                assert!((inside.d1 - outside.d1).abs() < 1e-12);
                assert!((inside.d2 - outside.d2).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn cutoff_derivatives_match_finite_differences() {
        for profile in [CutoffProfile::Quintic, CutoffProfile::Smooth] {
            let (tau, radius) = (0.25, 1.5);
            for k in 1..40 {
                let r = tau * radius + (radius - tau * radius) * k as f64 / 40.0;
                let h = 1e-5;
                let c = profile.eval(r, tau, radius);
                let p = profile.eval(r + h, tau, radius);
                let m = profile.eval(r - h, tau, radius);
                let d1 = (p.value - m.value) / (2.0 * h);
                let d2 = (p.value - 2.0 * c.value + m.value) / (h * h);
                assert!((d1 - c.d1).abs() < 1e-8 * (1.0 + c.d1.abs()), "{profile:?} r={r}");
                assert!((d2 - c.d2).abs() < 1e-4 * (1.0 + c.d2.abs()), "{profile:?} r={r}");
                let dd = (p.d1 - m.d1) / (2.0 * h);
                assert!((dd - c.d2).abs() < 1e-7 * (1.0 + c.d2.abs()));
            }
        }
    }

    #[test]
    fn s_minus_values() {
        let s = spec();
        let frame = s.frame;
        assert_eq!(s.s_minus(frame.point_at(1.9, 1.0)).unwrap(), 0.0);
        assert_eq!(s.s_minus([1.0, 0.0]).unwrap(), 0.0);
        assert!(s.s_minus([0.0, -1.0]).unwrap().abs() < 1e-15);
        let r = s.tau * s.radius / 2.0;
        let v = s.s_minus(frame.point_at(r, s.omega / 2.0)).unwrap();
        // Independent evaluation: (0.1125)^(-2/3) * sin(pi/2).
        let expected = (0.1125f64).ln().mul_add(-2.0 / 3.0, 0.0).exp();
        assert!((v - expected).abs() < 1e-13 * expected);
        assert_eq!(s.s_minus([0.0, 0.0]).unwrap_err(), SingularError::AtCorner);
    }

    #[test]
    fn laplacian_support() {
        let s = spec();
        let f = s.frame;
        assert_eq!(s.laplacian_s_minus(f.point_at(s.tau * s.radius / 2.0, 1.0)), 0.0);
        assert_eq!(s.laplacian_s_minus(f.point_at(1.5 * s.radius, 1.0)), 0.0);
        assert_eq!(s.laplacian_s_minus([0.0, 0.0]), 0.0);
        for r in [0.4, 0.9, 1.5] {
            assert!(s.laplacian_s_minus(f.point_at(r, 0.0)).abs() < 1e-14);
            assert!(s.laplacian_s_minus(f.point_at(r, s.omega)).abs() < 1e-12);
        }
    }

    /// Five-point Laplacian using the offsets actually realized in floating
    /// point, so rounding of `p +- h` does not enter the second difference.
    pub(crate) fn fd_laplacian(g: impl Fn(Point) -> f64, p: Point, h: f64) -> f64 {
        let g0 = g(p);
        let mut lap = 0.0;
        for axis in 0..2 {
            let mut plus = p;
            let mut minus = p;
            plus[axis] += h;
            minus[axis] -= h;
            let hp = plus[axis] - p[axis];
            let hm = p[axis] - minus[axis];
            lap += 2.0 * ((g(plus) - g0) / hp + (g(minus) - g0) / hm) / (hp + hm);
        }
        lap
    }

    #[test]
    fn laplacian_matches_difference_quotient() {
        let s = spec();
        let p = s.frame.point_at(0.6 * s.radius, s.omega / 2.0);
        let exact = s.laplacian_s_minus(p);
        let fd = fd_laplacian(|x| s.s_minus(x).unwrap(), p, 1e-4);
        assert!(exact.abs() > 1e-3);
        assert!(((fd - exact) / exact).abs() < 1e-6, "fd {fd} exact {exact}");
    }

    #[test]
    fn uncut_factor_is_harmonic() {
        let s = spec();
        let lambda = s.lambda();
        let u = |p: Point| {
            let (r, t) = s.polar(p);
            r.powf(-lambda) * (lambda * t).sin()
        };
        for k in 0..100 {
            let r = 0.3 + 1.2 * ((k * 37) % 100) as f64 / 100.0;
            let t = 0.2 + (s.omega - 0.4) * ((k * 61) % 100) as f64 / 100.0;
            let p = s.frame.point_at(r, t);
            let scale = u(p).abs() / (r * r);
            assert!(fd_laplacian(u, p, 1e-4).abs() <= 1e-5 * scale.max(1.0));
        }
    }
}
