#![allow(dead_code)]

use mixedfem::geometry::Point;
use mixedfem::singular::SingularSpec;

/// Five-point Laplacian of the singular function with step `h`.
///
/// Each stencil difference `s(p + h e) - s(p)` is formed directly from
/// differences of the radius, angle and cut-off so that it carries only
/// relative rounding; evaluating `s` at the five points and subtracting would
/// bury the `h^2` signal under rounding noise of size `eps / h^2`. Valid where
/// the whole stencil lies in the transition zone of the quintic cut-off.
pub fn fd_laplacian_s_minus(spec: &SingularSpec, p: Point, h: f64) -> f64 {
    let lambda = std::f64::consts::PI / spec.omega;
    let d = [p[0] - spec.q[0], p[1] - spec.q[1]];
    let r = d[0].hypot(d[1]);
    let theta = spec.polar(p).1;
    let orientation = if spec.frame.counterclockwise { 1.0 } else { -1.0 };
    let width = spec.radius * (1.0 - spec.tau);
    let sigma = 2.0 * r / width - (1.0 + spec.tau) / (1.0 - spec.tau);

    let eta = 0.5 - 15.0 / 16.0 * sigma + 5.0 / 8.0 * sigma.powi(3)
        - 3.0 / 16.0 * sigma.powi(5);
    let pow = r.powf(-lambda);
    let sine = (lambda * theta).sin();

    let diff = |e: [f64; 2], step: f64| -> f64 {
        let de = d[0] * e[0] + d[1] * e[1];
        let cross = d[0] * e[1] - d[1] * e[0];
        let moved = [d[0] + step * e[0], d[1] + step * e[1]];
        let r_new = moved[0].hypot(moved[1]);
        let dr = (2.0 * step * de + step * step) / (r_new + r);
        let dtheta = (orientation * step * cross).atan2(r * r + step * de);

        let s_new = sigma + 2.0 * dr / width;
        let ds = 2.0 * dr / width;
        assert!(sigma.abs() < 1.0 && s_new.abs() < 1.0, "stencil leaves the transition zone");
        let power_diff = |k: i32| -> f64 {
            (0..k).map(|i| s_new.powi(i) * sigma.powi(k - 1 - i)).sum::<f64>() * ds
        };
        let d_eta = -15.0 / 16.0 * ds + 5.0 / 8.0 * power_diff(3) - 3.0 / 16.0 * power_diff(5);
        let d_pow = pow * (-lambda * (dr / r).ln_1p()).exp_m1();
        let d_sine = 2.0 * (lambda * (theta + 0.5 * dtheta)).cos() * (0.5 * lambda * dtheta).sin();

        d_eta * (pow + d_pow) * (sine + d_sine) + eta * d_pow * (sine + d_sine) + eta * pow * d_sine
    };

    let mut lap = 0.0;
    for e in [[1.0, 0.0], [0.0, 1.0]] {
        lap += (diff(e, h) + diff(e, -h)) / (h * h);
    }
    lap
}
