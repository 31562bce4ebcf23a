use mixedfem::analysis::{diff_norm, error_against_exact, norm, NormKind};
use mixedfem::assembly::{apply_dirichlet, assemble_stiffness, inner_product_l2, L2Operand};
use mixedfem::geometry::DomainSpec;
use mixedfem::linsolve::{solve_spd, SolverConfig};
use mixedfem::mesh::{build_initial_mesh, refine_to_level, Mesh, RefinementConfig};
use mixedfem::quadrature::SingularQuadConfig;
use mixedfem::singular::{CutoffProfile, SingularSpec};
use mixedfem::solver::{
    manufactured_gradient, manufactured_solution, solve_modified, solve_usual, SolveConfigs,
    SolveReport, SourceSpec,
};

fn hierarchy(domain: &DomainSpec, kappa: f64, levels: usize) -> Vec<Mesh> {
    let m0 = build_initial_mesh(domain, None).unwrap();
    refine_to_level(&m0, RefinementConfig { kappa, levels }).unwrap()
}

fn lshape_spec(tau: f64, radius: f64) -> SingularSpec {
    SingularSpec::new(&DomainSpec::lshape(), tau, radius, CutoffProfile::Quintic).unwrap()
}

fn modified(mesh: &Mesh, spec: &SingularSpec) -> SolveReport {
    solve_modified(mesh, SourceSpec::Constant(1.0), Some(spec), &SolveConfigs::default()).unwrap()
}

#[test]
fn manufactured_solution_converges_at_first_order_in_h1() {
    let meshes = hierarchy(&DomainSpec::square2(), 0.5, 6);
    let errors: Vec<f64> = meshes[3..]
        .iter()
        .map(|mesh| {
            let r = solve_modified(mesh, SourceSpec::Manufactured, None, &SolveConfigs::default()).unwrap();
            error_against_exact(&r.u, mesh, manufactured_solution, manufactured_gradient, NormKind::H1).unwrap()
        })
        .collect();
    for pair in errors[1..].windows(2) {
        let rate = (pair[0] / pair[1]).log2();
        assert!((rate - 1.0).abs() <= 0.05, "rate {rate} from {errors:?}");
    }
}

#[test]
fn convex_domain_reduces_to_the_usual_method() {
    let mesh = hierarchy(&DomainSpec::square2(), 0.5, 4).pop().unwrap();
    let configs = SolveConfigs::default();
    let m = solve_modified(&mesh, SourceSpec::Constant(10.0), None, &configs).unwrap();
    let u = solve_usual(&mesh, SourceSpec::Constant(10.0), &configs).unwrap();
    assert!(m.c.is_none() && m.zeta.is_none());
    let scale = u.u.values().iter().fold(0.0f64, |a, b| a.max(b.abs()));
    for (a, b) in m.u.values().iter().zip(u.u.values()) {
        assert!((a - b).abs() <= 1e-10 * scale);
    }
}

/// `(w, xi)` and `||xi||^2` rebuilt from separate L2 products.
fn xi_products(r: &SolveReport, spec: &SingularSpec, mesh: &Mesh) -> (f64, f64, f64) {
    let quad = SingularQuadConfig::default();
    let zeta = r.zeta.as_ref().unwrap();
    let ip = |a, b, singular| inner_product_l2(a, b, mesh, singular, &quad).unwrap();
    let w_xi = ip(L2Operand::Field(&r.w), L2Operand::Field(zeta), false)
        + ip(L2Operand::Field(&r.w), L2Operand::SMinus(spec), true);
    let xi_sq = ip(L2Operand::Field(zeta), L2Operand::Field(zeta), false)
        + 2.0 * ip(L2Operand::Field(zeta), L2Operand::SMinus(spec), true)
        + ip(L2Operand::SMinus(spec), L2Operand::SMinus(spec), true);
    let w_sq = ip(L2Operand::Field(&r.w), L2Operand::Field(&r.w), false);
    (w_xi, xi_sq, w_sq)
}

#[test]
fn projection_removes_the_xi_component() {
    let spec = lshape_spec(0.125, 1.8);
    for (kappa, level) in [(0.5, 3), (0.3, 4), (0.1, 4)] {
        let mesh = hierarchy(&DomainSpec::lshape(), kappa, level).pop().unwrap();
        let r = modified(&mesh, &spec);
        let (w_xi, xi_sq, w_sq) = xi_products(&r, &spec, &mesh);
        let c = r.c.unwrap();
        assert!((c - w_xi / xi_sq).abs() <= 1e-12 * c.abs(), "kappa {kappa}");
        assert!((r.xi_norm_sq.unwrap() - xi_sq).abs() <= 1e-12 * xi_sq);
        // (w - c xi, xi) = 0.
        let defect = w_xi - c * xi_sq;
        assert!(defect.abs() <= 1e-10 * w_sq.sqrt() * xi_sq.sqrt(), "defect {defect}");
        // Cauchy-Schwarz.
        assert!(c.abs() <= w_sq.sqrt() / xi_sq.sqrt());
        assert!(c.abs() > 0.0);
    }
}

#[test]
fn methods_differ_only_on_the_nonconvex_domain() {
    let spec = lshape_spec(0.125, 1.8);
    let mesh = hierarchy(&DomainSpec::lshape(), 0.5, 3).pop().unwrap();
    let m = modified(&mesh, &spec);
    let u = solve_usual(&mesh, SourceSpec::Constant(1.0), &SolveConfigs::default()).unwrap();
    assert_eq!(m.w.values(), u.w.values());
    let gap = norm(&m.u.sub(&u.u).unwrap(), &mesh, NormKind::H1).unwrap();
    assert!(gap > 1e-2 * norm(&u.u, &mesh, NormKind::H1).unwrap());
}

#[test]
fn poisson_solve_meets_the_tolerance() {
    let quad = SingularQuadConfig::default();
    for mesh in hierarchy(&DomainSpec::square2(), 0.5, 5).iter().skip(2) {
        let stiffness = assemble_stiffness(mesh).unwrap();
        let load = SourceSpec::Manufactured.load(mesh, &quad).unwrap();
        let sys = apply_dirichlet(&stiffness, &load, mesh).unwrap();
        let config = SolverConfig::default();
        let (x, stats) = solve_spd(&sys.matrix, &sys.rhs, &config).unwrap();
        // Residual recomputed row by row.
        let mut res_sq = 0.0;
        for i in 0..sys.matrix.nrows() {
            let (cols, vals) = sys.matrix.row(i);
            let ax: f64 = cols.iter().zip(vals).map(|(&j, v)| v * x[j as usize]).sum();
            res_sq += (sys.rhs[i] - ax).powi(2);
        }
        let b_norm = sys.rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        let res = res_sq.sqrt();
        assert!(res <= 1e-12 * b_norm, "relative residual {}", res / b_norm);
        assert!((stats.residual_norm - res).abs() <= 1e-14 * b_norm);
        assert!((stats.rhs_norm - b_norm).abs() <= 1e-14 * b_norm);
    }
}

#[test]
fn reports_record_every_solve() {
    let spec = lshape_spec(0.125, 1.8);
    let mesh = hierarchy(&DomainSpec::lshape(), 0.2, 3).pop().unwrap();
    let r = modified(&mesh, &spec);
    let steps: Vec<String> = r.linear_solve_stats.iter().map(|s| s.step.to_string()).collect();
    assert_eq!(steps, ["w", "zeta", "u"]);
    let summary = r.summary();
    assert!(summary.contains("c = ") && summary.contains("[step.zeta]"));
}

#[test]
fn solves_are_deterministic() {
    let spec = lshape_spec(0.125, 1.8);
    let mesh = hierarchy(&DomainSpec::lshape(), 0.2, 4).pop().unwrap();
    let a = modified(&mesh, &spec);
    let b = modified(&mesh, &spec);
    assert_eq!(a.u.values(), b.u.values());
    assert_eq!(a.c.unwrap().to_bits(), b.c.unwrap().to_bits());
}

#[test]
fn cutoff_parameters_barely_move_u() {
    // Changing (tau, R) changes u by less than one level of refinement does.
    let meshes = hierarchy(&DomainSpec::lshape(), 0.2, 5);
    let (coarse, fine) = (&meshes[4], &meshes[5]);
    let a = modified(fine, &lshape_spec(0.125, 1.8));
    let b = modified(fine, &lshape_spec(0.25, 1.5));
    let prev = modified(coarse, &lshape_spec(0.125, 1.8));
    let change = norm(&b.u.sub(&a.u).unwrap(), fine, NormKind::H1).unwrap();
    let increment = diff_norm(&prev.u, &a.u, fine, NormKind::H1).unwrap();
    assert!(change < increment, "{change} vs {increment}");
    assert_ne!(a.c, b.c);
}

#[test]
fn usual_method_stays_bounded_away_from_modified_under_refinement() {
    let spec = lshape_spec(0.125, 1.8);
    let meshes = hierarchy(&DomainSpec::lshape(), 0.5, 5);
    let gap_at = |mesh: &Mesh| {
        let m = modified(mesh, &spec);
        let u = solve_usual(mesh, SourceSpec::Constant(1.0), &SolveConfigs::default()).unwrap();
        m.u.values().iter().zip(u.u.values()).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()))
    };
    let g3 = gap_at(&meshes[3]);
    let g5 = gap_at(&meshes[5]);
    assert!(g5 > 0.9 * g3 && g5 > 0.1, "{g3} {g5}");
}
