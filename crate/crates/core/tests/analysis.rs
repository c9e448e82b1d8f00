use hpvem::analysis::{
    benchmark_grad, benchmark_u, convergence_study, decay_exponent, energy_error_pi, energy_seminorm, inverse_lab_bubble,
    inverse_lab_gll, inverse_lab_hminus1, inverse_lab_triangle, inverse_lab_weighted, skeleton_l2_error, spectrum,
    stability_table, ConvergenceConfig, DegreePolicy, Method, Shape, StabilityOptions,
};
use hpvem::assemble::{assign_degrees, solve_poisson, DegreeRule};
use hpvem::mesh::{build_graded_mesh, MeshFamily};
use hpvem::oracle::FineSpace;
use hpvem::vem_local::{CellGeometry, Stabilization};
use hpvem::Point;

fn study(family: MeshFamily, degrees: DegreePolicy, n_min: usize, n_max: usize) -> ConvergenceConfig {
    ConvergenceConfig {
        family,
        sigma: 0.5,
        degrees,
        stabilization: Stabilization::default(),
        n_min,
        n_max,
        method: Method::Vem,
    }
}

#[test]
fn quadratic_solution_has_zero_projection_error() {
    let mesh = build_graded_mesh(MeshFamily::GradedSquares, 2, 0.5).unwrap();
    let u = |x: Point| x.x * x.x - x.y * x.y + 0.5 * x.x * x.y;
    let grad = |x: Point| [2.0 * x.x + 0.5 * x.y, -2.0 * x.y + 0.5 * x.x];
    let degrees = assign_degrees(&mesh, DegreeRule::Uniform(2)).unwrap();
    let (sys, sol) = solve_poisson(&mesh, &degrees, Stabilization::default(), |_| 0.0, u).unwrap();
    let rel = energy_error_pi(&sys, &mesh, &sol.values, grad).unwrap() / energy_seminorm(&mesh, 2, grad).unwrap();
    assert!(rel < 1e-9, "{rel}");
    assert!(skeleton_l2_error(&mesh, &sys.dof_map, &sol.values, u) < 1e-10);
}

#[test]
fn energy_error_is_translation_invariant() {
    let shift = Point::new(3.0, -2.0);
    let mesh = build_graded_mesh(MeshFamily::DecagonsCut, 2, 0.5).unwrap();
    let moved = mesh.translated(shift);
    let u = |x: Point| x.x.sin() * x.y.exp();
    let grad = |x: Point| [x.x.cos() * x.y.exp(), x.x.sin() * x.y.exp()];
    let degrees = assign_degrees(&mesh, DegreeRule::Layered(1.0)).unwrap();
    // f does not match u; only the error functional is under test
    let (s0, v0) = solve_poisson(&mesh, &degrees, Stabilization::default(), |_| 0.0, u).unwrap();
    let e0 = energy_error_pi(&s0, &mesh, &v0.values, grad).unwrap();
    let u1 = |x: Point| u(x - shift);
    let (s1, v1) = solve_poisson(&moved, &degrees, Stabilization::default(), |_| 0.0, u1).unwrap();
    let e1 = energy_error_pi(&s1, &moved, &v1.values, |x| grad(x - shift)).unwrap();
    assert!((e0 - e1).abs() < 1e-6 * e0, "{e0} vs {e1}");
}

#[test]
fn benchmark_seminorm_is_stable_under_refinement() {
    let coarse = energy_seminorm(&build_graded_mesh(MeshFamily::GradedSquares, 4, 0.5).unwrap(), 2, benchmark_grad).unwrap();
    let fine = energy_seminorm(&build_graded_mesh(MeshFamily::GradedSquares, 8, 0.5).unwrap(), 2, benchmark_grad).unwrap();
    assert!((coarse - fine).abs() < 1e-3 * fine);
    assert!(benchmark_u(Point::new(1.0, 1.0)) > 0.0);
}

#[test]
fn single_run_study_has_no_fit() {
    let s = convergence_study(&study(MeshFamily::GradedSquares, DegreePolicy::Rule(DegreeRule::Layered(1.0)), 1, 1)).unwrap();
    assert_eq!(s.records.len(), 1);
    assert!(s.energy_fit.is_none());
}

#[test]
fn benchmark_converges_exponentially_on_graded_squares() {
    let s = convergence_study(&study(MeshFamily::GradedSquares, DegreePolicy::Rule(DegreeRule::Layered(1.0)), 1, 8)).unwrap();
    for w in s.records.windows(2) {
        assert!(w[1].err_energy < w[0].err_energy);
        assert!(w[1].n_dofs > w[0].n_dofs);
    }
    let fit = s.energy_fit.unwrap();
    assert!(fit.slope < 0.0 && fit.r2 >= 0.98, "{fit:?}");
}

#[test]
fn uniform_degree_study_converges() {
    let s = convergence_study(&study(MeshFamily::GradedSquares, DegreePolicy::UniformNPlusOne, 1, 6)).unwrap();
    assert_eq!(s.records[3].rule, "uniform:n+1");
    let fit = s.energy_fit.unwrap();
    assert!(fit.slope < 0.0 && fit.r2 > 0.9, "{fit:?}");
}

#[test]
fn fem_study_requires_tensor_mesh() {
    let mut c = study(MeshFamily::GradedSquares, DegreePolicy::Rule(DegreeRule::Layered(1.0)), 1, 2);
    c.method = Method::Fem;
    assert!(convergence_study(&c).is_err());
    c.family = MeshFamily::TensorQuadsFem;
    let s = convergence_study(&c).unwrap();
    assert!(s.records.iter().all(|r| r.failure.is_none()));
}

#[test]
fn square_stability_rows() {
    let opts = StabilityOptions { stabilization: Stabilization::table(), level: 3, check_convergence: false, ..Default::default() };
    let r = stability_table(Shape::Square, &Shape::Square.polygon(), &[2, 5], &opts).unwrap();
    assert!((r[0].lambda_min / 0.78559 - 1.0).abs() < 0.05);
    assert!((r[1].lambda_min / 0.27547 - 1.0).abs() < 0.05);
    for x in &r {
        assert!((x.lambda_max - 1.0).abs() < 0.05);
    }
    assert!(decay_exponent(&r).unwrap() < 0.0);
}

#[test]
fn spectrum_is_scale_invariant() {
    let poly = Shape::Hexagon.polygon();
    let big: Vec<Point> = poly.iter().map(|p| p.scale(2.0)).collect();
    let run = |poly: Vec<Point>| {
        let g = CellGeometry::from_polygon(poly).unwrap();
        let space = FineSpace::new(&g.points, g.star_center, 3, 3).unwrap();
        spectrum(&g, 3, Stabilization::default(), &space).unwrap()
    };
    let (a, b) = (run(poly), run(big));
    assert!((a.0 / b.0 - 1.0).abs() < 0.01 && (a.1 / b.1 - 1.0).abs() < 0.01);
}

#[test]
fn degree_below_two_is_rejected() {
    assert!(stability_table(Shape::Square, &Shape::Square.polygon(), &[1], &StabilityOptions::default()).is_err());
}

fn monotone_from_3(r: &[hpvem::analysis::InverseLabRecord]) -> bool {
    r.windows(2).filter(|w| w[0].p >= 3).all(|w| w[1].constant >= w[0].constant)
}

#[test]
fn weighted_lab() {
    let r = inverse_lab_weighted(0.0, 1.0, &(0..=12).collect::<Vec<_>>()).unwrap();
    assert!((r[0].constant - 1.5).abs() < 1e-13);
    assert!((r[1].constant - 2.5).abs() < 1e-13);
    assert!(monotone_from_3(&r));
    assert!(r[0].fitted_exponent > 1.0 && r[0].fitted_exponent <= 2.3);
    let same = inverse_lab_weighted(1.0, 1.0, &[4]).unwrap();
    assert!((same[0].constant - 1.0).abs() < 1e-12);
    assert!(inverse_lab_weighted(2.0, 1.0, &[2]).is_err());
}

#[test]
fn gll_lab() {
    let r = inverse_lab_gll(&(1..=12).collect::<Vec<_>>(), 200, 3).unwrap();
    for x in &r {
        assert!(x.holds);
        assert!(x.constant > 0.3 && x.constant < 1.0);
        // L_p is the extremal case: ‖L_p‖² / Σ = p / (2p + 1)
        assert!((x.constant - x.p as f64 / (2 * x.p + 1) as f64).abs() < 1e-12);
    }
    assert_eq!(r, inverse_lab_gll(&(1..=12).collect::<Vec<_>>(), 200, 3).unwrap());
}

#[test]
fn triangle_lab() {
    let r = inverse_lab_triangle(&(0..=12).collect::<Vec<_>>()).unwrap();
    assert_eq!(r[0].constant, 0.0);
    // linear q = a + b x + c y: |q|₁² / ‖q‖₀² = 18 (b² + c²) / (b² + c² − bc), largest at b = c
    assert!((r[1].constant - 6.0).abs() < 1e-10);
    assert!(monotone_from_3(&r));
    assert!(r[0].fitted_exponent <= 2.05);
}

#[test]
fn bubble_and_negative_norm_labs() {
    let b = inverse_lab_bubble(&(0..=10).collect::<Vec<_>>()).unwrap();
    assert!(monotone_from_3(&b) && b[0].fitted_exponent <= 1.1);
    let h = inverse_lab_hminus1(&Shape::Square.polygon(), &(0..=6).collect::<Vec<_>>(), 3, 3).unwrap();
    assert!(monotone_from_3(&h) && h[0].fitted_exponent <= 2.1);
    assert!(h.iter().all(|x| x.constant > 0.0));
}
