//! Manufactured-solution convergence of the linear solver.

use dtn_probe::elliptic::{Conductivity, EllipticOperator, PotentialField, SolverSettings};
use dtn_probe::experiment::fit_slope;
use dtn_probe::geometry::{build_domain, BoundaryField, GeometryDescriptor};

#[test]
fn screened_problem_converges_at_second_order() {
    // -Δu + u = 0 with u = sin(πx) sin(πy) sinh(kz), k² = 2π² + 1.
    let pi = std::f64::consts::PI;
    let k = (2.0 * pi * pi + 1.0).sqrt();
    let exact = |x: &[f64; 3]| (pi * x[0]).sin() * (pi * x[1]).sin() * (k * x[2]).sinh() / k.sinh();
    let mut hs = Vec::new();
    let mut errs = Vec::new();
    for nodes in [17, 33, 65] {
        let d = build_domain(3, nodes, &GeometryDescriptor::default()).unwrap();
        let grid = d.grid();
        let op = EllipticOperator::for_domain(&d, &Conductivity::identity(0.5).unwrap(), SolverSettings { tol_lin: 1e-12, ..Default::default() });
        let f = BoundaryField::from_fn(grid, |x| exact(x));
        let (u, _) = op.solve_linear(&PotentialField::constant(grid, 1.0), &f, None).unwrap();
        let mut e2 = 0.0;
        for i in 0..grid.len() {
            e2 += grid.mass()[i] * (u.values[i] - exact(&grid.point(i))).powi(2);
        }
        hs.push(d.h());
        errs.push(e2.sqrt());
    }
    let order = fit_slope(&hs, &errs).unwrap().slope;
    assert!(order >= 1.8, "observed order {order}, errors {errs:?}");
}
