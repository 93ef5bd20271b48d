//! Randomized invariants on small grids.

use std::sync::Arc;

use dtn_probe::dtn::DtnEvaluator;
use dtn_probe::elliptic::{Coefficient, Conductivity, EllipticOperator, Field, PotentialField, SolverSettings};
use dtn_probe::experiment::RunConfig;
use dtn_probe::geometry::{build_domain, build_patches, BoundaryField, BoundaryPatches, DomainGrid, GeometryDescriptor};
use dtn_probe::nonlinearity::builtin;
use dtn_probe::oracles::{random_smooth_gamma0, random_smooth_potential};
use dtn_probe::trace::{op_norm, OpNormContext, TraceNorms};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn setup(nodes: usize) -> (DomainGrid, BoundaryPatches) {
    let d = build_domain(3, nodes, &GeometryDescriptor::default()).unwrap();
    let p = build_patches(&d, "z+".parse().unwrap(), 0.26, 0.4).unwrap();
    (d, p)
}

fn tight() -> SolverSettings {
    SolverSettings { tol_lin: 1e-13, tol_newton: 1e-14, ..Default::default() }
}

fn random_trace(d: &DomainGrid, rng: &mut ChaCha8Rng) -> BoundaryField {
    let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
    BoundaryField::from_fn(d.grid(), |x| c[0] + c[1] * (2.0 * x[0]).sin() + c[2] * x[1] * x[2] + c[3] * (x[2] - x[0]).cos())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn builtin_derivatives_match_difference_quotients(z in -2.0f64..2.0, which in 0usize..4) {
        let (name, params): (&str, &[f64]) = [("linear", &[0.7][..]), ("cubic", &[1.0, 0.3][..]), ("sine", &[1.0][..]), ("logistic", &[][..])][which];
        let a = builtin(name, params).unwrap();
        let eps = [1e-2, 5e-3, 2.5e-3, 1.25e-3];
        let errs: Vec<f64> = eps.iter().map(|e| ((a.eval(z + e) - a.eval(z)) / e - a.deriv(z)).abs()).collect();
        if errs.iter().all(|e| *e > 1e-11) {
            let slope = dtn_probe::experiment::fit_slope(&eps, &errs).unwrap().slope;
            prop_assert!((0.9..=2.1).contains(&slope), "{name} at {z}: slope {slope}");
        } else {
            prop_assert!(errs.iter().all(|e| *e < 1e-6));
        }
    }

    #[test]
    fn maximum_principle_for_nonnegative_potentials(seed in any::<u64>()) {
        let (d, _) = setup(9);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amp = rng.gen_range(0.0..3.0);
        let sigma = random_smooth_potential(d.grid(), &mut rng, amp);
        let f = random_trace(&d, &mut rng);
        let op = EllipticOperator::for_domain(&d, &Conductivity::identity(0.5).unwrap(), tight());
        let (u, _) = op.solve_linear(&sigma, &f, None).unwrap();
        let lo = f.values.iter().copied().fold(0.0f64, f64::min);
        let hi = f.values.iter().copied().fold(0.0f64, f64::max);
        for &i in d.grid().unknowns() {
            prop_assert!(u.values[i] >= lo - 1e-10 && u.values[i] <= hi + 1e-10);
        }
    }

    #[test]
    fn flux_does_not_depend_on_the_extension(seed in any::<u64>()) {
        let (d, _) = setup(9);
        let grid = d.grid();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Conductivity::from_rows([[1.0, 0.2, 0.0], [0.2, 1.0, 0.1], [0.0, 0.1, 1.0]], 0.5).unwrap();
        let op = EllipticOperator::for_domain(&d, &a, SolverSettings { tol_lin: 1e-15, ..Default::default() });
        let sigma = random_smooth_potential(grid, &mut rng, 1.0);
        let (u, _) = op.solve_linear(&sigma, &random_trace(&d, &mut rng), None).unwrap();
        let phi = random_trace(&d, &mut rng);
        let extend = |rng: &mut ChaCha8Rng| {
            let mut v = vec![0.0; grid.len()];
            for (p, &b) in grid.boundary().iter().enumerate() {
                v[b] = phi.values[p];
            }
            for &i in grid.unknowns() {
                v[i] = rng.gen_range(-2.0..2.0);
            }
            Field::from_values(grid, v).unwrap()
        };
        let e1 = op.energy_pairing(&u, &extend(&mut rng), Coefficient::Potential(&sigma)).unwrap();
        let e2 = op.energy_pairing(&u, &extend(&mut rng), Coefficient::Potential(&sigma)).unwrap();
        prop_assert!((e1 - e2).abs() <= 1e-12 * e1.abs().max(e2.abs()).max(1e-3), "{e1} vs {e2}");
    }

    #[test]
    fn integral_identity_on_random_potentials(seed in any::<u64>()) {
        let (d, p) = setup(9);
        let grid = d.grid();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let op = Arc::new(EllipticOperator::for_domain(&d, &Conductivity::identity(0.5).unwrap(), tight()));
        let s1 = random_smooth_potential(grid, &mut rng, 1.0);
        let s2 = random_smooth_potential(grid, &mut rng, 1.0);
        let f = random_smooth_gamma0(&d, &p, &mut rng).unwrap();
        let g = random_smooth_gamma0(&d, &p, &mut rng).unwrap();
        let e1 = DtnEvaluator::linear(op.clone(), s1.clone(), &p).unwrap();
        let e2 = DtnEvaluator::linear(op.clone(), s2.clone(), &p).unwrap();
        let rhs = e1.localized(&f).unwrap().sub(&e2.localized(&f).unwrap()).pair(&g);
        let u1 = e1.solution(&f).unwrap();
        let u2 = e2.solution(&g).unwrap();
        let lhs: f64 = (0..grid.len()).map(|i| grid.mass()[i] * (s1.values[i] - s2.values[i]) * u1.values[i] * u2.values[i]).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(rhs.abs()), "{lhs} vs {rhs}");
    }

    #[test]
    fn localized_and_full_maps_agree_on_the_inner_patch(seed in any::<u64>()) {
        let (d, p) = setup(9);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let op = Arc::new(EllipticOperator::for_domain(&d, &Conductivity::identity(0.5).unwrap(), tight()));
        let e = DtnEvaluator::semilinear(op, builtin("cubic", &[1.0, 0.0]).unwrap(), &p).unwrap();
        let f = random_smooth_gamma0(&d, &p, &mut rng).unwrap();
        let g = random_smooth_gamma0(&d, &p, &mut rng).unwrap();
        let a = e.apply(&f).unwrap().pair(&g);
        let b = e.localized(&f).unwrap().pair(&g);
        prop_assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
    }

    #[test]
    fn gram_pairing_is_the_squared_trace_norm(seed in any::<u64>()) {
        let (d, _) = setup(9);
        let norms = TraceNorms::new(&d, tight()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_trace(&d, &mut rng);
        let mf = norms.apply_gram(&f).unwrap();
        let n = norms.h_half_norm(&f).unwrap();
        prop_assert!((f.dot(&mf) - n * n).abs() <= 1e-12 * (n * n).max(1e-300));
    }

    #[test]
    fn config_round_trips(seed in any::<u64>(), nodes in 9usize..80, r0 in 0.1f64..0.4, count in 3usize..7) {
        let mut c = RunConfig::default();
        c.seed = seed;
        c.geometry.nodes = nodes;
        c.geometry.r0 = r0;
        c.geometry.r1 = r0 + 0.07;
        c.probes.count = count;
        let text = c.to_toml_string().unwrap();
        prop_assert_eq!(RunConfig::from_toml_str(&text).unwrap(), c);
    }
}

#[test]
fn op_norm_of_equal_potentials_vanishes_and_permutation_leaves_it_unchanged() {
    let (d, p) = setup(9);
    let op = Arc::new(EllipticOperator::for_domain(&d, &Conductivity::identity(0.5).unwrap(), tight()));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s1 = random_smooth_potential(d.grid(), &mut rng, 1.0);
    let s2 = PotentialField::constant(d.grid(), 0.3);
    let e = DtnEvaluator::linear(op, s1.clone(), &p).unwrap();
    let norms = TraceNorms::new(&d, tight()).unwrap();
    let ctx = OpNormContext::new(&norms, &p.gamma0, &p.gamma1).unwrap();
    let m1 = e.matrix_for(&s1, &p.gamma0, &p.gamma1).unwrap();
    let zero = op_norm(&ctx, &m1.sub(&m1).unwrap(), 1e-10).unwrap();
    assert_eq!(zero.value, 0.0);
    let t = m1.sub(&e.matrix_for(&s2, &p.gamma0, &p.gamma1).unwrap()).unwrap();
    let base = op_norm(&ctx, &t, 1e-12).unwrap().value;
    let perm: Vec<usize> = (0..p.gamma0.len()).rev().collect();
    let row_perm: Vec<usize> = (0..p.gamma1.len()).map(|k| (k * 7 + 3) % p.gamma1.len()).collect();
    let mut seen = row_perm.clone();
    seen.sort_unstable();
    seen.dedup();
    let row_perm = if seen.len() == p.gamma1.len() { row_perm } else { (0..p.gamma1.len()).rev().collect() };
    let permuted = op_norm(&ctx.permuted(&perm, &row_perm).unwrap(), &t.permuted(&perm, &row_perm), 1e-12).unwrap().value;
    assert!((base - permuted).abs() <= 1e-10 * base, "{base} vs {permuted}");
}

#[test]
fn semilinear_lipschitz_ratio_is_stable() {
    let (d, p) = setup(9);
    let op = EllipticOperator::for_domain(&d, &Conductivity::identity(0.5).unwrap(), tight());
    let norms = TraceNorms::new(&d, tight()).unwrap();
    let a = builtin("cubic", &[1.0, 0.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut ratios = Vec::new();
    for _ in 0..10 {
        let f = random_smooth_gamma0(&d, &p, &mut rng).unwrap();
        let g = random_smooth_gamma0(&d, &p, &mut rng).unwrap();
        let (uf, _) = op.solve_semilinear(&a, &f, None).unwrap();
        let (ug, _) = op.solve_semilinear(&a, &g, None).unwrap();
        let diff = Field::from_values(d.grid(), uf.values.iter().zip(&ug.values).map(|(x, y)| x - y).collect()).unwrap();
        let data = f.axpy(-1.0, &g);
        ratios.push(norms.h1_norm(&diff).unwrap() / norms.h_half_norm(&data).unwrap());
    }
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(hi.is_finite() && lo > 0.0);
    assert!(hi / lo < 3.0, "{ratios:?}");
}
