//! Frozen oracle outputs. Each fixture stores the parameters that generate
//! its inputs, a digest of those inputs and the oracle's reference values;
//! checking a fixture rebuilds the inputs, recomputes them on the fast path
//! and compares.

use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    dense_lambda1, dense_op_norm, dense_trace_gram, digest, exact_monomial_integral, frechet_oracle, identity_oracle,
    random_smooth_gamma0, random_smooth_potential, relative_max_error, DenseOracle, OracleResult, RNG_ALGORITHM,
};
use crate::dtn::{frechet_remainders, DtnEvaluator};
use crate::elliptic::{estimate_lambda1, Coefficient, Conductivity, EllipticOperator, PotentialField, SolverSettings};
use crate::error::{Error, Result};
use crate::geometry::{build_domain, build_patches, BoundaryField, BoundaryPatches, DomainGrid, GeometryDescriptor};
use crate::nonlinearity::NonlinearitySpec;
use crate::trace::{op_norm, BoundaryOperatorMatrix, OpNormContext, TraceNorms};

/// Parameters from which a fixture's inputs are regenerated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "oracle", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FixtureSpec {
    DenseLinear { nodes: usize, seed: u64, conductivity: [[f64; 3]; 3] },
    DenseSemilinear { nodes: usize, seed: u64, nonlinearity: NonlinearitySpec, amplitude: f64 },
    Identity { nodes: usize, seed: u64, pairs: usize, r0: f64, r1: f64 },
    Frechet { nodes: usize, seed: u64, r0: f64, r1: f64, nonlinearity: NonlinearitySpec, t: f64, epsilons: Vec<f64> },
    OpNorm { nodes: usize, seed: u64, r0: f64, r1: f64 },
    Lambda1 { nodes: usize },
    Quadrature { nodes: usize, monomials: Vec<[u32; 3]> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub name: String,
    pub spec: FixtureSpec,
    pub rng: String,
    pub inputs_digest: String,
    pub reference: Vec<f64>,
    /// Relative max-norm tolerance of the fast path against `reference`.
    pub tolerance: f64,
}

const KAPPA: f64 = 0.5;

fn domain(nodes: usize) -> Result<DomainGrid> {
    build_domain(3, nodes, &GeometryDescriptor::default())
}

fn patches(d: &DomainGrid, r0: f64, r1: f64) -> Result<BoundaryPatches> {
    build_patches(d, "z+".parse()?, r0, r1)
}

fn tight() -> SolverSettings {
    SolverSettings { tol_lin: 1e-14, tol_newton: 1e-16, ..Default::default() }
}

/// Smooth trace on the whole boundary from a few random low modes.
fn random_trace(d: &DomainGrid, rng: &mut ChaCha8Rng, amplitude: f64) -> BoundaryField {
    let c: Vec<f64> = (0..7).map(|_| rng.gen_range(-1.0..1.0)).collect();
    BoundaryField::from_fn(d.grid(), |x| {
        amplitude
            * (c[0]
                + c[1] * x[0]
                + c[2] * x[1]
                + c[3] * x[2]
                + c[4] * (3.0 * x[0]).sin()
                + c[5] * (2.0 * x[1] + x[2]).cos()
                + c[6] * x[0] * x[1] * x[2])
    })
}

fn bump_anchor(d: &DomainGrid, p: &BoundaryPatches) -> Result<BoundaryField> {
    p.anchor_bump(d, 0.05, p.r0)
}

fn operator_matrix(m: nalgebra::DMatrix<f64>, p: &BoundaryPatches) -> BoundaryOperatorMatrix {
    BoundaryOperatorMatrix { matrix: m, domain_basis: p.gamma0.clone(), codomain_basis: p.gamma1.clone() }
}

/// Which side of the comparison to compute.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Oracle,
    Fast,
}

impl FixtureSpec {
    fn evaluate(&self, side: Side) -> Result<(u64, Vec<f64>)> {
        match self {
            FixtureSpec::DenseLinear { nodes, seed, conductivity } => {
                let d = domain(*nodes)?;
                let a = Conductivity::from_rows(*conductivity, KAPPA)?;
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let sigma = random_smooth_potential(d.grid(), &mut rng, 1.0);
                let f = random_trace(&d, &mut rng, 1.0);
                let dig = digest(&[sigma.values.clone(), f.values.clone()].concat());
                let u = match side {
                    Side::Oracle => DenseOracle::new(d.grid(), &a)?.solve_linear(&sigma, &f)?,
                    Side::Fast => EllipticOperator::for_domain(&d, &a, tight()).solve_linear(&sigma, &f, None)?.0,
                };
                Ok((dig, u.values))
            }
            FixtureSpec::DenseSemilinear { nodes, seed, nonlinearity, amplitude } => {
                let d = domain(*nodes)?;
                let a = Conductivity::identity(KAPPA)?;
                let nl = nonlinearity.build()?;
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let f = random_trace(&d, &mut rng, *amplitude);
                let dig = digest(&f.values);
                let u = match side {
                    Side::Oracle => DenseOracle::new(d.grid(), &a)?.solve_semilinear(&nl, &f)?,
                    Side::Fast => EllipticOperator::for_domain(&d, &a, tight()).solve_semilinear(&nl, &f, None)?.0,
                };
                Ok((dig, u.values))
            }
            FixtureSpec::Identity { nodes, seed, pairs, r0, r1 } => {
                let d = domain(*nodes)?;
                let p = patches(&d, *r0, *r1)?;
                let a = Conductivity::identity(KAPPA)?;
                let grid = d.grid();
                let op = EllipticOperator::for_domain(&d, &a, tight());
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut inputs = Vec::new();
                let mut out = Vec::new();
                for _ in 0..*pairs {
                    let s1 = random_smooth_potential(grid, &mut rng, 1.0);
                    let s2 = random_smooth_potential(grid, &mut rng, 1.0);
                    let f = random_smooth_gamma0(&d, &p, &mut rng)?;
                    let g = random_smooth_gamma0(&d, &p, &mut rng)?;
                    for v in [&s1.values, &s2.values, &f.values, &g.values] {
                        inputs.extend_from_slice(v);
                    }
                    let (lhs, rhs) = match side {
                        Side::Oracle => identity_oracle(grid, &a, &p, &s1, &s2, &f, &g)?,
                        Side::Fast => {
                            let (u1f, _) = op.solve_linear(&s1, &f, None)?;
                            let (u2g, _) = op.solve_linear(&s2, &g, None)?;
                            let (u2f, _) = op.solve_linear(&s2, &f, None)?;
                            let mass = grid.mass();
                            let lhs = (0..grid.len())
                                .map(|i| mass[i] * (s1.values[i] - s2.values[i]) * u1f.values[i] * u2g.values[i])
                                .sum();
                            let p1 = op.boundary_functional(&u1f, Coefficient::Potential(&s1))?;
                            let p2 = op.boundary_functional(&u2f, Coefficient::Potential(&s2))?;
                            let rhs = (0..p1.len()).map(|k| p.chi.values[k] * (p1[k] - p2[k]) * g.values[k]).sum();
                            (lhs, rhs)
                        }
                    };
                    out.push(lhs);
                    out.push(rhs);
                }
                Ok((digest(&inputs), out))
            }
            FixtureSpec::Frechet { nodes, seed, r0, r1, nonlinearity, t, epsilons } => {
                let d = domain(*nodes)?;
                let p = patches(&d, *r0, *r1)?;
                let a = Conductivity::identity(KAPPA)?;
                let nl = nonlinearity.build()?;
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let h = bump_anchor(&d, &p)?;
                let g = random_smooth_gamma0(&d, &p, &mut rng)?;
                let dig = digest(&[h.values.clone(), g.values.clone()].concat());
                let errors = match side {
                    Side::Oracle => frechet_oracle(&d, &a, &p, &nl, &h, *t, &g, epsilons)?.errors,
                    Side::Fast => {
                        let op = EllipticOperator::for_domain(&d, &a, tight());
                        let norms = TraceNorms::new(&d, tight())?;
                        frechet_remainders(&op, &norms, &p, &nl, &h, *t, &g, epsilons)?
                    }
                };
                Ok((dig, errors))
            }
            FixtureSpec::OpNorm { nodes, seed, r0, r1 } => {
                let d = domain(*nodes)?;
                let p = patches(&d, *r0, *r1)?;
                let a = Conductivity::identity(KAPPA)?;
                let grid = d.grid();
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let s1 = random_smooth_potential(grid, &mut rng, 1.0);
                let s2 = PotentialField::constant(grid, 0.5);
                let dig = digest(&s1.values);
                let value = match side {
                    Side::Oracle => {
                        let o = DenseOracle::new(grid, &a)?;
                        let t = o.dtn_matrix(&s1, &p.chi, &p.gamma0, &p.gamma1)? - o.dtn_matrix(&s2, &p.chi, &p.gamma0, &p.gamma1)?;
                        let gram = dense_trace_gram(&d)?;
                        let inv = gram.clone().try_inverse().ok_or_else(|| Error::InvalidInput("trace Gram is singular".into()))?;
                        let m0 = gram.select_rows(&p.gamma0).select_columns(&p.gamma0);
                        let w = inv.select_rows(&p.gamma1).select_columns(&p.gamma1);
                        dense_op_norm(&operator_matrix(t, &p), &m0, &w)
                    }
                    Side::Fast => {
                        let op = Arc::new(EllipticOperator::for_domain(&d, &a, tight()));
                        let e = DtnEvaluator::linear(op, s1.clone(), &p)?;
                        let t = e.matrix_for(&s1, &p.gamma0, &p.gamma1)?.sub(&e.matrix_for(&s2, &p.gamma0, &p.gamma1)?)?;
                        let norms = TraceNorms::new(&d, tight())?;
                        let ctx = OpNormContext::new(&norms, &p.gamma0, &p.gamma1)?;
                        op_norm(&ctx, &t, 1e-12)?.value
                    }
                };
                Ok((dig, vec![value]))
            }
            FixtureSpec::Lambda1 { nodes } => {
                let d = domain(*nodes)?;
                let v = match side {
                    Side::Oracle => dense_lambda1(&d)?,
                    Side::Fast => estimate_lambda1(&d, 1e-14)?.value,
                };
                Ok((digest(&[*nodes as f64]), vec![v]))
            }
            FixtureSpec::Quadrature { nodes, monomials } => {
                let d = domain(*nodes)?;
                let grid = d.grid();
                let exps: Vec<f64> = monomials.iter().flatten().map(|&e| e as f64).collect();
                let values = monomials
                    .iter()
                    .map(|e| match side {
                        Side::Oracle => exact_monomial_integral(*e, d.side()),
                        Side::Fast => (0..grid.len())
                            .map(|i| {
                                let x = grid.point(i);
                                grid.mass()[i] * (0..3).map(|k| x[k].powi(e[k] as i32)).product::<f64>()
                            })
                            .sum(),
                    })
                    .collect();
                Ok((digest(&exps), values))
            }
        }
    }
}

impl Fixture {
    /// Runs the oracle and freezes its output.
    pub fn generate(name: &str, spec: FixtureSpec, tolerance: f64) -> Result<Self> {
        let (dig, reference) = spec.evaluate(Side::Oracle)?;
        Ok(Fixture {
            name: name.into(),
            spec,
            rng: RNG_ALGORITHM.into(),
            inputs_digest: format!("{dig:016x}"),
            reference,
            tolerance,
        })
    }

    /// Rebuilds the inputs, checks their digest and compares the fast path.
    pub fn check(&self) -> Result<OracleResult> {
        let (dig, observed) = self.spec.evaluate(Side::Fast)?;
        let got = format!("{dig:016x}");
        if got != self.inputs_digest {
            return Err(Error::InvalidInput(format!(
                "fixture {}: regenerated inputs digest {got} differs from the frozen {}",
                self.name, self.inputs_digest
            )));
        }
        Ok(OracleResult::compare(&self.name, dig, self.reference.clone(), &observed, self.tolerance))
    }

    /// Relative error of the fast path, for reporting.
    pub fn observed_error(&self) -> Result<f64> {
        let (_, observed) = self.spec.evaluate(Side::Fast)?;
        Ok(relative_max_error(&self.reference, &observed))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

/// The fixture set frozen under `tests/fixtures`.
pub fn standard_fixtures() -> Vec<(String, FixtureSpec, f64)> {
    let nl = |n: &str, p: &[f64]| NonlinearitySpec::new(n, p);
    let eps = vec![1e-2, 1e-3, 1e-4, 1e-5];
    let mut out = vec![
        (
            "dense_linear_anisotropic".to_string(),
            FixtureSpec::DenseLinear { nodes: 9, seed: 11, conductivity: [[1.0, 0.3, 0.0], [0.3, 1.0, 0.2], [0.0, 0.2, 1.0]] },
            1e-9,
        ),
        (
            "dense_cubic".to_string(),
            FixtureSpec::DenseSemilinear { nodes: 9, seed: 12, nonlinearity: nl("cubic", &[1.0, 0.0]), amplitude: 2.0 },
            1e-8,
        ),
        ("identity".to_string(), FixtureSpec::Identity { nodes: 9, seed: 13, pairs: 3, r0: 0.26, r1: 0.4 }, 1e-10),
        ("op_norm".to_string(), FixtureSpec::OpNorm { nodes: 9, seed: 14, r0: 0.26, r1: 0.4 }, 1e-6),
        ("lambda1".to_string(), FixtureSpec::Lambda1 { nodes: 9 }, 1e-8),
    ];
    for (name, spec) in [("cubic", nl("cubic", &[1.0, 0.0])), ("sine", nl("sine", &[1.0]))] {
        out.push((
            format!("frechet_{name}"),
            FixtureSpec::Frechet { nodes: 9, seed: 15, r0: 0.26, r1: 0.4, nonlinearity: spec, t: 0.5, epsilons: eps.clone() },
            1e-4,
        ));
    }
    let mut monomials = Vec::new();
    for e0 in 0..2 {
        for e1 in 0..2 {
            for e2 in 0..2 {
                monomials.push([e0, e1, e2]);
            }
        }
    }
    out.push(("quadrature_multilinear".to_string(), FixtureSpec::Quadrature { nodes: 9, monomials }, 1e-14));
    out
}
