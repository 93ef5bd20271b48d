//! Brute-force reference computations: dense factorizations instead of the
//! iterative solvers, dense Schur complements and SVDs, and the two-solve
//! finite-difference check of the linearized DtN map.
//!
//! Everything here is single-threaded and meant for grids of at most 12³ nodes.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::elliptic::{assemble_stiffness, Coefficient, Conductivity, EllipticOperator, Field, PotentialField};
use crate::error::{Error, Result};
use crate::geometry::{BoundaryField, BoundaryPatches, DomainGrid, Fnv1a, MaskedGrid};
use crate::nonlinearity::Nonlinearity;
use crate::trace::BoundaryOperatorMatrix;

pub mod fixtures;

/// Largest number of unknowns the dense oracles accept.
pub const ORACLE_MAX_UNKNOWNS: usize = 1728;

/// Identifier of the PRNG used for every random input.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.3), seeded with seed_from_u64";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub oracle: String,
    pub inputs_digest: String,
    pub reference: Vec<f64>,
    pub tolerance: f64,
    pub passed: bool,
}

impl OracleResult {
    /// Compares `observed` to the reference with a relative max-norm tolerance.
    pub fn compare(oracle: &str, digest: u64, reference: Vec<f64>, observed: &[f64], tolerance: f64) -> Self {
        let passed = relative_max_error(&reference, observed) <= tolerance;
        OracleResult { oracle: oracle.into(), inputs_digest: format!("{digest:016x}"), reference, tolerance, passed }
    }
}

/// `max |a - b| / max |a|` (absolute when `a` vanishes).
pub fn relative_max_error(reference: &[f64], observed: &[f64]) -> f64 {
    if reference.len() != observed.len() {
        return f64::INFINITY;
    }
    let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = reference.iter().zip(observed).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

pub fn digest(values: &[f64]) -> u64 {
    let mut h = Fnv1a::default();
    for v in values {
        h.write_f64(*v);
    }
    h.finish()
}

fn guard(grid: &MaskedGrid) -> Result<()> {
    let n = grid.unknowns().len();
    if n > ORACLE_MAX_UNKNOWNS {
        return Err(Error::SizeGuard(format!("{n} unknowns exceed the dense oracle limit {ORACLE_MAX_UNKNOWNS}")));
    }
    Ok(())
}

/// Dense `K` over all nodes of the grid.
fn dense_stiffness(grid: &MaskedGrid, a: &Conductivity) -> DMatrix<f64> {
    let k = assemble_stiffness(grid, a);
    let mut m = DMatrix::zeros(grid.len(), grid.len());
    for i in 0..k.nrows {
        for (j, v) in k.row(i) {
            m[(i, j)] = v;
        }
    }
    m
}

/// Dense direct solver for linear and semilinear Dirichlet problems.
pub struct DenseOracle {
    grid: MaskedGrid,
    k: DMatrix<f64>,
}

impl DenseOracle {
    pub fn new(grid: &MaskedGrid, a: &Conductivity) -> Result<Self> {
        guard(grid)?;
        Ok(DenseOracle { grid: grid.clone(), k: dense_stiffness(grid, a) })
    }

    fn blocks(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let u = self.grid.unknowns();
        let b = self.grid.boundary();
        let kuu = DMatrix::from_fn(u.len(), u.len(), |i, j| self.k[(u[i], u[j])]);
        let kub = DMatrix::from_fn(u.len(), b.len(), |i, j| self.k[(u[i], b[j])]);
        (kuu, kub)
    }

    fn assemble(&self, interior: &DVector<f64>, f: &BoundaryField) -> Field {
        let mut values = vec![0.0; self.grid.len()];
        for (p, &b) in self.grid.boundary().iter().enumerate() {
            values[b] = f.values[p];
        }
        for (l, &i) in self.grid.unknowns().iter().enumerate() {
            values[i] = interior[l];
        }
        Field::from_values(&self.grid, values).expect("sizes match")
    }

    /// LU solve of the linear problem with potential σ.
    pub fn solve_linear(&self, sigma: &PotentialField, f: &BoundaryField) -> Result<Field> {
        f.check_grid(&self.grid)?;
        let (mut kuu, kub) = self.blocks();
        let mass = self.grid.mass();
        for (l, &i) in self.grid.unknowns().iter().enumerate() {
            kuu[(l, l)] += mass[i] * sigma.values[i];
        }
        let rhs = -(kub * DVector::from_column_slice(&f.values));
        let x = kuu
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::InvalidInput("dense system is singular".into()))?;
        Ok(self.assemble(&x, f))
    }

    /// Plain Newton with LU steps and step halving, continued in the data
    /// amplitude when started far from the solution.
    pub fn solve_semilinear(&self, a: &Nonlinearity, f: &BoundaryField) -> Result<Field> {
        f.check_grid(&self.grid)?;
        let (kuu, kub) = self.blocks();
        let fb = DVector::from_column_slice(&f.values);
        let mass: Vec<f64> = self.grid.unknowns().iter().map(|&i| self.grid.mass()[i]).collect();
        let n = mass.len();
        let residual = |x: &DVector<f64>, s: f64| -> DVector<f64> {
            let mut r = &kuu * x + &kub * &fb * s;
            for l in 0..n {
                r[l] += mass[l] * a.eval(x[l]);
            }
            r
        };
        let mut x = DVector::zeros(n);
        let steps = 8;
        for k in 1..=steps {
            let s = k as f64 / steps as f64;
            let mut r = residual(&x, s);
            let scale = (&kub * &fb * s).norm().max(1e-300);
            let mut converged = false;
            for _ in 0..100 {
                if r.norm() <= 1e-14 * scale {
                    converged = true;
                    break;
                }
                let mut j = kuu.clone();
                for l in 0..n {
                    j[(l, l)] += mass[l] * a.deriv(x[l]);
                }
                let step = j.lu().solve(&(-&r)).ok_or_else(|| Error::Newton("singular dense Jacobian".into()))?;
                let mut alpha = 1.0;
                loop {
                    let trial = &x + &step * alpha;
                    let tr = residual(&trial, s);
                    if tr.norm() < r.norm() || alpha < 1e-6 {
                        if tr.norm() >= r.norm() {
                            // stalled at round-off
                            converged = r.norm() <= 1e-11 * scale;
                            break;
                        }
                        x = trial;
                        r = tr;
                        break;
                    }
                    alpha *= 0.5;
                }
                if converged {
                    break;
                }
            }
            if !converged && r.norm() > 1e-11 * scale {
                return Err(Error::Newton(format!("dense Newton stalled at residual {:.3e}", r.norm())));
            }
        }
        Ok(self.assemble(&x, f))
    }
}

impl DenseOracle {
    /// Localized DtN matrix `χ_q Λ_σ[q, p]` from the dense Schur complement
    /// `K_bb + M_b σ - K_bu (K_uu + M_u σ)^{-1} K_ub`.
    pub fn dtn_matrix(
        &self,
        sigma: &PotentialField,
        chi: &BoundaryField,
        domain_basis: &[usize],
        codomain_basis: &[usize],
    ) -> Result<DMatrix<f64>> {
        let (mut kuu, kub) = self.blocks();
        let mass = self.grid.mass();
        for (l, &i) in self.grid.unknowns().iter().enumerate() {
            kuu[(l, l)] += mass[i] * sigma.values[i];
        }
        let b = self.grid.boundary();
        let x = kuu.lu().solve(&kub).ok_or_else(|| Error::InvalidInput("dense system is singular".into()))?;
        let schur = kub.transpose() * x;
        Ok(DMatrix::from_fn(codomain_basis.len(), domain_basis.len(), |r, c| {
            let (q, p) = (codomain_basis[r], domain_basis[c]);
            let mut v = self.k[(b[q], b[p])] - schur[(q, p)];
            if q == p {
                v += mass[b[q]] * sigma.values[b[q]];
            }
            chi.values[q] * v
        }))
    }
}

/// Smallest eigenvalue of `K_uu x = λ M_u x` by a dense symmetric eigensolve.
pub fn dense_lambda1(domain: &DomainGrid) -> Result<f64> {
    let grid = domain.grid();
    guard(grid)?;
    let k = dense_stiffness(grid, &Conductivity::identity(0.5)?);
    let u = grid.unknowns();
    let s: Vec<f64> = u.iter().map(|&i| 1.0 / grid.mass()[i].sqrt()).collect();
    let m = DMatrix::from_fn(u.len(), u.len(), |i, j| s[i] * k[(u[i], u[j])] * s[j]);
    Ok(SymmetricEigen::new(m).eigenvalues.min())
}

/// Exact `∫ x^e₀ y^e₁ z^e₂` over the cube `[0, side]³`.
pub fn exact_monomial_integral(exponents: [u32; 3], side: f64) -> f64 {
    exponents.iter().map(|&e| side.powi(e as i32 + 1) / (e as f64 + 1.0)).product()
}

/// Dense Schur complement of the screened operator `-Δ + 1` onto the boundary.
pub fn dense_trace_gram(domain: &DomainGrid) -> Result<DMatrix<f64>> {
    let grid = domain.grid();
    guard(grid)?;
    let mut k = dense_stiffness(grid, &Conductivity::identity(0.5)?);
    for i in 0..grid.len() {
        k[(i, i)] += grid.mass()[i];
    }
    let u = grid.unknowns();
    let b = grid.boundary();
    let kuu = DMatrix::from_fn(u.len(), u.len(), |i, j| k[(u[i], u[j])]);
    let kub = DMatrix::from_fn(u.len(), b.len(), |i, j| k[(u[i], b[j])]);
    let kbb = DMatrix::from_fn(b.len(), b.len(), |i, j| k[(b[i], b[j])]);
    let x = kuu.lu().solve(&kub).ok_or_else(|| Error::InvalidInput("singular interior block".into()))?;
    let m = kbb - kub.transpose() * x;
    Ok((&m + m.transpose()) * 0.5)
}

fn inverse_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let e = SymmetricEigen::new(m.clone());
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(|v| 1.0 / v.sqrt()));
    &e.eigenvectors * d * e.eigenvectors.transpose()
}

/// Spectral norm of `W^{1/2} T M₀^{-1/2}` from symmetric eigen-decompositions.
pub fn dense_op_norm(t: &BoundaryOperatorMatrix, domain_gram: &DMatrix<f64>, codomain_inverse_gram: &DMatrix<f64>) -> f64 {
    let e = SymmetricEigen::new(codomain_inverse_gram.clone());
    let w_half = &e.eigenvectors
        * DMatrix::from_diagonal(&e.eigenvalues.map(|v| v.max(0.0).sqrt()))
        * e.eigenvectors.transpose();
    let z = w_half * &t.matrix * inverse_sqrt(domain_gram);
    z.svd(false, false).singular_values.max()
}

/// Both sides of `∫ σ u_{σ₁}(f) u_{σ₂}(g) = ⟨(Λ̃_{σ₁} - Λ̃_{σ₂}) f, g⟩` by dense solves.
pub fn identity_oracle(
    grid: &MaskedGrid,
    a: &Conductivity,
    patches: &BoundaryPatches,
    sigma1: &PotentialField,
    sigma2: &PotentialField,
    f: &BoundaryField,
    g: &BoundaryField,
) -> Result<(f64, f64)> {
    if !patches.supported_in_gamma0(f) || !patches.supported_in_gamma0(g) {
        return Err(Error::InvalidInput("identity oracle needs traces supported in Γ₀".into()));
    }
    let oracle = DenseOracle::new(grid, a)?;
    let op = EllipticOperator::new(grid, a, Default::default());
    let u1f = oracle.solve_linear(sigma1, f)?;
    let u2g = oracle.solve_linear(sigma2, g)?;
    let u2f = oracle.solve_linear(sigma2, f)?;
    let mass = grid.mass();
    let mut lhs = 0.0;
    for i in 0..grid.len() {
        lhs += mass[i] * (sigma1.values[i] - sigma2.values[i]) * u1f.values[i] * u2g.values[i];
    }
    let p1 = op.boundary_functional(&u1f, Coefficient::Potential(sigma1))?;
    let p2 = op.boundary_functional(&u2f, Coefficient::Potential(sigma2))?;
    let rhs: f64 = (0..p1.len()).map(|p| patches.chi.values[p] * (p1[p] - p2[p]) * g.values[p]).sum();
    Ok((lhs, rhs))
}

/// Error of the difference quotient against the linearization, per ε.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrechetTable {
    pub epsilons: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: Option<f64>,
}

/// `‖[Λ̃(𝔣_t + εg) - Λ̃(𝔣_t)]/ε - dΛ̃^t(0)g‖_{-1/2}` for each ε, with the dense
/// Gram for the dual norm and dense solves throughout.
pub fn frechet_oracle(
    domain: &DomainGrid,
    a_mat: &Conductivity,
    patches: &BoundaryPatches,
    a: &Nonlinearity,
    anchor: &BoundaryField,
    t: f64,
    g: &BoundaryField,
    epsilons: &[f64],
) -> Result<FrechetTable> {
    if epsilons.len() < 4 {
        return Err(Error::InvalidInput("need at least four ε values".into()));
    }
    let grid = domain.grid();
    let oracle = DenseOracle::new(grid, a_mat)?;
    let op = EllipticOperator::new(grid, a_mat, Default::default());
    let gram = dense_trace_gram(domain)?;
    let chol = gram.cholesky().ok_or_else(|| Error::InvalidInput("trace Gram not SPD".into()))?;
    let chi = &patches.chi.values;
    let local = |u: &Field, c: Coefficient<'_>| -> Result<DVector<f64>> {
        let psi = op.boundary_functional(u, c)?;
        Ok(DVector::from_iterator(psi.len(), psi.iter().zip(chi).map(|(p, c)| p * c)))
    };
    let ft = anchor.scaled(t);
    let u0 = oracle.solve_semilinear(a, &ft)?;
    let base = local(&u0, Coefficient::Nonlinear(a))?;
    let sigma_vals: Vec<f64> = u0.values.iter().map(|&z| a.deriv(z)).collect();
    let lower = sigma_vals.iter().fold(0.0f64, |m, v| m.max(-v));
    let sigma = PotentialField::from_values(grid, sigma_vals, lower)?;
    let w = oracle.solve_linear(&sigma, g)?;
    let lin = local(&w, Coefficient::Potential(&sigma))?;
    let mut errors = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let ue = oracle.solve_semilinear(a, &ft.axpy(eps, g))?;
        let q = (local(&ue, Coefficient::Nonlinear(a))? - &base) / eps - &lin;
        errors.push(q.dot(&chol.solve(&q)).max(0.0).sqrt());
    }
    let positive = errors.iter().all(|e| *e > 0.0);
    let slope = if positive { Some(crate::experiment::fit_slope(epsilons, &errors)?.slope) } else { None };
    Ok(FrechetTable { epsilons: epsilons.to_vec(), errors, slope })
}

/// Random potential `σ ≥ 0` that is smooth across the grid: a few random
/// low-frequency modes plus an offset.
pub fn random_smooth_potential(grid: &MaskedGrid, rng: &mut impl Rng, amplitude: f64) -> PotentialField {
    let modes: Vec<([f64; 3], f64, f64)> = (0..4)
        .map(|_| {
            (
                [rng.gen_range(0.5..3.0), rng.gen_range(0.5..3.0), rng.gen_range(0.5..3.0)],
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(-1.0..1.0),
            )
        })
        .collect();
    let offset = rng.gen_range(0.0..1.0);
    PotentialField::from_fn(grid, |x| {
        let s: f64 = modes.iter().map(|(k, ph, c)| c * (k[0] * x[0] + k[1] * x[1] + k[2] * x[2] + ph).sin()).sum();
        amplitude * (offset + 1.0 + 0.25 * s)
    })
}

/// Random smooth trace on the inner patch: random low modes times a bump that
/// vanishes on the patch rim.
pub fn random_smooth_gamma0(domain: &DomainGrid, patches: &BoundaryPatches, rng: &mut impl Rng) -> Result<BoundaryField> {
    let coeffs: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let grid = domain.grid();
    let r0 = patches.r0;
    let values: Vec<f64> = patches
        .gamma0
        .iter()
        .map(|&p| {
            let x = grid.point(grid.boundary()[p]);
            let d = [x[0] - patches.x0[0], x[1] - patches.x0[1], x[2] - patches.x0[2]];
            let s = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            let poly = coeffs[0]
                + coeffs[1] * d[0] / r0
                + coeffs[2] * d[1] / r0
                + coeffs[3] * d[2] / r0
                + coeffs[4] * (d[0] * d[1]) / (r0 * r0)
                + coeffs[5] * (d[0] * d[0] - d[1] * d[1]) / (r0 * r0);
            poly * crate::geometry::radial_bump(s, 0.0, r0)
        })
        .collect();
    patches.gamma0_field(domain, &values)
}
