//! Full and localized Dirichlet-to-Neumann maps and their linearization in
//! the boundary data.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::elliptic::{Coefficient, EllipticOperator, Field, PotentialField};
use crate::error::{Error, Result};
use crate::geometry::{BoundaryField, BoundaryPatches, DomainGrid, Fnv1a, Point, Support};
use crate::nonlinearity::Nonlinearity;
use crate::trace::{BoundaryFunctional, BoundaryOperatorMatrix, TraceNorms};

/// Zeroth-order term owned by an evaluator.
#[derive(Clone, Debug)]
pub enum DtnCoefficient {
    Potential(PotentialField),
    Nonlinear(Nonlinearity),
}

/// Evaluates `Λ(f)` and `χΛ(f)` for one coefficient, caching forward solutions
/// by trace.
#[derive(Debug)]
pub struct DtnEvaluator {
    op: Arc<EllipticOperator>,
    coefficient: DtnCoefficient,
    chi: BoundaryField,
    cache: Mutex<HashMap<u64, Arc<Field>>>,
}

fn trace_key(f: &BoundaryField) -> u64 {
    let mut h = Fnv1a::default();
    h.write_u64(f.grid_id());
    for v in &f.values {
        h.write_f64(*v);
    }
    h.finish()
}

impl DtnEvaluator {
    pub fn new(op: Arc<EllipticOperator>, coefficient: DtnCoefficient, chi: BoundaryField) -> Result<Self> {
        chi.check_grid(op.grid())?;
        if let DtnCoefficient::Potential(p) = &coefficient {
            if p.grid_id() != op.grid().id() {
                return Err(Error::GridMismatch("potential belongs to a different grid".into()));
            }
        }
        Ok(DtnEvaluator { op, coefficient, chi, cache: Mutex::new(HashMap::new()) })
    }

    pub fn linear(op: Arc<EllipticOperator>, sigma: PotentialField, patches: &BoundaryPatches) -> Result<Self> {
        Self::new(op, DtnCoefficient::Potential(sigma), patches.chi.clone())
    }

    pub fn semilinear(op: Arc<EllipticOperator>, a: Nonlinearity, patches: &BoundaryPatches) -> Result<Self> {
        Self::new(op, DtnCoefficient::Nonlinear(a), patches.chi.clone())
    }

    pub fn operator(&self) -> &EllipticOperator {
        &self.op
    }

    pub fn coefficient(&self) -> &DtnCoefficient {
        &self.coefficient
    }

    pub fn chi(&self) -> &BoundaryField {
        &self.chi
    }

    fn coeff(&self) -> Coefficient<'_> {
        match &self.coefficient {
            DtnCoefficient::Potential(p) => Coefficient::Potential(p),
            DtnCoefficient::Nonlinear(a) => Coefficient::Nonlinear(a),
        }
    }

    /// Forward solution `u(f)`, from the cache when the same trace was seen before.
    pub fn solution(&self, f: &BoundaryField) -> Result<Arc<Field>> {
        f.check_grid(self.op.grid())?;
        let key = trace_key(f);
        if let Some(u) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(u.clone());
        }
        let u = match &self.coefficient {
            DtnCoefficient::Potential(p) => self.op.solve_linear(p, f, None)?.0,
            DtnCoefficient::Nonlinear(a) => self.op.solve_semilinear(a, f, None)?.0,
        };
        let u = Arc::new(u);
        self.cache.lock().expect("cache lock").insert(key, u.clone());
        Ok(u)
    }

    pub fn cached_solutions(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }

    /// `Λ(f)`: pairings of the forward solution against the nodal boundary basis.
    pub fn apply(&self, f: &BoundaryField) -> Result<BoundaryFunctional> {
        let u = self.solution(f)?;
        BoundaryFunctional::new(self.op.grid(), self.op.boundary_functional(&u, self.coeff())?)
    }

    /// `χΛ(f)`, i.e. `φ ↦ ⟨Λ(f), χφ⟩`.
    pub fn localized(&self, f: &BoundaryField) -> Result<BoundaryFunctional> {
        Ok(self.localize(self.apply(f)?))
    }

    fn localize(&self, mut psi: BoundaryFunctional) -> BoundaryFunctional {
        for (v, c) in psi.values.iter_mut().zip(&self.chi.values) {
            *v *= c;
        }
        psi
    }

    /// Potential of the linearized problem at data `f`: `σ` itself for a linear
    /// evaluator, `a'(u_a(f))` for a semilinear one.
    pub fn linearization_potential(&self, f: &BoundaryField) -> Result<PotentialField> {
        match &self.coefficient {
            DtnCoefficient::Potential(p) => Ok(p.clone()),
            DtnCoefficient::Nonlinear(a) => {
                let u = self.solution(f)?;
                let values: Vec<f64> = u.values.iter().map(|&z| a.deriv(z)).collect();
                let lower = values.iter().fold(0.0f64, |m, v| m.max(-v));
                PotentialField::from_values(self.op.grid(), values, lower)
            }
        }
    }

    fn linear_functional(&self, sigma: &PotentialField, g: &BoundaryField) -> Result<BoundaryFunctional> {
        if g.values.iter().all(|v| *v == 0.0) {
            return Ok(BoundaryFunctional::zeros(self.op.grid()));
        }
        let (w, _) = self.op.solve_linear(sigma, g, None)?;
        let psi = BoundaryFunctional::new(self.op.grid(), self.op.boundary_functional(&w, Coefficient::Potential(sigma))?)?;
        Ok(self.localize(psi))
    }

    /// `dΛ̃^t(0) g`: the localized functional of the linear problem with
    /// potential `a'(u_a(t·h))` and data `g`.
    pub fn linearized(&self, t: f64, anchor: &BoundaryField, g: &BoundaryField) -> Result<BoundaryFunctional> {
        let sigma = self.linearization_potential(&anchor.scaled(t))?;
        self.linear_functional(&sigma, g)
    }

    /// `dΛ̃^t(0)` applied to several traces, sharing one forward solve.
    pub fn linearized_many(&self, t: f64, anchor: &BoundaryField, traces: &[BoundaryField]) -> Result<Vec<BoundaryFunctional>> {
        let sigma = self.linearization_potential(&anchor.scaled(t))?;
        traces.par_iter().map(|g| self.linear_functional(&sigma, g)).collect()
    }

    /// Matrix of `dΛ̃^t(0)` on the nodal basis at `domain_basis`, with rows read at `codomain_basis`.
    pub fn linearized_matrix(
        &self,
        t: f64,
        anchor: &BoundaryField,
        domain_basis: &[usize],
        codomain_basis: &[usize],
    ) -> Result<BoundaryOperatorMatrix> {
        let sigma = self.linearization_potential(&anchor.scaled(t))?;
        self.matrix_for(&sigma, domain_basis, codomain_basis)
    }

    /// Matrix of the localized linear map with potential `sigma`.
    pub fn matrix_for(
        &self,
        sigma: &PotentialField,
        domain_basis: &[usize],
        codomain_basis: &[usize],
    ) -> Result<BoundaryOperatorMatrix> {
        let grid = self.op.grid();
        let nb = grid.boundary().len();
        let cols: Vec<Vec<f64>> = domain_basis
            .par_iter()
            .map(|&p| {
                let mut e = vec![0.0; nb];
                e[p] = 1.0;
                let psi = self.linear_functional(sigma, &BoundaryField::new(grid, e, Support::Gamma0)?)?;
                Ok(codomain_basis.iter().map(|&q| psi.values[q]).collect())
            })
            .collect::<Result<_>>()?;
        Ok(BoundaryOperatorMatrix {
            matrix: nalgebra::DMatrix::from_fn(codomain_basis.len(), domain_basis.len(), |i, j| cols[j][i]),
            domain_basis: domain_basis.to_vec(),
            codomain_basis: codomain_basis.to_vec(),
        })
    }
}

/// The sweep anchor `h` with `h(x_*) = 1`, supported in the inner patch, and
/// the symmetric `t` grid on `[-τ, τ]`.
#[derive(Clone, Debug)]
pub struct SweepAnchor {
    pub h: BoundaryField,
    pub x_star: Point,
    pub x_star_position: usize,
    pub t_grid: Vec<f64>,
}

impl SweepAnchor {
    /// Radial bump on the inner patch, equal to 1 within `plateau` of `x_*`.
    pub fn new(domain: &DomainGrid, patches: &BoundaryPatches, plateau: f64, tau: f64, points: usize) -> Result<Self> {
        if !(tau > 0.0) || points < 3 || points % 2 == 0 {
            return Err(Error::Config(format!(
                "t grid needs τ > 0 and an odd number ≥ 3 of points (got τ = {tau}, {points} points)"
            )));
        }
        let h = patches.anchor_bump(domain, plateau, patches.r0)?;
        let pos = patches.x_star_position(domain);
        if h.values[pos] != 1.0 {
            return Err(Error::Config("anchor does not equal 1 at x_*".into()));
        }
        let half = (points / 2) as f64;
        let t_grid = (0..points).map(|k| tau * (k as f64 - half) / half).collect();
        Ok(SweepAnchor { h, x_star: patches.x_star, x_star_position: pos, t_grid })
    }

    /// `𝔣_t = t·h`.
    pub fn data(&self, t: f64) -> BoundaryField {
        self.h.scaled(t)
    }
}

/// `‖[Λ̃(𝔣_t + εg) - Λ̃(𝔣_t)]/ε - dΛ̃^t(0)g‖_{-1/2}` for each ε, with the
/// perturbed solves warm-started from the unperturbed one.
#[allow(clippy::too_many_arguments)]
pub fn frechet_remainders(
    op: &EllipticOperator,
    norms: &TraceNorms,
    patches: &BoundaryPatches,
    a: &Nonlinearity,
    anchor: &BoundaryField,
    t: f64,
    g: &BoundaryField,
    epsilons: &[f64],
) -> Result<Vec<f64>> {
    let grid = op.grid();
    let chi = &patches.chi.values;
    let local = |psi: Vec<f64>| -> Vec<f64> { psi.iter().zip(chi).map(|(p, c)| p * c).collect() };
    let ft = anchor.scaled(t);
    let (u0, _) = op.solve_semilinear(a, &ft, None)?;
    let base = local(op.boundary_functional(&u0, Coefficient::Nonlinear(a))?);
    let values: Vec<f64> = u0.values.iter().map(|&z| a.deriv(z)).collect();
    let lower = values.iter().fold(0.0f64, |m, v| m.max(-v));
    let sigma = PotentialField::from_values(grid, values, lower)?;
    let (w, _) = op.solve_linear(&sigma, g, None)?;
    let lin = local(op.boundary_functional(&w, Coefficient::Potential(&sigma))?);
    epsilons
        .iter()
        .map(|&eps| {
            let (ue, _) = op.solve_semilinear(a, &ft.axpy(eps, g), Some(&u0))?;
            let pe = local(op.boundary_functional(&ue, Coefficient::Nonlinear(a))?);
            let q: Vec<f64> = (0..pe.len()).map(|p| (pe[p] - base[p]) / eps - lin[p]).collect();
            norms.h_minus_half_norm(&BoundaryFunctional::new(grid, q)?)
        })
        .collect()
}

/// Writes a boundary operator matrix as `row_node,col_node,value` triples.
pub fn write_matrix_csv(path: &Path, grid_boundary: &[usize], m: &BoundaryOperatorMatrix) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "row_node,col_node,value")?;
    for (i, &r) in m.codomain_basis.iter().enumerate() {
        for (j, &c) in m.domain_basis.iter().enumerate() {
            writeln!(w, "{},{},{:e}", grid_boundary[r], grid_boundary[c], m.matrix[(i, j)])?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::{Conductivity, SolverSettings};
    use crate::geometry::{build_domain, build_patches, GeometryDescriptor};
    use crate::nonlinearity::builtin;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Setup {
        domain: DomainGrid,
        patches: BoundaryPatches,
        op: Arc<EllipticOperator>,
    }

    fn setup(n: usize) -> Setup {
        let domain = build_domain(3, n, &GeometryDescriptor::default()).unwrap();
        let patches = build_patches(&domain, "z+".parse().unwrap(), 0.26, 0.4).unwrap();
        let settings = SolverSettings { tol_lin: 1e-13, tol_newton: 1e-12, ..Default::default() };
        let a = Conductivity::from_rows([[1.2, 0.1, 0.0], [0.1, 1.0, 0.05], [0.0, 0.05, 0.9]], 0.5).unwrap();
        let op = Arc::new(EllipticOperator::for_domain(&domain, &a, settings));
        Setup { domain, patches, op }
    }

    fn random_gamma0(s: &Setup, rng: &mut ChaCha8Rng) -> BoundaryField {
        let raw: Vec<f64> = s.patches.gamma0.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
        s.patches.gamma0_field(&s.domain, &raw).unwrap()
    }

    #[test]
    fn harmonic_flux_vanishes_and_reciprocity() {
        let s = setup(9);
        let g = s.op.grid();
        let e = DtnEvaluator::linear(s.op.clone(), PotentialField::constant(g, 0.0), &s.patches).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_gamma0(&s, &mut rng);
        let psi = e.apply(&f).unwrap();
        let total: f64 = psi.values.iter().sum();
        let scale: f64 = psi.values.iter().map(|v| v.abs()).sum();
        assert!(total.abs() <= 1e-10 * scale, "{total}");

        let sigma = PotentialField::from_fn(g, |p| 1.0 + p[0] * p[1]);
        let e = DtnEvaluator::linear(s.op.clone(), sigma, &s.patches).unwrap();
        let f = BoundaryField::new(g, (0..g.boundary().len()).map(|_| rng.gen_range(-1.0..1.0)).collect(), Support::General).unwrap();
        let h = BoundaryField::new(g, (0..g.boundary().len()).map(|_| rng.gen_range(-1.0..1.0)).collect(), Support::General).unwrap();
        let a = e.apply(&f).unwrap().pair(&h);
        let b = e.apply(&h).unwrap().pair(&f);
        assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
        assert_eq!(e.cached_solutions(), 2);
        // cache hit reproduces bitwise
        assert_eq!(e.apply(&f).unwrap(), e.apply(&f).unwrap());
    }

    #[test]
    fn linear_nonlinearity_matches_constant_potential() {
        let s = setup(9);
        let g = s.op.grid();
        let lin = DtnEvaluator::semilinear(s.op.clone(), builtin("linear", &[0.7]).unwrap(), &s.patches).unwrap();
        let pot = DtnEvaluator::linear(s.op.clone(), PotentialField::constant(g, 0.7), &s.patches).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_gamma0(&s, &mut rng);
        let a = lin.apply(&f).unwrap();
        let b = pot.apply(&f).unwrap();
        let scale = b.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() <= 1e-9 * scale);
        }
        // linearization independent of t
        let anchor = SweepAnchor::new(&s.domain, &s.patches, 0.05, 1.0, 5).unwrap();
        let d0 = lin.linearized(0.0, &anchor.h, &f).unwrap();
        let d1 = lin.linearized(0.8, &anchor.h, &f).unwrap();
        let loc = pot.localized(&f).unwrap();
        for ((x, y), z) in d0.values.iter().zip(&d1.values).zip(&loc.values) {
            assert!((x - y).abs() <= 1e-12 * scale && (x - z).abs() <= 1e-9 * scale);
        }
        assert!(lin.linearized(0.5, &anchor.h, &BoundaryField::zeros(g)).unwrap().values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn localization_identity_and_support() {
        let s = setup(9);
        let g = s.op.grid();
        let e = DtnEvaluator::semilinear(s.op.clone(), builtin("cubic", &[1.0, 0.0]).unwrap(), &s.patches).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_gamma0(&s, &mut rng);
        let full = e.apply(&f).unwrap();
        let loc = e.localized(&f).unwrap();
        let phi = random_gamma0(&s, &mut rng);
        assert_eq!(full.pair(&phi), loc.pair(&phi));
        for p in 0..g.boundary().len() {
            if !s.patches.in_gamma1(p) {
                assert_eq!(loc.values[p], 0.0);
            }
        }
    }

    #[test]
    fn linearized_matrix_is_symmetric_on_inner_patch() {
        let s = setup(9);
        let e = DtnEvaluator::semilinear(s.op.clone(), builtin("sine", &[0.8]).unwrap(), &s.patches).unwrap();
        let anchor = SweepAnchor::new(&s.domain, &s.patches, 0.05, 1.0, 5).unwrap();
        let basis = s.patches.gamma0.clone();
        let m = e.linearized_matrix(0.7, &anchor.h, &basis, &basis).unwrap();
        let asym = (&m.matrix - m.matrix.transpose()).abs().max();
        assert!(asym <= 1e-9 * m.matrix.abs().max(), "{asym}");
        let same = e.linearized_matrix(0.7, &anchor.h, &basis, &basis).unwrap();
        assert_eq!(m.sub(&same).unwrap().matrix.abs().max(), 0.0);
    }

    #[test]
    fn anchor_grid_and_value() {
        let s = setup(9);
        let anchor = SweepAnchor::new(&s.domain, &s.patches, 0.05, 1.0, 9).unwrap();
        assert_eq!(anchor.t_grid.len(), 9);
        assert_eq!(anchor.t_grid[4], 0.0);
        assert_eq!(anchor.t_grid[0], -1.0);
        assert!(s.patches.supported_in_gamma0(&anchor.h));
        assert!(SweepAnchor::new(&s.domain, &s.patches, 0.05, 1.0, 4).is_err());
    }
}
