//! Finite-difference discretization of `-div(A∇u) + σu` and `-div(A∇u) + a(u)`
//! on a masked grid, the energy pairing that realizes every DtN action, and
//! the first Dirichlet eigenvalue.
//!
//! The discrete energy is
//! `E(u, v) = Σ_edges w_e A_ii Δu Δv / h² · h³ + Σ_plaquettes w_p A_ij (D_i u D_j v + D_j u D_i v) h³ + Σ_nodes m σ u v`
//! with trapezoidal weights, so it is symmetric and exact on affine functions.
//! The Dirichlet problem is the statement `E(u, v) = 0` for every `v` vanishing
//! on the boundary; DtN functionals are `E(u, e_b)` for boundary nodes `b`.

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundaryField, DomainGrid, MaskedGrid, Point};
use crate::nonlinearity::Nonlinearity;
use crate::sparse::{pcg, CgStats, Csr};

/// Constant symmetric coefficient matrix with ellipticity constant κ.
#[derive(Clone, Debug, PartialEq)]
pub struct Conductivity {
    pub matrix: Matrix3<f64>,
    pub kappa: f64,
}

impl Conductivity {
    pub fn new(matrix: Matrix3<f64>, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(Error::InvalidInput(format!("κ = {kappa} must lie in (0, 1)")));
        }
        let asym = (matrix - matrix.transpose()).abs().max();
        if asym > 1e-14 * (1.0 + matrix.abs().max()) {
            return Err(Error::InvalidInput(format!("A is not symmetric (max |a_ij - a_ji| = {asym:.3e})")));
        }
        let lmin = SymmetricEigen::new(matrix).eigenvalues.min();
        if lmin < kappa {
            return Err(Error::InvalidInput(format!("smallest eigenvalue of A is {lmin}, below κ = {kappa}")));
        }
        if matrix.abs().max() > 1.0 / kappa {
            return Err(Error::InvalidInput(format!("max |a_ij| exceeds 1/κ = {}", 1.0 / kappa)));
        }
        Ok(Conductivity { matrix, kappa })
    }

    pub fn identity(kappa: f64) -> Result<Self> {
        Conductivity::new(Matrix3::identity(), kappa)
    }

    pub fn from_rows(rows: [[f64; 3]; 3], kappa: f64) -> Result<Self> {
        let m = Matrix3::from_fn(|i, j| rows[i][j]);
        Conductivity::new(m, kappa)
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        let m = &self.matrix;
        [[m[(0, 0)], m[(0, 1)], m[(0, 2)]], [m[(1, 0)], m[(1, 1)], m[(1, 2)]], [m[(2, 0)], m[(2, 1)], m[(2, 2)]]]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub tol_lin: f64,
    pub tol_newton: f64,
    pub max_newton: usize,
    pub max_cg: usize,
    pub continuation_steps: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { tol_lin: 1e-10, tol_newton: 1e-10, max_newton: 50, max_cg: 20_000, continuation_steps: 4 }
    }
}

/// Nodal values on every lattice node of a grid (zero on exterior nodes).
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub values: Vec<f64>,
    grid_id: u64,
}

impl Field {
    pub fn zeros(grid: &MaskedGrid) -> Self {
        Field { values: vec![0.0; grid.len()], grid_id: grid.id() }
    }

    pub fn from_fn(grid: &MaskedGrid, f: impl Fn(&Point) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|i| if grid.kind(i).is_active() { f(&grid.point(i)) } else { 0.0 })
            .collect();
        Field { values, grid_id: grid.id() }
    }

    pub fn from_values(grid: &MaskedGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!("field has {} values, grid has {} nodes", values.len(), grid.len())));
        }
        Ok(Field { values, grid_id: grid.id() })
    }

    pub fn grid_id(&self) -> u64 {
        self.grid_id
    }

    pub fn trace(&self, grid: &MaskedGrid) -> Result<BoundaryField> {
        self.check(grid)?;
        BoundaryField::new(grid, grid.boundary().iter().map(|&i| self.values[i]).collect(), crate::geometry::Support::General)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn check(&self, grid: &MaskedGrid) -> Result<()> {
        if self.grid_id != grid.id() {
            return Err(Error::GridMismatch("field belongs to a different grid".into()));
        }
        Ok(())
    }
}

/// Zeroth-order coefficient σ with the lower bound `σ ≥ -𝔠` it was declared with.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialField {
    pub values: Vec<f64>,
    pub lower_bound: f64,
    grid_id: u64,
}

impl PotentialField {
    pub fn constant(grid: &MaskedGrid, c: f64) -> Self {
        PotentialField { values: vec![c; grid.len()], lower_bound: (-c).max(0.0), grid_id: grid.id() }
    }

    pub fn from_fn(grid: &MaskedGrid, f: impl Fn(&Point) -> f64) -> Self {
        let values: Vec<f64> = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        let lower_bound = values.iter().fold(0.0f64, |m, v| m.max(-v));
        PotentialField { values, lower_bound, grid_id: grid.id() }
    }

    /// Wraps nodal values declared to satisfy `σ ≥ -lower_bound`.
    pub fn from_values(grid: &MaskedGrid, values: Vec<f64>, lower_bound: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!("potential has {} values, grid has {} nodes", values.len(), grid.len())));
        }
        let p = PotentialField { values, lower_bound, grid_id: grid.id() };
        p.check_lower_bound(grid)?;
        Ok(p)
    }

    pub fn grid_id(&self) -> u64 {
        self.grid_id
    }

    fn check_lower_bound(&self, grid: &MaskedGrid) -> Result<()> {
        for i in 0..grid.len() {
            if grid.kind(i).is_active() && self.values[i] < -self.lower_bound {
                return Err(Error::InvalidInput(format!(
                    "σ = {} at node {i} is below -𝔠 = {}",
                    self.values[i], -self.lower_bound
                )));
            }
        }
        Ok(())
    }

    /// Sampled Hölder seminorm `max |σ(x) - σ(y)| / |x - y|^β` over node pairs
    /// separated by 1, 2, 4 or 8 cells along each axis and the main diagonals.
    pub fn holder_seminorm(&self, grid: &MaskedGrid, beta: f64) -> f64 {
        let lat = grid.lattice();
        let mut offsets = Vec::new();
        for s in [1isize, 2, 4, 8] {
            offsets.extend([[s, 0, 0], [0, s, 0], [0, 0, s], [s, s, 0], [s, 0, s], [0, s, s], [s, s, s]]);
        }
        let mut worst = 0.0f64;
        for i in 0..grid.len() {
            if !grid.kind(i).is_active() {
                continue;
            }
            for off in &offsets {
                if let Some(j) = lat.offset(i, *off) {
                    if grid.kind(j).is_active() {
                        let d = lat.h * ((off[0] * off[0] + off[1] * off[1] + off[2] * off[2]) as f64).sqrt();
                        worst = worst.max((self.values[i] - self.values[j]).abs() / d.powf(beta));
                    }
                }
            }
        }
        worst
    }
}

/// Zeroth-order term of the energy pairing.
#[derive(Clone, Copy, Debug)]
pub enum Coefficient<'a> {
    Potential(&'a PotentialField),
    Nonlinear(&'a Nonlinearity),
}

impl Coefficient<'_> {
    #[inline]
    fn term(&self, node: usize, u: f64) -> f64 {
        match self {
            Coefficient::Potential(p) => p.values[node] * u,
            Coefficient::Nonlinear(a) => a.eval(u),
        }
    }
}

/// Stiffness matrix `E(u, v)` without the zeroth-order term, over all lattice nodes.
pub fn assemble_stiffness(grid: &MaskedGrid, a: &Conductivity) -> Csr {
    let lat = grid.lattice();
    let h = lat.h;
    let n = lat.len();
    let active = |i: usize| grid.kind(i).is_active();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let da = [-1.0, 1.0, -1.0, 1.0];
    let db = [-1.0, -1.0, 1.0, 1.0];
    for p in 0..n {
        if !active(p) {
            continue;
        }
        let wp = grid.axis_weight(p);
        for axis in 0..3 {
            let Some(q) = lat.step(p, axis, true) else { continue };
            if !active(q) {
                continue;
            }
            let mut w = h * a.matrix[(axis, axis)];
            for b in 0..3 {
                if b != axis {
                    w *= wp[b];
                }
            }
            rows[p].push((p, w));
            rows[p].push((q, -w));
            rows[q].push((q, w));
            rows[q].push((p, -w));
        }
        for (ax, bx) in [(0, 1), (0, 2), (1, 2)] {
            let aab = a.matrix[(ax, bx)];
            if aab == 0.0 {
                continue;
            }
            let Some(p10) = lat.step(p, ax, true) else { continue };
            let Some(p01) = lat.step(p, bx, true) else { continue };
            let Some(p11) = lat.step(p10, bx, true) else { continue };
            let corners = [p, p10, p01, p11];
            if !corners.iter().all(|&c| active(c)) {
                continue;
            }
            let coef = aab * h / 4.0 * wp[3 - ax - bx];
            for k in 0..4 {
                for l in 0..4 {
                    rows[corners[k]].push((corners[l], coef * (da[k] * db[l] + db[k] * da[l])));
                }
            }
        }
    }
    Csr::from_rows(n, rows)
}

/// The interior system `K_II + diag(m σ)` for potential σ, on interior unknowns
/// in grid order.
pub fn assemble_system(grid: &MaskedGrid, a: &Conductivity, sigma: &PotentialField) -> Result<Csr> {
    if sigma.grid_id() != grid.id() {
        return Err(Error::GridMismatch("potential belongs to a different grid".into()));
    }
    sigma.check_lower_bound(grid)?;
    let k = assemble_stiffness(grid, a);
    let local = local_numbering(grid);
    let (mut kuu, _) = k.split(grid.unknowns(), &local);
    for (l, &i) in grid.unknowns().iter().enumerate() {
        let shift = grid.mass()[i] * sigma.values[i];
        for kk in kuu.indptr[l]..kuu.indptr[l + 1] {
            if kuu.indices[kk] == l {
                kuu.data[kk] += shift;
            }
        }
    }
    Ok(kuu)
}

fn local_numbering(grid: &MaskedGrid) -> Vec<usize> {
    let mut local = vec![usize::MAX; grid.len()];
    for (l, &i) in grid.unknowns().iter().enumerate() {
        local[i] = l;
    }
    local
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NewtonStats {
    pub iterations: usize,
    pub damped_steps: usize,
    pub continuation_used: bool,
    pub residual_history: Vec<f64>,
    pub cg_iterations: usize,
}

/// Discretized operator on one grid with one conductivity. Solves are pure: the
/// operator is immutable and every call returns fresh fields.
#[derive(Clone, Debug)]
pub struct EllipticOperator {
    grid: MaskedGrid,
    conductivity: Conductivity,
    stiffness: Csr,
    k_uu: Csr,
    k_ub: Csr,
    pub settings: SolverSettings,
}

impl EllipticOperator {
    pub fn new(grid: &MaskedGrid, conductivity: &Conductivity, settings: SolverSettings) -> Self {
        let stiffness = assemble_stiffness(grid, conductivity);
        let local = local_numbering(grid);
        let (k_uu, k_ub) = stiffness.split(grid.unknowns(), &local);
        EllipticOperator { grid: grid.clone(), conductivity: conductivity.clone(), stiffness, k_uu, k_ub, settings }
    }

    pub fn for_domain(domain: &DomainGrid, conductivity: &Conductivity, settings: SolverSettings) -> Self {
        Self::new(domain.grid(), conductivity, settings)
    }

    pub fn with_settings(&self, settings: SolverSettings) -> Self {
        EllipticOperator { settings, ..self.clone() }
    }

    pub fn grid(&self) -> &MaskedGrid {
        &self.grid
    }

    pub fn conductivity(&self) -> &Conductivity {
        &self.conductivity
    }

    pub fn stiffness(&self) -> &Csr {
        &self.stiffness
    }

    fn lift(&self, f: &BoundaryField) -> Result<Vec<f64>> {
        f.check_grid(&self.grid)?;
        let mut full = vec![0.0; self.grid.len()];
        for (p, &i) in self.grid.boundary().iter().enumerate() {
            full[i] = f.values[p];
        }
        Ok(full)
    }

    fn check_potential(&self, sigma: &PotentialField) -> Result<()> {
        if sigma.grid_id() != self.grid.id() {
            return Err(Error::GridMismatch("potential belongs to a different grid".into()));
        }
        sigma.check_lower_bound(&self.grid)
    }

    /// Solves `-div(A∇u) + σu = g` in the interior with `u = f` on the boundary.
    pub fn solve_linear(&self, sigma: &PotentialField, f: &BoundaryField, source: Option<&Field>) -> Result<(Field, CgStats)> {
        self.solve_linear_tol(sigma, f, source, self.settings.tol_lin)
    }

    pub fn solve_linear_tol(
        &self,
        sigma: &PotentialField,
        f: &BoundaryField,
        source: Option<&Field>,
        tol: f64,
    ) -> Result<(Field, CgStats)> {
        self.check_potential(sigma)?;
        if let Some(g) = source {
            g.check(&self.grid)?;
        }
        let mut full = self.lift(f)?;
        let unknowns = self.grid.unknowns();
        let mass = self.grid.mass();
        let rhs: Vec<f64> = unknowns
            .iter()
            .enumerate()
            .map(|(l, &i)| source.map(|g| mass[i] * g.values[i]).unwrap_or(0.0) - self.k_ub.row_dot(l, &full))
            .collect();
        let shift: Vec<f64> = unknowns.iter().map(|&i| mass[i] * sigma.values[i]).collect();
        let mut x = vec![0.0; unknowns.len()];
        let stats = pcg(&self.k_uu, Some(&shift), &rhs, &mut x, tol, self.settings.max_cg)?;
        for (l, &i) in unknowns.iter().enumerate() {
            full[i] = x[l];
        }
        Ok((Field { values: full, grid_id: self.grid.id() }, stats))
    }

    fn semilinear_residual(&self, a: &Nonlinearity, u: &[f64], out: &mut [f64]) -> f64 {
        let mass = self.grid.mass();
        // scale: size of the individual terms, so the stopping test is relative
        // even when they cancel
        let mut scale = 0.0;
        for (l, &i) in self.grid.unknowns().iter().enumerate() {
            let mut k = 0.0;
            let mut mag = 0.0;
            for (j, v) in self.stiffness.row(i) {
                k += v * u[j];
                mag += (v * u[j]).abs();
            }
            let nl = mass[i] * a.eval(u[i]);
            out[l] = k + nl;
            mag += nl.abs();
            scale += mag * mag;
        }
        scale.sqrt()
    }

    fn newton(&self, a: &Nonlinearity, u: &mut [f64], stats: &mut NewtonStats) -> Result<()> {
        let unknowns = self.grid.unknowns();
        let mass = self.grid.mass();
        let n = unknowns.len();
        let floor = 64.0 * f64::EPSILON * (n as f64).sqrt();
        let mut r = vec![0.0; n];
        let mut trial_r = vec![0.0; n];
        let mut trial = u.to_vec();
        let mut scale = self.semilinear_residual(a, u, &mut r);
        let mut rnorm = norm(&r);
        stats.residual_history.push(rnorm);
        for _ in 0..self.settings.max_newton {
            if rnorm <= self.settings.tol_newton * scale || rnorm == 0.0 {
                return Ok(());
            }
            let shift: Vec<f64> = unknowns.iter().map(|&i| mass[i] * a.deriv(u[i])).collect();
            let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
            let mut step = vec![0.0; n];
            let cg = pcg(&self.k_uu, Some(&shift), &rhs, &mut step, self.settings.tol_lin.min(1e-3), self.settings.max_cg)
                .map_err(|e| Error::Newton(format!("Jacobian solve failed: {e}")))?;
            stats.cg_iterations += cg.iterations;
            stats.iterations += 1;
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                trial.copy_from_slice(u);
                for (l, &i) in unknowns.iter().enumerate() {
                    trial[i] += alpha * step[l];
                }
                let trial_scale = self.semilinear_residual(a, &trial, &mut trial_r);
                let tn = norm(&trial_r);
                if tn.is_finite() && tn <= (1.0 - 1e-4 * alpha) * rnorm {
                    u.copy_from_slice(&trial);
                    std::mem::swap(&mut r, &mut trial_r);
                    rnorm = tn;
                    scale = trial_scale;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
                stats.damped_steps += 1;
            }
            stats.residual_history.push(rnorm);
            if !accepted {
                if rnorm <= floor * scale.max(f64::MIN_POSITIVE) {
                    return Ok(());
                }
                return Err(Error::Newton(format!("line search failed at residual {rnorm:.3e}")));
            }
        }
        if rnorm <= self.settings.tol_newton * scale {
            return Ok(());
        }
        Err(Error::Newton(format!(
            "no convergence in {} steps (residual {rnorm:.3e}, scale {scale:.3e})",
            self.settings.max_newton
        )))
    }

    /// Solves `-div(A∇u) + a(u) = 0` with `u = f` on the boundary by damped
    /// Newton, falling back to continuation in the amplitude of `f`.
    pub fn solve_semilinear(&self, a: &Nonlinearity, f: &BoundaryField, initial: Option<&Field>) -> Result<(Field, NewtonStats)> {
        let full = self.lift(f)?;
        let mut u = match initial {
            Some(init) => {
                init.check(&self.grid)?;
                let mut u = init.values.clone();
                for &i in self.grid.boundary() {
                    u[i] = full[i];
                }
                u
            }
            None => full.clone(),
        };
        let mut stats = NewtonStats::default();
        match self.newton(a, &mut u, &mut stats) {
            Ok(()) => return Ok((Field { values: u, grid_id: self.grid.id() }, stats)),
            Err(first) => {
                stats.continuation_used = true;
                let steps = self.settings.continuation_steps.max(1);
                let mut u = vec![0.0; self.grid.len()];
                for k in 1..=steps {
                    let s = k as f64 / steps as f64;
                    for &i in self.grid.boundary() {
                        u[i] = s * full[i];
                    }
                    self.newton(a, &mut u, &mut stats).map_err(|e| {
                        Error::Newton(format!("continuation step {k}/{steps} failed ({e}); initial attempt: {first}"))
                    })?;
                }
                Ok((Field { values: u, grid_id: self.grid.id() }, stats))
            }
        }
    }

    /// Discrete `∫ A∇u·∇v + (σu or a(u)) v` over the whole grid.
    pub fn energy_pairing(&self, u: &Field, v: &Field, coeff: Coefficient<'_>) -> Result<f64> {
        u.check(&self.grid)?;
        v.check(&self.grid)?;
        if let Coefficient::Potential(p) = coeff {
            self.check_potential(p)?;
        }
        let mass = self.grid.mass();
        let mut s = 0.0;
        for i in 0..self.grid.len() {
            if v.values[i] == 0.0 || !self.grid.kind(i).is_active() {
                continue;
            }
            s += v.values[i] * (self.stiffness.row_dot(i, &u.values) + mass[i] * coeff.term(i, u.values[i]));
        }
        Ok(s)
    }

    /// Coefficients `E(u, e_b)` of the boundary functional of `u`, in boundary order.
    pub fn boundary_functional(&self, u: &Field, coeff: Coefficient<'_>) -> Result<Vec<f64>> {
        u.check(&self.grid)?;
        let mass = self.grid.mass();
        Ok(self
            .grid
            .boundary()
            .iter()
            .map(|&b| self.stiffness.row_dot(b, &u.values) + mass[b] * coeff.term(b, u.values[b]))
            .collect())
    }

    /// Interior residual `E(u, e_i)` for every unknown node, in unknown order.
    pub fn interior_residual(&self, u: &Field, coeff: Coefficient<'_>) -> Result<Vec<f64>> {
        u.check(&self.grid)?;
        let mass = self.grid.mass();
        Ok(self
            .grid
            .unknowns()
            .iter()
            .map(|&i| self.stiffness.row_dot(i, &u.values) + mass[i] * coeff.term(i, u.values[i]))
            .collect())
    }

    /// `sqrt(E(u, u))` with potential σ.
    pub fn energy_norm(&self, u: &Field, sigma: &PotentialField) -> Result<f64> {
        Ok(self.energy_pairing(u, u, Coefficient::Potential(sigma))?.max(0.0).sqrt())
    }

    pub(crate) fn k_uu(&self) -> &Csr {
        &self.k_uu
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lambda1Estimate {
    pub value: f64,
    pub iterations: usize,
}

/// Smallest Dirichlet eigenvalue of the discrete Laplacian by inverse power
/// iteration on `K u = λ M u`, stopped at relative change `tol`.
pub fn estimate_lambda1(domain: &DomainGrid, tol: f64) -> Result<Lambda1Estimate> {
    let grid = domain.grid();
    let op = EllipticOperator::new(grid, &Conductivity::identity(0.5)?, SolverSettings::default());
    let unknowns = grid.unknowns();
    let mass: Vec<f64> = unknowns.iter().map(|&i| grid.mass()[i]).collect();
    let n = unknowns.len();
    let mut x: Vec<f64> = unknowns
        .iter()
        .map(|&i| {
            let p = grid.point(i);
            let s = domain.side();
            (p[0] * (s - p[0]) * p[1] * (s - p[1]) * p[2] * (s - p[2])).max(0.0) + 1e-3
        })
        .collect();
    let mut kx = vec![0.0; n];
    let rayleigh = |x: &[f64], kx: &mut [f64]| {
        op.k_uu().matvec(x, kx);
        let num: f64 = x.iter().zip(kx.iter()).map(|(a, b)| a * b).sum();
        let den: f64 = x.iter().zip(&mass).map(|(a, m)| a * a * m).sum();
        num / den
    };
    let mut lambda = rayleigh(&x, &mut kx);
    for it in 1..=500 {
        let rhs: Vec<f64> = x.iter().zip(&mass).map(|(a, m)| a * m).collect();
        let mut y = x.clone();
        pcg(op.k_uu(), None, &rhs, &mut y, 1e-12, op.settings.max_cg)?;
        let scale = y.iter().zip(&mass).map(|(a, m)| a * a * m).sum::<f64>().sqrt();
        x = y.into_iter().map(|v| v / scale).collect();
        let next = rayleigh(&x, &mut kx);
        let change = (next - lambda).abs() / next.abs();
        lambda = next;
        if change <= tol {
            return Ok(Lambda1Estimate { value: lambda, iterations: it });
        }
    }
    Err(Error::Stagnation(format!("inverse iteration for λ₁ did not settle (last value {lambda})")))
}

/// One Richardson step on estimates at spacing `h` and `h/2` for an `O(h²)` error.
pub fn richardson(coarse: f64, fine: f64) -> f64 {
    (4.0 * fine - coarse) / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, GeometryDescriptor};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn domain(n: usize) -> DomainGrid {
        build_domain(3, n, &GeometryDescriptor::default()).unwrap()
    }

    fn identity() -> Conductivity {
        Conductivity::identity(0.5).unwrap()
    }

    #[test]
    fn conductivity_validation() {
        assert!(Conductivity::from_rows([[1.0, 0.2, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], 0.5).is_err());
        assert!(Conductivity::from_rows([[0.3, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], 0.5).is_err());
        assert!(Conductivity::from_rows([[4.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], 0.2).is_ok());
        assert!(Conductivity::from_rows([[4.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], 0.5).is_err());
    }

    #[test]
    fn laplacian_stencil_is_seven_point() {
        let d = domain(9);
        let g = d.grid();
        let sys = assemble_system(g, &identity(), &PotentialField::constant(g, 0.0)).unwrap();
        let h = d.h();
        let centre = g.lattice().index([4, 4, 4]);
        let l = g.unknowns().iter().position(|&i| i == centre).unwrap();
        let row: Vec<_> = sys.row(l).collect();
        assert_eq!(row.len(), 7);
        for (c, v) in row {
            if c == l {
                assert!((v - 6.0 * h).abs() < 1e-14);
            } else {
                assert!((v + h).abs() < 1e-14);
            }
        }
        assert_eq!(sys.asymmetry(), 0.0);
    }

    #[test]
    fn anisotropic_and_shifted_stencils() {
        let d = domain(9);
        let g = d.grid();
        let h = d.h();
        let a = Conductivity::from_rows([[4.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], 0.2).unwrap();
        let sys = assemble_system(g, &a, &PotentialField::constant(g, 1.0)).unwrap();
        let centre = g.lattice().index([4, 4, 4]);
        let east = g.lattice().index([5, 4, 4]);
        let north = g.lattice().index([4, 5, 4]);
        let pos = |i| g.unknowns().iter().position(|&u| u == i).unwrap();
        let l = pos(centre);
        let get = |c| sys.row(l).find(|&(cc, _)| cc == c).unwrap().1;
        assert!((get(pos(east)) + 4.0 * h).abs() < 1e-14);
        assert!((get(pos(north)) + h).abs() < 1e-14);
        assert!((get(l) - (12.0 * h + h.powi(3))).abs() < 1e-14);
    }

    #[test]
    fn rejects_potential_below_bound() {
        let d = domain(9);
        let g = d.grid();
        let mut values = vec![0.0; g.len()];
        values[g.unknowns()[3]] = -2.0;
        assert!(PotentialField::from_values(g, values, 1.0).is_err());
    }

    #[test]
    fn affine_and_harmonic_quadratic_are_reproduced() {
        let d = domain(9);
        let g = d.grid();
        let op = EllipticOperator::new(g, &identity(), SolverSettings { tol_lin: 1e-13, ..Default::default() });
        let zero = PotentialField::constant(g, 0.0);
        for exact in [|p: &Point| 2.0 * p[0] - p[2] + 1.0, |p: &Point| p[0] * p[0] - p[1] * p[1]] {
            let f = BoundaryField::from_fn(g, exact);
            let (u, _) = op.solve_linear(&zero, &f, None).unwrap();
            for i in 0..g.len() {
                assert!((u.values[i] - exact(&g.point(i))).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn anisotropic_cross_terms_keep_affine_exactness() {
        let d = domain(9);
        let g = d.grid();
        let a = Conductivity::from_rows([[1.5, 0.3, 0.1], [0.3, 1.2, -0.2], [0.1, -0.2, 1.0]], 0.5).unwrap();
        let op = EllipticOperator::new(g, &a, SolverSettings { tol_lin: 1e-13, ..Default::default() });
        assert!(op.stiffness().asymmetry() < 1e-15);
        let exact = |p: &Point| 0.3 * p[0] - 1.1 * p[1] + 0.7 * p[2] + 0.2;
        let f = BoundaryField::from_fn(g, exact);
        let (u, _) = op.solve_linear(&PotentialField::constant(g, 0.0), &f, None).unwrap();
        for i in 0..g.len() {
            assert!((u.values[i] - exact(&g.point(i))).abs() < 1e-11);
        }
    }

    #[test]
    fn maximum_principle_with_nonnegative_potential() {
        let d = domain(9);
        let g = d.grid();
        let op = EllipticOperator::new(g, &identity(), SolverSettings::default());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = BoundaryField::new(g, (0..g.boundary().len()).map(|_| rng.gen_range(-1.0..1.0)).collect(), crate::geometry::Support::General).unwrap();
        let (u, _) = op.solve_linear(&PotentialField::constant(g, 1.0), &f, None).unwrap();
        let (lo, hi) = f.values.iter().fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(*v), b.max(*v)));
        for &i in g.unknowns() {
            assert!(u.values[i] <= hi + 1e-12 && u.values[i] >= lo - 1e-12);
        }
        assert!(u.max_abs() <= f.max_abs() + 1e-12);
    }

    #[test]
    fn semilinear_reduces_to_linear_cases() {
        let d = domain(9);
        let g = d.grid();
        let op = EllipticOperator::new(g, &identity(), SolverSettings { tol_lin: 1e-12, tol_newton: 1e-12, ..Default::default() });
        let f = BoundaryField::from_fn(g, |p| (p[0] + 2.0 * p[1]).sin() * p[2]);
        let zero = crate::nonlinearity::builtin("zero", &[]).unwrap();
        let (u0, _) = op.solve_semilinear(&zero, &f, None).unwrap();
        let (l0, _) = op.solve_linear(&PotentialField::constant(g, 0.0), &f, None).unwrap();
        for i in 0..g.len() {
            assert!((u0.values[i] - l0.values[i]).abs() < 1e-10);
        }
        let lin = crate::nonlinearity::builtin("linear", &[2.5]).unwrap();
        let (u1, _) = op.solve_semilinear(&lin, &f, None).unwrap();
        let (l1, _) = op.solve_linear(&PotentialField::constant(g, 2.5), &f, None).unwrap();
        for i in 0..g.len() {
            assert!((u1.values[i] - l1.values[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn cubic_with_unit_trace_stays_between_zero_and_one() {
        let d = domain(9);
        let g = d.grid();
        let op = EllipticOperator::new(g, &identity(), SolverSettings::default());
        let cubic = crate::nonlinearity::builtin("cubic", &[1.0, 0.0]).unwrap();
        let f = BoundaryField::from_fn(g, |_| 1.0);
        let (u, stats) = op.solve_semilinear(&cubic, &f, None).unwrap();
        assert!(stats.iterations > 0);
        let centre = u.values[g.lattice().index([4, 4, 4])];
        assert!(centre > 0.0 && centre < 1.0);
        // decreasing toward the centre along an axis
        let line: Vec<f64> = (0..=4).map(|k| u.values[g.lattice().index([k, 4, 4])]).collect();
        assert!(line.windows(2).all(|w| w[1] < w[0]), "{line:?}");
    }

    #[test]
    fn large_cubic_data_converges() {
        let d = domain(9);
        let g = d.grid();
        let op = EllipticOperator::new(g, &identity(), SolverSettings::default());
        let cubic = crate::nonlinearity::builtin("cubic", &[1.0, 0.0]).unwrap();
        let f = BoundaryField::from_fn(g, |p| 40.0 * (3.0 * p[0]).cos());
        let (u, stats) = op.solve_semilinear(&cubic, &f, None).unwrap();
        let r = op.interior_residual(&u, Coefficient::Nonlinear(&cubic)).unwrap();
        assert!(r.iter().all(|v| v.is_finite()));
        assert!(*stats.residual_history.last().unwrap() < 1e-6);
    }

    #[test]
    fn flux_is_independent_of_extension() {
        let d = domain(9);
        let g = d.grid();
        let op = EllipticOperator::new(g, &identity(), SolverSettings { tol_lin: 1e-14, ..Default::default() });
        let sigma = PotentialField::from_fn(g, |p| 1.0 + p[0] * p[1]);
        let f = BoundaryField::from_fn(g, |p| p[0] - p[1] * p[2]);
        let (u, _) = op.solve_linear(&sigma, &f, None).unwrap();
        let phi = BoundaryField::from_fn(g, |p| (p[0] * 3.0).cos());
        let mut v1 = Field::zeros(g);
        for (k, &b) in g.boundary().iter().enumerate() {
            v1.values[b] = phi.values[k];
        }
        let mut v2 = v1.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &i in g.unknowns() {
            v2.values[i] = rng.gen_range(-1.0..1.0);
        }
        let p1 = op.energy_pairing(&u, &v1, Coefficient::Potential(&sigma)).unwrap();
        let p2 = op.energy_pairing(&u, &v2, Coefficient::Potential(&sigma)).unwrap();
        assert!((p1 - p2).abs() <= 1e-12 * p1.abs(), "{p1} vs {p2}");
    }

    #[test]
    fn pairing_symmetry_and_zero() {
        let d = domain(9);
        let g = d.grid();
        let op = EllipticOperator::new(g, &identity(), SolverSettings::default());
        let sigma = PotentialField::from_fn(g, |p| 0.5 + p[2]);
        let u = Field::from_fn(g, |p| p[0].sin() + p[1]);
        let v = Field::from_fn(g, |p| p[2] * p[0]);
        let z = Field::zeros(g);
        assert_eq!(op.energy_pairing(&z, &z, Coefficient::Potential(&sigma)).unwrap(), 0.0);
        let a = op.energy_pairing(&u, &v, Coefficient::Potential(&sigma)).unwrap();
        let b = op.energy_pairing(&v, &u, Coefficient::Potential(&sigma)).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn affine_against_interior_test_function_vanishes() {
        let d = domain(17);
        let g = d.grid();
        let op = EllipticOperator::new(g, &identity(), SolverSettings::default());
        let zero = PotentialField::constant(g, 0.0);
        let u = Field::from_fn(g, |p| 1.0 - 2.0 * p[0] + 0.5 * p[2]);
        let v = Field::from_fn(g, |p| {
            let b = p[0] * (1.0 - p[0]) * p[1] * (1.0 - p[1]) * p[2] * (1.0 - p[2]);
            if b <= 0.0 { 0.0 } else { b * 64.0 }
        });
        let s = op.energy_pairing(&u, &v, Coefficient::Potential(&zero)).unwrap();
        assert!(s.abs() < 1e-13, "{s}");
        let other = Field::zeros(&domain(9).grid().clone());
        assert!(op.energy_pairing(&u, &other, Coefficient::Potential(&zero)).is_err());
    }

    #[test]
    fn lambda1_scaling_and_coarse_bound() {
        let exact = 3.0 * std::f64::consts::PI.powi(2);
        let d = domain(9);
        let l = estimate_lambda1(&d, 1e-10).unwrap();
        assert!(l.value < exact);
        // the discrete eigenvalue of the 7-point Laplacian is known in closed form
        let h = d.h();
        let discrete = 3.0 * 4.0 / (h * h) * (std::f64::consts::PI * h / 2.0).sin().powi(2);
        assert!((l.value - discrete).abs() < 1e-8 * discrete);
        let geo = GeometryDescriptor { side: 2.0, padding: 1.0 };
        let big = build_domain(3, 9, &geo).unwrap();
        let lb = estimate_lambda1(&big, 1e-10).unwrap();
        assert!((lb.value * 4.0 - l.value).abs() < 1e-8 * l.value);
    }
}
