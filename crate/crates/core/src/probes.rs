//! Levi parametrix, singularity placement outside the probed face, corrector
//! solves on the extended domain and the resulting probe traces.

use std::io::Write;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::elliptic::{Conductivity, EllipticOperator, Field, PotentialField, SolverSettings};
use crate::error::{Error, Result};
use crate::geometry::{radial_bump, BoundaryField, BoundaryPatches, DomainGrid, ExtendedDomain, Point, Support};
use crate::trace::{BoundaryFunctional, TraceNorms};

/// Surface area of the unit sphere in `ℝⁿ`.
pub fn sphere_area(n: usize) -> f64 {
    // |S^{n-1}| = 2π^{n/2} / Γ(n/2), with Γ at half-integers by recursion
    let half = n as f64 / 2.0;
    let mut gamma = if n % 2 == 0 { 1.0 } else { std::f64::consts::PI.sqrt() };
    let mut x = if n % 2 == 0 { 1.0 } else { 0.5 };
    while x < half {
        gamma *= x;
        x += 1.0;
    }
    2.0 * std::f64::consts::PI.powf(half) / gamma
}

/// `H(x, y) = [A⁻¹(x-y)·(x-y)]^{(2-n)/2} / ((n-2)|S^{n-1}|√det A)` for constant `A`.
#[derive(Clone, Debug)]
pub struct Parametrix {
    pub n: usize,
    a_inv: Matrix3<f64>,
    pub normalization: f64,
}

impl Parametrix {
    pub fn new(a: &Conductivity) -> Self {
        let n = 3;
        let det = a.matrix.determinant();
        Parametrix {
            n,
            a_inv: a.matrix.try_inverse().expect("conductivity is positive definite"),
            normalization: 1.0 / ((n as f64 - 2.0) * sphere_area(n) * det.sqrt()),
        }
    }

    fn split(&self, x: &Point, y: &Point) -> Result<(f64, Vector3<f64>)> {
        let d = Vector3::new(x[0] - y[0], x[1] - y[1], x[2] - y[2]);
        let r = d.norm();
        if r < 1e-12 {
            return Err(Error::Singularity(r));
        }
        let ad = self.a_inv * d;
        Ok((ad.dot(&d), ad))
    }

    pub fn eval(&self, x: &Point, y: &Point) -> Result<f64> {
        let (q, _) = self.split(x, y)?;
        Ok(self.normalization * q.powf((2.0 - self.n as f64) / 2.0))
    }

    /// `∂_{x_j} H(x, y)`.
    pub fn grad(&self, x: &Point, y: &Point, j: usize) -> Result<f64> {
        let (q, ad) = self.split(x, y)?;
        let n = self.n as f64;
        Ok(self.normalization * (2.0 - n) * q.powf(-n / 2.0) * ad[j])
    }
}

/// `y_δ = x₀ + δξ`, checked against `4h ≤ δ ≤ δ₀` and the distance conditions.
pub fn place_singularity(ext: &ExtendedDomain, h: f64, delta: f64) -> Result<Point> {
    let tol = 1e-12;
    if delta < 4.0 * h * (1.0 - tol) || delta > ext.delta0 * (1.0 + tol) {
        return Err(Error::Config(format!(
            "δ = {delta} outside [4h, δ₀] = [{}, {}]",
            4.0 * h,
            ext.delta0
        )));
    }
    let y = ext.singularity_point(delta);
    let to_cube = ext.distance_to_cube(&y);
    let to_boundary = ext.distance_to_boundary(&y);
    if to_cube < delta * (1.0 - tol) || to_boundary < 0.5 * ext.r0 * (1.0 - tol) {
        return Err(Error::Config(format!(
            "singularity at δ = {delta}: dist to Ω̄ = {to_cube}, dist to ∂Ω₀ = {to_boundary} (need ≥ δ and ≥ r0/2 = {})",
            0.5 * ext.r0
        )));
    }
    Ok(y)
}

/// Geometric sweep of `count` values spanning `[max(4h, r₀/8), r₀/2]`.
pub fn default_delta_sweep(h: f64, r0: f64, count: usize) -> Result<Vec<f64>> {
    let lo = (4.0 * h).max(r0 / 8.0);
    let hi = r0 / 2.0;
    if lo > hi * (1.0 + 1e-12) {
        return Err(Error::Config(format!(
            "no admissible δ: max(4h, r0/8) = {lo} exceeds r0/2 = {hi}; refine the grid or enlarge r0"
        )));
    }
    if count < 2 {
        return Ok(vec![hi]);
    }
    let ratio = (hi / lo).powf(1.0 / (count - 1) as f64);
    Ok((0..count).map(|k| if k + 1 == count { hi } else { lo * ratio.powi(k as i32) }).collect())
}

/// How probe traces are made to vanish outside the inner patch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeKind {
    /// `(𝔥 - v)|_Γ` with the corrector `v` solved on the extended domain.
    Corrector,
    /// `ρ·𝔥|_Γ` with a smooth cutoff `ρ` on the inner patch; no extra solve.
    Cutoff,
}

/// Probe data for one singularity depth.
#[derive(Clone, Debug)]
pub struct ProbeFamily {
    pub delta: f64,
    pub y: Point,
    pub kind: ProbeKind,
    /// `f_δ^j`, `j = 0..n`.
    pub traces: Vec<BoundaryField>,
    /// `𝔥_δ^j` sampled at the cube nodes.
    pub kernels: Vec<Field>,
    /// Correctors restricted to the cube grid (empty for cutoff probes).
    pub correctors: Vec<Field>,
}

/// Shared state for building probes: the extended-domain operator and the parametrix.
#[derive(Debug)]
pub struct ProbeBuilder {
    ext: ExtendedDomain,
    ext_op: EllipticOperator,
    zero: PotentialField,
    parametrix: Parametrix,
    h: f64,
    r0: f64,
    x0: Point,
}

impl ProbeBuilder {
    pub fn new(domain: &DomainGrid, patches: &BoundaryPatches, a: &Conductivity, settings: SolverSettings) -> Result<Self> {
        let ext = crate::geometry::extend_domain(domain, patches)?;
        let ext_op = EllipticOperator::new(ext.grid(), a, settings);
        let zero = PotentialField::constant(ext.grid(), 0.0);
        Ok(ProbeBuilder {
            ext,
            ext_op,
            zero,
            parametrix: Parametrix::new(a),
            h: domain.h(),
            r0: patches.r0,
            x0: patches.x0,
        })
    }

    pub fn extended(&self) -> &ExtendedDomain {
        &self.ext
    }

    pub fn parametrix(&self) -> &Parametrix {
        &self.parametrix
    }

    /// Builds `f_δ^j` for all `j`.
    pub fn build(&self, domain: &DomainGrid, delta: f64, kind: ProbeKind) -> Result<ProbeFamily> {
        let y = place_singularity(&self.ext, self.h, delta)?;
        let n = self.parametrix.n;
        let parts: Vec<(BoundaryField, Field, Option<Field>)> =
            (0..n).into_par_iter().map(|j| self.build_one(domain, &y, j, kind)).collect::<Result<_>>()?;
        let mut family = ProbeFamily { delta, y, kind, traces: vec![], kernels: vec![], correctors: vec![] };
        for (f, k, v) in parts {
            family.traces.push(f);
            family.kernels.push(k);
            if let Some(v) = v {
                family.correctors.push(v);
            }
        }
        Ok(family)
    }

    fn build_one(&self, domain: &DomainGrid, y: &Point, j: usize, kind: ProbeKind) -> Result<(BoundaryField, Field, Option<Field>)> {
        let grid = domain.grid();
        let kernel_values: Vec<f64> = (0..grid.len()).map(|i| self.parametrix.grad(&grid.point(i), y, j)).collect::<Result<_>>()?;
        let kernel = Field::from_values(grid, kernel_values)?;
        match kind {
            ProbeKind::Corrector => {
                let eg = self.ext.grid();
                let data: Vec<f64> =
                    eg.boundary().iter().map(|&b| self.parametrix.grad(&eg.point(b), y, j)).collect::<Result<_>>()?;
                let data = BoundaryField::new(eg, data, Support::General)?;
                let (v, _) = self.ext_op.solve_linear(&self.zero, &data, None)?;
                let mut trace = vec![0.0; grid.boundary().len()];
                for (p, &b) in grid.boundary().iter().enumerate() {
                    let e = self.ext.ext_index(b);
                    // v equals the sampled kernel on ∂Ω₀, so this is exactly zero there
                    let hval = match eg.boundary_position(e) {
                        Some(q) => data.values[q],
                        None => kernel.values[b],
                    };
                    trace[p] = hval - v.values[e];
                }
                let restricted: Vec<f64> = (0..grid.len()).map(|i| v.values[self.ext.ext_index(i)]).collect();
                Ok((
                    BoundaryField::new(grid, trace, Support::Gamma0)?,
                    kernel,
                    Some(Field::from_values(grid, restricted)?),
                ))
            }
            ProbeKind::Cutoff => {
                let trace: Vec<f64> = grid
                    .boundary()
                    .iter()
                    .map(|&b| {
                        let x = grid.point(b);
                        let s = crate::geometry::distance(&x, &self.x0);
                        let on_face = domain.on_face(&x, self.ext.face());
                        if on_face && s < self.r0 {
                            radial_bump(s, 0.5 * self.r0, self.r0) * kernel.values[b]
                        } else {
                            0.0
                        }
                    })
                    .collect();
                Ok((BoundaryField::new(grid, trace, Support::Gamma0)?, kernel, None))
            }
        }
    }
}

impl ProbeFamily {
    /// Discrete `L^{2n/(n+2)}(Ω)` norm of `𝔥_δ^j`.
    pub fn kernel_norm(&self, domain: &DomainGrid, j: usize) -> f64 {
        let p = 6.0 / 5.0;
        let mass = domain.grid().mass();
        let s: f64 = self.kernels[j].values.iter().zip(mass).map(|(v, m)| m * v.abs().powf(p)).sum();
        s.powf(1.0 / p)
    }

    /// Discrete `H¹(Ω)` norm of the corrector `v_δ^j`.
    pub fn corrector_norm(&self, norms: &TraceNorms, j: usize) -> Result<f64> {
        let v = self
            .correctors
            .get(j)
            .ok_or_else(|| Error::InvalidInput("cutoff probes carry no corrector".into()))?;
        norms.h1_norm(v)
    }

    /// `Σ_j ⟨ψ_j, f_δ^j⟩ · δ^{n-2}` where `ψ_j = diff(f_δ^j)`.
    pub fn pairing_row(&self, mut diff: impl FnMut(&BoundaryField) -> Result<BoundaryFunctional>) -> Result<f64> {
        let mut s = 0.0;
        for f in &self.traces {
            s += diff(f)?.pair(f);
        }
        Ok(self.delta.powi(self.traces.len() as i32 - 2) * s)
    }

    /// Writes the probe traces as `node,x,y,z,f_1,..,f_n`.
    pub fn write_csv(&self, path: &Path, domain: &DomainGrid) -> Result<()> {
        let grid = domain.grid();
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        let heads: Vec<String> = (1..=self.traces.len()).map(|j| format!("f_{j}")).collect();
        writeln!(w, "node,x,y,z,{}", heads.join(","))?;
        for (p, &b) in grid.boundary().iter().enumerate() {
            if self.traces.iter().all(|f| f.values[p] == 0.0) {
                continue;
            }
            let x = grid.point(b);
            let vals: Vec<String> = self.traces.iter().map(|f| format!("{:e}", f.values[p])).collect();
            writeln!(w, "{b},{},{},{},{}", x[0], x[1], x[2], vals.join(","))?;
        }
        Ok(())
    }
}

/// `S(δ)` for two DtN evaluators: `δ^{n-2} Σ_j ⟨(Λ̃₁ - Λ̃₂) f_δ^j, f_δ^j⟩`.
pub fn probe_pairing_row(
    first: &crate::dtn::DtnEvaluator,
    second: &crate::dtn::DtnEvaluator,
    family: &ProbeFamily,
) -> Result<f64> {
    family.pairing_row(|f| Ok(first.localized(f)?.sub(&second.localized(f)?)))
}
