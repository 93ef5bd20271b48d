//! Boundary recovery of potential differences from probe pairings, the
//! `t`-sweep for `a₁' - a₂'`, its antiderivative and the stability table.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dtn::{DtnEvaluator, SweepAnchor};
use crate::elliptic::{Conductivity, EllipticOperator, PotentialField};
use crate::error::{Error, Result};
use crate::geometry::{BoundaryPatches, DomainGrid, Fnv1a};
use crate::nonlinearity::{validate_assumptions, DimensionParams, Nonlinearity};
use crate::probes::{ProbeBuilder, ProbeFamily, ProbeKind};
use crate::trace::{op_norm, OpNormContext, TraceNorms};

/// Probe families over a δ sweep, tagged with the geometry they were built on.
#[derive(Clone, Debug)]
pub struct ProbeSet {
    pub families: Vec<ProbeFamily>,
    pub fingerprint: u64,
}

/// Hash of everything the calibration depends on besides the potentials.
pub fn geometry_fingerprint(domain: &DomainGrid, patches: &BoundaryPatches, a: &Conductivity, kind: ProbeKind) -> u64 {
    let mut h = Fnv1a::default();
    h.write_u64(domain.grid().id());
    for v in patches.x0 {
        h.write_f64(v);
    }
    h.write_f64(patches.r0);
    h.write_f64(patches.r1);
    for v in a.matrix.iter() {
        h.write_f64(*v);
    }
    h.write_u64(kind as u64);
    h.finish()
}

impl ProbeSet {
    pub fn build(
        domain: &DomainGrid,
        patches: &BoundaryPatches,
        builder: &ProbeBuilder,
        a: &Conductivity,
        deltas: &[f64],
        kind: ProbeKind,
    ) -> Result<Self> {
        if deltas.is_empty() {
            return Err(Error::Config("empty δ sweep".into()));
        }
        let families = deltas.iter().map(|&d| builder.build(domain, d, kind)).collect::<Result<_>>()?;
        Ok(ProbeSet { families, fingerprint: geometry_fingerprint(domain, patches, a, kind) })
    }

    pub fn deltas(&self) -> Vec<f64> {
        self.families.iter().map(|f| f.delta).collect()
    }

    pub fn family(&self, delta: f64) -> Result<&ProbeFamily> {
        self.families
            .iter()
            .find(|f| (f.delta - delta).abs() <= 1e-12 * delta)
            .ok_or_else(|| Error::Calibration(format!("δ = {delta} is not in the probe sweep {:?}", self.deltas())))
    }

    /// Smallest δ whose correctors stay within twice the smallest corrector norm
    /// seen over the sweep; cutoff probes are always accepted.
    pub fn reliable_delta(&self, norms: &TraceNorms) -> Result<f64> {
        let mut per: Vec<(f64, f64)> = Vec::new();
        for f in &self.families {
            if f.correctors.is_empty() {
                per.push((f.delta, 0.0));
                continue;
            }
            let mut worst = 0.0f64;
            for j in 0..f.correctors.len() {
                worst = worst.max(f.corrector_norm(norms, j)?);
            }
            per.push((f.delta, worst));
        }
        let floor = per.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        per.sort_by(|a, b| a.0.total_cmp(&b.0));
        per.iter()
            .find(|p| p.1 <= 2.0 * floor)
            .map(|p| p.0)
            .ok_or_else(|| Error::Calibration("no δ passes the corrector bound check".into()))
    }
}

/// Reference pairings `S_ref(δ)` for the unit potential difference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationProfile {
    pub deltas: Vec<f64>,
    pub s_ref: Vec<f64>,
    pub fingerprint: u64,
}

/// `S_ref(δ)` between `σ₁ ≡ 1` and `σ₂ ≡ 0`.
pub fn calibrate(op: &Arc<EllipticOperator>, patches: &BoundaryPatches, probes: &ProbeSet) -> Result<CalibrationProfile> {
    let g = op.grid();
    let one = DtnEvaluator::linear(op.clone(), PotentialField::constant(g, 1.0), patches)?;
    let zero = DtnEvaluator::linear(op.clone(), PotentialField::constant(g, 0.0), patches)?;
    let s_ref: Vec<f64> = probes
        .families
        .iter()
        .map(|f| crate::probes::probe_pairing_row(&one, &zero, f))
        .collect::<Result<_>>()?;
    for (d, s) in probes.deltas().iter().zip(&s_ref) {
        if !(*s > 0.0) {
            return Err(Error::Calibration(format!(
                "S_ref({d}) = {s:e} is not positive; the probe is under-resolved on this grid"
            )));
        }
    }
    Ok(CalibrationProfile { deltas: probes.deltas(), s_ref, fingerprint: probes.fingerprint })
}

impl CalibrationProfile {
    /// Reference value at a calibrated δ. Other values are rejected, never interpolated.
    pub fn reference(&self, delta: f64, fingerprint: u64) -> Result<f64> {
        if fingerprint != self.fingerprint {
            return Err(Error::Calibration(format!(
                "geometry fingerprint {fingerprint:016x} does not match the calibration ({:016x})",
                self.fingerprint
            )));
        }
        let k = self
            .deltas
            .iter()
            .position(|d| (d - delta).abs() <= 1e-12 * delta)
            .ok_or_else(|| Error::Calibration(format!("δ = {delta} is outside the calibrated grid {:?}", self.deltas)))?;
        let s = self.s_ref[k];
        if !(s.abs() > 1e-300) {
            return Err(Error::Calibration(format!("S_ref({delta}) vanishes")));
        }
        Ok(s)
    }
}

/// `σ̂(x₀) = S(δ) / S_ref(δ)` for two linear evaluators.
pub fn sigma_point_estimate(
    first: &DtnEvaluator,
    second: &DtnEvaluator,
    probes: &ProbeSet,
    cal: &CalibrationProfile,
    delta: f64,
) -> Result<f64> {
    let s_ref = cal.reference(delta, probes.fingerprint)?;
    let s = crate::probes::probe_pairing_row(first, second, probes.family(delta)?)?;
    Ok(s / s_ref)
}

/// One grid point of a recovered curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: f64,
    pub estimate: f64,
    pub delta: f64,
    /// Unscaled pairing `S(δ)` behind the estimate.
    pub pairing: f64,
}

/// Estimates of `(a₁' - a₂')(t)` at `x_*`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveredCurve {
    pub points: Vec<CurvePoint>,
    /// Grid points whose solves failed, with the reason.
    pub failures: Vec<(f64, String)>,
}

impl RecoveredCurve {
    pub fn t(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    pub fn estimates(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.estimate).collect()
    }
}

/// Sweeps `t` over the anchor grid. The unknown coefficient is reached only
/// through its evaluator's linearized, localized DtN map.
pub fn recover_aprime(
    unknown: &DtnEvaluator,
    reference: &DtnEvaluator,
    anchor: &SweepAnchor,
    patches: &BoundaryPatches,
    probes: &ProbeSet,
    cal: &CalibrationProfile,
    delta: f64,
) -> Result<RecoveredCurve> {
    if crate::geometry::distance(&anchor.x_star, &patches.x0) > 1e-12 {
        return Err(Error::Config("recovery needs the probe anchor x₀ to coincide with x_*".into()));
    }
    let s_ref = cal.reference(delta, probes.fingerprint)?;
    let family = probes.family(delta)?;
    let results: Vec<(f64, Result<f64>)> = anchor
        .t_grid
        .par_iter()
        .map(|&t| {
            let run = || -> Result<f64> {
                let d1 = unknown.linearized_many(t, &anchor.h, &family.traces)?;
                let d2 = reference.linearized_many(t, &anchor.h, &family.traces)?;
                let mut k = 0;
                family.pairing_row(|_| {
                    let psi = d1[k].sub(&d2[k]);
                    k += 1;
                    Ok(psi)
                })
            };
            (t, run())
        })
        .collect();
    let mut curve = RecoveredCurve { points: vec![], failures: vec![] };
    for (t, r) in results {
        match r {
            Ok(s) => curve.points.push(CurvePoint { t, estimate: s / s_ref, delta, pairing: s }),
            Err(e) => curve.failures.push((t, e.to_string())),
        }
    }
    Ok(curve)
}

/// `σ_a^t(x_*) = a'(u_a(t·h)(x_*))` read off the forward solution.
pub fn anchor_potential(evaluator: &DtnEvaluator, anchor: &SweepAnchor, t: f64) -> Result<f64> {
    let sigma = evaluator.linearization_potential(&anchor.data(t))?;
    let node = evaluator.operator().grid().boundary()[anchor.x_star_position];
    Ok(sigma.values[node])
}

/// A nonlinearity sampled on a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledCurve {
    pub t: Vec<f64>,
    pub values: Vec<f64>,
}

/// `a₁(t) = a₁(0) + ∫₀ᵗ (a₁' - a₂') + a₂(t) - a₂(0)` by the trapezoid rule.
pub fn integrate_curve(curve: &RecoveredCurve, a2: &Nonlinearity, a1_at_zero: f64) -> Result<SampledCurve> {
    let t = curve.t();
    let d = curve.estimates();
    if t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("t grid must be strictly increasing".into()));
    }
    let zero = t
        .iter()
        .position(|&x| x == 0.0)
        .ok_or_else(|| Error::InvalidInput("t grid must contain 0".into()))?;
    let mut integral = vec![0.0; t.len()];
    for k in zero + 1..t.len() {
        integral[k] = integral[k - 1] + 0.5 * (t[k] - t[k - 1]) * (d[k] + d[k - 1]);
    }
    for k in (0..zero).rev() {
        integral[k] = integral[k + 1] - 0.5 * (t[k + 1] - t[k]) * (d[k] + d[k + 1]);
    }
    let values = t.iter().zip(&integral).map(|(&x, i)| a1_at_zero + i + a2.eval(x) - a2.eval(0.0)).collect();
    Ok(SampledCurve { t, values })
}

/// One perturbation magnitude of the stability experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub epsilon: f64,
    /// `max_t ‖dΛ̃^t_{a₁}(0) - dΛ̃^t_{a₂}(0)‖_op`.
    pub x: f64,
    /// `max_t |a₁'(t) - a₂'(t)|`, computed from the known pair.
    pub y: f64,
    /// `Y / X^θ` with θ the theoretical exponent.
    pub constant: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityTable {
    pub exponent: f64,
    pub rows: Vec<StabilityRow>,
    /// `max_k Y_k / X_k^θ`.
    pub fitted_constant: f64,
    /// Ratio of the largest to the smallest per-row constant (rows with X > 0).
    pub constant_spread: f64,
    /// Least-squares slope of `log Y` against `log X`.
    pub empirical_slope: Option<f64>,
}

/// Inputs shared by the stability runs.
pub struct StabilityInputs<'a> {
    pub op: Arc<EllipticOperator>,
    pub domain: &'a DomainGrid,
    pub patches: &'a BoundaryPatches,
    pub anchor: &'a SweepAnchor,
    pub norms: &'a TraceNorms,
    pub lambda1: f64,
    pub kappa: f64,
}

/// Measures both sides of the Hölder stability inequality for
/// `a₂^{(k)} = a₁ + ε_k e^{-z²}`.
pub fn stability_experiment(inputs: &StabilityInputs<'_>, a1: &Nonlinearity, epsilons: &[f64]) -> Result<StabilityTable> {
    let dims = DimensionParams::three();
    let theta = dims.stability_exponent();
    let tau = inputs.anchor.t_grid.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let rho = 2.0 * tau + 1.0;
    let candidates: Vec<Nonlinearity> = epsilons.iter().map(|&e| a1.with_gaussian_bump(e)).collect();
    for a in std::iter::once(a1).chain(candidates.iter()) {
        let report = validate_assumptions(a, &dims, inputs.kappa, inputs.lambda1, rho);
        if !report.passed() {
            return Err(Error::Config(format!("{} violates the standing assumptions: {:?}", a.name(), report.messages)));
        }
    }
    let domain_basis = inputs.patches.gamma0.clone();
    let codomain_basis = inputs.patches.gamma1.clone();
    let ctx = OpNormContext::new(inputs.norms, &domain_basis, &codomain_basis)?;
    let base = DtnEvaluator::semilinear(inputs.op.clone(), a1.clone(), inputs.patches)?;
    let base_mats = inputs
        .anchor
        .t_grid
        .iter()
        .map(|&t| base.linearized_matrix(t, &inputs.anchor.h, &domain_basis, &codomain_basis))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(epsilons.len());
    for (&eps, a2) in epsilons.iter().zip(&candidates) {
        let other = DtnEvaluator::semilinear(inputs.op.clone(), a2.clone(), inputs.patches)?;
        let mut x = 0.0f64;
        let mut y = 0.0f64;
        for (k, &t) in inputs.anchor.t_grid.iter().enumerate() {
            let m = other.linearized_matrix(t, &inputs.anchor.h, &domain_basis, &codomain_basis)?;
            x = x.max(op_norm(&ctx, &base_mats[k].sub(&m)?, 1e-8)?.value);
            y = y.max((a1.deriv(t) - a2.deriv(t)).abs());
        }
        let constant = if x > 0.0 { y / x.powf(theta) } else if y == 0.0 { 0.0 } else { f64::INFINITY };
        rows.push(StabilityRow { epsilon: eps, x, y, constant });
    }
    let positive: Vec<&StabilityRow> = rows.iter().filter(|r| r.x > 0.0 && r.y > 0.0).collect();
    let fitted_constant = rows.iter().map(|r| r.constant).fold(0.0, f64::max);
    let constant_spread = if positive.is_empty() {
        1.0
    } else {
        let hi = positive.iter().map(|r| r.constant).fold(0.0, f64::max);
        let lo = positive.iter().map(|r| r.constant).fold(f64::INFINITY, f64::min);
        hi / lo
    };
    let empirical_slope = if positive.len() >= 3 {
        let xs: Vec<f64> = positive.iter().map(|r| r.x).collect();
        let ys: Vec<f64> = positive.iter().map(|r| r.y).collect();
        Some(crate::experiment::fit_slope(&xs, &ys)?.slope)
    } else {
        None
    };
    Ok(StabilityTable { exponent: theta, rows, fitted_constant, constant_spread, empirical_slope })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::builtin;

    fn curve(t: &[f64], v: &[f64]) -> RecoveredCurve {
        RecoveredCurve {
            points: t
                .iter()
                .zip(v)
                .map(|(&t, &e)| CurvePoint { t, estimate: e, delta: 0.1, pairing: 0.0 })
                .collect(),
            failures: vec![],
        }
    }

    #[test]
    fn integrate_constant_curve_is_exact() {
        let t: Vec<f64> = (-4..=4).map(|k| k as f64 / 4.0).collect();
        let c = curve(&t, &vec![2.5; t.len()]);
        let zero = builtin("zero", &[]).unwrap();
        let s = integrate_curve(&c, &zero, 0.0).unwrap();
        for (x, v) in s.t.iter().zip(&s.values) {
            assert!((v - 2.5 * x).abs() < 1e-14);
        }
        let a2 = builtin("sine", &[0.5]).unwrap();
        let s = integrate_curve(&curve(&t, &vec![0.0; t.len()]), &a2, a2.eval(0.0)).unwrap();
        for (x, v) in s.t.iter().zip(&s.values) {
            assert!((v - a2.eval(*x)).abs() < 1e-15);
        }
    }

    #[test]
    fn integrate_needs_zero() {
        let c = curve(&[-1.0, -0.3, 0.5, 1.0], &[0.0; 4]);
        assert!(integrate_curve(&c, &builtin("zero", &[]).unwrap(), 0.0).is_err());
    }

    #[test]
    fn calibration_rejects_foreign_geometry_and_unknown_delta() {
        let cal = CalibrationProfile { deltas: vec![0.1, 0.2], s_ref: vec![1.0, 0.5], fingerprint: 7 };
        assert_eq!(cal.reference(0.2, 7).unwrap(), 0.5);
        assert!(matches!(cal.reference(0.2, 8), Err(Error::Calibration(_))));
        assert!(matches!(cal.reference(0.15, 7), Err(Error::Calibration(_))));
    }
}
