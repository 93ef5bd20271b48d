//! TOML run configuration with defaults and validation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::elliptic::{Conductivity, SolverSettings};
use crate::error::{Error, Result};
use crate::geometry::{build_domain, build_patches, extend_domain, Face, GeometryDescriptor};
use crate::nonlinearity::NonlinearitySpec;
use crate::probes::{default_delta_sweep, ProbeKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub nodes: usize,
    pub face: String,
    pub r0: f64,
    pub r1: f64,
    pub padding: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig { nodes: 33, face: "z+".into(), r0: 0.4, r1: 0.47, padding: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConductivityConfig {
    pub matrix: [[f64; 3]; 3],
    pub kappa: f64,
}

impl Default for ConductivityConfig {
    fn default() -> Self {
        ConductivityConfig { matrix: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], kappa: 0.5 }
    }
}

impl ConductivityConfig {
    pub fn build(&self) -> Result<Conductivity> {
        Conductivity::from_rows(self.matrix, self.kappa)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol_lin: f64,
    pub tol_newton: f64,
    pub max_newton: usize,
    pub max_cg: usize,
    pub continuation_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let s = SolverSettings::default();
        SolverConfig {
            tol_lin: s.tol_lin,
            tol_newton: s.tol_newton,
            max_newton: s.max_newton,
            max_cg: s.max_cg,
            continuation_steps: s.continuation_steps,
        }
    }
}

impl SolverConfig {
    pub fn settings(&self) -> SolverSettings {
        SolverSettings {
            tol_lin: self.tol_lin,
            tol_newton: self.tol_newton,
            max_newton: self.max_newton,
            max_cg: self.max_cg,
            continuation_steps: self.continuation_steps,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    /// Explicit δ values; empty means the default geometric sweep.
    pub deltas: Vec<f64>,
    pub count: usize,
    pub kind: ProbeKind,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig { deltas: vec![], count: 4, kind: ProbeKind::Corrector }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub tau: f64,
    pub points: usize,
    /// Radius around `x_*` on which the anchor trace equals 1.
    pub plateau: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { tau: 1.0, points: 9, plateau: 0.05 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NonlinearityConfig {
    /// Term probed in the recovery sweep.
    pub unknown: NonlinearitySpec,
    /// Known comparison term.
    pub reference: NonlinearitySpec,
    /// Linear term used for the flat-curve check.
    pub linear: NonlinearitySpec,
    /// Terms for the finite-difference check of the linearization.
    pub frechet: Vec<NonlinearitySpec>,
    /// Base term of the stability family.
    pub stability_base: NonlinearitySpec,
}

impl Default for NonlinearityConfig {
    fn default() -> Self {
        NonlinearityConfig {
            unknown: NonlinearitySpec::new("cubic", &[1.0, 0.0]),
            reference: NonlinearitySpec::new("zero", &[]),
            linear: NonlinearitySpec::new("linear", &[1.0]),
            frechet: vec![NonlinearitySpec::new("cubic", &[1.0, 0.0]), NonlinearitySpec::new("sine", &[1.0])],
            stability_base: NonlinearitySpec::new("cubic", &[1.0, 0.0]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdentityConfig {
    pub pairs: usize,
    pub extensions: usize,
    pub tol_lin: f64,
    /// Tolerance of the forward solve behind the extension-independence check.
    pub flux_tol_lin: f64,
}

impl Default for IdentityConfig {
    fn default() -> Self {
        IdentityConfig { pairs: 5, extensions: 10, tol_lin: 1e-13, flux_tol_lin: 1e-15 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrechetConfig {
    pub nodes: usize,
    pub t: f64,
    pub epsilons: Vec<f64>,
    pub tol_lin: f64,
    pub tol_newton: f64,
}

impl Default for FrechetConfig {
    fn default() -> Self {
        FrechetConfig { nodes: 17, t: 0.5, epsilons: vec![1e-2, 1e-3, 1e-4, 1e-5], tol_lin: 1e-14, tol_newton: 1e-16 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingConfig {
    pub nodes: usize,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig { nodes: 65 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Lambda1Config {
    pub coarse_nodes: usize,
    pub fine_nodes: usize,
    pub tol: f64,
}

impl Default for Lambda1Config {
    fn default() -> Self {
        Lambda1Config { coarse_nodes: 17, fine_nodes: 33, tol: 1e-10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecoverSigmaConfig {
    pub nodes: usize,
    /// Constant difference `c₀ = σ₁ - σ₂`, realized as `σ₂ = base`, `σ₁ = base + c₀`.
    pub c0: f64,
    pub base: f64,
    /// Decay radius of the bump potential `exp(-|x - x₀|²/radius²)`.
    pub bump_radius: f64,
}

impl Default for RecoverSigmaConfig {
    fn default() -> Self {
        RecoverSigmaConfig { nodes: 65, c0: 1.0, base: 0.5, bump_radius: 0.3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecoverAprimeConfig {
    pub nodes: usize,
}

impl Default for RecoverAprimeConfig {
    fn default() -> Self {
        RecoverAprimeConfig { nodes: 33 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityConfig {
    pub nodes: usize,
    pub epsilons: Vec<f64>,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig { nodes: 17, epsilons: vec![0.05, 0.0930, 0.1732, 0.3224, 0.6] }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentsConfig {
    pub identity: IdentityConfig,
    pub frechet: FrechetConfig,
    pub scaling: ScalingConfig,
    pub lambda1: Lambda1Config,
    pub recover_sigma: RecoverSigmaConfig,
    pub recover_aprime: RecoverAprimeConfig,
    pub stability: StabilityConfig,
}

/// Pass/fail thresholds; every gate on the exit status lives here.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub identity_rel: f64,
    pub flux_rel: f64,
    pub frechet_slope: [f64; 2],
    pub h_half_slope: [f64; 2],
    pub kernel_slope: [f64; 2],
    pub corrector_ratio: f64,
    pub lambda1_rel: f64,
    pub sigma_constant_rel: f64,
    pub sigma_bump_rel: f64,
    pub sigma_antisymmetry: f64,
    pub aprime_linear_rel: f64,
    pub aprime_even_rel: f64,
    pub stability_spread: f64,
    pub stability_min_rows: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            identity_rel: 1e-9,
            flux_rel: 1e-12,
            frechet_slope: [0.9, 1.1],
            h_half_slope: [-1.85, -1.15],
            kernel_slope: [0.15, 0.85],
            corrector_ratio: 2.0,
            lambda1_rel: 0.02,
            sigma_constant_rel: 0.05,
            sigma_bump_rel: 0.25,
            sigma_antisymmetry: 1e-14,
            aprime_linear_rel: 0.10,
            aprime_even_rel: 0.15,
            stability_spread: 10.0,
            stability_min_rows: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: String,
    pub geometry: GeometryConfig,
    pub conductivity: ConductivityConfig,
    pub solver: SolverConfig,
    pub probes: ProbeConfig,
    pub sweep: SweepConfig,
    pub nonlinearities: NonlinearityConfig,
    pub experiments: ExperimentsConfig,
    pub thresholds: Thresholds,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 20_240_917,
            output_dir: "results".into(),
            geometry: GeometryConfig::default(),
            conductivity: ConductivityConfig::default(),
            solver: SolverConfig::default(),
            probes: ProbeConfig::default(),
            sweep: SweepConfig::default(),
            nonlinearities: NonlinearityConfig::default(),
            experiments: ExperimentsConfig::default(),
            thresholds: Thresholds::default(),
        }
    }
}

fn field<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Config(format!("{name}: {e}")))
}

fn require(name: &str, ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!("{name}: {}", msg())))
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::ConfigParse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::ConfigParse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::ConfigParse(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn face(&self) -> Result<Face> {
        field("geometry.face", self.geometry.face.parse())
    }

    pub fn descriptor(&self) -> GeometryDescriptor {
        GeometryDescriptor { side: 1.0, padding: self.geometry.padding }
    }

    /// δ sweep for a grid with `nodes` per axis.
    pub fn deltas(&self, nodes: usize) -> Result<Vec<f64>> {
        let h = 1.0 / (nodes - 1) as f64;
        if self.probes.deltas.is_empty() {
            field("probes.count", default_delta_sweep(h, self.geometry.r0, self.probes.count))
        } else {
            Ok(self.probes.deltas.clone())
        }
    }

    /// Checks every value against the preconditions of the stage that uses it.
    /// Only cheap geometry construction is performed.
    pub fn validate(&self) -> Result<()> {
        let face = self.face()?;
        field("conductivity", self.conductivity.build())?;
        let s = &self.solver;
        require("solver.tol_lin", s.tol_lin > 0.0 && s.tol_lin < 1.0, || format!("must lie in (0, 1), got {}", s.tol_lin))?;
        require("solver.tol_newton", s.tol_newton > 0.0 && s.tol_newton < 1.0, || {
            format!("must lie in (0, 1), got {}", s.tol_newton)
        })?;
        require("solver.max_cg", s.max_cg > 0, || "must be positive".into())?;
        require("solver.max_newton", s.max_newton > 0, || "must be positive".into())?;
        let sweep = &self.sweep;
        require("sweep.tau", sweep.tau > 0.0, || format!("must be positive, got {}", sweep.tau))?;
        require("sweep.points", sweep.points >= 3 && sweep.points % 2 == 1, || {
            format!("must be odd and ≥ 3 so that t = 0 is on the grid, got {}", sweep.points)
        })?;
        require("sweep.plateau", sweep.plateau > 0.0 && sweep.plateau < self.geometry.r0, || {
            format!("must lie in (0, r0), got {}", sweep.plateau)
        })?;
        let n = &self.nonlinearities;
        field("nonlinearities.unknown", n.unknown.build())?;
        field("nonlinearities.reference", n.reference.build())?;
        field("nonlinearities.linear", n.linear.build())?;
        field("nonlinearities.stability_base", n.stability_base.build())?;
        for (k, spec) in n.frechet.iter().enumerate() {
            field(&format!("nonlinearities.frechet[{k}]"), spec.build())?;
        }
        require("probes.count", self.probes.count >= 3 || !self.probes.deltas.is_empty(), || {
            "need at least three δ values for slope fits".into()
        })?;
        let e = &self.experiments;
        let grids = [
            ("geometry.nodes", self.geometry.nodes, true),
            ("experiments.scaling.nodes", e.scaling.nodes, true),
            ("experiments.recover_sigma.nodes", e.recover_sigma.nodes, true),
            ("experiments.recover_aprime.nodes", e.recover_aprime.nodes, true),
            ("experiments.frechet.nodes", e.frechet.nodes, false),
            ("experiments.stability.nodes", e.stability.nodes, false),
        ];
        for (name, nodes, probes) in grids {
            let domain = field(name, build_domain(3, nodes, &self.descriptor()))?;
            let patches = field("geometry.r0/r1", build_patches(&domain, face, self.geometry.r0, self.geometry.r1))?;
            if probes {
                let ext = field("geometry.r0", extend_domain(&domain, &patches))?;
                let deltas = field("probes.deltas", self.deltas(nodes))?;
                for d in deltas {
                    field("probes.deltas", crate::probes::place_singularity(&ext, domain.h(), d).map(|_| ()))?;
                }
            }
        }
        require("experiments.identity.pairs", e.identity.pairs > 0, || "must be positive".into())?;
        require("experiments.frechet.epsilons", e.frechet.epsilons.len() >= 4, || "need at least four values".into())?;
        require("experiments.frechet.epsilons", e.frechet.epsilons.iter().all(|v| *v > 0.0), || {
            "values must be positive".into()
        })?;
        require("experiments.lambda1", e.lambda1.coarse_nodes >= 8 && e.lambda1.fine_nodes == 2 * e.lambda1.coarse_nodes - 1, || {
            "fine grid must halve the coarse spacing".into()
        })?;
        require("experiments.stability.epsilons", !e.stability.epsilons.is_empty(), || "must not be empty".into())?;
        require("experiments.recover_sigma.bump_radius", e.recover_sigma.bump_radius > 0.0, || "must be positive".into())?;
        let t = &self.thresholds;
        for (name, r) in [("frechet_slope", t.frechet_slope), ("h_half_slope", t.h_half_slope), ("kernel_slope", t.kernel_slope)] {
            require(&format!("thresholds.{name}"), r[0] <= r[1], || format!("range [{}, {}] is empty", r[0], r[1]))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let c = RunConfig::default();
        let s = c.to_toml_string().unwrap();
        let back = RunConfig::from_toml_str(&s).unwrap();
        assert_eq!(c, back);
        assert_eq!(back.to_toml_string().unwrap(), s);
    }

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn field_level_messages() {
        let mut c = RunConfig::default();
        c.geometry.r1 = 0.55;
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("geometry.r0/r1"), "{msg}");
        let mut c = RunConfig::default();
        c.sweep.points = 8;
        assert!(c.validate().unwrap_err().to_string().contains("sweep.points"));
        let mut c = RunConfig::default();
        c.probes.deltas = vec![0.05, 0.1, 0.2];
        assert!(c.validate().unwrap_err().to_string().contains("probes.deltas"));
        assert!(RunConfig::from_toml_str("[geometry]\nnodez = 3").is_err());
    }
}
