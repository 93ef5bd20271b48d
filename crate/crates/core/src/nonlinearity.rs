//! Semilinear terms `a(z)` with their derivatives, growth metadata and the
//! checks for the growth, lower-derivative and derivative-majorant conditions.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Nondecreasing majorant γ with `|a'(z)| ≤ γ(|z|)`.
#[derive(Clone)]
pub enum Majorant {
    Constant(f64),
    ClosedForm(ScalarFn),
    /// Running maximum of `|a'|` over `[-s, s]`, tabulated on a uniform grid of `s`.
    Sampled { step: f64, values: Vec<f64> },
}

impl Majorant {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Majorant::Constant(c) => *c,
            Majorant::ClosedForm(f) => f(s),
            Majorant::Sampled { step, values } => {
                let k = (s / step).ceil() as usize;
                values[k.min(values.len() - 1)]
            }
        }
    }
}

/// Constants of the growth condition `|a(z)| ≤ μ₁ + μ₂|z|^α`, `a'(z) ≥ -𝔠`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthBounds {
    pub alpha: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub c_lower: f64,
}

/// A C¹ semilinear term. Evaluators are pure and shareable across threads.
#[derive(Clone)]
pub struct Nonlinearity {
    name: String,
    eval: ScalarFn,
    deriv: ScalarFn,
    pub bounds: GrowthBounds,
    pub gamma: Majorant,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity").field("name", &self.name).field("bounds", &self.bounds).finish()
    }
}

/// Name plus parameter list, as written in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonlinearitySpec {
    pub name: String,
    #[serde(default)]
    pub params: Vec<f64>,
}

impl NonlinearitySpec {
    pub fn new(name: &str, params: &[f64]) -> Self {
        NonlinearitySpec { name: name.to_string(), params: params.to_vec() }
    }

    pub fn build(&self) -> Result<Nonlinearity> {
        builtin(&self.name, &self.params)
    }
}

impl Nonlinearity {
    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        (self.eval)(z)
    }

    #[inline]
    pub fn deriv(&self, z: f64) -> f64 {
        (self.deriv)(z)
    }

    /// User-supplied term; γ is the running maximum of `|a'|` sampled on `[-range, range]`.
    pub fn custom(
        name: &str,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        deriv: impl Fn(f64) -> f64 + Send + Sync + 'static,
        bounds: GrowthBounds,
        range: f64,
    ) -> Self {
        let samples = 4096;
        let step = range / samples as f64;
        let mut values = Vec::with_capacity(samples + 1);
        let mut running = 0.0f64;
        for k in 0..=samples {
            let s = k as f64 * step;
            running = running.max(deriv(s).abs()).max(deriv(-s).abs());
            values.push(running);
        }
        Nonlinearity {
            name: name.to_string(),
            eval: Arc::new(eval),
            deriv: Arc::new(deriv),
            bounds,
            gamma: Majorant::Sampled { step, values },
        }
    }

    /// `self + eps * exp(-z²)`. Used for the perturbation families of the
    /// stability experiment.
    pub fn with_gaussian_bump(&self, eps: f64) -> Self {
        let base_eval = self.eval.clone();
        let base_deriv = self.deriv.clone();
        let base_gamma = self.gamma.clone();
        // max |d/dz exp(-z²)| = sqrt(2) exp(-1/2)
        let bump_slope = std::f64::consts::SQRT_2 * (-0.5f64).exp();
        let bounds = GrowthBounds {
            mu1: self.bounds.mu1 + eps.abs(),
            c_lower: self.bounds.c_lower + eps.abs() * bump_slope,
            ..self.bounds
        };
        Nonlinearity {
            name: format!("{}+{eps}*gauss", self.name),
            eval: Arc::new(move |z| base_eval(z) + eps * (-z * z).exp()),
            deriv: Arc::new(move |z| base_deriv(z) - 2.0 * eps * z * (-z * z).exp()),
            bounds,
            gamma: Majorant::ClosedForm(Arc::new(move |s| base_gamma.eval(s) + eps.abs() * bump_slope)),
        }
    }
}

fn param(params: &[f64], i: usize, default: f64) -> f64 {
    params.get(i).copied().unwrap_or(default)
}

/// Built-in terms: `zero`, `linear [λ]`, `cubic [c₃, c₁]`, `sine [μ]`, `logistic [μ]`.
pub fn builtin(name: &str, params: &[f64]) -> Result<Nonlinearity> {
    let nl = match name {
        "zero" => Nonlinearity {
            name: "zero".into(),
            eval: Arc::new(|_| 0.0),
            deriv: Arc::new(|_| 0.0),
            bounds: GrowthBounds { alpha: 0.0, mu1: 1.0, mu2: 1.0, c_lower: 0.0 },
            gamma: Majorant::Constant(0.0),
        },
        "linear" => {
            let lambda = param(params, 0, 1.0);
            Nonlinearity {
                name: format!("linear({lambda})"),
                eval: Arc::new(move |z| lambda * z),
                deriv: Arc::new(move |_| lambda),
                bounds: GrowthBounds { alpha: 1.0, mu1: 1.0, mu2: lambda.abs().max(f64::MIN_POSITIVE), c_lower: (-lambda).max(0.0) },
                gamma: Majorant::Constant(lambda.abs()),
            }
        }
        "cubic" => {
            let c3 = param(params, 0, 1.0);
            let c1 = param(params, 1, 0.0);
            // |c₁ z| ≤ |c₁|(1 + |z|³)
            Nonlinearity {
                name: format!("cubic({c3},{c1})"),
                eval: Arc::new(move |z| c3 * z * z * z + c1 * z),
                deriv: Arc::new(move |z| 3.0 * c3 * z * z + c1),
                bounds: GrowthBounds {
                    alpha: 3.0,
                    mu1: 1.0 + c1.abs(),
                    mu2: c3.abs() + c1.abs(),
                    c_lower: if c3 >= 0.0 { (-c1).max(0.0) } else { f64::INFINITY },
                },
                gamma: Majorant::ClosedForm(Arc::new(move |s| 3.0 * c3.abs() * s * s + c1.abs())),
            }
        }
        "sine" => {
            let mu = param(params, 0, 1.0);
            Nonlinearity {
                name: format!("sine({mu})"),
                eval: Arc::new(move |z| mu * z.sin()),
                deriv: Arc::new(move |z| mu * z.cos()),
                bounds: GrowthBounds { alpha: 0.0, mu1: mu.abs(), mu2: mu.abs(), c_lower: mu.abs() },
                gamma: Majorant::Constant(mu.abs()),
            }
        }
        "logistic" => {
            let mu = param(params, 0, 1.0);
            Nonlinearity {
                name: format!("logistic({mu})"),
                eval: Arc::new(move |z| mu * (1.0 / (1.0 + (-z).exp()) - 0.5)),
                deriv: Arc::new(move |z| {
                    let e = (-z.abs()).exp();
                    mu * e / ((1.0 + e) * (1.0 + e))
                }),
                bounds: GrowthBounds {
                    alpha: 0.0,
                    mu1: 0.5 * mu.abs(),
                    mu2: 0.5 * mu.abs(),
                    c_lower: if mu >= 0.0 { 0.0 } else { 0.25 * mu.abs() },
                },
                gamma: Majorant::Constant(0.25 * mu.abs()),
            }
        }
        other => return Err(Error::Config(format!("unknown nonlinearity '{other}'"))),
    };
    if !nl.bounds.mu1.is_finite() || nl.bounds.mu1 <= 0.0 || nl.bounds.mu2 <= 0.0 {
        return Err(Error::Config(format!("growth constants of '{name}' must be positive")));
    }
    Ok(nl)
}

/// Growth cap `α_n`, Hölder exponent `β_n` and the resulting stability exponent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionParams {
    pub n: usize,
    pub alpha_n: f64,
    pub beta_n: f64,
    /// Integrability exponent for `n ≥ 4` (metadata only).
    pub p: Option<f64>,
    /// Auxiliary exponent for `n = 4` (metadata only).
    pub r: Option<f64>,
    pub q_n: Option<f64>,
}

impl DimensionParams {
    pub fn three() -> Self {
        DimensionParams { n: 3, alpha_n: 3.0, beta_n: 0.5, p: None, r: None, q_n: None }
    }

    /// Parameters for `n ≥ 4` with `n/2 < p < n`; `r ∈ [1, 2)` is used only for `n = 4`.
    pub fn higher(n: usize, p: f64, r: f64) -> Result<Self> {
        let nf = n as f64;
        if n < 4 || !(p > nf / 2.0 && p < nf) {
            return Err(Error::Config(format!("need n ≥ 4 and n/2 < p < n (n = {n}, p = {p})")));
        }
        let q_n = if n > 4 {
            2.0 * nf / (nf - 4.0)
        } else {
            if !(1.0..2.0).contains(&r) {
                return Err(Error::Config(format!("n = 4 needs 1 ≤ r < 2 (got {r})")));
            }
            2.0 * r / (2.0 - r)
        };
        Ok(DimensionParams {
            n,
            alpha_n: q_n / p,
            beta_n: 2.0 - nf / p,
            p: Some(p),
            r: if n == 4 { Some(r) } else { None },
            q_n: Some(q_n),
        })
    }

    /// Exponent `β_n / (2 + β_n)` of the Hölder stability estimate.
    pub fn stability_exponent(&self) -> f64 {
        self.beta_n / (2.0 + self.beta_n)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub condition: String,
    pub z: f64,
    /// Amount by which the condition fails (positive).
    pub excess: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub growth_ok: bool,
    pub lower_derivative_ok: bool,
    pub majorant_ok: bool,
    pub alpha_ok: bool,
    pub coercive_ok: bool,
    pub worst: Option<Violation>,
    pub messages: Vec<String>,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.growth_ok && self.lower_derivative_ok && self.majorant_ok && self.alpha_ok && self.coercive_ok
    }
}

/// Samples the growth, derivative and majorant conditions on `[-rho, rho]` and
/// checks `α ≤ α_n` and `𝔠 < κ λ₁`.
pub fn validate_assumptions(
    a: &Nonlinearity,
    dims: &DimensionParams,
    kappa: f64,
    lambda1: f64,
    rho: f64,
) -> AssumptionReport {
    let b = a.bounds;
    let samples = 2001;
    let mut worst: Option<Violation> = None;
    let record = |cond: &str, z: f64, excess: f64, worst: &mut Option<Violation>| {
        if worst.as_ref().map(|w| excess > w.excess).unwrap_or(true) {
            *worst = Some(Violation { condition: cond.to_string(), z, excess });
        }
    };
    let (mut growth_ok, mut lower_ok, mut majorant_ok) = (true, true, true);
    for k in 0..samples {
        let z = -rho + 2.0 * rho * k as f64 / (samples - 1) as f64;
        let val = a.eval(z).abs();
        let cap = b.mu1 + b.mu2 * z.abs().powf(b.alpha);
        let slack = 1e-12 * (1.0 + cap);
        if val > cap + slack {
            growth_ok = false;
            record("growth |a(z)| ≤ μ₁ + μ₂|z|^α", z, val - cap, &mut worst);
        }
        let d = a.deriv(z);
        if d < -b.c_lower - 1e-12 * (1.0 + d.abs()) {
            lower_ok = false;
            record("a'(z) ≥ -𝔠", z, -b.c_lower - d, &mut worst);
        }
        let g = a.gamma.eval(z.abs());
        if d.abs() > g + 1e-12 * (1.0 + g) {
            majorant_ok = false;
            record("|a'(z)| ≤ γ(|z|)", z, d.abs() - g, &mut worst);
        }
    }
    let mut messages = Vec::new();
    let alpha_ok = b.alpha <= dims.alpha_n;
    if !alpha_ok {
        messages.push(format!("α = {} exceeds α_n = {}", b.alpha, dims.alpha_n));
        record("α ≤ α_n", f64::NAN, b.alpha - dims.alpha_n, &mut worst);
    }
    let coercive_ok = b.c_lower >= 0.0 && b.c_lower < kappa * lambda1;
    if !coercive_ok {
        messages.push(format!("𝔠 ≥ κλ₁ ({} ≥ {})", b.c_lower, kappa * lambda1));
        let excess = if b.c_lower.is_finite() { b.c_lower - kappa * lambda1 } else { f64::MAX };
        record("𝔠 < κλ₁", f64::NAN, excess, &mut worst);
    }
    if !growth_ok {
        messages.push("growth bound violated".into());
    }
    if !lower_ok {
        messages.push("derivative lower bound violated".into());
    }
    if !majorant_ok {
        messages.push("derivative majorant violated".into());
    }
    AssumptionReport {
        growth_ok,
        lower_derivative_ok: lower_ok,
        majorant_ok,
        alpha_ok,
        coercive_ok,
        worst,
        messages,
    }
}
