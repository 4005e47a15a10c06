//! JSON experiment configuration and its translation into core types.

use std::path::Path;

use delaystab::models::{
    build_elasticity, build_scalar, build_wave, ElasticityModelConfig, EnergyLayout, Region, WaveModelConfig, INITIAL_DATA_VARIABLES,
};
use delaystab::solver::{Method, SolverConfig};
use delaystab::{
    DelayFunction, DelayProblem, Expr, FeedbackOperator, GainFunction, GeneratorOperator, HistorySegment, Interpolation, Nonlinearity,
    SemigroupCertificate,
};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: ModelSpec,
    pub delay: DelaySpec,
    pub gain: GainSpec,
    /// Required for `scalar` and `linear` models; continuum models take their history from the initial data.
    #[serde(default)]
    pub history: Option<HistorySpec>,
    #[serde(default)]
    pub nonlinearity: Option<NonlinearitySpec>,
    pub solver: SolverSpec,
    #[serde(default)]
    pub analysis: AnalysisSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    /// `u' = -a u + b k(t) u(t - τ(t))`.
    Scalar { a: f64, b: f64 },
    /// `U' = A U + k(t) B U(t - τ(t))` in the metric `xᵀ M x` (identity when absent).
    Linear {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        #[serde(default)]
        metric: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        certificate: Option<DeclaredCertificate>,
    },
    Wave(ContinuumSpec),
    Elasticity {
        #[serde(flatten)]
        base: ContinuumSpec,
        lambda: f64,
        mu: f64,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeclaredCertificate {
    pub m: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContinuumSpec {
    pub lengths: Vec<f64>,
    pub interior_nodes: Vec<usize>,
    pub damping: f64,
    pub damping_region: Region,
    pub delay_region: Region,
    #[serde(default = "one")]
    pub wave_speed: f64,
    /// Expressions in `x, y, t`, one per component.
    pub displacement: Vec<String>,
    pub velocity: Vec<String>,
    #[serde(default = "default_history_nodes")]
    pub history_nodes: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelaySpec {
    Constant { tau: f64 },
    Expression { expr: String, upper: f64, #[serde(default)] lower: f64 },
    Grid { times: Vec<f64>, values: Vec<f64>, upper: f64, #[serde(default)] lower: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GainSpec {
    Constant { value: f64 },
    PiecewiseConstant { breakpoints: Vec<f64>, values: Vec<f64> },
    PiecewiseLinear { times: Vec<f64>, values: Vec<f64> },
    Expression { expr: String, #[serde(default)] period: Option<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HistorySpec {
    Constant { value: Vec<f64> },
    /// One expression in `t` per component, sampled on `nodes` equally spaced times of `[-τ̄, 0]`.
    Expression {
        components: Vec<String>,
        #[serde(default = "default_history_samples")]
        nodes: usize,
        #[serde(default)]
        interpolation: Interpolation,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearitySpec {
    /// `G(u) = L u / (1 + ‖u‖)`.
    Saturation { lipschitz: f64 },
    /// An expression in `u` applied to each component with declared Lipschitz constant.
    Componentwise { expr: String, lipschitz: f64 },
    Linear { matrix: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub dt: f64,
    pub t_final: f64,
    #[serde(default)]
    pub method: Method,
    #[serde(default = "default_picard_tolerance")]
    pub picard_tolerance: f64,
    #[serde(default = "default_picard_iterations")]
    pub picard_max_iterations: usize,
    #[serde(default = "default_window_safety")]
    pub window_safety: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    #[serde(default = "default_omega_fraction")]
    pub omega_fraction: f64,
    #[serde(default = "default_grid_density")]
    pub grid_density: usize,
    /// Number of equally spaced `ω'` in `[0, ω)` tried by the envelope fit.
    #[serde(default = "default_omega_prime_count")]
    pub omega_prime_count: usize,
    /// Explicit `ω'` grid; overrides `omega_prime_count`.
    #[serde(default)]
    pub omega_primes: Option<Vec<f64>>,
    /// Time at which the fitted bound is optimised; defaults to `t_final`.
    #[serde(default)]
    pub t_target: Option<f64>,
    /// Envelope horizon; defaults to `t_final`.
    #[serde(default)]
    pub envelope_horizon: Option<f64>,
    /// User-supplied `(γ, ω')`, checked instead of fitted.
    #[serde(default)]
    pub envelope: Option<EnvelopeSpec>,
    #[serde(default = "default_compare_tolerance")]
    pub compare_tolerance: f64,
    /// Oracle step is `dt / oracle_refinement`.
    #[serde(default = "default_oracle_refinement")]
    pub oracle_refinement: usize,
    #[serde(default = "default_oracle_max_dim")]
    pub oracle_max_dim: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeSpec {
    pub gamma: f64,
    pub omega_prime: f64,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        serde_json::from_str("{}").expect("every analysis field has a default")
    }
}

fn one() -> f64 {
    1.0
}
fn default_history_nodes() -> usize {
    8
}
fn default_history_samples() -> usize {
    65
}
fn default_picard_tolerance() -> f64 {
    1e-12
}
fn default_picard_iterations() -> usize {
    200
}
fn default_window_safety() -> f64 {
    0.5
}
fn default_omega_fraction() -> f64 {
    0.95
}
fn default_grid_density() -> usize {
    64
}
fn default_omega_prime_count() -> usize {
    128
}
fn default_compare_tolerance() -> f64 {
    1e-6
}
fn default_oracle_refinement() -> usize {
    16
}
fn default_oracle_max_dim() -> usize {
    64
}

/// Reads a config; the error names the offending key path.
pub fn load(path: &Path) -> Result<(Config, serde_json::Value), Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let raw: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: invalid JSON: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let config: Config = serde_path_to_error::deserialize(de).map_err(|e| {
        let at = e.path().to_string();
        let inner = e.inner().to_string();
        let key = missing_field(&inner).map(|f| if at == "." { f.to_string() } else { format!("{at}.{f}") }).unwrap_or(at);
        Failure::config(format!("{}: at `{key}`: {inner}", path.display()))
    })?;
    Ok((config, raw))
}

fn missing_field(msg: &str) -> Option<&str> {
    let rest = msg.strip_prefix("missing field `")?;
    rest.split('`').next()
}

/// A problem plus, for continuum models, its energy layout.
pub struct Built {
    pub problem: DelayProblem,
    pub layout: Option<EnergyLayout>,
}

fn matrix(rows: &[Vec<f64>], name: &str) -> Result<DMatrix<f64>, Failure> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(Failure::config(format!("`{name}` must be a non-empty rectangular matrix")));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

fn expr_of(source: &str, vars: &[&str], key: &str) -> Result<Expr, Failure> {
    Expr::parse(source, vars).map_err(|e| Failure::config(format!("`{key}`: {e}")))
}

impl Config {
    pub fn solver_config(&self) -> Result<SolverConfig, Failure> {
        let s = &self.solver;
        let cfg = SolverConfig {
            dt: s.dt,
            picard_tolerance: s.picard_tolerance,
            picard_max_iterations: s.picard_max_iterations,
            window_safety: s.window_safety,
            ..SolverConfig::default()
        };
        cfg.validate().map_err(|e| Failure::config(format!("`solver`: {e}")))?;
        if !(s.t_final > 0.0 && s.t_final.is_finite()) {
            return Err(Failure::config("`solver.t_final` must be positive"));
        }
        Ok(cfg)
    }

    pub fn delay_function(&self) -> Result<DelayFunction, Failure> {
        let d = match &self.delay {
            DelaySpec::Constant { tau } => DelayFunction::constant(*tau),
            DelaySpec::Expression { expr, upper, lower } => {
                DelayFunction::expression(expr_of(expr, &["t"], "delay.expr")?, *upper, *lower)
            }
            DelaySpec::Grid { times, values, upper, lower } => DelayFunction::grid(times.clone(), values.clone(), *upper, *lower),
        };
        d.map_err(|e| Failure::config(format!("`delay`: {e}")))
    }

    pub fn gain_function(&self) -> Result<GainFunction, Failure> {
        let k = match &self.gain {
            GainSpec::Constant { value } => GainFunction::constant(*value),
            GainSpec::PiecewiseConstant { breakpoints, values } => GainFunction::piecewise_constant(breakpoints.clone(), values.clone()),
            GainSpec::PiecewiseLinear { times, values } => GainFunction::piecewise_linear(times.clone(), values.clone()),
            GainSpec::Expression { expr, period } => GainFunction::expression(expr_of(expr, &["t"], "gain.expr")?, *period),
        };
        k.map_err(|e| Failure::config(format!("`gain`: {e}")))
    }

    fn history_segment(&self, tau_bar: f64, dim: usize) -> Result<HistorySegment, Failure> {
        let spec = self.history.as_ref().ok_or_else(|| Failure::config("at `history`: missing field `history`"))?;
        let h = match spec {
            HistorySpec::Constant { value } => HistorySegment::constant(tau_bar, DVector::from_column_slice(value)),
            HistorySpec::Expression { components, nodes, interpolation } => {
                let exprs = components
                    .iter()
                    .enumerate()
                    .map(|(i, c)| expr_of(c, &["t"], &format!("history.components[{i}]")))
                    .collect::<Result<Vec<_>, _>>()?;
                HistorySegment::from_fn(tau_bar, *nodes, *interpolation, |t| DVector::from_iterator(exprs.len(), exprs.iter().map(|e| e.eval1(t))))
            }
        }
        .map_err(|e| Failure::config(format!("`history`: {e}")))?;
        if h.dim() != dim {
            return Err(Failure::config(format!("`history` has {} components, the model has {dim}", h.dim())));
        }
        Ok(h)
    }

    fn continuum(&self, spec: &ContinuumSpec) -> Result<WaveModelConfig, Failure> {
        let exprs = |list: &[String], key: &str| {
            list.iter()
                .enumerate()
                .map(|(i, s)| expr_of(s, &INITIAL_DATA_VARIABLES, &format!("model.{key}[{i}]")))
                .collect::<Result<Vec<_>, _>>()
        };
        Ok(WaveModelConfig {
            lengths: spec.lengths.clone(),
            interior_nodes: spec.interior_nodes.clone(),
            damping: spec.damping,
            damping_region: spec.damping_region.clone(),
            delay_region: spec.delay_region.clone(),
            wave_speed: spec.wave_speed,
            gain: self.gain_function()?,
            delay: self.delay_function()?,
            displacement: exprs(&spec.displacement, "displacement")?,
            velocity: exprs(&spec.velocity, "velocity")?,
            history_nodes: spec.history_nodes,
        })
    }

    /// Assembles the problem; every failure here is a configuration error.
    pub fn build(&self) -> Result<Built, Failure> {
        let model_err = |e: delaystab::Error| Failure::config(format!("`model`: {e}"));
        let mut built = match &self.model {
            ModelSpec::Scalar { a, b } => {
                let delay = self.delay_function()?;
                let history = self.history_segment(delay.upper_bound(), 1)?;
                Built { problem: build_scalar(*a, *b, self.gain_function()?, delay, history).map_err(model_err)?, layout: None }
            }
            ModelSpec::Linear { a, b, metric, certificate } => {
                let a = matrix(a, "model.a")?;
                let g = match metric {
                    Some(m) => GeneratorOperator::new(a, matrix(m, "model.metric")?),
                    None => GeneratorOperator::with_identity_metric(a),
                }
                .map_err(model_err)?;
                let fb = FeedbackOperator::new(matrix(b, "model.b")?, &g).map_err(model_err)?;
                let delay = self.delay_function()?;
                let history = self.history_segment(delay.upper_bound(), g.dim())?;
                let cert = match certificate {
                    Some(c) => Some(
                        SemigroupCertificate::declared(&g, c.m, c.omega, self.analysis.grid_density)
                            .map_err(|e| Failure::hypothesis(format!("declared certificate: {e}")))?,
                    ),
                    None => None,
                };
                let p = DelayProblem::new(g, fb, self.gain_function()?, delay, history).map_err(model_err)?;
                Built { problem: match cert { Some(c) => p.with_certificate(c), None => p }, layout: None }
            }
            ModelSpec::Wave(spec) => {
                let m = build_wave(&self.continuum(spec)?).map_err(model_err)?;
                Built { problem: m.problem, layout: Some(m.layout) }
            }
            ModelSpec::Elasticity { base, lambda, mu } => {
                let m = build_elasticity(&ElasticityModelConfig { base: self.continuum(base)?, lambda: *lambda, mu: *mu }).map_err(model_err)?;
                Built { problem: m.problem, layout: Some(m.layout) }
            }
        };
        if let Some(spec) = &self.nonlinearity {
            let g = built.problem.generator();
            let n = match spec {
                NonlinearitySpec::Saturation { lipschitz } => Nonlinearity::saturation(*lipschitz),
                NonlinearitySpec::Componentwise { expr, lipschitz } => {
                    Nonlinearity::componentwise(expr_of(expr, &["u"], "nonlinearity.expr")?, *lipschitz)
                }
                NonlinearitySpec::Linear { matrix: m } => Nonlinearity::linear(matrix(m, "nonlinearity.matrix")?, g),
            }
            .map_err(|e| Failure::config(format!("`nonlinearity`: {e}")))?;
            built.problem = built.problem.with_nonlinearity(n).map_err(|e| Failure::config(format!("`nonlinearity`: {e}")))?;
        }
        Ok(built)
    }
}
