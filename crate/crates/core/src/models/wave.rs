use nalgebra::{DMatrix, DVector};

use super::energy::EnergyLayout;
use super::mesh::{Mesh, Region};
use crate::error::{invalid, Result};
use crate::expr::Expr;
use crate::types::{DelayFunction, DelayProblem, FeedbackOperator, GainFunction, GeneratorOperator, HistorySegment, Interpolation, State};

/// Damped wave equation with internal delayed velocity feedback,
/// `u_tt - c²Δu + a χ_O u_t + k(t) χ_Õ u_t(t - τ(t)) = 0` with Dirichlet boundary.
#[derive(Debug, Clone)]
pub struct WaveModelConfig {
    /// Domain `[0, ℓ]` or `[0, ℓx] × [0, ℓy]`.
    pub lengths: Vec<f64>,
    /// Interior nodes per axis; spacing is `ℓ / (n + 1)`.
    pub interior_nodes: Vec<usize>,
    pub damping: f64,
    pub damping_region: Region,
    pub delay_region: Region,
    pub wave_speed: f64,
    pub gain: GainFunction,
    pub delay: DelayFunction,
    /// One expression in `x, y, t` per displacement component.
    pub displacement: Vec<Expr>,
    pub velocity: Vec<Expr>,
    /// Time samples of the history on `[-τ̄, 0]`.
    pub history_nodes: usize,
}

/// Lamé system `u_tt - μΔu - (λ+μ)∇div u + a χ_O u_t + k(t) χ_Õ u_t(t - τ(t)) = 0`.
/// `base.wave_speed` is ignored.
#[derive(Debug, Clone)]
pub struct ElasticityModelConfig {
    pub base: WaveModelConfig,
    pub lambda: f64,
    pub mu: f64,
}

/// A built model with what [`super::compute_energy`] needs.
#[derive(Debug, Clone)]
pub struct ContinuumModel {
    pub problem: DelayProblem,
    pub layout: EnergyLayout,
}

/// The variables every initial-data expression may use.
pub const INITIAL_DATA_VARIABLES: [&str; 3] = ["x", "y", "t"];

pub fn build_wave(cfg: &WaveModelConfig) -> Result<ContinuumModel> {
    if !(cfg.wave_speed > 0.0 && cfg.wave_speed.is_finite()) {
        return Err(invalid("wave speed must be positive"));
    }
    let mesh = Mesh::new(&cfg.lengths, &cfg.interior_nodes)?;
    let w = mesh.stiffness() * (cfg.wave_speed * cfg.wave_speed);
    assemble(cfg, &mesh, 1, w)
}

pub fn build_elasticity(cfg: &ElasticityModelConfig) -> Result<ContinuumModel> {
    if !(cfg.lambda > 0.0 && cfg.mu > 0.0 && cfg.lambda.is_finite() && cfg.mu.is_finite()) {
        return Err(invalid("Lamé constants must be positive"));
    }
    let mesh = Mesh::new(&cfg.base.lengths, &cfg.base.interior_nodes)?;
    let d = mesh.dim();
    let div = mesh.divergence();
    let w = mesh.stiffness().kronecker(&DMatrix::identity(d, d)) * cfg.mu + div.transpose() * div * (cfg.lambda + cfg.mu);
    assemble(&cfg.base, &mesh, d, w)
}

// State (u, v) with u, v ∈ ℝ^{nodes·components}; metric diag(W, m I) so that ‖U‖² = 2·(kinetic + potential).
fn assemble(cfg: &WaveModelConfig, mesh: &Mesh, components: usize, w: DMatrix<f64>) -> Result<ContinuumModel> {
    if !(cfg.damping >= 0.0 && cfg.damping.is_finite()) {
        return Err(invalid("damping coefficient must be non-negative"));
    }
    if cfg.displacement.len() != components || cfg.velocity.len() != components {
        return Err(invalid(format!("initial data needs {components} displacement and velocity expressions")));
    }
    let damp = expand(&mesh.mask(&cfg.damping_region, "damping")?, components);
    let delay_mask = expand(&mesh.mask(&cfg.delay_region, "delay")?, components);
    let n = mesh.count() * components;
    let m = mesh.cell();

    let mut a = DMatrix::zeros(2 * n, 2 * n);
    a.view_mut((0, n), (n, n)).fill_with_identity();
    a.view_mut((n, 0), (n, n)).copy_from(&(&w * (-1.0 / m)));
    for (i, on) in damp.iter().enumerate() {
        if *on {
            a[(n + i, n + i)] = -cfg.damping;
        }
    }
    let mut metric = DMatrix::zeros(2 * n, 2 * n);
    metric.view_mut((0, 0), (n, n)).copy_from(&w);
    for i in 0..n {
        metric[(n + i, n + i)] = m;
    }
    let mut b = DMatrix::zeros(2 * n, 2 * n);
    for (i, on) in delay_mask.iter().enumerate() {
        if *on {
            b[(n + i, n + i)] = -1.0;
        }
    }
    let g = GeneratorOperator::new(a, metric)?;
    let fb = FeedbackOperator::with_declared_norm(b, &g, 1.0)?;

    let tau_bar = cfg.delay.upper_bound();
    let nodes = cfg.history_nodes.max(2);
    let sample = |t: f64| -> State {
        let mut s = DVector::zeros(2 * n);
        for node in 0..mesh.count() {
            let c = mesh.coords(node);
            let vars = [c[0], c.get(1).copied().unwrap_or(0.0), t];
            for k in 0..components {
                s[node * components + k] = cfg.displacement[k].eval(&vars);
                s[n + node * components + k] = cfg.velocity[k].eval(&vars);
            }
        }
        s
    };
    let history = HistorySegment::from_fn(tau_bar, nodes, Interpolation::Linear, sample)?;
    let problem = DelayProblem::new(g, fb, cfg.gain.clone(), cfg.delay.clone(), history)?;
    let layout = EnergyLayout { n_u: n, mass: m, stiffness: w, delay_mask };
    Ok(ContinuumModel { problem, layout })
}

fn expand(mask: &[bool], components: usize) -> Vec<bool> {
    mask.iter().flat_map(|m| std::iter::repeat_n(*m, components)).collect()
}
