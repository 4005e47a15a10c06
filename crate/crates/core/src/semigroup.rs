//! The semigroup `S(t) = e^{tA}` and decay certificates `‖S(t)‖ ≤ M e^{-ωt}`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::types::{spectral_norm, GeneratorOperator, State};

const MAX_DOUBLINGS: usize = 40;

/// `e^{tA}` as a dense matrix.
pub fn propagator(g: &GeneratorOperator, t: f64) -> Result<DMatrix<f64>> {
    if !(t >= 0.0) {
        return Err(Error::Domain { t, lo: 0.0, hi: f64::INFINITY });
    }
    let p = (g.matrix() * t).exp();
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("e^(tA) at t = {t}")));
    }
    Ok(p)
}

/// `S(t)x`.
pub fn apply_semigroup(g: &GeneratorOperator, t: f64, x: &State) -> Result<State> {
    if x.len() != g.dim() {
        return Err(Error::Dimension { expected: g.dim(), found: x.len() });
    }
    if t == 0.0 {
        return Ok(x.clone());
    }
    Ok(propagator(g, t)? * x)
}

/// Metric operator norm of `e^{tA}`.
pub fn operator_norm_semigroup(g: &GeneratorOperator, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain { t, lo: 0.0, hi: f64::INFINITY });
    }
    let a = g.to_euclidean(g.matrix());
    Ok(spectral_norm(&(a * t).exp()))
}

/// Largest real part of the eigenvalues of `m`.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    m.clone().complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Constants `(M, ω)` with the sampled norms that justify them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemigroupCertificate {
    pub m: f64,
    pub omega: f64,
    /// `T_h`: the envelope is sampled on `[0, T_h]` and extended by powers of `S(T_h)`.
    pub horizon: f64,
    /// `(t, ‖e^{tA}‖_H)` pairs.
    pub evidence: Vec<(f64, f64)>,
    /// `‖e^{T_h A}‖ e^{ω T_h}`, at most 1.
    pub tail_factor: f64,
    /// Factor covering the gaps between samples, already folded into `m`.
    pub sampling_inflation: f64,
}

impl SemigroupCertificate {
    pub fn bound(&self, t: f64) -> f64 {
        self.m * (-self.omega * t).exp()
    }

    /// Certificate for user-declared constants, checked on a sample grid.
    pub fn declared(g: &GeneratorOperator, m: f64, omega: f64, grid_density: usize) -> Result<Self> {
        if !(m >= 1.0 && omega > 0.0 && m.is_finite() && omega.is_finite()) {
            return Err(invalid("certificate needs M >= 1 and ω > 0"));
        }
        let cert = build_evidence(g, omega, grid_density, Some(m))?;
        cert.verify(g)?;
        Ok(cert)
    }

    /// Rechecks every evidence point and the tail closure.
    pub fn verify(&self, g: &GeneratorOperator) -> Result<()> {
        for &(t, norm) in &self.evidence {
            let b = self.bound(t);
            if norm > b * (1.0 + 1e-12) {
                return Err(Error::Estimation(format!(
                    "‖e^(tA)‖ = {norm} exceeds M e^(-ωt) = {b} at t = {t}"
                )));
            }
        }
        let q = operator_norm_semigroup(g, self.horizon)? * (self.omega * self.horizon).exp();
        if q > 1.0 + 1e-12 {
            return Err(Error::Estimation(format!("tail closure fails: q = {q} > 1")));
        }
        Ok(())
    }
}

/// Shrinks the spectral abscissa by `omega_fraction`, grows `T_h` until the tail closes,
/// and takes `M` as the inflated maximum of the sampled envelope.
pub fn estimate_certificate(g: &GeneratorOperator, omega_fraction: f64, grid_density: usize) -> Result<SemigroupCertificate> {
    if !(omega_fraction > 0.0 && omega_fraction < 1.0) {
        return Err(invalid("omega_fraction must lie in (0, 1)"));
    }
    let alpha = spectral_abscissa(g.matrix());
    if !(alpha < 0.0) {
        return Err(Error::NotExponentiallyStable { abscissa: alpha });
    }
    build_evidence(g, omega_fraction * -alpha, grid_density, None)
}

fn build_evidence(g: &GeneratorOperator, omega: f64, grid_density: usize, declared_m: Option<f64>) -> Result<SemigroupCertificate> {
    if grid_density == 0 {
        return Err(invalid("grid_density must be positive"));
    }
    let a = g.to_euclidean(g.matrix());
    let mut horizon = 1.0 / omega;
    let mut closed = false;
    let mut q = f64::INFINITY;
    for _ in 0..MAX_DOUBLINGS {
        q = spectral_norm(&(&a * horizon).exp()) * (omega * horizon).exp();
        if q <= 1.0 + 1e-12 {
            closed = true;
            break;
        }
        horizon *= 2.0;
    }
    if !closed {
        return Err(Error::Estimation(format!(
            "tail closure not reached up to T_h = {horizon} (last q = {q})"
        )));
    }

    let steps = ((horizon * omega * grid_density as f64).ceil() as usize).max(grid_density);
    let dt = horizon / steps as f64;
    let step = (&a * dt).exp();
    let mut e = DMatrix::identity(g.dim(), g.dim());
    let mut evidence = Vec::with_capacity(steps + 1);
    let mut peak: f64 = 0.0;
    for i in 0..=steps {
        let t = if i == steps { horizon } else { i as f64 * dt };
        let norm = if i == 0 { 1.0 } else { spectral_norm(&e) };
        evidence.push((t, norm));
        peak = peak.max(norm * (omega * t).exp());
        e = &e * &step;
    }
    // Between samples, ‖e^{(t_i + s)A}‖ e^{ω(t_i + s)} ≤ ‖e^{t_i A}‖ e^{ω t_i} e^{s(μ + ω)} with μ the log-norm.
    let mu = g.log_norm(g.matrix());
    let inflation = (dt * (mu + omega).max(0.0)).exp();
    let m = match declared_m {
        Some(m) => m,
        None => (peak * inflation).max(1.0),
    };
    Ok(SemigroupCertificate { m, omega, horizon, evidence, tail_factor: q, sampling_inflation: inflation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn gen(m: DMatrix<f64>) -> GeneratorOperator {
        GeneratorOperator::with_identity_metric(m).unwrap()
    }

    #[test]
    fn closed_forms() {
        let g = gen(dmatrix![-1.0, 0.0; 0.0, -2.0]);
        let x = apply_semigroup(&g, 1.0, &dvector![1.0, 1.0]).unwrap();
        assert!((x[0] - (-1f64).exp()).abs() < 1e-15);
        assert!((x[1] - (-2f64).exp()).abs() < 1e-15);
        assert_eq!(apply_semigroup(&g, 0.0, &dvector![3.0, 4.0]).unwrap(), dvector![3.0, 4.0]);

        let j = gen(dmatrix![-1.0, 1.0; 0.0, -1.0]);
        for t in [0.3, 1.0, 2.5] {
            let x = apply_semigroup(&j, t, &dvector![0.0, 1.0]).unwrap();
            assert!((x[0] - t * (-t).exp()).abs() < 1e-14);
            assert!((x[1] - (-t).exp()).abs() < 1e-14);
        }
        assert!(operator_norm_semigroup(&j, 1.0).unwrap() > (-1f64).exp());
        assert!(apply_semigroup(&g, -1.0, &dvector![1.0, 1.0]).is_err());
    }

    #[test]
    fn scalar_and_normal_certificates() {
        let c = estimate_certificate(&gen(dmatrix![-2.0]), 0.95, 64).unwrap();
        assert!((c.omega - 1.9).abs() < 1e-15);
        assert_eq!(c.m, 1.0);
        let n = estimate_certificate(&gen(dmatrix![-2.0, 1.0; 1.0, -2.0]), 0.95, 64).unwrap();
        assert!((n.omega - 0.95).abs() < 1e-12);
        assert_eq!(n.m, 1.0);
    }

    #[test]
    fn jordan_block_needs_large_m() {
        let g = gen(dmatrix![-1.0, 10.0; 0.0, -1.0]);
        let c = estimate_certificate(&g, 0.95, 64).unwrap();
        assert!(c.m > 1.0);
        c.verify(&g).unwrap();
        assert!(matches!(
            estimate_certificate(&gen(dmatrix![0.1]), 0.95, 64),
            Err(Error::NotExponentiallyStable { .. })
        ));
    }

    #[test]
    fn declared_certificate_rejects_too_fast_rate() {
        let g = gen(dmatrix![-1.0]);
        assert!(SemigroupCertificate::declared(&g, 1.0, 1.0, 16).is_ok());
        assert!(SemigroupCertificate::declared(&g, 1.0, 1.5, 16).is_err());
    }
}
