use std::collections::hash_map::Entry;
use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::error::{invalid, Result};
use crate::semigroup::propagator;
use crate::types::{State, Trajectory};

/// Largest `‖U(t) - S(t)U₀ - ∫₀ᵗ S(t-s)[G(U(s)) + k(s)BU(s-τ(s))] ds‖_H` over `sample_times`.
///
/// The integral uses Simpson's rule on every trajectory cell, with gain breakpoints and the
/// sample times added as cell boundaries.
pub fn duhamel_residual(tr: &Trajectory, sample_times: &[f64]) -> Result<f64> {
    let p = tr.problem();
    let g = p.generator();
    let t_end = sample_times.iter().cloned().fold(0.0, f64::max);
    if sample_times.iter().any(|t| !(*t >= 0.0)) || t_end > tr.final_time() {
        return Err(invalid("sample times must lie in the trajectory range"));
    }
    let mut nodes: Vec<f64> = tr.grid().iter().cloned().filter(|t| *t <= t_end).collect();
    nodes.extend(p.gain().breakpoints_in(0.0, t_end));
    nodes.extend(sample_times.iter().cloned());
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();

    let integrand = |s: f64, lo: f64, hi: f64| -> Result<State> {
        let u = tr.eval(s)?;
        let mut h = p.nonlinear_term(&u).unwrap_or_else(|| State::zeros(p.dim()));
        let k = p.gain().eval_within(s, lo, hi);
        if k != 0.0 {
            h += p.feedback().matrix() * tr.eval(s - p.delay().eval(s)?)? * k;
        }
        Ok(h)
    };

    let mut cache: HashMap<u64, (DMatrix<f64>, DMatrix<f64>)> = HashMap::new();
    let mut mild = p.initial_state().clone();
    let mut residuals: HashMap<u64, f64> = HashMap::new();
    let mut record = |t: f64, v: &State| -> Result<()> {
        if sample_times.contains(&t) {
            residuals.insert(t.to_bits(), g.norm(&(tr.eval(t)? - v)));
        }
        Ok(())
    };
    record(0.0, &mild)?;
    for w in nodes.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let d = hi - lo;
        if let Entry::Vacant(slot) = cache.entry(d.to_bits()) {
            slot.insert((propagator(g, d)?, propagator(g, 0.5 * d)?));
        }
        let (full, half) = &cache[&d.to_bits()];
        let quad = (full * integrand(lo, lo, hi)? + half * integrand(0.5 * (lo + hi), lo, hi)? * 4.0 + integrand(hi, lo, hi)?) * (d / 6.0);
        mild = full * mild + quad;
        record(hi, &mild)?;
    }
    Ok(residuals.values().cloned().fold(0.0, f64::max))
}
