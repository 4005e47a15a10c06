use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::{State, Trajectory};

/// Where the displacement, velocity and delay region sit inside the state vector.
#[derive(Debug, Clone)]
pub struct EnergyLayout {
    /// Length of the displacement block; the velocity block follows it.
    pub n_u: usize,
    /// Volume element per node.
    pub mass: f64,
    /// Gram matrix of the potential energy (twice the potential).
    pub stiffness: DMatrix<f64>,
    /// Velocity entries inside the delay region.
    pub delay_mask: Vec<bool>,
}

impl EnergyLayout {
    fn kinetic(&self, s: &State) -> f64 {
        0.5 * self.mass * s.rows(self.n_u, self.n_u).norm_squared()
    }

    fn potential(&self, s: &State) -> f64 {
        let u = s.rows(0, self.n_u);
        0.5 * u.dot(&(&self.stiffness * u))
    }

    fn masked_velocity(&self, s: &State) -> f64 {
        let v = s.rows(self.n_u, self.n_u);
        self.mass * self.delay_mask.iter().zip(v.iter()).filter(|(m, _)| **m).map(|(_, x)| x * x).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub times: Vec<f64>,
    pub kinetic: Vec<f64>,
    pub potential: Vec<f64>,
    /// `½ ∫_{t-τ̄}^t |k(s)| ∫_Õ |u_t(x, s)|² dx ds`.
    pub window: Vec<f64>,
    pub total: Vec<f64>,
}

/// Energy at each requested time; the window term uses the trapezoid rule on the
/// trajectory and history nodes with gain breakpoints inserted.
pub fn compute_energy(tr: &Trajectory, layout: &EnergyLayout, times: &[f64]) -> Result<EnergyReport> {
    let mut r = EnergyReport { times: times.to_vec(), kinetic: vec![], potential: vec![], window: vec![], total: vec![] };
    for &t in times {
        if !(t >= 0.0 && t <= tr.final_time()) {
            return Err(Error::Domain { t, lo: 0.0, hi: tr.final_time() });
        }
        let s = tr.eval(t)?;
        let (kin, pot) = (layout.kinetic(&s), layout.potential(&s));
        let win = 0.5 * window_integral(tr, t, &|x: &State| layout.masked_velocity(x))?;
        r.kinetic.push(kin);
        r.potential.push(pot);
        r.window.push(win);
        r.total.push(kin + pot + win);
    }
    Ok(r)
}

/// `∫_{t-τ̄}^t |k(s)| q(U(s)) ds` by the trapezoid rule on trajectory and history nodes,
/// with gain breakpoints inserted so that `k` is continuous on every piece.
pub(crate) fn window_integral(tr: &Trajectory, t: f64, q: &dyn Fn(&State) -> f64) -> Result<f64> {
    let p = tr.problem();
    let lo = t - p.tau_bar();
    let mut nodes: Vec<f64> = vec![lo, t];
    nodes.extend(p.history().grid().iter().cloned().filter(|x| *x > lo && *x < t));
    nodes.extend(tr.grid().iter().cloned().filter(|x| *x > lo && *x < t));
    nodes.extend(p.gain().breakpoints_in(lo, t));
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();
    let mut sum = 0.0;
    let mut prev = q(&tr.eval(nodes[0])?);
    for w in nodes.windows(2) {
        let next = q(&tr.eval(w[1])?);
        let k0 = p.gain().eval_within(w[0], w[0], w[1]).abs();
        let k1 = p.gain().eval_within(w[1], w[0], w[1]).abs();
        sum += 0.5 * (w[1] - w[0]) * (k0 * prev + k1 * next);
        prev = next;
    }
    Ok(sum)
}
