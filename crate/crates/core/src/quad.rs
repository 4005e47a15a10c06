//! Scalar quadrature used for closed-form gains.

/// Adaptive Simpson on `[a, b]` to absolute tolerance `tol`.
pub(crate) fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    // Split into a few panels first so short periodic features are not missed.
    let panels = 8;
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let lo = a + i as f64 * h;
            let hi = if i + 1 == panels { b } else { lo + h };
            let fa = f(lo);
            let fb = f(hi);
            let fm = f(0.5 * (lo + hi));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            refine(f, lo, hi, fa, fm, fb, whole, tol / panels as f64, 48)
        })
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn refine(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol || (b - a) <= 1e-14 * (1.0 + a.abs()) {
        return left + right + delta / 15.0;
    }
    refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_kinked_function() {
        let v = adaptive_simpson(&|t: f64| t.sin().abs(), 0.0, 2.0 * std::f64::consts::PI, 1e-13);
        assert!((v - 4.0).abs() < 1e-11, "{v}");
    }

    #[test]
    fn polynomial_is_exact() {
        let v = adaptive_simpson(&|t| t * t * t - t, -1.0, 3.0, 1e-14);
        assert!((v - (81.0 / 4.0 - 4.5 - 0.25 + 0.5)).abs() < 1e-12);
    }
}
