//! Studentized range distribution.
//!
//! CDF via the standard double integral: the outer integral runs over the
//! chi-based scale estimate, the inner over the location of the maximum,
//! both evaluated by adaptive Simpson quadrature.

use super::StatsError;
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Adaptive Simpson on `f` over `[a, b]` to absolute tolerance `tol`.
fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<f64, StatsError> {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64, StatsError> {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        if depth == 0 {
            return Err(StatsError::QuadratureFailure);
        }
        // Floor the per-level tolerance near machine epsilon; below it the
        // delta is roundoff noise and the recursion could never terminate.
        let child_tol = (0.5 * tol).max(1e-16);
        let l = recurse(f, a, fa, m, fm, left, lm, flm, child_tol, depth - 1)?;
        let r = recurse(f, m, fm, b, fb, right, rm, frm, child_tol, depth - 1)?;
        Ok(l + r)
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 48)
}

/// P(range of `k` iid standard normals <= r).
fn range_cdf(r: f64, k: usize) -> Result<f64, StatsError> {
    if r <= 0.0 {
        return Ok(0.0);
    }
    let km1 = (k - 1) as i32;
    let f = |u: f64| {
        let span = normal_cdf(u) - normal_cdf(u - r);
        normal_pdf(u) * span.powi(km1)
    };
    // The inner tolerance sits far below the outer one: the outer adaptive
    // pass sees the inner result as a noisy function of s, and noise above
    // the outer refinement floor would stall it at full depth.
    Ok((k as f64) * adaptive_simpson(&f, -9.0, 9.0 + r.min(9.0), 1e-12)?)
}

/// CDF of the studentized range with `k` groups and `df` degrees of freedom,
/// to absolute tolerance 1e-7. Monotone non-decreasing in `q`.
pub fn studentized_range_cdf(q: f64, k: usize, df: usize) -> Result<f64, StatsError> {
    if k < 2 || df < 1 {
        return Err(StatsError::InvalidArgument(format!(
            "studentized range needs k >= 2 and df >= 1, got k={k}, df={df}"
        )));
    }
    if q <= 0.0 {
        return Ok(0.0);
    }
    let v = df as f64;
    // log-density of s = chi_df / sqrt(df), evaluated in log space to stay
    // finite at large df.
    let log_const = 0.5 * v * v.ln() - (0.5 * v - 1.0) * std::f64::consts::LN_2 - ln_gamma(0.5 * v);
    let sigma = 1.0 / (2.0 * v).sqrt();
    let lo = (1.0 - 14.0 * sigma).max(1e-8);
    let hi = 1.0 + 14.0 * sigma;
    let inner_err = std::cell::Cell::new(None);
    let f = |s: f64| {
        let log_pdf = log_const + (v - 1.0) * s.ln() - 0.5 * v * s * s;
        let pdf = log_pdf.exp();
        if pdf == 0.0 {
            return 0.0;
        }
        match range_cdf(q * s, k) {
            Ok(p) => pdf * p,
            Err(e) => {
                inner_err.set(Some(e));
                0.0
            }
        }
    };
    let value = adaptive_simpson(&f, lo, hi, 1e-8)?;
    if let Some(e) = inner_err.take() {
        return Err(e);
    }
    Ok(value.clamp(0.0, 1.0))
}
