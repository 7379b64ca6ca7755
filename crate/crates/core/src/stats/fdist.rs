use statrs::function::beta::beta_reg;

use super::StatsError;

const REL_TOL: f64 = 1e-10;

fn check_df(d1: f64, d2: f64) -> Result<(), StatsError> {
    // Satterthwaite degrees of freedom are real-valued and may drop below 1.
    if !(d1.is_finite() && d2.is_finite() && d1 > 0.0 && d2 > 0.0) {
        return Err(StatsError::DomainError(format!("degrees of freedom ({d1}, {d2}) must be positive")));
    }
    Ok(())
}

/// CDF of the F distribution via the regularized incomplete beta function.
pub fn f_cdf(x: f64, d1: f64, d2: f64) -> Result<f64, StatsError> {
    check_df(d1, d2)?;
    if x.is_nan() {
        return Err(StatsError::DomainError("x is NaN".into()));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let z = d1 * x / (d1 * x + d2);
    Ok(beta_reg(d1 / 2.0, d2 / 2.0, z))
}

/// Inverse CDF of the F distribution by bracketing and bisection.
pub fn f_quantile(p: f64, d1: f64, d2: f64) -> Result<f64, StatsError> {
    check_df(d1, d2)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(StatsError::DomainError(format!("probability {p} outside (0, 1)")));
    }
    let cdf = |x: f64| {
        let z = d1 * x / (d1 * x + d2);
        beta_reg(d1 / 2.0, d2 / 2.0, z)
    };
    let mut hi = 1.0;
    while cdf(hi) < p {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(StatsError::DomainError(format!("quantile for p = {p} overflows")));
        }
    }
    let mut lo = if hi > 1.0 { hi / 2.0 } else { 0.0 };
    if lo == 0.0 {
        while hi > 1e-300 && cdf(hi / 2.0) >= p {
            hi /= 2.0;
        }
        lo = hi / 2.0;
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= REL_TOL * 1e-2 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use statrs::function::gamma::ln_gamma;

    /// Density of F(d1, d2).
    fn f_pdf(x: f64, d1: f64, d2: f64) -> f64 {
        let ln_b = ln_gamma(d1 / 2.0) + ln_gamma(d2 / 2.0) - ln_gamma((d1 + d2) / 2.0);
        let ln = 0.5 * (d1 * (d1 * x).ln() + d2 * d2.ln() - (d1 + d2) * (d1 * x + d2).ln()) - x.ln() - ln_b;
        ln.exp()
    }

    /// Trapezoid integral of the density on a sqrt-spaced grid (dense near 0).
    fn cdf_by_integration(q: f64, d1: f64, d2: f64) -> f64 {
        let n = 400_000;
        let s_max = q.sqrt();
        let mut acc = 0.0;
        let g = |s: f64| if s == 0.0 { 0.0 } else { f_pdf(s * s, d1, d2) * 2.0 * s };
        let h = s_max / n as f64;
        let mut prev = g(0.0);
        for i in 1..=n {
            let cur = g(i as f64 * h);
            acc += 0.5 * (prev + cur) * h;
            prev = cur;
        }
        acc
    }

    #[test]
    fn median_of_symmetric_f_is_one() {
        for d in [1.0, 2.0, 5.0, 7.0, 10.0, 100.0] {
            assert!((f_quantile(0.5, d, d).unwrap() - 1.0).abs() < 1e-9, "d = {d}");
        }
    }

    #[test]
    fn quantile_matches_integrated_density() {
        let q = f_quantile(0.975, 2.0, 2.0).unwrap();
        assert!((cdf_by_integration(q, 2.0, 2.0) - 0.975).abs() < 1e-6);
        // F(2,2) has CDF x / (1 + x)
        assert!((q - 39.0).abs() < 1e-6);
        let q = f_quantile(0.9, 5.0, 12.0).unwrap();
        assert!((cdf_by_integration(q, 5.0, 12.0) - 0.9).abs() < 1e-6);
    }

    #[test]
    fn domain_errors() {
        assert!(f_quantile(0.0, 2.0, 2.0).is_err());
        assert!(f_quantile(1.0, 2.0, 2.0).is_err());
        assert!(f_quantile(0.5, 0.0, 2.0).is_err());
        assert!(f_cdf(1.0, 2.0, f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(p in 0.001..0.999f64, d1 in 1.0..200.0f64, d2 in 1.0..200.0f64) {
            let q = f_quantile(p, d1, d2).unwrap();
            prop_assert!((f_cdf(q, d1, d2).unwrap() - p).abs() < 1e-8);
        }

        #[test]
        fn increasing_in_p(p in 0.01..0.98f64, dp in 0.001..0.01f64, d1 in 1.0..50.0f64, d2 in 1.0..50.0f64) {
            prop_assert!(f_quantile(p + dp, d1, d2).unwrap() > f_quantile(p, d1, d2).unwrap());
        }
    }
}
