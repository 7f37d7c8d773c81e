//! Exact factorial-family helpers. The gap-coefficient constants only ever
//! need the gamma function at integer and half-integer arguments, which we
//! evaluate through factorials and double factorials instead of a general
//! gamma implementation.

pub(crate) fn factorial(n: u32) -> f64 {
    (1..=n as u64).map(|k| k as f64).product()
}

/// n!! with the conventions 0!! = (-1)!! = 1.
pub(crate) fn double_factorial(n: i64) -> f64 {
    if n <= 0 {
        return 1.0;
    }
    let mut acc = 1.0;
    let mut k = n;
    while k > 1 {
        acc *= k as f64;
        k -= 2;
    }
    acc
}

/// Gamma(m / 2) for positive integer m.
pub(crate) fn gamma_half(m: u32) -> f64 {
    assert!(m >= 1, "gamma_half needs a positive numerator");
    if m.is_multiple_of(2) {
        factorial(m / 2 - 1)
    } else {
        let m = m as i64;
        double_factorial(m - 2) * std::f64::consts::PI.sqrt() / 2f64.powi(((m - 1) / 2) as i32)
    }
}

/// Volume of the unit ball in d dimensions, pi^(d/2) / Gamma(d/2 + 1).
pub(crate) fn unit_ball_volume(d: usize) -> f64 {
    std::f64::consts::PI.powf(d as f64 / 2.0) / gamma_half(d as u32 + 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn gamma_small_values() {
        assert_relative_eq!(gamma_half(1), PI.sqrt(), max_relative = 1e-15); // Gamma(1/2)
        assert_relative_eq!(gamma_half(2), 1.0); // Gamma(1)
        assert_relative_eq!(gamma_half(3), PI.sqrt() / 2.0, max_relative = 1e-15);
        assert_relative_eq!(gamma_half(4), 1.0); // Gamma(2)
        assert_relative_eq!(gamma_half(5), 0.75 * PI.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(gamma_half(8), 6.0); // Gamma(4) = 3!
    }

    #[test]
    fn recurrence_holds() {
        // Gamma(x + 1) = x Gamma(x) across half-integers
        for m in 1..=12u32 {
            let x = m as f64 / 2.0;
            assert_relative_eq!(gamma_half(m + 2), x * gamma_half(m), max_relative = 1e-13);
        }
    }

    #[test]
    fn ball_volumes() {
        assert_relative_eq!(unit_ball_volume(2), PI, max_relative = 1e-15);
        assert_relative_eq!(unit_ball_volume(3), 4.0 * PI / 3.0, max_relative = 1e-15);
        assert_relative_eq!(unit_ball_volume(4), PI * PI / 2.0, max_relative = 1e-15);
    }
}
