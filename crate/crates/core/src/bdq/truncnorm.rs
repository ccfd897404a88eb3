//! Mean of a normal distribution truncated to an interval, evaluated without
//! catastrophic cancellation in the tails.

use libm::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Mills ratio `Q(x)/φ(x)` for `x ≥ 0`, where `Q` is the upper tail.
fn mills_ratio(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 30.0 {
        0.5 * erfc(x * FRAC_1_SQRT_2) / std_normal_pdf(x)
    } else {
        // Laplace continued fraction; a handful of terms is exact to double
        // precision this far out.
        let mut tail = x;
        for k in (1..=40).rev() {
            tail = x + k as f64 / tail;
        }
        1.0 / tail
    }
}

/// `(φ(α) − φ(β)) / (Φ(β) − Φ(α))` for `α < β`, the standardized offset of
/// the truncated mean from the untruncated one. Either bound may be infinite.
fn standardized_offset(alpha: f64, beta: f64) -> f64 {
    if beta <= 0.0 {
        return -standardized_offset(-beta, -alpha);
    }
    let width = beta - alpha;
    if width < 1e-4 {
        // E[t] ≈ c − c·h²/3 for a narrow window of half-width h around c.
        let c = 0.5 * (alpha + beta);
        let h = 0.5 * width;
        return c * (1.0 - h * h / 3.0);
    }
    if alpha >= 0.0 {
        // Both bounds in the upper tail: divide through by φ(α).
        if beta.is_infinite() {
            return 1.0 / mills_ratio(alpha);
        }
        let exponent = -0.5 * width * (alpha + beta);
        let one_minus_rho = -exponent.exp_m1();
        let rho = exponent.exp();
        return one_minus_rho / (mills_ratio(alpha) - rho * mills_ratio(beta));
    }
    // The window straddles zero, so its mass is not small.
    let pdf = |t: f64| if t.is_infinite() { 0.0 } else { std_normal_pdf(t) };
    (pdf(alpha) - pdf(beta)) / (std_normal_cdf(beta) - std_normal_cdf(alpha))
}

/// Mean of `N(mean, sd²)` restricted to `[lower, upper]`; `lower` may be
/// `-∞` and `upper` may be `+∞`. The result is clamped into the interval.
pub fn truncated_normal_mean(mean: f64, sd: f64, lower: f64, upper: f64) -> f64 {
    debug_assert!(lower <= upper);
    if lower == upper {
        return lower;
    }
    if sd == 0.0 {
        return mean.clamp(lower, upper);
    }
    let alpha = (lower - mean) / sd;
    let beta = (upper - mean) / sd;
    let m = mean + sd * standardized_offset(alpha, beta);
    if m.is_nan() {
        // Only reachable with a non-finite input mean.
        return if mean > upper { upper } else { lower };
    }
    m.clamp(lower, upper)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Trapezoid-rule `∫ e·p(e) de / ∫ p(e) de` over `[lower, upper]`, with
    /// the exponent shifted by its maximum to avoid underflow.
    pub(crate) fn quadrature_mean(mean: f64, sd: f64, lower: f64, upper: f64, steps: usize) -> f64 {
        let peak = mean.clamp(lower, upper);
        let log_p = |e: f64| -0.5 * ((e - mean) / sd).powi(2) + 0.5 * ((peak - mean) / sd).powi(2);
        let h = (upper - lower) / steps as f64;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..=steps {
            let e = lower + h * i as f64;
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            let p = log_p(e).exp() * w;
            num += e * p;
            den += p;
        }
        num / den
    }

    #[test]
    fn symmetric_window_gives_zero() {
        for sd in [0.01, 0.1, 1.0, 10.0] {
            assert_eq!(truncated_normal_mean(0.0, sd, -0.5, 0.5), 0.0);
        }
    }

    #[test]
    fn wide_window_and_half_lines() {
        // Untruncated-ish case: wide window, mean inside.
        let m = truncated_normal_mean(0.1, 0.01, -10.0, 10.0);
        assert!((m - 0.1).abs() < 1e-14);
        // Half-line truncation of a standard normal: E[X | X > 0] = √(2/π).
        let half = truncated_normal_mean(0.0, 1.0, 0.0, f64::INFINITY);
        assert!((half - (2.0 / PI).sqrt()).abs() < 1e-14);
        let neg = truncated_normal_mean(0.0, 1.0, f64::NEG_INFINITY, 0.0);
        assert!((neg + (2.0 / PI).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn far_tail_approaches_the_nearer_edge() {
        // Mean far above the window: mass piles up against the upper edge and
        // the gap shrinks like sd²/distance.
        let delta = 1.0;
        let sd = delta / 10.0;
        let mu = 10.0 * delta;
        let m = truncated_normal_mean(mu, sd, -delta / 2.0, delta / 2.0);
        let oracle = quadrature_mean(mu, sd, -delta / 2.0, delta / 2.0, 1 << 20);
        assert!((m - oracle).abs() < 1e-9, "{m} vs {oracle}");
        let gap = delta / 2.0 - m;
        assert!(gap > 0.0 && gap < 2e-3 * delta);
        assert!((gap - sd * sd / (mu - delta / 2.0)).abs() < 1e-5);

        // Astronomically far: still finite and inside the window.
        let m = truncated_normal_mean(1e6, 1e-3, -0.5, 0.5);
        assert!(m <= 0.5);
        assert!(m > 0.5 - 1e-9);
        let m = truncated_normal_mean(-1e6, 1e-3, -0.5, 0.5);
        assert!((-0.5..-0.5 + 1e-9).contains(&m));
    }

    #[test]
    fn one_sided_tails_are_stable() {
        for alpha in [5.0, 20.0, 35.0, 100.0] {
            // E[X | X > α] for a standard normal ≈ α + 1/α for large α.
            let m = truncated_normal_mean(0.0, 1.0, alpha, f64::INFINITY);
            assert!(m > alpha && m < alpha + 1.0 / alpha + 1e-12, "{alpha}: {m}");
        }
    }

    #[test]
    fn continued_fraction_agrees_with_erfc_at_the_switch() {
        let direct = 0.5 * erfc(29.9 * FRAC_1_SQRT_2) / std_normal_pdf(29.9);
        let mut tail = 29.9;
        for k in (1..=40).rev() {
            tail = 29.9 + k as f64 / tail;
        }
        assert!((direct - 1.0 / tail).abs() / direct < 1e-12);
    }

    #[test]
    fn narrow_window_branch_is_continuous() {
        let below = truncated_normal_mean(0.3, 1.0, 0.0, 0.99e-4);
        let above = truncated_normal_mean(0.3, 1.0, 0.0, 1.01e-4);
        assert!((below - 0.99e-4 / 2.0).abs() < 1e-9);
        assert!((above - 1.01e-4 / 2.0).abs() < 1e-9);
    }

    #[test]
    fn monotone_in_the_mean() {
        for sd in [0.01, 0.05, 0.5, 5.0] {
            let mut prev = f64::NEG_INFINITY;
            for i in -400..=400 {
                let mu = i as f64 * 0.005;
                let m = truncated_normal_mean(mu, sd, -0.25, 0.25);
                assert!(m >= prev - 1e-15, "sd={sd} mu={mu}");
                assert!((-0.25..=0.25).contains(&m));
                prev = m;
            }
        }
    }
}
