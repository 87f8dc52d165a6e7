//! Channel-level equilibrium of slotted non-persistent CSMA.
//!
//! During idle periods the aggregate attempts form a Poisson stream of rate
//! `G` per slot, so a mini-slot of length `a` carries no attempt with
//! probability `e^{-aG}` and exactly one with probability `aG e^{-aG}`. The
//! channel alternates between idle mini-slots and busy periods of `1 + a`
//! slots, each ending in a success or a collision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lambert::lambert_w0;

/// Tolerance below which an input rate counts as touching the maximum.
pub const TANGENCY_TOL: f64 = 1e-9;

const MAX_BRACKET_DOUBLINGS: usize = 64;
const MAX_BISECTIONS: usize = 300;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelEquilibrium {
    /// Aggregate attempt rate (attempts/slot).
    pub g: f64,
    /// Success probability of a transmission, `e^{-aG}`.
    pub p: f64,
    pub pi_idle: f64,
    pub pi_suc: f64,
    pub pi_col: f64,
    /// Time-average probability of the success state.
    pub pi_suc_time_avg: f64,
    /// Probability that the channel is sensed idle.
    pub alpha: f64,
}

impl ChannelEquilibrium {
    /// Time-average probabilities of (Idle, Suc, Col), weighting each state by
    /// its sojourn time (`a` for Idle, `1 + a` for Suc and Col).
    pub fn time_average(&self, a: f64) -> [f64; 3] {
        let idle = a * self.pi_idle;
        let suc = (1.0 + a) * self.pi_suc;
        let col = (1.0 + a) * self.pi_col;
        let total = idle + suc + col;
        [idle / total, suc / total, col / total]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxThroughput {
    pub lambda_max: f64,
    pub g_star: f64,
}

/// The two attempt rates at which the channel delivers a given input rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThroughputRoots {
    pub g_small: f64,
    pub g_large: f64,
    pub p_small: f64,
    pub p_large: f64,
    pub g_star: f64,
    pub lambda_max: f64,
}

fn check_ratio(a: f64) -> Result<()> {
    if a > 0.0 && a <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("ratio a = {a} must lie in (0, 1]")))
    }
}

fn check_rate(g: f64) -> Result<()> {
    if g >= 0.0 && g.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "attempt rate G = {g} must be finite and non-negative"
        )))
    }
}

pub fn channel_equilibrium(g: f64, a: f64) -> Result<ChannelEquilibrium> {
    check_ratio(a)?;
    check_rate(g)?;
    let ag = a * g;
    let p = (-ag).exp();
    let pi_idle = p;
    let pi_suc = ag * p;
    // 1 - e^{-aG} - aG e^{-aG}, accurate for small aG.
    let pi_col = (-(-ag).exp_m1() - pi_suc).max(0.0);
    let busy = 1.0 + a - p;
    Ok(ChannelEquilibrium {
        g,
        p,
        pi_idle,
        pi_suc,
        pi_col,
        pi_suc_time_avg: (1.0 + a) * pi_suc / busy,
        alpha: a / busy,
    })
}

/// Probability that the channel is sensed idle at attempt rate `g`.
pub fn sensed_idle_probability(g: f64, a: f64) -> Result<f64> {
    check_ratio(a)?;
    check_rate(g)?;
    Ok(a / (1.0 + a - (-a * g).exp()))
}

/// Network throughput (packets/slot) at attempt rate `g`.
pub fn throughput_of_attempt_rate(g: f64, a: f64) -> Result<f64> {
    check_ratio(a)?;
    check_rate(g)?;
    Ok(throughput_unchecked(g, a))
}

/// Throughput written in terms of the success probability `p = e^{-aG}`:
/// `-p ln p / (1 + a - p)`.
pub fn throughput_of_success_prob(p: f64, a: f64) -> Result<f64> {
    check_ratio(a)?;
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::domain(format!(
            "success probability {p} must lie in (0, 1]"
        )));
    }
    Ok(-p * p.ln() / (1.0 + a - p))
}

fn throughput_unchecked(g: f64, a: f64) -> f64 {
    let ag = a * g;
    let p = (-ag).exp();
    ag * p / (1.0 + a - p)
}

pub fn max_throughput(a: f64) -> Result<MaxThroughput> {
    check_ratio(a)?;
    let w = lambert_w0(-(-1.0f64).exp() / (1.0 + a))?;
    let e = (-w - 1.0).exp();
    Ok(MaxThroughput {
        lambda_max: (w + 1.0) * e / (1.0 + a - e),
        g_star: (w + 1.0) / a,
    })
}

/// Bisection for `throughput(G) = target` on a bracket where the throughput
/// is monotone; `increasing` tells which end lies below the target.
fn bisect_throughput(target: f64, a: f64, mut lo: f64, mut hi: f64, increasing: bool) -> f64 {
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let below = throughput_unchecked(mid, a) < target;
        if below == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (flo, fhi) = (
        (throughput_unchecked(lo, a) - target).abs(),
        (throughput_unchecked(hi, a) - target).abs(),
    );
    if flo <= fhi {
        lo
    } else {
        hi
    }
}

pub fn attempt_rate_roots(lambda_hat: f64, a: f64) -> Result<ThroughputRoots> {
    check_ratio(a)?;
    let MaxThroughput { lambda_max, g_star } = max_throughput(a)?;
    if !(lambda_hat > 0.0) {
        return Err(Error::domain(format!(
            "input rate {lambda_hat} must be positive"
        )));
    }
    if lambda_hat > lambda_max + TANGENCY_TOL {
        return Err(Error::NoStableRate {
            lambda_hat,
            lambda_max,
        });
    }
    let (g_small, g_large) = if lambda_hat >= lambda_max - TANGENCY_TOL {
        (g_star, g_star)
    } else {
        let g_small = bisect_throughput(lambda_hat, a, 0.0, g_star, true);
        let mut upper = 2.0 * g_star;
        let mut doublings = 0;
        while throughput_unchecked(upper, a) >= lambda_hat {
            doublings += 1;
            if doublings > MAX_BRACKET_DOUBLINGS {
                return Err(Error::Internal(format!(
                    "no upper bracket for G_L at input rate {lambda_hat}"
                )));
            }
            upper *= 2.0;
        }
        let g_large = bisect_throughput(lambda_hat, a, g_star, upper, false);
        (g_small, g_large)
    };
    Ok(ThroughputRoots {
        g_small,
        g_large,
        p_small: (-a * g_large).exp(),
        p_large: (-a * g_small).exp(),
        g_star,
        lambda_max,
    })
}

/// Success probabilities `(p_small, p_large)` solving
/// `p = exp(-lambda_hat (1 + a - p) / p)`.
pub fn equilibrium_success_prob(lambda_hat: f64, a: f64) -> Result<(f64, f64)> {
    let roots = attempt_rate_roots(lambda_hat, a)?;
    Ok((roots.p_small, roots.p_large))
}

/// Residual `p - exp(-lambda_hat (1 + a - p) / p)` of the success-probability
/// fixed point.
pub fn fixed_point_residual(p: f64, lambda_hat: f64, a: f64) -> f64 {
    p - (-lambda_hat * (1.0 + a - p) / p).exp()
}

/// The same fixed point written through the sensed-idle probability,
/// `p - exp(-a lambda_hat / (alpha p))` with `alpha = a / (1 + a - p)`.
pub fn fixed_point_residual_alpha_form(p: f64, lambda_hat: f64, a: f64) -> f64 {
    let alpha = a / (1.0 + a - p);
    p - (-a * lambda_hat / (alpha * p)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix3, Vector3};
    use proptest::prelude::*;

    /// Stationary vector of the three-state channel chain by direct solve.
    fn stationary_oracle(g: f64, a: f64) -> [f64; 3] {
        let e = (-a * g).exp();
        let s = a * g * e;
        let c = 1.0 - e - s;
        // Every row of the transition matrix is (e, s, c).
        let p = Matrix3::new(e, s, c, e, s, c, e, s, c);
        let mut m = p.transpose() - Matrix3::identity();
        m.set_row(2, &Vector3::new(1.0, 1.0, 1.0).transpose());
        let x = m.lu().solve(&Vector3::new(0.0, 0.0, 1.0)).unwrap();
        [x[0], x[1], x[2]]
    }

    fn grid_max(a: f64, step: f64, upper: f64) -> (f64, f64) {
        let mut best = (0.0, 0.0);
        let mut g = 0.0;
        while g <= upper {
            let t = throughput_unchecked(g, a);
            if t > best.1 {
                best = (g, t);
            }
            g += step;
        }
        best
    }

    #[test]
    fn empty_channel() {
        let eq = channel_equilibrium(0.0, 0.1).unwrap();
        assert_eq!(eq.pi_idle, 1.0);
        assert_eq!(eq.pi_suc, 0.0);
        assert_eq!(eq.pi_col, 0.0);
        assert!((eq.alpha - 1.0).abs() < 1e-15);
        assert_eq!(throughput_of_attempt_rate(0.0, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn heavy_attempt_rate_point() {
        let eq = channel_equilibrium(18.9, 0.1).unwrap();
        assert!((eq.pi_idle - 0.1511).abs() < 5e-5);
        assert!((eq.pi_suc - 0.2855).abs() < 5e-5);
        assert!((eq.pi_col - 0.5634).abs() < 5e-5);
        assert!((eq.alpha - 0.1054).abs() < 5e-5);
        assert!((throughput_of_attempt_rate(18.9, 0.1).unwrap() - 0.301).abs() < 5e-4);
        assert!((sensed_idle_probability(0.452, 0.1).unwrap() - 0.6935).abs() < 5e-5);
    }

    #[test]
    fn domain_errors() {
        assert!(channel_equilibrium(-1.0, 0.1).is_err());
        assert!(channel_equilibrium(1.0, 0.0).is_err());
        assert!(channel_equilibrium(1.0, 1.5).is_err());
        assert!(throughput_of_success_prob(0.0, 0.1).is_err());
    }

    #[test]
    fn max_throughput_matches_grid_search() {
        let m = max_throughput(0.1).unwrap();
        let (g, t) = grid_max(0.1, 1e-4, 20.0);
        assert!((m.lambda_max - t).abs() < 1e-8);
        assert!((m.g_star - g).abs() < 2e-4);
        assert!((m.lambda_max - 0.6245).abs() < 5e-5);
        assert!((m.g_star - 3.755).abs() < 1e-3);
        assert!((throughput_unchecked(m.g_star, 0.1) - m.lambda_max).abs() < 1e-10);
        assert!(throughput_unchecked(m.g_star - 0.01, 0.1) < m.lambda_max);
        assert!(throughput_unchecked(m.g_star + 0.01, 0.1) < m.lambda_max);

        let m1 = max_throughput(1.0).unwrap();
        let (_, t1) = grid_max(1.0, 1e-4, 10.0);
        assert!((m1.lambda_max - t1).abs() < 1e-8);
        assert!((m1.lambda_max - 0.2320).abs() < 5e-5);
    }

    #[test]
    fn roots_at_reference_rate() {
        let r = attempt_rate_roots(0.3, 0.1).unwrap();
        assert!((r.g_small - 0.452_889_509_150).abs() < 1e-9);
        assert!((r.g_large - 18.947_146_731_43).abs() < 1e-8);
        for g in [r.g_small, r.g_large] {
            assert!((throughput_unchecked(g, 0.1) - 0.3).abs() <= 1e-10);
        }
        assert!(r.g_small <= r.g_star && r.g_star <= r.g_large);
        assert!((r.p_small - (-0.1 * r.g_large).exp()).abs() < 1e-15);
        assert!((r.p_small - 0.1506).abs() < 5e-4);
    }

    #[test]
    fn tangency_and_overload() {
        let m = max_throughput(0.1).unwrap();
        let r = attempt_rate_roots(m.lambda_max, 0.1).unwrap();
        assert_eq!(r.g_small, r.g_large);
        assert_eq!(r.g_small, m.g_star);
        assert!(matches!(
            attempt_rate_roots(0.7, 0.1),
            Err(Error::NoStableRate { .. })
        ));
        assert!(attempt_rate_roots(0.0, 0.1).is_err());
    }

    #[test]
    fn success_probability_fixed_point() {
        let (ps, pl) = equilibrium_success_prob(0.3, 0.1).unwrap();
        assert!(ps < pl);
        // Oracle: iterate p <- exp(-lambda (1 + a - p) / p) starting near 1;
        // the large root is the attracting one.
        let mut p: f64 = 0.99;
        for _ in 0..10_000 {
            p = (-0.3 * (1.1 - p) / p).exp();
        }
        assert!((p - pl).abs() < 1e-10);
        for p in [ps, pl] {
            assert!(fixed_point_residual(p, 0.3, 0.1).abs() < 1e-10);
            assert!(fixed_point_residual_alpha_form(p, 0.3, 0.1).abs() < 1e-10);
        }
        let (_, pl_tiny) = equilibrium_success_prob(1e-9, 0.1).unwrap();
        assert!(pl_tiny > 1.0 - 1e-8);
    }

    #[test]
    fn unimodal_on_grid() {
        for a in [0.05, 0.1, 0.2, 0.5, 1.0] {
            let m = max_throughput(a).unwrap();
            let mut prev = 0.0;
            for k in 1..=400 {
                let g = m.g_star * k as f64 / 400.0;
                let t = throughput_unchecked(g, a);
                assert!(t > prev, "a = {a}, g = {g}");
                prev = t;
            }
            for k in 1..=400 {
                let g = m.g_star * (1.0 + k as f64 / 20.0);
                let t = throughput_unchecked(g, a);
                assert!(t < prev, "a = {a}, g = {g}");
                prev = t;
            }
        }
    }

    proptest! {
        #[test]
        fn normalization_and_forms(g in 0.0f64..200.0, a in 0.001f64..=1.0) {
            let eq = channel_equilibrium(g, a).unwrap();
            prop_assert!((eq.pi_idle + eq.pi_suc + eq.pi_col - 1.0).abs() <= 1e-12);
            prop_assert!(eq.alpha > 0.0 && eq.alpha <= 1.0);
            let direct = throughput_of_attempt_rate(g, a).unwrap();
            if g > 0.0 {
                let via_p = throughput_of_success_prob(eq.p, a).unwrap();
                prop_assert!((direct - via_p).abs() <= 1e-12 * direct.abs().max(1e-300));
            }
            let tavg = eq.time_average(a);
            prop_assert!((tavg[1] - eq.pi_suc_time_avg).abs() < 1e-12);
        }

        #[test]
        fn matches_brute_force_stationary_vector(g in 0.0f64..100.0, a in 0.01f64..=1.0) {
            let eq = channel_equilibrium(g, a).unwrap();
            let x = stationary_oracle(g, a);
            prop_assert!((eq.pi_idle - x[0]).abs() < 1e-10);
            prop_assert!((eq.pi_suc - x[1]).abs() < 1e-10);
            prop_assert!((eq.pi_col - x[2]).abs() < 1e-10);
        }

        #[test]
        fn roots_solve_characteristic_equation(frac in 0.01f64..0.999, a in 0.02f64..=1.0) {
            let m = max_throughput(a).unwrap();
            let target = frac * m.lambda_max;
            let r = attempt_rate_roots(target, a).unwrap();
            prop_assert!((throughput_unchecked(r.g_small, a) - target).abs() <= 1e-10);
            prop_assert!((throughput_unchecked(r.g_large, a) - target).abs() <= 1e-10);
            prop_assert!(r.g_small <= r.g_star && r.g_star <= r.g_large);
        }
    }
}
