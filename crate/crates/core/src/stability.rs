//! Retransmission-factor regions for stable throughput and bounded delay.
//!
//! In equilibrium the aggregate attempt rate `G` is a function of the
//! retransmission factor `q`; inverting it gives `q = h(G)`, increasing in
//! `G`. Stable throughput needs `G_S <= G <= G_L` (region I); allowing three
//! standard deviations of slot-to-slot fluctuation moves the upper bound down
//! to `Ĝ_L` (region II). Bounded mean delay additionally needs a finite
//! second moment of service time.

use serde::{Deserialize, Serialize};

use crate::channel::{attempt_rate_roots, sensed_idle_probability, ThroughputRoots};
use crate::error::{Error, Result};
use crate::hol::{offered_load, pk_mean_delay, service_moments, DelayEstimate, ServiceMoments};
use crate::params::{Cutoff, NetworkParams, Population, Scheme};

/// Smallest and largest retransmission factors a clamped endpoint takes.
pub const Q_FLOOR: f64 = 1e-12;
pub const Q_CEIL: f64 = 1.0 - 1e-12;

const MAX_DOUBLINGS: usize = 64;
const MAX_BISECTIONS: usize = 300;

fn success_and_miss(g: f64, a: f64) -> (f64, f64) {
    let p = (-a * g).exp();
    (p, -(-a * g).exp_m1())
}

fn in_open_unit(q: f64) -> Result<f64> {
    if q > 0.0 && q < 1.0 {
        Ok(q)
    } else {
        Err(Error::OutOfRange { value: q })
    }
}

fn check_g(g: f64) -> Result<()> {
    if g > 0.0 && g.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "attempt rate G = {g} must be positive and finite"
        )))
    }
}

/// Unclamped `h(G)` for Geometric Retransmission; may fall outside (0, 1).
fn raw_q_geometric(g: f64, n: Population, lambda_hat: f64, a: f64) -> f64 {
    let Population::Finite(n) = n else {
        return 0.0;
    };
    let (p, miss) = success_and_miss(g, a);
    let denom = n as f64 + (lambda_hat - g) * p / miss;
    if denom <= 0.0 {
        f64::INFINITY
    } else {
        g / denom
    }
}

/// Unclamped `h(G)` for Exponential Backoff.
fn raw_q_exponential(g: f64, n: Population, lambda_hat: f64, a: f64) -> f64 {
    let (p, miss) = success_and_miss(g, a);
    let Population::Finite(n) = n else {
        return miss;
    };
    let nf = n as f64;
    let denom = 1.0 - g * p / (nf * miss + lambda_hat * p);
    if denom <= 0.0 {
        f64::INFINITY
    } else {
        miss / denom
    }
}

/// `q = h(G)` for Geometric Retransmission:
/// `G / (n + (lambda_hat - G) e^{-aG} / (1 - e^{-aG}))`.
pub fn q_of_g_geometric(g: f64, n: Population, lambda_hat: f64, a: f64) -> Result<f64> {
    check_g(g)?;
    in_open_unit(raw_q_geometric(g, n, lambda_hat, a))
}

/// `q = h(G)` for Exponential Backoff:
/// `(1 - e^{-aG}) / (1 - G e^{-aG} / (n - (n - lambda_hat) e^{-aG}))`,
/// tending to `1 - e^{-aG}` for an infinite population.
pub fn q_of_g_exponential(g: f64, n: Population, lambda_hat: f64, a: f64) -> Result<f64> {
    check_g(g)?;
    in_open_unit(raw_q_exponential(g, n, lambda_hat, a))
}

/// Right-hand side of the attempt-rate equation for a given `(G, q)`:
/// the mean attempt rate generated by `n` HOL packets whose sensing-phase
/// distribution is the equilibrium one at `p = e^{-aG}`.
///
/// With `r = (1 - p)/q` this is
/// `(lambda_hat p + n (1 - p)) / (p sum_{i<K} r^i + r^K)`, evaluated in powers
/// of `1/r` when `r > 1` so that neither `p -> 0` nor large `K` overflows.
pub fn attempt_rate_rhs(g: f64, q: f64, n: f64, lambda_hat: f64, a: f64, cutoff: Cutoff) -> f64 {
    let (p, miss) = success_and_miss(g, a);
    let numer = lambda_hat * p + n * miss;
    match cutoff {
        Cutoff::Infinite if miss >= q => 0.0,
        Cutoff::Infinite => numer * (q - miss) / (q * p),
        Cutoff::Finite(k) => {
            let k = k as f64;
            if miss <= q {
                // 1 - r, exactly as a difference of the inputs
                let gap = (q - miss) / q;
                let ln_r = (-gap).ln_1p();
                let partial = if gap == 0.0 {
                    k
                } else {
                    -(k * ln_r).exp_m1() / gap
                };
                numer / (p * partial + (k * ln_r).exp())
            } else {
                let gap = (miss - q) / miss;
                let ln_s = (-gap).ln_1p();
                let s = 1.0 - gap;
                let tail = s * -(k * ln_s).exp_m1() / gap;
                numer * (k * ln_s).exp() / (p * tail + 1.0)
            }
        }
    }
}

/// Unclamped `h(G)` for any cut-off: closed forms for K = 1 and infinity,
/// bisection on `q` for the attempt-rate equation otherwise.
fn raw_q(g: f64, n: Population, lambda_hat: f64, a: f64, cutoff: Cutoff) -> f64 {
    match cutoff {
        Cutoff::Finite(1) => raw_q_geometric(g, n, lambda_hat, a),
        Cutoff::Infinite => raw_q_exponential(g, n, lambda_hat, a),
        Cutoff::Finite(_) => {
            let Population::Finite(n) = n else {
                return 0.0;
            };
            let nf = n as f64;
            let f = |q: f64| attempt_rate_rhs(g, q, nf, lambda_hat, a, cutoff) - g;
            let (p, miss) = success_and_miss(g, a);
            // q -> 1 leaves every backlogged packet attempting at once.
            if lambda_hat * p + nf * miss <= g {
                return f64::INFINITY;
            }
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..MAX_BISECTIONS {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if f(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        }
    }
}

/// `q = h(G)` for any cut-off.
pub fn q_of_g(g: f64, n: Population, lambda_hat: f64, a: f64, cutoff: Cutoff) -> Result<f64> {
    check_g(g)?;
    in_open_unit(raw_q(g, n, lambda_hat, a, cutoff))
}

/// Solves `G = rhs(G, q)` for the equilibrium attempt rate by bisection.
pub fn attempt_rate_from_q(q: f64, n: u32, lambda_hat: f64, a: f64, cutoff: Cutoff) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::OutOfRange { value: q });
    }
    if n == 0 {
        return Err(Error::domain("node count must be positive"));
    }
    if !(lambda_hat > 0.0) {
        return Err(Error::domain("aggregate input rate must be positive"));
    }
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::domain(format!("ratio a = {a} must lie in (0, 1]")));
    }
    let nf = n as f64;
    let f = |g: f64| g - attempt_rate_rhs(g, q, nf, lambda_hat, a, cutoff);

    let mut hi = 1.0;
    let mut doublings = 0;
    while f(hi) <= 0.0 {
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::NoFixedPoint { q });
        }
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Conservative upper attempt rate `Ĝ_L`, the smaller solution of
/// `G_L = Ĝ + 3 sqrt(Ĝ (1 - Ĝ/n))`; for an infinite population the variance
/// term becomes `Ĝ` and `Ĝ + 3 sqrt(Ĝ) = G_L`.
pub fn conservative_upper_attempt_rate(g_large: f64, n: Population) -> Result<f64> {
    if !(g_large > 0.0 && g_large.is_finite()) {
        return Err(Error::domain(format!("G_L = {g_large} must be positive")));
    }
    match n {
        Population::Finite(n) => {
            let nf = n as f64;
            if g_large > nf {
                return Err(Error::domain(format!(
                    "G_L = {g_large} exceeds the node count {n}"
                )));
            }
            let disc = 4.0 * nf * nf * g_large + 9.0 * nf * nf - 4.0 * nf * g_large * g_large;
            Ok((2.0 * nf * g_large + 9.0 * nf - 3.0 * disc.sqrt()) / (2.0 * nf + 18.0))
        }
        Population::Infinite => {
            let root = 0.5 * (-3.0 + (9.0 + 4.0 * g_large).sqrt());
            Ok(root * root)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    RegionI,
    RegionII,
    BoundedDelay,
}

/// Closed interval of retransmission factors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StableInterval {
    pub lo: f64,
    pub hi: f64,
    pub kind: RegionKind,
    pub empty: bool,
    /// The lower endpoint fell outside (0, 1) and was clamped.
    pub lo_clamped: bool,
    /// The upper endpoint fell outside (0, 1) and was clamped.
    pub hi_clamped: bool,
}

impl StableInterval {
    pub fn empty(kind: RegionKind) -> Self {
        StableInterval {
            lo: 1.0,
            hi: 0.0,
            kind,
            empty: true,
            lo_clamped: false,
            hi_clamped: false,
        }
    }

    fn from_raw(lo: f64, hi: f64, kind: RegionKind) -> Self {
        let clamp = |v: f64| -> (f64, bool) {
            if v.is_nan() || v <= 0.0 {
                (Q_FLOOR, true)
            } else if v >= 1.0 {
                (Q_CEIL, true)
            } else {
                (v, false)
            }
        };
        // A lower endpoint at or above 1 means no admissible q at all.
        if lo.is_nan() || lo >= 1.0 || hi.is_nan() || hi <= 0.0 {
            return StableInterval::empty(kind);
        }
        let (lo, lo_clamped) = clamp(lo);
        let (hi, hi_clamped) = clamp(hi);
        StableInterval {
            lo,
            hi,
            kind,
            empty: lo > hi,
            lo_clamped,
            hi_clamped,
        }
    }

    pub fn contains(&self, q: f64) -> bool {
        !self.empty && q >= self.lo && q <= self.hi
    }

    pub fn is_subset_of(&self, other: &StableInterval) -> bool {
        self.empty || (!other.empty && self.lo >= other.lo && self.hi <= other.hi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub scheme: Scheme,
    pub n: Population,
    pub lambda_hat: f64,
    pub a: f64,
    pub region_i: StableInterval,
    pub region_ii: StableInterval,
    pub region_delay: StableInterval,
    pub g_small: f64,
    pub g_large: f64,
    pub g_hat_large: f64,
}

fn region_pair(
    roots: &ThroughputRoots,
    g_hat: f64,
    n: Population,
    lambda_hat: f64,
    a: f64,
    cutoff: Cutoff,
) -> (StableInterval, StableInterval) {
    let lo = raw_q(roots.g_small, n, lambda_hat, a, cutoff);
    let region_i = StableInterval::from_raw(
        lo,
        raw_q(roots.g_large, n, lambda_hat, a, cutoff),
        RegionKind::RegionI,
    );
    let region_ii = StableInterval::from_raw(
        lo,
        raw_q(g_hat, n, lambda_hat, a, cutoff),
        RegionKind::RegionII,
    );
    (region_i, region_ii)
}

fn finite_n_g_hat(roots: &ThroughputRoots, n: Population) -> Result<f64> {
    match n {
        // The binomial attempt count cannot exceed n.
        Population::Finite(nn) if roots.g_large > nn as f64 => {
            conservative_upper_attempt_rate(nn as f64, n)
        }
        _ => conservative_upper_attempt_rate(roots.g_large, n),
    }
}

pub fn stable_regions_geometric(n: Population, lambda_hat: f64, a: f64) -> Result<RegionReport> {
    stable_regions(n, lambda_hat, a, Scheme::Geometric)
}

pub fn stable_regions_exponential(n: Population, lambda_hat: f64, a: f64) -> Result<RegionReport> {
    stable_regions(n, lambda_hat, a, Scheme::Exponential)
}

/// Regions I, II and the bounded-delay region for any scheme.
///
/// Finite cut-offs (including Geometric) have a finite second moment of
/// service time throughout region II, so their delay region equals region
/// II. Exponential Backoff additionally needs `q > sqrt(1 - e^{-aG_S})`.
pub fn stable_regions(
    n: Population,
    lambda_hat: f64,
    a: f64,
    scheme: Scheme,
) -> Result<RegionReport> {
    if let Population::Finite(0) = n {
        return Err(Error::domain("node count must be positive"));
    }
    let roots = attempt_rate_roots(lambda_hat, a)?;
    let g_hat = finite_n_g_hat(&roots, n)?;
    let cutoff = scheme.cutoff();

    let (region_i, region_ii, region_delay) = match (scheme, n) {
        (Scheme::Geometric | Scheme::KExponential(_), Population::Infinite) => (
            StableInterval::empty(RegionKind::RegionI),
            StableInterval::empty(RegionKind::RegionII),
            StableInterval::empty(RegionKind::BoundedDelay),
        ),
        (Scheme::Exponential, _) => {
            let (i, ii) = region_pair(&roots, g_hat, n, lambda_hat, a, cutoff);
            let floor = (-(-a * roots.g_small).exp_m1()).sqrt();
            let delay = if ii.empty {
                StableInterval::empty(RegionKind::BoundedDelay)
            } else {
                StableInterval {
                    lo: floor.max(ii.lo),
                    kind: RegionKind::BoundedDelay,
                    empty: floor.max(ii.lo) > ii.hi,
                    lo_clamped: floor <= ii.lo && ii.lo_clamped,
                    ..ii
                }
            };
            (i, ii, delay)
        }
        (_, Population::Finite(_)) => {
            let (i, ii) = region_pair(&roots, g_hat, n, lambda_hat, a, cutoff);
            let delay = StableInterval {
                kind: RegionKind::BoundedDelay,
                ..ii
            };
            (i, ii, delay)
        }
    };

    Ok(RegionReport {
        scheme,
        n,
        lambda_hat,
        a,
        region_i,
        region_ii,
        region_delay,
        g_small: roots.g_small,
        g_large: roots.g_large,
        g_hat_large: g_hat,
    })
}

/// Analytic operating point of a fully specified scenario.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub g: f64,
    pub p: f64,
    pub alpha: f64,
    pub rho: f64,
    pub moments: Option<ServiceMoments>,
    pub delay: Option<DelayEstimate>,
}

/// Equilibrium attempt rate, success probability, offered load, service
/// moments and P-K delay at the parameters' retransmission factor.
///
/// Moments and delay are `None` where they do not exist (transient
/// exponential chain, unbounded second moment, overload).
pub fn operating_point(params: &NetworkParams) -> Result<OperatingPoint> {
    params.validate()?;
    let n = params
        .n
        .finite()
        .ok_or_else(|| Error::domain("operating point needs a finite population"))?;
    let g = attempt_rate_from_q(params.q, n, params.lambda_hat, params.a(), params.cutoff())?;
    operating_point_at(params, g)
}

/// The same quantities with the attempt rate imposed instead of solved for,
/// e.g. one measured in simulation.
pub fn operating_point_at(params: &NetworkParams, g: f64) -> Result<OperatingPoint> {
    params.validate()?;
    let lambda = params
        .lambda()
        .ok_or_else(|| Error::domain("operating point needs a finite population"))?;
    let a = params.a();
    let cutoff = params.cutoff();
    let p = (-a * g).exp();
    let alpha = sensed_idle_probability(g, a)?;
    let rho = match offered_load(lambda, p, params.q, cutoff, alpha, a) {
        Ok(load) => load.rho,
        Err(Error::NotErgodic { .. }) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    let moments = service_moments(p, params.q, cutoff, params.minislots, alpha).ok();
    let delay = moments.and_then(|m| pk_mean_delay(lambda, &m).ok());
    Ok(OperatingPoint {
        g,
        p,
        alpha,
        rho,
        moments,
        delay,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::throughput_of_attempt_rate;
    use proptest::prelude::*;

    const N50: Population = Population::Finite(50);

    #[test]
    fn geometric_h_reference_points() {
        let q = q_of_g_geometric(10.32, N50, 0.3, 0.1).unwrap();
        assert!((q - 0.232).abs() < 1e-3, "{q}");
        let q = q_of_g_geometric(0.452, N50, 0.3, 0.1).unwrap();
        assert!((q - 0.0097).abs() < 5e-5, "{q}");
        let tiny = q_of_g_geometric(1e-6, N50, 0.3, 0.1).unwrap();
        assert!(tiny > 0.0 && tiny < 1e-11);
        assert!(matches!(
            q_of_g_geometric(1.0, Population::Infinite, 0.3, 0.1),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn exponential_h_reference_points() {
        let q = q_of_g_exponential(0.452, N50, 0.3, 0.1).unwrap();
        assert!((q - 0.053).abs() < 5e-4, "{q}");
        let q = q_of_g_exponential(10.32, N50, 0.3, 0.1).unwrap();
        assert!((q - 0.726).abs() < 1e-3, "{q}");
        let q = q_of_g_exponential(0.452, Population::Infinite, 0.3, 0.1).unwrap();
        assert!((q - (1.0 - (-0.0452f64).exp())).abs() < 1e-15);
        assert!((q - 0.0442).abs() < 1e-4);
    }

    #[test]
    fn closed_forms_agree_with_generic_inversion() {
        // The generic path bisects the attempt-rate equation on q; the
        // closed forms solve it algebraically.
        for &g in &[0.3, 0.452, 1.0, 3.0, 8.0, 10.32, 15.0] {
            for (cutoff, closed) in [
                (Cutoff::Finite(1), q_of_g_geometric(g, N50, 0.3, 0.1)),
                (Cutoff::Infinite, q_of_g_exponential(g, N50, 0.3, 0.1)),
            ] {
                let Ok(q) = closed else { continue };
                let rhs = attempt_rate_rhs(g, q, 50.0, 0.3, 0.1, cutoff);
                assert!((rhs - g).abs() < 1e-9 * g, "g = {g}, {cutoff:?}");
            }
        }
    }

    #[test]
    fn finite_k_interpolates_between_schemes() {
        let g = 2.0;
        let geo = q_of_g(g, N50, 0.3, 0.1, Cutoff::Finite(1)).unwrap();
        let expo = q_of_g(g, N50, 0.3, 0.1, Cutoff::Infinite).unwrap();
        let mut prev = geo;
        for k in [2u32, 3, 5, 10, 40, 400] {
            let q = q_of_g(g, N50, 0.3, 0.1, Cutoff::Finite(k)).unwrap();
            assert!(q >= prev - 1e-12, "K = {k}");
            assert!((attempt_rate_rhs(g, q, 50.0, 0.3, 0.1, Cutoff::Finite(k)) - g).abs() < 1e-9);
            prev = q;
        }
        assert!((prev - expo).abs() < 1e-6);
    }

    #[test]
    fn attempt_rate_inverse() {
        let g = attempt_rate_from_q(0.232, 50, 0.3, 0.1, Cutoff::Finite(1)).unwrap();
        assert!((g - 10.3).abs() < 0.05, "{g}");
        // Congested geometric network: G -> n q.
        let g = attempt_rate_from_q(0.3, 1_000_000, 0.3, 0.1, Cutoff::Finite(1)).unwrap();
        assert!(((g - 300_000.0) / 300_000.0).abs() < 1e-6);
        assert!(attempt_rate_from_q(1.0, 50, 0.3, 0.1, Cutoff::Finite(1)).is_err());
    }

    #[test]
    fn conservative_rate() {
        let g = conservative_upper_attempt_rate(18.9, N50).unwrap();
        assert!((g - 10.32).abs() < 5e-3, "{g}");
        // Oracle: bisection on g + 3 sqrt(g (1 - g/n)) = G_L over [0, G_L].
        let target = 18.9;
        let f = |x: f64| x + 3.0 * (x * (1.0 - x / 50.0)).sqrt() - target;
        let (mut lo, mut hi) = (0.0, target);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((g - lo).abs() < 1e-9);

        let at_n = conservative_upper_attempt_rate(50.0, N50).unwrap();
        assert!((at_n - 2500.0 / 59.0).abs() < 1e-10);
        assert!((at_n + 3.0 * (at_n * (1.0 - at_n / 50.0)).sqrt() - 50.0).abs() < 1e-9);
        assert!(conservative_upper_attempt_rate(51.0, N50).is_err());

        let inf = conservative_upper_attempt_rate(18.9, Population::Infinite).unwrap();
        assert!((inf + 3.0 * inf.sqrt() - 18.9).abs() < 1e-12);
    }

    #[test]
    fn geometric_regions_reference() {
        let r = stable_regions_geometric(N50, 0.3, 0.1).unwrap();
        assert!((r.region_ii.lo - 0.0097).abs() < 5e-5);
        assert!((r.region_ii.hi - 0.233).abs() < 1e-3);
        assert!(r.region_ii.is_subset_of(&r.region_i));
        assert_eq!(r.region_delay.lo, r.region_ii.lo);
        assert_eq!(r.region_delay.hi, r.region_ii.hi);
        let inf = stable_regions_geometric(Population::Infinite, 0.3, 0.1).unwrap();
        assert!(inf.region_i.empty && inf.region_ii.empty && inf.region_delay.empty);
        assert!(inf.region_i.lo > inf.region_i.hi);
    }

    #[test]
    fn exponential_regions_reference() {
        let r = stable_regions_exponential(N50, 0.3, 0.1).unwrap();
        assert!((r.region_ii.lo - 0.053).abs() < 1e-3);
        assert!((r.region_delay.lo - 0.2104).abs() < 1e-3);
        assert!((r.region_delay.hi - 0.726).abs() < 2e-3);
        assert!(r.region_delay.is_subset_of(&r.region_ii));
        assert!(r.region_ii.is_subset_of(&r.region_i));
        // Delay boundary sits where q^2 = 1 - e^{-a G_S}.
        let p = (-0.1 * r.g_small).exp();
        assert!((r.region_delay.lo.powi(2) - (1.0 - p)).abs() < 1e-9);

        let inf = stable_regions_exponential(Population::Infinite, 0.3, 0.1).unwrap();
        assert!((inf.region_ii.lo - (1.0 - (-0.1 * inf.g_small).exp())).abs() < 1e-15);
        assert!((inf.region_ii.hi - (1.0 - (-0.1 * inf.g_hat_large).exp())).abs() < 1e-15);
        assert!(!inf.region_ii.empty);
    }

    #[test]
    fn overload_propagates() {
        assert!(matches!(
            stable_regions_exponential(N50, 0.7, 0.1),
            Err(Error::NoStableRate { .. })
        ));
    }

    #[test]
    fn geometric_region_shrinks_with_n() {
        let mut prev = f64::INFINITY;
        for n in [10u32, 20, 50, 100, 500, 5_000, 100_000] {
            let r = stable_regions_geometric(Population::Finite(n), 0.3, 0.1).unwrap();
            assert!(r.region_ii.hi <= prev);
            prev = r.region_ii.hi;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn exponential_region_converges_to_infinite_limit() {
        let inf = stable_regions_exponential(Population::Infinite, 0.3, 0.1).unwrap();
        let big = stable_regions_exponential(Population::Finite(10_000_000), 0.3, 0.1).unwrap();
        assert!((big.region_ii.lo - inf.region_ii.lo).abs() < 1e-6);
        assert!((big.region_ii.hi - inf.region_ii.hi).abs() < 1e-5);
    }

    #[test]
    fn offered_load_below_one_across_region_i() {
        // The offered load grows with q across region I and stays below 1;
        // at h(G_L) it is 0.886 for this configuration.
        for scheme in [Scheme::Geometric, Scheme::Exponential] {
            let r = stable_regions(N50, 0.3, 0.1, scheme).unwrap();
            let mut prev = 0.0;
            for k in 0..=20 {
                let g = r.g_small + (r.g_large - r.g_small) * k as f64 / 20.0;
                let q = q_of_g(g, N50, 0.3, 0.1, scheme.cutoff()).unwrap();
                let params = NetworkParams::new(N50, 0.1, 0.3, q, scheme).unwrap();
                let op = operating_point(&params).unwrap();
                assert!((op.g - g).abs() < 1e-7 * g.max(1.0));
                assert!(op.rho < 1.0 && op.rho >= prev - 1e-12, "{scheme} k = {k}");
                prev = op.rho;
            }
            assert!((prev - 0.8859).abs() < 1e-3);
        }
    }

    #[test]
    fn h_increasing_on_stable_range() {
        for &(n, lambda_hat, a) in &[
            (50u32, 0.3, 0.1),
            (100, 0.2, 0.05),
            (200, 0.4, 0.1),
            (10, 0.1, 0.5),
            (30, 0.1, 0.2),
        ] {
            let roots = attempt_rate_roots(lambda_hat, a).unwrap();
            for cutoff in [Cutoff::Finite(1), Cutoff::Finite(3), Cutoff::Infinite] {
                let mut prev = 0.0;
                for k in 0..20 {
                    let g = roots.g_small + (roots.g_large - roots.g_small) * k as f64 / 19.0;
                    let q = raw_q(g, Population::Finite(n), lambda_hat, a, cutoff);
                    assert!(q > prev, "n={n} cutoff={cutoff:?} k={k}");
                    prev = q;
                }
            }
        }
    }

    proptest! {
        #[test]
        fn attempt_rate_round_trip(
            q in 0.01f64..0.95,
            n in 2u32..500,
            frac in 0.05f64..0.95,
            m in prop::sample::select(vec![2u32, 5, 10, 20]),
            exponential in any::<bool>(),
        ) {
            let a = 1.0 / m as f64;
            let lambda_hat = frac * crate::channel::max_throughput(a).unwrap().lambda_max;
            let cutoff = if exponential { Cutoff::Infinite } else { Cutoff::Finite(1) };
            let g = attempt_rate_from_q(q, n, lambda_hat, a, cutoff).unwrap();
            let back = q_of_g(g, Population::Finite(n), lambda_hat, a, cutoff).unwrap();
            prop_assert!((back - q).abs() < 1e-9, "q = {}, back = {}", q, back);
        }

        #[test]
        fn regions_nest(
            n in 5u32..2000,
            frac in 0.05f64..0.95,
            m in prop::sample::select(vec![5u32, 10, 20]),
        ) {
            let a = 1.0 / m as f64;
            let lambda_hat = frac * crate::channel::max_throughput(a).unwrap().lambda_max;
            for scheme in [Scheme::Geometric, Scheme::KExponential(4), Scheme::Exponential] {
                let r = stable_regions(Population::Finite(n), lambda_hat, a, scheme).unwrap();
                prop_assert!(r.region_ii.is_subset_of(&r.region_i));
                prop_assert!(r.region_delay.is_subset_of(&r.region_ii));
                prop_assert!(r.g_hat_large <= r.g_large);
                prop_assert!(throughput_of_attempt_rate(r.g_small, a).unwrap() > 0.0);
            }
        }

        #[test]
        fn conservative_rate_round_trip(n in 1u32..10_000, frac in 0.001f64..=1.0) {
            let nf = n as f64;
            let gl = frac * nf;
            let gh = conservative_upper_attempt_rate(gl, Population::Finite(n)).unwrap();
            prop_assert!(gh <= gl + 1e-12);
            let back = gh + 3.0 * (gh * (1.0 - gh / nf)).max(0.0).sqrt();
            prop_assert!((back - gl).abs() < 1e-9 * nf.max(1.0));
        }
    }
}
