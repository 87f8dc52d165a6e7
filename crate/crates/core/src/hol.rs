//! Head-of-line packet chain and the service time it induces.
//!
//! An HOL packet in phase `i` alternates between sensing (`S_i`, one
//! mini-slot), transmitting (`F_i`, one slot) and waiting (`W_i`, one slot).
//! Sensing an idle channel (probability `alpha`) leads to a transmission with
//! probability `q^i`; a busy channel leads to a one-slot wait. A transmission
//! succeeds with probability `p`, otherwise the packet moves to phase
//! `min(i + 1, K)`.
//!
//! All times exposed here are in slots. Internally the generating-function
//! recursions count mini-slots, `M = 1/a` per slot.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Cutoff;

/// Margin used for every `p + q = 1` and `p + q^2 = 1` guard.
pub const ERGODIC_MARGIN: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolEquilibrium {
    /// Time-average probability of `F_i`, `i = 0..=K`.
    pub f_tilde: Vec<f64>,
    /// Time-average probability of `S_i`.
    pub s_tilde: Vec<f64>,
    /// Time-average probability of `W_i`.
    pub w_tilde: Vec<f64>,
    pub d_norm: f64,
    /// Distribution of the phase of a sensing HOL packet.
    pub phi: Vec<f64>,
}

impl HolEquilibrium {
    /// Mean service time in slots, `1 / f_0`.
    pub fn mean_service_time(&self) -> f64 {
        1.0 / self.f_tilde[0]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServiceMoments {
    /// `E[X]` in slots.
    pub mean: f64,
    /// `E[X^2]` in slots squared; infinite when `divergent`.
    pub second: f64,
    pub divergent: bool,
}

impl ServiceMoments {
    pub fn variance(&self) -> f64 {
        self.second - self.mean * self.mean
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OfferedLoad {
    pub rho: f64,
    /// Set when `rho > 1`; the queue cannot keep up.
    pub overloaded: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayEstimate {
    /// `E[T]` in slots.
    pub mean_delay: f64,
    pub utilization: f64,
}

fn check_common(p: f64, q: f64, alpha: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::domain(format!(
            "success probability p = {p} must lie in (0, 1]"
        )));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!(
            "retransmission factor q = {q} must lie in (0, 1)"
        )));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::domain(format!(
            "sensed-idle probability {alpha} must lie in (0, 1]"
        )));
    }
    Ok(())
}

/// Finite chains are always positive recurrent; the closed forms only have a
/// removable singularity at `p + q = 1`. The infinite chain needs `p + q > 1`.
fn check_recurrence(p: f64, q: f64, cutoff: Cutoff) -> Result<()> {
    let excess = p + q - 1.0;
    match cutoff {
        Cutoff::Infinite if excess <= ERGODIC_MARGIN => Err(Error::NotErgodic { sum: p + q }),
        Cutoff::Finite(0) => Err(Error::domain("cut-off phase K must be at least 1")),
        Cutoff::Finite(_) if excess.abs() <= ERGODIC_MARGIN => Err(Error::SingularParameters(
            format!("p + q = {} is too close to 1 for the closed form", p + q),
        )),
        _ => Ok(()),
    }
}

fn check_q_margin(q: f64) -> Result<()> {
    if q >= 1.0 - ERGODIC_MARGIN {
        Err(Error::domain(format!("q = {q} too close to 1")))
    } else {
        Ok(())
    }
}

fn check_ratio(a: f64) -> Result<()> {
    if a > 0.0 && a <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("ratio a = {a} must lie in (0, 1]")))
    }
}

/// `(1 - p)^K / q^K`, zero in the infinite limit.
fn tail_ratio(p: f64, q: f64, cutoff: Cutoff) -> f64 {
    match cutoff {
        Cutoff::Finite(k) => ((1.0 - p) / q).powi(k as i32),
        Cutoff::Infinite => 0.0,
    }
}

/// Normalizer `D` of the time-average state probabilities.
fn normalizer(p: f64, q: f64, alpha: f64, a: f64, cutoff: Cutoff) -> f64 {
    let tail = tail_ratio(p, q, cutoff);
    (1.0 + a - alpha) * (p * q - (1.0 - q) * (1.0 - p) * tail) + alpha * (p + q - 1.0)
}

/// Time-average state probabilities of the HOL chain with finite cut-off `k`.
pub fn hol_equilibrium(p: f64, q: f64, k: u32, alpha: f64, a: f64) -> Result<HolEquilibrium> {
    check_common(p, q, alpha)?;
    check_ratio(a)?;
    let cutoff = Cutoff::Finite(k);
    check_recurrence(p, q, cutoff)?;

    let excess = p + q - 1.0;
    let d = normalizer(p, q, alpha, a, cutoff);
    let r = (1.0 - p) / q;
    let len = k as usize + 1;
    let mut f_tilde = Vec::with_capacity(len);
    let mut s_tilde = Vec::with_capacity(len);
    let mut w_tilde = Vec::with_capacity(len);
    for i in 0..len {
        // The last phase is only left through a success, hence no factor p.
        let head = if i == k as usize {
            excess / d
        } else {
            p * excess / d
        };
        let geo_f = (1.0 - p).powi(i as i32);
        let geo_s = r.powi(i as i32);
        f_tilde.push(alpha * head * geo_f);
        s_tilde.push(a * head * geo_s);
        w_tilde.push((1.0 - alpha) * head * geo_s);
    }
    if f_tilde
        .iter()
        .chain(&s_tilde)
        .chain(&w_tilde)
        .any(|v| !v.is_finite())
    {
        return Err(Error::SingularParameters(format!(
            "state probabilities overflow for p = {p}, q = {q}, K = {k}"
        )));
    }
    let s_total: f64 = s_tilde.iter().sum();
    let phi = s_tilde.iter().map(|s| s / s_total).collect();
    Ok(HolEquilibrium {
        f_tilde,
        s_tilde,
        w_tilde,
        d_norm: d,
        phi,
    })
}

/// Offered load `rho = lambda / f_0`, the probability that a node's queue is
/// non-empty.
pub fn offered_load(
    lambda: f64,
    p: f64,
    q: f64,
    cutoff: Cutoff,
    alpha: f64,
    a: f64,
) -> Result<OfferedLoad> {
    check_common(p, q, alpha)?;
    check_ratio(a)?;
    check_recurrence(p, q, cutoff)?;
    if !(lambda >= 0.0) {
        return Err(Error::domain(format!(
            "arrival rate {lambda} must be non-negative"
        )));
    }
    let tail = tail_ratio(p, q, cutoff);
    let rho = lambda * (1.0 + a - alpha) / (alpha * p * (p + q - 1.0))
        * (p * q - (1.0 - q) * (1.0 - p) * tail)
        + lambda / p;
    Ok(OfferedLoad {
        rho,
        overloaded: rho > 1.0,
    })
}

/// Closed-form moments for Geometric Retransmission (K = 1).
pub fn service_moments_geometric(p: f64, q: f64, m: u32, alpha: f64) -> Result<ServiceMoments> {
    check_common(p, q, alpha)?;
    check_q_margin(q)?;
    if m == 0 {
        return Err(Error::domain("M must be positive"));
    }
    let mf = m as f64;
    let a = 1.0 / mf;
    let mean = a * ((1.0 - p) * (mf + 1.0 + mf * alpha * q - mf * alpha) + p * q * (mf + 1.0))
        / (alpha * p * q);

    let idle_cost = 1.0 + mf - alpha * mf;
    // The last term carries (1 - p); without it E[X^2] is overstated by
    // exactly `a` (see `printed_polynomial_overstates_by_a` below).
    let poly = alpha * q * (4.0 * mf + p) * (1.0 - p) * idle_cost
        + 2.0 * (1.0 - p) * (idle_cost * idle_cost + (alpha * q * mf).powi(2))
        + alpha * p * q * q * (1.0 + mf) * (2.0 * mf - alpha * mf + p)
        + p * q * (2.0 * mf - alpha * mf + 2.0) * (p * q + 1.0 - p) * (1.0 - alpha) * (1.0 + mf)
        + alpha * alpha * p * q * q * mf * (1.0 - p);
    let second = a * a * poly / (alpha * alpha * p * p * q * q);
    Ok(ServiceMoments {
        mean,
        second,
        divergent: false,
    })
}

/// Closed-form moments for Exponential Backoff (K = infinity).
///
/// The second moment is finite iff `q^2 > 1 - p`; otherwise `divergent` is
/// set and `second` is infinite.
pub fn service_moments_exponential(p: f64, q: f64, m: u32, alpha: f64) -> Result<ServiceMoments> {
    check_common(p, q, alpha)?;
    check_q_margin(q)?;
    check_recurrence(p, q, Cutoff::Infinite)?;
    if m == 0 {
        return Err(Error::domain("M must be positive"));
    }
    let gap = p + q * q - 1.0;
    if gap.abs() <= ERGODIC_MARGIN {
        return Err(Error::SingularParameters(format!(
            "p + q^2 = {} is too close to 1",
            p + q * q
        )));
    }
    let mf = m as f64;
    let a = 1.0 / mf;
    let excess = p + q - 1.0;
    let idle_cost = mf + 1.0 - mf * alpha;

    // Mean time to success from phase i, in mini-slots: kappa q^{-i} + mu.
    let mu = mf / p;
    let kappa = idle_cost * q / (alpha * excess);
    let first = kappa + mu;
    let mean = a * first;

    if gap < 0.0 {
        return Ok(ServiceMoments {
            mean,
            second: f64::INFINITY,
            divergent: true,
        });
    }

    // v_i = R_i + (1 - p) v_{i+1} with R_i = c0 + c1 q^{-i} + c2 q^{-2i};
    // summing the three geometric series gives v_0 = S''_0(1).
    let c2 = 2.0 * idle_cost * kappa / alpha;
    let c1 = (1.0 - alpha) * (mf + 1.0) * mf / alpha + 2.0 * idle_cost * mu / alpha - 2.0 * kappa
        + 2.0 * (mf + 1.0) * (1.0 - p) * kappa / q;
    let c0 = mf * (mf + 1.0) - 2.0 * mu + 2.0 * (mf + 1.0) * (1.0 - p) * mu;
    let v0 = c0 / p + c1 / (1.0 - (1.0 - p) / q) + c2 / (1.0 - (1.0 - p) / (q * q));
    Ok(ServiceMoments {
        mean,
        second: a * a * (v0 + first),
        divergent: false,
    })
}

/// Moments for any finite cut-off by solving the generating-function system
/// differentiated at `z = 1`.
///
/// With `W_i(z) = z^M S_i(z)` and `F_i(z) = p z^M + (1-p) z^M S_{j(i)}(z)`,
/// `j(i) = min(i + 1, K)`, each `S_i` satisfies
/// `S_i = alpha (1 - q^i) z S_i + (1 - alpha) z^{M+1} S_i + alpha q^i z^{M+1} (p + (1-p) S_j)`.
/// Dividing row `i` by `alpha q^i` gives `A(z) S(z) = b(z)`, and since
/// `S(1) = 1`:
/// `A(1) S' = b' - A' 1` and `A(1) S'' = b'' - A'' 1 - 2 A' S'`.
pub fn service_moments_numeric(
    p: f64,
    q: f64,
    k: u32,
    m: u32,
    alpha: f64,
) -> Result<ServiceMoments> {
    check_common(p, q, alpha)?;
    check_recurrence(p, q, Cutoff::Finite(k))?;
    if m == 0 {
        return Err(Error::domain("M must be positive"));
    }
    let mf = m as f64;
    let a = 1.0 / mf;
    let len = k as usize + 1;

    let mut a0 = DMatrix::<f64>::zeros(len, len);
    let mut a1 = DMatrix::<f64>::zeros(len, len);
    let mut a2 = DMatrix::<f64>::zeros(len, len);
    for i in 0..len {
        let j = (i + 1).min(len - 1);
        let qi = q.powi(i as i32);
        let scale = alpha * qi;
        if scale == 0.0 {
            return Err(Error::SingularSystem);
        }
        a0[(i, i)] += 1.0;
        a1[(i, i)] -= (alpha * (1.0 - qi) + (1.0 - alpha) * (mf + 1.0)) / scale;
        a2[(i, i)] -= (1.0 - alpha) * (mf + 1.0) * mf / scale;
        a0[(i, j)] -= 1.0 - p;
        a1[(i, j)] -= (1.0 - p) * (mf + 1.0);
        a2[(i, j)] -= (1.0 - p) * (mf + 1.0) * mf;
    }
    let ones = DVector::<f64>::from_element(len, 1.0);
    let b1 = DVector::<f64>::from_element(len, p * (mf + 1.0));
    let b2 = DVector::<f64>::from_element(len, p * (mf + 1.0) * mf);

    let lu = a0.lu();
    let d1 = lu.solve(&(b1 - &a1 * &ones)).ok_or(Error::SingularSystem)?;
    let rhs2 = b2 - &a2 * &ones - 2.0 * (&a1 * &d1);
    let d2 = lu.solve(&rhs2).ok_or(Error::SingularSystem)?;
    if !(d1[0].is_finite() && d2[0].is_finite()) {
        return Err(Error::SingularSystem);
    }
    Ok(ServiceMoments {
        mean: a * d1[0],
        second: a * a * (d2[0] + d1[0]),
        divergent: false,
    })
}

/// Dispatches to the closed forms for K = 1 and K = infinity and to the
/// linear-system route for other finite cut-offs.
pub fn service_moments(
    p: f64,
    q: f64,
    cutoff: Cutoff,
    m: u32,
    alpha: f64,
) -> Result<ServiceMoments> {
    match cutoff {
        Cutoff::Finite(1) => service_moments_geometric(p, q, m, alpha),
        Cutoff::Finite(k) => service_moments_numeric(p, q, k, m, alpha),
        Cutoff::Infinite => service_moments_exponential(p, q, m, alpha),
    }
}

/// Mean sojourn time of a Geo/G/1 queue:
/// `E[T] = E[X] + lambda E[X^2] / (2 (1 - lambda E[X]))`.
pub fn pk_mean_delay(lambda: f64, moments: &ServiceMoments) -> Result<DelayEstimate> {
    if !(lambda >= 0.0) {
        return Err(Error::domain(format!(
            "arrival rate {lambda} must be non-negative"
        )));
    }
    if moments.divergent || !moments.second.is_finite() {
        return Err(Error::UnboundedDelay);
    }
    let utilization = lambda * moments.mean;
    if utilization >= 1.0 {
        return Err(Error::Unstable { utilization });
    }
    Ok(DelayEstimate {
        mean_delay: moments.mean + lambda * moments.second / (2.0 * (1.0 - utilization)),
        utilization,
    })
}
