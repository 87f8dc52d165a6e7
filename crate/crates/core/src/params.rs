//! Scenario parameterization shared by the analytic modules, the simulator
//! and the CLI.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// Number of buffered nodes sharing the channel.
///
/// `Infinite` is only meaningful for region limits; the simulator and the
/// per-node rate require a finite population.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Population {
    Finite(u32),
    Infinite,
}

impl Population {
    pub fn finite(self) -> Option<u32> {
        match self {
            Population::Finite(n) => Some(n),
            Population::Infinite => None,
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Population::Finite(n) => n as f64,
            Population::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Population {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Population::Finite(n) => write!(f, "{n}"),
            Population::Infinite => write!(f, "inf"),
        }
    }
}

/// Cut-off phase of the backoff algorithm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cutoff {
    Finite(u32),
    Infinite,
}

impl Cutoff {
    /// Highest phase a packet can reach, saturating for the infinite case.
    pub fn max_phase(self) -> u32 {
        match self {
            Cutoff::Finite(k) => k,
            Cutoff::Infinite => u32::MAX,
        }
    }
}

/// Retransmission scheme. An HOL packet that has collided `i` times retries
/// with probability `q^min(i, K)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// K = 1.
    Geometric,
    /// 1 < K < infinity.
    KExponential(u32),
    /// K = infinity.
    Exponential,
}

impl Scheme {
    /// Builds the scheme matching a cut-off, normalizing K = 1 to `Geometric`.
    pub fn from_cutoff(cutoff: Cutoff) -> Result<Self> {
        match cutoff {
            Cutoff::Finite(0) => Err(Error::domain("cut-off phase K must be at least 1")),
            Cutoff::Finite(1) => Ok(Scheme::Geometric),
            Cutoff::Finite(k) => Ok(Scheme::KExponential(k)),
            Cutoff::Infinite => Ok(Scheme::Exponential),
        }
    }

    pub fn cutoff(self) -> Cutoff {
        match self {
            Scheme::Geometric => Cutoff::Finite(1),
            Scheme::KExponential(k) => Cutoff::Finite(k),
            Scheme::Exponential => Cutoff::Infinite,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Scheme::Geometric => "geo",
            Scheme::KExponential(_) => "k",
            Scheme::Exponential => "exp",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Geometric => write!(f, "geometric"),
            Scheme::KExponential(k) => write!(f, "{k}-exponential"),
            Scheme::Exponential => write!(f, "exponential"),
        }
    }
}

/// Converts a propagation-delay ratio into the number of mini-slots per
/// packet slot, rejecting ratios that are not reciprocal integers.
pub fn minislots_for_ratio(a: f64) -> Result<u32> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::domain(format!("ratio a = {a} must lie in (0, 1]")));
    }
    let m = (1.0 / a).round();
    if (m * a - 1.0).abs() > 1e-9 || m > u32::MAX as f64 {
        return Err(Error::domain(format!(
            "ratio a = {a} is not the reciprocal of an integer"
        )));
    }
    Ok(m as u32)
}

/// Full parameterization of a scenario.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub n: Population,
    /// Mini-slots per packet slot, `M = 1/a`.
    pub minislots: u32,
    /// Aggregate input rate in packets/slot.
    pub lambda_hat: f64,
    pub q: f64,
    pub scheme: Scheme,
}

impl NetworkParams {
    pub fn new(n: Population, a: f64, lambda_hat: f64, q: f64, scheme: Scheme) -> Result<Self> {
        let minislots = minislots_for_ratio(a)?;
        let params = NetworkParams {
            n,
            minislots,
            lambda_hat,
            q,
            scheme,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.minislots == 0 {
            return Err(Error::domain("M must be a positive integer"));
        }
        if let Population::Finite(0) = self.n {
            return Err(Error::domain("node count must be positive"));
        }
        if let Scheme::KExponential(k) = self.scheme {
            if k < 2 {
                return Err(Error::domain("K-exponential scheme needs K >= 2"));
            }
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::domain(format!("q = {} must lie in (0, 1)", self.q)));
        }
        if !(self.lambda_hat >= 0.0) {
            return Err(Error::domain("aggregate input rate must be non-negative"));
        }
        if let Some(rate) = self.lambda() {
            if rate > 1.0 {
                return Err(Error::domain(format!(
                    "per-node rate {rate} exceeds one packet per slot"
                )));
            }
        }
        Ok(())
    }

    /// Propagation-delay ratio `a = 1/M`.
    pub fn a(&self) -> f64 {
        1.0 / self.minislots as f64
    }

    /// Per-node Bernoulli arrival rate, defined for finite populations.
    pub fn lambda(&self) -> Option<f64> {
        self.n.finite().map(|n| self.lambda_hat / n as f64)
    }

    pub fn cutoff(&self) -> Cutoff {
        self.scheme.cutoff()
    }
}
