use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{minislots_for_ratio, Cutoff, NetworkParams, Population, Scheme};
use crate::sim::SimConfig;

/// Hard cap on the number of points a single range may expand to.
const MAX_RANGE_POINTS: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

/// A parameter that is either fixed or swept over an inclusive range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    Scalar(f64),
    Range(RangeSpec),
}

impl Axis {
    pub fn is_range(&self) -> bool {
        matches!(self, Axis::Range(_))
    }

    pub fn scalar(&self) -> Option<f64> {
        match self {
            Axis::Scalar(x) => Some(*x),
            Axis::Range(_) => None,
        }
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        let r = match self {
            Axis::Scalar(x) => return Ok(vec![*x]),
            Axis::Range(r) => r,
        };
        if !(r.start.is_finite() && r.stop.is_finite() && r.step.is_finite()) {
            return Err(Error::Config(format!("range {r:?} has non-finite bounds")));
        }
        if !(r.step > 0.0) || !(r.stop > r.start) {
            return Err(Error::Config(format!(
                "range {}..{} step {} is empty; need start < stop and step > 0",
                r.start, r.stop, r.step
            )));
        }
        let span = (r.stop - r.start) / r.step;
        if span >= MAX_RANGE_POINTS as f64 {
            return Err(Error::Config(format!("range {r:?} has too many points")));
        }
        let count = (span + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|i| r.start + i as f64 * r.step).collect())
    }
}

impl FromStr for Axis {
    type Err = Error;

    /// Accepts `x` or `start:stop:step`.
    fn from_str(s: &str) -> Result<Self> {
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("'{t}' is not a number")))
        };
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [x] => Ok(Axis::Scalar(num(x)?)),
            [a, b, c] => Ok(Axis::Range(RangeSpec {
                start: num(a)?,
                stop: num(b)?,
                step: num(c)?,
            })),
            _ => Err(Error::Config(format!(
                "'{s}' is neither a number nor start:stop:step"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimOverrides {
    pub enabled: Option<bool>,
    pub horizon: Option<u64>,
    pub warmup: Option<u64>,
    pub seed: Option<u64>,
    pub backlog_interval: Option<u64>,
}

/// Experiment description as read from a JSON file or built from flags.
/// Every field is optional; `merge` lets a second layer override the first.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    /// `geo`, `exp` or `k`.
    pub scheme: Option<String>,
    pub cap_k: Option<u32>,
    pub n: Option<Axis>,
    pub a: Option<f64>,
    pub lambda_hat: Option<Axis>,
    pub q: Option<Axis>,
    /// Attempt rate axis, for throughput-vs-G sweeps.
    pub g: Option<Axis>,
    #[serde(default)]
    pub sim: SimOverrides,
    pub output_path: Option<PathBuf>,
    pub attempts_path: Option<PathBuf>,
}

impl SpecFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// Fields set in `over` replace the ones in `self`.
    pub fn merge(self, over: SpecFile) -> SpecFile {
        SpecFile {
            scheme: over.scheme.or(self.scheme),
            cap_k: over.cap_k.or(self.cap_k),
            n: over.n.or(self.n),
            a: over.a.or(self.a),
            lambda_hat: over.lambda_hat.or(self.lambda_hat),
            q: over.q.or(self.q),
            g: over.g.or(self.g),
            sim: SimOverrides {
                enabled: over.sim.enabled.or(self.sim.enabled),
                horizon: over.sim.horizon.or(self.sim.horizon),
                warmup: over.sim.warmup.or(self.sim.warmup),
                seed: over.sim.seed.or(self.sim.seed),
                backlog_interval: over.sim.backlog_interval.or(self.sim.backlog_interval),
            },
            output_path: over.output_path.or(self.output_path),
            attempts_path: over.attempts_path.or(self.attempts_path),
        }
    }

    pub fn resolve(self) -> Result<ExperimentSpec> {
        let scheme = match self.scheme.as_deref().unwrap_or("exp") {
            "geo" => {
                if matches!(self.cap_k, Some(k) if k != 1) {
                    return Err(Error::Config("geo scheme has cut-off 1".into()));
                }
                Scheme::Geometric
            }
            "exp" => Scheme::Exponential,
            "k" => {
                let k = self
                    .cap_k
                    .ok_or_else(|| Error::Config("scheme k needs cap_k".into()))?;
                Scheme::from_cutoff(Cutoff::Finite(k)).map_err(|e| Error::Config(e.to_string()))?
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown scheme '{other}'; expected geo, exp or k"
                )))
            }
        };
        let a = self.a.unwrap_or(0.1);
        minislots_for_ratio(a).map_err(|e| Error::Config(e.to_string()))?;
        let defaults = SimConfig::new(NetworkParams::new(
            Population::Finite(1),
            a,
            0.1,
            0.5,
            scheme,
        )?);
        let spec = ExperimentSpec {
            scheme,
            n: self.n.unwrap_or(Axis::Scalar(50.0)),
            a,
            lambda_hat: self.lambda_hat.unwrap_or(Axis::Scalar(0.3)),
            q: self.q.unwrap_or(Axis::Scalar(0.4)),
            g: self.g,
            sim: SimSettings {
                enabled: self.sim.enabled,
                horizon: self.sim.horizon.unwrap_or(defaults.horizon),
                warmup: self.sim.warmup.unwrap_or(defaults.warmup),
                seed: self.sim.seed.unwrap_or(defaults.seed),
                backlog_interval: self
                    .sim
                    .backlog_interval
                    .unwrap_or(defaults.backlog_interval),
            },
            output_path: self.output_path,
            attempts_path: self.attempts_path,
        };
        for axis in [&spec.n, &spec.lambda_hat, &spec.q]
            .into_iter()
            .chain(spec.g.as_ref())
        {
            axis.values()?;
        }
        for n in spec.n.values()? {
            population(n)?;
        }
        Ok(spec)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    /// `None` leaves the choice to the command.
    pub enabled: Option<bool>,
    pub horizon: u64,
    pub warmup: u64,
    pub seed: u64,
    pub backlog_interval: u64,
}

/// Fully resolved experiment. Axes are checked to expand to at least one
/// point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub scheme: Scheme,
    pub n: Axis,
    pub a: f64,
    pub lambda_hat: Axis,
    pub q: Axis,
    pub g: Option<Axis>,
    pub sim: SimSettings,
    pub output_path: Option<PathBuf>,
    pub attempts_path: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        SpecFile::default().resolve().expect("defaults are valid")
    }
}

impl ExperimentSpec {
    pub fn sim_config(&self, params: NetworkParams) -> SimConfig {
        SimConfig {
            params,
            horizon: self.sim.horizon,
            warmup: self.sim.warmup,
            seed: self.sim.seed,
            trace_attempts: false,
            backlog_interval: self.sim.backlog_interval,
        }
    }

    /// Parameters when no axis is swept.
    pub fn fixed_params(&self) -> Result<NetworkParams> {
        let scalar = |axis: &Axis, name: &str| {
            axis.scalar()
                .ok_or_else(|| Error::Config(format!("{name} must be a single value here")))
        };
        NetworkParams::new(
            population(scalar(&self.n, "n")?)?,
            self.a,
            scalar(&self.lambda_hat, "lambda_hat")?,
            scalar(&self.q, "q")?,
            self.scheme,
        )
    }
}

/// Node count from an axis value; `inf` means the infinite population.
pub fn population(n: f64) -> Result<Population> {
    if n == f64::INFINITY {
        return Ok(Population::Infinite);
    }
    if !(n >= 1.0 && n.fract() == 0.0 && n <= u32::MAX as f64) {
        return Err(Error::Config(format!(
            "node count {n} must be a positive integer"
        )));
    }
    Ok(Population::Finite(n as u32))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_expand_inclusively() {
        let v = "0.1:0.5:0.1".parse::<Axis>().unwrap().values().unwrap();
        assert_eq!(v.len(), 5);
        assert!((v[4] - 0.5).abs() < 1e-15);
        assert_eq!("3".parse::<Axis>().unwrap().values().unwrap(), vec![3.0]);
        assert!("1:2".parse::<Axis>().is_err());
        assert!("x".parse::<Axis>().is_err());
    }

    #[test]
    fn zero_length_ranges_are_rejected() {
        for s in ["0.3:0.3:0.1", "0.5:0.1:0.1", "0.1:0.5:0", "0.1:0.5:-0.1"] {
            let axis: Axis = s.parse().unwrap();
            assert!(matches!(axis.values(), Err(Error::Config(_))), "{s}");
        }
    }

    #[test]
    fn json_and_flags_merge_with_flags_winning() {
        let file = SpecFile::from_json(
            r#"{"scheme": "k", "cap_k": 4, "n": 20, "q": {"start": 0.1, "stop": 0.9, "step": 0.1},
                "sim": {"horizon": 5000, "seed": 9}}"#,
        )
        .unwrap();
        let flags = SpecFile {
            n: Some(Axis::Scalar(30.0)),
            sim: SimOverrides {
                seed: Some(3),
                ..Default::default()
            },
            ..Default::default()
        };
        let spec = file.merge(flags).resolve().unwrap();
        assert_eq!(spec.scheme, Scheme::KExponential(4));
        assert_eq!(spec.n, Axis::Scalar(30.0));
        assert!(spec.q.is_range());
        assert_eq!(spec.sim.horizon, 5000);
        assert_eq!(spec.sim.seed, 3);
        assert_eq!(spec.sim.warmup, SimConfig::DEFAULT_WARMUP);
    }

    #[test]
    fn bad_specs_are_config_errors() {
        assert!(SpecFile::from_json(r#"{"bogus": 1}"#).is_err());
        let bad = [
            r#"{"scheme": "k"}"#,
            r#"{"scheme": "tcp"}"#,
            r#"{"n": 2.5}"#,
            r#"{"a": 0.3}"#,
            r#"{"q": {"start": 0.4, "stop": 0.4, "step": 0.1}}"#,
        ];
        for text in bad {
            let r = SpecFile::from_json(text).unwrap().resolve();
            assert!(matches!(r, Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn defaults_describe_the_reference_scenario() {
        let spec = ExperimentSpec::default();
        let p = spec.fixed_params().unwrap();
        assert_eq!(p.n, Population::Finite(50));
        assert_eq!(p.minislots, 10);
        assert_eq!(p.scheme, Scheme::Exponential);
        assert_eq!((p.lambda_hat, p.q), (0.3, 0.4));
        assert_eq!(spec.sim.horizon, 10_000_000);
        assert_eq!(spec.sim.warmup, 1_000_000);
        assert_eq!(population(f64::INFINITY).unwrap(), Population::Infinite);
    }
}
