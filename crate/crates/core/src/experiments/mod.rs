//! Experiment drivers behind the CLI: region tables, parameter sweeps,
//! single simulations and the validation checklist.

mod config;
mod table;

use rayon::prelude::*;
use serde::Serialize;
use std::fmt;

use crate::channel::{
    attempt_rate_roots, fixed_point_residual, max_throughput, sensed_idle_probability,
    throughput_of_attempt_rate,
};
use crate::error::{Error, Result};
use crate::hol::{service_moments_exponential, service_moments_geometric, service_moments_numeric};
use crate::params::{NetworkParams, Population, Scheme};
use crate::sim::{run_simulation, SimReport};
use crate::stability::{
    operating_point, operating_point_at, q_of_g, stable_regions, OperatingPoint, RegionReport,
    StableInterval,
};

pub use config::{
    population, Axis, ExperimentSpec, RangeSpec, SimOverrides, SimSettings, SpecFile,
};
pub use table::{format_number, CsvTable};

/// Points in the default input-rate grid of `cmd_regions`.
pub const REGION_GRID_POINTS: usize = 100;

fn flag(b: bool) -> Option<f64> {
    Some(if b { 1.0 } else { 0.0 })
}

fn interval_cells(r: &StableInterval) -> [Option<f64>; 2] {
    if r.empty {
        [None, None]
    } else {
        [Some(r.lo), Some(r.hi)]
    }
}

pub struct RegionsOutcome {
    pub table: CsvTable,
    /// Regions at the chosen input rate, when a single one was given.
    pub summary: Option<RegionReport>,
}

/// Region boundaries as a function of the input rate. A scalar `lambda_hat`
/// selects the summary point and the table covers `(0, lambda_max]`; a range
/// replaces the default grid.
pub fn cmd_regions(spec: &ExperimentSpec) -> Result<RegionsOutcome> {
    let n = population(
        spec.n
            .scalar()
            .ok_or_else(|| Error::Config("regions takes a single n".into()))?,
    )?;
    let grid = match spec.lambda_hat {
        Axis::Range(_) => spec.lambda_hat.values()?,
        Axis::Scalar(_) => {
            let lmax = max_throughput(spec.a)?.lambda_max;
            (1..=REGION_GRID_POINTS)
                .map(|i| lmax * i as f64 / REGION_GRID_POINTS as f64)
                .collect()
        }
    };
    let mut table = CsvTable::new(
        format!(
            "stable regions, scheme {}, n {n}, a {}",
            spec.scheme, spec.a
        ),
        &[
            ("lambda_hat", "aggregate input rate (packets/slot)"),
            ("empty", "1 when no stable attempt rate exists"),
            ("g_small", "smaller attempt-rate root G_S"),
            ("g_large", "larger attempt-rate root G_L"),
            ("g_hat_large", "conservative upper attempt rate"),
            ("r1_lo", "region I lower q"),
            ("r1_hi", "region I upper q"),
            ("r2_lo", "region II lower q"),
            ("r2_hi", "region II upper q"),
            ("rd_lo", "bounded-delay region lower q"),
            ("rd_hi", "bounded-delay region upper q"),
        ],
    );
    let rows: Vec<Vec<Option<f64>>> = grid
        .par_iter()
        .map(|&lh| match stable_regions(n, lh, spec.a, spec.scheme) {
            Ok(r) => {
                let mut row = vec![
                    Some(lh),
                    flag(false),
                    Some(r.g_small),
                    Some(r.g_large),
                    Some(r.g_hat_large),
                ];
                for reg in [&r.region_i, &r.region_ii, &r.region_delay] {
                    row.extend(interval_cells(reg));
                }
                row
            }
            Err(_) => {
                let mut row = vec![Some(lh), flag(true)];
                row.resize(11, None);
                row
            }
        })
        .collect();
    for row in rows {
        table.push_row(row)?;
    }
    let summary = match spec.lambda_hat.scalar() {
        Some(lh) => Some(stable_regions(n, lh, spec.a, spec.scheme)?),
        None => None,
    };
    Ok(RegionsOutcome { table, summary })
}

/// Human-readable region summary. Bounds use the shortest round-trip
/// rendering so they equal the report fields exactly.
pub fn format_region_summary(r: &RegionReport) -> String {
    let interval = |name: &str, iv: &StableInterval| {
        if iv.empty {
            format!("{name}: empty\n")
        } else {
            format!(
                "{name}: [{}, {}]{}{}\n",
                iv.lo,
                iv.hi,
                if iv.lo_clamped { " lo clamped" } else { "" },
                if iv.hi_clamped { " hi clamped" } else { "" }
            )
        }
    };
    let mut s = format!(
        "scheme {} n {} lambda_hat {} a {}\nG_S {} G_L {} G_hat_L {}\n",
        r.scheme, r.n, r.lambda_hat, r.a, r.g_small, r.g_large, r.g_hat_large
    );
    s += &interval("region I", &r.region_i);
    s += &interval("region II", &r.region_ii);
    s += &interval("bounded delay", &r.region_delay);
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum SweepVar {
    G,
    Q,
    LambdaHat,
    N,
}

fn swept_variable(spec: &ExperimentSpec) -> Result<SweepVar> {
    let mut swept = Vec::new();
    if spec.g.is_some_and(|g| g.is_range()) {
        swept.push(SweepVar::G);
    }
    if spec.q.is_range() {
        swept.push(SweepVar::Q);
    }
    if spec.lambda_hat.is_range() {
        swept.push(SweepVar::LambdaHat);
    }
    if spec.n.is_range() {
        swept.push(SweepVar::N);
    }
    match swept.as_slice() {
        [v] => Ok(*v),
        [] => Err(Error::Config(
            "sweep needs one range among g, q, lambda_hat and n".into(),
        )),
        _ => Err(Error::Config(
            "sweep takes exactly one swept dimension".into(),
        )),
    }
}

/// Sweeps one dimension. With `g` swept the table is the channel
/// characteristic (throughput and the matching q); otherwise each row is an
/// analytic operating point, plus simulated columns when simulation is on.
/// A row that cannot be computed keeps its swept value and empty cells.
pub fn cmd_sweep(spec: &ExperimentSpec) -> Result<CsvTable> {
    match swept_variable(spec)? {
        SweepVar::G => sweep_attempt_rate(spec),
        var => sweep_operating_points(spec, var),
    }
}

fn sweep_attempt_rate(spec: &ExperimentSpec) -> Result<CsvTable> {
    if spec.sim.enabled == Some(true) {
        return Err(Error::Config(
            "an attempt-rate sweep has no simulated columns".into(),
        ));
    }
    let n = population(spec.n.scalar().expect("only g is swept"))?;
    let lambda_hat = spec.lambda_hat.scalar().expect("only g is swept");
    let gs = spec.g.expect("g is swept").values()?;
    let mut table = CsvTable::new(
        format!(
            "throughput versus attempt rate, scheme {}, n {n}, lambda_hat {lambda_hat}, a {}",
            spec.scheme, spec.a
        ),
        &[
            ("g", "attempt rate (attempts/slot)"),
            ("throughput", "channel throughput (packets/slot)"),
            ("p", "transmission success probability"),
            ("alpha", "probability of sensing the channel idle"),
            ("q", "retransmission factor that sustains g"),
        ],
    );
    let a = spec.a;
    let cutoff = spec.scheme.cutoff();
    let rows: Vec<Vec<Option<f64>>> = gs
        .par_iter()
        .map(|&g| {
            vec![
                Some(g),
                throughput_of_attempt_rate(g, a).ok(),
                (g >= 0.0).then(|| (-a * g).exp()),
                sensed_idle_probability(g, a).ok(),
                q_of_g(g, n, lambda_hat, a, cutoff).ok(),
            ]
        })
        .collect();
    for row in rows {
        table.push_row(row)?;
    }
    Ok(table)
}

const POINT_COLUMNS: &[(&str, &str)] = &[
    ("n", "number of nodes"),
    ("lambda_hat", "aggregate input rate (packets/slot)"),
    ("q", "retransmission factor"),
    ("g", "equilibrium attempt rate (attempts/slot)"),
    ("p", "transmission success probability"),
    ("alpha", "probability of sensing the channel idle"),
    (
        "channel_throughput",
        "channel throughput at g (packets/slot)",
    ),
    ("rho", "offered load per queue"),
    ("service_mean", "mean service time (slots)"),
    ("service_second", "second moment of service time (slots^2)"),
    ("pk_delay", "P-K mean delay (slots)"),
    ("in_region_ii", "1 when q lies in stable region II"),
    (
        "in_region_delay",
        "1 when q lies in the bounded-delay region",
    ),
];

const SIM_COLUMNS: &[(&str, &str)] = &[
    ("sim_throughput", "simulated throughput (packets/slot)"),
    (
        "sim_attempt_rate",
        "simulated attempts per slot of idle channel",
    ),
    ("sim_service_mean", "simulated mean service time (slots)"),
    ("sim_mean_delay", "simulated mean delay (slots)"),
    (
        "sim_mean_backlog",
        "simulated time-average backlog (packets)",
    ),
    (
        "sim_final_backlog",
        "simulated backlog at the horizon (packets)",
    ),
];

fn sweep_operating_points(spec: &ExperimentSpec, var: SweepVar) -> Result<CsvTable> {
    let simulate = spec.sim.enabled.unwrap_or(false);
    let points: Vec<(f64, f64, f64)> = match var {
        SweepVar::Q => spec
            .q
            .values()?
            .into_iter()
            .map(|q| {
                (
                    spec.n.values().unwrap()[0],
                    spec.lambda_hat.values().unwrap()[0],
                    q,
                )
            })
            .collect(),
        SweepVar::LambdaHat => spec
            .lambda_hat
            .values()?
            .into_iter()
            .map(|l| (spec.n.values().unwrap()[0], l, spec.q.values().unwrap()[0]))
            .collect(),
        SweepVar::N => spec
            .n
            .values()?
            .into_iter()
            .map(|n| {
                (
                    n,
                    spec.lambda_hat.values().unwrap()[0],
                    spec.q.values().unwrap()[0],
                )
            })
            .collect(),
        SweepVar::G => unreachable!("handled by sweep_attempt_rate"),
    };
    let mut columns: Vec<(&str, &str)> = POINT_COLUMNS.to_vec();
    if simulate {
        columns.extend_from_slice(SIM_COLUMNS);
    }
    let swept = match var {
        SweepVar::Q => "q",
        SweepVar::LambdaHat => "lambda_hat",
        SweepVar::N => "n",
        SweepVar::G => "g",
    };
    let mut table = CsvTable::new(
        format!(
            "operating points versus {swept}, scheme {}, a {}",
            spec.scheme, spec.a
        ),
        &columns,
    );
    let width = table.width();
    let rows: Vec<Vec<Option<f64>>> = points
        .par_iter()
        .map(|&(n, lh, q)| {
            let mut row = sweep_row(spec, n, lh, q, simulate);
            row.resize(width, None);
            row
        })
        .collect();
    for row in rows {
        table.push_row(row)?;
    }
    Ok(table)
}

fn sweep_row(
    spec: &ExperimentSpec,
    n: f64,
    lambda_hat: f64,
    q: f64,
    simulate: bool,
) -> Vec<Option<f64>> {
    let mut row = vec![Some(n), Some(lambda_hat), Some(q)];
    let params =
        population(n).and_then(|pop| NetworkParams::new(pop, spec.a, lambda_hat, q, spec.scheme));
    let Ok(params) = params else {
        return row;
    };
    match operating_point(&params) {
        Ok(op) => row.extend([
            Some(op.g),
            Some(op.p),
            Some(op.alpha),
            throughput_of_attempt_rate(op.g, spec.a).ok(),
            Some(op.rho),
            op.moments.map(|m| m.mean),
            op.moments.map(|m| m.second),
            op.delay.map(|d| d.mean_delay),
        ]),
        Err(_) => row.extend([None; 8]),
    }
    match stable_regions(params.n, lambda_hat, spec.a, spec.scheme) {
        Ok(r) => row.extend([
            flag(r.region_ii.contains(q)),
            flag(r.region_delay.contains(q)),
        ]),
        Err(_) => row.extend([flag(false), flag(false)]),
    }
    if simulate {
        if let Ok(r) = run_simulation(&spec.sim_config(params)) {
            row.extend([
                Some(r.throughput),
                Some(r.measured_attempt_rate),
                Some(r.service_mean),
                Some(r.mean_delay),
                Some(r.mean_backlog),
                Some(r.counts.final_backlog as f64),
            ]);
        }
    }
    row
}

pub struct SimulateOutcome {
    pub report: SimReport,
    /// Chain evaluated at the simulator's measured attempt rate.
    pub model_at_measured: Option<OperatingPoint>,
    pub backlog: CsvTable,
    pub attempts: Option<CsvTable>,
}

/// One simulation at fixed parameters with its backlog trace and, when an
/// attempts path is set, the per-slot attempt counts.
pub fn cmd_simulate(spec: &ExperimentSpec) -> Result<SimulateOutcome> {
    let params = spec.fixed_params()?;
    let mut cfg = spec.sim_config(params);
    cfg.trace_attempts = spec.attempts_path.is_some();
    cfg.validate()?;
    let report = run_simulation(&cfg)?;
    let title = format!(
        "simulation, scheme {}, n {}, lambda_hat {}, q {}, a {}, seed {}",
        params.scheme, params.n, params.lambda_hat, params.q, spec.a, cfg.seed
    );
    let mut backlog = CsvTable::new(
        format!("{title}: backlog trace"),
        &[
            ("minislot", "simulation time (mini-slots)"),
            ("backlog", "packets queued over all nodes"),
        ],
    );
    for s in &report.backlog_trace {
        backlog.push_row(vec![Some(s.minislot as f64), Some(s.backlog as f64)])?;
    }
    let attempts = match &report.attempt_trace {
        Some(trace) => {
            let mut t = CsvTable::new(
                format!("{title}: attempts per slot after warmup"),
                &[
                    ("slot", "packet slot index after warmup"),
                    ("attempts", "nodes that started a transmission in the slot"),
                ],
            );
            for (i, &g) in trace.iter().enumerate() {
                t.push_row(vec![Some(i as f64), Some(g as f64)])?;
            }
            Some(t)
        }
        None => None,
    };
    let model_at_measured = operating_point_at(&params, report.measured_attempt_rate).ok();
    Ok(SimulateOutcome {
        report,
        model_at_measured,
        backlog,
        attempts,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Bound {
    /// `|measured - expected| <= tolerance`.
    Absolute,
    /// `|measured - expected| <= tolerance * |expected|`.
    Relative,
    /// `measured <= expected`.
    AtMost,
    /// `measured >= expected`.
    AtLeast,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub bound: Bound,
}

impl Check {
    pub fn new(
        name: impl Into<String>,
        measured: f64,
        expected: f64,
        tolerance: f64,
        bound: Bound,
    ) -> Self {
        Check {
            name: name.into(),
            measured,
            expected,
            tolerance,
            bound,
        }
    }

    pub fn passed(&self) -> bool {
        let d = (self.measured - self.expected).abs();
        match self.bound {
            Bound::Absolute => d <= self.tolerance,
            Bound::Relative => d <= self.tolerance * self.expected.abs(),
            Bound::AtMost => self.measured <= self.expected,
            Bound::AtLeast => self.measured >= self.expected,
        }
    }
}

fn show(x: f64) -> String {
    if x != 0.0 && x.abs() < 1e-4 {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        let bound = match self.bound {
            Bound::Absolute => format!("{} +/- {}", show(self.expected), show(self.tolerance)),
            Bound::Relative => {
                format!("{} within {}%", show(self.expected), 100.0 * self.tolerance)
            }
            Bound::AtMost => format!("<= {}", show(self.expected)),
            Bound::AtLeast => format!(">= {}", show(self.expected)),
        };
        write!(
            f,
            "{verdict} {}: measured {} expected {bound}",
            self.name,
            show(self.measured)
        )
    }
}

fn rel_err(x: f64, y: f64) -> f64 {
    ((x - y) / y).abs()
}

/// Reference checks of the analytic model, independent of the spec's
/// scenario.
pub fn analytic_checks() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let roots = attempt_rate_roots(0.3, 0.1)?;
    out.push(Check::new(
        "G_S at lambda_hat 0.3",
        roots.g_small,
        0.475,
        0.035,
        Bound::Absolute,
    ));
    out.push(Check::new(
        "G_L at lambda_hat 0.3",
        roots.g_large,
        18.9,
        0.1,
        Bound::Absolute,
    ));

    let n50 = Population::Finite(50);
    let geo = stable_regions(n50, 0.3, 0.1, Scheme::Geometric)?;
    out.push(Check::new(
        "geometric region II upper q",
        geo.region_ii.hi,
        0.233,
        0.005,
        Bound::Absolute,
    ));
    let exp = stable_regions(n50, 0.3, 0.1, Scheme::Exponential)?;
    out.push(Check::new(
        "exponential region II lower q",
        exp.region_ii.lo,
        0.053,
        0.004,
        Bound::Absolute,
    ));
    out.push(Check::new(
        "exponential delay region lower q",
        exp.region_delay.lo,
        0.22,
        0.01,
        Bound::Absolute,
    ));
    out.push(Check::new(
        "exponential delay region upper q",
        exp.region_delay.hi,
        0.73,
        0.01,
        Bound::Absolute,
    ));

    let (mut worst_k1, mut worst_kinf) = (0.0f64, 0.0f64);
    for &p in &[0.5, 0.7, 0.9, 0.99] {
        for &q in &[0.6, 0.8, 0.95] {
            for &alpha in &[0.3, 0.7, 1.0] {
                for &m in &[2u32, 10, 100] {
                    if p + q <= 1.0 + 1e-9 {
                        continue;
                    }
                    let closed = service_moments_geometric(p, q, m, alpha)?;
                    let numeric = service_moments_numeric(p, q, 1, m, alpha)?;
                    worst_k1 = worst_k1
                        .max(rel_err(closed.mean, numeric.mean))
                        .max(rel_err(closed.second, numeric.second));
                    if q * q > 1.0 - p + 0.05 {
                        let closed = service_moments_exponential(p, q, m, alpha)?;
                        let numeric = service_moments_numeric(p, q, 200, m, alpha)?;
                        worst_kinf = worst_kinf.max(rel_err(closed.mean, numeric.mean));
                    }
                }
            }
        }
    }
    out.push(Check::new(
        "K=1 closed-form moments vs linear system",
        worst_k1,
        1e-8,
        0.0,
        Bound::AtMost,
    ));
    out.push(Check::new(
        "K=inf closed-form mean vs K=200 linear system",
        worst_kinf,
        1e-6,
        0.0,
        Bound::AtMost,
    ));

    let mut worst_residual = 0.0f64;
    for &lh in &[0.1, 0.2, 0.3, 0.5] {
        for &a in &[0.05, 0.1, 0.2] {
            let r = attempt_rate_roots(lh, a)?;
            for p in [r.p_small, r.p_large] {
                worst_residual = worst_residual.max(fixed_point_residual(p, lh, a).abs());
            }
        }
    }
    out.push(Check::new(
        "success-probability fixed-point residual",
        worst_residual,
        1e-10,
        0.0,
        Bound::AtMost,
    ));

    let lmax = max_throughput(0.1)?.lambda_max;
    let grid_max = (1..=100_000)
        .map(|i| throughput_of_attempt_rate(i as f64 * 1e-4, 0.1).unwrap_or(0.0))
        .fold(0.0, f64::max);
    out.push(Check::new(
        "lambda_max vs grid search",
        lmax,
        grid_max,
        1e-6,
        Bound::Absolute,
    ));
    Ok(out)
}

/// Simulation checks at the spec's fixed scenario: throughput, service time
/// and delay against the chain at the measured attempt rate, and the
/// per-slot attempt count against the binomial model.
pub fn simulation_checks(spec: &ExperimentSpec) -> Result<Vec<Check>> {
    let params = spec.fixed_params()?;
    let mut cfg = spec.sim_config(params);
    cfg.trace_attempts = true;
    let r = run_simulation(&cfg)?;
    let mut out = vec![Check::new(
        "simulated throughput vs input rate",
        r.throughput,
        params.lambda_hat,
        0.03,
        Bound::Relative,
    )];
    let model = operating_point_at(&params, r.measured_attempt_rate)?;
    match model.moments {
        Some(m) => out.push(Check::new(
            "simulated mean service time vs chain",
            r.service_mean,
            m.mean,
            0.05,
            Bound::Relative,
        )),
        None => out.push(Check::new(
            "simulated mean service time vs chain",
            r.service_mean,
            f64::NAN,
            0.05,
            Bound::Relative,
        )),
    }
    let pk = model.delay.map_or(f64::NAN, |d| d.mean_delay);
    out.push(Check::new(
        "simulated mean delay vs P-K",
        r.mean_delay,
        pk,
        0.15,
        Bound::Relative,
    ));
    let stats = r
        .attempt_stats
        .ok_or_else(|| Error::Internal("attempt statistics missing".into()))?;
    out.push(Check::new(
        "attempt-count variance / binomial variance",
        stats.variance_ratio(),
        1.0,
        0.15,
        Bound::Absolute,
    ));
    out.push(Check::new(
        "three-sigma coverage of attempt counts",
        stats.three_sigma_coverage,
        0.97,
        0.0,
        Bound::AtLeast,
    ));
    Ok(out)
}

/// Analytic checks, plus simulation checks unless simulation is disabled.
pub fn cmd_validate(spec: &ExperimentSpec) -> Result<Vec<Check>> {
    let mut checks = analytic_checks()?;
    if spec.sim.enabled.unwrap_or(true) {
        checks.extend(simulation_checks(spec)?);
    }
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(json: &str) -> ExperimentSpec {
        SpecFile::from_json(json).unwrap().resolve().unwrap()
    }

    #[test]
    fn summary_matches_region_report() {
        let out = cmd_regions(&spec(r#"{"scheme": "geo"}"#)).unwrap();
        let s = out.summary.unwrap();
        let direct = stable_regions(Population::Finite(50), 0.3, 0.1, Scheme::Geometric).unwrap();
        assert_eq!(s, direct);
        let text = format_region_summary(&s);
        assert!(text.contains(&format!(
            "region II: [{}, {}]",
            direct.region_ii.lo, direct.region_ii.hi
        )));
        assert_eq!(out.table.rows.len(), REGION_GRID_POINTS);
    }

    #[test]
    fn regions_beyond_capacity_are_marked_empty() {
        let out = cmd_regions(&spec(
            r#"{"lambda_hat": {"start": 0.5, "stop": 0.7, "step": 0.1}}"#,
        ))
        .unwrap();
        assert!(out.summary.is_none());
        let empty = out.table.column("empty").unwrap();
        assert_eq!(empty, vec![Some(0.0), Some(0.0), Some(1.0)]);
        assert!(out.table.rows[2][2..].iter().all(Option::is_none));
    }

    #[test]
    fn attempt_rate_sweep_peaks_at_lambda_max() {
        let t = cmd_sweep(&spec(r#"{"g": {"start": 0.01, "stop": 40, "step": 0.01}}"#)).unwrap();
        let g = t.column("g").unwrap();
        let s = t.column("throughput").unwrap();
        let (i, best) = s
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        assert!((best.unwrap() - 0.6245).abs() < 1e-4);
        assert!((g[i].unwrap() - 3.76).abs() < 0.01);
    }

    #[test]
    fn sweep_requires_exactly_one_range() {
        assert!(matches!(
            cmd_sweep(&ExperimentSpec::default()),
            Err(Error::Config(_))
        ));
        let two = spec(
            r#"{"q": {"start": 0.1, "stop": 0.5, "step": 0.1},
                           "n": {"start": 10, "stop": 20, "step": 5}}"#,
        );
        assert!(matches!(cmd_sweep(&two), Err(Error::Config(_))));
    }

    #[test]
    fn q_sweep_keeps_failed_rows() {
        let t = cmd_sweep(&spec(
            r#"{"q": {"start": 0.02, "stop": 0.98, "step": 0.02}}"#,
        ))
        .unwrap();
        assert_eq!(t.rows.len(), 49);
        assert!(t
            .rows
            .iter()
            .all(|r| r.len() == t.width() && r[2].is_some()));
        let inside = t.column("in_region_ii").unwrap();
        assert!(inside.contains(&Some(1.0)));
        assert!(inside.contains(&Some(0.0)));
        // Unbounded second moment below the delay region leaves the P-K cell empty.
        let low = &t.rows[0];
        assert_eq!(low[POINT_COLUMNS.len() - 1], Some(0.0));
        assert!(low[10].is_none());
    }

    #[test]
    fn simulated_sweep_is_ordered_and_deterministic() {
        let s = spec(
            r#"{"n": 10, "lambda_hat": 0.2, "q": {"start": 0.3, "stop": 0.6, "step": 0.1},
                         "sim": {"enabled": true, "horizon": 200000, "warmup": 20000}}"#,
        );
        let a = cmd_sweep(&s).unwrap();
        let b = cmd_sweep(&s).unwrap();
        assert_eq!(a.to_csv_string().unwrap(), b.to_csv_string().unwrap());
        let q = a.column("q").unwrap();
        assert!(q.windows(2).all(|w| w[0] < w[1]));
        let thr = a.column("sim_throughput").unwrap();
        assert!(thr.iter().all(|t| (t.unwrap() - 0.2).abs() < 0.03));
    }

    #[test]
    fn simulate_emits_traces() {
        let mut s =
            spec(r#"{"n": 10, "lambda_hat": 0.2, "sim": {"horizon": 100000, "warmup": 10000}}"#);
        s.attempts_path = Some("unused".into());
        let out = cmd_simulate(&s).unwrap();
        assert_eq!(out.backlog.rows.len(), out.report.backlog_trace.len());
        assert_eq!(out.attempts.unwrap().rows.len(), 9_000);
        assert!(out.model_at_measured.is_some());
        let swept = spec(r#"{"q": {"start": 0.1, "stop": 0.5, "step": 0.1}}"#);
        assert!(cmd_simulate(&swept).is_err());
    }

    #[test]
    fn analytic_checks_pass() {
        for c in analytic_checks().unwrap() {
            assert!(c.passed(), "{c}");
        }
    }

    #[test]
    fn check_bounds() {
        assert!(Check::new("x", 1.04, 1.0, 0.05, Bound::Relative).passed());
        assert!(!Check::new("x", 1.06, 1.0, 0.05, Bound::Relative).passed());
        assert!(!Check::new("x", f64::NAN, 1.0, 0.05, Bound::Absolute).passed());
        assert!(Check::new("x", 0.98, 0.97, 0.0, Bound::AtLeast).passed());
        assert!(!Check::new("x", 2e-10, 1e-10, 0.0, Bound::AtMost).passed());
        assert!(Check::new("x", 2.0, 1.0, 0.0, Bound::AtMost)
            .to_string()
            .starts_with("FAIL"));
    }
}
