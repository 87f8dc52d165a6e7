//! Mini-slot simulation of `n` buffered nodes sharing a slotted
//! non-persistent CSMA channel.
//!
//! Timing, in mini-slots:
//! - a node at mini-slot `t` sees the channel state of `t - 1`;
//! - a transmission started at `t` occupies `t..t+M` and its busy period
//!   `t..=t+M`; the outcome reaches the transmitters at `t + M + 1`;
//! - a node sensing a busy channel waits `M` mini-slots and senses again;
//! - each node draws one Bernoulli arrival per packet slot; the packet
//!   lands at a uniformly chosen mini-slot of that slot.

mod node;
mod stats;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::NetworkParams;

pub use node::{HolMode, NodeState};
pub use stats::{attempt_rate_stats, AttemptRateStats};

/// Phases at or above this index share the last occupancy bucket.
pub const PHASE_BUCKETS: usize = 16;

/// Largest phase whose retransmission probability is tabulated; `q^i`
/// underflows to zero well before it for any `q` of practical interest.
const MAX_TABULATED_PHASE: u32 = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: NetworkParams,
    /// Simulated length in mini-slots.
    pub horizon: u64,
    /// Mini-slots discarded before statistics accumulate.
    pub warmup: u64,
    pub seed: u64,
    /// Record the number of attempts in every packet slot.
    pub trace_attempts: bool,
    /// Mini-slots between consecutive backlog samples.
    pub backlog_interval: u64,
}

impl SimConfig {
    pub const DEFAULT_HORIZON: u64 = 10_000_000;
    pub const DEFAULT_WARMUP: u64 = 1_000_000;

    pub fn new(params: NetworkParams) -> Self {
        SimConfig {
            params,
            horizon: Self::DEFAULT_HORIZON,
            warmup: Self::DEFAULT_WARMUP,
            seed: 1,
            trace_attempts: false,
            backlog_interval: 10_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.params.n.finite().is_none() {
            return Err(Error::Config("simulation needs a finite node count".into()));
        }
        if self.warmup >= self.horizon {
            return Err(Error::Config(format!(
                "warmup {} must be shorter than the horizon {}",
                self.warmup, self.horizon
            )));
        }
        if self.backlog_interval == 0 {
            return Err(Error::Config(
                "backlog sampling interval must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BacklogSample {
    pub minislot: u64,
    pub backlog: u64,
}

/// Fractions of mini-slots spent idle, inside a successful busy period and
/// inside a collided one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChannelOccupancy {
    pub idle: f64,
    pub success: f64,
    pub collision: f64,
}

/// Time-average fraction of backlogged nodes in each phase, by HOL mode.
/// Row `i` covers phase `i`; the last row aggregates every higher phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseOccupancy {
    pub sensing: Vec<f64>,
    pub transmitting: Vec<f64>,
    pub waiting: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketCounts {
    pub arrived: u64,
    pub delivered: u64,
    pub final_backlog: u64,
    pub collisions: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    /// Successful packets per packet slot after warmup.
    pub throughput: f64,
    /// Per-packet sojourn from arrival to end of the successful busy
    /// period, in slots. `NaN` when nothing was delivered.
    pub mean_delay: f64,
    pub delay_second_moment: f64,
    /// HOL service time moments, in slots.
    pub service_mean: f64,
    pub service_second: f64,
    pub delivered_after_warmup: u64,
    /// Time-average total number of queued packets after warmup.
    pub mean_backlog: f64,
    pub backlog_trace: Vec<BacklogSample>,
    pub phase_occupancy: PhaseOccupancy,
    pub channel_occupancy: ChannelOccupancy,
    /// Attempts per packet slot of sensed-idle time: the counterpart of the
    /// model's Poisson attempt rate `G`.
    pub measured_attempt_rate: f64,
    /// Fraction of sensing decisions that found the channel idle.
    pub sensed_idle_fraction: f64,
    /// Fraction of resolved transmissions that succeeded.
    pub transmission_success_fraction: f64,
    pub counts: PacketCounts,
    pub attempt_trace: Option<Vec<u32>>,
    pub attempt_stats: Option<AttemptRateStats>,
}

#[derive(Default)]
struct Accumulator {
    successes: u64,
    delay_sum: f64,
    delay_sq_sum: f64,
    service_sum: f64,
    service_sq_sum: f64,
    backlog_sum: f64,
    backlog_samples: u64,
    channel: [u64; 3],
    attempts: u64,
    idle_decision_slots: u64,
    collided_transmissions: u64,
    senses: u64,
    idle_senses: u64,
    occupancy: [[u64; 3]; PHASE_BUCKETS],
}

struct BusyPeriod {
    start: u64,
    transmitters: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelState {
    Idle,
    Success,
    Collision,
}

/// What happened on the channel during one mini-slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MiniSlotOutcome {
    pub minislot: u64,
    /// Whether nodes sensing in this mini-slot found the channel idle.
    pub sensed_idle: bool,
    /// Nodes that started transmitting in this mini-slot.
    pub attempts: u32,
    /// A packet's busy period ended successfully at the start of this mini-slot.
    pub delivered: bool,
    pub channel: ChannelState,
}

/// Step-by-step simulation; `run_simulation` drives it to the horizon.
pub struct Simulator {
    config: SimConfig,
    m: u64,
    lambda: f64,
    max_phase: u32,
    retry_prob: Vec<f64>,
    rngs: Vec<ChaCha8Rng>,
    nodes: Vec<NodeState>,
    busy: Option<BusyPeriod>,
    starters: Vec<usize>,
    backlog: u64,
    counts: PacketCounts,
    acc: Accumulator,
    backlog_trace: Vec<BacklogSample>,
    attempt_trace: Option<Vec<u32>>,
    slot_attempts: u32,
    now: u64,
}

impl Simulator {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let params = &config.params;
        let n = params.n.finite().expect("validated") as usize;
        let m = params.minislots as u64;
        let max_phase = params.cutoff().max_phase();
        let retry_prob = (0..=max_phase.min(MAX_TABULATED_PHASE))
            .map(|i| params.q.powi(i as i32))
            .collect();
        // One independent ChaCha stream per node under the master seed.
        let rngs = (0..n)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(i as u64);
                rng
            })
            .collect();
        Ok(Simulator {
            config: *config,
            m,
            lambda: params.lambda().expect("validated"),
            max_phase,
            retry_prob,
            rngs,
            nodes: (0..n).map(|_| NodeState::new()).collect(),
            busy: None,
            starters: Vec::with_capacity(n),
            backlog: 0,
            counts: PacketCounts {
                arrived: 0,
                delivered: 0,
                final_backlog: 0,
                collisions: 0,
            },
            acc: Accumulator::default(),
            backlog_trace: Vec::with_capacity(
                (config.horizon / config.backlog_interval) as usize + 1,
            ),
            attempt_trace: config
                .trace_attempts
                .then(|| Vec::with_capacity(((config.horizon - config.warmup) / m) as usize + 1)),
            slot_attempts: 0,
            now: 0,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    /// Next mini-slot to be simulated.
    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    /// Total packets queued across all nodes.
    pub fn backlog(&self) -> u64 {
        self.backlog
    }

    pub fn counts(&self) -> PacketCounts {
        PacketCounts {
            final_backlog: self.backlog,
            ..self.counts
        }
    }

    /// Simulates one mini-slot.
    pub fn step(&mut self) -> MiniSlotOutcome {
        let t = self.now;
        let m = self.m;
        let measuring = t >= self.config.warmup;
        let mut delivered = false;

        if self.busy.as_ref().is_some_and(|b| t == b.start + m + 1) {
            let period = self.busy.take().expect("checked");
            if let [winner] = period.transmitters[..] {
                let node = &mut self.nodes[winner];
                let arrival = node
                    .queue
                    .pop_front()
                    .expect("transmitting node has a packet");
                self.backlog -= 1;
                self.counts.delivered += 1;
                delivered = true;
                if measuring {
                    let delay = (t - arrival) as f64 / m as f64;
                    let service = (t - node.hol_since) as f64 / m as f64;
                    let acc = &mut self.acc;
                    acc.successes += 1;
                    acc.delay_sum += delay;
                    acc.delay_sq_sum += delay * delay;
                    acc.service_sum += service;
                    acc.service_sq_sum += service * service;
                }
                node.start_hol(t);
            } else {
                self.counts.collisions += 1;
                if measuring {
                    self.acc.collided_transmissions += period.transmitters.len() as u64;
                }
                for &i in &period.transmitters {
                    let node = &mut self.nodes[i];
                    node.hol_phase = node.hol_phase.saturating_add(1).min(self.max_phase);
                    node.hol_mode = HolMode::Sensing;
                }
            }
        }

        if t.is_multiple_of(m) {
            if let Some(trace) = self.attempt_trace.as_mut() {
                if t >= self.config.warmup + m {
                    trace.push(self.slot_attempts);
                }
            }
            self.slot_attempts = 0;
            for (node, rng) in self.nodes.iter_mut().zip(self.rngs.iter_mut()) {
                if rng.gen::<f64>() < self.lambda {
                    node.pending_arrival = Some(t + rng.gen_range(0..m));
                }
            }
            if measuring {
                self.acc.backlog_sum += self.backlog as f64;
                self.acc.backlog_samples += 1;
            }
        }
        if t.is_multiple_of(self.config.backlog_interval) {
            self.backlog_trace.push(BacklogSample {
                minislot: t,
                backlog: self.backlog,
            });
        }

        let idle = self.busy.is_none();
        self.starters.clear();
        for i in 0..self.nodes.len() {
            let node = &mut self.nodes[i];
            if node.pending_arrival == Some(t) {
                node.pending_arrival = None;
                node.enqueue(t);
                self.backlog += 1;
                self.counts.arrived += 1;
            }
            let sense = match node.hol_mode {
                HolMode::Sensing => true,
                HolMode::Waiting if node.mode_timer == 0 => true,
                HolMode::Waiting => {
                    node.mode_timer -= 1;
                    false
                }
                HolMode::Empty | HolMode::Transmitting => false,
            };
            if sense {
                if measuring {
                    self.acc.senses += 1;
                    self.acc.idle_senses += idle as u64;
                }
                let retry = self
                    .retry_prob
                    .get(node.hol_phase as usize)
                    .copied()
                    .unwrap_or(0.0);
                if !idle {
                    node.hol_mode = HolMode::Waiting;
                    node.mode_timer = m;
                } else if node.hol_phase == 0 || self.rngs[i].gen::<f64>() < retry {
                    node.hol_mode = HolMode::Transmitting;
                    self.starters.push(i);
                } else {
                    node.hol_mode = HolMode::Sensing;
                }
            }
            if measuring {
                let node = &self.nodes[i];
                let row = (node.hol_phase as usize).min(PHASE_BUCKETS - 1);
                match node.hol_mode {
                    HolMode::Sensing => self.acc.occupancy[row][0] += 1,
                    HolMode::Transmitting => self.acc.occupancy[row][1] += 1,
                    HolMode::Waiting => self.acc.occupancy[row][2] += 1,
                    HolMode::Empty => {}
                }
            }
        }
        let attempts = self.starters.len() as u32;
        if attempts > 0 {
            self.slot_attempts += attempts;
            self.busy = Some(BusyPeriod {
                start: t,
                transmitters: self.starters.clone(),
            });
        }

        let channel = match &self.busy {
            None => ChannelState::Idle,
            Some(b) if b.transmitters.len() == 1 => ChannelState::Success,
            Some(_) => ChannelState::Collision,
        };
        if measuring {
            if idle {
                self.acc.idle_decision_slots += 1;
                self.acc.attempts += attempts as u64;
            }
            self.acc.channel[channel as usize] += 1;
        }
        self.now += 1;
        MiniSlotOutcome {
            minislot: t,
            sensed_idle: idle,
            attempts,
            delivered,
            channel,
        }
    }

    /// Summarizes the statistics gathered so far.
    pub fn report(&self) -> Result<SimReport> {
        let acc = &self.acc;
        let m = self.m;
        let measured = self.now.saturating_sub(self.config.warmup) as f64;
        let slots = measured / m as f64;
        let ratio = |num: f64, den: f64, empty: f64| if den == 0.0 { empty } else { num / den };
        let successes = acc.successes as f64;
        let occupied = acc.occupancy.iter().flatten().sum::<u64>() as f64;
        let column = |k: usize| -> Vec<f64> {
            acc.occupancy
                .iter()
                .map(|row| ratio(row[k] as f64, occupied, 0.0))
                .collect()
        };
        // The slot ending exactly at the current time is complete but not
        // yet pushed.
        let m = self.config.params.minislots as u64;
        let attempt_trace = self.attempt_trace.clone().map(|mut trace| {
            if self.now.is_multiple_of(m) && self.now >= self.config.warmup + m {
                trace.push(self.slot_attempts);
            }
            trace
        });
        let attempt_stats = match &attempt_trace {
            Some(trace) if !trace.is_empty() => {
                Some(attempt_rate_stats(trace, self.nodes.len() as u32)?)
            }
            _ => None,
        };

        Ok(SimReport {
            throughput: ratio(successes, slots, 0.0),
            mean_delay: ratio(acc.delay_sum, successes, f64::NAN),
            delay_second_moment: ratio(acc.delay_sq_sum, successes, f64::NAN),
            service_mean: ratio(acc.service_sum, successes, f64::NAN),
            service_second: ratio(acc.service_sq_sum, successes, f64::NAN),
            delivered_after_warmup: acc.successes,
            mean_backlog: ratio(acc.backlog_sum, acc.backlog_samples as f64, 0.0),
            backlog_trace: self.backlog_trace.clone(),
            phase_occupancy: PhaseOccupancy {
                sensing: column(0),
                transmitting: column(1),
                waiting: column(2),
            },
            channel_occupancy: ChannelOccupancy {
                idle: ratio(acc.channel[0] as f64, measured, 0.0),
                success: ratio(acc.channel[1] as f64, measured, 0.0),
                collision: ratio(acc.channel[2] as f64, measured, 0.0),
            },
            measured_attempt_rate: ratio(
                (acc.attempts * m) as f64,
                acc.idle_decision_slots as f64,
                0.0,
            ),
            sensed_idle_fraction: ratio(acc.idle_senses as f64, acc.senses as f64, 1.0),
            transmission_success_fraction: ratio(
                successes,
                (acc.successes + acc.collided_transmissions) as f64,
                1.0,
            ),
            counts: self.counts(),
            attempt_trace,
            attempt_stats,
        })
    }
}

pub fn run_simulation(config: &SimConfig) -> Result<SimReport> {
    let mut sim = Simulator::new(config)?;
    while sim.now() < config.horizon {
        sim.step();
    }
    sim.report()
}
