use std::collections::VecDeque;

/// What the head-of-line packet of a node is doing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HolMode {
    Empty,
    /// Listening to the channel every mini-slot.
    Sensing,
    /// Occupying the channel; the outcome is known when the busy period ends.
    Transmitting,
    /// Backed off for one packet slot after sensing a busy channel.
    Waiting,
}

#[derive(Clone, Debug)]
pub struct NodeState {
    /// Arrival times (mini-slots) of queued packets, HOL first.
    pub queue: VecDeque<u64>,
    /// Number of collisions suffered by the HOL packet, capped at the cut-off.
    pub hol_phase: u32,
    pub hol_mode: HolMode,
    /// Remaining mini-slots before a waiting node senses again.
    pub mode_timer: u64,
    /// Mini-slot at which the current HOL packet reached the head.
    pub(crate) hol_since: u64,
    /// Arrival drawn at the last slot boundary, not yet in the queue.
    pub(crate) pending_arrival: Option<u64>,
}

impl NodeState {
    pub(crate) fn new() -> Self {
        NodeState {
            queue: VecDeque::new(),
            hol_phase: 0,
            hol_mode: HolMode::Empty,
            mode_timer: 0,
            hol_since: 0,
            pending_arrival: None,
        }
    }

    pub(crate) fn enqueue(&mut self, now: u64) {
        self.queue.push_back(now);
        if self.hol_mode == HolMode::Empty {
            self.start_hol(now);
        }
    }

    /// Promotes the next queued packet (if any) to a fresh HOL packet.
    pub(crate) fn start_hol(&mut self, now: u64) {
        self.hol_phase = 0;
        self.mode_timer = 0;
        if self.queue.is_empty() {
            self.hol_mode = HolMode::Empty;
        } else {
            self.hol_mode = HolMode::Sensing;
            self.hol_since = now;
        }
    }
}
