//! Deterministic round-based simulation of the RF/FSO hybrid LOS
//! management protocol: SEARCH broadcast, strongest-beam ACK, LED-RAT
//! maintenance, re-partitioning on association change, graceful and
//! ungraceful termination.

use crate::channel::{los_gain, CoverageGate};
use crate::error::{Error, Result};
use crate::geometry::{PdElement, RoomSpec, TransmitterBoard};
use crate::partition::repartition;
use crate::vec::{Vec2, Vec3};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatState {
    Associated,
    TimingOut,
    Removed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatEntry {
    pub receiver_id: u32,
    pub boards: BTreeSet<u32>,
    pub best_board: u32,
    pub last_ack_round: u64,
    pub state: RatState,
}

/// LED-receiver association table: the bulb's mutable protocol state.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LedRat {
    pub entries: BTreeMap<String, RatEntry>,
    pub round_counter: u64,
}

impl LedRat {
    /// Boards of distinct live receivers never overlap.
    pub fn disjoint(&self) -> bool {
        let mut seen = BTreeSet::new();
        for entry in self.entries.values() {
            if entry.state == RatState::Removed {
                continue;
            }
            for &b in &entry.boards {
                if !seen.insert(b) {
                    return false;
                }
            }
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    /// SEARCH period, seconds.
    pub search_period: f64,
    /// Missed-ACK rounds before timeout.
    pub n_t: u64,
    /// Gate used by the RSSI model when ranking SEARCH frames.
    pub gate: CoverageGate,
    /// FOV of the receivers' PD, degrees.
    pub fov_deg: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            search_period: 0.1,
            n_t: 3,
            gate: CoverageGate::Divergence,
            fov_deg: 90.0,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.search_period <= 0.0 {
            return Err(Error::invalid("search_period", "must be positive"));
        }
        if self.n_t < 1 {
            return Err(Error::invalid("n_t", "must be >= 1"));
        }
        Ok(())
    }
}

/// Protocol frames. SEARCH airtime is not simulated per LED; the sim
/// summarizes each round as (strongest board, power) per receiver, which
/// is all the protocol semantics depend on.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Frame {
    Search { led_local_id: u32 },
    Ack { rf_address: String, led_local_id: u32 },
    Close { rf_address: String },
    Data { payload_dest: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeaveMode {
    Graceful,
    Ungraceful,
}

/// Piecewise-linear floor trajectory plus join/leave bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobilityTrace {
    pub receiver_id: u32,
    pub rf_address: String,
    /// (time s, floor position) waypoints, strictly increasing times.
    pub waypoints: Vec<(f64, Vec2)>,
    pub join_time: f64,
    pub leave_time: f64,
    pub leave_mode: LeaveMode,
}

impl MobilityTrace {
    pub fn validate(&self, room: &RoomSpec) -> Result<()> {
        if self.waypoints.is_empty() {
            return Err(Error::invalid("trace.waypoints", "must be non-empty"));
        }
        for w in self.waypoints.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::invalid(
                    "trace.waypoints",
                    "times must be strictly increasing",
                ));
            }
        }
        for &(_, p) in &self.waypoints {
            if !room.contains_floor_point(p) {
                return Err(Error::invalid("trace.waypoints", "position outside room"));
            }
        }
        if self.leave_time < self.join_time {
            return Err(Error::invalid("trace.leave_time", "must be >= join_time"));
        }
        Ok(())
    }

    pub fn position_at(&self, t: f64) -> Vec2 {
        let first = self.waypoints[0];
        if t <= first.0 {
            return first.1;
        }
        for w in self.waypoints.windows(2) {
            let (t0, p0) = w[0];
            let (t1, p1) = w[1];
            if t <= t1 {
                let f = (t - t0) / (t1 - t0);
                return p0 + (p1 - p0) * f;
            }
        }
        self.waypoints.last().unwrap().1
    }

    /// Presence at the instant of a SEARCH round. A CLOSE taking effect at
    /// time t applies before the round at t; an ungraceful leaver still
    /// ACKs the round at its leave time.
    fn present_at(&self, t: f64) -> bool {
        if t < self.join_time {
            return false;
        }
        match self.leave_mode {
            LeaveMode::Graceful => t < self.leave_time,
            LeaveMode::Ungraceful => t <= self.leave_time,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EventKind {
    Join,
    Ack { board: u32 },
    Associated { board: u32 },
    Handover { from: u32, to: u32 },
    Repartition { boards: BTreeMap<u32, Vec<u32>> },
    Close,
    Removed,
    DataDrop { dest: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub time: f64,
    pub round: u64,
    pub receiver_id: u32,
    pub kind: EventKind,
}

impl Event {
    /// Line-delimited record form of the event log.
    pub fn to_line(&self) -> String {
        let kind = match &self.kind {
            EventKind::Join => "join".to_string(),
            EventKind::Ack { board } => format!("ack board={board}"),
            EventKind::Associated { board } => format!("associated board={board}"),
            EventKind::Handover { from, to } => format!("handover from={from} to={to}"),
            EventKind::Repartition { boards } => {
                let sets: Vec<String> = boards
                    .iter()
                    .map(|(r, bs)| {
                        format!(
                            "{r}:[{}]",
                            bs.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(" ")
                        )
                    })
                    .collect();
                format!("repartition {}", sets.join(";"))
            }
            EventKind::Close => "close".to_string(),
            EventKind::Removed => "removed".to_string(),
            EventKind::DataDrop { dest } => format!("data_drop dest={dest}"),
        };
        format!(
            "{:.6} {} {} {}",
            self.time, self.round, self.receiver_id, kind
        )
    }
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub events: Vec<Event>,
    pub final_rat: LedRat,
}

/// Strongest SEARCH beam at a receiver position: argmax received power,
/// ties to the lower board id, `None` when nothing covers the position.
pub fn select_strongest(
    position: Vec2,
    boards: &[TransmitterBoard],
    gate: CoverageGate,
    fov_deg: f64,
) -> Option<u32> {
    let pd = PdElement::upward(fov_deg);
    let p = Vec3::new(position.x, position.y, 0.0);
    let mut best: Option<(u32, f64)> = None;
    for b in boards {
        let power = b.power * los_gain(b, &pd, p, gate);
        if power <= 0.0 {
            continue;
        }
        best = match best {
            Some((id, w)) if w >= power || (w == power && id < b.id) => Some((id, w)),
            _ => Some((b.id, power)),
        };
    }
    best.map(|(id, _)| id)
}

/// Runs the round-based association protocol over the given traces.
/// Deterministic: identical traces and config produce identical logs.
pub fn run_simulation(
    traces: &[MobilityTrace],
    boards: &[TransmitterBoard],
    room: &RoomSpec,
    config: &ProtocolConfig,
) -> Result<SimOutput> {
    config.validate()?;
    let mut addresses = BTreeSet::new();
    for t in traces {
        t.validate(room)?;
        if !addresses.insert(t.rf_address.clone()) {
            return Err(Error::DuplicateAddress(t.rf_address.clone()));
        }
    }
    let mut sorted: Vec<&MobilityTrace> = traces.iter().collect();
    sorted.sort_by_key(|t| t.receiver_id);

    let end_time = traces
        .iter()
        .map(|t| t.leave_time)
        .fold(0.0f64, f64::max)
        + (config.n_t as f64 + 1.0) * config.search_period;
    let n_rounds = (end_time / config.search_period).ceil() as u64;

    let mut rat = LedRat::default();
    let mut events = Vec::new();
    let mut joined: BTreeSet<u32> = BTreeSet::new();
    let mut closed: BTreeSet<String> = BTreeSet::new();

    for round in 0..=n_rounds {
        let t = round as f64 * config.search_period;
        rat.round_counter = round;

        // CLOSE frames take effect before the SEARCH round at t.
        for trace in &sorted {
            if trace.leave_mode == LeaveMode::Graceful
                && trace.leave_time <= t
                && !closed.contains(&trace.rf_address)
            {
                closed.insert(trace.rf_address.clone());
                if let Some(entry) = rat.entries.get_mut(&trace.rf_address) {
                    if entry.state != RatState::Removed {
                        entry.state = RatState::Removed;
                        entry.boards.clear();
                        events.push(Event {
                            time: t,
                            round,
                            receiver_id: trace.receiver_id,
                            kind: EventKind::Close,
                        });
                        do_repartition(
                            &mut rat, &mut events, t, round, trace.receiver_id, sorted.as_slice(),
                            boards, room,
                        );
                    }
                }
            }
        }

        // SEARCH round: receivers ACK their strongest beam, in id order.
        for trace in &sorted {
            if !trace.present_at(t) {
                continue;
            }
            if !joined.contains(&trace.receiver_id) {
                joined.insert(trace.receiver_id);
                events.push(Event {
                    time: t,
                    round,
                    receiver_id: trace.receiver_id,
                    kind: EventKind::Join,
                });
            }
            let pos = trace.position_at(t);
            let Some(k) = select_strongest(pos, boards, config.gate, config.fov_deg) else {
                continue;
            };
            events.push(Event {
                time: t,
                round,
                receiver_id: trace.receiver_id,
                kind: EventKind::Ack { board: k },
            });
            match rat.entries.get_mut(&trace.rf_address) {
                None => {
                    rat.entries.insert(
                        trace.rf_address.clone(),
                        RatEntry {
                            receiver_id: trace.receiver_id,
                            boards: BTreeSet::new(),
                            best_board: k,
                            last_ack_round: round,
                            state: RatState::Associated,
                        },
                    );
                    events.push(Event {
                        time: t,
                        round,
                        receiver_id: trace.receiver_id,
                        kind: EventKind::Associated { board: k },
                    });
                    do_repartition(
                        &mut rat, &mut events, t, round, trace.receiver_id, sorted.as_slice(),
                        boards, room,
                    );
                }
                Some(entry) if entry.state == RatState::Removed => {
                    // Re-entry after a timeout: fresh association.
                    entry.state = RatState::Associated;
                    entry.best_board = k;
                    entry.last_ack_round = round;
                    events.push(Event {
                        time: t,
                        round,
                        receiver_id: trace.receiver_id,
                        kind: EventKind::Associated { board: k },
                    });
                    do_repartition(
                        &mut rat, &mut events, t, round, trace.receiver_id, sorted.as_slice(),
                        boards, room,
                    );
                }
                Some(entry) => {
                    entry.last_ack_round = round;
                    entry.state = RatState::Associated;
                    if entry.best_board != k {
                        let from = entry.best_board;
                        entry.best_board = k;
                        events.push(Event {
                            time: t,
                            round,
                            receiver_id: trace.receiver_id,
                            kind: EventKind::Handover { from, to: k },
                        });
                        do_repartition(
                            &mut rat, &mut events, t, round, trace.receiver_id,
                            sorted.as_slice(), boards, room,
                        );
                    }
                }
            }
        }

        // Timeout pass: n_t missed rounds in a row.
        let mut timed_out = Vec::new();
        for (addr, entry) in rat.entries.iter_mut() {
            if entry.state == RatState::Removed {
                continue;
            }
            let missed = round.saturating_sub(entry.last_ack_round);
            if missed >= config.n_t {
                entry.state = RatState::Removed;
                entry.boards.clear();
                timed_out.push((addr.clone(), entry.receiver_id));
            } else if missed > 0 {
                entry.state = RatState::TimingOut;
            }
        }
        for (_, receiver_id) in timed_out {
            events.push(Event {
                time: t,
                round,
                receiver_id,
                kind: EventKind::Removed,
            });
            do_repartition(
                &mut rat, &mut events, t, round, receiver_id, sorted.as_slice(), boards, room,
            );
        }
    }

    Ok(SimOutput {
        events,
        final_rat: rat,
    })
}

/// Recomputes the partition over all live receivers and rewrites their
/// LED-RAT board sets.
#[allow(clippy::too_many_arguments)]
fn do_repartition(
    rat: &mut LedRat,
    events: &mut Vec<Event>,
    t: f64,
    round: u64,
    triggered_by: u32,
    traces: &[&MobilityTrace],
    boards: &[TransmitterBoard],
    room: &RoomSpec,
) {
    let live: Vec<(u32, Vec2)> = traces
        .iter()
        .filter_map(|trace| {
            let entry = rat.entries.get(&trace.rf_address)?;
            if entry.state == RatState::Removed {
                return None;
            }
            Some((trace.receiver_id, trace.position_at(t)))
        })
        .collect();
    let mut sets: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    if !live.is_empty() {
        if let Ok(partition) = repartition(&live, boards, room) {
            for entry in rat.entries.values_mut() {
                if entry.state != RatState::Removed {
                    entry.boards = partition
                        .boards_of(entry.receiver_id)
                        .into_iter()
                        .collect();
                    sets.insert(entry.receiver_id, entry.boards.iter().copied().collect());
                }
            }
        }
    }
    events.push(Event {
        time: t,
        round,
        receiver_id: triggered_by,
        kind: EventKind::Repartition { boards: sets },
    });
}

/// Reverse LED-RAT lookup for a DATA frame; unknown or removed addresses
/// drop with a log entry.
pub fn route_data(frame: &Frame, rat: &LedRat, events: &mut Vec<Event>) -> BTreeSet<u32> {
    let Frame::Data { payload_dest } = frame else {
        panic!("route_data expects a DATA frame");
    };
    match rat.entries.get(payload_dest) {
        Some(entry) if entry.state != RatState::Removed => entry.boards.clone(),
        _ => {
            events.push(Event {
                time: rat.round_counter as f64,
                round: rat.round_counter,
                receiver_id: u32::MAX,
                kind: EventKind::DataDrop {
                    dest: payload_dest.clone(),
                },
            });
            BTreeSet::new()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReceiverStats {
    pub receiver_id: u32,
    pub handover_count: usize,
    /// Rounds from join to first association; 1 when the first SEARCH
    /// round is answered.
    pub association_latency_rounds: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HandoverStats {
    pub per_receiver: Vec<ReceiverStats>,
    pub repartition_count: usize,
}

pub fn handover_stats(events: &[Event]) -> HandoverStats {
    let mut joins: BTreeMap<u32, u64> = BTreeMap::new();
    let mut first_assoc: BTreeMap<u32, u64> = BTreeMap::new();
    let mut handovers: BTreeMap<u32, usize> = BTreeMap::new();
    let mut repartition_count = 0;
    for e in events {
        match &e.kind {
            EventKind::Join => {
                joins.entry(e.receiver_id).or_insert(e.round);
                handovers.entry(e.receiver_id).or_insert(0);
            }
            EventKind::Associated { .. } => {
                first_assoc.entry(e.receiver_id).or_insert(e.round);
            }
            EventKind::Handover { .. } => {
                *handovers.entry(e.receiver_id).or_insert(0) += 1;
            }
            EventKind::Repartition { .. } => repartition_count += 1,
            _ => {}
        }
    }
    let per_receiver = joins
        .iter()
        .map(|(&id, &join_round)| ReceiverStats {
            receiver_id: id,
            handover_count: handovers.get(&id).copied().unwrap_or(0),
            association_latency_rounds: first_assoc.get(&id).map(|&r| r - join_round + 1),
        })
        .collect();
    HandoverStats {
        per_receiver,
        repartition_count,
    }
}
