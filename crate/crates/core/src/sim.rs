//! Discrete-event validation of the assignment model.
//!
//! The simulator replays the whole pipeline at packet granularity: packets
//! are generated at the workload rate, assigned to path combinations by the
//! deficit discretizer, serialized through finite FIFO buffers at the true
//! link bandwidths, lost with the true per-path probabilities, and
//! retransmitted when the per-pair timer fires before the acknowledgement
//! returns. Comparing the realized in-time delivery fraction against the LP
//! objective computed from a (possibly distorted) model view quantifies how
//! much model error the assignment tolerates.
//!
//! Randomness is split into independent deterministic streams keyed by
//! (master seed, path, purpose), so adding a draw in one place never shifts
//! the samples used elsewhere and every run is reproducible from its seed.

use crate::lp::{solve, LpError, SolutionStatus, SolverConfig};
use crate::model::{
    build_quality_lp, build_quality_lp_restricted, Combination, DelayModel, ModelError, Network,
    Workload,
};
use crate::scheduler::{next_action, Action, AssignmentState};
use crate::stochastic::TimeoutTable;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Gamma};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("assignment has {got} weights, expected {expected} combinations")]
    AssignmentShape { expected: usize, got: usize },
    #[error("assignment weights must be finite, non-negative, and sum to 1 (mass {0})")]
    BadAssignment(f64),
    #[error("timer table covers {got} paths, network has {expected}")]
    TimerShape { expected: usize, got: usize },
    #[error("simulation needs at least one packet")]
    NoPackets,
    #[error("sweep factors must be positive and finite, got {0}")]
    BadFactor(f64),
    #[error("model LP reported {0:?} instead of an optimum")]
    NotOptimal(SolutionStatus),
}

/// Run parameters. Packet size and rate come from the [`Workload`]; this
/// struct holds what is specific to the simulated realization.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub total_packets: u64,
    /// Tail-drop capacity of each path's FIFO, in packets waiting behind the
    /// one in service.
    pub queue_capacity_packets: usize,
    /// Acknowledgement size. Acknowledgements ride the fastest path without
    /// queuing or loss; the size is carried for reporting only.
    pub ack_bits: u64,
}

impl SimConfig {
    pub fn new(seed: u64, total_packets: u64) -> Self {
        SimConfig {
            seed,
            total_packets,
            queue_capacity_packets: 100,
            ack_bits: 512,
        }
    }
}

/// Aggregate outcome of one simulated run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub generated: u64,
    pub delivered_total: u64,
    pub delivered_in_time: u64,
    pub duplicate_deliveries: u64,
    /// In-time deliveries over generated packets.
    pub realized_quality: f64,
    /// Generation span used for rate normalization (packets times gap).
    pub duration_s: f64,
    pub transmissions_per_path: Vec<u64>,
    pub sent_bits_per_path: Vec<u64>,
    pub realized_cost_per_s: f64,
    pub channel_loss_events: u64,
    pub buffer_drop_events: u64,
    pub blackhole_drop_events: u64,
    pub stale_timeouts: u64,
    /// Terminal packet fates; the four counters sum to `generated`.
    pub fates_delivered: u64,
    pub fates_blackhole: u64,
    pub fates_channel: u64,
    pub fates_buffer: u64,
    /// Arrival-order inversions observed on fixed-delay paths (must be 0;
    /// i.i.d. stochastic delays may genuinely reorder, so those are exempt).
    pub fifo_violations: u64,
    /// One sample per delivered packet: first-copy latency in seconds.
    pub latency_samples_s: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EvKind {
    DataArrival = 0,
    AckArrival = 1,
    Timeout = 2,
    Generate = 3,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    kind: EvKind,
    seq: u64,
    packet: u64,
    /// Path for arrivals, attempt index for timeouts.
    aux: usize,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // simultaneous events resolve deliveries, then acknowledgements,
        // then timers, then new arrivals; the sequence number freezes the
        // remaining ties for reproducibility
        self.time
            .total_cmp(&other.time)
            .then((self.kind as u8).cmp(&(other.kind as u8)))
            .then(self.seq.cmp(&other.seq))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fate {
    Delivered,
    Blackhole,
    Channel,
    Buffer,
}

#[derive(Debug, Clone)]
struct PacketState {
    paths: Vec<usize>,
    born_s: f64,
    delivered: bool,
    /// Sender is done with this packet (acknowledged or terminally failed).
    closed: bool,
    /// Attempt index a pending timer belongs to, if one is armed.
    armed: Option<usize>,
    fate: Option<Fate>,
}

#[derive(Debug, Clone)]
struct Channel {
    busy_until: f64,
    serialization_s: f64,
    fixed_delay: bool,
    last_arrival: f64,
}

fn stream_rng(seed: u64, path: u64, purpose: u64) -> ChaCha12Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&path.to_le_bytes());
    key[16..24].copy_from_slice(&purpose.to_le_bytes());
    ChaCha12Rng::from_seed(key)
}

const PURPOSE_LOSS: u64 = 0;
const PURPOSE_DELAY: u64 = 1;
const PURPOSE_ACK: u64 = 2;

fn min_expected_delay_path(net: &Network) -> Result<usize, ModelError> {
    let mut best: Option<(usize, f64)> = None;
    for (idx, p) in net.paths().iter().enumerate() {
        let e = p.delay.expected_s();
        if e.is_finite() && best.is_none_or(|(_, be)| e < be) {
            best = Some((idx, e));
        }
    }
    best.map(|(i, _)| i).ok_or(ModelError::NoFinitePath)
}

struct Sim<'a> {
    net: &'a Network,
    workload: &'a Workload,
    timers: &'a TimeoutTable,
    cfg: &'a SimConfig,
    heap: BinaryHeap<std::cmp::Reverse<Event>>,
    seq: u64,
    packets: Vec<PacketState>,
    channels: Vec<Channel>,
    rng_loss: Vec<ChaCha12Rng>,
    rng_delay: Vec<ChaCha12Rng>,
    rng_ack: ChaCha12Rng,
    gammas: Vec<Option<Gamma<f64>>>,
    ack_path: usize,
    assigner: AssignmentState,
    gap_s: f64,
    // counters
    transmissions: Vec<u64>,
    delivered_total: u64,
    delivered_in_time: u64,
    duplicates: u64,
    channel_losses: u64,
    buffer_drops: u64,
    blackhole_drops: u64,
    stale_timeouts: u64,
    fifo_violations: u64,
    latencies: Vec<f64>,
}

impl<'a> Sim<'a> {
    fn push(&mut self, time: f64, kind: EvKind, packet: u64, aux: usize) {
        self.seq += 1;
        self.heap.push(std::cmp::Reverse(Event {
            time,
            kind,
            seq: self.seq,
            packet,
            aux,
        }));
    }

    fn sample_delay(&mut self, path: usize) -> f64 {
        match self.net.paths()[path].delay {
            DelayModel::Fixed(d) => d,
            DelayModel::ShiftedGamma { shift_s, .. } => {
                let g = self.gammas[path].as_ref().expect("gamma distribution");
                shift_s + g.sample(&mut self.rng_delay[path])
            }
        }
    }

    fn sample_ack_delay(&mut self) -> f64 {
        match self.net.paths()[self.ack_path].delay {
            DelayModel::Fixed(d) => d,
            DelayModel::ShiftedGamma { shift_s, .. } => {
                let g = self.gammas[self.ack_path].as_ref().expect("gamma ack path");
                shift_s + g.sample(&mut self.rng_ack)
            }
        }
    }

    /// Seal a terminal fate if the packet has no delivery and no pending
    /// retransmission to fall back on.
    fn maybe_seal(&mut self, packet: usize, fate: Fate) {
        let p = &mut self.packets[packet];
        if !p.delivered && p.armed.is_none() && !p.closed {
            p.fate = Some(fate);
            p.closed = true;
        }
    }

    fn transmit(&mut self, packet: usize, attempt: usize, path: usize, now: f64) {
        let combo_len = self.packets[packet].paths.len();
        // arm the retransmission timer first: the sender starts it when it
        // hands the packet down, regardless of what the queue does to it
        if attempt + 1 < combo_len {
            let next_path = self.packets[packet].paths[attempt + 1];
            if let Some(t) = self.timers.chosen_s(path, next_path) {
                self.packets[packet].armed = Some(attempt);
                self.push(now + t, EvKind::Timeout, packet as u64, attempt);
            }
        }

        let ser = self.channels[path].serialization_s;
        let backlog = self.channels[path].busy_until - now;
        if backlog > (self.cfg.queue_capacity_packets as f64 + 1e-6) * ser {
            self.buffer_drops += 1;
            self.maybe_seal(packet, Fate::Buffer);
            return;
        }

        self.transmissions[path] += 1;
        let start = self.channels[path].busy_until.max(now);
        let finish = start + ser;
        self.channels[path].busy_until = finish;

        let tau = self.net.paths()[path].loss_prob;
        if self.rng_loss[path].gen::<f64>() < tau {
            self.channel_losses += 1;
            self.maybe_seal(packet, Fate::Channel);
            return;
        }

        let delay = self.sample_delay(path);
        let arrival = finish + delay;
        if self.channels[path].fixed_delay {
            if arrival < self.channels[path].last_arrival - 1e-9 {
                self.fifo_violations += 1;
            }
            self.channels[path].last_arrival = arrival;
        }
        self.push(arrival, EvKind::DataArrival, packet as u64, path);
    }

    fn on_generate(&mut self, id: u64, now: f64) {
        let flat = self.assigner.select();
        let combo = Combination::from_flat(flat, self.net.n_paths(), self.net.attempts());
        let paths = combo.paths().to_vec();
        debug_assert_eq!(self.packets.len(), id as usize);
        self.packets.push(PacketState {
            paths,
            born_s: now,
            delivered: false,
            closed: false,
            armed: None,
            fate: None,
        });
        let packet = id as usize;
        match next_action(self.net, &combo, 0).expect("first attempt always exists") {
            Action::Drop => {
                self.blackhole_drops += 1;
                self.maybe_seal(packet, Fate::Blackhole);
            }
            Action::Send(path) => self.transmit(packet, 0, path, now),
        }
        if id + 1 < self.cfg.total_packets {
            self.push((id + 1) as f64 * self.gap_s, EvKind::Generate, id + 1, 0);
        }
    }

    fn on_arrival(&mut self, packet: usize, now: f64) {
        if self.packets[packet].delivered {
            self.duplicates += 1;
        } else {
            self.packets[packet].delivered = true;
            self.packets[packet].fate = Some(Fate::Delivered);
            let latency = now - self.packets[packet].born_s;
            self.latencies.push(latency);
            self.delivered_total += 1;
            if latency <= self.workload.lifetime_s {
                self.delivered_in_time += 1;
            }
        }
        let ack_delay = self.sample_ack_delay();
        self.push(now + ack_delay, EvKind::AckArrival, packet as u64, 0);
    }

    fn on_ack(&mut self, packet: usize) {
        let p = &mut self.packets[packet];
        if !p.closed {
            p.closed = true;
            p.armed = None;
        }
    }

    fn on_timeout(&mut self, packet: usize, attempt: usize, now: f64) {
        if self.packets[packet].closed || self.packets[packet].armed != Some(attempt) {
            self.stale_timeouts += 1;
            return;
        }
        self.packets[packet].armed = None;
        let next = attempt + 1;
        let combo = Combination::new(self.packets[packet].paths.clone());
        match next_action(self.net, &combo, next).expect("armed timers imply a next attempt") {
            Action::Drop => {
                self.blackhole_drops += 1;
                self.maybe_seal(packet, Fate::Blackhole);
            }
            Action::Send(path) => self.transmit(packet, next, path, now),
        }
    }
}

/// Replay one workload realization against the (true) network and report the
/// realized delivery, traffic, and loss statistics.
///
/// `assignment` holds one weight per path combination of `net` (which must be
/// blackhole-augmented), normally an LP solution computed from a model view
/// of the same topology. `timers` drives retransmissions; pairs without a
/// feasible timer simply never retransmit.
pub fn simulate(
    net: &Network,
    workload: &Workload,
    assignment: &[f64],
    timers: &TimeoutTable,
    cfg: &SimConfig,
) -> Result<SimReport, SimError> {
    if !net.is_augmented() {
        return Err(SimError::Model(ModelError::NotAugmented));
    }
    workload.validate().map_err(SimError::Model)?;
    let n = net.n_paths();
    if assignment.len() != net.combo_count() {
        return Err(SimError::AssignmentShape {
            expected: net.combo_count(),
            got: assignment.len(),
        });
    }
    let mass: f64 = assignment.iter().sum();
    if !assignment
        .iter()
        .all(|w| w.is_finite() && *w >= -1e-9)
        || (mass - 1.0).abs() > 1e-6
    {
        return Err(SimError::BadAssignment(mass));
    }
    if timers.n_paths() != n {
        return Err(SimError::TimerShape {
            expected: n,
            got: timers.n_paths(),
        });
    }
    if cfg.total_packets == 0 {
        return Err(SimError::NoPackets);
    }
    let ack_path = min_expected_delay_path(net).map_err(SimError::Model)?;

    let clamped: Vec<f64> = assignment.iter().map(|w| w.max(0.0)).collect();
    let gap_s = workload.packet_bits as f64 / workload.rate_bps;
    let channels = net
        .paths()
        .iter()
        .map(|p| Channel {
            busy_until: 0.0,
            serialization_s: workload.packet_bits as f64 / p.bandwidth_bps,
            fixed_delay: matches!(p.delay, DelayModel::Fixed(_)),
            last_arrival: f64::NEG_INFINITY,
        })
        .collect();
    let gammas = net
        .paths()
        .iter()
        .map(|p| match p.delay {
            DelayModel::ShiftedGamma { shape, scale_s, .. } => {
                Some(Gamma::new(shape, scale_s).expect("validated gamma parameters"))
            }
            DelayModel::Fixed(_) => None,
        })
        .collect();

    let mut sim = Sim {
        net,
        workload,
        timers,
        cfg,
        heap: BinaryHeap::new(),
        seq: 0,
        packets: Vec::with_capacity(cfg.total_packets as usize),
        channels,
        rng_loss: (0..n)
            .map(|p| stream_rng(cfg.seed, p as u64, PURPOSE_LOSS))
            .collect(),
        rng_delay: (0..n)
            .map(|p| stream_rng(cfg.seed, p as u64, PURPOSE_DELAY))
            .collect(),
        rng_ack: stream_rng(cfg.seed, ack_path as u64, PURPOSE_ACK),
        gammas,
        ack_path,
        assigner: AssignmentState::new(&clamped),
        gap_s,
        transmissions: vec![0; n],
        delivered_total: 0,
        delivered_in_time: 0,
        duplicates: 0,
        channel_losses: 0,
        buffer_drops: 0,
        blackhole_drops: 0,
        stale_timeouts: 0,
        fifo_violations: 0,
        latencies: Vec::new(),
    };

    sim.push(0.0, EvKind::Generate, 0, 0);
    while let Some(std::cmp::Reverse(ev)) = sim.heap.pop() {
        match ev.kind {
            EvKind::Generate => sim.on_generate(ev.packet, ev.time),
            EvKind::DataArrival => sim.on_arrival(ev.packet as usize, ev.time),
            EvKind::AckArrival => sim.on_ack(ev.packet as usize),
            EvKind::Timeout => sim.on_timeout(ev.packet as usize, ev.aux, ev.time),
        }
    }

    let mut fates = [0u64; 4];
    for p in &sim.packets {
        let fate = p.fate.expect("every packet reaches a terminal state");
        fates[match fate {
            Fate::Delivered => 0,
            Fate::Blackhole => 1,
            Fate::Channel => 2,
            Fate::Buffer => 3,
        }] += 1;
    }

    let duration_s = cfg.total_packets as f64 * gap_s;
    let sent_bits_per_path: Vec<u64> = sim
        .transmissions
        .iter()
        .map(|t| t * workload.packet_bits)
        .collect();
    let realized_cost_per_s = net
        .paths()
        .iter()
        .zip(&sent_bits_per_path)
        .map(|(p, bits)| *bits as f64 * p.cost_per_bit)
        .sum::<f64>()
        / duration_s;

    Ok(SimReport {
        generated: cfg.total_packets,
        delivered_total: sim.delivered_total,
        delivered_in_time: sim.delivered_in_time,
        duplicate_deliveries: sim.duplicates,
        realized_quality: sim.delivered_in_time as f64 / cfg.total_packets as f64,
        duration_s,
        transmissions_per_path: sim.transmissions,
        sent_bits_per_path,
        realized_cost_per_s,
        channel_loss_events: sim.channel_losses,
        buffer_drop_events: sim.buffer_drops,
        blackhole_drop_events: sim.blackhole_drops,
        stale_timeouts: sim.stale_timeouts,
        fates_delivered: fates[0],
        fates_blackhole: fates[1],
        fates_channel: fates[2],
        fates_buffer: fates[3],
        fifo_violations: sim.fifo_violations,
        latency_samples_s: sim.latencies,
    })
}

/// Which path parameter the sensitivity sweep distorts in the model view.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Bandwidth,
    Delay,
    Loss,
}

/// One sweep sample: the model believed `theoretical_quality`, the network
/// delivered `simulated_quality`, and the best single-path assignment under
/// the same model view would have promised `single_path_quality`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub factor: f64,
    pub theoretical_quality: f64,
    pub simulated_quality: f64,
    pub single_path_quality: f64,
}

fn distort(net: &Network, axis: SweepAxis, factor: f64) -> Result<Network, ModelError> {
    let paths = net
        .paths()
        .iter()
        .map(|p| {
            let mut q = p.clone();
            match axis {
                SweepAxis::Bandwidth => q.bandwidth_bps = p.bandwidth_bps * factor,
                SweepAxis::Delay => {
                    q.delay = match p.delay {
                        DelayModel::Fixed(d) => DelayModel::Fixed(d * factor),
                        DelayModel::ShiftedGamma {
                            shift_s,
                            shape,
                            scale_s,
                        } => DelayModel::ShiftedGamma {
                            shift_s: shift_s * factor,
                            shape,
                            scale_s: scale_s * factor,
                        },
                    }
                }
                SweepAxis::Loss => q.loss_prob = (p.loss_prob * factor).min(0.999_999),
            }
            q
        })
        .collect();
    Network::new(paths, net.attempts())
}

/// For each distortion factor: solve the assignment LP against the distorted
/// model view, then replay that assignment (and the model-view timers)
/// against the true network. `net` carries the true parameters and must not
/// be augmented; delays must be fixed (timers come from the deterministic
/// rule). Also reports the best single-real-path quality under the same model
/// view as a baseline.
pub fn sensitivity_sweep(
    net: &Network,
    workload: &Workload,
    axis: SweepAxis,
    factors: &[f64],
    guard_s: f64,
    cfg: &SimConfig,
) -> Result<Vec<SweepPoint>, SimError> {
    if net.is_augmented() {
        return Err(SimError::Model(ModelError::AlreadyAugmented));
    }
    let true_aug = net.augment_blackhole(workload)?;
    let solver = SolverConfig::default();
    let mut points = Vec::with_capacity(factors.len());
    for &factor in factors {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(SimError::BadFactor(factor));
        }
        let model_aug = distort(net, axis, factor)?.augment_blackhole(workload)?;
        let lp = build_quality_lp(&model_aug, workload)?;
        let sol = solve(&lp, &solver)?;
        if sol.status != SolutionStatus::Optimal {
            return Err(SimError::NotOptimal(sol.status));
        }
        let timers = TimeoutTable::fixed(&model_aug, guard_s)?;
        let report = simulate(&true_aug, workload, &sol.x, &timers, cfg)?;

        let mut single_best = 0.0_f64;
        for path in 1..model_aug.n_paths() {
            let (restricted, _) = build_quality_lp_restricted(&model_aug, workload, &[path])?;
            let rsol = solve(&restricted, &solver)?;
            if rsol.status == SolutionStatus::Optimal {
                single_best = single_best.max(rsol.objective_value);
            }
        }

        points.push(SweepPoint {
            factor,
            theoretical_quality: sol.objective_value,
            simulated_quality: report.realized_quality,
            single_path_quality: single_best,
        });
    }
    Ok(points)
}
