//! Network model, traffic metrics and LP assembly.
//!
//! All quantities are SI: bandwidths and rates in bits/s, delays and
//! lifetimes in seconds, losses as probabilities, costs per bit.
//!
//! A datum's *combination* lists the paths of its successive transmission
//! attempts. Attempt `k` is fired only if every earlier attempt was lost, so
//! it occurs with probability `τ_{i_1}·…·τ_{i_{k-1}}`. Assigning an attempt to
//! the blackhole path (index 0 after augmentation) discards the datum:
//! nothing is physically sent and no later attempt of that combination can
//! occur. The blackhole therefore terminates the attempt chain in every
//! traffic formula below.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid path spec: {0}")]
    InvalidPath(String),
    #[error("invalid workload: {0}")]
    InvalidWorkload(String),
    #[error("network has no finite-delay path")]
    NoFinitePath,
    #[error("network is already blackhole-augmented")]
    AlreadyAugmented,
    #[error("operation requires a blackhole-augmented network")]
    NotAugmented,
    #[error("operation requires fixed delays on every path")]
    NeedsFixedDelays,
    #[error("combination references path {path} but the network has {n} paths")]
    PathOutOfRange { path: usize, n: usize },
    #[error("combination has {got} attempts, network is configured for {expected}")]
    AttemptMismatch { expected: usize, got: usize },
    #[error("assignment vector has length {got}, expected {expected}")]
    ShapeMismatch { expected: usize, got: usize },
}

/// Per-packet propagation delay of a path.
///
/// `Fixed(f64::INFINITY)` is the distinguished blackhole marker: any deadline
/// comparison against it fails, so no infinity arithmetic reaches the LP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DelayModel {
    /// Constant delay in seconds.
    Fixed(f64),
    /// `shift + Gamma(shape, scale)` seconds; mean `shift + shape·scale`.
    ShiftedGamma { shift_s: f64, shape: f64, scale_s: f64 },
}

impl DelayModel {
    pub fn expected_s(&self) -> f64 {
        match *self {
            DelayModel::Fixed(d) => d,
            DelayModel::ShiftedGamma { shift_s, shape, scale_s } => shift_s + shape * scale_s,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(*self, DelayModel::Fixed(d) if d.is_infinite())
    }

    fn validate(&self, blackhole_ok: bool) -> Result<(), ModelError> {
        match *self {
            DelayModel::Fixed(d) => {
                if d.is_nan() || d < 0.0 {
                    return Err(ModelError::InvalidPath(format!("fixed delay {d} s")));
                }
                if d.is_infinite() && !blackhole_ok {
                    return Err(ModelError::InvalidPath(
                        "infinite delay is reserved for the blackhole path".into(),
                    ));
                }
                Ok(())
            }
            DelayModel::ShiftedGamma { shift_s, shape, scale_s } => {
                if !shift_s.is_finite() || shift_s < 0.0 {
                    return Err(ModelError::InvalidPath(format!("gamma shift {shift_s} s")));
                }
                if !shape.is_finite() || shape <= 0.0 || !scale_s.is_finite() || scale_s <= 0.0 {
                    return Err(ModelError::InvalidPath(format!(
                        "gamma shape {shape} / scale {scale_s} must be positive"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// One unidirectional path: capacity, delay, loss and transmission cost.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSpec {
    pub bandwidth_bps: f64,
    pub delay: DelayModel,
    pub loss_prob: f64,
    pub cost_per_bit: f64,
}

impl PathSpec {
    /// The virtual discard path: absorbs exactly the generation rate, never
    /// delivers (infinite delay, certain loss) and costs nothing.
    pub fn blackhole(rate_bps: f64) -> Self {
        PathSpec {
            bandwidth_bps: rate_bps,
            delay: DelayModel::Fixed(f64::INFINITY),
            loss_prob: 1.0,
            cost_per_bit: 0.0,
        }
    }

    pub fn is_blackhole(&self) -> bool {
        self.delay.is_infinite() && self.loss_prob == 1.0
    }

    fn validate(&self, blackhole_ok: bool) -> Result<(), ModelError> {
        if self.bandwidth_bps.is_nan() || self.bandwidth_bps < 0.0 {
            return Err(ModelError::InvalidPath(format!(
                "bandwidth {} bits/s",
                self.bandwidth_bps
            )));
        }
        self.delay.validate(blackhole_ok)?;
        if !(0.0..=1.0).contains(&self.loss_prob) {
            return Err(ModelError::InvalidPath(format!("loss {}", self.loss_prob)));
        }
        if !self.cost_per_bit.is_finite() || self.cost_per_bit < 0.0 {
            return Err(ModelError::InvalidPath(format!("cost {}", self.cost_per_bit)));
        }
        Ok(())
    }
}

/// Traffic demand: generation rate, per-datum lifetime, cost budget and
/// packetization used by the scheduler/simulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub rate_bps: f64,
    pub lifetime_s: f64,
    /// Budget on cost per second; `f64::INFINITY` when unconstrained.
    pub cost_bound: f64,
    pub packet_bits: u64,
}

impl Workload {
    pub fn new(rate_bps: f64, lifetime_s: f64) -> Self {
        Workload { rate_bps, lifetime_s, cost_bound: f64::INFINITY, packet_bits: 8192 }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !self.rate_bps.is_finite() || self.rate_bps <= 0.0 {
            return Err(ModelError::InvalidWorkload(format!("rate {} bits/s", self.rate_bps)));
        }
        if !self.lifetime_s.is_finite() || self.lifetime_s <= 0.0 {
            return Err(ModelError::InvalidWorkload(format!("lifetime {} s", self.lifetime_s)));
        }
        if self.cost_bound.is_nan() || self.cost_bound < 0.0 {
            return Err(ModelError::InvalidWorkload(format!("cost bound {}", self.cost_bound)));
        }
        if self.packet_bits == 0 {
            return Err(ModelError::InvalidWorkload("packet size 0".into()));
        }
        Ok(())
    }
}

/// An ordered set of paths plus the number of transmission attempts `m`
/// (first transmission included) every datum gets.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    paths: Vec<PathSpec>,
    attempts: usize,
    augmented: bool,
}

impl Network {
    pub fn new(paths: Vec<PathSpec>, attempts: usize) -> Result<Self, ModelError> {
        if attempts == 0 {
            return Err(ModelError::InvalidWorkload("attempts must be >= 1".into()));
        }
        if paths.is_empty() {
            return Err(ModelError::InvalidPath("no paths".into()));
        }
        for p in &paths {
            p.validate(false)?;
        }
        if !paths.iter().any(|p| p.delay.expected_s().is_finite()) {
            return Err(ModelError::NoFinitePath);
        }
        Ok(Network { paths, attempts, augmented: false })
    }

    /// Prepend the virtual blackhole path sized to absorb the whole
    /// generation rate. Keeps the assignment LP feasible no matter how scarce
    /// the real capacity is. Path indices shift up by one.
    pub fn augment_blackhole(&self, workload: &Workload) -> Result<Network, ModelError> {
        if self.augmented {
            return Err(ModelError::AlreadyAugmented);
        }
        workload.validate()?;
        let mut paths = Vec::with_capacity(self.paths.len() + 1);
        paths.push(PathSpec::blackhole(workload.rate_bps));
        paths.extend(self.paths.iter().cloned());
        Ok(Network { paths, attempts: self.attempts, augmented: true })
    }

    pub fn paths(&self) -> &[PathSpec] {
        &self.paths
    }

    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn attempts(&self) -> usize {
        self.attempts
    }

    pub fn is_augmented(&self) -> bool {
        self.augmented
    }

    /// Number of path combinations, `n^m`.
    pub fn combo_count(&self) -> usize {
        self.paths.len().pow(self.attempts as u32)
    }

    /// Smallest fixed delay over all paths (the ack return leg). Errors when
    /// any real path is stochastic or no finite delay exists.
    pub fn min_fixed_delay(&self) -> Result<f64, ModelError> {
        let mut min = f64::INFINITY;
        for p in &self.paths {
            match p.delay {
                DelayModel::Fixed(d) => min = min.min(d),
                DelayModel::ShiftedGamma { .. } => return Err(ModelError::NeedsFixedDelays),
            }
        }
        if min.is_finite() {
            Ok(min)
        } else {
            Err(ModelError::NoFinitePath)
        }
    }

    fn require_fixed(&self) -> Result<(), ModelError> {
        for p in &self.paths {
            if matches!(p.delay, DelayModel::ShiftedGamma { .. }) {
                return Err(ModelError::NeedsFixedDelays);
            }
        }
        Ok(())
    }
}

/// Ordered attempt paths of one datum. The flat index packs attempts in
/// base `n`, least-significant digit = first attempt, so at `m = 2` the
/// combination `(i, j)` has index `i + n·j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Combination {
    attempts: Vec<usize>,
}

impl Combination {
    pub fn new(attempts: Vec<usize>) -> Self {
        Combination { attempts }
    }

    pub fn from_flat(mut index: usize, n_paths: usize, attempts: usize) -> Self {
        let mut seq = Vec::with_capacity(attempts);
        for _ in 0..attempts {
            seq.push(index % n_paths);
            index /= n_paths;
        }
        Combination { attempts: seq }
    }

    pub fn flat_index(&self, n_paths: usize) -> usize {
        let mut index = 0usize;
        for &p in self.attempts.iter().rev() {
            index = index * n_paths + p;
        }
        index
    }

    pub fn len(&self) -> usize {
        self.attempts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attempts.is_empty()
    }

    pub fn path(&self, attempt: usize) -> Option<usize> {
        self.attempts.get(attempt).copied()
    }

    pub fn paths(&self) -> &[usize] {
        &self.attempts
    }

    fn check(&self, net: &Network) -> Result<(), ModelError> {
        if self.attempts.len() != net.attempts() {
            return Err(ModelError::AttemptMismatch {
                expected: net.attempts(),
                got: self.attempts.len(),
            });
        }
        for &p in &self.attempts {
            if p >= net.n_paths() {
                return Err(ModelError::PathOutOfRange { path: p, n: net.n_paths() });
            }
        }
        Ok(())
    }
}

/// Probability that attempt `k` of `combo` is actually transmitted: the
/// product of the losses of all earlier attempts, cut to zero once an earlier
/// attempt hit the blackhole (a discarded datum is never retransmitted).
fn attempt_weights(net: &Network, combo: &Combination) -> Vec<f64> {
    let mut w = Vec::with_capacity(combo.len());
    let mut acc = 1.0;
    for &p in combo.paths() {
        w.push(acc);
        let spec = &net.paths()[p];
        acc *= spec.loss_prob;
        if spec.is_blackhole() {
            acc = 0.0;
        }
    }
    w
}

/// Probability that a datum assigned to `combo` arrives within its lifetime.
///
/// Attempt `k` starts after `k−1` timeouts, each spanning the attempt's own
/// delay plus the fastest path's delay for the ack leg, so its arrival time
/// is `Σ_{a≤k} d_{i_a} + (k−1)·d_min`. The attempt contributes when that sum
/// meets the lifetime and the transmission itself survives.
pub fn delivery_prob(
    net: &Network,
    workload: &Workload,
    combo: &Combination,
) -> Result<f64, ModelError> {
    net.require_fixed()?;
    combo.check(net)?;
    let d_min = net.min_fixed_delay()?;
    let weights = attempt_weights(net, combo);
    let mut delay_sum = 0.0;
    let mut prob = 0.0;
    for (k, &p) in combo.paths().iter().enumerate() {
        let spec = &net.paths()[p];
        let d = match spec.delay {
            DelayModel::Fixed(d) => d,
            DelayModel::ShiftedGamma { .. } => unreachable!("checked by require_fixed"),
        };
        delay_sum += d;
        let arrival = delay_sum + k as f64 * d_min;
        if arrival <= workload.lifetime_s {
            prob += weights[k] * (1.0 - spec.loss_prob);
        }
    }
    Ok(prob)
}

/// Expected traffic placed on each path (bits/s) by the assignment `x`,
/// counting first transmissions plus expected retransmissions.
pub fn sent_rate(net: &Network, workload: &Workload, x: &[f64]) -> Result<Vec<f64>, ModelError> {
    if x.len() != net.combo_count() {
        return Err(ModelError::ShapeMismatch { expected: net.combo_count(), got: x.len() });
    }
    let n = net.n_paths();
    let m = net.attempts();
    let mut rates = vec![0.0; n];
    for (l, &mass) in x.iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        let combo = Combination::from_flat(l, n, m);
        let weights = attempt_weights(net, &combo);
        for (k, &p) in combo.paths().iter().enumerate() {
            rates[p] += workload.rate_bps * mass * weights[k];
        }
    }
    Ok(rates)
}

/// Fraction of generated data delivered within its lifetime under `x`.
pub fn quality(net: &Network, workload: &Workload, x: &[f64]) -> Result<f64, ModelError> {
    if x.len() != net.combo_count() {
        return Err(ModelError::ShapeMismatch { expected: net.combo_count(), got: x.len() });
    }
    let n = net.n_paths();
    let m = net.attempts();
    let mut q = 0.0;
    for (l, &mass) in x.iter().enumerate() {
        if mass != 0.0 {
            q += mass * delivery_prob(net, workload, &Combination::from_flat(l, n, m))?;
        }
    }
    Ok(q)
}

/// Expected transmission cost per second under `x`.
pub fn total_cost(net: &Network, workload: &Workload, x: &[f64]) -> Result<f64, ModelError> {
    let rates = sent_rate(net, workload, x)?;
    Ok(rates
        .iter()
        .zip(net.paths())
        .map(|(rate, path)| rate * path.cost_per_bit)
        .sum())
}

/// Retransmission timeout for a datum currently in flight on `path`: its own
/// delay, the ack's return on the fastest path, plus a guard for queuing
/// jitter. `None` for the blackhole (a discard is never retransmitted).
pub fn fixed_timeout(
    net: &Network,
    path: usize,
    guard_s: f64,
) -> Result<Option<f64>, ModelError> {
    if path >= net.n_paths() {
        return Err(ModelError::PathOutOfRange { path, n: net.n_paths() });
    }
    let spec = &net.paths()[path];
    if spec.is_blackhole() {
        return Ok(None);
    }
    let d = match spec.delay {
        DelayModel::Fixed(d) => d,
        DelayModel::ShiftedGamma { .. } => return Err(ModelError::NeedsFixedDelays),
    };
    let d_min = net.min_fixed_delay()?;
    Ok(Some(d + d_min + guard_s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

/// Dense LP in the solver's standard shape:
/// optimize `objective·x` subject to `ineq·x ≤ ineq_rhs`, `eq_row·x = 1`,
/// `x ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub ineq: Vec<Vec<f64>>,
    pub ineq_rhs: Vec<f64>,
    pub eq_row: Vec<f64>,
}

impl LpProblem {
    pub fn n_cols(&self) -> usize {
        self.objective.len()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let cols = self.n_cols();
        if cols == 0 {
            return Err(ModelError::ShapeMismatch { expected: 1, got: 0 });
        }
        if self.eq_row.len() != cols {
            return Err(ModelError::ShapeMismatch { expected: cols, got: self.eq_row.len() });
        }
        if self.ineq.len() != self.ineq_rhs.len() {
            return Err(ModelError::ShapeMismatch {
                expected: self.ineq.len(),
                got: self.ineq_rhs.len(),
            });
        }
        for row in &self.ineq {
            if row.len() != cols {
                return Err(ModelError::ShapeMismatch { expected: cols, got: row.len() });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::InvalidWorkload("non-finite LP coefficient".into()));
            }
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidWorkload("non-finite LP objective".into()));
        }
        // rhs may hold +inf (an unconstrained budget row) but never NaN/-inf
        if self.ineq_rhs.iter().any(|v| v.is_nan() || *v == f64::NEG_INFINITY) {
            return Err(ModelError::InvalidWorkload("invalid LP bound".into()));
        }
        Ok(())
    }
}

/// Delivery probability per combination, expected traffic per path, and
/// expected cost per combination.
type ComboColumns = (Vec<f64>, Vec<Vec<f64>>, Vec<f64>);

/// Per-combination LP coefficients shared by both objectives.
fn combo_columns(
    net: &Network,
    workload: &Workload,
    combos: &[usize],
) -> Result<ComboColumns, ModelError> {
    let n = net.n_paths();
    let m = net.attempts();
    let mut deliver = Vec::with_capacity(combos.len());
    let mut traffic = vec![vec![0.0; combos.len()]; n];
    let mut cost = vec![0.0; combos.len()];
    for (col, &l) in combos.iter().enumerate() {
        let combo = Combination::from_flat(l, n, m);
        deliver.push(delivery_prob(net, workload, &combo)?);
        let weights = attempt_weights(net, &combo);
        for (k, &p) in combo.paths().iter().enumerate() {
            let load = workload.rate_bps * weights[k];
            traffic[p][col] += load;
            cost[col] += load * net.paths()[p].cost_per_bit;
        }
    }
    Ok((deliver, traffic, cost))
}

/// Assemble the delivery-maximization LP over all `n^m` combinations of an
/// augmented network: per-path bandwidth rows, one cost-budget row, and the
/// total-mass equality.
pub fn build_quality_lp(net: &Network, workload: &Workload) -> Result<LpProblem, ModelError> {
    let all: Vec<usize> = (0..net.combo_count()).collect();
    Ok(build_quality_lp_restricted(net, workload, &all)?.0)
}

/// Same LP restricted to combinations whose attempts stay within
/// `allowed_paths` plus the blackhole. Returns the flat combination index of
/// each column. Used for single-path baselines.
pub fn build_quality_lp_restricted(
    net: &Network,
    workload: &Workload,
    allowed_paths: &[usize],
) -> Result<(LpProblem, Vec<usize>), ModelError> {
    if !net.is_augmented() {
        return Err(ModelError::NotAugmented);
    }
    net.require_fixed()?;
    workload.validate()?;
    let n = net.n_paths();
    let m = net.attempts();
    let allowed = |p: usize| p == 0 || allowed_paths.contains(&p);
    let combos: Vec<usize> = (0..net.combo_count())
        .filter(|&l| Combination::from_flat(l, n, m).paths().iter().all(|&p| allowed(p)))
        .collect();
    let (deliver, traffic, cost) = combo_columns(net, workload, &combos)?;
    let mut ineq = traffic;
    let mut ineq_rhs: Vec<f64> = net.paths().iter().map(|p| p.bandwidth_bps).collect();
    ineq.push(cost);
    ineq_rhs.push(workload.cost_bound);
    let problem = LpProblem {
        sense: Sense::Maximize,
        objective: deliver,
        ineq,
        ineq_rhs,
        eq_row: vec![1.0; combos.len()],
    };
    problem.validate()?;
    Ok((problem, combos))
}

/// Assemble the cost-minimization LP: same bandwidth rows, with delivery
/// demanded to reach `min_quality` (encoded as `−p·x ≤ −min_quality`).
pub fn build_cost_lp(
    net: &Network,
    workload: &Workload,
    min_quality: f64,
) -> Result<LpProblem, ModelError> {
    if !net.is_augmented() {
        return Err(ModelError::NotAugmented);
    }
    net.require_fixed()?;
    workload.validate()?;
    if !(0.0..=1.0).contains(&min_quality) {
        return Err(ModelError::InvalidWorkload(format!("quality floor {min_quality}")));
    }
    let all: Vec<usize> = (0..net.combo_count()).collect();
    let (deliver, traffic, cost) = combo_columns(net, workload, &all)?;
    let mut ineq = traffic;
    let mut ineq_rhs: Vec<f64> = net.paths().iter().map(|p| p.bandwidth_bps).collect();
    ineq.push(deliver.iter().map(|p| -p).collect());
    ineq_rhs.push(-min_quality);
    let problem = LpProblem {
        sense: Sense::Minimize,
        objective: cost,
        ineq,
        ineq_rhs,
        eq_row: vec![1.0; all.len()],
    };
    problem.validate()?;
    Ok(problem)
}
