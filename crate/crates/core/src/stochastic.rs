//! Shifted-gamma delay models and retransmission-timeout optimisation.
//!
//! When per-path one-way delays are random, a fixed retransmission timer is a
//! compromise: firing early wastes capacity on spurious retransmissions,
//! firing late leaves the second attempt too little of the packet lifetime.
//! This module models each path delay as `shift + Gamma(shape, scale)`,
//! tabulates the acknowledgement-wait distribution (first-attempt delay plus
//! the return delay on the fastest path), and picks the timer that maximises
//! the probability that both windows work out: the first acknowledgement has
//! had time to arrive *and* the retransmission can still meet the deadline.
//!
//! Because that objective is typically flat near its maximum, the optimiser
//! reports the whole near-optimal plateau rather than a single point, and the
//! midpoint is used as the operating timer. The same machinery produces the
//! coefficients of the stochastic assignment LP, where hard delivery
//! indicators are replaced by delivery probabilities and the fixed
//! retransmission fraction by the timer-dependent retransmission probability.

use crate::model::{DelayModel, LpProblem, ModelError, Network, Sense, Workload};
use std::f64::consts::PI;
use thiserror::Error;

/// Default tabulation and timer-search step (1 ms).
pub const DEFAULT_GRID_STEP_S: f64 = 1e-3;
/// Plateau edges are refined at one tenth of the search step (0.1 ms default).
const REFINE_DIVISOR: f64 = 10.0;
/// Relative margin defining the near-optimal plateau.
const PLATEAU_REL_TOL: f64 = 1e-3;
/// Below this success probability a timer is considered useless.
const FEASIBLE_FLOOR: f64 = 1e-6;
/// Probability mass allowed beyond the tabulated support.
const TAIL_MASS: f64 = 1e-9;
/// Minimum number of grid points across a distribution's support, so that
/// narrow (low-variance) distributions stay resolved.
const MIN_GRID_POINTS: usize = 128;

#[derive(Debug, Error)]
pub enum StochasticError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("path {0} does not use a shifted-gamma delay model")]
    NotGamma(usize),
    #[error("path {path} has gamma shape {shape} < 1; densities with a pole at zero are not supported")]
    ShapeBelowOne { path: usize, shape: f64 },
    #[error("grid step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("stochastic LP coefficients are defined for exactly 2 attempts, got {0}")]
    NeedsTwoAttempts(usize),
    #[error("near-optimal timeout region for pair ({first}, {second}) is not contiguous")]
    PlateauFragmented { first: usize, second: usize },
}

// ---------------------------------------------------------------------------
// special functions
// ---------------------------------------------------------------------------

/// Natural log of the gamma function (Lanczos approximation, g = 7, with the
/// reflection formula below 0.5). Accurate to ~1e-14 relative over the ranges
/// used here.
#[allow(clippy::excessive_precision)] // published coefficients kept verbatim
fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        PI.ln() - (PI * x).sin().ln() - ln_gamma(1.0 - x)
    } else {
        let z = x - 1.0;
        let mut a = COEF[0];
        for (k, &c) in COEF.iter().enumerate().skip(1) {
            a += c / (z + k as f64);
        }
        let t = z + 7.5;
        0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + a.ln()
    }
}

/// Regularised lower incomplete gamma function P(a, x): the series expansion
/// below the `x = a + 1` crossover, the Lentz continued fraction for the
/// complement above it.
fn lower_reg_gamma(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0);
    if x <= 0.0 {
        return 0.0;
    }
    if !x.is_finite() {
        return 1.0;
    }
    let log_prefix = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut n = 1.0;
        while n < 500.0 {
            term *= x / (a + n);
            sum += term;
            if term < sum * 1e-16 {
                break;
            }
            n += 1.0;
        }
        (sum.ln() + log_prefix).exp().clamp(0.0, 1.0)
    } else {
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        let mut i = 1.0;
        while i < 500.0 {
            let an = -i * (i - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-15 {
                break;
            }
            i += 1.0;
        }
        (1.0 - log_prefix.exp() * h).clamp(0.0, 1.0)
    }
}

/// CDF of Gamma(shape, scale) at `x` (zero for `x <= 0`).
pub fn gamma_cdf(shape: f64, scale: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    lower_reg_gamma(shape, x / scale)
}

/// Density of Gamma(shape, scale) at `x`.
fn gamma_pdf(shape: f64, scale: f64, x: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    if x == 0.0 {
        return if shape > 1.0 {
            0.0
        } else if shape == 1.0 {
            1.0 / scale
        } else {
            f64::INFINITY
        };
    }
    let u = x / scale;
    ((shape - 1.0) * u.ln() - u - ln_gamma(shape)).exp() / scale
}

// ---------------------------------------------------------------------------
// tabulated distributions
// ---------------------------------------------------------------------------

/// Linear interpolation into a uniformly spaced table, clamped to the end
/// values outside the support.
fn table_at(values: &[f64], step: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return values[0];
    }
    let pos = x / step;
    let k = pos.floor() as usize;
    if k + 1 >= values.len() {
        return *values.last().expect("non-empty table");
    }
    let frac = pos - k as f64;
    values[k] * (1.0 - frac) + values[k + 1] * frac
}

/// CDF and density of one path's gamma component, tabulated on a uniform grid
/// over `[0, hi]` where `hi` carries all but `TAIL_MASS` of the probability.
#[derive(Debug, Clone)]
struct DelayGrid {
    step: f64,
    cdf: Vec<f64>,
    pdf: Vec<f64>,
}

impl DelayGrid {
    fn build(shape: f64, scale: f64, max_step: f64) -> DelayGrid {
        // start from mean + 12 standard deviations and extend until the tail
        // mass target is met (needed for small shapes, where the tail is fat
        // relative to the standard deviation)
        let mut hi = shape * scale + 12.0 * shape.sqrt() * scale;
        let mut rounds = 0;
        while lower_reg_gamma(shape, hi / scale) < 1.0 - TAIL_MASS && rounds < 60 {
            hi *= 1.5;
            rounds += 1;
        }
        // narrow distributions get a proportionally finer step so the density
        // stays resolved; wide ones keep the requested step
        let step = max_step.min(hi / MIN_GRID_POINTS as f64);
        let len = (hi / step).ceil() as usize + 1;
        let mut cdf = Vec::with_capacity(len);
        let mut pdf = Vec::with_capacity(len);
        for k in 0..len {
            let x = k as f64 * step;
            cdf.push(lower_reg_gamma(shape, x / scale));
            pdf.push(gamma_pdf(shape, scale, x));
        }
        DelayGrid { step, cdf, pdf }
    }

    fn hi(&self) -> f64 {
        self.step * (self.cdf.len() - 1) as f64
    }

    fn cdf_at(&self, x: f64) -> f64 {
        table_at(&self.cdf, self.step, x)
    }
}

/// Tabulated CDF of the sum of two independent gamma components (data-path
/// delay plus acknowledgement-path delay), built by trapezoidal convolution.
#[derive(Debug, Clone)]
struct SumCdf {
    step: f64,
    values: Vec<f64>,
}

impl SumCdf {
    fn convolve(first: &DelayGrid, ack: &DelayGrid) -> SumCdf {
        let hi = first.hi() + ack.hi();
        let step = first.step.min(ack.step);
        let len = (hi / step).ceil() as usize + 1;
        let na = ack.pdf.len();
        let mut values = Vec::with_capacity(len);
        for k in 0..len {
            let u = k as f64 * step;
            let mut acc = 0.0;
            for j in 0..na {
                let v = j as f64 * ack.step;
                if v >= u {
                    break;
                }
                let w = if j == 0 || j == na - 1 { 0.5 } else { 1.0 };
                acc += w * ack.pdf[j] * first.cdf_at(u - v);
            }
            values.push((acc * ack.step).clamp(0.0, 1.0));
        }
        // guard against trapezoid wiggle: a CDF must not decrease
        for k in 1..values.len() {
            if values[k] < values[k - 1] {
                values[k] = values[k - 1];
            }
        }
        SumCdf { step, values }
    }

    fn at(&self, x: f64) -> f64 {
        table_at(&self.values, self.step, x)
    }
}

// ---------------------------------------------------------------------------
// timers
// ---------------------------------------------------------------------------

/// Near-optimal retransmission-timer region for one (first path, second path)
/// pair. All quantities in seconds; `objective` is the maximised probability
/// that the first acknowledgement fits before the timer while the second
/// attempt still fits the deadline after it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeoutPlateau {
    pub lo_s: f64,
    pub hi_s: f64,
    pub chosen_s: f64,
    pub objective: f64,
}

/// Outcome of timer optimisation for one ordered path pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeoutEntry {
    Feasible(TimeoutPlateau),
    Infeasible,
}

impl TimeoutEntry {
    pub fn is_feasible(&self) -> bool {
        matches!(self, TimeoutEntry::Feasible(_))
    }

    pub fn chosen_s(&self) -> Option<f64> {
        match self {
            TimeoutEntry::Feasible(p) => Some(p.chosen_s),
            TimeoutEntry::Infeasible => None,
        }
    }

    pub fn plateau(&self) -> Option<&TimeoutPlateau> {
        match self {
            TimeoutEntry::Feasible(p) => Some(p),
            TimeoutEntry::Infeasible => None,
        }
    }
}

/// Retransmission timers for every ordered (first, second) path pair,
/// row-major by first path.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeoutTable {
    n: usize,
    entries: Vec<TimeoutEntry>,
}

impl TimeoutTable {
    pub fn n_paths(&self) -> usize {
        self.n
    }

    /// Entry for the pair (first attempt on `first`, retransmission on
    /// `second`). Panics if an index is out of range.
    pub fn entry(&self, first: usize, second: usize) -> &TimeoutEntry {
        assert!(first < self.n && second < self.n, "path index out of range");
        &self.entries[first * self.n + second]
    }

    pub fn chosen_s(&self, first: usize, second: usize) -> Option<f64> {
        self.entry(first, second).chosen_s()
    }

    /// Deterministic table for fixed-delay networks: the timer after sending
    /// on path `i` is `d_i + d_min + guard` regardless of where the
    /// retransmission goes. Paths with no finite timer (the discard path) get
    /// `Infeasible` rows.
    pub fn fixed(net: &Network, guard_s: f64) -> Result<TimeoutTable, ModelError> {
        let n = net.n_paths();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            let timer = crate::model::fixed_timeout(net, i, guard_s)?;
            for _ in 0..n {
                entries.push(match timer {
                    Some(t) => TimeoutEntry::Feasible(TimeoutPlateau {
                        lo_s: t,
                        hi_s: t,
                        chosen_s: t,
                        objective: 1.0,
                    }),
                    None => TimeoutEntry::Infeasible,
                });
            }
        }
        Ok(TimeoutTable { n, entries })
    }
}

/// Index of the path with the smallest expected delay (used as the
/// acknowledgement return path). Ties go to the lowest index.
pub fn min_delay_path(net: &Network) -> Result<usize, StochasticError> {
    let mut best: Option<(usize, f64)> = None;
    for (idx, path) in net.paths().iter().enumerate() {
        let e = path.delay.expected_s();
        if e.is_finite() && best.is_none_or(|(_, be)| e < be) {
            best = Some((idx, e));
        }
    }
    best.map(|(i, _)| i)
        .ok_or(StochasticError::Model(ModelError::NoFinitePath))
}

/// Linear interpolation of the timer where the objective crosses `threshold`,
/// between a sample below it and an adjacent one at or above it. Falls back
/// to the inside sample when the bracket is degenerate.
fn edge_crossing(outside: (f64, f64), inside: (f64, f64), threshold: f64) -> f64 {
    let (t_out, g_out) = outside;
    let (t_in, g_in) = inside;
    if g_in <= g_out {
        return t_in;
    }
    let frac = ((threshold - g_out) / (g_in - g_out)).clamp(0.0, 1.0);
    t_out + frac * (t_in - t_out)
}

// ---------------------------------------------------------------------------
// the stochastic model
// ---------------------------------------------------------------------------

/// Stochastic LP coefficients for two attempts: delivery probability per
/// combination, traffic rows (bits/s consumed on each path per unit of
/// assignment), and the cost-rate row.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticCoefficients {
    pub delivery: Vec<f64>,
    pub traffic: Vec<Vec<f64>>,
    pub cost: Vec<f64>,
}

/// Cached per-path delay tables for one network whose real paths all use
/// shifted-gamma delays. Borrowing the network keeps the tables and the
/// topology they describe tied together.
#[derive(Debug, Clone)]
pub struct StochasticModel<'a> {
    net: &'a Network,
    step: f64,
    ack_path: usize,
    shifts: Vec<f64>,
    sum_cdfs: Vec<Option<SumCdf>>,
}

impl<'a> StochasticModel<'a> {
    pub fn new(net: &'a Network) -> Result<Self, StochasticError> {
        Self::with_step(net, DEFAULT_GRID_STEP_S)
    }

    /// Builds the model with a custom tabulation/search step, mostly useful
    /// for checking that results are stable under grid refinement.
    pub fn with_step(net: &'a Network, step: f64) -> Result<Self, StochasticError> {
        if !(step.is_finite() && step > 0.0) {
            return Err(StochasticError::BadStep(step));
        }
        let n = net.n_paths();
        let mut shifts = vec![0.0; n];
        let mut grids: Vec<Option<DelayGrid>> = vec![None; n];
        for (idx, path) in net.paths().iter().enumerate() {
            if path.is_blackhole() {
                continue;
            }
            match path.delay {
                DelayModel::ShiftedGamma {
                    shift_s,
                    shape,
                    scale_s,
                } => {
                    if shape < 1.0 {
                        return Err(StochasticError::ShapeBelowOne { path: idx, shape });
                    }
                    shifts[idx] = shift_s;
                    grids[idx] = Some(DelayGrid::build(shape, scale_s, step));
                }
                DelayModel::Fixed(_) => return Err(StochasticError::NotGamma(idx)),
            }
        }
        let ack_path = min_delay_path(net)?;
        let ack_grid = grids[ack_path]
            .as_ref()
            .ok_or(StochasticError::NotGamma(ack_path))?
            .clone();
        let sum_cdfs = grids
            .iter()
            .map(|g| g.as_ref().map(|grid| SumCdf::convolve(grid, &ack_grid)))
            .collect();
        Ok(StochasticModel {
            net,
            step,
            ack_path,
            shifts,
            sum_cdfs,
        })
    }

    pub fn network(&self) -> &Network {
        self.net
    }

    pub fn ack_path(&self) -> usize {
        self.ack_path
    }

    pub fn grid_step_s(&self) -> f64 {
        self.step
    }

    fn check_path(&self, path: usize) -> Result<(), StochasticError> {
        if path >= self.net.n_paths() {
            return Err(StochasticError::Model(ModelError::PathOutOfRange {
                path,
                n: self.net.n_paths(),
            }));
        }
        Ok(())
    }

    /// P(one-way delay on `path` <= `total_delay_s`). Zero for the discard
    /// path, whose delay is infinite.
    pub fn delay_cdf(&self, path: usize, total_delay_s: f64) -> Result<f64, StochasticError> {
        self.check_path(path)?;
        match self.net.paths()[path].delay {
            DelayModel::ShiftedGamma {
                shift_s,
                shape,
                scale_s,
            } => Ok(gamma_cdf(shape, scale_s, total_delay_s - shift_s)),
            DelayModel::Fixed(_) => Ok(0.0),
        }
    }

    /// P(data and acknowledgement round trip completes within `timeout_s` of
    /// sending on `path`), from the tabulated convolution of the data-delay
    /// density with the acknowledgement-path delay.
    fn ack_return_cdf(&self, path: usize, timeout_s: f64) -> Result<f64, StochasticError> {
        let sum = self.sum_cdfs[path]
            .as_ref()
            .ok_or(StochasticError::NotGamma(path))?;
        let shifts = self.shifts[path] + self.shifts[self.ack_path];
        Ok(sum.at(timeout_s - shifts).clamp(0.0, 1.0))
    }

    /// P(first-attempt acknowledgement has not arrived by `timeout_s` after
    /// sending on `path`), i.e. the probability that the timer actually fires
    /// and a retransmission is sent: `1 - H(t - shifts) * (1 - loss)`.
    pub fn retrans_prob(&self, path: usize, timeout_s: f64) -> Result<f64, StochasticError> {
        self.check_path(path)?;
        let h = self.ack_return_cdf(path, timeout_s)?;
        let loss = self.net.paths()[path].loss_prob;
        Ok((1.0 - h * (1.0 - loss)).clamp(0.0, 1.0))
    }

    /// Success-window probability for the pair (first, second) at timer `t`:
    /// the chance that the first acknowledgement fits before `t` while a
    /// retransmission at `t` on `second` still fits the deadline. For a
    /// discard-path `second` only the acknowledgement window matters (the
    /// timer then acts as a pure give-up time).
    fn window_objective(
        &self,
        workload: &Workload,
        first: usize,
        second: usize,
        t: f64,
    ) -> f64 {
        let shifts = self.shifts[first] + self.shifts[self.ack_path];
        let sum = self.sum_cdfs[first].as_ref().expect("real path");
        let h = sum.at(t - shifts);
        if h <= 0.0 {
            return 0.0;
        }
        match self.net.paths()[second].delay {
            DelayModel::ShiftedGamma {
                shift_s,
                shape,
                scale_s,
            } => h * gamma_cdf(shape, scale_s, workload.lifetime_s - shift_s - t),
            // discard path: no delivery window to protect
            DelayModel::Fixed(_) => h,
        }
    }

    /// Finds the retransmission timer for the ordered pair (first, second) by
    /// scanning `[0, lifetime]` at the grid step, then refining the plateau
    /// edges at a tenth of the step. Returns `Infeasible` when no timer gives
    /// the pair a useful success probability (including every pair whose
    /// first attempt is the discard path: a dropped packet is never
    /// retransmitted).
    pub fn optimize_timeout(
        &self,
        workload: &Workload,
        first: usize,
        second: usize,
    ) -> Result<TimeoutEntry, StochasticError> {
        self.check_path(first)?;
        self.check_path(second)?;
        if self.net.paths()[first].is_blackhole() {
            return Ok(TimeoutEntry::Infeasible);
        }
        if self.sum_cdfs[first].is_none() {
            return Err(StochasticError::NotGamma(first));
        }
        let delta = workload.lifetime_s;

        // coarse scan over [0, delta]
        let mut samples: Vec<(f64, f64)> = Vec::new();
        let mut t = 0.0;
        while t < delta {
            samples.push((t, self.window_objective(workload, first, second, t)));
            t += self.step;
        }
        samples.push((delta, self.window_objective(workload, first, second, delta)));

        let coarse_max = samples.iter().map(|&(_, g)| g).fold(0.0, f64::max);
        if coarse_max < FEASIBLE_FLOOR {
            return Ok(TimeoutEntry::Infeasible);
        }
        let coarse_thr = (1.0 - PLATEAU_REL_TOL) * coarse_max;
        let above: Vec<usize> = samples
            .iter()
            .enumerate()
            .filter(|(_, &(_, g))| g >= coarse_thr)
            .map(|(i, _)| i)
            .collect();
        let (lo_t, hi_t) = (samples[above[0]].0, samples[*above.last().unwrap()].0);

        // refine the edges
        let fine = self.step / REFINE_DIVISOR;
        for base in [lo_t, hi_t] {
            let from = (base - self.step).max(0.0);
            let to = (base + self.step).min(delta);
            let mut t = from;
            while t <= to + fine * 0.5 {
                samples.push((t, self.window_objective(workload, first, second, t)));
                t += fine;
            }
        }
        samples.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite timer"));

        let gmax = samples.iter().map(|&(_, g)| g).fold(0.0, f64::max);
        let thr = (1.0 - PLATEAU_REL_TOL) * gmax;
        let mask: Vec<bool> = samples.iter().map(|&(_, g)| g >= thr).collect();
        let lo_i = mask.iter().position(|&m| m).expect("plateau non-empty");
        let hi_i = mask.iter().rposition(|&m| m).expect("plateau non-empty");
        if mask[lo_i..=hi_i].iter().any(|&m| !m) {
            return Err(StochasticError::PlateauFragmented { first, second });
        }
        // Interpolate the threshold crossings so the edges do not snap to the
        // sample lattice; the chosen midpoint then converges with the grid
        // instead of jittering by a refinement step.
        let lo_s = if lo_i > 0 {
            edge_crossing(samples[lo_i - 1], samples[lo_i], thr)
        } else {
            samples[lo_i].0
        };
        let hi_s = if hi_i + 1 < samples.len() {
            edge_crossing(samples[hi_i + 1], samples[hi_i], thr)
        } else {
            samples[hi_i].0
        };
        Ok(TimeoutEntry::Feasible(TimeoutPlateau {
            lo_s,
            hi_s,
            chosen_s: 0.5 * (lo_s + hi_s),
            objective: gmax,
        }))
    }

    /// Timers for every ordered path pair.
    pub fn timeout_table(&self, workload: &Workload) -> Result<TimeoutTable, StochasticError> {
        let n = self.net.n_paths();
        let mut entries = Vec::with_capacity(n * n);
        for first in 0..n {
            for second in 0..n {
                entries.push(self.optimize_timeout(workload, first, second)?);
            }
        }
        Ok(TimeoutTable { n, entries })
    }

    /// Stochastic counterparts of the assignment-LP coefficients for two
    /// attempts. Pairs without a feasible timer schedule no retransmission:
    /// they consume first-attempt capacity only and deliver only via the
    /// first attempt.
    pub fn lp_coefficients(
        &self,
        workload: &Workload,
        timers: &TimeoutTable,
    ) -> Result<StochasticCoefficients, StochasticError> {
        let net = self.net;
        if !net.is_augmented() {
            return Err(StochasticError::Model(ModelError::NotAugmented));
        }
        if net.attempts() != 2 {
            return Err(StochasticError::NeedsTwoAttempts(net.attempts()));
        }
        let n = net.n_paths();
        if timers.n_paths() != n {
            return Err(StochasticError::Model(ModelError::ShapeMismatch {
                expected: n,
                got: timers.n_paths(),
            }));
        }
        let lambda = workload.rate_bps;
        let delta = workload.lifetime_s;
        let combos = n * n;
        let mut delivery = vec![0.0; combos];
        let mut traffic = vec![vec![0.0; combos]; n];
        let mut cost = vec![0.0; combos];

        for l in 0..combos {
            let i = l % n;
            let j = l / n;
            if net.paths()[i].is_blackhole() {
                // assignment to the discard path consumes its capacity and
                // terminates the packet: nothing is delivered or retried
                traffic[i][l] = lambda;
                continue;
            }
            let tau_i = net.paths()[i].loss_prob;
            let p_first = self.delay_cdf(i, delta)? * (1.0 - tau_i);
            traffic[i][l] += lambda;
            cost[l] += lambda * net.paths()[i].cost_per_bit;
            match timers.entry(i, j) {
                TimeoutEntry::Feasible(plateau) => {
                    let pr = self.retrans_prob(i, plateau.chosen_s)?;
                    traffic[j][l] += lambda * pr;
                    cost[l] += lambda * pr * net.paths()[j].cost_per_bit;
                    let p_second = if net.paths()[j].is_blackhole() {
                        0.0
                    } else {
                        let tau_j = net.paths()[j].loss_prob;
                        let fit = gamma_cdf_of(net, j, delta - plateau.chosen_s);
                        // A slow acknowledgement can fire the timer although
                        // the first copy met the deadline; success of both
                        // copies must be counted once, not twice. With the
                        // timer inside the lifetime, P(in time but ack late)
                        // is the delivery CDF minus the round-trip CDF.
                        let ack_by_t = self.ack_return_cdf(i, plateau.chosen_s)?;
                        let both = (1.0 - tau_i)
                            * (self.delay_cdf(i, delta)? - ack_by_t).max(0.0)
                            * (1.0 - tau_j)
                            * fit;
                        pr * fit * (1.0 - tau_j) - both
                    };
                    delivery[l] = p_first + p_second;
                }
                TimeoutEntry::Infeasible => {
                    delivery[l] = p_first;
                }
            }
        }
        Ok(StochasticCoefficients {
            delivery,
            traffic,
            cost,
        })
    }

    /// Quality-maximisation LP under stochastic delays: same shape as the
    /// fixed-delay builder (per-path traffic rows, a cost-rate row, the unit
    /// mass row), with probabilities in place of indicators.
    pub fn quality_lp(
        &self,
        workload: &Workload,
        timers: &TimeoutTable,
    ) -> Result<LpProblem, StochasticError> {
        let co = self.lp_coefficients(workload, timers)?;
        let mut ineq = co.traffic;
        let mut ineq_rhs: Vec<f64> = self.net.paths().iter().map(|p| p.bandwidth_bps).collect();
        ineq.push(co.cost);
        ineq_rhs.push(workload.cost_bound);
        Ok(LpProblem {
            sense: Sense::Maximize,
            objective: co.delivery,
            ineq,
            ineq_rhs,
            eq_row: vec![1.0; self.net.n_paths() * self.net.n_paths()],
        })
    }
}

/// P(total delay on a gamma path <= x), helper for coefficients where the
/// remaining budget is already shift-adjusted per call site.
fn gamma_cdf_of(net: &Network, path: usize, budget_s: f64) -> f64 {
    match net.paths()[path].delay {
        DelayModel::ShiftedGamma {
            shift_s,
            shape,
            scale_s,
        } => gamma_cdf(shape, scale_s, budget_s - shift_s),
        DelayModel::Fixed(_) => 0.0,
    }
}

/// One-shot timer optimisation without holding a model. For repeated queries
/// build a [`StochasticModel`] once and reuse it.
pub fn optimize_timeout(
    net: &Network,
    workload: &Workload,
    first: usize,
    second: usize,
) -> Result<TimeoutEntry, StochasticError> {
    StochasticModel::new(net)?.optimize_timeout(workload, first, second)
}

/// One-shot retransmission probability at a given timer.
pub fn retrans_prob(net: &Network, path: usize, timeout_s: f64) -> Result<f64, StochasticError> {
    StochasticModel::new(net)?.retrans_prob(path, timeout_s)
}
