//! Helpers shared by the integration-test binaries.
#![allow(dead_code)]

use mpsched_core::{DelayModel, Network, PathSpec, Workload};
use rand::Rng;
use rand_chacha::ChaCha12Rng;

pub fn mbps(v: f64) -> f64 {
    v * 1e6
}

pub fn ms(v: f64) -> f64 {
    v * 1e-3
}

/// Two-path reference network as the sender models it (padded delays).
pub fn two_path_model() -> Network {
    Network::new(
        vec![
            PathSpec {
                bandwidth_bps: mbps(80.0),
                delay: DelayModel::Fixed(ms(450.0)),
                loss_prob: 0.2,
                cost_per_bit: 0.0,
            },
            PathSpec {
                bandwidth_bps: mbps(20.0),
                delay: DelayModel::Fixed(ms(150.0)),
                loss_prob: 0.0,
                cost_per_bit: 0.0,
            },
        ],
        2,
    )
    .expect("valid reference network")
}

/// Same topology with the true propagation delays used by the simulator.
pub fn two_path_true() -> Network {
    Network::new(
        vec![
            PathSpec {
                bandwidth_bps: mbps(80.0),
                delay: DelayModel::Fixed(ms(400.0)),
                loss_prob: 0.2,
                cost_per_bit: 0.0,
            },
            PathSpec {
                bandwidth_bps: mbps(20.0),
                delay: DelayModel::Fixed(ms(100.0)),
                loss_prob: 0.0,
                cost_per_bit: 0.0,
            },
        ],
        2,
    )
    .expect("valid reference network")
}

/// Shifted-gamma variant of the reference network; bandwidths are a
/// parameter because the end-to-end run over-provisions the wire while the
/// model keeps the allowed rates.
pub fn two_path_gamma(bw1_mbps: f64, bw2_mbps: f64) -> Network {
    Network::new(
        vec![
            PathSpec {
                bandwidth_bps: mbps(bw1_mbps),
                delay: DelayModel::ShiftedGamma {
                    shift_s: ms(400.0),
                    shape: 10.0,
                    scale_s: ms(4.0),
                },
                loss_prob: 0.2,
                cost_per_bit: 0.0,
            },
            PathSpec {
                bandwidth_bps: mbps(bw2_mbps),
                delay: DelayModel::ShiftedGamma {
                    shift_s: ms(100.0),
                    shape: 5.0,
                    scale_s: ms(2.0),
                },
                loss_prob: 0.0,
                cost_per_bit: 0.0,
            },
        ],
        2,
    )
    .expect("valid gamma network")
}

/// Random two-attempt instance: 1-3 real paths, mixed loss/cost, and an
/// occasionally binding cost budget.
pub fn random_instance(rng: &mut ChaCha12Rng) -> (Network, Workload) {
    let n_real = rng.gen_range(1..=3);
    let paths = (0..n_real)
        .map(|_| PathSpec {
            bandwidth_bps: mbps(rng.gen_range(1.0..200.0)),
            delay: DelayModel::Fixed(ms(rng.gen_range(10.0..1000.0))),
            loss_prob: rng.gen_range(0.0..0.6),
            cost_per_bit: rng.gen_range(0.0..2e-6),
        })
        .collect();
    let net = Network::new(paths, 2).unwrap();
    let mut wl = Workload::new(mbps(rng.gen_range(1.0..150.0)), rng.gen_range(0.05..2.0));
    if rng.gen_bool(0.5) {
        wl.cost_bound = rng.gen_range(0.0..500.0);
    }
    (net, wl)
}

/// Literal two-attempt coefficient formulas (delivery cases, per-path traffic
/// cases, cost row) used as an independent oracle. Assignments whose first
/// attempt is the discard path never retransmit, so their second-attempt
/// factor is zero.
pub fn reference_coefficients(
    net: &Network,
    wl: &Workload,
) -> (Vec<f64>, Vec<Vec<f64>>, Vec<f64>) {
    let n = net.n_paths();
    let lambda = wl.rate_bps;
    let delta = wl.lifetime_s;
    let delay = |p: usize| match net.paths()[p].delay {
        DelayModel::Fixed(d) => d,
        DelayModel::ShiftedGamma { .. } => unreachable!("fixed-delay instances only"),
    };
    let d_min = (0..n)
        .map(delay)
        .filter(|d| d.is_finite())
        .fold(f64::INFINITY, f64::min);
    let mut p_ref = vec![0.0; n * n];
    let mut a_ref = vec![vec![0.0; n * n]; n];
    let mut r_ref = vec![0.0; n * n];
    for l in 0..n * n {
        let i = l % n;
        let j = l / n;
        let (d_i, tau_i, c_i) = {
            let s = &net.paths()[i];
            (delay(i), s.loss_prob, s.cost_per_bit)
        };
        let (d_j, tau_j, c_j) = {
            let s = &net.paths()[j];
            (delay(j), s.loss_prob, s.cost_per_bit)
        };
        p_ref[l] = if d_i + d_min + d_j <= delta {
            1.0 - tau_i * tau_j
        } else if d_i <= delta {
            1.0 - tau_i
        } else {
            0.0
        };
        let retry_factor = if net.paths()[i].is_blackhole() { 0.0 } else { tau_i };
        for (k, row) in a_ref.iter_mut().enumerate() {
            row[l] = if i == k && j == k {
                lambda + lambda * retry_factor
            } else if j == k {
                lambda * retry_factor
            } else if i == k {
                lambda
            } else {
                0.0
            };
        }
        r_ref[l] = lambda * c_i + lambda * retry_factor * c_j;
    }
    (p_ref, a_ref, r_ref)
}

/// Relative comparison anchored at magnitude one.
pub fn approx(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
