//! Scenario files. Units in the file mirror the way link datasheets are
//! written — megabits per second and milliseconds — and are converted to SI
//! exactly once, here.

use crate::error::CliError;
use mpsched_core::{DelayModel, Network, PathSpec, Workload};
use serde::Deserialize;
use std::path::Path;

fn default_attempts() -> usize {
    2
}

fn default_guard_ms() -> f64 {
    100.0
}

fn default_total_packets() -> u64 {
    100_000
}

fn default_packet_bytes() -> u64 {
    1024
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub workload: WorkloadCfg,
    pub paths: Vec<PathCfg>,
    /// Transmissions per datum, the first included.
    #[serde(default = "default_attempts")]
    pub attempts: usize,
    /// Margin added on top of the round trip in fixed-delay timers.
    #[serde(default = "default_guard_ms")]
    pub guard_ms: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_total_packets")]
    pub total_packets: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadCfg {
    pub rate_mbps: f64,
    pub lifetime_ms: f64,
    /// Budget on cost per second; omitted means unconstrained.
    #[serde(default)]
    pub cost_bound: Option<f64>,
    #[serde(default = "default_packet_bytes")]
    pub packet_bytes: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathCfg {
    pub bandwidth_mbps: f64,
    pub delay: DelayCfg,
    #[serde(default)]
    pub loss: f64,
    #[serde(default)]
    pub cost_per_bit: f64,
    /// What the wire actually provides, when the modeled value above is a
    /// deliberately padded or stale estimate. The solver sees `bandwidth_mbps`
    /// and `delay`; the simulator sees these.
    #[serde(default)]
    pub sim_bandwidth_mbps: Option<f64>,
    #[serde(default)]
    pub sim_delay: Option<DelayCfg>,
}

/// Either a constant propagation delay or a shifted-gamma distribution with
/// location `eta_ms`, shape `alpha`, and scale `beta_ms`.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum DelayCfg {
    Fixed { fixed_ms: f64 },
    Gamma { eta_ms: f64, alpha: f64, beta_ms: f64 },
}

impl DelayCfg {
    fn to_model(self) -> DelayModel {
        match self {
            DelayCfg::Fixed { fixed_ms } => DelayModel::Fixed(fixed_ms * 1e-3),
            DelayCfg::Gamma { eta_ms, alpha, beta_ms } => DelayModel::ShiftedGamma {
                shift_s: eta_ms * 1e-3,
                shape: alpha,
                scale_s: beta_ms * 1e-3,
            },
        }
    }

    fn is_gamma(self) -> bool {
        matches!(self, DelayCfg::Gamma { .. })
    }
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ScenarioConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if cfg.paths.is_empty() {
            return Err(CliError::Config(format!(
                "{}: a scenario needs at least one path",
                path.display()
            )));
        }
        Ok(cfg)
    }

    pub fn workload(&self) -> Workload {
        let mut wl = Workload::new(self.workload.rate_mbps * 1e6, self.workload.lifetime_ms * 1e-3);
        wl.cost_bound = self.workload.cost_bound.unwrap_or(f64::INFINITY);
        wl.packet_bits = self.workload.packet_bytes * 8;
        wl
    }

    pub fn guard_s(&self) -> f64 {
        self.guard_ms * 1e-3
    }

    /// True when the solver-facing side of any path is stochastic.
    pub fn has_gamma_model(&self) -> bool {
        self.paths.iter().any(|p| p.delay.is_gamma())
    }

    fn network(&self, attempts: usize, solver_view: bool) -> Result<Network, CliError> {
        let specs = self
            .paths
            .iter()
            .map(|p| {
                let (bw, delay) = if solver_view {
                    (p.bandwidth_mbps, p.delay)
                } else {
                    (
                        p.sim_bandwidth_mbps.unwrap_or(p.bandwidth_mbps),
                        p.sim_delay.unwrap_or(p.delay),
                    )
                };
                PathSpec {
                    bandwidth_bps: bw * 1e6,
                    delay: delay.to_model(),
                    loss_prob: p.loss,
                    cost_per_bit: p.cost_per_bit,
                }
            })
            .collect();
        Network::new(specs, attempts).map_err(|e| CliError::Config(e.to_string()))
    }

    /// The network as the solver models it.
    pub fn model_network(&self, attempts: Option<usize>) -> Result<Network, CliError> {
        self.network(attempts.unwrap_or(self.attempts), true)
    }

    /// The network as the simulator realizes it (per-path overrides applied).
    pub fn sim_network(&self, attempts: Option<usize>) -> Result<Network, CliError> {
        self.network(attempts.unwrap_or(self.attempts), false)
    }
}
