//! Synchronous simulator for event-triggered decentralized learning.
//!
//! Each call to [`Simulation::step`] runs one universal iteration `k`:
//!
//! 1. **Connection.** Links present at `k` but not at `k − 1` exchange
//!    `(w_j, d_j)` in both directions.
//! 2. **Broadcast.** Devices whose trigger fires send `(w_i, d_i)` to all
//!    current neighbors, receive the same back, and refresh `ŵ_i ← w_i`.
//! 3. **Aggregation.** Every device that received parameters mixes them in
//!    with Metropolis weights computed from the exchanged degrees.
//! 4. **Gradient.** `w_i ← w_i − α^(k)·g_i` with `g_i` evaluated at the
//!    pre-aggregation iterate.
//!
//! Connection and broadcast exchanges are merged into a single weighted
//! update, so the composite step is exactly `W^(k+1) = P^(k) W^(k) − α^(k) G^(k)`
//! with one transition matrix per iteration.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::BandwidthProfile;
use crate::error::{Error, Result};
use crate::learning::{local_grad, stochastic_grad, LocalTask, ModelParams, StepPolicy};
use crate::mixing::{metropolis_weight, TriggerVector};
use crate::rng::{self, streams};
use crate::topology::{Edge, GraphSnapshot, InfoFlowLog, TopologySchedule};

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceState {
    /// Main model `w_i`.
    pub w: Vec<f64>,
    /// Auxiliary model `ŵ_i`, the copy last broadcast.
    pub w_hat: Vec<f64>,
    pub bandwidth: f64,
    /// `ρ_i = 1/b_i`.
    pub resource: f64,
    pub neighbors: Vec<usize>,
    /// Last degree received from each current neighbor.
    pub neighbor_degrees: BTreeMap<usize, usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TriggerPolicy {
    /// Heterogeneous thresholds `r·ρ_i·γ^(k)` with `ρ_i = 1/b_i`.
    Efhc { r: f64 },
    /// One shared threshold `r·ρ·γ^(k)`.
    GlobalThreshold { r: f64, rho: f64 },
    /// Broadcast at every iteration.
    ZeroThreshold,
    /// Broadcast independently with probability `prob`.
    RandomizedGossip { prob: f64 },
}

impl TriggerPolicy {
    /// Global threshold with `ρ = 1/b_M`.
    pub fn global(r: f64, mean_bandwidth: f64) -> Self {
        TriggerPolicy::GlobalThreshold {
            r,
            rho: 1.0 / mean_bandwidth,
        }
    }

    /// Randomized gossip at the `1/m` rate.
    pub fn gossip(m: usize) -> Self {
        TriggerPolicy::RandomizedGossip {
            prob: 1.0 / m as f64,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            TriggerPolicy::Efhc { .. } => "efhc",
            TriggerPolicy::GlobalThreshold { .. } => "gt",
            TriggerPolicy::ZeroThreshold => "zt",
            TriggerPolicy::RandomizedGossip { .. } => "rg",
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            TriggerPolicy::Efhc { r } => positive("r", r),
            TriggerPolicy::GlobalThreshold { r, rho } => {
                positive("r", r)?;
                positive("rho", rho)
            }
            TriggerPolicy::ZeroThreshold => Ok(()),
            TriggerPolicy::RandomizedGossip { prob } => {
                if prob > 0.0 && prob <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::invalid(format!(
                        "gossip probability {prob} outside (0, 1]"
                    )))
                }
            }
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    // +inf is allowed: it disables a threshold trigger entirely.
    if v > 0.0 && !v.is_nan() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive")))
    }
}

/// Decay factor `γ^(k)` of the broadcast threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdDecay {
    /// `γ^(k) = α^(k)`.
    FollowStep,
    Schedule(StepPolicy),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GradientOracle {
    Exact,
    Minibatch(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Initialization {
    /// One `N(0, scale²)` draw shared by every device, so `ŵ^(0) = w^(0)`
    /// agrees across the network.
    Shared { scale: f64 },
    /// An independent `N(0, scale²)` draw per device.
    PerDevice { scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineFlags {
    /// Fire on `≥` (the normative procedure) instead of strict `>`.
    pub inclusive_trigger: bool,
    /// Force a broadcast when a device has been silent for this many
    /// iterations, bounding the inter-broadcast gap by `B2`.
    pub enforce_b2: Option<usize>,
    /// Count connection-event exchanges in the transmission score.
    pub count_connection_exchanges: bool,
}

impl Default for EngineFlags {
    fn default() -> Self {
        Self {
            inclusive_trigger: true,
            enforce_b2: None,
            count_connection_exchanges: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub tasks: Vec<LocalTask>,
    pub schedule: TopologySchedule,
    pub policy: TriggerPolicy,
    pub step: StepPolicy,
    pub threshold_decay: ThresholdDecay,
    pub bandwidths: BandwidthProfile,
    pub gradient: GradientOracle,
    pub init: Initialization,
    pub flags: EngineFlags,
    pub seed: u64,
    /// Known global minimizer, enables the optimality-gap metric.
    pub optimum: Option<ModelParams>,
    /// Held-out classification task for per-device accuracy.
    pub evaluation: Option<LocalTask>,
    /// Accuracy is measured every this many iterations (and at the last).
    pub eval_every: usize,
}

impl SimulationConfig {
    /// Defaults: exact gradients, one shared `N(0,1)` start for every device,
    /// `γ^(k) = α^(k)`, uniform unit bandwidths.
    pub fn new(
        tasks: Vec<LocalTask>,
        schedule: TopologySchedule,
        policy: TriggerPolicy,
        step: StepPolicy,
    ) -> Self {
        let m = schedule.m();
        Self {
            tasks,
            schedule,
            policy,
            step,
            threshold_decay: ThresholdDecay::FollowStep,
            bandwidths: BandwidthProfile::uniform(m, 1.0),
            gradient: GradientOracle::Exact,
            init: Initialization::Shared { scale: 1.0 },
            flags: EngineFlags::default(),
            seed: 0,
            optimum: None,
            evaluation: None,
            eval_every: 1,
        }
    }
}

/// `(1/n)^{1/2}·‖w − ŵ‖₂` compared against `r·ρ_i·γ_k`.
pub fn broadcast_trigger(
    w: &[f64],
    w_hat: &[f64],
    r: f64,
    rho: f64,
    gamma: f64,
    inclusive: bool,
) -> bool {
    let n = w.len().max(1) as f64;
    let dist = w
        .iter()
        .zip(w_hat)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt()
        / n.sqrt();
    let threshold = r * rho * gamma;
    if inclusive {
        dist >= threshold
    } else {
        dist > threshold
    }
}

/// `w_i + Σ_j β_ij (w_j − w_i)`.
pub fn aggregate(w_i: &[f64], received: &[(&[f64], f64)]) -> Result<Vec<f64>> {
    let mut out = w_i.to_vec();
    for (w_j, beta) in received {
        if w_j.len() != w_i.len() {
            return Err(Error::invalid(format!(
                "received parameters of dimension {} for a model of dimension {}",
                w_j.len(),
                w_i.len()
            )));
        }
        for ((o, own), other) in out.iter_mut().zip(w_i).zip(*w_j) {
            *o += beta * (other - own);
        }
    }
    Ok(out)
}

/// `(1/m)·Σ_i (Σ_j v_ij / d_i)·ρ_i·n`. Devices without links contribute 0.
pub fn transmission_score(
    triggers: &TriggerVector,
    g: &GraphSnapshot,
    rho: &[f64],
    n: usize,
) -> f64 {
    let m = g.m();
    if m == 0 {
        return 0.0;
    }
    let degrees = g.degrees();
    let mut used = vec![0usize; m];
    for (i, j) in triggers.active_edges(g) {
        used[i] += 1;
        used[j] += 1;
    }
    let total: f64 = (0..m)
        .filter(|&i| degrees[i] > 0)
        .map(|i| used[i] as f64 / degrees[i] as f64 * rho[i] * n as f64)
        .sum();
    total / m as f64
}

/// One row per iteration, measured on `W^(k)` before the update.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub k: usize,
    /// `‖W − 1·w̄‖²`.
    pub consensus_error: f64,
    /// `‖w̄ − w*‖²`.
    pub optimality_gap: Option<f64>,
    pub broadcasts: usize,
    pub transmission_score: f64,
    /// Transmission scores summed through iteration `k` inclusive.
    pub cumulative_time: f64,
    pub mean_accuracy: Option<f64>,
    pub device_accuracy: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsTrace {
    pub rows: Vec<MetricsRow>,
}

pub const TRACE_HEADER: &str =
    "k,consensus_error,optimality_gap,broadcasts,transmission_score,cumulative_time,mean_accuracy";

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl MetricsTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn consensus_errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.consensus_error).collect()
    }

    pub fn optimality_gaps(&self) -> Option<Vec<f64>> {
        self.rows.iter().map(|r| r.optimality_gap).collect()
    }

    pub fn total_broadcasts(&self) -> usize {
        self.rows.iter().map(|r| r.broadcasts).sum()
    }

    pub fn mean_transmission_score(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().map(|r| r.transmission_score).sum::<f64>() / self.rows.len() as f64
    }

    /// CSV with [`TRACE_HEADER`]; absent optional metrics are empty cells.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.k,
                r.consensus_error,
                opt_cell(r.optimality_gap),
                r.broadcasts,
                r.transmission_score,
                r.cumulative_time,
                opt_cell(r.mean_accuracy)
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == TRACE_HEADER => {}
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("expected header `{TRACE_HEADER}`"),
                })
            }
        }
        let mut rows = Vec::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                line: idx + 1,
                message,
            };
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 7 {
                return Err(err(format!("expected 7 fields, found {}", cells.len())));
            }
            let num = |s: &str| -> Result<f64> {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| err(format!("bad number `{s}`: {e}")))
            };
            let opt = |s: &str| -> Result<Option<f64>> {
                if s.trim().is_empty() {
                    Ok(None)
                } else {
                    num(s).map(Some)
                }
            };
            rows.push(MetricsRow {
                k: cells[0]
                    .trim()
                    .parse()
                    .map_err(|e| err(format!("bad iteration `{}`: {e}", cells[0])))?,
                consensus_error: num(cells[1])?,
                optimality_gap: opt(cells[2])?,
                broadcasts: cells[3]
                    .trim()
                    .parse()
                    .map_err(|e| err(format!("bad broadcast count `{}`: {e}", cells[3])))?,
                transmission_score: num(cells[4])?,
                cumulative_time: num(cells[5])?,
                mean_accuracy: opt(cells[6])?,
                device_accuracy: None,
            });
        }
        Ok(Self { rows })
    }
}

/// Everything observable about one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub snapshot: GraphSnapshot,
    pub triggers: TriggerVector,
    /// Edges that carried parameters, `E'^(k)`.
    pub used_edges: BTreeSet<Edge>,
    pub alpha: f64,
    pub metrics: MetricsRow,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: MetricsTrace,
    pub log: InfoFlowLog,
    pub triggers: Vec<TriggerVector>,
}

struct Message<'a> {
    from: usize,
    degree: usize,
    params: &'a [f64],
}

pub struct Simulation {
    config: SimulationConfig,
    states: Vec<DeviceState>,
    k: usize,
    previous: Option<GraphSnapshot>,
    last_broadcast: Vec<Option<usize>>,
    cumulative_time: f64,
    rng: ChaCha8Rng,
}

impl Simulation {
    pub fn new(config: SimulationConfig) -> Result<Self> {
        let m = config.schedule.m();
        if m == 0 {
            return Err(Error::invalid("simulation needs at least one device"));
        }
        if config.tasks.len() != m {
            return Err(Error::invalid(format!(
                "{} tasks for {m} devices",
                config.tasks.len()
            )));
        }
        let n = config.tasks[0].dim();
        if config.tasks.iter().any(|t| t.dim() != n) {
            return Err(Error::invalid("tasks disagree on parameter dimension"));
        }
        if config.bandwidths.values.len() != m {
            return Err(Error::invalid(format!(
                "{} bandwidths for {m} devices",
                config.bandwidths.values.len()
            )));
        }
        if let Some(b) = config
            .bandwidths
            .values
            .iter()
            .find(|b| !(**b > 0.0 && b.is_finite()))
        {
            return Err(Error::invalid(format!("bandwidth {b} is not positive")));
        }
        config.policy.validate()?;
        config.step.validate()?;
        if let ThresholdDecay::Schedule(s) = &config.threshold_decay {
            s.validate()?;
        }
        if let GradientOracle::Minibatch(b) = config.gradient {
            let smallest = config
                .tasks
                .iter()
                .map(LocalTask::data_count)
                .min()
                .unwrap();
            if b == 0 || b > smallest {
                return Err(Error::invalid(format!(
                    "batch size {b} outside [1, {smallest}]"
                )));
            }
        }
        if let Some(w) = &config.optimum {
            if w.dim() != n {
                return Err(Error::invalid("optimum dimension does not match the tasks"));
            }
        }
        if let Some(eval) = &config.evaluation {
            if eval.as_hinge().is_none() || eval.dim() != n {
                return Err(Error::invalid(
                    "evaluation set must be a classification task of matching dimension",
                ));
            }
        }
        if config.eval_every == 0 {
            return Err(Error::invalid("eval_every must be at least 1"));
        }
        if config.flags.enforce_b2 == Some(0) {
            return Err(Error::invalid("B2 must be at least 1"));
        }

        let mut init_rng = rng::stream(config.seed, streams::INIT, 0);
        let mut draw = |scale: f64| -> Vec<f64> {
            (0..n)
                .map(|_| scale * init_rng.sample::<f64, _>(StandardNormal))
                .collect()
        };
        let starts: Vec<Vec<f64>> = match config.init {
            Initialization::Shared { scale } => vec![draw(scale); m],
            Initialization::PerDevice { scale } => (0..m).map(|_| draw(scale)).collect(),
        };
        let states = starts
            .into_iter()
            .zip(&config.bandwidths.values)
            .map(|(w, &b)| DeviceState {
                w_hat: w.clone(),
                w,
                bandwidth: b,
                resource: 1.0 / b,
                neighbors: Vec::new(),
                neighbor_degrees: BTreeMap::new(),
            })
            .collect();
        let rng = rng::stream(config.seed, streams::ENGINE, 0);
        Ok(Self {
            last_broadcast: vec![None; m],
            config,
            states,
            k: 0,
            previous: None,
            cumulative_time: 0.0,
            rng,
        })
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.config
    }

    pub fn iteration(&self) -> usize {
        self.k
    }

    pub fn states(&self) -> &[DeviceState] {
        &self.states
    }

    /// Current `W`, one row per device.
    pub fn models(&self) -> Vec<Vec<f64>> {
        self.states.iter().map(|s| s.w.clone()).collect()
    }

    pub fn mean_model(&self) -> Vec<f64> {
        mean_rows(self.states.iter().map(|s| s.w.as_slice()))
    }

    fn gamma(&self, k: usize) -> f64 {
        match &self.config.threshold_decay {
            ThresholdDecay::FollowStep => self.config.step.at(k),
            ThresholdDecay::Schedule(s) => s.at(k),
        }
    }

    fn fires(&mut self, i: usize, gamma: f64) -> bool {
        let s = &self.states[i];
        let inclusive = self.config.flags.inclusive_trigger;
        match self.config.policy {
            TriggerPolicy::Efhc { r } => {
                broadcast_trigger(&s.w, &s.w_hat, r, s.resource, gamma, inclusive)
            }
            TriggerPolicy::GlobalThreshold { r, rho } => {
                broadcast_trigger(&s.w, &s.w_hat, r, rho, gamma, inclusive)
            }
            TriggerPolicy::ZeroThreshold => true,
            TriggerPolicy::RandomizedGossip { prob } => self.rng.random::<f64>() < prob,
        }
    }

    /// Runs iteration `k` and advances to `k + 1`.
    pub fn step(&mut self) -> Result<IterationRecord> {
        let k = self.k;
        let m = self.states.len();
        let n = self.states[0].w.len();
        let snapshot = self.config.schedule.snapshot_at(k);
        let degrees = snapshot.degrees();
        let adjacency = snapshot.adjacency();

        // Event 1: neighbor bookkeeping and new-link exchanges. The initial
        // topology at k = 0 is the starting neighbor list, not a connection.
        let connections: BTreeSet<Edge> = match &self.previous {
            Some(prev) => snapshot.edges().difference(prev.edges()).copied().collect(),
            None => BTreeSet::new(),
        };
        for (state, nbrs) in self.states.iter_mut().zip(&adjacency) {
            state.neighbor_degrees.retain(|j, _| nbrs.contains(j));
            state.neighbors.clone_from(nbrs);
        }

        // Event 2: broadcast triggers.
        let gamma = self.gamma(k);
        let mut broadcasts = vec![false; m];
        for (i, fired) in broadcasts.iter_mut().enumerate() {
            let forced = self
                .config
                .flags
                .enforce_b2
                .is_some_and(|b2| self.last_broadcast[i].map_or(k + 1, |t| k - t) >= b2);
            // Evaluate the policy even when forced so random draws stay aligned.
            *fired = self.fires(i, gamma) || forced;
        }
        let triggers = TriggerVector::from_broadcasts(broadcasts.clone())
            .with_connections(connections.iter().copied());

        // Message exchange: each active link carries one message each way.
        let pre: Vec<Vec<f64>> = self.models();
        let mut inbox: Vec<Vec<Message<'_>>> = (0..m).map(|_| Vec::new()).collect();
        let mut used_edges = BTreeSet::new();
        for (i, nbrs) in adjacency.iter().enumerate() {
            for &j in nbrs.iter().filter(|&&j| j > i) {
                let linked = broadcasts[i] || broadcasts[j] || connections.contains(&(i, j));
                if linked {
                    used_edges.insert((i, j));
                    inbox[j].push(Message {
                        from: i,
                        degree: degrees[i],
                        params: &pre[i],
                    });
                    inbox[i].push(Message {
                        from: j,
                        degree: degrees[j],
                        params: &pre[j],
                    });
                }
            }
        }

        let metrics = self.measure(k, &pre, &triggers, &snapshot)?;
        let alpha = self.config.step.at(k);

        // Events 3 and 4.
        let mut next = Vec::with_capacity(m);
        for (i, messages) in inbox.iter().enumerate() {
            let mut received = Vec::with_capacity(messages.len());
            for msg in messages {
                self.states[i].neighbor_degrees.insert(msg.from, msg.degree);
                received.push((msg.params, metropolis_weight(degrees[i], msg.degree)?));
            }
            let mixed = aggregate(&pre[i], &received)?;
            let w_k = ModelParams(pre[i].clone());
            let grad = match self.config.gradient {
                GradientOracle::Exact => local_grad(&self.config.tasks[i], &w_k)?,
                GradientOracle::Minibatch(b) => {
                    stochastic_grad(&self.config.tasks[i], &w_k, b, &mut self.rng)?
                }
            };
            next.push(
                mixed
                    .iter()
                    .zip(&grad)
                    .map(|(x, g)| x - alpha * g)
                    .collect::<Vec<f64>>(),
            );
        }
        drop(inbox);

        for (i, (state, w)) in self.states.iter_mut().zip(next).enumerate() {
            if broadcasts[i] {
                state.w_hat.clone_from(&pre[i]);
                self.last_broadcast[i] = Some(k);
            }
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericFailure(format!(
                    "device {i} diverged at iteration {k}"
                )));
            }
            state.w = w;
        }
        debug_assert_eq!(used_edges, triggers.active_edges(&snapshot));
        debug_assert!(n == 0 || self.states.iter().all(|s| s.w.len() == n));

        self.previous = Some(snapshot.clone());
        self.k += 1;
        Ok(IterationRecord {
            k,
            snapshot,
            triggers,
            used_edges,
            alpha,
            metrics,
        })
    }

    fn measure(
        &mut self,
        k: usize,
        w: &[Vec<f64>],
        triggers: &TriggerVector,
        snapshot: &GraphSnapshot,
    ) -> Result<MetricsRow> {
        let mean = mean_rows(w.iter().map(Vec::as_slice));
        let consensus_error = w.iter().map(|row| sq_dist(row, &mean)).sum::<f64>();
        let optimality_gap = self
            .config
            .optimum
            .as_ref()
            .map(|opt| sq_dist(&mean, &opt.0));

        let rho: Vec<f64> = self.states.iter().map(|s| s.resource).collect();
        let n = mean.len();
        let score = if self.config.flags.count_connection_exchanges {
            transmission_score(triggers, snapshot, &rho, n)
        } else {
            let only = TriggerVector::from_broadcasts(triggers.broadcasts().to_vec());
            transmission_score(&only, snapshot, &rho, n)
        };
        self.cumulative_time += score;

        let device_accuracy = match &self.config.evaluation {
            Some(LocalTask::Hinge(h)) if k.is_multiple_of(self.config.eval_every) => Some(
                w.iter()
                    .map(|row| h.accuracy(&ModelParams(row.clone())))
                    .collect::<Result<Vec<f64>>>()?,
            ),
            _ => None,
        };
        let mean_accuracy = device_accuracy
            .as_ref()
            .map(|a| a.iter().sum::<f64>() / a.len() as f64);
        Ok(MetricsRow {
            k,
            consensus_error,
            optimality_gap,
            broadcasts: triggers.broadcast_count(),
            transmission_score: score,
            cumulative_time: self.cumulative_time,
            mean_accuracy,
            device_accuracy,
        })
    }

    /// Runs `iterations` steps, collecting the trace and information-flow log.
    pub fn run(mut self, iterations: usize) -> Result<RunOutput> {
        let m = self.states.len();
        let mut trace = MetricsTrace::default();
        let mut log = InfoFlowLog::new(m);
        let mut triggers = Vec::with_capacity(iterations);
        for _ in 0..iterations {
            let rec = self.step()?;
            trace.rows.push(rec.metrics);
            log.push(rec.used_edges)?;
            triggers.push(rec.triggers);
        }
        Ok(RunOutput {
            trace,
            log,
            triggers,
        })
    }
}

/// Builds a simulation and runs it for `iterations` steps.
pub fn run(config: SimulationConfig, iterations: usize) -> Result<RunOutput> {
    Simulation::new(config)?.run(iterations)
}

fn mean_rows<'a>(rows: impl Iterator<Item = &'a [f64]>) -> Vec<f64> {
    let mut sum: Vec<f64> = Vec::new();
    let mut count = 0usize;
    for row in rows {
        if sum.is_empty() {
            sum = vec![0.0; row.len()];
        }
        for (s, v) in sum.iter_mut().zip(row) {
            *s += v;
        }
        count += 1;
    }
    sum.iter_mut().for_each(|s| *s /= count.max(1) as f64);
    sum
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learning::QuadraticTask;
    use crate::mixing::build_transition;
    use crate::topology::ScheduleMode;

    #[test]
    fn trigger_examples() {
        let w = [1.0, 2.0, 3.0, 4.0];
        assert!(!broadcast_trigger(&w, &w, 1.0, 1.0, 1.0, true));
        let hat = [0.0, 1.0, 2.0, 3.0];
        assert!(broadcast_trigger(&w, &hat, 0.5, 1.0, 1.0, true));
        assert!(broadcast_trigger(&w, &hat, 1.0, 1.0, 1.0, true));
        assert!(!broadcast_trigger(&w, &hat, 1.0, 1.0, 1.0, false));
    }

    #[test]
    fn aggregate_examples() {
        assert_eq!(aggregate(&[1.0, 2.0], &[]).unwrap(), vec![1.0, 2.0]);
        assert_eq!(aggregate(&[0.0], &[(&[2.0], 0.5)]).unwrap(), vec![1.0]);
        let third = 1.0 / 3.0;
        let out = aggregate(&[1.5], &[(&[0.0], third), (&[3.0], third)]).unwrap();
        assert!((out[0] - 1.5).abs() < 1e-15);
        assert!(aggregate(&[1.0], &[(&[1.0, 2.0], 0.5)]).is_err());
    }

    #[test]
    fn transmission_score_examples() {
        let g = GraphSnapshot::path(2);
        assert_eq!(
            transmission_score(&TriggerVector::none(2), &g, &[1.0, 1.0], 100),
            0.0
        );
        let tv = TriggerVector::from_broadcasts(vec![true, true]);
        let s = transmission_score(&tv, &g, &[1.0 / 100.0, 1.0 / 200.0], 100);
        assert!((s - 0.75).abs() < 1e-15);
        let g = GraphSnapshot::cycle(6);
        let tv = TriggerVector::from_broadcasts(vec![true; 6]);
        let s = transmission_score(&tv, &g, &[0.25; 6], 8);
        assert!((s - 0.25 * 8.0).abs() < 1e-12);
    }

    fn zero_tasks(m: usize, n: usize) -> Vec<LocalTask> {
        (0..m)
            .map(|_| {
                LocalTask::Quadratic(QuadraticTask::new(vec![vec![0.0; n]], vec![0.0]).unwrap())
            })
            .collect()
    }

    #[test]
    fn zero_threshold_on_complete_graph_averages_in_one_step() {
        let m = 5;
        let schedule = TopologySchedule::fixed(GraphSnapshot::complete(m)).unwrap();
        let mut cfg = SimulationConfig::new(
            zero_tasks(m, 3),
            schedule,
            TriggerPolicy::ZeroThreshold,
            StepPolicy::Constant { alpha: 0.1 },
        );
        cfg.init = Initialization::PerDevice { scale: 1.0 };
        let mut sim = Simulation::new(cfg).unwrap();
        let mean = sim.mean_model();
        sim.step().unwrap();
        for s in sim.states() {
            for (a, b) in s.w.iter().zip(&mean) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn one_broadcast_round_matches_matrix_form() {
        let m = 6;
        let base = GraphSnapshot::cycle(m);
        let schedule = TopologySchedule::fixed(base.clone()).unwrap();
        let mut cfg = SimulationConfig::new(
            zero_tasks(m, 2),
            schedule,
            TriggerPolicy::RandomizedGossip { prob: 0.5 },
            StepPolicy::Constant { alpha: 0.1 },
        );
        cfg.init = Initialization::PerDevice { scale: 1.0 };
        cfg.seed = 3;
        let mut sim = Simulation::new(cfg).unwrap();
        let w0 = sim.models();
        let rec = sim.step().unwrap();
        let p = build_transition(&base, &rec.triggers);
        let expected = p.apply(&w0).unwrap();
        for (a, b) in sim.models().iter().flatten().zip(expected.iter().flatten()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn auxiliary_model_changes_only_on_broadcast() {
        let m = 4;
        let schedule = TopologySchedule::new(
            GraphSnapshot::complete(m),
            ScheduleMode::RandomSubset { p: 0.5, b1: 2 },
            1,
        )
        .unwrap();
        let tasks: Vec<LocalTask> = (0..m)
            .map(|i| {
                LocalTask::Quadratic(
                    QuadraticTask::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![i as f64, 1.0])
                        .unwrap(),
                )
            })
            .collect();
        let cfg = SimulationConfig::new(
            tasks,
            schedule,
            TriggerPolicy::Efhc { r: 0.5 },
            StepPolicy::Constant { alpha: 0.05 },
        );
        let mut sim = Simulation::new(cfg).unwrap();
        for _ in 0..50 {
            let before: Vec<(Vec<f64>, Vec<f64>)> = sim
                .states()
                .iter()
                .map(|s| (s.w.clone(), s.w_hat.clone()))
                .collect();
            let rec = sim.step().unwrap();
            for (i, s) in sim.states().iter().enumerate() {
                if rec.triggers.broadcasts()[i] {
                    assert_eq!(s.w_hat, before[i].0);
                } else {
                    assert_eq!(s.w_hat, before[i].1);
                }
            }
        }
    }

    #[test]
    fn forced_broadcast_bounds_silence() {
        let m = 4;
        let schedule = TopologySchedule::fixed(GraphSnapshot::path(m)).unwrap();
        let mut cfg = SimulationConfig::new(
            zero_tasks(m, 1),
            schedule,
            TriggerPolicy::Efhc { r: f64::INFINITY },
            StepPolicy::Constant { alpha: 0.1 },
        );
        cfg.flags.enforce_b2 = Some(3);
        let out = run(cfg, 12).unwrap();
        for k in 0..=9 {
            for i in 0..m {
                assert!((k..k + 3).any(|t| out.triggers[t].broadcasts()[i]));
            }
        }
        assert_eq!(out.trace.total_broadcasts(), 4 * m);
    }

    #[test]
    fn trace_csv_round_trip() {
        let m = 3;
        let schedule = TopologySchedule::fixed(GraphSnapshot::path(m)).unwrap();
        let mut cfg = SimulationConfig::new(
            zero_tasks(m, 2),
            schedule,
            TriggerPolicy::ZeroThreshold,
            StepPolicy::Constant { alpha: 0.1 },
        );
        cfg.optimum = Some(ModelParams::zeros(2));
        cfg.init = Initialization::PerDevice { scale: 1.0 };
        let out = run(cfg, 4).unwrap();
        let csv = out.trace.to_csv();
        assert!(csv.starts_with(TRACE_HEADER));
        assert_eq!(MetricsTrace::from_csv(&csv).unwrap(), out.trace);
        assert!(MetricsTrace::from_csv("k,x\n").is_err());
    }

    #[test]
    fn rejects_mismatched_config() {
        let schedule = TopologySchedule::fixed(GraphSnapshot::path(3)).unwrap();
        let cfg = SimulationConfig::new(
            zero_tasks(2, 2),
            schedule.clone(),
            TriggerPolicy::ZeroThreshold,
            StepPolicy::Constant { alpha: 0.1 },
        );
        assert!(Simulation::new(cfg).is_err());
        let cfg = SimulationConfig::new(
            zero_tasks(3, 2),
            schedule,
            TriggerPolicy::Efhc { r: -1.0 },
            StepPolicy::Constant { alpha: 0.1 },
        );
        assert!(Simulation::new(cfg).is_err());
    }
}
