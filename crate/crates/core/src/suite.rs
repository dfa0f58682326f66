//! Monte Carlo suites: building runs from an [`ExperimentConfig`], writing
//! artifact directories, and verifying completed suites.
//!
//! Layout of a suite directory:
//!
//! ```text
//! <out>/config.txt              resolved suite config
//! <out>/summary.csv             per-run rows, then one mean row per policy
//! <out>/<policy>_seed<s>/trace.csv
//! <out>/<policy>_seed<s>/infoflow.txt
//! <out>/<policy>_seed<s>/config.txt   snapshot reproducing this run alone
//! <out>/PARTIAL                 present only if the suite aborted
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::analysis::{fit_rate, plateau_level, tradeoff_table, trailing_half, TradeoffMetric};
use crate::config::{ExperimentConfig, PolicyKind, ScheduleKind, StepKind, TaskSpec, TopologyKind};
use crate::data::{
    assign_bandwidths, label_partition, load_idx_dataset, synth_blobs, synth_quadratic_spec,
    BandwidthProfile, LabeledDataset, QuadraticSpec,
};
use crate::engine::{
    run, EngineFlags, GradientOracle, Initialization, MetricsTrace, RunOutput, SimulationConfig,
    ThresholdDecay, TriggerPolicy,
};
use crate::error::{Error, Result};
use crate::learning::{global_optimum, LocalTask, ModelParams, StepPolicy};
use crate::topology::{
    certify_b_connectivity, compute_window_b, gen_rgg_with, ConnectivityReading, GraphSnapshot,
    InfoFlowLog, ScheduleMode, TopologySchedule,
};

pub const SUMMARY_HEADER: &str = "policy,seed,iterations,final_consensus_error,final_optimality_gap,final_mean_accuracy,total_broadcasts,mean_transmission_score,cumulative_time";
pub const PARTIAL_MARKER: &str = "PARTIAL";

/// Classification data read once per suite.
#[derive(Debug, Clone, Default)]
pub struct DatasetCache {
    train: Option<LabeledDataset>,
    test: Option<LabeledDataset>,
}

impl DatasetCache {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        match &cfg.task {
            TaskSpec::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
                classes,
                ..
            } => {
                let train = load_idx_dataset(
                    cfg.resolve_path(train_images),
                    cfg.resolve_path(train_labels),
                    *classes,
                )?;
                let test = match (test_images, test_labels) {
                    (Some(i), Some(l)) => Some(load_idx_dataset(
                        cfg.resolve_path(i),
                        cfg.resolve_path(l),
                        *classes,
                    )?),
                    _ => None,
                };
                Ok(Self {
                    train: Some(train),
                    test,
                })
            }
            _ => Ok(Self::default()),
        }
    }
}

/// Everything a seed fixes before the policy is chosen.
#[derive(Debug, Clone)]
pub struct SeedContext {
    pub tasks: Vec<LocalTask>,
    pub schedule: TopologySchedule,
    pub bandwidths: BandwidthProfile,
    pub optimum: Option<ModelParams>,
    pub evaluation: Option<LocalTask>,
}

pub fn seed_context(
    cfg: &ExperimentConfig,
    seed: u64,
    cache: &DatasetCache,
) -> Result<SeedContext> {
    let m = cfg.m;
    let (tasks, optimum, evaluation) = match &cfg.task {
        TaskSpec::Quadratic {
            n,
            rows,
            design_scale,
            heterogeneity,
            per_device_design,
        } => {
            let spec = QuadraticSpec {
                m,
                n: *n,
                rows: *rows,
                design_scale: *design_scale,
                heterogeneity: *heterogeneity,
                per_device_design: *per_device_design,
                seed,
            };
            let inst = synth_quadratic_spec(&spec)?;
            let opt = global_optimum(&inst.tasks)?;
            (inst.tasks, Some(opt), None)
        }
        TaskSpec::Idx {
            labels_per_device,
            l2,
            ..
        } => {
            let train = cache
                .train
                .as_ref()
                .ok_or_else(|| Error::invalid("dataset cache was not loaded"))?;
            let part = label_partition(train, m, *labels_per_device, seed)?;
            let tasks = part
                .devices
                .iter()
                .map(|d| d.hinge_task(*l2))
                .collect::<Result<Vec<_>>>()?;
            let eval = cache.test.as_ref().unwrap_or(train).hinge_task(*l2)?;
            (tasks, None, Some(eval))
        }
        TaskSpec::Blobs {
            classes,
            per_class,
            features,
            spread,
            labels_per_device,
            l2,
        } => {
            let full = synth_blobs(*classes, 2 * per_class, *features, *spread, seed)?;
            let (train, test) = full.split_alternating();
            let part = label_partition(&train, m, *labels_per_device, seed)?;
            let tasks = part
                .devices
                .iter()
                .map(|d| d.hinge_task(*l2))
                .collect::<Result<Vec<_>>>()?;
            (tasks, None, Some(test.hinge_task(*l2)?))
        }
    };

    let base = match cfg.topology {
        TopologyKind::Rgg => {
            let reading = if cfg.density_connectivity {
                ConnectivityReading::Density
            } else {
                ConnectivityReading::Radius
            };
            gen_rgg_with(m, cfg.connectivity, seed, reading)?.graph
        }
        TopologyKind::Complete => GraphSnapshot::complete(m),
        TopologyKind::Cycle => GraphSnapshot::cycle(m),
        TopologyKind::Path => GraphSnapshot::path(m),
    };
    let mode = match cfg.schedule {
        ScheduleKind::Static => ScheduleMode::Static,
        ScheduleKind::Cyclic => ScheduleMode::CyclicPartition { b1: cfg.b1 },
        ScheduleKind::Random => ScheduleMode::RandomSubset {
            p: cfg.subset_p,
            b1: cfg.b1,
        },
    };
    Ok(SeedContext {
        tasks,
        schedule: TopologySchedule::new(base, mode, seed)?,
        bandwidths: assign_bandwidths(m, cfg.b_mean, cfg.sigma_n, seed)?,
        optimum,
        evaluation,
    })
}

pub fn step_policy(cfg: &ExperimentConfig) -> StepPolicy {
    match cfg.step {
        StepKind::Constant { alpha } => StepPolicy::Constant { alpha },
        StepKind::Diminishing {
            alpha0,
            gamma,
            theta,
        } => StepPolicy::Diminishing {
            alpha0,
            gamma,
            theta,
        },
    }
}

pub fn trigger_policy(cfg: &ExperimentConfig, policy: PolicyKind) -> TriggerPolicy {
    match policy {
        PolicyKind::Efhc => TriggerPolicy::Efhc { r: cfg.r },
        PolicyKind::Gt => TriggerPolicy::global(cfg.r, cfg.b_mean),
        PolicyKind::Zt => TriggerPolicy::ZeroThreshold,
        PolicyKind::Rg => TriggerPolicy::RandomizedGossip { prob: cfg.rg_prob },
    }
}

pub fn simulation_config(
    cfg: &ExperimentConfig,
    ctx: &SeedContext,
    policy: PolicyKind,
    seed: u64,
) -> SimulationConfig {
    SimulationConfig {
        tasks: ctx.tasks.clone(),
        schedule: ctx.schedule.clone(),
        policy: trigger_policy(cfg, policy),
        step: step_policy(cfg),
        threshold_decay: match cfg.threshold_decay {
            None => ThresholdDecay::FollowStep,
            Some(v) => ThresholdDecay::Schedule(StepPolicy::Constant { alpha: v }),
        },
        bandwidths: ctx.bandwidths.clone(),
        gradient: cfg
            .batch_size
            .map_or(GradientOracle::Exact, GradientOracle::Minibatch),
        init: if cfg.per_device_init {
            Initialization::PerDevice {
                scale: cfg.init_scale,
            }
        } else {
            Initialization::Shared {
                scale: cfg.init_scale,
            }
        },
        flags: EngineFlags {
            inclusive_trigger: cfg.inclusive_trigger,
            enforce_b2: cfg.enforce_b2.then_some(cfg.b2),
            count_connection_exchanges: cfg.count_connection_exchanges,
        },
        seed,
        optimum: ctx.optimum.clone(),
        evaluation: ctx.evaluation.clone(),
        eval_every: cfg.eval_every,
    }
}

/// Runs one `(policy, seed)` pair, loading any dataset it needs.
pub fn run_single(cfg: &ExperimentConfig, policy: PolicyKind, seed: u64) -> Result<RunOutput> {
    let cache = DatasetCache::load(cfg)?;
    let ctx = seed_context(cfg, seed, &cache)?;
    run(simulation_config(cfg, &ctx, policy, seed), cfg.iterations)
}

pub fn run_dir_name(policy: PolicyKind, seed: u64) -> String {
    format!("{}_seed{seed}", policy.label())
}

/// Config snapshot that reproduces exactly one run of the suite.
pub fn run_snapshot(cfg: &ExperimentConfig, policy: PolicyKind, seed: u64) -> ExperimentConfig {
    let mut one = cfg.clone();
    one.policies = vec![policy];
    one.seeds = vec![seed];
    one.parallel = false;
    one
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub policy: PolicyKind,
    pub seed: u64,
    pub iterations: usize,
    pub final_consensus_error: Option<f64>,
    pub final_optimality_gap: Option<f64>,
    pub final_mean_accuracy: Option<f64>,
    pub total_broadcasts: usize,
    pub mean_transmission_score: f64,
    pub cumulative_time: f64,
}

impl RunSummary {
    pub fn from_trace(policy: PolicyKind, seed: u64, trace: &MetricsTrace) -> Self {
        let last = trace.rows.last();
        Self {
            policy,
            seed,
            iterations: trace.len(),
            final_consensus_error: last.map(|r| r.consensus_error),
            final_optimality_gap: last.and_then(|r| r.optimality_gap),
            final_mean_accuracy: trace.rows.iter().rev().find_map(|r| r.mean_accuracy),
            total_broadcasts: trace.total_broadcasts(),
            mean_transmission_score: trace.mean_transmission_score(),
            cumulative_time: last.map_or(0.0, |r| r.cumulative_time),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SuiteSummary {
    pub runs: Vec<RunSummary>,
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let vs: Option<Vec<f64>> = values.collect();
    vs.filter(|v| !v.is_empty())
        .map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

impl SuiteSummary {
    /// Per-run rows in execution order, then a `mean` row per policy.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SUMMARY_HEADER);
        out.push('\n');
        for r in &self.runs {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.policy.label(),
                r.seed,
                r.iterations,
                cell(r.final_consensus_error),
                cell(r.final_optimality_gap),
                cell(r.final_mean_accuracy),
                r.total_broadcasts,
                r.mean_transmission_score,
                r.cumulative_time
            );
        }
        let mut policies: Vec<PolicyKind> = Vec::new();
        for r in &self.runs {
            if !policies.contains(&r.policy) {
                policies.push(r.policy);
            }
        }
        for p in policies {
            let rows: Vec<&RunSummary> = self.runs.iter().filter(|r| r.policy == p).collect();
            let n = rows.len() as f64;
            let _ = writeln!(
                out,
                "{},mean,{},{},{},{},{},{},{}",
                p.label(),
                rows.iter().map(|r| r.iterations as f64).sum::<f64>() / n,
                cell(mean_of(rows.iter().map(|r| r.final_consensus_error))),
                cell(mean_of(rows.iter().map(|r| r.final_optimality_gap))),
                cell(mean_of(rows.iter().map(|r| r.final_mean_accuracy))),
                rows.iter().map(|r| r.total_broadcasts as f64).sum::<f64>() / n,
                rows.iter().map(|r| r.mean_transmission_score).sum::<f64>() / n,
                rows.iter().map(|r| r.cumulative_time).sum::<f64>() / n
            );
        }
        out
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_run(
    out: &Path,
    cfg: &ExperimentConfig,
    policy: PolicyKind,
    seed: u64,
    output: &RunOutput,
) -> Result<()> {
    let dir = out.join(run_dir_name(policy, seed));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    write(&dir.join("trace.csv"), &output.trace.to_csv())?;
    write(&dir.join("infoflow.txt"), &output.log.to_text())?;
    write(
        &dir.join("config.txt"),
        &run_snapshot(cfg, policy, seed).to_text(),
    )
}

/// Runs every `(policy, seed)` pair and writes the artifact directory. On
/// failure, completed runs stay on disk next to a `PARTIAL` marker holding
/// the error.
pub fn run_suite(cfg: &ExperimentConfig, out: impl AsRef<Path>) -> Result<SuiteSummary> {
    let out = out.as_ref();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let marker = out.join(PARTIAL_MARKER);
    if marker.exists() {
        fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
    }
    write(&out.join("config.txt"), &cfg.to_text())?;

    let result = execute(cfg, out);
    match result {
        Ok(summary) => {
            write(&out.join("summary.csv"), &summary.to_csv())?;
            Ok(summary)
        }
        Err(err) => {
            write(&marker, &format!("{err}\n"))?;
            Err(err)
        }
    }
}

fn execute(cfg: &ExperimentConfig, out: &Path) -> Result<SuiteSummary> {
    let cache = DatasetCache::load(cfg)?;
    let contexts = cfg
        .seeds
        .iter()
        .map(|&s| seed_context(cfg, s, &cache))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(PolicyKind, usize)> = cfg
        .policies
        .iter()
        .flat_map(|&p| (0..cfg.seeds.len()).map(move |i| (p, i)))
        .collect();
    let job = |&(policy, i): &(PolicyKind, usize)| -> Result<RunSummary> {
        let seed = cfg.seeds[i];
        let output = run(
            simulation_config(cfg, &contexts[i], policy, seed),
            cfg.iterations,
        )?;
        write_run(out, cfg, policy, seed, &output)?;
        Ok(RunSummary::from_trace(policy, seed, &output.trace))
    };

    let results: Vec<Result<RunSummary>> = if cfg.parallel && jobs.len() > 1 {
        let workers = std::thread::available_parallelism()
            .map_or(1, |n| n.get())
            .min(jobs.len());
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<Result<RunSummary>>>> =
            Mutex::new((0..jobs.len()).map(|_| None).collect());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let idx = next.fetch_add(1, Ordering::Relaxed);
                    if idx >= jobs.len() {
                        break;
                    }
                    let res = job(&jobs[idx]);
                    slots.lock().unwrap()[idx] = Some(res);
                });
            }
        });
        slots
            .into_inner()
            .unwrap()
            .into_iter()
            .map(|r| r.expect("every job ran"))
            .collect()
    } else {
        let mut results = Vec::with_capacity(jobs.len());
        for j in &jobs {
            let res = job(j);
            let failed = res.is_err();
            results.push(res);
            if failed {
                break;
            }
        }
        results
    };
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(SuiteSummary { runs })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIPPED",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifyReport {
    pub criteria: Vec<CriterionResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.status != Status::Fail)
    }

    pub fn status(&self, name: &str) -> Option<Status> {
        self.criteria
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.status)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.criteria {
            let _ = writeln!(out, "{:<7} {}: {}", c.status.label(), c.name, c.detail);
        }
        out
    }

    fn push(&mut self, name: &'static str, status: Status, detail: impl Into<String>) {
        self.criteria.push(CriterionResult {
            name,
            status,
            detail: detail.into(),
        });
    }
}

pub const RATE_BAND: (f64, f64) = (-0.8, -0.3);
pub const CONVERGENCE_FACTOR: f64 = 1e-3;
/// Shortest horizon for which the convergence and rate checks apply.
pub const MIN_RATE_ITERATIONS: usize = 10_000;

struct LoadedRun {
    policy: PolicyKind,
    seed: u64,
    trace: MetricsTrace,
    log: InfoFlowLog,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn pass_if(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

/// Checks a completed suite directory against the criteria its config makes
/// applicable; the others are reported as skipped.
pub fn verify(dir: impl AsRef<Path>) -> Result<VerifyReport> {
    let dir = dir.as_ref();
    let cfg_path = dir.join("config.txt");
    let mut missing: Vec<PathBuf> = [cfg_path.clone(), dir.join("summary.csv")]
        .into_iter()
        .filter(|p| !p.is_file())
        .collect();
    if !cfg_path.is_file() {
        return Err(Error::MissingArtifacts(missing));
    }
    let cfg = ExperimentConfig::parse(&read(&cfg_path)?)?;
    for &p in &cfg.policies {
        for &s in &cfg.seeds {
            let run_dir = dir.join(run_dir_name(p, s));
            for f in ["trace.csv", "infoflow.txt", "config.txt"] {
                if !run_dir.join(f).is_file() {
                    missing.push(run_dir.join(f));
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingArtifacts(missing));
    }

    let mut runs = Vec::new();
    for &policy in &cfg.policies {
        for &seed in &cfg.seeds {
            let run_dir = dir.join(run_dir_name(policy, seed));
            runs.push(LoadedRun {
                policy,
                seed,
                trace: MetricsTrace::from_csv(&read(&run_dir.join("trace.csv"))?)?,
                log: InfoFlowLog::from_text(&read(&run_dir.join("infoflow.txt"))?)?,
            });
        }
    }

    let mut report = VerifyReport::default();
    check_connectivity(&cfg, &runs, &mut report)?;
    check_zero_threshold(&cfg, &runs, &mut report);
    check_convergence(&cfg, &runs, &mut report)?;
    check_plateau(&cfg, &runs, &mut report)?;
    check_tradeoff(&cfg, &runs, &mut report)?;
    check_determinism(&cfg, dir, &mut report)?;
    Ok(report)
}

fn check_connectivity(
    cfg: &ExperimentConfig,
    runs: &[LoadedRun],
    report: &mut VerifyReport,
) -> Result<()> {
    const NAME: &str = "connectivity";
    if !cfg.enforce_b2 {
        report.push(
            NAME,
            Status::Skipped,
            "enforce_b2 is off, so no B-connectivity guarantee",
        );
        return Ok(());
    }
    let b = compute_window_b(
        if cfg.schedule == ScheduleKind::Static {
            1
        } else {
            cfg.b1
        },
        cfg.b2,
    );
    let mut bad = Vec::new();
    let mut checked = 0;
    for r in runs.iter().filter(|r| r.log.len() >= b) {
        checked += 1;
        let rep = certify_b_connectivity(&r.log, b)?;
        if !rep.is_certified() {
            bad.push(format!(
                "{}_seed{} ({} windows)",
                r.policy.label(),
                r.seed,
                rep.violations.len()
            ));
        }
    }
    if checked == 0 {
        report.push(
            NAME,
            Status::Skipped,
            format!("every log is shorter than B = {b}"),
        );
    } else if bad.is_empty() {
        report.push(
            NAME,
            Status::Pass,
            format!("{checked} logs certified at B = {b}"),
        );
    } else {
        report.push(
            NAME,
            Status::Fail,
            format!("not {b}-connected: {}", bad.join(", ")),
        );
    }
    Ok(())
}

fn check_zero_threshold(cfg: &ExperimentConfig, runs: &[LoadedRun], report: &mut VerifyReport) {
    const NAME: &str = "zero-threshold-broadcasts";
    let zt: Vec<&LoadedRun> = runs.iter().filter(|r| r.policy == PolicyKind::Zt).collect();
    if zt.is_empty() {
        report.push(NAME, Status::Skipped, "no zt runs");
        return;
    }
    let expected = cfg.m * cfg.iterations;
    let bad: Vec<String> = zt
        .iter()
        .filter(|r| r.trace.total_broadcasts() != expected)
        .map(|r| format!("seed {}: {}", r.seed, r.trace.total_broadcasts()))
        .collect();
    if bad.is_empty() {
        report.push(
            NAME,
            Status::Pass,
            format!("every zt run broadcast m*K = {expected} times"),
        );
    } else {
        report.push(
            NAME,
            Status::Fail,
            format!("expected {expected}: {}", bad.join(", ")),
        );
    }
}

/// Reference level for a decay check: the first value, or the peak when the
/// trace starts at zero (shared initialization has no initial disagreement).
fn reference_level(values: &[f64]) -> f64 {
    if values[0] > 0.0 {
        values[0]
    } else {
        values.iter().copied().fold(0.0, f64::max)
    }
}

fn check_convergence(
    cfg: &ExperimentConfig,
    runs: &[LoadedRun],
    report: &mut VerifyReport,
) -> Result<()> {
    let applicable = cfg.is_quadratic()
        && matches!(cfg.step, StepKind::Diminishing { .. })
        && cfg.iterations >= MIN_RATE_ITERATIONS;
    if !applicable {
        let why =
            format!("needs a quadratic task, a diminishing step and K >= {MIN_RATE_ITERATIONS}");
        report.push("convergence", Status::Skipped, why.clone());
        report.push("rate", Status::Skipped, why);
        return Ok(());
    }
    let mut bad = Vec::new();
    for r in runs {
        let ce = r.trace.consensus_errors();
        let gap = r
            .trace
            .optimality_gaps()
            .ok_or_else(|| Error::invalid("trace lacks optimality gaps"))?;
        let ce_ok = *ce.last().unwrap() < CONVERGENCE_FACTOR * reference_level(&ce);
        let gap_ok = *gap.last().unwrap() < CONVERGENCE_FACTOR * reference_level(&gap);
        if !(ce_ok && gap_ok) {
            bad.push(format!("{}_seed{}", r.policy.label(), r.seed));
        }
    }
    report.push(
        "convergence",
        pass_if(bad.is_empty()),
        if bad.is_empty() {
            format!(
                "{} runs below {CONVERGENCE_FACTOR} of their starting error and gap",
                runs.len()
            )
        } else {
            format!("insufficient decay: {}", bad.join(", "))
        },
    );

    // Slope of the seed-averaged gap per policy.
    let mut details = Vec::new();
    let mut ok = true;
    for &p in &cfg.policies {
        let traces: Vec<Vec<f64>> = runs
            .iter()
            .filter(|r| r.policy == p)
            .map(|r| r.trace.optimality_gaps().unwrap())
            .collect();
        let len = traces.iter().map(Vec::len).min().unwrap_or(0);
        let avg: Vec<f64> = (0..len)
            .map(|k| traces.iter().map(|t| t[k]).sum::<f64>() / traces.len() as f64)
            .collect();
        let fit = fit_rate(&avg, trailing_half(len))?;
        let inside = fit.slope >= RATE_BAND.0 && fit.slope <= RATE_BAND.1;
        ok &= inside;
        details.push(format!("{} slope {:.3}", p.label(), fit.slope));
    }
    report.push(
        "rate",
        pass_if(ok),
        format!(
            "{} (band [{}, {}])",
            details.join(", "),
            RATE_BAND.0,
            RATE_BAND.1
        ),
    );
    Ok(())
}

fn check_plateau(
    cfg: &ExperimentConfig,
    runs: &[LoadedRun],
    report: &mut VerifyReport,
) -> Result<()> {
    const NAME: &str = "plateau";
    if !(cfg.is_quadratic() && matches!(cfg.step, StepKind::Constant { .. })) {
        report.push(
            NAME,
            Status::Skipped,
            "needs a quadratic task with a constant step",
        );
        return Ok(());
    }
    let mut levels = Vec::new();
    let mut ok = true;
    for r in runs {
        let gap = r
            .trace
            .optimality_gaps()
            .ok_or_else(|| Error::invalid("trace lacks optimality gaps"))?;
        let level = plateau_level(&gap, 0.25)?;
        ok &= level > 0.0;
        levels.push(format!("{}_seed{} {:.3e}", r.policy.label(), r.seed, level));
    }
    report.push(NAME, pass_if(ok), levels.join(", "));
    Ok(())
}

fn check_tradeoff(
    cfg: &ExperimentConfig,
    runs: &[LoadedRun],
    report: &mut VerifyReport,
) -> Result<()> {
    const NAME: &str = "tradeoff";
    let has = |p| cfg.policies.contains(&p);
    if !(has(PolicyKind::Efhc) && has(PolicyKind::Gt)) {
        report.push(NAME, Status::Skipped, "needs both efhc and gt runs");
        return Ok(());
    }
    let metric = if cfg.is_quadratic() {
        TradeoffMetric::OptimalityGap
    } else {
        TradeoffMetric::Accuracy
    };
    let find = |p, s| runs.iter().find(|r| r.policy == p && r.seed == s).unwrap();
    let mut wins = 0;
    let mut cheaper = true;
    for &s in &cfg.seeds {
        let e = find(PolicyKind::Efhc, s);
        let g = find(PolicyKind::Gt, s);
        let table = tradeoff_table(
            &[
                ("efhc".into(), e.trace.clone()),
                ("gt".into(), g.trace.clone()),
            ],
            metric,
            100,
        )?;
        if let [Some(a), Some(b)] = table.final_row()[..] {
            if table.at_least_as_good(a, b) {
                wins += 1;
            }
        }
        if has(PolicyKind::Zt) {
            let z = find(PolicyKind::Zt, s);
            cheaper &= e.trace.mean_transmission_score() < z.trace.mean_transmission_score();
        }
    }
    let needed = (4 * cfg.seeds.len()).div_ceil(5);
    let mut detail = format!(
        "efhc at least as good as gt at matched time in {wins}/{} seeds (need {needed})",
        cfg.seeds.len()
    );
    if has(PolicyKind::Zt) {
        let _ = write!(detail, "; efhc cheaper than zt in every seed: {cheaper}");
    }
    report.push(NAME, pass_if(wins >= needed && cheaper), detail);
    Ok(())
}

fn check_determinism(cfg: &ExperimentConfig, dir: &Path, report: &mut VerifyReport) -> Result<()> {
    let (Some(&policy), Some(&seed)) = (cfg.policies.first(), cfg.seeds.first()) else {
        report.push("determinism", Status::Skipped, "no runs");
        return Ok(());
    };
    let run_dir = dir.join(run_dir_name(policy, seed));
    let snapshot = ExperimentConfig::parse(&read(&run_dir.join("config.txt"))?)?;
    let again = run_single(&snapshot, policy, seed)?;
    let stored = read(&run_dir.join("trace.csv"))?;
    report.push(
        "determinism",
        pass_if(again.trace.to_csv() == stored),
        format!("rerun of {} from its snapshot", run_dir_name(policy, seed)),
    );
    Ok(())
}
