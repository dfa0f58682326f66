//! Flat `key = value` experiment configuration.
//!
//! One assignment per line, `#` starts a comment, keys are case-sensitive.
//! Unknown and duplicate keys are errors. [`template`]`("reference")` lists
//! every key with its default.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Environment variable naming the dataset cache root.
pub const DATA_DIR_ENV: &str = "EFHC_DATA_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PolicyKind {
    Efhc,
    Gt,
    Zt,
    Rg,
}

impl PolicyKind {
    pub fn label(self) -> &'static str {
        match self {
            PolicyKind::Efhc => "efhc",
            PolicyKind::Gt => "gt",
            PolicyKind::Zt => "zt",
            PolicyKind::Rg => "rg",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "efhc" => PolicyKind::Efhc,
            "gt" => PolicyKind::Gt,
            "zt" => PolicyKind::Zt,
            "rg" => PolicyKind::Rg,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TaskSpec {
    Quadratic {
        n: usize,
        rows: usize,
        design_scale: f64,
        heterogeneity: f64,
        per_device_design: bool,
    },
    /// IDX image/label files, paths relative to the data directory.
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: Option<PathBuf>,
        test_labels: Option<PathBuf>,
        classes: usize,
        labels_per_device: usize,
        l2: f64,
    },
    /// Synthetic Gaussian class clusters split by label.
    Blobs {
        classes: usize,
        per_class: usize,
        features: usize,
        spread: f64,
        labels_per_device: usize,
        l2: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopologyKind {
    Rgg,
    Complete,
    Cycle,
    Path,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    Static,
    Cyclic,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepKind {
    Constant { alpha: f64 },
    Diminishing { alpha0: f64, gamma: f64, theta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub task: TaskSpec,
    pub m: usize,
    /// `None` uses exact local gradients.
    pub batch_size: Option<usize>,
    pub data_dir: PathBuf,
    pub topology: TopologyKind,
    pub connectivity: f64,
    pub density_connectivity: bool,
    pub schedule: ScheduleKind,
    pub b1: usize,
    pub subset_p: f64,
    pub policies: Vec<PolicyKind>,
    pub r: f64,
    pub rg_prob: f64,
    pub step: StepKind,
    /// `None` sets `γ^(k) = α^(k)`; otherwise a constant decay factor.
    pub threshold_decay: Option<f64>,
    pub iterations: usize,
    pub seeds: Vec<u64>,
    pub b_mean: f64,
    pub sigma_n: f64,
    pub inclusive_trigger: bool,
    pub enforce_b2: bool,
    pub b2: usize,
    pub count_connection_exchanges: bool,
    pub per_device_init: bool,
    pub init_scale: f64,
    pub eval_every: usize,
    pub parallel: bool,
}

const KEYS: &[&str] = &[
    "task",
    "m",
    "n",
    "rows",
    "design_scale",
    "heterogeneity",
    "per_device_design",
    "batch_size",
    "data_dir",
    "train_images",
    "train_labels",
    "test_images",
    "test_labels",
    "classes",
    "labels_per_device",
    "l2",
    "per_class",
    "features",
    "spread",
    "topology",
    "connectivity",
    "connectivity_mode",
    "schedule",
    "b1",
    "subset_p",
    "policy",
    "r",
    "rg_prob",
    "step",
    "alpha",
    "alpha0",
    "step_gamma",
    "theta",
    "threshold_decay",
    "K",
    "seed",
    "b_mean",
    "sigma_n",
    "inclusive_trigger",
    "enforce_b2",
    "b2",
    "count_connection_exchanges",
    "init",
    "init_scale",
    "eval_every",
    "parallel",
];

struct Entries {
    map: BTreeMap<String, (String, usize)>,
}

fn validation(field: &str, message: impl Into<String>) -> Error {
    Error::Validation {
        field: field.to_string(),
        message: message.into(),
    }
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut map: BTreeMap<String, (String, usize)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
                line,
                message: format!("expected `key = value`, found `{content}`"),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Parse {
                    line,
                    message: "empty key".into(),
                });
            }
            if !KEYS.contains(&key) {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown key `{key}`"),
                });
            }
            if let Some((_, first)) = map.get(key) {
                return Err(Error::Parse {
                    line,
                    message: format!("duplicate key `{key}` on lines {first} and {line}"),
                });
            }
            map.insert(key.to_string(), (value.trim().to_string(), line));
        }
        Ok(Self { map })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|(v, _)| v.as_str())
    }

    fn get<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e| validation(key, format!("cannot parse `{v}`: {e}"))),
        }
    }

    fn flag(&self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some("true" | "yes" | "on" | "1") => Ok(true),
            Some("false" | "no" | "off" | "0") => Ok(false),
            Some(v) => Err(validation(
                key,
                format!("expected true or false, found `{v}`"),
            )),
        }
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.raw(key).filter(|v| !v.is_empty()).map(PathBuf::from)
    }
}

fn positive(field: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(validation(field, format!("{field} must be positive")))
    }
}

fn at_least_one(field: &str, v: usize) -> Result<usize> {
    if v >= 1 {
        Ok(v)
    } else {
        Err(validation(field, format!("{field} must be at least 1")))
    }
}

fn default_data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

impl ExperimentConfig {
    /// Parses and validates config text. Relative dataset paths resolve
    /// against `data_dir`, then `$EFHC_DATA_DIR`, then the working directory.
    pub fn parse(text: &str) -> Result<Self> {
        let e = Entries::parse(text)?;
        let m = at_least_one("m", e.get("m", 10)?)?;
        let data_dir = e.path("data_dir").unwrap_or_else(default_data_dir);

        let l2 = e.get("l2", crate::learning::DEFAULT_HINGE_L2)?;
        if !(l2.is_finite() && l2 >= 0.0) {
            return Err(validation("l2", "l2 must be non-negative"));
        }
        let task = match e.raw("task").unwrap_or("quadratic") {
            "quadratic" => {
                let n = at_least_one("n", e.get("n", 10)?)?;
                let rows = e.get("rows", 2 * n)?;
                if rows < n {
                    return Err(validation("rows", format!("rows must be at least n = {n}")));
                }
                let heterogeneity: f64 = e.get("heterogeneity", 1.0)?;
                if !(heterogeneity.is_finite() && heterogeneity >= 0.0) {
                    return Err(validation(
                        "heterogeneity",
                        "heterogeneity must be non-negative",
                    ));
                }
                TaskSpec::Quadratic {
                    n,
                    rows,
                    design_scale: positive("design_scale", e.get("design_scale", 1.0)?)?,
                    heterogeneity,
                    per_device_design: e.flag("per_device_design", false)?,
                }
            }
            "idx" => {
                let need = |key: &str| {
                    e.path(key)
                        .ok_or_else(|| validation(key, format!("{key} is required for task = idx")))
                };
                let train_images = need("train_images")?;
                let train_labels = need("train_labels")?;
                let test_images = e.path("test_images");
                let test_labels = e.path("test_labels");
                if test_images.is_some() != test_labels.is_some() {
                    return Err(validation(
                        "test_images",
                        "test_images and test_labels must be given together",
                    ));
                }
                let spec = TaskSpec::Idx {
                    train_images,
                    train_labels,
                    test_images,
                    test_labels,
                    classes: at_least_one("classes", e.get("classes", 10)?)?,
                    labels_per_device: at_least_one(
                        "labels_per_device",
                        e.get("labels_per_device", 1)?,
                    )?,
                    l2,
                };
                if let TaskSpec::Idx {
                    train_images,
                    train_labels,
                    test_images,
                    test_labels,
                    ..
                } = &spec
                {
                    let named = [
                        ("train_images", Some(train_images)),
                        ("train_labels", Some(train_labels)),
                        ("test_images", test_images.as_ref()),
                        ("test_labels", test_labels.as_ref()),
                    ];
                    for (field, p) in named {
                        if let Some(p) = p {
                            let full = resolve(&data_dir, p);
                            if !full.is_file() {
                                return Err(validation(
                                    field,
                                    format!("{} does not exist", full.display()),
                                ));
                            }
                        }
                    }
                }
                spec
            }
            "blobs" => TaskSpec::Blobs {
                classes: at_least_one("classes", e.get("classes", 10)?)?,
                per_class: at_least_one("per_class", e.get("per_class", 100)?)?,
                features: at_least_one("features", e.get("features", 20)?)?,
                spread: positive("spread", e.get("spread", 0.5)?)?,
                labels_per_device: at_least_one(
                    "labels_per_device",
                    e.get("labels_per_device", 1)?,
                )?,
                l2,
            },
            other => {
                return Err(validation(
                    "task",
                    format!("unknown task `{other}` (quadratic, idx, blobs)"),
                ))
            }
        };
        if let TaskSpec::Idx {
            classes,
            labels_per_device,
            ..
        }
        | TaskSpec::Blobs {
            classes,
            labels_per_device,
            ..
        } = &task
        {
            if labels_per_device > classes || m * labels_per_device < *classes {
                return Err(validation(
                    "labels_per_device",
                    format!(
                        "{m} devices x {labels_per_device} labels cannot cover {classes} classes"
                    ),
                ));
            }
        }

        let batch_size = match e.raw("batch_size") {
            None | Some("full") => None,
            Some(_) => Some(at_least_one("batch_size", e.get("batch_size", 1)?)?),
        };

        let topology = match e.raw("topology").unwrap_or("rgg") {
            "rgg" => TopologyKind::Rgg,
            "complete" => TopologyKind::Complete,
            "cycle" => TopologyKind::Cycle,
            "path" => TopologyKind::Path,
            other => {
                return Err(validation(
                    "topology",
                    format!("unknown topology `{other}`"),
                ))
            }
        };
        let density_connectivity = match e.raw("connectivity_mode").unwrap_or("radius") {
            "radius" => false,
            "density" => true,
            other => {
                return Err(validation(
                    "connectivity_mode",
                    format!("expected radius or density, found `{other}`"),
                ))
            }
        };
        let schedule = match e.raw("schedule").unwrap_or("static") {
            "static" => ScheduleKind::Static,
            "cyclic" => ScheduleKind::Cyclic,
            "random" => ScheduleKind::Random,
            other => {
                return Err(validation(
                    "schedule",
                    format!("unknown schedule `{other}`"),
                ))
            }
        };
        let subset_p = e.get("subset_p", 0.5)?;
        if !(0.0..=1.0).contains(&subset_p) {
            return Err(validation("subset_p", "subset_p must lie in [0, 1]"));
        }

        let policies = e
            .raw("policy")
            .unwrap_or("efhc")
            .split(',')
            .map(|s| {
                PolicyKind::parse(s.trim())
                    .ok_or_else(|| validation("policy", format!("unknown policy `{}`", s.trim())))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut sorted = policies.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != policies.len() {
            return Err(validation("policy", "policy listed twice"));
        }

        let b_mean = positive("b_mean", e.get("b_mean", 5000.0)?)?;
        let sigma_n = e.get("sigma_n", 0.9)?;
        if !(0.0..1.0).contains(&sigma_n) {
            return Err(validation("sigma_n", "sigma_n must lie in [0, 1)"));
        }
        let r = positive("r", e.get("r", b_mean * 1e-2)?)?;
        let rg_prob = e.get("rg_prob", 1.0 / m as f64)?;
        if !(rg_prob > 0.0 && rg_prob <= 1.0) {
            return Err(validation("rg_prob", "rg_prob must lie in (0, 1]"));
        }

        let step = match e.raw("step").unwrap_or("diminishing") {
            "constant" => StepKind::Constant {
                alpha: positive("alpha", e.get("alpha", 0.01)?)?,
            },
            "diminishing" => {
                let theta = e.get("theta", 0.5)?;
                if !(0.5..=1.0).contains(&theta) {
                    return Err(validation("theta", "theta must lie in [0.5, 1]"));
                }
                StepKind::Diminishing {
                    alpha0: positive("alpha0", e.get("alpha0", 0.1)?)?,
                    gamma: positive("step_gamma", e.get("step_gamma", 1.0)?)?,
                    theta,
                }
            }
            other => return Err(validation("step", format!("unknown step policy `{other}`"))),
        };
        let threshold_decay = match e.raw("threshold_decay") {
            None | Some("step") => None,
            Some(_) => Some(positive("threshold_decay", e.get("threshold_decay", 1.0)?)?),
        };

        let seeds = e
            .raw("seed")
            .unwrap_or("1")
            .split(',')
            .map(|s| {
                s.trim().parse::<u64>().map_err(|err| {
                    validation("seed", format!("cannot parse `{}`: {err}", s.trim()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut unique = seeds.clone();
        unique.sort_unstable();
        unique.dedup();
        if unique.len() != seeds.len() {
            return Err(validation("seed", "seed listed twice"));
        }

        let per_device_init = match e.raw("init").unwrap_or("shared") {
            "shared" => false,
            "per-device" => true,
            other => {
                return Err(validation(
                    "init",
                    format!("expected shared or per-device, found `{other}`"),
                ))
            }
        };
        let init_scale: f64 = e.get("init_scale", 1.0)?;
        if !(init_scale.is_finite() && init_scale >= 0.0) {
            return Err(validation("init_scale", "init_scale must be non-negative"));
        }

        let cfg = Self {
            task,
            m,
            batch_size,
            data_dir,
            topology,
            connectivity: positive("connectivity", e.get("connectivity", 0.4)?)?,
            density_connectivity,
            schedule,
            b1: at_least_one("b1", e.get("b1", 1)?)?,
            subset_p,
            policies,
            r,
            rg_prob,
            step,
            threshold_decay,
            iterations: e.get("K", 1000)?,
            seeds,
            b_mean,
            sigma_n,
            inclusive_trigger: e.flag("inclusive_trigger", true)?,
            enforce_b2: e.flag("enforce_b2", false)?,
            b2: at_least_one("b2", e.get("b2", 10)?)?,
            count_connection_exchanges: e.flag("count_connection_exchanges", true)?,
            per_device_init,
            init_scale,
            eval_every: at_least_one("eval_every", e.get("eval_every", 10)?)?,
            parallel: e.flag("parallel", false)?,
        };
        if cfg.topology == TopologyKind::Rgg && cfg.m < 2 {
            return Err(validation("m", "random geometric graphs need m >= 2"));
        }
        if cfg.density_connectivity && cfg.connectivity > 1.0 {
            return Err(validation(
                "connectivity",
                "edge density must lie in (0, 1]",
            ));
        }
        Ok(cfg)
    }

    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        resolve(&self.data_dir, p)
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self.task, TaskSpec::Quadratic { .. })
    }

    /// Fully resolved snapshot; parsing it yields an equal config.
    pub fn to_text(&self) -> String {
        let mut o = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(o, "{k} = {v}");
        };
        match &self.task {
            TaskSpec::Quadratic {
                n,
                rows,
                design_scale,
                heterogeneity,
                per_device_design,
            } => {
                kv("task", "quadratic".into());
                kv("n", n.to_string());
                kv("rows", rows.to_string());
                kv("design_scale", design_scale.to_string());
                kv("heterogeneity", heterogeneity.to_string());
                kv("per_device_design", per_device_design.to_string());
            }
            TaskSpec::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
                classes,
                labels_per_device,
                l2,
            } => {
                kv("task", "idx".into());
                kv("data_dir", self.data_dir.display().to_string());
                kv("train_images", train_images.display().to_string());
                kv("train_labels", train_labels.display().to_string());
                if let (Some(i), Some(l)) = (test_images, test_labels) {
                    kv("test_images", i.display().to_string());
                    kv("test_labels", l.display().to_string());
                }
                kv("classes", classes.to_string());
                kv("labels_per_device", labels_per_device.to_string());
                kv("l2", l2.to_string());
            }
            TaskSpec::Blobs {
                classes,
                per_class,
                features,
                spread,
                labels_per_device,
                l2,
            } => {
                kv("task", "blobs".into());
                kv("classes", classes.to_string());
                kv("per_class", per_class.to_string());
                kv("features", features.to_string());
                kv("spread", spread.to_string());
                kv("labels_per_device", labels_per_device.to_string());
                kv("l2", l2.to_string());
            }
        }
        kv("m", self.m.to_string());
        kv(
            "batch_size",
            self.batch_size.map_or("full".into(), |b| b.to_string()),
        );
        kv(
            "topology",
            match self.topology {
                TopologyKind::Rgg => "rgg",
                TopologyKind::Complete => "complete",
                TopologyKind::Cycle => "cycle",
                TopologyKind::Path => "path",
            }
            .into(),
        );
        kv("connectivity", self.connectivity.to_string());
        kv(
            "connectivity_mode",
            if self.density_connectivity {
                "density"
            } else {
                "radius"
            }
            .into(),
        );
        kv(
            "schedule",
            match self.schedule {
                ScheduleKind::Static => "static",
                ScheduleKind::Cyclic => "cyclic",
                ScheduleKind::Random => "random",
            }
            .into(),
        );
        kv("b1", self.b1.to_string());
        kv("subset_p", self.subset_p.to_string());
        kv(
            "policy",
            self.policies
                .iter()
                .map(|p| p.label())
                .collect::<Vec<_>>()
                .join(","),
        );
        kv("r", self.r.to_string());
        kv("rg_prob", self.rg_prob.to_string());
        match self.step {
            StepKind::Constant { alpha } => {
                kv("step", "constant".into());
                kv("alpha", alpha.to_string());
            }
            StepKind::Diminishing {
                alpha0,
                gamma,
                theta,
            } => {
                kv("step", "diminishing".into());
                kv("alpha0", alpha0.to_string());
                kv("step_gamma", gamma.to_string());
                kv("theta", theta.to_string());
            }
        }
        kv(
            "threshold_decay",
            self.threshold_decay
                .map_or("step".into(), |v| v.to_string()),
        );
        kv("K", self.iterations.to_string());
        kv(
            "seed",
            self.seeds
                .iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join(","),
        );
        kv("b_mean", self.b_mean.to_string());
        kv("sigma_n", self.sigma_n.to_string());
        kv("inclusive_trigger", self.inclusive_trigger.to_string());
        kv("enforce_b2", self.enforce_b2.to_string());
        kv("b2", self.b2.to_string());
        kv(
            "count_connection_exchanges",
            self.count_connection_exchanges.to_string(),
        );
        kv(
            "init",
            if self.per_device_init {
                "per-device"
            } else {
                "shared"
            }
            .into(),
        );
        kv("init_scale", self.init_scale.to_string());
        kv("eval_every", self.eval_every.to_string());
        kv("parallel", self.parallel.to_string());
        o
    }
}

fn resolve(data_dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        data_dir.join(p)
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ExperimentConfig::parse(&text)
}

pub const TEMPLATE_NAMES: &[&str] = &["minimal", "reference", "plateau", "rate", "tradeoff"];

const MINIMAL: &str = "\
task = quadratic
m = 10
n = 10
policy = zt
K = 100
seed = 1
";

const REFERENCE: &str = "\
# Every key with its default value.

# Task: quadratic | idx | blobs
task = quadratic
m = 10
# quadratic: dimension, data points per device (default 2n), design scale,
# spread of local minimizers, independent design per device
n = 10
rows = 20
design_scale = 1
heterogeneity = 1
per_device_design = false
# idx: file paths relative to data_dir (default $EFHC_DATA_DIR, else .)
# data_dir =
# train_images = train-images-idx3-ubyte
# train_labels = train-labels-idx1-ubyte
# test_images = t10k-images-idx3-ubyte
# test_labels = t10k-labels-idx1-ubyte
# idx and blobs
classes = 10
labels_per_device = 1
l2 = 0.001
# blobs
per_class = 100
features = 20
spread = 0.5
# Gradient oracle: full | minibatch size
batch_size = full

# Topology: rgg | complete | cycle | path; connectivity is an RGG radius
# (connectivity_mode = density reads it as an edge fraction)
topology = rgg
connectivity = 0.4
connectivity_mode = radius
# Schedule: static | cyclic | random (edges kept with subset_p, repaired every b1)
schedule = static
b1 = 1
subset_p = 0.5

# Policies: comma list of efhc, gt, zt, rg
policy = efhc
# Threshold scale (default b_mean * 1e-2) and gossip probability (default 1/m)
r = 50
rg_prob = 0.1
# Step: diminishing (alpha0 / (1 + k/step_gamma)^theta) | constant (alpha)
step = diminishing
alpha0 = 0.1
step_gamma = 1
theta = 0.5
# alpha = 0.01
# Threshold decay: step (follows the step size) | positive constant
threshold_decay = step

K = 1000
# Comma list of Monte Carlo seeds
seed = 1
# Bandwidths b_i ~ U((1 - sigma_n) b_mean, (1 + sigma_n) b_mean)
b_mean = 5000
sigma_n = 0.9

inclusive_trigger = true
# Force a broadcast after b2 - 1 silent iterations
enforce_b2 = false
b2 = 10
count_connection_exchanges = true
# Initial models: shared | per-device, drawn N(0, init_scale^2)
init = shared
init_scale = 1
# Accuracy evaluation period (classification tasks)
eval_every = 10
# Run (policy, seed) pairs on parallel threads
parallel = false
";

const RATE: &str = "\
# Diminishing step 0.1/sqrt(1+k) on a heterogeneous quadratic.
task = quadratic
m = 10
n = 10
rows = 100
design_scale = 3
heterogeneity = 1
batch_size = 1
topology = rgg
connectivity = 0.4
schedule = random
b1 = 5
subset_p = 0.5
policy = efhc
step = diminishing
alpha0 = 0.1
step_gamma = 1
theta = 0.5
K = 20000
seed = 1,2,3,4,5
init = per-device
enforce_b2 = true
b2 = 10
";

const PLATEAU: &str = "\
# Constant step; rerun with alpha halved to compare plateaus.
task = quadratic
m = 10
n = 10
rows = 100
design_scale = 3
heterogeneity = 1
batch_size = 1
topology = rgg
connectivity = 0.4
schedule = random
b1 = 5
policy = efhc
step = constant
alpha = 0.01
K = 50000
seed = 1,2,3
";

const TRADEOFF: &str = "\
# EF-HC against the baselines under heterogeneous bandwidths.
task = quadratic
m = 10
n = 10
heterogeneity = 1
per_device_design = true
topology = rgg
connectivity = 0.4
schedule = static
policy = efhc,gt,zt,rg
r = 5000
K = 5000
seed = 1,2,3,4,5
b_mean = 5000
sigma_n = 0.9
";

/// Built-in config text by name, see [`TEMPLATE_NAMES`].
pub fn template(name: &str) -> Option<&'static str> {
    Some(match name {
        "minimal" => MINIMAL,
        "reference" => REFERENCE,
        "plateau" => PLATEAU,
        "rate" => RATE,
        "tradeoff" => TRADEOFF,
        _ => return None,
    })
}
