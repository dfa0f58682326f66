//! Local objectives, gradient oracles and step-size schedules.
//!
//! Every local objective is a sum over data points, `F_i(w) = Σ_ξ ℓ_ξ(w)`.
//! The stochastic oracle rescales a minibatch mean by the local data count
//! so that it is an unbiased estimate of `∇F_i`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};

/// Model parameter vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelParams(pub Vec<f64>);

impl ModelParams {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl From<Vec<f64>> for ModelParams {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// `F(w) = ½‖A w − b‖²`; each row of `A` is one data point.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticTask {
    rows: usize,
    dim: usize,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl QuadraticTask {
    pub fn new(a_rows: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        let rows = a_rows.len();
        if rows == 0 {
            return Err(Error::invalid("quadratic task needs at least one row"));
        }
        let dim = a_rows[0].len();
        if dim == 0 || a_rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid(
                "quadratic task rows must share a positive width",
            ));
        }
        if b.len() != rows {
            return Err(Error::invalid(format!(
                "target length {} does not match {rows} rows",
                b.len()
            )));
        }
        Ok(Self {
            rows,
            dim,
            a: a_rows.into_iter().flatten().collect(),
            b,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.a[r * self.dim..(r + 1) * self.dim]
    }

    pub fn target(&self) -> &[f64] {
        &self.b
    }

    fn residual(&self, r: usize, w: &[f64]) -> f64 {
        dot(self.row(r), w) - self.b[r]
    }

    /// `AᵀA` as a dense matrix.
    pub fn gram(&self) -> DMatrix<f64> {
        let a = DMatrix::from_row_slice(self.rows, self.dim, &self.a);
        a.transpose() * a
    }

    fn atb(&self) -> DVector<f64> {
        let a = DMatrix::from_row_slice(self.rows, self.dim, &self.a);
        a.transpose() * DVector::from_column_slice(&self.b)
    }
}

/// Multiclass margin loss on a linear model with an L2 term:
/// `Σ_ξ Σ_{c≠y} max(0, 1 + s_c − s_y) + (λ/2)‖w‖²`, scores `s = W x` where
/// `W` is `w` reshaped to `classes × features` (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct HingeTask {
    features: usize,
    classes: usize,
    x: Vec<f64>,
    labels: Vec<usize>,
    l2: f64,
}

/// Strong-convexity regularizer added to the margin loss.
pub const DEFAULT_HINGE_L2: f64 = 1e-3;

impl HingeTask {
    pub fn new(
        features: usize,
        classes: usize,
        x: Vec<f64>,
        labels: Vec<usize>,
        l2: f64,
    ) -> Result<Self> {
        if features == 0 || classes < 2 {
            return Err(Error::invalid(
                "hinge task needs features >= 1 and classes >= 2",
            ));
        }
        if x.len() != features * labels.len() {
            return Err(Error::invalid(format!(
                "feature buffer of length {} does not hold {} samples of width {features}",
                x.len(),
                labels.len()
            )));
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::invalid(format!("label {y} outside [0, {classes})")));
        }
        if !(l2.is_finite() && l2 >= 0.0) {
            return Err(Error::invalid("l2 must be finite and non-negative"));
        }
        Ok(Self {
            features,
            classes,
            x,
            labels,
            l2,
        })
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn samples(&self) -> usize {
        self.labels.len()
    }

    fn sample(&self, s: usize) -> &[f64] {
        &self.x[s * self.features..(s + 1) * self.features]
    }

    fn scores(&self, w: &[f64], s: usize) -> Vec<f64> {
        let x = self.sample(s);
        (0..self.classes)
            .map(|c| dot(&w[c * self.features..(c + 1) * self.features], x))
            .collect()
    }

    fn sample_loss(&self, w: &[f64], s: usize) -> f64 {
        let scores = self.scores(w, s);
        let y = self.labels[s];
        (0..self.classes)
            .filter(|&c| c != y)
            .map(|c| (1.0 + scores[c] - scores[y]).max(0.0))
            .sum()
    }

    /// Adds the margin-loss subgradient of sample `s`, scaled by `scale`.
    /// Ties (margin exactly zero) contribute nothing.
    fn add_sample_grad(&self, w: &[f64], s: usize, scale: f64, out: &mut [f64]) {
        let scores = self.scores(w, s);
        let y = self.labels[s];
        let x = self.sample(s);
        let f = self.features;
        for c in (0..self.classes).filter(|&c| c != y) {
            if 1.0 + scores[c] - scores[y] > 0.0 {
                for (o, xv) in out[c * f..(c + 1) * f].iter_mut().zip(x) {
                    *o += scale * xv;
                }
                for (o, xv) in out[y * f..(y + 1) * f].iter_mut().zip(x) {
                    *o -= scale * xv;
                }
            }
        }
    }

    /// Class with the highest score; ties go to the lowest class id.
    pub fn predict(&self, w: &[f64], s: usize) -> usize {
        let scores = self.scores(w, s);
        let mut best = 0;
        for c in 1..self.classes {
            if scores[c] > scores[best] {
                best = c;
            }
        }
        best
    }

    /// Fraction of this task's samples classified correctly by `w`.
    pub fn accuracy(&self, w: &ModelParams) -> Result<f64> {
        check_dim(self.features * self.classes, w)?;
        if self.samples() == 0 {
            return Ok(0.0);
        }
        let hits = (0..self.samples())
            .filter(|&s| self.predict(&w.0, s) == self.labels[s])
            .count();
        Ok(hits as f64 / self.samples() as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LocalTask {
    Quadratic(QuadraticTask),
    Hinge(HingeTask),
}

impl LocalTask {
    pub fn dim(&self) -> usize {
        match self {
            LocalTask::Quadratic(q) => q.dim,
            LocalTask::Hinge(h) => h.features * h.classes,
        }
    }

    pub fn data_count(&self) -> usize {
        match self {
            LocalTask::Quadratic(q) => q.rows,
            LocalTask::Hinge(h) => h.samples(),
        }
    }

    pub fn as_quadratic(&self) -> Option<&QuadraticTask> {
        match self {
            LocalTask::Quadratic(q) => Some(q),
            LocalTask::Hinge(_) => None,
        }
    }

    pub fn as_hinge(&self) -> Option<&HingeTask> {
        match self {
            LocalTask::Hinge(h) => Some(h),
            LocalTask::Quadratic(_) => None,
        }
    }

    /// Adds `scale·∇ℓ_ξ(w)` for data point `idx` (without the L2 term).
    fn add_point_grad(&self, w: &[f64], idx: usize, scale: f64, out: &mut [f64]) {
        match self {
            LocalTask::Quadratic(q) => {
                let r = scale * q.residual(idx, w);
                for (o, a) in out.iter_mut().zip(q.row(idx)) {
                    *o += r * a;
                }
            }
            LocalTask::Hinge(h) => h.add_sample_grad(w, idx, scale, out),
        }
    }

    fn add_regularizer_grad(&self, w: &[f64], out: &mut [f64]) {
        if let LocalTask::Hinge(h) = self {
            if h.l2 > 0.0 {
                for (o, v) in out.iter_mut().zip(w) {
                    *o += h.l2 * v;
                }
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_dim(expected: usize, w: &ModelParams) -> Result<()> {
    if w.dim() != expected {
        return Err(Error::invalid(format!(
            "parameter dimension {} does not match task dimension {expected}",
            w.dim()
        )));
    }
    Ok(())
}

pub fn local_loss(task: &LocalTask, w: &ModelParams) -> Result<f64> {
    check_dim(task.dim(), w)?;
    Ok(match task {
        LocalTask::Quadratic(q) => {
            0.5 * (0..q.rows)
                .map(|r| q.residual(r, &w.0).powi(2))
                .sum::<f64>()
        }
        LocalTask::Hinge(h) => {
            let data: f64 = (0..h.samples()).map(|s| h.sample_loss(&w.0, s)).sum();
            data + 0.5 * h.l2 * dot(&w.0, &w.0)
        }
    })
}

pub fn local_grad(task: &LocalTask, w: &ModelParams) -> Result<Vec<f64>> {
    check_dim(task.dim(), w)?;
    let mut g = vec![0.0; task.dim()];
    for idx in 0..task.data_count() {
        task.add_point_grad(&w.0, idx, 1.0, &mut g);
    }
    task.add_regularizer_grad(&w.0, &mut g);
    Ok(g)
}

/// `(N/|S|)·Σ_{ξ∈S} ∇ℓ_ξ(w)` over a minibatch `S` drawn uniformly without
/// replacement. A full batch reproduces [`local_grad`] exactly.
pub fn stochastic_grad<R: Rng + ?Sized>(
    task: &LocalTask,
    w: &ModelParams,
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_dim(task.dim(), w)?;
    let count = task.data_count();
    if count == 0 {
        return Err(Error::invalid("stochastic gradient on an empty dataset"));
    }
    if batch_size == 0 || batch_size > count {
        return Err(Error::invalid(format!(
            "batch size {batch_size} outside [1, {count}]"
        )));
    }
    if batch_size == count {
        return local_grad(task, w);
    }
    let scale = count as f64 / batch_size as f64;
    let mut g = vec![0.0; task.dim()];
    for idx in rand::seq::index::sample(rng, count, batch_size) {
        task.add_point_grad(&w.0, idx, scale, &mut g);
    }
    task.add_regularizer_grad(&w.0, &mut g);
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepPolicy {
    Constant {
        alpha: f64,
    },
    /// `α0 / (1 + k/γ)^θ`.
    Diminishing {
        alpha0: f64,
        gamma: f64,
        theta: f64,
    },
}

impl StepPolicy {
    /// The `0.1/√(1+k)` schedule used throughout the image experiments.
    pub const fn default_diminishing() -> Self {
        StepPolicy::Diminishing {
            alpha0: 0.1,
            gamma: 1.0,
            theta: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            StepPolicy::Constant { alpha } => {
                if !(alpha.is_finite() && alpha > 0.0) {
                    return Err(Error::invalid("constant step must be positive"));
                }
            }
            StepPolicy::Diminishing {
                alpha0,
                gamma,
                theta,
            } => {
                if !(alpha0.is_finite() && alpha0 > 0.0 && gamma.is_finite() && gamma > 0.0) {
                    return Err(Error::invalid(
                        "diminishing step needs alpha0 > 0 and gamma > 0",
                    ));
                }
                if !(0.5..=1.0).contains(&theta) {
                    return Err(Error::invalid(format!(
                        "decay exponent {theta} outside [0.5, 1]"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn at(&self, k: usize) -> f64 {
        step_size(self, k)
    }
}

pub fn step_size(policy: &StepPolicy, k: usize) -> f64 {
    match *policy {
        StepPolicy::Constant { alpha } => alpha,
        StepPolicy::Diminishing {
            alpha0,
            gamma,
            theta,
        } => alpha0 / (1.0 + k as f64 / gamma).powf(theta),
    }
}

/// Minimizer of `Σ_i ½‖A_i w − b_i‖²` via a Cholesky solve of the normal
/// equations.
pub fn global_optimum(tasks: &[LocalTask]) -> Result<ModelParams> {
    let first = tasks
        .first()
        .ok_or_else(|| Error::invalid("global optimum of zero tasks"))?;
    let n = first.dim();
    let mut h = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for task in tasks {
        let q = task.as_quadratic().ok_or_else(|| {
            Error::Unsupported("closed-form optimum exists only for quadratic tasks".into())
        })?;
        if q.dim != n {
            return Err(Error::invalid("tasks disagree on parameter dimension"));
        }
        h += q.gram();
        rhs += q.atb();
    }
    let scale = h.diagonal().amax().max(f64::MIN_POSITIVE);
    let chol = h
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NumericFailure("normal equations are singular".into()))?;
    let min_pivot = chol
        .l_dirty()
        .diagonal()
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b));
    if min_pivot * min_pivot <= 1e-13 * scale {
        return Err(Error::NumericFailure(
            "normal equations are numerically singular".into(),
        ));
    }
    Ok(ModelParams(chol.solve(&rhs).iter().copied().collect()))
}

/// Empirical smoothness, strong convexity and heterogeneity constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Constants {
    /// Max over devices and probe pairs of `‖∇F_i(w) − ∇F_i(w')‖ / ‖w − w'‖`.
    pub l: f64,
    /// Min over devices and probe pairs of `⟨∇F_i(w) − ∇F_i(w'), w − w'⟩ / ‖w − w'‖²`.
    pub mu: f64,
    /// Max over devices and probes of `‖∇F_i(w) − ∇F(w)‖`, `F` the device mean.
    pub delta: f64,
    /// `(min, max)` eigenvalue of `A_iᵀA_i` across devices, when all tasks
    /// are quadratic.
    pub curvature: Option<(f64, f64)>,
}

pub fn estimate_constants(tasks: &[LocalTask], probes: &[ModelParams]) -> Result<Constants> {
    if probes.len() < 2 {
        return Err(Error::invalid("need at least two probe points"));
    }
    if tasks.is_empty() {
        return Err(Error::invalid("need at least one task"));
    }
    let grads: Vec<Vec<Vec<f64>>> = tasks
        .iter()
        .map(|t| {
            probes
                .iter()
                .map(|p| local_grad(t, p))
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;

    let mut l: f64 = 0.0;
    let mut mu = f64::INFINITY;
    for per_task in &grads {
        for a in 0..probes.len() {
            for b in a + 1..probes.len() {
                let dw: Vec<f64> = probes[a]
                    .0
                    .iter()
                    .zip(&probes[b].0)
                    .map(|(x, y)| x - y)
                    .collect();
                let dw2 = dot(&dw, &dw);
                if dw2 == 0.0 {
                    continue;
                }
                let dg: Vec<f64> = per_task[a]
                    .iter()
                    .zip(&per_task[b])
                    .map(|(x, y)| x - y)
                    .collect();
                l = l.max((dot(&dg, &dg) / dw2).sqrt());
                mu = mu.min(dot(&dg, &dw) / dw2);
            }
        }
    }
    if !mu.is_finite() {
        return Err(Error::invalid("probe points must be distinct"));
    }

    let m = tasks.len() as f64;
    let mut delta: f64 = 0.0;
    for p in 0..probes.len() {
        let n = grads[0][p].len();
        let mean: Vec<f64> = (0..n)
            .map(|c| grads.iter().map(|g| g[p][c]).sum::<f64>() / m)
            .collect();
        for g in &grads {
            let dev: f64 = g[p].iter().zip(&mean).map(|(x, y)| (x - y).powi(2)).sum();
            delta = delta.max(dev.sqrt());
        }
    }

    let curvature = tasks
        .iter()
        .map(|t| {
            t.as_quadratic().map(|q| {
                let eig = q.gram().symmetric_eigenvalues();
                (eig.min(), eig.max())
            })
        })
        .collect::<Option<Vec<_>>>()
        .map(|v| {
            v.into_iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| {
                    (lo.min(a), hi.max(b))
                })
        });

    Ok(Constants {
        l,
        mu,
        delta,
        curvature,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quad(a: Vec<Vec<f64>>, b: Vec<f64>) -> LocalTask {
        LocalTask::Quadratic(QuadraticTask::new(a, b).unwrap())
    }

    fn eye(n: usize, c: f64) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| (0..n).map(|j| if i == j { c } else { 0.0 }).collect())
            .collect()
    }

    #[test]
    fn quadratic_loss_examples() {
        let t = quad(eye(2, 1.0), vec![0.0, 0.0]);
        assert_eq!(local_loss(&t, &ModelParams::zeros(2)).unwrap(), 0.0);
        let t = quad(eye(2, 1.0), vec![1.0, 1.0]);
        assert_eq!(local_loss(&t, &ModelParams::zeros(2)).unwrap(), 1.0);
        assert_eq!(
            local_grad(&t, &ModelParams::zeros(2)).unwrap(),
            vec![-1.0, -1.0]
        );
        assert_eq!(
            local_grad(&t, &vec![1.0, 1.0].into()).unwrap(),
            vec![0.0, 0.0]
        );
        assert!(local_loss(&t, &ModelParams::zeros(3)).is_err());
    }

    #[test]
    fn hinge_zero_when_margins_satisfied() {
        // Two classes, one feature: w = [-1, 1] scores class 1 at +x.
        let h = HingeTask::new(1, 2, vec![2.0, -2.0], vec![1, 0], 0.0).unwrap();
        let t = LocalTask::Hinge(h.clone());
        let w = ModelParams(vec![-1.0, 1.0]);
        assert_eq!(local_loss(&t, &w).unwrap(), 0.0);
        assert_eq!(local_grad(&t, &w).unwrap(), vec![0.0, 0.0]);
        assert_eq!(h.accuracy(&w).unwrap(), 1.0);
    }

    #[test]
    fn hinge_tie_takes_zero_subgradient() {
        // s_0 − s_1 = -1 exactly, so the margin term sits at its kink.
        let h = HingeTask::new(1, 2, vec![1.0], vec![1], 0.0).unwrap();
        let t = LocalTask::Hinge(h);
        let w = ModelParams(vec![0.0, 1.0]);
        assert_eq!(local_loss(&t, &w).unwrap(), 0.0);
        assert_eq!(local_grad(&t, &w).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn hinge_rejects_bad_labels() {
        assert!(HingeTask::new(2, 3, vec![0.0; 4], vec![0, 3], 0.0).is_err());
    }

    #[test]
    fn full_batch_matches_exact_gradient() {
        let t = quad(
            vec![vec![1.0, 2.0], vec![0.5, -1.0], vec![3.0, 0.0]],
            vec![1.0, 2.0, 3.0],
        );
        let w = ModelParams(vec![0.3, -0.7]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            stochastic_grad(&t, &w, 3, &mut rng).unwrap(),
            local_grad(&t, &w).unwrap()
        );
        assert!(stochastic_grad(&t, &w, 0, &mut rng).is_err());
        assert!(stochastic_grad(&t, &w, 4, &mut rng).is_err());
    }

    #[test]
    fn step_size_examples() {
        let c = StepPolicy::Constant { alpha: 0.01 };
        assert_eq!(step_size(&c, 12345), 0.01);
        let d = StepPolicy::Diminishing {
            alpha0: 0.1,
            gamma: 1.0,
            theta: 0.5,
        };
        assert!((step_size(&d, 3) - 0.05).abs() < 1e-15);
        let d1 = StepPolicy::Diminishing {
            alpha0: 0.1,
            gamma: 1.0,
            theta: 1.0,
        };
        assert!((step_size(&d1, 9) - 0.01).abs() < 1e-15);
        assert!(StepPolicy::Diminishing {
            alpha0: 0.1,
            gamma: 1.0,
            theta: 0.3
        }
        .validate()
        .is_err());
        assert!(StepPolicy::Constant { alpha: -1.0 }.validate().is_err());
    }

    #[test]
    fn optimum_examples() {
        let one = global_optimum(&[quad(eye(3, 1.0), vec![1.0; 3])]).unwrap();
        assert_eq!(one.0, vec![1.0; 3]);
        let two = global_optimum(&[
            quad(eye(3, 1.0), vec![0.0; 3]),
            quad(eye(3, 1.0), vec![2.0; 3]),
        ])
        .unwrap();
        for v in two.0 {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn optimum_errors() {
        let singular = quad(vec![vec![1.0, 0.0]], vec![1.0]);
        assert!(matches!(
            global_optimum(&[singular]),
            Err(Error::NumericFailure(_))
        ));
        let hinge = LocalTask::Hinge(HingeTask::new(1, 2, vec![1.0], vec![0], 0.0).unwrap());
        assert!(matches!(
            global_optimum(&[quad(eye(2, 1.0), vec![0.0; 2]), hinge]),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn constants_for_scaled_identity() {
        let c = 1.7;
        let tasks: Vec<LocalTask> = (0..3).map(|i| quad(eye(4, c), vec![i as f64; 4])).collect();
        let probes = vec![
            ModelParams(vec![0.0, 1.0, 2.0, 3.0]),
            ModelParams(vec![-1.0, 0.5, 0.0, 2.0]),
            ModelParams(vec![3.0, 3.0, -3.0, 0.1]),
        ];
        let k = estimate_constants(&tasks, &probes).unwrap();
        assert!((k.l - c * c).abs() < 1e-9);
        assert!((k.mu - c * c).abs() < 1e-9);
        let (lo, hi) = k.curvature.unwrap();
        assert!((lo - c * c).abs() < 1e-9 && (hi - c * c).abs() < 1e-9);
        assert!(k.delta > 0.0);
        assert!(estimate_constants(&tasks, &probes[..1]).is_err());
    }

    #[test]
    fn identical_tasks_have_zero_heterogeneity() {
        let t = quad(vec![vec![1.0, 2.0], vec![0.0, 1.0]], vec![1.0, -1.0]);
        let tasks = vec![t.clone(), t.clone(), t];
        let probes = vec![ModelParams(vec![0.0, 0.0]), ModelParams(vec![1.0, 5.0])];
        assert_eq!(estimate_constants(&tasks, &probes).unwrap().delta, 0.0);
    }
}
