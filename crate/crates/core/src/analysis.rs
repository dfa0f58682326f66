//! Post-hoc checks over completed traces: log-log rate fits, plateau
//! estimates, the product/sum bound, and accuracy-versus-time tables.

use std::fmt::Write as _;

use crate::engine::MetricsTrace;
use crate::error::{Error, Result};

pub const MIN_FIT_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Inclusive iteration range `[k_lo, k_hi]`.
    pub window: (usize, usize),
    pub residual_rms: f64,
}

pub const RATE_FIT_HEADER: &str = "k_lo,k_hi,slope,intercept,residual_rms";

impl RateFit {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.window.0, self.window.1, self.slope, self.intercept, self.residual_rms
        )
    }
}

/// Trailing half `[len/2, len − 1]`, starting no earlier than `k = 1`.
pub fn trailing_half(len: usize) -> (usize, usize) {
    ((len / 2).max(1), len.saturating_sub(1))
}

/// Least-squares line through `(ln k, ln v_k)` for `k` in the inclusive window.
/// `values[k]` is the metric at iteration `k`.
pub fn fit_rate(values: &[f64], window: (usize, usize)) -> Result<RateFit> {
    let (lo, hi) = window;
    if lo == 0 {
        return Err(Error::invalid("rate window must start at k ≥ 1"));
    }
    if hi >= values.len() || lo >= hi {
        return Err(Error::invalid(format!(
            "window [{lo}, {hi}] does not fit a trace of length {}",
            values.len()
        )));
    }
    let count = hi - lo + 1;
    if count < MIN_FIT_SAMPLES {
        return Err(Error::invalid(format!(
            "window holds {count} samples, need at least {MIN_FIT_SAMPLES}"
        )));
    }
    let mut xs = Vec::with_capacity(count);
    let mut ys = Vec::with_capacity(count);
    for (k, &v) in values.iter().enumerate().take(hi + 1).skip(lo) {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invalid(format!(
                "value {v} at k={k} is not positive"
            )));
        }
        xs.push((k as f64).ln());
        ys.push(v.ln());
    }
    let nf = count as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(RateFit {
        slope,
        intercept,
        window,
        residual_rms: (rss / nf).sqrt(),
    })
}

/// Median of the final `tail_fraction` of the trace (at least one sample).
pub fn plateau_level(values: &[f64], tail_fraction: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("empty trace"));
    }
    if !(tail_fraction > 0.0 && tail_fraction <= 0.5) {
        return Err(Error::invalid(format!(
            "tail fraction {tail_fraction} outside (0, 0.5]"
        )));
    }
    let take = ((values.len() as f64 * tail_fraction).ceil() as usize).clamp(1, values.len());
    let mut tail = values[values.len() - take..].to_vec();
    if tail.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("trace contains NaN"));
    }
    tail.sort_by(f64::total_cmp);
    let mid = tail.len() / 2;
    Ok(if tail.len() % 2 == 1 {
        tail[mid]
    } else {
        0.5 * (tail[mid - 1] + tail[mid])
    })
}

/// `Π_{r=s}^{k} (1 − ζ_r)^p ≤ 1 / (p·Σ_{r=s}^{k} ζ_r)`.
///
/// Returns `false` for inputs outside the stated domain: some `ζ_r ∉ (0, 1]`,
/// `p < 1`, `s > k`, or `k` past the end of `zeta`.
pub fn bernoulli_bound_check(zeta: &[f64], p: f64, s: usize, k: usize) -> bool {
    if s > k || k >= zeta.len() || p < 1.0 || !p.is_finite() {
        return false;
    }
    let window = &zeta[s..=k];
    if window.iter().any(|&z| !(z > 0.0 && z <= 1.0)) {
        return false;
    }
    let product: f64 = window.iter().map(|z| (1.0 - z).powf(p)).product();
    let sum: f64 = window.iter().sum();
    product <= 1.0 / (p * sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TradeoffMetric {
    /// Lowest optimality gap reached so far.
    OptimalityGap,
    /// Highest mean accuracy reached so far.
    Accuracy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffTable {
    pub metric: TradeoffMetric,
    pub policies: Vec<String>,
    pub grid: Vec<f64>,
    /// `best[p][t]`: best metric of policy `p` within transmission time `grid[t]`.
    pub best: Vec<Vec<Option<f64>>>,
}

impl TradeoffTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time");
        for p in &self.policies {
            out.push(',');
            out.push_str(p);
        }
        out.push('\n');
        for (t, time) in self.grid.iter().enumerate() {
            let _ = write!(out, "{time}");
            for col in &self.best {
                out.push(',');
                if let Some(v) = col[t] {
                    let _ = write!(out, "{v}");
                }
            }
            out.push('\n');
        }
        out
    }

    /// Values at the last grid point, the largest time every policy reached.
    pub fn final_row(&self) -> Vec<Option<f64>> {
        self.best
            .iter()
            .map(|c| c.last().copied().flatten())
            .collect()
    }

    /// Whether `a` is at least as good as `b`.
    pub fn at_least_as_good(&self, a: f64, b: f64) -> bool {
        match self.metric {
            TradeoffMetric::OptimalityGap => a <= b,
            TradeoffMetric::Accuracy => a >= b,
        }
    }
}

/// Best metric versus cumulative transmission time on a shared grid of
/// `points` evenly spaced times in `[0, T]`, where `T` is the smallest final
/// cumulative time across traces. The state `W^(k)` is credited to the time
/// spent before iteration `k`.
pub fn tradeoff_table(
    traces: &[(String, MetricsTrace)],
    metric: TradeoffMetric,
    points: usize,
) -> Result<TradeoffTable> {
    if traces.is_empty() {
        return Err(Error::invalid("no traces supplied"));
    }
    if points < 2 {
        return Err(Error::invalid("time grid needs at least 2 points"));
    }
    if let Some((name, _)) = traces.iter().find(|(_, t)| t.is_empty()) {
        return Err(Error::invalid(format!("trace for `{name}` is empty")));
    }
    let horizon = traces
        .iter()
        .map(|(_, t)| t.rows.last().unwrap().cumulative_time)
        .fold(f64::INFINITY, f64::min);
    let grid: Vec<f64> = (0..points)
        .map(|i| horizon * i as f64 / (points - 1) as f64)
        .collect();

    let best = traces
        .iter()
        .map(|(_, trace)| {
            let mut col = Vec::with_capacity(points);
            let mut row = 0;
            let mut running: Option<f64> = None;
            for &t in &grid {
                while row < trace.rows.len() {
                    let r = &trace.rows[row];
                    let spent = r.cumulative_time - r.transmission_score;
                    if spent > t * (1.0 + 1e-12) {
                        break;
                    }
                    let v = match metric {
                        TradeoffMetric::OptimalityGap => r.optimality_gap,
                        TradeoffMetric::Accuracy => r.mean_accuracy,
                    };
                    if let Some(v) = v {
                        running = Some(match (running, metric) {
                            (None, _) => v,
                            (Some(b), TradeoffMetric::OptimalityGap) => b.min(v),
                            (Some(b), TradeoffMetric::Accuracy) => b.max(v),
                        });
                    }
                    row += 1;
                }
                col.push(running);
            }
            col
        })
        .collect();

    Ok(TradeoffTable {
        metric,
        policies: traces.iter().map(|(n, _)| n.clone()).collect(),
        grid,
        best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::MetricsRow;

    fn power_law(len: usize, exponent: f64) -> Vec<f64> {
        (0..len).map(|k| (k.max(1) as f64).powf(exponent)).collect()
    }

    #[test]
    fn fit_rate_examples() {
        let v = power_law(1000, -0.5);
        let f = fit_rate(&v, trailing_half(v.len())).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-6);
        let v = vec![3.0; 100];
        assert!(fit_rate(&v, (1, 99)).unwrap().slope.abs() < 1e-9);
        let v = power_law(1000, -1.0);
        assert!((fit_rate(&v, (10, 999)).unwrap().slope + 1.0).abs() < 1e-6);
    }

    #[test]
    fn fit_rate_rejects_bad_windows() {
        let v = power_law(100, -1.0);
        assert!(fit_rate(&v, (0, 50)).is_err());
        assert!(fit_rate(&v, (1, 5)).is_err());
        assert!(fit_rate(&v, (50, 100)).is_err());
        let mut v = v;
        v[60] = 0.0;
        assert!(fit_rate(&v, (50, 99)).is_err());
    }

    #[test]
    fn plateau_examples() {
        assert_eq!(plateau_level(&[2.5; 40], 0.25).unwrap(), 2.5);
        let trace: Vec<f64> = (0..2000)
            .map(|k| {
                1.0 + 5.0 * (-(k as f64) / 50.0).exp() + 0.01 * ((k * 7919 % 13) as f64 - 6.0) / 6.0
            })
            .collect();
        assert!((plateau_level(&trace, 0.5).unwrap() - 1.0).abs() <= 0.01);
        assert!(plateau_level(&[1.0], 0.0).is_err());
        assert!(plateau_level(&[], 0.5).is_err());
        assert!(plateau_level(&[1.0], 0.6).is_err());
    }

    #[test]
    fn bernoulli_examples() {
        assert!(bernoulli_bound_check(&[0.5, 0.5], 1.0, 0, 1));
        assert!(bernoulli_bound_check(&[0.3, 1.0, 0.2], 2.5, 0, 2));
        assert!(!bernoulli_bound_check(&[0.5], 0.5, 0, 0));
        assert!(!bernoulli_bound_check(&[0.0], 1.0, 0, 0));
        assert!(!bernoulli_bound_check(&[0.5], 1.0, 1, 0));
    }

    fn trace(gaps: &[f64], score: f64) -> MetricsTrace {
        let mut cum = 0.0;
        MetricsTrace {
            rows: gaps
                .iter()
                .enumerate()
                .map(|(k, &g)| {
                    cum += score;
                    MetricsRow {
                        k,
                        consensus_error: 0.0,
                        optimality_gap: Some(g),
                        broadcasts: 0,
                        transmission_score: score,
                        cumulative_time: cum,
                        mean_accuracy: None,
                        device_accuracy: None,
                    }
                })
                .collect(),
        }
    }

    #[test]
    fn tradeoff_single_and_identical() {
        let t = trace(&[4.0, 3.0, 5.0, 1.0], 1.0);
        let tab =
            tradeoff_table(&[("a".into(), t.clone())], TradeoffMetric::OptimalityGap, 5).unwrap();
        assert_eq!(tab.grid, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(
            tab.best[0],
            vec![Some(4.0), Some(3.0), Some(3.0), Some(1.0), Some(1.0)]
        );
        let tab = tradeoff_table(
            &[("a".into(), t.clone()), ("b".into(), t)],
            TradeoffMetric::OptimalityGap,
            5,
        )
        .unwrap();
        assert_eq!(tab.best[0], tab.best[1]);
        assert!(tab.to_csv().starts_with("time,a,b\n0,4,4\n"));
    }

    #[test]
    fn tradeoff_uses_shared_horizon() {
        let cheap = trace(&[4.0, 2.0, 1.0, 0.5], 0.5);
        let costly = trace(&[4.0, 1.0, 0.5, 0.1], 2.0);
        let tab = tradeoff_table(
            &[("cheap".into(), cheap), ("costly".into(), costly)],
            TradeoffMetric::OptimalityGap,
            3,
        )
        .unwrap();
        assert_eq!(tab.grid, vec![0.0, 1.0, 2.0]);
        assert_eq!(tab.final_row(), vec![Some(0.5), Some(1.0)]);
        assert!(tradeoff_table(&[], TradeoffMetric::Accuracy, 3).is_err());
    }
}
