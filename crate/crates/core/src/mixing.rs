//! Doubly-stochastic transition matrices built from broadcast triggers and
//! Metropolis-Hastings degree weights, plus spectral analysis of windowed
//! products.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::topology::{Edge, GraphSnapshot};

/// Per-iteration trigger record. `broadcasts[i]` is device `i`'s broadcast
/// indicator; `connections` holds edges that exchanged parameters because
/// the link newly appeared this iteration.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TriggerVector {
    broadcasts: Vec<bool>,
    connections: BTreeSet<Edge>,
}

impl TriggerVector {
    pub fn none(m: usize) -> Self {
        Self {
            broadcasts: vec![false; m],
            connections: BTreeSet::new(),
        }
    }

    pub fn from_broadcasts(broadcasts: Vec<bool>) -> Self {
        Self {
            broadcasts,
            connections: BTreeSet::new(),
        }
    }

    pub fn with_connections(mut self, connections: impl IntoIterator<Item = Edge>) -> Self {
        self.connections
            .extend(connections.into_iter().map(|(i, j)| (i.min(j), i.max(j))));
        self
    }

    pub fn m(&self) -> usize {
        self.broadcasts.len()
    }

    pub fn broadcasts(&self) -> &[bool] {
        &self.broadcasts
    }

    pub fn connections(&self) -> &BTreeSet<Edge> {
        &self.connections
    }

    pub fn broadcast_count(&self) -> usize {
        self.broadcasts.iter().filter(|&&b| b).count()
    }

    /// `v_ij`: the max of the endpoint broadcast indicators on a physical
    /// edge, or a connection exchange on that edge. Symmetric in `(i, j)`.
    pub fn edge_active(&self, g: &GraphSnapshot, i: usize, j: usize) -> bool {
        g.contains(i, j)
            && (self.broadcasts[i]
                || self.broadcasts[j]
                || self.connections.contains(&(i.min(j), i.max(j))))
    }

    /// All edges of `g` with `v_ij = 1`.
    pub fn active_edges(&self, g: &GraphSnapshot) -> BTreeSet<Edge> {
        g.edges()
            .iter()
            .filter(|&&(i, j)| self.edge_active(g, i, j))
            .copied()
            .collect()
    }
}

/// `min(1/(1+d_i), 1/(1+d_j))`.
pub fn metropolis_weight(d_i: usize, d_j: usize) -> Result<f64> {
    if d_i == 0 || d_j == 0 {
        return Err(Error::invalid(
            "metropolis weight needs both degrees >= 1 (an incident edge exists)",
        ));
    }
    Ok((1.0 / (1 + d_i) as f64).min(1.0 / (1 + d_j) as f64))
}

/// Dense row-major `m × m` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    m: usize,
    data: Vec<f64>,
}

impl TransitionMatrix {
    pub fn identity(m: usize) -> Self {
        let mut data = vec![0.0; m * m];
        for i in 0..m {
            data[i * m + i] = 1.0;
        }
        Self { m, data }
    }

    /// `(1/m)·ones`, the exact-consensus projector.
    pub fn averaging(m: usize) -> Self {
        Self {
            m,
            data: vec![1.0 / m as f64; m * m],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != m) {
            return Err(Error::invalid(format!(
                "matrix is not square: row of length {} in {m} rows",
                r.len()
            )));
        }
        Ok(Self {
            m,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.m + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data
            .chunks(self.m.max(1))
            .map(<[f64]>::to_vec)
            .collect()
    }

    /// `self · rhs`.
    pub fn matmul(&self, rhs: &TransitionMatrix) -> Result<TransitionMatrix> {
        if self.m != rhs.m {
            return Err(Error::invalid(format!(
                "dimension mismatch: {}x{} times {}x{}",
                self.m, self.m, rhs.m, rhs.m
            )));
        }
        let m = self.m;
        let mut data = vec![0.0; m * m];
        for i in 0..m {
            for l in 0..m {
                let a = self.data[i * m + l];
                if a == 0.0 {
                    continue;
                }
                for j in 0..m {
                    data[i * m + j] += a * rhs.data[l * m + j];
                }
            }
        }
        Ok(TransitionMatrix { m, data })
    }

    /// `self · W` for a stack of row vectors (one per device).
    pub fn apply(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if rows.len() != self.m {
            return Err(Error::invalid(format!(
                "expected {} rows, got {}",
                self.m,
                rows.len()
            )));
        }
        let n = rows.first().map_or(0, Vec::len);
        let mut out = vec![vec![0.0; n]; self.m];
        for (i, out_row) in out.iter_mut().enumerate() {
            for (j, src) in rows.iter().enumerate() {
                let p = self.get(i, j);
                if p != 0.0 {
                    for (o, s) in out_row.iter_mut().zip(src) {
                        *o += p * s;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Largest deviation of any row or column sum from 1.
    pub fn stochastic_drift(&self) -> f64 {
        let m = self.m;
        let mut worst: f64 = 0.0;
        for i in 0..m {
            let row: f64 = self.row(i).iter().sum();
            let col: f64 = (0..m).map(|r| self.get(r, i)).sum();
            worst = worst.max((row - 1.0).abs()).max((col - 1.0).abs());
        }
        worst
    }

    /// Debug dump, one row per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.m {
            let cells: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

/// `P^(k)`: off-diagonal `β_ij·v_ij` with Metropolis `β` from the snapshot
/// degrees, diagonal `1 − Σ_j β_ij·v_ij`.
pub fn build_transition(g: &GraphSnapshot, triggers: &TriggerVector) -> TransitionMatrix {
    assert_eq!(
        g.m(),
        triggers.m(),
        "trigger vector and graph disagree on m"
    );
    let m = g.m();
    let degrees = g.degrees();
    let mut p = TransitionMatrix::identity(m);
    for (i, j) in triggers.active_edges(g) {
        // Endpoints of an edge have degree >= 1.
        let beta = metropolis_weight(degrees[i], degrees[j]).expect("edge endpoints have degree");
        p.data[i * m + j] = beta;
        p.data[j * m + i] = beta;
    }
    for i in 0..m {
        let off: f64 = (0..m).filter(|&j| j != i).map(|j| p.data[i * m + j]).sum();
        p.data[i * m + i] = 1.0 - off;
    }
    p
}

/// Rows and columns sum to 1 within `tol`, symmetric within `tol`, and the
/// diagonal is strictly positive.
pub fn validate_stochasticity(p: &TransitionMatrix, tol: f64) -> bool {
    let m = p.m;
    for i in 0..m {
        if p.get(i, i) <= 0.0 {
            return false;
        }
        for j in i + 1..m {
            if (p.get(i, j) - p.get(j, i)).abs() > tol {
                return false;
            }
        }
    }
    p.stochastic_drift() <= tol
}

/// Product of matrices supplied newest first: `[P_k, P_{k-1}, …, P_s]`
/// yields `P_k · P_{k-1} ⋯ P_s`.
pub fn window_product(matrices: &[TransitionMatrix]) -> Result<TransitionMatrix> {
    let (first, rest) = matrices
        .split_first()
        .ok_or_else(|| Error::invalid("window product of an empty sequence"))?;
    rest.iter().try_fold(first.clone(), |acc, p| acc.matmul(p))
}

pub const SPECTRAL_TOL: f64 = 1e-10;
pub const SPECTRAL_MAX_ITERS: usize = 10_000;

/// Spectral norm of `P − (1/m)·ones`, i.e. the contraction factor of `P` on
/// the subspace orthogonal to consensus. Power iteration on `QᵀQ` with
/// `Q = P − J`, stopping once the eigen-residual drops below
/// [`SPECTRAL_TOL`].
pub fn consensus_spectral_norm(p: &TransitionMatrix) -> Result<f64> {
    let m = p.m;
    if m <= 1 {
        return Ok(0.0);
    }
    let inv_m = 1.0 / m as f64;
    let q: Vec<f64> = p.data.iter().map(|v| v - inv_m).collect();

    let mut x: Vec<f64> = (0..m)
        .map(|i| (1.618_033_988_75 * (i as f64 + 1.0)).sin() + 0.25 * (i as f64).cos())
        .collect();
    deflate_and_normalize(&mut x);
    let mut y = vec![0.0; m];
    let mut z = vec![0.0; m];
    for _ in 0..SPECTRAL_MAX_ITERS {
        // y = Q x, z = Qᵀ y
        for i in 0..m {
            y[i] = (0..m).map(|j| q[i * m + j] * x[j]).sum();
        }
        for j in 0..m {
            z[j] = (0..m).map(|i| q[i * m + j] * y[i]).sum();
        }
        let rayleigh: f64 = y.iter().map(|v| v * v).sum();
        let residual = z
            .iter()
            .zip(&x)
            .map(|(zi, xi)| (zi - rayleigh * xi).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual <= SPECTRAL_TOL * rayleigh.max(1.0) {
            return Ok(rayleigh.sqrt());
        }
        x.copy_from_slice(&z);
        if !deflate_and_normalize(&mut x) {
            return Ok(0.0);
        }
    }
    Err(Error::NumericFailure(format!(
        "power iteration did not converge in {SPECTRAL_MAX_ITERS} iterations"
    )))
}

/// Removes the consensus component and scales to unit length. Returns false
/// if nothing is left.
fn deflate_and_normalize(x: &mut [f64]) -> bool {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= mean);
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= f64::MIN_POSITIVE.sqrt() {
        return false;
    }
    x.iter_mut().for_each(|v| *v /= norm);
    true
}
