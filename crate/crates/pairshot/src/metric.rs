//! Vector distance kernels, pairwise-distance matrices, and nearest-neighbor
//! retrieval.
//!
//! Everything evaluation-facing is deterministic: ties break toward the
//! lowest index, and the expansion-form pairwise matrix clamps round-off
//! negatives to zero before anyone can take a square root of them.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

/// Count of cosine evaluations that hit the zero-vector convention. Zero
/// vectors come from zero-padding; they get distance 1 to any nonzero vector
/// and 0 to another zero vector instead of raising an error.
static ZERO_VECTOR_COSINE_EVENTS: AtomicU64 = AtomicU64::new(0);

pub fn zero_vector_cosine_events() -> u64 {
    ZERO_VECTOR_COSINE_EVENTS.load(Ordering::Relaxed)
}

pub fn reset_zero_vector_cosine_events() {
    ZERO_VECTOR_COSINE_EVENTS.store(0, Ordering::Relaxed);
}

fn check_dims(u: &[f64], v: &[f64]) -> Result<()> {
    if u.len() != v.len() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    if u.is_empty() {
        return Err(Error::invalid("vectors must have dimension >= 1"));
    }
    Ok(())
}

/// Cosine distance 1 − u·v/(‖u‖‖v‖), clamped to [0, 2].
pub fn cosine_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    check_dims(u, v)?;
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for i in 0..u.len() {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if nu == 0.0 || nv == 0.0 {
        ZERO_VECTOR_COSINE_EVENTS.fetch_add(1, Ordering::Relaxed);
        return Ok(if nu == 0.0 && nv == 0.0 { 0.0 } else { 1.0 });
    }
    let sim = dot / (nu.sqrt() * nv.sqrt());
    Ok((1.0 - sim).clamp(0.0, 2.0))
}

/// Σ (uᵢ − vᵢ)².
pub fn squared_euclidean(u: &[f64], v: &[f64]) -> Result<f64> {
    check_dims(u, v)?;
    let mut acc = 0.0;
    for i in 0..u.len() {
        let d = u[i] - v[i];
        acc += d * d;
    }
    Ok(acc)
}

/// Dense nonnegative distance matrix with item-index bookkeeping.
#[derive(Clone, Debug)]
pub struct DistanceMatrix {
    values: Vec<f64>,
    rows: usize,
    cols: usize,
    pub row_ids: Vec<usize>,
    pub col_ids: Vec<usize>,
}

impl DistanceMatrix {
    pub fn from_values(values: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::invalid(format!(
                "distance matrix of {} values does not match {}x{}",
                values.len(),
                rows,
                cols
            )));
        }
        Ok(DistanceMatrix {
            values,
            rows,
            cols,
            row_ids: (0..rows).collect(),
            col_ids: (0..cols).collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }
}

/// All-pairs squared Euclidean distances over the rows of a batch, computed
/// via the ‖a‖² + ‖b‖² − 2a·b expansion. Round-off negatives clamp to 0 and
/// the diagonal is forced to exactly 0.
#[allow(clippy::needless_range_loop)]
pub fn pairwise_squared_euclidean(batch: &[Vec<f64>]) -> Result<DistanceMatrix> {
    let n = batch.len();
    if n == 0 {
        return Err(Error::invalid("pairwise distance needs at least one row"));
    }
    let dim = batch[0].len();
    for (i, row) in batch.iter().enumerate() {
        if row.len() != dim {
            return Err(Error::invalid(format!(
                "row {} has dimension {}, expected {}",
                i,
                row.len(),
                dim
            )));
        }
    }
    let norms: Vec<f64> = batch
        .iter()
        .map(|row| row.iter().map(|v| v * v).sum::<f64>())
        .collect();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let mut dot = 0.0;
            for k in 0..dim {
                dot += batch[i][k] * batch[j][k];
            }
            let d = (norms[i] + norms[j] - 2.0 * dot).max(0.0);
            values[i * n + j] = d;
            values[j * n + i] = d;
        }
    }
    DistanceMatrix::from_values(values, n, n)
}

/// Squared Euclidean distances between the rows of two batches (rows of
/// `queries` against rows of `refs`), same expansion and clamping as the
/// self-batch form.
pub fn pairwise_squared_euclidean_between(
    queries: &[Vec<f64>],
    refs: &[Vec<f64>],
) -> Result<DistanceMatrix> {
    if queries.is_empty() || refs.is_empty() {
        return Err(Error::invalid("pairwise distance needs non-empty batches"));
    }
    let dim = queries[0].len();
    for row in queries.iter().chain(refs.iter()) {
        if row.len() != dim {
            return Err(Error::invalid("pairwise batches must share one dimension"));
        }
    }
    let qn: Vec<f64> = queries
        .iter()
        .map(|r| r.iter().map(|v| v * v).sum())
        .collect();
    let rn: Vec<f64> = refs.iter().map(|r| r.iter().map(|v| v * v).sum()).collect();
    let mut values = vec![0.0; queries.len() * refs.len()];
    for (i, q) in queries.iter().enumerate() {
        for (j, r) in refs.iter().enumerate() {
            let mut dot = 0.0;
            for k in 0..dim {
                dot += q[k] * r[k];
            }
            values[i * refs.len() + j] = (qn[i] + rn[j] - 2.0 * dot).max(0.0);
        }
    }
    DistanceMatrix::from_values(values, queries.len(), refs.len())
}

/// Index of the candidate minimizing `dist(query, candidate)`; ties break
/// toward the lowest index.
pub fn nearest_neighbor<T, F>(query: &T, candidates: &[T], mut dist: F) -> Result<usize>
where
    F: FnMut(&T, &T) -> f64,
{
    if candidates.is_empty() {
        return Err(Error::invalid("nearest_neighbor needs candidates"));
    }
    let mut best = 0;
    let mut best_d = dist(query, &candidates[0]);
    for (i, cand) in candidates.iter().enumerate().skip(1) {
        let d = dist(query, cand);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    Ok(best)
}

/// Argmin over a precomputed distance row; ties break toward the lowest index.
pub fn argmin(values: &[f64]) -> Result<usize> {
    if values.is_empty() {
        return Err(Error::invalid("argmin of an empty slice"));
    }
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    Ok(best)
}
