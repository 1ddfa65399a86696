//! Dynamic time warping distance between two feature sequences.
//!
//! This is the direct-matching baseline for the speech modality. Alignment
//! paths run from the first frame pair to the last with steps
//! {(1,0),(0,1),(1,1)} and unit weights; no warping band is applied since
//! inputs are short after canonicalization. The distance is the minimum
//! accumulated local cost; when normalization is enabled it is divided by
//! the number of aligned frame pairs on that optimal path (shortest such
//! path if several are equally cheap).

use crate::data::FeatureSequence;
use crate::error::{Error, Result};
use crate::metric;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocalDistance {
    CosineDistance,
    SquaredEuclidean,
}

#[derive(Clone, Copy, Debug)]
pub struct DtwConfig {
    pub local: LocalDistance,
    pub normalize_by_path_length: bool,
}

impl Default for DtwConfig {
    /// Cosine over frames, path-length normalized: scores comparable across
    /// sequence lengths, matching the cosine choice on the vision side.
    fn default() -> Self {
        DtwConfig {
            local: LocalDistance::CosineDistance,
            normalize_by_path_length: true,
        }
    }
}

/// Local distance between two frames. Cosine uses the zero-vector
/// convention from the metric module (padding frames are all-zero).
pub fn local_frame_distance(u: &[f64], v: &[f64], kind: LocalDistance) -> Result<f64> {
    match kind {
        LocalDistance::CosineDistance => metric::cosine_distance(u, v),
        LocalDistance::SquaredEuclidean => metric::squared_euclidean(u, v),
    }
}

/// DTW distance between two sequences.
pub fn dtw_distance(a: &FeatureSequence, b: &FeatureSequence, cfg: &DtwConfig) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::invalid(format!(
            "frame dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let n = a.num_frames();
    let m = b.num_frames();

    // Each cell holds the cheapest accumulated cost of any path ending at
    // (i, j) plus the fewest aligned pairs among those cheapest paths.
    let mut cost = vec![f64::INFINITY; n * m];
    let mut cells = vec![0usize; n * m];

    for i in 0..n {
        for j in 0..m {
            let local = local_frame_distance(a.frame(i), b.frame(j), cfg.local)?;
            let idx = i * m + j;
            if i == 0 && j == 0 {
                cost[idx] = local;
                cells[idx] = 1;
                continue;
            }
            let mut best_cost = f64::INFINITY;
            let mut best_cells = usize::MAX;
            let mut consider = |c: f64, k: usize| {
                if c < best_cost || (c == best_cost && k < best_cells) {
                    best_cost = c;
                    best_cells = k;
                }
            };
            if i > 0 {
                consider(cost[idx - m], cells[idx - m]);
            }
            if j > 0 {
                consider(cost[idx - 1], cells[idx - 1]);
            }
            if i > 0 && j > 0 {
                consider(cost[idx - m - 1], cells[idx - m - 1]);
            }
            cost[idx] = best_cost + local;
            cells[idx] = best_cells + 1;
        }
    }

    let total = cost[n * m - 1];
    if cfg.normalize_by_path_length {
        Ok(total / cells[n * m - 1] as f64)
    } else {
        Ok(total)
    }
}
