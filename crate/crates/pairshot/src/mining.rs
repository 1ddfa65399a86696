//! Triplet hinge loss, balanced batch construction, online semi-hard
//! negative selection (single-network variant), and offline per-batch
//! triplet generation (three-network variant).
//!
//! Distances here are squared Euclidean in embedding space, matching the
//! loss definition. The margin is a config field surfaced in every
//! experiment record since no canonical value exists.

use crate::data::ClassId;
use crate::error::{Error, Result};
use crate::metric::{pairwise_squared_euclidean, DistanceMatrix};
use crate::rng::Rng;

/// Default triplet margin for unnormalized embeddings.
pub const DEFAULT_MARGIN: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MiningStrategy {
    /// Single network embeds the whole batch; a semi-hard negative is mined
    /// from the batch pairwise distances for every anchor-positive pair.
    OnlineSemiHard,
    /// Triplets are formed up front with one uniformly sampled negative per
    /// anchor-positive pair; no distance information is used.
    OfflineBatch,
}

#[derive(Clone, Copy, Debug)]
pub struct TripletLossConfig {
    pub margin: f64,
    pub strategy: MiningStrategy,
}

impl Default for TripletLossConfig {
    fn default() -> Self {
        TripletLossConfig {
            margin: DEFAULT_MARGIN,
            strategy: MiningStrategy::OnlineSemiHard,
        }
    }
}

impl TripletLossConfig {
    pub fn validate(&self) -> Result<()> {
        if self.margin.is_nan() || self.margin < 0.0 {
            return Err(Error::invalid("triplet margin must be >= 0"));
        }
        Ok(())
    }
}

/// Balanced batch of p classes with k examples each, referencing items by
/// their dataset index.
#[derive(Clone, Debug)]
pub struct BalancedBatch {
    pub item_indices: Vec<usize>,
    pub class_ids: Vec<ClassId>,
    pub classes_per_batch: usize,
    pub examples_per_class: usize,
}

impl BalancedBatch {
    pub fn len(&self) -> usize {
        self.item_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.item_indices.is_empty()
    }

    fn check_balanced(class_ids: &[ClassId], p: usize, k: usize) -> Result<()> {
        if class_ids.len() != p * k {
            return Err(Error::invalid(format!(
                "batch has {} items, expected p*k = {}",
                class_ids.len(),
                p * k
            )));
        }
        let mut counts = std::collections::BTreeMap::new();
        for &c in class_ids {
            *counts.entry(c).or_insert(0usize) += 1;
        }
        if counts.len() != p || counts.values().any(|&n| n != k) {
            return Err(Error::invalid(format!(
                "batch is not balanced: {} classes with counts {:?}",
                counts.len(),
                counts.values().collect::<Vec<_>>()
            )));
        }
        Ok(())
    }
}

/// Batch-local triplet: anchor and positive share a class, negative differs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
}

/// Number of valid (anchor, positive, negative) combinations in a balanced
/// batch of p classes and k examples per class: p·k·(p·k − k)·(k − 1).
pub fn count_valid_triplets(p: u64, k: u64) -> Result<u64> {
    if p == 0 {
        return Err(Error::invalid("p must be >= 1"));
    }
    if k < 2 {
        return Err(Error::invalid(
            "k must be >= 2 so every anchor has a same-class positive",
        ));
    }
    let pk = p * k;
    Ok(pk * (pk - k) * (k - 1))
}

/// Hinge loss for one triplet: max(0, m + d_ap − d_an).
pub fn triplet_hinge_loss(d_ap: f64, d_an: f64, margin: f64) -> f64 {
    (margin + d_ap - d_an).max(0.0)
}

/// Semi-hard negative for an anchor-positive pair: among negatives farther
/// from the anchor than the positive, the closest one; if none exists, the
/// farthest negative. Ties break toward the lowest index.
pub fn select_semi_hard_negative(
    anchor: usize,
    positive: usize,
    distances: &DistanceMatrix,
    class_ids: &[ClassId],
) -> Result<usize> {
    let d_ap = distances.get(anchor, positive);
    let anchor_class = class_ids[anchor];
    let mut semi_hard: Option<(usize, f64)> = None;
    let mut farthest: Option<(usize, f64)> = None;
    for (j, &class) in class_ids.iter().enumerate() {
        if class == anchor_class {
            continue;
        }
        let d_an = distances.get(anchor, j);
        if d_an > d_ap {
            match semi_hard {
                Some((_, best)) if best <= d_an => {}
                _ => semi_hard = Some((j, d_an)),
            }
        }
        match farthest {
            Some((_, best)) if best >= d_an => {}
            _ => farthest = Some((j, d_an)),
        }
    }
    semi_hard
        .or(farthest)
        .map(|(j, _)| j)
        .ok_or_else(|| Error::invalid("batch contains no negative-class item"))
}

/// All ordered anchor-positive pairs in a balanced batch.
fn anchor_positive_pairs(class_ids: &[ClassId]) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for a in 0..class_ids.len() {
        for p in 0..class_ids.len() {
            if a != p && class_ids[a] == class_ids[p] {
                pairs.push((a, p));
            }
        }
    }
    pairs
}

/// Online semi-hard triplet loss over a batch of embeddings.
///
/// Every ordered anchor-positive pair contributes one hinge term with a
/// mined negative; the result is the mean over pairs together with its
/// gradient with respect to each embedding. The hinge subgradient at the
/// kink is 0 (inactive side), and the mined selection is treated as locally
/// constant.
pub fn online_batch_loss(
    embeddings: &[Vec<f64>],
    class_ids: &[ClassId],
    cfg: &TripletLossConfig,
) -> Result<(f64, Vec<Vec<f64>>)> {
    cfg.validate()?;
    if embeddings.len() != class_ids.len() {
        return Err(Error::invalid(format!(
            "{} embeddings vs {} class ids",
            embeddings.len(),
            class_ids.len()
        )));
    }
    // Balance check: every class present must have the same count >= 2.
    let mut counts = std::collections::BTreeMap::new();
    for &c in class_ids {
        *counts.entry(c).or_insert(0usize) += 1;
    }
    let k = *counts
        .values()
        .next()
        .ok_or_else(|| Error::invalid("empty batch"))?;
    if counts.values().any(|&n| n != k) || k < 2 || counts.len() < 2 {
        return Err(Error::invalid(
            "online triplet loss needs a balanced batch with k >= 2 and p >= 2",
        ));
    }

    let dim = embeddings[0].len();
    let distances = pairwise_squared_euclidean(embeddings)?;
    let pairs = anchor_positive_pairs(class_ids);
    let scale = 1.0 / pairs.len() as f64;

    let mut loss = 0.0;
    let mut grads = vec![vec![0.0; dim]; embeddings.len()];
    for &(a, p) in &pairs {
        let n = select_semi_hard_negative(a, p, &distances, class_ids)?;
        let d_ap = distances.get(a, p);
        let d_an = distances.get(a, n);
        let term = triplet_hinge_loss(d_ap, d_an, cfg.margin);
        loss += term * scale;
        if term > 0.0 {
            // d(d_ap)/d e_a = 2(e_a − e_p), d(d_an)/d e_a = 2(e_a − e_n).
            for i in 0..dim {
                let ap = embeddings[a][i] - embeddings[p][i];
                let an = embeddings[a][i] - embeddings[n][i];
                grads[a][i] += scale * 2.0 * (ap - an);
                grads[p][i] += scale * -2.0 * ap;
                grads[n][i] += scale * 2.0 * an;
            }
        }
    }
    Ok((loss, grads))
}

/// Offline triplet generation: every ordered anchor-positive pair gets one
/// negative sampled uniformly among different-class items. No distance
/// information is consulted; that is the point of the offline variant.
pub fn generate_offline_triplets(batch: &BalancedBatch, seed: u64) -> Result<Vec<Triplet>> {
    BalancedBatch::check_balanced(
        &batch.class_ids,
        batch.classes_per_batch,
        batch.examples_per_class,
    )?;
    if batch.examples_per_class < 2 {
        return Err(Error::invalid("offline triplets need k >= 2"));
    }
    if batch.classes_per_batch < 2 {
        return Err(Error::invalid("offline triplets need p >= 2 (no negatives exist)"));
    }
    let mut rng = Rng::stream(seed, &[0x7472_6970]);
    let mut triplets = Vec::new();
    for (a, p) in anchor_positive_pairs(&batch.class_ids) {
        let negatives: Vec<usize> = batch
            .class_ids
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != batch.class_ids[a])
            .map(|(j, _)| j)
            .collect();
        let negative = negatives[rng.next_below(negatives.len())];
        triplets.push(Triplet {
            anchor: a,
            positive: p,
            negative,
        });
    }
    Ok(triplets)
}

/// Exhaustive enumeration of every valid (anchor, positive, negative)
/// combination in a batch. This is the all-combinations reading of the
/// batch-all count p·k·(p·k − k)·(k − 1).
pub fn enumerate_all_triplets(class_ids: &[ClassId]) -> Vec<Triplet> {
    let mut triplets = Vec::new();
    for (a, p) in anchor_positive_pairs(class_ids) {
        for (n, &c) in class_ids.iter().enumerate() {
            if c != class_ids[a] {
                triplets.push(Triplet {
                    anchor: a,
                    positive: p,
                    negative: n,
                });
            }
        }
    }
    triplets
}

/// Sample a balanced batch of p classes and k examples per class, both
/// without replacement, from items labelled by `class_of`.
pub fn sample_balanced_batch(
    item_classes: &[ClassId],
    p: usize,
    k: usize,
    rng: &mut Rng,
) -> Result<BalancedBatch> {
    if p == 0 || k == 0 {
        return Err(Error::invalid("p and k must be >= 1"));
    }
    let mut by_class: std::collections::BTreeMap<ClassId, Vec<usize>> =
        std::collections::BTreeMap::new();
    for (i, &c) in item_classes.iter().enumerate() {
        by_class.entry(c).or_default().push(i);
    }
    let eligible: Vec<ClassId> = by_class
        .iter()
        .filter(|(_, items)| items.len() >= k)
        .map(|(&c, _)| c)
        .collect();
    if eligible.len() < p {
        return Err(Error::invalid(format!(
            "dataset has {} classes with >= {} items, need {}",
            eligible.len(),
            k,
            p
        )));
    }
    let class_picks = rng.sample_distinct(eligible.len(), p);
    let mut item_indices = Vec::with_capacity(p * k);
    let mut class_ids = Vec::with_capacity(p * k);
    for pick in class_picks {
        let class = eligible[pick];
        let pool = &by_class[&class];
        for item_pick in rng.sample_distinct(pool.len(), k) {
            item_indices.push(pool[item_pick]);
            class_ids.push(class);
        }
    }
    Ok(BalancedBatch {
        item_indices,
        class_ids,
        classes_per_batch: p,
        examples_per_class: k,
    })
}
