//! Training loops: background classifier training with penultimate-layer
//! transfer, and Siamese embedding training in the online semi-hard and
//! offline triplet variants.
//!
//! Both loops are single-threaded and deterministic given a seed. Early
//! stopping monitors one-shot validation accuracy supplied by a caller
//! callback, evaluated once per epoch with a fixed patience.

use std::collections::{BTreeMap, BTreeSet};

use crate::data::ClassId;
use crate::error::{Error, Result};
use crate::mining::{
    generate_offline_triplets, online_batch_loss, sample_balanced_batch, triplet_hinge_loss,
    MiningStrategy, TripletLossConfig,
};
use crate::network::{
    backward, forward, softmax_cross_entropy, AdamConfig, AdamState, NetworkParams, NetworkSpec,
};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Accuracy callback used for early stopping; higher is better.
pub type Validator<'a> = dyn FnMut(&NetworkSpec, &NetworkParams) -> Result<f64> + 'a;

#[derive(Clone, Debug)]
pub struct TrainOptions {
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Classes that must not appear in the training labels (the one-shot
    /// test classes). Training refuses to start on leakage.
    pub forbidden_classes: BTreeSet<ClassId>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            adam: AdamConfig::default(),
            batch_size: 200,
            max_epochs: 100,
            patience: 5,
            seed: 0,
            forbidden_classes: BTreeSet::new(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SiameseOptions {
    pub adam: AdamConfig,
    /// Classes per balanced batch (p) and examples per class (k).
    pub classes_per_batch: usize,
    pub examples_per_class: usize,
    pub loss: TripletLossConfig,
    /// Offline variant only: train on every p·k·(p·k − k)·(k − 1) triplet
    /// combination per batch instead of one sampled negative per pair.
    pub offline_exhaustive: bool,
    pub steps_per_epoch: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub forbidden_classes: BTreeSet<ClassId>,
}

impl Default for SiameseOptions {
    fn default() -> Self {
        SiameseOptions {
            adam: AdamConfig::default(),
            classes_per_batch: 8,
            examples_per_class: 4,
            loss: TripletLossConfig::default(),
            offline_exhaustive: false,
            steps_per_epoch: 20,
            max_epochs: 100,
            patience: 5,
            seed: 0,
            forbidden_classes: BTreeSet::new(),
        }
    }
}

/// One line of the training log.
#[derive(Clone, Debug)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub val_accuracy: Option<f64>,
    pub lr: f64,
}

impl EpochRecord {
    /// Line-delimited log rendering: `epoch=3 loss=0.123456 val_oneshot_acc=0.8100 lr=0.000960`.
    pub fn to_log_line(&self) -> String {
        let val = match self.val_accuracy {
            Some(acc) => format!("{acc:.4}"),
            None => "-".into(),
        };
        format!(
            "epoch={} loss={:.6} val_oneshot_acc={} lr={:.6}",
            self.epoch, self.loss, val, self.lr
        )
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: NetworkParams,
    pub log: Vec<EpochRecord>,
    pub best_epoch: usize,
}

fn check_leakage(labels: &[ClassId], forbidden: &BTreeSet<ClassId>) -> Result<()> {
    let offenders: BTreeSet<ClassId> = labels
        .iter()
        .filter(|c| forbidden.contains(c))
        .copied()
        .collect();
    if !offenders.is_empty() {
        return Err(Error::Leakage(format!(
            "training labels contain one-shot classes {:?}",
            offenders
        )));
    }
    Ok(())
}

fn stack_items(items: &[(Tensor, ClassId)], picks: &[usize]) -> Result<Tensor> {
    let tensors: Vec<Tensor> = picks.iter().map(|&i| items[i].0.clone()).collect();
    Tensor::stack(&tensors)
}

/// Early-stopping bookkeeping shared by both loops. Returns true when the
/// loop should stop.
struct EarlyStopper {
    patience: usize,
    best_accuracy: f64,
    best_epoch: usize,
    best_params: Option<NetworkParams>,
    since_best: usize,
}

impl EarlyStopper {
    fn new(patience: usize) -> Self {
        EarlyStopper {
            patience,
            best_accuracy: f64::NEG_INFINITY,
            best_epoch: 0,
            best_params: None,
            since_best: 0,
        }
    }

    fn observe(&mut self, epoch: usize, accuracy: f64, params: &NetworkParams) -> bool {
        if accuracy > self.best_accuracy {
            self.best_accuracy = accuracy;
            self.best_epoch = epoch;
            self.best_params = Some(params.clone());
            self.since_best = 0;
            false
        } else {
            self.since_best += 1;
            self.since_best >= self.patience
        }
    }
}

/// Train a softmax classifier on background data.
///
/// `spec` must end in an affine layer whose width equals the number of
/// distinct training classes; labels are mapped onto [0, C) in sorted class
/// order. The returned parameters are the best-validation snapshot when a
/// validator is given, otherwise the final parameters.
pub fn train_classifier(
    items: &[(Tensor, ClassId)],
    spec: &NetworkSpec,
    opts: &TrainOptions,
    mut validate: Option<&mut Validator>,
) -> Result<TrainOutcome> {
    if items.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    let labels: Vec<ClassId> = items.iter().map(|(_, c)| *c).collect();
    check_leakage(&labels, &opts.forbidden_classes)?;

    let mut class_index: BTreeMap<ClassId, usize> = BTreeMap::new();
    for &c in &labels {
        let next = class_index.len();
        class_index.entry(c).or_insert(next);
    }
    let classes = class_index.len();
    if spec.output_shape() != [classes] {
        return Err(Error::invalid(format!(
            "classifier output {:?} does not match {} training classes",
            spec.output_shape(),
            classes
        )));
    }
    let dense_labels: Vec<usize> = labels.iter().map(|c| class_index[c]).collect();

    let mut params = crate::network::init_params(spec, opts.seed);
    let mut adam = AdamState::new(opts.adam, &params);
    let mut log = Vec::new();
    let mut stopper = EarlyStopper::new(opts.patience.max(1));

    for epoch in 1..=opts.max_epochs {
        let mut order: Vec<usize> = (0..items.len()).collect();
        let mut rng = Rng::stream(opts.seed, &[0x636c_6621, epoch as u64]);
        rng.shuffle(&mut order);

        let mut loss_sum = 0.0;
        for chunk in order.chunks(opts.batch_size.max(1)) {
            let batch = stack_items(items, chunk)?;
            let batch_labels: Vec<usize> = chunk.iter().map(|&i| dense_labels[i]).collect();
            let acts = forward(spec, &params, &batch)?;
            let (loss, logit_grad) = softmax_cross_entropy(acts.output(), &batch_labels)?;
            let (grads, _) = backward(spec, &params, &acts, &logit_grad)?;
            adam.step(&mut params, &grads)?;
            loss_sum += loss * chunk.len() as f64;
        }
        let epoch_loss = loss_sum / items.len() as f64;
        let lr = adam.effective_lr();
        adam.advance_epoch();

        let val = match validate.as_deref_mut() {
            Some(v) => Some(v(spec, &params)?),
            None => None,
        };
        log.push(EpochRecord {
            epoch,
            loss: epoch_loss,
            val_accuracy: val,
            lr,
        });
        if let Some(acc) = val {
            if stopper.observe(epoch, acc, &params) {
                break;
            }
        }
    }

    let best_epoch = if stopper.best_params.is_some() {
        stopper.best_epoch
    } else {
        log.len()
    };
    Ok(TrainOutcome {
        params: stopper.best_params.unwrap_or(params),
        log,
        best_epoch,
    })
}

/// Train a Siamese embedding network with either online semi-hard mining or
/// offline per-batch triplet generation. The embedding must be the final
/// layer (gradients enter the network there).
pub fn train_siamese(
    items: &[(Tensor, ClassId)],
    spec: &NetworkSpec,
    opts: &SiameseOptions,
    mut validate: Option<&mut Validator>,
) -> Result<TrainOutcome> {
    if items.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    if spec.embed_layer() != spec.layers().len() - 1 {
        return Err(Error::invalid(
            "siamese training requires the embedding to be the final layer",
        ));
    }
    opts.loss.validate()?;
    let labels: Vec<ClassId> = items.iter().map(|(_, c)| *c).collect();
    check_leakage(&labels, &opts.forbidden_classes)?;

    let mut params = crate::network::init_params(spec, opts.seed);
    let mut adam = AdamState::new(opts.adam, &params);
    let mut log = Vec::new();
    let mut stopper = EarlyStopper::new(opts.patience.max(1));

    for epoch in 1..=opts.max_epochs {
        let mut loss_sum = 0.0;
        for step in 0..opts.steps_per_epoch.max(1) {
            let mut rng = Rng::stream(opts.seed, &[0x7369_616d, epoch as u64, step as u64]);
            let batch = sample_balanced_batch(
                &labels,
                opts.classes_per_batch,
                opts.examples_per_class,
                &mut rng,
            )?;
            let loss = match opts.loss.strategy {
                MiningStrategy::OnlineSemiHard => {
                    online_step(items, spec, &mut params, &mut adam, &batch, &opts.loss)?
                }
                MiningStrategy::OfflineBatch => {
                    let triplet_seed = rng.next_u64();
                    offline_step(
                        items,
                        spec,
                        &mut params,
                        &mut adam,
                        &batch,
                        &opts.loss,
                        opts.offline_exhaustive,
                        triplet_seed,
                    )?
                }
            };
            loss_sum += loss;
        }
        let epoch_loss = loss_sum / opts.steps_per_epoch.max(1) as f64;
        let lr = adam.effective_lr();
        adam.advance_epoch();

        let val = match validate.as_deref_mut() {
            Some(v) => Some(v(spec, &params)?),
            None => None,
        };
        log.push(EpochRecord {
            epoch,
            loss: epoch_loss,
            val_accuracy: val,
            lr,
        });
        if let Some(acc) = val {
            if stopper.observe(epoch, acc, &params) {
                break;
            }
        }
    }

    let best_epoch = if stopper.best_params.is_some() {
        stopper.best_epoch
    } else {
        log.len()
    };
    Ok(TrainOutcome {
        params: stopper.best_params.unwrap_or(params),
        log,
        best_epoch,
    })
}

fn online_step(
    items: &[(Tensor, ClassId)],
    spec: &NetworkSpec,
    params: &mut NetworkParams,
    adam: &mut AdamState,
    batch: &crate::mining::BalancedBatch,
    loss_cfg: &TripletLossConfig,
) -> Result<f64> {
    let input = stack_items(items, &batch.item_indices)?;
    let acts = forward(spec, params, &input)?;
    let embeddings = acts.embedding(spec);
    let rows: Vec<Vec<f64>> = (0..embeddings.rows())
        .map(|i| embeddings.row(i).to_vec())
        .collect();
    let (loss, grad_rows) = online_batch_loss(&rows, &batch.class_ids, loss_cfg)?;
    let grad = Tensor::from_vec(
        embeddings.shape(),
        grad_rows.into_iter().flatten().collect(),
    )?;
    let (grads, _) = backward(spec, params, &acts, &grad)?;
    adam.step(params, &grads)?;
    Ok(loss)
}

#[allow(clippy::too_many_arguments)]
fn offline_step(
    items: &[(Tensor, ClassId)],
    spec: &NetworkSpec,
    params: &mut NetworkParams,
    adam: &mut AdamState,
    batch: &crate::mining::BalancedBatch,
    loss_cfg: &TripletLossConfig,
    exhaustive: bool,
    triplet_seed: u64,
) -> Result<f64> {
    let triplets = if exhaustive {
        crate::mining::enumerate_all_triplets(&batch.class_ids)
    } else {
        generate_offline_triplets(batch, triplet_seed)?
    };
    let count = triplets.len();
    // Concatenated [anchors | positives | negatives] input; the three
    // segments run through the same shared parameters.
    let mut picks = Vec::with_capacity(3 * count);
    picks.extend(triplets.iter().map(|t| batch.item_indices[t.anchor]));
    picks.extend(triplets.iter().map(|t| batch.item_indices[t.positive]));
    picks.extend(triplets.iter().map(|t| batch.item_indices[t.negative]));
    let input = stack_items(items, &picks)?;
    let acts = forward(spec, params, &input)?;
    let embeddings = acts.embedding(spec);
    let dim = embeddings.row_len();

    let mut loss = 0.0;
    let mut grad = Tensor::zeros(embeddings.shape());
    let scale = 1.0 / count as f64;
    for t in 0..count {
        let (a, p, n) = (t, t + count, t + 2 * count);
        let ea = embeddings.row(a);
        let ep = embeddings.row(p);
        let en = embeddings.row(n);
        let mut d_ap = 0.0;
        let mut d_an = 0.0;
        for i in 0..dim {
            d_ap += (ea[i] - ep[i]) * (ea[i] - ep[i]);
            d_an += (ea[i] - en[i]) * (ea[i] - en[i]);
        }
        let term = triplet_hinge_loss(d_ap, d_an, loss_cfg.margin);
        loss += term * scale;
        if term > 0.0 {
            for i in 0..dim {
                let ap = ea[i] - ep[i];
                let an = ea[i] - en[i];
                grad.row_mut(a)[i] += scale * 2.0 * (ap - an);
                grad.row_mut(p)[i] += scale * -2.0 * ap;
                grad.row_mut(n)[i] += scale * 2.0 * an;
            }
        }
    }
    let (grads, _) = backward(spec, params, &acts, &grad)?;
    adam.step(params, &grads)?;
    Ok(loss)
}
