//! Experiment orchestration: model construction, dataset loading, config
//! files, and the gen-synth / train / eval / report commands behind the CLI.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::data::{ClassId, FeatureSequence, ImageGrid, PairedDataset};
use crate::dtw::{dtw_distance, DtwConfig};
use crate::error::{Error, Result};
use crate::eval::{
    evaluate_per_seed_models, EpisodeConfig, EvalProtocol, EvalReport, OneShotModel, TaskKind,
};
use crate::io::manifest::{
    enforce_disjoint_splits, load_split, DatasetManifest, ManifestClass, ManifestSplit,
    BACKGROUND_FAMILY, ONE_SHOT_FAMILY,
};
use crate::io::{write_feature_archive, write_idx_images, write_idx_labels};
use crate::metric::{cosine_distance, squared_euclidean};
use crate::mining::{MiningStrategy, TripletLossConfig};
use crate::network::{
    embed, load_checkpoint, save_checkpoint, small_classifier, small_cnn_embedder, small_embedder,
    with_classifier_head, AdamConfig, NetworkParams, NetworkSpec,
};
use crate::synth::{generate_synthetic_pairs, Split, SyntheticConfig, SyntheticDataset};
use crate::tensor::Tensor;
use crate::train::{train_classifier, train_siamese, SiameseOptions, TrainOptions, Validator};

pub const DATA_DIR_ENV: &str = "PAIRSHOT_DATA_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    DtwPixels,
    FfnnClassifier,
    CnnClassifier,
    SiameseOffline,
    SiameseOnline,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::DtwPixels => "dtw-pixels",
            ModelKind::FfnnClassifier => "ffnn-classifier",
            ModelKind::CnnClassifier => "cnn-classifier",
            ModelKind::SiameseOffline => "siamese-offline",
            ModelKind::SiameseOnline => "siamese-online",
        }
    }

    pub fn parse(text: &str) -> Result<ModelKind> {
        match text {
            "dtw-pixels" => Ok(ModelKind::DtwPixels),
            "ffnn-classifier" => Ok(ModelKind::FfnnClassifier),
            "cnn-classifier" => Ok(ModelKind::CnnClassifier),
            "siamese-offline" => Ok(ModelKind::SiameseOffline),
            "siamese-online" => Ok(ModelKind::SiameseOnline),
            other => Err(Error::Config(format!("unknown model '{other}'"))),
        }
    }

    pub fn is_neural(&self) -> bool {
        !matches!(self, ModelKind::DtwPixels)
    }
}

/// Fully resolved experiment description. Field defaults follow the
/// benchmark protocol; the config file and CLI flags override them.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub task: TaskKind,
    pub model: ModelKind,
    pub ways: usize,
    pub shots: usize,
    pub matching_size: usize,
    pub episodes: usize,
    pub queries: usize,
    pub seeds: usize,
    pub margin: f64,
    /// Balanced-batch shape for Siamese training.
    pub classes_per_batch: usize,
    pub examples_per_class: usize,
    pub base_lr: f64,
    pub lr_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub steps_per_epoch: usize,
    /// Small-preset layer sizes.
    pub hidden_units: usize,
    pub embed_dim: usize,
    /// L2-normalize embeddings before distance computation.
    pub l2_normalize: bool,
    /// Canonical frame count; None takes the dataset's nominal value.
    pub frames: Option<usize>,
    pub seed: u64,
    pub threads: usize,
    /// Measure and emit wall time in the CSV. Off by default so re-running a
    /// command reproduces the report byte for byte.
    pub timing: bool,
    pub data_dir: Option<PathBuf>,
    pub synth: SyntheticConfig,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            task: TaskKind::CrossModal,
            model: ModelKind::DtwPixels,
            ways: 11,
            shots: 1,
            matching_size: 10,
            episodes: 400,
            queries: 10,
            seeds: 10,
            margin: crate::mining::DEFAULT_MARGIN,
            classes_per_batch: 8,
            examples_per_class: 4,
            base_lr: 1e-3,
            lr_decay: 0.96,
            epochs: 100,
            batch_size: 200,
            steps_per_epoch: 20,
            hidden_units: 64,
            embed_dim: 32,
            l2_normalize: false,
            frames: None,
            seed: 0,
            threads: 1,
            timing: false,
            data_dir: None,
            synth: SyntheticConfig::default(),
            out_dir: PathBuf::from("."),
        }
    }
}

impl ExperimentConfig {
    /// Parse the key/value config file format (sections [experiment] and
    /// [synthetic]) over the current values.
    pub fn apply_file(&mut self, text: &str) -> Result<()> {
        let mut section = String::from("experiment");
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("config line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            match section.as_str() {
                "experiment" => self.apply_experiment_key(key, value)?,
                "synthetic" => self.apply_synth_key(key, value)?,
                other => {
                    return Err(Error::Config(format!("unknown config section '{other}'")))
                }
            }
        }
        Ok(())
    }

    fn apply_experiment_key(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "task" => self.task = TaskKind::parse(value)?,
            "model" => self.model = ModelKind::parse(value)?,
            "ways" => self.ways = parse_num(key, value)?,
            "shots" => self.shots = parse_num(key, value)?,
            "matching" => self.matching_size = parse_num(key, value)?,
            "episodes" => self.episodes = parse_num(key, value)?,
            "queries" => self.queries = parse_num(key, value)?,
            "seeds" => self.seeds = parse_num(key, value)?,
            "margin" => self.margin = parse_float(key, value)?,
            "p" => self.classes_per_batch = parse_num(key, value)?,
            "k" => self.examples_per_class = parse_num(key, value)?,
            "lr" => self.base_lr = parse_float(key, value)?,
            "decay" => self.lr_decay = parse_float(key, value)?,
            "epochs" => self.epochs = parse_num(key, value)?,
            "batch-size" => self.batch_size = parse_num(key, value)?,
            "steps-per-epoch" => self.steps_per_epoch = parse_num(key, value)?,
            "hidden" => self.hidden_units = parse_num(key, value)?,
            "embed-dim" => self.embed_dim = parse_num(key, value)?,
            "l2-normalize" => self.l2_normalize = parse_bool(key, value)?,
            "frames" => self.frames = Some(parse_num(key, value)?),
            "seed" => self.seed = parse_num::<u64>(key, value)?,
            "threads" => self.threads = parse_num(key, value)?,
            "timing" => self.timing = parse_bool(key, value)?,
            "data" => self.data_dir = Some(PathBuf::from(value)),
            "out" => self.out_dir = PathBuf::from(value),
            other => return Err(Error::Config(format!("unknown experiment key '{other}'"))),
        }
        Ok(())
    }

    fn apply_synth_key(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "classes" => self.synth.background_classes = parse_num(key, value)?,
            "speakers" => self.synth.speakers = parse_num(key, value)?,
            "examples-per-class" => self.synth.examples_per_class = parse_num(key, value)?,
            "dim" => self.synth.feature_dim = parse_num(key, value)?,
            "frames" => self.synth.frames = parse_num(key, value)?,
            "height" => self.synth.image_height = parse_num(key, value)?,
            "width" => self.synth.image_width = parse_num(key, value)?,
            "sigma" => self.synth.noise_sigma = parse_float(key, value)?,
            "tau" => self.synth.speaker_offset_tau = parse_float(key, value)?,
            "seed" => self.synth.seed = parse_num::<u64>(key, value)?,
            other => return Err(Error::Config(format!("unknown synthetic key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.ways == 0
            || self.shots == 0
            || self.matching_size == 0
            || self.episodes == 0
            || self.queries == 0
            || self.seeds == 0
        {
            return Err(Error::Config("episode and protocol counts must be >= 1".into()));
        }
        if self.margin.is_nan() || self.margin < 0.0 {
            return Err(Error::Config("margin must be >= 0".into()));
        }
        if self.task == TaskKind::SpeakerInvariance && self.shots != 1 {
            return Err(Error::Config(
                "speaker-invariance episodes are one-shot only".into(),
            ));
        }
        Ok(())
    }

    /// Canonical one-line-per-key snapshot embedded in every report.
    /// Execution knobs that cannot change results (thread count, timing)
    /// stay out so reruns reproduce reports byte for byte.
    pub fn snapshot(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "task={} model={} ways={} shots={} matching={} episodes={} queries={} seeds={} \
             margin={} p={} k={} lr={} decay={} epochs={} batch-size={} steps-per-epoch={} \
             hidden={} embed-dim={} frames={} seed={} data={} synth-classes={} \
             synth-speakers={} synth-examples={} synth-dim={} synth-frames={} synth-size={}x{} \
             sigma={} tau={} synth-seed={}",
            self.task.as_str(),
            self.model.as_str(),
            self.ways,
            self.shots,
            self.matching_size,
            self.episodes,
            self.queries,
            self.seeds,
            self.margin,
            self.classes_per_batch,
            self.examples_per_class,
            self.base_lr,
            self.lr_decay,
            self.epochs,
            self.batch_size,
            self.steps_per_epoch,
            self.hidden_units,
            self.embed_dim,
            self.frames.map(|f| f.to_string()).unwrap_or_else(|| "auto".into()),
            self.seed,
            self.data_dir
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_else(|| "synthetic".into()),
            self.synth.background_classes,
            self.synth.speakers,
            self.synth.examples_per_class,
            self.synth.feature_dim,
            self.synth.frames,
            self.synth.image_height,
            self.synth.image_width,
            self.synth.noise_sigma,
            self.synth.speaker_offset_tau,
            self.synth.seed,
        );
        s
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value '{value}' for {key}")))
}

fn parse_float(key: &str, value: &str) -> Result<f64> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value '{value}' for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("bad value '{value}' for {key}"))),
    }
}

/// Canonicalized splits ready for training and evaluation.
#[derive(Clone, Debug)]
pub struct LoadedData {
    pub background_train: PairedDataset,
    pub background_validation: PairedDataset,
    pub one_shot_test: PairedDataset,
    pub frames: usize,
    pub feature_dim: usize,
    pub image_height: usize,
    pub image_width: usize,
    pub one_shot_classes: BTreeSet<ClassId>,
}

/// Load from a manifest directory when configured, otherwise generate the
/// synthetic corpus in memory. Audio is canonicalized to the target frame
/// count here so every consumer sees fixed-length sequences.
pub fn load_data(cfg: &ExperimentConfig) -> Result<LoadedData> {
    let (train, val, test, nominal_frames) = match &cfg.data_dir {
        Some(dir) => {
            let manifest = DatasetManifest::load(&dir.join("manifest.txt"))?;
            enforce_disjoint_splits(&manifest)?;
            (
                load_split(dir, &manifest, "background-train")?,
                load_split(dir, &manifest, "background-validation")?,
                load_split(dir, &manifest, "one-shot-test")?,
                manifest.frames,
            )
        }
        None => {
            let synth = generate_synthetic_pairs(&cfg.synth)?;
            let frames = synth.config.frames;
            (
                synth.background_train,
                synth.background_validation,
                synth.one_shot_test,
                frames,
            )
        }
    };
    let frames = cfg.frames.unwrap_or(nominal_frames);
    let first = test
        .pairs
        .first()
        .ok_or_else(|| Error::invalid("one-shot split is empty"))?;
    let feature_dim = first.audio.dim();
    let image_height = first.image.height();
    let image_width = first.image.width();
    let one_shot_classes: BTreeSet<ClassId> = test.spoken_classes().into_iter().collect();
    Ok(LoadedData {
        background_train: train.canonicalized(frames)?,
        background_validation: val.canonicalized(frames)?,
        one_shot_test: test.canonicalized(frames)?,
        frames,
        feature_dim,
        image_height,
        image_width,
        one_shot_classes,
    })
}

/// Frame-major flattening for rank-1 network inputs, or a [1, dim, frames]
/// arrangement (feature axis as height, time as width) for convolutions.
pub fn sequence_tensor(seq: &FeatureSequence, input_shape: &[usize]) -> Result<Tensor> {
    match input_shape {
        [flat] => {
            if seq.num_frames() * seq.dim() != *flat {
                return Err(Error::invalid(format!(
                    "sequence {}x{} does not flatten to {flat}",
                    seq.num_frames(),
                    seq.dim()
                )));
            }
            Tensor::from_vec(input_shape, seq.flattened())
        }
        [1, dim, frames] => {
            if seq.dim() != *dim || seq.num_frames() != *frames {
                return Err(Error::invalid(format!(
                    "sequence {}x{} does not match input {dim}x{frames}",
                    seq.num_frames(),
                    seq.dim()
                )));
            }
            let mut data = vec![0.0; dim * frames];
            for t in 0..*frames {
                let frame = seq.frame(t);
                for i in 0..*dim {
                    data[i * frames + t] = frame[i];
                }
            }
            Tensor::from_vec(input_shape, data)
        }
        other => Err(Error::invalid(format!(
            "unsupported speech input shape {other:?}"
        ))),
    }
}

pub fn image_tensor(img: &ImageGrid, input_shape: &[usize]) -> Result<Tensor> {
    match input_shape {
        [flat] => {
            if img.pixels().len() != *flat {
                return Err(Error::invalid(format!(
                    "image {}x{} does not flatten to {flat}",
                    img.height(),
                    img.width()
                )));
            }
            Tensor::from_vec(input_shape, img.pixels().to_vec())
        }
        [1, h, w] => {
            if img.height() != *h || img.width() != *w {
                return Err(Error::invalid(format!(
                    "image {}x{} does not match input {h}x{w}",
                    img.height(),
                    img.width()
                )));
            }
            Tensor::from_vec(input_shape, img.pixels().to_vec())
        }
        other => Err(Error::invalid(format!(
            "unsupported image input shape {other:?}"
        ))),
    }
}

/// Direct-feature baseline: DTW over speech, cosine over raw pixels.
#[derive(Default)]
pub struct DtwPixelsModel {
    pub dtw: DtwConfig,
}

impl OneShotModel for DtwPixelsModel {
    fn name(&self) -> String {
        ModelKind::DtwPixels.as_str().into()
    }

    fn speech_distances(
        &self,
        queries: &[&FeatureSequence],
        refs: &[&FeatureSequence],
    ) -> Result<Vec<Vec<f64>>> {
        queries
            .iter()
            .map(|q| refs.iter().map(|r| dtw_distance(q, r, &self.dtw)).collect())
            .collect()
    }

    fn image_distances(
        &self,
        queries: &[&ImageGrid],
        refs: &[&ImageGrid],
    ) -> Result<Vec<Vec<f64>>> {
        queries
            .iter()
            .map(|q| {
                refs.iter()
                    .map(|r| cosine_distance(q.pixels(), r.pixels()))
                    .collect()
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbeddingMetric {
    Cosine,
    SquaredEuclidean,
}

#[derive(Clone, Debug)]
pub struct TrainedNet {
    pub spec: NetworkSpec,
    pub params: NetworkParams,
}

impl TrainedNet {
    fn embed_rows(&self, items: &[Tensor]) -> Result<Vec<Vec<f64>>> {
        let batch = Tensor::stack(items)?;
        let embeddings = embed(&self.spec, &self.params, &batch)?;
        Ok((0..embeddings.rows())
            .map(|i| embeddings.row(i).to_vec())
            .collect())
    }
}

/// Trained embedding model: one network per modality plus the matching
/// distance (cosine for classifier transfer, squared Euclidean for Siamese
/// embeddings). Embeddings are compared unnormalized by default, matching
/// the plain squared Euclidean of the training loss; `l2_normalize` scales
/// each vector to unit length first.
pub struct EmbeddingModel {
    pub kind: ModelKind,
    pub speech: TrainedNet,
    pub vision: TrainedNet,
    pub metric: EmbeddingMetric,
    pub l2_normalize: bool,
}

impl EmbeddingModel {
    fn distance_matrix(
        &self,
        queries: &[Vec<f64>],
        refs: &[Vec<f64>],
    ) -> Result<Vec<Vec<f64>>> {
        let normalize = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
            rows.iter()
                .map(|r| {
                    let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if norm > 0.0 {
                        r.iter().map(|v| v / norm).collect()
                    } else {
                        r.clone()
                    }
                })
                .collect()
        };
        let (q_owned, r_owned);
        let (queries, refs) = if self.l2_normalize {
            q_owned = normalize(queries);
            r_owned = normalize(refs);
            (&q_owned[..], &r_owned[..])
        } else {
            (queries, refs)
        };
        match self.metric {
            EmbeddingMetric::SquaredEuclidean => {
                let m = crate::metric::pairwise_squared_euclidean_between(queries, refs)?;
                Ok((0..m.rows()).map(|i| m.row(i).to_vec()).collect())
            }
            EmbeddingMetric::Cosine => queries
                .iter()
                .map(|q| refs.iter().map(|r| cosine_distance(q, r)).collect())
                .collect(),
        }
    }
}

impl OneShotModel for EmbeddingModel {
    fn name(&self) -> String {
        self.kind.as_str().into()
    }

    fn speech_distances(
        &self,
        queries: &[&FeatureSequence],
        refs: &[&FeatureSequence],
    ) -> Result<Vec<Vec<f64>>> {
        let input_shape = self.speech.spec.input_shape().to_vec();
        let to_tensor = |items: &[&FeatureSequence]| -> Result<Vec<Tensor>> {
            items.iter().map(|s| sequence_tensor(s, &input_shape)).collect()
        };
        let q = self.speech.embed_rows(&to_tensor(queries)?)?;
        let r = self.speech.embed_rows(&to_tensor(refs)?)?;
        self.distance_matrix(&q, &r)
    }

    fn image_distances(
        &self,
        queries: &[&ImageGrid],
        refs: &[&ImageGrid],
    ) -> Result<Vec<Vec<f64>>> {
        let input_shape = self.vision.spec.input_shape().to_vec();
        let to_tensor = |items: &[&ImageGrid]| -> Result<Vec<Tensor>> {
            items.iter().map(|img| image_tensor(img, &input_shape)).collect()
        };
        let q = self.vision.embed_rows(&to_tensor(queries)?)?;
        let r = self.vision.embed_rows(&to_tensor(refs)?)?;
        self.distance_matrix(&q, &r)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Modality {
    Speech,
    Vision,
}

fn modality_items(
    data: &PairedDataset,
    modality: Modality,
    input_shape: &[usize],
) -> Result<Vec<(Tensor, ClassId)>> {
    data.pairs
        .iter()
        .map(|pair| match modality {
            Modality::Speech => Ok((
                sequence_tensor(&pair.audio, input_shape)?,
                pair.spoken_class(),
            )),
            Modality::Vision => Ok((image_tensor(&pair.image, input_shape)?, pair.image_class())),
        })
        .collect()
}

/// One-shot validation accuracy on the background-validation split, used
/// for early stopping. Ways shrink to the available class count and the
/// query-speaker constraint is relaxed (validation splits are small).
fn validation_accuracy(
    spec: &NetworkSpec,
    params: &NetworkParams,
    data: &PairedDataset,
    modality: Modality,
    metric: EmbeddingMetric,
    seed: u64,
) -> Result<f64> {
    let classes = data.spoken_classes();
    let ways = classes.len().min(11);
    let episode_cfg = EpisodeConfig {
        ways,
        shots: 1,
        matching_size: 1,
        queries: 10,
        disjoint_query_speaker: false,
    };
    let episodes = 40;
    let mut correct = 0;
    let mut total = 0;
    for e in 0..episodes {
        let episode_seed = crate::rng::Rng::stream(seed, &[0x7661_6c64, e]).next_u64();
        let episode = crate::eval::sample_episode(data, &episode_cfg, episode_seed)?;
        let (support_items, support_classes): (Vec<Tensor>, Vec<ClassId>) = {
            let mut items = Vec::new();
            let mut classes = Vec::new();
            for pair in episode.support.pairs() {
                match modality {
                    Modality::Speech => {
                        items.push(sequence_tensor(&pair.audio, spec.input_shape())?);
                        classes.push(pair.spoken_class());
                    }
                    Modality::Vision => {
                        items.push(image_tensor(&pair.image, spec.input_shape())?);
                        classes.push(pair.image_class());
                    }
                }
            }
            (items, classes)
        };
        let mut query_items = Vec::new();
        let mut query_classes = Vec::new();
        for &q in &episode.query_indices {
            let pair = &data.pairs[q];
            match modality {
                Modality::Speech => {
                    query_items.push(sequence_tensor(&pair.audio, spec.input_shape())?);
                    query_classes.push(pair.spoken_class());
                }
                Modality::Vision => {
                    query_items.push(image_tensor(&pair.image, spec.input_shape())?);
                    query_classes.push(pair.image_class());
                }
            }
        }
        let support_emb = {
            let batch = Tensor::stack(&support_items)?;
            embed(spec, params, &batch)?
        };
        let query_emb = {
            let batch = Tensor::stack(&query_items)?;
            embed(spec, params, &batch)?
        };
        for (qi, qc) in query_classes.iter().enumerate() {
            let distances: Vec<f64> = (0..support_emb.rows())
                .map(|si| match metric {
                    EmbeddingMetric::Cosine => {
                        cosine_distance(query_emb.row(qi), support_emb.row(si)).unwrap_or(2.0)
                    }
                    EmbeddingMetric::SquaredEuclidean => {
                        squared_euclidean(query_emb.row(qi), support_emb.row(si)).unwrap_or(f64::MAX)
                    }
                })
                .collect();
            let predicted = support_classes[crate::metric::argmin(&distances)?];
            if predicted == *qc {
                correct += 1;
            }
            total += 1;
        }
    }
    Ok(correct as f64 / total as f64)
}

fn speech_spec(cfg: &ExperimentConfig, data: &LoadedData) -> Result<NetworkSpec> {
    let classes = data.background_train.spoken_classes().len();
    match cfg.model {
        ModelKind::FfnnClassifier => {
            small_classifier(data.feature_dim * data.frames, cfg.hidden_units, classes)
        }
        ModelKind::CnnClassifier => {
            let base = small_cnn_embedder(
                [1, data.feature_dim, data.frames],
                8,
                cfg.hidden_units,
                cfg.embed_dim,
            )?;
            with_classifier_head(&base, classes)
        }
        ModelKind::SiameseOffline | ModelKind::SiameseOnline => {
            small_embedder(data.feature_dim * data.frames, cfg.hidden_units, cfg.embed_dim)
        }
        ModelKind::DtwPixels => Err(Error::invalid("dtw-pixels has no network")),
    }
}

fn vision_spec(cfg: &ExperimentConfig, data: &LoadedData) -> Result<NetworkSpec> {
    let classes = data
        .background_train
        .pairs
        .iter()
        .map(|p| p.image_class())
        .collect::<BTreeSet<_>>()
        .len();
    let flat = data.image_height * data.image_width;
    match cfg.model {
        ModelKind::FfnnClassifier => small_classifier(flat, cfg.hidden_units, classes),
        ModelKind::CnnClassifier => {
            let base = small_cnn_embedder(
                [1, data.image_height, data.image_width],
                8,
                cfg.hidden_units,
                cfg.embed_dim,
            )?;
            with_classifier_head(&base, classes)
        }
        ModelKind::SiameseOffline | ModelKind::SiameseOnline => {
            small_embedder(flat, cfg.hidden_units, cfg.embed_dim)
        }
        ModelKind::DtwPixels => Err(Error::invalid("dtw-pixels has no network")),
    }
}

/// Train the configured model's speech and vision networks on the
/// background-train split, early-stopped on background-validation one-shot
/// accuracy.
pub fn train_embedding_model(
    cfg: &ExperimentConfig,
    data: &LoadedData,
    seed: u64,
) -> Result<(EmbeddingModel, Vec<crate::train::EpochRecord>, Vec<crate::train::EpochRecord>)> {
    if !cfg.model.is_neural() {
        return Err(Error::Config("dtw-pixels does not train".into()));
    }
    let metric = match cfg.model {
        ModelKind::FfnnClassifier | ModelKind::CnnClassifier => EmbeddingMetric::Cosine,
        _ => EmbeddingMetric::SquaredEuclidean,
    };

    let mut nets = Vec::with_capacity(2);
    let mut logs = Vec::with_capacity(2);
    for modality in [Modality::Speech, Modality::Vision] {
        let spec = match modality {
            Modality::Speech => speech_spec(cfg, data)?,
            Modality::Vision => vision_spec(cfg, data)?,
        };
        let items = modality_items(&data.background_train, modality, spec.input_shape())?;
        let val_split = data.background_validation.clone();
        let mut validator = move |s: &NetworkSpec, p: &NetworkParams| -> Result<f64> {
            validation_accuracy(s, p, &val_split, modality, metric, 0x76a1)
        };
        let validator: Option<&mut Validator> = Some(&mut validator);

        let outcome = match cfg.model {
            ModelKind::FfnnClassifier | ModelKind::CnnClassifier => {
                let opts = TrainOptions {
                    adam: AdamConfig {
                        base_lr: cfg.base_lr,
                        decay: cfg.lr_decay,
                        ..AdamConfig::default()
                    },
                    batch_size: cfg.batch_size,
                    max_epochs: cfg.epochs,
                    seed,
                    forbidden_classes: data.one_shot_classes.clone(),
                    ..TrainOptions::default()
                };
                train_classifier(&items, &spec, &opts, validator)?
            }
            ModelKind::SiameseOffline | ModelKind::SiameseOnline => {
                let strategy = if cfg.model == ModelKind::SiameseOnline {
                    MiningStrategy::OnlineSemiHard
                } else {
                    MiningStrategy::OfflineBatch
                };
                let opts = SiameseOptions {
                    adam: AdamConfig {
                        base_lr: cfg.base_lr,
                        decay: cfg.lr_decay,
                        ..AdamConfig::default()
                    },
                    classes_per_batch: cfg.classes_per_batch,
                    examples_per_class: cfg.examples_per_class,
                    loss: TripletLossConfig {
                        margin: cfg.margin,
                        strategy,
                    },
                    steps_per_epoch: cfg.steps_per_epoch,
                    max_epochs: cfg.epochs,
                    seed,
                    forbidden_classes: data.one_shot_classes.clone(),
                    ..SiameseOptions::default()
                };
                train_siamese(&items, &spec, &opts, validator)?
            }
            ModelKind::DtwPixels => unreachable!(),
        };
        nets.push(TrainedNet {
            spec,
            params: outcome.params,
        });
        logs.push(outcome.log);
    }
    let vision = nets.pop().unwrap();
    let speech = nets.pop().unwrap();
    let vision_log = logs.pop().unwrap();
    let speech_log = logs.pop().unwrap();
    Ok((
        EmbeddingModel {
            kind: cfg.model,
            speech,
            vision,
            metric,
            l2_normalize: cfg.l2_normalize,
        },
        speech_log,
        vision_log,
    ))
}

/// Untrained model with seeded random weights (chance-level calibration).
pub fn random_embedding_model(
    cfg: &ExperimentConfig,
    data: &LoadedData,
    seed: u64,
) -> Result<EmbeddingModel> {
    let speech = speech_spec(cfg, data)?;
    let vision = vision_spec(cfg, data)?;
    Ok(EmbeddingModel {
        kind: cfg.model,
        speech: TrainedNet {
            params: crate::network::init_params(&speech, seed),
            spec: speech,
        },
        vision: TrainedNet {
            params: crate::network::init_params(&vision, seed ^ 0x9e37_79b9),
            spec: vision,
        },
        metric: match cfg.model {
            ModelKind::FfnnClassifier | ModelKind::CnnClassifier => EmbeddingMetric::Cosine,
            _ => EmbeddingMetric::SquaredEuclidean,
        },
        l2_normalize: cfg.l2_normalize,
    })
}

pub fn protocol_from_config(cfg: &ExperimentConfig) -> EvalProtocol {
    EvalProtocol {
        episode: EpisodeConfig {
            ways: cfg.ways,
            shots: cfg.shots,
            matching_size: cfg.matching_size,
            queries: cfg.queries,
            disjoint_query_speaker: true,
        },
        episodes: cfg.episodes,
        seeds: cfg.seeds,
        base_seed: cfg.seed,
        threads: cfg.threads,
    }
}

/// evaluate a prebuilt set of per-seed models on the one-shot split.
pub fn evaluate_models(
    cfg: &ExperimentConfig,
    data: &LoadedData,
    models: &[&dyn OneShotModel],
) -> Result<EvalReport> {
    let protocol = protocol_from_config(cfg);
    evaluate_per_seed_models(cfg.task, models, &data.one_shot_test, &protocol)
}

/// CSV rendering: a config-snapshot comment, a fixed header, and one row.
pub fn report_to_csv(report: &EvalReport, snapshot: &str, wall_time_s: Option<f64>) -> String {
    let mut out = String::new();
    out.push_str(&format!("# config: {snapshot}\n"));
    out.push_str(
        "task,model,ways,shots,seed_count,episodes,mean_accuracy,ci95_halfwidth,wall_time_s\n",
    );
    out.push_str(&format!(
        "{},{},{},{},{},{},{:.6},{:.6},{}\n",
        report.task.as_str(),
        report.model,
        report.ways,
        report.shots,
        report.per_seed_accuracy.len(),
        report.episodes,
        report.mean_accuracy,
        report.ci95_halfwidth,
        wall_time_s.map(|t| format!("{t:.3}")).unwrap_or_else(|| "0.000".into()),
    ));
    out
}

/// Fixed-width table in the benchmark layout (model, task, mean ± ci).
pub fn format_report_table(rows: &[(String, String, f64, f64)]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<18} {:<20} {:>18}\n",
        "model", "task", "accuracy"
    ));
    out.push_str(&format!("{:-<18} {:-<20} {:->18}\n", "", "", ""));
    for (model, task, mean, ci) in rows {
        out.push_str(&format!(
            "{:<18} {:<20} {:>9.2}% ± {:.2}%\n",
            model,
            task,
            100.0 * mean,
            100.0 * ci
        ));
    }
    out
}

fn checkpoint_paths(out_dir: &Path, model: ModelKind, seed: u64) -> (PathBuf, PathBuf) {
    (
        out_dir.join(format!("{}_seed{}_speech.psck", model.as_str(), seed)),
        out_dir.join(format!("{}_seed{}_vision.psck", model.as_str(), seed)),
    )
}

/// gen-synth: write the synthetic corpus (FSA1 audio, IDX images and
/// labels, manifest) to the output directory. Byte-identical per seed.
pub fn cmd_gen_synth(cfg: &ExperimentConfig) -> Result<PathBuf> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    let synth = generate_synthetic_pairs(&cfg.synth)?;
    let manifest = write_synth_dataset(&synth, &cfg.out_dir)?;
    let path = cfg.out_dir.join("manifest.txt");
    manifest.save(&path)?;
    Ok(path)
}

/// Persist all three splits plus the manifest describing them.
pub fn write_synth_dataset(synth: &SyntheticDataset, dir: &Path) -> Result<DatasetManifest> {
    std::fs::create_dir_all(dir)?;
    let mut classes = Vec::new();
    for (id, name, image) in synth.one_shot_test.class_table.entries() {
        classes.push(ManifestClass {
            id,
            name: name.to_string(),
            image,
            family: ONE_SHOT_FAMILY.into(),
        });
    }
    for (id, name, image) in synth.background_train.class_table.entries() {
        classes.push(ManifestClass {
            id,
            name: name.to_string(),
            image,
            family: BACKGROUND_FAMILY.into(),
        });
    }

    let mut speakers = Vec::new();
    let mut splits = Vec::new();
    for split in [
        Split::BackgroundTrain,
        Split::BackgroundValidation,
        Split::OneShotTest,
    ] {
        let dataset = synth.split(split);
        let stem = split.tag().replace('-', "_");
        let audio_name = format!("{stem}.fsa");
        let images_name = format!("{stem}_images.idx");
        let labels_name = format!("{stem}_labels.idx");

        let audio: Vec<FeatureSequence> =
            dataset.pairs.iter().map(|p| p.audio.clone()).collect();
        write_feature_archive(&dir.join(&audio_name), &audio)?;

        let images: Vec<ImageGrid> = dataset
            .pairs
            .iter()
            .map(|p| {
                let bytes: Vec<f64> = p
                    .image
                    .pixels()
                    .iter()
                    .map(|&v| (v * 255.0).round())
                    .collect();
                ImageGrid::new(
                    bytes,
                    p.image.height(),
                    p.image.width(),
                    p.image.class_id(),
                    p.image.writer_id(),
                )
            })
            .collect::<Result<_>>()?;
        write_idx_images(&dir.join(&images_name), &images)?;
        let labels: Vec<ClassId> = dataset.pairs.iter().map(|p| p.image_class()).collect();
        write_idx_labels(&dir.join(&labels_name), &labels)?;

        let mut split_speakers: Vec<u32> =
            dataset.pairs.iter().map(|p| p.speaker()).collect();
        split_speakers.sort_unstable();
        split_speakers.dedup();
        for s in split_speakers {
            speakers.push((s, split.tag().to_string()));
        }
        splits.push(ManifestSplit {
            tag: split.tag().into(),
            audio: audio_name,
            images: images_name,
            labels: labels_name,
        });
    }

    let manifest = DatasetManifest {
        feature_dim: synth.config.feature_dim,
        frames: synth.config.frames,
        image_height: synth.config.image_height,
        image_width: synth.config.image_width,
        notes: vec![
            "pairing=index-aligned without replacement".into(),
            "spoken class 10 (oh) aliases image class 0".into(),
        ],
        classes,
        speakers,
        splits,
    };
    enforce_disjoint_splits(&manifest)?;
    Ok(manifest)
}

/// train: fit the configured neural model at the configured seed, then
/// write speech/vision checkpoints, a line-delimited log, and the resolved
/// config snapshot.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<(PathBuf, PathBuf)> {
    cfg.validate()?;
    if !cfg.model.is_neural() {
        return Err(Error::Config("dtw-pixels has nothing to train".into()));
    }
    std::fs::create_dir_all(&cfg.out_dir)?;
    let data = load_data(cfg)?;
    let (model, speech_log, vision_log) = train_embedding_model(cfg, &data, cfg.seed)?;
    let (speech_path, vision_path) = checkpoint_paths(&cfg.out_dir, cfg.model, cfg.seed);
    save_checkpoint(&speech_path, &model.speech.spec, &model.speech.params)?;
    save_checkpoint(&vision_path, &model.vision.spec, &model.vision.params)?;

    let mut log_text = String::new();
    for (tag, log) in [("speech", &speech_log), ("vision", &vision_log)] {
        for record in log {
            log_text.push_str(&format!("net={tag} {}\n", record.to_log_line()));
        }
    }
    std::fs::write(
        cfg.out_dir
            .join(format!("{}_seed{}_train.log", cfg.model.as_str(), cfg.seed)),
        log_text,
    )?;
    std::fs::write(
        cfg.out_dir
            .join(format!("{}_seed{}_config.txt", cfg.model.as_str(), cfg.seed)),
        format!("{}\n", cfg.snapshot()),
    )?;
    Ok((speech_path, vision_path))
}

/// eval: run the episodic protocol and emit the table plus a CSV file.
/// Neural models need a checkpoint prefix produced by `train`; dtw-pixels
/// runs directly.
pub fn cmd_eval(cfg: &ExperimentConfig, checkpoint: Option<&Path>) -> Result<(EvalReport, PathBuf)> {
    cfg.validate()?;
    let start = std::time::Instant::now();
    let data = load_data(cfg)?;

    let report = if cfg.model.is_neural() {
        let dir = checkpoint
            .map(Path::to_path_buf)
            .ok_or_else(|| Error::Config("neural models need --checkpoint <dir>".into()))?;
        let (speech_path, vision_path) = checkpoint_paths(&dir, cfg.model, cfg.seed);
        let speech_spec = speech_spec(cfg, &data)?;
        let vision_spec = vision_spec(cfg, &data)?;
        let model = EmbeddingModel {
            kind: cfg.model,
            speech: TrainedNet {
                params: load_checkpoint(&speech_path, &speech_spec)?,
                spec: speech_spec,
            },
            vision: TrainedNet {
                params: load_checkpoint(&vision_path, &vision_spec)?,
                spec: vision_spec,
            },
            metric: match cfg.model {
                ModelKind::FfnnClassifier | ModelKind::CnnClassifier => EmbeddingMetric::Cosine,
                _ => EmbeddingMetric::SquaredEuclidean,
            },
            l2_normalize: cfg.l2_normalize,
        };
        let models: Vec<&dyn OneShotModel> = (0..cfg.seeds).map(|_| &model as _).collect();
        evaluate_models(cfg, &data, &models)?
    } else {
        let model = DtwPixelsModel::default();
        let models: Vec<&dyn OneShotModel> = (0..cfg.seeds).map(|_| &model as _).collect();
        evaluate_models(cfg, &data, &models)?
    };

    std::fs::create_dir_all(&cfg.out_dir)?;
    let wall = cfg.timing.then(|| start.elapsed().as_secs_f64());
    let csv = report_to_csv(&report, &cfg.snapshot(), wall);
    let csv_path = cfg.out_dir.join(format!(
        "results_{}_{}.csv",
        report.task.as_str(),
        report.model
    ));
    std::fs::write(&csv_path, csv)?;
    Ok((report, csv_path))
}

/// report: merge previously written CSV files into one table.
pub fn cmd_report(paths: &[PathBuf]) -> Result<String> {
    let mut rows = Vec::new();
    for path in paths {
        let text = std::fs::read_to_string(path)?;
        for line in text.lines() {
            if line.starts_with('#') || line.starts_with("task,") || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 9 {
                return Err(Error::Format(format!(
                    "{}: expected 9 CSV fields, got {}",
                    path.display(),
                    fields.len()
                )));
            }
            let mean: f64 = fields[6]
                .parse()
                .map_err(|_| Error::Format(format!("{}: bad mean", path.display())))?;
            let ci: f64 = fields[7]
                .parse()
                .map_err(|_| Error::Format(format!("{}: bad ci", path.display())))?;
            rows.push((fields[1].to_string(), fields[0].to_string(), mean, ci));
        }
    }
    rows.sort_by(|a, b| (&a.1, &a.0).cmp(&(&b.1, &b.0)));
    Ok(format_report_table(&rows))
}
