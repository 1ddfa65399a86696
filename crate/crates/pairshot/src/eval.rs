//! Episode sampling and the one-shot evaluation protocol.
//!
//! An episode is a support set (L ways × K shots of speech-image pairs), a
//! matching set of images sampled one per image class, and a list of
//! queries disjoint from both by source index. Accuracy is the fraction of
//! correct query predictions over many episodes, reported per evaluation
//! seed with a Student-t 95% confidence half-width over seeds.
//!
//! Episodes are resampled per seed from that seed's own stream, and
//! per-episode streams are pre-split, so parallel and serial evaluation
//! produce identical reports.

use crate::data::{
    ClassId, FeatureSequence, ImageGrid, MatchingSet, PairedDataset, SpeakerId, SupportSet,
};
use crate::error::{Error, Result};
use crate::metric::argmin;
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskKind {
    UnimodalSpeech,
    UnimodalVision,
    CrossModal,
    SpeakerInvariance,
}

impl TaskKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TaskKind::UnimodalSpeech => "unimodal-speech",
            TaskKind::UnimodalVision => "unimodal-vision",
            TaskKind::CrossModal => "cross-modal",
            TaskKind::SpeakerInvariance => "speaker-invariance",
        }
    }

    pub fn parse(text: &str) -> Result<TaskKind> {
        match text {
            "unimodal-speech" => Ok(TaskKind::UnimodalSpeech),
            "unimodal-vision" => Ok(TaskKind::UnimodalVision),
            "cross-modal" => Ok(TaskKind::CrossModal),
            "speaker-invariance" => Ok(TaskKind::SpeakerInvariance),
            other => Err(Error::Config(format!("unknown task '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EpisodeConfig {
    /// L: classes in the support set.
    pub ways: usize,
    /// K: pairs per class in the support set.
    pub shots: usize,
    /// N: images in the matching set, one per image class.
    pub matching_size: usize,
    /// Queries sampled per episode with support and matching fixed.
    pub queries: usize,
    /// Default constraint: the query speaker appears nowhere in the support
    /// set. The speaker-invariance sampler replaces this with its own
    /// construction.
    pub disjoint_query_speaker: bool,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            ways: 11,
            shots: 1,
            matching_size: 10,
            queries: 10,
            disjoint_query_speaker: true,
        }
    }
}

/// One sampled evaluation trial. Queries are stored as source indices into
/// the dataset; speech tasks use the audio side, vision tasks the image
/// side.
#[derive(Clone, Debug)]
pub struct Episode {
    pub support: SupportSet,
    pub matching: MatchingSet,
    pub query_indices: Vec<usize>,
}

impl Episode {
    /// Disjointness by source index: queries never overlap the support set
    /// or the matching set, and matching images never overlap the support.
    pub fn check_disjoint(&self) -> Result<()> {
        let support: std::collections::BTreeSet<usize> = self.support.source_indices().collect();
        let matching: std::collections::BTreeSet<usize> = self.matching.source_indices().collect();
        if support.intersection(&matching).next().is_some() {
            return Err(Error::Sampling("matching set overlaps support".into()));
        }
        for &q in &self.query_indices {
            if support.contains(&q) || matching.contains(&q) {
                return Err(Error::Sampling("query overlaps support or matching".into()));
            }
        }
        Ok(())
    }
}

fn pair_index_by_class(data: &PairedDataset) -> std::collections::BTreeMap<ClassId, Vec<usize>> {
    let mut map: std::collections::BTreeMap<ClassId, Vec<usize>> =
        std::collections::BTreeMap::new();
    for (i, pair) in data.pairs.iter().enumerate() {
        map.entry(pair.spoken_class()).or_default().push(i);
    }
    map
}

/// Sample an episode under the default constraints.
pub fn sample_episode(data: &PairedDataset, cfg: &EpisodeConfig, seed: u64) -> Result<Episode> {
    if cfg.ways == 0 || cfg.shots == 0 || cfg.matching_size == 0 || cfg.queries == 0 {
        return Err(Error::invalid("episode counts must be >= 1"));
    }
    let mut rng = Rng::stream(seed, &[0x6570_6973]);
    let by_class = pair_index_by_class(data);
    let classes: Vec<ClassId> = by_class.keys().copied().collect();
    if classes.len() < cfg.ways {
        return Err(Error::Sampling(format!(
            "need {} classes, dataset has {}",
            cfg.ways,
            classes.len()
        )));
    }

    // Support: ways distinct classes, shots pairs each, without replacement.
    let class_picks = rng.sample_distinct(classes.len(), cfg.ways);
    let mut support_items = Vec::with_capacity(cfg.ways * cfg.shots);
    let mut chosen_classes = Vec::with_capacity(cfg.ways);
    for pick in class_picks {
        let class = classes[pick];
        chosen_classes.push(class);
        let pool = &by_class[&class];
        if pool.len() < cfg.shots {
            return Err(Error::Sampling(format!(
                "class {} has {} pairs, need {} shots",
                class,
                pool.len(),
                cfg.shots
            )));
        }
        for item in rng.sample_distinct(pool.len(), cfg.shots) {
            let idx = pool[item];
            support_items.push((idx, data.pairs[idx].clone()));
        }
    }
    let support = SupportSet::new(support_items, cfg.ways, cfg.shots)?;
    let support_sources: std::collections::BTreeSet<usize> =
        support.source_indices().collect();
    let support_speakers: std::collections::BTreeSet<SpeakerId> =
        support.speakers().into_iter().collect();

    // Matching set: one image per image class induced by the chosen spoken
    // classes, disjoint from the support by source index.
    let mut image_classes: Vec<ClassId> = chosen_classes
        .iter()
        .map(|&c| data.class_table.image_class_of(c))
        .collect();
    image_classes.sort_unstable();
    image_classes.dedup();
    if cfg.matching_size > image_classes.len() {
        return Err(Error::Sampling(format!(
            "matching size {} exceeds the {} distinct image classes in the episode",
            cfg.matching_size,
            image_classes.len()
        )));
    }
    let matching_class_picks = rng.sample_distinct(image_classes.len(), cfg.matching_size);
    let mut matching_items = Vec::with_capacity(cfg.matching_size);
    for pick in matching_class_picks {
        let image_class = image_classes[pick];
        let candidates: Vec<usize> = data
            .pairs
            .iter()
            .enumerate()
            .filter(|(i, p)| p.image_class() == image_class && !support_sources.contains(i))
            .map(|(i, _)| i)
            .collect();
        if candidates.is_empty() {
            return Err(Error::Sampling(format!(
                "no image of class {} outside the support set",
                image_class
            )));
        }
        let idx = candidates[rng.next_below(candidates.len())];
        matching_items.push((idx, data.pairs[idx].image.clone()));
    }
    let matching = MatchingSet::new(matching_items)?;
    let matching_sources: std::collections::BTreeSet<usize> =
        matching.source_indices().collect();

    // Queries: class sampled uniformly with replacement over the episode
    // classes; instance disjoint from support and matching, speaker outside
    // the support when the constraint is on.
    let mut query_indices = Vec::with_capacity(cfg.queries);
    for _ in 0..cfg.queries {
        let class = chosen_classes[rng.next_below(chosen_classes.len())];
        let candidates: Vec<usize> = by_class[&class]
            .iter()
            .copied()
            .filter(|i| {
                !support_sources.contains(i)
                    && !matching_sources.contains(i)
                    && (!cfg.disjoint_query_speaker
                        || !support_speakers.contains(&data.pairs[*i].speaker()))
            })
            .collect();
        if candidates.is_empty() {
            return Err(Error::Sampling(format!(
                "no query candidate for class {} outside the support set{}",
                class,
                if cfg.disjoint_query_speaker {
                    " with a speaker absent from the support"
                } else {
                    ""
                }
            )));
        }
        query_indices.push(candidates[rng.next_below(candidates.len())]);
    }

    let episode = Episode {
        support,
        matching,
        query_indices,
    };
    episode.check_disjoint()?;
    Ok(episode)
}

/// Sample the worst-case speaker episode: every support item is spoken by
/// the query speaker except the one matching the query class, which comes
/// from a different speaker.
pub fn sample_speaker_invariance_episode(
    data: &PairedDataset,
    cfg: &EpisodeConfig,
    seed: u64,
) -> Result<Episode> {
    if cfg.shots != 1 {
        return Err(Error::invalid(
            "speaker-invariance episodes are defined for one-shot support sets",
        ));
    }
    let mut rng = Rng::stream(seed, &[0x7370_6b72]);
    let by_class = pair_index_by_class(data);
    let classes: Vec<ClassId> = by_class.keys().copied().collect();
    if classes.len() < cfg.ways {
        return Err(Error::Sampling(format!(
            "need {} classes, dataset has {}",
            cfg.ways,
            classes.len()
        )));
    }

    let class_picks = rng.sample_distinct(classes.len(), cfg.ways);
    let chosen_classes: Vec<ClassId> = class_picks.iter().map(|&p| classes[p]).collect();
    let query_class = chosen_classes[rng.next_below(chosen_classes.len())];

    // The query speaker must utter the query class (for the queries) and
    // every other episode class (for the support); someone else must utter
    // the query class (for the support's matching item).
    let mut speakers_of_query_class: Vec<SpeakerId> = by_class[&query_class]
        .iter()
        .map(|&i| data.pairs[i].speaker())
        .collect();
    speakers_of_query_class.sort_unstable();
    speakers_of_query_class.dedup();
    let eligible: Vec<SpeakerId> = speakers_of_query_class
        .iter()
        .copied()
        .filter(|&s| {
            chosen_classes.iter().all(|&c| {
                c == query_class
                    || by_class[&c].iter().any(|&i| data.pairs[i].speaker() == s)
            }) && by_class[&query_class]
                .iter()
                .any(|&i| data.pairs[i].speaker() != s)
        })
        .collect();
    if eligible.is_empty() {
        return Err(Error::Sampling(format!(
            "no speaker utters the query class {} plus the other {} classes while another speaker covers the query class",
            query_class,
            cfg.ways - 1
        )));
    }
    let query_speaker = eligible[rng.next_below(eligible.len())];

    let mut support_items = Vec::with_capacity(cfg.ways);
    for &class in &chosen_classes {
        let candidates: Vec<usize> = by_class[&class]
            .iter()
            .copied()
            .filter(|&i| {
                if class == query_class {
                    data.pairs[i].speaker() != query_speaker
                } else {
                    data.pairs[i].speaker() == query_speaker
                }
            })
            .collect();
        if candidates.is_empty() {
            return Err(Error::Sampling(format!(
                "no support candidate for class {class} under the speaker constraint"
            )));
        }
        let idx = candidates[rng.next_below(candidates.len())];
        support_items.push((idx, data.pairs[idx].clone()));
    }
    let support = SupportSet::new(support_items, cfg.ways, 1)?;
    let support_sources: std::collections::BTreeSet<usize> =
        support.source_indices().collect();

    // Queries come before the matching set here: the (query class, query
    // speaker) pool can be a single instance, which the matching set must
    // not consume.
    let mut query_indices = Vec::with_capacity(cfg.queries);
    let pool: Vec<usize> = by_class[&query_class]
        .iter()
        .copied()
        .filter(|&i| {
            data.pairs[i].speaker() == query_speaker && !support_sources.contains(&i)
        })
        .collect();
    if pool.len() < cfg.queries {
        return Err(Error::Sampling(format!(
            "speaker {} has {} free instances of class {}, need {} queries",
            query_speaker,
            pool.len(),
            query_class,
            cfg.queries
        )));
    }
    for pick in rng.sample_distinct(pool.len(), cfg.queries) {
        query_indices.push(pool[pick]);
    }
    let reserved: std::collections::BTreeSet<usize> = support_sources
        .iter()
        .copied()
        .chain(query_indices.iter().copied())
        .collect();

    let mut image_classes: Vec<ClassId> = chosen_classes
        .iter()
        .map(|&c| data.class_table.image_class_of(c))
        .collect();
    image_classes.sort_unstable();
    image_classes.dedup();
    if cfg.matching_size > image_classes.len() {
        return Err(Error::Sampling(format!(
            "matching size {} exceeds the {} distinct image classes in the episode",
            cfg.matching_size,
            image_classes.len()
        )));
    }
    let matching_class_picks = rng.sample_distinct(image_classes.len(), cfg.matching_size);
    let mut matching_items = Vec::with_capacity(cfg.matching_size);
    for pick in matching_class_picks {
        let image_class = image_classes[pick];
        let candidates: Vec<usize> = data
            .pairs
            .iter()
            .enumerate()
            .filter(|(i, p)| p.image_class() == image_class && !reserved.contains(i))
            .map(|(i, _)| i)
            .collect();
        if candidates.is_empty() {
            return Err(Error::Sampling(format!(
                "no image of class {} outside the support set",
                image_class
            )));
        }
        let idx = candidates[rng.next_below(candidates.len())];
        matching_items.push((idx, data.pairs[idx].image.clone()));
    }
    let matching = MatchingSet::new(matching_items)?;

    let episode = Episode {
        support,
        matching,
        query_indices,
    };
    episode.check_disjoint()?;
    Ok(episode)
}

/// 1-NN classification of a speech query against the support set audio.
pub fn classify_one_shot_speech<F>(
    query: &FeatureSequence,
    support: &SupportSet,
    mut dist: F,
) -> Result<ClassId>
where
    F: FnMut(&FeatureSequence, &FeatureSequence) -> f64,
{
    if support.is_empty() {
        return Err(Error::invalid("empty support set"));
    }
    let distances: Vec<f64> = support.pairs().map(|p| dist(query, &p.audio)).collect();
    Ok(support.pair(argmin(&distances)?).spoken_class())
}

/// K-shot aggregation rule: the default classifies by the single nearest of
/// the L×K support items; the class-mean option averages the distances to
/// each class's K items and takes the closest class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ShotAggregation {
    #[default]
    NearestItem,
    ClassMeanDistance,
}

/// K-shot speech classification under an explicit aggregation rule.
pub fn classify_k_shot_speech<F>(
    query: &FeatureSequence,
    support: &SupportSet,
    aggregation: ShotAggregation,
    mut dist: F,
) -> Result<ClassId>
where
    F: FnMut(&FeatureSequence, &FeatureSequence) -> f64,
{
    if support.is_empty() {
        return Err(Error::invalid("empty support set"));
    }
    match aggregation {
        ShotAggregation::NearestItem => classify_one_shot_speech(query, support, dist),
        ShotAggregation::ClassMeanDistance => {
            let mut sums: std::collections::BTreeMap<ClassId, (f64, usize)> =
                std::collections::BTreeMap::new();
            for pair in support.pairs() {
                let entry = sums.entry(pair.spoken_class()).or_insert((0.0, 0));
                entry.0 += dist(query, &pair.audio);
                entry.1 += 1;
            }
            let mut best: Option<(ClassId, f64)> = None;
            for (&class, &(sum, n)) in &sums {
                let mean = sum / n as f64;
                match best {
                    Some((_, d)) if d <= mean => {}
                    _ => best = Some((class, mean)),
                }
            }
            Ok(best.unwrap().0)
        }
    }
}

/// 1-NN classification of an image query against the support set images.
pub fn classify_one_shot_image<F>(
    query: &ImageGrid,
    support: &SupportSet,
    mut dist: F,
) -> Result<ClassId>
where
    F: FnMut(&ImageGrid, &ImageGrid) -> f64,
{
    if support.is_empty() {
        return Err(Error::invalid("empty support set"));
    }
    let distances: Vec<f64> = support.pairs().map(|p| dist(query, &p.image)).collect();
    Ok(support.pair(argmin(&distances)?).image_class())
}

/// Two-stage cross-modal matching: the query retrieves its nearest support
/// audio, and that item's paired image retrieves the nearest matching-set
/// image. Ties break toward the lowest index at each stage.
pub fn cross_modal_match<FS, FI>(
    query: &FeatureSequence,
    support: &SupportSet,
    matching: &MatchingSet,
    mut speech_dist: FS,
    mut image_dist: FI,
) -> Result<usize>
where
    FS: FnMut(&FeatureSequence, &FeatureSequence) -> f64,
    FI: FnMut(&ImageGrid, &ImageGrid) -> f64,
{
    if support.is_empty() || matching.is_empty() {
        return Err(Error::invalid("empty support or matching set"));
    }
    let stage1: Vec<f64> = support.pairs().map(|p| speech_dist(query, &p.audio)).collect();
    let retrieved = support.pair(argmin(&stage1)?);
    let stage2: Vec<f64> = matching
        .images()
        .map(|img| image_dist(&retrieved.image, img))
        .collect();
    argmin(&stage2)
}

/// A model is anything that can score within-modality distances in batch.
/// Embedding models embed each list once; direct models score per pair.
pub trait OneShotModel: Sync {
    fn name(&self) -> String;

    /// Distance matrix: rows are queries, columns are references.
    fn speech_distances(
        &self,
        queries: &[&FeatureSequence],
        refs: &[&FeatureSequence],
    ) -> Result<Vec<Vec<f64>>>;

    fn image_distances(&self, queries: &[&ImageGrid], refs: &[&ImageGrid])
        -> Result<Vec<Vec<f64>>>;
}

/// Evaluation protocol: episode shape, episode count, per-seed streams.
#[derive(Clone, Debug)]
pub struct EvalProtocol {
    pub episode: EpisodeConfig,
    pub episodes: usize,
    pub seeds: usize,
    pub base_seed: u64,
    /// Worker threads for episode evaluation; results are identical for any
    /// value because per-episode streams are pre-split.
    pub threads: usize,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        EvalProtocol {
            episode: EpisodeConfig::default(),
            episodes: 400,
            seeds: 10,
            base_seed: 0,
            threads: 1,
        }
    }
}

/// Accuracy report over evaluation seeds.
#[derive(Clone, Debug)]
pub struct EvalReport {
    pub task: TaskKind,
    pub model: String,
    pub ways: usize,
    pub shots: usize,
    pub matching_size: usize,
    pub episodes: usize,
    pub queries_per_episode: usize,
    pub per_seed_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
    pub ci95_halfwidth: f64,
    /// Episodes are drawn fresh from each seed's stream rather than shared
    /// across seeds.
    pub episodes_resampled_per_seed: bool,
}

impl EvalReport {
    /// Structured text record consumed by the CLI emitters.
    pub fn to_record(&self) -> String {
        let seeds: Vec<String> = self
            .per_seed_accuracy
            .iter()
            .map(|a| format!("{a:.6}"))
            .collect();
        format!(
            "task={} model={} ways={} shots={} matching={} episodes={} queries={} \
             resampled_per_seed={} per_seed=[{}] mean={:.6} ci95={:.6}",
            self.task.as_str(),
            self.model,
            self.ways,
            self.shots,
            self.matching_size,
            self.episodes,
            self.queries_per_episode,
            self.episodes_resampled_per_seed,
            seeds.join(","),
            self.mean_accuracy,
            self.ci95_halfwidth
        )
    }
}

/// Two-sided 95% Student-t quantile for `dof` degrees of freedom.
pub fn t_quantile_975(dof: usize) -> f64 {
    const TABLE: [f64; 30] = [
        12.7062, 4.3027, 3.1824, 2.7764, 2.5706, 2.4469, 2.3646, 2.3060, 2.2622, 2.2281, 2.2010,
        2.1788, 2.1604, 2.1448, 2.1314, 2.1199, 2.1098, 2.1009, 2.0930, 2.0860, 2.0796, 2.0739,
        2.0687, 2.0639, 2.0595, 2.0555, 2.0518, 2.0484, 2.0452, 2.0423,
    ];
    if dof == 0 {
        return 0.0;
    }
    if dof <= TABLE.len() {
        TABLE[dof - 1]
    } else {
        1.96
    }
}

fn summarize(per_seed: &[f64]) -> (f64, f64) {
    let s = per_seed.len();
    let mean = per_seed.iter().sum::<f64>() / s as f64;
    if s < 2 {
        return (mean, 0.0);
    }
    let var = per_seed.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (s - 1) as f64;
    let half = t_quantile_975(s - 1) * var.sqrt() / (s as f64).sqrt();
    (mean, half)
}

/// Evaluate one fixed model over `protocol.seeds` evaluation seeds.
pub fn evaluate(
    task: TaskKind,
    model: &dyn OneShotModel,
    data: &PairedDataset,
    protocol: &EvalProtocol,
) -> Result<EvalReport> {
    let models: Vec<&dyn OneShotModel> = (0..protocol.seeds).map(|_| model).collect();
    evaluate_per_seed_models(task, &models, data, protocol)
}

/// Evaluate with one model per seed (the trained-per-seed protocol). The
/// number of models fixes the seed count; `protocol.seeds` is ignored.
pub fn evaluate_per_seed_models(
    task: TaskKind,
    models: &[&dyn OneShotModel],
    data: &PairedDataset,
    protocol: &EvalProtocol,
) -> Result<EvalReport> {
    if models.is_empty() || protocol.episodes == 0 || protocol.episode.queries == 0 {
        return Err(Error::invalid("evaluation needs models, episodes and queries >= 1"));
    }
    let mut per_seed_accuracy = Vec::with_capacity(models.len());
    for (seed_index, model) in models.iter().enumerate() {
        let (correct, total) =
            run_seed(task, *model, data, protocol, seed_index as u64)?;
        per_seed_accuracy.push(correct as f64 / total as f64);
    }
    let (mean_accuracy, ci95_halfwidth) = summarize(&per_seed_accuracy);
    Ok(EvalReport {
        task,
        model: models[0].name(),
        ways: protocol.episode.ways,
        shots: protocol.episode.shots,
        matching_size: protocol.episode.matching_size,
        episodes: protocol.episodes,
        queries_per_episode: protocol.episode.queries,
        per_seed_accuracy,
        mean_accuracy,
        ci95_halfwidth,
        episodes_resampled_per_seed: true,
    })
}

fn run_seed(
    task: TaskKind,
    model: &dyn OneShotModel,
    data: &PairedDataset,
    protocol: &EvalProtocol,
    seed_index: u64,
) -> Result<(usize, usize)> {
    // Episode streams depend on the evaluation seed but not the task, so
    // different tasks at the same seed score the same support sets and
    // queries (paired comparisons across tasks).
    let episode_seeds: Vec<u64> = (0..protocol.episodes)
        .map(|e| Rng::stream(protocol.base_seed, &[seed_index, e as u64]).next_u64())
        .collect();

    let threads = protocol.threads.max(1).min(episode_seeds.len());
    let results: Vec<Result<(usize, usize)>> = if threads == 1 {
        episode_seeds
            .iter()
            .map(|&s| run_episode(task, model, data, &protocol.episode, s))
            .collect()
    } else {
        // Contiguous chunks per worker; joined in order, so assembly is
        // deterministic regardless of scheduling.
        let chunk = episode_seeds.len().div_ceil(threads);
        std::thread::scope(|scope| {
            let handles: Vec<_> = episode_seeds
                .chunks(chunk)
                .map(|seeds| {
                    scope.spawn(move || {
                        seeds
                            .iter()
                            .map(|&s| run_episode(task, model, data, &protocol.episode, s))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("episode worker panicked"))
                .collect()
        })
    };

    let mut correct = 0;
    let mut total = 0;
    for r in results {
        let (c, t) = r?;
        correct += c;
        total += t;
    }
    Ok((correct, total))
}

fn run_episode(
    task: TaskKind,
    model: &dyn OneShotModel,
    data: &PairedDataset,
    cfg: &EpisodeConfig,
    seed: u64,
) -> Result<(usize, usize)> {
    let episode = match task {
        TaskKind::SpeakerInvariance => sample_speaker_invariance_episode(data, cfg, seed)?,
        _ => sample_episode(data, cfg, seed)?,
    };
    score_episode(task, model, data, &episode)
}

/// Count correct predictions over an episode's queries.
pub fn score_episode(
    task: TaskKind,
    model: &dyn OneShotModel,
    data: &PairedDataset,
    episode: &Episode,
) -> Result<(usize, usize)> {
    let support_audio: Vec<&FeatureSequence> =
        episode.support.pairs().map(|p| &p.audio).collect();
    let support_images: Vec<&ImageGrid> = episode.support.pairs().map(|p| &p.image).collect();
    let total = episode.query_indices.len();
    let mut correct = 0;
    match task {
        TaskKind::UnimodalSpeech => {
            let queries: Vec<&FeatureSequence> = episode
                .query_indices
                .iter()
                .map(|&i| &data.pairs[i].audio)
                .collect();
            let distances = model.speech_distances(&queries, &support_audio)?;
            for (q, row) in distances.iter().enumerate() {
                let predicted = episode.support.pair(argmin(row)?).spoken_class();
                if predicted == queries[q].class_id() {
                    correct += 1;
                }
            }
        }
        TaskKind::UnimodalVision => {
            let queries: Vec<&ImageGrid> = episode
                .query_indices
                .iter()
                .map(|&i| &data.pairs[i].image)
                .collect();
            let distances = model.image_distances(&queries, &support_images)?;
            for (q, row) in distances.iter().enumerate() {
                let predicted = episode.support.pair(argmin(row)?).image_class();
                if predicted == queries[q].class_id() {
                    correct += 1;
                }
            }
        }
        TaskKind::CrossModal | TaskKind::SpeakerInvariance => {
            let queries: Vec<&FeatureSequence> = episode
                .query_indices
                .iter()
                .map(|&i| &data.pairs[i].audio)
                .collect();
            let stage1 = model.speech_distances(&queries, &support_audio)?;
            let matching_images: Vec<&ImageGrid> = episode.matching.images().collect();
            let stage2 = model.image_distances(&support_images, &matching_images)?;
            for (q, row) in stage1.iter().enumerate() {
                let retrieved = argmin(row)?;
                let predicted = argmin(&stage2[retrieved])?;
                let predicted_class = episode.matching.image(predicted).class_id();
                let truth = data.class_table.image_class_of(queries[q].class_id());
                if predicted_class == truth {
                    correct += 1;
                }
            }
        }
    }
    Ok((correct, total))
}
