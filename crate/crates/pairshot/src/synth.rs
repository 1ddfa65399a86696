//! Synthetic paired-dataset generator: a desk-scale stand-in for the spoken
//! and handwritten digit corpora.
//!
//! Class prototypes are sparse mixtures over a latent part basis shared by
//! every class in the dataset, background and one-shot alike. Background
//! training can therefore learn part detectors that transfer to the unseen
//! one-shot classes, the same way phones and pen strokes transfer between
//! word and character classes. An audio instance is its prototype under a
//! random linear time warp plus Gaussian noise plus a constant per-speaker
//! offset vector; an image instance is the prototype plus noise, clipped to
//! [0, 1] and quantized to the 256-level pixel grid so disk round-trips are
//! exact. Audio values are rounded through f32 for the same reason.
//!
//! The one-shot split always has the 11/10 digit structure ("oh" and "zero"
//! are distinct spoken classes sharing image class 0); background splits use
//! their own disjoint class range. Every split gets fresh speakers.

use std::collections::BTreeSet;

use crate::data::{
    ClassId, ClassTable, FeatureSequence, ImageGrid, PairedDataset, PairedExample, SpeakerId,
};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Spoken class id of "oh" (aliases image class 0, like "zero").
pub const OH_CLASS: ClassId = 10;
/// First background class id; one-shot spoken classes are 0..=10.
pub const BACKGROUND_CLASS_BASE: ClassId = 11;

pub const DIGIT_NAMES: [&str; 10] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
];

#[derive(Clone, Debug)]
pub struct SyntheticConfig {
    /// Background classes shared by the background-train and
    /// background-validation splits.
    pub background_classes: usize,
    /// Speakers per split (each split gets its own speaker ids).
    pub speakers: usize,
    /// Instances per class per split.
    pub examples_per_class: usize,
    /// Audio feature dimension d.
    pub feature_dim: usize,
    /// Nominal frame count T; instances jitter around it when noise > 0.
    pub frames: usize,
    pub image_height: usize,
    pub image_width: usize,
    /// Gaussian noise scale applied to both modalities.
    pub noise_sigma: f64,
    /// Scale of the constant per-speaker audio offset.
    pub speaker_offset_tau: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            background_classes: 20,
            speakers: 16,
            examples_per_class: 16,
            feature_dim: 8,
            frames: 20,
            image_height: 28,
            image_width: 28,
            noise_sigma: 0.3,
            speaker_offset_tau: 0.5,
            seed: 7,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.background_classes < 2 {
            return Err(Error::Config("background class count must be >= 2".into()));
        }
        if self.speakers == 0 || self.examples_per_class == 0 {
            return Err(Error::Config("speakers and examples_per_class must be >= 1".into()));
        }
        if self.feature_dim == 0 || self.frames == 0 {
            return Err(Error::Config("feature_dim and frames must be >= 1".into()));
        }
        if self.image_height == 0 || self.image_width == 0 {
            return Err(Error::Config("image dimensions must be >= 1".into()));
        }
        if self.noise_sigma.is_nan()
            || self.noise_sigma < 0.0
            || self.speaker_offset_tau.is_nan()
            || self.speaker_offset_tau < 0.0
        {
            return Err(Error::Config("noise and offset scales must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    BackgroundTrain,
    BackgroundValidation,
    OneShotTest,
}

impl Split {
    pub fn tag(&self) -> &'static str {
        match self {
            Split::BackgroundTrain => "background-train",
            Split::BackgroundValidation => "background-validation",
            Split::OneShotTest => "one-shot-test",
        }
    }

    fn index(&self) -> u64 {
        match self {
            Split::BackgroundTrain => 0,
            Split::BackgroundValidation => 1,
            Split::OneShotTest => 2,
        }
    }

    /// Speaker ids are split-scoped so provenance is visible in the data.
    fn speaker_base(&self) -> SpeakerId {
        match self {
            Split::BackgroundTrain => 0,
            Split::BackgroundValidation => 1000,
            Split::OneShotTest => 2000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticDataset {
    pub background_train: PairedDataset,
    pub background_validation: PairedDataset,
    pub one_shot_test: PairedDataset,
    pub config: SyntheticConfig,
}

impl SyntheticDataset {
    pub fn background_spoken_classes(&self) -> BTreeSet<ClassId> {
        self.background_train.spoken_classes().into_iter().collect()
    }

    pub fn one_shot_spoken_classes(&self) -> BTreeSet<ClassId> {
        self.one_shot_test.spoken_classes().into_iter().collect()
    }

    pub fn split(&self, split: Split) -> &PairedDataset {
        match split {
            Split::BackgroundTrain => &self.background_train,
            Split::BackgroundValidation => &self.background_validation,
            Split::OneShotTest => &self.one_shot_test,
        }
    }
}

/// The 11-spoken / 10-image digit class table.
pub fn digit_class_table() -> ClassTable {
    let mut table = ClassTable::new();
    for (i, name) in DIGIT_NAMES.iter().enumerate() {
        table.insert(i as ClassId, *name, i as ClassId);
    }
    table.insert(OH_CLASS, "oh", 0);
    table
}

fn background_class_table(count: usize) -> ClassTable {
    let mut table = ClassTable::new();
    for i in 0..count {
        let id = BACKGROUND_CLASS_BASE + i as ClassId;
        table.insert(id, format!("bg-{i:02}"), id);
    }
    table
}

/// Latent parts shared across all classes of a dataset seed.
const AUDIO_BASIS_SIZE: usize = 12;
const IMAGE_BASIS_SIZE: usize = 12;
/// Parts mixed into one class prototype.
const PARTS_PER_CLASS: usize = 4;

struct Prototypes {
    /// Per spoken class: frames × dim.
    audio: std::collections::BTreeMap<ClassId, Vec<f64>>,
    /// Per image class: height × width pattern in [0, 1].
    image: std::collections::BTreeMap<ClassId, Vec<f64>>,
}

/// Audio parts are Gaussian frame patterns; image parts are binary masks.
/// Both depend only on the dataset seed, never on the class list, so the
/// background and one-shot prototypes share one basis.
fn audio_basis(cfg: &SyntheticConfig) -> Vec<Vec<f64>> {
    (0..AUDIO_BASIS_SIZE)
        .map(|b| {
            let mut rng = Rng::stream(cfg.seed, &[0x6162_6173, b as u64]);
            (0..cfg.frames * cfg.feature_dim)
                .map(|_| rng.next_normal())
                .collect()
        })
        .collect()
}

fn image_basis(cfg: &SyntheticConfig) -> Vec<Vec<f64>> {
    (0..IMAGE_BASIS_SIZE)
        .map(|b| {
            let mut rng = Rng::stream(cfg.seed, &[0x6962_6173, b as u64]);
            (0..cfg.image_height * cfg.image_width)
                .map(|_| rng.next_normal())
                .collect()
        })
        .collect()
}

fn draw_prototypes(cfg: &SyntheticConfig, table: &ClassTable) -> Prototypes {
    let a_basis = audio_basis(cfg);
    let i_basis = image_basis(cfg);
    let mut audio = std::collections::BTreeMap::new();
    let mut image = std::collections::BTreeMap::new();
    for (spoken, _, image_class) in table.entries() {
        let mut rng = Rng::stream(cfg.seed, &[0x6175_6469, u64::from(spoken)]);
        let scale = 1.0 / (PARTS_PER_CLASS as f64).sqrt();
        let mut proto = vec![0.0; cfg.frames * cfg.feature_dim];
        for part in rng.sample_distinct(AUDIO_BASIS_SIZE, PARTS_PER_CLASS) {
            let coeff = scale * if rng.next_f64() < 0.5 { -1.0 } else { 1.0 };
            for (p, &b) in proto.iter_mut().zip(&a_basis[part]) {
                *p += coeff * b;
            }
        }
        audio.insert(spoken, proto);

        image.entry(image_class).or_insert_with(|| {
            // Signed part mixture re-centered onto the pixel range. The 0.5
            // amplitude keeps class contrast comparable to the noise scale,
            // so pixel matching is good but not perfect, as on real digits.
            let mut rng = Rng::stream(cfg.seed, &[0x696d_6167, u64::from(image_class)]);
            let parts = rng.sample_distinct(IMAGE_BASIS_SIZE, PARTS_PER_CLASS);
            let scale = 0.5 / (PARTS_PER_CLASS as f64).sqrt();
            let mut pixels = vec![0.0; cfg.image_height * cfg.image_width];
            for part in parts {
                let coeff = scale * if rng.next_f64() < 0.5 { -1.0 } else { 1.0 };
                for (p, &b) in pixels.iter_mut().zip(&i_basis[part]) {
                    *p += coeff * b;
                }
            }
            for p in pixels.iter_mut() {
                *p = (0.5 + *p).clamp(0.0, 1.0);
            }
            pixels
        });
    }
    Prototypes { audio, image }
}

fn speaker_offset(cfg: &SyntheticConfig, speaker: SpeakerId) -> Vec<f64> {
    let mut rng = Rng::stream(cfg.seed, &[0x6f66_6673, u64::from(speaker)]);
    (0..cfg.feature_dim)
        .map(|_| cfg.speaker_offset_tau * rng.next_normal())
        .collect()
}

fn generate_split(
    cfg: &SyntheticConfig,
    split: Split,
    table: &ClassTable,
    prototypes: &Prototypes,
) -> Result<PairedDataset> {
    let mut pairs = Vec::new();
    let jitter = if cfg.noise_sigma > 0.0 { cfg.frames / 5 } else { 0 };
    for (spoken, _, image_class) in table.entries() {
        let audio_proto = &prototypes.audio[&spoken];
        let image_proto = &prototypes.image[&image_class];

        // Per-class speaker rotation keeps every speaker covering every
        // class once examples_per_class >= speakers.
        let mut order: Vec<usize> = (0..cfg.speakers).collect();
        let mut order_rng = Rng::stream(
            cfg.seed,
            &[0x7370_6b61, split.index(), u64::from(spoken)],
        );
        order_rng.shuffle(&mut order);

        for example in 0..cfg.examples_per_class {
            let speaker = split.speaker_base() + order[example % cfg.speakers] as SpeakerId;
            let offset = speaker_offset(cfg, speaker);
            let mut rng = Rng::stream(
                cfg.seed,
                &[
                    0x696e_7374,
                    split.index(),
                    u64::from(spoken),
                    example as u64,
                ],
            );

            let length = if jitter == 0 {
                cfg.frames
            } else {
                (cfg.frames - jitter + rng.next_below(2 * jitter + 1)).max(1)
            };
            let mut flat = Vec::with_capacity(length * cfg.feature_dim);
            for t in 0..length {
                let src = (t * cfg.frames / length).min(cfg.frames - 1);
                for i in 0..cfg.feature_dim {
                    let v = audio_proto[src * cfg.feature_dim + i]
                        + cfg.noise_sigma * rng.next_normal()
                        + offset[i];
                    flat.push(f64::from(v as f32));
                }
            }
            let audio = FeatureSequence::from_flat(flat, cfg.feature_dim, spoken, speaker)?;

            let mut pixels = Vec::with_capacity(image_proto.len());
            for &p in image_proto {
                let v = (p + cfg.noise_sigma * rng.next_normal()).clamp(0.0, 1.0);
                let byte = (v * 255.0).round() as u8;
                pixels.push(f64::from(byte) / 255.0);
            }
            let image = ImageGrid::new(
                pixels,
                cfg.image_height,
                cfg.image_width,
                image_class,
                None,
            )?;
            pairs.push(PairedExample::with_table(audio, image, table)?);
        }
    }
    Ok(PairedDataset {
        pairs,
        class_table: table.clone(),
    })
}

/// Generate the three splits. Background splits use disjoint class ranges
/// from the one-shot digits, so the leakage guard passes by construction.
pub fn generate_synthetic_pairs(cfg: &SyntheticConfig) -> Result<SyntheticDataset> {
    cfg.validate()?;
    let digit_table = digit_class_table();
    let bg_table = background_class_table(cfg.background_classes);
    let digit_protos = draw_prototypes(cfg, &digit_table);
    let bg_protos = draw_prototypes(cfg, &bg_table);

    Ok(SyntheticDataset {
        background_train: generate_split(cfg, Split::BackgroundTrain, &bg_table, &bg_protos)?,
        background_validation: generate_split(
            cfg,
            Split::BackgroundValidation,
            &bg_table,
            &bg_protos,
        )?,
        one_shot_test: generate_split(cfg, Split::OneShotTest, &digit_table, &digit_protos)?,
        config: cfg.clone(),
    })
}
