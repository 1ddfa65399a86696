//! Core types for both modalities plus canonicalization.
//!
//! A [`FeatureSequence`] is a variable-length matrix of per-frame feature
//! vectors (the "speech" side); an [`ImageGrid`] is a fixed H×W grid of
//! pixel intensities (the "vision" side). A [`PairedExample`] couples one of
//! each under co-occurrence supervision: the pair shares a class, and that
//! is the only label one-shot consumers may see.
//!
//! All types are immutable after construction; canonicalization operations
//! return new values.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Integer class label. Spoken and image classes live in separate id spaces
/// linked by a [`ClassTable`].
pub type ClassId = u32;
/// Speaker (or writer) provenance tag.
pub type SpeakerId = u32;

/// Variable-length sequence of fixed-dimension feature frames.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSequence {
    frames: Vec<f64>, // row-major, frame-major: frames[t * dim + i]
    dim: usize,
    class_id: ClassId,
    speaker_id: SpeakerId,
}

impl FeatureSequence {
    pub fn new(
        frames: Vec<Vec<f64>>,
        class_id: ClassId,
        speaker_id: SpeakerId,
    ) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::invalid("feature sequence needs at least one frame"))?;
        let dim = first.len();
        if dim == 0 {
            return Err(Error::invalid("feature frames must have dimension >= 1"));
        }
        let mut flat = Vec::with_capacity(frames.len() * dim);
        for (t, frame) in frames.iter().enumerate() {
            if frame.len() != dim {
                return Err(Error::invalid(format!(
                    "frame {} has dimension {}, expected {}",
                    t,
                    frame.len(),
                    dim
                )));
            }
            flat.extend_from_slice(frame);
        }
        Ok(FeatureSequence {
            frames: flat,
            dim,
            class_id,
            speaker_id,
        })
    }

    pub fn from_flat(
        flat: Vec<f64>,
        dim: usize,
        class_id: ClassId,
        speaker_id: SpeakerId,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("feature frames must have dimension >= 1"));
        }
        if flat.is_empty() || !flat.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "flat frame buffer of {} values is not a positive multiple of dim {}",
                flat.len(),
                dim
            )));
        }
        Ok(FeatureSequence {
            frames: flat,
            dim,
            class_id,
            speaker_id,
        })
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.frames[t * self.dim..(t + 1) * self.dim]
    }

    pub fn frames_flat(&self) -> &[f64] {
        &self.frames
    }

    /// Row-major (frame-major) flattened copy, length `num_frames * dim`.
    pub fn flattened(&self) -> Vec<f64> {
        self.frames.clone()
    }

    pub fn class_id(&self) -> ClassId {
        self.class_id
    }

    pub fn speaker_id(&self) -> SpeakerId {
        self.speaker_id
    }
}

/// Fixed-size grid of pixel intensities.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageGrid {
    pixels: Vec<f64>, // row-major
    height: usize,
    width: usize,
    class_id: ClassId,
    writer_id: Option<SpeakerId>,
}

impl ImageGrid {
    pub fn new(
        pixels: Vec<f64>,
        height: usize,
        width: usize,
        class_id: ClassId,
        writer_id: Option<SpeakerId>,
    ) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("image dimensions must be >= 1"));
        }
        if pixels.len() != height * width {
            return Err(Error::invalid(format!(
                "pixel buffer of {} values does not match {}x{} grid",
                pixels.len(),
                height,
                width
            )));
        }
        Ok(ImageGrid {
            pixels,
            height,
            width,
            class_id,
            writer_id,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixel(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn class_id(&self) -> ClassId {
        self.class_id
    }

    pub fn writer_id(&self) -> Option<SpeakerId> {
        self.writer_id
    }

    pub fn with_class(mut self, class_id: ClassId) -> Self {
        self.class_id = class_id;
        self
    }
}

/// Maps spoken class ids to image class ids and human-readable names.
///
/// The digit benchmark has 11 spoken classes but only 10 image classes:
/// "oh" and "zero" are distinct words that both depict image class 0.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ClassTable {
    names: BTreeMap<ClassId, String>,
    image_class: BTreeMap<ClassId, ClassId>,
}

impl ClassTable {
    pub fn new() -> Self {
        ClassTable::default()
    }

    pub fn insert(&mut self, spoken: ClassId, name: impl Into<String>, image: ClassId) {
        self.names.insert(spoken, name.into());
        self.image_class.insert(spoken, image);
    }

    /// Image class depicted by a spoken class; identity when unmapped.
    pub fn image_class_of(&self, spoken: ClassId) -> ClassId {
        self.image_class.get(&spoken).copied().unwrap_or(spoken)
    }

    pub fn name_of(&self, spoken: ClassId) -> Option<&str> {
        self.names.get(&spoken).map(String::as_str)
    }

    pub fn spoken_classes(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.image_class.keys().copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (ClassId, &str, ClassId)> + '_ {
        self.image_class.iter().map(move |(&spoken, &image)| {
            let name = self.names.get(&spoken).map(String::as_str).unwrap_or("");
            (spoken, name, image)
        })
    }

    pub fn len(&self) -> usize {
        self.image_class.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image_class.is_empty()
    }
}

/// One speech item and one image item sharing a class.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedExample {
    pub audio: FeatureSequence,
    pub image: ImageGrid,
}

impl PairedExample {
    /// Pair with literal class-id equality.
    pub fn new(audio: FeatureSequence, image: ImageGrid) -> Result<Self> {
        if audio.class_id() != image.class_id() {
            return Err(Error::invalid(format!(
                "pair classes differ: audio {} vs image {}",
                audio.class_id(),
                image.class_id()
            )));
        }
        Ok(PairedExample { audio, image })
    }

    /// Pair through a class table (spoken class may alias an image class).
    pub fn with_table(
        audio: FeatureSequence,
        image: ImageGrid,
        table: &ClassTable,
    ) -> Result<Self> {
        let expected = table.image_class_of(audio.class_id());
        if image.class_id() != expected {
            return Err(Error::invalid(format!(
                "pair classes inconsistent: spoken {} maps to image {}, got image {}",
                audio.class_id(),
                expected,
                image.class_id()
            )));
        }
        Ok(PairedExample { audio, image })
    }

    pub fn spoken_class(&self) -> ClassId {
        self.audio.class_id()
    }

    pub fn image_class(&self) -> ClassId {
        self.image.class_id()
    }

    pub fn speaker(&self) -> SpeakerId {
        self.audio.speaker_id()
    }
}

/// The one-shot training set: exactly `shots` pairs for each of `ways`
/// distinct classes. Items keep their source index into the originating
/// dataset so disjointness constraints can be checked by identity.
#[derive(Clone, Debug)]
pub struct SupportSet {
    items: Vec<(usize, PairedExample)>,
    ways: usize,
    shots: usize,
}

impl SupportSet {
    pub fn new(items: Vec<(usize, PairedExample)>, ways: usize, shots: usize) -> Result<Self> {
        if items.len() != ways * shots {
            return Err(Error::invalid(format!(
                "support set has {} items, expected ways*shots = {}",
                items.len(),
                ways * shots
            )));
        }
        let mut per_class: BTreeMap<ClassId, usize> = BTreeMap::new();
        for (_, pair) in &items {
            *per_class.entry(pair.spoken_class()).or_insert(0) += 1;
        }
        if per_class.len() != ways || per_class.values().any(|&n| n != shots) {
            return Err(Error::invalid(format!(
                "support set is not balanced: {} classes with counts {:?}, expected {} classes x {} shots",
                per_class.len(),
                per_class.values().collect::<Vec<_>>(),
                ways,
                shots
            )));
        }
        Ok(SupportSet { items, ways, shots })
    }

    pub fn ways(&self) -> usize {
        self.ways
    }

    pub fn shots(&self) -> usize {
        self.shots
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn source_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.items.iter().map(|(idx, _)| *idx)
    }

    pub fn pairs(&self) -> impl Iterator<Item = &PairedExample> + '_ {
        self.items.iter().map(|(_, pair)| pair)
    }

    pub fn pair(&self, i: usize) -> &PairedExample {
        &self.items[i].1
    }

    pub fn speakers(&self) -> Vec<SpeakerId> {
        self.items.iter().map(|(_, p)| p.speaker()).collect()
    }
}

/// Test-side pool of images the cross-modal query must be matched against.
#[derive(Clone, Debug)]
pub struct MatchingSet {
    items: Vec<(usize, ImageGrid)>,
}

impl MatchingSet {
    pub fn new(items: Vec<(usize, ImageGrid)>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::invalid("matching set must be non-empty"));
        }
        Ok(MatchingSet { items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn image(&self, i: usize) -> &ImageGrid {
        &self.items[i].1
    }

    pub fn images(&self) -> impl Iterator<Item = &ImageGrid> + '_ {
        self.items.iter().map(|(_, img)| img)
    }

    pub fn source_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.items.iter().map(|(idx, _)| *idx)
    }
}

/// A labelled pool of paired examples plus its class table. Both the episode
/// sampler and the synthetic generator speak this type.
#[derive(Clone, Debug, Default)]
pub struct PairedDataset {
    pub pairs: Vec<PairedExample>,
    pub class_table: ClassTable,
}

impl PairedDataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn spoken_classes(&self) -> Vec<ClassId> {
        let mut classes: Vec<ClassId> = self.pairs.iter().map(|p| p.spoken_class()).collect();
        classes.sort_unstable();
        classes.dedup();
        classes
    }

    pub fn indices_of_class(&self, class: ClassId) -> Vec<usize> {
        self.pairs
            .iter()
            .enumerate()
            .filter(|(_, p)| p.spoken_class() == class)
            .map(|(i, _)| i)
            .collect()
    }

    /// Canonicalize every audio sequence to `target_frames`.
    pub fn canonicalized(&self, target_frames: usize) -> Result<PairedDataset> {
        let mut pairs = Vec::with_capacity(self.pairs.len());
        for pair in &self.pairs {
            pairs.push(PairedExample {
                audio: canonicalize_sequence(&pair.audio, target_frames)?,
                image: pair.image.clone(),
            });
        }
        Ok(PairedDataset {
            pairs,
            class_table: self.class_table.clone(),
        })
    }
}

/// Center zero-pad or crop a sequence to exactly `target_frames` frames.
///
/// Padding splits evenly with the extra zero frame after the content; a crop
/// removes frames symmetrically with the extra removal from the end.
pub fn canonicalize_sequence(
    seq: &FeatureSequence,
    target_frames: usize,
) -> Result<FeatureSequence> {
    if target_frames == 0 {
        return Err(Error::invalid("target_frames must be >= 1"));
    }
    let len = seq.num_frames();
    let dim = seq.dim();
    if len == target_frames {
        return Ok(seq.clone());
    }
    let mut flat = Vec::with_capacity(target_frames * dim);
    if len < target_frames {
        let pad_total = target_frames - len;
        let pad_before = pad_total / 2;
        let pad_after = pad_total - pad_before;
        flat.extend(std::iter::repeat_n(0.0, pad_before * dim));
        flat.extend_from_slice(seq.frames_flat());
        flat.extend(std::iter::repeat_n(0.0, pad_after * dim));
    } else {
        let crop_total = len - target_frames;
        let crop_front = crop_total / 2;
        flat.extend_from_slice(
            &seq.frames_flat()[crop_front * dim..(crop_front + target_frames) * dim],
        );
    }
    FeatureSequence::from_flat(flat, dim, seq.class_id(), seq.speaker_id())
}

/// Scale raw pixel values into [0, 1] by dividing by `source_max`.
pub fn normalize_pixels(img: &ImageGrid, source_max: f64) -> Result<ImageGrid> {
    if source_max.is_nan() || source_max <= 0.0 {
        return Err(Error::invalid("source_max must be a positive real"));
    }
    let mut pixels = Vec::with_capacity(img.pixels().len());
    for (i, &p) in img.pixels().iter().enumerate() {
        if !(0.0..=source_max).contains(&p) {
            return Err(Error::invalid(format!(
                "pixel {} has value {} outside [0, {}]",
                i, p, source_max
            )));
        }
        pixels.push(p / source_max);
    }
    ImageGrid::new(pixels, img.height(), img.width(), img.class_id(), img.writer_id())
}

/// Complement every pixel: white-on-black becomes black-on-white.
pub fn invert_pixels(img: &ImageGrid) -> Result<ImageGrid> {
    let mut pixels = Vec::with_capacity(img.pixels().len());
    for (i, &p) in img.pixels().iter().enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!(
                "pixel {} has value {} outside [0, 1]; normalize first",
                i, p
            )));
        }
        pixels.push(1.0 - p);
    }
    ImageGrid::new(pixels, img.height(), img.width(), img.class_id(), img.writer_id())
}

/// Row-major flattening of a grid into a feature vector of length H*W.
pub fn flatten_image(img: &ImageGrid) -> Vec<f64> {
    img.pixels().to_vec()
}

/// Rebuild an H×W grid from a row-major vector.
pub fn unflatten_image(
    values: &[f64],
    height: usize,
    width: usize,
    class_id: ClassId,
) -> Result<ImageGrid> {
    ImageGrid::new(values.to_vec(), height, width, class_id, None)
}
