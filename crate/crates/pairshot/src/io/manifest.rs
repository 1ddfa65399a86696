//! Dataset manifest: a structured text file listing classes, speakers, and
//! the per-split file references, plus the background/one-shot leakage
//! guard.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use crate::data::{ClassId, ClassTable, PairedDataset, PairedExample, SpeakerId};
use crate::error::{Error, Result};

pub const BACKGROUND_FAMILY: &str = "background";
pub const ONE_SHOT_FAMILY: &str = "one-shot-test";

pub const SPLIT_TAGS: [&str; 3] = ["background-train", "background-validation", "one-shot-test"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestClass {
    pub id: ClassId,
    pub name: String,
    pub image: ClassId,
    /// Class family: "background" or "one-shot-test".
    pub family: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestSplit {
    pub tag: String,
    pub audio: String,
    pub images: String,
    pub labels: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetManifest {
    pub feature_dim: usize,
    pub frames: usize,
    pub image_height: usize,
    pub image_width: usize,
    pub notes: Vec<String>,
    pub classes: Vec<ManifestClass>,
    pub speakers: Vec<(SpeakerId, String)>,
    pub splits: Vec<ManifestSplit>,
}

impl DatasetManifest {
    pub fn split(&self, tag: &str) -> Option<&ManifestSplit> {
        self.splits.iter().find(|s| s.tag == tag)
    }

    pub fn spoken_classes(&self, family: &str) -> BTreeSet<ClassId> {
        self.classes
            .iter()
            .filter(|c| c.family == family)
            .map(|c| c.id)
            .collect()
    }

    pub fn image_classes(&self, family: &str) -> BTreeSet<ClassId> {
        self.classes
            .iter()
            .filter(|c| c.family == family)
            .map(|c| c.image)
            .collect()
    }

    pub fn class_table(&self, family: &str) -> ClassTable {
        let mut table = ClassTable::new();
        for class in self.classes.iter().filter(|c| c.family == family) {
            table.insert(class.id, class.name.clone(), class.image);
        }
        table
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("pairshot-manifest v1\n");
        out.push_str(&format!("feature-dim: {}\n", self.feature_dim));
        out.push_str(&format!("frames: {}\n", self.frames));
        out.push_str(&format!(
            "image-size: {}x{}\n",
            self.image_height, self.image_width
        ));
        for note in &self.notes {
            out.push_str(&format!("note: {note}\n"));
        }
        for class in &self.classes {
            out.push_str(&format!(
                "class: id={} name={} image={} family={}\n",
                class.id, class.name, class.image, class.family
            ));
        }
        for (id, split) in &self.speakers {
            out.push_str(&format!("speaker: id={id} split={split}\n"));
        }
        for split in &self.splits {
            out.push_str(&format!(
                "split: tag={} audio={} images={} labels={}\n",
                split.tag, split.audio, split.images, split.labels
            ));
        }
        out
    }

    pub fn parse(text: &str) -> Result<DatasetManifest> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty manifest".into()))?;
        if header.trim() != "pairshot-manifest v1" {
            return Err(Error::Format(format!("bad manifest header '{header}'")));
        }
        let mut manifest = DatasetManifest::default();
        for (lineno, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, rest) = line.split_once(':').ok_or_else(|| {
                Error::Format(format!("manifest line {}: missing ':'", lineno + 2))
            })?;
            let rest = rest.trim();
            match key.trim() {
                "feature-dim" => manifest.feature_dim = parse_usize(rest, lineno)?,
                "frames" => manifest.frames = parse_usize(rest, lineno)?,
                "image-size" => {
                    let (h, w) = rest.split_once('x').ok_or_else(|| {
                        Error::Format(format!("manifest line {}: bad image-size", lineno + 2))
                    })?;
                    manifest.image_height = parse_usize(h, lineno)?;
                    manifest.image_width = parse_usize(w, lineno)?;
                }
                "note" => manifest.notes.push(rest.to_string()),
                "class" => {
                    let fields = parse_fields(rest, lineno)?;
                    manifest.classes.push(ManifestClass {
                        id: get_field(&fields, "id", lineno)?.parse().map_err(|_| {
                            Error::Format(format!("manifest line {}: bad class id", lineno + 2))
                        })?,
                        name: get_field(&fields, "name", lineno)?.to_string(),
                        image: get_field(&fields, "image", lineno)?.parse().map_err(|_| {
                            Error::Format(format!("manifest line {}: bad image id", lineno + 2))
                        })?,
                        family: get_field(&fields, "family", lineno)?.to_string(),
                    });
                }
                "speaker" => {
                    let fields = parse_fields(rest, lineno)?;
                    manifest.speakers.push((
                        get_field(&fields, "id", lineno)?.parse().map_err(|_| {
                            Error::Format(format!("manifest line {}: bad speaker id", lineno + 2))
                        })?,
                        get_field(&fields, "split", lineno)?.to_string(),
                    ));
                }
                "split" => {
                    let fields = parse_fields(rest, lineno)?;
                    manifest.splits.push(ManifestSplit {
                        tag: get_field(&fields, "tag", lineno)?.to_string(),
                        audio: get_field(&fields, "audio", lineno)?.to_string(),
                        images: get_field(&fields, "images", lineno)?.to_string(),
                        labels: get_field(&fields, "labels", lineno)?.to_string(),
                    });
                }
                other => {
                    return Err(Error::Format(format!(
                        "manifest line {}: unknown key '{other}'",
                        lineno + 2
                    )))
                }
            }
        }
        Ok(manifest)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<DatasetManifest> {
        DatasetManifest::parse(&fs::read_to_string(path)?)
    }
}

fn parse_usize(text: &str, lineno: usize) -> Result<usize> {
    text.trim()
        .parse()
        .map_err(|_| Error::Format(format!("manifest line {}: bad number '{text}'", lineno + 2)))
}

fn parse_fields(rest: &str, lineno: usize) -> Result<Vec<(&str, &str)>> {
    rest.split_whitespace()
        .map(|pair| {
            pair.split_once('=').ok_or_else(|| {
                Error::Format(format!("manifest line {}: bad field '{pair}'", lineno + 2))
            })
        })
        .collect()
}

fn get_field<'a>(fields: &[(&'a str, &'a str)], key: &str, lineno: usize) -> Result<&'a str> {
    fields
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| Error::Format(format!("manifest line {}: missing field '{key}'", lineno + 2)))
}

/// Background and one-shot class sets must be disjoint in both modalities.
/// Returns warnings (an empty background is vacuously disjoint but worth
/// flagging).
pub fn enforce_disjoint_splits(manifest: &DatasetManifest) -> Result<Vec<String>> {
    let bg_spoken = manifest.spoken_classes(BACKGROUND_FAMILY);
    let os_spoken = manifest.spoken_classes(ONE_SHOT_FAMILY);
    let spoken_overlap: Vec<ClassId> = bg_spoken.intersection(&os_spoken).copied().collect();
    if !spoken_overlap.is_empty() {
        return Err(Error::Leakage(format!(
            "spoken classes shared between background and one-shot splits: {spoken_overlap:?}"
        )));
    }
    let bg_images = manifest.image_classes(BACKGROUND_FAMILY);
    let os_images = manifest.image_classes(ONE_SHOT_FAMILY);
    let image_overlap: Vec<ClassId> = bg_images.intersection(&os_images).copied().collect();
    if !image_overlap.is_empty() {
        return Err(Error::Leakage(format!(
            "image classes shared between background and one-shot splits: {image_overlap:?}"
        )));
    }
    let mut warnings = Vec::new();
    if bg_spoken.is_empty() {
        warnings.push("background split has no classes (vacuous disjointness)".to_string());
    }
    Ok(warnings)
}

/// Load one split's paired dataset from its on-disk files: FSA1 audio plus
/// IDX images and labels, paired by index.
pub fn load_split(dir: &Path, manifest: &DatasetManifest, tag: &str) -> Result<PairedDataset> {
    let split = manifest
        .split(tag)
        .ok_or_else(|| Error::Format(format!("manifest has no split '{tag}'")))?;
    let family = if tag == ONE_SHOT_FAMILY {
        ONE_SHOT_FAMILY
    } else {
        BACKGROUND_FAMILY
    };
    let table = manifest.class_table(family);

    let audio = super::fsa::read_feature_archive(&dir.join(&split.audio))?;
    let raw_images = super::idx::read_idx_images(&dir.join(&split.images))?;
    let labels = super::idx::read_idx_labels(&dir.join(&split.labels))?;
    if raw_images.len() != labels.len() {
        return Err(Error::Format(format!(
            "split '{tag}': {} images but {} labels",
            raw_images.len(),
            labels.len()
        )));
    }
    if audio.len() != raw_images.len() {
        return Err(Error::Format(format!(
            "split '{tag}': {} audio items but {} images",
            audio.len(),
            raw_images.len()
        )));
    }
    let images = super::idx::attach_labels(raw_images, &labels)?;
    let mut pairs = Vec::with_capacity(audio.len());
    for (seq, img) in audio.into_iter().zip(images) {
        let normalized = crate::data::normalize_pixels(&img, 255.0)?;
        pairs.push(PairedExample::with_table(seq, normalized, &table)?);
    }
    Ok(PairedDataset {
        pairs,
        class_table: table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_manifest() -> DatasetManifest {
        DatasetManifest {
            feature_dim: 8,
            frames: 20,
            image_height: 28,
            image_width: 28,
            notes: vec!["pairing=index-aligned".into()],
            classes: vec![
                ManifestClass {
                    id: 0,
                    name: "zero".into(),
                    image: 0,
                    family: ONE_SHOT_FAMILY.into(),
                },
                ManifestClass {
                    id: 10,
                    name: "oh".into(),
                    image: 0,
                    family: ONE_SHOT_FAMILY.into(),
                },
                ManifestClass {
                    id: 11,
                    name: "bg-00".into(),
                    image: 11,
                    family: BACKGROUND_FAMILY.into(),
                },
            ],
            speakers: vec![(0, "background-train".into()), (2000, "one-shot-test".into())],
            splits: vec![ManifestSplit {
                tag: "background-train".into(),
                audio: "bg_train.fsa".into(),
                images: "bg_train_images.idx".into(),
                labels: "bg_train_labels.idx".into(),
            }],
        }
    }

    #[test]
    fn manifest_round_trips_through_text() {
        let manifest = sample_manifest();
        let text = manifest.to_text();
        let parsed = DatasetManifest::parse(&text).unwrap();
        assert_eq!(parsed, manifest);
    }

    #[test]
    fn disjoint_splits_pass() {
        let manifest = sample_manifest();
        let warnings = enforce_disjoint_splits(&manifest).unwrap();
        assert!(warnings.is_empty());
    }

    #[test]
    fn shared_class_is_named_in_the_error() {
        let mut manifest = sample_manifest();
        manifest.classes.push(ManifestClass {
            id: 10,
            name: "oh-leaked".into(),
            image: 40,
            family: BACKGROUND_FAMILY.into(),
        });
        let err = enforce_disjoint_splits(&manifest).unwrap_err();
        assert!(matches!(err, Error::Leakage(_)));
        assert!(err.to_string().contains("10"), "{err}");
    }

    #[test]
    fn shared_image_class_is_leakage_too() {
        let mut manifest = sample_manifest();
        manifest.classes.push(ManifestClass {
            id: 99,
            name: "bg-img-leak".into(),
            image: 0,
            family: BACKGROUND_FAMILY.into(),
        });
        assert!(matches!(
            enforce_disjoint_splits(&manifest).unwrap_err(),
            Error::Leakage(_)
        ));
    }

    #[test]
    fn empty_background_passes_with_warning() {
        let mut manifest = sample_manifest();
        manifest.classes.retain(|c| c.family == ONE_SHOT_FAMILY);
        let warnings = enforce_disjoint_splits(&manifest).unwrap();
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("vacuous"));
    }

    #[test]
    fn unknown_keys_and_bad_headers_are_format_errors() {
        assert!(DatasetManifest::parse("nonsense v9\n").is_err());
        assert!(
            DatasetManifest::parse("pairshot-manifest v1\nwhatever: 3\n").is_err()
        );
    }
}
