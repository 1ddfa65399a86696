//! Walk through one evaluation episode step by step: the multimodal support
//! set, the matching set, a spoken query, and the two-stage cross-modal
//! retrieval that answers it.

use pairshot::dtw::{dtw_distance, DtwConfig};
use pairshot::error::Result;
use pairshot::eval::{cross_modal_match, sample_episode, EpisodeConfig};
use pairshot::experiment::{load_data, ExperimentConfig};
use pairshot::metric::cosine_distance;
use pairshot::synth::SyntheticConfig;

fn main() -> Result<()> {
    let cfg = ExperimentConfig {
        synth: SyntheticConfig {
            noise_sigma: 0.3,
            speaker_offset_tau: 0.5,
            seed: 11,
            ..SyntheticConfig::default()
        },
        ..ExperimentConfig::default()
    };
    let data = load_data(&cfg)?;
    let test = &data.one_shot_test;

    let episode_cfg = EpisodeConfig::default();
    let episode = sample_episode(test, &episode_cfg, 2024)?;

    println!("support set ({} ways x {} shot):", episode.support.ways(), episode.support.shots());
    for pair in episode.support.pairs() {
        println!(
            "  spoken class {:2} ({:>5}) by speaker {:4}  paired with image class {}",
            pair.spoken_class(),
            test.class_table.name_of(pair.spoken_class()).unwrap_or("?"),
            pair.speaker(),
            pair.image_class(),
        );
    }

    println!("\nmatching set ({} images, one per image class):", episode.matching.len());
    let classes: Vec<String> = episode
        .matching
        .images()
        .map(|img| img.class_id().to_string())
        .collect();
    println!("  image classes: [{}]", classes.join(", "));

    let dtw_cfg = DtwConfig::default();
    let speech = |a: &pairshot::FeatureSequence, b: &pairshot::FeatureSequence| {
        dtw_distance(a, b, &dtw_cfg).unwrap()
    };
    let image = |a: &pairshot::ImageGrid, b: &pairshot::ImageGrid| {
        cosine_distance(a.pixels(), b.pixels()).unwrap()
    };

    println!("\nqueries (speaker never appears in the support set):");
    let mut correct = 0;
    for &q in &episode.query_indices {
        let query = &test.pairs[q];
        let predicted = cross_modal_match(
            &query.audio,
            &episode.support,
            &episode.matching,
            speech,
            image,
        )?;
        let predicted_class = episode.matching.image(predicted).class_id();
        let truth = test.class_table.image_class_of(query.spoken_class());
        let ok = predicted_class == truth;
        correct += ok as usize;
        println!(
            "  \"{}\" by speaker {:4} -> matching item {} (image class {}) {}",
            test.class_table.name_of(query.spoken_class()).unwrap_or("?"),
            query.speaker(),
            predicted,
            predicted_class,
            if ok { "correct" } else { "wrong" },
        );
    }
    println!(
        "\nepisode accuracy with the direct-feature baseline: {}/{}",
        correct,
        episode.query_indices.len()
    );
    Ok(())
}
