//! Generate a synthetic paired dataset and write it to disk: FSA1 feature
//! archives for the speech side, IDX containers for the image side, and a
//! manifest tying the splits together.
//!
//! Usage: cargo run --example generate_dataset [out_dir]

use pairshot::error::Result;
use pairshot::io::manifest::enforce_disjoint_splits;
use pairshot::experiment::write_synth_dataset;
use pairshot::synth::{generate_synthetic_pairs, SyntheticConfig};

fn main() -> Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "target/synth-demo".into());
    let out = std::path::PathBuf::from(out);

    let cfg = SyntheticConfig {
        noise_sigma: 0.4,
        speaker_offset_tau: 0.8,
        seed: 42,
        ..SyntheticConfig::default()
    };
    let dataset = generate_synthetic_pairs(&cfg)?;

    println!(
        "background-train:      {:4} pairs over {:2} classes",
        dataset.background_train.len(),
        dataset.background_train.spoken_classes().len()
    );
    println!(
        "background-validation: {:4} pairs over {:2} classes",
        dataset.background_validation.len(),
        dataset.background_validation.spoken_classes().len()
    );
    println!(
        "one-shot-test:         {:4} pairs over {:2} spoken classes",
        dataset.one_shot_test.len(),
        dataset.one_shot_test.spoken_classes().len()
    );
    for (id, name, image) in dataset.one_shot_test.class_table.entries() {
        println!("  spoken class {id:2} ({name}) depicts image class {image}");
    }

    let manifest = write_synth_dataset(&dataset, &out)?;
    manifest.save(&out.join("manifest.txt"))?;
    let warnings = enforce_disjoint_splits(&manifest)?;
    println!(
        "\nwrote {} ({} warnings); splits share no classes with the one-shot digits",
        out.join("manifest.txt").display(),
        warnings.len()
    );
    Ok(())
}
