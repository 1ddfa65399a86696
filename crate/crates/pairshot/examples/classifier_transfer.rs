//! Classifier-transfer baseline: train softmax classifiers on background
//! classes, then reuse the final hidden layer as an embedding for one-shot
//! nearest-neighbor matching with cosine distance.

use pairshot::error::Result;
use pairshot::eval::{OneShotModel, TaskKind};
use pairshot::experiment::{
    evaluate_models, load_data, train_embedding_model, ExperimentConfig, ModelKind,
};
use pairshot::synth::SyntheticConfig;

fn main() -> Result<()> {
    let mut cfg = ExperimentConfig {
        model: ModelKind::FfnnClassifier,
        episodes: 200,
        seeds: 1,
        base_lr: 5e-4,
        epochs: 40,
        batch_size: 32,
        hidden_units: 128,
        embed_dim: 128,
        threads: 4,
        synth: SyntheticConfig {
            speakers: 32,
            examples_per_class: 32,
            image_height: 8,
            image_width: 8,
            noise_sigma: 0.4,
            speaker_offset_tau: 1.35,
            seed: 1234,
            ..SyntheticConfig::default()
        },
        ..ExperimentConfig::default()
    };
    let data = load_data(&cfg)?;
    println!(
        "background training set: {} pairs over {} classes (none are one-shot digits)",
        data.background_train.len(),
        data.background_train.spoken_classes().len()
    );

    let (model, speech_log, vision_log) = train_embedding_model(&cfg, &data, 0)?;
    for (tag, log) in [("speech", &speech_log), ("vision", &vision_log)] {
        let last = log.last().unwrap();
        println!(
            "{tag} classifier: {} epochs, loss {:.4}, background one-shot val {:.3}",
            log.len(),
            last.loss,
            last.val_accuracy.unwrap_or(f64::NAN)
        );
    }

    let refs: Vec<&dyn OneShotModel> = vec![&model];
    for task in [
        TaskKind::UnimodalSpeech,
        TaskKind::UnimodalVision,
        TaskKind::CrossModal,
    ] {
        cfg.task = task;
        let report = evaluate_models(&cfg, &data, &refs)?;
        println!(
            "{:<16} one-shot accuracy on unseen digits: {:.3}",
            task.as_str(),
            report.mean_accuracy
        );
    }
    Ok(())
}
