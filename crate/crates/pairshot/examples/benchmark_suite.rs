//! Full benchmark grid at desk scale: every model on the unimodal and
//! cross-modal one-shot tasks over a fixed-seed synthetic corpus, printed
//! as one table.
//!
//! Usage: cargo run --release --example benchmark_suite [sigma] [tau] [seeds]
//!
//! The defaults reproduce the shipped benchmark: the direct-feature
//! baseline lands mid-range, the trained embedding models beat it, and the
//! online-mined Siamese model comes out on top while training fastest.

use pairshot::error::Result;
use pairshot::eval::{OneShotModel, TaskKind};
use pairshot::experiment::{
    evaluate_models, format_report_table, load_data, train_embedding_model, DtwPixelsModel,
    ExperimentConfig, ModelKind,
};
use pairshot::synth::SyntheticConfig;

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let sigma: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(0.4);
    let tau: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(1.35);
    let seeds: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(2);

    let mut cfg = ExperimentConfig {
        episodes: 150,
        queries: 10,
        seeds,
        margin: 2.0,
        base_lr: 5e-4,
        batch_size: 32,
        hidden_units: 128,
        embed_dim: 128,
        threads: 4,
        synth: SyntheticConfig {
            background_classes: 20,
            speakers: 32,
            examples_per_class: 32,
            feature_dim: 8,
            frames: 20,
            image_height: 8,
            image_width: 8,
            noise_sigma: sigma,
            speaker_offset_tau: tau,
            seed: 1234,
        },
        ..ExperimentConfig::default()
    };

    let data = load_data(&cfg)?;
    let tasks = [
        TaskKind::UnimodalSpeech,
        TaskKind::UnimodalVision,
        TaskKind::CrossModal,
    ];
    let models = [
        ModelKind::DtwPixels,
        ModelKind::FfnnClassifier,
        ModelKind::CnnClassifier,
        ModelKind::SiameseOffline,
        ModelKind::SiameseOnline,
    ];

    let mut rows = Vec::new();
    for model_kind in models {
        cfg.model = model_kind;
        cfg.classes_per_batch = 10;
        cfg.examples_per_class = 4;
        // Offline triplets carry a weaker per-step signal than mined ones
        // (random negatives stop violating the margin early), so the offline
        // variant gets several times more steps.
        if model_kind == ModelKind::SiameseOffline {
            cfg.steps_per_epoch = 50;
            cfg.epochs = 80;
        } else {
            cfg.steps_per_epoch = 25;
            cfg.epochs = 40;
        }

        let started = std::time::Instant::now();
        let trained: Vec<Box<dyn OneShotModel>> = if model_kind.is_neural() {
            (0..seeds as u64)
                .map(|seed| {
                    train_embedding_model(&cfg, &data, seed)
                        .map(|(m, _, _)| Box::new(m) as Box<dyn OneShotModel>)
                })
                .collect::<Result<_>>()?
        } else {
            (0..seeds)
                .map(|_| Box::new(DtwPixelsModel::default()) as Box<dyn OneShotModel>)
                .collect()
        };
        let train_time = started.elapsed().as_secs_f64();
        eprintln!("{:<18} trained {seeds} seeds in {train_time:.1}s", model_kind.as_str());
        let refs: Vec<&dyn OneShotModel> = trained.iter().map(|m| m.as_ref()).collect();

        for task in tasks {
            cfg.task = task;
            let report = evaluate_models(&cfg, &data, &refs)?;
            rows.push((
                model_kind.as_str().to_string(),
                task.as_str().to_string(),
                report.mean_accuracy,
                report.ci95_halfwidth,
            ));
        }
    }
    println!("\nsigma={sigma} tau={tau} seeds={seeds}");
    print!("{}", format_report_table(&rows));
    Ok(())
}
