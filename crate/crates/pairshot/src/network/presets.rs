//! Named architecture presets.
//!
//! The full-size convolutional stacks mirror the benchmark architectures
//! (39-dim × 120-frame speech input, 28×28 images); the small presets are
//! what the fast test and benchmark configurations use.

use crate::error::Result;

use super::{LayerSpec, NetworkSpec};

/// Speech CNN embedder: a tall convolution collapses the feature axis, two
/// pooled convolution blocks cover time, then a wide fully-connected
/// embedding. Input is [1, feature_dim, frames].
pub fn speech_cnn_embedder(feature_dim: usize, frames: usize) -> Result<NetworkSpec> {
    NetworkSpec::new(
        vec![1, feature_dim, frames],
        vec![
            LayerSpec::Conv2d {
                filters: 128,
                kernel_h: feature_dim,
                kernel_w: 9,
            },
            LayerSpec::Relu,
            LayerSpec::MaxPool2d { pool_h: 1, pool_w: 3 },
            LayerSpec::Conv2d {
                filters: 128,
                kernel_h: 1,
                kernel_w: 10,
            },
            LayerSpec::Relu,
            LayerSpec::MaxPool2d {
                pool_h: 1,
                pool_w: (frames - 8) / 3 - 9,
            },
            LayerSpec::Flatten,
            LayerSpec::Affine { units: 2048 },
            LayerSpec::Relu,
        ],
    )
}

/// Vision CNN embedder for H×W single-channel images. The final
/// fully-connected layer is the embedding and carries no activation.
pub fn vision_cnn_embedder(height: usize, width: usize) -> Result<NetworkSpec> {
    NetworkSpec::new(
        vec![1, height, width],
        vec![
            LayerSpec::Conv2d { filters: 32, kernel_h: 3, kernel_w: 3 },
            LayerSpec::Relu,
            LayerSpec::MaxPool2d { pool_h: 2, pool_w: 2 },
            LayerSpec::Conv2d { filters: 64, kernel_h: 3, kernel_w: 3 },
            LayerSpec::Relu,
            LayerSpec::MaxPool2d { pool_h: 2, pool_w: 2 },
            LayerSpec::Conv2d { filters: 128, kernel_h: 3, kernel_w: 3 },
            LayerSpec::Relu,
            LayerSpec::Flatten,
            LayerSpec::Affine { units: 2048 },
            LayerSpec::Relu,
            LayerSpec::Affine { units: 1024 },
        ],
    )
}

/// Feedforward embedder: stacked fully-connected layers with ReLU between
/// them; the last layer is the embedding.
pub fn ffnn_embedder(input_dim: usize, units: usize, depth: usize) -> Result<NetworkSpec> {
    let mut layers = Vec::new();
    for i in 0..depth.max(1) {
        if i > 0 {
            layers.push(LayerSpec::Relu);
        }
        layers.push(LayerSpec::Affine { units });
    }
    NetworkSpec::new(vec![input_dim], layers)
}

/// Append a softmax-ready classification head. The embedding index moves to
/// the base network's final layer so `embed` returns the representation in
/// front of the class logits.
pub fn with_classifier_head(base: &NetworkSpec, classes: usize) -> Result<NetworkSpec> {
    let embed_layer = base.layers().len() - 1;
    let mut layers = base.layers().to_vec();
    layers.push(LayerSpec::Affine { units: classes });
    NetworkSpec::with_embed_layer(base.input_shape().to_vec(), layers, embed_layer)
}

/// Two-affine embedder sized for fast tests.
pub fn small_embedder(input_dim: usize, hidden: usize, embed_dim: usize) -> Result<NetworkSpec> {
    NetworkSpec::new(
        vec![input_dim],
        vec![
            LayerSpec::Affine { units: hidden },
            LayerSpec::Relu,
            LayerSpec::Affine { units: embed_dim },
        ],
    )
}

/// Compact convolutional embedder for [channels, height, width] inputs.
pub fn small_cnn_embedder(
    input_shape: [usize; 3],
    filters: usize,
    hidden: usize,
    embed_dim: usize,
) -> Result<NetworkSpec> {
    NetworkSpec::new(
        input_shape.to_vec(),
        vec![
            LayerSpec::Conv2d { filters, kernel_h: 3, kernel_w: 3 },
            LayerSpec::Relu,
            LayerSpec::MaxPool2d { pool_h: 2, pool_w: 2 },
            LayerSpec::Flatten,
            LayerSpec::Affine { units: hidden },
            LayerSpec::Relu,
            LayerSpec::Affine { units: embed_dim },
        ],
    )
}

/// Small classifier with the embedding taken after the last hidden ReLU.
pub fn small_classifier(input_dim: usize, hidden: usize, classes: usize) -> Result<NetworkSpec> {
    NetworkSpec::with_embed_layer(
        vec![input_dim],
        vec![
            LayerSpec::Affine { units: hidden },
            LayerSpec::Relu,
            LayerSpec::Affine { units: hidden },
            LayerSpec::Relu,
            LayerSpec::Affine { units: classes },
        ],
        3,
    )
}
