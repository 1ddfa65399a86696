//! Minimal differentiable embedding/classifier networks with hand-derived
//! gradients.
//!
//! The layer set is closed: affine, ReLU, valid-padding 2-D convolution,
//! max-pooling, and flatten. That covers the feedforward and convolutional
//! architectures used for both classifier transfer and Siamese training,
//! and keeps every gradient checkable against finite differences.
//!
//! Shapes are per-item; batches add a leading axis. An affine layer wants a
//! rank-1 item, a convolution wants [channels, height, width].

mod adam;
mod checkpoint;
mod presets;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, spec_digest};
pub use presets::{
    ffnn_embedder, small_classifier, small_cnn_embedder, small_embedder, speech_cnn_embedder,
    vision_cnn_embedder, with_classifier_head,
};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LayerSpec {
    Affine { units: usize },
    Relu,
    Conv2d { filters: usize, kernel_h: usize, kernel_w: usize },
    MaxPool2d { pool_h: usize, pool_w: usize },
    Flatten,
}

impl LayerSpec {
    /// Per-item output shape for a given per-item input shape.
    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match self {
            LayerSpec::Affine { units } => {
                if input.len() != 1 {
                    return Err(Error::invalid(format!(
                        "affine layer needs a rank-1 input, got {input:?}"
                    )));
                }
                if *units == 0 {
                    return Err(Error::invalid("affine layer needs units >= 1"));
                }
                Ok(vec![*units])
            }
            LayerSpec::Relu => Ok(input.to_vec()),
            LayerSpec::Conv2d {
                filters,
                kernel_h,
                kernel_w,
            } => {
                let [c, h, w] = rank3(input, "conv2d")?;
                let _ = c;
                if *filters == 0 || *kernel_h == 0 || *kernel_w == 0 {
                    return Err(Error::invalid("conv2d needs positive filter dimensions"));
                }
                if *kernel_h > h || *kernel_w > w {
                    return Err(Error::invalid(format!(
                        "conv2d kernel {}x{} larger than input {}x{}",
                        kernel_h, kernel_w, h, w
                    )));
                }
                Ok(vec![*filters, h - kernel_h + 1, w - kernel_w + 1])
            }
            LayerSpec::MaxPool2d { pool_h, pool_w } => {
                let [c, h, w] = rank3(input, "maxpool2d")?;
                if *pool_h == 0 || *pool_w == 0 || *pool_h > h || *pool_w > w {
                    return Err(Error::invalid(format!(
                        "maxpool2d {}x{} incompatible with input {}x{}",
                        pool_h, pool_w, h, w
                    )));
                }
                Ok(vec![c, h / pool_h, w / pool_w])
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
        }
    }

    /// Shapes of (weights, bias) for parametric layers.
    fn param_shapes(&self, input: &[usize]) -> Option<(Vec<usize>, Vec<usize>)> {
        match self {
            LayerSpec::Affine { units } => Some((vec![input[0], *units], vec![*units])),
            LayerSpec::Conv2d {
                filters,
                kernel_h,
                kernel_w,
            } => Some((vec![*filters, input[0], *kernel_h, *kernel_w], vec![*filters])),
            _ => None,
        }
    }
}

fn rank3(shape: &[usize], who: &str) -> Result<[usize; 3]> {
    if shape.len() != 3 {
        return Err(Error::invalid(format!(
            "{who} needs a [channels, height, width] input, got {shape:?}"
        )));
    }
    Ok([shape[0], shape[1], shape[2]])
}

/// A validated layer stack: consecutive shapes compose and the designated
/// embedding layer produces a rank-1 item.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkSpec {
    input_shape: Vec<usize>,
    layers: Vec<LayerSpec>,
    embed_layer: usize,
    shapes: Vec<Vec<usize>>, // shapes[0] = input, shapes[i+1] = output of layer i
}

impl NetworkSpec {
    /// Build a spec whose embedding is the final layer's output.
    pub fn new(input_shape: Vec<usize>, layers: Vec<LayerSpec>) -> Result<Self> {
        let embed = layers.len().saturating_sub(1);
        NetworkSpec::with_embed_layer(input_shape, layers, embed)
    }

    /// Build a spec with an explicit embedding layer index (the output of
    /// `layers[embed_layer]` is the embedding; classifiers point this at the
    /// final hidden layer in front of the softmax head).
    pub fn with_embed_layer(
        input_shape: Vec<usize>,
        layers: Vec<LayerSpec>,
        embed_layer: usize,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("a network needs at least one layer"));
        }
        if input_shape.is_empty() || input_shape.contains(&0) {
            return Err(Error::invalid(format!("bad input shape {input_shape:?}")));
        }
        if embed_layer >= layers.len() {
            return Err(Error::invalid(format!(
                "embed layer index {} out of range for {} layers",
                embed_layer,
                layers.len()
            )));
        }
        let mut shapes = vec![input_shape.clone()];
        for layer in &layers {
            let next = layer.output_shape(shapes.last().unwrap())?;
            shapes.push(next);
        }
        Ok(NetworkSpec {
            input_shape,
            layers,
            embed_layer,
            shapes,
        })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn embed_layer(&self) -> usize {
        self.embed_layer
    }

    pub fn output_shape(&self) -> &[usize] {
        self.shapes.last().unwrap()
    }

    /// Flattened length of one embedding vector.
    pub fn embedding_dim(&self) -> usize {
        self.shapes[self.embed_layer + 1].iter().product()
    }

    /// Per-layer output shapes, input first.
    pub fn layer_shapes(&self) -> &[Vec<usize>] {
        &self.shapes
    }

    pub fn param_shapes(&self) -> Vec<Option<(Vec<usize>, Vec<usize>)>> {
        self.layers
            .iter()
            .enumerate()
            .map(|(i, layer)| layer.param_shapes(&self.shapes[i]))
            .collect()
    }
}

/// Per-layer weight and bias tensors. Layers without parameters hold None.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    layers: Vec<Option<(Tensor, Tensor)>>,
}

impl NetworkParams {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        let layers = spec
            .param_shapes()
            .into_iter()
            .map(|shapes| shapes.map(|(w, b)| (Tensor::zeros(&w), Tensor::zeros(&b))))
            .collect();
        NetworkParams { layers }
    }

    pub fn layer(&self, i: usize) -> Option<&(Tensor, Tensor)> {
        self.layers[i].as_ref()
    }

    pub fn layer_mut(&mut self, i: usize) -> Option<&mut (Tensor, Tensor)> {
        self.layers[i].as_mut()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Weight and bias tensors in layer order.
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for layer in self.layers.iter().flatten() {
            out.push(&layer.0);
            out.push(&layer.1);
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for layer in self.layers.iter_mut().flatten() {
            out.push(&mut layer.0);
            out.push(&mut layer.1);
        }
        out
    }

    pub fn num_values(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    fn matches_spec(&self, spec: &NetworkSpec) -> bool {
        let expect = spec.param_shapes();
        if expect.len() != self.layers.len() {
            return false;
        }
        expect.iter().zip(&self.layers).all(|(e, got)| match (e, got) {
            (None, None) => true,
            (Some((w, b)), Some((gw, gb))) => gw.shape() == &w[..] && gb.shape() == &b[..],
            _ => false,
        })
    }
}

/// Seeded uniform initialization in ±sqrt(6 / (fan_in + fan_out)).
pub fn init_params(spec: &NetworkSpec, seed: u64) -> NetworkParams {
    let mut rng = Rng::stream(seed, &[0x696e_6974]);
    let mut layers = Vec::with_capacity(spec.layers.len());
    for (i, layer) in spec.layers.iter().enumerate() {
        match layer.param_shapes(&spec.shapes[i]) {
            None => layers.push(None),
            Some((w_shape, b_shape)) => {
                let (fan_in, fan_out) = match layer {
                    LayerSpec::Affine { units } => (spec.shapes[i][0], *units),
                    LayerSpec::Conv2d {
                        filters,
                        kernel_h,
                        kernel_w,
                    } => (
                        spec.shapes[i][0] * kernel_h * kernel_w,
                        filters * kernel_h * kernel_w,
                    ),
                    _ => unreachable!(),
                };
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let mut weights = Tensor::zeros(&w_shape);
                for v in weights.data_mut() {
                    *v = (2.0 * rng.next_f64() - 1.0) * bound;
                }
                layers.push(Some((weights, Tensor::zeros(&b_shape))));
            }
        }
    }
    NetworkParams { layers }
}

/// Forward-pass record: the input, every layer output, and the max-pool
/// argmax bookkeeping backward needs.
#[derive(Clone, Debug)]
pub struct Activations {
    tensors: Vec<Tensor>,
    pool_argmax: Vec<Option<Vec<usize>>>,
}

impl Activations {
    pub fn output(&self) -> &Tensor {
        self.tensors.last().unwrap()
    }

    pub fn layer_output(&self, layer: usize) -> &Tensor {
        &self.tensors[layer + 1]
    }

    pub fn embedding(&self, spec: &NetworkSpec) -> &Tensor {
        self.layer_output(spec.embed_layer())
    }
}

fn batch_shape(n: usize, item: &[usize]) -> Vec<usize> {
    let mut s = Vec::with_capacity(item.len() + 1);
    s.push(n);
    s.extend_from_slice(item);
    s
}

/// Run a batch through the network, keeping all intermediate activations.
pub fn forward(spec: &NetworkSpec, params: &NetworkParams, batch: &Tensor) -> Result<Activations> {
    if !params.matches_spec(spec) {
        return Err(Error::invalid("parameters do not match the network spec"));
    }
    if batch.shape().len() != spec.input_shape.len() + 1
        || batch.shape()[1..] != spec.input_shape[..]
    {
        return Err(Error::invalid(format!(
            "batch shape {:?} does not match spec input {:?}",
            batch.shape(),
            spec.input_shape
        )));
    }
    let n = batch.rows();
    let mut tensors = vec![batch.clone()];
    let mut pool_argmax = Vec::with_capacity(spec.layers.len());
    for (i, layer) in spec.layers.iter().enumerate() {
        let input = tensors.last().unwrap();
        let out_shape = batch_shape(n, &spec.shapes[i + 1]);
        let (output, argmax) = match layer {
            LayerSpec::Affine { units } => {
                let (w, b) = params.layer(i).unwrap();
                (affine_forward(input, w, b, *units), None)
            }
            LayerSpec::Relu => {
                let mut out = input.clone();
                for v in out.data_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
                (out, None)
            }
            LayerSpec::Conv2d { .. } => {
                let (w, b) = params.layer(i).unwrap();
                (conv2d_forward(input, w, b, &spec.shapes[i], &spec.shapes[i + 1]), None)
            }
            LayerSpec::MaxPool2d { pool_h, pool_w } => {
                let (out, argmax) =
                    maxpool_forward(input, *pool_h, *pool_w, &spec.shapes[i], &spec.shapes[i + 1]);
                (out, Some(argmax))
            }
            LayerSpec::Flatten => (input.reshaped(&out_shape)?, None),
        };
        debug_assert_eq!(output.shape(), &out_shape[..]);
        tensors.push(output);
        pool_argmax.push(argmax);
    }
    Ok(Activations {
        tensors,
        pool_argmax,
    })
}

/// Backpropagate a gradient of the scalar loss with respect to the network
/// output, producing parameter gradients (same structure as the parameters)
/// and the gradient with respect to the input batch.
pub fn backward(
    spec: &NetworkSpec,
    params: &NetworkParams,
    acts: &Activations,
    output_gradient: &Tensor,
) -> Result<(NetworkParams, Tensor)> {
    if acts.tensors.len() != spec.layers.len() + 1 {
        return Err(Error::invalid("activations do not match the network spec"));
    }
    if output_gradient.shape() != acts.output().shape() {
        return Err(Error::invalid(format!(
            "output gradient shape {:?} does not match output {:?}",
            output_gradient.shape(),
            acts.output().shape()
        )));
    }
    let mut grads = NetworkParams::zeros(spec);
    let mut upstream = output_gradient.clone();
    for (i, layer) in spec.layers.iter().enumerate().rev() {
        let input = &acts.tensors[i];
        let output = &acts.tensors[i + 1];
        upstream = match layer {
            LayerSpec::Affine { .. } => {
                let (w, _) = params.layer(i).unwrap();
                let (dw, db, dx) = affine_backward(input, w, &upstream);
                *grads.layer_mut(i).unwrap() = (dw, db);
                dx
            }
            LayerSpec::Relu => {
                let mut dx = upstream;
                for (g, &y) in dx.data_mut().iter_mut().zip(output.data()) {
                    if y <= 0.0 {
                        *g = 0.0;
                    }
                }
                dx
            }
            LayerSpec::Conv2d { .. } => {
                let (w, _) = params.layer(i).unwrap();
                let (dw, db, dx) =
                    conv2d_backward(input, w, &upstream, &spec.shapes[i], &spec.shapes[i + 1]);
                *grads.layer_mut(i).unwrap() = (dw, db);
                dx
            }
            LayerSpec::MaxPool2d { .. } => {
                let argmax = acts.pool_argmax[i].as_ref().unwrap();
                let mut dx = Tensor::zeros(input.shape());
                for (out_idx, &in_idx) in argmax.iter().enumerate() {
                    dx.data_mut()[in_idx] += upstream.data()[out_idx];
                }
                dx
            }
            LayerSpec::Flatten => upstream.reshaped(input.shape())?,
        };
    }
    Ok((grads, upstream))
}

/// Embedding vectors for a batch: the activations of the designated
/// embedding layer (penultimate for classifiers, final for Siamese nets).
pub fn embed(spec: &NetworkSpec, params: &NetworkParams, batch: &Tensor) -> Result<Tensor> {
    let acts = forward(spec, params, batch)?;
    Ok(acts.embedding(spec).clone())
}

/// Mean softmax cross-entropy over a batch of logits plus its gradient with
/// respect to the logits: (softmax − one-hot) / n.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    if logits.shape().len() != 2 {
        return Err(Error::invalid("logits must be [batch, classes]"));
    }
    let n = logits.rows();
    let classes = logits.row_len();
    if labels.len() != n {
        return Err(Error::invalid(format!(
            "{} labels for a batch of {}",
            labels.len(),
            n
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::invalid(format!(
            "label {} out of range for {} classes",
            bad, classes
        )));
    }
    let mut loss = 0.0;
    let mut grad = Tensor::zeros(logits.shape());
    for r in 0..n {
        let row = logits.row(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut denom = 0.0;
        for &v in row {
            denom += (v - max).exp();
        }
        let log_denom = denom.ln();
        loss += -(row[labels[r]] - max - log_denom);
        let grow = grad.row_mut(r);
        for c in 0..classes {
            grow[c] = ((row[c] - max).exp() / denom) / n as f64;
        }
        grow[labels[r]] -= 1.0 / n as f64;
    }
    Ok((loss / n as f64, grad))
}

#[allow(clippy::needless_range_loop)]
fn affine_forward(input: &Tensor, w: &Tensor, b: &Tensor, units: usize) -> Tensor {
    let n = input.rows();
    let fin = input.row_len();
    let mut out = Tensor::zeros(&[n, units]);
    for r in 0..n {
        let x = input.row(r);
        let y = out.row_mut(r);
        y.copy_from_slice(b.data());
        for i in 0..fin {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            let wrow = &w.data()[i * units..(i + 1) * units];
            for j in 0..units {
                y[j] += xi * wrow[j];
            }
        }
    }
    out
}

#[allow(clippy::needless_range_loop)]
fn affine_backward(input: &Tensor, w: &Tensor, upstream: &Tensor) -> (Tensor, Tensor, Tensor) {
    let n = input.rows();
    let fin = input.row_len();
    let units = upstream.row_len();
    let mut dw = Tensor::zeros(&[fin, units]);
    let mut db = Tensor::zeros(&[units]);
    let mut dx = Tensor::zeros(input.shape());
    for r in 0..n {
        let x = input.row(r);
        let g = upstream.row(r);
        for j in 0..units {
            db.data_mut()[j] += g[j];
        }
        for i in 0..fin {
            let xi = x[i];
            let wrow = &w.data()[i * units..(i + 1) * units];
            let dwrow = &mut dw.data_mut()[i * units..(i + 1) * units];
            let mut acc = 0.0;
            for j in 0..units {
                dwrow[j] += xi * g[j];
                acc += wrow[j] * g[j];
            }
            dx.row_mut(r)[i] = acc;
        }
    }
    (dw, db, dx)
}

fn conv2d_forward(
    input: &Tensor,
    w: &Tensor,
    b: &Tensor,
    in_shape: &[usize],
    out_shape: &[usize],
) -> Tensor {
    let n = input.rows();
    let (c_in, h, width) = (in_shape[0], in_shape[1], in_shape[2]);
    let (filters, oh, ow) = (out_shape[0], out_shape[1], out_shape[2]);
    let kh = h - oh + 1;
    let kw = width - ow + 1;
    let mut out = Tensor::zeros(&batch_shape(n, out_shape));
    for r in 0..n {
        let x = input.row(r);
        let y = out.row_mut(r);
        for f in 0..filters {
            let bias = b.data()[f];
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = bias;
                    for ci in 0..c_in {
                        for dy in 0..kh {
                            let in_base = ci * h * width + (oy + dy) * width + ox;
                            let w_base = ((f * c_in + ci) * kh + dy) * kw;
                            for dx in 0..kw {
                                acc += x[in_base + dx] * w.data()[w_base + dx];
                            }
                        }
                    }
                    y[f * oh * ow + oy * ow + ox] = acc;
                }
            }
        }
    }
    out
}

fn conv2d_backward(
    input: &Tensor,
    w: &Tensor,
    upstream: &Tensor,
    in_shape: &[usize],
    out_shape: &[usize],
) -> (Tensor, Tensor, Tensor) {
    let n = input.rows();
    let (c_in, h, width) = (in_shape[0], in_shape[1], in_shape[2]);
    let (filters, oh, ow) = (out_shape[0], out_shape[1], out_shape[2]);
    let kh = h - oh + 1;
    let kw = width - ow + 1;
    let mut dw = Tensor::zeros(w.shape());
    let mut db = Tensor::zeros(&[filters]);
    let mut dx = Tensor::zeros(input.shape());
    for r in 0..n {
        let x = input.row(r);
        let g = upstream.row(r);
        let dxr_offset = r * dx.row_len();
        for f in 0..filters {
            for oy in 0..oh {
                for ox in 0..ow {
                    let gv = g[f * oh * ow + oy * ow + ox];
                    if gv == 0.0 {
                        continue;
                    }
                    db.data_mut()[f] += gv;
                    for ci in 0..c_in {
                        for dy in 0..kh {
                            let in_base = ci * h * width + (oy + dy) * width + ox;
                            let w_base = ((f * c_in + ci) * kh + dy) * kw;
                            for dxk in 0..kw {
                                dw.data_mut()[w_base + dxk] += gv * x[in_base + dxk];
                                dx.data_mut()[dxr_offset + in_base + dxk] +=
                                    gv * w.data()[w_base + dxk];
                            }
                        }
                    }
                }
            }
        }
    }
    (dw, db, dx)
}

fn maxpool_forward(
    input: &Tensor,
    pool_h: usize,
    pool_w: usize,
    in_shape: &[usize],
    out_shape: &[usize],
) -> (Tensor, Vec<usize>) {
    let n = input.rows();
    let (c, h, width) = (in_shape[0], in_shape[1], in_shape[2]);
    let (oc, oh, ow) = (out_shape[0], out_shape[1], out_shape[2]);
    debug_assert_eq!(c, oc);
    let mut out = Tensor::zeros(&batch_shape(n, out_shape));
    let mut argmax = vec![0usize; out.len()];
    let item_len = input.row_len();
    for r in 0..n {
        let x = input.row(r);
        for ci in 0..c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = 0usize;
                    for dy in 0..pool_h {
                        for dx in 0..pool_w {
                            let iy = oy * pool_h + dy;
                            let ix = ox * pool_w + dx;
                            let idx = ci * h * width + iy * width + ix;
                            if x[idx] > best {
                                best = x[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    let out_idx = r * (oc * oh * ow) + ci * oh * ow + oy * ow + ox;
                    out.data_mut()[out_idx] = best;
                    argmax[out_idx] = r * item_len + best_idx;
                }
            }
        }
    }
    (out, argmax)
}
