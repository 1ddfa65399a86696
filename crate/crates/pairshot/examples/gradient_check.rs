//! Verify every layer's hand-derived gradients against central finite
//! differences, the way the test suite does.

use pairshot::error::Result;
use pairshot::network::{backward, forward, init_params, LayerSpec, NetworkSpec};
use pairshot::rng::Rng;
use pairshot::tensor::Tensor;

fn main() -> Result<()> {
    let spec = NetworkSpec::new(
        vec![2, 6, 7],
        vec![
            LayerSpec::Conv2d { filters: 4, kernel_h: 3, kernel_w: 3 },
            LayerSpec::Relu,
            LayerSpec::MaxPool2d { pool_h: 2, pool_w: 2 },
            LayerSpec::Flatten,
            LayerSpec::Affine { units: 8 },
            LayerSpec::Relu,
            LayerSpec::Affine { units: 3 },
        ],
    )?;
    println!("layer stack:");
    for (i, shape) in spec.layer_shapes().iter().enumerate() {
        if i == 0 {
            println!("  input        {shape:?}");
        } else {
            println!("  layer {:<2}     {shape:?}", i - 1);
        }
    }

    let params = init_params(&spec, 7);
    let mut rng = Rng::new(3);
    let mut shape = vec![2];
    shape.extend_from_slice(spec.input_shape());
    let batch = Tensor::from_vec(
        &shape,
        (0..shape.iter().product::<usize>())
            .map(|_| rng.next_normal())
            .collect(),
    )?;

    // Scalar readout: L = sum of 0.5 y^2, so dL/dy = y.
    let loss = |p: &pairshot::network::NetworkParams| -> f64 {
        let acts = forward(&spec, p, &batch).unwrap();
        acts.output().data().iter().map(|v| 0.5 * v * v).sum()
    };
    let acts = forward(&spec, &params, &batch)?;
    let out_grad = acts.output().clone();
    let (grads, _) = backward(&spec, &params, &acts, &out_grad)?;

    let step = 1e-5;
    let mut worst: f64 = 0.0;
    let flat: Vec<f64> = grads
        .tensors()
        .iter()
        .flat_map(|t| t.data().iter().copied())
        .collect();
    let mut idx = 0;
    for t in 0..params.tensors().len() {
        for i in 0..params.tensors()[t].len() {
            let mut plus = params.clone();
            plus.tensors_mut()[t].data_mut()[i] += step;
            let mut minus = params.clone();
            minus.tensors_mut()[t].data_mut()[i] -= step;
            let numeric = (loss(&plus) - loss(&minus)) / (2.0 * step);
            let analytic = flat[idx];
            idx += 1;
            let denom = numeric.abs().max(analytic.abs()).max(1e-6);
            worst = worst.max((numeric - analytic).abs() / denom);
        }
    }
    println!(
        "\nchecked {} parameters: max relative error vs central differences = {:.3e}",
        idx, worst
    );
    assert!(worst < 1e-4);
    println!("all gradients within 1e-4 of the numerical reference");
    Ok(())
}
