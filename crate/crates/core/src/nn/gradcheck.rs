//! Central finite-difference oracle for [`DenseNet::backward`].

use ndarray::{Array2, ArrayView2};

use super::DenseNet;
use crate::error::Result;

/// Default step of the central differences.
pub const FD_STEP: f64 = 1e-5;

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

fn objective(net: &DenseNet, batch: ArrayView2<f64>, upstream: ArrayView2<f64>) -> Result<f64> {
    let out = net.predict(batch)?;
    Ok((&out * &upstream).sum())
}

/// Largest relative error between the analytic gradient of
/// `sum <upstream, net(batch)>` and central differences with step `h`, over
/// every parameter and every input coordinate.
pub fn max_relative_error(net: &DenseNet, batch: ArrayView2<f64>, upstream: ArrayView2<f64>, h: f64, floor: f64) -> Result<f64> {
    let (_, cache) = net.forward(batch)?;
    let grads = net.backward(&cache, upstream)?;
    let mut worst: f64 = 0.0;

    let params = net.flat_params();
    let mut probe = net.clone();
    for (i, g) in grads.flat_params().into_iter().enumerate() {
        let mut p = params.clone();
        p[i] = params[i] + h;
        probe.set_flat_params(&p)?;
        let up = objective(&probe, batch, upstream)?;
        p[i] = params[i] - h;
        probe.set_flat_params(&p)?;
        let down = objective(&probe, batch, upstream)?;
        worst = worst.max(relative_error(g, (up - down) / (2.0 * h), floor));
    }

    let mut x: Array2<f64> = batch.to_owned();
    for ((r, c), &g) in grads.d_input.indexed_iter() {
        let v = x[[r, c]];
        x[[r, c]] = v + h;
        let up = objective(net, x.view(), upstream)?;
        x[[r, c]] = v - h;
        let down = objective(net, x.view(), upstream)?;
        x[[r, c]] = v;
        worst = worst.max(relative_error(g, (up - down) / (2.0 * h), floor));
    }
    Ok(worst)
}
