use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    #[default]
    Identity,
}

/// Layer layout of a [`DenseNet`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub output_dim: usize,
    #[serde(default)]
    pub output_activation: OutputActivation,
}

impl NetworkSpec {
    pub fn new(input_dim: usize, hidden_widths: Vec<usize>, output_dim: usize) -> Result<Self> {
        let spec = NetworkSpec {
            input_dim,
            hidden_widths,
            output_dim,
            output_activation: OutputActivation::Identity,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_widths.contains(&0) {
            return Err(Error::Config(format!(
                "network dimensions must all be >= 1, got {:?}",
                self.widths()
            )));
        }
        Ok(())
    }

    /// `[input, hidden..., output]`.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden_widths.len() + 2);
        w.push(self.input_dim);
        w.extend_from_slice(&self.hidden_widths);
        w.push(self.output_dim);
        w
    }

    /// Number of hidden layers.
    pub fn depth(&self) -> usize {
        self.hidden_widths.len()
    }

    /// Maximum hidden width (0 for a purely linear map).
    pub fn width(&self) -> usize {
        self.hidden_widths.iter().copied().max().unwrap_or(0)
    }

    /// Total number of weights and biases, `sum (w_i + 1) * w_{i+1}`.
    pub fn parameter_count(&self) -> usize {
        self.widths().windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }
}

/// A dense ReLU network. `weights[i]` maps layer `i` to layer `i + 1` and has
/// shape `(w_{i+1}, w_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    spec: NetworkSpec,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

/// Activations recorded by [`DenseNet::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    widths: Vec<usize>,
    /// Input to each layer: `inputs[0]` is the batch, `inputs[i]` the ReLU
    /// output of hidden layer `i`.
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of the hidden layers.
    pre_activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.inputs[0].nrows()
    }
}

/// Gradients of `sum_rows <upstream, output>`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub d_weights: Vec<Array2<f64>>,
    pub d_biases: Vec<Array1<f64>>,
    pub d_input: Array2<f64>,
}

impl GradientBundle {
    /// Parameter gradients in the same flat order as [`DenseNet::flat_params`].
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.d_weights.iter().zip(&self.d_biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    /// Accumulate another bundle's parameter gradients into this one.
    /// `d_input` is left untouched since the two batches generally differ.
    pub fn add_params(&mut self, other: &GradientBundle) {
        for (a, b) in self.d_weights.iter_mut().zip(&other.d_weights) {
            *a += b;
        }
        for (a, b) in self.d_biases.iter_mut().zip(&other.d_biases) {
            *a += b;
        }
    }

    pub fn scale_params(&mut self, factor: f64) {
        for w in &mut self.d_weights {
            w.mapv_inplace(|v| v * factor);
        }
        for b in &mut self.d_biases {
            b.mapv_inplace(|v| v * factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.d_weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.d_biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
            && self.d_input.iter().all(|v| v.is_finite())
    }
}

impl DenseNet {
    /// He-normal weights `N(0, 2 / fan_in)` and zero biases.
    pub fn init(spec: NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = rng_from(seed);
        let widths = spec.widths();
        let mut weights = Vec::with_capacity(widths.len() - 1);
        let mut biases = Vec::with_capacity(widths.len() - 1);
        for pair in widths.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt())
                .expect("positive standard deviation");
            weights.push(Array2::from_shape_simple_fn((fan_out, fan_in), || {
                normal.sample(&mut rng)
            }));
            biases.push(Array1::zeros(fan_out));
        }
        Ok(DenseNet {
            spec,
            weights,
            biases,
        })
    }

    /// Build a network from explicit layer parameters.
    pub fn from_layers(
        spec: NetworkSpec,
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
    ) -> Result<Self> {
        spec.validate()?;
        let widths = spec.widths();
        if weights.len() != widths.len() - 1 || biases.len() != widths.len() - 1 {
            return Err(Error::DimensionMismatch {
                context: "layer count",
                expected: widths.len() - 1,
                actual: weights.len().min(biases.len()),
            });
        }
        for (i, pair) in widths.windows(2).enumerate() {
            if weights[i].dim() != (pair[1], pair[0]) {
                return Err(Error::Contract(format!(
                    "layer {i} weight shape {:?}, expected {:?}",
                    weights[i].dim(),
                    (pair[1], pair[0])
                )));
            }
            if biases[i].len() != pair[1] {
                return Err(Error::DimensionMismatch {
                    context: "bias length",
                    expected: pair[1],
                    actual: biases[i].len(),
                });
            }
        }
        let weights = weights.into_iter().map(|w| w.as_standard_layout().into_owned()).collect();
        let net = DenseNet {
            spec,
            weights,
            biases,
        };
        if !net.is_finite() {
            return Err(Error::Contract("network parameters must be finite".into()));
        }
        Ok(net)
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// Parameters flattened layer by layer: row-major weights, then biases.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::DimensionMismatch {
                context: "flat parameter vector",
                expected: self.parameter_count(),
                actual: params.len(),
            });
        }
        let mut offset = 0;
        for p in self.param_slices_mut() {
            p.copy_from_slice(&params[offset..offset + p.len()]);
            offset += p.len();
        }
        Ok(())
    }

    /// Mutable parameter blocks in flat order.
    pub(crate) fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * self.weights.len());
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            out.push(w.as_slice_mut().expect("standard layout"));
            out.push(b.as_slice_mut().expect("contiguous"));
        }
        out
    }

    fn check_input(&self, batch: &ArrayView2<f64>) -> Result<()> {
        if batch.ncols() != self.spec.input_dim {
            return Err(Error::DimensionMismatch {
                context: "forward input columns",
                expected: self.spec.input_dim,
                actual: batch.ncols(),
            });
        }
        Ok(())
    }

    fn affine(&self, layer: usize, input: &ArrayView2<f64>) -> Array2<f64> {
        let mut z = input.dot(&self.weights[layer].t());
        z += &self.biases[layer];
        z
    }

    /// Forward pass returning the output and the cache needed by
    /// [`DenseNet::backward`].
    pub fn forward(&self, batch: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(&batch)?;
        let layers = self.weights.len();
        let mut inputs = Vec::with_capacity(layers);
        let mut pre_activations = Vec::with_capacity(layers - 1);
        inputs.push(batch.to_owned());
        for l in 0..layers - 1 {
            let z = self.affine(l, &inputs[l].view());
            let a = z.mapv(|v| v.max(0.0));
            pre_activations.push(z);
            inputs.push(a);
        }
        let out = self.affine(layers - 1, &inputs[layers - 1].view());
        Ok((
            out,
            ForwardCache {
                widths: self.spec.widths(),
                inputs,
                pre_activations,
            },
        ))
    }

    /// Forward pass without keeping intermediate activations.
    pub fn predict(&self, batch: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&batch)?;
        let layers = self.weights.len();
        let mut a = self.affine(0, &batch);
        for l in 1..layers {
            a.mapv_inplace(|v| v.max(0.0));
            a = self.affine(l, &a.view());
        }
        Ok(a)
    }

    /// Reverse-mode gradients of `sum_rows <upstream, output>` with respect
    /// to every parameter and to the input batch. The ReLU derivative at
    /// exactly zero is taken as zero.
    pub fn backward(&self, cache: &ForwardCache, upstream: ArrayView2<f64>) -> Result<GradientBundle> {
        if cache.widths != self.spec.widths() {
            return Err(Error::Contract(format!(
                "forward cache was produced by a {:?} network, not {:?}",
                cache.widths,
                self.spec.widths()
            )));
        }
        if upstream.dim() != (cache.batch_size(), self.spec.output_dim) {
            return Err(Error::Contract(format!(
                "upstream shape {:?} does not match output shape {:?}",
                upstream.dim(),
                (cache.batch_size(), self.spec.output_dim)
            )));
        }
        let layers = self.weights.len();
        let mut d_weights = Vec::with_capacity(layers);
        let mut d_biases = Vec::with_capacity(layers);
        let mut delta = upstream.to_owned();
        let mut d_input = None;
        for l in (0..layers).rev() {
            d_weights.push(delta.t().dot(&cache.inputs[l]));
            d_biases.push(delta.sum_axis(Axis(0)));
            let mut d_a = delta.dot(&self.weights[l]);
            if l == 0 {
                d_input = Some(d_a);
                break;
            }
            ndarray::Zip::from(&mut d_a)
                .and(&cache.pre_activations[l - 1])
                .for_each(|d, &z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
            delta = d_a;
        }
        d_weights.reverse();
        d_biases.reverse();
        Ok(GradientBundle {
            d_weights,
            d_biases,
            d_input: d_input.expect("at least one layer"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn linear_identity_relu_net() -> DenseNet {
        let spec = NetworkSpec::new(2, vec![2], 2).unwrap();
        DenseNet::from_layers(
            spec,
            vec![Array2::eye(2), Array2::eye(2)],
            vec![Array1::zeros(2), Array1::zeros(2)],
        )
        .unwrap()
    }

    #[test]
    fn relu_clips_negative_coordinates() {
        let net = linear_identity_relu_net();
        let (out, cache) = net.forward(array![[1.0, -1.0]].view()).unwrap();
        assert_eq!(cache.inputs[1], array![[1.0, 0.0]]);
        assert_eq!(out, array![[1.0, 0.0]]);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let spec = NetworkSpec::new(3, vec![4, 2], 1).unwrap();
        let mut net = DenseNet::init(spec, 1).unwrap();
        let zeros = vec![0.0; net.parameter_count()];
        net.set_flat_params(&zeros).unwrap();
        let out = net.predict(array![[1.0, -2.0, 3.0], [0.5, 0.5, 0.5]].view()).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn init_zero_biases_and_determinism() {
        let spec = NetworkSpec::new(2, vec![], 1).unwrap();
        let a = DenseNet::init(spec.clone(), 9).unwrap();
        assert!(a.biases.iter().all(|b| b.iter().all(|&v| v == 0.0)));
        let b = DenseNet::init(spec, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn he_variance_of_first_layer() {
        let spec = NetworkSpec::new(3, vec![50], 1).unwrap();
        let net = DenseNet::init(spec, 123).unwrap();
        let w = &net.weights[0];
        let n = w.len() as f64;
        let mean = w.sum() / n;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let target = 2.0 / 3.0;
        assert!((var - target).abs() < 0.2 * target, "variance {var}");
    }

    #[test]
    fn parameter_count_matches_closed_form() {
        for hidden in [vec![], vec![50], vec![40, 15], vec![50, 25]] {
            let spec = NetworkSpec::new(7, hidden, 2).unwrap();
            let net = DenseNet::init(spec.clone(), 0).unwrap();
            assert_eq!(net.parameter_count(), spec.parameter_count());
            assert_eq!(net.flat_params().len(), spec.parameter_count());
        }
        // 8 -> 50 -> 1
        assert_eq!(NetworkSpec::new(8, vec![50], 1).unwrap().parameter_count(), 9 * 50 + 51);
    }

    #[test]
    fn rejects_wrong_input_width() {
        let net = DenseNet::init(NetworkSpec::new(3, vec![2], 1).unwrap(), 0).unwrap();
        let err = net.forward(array![[1.0, 2.0]].view()).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 3, actual: 2, .. }));
    }

    #[test]
    fn rejects_zero_dims() {
        assert!(NetworkSpec::new(0, vec![], 1).is_err());
        assert!(NetworkSpec::new(2, vec![3, 0], 1).is_err());
    }

    #[test]
    fn backward_rejects_foreign_cache() {
        let a = DenseNet::init(NetworkSpec::new(2, vec![3], 1).unwrap(), 0).unwrap();
        let b = DenseNet::init(NetworkSpec::new(2, vec![4], 1).unwrap(), 0).unwrap();
        let (_, cache) = a.forward(array![[0.1, 0.2]].view()).unwrap();
        let err = b.backward(&cache, array![[1.0]].view()).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let net = DenseNet::init(NetworkSpec::new(3, vec![5, 4], 2).unwrap(), 4).unwrap();
        let x = array![[0.3, -0.2, 1.0], [1.0, 2.0, -3.0]];
        let (_, cache) = net.forward(x.view()).unwrap();
        let g = net.backward(&cache, Array2::zeros((2, 2)).view()).unwrap();
        assert!(g.flat_params().iter().all(|&v| v == 0.0));
        assert!(g.d_input.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_net_gradients_are_outer_products() {
        let spec = NetworkSpec::new(2, vec![], 1).unwrap();
        let net = DenseNet::from_layers(spec, vec![array![[2.0, -1.0]]], vec![array![0.5]]).unwrap();
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        let u = array![[1.0], [-2.0]];
        let (_, cache) = net.forward(x.view()).unwrap();
        let g = net.backward(&cache, u.view()).unwrap();
        // d_W = u^T x, d_b = sum u, d_input = u W
        assert_eq!(g.d_weights[0], array![[1.0 - 6.0, 2.0 - 8.0]]);
        assert_eq!(g.d_biases[0], array![-1.0]);
        assert_eq!(g.d_input, array![[2.0, -1.0], [-4.0, 2.0]]);
    }
}
