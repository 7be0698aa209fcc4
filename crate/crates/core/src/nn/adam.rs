use serde::{Deserialize, Serialize};

use super::{DenseNet, GradientBundle};
use crate::error::{Error, Result};

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-4,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr >= 0.0
            && self.lr.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid Adam settings {self:?}")))
        }
    }
}

/// Moment accumulators for one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, net: &DenseNet) -> Self {
        let n = net.parameter_count();
        AdamState {
            config,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moments(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moments(&self) -> &[f64] {
        &self.v
    }

    /// One bias-corrected Adam descent step on `net` along `grads`.
    ///
    /// Nothing is mutated when the gradient holds a non-finite entry.
    pub fn step(&mut self, net: &mut DenseNet, grads: &GradientBundle) -> Result<()> {
        let g = grads.flat_params();
        if g.len() != self.m.len() || g.len() != net.parameter_count() {
            return Err(Error::DimensionMismatch {
                context: "adam gradient length",
                expected: self.m.len(),
                actual: g.len(),
            });
        }
        let next = self.t + 1;
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient { step: next });
        }
        self.t = next;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        let mut k = 0;
        for block in net.param_slices_mut() {
            for p in block.iter_mut() {
                let gi = g[k];
                self.m[k] = beta1 * self.m[k] + (1.0 - beta1) * gi;
                self.v[k] = beta2 * self.v[k] + (1.0 - beta2) * gi * gi;
                let m_hat = self.m[k] / bc1;
                let v_hat = self.v[k] / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
                k += 1;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::NetworkSpec;
    use ndarray::{array, Array1, Array2};

    /// 1 -> 1 linear net whose only nonzero gradient is on the weight.
    fn scalar_net(w: f64) -> DenseNet {
        DenseNet::from_layers(
            NetworkSpec::new(1, vec![], 1).unwrap(),
            vec![array![[w]]],
            vec![array![0.0]],
        )
        .unwrap()
    }

    fn scalar_grad(g: f64) -> GradientBundle {
        GradientBundle {
            d_weights: vec![array![[g]]],
            d_biases: vec![Array1::zeros(1)],
            d_input: Array2::zeros((1, 1)),
        }
    }

    #[test]
    fn first_step_is_a_sign_step() {
        let cfg = AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        };
        let mut net = scalar_net(0.0);
        let mut st = AdamState::new(cfg, &net);
        st.step(&mut net, &scalar_grad(1.0)).unwrap();
        let delta = net.weights()[0][[0, 0]];
        assert!((delta + 1e-3).abs() < 1e-10, "{delta}");
        assert_eq!(st.steps(), 1);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut net = scalar_net(0.7);
        let mut st = AdamState::new(AdamConfig::default(), &net);
        st.step(&mut net, &scalar_grad(0.0)).unwrap();
        assert_eq!(net.weights()[0][[0, 0]], 0.7);
        assert_eq!(st.steps(), 1);
    }

    #[test]
    fn two_steps_match_hand_recurrence() {
        let cfg = AdamConfig::default();
        let g = 0.3;
        let mut net = scalar_net(1.0);
        let mut st = AdamState::new(cfg, &net);
        st.step(&mut net, &scalar_grad(g)).unwrap();
        st.step(&mut net, &scalar_grad(g)).unwrap();

        let (mut p, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        for t in 1..=2 {
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
            let mh = m / (1.0 - cfg.beta1.powi(t));
            let vh = v / (1.0 - cfg.beta2.powi(t));
            p -= cfg.lr * mh / (vh.sqrt() + cfg.eps);
        }
        assert!((net.weights()[0][[0, 0]] - p).abs() < 1e-12);
    }

    #[test]
    fn non_finite_gradient_reports_step() {
        let mut net = scalar_net(1.0);
        let mut st = AdamState::new(AdamConfig::default(), &net);
        st.step(&mut net, &scalar_grad(1.0)).unwrap();
        let err = st.step(&mut net, &scalar_grad(f64::NAN)).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { step: 2 }));
        assert_eq!(st.steps(), 1);
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let spec = NetworkSpec::new(3, vec![4], 2).unwrap();
        let mut net = DenseNet::init(spec, 5).unwrap();
        let before = net.clone();
        let x = array![[0.2, -0.4, 1.3]];
        let (_, cache) = net.forward(x.view()).unwrap();
        let grads = net.backward(&cache, array![[1.0, -1.0]].view()).unwrap();
        let cfg = AdamConfig { lr: 0.0, ..AdamConfig::default() };
        let mut st = AdamState::new(cfg, &net);
        for _ in 0..3 {
            st.step(&mut net, &grads).unwrap();
        }
        assert_eq!(net, before);
        assert!(st.second_moments().iter().all(|&v| v >= 0.0));
    }
}
