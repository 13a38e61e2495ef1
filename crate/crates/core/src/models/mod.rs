//! The three trainable architectures, as explicit parameter bundles with
//! hand-written forward and backward passes.
//!
//! | kind        | input        | layers                                                   |
//! |-------------|--------------|----------------------------------------------------------|
//! | `mlp`       | N×1×28×28    | fc 784→500, ReLU, fc 500→10                              |
//! | `mnist_cnn` | N×1×28×28    | conv 10@5×5, pool, ReLU, conv 20@5×5, pool, ReLU, fc 320→50, ReLU, dropout 0.5, fc 50→10 |
//! | `cifar_cnn` | N×3×32×32    | conv 6@5×5, ReLU, pool, conv 16@5×5, ReLU, pool, fc 400→120→84→10 with ReLU |
//!
//! Weights are Glorot-uniform, biases start at zero. Parameters and gradients
//! are exchanged as `Vec<Tensor>` in a fixed per-model order, which is what the
//! optimizers consume.

mod cnn;
mod layers;
mod mlp;

pub use cnn::{CifarCnnCache, CifarCnnModel, MnistCnnCache, MnistCnnModel};
pub use layers::{Conv, Linear};
pub use mlp::{MlpCache, MlpModel};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::seed::Stream;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Mlp,
    MnistCnn,
    CifarCnn,
}

impl ModelKind {
    /// Per-example input shape `[C, H, W]`.
    pub fn input_shape(self) -> [usize; 3] {
        match self {
            ModelKind::Mlp | ModelKind::MnistCnn => [1, 28, 28],
            ModelKind::CifarCnn => [3, 32, 32],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Mlp => "mlp",
            ModelKind::MnistCnn => "mnist_cnn",
            ModelKind::CifarCnn => "cifar_cnn",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp" => Ok(ModelKind::Mlp),
            "mnist_cnn" => Ok(ModelKind::MnistCnn),
            "cifar_cnn" => Ok(ModelKind::CifarCnn),
            other => Err(Error::Config(format!(
                "unknown model `{other}` (expected mlp, mnist_cnn or cifar_cnn)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Mlp(MlpModel),
    MnistCnn(MnistCnnModel),
    CifarCnn(CifarCnnModel),
}

/// Activations saved by [`Model::forward`] for the matching backward call.
#[derive(Debug, Clone)]
pub enum Cache {
    Mlp(MlpCache),
    MnistCnn(MnistCnnCache),
    CifarCnn(CifarCnnCache),
}

impl Cache {
    /// Identifies which piece of the piecewise-smooth network a forward pass
    /// landed in: the ReLU on/off pattern and every pooling winner. Two
    /// forward passes with equal signatures evaluated the same smooth branch.
    pub fn kink_signature(&self) -> Vec<usize> {
        match self {
            Cache::Mlp(c) => c.kink_signature(),
            Cache::MnistCnn(c) => c.kink_signature(),
            Cache::CifarCnn(c) => c.kink_signature(),
        }
    }
}

/// Builds a freshly initialised model. Deterministic in `rng`.
pub fn init_model(kind: ModelKind, rng: &mut Stream) -> Model {
    match kind {
        ModelKind::Mlp => Model::Mlp(MlpModel::init(rng)),
        ModelKind::MnistCnn => Model::MnistCnn(MnistCnnModel::init(rng)),
        ModelKind::CifarCnn => Model::CifarCnn(CifarCnnModel::init(rng)),
    }
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Mlp(_) => ModelKind::Mlp,
            Model::MnistCnn(_) => ModelKind::MnistCnn,
            Model::CifarCnn(_) => ModelKind::CifarCnn,
        }
    }

    /// Logits `N×10` plus the cache for backward. `rng` is only drawn from in
    /// training mode by layers with dropout.
    pub fn forward(&self, batch: &Tensor, training: bool, rng: &mut Stream) -> Result<(Tensor, Cache)> {
        match self {
            Model::Mlp(m) => m.forward(batch).map(|(l, c)| (l, Cache::Mlp(c))),
            Model::MnistCnn(m) => m.forward(batch, training, rng).map(|(l, c)| (l, Cache::MnistCnn(c))),
            Model::CifarCnn(m) => m.forward(batch).map(|(l, c)| (l, Cache::CifarCnn(c))),
        }
    }

    /// One gradient per parameter, in [`Model::parameters`] order.
    pub fn backward(&self, cache: &Cache, grad_logits: &Tensor) -> Result<Vec<Tensor>> {
        match (self, cache) {
            (Model::Mlp(m), Cache::Mlp(c)) => m.backward(c, grad_logits),
            (Model::MnistCnn(m), Cache::MnistCnn(c)) => m.backward(c, grad_logits),
            (Model::CifarCnn(m), Cache::CifarCnn(c)) => m.backward(c, grad_logits),
            _ => Err(Error::Internal(format!(
                "cache from a different model kind passed to {} backward",
                self.kind()
            ))),
        }
    }

    pub fn parameters(&self) -> Vec<&Tensor> {
        match self {
            Model::Mlp(m) => m.parameters(),
            Model::MnistCnn(m) => m.parameters(),
            Model::CifarCnn(m) => m.parameters(),
        }
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Model::Mlp(m) => m.parameters_mut(),
            Model::MnistCnn(m) => m.parameters_mut(),
            Model::CifarCnn(m) => m.parameters_mut(),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|p| p.len()).sum()
    }

    /// Eval-mode class predictions.
    pub fn predict(&self, batch: &Tensor) -> Result<Vec<usize>> {
        // eval mode never draws from the stream
        let mut unused = crate::seed::stream(0);
        let (logits, _) = self.forward(batch, false, &mut unused)?;
        argmax_rows(&logits)
    }
}

/// Row-wise argmax of a 2-D tensor; ties go to the lowest index.
pub fn argmax_rows(logits: &Tensor) -> Result<Vec<usize>> {
    logits.expect_rank(2, "logits")?;
    let k = logits.shape()[1];
    Ok(logits
        .data()
        .chunks_exact(k)
        .map(|row| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::relative_error;
    use crate::seed::stream;
    use crate::tensor::{relu_forward, softmax_cross_entropy};
    use rand::Rng;

    fn random_batch(kind: ModelKind, n: usize, rng: &mut Stream) -> Tensor {
        let [c, h, w] = kind.input_shape();
        Tensor::from_fn(&[n, c, h, w], |_| rng.gen_range(0.0..1.0))
    }

    #[test]
    fn init_is_deterministic() {
        for kind in [ModelKind::Mlp, ModelKind::MnistCnn, ModelKind::CifarCnn] {
            let a = init_model(kind, &mut stream(77));
            let b = init_model(kind, &mut stream(77));
            assert_eq!(a, b);
            assert_ne!(a, init_model(kind, &mut stream(78)));
        }
    }

    #[test]
    fn mlp_has_expected_sizes() {
        let Model::Mlp(m) = init_model(ModelKind::Mlp, &mut stream(0)) else {
            unreachable!()
        };
        assert_eq!(m.hidden.weight.len(), 392_000);
        assert_eq!(m.hidden.weight.shape(), &[784, 500]);
        assert_eq!(m.output.weight.shape(), &[500, 10]);
        assert!(m.hidden.bias.data().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn glorot_mean_is_near_zero() {
        let mut total = 0.0;
        let mut count = 0usize;
        for seed in 0..5 {
            let Model::Mlp(m) = init_model(ModelKind::Mlp, &mut stream(seed)) else {
                unreachable!()
            };
            total += m.hidden.weight.data().iter().sum::<f64>();
            count += m.hidden.weight.len();
            let limit = (6.0f64 / 1284.0).sqrt();
            assert!(m.hidden.weight.data().iter().all(|v| v.abs() <= limit));
        }
        let mean = total / count as f64;
        assert!(mean.abs() < 0.003, "{mean}");
    }

    #[test]
    fn zero_weight_mlp_gives_zero_logits() {
        let mut model = init_model(ModelKind::Mlp, &mut stream(1));
        for p in model.parameters_mut() {
            p.data_mut().fill(0.0);
        }
        let mut rng = stream(2);
        let x = random_batch(ModelKind::Mlp, 3, &mut rng);
        let (logits, _) = model.forward(&x, true, &mut rng).unwrap();
        assert!(logits.data().iter().all(|&v| v == 0.0));
        assert_eq!(model.predict(&x).unwrap(), vec![0, 0, 0]);
    }

    #[test]
    fn eval_forward_is_deterministic() {
        let model = init_model(ModelKind::MnistCnn, &mut stream(3));
        let x = random_batch(ModelKind::MnistCnn, 2, &mut stream(4));
        let (a, _) = model.forward(&x, false, &mut stream(5)).unwrap();
        let (b, _) = model.forward(&x, false, &mut stream(6)).unwrap();
        assert_eq!(a, b);
        let (c, _) = model.forward(&x, true, &mut stream(5)).unwrap();
        let (d, _) = model.forward(&x, true, &mut stream(6)).unwrap();
        assert_ne!(c, d);
    }

    #[test]
    fn wrong_input_shape_is_rejected() {
        let mut rng = stream(0);
        let cifar = init_model(ModelKind::CifarCnn, &mut rng);
        let mnist_x = random_batch(ModelKind::Mlp, 1, &mut rng);
        assert!(matches!(cifar.forward(&mnist_x, false, &mut rng), Err(Error::Dimension(_))));
        let mlp = init_model(ModelKind::Mlp, &mut rng);
        let cifar_x = random_batch(ModelKind::CifarCnn, 1, &mut rng);
        assert!(mlp.forward(&cifar_x, false, &mut rng).is_err());
    }

    #[test]
    fn mismatched_cache_is_internal_error() {
        let mut rng = stream(0);
        let mlp = init_model(ModelKind::Mlp, &mut rng);
        let cnn = init_model(ModelKind::MnistCnn, &mut rng);
        let x = random_batch(ModelKind::Mlp, 1, &mut rng);
        let (logits, cache) = cnn.forward(&x, false, &mut rng).unwrap();
        assert!(matches!(mlp.backward(&cache, &logits), Err(Error::Internal(_))));
    }

    #[test]
    fn zero_upstream_gives_zero_grads_with_matching_shapes() {
        for kind in [ModelKind::Mlp, ModelKind::MnistCnn, ModelKind::CifarCnn] {
            let mut rng = stream(9);
            let model = init_model(kind, &mut rng);
            let x = random_batch(kind, 2, &mut rng);
            let (logits, cache) = model.forward(&x, true, &mut rng).unwrap();
            let grads = model.backward(&cache, &Tensor::zeros(logits.shape())).unwrap();
            let params = model.parameters();
            assert_eq!(grads.len(), params.len());
            for (g, p) in grads.iter().zip(params) {
                assert_eq!(g.shape(), p.shape());
                assert!(g.data().iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn mlp_grads_match_closed_form_single_example() {
        let mut rng = stream(31);
        let Model::Mlp(model) = init_model(ModelKind::Mlp, &mut rng) else {
            unreachable!()
        };
        let x = random_batch(ModelKind::Mlp, 1, &mut rng);
        let label = 4usize;
        let (logits, cache) = model.forward(&x).unwrap();
        let (_, g) = softmax_cross_entropy(&logits, &[label]).unwrap();
        let grads = model.backward(&cache, &g).unwrap();

        // closed form for one example: e = softmax(z) - onehot(y)
        //   dW2[j][k] = h[j]·e[k],  db2 = e
        //   dh[j] = Σ_k W2[j][k]·e[k],  dpre = dh ⊙ [pre > 0]
        //   dW1[i][j] = x[i]·dpre[j],  db1 = dpre
        let xs = x.data();
        let w1 = model.hidden.weight.data();
        let w2 = model.output.weight.data();
        let mut pre = vec![0.0; 500];
        for (j, p) in pre.iter_mut().enumerate() {
            *p = (0..784).map(|i| xs[i] * w1[i * 500 + j]).sum::<f64>();
        }
        let h: Vec<f64> = relu_forward(&Tensor::new(&[500], pre.clone()).unwrap()).into_data();
        let z: Vec<f64> = (0..10).map(|k| (0..500).map(|j| h[j] * w2[j * 10 + k]).sum()).collect();
        let zmax = z.iter().cloned().fold(f64::MIN, f64::max);
        let denom: f64 = z.iter().map(|v| (v - zmax).exp()).sum();
        let e: Vec<f64> = (0..10)
            .map(|k| (z[k] - zmax).exp() / denom - if k == label { 1.0 } else { 0.0 })
            .collect();
        let dh: Vec<f64> = (0..500).map(|j| (0..10).map(|k| w2[j * 10 + k] * e[k]).sum()).collect();
        let dpre: Vec<f64> = (0..500).map(|j| if pre[j] > 0.0 { dh[j] } else { 0.0 }).collect();

        let close = |a: f64, b: f64| assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{a} vs {b}");
        for k in 0..10 {
            close(grads[3].data()[k], e[k]);
            for j in (0..500).step_by(37) {
                close(grads[2].data()[j * 10 + k], h[j] * e[k]);
            }
        }
        for j in 0..500 {
            close(grads[1].data()[j], dpre[j]);
            for i in (0..784).step_by(53) {
                close(grads[0].data()[i * 500 + j], xs[i] * dpre[j]);
            }
        }
    }

    #[test]
    fn argmax_ties_and_unique() {
        let t = Tensor::from_rows(&[&[0.0; 10], &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 9.0, 1.0, 0.0]]);
        assert_eq!(argmax_rows(&t).unwrap(), vec![0, 7]);
    }

    #[test]
    fn argmax_matches_linear_scan_and_is_shift_invariant() {
        let mut rng = stream(12);
        let logits = Tensor::from_fn(&[200, 10], |_| (rng.gen_range(-3.0..3.0f64) * 4.0).round() / 4.0);
        let got = argmax_rows(&logits).unwrap();
        for (row, &g) in logits.data().chunks(10).zip(&got) {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let expected = row.iter().position(|&v| v == max).unwrap();
            assert_eq!(g, expected);
        }
        assert_eq!(argmax_rows(&logits.map(|v| v + 8.0)).unwrap(), got);
    }

    #[test]
    fn full_model_gradient_checks() {
        for kind in [ModelKind::Mlp, ModelKind::MnistCnn, ModelKind::CifarCnn] {
            let report = crate::gradcheck::check_model(kind, 5, 10).unwrap();
            assert!(report.max_relative_error < 1e-4, "{kind}: {report:?}");
            assert!(report.checked >= 10);
        }
        assert!(relative_error(1.0, 1.0) == 0.0);
    }
}
