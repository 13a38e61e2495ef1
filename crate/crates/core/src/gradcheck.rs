//! Central finite differences, used as the independent oracle for every
//! hand-written backward pass.

use rand::Rng;

use crate::error::{Error, Result};
use crate::models::{init_model, Model, ModelKind};
use crate::seed::stream;
use crate::tensor::{softmax_cross_entropy, Tensor};

/// Denominator floor for [`relative_error`]; below this both gradients are
/// treated as zero-scale and the absolute difference is compared instead.
pub const RELATIVE_FLOOR: f64 = 1e-6;

/// `|a - b| / max(|a|, |b|, RELATIVE_FLOOR)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(RELATIVE_FLOOR)
}

/// Numerical gradient of scalar `f` at `x`: `(f(x + h·e_i) - f(x - h·e_i)) / 2h`
/// for every coordinate `i`.
pub fn central_difference(x: &Tensor, h: f64, mut f: impl FnMut(&Tensor) -> f64) -> Tensor {
    let mut probe = x.clone();
    let mut out = Tensor::zeros(x.shape());
    for i in 0..x.len() {
        out.data_mut()[i] = partial(&mut probe, i, h, &mut f);
    }
    out
}

/// One coordinate of [`central_difference`]; `probe` is restored afterwards.
pub fn partial(probe: &mut Tensor, index: usize, h: f64, f: &mut impl FnMut(&Tensor) -> f64) -> f64 {
    let orig = probe.data()[index];
    probe.data_mut()[index] = orig + h;
    let plus = f(probe);
    probe.data_mut()[index] = orig - h;
    let minus = f(probe);
    probe.data_mut()[index] = orig;
    (plus - minus) / (2.0 * h)
}

/// Scalar `Σ upstream ⊙ y`, the usual way to turn a tensor-valued op into a
/// scalar whose gradient with respect to the op's input is the op's backward
/// applied to `upstream`.
pub fn dot(upstream: &Tensor, y: &Tensor) -> f64 {
    upstream.data().iter().zip(y.data()).map(|(a, b)| a * b).sum()
}

/// Outcome of [`check_model`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelCheck {
    /// Coordinates compared.
    pub checked: usize,
    /// Coordinates skipped because the ±h stencil crossed a ReLU or pooling
    /// boundary, where the loss is not differentiable.
    pub skipped_at_kinks: usize,
    pub max_relative_error: f64,
}

/// Compares a model's backward pass against central differences of its
/// cross-entropy loss on a random 2-example batch, at `samples` randomly chosen
/// parameter coordinates.
///
/// Dropout masks are held fixed by re-seeding the dropout stream for every
/// forward evaluation. A coordinate is only compared when the forward passes at
/// `x - h`, `x` and `x + h` share one [`Cache::kink_signature`](crate::models::Cache::kink_signature).
pub fn check_model(kind: ModelKind, seed: u64, samples: usize) -> Result<ModelCheck> {
    const STEP: f64 = 1e-5;
    let mut rng = stream(seed);
    let mut model = init_model(kind, &mut rng);
    let [c, h, w] = kind.input_shape();
    let batch = Tensor::from_fn(&[2, c, h, w], |_| rng.gen_range(0.0..1.0));
    let labels = [rng.gen_range(0..10), rng.gen_range(0..10)];
    let dropout_seed: u64 = rng.gen();

    let (logits, cache) = model.forward(&batch, true, &mut stream(dropout_seed))?;
    let (_, grad_logits) = softmax_cross_entropy(&logits, &labels)?;
    let grads = model.backward(&cache, &grad_logits)?;
    let base_signature = cache.kink_signature();

    let sizes: Vec<usize> = model.parameters().iter().map(|p| p.len()).collect();
    let total: usize = sizes.iter().sum();

    let eval = |model: &Model| -> Result<(f64, Vec<usize>)> {
        let (logits, cache) = model.forward(&batch, true, &mut stream(dropout_seed))?;
        let (loss, _) = softmax_cross_entropy(&logits, &labels)?;
        Ok((loss, cache.kink_signature()))
    };

    let mut report = ModelCheck {
        checked: 0,
        skipped_at_kinks: 0,
        max_relative_error: 0.0,
    };
    let mut attempts = 0;
    while report.checked < samples {
        attempts += 1;
        if attempts > samples * 50 {
            return Err(Error::Internal(format!(
                "{kind}: could not find {samples} smooth coordinates to check"
            )));
        }
        // uniform over all scalar parameters
        let mut flat = rng.gen_range(0..total);
        let mut which = 0;
        while flat >= sizes[which] {
            flat -= sizes[which];
            which += 1;
        }
        let orig = model.parameters()[which].data()[flat];

        model.parameters_mut()[which].data_mut()[flat] = orig + STEP;
        let (plus, sig_plus) = eval(&model)?;
        model.parameters_mut()[which].data_mut()[flat] = orig - STEP;
        let (minus, sig_minus) = eval(&model)?;
        model.parameters_mut()[which].data_mut()[flat] = orig;

        if sig_plus != base_signature || sig_minus != base_signature {
            report.skipped_at_kinks += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * STEP);
        let analytic = grads[which].data()[flat];
        report.max_relative_error = report.max_relative_error.max(relative_error(analytic, numeric));
        report.checked += 1;
    }
    Ok(report)
}
