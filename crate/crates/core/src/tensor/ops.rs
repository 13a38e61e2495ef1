use rand::Rng;

use super::Tensor;
use crate::error::{Error, Result};

pub fn relu_forward(x: &Tensor) -> Tensor {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// Passes `upstream` through where `x > 0`, zero elsewhere.
pub fn relu_backward(x: &Tensor, upstream: &Tensor) -> Result<Tensor> {
    x.zip_map(upstream, |xv, g| if xv > 0.0 { g } else { 0.0 })
}

/// Inverted dropout.
///
/// In training mode each element is zeroed with probability `rate` and the
/// survivors are scaled by `1/(1-rate)`. The returned mask holds the per-element
/// multiplier (either `0` or `1/(1-rate)`) so backward can reuse it. In eval mode
/// the input is returned unchanged with an all-ones mask and `rng` is not touched.
pub fn dropout<R: Rng + ?Sized>(
    x: &Tensor,
    rate: f64,
    rng: &mut R,
    training: bool,
) -> Result<(Tensor, Tensor)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!(
            "dropout rate must lie in [0, 1), got {rate}"
        )));
    }
    if !training || rate == 0.0 {
        return Ok((x.clone(), Tensor::filled(x.shape(), 1.0)));
    }
    let scale = 1.0 / (1.0 - rate);
    let mask = Tensor::from_fn(x.shape(), |_| {
        if rng.gen::<f64>() < rate {
            0.0
        } else {
            scale
        }
    });
    let out = x.zip_map(&mask, |v, m| v * m)?;
    Ok((out, mask))
}

pub fn dropout_backward(upstream: &Tensor, mask: &Tensor) -> Result<Tensor> {
    upstream.zip_map(mask, |g, m| g * m)
}

/// Row-wise softmax of an `N×K` tensor, stabilised by subtracting the row max.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    logits.expect_rank(2, "softmax input")?;
    let k = logits.shape()[1];
    let mut out = logits.clone();
    for row in out.data_mut().chunks_exact_mut(k) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    Ok(out)
}

/// Mean cross-entropy of `softmax(logits)` against integer labels, and its
/// gradient with respect to the logits: `(softmax - onehot) / N`.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    logits.expect_rank(2, "logits")?;
    let (n, k) = (logits.shape()[0], logits.shape()[1]);
    if labels.len() != n {
        return Err(Error::Dimension(format!(
            "{} labels for {n} rows of logits",
            labels.len()
        )));
    }
    if let Some((row, &bad)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
        return Err(Error::Data(format!(
            "label {bad} in row {row} is outside [0, {k})"
        )));
    }

    let mut grad = Tensor::zeros(&[n, k]);
    let mut loss = 0.0;
    let scale = 1.0 / n as f64;
    for ((row, g), &label) in logits
        .data()
        .chunks_exact(k)
        .zip(grad.data_mut().chunks_exact_mut(k))
        .zip(labels)
    {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (gv, &v) in g.iter_mut().zip(row) {
            *gv = (v - max).exp();
            sum += *gv;
        }
        // log p[label] = (z_label - max) - ln(sum)
        loss -= (row[label] - max) - sum.ln();
        for gv in g.iter_mut() {
            *gv = *gv / sum * scale;
        }
        g[label] -= scale;
    }
    Ok((loss * scale, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{central_difference, relative_error};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn relu_examples() {
        let x = Tensor::new(&[3], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu_forward(&x).data(), &[0.0, 0.0, 2.0]);
        let x = Tensor::new(&[2], vec![-1.0, 2.0]).unwrap();
        let up = Tensor::new(&[2], vec![5.0, 7.0]).unwrap();
        assert_eq!(relu_backward(&x, &up).unwrap().data(), &[0.0, 7.0]);
        assert!(relu_backward(&x, &Tensor::zeros(&[3])).is_err());
    }

    #[test]
    fn relu_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            // keep inputs away from the kink at zero
            let x = Tensor::from_fn(&[12], |_| {
                let v: f64 = rng.gen_range(0.01..1.0);
                if rng.gen::<bool>() {
                    v
                } else {
                    -v
                }
            });
            let up = random(&[12], &mut rng);
            let analytic = relu_backward(&x, &up).unwrap();
            let numeric = central_difference(&x, 1e-5, |t| {
                relu_forward(t)
                    .data()
                    .iter()
                    .zip(up.data())
                    .map(|(a, b)| a * b)
                    .sum()
            });
            for (a, n) in analytic.data().iter().zip(numeric.data()) {
                assert!(relative_error(*a, *n) < 1e-6, "{a} vs {n}");
            }
        }
    }

    #[test]
    fn dropout_rate_zero_and_eval_are_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = random(&[4, 5], &mut rng);
        let (out, mask) = dropout(&x, 0.0, &mut rng, true).unwrap();
        assert_eq!(out, x);
        assert!(mask.data().iter().all(|&m| m == 1.0));
        let (out, _) = dropout(&x, 0.9, &mut rng, false).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn dropout_rejects_bad_rates() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = Tensor::zeros(&[2]);
        for rate in [1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(
                dropout(&x, rate, &mut rng, true),
                Err(Error::Config(_))
            ));
        }
    }

    #[test]
    fn dropout_survivor_fraction_is_near_keep_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let x = Tensor::filled(&[100_000], 1.0);
        let (out, mask) = dropout(&x, 0.5, &mut rng, true).unwrap();
        let survivors = mask.data().iter().filter(|&&m| m != 0.0).count();
        let frac = survivors as f64 / 100_000.0;
        assert!((frac - 0.5).abs() < 0.01, "{frac}");
        assert!(out.data().iter().all(|&v| v == 0.0 || v == 2.0));
        let back = dropout_backward(&x, &mask).unwrap();
        assert_eq!(back, out);
    }

    #[test]
    fn cross_entropy_uniform_logits() {
        let logits = Tensor::from_rows(&[&[0.0, 0.0]]);
        let (loss, grad) = softmax_cross_entropy(&logits, &[0]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(grad.data(), &[-0.5, 0.5]);
    }

    #[test]
    fn cross_entropy_is_shift_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let logits = random(&[3, 4], &mut rng);
        let shifted = logits.map(|v| v + 17.25);
        let (l1, g1) = softmax_cross_entropy(&logits, &[0, 3, 1]).unwrap();
        let (l2, g2) = softmax_cross_entropy(&shifted, &[0, 3, 1]).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        for (a, b) in g1.data().iter().zip(g2.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_label_out_of_range() {
        let logits = Tensor::zeros(&[2, 3]);
        assert!(matches!(
            softmax_cross_entropy(&logits, &[0, 3]),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn cross_entropy_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let logits = random(&[4, 6], &mut rng).map(|v| v * 3.0);
        let labels = [1, 5, 0, 2];
        let (_, grad) = softmax_cross_entropy(&logits, &labels).unwrap();
        let numeric = central_difference(&logits, 1e-5, |t| {
            softmax_cross_entropy(t, &labels).unwrap().0
        });
        for (a, n) in grad.data().iter().zip(numeric.data()) {
            assert!(relative_error(*a, *n) < 1e-6, "{a} vs {n}");
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let logits = random(&[8, 10], &mut rng).map(|v| v * 50.0);
        let p = softmax(&logits).unwrap();
        for row in p.data().chunks_exact(10) {
            let s: f64 = row.iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }
}
