use super::Tensor;
use crate::error::{Error, Result};

/// Gradients of a convolution with respect to its three inputs.
#[derive(Debug, Clone)]
pub struct Conv2dGrads {
    pub input: Tensor,
    pub kernel: Tensor,
    pub bias: Tensor,
}

struct ConvDims {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    f: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
}

fn conv_dims(x: &Tensor, kernel: &Tensor, bias: &Tensor) -> Result<ConvDims> {
    x.expect_rank(4, "conv input")?;
    kernel.expect_rank(4, "conv kernel")?;
    let (n, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (f, kc, kh, kw) = (
        kernel.shape()[0],
        kernel.shape()[1],
        kernel.shape()[2],
        kernel.shape()[3],
    );
    if kc != c {
        return Err(Error::Dimension(format!(
            "kernel {:?} expects {kc} channels, input {:?} has {c}",
            kernel.shape(),
            x.shape()
        )));
    }
    if kh > h || kw > w {
        return Err(Error::Dimension(format!(
            "kernel {:?} is larger than input {:?}",
            kernel.shape(),
            x.shape()
        )));
    }
    if bias.shape() != [f] {
        return Err(Error::Dimension(format!(
            "bias {:?} does not match {f} filters",
            bias.shape()
        )));
    }
    Ok(ConvDims {
        n,
        c,
        h,
        w,
        f,
        kh,
        kw,
        oh: h - kh + 1,
        ow: w - kw + 1,
    })
}

/// Valid, stride-1 cross-correlation.
///
/// `out[n,f,i,j] = (Σ_{c,u,v} x[n,c,i+u,j+v]·k[f,c,u,v]) + bias[f]`, with the
/// sum taken over `c`, then `u`, then `v` in increasing order.
pub fn conv2d_forward(x: &Tensor, kernel: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let d = conv_dims(x, kernel, bias)?;
    let xs = x.data();
    let ks = kernel.data();
    let plane = d.oh * d.ow;
    let mut out = vec![0.0; d.n * d.f * plane];

    for n in 0..d.n {
        for f in 0..d.f {
            let acc = &mut out[(n * d.f + f) * plane..(n * d.f + f + 1) * plane];
            for c in 0..d.c {
                let x_plane = &xs[((n * d.c + c) * d.h) * d.w..((n * d.c + c + 1) * d.h) * d.w];
                for u in 0..d.kh {
                    for v in 0..d.kw {
                        let weight = ks[((f * d.c + c) * d.kh + u) * d.kw + v];
                        for i in 0..d.oh {
                            let x_row = &x_plane[(i + u) * d.w + v..(i + u) * d.w + v + d.ow];
                            let o_row = &mut acc[i * d.ow..(i + 1) * d.ow];
                            for (o, &xv) in o_row.iter_mut().zip(x_row) {
                                *o += xv * weight;
                            }
                        }
                    }
                }
            }
            let b = bias.data()[f];
            for o in acc.iter_mut() {
                *o += b;
            }
        }
    }
    Tensor::new(&[d.n, d.f, d.oh, d.ow], out)
}

/// Gradients of [`conv2d_forward`] given the upstream gradient of its output.
pub fn conv2d_backward(
    x: &Tensor,
    kernel: &Tensor,
    bias: &Tensor,
    upstream: &Tensor,
) -> Result<Conv2dGrads> {
    let d = conv_dims(x, kernel, bias)?;
    if upstream.shape() != [d.n, d.f, d.oh, d.ow] {
        return Err(Error::Dimension(format!(
            "upstream {:?} does not match conv output [{}, {}, {}, {}]",
            upstream.shape(),
            d.n,
            d.f,
            d.oh,
            d.ow
        )));
    }
    let xs = x.data();
    let ks = kernel.data();
    let ups = upstream.data();
    let plane = d.oh * d.ow;

    let mut dx = vec![0.0; xs.len()];
    let mut dk = vec![0.0; ks.len()];
    let mut db = vec![0.0; d.f];

    for n in 0..d.n {
        for f in 0..d.f {
            let up = &ups[(n * d.f + f) * plane..(n * d.f + f + 1) * plane];
            db[f] += up.iter().sum::<f64>();
            for c in 0..d.c {
                let base = (n * d.c + c) * d.h * d.w;
                for u in 0..d.kh {
                    for v in 0..d.kw {
                        let kidx = ((f * d.c + c) * d.kh + u) * d.kw + v;
                        let weight = ks[kidx];
                        let mut acc = 0.0;
                        for i in 0..d.oh {
                            let off = base + (i + u) * d.w + v;
                            let up_row = &up[i * d.ow..(i + 1) * d.ow];
                            let x_row = &xs[off..off + d.ow];
                            for (&g, &xv) in up_row.iter().zip(x_row) {
                                acc += g * xv;
                            }
                            for (dxv, &g) in dx[off..off + d.ow].iter_mut().zip(up_row) {
                                *dxv += g * weight;
                            }
                        }
                        dk[kidx] += acc;
                    }
                }
            }
        }
    }

    Ok(Conv2dGrads {
        input: Tensor::new(x.shape(), dx)?,
        kernel: Tensor::new(kernel.shape(), dk)?,
        bias: Tensor::new(&[d.f], db)?,
    })
}

/// 2×2 max pooling with stride 2 over an `N×C×H×W` tensor.
///
/// Returns the pooled tensor and, for each output cell, the flat index into
/// `x` of the element that won. Ties go to the first maximum in row-major
/// window order.
pub fn maxpool2d(x: &Tensor) -> Result<(Tensor, Vec<usize>)> {
    x.expect_rank(4, "maxpool input")?;
    let (n, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::Dimension(format!(
            "maxpool needs even spatial dims, got {:?}",
            x.shape()
        )));
    }
    let (oh, ow) = (h / 2, w / 2);
    let xs = x.data();
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut argmax = Vec::with_capacity(n * c * oh * ow);
    for nc in 0..n * c {
        let base = nc * h * w;
        for i in 0..oh {
            for j in 0..ow {
                let mut best = base + 2 * i * w + 2 * j;
                for (du, dv) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = base + (2 * i + du) * w + 2 * j + dv;
                    if xs[idx] > xs[best] {
                        best = idx;
                    }
                }
                out.push(xs[best]);
                argmax.push(best);
            }
        }
    }
    Ok((Tensor::new(&[n, c, oh, ow], out)?, argmax))
}

/// Routes each upstream value to the input position recorded by [`maxpool2d`].
pub fn maxpool2d_backward(
    upstream: &Tensor,
    argmax: &[usize],
    input_shape: &[usize],
) -> Result<Tensor> {
    if upstream.len() != argmax.len() {
        return Err(Error::Dimension(format!(
            "upstream {:?} has {} cells but {} argmax entries were recorded",
            upstream.shape(),
            upstream.len(),
            argmax.len()
        )));
    }
    let mut dx = Tensor::zeros(input_shape);
    for (&g, &idx) in upstream.data().iter().zip(argmax) {
        let slot = dx
            .data_mut()
            .get_mut(idx)
            .ok_or_else(|| Error::Dimension(format!("argmax {idx} outside {input_shape:?}")))?;
        *slot += g;
    }
    Ok(dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{central_difference, dot, relative_error};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
    }

    fn naive_conv(x: &Tensor, k: &Tensor, b: &Tensor) -> Tensor {
        let (n, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
        let (f, kh, kw) = (k.shape()[0], k.shape()[2], k.shape()[3]);
        let (oh, ow) = (h - kh + 1, w - kw + 1);
        let mut out = Tensor::zeros(&[n, f, oh, ow]);
        for ni in 0..n {
            for fi in 0..f {
                for i in 0..oh {
                    for j in 0..ow {
                        let mut acc = 0.0;
                        for ci in 0..c {
                            for u in 0..kh {
                                for v in 0..kw {
                                    acc += x.data()[((ni * c + ci) * h + i + u) * w + j + v]
                                        * k.data()[((fi * c + ci) * kh + u) * kw + v];
                                }
                            }
                        }
                        out.data_mut()[((ni * f + fi) * oh + i) * ow + j] = acc + b.data()[fi];
                    }
                }
            }
        }
        out
    }

    #[test]
    fn ones_kernel_sums_window() {
        let x = Tensor::filled(&[1, 1, 2, 2], 1.0);
        let k = Tensor::filled(&[1, 1, 2, 2], 1.0);
        let out = conv2d_forward(&x, &k, &Tensor::zeros(&[1])).unwrap();
        assert_eq!(out.shape(), &[1, 1, 1, 1]);
        assert_eq!(out.data(), &[4.0]);
    }

    #[test]
    fn delta_kernel_reproduces_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random(&[1, 1, 5, 6], &mut rng);
        let mut k = Tensor::zeros(&[1, 1, 3, 3]);
        k.data_mut()[0] = 1.0;
        let out = conv2d_forward(&x, &k, &Tensor::zeros(&[1])).unwrap();
        assert_eq!(out.shape(), &[1, 1, 3, 4]);
        for i in 0..3 {
            for j in 0..4 {
                assert_eq!(out.data()[i * 4 + j], x.data()[i * 6 + j]);
            }
        }
    }

    #[test]
    fn kernel_larger_than_input_is_rejected() {
        let x = Tensor::zeros(&[1, 1, 3, 3]);
        let k = Tensor::zeros(&[1, 1, 4, 2]);
        assert!(matches!(
            conv2d_forward(&x, &k, &Tensor::zeros(&[1])),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn conv_matches_naive_loops_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let x = random(&[2, 3, 7, 6], &mut rng);
            let k = random(&[4, 3, 3, 2], &mut rng);
            let b = random(&[4], &mut rng);
            assert_eq!(conv2d_forward(&x, &k, &b).unwrap(), naive_conv(&x, &k, &b));
        }
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..5 {
            let x = random(&[2, 2, 5, 5], &mut rng);
            let k = random(&[3, 2, 3, 3], &mut rng);
            let b = random(&[3], &mut rng);
            let up = random(&[2, 3, 3, 3], &mut rng);
            let g = conv2d_backward(&x, &k, &b, &up).unwrap();

            let nx = central_difference(&x, 1e-5, |t| dot(&up, &conv2d_forward(t, &k, &b).unwrap()));
            let nk = central_difference(&k, 1e-5, |t| dot(&up, &conv2d_forward(&x, t, &b).unwrap()));
            let nb = central_difference(&b, 1e-5, |t| dot(&up, &conv2d_forward(&x, &k, t).unwrap()));
            for (analytic, numeric) in [(&g.input, &nx), (&g.kernel, &nk), (&g.bias, &nb)] {
                for (a, n) in analytic.data().iter().zip(numeric.data()) {
                    assert!(relative_error(*a, *n) < 1e-5, "{a} vs {n}");
                }
            }
        }
    }

    #[test]
    fn maxpool_picks_max_and_index() {
        let x = Tensor::new(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (out, idx) = maxpool2d(&x).unwrap();
        assert_eq!(out.data(), &[4.0]);
        // (row 1, col 1) in a 2×2 plane
        assert_eq!(idx, vec![3]);
    }

    #[test]
    fn maxpool_tie_goes_to_top_left() {
        let x = Tensor::filled(&[1, 2, 4, 4], 0.5);
        let (_, idx) = maxpool2d(&x).unwrap();
        assert_eq!(&idx[..4], &[0, 2, 8, 10]);
    }

    #[test]
    fn maxpool_rejects_odd_dims() {
        assert!(maxpool2d(&Tensor::zeros(&[1, 1, 3, 4])).is_err());
        assert!(maxpool2d(&Tensor::zeros(&[1, 1, 4, 5])).is_err());
    }

    #[test]
    fn maxpool_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = random(&[2, 2, 4, 6], &mut rng);
        let up = random(&[2, 2, 2, 3], &mut rng);
        let (_, idx) = maxpool2d(&x).unwrap();
        let analytic = maxpool2d_backward(&up, &idx, x.shape()).unwrap();
        let numeric = central_difference(&x, 1e-5, |t| dot(&up, &maxpool2d(t).unwrap().0));
        for (a, n) in analytic.data().iter().zip(numeric.data()) {
            assert!(relative_error(*a, *n) < 1e-6, "{a} vs {n}");
        }
    }
}
