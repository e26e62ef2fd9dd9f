//! Layer kernels over `[T, C, H, W]` activations with parameters stored in a flat slice.

use ndarray::{Array2, Array4, ArrayView2, ArrayViewMut2, Axis};

/// 2D convolution without bias, weights laid out `[out, in * k * k]`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Conv {
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub offset: usize,
}

impl Conv {
    pub fn len(&self) -> usize {
        self.out_c * self.in_c * self.k * self.k
    }

    pub fn fan_in(&self) -> usize {
        self.in_c * self.k * self.k
    }

    pub fn out_dim(&self, n: usize) -> usize {
        (n + 2 * self.pad - self.k) / self.stride + 1
    }

    fn weights<'a>(&self, params: &'a [f64]) -> ArrayView2<'a, f64> {
        ArrayView2::from_shape((self.out_c, self.fan_in()), &params[self.offset..self.offset + self.len()]).expect("conv weight slice")
    }

    fn im2col(&self, x: &Array4<f64>) -> Array2<f64> {
        let (t, c, h, w) = x.dim();
        let (ho, wo) = (self.out_dim(h), self.out_dim(w));
        let x = x.as_standard_layout();
        let xs = x.as_slice().expect("standard layout");
        let plane = ho * wo;
        let mut cols = Array2::zeros((c * self.k * self.k, t * plane));
        let out = cols.as_slice_mut().expect("fresh array");
        let row_len = t * plane;
        for ci in 0..c {
            for ki in 0..self.k {
                for kj in 0..self.k {
                    let row = (ci * self.k + ki) * self.k + kj;
                    let dst = &mut out[row * row_len..(row + 1) * row_len];
                    for ti in 0..t {
                        let src = &xs[(ti * c + ci) * h * w..(ti * c + ci + 1) * h * w];
                        for oy in 0..ho {
                            let iy = (oy * self.stride + ki) as isize - self.pad as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let src_row = &src[iy as usize * w..(iy as usize + 1) * w];
                            let dst_row = &mut dst[ti * plane + oy * wo..ti * plane + (oy + 1) * wo];
                            for (ox, d) in dst_row.iter_mut().enumerate() {
                                let ix = (ox * self.stride + kj) as isize - self.pad as isize;
                                if ix >= 0 && ix < w as isize {
                                    *d = src_row[ix as usize];
                                }
                            }
                        }
                    }
                }
            }
        }
        cols
    }

    fn col2im(&self, cols: &Array2<f64>, dims: (usize, usize, usize, usize)) -> Array4<f64> {
        let (t, c, h, w) = dims;
        let (ho, wo) = (self.out_dim(h), self.out_dim(w));
        let plane = ho * wo;
        let row_len = t * plane;
        let cols = cols.as_standard_layout();
        let cs = cols.as_slice().expect("standard layout");
        let mut x = Array4::zeros(dims);
        let xs = x.as_slice_mut().expect("fresh array");
        for ci in 0..c {
            for ki in 0..self.k {
                for kj in 0..self.k {
                    let row = (ci * self.k + ki) * self.k + kj;
                    let src = &cs[row * row_len..(row + 1) * row_len];
                    for ti in 0..t {
                        let dst = &mut xs[(ti * c + ci) * h * w..(ti * c + ci + 1) * h * w];
                        for oy in 0..ho {
                            let iy = (oy * self.stride + ki) as isize - self.pad as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let src_row = &src[ti * plane + oy * wo..ti * plane + (oy + 1) * wo];
                            let dst_row = &mut dst[iy as usize * w..(iy as usize + 1) * w];
                            for (ox, s) in src_row.iter().enumerate() {
                                let ix = (ox * self.stride + kj) as isize - self.pad as isize;
                                if ix >= 0 && ix < w as isize {
                                    dst_row[ix as usize] += s;
                                }
                            }
                        }
                    }
                }
            }
        }
        x
    }

    /// Returns the output and the im2col matrix needed by [`Conv::backward`].
    pub fn forward(&self, params: &[f64], x: &Array4<f64>) -> (Array4<f64>, Array2<f64>) {
        let (t, _, h, w) = x.dim();
        let (ho, wo) = (self.out_dim(h), self.out_dim(w));
        let cols = self.im2col(x);
        let y = self.weights(params).dot(&cols);
        (from_channel_major(y, t, ho, wo), cols)
    }

    pub fn backward(&self, params: &[f64], x_dims: (usize, usize, usize, usize), cols: &Array2<f64>, dy: &Array4<f64>, grad: &mut [f64]) -> Array4<f64> {
        let dmat = to_channel_major(dy);
        let dw = dmat.dot(&cols.t());
        let mut gw = ArrayViewMut2::from_shape((self.out_c, self.fan_in()), &mut grad[self.offset..self.offset + self.len()]).expect("conv grad slice");
        gw += &dw;
        let dcols = self.weights(params).t().dot(&dmat);
        self.col2im(&dcols, x_dims)
    }
}

/// `[C, T * H * W]` matrix to `[T, C, H, W]`.
fn from_channel_major(m: Array2<f64>, t: usize, h: usize, w: usize) -> Array4<f64> {
    let c = m.nrows();
    let m = m.into_shape_with_order((c, t, h, w)).expect("channel-major shape");
    m.permuted_axes([1, 0, 2, 3]).as_standard_layout().into_owned()
}

/// `[T, C, H, W]` to `[C, T * H * W]`.
fn to_channel_major(x: &Array4<f64>) -> Array2<f64> {
    let (t, c, h, w) = x.dim();
    let p = x.view().permuted_axes([1, 0, 2, 3]).as_standard_layout().into_owned();
    p.into_shape_with_order((c, t * h * w)).expect("channel-major shape")
}

/// Per-channel `y = scale * x + shift`; parameters `[scale; c]` then `[shift; c]`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Affine {
    pub c: usize,
    pub offset: usize,
}

impl Affine {
    pub fn forward(&self, params: &[f64], x: &Array4<f64>) -> Array4<f64> {
        let scale = &params[self.offset..self.offset + self.c];
        let shift = &params[self.offset + self.c..self.offset + 2 * self.c];
        let mut y = x.clone();
        for mut frame in y.outer_iter_mut() {
            for (ci, mut plane) in frame.outer_iter_mut().enumerate() {
                let (a, b) = (scale[ci], shift[ci]);
                plane.mapv_inplace(|v| a * v + b);
            }
        }
        y
    }

    pub fn backward(&self, params: &[f64], x: &Array4<f64>, dy: &Array4<f64>, grad: &mut [f64]) -> Array4<f64> {
        let c = self.c;
        let mut dx = dy.clone();
        for ci in 0..c {
            let xs = x.index_axis(Axis(1), ci);
            let ds = dy.index_axis(Axis(1), ci);
            let mut gs = 0.0;
            let mut gb = 0.0;
            for (a, d) in xs.iter().zip(ds.iter()) {
                gs += a * d;
                gb += d;
            }
            grad[self.offset + ci] += gs;
            grad[self.offset + c + ci] += gb;
            let scale = params[self.offset + ci];
            dx.index_axis_mut(Axis(1), ci).mapv_inplace(|v| v * scale);
        }
        dx
    }
}

pub(crate) fn relu(x: &mut Array4<f64>) {
    x.mapv_inplace(|v| v.max(0.0));
}

/// Zeroes `dy` wherever the rectified output was not positive.
pub(crate) fn relu_backward(out: &Array4<f64>, dy: &mut Array4<f64>) {
    ndarray::Zip::from(dy).and(out).for_each(|d, &o| {
        if o <= 0.0 {
            *d = 0.0;
        }
    });
}

/// 3x3 max pooling, stride 2, padding 1. Returns the output and the flat argmax index per output.
pub(crate) fn max_pool(x: &Array4<f64>) -> (Array4<f64>, Vec<usize>) {
    let (t, c, h, w) = x.dim();
    let (ho, wo) = ((h + 2 - 3) / 2 + 1, (w + 2 - 3) / 2 + 1);
    let x = x.as_standard_layout();
    let xs = x.as_slice().expect("standard layout");
    let mut out = Array4::zeros((t, c, ho, wo));
    let mut argmax = Vec::with_capacity(t * c * ho * wo);
    let os = out.as_slice_mut().expect("fresh array");
    for tc in 0..t * c {
        let base = tc * h * w;
        for oy in 0..ho {
            for ox in 0..wo {
                let mut best = f64::NEG_INFINITY;
                let mut best_i = base;
                for dy in 0..3 {
                    let iy = (oy * 2 + dy) as isize - 1;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for dx in 0..3 {
                        let ix = (ox * 2 + dx) as isize - 1;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let i = base + iy as usize * w + ix as usize;
                        if xs[i] > best {
                            best = xs[i];
                            best_i = i;
                        }
                    }
                }
                os[tc * ho * wo + oy * wo + ox] = best;
                argmax.push(best_i);
            }
        }
    }
    (out, argmax)
}

pub(crate) fn max_pool_backward(x_dims: (usize, usize, usize, usize), argmax: &[usize], dy: &Array4<f64>) -> Array4<f64> {
    let mut dx = Array4::zeros(x_dims);
    let dxs = dx.as_slice_mut().expect("fresh array");
    for (&i, d) in argmax.iter().zip(dy.iter()) {
        dxs[i] += d;
    }
    dx
}

/// Spatial mean per frame and channel: `[T, C, H, W]` to `[T, C]`.
pub(crate) fn global_avg_pool(x: &Array4<f64>) -> Array2<f64> {
    let (t, c, h, w) = x.dim();
    let n = (h * w) as f64;
    Array2::from_shape_fn((t, c), |(ti, ci)| x.slice(ndarray::s![ti, ci, .., ..]).sum() / n)
}

pub(crate) fn global_avg_pool_backward(dims: (usize, usize, usize, usize), dy: &Array2<f64>) -> Array4<f64> {
    let n = (dims.2 * dims.3) as f64;
    Array4::from_shape_fn(dims, |(t, c, _, _)| dy[[t, c]] / n)
}

/// Fully connected layer, weights `[out, in]` followed by bias `[out]`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Linear {
    pub in_f: usize,
    pub out_f: usize,
    pub offset: usize,
}

impl Linear {
    #[cfg(test)]
    pub fn len(&self) -> usize {
        self.out_f * self.in_f + self.out_f
    }

    pub fn weights<'a>(&self, params: &'a [f64]) -> ArrayView2<'a, f64> {
        ArrayView2::from_shape((self.out_f, self.in_f), &params[self.offset..self.offset + self.out_f * self.in_f]).expect("linear weight slice")
    }

    fn bias<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        let start = self.offset + self.out_f * self.in_f;
        &params[start..start + self.out_f]
    }

    pub fn forward(&self, params: &[f64], x: &Array2<f64>) -> Array2<f64> {
        let mut y = x.dot(&self.weights(params).t());
        for mut row in y.outer_iter_mut() {
            for (v, b) in row.iter_mut().zip(self.bias(params)) {
                *v += b;
            }
        }
        y
    }

    pub fn backward(&self, params: &[f64], x: &Array2<f64>, dy: &Array2<f64>, grad: &mut [f64]) -> Array2<f64> {
        let dw = dy.t().dot(x);
        let nw = self.out_f * self.in_f;
        for (g, d) in grad[self.offset..self.offset + nw].iter_mut().zip(dw.iter()) {
            *g += d;
        }
        for row in dy.outer_iter() {
            for (g, d) in grad[self.offset + nw..self.offset + nw + self.out_f].iter_mut().zip(row.iter()) {
                *g += d;
            }
        }
        dy.dot(&self.weights(params))
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn random4(rng: &mut ChaCha8Rng, dims: (usize, usize, usize, usize)) -> Array4<f64> {
        Array4::from_shape_fn(dims, |_| rng.random_range(-1.0..1.0))
    }

    /// Direct convolution by explicit loops.
    fn conv_oracle(conv: &Conv, params: &[f64], x: &Array4<f64>) -> Array4<f64> {
        let (t, c, h, w) = x.dim();
        let (ho, wo) = (conv.out_dim(h), conv.out_dim(w));
        let mut y = Array4::zeros((t, conv.out_c, ho, wo));
        for ti in 0..t {
            for o in 0..conv.out_c {
                for oy in 0..ho {
                    for ox in 0..wo {
                        let mut acc = 0.0;
                        for ci in 0..c {
                            for ki in 0..conv.k {
                                for kj in 0..conv.k {
                                    let iy = (oy * conv.stride + ki) as isize - conv.pad as isize;
                                    let ix = (ox * conv.stride + kj) as isize - conv.pad as isize;
                                    if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                                        let wi = ((o * c + ci) * conv.k + ki) * conv.k + kj;
                                        acc += params[conv.offset + wi] * x[[ti, ci, iy as usize, ix as usize]];
                                    }
                                }
                            }
                        }
                        y[[ti, o, oy, ox]] = acc;
                    }
                }
            }
        }
        y
    }

    #[test]
    fn conv_matches_direct_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (k, stride, pad) in [(3, 1, 1), (3, 2, 1), (1, 1, 0), (1, 2, 0), (7, 2, 3)] {
            let conv = Conv { in_c: 3, out_c: 4, k, stride, pad, offset: 5 };
            let params: Vec<f64> = (0..conv.len() + 5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x = random4(&mut rng, (2, 3, 9, 8));
            let (y, _) = conv.forward(&params, &x);
            let want = conv_oracle(&conv, &params, &x);
            assert_eq!(y.dim(), want.dim());
            for (a, b) in y.iter().zip(want.iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conv_backward_is_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let conv = Conv { in_c: 2, out_c: 3, k: 3, stride: 2, pad: 1, offset: 0 };
        let params: Vec<f64> = (0..conv.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = random4(&mut rng, (2, 2, 7, 6));
        let (y, cols) = conv.forward(&params, &x);
        let dy = random4(&mut rng, y.dim());
        let mut grad = vec![0.0; conv.len()];
        let dx = conv.backward(&params, x.dim(), &cols, &dy, &mut grad);
        // <conv(x), dy> == <x, dx> and == <w, dw> by linearity in each argument
        let lhs = (&y * &dy).sum();
        assert!((lhs - (&x * &dx).sum()).abs() < 1e-10);
        let wdot: f64 = params.iter().zip(&grad).map(|(a, b)| a * b).sum();
        assert!((lhs - wdot).abs() < 1e-10);
    }

    #[test]
    fn max_pool_picks_window_max() {
        let x = Array4::from_shape_fn((1, 1, 4, 4), |(_, _, y, x)| (y * 4 + x) as f64);
        let (y, argmax) = max_pool(&x);
        assert_eq!(y.dim(), (1, 1, 2, 2));
        assert_eq!(y.iter().copied().collect::<Vec<_>>(), vec![5.0, 7.0, 13.0, 15.0]);
        let dx = max_pool_backward(x.dim(), &argmax, &Array4::ones(y.dim()));
        assert_eq!(dx.sum(), 4.0);
        assert_eq!(dx[[0, 0, 1, 1]], 1.0);
    }

    #[test]
    fn linear_backward_is_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let lin = Linear { in_f: 5, out_f: 3, offset: 0 };
        let params: Vec<f64> = (0..lin.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = Array2::from_shape_fn((2, 5), |_| rng.random_range(-1.0..1.0));
        let dy = Array2::from_shape_fn((2, 3), |_| rng.random_range(-1.0..1.0));
        let mut grad = vec![0.0; lin.len()];
        let dx = lin.backward(&params, &x, &dy, &mut grad);
        for i in 0..2 {
            for j in 0..5 {
                let want: f64 = (0..3).map(|o| dy[[i, o]] * params[o * 5 + j]).sum();
                assert!((dx[[i, j]] - want).abs() < 1e-12);
            }
        }
        assert!((grad[15] - (dy[[0, 0]] + dy[[1, 0]])).abs() < 1e-12);
    }
}
