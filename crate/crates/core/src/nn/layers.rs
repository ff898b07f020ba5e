//! Forward and backward kernels for each layer kind.
//!
//! Activations are batch-major: `[B, H, W, C]` for image-shaped data and
//! `[B, F]` for flat data. Conv weights are `[k, k, C_in, C_out]`, dense
//! weights `[fan_in, fan_out]`.

use super::tensor::Tensor;

/// `c = alpha * op(a) * op(b) + beta * c` on row-major buffers.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    a_trans: bool,
    b: &[f32],
    b_trans: bool,
    c: &mut [f32],
    beta: f32,
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.iter_mut().for_each(|v| *v *= beta);
        return;
    }
    let (rsa, csa) = if a_trans { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_trans { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the buffers have the asserted lengths and the strides describe
    // exactly an m x k, k x n and m x n matrix inside them.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub in_h: usize,
    pub in_w: usize,
    pub in_c: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub out_c: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeometry {
    pub fn patch_len(&self) -> usize {
        self.kernel * self.kernel * self.in_c
    }

    /// Output positions `[lo, hi)` whose tap `k` lands inside an input of
    /// length `input`.
    fn valid_range(&self, k: usize, out: usize, input: usize) -> (usize, usize) {
        let lo = if k >= self.padding { 0 } else { (self.padding - k).div_ceil(self.stride) };
        let hi = if input + self.padding > k { ((input + self.padding - k - 1) / self.stride + 1).min(out) } else { 0 };
        (lo, hi.max(lo))
    }

    fn source(&self, o: usize, k: usize) -> Option<usize> {
        let pos = (o * self.stride + k) as isize - self.padding as isize;
        (pos >= 0 && (pos as usize) < self.in_h.max(self.in_w)).then_some(pos as usize)
    }
}

/// Unfold input patches into a patch-major `(k*k*C_in) x (B*out_h*out_w)`
/// matrix. This orientation packs far faster in the GEMMs that consume it.
pub fn im2col(x: &[f32], batch: usize, g: &ConvGeometry) -> Vec<f32> {
    let rows = batch * g.out_h * g.out_w;
    let mut cols = vec![0.0f32; g.patch_len() * rows];
    let item = g.in_h * g.in_w * g.in_c;
    let step = g.stride * g.in_c;
    for kx in 0..g.kernel {
        let (ox_lo, ox_hi) = g.valid_range(kx, g.out_w, g.in_w);
        if ox_lo >= ox_hi {
            continue;
        }
        let ix_lo = ox_lo * g.stride + kx - g.padding;
        for ky in 0..g.kernel {
            for c in 0..g.in_c {
                let e = (ky * g.kernel + kx) * g.in_c + c;
                let dst = &mut cols[e * rows..(e + 1) * rows];
                for b in 0..batch {
                    let xb = &x[b * item..(b + 1) * item];
                    for oy in 0..g.out_h {
                        let Some(iy) = g.source(oy, ky).filter(|&v| v < g.in_h) else {
                            continue;
                        };
                        let row = (b * g.out_h + oy) * g.out_w;
                        let src = &xb[(iy * g.in_w + ix_lo) * g.in_c + c..];
                        for (d, v) in dst[row + ox_lo..row + ox_hi].iter_mut().zip(src.iter().step_by(step)) {
                            *d = *v;
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatter-add patch gradients, given row-major as
/// `(B*out_h*out_w) x (k*k*C_in)`, back onto the input.
pub fn col2im(cols: &[f32], batch: usize, g: &ConvGeometry) -> Vec<f32> {
    let plen = g.patch_len();
    let item = g.in_h * g.in_w * g.in_c;
    let mut dx = vec![0.0f32; batch * item];
    for b in 0..batch {
        let db = &mut dx[b * item..(b + 1) * item];
        for oy in 0..g.out_h {
            for ox in 0..g.out_w {
                let row = ((b * g.out_h + oy) * g.out_w + ox) * plen;
                for ky in 0..g.kernel {
                    let Some(iy) = g.source(oy, ky).filter(|&v| v < g.in_h) else {
                        continue;
                    };
                    for kx in 0..g.kernel {
                        let Some(ix) = g.source(ox, kx).filter(|&v| v < g.in_w) else {
                            continue;
                        };
                        let dst = (iy * g.in_w + ix) * g.in_c;
                        let src = row + (ky * g.kernel + kx) * g.in_c;
                        for c in 0..g.in_c {
                            db[dst + c] += cols[src + c];
                        }
                    }
                }
            }
        }
    }
    dx
}

pub struct ParamGrads {
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

/// Returns the output and the im2col matrix for reuse in the backward pass.
pub fn conv_forward(x: &Tensor, weight: &[f32], bias: &[f32], g: &ConvGeometry) -> (Tensor, Vec<f32>) {
    let batch = x.batch();
    let cols = im2col(x.data(), batch, g);
    let rows = batch * g.out_h * g.out_w;
    let mut out = Vec::with_capacity(rows * g.out_c);
    for _ in 0..rows {
        out.extend_from_slice(bias);
    }
    gemm(rows, g.patch_len(), g.out_c, &cols, true, weight, false, &mut out, 1.0);
    let t = Tensor::new(vec![batch, g.out_h, g.out_w, g.out_c], out).expect("conv output shape");
    (t, cols)
}

pub fn conv_backward(
    cols: &[f32],
    weight: &[f32],
    grad_out: &Tensor,
    g: &ConvGeometry,
    need_input_grad: bool,
) -> (Option<Tensor>, ParamGrads) {
    let batch = grad_out.batch();
    let rows = batch * g.out_h * g.out_w;
    let plen = g.patch_len();
    let dy = grad_out.data();
    let mut dw = vec![0.0f32; plen * g.out_c];
    gemm(plen, rows, g.out_c, cols, false, dy, false, &mut dw, 0.0);
    let mut db = vec![0.0f32; g.out_c];
    for r in 0..rows {
        for (acc, v) in db.iter_mut().zip(&dy[r * g.out_c..(r + 1) * g.out_c]) {
            *acc += v;
        }
    }
    let dx = need_input_grad.then(|| {
        let mut dcols = vec![0.0f32; rows * plen];
        gemm(rows, g.out_c, plen, dy, false, weight, true, &mut dcols, 0.0);
        let dx = col2im(&dcols, batch, g);
        Tensor::new(vec![batch, g.in_h, g.in_w, g.in_c], dx).expect("conv input grad shape")
    });
    (dx, ParamGrads { weight: dw, bias: db })
}

pub fn dense_forward(x: &Tensor, weight: &[f32], bias: &[f32], fan_in: usize, fan_out: usize) -> Tensor {
    let batch = x.batch();
    let mut out = Vec::with_capacity(batch * fan_out);
    for _ in 0..batch {
        out.extend_from_slice(bias);
    }
    gemm(batch, fan_in, fan_out, x.data(), false, weight, false, &mut out, 1.0);
    Tensor::new(vec![batch, fan_out], out).expect("dense output shape")
}

pub fn dense_backward(
    input: &Tensor,
    weight: &[f32],
    grad_out: &Tensor,
    fan_in: usize,
    fan_out: usize,
    need_input_grad: bool,
) -> (Option<Tensor>, ParamGrads) {
    let batch = input.batch();
    let dy = grad_out.data();
    let mut dw = vec![0.0f32; fan_in * fan_out];
    gemm(fan_in, batch, fan_out, input.data(), true, dy, false, &mut dw, 0.0);
    let mut db = vec![0.0f32; fan_out];
    for b in 0..batch {
        for (acc, v) in db.iter_mut().zip(&dy[b * fan_out..(b + 1) * fan_out]) {
            *acc += v;
        }
    }
    let dx = need_input_grad.then(|| {
        let mut dx = vec![0.0f32; batch * fan_in];
        gemm(batch, fan_out, fan_in, dy, false, weight, true, &mut dx, 0.0);
        Tensor::new(vec![batch, fan_in], dx).expect("dense input grad shape")
    });
    (dx, ParamGrads { weight: dw, bias: db })
}

/// Returns the pooled output and, per output element, the flat input index
/// of the selected maximum (first maximum on ties).
pub fn maxpool_forward(x: &Tensor, kernel: usize, stride: usize) -> (Tensor, Vec<u32>) {
    let s = x.shape();
    let (batch, h, w, c) = (s[0], s[1], s[2], s[3]);
    let (oh, ow) = ((h - kernel) / stride + 1, (w - kernel) / stride + 1);
    let xd = x.data();
    let mut out = Vec::with_capacity(batch * oh * ow * c);
    let mut argmax = Vec::with_capacity(batch * oh * ow * c);
    for b in 0..batch {
        for oy in 0..oh {
            for ox in 0..ow {
                for ch in 0..c {
                    let mut best = f32::NEG_INFINITY;
                    let mut best_idx = 0usize;
                    for ky in 0..kernel {
                        for kx in 0..kernel {
                            let idx = ((b * h + oy * stride + ky) * w + ox * stride + kx) * c + ch;
                            if xd[idx] > best || (ky == 0 && kx == 0) {
                                best = xd[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    out.push(best);
                    argmax.push(best_idx as u32);
                }
            }
        }
    }
    let t = Tensor::new(vec![batch, oh, ow, c], out).expect("pool output shape");
    (t, argmax)
}

pub fn maxpool_backward(argmax: &[u32], grad_out: &Tensor, input_shape: &[usize]) -> Tensor {
    let mut dx = Tensor::zeros(input_shape.to_vec());
    let d = dx.data_mut();
    for (&idx, &g) in argmax.iter().zip(grad_out.data()) {
        d[idx as usize] += g;
    }
    dx
}

pub fn relu_forward(x: &Tensor) -> Tensor {
    let data = x.data().iter().map(|&v| v.max(0.0)).collect();
    Tensor::new(x.shape().to_vec(), data).expect("relu shape")
}

/// Gradient through relu given its *output*.
pub fn relu_backward(output: &Tensor, grad_out: &Tensor) -> Tensor {
    let data = output.data().iter().zip(grad_out.data()).map(|(&y, &g)| if y > 0.0 { g } else { 0.0 }).collect();
    Tensor::new(grad_out.shape().to_vec(), data).expect("relu grad shape")
}

/// First half of each row feeds the value stream, second half the advantage stream.
pub fn split_forward(x: &Tensor) -> (Tensor, Tensor) {
    let batch = x.batch();
    let half = x.item_len() / 2;
    let mut first = Vec::with_capacity(batch * half);
    let mut second = Vec::with_capacity(batch * half);
    for b in 0..batch {
        let row = x.item(b);
        first.extend_from_slice(&row[..half]);
        second.extend_from_slice(&row[half..]);
    }
    (
        Tensor::new(vec![batch, half], first).expect("split shape"),
        Tensor::new(vec![batch, half], second).expect("split shape"),
    )
}

pub fn split_backward(grad_first: &Tensor, grad_second: &Tensor) -> Tensor {
    let batch = grad_first.batch();
    let half = grad_first.item_len();
    let mut out = Vec::with_capacity(batch * half * 2);
    for b in 0..batch {
        out.extend_from_slice(grad_first.item(b));
        out.extend_from_slice(grad_second.item(b));
    }
    Tensor::new(vec![batch, 2 * half], out).expect("split grad shape")
}

/// `Q(s, a) = V(s) + A(s, a) - mean_a A(s, a)`.
pub fn dueling_forward(value: &Tensor, advantage: &Tensor) -> Tensor {
    let batch = value.batch();
    let actions = advantage.item_len();
    let mut out = Vec::with_capacity(batch * actions);
    for b in 0..batch {
        let v = value.item(b)[0];
        let adv = advantage.item(b);
        let mean = adv.iter().sum::<f32>() / actions as f32;
        out.extend(adv.iter().map(|&a| v + (a - mean)));
    }
    Tensor::new(vec![batch, actions], out).expect("dueling shape")
}

pub fn dueling_backward(grad_q: &Tensor) -> (Tensor, Tensor) {
    let batch = grad_q.batch();
    let actions = grad_q.item_len();
    let mut dv = Vec::with_capacity(batch);
    let mut da = Vec::with_capacity(batch * actions);
    for b in 0..batch {
        let g = grad_q.item(b);
        let sum: f32 = g.iter().sum();
        let mean = sum / actions as f32;
        dv.push(sum);
        da.extend(g.iter().map(|&x| x - mean));
    }
    (
        Tensor::new(vec![batch, 1], dv).expect("value grad shape"),
        Tensor::new(vec![batch, actions], da).expect("advantage grad shape"),
    )
}
