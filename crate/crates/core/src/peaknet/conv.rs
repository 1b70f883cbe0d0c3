use super::{Activation, EncoderParams, Layer, Padding};

/// Contiguous (out_start, in_start, len) runs pairing output index t with input
/// index t + off over a length-n signal.
fn runs(n: usize, off: isize, padding: Padding) -> [(usize, usize, usize); 2] {
    match padding {
        Padding::Zero => {
            let t0 = (-off).max(0) as usize;
            let t1 = (n as isize - off).min(n as isize).max(0) as usize;
            let len = t1.saturating_sub(t0);
            [(t0, (t0 as isize + off) as usize, len), (0, 0, 0)]
        }
        Padding::Circular => {
            let s = off.rem_euclid(n as isize) as usize;
            // t in [0, n - s) reads s + t; t in [n - s, n) reads t - (n - s)
            [(0, s, n - s), (n - s, 0, s)]
        }
    }
}

fn layer_forward(x: &[Vec<f64>], layer: &Layer, padding: Padding) -> Vec<Vec<f64>> {
    let s = layer.spec;
    let n = x[0].len();
    let pad = (s.kernel_len / 2) as isize;
    let mut out: Vec<Vec<f64>> = layer.bias.iter().map(|&b| vec![b; n]).collect();
    for (o, y) in out.iter_mut().enumerate() {
        for (i, xi) in x.iter().enumerate() {
            for j in 0..s.kernel_len {
                let w = layer.weight(o, i, j);
                for (t0, s0, len) in runs(n, j as isize - pad, padding) {
                    for (yt, xv) in y[t0..t0 + len].iter_mut().zip(&xi[s0..s0 + len]) {
                        *yt += w * xv;
                    }
                }
            }
        }
        if s.activation == Activation::Relu {
            y.iter_mut().for_each(|v| *v = v.max(0.0));
        }
    }
    out
}

/// Post-activation outputs of every layer.
pub(super) fn forward_all(params: &EncoderParams, input: &[Vec<f64>]) -> Vec<Vec<Vec<f64>>> {
    let mut acts: Vec<Vec<Vec<f64>>> = Vec::with_capacity(params.layers.len());
    for layer in &params.layers {
        let x = acts.last().map(|a| a.as_slice()).unwrap_or(input);
        let y = layer_forward(x, layer, params.padding);
        acts.push(y);
    }
    acts
}

/// Gradients of every parameter given d loss / d (last layer output).
pub(super) fn backward_all(
    params: &EncoderParams,
    input: &[Vec<f64>],
    acts: &[Vec<Vec<f64>>],
    grad_out: Vec<Vec<f64>>,
) -> EncoderParams {
    let mut grads = params.zeros_like();
    let mut g = grad_out;
    for l in (0..params.layers.len()).rev() {
        let layer = &params.layers[l];
        let s = layer.spec;
        if s.activation == Activation::Relu {
            for (go, ao) in g.iter_mut().zip(&acts[l]) {
                go.iter_mut().zip(ao).for_each(|(gv, &a)| {
                    if a <= 0.0 {
                        *gv = 0.0;
                    }
                });
            }
        }
        let x = if l == 0 { input } else { acts[l - 1].as_slice() };
        let n = x[0].len();
        let pad = (s.kernel_len / 2) as isize;
        let gl = &mut grads.layers[l];
        for (o, go) in g.iter().enumerate() {
            gl.bias[o] = go.iter().sum();
            for (i, xi) in x.iter().enumerate() {
                for j in 0..s.kernel_len {
                    let mut acc = 0.0;
                    for (t0, s0, len) in runs(n, j as isize - pad, params.padding) {
                        acc += go[t0..t0 + len].iter().zip(&xi[s0..s0 + len]).map(|(a, b)| a * b).sum::<f64>();
                    }
                    gl.weights[(o * s.in_ch + i) * s.kernel_len + j] = acc;
                }
            }
        }
        if l > 0 {
            let mut gx = vec![vec![0.0; n]; s.in_ch];
            for (o, go) in g.iter().enumerate() {
                for (i, gxi) in gx.iter_mut().enumerate() {
                    for j in 0..s.kernel_len {
                        let w = layer.weight(o, i, j);
                        for (t0, s0, len) in runs(n, j as isize - pad, params.padding) {
                            for (gv, gov) in gxi[s0..s0 + len].iter_mut().zip(&go[t0..t0 + len]) {
                                *gv += w * gov;
                            }
                        }
                    }
                }
            }
            g = gx;
        }
    }
    grads
}
