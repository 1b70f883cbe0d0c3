//! Small 1D convolutional peak estimator. A stack of same-length conv layers
//! maps a multichannel clip to one logit per sample; the softmax of the logits
//! is the predicted peak distribution, trained against the normalized peak
//! train with any of the distribution losses.

mod checkpoint;
mod conv;
mod train;

pub use checkpoint::Checkpoint;
pub use train::{
    evaluate_ibi, peak_recall, standardize_channels, train, train_from, train_windows, TrainConfig, TrainRecord,
    TrainSample, ValidationStats,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::losses::{loss_from_logits, softmax_head, LossKind};
use crate::rng::stream;
use crate::signals::{detect_peaks, MultiSeries, PeakTrain, ProbSeries, SampledSeries};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    #[default]
    Zero,
    /// Wrap-around; only used to check shift equivariance.
    Circular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel_len: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn n_params(&self) -> usize {
        self.out_ch * self.in_ch * self.kernel_len + self.out_ch
    }
}

/// 3 channels, two hidden layers of 16 with ReLU, linear single-channel head.
pub fn toy_architecture() -> Vec<LayerSpec> {
    vec![
        LayerSpec { in_ch: 3, out_ch: 16, kernel_len: 9, activation: Activation::Relu },
        LayerSpec { in_ch: 16, out_ch: 16, kernel_len: 9, activation: Activation::Relu },
        LayerSpec { in_ch: 16, out_ch: 1, kernel_len: 9, activation: Activation::Linear },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub spec: LayerSpec,
    /// [out_ch][in_ch][kernel_len], row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn weight(&self, o: usize, i: usize, j: usize) -> f64 {
        let s = &self.spec;
        self.weights[(o * s.in_ch + i) * s.kernel_len + j]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    layers: Vec<Layer>,
    padding: Padding,
}

fn check_arch(arch: &[LayerSpec]) -> Result<()> {
    if arch.is_empty() {
        return Err(Error::Shape("architecture has no layers".into()));
    }
    for (l, s) in arch.iter().enumerate() {
        if s.in_ch == 0 || s.out_ch == 0 || s.kernel_len % 2 == 0 {
            return Err(Error::Shape(format!("layer {l}: channels must be > 0 and kernel length odd")));
        }
        if l > 0 && arch[l - 1].out_ch != s.in_ch {
            return Err(Error::Shape(format!("layer {l} expects {} inputs, previous gives {}", s.in_ch, arch[l - 1].out_ch)));
        }
    }
    if arch[arch.len() - 1].out_ch != 1 {
        return Err(Error::Shape("last layer must have one output channel".into()));
    }
    Ok(())
}

impl EncoderParams {
    /// All-zero parameters.
    pub fn zeros(arch: &[LayerSpec], padding: Padding) -> Result<Self> {
        check_arch(arch)?;
        let layers = arch
            .iter()
            .map(|&spec| Layer {
                spec,
                weights: vec![0.0; spec.out_ch * spec.in_ch * spec.kernel_len],
                bias: vec![0.0; spec.out_ch],
            })
            .collect();
        Ok(Self { layers, padding })
    }

    /// Uniform Xavier init, a = sqrt(6 / (fan_in + fan_out)), zero biases.
    pub fn init(arch: &[LayerSpec], padding: Padding, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(arch, padding)?;
        for (l, layer) in p.layers.iter_mut().enumerate() {
            let s = layer.spec;
            let a = (6.0 / ((s.in_ch + s.out_ch) * s.kernel_len) as f64).sqrt();
            let mut rng = stream(seed, &[crate::rng::tag("init"), l as u64]);
            layer.weights.iter_mut().for_each(|w| *w = rng.random_range(-a..=a));
        }
        Ok(p)
    }

    pub fn from_flat(arch: &[LayerSpec], padding: Padding, flat: &[f64]) -> Result<Self> {
        let mut p = Self::zeros(arch, padding)?;
        if flat.len() != p.n_params() {
            return Err(Error::Shape(format!("expected {} parameters, got {}", p.n_params(), flat.len())));
        }
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite parameter".into()));
        }
        let mut it = flat.iter().copied();
        for layer in &mut p.layers {
            layer.weights.iter_mut().chain(layer.bias.iter_mut()).for_each(|v| *v = it.next().unwrap());
        }
        Ok(p)
    }

    /// Per layer: weights, then biases.
    pub fn to_flat(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias).copied()).collect()
    }

    pub fn arch(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn padding(&self) -> Padding {
        self.padding
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.spec.n_params()).sum()
    }

    pub fn in_channels(&self) -> usize {
        self.layers[0].spec.in_ch
    }

    pub fn receptive_field(&self) -> usize {
        1 + self.layers.iter().map(|l| l.spec.kernel_len - 1).sum::<usize>()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.arch(), self.padding).expect("architecture already validated")
    }

    /// self += a * other
    pub fn axpy(&mut self, a: f64, other: &EncoderParams) {
        for (l, o) in self.layers.iter_mut().zip(&other.layers) {
            l.weights.iter_mut().zip(&o.weights).for_each(|(x, y)| *x += a * y);
            l.bias.iter_mut().zip(&o.bias).for_each(|(x, y)| *x += a * y);
        }
    }

    pub fn scale(&mut self, a: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|x| *x *= a);
        }
    }
}

fn check_input(params: &EncoderParams, clip: &MultiSeries) -> Result<()> {
    if clip.n_channels() != params.in_channels() {
        return Err(Error::Shape(format!(
            "model expects {} channels, clip has {}",
            params.in_channels(),
            clip.n_channels()
        )));
    }
    if clip.len() < params.receptive_field() {
        return Err(Error::TooShort { needed: params.receptive_field(), got: clip.len() });
    }
    Ok(())
}

/// One logit per input sample.
pub fn forward(params: &EncoderParams, clip: &MultiSeries) -> Result<SampledSeries> {
    check_input(params, clip)?;
    let acts = conv::forward_all(params, clip.channels());
    let logits = acts.into_iter().last().unwrap().pop().unwrap();
    SampledSeries::new(logits, clip.rate_hz(), 0.0)
}

/// Post-activation outputs of every layer, [layer][channel][sample].
pub fn layer_outputs(params: &EncoderParams, clip: &MultiSeries) -> Result<Vec<Vec<Vec<f64>>>> {
    check_input(params, clip)?;
    Ok(conv::forward_all(params, clip.channels()))
}

/// Loss of softmax(forward(clip)) against `target` and its gradient with
/// respect to every parameter.
pub fn backward(
    params: &EncoderParams,
    clip: &MultiSeries,
    target: &ProbSeries,
    kind: LossKind,
) -> Result<(f64, EncoderParams)> {
    check_input(params, clip)?;
    if target.len() != clip.len() {
        return Err(Error::Shape(format!("target length {} != clip length {}", target.len(), clip.len())));
    }
    let acts = conv::forward_all(params, clip.channels());
    let logits = &acts[acts.len() - 1][0];
    let head = loss_from_logits(kind, logits, target.mass())?;
    let grads = conv::backward_all(params, clip.channels(), &acts, vec![head.grad_logits]);
    Ok((head.value, grads))
}

/// Softmax head followed by the standard peak detector on the probability series.
pub fn infer_peaks(params: &EncoderParams, clip: &MultiSeries) -> Result<PeakTrain> {
    let input = standardize_channels(clip)?;
    let probs = softmax_head(&forward(params, &input)?)?;
    peaks_from_probs(&probs)
}

pub fn peaks_from_probs(probs: &ProbSeries) -> Result<PeakTrain> {
    detect_peaks(&probs.to_series())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clip(channels: Vec<Vec<f64>>) -> MultiSeries {
        MultiSeries::new(channels, 30.0).unwrap()
    }

    #[test]
    fn zero_params_give_uniform_head() {
        let p = EncoderParams::zeros(&toy_architecture(), Padding::Zero).unwrap();
        let x = clip(vec![(0..64).map(|i| (i as f64).sin()).collect(); 3]);
        let logits = forward(&p, &x).unwrap();
        assert!(logits.values().iter().all(|&v| v == 0.0));
        let probs = softmax_head(&logits).unwrap();
        assert!(probs.mass().iter().all(|&m| (m - 1.0 / 64.0).abs() < 1e-15));
    }

    #[test]
    fn identity_layer_passes_input() {
        let arch = [LayerSpec { in_ch: 1, out_ch: 1, kernel_len: 1, activation: Activation::Linear }];
        let p = EncoderParams::from_flat(&arch, Padding::Zero, &[1.0, 0.0]).unwrap();
        let v: Vec<f64> = (0..20).map(|i| (i as f64 * 0.7).cos()).collect();
        assert_eq!(forward(&p, &clip(vec![v.clone()])).unwrap().values(), v.as_slice());
    }

    #[test]
    fn circular_padding_is_shift_equivariant() {
        let p = EncoderParams::init(&toy_architecture(), Padding::Circular, 5).unwrap();
        let mut r = stream(1, &[]);
        let x: Vec<Vec<f64>> = (0..3).map(|_| (0..80).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let d = 13;
        let shifted: Vec<Vec<f64>> = x.iter().map(|c| (0..80).map(|t| c[(t + 80 - d) % 80]).collect()).collect();
        let a = forward(&p, &clip(x)).unwrap();
        let b = forward(&p, &clip(shifted)).unwrap();
        for t in 0..80 {
            assert!((b.values()[t] - a.values()[(t + 80 - d) % 80]).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_errors() {
        let p = EncoderParams::init(&toy_architecture(), Padding::Zero, 1).unwrap();
        assert!(matches!(forward(&p, &clip(vec![vec![0.0; 64]; 2])), Err(Error::Shape(_))));
        assert!(matches!(forward(&p, &clip(vec![vec![0.0; 10]; 3])), Err(Error::TooShort { .. })));
        let target = ProbSeries::delta(63, 3, 30.0).unwrap();
        assert!(backward(&p, &clip(vec![vec![0.0; 64]; 3]), &target, LossKind::Ws).is_err());
        assert!(EncoderParams::from_flat(&toy_architecture(), Padding::Zero, &[0.0; 3]).is_err());
        let bad = [LayerSpec { in_ch: 1, out_ch: 2, kernel_len: 3, activation: Activation::Linear }];
        assert!(EncoderParams::zeros(&bad, Padding::Zero).is_err());
    }

    #[test]
    fn toy_parameter_count() {
        let p = EncoderParams::init(&toy_architecture(), Padding::Zero, 0).unwrap();
        assert_eq!(p.n_params(), (3 * 16 * 9 + 16) + (16 * 16 * 9 + 16) + (16 * 9 + 1));
        assert_eq!(p.receptive_field(), 25);
        let back = EncoderParams::from_flat(&p.arch(), Padding::Zero, &p.to_flat()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn concentrated_mass_is_read_out_exactly() {
        let n = 300;
        let idx = [20usize, 47, 71, 100, 128, 151, 183, 210, 236, 262];
        let mut m = vec![1e-6; n];
        for &i in &idx {
            m[i] = 1.0;
        }
        let total: f64 = m.iter().sum();
        let probs = ProbSeries::new(m.iter().map(|v| v / total).collect(), 30.0).unwrap();
        assert_eq!(peaks_from_probs(&probs).unwrap().indices(), &idx);
        let uniform = ProbSeries::new(vec![1.0 / n as f64; n], 30.0).unwrap();
        assert!(peaks_from_probs(&uniform).unwrap().is_empty());
    }
}
