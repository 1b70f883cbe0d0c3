use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use systole::losses::{loss_from_logits, softmax, wasserstein, LossKind};
use systole::peaknet::{backward, forward, layer_outputs, Activation, EncoderParams, LayerSpec, Padding};
use systole::signals::{MultiSeries, ProbSeries};

fn small_arch() -> Vec<LayerSpec> {
    vec![
        LayerSpec { in_ch: 2, out_ch: 6, kernel_len: 5, activation: Activation::Relu },
        LayerSpec { in_ch: 6, out_ch: 5, kernel_len: 3, activation: Activation::Relu },
        LayerSpec { in_ch: 5, out_ch: 1, kernel_len: 5, activation: Activation::Linear },
    ]
}

fn random_case(seed: u64) -> (EncoderParams, MultiSeries, ProbSeries) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = EncoderParams::init(&small_arch(), Padding::Zero, seed).unwrap();
    for l in p.layers_mut() {
        l.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.3..0.3));
    }
    let n = 48;
    let x = MultiSeries::new((0..2).map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).collect(), 30.0)
        .unwrap();
    let mut m = vec![0.0; n];
    for _ in 0..3 {
        m[rng.random_range(0..n)] += 1.0;
    }
    let total: f64 = m.iter().sum();
    let target = ProbSeries::new(m.iter().map(|v| v / total).collect(), 30.0).unwrap();
    (p, x, target)
}

fn loss_at(arch: &[LayerSpec], flat: &[f64], x: &MultiSeries, t: &ProbSeries, kind: LossKind) -> f64 {
    let p = EncoderParams::from_flat(arch, Padding::Zero, flat).unwrap();
    let logits = forward(&p, x).unwrap();
    loss_from_logits(kind, logits.values(), t.mass()).unwrap().value
}

/// Which ReLU units are active; a change between θ - h and θ + h means the
/// difference quotient straddles a kink.
fn relu_pattern(arch: &[LayerSpec], flat: &[f64], x: &MultiSeries) -> Vec<bool> {
    let p = EncoderParams::from_flat(arch, Padding::Zero, flat).unwrap();
    let outs = layer_outputs(&p, x).unwrap();
    outs[..outs.len() - 1].iter().flatten().flatten().map(|&v| v > 0.0).collect()
}

#[test]
fn gradients_match_central_differences() {
    let h = 1e-5;
    let (mut checked, mut kinks) = (0, 0);
    for kind in LossKind::ALL {
        for seed in 0..3 {
            let (p, x, t) = random_case(seed);
            assert!(p.n_params() <= 2000);
            let (_, grads) = backward(&p, &x, &t, kind).unwrap();
            let analytic = grads.to_flat();
            let flat = p.to_flat();
            let scale = analytic.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            for k in 0..flat.len() {
                let mut plus = flat.clone();
                let mut minus = flat.clone();
                plus[k] += h;
                minus[k] -= h;
                if relu_pattern(&p.arch(), &plus, &x) != relu_pattern(&p.arch(), &minus, &x) {
                    kinks += 1;
                    continue;
                }
                checked += 1;
                let numeric = (loss_at(&p.arch(), &plus, &x, &t, kind) - loss_at(&p.arch(), &minus, &x, &t, kind))
                    / (2.0 * h);
                let denom = analytic[k].abs().max(numeric.abs()).max(1e-3 * scale);
                let rel = (analytic[k] - numeric).abs() / denom;
                assert!(rel < 1e-4, "{kind} seed {seed} param {k}: {} vs {numeric} (rel {rel:e})", analytic[k]);
            }
        }
    }
    println!("checked {checked} parameters, skipped {kinks} at ReLU kinks");
    assert!(kinks * 50 < checked);
}

#[test]
fn loss_value_matches_losses_module() {
    let (p, x, t) = random_case(7);
    let (loss, _) = backward(&p, &x, &t, LossKind::Ws).unwrap();
    let probs = ProbSeries::new(softmax(forward(&p, &x).unwrap().values()), 30.0).unwrap();
    let direct = wasserstein(&probs, &t).unwrap().value;
    assert!((loss - direct).abs() < 1e-12);
}

#[test]
fn head_bias_shift_changes_nothing_else() {
    let (p, x, t) = random_case(3);
    let mut q = p.clone();
    let last = q.layers_mut().len() - 1;
    q.layers_mut()[last].bias[0] += 2.5;
    for kind in LossKind::ALL {
        let (la, ga) = backward(&p, &x, &t, kind).unwrap();
        let (lb, gb) = backward(&q, &x, &t, kind).unwrap();
        assert!((la - lb).abs() < 1e-10);
        let (fa, fb) = (ga.to_flat(), gb.to_flat());
        for k in 0..fa.len() {
            assert!((fa[k] - fb[k]).abs() < 1e-10 * (1.0 + fa[k].abs()));
        }
    }
}

#[test]
fn matching_prediction_has_zero_sed_gradient() {
    // a 1x1 identity head reproduces the log of the target exactly
    let arch = [LayerSpec { in_ch: 1, out_ch: 1, kernel_len: 1, activation: Activation::Linear }];
    let p = EncoderParams::from_flat(&arch, Padding::Zero, &[1.0, 0.0]).unwrap();
    let mass = [0.1, 0.2, 0.3, 0.4];
    let x = MultiSeries::new(vec![mass.iter().map(|m: &f64| m.ln()).collect()], 30.0).unwrap();
    let t = ProbSeries::new(mass.to_vec(), 30.0).unwrap();
    let (loss, g) = backward(&p, &x, &t, LossKind::Sed).unwrap();
    assert!(loss < 1e-30);
    assert!(g.to_flat().iter().all(|v| v.abs() < 1e-15));
}

