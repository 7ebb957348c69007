//! End-to-end finite-difference checks: the reverse-mode gradients of whole
//! model graphs (convolution blocks, normalization, pooling, recurrent head,
//! STRF and frequency-dynamic front-ends) against central differences on the
//! training loss.

use strfsed::models::{Architecture, ModelConfig, ModelGraph};
use strfsed::nn::ops::mse_loss;
use strfsed::nn::Tensor;
use strfsed::rng::Rng;

fn rand_tensor(shape: &[usize], lo: f64, hi: f64, rng: &mut Rng) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.uniform(lo, hi)).collect())
}

fn tiny_config(arch: Architecture) -> ModelConfig {
    let mut cfg = ModelConfig::toy(arch, 2);
    cfg.conv_widths = [2, 2, 2, 2, 2, 2];
    cfg.gru_hidden = 2;
    cfg.n_mels = 32;
    cfg.strf_pairs = 2;
    cfg.strf_axes = strfsed::strf::KernelAxes {
        n_t: 5,
        n_f: 6,
        time_step_s: 0.2,
        freq_step_oct: 0.25,
    };
    cfg.fdy.n_basis = 2;
    cfg.fdy.hidden = Some(2);
    cfg
}

/// Training-mode loss of a 2-clip batch against fixed targets.
fn batch_loss(model: &mut ModelGraph, mels: &[Tensor], targets: &[Tensor]) -> f64 {
    let outs = model.forward_batch(mels, true).unwrap();
    let scale = 1.0 / mels.len() as f64;
    outs.iter()
        .zip(targets)
        .map(|(o, t)| mse_loss(o, t).unwrap().0 * scale)
        .sum()
}

fn check_graph_gradients(arch: Architecture, samples_per_param: usize) {
    let cfg = tiny_config(arch);
    let mut model = ModelGraph::build(&cfg).unwrap();
    let mut rng = Rng::new(17);
    let t_len = 6;
    let mels: Vec<Tensor> = (0..2)
        .map(|_| rand_tensor(&[t_len, 32], 0.0, 1.0, &mut rng))
        .collect();
    let targets: Vec<Tensor> = (0..2)
        .map(|_| {
            rand_tensor(&[t_len, 2], 0.0, 1.0, &mut rng)
                .map(|v| if v < 0.3 { 1.0 } else { 0.0 })
        })
        .collect();

    // analytic gradients
    model.zero_grads();
    let outs = model.forward_batch(&mels, true).unwrap();
    let scale = 1.0 / mels.len() as f64;
    let mut ups = Vec::new();
    for (o, t) in outs.iter().zip(&targets) {
        let (_, mut g) = mse_loss(o, t).unwrap();
        g.scale(scale);
        ups.push(g);
    }
    model.backward_batch(ups).unwrap();

    // snapshot analytic grads and pick probe indices per parameter tensor
    let mut probes: Vec<(String, usize, f64)> = Vec::new();
    {
        let mut probe_rng = Rng::new(99);
        for p in model.params_mut() {
            for _ in 0..samples_per_param.min(p.value.numel()) {
                let j = probe_rng.below(p.value.numel());
                probes.push((p.name.clone(), j, p.grad.data()[j]));
            }
        }
    }

    let h = 1e-4;
    let mut worst: (f64, String) = (0.0, String::new());
    for (name, j, analytic) in probes {
        let set = |model: &mut ModelGraph, delta: f64| {
            for p in model.params_mut() {
                if p.name == name {
                    p.value.data_mut()[j] += delta;
                }
            }
        };
        set(&mut model, h);
        let fp = batch_loss(&mut model, &mels, &targets);
        set(&mut model, -2.0 * h);
        let fm = batch_loss(&mut model, &mels, &targets);
        set(&mut model, h); // restore
        let fd = (fp - fm) / (2.0 * h);
        let rel = (analytic - fd).abs() / fd.abs().max(1e-8);
        if rel > worst.0 {
            worst = (rel, format!("{name}[{j}] analytic {analytic} fd {fd}"));
        }
    }
    assert!(
        worst.0 < 1e-3,
        "{arch}: worst relative error {} at {}",
        worst.0,
        worst.1
    );
}

#[test]
fn baseline_graph_matches_finite_differences() {
    check_graph_gradients(Architecture::Baseline, 3);
}

#[test]
fn strfnet_graph_matches_finite_differences() {
    check_graph_gradients(Architecture::Strfnet, 3);
}

#[test]
fn fdy_crnn_graph_matches_finite_differences() {
    check_graph_gradients(Architecture::FdyCrnn, 3);
}

#[test]
fn tb_strf_fdynet3_graph_matches_finite_differences() {
    check_graph_gradients(Architecture::TbStrfFdynet3, 2);
}
