//! Fast self-check suites behind the `verify` command: kernel peak
//! locations, gradient checks, dynamic-convolution equivalences and the
//! metric enumeration oracle. Each suite re-implements its reference
//! computation naively here so the checks stay independent of the
//! optimized code paths they exercise.

use crate::eval::{f1_mo, default_threshold_grid, SegmentScores};
use crate::fdy::{fdy_attention, fdy_forward, fdy_forward_with_weights, FdyConfig, FdyLayer};
use crate::nn::ops::{conv2d_forward, dense_forward, maxpool2d_forward};
use crate::nn::{Adam, AdamConfig, Tensor};
use crate::rng::Rng;
use crate::strf::{
    build_bank, default_init_params, modulation_peak, KernelAxes, ScaleRateParam, StrfConv,
};
use crate::strf::Direction;

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl SuiteResult {
    fn pass(name: &'static str, detail: String) -> SuiteResult {
        SuiteResult {
            name,
            passed: true,
            detail,
        }
    }

    fn fail(name: &'static str, detail: String) -> SuiteResult {
        SuiteResult {
            name,
            passed: false,
            detail,
        }
    }
}

/// Known fault-injection hooks for exercising the failure path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Corrupt kernel normalization before the kernel suite checks it.
    KernelNorm,
}

impl Fault {
    pub fn parse(s: &str) -> Option<Fault> {
        match s {
            "kernel-norm" => Some(Fault::KernelNorm),
            _ => None,
        }
    }
}

/// Run every suite; order is stable.
pub fn run_all(fault: Option<Fault>) -> Vec<SuiteResult> {
    vec![
        suite_kernel_peaks(fault),
        suite_strf_gradients(),
        suite_fdy_equivalence(),
        suite_nn_oracles(),
        suite_metric_enumeration(),
    ]
}

/// Peak-location contract, unit norms and the direction mirror over the
/// default initialization grid.
pub fn suite_kernel_peaks(fault: Option<Fault>) -> SuiteResult {
    const NAME: &str = "kernel-peaks";
    let axes = KernelAxes::default();
    let params = default_init_params();
    let bank = match build_bank(&params, &axes) {
        Ok(b) => b,
        Err(e) => return SuiteResult::fail(NAME, format!("bank build failed: {e}")),
    };
    let mut kernels = bank.kernels.clone();
    if fault == Some(Fault::KernelNorm) {
        for v in &mut kernels[0].values {
            *v *= 1.1;
        }
    }

    let rate_bin = 1.0 / (axes.n_t as f64 * axes.time_step_s);
    let scale_bin = 1.0 / (axes.n_f as f64 * axes.freq_step_oct);
    let mut peak_hits = 0;
    for k in &kernels {
        let norm: f64 = k.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return SuiteResult::fail(
                NAME,
                format!(
                    "kernel (scale {:.3}, rate {:.3}, {}) norm {norm}",
                    k.param.scale(),
                    k.param.rate(),
                    k.param.direction
                ),
            );
        }
        let peak = match modulation_peak(&k.values, axes.n_t, axes.n_f, axes.time_step_s, axes.freq_step_oct)
        {
            Ok(p) => p,
            Err(e) => return SuiteResult::fail(NAME, format!("peak analysis failed: {e}")),
        };
        let ok = (peak.rate_hz - k.param.rate()).abs() <= rate_bin
            && (peak.scale_cyc_per_oct - k.param.scale()).abs() <= scale_bin
            && peak.direction == k.param.direction;
        if ok {
            peak_hits += 1;
        }
    }
    if peak_hits != kernels.len() {
        return SuiteResult::fail(
            NAME,
            format!("{peak_hits}/{} kernels within one bin", kernels.len()),
        );
    }

    // direction mirror
    for p in &params {
        let down = &bank.kernels[bank.kernel_index(
            params.iter().position(|q| q == p).unwrap(),
            Direction::Down,
        )];
        let up = &bank.kernels[bank.kernel_index(
            params.iter().position(|q| q == p).unwrap(),
            Direction::Up,
        )];
        for t in 0..axes.n_t {
            for f in 0..axes.n_f {
                if (up.at(t, f) - down.at(t, axes.n_f - 1 - f)).abs() > 1e-9 {
                    return SuiteResult::fail(NAME, "direction mirror broken".into());
                }
            }
        }
    }
    SuiteResult::pass(NAME, format!("{peak_hits}/{} kernel peaks in tolerance", kernels.len()))
}

/// Analytic (log scale, log rate) gradients against central differences.
pub fn suite_strf_gradients() -> SuiteResult {
    const NAME: &str = "strf-gradients";
    let axes = KernelAxes {
        n_t: 8,
        n_f: 8,
        time_step_s: 0.2,
        freq_step_oct: 0.25,
    };
    let mut rng = Rng::new(2024);
    let mut worst = 0.0f64;
    for _ in 0..4 {
        let params = [
            ScaleRateParam::new(rng.uniform(0.4, 1.8), rng.uniform(0.4, 1.8), Direction::Down),
            ScaleRateParam::new(rng.uniform(0.4, 1.8), rng.uniform(0.4, 1.8), Direction::Down),
        ];
        let input = Tensor::from_vec(
            &[9, 8],
            (0..72).map(|_| rng.uniform(-1.0, 1.0)).collect(),
        );
        let weights = Tensor::from_vec(
            &[4, 9, 8],
            (0..4 * 72).map(|_| rng.uniform(-1.0, 1.0)).collect(),
        );
        let loss = |ps: &[ScaleRateParam]| -> f64 {
            StrfConv::new(ps, &axes)
                .unwrap()
                .forward(&input)
                .unwrap()
                .dot(&weights)
        };
        let conv = StrfConv::new(&params, &axes).unwrap();
        let out = conv.forward(&input).unwrap();
        let grads = conv.param_grads(&input, &weights, &out).unwrap();
        let h = 1e-4;
        for (i, g) in grads.iter().enumerate() {
            for wrt_scale in [true, false] {
                let analytic = if wrt_scale { g.d_log_scale } else { g.d_log_rate };
                let mut plus = params;
                let mut minus = params;
                if wrt_scale {
                    plus[i].log_scale += h;
                    minus[i].log_scale -= h;
                } else {
                    plus[i].log_rate += h;
                    minus[i].log_rate -= h;
                }
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
                worst = worst.max((analytic - fd).abs() / fd.abs().max(1e-8));
            }
        }
    }
    if worst < 1e-3 {
        SuiteResult::pass(NAME, format!("max relative error {worst:.2e}"))
    } else {
        SuiteResult::fail(NAME, format!("max relative error {worst:.2e}"))
    }
}

/// Simplex rows, uniform-attention degeneration, naive per-bin equivalence
/// and the frozen-attention shift-variance witness.
pub fn suite_fdy_equivalence() -> SuiteResult {
    const NAME: &str = "fdy-equivalence";
    let mut rng = Rng::new(77);
    let cfg = FdyConfig {
        n_basis: 4,
        hidden: Some(4),
        temperature: 1.0,
    };
    let layer = FdyLayer::new(2, 3, 3, 3, &cfg, &mut rng).unwrap();
    let input = Tensor::from_vec(
        &[2, 7, 9],
        (0..2 * 7 * 9).map(|_| rng.uniform(-1.0, 1.0)).collect(),
    );

    let weights = fdy_attention(&input, &layer).unwrap();
    for f in 0..9 {
        let row = &weights.data()[f * 4..(f + 1) * 4];
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-6 || row.iter().any(|&v| v < 0.0) {
            return SuiteResult::fail(NAME, format!("attention row {f} not a simplex vector"));
        }
    }

    // uniform attention equals the mean-kernel static convolution
    let mut uniform = layer.clone();
    for v in uniform.attn_w2.data_mut() {
        *v = 0.0;
    }
    for v in uniform.attn_b2.data_mut() {
        *v = 0.0;
    }
    let got = fdy_forward(&input, &uniform).unwrap();
    let klen: usize = uniform.basis.shape()[1..].iter().product();
    let s = uniform.basis.shape().to_vec();
    let mut mean_kernel = Tensor::zeros(&[s[1], s[2], s[3], s[4]]);
    for ki in 0..4 {
        for j in 0..klen {
            mean_kernel.data_mut()[j] += uniform.basis.data()[ki * klen + j] / 4.0;
        }
    }
    let want = conv2d_forward(&input, &mean_kernel, &uniform.bias).unwrap();
    let diff = max_abs_diff(got.data(), want.data());
    if diff > 1e-6 {
        return SuiteResult::fail(NAME, format!("uniform attention mismatch {diff:.2e}"));
    }

    // optimized forward vs the naive per-bin mixing loop
    let fast = fdy_forward(&input, &layer).unwrap();
    let slow = naive_fdy(&input, &layer, &weights);
    let diff = max_abs_diff(fast.data(), slow.data());
    if diff > 1e-6 {
        return SuiteResult::fail(NAME, format!("naive oracle mismatch {diff:.2e}"));
    }

    // frozen-attention shift variance witness
    let single = FdyLayer::new(1, 1, 3, 3, &cfg, &mut rng).unwrap();
    let (t_len, f_len) = (6, 16);
    let mut x = Tensor::zeros(&[1, t_len, f_len]);
    for t in 0..t_len {
        for f in 0..f_len {
            let idx = x.ix3(0, t, f);
            x.data_mut()[idx] = (f as f64 * 0.9).sin() * 2.0 + (t as f64 * 0.3).cos();
        }
    }
    let mut x_shift = Tensor::zeros(&[1, t_len, f_len]);
    for t in 0..t_len {
        for f in 0..f_len {
            let idx = x_shift.ix3(0, t, f);
            x_shift.data_mut()[idx] = x.at3(0, t, (f + 1) % f_len);
        }
    }
    let w = fdy_attention(&x, &single).unwrap();
    let y = fdy_forward_with_weights(&x, &single, &w).unwrap();
    let y_shift = fdy_forward_with_weights(&x_shift, &single, &w).unwrap();
    let mut witness = 0.0f64;
    for t in 1..t_len - 1 {
        for f in 3..f_len - 4 {
            witness = witness.max((y_shift.at3(0, t, f) - y.at3(0, t, f + 1)).abs());
        }
    }
    if witness <= 1e-4 {
        return SuiteResult::fail(NAME, format!("shift-variance witness {witness:.2e}"));
    }
    SuiteResult::pass(NAME, format!("oracle diff {diff:.2e}, witness {witness:.2e}"))
}

fn naive_fdy(input: &Tensor, layer: &FdyLayer, weights: &Tensor) -> Tensor {
    let (c_in, t_len, f_len) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let s = layer.basis.shape();
    let (kb, c_out, k_t, k_f) = (s[0], s[1], s[3], s[4]);
    let (a_t, a_f) = (k_t / 2, k_f / 2);
    let mut out = Tensor::zeros(&[c_out, t_len, f_len]);
    let klen = c_out * c_in * k_t * k_f;
    for f in 0..f_len {
        let mut eff = vec![0.0; klen];
        for ki in 0..kb {
            let w = weights.at2(f, ki);
            for (e, p) in eff
                .iter_mut()
                .zip(&layer.basis.data()[ki * klen..(ki + 1) * klen])
            {
                *e += w * p;
            }
        }
        for co in 0..c_out {
            for t in 0..t_len {
                let mut acc = layer.bias.data()[co];
                for ci in 0..c_in {
                    for i in 0..k_t {
                        for j in 0..k_f {
                            let ti = t as isize + i as isize - a_t as isize;
                            let fj = f as isize + j as isize - a_f as isize;
                            if ti < 0 || fj < 0 || ti as usize >= t_len || fj as usize >= f_len {
                                continue;
                            }
                            acc += eff[((co * c_in + ci) * k_t + i) * k_f + j]
                                * input.at3(ci, ti as usize, fj as usize);
                        }
                    }
                }
                let idx = out.ix3(co, t, f);
                out.data_mut()[idx] = acc;
            }
        }
    }
    out
}

/// Forward primitives against naive loops, plus a hand Adam recurrence.
pub fn suite_nn_oracles() -> SuiteResult {
    const NAME: &str = "nn-oracles";
    let mut rng = Rng::new(5150);

    // conv2d vs dense nested loop
    let input = Tensor::from_vec(&[2, 5, 6], (0..60).map(|_| rng.uniform(-1.0, 1.0)).collect());
    let w = Tensor::from_vec(
        &[3, 2, 3, 3],
        (0..54).map(|_| rng.uniform(-1.0, 1.0)).collect(),
    );
    let b = Tensor::from_vec(&[3], (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect());
    let fast = conv2d_forward(&input, &w, &b).unwrap();
    let mut slow = Tensor::zeros(&[3, 5, 6]);
    for co in 0..3 {
        for t in 0..5i64 {
            for f in 0..6i64 {
                let mut acc = b.data()[co];
                for ci in 0..2 {
                    for i in 0..3i64 {
                        for k in 0..3i64 {
                            let (ti, fj) = (t + i - 1, f + k - 1);
                            if ti < 0 || fj < 0 || ti >= 5 || fj >= 6 {
                                continue;
                            }
                            acc += w.data()[((co * 2 + ci) * 3 + i as usize) * 3 + k as usize]
                                * input.at3(ci, ti as usize, fj as usize);
                        }
                    }
                }
                let idx = slow.ix3(co, t as usize, f as usize);
                slow.data_mut()[idx] = acc;
            }
        }
    }
    let conv_diff = max_abs_diff(fast.data(), slow.data());
    if conv_diff > 1e-6 {
        return SuiteResult::fail(NAME, format!("conv2d oracle diff {conv_diff:.2e}"));
    }

    // dense vs naive matvec
    let x = Tensor::from_vec(&[4, 5], (0..20).map(|_| rng.uniform(-1.0, 1.0)).collect());
    let dw = Tensor::from_vec(&[3, 5], (0..15).map(|_| rng.uniform(-1.0, 1.0)).collect());
    let db = Tensor::from_vec(&[3], (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect());
    let fast = dense_forward(&x, &dw, &db).unwrap();
    for t in 0..4 {
        for o in 0..3 {
            let mut acc = db.data()[o];
            for i in 0..5 {
                acc += dw.at2(o, i) * x.at2(t, i);
            }
            if (fast.at2(t, o) - acc).abs() > 1e-6 {
                return SuiteResult::fail(NAME, "dense oracle mismatch".into());
            }
        }
    }

    // maxpool vs brute force window max
    let pin = Tensor::from_vec(&[1, 4, 6], (0..24).map(|_| rng.uniform(-1.0, 1.0)).collect());
    let (pooled, _) = maxpool2d_forward(&pin, 2, 3).unwrap();
    for wt in 0..2 {
        for wf in 0..2 {
            let mut best = f64::NEG_INFINITY;
            for dt in 0..2 {
                for df in 0..3 {
                    best = best.max(pin.at3(0, wt * 2 + dt, wf * 3 + df));
                }
            }
            if pooled.at3(0, wt, wf) != best {
                return SuiteResult::fail(NAME, "maxpool oracle mismatch".into());
            }
        }
    }

    // three-step Adam trace against the hand recurrence
    let cfg = AdamConfig {
        lr: 0.05,
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
    };
    let mut adam = Adam::new(cfg, &[1]);
    let mut p = vec![-0.3];
    let grads = [0.8, -0.2, 0.5];
    let (mut m, mut v, mut x_hand) = (0.0f64, 0.0f64, -0.3f64);
    for (t, &g) in grads.iter().enumerate() {
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        let m_hat = m / (1.0 - 0.9f64.powi(t as i32 + 1));
        let v_hat = v / (1.0 - 0.999f64.powi(t as i32 + 1));
        x_hand -= 0.05 * m_hat / (v_hat.sqrt() + 1e-8);
        adam.step(&mut [(&mut p, &[g])]).unwrap();
    }
    if (p[0] - x_hand).abs() > 1e-10 {
        return SuiteResult::fail(NAME, format!("adam trace diff {:.2e}", (p[0] - x_hand).abs()));
    }

    SuiteResult::pass(NAME, format!("conv diff {conv_diff:.2e}, adam diff {:.2e}", (p[0] - x_hand).abs()))
}

/// f1_mo against a literal per-class threshold enumeration on random
/// instances.
pub fn suite_metric_enumeration() -> SuiteResult {
    const NAME: &str = "metric-enumeration";
    let mut rng = Rng::new(31337);
    let grid = default_threshold_grid();
    let mut checked = 0;
    for case in 0..200 {
        let n_classes = 1 + rng.below(4);
        let n_segments = 1 + rng.below(20);
        let make = |vals: Vec<f64>| SegmentScores {
            scores: Tensor::from_vec(&[n_segments, n_classes], vals),
            segment_length_s: 1.0,
        };
        let preds = vec![make(
            (0..n_segments * n_classes)
                .map(|_| (rng.below(51) as f64) * 0.02)
                .collect(),
        )];
        let refs = vec![make(
            (0..n_segments * n_classes)
                .map(|_| if rng.next_f64() < 0.4 { 1.0 } else { 0.0 })
                .collect(),
        )];
        let classes: Vec<String> = (0..n_classes).map(|i| format!("c{i}")).collect();
        let report = match f1_mo(&preds, &refs, &classes, &grid) {
            Ok(r) => r,
            Err(_) => continue, // no reference positives drawn
        };
        for c in 0..n_classes {
            let mut best_f1 = f64::NEG_INFINITY;
            let mut best_theta = 0.0;
            for &theta in &grid {
                let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
                for s in 0..n_segments {
                    let pred = preds[0].scores.at2(s, c) > theta;
                    let act = refs[0].scores.at2(s, c) > 0.5;
                    if pred && act {
                        tp += 1;
                    } else if pred {
                        fp += 1;
                    } else if act {
                        fn_ += 1;
                    }
                }
                let denom = 2 * tp + fp + fn_;
                let f1 = if denom == 0 { 0.0 } else { 2.0 * tp as f64 / denom as f64 };
                if f1 > best_f1 {
                    best_f1 = f1;
                    best_theta = theta;
                }
            }
            if report.per_class[c].f1 != best_f1 || report.per_class[c].threshold != best_theta {
                return SuiteResult::fail(
                    NAME,
                    format!("case {case} class {c}: enumeration disagrees"),
                );
            }
            checked += 1;
        }
    }
    SuiteResult::pass(NAME, format!("{checked} class instances matched exactly"))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_run_passes_every_suite() {
        for r in run_all(None) {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }

    #[test]
    fn kernel_norm_fault_fails_kernel_suite() {
        let r = suite_kernel_peaks(Some(Fault::KernelNorm));
        assert!(!r.passed);
        assert!(r.detail.contains("norm"));
    }
}
