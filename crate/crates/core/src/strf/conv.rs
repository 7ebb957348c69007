//! STRF convolution: the bank applied to a spectrogram-like grid, with
//! analytic gradients for the trainable (log scale, log rate) pairs.
//!
//! Every kernel is the real part of an outer product of two analytic
//! signals, i.e. a rank-2 separable grid. The convolution therefore runs as
//! separable frequency/time passes per pair, far cheaper than a dense 50x48
//! cross-correlation and bit-comparable to it (same sums, different order).

use super::kernel::{build_from_factors, StrfFactors};
use super::{Direction, KernelAxes, ScaleRateParam, StrfBank};
use crate::nn::Tensor;
use crate::{Error, Result};

/// Cross-correlation anchors: output position t aligns with kernel tap
/// floor((n-1)/2), matching zero-padded "same" placement on both axes.
fn anchor(n: usize) -> usize {
    (n - 1) / 2
}

/// A prepared STRF convolution over `params.len()` pairs; channel order is
/// all upward kernels in pair order, then all downward kernels.
#[derive(Debug, Clone)]
pub struct StrfConv {
    params: Vec<ScaleRateParam>,
    axes: KernelAxes,
    factors: Vec<StrfFactors>,
}

/// Per-pair gradient of a scalar loss with respect to the log parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGrad {
    pub d_log_scale: f64,
    pub d_log_rate: f64,
}

impl StrfConv {
    pub fn new(params: &[ScaleRateParam], axes: &KernelAxes) -> Result<StrfConv> {
        if params.is_empty() {
            return Err(Error::InvalidConfig("empty scale-rate parameter list".into()));
        }
        let factors = params
            .iter()
            .map(|p| StrfFactors::compute(p, axes))
            .collect::<Result<Vec<_>>>()?;
        Ok(StrfConv {
            params: params.to_vec(),
            axes: *axes,
            factors,
        })
    }

    pub fn n_pairs(&self) -> usize {
        self.params.len()
    }

    pub fn n_channels(&self) -> usize {
        2 * self.params.len()
    }

    pub fn params(&self) -> &[ScaleRateParam] {
        &self.params
    }

    pub fn axes(&self) -> &KernelAxes {
        &self.axes
    }

    /// Re-derive the kernel factors after the log parameters changed.
    pub fn set_params(&mut self, params: &[ScaleRateParam]) -> Result<()> {
        let rebuilt = StrfConv::new(params, &self.axes)?;
        *self = rebuilt;
        Ok(())
    }

    /// Materialize the bank (unit-norm kernels) for inspection and dumps.
    pub fn bank(&self) -> Result<StrfBank> {
        let mut kernels = Vec::with_capacity(self.n_channels());
        for dir in [Direction::Up, Direction::Down] {
            for (p, f) in self.params.iter().zip(&self.factors) {
                let oriented = ScaleRateParam { direction: dir, ..*p };
                kernels.push(build_from_factors(f, &oriented, &self.axes)?);
            }
        }
        Ok(StrfBank {
            params: self.params.clone(),
            kernels,
            axes: self.axes,
        })
    }

    /// Cross-correlate every kernel with `input` ([T, F]), zero-padded same;
    /// output is [2 * n_pairs, T, F].
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let (t_len, f_len) = dims2(input)?;
        if t_len == 0 || f_len == 0 {
            return Err(Error::InvalidConfig("empty input grid".into()));
        }
        input.check_finite("strf conv input")?;
        let n_pairs = self.n_pairs();
        let mut out = Tensor::zeros(&[2 * n_pairs, t_len, f_len]);
        let plane = t_len * f_len;
        for (p, fac) in self.factors.iter().enumerate() {
            let (pr, qi) = self.pair_response(input, fac, t_len, f_len);
            let (nu, nd) = (fac.norm_up, fac.norm_down);
            check_norms(nu, nd, &self.params[p])?;
            let data = out.data_mut();
            for j in 0..plane {
                data[p * plane + j] = (pr[j] + qi[j]) / nu;
                data[(n_pairs + p) * plane + j] = (pr[j] - qi[j]) / nd;
            }
        }
        Ok(out)
    }

    /// P = xcorr(input; re(a_t) (x) re(a_s)), Q = xcorr(input; im (x) im).
    fn pair_response(
        &self,
        input: &Tensor,
        fac: &StrfFactors,
        t_len: usize,
        f_len: usize,
    ) -> (Vec<f64>, Vec<f64>) {
        let vr: Vec<f64> = fac.a_s.iter().map(|z| z.re).collect();
        let vi: Vec<f64> = fac.a_s.iter().map(|z| z.im).collect();
        let ur: Vec<f64> = fac.a_t.iter().map(|z| z.re).collect();
        let ui: Vec<f64> = fac.a_t.iter().map(|z| z.im).collect();
        let a_f = anchor(self.axes.n_f);
        let a_t = anchor(self.axes.n_t);
        let g_r = xcorr_freq(input.data(), t_len, f_len, &vr, a_f);
        let g_i = xcorr_freq(input.data(), t_len, f_len, &vi, a_f);
        let p = xcorr_time(&g_r, t_len, f_len, &ur, a_t);
        let q = xcorr_time(&g_i, t_len, f_len, &ui, a_t);
        (p, q)
    }

    /// Gradients of the loss with respect to each pair's (log scale,
    /// log rate), given the upstream gradient for every output channel and
    /// the cached forward output. Includes the L2-normalization term.
    pub fn param_grads(
        &self,
        input: &Tensor,
        upstream: &Tensor,
        forward_out: &Tensor,
    ) -> Result<Vec<PairGrad>> {
        let (t_len, f_len) = dims2(input)?;
        let want = [2 * self.n_pairs(), t_len, f_len];
        if upstream.shape() != want || forward_out.shape() != want {
            return Err(Error::ShapeMismatch(format!(
                "strf grads: upstream {:?} / forward {:?} vs expected {:?}",
                upstream.shape(),
                forward_out.shape(),
                want
            )));
        }
        let plane = t_len * f_len;
        let n_pairs = self.n_pairs();
        let a_f = anchor(self.axes.n_f);
        let a_t = anchor(self.axes.n_t);

        let mut grads = Vec::with_capacity(n_pairs);
        for (p, fac) in self.factors.iter().enumerate() {
            let up_u = &upstream.data()[p * plane..(p + 1) * plane];
            let up_d = &upstream.data()[(n_pairs + p) * plane..(n_pairs + p + 1) * plane];
            let out_u = &forward_out.data()[p * plane..(p + 1) * plane];
            let out_d = &forward_out.data()[(n_pairs + p) * plane..(n_pairs + p + 1) * plane];

            let vr: Vec<f64> = fac.a_s.iter().map(|z| z.re).collect();
            let vi: Vec<f64> = fac.a_s.iter().map(|z| z.im).collect();
            let ur: Vec<f64> = fac.a_t.iter().map(|z| z.re).collect();
            let ui: Vec<f64> = fac.a_t.iter().map(|z| z.im).collect();
            let dvr: Vec<f64> = fac.da_s.iter().map(|z| z.re).collect();
            let dvi: Vec<f64> = fac.da_s.iter().map(|z| z.im).collect();
            let dur: Vec<f64> = fac.da_t.iter().map(|z| z.re).collect();
            let dui: Vec<f64> = fac.da_t.iter().map(|z| z.im).collect();

            // <G_c, u (x) v> = <upstream_c, xcorr(input; u, v)>, so each raw
            // derivative term needs one separable pass over the input.
            let g_vr = xcorr_freq(input.data(), t_len, f_len, &vr, a_f);
            let g_vi = xcorr_freq(input.data(), t_len, f_len, &vi, a_f);
            let r1 = xcorr_time(&g_vr, t_len, f_len, &dur, a_t); // d rate, real part
            let r2 = xcorr_time(&g_vi, t_len, f_len, &dui, a_t); // d rate, imag part
            let g_dvr = xcorr_freq(input.data(), t_len, f_len, &dvr, a_f);
            let g_dvi = xcorr_freq(input.data(), t_len, f_len, &dvi, a_f);
            let r3 = xcorr_time(&g_dvr, t_len, f_len, &ur, a_t); // d scale, real part
            let r4 = xcorr_time(&g_dvi, t_len, f_len, &ui, a_t); // d scale, imag part

            let mut d_log_rate = 0.0;
            let mut d_log_scale = 0.0;
            for (dir, ups, outs) in [
                (Direction::Up, up_u, out_u),
                (Direction::Down, up_d, out_d),
            ] {
                let sgn = if dir == Direction::Up { 1.0 } else { -1.0 };
                let norm = fac.norm(dir);
                check_norms(norm, norm, &self.params[p])?;
                let g_dot_out = dot_slices(ups, outs);
                // raw-direction inner products with the upstream kernel grad
                let g_draw_rate = dot_slices(ups, &r1) + sgn * dot_slices(ups, &r2);
                let g_draw_scale = dot_slices(ups, &r3) + sgn * dot_slices(ups, &r4);
                // <K_n, dK_raw> = <K_raw, dK_raw> / norm
                let kn_draw_rate = fac.raw_dot_draw(dir, true) / norm;
                let kn_draw_scale = fac.raw_dot_draw(dir, false) / norm;
                d_log_rate += (g_draw_rate - g_dot_out * kn_draw_rate) / norm;
                d_log_scale += (g_draw_scale - g_dot_out * kn_draw_scale) / norm;
            }
            grads.push(PairGrad {
                d_log_scale,
                d_log_rate,
            });
        }
        Ok(grads)
    }

    /// Gradient of the loss with respect to the input grid: the transposed
    /// (full-convolution) pass summed over channels.
    pub fn input_grad(&self, upstream: &Tensor) -> Result<Tensor> {
        let shape = upstream.shape().to_vec();
        if shape.len() != 3 || shape[0] != self.n_channels() {
            return Err(Error::ShapeMismatch(format!(
                "strf input grad: upstream shape {:?}",
                shape
            )));
        }
        let (t_len, f_len) = (shape[1], shape[2]);
        let plane = t_len * f_len;
        let n_pairs = self.n_pairs();
        // transposed pass = cross-correlation with the reversed vector and
        // complementary anchor
        let a_f = self.axes.n_f - 1 - anchor(self.axes.n_f);
        let a_t = self.axes.n_t - 1 - anchor(self.axes.n_t);

        let mut grad = vec![0.0; plane];
        let mut sum_w = vec![0.0; plane];
        let mut diff_w = vec![0.0; plane];
        for (p, fac) in self.factors.iter().enumerate() {
            let up_u = &upstream.data()[p * plane..(p + 1) * plane];
            let up_d = &upstream.data()[(n_pairs + p) * plane..(n_pairs + p + 1) * plane];
            let (nu, nd) = (fac.norm_up, fac.norm_down);
            for j in 0..plane {
                let wu = up_u[j] / nu;
                let wd = up_d[j] / nd;
                sum_w[j] = wu + wd;
                diff_w[j] = wu - wd;
            }
            let vr_rev: Vec<f64> = fac.a_s.iter().rev().map(|z| z.re).collect();
            let vi_rev: Vec<f64> = fac.a_s.iter().rev().map(|z| z.im).collect();
            let ur_rev: Vec<f64> = fac.a_t.iter().rev().map(|z| z.re).collect();
            let ui_rev: Vec<f64> = fac.a_t.iter().rev().map(|z| z.im).collect();
            let g_r = xcorr_freq(&sum_w, t_len, f_len, &vr_rev, a_f);
            let contrib_r = xcorr_time(&g_r, t_len, f_len, &ur_rev, a_t);
            let g_i = xcorr_freq(&diff_w, t_len, f_len, &vi_rev, a_f);
            let contrib_i = xcorr_time(&g_i, t_len, f_len, &ui_rev, a_t);
            for j in 0..plane {
                grad[j] += contrib_r[j] + contrib_i[j];
            }
        }
        Ok(Tensor::from_vec(&[t_len, f_len], grad))
    }
}

fn check_norms(nu: f64, nd: f64, param: &ScaleRateParam) -> Result<()> {
    if nu <= f64::MIN_POSITIVE.sqrt() || nd <= f64::MIN_POSITIVE.sqrt() {
        return Err(Error::InvalidConfig(format!(
            "degenerate kernel (zero norm) at scale {:.4}, rate {:.4}",
            param.scale(),
            param.rate()
        )));
    }
    Ok(())
}

fn dims2(t: &Tensor) -> Result<(usize, usize)> {
    match t.shape() {
        [a, b] => Ok((*a, *b)),
        s => Err(Error::ShapeMismatch(format!(
            "expected a 2D grid, got shape {s:?}"
        ))),
    }
}

fn dot_slices(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// out[t][f] = sum_k v[k] * grid[t][f + k - anchor], zero outside.
fn xcorr_freq(grid: &[f64], t_len: usize, f_len: usize, v: &[f64], anchor: usize) -> Vec<f64> {
    let mut out = vec![0.0; t_len * f_len];
    for t in 0..t_len {
        let row = &grid[t * f_len..(t + 1) * f_len];
        let out_row = &mut out[t * f_len..(t + 1) * f_len];
        for (k, &vk) in v.iter().enumerate() {
            if vk == 0.0 {
                continue;
            }
            // out[f] += vk * row[f + k - anchor] wherever the offset index
            // stays inside the row
            let (f_lo, src_lo) = if k >= anchor {
                (0usize, k - anchor)
            } else {
                (anchor - k, 0usize)
            };
            if src_lo >= f_len || f_lo >= f_len {
                continue;
            }
            let len = (f_len - f_lo).min(f_len - src_lo);
            for j in 0..len {
                out_row[f_lo + j] += vk * row[src_lo + j];
            }
        }
    }
    out
}

/// out[t][f] = sum_i u[i] * grid[t + i - anchor][f], zero outside.
fn xcorr_time(grid: &[f64], t_len: usize, f_len: usize, u: &[f64], anchor: usize) -> Vec<f64> {
    let mut out = vec![0.0; t_len * f_len];
    for t in 0..t_len {
        let out_row = &mut out[t * f_len..(t + 1) * f_len];
        for (i, &uiv) in u.iter().enumerate() {
            if uiv == 0.0 {
                continue;
            }
            let src = t as isize + i as isize - anchor as isize;
            if src < 0 || src as usize >= t_len {
                continue;
            }
            let src_row = &grid[src as usize * f_len..(src as usize + 1) * f_len];
            for (o, s) in out_row.iter_mut().zip(src_row) {
                *o += uiv * s;
            }
        }
    }
    out
}

/// One-shot form of the forward pass for a prebuilt bank.
pub fn strf_conv_forward(input: &Tensor, bank: &StrfBank) -> Result<Tensor> {
    StrfConv::new(&bank.params, &bank.axes)?.forward(input)
}

/// One-shot parameter gradients: reruns the forward pass internally.
pub fn strf_param_grad(
    upstream: &Tensor,
    input: &Tensor,
    bank: &StrfBank,
) -> Result<Vec<PairGrad>> {
    let conv = StrfConv::new(&bank.params, &bank.axes)?;
    let out = conv.forward(input)?;
    conv.param_grads(input, upstream, &out)
}

/// One-shot input gradient.
pub fn strf_input_grad(upstream: &Tensor, bank: &StrfBank) -> Result<Tensor> {
    StrfConv::new(&bank.params, &bank.axes)?.input_grad(upstream)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use crate::strf::{build_bank, default_init_params, ripple_stimulus, RippleParams};

    fn small_axes() -> KernelAxes {
        KernelAxes {
            n_t: 7,
            n_f: 6,
            time_step_s: 0.2,
            freq_step_oct: 1.0 / 4.0,
        }
    }

    /// Dense reference: cross-correlate materialized kernels directly.
    fn naive_forward(input: &Tensor, bank: &StrfBank) -> Tensor {
        let (t_len, f_len) = (input.shape()[0], input.shape()[1]);
        let axes = bank.axes;
        let (a_t, a_f) = (anchor(axes.n_t), anchor(axes.n_f));
        let mut out = Tensor::zeros(&[bank.n_kernels(), t_len, f_len]);
        for (c, k) in bank.kernels.iter().enumerate() {
            for t in 0..t_len {
                for f in 0..f_len {
                    let mut acc = 0.0;
                    for i in 0..axes.n_t {
                        let ti = t as isize + i as isize - a_t as isize;
                        if ti < 0 || ti as usize >= t_len {
                            continue;
                        }
                        for kk in 0..axes.n_f {
                            let fj = f as isize + kk as isize - a_f as isize;
                            if fj < 0 || fj as usize >= f_len {
                                continue;
                            }
                            acc += k.at(i, kk) * input.at2(ti as usize, fj as usize);
                        }
                    }
                    let idx = out.ix3(c, t, f);
                    out.data_mut()[idx] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn separable_matches_naive_dense_xcorr() {
        let axes = small_axes();
        let params = [
            ScaleRateParam::new(0.7, 0.9, Direction::Down),
            ScaleRateParam::new(1.4, 1.7, Direction::Down),
        ];
        let bank = build_bank(&params, &axes).unwrap();
        let mut rng = Rng::new(11);
        let input = Tensor::from_vec(
            &[9, 8],
            (0..72).map(|_| rng.uniform(-1.0, 1.0)).collect(),
        );
        let fast = strf_conv_forward(&input, &bank).unwrap();
        let slow = naive_forward(&input, &bank);
        let max_diff = fast
            .data()
            .iter()
            .zip(slow.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(max_diff < 1e-9, "max diff {max_diff}");
    }

    #[test]
    fn zero_input_zero_output() {
        let axes = small_axes();
        let bank = build_bank(&[ScaleRateParam::new(1.0, 1.0, Direction::Down)], &axes).unwrap();
        let input = Tensor::zeros(&[10, 8]);
        let out = strf_conv_forward(&input, &bank).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn impulse_response_is_reversed_kernel() {
        let axes = small_axes();
        let bank = build_bank(&[ScaleRateParam::new(1.1, 0.8, Direction::Down)], &axes).unwrap();
        let (t_len, f_len) = (15, 12);
        let (t0, f0) = (7, 6);
        let mut input = Tensor::zeros(&[t_len, f_len]);
        let idx = input.ix2(t0, f0);
        input.data_mut()[idx] = 1.0;
        let out = strf_conv_forward(&input, &bank).unwrap();
        let (a_t, a_f) = (anchor(axes.n_t), anchor(axes.n_f));
        for (c, k) in bank.kernels.iter().enumerate() {
            for i in 0..axes.n_t {
                for kk in 0..axes.n_f {
                    // output at (t0 + a_t - i, f0 + a_f - kk) sees tap (i, kk)
                    let t = t0 as isize + a_t as isize - i as isize;
                    let f = f0 as isize + a_f as isize - kk as isize;
                    if t < 0 || f < 0 || t as usize >= t_len || f as usize >= f_len {
                        continue;
                    }
                    let got = out.at3(c, t as usize, f as usize);
                    assert!((got - k.at(i, kk)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn matched_ripple_maximizes_matching_channel_energy() {
        let axes = KernelAxes::default();
        let params = default_init_params();
        let conv = StrfConv::new(&params, &axes).unwrap();
        let mut hits = 0;
        let mut total = 0;
        for (pi, p) in params.iter().enumerate() {
            for dir in [Direction::Up, Direction::Down] {
                total += 1;
                let stim = ripple_stimulus(
                    &RippleParams {
                        omega_hz: p.rate(),
                        scale_cyc_per_oct: p.scale(),
                        direction: dir,
                        amplitude: 1.0,
                        phase: 0.0,
                    },
                    120,
                    64,
                    axes.time_step_s,
                    1.0 / axes.freq_step_oct,
                )
                .unwrap();
                let input = Tensor::from_vec(&[120, 64], stim.values.clone());
                let out = conv.forward(&input).unwrap();
                let plane = 120 * 64;
                let energies: Vec<f64> = (0..conv.n_channels())
                    .map(|c| {
                        out.data()[c * plane..(c + 1) * plane]
                            .iter()
                            .map(|v| v * v)
                            .sum::<f64>()
                            / plane as f64
                    })
                    .collect();
                let best = energies
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .unwrap()
                    .0;
                let want = match dir {
                    Direction::Up => pi,
                    Direction::Down => params.len() + pi,
                };
                if best == want {
                    hits += 1;
                }
            }
        }
        println!("ripple selectivity: {hits}/{total}");
        assert!(
            hits * 100 >= total * 90,
            "selectivity {hits}/{total} below 90%"
        );
    }

    #[test]
    fn param_grads_match_finite_differences() {
        let axes = small_axes();
        let mut rng = Rng::new(23);
        for case in 0..3 {
            let params = [
                ScaleRateParam::new(rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0), Direction::Down),
                ScaleRateParam::new(rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0), Direction::Down),
            ];
            let input = Tensor::from_vec(
                &[8, 7],
                (0..56).map(|_| rng.uniform(-1.0, 1.0)).collect(),
            );
            let weights = Tensor::from_vec(
                &[4, 8, 7],
                (0..4 * 56).map(|_| rng.uniform(-1.0, 1.0)).collect(),
            );
            let loss = |ps: &[ScaleRateParam]| -> f64 {
                let conv = StrfConv::new(ps, &axes).unwrap();
                conv.forward(&input).unwrap().dot(&weights)
            };
            let conv = StrfConv::new(&params, &axes).unwrap();
            let out = conv.forward(&input).unwrap();
            let grads = conv.param_grads(&input, &weights, &out).unwrap();
            let h = 1e-4;
            for (i, g) in grads.iter().enumerate() {
                for (wrt_scale, analytic) in [(true, g.d_log_scale), (false, g.d_log_rate)] {
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
                    let rel = (analytic - fd).abs() / fd.abs().max(1e-8);
                    assert!(
                        rel < 1e-3,
                        "case {case} pair {i} wrt_scale={wrt_scale}: analytic {analytic}, fd {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn grads_match_fd_at_every_default_init_point() {
        let axes = KernelAxes::default();
        let mut rng = Rng::new(47);
        let (t_len, f_len) = (12, 48);
        let input = Tensor::from_vec(
            &[t_len, f_len],
            (0..t_len * f_len).map(|_| rng.uniform(-1.0, 1.0)).collect(),
        );
        let weights = Tensor::from_vec(
            &[2, t_len, f_len],
            (0..2 * t_len * f_len).map(|_| rng.uniform(-1.0, 1.0)).collect(),
        );
        let h = 1e-4;
        for p in default_init_params() {
            let loss = |ps: &[ScaleRateParam]| -> f64 {
                StrfConv::new(ps, &axes)
                    .unwrap()
                    .forward(&input)
                    .unwrap()
                    .dot(&weights)
            };
            let conv = StrfConv::new(&[p], &axes).unwrap();
            let out = conv.forward(&input).unwrap();
            let g = conv.param_grads(&input, &weights, &out).unwrap()[0];
            for (wrt_scale, analytic) in [(true, g.d_log_scale), (false, g.d_log_rate)] {
                let mut plus = [p];
                let mut minus = [p];
                if wrt_scale {
                    plus[0].log_scale += h;
                    minus[0].log_scale -= h;
                } else {
                    plus[0].log_rate += h;
                    minus[0].log_rate -= h;
                }
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
                let rel = (analytic - fd).abs() / fd.abs().max(1e-8);
                assert!(
                    rel < 1e-3,
                    "scale {:.3} rate {:.3} wrt_scale={wrt_scale}: rel {rel:.2e}",
                    p.scale(),
                    p.rate()
                );
            }
        }
    }

    #[test]
    fn zero_upstream_zero_grads() {
        let axes = small_axes();
        let params = [ScaleRateParam::new(1.0, 1.0, Direction::Down)];
        let conv = StrfConv::new(&params, &axes).unwrap();
        let input = Tensor::full(&[6, 6], 0.5);
        let out = conv.forward(&input).unwrap();
        let upstream = Tensor::zeros(&[2, 6, 6]);
        let grads = conv.param_grads(&input, &upstream, &out).unwrap();
        assert_eq!(grads[0].d_log_scale, 0.0);
        assert_eq!(grads[0].d_log_rate, 0.0);
    }

    #[test]
    fn channel_separability_of_grads() {
        // a pair whose channels receive zero upstream gradient gets zero grad
        let axes = small_axes();
        let params = [
            ScaleRateParam::new(0.8, 1.2, Direction::Down),
            ScaleRateParam::new(1.6, 0.6, Direction::Down),
        ];
        let conv = StrfConv::new(&params, &axes).unwrap();
        let mut rng = Rng::new(5);
        let input = Tensor::from_vec(&[6, 6], (0..36).map(|_| rng.uniform(-1.0, 1.0)).collect());
        let out = conv.forward(&input).unwrap();
        let mut upstream = Tensor::zeros(&[4, 6, 6]);
        // only pair 0's channels (0 = up, 2 = down) get gradient
        for j in 0..36 {
            upstream.data_mut()[j] = rng.uniform(-1.0, 1.0);
            upstream.data_mut()[2 * 36 + j] = rng.uniform(-1.0, 1.0);
        }
        let grads = conv.param_grads(&input, &upstream, &out).unwrap();
        assert!(grads[0].d_log_scale.abs() > 0.0);
        assert_eq!(grads[1].d_log_scale, 0.0);
        assert_eq!(grads[1].d_log_rate, 0.0);
    }

    #[test]
    fn input_grad_matches_finite_differences() {
        let axes = small_axes();
        let params = [ScaleRateParam::new(1.2, 0.9, Direction::Down)];
        let conv = StrfConv::new(&params, &axes).unwrap();
        let mut rng = Rng::new(31);
        let input = Tensor::from_vec(&[6, 5], (0..30).map(|_| rng.uniform(-1.0, 1.0)).collect());
        let weights = Tensor::from_vec(
            &[2, 6, 5],
            (0..60).map(|_| rng.uniform(-1.0, 1.0)).collect(),
        );
        let grad = conv.input_grad(&weights).unwrap();
        let h = 1e-5;
        for j in 0..30 {
            let mut plus = input.clone();
            let mut minus = input.clone();
            plus.data_mut()[j] += h;
            minus.data_mut()[j] -= h;
            let fp = conv.forward(&plus).unwrap().dot(&weights);
            let fm = conv.forward(&minus).unwrap().dot(&weights);
            let fd = (fp - fm) / (2.0 * h);
            let rel = (grad.data()[j] - fd).abs() / fd.abs().max(1e-8);
            assert!(rel < 1e-6, "j={j}: analytic {} fd {fd}", grad.data()[j]);
        }
    }
}
