//! Kernel synthesis from (scale, rate, direction).
//!
//! Construction: a temporal seed dilated by the rate and a spectral seed
//! dilated by the scale are each extended to analytic (complex) signals via
//! an FFT Hilbert transform. The downward kernel is the real part of their
//! outer product; the upward kernel conjugates the spectral factor. Each
//! kernel is L2-normalized.
//!
//! Both seeds are calibrated so the magnitude spectrum of the dilated seed
//! peaks at the nominal parameter value. The temporal seed oscillates at
//! exactly `rate` Hz. The spectral seed is the second-derivative-of-Gaussian
//! family, whose transform `(xi/scale)^2 exp(-(xi/scale)^2)` peaks at
//! exactly `scale` cycles/octave; it is synthesized from that transform,
//! band-limited to the tap grid's Nyquist, because point-sampling the
//! space-domain seed aliases once the dilated seed gets narrower than a few
//! taps (high scales) and drags the measured peak off its nominal value.

use super::{Direction, KernelAxes, ScaleRateParam, StrfBank, StrfKernel};
use crate::fft::analytic_signal;
use crate::{Error, Result};
use rustfft::num_complex::Complex64;
use std::f64::consts::TAU;

fn temporal_seed(u: f64) -> f64 {
    u * u * (-3.5 * u).exp() * (TAU * u).sin()
}

fn temporal_seed_deriv(u: f64) -> f64 {
    let env = (-3.5 * u).exp();
    (2.0 * u - 3.5 * u * u) * env * (TAU * u).sin() + u * u * env * TAU * (TAU * u).cos()
}

/// Spectral seed samples and their d/d(log scale), band-limited synthesis.
///
/// v[k] = integral over [0, W] of (xi/scale)^2 e^{-(xi/scale)^2}
///        cos(2 pi xi x_k) d xi,  W = grid Nyquist,
/// evaluated with composite Simpson. Even in x_k, so the symmetric tap grid
/// keeps the up/down mirror identity exact.
fn spectral_seed_sampled(scale: f64, axes: &KernelAxes) -> (Vec<f64>, Vec<f64>) {
    let nyquist = 0.5 / axes.freq_step_oct;
    let x_max = (axes.n_f as f64 - 1.0) / 2.0 * axes.freq_step_oct;
    let n_iv = (64 * (nyquist * x_max.max(1.0)).ceil() as usize).clamp(256, 4096);
    let n_iv = n_iv + n_iv % 2; // Simpson needs an even interval count
    let h = nyquist / n_iv as f64;

    let mut v = vec![0.0; axes.n_f];
    let mut dv = vec![0.0; axes.n_f];
    for (k, (vk, dvk)) in v.iter_mut().zip(dv.iter_mut()).enumerate() {
        let x = axes.freq_offset_oct(k);
        let mut acc = 0.0;
        let mut dacc = 0.0;
        for j in 0..=n_iv {
            let xi = j as f64 * h;
            let w = (xi / scale) * (xi / scale);
            let e = (-w).exp();
            let c = (TAU * xi * x).cos();
            let simpson = if j == 0 || j == n_iv {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += simpson * w * e * c;
            // d/d(log scale) of w e^{-w} with dw/d(log scale) = -2w
            dacc += simpson * 2.0 * w * (w - 1.0) * e * c;
        }
        *vk = acc * h / 3.0;
        *dvk = dacc * h / 3.0;
    }
    (v, dv)
}

/// Separable complex factors of one scale-rate pair, with directional
/// derivatives with respect to the log parameters.
///
/// With `a_t[i] = p[i] + i q[i]` and `a_s[k] = r[k] + i s[k]`:
///   down[i][k] = p r - q s      up[i][k] = p r + q s
/// (real parts of `a_t * a_s` and `a_t * conj(a_s)` respectively), before
/// normalization by `norm_down` / `norm_up`.
#[derive(Debug, Clone)]
pub(crate) struct StrfFactors {
    pub a_t: Vec<Complex64>,
    pub da_t: Vec<Complex64>,
    pub a_s: Vec<Complex64>,
    pub da_s: Vec<Complex64>,
    pub norm_up: f64,
    pub norm_down: f64,
}

fn dot(a: &[Complex64], b: &[Complex64], f: impl Fn(Complex64) -> f64, g: impl Fn(Complex64) -> f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| f(*x) * g(*y)).sum()
}

impl StrfFactors {
    pub fn compute(param: &ScaleRateParam, axes: &KernelAxes) -> Result<StrfFactors> {
        if !param.log_scale.is_finite() || !param.log_rate.is_finite() {
            return Err(Error::NonFinite("scale-rate parameter".into()));
        }
        axes.validate()?;
        let rate = param.rate();
        let scale = param.scale();

        let v_t: Vec<f64> = (0..axes.n_t)
            .map(|i| temporal_seed(rate * axes.time_s(i)))
            .collect();
        let dv_t: Vec<f64> = (0..axes.n_t)
            .map(|i| {
                let u = rate * axes.time_s(i);
                u * temporal_seed_deriv(u)
            })
            .collect();

        let (v_s, dv_s) = spectral_seed_sampled(scale, axes);

        let a_t = analytic_signal(&v_t);
        let da_t = analytic_signal(&dv_t);
        let mut a_s = analytic_signal(&v_s);
        let mut da_s = analytic_signal(&dv_s);
        // The spectral grid is symmetric about the CF and the seed is even,
        // so a_s[n-1-k] = conj(a_s[k]) holds analytically; project out FFT
        // roundoff so the up/down mirror identity is exact.
        symmetrize(&mut a_s);
        symmetrize(&mut da_s);

        let (norm_up, norm_down) = pair_norms(&a_t, &a_s);
        Ok(StrfFactors {
            a_t,
            da_t,
            a_s,
            da_s,
            norm_up,
            norm_down,
        })
    }

    /// Raw (unnormalized) kernel grid for one direction, row-major time x freq.
    pub fn raw_kernel(&self, direction: Direction) -> Vec<f64> {
        let sgn = match direction {
            Direction::Down => -1.0,
            Direction::Up => 1.0,
        };
        let n_f = self.a_s.len();
        let mut out = vec![0.0; self.a_t.len() * n_f];
        for (i, at) in self.a_t.iter().enumerate() {
            for (k, as_) in self.a_s.iter().enumerate() {
                out[i * n_f + k] = at.re * as_.re + sgn * at.im * as_.im;
            }
        }
        out
    }

    pub fn norm(&self, direction: Direction) -> f64 {
        match direction {
            Direction::Up => self.norm_up,
            Direction::Down => self.norm_down,
        }
    }

    /// <K_raw, dK_raw/dtheta> for the given direction and parameter, used in
    /// the normalization term of the kernel derivative.
    pub fn raw_dot_draw(&self, direction: Direction, wrt_rate: bool) -> f64 {
        let sgn = match direction {
            Direction::Down => -1.0,
            Direction::Up => 1.0,
        };
        let (dt, ds) = if wrt_rate {
            (&self.da_t, &self.a_s)
        } else {
            (&self.a_t, &self.da_s)
        };
        // <p r + sgn q s, p' r' + sgn q' s'> over the outer-product grid
        // factorizes into 1D dot products.
        let pp = dot(&self.a_t, dt, |x| x.re, |y| y.re);
        let qq = dot(&self.a_t, dt, |x| x.im, |y| y.im);
        let pq = dot(&self.a_t, dt, |x| x.re, |y| y.im);
        let qp = dot(&self.a_t, dt, |x| x.im, |y| y.re);
        let rr = dot(&self.a_s, ds, |x| x.re, |y| y.re);
        let ss = dot(&self.a_s, ds, |x| x.im, |y| y.im);
        let rs = dot(&self.a_s, ds, |x| x.re, |y| y.im);
        let sr = dot(&self.a_s, ds, |x| x.im, |y| y.re);
        pp * rr + sgn * pq * sr + sgn * qp * rs + qq * ss
    }
}

fn symmetrize(v: &mut [Complex64]) {
    let n = v.len();
    for k in 0..n / 2 {
        let m = n - 1 - k;
        let re = 0.5 * (v[k].re + v[m].re);
        let im = 0.5 * (v[k].im - v[m].im);
        v[k] = Complex64::new(re, im);
        v[m] = Complex64::new(re, -im);
    }
}

fn pair_norms(a_t: &[Complex64], a_s: &[Complex64]) -> (f64, f64) {
    let pp: f64 = a_t.iter().map(|x| x.re * x.re).sum();
    let qq: f64 = a_t.iter().map(|x| x.im * x.im).sum();
    let pq: f64 = a_t.iter().map(|x| x.re * x.im).sum();
    let rr: f64 = a_s.iter().map(|x| x.re * x.re).sum();
    let ss: f64 = a_s.iter().map(|x| x.im * x.im).sum();
    let rs: f64 = a_s.iter().map(|x| x.re * x.im).sum();
    // ||p x r +/- q x s||^2 = |p|^2|r|^2 + |q|^2|s|^2 +/- 2 (p.q)(r.s)
    let up = (pp * rr + qq * ss + 2.0 * pq * rs).max(0.0).sqrt();
    let down = (pp * rr + qq * ss - 2.0 * pq * rs).max(0.0).sqrt();
    (up, down)
}

/// Build one unit-norm kernel.
pub fn build_strf(param: &ScaleRateParam, axes: &KernelAxes) -> Result<StrfKernel> {
    let factors = StrfFactors::compute(param, axes)?;
    build_from_factors(&factors, param, axes)
}

pub(crate) fn build_from_factors(
    factors: &StrfFactors,
    param: &ScaleRateParam,
    axes: &KernelAxes,
) -> Result<StrfKernel> {
    let mut values = factors.raw_kernel(param.direction);
    let norm = factors.norm(param.direction);
    if norm <= f64::MIN_POSITIVE.sqrt() {
        return Err(Error::InvalidConfig(format!(
            "degenerate kernel (zero norm) at scale {:.4}, rate {:.4}; \
             rate likely aliases the tap grid",
            param.scale(),
            param.rate()
        )));
    }
    for v in &mut values {
        *v /= norm;
    }
    Ok(StrfKernel {
        values,
        axes: *axes,
        param: *param,
    })
}

/// Realize every pair in both directions: all up kernels in pair order, then
/// all down kernels in pair order.
pub fn build_bank(params: &[ScaleRateParam], axes: &KernelAxes) -> Result<StrfBank> {
    if params.is_empty() {
        return Err(Error::InvalidConfig("empty scale-rate parameter list".into()));
    }
    let mut kernels = Vec::with_capacity(2 * params.len());
    for dir in [Direction::Up, Direction::Down] {
        for p in params {
            let oriented = ScaleRateParam {
                direction: dir,
                ..*p
            };
            kernels.push(build_strf(&oriented, axes)?);
        }
    }
    Ok(StrfBank {
        params: params.to_vec(),
        kernels,
        axes: *axes,
    })
}

/// Default initialization: 8 log-spaced scales in [0.25, 8] cycles/octave
/// crossed with 4 log-spaced rates in [0.3, 2.4] Hz. The rate range stays
/// below the 2.5 Hz Nyquist of the 0.2 s tap grid.
pub fn default_init_params() -> Vec<ScaleRateParam> {
    let scales = log_spaced(0.25, 8.0, 8);
    let rates = log_spaced(0.3, 2.4, 4);
    let mut out = Vec::with_capacity(scales.len() * rates.len());
    for &s in &scales {
        for &r in &rates {
            out.push(ScaleRateParam::new(s, r, Direction::Down));
        }
    }
    out
}

fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && lo > 0.0 && hi > lo);
    let step = (hi / lo).ln() / (n - 1) as f64;
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo * (step * i as f64).exp()
            }
        })
        .collect()
}
