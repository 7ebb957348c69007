//! Thin FFT helpers over rustfft: cached plans, analytic-signal construction
//! and a 2D complex DFT for modulation-spectrum analysis.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

thread_local! {
    static PLANS: RefCell<PlanCache> = RefCell::new(PlanCache {
        planner: FftPlanner::new(),
        forward: HashMap::new(),
        inverse: HashMap::new(),
    });
}

struct PlanCache {
    planner: FftPlanner<f64>,
    forward: HashMap<usize, Arc<dyn Fft<f64>>>,
    inverse: HashMap<usize, Arc<dyn Fft<f64>>>,
}

fn with_forward_plan(n: usize, buf: &mut [Complex64]) {
    PLANS.with(|c| {
        let mut c = c.borrow_mut();
        let plan = match c.forward.get(&n) {
            Some(p) => p.clone(),
            None => {
                let p = c.planner.plan_fft_forward(n);
                c.forward.insert(n, p.clone());
                p
            }
        };
        plan.process(buf);
    });
}

fn with_inverse_plan(n: usize, buf: &mut [Complex64]) {
    PLANS.with(|c| {
        let mut c = c.borrow_mut();
        let plan = match c.inverse.get(&n) {
            Some(p) => p.clone(),
            None => {
                let p = c.planner.plan_fft_inverse(n);
                c.inverse.insert(n, p.clone());
                p
            }
        };
        plan.process(buf);
    });
}

/// In-place forward DFT (unnormalized, e^{-2πi jk/n} convention).
pub fn fft_inplace(buf: &mut [Complex64]) {
    with_forward_plan(buf.len(), buf);
}

/// In-place inverse DFT, normalized by 1/n so that ifft(fft(x)) = x.
pub fn ifft_inplace(buf: &mut [Complex64]) {
    let n = buf.len();
    with_inverse_plan(n, buf);
    let scale = 1.0 / n as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Analytic signal of a real sequence: negative-frequency bins zeroed,
/// positive bins doubled, DC (and Nyquist for even n) kept as-is.
pub fn analytic_signal(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    assert!(n >= 2, "analytic signal needs at least 2 samples");
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_inplace(&mut buf);
    let half = n / 2;
    for (k, v) in buf.iter_mut().enumerate() {
        if k == 0 || (n % 2 == 0 && k == half) {
            // keep
        } else if k < half || (n % 2 == 1 && k == half) {
            *v *= 2.0;
        } else {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    ifft_inplace(&mut buf);
    buf
}

/// Forward 2D DFT of a real grid given row-major as `rows` slices of length
/// `n_cols`, zero-padded to `(pad_rows, pad_cols)`. Output row-major.
pub fn fft2_real_padded(
    grid: &[f64],
    n_rows: usize,
    n_cols: usize,
    pad_rows: usize,
    pad_cols: usize,
) -> Vec<Complex64> {
    assert!(pad_rows >= n_rows && pad_cols >= n_cols);
    assert_eq!(grid.len(), n_rows * n_cols);
    let mut data = vec![Complex64::new(0.0, 0.0); pad_rows * pad_cols];
    for r in 0..n_rows {
        for c in 0..n_cols {
            data[r * pad_cols + c].re = grid[r * n_cols + c];
        }
    }
    // rows
    for r in 0..pad_rows {
        fft_inplace(&mut data[r * pad_cols..(r + 1) * pad_cols]);
    }
    // columns
    let mut col = vec![Complex64::new(0.0, 0.0); pad_rows];
    for c in 0..pad_cols {
        for r in 0..pad_rows {
            col[r] = data[r * pad_cols + c];
        }
        fft_inplace(&mut col);
        for r in 0..pad_rows {
            data[r * pad_cols + c] = col[r];
        }
    }
    data
}

/// Smallest n' >= n whose prime factors are all in {2, 3, 5, 7}; keeps
/// arbitrary-size FFTs on rustfft's fast mixed-radix paths.
pub fn next_fast_len(n: usize) -> usize {
    fn smooth(mut m: usize) -> bool {
        for p in [2, 3, 5, 7] {
            while m % p == 0 {
                m /= p;
            }
        }
        m == 1
    }
    let mut m = n.max(1);
    while !smooth(m) {
        m += 1;
    }
    m
}
