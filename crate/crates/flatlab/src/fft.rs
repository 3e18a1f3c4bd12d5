//! Dense transform backends: linear convolution of weight grids via FFT.
//!
//! These back the "dense" halves of the convolution and Fourier-evaluation
//! backend pairs; the sparse/direct halves live next to their operations
//! and the two are cross-checked in tests.

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Smallest 5-smooth integer >= n (FFT-friendly length).
pub fn next_fast_len(n: usize) -> usize {
    let mut n = n.max(1);
    loop {
        let mut m = n;
        for p in [2usize, 3, 5] {
            while m % p == 0 {
                m /= p;
            }
        }
        if m == 1 {
            return n;
        }
        n += 1;
    }
}

fn fft_all_rows(data: &mut [Complex64], rows: usize, cols: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(cols)
    } else {
        planner.plan_fft_forward(cols)
    };
    for r in 0..rows {
        fft.process(&mut data[r * cols..(r + 1) * cols]);
    }
}

fn transpose(data: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); data.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = data[r * cols + c];
        }
    }
    out
}

/// In-place style 2D FFT (row-major `rows x cols`). Unnormalized, like
/// rustfft's 1D transforms; the inverse carries the `1/(rows*cols)` factor.
pub fn fft_2d(data: Vec<Complex64>, rows: usize, cols: usize, inverse: bool) -> Vec<Complex64> {
    debug_assert_eq!(data.len(), rows * cols);
    let mut buf = data;
    fft_all_rows(&mut buf, rows, cols, inverse);
    let mut t = transpose(&buf, rows, cols);
    fft_all_rows(&mut t, cols, rows, inverse);
    let mut back = transpose(&t, cols, rows);
    if inverse {
        let norm = 1.0 / (rows * cols) as f64;
        for v in &mut back {
            *v *= norm;
        }
    }
    back
}

/// Linear convolution of two real sequences.
pub fn convolve_1d(a: &[f64], b: &[f64]) -> Vec<f64> {
    let out_len = a.len() + b.len() - 1;
    let n = next_fast_len(out_len);
    let mut fa: Vec<Complex64> = a.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fa.resize(n, Complex64::default());
    let mut fb: Vec<Complex64> = b.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fb.resize(n, Complex64::default());
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(fb.iter()) {
        *x *= y;
    }
    let inv = planner.plan_fft_inverse(n);
    inv.process(&mut fa);
    let norm = 1.0 / n as f64;
    fa.iter().take(out_len).map(|c| c.re * norm).collect()
}

/// Linear convolution of two real row-major grids.
pub fn convolve_2d(
    a: &[f64],
    (ar, ac): (usize, usize),
    b: &[f64],
    (br, bc): (usize, usize),
) -> (Vec<f64>, (usize, usize)) {
    let out_r = ar + br - 1;
    let out_c = ac + bc - 1;
    let nr = next_fast_len(out_r);
    let nc = next_fast_len(out_c);
    let embed = |src: &[f64], (r, c): (usize, usize)| -> Vec<Complex64> {
        let mut g = vec![Complex64::default(); nr * nc];
        for i in 0..r {
            for j in 0..c {
                g[i * nc + j] = Complex64::new(src[i * c + j], 0.0);
            }
        }
        g
    };
    let fa = fft_2d(embed(a, (ar, ac)), nr, nc, false);
    let fb = fft_2d(embed(b, (br, bc)), nr, nc, false);
    let prod: Vec<Complex64> = fa.iter().zip(fb.iter()).map(|(x, y)| x * y).collect();
    let back = fft_2d(prod, nr, nc, true);
    let mut out = vec![0.0; out_r * out_c];
    for i in 0..out_r {
        for j in 0..out_c {
            out[i * out_c + j] = back[i * nc + j].re;
        }
    }
    (out, (out_r, out_c))
}
