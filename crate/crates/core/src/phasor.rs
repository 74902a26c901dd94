//! Phasor <-> sampled-value conversions shared by the synthesizer and relay.
//!
//! Convention: a phasor `I` (kA RMS) stands for the signal
//! `x[n] = sqrt(2) * Re(I * exp(j * w * n))`, where `w` is the fundamental
//! angular step per sample and `n` the absolute sample index in the window.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;

/// Fundamental angular advance per sample, in radians.
pub fn angular_step(base_frequency: f64, sample_rate: f64) -> f64 {
    2.0 * PI * base_frequency / sample_rate
}

/// In-phase sample of `phasor` at index `n`.
pub fn render(phasor: Complex64, step: f64, n: usize) -> f64 {
    let rot = Complex64::from_polar(1.0, step * n as f64);
    SQRT_2 * (phasor * rot).re
}

/// Quadrature companion of [`render`]: `sqrt(2) * Im(I * exp(j w n))`.
///
/// `render(a * I) = Re(a) * render(I) - Im(a) * quadrature(I)`.
pub fn quadrature(phasor: Complex64, step: f64, n: usize) -> f64 {
    let rot = Complex64::from_polar(1.0, step * n as f64);
    SQRT_2 * (phasor * rot).im
}

/// Least-squares fit of `dc + sqrt(2) Re(I e^{j w n})` over `samples`, whose
/// first element sits at absolute index `start`.
///
/// When the span is an integer number of cycles the normal equations are
/// diagonal and this is exactly the full-cycle DFT; otherwise it removes the
/// spectral leakage a rectangular DFT would show for a fractional cycle.
/// Returns `(dc, phasor)`.
pub fn fit(samples: &[f64], start: usize, step: f64) -> (f64, Complex64) {
    // Normal equations for basis [1, cos, sin].
    let mut g = [[0.0f64; 3]; 3];
    let mut r = [0.0f64; 3];
    for (k, &x) in samples.iter().enumerate() {
        let th = step * (start + k) as f64;
        let b = [1.0, th.cos(), th.sin()];
        for i in 0..3 {
            r[i] += b[i] * x;
            for j in 0..3 {
                g[i][j] += b[i] * b[j];
            }
        }
    }
    let c = solve3(g, r);
    // x = c0 + c1 cos + c2 sin = c0 + sqrt2 (Re I cos - Im I sin)
    (c[0], Complex64::new(c[1] / SQRT_2, -c[2] / SQRT_2))
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        let d = a[col][col];
        if d.abs() < 1e-300 {
            return [0.0; 3];
        }
        for row in col + 1..3 {
            let f = a[row][col] / d;
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut s = b[row];
        for k in row + 1..3 {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    x
}
