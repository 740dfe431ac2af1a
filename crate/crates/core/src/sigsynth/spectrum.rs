//! Thin FFT helpers shared by the analog modulators and the test oracles.

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::scalar::{cast, to_f64, Real};

/// In-place forward DFT.
pub fn fft<T: Real>(buf: &mut [Complex<T>]) {
    if buf.len() > 1 {
        FftPlanner::new().plan_fft_forward(buf.len()).process(buf);
    }
}

/// In-place inverse DFT with 1/n scaling.
pub fn ifft<T: Real>(buf: &mut [Complex<T>]) {
    let n = buf.len();
    if n > 1 {
        FftPlanner::new().plan_fft_inverse(n).process(buf);
        let scale: T = cast(1.0 / n as f64);
        for v in buf.iter_mut() {
            v.re = v.re * scale;
            v.im = v.im * scale;
        }
    }
}

/// |DFT|^2 / n per bin. Bin k holds normalized frequency k/n (k > n/2 wraps
/// to negative frequencies).
pub fn periodogram<T: Real>(samples: &[Complex<T>]) -> Vec<f64> {
    let mut buf = samples.to_vec();
    fft(&mut buf);
    let n = samples.len() as f64;
    buf.iter()
        .map(|v| {
            let re = to_f64(v.re);
            let im = to_f64(v.im);
            (re * re + im * im) / n
        })
        .collect()
}

/// Smallest two-sided bandwidth (in cycles/sample, centered on DC) that
/// contains `fraction` of the total power.
pub fn occupied_bandwidth<T: Real>(samples: &[Complex<T>], fraction: f64) -> f64 {
    let p = periodogram(samples);
    let n = p.len();
    let total: f64 = p.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    // order bins by |frequency|
    let mut order: Vec<usize> = (0..n).collect();
    let absfreq = |k: usize| -> usize { k.min(n - k) };
    order.sort_by_key(|&k| absfreq(k));
    let mut acc = 0.0;
    for &k in &order {
        acc += p[k];
        if acc >= fraction * total {
            return 2.0 * absfreq(k) as f64 / n as f64;
        }
    }
    1.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_roundtrip() {
        let mut x: Vec<Complex<f64>> = (0..40)
            .map(|i| Complex::new((i as f64).sin(), (i as f64 * 0.3).cos()))
            .collect();
        let orig = x.clone();
        fft(&mut x);
        ifft(&mut x);
        for (a, b) in x.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn periodogram_localizes_a_tone() {
        let n = 256;
        let k0 = 19;
        let x: Vec<Complex<f64>> = (0..n)
            .map(|t| {
                let phase = 2.0 * std::f64::consts::PI * k0 as f64 * t as f64 / n as f64;
                Complex::new(phase.cos(), phase.sin())
            })
            .collect();
        let p = periodogram(&x);
        let peak = p
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(peak, k0);
    }
}
