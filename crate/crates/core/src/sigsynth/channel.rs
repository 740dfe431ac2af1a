//! The noise class and the impairment channel (frequency offset + AWGN
//! calibrated to a target SNR).

use num_complex::Complex;
use rand_distr::{Distribution, StandardNormal};

use crate::scalar::{cast, Real};
use crate::seed::Prng;
use crate::sigsynth::{invalid, ChannelSpec, GenerationParams, IqCapture, SynthError};

/// Circularly-symmetric complex Gaussian noise with unit mean power
/// (variance 1/2 per quadrature). This is the AWGN class itself; any
/// recorded ChannelSpec is metadata only and never alters the content.
pub fn synthesize_awgn<T: Real>(
    params: GenerationParams,
    n_samples: usize,
    rng: &mut Prng,
) -> IqCapture<T> {
    let samples = draw_noise(n_samples, 1.0, rng);
    IqCapture {
        samples,
        params,
        channel: None,
    }
}

fn draw_noise<T: Real>(n: usize, power: f64, rng: &mut Prng) -> Vec<Complex<T>> {
    let sigma = (power / 2.0).sqrt();
    (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex::new(cast(re * sigma), cast(im * sigma))
        })
        .collect()
}

/// Applies out[t] = clean[t] * exp(j * w * t) + v[t], where the noise power
/// is the clean capture's measured power scaled by 10^(-snr_db/10). The
/// frequency offset is constant across the capture.
pub fn apply_channel<T: Real>(
    clean: &IqCapture<T>,
    channel: &ChannelSpec,
    rng: &mut Prng,
) -> Result<IqCapture<T>, SynthError> {
    channel.validate()?;
    if !clean.is_noise_free() {
        return invalid("capture already has a channel applied");
    }
    let signal_power = clean.mean_power();
    if !(0.5..=2.0).contains(&signal_power) {
        return invalid(format!(
            "clean capture power {signal_power} is not unit-normalized"
        ));
    }
    let noise_power = signal_power * 10f64.powf(-channel.snr_db as f64 / 10.0);
    let noise: Vec<Complex<T>> = draw_noise(clean.n_samples(), noise_power, rng);

    let w = channel.freq_offset_rad;
    let samples = clean
        .samples
        .iter()
        .zip(noise.iter())
        .enumerate()
        .map(|(t, (s, v))| {
            let phase = w * t as f64;
            let rot = Complex::new(cast::<T>(phase.cos()), cast::<T>(phase.sin()));
            s * rot + v
        })
        .collect();

    Ok(IqCapture {
        samples,
        params: clean.params.clone(),
        channel: Some(*channel),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sigsynth::spectrum::periodogram;
    use crate::sigsynth::{
        modulate_linear, ModulationScheme, DEFAULT_SAMPLE_RATE_HZ,
    };
    use rand::SeedableRng;

    fn awgn_params() -> GenerationParams {
        GenerationParams {
            scheme: ModulationScheme::Awgn,
            samples_per_symbol: None,
            excess_bandwidth: None,
            symbol_overlap: None,
            carrier_spacing_hz: None,
            gaussian_beta: None,
            modulation_index: None,
            nominal_sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
        }
    }

    #[test]
    fn awgn_power_concentrates_near_unity() {
        let mut rng = Prng::seed_from_u64(1);
        let cap: IqCapture<f64> = synthesize_awgn(awgn_params(), 128, &mut rng);
        assert_eq!(cap.n_samples(), 128);
        let p = cap.mean_power();
        assert!((0.6..=1.5).contains(&p), "power {p}");
        let big: IqCapture<f64> = synthesize_awgn(awgn_params(), 100_000, &mut rng);
        let p = big.mean_power();
        assert!((0.99..=1.01).contains(&p), "power {p}");
    }

    #[test]
    fn awgn_quadratures_are_uncorrelated() {
        let mut rng = Prng::seed_from_u64(2);
        let cap: IqCapture<f64> = synthesize_awgn(awgn_params(), 100_000, &mut rng);
        let n = cap.n_samples() as f64;
        let (mut sum_re, mut sum_im, mut sum_cross) = (0.0, 0.0, 0.0);
        let (mut sum_re2, mut sum_im2) = (0.0, 0.0);
        for s in &cap.samples {
            sum_re += s.re;
            sum_im += s.im;
            sum_cross += s.re * s.im;
            sum_re2 += s.re * s.re;
            sum_im2 += s.im * s.im;
        }
        let cov = sum_cross / n - (sum_re / n) * (sum_im / n);
        let var_re = sum_re2 / n - (sum_re / n).powi(2);
        let var_im = sum_im2 / n - (sum_im / n).powi(2);
        let rho = cov / (var_re * var_im).sqrt();
        assert!(rho.abs() < 0.1, "correlation {rho}");
    }

    #[test]
    fn noise_power_tracks_the_snr_target() {
        let mut rng = Prng::seed_from_u64(3);
        let p = GenerationParams::sample(ModulationScheme::Bpsk, DEFAULT_SAMPLE_RATE_HZ, &mut rng);
        for (snr_db, expect) in [(0, 1.0), (20, 0.01)] {
            let mut total = 0.0;
            let captures = 200;
            for _ in 0..captures {
                let clean: IqCapture<f64> = modulate_linear(&p, 128, &mut rng).unwrap();
                let ch = ChannelSpec::new(snr_db, 0.0);
                let noisy = apply_channel(&clean, &ch, &mut rng).unwrap();
                // reconstruct the noise; offset is zero here
                let vp: f64 = noisy
                    .samples
                    .iter()
                    .zip(&clean.samples)
                    .map(|(y, s)| (y - s).norm_sqr())
                    .sum::<f64>()
                    / clean.n_samples() as f64;
                total += vp / clean.mean_power();
            }
            let mean_ratio = total / captures as f64;
            assert!(
                (mean_ratio - expect).abs() < 0.05 * expect.max(0.2),
                "snr {snr_db}: ratio {mean_ratio} expected {expect}"
            );
        }
    }

    #[test]
    fn frequency_offset_moves_a_dc_tone() {
        // pure DC tone, offset 0.05*pi rad/sample -> peak at 0.025 cyc/sample
        let n = 2000usize;
        let clean = IqCapture::<f64> {
            samples: vec![Complex::new(1.0, 0.0); n],
            params: awgn_params(),
            channel: None,
        };
        let ch = ChannelSpec::new(60, 0.05 * std::f64::consts::PI);
        let mut rng = Prng::seed_from_u64(4);
        let noisy = apply_channel(&clean, &ch, &mut rng).unwrap();
        let spec = periodogram(&noisy.samples);
        let peak = spec
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        let expected = (0.025 * n as f64).round() as usize;
        assert!(
            (peak as i64 - expected as i64).abs() <= 1,
            "peak bin {peak} expected {expected}"
        );
    }

    #[test]
    fn rejects_invalid_offset_and_double_application() {
        let mut rng = Prng::seed_from_u64(5);
        let p = GenerationParams::sample(ModulationScheme::Qpsk, DEFAULT_SAMPLE_RATE_HZ, &mut rng);
        let clean: IqCapture<f64> = modulate_linear(&p, 128, &mut rng).unwrap();
        let bad = ChannelSpec::new(10, 0.2 * std::f64::consts::PI);
        assert!(apply_channel(&clean, &bad, &mut rng).is_err());
        let ch = ChannelSpec::new(10, 0.0);
        let once = apply_channel(&clean, &ch, &mut rng).unwrap();
        assert!(apply_channel(&once, &ch, &mut rng).is_err());
    }

    #[test]
    fn offset_corrected_coherence_stays_high_at_20_db() {
        let mut rng = Prng::seed_from_u64(6);
        for scheme in [ModulationScheme::Qam16, ModulationScheme::FmNb] {
            let p = GenerationParams::sample(scheme, DEFAULT_SAMPLE_RATE_HZ, &mut rng);
            let clean: IqCapture<f64> = crate::sigsynth::synthesize(&p, 128, &mut rng).unwrap();
            let ch = ChannelSpec::draw(20, &mut rng);
            let noisy = apply_channel(&clean, &ch, &mut rng).unwrap();
            let rotated: Vec<Complex<f64>> = clean
                .samples
                .iter()
                .enumerate()
                .map(|(t, s)| {
                    let phase = ch.freq_offset_rad * t as f64;
                    s * Complex::new(phase.cos(), phase.sin())
                })
                .collect();
            let inner: Complex<f64> = noisy
                .samples
                .iter()
                .zip(&rotated)
                .map(|(y, s)| y * s.conj())
                .sum();
            let ny: f64 = noisy.samples.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            let ns: f64 = rotated.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            let coherence = inner.norm() / (ny * ns);
            assert!(coherence > 0.99, "{scheme}: coherence {coherence}");
        }
    }
}
