//! Analog modulation: AM double-sideband, AM lower-sideband, and FM, driven
//! by a band-limited random message.

use num_complex::Complex;
use rand_distr::{Distribution, StandardNormal};

use crate::scalar::{cast, to_f64, Real};
use crate::seed::Prng;
use crate::sigsynth::spectrum::{fft, ifft};
use crate::sigsynth::{
    invalid, normalize_power, Family, GenerationParams, IqCapture, ModulationScheme,
    SynthError, MESSAGE_BANDWIDTH_FRACTION,
};

/// Band-limited random message: white Gaussian noise brick-wall filtered to
/// 1/8 of the sample rate (DC excluded), peak-normalized to |m| <= 1.
pub fn message_signal<T: Real>(n_samples: usize, rng: &mut Prng) -> Vec<T> {
    let mut buf: Vec<Complex<f64>> = (0..n_samples)
        .map(|_| Complex::new(StandardNormal.sample(rng), 0.0))
        .collect();
    fft(&mut buf);
    let cutoff = (n_samples as f64 * MESSAGE_BANDWIDTH_FRACTION) as usize;
    for k in 0..n_samples {
        let f = k.min(n_samples - k);
        if f > cutoff || f == 0 {
            buf[k] = Complex::new(0.0, 0.0);
        }
    }
    ifft(&mut buf);
    let mut m: Vec<f64> = buf.iter().map(|v| v.re).collect();
    let peak = m.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if peak > 0.0 {
        m.iter_mut().for_each(|v| *v /= peak);
    }
    m.into_iter().map(cast).collect()
}

/// AM-DSB with carrier: s[t] = 1 + mu * m[t], unit-power normalized.
pub fn am_dsb<T: Real>(message: &[T], mod_index: f64) -> Vec<Complex<T>> {
    let mu: T = cast(mod_index);
    let mut samples: Vec<Complex<T>> = message
        .iter()
        .map(|&m| Complex::new(T::one() + mu * m, T::zero()))
        .collect();
    normalize_power(&mut samples);
    samples
}

/// AM-LSB with carrier: the upper half-spectrum of the message is removed by
/// FFT zeroing (analytic-signal construction), leaving only negative-frequency
/// content plus the carrier line at DC.
pub fn am_lsb<T: Real>(message: &[T], mod_index: f64) -> Vec<Complex<T>> {
    let n = message.len();
    let mut buf: Vec<Complex<f64>> = message
        .iter()
        .map(|&m| Complex::new(to_f64(m), 0.0))
        .collect();
    fft(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        if k == 0 {
            continue; // message is DC-free anyway
        } else if k > n / 2 {
            *v *= 2.0; // keep lower sideband at full amplitude
        } else {
            *v = Complex::new(0.0, 0.0); // drop upper sideband (and Nyquist)
        }
    }
    ifft(&mut buf);
    let mu = mod_index;
    let mut samples: Vec<Complex<T>> = buf
        .iter()
        .map(|z| Complex::new(cast(1.0 + mu * z.re), cast(mu * z.im)))
        .collect();
    normalize_power(&mut samples);
    samples
}

/// FM: s[t] = exp(j 2 pi (mu * B_m / fs) * sum m), where B_m is the message
/// bandwidth; the modulation index thus sets the peak deviation in units of
/// the message bandwidth.
pub fn fm<T: Real>(message: &[T], mod_index: f64) -> Vec<Complex<T>> {
    let dphi_scale = 2.0 * std::f64::consts::PI * mod_index * MESSAGE_BANDWIDTH_FRACTION;
    let mut phase = 0.0f64;
    let mut samples = Vec::with_capacity(message.len());
    for &m in message {
        samples.push(Complex::new(cast::<T>(phase.cos()), cast::<T>(phase.sin())));
        phase += dphi_scale * to_f64(m);
    }
    normalize_power(&mut samples);
    samples
}

pub fn modulate_analog<T: Real>(
    params: &GenerationParams,
    n_samples: usize,
    rng: &mut Prng,
) -> Result<IqCapture<T>, SynthError> {
    let family = params.scheme.family();
    if family != Family::AnalogAmplitude && family != Family::AnalogFrequency {
        return invalid(format!("{} is not an analog scheme", params.scheme));
    }
    params.validate()?;
    if n_samples == 0 {
        return invalid("n_samples must be positive");
    }
    let message: Vec<T> = message_signal(n_samples, rng);
    let mu = params.modulation_index.unwrap();
    let samples = match params.scheme {
        ModulationScheme::AmDsb => am_dsb(&message, mu),
        ModulationScheme::AmLsb => am_lsb(&message, mu),
        _ => fm(&message, mu),
    };
    Ok(IqCapture {
        samples,
        params: params.clone(),
        channel: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sigsynth::spectrum::{occupied_bandwidth, periodogram};
    use crate::sigsynth::DEFAULT_SAMPLE_RATE_HZ;
    use rand::SeedableRng;

    #[test]
    fn message_is_band_limited_and_peak_normalized() {
        let mut rng = Prng::seed_from_u64(21);
        let m: Vec<f64> = message_signal(1024, &mut rng);
        let peak = m.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        assert!((peak - 1.0).abs() < 1e-12);
        let z: Vec<Complex<f64>> = m.iter().map(|&v| Complex::new(v, 0.0)).collect();
        let spec = periodogram(&z);
        let cutoff = 1024 / 8;
        for k in 0..spec.len() {
            let f = k.min(spec.len() - k);
            if f > cutoff {
                assert!(spec[k] < 1e-20, "bin {k} leaks");
            }
        }
    }

    #[test]
    fn zero_message_gives_pure_carrier() {
        let message = vec![0.0f64; 128];
        let s = am_dsb(&message, 0.5);
        for v in &s {
            assert!((v.re - 1.0).abs() < 1e-12 && v.im.abs() < 1e-12);
        }
    }

    #[test]
    fn lsb_suppresses_the_upper_sideband() {
        let mut rng = Prng::seed_from_u64(33);
        let p = GenerationParams::sample(ModulationScheme::AmLsb, DEFAULT_SAMPLE_RATE_HZ, &mut rng);
        let cap: IqCapture<f64> = modulate_analog(&p, 1024, &mut rng).unwrap();
        let spec = periodogram(&cap.samples);
        let n = spec.len();
        let upper: f64 = (1..n / 2).map(|k| spec[k]).sum();
        let lower: f64 = (n / 2 + 1..n).map(|k| spec[k]).sum();
        assert!(lower > 0.0);
        assert!(upper <= lower / 1000.0, "upper {upper} lower {lower}");
    }

    #[test]
    fn wideband_fm_occupies_more_spectrum_than_narrowband() {
        let mut rng = Prng::seed_from_u64(44);
        let message: Vec<f64> = message_signal(2048, &mut rng);
        let nb = fm(&message, 0.2);
        let wb = fm(&message, 1.88);
        let bw_nb = occupied_bandwidth(&nb, 0.99);
        let bw_wb = occupied_bandwidth(&wb, 0.99);
        assert!(
            bw_wb > bw_nb,
            "wideband {bw_wb} should exceed narrowband {bw_nb}"
        );
    }

    #[test]
    fn am_has_unit_power_and_fm_constant_envelope() {
        let mut rng = Prng::seed_from_u64(55);
        for scheme in [
            ModulationScheme::AmDsb,
            ModulationScheme::AmLsb,
            ModulationScheme::FmNb,
            ModulationScheme::FmWb,
        ] {
            let p = GenerationParams::sample(scheme, DEFAULT_SAMPLE_RATE_HZ, &mut rng);
            let cap: IqCapture<f64> = modulate_analog(&p, 128, &mut rng).unwrap();
            assert!((cap.mean_power() - 1.0).abs() < 1e-12, "{scheme}");
        }
        let message: Vec<f64> = message_signal(128, &mut rng);
        for s in fm(&message, 1.0) {
            assert!((s.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_non_analog_scheme() {
        let mut rng = Prng::seed_from_u64(66);
        let p = GenerationParams::sample(ModulationScheme::Bpsk, DEFAULT_SAMPLE_RATE_HZ, &mut rng);
        assert!(modulate_analog::<f64>(&p, 128, &mut rng).is_err());
    }
}
