//! Binary continuous-phase frequency modulation: FSK and MSK with a
//! rectangular phase-shaping pulse, GFSK with a Gaussian one.

use num_complex::Complex;
use rand::Rng;

use crate::scalar::{cast, Real};
use crate::seed::Prng;
use crate::sigsynth::{
    invalid, normalize_power, Family, GenerationParams, IqCapture, ModulationScheme, SynthError,
};

/// Symbols map to tones at +- carrier_spacing/2 around the carrier via
/// continuous-phase integration, giving a constant-envelope waveform.
pub fn modulate_frequency<T: Real>(
    params: &GenerationParams,
    n_samples: usize,
    rng: &mut Prng,
) -> Result<IqCapture<T>, SynthError> {
    if params.scheme.family() != Family::FrequencyDigital {
        return invalid(format!("{} is not frequency-digital", params.scheme));
    }
    params.validate()?;
    let sps = params.samples_per_symbol.unwrap() as usize;
    if n_samples == 0 {
        return invalid("n_samples must be positive");
    }
    let fs = params.nominal_sample_rate_hz;
    let spacing = params.carrier_spacing_hz.unwrap();

    // per-sample frequency pulse; each symbol's pulse sums to sps so that a
    // full symbol advances the phase by +- pi * spacing / symbol_rate
    let pulse: Vec<f64> = match params.scheme {
        ModulationScheme::Gfsk => {
            gaussian_frequency_pulse(sps, params.gaussian_beta.unwrap(), params.symbol_overlap.unwrap())
        }
        _ => vec![1.0; sps],
    };

    let pulse_symbols = pulse.len().div_ceil(sps);
    let n_symbols = n_samples.div_ceil(sps) + pulse_symbols + 1;
    let symbols: Vec<f64> = (0..n_symbols)
        .map(|_| if rng.gen_range(0..2) == 0 { -1.0 } else { 1.0 })
        .collect();

    // instantaneous frequency in cycles/sample
    let tone = spacing / 2.0 / fs;
    let mut freq = vec![0.0f64; n_samples];
    for (k, &a) in symbols.iter().enumerate() {
        let base = k * sps;
        for (j, &p) in pulse.iter().enumerate() {
            if base + j >= n_samples {
                break;
            }
            freq[base + j] += a * tone * p;
        }
    }

    let mut phase = 0.0f64;
    let mut samples = Vec::with_capacity(n_samples);
    for f in &freq {
        samples.push(Complex::new(cast::<T>(phase.cos()), cast::<T>(phase.sin())));
        phase += 2.0 * std::f64::consts::PI * f;
    }

    normalize_power(&mut samples);
    Ok(IqCapture {
        samples,
        params: params.clone(),
        channel: None,
    })
}

/// Rectangular pulse smoothed by a Gaussian window with bandwidth-time
/// product `bt`, truncated to `span` symbols of spread, renormalized so the
/// pulse area still equals one symbol period.
fn gaussian_frequency_pulse(sps: usize, bt: f64, span: u32) -> Vec<f64> {
    let sigma = (2.0f64.ln()).sqrt() * sps as f64 / (2.0 * std::f64::consts::PI * bt);
    let win_len = span as usize * sps + 1;
    let center = (win_len - 1) as f64 / 2.0;
    let window: Vec<f64> = (0..win_len)
        .map(|i| (-((i as f64 - center) / sigma).powi(2) / 2.0).exp())
        .collect();
    let mut pulse = vec![0.0f64; sps + win_len - 1];
    for i in 0..sps {
        for (j, &w) in window.iter().enumerate() {
            pulse[i + j] += w;
        }
    }
    let sum: f64 = pulse.iter().sum();
    let scale = sps as f64 / sum;
    pulse.iter_mut().for_each(|p| *p *= scale);
    pulse
}
