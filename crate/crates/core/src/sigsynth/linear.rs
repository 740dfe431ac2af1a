//! Linear-digital modulation: RRC-shaped PSK/QAM at complex baseband.

use num_complex::Complex;
use rand::Rng;

use crate::scalar::Real;
use crate::seed::Prng;
use crate::sigsynth::{
    constellation, design_rrc_filter, invalid, normalize_power, Family, GenerationParams,
    IqCapture, SynthError,
};

/// Draws i.i.d. uniform symbols, upsamples, applies the RRC pulse, discards
/// the `overlap * sps` warm-up transient, and normalizes to unit mean power.
pub fn modulate_linear<T: Real>(
    params: &GenerationParams,
    n_samples: usize,
    rng: &mut Prng,
) -> Result<IqCapture<T>, SynthError> {
    if params.scheme.family() != Family::LinearDigital {
        return invalid(format!("{} is not linear-digital", params.scheme));
    }
    params.validate()?;
    let sps = params.samples_per_symbol.unwrap() as usize;
    if n_samples < sps {
        return invalid("n_samples must be at least one symbol period");
    }
    let beta = params.excess_bandwidth.unwrap();
    let overlap = params.symbol_overlap.unwrap();
    let taps: Vec<T> = design_rrc_filter(beta, sps as u32, overlap)?;
    let delay = overlap as usize * sps;

    let points: Vec<Complex<T>> = constellation(params.scheme)?;
    let n_symbols = n_samples.div_ceil(sps) + 2 * overlap as usize + 1;
    let symbols: Vec<Complex<T>> =
        (0..n_symbols).map(|_| points[rng.gen_range(0..points.len())]).collect();

    // full convolution of the zero-stuffed symbol train with the pulse
    let full_len = n_symbols * sps + 2 * delay;
    let mut shaped = vec![Complex::new(T::zero(), T::zero()); full_len];
    for (k, sym) in symbols.iter().enumerate() {
        let base = k * sps;
        for (j, &h) in taps.iter().enumerate() {
            let t = &mut shaped[base + j];
            t.re = t.re + sym.re * h;
            t.im = t.im + sym.im * h;
        }
    }

    let mut samples: Vec<Complex<T>> = shaped[delay..delay + n_samples].to_vec();
    normalize_power(&mut samples);
    Ok(IqCapture {
        samples,
        params: params.clone(),
        channel: None,
    })
}
