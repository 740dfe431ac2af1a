//! Single-carrier signal synthesis at complex baseband.
//!
//! Fifteen modulation schemes in five families (linear digital, frequency
//! digital, analog AM, analog FM, noise), with per-capture randomized
//! generation parameters, frequency offset, and calibrated AWGN.

mod analog;
mod channel;
mod constellation;
mod freq;
mod linear;
pub mod rrc;
pub mod spectrum;

pub use analog::{am_dsb, am_lsb, fm, message_signal, modulate_analog};
pub use channel::{apply_channel, synthesize_awgn};
pub use constellation::{constellation, psk_points, qam_points};
pub use freq::modulate_frequency;
pub use linear::modulate_linear;
pub use rrc::design_rrc_filter;

use std::fmt;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::scalar::{cast, to_f64, Real};
use crate::seed::Prng;

/// Errors from signal synthesis.
#[derive(Debug)]
pub enum SynthError {
    InvalidParam(String),
}

impl fmt::Display for SynthError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SynthError::InvalidParam(msg) => write!(f, "invalid parameter: {msg}"),
        }
    }
}

impl std::error::Error for SynthError {}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T, SynthError> {
    Err(SynthError::InvalidParam(msg.into()))
}

/// Modulation family, the coarse axis the concept vector is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    LinearDigital,
    FrequencyDigital,
    AnalogAmplitude,
    AnalogFrequency,
    Noise,
}

/// The fifteen schemes in scope: nine in-set, six out-of-set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModulationScheme {
    #[serde(rename = "BPSK")]
    Bpsk,
    #[serde(rename = "QPSK")]
    Qpsk,
    #[serde(rename = "8PSK")]
    Psk8,
    #[serde(rename = "16QAM")]
    Qam16,
    #[serde(rename = "64QAM")]
    Qam64,
    #[serde(rename = "FSK")]
    Fsk,
    #[serde(rename = "AM-DSB")]
    AmDsb,
    #[serde(rename = "FM-NB")]
    FmNb,
    #[serde(rename = "AWGN")]
    Awgn,
    #[serde(rename = "16PSK")]
    Psk16,
    #[serde(rename = "32QAM")]
    Qam32,
    #[serde(rename = "MSK")]
    Msk,
    #[serde(rename = "GFSK")]
    Gfsk,
    #[serde(rename = "AM-LSB")]
    AmLsb,
    #[serde(rename = "FM-WB")]
    FmWb,
}

use ModulationScheme::*;

impl ModulationScheme {
    pub const ALL: [Self; 15] = [
        Bpsk, Qpsk, Psk8, Qam16, Qam64, Fsk, AmDsb, FmNb, Awgn, Psk16, Qam32, Msk, Gfsk, AmLsb,
        FmWb,
    ];

    /// The nine schemes seen during training, in canonical id order.
    pub const IN_SET: [Self; 9] = [Bpsk, Qpsk, Psk8, Qam16, Qam64, Fsk, AmDsb, FmNb, Awgn];

    /// The six schemes reserved for zero-shot evaluation.
    pub const OUT_OF_SET: [Self; 6] = [Psk16, Qam32, Msk, Gfsk, AmLsb, FmWb];

    /// Stable numeric id used in the dataset format.
    pub fn id(self) -> u8 {
        Self::ALL.iter().position(|&s| s == self).unwrap() as u8
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.get(id as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Bpsk => "BPSK",
            Qpsk => "QPSK",
            Psk8 => "8PSK",
            Qam16 => "16QAM",
            Qam64 => "64QAM",
            Fsk => "FSK",
            AmDsb => "AM-DSB",
            FmNb => "FM-NB",
            Awgn => "AWGN",
            Psk16 => "16PSK",
            Qam32 => "32QAM",
            Msk => "MSK",
            Gfsk => "GFSK",
            AmLsb => "AM-LSB",
            FmWb => "FM-WB",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|s| s.name() == name)
    }

    pub fn family(self) -> Family {
        match self {
            Bpsk | Qpsk | Psk8 | Qam16 | Qam64 | Psk16 | Qam32 => Family::LinearDigital,
            Fsk | Msk | Gfsk => Family::FrequencyDigital,
            AmDsb | AmLsb => Family::AnalogAmplitude,
            FmNb | FmWb => Family::AnalogFrequency,
            Awgn => Family::Noise,
        }
    }

    /// Constellation / tone-set size. Undefined for analog and noise schemes.
    pub fn symbol_order(self) -> Option<u32> {
        match self {
            Bpsk | Fsk | Msk | Gfsk => Some(2),
            Qpsk => Some(4),
            Psk8 => Some(8),
            Qam16 | Psk16 => Some(16),
            Qam32 => Some(32),
            Qam64 => Some(64),
            AmDsb | AmLsb | FmNb | FmWb | Awgn => None,
        }
    }

    pub fn is_in_set(self) -> bool {
        Self::IN_SET.contains(&self)
    }
}

impl fmt::Display for ModulationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-capture generation parameters. Fields that do not apply to the scheme
/// are `None`; `sample` draws every applicable field from its table set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub scheme: ModulationScheme,
    pub samples_per_symbol: Option<u32>,
    pub excess_bandwidth: Option<f64>,
    pub symbol_overlap: Option<u32>,
    pub carrier_spacing_hz: Option<f64>,
    pub gaussian_beta: Option<f64>,
    pub modulation_index: Option<f64>,
    pub nominal_sample_rate_hz: f64,
}

/// Default complex-baseband sample rate. Chosen so the 75 kHz carrier
/// spacing stays sub-Nyquist while 5 kHz remains resolvable in 128 samples.
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 200_000.0;

/// Message bandwidth for analog schemes, as a fraction of the sample rate.
pub const MESSAGE_BANDWIDTH_FRACTION: f64 = 1.0 / 8.0;

impl GenerationParams {
    /// Draws a randomized parameter set for `scheme`. Draw order is fixed
    /// (samples/symbol, excess bandwidth, overlap, spacing, Gaussian beta,
    /// modulation index) so captures are reproducible from the seed alone.
    pub fn sample(scheme: ModulationScheme, sample_rate_hz: f64, rng: &mut Prng) -> Self {
        use rand::Rng;
        let mut p = GenerationParams {
            scheme,
            samples_per_symbol: None,
            excess_bandwidth: None,
            symbol_overlap: None,
            carrier_spacing_hz: None,
            gaussian_beta: None,
            modulation_index: None,
            nominal_sample_rate_hz: sample_rate_hz,
        };
        match scheme.family() {
            Family::LinearDigital => {
                p.samples_per_symbol = Some([4, 8][rng.gen_range(0..2)]);
                p.excess_bandwidth = Some([0.35, 0.5][rng.gen_range(0..2)]);
                p.symbol_overlap = Some([3, 5][rng.gen_range(0..2)]);
            }
            Family::FrequencyDigital => {
                p.samples_per_symbol = Some([4, 8][rng.gen_range(0..2)]);
                p.carrier_spacing_hz = Some(match scheme {
                    Msk => 2_500.0,
                    _ => [5_000.0, 75_000.0][rng.gen_range(0..2)],
                });
                if scheme == Gfsk {
                    p.symbol_overlap = Some([2, 4][rng.gen_range(0..2)]);
                    p.gaussian_beta = Some([0.3, 0.5][rng.gen_range(0..2)]);
                }
            }
            Family::AnalogAmplitude => {
                p.modulation_index = Some(rng.gen_range(0.5..0.9));
            }
            Family::AnalogFrequency => {
                p.modulation_index = Some(match scheme {
                    FmNb => rng.gen_range(0.05..0.4),
                    _ => rng.gen_range(0.825..1.88),
                });
            }
            Family::Noise => {}
        }
        p
    }

    /// Checks field presence and ranges against the scheme's parameter space.
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.nominal_sample_rate_hz <= 0.0 {
            return invalid("nominal_sample_rate_hz must be positive");
        }
        let need = |cond: bool, what: &str| -> Result<(), SynthError> {
            if cond {
                Ok(())
            } else {
                invalid(format!("{what} for {}", self.scheme))
            }
        };
        match self.scheme.family() {
            Family::LinearDigital => {
                need(
                    matches!(self.samples_per_symbol, Some(4) | Some(8)),
                    "samples_per_symbol must be 4 or 8",
                )?;
                need(
                    matches!(self.excess_bandwidth, Some(b) if b == 0.35 || b == 0.5),
                    "excess_bandwidth must be 0.35 or 0.5",
                )?;
                need(
                    matches!(self.symbol_overlap, Some(3) | Some(5)),
                    "symbol_overlap must be 3 or 5",
                )?;
                need(
                    self.carrier_spacing_hz.is_none()
                        && self.gaussian_beta.is_none()
                        && self.modulation_index.is_none(),
                    "non-linear fields must be absent",
                )?;
            }
            Family::FrequencyDigital => {
                need(
                    matches!(self.samples_per_symbol, Some(4) | Some(8)),
                    "samples_per_symbol must be 4 or 8",
                )?;
                let spacing = match self.carrier_spacing_hz {
                    Some(s) => s,
                    None => return invalid("carrier_spacing_hz required"),
                };
                let ok_spacing = match self.scheme {
                    Msk => spacing == 2_500.0,
                    _ => spacing == 5_000.0 || spacing == 75_000.0,
                };
                need(ok_spacing, "carrier_spacing_hz outside table set")?;
                if spacing / self.nominal_sample_rate_hz >= 0.5 {
                    return invalid("carrier spacing at or above Nyquist");
                }
                if self.scheme == Gfsk {
                    need(
                        matches!(self.symbol_overlap, Some(2) | Some(4)),
                        "GFSK symbol_overlap must be 2 or 4",
                    )?;
                    need(
                        matches!(self.gaussian_beta, Some(b) if b == 0.3 || b == 0.5),
                        "GFSK gaussian_beta must be 0.3 or 0.5",
                    )?;
                } else {
                    need(
                        self.symbol_overlap.is_none() && self.gaussian_beta.is_none(),
                        "overlap/beta only apply to GFSK",
                    )?;
                }
                need(
                    self.excess_bandwidth.is_none() && self.modulation_index.is_none(),
                    "non-frequency fields must be absent",
                )?;
            }
            Family::AnalogAmplitude | Family::AnalogFrequency => {
                let range = match self.scheme {
                    AmDsb | AmLsb => (0.5, 0.9),
                    FmNb => (0.05, 0.4),
                    _ => (0.825, 1.88),
                };
                need(
                    matches!(self.modulation_index, Some(m) if m >= range.0 && m <= range.1),
                    "modulation_index outside scheme interval",
                )?;
                need(
                    self.samples_per_symbol.is_none()
                        && self.excess_bandwidth.is_none()
                        && self.symbol_overlap.is_none()
                        && self.carrier_spacing_hz.is_none()
                        && self.gaussian_beta.is_none(),
                    "digital fields must be absent",
                )?;
            }
            Family::Noise => {
                need(
                    self.samples_per_symbol.is_none()
                        && self.excess_bandwidth.is_none()
                        && self.symbol_overlap.is_none()
                        && self.carrier_spacing_hz.is_none()
                        && self.gaussian_beta.is_none()
                        && self.modulation_index.is_none(),
                    "AWGN takes no generation parameters",
                )?;
            }
        }
        Ok(())
    }
}

/// Channel impairments applied to a clean capture. Phase offset and channel
/// gain are fixed at 0 and 1; they are kept as fields so the recorded
/// metadata is self-describing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub snr_db: i32,
    pub freq_offset_rad: f64,
    pub phase_offset_rad: f64,
    pub channel_gain: f64,
}

/// Maximum frequency offset magnitude, radians per sample.
pub const MAX_FREQ_OFFSET_RAD: f64 = 0.1 * std::f64::consts::PI;

impl ChannelSpec {
    pub fn new(snr_db: i32, freq_offset_rad: f64) -> Self {
        ChannelSpec {
            snr_db,
            freq_offset_rad,
            phase_offset_rad: 0.0,
            channel_gain: 1.0,
        }
    }

    /// Draws the frequency offset uniformly on [-0.1*pi, 0.1*pi].
    pub fn draw(snr_db: i32, rng: &mut Prng) -> Self {
        use rand::Rng;
        Self::new(snr_db, rng.gen_range(-MAX_FREQ_OFFSET_RAD..MAX_FREQ_OFFSET_RAD))
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.freq_offset_rad.abs() > MAX_FREQ_OFFSET_RAD {
            return invalid("frequency offset exceeds 0.1*pi rad/sample");
        }
        if self.phase_offset_rad != 0.0 {
            return invalid("phase offset is fixed at 0");
        }
        if self.channel_gain != 1.0 {
            return invalid("channel gain is fixed at 1");
        }
        Ok(())
    }
}

/// A fixed-length complex-baseband capture with its generation metadata.
/// `channel` is `None` until impairments have been applied (or, for the
/// AWGN class, until the recorded-but-inert channel draw is attached).
#[derive(Debug, Clone, PartialEq)]
pub struct IqCapture<T: Real> {
    pub samples: Vec<Complex<T>>,
    pub params: GenerationParams,
    pub channel: Option<ChannelSpec>,
}

impl<T: Real> IqCapture<T> {
    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    /// Mean of |s[t]|^2, accumulated in f64.
    pub fn mean_power(&self) -> f64 {
        mean_power(&self.samples)
    }

    pub fn is_noise_free(&self) -> bool {
        self.channel.is_none()
    }
}

pub(crate) fn mean_power<T: Real>(samples: &[Complex<T>]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let sum: f64 = samples
        .iter()
        .map(|s| {
            let re = to_f64(s.re);
            let im = to_f64(s.im);
            re * re + im * im
        })
        .sum();
    sum / samples.len() as f64
}

/// Scales samples in place to unit mean power.
pub(crate) fn normalize_power<T: Real>(samples: &mut [Complex<T>]) {
    let p = mean_power(samples);
    if p > 0.0 {
        let scale: T = cast(1.0 / p.sqrt());
        for s in samples.iter_mut() {
            s.re = s.re * scale;
            s.im = s.im * scale;
        }
    }
}

/// Noise-free synthesis dispatch over the scheme family.
pub fn synthesize<T: Real>(
    params: &GenerationParams,
    n_samples: usize,
    rng: &mut Prng,
) -> Result<IqCapture<T>, SynthError> {
    match params.scheme.family() {
        Family::LinearDigital => modulate_linear(params, n_samples, rng),
        Family::FrequencyDigital => modulate_frequency(params, n_samples, rng),
        Family::AnalogAmplitude | Family::AnalogFrequency => {
            modulate_analog(params, n_samples, rng)
        }
        Family::Noise => Ok(synthesize_awgn(params.clone(), n_samples, rng)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn scheme_table_is_complete() {
        assert_eq!(ModulationScheme::ALL.len(), 15);
        assert_eq!(ModulationScheme::IN_SET.len(), 9);
        assert_eq!(ModulationScheme::OUT_OF_SET.len(), 6);
        for (i, s) in ModulationScheme::ALL.iter().enumerate() {
            assert_eq!(s.id() as usize, i);
            assert_eq!(ModulationScheme::from_id(i as u8), Some(*s));
            assert_eq!(ModulationScheme::from_name(s.name()), Some(*s));
        }
    }

    #[test]
    fn symbol_order_defined_iff_digital() {
        for s in ModulationScheme::ALL {
            let digital = matches!(
                s.family(),
                Family::LinearDigital | Family::FrequencyDigital
            );
            assert_eq!(s.symbol_order().is_some(), digital, "{s}");
            if let Some(o) = s.symbol_order() {
                assert!(o.is_power_of_two(), "{s}");
            }
        }
    }

    #[test]
    fn sampled_params_validate_and_stay_in_table_sets() {
        let mut rng = Prng::seed_from_u64(11);
        for s in ModulationScheme::ALL {
            for _ in 0..200 {
                let p = GenerationParams::sample(s, DEFAULT_SAMPLE_RATE_HZ, &mut rng);
                p.validate().unwrap();
                if let Some(spacing) = p.carrier_spacing_hz {
                    assert!(spacing / p.nominal_sample_rate_hz < 0.5);
                }
            }
        }
    }

    #[test]
    fn channel_spec_rejects_out_of_range_offset() {
        let c = ChannelSpec::new(10, 0.11 * std::f64::consts::PI);
        assert!(c.validate().is_err());
        let mut rng = Prng::seed_from_u64(3);
        for _ in 0..100 {
            ChannelSpec::draw(0, &mut rng).validate().unwrap();
        }
    }
}
