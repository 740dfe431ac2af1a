//! The five-element concept vector that forms the model bottleneck:
//! analog/digital, amplitude-, phase-, and frequency-modulation indicators,
//! plus inverse log2 symbol order.

use crate::scalar::{cast, to_f64, Real};
use crate::sigsynth::{Family, ModulationScheme};

/// c = (c_M, c_A, c_P, c_F, c_O). The four indicators are 0/1; the order
/// concept is 1/log2(order), or 0 when the order is undefined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConceptVector<T: Real> {
    pub analog: T,
    pub amplitude: T,
    pub phase: T,
    pub frequency: T,
    pub order: T,
}

/// Head names in vector order, used in reports and serialized formats.
pub const HEAD_NAMES: [&str; 5] = ["analog_digital", "amplitude", "phase", "frequency", "order"];

impl<T: Real> ConceptVector<T> {
    pub fn to_array(self) -> [T; 5] {
        [
            self.analog,
            self.amplitude,
            self.phase,
            self.frequency,
            self.order,
        ]
    }

    pub fn from_array(a: [T; 5]) -> Self {
        ConceptVector {
            analog: a[0],
            amplitude: a[1],
            phase: a[2],
            frequency: a[3],
            order: a[4],
        }
    }

    pub fn to_f32_array(self) -> [f32; 5] {
        let a = self.to_array();
        [
            to_f64(a[0]) as f32,
            to_f64(a[1]) as f32,
            to_f64(a[2]) as f32,
            to_f64(a[3]) as f32,
            to_f64(a[4]) as f32,
        ]
    }

    pub fn distance(self, other: Self) -> T {
        let a = self.to_array();
        let b = other.to_array();
        let mut acc = T::zero();
        for i in 0..5 {
            let d = a[i] - b[i];
            acc = acc + d * d;
        }
        acc.sqrt()
    }
}

/// The ground-truth concept vector for a scheme.
///
/// QAM sets both the amplitude and phase indicators; PSK only phase. The
/// AWGN class maps to the all-zeros vector, the unique vector with no
/// modulation indicator set, which keeps the nine in-set vectors distinct.
pub fn concept_vector<T: Real>(scheme: ModulationScheme) -> ConceptVector<T> {
    let family = scheme.family();
    let analog = matches!(family, Family::AnalogAmplitude | Family::AnalogFrequency);
    let amplitude = matches!(family, Family::AnalogAmplitude)
        || matches!(
            scheme,
            ModulationScheme::Qam16 | ModulationScheme::Qam32 | ModulationScheme::Qam64
        );
    let phase = family == Family::LinearDigital;
    let frequency = matches!(family, Family::FrequencyDigital | Family::AnalogFrequency);
    let order = match scheme.symbol_order() {
        Some(o) => 1.0 / (o as f64).log2(),
        None => 0.0,
    };
    let ind = |b: bool| if b { T::one() } else { T::zero() };
    ConceptVector {
        analog: ind(analog),
        amplitude: ind(amplitude),
        phase: ind(phase),
        frequency: ind(frequency),
        order: cast(order),
    }
}

/// Label whose concept vector is nearest (Euclidean) to `predicted`.
/// Ties resolve to the lowest label index, making the result deterministic.
pub fn nearest_concept_class<T: Real>(
    predicted: ConceptVector<T>,
    candidates: &[(ConceptVector<T>, usize)],
) -> Result<usize, EmptyCandidateSet> {
    let mut best: Option<(T, usize)> = None;
    for &(vector, label) in candidates {
        let d = predicted.distance(vector);
        let better = match best {
            None => true,
            Some((bd, bl)) => d < bd || (d == bd && label < bl),
        };
        if better {
            best = Some((d, label));
        }
    }
    best.map(|(_, label)| label).ok_or(EmptyCandidateSet)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmptyCandidateSet;

impl std::fmt::Display for EmptyCandidateSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("empty candidate set")
    }
}

impl std::error::Error for EmptyCandidateSet {}

/// (concept vector, scheme id) pairs for a scheme list, in list order.
pub fn candidate_set<T: Real>(
    schemes: &[ModulationScheme],
) -> Vec<(ConceptVector<T>, usize)> {
    schemes
        .iter()
        .map(|&s| (concept_vector(s), s.id() as usize))
        .collect()
}
