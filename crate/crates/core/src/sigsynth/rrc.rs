//! Root-raised-cosine pulse design.

use crate::scalar::{cast, Real};
use crate::sigsynth::{invalid, SynthError};

/// Designs a unit-energy RRC filter with `2 * overlap * sps + 1` taps.
///
/// `beta` is the excess bandwidth (0 < beta <= 1), `sps` samples per symbol,
/// `overlap` the one-sided filter delay in symbols. The removable
/// singularities at t = 0 and |t| = T/(4*beta) are replaced by their limits.
pub fn design_rrc_filter<T: Real>(
    beta: f64,
    sps: u32,
    overlap: u32,
) -> Result<Vec<T>, SynthError> {
    if !(beta > 0.0 && beta <= 1.0) {
        return invalid("RRC excess bandwidth must satisfy 0 < beta <= 1");
    }
    if sps < 2 {
        return invalid("RRC samples_per_symbol must be >= 2");
    }
    if overlap < 1 {
        return invalid("RRC overlap must be >= 1");
    }

    let n_taps = (2 * overlap * sps + 1) as usize;
    let half = (overlap * sps) as i64;
    let pi = std::f64::consts::PI;

    let mut taps = Vec::with_capacity(n_taps);
    for i in 0..n_taps as i64 {
        // symbol-period units
        let t = (i - half) as f64 / sps as f64;
        let x = 4.0 * beta * t;
        let h = if t == 0.0 {
            1.0 + beta * (4.0 / pi - 1.0)
        } else if (x.abs() - 1.0).abs() < 1e-9 {
            // |t| = T / (4 beta)
            let a = pi / (4.0 * beta);
            (beta / 2.0_f64.sqrt()) * ((1.0 + 2.0 / pi) * a.sin() + (1.0 - 2.0 / pi) * a.cos())
        } else {
            ((pi * t * (1.0 - beta)).sin() + x * (pi * t * (1.0 + beta)).cos())
                / (pi * t * (1.0 - x * x))
        };
        taps.push(h);
    }

    let energy: f64 = taps.iter().map(|h| h * h).sum();
    let scale = 1.0 / energy.sqrt();
    Ok(taps.into_iter().map(|h| cast(h * scale)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tap_count_symmetry_and_unit_energy() {
        let h: Vec<f64> = design_rrc_filter(0.35, 4, 3).unwrap();
        assert_eq!(h.len(), 25);
        for i in 0..h.len() {
            assert!((h[i] - h[h.len() - 1 - i]).abs() < 1e-12, "tap {i}");
        }
        let energy: f64 = h.iter().map(|x| x * x).sum();
        assert!((energy - 1.0).abs() < 1e-9);
    }

    // Cascading the filter with itself gives a raised cosine, which is
    // Nyquist: symbol-spaced samples away from the peak must vanish.
    #[test]
    fn cascade_has_no_intersymbol_interference() {
        let h: Vec<f64> = design_rrc_filter(0.5, 8, 5).unwrap();
        assert_eq!(h.len(), 81);
        let mut rc = vec![0.0f64; 2 * h.len() - 1];
        for (i, a) in h.iter().enumerate() {
            for (j, b) in h.iter().enumerate() {
                rc[i + j] += a * b;
            }
        }
        let center = h.len() - 1;
        assert!((rc[center] - 1.0).abs() < 1e-9);
        // interior taps are Nyquist to < 1e-3; the truncation edge at
        // |k| = overlap leaves ~4.6e-3 of residual ISI
        for k in 1..=9 {
            let off = 8 * k;
            let bound = if k < 5 { 1e-3 } else { 5e-3 };
            assert!(rc[center + off].abs() < bound, "tap +{k} symbols");
            assert!(rc[center - off].abs() < bound, "tap -{k} symbols");
        }
    }

    #[test]
    fn singular_points_are_finite() {
        // beta = 0.5 puts |t| = T/(4 beta) = T/2 exactly on a tap for even sps.
        let h: Vec<f64> = design_rrc_filter(0.5, 4, 3).unwrap();
        assert!(h.iter().all(|x| x.is_finite()));
        let h: Vec<f64> = design_rrc_filter(0.25, 4, 3).unwrap();
        // |t| = T means tap at exactly one symbol period
        assert!(h.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        assert!(design_rrc_filter::<f64>(0.0, 4, 3).is_err());
        assert!(design_rrc_filter::<f64>(1.5, 4, 3).is_err());
        assert!(design_rrc_filter::<f64>(0.35, 1, 3).is_err());
        assert!(design_rrc_filter::<f64>(0.35, 4, 0).is_err());
    }
}
