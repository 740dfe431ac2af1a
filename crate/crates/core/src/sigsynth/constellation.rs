//! Gray-mapped constellations, normalized to unit average power.

use num_complex::Complex;

use crate::scalar::{cast, Real};
use crate::sigsynth::{invalid, Family, ModulationScheme, SynthError};

fn gray(k: u32) -> u32 {
    k ^ (k >> 1)
}

/// M-ary PSK, indexed by data word so that adjacent phases differ in one bit.
/// QPSK is rotated to the conventional (+-1 +- j)/sqrt(2) diagonal.
pub fn psk_points<T: Real>(order: u32) -> Result<Vec<Complex<T>>, SynthError> {
    if order < 2 || !order.is_power_of_two() {
        return invalid(format!("PSK order must be a power of 2 >= 2, got {order}"));
    }
    let offset = if order == 4 {
        std::f64::consts::FRAC_PI_4
    } else {
        0.0
    };
    let mut points = vec![Complex::new(T::zero(), T::zero()); order as usize];
    for k in 0..order {
        let angle = 2.0 * std::f64::consts::PI * k as f64 / order as f64 + offset;
        points[gray(k) as usize] = Complex::new(cast(angle.cos()), cast(angle.sin()));
    }
    Ok(points)
}

/// Square 16/64-QAM with per-axis Gray labeling, and cross 32-QAM (6x6 grid
/// minus corners, quasi-Gray labels). Points scaled to unit average power.
pub fn qam_points<T: Real>(order: u32) -> Result<Vec<Complex<T>>, SynthError> {
    match order {
        16 | 64 => {
            let side = if order == 16 { 4u32 } else { 8u32 };
            let bits = side.trailing_zeros();
            // mean square per axis of levels {+-1, +-3, ...} is (side^2 - 1)/3
            let scale = 1.0 / ((2.0 * (side as f64 * side as f64 - 1.0) / 3.0).sqrt());
            let mut points = vec![Complex::new(T::zero(), T::zero()); order as usize];
            for li in 0..side {
                for lq in 0..side {
                    let re = (2.0 * li as f64 - side as f64 + 1.0) * scale;
                    let im = (2.0 * lq as f64 - side as f64 + 1.0) * scale;
                    let idx = (gray(li) << bits) | gray(lq);
                    points[idx as usize] = Complex::new(cast(re), cast(im));
                }
            }
            Ok(points)
        }
        32 => {
            // 6x6 cross: levels {+-5, +-3, +-1}, four corners removed.
            // Average power of the 32 surviving points is exactly 20.
            let scale = 1.0 / 20.0_f64.sqrt();
            let levels = [-5.0, -3.0, -1.0, 1.0, 3.0, 5.0];
            let mut points = Vec::with_capacity(32);
            for (i, &re) in levels.iter().enumerate() {
                for (j, &im) in levels.iter().enumerate() {
                    let corner = (i == 0 || i == 5) && (j == 0 || j == 5);
                    if !corner {
                        points.push(Complex::new(cast(re * scale), cast(im * scale)));
                    }
                }
            }
            Ok(points)
        }
        _ => invalid(format!("unsupported QAM order {order}")),
    }
}

/// The unit-power constellation for a linear-digital scheme.
pub fn constellation<T: Real>(scheme: ModulationScheme) -> Result<Vec<Complex<T>>, SynthError> {
    if scheme.family() != Family::LinearDigital {
        return invalid(format!("{scheme} has no linear constellation"));
    }
    let order = scheme.symbol_order().unwrap();
    match scheme {
        ModulationScheme::Qam16 | ModulationScheme::Qam32 | ModulationScheme::Qam64 => {
            qam_points(order)
        }
        _ => psk_points(order),
    }
}
