use std::f64::consts::PI;

use num_complex::Complex64;

use crate::numerology::N_ACTIVE;
use crate::trace_format::SrsProbe;

pub const AMPLITUDE_DIM: usize = N_ACTIVE;
pub const DIFF_PHASE_DIM: usize = N_ACTIVE - 1;

/// `a_k = |H(f_k)|` over the active bins, in increasing bin order.
pub fn amplitude_features(probe: &SrsProbe) -> Vec<f64> {
    amplitudes(probe.active())
}

pub fn amplitudes(active: &[Complex64]) -> Vec<f64> {
    active.iter().map(|z| z.norm()).collect()
}

/// Wraps an angle into (−π, π].
pub fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

fn phase(z: Complex64) -> f64 {
    if z.re == 0.0 && z.im == 0.0 {
        0.0
    } else {
        z.arg()
    }
}

/// Wrapped phase difference between adjacent active bins. A difference
/// touching an all-zero bin is emitted as 0.
pub fn diff_phase_features(probe: &SrsProbe) -> Vec<f64> {
    diff_phases(probe.active())
}

pub fn diff_phases(active: &[Complex64]) -> Vec<f64> {
    let is_zero = |z: &Complex64| z.re == 0.0 && z.im == 0.0;
    active
        .windows(2)
        .map(|w| {
            if is_zero(&w[0]) || is_zero(&w[1]) {
                0.0
            } else {
                wrap_phase(phase(w[1]) - phase(w[0]))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn magnitudes() {
        let mut h = vec![Complex64::new(1.0, 0.0); 4];
        h[2] = Complex64::new(3.0, 4.0);
        assert_eq!(amplitudes(&h), vec![1.0, 1.0, 5.0, 1.0]);
    }

    #[test]
    fn linear_phase_gives_constant_difference() {
        let h: Vec<_> = (0..N_ACTIVE)
            .map(|k| Complex64::from_polar(1.0, 0.3 * k as f64))
            .collect();
        let d = diff_phases(&h);
        assert_eq!(d.len(), DIFF_PHASE_DIM);
        assert!(d.iter().all(|&x| (x - 0.3).abs() < 1e-12));
    }

    #[test]
    fn wrap_check() {
        let h: Vec<_> = [0.0, 3.0, -3.0]
            .iter()
            .map(|&p| Complex64::from_polar(2.0, p))
            .collect();
        let d = diff_phases(&h);
        assert!((d[0] - 3.0).abs() < 1e-12);
        assert!((d[1] - (2.0 * PI - 6.0)).abs() < 1e-12);
        assert!((d[1] - 0.2832).abs() < 1e-4);
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_phase(PI), PI);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(7.0) - (7.0 - 2.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn zero_bins_emit_zero() {
        let h = vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(-1.0, 0.0),
        ];
        let d = diff_phases(&h);
        assert_eq!(d[0], 0.0);
        assert_eq!(d[1], 0.0);
        assert!((d[2] - PI / 2.0).abs() < 1e-12);
    }
}
