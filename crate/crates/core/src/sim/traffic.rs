//! Daily user-count profile.

use std::f64::consts::TAU;

const FLOOR: f64 = 0.2;
const PEAK_HEIGHT: f64 = 0.6;
const PEAK_WIDTH_H: f64 = 1.0;

fn raw(hour: f64, busy_hours: &[u8]) -> f64 {
    let base = 0.5 - 0.5 * (TAU * (hour - 4.0) / 24.0).cos();
    let peaks: f64 = busy_hours
        .iter()
        .map(|&b| {
            let d = (hour - f64::from(b)).abs();
            let d = d.min(24.0 - d);
            PEAK_HEIGHT * (-d * d / (2.0 * PEAK_WIDTH_H * PEAK_WIDTH_H)).exp()
        })
        .sum();
    base + peaks
}

/// Active-user multiplier for `hour` (taken mod 24): a sinusoid with its
/// trough at 04:00 plus Gaussian bumps at the busy hours, rescaled so the
/// daily minimum is 0.2 and the maximum 1.0.
pub fn traffic_pattern(hour: u8, busy_hours: &[u8]) -> f64 {
    let vals: Vec<f64> = (0..24).map(|h| raw(f64::from(h), busy_hours)).collect();
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let v = vals[usize::from(hour % 24)];
    FLOOR + (1.0 - FLOOR) * (v - lo) / (hi - lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BUSY: [u8; 2] = [9, 18];

    #[test]
    fn range_and_extremes() {
        let v: Vec<f64> = (0..24).map(|h| traffic_pattern(h, &BUSY)).collect();
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!((hi - 1.0).abs() < 1e-12);
        assert!((lo - 0.2).abs() < 1e-12);
        assert!(lo >= 0.2 * hi - 1e-12);
    }

    #[test]
    fn busy_hours_are_local_peaks() {
        for &b in &BUSY {
            let v = traffic_pattern(b, &BUSY);
            assert!(v > traffic_pattern(b - 1, &BUSY) && v > traffic_pattern(b + 1, &BUSY), "hour {b}");
        }
    }

    #[test]
    fn pure_function_of_hour() {
        for h in 0..24u8 {
            assert_eq!(traffic_pattern(h, &BUSY), traffic_pattern(h + 24, &BUSY));
        }
    }

    #[test]
    fn no_busy_hours_is_plain_sinusoid() {
        assert!((traffic_pattern(16, &[]) - 1.0).abs() < 1e-12);
        assert!((traffic_pattern(4, &[]) - 0.2).abs() < 1e-12);
    }
}
