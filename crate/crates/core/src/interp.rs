//! Kaiser-windowed sinc fractional-delay interpolation.

use std::f64::consts::PI;

/// Kernel length.
pub const TAPS: usize = 64;
/// Taps to the left of the interpolation point; the kernel covers offsets
/// `-(LEFT-1) ..= TAPS-LEFT` relative to the integer sample below it.
const LEFT: isize = 31;
const HALF_WIDTH: f64 = 32.0;
const KAISER_BETA: f64 = 12.0;

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > 1e-17 * sum {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Interpolator for a fixed fractional offset in `[0, 1)`.
#[derive(Debug, Clone)]
pub struct FractionalDelay {
    taps: [f64; TAPS],
}

impl FractionalDelay {
    pub fn new(frac: f64) -> Self {
        debug_assert!((0.0..1.0).contains(&frac));
        let norm = bessel_i0(KAISER_BETA);
        let mut taps = [0.0; TAPS];
        for (j, t) in taps.iter_mut().enumerate() {
            let u = (j as isize - (LEFT - 1)) as f64 - frac;
            let r = u / HALF_WIDTH;
            let w = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / norm;
            *t = sinc(u) * w;
        }
        // Rescale by (c + b·u) so the zeroth moment is 1 and the first is 0:
        // constants and straight lines then pass through exactly.
        let offsets: [f64; TAPS] =
            std::array::from_fn(|j| (j as isize - (LEFT - 1)) as f64 - frac);
        let moment = |p: i32| -> f64 {
            taps.iter()
                .zip(&offsets)
                .map(|(t, u)| t * u.powi(p))
                .sum()
        };
        let (m0, m1, m2) = (moment(0), moment(1), moment(2));
        let det = m0 * m2 - m1 * m1;
        let (c, b) = (m2 / det, -m1 / det);
        for (t, u) in taps.iter_mut().zip(&offsets) {
            *t *= c + b * u;
        }
        Self { taps }
    }

    /// Value at `base + frac`. Samples beyond either end are supplied by odd
    /// reflection about the end sample, which preserves straight lines.
    pub fn at(&self, x: &[f64], base: usize) -> f64 {
        let first = base as isize - (LEFT - 1);
        let n = x.len() as isize;
        if first >= 0 && first + TAPS as isize <= n {
            let window = &x[first as usize..first as usize + TAPS];
            return window.iter().zip(&self.taps).map(|(a, b)| a * b).sum();
        }
        self.taps
            .iter()
            .enumerate()
            .map(|(j, t)| t * extended(x, first + j as isize))
            .sum()
    }
}

fn extended(x: &[f64], i: isize) -> f64 {
    let last = x.len() as isize - 1;
    if i < 0 {
        let m = (-i).min(last);
        2.0 * x[0] - x[m as usize]
    } else if i > last {
        let m = (2 * last - i).max(0);
        2.0 * x[last as usize] - x[m as usize]
    } else {
        x[i as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_reference() {
        // I0(1) and I0(10) from standard tables.
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_4).abs() < 1e-14);
        assert!((bessel_i0(10.0) / 2_815.716_628_466_254 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn zero_fraction_is_identity() {
        let x: Vec<f64> = (0..200).map(|i| ((i * 7919) % 101) as f64).collect();
        let d = FractionalDelay::new(0.0);
        for i in 0..200 {
            assert!((d.at(&x, i) - x[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn low_frequency_sine_is_accurate() {
        let f = 0.005; // cycles per sample
        let x: Vec<f64> = (0..400).map(|i| (2.0 * PI * f * i as f64).sin()).collect();
        for frac in [0.1, 0.25, 0.5, 0.9] {
            let d = FractionalDelay::new(frac);
            for i in 40..360 {
                let exact = (2.0 * PI * f * (i as f64 + frac)).sin();
                assert!((d.at(&x, i) - exact).abs() < 1e-6, "{frac} {i}");
            }
        }
    }

    #[test]
    fn line_is_preserved_at_edges() {
        let x: Vec<f64> = (0..100).map(|i| 0.3 * i as f64 - 2.0).collect();
        let d = FractionalDelay::new(0.4);
        for i in [0, 1, 5, 50, 95, 98, 99] {
            let exact = 0.3 * (i as f64 + 0.4) - 2.0;
            assert!((d.at(&x, i) - exact).abs() < 1e-9, "{i}");
        }
    }
}
