use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Second-order section in transposed direct form II, normalized so a0 = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Butterworth (Q = 1/sqrt 2) low-pass from the bilinear-transform cookbook.
    pub fn lowpass(cutoff_hz: f64, rate_hz: f64) -> Self {
        let w0 = 2.0 * PI * cutoff_hz / rate_hz;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * FRAC_1_SQRT_2);
        let a0 = 1.0 + alpha;
        let b1 = (1.0 - cos) / a0;
        Self {
            b: [b1 / 2.0, b1, b1 / 2.0],
            a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
        }
    }

    pub fn highpass(cutoff_hz: f64, rate_hz: f64) -> Self {
        let w0 = 2.0 * PI * cutoff_hz / rate_hz;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * FRAC_1_SQRT_2);
        let a0 = 1.0 + alpha;
        let b0 = (1.0 + cos) / 2.0 / a0;
        Self {
            b: [b0, -2.0 * b0, b0],
            a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
        }
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Filters in place starting from the steady state for a constant input
    /// equal to the first sample.
    fn run(&self, x: &mut [f64]) {
        let Some(&x0) = x.first() else { return };
        let y0 = self.dc_gain() * x0;
        let mut z2 = self.b[2] * x0 - self.a[1] * y0;
        let mut z1 = self.b[1] * x0 - self.a[0] * y0 + z2;
        for v in x.iter_mut() {
            let input = *v;
            let y = self.b[0] * input + z1;
            z1 = self.b[1] * input - self.a[0] * y + z2;
            z2 = self.b[2] * input - self.a[1] * y;
            *v = y;
        }
    }
}

fn cascade(sections: &[Biquad], x: &mut [f64]) {
    for s in sections {
        s.run(x);
    }
}

/// Zero-phase band-pass: cascaded second-order high-pass and low-pass, run
/// forward then backward over an odd-reflected extension of the input.
pub fn bandpass_zero_phase(x: &[f64], low_hz: f64, high_hz: f64, rate_hz: f64) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return x.to_vec();
    }
    let mut sections = vec![Biquad::highpass(low_hz, rate_hz)];
    if high_hz < rate_hz / 2.0 {
        sections.push(Biquad::lowpass(high_hz, rate_hz));
    }
    let pad = (n - 1).min((2.0 * rate_hz / low_hz).ceil() as usize);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

    cascade(&sections, &mut ext);
    ext.reverse();
    cascade(&sections, &mut ext);
    ext.reverse();
    ext[pad..pad + n].to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gain(b: &Biquad, f: f64, fs: f64) -> f64 {
        let w = 2.0 * PI * f / fs;
        let (c1, s1) = (w.cos(), -w.sin());
        let (c2, s2) = ((2.0 * w).cos(), -(2.0 * w).sin());
        let num = (b.b[0] + b.b[1] * c1 + b.b[2] * c2, b.b[1] * s1 + b.b[2] * s2);
        let den = (1.0 + b.a[0] * c1 + b.a[1] * c2, b.a[0] * s1 + b.a[1] * s2);
        ((num.0 * num.0 + num.1 * num.1) / (den.0 * den.0 + den.1 * den.1)).sqrt()
    }

    #[test]
    fn butterworth_sections_are_3db_at_cutoff() {
        let lp = Biquad::lowpass(4.0, 30.0);
        let hp = Biquad::highpass(0.6, 30.0);
        assert!((gain(&lp, 4.0, 30.0) - FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((gain(&hp, 0.6, 30.0) - FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((gain(&lp, 0.0, 30.0) - 1.0).abs() < 1e-12);
        assert!(gain(&hp, 0.0, 30.0) < 1e-12);
    }

    #[test]
    fn passband_sine_keeps_phase() {
        let fs = 30.0;
        let x: Vec<f64> = (0..600).map(|i| (2.0 * PI * 1.5 * i as f64 / fs).sin()).collect();
        let y = bandpass_zero_phase(&x, 0.6, 4.0, fs);
        // interior crests stay on the same sample
        let crest = |v: &[f64]| (200..220).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
        assert_eq!(crest(&x), crest(&y));
    }

    #[test]
    fn removes_dc() {
        let x = vec![3.25; 300];
        let y = bandpass_zero_phase(&x, 0.6, 4.0, 30.0);
        assert!(y.iter().all(|v| v.abs() < 1e-9));
    }
}
