//! Type-I discrete sine transform and the matching cosine sum, both through a
//! real FFT.
//!
//! With `N = n + 1` the transform is `X_k = Σ_{j=1}^{n} x_j sin(π j k / N)`;
//! it is its own inverse up to the factor `N / 2`.

use std::f64::consts::PI;
use std::sync::Arc;

use realfft::num_complex::Complex;
use realfft::{RealFftPlanner, RealToComplex};

pub(crate) struct SineTransform {
    n: usize,
    half: Arc<dyn RealToComplex<f64>>,
    double: Arc<dyn RealToComplex<f64>>,
    sines: Vec<f64>,
}

/// Scratch buffers owned by one thread of execution.
pub(crate) struct Workspace {
    z: Vec<f64>,
    spec: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
    z2: Vec<f64>,
    spec2: Vec<Complex<f64>>,
    scratch2: Vec<Complex<f64>>,
}

impl std::fmt::Debug for SineTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SineTransform").field("n", &self.n).finish()
    }
}

impl SineTransform {
    pub(crate) fn new(n: usize) -> Self {
        let big_n = n + 1;
        let mut planner = RealFftPlanner::<f64>::new();
        let half = planner.plan_fft_forward(big_n);
        let double = planner.plan_fft_forward(2 * big_n);
        let sines = (0..=big_n).map(|j| (PI * j as f64 / big_n as f64).sin()).collect();
        Self { n, half, double, sines }
    }

    pub(crate) fn workspace(&self) -> Workspace {
        Workspace {
            z: self.half.make_input_vec(),
            spec: self.half.make_output_vec(),
            scratch: self.half.make_scratch_vec(),
            z2: self.double.make_input_vec(),
            spec2: self.double.make_output_vec(),
            scratch2: self.double.make_scratch_vec(),
        }
    }

    /// Unnormalized DST-I in place.
    pub(crate) fn dst_in_place(&self, x: &mut [f64], ws: &mut Workspace) {
        let n = self.n;
        let big_n = n + 1;
        debug_assert_eq!(x.len(), n);
        if big_n % 2 == 1 {
            return self.dst_via_double(x, ws);
        }
        // x_j for j = 1..n lives at x[j - 1]; x_0 = x_N = 0.
        let at = |j: usize| if j == 0 || j == big_n { 0.0 } else { x[j - 1] };
        let z = &mut ws.z;
        z[0] = 0.0;
        for j in 1..big_n {
            let (a, b) = (at(j), at(big_n - j));
            z[j] = self.sines[j] * (a + b) + 0.5 * (a - b);
        }
        self.half
            .process_with_scratch(z, &mut ws.spec, &mut ws.scratch)
            .expect("fft buffer sizes fixed at construction");
        let spec = &ws.spec;
        let mut acc = 0.5 * spec[0].re;
        x[0] = acc;
        for k in 1..big_n / 2 {
            x[2 * k - 1] = -spec[k].im;
            acc += spec[k].re;
            x[2 * k] = acc;
        }
    }

    fn dst_via_double(&self, x: &mut [f64], ws: &mut Workspace) {
        let n = self.n;
        let big_n = n + 1;
        let z = &mut ws.z2;
        z[0] = 0.0;
        z[big_n] = 0.0;
        for j in 1..=n {
            z[j] = x[j - 1];
            z[2 * big_n - j] = -x[j - 1];
        }
        self.double
            .process_with_scratch(z, &mut ws.spec2, &mut ws.scratch2)
            .expect("fft buffer sizes fixed at construction");
        for k in 1..=n {
            x[k - 1] = -0.5 * ws.spec2[k].im;
        }
    }

    /// `g_i = Σ_{j=1}^{n} d_j cos(π i j / N)` for `i = 1..n`, in place.
    pub(crate) fn cosine_sum_in_place(&self, d: &mut [f64], ws: &mut Workspace) {
        let n = self.n;
        let big_n = n + 1;
        let z = &mut ws.z2;
        z[0] = 0.0;
        z[big_n] = 0.0;
        for j in 1..=n {
            z[j] = d[j - 1];
            z[2 * big_n - j] = d[j - 1];
        }
        self.double
            .process_with_scratch(z, &mut ws.spec2, &mut ws.scratch2)
            .expect("fft buffer sizes fixed at construction");
        for i in 1..=n {
            d[i - 1] = 0.5 * ws.spec2[i].re;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dst(x: &[f64]) -> Vec<f64> {
        let big_n = (x.len() + 1) as f64;
        (1..=x.len())
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(j, v)| v * (PI * ((j + 1) * k) as f64 / big_n).sin())
                    .sum()
            })
            .collect()
    }

    fn naive_cos(d: &[f64]) -> Vec<f64> {
        let big_n = (d.len() + 1) as f64;
        (1..=d.len())
            .map(|i| {
                d.iter()
                    .enumerate()
                    .map(|(j, v)| v * (PI * ((j + 1) * i) as f64 / big_n).cos())
                    .sum()
            })
            .collect()
    }

    fn sample(n: usize) -> Vec<f64> {
        (0..n).map(|i| ((i * i) as f64 * 0.37).sin() + 0.01 * i as f64).collect()
    }

    #[test]
    fn dst_matches_direct_sum() {
        for n in [3, 4, 7, 15, 16, 63, 100, 255] {
            let t = SineTransform::new(n);
            let mut ws = t.workspace();
            let x = sample(n);
            let want = naive_dst(&x);
            let mut got = x.clone();
            t.dst_in_place(&mut got, &mut ws);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-11 * (1.0 + b.abs()), "n={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn dst_is_involution_up_to_scale() {
        let n = 2047;
        let t = SineTransform::new(n);
        let mut ws = t.workspace();
        let x = sample(n);
        let mut y = x.clone();
        t.dst_in_place(&mut y, &mut ws);
        t.dst_in_place(&mut y, &mut ws);
        let s = 2.0 / (n + 1) as f64;
        for (a, b) in y.iter().zip(&x) {
            assert!((a * s - b).abs() < 1e-12 * (1.0 + b.abs()) * 10.0);
        }
    }

    #[test]
    fn cosine_sum_matches_direct_sum() {
        for n in [3, 8, 31, 64] {
            let t = SineTransform::new(n);
            let mut ws = t.workspace();
            let d = sample(n);
            let want = naive_cos(&d);
            let mut got = d.clone();
            t.cosine_sum_in_place(&mut got, &mut ws);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-11 * (1.0 + b.abs()));
            }
        }
    }
}
