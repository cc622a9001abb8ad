use crate::grid::Field;
use crate::{Error, Result};

/// Exact solution of `u_t = ν u_xx − u u_x` on the whole line at time `t`,
/// sampled on the grid of `u0`:
///
/// ```text
/// u(t, x) = ∫ (x − y)/t · G(x − y) φ₀(y) dy / ∫ G(x − y) φ₀(y) dy,
/// φ₀ = exp(−U/2ν),  U(y) = ∫_{−L}^{y} u₀,  G(z) ∝ exp(−z²/4νt).
/// ```
///
/// `u0` is extended by zero outside `[−L, L]`, so `φ₀` is constant there.
/// Both integrals use the trapezoid rule on the grid spacing, extended past
/// the ends until the kernel drops below `e^{−70}`.
pub fn cole_hopf_reference(u0: &Field, t: f64, nu: f64) -> Result<Field> {
    if !(t >= 0.0) || !(nu > 0.0) {
        return Err(Error::InvalidParameter(format!("need t >= 0 and nu > 0, got t = {t}, nu = {nu}")));
    }
    if t == 0.0 {
        return Ok(u0.clone());
    }
    let g = *u0.grid();
    let n = g.len();
    let dx = g.dx();
    let f = u0.values();
    // Node values with the two boundary zeros: f_ext[i] = u0(-L + i dx).
    let at = |i: isize| -> f64 {
        if i <= 0 || i as usize > n {
            0.0
        } else {
            f[i as usize - 1]
        }
    };
    let deriv = |i: isize| (8.0 * (at(i + 1) - at(i - 1)) - (at(i + 2) - at(i - 2))) / (12.0 * dx);
    let d0 = deriv(0);
    let mut big_u = vec![0.0; n + 2];
    let mut trap = 0.0;
    for i in 1..=n + 1 {
        trap += 0.5 * dx * (at(i as isize - 1) + at(i as isize));
        // Euler–Maclaurin endpoint correction.
        big_u[i] = trap - dx * dx / 12.0 * (deriv(i as isize) - d0);
    }
    let u_min = big_u.iter().cloned().fold(f64::INFINITY, f64::min);
    let reach = ((4.0 * nu * t * 70.0).sqrt() / dx).ceil() as usize;
    // φ₀ on nodes -reach ..= n + 1 + reach, stored with offset `reach`.
    let total = n + 2 + 2 * reach;
    let phi0: Vec<f64> = (0..total)
        .map(|j| {
            let i = j as isize - reach as isize;
            let u = if i < 0 {
                big_u[0]
            } else if i as usize > n + 1 {
                big_u[n + 1]
            } else {
                big_u[i as usize]
            };
            (-(u - u_min) / (2.0 * nu)).exp()
        })
        .collect();
    let kernel: Vec<f64> = (0..=reach).map(|d| (-((d as f64 * dx).powi(2)) / (4.0 * nu * t)).exp()).collect();
    let values = (1..=n)
        .map(|i| {
            let center = i + reach;
            let (mut num, mut den) = (0.0, 0.0);
            for d in 0..=reach {
                let kd = kernel[d];
                let offset = d as f64 * dx;
                let right = phi0[center + d];
                let left = phi0[center - d];
                if d == 0 {
                    den += kd * right;
                } else {
                    den += kd * (right + left);
                    // x − y = ∓ d·dx for y to the right / left
                    num += kd * offset * (left - right);
                }
            }
            num / (t * den)
        })
        .collect();
    Field::new(g, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn trivial_cases() {
        let g = make_grid(8.0, 255).unwrap();
        let u0 = Field::from_fn(g, |x| (-x * x).exp());
        assert_eq!(cole_hopf_reference(&u0, 0.0, 1.0).unwrap(), u0);
        let z = cole_hopf_reference(&Field::zeros(g), 0.7, 1.0).unwrap();
        assert!(z.max_abs() < 1e-15);
    }

    #[test]
    fn quadrature_self_convergence() {
        let coarse = make_grid(32.0, 2047).unwrap();
        let fine = make_grid(32.0, 4095).unwrap();
        let gauss = |x: f64| (-x * x).exp();
        let a = cole_hopf_reference(&Field::from_fn(coarse, gauss), 0.5, 1.0).unwrap();
        let b = cole_hopf_reference(&Field::from_fn(fine, gauss), 0.5, 1.0).unwrap();
        let diff: f64 = a.values().iter().enumerate().map(|(c, v)| (v - b.values()[2 * c + 1]).powi(2)).sum();
        let rel = (diff / a.values().iter().map(|v| v * v).sum::<f64>()).sqrt();
        assert!(rel < 1e-6, "{rel}");
    }

    #[test]
    fn linear_limit_matches_heat_flow() {
        // Tiny data: the nonlinearity is second order, u ≈ G(t) * u0.
        let g = make_grid(16.0, 1023).unwrap();
        let amp = 1e-6;
        let u0 = Field::from_fn(g, |x| amp * (-x * x).exp());
        let got = cole_hopf_reference(&u0, 1.0, 1.0).unwrap();
        // Gaussian convolved with the heat kernel: amplitude/sqrt(1+4t), width 1+4t.
        for (x, v) in g.nodes().zip(got.values()) {
            let want = amp / 5f64.sqrt() * (-x * x / 5.0).exp();
            assert!((v - want).abs() < 1e-11, "x={x}");
        }
    }
}
