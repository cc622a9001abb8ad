//! Damped heat semigroup on the truncated interval, diagonal in the
//! Dirichlet sine basis, and the time convolutions built from it.
//!
//! Mode `j` has eigenvalue `λ_j = (jπ / 2L)²` and evolves by the multiplier
//! `exp(-(λ_j + k) t)`. Time convolutions use left-endpoint nodes only, so
//! the integrand at `s` never sees the singular kernel at `s = t`.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::grid::{dot, Field, Grid};
use crate::noise::{NoiseModel, NoisePath};
use crate::transform::{SineTransform, Workspace};
use crate::{Error, Result};

/// Explicit heat kernel `(4πt)^{-1/2} exp(-x² / 4t)`.
pub fn heat_kernel(t: f64, x: f64) -> f64 {
    (4.0 * PI * t).powf(-0.5) * (-x * x / (4.0 * t)).exp()
}

/// Heat semigroup with damping `k`, i.e. `exp(t (∂²_x - k))` with zero
/// boundary values at `±L`.
#[derive(Debug, Clone)]
pub struct HeatOperator {
    grid: Grid,
    damping: f64,
    eigenvalues: Vec<f64>,
    transform: Arc<SineTransform>,
}

impl HeatOperator {
    pub fn new(grid: Grid, damping: f64) -> Result<Self> {
        if !(damping >= 0.0) || !damping.is_finite() {
            return Err(Error::InvalidParameter(format!("damping must be finite and >= 0, got {damping}")));
        }
        let l = grid.half_width();
        let eigenvalues = (1..=grid.len()).map(|j| (j as f64 * PI / (2.0 * l)).powi(2)).collect();
        Ok(Self { grid, damping, eigenvalues, transform: Arc::new(SineTransform::new(grid.len())) })
    }

    /// Same grid and transform plans, different damping.
    pub fn with_damping(&self, damping: f64) -> Result<Self> {
        if !(damping >= 0.0) || !damping.is_finite() {
            return Err(Error::InvalidParameter(format!("damping must be finite and >= 0, got {damping}")));
        }
        Ok(Self { damping, ..self.clone() })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn damping(&self) -> f64 {
        self.damping
    }

    /// `λ_j` for `j = 1..n` (index `j - 1`).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn multiplier(&self, j: usize, t: f64) -> f64 {
        (-(self.eigenvalues[j - 1] + self.damping) * t).exp()
    }

    pub fn multipliers(&self, t: f64) -> Vec<f64> {
        self.eigenvalues.iter().map(|l| (-(l + self.damping) * t).exp()).collect()
    }

    pub(crate) fn workspace(&self) -> Workspace {
        self.transform.workspace()
    }

    /// Sine coefficients `c_j = ⟨f, e_j⟩`.
    pub fn coefficients(&self, f: &Field) -> Result<Vec<f64>> {
        self.check(f)?;
        let mut ws = self.workspace();
        let mut c = f.values().to_vec();
        self.analyze_in_place(&mut c, &mut ws);
        Ok(c)
    }

    /// Field with sine coefficients `c` (length `n`; missing tail treated as zero).
    pub fn synthesize(&self, coeffs: &[f64]) -> Result<Field> {
        if coeffs.len() > self.grid.len() {
            return Err(Error::InvalidParameter(format!(
                "{} coefficients for {} modes",
                coeffs.len(),
                self.grid.len()
            )));
        }
        let mut v = vec![0.0; self.grid.len()];
        v[..coeffs.len()].copy_from_slice(coeffs);
        let mut ws = self.workspace();
        self.synthesize_in_place(&mut v, &mut ws);
        Ok(Field::from_vec_unchecked(self.grid, v))
    }

    pub(crate) fn analyze_in_place(&self, v: &mut [f64], ws: &mut Workspace) {
        self.transform.dst_in_place(v, ws);
        let s = self.grid.dx() / self.grid.half_width().sqrt();
        v.iter_mut().for_each(|x| *x *= s);
    }

    pub(crate) fn synthesize_in_place(&self, v: &mut [f64], ws: &mut Workspace) {
        self.transform.dst_in_place(v, ws);
        let s = 1.0 / self.grid.half_width().sqrt();
        v.iter_mut().for_each(|x| *x *= s);
    }

    /// Nodal values of `d/dx Σ c_j e_j`, overwriting `c`.
    pub(crate) fn derivative_in_place(&self, c: &mut [f64], ws: &mut Workspace) {
        let l = self.grid.half_width();
        let s = 1.0 / l.sqrt();
        for (j, x) in c.iter_mut().enumerate() {
            *x *= s * (j + 1) as f64 * PI / (2.0 * l);
        }
        self.transform.cosine_sum_in_place(c, ws);
    }

    /// Spectral derivative of a field.
    pub fn derivative(&self, f: &Field) -> Result<Field> {
        self.check(f)?;
        let mut ws = self.workspace();
        let mut v = f.values().to_vec();
        self.analyze_in_place(&mut v, &mut ws);
        self.derivative_in_place(&mut v, &mut ws);
        Ok(Field::from_vec_unchecked(self.grid, v))
    }

    /// Applies precomputed multipliers in place: `v ← S v`.
    pub(crate) fn apply_multipliers_in_place(&self, v: &mut [f64], mult: &[f64], ws: &mut Workspace) {
        self.transform.dst_in_place(v, ws);
        let s = self.grid.dx() / self.grid.half_width();
        for (x, m) in v.iter_mut().zip(mult) {
            *x *= s * m;
        }
        self.transform.dst_in_place(v, ws);
    }

    fn check(&self, f: &Field) -> Result<()> {
        if *f.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// `S(t) f`. `t = 0` returns `f` untouched.
    pub fn heat_apply(&self, f: &Field, t: f64) -> Result<Field> {
        self.check(f)?;
        if !(t >= 0.0) {
            return Err(Error::InvalidParameter(format!("heat semigroup needs t >= 0, got {t}")));
        }
        if t == 0.0 {
            return Ok(f.clone());
        }
        let mut ws = self.workspace();
        let mut v = f.values().to_vec();
        self.apply_multipliers_in_place(&mut v, &self.multipliers(t), &mut ws);
        Ok(Field::from_vec_unchecked(self.grid, v))
    }

    /// Left-endpoint quadrature of `∫_0^t S(t-s) v(s) ds`.
    pub fn j1_apply(&self, path: &TimePath, t: f64) -> Result<Field> {
        path.check_horizon(t)?;
        let mut acc = ConvolutionAccumulator::new(self, path.dt);
        for v in &path.fields[..path.fields.len() - 1] {
            acc.push(v, path.dt)?;
            acc.advance();
        }
        acc.value()
    }

    /// Left-endpoint quadrature of `∫_0^t ∫ ∂_y G(t-s, x-y) w(s, y) dy ds`,
    /// which equals `-∂_x ∫_0^t S(t-s) w(s) ds`.
    pub fn j2_apply(&self, path: &TimePath, t: f64) -> Result<Field> {
        path.check_horizon(t)?;
        let mut acc = ConvolutionAccumulator::new(self, path.dt);
        for w in &path.fields[..path.fields.len() - 1] {
            acc.push(w, path.dt)?;
            acc.advance();
        }
        Ok(acc.derivative()?.scaled(-1.0))
    }

    /// Itô sum `Σ_m S(t - s_m) [φ(s_m) ⊙ ΔW_m]`.
    pub fn stoch_conv(&self, phi: &TimePath, noise: &NoisePath, model: &NoiseModel, t: f64) -> Result<Field> {
        phi.check_horizon(t)?;
        let steps = phi.fields.len() - 1;
        if noise.steps() != steps || (noise.dt() - phi.dt).abs() > 1e-12 * phi.dt {
            return Err(Error::PartitionMismatch(format!(
                "integrand has {steps} steps of {}, noise has {} steps of {}",
                phi.dt,
                noise.steps(),
                noise.dt()
            )));
        }
        let mut acc = ConvolutionAccumulator::new(self, phi.dt);
        for (m, f) in phi.fields[..steps].iter().enumerate() {
            let dw = model.assemble(noise.draws(m))?;
            acc.push(&f.mul(&dw)?, 1.0)?;
            acc.advance();
        }
        acc.value()
    }
}

/// Fields sampled on the uniform partition `s_m = m·dt`, `m = 0..=K`.
#[derive(Debug, Clone)]
pub struct TimePath {
    pub dt: f64,
    pub fields: Vec<Field>,
}

impl TimePath {
    pub fn new(dt: f64, fields: Vec<Field>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("path step must be positive, got {dt}")));
        }
        if fields.is_empty() {
            return Err(Error::InvalidParameter("empty path".into()));
        }
        let g = *fields[0].grid();
        if fields.iter().any(|f| *f.grid() != g) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { dt, fields })
    }

    pub fn horizon(&self) -> f64 {
        self.dt * (self.fields.len() - 1) as f64
    }

    fn check_horizon(&self, t: f64) -> Result<()> {
        if (self.horizon() - t).abs() > 1e-9 * t.max(self.dt) {
            return Err(Error::PartitionMismatch(format!(
                "path covers [0, {}] but t = {t}",
                self.horizon()
            )));
        }
        Ok(())
    }
}

/// Running value of `Σ_{s_m < t} S(t - s_m) g_m` kept in sine coefficients.
///
/// `push` adds a term at the current time, `advance` moves time forward by
/// one step. Semigroup exactness turns the double sum into one multiply per
/// step.
pub struct ConvolutionAccumulator<'a> {
    op: &'a HeatOperator,
    coeffs: Vec<f64>,
    step_mult: Vec<f64>,
    buf: Vec<f64>,
    ws: Workspace,
}

impl<'a> ConvolutionAccumulator<'a> {
    pub fn new(op: &'a HeatOperator, dt: f64) -> Self {
        let n = op.grid().len();
        Self { op, coeffs: vec![0.0; n], step_mult: op.multipliers(dt), buf: vec![0.0; n], ws: op.workspace() }
    }

    /// Adds `weight · g` at the current time.
    pub fn push(&mut self, g: &Field, weight: f64) -> Result<()> {
        self.op.check(g)?;
        self.buf.copy_from_slice(g.values());
        self.op.analyze_in_place(&mut self.buf, &mut self.ws);
        for (c, b) in self.coeffs.iter_mut().zip(&self.buf) {
            *c += weight * b;
        }
        Ok(())
    }

    pub fn advance(&mut self) {
        for (c, m) in self.coeffs.iter_mut().zip(&self.step_mult) {
            *c *= m;
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn value(&mut self) -> Result<Field> {
        self.buf.copy_from_slice(&self.coeffs);
        self.op.synthesize_in_place(&mut self.buf, &mut self.ws);
        Ok(Field::from_vec_unchecked(*self.op.grid(), self.buf.clone()))
    }

    /// Spatial derivative of the current value.
    pub fn derivative(&mut self) -> Result<Field> {
        self.buf.copy_from_slice(&self.coeffs);
        self.op.derivative_in_place(&mut self.buf, &mut self.ws);
        Ok(Field::from_vec_unchecked(*self.op.grid(), self.buf.clone()))
    }
}

/// Discrete mass and `∫G²` of the explicit heat kernel at time `t`.
pub fn kernel_checks(grid: Grid, t: f64) -> Result<(f64, f64)> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("kernel check needs t > 0, got {t}")));
    }
    if 4.0 * t.sqrt() > grid.half_width() {
        return Err(Error::InvalidParameter(format!(
            "kernel at t = {t} is not contained in [-{0}, {0}]",
            grid.half_width()
        )));
    }
    let g: Vec<f64> = grid.nodes().map(|x| heat_kernel(t, x)).collect();
    let dx = grid.dx();
    let mass = g.iter().sum::<f64>() * dx;
    let l2sq = dot(&g, &g) * dx;
    Ok((mass, l2sq))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{lp_norm, make_grid};
    use crate::noise::NoiseModel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mode(grid: Grid, j: usize) -> Field {
        let l = grid.half_width();
        Field::from_fn(grid, |x| l.powf(-0.5) * (j as f64 * PI * (x + l) / (2.0 * l)).sin())
    }

    fn random_field(grid: Grid, rng: &mut impl Rng) -> Field {
        Field::new(grid, (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn rel_err(a: &Field, b: &Field) -> f64 {
        lp_norm(&a.sub(b).unwrap(), 2.0).unwrap() / lp_norm(b, 2.0).unwrap()
    }

    #[test]
    fn zero_time_is_identity() {
        let g = make_grid(8.0, 127).unwrap();
        let op = HeatOperator::new(g, 1.0).unwrap();
        let f = random_field(g, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(op.heat_apply(&f, 0.0).unwrap(), f);
        assert!(op.heat_apply(&f, -0.1).is_err());
    }

    #[test]
    fn eigenmodes_decay_exactly() {
        let g = make_grid(32.0, 2047).unwrap();
        let op = HeatOperator::new(g, 0.7).unwrap();
        for j in [1, 5, 40] {
            let e = mode(g, j);
            let t = 0.3;
            let want = e.scaled(op.multiplier(j, t));
            assert!(rel_err(&op.heat_apply(&e, t).unwrap(), &want) < 1e-12);
        }
    }

    #[test]
    fn mass_conserved_without_damping() {
        let g = make_grid(32.0, 2047).unwrap();
        let op = HeatOperator::new(g, 0.0).unwrap();
        let f = Field::from_fn(g, |x| (-x * x).exp());
        let before: f64 = f.values().iter().sum::<f64>() * g.dx();
        let after: f64 = op.heat_apply(&f, 0.5).unwrap().values().iter().sum::<f64>() * g.dx();
        assert!(((after - before) / before).abs() < 1e-6);
    }

    #[test]
    fn kernel_identities() {
        let g = make_grid(32.0, 2047).unwrap();
        assert!((heat_kernel(1.0 / (4.0 * PI), 0.0) - 1.0).abs() < 1e-15);
        let (mass, l2sq) = kernel_checks(g, 1.0).unwrap();
        assert!((mass - 1.0).abs() < 1e-8);
        // ∫G² = (4πt)^{-1}·√(2πt) = (8πt)^{-1/2}, half of (2πt)^{-1/2}.
        assert!((l2sq - (8.0 * PI).powf(-0.5)).abs() < 1e-6);
        assert!((l2sq / (2.0 * PI).powf(-0.5) - 0.5).abs() < 1e-6);
        assert!(kernel_checks(g, 100.0).is_err());
        assert!(kernel_checks(g, 0.0).is_err());
    }

    #[test]
    fn semigroup_contractivity_positivity() {
        let g = make_grid(16.0, 511).unwrap();
        let op = HeatOperator::new(g, 0.3).unwrap();
        let free = op.with_damping(0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let f = random_field(g, &mut rng);
            let s = rng.random_range(0.0..0.5);
            let t = rng.random_range(0.0..0.5);
            let two = op.heat_apply(&op.heat_apply(&f, s).unwrap(), t).unwrap();
            let one = op.heat_apply(&f, s + t).unwrap();
            assert!(rel_err(&two, &one) < 1e-12);
            assert!(lp_norm(&one, 2.0).unwrap() <= lp_norm(&f, 2.0).unwrap());

            // positivity holds once the truncated spectrum is negligible, t ≳ 4 dx²
            let pos = Field::new(g, f.values().iter().map(|v| v.abs()).collect()).unwrap();
            let tp = rng.random_range(0.01..1.0);
            let out = free.heat_apply(&pos, tp).unwrap();
            let min = out.values().iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min >= -1e-10 * out.max_abs(), "min {min}");
        }
    }

    #[test]
    fn j1_of_constant_mode() {
        let g = make_grid(4.0, 255).unwrap();
        let op = HeatOperator::new(g, 0.0).unwrap();
        let e = mode(g, 1);
        let lam = op.eigenvalues()[0];
        let t = 1.0;
        for steps in [100usize, 200, 400] {
            let dt = t / steps as f64;
            let path = TimePath::new(dt, vec![e.clone(); steps + 1]).unwrap();
            let got = op.j1_apply(&path, t).unwrap();
            let want = e.scaled((1.0 - (-lam * t).exp()) / lam);
            // left-endpoint rule, first order
            assert!(rel_err(&got, &want) < lam * dt, "{}", rel_err(&got, &want));
        }
        let zero = TimePath::new(0.1, vec![Field::zeros(g); 11]).unwrap();
        assert_eq!(op.j1_apply(&zero, 1.0).unwrap().max_abs(), 0.0);
        assert!(op.j1_apply(&zero, 2.0).is_err());
    }

    /// Direct double sum, the definition the accumulator replaces.
    fn j1_direct(op: &HeatOperator, path: &TimePath) -> Field {
        let k = path.fields.len() - 1;
        let mut out = Field::zeros(*op.grid());
        for m in 0..k {
            let term = op.heat_apply(&path.fields[m], (k - m) as f64 * path.dt).unwrap();
            out = out.add(&term.scaled(path.dt)).unwrap();
        }
        out
    }

    fn smooth_path(g: Grid, steps: usize, dt: f64, rng: &mut impl Rng) -> TimePath {
        let amps: Vec<(f64, f64, f64)> =
            (0..4).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-2.0..2.0), rng.random_range(0.5..3.0))).collect();
        let fields = (0..=steps)
            .map(|m| {
                let s = m as f64 * dt;
                Field::from_fn(g, |x| {
                    amps.iter().map(|(a, c, w)| a * (1.0 + (w * s).sin()) * (-(x - c).powi(2) / w).exp()).sum()
                })
            })
            .collect();
        TimePath::new(dt, fields).unwrap()
    }

    #[test]
    fn j1_accumulator_matches_direct_sum_and_norm_bound() {
        let g = make_grid(8.0, 255).unwrap();
        let op = HeatOperator::new(g, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..100 {
            let dt = 0.01;
            let path = smooth_path(g, 20, dt, &mut rng);
            let got = op.j1_apply(&path, 0.2).unwrap();
            if trial < 5 {
                assert!(rel_err(&got, &j1_direct(&op, &path)) < 1e-12);
            }
            for p in [2.0, 4.0] {
                let lhs = lp_norm(&got, p).unwrap();
                let rhs: f64 = path.fields[..20].iter().map(|f| lp_norm(f, p).unwrap() * dt).sum();
                assert!(lhs <= rhs * (1.0 + 1e-9), "p={p}: {lhs} > {rhs}");
            }
        }
    }

    #[test]
    fn j2_self_convergence_and_constant() {
        let g = make_grid(8.0, 255).unwrap();
        let op = HeatOperator::new(g, 0.0).unwrap();
        let e = mode(g, 1);
        let t = 0.5;
        let coarse = op.j2_apply(&TimePath::new(t / 50.0, vec![e.clone(); 51]).unwrap(), t).unwrap();
        let fine = op.j2_apply(&TimePath::new(t / 800.0, vec![e.clone(); 801]).unwrap(), t).unwrap();
        assert!(rel_err(&coarse, &fine) < 0.02);

        let zero = TimePath::new(0.1, vec![Field::zeros(g); 6]).unwrap();
        assert_eq!(op.j2_apply(&zero, 0.5).unwrap().max_abs(), 0.0);

        // ‖J₂w(t)‖_{L²} ≤ C Σ (t-s_m)^{-3/4} ‖w_m‖_{L¹} dt with C = ‖∂_x G(1)‖_{L²}.
        let c = (1.0 / (8.0 * (2.0 * PI).sqrt())).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let dt = 0.005;
            let steps = 40;
            let path = smooth_path(g, steps, dt, &mut rng);
            let t = dt * steps as f64;
            let num = lp_norm(&op.j2_apply(&path, t).unwrap(), 2.0).unwrap();
            let den: f64 = (0..steps)
                .map(|m| (t - m as f64 * dt).powf(-0.75) * lp_norm(&path.fields[m], 1.0).unwrap() * dt)
                .sum();
            worst = worst.max(num / den);
        }
        assert!(worst.is_finite() && worst <= c * 1.05, "ratio {worst} vs {c}");
    }

    #[test]
    fn j_operators_are_linear() {
        let g = make_grid(8.0, 127).unwrap();
        let op = HeatOperator::new(g, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let a = smooth_path(g, 10, 0.02, &mut rng);
            let b = smooth_path(g, 10, 0.02, &mut rng);
            let (ca, cb) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let comb = TimePath::new(
                0.02,
                a.fields.iter().zip(&b.fields).map(|(x, y)| x.scaled(ca).add(&y.scaled(cb)).unwrap()).collect(),
            )
            .unwrap();
            for which in 0..2 {
                let f = |p: &TimePath| if which == 0 { op.j1_apply(p, 0.2).unwrap() } else { op.j2_apply(p, 0.2).unwrap() };
                let lhs = f(&comb);
                let rhs = f(&a).scaled(ca).add(&f(&b).scaled(cb)).unwrap();
                assert!(lp_norm(&lhs.sub(&rhs).unwrap(), 2.0).unwrap() <= 1e-12 * (1.0 + lp_norm(&rhs, 2.0).unwrap()));
            }
        }
    }

    #[test]
    fn spectral_derivative_of_mode() {
        let g = make_grid(2.0, 511).unwrap();
        let op = HeatOperator::new(g, 0.0).unwrap();
        let l = g.half_width();
        let k3 = 3.0 * PI / (2.0 * l);
        let want = Field::from_fn(g, |x| l.powf(-0.5) * k3 * (k3 * (x + l)).cos());
        assert!(rel_err(&op.derivative(&mode(g, 3)).unwrap(), &want) < 1e-11);
    }

    #[test]
    fn stochastic_convolution_variance() {
        let g = make_grid(4.0, 63).unwrap();
        let k = 0.5;
        let op = HeatOperator::new(g, k).unwrap();
        let j = 2;
        let aj = 0.8;
        let mut coeffs = vec![0.0; 4];
        coeffs[j - 1] = aj;
        let model = NoiseModel::from_coefficients(g, coeffs).unwrap();
        let steps = 200;
        let dt = 1.0 / steps as f64;
        let t = 1.0;
        let phi = TimePath::new(dt, vec![Field::from_fn(g, |_| 1.0); steps + 1]).unwrap();
        let e = mode(g, j);
        let paths = 2000;
        let mut vals = Vec::with_capacity(paths);
        for p in 0..paths {
            let noise = NoisePath::sample(&model, dt, steps, &crate::noise::NoiseStream::new(99, p as u64));
            let out = op.stoch_conv(&phi, &noise, &model, t).unwrap();
            vals.push(out.dot(&e).unwrap());
        }
        let mean = vals.iter().sum::<f64>() / paths as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (paths - 1) as f64;
        let rate = op.eigenvalues()[j - 1] + k;
        let want = aj * aj * (1.0 - (-2.0 * rate * t).exp()) / (2.0 * rate);
        // standard error of a Gaussian sample variance
        let se = want * (2.0 / (paths - 1) as f64).sqrt();
        assert!((var - want).abs() < 3.0 * se, "var {var} want {want} se {se}");

        let zero = TimePath::new(dt, vec![Field::zeros(g); steps + 1]).unwrap();
        let noise = NoisePath::sample(&model, dt, steps, &crate::noise::NoiseStream::new(1, 0));
        assert_eq!(op.stoch_conv(&zero, &noise, &model, t).unwrap().max_abs(), 0.0);
        let short = NoisePath::sample(&model, dt, steps - 1, &crate::noise::NoiseStream::new(1, 0));
        assert!(matches!(op.stoch_conv(&phi, &short, &model, t), Err(Error::PartitionMismatch(_))));
    }
}
