//! Spectral Wiener noise `W(t) = Σ_j a_j β_j(t) e_j` on the sine basis, the
//! multiplicative coefficient `σ`, and reproducible random streams.
//!
//! # Random streams
//!
//! Every Gaussian draw is addressed by `(master_seed, domain, index, step,
//! mode)`. The first four are folded by a chain of SplitMix64 finalizers
//! into a 64-bit seed for a ChaCha8 generator; the `J` mode draws of that
//! step are then taken from it in mode order. A trajectory therefore sees
//! the same increments no matter which thread runs it or in which order
//! trajectories are scheduled.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::grid::{Field, Grid};
use crate::transform::{SineTransform, Workspace};
use crate::{Error, Result};

/// Stream domains keep independent experiments from sharing draws.
pub mod domain {
    pub const ENSEMBLE: u64 = 0;
    pub const PUSH_FORWARD: u64 = 1;
    pub const FELLER: u64 = 2;
    pub const PICARD: u64 = 3;
    pub const RESAMPLE: u64 = 4;
    pub const PROBE: u64 = 5;
}

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the generator that produces the draws of one time step.
pub fn mix_seed(master_seed: u64, domain: u64, index: u64, step: u64) -> u64 {
    let mut h = splitmix64(master_seed);
    h = splitmix64(h ^ domain);
    h = splitmix64(h ^ index);
    splitmix64(h ^ step)
}

/// Independent random stream of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseStream {
    pub master_seed: u64,
    pub domain: u64,
    pub index: u64,
}

impl NoiseStream {
    /// Ensemble-domain stream for trajectory `index`.
    pub fn new(master_seed: u64, index: u64) -> Self {
        Self { master_seed, domain: domain::ENSEMBLE, index }
    }

    pub fn in_domain(master_seed: u64, domain: u64, index: u64) -> Self {
        Self { master_seed, domain, index }
    }

    pub fn step_rng(&self, step: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(mix_seed(self.master_seed, self.domain, self.index, step))
    }

    /// General-purpose generator for this stream (resampling, probes).
    pub fn rng(&self) -> ChaCha8Rng {
        self.step_rng(u64::MAX)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Spectrum {
    /// `a_j = a0 · j^{-r}`, `j = 1..=modes`.
    PowerLaw { a0: f64, r: f64, modes: usize },
    Custom,
}

/// Retained noise modes and their amplitudes.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    grid: Grid,
    coeffs: Vec<f64>,
    spectrum: Spectrum,
    trace: f64,
    transform: Arc<SineTransform>,
}

impl PartialEq for NoiseModel {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.coeffs == other.coeffs && self.spectrum == other.spectrum
    }
}

impl NoiseModel {
    /// `a_j = a0 j^{-r}`; needs `r > ½` so the full series `Σ a_j²` converges.
    pub fn power_law(grid: Grid, a0: f64, r: f64, modes: usize) -> Result<Self> {
        if !(a0 >= 0.0) || !a0.is_finite() {
            return Err(Error::InvalidParameter(format!("a0 must be finite and >= 0, got {a0}")));
        }
        if !(r > 0.5) {
            return Err(Error::InvalidParameter(format!("decay exponent r must exceed 1/2, got {r}")));
        }
        let coeffs = (1..=modes).map(|j| a0 * (j as f64).powf(-r)).collect();
        let mut m = Self::from_coefficients(grid, coeffs)?;
        m.spectrum = Spectrum::PowerLaw { a0, r, modes };
        Ok(m)
    }

    pub fn from_coefficients(grid: Grid, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.len() > grid.len() {
            return Err(Error::InvalidParameter(format!(
                "mode count must be in 1..={}, got {}",
                grid.len(),
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidParameter("non-finite noise coefficient".into()));
        }
        let trace = coeffs.iter().map(|a| a * a).sum();
        Ok(Self { grid, coeffs, spectrum: Spectrum::Custom, trace, transform: Arc::new(SineTransform::new(grid.len())) })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn modes(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    /// `a = Σ_j a_j²`.
    pub fn trace(&self) -> f64 {
        self.trace
    }

    /// `ΔW = Σ_j a_j ΔB_j e_j` for given mode draws `ΔB_j`.
    pub fn assemble(&self, draws: &[f64]) -> Result<Field> {
        if draws.len() != self.coeffs.len() {
            return Err(Error::InvalidParameter(format!(
                "{} draws for {} modes",
                draws.len(),
                self.coeffs.len()
            )));
        }
        let mut ws = self.transform.workspace();
        let mut out = vec![0.0; self.grid.len()];
        self.assemble_into(draws, &mut out, &mut ws);
        Ok(Field::from_vec_unchecked(self.grid, out))
    }

    pub(crate) fn assemble_into(&self, draws: &[f64], out: &mut [f64], ws: &mut Workspace) {
        let j = self.coeffs.len();
        let s = 1.0 / self.grid.half_width().sqrt();
        for (o, (a, b)) in out.iter_mut().zip(self.coeffs.iter().zip(draws)) {
            *o = s * a * b;
        }
        out[j..].iter_mut().for_each(|o| *o = 0.0);
        self.transform.dst_in_place(out, ws);
    }

    pub(crate) fn transform_workspace(&self) -> Workspace {
        self.transform.workspace()
    }

    /// Draws `ΔB_j ~ N(0, dt)` for every mode, in mode order.
    pub fn draw_modes(&self, dt: f64, rng: &mut impl Rng, out: &mut [f64]) {
        let s = dt.sqrt();
        for o in out.iter_mut().take(self.coeffs.len()) {
            let z: f64 = rng.sample(StandardNormal);
            *o = s * z;
        }
    }
}

/// `e_j(x) = L^{-1/2} sin(jπ(x + L) / 2L)` on the grid.
pub fn basis_eval(j: usize, grid: Grid) -> Result<Field> {
    if j == 0 || j > grid.len() {
        return Err(Error::InvalidParameter(format!("mode index {j} outside 1..={}", grid.len())));
    }
    let big_n = (grid.len() + 1) as f64;
    let s = grid.half_width().powf(-0.5);
    let values = (1..=grid.len()).map(|i| s * (PI * (i * j) as f64 / big_n).sin()).collect();
    Ok(Field::from_vec_unchecked(grid, values))
}

#[derive(Debug, Clone)]
pub struct NoiseIncrement {
    pub dw: Field,
    pub dt: f64,
    pub mode_draws: Vec<f64>,
}

pub fn sample_increment(model: &NoiseModel, dt: f64, rng: &mut impl Rng) -> Result<NoiseIncrement> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("increment step must be positive, got {dt}")));
    }
    let mut draws = vec![0.0; model.modes()];
    model.draw_modes(dt, rng, &mut draws);
    let dw = model.assemble(&draws)?;
    Ok(NoiseIncrement { dw, dt, mode_draws: draws })
}

/// Per-mode Brownian increments on a uniform partition.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    dt: f64,
    draws: Vec<Vec<f64>>,
}

impl NoisePath {
    pub fn sample(model: &NoiseModel, dt: f64, steps: usize, stream: &NoiseStream) -> Self {
        let draws = (0..steps)
            .map(|m| {
                let mut d = vec![0.0; model.modes()];
                model.draw_modes(dt, &mut stream.step_rng(m as u64), &mut d);
                d
            })
            .collect();
        Self { dt, draws }
    }

    pub fn zero(model: &NoiseModel, dt: f64, steps: usize) -> Self {
        Self { dt, draws: vec![vec![0.0; model.modes()]; steps] }
    }

    pub fn from_draws(dt: f64, draws: Vec<Vec<f64>>) -> Self {
        Self { dt, draws }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.draws.len()
    }

    pub fn draws(&self, step: usize) -> &[f64] {
        &self.draws[step]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaKind {
    /// `σ(u) = l·u`
    Linear,
    /// `σ(u) = l·sin(u)`
    Saturating,
}

impl SigmaKind {
    pub fn name(&self) -> &'static str {
        match self {
            SigmaKind::Linear => "linear",
            SigmaKind::Saturating => "saturating",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "linear" => Some(SigmaKind::Linear),
            "saturating" => Some(SigmaKind::Saturating),
            _ => None,
        }
    }
}

/// Noise coefficient with growth bound `|σ(u)| ≤ l|u|` and Lipschitz
/// constant `l`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaSpec {
    pub kind: SigmaKind,
    pub l: f64,
}

impl SigmaSpec {
    pub fn new(kind: SigmaKind, l: f64) -> Result<Self> {
        if !(l >= 0.0) || !l.is_finite() {
            return Err(Error::InvalidParameter(format!("growth constant l must be finite and >= 0, got {l}")));
        }
        Ok(Self { kind, l })
    }

    pub fn linear(l: f64) -> Result<Self> {
        Self::new(SigmaKind::Linear, l)
    }

    pub fn lipschitz(&self) -> f64 {
        self.l
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match self.kind {
            SigmaKind::Linear => self.l * u,
            SigmaKind::Saturating => self.l * u.sin(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.l == 0.0
    }
}

pub fn sigma_eval(spec: &SigmaSpec, f: &Field) -> Field {
    Field::from_vec_unchecked(*f.grid(), f.values().iter().map(|&u| spec.eval(u)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{lp_norm, make_grid};

    #[test]
    fn first_mode_at_center() {
        let g = make_grid(1.0, 3).unwrap();
        let e1 = basis_eval(1, g).unwrap();
        assert!((e1.values()[1] - 1.0).abs() < 1e-15);
        assert!(basis_eval(0, g).is_err());
        assert!(basis_eval(4, g).is_err());
    }

    #[test]
    fn discrete_orthonormality_and_sup_bound() {
        let g = make_grid(3.0, 63).unwrap();
        let modes: Vec<Field> = (1..=63).map(|j| basis_eval(j, g).unwrap()).collect();
        for (a, ea) in modes.iter().enumerate() {
            assert!(ea.max_abs() <= 1.0);
            for (b, eb) in modes.iter().enumerate() {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((ea.dot(eb).unwrap() - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn assemble_matches_direct_sum() {
        let g = make_grid(32.0, 2047).unwrap();
        let model = NoiseModel::power_law(g, 0.5, 1.0, 64).unwrap();
        let draws: Vec<f64> = (0..64).map(|j| (j as f64 * 0.77).cos()).collect();
        let fast = model.assemble(&draws).unwrap();
        let mut slow = Field::zeros(g);
        for (j, (a, b)) in model.coefficients().iter().zip(&draws).enumerate() {
            slow = slow.add(&basis_eval(j + 1, g).unwrap().scaled(a * b)).unwrap();
        }
        assert!(lp_norm(&fast.sub(&slow).unwrap(), 2.0).unwrap() < 1e-12);
    }

    #[test]
    fn zero_amplitudes_give_zero_increment() {
        let g = make_grid(4.0, 63).unwrap();
        let model = NoiseModel::power_law(g, 0.0, 1.0, 8).unwrap();
        let inc = sample_increment(&model, 0.01, &mut NoiseStream::new(1, 0).step_rng(0)).unwrap();
        assert_eq!(inc.dw.max_abs(), 0.0);
        assert!(sample_increment(&model, 0.0, &mut NoiseStream::new(1, 0).step_rng(0)).is_err());
    }

    #[test]
    fn trace_identity_and_validation() {
        let g = make_grid(32.0, 2047).unwrap();
        let model = NoiseModel::power_law(g, 0.5, 1.0, 64).unwrap();
        let recomputed: f64 = (1..=64).map(|j| 0.25 / (j * j) as f64).sum();
        assert!((model.trace() - recomputed).abs() < 1e-15);
        assert!((model.trace() - 0.40736).abs() < 1e-5);
        assert!(NoiseModel::power_law(g, 0.5, 0.5, 64).is_err());
        assert!(NoiseModel::power_law(g, 0.5, 1.0, 4096).is_err());
    }

    #[test]
    fn increments_reproducible() {
        let g = make_grid(32.0, 2047).unwrap();
        let model = NoiseModel::power_law(g, 0.5, 1.0, 64).unwrap();
        let s = NoiseStream::new(1234, 17);
        let a = sample_increment(&model, 1e-2, &mut s.step_rng(5)).unwrap();
        let b = sample_increment(&model, 1e-2, &mut s.step_rng(5)).unwrap();
        assert_eq!(a.mode_draws, b.mode_draws);
        assert_eq!(a.dw, b.dw);
        let c = sample_increment(&model, 1e-2, &mut NoiseStream::new(1234, 18).step_rng(5)).unwrap();
        assert_ne!(a.mode_draws, c.mode_draws);
    }

    #[test]
    fn increment_energy_and_decorrelation() {
        let g = make_grid(32.0, 2047).unwrap();
        let model = NoiseModel::power_law(g, 0.5, 1.0, 64).unwrap();
        let dt = 1e-2;
        let samples = 10_000;
        let stream = NoiseStream::in_domain(77, domain::PROBE, 0);
        let mut energies = Vec::with_capacity(samples);
        let (mut s12, mut s1, mut s2, mut q1, mut q2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for step in 0..samples {
            let inc = sample_increment(&model, dt, &mut stream.step_rng(step as u64)).unwrap();
            energies.push(lp_norm(&inc.dw, 2.0).unwrap().powi(2));
            let (x, y) = (inc.mode_draws[0], inc.mode_draws[1]);
            s12 += x * y;
            s1 += x;
            s2 += y;
            q1 += x * x;
            q2 += y * y;
        }
        let nf = samples as f64;
        let mean = energies.iter().sum::<f64>() / nf;
        let sd = (energies.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt();
        let want = model.trace() * dt;
        assert!((mean - want).abs() < 3.0 * sd / nf.sqrt(), "{mean} vs {want}");

        let cov = s12 / nf - (s1 / nf) * (s2 / nf);
        let se = ((q1 / nf) * (q2 / nf) / nf).sqrt();
        assert!(cov.abs() < 3.0 * se, "cov {cov} se {se}");
    }

    #[test]
    fn sigma_definitions() {
        let g = make_grid(1.0, 3).unwrap();
        let lin = SigmaSpec::linear(0.3).unwrap();
        let out = sigma_eval(&lin, &Field::from_fn(g, |_| 2.0));
        assert!(out.values().iter().all(|v| (v - 0.6).abs() < 1e-15));
        for kind in [SigmaKind::Linear, SigmaKind::Saturating] {
            assert_eq!(SigmaSpec::new(kind, 0.7).unwrap().eval(0.0), 0.0);
        }
        assert!(SigmaSpec::linear(-1.0).is_err());
    }

    #[test]
    fn sigma_growth_and_lipschitz_probe() {
        let mut rng = NoiseStream::in_domain(5, domain::PROBE, 1).rng();
        for kind in [SigmaKind::Linear, SigmaKind::Saturating] {
            let spec = SigmaSpec::new(kind, 0.3).unwrap();
            let mut worst: f64 = 0.0;
            for _ in 0..100_000 {
                let u: f64 = rng.random_range(-20.0..20.0);
                let v: f64 = rng.random_range(-20.0..20.0);
                assert!(spec.eval(u).abs() <= spec.l * u.abs() * (1.0 + 1e-12));
                if u != v {
                    worst = worst.max((spec.eval(u) - spec.eval(v)).abs() / (u - v).abs());
                }
            }
            assert!(worst <= spec.lipschitz() * (1.0 + 1e-12), "{kind:?}: {worst}");
        }
    }
}
