//! Truncated fixed-point map of the mild formulation and Picard iteration.
//!
//! For a path `u` on a uniform partition of `[0, T]` the map is
//!
//! ```text
//! 𝒜u(t) = S(t)u₀ − k J₁(π_N u)(t) + ½ J₂((π_N u)²)(t) + ∫₀ᵗ S(t−s) σ(π_N u) dW
//! ```
//!
//! with the undamped semigroup `S`, the radial truncation `π_N` onto the
//! `L^p` ball of radius `N`, and left-endpoint time quadrature throughout.
//! Iterates are compared in `(∫₀ᵀ e^{−λt} ‖u(t)‖_p^p dt)^{1/p}`.

use crate::grid::{lp_norm, Field};
use crate::heat::{ConvolutionAccumulator, HeatOperator};
use rayon::prelude::*;

use crate::integrator::{simulate_with, Driver, RunOptions, SimConfig};
use crate::noise::{domain, sigma_eval, NoisePath, NoiseStream};
use crate::{Error, Result};

pub const DEFAULT_LOCAL_HORIZON: f64 = 0.25;

/// A path `u(s_m)`, `s_m = m·dt`, together with the noise increments of the
/// same partition.
#[derive(Debug, Clone)]
pub struct PathFunction {
    pub dt: f64,
    pub fields: Vec<Field>,
    pub noise: NoisePath,
}

impl PathFunction {
    pub fn new(dt: f64, fields: Vec<Field>, noise: NoisePath) -> Result<Self> {
        if fields.len() < 2 {
            return Err(Error::InvalidParameter("path needs at least two nodes".into()));
        }
        if noise.steps() != fields.len() - 1 || (noise.dt() - dt).abs() > 1e-12 * dt {
            return Err(Error::PartitionMismatch(format!(
                "path has {} steps of {dt}, noise has {} of {}",
                fields.len() - 1,
                noise.steps(),
                noise.dt()
            )));
        }
        let g = *fields[0].grid();
        if fields.iter().any(|f| *f.grid() != g) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { dt, fields, noise })
    }

    pub fn horizon(&self) -> f64 {
        self.dt * (self.fields.len() - 1) as f64
    }

    pub fn steps(&self) -> usize {
        self.fields.len() - 1
    }

    /// Pointwise difference; the noise of `self` is kept.
    pub fn sub(&self, other: &PathFunction) -> Result<PathFunction> {
        self.check_partition(other)?;
        let fields = self.fields.iter().zip(&other.fields).map(|(a, b)| a.sub(b)).collect::<Result<_>>()?;
        Ok(PathFunction { dt: self.dt, fields, noise: self.noise.clone() })
    }

    pub fn scaled(&self, c: f64) -> PathFunction {
        PathFunction { dt: self.dt, fields: self.fields.iter().map(|f| f.scaled(c)).collect(), noise: self.noise.clone() }
    }

    fn check_partition(&self, other: &PathFunction) -> Result<()> {
        if self.fields.len() != other.fields.len() || (self.dt - other.dt).abs() > 1e-12 * self.dt {
            return Err(Error::PartitionMismatch("paths live on different partitions".into()));
        }
        Ok(())
    }
}

/// Radial projection onto the `L^p` ball of radius `N`.
pub fn pi_n(f: &Field, radius: f64, p: f64) -> Result<Field> {
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter(format!("truncation radius must be positive, got {radius}")));
    }
    let norm = lp_norm(f, p)?;
    // Rescaled fields can land a few ulps above the radius; treat those as
    // inside so the projection is idempotent.
    if norm <= radius * (1.0 + 8.0 * f64::EPSILON) {
        Ok(f.clone())
    } else {
        Ok(f.scaled(radius / norm))
    }
}

/// `(Σ_m w_m ‖u(s_m)‖_p^p)^{1/p}` with `w_m` the exact integral of
/// `e^{−λs}` over the node-centered cell of `s_m`, clipped to `[0, T]`.
pub fn weighted_norm(u: &PathFunction, lambda: f64, p: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("weight rate must be positive, got {lambda}")));
    }
    let horizon = u.horizon();
    let mut s = 0.0;
    for (m, f) in u.fields.iter().enumerate() {
        let mid = m as f64 * u.dt;
        let a = (mid - 0.5 * u.dt).max(0.0);
        let b = (mid + 0.5 * u.dt).min(horizon);
        let w = ((-lambda * a).exp() - (-lambda * b).exp()) / lambda;
        s += w * lp_norm(f, p)?.powf(p);
    }
    Ok(s.powf(1.0 / p))
}

/// Undamped heat flow of `u₀` on the partition of `noise`.
pub fn heat_path(u0: &Field, cfg: &SimConfig, noise: &NoisePath) -> Result<PathFunction> {
    let op = cfg.heat().with_damping(0.0)?;
    let mut acc = ConvolutionAccumulator::new(&op, noise.dt());
    acc.push(u0, 1.0)?;
    let mut fields = vec![u0.clone()];
    for _ in 0..noise.steps() {
        acc.advance();
        fields.push(acc.value()?);
    }
    PathFunction::new(noise.dt(), fields, noise.clone())
}

/// `𝒜u` on the partition of `u`; `u(0)` is taken as the initial datum.
///
/// With `convection` off in the config the `J₂` term is omitted.
pub fn apply_a(u: &PathFunction, cfg: &SimConfig, radius: f64) -> Result<PathFunction> {
    let op: HeatOperator = cfg.heat().with_damping(0.0)?;
    if *u.fields[0].grid() != *op.grid() {
        return Err(Error::GridMismatch);
    }
    let p = cfg.params().p;
    let k = cfg.k();
    let dt = u.dt;
    let sigma = cfg.sigma();
    let noise_on = cfg.noise_active();
    let conv_on = cfg.params().convection;
    let mut lin = ConvolutionAccumulator::new(&op, dt);
    let mut quad = ConvolutionAccumulator::new(&op, dt);
    let u0 = &u.fields[0];
    lin.push(u0, 1.0)?;
    let mut out = Vec::with_capacity(u.fields.len());
    out.push(u0.clone());
    for m in 0..u.steps() {
        let v = pi_n(&u.fields[m], radius, p)?;
        if k != 0.0 {
            lin.push(&v, -k * dt)?;
        }
        if conv_on {
            // ½ J₂ w = -½ ∂x ∫ S(t-s) w ds
            quad.push(&v.mul(&v)?, -0.5 * dt)?;
        }
        if noise_on {
            let dw = cfg.noise().assemble(u.noise.draws(m))?;
            let sv = sigma_eval(sigma, &v);
            lin.push(&sv.mul(&dw)?, 1.0)?;
        }
        lin.advance();
        quad.advance();
        let mut f = lin.value()?;
        if conv_on {
            f = f.add(&quad.derivative()?)?;
        }
        out.push(f);
    }
    PathFunction::new(dt, out, u.noise.clone())
}

#[derive(Debug, Clone)]
pub struct PicardRun {
    pub solution: PathFunction,
    /// `‖u^{(m+1)} − u^{(m)}‖_λ` for each iteration.
    pub residuals: Vec<f64>,
}

impl PicardRun {
    /// Successive residual ratios.
    pub fn ratios(&self) -> Vec<f64> {
        self.residuals.windows(2).map(|w| w[1] / w[0]).collect()
    }
}

/// Picard iteration `u^{(m+1)} = 𝒜u^{(m)}` from the heat flow of `u₀`.
///
/// Fails with `Divergence` once the residual has grown in three
/// consecutive iterations (growth at the rounding floor is ignored).
pub fn picard_solve(
    u0: &Field,
    cfg: &SimConfig,
    noise: &NoisePath,
    radius: f64,
    lambda: f64,
    iters: usize,
) -> Result<PicardRun> {
    if iters == 0 {
        return Err(Error::InvalidParameter("Picard needs at least one iteration".into()));
    }
    let p = cfg.params().p;
    let mut u = heat_path(u0, cfg, noise)?;
    let scale = weighted_norm(&u, lambda, p)?;
    let floor = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let mut residuals = Vec::with_capacity(iters);
    let mut growth = 0;
    for it in 0..iters {
        let next = apply_a(&u, cfg, radius)?;
        let r = weighted_norm(&next.sub(&u)?, lambda, p)?;
        if !r.is_finite() {
            return Err(Error::Divergence { iterations: it + 1, residual: r });
        }
        match residuals.last() {
            Some(&prev) if r > prev && r > floor => growth += 1,
            _ => growth = 0,
        }
        residuals.push(r);
        u = next;
        if growth >= 3 {
            return Err(Error::Divergence { iterations: it + 1, residual: r });
        }
    }
    Ok(PicardRun { solution: u, residuals })
}

/// `‖𝒜u − 𝒜v‖_λ / ‖u − v‖_λ` on a shared partition and noise path.
pub fn contraction_factor(u: &PathFunction, v: &PathFunction, cfg: &SimConfig, radius: f64, lambda: f64) -> Result<f64> {
    if u.noise != v.noise {
        return Err(Error::PartitionMismatch("paths carry different noise".into()));
    }
    let p = cfg.params().p;
    let den = weighted_norm(&u.sub(v)?, lambda, p)?;
    if den == 0.0 {
        return Err(Error::InvalidParameter("contraction factor of identical paths is 0/0".into()));
    }
    let num = weighted_norm(&apply_a(u, cfg, radius)?.sub(&apply_a(v, cfg, radius)?)?, lambda, p)?;
    Ok(num / den)
}

/// Random smooth path with the given initial datum: a few low sine modes
/// with amplitudes varying linearly in time.
pub fn random_path(u0: &Field, cfg: &SimConfig, noise: &NoisePath, scale: f64, stream: &NoiseStream) -> Result<PathFunction> {
    use rand::Rng;
    let mut rng = stream.rng();
    let modes = 6.min(u0.grid().len());
    let start: Vec<f64> = (0..modes).map(|_| rng.random_range(-scale..scale)).collect();
    let slope: Vec<f64> = (0..modes).map(|_| rng.random_range(-scale..scale)).collect();
    let horizon = noise.dt() * noise.steps() as f64;
    let mut fields = vec![u0.clone()];
    for m in 1..=noise.steps() {
        let s = m as f64 * noise.dt() / horizon;
        let c: Vec<f64> = start.iter().zip(&slope).map(|(a, b)| a + b * s).collect();
        fields.push(u0.add(&cfg.heat().synthesize(&c)?)?);
    }
    PathFunction::new(noise.dt(), fields, noise.clone())
}

/// Share of random path pairs whose contraction factor must be below 1.
pub const PICARD_PASS_FRACTION: f64 = 0.95;

/// Relative `L²` gap allowed between the noise-free Picard limit and the
/// integrator at the end of the local horizon.
pub const PICARD_MATCH_TOL: f64 = 1e-3;

/// Picard residuals, contraction factors on random path pairs, and the
/// noise-free comparison with the integrator, all on `[0, T_loc]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PicardSuite {
    pub radius: f64,
    pub lambda: f64,
    pub residuals: Vec<f64>,
    /// Residual ratios after the first are all below 1 (rounding floor excepted).
    pub geometric: bool,
    pub factors: Vec<f64>,
    pub fraction_below_one: f64,
    pub deterministic_gap: f64,
}

impl PicardSuite {
    pub fn passed(&self) -> bool {
        self.geometric && self.fraction_below_one >= PICARD_PASS_FRACTION && self.deterministic_gap < PICARD_MATCH_TOL
    }

    pub fn to_text(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# picard N={} lambda={} geometric={} below_one={:.3} deterministic_gap={:.3e} {}",
            self.radius,
            self.lambda,
            self.geometric,
            self.fraction_below_one,
            self.deterministic_gap,
            if self.passed() { "PASS" } else { "FAIL" }
        );
        for (m, r) in self.residuals.iter().enumerate() {
            let _ = writeln!(s, "residual {m} {r:.6e}");
        }
        for (i, f) in self.factors.iter().enumerate() {
            let _ = writeln!(s, "factor {i} {f:.6}");
        }
        s
    }
}

pub fn picard_suite(cfg: &SimConfig, radius: f64, lambda: f64, iters: usize, pairs: usize) -> Result<PicardSuite> {
    let local = cfg.modified(|p| p.horizon = DEFAULT_LOCAL_HORIZON)?;
    let seed = cfg.params().seed;
    let u0 = local.initial_field();
    let path = |i: u64| NoisePath::sample(local.noise(), local.dt(), local.steps(), &NoiseStream::in_domain(seed, domain::PICARD, i));
    let run = picard_solve(&u0, &local, &path(0), radius, lambda, iters)?;
    let floor = 1e-13 * run.residuals[0];
    let geometric = run.ratios().iter().enumerate().skip(1).all(|(m, r)| run.residuals[m + 1] <= floor || *r < 1.0);

    let silent = NoisePath::zero(local.noise(), local.dt(), local.steps());
    let det = picard_solve(&u0, &local, &silent, radius, lambda, iters)?;
    let tr = simulate_with(&local, &u0, Driver::Path(&silent), &RunOptions::default())?;
    let end = det.solution.fields.last().expect("path has nodes");
    let deterministic_gap = end.sub(&tr.final_state)?.l2() / tr.final_state.l2();

    let factors = (0..pairs as u64)
        .into_par_iter()
        .map(|i| {
            let noise = path(i + 1);
            let u = random_path(&u0, &local, &noise, 1.0, &NoiseStream::in_domain(seed, domain::PROBE, 2 * i))?;
            let v = random_path(&u0, &local, &noise, 1.0, &NoiseStream::in_domain(seed, domain::PROBE, 2 * i + 1))?;
            contraction_factor(&u, &v, &local, radius, lambda)
        })
        .collect::<Result<Vec<_>>>()?;
    let fraction_below_one = factors.iter().filter(|f| **f < 1.0).count() as f64 / pairs.max(1) as f64;
    Ok(PicardSuite { radius, lambda, residuals: run.residuals, geometric, factors, fraction_below_one, deterministic_gap })
}
