use rayon::prelude::*;

use super::mean_stderr;
use crate::grid::Field;
use crate::integrator::{simulate_with, Driver, RunOptions, SimConfig};
use crate::noise::{domain, NoiseStream};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FellerPoint {
    /// `‖u01 − u02‖₂`
    pub separation: f64,
    /// `E‖u(Δ, u01) − u(Δ, u02)‖² / ‖u01 − u02‖²`
    pub ratio: f64,
    pub stderr: f64,
}

fn coupled(u01: &Field, u02: &Field, cfg: &SimConfig, delta: f64, members: usize) -> Result<FellerPoint> {
    let d0 = u01.sub(u02)?;
    let sep_sq = d0.l2().powi(2);
    if sep_sq == 0.0 {
        return Err(Error::InvalidParameter("coupled initial data must differ".into()));
    }
    if members == 0 {
        return Err(Error::InvalidParameter("need at least one coupled pair".into()));
    }
    let opts = RunOptions { horizon: Some(delta), ..RunOptions::default() };
    let seed = cfg.params().seed;
    let ratios = (0..members as u64)
        .into_par_iter()
        .map(|i| {
            let s = NoiseStream::in_domain(seed, domain::FELLER, i);
            let a = simulate_with(cfg, u01, Driver::Stream(s), &opts)?;
            let b = simulate_with(cfg, u02, Driver::Stream(s), &opts)?;
            Ok(a.final_state.sub(&b.final_state)?.l2().powi(2) / sep_sq)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (ratio, stderr) = mean_stderr(&ratios);
    Ok(FellerPoint { separation: sep_sq.sqrt(), ratio, stderr })
}

/// Mean squared separation after time `Δ` of `members` pairs driven by the
/// same noise, relative to the initial separation. Trajectories that hit the
/// guard radius are frozen there.
pub fn feller_probe(u01: &Field, u02: &Field, cfg: &SimConfig, delta: f64, members: usize) -> Result<f64> {
    Ok(coupled(u01, u02, cfg, delta, members)?.ratio)
}

/// `feller_probe` along `u02 = u01 + s·direction` for each scale `s`.
pub fn feller_sequence(
    u01: &Field,
    direction: &Field,
    scales: &[f64],
    cfg: &SimConfig,
    delta: f64,
    members: usize,
) -> Result<Vec<FellerPoint>> {
    scales.iter().map(|&s| coupled(u01, &u01.add(&direction.scaled(s))?, cfg, delta, members)).collect()
}

/// The ratio for the linear damped heat flow: `Σ c_j² e^{−2(λ_j+k)Δ} / Σ c_j²`
/// where `c_j` are the sine coefficients of the initial separation.
pub fn linear_feller_ratio(cfg: &SimConfig, separation: &Field, delta: f64) -> Result<f64> {
    let c = cfg.heat().coefficients(separation)?;
    let (mut num, mut den) = (0.0, 0.0);
    for (j, cj) in c.iter().enumerate() {
        num += cj * cj * cfg.heat().multiplier(j + 1, delta).powi(2);
        den += cj * cj;
    }
    Ok(num / den)
}

/// Largest allowed `max R / min R − 1` along a shrinking sequence.
pub const FELLER_VARIATION_TOL: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct FellerSuite {
    pub delta: f64,
    pub points: Vec<FellerPoint>,
    pub variation: f64,
}

impl FellerSuite {
    pub fn passed(&self) -> bool {
        self.variation < FELLER_VARIATION_TOL
    }

    pub fn to_text(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# feller delta={} variation={:.4} {}",
            self.delta,
            self.variation,
            if self.passed() { "PASS" } else { "FAIL" }
        );
        for p in &self.points {
            let _ = writeln!(s, "separation={:.6e} ratio={:.6} stderr={:.3e}", p.separation, p.ratio, p.stderr);
        }
        s
    }
}

/// Unit bump off the origin used as the perturbation direction.
pub fn feller_direction(cfg: &SimConfig) -> Field {
    let f = Field::from_fn(*cfg.grid(), |x| (-(x - 0.5) * (x - 0.5) * 2.0).exp());
    f.scaled(1.0 / f.l2())
}

/// Perturbations `0.5·2^{−i}` along [`feller_direction`] for `i < count`.
pub fn feller_suite(cfg: &SimConfig, delta: f64, count: usize, members: usize) -> Result<FellerSuite> {
    let scales: Vec<f64> = (0..count).map(|i| 0.5 * 0.5f64.powi(i as i32)).collect();
    let points = feller_sequence(&cfg.initial_field(), &feller_direction(cfg), &scales, cfg, delta, members)?;
    let (lo, hi) = points.iter().fold((f64::INFINITY, 0.0f64), |(a, b), p| (a.min(p.ratio), b.max(p.ratio)));
    Ok(FellerSuite { delta, points, variation: hi / lo - 1.0 })
}
