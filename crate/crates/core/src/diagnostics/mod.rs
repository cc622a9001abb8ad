//! Ensemble runs, bound reports and deterministic oracles.
//!
//! Every report compares an ensemble mean against its bound with the rule
//! `mean ≤ bound + 3·stderr + slack`, where the slack absorbs the time and
//! space discretization bias.

mod cole_hopf;
mod feller;
mod reports;
mod weak_form;

use rayon::prelude::*;

pub use cole_hopf::cole_hopf_reference;
pub use feller::{
    feller_direction, feller_probe, feller_sequence, feller_suite, linear_feller_ratio, FellerPoint, FellerSuite,
    FELLER_VARIATION_TOL,
};
pub use reports::{
    dissipation_report, moment_report, smallest_tail_radius, tail_report, BoundReport, MarginRow, Outcome, RegimeCheck, TailReport,
    DEFAULT_SLACK,
};
pub use weak_form::weak_form_residual;

use crate::grid::Field;
use crate::heat::ConvolutionAccumulator;
use crate::integrator::{simulate_with, snapshot_times, DiagRow, Driver, RunOptions, SimConfig, Status, Trajectory};
use crate::noise::{domain, NoisePath, NoiseStream};
use crate::{Error, Result};

/// Neumaier-compensated sum of `values` in ascending order, so the result
/// does not depend on the order the values arrive in.
pub fn stable_sum(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &v in values.iter() {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Sample mean and standard error of the mean (zero for a single value).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut v = values.to_vec();
    let mean = stable_sum(&mut v) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let mut dev: Vec<f64> = values.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = stable_sum(&mut dev) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Per-time mean and standard error.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Series {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl Series {
    /// `samples[i][j]`: value at time `i` of trajectory `j`.
    fn from_samples(samples: &[Vec<f64>]) -> Self {
        let (mean, stderr) = samples.iter().map(|s| mean_stderr(s)).unzip();
        Self { mean, stderr }
    }
}

/// A set of independent trajectories from one initial datum.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub cfg: SimConfig,
    pub u0: Field,
    pub trajectories: Vec<Trajectory>,
    pub tail_radii: Vec<f64>,
    pub times: Vec<f64>,
}

/// Runs `members` trajectories in parallel; trajectory `i` draws from
/// stream `(seed, stream_domain, i)`.
pub fn run_ensemble(
    cfg: &SimConfig,
    u0: &Field,
    members: usize,
    stream_domain: u64,
    opts: &RunOptions,
) -> Result<Ensemble> {
    if members == 0 {
        return Err(Error::InvalidParameter("ensemble needs at least one member".into()));
    }
    let seed = cfg.params().seed;
    let trajectories = (0..members as u64)
        .into_par_iter()
        .map(|i| simulate_with(cfg, u0, Driver::Stream(NoiseStream::in_domain(seed, stream_domain, i)), opts))
        .collect::<Result<Vec<_>>>()?;
    let steps = match opts.horizon {
        Some(h) => (h / cfg.dt()).round() as usize,
        None => cfg.steps(),
    };
    Ok(Ensemble {
        cfg: cfg.clone(),
        u0: u0.clone(),
        trajectories,
        tail_radii: opts.tail_radii.clone(),
        times: snapshot_times(steps, cfg.params().snapshot_stride, cfg.dt()),
    })
}

/// Default tail radii `1, 2, …, L`.
pub fn default_tail_radii(cfg: &SimConfig) -> Vec<f64> {
    (1..=cfg.grid().half_width().floor() as usize).map(|r| r as f64).collect()
}

/// The configured ensemble: `M` members, ensemble stream domain, tail radii
/// `1..=L`.
pub fn run_default_ensemble(cfg: &SimConfig, opts: RunOptions) -> Result<Ensemble> {
    let opts = RunOptions { tail_radii: default_tail_radii(cfg), ..opts };
    run_ensemble(cfg, &cfg.initial_field(), cfg.params().ensemble, domain::ENSEMBLE, &opts)
}

impl Ensemble {
    pub fn members(&self) -> usize {
        self.trajectories.len()
    }

    pub fn guard_hits(&self) -> usize {
        self.trajectories.iter().filter(|t| matches!(t.status, Status::GuardTriggered(_))).count()
    }

    /// Rows aligned to `times`. A stopped trajectory repeats its last row
    /// after the stopping time, so each column is `u(t ∧ τ)`.
    pub fn aligned_rows(&self, traj: &Trajectory) -> Vec<DiagRow> {
        let mut out = Vec::with_capacity(self.times.len());
        let mut j = 0;
        for &t in &self.times {
            while j + 1 < traj.rows.len() && traj.rows[j].t < t {
                j += 1;
            }
            let row = if traj.rows[j].t == t { &traj.rows[j] } else { traj.rows.last().expect("rows never empty") };
            out.push(DiagRow { t, ..row.clone() });
        }
        out
    }

    fn column(&self, f: impl Fn(&DiagRow) -> f64) -> Vec<Vec<f64>> {
        let aligned: Vec<Vec<DiagRow>> = self.trajectories.iter().map(|t| self.aligned_rows(t)).collect();
        (0..self.times.len()).map(|i| aligned.iter().map(|rows| f(&rows[i])).collect()).collect()
    }
}

/// Cross-trajectory statistics at every sampled instant.
#[derive(Debug, Clone)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub members: usize,
    pub p: f64,
    pub u0_l2sq: f64,
    pub u0_lpp: f64,
    pub noise_strength: f64,
    pub k: f64,
    pub noise_active: bool,
    pub bound_regime: bool,
    pub invariant_regime: bool,
    pub l2sq: Series,
    pub lpp: Series,
    pub h1sq: Series,
    /// Tail masses at `L/4` and `L/2`.
    pub tail: [Series; 2],
    pub tail_radii: Vec<f64>,
    /// One series per radius in `tail_radii`.
    pub tail_curve: Vec<Series>,
    /// `∫₀ᵗ ‖u_x‖² ds`, trapezoid in time, per trajectory.
    pub dissipation: Series,
    /// `‖u(t)‖² + 2∫₀ᵗ e^{(2k − a l²)(s − t)} ‖u_x(s)‖² ds`, per trajectory.
    pub weighted_energy: Series,
}

impl EnsembleStats {
    pub fn from_ensemble(ens: &Ensemble) -> Self {
        let cfg = &ens.cfg;
        let rate = 2.0 * cfg.k() - cfg.noise_strength();
        let times = ens.times.clone();
        let mut diss = vec![Vec::with_capacity(ens.members()); times.len()];
        let mut weighted = vec![Vec::with_capacity(ens.members()); times.len()];
        for traj in &ens.trajectories {
            let rows = ens.aligned_rows(traj);
            let (mut plain, mut wsum) = (0.0, 0.0);
            for i in 0..rows.len() {
                if i > 0 {
                    let h = rows[i].t - rows[i - 1].t;
                    let decay = (-rate * h).exp();
                    plain += 0.5 * h * (rows[i - 1].h1sq + rows[i].h1sq);
                    wsum = decay * wsum + 0.5 * h * (decay * rows[i - 1].h1sq + rows[i].h1sq);
                }
                diss[i].push(plain);
                weighted[i].push(rows[i].l2sq + 2.0 * wsum);
            }
        }
        let radii = ens.tail_radii.clone();
        let tail_curve = (0..radii.len()).map(|r| Series::from_samples(&ens.column(|row| row.tail_curve[r]))).collect();
        let u0_l2sq = ens.u0.l2().powi(2);
        Self {
            members: ens.members(),
            p: cfg.params().p,
            u0_l2sq,
            u0_lpp: ens.u0.l2().powf(cfg.params().p),
            noise_strength: cfg.noise_strength(),
            k: cfg.k(),
            noise_active: cfg.noise_active(),
            bound_regime: cfg.bound_regime(),
            invariant_regime: cfg.invariant_regime(),
            l2sq: Series::from_samples(&ens.column(|r| r.l2sq)),
            lpp: Series::from_samples(&ens.column(|r| r.lpp)),
            h1sq: Series::from_samples(&ens.column(|r| r.h1sq)),
            tail: [
                Series::from_samples(&ens.column(|r| r.tail[0])),
                Series::from_samples(&ens.column(|r| r.tail[1])),
            ],
            tail_radii: radii,
            tail_curve,
            dissipation: Series::from_samples(&diss),
            weighted_energy: Series::from_samples(&weighted),
            times,
        }
    }
}

/// Monte Carlo estimate of `E sup_t ‖Σ S(t−s_m)[φ(s_m) ⊙ ΔW_m]‖² / ∫₀ᵀ ‖φ‖² ds`
/// for a path `φ` fixed in time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvolutionConstant {
    pub estimate: f64,
    pub stderr: f64,
}

pub fn stoch_conv_constant(cfg: &SimConfig, phi: &Field, members: usize) -> Result<ConvolutionConstant> {
    let denom = phi.l2().powi(2) * cfg.steps() as f64 * cfg.dt();
    if denom == 0.0 {
        return Err(Error::InvalidParameter("integrand must be nonzero".into()));
    }
    let seed = cfg.params().seed;
    let sups = (0..members as u64)
        .into_par_iter()
        .map(|i| {
            let path = NoisePath::sample(cfg.noise(), cfg.dt(), cfg.steps(), &NoiseStream::in_domain(seed, domain::PROBE, i));
            let mut acc = ConvolutionAccumulator::new(cfg.heat(), cfg.dt());
            let mut sup: f64 = 0.0;
            for m in 0..path.steps() {
                let dw = cfg.noise().assemble(path.draws(m))?;
                acc.push(&phi.mul(&dw)?, 1.0)?;
                acc.advance();
                let c = acc.coefficients();
                sup = sup.max(c.iter().map(|x| x * x).sum::<f64>());
            }
            Ok(sup)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (m, se) = mean_stderr(&sups);
    Ok(ConvolutionConstant { estimate: m / denom, stderr: se / denom })
}
