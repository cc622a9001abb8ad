//! Time-averaged empirical measures, their comparison, and invariance and
//! tightness diagnostics.
//!
//! Laws on `L²` are compared through a fixed 12-component projection
//! ([`ObservableVector`]) with the energy distance
//! `D(A, B) = 2·E‖X−Y‖ − E‖X−X′‖ − E‖Y−Y′‖`, evaluated exactly over all
//! sample pairs (V-statistic). Components are divided by their pooled
//! standard deviation first. `√D` is a metric for fixed scales; the pooled
//! scaling makes it depend on the pair, see [`measure_distance_scaled`].

use std::cmp::Ordering;
use std::fmt::Write as _;

use rand::seq::index;
use rayon::prelude::*;

use crate::diagnostics::{mean_stderr, smallest_tail_radius, stable_sum, Ensemble, EnsembleStats, Outcome, RegimeCheck};
use crate::grid::{cutoff_theta, h1_seminorm_sq_raw, sum_sq, tail_curve_raw, Field};
use crate::integrator::{
    simulate_with, DiagRow, Driver, Retention, RunOptions, SimConfig, Status, Trajectory, TRACKED_MODES,
};
use crate::noise::{domain, NoiseStream};
use crate::{Error, Result};

pub const OBSERVABLE_DIM: usize = 4 + TRACKED_MODES;

/// Spacing of the sampling instants of a time average.
pub const KB_SPACING: f64 = 0.5;

/// Subsample replicates behind the invariance baseline.
pub const BASELINE_REPLICATES: u64 = 16;

/// `‖u‖₂², ‖u_x‖₂²`, tail masses at `L/4` and `L/2`, then the first eight
/// sine coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservableVector(pub [f64; OBSERVABLE_DIM]);

impl ObservableVector {
    pub const NAMES: [&'static str; OBSERVABLE_DIM] =
        ["l2sq", "h1sq", "tail_q", "tail_h", "c1", "c2", "c3", "c4", "c5", "c6", "c7", "c8"];

    pub fn from_row(row: &DiagRow) -> Self {
        let mut v = [0.0; OBSERVABLE_DIM];
        v[0] = row.l2sq;
        v[1] = row.h1sq;
        v[2..4].copy_from_slice(&row.tail);
        v[4..].copy_from_slice(&row.coeffs);
        Self(v)
    }

    pub fn zero() -> Self {
        Self([0.0; OBSERVABLE_DIM])
    }

    fn cmp_total(&self, other: &Self) -> Ordering {
        self.0.iter().zip(&other.0).map(|(a, b)| a.total_cmp(b)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
    }
}

pub fn observe(f: &Field) -> ObservableVector {
    let g = f.grid();
    let dx = g.dx();
    let u = f.values();
    let mut v = [0.0; OBSERVABLE_DIM];
    v[0] = sum_sq(u) * dx;
    v[1] = h1_seminorm_sq_raw(u, dx);
    let l = g.half_width();
    tail_curve_raw(u, g, &[l / 4.0, l / 2.0], &mut v[2..4]);
    let big_n = (g.len() + 1) as f64;
    let s = dx / l.sqrt();
    for j in 1..=TRACKED_MODES.min(g.len()) {
        v[3 + j] = s * u
            .iter()
            .enumerate()
            .map(|(i, x)| x * (std::f64::consts::PI * ((i + 1) * j) as f64 / big_n).sin())
            .sum::<f64>();
    }
    ObservableVector(v)
}

/// Equally weighted observable samples, optionally paired with the full
/// states they came from. Samples are kept in a canonical order.
#[derive(Debug, Clone)]
pub struct EmpiricalMeasure {
    samples: Vec<ObservableVector>,
    states: Option<Vec<Field>>,
    pub window: (f64, f64),
    pub source: String,
}

impl EmpiricalMeasure {
    pub fn new(samples: Vec<ObservableVector>, window: (f64, f64), source: impl Into<String>) -> Result<Self> {
        Self::build(samples, None, window, source.into())
    }

    pub fn with_states(
        samples: Vec<ObservableVector>,
        states: Vec<Field>,
        window: (f64, f64),
        source: impl Into<String>,
    ) -> Result<Self> {
        if states.len() != samples.len() {
            return Err(Error::InvalidParameter("one state per sample required".into()));
        }
        Self::build(samples, Some(states), window, source.into())
    }

    fn build(
        samples: Vec<ObservableVector>,
        states: Option<Vec<Field>>,
        window: (f64, f64),
        source: String,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Insufficient("empirical measure needs at least one sample".into()));
        }
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.sort_by(|&a, &b| samples[a].cmp_total(&samples[b]));
        let sorted = order.iter().map(|&i| samples[i]).collect();
        let states = states.map(|s| order.iter().map(|&i| s[i].clone()).collect());
        Ok(Self { samples: sorted, states, window, source })
    }

    pub fn point_mass(v: ObservableVector) -> Self {
        Self { samples: vec![v], states: None, window: (0.0, 0.0), source: "point".into() }
    }

    pub fn samples(&self) -> &[ObservableVector] {
        &self.samples
    }

    pub fn states(&self) -> Option<&[Field]> {
        self.states.as_deref()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.samples.len() as f64
    }

    /// Component means.
    pub fn mean(&self) -> [f64; OBSERVABLE_DIM] {
        let mut out = [0.0; OBSERVABLE_DIM];
        for (c, o) in out.iter_mut().enumerate() {
            let mut col: Vec<f64> = self.samples.iter().map(|s| s.0[c]).collect();
            *o = stable_sum(&mut col) / self.samples.len() as f64;
        }
        out
    }

    fn subset(&self, idx: &[usize], source: &str) -> Result<Self> {
        let samples = idx.iter().map(|&i| self.samples[i]).collect();
        let states = self.states.as_ref().map(|s| idx.iter().map(|&i| s[i].clone()).collect());
        Self::build(samples, states, self.window, source.into())
    }

    pub fn to_csv(&self) -> String {
        let mut s = ObservableVector::NAMES.join(",");
        s.push('\n');
        for v in &self.samples {
            let row: Vec<String> = v.0.iter().map(|x| format!("{x:e}")).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

fn row_at(traj: &Trajectory, t: f64) -> Option<&DiagRow> {
    let i = traj.rows.partition_point(|r| r.t < t - 1e-9);
    match traj.rows.get(i) {
        Some(r) if (r.t - t).abs() <= 1e-9 => Some(r),
        _ => match traj.status {
            Status::GuardTriggered(tau) if tau <= t => traj.rows.last(),
            _ => None,
        },
    }
}

fn state_at(traj: &Trajectory, t: f64) -> Option<&Field> {
    if let Status::GuardTriggered(tau) = traj.status {
        if tau <= t {
            return Some(&traj.final_state);
        }
    }
    let i = traj.states.partition_point(|(s, _)| *s < t - 1e-9);
    traj.states.get(i).filter(|(s, _)| (s - t).abs() <= 1e-9).map(|(_, f)| f)
}

/// Sampling instants `1, 1.5, …` of the window `[1, s + 1)`.
pub fn kb_times(s: usize) -> Vec<f64> {
    kb_times_from(1.0, s)
}

fn kb_times_from(start: f64, s: usize) -> Vec<f64> {
    (0..2 * s).map(|i| start + i as f64 * KB_SPACING).collect()
}

/// `μ_s = (1/s)∫₁^{s+1} p(t, u₀, ·) dt` from the pooled trajectories,
/// sampled every [`KB_SPACING`]. A trajectory stopped by the guard
/// contributes its stopped state. States ride along when every sampled
/// instant was retained.
pub fn kb_average(trajs: &[Trajectory], s: usize) -> Result<EmpiricalMeasure> {
    kb_average_from(trajs, 1.0, s)
}

/// Average over `[start, start + s)`. By the Markov property, pushing
/// `kb_average(trajs, s)` forward by `Δ` has the law of
/// `kb_average_from(trajs, 1 + Δ, s)`.
pub fn kb_average_from(trajs: &[Trajectory], start: f64, s: usize) -> Result<EmpiricalMeasure> {
    if s == 0 || !(start >= 0.0) {
        return Err(Error::InvalidParameter("time average needs s >= 1 and start >= 0".into()));
    }
    let times = kb_times_from(start, s);
    let mut samples = Vec::with_capacity(trajs.len() * times.len());
    let mut states = Some(Vec::with_capacity(samples.capacity()));
    for traj in trajs {
        for &t in &times {
            let row = row_at(traj, t).ok_or_else(|| {
                Error::Insufficient(format!("no snapshot at t = {t}; window needs T >= {}", start + s as f64))
            })?;
            samples.push(ObservableVector::from_row(row));
            match (state_at(traj, t), states.as_mut()) {
                (Some(f), Some(v)) => v.push(f.clone()),
                _ => states = None,
            }
        }
    }
    let window = (start, start + s as f64);
    let source = format!("{} trajectories", trajs.len());
    match states {
        Some(st) => EmpiricalMeasure::with_states(samples, st, window, source),
        None => EmpiricalMeasure::new(samples, window, source),
    }
}

/// Pooled per-component standard deviation; a constant component gets 1.
pub fn pooled_scales(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> [f64; OBSERVABLE_DIM] {
    let mut out = [1.0; OBSERVABLE_DIM];
    let n = (a.len() + b.len()) as f64;
    for (c, o) in out.iter_mut().enumerate() {
        let mut col: Vec<f64> = a.samples.iter().chain(&b.samples).map(|s| s.0[c]).collect();
        let mean = stable_sum(&mut col) / n;
        let mut dev: Vec<f64> = col.iter().map(|x| (x - mean) * (x - mean)).collect();
        let sd = (stable_sum(&mut dev) / n).sqrt();
        if sd > 0.0 {
            *o = sd;
        }
    }
    out
}

fn mean_pair_distance(x: &[[f64; OBSERVABLE_DIM]], y: &[[f64; OBSERVABLE_DIM]]) -> f64 {
    let mut rows: Vec<f64> = x
        .iter()
        .map(|a| {
            y.iter()
                .map(|b| a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt())
                .sum::<f64>()
        })
        .collect();
    stable_sum(&mut rows) / (x.len() * y.len()) as f64
}

/// Energy distance after dividing component `c` by `scales[c]`.
pub fn measure_distance_scaled(a: &EmpiricalMeasure, b: &EmpiricalMeasure, scales: &[f64; OBSERVABLE_DIM]) -> f64 {
    let (a, b) = canonical(a, b);
    let norm = |m: &EmpiricalMeasure| -> Vec<[f64; OBSERVABLE_DIM]> {
        m.samples.iter().map(|s| std::array::from_fn(|c| s.0[c] / scales[c])).collect()
    };
    let (x, y) = (norm(a), norm(b));
    let d = 2.0 * mean_pair_distance(&x, &y) - mean_pair_distance(&x, &x) - mean_pair_distance(&y, &y);
    d.max(0.0)
}

/// Energy distance with pooled standardization.
pub fn measure_distance(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> f64 {
    let (a, b) = canonical(a, b);
    measure_distance_scaled(a, b, &pooled_scales(a, b))
}

// Fixes the argument order so that d(A, B) and d(B, A) run identical arithmetic.
fn canonical<'a>(a: &'a EmpiricalMeasure, b: &'a EmpiricalMeasure) -> (&'a EmpiricalMeasure, &'a EmpiricalMeasure) {
    let ord = a.len().cmp(&b.len()).then_with(|| {
        a.samples.iter().zip(&b.samples).map(|(x, y)| x.cmp_total(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
    });
    if ord == Ordering::Greater {
        (b, a)
    } else {
        (a, b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceCheck {
    pub delta: f64,
    pub members: usize,
    /// `d(μ, p_Δ^*μ)` with the push-forward built from `members` states.
    pub distance: f64,
    /// Largest `d(μ, μ')` over [`BASELINE_REPLICATES`] subsamples `μ'` of
    /// `members` states drawn from `μ` without replacement.
    pub baseline: f64,
}

impl InvarianceCheck {
    pub fn ratio(&self) -> f64 {
        if self.baseline > 0.0 {
            self.distance / self.baseline
        } else if self.distance == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

fn subsample(mu: &EmpiricalMeasure, seed: u64, replicate: u64, members: usize) -> Vec<usize> {
    let mut rng = NoiseStream::in_domain(seed, domain::RESAMPLE, replicate).rng();
    let mut idx = index::sample(&mut rng, mu.len(), members).into_vec();
    idx.sort_unstable();
    idx
}

/// Draws `members` states of `μ`, evolves each for time `Δ` with fresh
/// noise and compares the resulting measure to `μ`.
pub fn invariance_check(mu: &EmpiricalMeasure, cfg: &SimConfig, delta: f64, members: usize) -> Result<InvarianceCheck> {
    let states = mu.states().ok_or_else(|| Error::Insufficient("invariance check needs retained states".into()))?;
    if members == 0 || members > mu.len() {
        return Err(Error::InvalidParameter(format!("need 1..={} push-forward members, got {members}", mu.len())));
    }
    if !(delta >= 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be >= 0, got {delta}")));
    }
    let seed = cfg.params().seed;
    let idx = subsample(mu, seed, 0, members);
    let pushed = if delta == 0.0 {
        mu.subset(&idx, "subsample")?
    } else {
        let opts = RunOptions { horizon: Some(delta), ..RunOptions::default() };
        let n_max = cfg.params().n_max;
        let samples = idx
            .par_iter()
            .enumerate()
            .map(|(i, &j)| {
                let u = &states[j];
                if u.l2() >= n_max {
                    return Ok(observe(u));
                }
                let s = NoiseStream::in_domain(seed, domain::PUSH_FORWARD, i as u64);
                Ok(observe(&simulate_with(cfg, u, Driver::Stream(s), &opts)?.final_state))
            })
            .collect::<Result<Vec<_>>>()?;
        EmpiricalMeasure::new(samples, mu.window, "push-forward")?
    };
    let distance = measure_distance(mu, &pushed);
    let baseline = subsample_baseline(mu, seed, members)?;
    Ok(InvarianceCheck { delta, members, distance, baseline })
}

/// Largest `d(μ, μ')` over [`BASELINE_REPLICATES`] subsamples `μ'` of size
/// `members` drawn without replacement.
pub fn subsample_baseline(mu: &EmpiricalMeasure, seed: u64, members: usize) -> Result<f64> {
    if members == 0 || members > mu.len() {
        return Err(Error::InvalidParameter(format!("need 1..={} subsample members, got {members}", mu.len())));
    }
    let mut baseline: f64 = 0.0;
    for r in 1..=BASELINE_REPLICATES {
        let sub = mu.subset(&subsample(mu, seed, r, members), "baseline")?;
        baseline = baseline.max(measure_distance(mu, &sub));
    }
    Ok(baseline)
}

/// `d(μ_s, μ_{2s})` for each `s`.
pub fn cesaro_distances(trajs: &[Trajectory], s_list: &[usize]) -> Result<Vec<(usize, f64)>> {
    s_list
        .iter()
        .map(|&s| Ok((s, measure_distance(&kb_average(trajs, s)?, &kb_average(trajs, 2 * s)?))))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TightnessRow {
    pub m: u32,
    /// Tail radius `N_m` with inflated tail below `ε/2^{4m}`; the cutoff
    /// scale is `n_m = 2·N_m`.
    pub tail_radius: Option<f64>,
    /// `P(‖(1−θ_{n_m})u‖²_{H¹} > 2^{2m}·3c₁c₂/ε)`
    pub p_h1: f64,
    /// `P(‖θ_{n_m}u‖₂² > 2^{−2m})`
    pub p_tail: f64,
    pub estimate: f64,
    pub stderr: f64,
    /// `ε/2^{2m} + ε/(2^{2m}·3c₁)·mean‖u‖²_{H¹}`
    pub markov_bound: f64,
    pub markov_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TightnessReport {
    pub eps: f64,
    pub s: usize,
    pub regime: RegimeCheck,
    pub c1: f64,
    pub c2: f64,
    /// `(1/s)∫₁^{s+1} mean‖u‖²_{H¹} dt`, sampled every [`KB_SPACING`].
    pub mean_h1: f64,
    pub c1_check: bool,
    pub rows: Vec<TightnessRow>,
    pub total: f64,
    pub outcome: Outcome,
}

impl TightnessReport {
    pub fn passed(&self) -> bool {
        self.outcome == Outcome::Pass
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let r = &self.regime;
        let _ = writeln!(
            s,
            "# tightness eps={:e} s={} regime {}: {:.6} < {:.6} ({}) c1={:.6} c2={:.6} mean_h1={:.6} (<= 3c1: {}) total={:.6e} {}",
            self.eps,
            self.s,
            r.label,
            r.lhs,
            r.rhs,
            r.holds(),
            self.c1,
            self.c2,
            self.mean_h1,
            self.c1_check,
            self.total,
            self.outcome.label()
        );
        for row in &self.rows {
            let _ = writeln!(
                s,
                "m={} N_m={} p_h1={:.6e} p_tail={:.6e} estimate={:.6e} stderr={:.3e} markov={:.6e} ok={}",
                row.m,
                row.tail_radius.map_or("none".to_string(), |n| n.to_string()),
                row.p_h1,
                row.p_tail,
                row.estimate,
                row.stderr,
                row.markov_bound,
                row.markov_ok
            );
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("m,tail_radius,p_h1,p_tail,estimate,stderr,markov_bound,markov_ok\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{:e},{:e},{:e},{:e},{:e},{}",
                r.m,
                r.tail_radius.map_or(String::new(), |n| n.to_string()),
                r.p_h1,
                r.p_tail,
                r.estimate,
                r.stderr,
                r.markov_bound,
                r.markov_ok
            );
        }
        s
    }
}

/// `1 + 2Ĉ²`: `‖(1−θ_n)u‖²_{H¹} ≤ c₂‖u‖²_{H¹}` for every `n ≥ 1`.
pub fn cutoff_constant() -> f64 {
    1.0 + 2.0 * crate::grid::CUTOFF_SLOPE_BOUND.powi(2)
}

fn h1_full(u: &[f64], dx: f64) -> f64 {
    sum_sq(u) * dx + h1_seminorm_sq_raw(u, dx)
}

/// Estimates `P(u(t) ∉ Z_m)` over the window `[1, s + 1)` through the two
/// events of the compactness argument, for each `m`. Needs the states at the
/// sampling instants of the window.
pub fn tightness_report(ens: &Ensemble, eps: f64, m_list: &[u32], s: usize) -> Result<TightnessReport> {
    if !(eps > 0.0) || s == 0 || ens.members() == 0 {
        return Err(Error::InvalidParameter("tightness needs eps > 0, s >= 1 and a nonempty ensemble".into()));
    }
    let stats = EnsembleStats::from_ensemble(ens);
    let cfg = &ens.cfg;
    let grid = *cfg.grid();
    let dx = grid.dx();
    let times = kb_times(s);
    let states: Vec<Vec<&Field>> = ens
        .trajectories
        .iter()
        .map(|tr| {
            times
                .iter()
                .map(|&t| state_at(tr, t).ok_or_else(|| Error::Insufficient(format!("state at t = {t} not retained"))))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let c1 = stats.u0_l2sq;
    let c2 = cutoff_constant();
    let per_traj_h1: Vec<f64> = states
        .iter()
        .map(|st| st.iter().map(|f| h1_full(f.values(), dx)).sum::<f64>() / times.len() as f64)
        .collect();
    let (mean_h1, _) = mean_stderr(&per_traj_h1);
    let c1_check = mean_h1 <= 3.0 * c1;
    let mut rows = Vec::with_capacity(m_list.len());
    let mut buf = vec![0.0; grid.len()];
    for &m in m_list {
        let four_m = 4f64.powi(m as i32);
        let tail_radius = smallest_tail_radius(&stats, eps / (four_m * four_m), 1.0);
        let markov_bound =
            eps / four_m + if c1 > 0.0 { eps / (four_m * 3.0 * c1) * mean_h1 } else { 0.0 };
        let Some(big_n) = tail_radius else {
            rows.push(TightnessRow {
                m,
                tail_radius,
                p_h1: f64::NAN,
                p_tail: f64::NAN,
                estimate: f64::NAN,
                stderr: f64::NAN,
                markov_bound,
                markov_ok: false,
            });
            continue;
        };
        let theta = cutoff_theta(2.0 * big_n, grid)?;
        let th = theta.values();
        let h1_level = four_m * 3.0 * c1 * c2 / eps;
        let tail_level = 1.0 / four_m;
        let (mut fa, mut fb) = (Vec::new(), Vec::new());
        for st in &states {
            let (mut ca, mut cb) = (0usize, 0usize);
            for f in st {
                let u = f.values();
                for ((o, x), w) in buf.iter_mut().zip(u).zip(th) {
                    *o = (1.0 - w) * x;
                }
                if h1_full(&buf, dx) > h1_level {
                    ca += 1;
                }
                for ((o, x), w) in buf.iter_mut().zip(u).zip(th) {
                    *o = w * x;
                }
                if sum_sq(&buf) * dx > tail_level {
                    cb += 1;
                }
            }
            fa.push(ca as f64 / times.len() as f64);
            fb.push(cb as f64 / times.len() as f64);
        }
        let both: Vec<f64> = fa.iter().zip(&fb).map(|(a, b)| a + b).collect();
        let (p_h1, _) = mean_stderr(&fa);
        let (p_tail, _) = mean_stderr(&fb);
        let (estimate, stderr) = mean_stderr(&both);
        rows.push(TightnessRow {
            m,
            tail_radius,
            p_h1,
            p_tail,
            estimate,
            stderr,
            markov_bound,
            markov_ok: estimate <= markov_bound + 3.0 * stderr,
        });
    }
    let total: f64 = rows.iter().map(|r| r.estimate).sum();
    let regime =
        RegimeCheck { label: "a*l^2 < 3k/7".into(), lhs: stats.noise_strength, rhs: cfg.invariant_threshold() };
    let outcome = if !regime.holds() {
        Outcome::OutOfRegime
    } else if total < eps && c1_check && rows.iter().all(|r| r.markov_ok) {
        Outcome::Pass
    } else {
        Outcome::Fail
    };
    Ok(TightnessReport { eps, s, regime, c1, c2, mean_h1, c1_check, rows, total, outcome })
}

/// `d(μ, p_Δ^*μ)` may exceed the subsample baseline by at most this factor.
pub const INVARIANCE_FACTOR: f64 = 2.0;

/// Default `m` list of the tightness estimate.
pub const TIGHTNESS_M: [u32; 6] = [1, 2, 3, 4, 5, 6];

/// Retention that keeps the states at the sampling instants of `[1, s + 1)`.
pub fn kb_retention(cfg: &SimConfig, s: usize) -> Retention {
    Retention::Window { from: 1.0, to: (s + 1) as f64, every: (KB_SPACING / cfg.dt()).round().max(1.0) as usize }
}

#[derive(Debug, Clone)]
pub struct InvariantSuite {
    pub s: usize,
    pub measure: EmpiricalMeasure,
    /// `(s', d(μ_{s'}, μ_{2s'}))` for `s' = s/4, s/2, s`.
    pub cesaro: Vec<(usize, f64)>,
    pub decreasing: bool,
    pub invariance: InvarianceCheck,
    pub tightness: TightnessReport,
}

impl InvariantSuite {
    pub fn invariance_ok(&self) -> bool {
        self.invariance.distance <= INVARIANCE_FACTOR * self.invariance.baseline
    }

    pub fn passed(&self) -> bool {
        self.decreasing && self.invariance_ok() && self.tightness.passed()
    }

    pub fn to_text(&self) -> String {
        let mut t = String::new();
        let _ = writeln!(t, "# invariant s={} {}", self.s, if self.passed() { "PASS" } else { "FAIL" });
        for (s, d) in &self.cesaro {
            let _ = writeln!(t, "cesaro s={s} d(mu_s,mu_2s)={d:.6e}");
        }
        let _ = writeln!(t, "cesaro strictly decreasing: {}", self.decreasing);
        let inv = &self.invariance;
        let _ = writeln!(
            t,
            "invariance delta={} members={} distance={:.6e} baseline={:.6e} ratio={:.3} ok={}",
            inv.delta,
            inv.members,
            inv.distance,
            inv.baseline,
            inv.ratio(),
            self.invariance_ok()
        );
        t.push_str(&self.tightness.to_text());
        t
    }
}

/// Cesàro trend, invariance under `p_Δ` and tightness of `μ_s` for an
/// ensemble run with [`kb_retention`] and a horizon of at least `2s + 1`.
pub fn invariant_suite_on(ens: &Ensemble, s: usize, eps: f64, delta: f64, members: usize) -> Result<InvariantSuite> {
    crate::io::require_invariant_regime(&ens.cfg)?;
    let mut s_list: Vec<usize> = [s / 4, s / 2, s].into_iter().filter(|&x| x >= 1).collect();
    s_list.dedup();
    let cesaro = cesaro_distances(&ens.trajectories, &s_list)?;
    let decreasing = cesaro.len() >= 2 && cesaro.windows(2).all(|w| w[1].1 < w[0].1);
    let measure = kb_average(&ens.trajectories, s)?;
    let invariance = invariance_check(&measure, &ens.cfg, delta, members.min(measure.len()))?;
    let tightness = tightness_report(ens, eps, &TIGHTNESS_M, s)?;
    Ok(InvariantSuite { s, measure, cesaro, decreasing, invariance, tightness })
}
