//! Exponential Euler–Maruyama time stepping
//!
//! ```text
//! u⁺ = S_k(Δt) [ u + Δt·C(u) + σ(u) ⊙ ΔW ]
//! ```
//!
//! where `S_k` is the damped heat semigroup (applied exactly in the sine
//! basis) and `C` is the skew-symmetric convection
//! `C(f) = -⅓ [f ⊙ Df + D(f ⊙ f)]` with centered differences `D`.
//! The noise is evaluated at the left point (Itô).

use std::f64::consts::PI;

use crate::grid::{h1_seminorm_sq_raw, lp_norm_raw, sum_sq, tail_curve_raw, Field, Grid};
use crate::heat::HeatOperator;
use crate::noise::{NoiseIncrement, NoiseModel, NoisePath, NoiseStream, SigmaKind, SigmaSpec};
use crate::transform::Workspace;
use crate::{Error, Result};

/// Number of leading sine coefficients stored per diagnostics row.
pub const TRACKED_MODES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialKind {
    /// `amp · exp(-x²)`
    Gaussian,
    /// `amp · e₁`
    Mode1,
    Zero,
}

impl InitialKind {
    pub fn name(&self) -> &'static str {
        match self {
            InitialKind::Gaussian => "gaussian",
            InitialKind::Mode1 => "mode1",
            InitialKind::Zero => "zero",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gaussian" => Some(InitialKind::Gaussian),
            "mode1" => Some(InitialKind::Mode1),
            "zero" => Some(InitialKind::Zero),
            _ => None,
        }
    }
}

/// Scalar parameters of a run, exactly as they appear in a config file.
#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub half_width: f64,
    pub n: usize,
    pub dt: f64,
    pub horizon: f64,
    pub k: f64,
    pub l: f64,
    pub sigma_kind: SigmaKind,
    pub a0: f64,
    pub r: f64,
    pub modes: usize,
    pub ensemble: usize,
    pub seed: u64,
    pub n_max: f64,
    pub p: f64,
    pub snapshot_stride: usize,
    pub retain_states: bool,
    pub u0: InitialKind,
    pub u0_amp: f64,
    pub convection: bool,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            half_width: 32.0,
            n: 2047,
            dt: 1e-3,
            horizon: 50.0,
            k: 1.0,
            l: 0.3,
            sigma_kind: SigmaKind::Linear,
            a0: 0.5,
            r: 1.0,
            modes: 64,
            ensemble: 200,
            seed: 42,
            n_max: 100.0,
            p: 2.0,
            snapshot_stride: 50,
            retain_states: false,
            u0: InitialKind::Gaussian,
            u0_amp: 1.0,
            convection: true,
        }
    }
}

/// Validated configuration together with the objects built from it.
#[derive(Debug, Clone)]
pub struct SimConfig {
    params: SimParams,
    grid: Grid,
    sigma: SigmaSpec,
    noise: NoiseModel,
    heat: HeatOperator,
    steps: usize,
}

impl PartialEq for SimConfig {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
    }
}

impl SimConfig {
    pub fn new(params: SimParams) -> Result<Self> {
        let grid = Grid::new(params.half_width, params.n)?;
        let sigma = SigmaSpec::new(params.sigma_kind, params.l)?;
        let noise = NoiseModel::power_law(grid, params.a0, params.r, params.modes)?;
        let heat = HeatOperator::new(grid, params.k)?;
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(params.dt > 0.0) || !params.dt.is_finite() {
            return bad(format!("dt must be positive, got {}", params.dt));
        }
        if !(params.horizon >= params.dt) || !params.horizon.is_finite() {
            return bad(format!("T must be >= dt, got {}", params.horizon));
        }
        let steps = (params.horizon / params.dt).round() as usize;
        if ((steps as f64) * params.dt - params.horizon).abs() > 1e-9 * params.horizon {
            return bad(format!("T = {} is not a multiple of dt = {}", params.horizon, params.dt));
        }
        if params.snapshot_stride == 0 {
            return bad("snapshot_stride must be >= 1".into());
        }
        if !(params.p >= 2.0) || !params.p.is_finite() {
            return bad(format!("moment exponent p must be >= 2, got {}", params.p));
        }
        if params.ensemble == 0 {
            return bad("M must be >= 1".into());
        }
        if !params.u0_amp.is_finite() {
            return bad("u0_amp must be finite".into());
        }
        let cfg = Self { params, grid, sigma, noise, heat, steps };
        let norm0 = cfg.initial_field().l2();
        if !(cfg.params.n_max > norm0) {
            return bad(format!("N_max = {} must exceed ‖u0‖ = {norm0}", cfg.params.n_max));
        }
        Ok(cfg)
    }

    /// Same configuration with some parameters changed.
    pub fn modified(&self, f: impl FnOnce(&mut SimParams)) -> Result<Self> {
        let mut p = self.params.clone();
        f(&mut p);
        Self::new(p)
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn sigma(&self) -> &SigmaSpec {
        &self.sigma
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn heat(&self) -> &HeatOperator {
        &self.heat
    }

    pub fn dt(&self) -> f64 {
        self.params.dt
    }

    pub fn k(&self) -> f64 {
        self.params.k
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `a = Σ a_j²`.
    pub fn trace(&self) -> f64 {
        self.noise.trace()
    }

    /// `a·l²`
    pub fn noise_strength(&self) -> f64 {
        self.trace() * self.params.l * self.params.l
    }

    /// `k / (p - 1)`
    pub fn moment_threshold(&self) -> f64 {
        self.params.k / (self.params.p - 1.0)
    }

    /// `3k / 7`, the `p = 10/3` instance of `k / (p - 1)`.
    pub fn invariant_threshold(&self) -> f64 {
        3.0 * self.params.k / 7.0
    }

    /// `a·l² < k/(p-1)`: uniform moment bound of order `p`.
    pub fn bound_regime(&self) -> bool {
        self.noise_strength() < self.moment_threshold()
    }

    /// `a·l² < 3k/7`: tail estimate and invariant measure.
    pub fn invariant_regime(&self) -> bool {
        self.noise_strength() < self.invariant_threshold()
    }

    pub fn noise_active(&self) -> bool {
        !self.sigma.is_zero() && self.noise.trace() > 0.0
    }

    pub fn initial_field(&self) -> Field {
        let amp = self.params.u0_amp;
        let l = self.grid.half_width();
        match self.params.u0 {
            InitialKind::Gaussian => Field::from_fn(self.grid, |x| amp * (-x * x).exp()),
            InitialKind::Mode1 => Field::from_fn(self.grid, |x| amp / l.sqrt() * (PI * (x + l) / (2.0 * l)).sin()),
            InitialKind::Zero => Field::zeros(self.grid),
        }
    }

    /// Tail radii `L/4` and `L/2` of the diagnostics rows.
    pub fn tail_radii(&self) -> [f64; 2] {
        let l = self.grid.half_width();
        [l / 4.0, l / 2.0]
    }
}

/// `C(f) = -⅓ [f ⊙ Df + D(f ⊙ f)]` into `out`.
pub(crate) fn convection_raw(f: &[f64], dx: f64, out: &mut [f64]) {
    let n = f.len();
    let c = -1.0 / (3.0 * 2.0 * dx);
    for i in 0..n {
        let left = if i == 0 { 0.0 } else { f[i - 1] };
        let right = if i + 1 == n { 0.0 } else { f[i + 1] };
        out[i] = c * (f[i] * (right - left) + (right * right - left * left));
    }
}

pub fn convection(f: &Field) -> Field {
    let mut out = vec![0.0; f.values().len()];
    convection_raw(f.values(), f.grid().dx(), &mut out);
    Field::new(*f.grid(), out).expect("finite input gives finite convection")
}

/// One step with all scratch buffers preallocated.
pub struct Stepper<'a> {
    cfg: &'a SimConfig,
    mult: Vec<f64>,
    conv: Vec<f64>,
    dw: Vec<f64>,
    ws: Workspace,
    noise_ws: Workspace,
}

impl<'a> Stepper<'a> {
    pub fn new(cfg: &'a SimConfig) -> Self {
        let n = cfg.grid.len();
        Self {
            cfg,
            mult: cfg.heat.multipliers(cfg.dt()),
            conv: vec![0.0; n],
            dw: vec![0.0; n],
            ws: cfg.heat.workspace(),
            noise_ws: cfg.noise.transform_workspace(),
        }
    }

    /// Advances `u` by one step; `draws` are the mode increments `ΔB_j`.
    pub fn step_in_place(&mut self, u: &mut [f64], draws: Option<&[f64]>) {
        let cfg = self.cfg;
        let dt = cfg.dt();
        let conv_on = cfg.params.convection;
        let noise_on = draws.is_some() && cfg.noise_active();
        if conv_on {
            convection_raw(u, cfg.grid.dx(), &mut self.conv);
        }
        if let (true, Some(d)) = (noise_on, draws) {
            cfg.noise.assemble_into(d, &mut self.dw, &mut self.noise_ws);
        }
        match (conv_on, noise_on) {
            (true, true) => {
                for ((x, c), w) in u.iter_mut().zip(&self.conv).zip(&self.dw) {
                    *x += dt * c + cfg.sigma.eval(*x) * w;
                }
            }
            (true, false) => u.iter_mut().zip(&self.conv).for_each(|(x, c)| *x += dt * c),
            (false, true) => u.iter_mut().zip(&self.dw).for_each(|(x, w)| *x += cfg.sigma.eval(*x) * w),
            (false, false) => {}
        }
        cfg.heat.apply_multipliers_in_place(u, &self.mult, &mut self.ws);
    }
}

/// `S_k(Δt)[u + Δt·C(u) + σ(u) ⊙ ΔW]`.
pub fn step(u: &Field, cfg: &SimConfig, inc: &NoiseIncrement) -> Result<Field> {
    if *u.grid() != cfg.grid {
        return Err(Error::GridMismatch);
    }
    if (inc.dt - cfg.dt()).abs() > 1e-12 * cfg.dt() {
        return Err(Error::InvalidParameter(format!("increment dt {} differs from config dt {}", inc.dt, cfg.dt())));
    }
    let mut v = u.values().to_vec();
    let mut s = Stepper::new(cfg);
    s.step_in_place(&mut v, Some(&inc.mode_draws));
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::BlowUp { t: cfg.dt() });
    }
    Ok(Field::from_vec_unchecked(cfg.grid, v))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Status {
    Completed,
    /// `‖u(t)‖₂ ≥ N_max` first observed at this time.
    GuardTriggered(f64),
}

/// Diagnostics of one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagRow {
    pub t: f64,
    pub l2sq: f64,
    /// `‖u‖₂^p`
    pub lpp: f64,
    /// `‖u_x‖₂²`
    pub h1sq: f64,
    /// Tail masses at `L/4` and `L/2`.
    pub tail: [f64; 2],
    pub coeffs: [f64; TRACKED_MODES],
    /// Tail masses at the caller's extra radii.
    pub tail_curve: Vec<f64>,
}

/// Which full states a run keeps besides the final one.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Retention {
    #[default]
    None,
    All,
    /// Snapshots with `from ≤ t < to` taken at steps divisible by `every`.
    Window { from: f64, to: f64, every: usize },
}

impl Retention {
    fn keeps(&self, t: f64, step: usize) -> bool {
        match *self {
            Retention::None => false,
            Retention::All => true,
            Retention::Window { from, to, every } => {
                t >= from - 1e-9 && t < to - 1e-9 && step.is_multiple_of(every.max(1))
            }
        }
    }
}

/// Sampled instants `m·dt` for `m = 0, stride, 2·stride, …` plus the final step.
pub fn snapshot_times(steps: usize, stride: usize, dt: f64) -> Vec<f64> {
    let mut t: Vec<f64> = (0..=steps).step_by(stride.max(1)).map(|m| m as f64 * dt).collect();
    if !steps.is_multiple_of(stride.max(1)) {
        t.push(steps as f64 * dt);
    }
    t
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub retain: Retention,
    pub tail_radii: Vec<f64>,
    pub record_noise: bool,
    /// Overrides the configured horizon (same `dt`).
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub rows: Vec<DiagRow>,
    pub states: Vec<(f64, Field)>,
    pub final_state: Field,
    pub status: Status,
    /// Mode increments of every step taken, when requested.
    pub noise: Option<NoisePath>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn final_time(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.t)
    }
}

/// Computes diagnostic rows from raw nodal values.
pub(crate) struct RowMaker {
    grid: Grid,
    p: f64,
    radii: [f64; 2],
    extra: Vec<f64>,
    basis: Vec<Vec<f64>>,
}

impl RowMaker {
    pub(crate) fn new(cfg: &SimConfig, extra: &[f64]) -> Self {
        let g = cfg.grid;
        let big_n = (g.len() + 1) as f64;
        let s = g.dx() / g.half_width().sqrt();
        let basis = (1..=TRACKED_MODES.min(g.len()))
            .map(|j| (1..=g.len()).map(|i| s * (PI * (i * j) as f64 / big_n).sin()).collect())
            .collect();
        Self { grid: g, p: cfg.params.p, radii: cfg.tail_radii(), extra: extra.to_vec(), basis }
    }

    pub(crate) fn row(&self, t: f64, u: &[f64]) -> DiagRow {
        let dx = self.grid.dx();
        let l2sq = sum_sq(u) * dx;
        let mut tail = [0.0; 2];
        tail_curve_raw(u, &self.grid, &self.radii, &mut tail);
        let mut tail_curve = vec![0.0; self.extra.len()];
        tail_curve_raw(u, &self.grid, &self.extra, &mut tail_curve);
        let mut coeffs = [0.0; TRACKED_MODES];
        for (c, b) in coeffs.iter_mut().zip(&self.basis) {
            *c = crate::grid::dot(u, b);
        }
        DiagRow {
            t,
            l2sq,
            lpp: if self.p == 2.0 { l2sq } else { lp_norm_raw(u, dx, 2.0).powf(self.p) },
            h1sq: h1_seminorm_sq_raw(u, dx),
            tail,
            coeffs,
            tail_curve,
        }
    }
}

/// Source of mode increments for each step.
pub enum Driver<'a> {
    Stream(NoiseStream),
    Path(&'a NoisePath),
    Silent,
}

pub fn simulate(cfg: &SimConfig, u0: &Field, stream: &NoiseStream) -> Result<Trajectory> {
    let retain = if cfg.params.retain_states { Retention::All } else { Retention::None };
    let opts = RunOptions { retain, ..RunOptions::default() };
    simulate_with(cfg, u0, Driver::Stream(*stream), &opts)
}

pub fn simulate_with(cfg: &SimConfig, u0: &Field, driver: Driver<'_>, opts: &RunOptions) -> Result<Trajectory> {
    if *u0.grid() != cfg.grid {
        return Err(Error::GridMismatch);
    }
    let n_max = cfg.params.n_max;
    if !(u0.l2() < n_max) {
        return Err(Error::InvalidParameter(format!("‖u0‖ = {} is not below N_max = {n_max}", u0.l2())));
    }
    let dt = cfg.dt();
    let steps = match opts.horizon {
        Some(h) => {
            let s = (h / dt).round() as usize;
            if s == 0 || ((s as f64) * dt - h).abs() > 1e-9 * h {
                return Err(Error::InvalidParameter(format!("horizon {h} is not a positive multiple of dt {dt}")));
            }
            s
        }
        None => cfg.steps,
    };
    if let Driver::Path(p) = &driver {
        if p.steps() < steps || (p.dt() - dt).abs() > 1e-12 * dt {
            return Err(Error::PartitionMismatch(format!(
                "run needs {steps} steps of {dt}, noise path has {} of {}",
                p.steps(),
                p.dt()
            )));
        }
    }
    let stride = cfg.params.snapshot_stride;
    let maker = RowMaker::new(cfg, &opts.tail_radii);
    let mut stepper = Stepper::new(cfg);
    let mut u = u0.values().to_vec();
    let mut draws = vec![0.0; cfg.noise.modes()];
    let mut recorded = opts.record_noise.then(Vec::new);
    let mut rows = vec![maker.row(0.0, &u)];
    let mut states = Vec::new();
    if opts.retain.keeps(0.0, 0) {
        states.push((0.0, u0.clone()));
    }
    let n_max_sq = n_max * n_max / cfg.grid.dx();
    let mut status = Status::Completed;
    for m in 0..steps {
        let d: Option<&[f64]> = match &driver {
            Driver::Stream(s) => {
                cfg.noise.draw_modes(dt, &mut s.step_rng(m as u64), &mut draws);
                Some(&draws)
            }
            Driver::Path(p) => Some(p.draws(m)),
            Driver::Silent => None,
        };
        if let (Some(rec), Some(d)) = (recorded.as_mut(), d) {
            rec.push(d.to_vec());
        }
        stepper.step_in_place(&mut u, d);
        let t = (m + 1) as f64 * dt;
        let energy = sum_sq(&u);
        if !energy.is_finite() {
            return Err(Error::BlowUp { t });
        }
        let guard = energy >= n_max_sq;
        if guard || (m + 1) % stride == 0 || m + 1 == steps {
            rows.push(maker.row(t, &u));
            if opts.retain.keeps(t, m + 1) {
                states.push((t, Field::from_vec_unchecked(cfg.grid, u.clone())));
            }
        }
        if guard {
            status = Status::GuardTriggered(t);
            break;
        }
    }
    Ok(Trajectory {
        rows,
        states,
        final_state: Field::from_vec_unchecked(cfg.grid, u),
        status,
        noise: recorded.map(|r| NoisePath::from_draws(dt, r)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{h1_seminorm, lp_norm, make_grid, tail_mass};
    use crate::noise::{basis_eval, sample_increment};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small(f: impl FnOnce(&mut SimParams)) -> SimConfig {
        let mut p = SimParams { half_width: 8.0, n: 255, dt: 1e-3, horizon: 0.5, snapshot_stride: 50, ..Default::default() };
        f(&mut p);
        SimConfig::new(p).unwrap()
    }

    #[test]
    fn default_config_regimes() {
        let cfg = SimConfig::new(SimParams::default()).unwrap();
        assert_eq!(cfg.grid().dx(), 0.03125);
        assert!((cfg.noise_strength() - 0.40736 * 0.09).abs() < 1e-5);
        assert!(cfg.bound_regime() && cfg.invariant_regime());
        assert_eq!(cfg.steps(), 50_000);
        let hot = cfg.modified(|p| p.l = 1.2).unwrap();
        assert!(!hot.invariant_regime());
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::new(SimParams { half_width: 0.5, ..Default::default() }).is_err());
        assert!(SimConfig::new(SimParams { dt: 0.0, ..Default::default() }).is_err());
        assert!(SimConfig::new(SimParams { horizon: 1e-4, ..Default::default() }).is_err());
        assert!(SimConfig::new(SimParams { n_max: 0.5, ..Default::default() }).is_err());
        assert!(SimConfig::new(SimParams { p: 1.5, ..Default::default() }).is_err());
    }

    #[test]
    fn convection_of_zero_is_zero() {
        let g = make_grid(4.0, 63).unwrap();
        assert_eq!(convection(&Field::zeros(g)).max_abs(), 0.0);
    }

    #[test]
    fn convection_energy_identity() {
        let g = make_grid(32.0, 2047).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let f = Field::new(g, (0..g.len()).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap();
            let c = convection(&f);
            let e = f.dot(&c).unwrap();
            assert!(e.abs() <= 1e-12 * f.l2() * c.l2(), "{e}");
        }
    }

    #[test]
    fn convection_matches_analytic_for_first_mode() {
        // -½ ∂x(e₁²) = -½ · (π/2L) · L⁻¹ sin(π(x+L)/L) at L = 1.
        let g = make_grid(1.0, 2047).unwrap();
        let e1 = basis_eval(1, g).unwrap();
        let c = convection(&e1);
        for (x, v) in g.nodes().zip(c.values()) {
            let want = -0.5 * (PI / 2.0) * (PI * (x + 1.0)).sin();
            assert!((v - want).abs() <= 1e-3, "x={x}: {v} vs {want}");
        }
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let cfg = small(|_| {});
        let mut rng = NoiseStream::new(1, 0).step_rng(0);
        let inc = sample_increment(cfg.noise(), cfg.dt(), &mut rng).unwrap();
        assert_eq!(step(&Field::zeros(*cfg.grid()), &cfg, &inc).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn linear_step_is_exact_on_modes() {
        let cfg = small(|p| {
            p.a0 = 0.0;
            p.convection = false;
        });
        let e1 = basis_eval(1, *cfg.grid()).unwrap();
        let inc = sample_increment(cfg.noise(), cfg.dt(), &mut NoiseStream::new(0, 0).step_rng(0)).unwrap();
        let got = step(&e1, &cfg, &inc).unwrap();
        let want = e1.scaled(cfg.heat().multiplier(1, cfg.dt()));
        assert!(got.sub(&want).unwrap().max_abs() <= 1e-12 * want.max_abs());
    }

    #[test]
    fn zero_initial_data_stays_zero() {
        let cfg = small(|p| p.u0 = InitialKind::Zero);
        let tr = simulate(&cfg, &cfg.initial_field(), &NoiseStream::new(1, 0)).unwrap();
        assert_eq!(tr.status, Status::Completed);
        assert!(tr.rows.iter().all(|r| r.l2sq == 0.0));
        assert_eq!(tr.rows.len(), 11);
    }

    #[test]
    fn deterministic_decay_bound() {
        let cfg = small(|p| {
            p.a0 = 0.0;
            p.u0 = InitialKind::Mode1;
            p.horizon = 2.0;
        });
        let u0 = cfg.initial_field();
        let tr = simulate(&cfg, &u0, &NoiseStream::new(1, 0)).unwrap();
        for r in &tr.rows {
            assert!(r.l2sq.sqrt() <= (-r.t).exp() * u0.l2() * (1.0 + 1e-3));
        }
    }

    #[test]
    fn deterministic_energy_nonincreasing() {
        let cfg = small(|p| {
            p.a0 = 0.0;
            p.u0_amp = 2.0;
            p.dt = 2.4e-4;
            p.horizon = 0.48;
            p.snapshot_stride = 1;
            p.k = 0.0;
        });
        assert!(cfg.dt() <= cfg.grid().dx().powi(2) / 4.0);
        let tr = simulate(&cfg, &cfg.initial_field(), &NoiseStream::new(1, 0)).unwrap();
        for w in tr.rows.windows(2) {
            assert!(w[1].l2sq <= w[0].l2sq, "{} -> {}", w[0].l2sq, w[1].l2sq);
        }
    }

    #[test]
    fn refinement_order() {
        let terminal = |dt: f64| {
            let cfg = small(|p| {
                p.a0 = 0.0;
                p.u0_amp = 2.0;
                p.dt = dt;
                p.horizon = 1.0;
                p.snapshot_stride = 1000;
            });
            simulate(&cfg, &cfg.initial_field(), &NoiseStream::new(1, 0)).unwrap().final_state.l2()
        };
        let (a, b, c) = (terminal(0.02), terminal(0.01), terminal(0.005));
        let order = ((a - b).abs() / (b - c).abs()).log2();
        assert!(order >= 0.8, "order {order}");
    }

    #[test]
    fn guard_stops_and_flags() {
        let cfg = small(|p| {
            p.u0_amp = 2.0;
            p.k = 0.0;
            p.l = 0.0;
            p.n_max = 2.6;
        });
        let u0 = cfg.initial_field();
        assert!(u0.l2() < 2.6);
        let hot = cfg
            .modified(|p| {
                p.l = 40.0;
                p.a0 = 2.0;
            })
            .unwrap();
        let tr = simulate(&hot, &u0, &NoiseStream::new(9, 0)).unwrap();
        let any_big = tr.rows.iter().any(|r| r.l2sq.sqrt() >= 2.6);
        assert_eq!(matches!(tr.status, Status::GuardTriggered(_)), any_big);
        assert!(any_big);
        if let Status::GuardTriggered(t) = tr.status {
            assert_eq!(tr.final_time(), t);
        }
        let calm = simulate(&cfg, &u0, &NoiseStream::new(9, 0)).unwrap();
        assert_eq!(calm.status, Status::Completed);
        assert!(calm.rows.iter().all(|r| r.l2sq.sqrt() < 2.6));
    }

    #[test]
    fn runs_are_reproducible() {
        let cfg = small(|_| {});
        let u0 = cfg.initial_field();
        let a = simulate(&cfg, &u0, &NoiseStream::new(11, 3)).unwrap();
        let b = simulate(&cfg, &u0, &NoiseStream::new(11, 3)).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.final_state, b.final_state);
        let c = simulate(&cfg, &u0, &NoiseStream::new(11, 4)).unwrap();
        assert_ne!(a.final_state, c.final_state);
    }

    #[test]
    fn path_driver_matches_stream_driver() {
        let cfg = small(|_| {});
        let u0 = cfg.initial_field();
        let s = NoiseStream::new(5, 2);
        let path = NoisePath::sample(cfg.noise(), cfg.dt(), cfg.steps(), &s);
        let a = simulate(&cfg, &u0, &s).unwrap();
        let b = simulate_with(&cfg, &u0, Driver::Path(&path), &RunOptions::default()).unwrap();
        assert_eq!(a.final_state, b.final_state);
    }

    #[test]
    fn rows_match_standalone_functionals() {
        let cfg = small(|_| {});
        let opts = RunOptions { retain: Retention::All, tail_radii: vec![1.0, 3.0], ..Default::default() };
        let tr = simulate_with(&cfg, &cfg.initial_field(), Driver::Stream(NoiseStream::new(2, 0)), &opts).unwrap();
        assert_eq!(tr.states.len(), tr.rows.len());
        for (row, (t, f)) in tr.rows.iter().zip(&tr.states) {
            assert_eq!(row.t, *t);
            assert!((row.l2sq - lp_norm(f, 2.0).unwrap().powi(2)).abs() < 1e-12);
            assert!((row.h1sq - h1_seminorm(f).powi(2)).abs() < 1e-10);
            assert!((row.tail[0] - tail_mass(f, 2.0).unwrap()).abs() < 1e-12);
            assert!((row.tail_curve[1] - tail_mass(f, 3.0).unwrap()).abs() < 1e-12);
            let c = cfg.heat().coefficients(f).unwrap();
            for j in 0..TRACKED_MODES {
                assert!((row.coeffs[j] - c[j]).abs() < 1e-12);
            }
        }
    }
}
