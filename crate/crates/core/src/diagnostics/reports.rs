use std::fmt::Write as _;

use super::{EnsembleStats, Series};
use crate::{Error, Result};

/// Relative discretization slack added to every bound by default.
pub const DEFAULT_SLACK: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    /// The parameters violate the inequality's hypothesis; nothing asserted.
    OutOfRegime,
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Pass => "PASS",
            Outcome::Fail => "FAIL",
            Outcome::OutOfRegime => "OUT-OF-REGIME",
        }
    }
}

/// A strict inequality `lhs < rhs` between model constants.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeCheck {
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
}

impl RegimeCheck {
    pub fn holds(&self) -> bool {
        self.lhs < self.rhs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginRow {
    pub t: f64,
    pub mean: f64,
    pub stderr: f64,
    pub bound: f64,
    /// `mean − bound − 3·stderr`
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub id: String,
    pub regime: RegimeCheck,
    pub rows: Vec<MarginRow>,
    pub worst_margin: f64,
    pub tolerance: f64,
    pub outcome: Outcome,
}

impl BoundReport {
    fn build(id: &str, regime: RegimeCheck, times: &[f64], series: &Series, bound: impl Fn(f64) -> f64, tolerance: f64) -> Self {
        let rows: Vec<MarginRow> = times
            .iter()
            .zip(series.mean.iter().zip(&series.stderr))
            .map(|(&t, (&mean, &stderr))| {
                let b = bound(t);
                let margin = mean - b - 3.0 * stderr;
                MarginRow { t, mean, stderr, bound: b, margin, pass: margin <= tolerance }
            })
            .collect();
        let worst_margin = rows.iter().map(|r| r.margin).fold(f64::NEG_INFINITY, f64::max);
        let outcome = if !regime.holds() {
            Outcome::OutOfRegime
        } else if worst_margin <= tolerance {
            Outcome::Pass
        } else {
            Outcome::Fail
        };
        Self { id: id.to_string(), regime, rows, worst_margin, tolerance, outcome }
    }

    pub fn passed(&self) -> bool {
        self.outcome == Outcome::Pass
    }

    /// One line per sampled time plus a summary line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let r = &self.regime;
        let _ = writeln!(
            s,
            "# {} regime {}: {:.6} < {:.6} ({}) worst_margin={:.6e} tolerance={:.6e} {}",
            self.id,
            r.label,
            r.lhs,
            r.rhs,
            r.holds(),
            self.worst_margin,
            self.tolerance,
            self.outcome.label()
        );
        for row in &self.rows {
            let _ = writeln!(
                s,
                "{} t={:.6} mean={:.9e} stderr={:.3e} bound={:.9e} margin={:.6e} {}",
                self.id,
                row.t,
                row.mean,
                row.stderr,
                row.bound,
                row.margin,
                if row.pass { "ok" } else { "VIOLATED" }
            );
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,mean,stderr,bound,margin,pass\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{:e},{:e},{:e},{:e},{}", r.t, r.mean, r.stderr, r.bound, r.margin, r.pass);
        }
        s
    }
}

fn require_members(stats: &EnsembleStats) -> Result<()> {
    if stats.noise_active && stats.members < 2 {
        return Err(Error::Insufficient("standard errors need at least 2 trajectories".into()));
    }
    Ok(())
}

/// `E‖u(t)‖^p ≤ ‖u₀‖^p`, and for `p = 2` also
/// `E‖u(t)‖² ≤ e^{−(2k − a l²)t} ‖u₀‖²`.
pub fn moment_report(stats: &EnsembleStats, p: f64, slack: f64) -> Result<Vec<BoundReport>> {
    require_members(stats)?;
    if p != stats.p {
        return Err(Error::InvalidParameter(format!("ensemble tracked p = {}, report asked for p = {p}", stats.p)));
    }
    let regime = RegimeCheck {
        label: "a*l^2 < k/(p-1)".into(),
        lhs: stats.noise_strength,
        rhs: stats.k / (p - 1.0),
    };
    let u0p = stats.u0_lpp;
    let mut out = vec![BoundReport::build("moment_p", regime.clone(), &stats.times, &stats.lpp, |_| u0p, slack * u0p)];
    if p == 2.0 {
        let rate = 2.0 * stats.k - stats.noise_strength;
        let u0sq = stats.u0_l2sq;
        out.push(BoundReport::build("moment_decay", regime, &stats.times, &stats.l2sq, |t| (-rate * t).exp() * u0sq, 0.0));
    }
    Ok(out)
}

/// `∫₀ᵗ E‖u_x‖² ds ≤ ‖u₀‖²` and
/// `E‖u(t)‖² + 2∫₀ᵗ e^{(2k − a l²)(s − t)} E‖u_x(s)‖² ds ≤ ‖u₀‖²`.
pub fn dissipation_report(stats: &EnsembleStats, slack: f64) -> Result<Vec<BoundReport>> {
    require_members(stats)?;
    let regime = RegimeCheck { label: "a*l^2 < k".into(), lhs: stats.noise_strength, rhs: stats.k };
    let u0sq = stats.u0_l2sq;
    Ok(vec![
        BoundReport::build("dissipation", regime.clone(), &stats.times, &stats.dissipation, |_| u0sq, slack * u0sq),
        BoundReport::build("dissipation_weighted", regime, &stats.times, &stats.weighted_energy, |_| u0sq, slack * u0sq),
    ])
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailReport {
    pub eps: f64,
    pub regime: RegimeCheck,
    pub radii: Vec<f64>,
    /// `sup_t E∫_{|x|≥N} u²` per radius.
    pub sup_mean: Vec<f64>,
    /// `sup_t (mean + 3·stderr)` per radius.
    pub sup_inflated: Vec<f64>,
    pub n_star: Option<f64>,
    pub monotone: bool,
    pub outcome: Outcome,
}

impl TailReport {
    pub fn passed(&self) -> bool {
        self.outcome == Outcome::Pass
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let r = &self.regime;
        let _ = writeln!(
            s,
            "# tail eps={:e} regime {}: {:.6} < {:.6} ({}) N_star={} monotone={} {}",
            self.eps,
            r.label,
            r.lhs,
            r.rhs,
            r.holds(),
            self.n_star.map_or("none".to_string(), |n| n.to_string()),
            self.monotone,
            self.outcome.label()
        );
        for ((n, m), i) in self.radii.iter().zip(&self.sup_mean).zip(&self.sup_inflated) {
            let _ = writeln!(s, "tail N={n} sup_mean={m:.6e} sup_mean_plus_3se={i:.6e}");
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("N,sup_mean,sup_mean_plus_3se,below_eps\n");
        for ((n, m), i) in self.radii.iter().zip(&self.sup_mean).zip(&self.sup_inflated) {
            let _ = writeln!(s, "{n},{m:e},{i:e},{}", *i < self.eps);
        }
        s
    }
}

/// `sup` over sampled `t ≥ t_from` of mean and of mean + 3·stderr, per radius.
pub(crate) fn tail_sups(stats: &EnsembleStats, t_from: f64) -> (Vec<f64>, Vec<f64>) {
    let keep: Vec<usize> = (0..stats.times.len()).filter(|&i| stats.times[i] >= t_from - 1e-9).collect();
    stats
        .tail_curve
        .iter()
        .map(|s| {
            keep.iter().fold((0.0f64, 0.0f64), |(a, b), &i| (a.max(s.mean[i]), b.max(s.mean[i] + 3.0 * s.stderr[i])))
        })
        .unzip()
}

/// Smallest configured radius whose inflated tail stays below `threshold`
/// for all sampled `t ≥ t_from`.
pub fn smallest_tail_radius(stats: &EnsembleStats, threshold: f64, t_from: f64) -> Option<f64> {
    let (_, inflated) = tail_sups(stats, t_from);
    stats.tail_radii.iter().zip(&inflated).find(|(_, v)| **v < threshold).map(|(r, _)| *r)
}

/// Smallest configured `N` with `sup_t E∫_{|x|≥N} u² < ε` (3·stderr inflated).
pub fn tail_report(stats: &EnsembleStats, eps: f64) -> Result<TailReport> {
    require_members(stats)?;
    if stats.tail_radii.is_empty() {
        return Err(Error::Insufficient("ensemble recorded no tail radii".into()));
    }
    let regime = RegimeCheck { label: "a*l^2 < 3k/7".into(), lhs: stats.noise_strength, rhs: 3.0 * stats.k / 7.0 };
    let (sup_mean, sup_inflated) = tail_sups(stats, 0.0);
    let monotone = sup_mean.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-300);
    let n_star = smallest_tail_radius(stats, eps, 0.0);
    let outcome = if !regime.holds() {
        Outcome::OutOfRegime
    } else if n_star.is_some() && monotone {
        Outcome::Pass
    } else {
        Outcome::Fail
    };
    Ok(TailReport { eps, regime, radii: stats.tail_radii.clone(), sup_mean, sup_inflated, n_star, monotone, outcome })
}
