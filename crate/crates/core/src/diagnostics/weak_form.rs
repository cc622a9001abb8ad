use crate::grid::{dot, Field};
use crate::integrator::{SimConfig, Trajectory};
use crate::{Error, Result};

/// Largest deviation along the trajectory from the integrated weak identity
///
/// ```text
/// ⟨u(t), φ⟩ = ⟨u₀, φ⟩ + ∫₀ᵗ ⟨u, φ''⟩ − k⟨u, φ⟩ + ½⟨u², φ'⟩ ds + ∫₀ᵗ ⟨σ(u) dW, φ⟩
/// ```
///
/// with left-point time sums and centered differences for `φ'`, `φ''`.
/// Needs every step retained and the noise increments recorded.
pub fn weak_form_residual(traj: &Trajectory, phi: &Field, cfg: &SimConfig) -> Result<f64> {
    let g = *cfg.grid();
    if *phi.grid() != g {
        return Err(Error::GridMismatch);
    }
    let v = phi.values();
    let n = v.len();
    let scale = phi.max_abs();
    if [v[0], v[1], v[n - 2], v[n - 1]].iter().any(|x| x.abs() > 1e-12 * scale) {
        return Err(Error::InvalidParameter("test function must vanish near the boundary".into()));
    }
    let noise = traj
        .noise
        .as_ref()
        .ok_or_else(|| Error::Insufficient("trajectory did not record its noise increments".into()))?;
    let steps = traj.states.len().saturating_sub(1);
    if steps == 0 || noise.steps() != steps || (traj.states[1].0 - cfg.dt()).abs() > 1e-12 {
        return Err(Error::Insufficient("weak form needs the state at every step".into()));
    }
    let dx = g.dx();
    let at = |i: isize| if i < 0 || i as usize >= n { 0.0 } else { v[i as usize] };
    let d1: Vec<f64> = (0..n as isize).map(|i| (at(i + 1) - at(i - 1)) / (2.0 * dx)).collect();
    let d2: Vec<f64> = (0..n as isize).map(|i| (at(i + 1) - 2.0 * at(i) + at(i - 1)) / (dx * dx)).collect();
    let k = cfg.k();
    let dt = cfg.dt();
    let sigma = cfg.sigma();
    let noise_on = cfg.noise_active();
    let start = dot(traj.states[0].1.values(), v) * dx;
    let mut drift = 0.0;
    let mut stoch = 0.0;
    let mut worst: f64 = 0.0;
    let mut sq = vec![0.0; n];
    let mut sdw = vec![0.0; n];
    for m in 0..steps {
        let u = traj.states[m].1.values();
        for (s, x) in sq.iter_mut().zip(u) {
            *s = x * x;
        }
        drift += dt * dx * (dot(u, &d2) - k * dot(u, v) + 0.5 * dot(&sq, &d1));
        if noise_on {
            let dw = cfg.noise().assemble(noise.draws(m))?;
            for ((o, x), w) in sdw.iter_mut().zip(u).zip(dw.values()) {
                *o = sigma.eval(*x) * w;
            }
            stoch += dot(&sdw, v) * dx;
        }
        let now = dot(traj.states[m + 1].1.values(), v) * dx;
        worst = worst.max((now - start - drift - stoch).abs());
    }
    Ok(worst)
}
