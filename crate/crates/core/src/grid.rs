//! Uniform mesh on `[-L, L]` and the nodal fields living on it.
//!
//! The boundary nodes `x_0 = -L` and `x_{n+1} = L` are implicit; every field
//! vanishes there. All integrals are rectangle sums over the interior nodes,
//! which is the inner product under which the sine basis is exactly
//! orthonormal.

use crate::{Error, Result};

/// Sup of `|θ'|` for the quintic smoothstep cutoff.
pub const CUTOFF_SLOPE_BOUND: f64 = 3.75;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    half_width: f64,
    n: usize,
}

impl Grid {
    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if !(half_width >= 1.0) || !half_width.is_finite() {
            return Err(Error::DomainTooSmall(half_width));
        }
        if n < 3 {
            return Err(Error::TooFewPoints(n));
        }
        Ok(Self { half_width, n })
    }

    /// Half-width `L`.
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Number of interior nodes.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / (self.n + 1) as f64
    }

    /// Position of interior node `i` (zero-based, so `node(0) = -L + dx`).
    pub fn node(&self, i: usize) -> f64 {
        -self.half_width + (i + 1) as f64 * self.dx()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.node(i))
    }
}

/// Convenience wrapper for [`Grid::new`].
pub fn make_grid(half_width: f64, n: usize) -> Result<Grid> {
    Grid::new(half_width, n)
}

/// Interior nodal values of a function on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    values: Vec<f64>,
    grid: Grid,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "field has {} values but grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite value at node {i}")));
        }
        Ok(Self { values, grid })
    }

    /// Builds a field without the finiteness scan. Callers guarantee length.
    pub(crate) fn from_vec_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { values, grid }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { values: vec![0.0; grid.len()], grid }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        Self { values: grid.nodes().map(f).collect(), grid }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { values: self.values.iter().map(|v| c * v).collect(), grid: self.grid }
    }

    fn check_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &Field) -> Result<Self> {
        self.check_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Self { values, grid: self.grid })
    }

    pub fn sub(&self, other: &Field) -> Result<Self> {
        self.check_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Self { values, grid: self.grid })
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Field) -> Result<Self> {
        self.check_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        Ok(Self { values, grid: self.grid })
    }

    /// Discrete inner product `Σ f_i g_i dx`.
    pub fn dot(&self, other: &Field) -> Result<f64> {
        self.check_grid(other)?;
        Ok(dot(&self.values, &other.values) * self.grid.dx())
    }

    /// `‖f‖₂`
    pub fn l2(&self) -> f64 {
        lp_norm_raw(&self.values, self.grid.dx(), 2.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn sum_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

/// `(Σ |f_i|^p dx)^{1/p}`; `p = ∞` gives the max-abs norm.
pub fn lp_norm(f: &Field, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidParameter(format!("L^p norm needs p >= 1, got {p}")));
    }
    Ok(lp_norm_raw(f.values(), f.grid().dx(), p))
}

pub(crate) fn lp_norm_raw(values: &[f64], dx: f64, p: f64) -> f64 {
    if p.is_infinite() {
        return values.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    if p == 2.0 {
        return (sum_sq(values) * dx).sqrt();
    }
    let s: f64 = values.iter().map(|v| v.abs().powf(p)).sum();
    (s * dx).powf(1.0 / p)
}

pub fn l2_norm(f: &Field) -> f64 {
    lp_norm_raw(f.values(), f.grid().dx(), 2.0)
}

/// Squared `L²` norm of the discrete derivative.
///
/// Centered differences at interior nodes, one-sided differences against the
/// implicit zero at the two boundary nodes, trapezoid weights (half weight at
/// the boundary nodes).
pub(crate) fn h1_seminorm_sq_raw(v: &[f64], dx: f64) -> f64 {
    let n = v.len();
    let at = |i: isize| -> f64 {
        if i < 0 || i as usize >= n {
            0.0
        } else {
            v[i as usize]
        }
    };
    let mut s = 0.0;
    for i in 0..n as isize {
        let d = (at(i + 1) - at(i - 1)) / (2.0 * dx);
        s += d * d;
    }
    let left = v[0] / dx;
    let right = v[n - 1] / dx;
    s += 0.5 * (left * left + right * right);
    s * dx
}

pub fn h1_seminorm(f: &Field) -> f64 {
    h1_seminorm_sq_raw(f.values(), f.grid().dx()).sqrt()
}

/// `Σ_{|x_i| ≥ N} f_i² dx`.
pub fn tail_mass(f: &Field, radius: f64) -> Result<f64> {
    if radius.is_nan() || radius < 0.0 {
        return Err(Error::InvalidParameter(format!("tail radius must be >= 0, got {radius}")));
    }
    let g = f.grid();
    let s: f64 = f
        .values()
        .iter()
        .enumerate()
        .filter(|(i, _)| g.node(*i).abs() >= radius)
        .map(|(_, v)| v * v)
        .sum();
    Ok(s * g.dx())
}

/// `tail_mass` at every radius in `radii`, in one pass over the field.
pub fn tail_curve(f: &Field, radii: &[f64]) -> Result<Vec<f64>> {
    if radii.iter().any(|r| r.is_nan() || *r < 0.0) {
        return Err(Error::InvalidParameter("tail radii must be >= 0".into()));
    }
    let mut out = vec![0.0; radii.len()];
    tail_curve_raw(f.values(), f.grid(), radii, &mut out);
    Ok(out)
}

pub(crate) fn tail_curve_raw(v: &[f64], g: &Grid, radii: &[f64], out: &mut [f64]) {
    let n = v.len();
    let pairs = n.div_ceil(2);
    // prefix[m]: mass of the m outermost symmetric node pairs.
    let mut prefix = Vec::with_capacity(pairs + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for i in 0..pairs {
        let j = n - 1 - i;
        acc += if i == j { v[i] * v[i] } else { v[i] * v[i] + v[j] * v[j] };
        prefix.push(acc);
    }
    for (o, &r) in out.iter_mut().zip(radii) {
        let guess = ((g.half_width() - r) / g.dx()).floor().clamp(0.0, pairs as f64) as usize;
        let mut m = guess;
        while m < pairs && g.node(m).abs() >= r {
            m += 1;
        }
        while m > 0 && g.node(m - 1).abs() < r {
            m -= 1;
        }
        *o = prefix[m] * g.dx();
    }
}

/// Smooth monotone cutoff: 0 on `|s| ≤ ½`, 1 on `|s| ≥ 1`, quintic
/// smoothstep `6t⁵ − 15t⁴ + 10t³` in `t = 2|s| − 1` between.
pub fn theta(s: f64) -> f64 {
    let a = s.abs();
    if a <= 0.5 {
        0.0
    } else if a >= 1.0 {
        1.0
    } else {
        let t = 2.0 * a - 1.0;
        (t * t * t * (t * (6.0 * t - 15.0) + 10.0)).min(1.0)
    }
}

/// `θ_m(x) = θ(x / m)` sampled on the grid.
pub fn cutoff_theta(m: f64, grid: Grid) -> Result<Field> {
    if !(m > 0.0) {
        return Err(Error::InvalidParameter(format!("cutoff scale must be positive, got {m}")));
    }
    Ok(Field::from_fn(grid, |x| theta(x / m)))
}
