//! Grids, grid functions and the two claim integrals of the generator.
//!
//! For a reserve `x` and retention `u` the generator needs
//!
//! ```text
//! survival: ∫_0^{ρ(x,u)} f(x − u·y) dF(y)      ruin: ∫_{ρ(x,u)}^∞ w(x, u·y − x) dF(y)
//! ```
//!
//! Grid functions are piecewise linear, so the survival integral is a finite sum of
//! panel moments `∫ dF` and `∫ y dF`, both available in closed form for every claim
//! law in [`ClaimDistribution`]. [`survival_integral_adaptive`] integrates the same
//! quantity with adaptive Gauss-Legendre panels and serves as an independent route.
//! The ruin integral maps the claim tail onto `v ∈ [0, ∞)` through
//! `S(y) = S(ρ)·e^{−v}` and is integrated adaptively; the omitted tail beyond the
//! truncation point is bounded by `M·S(ρ)·e^{−v_max}`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{ClaimDistribution, Penalty, Retention};

/// Default absolute tolerance for adaptive quadrature.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Panels whose remaining claim mass falls below this are skipped.
const NEGLIGIBLE_MASS: f64 = 1e-17;

/// Uniform reserve grid `x_i = x_lo + i·h`, `i = 0..n_points`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub x_lo: f64,
    pub x_hi: f64,
    pub n_points: usize,
}

impl Grid {
    pub fn new(x_lo: f64, x_hi: f64, n_points: usize) -> Result<Self> {
        let g = Self {
            x_lo,
            x_hi,
            n_points,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_lo.is_finite() && self.x_lo >= 0.0) {
            return Err(invalid("x_lo", format!("must be finite and >= 0, got {}", self.x_lo)));
        }
        if !(self.x_hi.is_finite() && self.x_hi > self.x_lo) {
            return Err(invalid("x_hi", format!("must exceed x_lo = {}, got {}", self.x_lo, self.x_hi)));
        }
        if self.n_points < 3 {
            return Err(invalid("n_points", format!("need at least 3 points, got {}", self.n_points)));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        (self.x_hi - self.x_lo) / (self.n_points - 1) as f64
    }

    /// Index of the last node.
    pub fn last(&self) -> usize {
        self.n_points - 1
    }

    pub fn point(&self, i: usize) -> f64 {
        if i == self.last() {
            self.x_hi
        } else {
            self.x_lo + i as f64 * self.spacing()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.point(i)).collect()
    }

    /// Cell `j` with `x ∈ [x_j, x_{j+1}]` and the local coordinate `t ∈ [0, 1]`.
    /// `x` is clamped to the grid range.
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let h = self.spacing();
        let s = ((x - self.x_lo) / h).clamp(0.0, self.last() as f64);
        let j = (s.floor() as usize).min(self.last() - 1);
        (j, s - j as f64)
    }
}

/// Values on a [`Grid`] with linear interpolation. Below `x_lo` the function is zero,
/// above `x_hi` it keeps its last value.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.n_points
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid("values", format!("non-finite value at node {i}")));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.points().into_iter().map(f).collect();
        Self::new(grid, values)
    }

    pub fn constant(grid: Grid, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.n_points])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x < self.grid.x_lo {
            return 0.0;
        }
        if x >= self.grid.x_hi {
            return self.values[self.grid.last()];
        }
        let (j, t) = self.grid.locate(x);
        self.values[j] + t * (self.values[j + 1] - self.values[j])
    }

    pub fn sup_distance(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

// ---------------------------------------------------------------------------
// Gauss-Legendre machinery
// ---------------------------------------------------------------------------

const GL_ORDER: usize = 10;

fn gauss_legendre() -> &'static ([f64; GL_ORDER], [f64; GL_ORDER]) {
    static RULE: OnceLock<([f64; GL_ORDER], [f64; GL_ORDER])> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_ORDER;
        let mut nodes = [0.0; GL_ORDER];
        let mut weights = [0.0; GL_ORDER];
        for i in 0..n.div_ceil(2) {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p1, mut p2) = (1.0, 0.0);
                for k in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    p1 = ((2 * k + 1) as f64 * z * p2 - k as f64 * p3) / (k + 1) as f64;
                }
                dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = 2.0 / ((1.0 - z * z) * dp * dp);
            weights[n - 1 - i] = weights[i];
        }
        (nodes, weights)
    })
}

fn gl_panel(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> f64 {
    let (nodes, weights) = gauss_legendre();
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    half * nodes
        .iter()
        .zip(weights)
        .map(|(t, w)| w * f(mid + half * t))
        .sum::<f64>()
}

const MAX_DEPTH: u32 = 48;

/// Adaptive Gauss-Legendre integration of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_gauss_legendre(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
) -> std::result::Result<f64, String> {
    if b <= a {
        return Ok(0.0);
    }
    let whole = gl_panel(&mut f, a, b);
    refine(&mut f, a, b, whole, tol, MAX_DEPTH)
}

fn refine(
    f: &mut impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> std::result::Result<f64, String> {
    let m = 0.5 * (a + b);
    let left = gl_panel(f, a, m);
    let right = gl_panel(f, m, b);
    let sum = left + right;
    if !sum.is_finite() {
        return Err(format!("non-finite integrand on [{a}, {b}]"));
    }
    if (sum - whole).abs() <= tol {
        return Ok(sum);
    }
    if depth == 0 {
        return Err(format!("no convergence on [{a}, {b}] after {MAX_DEPTH} bisections"));
    }
    Ok(refine(f, a, m, left, 0.5 * tol, depth - 1)? + refine(f, m, b, right, 0.5 * tol, depth - 1)?)
}

// ---------------------------------------------------------------------------
// Survival integral
// ---------------------------------------------------------------------------

/// Calls `visit(node, weight)` so that `Σ weight·f[node] = ∫_0^{ρ(x,u)} f(x − u·y) dF(y)`
/// for every piecewise linear `f` on `grid`. A node may be visited twice.
pub fn survival_weights(
    grid: &Grid,
    x: f64,
    u: f64,
    dist: &ClaimDistribution,
    mut visit: impl FnMut(usize, f64),
) {
    if x < grid.x_lo {
        return;
    }
    let x = x.min(grid.x_hi);
    if u <= 0.0 {
        // full reinsurance: the reserve is untouched by claims
        let (j, t) = grid.locate(x);
        visit(j, 1.0 - t);
        visit(j + 1, t);
        return;
    }
    let h = grid.spacing();
    let (mut j, t) = grid.locate(x);
    if t == 0.0 {
        if j == 0 {
            return;
        }
        j -= 1;
    }
    let mut s_lo = 1.0;
    let mut m_lo = dist.mean();
    loop {
        let z_left = grid.point(j);
        let z_right = grid.point(j + 1);
        let y_hi = (x - z_left) / u;
        let s_hi = dist.survival(y_hi);
        let m_hi = dist.tail_first_moment(y_hi);
        let mass = s_lo - s_hi;
        let first = m_lo - m_hi;
        let w_left = ((z_right - x) * mass + u * first) / h;
        let w_right = ((x - z_left) * mass - u * first) / h;
        visit(j, w_left.max(0.0));
        visit(j + 1, w_right.max(0.0));
        if j == 0 || s_hi < NEGLIGIBLE_MASS {
            break;
        }
        j -= 1;
        s_lo = s_hi;
        m_lo = m_hi;
    }
}

/// `∫_0^{ρ(x,u)} f(x − r(y,u)) dF(y)` for a piecewise linear grid function, exact up to
/// rounding and the negligible-mass cutoff.
pub fn survival_integral(
    f: &GridFunction,
    x: f64,
    u: f64,
    dist: &ClaimDistribution,
    retention: &Retention,
) -> Result<f64> {
    match retention {
        Retention::Proportional => {}
    }
    let values = f.values();
    let mut acc = 0.0;
    survival_weights(f.grid(), x, u, dist, |j, w| acc += w * values[j]);
    if acc.is_finite() {
        Ok(acc)
    } else {
        Err(Error::QuadratureFailure {
            x,
            u,
            reason: "non-finite survival integral".into(),
        })
    }
}

/// The survival integral computed with adaptive Gauss-Legendre panels split at the
/// interpolation kinks, in the reserve variable `z = x − u·y`.
pub fn survival_integral_adaptive(
    f: &GridFunction,
    x: f64,
    u: f64,
    dist: &ClaimDistribution,
    tol: f64,
) -> Result<f64> {
    let grid = f.grid();
    if x < grid.x_lo {
        return Ok(0.0);
    }
    if u <= 0.0 {
        return Ok(f.eval(x));
    }
    let x = x.min(grid.x_hi);
    let fail = |reason: String| Error::QuadratureFailure { x, u, reason };
    let (top, t) = grid.locate(x);
    let n_panels = top + usize::from(t > 0.0);
    let panel_tol = tol / n_panels.max(1) as f64;
    let mut acc = 0.0;
    for j in 0..n_panels {
        let a = grid.point(j);
        let b = grid.point(j + 1).min(x);
        let kernel = |z: f64| f.eval(z) * dist.density((x - z) / u) / u;
        acc += adaptive_gauss_legendre(kernel, a, b, panel_tol).map_err(fail)?;
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// Ruin integral
// ---------------------------------------------------------------------------

/// Breakpoints of the initial partition of the transformed tail variable.
const TAIL_BREAKS: [f64; 9] = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0];

/// `∫_{ρ(x,u)}^∞ w(x, r(y,u) − x) dF(y)`.
pub fn ruin_integral(
    w: &Penalty,
    x: f64,
    u: f64,
    dist: &ClaimDistribution,
    retention: &Retention,
) -> Result<f64> {
    ruin_integral_tol(w, x, u, dist, retention, DEFAULT_TOL)
}

pub fn ruin_integral_tol(
    w: &Penalty,
    x: f64,
    u: f64,
    dist: &ClaimDistribution,
    retention: &Retention,
    tol: f64,
) -> Result<f64> {
    let rho = retention.inverse(x, u);
    let tail = dist.survival(rho);
    if tail == 0.0 {
        return Ok(0.0);
    }
    if let Some(k) = w.constant_value() {
        return Ok(k * tail);
    }
    let bound = w.bound();
    // beyond v_max the integrand is at most M·e^{-v}
    let v_max = (bound * tail / tol).ln().max(1.0);
    let mut bad = None;
    let mut integrand = |v: f64| {
        let y = dist.tail_point(rho, v);
        let deficit = (retention.retain(y, u) - x).max(0.0);
        match w.eval_checked(x, deficit) {
            Ok(p) => p * (-v).exp(),
            Err(e) => {
                bad.get_or_insert(e);
                0.0
            }
        }
    };
    let mut acc = 0.0;
    let mut a = 0.0;
    for &b in TAIL_BREAKS[1..].iter().chain(std::iter::once(&f64::INFINITY)) {
        let b = b.min(v_max);
        if b <= a {
            continue;
        }
        acc += adaptive_gauss_legendre(&mut integrand, a, b, tol / 16.0)
            .map_err(|reason| Error::QuadratureFailure { x, u, reason })?;
        a = b;
        if a >= v_max {
            break;
        }
    }
    if let Some(e) = bad {
        return Err(e);
    }
    let value = tail * acc;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::QuadratureFailure {
            x,
            u,
            reason: "non-finite ruin integral".into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::W2_CAP;

    fn exp1() -> ClaimDistribution {
        ClaimDistribution::exponential(1.0).unwrap()
    }

    fn par3() -> ClaimDistribution {
        ClaimDistribution::pareto(3.0).unwrap()
    }

    fn grid() -> Grid {
        Grid::new(0.0, 14.0, 141).unwrap()
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let r = adaptive_gauss_legendre(|x| x.powi(19), 0.0, 1.0, 1e-14).unwrap();
        assert!((r - 0.05).abs() < 1e-14);
        let r = adaptive_gauss_legendre(|x| x.exp(), -1.0, 2.0, 1e-12).unwrap();
        assert!((r - (2f64.exp() - (-1f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn grid_function_extension() {
        let f = GridFunction::from_fn(grid(), |x| x + 1.0).unwrap();
        assert_eq!(f.eval(-0.5), 0.0);
        assert_eq!(f.eval(20.0), 15.0);
        assert!((f.eval(3.33) - 4.33).abs() < 1e-13);
        for (i, x) in grid().points().into_iter().enumerate() {
            assert!((f.eval(x) - f.values()[i]).abs() < 1e-14);
        }
        assert!(GridFunction::new(grid(), vec![0.0; 3]).is_err());
        assert!(Grid::new(0.0, 14.0, 2).is_err());
        assert!(Grid::new(3.0, 1.0, 10).is_err());
    }

    #[test]
    fn survival_of_constant_one_is_cdf() {
        let one = GridFunction::constant(grid(), 1.0).unwrap();
        for x in [0.1, 1.0, 2.0, 7.35] {
            let s = survival_integral(&one, x, 1.0, &exp1(), &Retention::Proportional).unwrap();
            assert!((s - (1.0 - (-x).exp())).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn survival_of_zero_is_zero() {
        let zero = GridFunction::constant(grid(), 0.0).unwrap();
        for u in [0.0, 0.3, 1.0] {
            assert_eq!(survival_integral(&zero, 4.0, u, &par3(), &Retention::Proportional).unwrap(), 0.0);
        }
    }

    #[test]
    fn survival_of_identity() {
        // ∫_0^2 (2 − y) e^{−y} dy = 1 + e^{−2}
        let id = GridFunction::from_fn(grid(), |x| x).unwrap();
        let exact = 1.0 + (-2f64).exp();
        let s = survival_integral(&id, 2.0, 1.0, &exp1(), &Retention::Proportional).unwrap();
        assert!((s - exact).abs() < 1e-8);
        let s = survival_integral_adaptive(&id, 2.0, 1.0, &exp1(), 1e-10).unwrap();
        assert!((s - exact).abs() < 1e-8);
    }

    #[test]
    fn survival_full_reinsurance_is_point_value() {
        let f = GridFunction::from_fn(grid(), |x| (-x).exp()).unwrap();
        let s = survival_integral(&f, 3.3, 0.0, &exp1(), &Retention::Proportional).unwrap();
        assert!((s - f.eval(3.3)).abs() < 1e-15);
    }

    #[test]
    fn ruin_integral_examples() {
        let r = ruin_integral(&Penalty::W1, 2.0, 1.0, &exp1(), &Retention::Proportional).unwrap();
        assert!((r - (-2f64).exp()).abs() < 1e-15);
        for w in [Penalty::W1, Penalty::W2] {
            let r = ruin_integral(&w, 2.0, 0.0, &exp1(), &Retention::Proportional).unwrap();
            assert_eq!(r, 0.0);
        }
        // ∫_0^∞ 0.5 (y+1)^2 · 3 (1+y)^{-4} dy = 1.5 without the cap; with the cap at
        // 0.5 (1+y)^2 = C the tail beyond s = 1+y = sqrt(2C) contributes C s^{-3} instead
        let r = ruin_integral(&Penalty::W2, 0.0, 1.0, &par3(), &Retention::Proportional).unwrap();
        let s = (2.0 * W2_CAP).sqrt();
        let capped = 1.5 - 1.5 / s + W2_CAP / s.powi(3);
        assert!((r - capped).abs() < 2e-9, "{r} vs {capped}");
        assert!((r - 1.5).abs() < 1e-5);
        let fine = ruin_integral_tol(&Penalty::W2, 0.0, 1.0, &par3(), &Retention::Proportional, 1e-12).unwrap();
        assert!((fine - capped).abs() < 1e-11, "{fine} vs {capped}");
    }

    #[test]
    fn ruin_integral_w2_exponential_closed_form() {
        // E[(x+.5)(uY − x + 1)^2; uY > x] for Y ~ Exp(1): with D = uY − x | uY > x ~ Exp(1/u),
        // E[(D+1)^2] = 2u^2 + 2u + 1.
        for (x, u) in [(1.0f64, 0.5f64), (3.0, 1.0), (0.2, 0.9)] {
            let exact = (x + 0.5) * (2.0 * u * u + 2.0 * u + 1.0) * (-x / u).exp();
            let r = ruin_integral(&Penalty::W2, x, u, &exp1(), &Retention::Proportional).unwrap();
            assert!((r - exact).abs() < 1e-8, "x={x} u={u}: {r} vs {exact}");
        }
    }

    #[test]
    fn ruin_integral_custom_out_of_bounds_is_rejected() {
        let w = Penalty::custom(|_, d| d, 1.0).unwrap();
        let r = ruin_integral(&w, 1.0, 1.0, &exp1(), &Retention::Proportional);
        assert!(matches!(r, Err(Error::PenaltyOutOfBounds { .. })));
    }
}
