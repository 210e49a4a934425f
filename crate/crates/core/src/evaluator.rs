//! Policy evaluation: the linear Feynman-Kac equation of a fixed Markov strategy,
//!
//! ```text
//! c(u(x)) Φ'(x) − (δ+λ) Φ(x) + λ ∫_0^{ρ} Φ(x − r(y,u)) dF(y) + λ ∫_ρ^∞ w(x, r(y,u) − x) dF(y) = 0,
//! ```
//!
//! discretized on the upwind cell of each node: forward where the net premium is
//! positive, backward where it is negative, no derivative where it vanishes. On that
//! cell the non-derivative terms are averaged over both end points with the control of
//! the node (a box scheme, second order for smooth strategies). Where the drift is too
//! weak for the box rows to stay monotone, the terms are taken at the node itself
//! (plain first-order upwinding). Each row depends on the control at its own node only.
//!
//! The claim integrals couple each node to every node below it, so the system is
//! assembled densely and solved by LU. Every equation row is weakly diagonally
//! dominant with nonnegative off-diagonal entries, which gives a discrete maximum
//! principle.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hjb::Strategy;
use crate::model::RiskModel;
use crate::quadrature::{ruin_integral, survival_integral, survival_weights, Grid, GridFunction};

/// Condition imposed at the top node when the drift there points out of the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpperBoundary {
    /// Dirichlet value `Φ(x_hi)`.
    Value(f64),
    /// Exponential tail `Φ(x) ∝ e^{−γx}` across the last cell, `Φ_N = e^{−γh} Φ_{N−1}`.
    Decay(f64),
}

/// Boundary data for [`policy_evaluate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryData {
    /// `Φ(0)`, imposed only where the net premium at the lowest node is negative.
    pub lower: f64,
    /// Imposed only where the net premium at the top node is positive.
    pub upper: UpperBoundary,
}

impl BoundaryData {
    /// Lower value `w(0, 0)`: with negative drift at zero the reserve is ruined at once
    /// without a jump.
    pub fn smooth_ruin(model: &RiskModel, upper: UpperBoundary) -> Self {
        Self {
            lower: model.penalty.at_origin(),
            upper,
        }
    }
}

/// `c(u)·df − (δ+λ)·f(x) + λ·survival(f, x, u) + λ·ruin(w, x, u)`.
pub fn hamiltonian(f: &GridFunction, df: f64, x: f64, u: f64, model: &RiskModel) -> Result<f64> {
    let p = &model.params;
    let survival = survival_integral(f, x, u, &model.claims, &model.retention)?;
    let ruin = ruin_integral(&model.penalty, x, u, &model.claims, &model.retention)?;
    Ok(model.premium(u) * df - (p.delta + p.lambda) * f.eval(x) + p.lambda * (survival + ruin))
}

/// Upwind difference at node `i` for drift `c`. Below the lowest node the reserve is
/// ruined smoothly, so the ghost value is `w(0, 0)`; at the top node only the backward
/// difference exists.
pub(crate) fn upwind_difference(f: &GridFunction, i: usize, c: f64, ghost_below: f64) -> f64 {
    let grid = f.grid();
    let v = f.values();
    let h = grid.spacing();
    if c > 0.0 {
        if i < grid.last() {
            (v[i + 1] - v[i]) / h
        } else {
            (v[i] - v[i - 1]) / h
        }
    } else if c < 0.0 {
        if i > 0 {
            (v[i] - v[i - 1]) / h
        } else {
            (v[0] - ghost_below) / h
        }
    } else {
        0.0
    }
}

/// Neighbour across the upwind cell of node `i` when the box row is monotone there.
pub(crate) fn box_partner(grid: &Grid, i: usize, c: f64, decay: f64) -> Option<usize> {
    if c.abs() / grid.spacing() < 0.5 * decay {
        return None;
    }
    if c > 0.0 && i < grid.last() {
        Some(i + 1)
    } else if c < 0.0 && i > 0 {
        Some(i - 1)
    } else {
        None
    }
}

/// The discrete Hamiltonian of row `i` for control `u`, the quantity that
/// [`policy_evaluate`] sets to zero.
pub fn node_hamiltonian(f: &GridFunction, i: usize, u: f64, model: &RiskModel) -> Result<f64> {
    let grid = f.grid();
    let x = grid.point(i);
    let c = model.premium(u);
    let df = upwind_difference(f, i, c, model.penalty.at_origin());
    match box_partner(grid, i, c, model.params.delta + model.params.lambda) {
        Some(j) => {
            let near = hamiltonian(f, 0.0, x, u, model)?;
            let far = hamiltonian(f, 0.0, grid.point(j), u, model)?;
            Ok(c * df + 0.5 * (near + far))
        }
        None => hamiltonian(f, df, x, u, model),
    }
}

/// Solves the discretized Feynman-Kac equation for `strategy`.
pub fn policy_evaluate(strategy: &Strategy, model: &RiskModel, boundary: BoundaryData) -> Result<GridFunction> {
    let grid = *strategy.grid();
    let n = grid.n_points;
    let last = grid.last();
    let h = grid.spacing();
    let lambda = model.params.lambda;
    let decay = model.params.delta + lambda;
    let bound = model.penalty.bound();

    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    let mut equation_rows = Vec::with_capacity(n);
    for i in 0..n {
        let u = strategy.controls()[i];
        let c = model.premium(u);
        if i == 0 && c < 0.0 {
            a[(0, 0)] = 1.0;
            b[0] = boundary.lower;
            continue;
        }
        if i == last && c > 0.0 {
            match boundary.upper {
                UpperBoundary::Value(v) => {
                    a[(i, i)] = 1.0;
                    b[i] = v;
                }
                UpperBoundary::Decay(gamma) => {
                    a[(i, i)] = 1.0;
                    a[(i, i - 1)] = -(-gamma * h).exp();
                }
            }
            continue;
        }
        let x = grid.point(i);
        let points = match box_partner(&grid, i, c, decay) {
            Some(j) => vec![(x, i), (grid.point(j), j)],
            None => vec![(x, i)],
        };
        let share = 1.0 / points.len() as f64;
        for (x, k) in points {
            a[(i, k)] -= share * decay;
            survival_weights(&grid, x, u, &model.claims, |j, w| a[(i, j)] += share * lambda * w);
            b[i] -= share * lambda * ruin_integral(&model.penalty, x, u, &model.claims, &model.retention)?;
        }
        if c > 0.0 {
            a[(i, i)] -= c / h;
            a[(i, i + 1)] += c / h;
        } else if c < 0.0 {
            a[(i, i)] += c / h;
            a[(i, i - 1)] -= c / h;
        }
        equation_rows.push(i);
    }

    let offending: Vec<usize> = equation_rows
        .iter()
        .copied()
        .filter(|&i| {
            let diag = a[(i, i)];
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum();
            !(diag < 0.0 && -diag >= off * (1.0 - 1e-12))
        })
        .collect();
    if !offending.is_empty() {
        return Err(Error::Evaluation {
            nodes: offending,
            reason: "assembled rows are not diagonally dominant".into(),
        });
    }
    if let Some(i) = b.iter().position(|v| !v.is_finite()) {
        return Err(Error::Evaluation {
            nodes: vec![i],
            reason: "non-finite right-hand side".into(),
        });
    }

    let solution = a.lu().solve(&b).ok_or_else(|| Error::Evaluation {
        nodes: Vec::new(),
        reason: "singular linear system".into(),
    })?;
    let mut values: Vec<f64> = solution.iter().copied().collect();
    let bad: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_finite() || **v < -1e-9 * bound.max(1.0))
        .map(|(i, _)| i)
        .collect();
    if !bad.is_empty() {
        return Err(Error::Evaluation {
            nodes: bad,
            reason: "solution violates the discrete maximum principle".into(),
        });
    }
    for v in &mut values {
        *v = v.clamp(0.0, bound);
    }
    GridFunction::new(grid, values)
}
