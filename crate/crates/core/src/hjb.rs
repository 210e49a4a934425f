//! Policy improvement, the policy-iteration loop and the HJB residual.
//!
//! Improvement minimizes the same discrete Hamiltonian that [`policy_evaluate`] solves,
//! node by node, so each evaluation of an improved strategy is pointwise no larger than
//! the previous one whenever the boundary data do not increase.

use rayon::prelude::*;
use thiserror::Error;

use crate::asymptotics::adjustment_coefficient;
use crate::error::{invalid, Error, Result};
use crate::evaluator::{node_hamiltonian, policy_evaluate, BoundaryData, UpperBoundary};
use crate::model::RiskModel;
use crate::quadrature::{Grid, GridFunction};
use crate::simulator::{horizon_for_tolerance, mc_estimate, McEstimate};

/// Markov control `u(x)` given by its values at the grid nodes. Between nodes it is
/// interpolated linearly, outside the grid it is held constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    grid: Grid,
    controls: Vec<f64>,
}

impl Strategy {
    pub fn new(grid: Grid, controls: Vec<f64>) -> Result<Self> {
        if controls.len() != grid.n_points {
            return Err(Error::GridMismatch(format!(
                "{} controls for a grid of {} points",
                controls.len(),
                grid.n_points
            )));
        }
        if let Some((i, u)) = controls.iter().enumerate().find(|(_, u)| !(0.0..=1.0).contains(*u)) {
            return Err(invalid("controls", format!("control {u} at node {i} is outside [0, 1]")));
        }
        Ok(Self { grid, controls })
    }

    pub fn constant(grid: Grid, u: f64) -> Result<Self> {
        Self::new(grid, vec![u; grid.n_points])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn controls(&self) -> &[f64] {
        &self.controls
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (j, t) = self.grid.locate(x);
        self.controls[j] + t * (self.controls[j + 1] - self.controls[j])
    }
}

/// Candidate controls for the pointwise minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlGrid {
    candidates: Vec<f64>,
    /// Golden-section refinement tolerance around the best candidate.
    refine_tol: Option<f64>,
}

impl ControlGrid {
    /// `n` uniform candidates on `[0, 1]` with golden-section refinement to `1e-4`.
    /// A single candidate means the singleton `{1}` (no reinsurance).
    pub fn uniform(n: usize) -> Result<Self> {
        match n {
            0 => Err(invalid("control_grid_size", "must be at least 1")),
            1 => Ok(Self::singleton(1.0)),
            _ => Ok(Self {
                candidates: (0..n).map(|k| k as f64 / (n - 1) as f64).collect(),
                refine_tol: Some(1e-4),
            }),
        }
    }

    pub fn singleton(u: f64) -> Self {
        Self {
            candidates: vec![u],
            refine_tol: None,
        }
    }

    /// Explicit candidate set without refinement.
    pub fn discrete(mut candidates: Vec<f64>) -> Result<Self> {
        if candidates.is_empty() || candidates.iter().any(|u| !(0.0..=1.0).contains(u)) {
            return Err(invalid("controls", "candidates must be a nonempty subset of [0, 1]"));
        }
        candidates.sort_by(f64::total_cmp);
        candidates.dedup();
        Ok(Self {
            candidates,
            refine_tol: None,
        })
    }

    pub fn candidates(&self) -> &[f64] {
        &self.candidates
    }
}

impl Default for ControlGrid {
    fn default() -> Self {
        Self::uniform(101).expect("101 candidates")
    }
}

fn ties(best: f64) -> f64 {
    1e-12 * (1.0 + best.abs())
}

/// Minimizes the discrete Hamiltonian at node `i`. Ties go to the larger control,
/// and the current control is kept unless something is strictly better.
fn minimize_node(
    phi: &GridFunction,
    i: usize,
    model: &RiskModel,
    controls: &ControlGrid,
    current: Option<f64>,
) -> Result<(f64, f64)> {
    let h = |u: f64| node_hamiltonian(phi, i, u, model);
    let cands = &controls.candidates;
    let mut best_k = cands.len() - 1;
    let mut best = h(cands[best_k])?;
    for k in (0..cands.len() - 1).rev() {
        let v = h(cands[k])?;
        if v < best - ties(best) {
            best = v;
            best_k = k;
        }
    }
    let mut best_u = cands[best_k];

    if let Some(tol) = controls.refine_tol {
        let lo = cands[best_k.saturating_sub(1)];
        let hi = cands[(best_k + 1).min(cands.len() - 1)];
        let ratio = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (lo, hi);
        let mut c = b - ratio * (b - a);
        let mut d = a + ratio * (b - a);
        let mut fc = h(c)?;
        let mut fd = h(d)?;
        while b - a > tol {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - ratio * (b - a);
                fc = h(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + ratio * (b - a);
                fd = h(d)?;
            }
        }
        let (u, v) = if fc < fd { (c, fc) } else { (d, fd) };
        if v < best - ties(best) {
            best = v;
            best_u = u;
        }
    }

    if let Some(u) = current {
        let v = h(u)?;
        if v <= best + ties(best) {
            return Ok((u, v));
        }
    }
    Ok((best_u, best))
}

fn improve_with_minima(
    phi: &GridFunction,
    model: &RiskModel,
    controls: &ControlGrid,
    current: Option<&Strategy>,
) -> Result<(Strategy, Vec<f64>)> {
    let grid = *phi.grid();
    let results = (0..grid.n_points)
        .into_par_iter()
        .map(|i| minimize_node(phi, i, model, controls, current.map(|s| s.controls[i])))
        .collect::<Result<Vec<_>>>()?;
    let (us, minima): (Vec<f64>, Vec<f64>) = results.into_iter().unzip();
    Ok((Strategy::new(grid, us)?, minima))
}

/// Pointwise minimizer of the discrete Hamiltonian of `phi` over `controls`.
///
/// If `current` is given, its control is kept at nodes where no candidate is strictly
/// better; otherwise ties resolve toward less reinsurance.
pub fn policy_improve(
    phi: &GridFunction,
    model: &RiskModel,
    controls: &ControlGrid,
    current: Option<&Strategy>,
) -> Result<Strategy> {
    improve_with_minima(phi, model, controls, current).map(|(s, _)| s)
}

fn interior_residual(grid: &Grid, minima: &[f64]) -> Result<GridFunction> {
    let last = grid.last();
    let values = minima
        .iter()
        .enumerate()
        .map(|(i, &m)| if i == 0 || i == last { 0.0 } else { m })
        .collect();
    GridFunction::new(*grid, values)
}

/// `min_u H(v; x_i, u)` at interior nodes; boundary nodes are reported as zero.
pub fn hjb_residual(v: &GridFunction, model: &RiskModel, controls: &ControlGrid) -> Result<GridFunction> {
    let (_, minima) = improve_with_minima(v, model, controls, None)?;
    interior_residual(v.grid(), &minima)
}

/// Monte Carlo settings for estimating `Φ^u(x_hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McBoundary {
    pub n_paths: usize,
    /// Explicit horizon, or `None` to derive it from `tolerance`.
    pub horizon: Option<f64>,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for McBoundary {
    fn default() -> Self {
        Self {
            n_paths: 1_000_000,
            horizon: None,
            tolerance: 1e-6,
            seed: 0,
        }
    }
}

impl McBoundary {
    pub fn horizon(&self, model: &RiskModel) -> Result<f64> {
        match self.horizon {
            Some(t) => Ok(t),
            None => horizon_for_tolerance(model.params.delta, model.penalty.bound(), self.tolerance),
        }
    }

    pub fn estimate(&self, strategy: &Strategy, model: &RiskModel) -> Result<McEstimate> {
        let horizon = self.horizon(model)?;
        mc_estimate(strategy.grid().x_hi, strategy, model, self.n_paths, horizon, self.seed)
    }
}

/// Source of the top boundary condition for each evaluation. It is only used when the
/// drift at the top node points out of the grid.
#[derive(Debug, Clone, PartialEq)]
pub enum TopBoundary {
    /// Monte Carlo estimate of `Φ^u(x_hi)` for the strategy being evaluated.
    MonteCarlo(McBoundary),
    /// Fixed Dirichlet value.
    Fixed(f64),
    /// Exponential decay at the adjustment coefficient of the control at `x_hi`.
    Asymptotic,
    /// [`TopBoundary::Asymptotic`] where an adjustment coefficient exists, Monte Carlo otherwise.
    Auto(McBoundary),
}

impl Default for TopBoundary {
    fn default() -> Self {
        TopBoundary::Auto(McBoundary::default())
    }
}

impl TopBoundary {
    pub fn resolve(&self, strategy: &Strategy, model: &RiskModel) -> Result<UpperBoundary> {
        let grid = strategy.grid();
        let u_top = strategy.controls[grid.last()];
        if model.premium(u_top) <= 0.0 {
            // no outflow at the top: the value is not used
            return Ok(UpperBoundary::Value(0.0));
        }
        let decay = || adjustment_coefficient(u_top, &model.params, &model.claims).map(|a| UpperBoundary::Decay(a.gamma));
        let mc = |mc: &McBoundary| mc.estimate(strategy, model).map(|e| UpperBoundary::Value(e.mean));
        match self {
            TopBoundary::Fixed(v) => Ok(UpperBoundary::Value(*v)),
            TopBoundary::MonteCarlo(m) => mc(m),
            TopBoundary::Asymptotic => decay(),
            TopBoundary::Auto(m) => match decay() {
                Ok(b) => Ok(b),
                Err(Error::NoAdjustmentCoefficient(_) | Error::NoPositiveRoot { .. }) => mc(m),
                Err(e) => Err(e),
            },
        }
    }
}

/// Policy iteration settings.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyIterationConfig {
    /// Stop when the sup-norm change of the value falls below this times the value scale.
    pub tol_value: f64,
    /// ... and the largest interior HJB residual is below this times `(δ+λ)` times the scale.
    pub tol_residual: f64,
    pub max_iters: usize,
    /// Evaluations performed before the stopping rule is consulted.
    pub min_iters: usize,
    pub controls: ControlGrid,
    pub top: TopBoundary,
}

impl Default for PolicyIterationConfig {
    fn default() -> Self {
        Self {
            tol_value: 1e-5,
            tol_residual: 1e-3,
            max_iters: 20,
            min_iters: 1,
            controls: ControlGrid::default(),
            top: TopBoundary::default(),
        }
    }
}

/// One evaluation in the policy-iteration sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    /// Strategy that was evaluated.
    pub strategy: Strategy,
    pub value: GridFunction,
    /// `max |min_u H(value; x_i, u)|` over interior nodes.
    pub max_residual: f64,
    /// Sup-norm distance to the previous value; infinite for the first iterate.
    pub sup_change: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    ToleranceMet,
    MaxIters,
    /// The improved strategy equals the evaluated one but the residual is still too large.
    Stagnation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyIterationReport {
    pub iterates: Vec<Iterate>,
    pub converged: bool,
    pub stop_reason: StopReason,
    /// Residual of the final value per node (zero at the boundary nodes).
    pub residual: GridFunction,
    final_strategy: Strategy,
}

impl PolicyIterationReport {
    pub fn last(&self) -> &Iterate {
        self.iterates.last().expect("report holds at least one iterate")
    }

    /// The converged (or last) value function.
    pub fn value(&self) -> &GridFunction {
        &self.last().value
    }

    /// The minimizer of the Hamiltonian of the last value.
    pub fn strategy(&self) -> &Strategy {
        &self.final_strategy
    }
}

/// Evaluation failed part-way; the iterates computed so far are attached.
#[derive(Debug, Error)]
#[error("policy iteration aborted after {} iterates: {source}", .partial.len())]
pub struct PolicyIterationFailure {
    #[source]
    pub source: Error,
    pub partial: Vec<Iterate>,
}

/// Alternates policy evaluation and improvement starting from `initial`.
pub fn policy_iteration(
    initial: &Strategy,
    model: &RiskModel,
    config: &PolicyIterationConfig,
) -> std::result::Result<PolicyIterationReport, PolicyIterationFailure> {
    let mut iterates: Vec<Iterate> = Vec::new();
    let fail = |source: Error, iterates: &Vec<Iterate>| PolicyIterationFailure {
        source,
        partial: iterates.clone(),
    };
    if config.max_iters == 0 {
        return Err(fail(invalid("max_iters", "must be at least 1"), &iterates));
    }
    let grid = *initial.grid();
    let rate = model.params.delta + model.params.lambda;
    let mut strategy = initial.clone();
    let mut previous: Option<GridFunction> = None;

    loop {
        let step = (|| {
            let upper = config.top.resolve(&strategy, model)?;
            let value = policy_evaluate(&strategy, model, BoundaryData::smooth_ruin(model, upper))?;
            let (next, minima) = improve_with_minima(&value, model, &config.controls, Some(&strategy))?;
            Ok::<_, Error>((value, next, minima))
        })();
        let (value, next, minima) = step.map_err(|e| fail(e, &iterates))?;

        let residual = interior_residual(&grid, &minima).map_err(|e| fail(e, &iterates))?;
        let max_residual = residual.values().iter().fold(0.0, |m: f64, r| m.max(r.abs()));
        let sup_change = previous.as_ref().map_or(f64::INFINITY, |p| p.sup_distance(&value));
        let sup = value.values().iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        let scale = if sup > 0.0 { sup } else { model.penalty.bound() };
        let unchanged = next == strategy;

        iterates.push(Iterate {
            strategy: strategy.clone(),
            value: value.clone(),
            max_residual,
            sup_change,
        });
        let n = iterates.len();
        let residual_ok = max_residual < config.tol_residual * rate * scale;
        let value_ok = sup_change < config.tol_value * scale || (unchanged && n > 1);
        let stop = if n < config.min_iters {
            None
        } else if residual_ok && (value_ok || unchanged) {
            Some(StopReason::ToleranceMet)
        } else if unchanged {
            Some(StopReason::Stagnation)
        } else if n >= config.max_iters {
            Some(StopReason::MaxIters)
        } else {
            None
        };
        if let Some(reason) = stop {
            return Ok(PolicyIterationReport {
                iterates,
                converged: reason == StopReason::ToleranceMet,
                stop_reason: reason,
                residual,
                final_strategy: next,
            });
        }
        previous = Some(value);
        strategy = next;
    }
}
