//! Exact event-driven simulation of the controlled reserve process and Monte Carlo
//! estimates of the discounted penalty `Φ^u(x) = E[e^{−δτ} w(X_{τ−}, |X_τ|); τ < ∞]`.
//!
//! Between claims the reserve follows `ẋ = c(u(x))`. Markov controls are linear between
//! grid nodes and the premium is affine in `u`, so the drift is piecewise linear in `x`
//! and the flow is solved in closed form cell by cell. Traversal times of whole cells
//! are tabulated once per strategy, which lets a path cross many cells in `O(log n)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::hjb::Strategy;
use crate::model::RiskModel;
use crate::quadrature::GridFunction;

/// How a simulated path ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathKind {
    /// A claim took the reserve to or below zero.
    ClaimRuin {
        time: f64,
        surplus_prior: f64,
        deficit: f64,
    },
    /// The reserve drifted down to zero under a negative net premium.
    SmoothRuin { time: f64 },
    /// No ruin before the horizon.
    Survived { horizon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOutcome {
    pub kind: PathKind,
    /// `e^{−δτ}·w(X_{τ−}, |X_τ|)` for ruined paths, zero otherwise.
    pub discounted_penalty: f64,
}

/// Monte Carlo estimate of a discounted penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n_paths)`.
    pub std_error: f64,
    pub n_paths: usize,
    pub horizon: f64,
    /// `e^{−δ·horizon}·M`, the largest possible contribution of ruin after the horizon.
    pub truncation_bound: f64,
}

/// Result of following the deterministic flow for a given time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Flow {
    /// Position reached when the time ran out.
    At(f64),
    /// The reserve reached zero after this much time.
    HitZero(f64),
}

/// Closed-form deterministic flow `ẋ = c(u(x))` of a Markov strategy.
#[derive(Debug, Clone)]
pub struct DriftFlow {
    x_lo: f64,
    x_hi: f64,
    h: f64,
    drift: Vec<f64>,
    up_prefix: Vec<f64>,
    up_run_end: Vec<usize>,
    down_prefix: Vec<f64>,
    down_run_start: Vec<usize>,
}

/// Time to move from `xa` to `xb` inside a cell where the drift is `ca` at `xa` with slope `s`.
/// The drift must not vanish on the closed segment.
fn cell_time(xa: f64, xb: f64, ca: f64, s: f64) -> f64 {
    let d = xb - xa;
    if s == 0.0 {
        d / ca
    } else {
        (s * d / ca).ln_1p() / s
    }
}

/// Position after time `t` starting at `xa` with drift `ca` and slope `s`.
fn cell_position(xa: f64, ca: f64, s: f64, t: f64) -> f64 {
    if s == 0.0 {
        xa + ca * t
    } else {
        xa + ca / s * (s * t).exp_m1()
    }
}

impl DriftFlow {
    pub fn new(strategy: &Strategy, model: &RiskModel) -> Self {
        let grid = strategy.grid();
        let h = grid.spacing();
        let drift: Vec<f64> = strategy.controls().iter().map(|&u| model.premium(u)).collect();
        let n = drift.len();
        let cells = n - 1;

        let mut up_prefix = vec![0.0; n];
        let mut down_prefix = vec![0.0; n];
        let mut up_ok = vec![false; cells];
        let mut down_ok = vec![false; cells];
        for j in 0..cells {
            let (a, b) = (drift[j], drift[j + 1]);
            let s = (b - a) / h;
            let (mut up, mut down) = (0.0, 0.0);
            if a > 0.0 && b > 0.0 {
                up = cell_time(0.0, h, a, s);
                up_ok[j] = true;
            }
            if a < 0.0 && b < 0.0 {
                down = cell_time(h, 0.0, b, s);
                down_ok[j] = true;
            }
            up_prefix[j + 1] = up_prefix[j] + up;
            down_prefix[j + 1] = down_prefix[j] + down;
        }
        let mut up_run_end = vec![0; n];
        up_run_end[n - 1] = n - 1;
        for k in (0..cells).rev() {
            up_run_end[k] = if up_ok[k] { up_run_end[k + 1] } else { k };
        }
        let mut down_run_start = vec![0; n];
        for k in 1..n {
            down_run_start[k] = if down_ok[k - 1] { down_run_start[k - 1] } else { k };
        }
        Self {
            x_lo: grid.x_lo,
            x_hi: grid.x_hi,
            h,
            drift,
            up_prefix,
            up_run_end,
            down_prefix,
            down_run_start,
        }
    }

    fn node(&self, i: usize) -> f64 {
        if i == self.drift.len() - 1 {
            self.x_hi
        } else {
            self.x_lo + i as f64 * self.h
        }
    }

    /// Drift at reserve `x` (constant continuation outside the grid).
    pub fn drift_at(&self, x: f64) -> f64 {
        let last = self.drift.len() - 1;
        if x <= self.x_lo {
            return self.drift[0];
        }
        if x >= self.x_hi {
            return self.drift[last];
        }
        let s = (x - self.x_lo) / self.h;
        let j = (s.floor() as usize).min(last - 1);
        let t = s - j as f64;
        self.drift[j] + t * (self.drift[j + 1] - self.drift[j])
    }

    /// Follows the flow from `x > 0` for at most `duration`.
    pub fn advance(&self, x: f64, duration: f64) -> Flow {
        let last = self.drift.len() - 1;
        let mut x = x;
        let mut left = duration;
        let mut elapsed = 0.0;
        loop {
            if x <= 0.0 {
                return Flow::HitZero(elapsed);
            }
            if x >= self.x_hi {
                let c = self.drift[last];
                if c >= 0.0 {
                    return Flow::At(x + c * left);
                }
                let dt = (x - self.x_hi) / -c;
                if dt >= left {
                    return Flow::At(x + c * left);
                }
                elapsed += dt;
                left -= dt;
                x = self.x_hi;
            } else if x < self.x_lo {
                let c = self.drift[0];
                if c == 0.0 {
                    return Flow::At(x);
                }
                if c < 0.0 {
                    let dt = x / -c;
                    return if dt <= left {
                        Flow::HitZero(elapsed + dt)
                    } else {
                        Flow::At(x + c * left)
                    };
                }
                let dt = (self.x_lo - x) / c;
                if dt >= left {
                    return Flow::At(x + c * left);
                }
                elapsed += dt;
                left -= dt;
                x = self.x_lo;
                continue;
            }

            let s_pos = (x - self.x_lo) / self.h;
            let nearest = s_pos.round();
            let (mut j, frac) = if (s_pos - nearest).abs() < 1e-9 {
                // on a node up to rounding
                let k = nearest as usize;
                if k >= last {
                    if self.drift[last] >= 0.0 {
                        return Flow::At(self.x_hi + self.drift[last] * left);
                    }
                    x = self.x_hi;
                    (last - 1, 1.0)
                } else {
                    x = self.node(k);
                    (k, 0.0)
                }
            } else {
                let j = (s_pos.floor() as usize).min(last - 1);
                (j, s_pos - j as f64)
            };
            let slope_of = |j: usize| (self.drift[j + 1] - self.drift[j]) / self.h;
            let cx = self.drift[j] + frac * (self.drift[j + 1] - self.drift[j]);

            if cx > 0.0 {
                let s = slope_of(j);
                if self.drift[j + 1] <= 0.0 {
                    // stable equilibrium inside the cell, approached but never reached
                    return Flow::At(cell_position(x, cx, s, left));
                }
                let top = self.node(j + 1);
                let dt = cell_time(x, top, cx, s);
                if dt > left {
                    return Flow::At(cell_position(x, cx, s, left).min(top));
                }
                elapsed += dt;
                left -= dt;
                let k = j + 1;
                let end = self.up_run_end[k];
                let base = self.up_prefix[k];
                // largest m in [k, end] with prefix[m] − prefix[k] <= left
                let m = k + self.up_prefix[k..=end].partition_point(|&p| p - base <= left) - 1;
                left -= self.up_prefix[m] - base;
                elapsed += self.up_prefix[m] - base;
                x = self.node(m);
                if m == last {
                    // continue above the grid with the top drift
                    x = self.x_hi;
                    let c = self.drift[last];
                    return Flow::At(x + c * left);
                }
                continue;
            }

            if cx < 0.0 {
                if frac == 0.0 {
                    if j == 0 {
                        // at x_lo > 0 heading below the grid
                        let c = self.drift[0];
                        let dt = x / -c;
                        return if dt <= left {
                            Flow::HitZero(elapsed + dt)
                        } else {
                            Flow::At(x + c * left)
                        };
                    }
                    j -= 1;
                }
                let s = slope_of(j);
                if self.drift[j] >= 0.0 {
                    return Flow::At(cell_position(x, cx, s, left));
                }
                let bottom = self.node(j);
                let dt = cell_time(x, bottom, cx, s);
                if dt > left {
                    return Flow::At(cell_position(x, cx, s, left).max(bottom));
                }
                elapsed += dt;
                left -= dt;
                let k = j;
                let start = self.down_run_start[k];
                let base = self.down_prefix[k];
                // smallest m in [start, k] with prefix[k] − prefix[m] <= left
                let m = start + self.down_prefix[start..=k].partition_point(|&p| base - p > left);
                left -= base - self.down_prefix[m];
                elapsed += base - self.down_prefix[m];
                x = self.node(m);
                if m == 0 {
                    if self.x_lo <= 0.0 {
                        return Flow::HitZero(elapsed);
                    }
                    let c = self.drift[0];
                    let dt = x / -c;
                    return if dt <= left {
                        Flow::HitZero(elapsed + dt)
                    } else {
                        Flow::At(x + c * left)
                    };
                }
                continue;
            }

            return Flow::At(x);
        }
    }
}

fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

/// Simulates one path of the controlled reserve from `x0` up to `horizon`.
pub fn simulate_path<R: Rng + ?Sized>(
    x0: f64,
    flow: &DriftFlow,
    strategy: &Strategy,
    model: &RiskModel,
    horizon: f64,
    rng: &mut R,
) -> Result<PathOutcome> {
    let delta = model.params.delta;
    let arrivals = Exp::new(model.params.lambda).map_err(|e| invalid("lambda", e.to_string()))?;
    let smooth = |time: f64| PathOutcome {
        kind: PathKind::SmoothRuin { time },
        discounted_penalty: (-delta * time).exp() * model.penalty.at_origin(),
    };
    let mut x = x0;
    let mut t = 0.0;
    loop {
        let wait: f64 = arrivals.sample(rng);
        if t + wait > horizon {
            return Ok(match flow.advance(x, horizon - t) {
                Flow::HitZero(dt) => smooth(t + dt),
                Flow::At(_) => PathOutcome {
                    kind: PathKind::Survived { horizon },
                    discounted_penalty: 0.0,
                },
            });
        }
        match flow.advance(x, wait) {
            Flow::HitZero(dt) => return Ok(smooth(t + dt)),
            Flow::At(next) => x = next,
        }
        t += wait;
        let claim = model.claims.sample(rng);
        let retained = model.retention.retain(claim, strategy.eval(x));
        if retained >= x {
            let deficit = retained - x;
            let penalty = model.penalty.eval_checked(x, deficit)?;
            return Ok(PathOutcome {
                kind: PathKind::ClaimRuin {
                    time: t,
                    surplus_prior: x,
                    deficit,
                },
                discounted_penalty: (-delta * t).exp() * penalty,
            });
        }
        x -= retained;
        if !x.is_finite() || !t.is_finite() {
            return Err(Error::Simulation(format!("reserve {x} at time {t}")));
        }
    }
}

/// Horizon `T` with `e^{−δT}·M <= tol / 2`.
pub fn horizon_for_tolerance(delta: f64, bound: f64, tol: f64) -> Result<f64> {
    if delta <= 0.0 {
        return Err(invalid("horizon", "an explicit horizon is required when delta = 0"));
    }
    if !(tol > 0.0) {
        return Err(invalid("tolerance", format!("must be > 0, got {tol}")));
    }
    Ok(((2.0 * bound / tol).ln() / delta).max(0.0))
}

/// Pairwise summation, independent of how the values were produced.
pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

fn summarize(samples: &[f64], horizon: f64, truncation_bound: f64) -> McEstimate {
    let n = samples.len();
    let mean = pairwise_sum(samples) / n as f64;
    let squares: Vec<f64> = samples.iter().map(|v| (v - mean) * (v - mean)).collect();
    let variance = pairwise_sum(&squares) / (n - 1) as f64;
    McEstimate {
        mean,
        std_error: (variance / n as f64).sqrt(),
        n_paths: n,
        horizon,
        truncation_bound,
    }
}

/// Monte Carlo estimate of `Φ^u(x0)` over `n_paths` paths truncated at `horizon`.
///
/// Path `i` draws from its own stream derived from `(seed, i)`, so the estimate does not
/// depend on the number of worker threads.
pub fn mc_estimate(
    x0: f64,
    strategy: &Strategy,
    model: &RiskModel,
    n_paths: usize,
    horizon: f64,
    seed: u64,
) -> Result<McEstimate> {
    if n_paths < 2 {
        return Err(invalid("n_paths", format!("need at least 2 paths, got {n_paths}")));
    }
    if !(x0 > 0.0 && x0.is_finite()) {
        return Err(invalid("x0", format!("initial reserve must be > 0, got {x0}")));
    }
    if !(horizon > 0.0) {
        return Err(invalid("horizon", format!("must be > 0, got {horizon}")));
    }
    let flow = DriftFlow::new(strategy, model);
    let samples = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i);
            simulate_path(x0, &flow, strategy, model, horizon, &mut rng).map(|o| o.discounted_penalty)
        })
        .collect::<Result<Vec<f64>>>()?;
    let truncation = if horizon.is_finite() {
        (-model.params.delta * horizon).exp() * model.penalty.bound()
    } else {
        0.0
    };
    Ok(summarize(&samples, horizon, truncation))
}

/// Monte Carlo estimate of the one-step dynamic programming operator
/// `E[e^{−δT₁} V(X_{T₁}) 1{no ruin by T₁} + e^{−δτ} w(X_{τ−}, |X_τ|) 1{τ <= T₁}]`,
/// where `T₁` is the first claim time.
pub fn one_step_estimate(
    x0: f64,
    strategy: &Strategy,
    value: &GridFunction,
    model: &RiskModel,
    n_paths: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n_paths < 2 {
        return Err(invalid("n_paths", format!("need at least 2 paths, got {n_paths}")));
    }
    let delta = model.params.delta;
    let arrivals = Exp::new(model.params.lambda).map_err(|e| invalid("lambda", e.to_string()))?;
    let flow = DriftFlow::new(strategy, model);
    let samples = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i);
            let wait: f64 = arrivals.sample(&mut rng);
            let x = match flow.advance(x0, wait) {
                Flow::HitZero(dt) => return Ok((-delta * dt).exp() * model.penalty.at_origin()),
                Flow::At(x) => x,
            };
            let claim = model.claims.sample(&mut rng);
            let retained = model.retention.retain(claim, strategy.eval(x));
            let discount = (-delta * wait).exp();
            if retained >= x {
                Ok(discount * model.penalty.eval_checked(x, retained - x)?)
            } else {
                Ok(discount * value.eval(x - retained))
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(summarize(&samples, f64::INFINITY, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClaimDistribution, ModelParams, Penalty};
    use crate::quadrature::Grid;

    fn model(delta: f64, penalty: Penalty) -> RiskModel {
        RiskModel::new(
            ModelParams::new(1.0, 1.0, 0.5, 0.7, delta).unwrap(),
            ClaimDistribution::exponential(1.0).unwrap(),
            penalty,
        )
        .unwrap()
    }

    fn grid() -> Grid {
        Grid::new(0.0, 14.0, 141).unwrap()
    }

    #[test]
    fn constant_negative_drift_hits_zero_exactly() {
        let m = model(0.05, Penalty::W1);
        let s = Strategy::constant(grid(), 0.0).unwrap();
        let flow = DriftFlow::new(&s, &m);
        match flow.advance(1.0, 100.0) {
            Flow::HitZero(t) => assert!((t - 5.0).abs() < 1e-12, "{t}"),
            other => panic!("{other:?}"),
        }
        match flow.advance(1.0, 2.0) {
            Flow::At(x) => assert!((x - 0.6).abs() < 1e-12, "{x}"),
            other => panic!("{other:?}"),
        }
        // starting above the grid
        match flow.advance(20.0, 1000.0) {
            Flow::HitZero(t) => assert!((t - 100.0).abs() < 1e-9, "{t}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn flow_matches_numerical_ode_for_varying_strategy() {
        let m = model(0.05, Penalty::W1);
        let g = grid();
        let s = Strategy::new(g, g.points().iter().map(|x| (0.05 + 0.07 * x).min(1.0)).collect()).unwrap();
        let flow = DriftFlow::new(&s, &m);
        for (x0, dur) in [(0.5, 0.3), (3.0, 7.0), (10.0, 40.0), (1.2, 0.001)] {
            // RK4 with tiny steps as an oracle
            let n = 200_000;
            let dt = dur / n as f64;
            let mut x: f64 = x0;
            let mut hit = None;
            for k in 0..n {
                let f = |x: f64| flow.drift_at(x);
                let k1 = f(x);
                let k2 = f(x + 0.5 * dt * k1);
                let k3 = f(x + 0.5 * dt * k2);
                let k4 = f(x + dt * k3);
                x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                if x <= 0.0 {
                    hit = Some(k as f64 * dt);
                    break;
                }
            }
            match (flow.advance(x0, dur), hit) {
                (Flow::At(y), None) => assert!((y - x).abs() < 1e-7, "x0={x0}: {y} vs {x}"),
                (Flow::HitZero(t), Some(th)) => assert!((t - th).abs() < 1e-4),
                (a, b) => panic!("x0={x0}: {a:?} vs {b:?}"),
            }
        }
    }

    #[test]
    fn smooth_ruin_when_first_claim_is_late() {
        let m = model(0.05, Penalty::W1);
        let s = Strategy::constant(grid(), 0.0).unwrap();
        let flow = DriftFlow::new(&s, &m);
        for seed in 0..20 {
            let mut rng = path_rng(seed, 0);
            let out = simulate_path(1.0, &flow, &s, &m, 1e4, &mut rng).unwrap();
            match out.kind {
                PathKind::SmoothRuin { time } => {
                    assert!((time - 5.0).abs() < 1e-12);
                    assert!((out.discounted_penalty - (-0.25f64).exp()).abs() < 1e-12);
                }
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn claim_ruin_deficit() {
        let m = model(0.0, Penalty::W1);
        let s = Strategy::constant(grid(), 1.0).unwrap();
        let flow = DriftFlow::new(&s, &m);
        let mut found = false;
        for seed in 0..200 {
            // replay the path's draws to know T1 and Y1
            let mut probe = path_rng(seed, 3);
            let t1: f64 = Exp::new(1.0).unwrap().sample(&mut probe);
            let y1 = m.claims.sample(&mut probe);
            let x0 = 0.5;
            if y1 > x0 + 1.5 * t1 {
                let mut rng = path_rng(seed, 3);
                let out = simulate_path(x0, &flow, &s, &m, 1e3, &mut rng).unwrap();
                match out.kind {
                    PathKind::ClaimRuin { time, surplus_prior, deficit } => {
                        assert!((time - t1).abs() < 1e-12);
                        assert!((surplus_prior - (x0 + 1.5 * t1)).abs() < 1e-12);
                        assert!((deficit - (y1 - x0 - 1.5 * t1)).abs() < 1e-12);
                        found = true;
                    }
                    other => panic!("{other:?}"),
                }
            }
        }
        assert!(found);
    }

    #[test]
    fn full_reinsurance_estimate_is_deterministic() {
        let m = model(0.05, Penalty::W1);
        let s = Strategy::constant(grid(), 0.0).unwrap();
        let est = mc_estimate(3.0, &s, &m, 1000, 500.0, 1).unwrap();
        assert!((est.mean - (-0.05f64 * 15.0).exp()).abs() < 1e-12);
        assert!(est.std_error < 1e-12);
    }

    #[test]
    fn seed_determinism() {
        let m = model(0.05, Penalty::W2);
        let s = Strategy::constant(grid(), 0.6).unwrap();
        let a = mc_estimate(2.0, &s, &m, 2, 300.0, 99).unwrap();
        let b = mc_estimate(2.0, &s, &m, 2, 300.0, 99).unwrap();
        assert_eq!(a, b);
        let c = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap()
            .install(|| mc_estimate(2.0, &s, &m, 5000, 300.0, 99).unwrap());
        let d = mc_estimate(2.0, &s, &m, 5000, 300.0, 99).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn horizon_from_tolerance() {
        let t = horizon_for_tolerance(0.05, 1.0, 1e-6).unwrap();
        assert!(((-0.05 * t).exp() - 5e-7).abs() < 1e-15);
        assert!(horizon_for_tolerance(0.0, 1.0, 1e-6).is_err());
    }
}
