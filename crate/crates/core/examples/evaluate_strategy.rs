//! Policy evaluation of fixed strategies: the closed form without reinsurance, pure
//! transport under full reinsurance, and a Monte Carlo check of a varying strategy.

use optimal_reinsurance::evaluator::{policy_evaluate, BoundaryData, UpperBoundary};
use optimal_reinsurance::hjb::{Strategy, TopBoundary};
use optimal_reinsurance::model::{ClaimDistribution, ModelParams, Penalty, RiskModel};
use optimal_reinsurance::quadrature::Grid;
use optimal_reinsurance::simulator::mc_estimate;

fn main() -> optimal_reinsurance::Result<()> {
    let grid = Grid::new(0.0, 14.0, 1400)?;
    for delta in [0.0, 0.05] {
        let model = RiskModel::new(
            ModelParams::new(1.0, 1.0, 0.5, 0.7, delta)?,
            ClaimDistribution::exponential(1.0)?,
            Penalty::W1,
        )?;
        let c = model.premium(1.0);
        let b = c - 1.0 - delta;
        let r = (b + (b * b + 4.0 * c * delta).sqrt()) / (2.0 * c);
        let exact = |x: f64| (1.0 - r) * (-r * x).exp();
        let s = Strategy::constant(grid, 1.0)?;
        let phi = policy_evaluate(&s, &model, BoundaryData::smooth_ruin(&model, UpperBoundary::Value(exact(14.0))))?;
        let err = grid
            .points()
            .iter()
            .zip(phi.values())
            .map(|(x, v)| (v - exact(*x)).abs())
            .fold(0.0, f64::max);
        println!("delta = {delta}: max node error against (1−R)e^(−Rx) = {err:.2e}");
    }

    let model = RiskModel::new(
        ModelParams::new(1.0, 1.0, 0.5, 0.7, 0.05)?,
        ClaimDistribution::exponential(1.0)?,
        Penalty::W1,
    )?;
    let coarse = Grid::new(0.0, 14.0, 561)?;
    let s = Strategy::new(coarse, coarse.points().iter().map(|x| 1.0 - 0.05 * x).collect())?;
    let upper = TopBoundary::Asymptotic.resolve(&s, &model)?;
    let phi = policy_evaluate(&s, &model, BoundaryData::smooth_ruin(&model, upper))?;
    for x0 in [2.0, 8.0] {
        let mc = mc_estimate(x0, &s, &model, 100_000, 300.0, 7)?;
        println!("u(x) = 1 − x/20 at x = {x0}: PIDE {:.5}  MC {:.5} ± {:.5}", phi.eval(x0), mc.mean, mc.std_error);
    }
    Ok(())
}
