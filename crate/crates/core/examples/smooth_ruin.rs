//! Penalty depending on surplus and deficit: for low reserves the optimal strategy buys
//! so much reinsurance that the premium turns negative and the business is run down to
//! zero, collecting the small penalty w2(0,0) = 0.5.

use optimal_reinsurance::hjb::{policy_iteration, PolicyIterationConfig, Strategy};
use optimal_reinsurance::model::{ClaimDistribution, ModelParams, Penalty, RiskModel};
use optimal_reinsurance::quadrature::Grid;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = RiskModel::new(
        ModelParams::new(1.0, 1.0, 0.5, 0.7, 0.1)?,
        ClaimDistribution::exponential(1.0)?,
        Penalty::W2,
    )?;
    let grid = Grid::new(0.0, 14.0, 561)?;
    let report = policy_iteration(&Strategy::constant(grid, 1.0)?, &model, &PolicyIterationConfig::default())?;
    let s = report.strategy();
    let v = report.value();

    println!("converged: {} after {} evaluations", report.converged, report.iterates.len());
    println!("V(0) = {:.6}, w2(0,0) = {}", v.values()[0], model.penalty.at_origin());
    let u0 = model.params.premium_zero();
    let crossing = grid.points().into_iter().zip(s.controls()).find(|(_, &u)| u > u0).map(|(x, _)| x);
    match crossing {
        Some(x) => println!("premium negative below x = {x:.3}"),
        None => println!("premium negative everywhere"),
    }
    for x in [0.0, 0.5, 1.0, 2.0, 5.0, 14.0] {
        println!("x = {x:>4}: u = {:.4}  c(u) = {:+.4}  V = {:.6}", s.eval(x), model.premium(s.eval(x)), v.eval(x));
    }
    Ok(())
}
