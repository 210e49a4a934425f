//! Policy iteration for exponential claims and the discounted ruin probability, starting
//! from no reinsurance.

use optimal_reinsurance::asymptotics::asymptotic_optimal_u;
use optimal_reinsurance::hjb::{policy_iteration, PolicyIterationConfig, Strategy};
use optimal_reinsurance::model::{ClaimDistribution, ModelParams, Penalty, RiskModel};
use optimal_reinsurance::quadrature::Grid;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = RiskModel::new(
        ModelParams::new(1.0, 1.0, 0.5, 0.7, 0.05)?,
        ClaimDistribution::exponential(1.0)?,
        Penalty::W1,
    )?;
    let grid = Grid::new(0.0, 14.0, 701)?;
    let config = PolicyIterationConfig {
        min_iters: 5,
        ..Default::default()
    };
    let report = policy_iteration(&Strategy::constant(grid, 1.0)?, &model, &config)?;

    println!("iter  sup change   max residual   V(0)      V(7)");
    for (k, it) in report.iterates.iter().enumerate() {
        println!(
            "{:>4}  {:>10.3e}   {:>12.3e}   {:.6}  {:.6}",
            k + 1,
            it.sup_change,
            it.max_residual,
            it.value.values()[0],
            it.value.eval(7.0)
        );
    }
    println!("stop: {:?}", report.stop_reason);

    let s = report.strategy();
    for x in [0.0, 1.0, 2.0, 4.0, 7.0, 10.0, 14.0] {
        println!("u*({x:>4}) = {:.4}", s.eval(x));
    }
    println!("asymptotic constant strategy: {:.4}", asymptotic_optimal_u(&model.params, &model.claims)?);
    Ok(())
}
