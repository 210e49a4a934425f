//! Heavy-tailed claims: no adjustment coefficient exists, the top boundary value comes
//! from simulation, and the optimal strategy keeps the premium negative everywhere.

use optimal_reinsurance::asymptotics::adjustment_coefficient;
use optimal_reinsurance::hjb::{policy_iteration, McBoundary, PolicyIterationConfig, Strategy, TopBoundary};
use optimal_reinsurance::model::{ClaimDistribution, ModelParams, Penalty, RiskModel};
use optimal_reinsurance::quadrature::Grid;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let claims = ClaimDistribution::pareto(3.0)?;
    let model = RiskModel::new(ModelParams::new(1.0, claims.mean(), 0.5, 0.7, 0.1)?, claims, Penalty::W2)?;
    match adjustment_coefficient(0.5, &model.params, &model.claims) {
        Err(e) => println!("adjustment coefficient: {e}"),
        Ok(a) => println!("unexpected coefficient {}", a.gamma),
    }

    let grid = Grid::new(0.0, 14.0, 281)?;
    let config = PolicyIterationConfig {
        top: TopBoundary::Auto(McBoundary {
            n_paths: 100_000,
            ..Default::default()
        }),
        ..Default::default()
    };
    let report = policy_iteration(&Strategy::constant(grid, 1.0)?, &model, &config)?;
    let s = report.strategy();
    let max_c = s.controls().iter().map(|&u| model.premium(u)).fold(f64::MIN, f64::max);
    println!("converged: {}, largest premium rate {max_c:+.4}", report.converged);
    for x in [0.0, 0.5, 2.0, 5.0, 10.0, 14.0] {
        println!("x = {x:>4}: u = {:.4}  V = {:.6}", s.eval(x), report.value().eval(x));
    }
    Ok(())
}
