//! Monte Carlo estimates of the discounted ruin probability against the closed form for
//! exponential claims without reinsurance.

use optimal_reinsurance::hjb::Strategy;
use optimal_reinsurance::model::{ClaimDistribution, ModelParams, Penalty, RiskModel};
use optimal_reinsurance::quadrature::Grid;
use optimal_reinsurance::simulator::{horizon_for_tolerance, mc_estimate};

fn main() -> optimal_reinsurance::Result<()> {
    let delta = 0.05;
    let model = RiskModel::new(
        ModelParams::new(1.0, 1.0, 0.5, 0.7, delta)?,
        ClaimDistribution::exponential(1.0)?,
        Penalty::W1,
    )?;
    let c = model.premium(1.0);
    let b = c - 1.0 - delta;
    let r = (b + (b * b + 4.0 * c * delta).sqrt()) / (2.0 * c);

    let strategy = Strategy::constant(Grid::new(0.0, 14.0, 141)?, 1.0)?;
    let horizon = horizon_for_tolerance(delta, 1.0, 1e-6)?;
    println!("horizon {horizon:.1}");
    for x0 in [2.0, 5.0, 8.0] {
        let est = mc_estimate(x0, &strategy, &model, 200_000, horizon, 42)?;
        let exact = (1.0 - r) * (-r * x0).exp();
        println!(
            "x0 = {x0}: {:.5} ± {:.5}   closed form {exact:.5}   ({:+.2} SE)",
            est.mean,
            est.std_error,
            (est.mean - exact) / est.std_error
        );
    }
    Ok(())
}
