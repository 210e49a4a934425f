//! Premium rate, its zero and the proportional retention for the reference parameters.

use optimal_reinsurance::model::{ClaimDistribution, ModelParams, Penalty, Retention, RiskModel};

fn main() -> optimal_reinsurance::Result<()> {
    let params = ModelParams::new(1.0, 1.0, 0.5, 0.7, 0.05)?;
    let model = RiskModel::new(params, ClaimDistribution::exponential(1.0)?, Penalty::W1)?;

    println!("gross premium     c(1) = {}", params.gross_premium());
    println!("full reinsurance  c(0) = {}", params.premium(0.0));
    println!("premium zero      u0   = {:.6}", params.premium_zero());
    for u in [0.0, 0.25, 0.5, 0.75, 1.0] {
        println!("  u = {u:<5} c(u) = {:+.4}", model.premium(u));
    }

    let r = Retention::Proportional;
    for (y, u) in [(2.0, 0.3), (2.0, 1.0), (5.0, 0.0)] {
        println!("claim {y} at u = {u}: retained {}", r.retain(y, u));
    }
    println!("largest non-ruinous claim at x = 2, u = 0.5: {}", r.inverse(2.0, 0.5));
    println!("w2(0, 0) = {}", Penalty::W2.at_origin());
    Ok(())
}
