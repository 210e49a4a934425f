//! Adjustment coefficients of constant strategies and the strategy maximizing the
//! asymptotic decay rate.

use optimal_reinsurance::asymptotics::{adjustment_coefficient, asymptotic_optimal_u, maximize_adjustment_coefficient};
use optimal_reinsurance::model::{ClaimDistribution, ModelParams};

fn main() -> optimal_reinsurance::Result<()> {
    let claims = ClaimDistribution::exponential(1.0)?;
    for delta in [0.0, 0.05, 0.1] {
        let p = ModelParams::new(1.0, 1.0, 0.5, 0.7, delta)?;
        print!("delta = {delta:<5}");
        for u in [0.3, 0.6, 1.0] {
            print!("  γ({u}) = {:.5}", adjustment_coefficient(u, &p, &claims)?.gamma);
        }
        println!();
    }
    for delta in [0.01, 0.05, 0.1, 0.2] {
        let p = ModelParams::new(1.0, 1.0, 0.5, 0.7, delta)?;
        let (u, a) = maximize_adjustment_coefficient(&p, &claims, 1e-10)?;
        println!(
            "delta = {delta:<5} closed form u* = {:.4}  numeric {u:.4}  γ = {:.5}",
            asymptotic_optimal_u(&p, &claims)?,
            a.gamma
        );
    }
    for beta in [0.5, 1.0, 5.0] {
        let p = ModelParams::new(1.0, beta, 0.5, 0.7, 0.05)?;
        let claims = ClaimDistribution::exponential(1.0 / beta)?;
        println!("beta = {beta}: u* = {:.4}", asymptotic_optimal_u(&p, &claims)?);
    }
    Ok(())
}
