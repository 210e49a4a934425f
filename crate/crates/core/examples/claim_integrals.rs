//! The two claim integrals of the generator: surviving claims against a grid function,
//! and the expected penalty of a ruinous claim.

use optimal_reinsurance::model::{ClaimDistribution, Penalty, Retention};
use optimal_reinsurance::quadrature::{
    ruin_integral, survival_integral, survival_integral_adaptive, Grid, GridFunction, DEFAULT_TOL,
};

fn main() -> optimal_reinsurance::Result<()> {
    let grid = Grid::new(0.0, 14.0, 1400)?;
    let exp1 = ClaimDistribution::exponential(1.0)?;
    let pareto3 = ClaimDistribution::pareto(3.0)?;
    let r = Retention::Proportional;

    // ∫_0^2 (2 − y) e^{−y} dy = 1 + e^{−2}
    let id = GridFunction::from_fn(grid, |z| z)?;
    let exact = survival_integral(&id, 2.0, 1.0, &exp1, &r)?;
    let adaptive = survival_integral_adaptive(&id, 2.0, 1.0, &exp1, DEFAULT_TOL)?;
    println!("survival  exact panels {exact:.12}  adaptive {adaptive:.12}  closed form {:.12}", 1.0 + (-2f64).exp());

    // survival mass plus ruin mass is the whole claim distribution
    let one = GridFunction::constant(grid, 1.0)?;
    for (x, u) in [(0.5, 0.2), (3.0, 0.7), (10.0, 1.0)] {
        for (name, dist) in [("exp", &exp1), ("pareto", &pareto3)] {
            let s = survival_integral(&one, x, u, dist, &r)?;
            let q = ruin_integral(&Penalty::W1, x, u, dist, &r)?;
            println!("{name:>6} x={x:<4} u={u:<4} survival {s:.10} + ruin {q:.10} = {:.3e} off 1", s + q - 1.0);
        }
    }

    println!("W2 ruin, Pareto(3), x = 0, u = 1: {:.9}", ruin_integral(&Penalty::W2, 0.0, 1.0, &pareto3, &r)?);
    Ok(())
}
