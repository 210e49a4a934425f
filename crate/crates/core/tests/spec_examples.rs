use optimal_reinsurance::evaluator::{hamiltonian, policy_evaluate, BoundaryData, UpperBoundary};
use optimal_reinsurance::hjb::{policy_iteration, PolicyIterationConfig, Strategy, TopBoundary};
use optimal_reinsurance::model::{ClaimDistribution, ModelParams, Penalty, Retention, RiskModel};
use optimal_reinsurance::quadrature::{ruin_integral, survival_integral, survival_integral_adaptive, Grid, GridFunction};
use optimal_reinsurance::simulator::{mc_estimate, one_step_estimate};
use optimal_reinsurance::Error;

fn exp_model(delta: f64, penalty: Penalty) -> RiskModel {
    RiskModel::new(
        ModelParams::new(1.0, 1.0, 0.5, 0.7, delta).unwrap(),
        ClaimDistribution::exponential(1.0).unwrap(),
        penalty,
    )
    .unwrap()
}

fn grid(n: usize) -> Grid {
    Grid::new(0.0, 14.0, n).unwrap()
}

fn decay_root(delta: f64) -> f64 {
    let (c, lambda) = (1.5f64, 1.0);
    let b = c - lambda - delta;
    (b + (b * b + 4.0 * c * delta).sqrt()) / (2.0 * c)
}

#[test]
fn ruin_probability_from_zero_is_two_thirds() {
    let m = exp_model(0.0, Penalty::W1);
    let s = Strategy::constant(grid(141), 1.0).unwrap();
    let est = mc_estimate(1e-12, &s, &m, 1_000_000, 120.0, 11).unwrap();
    assert!((est.mean - 2.0 / 3.0).abs() <= 3.0 * est.std_error, "{est:?}");
}

#[test]
fn discounted_ruin_probability_at_two() {
    let m = exp_model(0.05, Penalty::W1);
    let s = Strategy::constant(grid(141), 1.0).unwrap();
    let r = decay_root(0.05);
    let est = mc_estimate(2.0, &s, &m, 200_000, 300.0, 12).unwrap();
    let exact = (1.0 - r) * (-2.0 * r).exp();
    assert!((est.mean - exact).abs() <= 3.0 * est.std_error, "{est:?} vs {exact}");
}

#[test]
fn full_reinsurance_is_deterministic_smooth_ruin() {
    let m = exp_model(0.05, Penalty::W1);
    let s = Strategy::constant(grid(141), 0.0).unwrap();
    for x0 in [0.3, 4.0, 13.0] {
        let est = mc_estimate(x0, &s, &m, 1000, 1e4, 3).unwrap();
        assert!((est.mean - (-0.05 * x0 / 0.2f64).exp()).abs() < 1e-12);
        assert!(est.std_error < 1e-15);
    }
    let n2a = mc_estimate(2.0, &Strategy::constant(grid(141), 0.7).unwrap(), &m, 2, 100.0, 9).unwrap();
    let n2b = mc_estimate(2.0, &Strategy::constant(grid(141), 0.7).unwrap(), &m, 2, 100.0, 9).unwrap();
    assert_eq!(n2a, n2b);
}

#[test]
fn horizon_doubling_stays_within_truncation_bound() {
    let m = exp_model(0.05, Penalty::W1);
    let s = Strategy::constant(grid(141), 0.6).unwrap();
    let t = 60.0;
    let short = mc_estimate(3.0, &s, &m, 100_000, t, 21).unwrap();
    let long = mc_estimate(3.0, &s, &m, 100_000, 2.0 * t, 21).unwrap();
    let allowed = short.truncation_bound + 3.0 * (short.std_error.powi(2) + long.std_error.powi(2)).sqrt();
    assert!((short.mean - long.mean).abs() <= allowed);
    assert!((short.truncation_bound - (-0.05f64 * t).exp()).abs() < 1e-15);
}

#[test]
fn full_reinsurance_evaluation_is_transport() {
    let m = exp_model(0.05, Penalty::W2);
    let g = grid(281);
    let s = Strategy::constant(g, 0.0).unwrap();
    let phi = policy_evaluate(&s, &m, BoundaryData::smooth_ruin(&m, UpperBoundary::Value(0.0))).unwrap();
    for (x, v) in g.points().iter().zip(phi.values()) {
        assert!((v - 0.5 * (-0.05 * x / 0.2f64).exp()).abs() < 1e-5, "x={x}");
    }
}

#[test]
fn closed_form_solves_the_hamiltonian() {
    let m = exp_model(0.05, Penalty::W1);
    let r = decay_root(0.05);
    let f = GridFunction::from_fn(grid(14_001), |x| (1.0 - r) * (-r * x).exp()).unwrap();
    for x in [0.5, 3.0, 9.0] {
        let h = hamiltonian(&f, -r * f.eval(x), x, 1.0, &m).unwrap();
        assert!(h.abs() < 1e-6, "x={x}: {h}");
    }
    let zero = GridFunction::constant(grid(141), 0.0).unwrap();
    assert!((hamiltonian(&zero, 0.0, 2.0, 1.0, &m).unwrap() - (-2f64).exp()).abs() < 1e-15);
    let k = GridFunction::constant(grid(141), 0.3).unwrap();
    assert!((hamiltonian(&k, 0.0, 6.0, 0.0, &m).unwrap() + 0.05 * 0.3).abs() < 1e-15);
}

#[test]
fn survival_integral_matches_brute_force_midpoint_sums() {
    let g = grid(141);
    let f = GridFunction::from_fn(g, |z| 1.0 / (1.0 + z * z)).unwrap();
    let r = Retention::Proportional;
    for dist in [ClaimDistribution::exponential(1.0).unwrap(), ClaimDistribution::pareto(3.0).unwrap()] {
        for (x, u) in [(2.0, 1.0), (5.3, 0.4), (13.0, 0.75)] {
            let rho = x / u;
            let n = 1_000_000;
            let dy = rho / n as f64;
            let brute: f64 = (0..n)
                .map(|k| {
                    let y = (k as f64 + 0.5) * dy;
                    f.eval(x - u * y) * dist.density(y) * dy
                })
                .sum();
            let exact = survival_integral(&f, x, u, &dist, &r).unwrap();
            let adaptive = survival_integral_adaptive(&f, x, u, &dist, 1e-11).unwrap();
            assert!((exact - brute).abs() < 1e-6, "{} x={x} u={u}", dist.name());
            assert!((exact - adaptive).abs() < 1e-9);
        }
    }
}

#[test]
fn ruin_integral_is_bounded_by_tail_mass() {
    let r = Retention::Proportional;
    for dist in [ClaimDistribution::exponential(1.0).unwrap(), ClaimDistribution::pareto(3.0).unwrap()] {
        for (x, u) in [(0.0, 1.0), (2.0, 0.5), (10.0, 1.0)] {
            let tail = dist.survival(x / u);
            let w1 = ruin_integral(&Penalty::W1, x, u, &dist, &r).unwrap();
            let c = ruin_integral(&Penalty::constant(0.25).unwrap(), x, u, &dist, &r).unwrap();
            assert!((w1 - tail).abs() < 1e-14);
            assert!(c <= 0.25 * tail + 1e-15);
        }
    }
}

#[test]
fn inconsistent_mean_claim_is_rejected() {
    let err = RiskModel::new(
        ModelParams::new(1.0, 1.0, 0.5, 0.7, 0.1).unwrap(),
        ClaimDistribution::pareto(3.0).unwrap(),
        Penalty::W2,
    )
    .unwrap_err();
    assert!(matches!(err, Error::InvalidParameter { name: "beta", .. }));
}

#[test]
fn converged_value_is_a_fixed_point_of_the_one_step_operator() {
    let m = exp_model(0.05, Penalty::W1);
    let report = policy_iteration(
        &Strategy::constant(grid(701), 1.0).unwrap(),
        &m,
        &PolicyIterationConfig::default(),
    )
    .unwrap();
    let v = report.value();
    let s = report.strategy();
    for (k, x) in [1.0, 4.0, 9.0].into_iter().enumerate() {
        let est = one_step_estimate(x, s, v, &m, 400_000, 100 + k as u64).unwrap();
        let gap = (est.mean - v.eval(x)).abs();
        assert!(gap <= 3.0 * est.std_error + 2e-4, "x={x}: {} vs {} (SE {})", est.mean, v.eval(x), est.std_error);
    }
}

#[test]
fn smooth_ruin_value_at_origin_and_suboptimality_against_simulation() {
    let m = exp_model(0.1, Penalty::W2);
    let report = policy_iteration(
        &Strategy::constant(grid(281), 1.0).unwrap(),
        &m,
        &PolicyIterationConfig::default(),
    )
    .unwrap();
    assert!(report.converged);
    let v = report.value();
    assert!(m.premium(report.strategy().controls()[0]) < 0.0);
    assert!((v.values()[0] - 0.5).abs() < 1e-9);
    for u in [0.25, 0.8] {
        let s = Strategy::constant(*v.grid(), u).unwrap();
        for x in [1.0, 4.0] {
            let est = mc_estimate(x, &s, &m, 100_000, 200.0, 77).unwrap();
            assert!(v.eval(x) <= est.mean + 3.0 * est.std_error, "u={u} x={x}");
        }
    }
    let upper = TopBoundary::Asymptotic.resolve(report.strategy(), &m).unwrap();
    assert!(matches!(upper, UpperBoundary::Decay(g) if g > 0.0));
}
