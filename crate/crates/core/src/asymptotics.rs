//! Adjustment coefficients of the discounted Lundberg equation
//!
//! ```text
//! λ(m̂_Y(uγ) − 1) − δ − c(u)γ = 0
//! ```
//!
//! for constant proportional retention `u`, their maximization over `u`, and the closed
//! form maximizer for exponential claims.

use crate::error::{invalid, Error, Result};
use crate::model::{ClaimDistribution, ModelParams};

/// Positive root `γ` of the Lundberg equation for a constant control.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjustmentCoefficient {
    pub gamma: f64,
    pub strategy_u: f64,
}

/// Left-hand side of the discounted Lundberg equation.
pub fn lundberg_residual(gamma: f64, u: f64, params: &ModelParams, dist: &ClaimDistribution) -> Result<f64> {
    let mgf = dist.mgf(u * gamma)?;
    Ok(params.lambda * (mgf - 1.0) - params.delta - params.premium(u) * gamma)
}

pub fn adjustment_coefficient(u: f64, params: &ModelParams, dist: &ClaimDistribution) -> Result<AdjustmentCoefficient> {
    let sup = dist
        .mgf_domain_sup()
        .ok_or_else(|| Error::NoAdjustmentCoefficient(dist.name()))?;
    let u0 = params.premium_zero();
    if !(u > u0 && u <= 1.0) {
        return Err(invalid("u", format!("constant control must lie in ({u0}, 1], got {u}")));
    }
    let l = |g: f64| lundberg_residual(g, u, params, dist);
    let pole = sup / u;

    // right end: the residual explodes at the pole of the MGF
    let mut hi = None;
    for k in 1..=1074 {
        let g = pole * (1.0 - 0.5f64.powi(k));
        if g >= pole {
            break;
        }
        if l(g)? > 0.0 {
            hi = Some(g);
            break;
        }
    }
    let no_root = |reason: &str| Error::NoPositiveRoot {
        u,
        reason: reason.to_string(),
    };
    let hi = hi.ok_or_else(|| no_root("residual never turns positive below the MGF pole"))?;

    // left end: 0 when δ > 0, otherwise a point where the convex residual dips below zero
    let lo = if params.delta > 0.0 {
        0.0
    } else {
        let slope = params.lambda * u * dist.mean() - params.premium(u);
        if slope >= 0.0 {
            return Err(no_root("net profit condition fails"));
        }
        let mut g = hi;
        loop {
            g *= 0.5;
            if g < 1e-300 {
                return Err(no_root("no negative residual found near zero"));
            }
            if l(g)? < 0.0 {
                break g;
            }
        }
    };

    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if l(mid)? < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let gamma = if l(b)?.abs() < l(a)?.abs() { b } else { a };
    if !(gamma > 0.0) {
        return Err(no_root("root collapsed onto zero"));
    }
    Ok(AdjustmentCoefficient { gamma, strategy_u: u })
}

/// Closed-form asymptotically optimal retention for exponential claims,
///
/// ```text
/// u* = λ(θ−η)(1 − sqrt(1/(1+θ))) / (δ + 2λ(1 − sqrt(1+θ)) + θλ),
/// ```
///
/// which does not depend on the mean claim size.
pub fn asymptotic_optimal_u(params: &ModelParams, dist: &ClaimDistribution) -> Result<f64> {
    if !matches!(dist, ClaimDistribution::Exponential { .. }) {
        return Err(invalid(
            "claims",
            format!("closed-form asymptotic strategy holds for exponential claims only, got {}", dist.name()),
        ));
    }
    let ModelParams {
        lambda,
        eta,
        theta,
        delta,
        ..
    } = *params;
    let root = (1.0 + theta).sqrt();
    Ok(lambda * (theta - eta) * (1.0 - 1.0 / root) / (delta + 2.0 * lambda * (1.0 - root) + theta * lambda))
}

/// Maximizes `γ(u)` over `(premium_zero, 1]` by golden-section search.
pub fn maximize_adjustment_coefficient(
    params: &ModelParams,
    dist: &ClaimDistribution,
    tol: f64,
) -> Result<(f64, AdjustmentCoefficient)> {
    if dist.mgf_domain_sup().is_none() {
        return Err(Error::NoAdjustmentCoefficient(dist.name()));
    }
    let objective = |u: f64| match adjustment_coefficient(u, params, dist) {
        Ok(a) => Ok(a.gamma),
        Err(Error::NoPositiveRoot { .. }) => Ok(0.0),
        Err(e) => Err(e),
    };
    let u0 = params.premium_zero();
    let mut a = u0 + 1e-12 * (1.0 - u0);
    let mut b = 1.0;
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = objective(c)?;
    let mut fd = objective(d)?;
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = objective(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = objective(d)?;
        }
    }
    // the bracket may have collapsed onto the boundary u = 1
    let mut best = 0.5 * (a + b);
    if objective(1.0)? > objective(best)? {
        best = 1.0;
    }
    let coefficient = adjustment_coefficient(best, params, dist)?;
    Ok((best, coefficient))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(delta: f64) -> ModelParams {
        ModelParams::new(1.0, 1.0, 0.5, 0.7, delta).unwrap()
    }

    fn exp1() -> ClaimDistribution {
        ClaimDistribution::exponential(1.0).unwrap()
    }

    #[test]
    fn undiscounted_exponential_root() {
        let a = adjustment_coefficient(1.0, &params(0.0), &exp1()).unwrap();
        assert!((a.gamma - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn discounted_root_matches_scan() {
        // independent scan of 1/(1−γ) − 1 − 0.05 − 1.5γ over (0, 1)
        let f = |g: f64| 1.0 / (1.0 - g) - 1.0 - 0.05 - 1.5 * g;
        let mut scan = 0.0;
        let n = 1_000_000;
        for k in 1..n {
            let g = k as f64 / n as f64;
            if f(g) > 0.0 {
                scan = g;
                break;
            }
        }
        let a = adjustment_coefficient(1.0, &params(0.05), &exp1()).unwrap();
        assert!((a.gamma - scan).abs() < 2e-6, "{} vs {scan}", a.gamma);
        let p = params(0.05);
        assert!(lundberg_residual(a.gamma, 1.0, &p, &exp1()).unwrap().abs() < 1e-10);
        assert!(lundberg_residual(a.gamma * (1.0 - 1e-9), 1.0, &p, &exp1()).unwrap() < 0.0);
        assert!(lundberg_residual(a.gamma * (1.0 + 1e-9), 1.0, &p, &exp1()).unwrap() > 0.0);
    }

    #[test]
    fn pareto_has_no_adjustment_coefficient() {
        let p = ClaimDistribution::pareto(3.0).unwrap();
        for u in [0.3, 1.0] {
            assert!(matches!(
                adjustment_coefficient(u, &params(0.05), &p),
                Err(Error::NoAdjustmentCoefficient(_))
            ));
        }
        assert!(matches!(
            maximize_adjustment_coefficient(&params(0.05), &p, 1e-8),
            Err(Error::NoAdjustmentCoefficient(_))
        ));
    }

    #[test]
    fn net_profit_failure() {
        // without discounting a root needs c(u) > λβu, i.e. u > (θ−η)/θ = 0.9 here
        let p = ModelParams::new(1.0, 1.0, 0.05, 0.5, 0.0).unwrap();
        assert!(adjustment_coefficient(0.95, &p, &exp1()).is_ok());
        assert!(matches!(
            adjustment_coefficient(0.85, &p, &exp1()),
            Err(Error::NoPositiveRoot { .. })
        ));
    }

    #[test]
    fn closed_form_values() {
        let u05 = asymptotic_optimal_u(&params(0.05), &exp1()).unwrap();
        let u10 = asymptotic_optimal_u(&params(0.1), &exp1()).unwrap();
        assert!((u05 - 0.3275).abs() < 1e-4, "{u05}");
        assert!((u10 - 0.2423).abs() < 1e-4, "{u10}");
        for beta in [0.5, 5.0] {
            let p = ModelParams::new(1.0, beta, 0.5, 0.7, 0.05).unwrap();
            let d = ClaimDistribution::exponential(1.0 / beta).unwrap();
            assert_eq!(asymptotic_optimal_u(&p, &d).unwrap(), u05);
        }
        assert!(asymptotic_optimal_u(&params(0.05), &ClaimDistribution::pareto(3.0).unwrap()).is_err());
    }

    #[test]
    fn maximizer_agrees_with_closed_form() {
        for delta in [0.01, 0.05, 0.1, 0.2] {
            let p = params(delta);
            let (u, a) = maximize_adjustment_coefficient(&p, &exp1(), 1e-9).unwrap();
            let closed = asymptotic_optimal_u(&p, &exp1()).unwrap();
            assert!((u - closed).abs() < 1e-3, "delta={delta}: {u} vs {closed}");
            assert!(a.gamma > 0.0);
        }
    }

    #[test]
    fn maximizer_is_scale_free_in_beta() {
        for beta in [0.5, 5.0] {
            let p = ModelParams::new(1.0, beta, 0.5, 0.7, 0.05).unwrap();
            let d = ClaimDistribution::exponential(1.0 / beta).unwrap();
            let (u, _) = maximize_adjustment_coefficient(&p, &d, 1e-9).unwrap();
            assert!((u - 0.3275).abs() < 1e-3);
        }
    }
}
