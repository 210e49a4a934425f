//! Model primitives of the controlled Cramér-Lundberg reserve process.
//!
//! The reserve evolves as `X_t = x + ∫ c(u_s) ds − Σ r(Y_i, u_{T_i})` where claims
//! arrive at Poisson rate `λ`, the cedent keeps the fraction `u` of each claim and
//! pays the reinsurer under the expected value principle. The discounted penalty
//! `E[e^{-δτ} w(X_{τ-}, |X_τ|); τ < ∞]` is the quantity every other module works with.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Scalar model inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Claim intensity.
    pub lambda: f64,
    /// Expected claim height used by the premium principle.
    pub beta: f64,
    /// Safety loading of the cedent.
    pub eta: f64,
    /// Safety loading of the reinsurer, at least `eta`.
    pub theta: f64,
    /// Discount rate. Zero is accepted and yields undiscounted ruin quantities.
    pub delta: f64,
}

impl ModelParams {
    pub fn new(lambda: f64, beta: f64, eta: f64, theta: f64, delta: f64) -> Result<Self> {
        let p = Self {
            lambda,
            beta,
            eta,
            theta,
            delta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(name, format!("must be finite and > 0, got {v}")))
            }
        };
        positive("lambda", self.lambda)?;
        positive("beta", self.beta)?;
        positive("eta", self.eta)?;
        if !(self.theta.is_finite() && self.theta >= self.eta) {
            return Err(invalid(
                "theta",
                format!("reinsurer loading {} must be >= eta = {}", self.theta, self.eta),
            ));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(invalid("delta", format!("must be finite and >= 0, got {}", self.delta)));
        }
        Ok(())
    }

    /// Net premium rate `c(u) = λβ(η − θ + u(1+θ))` after paying for reinsurance.
    pub fn premium(&self, u: f64) -> f64 {
        self.lambda * self.beta * (self.eta - self.theta + u * (1.0 + self.theta))
    }

    /// Gross premium rate without reinsurance, `c(1) = λβ(1+η)`.
    pub fn gross_premium(&self) -> f64 {
        self.premium(1.0)
    }

    /// The retention level at which the net premium vanishes, `(θ−η)/(1+θ)`.
    pub fn premium_zero(&self) -> f64 {
        (self.theta - self.eta) / (1.0 + self.theta)
    }
}

/// Claim size law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ClaimDistribution {
    /// `F(y) = 1 − e^{−rate·y}`.
    Exponential { rate: f64 },
    /// `F(y) = 1 − (1+y)^{−shape}`, `shape > 1`.
    Pareto { shape: f64 },
}

impl ClaimDistribution {
    pub fn exponential(rate: f64) -> Result<Self> {
        let d = ClaimDistribution::Exponential { rate };
        d.validate()?;
        Ok(d)
    }

    pub fn pareto(shape: f64) -> Result<Self> {
        let d = ClaimDistribution::Pareto { shape };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ClaimDistribution::Exponential { rate } if !(rate.is_finite() && rate > 0.0) => {
                Err(invalid("rate", format!("must be finite and > 0, got {rate}")))
            }
            ClaimDistribution::Pareto { shape } if !(shape.is_finite() && shape > 1.0) => Err(
                invalid("shape", format!("must be finite and > 1 for a finite mean, got {shape}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> String {
        match *self {
            ClaimDistribution::Exponential { rate } => format!("Exponential(rate={rate})"),
            ClaimDistribution::Pareto { shape } => format!("Pareto(shape={shape})"),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ClaimDistribution::Exponential { rate } => 1.0 / rate,
            ClaimDistribution::Pareto { shape } => 1.0 / (shape - 1.0),
        }
    }

    pub fn cdf(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        1.0 - self.survival(y)
    }

    /// `1 − F(y)`, computed directly so that far tails keep their relative precision.
    pub fn survival(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 1.0;
        }
        if y == f64::INFINITY {
            return 0.0;
        }
        match *self {
            ClaimDistribution::Exponential { rate } => (-rate * y).exp(),
            ClaimDistribution::Pareto { shape } => (1.0 + y).powf(-shape),
        }
    }

    pub fn density(&self, y: f64) -> f64 {
        if y < 0.0 || y == f64::INFINITY {
            return 0.0;
        }
        match *self {
            ClaimDistribution::Exponential { rate } => rate * (-rate * y).exp(),
            ClaimDistribution::Pareto { shape } => shape * (1.0 + y).powf(-shape - 1.0),
        }
    }

    /// `∫_y^∞ t dF(t)`, the first moment restricted to the tail beyond `y`.
    pub fn tail_first_moment(&self, y: f64) -> f64 {
        let y = y.max(0.0);
        if y == f64::INFINITY {
            return 0.0;
        }
        match *self {
            ClaimDistribution::Exponential { rate } => (y + 1.0 / rate) * (-rate * y).exp(),
            ClaimDistribution::Pareto { shape } => {
                let s = (1.0 + y).powf(-shape);
                shape / (shape - 1.0) * (1.0 + y) * s - s
            }
        }
    }

    /// Supremum of the arguments at which the moment generating function is finite.
    /// `None` for heavy-tailed laws whose MGF is infinite for every positive argument.
    pub fn mgf_domain_sup(&self) -> Option<f64> {
        match *self {
            ClaimDistribution::Exponential { rate } => Some(rate),
            ClaimDistribution::Pareto { .. } => None,
        }
    }

    pub fn is_light_tailed(&self) -> bool {
        self.mgf_domain_sup().is_some()
    }

    /// `E[e^{αY}]`.
    pub fn mgf(&self, alpha: f64) -> Result<f64> {
        match *self {
            ClaimDistribution::Exponential { rate } if alpha < rate => Ok(rate / (rate - alpha)),
            _ => Err(Error::MgfUndefined {
                distribution: self.name(),
                alpha,
            }),
        }
    }

    /// The claim size `y ≥ rho` whose survival probability is `S(rho)·e^{−v}`.
    ///
    /// Maps the tail `[rho, ∞)` onto `v ∈ [0, ∞)` with `dF = S(rho) e^{−v} dv`.
    pub fn tail_point(&self, rho: f64, v: f64) -> f64 {
        match *self {
            ClaimDistribution::Exponential { rate } => rho + v / rate,
            ClaimDistribution::Pareto { shape } => (1.0 + rho) * (v / shape).exp() - 1.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ClaimDistribution::Exponential { rate } => Exp::new(rate)
                .expect("rate validated at construction")
                .sample(rng),
            ClaimDistribution::Pareto { shape } => {
                let v: f64 = 1.0 - rng.gen::<f64>();
                v.powf(-1.0 / shape) - 1.0
            }
        }
    }
}

/// Retention function `r(y, u)`: the part of a claim `y` paid by the cedent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Retention {
    /// `r(y, u) = u·y` with `u ∈ [0, 1]`.
    #[default]
    Proportional,
}

impl Retention {
    pub fn retain(&self, y: f64, u: f64) -> f64 {
        match self {
            Retention::Proportional => u * y,
        }
    }

    /// Smallest claim that exhausts a reserve `x`, i.e. `ρ(x, u) = x/u`.
    ///
    /// Full reinsurance (`u = 0`) returns `f64::INFINITY`: no claim can cause ruin.
    pub fn inverse(&self, x: f64, u: f64) -> f64 {
        match self {
            Retention::Proportional if u > 0.0 => x / u,
            Retention::Proportional => f64::INFINITY,
        }
    }
}

/// Cap applied to `w₂`.
pub const W2_CAP: f64 = 1e10;

type PenaltyFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// Penalty `w(surplus prior to ruin, deficit at ruin)`, bounded by a known constant.
#[derive(Clone)]
pub enum Penalty {
    /// `w ≡ 1`: the discounted ruin probability.
    W1,
    /// `w(x, y) = min(10^10, (x + 0.5)(y + 1)^2)`.
    W2,
    /// Constant penalty `w ≡ value`.
    Constant(f64),
    /// User supplied penalty together with its bound.
    Custom { func: Arc<PenaltyFn>, bound: f64 },
}

impl fmt::Debug for Penalty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Penalty::W1 => write!(f, "W1"),
            Penalty::W2 => write!(f, "W2"),
            Penalty::Constant(v) => write!(f, "Constant({v})"),
            Penalty::Custom { bound, .. } => write!(f, "Custom {{ bound: {bound} }}"),
        }
    }
}

impl Penalty {
    pub fn constant(value: f64) -> Result<Self> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(invalid("penalty", format!("constant must be finite and >= 0, got {value}")));
        }
        Ok(Penalty::Constant(value))
    }

    /// Wraps a continuous nonnegative penalty. Unbounded penalties are not supported,
    /// so the caller must provide the bound `M`.
    pub fn custom<F>(func: F, bound: f64) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        if !(bound.is_finite() && bound >= 0.0) {
            return Err(invalid("penalty bound", format!("must be finite and >= 0, got {bound}")));
        }
        Ok(Penalty::Custom {
            func: Arc::new(func),
            bound,
        })
    }

    pub fn eval(&self, surplus_prior: f64, deficit: f64) -> f64 {
        match self {
            Penalty::W1 => 1.0,
            Penalty::W2 => W2_CAP.min((surplus_prior + 0.5) * (deficit + 1.0).powi(2)),
            Penalty::Constant(v) => *v,
            Penalty::Custom { func, .. } => func(surplus_prior, deficit),
        }
    }

    /// Checked evaluation for custom penalties: the value must stay in `[0, M]`.
    pub fn eval_checked(&self, surplus_prior: f64, deficit: f64) -> Result<f64> {
        let value = self.eval(surplus_prior, deficit);
        let bound = self.bound();
        if value.is_finite() && (0.0..=bound).contains(&value) {
            Ok(value)
        } else {
            Err(Error::PenaltyOutOfBounds {
                surplus: surplus_prior,
                deficit,
                value,
                bound,
            })
        }
    }

    /// The bound `M` with `0 ≤ w ≤ M`.
    pub fn bound(&self) -> f64 {
        match self {
            Penalty::W1 => 1.0,
            Penalty::W2 => W2_CAP,
            Penalty::Constant(v) => *v,
            Penalty::Custom { bound, .. } => *bound,
        }
    }

    /// `Some(k)` when the penalty does not depend on its arguments.
    pub fn constant_value(&self) -> Option<f64> {
        match self {
            Penalty::W1 => Some(1.0),
            Penalty::Constant(v) => Some(*v),
            _ => None,
        }
    }

    /// Penalty paid on smooth ruin, `w(0, 0)`.
    pub fn at_origin(&self) -> f64 {
        self.eval(0.0, 0.0)
    }
}

/// Everything that defines a controlled risk process and its penalty.
#[derive(Debug, Clone)]
pub struct RiskModel {
    pub params: ModelParams,
    pub claims: ClaimDistribution,
    pub retention: Retention,
    pub penalty: Penalty,
}

impl RiskModel {
    pub fn new(params: ModelParams, claims: ClaimDistribution, penalty: Penalty) -> Result<Self> {
        params.validate()?;
        claims.validate()?;
        let mean = claims.mean();
        if (params.beta - mean).abs() > 1e-9 * mean {
            return Err(invalid(
                "beta",
                format!("premium loading uses beta = {} but {} has mean {mean}", params.beta, claims.name()),
            ));
        }
        Ok(Self {
            params,
            claims,
            retention: Retention::Proportional,
            penalty,
        })
    }

    pub fn premium(&self, u: f64) -> f64 {
        self.params.premium(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn base_params() -> ModelParams {
        ModelParams::new(1.0, 1.0, 0.5, 0.7, 0.05).unwrap()
    }

    #[test]
    fn premium_examples() {
        let p = base_params();
        assert!((p.premium(1.0) - 1.5).abs() < 1e-15);
        assert!((p.premium(0.0) + 0.2).abs() < 1e-15);
        assert!(p.premium(0.2 / 1.7).abs() < 1e-15);
        assert!((p.gross_premium() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn premium_zero_examples() {
        assert!((base_params().premium_zero() - 0.117_647_058_823_529_4).abs() < 1e-12);
        let equal = ModelParams::new(1.0, 1.0, 0.5, 0.5, 0.05).unwrap();
        assert_eq!(equal.premium_zero(), 0.0);
        let p = ModelParams::new(1.0, 1.0, 0.1, 0.7, 0.05).unwrap();
        let u0 = p.premium_zero();
        assert!((u0 - 0.6 / 1.7).abs() < 1e-15);
        assert!(p.premium(u0).abs() < 1e-15);
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(0.0, 1.0, 0.5, 0.7, 0.05).is_err());
        assert!(ModelParams::new(1.0, -1.0, 0.5, 0.7, 0.05).is_err());
        assert!(ModelParams::new(1.0, 1.0, 0.5, 0.4, 0.05).is_err());
        assert!(ModelParams::new(1.0, 1.0, 0.5, 0.7, -0.1).is_err());
        assert!(ModelParams::new(1.0, 1.0, 0.5, 0.7, f64::NAN).is_err());
    }

    #[test]
    fn retention_examples() {
        let r = Retention::Proportional;
        assert_eq!(r.retain(3.0, 1.0), 3.0);
        assert_eq!(r.retain(3.0, 0.0), 0.0);
        assert_eq!(r.retain(2.0, 0.25), 0.5);
        assert_eq!(r.inverse(2.0, 0.5), 4.0);
        assert_eq!(r.inverse(5.0, 1.0), 5.0);
        assert_eq!(r.inverse(2.0, 0.0), f64::INFINITY);
    }

    #[test]
    fn retention_inverse_roundtrip_on_lattice() {
        let r = Retention::Proportional;
        for i in 0..50 {
            let y = 0.37 * i as f64;
            for k in 1..=20 {
                let u = k as f64 / 20.0;
                let back = r.inverse(r.retain(y, u), u);
                assert!((back - y).abs() <= 1e-12 * (1.0 + y), "y={y} u={u}");
            }
        }
    }

    #[test]
    fn penalty_examples() {
        assert_eq!(Penalty::W1.eval(3.2, 7.7), 1.0);
        assert_eq!(Penalty::W2.eval(0.0, 0.0), 0.5);
        assert_eq!(Penalty::W2.eval(1.5, 1.0), 8.0);
        assert_eq!(Penalty::W2.eval(1e6, 1e6), W2_CAP);
        assert_eq!(Penalty::W1.bound(), 1.0);
        assert_eq!(Penalty::W2.bound(), 1e10);
        assert!(Penalty::custom(|_, _| 1.0, f64::INFINITY).is_err());
        let c = Penalty::custom(|x, _| x, 2.0).unwrap();
        assert!(c.eval_checked(1.0, 0.0).is_ok());
        assert!(c.eval_checked(3.0, 0.0).is_err());
    }

    #[test]
    fn mgf_domain() {
        let e = ClaimDistribution::exponential(2.0).unwrap();
        assert!((e.mgf(1.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(e.mgf(2.0).is_err());
        assert!(e.mgf(3.0).is_err());
        let p = ClaimDistribution::pareto(3.0).unwrap();
        assert!(p.mgf(0.1).is_err());
        assert!(p.mgf(1e-12).is_err());
        assert!(ClaimDistribution::pareto(1.0).is_err());
    }

    #[test]
    fn cdf_shape() {
        for d in [
            ClaimDistribution::exponential(1.0).unwrap(),
            ClaimDistribution::pareto(3.0).unwrap(),
        ] {
            assert_eq!(d.cdf(0.0), 0.0);
            let mut prev = 0.0;
            for i in 1..200 {
                let y = i as f64 * 0.5;
                let f = d.cdf(y);
                assert!(f >= prev);
                prev = f;
            }
            assert!(d.cdf(1e9) > 1.0 - 1e-12);
        }
    }

    #[test]
    fn tail_first_moment_matches_mean_at_zero() {
        for d in [
            ClaimDistribution::exponential(0.5).unwrap(),
            ClaimDistribution::pareto(3.0).unwrap(),
            ClaimDistribution::pareto(2.0).unwrap(),
        ] {
            assert!((d.tail_first_moment(0.0) - d.mean()).abs() < 1e-14);
        }
    }

    #[test]
    fn sampler_means_within_one_percent() {
        let n = 1_000_000;
        for d in [
            ClaimDistribution::exponential(1.0).unwrap(),
            ClaimDistribution::exponential(4.0).unwrap(),
            ClaimDistribution::pareto(3.0).unwrap(),
        ] {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let mean = (0..n).map(|_| d.sample(&mut rng)).sum::<f64>() / n as f64;
            assert!((mean / d.mean() - 1.0).abs() < 0.01, "{}: {mean}", d.name());
        }
    }
}
