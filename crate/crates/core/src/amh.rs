//! The Ali-Mikhail-Haq bivariate logistic distribution.
//!
//! With standard logistic marginals `F(u) = 1 / (1 + e^{-u})` the joint
//! distribution function is
//!
//! ```text
//! H(u, v) = 1 / (1 + e^{-u} + e^{-v} + (1 - ω) e^{-u-v}),   ω ∈ [-1, 1]
//! ```
//!
//! and `Λ₂*(μ, ν; ω)` denotes the same law shifted to locations `μ`, `ν`, i.e.
//! with distribution function `H(u - μ, v - ν)`. `ω = 0` is independence and
//! `ω = 1` is Gumbel's type 1 bivariate logistic distribution.
//!
//! Everything here is evaluated in log space where overflow is possible, since
//! linear predictors of ±35 or more are routine inside an optimizer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};

use crate::error::{Error, Result};

/// Parameters of `Λ₂*(μ, ν; ω)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmhParams {
    omega: f64,
    mu: f64,
    nu: f64,
}

impl AmhParams {
    pub fn new(omega: f64, mu: f64, nu: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&omega) {
            return Err(Error::InvalidParameter(format!(
                "association parameter must lie in [-1, 1], got {omega}"
            )));
        }
        if !mu.is_finite() || !nu.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "locations must be finite, got mu = {mu}, nu = {nu}"
            )));
        }
        Ok(Self { omega, mu, nu })
    }

    /// Zero locations.
    pub fn standard(omega: f64) -> Result<Self> {
        Self::new(omega, 0.0, 0.0)
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }
}

/// Standard logistic distribution function, total on the extended reals.
pub fn logistic_cdf(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// Standard logistic density.
pub fn logistic_density(u: f64) -> f64 {
    if u.is_infinite() {
        return 0.0;
    }
    let e = (-u.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

/// `log F(u)`.
pub(crate) fn log_logistic_cdf(u: f64) -> f64 {
    if u >= 0.0 {
        -(-u).exp().ln_1p()
    } else {
        u - u.exp().ln_1p()
    }
}

pub(crate) fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Log-sum-exp tolerant of `-inf` entries.
pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max == f64::INFINITY {
        return max;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// `log(1 - ω)`; `-inf` at `ω = 1`.
#[inline]
pub(crate) fn log_one_minus(omega: f64) -> f64 {
    (-omega).ln_1p()
}

/// Value and first derivatives of a bivariate distribution-type function
/// with respect to its two arguments and the association parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Partials {
    pub value: f64,
    pub d_u: f64,
    pub d_v: f64,
    pub d_omega: f64,
}

impl Partials {
    const ZERO: Partials = Partials {
        value: 0.0,
        d_u: 0.0,
        d_v: 0.0,
        d_omega: 0.0,
    };
}

/// `log D(u, v)` with `D = 1 + e^{-u} + e^{-v} + (1-ω) e^{-u-v}`, finite `u`, `v`.
#[inline]
fn log_denominator(u: f64, v: f64, lc: f64) -> f64 {
    log_sum_exp(&[0.0, -u, -v, lc - u - v])
}

/// Standardised cdf `H(u, v)` on the extended reals.
pub(crate) fn std_cdf(u: f64, v: f64, omega: f64) -> f64 {
    if u == f64::NEG_INFINITY || v == f64::NEG_INFINITY {
        return 0.0;
    }
    if u == f64::INFINITY {
        return logistic_cdf(v);
    }
    if v == f64::INFINITY {
        return logistic_cdf(u);
    }
    (-log_denominator(u, v, log_one_minus(omega))).exp()
}

/// `H` together with `∂H/∂u`, `∂H/∂v` and `∂H/∂ω`.
pub(crate) fn std_cdf_partials(u: f64, v: f64, omega: f64) -> Partials {
    if u == f64::NEG_INFINITY || v == f64::NEG_INFINITY {
        return Partials::ZERO;
    }
    if u == f64::INFINITY && v == f64::INFINITY {
        return Partials { value: 1.0, ..Partials::ZERO };
    }
    if u == f64::INFINITY {
        return Partials {
            value: logistic_cdf(v),
            d_v: logistic_density(v),
            ..Partials::ZERO
        };
    }
    if v == f64::INFINITY {
        return Partials {
            value: logistic_cdf(u),
            d_u: logistic_density(u),
            ..Partials::ZERO
        };
    }
    let lc = log_one_minus(omega);
    let ld = log_denominator(u, v, lc);
    Partials {
        value: (-ld).exp(),
        d_u: (-2.0 * ld - u + log_sum_exp(&[0.0, lc - v])).exp(),
        d_v: (-2.0 * ld - v + log_sum_exp(&[0.0, lc - u])).exp(),
        d_omega: (-2.0 * ld - u - v).exp(),
    }
}

/// `G(u, v) = P(X* > u, Y* ≤ v) = F(v) - H(u, v)`, evaluated as
/// `F(v) e^{-u} (1 + (1-ω) e^{-v}) / D` to avoid cancellation when `u` is very
/// negative.
pub(crate) fn std_upper(u: f64, v: f64, omega: f64) -> f64 {
    if v == f64::NEG_INFINITY || u == f64::INFINITY {
        return 0.0;
    }
    if u == f64::NEG_INFINITY {
        return logistic_cdf(v);
    }
    if v == f64::INFINITY {
        return logistic_cdf(-u);
    }
    let lc = log_one_minus(omega);
    let ld = log_denominator(u, v, lc);
    (log_logistic_cdf(v) - u + log_sum_exp(&[0.0, lc - v]) - ld).exp()
}

/// [`std_upper`] with its partials.
pub(crate) fn std_upper_partials(u: f64, v: f64, omega: f64) -> Partials {
    if v == f64::NEG_INFINITY || u == f64::INFINITY {
        return Partials::ZERO;
    }
    if u == f64::NEG_INFINITY {
        return Partials {
            value: logistic_cdf(v),
            d_v: logistic_density(v),
            ..Partials::ZERO
        };
    }
    if v == f64::INFINITY {
        return Partials {
            value: logistic_cdf(-u),
            d_u: -logistic_density(u),
            ..Partials::ZERO
        };
    }
    let h = std_cdf_partials(u, v, omega);
    Partials {
        value: std_upper(u, v, omega),
        d_u: -h.d_u,
        d_v: logistic_density(v) - h.d_v,
        d_omega: -h.d_omega,
    }
}

/// Joint distribution function of `Λ₂*(μ, ν; ω)` at `(u, v)`.
pub fn amh_cdf(p: &AmhParams, u: f64, v: f64) -> f64 {
    std_cdf(u - p.mu, v - p.nu, p.omega)
}

/// Joint density `∂²H/∂u∂v` of `Λ₂*(μ, ν; ω)`.
pub fn amh_density(p: &AmhParams, u: f64, v: f64) -> f64 {
    let (a, b) = (u - p.mu, v - p.nu);
    if !a.is_finite() || !b.is_finite() {
        return 0.0;
    }
    let lc = log_one_minus(p.omega);
    let ld = log_denominator(a, b, lc);
    // h = e^{-a-b} [(1+ω) + c e^{-a} + c e^{-b} + c² e^{-a-b}] / D³, c = 1-ω
    let bracket = log_sum_exp(&[p.omega.ln_1p(), lc - a, lc - b, 2.0 * lc - a - b]);
    (-a - b + bracket - 3.0 * ld).exp()
}

/// Partial sum `F G Σ_{n=0}^{order} ωⁿ (1-F)ⁿ (1-G)ⁿ` of the power-series form
/// of the cdf. `order = 1` is the Gumbel type 2 (FGM) distribution with the
/// same `ω`.
pub fn amh_cdf_series(p: &AmhParams, u: f64, v: f64, order: usize) -> Result<f64> {
    if p.omega.abs() >= 1.0 {
        return Err(Error::Domain(format!(
            "series form requires |omega| < 1, got {}",
            p.omega
        )));
    }
    let f = logistic_cdf(u - p.mu);
    let g = logistic_cdf(v - p.nu);
    let ratio = p.omega * (1.0 - f) * (1.0 - g);
    let mut term = 1.0;
    let mut sum = 1.0;
    for _ in 0..order {
        term *= ratio;
        sum += term;
    }
    Ok(f * g * sum)
}

/// Number of terms after which the geometric tail `|ω|^{n+1} / (1 - |ω|)` of
/// a series in `ω` drops below `tol`, capped at one million.
pub fn series_terms(omega: f64, tol: f64) -> usize {
    const CAP: usize = 1_000_000;
    let a = omega.abs();
    if a == 0.0 {
        return 0;
    }
    if a >= 1.0 {
        return CAP;
    }
    let n = ((tol * (1.0 - a)).ln() / a.ln()).ceil();
    if n.is_finite() && n > 0.0 {
        (n as usize).min(CAP)
    } else {
        1
    }
}

/// Latent covariance `Cov(X*, Y*) = Σ_{n≥1} ωⁿ/n²` truncated at `n_terms`.
///
/// At `ω = ±1` the exact limits `π²/6` and `-π²/12` are returned regardless of
/// `n_terms`; the series converges too slowly there to be useful.
pub fn latent_covariance(omega: f64, n_terms: usize) -> f64 {
    use std::f64::consts::PI;
    if omega == 1.0 {
        return PI * PI / 6.0;
    }
    if omega == -1.0 {
        return -PI * PI / 12.0;
    }
    let mut power = 1.0;
    let mut sum = 0.0;
    for n in 1..=n_terms {
        power *= omega;
        sum += power / (n * n) as f64;
    }
    sum
}

/// Latent correlation: [`latent_covariance`] over the logistic variance `π²/3`.
pub fn latent_correlation(omega: f64, n_terms: usize) -> f64 {
    latent_covariance(omega, n_terms) / (std::f64::consts::PI.powi(2) / 3.0)
}

/// Conditional moment generating function `E[e^{tY*} | X* = θ]`, `t ∈ (-1, 1)`.
pub fn conditional_mgf(p: &AmhParams, t: f64, theta: f64) -> Result<f64> {
    if !(t > -1.0 && t < 1.0) {
        return Err(Error::Domain(format!("mgf argument must lie in (-1, 1), got {t}")));
    }
    use statrs::function::gamma::ln_gamma;
    let w = p.omega;
    let x = theta - p.mu;
    let e = (-x).exp();
    let log_front = ln_gamma(t + 2.0) + ln_gamma(1.0 - t)
        - std::f64::consts::LN_2
        - t * log_sum_exp(&[0.0, -x])
        - (1.0 - t) * log_sum_exp(&[0.0, log_one_minus(w) - x]);
    let bracket = 1.0 + w + (1.0 - w) * (e + (1.0 + e) * (1.0 - t) / (1.0 + t));
    Ok((log_front + bracket.ln() + t * p.nu).exp())
}

/// Regression of `Y*` on `X*`: `E[Y* | X* = θ]`.
pub fn conditional_mean(p: &AmhParams, theta: f64) -> f64 {
    let w = p.omega;
    let c = 1.0 - w;
    let x = theta - p.mu;
    let (log_ratio, frac) = if x >= 0.0 {
        let e = (-x).exp();
        (
            (c * e).ln_1p() - e.ln_1p(),
            2.0 * c * (1.0 + e) / (1.0 + w + c * (1.0 + 2.0 * e)),
        )
    } else {
        // multiply through by e^{x} to keep everything bounded
        let ex = x.exp();
        (
            (ex + c).ln() - ex.ln_1p(),
            2.0 * c * (ex + 1.0) / ((1.0 + w) * ex + c * (ex + 2.0)),
        )
    };
    p.nu + 1.0 + log_ratio - frac
}

/// Exact sampler for `Λ₂*(μ, ν; ω)`, `ω ∈ [0, 1)`.
///
/// For `ω ∈ (0, 1)` it uses the geometric max-of-min construction: draw
/// `M ~ geom(1-ω)` on `{1, 2, …}`; for each of the `M` replicates draw fresh
/// `M_x, M_y ~ geom(1-ω)` and the minimum of that many standard logistic
/// variables; `X*` and `Y*` are the maxima of those minima over the
/// replicates. The minimum of `m` logistic variables is drawn directly from its
/// order-statistic law. `ω = 0` draws independent logistic pairs.
#[derive(Debug, Clone)]
pub struct AmhSampler {
    params: AmhParams,
    geometric: Option<Geometric>,
}

impl AmhSampler {
    pub fn new(params: AmhParams) -> Result<Self> {
        let w = params.omega;
        if !(0.0..1.0).contains(&w) {
            return Err(Error::Domain(format!(
                "sampling is available for omega in [0, 1) only, got {w}"
            )));
        }
        let geometric = if w > 0.0 {
            Some(Geometric::new(1.0 - w).map_err(|e| Error::InvalidParameter(e.to_string()))?)
        } else {
            None
        };
        Ok(Self { params, geometric })
    }

    pub fn params(&self) -> &AmhParams {
        &self.params
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let (x, y) = match &self.geometric {
            None => (logistic_draw(rng), logistic_draw(rng)),
            Some(geom) => {
                let replicates = geom.sample(rng) + 1;
                let mut x = f64::NEG_INFINITY;
                let mut y = f64::NEG_INFINITY;
                for _ in 0..replicates {
                    let mx = geom.sample(rng) + 1;
                    let my = geom.sample(rng) + 1;
                    x = x.max(logistic_min_draw(rng, mx));
                    y = y.max(logistic_min_draw(rng, my));
                }
                (x, y)
            }
        };
        (x + self.params.mu, y + self.params.nu)
    }
}

/// Standard logistic draw by inversion.
fn logistic_draw<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
    if u >= 1.0 {
        return logistic_draw(rng);
    }
    logit(u)
}

/// Minimum of `m` i.i.d. standard logistic variables, by inversion of
/// `P(min ≤ t) = 1 - (1 - F(t))^m`.
fn logistic_min_draw<R: Rng + ?Sized>(rng: &mut R, m: u64) -> f64 {
    let v: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
    let log_q = v.ln() / m as f64; // log(1 - F(t))
    if log_q == 0.0 {
        return logistic_min_draw(rng, m);
    }
    (-log_q.exp_m1()).ln() - log_q
}

/// `n` draws from `Λ₂*(μ, ν; ω)` with a ChaCha8 stream seeded by `seed`.
pub fn sample(p: &AmhParams, seed: u64, n: usize) -> Result<Vec<(f64, f64)>> {
    let sampler = AmhSampler::new(*p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| sampler.draw(&mut rng)).collect())
}
