//! Association measures between the binary and the ordinal response: global
//! odds ratios, binary-case correlations and the latent cross moment.

use crate::amh::{log_one_minus, log_sum_exp, logistic_cdf, AmhParams};
use crate::error::{Error, Result};
use crate::estimation::{delta_method, DeltaEstimate, FitResult, Scale};
use crate::observed::{CellTable, Thresholds};
use crate::params::{dot, ParamVector};

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Global odds ratio at standardised arguments `a = θ - z₁β_x`, `b = τ_k - z₂β_y`.
///
/// Written as
/// `[(1+ω) + e^{-a} + e^{-b} + (1-ω)e^{-a-b}] / [(1 + (1-ω)e^{-a})(1 + (1-ω)e^{-b})]`,
/// which is finite at `ω = 1` and reduces there to `2 + e^{-a} + e^{-b}`.
pub(crate) fn std_odds_ratio(a: f64, b: f64, omega: f64) -> f64 {
    let lc = log_one_minus(omega);
    let num = log_sum_exp(&[(omega).ln_1p(), -a, -b, lc - a - b]);
    let den = softplus(lc - a) + softplus(lc - b);
    (num - den).exp()
}

fn check_level(th: &Thresholds, k: usize) -> Result<()> {
    if k == 0 || k >= th.k() {
        return Err(Error::Domain(format!(
            "odds ratio level must lie in 1..={}, got {k}",
            th.k() - 1
        )));
    }
    Ok(())
}

fn standardised(th: &Thresholds, p: &AmhParams, k: usize, z1_effect: f64, z2_effect: f64) -> (f64, f64) {
    (
        th.theta() - p.mu() - z1_effect,
        th.tau()[k - 1] - p.nu() - z2_effect,
    )
}

/// Global odds ratio `ψ_k` of the table collapsed at `Y ≤ k` versus `Y > k`.
///
/// `z1_effect` and `z2_effect` are the linear predictors `z₁·β_x` and `z₂·β_y`.
/// At `ω = 1` the limit `2 + e^{-a} + e^{-b}` is returned.
pub fn odds_ratio(th: &Thresholds, p: &AmhParams, k: usize, z1_effect: f64, z2_effect: f64) -> Result<f64> {
    check_level(th, k)?;
    let (a, b) = standardised(th, p, k, z1_effect, z2_effect);
    Ok(std_odds_ratio(a, b, p.omega()))
}

/// Range of `ψ_k` over `ω ∈ [-1, 1]` with the thresholds and effects held fixed.
pub fn odds_ratio_range(th: &Thresholds, k: usize, z1_effect: f64, z2_effect: f64) -> Result<(f64, f64)> {
    check_level(th, k)?;
    let a = th.theta() - z1_effect;
    let b = th.tau()[k - 1] - z2_effect;
    Ok((std_odds_ratio(a, b, -1.0), std_odds_ratio(a, b, 1.0)))
}

/// Logistic-shaped approximation of `log ψ_k` next to its exact value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogOrApprox {
    pub approx: f64,
    pub exact: f64,
}

impl LogOrApprox {
    pub fn error(&self) -> f64 {
        self.approx - self.exact
    }
}

/// Approximate `log ψ_k` by
/// `[log(1+ω) + log(1-ω)] F(a - log(1-ω)) F(b - log(1-ω)) - log(1-ω)`.
///
/// The value always lies between `log(1+ω)` and `-log(1-ω)`.
pub fn log_or_approx(th: &Thresholds, p: &AmhParams, k: usize, z1_effect: f64, z2_effect: f64) -> Result<LogOrApprox> {
    check_level(th, k)?;
    let w = p.omega();
    if w.abs() >= 1.0 {
        return Err(Error::Domain(format!("log odds ratio approximation needs |omega| < 1, got {w}")));
    }
    let (a, b) = standardised(th, p, k, z1_effect, z2_effect);
    let lc = log_one_minus(w);
    let weight = logistic_cdf(a - lc) * logistic_cdf(b - lc);
    Ok(LogOrApprox {
        approx: (w.ln_1p() + lc) * weight - lc,
        exact: std_odds_ratio(a, b, w).ln(),
    })
}

/// Largest ratio between odds ratios at any two covariate settings, `1/(1-ω²)`.
pub fn max_or_ratio(omega: f64) -> f64 {
    1.0 / (1.0 - omega * omega)
}

/// Pearson correlation of `X` and `Y` when `K = 2`.
pub fn binary_correlation_amh(theta: f64, tau: f64, omega: f64) -> f64 {
    // numerator and denominator scaled by e^{-(|θ|+|τ|)/2}
    let s = (-(theta.abs() + tau.abs()) / 2.0).exp();
    let cross = (-theta.max(0.0) - tau.max(0.0)).exp();
    let (x, y) = ((-theta.abs()).exp(), (-tau.abs()).exp());
    omega * s / ((1.0 - omega * cross) + x + y + x * y)
}

/// Same correlation under the Gumbel type 2 latent law.
pub fn binary_correlation_type2(theta: f64, tau: f64, omega: f64) -> f64 {
    let s = (-(theta.abs() + tau.abs()) / 2.0).exp();
    omega * s / ((1.0 + (-theta.abs()).exp()) * (1.0 + (-tau.abs()).exp()))
}

/// Location `θ = τ` and value of the extremum of [`binary_correlation_amh`].
pub fn amh_correlation_extremum(omega: f64) -> (f64, f64) {
    let root = (1.0 - omega).sqrt();
    (0.5 * log_one_minus(omega), omega / (2.0 * (1.0 + root)))
}

/// Attainable correlation range for two Bernoulli variables with success
/// probabilities `pi1` and `pi2`.
pub fn frechet_correlation_bounds(pi1: f64, pi2: f64) -> Result<(f64, f64)> {
    for p in [pi1, pi2] {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("probabilities must lie in (0, 1), got {p}")));
        }
    }
    let (q1, q2) = (1.0 - pi1, 1.0 - pi2);
    let lower = (-(pi1 * pi2 / (q1 * q2)).sqrt()).max(-(q1 * q2 / (pi1 * pi2)).sqrt());
    let upper = (pi1 * q2 / (q1 * pi2)).sqrt().min((q1 * pi2 / (pi1 * q2)).sqrt());
    Ok((lower, upper))
}

/// Empirical global odds ratios `ψ_1..ψ_{K-1}` of a count table, no continuity
/// correction. A zero in a collapsed table gives `0` or `inf`.
pub fn observed_odds_ratios(table: &CellTable) -> Vec<f64> {
    (1..table.k())
        .map(|k| {
            let c = table.collapse_at(k);
            (c[1][1] * c[0][0]) / (c[1][0] * c[0][1])
        })
        .collect()
}

/// A fitted odds ratio with its 95% interval built on the log scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssocSummary {
    pub level: usize,
    pub psi: f64,
    pub log_psi_se: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Covariate values at which fitted association measures are evaluated.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Covariates {
    pub z1: Vec<f64>,
    pub z2: Vec<f64>,
    pub z_omega: Vec<f64>,
}

impl Covariates {
    /// Empty `z₁`, `z₂` and an intercept-only association model.
    pub fn intercept_only() -> Self {
        Self {
            z1: vec![],
            z2: vec![],
            z_omega: vec![1.0],
        }
    }

    fn check(&self, params: &ParamVector) -> Result<()> {
        if self.z1.len() != params.beta_x.len()
            || self.z2.len() != params.beta_y.len()
            || self.z_omega.len() != params.zeta.len()
        {
            return Err(Error::InvalidData(format!(
                "covariate lengths ({}, {}, {}) do not match the model ({}, {}, {})",
                self.z1.len(),
                self.z2.len(),
                self.z_omega.len(),
                params.beta_x.len(),
                params.beta_y.len(),
                params.zeta.len()
            )));
        }
        Ok(())
    }
}

/// Fitted `ψ_k` at covariates `z` for every level, conditional on zero random
/// effects in a mixed fit.
pub fn predicted_odds_ratios(fit: &FitResult, z: &Covariates) -> Result<Vec<AssocSummary>> {
    z.check(&fit.estimates)?;
    let layout = fit.layout();
    (1..layout.k)
        .map(|k| {
            let g = |psi: &[f64]| {
                let p = ParamVector::from_psi(&layout, psi);
                let a = p.theta - dot(&z.z1, &p.beta_x);
                let b = p.tau[k - 1] - dot(&z.z2, &p.beta_y);
                std_odds_ratio(a, b, p.omega_at(&z.z_omega))
            };
            let d = delta_method(fit, g, Scale::Log)?;
            Ok(AssocSummary {
                level: k,
                psi: d.estimate,
                log_psi_se: d.se,
                lower: d.lower,
                upper: d.upper,
            })
        })
        .collect()
}

/// Truncated series `scale × Σ_{n=1}^{n_terms} ω̂ⁿ/n²` for `E[X*Y*]` with a
/// delta-method interval through `ζ`.
///
/// `scale` multiplies estimate and interval, e.g. `σ_x σ_y` to express the
/// moment in natural units. Needs a single, intercept-only association term.
pub fn latent_cross_moment(fit: &FitResult, n_terms: usize, scale: f64) -> Result<DeltaEstimate> {
    if fit.estimates.zeta.len() != 1 {
        return Err(Error::InvalidParameter(format!(
            "latent cross moment needs a single association parameter, model has {}",
            fit.estimates.zeta.len()
        )));
    }
    let zi = fit.layout().zeta_start();
    let series = move |psi: &[f64]| {
        let w = psi[zi].tanh();
        let mut power = 1.0;
        (1..=n_terms)
            .map(|n| {
                power *= w;
                power / (n * n) as f64
            })
            .sum::<f64>()
            * scale
    };
    match delta_method(fit, series, Scale::Identity) {
        Err(Error::DegenerateGradient) if n_terms == 0 => Ok(DeltaEstimate {
            estimate: 0.0,
            se: 0.0,
            lower: 0.0,
            upper: 0.0,
        }),
        other => other,
    }
}
