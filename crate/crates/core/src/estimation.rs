//! Maximum-likelihood fitting, observed information and delta-method intervals.

use nalgebra::DMatrix;

use crate::amh::{logistic_cdf, logistic_density, logit};
use crate::data::{Dataset, Design};
use crate::error::{Error, Result};
use crate::likelihood::{compress, patterns_loglik, PROB_FLOOR};
use crate::optim::{hessian_from_gradient, max_abs, minimize, OptimOptions};
use crate::params::{dot, Layout, ParamVector, ThresholdParam};

/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Default)]
pub struct FitOptions {
    pub optim: OptimOptions,
    pub thresholds: ThresholdParam,
    /// Starting point; marginal fits are used when absent.
    pub start: Option<ParamVector>,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub estimates: ParamVector,
    /// Inverse observed information on the `ψ` scale (thresholds as `τ`,
    /// association as `ζ`, Cholesky factors as `l`).
    pub vcov: DMatrix<f64>,
    pub loglik: f64,
    pub converged: bool,
    pub n_iter: usize,
    /// `max |∂l/∂free|` at the reported optimum.
    pub gradient_norm: f64,
    /// Log-likelihood after every accepted optimiser step.
    pub trace: Vec<f64>,
    /// A random-effect scale collapsed towards zero.
    pub boundary: bool,
    pub notes: Vec<String>,
    pub design: Design,
    /// Total observation weight.
    pub n_obs: f64,
}

impl FitResult {
    pub fn psi(&self) -> Vec<f64> {
        self.estimates.to_psi()
    }

    pub fn layout(&self) -> Layout {
        self.estimates.layout()
    }

    pub fn names(&self) -> Vec<String> {
        self.layout().names(&self.design)
    }

    pub fn std_errors(&self) -> Vec<f64> {
        (0..self.vcov.nrows()).map(|i| self.vcov[(i, i)].sqrt()).collect()
    }

    /// Wald 95% interval for entry `i` of `ψ`.
    pub fn wald_interval(&self, i: usize) -> (f64, f64) {
        let est = self.psi()[i];
        let se = self.vcov[(i, i)].sqrt();
        (est - Z_95 * se, est + Z_95 * se)
    }

    /// `ω` for association column `j` with a 95% interval computed on the
    /// Fisher scale and back-transformed.
    pub fn omega_interval(&self, j: usize) -> (f64, f64, f64) {
        let i = self.layout().zeta_start() + j;
        let (lo, hi) = self.wald_interval(i);
        (self.estimates.zeta[j].tanh(), lo.tanh(), hi.tanh())
    }
}

/// Result of optimising a log-likelihood over the free parametrisation.
pub(crate) struct RawFit {
    pub params: ParamVector,
    pub loglik: f64,
    /// Observed information on the free scale.
    pub information: DMatrix<f64>,
    pub free: Vec<f64>,
    pub mode: ThresholdParam,
    pub converged: bool,
    pub n_iter: usize,
    pub gradient_norm: f64,
    pub trace: Vec<f64>,
}

impl RawFit {
    /// Inverse information mapped to the `ψ` scale.
    pub fn vcov(&self) -> Result<DMatrix<f64>> {
        let v_free = invert_information(&self.information)?;
        let jac = ParamVector::psi_jacobian(&self.params.layout(), &self.free, self.mode);
        Ok(&jac * v_free * jac.transpose())
    }

    /// As [`RawFit::vcov`] with the listed free coordinates treated as fixed;
    /// their rows and columns are `NaN`.
    pub fn vcov_excluding(&self, excluded: &[usize]) -> Result<DMatrix<f64>> {
        let n = self.free.len();
        let kept: Vec<usize> = (0..n).filter(|i| !excluded.contains(i)).collect();
        let sub = DMatrix::from_fn(kept.len(), kept.len(), |i, j| self.information[(kept[i], kept[j])]);
        let v_sub = invert_information(&sub)?;
        let mut v_free = DMatrix::from_element(n, n, f64::NAN);
        for (i, &ki) in kept.iter().enumerate() {
            for (j, &kj) in kept.iter().enumerate() {
                v_free[(ki, kj)] = v_sub[(i, j)];
            }
        }
        let jac = ParamVector::psi_jacobian(&self.params.layout(), &self.free, self.mode);
        // the Jacobian is block diagonal, so NaN must not leak through zero entries
        Ok(DMatrix::from_fn(n, n, |r, c| {
            let mut acc = 0.0;
            for a in 0..n {
                if jac[(r, a)] == 0.0 {
                    continue;
                }
                for b in 0..n {
                    if jac[(c, b)] != 0.0 {
                        acc += jac[(r, a)] * v_free[(a, b)] * jac[(c, b)];
                    }
                }
            }
            acc
        }))
    }
}

/// Maximise `loglik` (which returns the log-likelihood and writes its
/// `ψ`-scale gradient) starting from `start`.
pub(crate) fn maximise<F>(start: &ParamVector, mode: ThresholdParam, opts: &OptimOptions, mut loglik: F) -> RawFit
where
    F: FnMut(&ParamVector, &mut [f64]) -> f64,
{
    let layout = start.layout();
    let n = layout.len();
    let mut grad_psi = vec![0.0; n];
    let mut objective = |free: &[f64], g: &mut [f64]| -> f64 {
        let params = ParamVector::from_free(&layout, free, mode);
        if params.validate().is_err() {
            return f64::INFINITY;
        }
        let ll = loglik(&params, &mut grad_psi);
        let jac = ParamVector::psi_jacobian(&layout, free, mode);
        for (c, gc) in g.iter_mut().enumerate() {
            *gc = -(0..n).map(|r| jac[(r, c)] * grad_psi[r]).sum::<f64>();
        }
        -ll
    };
    let x0 = start.to_free(mode);
    let res = minimize(&mut objective, &x0, opts);
    let (mut x, mut value, mut grad) = (res.x, res.value, res.gradient);
    let mut trace = res.trace;
    let mut n_iter = res.n_iter;
    let mut information = hessian_from_gradient(
        |x, g| {
            objective(x, g);
        },
        &x,
    );
    // Quasi-Newton can stall once the remaining decrease is below the
    // resolution of the objective; Newton steps on the gradient still work.
    let mut converged = res.converged;
    for _ in 0..NEWTON_POLISH {
        if converged || n_iter >= opts.max_iter {
            break;
        }
        let Some(step) = newton_step(&information, &grad) else { break };
        let trial: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
        let mut g = vec![0.0; n];
        let v = objective(&trial, &mut g);
        if !(v.is_finite() && v <= value + 1e-12 * (1.0 + value.abs()) && max_abs(&g) < max_abs(&grad)) {
            break;
        }
        (x, value, grad) = (trial, v, g);
        trace.push(value);
        n_iter += 1;
        converged = max_abs(&grad) <= opts.grad_tol;
        information = hessian_from_gradient(
            |x, g| {
                objective(x, g);
            },
            &x,
        );
    }
    RawFit {
        params: ParamVector::from_free(&layout, &x, mode),
        loglik: -value,
        information,
        mode,
        converged,
        n_iter,
        gradient_norm: max_abs(&grad),
        trace: trace.iter().map(|v| -v).collect(),
        free: x,
    }
}

const NEWTON_POLISH: usize = 5;

/// `-H⁻¹ g`, or `None` when `H` is not positive definite.
fn newton_step(hessian: &DMatrix<f64>, grad: &[f64]) -> Option<Vec<f64>> {
    let chol = hessian.clone().cholesky()?;
    let g = nalgebra::DVector::from_column_slice(grad);
    Some((-chol.solve(&g)).as_slice().to_vec())
}

pub(crate) fn invert_information(info: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if info.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularInformation);
    }
    let inv = match info.clone().cholesky() {
        Some(c) => c.inverse(),
        None => info.clone().try_inverse().ok_or(Error::SingularInformation)?,
    };
    if (0..inv.nrows()).any(|i| !(inv[(i, i)] > 0.0 && inv[(i, i)].is_finite())) {
        return Err(Error::SingularInformation);
    }
    Ok((&inv + inv.transpose()) * 0.5)
}

pub(crate) fn check_fit_data(data: &Dataset) -> Result<()> {
    if data.is_empty() || data.total_weight() <= 0.0 {
        return Err(Error::InvalidData("no observations".into()));
    }
    data.check_levels()?;
    let t = data.cell_counts().row_sums();
    if t[0] <= 0.0 || t[1] <= 0.0 {
        return Err(Error::InvalidData("x takes only one value; theta is not identified".into()));
    }
    Ok(())
}

/// Fit the fixed-effect model by maximum likelihood.
///
/// Returns `Ok` with `converged == false` when the optimiser stops short of the
/// gradient tolerance; a singular observed information is an error.
pub fn fit(data: &Dataset, opts: &FitOptions) -> Result<FitResult> {
    check_fit_data(data)?;
    let start = match &opts.start {
        Some(s) => s.clone(),
        None => starting_values(data)?,
    };
    start.validate()?;
    start.check_against(data)?;
    if start.random.is_some() {
        return Err(Error::InvalidParameter(
            "random-effect block in a fixed-effect fit; use mixed::fit_mixed".into(),
        ));
    }
    let layout = start.layout();
    let patterns = compress(data.rows());
    let raw = maximise(&start, opts.thresholds, &opts.optim, |p, g| {
        patterns_loglik(p, &layout, &patterns, Some(g))
    });
    Ok(FitResult {
        vcov: raw.vcov()?,
        estimates: raw.params,
        loglik: raw.loglik,
        converged: raw.converged,
        n_iter: raw.n_iter,
        gradient_norm: raw.gradient_norm,
        trace: raw.trace,
        boundary: false,
        notes: vec![],
        design: data.design().clone(),
        n_obs: data.total_weight(),
    })
}

/// Moment-based values: intercept-only marginal fits in closed form, zero slopes.
fn moment_start(data: &Dataset) -> ParamVector {
    let total = data.total_weight();
    let t = data.cell_counts().row_sums();
    let mut cum = 0.0;
    let counts = data.level_counts();
    let tau = counts[..data.k() - 1]
        .iter()
        .map(|c| {
            cum += c;
            logit(cum / total)
        })
        .collect();
    let d = data.design();
    ParamVector {
        theta: -logit(t[1] / total),
        tau,
        beta_x: vec![0.0; d.x.len()],
        beta_y: vec![0.0; d.y.len()],
        zeta: vec![0.0; d.omega.len()],
        random: None,
    }
}

/// Marginal logistic regression `P(X = 1) = F(z₁·β_x - θ)`: returns `(θ, β_x)`.
pub fn marginal_logistic_fit(data: &Dataset) -> Result<(f64, Vec<f64>)> {
    check_fit_data(data)?;
    let start = moment_start(data);
    let n_x = data.design().x.len();
    let patterns = compress(data.rows());
    let mut x0 = vec![start.theta];
    x0.extend(&start.beta_x);
    let objective = |p: &[f64], g: &mut [f64]| -> f64 {
        g.iter_mut().for_each(|v| *v = 0.0);
        let mut ll = 0.0;
        for pat in &patterns {
            let a = p[0] - dot(&pat.z1, &p[1..]);
            let (prob, score) = if pat.x == 1 {
                (logistic_cdf(-a), -logistic_cdf(a))
            } else {
                (logistic_cdf(a), 1.0 - logistic_cdf(a))
            };
            ll += pat.weight * prob.max(PROB_FLOOR).ln();
            g[0] -= pat.weight * score;
            for (j, z) in pat.z1.iter().enumerate() {
                g[1 + j] += pat.weight * score * z;
            }
        }
        -ll
    };
    let res = minimize(objective, &x0, &OptimOptions::default());
    if !res.converged || res.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData(format!("marginal logistic fit failed: {}", res.message)));
    }
    debug_assert_eq!(res.x.len(), 1 + n_x);
    Ok((res.x[0], res.x[1..].to_vec()))
}

/// Marginal proportional-odds regression `P(Y ≤ k) = F(τ_k - z₂·β_y)`:
/// returns `(τ, β_y)`.
pub fn marginal_proportional_odds_fit(data: &Dataset) -> Result<(Vec<f64>, Vec<f64>)> {
    check_fit_data(data)?;
    let start = moment_start(data);
    let k = data.k();
    let patterns = compress(data.rows());
    // free: τ₁, log increments, β_y
    let mut x0 = vec![start.tau[0]];
    x0.extend(start.tau.windows(2).map(|w| (w[1] - w[0]).ln()));
    x0.extend(&start.beta_y);
    let unpack = |p: &[f64]| {
        let mut tau = vec![p[0]];
        for j in 1..k - 1 {
            let prev = tau[j - 1];
            tau.push(prev + p[j].exp());
        }
        tau
    };
    let objective = |p: &[f64], g: &mut [f64]| -> f64 {
        let tau = unpack(p);
        let beta = &p[k - 1..];
        let mut g_tau = vec![0.0; k - 1];
        g.iter_mut().for_each(|v| *v = 0.0);
        let mut ll = 0.0;
        for pat in &patterns {
            let shift = dot(&pat.z2, beta);
            let hi = if pat.y < k { tau[pat.y - 1] - shift } else { f64::INFINITY };
            let lo = if pat.y > 1 { tau[pat.y - 2] - shift } else { f64::NEG_INFINITY };
            let prob = (logistic_cdf(hi) - logistic_cdf(lo)).max(PROB_FLOOR);
            ll += pat.weight * prob.ln();
            let (dh, dl) = (logistic_density(hi) / prob, -logistic_density(lo) / prob);
            if pat.y < k {
                g_tau[pat.y - 1] -= pat.weight * dh;
            }
            if pat.y > 1 {
                g_tau[pat.y - 2] -= pat.weight * dl;
            }
            for (j, z) in pat.z2.iter().enumerate() {
                g[k - 1 + j] += pat.weight * (dh + dl) * z;
            }
        }
        // chain rule through the increments
        for i in 0..k - 1 {
            let factor = if i == 0 { 1.0 } else { p[i].exp() };
            g[i] = factor * g_tau[i..].iter().sum::<f64>();
        }
        -ll
    };
    let res = minimize(objective, &x0, &OptimOptions::default());
    if !res.converged || res.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData(format!(
            "marginal proportional-odds fit failed: {}",
            res.message
        )));
    }
    Ok((unpack(&res.x), res.x[k - 1..].to_vec()))
}

/// Starting values from the two marginal regressions with `ζ = 0`; falls back
/// to closed-form intercept-only values when a marginal fit fails.
pub fn starting_values(data: &Dataset) -> Result<ParamVector> {
    check_fit_data(data)?;
    let mut start = moment_start(data);
    if let Ok((theta, beta_x)) = marginal_logistic_fit(data) {
        start.theta = theta;
        start.beta_x = beta_x;
    }
    if let Ok((tau, beta_y)) = marginal_proportional_odds_fit(data) {
        start.tau = tau;
        start.beta_y = beta_y;
    }
    Ok(start)
}

/// Scale on which a delta-method interval is built before back-transforming.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Identity,
    /// For positive quantities such as odds ratios.
    Log,
    /// For quantities in `(-1, 1)`.
    Fisher,
}

impl Scale {
    fn forward(self, v: f64) -> f64 {
        match self {
            Scale::Identity => v,
            Scale::Log => v.ln(),
            Scale::Fisher => v.atanh(),
        }
    }

    fn inverse(self, v: f64) -> f64 {
        match self {
            Scale::Identity => v,
            Scale::Log => v.exp(),
            Scale::Fisher => v.tanh(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaEstimate {
    pub estimate: f64,
    /// Standard error on the transformed scale.
    pub se: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Delta-method standard error and 95% interval for `g(ψ)`.
///
/// The gradient is taken by central differences on the chosen scale; the
/// interval is symmetric there and back-transformed.
pub fn delta_method<G>(fit: &FitResult, g: G, scale: Scale) -> Result<DeltaEstimate>
where
    G: Fn(&[f64]) -> f64,
{
    let psi = fit.psi();
    let estimate = g(&psi);
    let link = |p: &[f64]| scale.forward(g(p));
    let center = scale.forward(estimate);
    if !center.is_finite() {
        return Err(Error::Domain(format!(
            "transform value {estimate} is outside the domain of the {scale:?} scale"
        )));
    }
    let grad = crate::optim::numerical_gradient(link, &psi);
    if grad.iter().all(|v| v.abs() < 1e-300) {
        return Err(Error::DegenerateGradient);
    }
    let n = psi.len();
    let mut var = 0.0;
    // skipping exact zeros keeps NaN blocks (fixed boundary parameters) out
    for i in (0..n).filter(|&i| grad[i] != 0.0) {
        for j in (0..n).filter(|&j| grad[j] != 0.0) {
            var += grad[i] * fit.vcov[(i, j)] * grad[j];
        }
    }
    let se = var.max(0.0).sqrt();
    Ok(DeltaEstimate {
        estimate,
        se,
        lower: scale.inverse(center - Z_95 * se),
        upper: scale.inverse(center + Z_95 * se),
    })
}
