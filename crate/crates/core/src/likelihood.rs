//! Log-likelihood of the bivariate model and its analytic gradient.
//!
//! Each observation contributes `log P(X = x, Y = y)` evaluated at the
//! standardised arguments
//!
//! ```text
//! a = θ - z₁·β_x,   hi = τ_y - z₂·β_y,   lo = τ_{y-1} - z₂·β_y,   ω = tanh(z_ω·ζ)
//! ```

use std::collections::BTreeMap;

use crate::amh::{std_cdf, std_cdf_partials, std_upper, std_upper_partials};
use crate::data::{Dataset, Observation};
use crate::error::{Error, Result};
use crate::params::{dot, Layout, ParamVector};

/// Cell probabilities are floored here before taking logs.
pub(crate) const PROB_FLOOR: f64 = 1e-300;

/// `log p` of one cell and its derivatives with respect to `a`, `hi`, `lo`, `ω`.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CellEval {
    pub logp: f64,
    pub d_a: f64,
    pub d_hi: f64,
    pub d_lo: f64,
    pub d_omega: f64,
}

#[inline]
pub(crate) fn cell_prob(x: u8, a: f64, hi: f64, lo: f64, omega: f64) -> f64 {
    let p = if x == 0 {
        std_cdf(a, hi, omega) - std_cdf(a, lo, omega)
    } else {
        std_upper(a, hi, omega) - std_upper(a, lo, omega)
    };
    p.max(0.0)
}

#[inline]
pub(crate) fn cell_logp(x: u8, a: f64, hi: f64, lo: f64, omega: f64) -> f64 {
    cell_prob(x, a, hi, lo, omega).max(PROB_FLOOR).ln()
}

pub(crate) fn cell_eval(x: u8, a: f64, hi: f64, lo: f64, omega: f64) -> CellEval {
    let (ph, pl) = if x == 0 {
        (std_cdf_partials(a, hi, omega), std_cdf_partials(a, lo, omega))
    } else {
        (std_upper_partials(a, hi, omega), std_upper_partials(a, lo, omega))
    };
    let p = (ph.value - pl.value).max(PROB_FLOOR);
    CellEval {
        logp: p.ln(),
        d_a: (ph.d_u - pl.d_u) / p,
        d_hi: ph.d_v / p,
        d_lo: -pl.d_v / p,
        d_omega: (ph.d_omega - pl.d_omega) / p,
    }
}

/// A distinct observation pattern with its total weight.
#[derive(Debug, Clone)]
pub(crate) struct Pattern {
    pub x: u8,
    pub y: usize,
    pub z1: Vec<f64>,
    pub z2: Vec<f64>,
    pub z_omega: Vec<f64>,
    pub weight: f64,
}

fn pattern_key(r: &Observation) -> Vec<u64> {
    let mut key = vec![r.x as u64, r.y as u64];
    key.extend(r.z1.iter().chain(&r.z2).chain(&r.z_omega).map(|z| z.to_bits()));
    key
}

/// Merge identical observations, summing weights. The result is sorted by
/// pattern, so the log-likelihood does not depend on row order.
pub(crate) fn compress<'a, I: IntoIterator<Item = &'a Observation>>(rows: I) -> Vec<Pattern> {
    let mut map: BTreeMap<Vec<u64>, Pattern> = BTreeMap::new();
    for r in rows {
        if r.weight == 0.0 {
            continue;
        }
        map.entry(pattern_key(r))
            .and_modify(|p| p.weight += r.weight)
            .or_insert_with(|| Pattern {
                x: r.x,
                y: r.y,
                z1: r.z1.clone(),
                z2: r.z2.clone(),
                z_omega: r.z_omega.clone(),
                weight: r.weight,
            });
    }
    map.into_values().collect()
}

/// Standardised arguments of a pattern under `params`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Predictors {
    pub a: f64,
    pub hi: f64,
    pub lo: f64,
    pub omega: f64,
}

pub(crate) fn predictors(params: &ParamVector, pat: &Pattern, k: usize) -> Predictors {
    let a = params.theta - dot(&pat.z1, &params.beta_x);
    let shift = dot(&pat.z2, &params.beta_y);
    let tau = |j: usize| {
        if j == 0 {
            f64::NEG_INFINITY
        } else if j >= k {
            f64::INFINITY
        } else {
            params.tau[j - 1]
        }
    };
    Predictors {
        a,
        hi: tau(pat.y) - shift,
        lo: tau(pat.y - 1) - shift,
        omega: params.omega_at(&pat.z_omega),
    }
}

/// Add `weight × ∂ log p / ∂ψ` for one pattern into `grad` (ψ scale).
pub(crate) fn accumulate_gradient(
    grad: &mut [f64],
    layout: &Layout,
    pat: &Pattern,
    pred: &Predictors,
    eval: &CellEval,
    weight: f64,
) {
    let wa = weight * eval.d_a;
    grad[0] += wa;
    let bx = layout.beta_x_start();
    for (j, z) in pat.z1.iter().enumerate() {
        grad[bx + j] -= wa * z;
    }
    if pat.y < layout.k {
        grad[pat.y] += weight * eval.d_hi;
    }
    if pat.y > 1 {
        grad[pat.y - 1] += weight * eval.d_lo;
    }
    let wb = weight * (eval.d_hi + eval.d_lo);
    let by = layout.beta_y_start();
    for (j, z) in pat.z2.iter().enumerate() {
        grad[by + j] -= wb * z;
    }
    let wz = weight * eval.d_omega * (1.0 - pred.omega * pred.omega);
    let zs = layout.zeta_start();
    for (j, z) in pat.z_omega.iter().enumerate() {
        grad[zs + j] += wz * z;
    }
}

/// Log-likelihood and ψ-scale gradient over precompressed patterns.
pub(crate) fn patterns_loglik(
    params: &ParamVector,
    layout: &Layout,
    patterns: &[Pattern],
    grad: Option<&mut [f64]>,
) -> f64 {
    match grad {
        None => patterns
            .iter()
            .map(|pat| {
                let p = predictors(params, pat, layout.k);
                pat.weight * cell_logp(pat.x, p.a, p.hi, p.lo, p.omega)
            })
            .sum(),
        Some(grad) => {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut ll = 0.0;
            for pat in patterns {
                let p = predictors(params, pat, layout.k);
                let e = cell_eval(pat.x, p.a, p.hi, p.lo, p.omega);
                ll += pat.weight * e.logp;
                accumulate_gradient(grad, layout, pat, &p, &e, pat.weight);
            }
            ll
        }
    }
}

fn check_inputs(params: &ParamVector, data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InvalidData("no observations".into()));
    }
    if params.random.is_some() {
        return Err(Error::InvalidParameter(
            "random-effect parameters given; use the marginal likelihood".into(),
        ));
    }
    params.validate()?;
    params.check_against(data)
}

/// Weighted log-likelihood of `data` under fixed-effect parameters.
///
/// Cells whose probability underflows contribute `log(1e-300)` rather than
/// `-inf`, so the result is always finite.
pub fn loglik(params: &ParamVector, data: &Dataset) -> Result<f64> {
    check_inputs(params, data)?;
    let patterns = compress(data.rows());
    Ok(patterns_loglik(params, &params.layout(), &patterns, None))
}

/// Analytic gradient of [`loglik`] with respect to `ψ`.
pub fn loglik_gradient(params: &ParamVector, data: &Dataset) -> Result<Vec<f64>> {
    check_inputs(params, data)?;
    let layout = params.layout();
    let patterns = compress(data.rows());
    let mut grad = vec![0.0; layout.len()];
    patterns_loglik(params, &layout, &patterns, Some(&mut grad));
    Ok(grad)
}
