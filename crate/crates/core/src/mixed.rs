//! Random-intercept extension: subject-level intercepts `(α_x, α_y) ~ N₂(0, D)`
//! integrated out by Gauss–Hermite quadrature.
//!
//! With `D = L Lᵀ`, `L = [[l₁, 0], [l₁₂, l₂]]`, each subject contributes
//!
//! ```text
//! log (1/π) Σ_i Σ_j w_i w_j L(√2 l₁ z_i, √2 (l₁₂ z_i + l₂ z_j))
//! ```
//!
//! where `L(u, v)` is the conditional likelihood of the subject's trials with
//! `a` shifted by `-u` and the `Y` thresholds by `-v`. The shared structure
//! uses the one-dimensional rule with `u = v = √2 l z_i`.

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};

use crate::amh::{log_sum_exp, logistic_cdf, std_cdf};
use crate::association::Covariates;
use crate::data::{Dataset, Design, Observation};
use crate::error::{Error, Result};
use crate::estimation::{check_fit_data, delta_method, fit, maximise, DeltaEstimate, FitOptions, FitResult, Scale};
use crate::likelihood::{
    accumulate_gradient, cell_eval, cell_logp, cell_prob, compress, predictors, CellEval, Pattern, Predictors,
};
use crate::observed::{CellKind, CellTable};
use crate::params::{dot, Layout, ParamVector, RandomEffects, RandomStructure};
use crate::quadrature::gh_rule;

/// A diagonal Cholesky entry below this is reported as a boundary solution.
pub const BOUNDARY_TOL: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomEffectSpec {
    /// Gauss–Hermite points per dimension.
    pub order: usize,
    pub structure: RandomStructure,
}

impl Default for RandomEffectSpec {
    fn default() -> Self {
        Self {
            order: 20,
            structure: RandomStructure::Correlated,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct MixedOptions {
    pub fit: FitOptions,
    pub random: RandomEffectSpec,
}

/// Density of `N₂(0, L Lᵀ)` at `(u, v)` written through the Cholesky factor.
pub fn cholesky_density(u: f64, v: f64, re: &RandomEffects) -> Result<f64> {
    let (l1, l2, l12) = match *re {
        RandomEffects::Correlated { l1, l2, l12 } => (l1, l2, l12),
        RandomEffects::Shared { .. } => {
            return Err(Error::Domain("the shared structure has a singular covariance".into()))
        }
    };
    if !(l1 > 0.0 && l2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Cholesky diagonal must be positive, got l1 = {l1}, l2 = {l2}"
        )));
    }
    let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
    Ok(phi(u / l1) * phi(v / l2 - l12 * u / (l1 * l2)) / (l1 * l2))
}

/// Quadrature node: standard normal scores and log weight.
#[derive(Debug, Clone, Copy)]
struct Node {
    zi: f64,
    zj: f64,
    log_w: f64,
}

fn nodes(structure: RandomStructure, order: usize) -> Result<Vec<Node>> {
    if order < 2 {
        return Err(Error::InvalidParameter(format!("quadrature order must be at least 2, got {order}")));
    }
    let rule = gh_rule(order)?;
    let pairs = rule.nodes.iter().zip(&rule.weights);
    Ok(match structure {
        RandomStructure::Correlated => pairs
            .clone()
            .flat_map(|(zi, wi)| {
                pairs.clone().map(move |(zj, wj)| Node {
                    zi: *zi,
                    zj: *zj,
                    log_w: (wi * wj / PI).ln(),
                })
            })
            .collect(),
        RandomStructure::Shared => pairs
            .map(|(zi, wi)| Node {
                zi: *zi,
                zj: 0.0,
                log_w: (wi / PI.sqrt()).ln(),
            })
            .collect(),
    })
}

/// Rows grouped by subject label (sorted), each group compressed.
fn group_subjects(data: &Dataset) -> Result<Vec<Vec<Pattern>>> {
    let mut groups: BTreeMap<&str, Vec<&Observation>> = BTreeMap::new();
    for (i, r) in data.rows().iter().enumerate() {
        let s = r.subject.ok_or_else(|| {
            Error::InvalidData(format!("row {} has no subject; random intercepts need grouped data", i + 1))
        })?;
        groups.entry(data.subjects()[s].as_str()).or_default().push(r);
    }
    Ok(groups
        .into_values()
        .map(compress)
        .filter(|p| !p.is_empty())
        .collect())
}

/// Random-effect positions `(u, v)` at a node and their derivatives with
/// respect to the random block of `ψ`.
fn node_shift(re: &RandomEffects, node: &Node) -> (f64, f64, [[f64; 2]; 3]) {
    let (l1, l2, l12) = re.cholesky();
    let u = SQRT_2 * l1 * node.zi;
    let v = SQRT_2 * (l12 * node.zi + l2 * node.zj);
    let s = SQRT_2;
    let d = match re {
        // rows: l1, l2, l12; columns: ∂u, ∂v
        RandomEffects::Correlated { .. } => [[s * node.zi, 0.0], [0.0, s * node.zj], [0.0, s * node.zi]],
        RandomEffects::Shared { .. } => [[s * node.zi, s * node.zi], [0.0; 2], [0.0; 2]],
    };
    (u, v, d)
}

fn shifted(p: &Predictors, u: f64, v: f64) -> Predictors {
    Predictors {
        a: p.a - u,
        hi: p.hi - v,
        lo: p.lo - v,
        omega: p.omega,
    }
}

struct Workspace {
    evals: Vec<CellEval>,
    node_ll: Vec<f64>,
    node_du: Vec<f64>,
    node_dv: Vec<f64>,
}

/// Marginal log-likelihood of one subject; adds its `ψ` gradient when asked.
fn subject_loglik(
    params: &ParamVector,
    re: &RandomEffects,
    layout: &Layout,
    pats: &[Pattern],
    nodes: &[Node],
    grad: Option<(&mut [f64], &mut Workspace)>,
) -> f64 {
    let base: Vec<Predictors> = pats.iter().map(|p| predictors(params, p, layout.k)).collect();
    let Some((grad, ws)) = grad else {
        let lls: Vec<f64> = nodes
            .iter()
            .map(|node| {
                let (u, v, _) = node_shift(re, node);
                node.log_w
                    + pats
                        .iter()
                        .zip(&base)
                        .map(|(pat, b)| {
                            let s = shifted(b, u, v);
                            pat.weight * cell_logp(pat.x, s.a, s.hi, s.lo, s.omega)
                        })
                        .sum::<f64>()
            })
            .collect();
        return log_sum_exp(&lls);
    };

    let np = pats.len();
    ws.evals.clear();
    ws.node_ll.clear();
    ws.node_du.clear();
    ws.node_dv.clear();
    for node in nodes {
        let (u, v, _) = node_shift(re, node);
        let (mut ll, mut du, mut dv) = (node.log_w, 0.0, 0.0);
        for (pat, b) in pats.iter().zip(&base) {
            let s = shifted(b, u, v);
            let e = cell_eval(pat.x, s.a, s.hi, s.lo, s.omega);
            ll += pat.weight * e.logp;
            du -= pat.weight * e.d_a;
            dv -= pat.weight * (e.d_hi + e.d_lo);
            ws.evals.push(e);
        }
        ws.node_ll.push(ll);
        ws.node_du.push(du);
        ws.node_dv.push(dv);
    }
    let log_i = log_sum_exp(&ws.node_ll);
    let mut mean = vec![CellEval::default(); np];
    let mut d_random = [0.0; 3];
    for (n, node) in nodes.iter().enumerate() {
        let post = (ws.node_ll[n] - log_i).exp();
        if post == 0.0 {
            continue;
        }
        for (m, e) in mean.iter_mut().zip(&ws.evals[n * np..(n + 1) * np]) {
            m.d_a += post * e.d_a;
            m.d_hi += post * e.d_hi;
            m.d_lo += post * e.d_lo;
            m.d_omega += post * e.d_omega;
        }
        let (_, _, d) = node_shift(re, node);
        for (r, dr) in d_random.iter_mut().enumerate() {
            *dr += post * (ws.node_du[n] * d[r][0] + ws.node_dv[n] * d[r][1]);
        }
    }
    for ((pat, b), m) in pats.iter().zip(&base).zip(&mean) {
        accumulate_gradient(grad, layout, pat, b, m, pat.weight);
    }
    let rs = layout.random_start();
    match re {
        RandomEffects::Correlated { .. } => {
            for r in 0..3 {
                grad[rs + r] += d_random[r];
            }
        }
        RandomEffects::Shared { .. } => grad[rs] += d_random[0],
    }
    log_i
}

struct Prepared {
    layout: Layout,
    subjects: Vec<Vec<Pattern>>,
    nodes: Vec<Node>,
}

impl Prepared {
    fn new(params: &ParamVector, data: &Dataset, order: usize) -> Result<Self> {
        let re = params.random.ok_or_else(|| {
            Error::InvalidParameter("marginal likelihood needs random-effect parameters".into())
        })?;
        params.validate()?;
        params.check_against(data)?;
        if data.is_empty() {
            return Err(Error::InvalidData("no observations".into()));
        }
        Ok(Self {
            layout: params.layout(),
            subjects: group_subjects(data)?,
            nodes: nodes(re.structure(), order)?,
        })
    }

    fn loglik(&self, params: &ParamVector, grad: Option<&mut [f64]>) -> f64 {
        let re = params.random.expect("checked on construction");
        match grad {
            None => self
                .subjects
                .iter()
                .map(|s| subject_loglik(params, &re, &self.layout, s, &self.nodes, None))
                .sum(),
            Some(grad) => {
                grad.iter_mut().for_each(|g| *g = 0.0);
                let mut ws = Workspace {
                    evals: vec![],
                    node_ll: vec![],
                    node_du: vec![],
                    node_dv: vec![],
                };
                self.subjects
                    .iter()
                    .map(|s| subject_loglik(params, &re, &self.layout, s, &self.nodes, Some((&mut *grad, &mut ws))))
                    .sum()
            }
        }
    }
}

/// Quadrature approximation of the marginal log-likelihood with `order`
/// points per dimension.
pub fn marginal_loglik(params: &ParamVector, data: &Dataset, order: usize) -> Result<f64> {
    let prep = Prepared::new(params, data, order)?;
    Ok(prep.loglik(params, None))
}

/// Analytic `ψ` gradient of [`marginal_loglik`].
pub fn marginal_loglik_gradient(params: &ParamVector, data: &Dataset, order: usize) -> Result<Vec<f64>> {
    let prep = Prepared::new(params, data, order)?;
    let mut grad = vec![0.0; prep.layout.len()];
    prep.loglik(params, Some(&mut grad));
    Ok(grad)
}

/// Free coordinates of a collapsed random block, plus any that become
/// unidentified with it.
fn boundary_coordinates(re: &RandomEffects, start: usize) -> Vec<usize> {
    match *re {
        RandomEffects::Correlated { l1, l2, .. } => {
            let mut v = vec![];
            if l1 < BOUNDARY_TOL {
                // with l₁ = 0 only l₁₂² + l₂² is identified
                v.extend([start, start + 2]);
            }
            if l2 < BOUNDARY_TOL {
                v.push(start + 1);
            }
            v
        }
        RandomEffects::Shared { l } if l < BOUNDARY_TOL => vec![start],
        RandomEffects::Shared { .. } => vec![],
    }
}

/// Fit the random-intercept model by maximising the quadrature likelihood.
///
/// Starting values come from the fixed-effect fit with unit-scale intercepts.
/// A diagonal Cholesky entry that collapses below [`BOUNDARY_TOL`] sets
/// `boundary`; those coordinates are then held fixed when inverting the
/// information and their standard errors are `NaN`.
pub fn fit_mixed(data: &Dataset, opts: &MixedOptions) -> Result<FitResult> {
    check_fit_data(data)?;
    let structure = opts.random.structure;
    let n_subjects = group_subjects(data)?.len();
    if n_subjects < 2 {
        return Err(Error::InvalidData(format!(
            "random intercepts need at least 2 subjects, found {n_subjects}"
        )));
    }
    let start = match &opts.fit.start {
        Some(s) if s.random.map(|r| r.structure()) == Some(structure) => s.clone(),
        Some(_) => {
            return Err(Error::InvalidParameter(
                "starting values must carry a random block of the requested structure".into(),
            ))
        }
        None => {
            let mut s = match fit(data, &FitOptions { start: None, ..opts.fit.clone() }) {
                Ok(f) => f.estimates,
                Err(_) => crate::estimation::starting_values(data)?,
            };
            s.random = Some(match structure {
                RandomStructure::Correlated => RandomEffects::Correlated {
                    l1: 0.5,
                    l2: 0.5,
                    l12: 0.0,
                },
                RandomStructure::Shared => RandomEffects::Shared { l: 0.5 },
            });
            s
        }
    };
    let prep = Prepared::new(&start, data, opts.random.order)?;
    let raw = maximise(&start, opts.fit.thresholds, &opts.fit.optim, |p, g| prep.loglik(p, Some(g)));
    let re = raw.params.random.expect("random block kept");
    let excluded = boundary_coordinates(&re, prep.layout.random_start());
    let boundary = !excluded.is_empty();
    let vcov = if boundary {
        raw.vcov_excluding(&excluded)?
    } else {
        raw.vcov()?
    };
    let mut notes = vec![];
    if boundary {
        notes.push("a random-intercept scale collapsed to zero; its standard error is not reported".into());
    }
    if data.design().omega != [Design::INTERCEPT] {
        notes.push("covariate-dependent association combined with random intercepts is an extension of the basic model".into());
    }
    Ok(FitResult {
        estimates: raw.params,
        vcov,
        loglik: raw.loglik,
        converged: raw.converged,
        n_iter: raw.n_iter,
        gradient_norm: raw.gradient_norm,
        trace: raw.trace,
        boundary,
        notes,
        design: data.design().clone(),
        n_obs: data.total_weight(),
    })
}

/// Population-averaged `ψ_k` at covariates `z`: the cell probabilities of the
/// collapsed table are integrated over the random intercepts first.
///
/// For a fit without random effects this is the conditional odds ratio.
pub fn population_association(fit: &FitResult, k: usize, z: &Covariates, order: usize) -> Result<f64> {
    population_odds_ratio(&fit.estimates, k, z, order)
}

fn population_odds_ratio(p: &ParamVector, k: usize, z: &Covariates, order: usize) -> Result<f64> {
    let layout = p.layout();
    if k == 0 || k >= layout.k {
        return Err(Error::Domain(format!("level must lie in 1..={}, got {k}", layout.k - 1)));
    }
    if z.z1.len() != p.beta_x.len() || z.z2.len() != p.beta_y.len() || z.z_omega.len() != p.zeta.len() {
        return Err(Error::InvalidData("covariate lengths do not match the model".into()));
    }
    let a = p.theta - dot(&z.z1, &p.beta_x);
    let b = p.tau[k - 1] - dot(&z.z2, &p.beta_y);
    let w = p.omega_at(&z.z_omega);
    let Some(re) = p.random else {
        return Ok(crate::association::std_odds_ratio(a, b, w));
    };
    let (mut h, mut fx, mut fy) = (0.0, 0.0, 0.0);
    for node in nodes(re.structure(), order)? {
        let (u, v, _) = node_shift(&re, &node);
        let c = node.log_w.exp();
        h += c * std_cdf(a - u, b - v, w);
        fx += c * logistic_cdf(a - u);
        fy += c * logistic_cdf(b - v);
    }
    Ok(h * (1.0 - fx - fy + h) / ((fx - h) * (fy - h)))
}

/// Cell probabilities at covariates `z`, averaged over the random intercepts
/// when `params` has them.
pub fn cell_probabilities_at(params: &ParamVector, z: &Covariates, order: usize) -> Result<CellTable> {
    let layout = params.layout();
    if z.z1.len() != params.beta_x.len() || z.z2.len() != params.beta_y.len() || z.z_omega.len() != params.zeta.len() {
        return Err(Error::InvalidData("covariate lengths do not match the model".into()));
    }
    let a = params.theta - dot(&z.z1, &params.beta_x);
    let shift = dot(&z.z2, &params.beta_y);
    let w = params.omega_at(&z.z_omega);
    let tau = |j: usize| match j {
        0 => f64::NEG_INFINITY,
        j if j >= layout.k => f64::INFINITY,
        j => params.tau[j - 1] - shift,
    };
    let mut rows = [vec![0.0; layout.k], vec![0.0; layout.k]];
    let mut add = |u: f64, v: f64, c: f64| {
        for y in 1..=layout.k {
            for x in 0..2u8 {
                rows[x as usize][y - 1] += c * cell_prob(x, a - u, tau(y) - v, tau(y - 1) - v, w);
            }
        }
    };
    match params.random {
        None => add(0.0, 0.0, 1.0),
        Some(re) => {
            for node in nodes(re.structure(), order)? {
                let (u, v, _) = node_shift(&re, &node);
                add(u, v, node.log_w.exp());
            }
        }
    }
    let [r0, r1] = rows;
    // renormalise away quadrature rounding
    let total: f64 = r0.iter().chain(&r1).sum();
    CellTable::new(
        r0.iter().map(|p| p / total).collect(),
        r1.iter().map(|p| p / total).collect(),
        CellKind::Probabilities,
    )
}

/// Expected 2×K counts: each row's weight spread over its cell probabilities.
pub fn expected_counts(params: &ParamVector, data: &Dataset, order: usize) -> Result<CellTable> {
    params.validate()?;
    params.check_against(data)?;
    let k = data.k();
    let mut rows = [vec![0.0; k], vec![0.0; k]];
    for pat in compress(data.rows()) {
        let z = Covariates {
            z1: pat.z1.clone(),
            z2: pat.z2.clone(),
            z_omega: pat.z_omega.clone(),
        };
        let probs = cell_probabilities_at(params, &z, order)?;
        for x in 0..2 {
            for y in 1..=k {
                rows[x][y - 1] += pat.weight * probs.get(x, y);
            }
        }
    }
    let [r0, r1] = rows;
    CellTable::new(r0, r1, CellKind::Counts)
}

/// Population-averaged odds ratio with a log-scale delta-method interval.
pub fn population_association_ci(fit: &FitResult, k: usize, z: &Covariates, order: usize) -> Result<DeltaEstimate> {
    population_odds_ratio(&fit.estimates, k, z, order)?;
    let layout = fit.layout();
    delta_method(
        fit,
        |psi| population_odds_ratio(&ParamVector::from_psi(&layout, psi), k, z, order).unwrap_or(f64::NAN),
        Scale::Log,
    )
}

/// Correlation of the random intercepts `d_xy / (d_x d_y)` with a
/// Fisher-scale delta-method interval.
pub fn random_correlation(fit: &FitResult) -> Result<DeltaEstimate> {
    match fit.estimates.random {
        Some(RandomEffects::Correlated { .. }) => {}
        _ => {
            return Err(Error::Domain(
                "intercept correlation is defined for the correlated structure only".into(),
            ))
        }
    }
    let rs = fit.layout().random_start();
    delta_method(
        fit,
        |psi| {
            let re = RandomEffects::Correlated {
                l1: psi[rs],
                l2: psi[rs + 1],
                l12: psi[rs + 2],
            };
            re.correlation()
        },
        Scale::Fisher,
    )
}
