//! Simulation of responses from the threshold model, used for recovery
//! studies and Monte Carlo checks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::amh::{AmhParams, AmhSampler};
use crate::data::{Dataset, Observation};
use crate::error::{Error, Result};
use crate::params::{dot, ParamVector};

/// Draw a fresh response pair for every row of `template`, keeping its
/// covariates and subjects. Weights are reset to 1.
///
/// When `params` carries a random block, one intercept pair per subject is
/// drawn as `L (n₁, n₂)`. Negative `ω` is rejected because the mixture sampler
/// covers `ω ∈ [0, 1)` only.
pub fn simulate(params: &ParamVector, template: &Dataset, seed: u64) -> Result<Dataset> {
    params.validate()?;
    params.check_against(template)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_subjects = template.subjects().len();
    let intercepts: Vec<(f64, f64)> = match params.random {
        Some(re) => {
            let (l1, l2, l12) = re.cholesky();
            (0..n_subjects)
                .map(|_| {
                    let n1: f64 = StandardNormal.sample(&mut rng);
                    let n2: f64 = StandardNormal.sample(&mut rng);
                    (l1 * n1, l12 * n1 + l2 * n2)
                })
                .collect()
        }
        None => vec![(0.0, 0.0); n_subjects],
    };
    let mut out = Dataset::new(template.k(), template.design().clone())?;
    for label in template.subjects() {
        out.subject_index(label);
    }
    for row in template.rows() {
        let omega = params.omega_at(&row.z_omega);
        let sampler = AmhSampler::new(AmhParams::standard(omega)?).map_err(|e| {
            Error::InvalidParameter(format!("cannot simulate this row: {e}"))
        })?;
        let (ax, ay) = row.subject.map_or((0.0, 0.0), |s| intercepts[s]);
        let (xs, ys) = sampler.draw(&mut rng);
        let a = params.theta - dot(&row.z1, &params.beta_x) - ax;
        let shift = dot(&row.z2, &params.beta_y) + ay;
        let x = u8::from(xs > a);
        let y = 1 + params.tau.iter().filter(|t| ys > **t - shift).count();
        out.push(Observation {
            x,
            y,
            weight: 1.0,
            ..row.clone()
        })?;
    }
    Ok(out)
}
