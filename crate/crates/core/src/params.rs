//! Model parameters and their unconstrained reparametrisation.
//!
//! The reporting vector `ψ` is laid out as
//!
//! ```text
//! ψ = (θ, τ₁..τ_{K-1}, β_x, β_y, ζ [, random-effect block])
//! ```
//!
//! where `ζ` are association coefficients on the Fisher scale
//! (`ω = tanh(z_ω · ζ)`) and the random-effect block is `(l₁, l₂, l₁₂)` for
//! correlated intercepts or `(l)` for a shared intercept.
//!
//! The optimiser works on a free vector in which the ordered thresholds are
//! `τ₁` followed by log increments `log(τ_k - τ_{k-1})`, and the Cholesky
//! diagonal entries are on the log scale.

use nalgebra::DMatrix;

use crate::data::{Dataset, Design};
use crate::error::{Error, Result};
use crate::observed::Thresholds;

/// How the threshold ordering constraint is enforced during optimisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdParam {
    /// `τ₁` plus log increments; unconstrained.
    #[default]
    LogIncrement,
    /// Raw thresholds; steps that break the ordering are rejected by the line search.
    Direct,
}

/// Random-intercept covariance structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RandomStructure {
    /// Correlated bivariate normal intercepts `(α_x, α_y) ~ N₂(0, D)`.
    Correlated,
    /// A single intercept shared by both outcomes, `α_x = α_y ~ N(0, l²)`.
    Shared,
}

/// Random-intercept parameters in Cholesky form, `D = L Lᵀ` with
/// `L = [[l₁, 0], [l₁₂, l₂]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RandomEffects {
    Correlated { l1: f64, l2: f64, l12: f64 },
    Shared { l: f64 },
}

impl RandomEffects {
    pub fn structure(&self) -> RandomStructure {
        match self {
            RandomEffects::Correlated { .. } => RandomStructure::Correlated,
            RandomEffects::Shared { .. } => RandomStructure::Shared,
        }
    }

    /// `(l₁, l₂, l₁₂)`; the shared structure is `(l, 0, l)`.
    pub fn cholesky(&self) -> (f64, f64, f64) {
        match *self {
            RandomEffects::Correlated { l1, l2, l12 } => (l1, l2, l12),
            RandomEffects::Shared { l } => (l, 0.0, l),
        }
    }

    /// `[[d_x², d_xy], [d_xy, d_y²]]`.
    pub fn covariance(&self) -> [[f64; 2]; 2] {
        let (l1, l2, l12) = self.cholesky();
        let dxy = l1 * l12;
        [[l1 * l1, dxy], [dxy, l12 * l12 + l2 * l2]]
    }

    /// Correlation of the two intercepts.
    pub fn correlation(&self) -> f64 {
        let d = self.covariance();
        d[0][1] / (d[0][0] * d[1][1]).sqrt()
    }

    fn len(structure: RandomStructure) -> usize {
        match structure {
            RandomStructure::Correlated => 3,
            RandomStructure::Shared => 1,
        }
    }
}

/// Sizes of the blocks of `ψ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub k: usize,
    pub n_x: usize,
    pub n_y: usize,
    pub n_omega: usize,
    pub random: Option<RandomStructure>,
}

impl Layout {
    pub fn for_data(data: &Dataset, random: Option<RandomStructure>) -> Self {
        let d = data.design();
        Self {
            k: data.k(),
            n_x: d.x.len(),
            n_y: d.y.len(),
            n_omega: d.omega.len(),
            random,
        }
    }

    pub fn len(&self) -> usize {
        self.k + self.n_x + self.n_y + self.n_omega + self.random.map_or(0, RandomEffects::len)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tau_start(&self) -> usize {
        1
    }

    pub fn beta_x_start(&self) -> usize {
        self.k
    }

    pub fn beta_y_start(&self) -> usize {
        self.k + self.n_x
    }

    pub fn zeta_start(&self) -> usize {
        self.k + self.n_x + self.n_y
    }

    pub fn random_start(&self) -> usize {
        self.zeta_start() + self.n_omega
    }

    /// Names of the entries of `ψ`.
    pub fn names(&self, design: &Design) -> Vec<String> {
        let mut names = vec!["theta".to_string()];
        names.extend((1..self.k).map(|j| format!("tau{j}")));
        names.extend(design.x.iter().map(|c| format!("beta_x[{c}]")));
        names.extend(design.y.iter().map(|c| format!("beta_y[{c}]")));
        names.extend(design.omega.iter().map(|c| format!("zeta[{c}]")));
        match self.random {
            Some(RandomStructure::Correlated) => {
                names.extend(["l1", "l2", "l12"].map(String::from));
            }
            Some(RandomStructure::Shared) => names.push("l".into()),
            None => {}
        }
        names
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub theta: f64,
    pub tau: Vec<f64>,
    pub beta_x: Vec<f64>,
    pub beta_y: Vec<f64>,
    pub zeta: Vec<f64>,
    pub random: Option<RandomEffects>,
}

impl ParamVector {
    /// No covariates and a single association parameter `ω`.
    pub fn intercept_only(theta: f64, tau: Vec<f64>, omega: f64) -> Self {
        Self {
            theta,
            tau,
            beta_x: vec![],
            beta_y: vec![],
            zeta: vec![omega.atanh()],
            random: None,
        }
    }

    pub fn layout(&self) -> Layout {
        Layout {
            k: self.tau.len() + 1,
            n_x: self.beta_x.len(),
            n_y: self.beta_y.len(),
            n_omega: self.zeta.len(),
            random: self.random.map(|r| r.structure()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        Thresholds::new(self.theta, self.tau.clone())?;
        if self.zeta.is_empty() {
            return Err(Error::InvalidParameter("at least one association coefficient".into()));
        }
        let finite = self.beta_x.iter().chain(&self.beta_y).chain(&self.zeta).all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("coefficients must be finite".into()));
        }
        match self.random {
            Some(RandomEffects::Correlated { l1, l2, l12 }) => {
                if !(l1 > 0.0 && l2 > 0.0 && l12.is_finite() && l1.is_finite() && l2.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "Cholesky factors need l1, l2 > 0, got ({l1}, {l2}, {l12})"
                    )));
                }
            }
            Some(RandomEffects::Shared { l }) => {
                if !(l > 0.0 && l.is_finite()) {
                    return Err(Error::InvalidParameter(format!("shared scale must be > 0, got {l}")));
                }
            }
            None => {}
        }
        Ok(())
    }

    /// Check that the design widths agree with `data`.
    pub fn check_against(&self, data: &Dataset) -> Result<()> {
        let l = self.layout();
        let d = data.design();
        if l.k != data.k() || l.n_x != d.x.len() || l.n_y != d.y.len() || l.n_omega != d.omega.len() {
            return Err(Error::InvalidParameter(format!(
                "parameter layout (K={}, {}/{}/{} covariates) does not match data (K={}, {}/{}/{})",
                l.k,
                l.n_x,
                l.n_y,
                l.n_omega,
                data.k(),
                d.x.len(),
                d.y.len(),
                d.omega.len()
            )));
        }
        Ok(())
    }

    pub fn thresholds(&self) -> Result<Thresholds> {
        Thresholds::new(self.theta, self.tau.clone())
    }

    /// `ω = tanh(z_ω · ζ)`.
    pub fn omega_at(&self, z_omega: &[f64]) -> f64 {
        dot(z_omega, &self.zeta).tanh()
    }

    pub fn to_psi(&self) -> Vec<f64> {
        let mut psi = Vec::with_capacity(self.layout().len());
        psi.push(self.theta);
        psi.extend(&self.tau);
        psi.extend(&self.beta_x);
        psi.extend(&self.beta_y);
        psi.extend(&self.zeta);
        match self.random {
            Some(RandomEffects::Correlated { l1, l2, l12 }) => psi.extend([l1, l2, l12]),
            Some(RandomEffects::Shared { l }) => psi.push(l),
            None => {}
        }
        psi
    }

    /// Inverse of [`to_psi`](Self::to_psi). No validation.
    pub fn from_psi(layout: &Layout, psi: &[f64]) -> Self {
        assert_eq!(psi.len(), layout.len(), "psi has wrong length for layout");
        let slice = |start: usize, n: usize| psi[start..start + n].to_vec();
        let r = layout.random_start();
        Self {
            theta: psi[0],
            tau: slice(1, layout.k - 1),
            beta_x: slice(layout.beta_x_start(), layout.n_x),
            beta_y: slice(layout.beta_y_start(), layout.n_y),
            zeta: slice(layout.zeta_start(), layout.n_omega),
            random: layout.random.map(|s| match s {
                RandomStructure::Correlated => RandomEffects::Correlated {
                    l1: psi[r],
                    l2: psi[r + 1],
                    l12: psi[r + 2],
                },
                RandomStructure::Shared => RandomEffects::Shared { l: psi[r] },
            }),
        }
    }

    pub fn to_free(&self, mode: ThresholdParam) -> Vec<f64> {
        let layout = self.layout();
        let mut free = self.to_psi();
        if mode == ThresholdParam::LogIncrement {
            for j in 1..self.tau.len() {
                free[1 + j] = (self.tau[j] - self.tau[j - 1]).ln();
            }
        }
        let r = layout.random_start();
        match layout.random {
            Some(RandomStructure::Correlated) => {
                free[r] = free[r].ln();
                free[r + 1] = free[r + 1].ln();
            }
            Some(RandomStructure::Shared) => free[r] = free[r].ln(),
            None => {}
        }
        free
    }

    /// Map a free vector back. In [`ThresholdParam::Direct`] mode the result may
    /// have unordered thresholds; callers check with [`validate`](Self::validate).
    pub fn from_free(layout: &Layout, free: &[f64], mode: ThresholdParam) -> Self {
        let mut psi = free.to_vec();
        if mode == ThresholdParam::LogIncrement {
            for j in 1..layout.k - 1 {
                psi[1 + j] = psi[j] + free[1 + j].exp();
            }
        }
        let r = layout.random_start();
        match layout.random {
            Some(RandomStructure::Correlated) => {
                psi[r] = free[r].exp();
                psi[r + 1] = free[r + 1].exp();
            }
            Some(RandomStructure::Shared) => psi[r] = free[r].exp(),
            None => {}
        }
        Self::from_psi(layout, &psi)
    }

    /// Jacobian `∂ψ/∂free` evaluated at `free`.
    pub fn psi_jacobian(layout: &Layout, free: &[f64], mode: ThresholdParam) -> DMatrix<f64> {
        let n = layout.len();
        let mut j = DMatrix::identity(n, n);
        if mode == ThresholdParam::LogIncrement {
            // τ_k = t_1 + Σ_{2≤i≤k} exp(t_i)
            for k in 1..layout.k {
                j[(k, 1)] = 1.0;
                for i in 2..=k {
                    j[(k, i)] = free[i].exp();
                }
            }
        }
        let r = layout.random_start();
        match layout.random {
            Some(RandomStructure::Correlated) => {
                j[(r, r)] = free[r].exp();
                j[(r + 1, r + 1)] = free[r + 1].exp();
            }
            Some(RandomStructure::Shared) => j[(r, r)] = free[r].exp(),
            None => {}
        }
        j
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
