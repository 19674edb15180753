//! The discretised model: a binary `X` and an ordinal `Y ∈ {1..K}` obtained by
//! thresholding AMH latent variables,
//!
//! ```text
//! {X = 1} = {X* > θ},    {Y ≤ k} = {Y* ≤ τ_k},   k = 1..K-1
//! ```
//!
//! with the sentinels `τ₀ = -∞` and `τ_K = +∞`.

use crate::amh::{logistic_cdf, std_cdf, std_upper, AmhParams};
use crate::error::{Error, Result};

/// Cut points `θ` and `τ₁ < … < τ_{K-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Thresholds {
    theta: f64,
    tau: Vec<f64>,
}

impl Thresholds {
    pub fn new(theta: f64, tau: Vec<f64>) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::InvalidParameter(format!("theta must be finite, got {theta}")));
        }
        if tau.is_empty() {
            return Err(Error::InvalidParameter(
                "at least one y-threshold is required (K >= 2)".into(),
            ));
        }
        if tau.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("y-thresholds must be finite".into()));
        }
        if tau.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(format!(
                "y-thresholds must be strictly increasing, got {tau:?}"
            )));
        }
        Ok(Self { theta, tau })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    /// Number of y-levels `K`.
    pub fn k(&self) -> usize {
        self.tau.len() + 1
    }

    /// `τ_j` for `j = 0..=K`, with `τ₀ = -∞` and `τ_K = +∞`.
    pub fn tau_ext(&self, j: usize) -> f64 {
        if j == 0 {
            f64::NEG_INFINITY
        } else if j >= self.k() {
            f64::INFINITY
        } else {
            self.tau[j - 1]
        }
    }
}

/// Whether a [`CellTable`] holds counts or probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Counts,
    Probabilities,
}

/// A 2×K table indexed by `x ∈ {0, 1}` and `y ∈ {1..K}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellTable {
    rows: [Vec<f64>; 2],
    kind: CellKind,
}

impl CellTable {
    pub fn new(row0: Vec<f64>, row1: Vec<f64>, kind: CellKind) -> Result<Self> {
        if row0.len() != row1.len() || row0.len() < 2 {
            return Err(Error::InvalidData(format!(
                "cell table rows must have equal length K >= 2, got {} and {}",
                row0.len(),
                row1.len()
            )));
        }
        if row0.iter().chain(&row1).any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::InvalidData("cell entries must be finite and nonnegative".into()));
        }
        let table = Self { rows: [row0, row1], kind };
        if kind == CellKind::Probabilities && (table.total() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidData(format!(
                "cell probabilities sum to {}, not 1",
                table.total()
            )));
        }
        Ok(table)
    }

    pub fn kind(&self) -> CellKind {
        self.kind
    }

    pub fn k(&self) -> usize {
        self.rows[0].len()
    }

    /// Entry for `x ∈ {0,1}`, `y ∈ {1..K}`.
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.rows[x][y - 1]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.rows[x]
    }

    pub fn total(&self) -> f64 {
        self.rows.iter().flatten().sum()
    }

    pub fn row_sums(&self) -> [f64; 2] {
        [self.rows[0].iter().sum(), self.rows[1].iter().sum()]
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.rows[0].iter().zip(&self.rows[1]).map(|(a, b)| a + b).collect()
    }

    /// Multiply every entry by `n`, yielding a table of (expected) counts.
    pub fn scaled(&self, n: f64) -> CellTable {
        let scale = |r: &Vec<f64>| r.iter().map(|c| c * n).collect::<Vec<_>>();
        CellTable {
            rows: [scale(&self.rows[0]), scale(&self.rows[1])],
            kind: CellKind::Counts,
        }
    }

    /// 2×2 table `[[n(x=0,Y≤k), n(x=0,Y>k)], [n(x=1,Y≤k), n(x=1,Y>k)]]`.
    pub fn collapse_at(&self, k: usize) -> [[f64; 2]; 2] {
        let split = |r: &Vec<f64>| [r[..k].iter().sum(), r[k..].iter().sum()];
        [split(&self.rows[0]), split(&self.rows[1])]
    }
}

/// `P(X = x, Y = y)` under the threshold model with latent law `p`.
pub fn pmf(th: &Thresholds, p: &AmhParams, x: u8, y: usize) -> Result<f64> {
    if x > 1 {
        return Err(Error::Domain(format!("x must be 0 or 1, got {x}")));
    }
    if y == 0 || y > th.k() {
        return Err(Error::Domain(format!("y must lie in 1..={}, got {y}", th.k())));
    }
    Ok(cell_probability(th, p, x, y))
}

fn cell_probability(th: &Thresholds, p: &AmhParams, x: u8, y: usize) -> f64 {
    let a = th.theta() - p.mu();
    let hi = th.tau_ext(y) - p.nu();
    let lo = th.tau_ext(y - 1) - p.nu();
    let w = p.omega();
    let prob = if x == 0 {
        std_cdf(a, hi, w) - std_cdf(a, lo, w)
    } else {
        std_upper(a, hi, w) - std_upper(a, lo, w)
    };
    prob.max(0.0)
}

/// All 2K cell probabilities.
pub fn cell_probabilities(th: &Thresholds, p: &AmhParams) -> CellTable {
    let k = th.k();
    let row = |x: u8| (1..=k).map(|y| cell_probability(th, p, x, y)).collect::<Vec<_>>();
    CellTable {
        rows: [row(0), row(1)],
        kind: CellKind::Probabilities,
    }
}

/// First and second moments of the observed pair, with `Y` coded `1..K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservedMoments {
    pub mean_x: f64,
    pub var_x: f64,
    pub mean_y: f64,
    pub var_y: f64,
    pub cov_xy: f64,
}

impl ObservedMoments {
    pub fn correlation(&self) -> f64 {
        self.cov_xy / (self.var_x * self.var_y).sqrt()
    }
}

/// Observed moments. `E[X]` and `Var[X]` use their closed forms; the `Y`
/// moments and the covariance are summed over the pmf.
pub fn observed_moments(th: &Thresholds, p: &AmhParams) -> ObservedMoments {
    let px1 = logistic_cdf(-(th.theta() - p.mu()));
    let table = cell_probabilities(th, p);
    let (mut ey, mut ey2, mut exy) = (0.0, 0.0, 0.0);
    for y in 1..=th.k() {
        let yf = y as f64;
        let py = table.get(0, y) + table.get(1, y);
        ey += yf * py;
        ey2 += yf * yf * py;
        exy += yf * table.get(1, y);
    }
    ObservedMoments {
        mean_x: px1,
        var_x: px1 * (1.0 - px1),
        mean_y: ey,
        var_y: ey2 - ey * ey,
        cov_xy: exy - px1 * ey,
    }
}

/// Pearson goodness-of-fit statistic `Σ (O - E)² / E`.
pub fn goodness_of_fit(observed: &CellTable, expected: &CellTable) -> Result<f64> {
    if observed.k() != expected.k() {
        return Err(Error::InvalidData(format!(
            "table shapes differ: 2x{} vs 2x{}",
            observed.k(),
            expected.k()
        )));
    }
    let mut chi2 = 0.0;
    for x in 0..2 {
        for (o, e) in observed.row(x).iter().zip(expected.row(x)) {
            if *e <= 0.0 {
                return Err(Error::InvalidData("expected cell count is zero".into()));
            }
            chi2 += (o - e) * (o - e) / e;
        }
    }
    Ok(chi2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_validation() {
        assert!(Thresholds::new(0.0, vec![]).is_err());
        assert!(Thresholds::new(0.0, vec![1.0, 1.0]).is_err());
        assert!(Thresholds::new(0.0, vec![1.0, 0.5]).is_err());
        assert!(Thresholds::new(f64::NAN, vec![0.0]).is_err());
        let th = Thresholds::new(0.0, vec![-1.0, 2.0]).unwrap();
        assert_eq!(th.k(), 3);
        assert_eq!(th.tau_ext(0), f64::NEG_INFINITY);
        assert_eq!(th.tau_ext(2), 2.0);
        assert_eq!(th.tau_ext(3), f64::INFINITY);
    }

    #[test]
    fn fair_independent_binary() {
        let th = Thresholds::new(0.0, vec![0.0]).unwrap();
        let p = AmhParams::standard(0.0).unwrap();
        for x in 0..2 {
            for y in 1..=2 {
                assert!((pmf(&th, &p, x, y).unwrap() - 0.25).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn pmf_domain_errors() {
        let th = Thresholds::new(0.0, vec![0.0]).unwrap();
        let p = AmhParams::standard(0.3).unwrap();
        assert!(pmf(&th, &p, 0, 0).is_err());
        assert!(pmf(&th, &p, 0, 3).is_err());
        assert!(pmf(&th, &p, 2, 1).is_err());
    }

    #[test]
    fn concentrates_on_diagonal_as_omega_grows() {
        // theta = 0, tau = (-1, 0, 1)
        let th = Thresholds::new(0.0, vec![-1.0, 0.0, 1.0]).unwrap();
        let corner = |w: f64| {
            let t = cell_probabilities(&th, &AmhParams::standard(w).unwrap());
            t.get(0, 1) + t.get(1, 4)
        };
        assert!(corner(-0.9) < corner(0.0));
        assert!(corner(0.0) < corner(0.9));
    }

    #[test]
    fn independence_is_outer_product() {
        let th = Thresholds::new(0.4, vec![-0.5, 1.5]).unwrap();
        let p = AmhParams::new(0.0, 0.2, -0.1).unwrap();
        let t = cell_probabilities(&th, &p);
        let rows = t.row_sums();
        let cols = t.column_sums();
        for x in 0..2 {
            for y in 1..=3 {
                assert!((t.get(x, y) - rows[x] * cols[y - 1]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn binary_covariance_example() {
        // K = 2, theta = tau = 0, omega = 0.8: 0.8 / 12.8
        let th = Thresholds::new(0.0, vec![0.0]).unwrap();
        let m = observed_moments(&th, &AmhParams::standard(0.8).unwrap());
        assert!((m.cov_xy - 0.0625).abs() < 1e-15);
        assert!((m.mean_x - 0.5).abs() < 1e-15);
        assert!((m.var_x - 0.25).abs() < 1e-15);
    }

    #[test]
    fn chi_square() {
        let e = CellTable::new(vec![25.0, 25.0], vec![25.0, 25.0], CellKind::Counts).unwrap();
        let o = CellTable::new(vec![26.0, 24.0], vec![25.0, 25.0], CellKind::Counts).unwrap();
        assert_eq!(goodness_of_fit(&e, &e).unwrap(), 0.0);
        assert!((goodness_of_fit(&o, &e).unwrap() - 0.08).abs() < 1e-15);
        let z = CellTable::new(vec![0.0, 25.0], vec![25.0, 25.0], CellKind::Counts).unwrap();
        assert!(goodness_of_fit(&o, &z).is_err());
        let other = CellTable::new(vec![1.0; 3], vec![1.0; 3], CellKind::Counts).unwrap();
        assert!(goodness_of_fit(&o, &other).is_err());
    }

    #[test]
    fn table_validation() {
        assert!(CellTable::new(vec![0.5, 0.5], vec![0.5, 0.5], CellKind::Probabilities).is_err());
        assert!(CellTable::new(vec![-1.0, 0.5], vec![0.5, 0.5], CellKind::Counts).is_err());
        assert!(CellTable::new(vec![1.0], vec![1.0], CellKind::Counts).is_err());
    }

    #[test]
    fn collapse() {
        let t = CellTable::new(
            vec![33.0, 45.0, 60.0, 26.0, 6.0],
            vec![14.0, 29.0, 80.0, 56.0, 16.0],
            CellKind::Counts,
        )
        .unwrap();
        assert_eq!(t.collapse_at(1), [[33.0, 137.0], [14.0, 181.0]]);
        assert_eq!(t.total(), 365.0);
    }
}
