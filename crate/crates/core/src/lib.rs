//! Bivariate logistic regression for a binary and an ordinal response linked
//! through the Ali-Mikhail-Haq distribution.
//!
//! ```
//! use amh_logit::{fit, CellKind, CellTable, Dataset, FitOptions};
//!
//! let table = CellTable::new(
//!     vec![33.0, 45.0, 60.0, 26.0, 6.0],
//!     vec![14.0, 29.0, 80.0, 56.0, 16.0],
//!     CellKind::Counts,
//! )?;
//! let data = Dataset::from_counts(&table)?;
//! let result = fit(&data, &FitOptions::default())?;
//! let (omega, lower, upper) = result.omega_interval(0);
//! assert!(lower < omega && omega < upper);
//! # Ok::<(), amh_logit::Error>(())
//! ```

pub mod amh;
pub mod association;
pub mod data;
pub mod error;
pub mod estimation;
pub mod likelihood;
pub mod mixed;
pub mod observed;
pub mod optim;
pub mod params;
pub mod quadrature;
pub mod simulate;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/amh.md")]
    mod amh {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/fitting.md")]
    mod fitting {}
    #[doc = include_str!("../../../book/src/association.md")]
    mod association {}
    #[doc = include_str!("../../../book/src/random-intercepts.md")]
    mod random_intercepts {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

pub use amh::{AmhParams, AmhSampler};
pub use association::{AssocSummary, Covariates};
pub use data::{Dataset, Design, Observation};
pub use error::{Error, Result};
pub use estimation::{delta_method, fit, DeltaEstimate, FitOptions, FitResult, Scale};
pub use likelihood::{loglik, loglik_gradient};
pub use mixed::{fit_mixed, MixedOptions, RandomEffectSpec};
pub use observed::{CellKind, CellTable, Thresholds};
pub use optim::OptimOptions;
pub use params::{Layout, ParamVector, RandomEffects, RandomStructure, ThresholdParam};
pub use simulate::simulate;
