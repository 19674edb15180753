use serde::{Deserialize, Serialize};

use crate::ingest::IngestError;

/// Everything needed to turn a CSV file into a model fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub k_levels: usize,
    pub x_column: String,
    pub y_column: String,
    pub z1_columns: Vec<String>,
    pub z2_columns: Vec<String>,
    /// Categorical columns expanded to indicators in the association model.
    pub z_omega_columns: Vec<String>,
    pub weight_column: Option<String>,
    pub random_effects: bool,
    /// Shared rather than correlated intercepts.
    pub shared: bool,
    pub subject_column: Option<String>,
    pub gh_order: usize,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(k_levels: usize) -> Self {
        Self {
            k_levels,
            x_column: "x".into(),
            y_column: "y".into(),
            z1_columns: vec![],
            z2_columns: vec![],
            z_omega_columns: vec![],
            weight_column: None,
            random_effects: false,
            shared: false,
            subject_column: None,
            gh_order: 20,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let fail = |m: &str| Err(IngestError::Spec(m.to_string()));
        if self.k_levels < 2 {
            return fail("--k must be at least 2");
        }
        if self.random_effects != self.subject_column.is_some() {
            return fail("--subject is required with --random-effects and only then");
        }
        if self.shared && !self.random_effects {
            return fail("--shared needs --random-effects");
        }
        if self.random_effects && self.gh_order < 2 {
            return fail("--gh-order must be at least 2");
        }
        Ok(())
    }
}
