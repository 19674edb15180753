use crate::error::{Error, Result};
use crate::observed::{CellKind, CellTable};

/// Column names of the three linear predictors.
///
/// `x` and `y` carry no intercept column (the thresholds play that role);
/// `omega` always has at least one column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Design {
    pub x: Vec<String>,
    pub y: Vec<String>,
    pub omega: Vec<String>,
}

impl Design {
    pub const INTERCEPT: &'static str = "(intercept)";

    /// No covariates; a single association parameter.
    pub fn intercept_only() -> Self {
        Self {
            x: vec![],
            y: vec![],
            omega: vec![Self::INTERCEPT.to_string()],
        }
    }

    pub fn new(x: Vec<String>, y: Vec<String>, omega: Vec<String>) -> Self {
        let omega = if omega.is_empty() {
            vec![Self::INTERCEPT.to_string()]
        } else {
            omega
        };
        Self { x, y, omega }
    }
}

/// One (possibly weighted) observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub x: u8,
    pub y: usize,
    pub z1: Vec<f64>,
    pub z2: Vec<f64>,
    pub z_omega: Vec<f64>,
    pub weight: f64,
    /// Index into [`Dataset::subjects`].
    pub subject: Option<usize>,
}

impl Observation {
    /// Intercept-only observation with a count weight.
    pub fn counted(x: u8, y: usize, weight: f64) -> Self {
        Self {
            x,
            y,
            z1: vec![],
            z2: vec![],
            z_omega: vec![1.0],
            weight,
            subject: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    k: usize,
    design: Design,
    rows: Vec<Observation>,
    subjects: Vec<String>,
}

impl Dataset {
    pub fn new(k: usize, design: Design) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidData(format!("need K >= 2 y-levels, got {k}")));
        }
        if design.omega.is_empty() {
            return Err(Error::InvalidData("the association design needs a column".into()));
        }
        Ok(Self {
            k,
            design,
            rows: vec![],
            subjects: vec![],
        })
    }

    /// Intercept-only data from a table of counts.
    pub fn from_counts(table: &CellTable) -> Result<Self> {
        let mut data = Self::new(table.k(), Design::intercept_only())?;
        for x in 0..2u8 {
            for y in 1..=table.k() {
                data.push(Observation::counted(x, y, table.get(x as usize, y)))?;
            }
        }
        Ok(data)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn rows(&self) -> &[Observation] {
        &self.rows
    }

    pub fn subjects(&self) -> &[String] {
        &self.subjects
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// Index for a subject label, registering it on first use.
    pub fn subject_index(&mut self, label: &str) -> usize {
        match self.subjects.iter().position(|s| s == label) {
            Some(i) => i,
            None => {
                self.subjects.push(label.to_string());
                self.subjects.len() - 1
            }
        }
    }

    pub fn push(&mut self, obs: Observation) -> Result<()> {
        if obs.x > 1 {
            return Err(Error::InvalidData(format!("x must be 0 or 1, got {}", obs.x)));
        }
        if obs.y == 0 || obs.y > self.k {
            return Err(Error::InvalidData(format!(
                "y must lie in 1..={}, got {}",
                self.k, obs.y
            )));
        }
        if !(obs.weight.is_finite() && obs.weight >= 0.0) {
            return Err(Error::InvalidData(format!(
                "weights must be finite and nonnegative, got {}",
                obs.weight
            )));
        }
        let widths = [
            (obs.z1.len(), self.design.x.len(), "x"),
            (obs.z2.len(), self.design.y.len(), "y"),
            (obs.z_omega.len(), self.design.omega.len(), "omega"),
        ];
        for (got, want, name) in widths {
            if got != want {
                return Err(Error::InvalidData(format!(
                    "{name}-design row has {got} columns, expected {want}"
                )));
            }
        }
        if obs.z1.iter().chain(&obs.z2).chain(&obs.z_omega).any(|z| !z.is_finite()) {
            return Err(Error::InvalidData("covariates must be finite".into()));
        }
        if let Some(s) = obs.subject {
            if s >= self.subjects.len() {
                return Err(Error::InvalidData(format!("unknown subject index {s}")));
            }
        }
        self.rows.push(obs);
        Ok(())
    }

    pub fn total_weight(&self) -> f64 {
        self.rows.iter().map(|r| r.weight).sum()
    }

    /// Weighted number of observations at each y-level.
    pub fn level_counts(&self) -> Vec<f64> {
        let mut counts = vec![0.0; self.k];
        for r in &self.rows {
            counts[r.y - 1] += r.weight;
        }
        counts
    }

    /// Weighted 2×K table of (x, y), aggregated over covariates.
    pub fn cell_counts(&self) -> CellTable {
        let mut rows = [vec![0.0; self.k], vec![0.0; self.k]];
        for r in &self.rows {
            rows[r.x as usize][r.y - 1] += r.weight;
        }
        let [r0, r1] = rows;
        CellTable::new(r0, r1, CellKind::Counts).expect("weights validated on insertion")
    }

    /// Error naming the first y-level without observations, if any.
    pub fn check_levels(&self) -> Result<()> {
        match self.level_counts().iter().position(|&c| c <= 0.0) {
            Some(i) => Err(Error::EmptyLevel { level: i + 1 }),
            None => Ok(()),
        }
    }
}

/// Sum-to-zero (effect) coding of a factor with `n_levels` levels: `n_levels - 1`
/// columns, the last level coded as all `-1`.
pub fn sum_to_zero_row(level: usize, n_levels: usize) -> Vec<f64> {
    let mut row = vec![0.0; n_levels.saturating_sub(1)];
    if level + 1 == n_levels {
        row.iter_mut().for_each(|z| *z = -1.0);
    } else {
        row[level] = 1.0;
    }
    row
}

/// Full indicator (cell-means) coding of a factor: one column per level.
pub fn indicator_row(level: usize, n_levels: usize) -> Vec<f64> {
    let mut row = vec![0.0; n_levels];
    row[level] = 1.0;
    row
}
