//! The structured run report and its plain-text rendering.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::ingest::FactorLevels;
use crate::spec::ModelSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub name: String,
    pub estimate: f64,
    pub se: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    /// Scale on which the interval was built: `identity` or `fisher`.
    pub scale: String,
    /// Held at a boundary and excluded from the information matrix.
    pub fixed: bool,
}

/// The estimate vector with its covariance, enough to rebuild the fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub names: Vec<String>,
    pub psi: Vec<f64>,
    /// `None` marks rows and columns of fixed parameters.
    pub vcov: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomSummary {
    pub structure: String,
    /// `[[d_x², d_xy], [d_xy, d_y²]]`.
    pub covariance: [[f64; 2]; 2],
    pub correlation: Option<Interval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountTables {
    pub observed: [Vec<f64>; 2],
    pub predicted: [Vec<f64>; 2],
    pub chi_square: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddsRatioRow {
    pub level: usize,
    /// `None` when a collapsed cell is empty.
    pub observed: Option<f64>,
    pub predicted: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddsRatioGroup {
    pub group: String,
    /// Population-averaged over the random intercepts rather than conditional.
    pub population_averaged: bool,
    pub rows: Vec<OddsRatioRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossMoment {
    pub terms: usize,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub scaled: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub input_sha256: String,
    pub seed: u64,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub model: ModelSpec,
    pub factors: Vec<FactorLevels>,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub loglik: f64,
    pub n_obs: f64,
    pub boundary: bool,
    pub notes: Vec<String>,
    pub estimates: Vec<EstimateRow>,
    pub parameters: Parameters,
    pub random_effects: Option<RandomSummary>,
    pub counts: Option<CountTables>,
    pub odds_ratios: Vec<OddsRatioGroup>,
    pub latent_cross_moment: Option<CrossMoment>,
    pub provenance: Provenance,
}

fn num(v: f64) -> String {
    format!("{v:.4}")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), num)
}

/// Right-aligned columns after a left-aligned first column.
fn table(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |out: &mut String, cells: &[String]| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(&width).enumerate() {
            if i == 0 {
                let _ = write!(s, "{c:<w$}");
            } else {
                let _ = write!(s, "  {c:>w$}");
            }
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };
    line(out, &header.iter().map(|h| h.to_string()).collect::<Vec<_>>());
    for r in rows {
        line(out, r);
    }
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "amhlogit {} (version {})", self.command, self.provenance.version);
        let _ = writeln!(out, "input sha256 {}", self.provenance.input_sha256);
        let _ = writeln!(
            out,
            "n = {}  K = {}  log-likelihood = {:.5}",
            self.n_obs, self.model.k_levels, self.loglik
        );
        let _ = writeln!(
            out,
            "{} after {} iterations, max |gradient| = {:.2e}",
            if self.converged { "converged" } else { "NOT converged" },
            self.iterations,
            self.gradient_norm
        );
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }

        out.push_str("\nParameter estimates\n");
        let rows: Vec<Vec<String>> = self
            .estimates
            .iter()
            .map(|e| {
                vec![
                    e.name.clone(),
                    num(e.estimate),
                    if e.fixed { "fixed".into() } else { opt(e.se) },
                    opt(e.lower),
                    opt(e.upper),
                ]
            })
            .collect();
        table(&mut out, &["parameter", "estimate", "se", "2.5%", "97.5%"], &rows);

        if let Some(re) = &self.random_effects {
            let _ = writeln!(out, "\nRandom intercepts ({})", re.structure);
            let d = re.covariance;
            let rows = vec![
                vec!["x".into(), num(d[0][0]), num(d[0][1])],
                vec!["y".into(), num(d[1][0]), num(d[1][1])],
            ];
            table(&mut out, &["D", "x", "y"], &rows);
            if let Some(c) = &re.correlation {
                let _ = writeln!(
                    out,
                    "correlation {} [{}, {}]",
                    num(c.estimate),
                    num(c.lower),
                    num(c.upper)
                );
            }
        }

        if let Some(c) = &self.counts {
            out.push_str("\nCell counts (observed / predicted)\n");
            let k = self.model.k_levels;
            let mut header = vec!["x".to_string()];
            header.extend((1..=k).map(|y| format!("y={y}")));
            let rows: Vec<Vec<String>> = (0..2)
                .map(|x| {
                    let mut r = vec![x.to_string()];
                    r.extend((0..k).map(|j| format!("{} / {:.2}", c.observed[x][j], c.predicted[x][j])));
                    r
                })
                .collect();
            let h: Vec<&str> = header.iter().map(String::as_str).collect();
            table(&mut out, &h, &rows);
            let _ = writeln!(out, "chi-square = {:.4}", c.chi_square);
        }

        for g in &self.odds_ratios {
            let _ = writeln!(
                out,
                "\nOdds ratios, {}{}",
                g.group,
                if g.population_averaged { " (population averaged)" } else { "" }
            );
            let rows: Vec<Vec<String>> = g
                .rows
                .iter()
                .map(|r| {
                    vec![
                        format!("Y<={}", r.level),
                        opt(r.observed),
                        num(r.predicted),
                        num(r.lower),
                        num(r.upper),
                    ]
                })
                .collect();
            table(&mut out, &["collapse", "observed", "predicted", "2.5%", "97.5%"], &rows);
        }

        if let Some(m) = &self.latent_cross_moment {
            let _ = writeln!(out, "\nLatent cross moment ({} terms)", m.terms);
            let _ = writeln!(out, "E[X*Y*] = {} [{}, {}]", num(m.estimate), num(m.lower), num(m.upper));
            if m.sigma_x != 1.0 || m.sigma_y != 1.0 {
                let _ = writeln!(
                    out,
                    "scaled by {} x {}: {} [{}, {}]",
                    m.sigma_x,
                    m.sigma_y,
                    num(m.scaled.estimate),
                    num(m.scaled.lower),
                    num(m.scaled.upper)
                );
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_aligns_columns() {
        let mut s = String::new();
        table(
            &mut s,
            &["a", "bb"],
            &[vec!["long".into(), "1".into()], vec!["x".into(), "22".into()]],
        );
        assert_eq!(s, "a     bb\nlong   1\nx     22\n");
    }

    #[test]
    fn missing_values_render_as_dash() {
        assert_eq!(opt(None), "-");
        assert_eq!(opt(Some(1.0)), "1.0000");
    }
}
