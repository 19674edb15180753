//! The `amhlogit` command-line tool: CSV ingestion, model fitting and
//! structured reports.

pub mod ingest;
pub mod report;
pub mod spec;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use amh_logit::association::{latent_cross_moment, observed_odds_ratios, predicted_odds_ratios};
use amh_logit::mixed::{expected_counts, population_association_ci, random_correlation};
use amh_logit::observed::goodness_of_fit;
use amh_logit::{
    fit, fit_mixed, AmhParams, CellKind, CellTable, Covariates, Error, FitOptions, FitResult, Layout, MixedOptions,
    ParamVector, RandomEffectSpec, RandomEffects, RandomStructure,
};
use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;

use ingest::{group_label, ingest_csv, IngestError, Ingested};
use report::{
    CountTables, CrossMoment, EstimateRow, Interval, OddsRatioGroup, OddsRatioRow, Parameters, Provenance,
    RandomSummary, RunReport,
};
use spec::ModelSpec;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FIT: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "amhlogit", version, about = "Bivariate binary/ordinal logistic regression with AMH association")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the model and report estimates, counts and odds ratios.
    Fit(FitArgs),
    /// Predicted cell counts and the chi-square statistic.
    Predict(ReuseArgs),
    /// Odds ratios and the latent cross moment.
    Assoc(AssocArgs),
    /// Draw a CSV sample from the intercept-only model.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long)]
    data: PathBuf,
    /// Number of ordinal levels; required unless --report is given.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value = "x")]
    x_col: String,
    #[arg(long, default_value = "y")]
    y_col: String,
    #[arg(long, value_delimiter = ',')]
    x_covs: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    y_covs: Vec<String>,
    /// Categorical columns expanded to indicators in the association model.
    #[arg(long, value_delimiter = ',')]
    omega_covs: Vec<String>,
    #[arg(long)]
    weight: Option<String>,
    #[arg(long)]
    random_effects: bool,
    /// One intercept shared by both outcomes instead of a correlated pair.
    #[arg(long)]
    shared: bool,
    #[arg(long)]
    subject: Option<String>,
    #[arg(long, default_value_t = 20)]
    gh_order: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print JSON instead of text tables.
    #[arg(long)]
    json: bool,
}

impl ModelArgs {
    fn spec(&self) -> Result<ModelSpec, IngestError> {
        let k = self
            .k
            .ok_or_else(|| IngestError::Spec("--k is required".into()))?;
        let spec = ModelSpec {
            k_levels: k,
            x_column: self.x_col.clone(),
            y_column: self.y_col.clone(),
            z1_columns: self.x_covs.clone(),
            z2_columns: self.y_covs.clone(),
            z_omega_columns: self.omega_covs.clone(),
            weight_column: self.weight.clone(),
            random_effects: self.random_effects,
            shared: self.shared,
            subject_column: self.subject.clone(),
            gh_order: self.gh_order,
            seed: self.seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Debug, Args)]
struct ReuseArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Reuse the fit stored in a JSON report instead of refitting.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AssocArgs {
    #[command(flatten)]
    reuse: ReuseArgs,
    #[arg(long, default_value_t = 1.0)]
    sigma_x: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma_y: f64,
    /// Terms of the cross-moment series.
    #[arg(long, default_value_t = 10)]
    series_terms: usize,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, allow_hyphen_values = true)]
    theta: f64,
    /// Increasing thresholds, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    tau: Vec<f64>,
    #[arg(long, allow_hyphen_values = true)]
    omega: f64,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the latent pairs.
    #[arg(long)]
    latent: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure of a command, mapped to an exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Input(#[from] IngestError),
    #[error("{0}")]
    Fit(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Fit(_) => EXIT_FIT,
            CliError::Input(IngestError::Model(e)) => model_exit_code(e),
            CliError::Input(_) => EXIT_INPUT,
        }
    }
}

fn model_exit_code(e: &Error) -> i32 {
    match e {
        Error::SingularInformation | Error::DegenerateGradient => EXIT_FIT,
        _ => EXIT_INPUT,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Input(IngestError::Model(e))
    }
}

fn io_error(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Input(IngestError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn random_structure(spec: &ModelSpec) -> Option<RandomStructure> {
    match (spec.random_effects, spec.shared) {
        (false, _) => None,
        (true, false) => Some(RandomStructure::Correlated),
        (true, true) => Some(RandomStructure::Shared),
    }
}

/// Fit the model described by `spec` to ingested data.
pub fn fit_model(data: &Ingested, spec: &ModelSpec) -> Result<FitResult, CliError> {
    let opts = FitOptions::default();
    let result = match random_structure(spec) {
        None => fit(&data.dataset, &opts)?,
        Some(structure) => fit_mixed(
            &data.dataset,
            &MixedOptions {
                fit: opts,
                random: RandomEffectSpec {
                    order: spec.gh_order,
                    structure,
                },
            },
        )?,
    };
    Ok(result)
}

/// Rebuild a fit from the parameter block of a saved report.
pub fn fit_from_report(report: &RunReport, data: &Ingested) -> Result<FitResult, CliError> {
    let layout = Layout::for_data(&data.dataset, random_structure(&report.model));
    let p = &report.parameters;
    let n = layout.len();
    if p.psi.len() != n || p.vcov.len() != n || p.vcov.iter().any(|r| r.len() != n) {
        return Err(IngestError::Spec(format!(
            "report has {} parameters but the data imply {n}",
            p.psi.len()
        ))
        .into());
    }
    let estimates = ParamVector::from_psi(&layout, &p.psi);
    estimates.validate()?;
    Ok(FitResult {
        estimates,
        vcov: DMatrix::from_fn(n, n, |i, j| p.vcov[i][j].unwrap_or(f64::NAN)),
        loglik: report.loglik,
        converged: report.converged,
        n_iter: report.iterations,
        gradient_norm: report.gradient_norm,
        trace: vec![],
        boundary: report.boundary,
        notes: report.notes.clone(),
        design: data.dataset.design().clone(),
        n_obs: data.dataset.total_weight(),
    })
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn estimate_rows(fit: &FitResult) -> Vec<EstimateRow> {
    let psi = fit.psi();
    let names = fit.names();
    let layout = fit.layout();
    let mut rows = vec![];
    for (i, name) in names.iter().enumerate() {
        let var = fit.vcov[(i, i)];
        let fixed = var.is_nan();
        let (lo, hi) = fit.wald_interval(i);
        rows.push(EstimateRow {
            name: name.clone(),
            estimate: psi[i],
            se: finite(var.sqrt()),
            lower: finite(lo),
            upper: finite(hi),
            scale: "identity".into(),
            fixed,
        });
        if i >= layout.zeta_start() && i < layout.random_start() {
            let j = i - layout.zeta_start();
            let (w, lo, hi) = fit.omega_interval(j);
            rows.push(EstimateRow {
                name: format!("omega[{}]", fit.design.omega[j]),
                estimate: w,
                se: finite((1.0 - w * w) * var.sqrt()),
                lower: finite(lo),
                upper: finite(hi),
                scale: "fisher".into(),
                fixed,
            });
        }
    }
    rows
}

fn parameters(fit: &FitResult) -> Parameters {
    let n = fit.vcov.nrows();
    Parameters {
        names: fit.names(),
        psi: fit.psi(),
        vcov: (0..n).map(|i| (0..n).map(|j| finite(fit.vcov[(i, j)])).collect()).collect(),
    }
}

fn random_summary(fit: &FitResult) -> Option<RandomSummary> {
    let re = fit.estimates.random?;
    let correlation = match re {
        RandomEffects::Correlated { .. } => random_correlation(fit).ok().map(|d| Interval {
            estimate: d.estimate,
            lower: d.lower,
            upper: d.upper,
        }),
        RandomEffects::Shared { .. } => None,
    };
    Some(RandomSummary {
        structure: match re.structure() {
            RandomStructure::Correlated => "correlated".into(),
            RandomStructure::Shared => "shared".into(),
        },
        covariance: re.covariance(),
        correlation,
    })
}

fn count_tables(fit: &FitResult, data: &Ingested, order: usize) -> Result<CountTables, CliError> {
    let observed = data.dataset.cell_counts();
    let predicted = expected_counts(&fit.estimates, &data.dataset, order)?;
    let chi_square = goodness_of_fit(&observed, &predicted)?;
    Ok(CountTables {
        observed: [observed.row(0).to_vec(), observed.row(1).to_vec()],
        predicted: [predicted.row(0).to_vec(), predicted.row(1).to_vec()],
        chi_square,
    })
}

/// Odds ratios per association group, at the group's weighted mean covariates.
fn odds_ratio_groups(fit: &FitResult, data: &Ingested, order: usize) -> Result<Vec<OddsRatioGroup>, CliError> {
    let k = data.dataset.k();
    let mut groups: BTreeMap<&[usize], Vec<usize>> = BTreeMap::new();
    for (i, g) in data.groups.iter().enumerate() {
        groups.entry(g.as_slice()).or_default().push(i);
    }
    let mixed = fit.estimates.random.is_some();
    let mut out = vec![];
    for (levels, members) in groups {
        let rows = data.dataset.rows();
        let first = &rows[members[0]];
        let mut z1 = vec![0.0; first.z1.len()];
        let mut z2 = vec![0.0; first.z2.len()];
        let mut counts = [vec![0.0; k], vec![0.0; k]];
        let mut total = 0.0;
        for &i in &members {
            let r = &rows[i];
            for (m, v) in z1.iter_mut().zip(&r.z1) {
                *m += r.weight * v;
            }
            for (m, v) in z2.iter_mut().zip(&r.z2) {
                *m += r.weight * v;
            }
            counts[r.x as usize][r.y - 1] += r.weight;
            total += r.weight;
        }
        if total <= 0.0 {
            continue;
        }
        z1.iter_mut().chain(z2.iter_mut()).for_each(|m| *m /= total);
        let z = Covariates {
            z1,
            z2,
            z_omega: first.z_omega.clone(),
        };
        let [r0, r1] = counts;
        let observed = observed_odds_ratios(&CellTable::new(r0, r1, CellKind::Counts)?);
        let predicted: Vec<(f64, f64, f64)> = if mixed {
            (1..k)
                .map(|j| population_association_ci(fit, j, &z, order).map(|d| (d.estimate, d.lower, d.upper)))
                .collect::<Result<_, _>>()?
        } else {
            predicted_odds_ratios(fit, &z)?
                .into_iter()
                .map(|s| (s.psi, s.lower, s.upper))
                .collect()
        };
        out.push(OddsRatioGroup {
            group: group_label(&data.factors, levels),
            population_averaged: mixed,
            rows: predicted
                .into_iter()
                .zip(observed)
                .enumerate()
                .map(|(j, ((psi, lower, upper), obs))| OddsRatioRow {
                    level: j + 1,
                    observed: finite(obs).filter(|o| *o > 0.0),
                    predicted: psi,
                    lower,
                    upper,
                })
                .collect(),
        });
    }
    Ok(out)
}

fn cross_moment(fit: &FitResult, terms: usize, sigma_x: f64, sigma_y: f64) -> Option<CrossMoment> {
    let d = latent_cross_moment(fit, terms, 1.0).ok()?;
    let s = sigma_x * sigma_y;
    let (lo, hi) = if s >= 0.0 { (d.lower * s, d.upper * s) } else { (d.upper * s, d.lower * s) };
    Some(CrossMoment {
        terms,
        estimate: d.estimate,
        lower: d.lower,
        upper: d.upper,
        sigma_x,
        sigma_y,
        scaled: Interval {
            estimate: d.estimate * s,
            lower: lo,
            upper: hi,
        },
    })
}

/// Which optional sections a report carries.
#[derive(Debug, Clone, Copy)]
pub struct Sections {
    pub counts: bool,
    pub odds_ratios: bool,
    /// `(terms, σ_x, σ_y)` for the latent cross moment.
    pub cross_moment: Option<(usize, f64, f64)>,
}

impl Sections {
    pub fn all() -> Self {
        Self {
            counts: true,
            odds_ratios: true,
            cross_moment: Some((10, 1.0, 1.0)),
        }
    }
}

/// Assemble a report for a fit of `data` under `spec`.
pub fn build_report(
    command: &str,
    spec: &ModelSpec,
    data: &Ingested,
    fit: &FitResult,
    sections: Sections,
) -> Result<RunReport, CliError> {
    let order = spec.gh_order;
    Ok(RunReport {
        command: command.into(),
        model: spec.clone(),
        factors: data.factors.clone(),
        converged: fit.converged,
        iterations: fit.n_iter,
        gradient_norm: fit.gradient_norm,
        loglik: fit.loglik,
        n_obs: fit.n_obs,
        boundary: fit.boundary,
        notes: fit.notes.clone(),
        estimates: estimate_rows(fit),
        parameters: parameters(fit),
        random_effects: random_summary(fit),
        counts: if sections.counts {
            Some(count_tables(fit, data, order)?)
        } else {
            None
        },
        odds_ratios: if sections.odds_ratios {
            odds_ratio_groups(fit, data, order)?
        } else {
            vec![]
        },
        latent_cross_moment: sections
            .cross_moment
            .and_then(|(t, sx, sy)| cross_moment(fit, t, sx, sy)),
        provenance: Provenance {
            input_sha256: data.digest.clone(),
            seed: spec.seed,
            version: env!("CARGO_PKG_VERSION").into(),
        },
    })
}

fn load_report(path: &std::path::Path) -> Result<RunReport, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Input(IngestError::Spec(format!("cannot parse report {}: {e}", path.display())))
    })
}

/// Fit afresh, or rebuild the fit stored in `--report`.
fn obtain_fit(args: &ReuseArgs) -> Result<(ModelSpec, Ingested, FitResult), CliError> {
    match &args.report {
        Some(path) => {
            let saved = load_report(path)?;
            let data = ingest_csv(&args.model.data, &saved.model, Some(&saved.factors))?;
            let fit = fit_from_report(&saved, &data)?;
            Ok((saved.model, data, fit))
        }
        None => {
            let spec = args.model.spec()?;
            let data = ingest_csv(&args.model.data, &spec, None)?;
            let fit = fit_model(&data, &spec)?;
            Ok((spec, data, fit))
        }
    }
}

fn emit(report: &RunReport, args: &ModelArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    if let Some(path) = &args.out {
        std::fs::write(path, report.to_json()).map_err(|e| io_error(path, e))?;
    }
    let text = if args.json { report.to_json() } else { report.render_text() };
    stdout
        .write_all(text.as_bytes())
        .map_err(|e| io_error(std::path::Path::new("<stdout>"), e))?;
    if report.converged {
        Ok(EXIT_OK)
    } else {
        Err(CliError::Fit(format!(
            "optimiser did not converge after {} iterations (max |gradient| = {:.3e})",
            report.iterations, report.gradient_norm
        )))
    }
}

fn cmd_fit(args: &FitArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let spec = args.model.spec()?;
    let data = ingest_csv(&args.model.data, &spec, None)?;
    let fit = fit_model(&data, &spec)?;
    let report = build_report("fit", &spec, &data, &fit, Sections::all())?;
    emit(&report, &args.model, stdout)
}

fn cmd_predict(args: &ReuseArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let (spec, data, fit) = obtain_fit(args)?;
    let sections = Sections {
        counts: true,
        odds_ratios: false,
        cross_moment: None,
    };
    let report = build_report("predict", &spec, &data, &fit, sections)?;
    emit(&report, &args.model, stdout)
}

fn cmd_assoc(args: &AssocArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let (spec, data, fit) = obtain_fit(&args.reuse)?;
    let sections = Sections {
        counts: false,
        odds_ratios: true,
        cross_moment: Some((args.series_terms, args.sigma_x, args.sigma_y)),
    };
    let report = build_report("assoc", &spec, &data, &fit, sections)?;
    emit(&report, &args.reuse.model, stdout)
}

/// CSV text of `n` draws thresholded at `θ` and `τ`.
pub fn simulate_csv(theta: f64, tau: &[f64], omega: f64, n: usize, seed: u64, latent: bool) -> Result<String, CliError> {
    if tau.is_empty() || tau.windows(2).any(|w| w[0] >= w[1]) || !theta.is_finite() || tau.iter().any(|t| !t.is_finite()) {
        return Err(IngestError::Spec("--theta must be finite and --tau strictly increasing".into()).into());
    }
    let p = AmhParams::standard(omega)?;
    let draws = amh_logit::amh::sample(&p, seed, n)?;
    let mut out = String::from(if latent { "x,y,xstar,ystar\n" } else { "x,y\n" });
    for (xs, ys) in draws {
        let x = u8::from(xs > theta);
        let y = 1 + tau.iter().filter(|t| ys > **t).count();
        if latent {
            out.push_str(&format!("{x},{y},{xs},{ys}\n"));
        } else {
            out.push_str(&format!("{x},{y}\n"));
        }
    }
    Ok(out)
}

fn cmd_simulate(args: &SimulateArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let csv = simulate_csv(args.theta, &args.tau, args.omega, args.n, args.seed, args.latent)?;
    match &args.out {
        Some(path) => std::fs::write(path, csv).map_err(|e| io_error(path, e))?,
        None => stdout
            .write_all(csv.as_bytes())
            .map_err(|e| io_error(std::path::Path::new("<stdout>"), e))?,
    }
    Ok(EXIT_OK)
}

/// Parse `args` (including the program name), run the command and return the
/// exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(stderr, "{}", e.render())
            } else {
                write!(stdout, "{}", e.render())
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Fit(a) => cmd_fit(a, stdout),
        Command::Predict(a) => cmd_predict(a, stdout),
        Command::Assoc(a) => cmd_assoc(a, stdout),
        Command::Simulate(a) => cmd_simulate(a, stdout),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
