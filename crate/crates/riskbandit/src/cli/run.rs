//! Experiment orchestration and deterministic artifact emission.
//!
//! Per horizon the runner executes the Monte-Carlo batch, optionally computes
//! theorem-bound comparisons and lower-bound reference lines, and writes:
//!
//! * `trajectory_T{T}.csv` — checkpoint rows with per-arm mean pulls /
//!   standard errors and the three regret trajectories;
//! * `summary_T{T}.json` — fingerprint, oracle classification, bounds/slack,
//!   lower bounds, flag statistics, config echo (schema in `schema/`);
//! * `diagnostics_T{T}.json` — wall-clock timings, deliberately segregated so
//!   every other artifact is byte-reproducible from (config, seed);
//! * `tradeoff.csv` — in tradeoff mode, one row per horizon for both the
//!   feasible instance and its infeasible companion.
//!
//! Floats are rendered with 17 significant digits (`{:.16e}`), so re-parsing
//! recovers the in-memory doubles bit-exactly. Every file is written to a
//! temporary sibling and renamed into place.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::cli::config::ResolvedExperiment;
use crate::instances::{
    classify, classify_constrained, theorem5_bounds, theorem_bounds, AttributeKind, ConLcbBounds,
    ConstrainedOracle, InstanceOracle, InstanceSpec, TheoremBounds,
};
use crate::lower_bounds::{
    eta_feasible, eta_infeasible, theorem4_lower_bound, EtaResult, GaussianClass,
};
use crate::policies::{AttributeEstimator, PolicyConfig};
use crate::risk_core::SubGaussianParams;
use crate::simulator::{
    instance_fingerprint, monte_carlo, tradeoff_experiment, AggregateReport, SimError, SlackRow,
    TradeoffRow,
};

#[derive(Debug)]
pub enum CliError {
    Config(Vec<String>),
    Runtime(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(errs) => {
                writeln!(f, "configuration errors:")?;
                for e in errs {
                    writeln!(f, "  - {e}")?;
                }
                Ok(())
            }
            CliError::Runtime(e) => write!(f, "runtime error: {e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<Vec<String>> for CliError {
    fn from(errs: Vec<String>) -> Self {
        CliError::Config(errs)
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// 17-significant-digit float rendering; round-trips f64 bit-exactly.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes bytes atomically: temp sibling then rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)
        .map_err(|e| CliError::Io(format!("writing {}: {e}", tmp.display())))?;
    fs::rename(&tmp, path)
        .map_err(|e| CliError::Io(format!("renaming into {}: {e}", path.display())))
    }

/// Emits the checkpoint trajectory CSV for an aggregate report.
pub fn emit_trajectory_csv(report: &AggregateReport, path: &Path) -> Result<(), CliError> {
    let k_arms = report.mean_pulls.first().map_or(0, |row| row.len());
    let mut out = String::new();
    let mut header: Vec<String> = vec!["t".into()];
    for k in 0..k_arms {
        header.push(format!("mean_pulls_arm{}", k + 1));
    }
    for k in 0..k_arms {
        header.push(format!("se_pulls_arm{}", k + 1));
    }
    header.extend(
        [
            "mean_regret_sub",
            "se_regret_sub",
            "mean_regret_inf",
            "se_regret_inf",
            "mean_regret_risk",
            "se_regret_risk",
        ]
        .map(String::from),
    );
    out.push_str(&header.join(","));
    out.push('\n');
    for (c, &t) in report.checkpoints.iter().enumerate() {
        let mut row: Vec<String> = vec![t.to_string()];
        for k in 0..k_arms {
            row.push(fmt_float(report.mean_pulls[c][k]));
        }
        for k in 0..k_arms {
            row.push(fmt_float(report.se_pulls[c][k]));
        }
        for col in [
            &report.mean_regret_sub,
            &report.se_regret_sub,
            &report.mean_regret_inf,
            &report.se_regret_inf,
            &report.mean_regret_risk,
            &report.se_regret_risk,
        ] {
            row.push(col.as_ref().map_or(String::new(), |v| fmt_float(v[c])));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

/// Emits the tradeoff table CSV.
pub fn emit_tradeoff_csv(rows: &[TradeoffRow], path: &Path) -> Result<(), CliError> {
    let mut out =
        String::from("t,regret_feasible,flag_error_feasible,flag_error_infeasible\n");
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            row.horizon,
            fmt_float(row.regret_feasible),
            fmt_float(row.flag_error_feasible),
            fmt_float(row.flag_error_infeasible)
        );
    }
    atomic_write(path, out.as_bytes())
}

/// Oracle classification in either instance mode.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum OracleSummary {
    Single(InstanceOracle),
    Constrained(ConstrainedOracle),
}

/// Bound section of the summary: whichever calculator applies to the policy.
#[derive(Debug, Clone, Serialize)]
pub struct BoundSummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theorem_bounds: Option<TheoremBounds>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub con_lcb_bounds: Option<ConLcbBounds>,
    pub slack: Vec<SlackRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LowerBoundRow {
    pub arm: usize,
    pub eta: EtaResult,
    pub theorem4_pull_floor: f64,
}

/// The JSON summary document (see `schema/summary.schema.json`).
#[derive(Debug, Clone, Serialize)]
pub struct SummaryDocument {
    pub version: String,
    pub fingerprint: String,
    pub base_seed: u64,
    pub horizon: usize,
    pub reps: usize,
    pub policy: String,
    pub oracle: OracleSummary,
    pub final_mean_pulls: Vec<f64>,
    pub final_se_pulls: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_regret_sub: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_regret_inf: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_regret_risk: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flag_error_rate: Option<f64>,
    pub truth_feasible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower_bounds: Option<Vec<LowerBoundRow>>,
    pub config: crate::cli::config::ExperimentConfig,
}

#[derive(Debug, Clone, Serialize)]
struct Diagnostics {
    horizon: usize,
    reps: usize,
    total_episode_secs: f64,
    mean_episode_secs: f64,
}

/// Builds per-arm slack rows against an RHS column.
fn slack_rows(report: &AggregateReport, rhs_of: impl Fn(usize) -> Option<f64>) -> Vec<SlackRow> {
    let last = report.checkpoints.len() - 1;
    (0..report.mean_pulls[last].len())
        .map(|k| {
            let rhs = rhs_of(k);
            let mean = report.mean_pulls[last][k];
            let se = report.se_pulls[last][k];
            SlackRow {
                arm: k,
                mean_pulls: mean,
                se_pulls: se,
                rhs,
                slack: rhs.map(|r| r - mean),
                violated: rhs.is_some_and(|r| mean > r + 3.0 * se),
            }
        })
        .collect()
}

fn build_bounds(
    exp: &ResolvedExperiment,
    report: &AggregateReport,
    horizon: usize,
) -> Result<Option<(OracleSummary, Option<BoundSummary>)>, CliError> {
    match &exp.policy {
        PolicyConfig::ConLcb(params) => {
            let objective = match &params.objective {
                AttributeEstimator::Mean => AttributeKind::Mean,
                AttributeEstimator::Cvar(level) => AttributeKind::Cvar { alpha: *level },
                AttributeEstimator::Custom(_) => return Ok(None),
            };
            let oracle = classify_constrained(&exp.instance, objective)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            let bounds = if exp.analysis_bounds {
                let rates: Vec<f64> = params.constraints.iter().map(|c| c.rate).collect();
                let b = theorem5_bounds(&oracle, params.objective_rate, &rates, horizon);
                let slack = slack_rows(report, |k| b.rhs[k]);
                Some(BoundSummary { theorem_bounds: None, con_lcb_bounds: Some(b), slack })
            } else {
                None
            };
            Ok(Some((OracleSummary::Constrained(oracle), bounds)))
        }
        policy => {
            if exp.instance.tau.is_none() {
                return Ok(None);
            }
            let oracle =
                classify(&exp.instance).map_err(|e| CliError::Runtime(e.to_string()))?;
            let bounds = if exp.analysis_bounds {
                let (sg, mp) = match policy {
                    PolicyConfig::RcLcb(p) => (p.sg.clone(), None),
                    PolicyConfig::BaselineCvarLcb { sg, .. } => (sg.clone(), None),
                    PolicyConfig::RclcbHt(p) => {
                        (SubGaussianParams::conservative(1.0), Some(p.mp.clone()))
                    }
                    PolicyConfig::BaselineLcb { sigma } => {
                        (SubGaussianParams::calibrated(*sigma), None)
                    }
                    PolicyConfig::ConLcb(_) => unreachable!(),
                };
                let b =
                    theorem_bounds(&oracle, &sg, mp.as_ref(), exp.instance.level, horizon);
                let use_ht = matches!(policy, PolicyConfig::RclcbHt(_));
                let slack = if use_ht {
                    let ht = b.ht.clone().expect("ht bounds requested for ht policy");
                    slack_rows(report, move |k| {
                        ht.rhs_feasible_suboptimal[k]
                            .or(ht.rhs_deceiver[k])
                            .or(ht.rhs_infeasible_suboptimal[k])
                            .or(ht.rhs_risk[k])
                    })
                } else {
                    slack_rows(report, |k| {
                        b.rhs_feasible_suboptimal[k]
                            .or(b.rhs_deceiver[k])
                            .or(b.rhs_infeasible_suboptimal[k])
                            .or(b.rhs_risk[k])
                    })
                };
                Some(BoundSummary { theorem_bounds: Some(b), con_lcb_bounds: None, slack })
            } else {
                None
            };
            Ok(Some((OracleSummary::Single(oracle), bounds)))
        }
    }
}

fn build_lower_bounds(spec: &InstanceSpec, horizon: usize) -> Option<Vec<LowerBoundRow>> {
    // Gaussian single-constraint instances only.
    spec.tau?;
    let params: Option<Vec<(f64, f64)>> = spec
        .arms
        .iter()
        .map(|a| match a {
            crate::instances::ArmModel::Gaussian { mu, sigma } => Some((*mu, *sigma)),
            _ => None,
        })
        .collect();
    let params = params?;
    let oracle = classify(spec).ok()?;
    let sigma_max = params.iter().map(|p| p.1).fold(0.0, f64::max);
    let mu_lo = params.iter().map(|p| p.0).fold(f64::INFINITY, f64::min) - 20.0 * sigma_max;
    let mu_hi = params.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max) + 20.0 * sigma_max;
    let rows = params
        .iter()
        .enumerate()
        .map(|(k, &(mu, sigma))| {
            let cls = GaussianClass::fixed(sigma, (mu_lo, mu_hi)).ok()?;
            let eta = if oracle.is_feasible {
                eta_feasible(
                    mu,
                    sigma,
                    oracle.mu_star.unwrap(),
                    oracle.tau,
                    spec.level,
                    &cls,
                )
                .ok()?
            } else {
                eta_infeasible(mu, sigma, oracle.cvar_star.unwrap(), spec.level, &cls).ok()?
            };
            Some(LowerBoundRow {
                arm: k,
                eta,
                theorem4_pull_floor: theorem4_lower_bound(&eta, horizon),
            })
        })
        .collect::<Option<Vec<_>>>()?;
    Some(rows)
}

/// Artifacts produced for one horizon.
#[derive(Debug, Clone)]
pub struct HorizonArtifacts {
    pub horizon: usize,
    pub csv_path: Option<PathBuf>,
    pub summary_path: Option<PathBuf>,
}

/// Executes the resolved experiment and writes all artifacts.
pub fn run_experiment(exp: &ResolvedExperiment, quiet: bool) -> Result<Vec<HorizonArtifacts>, CliError> {
    fs::create_dir_all(&exp.out_dir)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", exp.out_dir.display())))?;
    let fingerprint = instance_fingerprint(&exp.instance);
    let mut artifacts = Vec::new();

    for &horizon in &exp.horizons {
        let out = monte_carlo(&exp.instance, &exp.policy, horizon, exp.reps, exp.base_seed)?;
        let report = &out.report;

        let oracle_bounds = build_bounds(exp, report, horizon)?;
        let lower = if exp.analysis_lower_bounds {
            build_lower_bounds(&exp.instance, horizon)
        } else {
            None
        };

        let mut csv_path = None;
        if exp.emit_csv {
            let path = exp.out_dir.join(format!("trajectory_T{horizon}.csv"));
            emit_trajectory_csv(report, &path)?;
            csv_path = Some(path);
        }

        let last = report.checkpoints.len() - 1;
        let mut summary_path = None;
        if exp.emit_summary {
            let (oracle, bounds) = match &oracle_bounds {
                Some((o, b)) => (o.clone(), b.clone()),
                None => {
                    return Err(CliError::Runtime(
                        "summary emission requires a classifiable instance/policy pair".into(),
                    ))
                }
            };
            let doc = SummaryDocument {
                version: env!("CARGO_PKG_VERSION").to_string(),
                fingerprint: fingerprint.clone(),
                base_seed: exp.base_seed,
                horizon,
                reps: exp.reps,
                policy: exp.policy.name().to_string(),
                oracle,
                final_mean_pulls: report.mean_pulls[last].clone(),
                final_se_pulls: report.se_pulls[last].clone(),
                final_regret_sub: report.mean_regret_sub.as_ref().map(|v| v[last]),
                final_regret_inf: report.mean_regret_inf.as_ref().map(|v| v[last]),
                final_regret_risk: report.mean_regret_risk.as_ref().map(|v| v[last]),
                flag_error_rate: report.flag_error_rate,
                truth_feasible: report.truth_feasible,
                bounds,
                lower_bounds: lower,
                config: exp.config_echo.clone(),
            };
            let json = serde_json::to_vec_pretty(&doc)
                .map_err(|e| CliError::Runtime(format!("serializing summary: {e}")))?;
            let path = exp.out_dir.join(format!("summary_T{horizon}.json"));
            atomic_write(&path, &json)?;
            summary_path = Some(path);
        }

        // Wall-clock timings live in their own file so everything above is
        // byte-reproducible.
        let total: f64 = out.records.iter().map(|r| r.elapsed_secs).sum();
        let diag = Diagnostics {
            horizon,
            reps: exp.reps,
            total_episode_secs: total,
            mean_episode_secs: total / exp.reps as f64,
        };
        let diag_json = serde_json::to_vec_pretty(&diag)
            .map_err(|e| CliError::Runtime(format!("serializing diagnostics: {e}")))?;
        atomic_write(&exp.out_dir.join(format!("diagnostics_T{horizon}.json")), &diag_json)?;

        if !quiet {
            print_report(report, &oracle_bounds);
        }
        artifacts.push(HorizonArtifacts { horizon, csv_path, summary_path });
    }

    if let Some(companion) = &exp.tradeoff_instance {
        let rows = tradeoff_experiment(
            &exp.instance,
            companion,
            &exp.policy,
            &exp.horizons,
            exp.reps,
            exp.base_seed,
        )?;
        emit_tradeoff_csv(&rows, &exp.out_dir.join("tradeoff.csv"))?;
        if !quiet {
            println!("tradeoff table (T, regret, flag_err_feasible, flag_err_infeasible):");
            for r in &rows {
                println!(
                    "  {:>8}  {:>12.4}  {:>8.4}  {:>8.4}",
                    r.horizon, r.regret_feasible, r.flag_error_feasible, r.flag_error_infeasible
                );
            }
        }
    }
    Ok(artifacts)
}

fn print_report(report: &AggregateReport, oracle_bounds: &Option<(OracleSummary, Option<BoundSummary>)>) {
    let last = report.checkpoints.len() - 1;
    println!(
        "T = {}, reps = {}, instance {}: ",
        report.horizon,
        report.reps,
        if report.truth_feasible { "feasible" } else { "infeasible" }
    );
    let slack = oracle_bounds
        .as_ref()
        .and_then(|(_, b)| b.as_ref())
        .map(|b| &b.slack);
    for (k, &mean) in report.mean_pulls[last].iter().enumerate() {
        let rhs = slack
            .and_then(|rows| rows[k].rhs)
            .map_or("n/a".to_string(), |r| format!("{r:.1}"));
        println!(
            "  arm {}: mean pulls {:>10.1} (se {:.2})  theorem RHS {}",
            k + 1,
            mean,
            report.se_pulls[last][k],
            rhs
        );
    }
    if let Some(rate) = report.flag_error_rate {
        println!("  flag error rate: {rate:.4}");
    }
    for (name, col) in [
        ("regret_sub", &report.mean_regret_sub),
        ("regret_inf", &report.mean_regret_inf),
        ("regret_risk", &report.mean_regret_risk),
    ] {
        if let Some(v) = col {
            println!("  {name}(T) = {:.3}", v[last]);
        }
    }
}
