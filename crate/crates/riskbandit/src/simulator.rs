//! Episode execution, pseudo-regret accounting, and seeded Monte-Carlo
//! aggregation.
//!
//! Regret is *pseudo*-regret: playing arm `k` adds the true gap from the
//! instance oracle, never a realized loss, so every theorem about expected
//! pull counts can be checked with low variance:
//!
//! * feasible instance — `Delta(k)` to `regret_sub` for feasible suboptimal
//!   arms, `Delta_tau(k)` to `regret_inf` for infeasible arms;
//! * infeasible instance — `Delta_risk(k)` to `regret_risk`.
//!
//! Trajectories are recorded at the logarithmically spaced checkpoints
//! `{ceil(T * 2^{-j})} ∪ {T}` (deduplicated), which supports regret-vs-log-t
//! slope fits without O(T) storage.
//!
//! Determinism: an episode is a pure function of (instance, policy, horizon,
//! seed). Monte-Carlo reps derive independent ChaCha8 streams from
//! `(base_seed, rep)` via a SplitMix64 mix, so parallel and sequential
//! execution produce identical reports.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::instances::{
    classify, classify_constrained, AttributeKind, InstanceError, InstanceSpec, TheoremBounds,
};
use crate::policies::{AttributeEstimator, PolicyConfig, PolicyError, PolicyState};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("horizon {horizon} is shorter than the arm count {num_arms}")]
    HorizonTooShort { horizon: usize, num_arms: usize },
    #[error("reps must be >= 1")]
    NoReps,
    #[error("instance fingerprint mismatch: report {report} vs bounds {bounds}")]
    FingerprintMismatch { report: String, bounds: String },
    #[error("{0}")]
    Incompatible(String),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Logarithmically spaced checkpoints `{ceil(T * 2^{-j})} ∪ {T}`, ascending,
/// deduplicated.
pub fn checkpoints(horizon: usize) -> Vec<usize> {
    let mut points = std::collections::BTreeSet::new();
    points.insert(horizon);
    let mut j = 1u32;
    loop {
        let denom = 1u64 << j;
        let t = (horizon as u64).div_ceil(denom) as usize;
        points.insert(t.max(1));
        if t <= 1 || j >= 62 {
            break;
        }
        j += 1;
    }
    points.into_iter().collect()
}

/// SplitMix64-derived per-rep seed; statistically independent streams for
/// adjacent reps and parallel/sequential equivalence by construction.
pub fn derive_seed(base_seed: u64, rep: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(base_seed ^ splitmix(rep))
}

/// SHA-256 fingerprint of the serialized instance, used to reject bound
/// comparisons across mismatched instances.
pub fn instance_fingerprint(spec: &InstanceSpec) -> String {
    let json = serde_json::to_string(spec).expect("instance specs are serializable");
    let mut hasher = Sha256::new();
    hasher.update(json.as_bytes());
    format!("{:x}", hasher.finalize())
}

/// One episode's trajectory: per-arm pulls and cumulative pseudo-regret at
/// every checkpoint, plus the final feasibility verdict.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub seed: u64,
    pub horizon: usize,
    pub checkpoints: Vec<usize>,
    /// `pull_counts[checkpoint][arm]`.
    pub pull_counts: Vec<Vec<usize>>,
    pub final_pulls: Vec<usize>,
    /// Feasible instances only.
    pub regret_sub: Option<Vec<f64>>,
    pub regret_inf: Option<Vec<f64>>,
    /// Infeasible instances only.
    pub regret_risk: Option<Vec<f64>>,
    /// None for baseline policies (no feasibility verdict).
    pub flag: Option<bool>,
    /// Wall-clock diagnostic; excluded from equality and determinism checks.
    pub elapsed_secs: f64,
}

impl PartialEq for RunRecord {
    fn eq(&self, other: &Self) -> bool {
        self.seed == other.seed
            && self.horizon == other.horizon
            && self.checkpoints == other.checkpoints
            && self.pull_counts == other.pull_counts
            && self.final_pulls == other.final_pulls
            && self.regret_sub == other.regret_sub
            && self.regret_inf == other.regret_inf
            && self.regret_risk == other.regret_risk
            && self.flag == other.flag
    }
}

/// Per-arm pseudo-regret increments plus the ground-truth feasibility bit.
struct RegretScheme {
    inc_sub: Option<Vec<f64>>,
    inc_inf: Option<Vec<f64>>,
    inc_risk: Option<Vec<f64>>,
    is_feasible: bool,
}

fn regret_scheme(spec: &InstanceSpec, policy: &PolicyConfig) -> Result<RegretScheme, SimError> {
    if spec.constraints.is_some() {
        // Multi-constraint mode: the objective gap plays the role of Delta;
        // for arms violating some constraint the largest violation gap plays
        // the role of Delta_tau. No Delta_risk analog is defined.
        let objective = match policy {
            PolicyConfig::ConLcb(p) => match &p.objective {
                AttributeEstimator::Mean => AttributeKind::Mean,
                AttributeEstimator::Cvar(level) => AttributeKind::Cvar { alpha: *level },
                AttributeEstimator::Custom(_) => {
                    return Err(SimError::Incompatible(
                        "custom objective estimators have no ground-truth oracle".into(),
                    ))
                }
            },
            _ => AttributeKind::Mean,
        };
        let oracle = classify_constrained(spec, objective)?;
        let k_arms = spec.num_arms();
        if oracle.is_feasible {
            let inc_sub = oracle.gap_objective.clone().map(|mut g| {
                for (k, v) in g.iter_mut().enumerate() {
                    if !oracle.feasible_set.contains(&k) {
                        *v = 0.0;
                    }
                }
                g
            });
            let inc_inf: Vec<f64> = (0..k_arms)
                .map(|k| {
                    oracle
                        .gap_constraint
                        .iter()
                        .filter_map(|g| g[k])
                        .fold(0.0, f64::max)
                })
                .collect();
            Ok(RegretScheme {
                inc_sub,
                inc_inf: Some(inc_inf),
                inc_risk: None,
                is_feasible: true,
            })
        } else {
            Ok(RegretScheme { inc_sub: None, inc_inf: None, inc_risk: None, is_feasible: false })
        }
    } else {
        let oracle = classify(spec)?;
        if oracle.is_feasible {
            let inc_sub: Vec<f64> = (0..spec.num_arms())
                .map(|k| {
                    if oracle.feasible_set.contains(&k) {
                        oracle.gap_mean.as_ref().unwrap()[k]
                    } else {
                        0.0
                    }
                })
                .collect();
            let inc_inf: Vec<f64> =
                oracle.gap_tau.iter().map(|g| g.unwrap_or(0.0)).collect();
            Ok(RegretScheme {
                inc_sub: Some(inc_sub),
                inc_inf: Some(inc_inf),
                inc_risk: None,
                is_feasible: true,
            })
        } else {
            Ok(RegretScheme {
                inc_sub: None,
                inc_inf: None,
                inc_risk: oracle.gap_risk.clone(),
                is_feasible: false,
            })
        }
    }
}

/// Runs one fully deterministic episode of `horizon` select/observe rounds.
pub fn run_episode(
    spec: &InstanceSpec,
    policy: &PolicyConfig,
    horizon: usize,
    seed: u64,
) -> Result<RunRecord, SimError> {
    spec.validate()?;
    let k_arms = spec.num_arms();
    if horizon < k_arms {
        return Err(SimError::HorizonTooShort { horizon, num_arms: k_arms });
    }
    let scheme = regret_scheme(spec, policy)?;
    let started = Instant::now();
    let mut state = PolicyState::new(policy.clone(), k_arms, horizon)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let marks = checkpoints(horizon);

    let mut cum_sub = 0.0;
    let mut cum_inf = 0.0;
    let mut cum_risk = 0.0;
    let mut pull_counts = Vec::with_capacity(marks.len());
    let mut traj_sub = Vec::with_capacity(marks.len());
    let mut traj_inf = Vec::with_capacity(marks.len());
    let mut traj_risk = Vec::with_capacity(marks.len());
    let mut next_mark = 0usize;

    for t in 1..=horizon {
        let arm = state.select()?;
        let draw = spec.arms[arm].sample(&mut rng);
        state.observe(arm, &[draw])?;
        if let Some(inc) = &scheme.inc_sub {
            cum_sub += inc[arm];
        }
        if let Some(inc) = &scheme.inc_inf {
            cum_inf += inc[arm];
        }
        if let Some(inc) = &scheme.inc_risk {
            cum_risk += inc[arm];
        }
        if next_mark < marks.len() && marks[next_mark] == t {
            pull_counts.push(state.pulls().to_vec());
            traj_sub.push(cum_sub);
            traj_inf.push(cum_inf);
            traj_risk.push(cum_risk);
            next_mark += 1;
        }
    }
    let flag = state.feasibility_flag()?;
    let final_pulls = state.pulls().to_vec();

    Ok(RunRecord {
        seed,
        horizon,
        checkpoints: marks,
        pull_counts,
        final_pulls,
        regret_sub: scheme.inc_sub.is_some().then_some(traj_sub),
        regret_inf: scheme.inc_inf.is_some().then_some(traj_inf),
        regret_risk: scheme.inc_risk.is_some().then_some(traj_risk),
        flag,
        elapsed_secs: started.elapsed().as_secs_f64(),
    })
}

/// Least-squares fit summary of mean regret against `log t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Fits `y = slope * x + intercept` and reports R^2 (1 for a degenerate
/// zero-variance response).
pub fn least_squares(xs: &[f64], ys: &[f64]) -> SlopeFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    let r_squared = if ss_tot > 1e-24 { 1.0 - ss_res / ss_tot } else { 1.0 };
    SlopeFit { slope, intercept, r_squared }
}

/// Cross-rep aggregation of a Monte-Carlo batch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateReport {
    pub horizon: usize,
    pub reps: usize,
    pub checkpoints: Vec<usize>,
    pub fingerprint: String,
    /// `mean_pulls[checkpoint][arm]`, with standard errors alongside.
    pub mean_pulls: Vec<Vec<f64>>,
    pub se_pulls: Vec<Vec<f64>>,
    pub mean_regret_sub: Option<Vec<f64>>,
    pub se_regret_sub: Option<Vec<f64>>,
    pub mean_regret_inf: Option<Vec<f64>>,
    pub se_regret_inf: Option<Vec<f64>>,
    pub mean_regret_risk: Option<Vec<f64>>,
    pub se_regret_risk: Option<Vec<f64>>,
    /// Fraction of reps whose feasibility verdict contradicts ground truth
    /// (None for baseline policies).
    pub flag_error_rate: Option<f64>,
    pub truth_feasible: bool,
    /// Fit of the primary mean regret (sub for feasible, risk for infeasible
    /// instances) against log t over the last half of the checkpoints.
    pub slope_fit: Option<SlopeFit>,
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Aggregates episode records (all from the same spec/policy/horizon).
pub fn aggregate(
    records: &[RunRecord],
    fingerprint: String,
    truth_feasible: bool,
) -> AggregateReport {
    let reps = records.len();
    let marks = records[0].checkpoints.clone();
    let k_arms = records[0].final_pulls.len();
    let n_marks = marks.len();

    let mut mean_pulls = vec![vec![0.0; k_arms]; n_marks];
    let mut se_pulls = vec![vec![0.0; k_arms]; n_marks];
    for (c, _) in marks.iter().enumerate() {
        for k in 0..k_arms {
            let vals: Vec<f64> =
                records.iter().map(|r| r.pull_counts[c][k] as f64).collect();
            let (m, s) = mean_se(&vals);
            mean_pulls[c][k] = m;
            se_pulls[c][k] = s;
        }
    }

    let regret_stats = |select: fn(&RunRecord) -> Option<&Vec<f64>>| -> (Option<Vec<f64>>, Option<Vec<f64>>) {
        if select(&records[0]).is_none() {
            return (None, None);
        }
        let mut means = Vec::with_capacity(n_marks);
        let mut ses = Vec::with_capacity(n_marks);
        for c in 0..n_marks {
            let vals: Vec<f64> = records
                .iter()
                .map(|r| select(r).expect("uniform batch")[c])
                .collect();
            let (m, s) = mean_se(&vals);
            means.push(m);
            ses.push(s);
        }
        (Some(means), Some(ses))
    };
    let (mean_regret_sub, se_regret_sub) = regret_stats(|r| r.regret_sub.as_ref());
    let (mean_regret_inf, se_regret_inf) = regret_stats(|r| r.regret_inf.as_ref());
    let (mean_regret_risk, se_regret_risk) = regret_stats(|r| r.regret_risk.as_ref());

    let flag_error_rate = if records[0].flag.is_some() {
        let errors = records
            .iter()
            .filter(|r| r.flag.expect("uniform batch") != truth_feasible)
            .count();
        Some(errors as f64 / reps as f64)
    } else {
        None
    };

    let primary = if truth_feasible { &mean_regret_sub } else { &mean_regret_risk };
    let slope_fit = primary.as_ref().and_then(|means| {
        let start = n_marks / 2;
        if n_marks - start < 2 {
            return None;
        }
        let xs: Vec<f64> = marks[start..].iter().map(|&t| (t as f64).ln()).collect();
        Some(least_squares(&xs, &means[start..]))
    });

    AggregateReport {
        horizon: records[0].horizon,
        reps,
        checkpoints: marks,
        fingerprint,
        mean_pulls,
        se_pulls,
        mean_regret_sub,
        se_regret_sub,
        mean_regret_inf,
        se_regret_inf,
        mean_regret_risk,
        se_regret_risk,
        flag_error_rate,
        truth_feasible,
    slope_fit,
    }
}

/// A Monte-Carlo batch: the raw per-rep records (rep order) and their
/// aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloOutput {
    pub records: Vec<RunRecord>,
    pub report: AggregateReport,
}

/// Runs `reps` independent episodes (in parallel) and aggregates them.
/// Results are identical to sequential execution.
pub fn monte_carlo(
    spec: &InstanceSpec,
    policy: &PolicyConfig,
    horizon: usize,
    reps: usize,
    base_seed: u64,
) -> Result<MonteCarloOutput, SimError> {
    monte_carlo_with(spec, policy, horizon, reps, base_seed, true)
}

/// As [`monte_carlo`] with an explicit parallel/sequential switch (the
/// sequential path exists to assert bit-identical equivalence).
pub fn monte_carlo_with(
    spec: &InstanceSpec,
    policy: &PolicyConfig,
    horizon: usize,
    reps: usize,
    base_seed: u64,
    parallel: bool,
) -> Result<MonteCarloOutput, SimError> {
    if reps == 0 {
        return Err(SimError::NoReps);
    }
    let truth_feasible = regret_scheme(spec, policy)?.is_feasible;
    let run =
        |rep: usize| run_episode(spec, policy, horizon, derive_seed(base_seed, rep as u64));
    let records: Vec<RunRecord> = if parallel {
        (0..reps).into_par_iter().map(run).collect::<Result<_, _>>()?
    } else {
        (0..reps).map(run).collect::<Result<_, _>>()?
    };
    let report = aggregate(&records, instance_fingerprint(spec), truth_feasible);
    Ok(MonteCarloOutput { records, report })
}

/// Theorem bounds stamped with the instance fingerprint they were computed
/// from, so cross-instance comparisons are rejected.
#[derive(Debug, Clone, Serialize)]
pub struct BoundContext {
    pub fingerprint: String,
    pub bounds: TheoremBounds,
}

/// One row of the empirical-vs-theorem slack table (final checkpoint).
#[derive(Debug, Clone, Serialize)]
pub struct SlackRow {
    pub arm: usize,
    pub mean_pulls: f64,
    pub se_pulls: f64,
    /// None = "not applicable" (optimal arm / zero gap).
    pub rhs: Option<f64>,
    pub slack: Option<f64>,
    /// True when the empirical mean exceeds the RHS by more than 3 SEs.
    pub violated: bool,
}

/// Compares final mean pulls against the theorem right-hand sides.
pub fn compare_to_bounds(
    report: &AggregateReport,
    ctx: &BoundContext,
) -> Result<Vec<SlackRow>, SimError> {
    if report.fingerprint != ctx.fingerprint {
        return Err(SimError::FingerprintMismatch {
            report: report.fingerprint.clone(),
            bounds: ctx.fingerprint.clone(),
        });
    }
    let last = report.checkpoints.len() - 1;
    let k_arms = report.mean_pulls[last].len();
    let rows = (0..k_arms)
        .map(|k| {
            let rhs = ctx.bounds.rhs_feasible_suboptimal[k]
                .or(ctx.bounds.rhs_deceiver[k])
                .or(ctx.bounds.rhs_infeasible_suboptimal[k])
                .or(ctx.bounds.rhs_risk[k]);
            let mean = report.mean_pulls[last][k];
            let se = report.se_pulls[last][k];
            let slack = rhs.map(|r| r - mean);
            let violated = rhs.is_some_and(|r| mean > r + 3.0 * se);
            SlackRow { arm: k, mean_pulls: mean, se_pulls: se, rhs, slack, violated }
        })
        .collect();
    Ok(rows)
}

/// One horizon's row of the flag-error-versus-regret tradeoff table.
#[derive(Debug, Clone, Serialize)]
pub struct TradeoffRow {
    pub horizon: usize,
    /// Final mean primary regret on the feasible instance.
    pub regret_feasible: f64,
    pub flag_error_feasible: f64,
    pub flag_error_infeasible: f64,
}

/// Runs both instances of a feasible/infeasible pair across horizons,
/// exposing the flag-error decay against regret growth.
pub fn tradeoff_experiment(
    feasible_spec: &InstanceSpec,
    infeasible_spec: &InstanceSpec,
    policy: &PolicyConfig,
    horizons: &[usize],
    reps: usize,
    base_seed: u64,
) -> Result<Vec<TradeoffRow>, SimError> {
    if reps == 0 {
        return Err(SimError::NoReps);
    }
    if feasible_spec.num_arms() != infeasible_spec.num_arms() {
        return Err(SimError::Incompatible(
            "tradeoff instances must share the arm count".into(),
        ));
    }
    if feasible_spec.level != infeasible_spec.level {
        return Err(SimError::Incompatible(
            "tradeoff instances must share the risk level".into(),
        ));
    }
    let mut rows = Vec::with_capacity(horizons.len());
    for &horizon in horizons {
        let feas = monte_carlo(feasible_spec, policy, horizon, reps, base_seed)?;
        let infeas = monte_carlo(infeasible_spec, policy, horizon, reps, base_seed)?;
        let last = feas.report.checkpoints.len() - 1;
        let regret_feasible = feas
            .report
            .mean_regret_sub
            .as_ref()
            .map(|m| m[last])
            .unwrap_or(f64::NAN);
        rows.push(TradeoffRow {
            horizon,
            regret_feasible,
            flag_error_feasible: feas.report.flag_error_rate.ok_or_else(|| {
                SimError::Incompatible("tradeoff requires a flag-carrying policy".into())
            })?,
            flag_error_infeasible: infeas.report.flag_error_rate.ok_or_else(|| {
                SimError::Incompatible("tradeoff requires a flag-carrying policy".into())
            })?,
        });
    }
    Ok(rows)
}
