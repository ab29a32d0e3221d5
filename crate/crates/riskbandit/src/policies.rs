//! Bandit policies behind a uniform select/observe/flag contract.
//!
//! Three risk-aware policies plus two unconstrained baselines:
//!
//! * **RC-LCB** — maintains the plausibly feasible set
//!   `K_t = {k : c_hat(k) <= tau + (1/beta) sqrt(log(2 D T^2)/(d N_k))}`;
//!   when nonempty it plays the mean-LCB minimizer over the set, otherwise
//!   the CVaR-LCB minimizer over all arms (risk-averse fallback).
//! * **RCLCB-HT** — the same control flow for heavy-tailed losses with a
//!   bounded p-th moment (`1 < p <= 2`): truncated mean/CVaR estimators and
//!   their truncation-aware widths; requires `beta <= 1/2`.
//! * **Con-LCB** — a generic m-constraint variant: per-constraint plausibly
//!   feasible sets are intersected; if the intersection is empty the policy
//!   drops constraints from the front of the list (lowest importance first)
//!   until the remaining suffix admits an arm, then minimizes the LCB of the
//!   first retained attribute.
//! * **Baselines** — plain mean-LCB (ignores risk entirely) and pure
//!   CVaR-LCB minimization (ignores the threshold), used as contrast policies.
//!
//! Protocol: `select` and `observe` strictly alternate; rounds `1..=K` play
//! each arm once in index order; at round `t` the selection uses statistics
//! from the first `t-1` pulls and exactly `T` pulls occur in total. Argmin
//! ties always break to the lowest arm index. The feasibility flag is
//! recomputed from the final pull counts, not the last in-loop set.

use std::sync::Arc;

use thiserror::Error;

use crate::risk_core::{
    cvar_trunc_level, cvar_width_ht, cvar_width_subgauss, empirical_cvar, mean_width_ht,
    mean_width_subgauss, truncated_cvar, EstimatorError, MomentParams, RiskLevel,
    SampleBuffer, SubGaussianParams,
};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("horizon exhausted: round {round} of {horizon}")]
    HorizonExhausted { round: usize, horizon: usize },
    #[error("initialization incomplete: arm {0} has no samples")]
    InitializationIncomplete(usize),
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("feasibility flag requires a finished episode (round {round} < horizon {horizon})")]
    FlagBeforeHorizon { round: usize, horizon: usize },
    #[error("operation not applicable to this policy: {0}")]
    NotApplicable(String),
    #[error("invalid policy configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

/// Plug-in attribute estimator for Con-LCB. `Mean` and `Cvar` have exact
/// instance oracles; `Custom` closures are policy-only (no ground truth).
#[derive(Clone)]
pub enum AttributeEstimator {
    Mean,
    Cvar(RiskLevel),
    Custom(Arc<dyn Fn(&SampleBuffer) -> Result<f64, EstimatorError> + Send + Sync>),
}

impl std::fmt::Debug for AttributeEstimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AttributeEstimator::Mean => write!(f, "Mean"),
            AttributeEstimator::Cvar(l) => write!(f, "Cvar(alpha = {})", l.alpha()),
            AttributeEstimator::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl AttributeEstimator {
    fn estimate(&self, buffer: &SampleBuffer) -> Result<f64, EstimatorError> {
        match self {
            AttributeEstimator::Mean => buffer.mean(),
            AttributeEstimator::Cvar(level) => empirical_cvar(buffer, *level),
            AttributeEstimator::Custom(f) => f(buffer),
        }
    }
}

/// One Con-LCB constraint: `g_i(k) <= threshold` enforced through the width
/// `sqrt(log(2 T^2)/(rate * N_k))` on the estimator's coordinate projection.
#[derive(Debug, Clone)]
pub struct ConstraintDef {
    pub estimator: AttributeEstimator,
    pub threshold: f64,
    pub rate: f64,
    pub coord: usize,
}

#[derive(Debug, Clone)]
pub struct RcLcbParams {
    pub tau: f64,
    pub level: RiskLevel,
    pub sg: SubGaussianParams,
    /// Use `log(2 D K T^2)` instead of `log(2 D T^2)` inside the CVaR width
    /// (proof-text variant, off by default).
    pub k_inflated: bool,
}

#[derive(Debug, Clone)]
pub struct RclcbHtParams {
    pub tau: f64,
    pub level: RiskLevel,
    pub mp: MomentParams,
}

#[derive(Debug, Clone)]
pub struct ConLcbParams {
    /// Objective attribute g_0 (mean by default) with its own rate a_0.
    pub objective: AttributeEstimator,
    pub objective_rate: f64,
    pub objective_coord: usize,
    /// Constraints in increasing order of importance (the last is dropped
    /// last when no arm satisfies them all).
    pub constraints: Vec<ConstraintDef>,
    /// Dimension of each per-pull draw.
    pub dim: usize,
}

#[derive(Debug, Clone)]
pub enum PolicyConfig {
    RcLcb(RcLcbParams),
    RclcbHt(RclcbHtParams),
    ConLcb(ConLcbParams),
    BaselineLcb { sigma: f64 },
    BaselineCvarLcb { level: RiskLevel, sg: SubGaussianParams },
}

impl PolicyConfig {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyConfig::RcLcb(_) => "rc_lcb",
            PolicyConfig::RclcbHt(_) => "rclcb_ht",
            PolicyConfig::ConLcb(_) => "con_lcb",
            PolicyConfig::BaselineLcb { .. } => "baseline_lcb",
            PolicyConfig::BaselineCvarLcb { .. } => "baseline_cvar_lcb",
        }
    }

    /// Dimension of the per-pull draw this policy consumes.
    pub fn draw_dim(&self) -> usize {
        match self {
            PolicyConfig::ConLcb(p) => p.dim,
            _ => 1,
        }
    }
}

/// Per-arm statistics cached against the pull count they were computed from.
#[derive(Debug, Clone)]
struct StatCache {
    count: usize,
    /// Objective statistic (empirical/truncated mean, or g_0 for Con-LCB).
    objective: f64,
    /// Risk statistics: `[cvar]` for the scalar policies, `[g_1..g_m]` for
    /// Con-LCB.
    risk: Vec<f64>,
}

/// Sequential policy state: per-arm buffers, pull counts, round counter, and
/// the most recent plausibly feasible set. Single-threaded by construction;
/// distinct episodes use distinct states.
#[derive(Debug, Clone)]
pub struct PolicyState {
    config: PolicyConfig,
    num_arms: usize,
    horizon: usize,
    /// `buffers[arm][coord]`.
    buffers: Vec<Vec<SampleBuffer>>,
    pulls: Vec<usize>,
    round: usize,
    pending: Option<usize>,
    last_feasible_set: Vec<usize>,
    caches: Vec<Option<StatCache>>,
    /// Incremental TEA accumulator per arm (heavy-tailed policy): running sum
    /// of samples whose magnitude did not exceed their arrival-indexed level.
    trunc_sums: Vec<f64>,
}

impl PolicyState {
    pub fn new(config: PolicyConfig, num_arms: usize, horizon: usize) -> Result<Self, PolicyError> {
        if num_arms == 0 {
            return Err(PolicyError::BadConfig("at least one arm required".into()));
        }
        if horizon == 0 {
            return Err(PolicyError::BadConfig("horizon must be positive".into()));
        }
        match &config {
            PolicyConfig::RcLcb(p) => {
                p.sg.validate()?;
            }
            PolicyConfig::RclcbHt(p) => {
                p.mp.validate()?;
                if p.level.beta() > 0.5 {
                    return Err(PolicyError::BadConfig(format!(
                        "heavy-tailed schedule requires alpha > 0.5 (beta <= 0.5), got alpha = {}",
                        p.level.alpha()
                    )));
                }
            }
            PolicyConfig::ConLcb(p) => {
                if p.constraints.is_empty() {
                    return Err(PolicyError::BadConfig(
                        "con_lcb requires at least one constraint".into(),
                    ));
                }
                if !(p.objective_rate > 0.0) {
                    return Err(PolicyError::BadConfig(format!(
                        "objective rate a_0 must be > 0, got {}",
                        p.objective_rate
                    )));
                }
                if p.dim == 0 {
                    return Err(PolicyError::BadConfig("draw dimension must be >= 1".into()));
                }
                if p.objective_coord >= p.dim {
                    return Err(PolicyError::BadConfig(format!(
                        "objective coord {} out of range for dim {}",
                        p.objective_coord, p.dim
                    )));
                }
                for (i, c) in p.constraints.iter().enumerate() {
                    if !(c.rate > 0.0) {
                        return Err(PolicyError::BadConfig(format!(
                            "constraint {} rate must be > 0, got {}",
                            i + 1,
                            c.rate
                        )));
                    }
                    if c.coord >= p.dim {
                        return Err(PolicyError::BadConfig(format!(
                            "constraint {} coord {} out of range for dim {}",
                            i + 1,
                            c.coord,
                            p.dim
                        )));
                    }
                }
            }
            PolicyConfig::BaselineLcb { sigma } => {
                if !(*sigma > 0.0) {
                    return Err(PolicyError::BadConfig(format!(
                        "baseline sigma must be > 0, got {sigma}"
                    )));
                }
            }
            PolicyConfig::BaselineCvarLcb { sg, .. } => {
                sg.validate()?;
            }
        }
        let dim = config.draw_dim();
        Ok(Self {
            config,
            num_arms,
            horizon,
            buffers: vec![vec![SampleBuffer::new(); dim]; num_arms],
            pulls: vec![0; num_arms],
            round: 0,
            pending: None,
            last_feasible_set: Vec::new(),
            caches: vec![None; num_arms],
            trunc_sums: vec![0.0; num_arms],
        })
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    pub fn pulls(&self) -> &[usize] {
        &self.pulls
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    /// Most recent plausibly feasible set computed by `select`.
    pub fn last_feasible_set(&self) -> &[usize] {
        &self.last_feasible_set
    }

    /// Chooses the arm for the current round. Rounds `1..=K` are round-robin
    /// initialization; later rounds dispatch to the configured rule.
    pub fn select(&mut self) -> Result<usize, PolicyError> {
        if self.pending.is_some() {
            return Err(PolicyError::ProtocolViolation(
                "select called twice without observe".into(),
            ));
        }
        if self.round >= self.horizon {
            return Err(PolicyError::HorizonExhausted {
                round: self.round,
                horizon: self.horizon,
            });
        }
        let arm = if self.round < self.num_arms {
            self.round
        } else {
            self.refresh_all()?;
            let (arm, set) = match &self.config {
                PolicyConfig::RcLcb(_) | PolicyConfig::RclcbHt(_) => {
                    let set = self.compute_feasible_set()?;
                    let arm = if set.is_empty() {
                        // Risk-averse fallback: minimize the CVaR LCB over
                        // all arms.
                        self.argmin(&(0..self.num_arms).collect::<Vec<_>>(), |s, k| {
                            s.risk_stat(k) - s.risk_width(k)
                        })
                    } else {
                        self.argmin(&set, |s, k| s.objective_stat(k) - s.objective_width(k))
                    };
                    (arm, Some(set))
                }
                PolicyConfig::ConLcb(params) => {
                    let m = params.constraints.len();
                    let per_constraint = self.con_lcb_sets(params);
                    let intersection: Vec<usize> = (0..self.num_arms)
                        .filter(|&k| per_constraint.iter().all(|s| s.contains(&k)))
                        .collect();
                    let arm = if intersection.is_empty() {
                        // Relaxation cascade: smallest i whose suffix
                        // {i+1..m} still admits an arm; minimize the LCB of
                        // attribute i over that suffix set.
                        let mut chosen = None;
                        for i in 1..=m {
                            let suffix: Vec<usize> = (0..self.num_arms)
                                .filter(|&k| {
                                    per_constraint[i..].iter().all(|s| s.contains(&k))
                                })
                                .collect();
                            if !suffix.is_empty() {
                                chosen = Some((i, suffix));
                                break;
                            }
                        }
                        let (i_star, candidates) =
                            chosen.expect("suffix of zero constraints is all arms");
                        let c = &params.constraints[i_star - 1];
                        let rate = c.rate;
                        self.argmin(&candidates, |s, k| {
                            s.cache(k).risk[i_star - 1] - con_width(s.pulls[k], rate, s.horizon)
                        })
                    } else {
                        let rate = params.objective_rate;
                        self.argmin(&intersection, |s, k| {
                            s.cache(k).objective - con_width(s.pulls[k], rate, s.horizon)
                        })
                    };
                    (arm, Some(intersection))
                }
                PolicyConfig::BaselineLcb { .. } => (
                    self.argmin(&(0..self.num_arms).collect::<Vec<_>>(), |s, k| {
                        s.objective_stat(k) - s.objective_width(k)
                    }),
                    None,
                ),
                PolicyConfig::BaselineCvarLcb { .. } => (
                    self.argmin(&(0..self.num_arms).collect::<Vec<_>>(), |s, k| {
                        s.risk_stat(k) - s.risk_width(k)
                    }),
                    None,
                ),
            };
            if let Some(set) = set {
                self.last_feasible_set = set;
            }
            arm
        };
        self.pending = Some(arm);
        Ok(arm)
    }

    /// Records the drawn sample for the arm returned by the matching
    /// `select`, advancing the round.
    pub fn observe(&mut self, arm: usize, sample: &[f64]) -> Result<(), PolicyError> {
        match self.pending {
            Some(expected) if expected == arm => {}
            Some(expected) => {
                return Err(PolicyError::ProtocolViolation(format!(
                    "observe for arm {arm} but select returned {expected}"
                )))
            }
            None => {
                return Err(PolicyError::ProtocolViolation(
                    "observe called without a preceding select".into(),
                ))
            }
        }
        let dim = self.config.draw_dim();
        if sample.len() != dim {
            return Err(PolicyError::ProtocolViolation(format!(
                "sample dimension {} does not match policy dimension {dim}",
                sample.len()
            )));
        }
        if let PolicyConfig::RclcbHt(params) = &self.config {
            // The i-th arrival's truncation level depends only on i, so the
            // truncated mean accumulates incrementally at push time.
            let i = self.buffers[arm][0].len() + 1;
            let level = crate::risk_core::mean_trunc_level(i, &params.mp, self.delta());
            if sample[0].abs() <= level {
                self.trunc_sums[arm] += sample[0];
            }
        }
        for (coord, &value) in sample.iter().enumerate() {
            self.buffers[arm][coord].push(value);
        }
        self.pulls[arm] += 1;
        self.round += 1;
        self.pending = None;
        Ok(())
    }

    /// The current plausibly feasible set (risk policies only).
    pub fn plausibly_feasible_set(&mut self) -> Result<Vec<usize>, PolicyError> {
        self.refresh_all()?;
        match &self.config {
            PolicyConfig::RcLcb(_) | PolicyConfig::RclcbHt(_) => self.compute_feasible_set(),
            PolicyConfig::ConLcb(params) => {
                let params = params.clone();
                let per_constraint = self.con_lcb_sets(&params);
                Ok((0..self.num_arms)
                    .filter(|&k| per_constraint.iter().all(|s| s.contains(&k)))
                    .collect())
            }
            _ => Err(PolicyError::NotApplicable(format!(
                "{} maintains no plausibly feasible set",
                self.config.name()
            ))),
        }
    }

    /// Feasibility verdict from the final pull counts: `Some(true)` iff the
    /// plausibly feasible set is nonempty after the last pull. Baselines
    /// carry no verdict (`None`).
    pub fn feasibility_flag(&mut self) -> Result<Option<bool>, PolicyError> {
        if self.round < self.horizon {
            return Err(PolicyError::FlagBeforeHorizon {
                round: self.round,
                horizon: self.horizon,
            });
        }
        match &self.config {
            PolicyConfig::BaselineLcb { .. } | PolicyConfig::BaselineCvarLcb { .. } => Ok(None),
            _ => Ok(Some(!self.plausibly_feasible_set()?.is_empty())),
        }
    }

    fn delta(&self) -> f64 {
        let t = self.horizon as f64;
        1.0 / (t * t)
    }

    /// Lowest-index argmin of `score` over `candidates` (assumed sorted).
    fn argmin(&self, candidates: &[usize], score: impl Fn(&Self, usize) -> f64) -> usize {
        let mut best = candidates[0];
        let mut best_score = score(self, best);
        for &k in &candidates[1..] {
            let s = score(self, k);
            if s < best_score {
                best = k;
                best_score = s;
            }
        }
        best
    }

    fn cache(&self, k: usize) -> &StatCache {
        self.caches[k].as_ref().expect("refreshed")
    }

    fn objective_stat(&self, k: usize) -> f64 {
        self.cache(k).objective
    }

    fn risk_stat(&self, k: usize) -> f64 {
        self.cache(k).risk[0]
    }

    fn objective_width(&self, k: usize) -> f64 {
        let n = self.pulls[k];
        match &self.config {
            PolicyConfig::RcLcb(p) => mean_width_subgauss(n, p.sg.sigma, self.horizon),
            PolicyConfig::RclcbHt(p) => mean_width_ht(n, &p.mp, self.horizon),
            PolicyConfig::BaselineLcb { sigma } => mean_width_subgauss(n, *sigma, self.horizon),
            _ => unreachable!("objective width undefined for {}", self.config.name()),
        }
    }

    fn risk_width(&self, k: usize) -> f64 {
        let n = self.pulls[k];
        match &self.config {
            PolicyConfig::RcLcb(p) => {
                if p.k_inflated {
                    let t = self.horizon as f64;
                    let log_term = (2.0 * p.sg.d_big * self.num_arms as f64 * t * t).ln();
                    (log_term / (n as f64 * p.sg.d_small)).sqrt() / p.level.beta()
                } else {
                    cvar_width_subgauss(n, p.level, &p.sg, self.horizon)
                }
            }
            PolicyConfig::RclcbHt(p) => {
                cvar_width_ht(n, p.level, &p.mp, self.horizon).expect("validated at construction")
            }
            PolicyConfig::BaselineCvarLcb { level, sg } => {
                cvar_width_subgauss(n, *level, sg, self.horizon)
            }
            _ => unreachable!("risk width undefined for {}", self.config.name()),
        }
    }

    /// Recomputes any stale per-arm statistic caches. Only the most recently
    /// pulled arm is stale in steady state, so each round costs one
    /// estimator evaluation.
    fn refresh_all(&mut self) -> Result<(), PolicyError> {
        for k in 0..self.num_arms {
            if self.pulls[k] == 0 {
                return Err(PolicyError::InitializationIncomplete(k));
            }
            if self.caches[k].as_ref().map(|c| c.count) == Some(self.pulls[k]) {
                continue;
            }
            let n = self.pulls[k];
            let cache = match &self.config {
                PolicyConfig::RcLcb(p) => StatCache {
                    count: n,
                    objective: self.buffers[k][0].mean()?,
                    risk: vec![empirical_cvar(&self.buffers[k][0], p.level)?],
                },
                PolicyConfig::RclcbHt(p) => {
                    let b_c = cvar_trunc_level(n, p.level, &p.mp, self.delta())?;
                    StatCache {
                        count: n,
                        objective: self.trunc_sums[k] / n as f64,
                        risk: vec![truncated_cvar(&self.buffers[k][0], p.level, b_c)?],
                    }
                }
                PolicyConfig::ConLcb(p) => {
                    let objective = p.objective.estimate(&self.buffers[k][p.objective_coord])?;
                    let risk = p
                        .constraints
                        .iter()
                        .map(|c| c.estimator.estimate(&self.buffers[k][c.coord]))
                        .collect::<Result<Vec<f64>, _>>()?;
                    StatCache { count: n, objective, risk }
                }
                PolicyConfig::BaselineLcb { .. } => StatCache {
                    count: n,
                    objective: self.buffers[k][0].mean()?,
                    risk: vec![f64::NAN],
                },
                PolicyConfig::BaselineCvarLcb { level, .. } => StatCache {
                    count: n,
                    objective: f64::NAN,
                    risk: vec![empirical_cvar(&self.buffers[k][0], *level)?],
                },
            };
            self.caches[k] = Some(cache);
        }
        Ok(())
    }

    /// `{k : risk_stat(k) <= tau + risk_width(k)}` for the scalar risk
    /// policies. Caches must be fresh.
    fn compute_feasible_set(&self) -> Result<Vec<usize>, PolicyError> {
        let tau = match &self.config {
            PolicyConfig::RcLcb(p) => p.tau,
            PolicyConfig::RclcbHt(p) => p.tau,
            _ => {
                return Err(PolicyError::NotApplicable(format!(
                    "{} maintains no plausibly feasible set",
                    self.config.name()
                )))
            }
        };
        Ok((0..self.num_arms)
            .filter(|&k| self.risk_stat(k) <= tau + self.risk_width(k))
            .collect())
    }

    /// Per-constraint plausibly feasible sets (Con-LCB). Caches must be fresh.
    fn con_lcb_sets(&self, params: &ConLcbParams) -> Vec<Vec<usize>> {
        params
            .constraints
            .iter()
            .enumerate()
            .map(|(i, c)| {
                (0..self.num_arms)
                    .filter(|&k| {
                        self.cache(k).risk[i]
                            <= c.threshold + con_width(self.pulls[k], c.rate, self.horizon)
                    })
                    .collect()
            })
            .collect()
    }
}

/// Con-LCB attribute width `sqrt(log(2 T^2)/(a_i n))`.
pub fn con_width(n: usize, rate: f64, horizon: usize) -> f64 {
    let t = horizon as f64;
    ((2.0 * t * t).ln() / (rate * n as f64)).sqrt()
}
