//! Risk-constrained multi-armed bandit laboratory.
//!
//! The library implements the full pipeline for studying bandit problems where
//! the learner minimizes mean loss subject to a tail-risk constraint
//! `CVaR_alpha(k) <= tau`:
//!
//! * [`risk_core`] — empirical and truncated VaR/CVaR estimators, truncation
//!   schedules for heavy-tailed losses, and every confidence-width sequence the
//!   policies consume.
//! * [`instances`] — parametric arm models with exact mean/CVaR oracles,
//!   ground-truth instance classification (feasible / deceiver / optimal sets
//!   and all gaps), and the theorem-bound calculator.
//! * [`policies`] — the risk-constrained LCB policy, its heavy-tailed variant,
//!   a generic multi-constraint LCB policy, and two unconstrained baselines,
//!   all behind a uniform select/observe/flag contract.
//! * [`simulator`] — deterministic episode execution, pseudo-regret
//!   accounting, parallel Monte-Carlo aggregation, and bound comparison.
//! * [`lower_bounds`] — KL-based information-theoretic per-arm pull lower
//!   bounds for Gaussian arm classes.
//! * [`cli`] — config parsing, experiment orchestration, and deterministic
//!   CSV/JSON emission for the `riskbandit` binary.

pub mod cli;
pub mod instances;
pub mod lower_bounds;
pub mod policies;
pub mod risk_core;
pub mod simulator;
