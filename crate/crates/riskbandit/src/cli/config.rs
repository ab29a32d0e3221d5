//! Experiment configuration: strict TOML schema, exhaustive validation, and
//! resolution into library types.
//!
//! Parsing is strict (`deny_unknown_fields` everywhere — a misspelled key is
//! an error), and semantic validation collects *all* problems with
//! path-qualified messages instead of stopping at the first.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::instances::{ArmModel, AttributeConstraint, AttributeKind, InstanceSpec};
use crate::policies::{
    AttributeEstimator, ConLcbParams, ConstraintDef, PolicyConfig, RcLcbParams, RclcbHtParams,
};
use crate::risk_core::{MomentParams, RiskLevel, SubGaussianParams};

/// Raw arm block: a flat union of every kind's parameters so unknown keys are
/// rejected while kind-specific requirements produce precise messages.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmConfig {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shape: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shift: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintConfig {
    /// "mean" or "cvar".
    pub estimator: String,
    /// Risk level for "cvar" estimators.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub threshold: f64,
    pub rate: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub coord: usize,
}

fn is_zero(v: &usize) -> bool {
    *v == 0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    pub level: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    pub arms: Vec<ArmConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constraints: Option<Vec<ConstraintConfig>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    /// rc_lcb | rclcb_ht | con_lcb | baseline_lcb | baseline_cvar_lcb.
    pub name: String,
    /// Risk threshold; defaults to the instance tau.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    /// Sub-Gaussian proxy (rc_lcb, baselines).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Concentration constants; default D = 2 and the calibrated d = 8/sigma^2.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_big: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_small: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub k_inflated: bool,
    /// Heavy-tail moment order / bound (rclcb_ht).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_bound: Option<f64>,
    /// Con-LCB objective: "mean" (default) or "cvar".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective_alpha: Option<f64>,
    /// Con-LCB objective rate a_0.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective_rate: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizons: Option<Vec<usize>>,
    pub reps: usize,
    pub base_seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    #[serde(default = "default_true")]
    pub csv: bool,
    #[serde(default = "default_true")]
    pub summary: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    /// Compare empirical pulls against theorem right-hand sides.
    #[serde(default)]
    pub bounds: bool,
    /// Report information-theoretic lower-bound reference lines (Gaussian
    /// single-constraint instances only).
    #[serde(default)]
    pub lower_bounds: bool,
    /// Tradeoff mode: also run the companion infeasible instance across the
    /// horizon list.
    #[serde(default)]
    pub tradeoff: bool,
    /// Arms of the companion infeasible instance (same level/tau as the main
    /// instance).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tradeoff_arms: Option<Vec<ArmConfig>>,
}

/// The full declarative experiment document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceConfig,
    pub policy: PolicySection,
    pub run: RunSection,
    pub output: OutputSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
}

/// A fully validated experiment ready for execution.
#[derive(Debug, Clone)]
pub struct ResolvedExperiment {
    pub instance: InstanceSpec,
    pub policy: PolicyConfig,
    pub horizons: Vec<usize>,
    pub reps: usize,
    pub base_seed: u64,
    pub out_dir: PathBuf,
    pub emit_csv: bool,
    pub emit_summary: bool,
    pub analysis_bounds: bool,
    pub analysis_lower_bounds: bool,
    /// Companion infeasible instance for tradeoff mode.
    pub tradeoff_instance: Option<InstanceSpec>,
    /// Canonical echo of the parsed config for the summary document.
    pub config_echo: ExperimentConfig,
}

/// Parses the TOML text into the raw schema, rejecting unknown keys.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, Vec<String>> {
    toml::from_str::<ExperimentConfig>(text).map_err(|e| vec![format!("config: {e}")])
}

/// Parses and fully validates, returning either a runnable experiment or the
/// complete list of path-qualified validation errors.
pub fn resolve_config(text: &str) -> Result<ResolvedExperiment, Vec<String>> {
    let cfg = parse_config(text)?;
    resolve(cfg)
}

fn arm_from_config(path: &str, arm: &ArmConfig, errors: &mut Vec<String>) -> Option<ArmModel> {
    let mut require = |field: &str, v: Option<f64>| -> Option<f64> {
        if v.is_none() {
            errors.push(format!("{path}.{field}: required for kind \"{}\"", arm.kind));
        }
        v
    };
    let mut used: Vec<&str> = vec!["kind"];
    let model = match arm.kind.as_str() {
        "constant" => {
            used.push("value");
            Some(ArmModel::Constant { value: require("value", arm.value)? })
        }
        "gaussian" => {
            used.extend(["mu", "sigma"]);
            let mu = require("mu", arm.mu);
            let sigma = require("sigma", arm.sigma);
            Some(ArmModel::Gaussian { mu: mu?, sigma: sigma? })
        }
        "uniform" => {
            used.extend(["lo", "hi"]);
            let lo = require("lo", arm.lo);
            let hi = require("hi", arm.hi);
            Some(ArmModel::Uniform { lo: lo?, hi: hi? })
        }
        "shifted_pareto" => {
            used.extend(["shape", "scale", "shift"]);
            let shape = require("shape", arm.shape);
            let scale = require("scale", arm.scale);
            let shift = require("shift", arm.shift);
            Some(ArmModel::ShiftedPareto { shape: shape?, scale: scale?, shift: shift? })
        }
        "discrete" => {
            used.extend(["values", "probs"]);
            match (&arm.values, &arm.probs) {
                (Some(values), Some(probs)) => Some(ArmModel::Discrete {
                    values: values.clone(),
                    probs: probs.clone(),
                }),
                _ => {
                    errors.push(format!(
                        "{path}: kind \"discrete\" requires both values and probs"
                    ));
                    None
                }
            }
        }
        other => {
            errors.push(format!(
                "{path}.kind: unknown arm kind \"{other}\" (expected constant | gaussian | \
                 uniform | shifted_pareto | discrete)"
            ));
            None
        }
    };
    // Reject parameters that do not belong to the declared kind.
    let extraneous: [(&str, bool); 10] = [
        ("value", arm.value.is_some()),
        ("mu", arm.mu.is_some()),
        ("sigma", arm.sigma.is_some()),
        ("lo", arm.lo.is_some()),
        ("hi", arm.hi.is_some()),
        ("shape", arm.shape.is_some()),
        ("scale", arm.scale.is_some()),
        ("shift", arm.shift.is_some()),
        ("values", arm.values.is_some()),
        ("probs", arm.probs.is_some()),
    ];
    for (field, present) in extraneous {
        if present && !used.contains(&field) {
            errors.push(format!(
                "{path}.{field}: not a parameter of kind \"{}\"",
                arm.kind
            ));
        }
    }
    let model = model?;
    if let Err(e) = model.validate() {
        errors.push(format!("{path}: {e}"));
        return None;
    }
    Some(model)
}

fn level_from(path: &str, alpha: f64, errors: &mut Vec<String>) -> Option<RiskLevel> {
    match RiskLevel::new(alpha) {
        Ok(l) => Some(l),
        Err(e) => {
            errors.push(format!("{path}: {e}"));
            None
        }
    }
}

fn constraint_from_config(
    path: &str,
    c: &ConstraintConfig,
    errors: &mut Vec<String>,
) -> Option<AttributeConstraint> {
    let estimator = match c.estimator.as_str() {
        "mean" => {
            if c.alpha.is_some() {
                errors.push(format!("{path}.alpha: not a parameter of the mean estimator"));
            }
            Some(AttributeKind::Mean)
        }
        "cvar" => match c.alpha {
            Some(a) => level_from(&format!("{path}.alpha"), a, errors)
                .map(|alpha| AttributeKind::Cvar { alpha }),
            None => {
                errors.push(format!("{path}.alpha: required for the cvar estimator"));
                None
            }
        },
        other => {
            errors.push(format!(
                "{path}.estimator: unknown estimator \"{other}\" (expected mean | cvar)"
            ));
            None
        }
    };
    if !(c.rate > 0.0) {
        errors.push(format!("{path}.rate: must be > 0, got {}", c.rate));
        return None;
    }
    Some(AttributeConstraint {
        estimator: estimator?,
        threshold: c.threshold,
        rate: c.rate,
        coord: c.coord,
    })
}

fn resolve_policy(
    cfg: &ExperimentConfig,
    instance: Option<&InstanceSpec>,
    errors: &mut Vec<String>,
) -> Option<PolicyConfig> {
    let p = &cfg.policy;
    let level = level_from("instance.level", cfg.instance.level, errors)?;
    let tau = p.tau.or(cfg.instance.tau);
    let known_scalar = ["tau", "sigma", "d_big", "d_small"];
    let reject = |errors: &mut Vec<String>, field: &str, present: bool| {
        if present {
            errors.push(format!(
                "policy.{field}: not a parameter of policy \"{}\"",
                p.name
            ));
        }
    };
    // Sub-Gaussian constants shared by rc_lcb / baseline_cvar_lcb.
    let sg = |errors: &mut Vec<String>| -> Option<SubGaussianParams> {
        let sigma = match p.sigma {
            Some(s) => s,
            None => {
                errors.push("policy.sigma: required".into());
                return None;
            }
        };
        let d_big = p.d_big.unwrap_or(2.0);
        let base = SubGaussianParams::calibrated(sigma.max(f64::MIN_POSITIVE));
        let d_small = p.d_small.unwrap_or(base.d_small);
        match SubGaussianParams::new(sigma, d_big, d_small) {
            Ok(sg) => Some(sg),
            Err(e) => {
                errors.push(format!("policy: {e}"));
                None
            }
        }
    };
    let need_tau = |errors: &mut Vec<String>| -> Option<f64> {
        if tau.is_none() {
            errors.push("policy.tau: required (no instance.tau to inherit)".into());
        }
        tau
    };
    let _ = known_scalar;
    match p.name.as_str() {
        "rc_lcb" => {
            reject(errors, "p", p.p.is_some());
            reject(errors, "b_bound", p.b_bound.is_some());
            reject(errors, "objective", p.objective.is_some());
            reject(errors, "objective_rate", p.objective_rate.is_some());
            let tau = need_tau(errors);
            let sg = sg(errors);
            Some(PolicyConfig::RcLcb(RcLcbParams {
                tau: tau?,
                level,
                sg: sg?,
                k_inflated: p.k_inflated,
            }))
        }
        "rclcb_ht" => {
            reject(errors, "sigma", p.sigma.is_some());
            reject(errors, "d_big", p.d_big.is_some());
            reject(errors, "d_small", p.d_small.is_some());
            reject(errors, "objective", p.objective.is_some());
            reject(errors, "objective_rate", p.objective_rate.is_some());
            let tau = need_tau(errors);
            let mp = match (p.p, p.b_bound) {
                (Some(order), Some(b)) => {
                    if !(order > 1.0 && order <= 2.0) {
                        errors.push(format!("policy.p: p must be in (1, 2], got {order}"));
                        None
                    } else {
                        match MomentParams::new(order, b) {
                            Ok(mp) => Some(mp),
                            Err(e) => {
                                errors.push(format!("policy: {e}"));
                                None
                            }
                        }
                    }
                }
                (order, b) => {
                    if order.is_none() {
                        errors.push("policy.p: required for rclcb_ht".into());
                    }
                    if b.is_none() {
                        errors.push("policy.b_bound: required for rclcb_ht".into());
                    }
                    None
                }
            };
            if level.beta() > 0.5 {
                errors.push(format!(
                    "instance.level: rclcb_ht requires alpha > 0.5, got {}",
                    level.alpha()
                ));
                return None;
            }
            Some(PolicyConfig::RclcbHt(RclcbHtParams { tau: tau?, level, mp: mp? }))
        }
        "con_lcb" => {
            reject(errors, "tau", p.tau.is_some());
            reject(errors, "sigma", p.sigma.is_some());
            reject(errors, "p", p.p.is_some());
            reject(errors, "b_bound", p.b_bound.is_some());
            let constraints = match instance.and_then(|i| i.constraints.as_ref()) {
                Some(cs) => cs,
                None => {
                    errors.push(
                        "instance.constraints: required for the con_lcb policy".into(),
                    );
                    return None;
                }
            };
            let objective = match p.objective.as_deref().unwrap_or("mean") {
                "mean" => {
                    if p.objective_alpha.is_some() {
                        errors.push(
                            "policy.objective_alpha: not a parameter of the mean objective"
                                .into(),
                        );
                    }
                    Some(AttributeEstimator::Mean)
                }
                "cvar" => match p.objective_alpha {
                    Some(a) => level_from("policy.objective_alpha", a, errors)
                        .map(AttributeEstimator::Cvar),
                    None => {
                        errors.push(
                            "policy.objective_alpha: required for the cvar objective".into(),
                        );
                        None
                    }
                },
                other => {
                    errors.push(format!(
                        "policy.objective: unknown objective \"{other}\" (expected mean | cvar)"
                    ));
                    None
                }
            };
            let rate = match p.objective_rate {
                Some(r) if r > 0.0 => Some(r),
                Some(r) => {
                    errors.push(format!("policy.objective_rate: must be > 0, got {r}"));
                    None
                }
                None => {
                    errors.push("policy.objective_rate: required for con_lcb".into());
                    None
                }
            };
            let defs: Vec<ConstraintDef> = constraints
                .iter()
                .map(|c| ConstraintDef {
                    estimator: match c.estimator {
                        AttributeKind::Mean => AttributeEstimator::Mean,
                        AttributeKind::Cvar { alpha } => AttributeEstimator::Cvar(alpha),
                    },
                    threshold: c.threshold,
                    rate: c.rate,
                    coord: c.coord,
                })
                .collect();
            Some(PolicyConfig::ConLcb(ConLcbParams {
                objective: objective?,
                objective_rate: rate?,
                objective_coord: 0,
                constraints: defs,
                dim: 1,
            }))
        }
        "baseline_lcb" => {
            reject(errors, "tau", p.tau.is_some());
            reject(errors, "d_big", p.d_big.is_some());
            reject(errors, "d_small", p.d_small.is_some());
            reject(errors, "p", p.p.is_some());
            reject(errors, "b_bound", p.b_bound.is_some());
            match p.sigma {
                Some(s) if s > 0.0 => Some(PolicyConfig::BaselineLcb { sigma: s }),
                Some(s) => {
                    errors.push(format!("policy.sigma: must be > 0, got {s}"));
                    None
                }
                None => {
                    errors.push("policy.sigma: required".into());
                    None
                }
            }
        }
        "baseline_cvar_lcb" => {
            reject(errors, "tau", p.tau.is_some());
            reject(errors, "p", p.p.is_some());
            reject(errors, "b_bound", p.b_bound.is_some());
            let sg = sg(errors);
            Some(PolicyConfig::BaselineCvarLcb { level, sg: sg? })
        }
        other => {
            errors.push(format!(
                "policy.name: unknown policy \"{other}\" (expected rc_lcb | rclcb_ht | con_lcb \
                 | baseline_lcb | baseline_cvar_lcb)"
            ));
            None
        }
    }
}

/// Validates a parsed config, collecting all errors.
pub fn resolve(cfg: ExperimentConfig) -> Result<ResolvedExperiment, Vec<String>> {
    let mut errors = Vec::new();

    // Instance.
    let level = level_from("instance.level", cfg.instance.level, &mut errors);
    let mut arms = Vec::new();
    let mut arms_ok = true;
    if cfg.instance.arms.is_empty() {
        errors.push("instance.arms: at least one arm required".into());
        arms_ok = false;
    }
    for (i, arm) in cfg.instance.arms.iter().enumerate() {
        match arm_from_config(&format!("instance.arms[{i}]"), arm, &mut errors) {
            Some(m) => arms.push(m),
            None => arms_ok = false,
        }
    }
    let constraints: Option<Vec<AttributeConstraint>> = match &cfg.instance.constraints {
        None => None,
        Some(cs) => {
            let mut out = Vec::new();
            let mut ok = true;
            for (i, c) in cs.iter().enumerate() {
                match constraint_from_config(
                    &format!("instance.constraints[{i}]"),
                    c,
                    &mut errors,
                ) {
                    Some(ac) => out.push(ac),
                    None => ok = false,
                }
            }
            if cs.is_empty() {
                errors.push("instance.constraints: must be nonempty when present".into());
                ok = false;
            }
            ok.then_some(out)
        }
    };
    if cfg.instance.tau.is_some() && cfg.instance.constraints.is_some() {
        errors.push(
            "instance: choose single-constraint (tau) or multi-constraint (constraints) mode, \
             not both"
                .into(),
        );
    }
    if cfg.instance.tau.is_none() && cfg.instance.constraints.is_none() {
        errors.push("instance: either tau or a constraints list is required".into());
    }

    let instance = if arms_ok && !arms.is_empty() {
        level.map(|level| InstanceSpec {
            arms: arms.clone(),
            level,
            tau: cfg.instance.tau,
            constraints: constraints.clone(),
        })
    } else {
        None
    };
    if let Some(spec) = &instance {
        if let Err(e) = spec.validate() {
            // Mode errors are reported above; surface anything else.
            let msg = format!("instance: {e}");
            if !errors.iter().any(|m| m.starts_with("instance:")) {
                errors.push(msg);
            }
        }
    }

    // Policy.
    let policy = resolve_policy(&cfg, instance.as_ref(), &mut errors);

    // Run section.
    let horizons: Vec<usize> = match (&cfg.run.horizon, &cfg.run.horizons) {
        (Some(_), Some(_)) => {
            errors.push("run: specify horizon or horizons, not both".into());
            Vec::new()
        }
        (Some(t), None) => vec![*t],
        (None, Some(ts)) if !ts.is_empty() => ts.clone(),
        _ => {
            errors.push("run.horizon: required (or a nonempty run.horizons list)".into());
            Vec::new()
        }
    };
    let k_arms = cfg.instance.arms.len();
    for &t in &horizons {
        if t < k_arms {
            errors.push(format!(
                "run.horizon: T = {t} is shorter than the arm count K = {k_arms}"
            ));
        }
    }
    if cfg.run.reps == 0 {
        errors.push("run.reps: must be >= 1".into());
    }

    // Analysis section.
    let mut tradeoff_instance = None;
    if cfg.analysis.tradeoff {
        match (&cfg.analysis.tradeoff_arms, &instance) {
            (Some(raw), Some(spec)) => {
                let mut t_arms = Vec::new();
                let mut ok = true;
                for (i, arm) in raw.iter().enumerate() {
                    match arm_from_config(
                        &format!("analysis.tradeoff_arms[{i}]"),
                        arm,
                        &mut errors,
                    ) {
                        Some(m) => t_arms.push(m),
                        None => ok = false,
                    }
                }
                if raw.len() != k_arms {
                    errors.push(format!(
                        "analysis.tradeoff_arms: must match the instance arm count {k_arms}"
                    ));
                    ok = false;
                }
                if ok {
                    tradeoff_instance = Some(InstanceSpec {
                        arms: t_arms,
                        level: spec.level,
                        tau: spec.tau,
                        constraints: None,
                    });
                }
            }
            (None, _) => {
                errors.push("analysis.tradeoff_arms: required in tradeoff mode".into());
            }
            _ => {}
        }
    } else if cfg.analysis.tradeoff_arms.is_some() {
        errors.push("analysis.tradeoff_arms: only meaningful with analysis.tradeoff = true".into());
    }

    if !errors.is_empty() {
        return Err(errors);
    }
    Ok(ResolvedExperiment {
        instance: instance.expect("validated"),
        policy: policy.expect("validated"),
        horizons,
        reps: cfg.run.reps,
        base_seed: cfg.run.base_seed,
        out_dir: cfg.output.dir.clone(),
        emit_csv: cfg.output.csv,
        emit_summary: cfg.output.summary,
        analysis_bounds: cfg.analysis.bounds,
        analysis_lower_bounds: cfg.analysis.lower_bounds,
        tradeoff_instance,
        config_echo: cfg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = r#"
[instance]
level = 0.95
tau = 100.0

[[instance.arms]]
kind = "constant"
value = 0.0

[[instance.arms]]
kind = "constant"
value = 1.0

[policy]
name = "rc_lcb"
sigma = 1.0

[run]
horizon = 100
reps = 1
base_seed = 7

[output]
dir = "out"
"#;

    #[test]
    fn minimal_config_round_trips() {
        let cfg = parse_config(MINIMAL).unwrap();
        let text = toml::to_string(&cfg).unwrap();
        let back = parse_config(&text).unwrap();
        assert_eq!(toml::to_string(&back).unwrap(), text);
        let resolved = resolve(cfg).unwrap();
        assert_eq!(resolved.horizons, vec![100]);
        assert_eq!(resolved.reps, 1);
        assert!(matches!(resolved.policy, PolicyConfig::RcLcb(_)));
        // tau inherited from the instance.
        if let PolicyConfig::RcLcb(p) = &resolved.policy {
            assert_eq!(p.tau, 100.0);
            // Calibrated default d = 8/sigma^2.
            assert_eq!(p.sg.d_small, 8.0);
            assert_eq!(p.sg.d_big, 2.0);
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = MINIMAL.replace("base_seed = 7", "base_seed = 7\nbogus_key = 1");
        assert!(parse_config(&bad).is_err());
        let bad2 = MINIMAL.replace("sigma = 1.0", "sigma = 1.0\nsgima = 2.0");
        assert!(parse_config(&bad2).is_err());
    }

    #[test]
    fn ht_p_out_of_range_cites_field() {
        let text = MINIMAL
            .replace(
                "name = \"rc_lcb\"\nsigma = 1.0",
                "name = \"rclcb_ht\"\np = 3.0\nb_bound = 1.0",
            )
            .replace("tau = 100.0", "tau = 100.0");
        let errs = resolve_config(&text).unwrap_err();
        assert!(
            errs.iter().any(|e| e.contains("policy.p") && e.contains("(1, 2]")),
            "{errs:?}"
        );
    }

    #[test]
    fn mode_exclusivity() {
        let text = MINIMAL.replace(
            "tau = 100.0",
            "tau = 100.0\n[[instance.constraints]]\nestimator = \"mean\"\nthreshold = 1.0\nrate = 1.0",
        );
        // TOML ordering: the constraints table array lands inside [instance].
        let errs = resolve_config(&text).unwrap_err();
        assert!(
            errs.iter().any(|e| e.contains("single-constraint") && e.contains("not both")),
            "{errs:?}"
        );
    }

    #[test]
    fn errors_are_collected_not_first_only() {
        let text = MINIMAL
            .replace("reps = 1", "reps = 0")
            .replace("horizon = 100", "horizon = 1")
            .replace("sigma = 1.0", "");
        let errs = resolve_config(&text).unwrap_err();
        assert!(errs.len() >= 3, "{errs:?}");
        assert!(errs.iter().any(|e| e.contains("run.reps")));
        assert!(errs.iter().any(|e| e.contains("run.horizon")));
        assert!(errs.iter().any(|e| e.contains("policy.sigma")));
    }

    #[test]
    fn extraneous_arm_parameter_rejected() {
        let text = MINIMAL.replace("value = 0.0", "value = 0.0\nmu = 1.0");
        let errs = resolve_config(&text).unwrap_err();
        assert!(
            errs.iter().any(|e| e.contains("instance.arms[0].mu")),
            "{errs:?}"
        );
    }

    #[test]
    fn ht_beta_bound_enforced() {
        let text = MINIMAL
            .replace(
                "name = \"rc_lcb\"\nsigma = 1.0",
                "name = \"rclcb_ht\"\np = 1.5\nb_bound = 1.0",
            )
            .replace("level = 0.95", "level = 0.4");
        let errs = resolve_config(&text).unwrap_err();
        assert!(
            errs.iter().any(|e| e.contains("alpha > 0.5")),
            "{errs:?}"
        );
    }
}
