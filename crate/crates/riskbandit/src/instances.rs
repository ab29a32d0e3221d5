//! Parametric arm models, exact instance classification, and theorem-bound
//! calculators.
//!
//! An instance is a list of loss distributions (arms) plus a risk appetite:
//! either a single CVaR threshold `tau` at risk level `alpha`, or a list of
//! attribute constraints `g_i(k) <= tau_i` for the multi-constraint policy.
//!
//! Classification is exact: every arm kind exposes a closed-form mean and a
//! closed-form or quadrature CVaR, from which the ground-truth sets and gaps
//! are derived:
//!
//! * feasible set `K_tau = {k : c_alpha(k) <= tau}`; the instance is feasible
//!   iff `K_tau` is nonempty;
//! * optimal set: argmin of the mean over `K_tau` (feasible case) or argmin of
//!   the CVaR over all arms (infeasible case);
//! * deceiver set: infeasible arms whose mean does not exceed the optimal
//!   feasible mean `mu*` — attractive on mean, forbidden on risk;
//! * gaps `Delta(k) = mu(k) - mu*`, `Delta_tau(k) = c_alpha(k) - tau`,
//!   `Delta_risk(k) = c_alpha(k) - c_alpha*`.
//!
//! The theorem-bound calculator turns these gaps into the per-arm expected
//! pull-count ceilings the policies are guaranteed to respect, plus the
//! horizon threshold `T*` past which the infeasibility flag guarantee holds.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::risk_core::{MomentParams, RiskLevel, SubGaussianParams};

/// Gaps smaller than this are treated as zero: the corresponding theorem
/// bounds become "not applicable" markers instead of near-infinite values.
pub const ZERO_GAP_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("invalid arm model: {0}")]
    InvalidArm(String),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("quadrature failed to converge: {0}")]
    Quadrature(String),
}

/// A parametric loss distribution with exact sampling / mean / CVaR support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ArmModel {
    Constant { value: f64 },
    Gaussian { mu: f64, sigma: f64 },
    Uniform { lo: f64, hi: f64 },
    /// Survival function `(scale/(scale+x))^shape` on `x >= 0`, then shifted:
    /// support `[shift, inf)`, mean `shift + scale/(shape-1)` for `shape > 1`.
    ShiftedPareto { shape: f64, scale: f64, shift: f64 },
    Discrete { values: Vec<f64>, probs: Vec<f64> },
}

impl ArmModel {
    pub fn validate(&self) -> Result<(), InstanceError> {
        match self {
            ArmModel::Constant { value } => {
                if !value.is_finite() {
                    return Err(InstanceError::InvalidArm(format!(
                        "constant value must be finite, got {value}"
                    )));
                }
            }
            ArmModel::Gaussian { mu, sigma } => {
                if !mu.is_finite() || !(*sigma > 0.0) {
                    return Err(InstanceError::InvalidArm(format!(
                        "gaussian requires finite mu and sigma > 0, got mu = {mu}, sigma = {sigma}"
                    )));
                }
            }
            ArmModel::Uniform { lo, hi } => {
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(InstanceError::InvalidArm(format!(
                        "uniform requires lo < hi, got lo = {lo}, hi = {hi}"
                    )));
                }
            }
            ArmModel::ShiftedPareto { shape, scale, shift } => {
                if !(*shape > 1.0) || !(*scale > 0.0) || !shift.is_finite() {
                    return Err(InstanceError::InvalidArm(format!(
                        "shifted pareto requires shape > 1 (finite mean) and scale > 0, \
                         got shape = {shape}, scale = {scale}, shift = {shift}"
                    )));
                }
            }
            ArmModel::Discrete { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return Err(InstanceError::InvalidArm(
                        "discrete arm needs equal-length nonempty values/probs".into(),
                    ));
                }
                if probs.iter().any(|&p| !(p >= 0.0)) {
                    return Err(InstanceError::InvalidArm(
                        "discrete probabilities must be nonnegative".into(),
                    ));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(InstanceError::InvalidArm(format!(
                        "discrete probabilities must sum to 1 within 1e-12, got {total}"
                    )));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(InstanceError::InvalidArm(
                        "discrete values must be finite".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Quantile function `F^{-1}(u)` for `u in (0,1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            ArmModel::Constant { value } => *value,
            ArmModel::Gaussian { mu, sigma } => {
                let n = Normal::new(*mu, *sigma).expect("validated");
                n.inverse_cdf(u.clamp(1e-300, 1.0 - 1e-16))
            }
            ArmModel::Uniform { lo, hi } => lo + u * (hi - lo),
            ArmModel::ShiftedPareto { .. } => self.quantile_upper(1.0 - u),
            ArmModel::Discrete { values, probs } => {
                let order = discrete_ascending(values, probs);
                let mut cum = 0.0;
                for &(v, p) in &order {
                    cum += p;
                    if cum >= u - 1e-15 {
                        return v;
                    }
                }
                order.last().unwrap().0
            }
        }
    }

    /// Quantile expressed through the upper-tail mass `w = 1 - u`, exact for
    /// heavy-tailed kinds (avoids catastrophic rounding of `1 - w` when `w`
    /// is tiny, which the CVaR quadrature depends on).
    fn quantile_upper(&self, w: f64) -> f64 {
        match self {
            ArmModel::Constant { value } => *value,
            ArmModel::Gaussian { .. } => self.quantile(1.0 - w.max(1e-16)),
            ArmModel::Uniform { lo, hi } => hi - w * (hi - lo),
            ArmModel::ShiftedPareto { shape, scale, shift } => {
                scale * (w.powf(-1.0 / shape) - 1.0) + shift
            }
            ArmModel::Discrete { values, probs } => {
                let order = discrete_ascending(values, probs);
                let mut tail = 0.0;
                for &(v, p) in order.iter().rev() {
                    tail += p;
                    if tail >= w - 1e-15 {
                        return v;
                    }
                }
                order.first().unwrap().0
            }
        }
    }

    /// One loss draw by inverse-CDF sampling; deterministic per RNG state.
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        let u: f64 = rng.gen::<f64>().clamp(1e-16, 1.0 - 1e-16);
        self.quantile(u)
    }

    /// Exact mean.
    pub fn mean(&self) -> f64 {
        match self {
            ArmModel::Constant { value } => *value,
            ArmModel::Gaussian { mu, .. } => *mu,
            ArmModel::Uniform { lo, hi } => 0.5 * (lo + hi),
            ArmModel::ShiftedPareto { shape, scale, shift } => shift + scale / (shape - 1.0),
            ArmModel::Discrete { values, probs } => {
                values.iter().zip(probs).map(|(v, p)| v * p).sum()
            }
        }
    }

    /// CVaR at the given level. Constant/Uniform/Gaussian use closed forms;
    /// Discrete uses the definitional (atom-splitting) formula
    /// `v_alpha + E[(X - v_alpha)^+]/beta`, exact across CDF jumps;
    /// ShiftedPareto uses adaptive quadrature of `(1/beta) int_alpha^1 F^{-1}`.
    pub fn cvar(&self, level: RiskLevel) -> Result<f64, InstanceError> {
        let alpha = level.alpha();
        let beta = level.beta();
        match self {
            ArmModel::Constant { value } => Ok(*value),
            ArmModel::Gaussian { mu, sigma } => Ok(mu + sigma * gaussian_kappa(level)),
            ArmModel::Uniform { lo, hi } => {
                // Mean of the upper beta tail: lo + (hi-lo)*(1+alpha)/2.
                Ok(lo + (hi - lo) * (1.0 + alpha) / 2.0)
            }
            ArmModel::Discrete { values, probs } => {
                let var = self.quantile(alpha);
                let excess: f64 = values
                    .iter()
                    .zip(probs)
                    .map(|(v, p)| p * (v - var).max(0.0))
                    .sum();
                Ok(var + excess / beta)
            }
            ArmModel::ShiftedPareto { .. } => cvar_by_quadrature(self, level),
        }
    }

    /// Absolute p-th moment `E|X|^p`, exact for Constant/Discrete, quadrature
    /// `int_0^1 |F^{-1}(u)|^p du` otherwise. Used to derive valid heavy-tail
    /// moment bounds `B` for presets and tests.
    pub fn abs_moment(&self, p: f64) -> Result<f64, InstanceError> {
        match self {
            ArmModel::Constant { value } => Ok(value.abs().powf(p)),
            ArmModel::Discrete { values, probs } => Ok(values
                .iter()
                .zip(probs)
                .map(|(v, pr)| pr * v.abs().powf(p))
                .sum()),
            _ => {
                // Split at the median and substitute u = e^{-y}/2 (lower
                // tail) and 1 - u = e^{-y}/2 (upper tail) so endpoint
                // singularities become smooth exponentially decaying
                // integrands.
                let lower = integrate_decaying(
                    &|y: f64| {
                        let w = 0.5 * (-y).exp();
                        self.quantile(w.max(1e-15)).abs().powf(p) * w
                    },
                    1e-10,
                )?;
                let upper = integrate_decaying(
                    &|y: f64| {
                        let w = 0.5 * (-y).exp();
                        self.quantile_upper(w).abs().powf(p) * w
                    },
                    1e-10,
                )?;
                Ok(lower + upper)
            }
        }
    }

    /// Short human-readable descriptor of the arm kind and parameters.
    pub fn describe(&self) -> String {
        match self {
            ArmModel::Constant { value } => format!("constant({value})"),
            ArmModel::Gaussian { mu, sigma } => format!("gaussian({mu}, {sigma})"),
            ArmModel::Uniform { lo, hi } => format!("uniform({lo}, {hi})"),
            ArmModel::ShiftedPareto { shape, scale, shift } => {
                format!("shifted_pareto({shape}, {scale}, {shift})")
            }
            ArmModel::Discrete { values, .. } => format!("discrete({} atoms)", values.len()),
        }
    }
}

/// Gaussian CVaR factor `kappa_alpha = phi(Phi^{-1}(alpha))/beta`, so that
/// `c_alpha(N(mu, sigma)) = mu + sigma*kappa_alpha`.
pub fn gaussian_kappa(level: RiskLevel) -> f64 {
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let q = std_normal.inverse_cdf(level.alpha());
    let phi = (-0.5 * q * q).exp() / (2.0 * std::f64::consts::PI).sqrt();
    phi / level.beta()
}

fn discrete_ascending(values: &[f64], probs: &[f64]) -> Vec<(f64, f64)> {
    let mut order: Vec<(f64, f64)> = values.iter().copied().zip(probs.iter().copied()).collect();
    order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    order
}

/// Adaptive-quadrature CVaR `(1/beta) int_alpha^1 F^{-1}(u) du`, usable for
/// every arm kind (serves as the independent cross-check oracle for the
/// closed forms). The substitution `u = 1 - beta*e^{-y}` maps the integral to
/// `int_0^inf q_upper(beta*e^{-y}) * beta*e^{-y} dy`, whose integrand decays
/// exponentially whenever the arm has a finite mean.
pub fn cvar_by_quadrature(model: &ArmModel, level: RiskLevel) -> Result<f64, InstanceError> {
    let beta = level.beta();
    let g = |y: f64| {
        let w = beta * (-y).exp();
        model.quantile_upper(w) * w
    };
    let total = integrate_decaying(&g, 1e-10)?;
    Ok(total / beta)
}

/// Integrates `g` over `[0, inf)` where `g` decays (at least eventually)
/// exponentially: fixed-length segments are summed with adaptive Simpson
/// until a segment's contribution falls below the tolerance.
fn integrate_decaying(g: &dyn Fn(f64) -> f64, tol: f64) -> Result<f64, InstanceError> {
    const SEG: f64 = 4.0;
    const MAX_SEGMENTS: usize = 4000;
    let mut total = 0.0;
    for k in 0..MAX_SEGMENTS {
        let a = k as f64 * SEG;
        let seg = adaptive_simpson(g, a, a + SEG, tol * 0.01)?;
        total += seg;
        if k >= 2 && seg.abs() < tol * 0.1 {
            return Ok(total);
        }
    }
    Err(InstanceError::Quadrature(format!(
        "tail integral did not fall below {tol} within {MAX_SEGMENTS} segments"
    )))
}

/// Adaptive Simpson with Richardson acceptance on `[a, b]`.
fn adaptive_simpson(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<f64, InstanceError> {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64, InstanceError> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if !delta.is_finite() {
            return Err(InstanceError::Quadrature(format!(
                "non-finite integrand near [{a}, {b}]"
            )));
        }
        if depth == 0 {
            return Err(InstanceError::Quadrature(format!(
                "max refinement depth reached on [{a}, {b}], residual {delta:e}"
            )));
        }
        if delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        Ok(recurse(f, a, m, fa, flm, fm, left, tol * 0.5, depth - 1)?
            + recurse(f, m, b, fm, frm, fb, right, tol * 0.5, depth - 1)?)
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(fa, fm, fb, b - a);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Attribute estimator kinds usable as Con-LCB objectives/constraints with an
/// exact oracle (custom plug-in estimators exist only at the policy layer and
/// have no ground-truth value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AttributeKind {
    Mean,
    Cvar { alpha: RiskLevel },
}

impl AttributeKind {
    /// True attribute value of an arm.
    pub fn true_value(&self, model: &ArmModel) -> Result<f64, InstanceError> {
        match self {
            AttributeKind::Mean => Ok(model.mean()),
            AttributeKind::Cvar { alpha } => model.cvar(*alpha),
        }
    }
}

/// One constraint `g_i(k) <= tau_i` for the multi-constraint policy.
/// Constraints are declared in increasing order of importance: when no arm
/// satisfies all of them, the policy drops constraints from the front of the
/// list first (the last declared constraint is the most important).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeConstraint {
    pub estimator: AttributeKind,
    /// Threshold tau_i.
    pub threshold: f64,
    /// Concentration rate a_i of the estimator (width = sqrt(log(2T^2)/(a_i n))).
    pub rate: f64,
    /// Coordinate of the (possibly multi-dimensional) per-pull draw consumed
    /// by this constraint's estimator. Scalar instances use coordinate 0.
    pub coord: usize,
}

/// A bandit instance: arms plus a risk appetite. Exactly one of `tau`
/// (single CVaR constraint at `level`) or `constraints` (multi-constraint
/// mode) must be set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub arms: Vec<ArmModel>,
    pub level: RiskLevel,
    pub tau: Option<f64>,
    pub constraints: Option<Vec<AttributeConstraint>>,
}

impl InstanceSpec {
    /// Single-constraint instance.
    pub fn single(arms: Vec<ArmModel>, level: RiskLevel, tau: f64) -> Self {
        Self { arms, level, tau: Some(tau), constraints: None }
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        if self.arms.is_empty() {
            return Err(InstanceError::InvalidInstance("no arms".into()));
        }
        for arm in &self.arms {
            arm.validate()?;
        }
        match (&self.tau, &self.constraints) {
            (Some(_), None) => Ok(()),
            (None, Some(cs)) if !cs.is_empty() => {
                for (i, c) in cs.iter().enumerate() {
                    if !(c.rate > 0.0) {
                        return Err(InstanceError::InvalidInstance(format!(
                            "constraint {} rate must be > 0, got {}",
                            i + 1,
                            c.rate
                        )));
                    }
                    if c.coord != 0 {
                        return Err(InstanceError::InvalidInstance(
                            "scalar arm models provide only coordinate 0".into(),
                        ));
                    }
                }
                Ok(())
            }
            (Some(_), Some(_)) => Err(InstanceError::InvalidInstance(
                "choose single-constraint (tau) or multi-constraint (constraints) mode, not both"
                    .into(),
            )),
            _ => Err(InstanceError::InvalidInstance(
                "either tau or a nonempty constraints list is required".into(),
            )),
        }
    }

    pub fn num_arms(&self) -> usize {
        self.arms.len()
    }
}

/// Ground-truth classification of a single-constraint instance.
#[derive(Debug, Clone, Serialize)]
pub struct InstanceOracle {
    pub means: Vec<f64>,
    pub cvars: Vec<f64>,
    pub tau: f64,
    /// Arms with c_alpha(k) <= tau (0-based indices).
    pub feasible_set: Vec<usize>,
    /// Infeasible arms with mu(k) <= mu* (feasible case only).
    pub deceiver_set: Vec<usize>,
    pub optimal_set: Vec<usize>,
    /// Optimal feasible mean (feasible case).
    pub mu_star: Option<f64>,
    /// Minimal CVaR (infeasible case).
    pub cvar_star: Option<f64>,
    /// Delta(k) = max(mu(k) - mu*, 0); zero for optimal and deceiver arms
    /// (feasible case only).
    pub gap_mean: Option<Vec<f64>>,
    /// Delta_tau(k) = c_alpha(k) - tau for infeasible arms, None otherwise.
    pub gap_tau: Vec<Option<f64>>,
    /// Delta_risk(k) = c_alpha(k) - c_alpha* (infeasible case only).
    pub gap_risk: Option<Vec<f64>>,
    pub is_feasible: bool,
}

/// Classifies a single-constraint instance exactly.
pub fn classify(spec: &InstanceSpec) -> Result<InstanceOracle, InstanceError> {
    spec.validate()?;
    let tau = spec.tau.ok_or_else(|| {
        InstanceError::InvalidInstance(
            "classify requires single-constraint mode (tau); use classify_constrained".into(),
        )
    })?;
    let means: Vec<f64> = spec.arms.iter().map(|a| a.mean()).collect();
    let cvars = spec
        .arms
        .iter()
        .map(|a| a.cvar(spec.level))
        .collect::<Result<Vec<f64>, _>>()?;

    let feasible_set: Vec<usize> = (0..spec.arms.len()).filter(|&k| cvars[k] <= tau).collect();
    let is_feasible = !feasible_set.is_empty();
    let gap_tau: Vec<Option<f64>> = cvars
        .iter()
        .map(|&c| if c > tau { Some(c - tau) } else { None })
        .collect();

    if is_feasible {
        let mu_star = feasible_set.iter().map(|&k| means[k]).fold(f64::INFINITY, f64::min);
        let optimal_set: Vec<usize> = feasible_set
            .iter()
            .copied()
            .filter(|&k| means[k] <= mu_star + ZERO_GAP_TOL * mu_star.abs().max(1.0))
            .collect();
        let deceiver_set: Vec<usize> = (0..spec.arms.len())
            .filter(|&k| cvars[k] > tau && means[k] <= mu_star)
            .collect();
        let gap_mean: Vec<f64> = means.iter().map(|&m| (m - mu_star).max(0.0)).collect();
        Ok(InstanceOracle {
            means,
            cvars,
            tau,
            feasible_set,
            deceiver_set,
            optimal_set,
            mu_star: Some(mu_star),
            cvar_star: None,
            gap_mean: Some(gap_mean),
            gap_tau,
            gap_risk: None,
            is_feasible,
        })
    } else {
        let cvar_star = cvars.iter().copied().fold(f64::INFINITY, f64::min);
        let optimal_set: Vec<usize> = (0..spec.arms.len())
            .filter(|&k| cvars[k] <= cvar_star + ZERO_GAP_TOL * cvar_star.abs().max(1.0))
            .collect();
        let gap_risk: Vec<f64> = cvars.iter().map(|&c| (c - cvar_star).max(0.0)).collect();
        Ok(InstanceOracle {
            means,
            cvars,
            tau,
            feasible_set,
            deceiver_set: Vec::new(),
            optimal_set,
            mu_star: None,
            cvar_star: Some(cvar_star),
            gap_mean: None,
            gap_tau,
            gap_risk: Some(gap_risk),
            is_feasible,
        })
    }
}

/// Ground-truth classification of a multi-constraint instance.
#[derive(Debug, Clone, Serialize)]
pub struct ConstrainedOracle {
    /// True objective values g_0(k).
    pub objective: Vec<f64>,
    /// True constraint values g_i(k), indexed `[constraint][arm]`.
    pub attributes: Vec<Vec<f64>>,
    /// Arms satisfying every constraint.
    pub feasible_set: Vec<usize>,
    pub optimal_set: Vec<usize>,
    /// Infeasible arms with g_0(k) <= g_0* (feasible case only).
    pub deceiver_set: Vec<usize>,
    pub g0_star: Option<f64>,
    /// max(g_0(k) - g_0*, 0) per arm (feasible case only).
    pub gap_objective: Option<Vec<f64>>,
    /// Violation gap g_i(k) - tau_i for violating arms, indexed
    /// `[constraint][arm]`; None where the constraint is satisfied.
    pub gap_constraint: Vec<Vec<Option<f64>>>,
    pub is_feasible: bool,
}

/// Classifies a multi-constraint instance with the given objective attribute.
pub fn classify_constrained(
    spec: &InstanceSpec,
    objective: AttributeKind,
) -> Result<ConstrainedOracle, InstanceError> {
    spec.validate()?;
    let constraints = spec.constraints.as_ref().ok_or_else(|| {
        InstanceError::InvalidInstance("classify_constrained requires constraints mode".into())
    })?;
    let k_arms = spec.arms.len();
    let g0: Vec<f64> = spec
        .arms
        .iter()
        .map(|a| objective.true_value(a))
        .collect::<Result<_, _>>()?;
    let mut attributes = Vec::with_capacity(constraints.len());
    let mut gap_constraint = Vec::with_capacity(constraints.len());
    for c in constraints {
        let vals: Vec<f64> = spec
            .arms
            .iter()
            .map(|a| c.estimator.true_value(a))
            .collect::<Result<_, _>>()?;
        let gaps: Vec<Option<f64>> = vals
            .iter()
            .map(|&v| if v > c.threshold { Some(v - c.threshold) } else { None })
            .collect();
        attributes.push(vals);
        gap_constraint.push(gaps);
    }
    let feasible_set: Vec<usize> = (0..k_arms)
        .filter(|&k| gap_constraint.iter().all(|g| g[k].is_none()))
        .collect();
    let is_feasible = !feasible_set.is_empty();
    if is_feasible {
        let g0_star = feasible_set.iter().map(|&k| g0[k]).fold(f64::INFINITY, f64::min);
        let optimal_set: Vec<usize> = feasible_set
            .iter()
            .copied()
            .filter(|&k| g0[k] <= g0_star + ZERO_GAP_TOL * g0_star.abs().max(1.0))
            .collect();
        let deceiver_set: Vec<usize> = (0..k_arms)
            .filter(|&k| !feasible_set.contains(&k) && g0[k] <= g0_star)
            .collect();
        let gap_objective: Vec<f64> = g0.iter().map(|&v| (v - g0_star).max(0.0)).collect();
        Ok(ConstrainedOracle {
            objective: g0,
            attributes,
            feasible_set,
            optimal_set,
            deceiver_set,
            g0_star: Some(g0_star),
            gap_objective: Some(gap_objective),
            gap_constraint,
            is_feasible,
        })
    } else {
        // Relaxation order: drop constraints from the front of the list until
        // some arm satisfies the rest; optimize that suffix's first attribute.
        let m = constraints.len();
        let mut i_star = m; // all constraints dropped => optimize g0? (never: suffix of 0 constraints is all arms)
        for i in (0..m).rev() {
            let suffix_ok: Vec<usize> = (0..k_arms)
                .filter(|&k| gap_constraint[i..].iter().all(|g| g[k].is_none()))
                .collect();
            if !suffix_ok.is_empty() {
                i_star = i;
            }
        }
        // After dropping constraints 1..=i_star, the policy minimizes
        // attribute i_star over arms satisfying the remaining suffix.
        let candidate: Vec<usize> = (0..k_arms)
            .filter(|&k| {
                gap_constraint
                    .get(i_star + 1..)
                    .unwrap_or(&[])
                    .iter()
                    .all(|g| g[k].is_none())
            })
            .collect();
        let target = &attributes[i_star.min(m - 1)];
        let best = candidate.iter().map(|&k| target[k]).fold(f64::INFINITY, f64::min);
        let optimal_set: Vec<usize> = candidate
            .iter()
            .copied()
            .filter(|&k| target[k] <= best + ZERO_GAP_TOL * best.abs().max(1.0))
            .collect();
        Ok(ConstrainedOracle {
            objective: g0,
            attributes,
            feasible_set,
            optimal_set,
            deceiver_set: Vec::new(),
            g0_star: None,
            gap_objective: None,
            gap_constraint,
            is_feasible,
        })
    }
}

/// Per-arm pull-count thresholds and theorem right-hand sides for the
/// sub-Gaussian policy; `None` marks "not applicable" (zero gap).
#[derive(Debug, Clone, Serialize)]
pub struct TheoremBounds {
    /// Mean-disambiguation budget `u_k = ceil(16 sigma^2 log T / Delta^2)`.
    pub u: Vec<Option<f64>>,
    /// CVaR-vs-tau budget `v_k = ceil(4 log(2 D T^2)/(d beta^2 Delta_tau^2))`.
    pub v: Vec<Option<f64>>,
    /// CVaR-disambiguation budget `w_k` (Delta_risk in place of Delta_tau).
    pub w: Vec<Option<f64>>,
    /// Smallest horizon with `T > sum_k v_k(T)` (infeasible instances).
    pub t_star: Option<usize>,
    pub rhs_feasible_suboptimal: Vec<Option<f64>>,
    pub rhs_deceiver: Vec<Option<f64>>,
    pub rhs_infeasible_suboptimal: Vec<Option<f64>>,
    pub rhs_risk: Vec<Option<f64>>,
    /// Heavy-tailed variants (populated when moment params are supplied).
    pub ht: Option<HtBounds>,
}

/// Heavy-tailed counterparts of the pull-count bounds.
#[derive(Debug, Clone, Serialize)]
pub struct HtBounds {
    pub u: Vec<Option<f64>>,
    pub v: Vec<Option<f64>>,
    pub w: Vec<Option<f64>>,
    pub t_star: Option<usize>,
    pub rhs_feasible_suboptimal: Vec<Option<f64>>,
    pub rhs_deceiver: Vec<Option<f64>>,
    pub rhs_infeasible_suboptimal: Vec<Option<f64>>,
    pub rhs_risk: Vec<Option<f64>>,
}

fn gap_or_none(g: f64) -> Option<f64> {
    if g > ZERO_GAP_TOL {
        Some(g)
    } else {
        None
    }
}

/// Computes every theorem bound for a classified single-constraint instance.
pub fn theorem_bounds(
    oracle: &InstanceOracle,
    sg: &SubGaussianParams,
    mp: Option<&MomentParams>,
    level: RiskLevel,
    horizon: usize,
) -> TheoremBounds {
    let k_arms = oracle.means.len();
    let beta = level.beta();
    let t = horizon as f64;
    let log_t = t.ln();
    let log_2dt2 = (2.0 * sg.d_big * t * t).ln();

    let u_term = |gap: f64| 16.0 * sg.sigma * sg.sigma * log_t / (gap * gap);
    let v_term = |gap: f64| 4.0 * log_2dt2 / (sg.d_small * beta * beta * gap * gap);

    let mut u = vec![None; k_arms];
    let mut v = vec![None; k_arms];
    let mut w = vec![None; k_arms];
    let mut rhs_fs = vec![None; k_arms];
    let mut rhs_dec = vec![None; k_arms];
    let mut rhs_is = vec![None; k_arms];
    let mut rhs_risk = vec![None; k_arms];

    for k in 0..k_arms {
        let d_mean = oracle.gap_mean.as_ref().and_then(|g| gap_or_none(g[k]));
        let d_tau = oracle.gap_tau[k].and_then(gap_or_none);
        let d_risk = oracle.gap_risk.as_ref().and_then(|g| gap_or_none(g[k]));
        u[k] = d_mean.map(|g| u_term(g).ceil());
        v[k] = d_tau.map(|g| v_term(g).ceil());
        w[k] = d_risk.map(|g| v_term(g).ceil());
        if oracle.is_feasible {
            let is_feasible_arm = oracle.feasible_set.contains(&k);
            let is_deceiver = oracle.deceiver_set.contains(&k);
            if is_feasible_arm {
                rhs_fs[k] = d_mean.map(|g| u_term(g) + 5.0);
            } else if is_deceiver {
                rhs_dec[k] = d_tau.map(|g| v_term(g) + 2.0);
            } else {
                // Infeasible, non-deceiver: whichever mechanism excludes it
                // first dominates.
                rhs_is[k] = match (d_mean, d_tau) {
                    (Some(gm), Some(gt)) => Some(u_term(gm).min(v_term(gt)) + 5.0),
                    (Some(gm), None) => Some(u_term(gm) + 5.0),
                    (None, Some(gt)) => Some(v_term(gt) + 5.0),
                    (None, None) => None,
                };
            }
        } else {
            rhs_risk[k] = d_risk.map(|g| v_term(g) + k_arms as f64 + 2.0);
        }
    }

    let t_star = if oracle.is_feasible {
        None
    } else {
        let sum_v = |t_val: f64| -> f64 {
            let log_term = (2.0 * sg.d_big * t_val * t_val).ln();
            oracle
                .gap_tau
                .iter()
                .filter_map(|g| g.and_then(gap_or_none))
                .map(|g| (4.0 * log_term / (sg.d_small * beta * beta * g * g)).ceil())
                .sum()
        };
        find_t_star(k_arms, &sum_v)
    };

    let ht = mp.map(|mp| ht_bounds(oracle, mp, level, horizon));

    TheoremBounds {
        u,
        v,
        w,
        t_star,
        rhs_feasible_suboptimal: rhs_fs,
        rhs_deceiver: rhs_dec,
        rhs_infeasible_suboptimal: rhs_is,
        rhs_risk,
        ht,
    }
}

fn ht_bounds(
    oracle: &InstanceOracle,
    mp: &MomentParams,
    level: RiskLevel,
    horizon: usize,
) -> HtBounds {
    let k_arms = oracle.means.len();
    let beta = level.beta();
    let p = mp.p;
    let b = mp.b_bound;
    let t = horizon as f64;
    let log_2t2 = (2.0 * t * t).ln();
    let log_6t2 = (6.0 * t * t).ln();

    // Mean budget: (8/Delta)^{p/(p-1)} B^{1/(p-1)} log(2T^2).
    let u_term = |gap: f64| {
        (8.0 / gap).powf(p / (p - 1.0)) * b.powf(1.0 / (p - 1.0)) * log_2t2
    };
    // CVaR budget: 44 log(6T^2)/(beta (p-1)^2) *
    //   max(1/beta^2, B^{2/(p-1)} (2p)^{2p/(p-1)} / Delta^{2p/(p-1)}).
    let v_term = |gap: f64| {
        let e = 2.0 * p / (p - 1.0);
        let alt = b.powf(2.0 / (p - 1.0)) * (2.0 * p).powf(e) / gap.powf(e);
        44.0 * log_6t2 / (beta * (p - 1.0) * (p - 1.0)) * (1.0 / (beta * beta)).max(alt)
    };

    let mut u = vec![None; k_arms];
    let mut v = vec![None; k_arms];
    let mut w = vec![None; k_arms];
    let mut rhs_fs = vec![None; k_arms];
    let mut rhs_dec = vec![None; k_arms];
    let mut rhs_is = vec![None; k_arms];
    let mut rhs_risk = vec![None; k_arms];
    for k in 0..k_arms {
        let d_mean = oracle.gap_mean.as_ref().and_then(|g| gap_or_none(g[k]));
        let d_tau = oracle.gap_tau[k].and_then(gap_or_none);
        let d_risk = oracle.gap_risk.as_ref().and_then(|g| gap_or_none(g[k]));
        u[k] = d_mean.map(|g| u_term(g).ceil());
        v[k] = d_tau.map(|g| v_term(g).ceil());
        w[k] = d_risk.map(|g| v_term(g).ceil());
        if oracle.is_feasible {
            if oracle.feasible_set.contains(&k) {
                rhs_fs[k] = d_mean.map(|g| u_term(g) + 5.0);
            } else if oracle.deceiver_set.contains(&k) {
                rhs_dec[k] = d_tau.map(|g| v_term(g) + 2.0);
            } else {
                rhs_is[k] = match (d_mean, d_tau) {
                    (Some(gm), Some(gt)) => Some(u_term(gm).min(v_term(gt)) + 5.0),
                    (Some(gm), None) => Some(u_term(gm) + 5.0),
                    (None, Some(gt)) => Some(v_term(gt) + 5.0),
                    (None, None) => None,
                };
            }
        } else {
            rhs_risk[k] = d_risk.map(|g| v_term(g) + k_arms as f64 + 2.0);
        }
    }
    let t_star = if oracle.is_feasible {
        None
    } else {
        let sum_v = |t_val: f64| -> f64 {
            let l6 = (6.0 * t_val * t_val).ln();
            oracle
                .gap_tau
                .iter()
                .filter_map(|g| g.and_then(gap_or_none))
                .map(|g| {
                    let e = 2.0 * p / (p - 1.0);
                    let alt = b.powf(2.0 / (p - 1.0)) * (2.0 * p).powf(e) / g.powf(e);
                    (44.0 * l6 / (beta * (p - 1.0) * (p - 1.0))
                        * (1.0 / (beta * beta)).max(alt))
                    .ceil()
                })
                .sum()
        };
        find_t_star(k_arms, &sum_v)
    };
    HtBounds {
        u,
        v,
        w,
        t_star,
        rhs_feasible_suboptimal: rhs_fs,
        rhs_deceiver: rhs_dec,
        rhs_infeasible_suboptimal: rhs_is,
        rhs_risk,
    }
}

/// Smallest integer `T >= k_arms` with `T > sum_v(T)`; the sum grows only
/// logarithmically in T, so exponential search followed by a downward scan
/// over the crossing region terminates quickly. Returns None above 2^48.
fn find_t_star(k_arms: usize, sum_v: &dyn Fn(f64) -> f64) -> Option<usize> {
    let pred = |t: usize| (t as f64) > sum_v(t as f64);
    let mut hi = k_arms.max(2);
    let mut doublings = 0;
    while !pred(hi) {
        hi = hi.saturating_mul(2);
        doublings += 1;
        if doublings > 48 {
            return None;
        }
    }
    let mut lo = k_arms.max(2);
    if pred(lo) {
        return Some(lo);
    }
    // Invariant: !pred(lo) && pred(hi). The predicate is monotone up to
    // +/- k_arms ceiling jumps; binary search then a short local backward scan
    // pins the minimum.
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut t = hi;
    while t > k_arms.max(2) + 1 && pred(t - 1) {
        t -= 1;
    }
    Some(t)
}

/// Per-arm expected-pull right-hand sides of the multi-constraint policy's
/// guarantee, plus its flag error bound `m/T`.
#[derive(Debug, Clone, Serialize)]
pub struct ConLcbBounds {
    pub rhs: Vec<Option<f64>>,
    pub flag_error_bound: f64,
}

/// Bounds for the multi-constraint policy on a feasible instance:
/// feasible-suboptimal arms pay `4 log(2T^2)/(a_0 Delta^2) + 2m + 3`;
/// deceivers pay `min_i 4 log(2T^2)/(a_i Delta_i^2) + m` over violated
/// constraints; infeasible non-deceivers pay the min of both mechanisms
/// `+ 2m + 3`.
pub fn theorem5_bounds(
    oracle: &ConstrainedOracle,
    a0: f64,
    rates: &[f64],
    horizon: usize,
) -> ConLcbBounds {
    let k_arms = oracle.objective.len();
    let m = oracle.attributes.len();
    let t = horizon as f64;
    let log_2t2 = (2.0 * t * t).ln();
    let obj_term = |gap: f64| 4.0 * log_2t2 / (a0 * gap * gap);
    let mut rhs = vec![None; k_arms];
    for k in 0..k_arms {
        if oracle.optimal_set.contains(&k) {
            continue;
        }
        let d_obj = oracle
            .gap_objective
            .as_ref()
            .and_then(|g| gap_or_none(g[k]));
        let min_constraint: Option<f64> = (0..m)
            .filter_map(|i| {
                oracle.gap_constraint[i][k]
                    .and_then(gap_or_none)
                    .map(|g| 4.0 * log_2t2 / (rates[i] * g * g))
            })
            .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.min(x))));
        let is_feasible_arm = oracle.feasible_set.contains(&k);
        rhs[k] = if is_feasible_arm {
            d_obj.map(|g| obj_term(g) + 2.0 * m as f64 + 3.0)
        } else if oracle.deceiver_set.contains(&k) {
            min_constraint.map(|c| c + m as f64)
        } else {
            match (d_obj, min_constraint) {
                (Some(g), Some(c)) => Some(obj_term(g).min(c) + 2.0 * m as f64 + 3.0),
                (Some(g), None) => Some(obj_term(g) + 2.0 * m as f64 + 3.0),
                (None, Some(c)) => Some(c + 2.0 * m as f64 + 3.0),
                (None, None) => None,
            }
        };
    }
    ConLcbBounds { rhs, flag_error_bound: m as f64 / t }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn level(alpha: f64) -> RiskLevel {
        RiskLevel::new(alpha).unwrap()
    }

    fn gaussian(mu: f64, sigma: f64) -> ArmModel {
        ArmModel::Gaussian { mu, sigma }
    }

    #[test]
    fn arm_mean_examples() {
        assert_eq!(ArmModel::Constant { value: 3.5 }.mean(), 3.5);
        assert_eq!(ArmModel::Uniform { lo: 0.0, hi: 1.0 }.mean(), 0.5);
        let pareto = ArmModel::ShiftedPareto { shape: 3.0, scale: 1.0, shift: 0.0 };
        assert_relative_eq!(pareto.mean(), 0.5, max_relative = 1e-12);
        // Quadrature cross-check of the closed-form mean via E|X|^1.
        assert_relative_eq!(pareto.abs_moment(1.0).unwrap(), 0.5, max_relative = 1e-6);
    }

    #[test]
    fn arm_cvar_examples() {
        let lv = level(0.95);
        assert_eq!(ArmModel::Constant { value: -2.0 }.cvar(lv).unwrap(), -2.0);
        assert_relative_eq!(
            ArmModel::Uniform { lo: 0.0, hi: 1.0 }.cvar(lv).unwrap(),
            0.975,
            max_relative = 1e-12
        );
        assert_relative_eq!(gaussian(0.0, 1.0).cvar(lv).unwrap(), 2.0627, max_relative = 1e-4);
    }

    #[test]
    fn gaussian_cvar_closed_form_matches_quadrature() {
        for &(mu, sigma, alpha) in &[(0.0, 1.0, 0.95), (-0.5, 2.0, 0.9), (3.0, 0.3, 0.99)] {
            let arm = gaussian(mu, sigma);
            let lv = level(alpha);
            assert_relative_eq!(
                arm.cvar(lv).unwrap(),
                cvar_by_quadrature(&arm, lv).unwrap(),
                max_relative = 1e-6
            );
        }
    }

    #[test]
    fn pareto_cvar_quadrature_matches_closed_form_oracle() {
        // Independent closed form for the shifted Pareto:
        // c_alpha = shift - scale + scale * beta^{-1/shape} * shape/(shape-1).
        for &(shape, scale, shift, alpha) in
            &[(3.0, 1.0, 0.0, 0.95), (2.0, 2.0, 0.5, 0.9), (1.5, 1.0, -1.0, 0.99)]
        {
            let arm = ArmModel::ShiftedPareto { shape, scale, shift };
            let lv = level(alpha);
            let beta = lv.beta();
            let oracle =
                shift - scale + scale * beta.powf(-1.0 / shape) * shape / (shape - 1.0);
            assert_relative_eq!(arm.cvar(lv).unwrap(), oracle, max_relative = 1e-8);
        }
    }

    #[test]
    fn discrete_cvar_atom_splitting() {
        // Two atoms {0, 10} each with mass 1/2 at alpha = 0.75: VaR = 10 and
        // c = 10 + (1/0.25)*0 = 10? No: v_{0.75} = 10 only if F(0) < 0.75.
        // F(0) = 0.5 < 0.75, so v = 10 and the excess vanishes: c = 10.
        let arm = ArmModel::Discrete { values: vec![0.0, 10.0], probs: vec![0.5, 0.5] };
        assert_relative_eq!(arm.cvar(level(0.75)).unwrap(), 10.0);
        // alpha = 0.25: v = 0, c = 0 + (1/0.75)*(0.5*10) = 20/3 (atom split).
        assert_relative_eq!(
            arm.cvar(level(0.25)).unwrap(),
            20.0 / 3.0,
            max_relative = 1e-12
        );
        // alpha exactly at the jump: F(0) = 0.5 >= 0.5, so v = 0 and
        // c = 0 + (1/0.5)*(0.5*10) = 10.
        assert_relative_eq!(arm.cvar(level(0.5)).unwrap(), 10.0, max_relative = 1e-12);
    }

    #[test]
    fn cvar_dominates_mean_and_is_monotone_in_alpha() {
        let arms = [
            gaussian(0.3, 1.7),
            ArmModel::Uniform { lo: -2.0, hi: 5.0 },
            ArmModel::ShiftedPareto { shape: 2.5, scale: 1.0, shift: 0.2 },
            ArmModel::Discrete { values: vec![-1.0, 0.0, 4.0], probs: vec![0.2, 0.5, 0.3] },
            ArmModel::Constant { value: 1.0 },
        ];
        for arm in &arms {
            let mut prev = f64::NEG_INFINITY;
            for &a in &[0.1, 0.3, 0.5, 0.7, 0.9, 0.95, 0.99] {
                let c = arm.cvar(level(a)).unwrap();
                assert!(c >= arm.mean() - 1e-9, "{arm:?} alpha={a}");
                assert!(c >= prev - 1e-9, "{arm:?} alpha={a} not monotone");
                prev = c;
            }
        }
    }

    #[test]
    fn sampling_matches_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let arm = gaussian(0.0, 1.0);
        let n = 1_000_000;
        let mean: f64 = (0..n).map(|_| arm.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.005, "gaussian sample mean {mean}");

        let arm = ArmModel::Discrete { values: vec![0.0, 1.0], probs: vec![0.5, 0.5] };
        let m = 100_000;
        let freq: f64 = (0..m).map(|_| arm.sample(&mut rng)).sum::<f64>() / m as f64;
        assert!((freq - 0.5).abs() < 0.01, "discrete frequency {freq}");

        assert_eq!(ArmModel::Constant { value: 3.0 }.sample(&mut rng), 3.0);
    }

    #[test]
    fn quadrature_cvar_matches_monte_carlo() {
        use crate::risk_core::{empirical_cvar, SampleBuffer};
        let lv = level(0.95);
        let arms = [
            gaussian(0.0, 1.0),
            ArmModel::Uniform { lo: 0.0, hi: 1.0 },
            ArmModel::ShiftedPareto { shape: 3.0, scale: 1.0, shift: 0.0 },
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(4242);
        for arm in &arms {
            let mut buf = SampleBuffer::new();
            for _ in 0..1_000_000 {
                buf.push(arm.sample(&mut rng));
            }
            let emp = empirical_cvar(&buf, lv).unwrap();
            let exact = cvar_by_quadrature(arm, lv).unwrap();
            assert!(
                (emp - exact).abs() < 0.01,
                "{arm:?}: empirical {emp} vs quadrature {exact}"
            );
        }
    }

    fn three_arm_spec(tau: f64) -> InstanceSpec {
        InstanceSpec::single(
            vec![gaussian(0.1, 1.0), gaussian(0.0, 1.0), gaussian(0.5, 1.0)],
            level(0.95),
            tau,
        )
    }

    #[test]
    fn classify_feasible_example() {
        let oracle = classify(&three_arm_spec(2.3)).unwrap();
        assert!(oracle.is_feasible);
        assert_relative_eq!(oracle.cvars[0], 2.1627, max_relative = 1e-4);
        assert_relative_eq!(oracle.cvars[1], 2.0627, max_relative = 1e-4);
        assert_relative_eq!(oracle.cvars[2], 2.5627, max_relative = 1e-4);
        assert_eq!(oracle.feasible_set, vec![0, 1]);
        assert!(oracle.deceiver_set.is_empty());
        assert_eq!(oracle.optimal_set, vec![1]);
        assert_eq!(oracle.mu_star, Some(0.0));
        let gaps = oracle.gap_mean.as_ref().unwrap();
        assert_relative_eq!(gaps[0], 0.1, max_relative = 1e-12);
        assert_relative_eq!(gaps[2], 0.5, max_relative = 1e-12);
        assert_relative_eq!(oracle.gap_tau[2].unwrap(), 0.2627, max_relative = 1e-3);
        assert!(oracle.gap_tau[0].is_none() && oracle.gap_tau[1].is_none());
    }

    #[test]
    fn classify_infeasible_example() {
        let oracle = classify(&three_arm_spec(1.0)).unwrap();
        assert!(!oracle.is_feasible);
        assert!(oracle.feasible_set.is_empty());
        assert_relative_eq!(oracle.cvar_star.unwrap(), 2.0627, max_relative = 1e-4);
        assert_eq!(oracle.optimal_set, vec![1]);
        let risk = oracle.gap_risk.as_ref().unwrap();
        assert_relative_eq!(risk[0], 0.1, max_relative = 1e-9);
        assert_relative_eq!(risk[1], 0.0);
        assert_relative_eq!(risk[2], 0.5, max_relative = 1e-9);
    }

    #[test]
    fn classify_deceiver_example() {
        let spec = InstanceSpec::single(
            vec![gaussian(-0.5, 2.0), gaussian(0.0, 1.0)],
            level(0.95),
            2.5,
        );
        let oracle = classify(&spec).unwrap();
        assert!(oracle.is_feasible);
        assert_relative_eq!(oracle.cvars[0], 3.6254, max_relative = 1e-4);
        assert_eq!(oracle.feasible_set, vec![1]);
        assert_eq!(oracle.deceiver_set, vec![0]);
        assert_eq!(oracle.mu_star, Some(0.0));
        // Deceivers carry zero mean gap by convention.
        assert_eq!(oracle.gap_mean.as_ref().unwrap()[0], 0.0);
    }

    #[test]
    fn classify_permutation_invariance() {
        let spec = three_arm_spec(2.3);
        let oracle = classify(&spec).unwrap();
        let permuted = InstanceSpec::single(
            vec![spec.arms[2].clone(), spec.arms[0].clone(), spec.arms[1].clone()],
            spec.level,
            2.3,
        );
        let oracle_p = classify(&permuted).unwrap();
        // Arm k of the original is arm perm[k] of the permuted instance.
        let perm = [1usize, 2, 0];
        for k in 0..3 {
            assert_eq!(oracle.means[k], oracle_p.means[perm[k]]);
            assert_eq!(oracle.cvars[k], oracle_p.cvars[perm[k]]);
            assert_eq!(
                oracle.feasible_set.contains(&k),
                oracle_p.feasible_set.contains(&perm[k])
            );
            assert_eq!(
                oracle.gap_mean.as_ref().unwrap()[k],
                oracle_p.gap_mean.as_ref().unwrap()[perm[k]]
            );
        }
        assert_eq!(oracle.mu_star, oracle_p.mu_star);
    }

    #[test]
    fn theorem_bounds_feasible_example() {
        // sigma = 1, Delta = 0.5, T = 10^4: RHS = 16 log(10^4)/0.25 + 5.
        let oracle = classify(&three_arm_spec(10.0)).unwrap(); // all feasible
        let sg = SubGaussianParams::new(1.0, 2.0, 0.125).unwrap();
        let bounds = theorem_bounds(&oracle, &sg, None, level(0.95), 10_000);
        let expected = 16.0 * 10_000.0_f64.ln() / 0.25 + 5.0;
        assert_relative_eq!(
            bounds.rhs_feasible_suboptimal[2].unwrap(),
            expected,
            max_relative = 1e-12
        );
        assert_relative_eq!(expected, 594.46, max_relative = 1e-4);
        // Optimal arm: all markers.
        assert!(bounds.u[1].is_none());
        assert!(bounds.rhs_feasible_suboptimal[1].is_none());
        assert!(bounds.t_star.is_none());
    }

    #[test]
    fn theorem_bounds_infeasible_ordering() {
        let oracle = classify(&three_arm_spec(1.0)).unwrap();
        let sg = SubGaussianParams::calibrated(1.0);
        let bounds = theorem_bounds(&oracle, &sg, None, level(0.95), 20_000);
        for k in [0usize, 2] {
            let v = bounds.v[k].unwrap();
            let w = bounds.w[k].unwrap();
            assert!(v <= w, "arm {k}: v {v} > w {w}");
        }
        // Optimal arm of the infeasible instance: w marker, v still defined.
        assert!(bounds.w[1].is_none());
        assert!(bounds.v[1].is_some());
        let t_star = bounds.t_star.unwrap();
        assert!(t_star < 20_000, "t_star = {t_star}");
        // Defining property of T*.
        let sum_at = |t: usize| -> f64 {
            let log_term = (2.0 * sg.d_big * (t as f64) * (t as f64)).ln();
            oracle
                .gap_tau
                .iter()
                .filter_map(|g| *g)
                .map(|g| (4.0 * log_term / (sg.d_small * 0.05_f64.powi(2) * g * g)).ceil())
                .sum()
        };
        assert!((t_star as f64) > sum_at(t_star));
        assert!(((t_star - 1) as f64) <= sum_at(t_star - 1));
    }

    #[test]
    fn ht_bounds_populated_with_moment_params() {
        let spec = InstanceSpec::single(
            vec![
                ArmModel::ShiftedPareto { shape: 3.0, scale: 1.0, shift: 0.0 },
                ArmModel::ShiftedPareto { shape: 3.0, scale: 1.0, shift: 0.5 },
            ],
            level(0.95),
            10.0,
        );
        let oracle = classify(&spec).unwrap();
        let sg = SubGaussianParams::calibrated(1.0);
        let mp = MomentParams::new(1.5, 2.0).unwrap();
        let bounds = theorem_bounds(&oracle, &sg, Some(&mp), level(0.95), 10_000);
        let ht = bounds.ht.as_ref().unwrap();
        let expected =
            (8.0 / 0.5_f64).powf(3.0) * 2.0_f64.powf(2.0) * (2.0 * 1e8_f64).ln() + 5.0;
        assert_relative_eq!(
            ht.rhs_feasible_suboptimal[1].unwrap(),
            expected,
            max_relative = 1e-12
        );
        assert!(ht.rhs_feasible_suboptimal[0].is_none());
    }

    #[test]
    fn classify_constrained_example() {
        // Feasible-suboptimal, deceiver (violates only the most important
        // constraint), doubly-infeasible arms around an optimal arm.
        let lv90 = level(0.90);
        let lv95 = level(0.95);
        let spec = InstanceSpec {
            arms: vec![
                gaussian(0.0, 1.0),
                gaussian(0.5, 1.0),
                gaussian(-0.5, 1.7),
                gaussian(1.0, 2.0),
            ],
            level: lv95,
            tau: None,
            constraints: Some(vec![
                AttributeConstraint {
                    estimator: AttributeKind::Cvar { alpha: lv90 },
                    threshold: 2.6,
                    rate: 0.03,
                    coord: 0,
                },
                AttributeConstraint {
                    estimator: AttributeKind::Cvar { alpha: lv95 },
                    threshold: 2.6,
                    rate: 0.02,
                    coord: 0,
                },
            ]),
        };
        let oracle = classify_constrained(&spec, AttributeKind::Mean).unwrap();
        assert!(oracle.is_feasible);
        assert_eq!(oracle.feasible_set, vec![0, 1]);
        assert_eq!(oracle.optimal_set, vec![0]);
        assert_eq!(oracle.deceiver_set, vec![2]);
        assert_eq!(oracle.g0_star, Some(0.0));
        // Arm 2 (deceiver) satisfies constraint 1, violates constraint 2.
        assert!(oracle.gap_constraint[0][2].is_none());
        assert!(oracle.gap_constraint[1][2].is_some());
        // Arm 3 violates both.
        assert!(oracle.gap_constraint[0][3].is_some());
        assert!(oracle.gap_constraint[1][3].is_some());

        let bounds = theorem5_bounds(&oracle, 0.125, &[0.03, 0.02], 20_000);
        assert!(bounds.rhs[0].is_none());
        for k in 1..4 {
            assert!(bounds.rhs[k].unwrap() > 0.0);
        }
        assert_relative_eq!(bounds.flag_error_bound, 2.0 / 20_000.0);
    }

    #[test]
    fn spec_validation() {
        let mut spec = three_arm_spec(1.0);
        spec.constraints = Some(vec![AttributeConstraint {
            estimator: AttributeKind::Mean,
            threshold: 0.0,
            rate: 1.0,
            coord: 0,
        }]);
        assert!(spec.validate().is_err()); // both modes set
        let spec = InstanceSpec { arms: vec![], level: level(0.9), tau: Some(1.0), constraints: None };
        assert!(spec.validate().is_err());
        assert!(ArmModel::Gaussian { mu: 0.0, sigma: 0.0 }.validate().is_err());
        assert!(ArmModel::Uniform { lo: 1.0, hi: 1.0 }.validate().is_err());
        assert!(ArmModel::ShiftedPareto { shape: 1.0, scale: 1.0, shift: 0.0 }
            .validate()
            .is_err());
        assert!(ArmModel::Discrete { values: vec![1.0], probs: vec![0.5] }
            .validate()
            .is_err());
    }
}
