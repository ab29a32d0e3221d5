//! Information-theoretic per-arm pull lower bounds for Gaussian arm classes.
//!
//! For a non-optimal arm `k`, any consistent policy must satisfy
//! `liminf E[N_k(T)]/log T >= 1/eta`, where `eta` is the smallest KL
//! divergence needed to move the arm into a confusing position:
//!
//! * feasible instances — `eta_f = inf KL(nu(k), nu')` over perturbations
//!   with mean below `mu*` that remain risk-feasible (`c_alpha(nu') <= tau`);
//! * infeasible instances — `eta_i = inf KL(nu(k), nu')` over perturbations
//!   whose CVaR drops below `c_alpha*`, which coincides with the pure
//!   CVaR-minimization bound (the constraint adds nothing).
//!
//! Both infima run over open regions; KL is continuous in the Gaussian
//! parameters, so the value is attained as a limit at the closed boundary and
//! reported with the boundary minimizer. Fixed-variance classes admit closed
//! forms; free-variance classes are solved by a grid search with local
//! refinement to `1e-6` on eta.

use serde::Serialize;
use thiserror::Error;

use crate::instances::gaussian_kappa;
use crate::risk_core::RiskLevel;

#[derive(Debug, Error)]
pub enum LowerBoundError {
    #[error("invalid Gaussian class: {0}")]
    BadClass(String),
    #[error("invalid arm parameters: {0}")]
    BadArm(String),
}

/// Class of candidate perturbed distributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ClassMode {
    FixedSigma { sigma: f64 },
    FreeSigma { sigma_min: f64, sigma_max: f64 },
}

/// A Gaussian arm class: variance mode plus a closed mean interval for the
/// search region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianClass {
    pub mode: ClassMode,
    pub mean_range: (f64, f64),
}

impl GaussianClass {
    pub fn fixed(sigma: f64, mean_range: (f64, f64)) -> Result<Self, LowerBoundError> {
        let cls = Self { mode: ClassMode::FixedSigma { sigma }, mean_range };
        cls.validate()?;
        Ok(cls)
    }

    pub fn free(
        sigma_min: f64,
        sigma_max: f64,
        mean_range: (f64, f64),
    ) -> Result<Self, LowerBoundError> {
        let cls = Self { mode: ClassMode::FreeSigma { sigma_min, sigma_max }, mean_range };
        cls.validate()?;
        Ok(cls)
    }

    pub fn validate(&self) -> Result<(), LowerBoundError> {
        match self.mode {
            ClassMode::FixedSigma { sigma } => {
                if !(sigma > 0.0) {
                    return Err(LowerBoundError::BadClass(format!(
                        "sigma must be > 0, got {sigma}"
                    )));
                }
            }
            ClassMode::FreeSigma { sigma_min, sigma_max } => {
                if !(sigma_min > 0.0 && sigma_min <= sigma_max) {
                    return Err(LowerBoundError::BadClass(format!(
                        "need 0 < sigma_min <= sigma_max, got [{sigma_min}, {sigma_max}]"
                    )));
                }
            }
        }
        if !(self.mean_range.0 < self.mean_range.1) {
            return Err(LowerBoundError::BadClass(format!(
                "mean_range must be a nonempty interval, got {:?}",
                self.mean_range
            )));
        }
        Ok(())
    }
}

/// Result of an eta computation. `eta = inf` marks an empty confusion region
/// (no perturbation in the class can confuse the arm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EtaResult {
    pub eta: f64,
    /// Boundary minimizer (mu', sigma') when the region is nonempty.
    pub minimizer: Option<(f64, f64)>,
    /// `1/eta`; infinite when eta = 0, zero when the region is empty.
    pub lower_bound_coefficient: f64,
}

impl EtaResult {
    fn from_eta(eta: f64, minimizer: Option<(f64, f64)>) -> Self {
        let coefficient = if eta.is_infinite() { 0.0 } else { 1.0 / eta };
        EtaResult { eta, minimizer, lower_bound_coefficient: coefficient }
    }

    fn empty_region() -> Self {
        EtaResult { eta: f64::INFINITY, minimizer: None, lower_bound_coefficient: 0.0 }
    }
}

/// KL divergence between `N(mu1, sigma1^2)` and `N(mu2, sigma2^2)`:
/// `log(sigma2/sigma1) + (sigma1^2 + (mu1-mu2)^2)/(2 sigma2^2) - 1/2`.
pub fn kl_gaussian(mu1: f64, sigma1: f64, mu2: f64, sigma2: f64) -> f64 {
    (sigma2 / sigma1).ln() + (sigma1 * sigma1 + (mu1 - mu2) * (mu1 - mu2)) / (2.0 * sigma2 * sigma2)
        - 0.5
}

/// Minimizes `f` over the class region `{(mu, sigma)}` intersected with
/// `admissible`, by coarse grid plus window-shrinking refinement.
fn grid_minimize(
    cls: &GaussianClass,
    admissible: impl Fn(f64, f64) -> bool,
    f: impl Fn(f64, f64) -> f64,
    tol: f64,
) -> Option<(f64, (f64, f64))> {
    let (sig_lo, sig_hi) = match cls.mode {
        ClassMode::FixedSigma { sigma } => (sigma, sigma),
        ClassMode::FreeSigma { sigma_min, sigma_max } => (sigma_min, sigma_max),
    };
    let mut mu_window = cls.mean_range;
    let mut sig_window = (sig_lo, sig_hi);
    let mut best: Option<(f64, (f64, f64))> = None;
    let steps = 201;
    loop {
        let mut local_best: Option<(f64, (f64, f64))> = None;
        for i in 0..steps {
            let mu = mu_window.0
                + (mu_window.1 - mu_window.0) * i as f64 / (steps - 1) as f64;
            let sig_steps = if sig_window.0 == sig_window.1 { 1 } else { steps };
            for j in 0..sig_steps {
                let sigma = if sig_steps == 1 {
                    sig_window.0
                } else {
                    sig_window.0
                        + (sig_window.1 - sig_window.0) * j as f64 / (sig_steps - 1) as f64
                };
                if !admissible(mu, sigma) {
                    continue;
                }
                let val = f(mu, sigma);
                if local_best.map_or(true, |(b, _)| val < b) {
                    local_best = Some((val, (mu, sigma)));
                }
            }
        }
        let (val, (mu, sigma)) = local_best?;
        let converged = best.is_some_and(|(prev, _)| (prev - val).abs() < tol);
        best = Some((val, (mu, sigma)));
        if converged {
            return best;
        }
        // Shrink both windows around the current minimizer.
        let mu_half = (mu_window.1 - mu_window.0) * 0.05;
        mu_window = (
            (mu - mu_half).max(cls.mean_range.0),
            (mu + mu_half).min(cls.mean_range.1),
        );
        if sig_window.0 < sig_window.1 {
            let sig_half = (sig_window.1 - sig_window.0) * 0.05;
            sig_window = ((sigma - sig_half).max(sig_lo), (sigma + sig_half).min(sig_hi));
        }
    }
}

/// Confusion exponent for a feasible-instance arm: smallest KL to a
/// perturbation with `mu' < mu*` and `c_alpha' <= tau` inside the class.
pub fn eta_feasible(
    arm_mu: f64,
    arm_sigma: f64,
    mu_star: f64,
    tau: f64,
    level: RiskLevel,
    cls: &GaussianClass,
) -> Result<EtaResult, LowerBoundError> {
    cls.validate()?;
    if !(arm_sigma > 0.0) {
        return Err(LowerBoundError::BadArm(format!("sigma must be > 0, got {arm_sigma}")));
    }
    let kappa = gaussian_kappa(level);
    match cls.mode {
        ClassMode::FixedSigma { sigma } => {
            // Admissible means: mu' <= m0 = min(mu*, tau - sigma*kappa)
            // (open at mu*, closed at the CVaR boundary; the infimum is the
            // boundary limit either way).
            let m0 = mu_star.min(tau - sigma * kappa);
            if m0 < cls.mean_range.0 {
                return Ok(EtaResult::empty_region());
            }
            let target = arm_mu.min(m0);
            let eta = if (sigma - arm_sigma).abs() < 1e-15 {
                // Same-variance class: KL reduces to (mu - mu')^2/(2 sigma^2).
                (arm_mu - target).max(0.0).powi(2) / (2.0 * sigma * sigma)
            } else {
                kl_gaussian(arm_mu, arm_sigma, target, sigma)
            };
            Ok(EtaResult::from_eta(eta, Some((target, sigma))))
        }
        ClassMode::FreeSigma { .. } => {
            let admissible = |mu: f64, sigma: f64| mu <= mu_star && mu + sigma * kappa <= tau;
            match grid_minimize(
                cls,
                admissible,
                |mu, sigma| kl_gaussian(arm_mu, arm_sigma, mu, sigma),
                1e-6,
            ) {
                Some((eta, at)) => Ok(EtaResult::from_eta(eta, Some(at))),
                None => Ok(EtaResult::empty_region()),
            }
        }
    }
}

/// Confusion exponent for an infeasible-instance arm: smallest KL to a
/// perturbation with `c_alpha' < c_alpha*`. Identical to the unconstrained
/// pure-CVaR-minimization exponent.
pub fn eta_infeasible(
    arm_mu: f64,
    arm_sigma: f64,
    cvar_star: f64,
    level: RiskLevel,
    cls: &GaussianClass,
) -> Result<EtaResult, LowerBoundError> {
    cls.validate()?;
    if !(arm_sigma > 0.0) {
        return Err(LowerBoundError::BadArm(format!("sigma must be > 0, got {arm_sigma}")));
    }
    let kappa = gaussian_kappa(level);
    match cls.mode {
        ClassMode::FixedSigma { sigma } => {
            // mu' < cvar_star - sigma*kappa; boundary limit at equality.
            let m0 = cvar_star - sigma * kappa;
            if m0 < cls.mean_range.0 {
                return Ok(EtaResult::empty_region());
            }
            let target = arm_mu.min(m0);
            let eta = if (sigma - arm_sigma).abs() < 1e-15 {
                // Delta_risk^2 / (2 sigma^2) when the arm's CVaR exceeds c*.
                (arm_mu - target).max(0.0).powi(2) / (2.0 * sigma * sigma)
            } else {
                kl_gaussian(arm_mu, arm_sigma, target, sigma)
            };
            Ok(EtaResult::from_eta(eta, Some((target, sigma))))
        }
        ClassMode::FreeSigma { .. } => {
            let admissible = |mu: f64, sigma: f64| mu + sigma * kappa <= cvar_star;
            match grid_minimize(
                cls,
                admissible,
                |mu, sigma| kl_gaussian(arm_mu, arm_sigma, mu, sigma),
                1e-6,
            ) {
                Some((eta, at)) => Ok(EtaResult::from_eta(eta, Some(at))),
                None => Ok(EtaResult::empty_region()),
            }
        }
    }
}

/// Pure CVaR-minimization confusion exponent (no feasibility constraint);
/// equals [`eta_infeasible`] by construction and exists as an explicit
/// cross-check target.
pub fn eta_pure_cvar_min(
    arm_mu: f64,
    arm_sigma: f64,
    cvar_star: f64,
    level: RiskLevel,
    cls: &GaussianClass,
) -> Result<EtaResult, LowerBoundError> {
    eta_infeasible(arm_mu, arm_sigma, cvar_star, level, cls)
}

/// Asymptotic per-arm pull benchmark `log(T)/eta`. Infinite-eta markers
/// (empty confusion region) yield 0; zero eta (no gap) yields infinity. A
/// reference line only, never asserted against finite-T pull counts.
pub fn theorem4_lower_bound(eta: &EtaResult, horizon: usize) -> f64 {
    if eta.eta.is_infinite() {
        return 0.0;
    }
    (horizon as f64).ln() / eta.eta
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn level(alpha: f64) -> RiskLevel {
        RiskLevel::new(alpha).unwrap()
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_gaussian(0.3, 1.2, 0.3, 1.2), 0.0);
        assert_relative_eq!(kl_gaussian(0.5, 1.0, 0.0, 1.0), 0.125, max_relative = 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let mu1 = rng.gen_range(-3.0..3.0);
            let mu2 = rng.gen_range(-3.0..3.0);
            let s1 = rng.gen_range(0.1..3.0);
            let s2 = rng.gen_range(0.1..3.0);
            assert!(kl_gaussian(mu1, s1, mu2, s2) >= 0.0);
        }
    }

    #[test]
    fn kl_matches_numeric_integration() {
        // Gauss-Legendre style oracle: integrate p1 * log(p1/p2) with fine
        // trapezoids over +/- 12 combined std devs.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let mu1: f64 = rng.gen_range(-2.0..2.0);
            let mu2: f64 = rng.gen_range(-2.0..2.0);
            let s1: f64 = rng.gen_range(0.3..2.0);
            let s2: f64 = rng.gen_range(0.3..2.0);
            let lo = (mu1 - 12.0 * s1).min(mu2 - 12.0 * s2);
            let hi = (mu1 + 12.0 * s1).max(mu2 + 12.0 * s2);
            let n = 200_000;
            let h = (hi - lo) / n as f64;
            let logp = |x: f64, mu: f64, s: f64| {
                -((x - mu) * (x - mu)) / (2.0 * s * s) - s.ln()
            };
            let f = |x: f64| {
                let lp1 = logp(x, mu1, s1);
                let lp2 = logp(x, mu2, s2);
                let p1 = lp1.exp() / (2.0 * std::f64::consts::PI).sqrt();
                p1 * (lp1 - lp2)
            };
            let mut acc = 0.5 * (f(lo) + f(hi));
            for i in 1..n {
                acc += f(lo + i as f64 * h);
            }
            let numeric = acc * h;
            assert_relative_eq!(
                kl_gaussian(mu1, s1, mu2, s2),
                numeric,
                max_relative = 1e-8,
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn eta_feasible_closed_form_example() {
        // mu = 0.1, sigma = 1, mu* = 0, tau huge: eta = 0.1^2/2 = 0.005.
        let cls = GaussianClass::fixed(1.0, (-10.0, 10.0)).unwrap();
        let r = eta_feasible(0.1, 1.0, 0.0, 1e6, level(0.95), &cls).unwrap();
        assert_relative_eq!(r.eta, 0.005, max_relative = 1e-12);
        assert_relative_eq!(r.lower_bound_coefficient, 200.0, max_relative = 1e-12);
        assert_eq!(r.minimizer, Some((0.0, 1.0)));
    }

    #[test]
    fn eta_feasible_zero_gap_marker() {
        let cls = GaussianClass::fixed(1.0, (-10.0, 10.0)).unwrap();
        let r = eta_feasible(0.0, 1.0, 0.0, 1e6, level(0.95), &cls).unwrap();
        assert_eq!(r.eta, 0.0);
        assert!(r.lower_bound_coefficient.is_infinite());
    }

    #[test]
    fn eta_feasible_grid_agrees_with_closed_form() {
        // Free-sigma class pinched to a near-point sigma interval serves as
        // an independent grid oracle for the closed form.
        let lv = level(0.95);
        let cls_closed = GaussianClass::fixed(1.0, (-10.0, 10.0)).unwrap();
        let cls_grid = GaussianClass::free(1.0, 1.0 + 1e-12, (-10.0, 10.0)).unwrap();
        for &(mu, mu_star, tau) in
            &[(0.1, 0.0, 1e6), (0.5, 0.0, 1.0), (1.0, 0.3, 2.4), (0.7, -0.2, 1.8)]
        {
            let a = eta_feasible(mu, 1.0, mu_star, tau, lv, &cls_closed).unwrap();
            let b = eta_feasible(mu, 1.0, mu_star, tau, lv, &cls_grid).unwrap();
            assert_relative_eq!(a.eta, b.eta, max_relative = 1e-4, epsilon = 1e-6);
            assert!(b.eta >= a.eta - 1e-6, "grid {} beat closed form {}", b.eta, a.eta);
        }
    }

    #[test]
    fn binding_tau_increases_eta() {
        // Tightening tau below what mu* alone requires strictly increases the
        // confusion cost, pointwise over a grid.
        let lv = level(0.95);
        let kappa = gaussian_kappa(lv);
        let cls = GaussianClass::fixed(1.0, (-50.0, 50.0)).unwrap();
        for i in 0..20 {
            let mu = 0.05 + 0.1 * i as f64;
            let loose = eta_feasible(mu, 1.0, 0.0, 1e9, lv, &cls).unwrap();
            // tau binding: tau - sigma*kappa = -0.5 < mu* = 0.
            let tau = kappa - 0.5;
            let tight = eta_feasible(mu, 1.0, 0.0, tau, lv, &cls).unwrap();
            assert!(
                tight.eta > loose.eta,
                "mu = {mu}: tight {} <= loose {}",
                tight.eta,
                loose.eta
            );
        }
    }

    #[test]
    fn eta_feasible_empty_region() {
        // mean_range excludes every admissible mean.
        let cls = GaussianClass::fixed(1.0, (5.0, 10.0)).unwrap();
        let r = eta_feasible(6.0, 1.0, 0.0, 1e6, level(0.95), &cls).unwrap();
        assert!(r.eta.is_infinite());
        assert_eq!(r.lower_bound_coefficient, 0.0);
        assert_eq!(theorem4_lower_bound(&r, 1000), 0.0);
    }

    #[test]
    fn eta_infeasible_examples() {
        let lv = level(0.95);
        let kappa = gaussian_kappa(lv);
        let cls = GaussianClass::fixed(1.0, (-50.0, 50.0)).unwrap();
        // Delta_risk = 0.5, sigma = 1: eta = 0.125, coefficient 8.
        let cvar_star = 0.0 + kappa; // optimal arm N(0, 1)
        let r = eta_infeasible(0.5, 1.0, cvar_star, lv, &cls).unwrap();
        assert_relative_eq!(r.eta, 0.125, max_relative = 1e-12);
        assert_relative_eq!(r.lower_bound_coefficient, 8.0, max_relative = 1e-12);
        // Optimal arm: zero eta, infinite coefficient.
        let opt = eta_infeasible(0.0, 1.0, cvar_star, lv, &cls).unwrap();
        assert_eq!(opt.eta, 0.0);
        assert!(opt.lower_bound_coefficient.is_infinite());
        // Equality with the unconstrained pure-CVaR-minimization exponent.
        let pure = eta_pure_cvar_min(0.5, 1.0, cvar_star, lv, &cls).unwrap();
        assert!((r.eta - pure.eta).abs() < 1e-6);
    }

    #[test]
    fn free_sigma_widening_never_increases_eta() {
        let lv = level(0.95);
        let fixed = GaussianClass::fixed(1.0, (-10.0, 10.0)).unwrap();
        let free = GaussianClass::free(0.5, 2.0, (-10.0, 10.0)).unwrap();
        let kappa = gaussian_kappa(lv);
        let cvar_star = kappa;
        let a = eta_infeasible(0.5, 1.0, cvar_star, lv, &fixed).unwrap();
        let b = eta_infeasible(0.5, 1.0, cvar_star, lv, &free).unwrap();
        assert!(b.eta <= a.eta + 1e-6, "free {} > fixed {}", b.eta, a.eta);
    }

    #[test]
    fn theorem4_examples() {
        let r = EtaResult { eta: 0.005, minimizer: None, lower_bound_coefficient: 200.0 };
        assert_relative_eq!(
            theorem4_lower_bound(&r, 10_000),
            10_000.0_f64.ln() / 0.005,
            max_relative = 1e-12
        );
        assert_relative_eq!(theorem4_lower_bound(&r, 10_000), 1842.068, max_relative = 1e-6);
        // Doubling T adds exactly log(2)/eta.
        let d =
            theorem4_lower_bound(&r, 20_000) - theorem4_lower_bound(&r, 10_000);
        assert_relative_eq!(d, 2.0_f64.ln() / 0.005, max_relative = 1e-9);
    }

    #[test]
    fn class_validation() {
        assert!(GaussianClass::fixed(0.0, (-1.0, 1.0)).is_err());
        assert!(GaussianClass::fixed(1.0, (1.0, -1.0)).is_err());
        assert!(GaussianClass::free(2.0, 1.0, (-1.0, 1.0)).is_err());
        let cls = GaussianClass::fixed(1.0, (-1.0, 1.0)).unwrap();
        assert!(eta_feasible(0.0, -1.0, 0.0, 1.0, level(0.9), &cls).is_err());
    }
}
