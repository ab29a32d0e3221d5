//! Shipped experiment presets: ready-made configs for the reference
//! instances used throughout the test suite and documentation.
//!
//! Each preset is a complete TOML document (retrievable with `--preset NAME`)
//! so it can be dumped, edited, and re-run like any user config.

/// Names of all shipped presets.
pub const PRESET_NAMES: &[&str] = &[
    "feasible_3arm",
    "infeasible_3arm",
    "deceiver_2arm",
    "heavy_tail",
    "con_lcb_2constraint",
    "tradeoff",
];

/// Returns the TOML text of a shipped preset.
pub fn preset(name: &str) -> Option<&'static str> {
    match name {
        // Three sigma = 1 Gaussians with means {0.1, 0, 0.5} at alpha = 0.95:
        // CVaRs {2.1627, 2.0627, 2.5627}; tau = 2.3 keeps arms 1-2 feasible
        // and makes arm 3 infeasible-suboptimal.
        "feasible_3arm" => Some(
            r#"
[instance]
level = 0.95
tau = 2.3

[[instance.arms]]
kind = "gaussian"
mu = 0.1
sigma = 1.0

[[instance.arms]]
kind = "gaussian"
mu = 0.0
sigma = 1.0

[[instance.arms]]
kind = "gaussian"
mu = 0.5
sigma = 1.0

[policy]
name = "rc_lcb"
sigma = 1.0

[run]
horizon = 10000
reps = 200
base_seed = 20240817

[output]
dir = "out/feasible_3arm"

[analysis]
bounds = true
lower_bounds = true
"#,
        ),
        // Same arms with tau = 1.0: every CVaR exceeds tau, the instance is
        // infeasible, and the policy should converge to the min-CVaR arm.
        "infeasible_3arm" => Some(
            r#"
[instance]
level = 0.95
tau = 1.0

[[instance.arms]]
kind = "gaussian"
mu = 0.1
sigma = 1.0

[[instance.arms]]
kind = "gaussian"
mu = 0.0
sigma = 1.0

[[instance.arms]]
kind = "gaussian"
mu = 0.5
sigma = 1.0

[policy]
name = "rc_lcb"
sigma = 1.0

[run]
horizon = 20000
reps = 200
base_seed = 20240818

[output]
dir = "out/infeasible_3arm"

[analysis]
bounds = true
"#,
        ),
        // Gaussian(-0.5, 2) has the smaller mean but CVaR 3.6254 > tau = 2.5:
        // a deceiver next to the feasible Gaussian(0, 1) (CVaR 2.0627).
        "deceiver_2arm" => Some(
            r#"
[instance]
level = 0.95
tau = 2.5

[[instance.arms]]
kind = "gaussian"
mu = -0.5
sigma = 2.0

[[instance.arms]]
kind = "gaussian"
mu = 0.0
sigma = 1.0

[policy]
name = "rc_lcb"
sigma = 2.0

[run]
horizon = 20000
reps = 200
base_seed = 20240819

[output]
dir = "out/deceiver_2arm"

[analysis]
bounds = true
"#,
        ),
        // Shifted Pareto losses (shape 3: finite variance but heavy tails)
        // with E|X|^1.5 <= 4 for both arms; generous tau isolates the mean
        // machinery of the heavy-tailed policy.
        "heavy_tail" => Some(
            r#"
[instance]
level = 0.95
tau = 10.0

[[instance.arms]]
kind = "shifted_pareto"
shape = 3.0
scale = 1.0
shift = 0.0

[[instance.arms]]
kind = "shifted_pareto"
shape = 3.0
scale = 1.0
shift = 0.5

[policy]
name = "rclcb_ht"
p = 1.5
b_bound = 4.0

[run]
horizon = 10000
reps = 200
base_seed = 20240820

[output]
dir = "out/heavy_tail"

[analysis]
bounds = true
"#,
        ),
        // Four Gaussians under two CVaR constraints (levels 0.90 / 0.95,
        // thresholds 2.6): arm 1 optimal, arm 2 feasible-suboptimal, arm 3 a
        // deceiver violating only the most important constraint, arm 4
        // violating both. Rates follow a_i = 2 beta_i^2 (sub-Gaussian CVaR
        // concentration with the sigma_max = 2 calibrated constant) and
        // a_0 = 1/(2 sigma_max^2).
        "con_lcb_2constraint" => Some(
            r#"
[instance]
level = 0.95

[[instance.arms]]
kind = "gaussian"
mu = 0.0
sigma = 1.0

[[instance.arms]]
kind = "gaussian"
mu = 0.5
sigma = 1.0

[[instance.arms]]
kind = "gaussian"
mu = -0.5
sigma = 1.7

[[instance.arms]]
kind = "gaussian"
mu = 1.0
sigma = 2.0

[[instance.constraints]]
estimator = "cvar"
alpha = 0.90
threshold = 2.6
rate = 0.02

[[instance.constraints]]
estimator = "cvar"
alpha = 0.95
threshold = 2.6
rate = 0.005

[policy]
name = "con_lcb"
objective = "mean"
objective_rate = 0.125

[run]
horizon = 20000
reps = 200
base_seed = 20240821

[output]
dir = "out/con_lcb_2constraint"
"#,
        ),
        // Feasible 3-arm instance paired with a shifted (all-infeasible)
        // companion at the same tau; run across horizons to expose the
        // flag-error decay versus regret growth. Gaps are large enough
        // (0.6 mean, 0.56 risk) that every arm resolves within the smallest
        // horizon, so regret grows logarithmically across the whole sweep.
        "tradeoff" => Some(
            r#"
[instance]
level = 0.95
tau = 2.7

[[instance.arms]]
kind = "gaussian"
mu = 0.6
sigma = 1.0

[[instance.arms]]
kind = "gaussian"
mu = 0.0
sigma = 1.0

[[instance.arms]]
kind = "gaussian"
mu = 1.2
sigma = 1.0

[policy]
name = "rc_lcb"
sigma = 1.0

[run]
horizons = [1000, 4000, 16000]
reps = 200
base_seed = 20240822

[output]
dir = "out/tradeoff"

[analysis]
tradeoff = true

[[analysis.tradeoff_arms]]
kind = "gaussian"
mu = 2.9
sigma = 1.0

[[analysis.tradeoff_arms]]
kind = "gaussian"
mu = 3.0
sigma = 1.0

[[analysis.tradeoff_arms]]
kind = "gaussian"
mu = 3.4
sigma = 1.0
"#,
        ),
        _ => None,
    }
}
