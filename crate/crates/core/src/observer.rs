//! How an observer holding predicted policies would judge observed behavior.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{sample_paths, Mdp, OccupancyMeasure, PathSample, Policy};

/// Consistency slack between an occupancy and the policy it claims to induce.
pub const CONSISTENCY_TOLERANCE: f64 = 1e-6;

/// Real number extended with explicit infinities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtReal {
    NegInfinity,
    Finite(f64),
    PosInfinity,
}

impl ExtReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            _ => None,
        }
    }

    /// `f64` view; infinities map to the IEEE infinities.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::NegInfinity => f64::NEG_INFINITY,
            ExtReal::Finite(v) => v,
            ExtReal::PosInfinity => f64::INFINITY,
        }
    }

}

impl std::ops::Neg for ExtReal {
    type Output = Self;

    fn neg(self) -> Self {
        match self {
            ExtReal::NegInfinity => ExtReal::PosInfinity,
            ExtReal::Finite(v) => ExtReal::Finite(-v),
            ExtReal::PosInfinity => ExtReal::NegInfinity,
        }
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.to_f64().partial_cmp(&other.to_f64())
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::NegInfinity => f.write_str("-inf"),
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::PosInfinity => f.write_str("+inf"),
        }
    }
}

fn check_shapes(x: &OccupancyMeasure, policies: &[&Policy]) -> Result<()> {
    for p in policies {
        if p.num_states() != x.num_states() || (0..x.num_states()).any(|s| p.row(s).len() != x.row(s).len()) {
            return Err(Error::InvalidArgument("policy and occupancy have different shapes".into()));
        }
    }
    Ok(())
}

fn check_consistent(x: &OccupancyMeasure, pi: &Policy) -> Result<()> {
    for s in 0..x.num_states() {
        let nu = x.state_total(s);
        for (a, &v) in x.row(s).iter().enumerate() {
            let gap = (v - pi.prob(s, a) * nu).abs();
            if gap > CONSISTENCY_TOLERANCE * nu.max(1.0) {
                return Err(Error::InvalidArgument(format!(
                    "occupancy is inconsistent with the policy at state {s}, action {a} (gap {gap:.3e})"
                )));
            }
        }
    }
    Ok(())
}

/// Path-distribution KL divergence via `sum x log(pi / (predicted + eps))`.
pub fn kl_path_divergence(x: &OccupancyMeasure, pi: &Policy, predicted: &Policy, epsilon: f64) -> Result<ExtReal> {
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::InvalidArgument(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    check_shapes(x, &[pi, predicted])?;
    check_consistent(x, pi)?;
    let mut total = 0.0;
    for s in 0..x.num_states() {
        for (a, &v) in x.row(s).iter().enumerate() {
            let p = pi.prob(s, a);
            if v <= 0.0 || p <= 0.0 {
                continue;
            }
            let q = predicted.prob(s, a) + epsilon;
            if q <= 0.0 {
                return Ok(ExtReal::PosInfinity);
            }
            total += v * (p / q).ln();
        }
    }
    Ok(ExtReal::Finite(total))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeceptivenessReport {
    /// `KL(paths under pi || paths under predicted[i])`.
    pub kl: Vec<ExtReal>,
    /// `sum x log((predicted[i] + eps) / (predicted[true] + eps))`.
    pub relative: Vec<f64>,
    pub exaggeration: f64,
    pub ambiguity: ExtReal,
    /// Index maximizing `relative`, smallest on ties.
    pub most_likely: usize,
}

/// Weighted log-ratio of two smoothed predictions under the occupancy `x`.
fn relative_likelihood(x: &OccupancyMeasure, decoy: &Policy, truth: &Policy, epsilon: f64) -> f64 {
    let mut total = 0.0;
    for s in 0..x.num_states() {
        for (a, &v) in x.row(s).iter().enumerate() {
            if v > 0.0 {
                total += v * ((decoy.prob(s, a) + epsilon) / (truth.prob(s, a) + epsilon)).ln();
            }
        }
    }
    total
}

fn build_report(
    x: &OccupancyMeasure,
    pi: &Policy,
    predicted: &[Policy],
    true_index: usize,
    epsilon: f64,
) -> Result<DeceptivenessReport> {
    if predicted.is_empty() || true_index >= predicted.len() {
        return Err(Error::InvalidArgument(format!(
            "true index {true_index} out of range for {} predictions",
            predicted.len()
        )));
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::InvalidArgument("deceptiveness needs epsilon > 0".into()));
    }
    let kl = predicted.iter().map(|p| kl_path_divergence(x, pi, p, epsilon)).collect::<Result<Vec<_>>>()?;
    let relative: Vec<f64> =
        predicted.iter().map(|p| relative_likelihood(x, p, &predicted[true_index], epsilon)).collect();
    let mut most_likely = 0;
    for (i, &r) in relative.iter().enumerate() {
        if r > relative[most_likely] {
            most_likely = i;
        }
    }
    let worst = kl.iter().copied().fold(ExtReal::NegInfinity, |m, v| if v > m { v } else { m });
    Ok(DeceptivenessReport { exaggeration: relative[most_likely], ambiguity: -worst, kl, relative, most_likely })
}

/// Report whose headline is the exaggeration score
/// `max_i sum x log((predicted[i] + eps) / (predicted[true] + eps))`.
pub fn deceptiveness_exaggeration(
    x: &OccupancyMeasure,
    pi: &Policy,
    predicted: &[Policy],
    true_index: usize,
    epsilon: f64,
) -> Result<DeceptivenessReport> {
    build_report(x, pi, predicted, true_index, epsilon)
}

/// Report whose headline is the ambiguity score `-max_i KL_i`.
pub fn deceptiveness_ambiguity(
    x: &OccupancyMeasure,
    pi: &Policy,
    predicted: &[Policy],
    epsilon: f64,
) -> Result<DeceptivenessReport> {
    build_report(x, pi, predicted, 0, epsilon)
}

fn log_factor(p: f64) -> Option<f64> {
    (p > 0.0).then(|| p.ln())
}

/// Absolute log-likelihood of a path, including the initial and transition factors.
pub fn path_log_likelihood(path: &PathSample, policy: &Policy, mdp: &Mdp) -> ExtReal {
    let mut states = path.states();
    let Some(first) = states.next() else { return ExtReal::NegInfinity };
    let Some(mut total) = log_factor(mdp.initial()[first]) else { return ExtReal::NegInfinity };
    let mut next_states = path.states().skip(1);
    for &(s, a) in &path.steps {
        let next = next_states.next().expect("terminal state follows the last step");
        match (log_factor(policy.prob(s, a)), log_factor(mdp.transition_prob(s, a, next))) {
            (Some(p), Some(q)) => total += p + q,
            _ => return ExtReal::NegInfinity,
        }
    }
    ExtReal::Finite(total)
}

/// Policy-only log-likelihood; transition and initial factors are dropped.
fn policy_log_likelihood(path: &PathSample, policy: &Policy) -> ExtReal {
    let mut total = 0.0;
    for &(s, a) in &path.steps {
        match log_factor(policy.prob(s, a)) {
            Some(v) => total += v,
            None => return ExtReal::NegInfinity,
        }
    }
    ExtReal::Finite(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hypothesis {
    First,
    Second,
}

/// Likelihood-ratio test: `First` iff `sum log Pr(path | first) - sum log Pr(path | second) >= threshold`.
pub fn likelihood_ratio_decision(
    paths: &[PathSample],
    first: &Policy,
    second: &Policy,
    threshold: f64,
) -> Result<Hypothesis> {
    if threshold.is_nan() || threshold < 0.0 {
        return Err(Error::InvalidArgument(format!("threshold must be nonnegative, got {threshold}")));
    }
    let (mut a, mut b) = (0.0, 0.0);
    let (mut a_impossible, mut b_impossible) = (false, false);
    for path in paths {
        match policy_log_likelihood(path, first) {
            ExtReal::Finite(v) => a += v,
            _ => a_impossible = true,
        }
        match policy_log_likelihood(path, second) {
            ExtReal::Finite(v) => b += v,
            _ => b_impossible = true,
        }
    }
    match (a_impossible, b_impossible) {
        (true, true) => Err(Error::InvalidArgument("observed paths are impossible under both hypotheses".into())),
        (true, false) => Ok(Hypothesis::Second),
        (false, true) => Ok(Hypothesis::First),
        (false, false) => Ok(if a - b >= threshold { Hypothesis::First } else { Hypothesis::Second }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlEstimate {
    pub estimate: ExtReal,
    pub stderr: f64,
    /// Paths that contributed to the mean.
    pub used: usize,
    pub truncated: usize,
    /// More than 10% of paths hit the horizon cap.
    pub truncation_warning: bool,
}

/// Monte-Carlo estimate of the path KL divergence from sampled trajectories.
pub fn estimate_kl_monte_carlo(
    mdp: &Mdp,
    pi: &Policy,
    predicted: &Policy,
    n: usize,
    seed: u64,
    horizon_cap: usize,
) -> Result<KlEstimate> {
    if n < 100 {
        return Err(Error::InvalidArgument(format!("need at least 100 paths, got {n}")));
    }
    let paths = sample_paths(mdp, pi, n, seed, horizon_cap)?;
    let mut samples = Vec::with_capacity(n);
    let mut truncated = 0;
    for path in &paths {
        if path.truncated {
            truncated += 1;
            continue;
        }
        let own = policy_log_likelihood(path, pi);
        match (own, policy_log_likelihood(path, predicted)) {
            (ExtReal::Finite(p), ExtReal::Finite(q)) => samples.push(p - q),
            (ExtReal::Finite(_), _) => {
                return Ok(KlEstimate {
                    estimate: ExtReal::PosInfinity,
                    stderr: f64::INFINITY,
                    used: samples.len(),
                    truncated,
                    truncation_warning: truncated * 10 > n,
                })
            }
            _ => unreachable!("sampled paths have positive probability under the sampling policy"),
        }
    }
    let used = samples.len();
    let truncation_warning = truncated * 10 > n;
    if used == 0 {
        return Ok(KlEstimate { estimate: ExtReal::Finite(f64::NAN), stderr: f64::NAN, used, truncated, truncation_warning });
    }
    let mean = samples.iter().sum::<f64>() / used as f64;
    let var = if used > 1 {
        samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (used - 1) as f64
    } else {
        0.0
    };
    Ok(KlEstimate {
        estimate: ExtReal::Finite(mean),
        stderr: (var / used as f64).sqrt(),
        used,
        truncated,
        truncation_warning,
    })
}
