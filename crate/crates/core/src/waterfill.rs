//! Exact weighted water-filling.
//!
//! Solves
//!
//! ```text
//! maximise   Σ_k log2(1 + g_k q_k)
//! subject to Σ_k c_k q_k ≤ P,  q ≥ 0
//! ```
//!
//! The stationarity condition gives `q_k = [1/(λ c_k) − 1/g_k]_+`. Writing
//! `μ = 1/λ`, the active users are a prefix of the list sorted by the
//! activation threshold `c_k/g_k`, and on a prefix of size `m` the budget
//! fixes `μ = (P + Σ_{active} c_k/g_k) / m`. The solver picks the largest
//! prefix whose last member still gets positive power.
//!
//! ZF uses unit gains with weights `α_k`; DPC uses gains `r_kk²` with unit
//! weights.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};

/// Relative threshold below which a gain is treated as exactly zero.
pub const DEFAULT_ZERO_GAIN_THRESHOLD: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq)]
pub struct WaterfillProblem {
    pub gains: Vec<f64>,
    pub weights: Vec<f64>,
    pub budget: f64,
    /// Gains below `zero_gain_threshold · max(gains)` get no power.
    pub zero_gain_threshold: f64,
}

impl WaterfillProblem {
    pub fn new(gains: Vec<f64>, weights: Vec<f64>, budget: f64) -> Self {
        WaterfillProblem {
            gains,
            weights,
            budget,
            zero_gain_threshold: DEFAULT_ZERO_GAIN_THRESHOLD,
        }
    }

    /// Unit weights.
    pub fn with_gains(gains: Vec<f64>, budget: f64) -> Self {
        let k = gains.len();
        Self::new(gains, vec![1.0; k], budget)
    }

    /// Unit gains.
    pub fn with_weights(weights: Vec<f64>, budget: f64) -> Self {
        let k = weights.len();
        Self::new(vec![1.0; k], weights, budget)
    }

    pub fn validate(&self) -> Result<()> {
        if self.gains.is_empty() {
            return Err(Error::invalid("gains", "problem has no users"));
        }
        if self.gains.len() != self.weights.len() {
            return Err(Error::invalid(
                "weights",
                format!("{} weights for {} gains", self.weights.len(), self.gains.len()),
            ));
        }
        if !self.budget.is_finite() || self.budget <= 0.0 {
            return Err(Error::invalid(
                "budget",
                format!("must be positive and finite, got {}", self.budget),
            ));
        }
        if let Some(g) = self.gains.iter().find(|g| !g.is_finite() || **g < 0.0) {
            return Err(Error::invalid(
                "gains",
                format!("must be finite and non-negative, got {g}"),
            ));
        }
        if let Some(c) = self.weights.iter().find(|c| !c.is_finite() || **c <= 0.0) {
            return Err(Error::invalid(
                "weights",
                format!("must be finite and positive, got {c}"),
            ));
        }
        if !(self.zero_gain_threshold >= 0.0) {
            return Err(Error::invalid("zero_gain_threshold", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    /// Per-user symbol power.
    pub q: Vec<f64>,
    /// Per-user rate in bits per channel use.
    pub rates: Vec<f64>,
    pub sum_rate: f64,
    /// Lagrange multiplier λ* of the budget constraint in
    /// `q_k = [1/(λ c_k) − 1/g_k]_+`; infinite when no user can be served.
    pub water_level_dual: f64,
}

impl PowerAllocation {
    /// `Σ_k c_k q_k`
    pub fn spent(&self, weights: &[f64]) -> f64 {
        self.q.iter().zip(weights).map(|(q, c)| q * c).sum()
    }
}

#[inline]
pub(crate) fn rate(gain: f64, power: f64) -> f64 {
    (gain * power).ln_1p() / LN_2
}

pub fn solve_waterfill(p: &WaterfillProblem) -> Result<PowerAllocation> {
    p.validate()?;
    let k = p.gains.len();
    let gmax = p.gains.iter().cloned().fold(0.0, f64::max);
    let floor = p.zero_gain_threshold * gmax;

    // activation thresholds c_k / g_k of the servable users, ascending
    let mut order: Vec<(usize, f64)> = (0..k)
        .filter(|&i| p.gains[i] > 0.0 && p.gains[i] >= floor)
        .map(|i| (i, p.weights[i] / p.gains[i]))
        .collect();
    order.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));

    let mut q = vec![0.0; k];
    if order.is_empty() {
        return Ok(PowerAllocation {
            q,
            rates: vec![0.0; k],
            sum_rate: 0.0,
            water_level_dual: f64::INFINITY,
        });
    }

    let mut acc = 0.0;
    let mut level = 0.0;
    for (m, &(_, threshold)) in order.iter().enumerate() {
        let candidate = (p.budget + acc + threshold) / (m + 1) as f64;
        if candidate <= threshold {
            break;
        }
        acc += threshold;
        level = candidate;
    }
    // the first user is always active since P > 0
    debug_assert!(level > 0.0);

    for &(i, threshold) in &order {
        if level > threshold {
            q[i] = (level - threshold) / p.weights[i];
        }
    }
    let rates: Vec<f64> = (0..k).map(|i| rate(p.gains[i], q[i])).collect();
    let sum_rate = rates.iter().sum();
    Ok(PowerAllocation {
        q,
        rates,
        sum_rate,
        water_level_dual: 1.0 / level,
    })
}
