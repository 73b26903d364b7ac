//! Dynamic penalty schedule.
//!
//! The run starts with a small penalty (a fraction of the threshold) so that
//! early sweeps reduce `f` rather than the factor gap. While the relative
//! decrease of `f` keeps improving, γ follows its geometric trend; otherwise it
//! reverts to the value from two steps back. Once `f` plateaus (or the overall
//! stopping statistic fires) the factors are averaged into `W`, γ is set to
//! the threshold at `(W, W)`, and the solver continues with that fixed γ.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::problem::{objective, FactorPair, Network};
use crate::solver::gamma_threshold;

/// Penalty used whenever the threshold evaluates to zero (`f = 0` already).
pub const DEGENERATE_GAMMA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleConfig {
    /// Multiplier on the threshold for the first exploratory γ.
    pub warm_factor: f64,
    /// Relative change of `f` below which the exploratory phase ends.
    pub plateau_tol: f64,
    /// γ never drops below `gamma_floor_ratio × γ⁽⁰⁾`.
    pub gamma_floor_ratio: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            warm_factor: 5e-3,
            plateau_tol: 1e-2,
            gamma_floor_ratio: 1e-12,
        }
    }
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("warm_factor", self.warm_factor),
            ("plateau_tol", self.plateau_tol),
            ("gamma_floor_ratio", self.gamma_floor_ratio),
        ] {
            if value <= 0.0 || !value.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {value}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Exploratory,
    Restarted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleState {
    phase: Phase,
    gamma_prev: f64,
    gamma_prev2: f64,
    gamma_floor: f64,
    plateau_tol: f64,
    f_history: VecDeque<f64>,
}

impl ScheduleState {
    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// γ⁽ᵖ⁻¹⁾.
    pub fn gamma_prev(&self) -> f64 {
        self.gamma_prev
    }

    /// γ⁽ᵖ⁻²⁾.
    pub fn gamma_prev2(&self) -> f64 {
        self.gamma_prev2
    }

    pub fn f_history(&self) -> impl Iterator<Item = f64> + '_ {
        self.f_history.iter().copied()
    }

    /// Appends `f` of the newest iterate, keeping the last three values.
    pub fn record_f(&mut self, f: f64) {
        self.f_history.push_back(f);
        while self.f_history.len() > 3 {
            self.f_history.pop_front();
        }
    }

    pub fn push_gamma(&mut self, gamma: f64) {
        self.gamma_prev2 = self.gamma_prev;
        self.gamma_prev = gamma;
    }

    pub fn mark_restarted(&mut self) {
        self.phase = Phase::Restarted;
    }

    /// γ for the next exploratory sweep from the last three `f` values.
    ///
    /// # Panics
    ///
    /// If fewer than three `f` values have been recorded.
    pub fn next_gamma(&self) -> f64 {
        assert!(self.f_history.len() == 3, "next_gamma needs three recorded f values");
        let (f2, f1, f0) = (self.f_history[0], self.f_history[1], self.f_history[2]);
        let previous = relative_decrease(f2, f1);
        let latest = relative_decrease(f1, f0);
        trend_gamma(self.gamma_prev2, self.gamma_prev, previous, latest).max(self.gamma_floor)
    }

    /// Whether the exploratory phase should hand over to the fixed-γ restart.
    ///
    /// A converged stopping statistic does not end the run here; it forces the
    /// restart instead.
    pub fn should_restart(&self, stop_stat: f64, epsilon: f64) -> bool {
        if stop_stat < epsilon {
            return true;
        }
        let n = self.f_history.len();
        if n < 2 {
            return false;
        }
        let (before, after) = (self.f_history[n - 2], self.f_history[n - 1]);
        if before == 0.0 {
            return true;
        }
        ((before - after) / before).abs() < self.plateau_tol
    }
}

/// `(before − after) / before`, or 0 when `before` is 0.
pub fn relative_decrease(before: f64, after: f64) -> f64 {
    if before == 0.0 {
        0.0
    } else {
        (before - after) / before
    }
}

/// Continues the geometric trend `γ⁽ᵖ⁻¹⁾² / γ⁽ᵖ⁻²⁾` when the latest relative
/// decrease is at least the previous one, else reverts to `γ⁽ᵖ⁻²⁾`.
pub fn trend_gamma(gamma_prev2: f64, gamma_prev: f64, previous_decrease: f64, latest_decrease: f64) -> f64 {
    if latest_decrease >= previous_decrease {
        (gamma_prev / gamma_prev2) * gamma_prev
    } else {
        gamma_prev2
    }
}

/// Primes the schedule: `γ⁽⁰⁾ = warm_factor × threshold`, `γ⁽¹⁾ = γ⁽⁰⁾ / 2`.
///
/// Returns `None` when the threshold is zero, i.e. `f` already vanishes at the
/// initial point; callers then fall back to a fixed [`DEGENERATE_GAMMA`].
pub fn init_schedule(
    network: &Network,
    initial: &FactorPair,
    cfg: &ScheduleConfig,
) -> Option<(ScheduleState, f64, f64)> {
    let threshold = gamma_threshold(network, initial);
    if threshold <= 0.0 || threshold.is_nan() {
        return None;
    }
    let gamma0 = cfg.warm_factor * threshold;
    let gamma1 = gamma0 / 2.0;
    let state = ScheduleState {
        phase: Phase::Exploratory,
        gamma_prev: gamma1,
        gamma_prev2: gamma0,
        gamma_floor: cfg.gamma_floor_ratio * gamma0,
        plateau_tol: cfg.plateau_tol,
        f_history: VecDeque::with_capacity(4),
    };
    Some((state, gamma0, gamma1))
}

/// Averages the factors into `W` and returns `(W, W)` with the threshold γ at
/// that point. The flag is set when the threshold was zero and
/// [`DEGENERATE_GAMMA`] was substituted.
pub fn restart(network: &Network, factors: &FactorPair) -> (FactorPair, f64, bool) {
    let w = FactorPair::coincident(factors.average());
    let gamma = 0.5 * (2.0 * objective(network, &w)).sqrt() * network.neighbors().degree_factor();
    if gamma > 0.0 {
        (w, gamma, false)
    } else {
        (w, DEGENERATE_GAMMA, true)
    }
}
