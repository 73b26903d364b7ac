//! Block coordinate descent over the columns of `U` and `V`.
//!
//! With every other column frozen, the penalized objective restricted to
//! `u_i` is the strongly convex quadratic `½ u_iᵀ A u_i − bᵀ u_i + const`
//! where
//!
//! ```text
//! A = γ I + Σ_j w_j w_jᵀ + Σ_k w_k w_kᵀ,      w_j = v_i − v_j,  w_k = v_i − a_k
//! b = γ v_i + Σ_j (u_jᵀ w_j + d_ij²) w_j + Σ_k (a_kᵀ w_k + d_ik²) w_k
//! ```
//!
//! so each block update is one `d×d` SPD solve. The `v_i` update is the same
//! with the roles of `U` and `V` exchanged.

use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve_in_place, dot};
use crate::problem::{check_gamma, objective, penalized_objective, FactorPair, Network, Points};
use crate::schedule::{self, ScheduleConfig, ScheduleState};

/// How the penalty parameter is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaMode {
    /// A constant, user-supplied γ.
    Fixed(f64),
    /// A constant γ equal to `factor ×` [`gamma_threshold`] at the initial
    /// point. `factor = 1` reproduces the threshold itself; any factor above 1
    /// gives the strict inequality. A zero threshold falls back to γ = 1.
    Threshold { factor: f64 },
    /// Exploratory geometric adjustment followed by one threshold restart.
    Scheduled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub gamma_mode: GammaMode,
    pub max_sweeps: usize,
    pub schedule: ScheduleConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            gamma_mode: GammaMode::Scheduled,
            max_sweeps: 10_000,
            schedule: ScheduleConfig::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilon <= 0.0 || !self.epsilon.is_finite() {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_sweeps == 0 {
            return Err(Error::Config("max_sweeps must be at least 1".into()));
        }
        match self.gamma_mode {
            GammaMode::Fixed(g) => check_gamma(g)?,
            GammaMode::Threshold { factor } => {
                if factor <= 0.0 || !factor.is_finite() {
                    return Err(Error::Config(format!("threshold factor must be positive, got {factor}")));
                }
            }
            GammaMode::Scheduled => {}
        }
        self.schedule.validate()
    }
}

/// Result of one Gauss–Seidel pass over all columns of `U` then `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub factors: FactorPair,
    pub stop_stat: f64,
    pub f_value: f64,
    pub penalized_value: f64,
}

/// One row of the per-sweep trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    /// 1-based sweep counter across the whole run.
    pub sweep: usize,
    /// Penalty parameter used during this sweep.
    pub gamma: f64,
    /// `F` at the start of the sweep, under this sweep's γ.
    pub penalized_start: f64,
    /// `f` after the sweep.
    pub f: f64,
    /// `F` after the sweep.
    pub penalized: f64,
    pub stop_stat: f64,
    /// Incremented whenever γ changes or the factors are reset.
    pub segment: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveTrace {
    pub rows: Vec<TraceRow>,
}

impl SolveTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// The stopping statistic fell below ε.
    Converged,
    /// `max_sweeps` was reached first.
    SweepCap,
    /// Converged, but the γ threshold was zero (the starting point already
    /// had `f = 0`) and the fallback γ = 1 was used.
    Degenerate,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::SweepCap => "sweep_cap",
            Termination::Degenerate => "degenerate",
        }
    }
}

impl std::str::FromStr for Termination {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "converged" => Ok(Termination::Converged),
            "sweep_cap" => Ok(Termination::SweepCap),
            "degenerate" => Ok(Termination::Degenerate),
            other => Err(Error::Parse(format!("unknown termination reason {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub factors: FactorPair,
    pub trace: SolveTrace,
    pub termination: Termination,
    pub gamma_final: f64,
}

impl Solution {
    /// Position estimates `(u_i + v_i) / 2`.
    pub fn estimates(&self) -> Points {
        self.factors.average()
    }

    pub fn sweeps(&self) -> usize {
        self.trace.len()
    }
}

/// Reusable buffers for the `d×d` system of a column update.
struct ColumnScratch {
    a: Vec<f64>,
    b: Vec<f64>,
    w: Vec<f64>,
}

impl ColumnScratch {
    fn new(dim: usize) -> Self {
        Self {
            a: vec![0.0; dim * dim],
            b: vec![0.0; dim],
            w: vec![0.0; dim],
        }
    }
}

/// Assembles `A` and `b` for column `i` of `target` with `other` frozen.
///
/// For a `U` update `target = U`, `other = V`; for a `V` update the roles swap.
fn assemble_column(
    network: &Network,
    target: &Points,
    other: &Points,
    i: usize,
    gamma: f64,
    s: &mut ColumnScratch,
) {
    let d = target.dim();
    let nb = network.neighbors();
    let oi = other.column(i);
    s.a.fill(0.0);
    for (l, &x) in oi.iter().enumerate() {
        s.a[l * d + l] = gamma;
        s.b[l] = gamma * x;
    }
    let accumulate = |w: &[f64], coeff: f64, a: &mut [f64], b: &mut [f64]| {
        for r in 0..d {
            for c in 0..=r {
                a[r * d + c] += w[r] * w[c];
            }
            b[r] += coeff * w[r];
        }
    };
    for &(j, dist) in &nb.ss[i] {
        let oj = other.column(j);
        for l in 0..d {
            s.w[l] = oi[l] - oj[l];
        }
        let coeff = dot(target.column(j), &s.w) + dist * dist;
        accumulate(&s.w, coeff, &mut s.a, &mut s.b);
    }
    let anchors = network.anchors();
    for &(k, dist) in &nb.sa[i] {
        let ak = anchors.column(k);
        for l in 0..d {
            s.w[l] = oi[l] - ak[l];
        }
        let coeff = dot(ak, &s.w) + dist * dist;
        accumulate(&s.w, coeff, &mut s.a, &mut s.b);
    }
}

fn update_column(
    network: &Network,
    target: &Points,
    other: &Points,
    i: usize,
    gamma: f64,
    s: &mut ColumnScratch,
) -> Result<()> {
    assemble_column(network, target, other, i, gamma, s);
    cholesky_solve_in_place(&mut s.a, &mut s.b, target.dim())
}

/// The system matrix and right-hand side of the `u_i` subproblem (row-major `A`).
pub fn u_column_system(network: &Network, factors: &FactorPair, i: usize, gamma: f64) -> (Vec<f64>, Vec<f64>) {
    let mut s = ColumnScratch::new(factors.dim());
    assemble_column(network, &factors.u, &factors.v, i, gamma, &mut s);
    symmetrize(&mut s.a, factors.dim());
    (s.a, s.b)
}

/// The system matrix and right-hand side of the `v_i` subproblem (row-major `A`).
pub fn v_column_system(network: &Network, factors: &FactorPair, i: usize, gamma: f64) -> (Vec<f64>, Vec<f64>) {
    let mut s = ColumnScratch::new(factors.dim());
    assemble_column(network, &factors.v, &factors.u, i, gamma, &mut s);
    symmetrize(&mut s.a, factors.dim());
    (s.a, s.b)
}

fn symmetrize(a: &mut [f64], d: usize) {
    for r in 0..d {
        for c in (r + 1)..d {
            a[r * d + c] = a[c * d + r];
        }
    }
}

fn check_column_args(network: &Network, factors: &FactorPair, i: usize, gamma: f64) -> Result<()> {
    check_gamma(gamma)?;
    network.check_factors(factors)?;
    if i >= network.num_sensors() {
        return Err(Error::Config(format!(
            "sensor index {i} out of range (m = {})",
            network.num_sensors()
        )));
    }
    Ok(())
}

/// Exact minimizer of `F` over `u_i` with all other columns frozen.
pub fn solve_u_column(network: &Network, factors: &FactorPair, i: usize, gamma: f64) -> Result<Vec<f64>> {
    check_column_args(network, factors, i, gamma)?;
    let mut s = ColumnScratch::new(factors.dim());
    update_column(network, &factors.u, &factors.v, i, gamma, &mut s)?;
    Ok(s.b)
}

/// Exact minimizer of `F` over `v_i` with all other columns frozen.
pub fn solve_v_column(network: &Network, factors: &FactorPair, i: usize, gamma: f64) -> Result<Vec<f64>> {
    check_column_args(network, factors, i, gamma)?;
    let mut s = ColumnScratch::new(factors.dim());
    update_column(network, &factors.v, &factors.u, i, gamma, &mut s)?;
    Ok(s.b)
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Maximum of the relative factor gap and the relative changes of `U` and `V`
/// between two consecutive iterates.
///
/// A zero denominator yields 0 if its numerator is also 0, else `+∞`.
pub fn stop_stat(prev: &FactorPair, cur: &FactorPair) -> f64 {
    let gap = ratio(2.0 * cur.gap(), cur.u.frobenius_norm() + cur.v.frobenius_norm());
    let du = ratio(cur.u.distance_frobenius(&prev.u), prev.u.frobenius_norm());
    let dv = ratio(cur.v.distance_frobenius(&prev.v), prev.v.frobenius_norm());
    gap.max(du).max(dv)
}

/// `½ √(2 f(U₀, V₀)) · max_i √(4|E_ss[i]| + |E_sa[i]|)`, the penalty level
/// above which limit points from a `U₀ = V₀` start have `U = V`.
pub fn gamma_threshold(network: &Network, initial: &FactorPair) -> f64 {
    0.5 * (2.0 * objective(network, initial)).sqrt() * network.neighbors().degree_factor()
}

/// Updates `factors` in place by one sweep; returns the stopping statistic
/// against the pre-sweep iterate.
fn sweep_in_place(
    network: &Network,
    factors: &mut FactorPair,
    prev: &mut FactorPair,
    gamma: f64,
    scratch: &mut ColumnScratch,
) -> Result<f64> {
    prev.clone_from(factors);
    let m = network.num_sensors();
    for i in 0..m {
        update_column(network, &factors.u, &factors.v, i, gamma, scratch)?;
        factors.u.column_mut(i).copy_from_slice(&scratch.b);
    }
    for i in 0..m {
        update_column(network, &factors.v, &factors.u, i, gamma, scratch)?;
        factors.v.column_mut(i).copy_from_slice(&scratch.b);
    }
    Ok(stop_stat(prev, factors))
}

/// One Gauss–Seidel sweep: `u_1 … u_m` in ascending order, then `v_1 … v_m`.
pub fn sweep(network: &Network, factors: &FactorPair, gamma: f64) -> Result<SweepOutcome> {
    check_gamma(gamma)?;
    network.check_factors(factors)?;
    let mut cur = factors.clone();
    let mut prev = factors.clone();
    let mut scratch = ColumnScratch::new(factors.dim());
    let stop = sweep_in_place(network, &mut cur, &mut prev, gamma, &mut scratch)
        .map_err(|_| Error::Diverged { sweep: 1 })?;
    if !cur.is_finite() {
        return Err(Error::Diverged { sweep: 1 });
    }
    let f_value = objective(network, &cur);
    let gap = cur.gap();
    Ok(SweepOutcome {
        factors: cur,
        stop_stat: stop,
        f_value,
        penalized_value: f_value + 0.5 * gamma * gap * gap,
    })
}

/// Drives sweeps, recording the trace and tracking segment boundaries.
struct Runner<'a> {
    network: &'a Network,
    factors: FactorPair,
    prev: FactorPair,
    scratch: ColumnScratch,
    trace: SolveTrace,
    max_sweeps: usize,
    segment: usize,
    last_gamma: Option<f64>,
    /// `F` of the current iterate under `last_gamma`, if known.
    last_penalized: Option<f64>,
}

impl<'a> Runner<'a> {
    fn new(network: &'a Network, initial: FactorPair, max_sweeps: usize) -> Self {
        let dim = initial.dim();
        Self {
            network,
            prev: initial.clone(),
            factors: initial,
            scratch: ColumnScratch::new(dim),
            trace: SolveTrace::default(),
            max_sweeps,
            segment: 0,
            last_gamma: None,
            last_penalized: None,
        }
    }

    fn exhausted(&self) -> bool {
        self.trace.len() >= self.max_sweeps
    }

    fn reset_factors(&mut self, factors: FactorPair) {
        self.factors = factors;
        self.last_penalized = None;
        self.segment += 1;
    }

    fn step(&mut self, gamma: f64) -> Result<TraceRow> {
        let sweep_no = self.trace.len() + 1;
        let penalized_start = match (self.last_gamma, self.last_penalized) {
            (Some(g), Some(fv)) if g == gamma => fv,
            _ => {
                if self.last_gamma.is_some_and(|g| g != gamma) {
                    self.segment += 1;
                }
                penalized_objective(self.network, &self.factors, gamma)?
            }
        };
        let stop = sweep_in_place(self.network, &mut self.factors, &mut self.prev, gamma, &mut self.scratch)
            .map_err(|_| Error::Diverged { sweep: sweep_no })?;
        if !self.factors.is_finite() {
            return Err(Error::Diverged { sweep: sweep_no });
        }
        let f = objective(self.network, &self.factors);
        let gap = self.factors.gap();
        let penalized = f + 0.5 * gamma * gap * gap;
        let row = TraceRow {
            sweep: sweep_no,
            gamma,
            penalized_start,
            f,
            penalized,
            stop_stat: stop,
            segment: self.segment,
        };
        self.trace.rows.push(row);
        self.last_gamma = Some(gamma);
        self.last_penalized = Some(penalized);
        Ok(row)
    }

    /// Sweeps with a constant γ until convergence or the sweep cap.
    fn run_fixed(mut self, gamma: f64, epsilon: f64, degenerate: bool) -> Result<Solution> {
        while !self.exhausted() {
            let row = self.step(gamma)?;
            if row.stop_stat < epsilon {
                let termination = if degenerate {
                    Termination::Degenerate
                } else {
                    Termination::Converged
                };
                return Ok(self.finish(termination, gamma));
            }
        }
        Ok(self.finish(Termination::SweepCap, gamma))
    }

    fn finish(self, termination: Termination, gamma_final: f64) -> Solution {
        Solution {
            factors: self.factors,
            trace: self.trace,
            termination,
            gamma_final,
        }
    }
}

/// Runs block coordinate descent from `initial` until the stopping statistic
/// drops below `config.epsilon` or `config.max_sweeps` sweeps have run.
///
/// The network must satisfy the connectivity requirement; otherwise the level
/// sets of the objective are unbounded and the run is rejected up front.
pub fn solve(network: &Network, initial: FactorPair, config: &SolverConfig) -> Result<Solution> {
    config.validate()?;
    network.check_factors(&initial)?;
    if !initial.is_finite() {
        return Err(Error::Config("initial point must be finite".into()));
    }
    network.require_connected()?;

    let runner = Runner::new(network, initial, config.max_sweeps);
    match config.gamma_mode {
        GammaMode::Fixed(gamma) => runner.run_fixed(gamma, config.epsilon, false),
        GammaMode::Threshold { factor } => {
            let threshold = gamma_threshold(network, &runner.factors);
            if threshold > 0.0 {
                runner.run_fixed(factor * threshold, config.epsilon, false)
            } else {
                runner.run_fixed(schedule::DEGENERATE_GAMMA, config.epsilon, true)
            }
        }
        GammaMode::Scheduled => run_scheduled(runner, config),
    }
}

fn run_scheduled(mut runner: Runner<'_>, config: &SolverConfig) -> Result<Solution> {
    let eps = config.epsilon;
    let Some((mut state, gamma0, gamma1)) =
        schedule::init_schedule(runner.network, &runner.factors, &config.schedule)
    else {
        log::debug!("f vanishes at the initial point; using fixed fallback penalty");
        return runner.run_fixed(schedule::DEGENERATE_GAMMA, eps, true);
    };

    state.record_f(objective(runner.network, &runner.factors));
    for gamma in [gamma0, gamma1] {
        if runner.exhausted() {
            return Ok(runner.finish(Termination::SweepCap, gamma));
        }
        let row = runner.step(gamma)?;
        state.record_f(row.f);
    }

    exploratory_phase(&mut runner, &mut state, eps)?;
    if runner.exhausted() {
        let gamma = state.gamma_prev();
        return Ok(runner.finish(Termination::SweepCap, gamma));
    }

    let (restarted, gamma, degenerate) = schedule::restart(runner.network, &runner.factors);
    state.mark_restarted();
    log::debug!(
        "penalty schedule restart after {} sweeps with gamma = {gamma:e}",
        runner.trace.len()
    );
    runner.reset_factors(restarted);
    runner.run_fixed(gamma, eps, degenerate)
}

fn exploratory_phase(runner: &mut Runner<'_>, state: &mut ScheduleState, eps: f64) -> Result<()> {
    while !runner.exhausted() {
        let gamma = state.next_gamma();
        state.push_gamma(gamma);
        let row = runner.step(gamma)?;
        state.record_f(row.f);
        if state.should_restart(row.stop_stat, eps) {
            break;
        }
    }
    Ok(())
}
