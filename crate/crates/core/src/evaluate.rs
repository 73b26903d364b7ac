//! Accuracy metrics, trace checks, and repeated-run benchmarks.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::generate::{generate, nearest_anchor_start, GenSpec, Generated};
use crate::problem::{FactorPair, Points, ProblemInstance};
use crate::solver::{solve, Solution, SolveTrace, SolverConfig, Termination};

/// Extra attempts per repetition when a generated instance is disconnected.
const MAX_RESAMPLES: u64 = 100;

/// Root-mean-square distance between estimated and true positions.
pub fn rmsd(estimates: &Points, truth: &Points) -> Result<f64> {
    if !estimates.same_shape(truth) || estimates.is_empty() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} non-empty positions in dimension {}", truth.len(), truth.dim()),
            found: format!("{} in dimension {}", estimates.len(), estimates.dim()),
        });
    }
    let sum: f64 = estimates
        .as_slice()
        .iter()
        .zip(truth.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((sum / estimates.len() as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionReport {
    pub estimates: Points,
    /// Present iff the instance carries ground truth.
    pub rmsd: Option<f64>,
    pub f_final: f64,
    pub penalized_final: f64,
    pub gamma_final: f64,
    pub sweeps: usize,
    /// Wall-clock seconds spent inside the solver call.
    pub wall_time: f64,
    pub termination: Termination,
}

/// Solves `instance` from `initial`, timing only the solver call.
pub fn solve_with_report(
    instance: &ProblemInstance,
    initial: FactorPair,
    config: &SolverConfig,
) -> Result<(Solution, SolutionReport)> {
    let started = Instant::now();
    let solution = solve(instance.network(), initial, config)?;
    let wall_time = started.elapsed().as_secs_f64();
    let estimates = solution.estimates();
    let rmsd = instance.truth().map(|t| rmsd(&estimates, t)).transpose()?;
    let (f_final, penalized_final) = solution
        .trace
        .last()
        .map(|r| (r.f, r.penalized))
        .unwrap_or((f64::NAN, f64::NAN));
    let report = SolutionReport {
        estimates,
        rmsd,
        f_final,
        penalized_final,
        gamma_final: solution.gamma_final,
        sweeps: solution.sweeps(),
        wall_time,
        termination: solution.termination,
    };
    Ok((solution, report))
}

/// Whether `F` is non-increasing within every constant-γ segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonotonicityReport {
    pub monotone: bool,
    /// Index into `trace.rows` of the first offending sweep.
    pub first_violation: Option<usize>,
}

/// Checks each sweep against the objective at its starting point and against
/// the previous sweep of the same segment, allowing `rel_slack` relative slack.
pub fn trace_monotonicity_report(trace: &SolveTrace, rel_slack: f64) -> MonotonicityReport {
    let exceeds = |after: f64, before: f64| after > before + rel_slack * before.abs();
    let mut prev: Option<(usize, f64, f64)> = None;
    for (idx, row) in trace.rows.iter().enumerate() {
        let mut bad = exceeds(row.penalized, row.penalized_start);
        if let Some((segment, gamma, value)) = prev {
            if segment == row.segment && gamma == row.gamma {
                bad |= exceeds(row.penalized, value);
            }
        }
        if bad {
            return MonotonicityReport {
                monotone: false,
                first_violation: Some(idx),
            };
        }
        prev = Some((row.segment, row.gamma, row.penalized));
    }
    MonotonicityReport {
        monotone: true,
        first_violation: None,
    }
}

/// One solved repetition inside a benchmark row.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    /// How many disconnected draws were skipped before this one.
    pub resamples: u64,
    pub cpu_s: f64,
    pub rmsd: f64,
    pub f_final: f64,
    pub sweeps: usize,
    pub termination: Termination,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    /// The row's parameters; `seed` is the base seed.
    pub spec: GenSpec,
    pub reps: usize,
    pub mean_cpu_s: f64,
    pub mean_rmsd: f64,
    pub failures: usize,
    pub runs: Vec<RunRecord>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Generates a connected instance for repetition `rep`, starting from seed
/// `base + rep` and stepping by `reps` on disconnected draws.
pub fn draw_connected(spec: &GenSpec, rep: usize, reps: usize) -> Result<(ProblemInstance, u64, u64)> {
    let first = spec.seed.wrapping_add(rep as u64);
    for attempt in 0..=MAX_RESAMPLES {
        let seed = first.wrapping_add(attempt * reps as u64);
        match generate(&spec.with_seed(seed))? {
            Generated::Connected(inst) => return Ok((inst, seed, attempt)),
            Generated::Disconnected(_) => {
                log::warn!("instance m={} rho={} seed={seed} is disconnected; resampling", spec.m, spec.rho);
            }
        }
    }
    Err(Error::Config(format!(
        "no connected instance after {} draws starting at seed {first}",
        MAX_RESAMPLES + 1
    )))
}

/// Runs `reps` randomized repetitions of every spec with the nearest-anchor
/// start, averaging solve time and RMSD. Failed runs are counted and
/// excluded from the means.
pub fn run_benchmark(specs: &[GenSpec], config: &SolverConfig, reps: usize) -> Result<Vec<BenchRow>> {
    if reps == 0 {
        return Err(Error::Config("repetitions must be at least 1".into()));
    }
    config.validate()?;
    let mut rows = Vec::with_capacity(specs.len());
    for spec in specs {
        spec.validate()?;
        let mut runs = Vec::with_capacity(reps);
        let mut failures = 0;
        for rep in 0..reps {
            match bench_once(spec, rep, reps, config) {
                Ok(run) => runs.push(run),
                Err(e) => {
                    log::warn!("benchmark run failed (m={}, rep {rep}): {e}", spec.m);
                    failures += 1;
                }
            }
        }
        rows.push(BenchRow {
            spec: *spec,
            reps,
            mean_cpu_s: mean(runs.iter().map(|r| r.cpu_s)),
            mean_rmsd: mean(runs.iter().map(|r| r.rmsd)),
            failures,
            runs,
        });
    }
    Ok(rows)
}

fn bench_once(spec: &GenSpec, rep: usize, reps: usize, config: &SolverConfig) -> Result<RunRecord> {
    let (instance, seed, resamples) = draw_connected(spec, rep, reps)?;
    let initial = nearest_anchor_start(instance.network())?;
    let (_, report) = solve_with_report(&instance, initial, config)?;
    Ok(RunRecord {
        seed,
        resamples,
        cpu_s: report.wall_time,
        rmsd: report.rmsd.expect("generated instances carry truth"),
        f_final: report.f_final,
        sweeps: report.sweeps,
        termination: report.termination,
    })
}
