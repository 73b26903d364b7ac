use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use snl_core::evaluate::{rmsd, run_benchmark, solve_with_report};
use snl_core::files::{parse_grid, parse_instance, parse_solution, write_bench_csv, write_instance, write_solution, SolutionFile};
use snl_core::generate::{self as gen, nearest_anchor_start, random_hull_start, GenSpec, RangeExpr};
use snl_core::problem::{max_abs_residual, objective};
use snl_core::schedule::ScheduleConfig;
use snl_core::{Error, FactorPair, GammaMode, ProblemInstance, SolverConfig};

use crate::args::{BenchArgs, EvalArgs, GammaModeArg, GenerateArgs, InitArg, SolveArgs, SolverArgs};

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_BAD_INPUT: u8 = 3;
pub const EXIT_DISCONNECTED: u8 = 4;

/// Default output directory for files whose path is not given.
pub const OUT_DIR_ENV: &str = "SNL_OUT_DIR";

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }

    fn input(message: impl Into<String>) -> Self {
        Self { code: EXIT_BAD_INPUT, message: message.into() }
    }

    fn other(message: impl Into<String>) -> Self {
        Self { code: EXIT_FAILURE, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Disconnected { sensor } => Self {
                code: EXIT_DISCONNECTED,
                message: format!(
                    "instance violates the connectivity assumption: sensor {} has no path to any anchor",
                    sensor + 1
                ),
            },
            Error::Malformed(_) | Error::DuplicateEdge(..) | Error::Parse(_) | Error::ShapeMismatch { .. } => {
                Self::input(e.to_string())
            }
            Error::Config(_) => Self::usage(e.to_string()),
            Error::Diverged { .. } | Error::NotPositiveDefinite => Self::other(e.to_string()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

fn read_instance(path: &Path) -> Result<ProblemInstance, Failure> {
    parse_instance(&read_text(path)?).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::other(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| Failure::other(format!("cannot write {}: {e}", path.display())))
}

fn default_dir() -> Option<PathBuf> {
    std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

fn generate_cmd_spec(args: &GenerateArgs) -> Result<GenSpec, Failure> {
    let rho: RangeExpr = args.rho.parse().map_err(|e: Error| Failure::usage(e.to_string()))?;
    let spec = GenSpec {
        m: args.m,
        n: args.n,
        dim: args.dim,
        rho: rho.resolve(args.m.max(1)),
        sigma: args.sigma,
        seed: args.seed,
    };
    spec.validate()?;
    Ok(spec)
}

pub fn generate(args: GenerateArgs) -> CmdResult {
    let spec = generate_cmd_spec(&args)?;
    let generated = gen::generate(&spec)?;
    let text = write_instance(generated.instance())?;
    let path = args.out.unwrap_or_else(|| {
        let name = format!("snl-m{}-n{}-d{}-seed{}.json", spec.m, spec.n, spec.dim, spec.seed);
        default_dir().unwrap_or_default().join(name)
    });
    write_text(&path, &text)?;
    let net = generated.instance().network();
    let status = if generated.is_connected() {
        "connected".to_string()
    } else {
        format!("disconnected ({} sensors cannot reach an anchor)", net.unreachable_sensors().len())
    };
    println!(
        "wrote {}: rho={} |E_ss|={} |E_sa|={} {status}",
        path.display(),
        spec.rho,
        net.ss_edges().len(),
        net.sa_edges().len()
    );
    Ok(())
}

fn solver_config(args: &SolverArgs) -> Result<SolverConfig, Failure> {
    let gamma_mode = match (args.gamma_mode, args.gamma.as_deref().map(str::trim)) {
        (GammaModeArg::Scheduled, None) => GammaMode::Scheduled,
        (GammaModeArg::Scheduled, Some(_)) => {
            return Err(Failure::usage("--gamma applies only with --gamma-mode fixed"));
        }
        (GammaModeArg::Fixed, None | Some("auto")) => GammaMode::Threshold { factor: args.gamma_factor },
        (GammaModeArg::Fixed, Some(literal)) => {
            if args.gamma_factor != 1.0 {
                return Err(Failure::usage("--gamma-factor applies only with --gamma auto"));
            }
            let g: f64 = literal
                .parse()
                .map_err(|_| Failure::usage(format!("--gamma expects a number or `auto`, got {literal:?}")))?;
            GammaMode::Fixed(g)
        }
    };
    let config = SolverConfig {
        epsilon: args.epsilon,
        gamma_mode,
        max_sweeps: args.max_sweeps,
        schedule: ScheduleConfig {
            warm_factor: args.warm_factor,
            plateau_tol: args.plateau_tol,
            ..ScheduleConfig::default()
        },
    };
    config.validate()?;
    Ok(config)
}

fn initial_point(args: &SolveArgs, instance: &ProblemInstance) -> Result<FactorPair, Failure> {
    let net = instance.network();
    if args.init != InitArg::File && args.init_path.is_some() {
        return Err(Failure::usage("--init-path requires --init file"));
    }
    Ok(match args.init {
        InitArg::NearestAnchor => nearest_anchor_start(net)?,
        InitArg::Interior => random_hull_start(net, args.seed)?,
        InitArg::File => {
            let path = args
                .init_path
                .as_deref()
                .ok_or_else(|| Failure::usage("--init file requires --init-path"))?;
            let start = parse_solution(&read_text(path)?)
                .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?
                .report
                .estimates;
            if start.dim() != net.dim() || start.len() != net.num_sensors() {
                return Err(Failure::input(format!(
                    "{} holds {} positions in dimension {}, instance has {} sensors in dimension {}",
                    path.display(),
                    start.len(),
                    start.dim(),
                    net.num_sensors(),
                    net.dim()
                )));
            }
            FactorPair::coincident(start)
        }
    })
}

fn solution_path(args: &SolveArgs) -> PathBuf {
    if let Some(out) = &args.out {
        return out.clone();
    }
    let stem = args.instance.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "instance".into());
    let name = format!("{stem}.solution.json");
    match default_dir() {
        Some(dir) => dir.join(name),
        None => args.instance.with_file_name(name),
    }
}

pub fn solve(args: SolveArgs) -> CmdResult {
    let instance = read_instance(&args.instance)?;
    instance.network().require_connected()?;
    let config = solver_config(&args.solver)?;
    let initial = initial_point(&args, &instance)?;
    let (solution, report) = solve_with_report(&instance, initial, &config)?;
    let out = solution_path(&args);
    let file = SolutionFile::new(args.instance.display().to_string(), report, solution.trace);
    write_text(&out, &write_solution(&file)?)?;
    let r = &file.report;
    let rmsd = r.rmsd.map_or_else(|| "n/a".to_string(), |x| format!("{x:.6e}"));
    println!(
        "f_final={:.6e} rmsd={rmsd} sweeps={} time={:.3}s termination={} out={}",
        r.f_final,
        r.sweeps,
        r.wall_time,
        r.termination.as_str(),
        out.display()
    );
    Ok(())
}

pub fn bench(args: BenchArgs) -> CmdResult {
    let specs = parse_grid(&read_text(&args.grid)?).map_err(|e| Failure::input(format!("{}: {e}", args.grid.display())))?;
    let config = solver_config(&args.solver)?;
    let rows = run_benchmark(&specs, &config, args.reps)?;
    let csv = write_bench_csv(&rows)?;
    match &args.out {
        Some(path) => write_text(path, &csv),
        None => std::io::stdout()
            .write_all(csv.as_bytes())
            .map_err(|e| Failure::other(format!("cannot write to stdout: {e}"))),
    }
}

pub fn eval(args: EvalArgs) -> CmdResult {
    let instance = read_instance(&args.instance)?;
    let solution =
        parse_solution(&read_text(&args.solution)?).map_err(|e| Failure::input(format!("{}: {e}", args.solution.display())))?;
    let truth = instance
        .truth()
        .ok_or_else(|| Failure::input(format!("{} carries no ground truth", args.instance.display())))?;
    let estimates = solution.report.estimates;
    let rmsd = rmsd(&estimates, truth).map_err(|e| Failure::input(format!("solution does not match instance: {e}")))?;
    let net = instance.network();
    let f = objective(net, &FactorPair::coincident(estimates.clone()));
    println!("rmsd={rmsd} f={f} max_abs_residual={}", max_abs_residual(net, &estimates));
    Ok(())
}
