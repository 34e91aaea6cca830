//! `formation-vi` command-line interface.
//!
//! Exit statuses: 0 success, 2 usage, 3 scenario validation, 4 I/O.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::bench::time_kernels;
use crate::diagnostics::log_decay_rate;
use crate::error::Error;
use crate::integrators::{run, IntegratorKind, Variant};
use crate::plot::{emit_svg, PlotKind, PlotStyle, Series};
use crate::scenario::{
    load_scenario, preset, write_csv, write_energy_csv, Scenario, TrajectoryRecord,
    PAPER_TRIANGLE_H005, PRESETS,
};
use crate::verification::{
    convergence_order, max_energy_discrepancy, max_position_discrepancy, reference_solution,
    residual_audit, terminal_error, ConvergenceReport, DEFAULT_GRID, DEFAULT_HORIZON,
    REFERENCE_RATIO,
};

#[derive(Debug, Parser)]
#[command(
    name = "formation-vi",
    version,
    about = "Variational integrator for formation control with flocking"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate one scenario and write trajectory/energy CSVs.
    Run(RunArgs),
    /// Run the variational integrator and explicit Euler side by side against a reference.
    Compare(CompareArgs),
    /// Estimate convergence orders from a step-size sweep.
    Convergence(ConvergenceArgs),
    /// Time the per-step cost of each integrator.
    Bench(BenchArgs),
    /// Evaluate discrete Euler–Lagrange residuals along variational runs.
    Audit(AuditArgs),
    /// List built-in scenarios.
    Presets,
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// Built-in scenario name.
    #[arg(long, conflicts_with = "scenario")]
    preset: Option<String>,
    /// Scenario JSON file.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, value_enum)]
    integrator: Option<IntegratorKind>,
    #[arg(long, value_enum)]
    variant: Option<Variant>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    h: Option<f64>,
    #[arg(long)]
    record_every: Option<usize>,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also emit SVG plots.
    #[arg(long)]
    svg: bool,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Reference RK4 substeps per step.
    #[arg(long, default_value_t = REFERENCE_RATIO)]
    ref_ratio: usize,
}

#[derive(Debug, Args)]
struct ConvergenceArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Step sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_GRID)]
    grid: Vec<f64>,
    /// Common final time.
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    horizon: f64,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Timed repetitions; the fastest is reported.
    #[arg(long, default_value_t = 5)]
    repeats: usize,
}

#[derive(Debug, Args)]
struct AuditArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Scenario(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Scenario(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Scenario(m) | CliError::Io(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        let msg = err.to_string();
        match err {
            Error::UnknownPreset { .. } | Error::InvalidArgument(_) => CliError::Usage(msg),
            Error::Io(_) => CliError::Io(msg),
            _ => CliError::Scenario(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Io(err.to_string())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

/// Parses the process arguments and runs the selected subcommand.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.code())
        }
    }
}

fn dispatch(cli: Cli) -> CliResult {
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Convergence(args) => cmd_convergence(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Audit(args) => cmd_audit(args),
        Command::Presets => {
            for name in PRESETS {
                println!("{name}");
            }
            Ok(())
        }
    }
}

impl ScenarioArgs {
    /// Loads the scenario source, applies flag overrides, validates.
    fn resolve(&self, default_preset: Option<&str>) -> CliResult<Scenario> {
        let mut sc = match (&self.preset, &self.scenario, default_preset) {
            (Some(name), None, _) => preset(name)?,
            (None, Some(path), _) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                load_scenario(&text)?
            }
            (None, None, Some(name)) => preset(name)?,
            _ => {
                return Err(CliError::Usage(format!(
                    "give exactly one of --preset or --scenario (presets: {})",
                    PRESETS.join(", ")
                )))
            }
        };
        if let Some(kind) = self.integrator {
            sc.integrator = kind;
        }
        if let Some(variant) = self.variant {
            sc.variant = variant;
        }
        if let Some(steps) = self.steps {
            sc.steps = steps;
        }
        if let Some(h) = self.h {
            sc.h = h;
        }
        if let Some(every) = self.record_every {
            sc.record_every = every;
        }
        sc.validate()?;
        Ok(sc)
    }
}

fn prepare_out(dir: &Path) -> CliResult {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_record(dir: &Path, tag: &str, rec: &TrajectoryRecord) -> CliResult {
    write_csv(rec, create(&dir.join(format!("trajectory_{tag}.csv")))?)?;
    write_energy_csv(rec, create(&dir.join(format!("energy_{tag}.csv")))?)?;
    Ok(())
}

fn trajectory_series(rec: &TrajectoryRecord) -> Vec<Series> {
    let dim = rec.scenario.dim;
    (0..rec.scenario.agent_count)
        .map(|i| {
            let pts = rec
                .rows
                .iter()
                .map(|r| {
                    let p = &r.positions[i * dim..];
                    (p[0], if dim > 1 { p[1] } else { r.time })
                })
                .collect();
            Series::new(format!("agent {}", i + 1), pts)
        })
        .collect()
}

fn energy_series(rec: &TrajectoryRecord, name: &str) -> Series {
    Series::new(name, rec.energy_series())
}

/// Log axis unless some series never leaves zero (e.g. at equilibrium).
fn energy_style(series: &[Series]) -> PlotStyle {
    let log = series
        .iter()
        .all(|s| s.points.iter().any(|&(_, e)| e > 0.0));
    PlotStyle::new(PlotKind::TimeSeries, "total discrete energy", "t", "E^d").log_y(log)
}

fn write_svg(dir: &Path, name: &str, series: &[Series], style: &PlotStyle) -> CliResult {
    emit_svg(
        series,
        style,
        create(&dir.join(format!("plot_{name}.svg")))?,
    )?;
    Ok(())
}

fn finish_report(dir: &Path, text: &str) -> CliResult {
    print!("{text}");
    fs::write(dir.join("report.txt"), text)
        .map_err(|e| CliError::Io(format!("{}: {e}", dir.join("report.txt").display())))
}

fn fmt_list(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:.3e}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn run_label(sc: &Scenario) -> String {
    match sc.integrator {
        IntegratorKind::Variational => format!("variational ({})", sc.variant.name()),
        other => other.name().to_string(),
    }
}

fn cmd_run(args: RunArgs) -> CliResult {
    let sc = args.scenario.resolve(None)?;
    let dir = &args.output.out;
    prepare_out(dir)?;

    let start = Instant::now();
    let rec = run(&sc)?;
    let wall = start.elapsed().as_secs_f64();

    let tag = sc.integrator.name();
    write_record(dir, tag, &rec)?;
    if args.output.svg {
        let style = PlotStyle::new(
            PlotKind::Trajectory,
            &format!("{} trajectories", run_label(&sc)),
            "x",
            "y",
        );
        write_svg(
            dir,
            &format!("trajectory_{tag}"),
            &trajectory_series(&rec),
            &style,
        )?;
        let series = [energy_series(&rec, tag)];
        write_svg(
            dir,
            &format!("energy_{tag}"),
            &series,
            &energy_style(&series),
        )?;
    }

    let last = &rec.final_step.diagnostics;
    let first = &rec.initial().diagnostics;
    let e0 = first.total_discrete_energy;
    // consensus kinetic energy, conserved with momentum, in E^d units
    let s = sc.agent_count as f64;
    let floor = sc.h * first.momentum.iter().map(|p| p * p).sum::<f64>() / (2.0 * s);
    let samples: Vec<(f64, f64)> = rec
        .energy_series()
        .into_iter()
        .filter(|&(_, e)| e - floor > 1e-8 * (e0 - floor).abs())
        .collect();
    let decay =
        log_decay_rate(&samples, floor).map_or_else(|| "n/a".to_string(), |r| format!("{r:.4}"));

    let rows = [
        ("integrator", run_label(&sc)),
        (
            "steps",
            format!("{} (h = {}, T = {})", sc.steps, sc.h, sc.horizon()),
        ),
        ("final edge errors", fmt_list(&last.edge_errors)),
        (
            "final disagreement",
            format!("{:.3e}", last.velocity_disagreement),
        ),
        (
            "energy ratio",
            format!("{:.3e}", last.total_discrete_energy / e0),
        ),
        ("energy decay rate", decay),
        ("wall time", format!("{wall:.4} s")),
        (
            "steps/sec",
            format!("{:.3e}", sc.steps as f64 / wall.max(1e-12)),
        ),
    ];
    let mut text = String::new();
    for (label, value) in rows {
        writeln!(text, "{label:<19}{value}").unwrap();
    }
    finish_report(dir, &text)
}

fn cmd_compare(args: CompareArgs) -> CliResult {
    let sc = args.scenario.resolve(None)?;
    if args.ref_ratio < 10 {
        return Err(CliError::Usage("--ref-ratio must be at least 10".into()));
    }
    let dir = &args.output.out;
    prepare_out(dir)?;

    let vi_sc = Scenario {
        integrator: IntegratorKind::Variational,
        ..sc.clone()
    };
    let eu_sc = Scenario {
        integrator: IntegratorKind::Euler,
        ..sc.clone()
    };
    let h_ref = sc.h / args.ref_ratio as f64;
    let (vi, (eu, reference)) = rayon::join(
        || run(&vi_sc),
        || rayon::join(|| run(&eu_sc), || reference_solution(&sc, h_ref)),
    );
    let (vi, eu, reference) = (vi?, eu?, reference?);

    write_record(dir, "variational", &vi)?;
    write_record(dir, "euler", &eu)?;
    write_record(dir, "reference", &reference)?;
    if args.output.svg {
        for (tag, rec, title) in [
            ("trajectories_variational", &vi, "V.I. trajectories"),
            ("trajectories_euler", &eu, "explicit Euler trajectories"),
        ] {
            let style = PlotStyle::new(
                PlotKind::Trajectory,
                &format!("{title}, h = {}", sc.h),
                "x",
                "y",
            );
            write_svg(dir, tag, &trajectory_series(rec), &style)?;
        }
        let series = [
            energy_series(&vi, "V.I."),
            energy_series(&eu, "Euler"),
            energy_series(&reference, "reference"),
        ];
        write_svg(dir, "energy", &series, &energy_style(&series))?;
    }

    let mut text = String::new();
    writeln!(
        text,
        "h = {}, T = {}, reference RK4 step {h_ref:e}",
        sc.h,
        sc.horizon()
    )
    .unwrap();
    writeln!(
        text,
        "{:<18} {:>14} {:>14} {:>14}",
        "", "max |Δq| ref", "terminal err", "max |ΔE^d| ref"
    )
    .unwrap();
    for (name, rec) in [(run_label(&vi_sc), &vi), ("euler".to_string(), &eu)] {
        writeln!(
            text,
            "{:<18} {:>14.4e} {:>14.4e} {:>14.4e}",
            name,
            max_position_discrepancy(rec, &reference)?,
            terminal_error(rec, &reference),
            max_energy_discrepancy(rec, &reference)?
        )
        .unwrap();
    }
    writeln!(
        text,
        "max |Δq| V.I. vs Euler  {:.4e}",
        max_position_discrepancy(&vi, &eu)?
    )
    .unwrap();
    writeln!(
        text,
        "max |ΔE^d| V.I. vs Euler {:.4e}",
        max_energy_discrepancy(&vi, &eu)?
    )
    .unwrap();
    finish_report(dir, &text)
}

fn cmd_convergence(args: ConvergenceArgs) -> CliResult {
    if args.grid.len() < 3 {
        return Err(CliError::Usage(format!(
            "convergence needs at least 3 step sizes, got {}",
            args.grid.len()
        )));
    }
    let sc = args.scenario.resolve(Some(PAPER_TRIANGLE_H005))?;
    let dir = &args.output.out;
    prepare_out(dir)?;

    let studies: Vec<(IntegratorKind, Variant)> = match args.scenario.integrator {
        Some(kind) => vec![(kind, sc.variant)],
        None => vec![
            (IntegratorKind::Euler, sc.variant),
            (IntegratorKind::Variational, sc.variant),
        ],
    };
    let reports = studies
        .iter()
        .map(|&(kind, variant)| convergence_order(kind, variant, &sc, &args.grid, args.horizon))
        .collect::<Result<Vec<ConvergenceReport>, Error>>()?;

    let mut csv = String::from("integrator,h,error\n");
    let mut text = String::new();
    for r in &reports {
        csv.push_str(
            r.to_csv()
                .lines()
                .skip(1)
                .collect::<Vec<_>>()
                .join("\n")
                .as_str(),
        );
        csv.push('\n');
        writeln!(text, "{r}\n").unwrap();
    }
    fs::write(dir.join("convergence.csv"), csv)?;
    finish_report(dir, &text)
}

fn cmd_bench(args: BenchArgs) -> CliResult {
    let sc = args.scenario.resolve(Some(PAPER_TRIANGLE_H005))?;
    let steps = args.scenario.steps.unwrap_or(1_000_000);
    if steps == 0 || args.repeats == 0 {
        return Err(CliError::Usage(
            "--steps and --repeats must be positive for bench".into(),
        ));
    }
    let dir = &args.output.out;
    prepare_out(dir)?;
    let report = time_kernels(&sc, steps, args.repeats)?;

    let mut text = String::new();
    writeln!(
        text,
        "{steps} steps, h = {}, variant {}, best of {}",
        sc.h,
        sc.variant.name(),
        args.repeats
    )
    .unwrap();
    writeln!(
        text,
        "variational precompute {:.3} µs",
        report.setup_secs * 1e6
    )
    .unwrap();
    writeln!(
        text,
        "{:<12} {:>10} {:>14} {:>10}",
        "integrator", "ns/step", "steps/sec", "spread"
    )
    .unwrap();
    for t in &report.kernels {
        writeln!(
            text,
            "{:<12} {:>10.2} {:>14.3e} {:>9.1}%",
            t.name,
            t.best_ns,
            1e9 / t.best_ns,
            100.0 * (t.worst_ns - t.best_ns) / t.best_ns
        )
        .unwrap();
    }
    let vs_euler = report.variational_over_euler();
    let vs_rk4 = report.variational_over_rk4();
    writeln!(text, "variational / euler {vs_euler:.3} (target ≤ 2)").unwrap();
    writeln!(text, "variational / rk4   {vs_rk4:.3} (target ≤ 0.5)").unwrap();
    if vs_euler > 2.0 || vs_rk4 > 0.5 {
        writeln!(
            text,
            "warning: per-step cost targets not met on this machine"
        )
        .unwrap();
    }
    finish_report(dir, &text)
}

fn cmd_audit(args: AuditArgs) -> CliResult {
    let sc = args.scenario.resolve(None)?;
    let dir = &args.output.out;
    prepare_out(dir)?;
    let variants = match args.scenario.variant {
        Some(v) => vec![v],
        None => vec![Variant::Paper, Variant::Consistent],
    };
    let mut text = String::new();
    writeln!(
        text,
        "{:<12} {:>22} {:>22}",
        "variant", "max printed residual", "max scheme residual"
    )
    .unwrap();
    let mut csv = String::from("variant,step,printed,scheme\n");
    for variant in variants {
        let audit = residual_audit(&sc, variant)?;
        writeln!(
            text,
            "{:<12} {:>22.4e} {:>22.4e}",
            variant.name(),
            audit.max_printed(),
            audit.max_scheme()
        )
        .unwrap();
        for (k, (p, s)) in audit.printed.iter().zip(&audit.scheme).enumerate() {
            writeln!(csv, "{},{},{p:?},{s:?}", variant.name(), k + 1).unwrap();
        }
    }
    fs::write(dir.join("residuals.csv"), csv)?;
    finish_report(dir, &text)
}
