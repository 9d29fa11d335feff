use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use sosgap::certify::verify;
use sosgap::group::{elementary_generators, BallBundle, Ring};
use sosgap::oracle::{enumerate_group, spectral_gap_exact, FiniteGroupTable};
use sosgap::pipeline::{
    build_stage, certify_stage, kazhdan_baselines, pipeline, FailureKind, FailureReport, Outcome, RunConfig,
    SolveArtifact, Stage,
};
use sosgap::sdp::{build_constrained, build_unconstrained, write_sdpa, SosInstance};
use sosgap::solver::IterationLog;

#[derive(Parser)]
#[command(name = "sosgap", version, about = "Certified lower bounds on spectral gaps of SL(n, R)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage and write a certificate or a failure report.
    Pipeline(RunArgs),
    /// Print the effective configuration as TOML.
    Config(RunArgs),
    /// Enumerate the balls B_d and B_2d with their multiplication table.
    Ball {
        #[command(flatten)]
        run: RunArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Assemble the conic program from a ball bundle.
    Sdp {
        #[arg(long)]
        ball: PathBuf,
        /// Build the program with λ fixed at (1 − δ)·λ₀ instead of maximizing λ.
        #[arg(long)]
        lambda0: Option<f64>,
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also write the program in SDPA sparse format.
        #[arg(long)]
        sdpa: Option<PathBuf>,
    },
    /// Solve the programs for a ball bundle and write the solver artifact.
    Solve {
        #[arg(long)]
        ball: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Round a solver artifact to an exact witness and bound its residual.
    Certify {
        #[arg(long)]
        ball: PathBuf,
        #[arg(long)]
        solution: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Re-check a certificate from scratch.
    Verify { certificate: PathBuf },
    /// Exact spectral gap of a finite Cayley graph.
    Oracle {
        #[arg(long, conflicts_with_all = ["n", "ring"])]
        table: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        ring: Option<String>,
        /// Largest group order to enumerate.
        #[arg(long, default_value_t = 20_000)]
        cap: usize,
    },
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// TOML or JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    /// `Z`, `Z/p` or a prime `p`.
    #[arg(long)]
    ring: Option<String>,
    /// Radius of the basis ball.
    #[arg(long)]
    d: Option<u32>,
    #[arg(long)]
    delta: Option<f64>,
    /// Tolerance of the constrained solve.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    max_iters: Option<u64>,
    #[arg(long)]
    presolve_iters: Option<u64>,
    #[arg(long)]
    denominator_bits: Option<u32>,
    #[arg(long)]
    certificate: Option<PathBuf>,
    /// Where a failure report goes; stderr otherwise.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Iteration log, one JSON object per line.
    #[arg(long)]
    log: Option<PathBuf>,
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn input(message: impl ToString) -> Failure {
        Failure { code: FailureKind::InvalidInput.exit_code(), message: message.to_string() }
    }

    fn other(message: impl ToString) -> Failure {
        Failure { code: FailureKind::Other.exit_code(), message: message.to_string() }
    }
}

type CliResult = Result<i32, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::other(format!("{}: {e}", p.display()))),
        None => io::stdout().write_all(text.as_bytes()).map_err(Failure::other),
    }
}

fn parse_ring(s: &str) -> Result<Ring, Failure> {
    s.parse().map_err(Failure::input)
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig, Failure> {
        let mut config = match &self.config {
            Some(p) => RunConfig::parse(&read(p)?).map_err(Failure::input)?,
            None => {
                let (Some(n), Some(ring), Some(d)) = (self.n, &self.ring, self.d) else {
                    return Err(Failure::input("either --config or all of --n, --ring and --d are required"));
                };
                RunConfig::new(n, parse_ring(ring)?, d)
            }
        };
        if let Some(n) = self.n {
            config.n = n;
        }
        if let Some(r) = &self.ring {
            config.ring = parse_ring(r)?;
        }
        if let Some(d) = self.d {
            config.d = d;
        }
        if let Some(v) = self.delta {
            config.delta = v;
        }
        if let Some(v) = self.eps {
            config.solve.eps = v;
        }
        if let Some(v) = self.max_iters {
            config.solve.max_iters = v;
        }
        if let Some(v) = self.presolve_iters {
            config.presolve.max_iters = v;
        }
        if let Some(v) = self.denominator_bits {
            config.denominator_bits = v;
        }
        if self.certificate.is_some() {
            config.output.certificate.clone_from(&self.certificate);
        }
        if self.report.is_some() {
            config.output.report.clone_from(&self.report);
        }
        if self.log.is_some() {
            config.output.log.clone_from(&self.log);
        }
        config.validate().map_err(Failure::input)?;
        Ok(config)
    }
}

/// Iteration logger writing JSON lines, or nothing.
struct Log(Option<BufWriter<fs::File>>);

impl Log {
    fn open(path: Option<&Path>) -> Result<Log, Failure> {
        let file = path
            .map(|p| fs::File::create(p).map_err(|e| Failure::other(format!("{}: {e}", p.display()))))
            .transpose()?;
        Ok(Log(file.map(BufWriter::new)))
    }

    fn record(&mut self, stage: Stage, entry: &IterationLog) {
        if let Some(w) = &mut self.0 {
            let mut line = serde_json::to_value(entry).unwrap_or_default();
            line["stage"] = json!(stage);
            // a broken log must not abort the solve
            let _ = writeln!(w, "{line}");
        }
    }

    fn finish(self) -> Result<(), Failure> {
        match self.0 {
            Some(mut w) => w.flush().map_err(Failure::other),
            None => Ok(()),
        }
    }
}

fn emit_report(report: &FailureReport, path: Option<&Path>) -> CliResult {
    let text = report.to_json().map_err(Failure::other)?;
    match path {
        Some(p) => {
            fs::write(p, &text).map_err(|e| Failure::other(format!("{}: {e}", p.display())))?;
            eprintln!("{} failed: {}", report.stage, report.message);
        }
        None => eprint!("{text}"),
    }
    Ok(report.exit_code())
}

fn load_instance(path: &Path) -> Result<SosInstance, Failure> {
    let bundle = BallBundle::from_json(&read(path)?).map_err(Failure::input)?;
    SosInstance::from_bundle(bundle).map_err(Failure::input)
}

fn run_pipeline(args: &RunArgs) -> CliResult {
    let config = args.config()?;
    let mut log = Log::open(config.output.log.as_deref())?;
    let outcome = pipeline(&config, &mut |s, e| log.record(s, e));
    log.finish()?;
    match outcome {
        Outcome::Certified(cert) => {
            let mut summary = format!(
                "{} d={}: lambda_certified {:.9} kappa_certified {:.9}",
                cert.group, cert.radius, cert.lambda_certified, cert.kappa_certified
            );
            if let Some((lo, hi)) = kazhdan_baselines(config.n, config.ring) {
                summary.push_str(&format!(" (analytic kappa bounds: lower {lo}, upper {hi})"));
            }
            match &config.output.certificate {
                Some(p) => {
                    fs::write(p, cert.to_json()).map_err(|e| Failure::other(format!("{}: {e}", p.display())))?;
                    println!("{summary}");
                }
                None => {
                    print!("{}", cert.to_json());
                    eprintln!("{summary}");
                }
            }
            Ok(0)
        }
        Outcome::Failed(report) => emit_report(&report, config.output.report.as_deref()),
    }
}

fn run_sdp(ball: &Path, lambda0: Option<f64>, delta: f64, output: Option<&Path>, sdpa: Option<&Path>) -> CliResult {
    let inst = load_instance(ball)?;
    let program = match lambda0 {
        Some(l) => build_constrained(&inst, l, delta).map_err(Failure::input)?,
        None => build_unconstrained(&inst),
    };
    if let Some(p) = sdpa {
        let text = write_sdpa(&program).map_err(Failure::other)?;
        write_or_print(Some(p), &text)?;
    }
    write_or_print(output, &program.to_json().map_err(Failure::other)?)?;
    Ok(0)
}

fn run_solve(ball: &Path, args: &RunArgs, output: Option<&Path>) -> CliResult {
    let config = args.config()?;
    let inst = load_instance(ball)?;
    let mut log = Log::open(config.output.log.as_deref())?;
    let result = sosgap::pipeline::solve_stage(&inst, &config, &mut |s, e| log.record(s, e));
    log.finish()?;
    let report = match result {
        Ok(Ok(artifact)) => {
            write_or_print(output, &artifact.to_json().map_err(Failure::other)?)?;
            return Ok(0);
        }
        Ok(Err(report)) => report,
        Err(e) => FailureReport::from_error(Stage::Solve, &e),
    };
    emit_report(&report, config.output.report.as_deref())
}

fn run_certify(ball: &Path, solution: &Path, args: &RunArgs, output: Option<&Path>) -> CliResult {
    let config = args.config()?;
    let inst = load_instance(ball)?;
    let artifact = SolveArtifact::from_json(&read(solution)?).map_err(Failure::input)?;
    let report = match certify_stage(&inst, &artifact, &config.certify_settings()) {
        Ok(Ok(cert)) => {
            write_or_print(output.or(config.output.certificate.as_deref()), &cert.to_json())?;
            return Ok(0);
        }
        Ok(Err(report)) => report,
        Err(e) => FailureReport::from_error(Stage::Certify, &e),
    };
    emit_report(&report, config.output.report.as_deref())
}

fn run_verify(path: &Path) -> CliResult {
    match verify(&read(path)?) {
        Ok(cert) => {
            println!(
                "valid: {} d={} lambda_certified {:.9} kappa_certified {:.9}",
                cert.group, cert.radius, cert.lambda_certified, cert.kappa_certified
            );
            Ok(0)
        }
        Err(e) => {
            println!("rejected: check {} failed: {}", e.check, e.detail);
            Ok(1)
        }
    }
}

fn run_oracle(table: Option<&Path>, n: Option<usize>, ring: Option<&str>, cap: usize) -> CliResult {
    let table: FiniteGroupTable = match (table, n, ring) {
        (Some(p), _, _) => serde_json::from_str(&read(p)?).map_err(Failure::input)?,
        (None, Some(n), Some(r)) => {
            let ring = parse_ring(r)?;
            if ring == Ring::Integers {
                return Err(Failure::input("the oracle needs a finite ring"));
            }
            let gens = elementary_generators(n, ring).map_err(Failure::input)?;
            enumerate_group(&gens, cap).map_err(Failure::input)?
        }
        _ => return Err(Failure::input("give either --table or both --n and --ring")),
    };
    let gap = spectral_gap_exact(&table).map_err(Failure::other)?;
    println!("order {} generators {} spectral_gap {gap:.17}", table.order(), table.generator_indices().len());
    Ok(0)
}

fn dispatch(cli: Cli) -> CliResult {
    match cli.command {
        Command::Pipeline(args) => run_pipeline(&args),
        Command::Config(args) => {
            let text = args.config()?.to_toml().map_err(Failure::other)?;
            write_or_print(None, &text)?;
            Ok(0)
        }
        Command::Ball { run, output } => {
            let bundle = build_stage(&run.config()?).map_err(Failure::input)?;
            write_or_print(output.as_deref(), &bundle.to_json().map_err(Failure::other)?)?;
            Ok(0)
        }
        Command::Sdp { ball, lambda0, delta, output, sdpa } => {
            run_sdp(&ball, lambda0, delta, output.as_deref(), sdpa.as_deref())
        }
        Command::Solve { ball, run, output } => run_solve(&ball, &run, output.as_deref()),
        Command::Certify { ball, solution, run, output } => run_certify(&ball, &solution, &run, output.as_deref()),
        Command::Verify { certificate } => run_verify(&certificate),
        Command::Oracle { table, n, ring, cap } => run_oracle(table.as_deref(), n, ring.as_deref(), cap),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { FailureKind::InvalidInput.exit_code() } else { 0 };
            return ExitCode::from(code as u8);
        }
    };
    let code = match dispatch(cli) {
        Ok(c) => c,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    };
    ExitCode::from(code as u8)
}
