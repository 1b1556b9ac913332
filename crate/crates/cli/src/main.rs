use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;

use filterlab::diagnostics::{observability_matrix_rank, DEFAULT_RANK_TOL};
use filterlab::harness::acceptance::{run_criterion, CRITERIA};
use filterlab::harness::{output_root, run_experiment, ExperimentConfig, ExperimentKind};
use filterlab::Error;

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "filterlab", version, about = "Filter stability experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Run {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output root; results go to <out>/<name>/. Defaults to $FILTERLAB_OUT or ./out.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate signal and observation paths.
    Simulate(Run),
    /// Run Kalman-Bucy and/or particle filters on simulated paths.
    Filter(Run),
    /// Two filters from different priors on a shared path.
    Stability(Run),
    /// Non-merging example with equivalent priors.
    Counterexample(Run),
    /// Merging of one-step predictors for a discrete-time chain.
    Predictor(Run),
    /// Point masses against their noisy convolutions.
    Convolution(Run),
    /// Rank test of the pair (A, C). Matrices are rows separated by ';', entries by ','.
    Observability {
        #[arg(long = "A", visible_alias = "a")]
        a: String,
        #[arg(long = "C", visible_alias = "c")]
        c: String,
        #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
        tol: f64,
    },
    /// Observation sandwich and flow deviation checks for a diffusion model.
    Diagnose(Run),
    /// Filter restart identity on a finite hidden Markov model.
    Lemma42(Run),
    /// Run the acceptance suite (optionally only the listed criteria).
    CheckAll {
        ids: Vec<u8>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn is_config_error(e: &Error) -> bool {
    match e {
        Error::Config(_)
        | Error::InvalidModel(_)
        | Error::InvalidMeasure(_)
        | Error::DimensionMismatch(_)
        | Error::SingularNoise
        | Error::Io(_) => true,
        Error::Annotated { source, .. } => is_config_error(source),
        _ => false,
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if is_config_error(e) { EXIT_CONFIG } else { EXIT_FAIL })
}

fn run(kind: ExperimentKind, args: &Run) -> ExitCode {
    let cfg = match ExperimentConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    if cfg.kind != kind {
        return fail(&Error::Config(format!(
            "{} has kind = \"{}\", not \"{}\"",
            args.config.display(),
            cfg.kind.name(),
            kind.name()
        )));
    }
    let out = match run_experiment(&cfg) {
        Ok(o) => o,
        Err(e) => return fail(&e),
    };
    let dir = args.out.clone().unwrap_or_else(output_root).join(cfg.output_name());
    if let Err(e) = out.write_to(&dir) {
        return fail(&e);
    }
    print!("{}", out.summary());
    println!("results in {}", dir.display());
    if out.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAIL)
    }
}

fn parse_matrix(text: &str, what: &str) -> Result<DMatrix<f64>, Error> {
    let rows: Vec<Vec<f64>> = text
        .split(';')
        .map(|row| {
            row.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|e| Error::Config(format!("{what}: '{}': {e}", v.trim()))))
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Config(format!("{what}: rows of unequal length")));
    }
    Ok(DMatrix::from_row_iterator(rows.len(), cols, rows.into_iter().flatten()))
}

fn observability(a: &str, c: &str, tol: f64) -> ExitCode {
    let report = parse_matrix(a, "A")
        .and_then(|a| Ok((a, parse_matrix(c, "C")?)))
        .and_then(|(a, c)| observability_matrix_rank(&a, &c, tol));
    match report {
        Ok(r) => {
            println!("rank: {}", r.rank);
            let sv: Vec<String> = r.singular_values.iter().map(|s| format!("{s:.6e}")).collect();
            println!("singular values: {}", sv.join(" "));
            println!("observable: {}", if r.observable { "yes" } else { "no" });
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

fn check_all(ids: &[u8], out: Option<&Path>) -> ExitCode {
    if let Some(bad) = ids.iter().find(|i| !CRITERIA.iter().any(|c| c.id == **i)) {
        return fail(&Error::Config(format!("no criterion {bad}")));
    }
    let mut lines = Vec::new();
    let mut all = true;
    for c in CRITERIA.iter().filter(|c| ids.is_empty() || ids.contains(&c.id)) {
        let o = run_criterion(c);
        println!("{}", o.line());
        all &= o.passed();
        lines.push(o.line());
    }
    let dir = out.map(Path::to_path_buf).unwrap_or_else(output_root).join("check_all");
    let written = std::fs::create_dir_all(&dir).and_then(|_| std::fs::write(dir.join("summary.txt"), lines.join("\n") + "\n"));
    if let Err(e) = written {
        return fail(&Error::Io(e));
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAIL)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match &cli.command {
        Command::Simulate(r) => run(ExperimentKind::Simulate, r),
        Command::Filter(r) => run(ExperimentKind::Filter, r),
        Command::Stability(r) => run(ExperimentKind::Stability, r),
        Command::Counterexample(r) => run(ExperimentKind::Counterexample, r),
        Command::Predictor(r) => run(ExperimentKind::Predictor, r),
        Command::Convolution(r) => run(ExperimentKind::Convolution, r),
        Command::Diagnose(r) => run(ExperimentKind::Diagnose, r),
        Command::Lemma42(r) => run(ExperimentKind::Lemma42, r),
        Command::Observability { a, c, tol } => observability(a, c, *tol),
        Command::CheckAll { ids, out } => check_all(ids, out.as_deref()),
    }
}
