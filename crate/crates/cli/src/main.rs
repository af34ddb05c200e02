use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ncpb_cli::generate::parse_group;
use ncpb_cli::{emit, generate_scenario, render, run_file, Flags, Format, GenerateKind, Report, Verb, EXIT_INPUT};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "ncpb", version, about = "Finite-dimensional noncommutative Poisson boundary checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file, or a directory whose *.json files are all run.
    scenario: PathBuf,
    /// Residual tolerance for exact identities.
    #[arg(long)]
    tol: Option<f64>,
    /// Dilation depth.
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    #[arg(long)]
    seed: Option<u64>,
    /// Largest stage dimension for `dilate`.
    #[arg(long)]
    dim_cap: Option<usize>,
    /// Write the report here (atomically) instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    RandomRegular,
    GroupWalk,
    NonGeneratingControl,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(value_enum)]
    kind: Kind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Block sizes for random-regular, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    blocks: Vec<usize>,
    /// Unitary pairs for random-regular.
    #[arg(long, default_value_t = 2)]
    pairs: usize,
    /// Group for group-walk: cyclic:N or s3.
    #[arg(long, default_value = "cyclic:3")]
    group: String,
    /// Uniform measure on these element indices.
    #[arg(long, value_delimiter = ',', conflicts_with = "measure")]
    support: Vec<usize>,
    /// Explicit measure, one mass per element.
    #[arg(long, value_delimiter = ',')]
    measure: Vec<f64>,
    /// Warn when the measure is not symmetric with full support.
    #[arg(long)]
    symmetric: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Hyperstate validity, standard form and class.
    Classify(RunArgs),
    /// Fixed points of the Poisson transform.
    Harmonic(RunArgs),
    /// Choi-Effros boundary algebra.
    Boundary(RunArgs),
    /// Fixed points of both transforms against the center.
    DoubleErgodicity(RunArgs),
    /// Bimodular averaging onto the center.
    Mv(RunArgs),
    /// Decay of commutators against the fixed-space dimension.
    Foguel(RunArgs),
    /// Fixed points of a product hyperstate.
    Tensor(RunArgs),
    /// Entropy, its powers, bounds and the zero-entropy criterion.
    Entropy(RunArgs),
    /// Furstenberg-type entropy of an inclusion.
    Furstenberg(RunArgs),
    /// Entropy gap inequality.
    Gap(RunArgs),
    /// Iterated Stinespring dilation.
    Dilate(RunArgs),
    /// Every applicable check.
    VerifyAll(RunArgs),
    /// Writes a generated scenario.
    Generate(GenerateArgs),
}

fn scenario_files(path: &Path) -> std::io::Result<Vec<PathBuf>> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

fn write_atomic(path: &Path, text: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn output(text: &str, out: Option<&Path>) -> Result<(), ExitCode> {
    match out {
        None => {
            let mut stdout = std::io::stdout().lock();
            match stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    eprintln!("ncpb: cannot write report: {e}");
                    Err(ExitCode::from(EXIT_INPUT as u8))
                }
                _ => Ok(()),
            }
        }
        Some(p) => write_atomic(p, text).map_err(|e| {
            eprintln!("ncpb: cannot write {}: {e}", p.display());
            ExitCode::from(EXIT_INPUT as u8)
        }),
    }
}

fn run_verb(verb: Verb, a: RunArgs) -> ExitCode {
    let files = match scenario_files(&a.scenario) {
        Ok(f) if !f.is_empty() => f,
        Ok(_) => {
            eprintln!("ncpb: no scenario files in {}", a.scenario.display());
            return ExitCode::from(EXIT_INPUT as u8);
        }
        Err(e) => {
            eprintln!("ncpb: {}: {e}", a.scenario.display());
            return ExitCode::from(EXIT_INPUT as u8);
        }
    };
    let flags = Flags {
        tol: a.tol,
        depth: a.depth,
        seed: a.seed,
        dim_cap: a.dim_cap,
    };
    let results: Vec<_> = files.par_iter().map(|f| run_file(verb, f, &flags)).collect();
    let mut reports: Vec<Report> = vec![];
    let mut code = 0;
    for r in results {
        match r {
            Ok(rep) => {
                code = code.max(rep.exit_code());
                reports.push(rep);
            }
            Err(e) => {
                eprintln!("ncpb: {e}");
                code = EXIT_INPUT;
            }
        }
    }
    if let Err(c) = output(&render(&reports, a.format), a.out.as_deref()) {
        return c;
    }
    ExitCode::from(code as u8)
}

fn generate(a: GenerateArgs) -> ExitCode {
    let kind = match a.kind {
        Kind::RandomRegular => GenerateKind::RandomRegular {
            blocks: a.blocks,
            pairs: a.pairs,
        },
        Kind::NonGeneratingControl => GenerateKind::NonGeneratingControl,
        Kind::GroupWalk => {
            let Some(table) = parse_group(&a.group) else {
                eprintln!("ncpb: unknown group {:?}; use cyclic:N or s3", a.group);
                return ExitCode::from(EXIT_INPUT as u8);
            };
            let n = table.len();
            let measure = if !a.measure.is_empty() {
                a.measure
            } else if !a.support.is_empty() {
                let mut m = vec![0.0; n];
                for &g in &a.support {
                    if g >= n {
                        eprintln!("ncpb: support element {g} is out of range for a group of order {n}");
                        return ExitCode::from(EXIT_INPUT as u8);
                    }
                    m[g] = 1.0 / a.support.len() as f64;
                }
                m
            } else {
                vec![1.0 / n as f64; n]
            };
            GenerateKind::GroupWalk {
                name: a.group.replace(':', ""),
                table,
                measure,
                symmetric: a.symmetric,
            }
        }
    };
    match generate_scenario(&kind, a.seed) {
        Ok(g) => {
            for w in &g.warnings {
                eprintln!("ncpb: warning: {w}");
            }
            let mut text = emit(&g.scenario);
            text.push('\n');
            match output(&text, a.out.as_deref()) {
                Ok(()) => ExitCode::SUCCESS,
                Err(c) => c,
            }
        }
        Err(e) => {
            eprintln!("ncpb: {e}");
            ExitCode::from(EXIT_INPUT as u8)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INPUT as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let (verb, args) = match cli.command {
        Command::Classify(a) => (Verb::Classify, a),
        Command::Harmonic(a) => (Verb::Harmonic, a),
        Command::Boundary(a) => (Verb::Boundary, a),
        Command::DoubleErgodicity(a) => (Verb::DoubleErgodicity, a),
        Command::Mv(a) => (Verb::Mv, a),
        Command::Foguel(a) => (Verb::Foguel, a),
        Command::Tensor(a) => (Verb::Tensor, a),
        Command::Entropy(a) => (Verb::Entropy, a),
        Command::Furstenberg(a) => (Verb::Furstenberg, a),
        Command::Gap(a) => (Verb::Gap, a),
        Command::Dilate(a) => (Verb::Dilate, a),
        Command::VerifyAll(a) => (Verb::VerifyAll, a),
        Command::Generate(g) => return generate(g),
    };
    run_verb(verb, args)
}
