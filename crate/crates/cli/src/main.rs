use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use condmem::analytics::fit::{fit, FitData, FitModel};
use condmem::analytics::{analyze, Table};
use condmem::eventlog::VERSION;
use condmem::oracle::{evaluate_grid, parse_grid, FORMULAS};
use condmem::reproduce::{reproduce, selfcheck, Figure};
use condmem::{EventLog, RunConfig};

const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_ACCEPTANCE: u8 = 4;

#[derive(Parser)]
#[command(name = "condmem", version, about = "Conditionally controlled heralded single-photon memories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelName {
    Gaussian,
    ExpDecay,
    ModulatedGaussian,
    P2cP22c,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo and write an event log.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        /// Overrides run.n_trials.
        #[arg(long)]
        trials: Option<u64>,
        /// Extra `section.key=value` overrides.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute the standard tables from an event log.
    Analyze {
        log: PathBuf,
        /// Log of the parallel-polarization run paired with `log`.
        #[arg(long)]
        parallel: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Evaluate a closed form over a grid, e.g. `oracle p11 p1=0.0012 n=1:23:1`.
    Oracle {
        formula: String,
        /// `name=values` with values as `a,b,c` or `start:stop:step`.
        params: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a model to an `x,y,y_err[,series]` table.
    Fit {
        #[arg(value_enum)]
        model: ModelName,
        data: PathBuf,
        /// Hold the envelope of the modulated Gaussian at `p0,T`.
        #[arg(long, value_name = "P0,T")]
        fixed_envelope: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rerun a figure and compare it with the closed forms.
    Reproduce {
        #[arg(long, default_value = "all")]
        figure: String,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Compare every estimator with its closed form over a grid of rates.
    Selfcheck {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 20_000_000)]
        trials: u64,
    },
}

#[derive(Debug)]
struct AcceptanceFailure(String);

impl std::fmt::Display for AcceptanceFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "acceptance failed: {}", self.0)
    }
}

impl std::error::Error for AcceptanceFailure {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<AcceptanceFailure>() {
            return EXIT_ACCEPTANCE;
        }
        if cause.is::<std::io::Error>() {
            return EXIT_IO;
        }
        if let Some(e) = cause.downcast_ref::<condmem::Error>() {
            return match e {
                condmem::Error::Io(_) => EXIT_IO,
                condmem::Error::InvalidConfig { .. }
                | condmem::Error::InvalidParameter { .. }
                | condmem::Error::Parse { .. }
                | condmem::Error::MismatchedConfigs(_) => EXIT_CONFIG,
                _ => 1,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Simulate {
            config,
            seed,
            threads,
            trials,
            set,
            out,
        } => simulate(config.as_deref(), seed, threads, trials, &set, &out),
        Command::Analyze {
            log,
            parallel,
            out,
            format: Format::Csv,
        } => analyze_logs(&log, parallel.as_deref(), &out),
        Command::Oracle { formula, params, out } => oracle(&formula, &params, out.as_deref()),
        Command::Fit {
            model,
            data,
            fixed_envelope,
            out,
        } => fit_table(model, &data, fixed_envelope.as_deref(), out.as_deref()),
        Command::Reproduce {
            figure,
            scale,
            seed,
            out,
            format: Format::Csv,
        } => reproduce_figures(&figure, scale, seed, &out),
        Command::Selfcheck { seed, trials } => run_selfcheck(seed, trials),
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(RunConfig::parse(&text).with_context(|| format!("in {}", p.display()))?)
        }
        None => Ok(RunConfig::default()),
    }
}

fn simulate(
    config: Option<&Path>,
    seed: Option<u64>,
    threads: Option<usize>,
    trials: Option<u64>,
    set: &[String],
    out: &Path,
) -> Result<()> {
    let mut cfg = load_config(config)?;
    for item in set {
        let Some((k, v)) = item.split_once('=') else {
            return Err(condmem::Error::InvalidConfig {
                key: item.clone(),
                reason: "expected KEY=VALUE".into(),
            }
            .into());
        };
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(n) = trials {
        cfg.n_trials = n;
    }
    if let Some(t) = threads {
        cfg.threads = t;
        cfg.shards = cfg.shards.max(t);
    }
    let log = condmem::run(&cfg)?;
    log.save(out).with_context(|| format!("writing {}", out.display()))?;
    let s = log.summary();
    println!("config_hash = {}", cfg.hash());
    println!("records = {}", log.records.len());
    println!("ready = {}", s.ready);
    println!("flush = {}", s.flush);
    println!("armed_trials = {}", s.armed_trials());
    Ok(())
}

fn write_tables(tables: &[Table], dir: &Path) -> Result<()> {
    for t in tables {
        t.write_csv(dir).with_context(|| format!("writing {} to {}", t.name, dir.display()))?;
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn analyze_logs(log: &Path, parallel: Option<&Path>, out: &Path) -> Result<()> {
    let perp = EventLog::load(log).with_context(|| format!("reading {}", log.display()))?;
    let par = parallel
        .map(|p| EventLog::load(p).with_context(|| format!("reading {}", p.display())))
        .transpose()?;
    let analysis = analyze(&perp, par.as_ref())?;
    write_tables(&analysis.tables, out)?;
    let text = format!(
        "# condmem {VERSION} config_hash={}\n{}",
        perp.config.hash(),
        analysis.to_text()
    );
    write_text(&out.join("summary.txt"), &text)?;
    print!("{}", analysis.to_text());
    Ok(())
}

fn oracle(formula: &str, params: &[String], out: Option<&Path>) -> Result<()> {
    if !FORMULAS.iter().any(|(f, _)| *f == formula) {
        let names: Vec<&str> = FORMULAS.iter().map(|(f, _)| *f).collect();
        return Err(condmem::Error::InvalidConfig {
            key: formula.into(),
            reason: format!("unknown formula; expected one of {}", names.join(", ")),
        }
        .into());
    }
    let mut grids = BTreeMap::new();
    for p in params {
        let (k, v) = p.split_once('=').ok_or_else(|| condmem::Error::InvalidConfig {
            key: p.clone(),
            reason: "expected name=values".into(),
        })?;
        grids.insert(k.trim().to_ascii_lowercase(), parse_grid(v)?);
    }
    let (header, rows) = evaluate_grid(formula, &grids)?;
    let mut text = format!("# condmem {VERSION} config_hash=none oracle {formula}\n{}\n", header.join(","));
    for row in rows {
        let cells: Vec<String> = row.iter().map(f64::to_string).collect();
        let _ = writeln!(text, "{}", cells.join(","));
    }
    match out {
        Some(p) => write_text(p, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Reads `x,y,y_err[,series]` rows, skipping `#` lines and a header row.
fn read_fit_data(path: &Path) -> Result<(FitData, String)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut hash = "none".to_string();
    let (mut x, mut y, mut e, mut s) = (vec![], vec![], vec![], vec![]);
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(h) = rest.split_whitespace().find_map(|w| w.strip_prefix("config_hash=")) {
                hash = h.to_string();
            }
            continue;
        }
        if line.is_empty() || line.starts_with('x') {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let num = |c: &str| -> Result<f64> {
            c.parse::<f64>()
                .map_err(|_| condmem::Error::Parse { line: i + 1, reason: format!("bad number `{c}`") }.into())
        };
        match cells.len() {
            3 | 4 => {
                x.push(num(cells[0])?);
                y.push(num(cells[1])?);
                e.push(num(cells[2])?);
                s.push(if cells.len() == 4 { num(cells[3])? as u8 } else { 0 });
            }
            n => bail!(condmem::Error::Parse { line: i + 1, reason: format!("expected 3 or 4 columns, found {n}") }),
        }
    }
    let mut data = FitData::new(x, y, e)?;
    data.series = s;
    Ok((data, hash))
}

fn fit_table(model: ModelName, data: &Path, envelope: Option<&str>, out: Option<&Path>) -> Result<()> {
    let (data, hash) = read_fit_data(data)?;
    let fixed_envelope = match envelope {
        None => None,
        Some(s) => {
            let v = parse_grid(s)?;
            if v.len() != 2 {
                bail!(condmem::Error::InvalidConfig { key: "fixed-envelope".into(), reason: "expected P0,T".into() });
            }
            Some((v[0], v[1]))
        }
    };
    let kind = match model {
        ModelName::Gaussian => FitModel::Gaussian,
        ModelName::ExpDecay => FitModel::ExpDecay,
        ModelName::ModulatedGaussian => FitModel::ModulatedGaussian { fixed_envelope },
        ModelName::P2cP22c => FitModel::P2cP22cPair,
    };
    let result = fit(kind, &data)?;
    let text = format!("# condmem {VERSION} config_hash={hash}\n{result}");
    match out {
        Some(p) => write_text(p, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn reproduce_figures(figure: &str, scale: f64, seed: u64, out: &Path) -> Result<()> {
    let figures: Vec<Figure> = if figure == "all" {
        Figure::ALL.to_vec()
    } else {
        vec![figure.parse().map_err(|reason| condmem::Error::InvalidConfig { key: "figure".into(), reason })?]
    };
    let mut failed = Vec::new();
    for f in figures {
        let report = reproduce(f, scale, seed)?;
        write_tables(&report.tables, out)?;
        let header = format!("# condmem {VERSION} config_hash={}\n", report.config_hashes.join(","));
        write_text(&out.join(format!("{f}_report.txt")), &(header + &report.to_text()))?;
        print!("{}", report.to_text());
        if !report.passed() {
            failed.push(f.to_string());
        }
    }
    if !failed.is_empty() {
        return Err(AcceptanceFailure(failed.join(", ")).into());
    }
    Ok(())
}

fn run_selfcheck(seed: u64, trials: u64) -> Result<()> {
    let points = selfcheck(seed, trials)?;
    let mut failures = 0;
    for p in &points {
        for c in &p.checks {
            println!("p1={} pc={} Nc={} {c}", p.p1, p.pc, p.nc);
            failures += usize::from(!c.passed);
        }
    }
    println!("failures = {failures}");
    if failures > 0 {
        return Err(AcceptanceFailure(format!("{failures} selfcheck comparisons")).into());
    }
    Ok(())
}
