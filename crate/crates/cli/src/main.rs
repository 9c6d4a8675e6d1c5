use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{ArgGroup, Parser, ValueEnum};
use optground::oracle::Interpretation;
use optground::session::{RunOptions, Runner, ShotOutput};
use optground::{
    emit_stats, parse_fact_set, parse_program, EngineConfig, Error, RenderOptions, StatsFormat,
};

/// Incremental grounder for multi-shot answer set programs.
#[derive(Debug, Parser)]
#[command(name = "optground", version)]
#[command(group(ArgGroup::new("input").required(true).args(["shots", "stdin"])))]
struct Cli {
    /// Non-ground program.
    #[arg(long, value_name = "PATH")]
    program: PathBuf,

    /// Fact files, one shot each, in order.
    #[arg(long, value_name = "PATHS", num_args = 1..)]
    shots: Vec<PathBuf>,

    /// Read shots from standard input, each terminated by a `#endshot` line.
    #[arg(long)]
    stdin: bool,

    #[arg(long, value_enum, default_value_t = ModeArg::Tailored)]
    mode: ModeArg,

    /// Compute answer sets of every shot with the built-in exact solver.
    #[arg(long)]
    solve: bool,

    /// Atom bound for the built-in solver.
    #[arg(long, value_name = "N", default_value_t = 20)]
    max_solve_atoms: usize,

    /// Write the ground program of shot N to DIR/shot-000N.lp.
    #[arg(long, value_name = "DIR")]
    emit_ground: Option<PathBuf>,

    /// Print rule bodies of the homologous rules instead of simplified ones.
    #[arg(long, requires = "emit_ground")]
    homologous: bool,

    /// Keep only rules reachable from the shot's facts before emitting or solving.
    #[arg(long)]
    filter: bool,

    /// Write per-shot statistics here (`-` for standard output).
    #[arg(long, value_name = "PATH")]
    stats: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = StatsFormatArg::Lines)]
    stats_format: StatsFormatArg,

    /// Abort when live plus deleted rules exceed N.
    #[arg(long, value_name = "N")]
    max_rules: Option<usize>,

    #[arg(long, value_enum, default_value_t = AgainstArg::CurrentF)]
    simplify_against: AgainstArg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Tailored,
    Plain,
    Scratch,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StatsFormatArg {
    Lines,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AgainstArg {
    CurrentF,
    Pf,
}

impl Cli {
    fn run_options(&self) -> RunOptions {
        let mode = match self.mode {
            ModeArg::Tailored => optground::Mode::Tailored,
            ModeArg::Plain => optground::Mode::Plain,
            ModeArg::Scratch => optground::Mode::Scratch,
        };
        let simplify_against = match self.simplify_against {
            AgainstArg::CurrentF => optground::SimplifyAgainst::CurrentF,
            AgainstArg::Pf => optground::SimplifyAgainst::Pf,
        };
        let body = if self.homologous {
            optground::BodyMode::Homologous
        } else {
            optground::BodyMode::Simplified
        };
        RunOptions {
            config: EngineConfig {
                mode,
                simplify_against,
                max_rules: self.max_rules,
            },
            solve: self.solve,
            max_solve_atoms: self.max_solve_atoms,
            filter: self.filter,
            render: self.emit_ground.is_some().then_some(RenderOptions {
                body,
                include_deleted: false,
            }),
        }
    }
}

/// Where per-shot statistics go. Line records are written as shots finish.
struct StatsSink {
    out: Option<Box<dyn Write>>,
    format: StatsFormat,
    pending: Vec<optground::ShotReport>,
}

impl StatsSink {
    fn open(cli: &Cli) -> Result<Self> {
        let out: Option<Box<dyn Write>> = match &cli.stats {
            Some(p) if p.as_os_str() == "-" => Some(Box::new(io::stdout())),
            Some(p) => Some(Box::new(io::BufWriter::new(
                fs::File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
            ))),
            // Standard output is free unless answer sets are printed there.
            None if !cli.solve => Some(Box::new(io::stdout())),
            None => None,
        };
        let format = match cli.stats_format {
            StatsFormatArg::Lines => StatsFormat::Lines,
            StatsFormatArg::Json => StatsFormat::Document,
        };
        Ok(StatsSink {
            out,
            format,
            pending: Vec::new(),
        })
    }

    fn push(&mut self, report: optground::ShotReport) -> Result<()> {
        let Some(out) = self.out.as_mut() else {
            return Ok(());
        };
        match self.format {
            StatsFormat::Lines => {
                out.write_all(emit_stats(std::slice::from_ref(&report), self.format).as_bytes())?;
                out.flush()?;
            }
            StatsFormat::Document => self.pending.push(report),
        }
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        if let Some(out) = self.out.as_mut() {
            out.write_all(emit_stats(&self.pending, self.format).as_bytes())?;
            out.flush()?;
        }
        Ok(())
    }
}

fn print_answer_sets(
    index: usize,
    sets: &std::collections::BTreeSet<Interpretation>,
) -> Result<()> {
    let mut out = io::stdout().lock();
    writeln!(out, "Shot {index}")?;
    for (i, a) in sets.iter().enumerate() {
        writeln!(out, "Answer: {}", i + 1)?;
        let atoms: Vec<String> = a.iter().map(|x| x.to_string()).collect();
        writeln!(out, "{}", atoms.join(" "))?;
    }
    writeln!(
        out,
        "{}",
        if sets.is_empty() {
            "UNSATISFIABLE"
        } else {
            "SATISFIABLE"
        }
    )?;
    out.flush()?;
    Ok(())
}

struct Driver {
    runner: Runner,
    stats: StatsSink,
    emit_dir: Option<PathBuf>,
    shots: usize,
}

impl Driver {
    fn shot(&mut self, text: &str, origin: &str) -> Result<()> {
        let index = self.shots + 1;
        let facts = parse_fact_set(text).with_context(|| format!("shot {index} ({origin})"))?;
        let ShotOutput {
            report,
            ground,
            answer_sets,
        } = self
            .runner
            .shot(&facts)
            .with_context(|| format!("shot {index} ({origin})"))?;
        self.shots = index;
        if let (Some(dir), Some(text)) = (&self.emit_dir, ground) {
            write_ground(dir, index, &text)?;
        }
        if let Some(sets) = &answer_sets {
            print_answer_sets(index, sets)?;
        }
        self.stats.push(report)
    }
}

fn write_ground(dir: &Path, index: usize, text: &str) -> Result<()> {
    let path = dir.join(format!("shot-{index:04}.lp"));
    let mut body = text.to_string();
    if !body.is_empty() {
        body.push('\n');
    }
    fs::write(&path, body).with_context(|| format!("cannot write {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    let source = fs::read_to_string(&cli.program)
        .with_context(|| format!("cannot read {}", cli.program.display()))?;
    let program = parse_program(&source).with_context(|| format!("{}", cli.program.display()))?;
    if let Some(dir) = &cli.emit_ground {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let mut driver = Driver {
        runner: Runner::new(program, cli.run_options())?,
        stats: StatsSink::open(&cli)?,
        emit_dir: cli.emit_ground.clone(),
        shots: 0,
    };

    if cli.stdin {
        let mut frame = String::new();
        for line in io::stdin().lock().lines() {
            let line = line.context("cannot read standard input")?;
            if line.trim() == "#endshot" {
                driver.shot(&std::mem::take(&mut frame), "stdin")?;
            } else {
                frame.push_str(&line);
                frame.push('\n');
            }
        }
        if !frame.trim().is_empty() {
            driver.shot(&frame, "stdin")?;
        }
    } else {
        for path in &cli.shots {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            driver.shot(&text, &path.display().to_string())?;
        }
    }
    driver.stats.finish()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Unsafe { .. }) => 2,
        Some(Error::InstanceBound { .. } | Error::AtomBound { .. }) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
