use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use mimo_drl::harness::{
    distribution_stats, emit_csv, load_config, load_csv, moving_average, run_experiment, ExperimentConfig, Policy,
    RunRecord, RunSummary,
};
use mimo_drl::Error;

#[derive(Parser)]
#[command(name = "mimo-drl", version, about = "Multi-agent DQN beam selection simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate the configured policies.
    Run(RunArgs),
    /// Repeat a run over a grid of config values.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// `section.key=v1,v2,...`; repeat for a cartesian grid.
        #[arg(long = "set", value_name = "KEY=VALUES", required = true)]
        set: Vec<String>,
    },
    /// Quartiles and CDF of per-slot average rates from a results CSV.
    Stats(StatsArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// TOML config; defaults apply to every missing key.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the configured seed list; repeatable.
    #[arg(long, value_name = "U64")]
    seed: Vec<u64>,
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Comma-separated policy names.
    #[arg(long, value_name = "NAME[,NAME...]", value_delimiter = ',')]
    policy: Vec<Policy>,
    #[arg(long, value_name = "N")]
    slots: Option<u64>,
    /// Run every job sequentially on one thread.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Args)]
struct StatsArgs {
    /// Results CSV written by `run`.
    input: PathBuf,
    /// Ignore the first N slots of every run.
    #[arg(long, default_value_t = 0)]
    skip: u64,
    /// CDF grid points.
    #[arg(long, default_value_t = 101)]
    grid: usize,
    #[arg(long, default_value_t = 500)]
    window: usize,
    /// Directory for quartiles.csv and cdf.csv; stdout only when absent.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_SINGULAR: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Sweep { run, set } => cmd_sweep(&run, &set),
        Command::Stats(args) => cmd_stats(&args).map(|()| ExitCode::SUCCESS),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config = e.chain().any(|c| matches!(c.downcast_ref::<Error>(), Some(Error::Config(_))));
            ExitCode::from(if config { EXIT_CONFIG } else { 1 })
        }
    }
}

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    Error::Config(msg.into()).into()
}

fn base_table(path: Option<&Path>) -> anyhow::Result<toml::Table> {
    let text = match path {
        Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => String::new(),
    };
    text.parse::<toml::Table>()
        .map_err(|e| config_error(format!("{}: {e}", path.map_or("<default>".into(), |p| p.display().to_string()))))
}

fn apply_overrides(mut config: ExperimentConfig, args: &RunArgs) -> anyhow::Result<ExperimentConfig> {
    if !args.seed.is_empty() {
        config.seeds = args.seed.clone();
    }
    if !args.policy.is_empty() {
        config.policies = args.policy.clone();
    }
    if let Some(n) = args.slots {
        config.slots = n;
    }
    config.validate()?;
    Ok(config)
}

fn load(args: &RunArgs) -> anyhow::Result<ExperimentConfig> {
    let config = match &args.config {
        Some(p) => load_config(p)?,
        None => ExperimentConfig::default(),
    };
    apply_overrides(config, args)
}

fn print_summaries(out: &mut impl Write, label: &str, sums: &[RunSummary]) -> std::io::Result<()> {
    for s in sums {
        writeln!(
            out,
            "{label}seed={} policy={:<7} mean_rate={:.4} final_ma={:.4} singular={}/{}",
            s.seed,
            s.policy.name(),
            s.mean_rate,
            s.final_moving_average,
            s.singular_slots,
            s.slots
        )?;
    }
    Ok(())
}

const SUMMARY_HEADER: [&str; 6] = ["seed", "policy", "slots", "singular_slots", "mean_rate", "final_moving_average"];

fn summary_fields(s: &RunSummary) -> [String; 6] {
    [
        s.seed.to_string(),
        s.policy.name().to_string(),
        s.slots.to_string(),
        s.singular_slots.to_string(),
        s.mean_rate.to_string(),
        s.final_moving_average.to_string(),
    ]
}

fn write_summary_csv(path: &Path, sums: &[RunSummary]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for s in sums {
        w.write_record(summary_fields(s))?;
    }
    w.flush()?;
    Ok(())
}

fn execute(config: &ExperimentConfig, dir: &Path, deterministic: bool) -> anyhow::Result<(RunRecord, Vec<RunSummary>)> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let record = run_experiment(config, !deterministic)?;
    emit_csv(&record, dir.join("results.csv"))?;
    fs::write(dir.join("config.toml"), config.to_toml()?)?;
    let sums = record.summaries(config.moving_average_window);
    write_summary_csv(&dir.join("summary.csv"), &sums)?;
    Ok((record, sums))
}

fn exit_for(any_all_singular: bool) -> ExitCode {
    if any_all_singular {
        eprintln!("error: singular zero-forcing problem in every slot of at least one run");
        ExitCode::from(EXIT_SINGULAR)
    } else {
        ExitCode::SUCCESS
    }
}

fn cmd_run(args: &RunArgs) -> anyhow::Result<ExitCode> {
    let config = load(args)?;
    let (_, sums) = execute(&config, &args.out, args.deterministic)?;
    print_summaries(&mut std::io::stdout().lock(), "", &sums)?;
    Ok(exit_for(sums.iter().any(RunSummary::all_singular)))
}

/// Parses `section.key=v1,v2`. Values are read as TOML where possible, so
/// `users=1,2` gives integers and `lr_schedule=constant` a string.
fn parse_set(spec: &str) -> anyhow::Result<(Vec<String>, Vec<toml::Value>)> {
    let (key, values) =
        spec.split_once('=').ok_or_else(|| config_error(format!("--set `{spec}`: expected KEY=VALUES")))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_string).collect();
    if path.iter().any(String::is_empty) {
        return Err(config_error(format!("--set `{spec}`: empty key segment")));
    }
    let values = split_values(values)
        .into_iter()
        .map(|v| {
            let v = v.trim();
            format!("x = {v}")
                .parse::<toml::Table>()
                .ok()
                .and_then(|mut t| t.remove("x"))
                .unwrap_or_else(|| toml::Value::String(v.to_string()))
        })
        .collect::<Vec<_>>();
    if values.is_empty() {
        return Err(config_error(format!("--set `{spec}`: no values")));
    }
    Ok((path, values))
}

/// Splits on commas outside brackets so `hidden=[64,64],[32,32]` works.
fn split_values(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '[' => depth += 1,
            ']' => depth -= 1,
            ',' if depth == 0 => {
                out.push(std::mem::take(&mut cur));
                continue;
            }
            _ => {}
        }
        cur.push(c);
    }
    if !cur.trim().is_empty() {
        out.push(cur);
    }
    out
}

fn set_path(table: &mut toml::Table, path: &[String], value: toml::Value) -> anyhow::Result<()> {
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut t = table;
    for p in parents {
        let entry = t.entry(p.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        t = entry.as_table_mut().ok_or_else(|| config_error(format!("`{p}` is not a section")))?;
    }
    t.insert(last.clone(), value);
    Ok(())
}

fn label_value(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn cmd_sweep(args: &RunArgs, sets: &[String]) -> anyhow::Result<ExitCode> {
    let base = base_table(args.config.as_deref())?;
    let axes = sets.iter().map(|s| parse_set(s)).collect::<anyhow::Result<Vec<_>>>()?;
    let mut grid: Vec<Vec<usize>> = vec![vec![]];
    for (_, values) in &axes {
        grid = grid.into_iter().flat_map(|g| (0..values.len()).map(move |i| [g.clone(), vec![i]].concat())).collect();
    }
    fs::create_dir_all(&args.out)?;
    let mut all = Vec::new();
    let mut singular = false;
    let mut stdout = std::io::stdout().lock();
    for point in &grid {
        let mut table = base.clone();
        let mut labels = Vec::new();
        for ((path, values), &i) in axes.iter().zip(point) {
            set_path(&mut table, path, values[i].clone())?;
            labels.push((path.join("."), label_value(&values[i])));
        }
        let text = toml::to_string(&table).map_err(|e| config_error(e.to_string()))?;
        let config = apply_overrides(ExperimentConfig::from_toml(&text)?, args)?;
        let name = labels.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join("_");
        let dir = args.out.join(name.replace(['/', ' ', '[', ']', '"'], ""));
        let (_, sums) = execute(&config, &dir, args.deterministic)?;
        singular |= sums.iter().any(RunSummary::all_singular);
        print_summaries(&mut stdout, &format!("[{name}] "), &sums)?;
        all.push((labels, sums));
    }
    let keys: Vec<String> = axes.iter().map(|(p, _)| p.join(".")).collect();
    let mut w = csv::Writer::from_path(args.out.join("sweep.csv"))?;
    let mut header = keys.clone();
    header.extend(SUMMARY_HEADER.map(String::from));
    w.write_record(&header)?;
    for (labels, sums) in &all {
        for s in sums {
            let mut row: Vec<String> = labels.iter().map(|(_, v)| v.clone()).collect();
            row.extend(summary_fields(s));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(exit_for(singular))
}

fn cmd_stats(args: &StatsArgs) -> anyhow::Result<()> {
    let record = load_csv(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    if args.window == 0 {
        bail!(config_error("--window must be at least 1"));
    }
    let mut policies: Vec<Policy> = Vec::new();
    for (_, p) in record.runs() {
        if !policies.contains(&p) {
            policies.push(p);
        }
    }
    let mut quart = csv::Writer::from_writer(Vec::new());
    quart.write_record(["policy", "count", "mean", "min", "q1", "median", "q3", "max", "final_moving_average"])?;
    let mut cdf = csv::Writer::from_writer(Vec::new());
    cdf.write_record(["policy", "rate", "cdf"])?;
    for p in policies {
        let mut pooled = Vec::new();
        let mut finals = Vec::new();
        for (seed, _) in record.runs().into_iter().filter(|&(_, q)| q == p) {
            let rates: Vec<f64> =
                record.series(seed, p).filter(|r| r.slot >= args.skip).map(|r| r.average_rate).collect();
            finals.push(moving_average(&rates, args.window).last().copied().unwrap_or(f64::NAN));
            pooled.extend(rates);
        }
        let Some(s) = distribution_stats(&pooled, args.grid) else {
            eprintln!("warning: no usable rates for {p}");
            continue;
        };
        let final_ma = finals.iter().sum::<f64>() / finals.len() as f64;
        quart.write_record([
            p.name().to_string(),
            s.count.to_string(),
            s.mean.to_string(),
            s.min.to_string(),
            s.q1.to_string(),
            s.median.to_string(),
            s.q3.to_string(),
            s.max.to_string(),
            final_ma.to_string(),
        ])?;
        for (x, f) in &s.cdf {
            cdf.write_record([p.name().to_string(), x.to_string(), f.to_string()])?;
        }
    }
    let quart = quart.into_inner().context("flushing quartiles")?;
    let cdf = cdf.into_inner().context("flushing cdf")?;
    std::io::stdout().write_all(&quart)?;
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("quartiles.csv"), &quart)?;
        fs::write(dir.join("cdf.csv"), &cdf)?;
    }
    Ok(())
}
