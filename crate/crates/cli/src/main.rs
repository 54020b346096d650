mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use rayon::prelude::*;
use serde_json::json;
use toml::Value;

use commands::{Command, Outcome};
use config::{ConfigTree, RunConfig};
use error::CliError;
use output::{sibling, Cell, Table};

/// Dark and bright Bell modes of two distant atomic arrays.
#[derive(Parser, Debug)]
#[command(name = "darklattice", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// TOML configuration file, layered on top of --preset when both are given.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a parameter, e.g. --set lattice.n_perp=12.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output CSV; relative paths go under $DARKLATTICE_OUT_DIR if set.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Built-in configuration: fig1d, fig2a, fig2c, fig3b, fig3c, fig4b, defects, nonmarkov, field, analytic.
    #[arg(long)]
    preset: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("darklattice: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn build_tree(cli: &Cli) -> Result<ConfigTree, CliError> {
    let mut tree = ConfigTree::parse("", "empty")?;
    if let Some(name) = &cli.preset {
        tree.merge(ConfigTree::parse(config::preset(name)?, name)?);
    }
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        tree.merge(ConfigTree::parse(&text, &path.display().to_string())?);
    }
    for s in &cli.set {
        tree.set_str(s)?;
    }
    if let Some(seed) = cli.seed {
        tree.set("seed", Value::Integer(seed as i64), false)?;
    }
    if let Some(jobs) = cli.jobs {
        tree.set("jobs", Value::Integer(jobs as i64), false)?;
    }
    Ok(tree)
}

fn execute(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let cmd = cli.command;
    let tree = build_tree(cli)?.normalized()?;
    let base: RunConfig = tree.resolve()?;
    if let Some(c) = &base.command {
        if c != cmd.name() {
            return Err(CliError::Config(format!("configuration is for '{c}', not '{}'", cmd.name())));
        }
    }
    let digest = config::digest(cmd.name(), &tree);
    let points = config::sweep_points(&tree)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(base.jobs)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let results: Vec<Result<Outcome, CliError>> =
        pool.install(|| points.par_iter().map(|(_, cfg)| commands::run(cmd, cfg)).collect());
    let outcomes: Vec<Outcome> = results.into_iter().collect::<Result<_, _>>()?;

    let stem = cli.preset.clone().unwrap_or_else(|| cmd.name().to_string());
    let csv_path = output::resolve_path(cli.out.as_deref(), &format!("{stem}.csv"));
    let json_path = sibling(&csv_path, ".json");

    let sweep_key = base.sweep.as_ref().filter(|_| points.len() > 1 || points[0].0.is_some()).map(|s| s.key.clone());
    let summary = collect_summary(sweep_key.as_deref(), &points, &outcomes)?;

    let mut meta = vec![
        ("tool".to_string(), format!("darklattice {}", env!("CARGO_PKG_VERSION"))),
        ("command".to_string(), cmd.name().to_string()),
        ("seed".to_string(), base.seed.to_string()),
        ("config_digest".to_string(), digest.clone()),
    ];
    if let Some(p) = &cli.preset {
        meta.push(("preset".to_string(), p.clone()));
    }
    if let Some(k) = &sweep_key {
        meta.push(("sweep".to_string(), k.clone()));
    }

    let mut written = Vec::new();
    let mut extra = serde_json::Map::new();
    match (&sweep_key, outcomes.into_iter().next()) {
        (None, Some(Outcome { detail: Some(detail), .. })) => {
            detail.write_csv(&csv_path, &meta)?;
            extra.insert("detail_rows".into(), json!(detail.rows.len()));
        }
        _ => summary.write_csv(&csv_path, &meta)?,
    }
    written.push(csv_path.clone());

    let doc = json!({
        "tool": "darklattice",
        "version": env!("CARGO_PKG_VERSION"),
        "command": cmd.name(),
        "preset": cli.preset,
        "seed": base.seed,
        "config_digest": digest,
        "csv": csv_path.file_name().map(|f| f.to_string_lossy().into_owned()),
        "summary": summary.json_rows(),
        "extra": extra,
        "config": tree.to_toml(),
    });
    output::write_json(&json_path, &doc)?;
    written.push(json_path);
    Ok(written)
}

/// Stacks the per-point summaries, led by the sweep value when sweeping.
fn collect_summary(
    key: Option<&str>,
    points: &[(Option<Value>, RunConfig)],
    outcomes: &[Outcome],
) -> Result<Table, CliError> {
    let first = &outcomes[0].summary;
    let mut columns: Vec<&str> = Vec::new();
    if let Some(k) = key {
        columns.push(k);
    }
    columns.extend(first.columns.iter().map(String::as_str));
    let mut table = Table::new(&columns);
    for ((value, _), o) in points.iter().zip(outcomes) {
        if o.summary.columns != first.columns {
            return Err(CliError::Config("sweep changes the set of output columns".into()));
        }
        let mut row = Vec::with_capacity(columns.len());
        if key.is_some() {
            row.push(match value {
                Some(Value::Integer(i)) => Cell::Int(*i),
                Some(Value::Float(x)) => Cell::Float(*x),
                Some(Value::String(s)) => Cell::Text(s.clone()),
                Some(v) => Cell::Text(v.to_string()),
                None => Cell::Text(String::new()),
            });
        }
        row.extend(o.summary.rows[0].iter().cloned());
        table.push(row);
    }
    Ok(table)
}
