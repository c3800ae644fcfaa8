use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use secfmcw::codebook::validate_codebook;
use secfmcw_sim::design::{anchor_chirp, scenario_codebook};
use secfmcw_sim::experiments::{af_artifacts, with_workers};
use secfmcw_sim::table::{write_outputs, RowSink, Sidecar};
use secfmcw_sim::{Experiment, ResultTable, Scenario, ScenarioConfig, SimError, SimResult};

#[derive(Parser)]
#[command(name = "secfmcw-sim", version, about = "Secure FMCW ISAC simulator")]
struct Cli {
    /// Scenario file (TOML); defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 uses all cores).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Designs the secure phase codebook and writes it with its design trace.
    DesignCodebook,
    /// Runs one experiment (fig7, fig8, fig9, fig10, fig11, fig12, fig13, af, baseline).
    Run { experiment: String },
    /// Runs an experiment for each value of a configuration path.
    Sweep {
        experiment: String,
        /// Dotted configuration path, e.g. `codebook.code_len`.
        #[arg(long)]
        var: String,
        /// Comma-separated values; may be empty.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
    },
    /// Writes ambiguity-function profiles and the reference library.
    ExportAf,
    /// Validates the configuration and prints its hash.
    ValidateConfig,
    /// Prints the default configuration.
    DefaultConfig,
}

fn load(cli: &Cli) -> SimResult<ScenarioConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output.dir = o.clone();
    }
    Ok(cfg)
}

fn sidecar(cfg: &ScenarioConfig, experiments: Vec<String>, rows: usize, start: Instant) -> Sidecar {
    Sidecar {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        experiments,
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        rows,
        elapsed_s: start.elapsed().as_secs_f64(),
    }
}

fn report(paths: &[PathBuf], extra: serde_json::Value) {
    let files: Vec<String> = paths.iter().map(|p| p.display().to_string()).collect();
    println!("{}", serde_json::json!({ "status": "ok", "files": files, "summary": extra }));
}

fn parse_values(raw: &[String]) -> SimResult<Vec<f64>> {
    raw.iter()
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| SimError::Validation(vec![format!("sweep value {s:?} is not a number")]))
        })
        .collect()
}

fn execute(cli: &Cli) -> SimResult<()> {
    if let Command::DefaultConfig = cli.command {
        print!("{}", ScenarioConfig::default().to_toml());
        return Ok(());
    }
    let cfg = load(cli)?;
    cfg.validate()?;
    let start = Instant::now();
    let dir = cfg.output.dir.clone();
    match &cli.command {
        Command::ValidateConfig => {
            println!("{}", serde_json::json!({ "status": "ok", "config_hash": cfg.hash() }));
        }
        Command::DesignCodebook => {
            let cb = with_workers(cli.workers, || scenario_codebook(&cfg))?;
            let anchor = anchor_chirp(&cfg, cfg.codebook.code_len)?;
            let check = validate_codebook(&cb.phase, &cb.library, &anchor)?;
            let mut s = RowSink::new("design", &cfg.hash());
            let g = cb.phase.len() as u64;
            for (k, j) in cb.objective_trace.iter().enumerate() {
                s.push("sweep", k as f64, "objective", *j, g, 0.0);
            }
            s.push("sweep", 0.0, "max_mismatch", check.max_mismatch, g, 0.0);
            s.push("sweep", 0.0, "violations", check.violations.len() as f64, g, 0.0);
            s.push("sweep", 0.0, "distinctness_ops", check.distinctness_ops as f64, g, 0.0);
            let artifacts = vec![secfmcw_sim::table::Artifact {
                name: "codebook.txt".into(),
                contents: cb.phase.to_text(),
            }];
            let n = s.table.len();
            let paths = write_outputs(&dir, "design", &s.table, &sidecar(&cfg, vec!["design".into()], n, start), &artifacts)?;
            report(&paths, serde_json::json!({ "codewords": g, "max_mismatch": check.max_mismatch }));
        }
        Command::Run { experiment } => {
            let e: Experiment = experiment.parse()?;
            let scenario = Scenario::new(cfg.clone())?;
            let out = with_workers(cli.workers, || scenario.run(e))?;
            let n = out.table.len();
            let paths = write_outputs(&dir, e.name(), &out.table, &sidecar(&cfg, vec![e.name().into()], n, start), &out.artifacts)?;
            report(&paths, serde_json::json!({ "rows": n }));
        }
        Command::Sweep { experiment, var, values } => {
            let e: Experiment = experiment.parse()?;
            let values = parse_values(values)?;
            let values = &values;
            let table: ResultTable = secfmcw_sim::sweep(&cfg, e, var, values, cli.workers)?;
            let n = table.len();
            let stem = format!("sweep_{}_{}", e.name(), var.replace('.', "_"));
            let paths = write_outputs(&dir, &stem, &table, &sidecar(&cfg, vec![e.name().into()], n, start), &[])?;
            report(&paths, serde_json::json!({ "rows": n, "values": values.len() }));
        }
        Command::ExportAf => {
            let scenario = Scenario::new(cfg.clone())?;
            let out = with_workers(cli.workers, || scenario.run(Experiment::Af))?;
            let cb = scenario.codebook()?;
            let anchor = anchor_chirp(&cfg, cfg.codebook.code_len)?;
            let nominal = secfmcw::ambiguity::range_af(&secfmcw::waveform::generate_chirp(&anchor)?.samples);
            let afs: Vec<_> = cb
                .phase
                .rows
                .iter()
                .map(|c| Ok(secfmcw::ambiguity::range_af(&secfmcw::waveform::generate_chirp(&anchor.with_code(c.clone())?)?.samples)))
                .collect::<SimResult<_>>()?;
            let n = out.table.len();
            let paths = write_outputs(&dir, "af", &out.table, &sidecar(&cfg, vec!["af".into()], n, start), &af_artifacts(cb, &nominal, &afs))?;
            report(&paths, serde_json::json!({ "rows": n }));
        }
        Command::DefaultConfig => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let report = serde_json::json!({ "error": "usage", "message": e.to_string().trim() });
            println!("{report}");
            return ExitCode::from(2);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            println!("{}", e.to_json());
            ExitCode::from(match e {
                SimError::Validation(_) | SimError::Parse { .. } => 2,
                _ => 1,
            })
        }
    }
}
