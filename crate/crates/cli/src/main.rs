mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use output::Format;

/// Contact-tracing laboratory: cohort and agent simulations of app-based
/// tracing, the COVID-19 diagnostic network and the surveillance service.
#[derive(Debug, Parser, Serialize)]
#[command(name = "ctlab", version)]
pub struct Cli {
    /// Diagnostic network file; the bundled model when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub model: Option<PathBuf>,
    /// Seed for every stochastic step.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Output file, written atomically; stdout when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Output encoding [default: csv for tables, json for documents].
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Run the cohort model or the agent simulator.
    #[command(subcommand)]
    Simulate(Simulate),
    /// Exposure table over adoption levels and days.
    Table1(Table1Args),
    /// Least adoption under which the outbreak counts as contained.
    Sweetspot(SweetspotArgs),
    /// Install share needed to reach a population uptake target.
    Uptake(UptakeArgs),
    /// Posterior, alerts and next questions for a case.
    Assess(AssessArgs),
    /// Rank unobserved findings by expected information about COVID status.
    Voi(VoiArgs),
    /// Run the surveillance HTTP service.
    Serve(ServeArgs),
    /// Export a heatmap from a report log.
    Heatmap(HeatmapArgs),
    /// Trace contacts from index cases on a simulated outbreak.
    Trace(TraceArgs),
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Simulate {
    /// Deterministic cohort model, one row per half-day step.
    Cohort(CohortArgs),
    /// Stochastic agent simulation on a contact graph, one row per replicate.
    Agents(AgentArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkArg {
    /// Reporter and contact both need the app.
    BothNeedApp,
    /// Only the contact needs the app.
    ContactNeedsApp,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyArg {
    FirstOrder,
    SingleStep,
    Iterative,
    Retrospective,
}

#[derive(Debug, Args, Serialize)]
pub struct EpiArgs {
    #[arg(long, value_enum, default_value = "both-need-app")]
    pub link_model: LinkArg,
    /// Share of infections that never show symptoms.
    #[arg(long, default_value_t = 0.0)]
    pub asymptomatic: f64,
    /// Share of infections that shed for a long time without symptoms.
    #[arg(long, default_value_t = 0.0)]
    pub long_shedder: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct CohortArgs {
    /// Share of the population running the app.
    #[arg(long, default_value_t = 0.0)]
    pub adoption: f64,
    /// Days to simulate.
    #[arg(long, default_value_t = 20.0)]
    pub horizon: f64,
    #[command(flatten)]
    pub epi: EpiArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct AgentArgs {
    /// Population size.
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 0.0)]
    pub adoption: f64,
    #[arg(long, value_enum, default_value = "iterative")]
    pub strategy: StrategyArg,
    #[arg(long, default_value_t = 1_000)]
    pub replicates: u64,
    #[arg(long, default_value_t = 20.0)]
    pub horizon: f64,
    /// Distant (non-infectious) encounters per close contact.
    #[arg(long, default_value_t = 0.25)]
    pub distant_ratio: f64,
    #[command(flatten)]
    pub epi: EpiArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct Table1Args {
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.80, 0.90, 0.95])]
    pub adoptions: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![12.0, 14.0, 16.0, 18.0, 20.0])]
    pub days: Vec<f64>,
    #[command(flatten)]
    pub epi: EpiArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionArg {
    /// Windowed new exposures never rise from `--from-day` on.
    Contained,
    /// Windowed new exposures at the horizon stay at or below `--threshold`.
    HorizonWindowBelow,
}

#[derive(Debug, Args, Serialize)]
pub struct SweetspotArgs {
    #[arg(long, value_enum, default_value = "contained")]
    pub criterion: CriterionArg,
    #[arg(long, default_value_t = 14.0)]
    pub from_day: f64,
    #[arg(long, default_value_t = 10.0)]
    pub threshold: f64,
    #[arg(long, default_value_t = 20.0)]
    pub horizon: f64,
    #[command(flatten)]
    pub epi: EpiArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct UptakeArgs {
    /// Share of the whole population that must run the app.
    #[arg(long)]
    pub target: f64,
    /// Share of the population owning a smartphone.
    #[arg(long)]
    pub penetration: f64,
    /// Share of installers lost to follow-up.
    #[arg(long, default_value_t = 0.0)]
    pub dropout: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ImprovingArg {
    Yes,
    No,
    Unknown,
}

#[derive(Debug, Args, Serialize)]
pub struct AssessArgs {
    /// Observation as node=state; repeat or comma-separate.
    #[arg(long, short, value_delimiter = ',')]
    pub evidence: Vec<String>,
    /// Days since symptoms began.
    #[arg(long, default_value_t = 0.0)]
    pub duration_days: f64,
    #[arg(long, value_enum)]
    pub improving: Option<ImprovingArg>,
    #[arg(long, default_value_t = 3)]
    pub top_k: usize,
    #[arg(long, default_value_t = 0.5)]
    pub alert_threshold: f64,
    #[arg(long, default_value_t = 0.5)]
    pub hosp_threshold: f64,
    #[arg(long, default_value_t = 7.0)]
    pub hosp_min_duration_days: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct VoiArgs {
    #[arg(long, short, value_delimiter = ',')]
    pub evidence: Vec<String>,
    /// Nodes to rank; every unobserved node except the target when omitted.
    #[arg(long, value_delimiter = ',')]
    pub candidates: Vec<String>,
    #[arg(long)]
    pub top_k: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct ServeArgs {
    /// Report log directory [default: $CTLAB_DATA_DIR or ./ctlab-data].
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Listen address [default: $CTLAB_BIND_ADDR or 127.0.0.1:8080].
    #[arg(long)]
    pub bind: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct HeatmapArgs {
    /// Report log directory [default: $CTLAB_DATA_DIR or ./ctlab-data].
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Window start, UTC seconds (inclusive).
    #[arg(long, allow_negative_numbers = true)]
    pub start: Option<i64>,
    /// Window end, UTC seconds (exclusive).
    #[arg(long, allow_negative_numbers = true)]
    pub end: Option<i64>,
    /// Cell size in degrees.
    #[arg(long, default_value_t = 0.01)]
    pub cell: f64,
    /// Risk level counted as high.
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    #[arg(long, value_parser = ["under65", "over65"])]
    pub age_group: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct TraceArgs {
    #[arg(long, default_value_t = 2_000)]
    pub n: usize,
    /// Close contacts per 14 days.
    #[arg(long, default_value_t = 36.0)]
    pub mean_contacts: f64,
    #[arg(long, default_value_t = 0.0)]
    pub adoption: f64,
    /// Days of contacts to generate and spread over.
    #[arg(long, default_value_t = 30.0)]
    pub days: f64,
    /// Index cases; infection spreads from these unchecked.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0u32])]
    pub index: Vec<u32>,
    /// Day at which tracing runs.
    #[arg(long, default_value_t = 16.0)]
    pub as_of: f64,
    /// One strategy; all four when omitted.
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyArg>,
    #[arg(long, default_value_t = 0.0)]
    pub asymptomatic: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
