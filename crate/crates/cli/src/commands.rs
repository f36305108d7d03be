use std::collections::BTreeSet;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use ctlab_core::bn::{most_informative_features, EvidenceSet, FeatureRanking};
use ctlab_core::covid::{assess, AlertPolicy, CaseInput, CovidModel, Improving, TARGET};
use ctlab_core::episim::{
    generate_contact_graph, required_install_fraction, run_agent_sim, run_cohort, sweet_spot_search, table1,
    trace_contacts, CohortParams, Criterion, GraphParams, LinkModel, TraceStrategy, UptakeInputs,
    SWEET_SPOT_RESOLUTION,
};
use ctlab_surveillance::{aggregate_grid, export_heatmap, AgeGroup, GridSpec, ServiceConfig, Store, Window};
use serde_json::json;

use crate::output::{emit, Body, Format, Output, Table};
use crate::{
    AgentArgs, AssessArgs, Cli, CohortArgs, Command, CriterionArg, EpiArgs, HeatmapArgs, ImprovingArg, LinkArg,
    ServeArgs, Simulate, StrategyArg, SweetspotArgs, Table1Args, TraceArgs, UptakeArgs, VoiArgs,
};

/// Replicate seeds are kept apart from the graph seed so the two streams
/// never coincide.
const REPLICATE_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

pub fn run(cli: &Cli) -> Result<()> {
    let format = cli.format.unwrap_or(match cli.command {
        Command::Uptake(_) | Command::Assess(_) | Command::Heatmap(_) | Command::Sweetspot(_) => Format::Json,
        _ => Format::Csv,
    });
    eprintln!("# ctlab {}", env!("CARGO_PKG_VERSION"));
    eprintln!("# format={} params={}", serde_json::to_value(format)?.as_str().unwrap_or("?"), serde_json::to_string(cli)?);

    let output = match &cli.command {
        Command::Simulate(Simulate::Cohort(a)) => simulate_cohort(a)?,
        Command::Simulate(Simulate::Agents(a)) => simulate_agents(a, cli.seed)?,
        Command::Table1(a) => table(a)?,
        Command::Sweetspot(a) => sweetspot(a)?,
        Command::Uptake(a) => uptake(a)?,
        Command::Assess(a) => assess_case(a, &load_model(cli)?)?,
        Command::Voi(a) => voi(a, &load_model(cli)?)?,
        Command::Heatmap(a) => heatmap(a, format)?,
        Command::Trace(a) => trace(a, cli.seed)?,
        Command::Serve(a) => return serve(a, cli.model.clone()),
    };
    emit(&output.render(format)?, cli.out.as_deref())
}

fn load_model(cli: &Cli) -> Result<CovidModel> {
    match &cli.model {
        Some(p) => CovidModel::load(p).with_context(|| format!("loading model {}", p.display())),
        None => Ok(CovidModel::default_model()),
    }
}

fn cohort_params(adoption: f64, horizon: f64, epi: &EpiArgs) -> CohortParams {
    CohortParams {
        adoption,
        horizon_days: horizon,
        link_model: match epi.link_model {
            LinkArg::BothNeedApp => LinkModel::BothNeedApp,
            LinkArg::ContactNeedsApp => LinkModel::ContactNeedsApp,
        },
        asymptomatic_fraction: epi.asymptomatic,
        long_shedder_fraction: epi.long_shedder,
        ..CohortParams::default()
    }
}

fn strategy(s: StrategyArg) -> TraceStrategy {
    match s {
        StrategyArg::FirstOrder => TraceStrategy::FirstOrder,
        StrategyArg::SingleStep => TraceStrategy::SingleStep,
        StrategyArg::Iterative => TraceStrategy::Iterative,
        StrategyArg::Retrospective => TraceStrategy::Retrospective,
    }
}

fn simulate_cohort(a: &CohortArgs) -> Result<Output> {
    let series = run_cohort(&cohort_params(a.adoption, a.horizon, &a.epi))?;
    Ok(Output::table(Table::from_records(&series.rows)?))
}

fn simulate_agents(a: &AgentArgs, seed: u64) -> Result<Output> {
    let params = cohort_params(a.adoption, a.horizon, &a.epi);
    let graph_params = GraphParams { distant_ratio: a.distant_ratio, ..GraphParams::matching(&params, a.n) };
    let graph = generate_contact_graph(&graph_params, seed)?;
    let summary = run_agent_sim(&graph, &params, strategy(a.strategy), seed ^ REPLICATE_SEED_SALT, a.replicates)?;

    let days = summary.mean_by_day.len();
    let mut columns = vec!["replicate", "index_case", "final_size", "alerted", "mean_generation_interval_days"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    columns.extend((0..days).map(|d| format!("day_{d}")));
    let mut t = Table { columns, rows: Vec::new() };
    for r in &summary.replicates {
        let mut row = vec![
            json!(r.replicate),
            json!(r.index_case),
            json!(r.final_size),
            json!(r.alerted),
            json!(r.mean_generation_interval_days),
        ];
        row.extend(r.cumulative_by_day.iter().map(|c| json!(c)));
        t.push(row);
    }
    for d in [12usize, 14, days - 1] {
        if d < days {
            eprintln!(
                "# day {d}: mean cumulative infections {:.4} (se {:.4})",
                summary.mean_by_day[d],
                summary.standard_error(d)
            );
        }
    }
    Ok(Output::table(t))
}

fn table(a: &Table1Args) -> Result<Output> {
    let template = cohort_params(0.0, 20.0_f64.max(a.days.iter().copied().fold(0.0, f64::max)), &a.epi);
    Ok(Output::table(Table::from_records(&table1(&template, &a.adoptions, &a.days)?)?))
}

fn sweetspot(a: &SweetspotArgs) -> Result<Output> {
    let template = cohort_params(0.0, a.horizon, &a.epi);
    let criterion = match a.criterion {
        CriterionArg::Contained => Criterion::Contained { from_day: a.from_day },
        CriterionArg::HorizonWindowBelow => Criterion::HorizonWindowBelow { threshold: a.threshold },
    };
    let p = sweet_spot_search(&template, |s| criterion.evaluate(s))?;
    let at = run_cohort(&CohortParams { adoption: p, ..template })?;
    let mut windows = Vec::new();
    let mut day = 2.0;
    while day <= a.horizon + 1e-9 {
        windows.push(json!({"day": day, "new_exposures": at.windowed_new_exposures(day)?}));
        day += 2.0;
    }
    Output::document(&json!({
        "criterion": criterion,
        "sweet_spot": p,
        "resolution": SWEET_SPOT_RESOLUTION,
        "windows_at_sweet_spot": windows,
    }))
}

fn uptake(a: &UptakeArgs) -> Result<Output> {
    let plan = required_install_fraction(UptakeInputs {
        target_population_uptake: a.target,
        smartphone_penetration: a.penetration,
        dropout: a.dropout,
    })?;
    Output::document(&plan)
}

fn parse_evidence(items: &[String]) -> Result<EvidenceSet> {
    let mut ev = EvidenceSet::new();
    for item in items {
        let (node, state) = item.split_once('=').ok_or_else(|| anyhow!("evidence {item:?} is not node=state"))?;
        ev = ev.with(node.trim(), state.trim());
    }
    Ok(ev)
}

fn assess_case(a: &AssessArgs, model: &CovidModel) -> Result<Output> {
    let case = CaseInput {
        evidence: parse_evidence(&a.evidence)?,
        symptom_duration_days: a.duration_days,
        improving: a.improving.map(|i| match i {
            ImprovingArg::Yes => Improving::Yes,
            ImprovingArg::No => Improving::No,
            ImprovingArg::Unknown => Improving::Unknown,
        }),
    };
    let policy = AlertPolicy {
        alert_threshold: a.alert_threshold,
        hosp_threshold: a.hosp_threshold,
        hosp_min_duration_days: a.hosp_min_duration_days,
        ..AlertPolicy::default()
    };
    Output::document(&assess(model, &case, &policy, a.top_k)?)
}

fn voi(a: &VoiArgs, model: &CovidModel) -> Result<Output> {
    let evidence = parse_evidence(&a.evidence)?;
    let net = model.network();
    let candidates: BTreeSet<String> = if a.candidates.is_empty() {
        net.ids().filter(|id| *id != TARGET && !evidence.contains(id)).map(String::from).collect()
    } else {
        a.candidates.iter().cloned().collect()
    };
    let mut ranking = if candidates.is_empty() {
        FeatureRanking::default()
    } else {
        most_informative_features(net, &evidence, TARGET, &candidates)?
    };
    if let Some(k) = a.top_k {
        ranking = ranking.truncated(k);
    }
    let mut t = Table::new(&["node", "gain"]);
    for f in &ranking.features {
        t.push(vec![json!(f.node), json!(f.gain)]);
    }
    Ok(Output::table(t))
}

fn data_dir(explicit: &Option<PathBuf>) -> PathBuf {
    explicit.clone().unwrap_or_else(|| ServiceConfig::from_env().data_dir)
}

/// GeoJSON as the service serves it for `json`, one row per cell for `csv`.
fn heatmap(a: &HeatmapArgs, format: Format) -> Result<Output> {
    let dir = data_dir(&a.data_dir);
    if !dir.join(ctlab_surveillance::store::LOG_FILE_NAME).exists() {
        bail!("no report log in {}", dir.display());
    }
    let store = Store::open(&dir)?;
    let all = Window::all();
    let window = Window::new(a.start.unwrap_or(all.start), a.end.unwrap_or(all.end))?;
    let age: Option<AgeGroup> = a.age_group.as_deref().map(|g| serde_json::from_value(json!(g))).transpose()?;
    let snapshot = store.snapshot();
    let reports = snapshot.iter().filter(|r| age.is_none_or(|g| r.age_group == g));
    let cells = aggregate_grid(reports, window, GridSpec::new(a.cell)?, a.tau);

    if format == Format::Json {
        return Ok(Output { body: Body::Raw(export_heatmap(&cells)), round: false });
    }
    let mut t = Table::new(&["cell", "count", "mean_p", "high_risk_fraction", "min_lon", "min_lat", "max_lon", "max_lat"]);
    for c in &cells {
        let mut row = vec![json!(c.cell.to_string()), json!(c.count), json!(c.mean_p), json!(c.high_risk_fraction)];
        row.extend(c.bounds.iter().map(|b| json!(b)));
        t.push(row);
    }
    Ok(Output::table(t).exact())
}

fn trace(a: &TraceArgs, seed: u64) -> Result<Output> {
    let params = CohortParams { horizon_days: a.days, asymptomatic_fraction: a.asymptomatic, ..CohortParams::default() };
    let graph_params = GraphParams { mean_contacts: a.mean_contacts, adoption: a.adoption, ..GraphParams::matching(&params, a.n) };
    let mut graph = generate_contact_graph(&graph_params, seed)?;
    graph.spread_uncontrolled(&a.index, &params)?;

    let strategies = match a.strategy {
        Some(s) => vec![strategy(s)],
        None => TraceStrategy::ALL.to_vec(),
    };
    let mut t = Table::new(&["strategy", "person", "day", "via", "infected"]);
    for s in strategies {
        let result = trace_contacts(&graph, s, &a.index, a.as_of)?;
        eprintln!("# {}: {} traced", json!(s).as_str().unwrap_or("?"), result.traced.len());
        for n in &result.notifications {
            t.push(vec![json!(s), json!(n.person), json!(n.day), json!(n.via), json!(graph.infection(n.person).is_some())]);
        }
    }
    Ok(Output::table(t))
}

fn serve(a: &ServeArgs, model: Option<PathBuf>) -> Result<()> {
    let mut config = ServiceConfig::from_env();
    if let Some(d) = &a.data_dir {
        config.data_dir = d.clone();
    }
    if let Some(b) = &a.bind {
        config.bind_addr = b.clone();
    }
    if model.is_some() {
        config.model_path = model;
    }
    eprintln!("# serving on {} with data in {}", config.bind_addr, config.data_dir.display());
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(ctlab_surveillance::serve(config))?;
    Ok(())
}
