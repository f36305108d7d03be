use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cohort::CohortParams;
use super::graph::{ContactGraph, InfectionKind};
use super::{EpiError, LinkModel, TraceStrategy};

/// How far back a report reaches into the reporter's contact history.
pub const ALERT_LOOKBACK_DAYS: f64 = 14.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub replicate: u64,
    pub index_case: u32,
    /// Cumulative infections, index case included, at days `0, 1, …, horizon`.
    pub cumulative_by_day: Vec<u32>,
    pub final_size: u32,
    /// People whose shedding was cut short by an alert.
    pub alerted: u32,
    /// Mean days between an infector's and an infectee's exposure.
    pub mean_generation_interval_days: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentSummary {
    pub strategy: TraceStrategy,
    pub seed: u64,
    pub replicates: Vec<ReplicateOutcome>,
    pub mean_by_day: Vec<f64>,
    pub sd_by_day: Vec<f64>,
    pub mean_final_size: f64,
    pub sd_final_size: f64,
    pub mean_generation_interval_days: Option<f64>,
}

impl AgentSummary {
    /// Standard error of the mean cumulative infections at `day`.
    pub fn standard_error(&self, day: usize) -> f64 {
        self.sd_by_day[day] / (self.replicates.len() as f64).sqrt()
    }
}

fn mean_sd(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = if n > 1.0 { values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// Stochastic outbreaks on `graph`, one per replicate, each started from a
/// uniformly chosen index case exposed at step 0.
///
/// Every close contact with a shedding person infects. Symptomatic people
/// self-report at the universal symptomatic day plus the report delay. A
/// report alerts the reporter's infected close contacts from the last
/// [`ALERT_LOOKBACK_DAYS`] when the link model allows, and alerted people
/// stop shedding at once. What an alert triggers next depends on `strategy`:
/// FirstOrder nothing; SingleStep a report once the person is both alerted
/// and symptomatic; Iterative an immediate test and report; Retrospective as
/// Iterative, and each report also identifies the reporter's infector
/// whether or not either runs the app.
///
/// App membership and infection kinds come from the graph;
/// `params.adoption` is not consulted. Replicate `r` draws from a generator
/// seeded with `seed + r`.
pub fn run_agent_sim(
    graph: &ContactGraph,
    params: &CohortParams,
    strategy: TraceStrategy,
    seed: u64,
    replicates: u64,
) -> Result<AgentSummary, EpiError> {
    params.validate()?;
    if replicates == 0 {
        return Err(EpiError::InvalidParams("replicates must be at least 1".into()));
    }
    if graph.is_empty() {
        return Err(EpiError::InvalidParams("graph has no individuals".into()));
    }
    if (graph.step_days() - params.step_days).abs() > 1e-12 {
        return Err(EpiError::InvalidParams(format!(
            "graph step {} differs from simulation step {}",
            graph.step_days(),
            params.step_days
        )));
    }
    if graph.days() + 1e-9 < params.horizon_days {
        return Err(EpiError::InvalidParams(format!(
            "graph covers {} days, horizon is {}",
            graph.days(),
            params.horizon_days
        )));
    }

    let outcomes: Vec<ReplicateOutcome> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r));
            let index = rng.random_range(0..graph.len() as u32);
            let mut outcome = Outbreak::new(graph, params, strategy).run(index);
            outcome.replicate = r;
            outcome
        })
        .collect();

    let days = outcomes[0].cumulative_by_day.len();
    let (mut mean_by_day, mut sd_by_day) = (Vec::with_capacity(days), Vec::with_capacity(days));
    for d in 0..days {
        let (m, s) = mean_sd(outcomes.iter().map(move |o| o.cumulative_by_day[d] as f64));
        mean_by_day.push(m);
        sd_by_day.push(s);
    }
    let (mean_final_size, sd_final_size) = mean_sd(outcomes.iter().map(|o| o.final_size as f64));
    let intervals: Vec<f64> = outcomes.iter().filter_map(|o| o.mean_generation_interval_days).collect();
    let mean_generation_interval_days =
        (!intervals.is_empty()).then(|| intervals.iter().sum::<f64>() / intervals.len() as f64);

    Ok(AgentSummary {
        strategy,
        seed,
        replicates: outcomes,
        mean_by_day,
        sd_by_day,
        mean_final_size,
        sd_final_size,
        mean_generation_interval_days,
    })
}

#[derive(Clone, Debug)]
struct Case {
    exposure: u32,
    infector: Option<u32>,
    alert: Option<u32>,
    report: Option<u32>,
    reported: bool,
}

struct Outbreak<'a> {
    graph: &'a ContactGraph,
    params: &'a CohortParams,
    strategy: TraceStrategy,
    steps: u32,
    latent: u32,
    report_delay: u32,
    lookback: u32,
    cases: HashMap<u32, Case>,
    order: Vec<u32>,
    reports: BTreeMap<u32, Vec<u32>>,
}

impl<'a> Outbreak<'a> {
    fn new(graph: &'a ContactGraph, params: &'a CohortParams, strategy: TraceStrategy) -> Self {
        Outbreak {
            graph,
            params,
            strategy,
            steps: params.steps(params.horizon_days),
            latent: params.steps(params.latent_days),
            report_delay: params.steps(params.report_delay_days),
            lookback: params.steps(ALERT_LOOKBACK_DAYS),
            cases: HashMap::new(),
            order: Vec::new(),
            reports: BTreeMap::new(),
        }
    }

    fn run(mut self, index: u32) -> ReplicateOutcome {
        self.infect(index, None, 0);
        for j in 0..self.steps {
            while let Some(due) = self.reports.remove(&j) {
                for x in due {
                    let case = self.cases.get_mut(&x).expect("reports only for cases");
                    if case.reported || case.report != Some(j) {
                        continue;
                    }
                    case.reported = true;
                    self.on_report(x, j);
                }
            }

            let mut fresh = Vec::new();
            for &x in &self.order {
                if !self.shedding(x, j) {
                    continue;
                }
                for c in self.graph.contacts_between(x, j, j + 1) {
                    if c.is_close() && !self.cases.contains_key(&c.other) && !fresh.iter().any(|(y, _)| *y == c.other) {
                        fresh.push((c.other, x));
                    }
                }
            }
            for (y, x) in fresh {
                self.infect(y, Some(x), j);
            }
        }
        self.outcome(index)
    }

    fn shedding(&self, x: u32, j: u32) -> bool {
        let case = &self.cases[&x];
        let end = case.exposure + self.params.shedding_end_steps(self.graph.individual(x).kind);
        let stop = case.alert.map_or(end, |a| a.min(end));
        j >= case.exposure + self.latent && j < stop
    }

    fn infect(&mut self, y: u32, infector: Option<u32>, step: u32) {
        self.cases.insert(y, Case { exposure: step, infector, alert: None, report: None, reported: false });
        self.order.push(y);
        if self.graph.individual(y).symptomatic() {
            self.schedule(y, step + self.params.natural_report_steps());
        }
    }

    fn schedule(&mut self, y: u32, at: u32) {
        let case = self.cases.get_mut(&y).expect("scheduled for a case");
        if case.reported || case.report.is_some_and(|r| r <= at) {
            return;
        }
        case.report = Some(at);
        if at < self.steps {
            self.reports.entry(at).or_default().push(y);
        }
    }

    fn on_report(&mut self, x: u32, now: u32) {
        let can_alert = self.graph.individual(x).has_app || self.params.link_model == LinkModel::ContactNeedsApp;
        if can_alert {
            let from = now.saturating_sub(self.lookback);
            let mut targets: Vec<u32> = self
                .graph
                .contacts_between(x, from, now)
                .iter()
                .filter(|c| c.is_close() && self.graph.individual(c.other).has_app)
                .filter(|c| self.cases.get(&c.other).is_some_and(|case| case.exposure < now))
                .map(|c| c.other)
                .collect();
            targets.sort_unstable();
            targets.dedup();
            for y in targets {
                self.alert(y, now);
            }
        }
        if self.strategy == TraceStrategy::Retrospective {
            if let Some(z) = self.cases[&x].infector {
                self.alert(z, now);
            }
        }
    }

    fn alert(&mut self, y: u32, now: u32) {
        let case = self.cases.get_mut(&y).expect("alerts only for cases");
        if case.alert.is_some_and(|a| a <= now) {
            return;
        }
        case.alert = Some(now);
        let exposure = case.exposure;
        match self.strategy {
            TraceStrategy::FirstOrder => {}
            TraceStrategy::SingleStep => {
                let ind = self.graph.individual(y);
                if ind.kind == InfectionKind::Typical {
                    let onset = exposure + (ind.onset_offset_days / self.params.step_days).ceil() as u32;
                    self.schedule(y, now.max(onset) + self.report_delay);
                }
            }
            TraceStrategy::Iterative | TraceStrategy::Retrospective => self.schedule(y, now + self.report_delay),
        }
    }

    fn outcome(&self, index: u32) -> ReplicateOutcome {
        let per_day = (1.0 / self.params.step_days).round() as u32;
        let days = (self.steps / per_day) as usize;
        let mut cumulative_by_day = vec![0u32; days + 1];
        let mut intervals = (0.0, 0u32);
        for case in self.cases.values() {
            // An exposure at step s counts from the first day mark after it.
            let first_day = (case.exposure / per_day + 1) as usize;
            if case.infector.is_none() {
                cumulative_by_day.iter_mut().for_each(|c| *c += 1);
            } else {
                for c in cumulative_by_day.iter_mut().skip(first_day) {
                    *c += 1;
                }
            }
            if let Some(z) = case.infector {
                intervals.0 += (case.exposure - self.cases[&z].exposure) as f64 * self.params.step_days;
                intervals.1 += 1;
            }
        }
        let alerted = self
            .cases
            .iter()
            .filter(|(&x, c)| {
                let end = c.exposure + self.params.shedding_end_steps(self.graph.individual(x).kind);
                c.alert.is_some_and(|a| a < end)
            })
            .count() as u32;
        ReplicateOutcome {
            replicate: 0,
            index_case: index,
            cumulative_by_day,
            final_size: self.cases.len() as u32,
            alerted,
            mean_generation_interval_days: (intervals.1 > 0).then(|| intervals.0 / intervals.1 as f64),
        }
    }
}
