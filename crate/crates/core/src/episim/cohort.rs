use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::graph::InfectionKind;
use super::{check_unit, EpiError, LinkModel};

/// Tolerance for "this day mark lands on the step grid".
const GRID_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortParams {
    /// Fraction of the population running the app.
    pub adoption: f64,
    pub contacts_per_window: f64,
    pub contact_window_days: f64,
    pub latent_days: f64,
    pub symptomatic_window: [f64; 2],
    pub universal_symptomatic_day: f64,
    pub isolation_day: f64,
    pub report_delay_days: f64,
    pub link_model: LinkModel,
    pub horizon_days: f64,
    pub step_days: f64,
    /// Share of infections that never develop symptoms. They shed until the
    /// isolation day but never self-report.
    pub asymptomatic_fraction: f64,
    /// Share of infections that shed for `long_shedder_days` and never
    /// self-report.
    pub long_shedder_fraction: f64,
    pub long_shedder_days: f64,
}

impl Default for CohortParams {
    fn default() -> Self {
        CohortParams {
            adoption: 0.0,
            contacts_per_window: 36.0,
            contact_window_days: 14.0,
            latent_days: 5.0,
            symptomatic_window: [5.5, 11.5],
            universal_symptomatic_day: 12.0,
            isolation_day: 13.0,
            report_delay_days: 1.0,
            link_model: LinkModel::BothNeedApp,
            horizon_days: 20.0,
            step_days: 0.5,
            asymptomatic_fraction: 0.0,
            long_shedder_fraction: 0.0,
            long_shedder_days: 30.0,
        }
    }
}

impl CohortParams {
    pub fn with_adoption(adoption: f64) -> Self {
        CohortParams { adoption, ..Default::default() }
    }

    /// New close contacts per day.
    pub fn beta(&self) -> f64 {
        self.contacts_per_window / self.contact_window_days
    }

    /// Number of steps covering `days`. Only meaningful for validated params
    /// and on-grid day marks.
    pub fn steps(&self, days: f64) -> u32 {
        (days / self.step_days).round() as u32
    }

    pub fn on_grid(&self, days: f64) -> bool {
        let ratio = days / self.step_days;
        ratio >= -GRID_TOLERANCE && (ratio - ratio.round()).abs() < GRID_TOLERANCE
    }

    pub(crate) fn shedding_end_steps(&self, kind: InfectionKind) -> u32 {
        match kind {
            InfectionKind::LongShedder => self.steps(self.long_shedder_days),
            _ => self.steps(self.isolation_day),
        }
    }

    /// Steps from exposure to the self-report of a symptomatic case.
    pub(crate) fn natural_report_steps(&self) -> u32 {
        self.steps(self.universal_symptomatic_day + self.report_delay_days)
    }

    pub(crate) fn kind_fractions(&self) -> [(InfectionKind, f64); 3] {
        [
            (InfectionKind::Typical, 1.0 - self.asymptomatic_fraction - self.long_shedder_fraction),
            (InfectionKind::Asymptomatic, self.asymptomatic_fraction),
            (InfectionKind::LongShedder, self.long_shedder_fraction),
        ]
    }

    pub fn validate(&self) -> Result<(), EpiError> {
        let bad = |msg: String| Err(EpiError::InvalidParams(msg));
        check_unit("adoption", self.adoption)?;
        check_unit("asymptomatic_fraction", self.asymptomatic_fraction)?;
        check_unit("long_shedder_fraction", self.long_shedder_fraction)?;
        if self.asymptomatic_fraction + self.long_shedder_fraction > 1.0 + GRID_TOLERANCE {
            return bad("asymptomatic_fraction + long_shedder_fraction exceeds 1".into());
        }
        if !(self.contacts_per_window > 0.0 && self.contacts_per_window.is_finite()) {
            return bad(format!("contacts_per_window = {} must be positive", self.contacts_per_window));
        }
        if !(self.contact_window_days > 0.0 && self.contact_window_days.is_finite()) {
            return bad(format!("contact_window_days = {} must be positive", self.contact_window_days));
        }
        if !(self.step_days > 0.0 && self.step_days.is_finite()) {
            return bad(format!("step_days = {} must be positive", self.step_days));
        }
        if !(self.report_delay_days >= 0.0) {
            return bad(format!("report_delay_days = {} must be non-negative", self.report_delay_days));
        }
        let [sym_start, sym_end] = self.symptomatic_window;
        if !(self.latent_days > 0.0
            && self.latent_days < sym_start
            && sym_start <= sym_end
            && sym_end <= self.universal_symptomatic_day
            && sym_end < self.isolation_day)
        {
            return bad(format!(
                "need 0 < latent ({}) < symptomatic start ({sym_start}) <= end ({sym_end}) <= universal day ({}), end < isolation day ({})",
                self.latent_days, self.universal_symptomatic_day, self.isolation_day
            ));
        }
        if self.horizon_days < self.isolation_day {
            return bad(format!("horizon {} is shorter than the isolation day {}", self.horizon_days, self.isolation_day));
        }
        if self.long_shedder_days < self.isolation_day {
            return bad(format!("long_shedder_days {} is shorter than the isolation day", self.long_shedder_days));
        }
        for (name, v) in [
            ("latent_days", self.latent_days),
            ("symptomatic window start", sym_start),
            ("symptomatic window end", sym_end),
            ("universal_symptomatic_day", self.universal_symptomatic_day),
            ("isolation_day", self.isolation_day),
            ("report_delay_days", self.report_delay_days),
            ("horizon_days", self.horizon_days),
            ("long_shedder_days", self.long_shedder_days),
        ] {
            if !self.on_grid(v) {
                return bad(format!("{name} = {v} is not a multiple of the {} day step", self.step_days));
            }
        }
        Ok(())
    }
}

/// One row per grid point `t = i·step`. Flow quantities cover the step that
/// ends at `t`; stock quantities are measured at `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortRow {
    pub t_days: f64,
    /// Exposures during `[t − step, t)`.
    pub new_exposures: f64,
    /// Exposures during `[0, t)`, index case excluded.
    pub cumulative_exposures: f64,
    /// Exposures caused directly by the index case during `[0, t)`.
    pub first_generation_cumulative: f64,
    /// Expected number of infected people shedding at `t`.
    pub actively_shedding: f64,
    /// Expected number of people who stop shedding at `t` because they
    /// self-isolate or were alerted.
    pub newly_isolated: f64,
    /// Part of `new_exposures` that runs the app.
    pub new_app_exposures: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: u32,
    pub infected: f64,
    pub app_users: f64,
}

impl GenerationStats {
    pub fn app_fraction(&self) -> f64 {
        if self.infected > 0.0 {
            self.app_users / self.infected
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortTimeSeries {
    pub params: CohortParams,
    pub rows: Vec<CohortRow>,
    pub generations: Vec<GenerationStats>,
}

impl CohortTimeSeries {
    fn row_index(&self, day: f64) -> Result<usize, EpiError> {
        if !self.params.on_grid(day) || day > self.params.horizon_days + GRID_TOLERANCE {
            return Err(EpiError::InvalidParams(format!("day {day} is off the grid or past the horizon")));
        }
        Ok(self.params.steps(day) as usize)
    }

    pub fn row_at(&self, day: f64) -> Result<&CohortRow, EpiError> {
        Ok(&self.rows[self.row_index(day)?])
    }

    pub fn cumulative_at(&self, day: f64) -> Result<f64, EpiError> {
        Ok(self.row_at(day)?.cumulative_exposures)
    }

    pub fn first_generation_at(&self, day: f64) -> Result<f64, EpiError> {
        Ok(self.row_at(day)?.first_generation_cumulative)
    }

    fn window(&self, day: f64, f: impl Fn(&CohortRow) -> f64) -> Result<f64, EpiError> {
        let end = self.row_index(day)?;
        let start = self.row_index((day - 2.0).max(0.0))?;
        Ok(self.rows[start + 1..=end].iter().map(f).sum())
    }

    /// New exposures over `(day − 2, day]`.
    pub fn windowed_new_exposures(&self, day: f64) -> Result<f64, EpiError> {
        self.window(day, |r| r.new_exposures)
    }

    /// Isolations over `(day − 2, day]`.
    pub fn windowed_isolations(&self, day: f64) -> Result<f64, EpiError> {
        self.window(day, |r| r.newly_isolated)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Class {
    exposure: u32,
    app: bool,
    alert: Option<u32>,
    kind: InfectionKind,
    generation: u32,
}

/// Expected-value propagation from one index case exposed at `t = 0`.
///
/// People are grouped into classes by exposure step, app use, alert step,
/// infection kind and generation. A class sheds from `exposure + latent`
/// until it isolates (isolation day, or its alert if earlier) and spreads
/// `β·step` exposures per member per step. Symptomatic people report at the
/// universal symptomatic day plus the report delay; alerted people are
/// tested and report one delay after their alert. A report alerts every
/// infectee of the reporter that the link model allows.
pub fn run_cohort(params: &CohortParams) -> Result<CohortTimeSeries, EpiError> {
    params.validate()?;
    let steps = params.steps(params.horizon_days);
    let latent = params.steps(params.latent_days);
    let report_after = params.natural_report_steps();
    let alert_to_report = params.steps(params.report_delay_days);
    let per_step = params.beta() * params.step_days;
    let p = params.adoption;
    let app_split = [(true, p), (false, 1.0 - p)];

    let mut classes: BTreeMap<Class, f64> = BTreeMap::new();
    let mut generations = vec![GenerationStats { generation: 0, infected: 1.0, app_users: p }];
    for (app, fa) in app_split {
        for (kind, fk) in params.kind_fractions() {
            if fa * fk > 0.0 {
                classes.insert(Class { exposure: 0, app, alert: None, kind, generation: 0 }, fa * fk);
            }
        }
    }

    let n = steps as usize + 1;
    let mut new = vec![0.0; n];
    let mut new_app = vec![0.0; n];
    let mut first = vec![0.0; n];
    let mut shedding = vec![0.0; n];
    let mut isolated = vec![0.0; n];

    for j in 0..=steps {
        let mut born: BTreeMap<Class, f64> = BTreeMap::new();
        for (c, &mass) in &classes {
            let end = c.exposure + params.shedding_end_steps(c.kind);
            let stop = c.alert.map_or(end, |a| a.min(end));
            if stop == j {
                isolated[j as usize] += mass;
            }
            if j < c.exposure + latent || j >= stop {
                continue;
            }
            shedding[j as usize] += mass;
            if j == steps {
                continue;
            }

            let exposures = mass * per_step;
            new[j as usize] += exposures;
            if c.generation == 0 {
                first[j as usize] += exposures;
            }
            let natural = (c.kind == InfectionKind::Typical && (c.app || params.link_model == LinkModel::ContactNeedsApp))
                .then_some(c.exposure + report_after);
            let tested = c.alert.map(|a| a + alert_to_report);
            let report = match (natural, tested) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            };
            let can_alert = c.app || params.link_model == LinkModel::ContactNeedsApp;

            let generation = c.generation + 1;
            if generations.len() <= generation as usize {
                generations.push(GenerationStats { generation, infected: 0.0, app_users: 0.0 });
            }
            for (app, fa) in app_split {
                for (kind, fk) in params.kind_fractions() {
                    let m = exposures * fa * fk;
                    if m <= 0.0 {
                        continue;
                    }
                    let alert = report.filter(|_| app && can_alert);
                    *born.entry(Class { exposure: j, app, alert, kind, generation }).or_default() += m;
                    let g = &mut generations[generation as usize];
                    g.infected += m;
                    if app {
                        g.app_users += m;
                        new_app[j as usize] += m;
                    }
                }
            }
        }
        for (c, m) in born {
            *classes.entry(c).or_default() += m;
        }
    }

    let mut rows = Vec::with_capacity(n);
    let (mut cumulative, mut first_cumulative) = (0.0, 0.0);
    for i in 0..n {
        let (flow, flow_app, flow_first) = if i == 0 { (0.0, 0.0, 0.0) } else { (new[i - 1], new_app[i - 1], first[i - 1]) };
        cumulative += flow;
        first_cumulative += flow_first;
        rows.push(CohortRow {
            t_days: i as f64 * params.step_days,
            new_exposures: flow,
            cumulative_exposures: cumulative,
            first_generation_cumulative: first_cumulative,
            actively_shedding: shedding[i],
            newly_isolated: isolated[i],
            new_app_exposures: flow_app,
        });
    }
    Ok(CohortTimeSeries { params: params.clone(), rows, generations })
}
