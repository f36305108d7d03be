use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Poisson};
use serde::{Deserialize, Serialize};

use super::cohort::CohortParams;
use super::{check_unit, EpiError};

/// Contacts at or under this distance can transmit.
pub const CLOSE_CONTACT_M: f32 = 2.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfectionKind {
    /// Symptomatic within the usual window; self-isolates and self-reports.
    #[default]
    Typical,
    Asymptomatic,
    LongShedder,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub has_app: bool,
    /// Days from exposure to symptom onset if this person is infected.
    pub onset_offset_days: f64,
    pub kind: InfectionKind,
}

impl Individual {
    pub fn new(has_app: bool) -> Self {
        Individual { has_app, onset_offset_days: 5.5, kind: InfectionKind::Typical }
    }

    pub fn symptomatic(&self) -> bool {
        self.kind == InfectionKind::Typical
    }
}

/// One side of a contact event, stored with the person it belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contact {
    pub step: u32,
    pub other: u32,
    pub proximity_m: f32,
}

impl Contact {
    pub fn is_close(&self) -> bool {
        self.proximity_m <= CLOSE_CONTACT_M
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Infection {
    /// `None` for index cases.
    pub infector: Option<u32>,
    pub exposure_step: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphParams {
    pub n: usize,
    /// Mean number of close contacts per person per contact window.
    pub mean_contacts: f64,
    pub contact_window_days: f64,
    pub days: f64,
    pub step_days: f64,
    pub adoption: f64,
    /// Distant (over two metres, within Bluetooth range) events per close event.
    pub distant_ratio: f64,
    pub max_range_m: f32,
    pub symptomatic_window: [f64; 2],
    pub asymptomatic_fraction: f64,
    pub long_shedder_fraction: f64,
}

impl Default for GraphParams {
    fn default() -> Self {
        GraphParams {
            n: 10_000,
            mean_contacts: 36.0,
            contact_window_days: 14.0,
            days: 20.0,
            step_days: 0.5,
            adoption: 0.0,
            distant_ratio: 0.25,
            max_range_m: 30.0,
            symptomatic_window: [5.5, 11.5],
            asymptomatic_fraction: 0.0,
            long_shedder_fraction: 0.0,
        }
    }
}

impl GraphParams {
    /// Graph settings that line up with a cohort parameter set.
    pub fn matching(params: &CohortParams, n: usize) -> Self {
        GraphParams {
            n,
            mean_contacts: params.contacts_per_window,
            contact_window_days: params.contact_window_days,
            days: params.horizon_days,
            step_days: params.step_days,
            adoption: params.adoption,
            symptomatic_window: params.symptomatic_window,
            asymptomatic_fraction: params.asymptomatic_fraction,
            long_shedder_fraction: params.long_shedder_fraction,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<(), EpiError> {
        let bad = |m: String| Err(EpiError::InvalidParams(m));
        if self.n == 0 || self.n > u32::MAX as usize {
            return bad(format!("population n = {} must be at least 1", self.n));
        }
        for (name, v) in [
            ("mean_contacts", self.mean_contacts),
            ("distant_ratio", self.distant_ratio),
            ("days", self.days),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be a non-negative number"));
            }
        }
        if !(self.contact_window_days > 0.0 && self.step_days > 0.0) {
            return bad("contact window and step must be positive".into());
        }
        if !(self.max_range_m > CLOSE_CONTACT_M) {
            return bad(format!("max_range_m = {} must exceed {CLOSE_CONTACT_M}", self.max_range_m));
        }
        let [a, b] = self.symptomatic_window;
        if !(0.0 <= a && a <= b) {
            return bad(format!("symptomatic window [{a}, {b}] is empty"));
        }
        check_unit("adoption", self.adoption)?;
        check_unit("asymptomatic_fraction", self.asymptomatic_fraction)?;
        check_unit("long_shedder_fraction", self.long_shedder_fraction)?;
        if self.asymptomatic_fraction + self.long_shedder_fraction > 1.0 {
            return bad("asymptomatic_fraction + long_shedder_fraction exceeds 1".into());
        }
        Ok(())
    }
}

/// People, their contact events and (once an outbreak has been seeded) who
/// infected whom. Times are whole steps of `step_days`.
#[derive(Clone, Debug)]
pub struct ContactGraph {
    step_days: f64,
    steps: u32,
    individuals: Vec<Individual>,
    contacts: Arc<Vec<Vec<Contact>>>,
    infections: Vec<Option<Infection>>,
}

impl ContactGraph {
    /// A graph with no contacts covering `steps` steps.
    pub fn new(individuals: Vec<Individual>, step_days: f64, steps: u32) -> Self {
        let n = individuals.len();
        ContactGraph {
            step_days,
            steps,
            individuals,
            contacts: Arc::new(vec![Vec::new(); n]),
            infections: vec![None; n],
        }
    }

    pub fn len(&self) -> usize {
        self.individuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }

    pub fn step_days(&self) -> f64 {
        self.step_days
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    pub fn days(&self) -> f64 {
        self.steps as f64 * self.step_days
    }

    pub fn individual(&self, id: u32) -> &Individual {
        &self.individuals[id as usize]
    }

    pub fn individuals(&self) -> &[Individual] {
        &self.individuals
    }

    pub fn contains(&self, id: u32) -> bool {
        (id as usize) < self.individuals.len()
    }

    /// Contacts of `id`, ordered by step then partner.
    pub fn contacts_of(&self, id: u32) -> &[Contact] {
        &self.contacts[id as usize]
    }

    /// Contacts of `id` with `from <= step < to`.
    pub fn contacts_between(&self, id: u32, from: u32, to: u32) -> &[Contact] {
        let all = self.contacts_of(id);
        let lo = all.partition_point(|c| c.step < from);
        let hi = all.partition_point(|c| c.step < to);
        &all[lo..hi.max(lo)]
    }

    /// Every event once, as `(a, b, step, proximity)` with `a < b`.
    pub fn events(&self) -> impl Iterator<Item = (u32, u32, u32, f32)> + '_ {
        self.contacts.iter().enumerate().flat_map(|(a, list)| {
            let a = a as u32;
            list.iter().filter(move |c| c.other > a).map(move |c| (a, c.other, c.step, c.proximity_m))
        })
    }

    pub fn event_count(&self) -> usize {
        self.contacts.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Mean number of close contacts per person per `window_days`.
    pub fn mean_close_contacts(&self, window_days: f64) -> f64 {
        let close: usize = self.contacts.iter().map(|l| l.iter().filter(|c| c.is_close()).count()).sum();
        close as f64 / self.len() as f64 * window_days / self.days()
    }

    pub fn add_contact(&mut self, a: u32, b: u32, step: u32, proximity_m: f32) -> Result<(), EpiError> {
        if a == b || !self.contains(a) || !self.contains(b) {
            return Err(EpiError::InvalidGraph(format!("bad contact pair ({a}, {b})")));
        }
        if step >= self.steps || !(proximity_m >= 0.0) {
            return Err(EpiError::InvalidGraph(format!("bad contact time {step} or distance {proximity_m}")));
        }
        let contacts = Arc::make_mut(&mut self.contacts);
        for (x, y) in [(a, b), (b, a)] {
            let list = &mut contacts[x as usize];
            let at = list.partition_point(|c| (c.step, c.other) <= (step, y));
            list.insert(at, Contact { step, other: y, proximity_m });
        }
        Ok(())
    }

    pub fn set_app(&mut self, id: u32, has_app: bool) {
        self.individuals[id as usize].has_app = has_app;
    }

    pub fn set_kind(&mut self, id: u32, kind: InfectionKind) {
        self.individuals[id as usize].kind = kind;
    }

    /// Redraws app membership with probability `adoption`, keeping contacts.
    pub fn reassign_apps(&mut self, adoption: f64, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for ind in &mut self.individuals {
            ind.has_app = rng.random::<f64>() < adoption;
        }
    }

    pub fn infection(&self, id: u32) -> Option<Infection> {
        self.infections[id as usize]
    }

    /// Infection edges `(infector, infectee, exposure_step)`.
    pub fn infection_edges(&self) -> impl Iterator<Item = (u32, u32, u32)> + '_ {
        self.infections
            .iter()
            .enumerate()
            .filter_map(|(i, inf)| inf.and_then(|inf| inf.infector.map(|s| (s, i as u32, inf.exposure_step))))
    }

    pub fn seed_index(&mut self, id: u32, exposure_step: u32) -> Result<(), EpiError> {
        self.record(id, Infection { infector: None, exposure_step })
    }

    pub fn add_infection(&mut self, infector: u32, infectee: u32, exposure_step: u32) -> Result<(), EpiError> {
        match self.infections.get(infector as usize) {
            Some(Some(src)) if src.exposure_step < exposure_step => {}
            _ => {
                return Err(EpiError::InvalidGraph(format!(
                    "{infector} is not infected before step {exposure_step}"
                )))
            }
        }
        self.record(infectee, Infection { infector: Some(infector), exposure_step })
    }

    fn record(&mut self, id: u32, inf: Infection) -> Result<(), EpiError> {
        match self.infections.get_mut(id as usize) {
            Some(slot @ None) => {
                *slot = Some(inf);
                Ok(())
            }
            Some(Some(_)) => Err(EpiError::InvalidGraph(format!("{id} is already infected"))),
            None => Err(EpiError::UnknownIndexCase(id)),
        }
    }

    pub fn clear_infections(&mut self) {
        self.infections.iter_mut().for_each(|i| *i = None);
    }

    /// Runs transmission with no intervention from `index_cases` exposed at
    /// step 0, recording infection edges. Every close contact with a shedding
    /// person infects.
    pub fn spread_uncontrolled(&mut self, index_cases: &[u32], params: &CohortParams) -> Result<(), EpiError> {
        params.validate()?;
        for &id in index_cases {
            self.seed_index(id, 0)?;
        }
        let latent = params.steps(params.latent_days);
        let mut infected: Vec<u32> = index_cases.to_vec();
        for j in 0..self.steps {
            let mut fresh = Vec::new();
            for &x in &infected {
                let inf = self.infections[x as usize].expect("tracked");
                let end = inf.exposure_step + params.shedding_end_steps(self.individual(x).kind);
                if j < inf.exposure_step + latent || j >= end {
                    continue;
                }
                for c in self.contacts_between(x, j, j + 1) {
                    if c.is_close() && self.infections[c.other as usize].is_none() && !fresh.iter().any(|(_, y)| *y == c.other) {
                        fresh.push((x, c.other));
                    }
                }
            }
            for (x, y) in fresh {
                self.add_infection(x, y, j)?;
                infected.push(y);
            }
        }
        Ok(())
    }
}

/// Seeded synthetic population with per-step contact events.
///
/// Each step draws a Poisson number of close events between uniformly chosen
/// pairs, sized so that a person averages `mean_contacts` close contacts per
/// contact window, plus `distant_ratio` times as many events beyond two
/// metres. App membership, infection kind and onset offsets are drawn per
/// person.
pub fn generate_contact_graph(params: &GraphParams, seed: u64) -> Result<ContactGraph, EpiError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [onset_lo, onset_hi] = params.symptomatic_window;
    let individuals: Vec<Individual> = (0..params.n)
        .map(|_| {
            // Fixed draw count per person keeps contacts independent of adoption.
            let has_app = rng.random::<f64>() < params.adoption;
            let u: f64 = rng.random();
            let kind = if u < params.asymptomatic_fraction {
                InfectionKind::Asymptomatic
            } else if u < params.asymptomatic_fraction + params.long_shedder_fraction {
                InfectionKind::LongShedder
            } else {
                InfectionKind::Typical
            };
            let onset_offset_days = onset_lo + (onset_hi - onset_lo) * rng.random::<f64>();
            Individual { has_app, onset_offset_days, kind }
        })
        .collect();

    let steps = (params.days / params.step_days).round() as u32;
    let mut graph = ContactGraph::new(individuals, params.step_days, steps);
    let n = params.n as u32;
    if n < 2 {
        return Ok(graph);
    }

    let per_person_step = params.mean_contacts / params.contact_window_days * params.step_days;
    let close_mean = params.n as f64 * per_person_step / 2.0;
    let distant_mean = close_mean * params.distant_ratio;
    let contacts = Arc::make_mut(&mut graph.contacts);
    for step in 0..steps {
        for (mean, near) in [(close_mean, true), (distant_mean, false)] {
            if mean <= 0.0 {
                continue;
            }
            let count = Poisson::new(mean).expect("positive mean").sample(&mut rng) as u64;
            for _ in 0..count {
                let a = rng.random_range(0..n);
                let mut b = rng.random_range(0..n - 1);
                if b >= a {
                    b += 1;
                }
                let proximity_m = if near {
                    CLOSE_CONTACT_M * (1.0 - rng.random::<f32>())
                } else {
                    rng.random_range(CLOSE_CONTACT_M..params.max_range_m)
                };
                contacts[a as usize].push(Contact { step, other: b, proximity_m });
                contacts[b as usize].push(Contact { step, other: a, proximity_m });
            }
        }
    }
    for list in contacts.iter_mut() {
        // Stable sort keeps generation order between equal keys.
        list.sort_by_key(|c| (c.step, c.other));
    }
    Ok(graph)
}
