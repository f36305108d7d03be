use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::agent::ALERT_LOOKBACK_DAYS;
use super::graph::ContactGraph;
use super::{EpiError, TraceStrategy};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Notification {
    pub person: u32,
    /// Day of the contact (or, for an upstream infector, of the infection)
    /// that led to this person.
    pub day: f64,
    pub via: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceResult {
    pub strategy: TraceStrategy,
    /// Traced people in ascending id order, index cases excluded.
    pub traced: Vec<u32>,
    /// Notifications in the order the tracer issues them.
    pub notifications: Vec<Notification>,
}

/// Traces outward from `index_cases` using the contacts recorded in the
/// `ALERT_LOOKBACK_DAYS` up to `as_of_day` and the infection state known at
/// `as_of_day`.
///
/// Every strategy notifies the close contacts of each person it expands.
/// It expands the index cases, then:
/// FirstOrder nobody else; SingleStep traced contacts who are infected and
/// have shown symptoms; Iterative every infected traced contact.
/// Retrospective also expands the infector of each expanded person.
pub fn trace_contacts(
    graph: &ContactGraph,
    strategy: TraceStrategy,
    index_cases: &[u32],
    as_of_day: f64,
) -> Result<TraceResult, EpiError> {
    if let Some(&bad) = index_cases.iter().find(|&&id| !graph.contains(id)) {
        return Err(EpiError::UnknownIndexCase(bad));
    }
    let h = graph.step_days();
    let as_of_step = (as_of_day / h).floor().max(0.0) as u32;
    let from = (as_of_step + 1).saturating_sub((ALERT_LOOKBACK_DAYS / h).round() as u32);

    let infected = |id: u32| graph.infection(id).is_some_and(|inf| inf.exposure_step <= as_of_step);
    let presented = |id: u32| {
        graph.infection(id).is_some_and(|inf| {
            inf.exposure_step <= as_of_step
                && graph.individual(id).symptomatic()
                && inf.exposure_step as f64 * h + graph.individual(id).onset_offset_days <= as_of_day
        })
    };
    let expands = |id: u32| match strategy {
        TraceStrategy::FirstOrder => false,
        TraceStrategy::SingleStep => presented(id),
        TraceStrategy::Iterative | TraceStrategy::Retrospective => infected(id),
    };

    let index: BTreeSet<u32> = index_cases.iter().copied().collect();
    let mut seen = index.clone();
    let mut queue: VecDeque<u32> = index.iter().copied().collect();
    let mut notifications = Vec::new();

    while let Some(x) = queue.pop_front() {
        if strategy == TraceStrategy::Retrospective {
            if let Some(up) = graph.infection(x).and_then(|inf| inf.infector.map(|z| (z, inf.exposure_step))) {
                let (z, step) = up;
                if seen.insert(z) {
                    notifications.push(Notification { person: z, day: step as f64 * h, via: x });
                    queue.push_back(z);
                }
            }
        }
        for c in graph.contacts_between(x, from, as_of_step + 1) {
            if !c.is_close() || !seen.insert(c.other) {
                continue;
            }
            notifications.push(Notification { person: c.other, day: c.step as f64 * h, via: x });
            if expands(c.other) {
                queue.push_back(c.other);
            }
        }
    }

    let mut traced: Vec<u32> = notifications.iter().map(|n| n.person).collect();
    traced.sort_unstable();
    Ok(TraceResult { strategy, traced, notifications })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::episim::graph::Individual;

    fn star() -> ContactGraph {
        let mut g = ContactGraph::new(vec![Individual::new(true); 6], 0.5, 40);
        for leaf in 1..=4 {
            g.add_contact(0, leaf, 20 + leaf, 1.0).unwrap();
        }
        g.add_contact(1, 5, 26, 1.0).unwrap();
        g
    }

    #[test]
    fn first_order_on_a_star_returns_the_leaves() {
        let r = trace_contacts(&star(), TraceStrategy::FirstOrder, &[0], 15.0).unwrap();
        assert_eq!(r.traced, vec![1, 2, 3, 4]);
        assert!(r.notifications.iter().all(|n| n.via == 0));
        let days: Vec<f64> = r.notifications.iter().map(|n| n.day).collect();
        assert_eq!(days, vec![10.5, 11.0, 11.5, 12.0]);
    }

    #[test]
    fn contacts_after_as_of_or_too_old_are_ignored() {
        let g = star();
        assert_eq!(trace_contacts(&g, TraceStrategy::FirstOrder, &[0], 11.0).unwrap().traced, vec![1, 2]);
        assert!(trace_contacts(&g, TraceStrategy::FirstOrder, &[0], 30.0).unwrap().traced.is_empty());
    }

    #[test]
    fn distant_contacts_are_not_traced() {
        let mut g = ContactGraph::new(vec![Individual::new(true); 2], 0.5, 10);
        g.add_contact(0, 1, 2, 2.5).unwrap();
        assert!(trace_contacts(&g, TraceStrategy::Iterative, &[0], 4.0).unwrap().traced.is_empty());
    }

    #[test]
    fn unknown_index() {
        assert_eq!(trace_contacts(&star(), TraceStrategy::Iterative, &[9], 1.0), Err(EpiError::UnknownIndexCase(9)));
    }
}
