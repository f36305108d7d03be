use ctlab_core::episim::{
    generate_contact_graph, run_agent_sim, run_cohort, table1, trace_contacts, CohortParams, ContactGraph,
    GraphParams, Individual, InfectionKind, LinkModel, TraceStrategy, TABLE1_ADOPTIONS, TABLE1_DAYS,
};
use proptest::prelude::*;

fn cohort(p: f64) -> ctlab_core::episim::CohortTimeSeries {
    run_cohort(&CohortParams::with_adoption(p)).unwrap()
}

/// Exposures the index case alone causes by `day`, from first principles:
/// it sheds from the latent day until it isolates, at β per day.
fn index_exposures_oracle(params: &CohortParams, day: f64) -> f64 {
    let shedding = (day.min(params.isolation_day) - params.latent_days).max(0.0);
    params.contacts_per_window / params.contact_window_days * shedding
}

#[test]
fn day_twelve_index_exposures_match_hand_computation() {
    for link_model in [LinkModel::BothNeedApp, LinkModel::ContactNeedsApp] {
        let template = CohortParams { link_model, ..Default::default() };
        for row in table1(&template, &TABLE1_ADOPTIONS, &TABLE1_DAYS).unwrap() {
            let expected = index_exposures_oracle(&template, row.day);
            assert!((row.cumulative_exposures - expected).abs() < 1e-9, "{row:?}");
        }
    }
}

#[test]
fn table_rows_fall_as_adoption_rises() {
    let rows = table1(&CohortParams::default(), &TABLE1_ADOPTIONS, &TABLE1_DAYS).unwrap();
    for &day in TABLE1_DAYS.iter().filter(|d| **d >= 14.0) {
        let at = |p: f64| rows.iter().find(|r| r.day == day && r.adoption == p).unwrap();
        let (r80, r90, r95) = (at(0.80), at(0.90), at(0.95));
        assert!(r95.cumulative_exposures <= r90.cumulative_exposures + 1e-12);
        assert!(r90.cumulative_exposures <= r80.cumulative_exposures + 1e-12);
        assert!(r95.cumulative_all_generations <= r90.cumulative_all_generations);
        assert!(r90.cumulative_all_generations <= r80.cumulative_all_generations);
        assert!(r95.windowed_new_exposures <= r90.windowed_new_exposures);
        assert!(r90.windowed_new_exposures <= r80.windowed_new_exposures);
        if let (Some(a), Some(b), Some(c)) =
            (r95.exposures_per_isolation, r90.exposures_per_isolation, r80.exposures_per_isolation)
        {
            assert!(a <= b && b <= c, "day {day}: {a} {b} {c}");
        }
    }
}

#[test]
fn full_adoption_stops_exposures_after_two_cycles() {
    let s = cohort(1.0);
    for row in s.rows.iter().filter(|r| r.t_days > 14.0) {
        assert_eq!(row.new_exposures, 0.0, "t = {}", row.t_days);
    }
}

#[test]
fn no_adoption_grows_window_on_window() {
    let s = cohort(0.0);
    let windows: Vec<f64> = (3..=10).map(|k| s.windowed_new_exposures(2.0 * k as f64).unwrap()).collect();
    for w in windows.windows(2) {
        assert!(w[1] >= w[0]);
    }
    for w in windows[2..].windows(2) {
        assert!(w[1] > w[0]);
    }
}

#[test]
fn contact_graph_matches_configured_contact_rate() {
    let g = generate_contact_graph(&GraphParams { n: 10_000, ..Default::default() }, 42).unwrap();
    let mean = g.mean_close_contacts(14.0);
    assert!((mean - 36.0).abs() < 1.0, "{mean}");
}

#[test]
fn agent_runs_are_seed_deterministic() {
    let params = CohortParams::with_adoption(0.5);
    let g = generate_contact_graph(&GraphParams::matching(&params, 2_000), 5).unwrap();
    let a = run_agent_sim(&g, &params, TraceStrategy::Iterative, 11, 64).unwrap();
    let b = run_agent_sim(&g, &params, TraceStrategy::Iterative, 11, 64).unwrap();
    assert_eq!(a, b);
    let c = run_agent_sim(&g, &params, TraceStrategy::Iterative, 12, 64).unwrap();
    assert_ne!(a.replicates, c.replicates);
}

#[test]
fn agent_full_adoption_stops_by_day_fourteen() {
    let params = CohortParams::with_adoption(1.0);
    let g = generate_contact_graph(&GraphParams::matching(&params, 20_000), 3).unwrap();
    let s = run_agent_sim(&g, &params, TraceStrategy::Iterative, 1, 500).unwrap();
    for r in &s.replicates {
        assert_eq!(r.cumulative_by_day[14], r.cumulative_by_day[20], "replicate {}", r.replicate);
    }
}

#[test]
fn agent_mean_tracks_cohort_at_moderate_scale() {
    let params = CohortParams { horizon_days: 14.0, ..Default::default() };
    let mut g = generate_contact_graph(&GraphParams::matching(&params, 20_000), 8).unwrap();
    for p in [0.0, 0.6] {
        g.reassign_apps(p, 100);
        let params = CohortParams { adoption: p, ..params.clone() };
        let s = run_agent_sim(&g, &params, TraceStrategy::Iterative, 2, 2_000).unwrap();
        let c = run_cohort(&params).unwrap();
        for day in [12usize, 14] {
            let expected = 1.0 + c.cumulative_at(day as f64).unwrap();
            let z = (s.mean_by_day[day] - expected) / s.standard_error(day);
            assert!(z.abs() < 4.0, "p {p} day {day}: agent {} cohort {expected} z {z}", s.mean_by_day[day]);
        }
    }
}

/// A → B → C → D with B asymptomatic. Exposures at days 0, 5, 10, 15.
fn chain() -> ContactGraph {
    let mut g = ContactGraph::new(vec![Individual::new(true); 4], 0.5, 40);
    g.set_kind(1, InfectionKind::Asymptomatic);
    g.add_contact(0, 1, 10, 1.0).unwrap();
    g.add_contact(1, 2, 20, 1.0).unwrap();
    g.add_contact(2, 3, 30, 1.0).unwrap();
    g.spread_uncontrolled(&[0], &CohortParams::default()).unwrap();
    g
}

#[test]
fn chain_with_asymptomatic_link() {
    let g = chain();
    assert_eq!(g.infection_edges().collect::<Vec<_>>(), vec![(0, 1, 10), (1, 2, 20), (2, 3, 30)]);
    let traced = |s, index: &[u32]| trace_contacts(&g, s, index, 16.0).unwrap().traced;
    assert_eq!(traced(TraceStrategy::FirstOrder, &[0]), vec![1]);
    assert_eq!(traced(TraceStrategy::SingleStep, &[0]), vec![1]);
    assert_eq!(traced(TraceStrategy::Iterative, &[0]), vec![1, 2, 3]);
    // C shows symptoms at day 15.5 and presents; single-step then reaches D.
    assert_eq!(traced(TraceStrategy::SingleStep, &[0, 2]), vec![1, 3]);
}

#[test]
fn retrospective_finds_hidden_infector() {
    let mut g = ContactGraph::new(vec![Individual::new(false); 4], 0.5, 60);
    // U (0) infected X (1) without any recorded contact; X met Y (2); U met Z (3).
    g.seed_index(0, 0).unwrap();
    g.add_infection(0, 1, 12).unwrap();
    g.add_contact(1, 2, 30, 1.0).unwrap();
    g.add_contact(0, 3, 14, 1.0).unwrap();
    let first = trace_contacts(&g, TraceStrategy::FirstOrder, &[1], 16.0).unwrap();
    assert_eq!(first.traced, vec![2]);
    let retro = trace_contacts(&g, TraceStrategy::Retrospective, &[1], 16.0).unwrap();
    assert_eq!(retro.traced, vec![0, 2, 3]);
    assert_eq!(retro.notifications[0].person, 0);
    assert_eq!(retro.notifications[0].via, 1);
}

fn outbreak_graph(seed: u64, n: usize) -> (ContactGraph, Vec<u32>) {
    let params = GraphParams { n, mean_contacts: 6.0, days: 30.0, asymptomatic_fraction: 0.3, ..Default::default() };
    let mut g = generate_contact_graph(&params, seed).unwrap();
    let index = vec![(seed % n as u64) as u32];
    let cohort = CohortParams { horizon_days: 30.0, ..Default::default() };
    g.spread_uncontrolled(&index, &cohort).unwrap();
    (g, index)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn index_exposures_at_day_twelve_ignore_adoption(p in 0.0f64..=1.0, contact_needs_app in any::<bool>()) {
        let link_model = if contact_needs_app { LinkModel::ContactNeedsApp } else { LinkModel::BothNeedApp };
        let s = run_cohort(&CohortParams { adoption: p, link_model, ..Default::default() }).unwrap();
        prop_assert!((s.first_generation_at(12.0).unwrap() - 18.0).abs() < 1e-9);
    }

    #[test]
    fn cumulative_rises_in_time_and_falls_in_adoption(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (s_lo, s_hi) = (cohort(lo), cohort(hi));
        for w in s_lo.rows.windows(2) {
            prop_assert!(w[1].cumulative_exposures >= w[0].cumulative_exposures);
        }
        for (x, y) in s_lo.rows.iter().zip(&s_hi.rows) {
            prop_assert!(y.cumulative_exposures <= x.cumulative_exposures + 1e-9);
            prop_assert!(x.new_exposures >= 0.0 && x.actively_shedding >= 0.0 && x.newly_isolated >= 0.0);
        }
    }

    #[test]
    fn silent_spreaders_never_reduce_exposures(p in 0.0f64..=1.0, asym in 0.0f64..0.5, long in 0.0f64..0.5, bump in 0.0f64..0.5, which in any::<bool>()) {
        let base = CohortParams { adoption: p, asymptomatic_fraction: asym, long_shedder_fraction: long, ..Default::default() };
        let mut raised = base.clone();
        if which { raised.asymptomatic_fraction = (asym + bump).min(1.0 - long) } else { raised.long_shedder_fraction = (long + bump).min(1.0 - asym) }
        let (x, y) = (run_cohort(&base).unwrap(), run_cohort(&raised).unwrap());
        for (r0, r1) in x.rows.iter().zip(&y.rows) {
            prop_assert!(r1.cumulative_exposures >= r0.cumulative_exposures - 1e-9, "t {}", r0.t_days);
        }
    }

    #[test]
    fn traced_sets_nest_across_strategies(seed in any::<u64>(), as_of in 8.0f64..30.0) {
        let (g, index) = outbreak_graph(seed, 150);
        let sets: Vec<Vec<u32>> = TraceStrategy::ALL
            .iter()
            .map(|&s| trace_contacts(&g, s, &index, as_of).unwrap().traced)
            .collect();
        let subset = |a: &[u32], b: &[u32]| a.iter().all(|x| b.binary_search(x).is_ok());
        prop_assert!(subset(&sets[0], &sets[1]));
        prop_assert!(subset(&sets[1], &sets[2]));
        prop_assert!(subset(&sets[2], &sets[3]));
        let again = trace_contacts(&g, TraceStrategy::Retrospective, &index, as_of).unwrap();
        prop_assert_eq!(&again.traced, &sets[3]);
    }
}
