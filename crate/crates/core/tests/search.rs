mod common;

use std::sync::atomic::AtomicBool;

use common::{enumerate_outcomes, key, pareto_set, small_instance};
use irp_core::fixtures::oracle_instance;
use irp_core::runlog::RunLog;
use irp_core::search::{initial_front, run_search, RunObserver};
use irp_core::{
    achievement, compute_weights, construct_initial_front, dominates, run_guided, run_offline,
    Evaluator, InsertResult, Outcome, ReferencePoint, SearchConfig, Solution, TerminationReason,
};
use proptest::prelude::*;

#[derive(Default)]
struct Seen {
    outcomes: Vec<Outcome>,
    indices: Vec<u64>,
}

impl RunObserver for Seen {
    fn on_evaluation(&mut self, eval_index: u64, solution: &Solution, _: InsertResult) {
        self.outcomes.push(solution.outcome);
        self.indices.push(eval_index);
    }
}

fn rp(g1: f64, g2: f64) -> ReferencePoint {
    ReferencePoint::new([g1, g2], "").unwrap()
}

fn archive_keys(archive: &irp_core::Archive) -> std::collections::BTreeSet<(u64, u64)> {
    archive.outcomes().iter().map(key).collect()
}

#[test]
fn oracle_construction_stops_at_four() {
    let front = initial_front(&Evaluator::new(&oracle_instance())).unwrap();
    let got: Vec<_> = front.archive.outcomes().iter().map(|o| (o.inventory, o.routing)).collect();
    assert_eq!(got, vec![(0, 36.0), (5, 24.0), (15, 12.0)]);
    assert_eq!(front.stopped_at, 4);
}

#[test]
fn guided_from_an_archive_point_starts_at_zero() {
    let instance = oracle_instance();
    let start = construct_initial_front(&instance).unwrap();
    let mut config = SearchConfig::guided(rp(5.0, 24.0), 100);
    config.trace_stride = 1;
    let run = run_guided(&instance, start, &config).unwrap();
    assert_eq!(run.start.initial_best_achievement, Some(0.0));
    let best: Vec<f64> = run.trace.points.iter().map(|p| p.best_achievement.unwrap()).collect();
    assert!(best.windows(2).all(|w| w[1] <= w[0]), "{best:?}");
    assert!(best.iter().all(|&b| b <= 0.0));
}

#[test]
fn guided_oracle_against_enumeration() {
    let instance = oracle_instance();
    let start = construct_initial_front(&instance).unwrap();
    let weights = compute_weights(&start.outcomes()).unwrap();
    let r = rp(0.0, 36.0);
    let run = run_guided(&instance, start, &SearchConfig::guided(r.clone(), 100)).unwrap();
    assert!(matches!(
        run.trace.termination_reason,
        TerminationReason::FrontierExhausted | TerminationReason::ConeExited | TerminationReason::BudgetExhausted
    ));
    let config = SearchConfig::guided(r.clone(), 100);
    let (_, best) = run.most_preferred(&config).unwrap();
    assert!(best <= 0.0);
    let floor = enumerate_outcomes(&instance)
        .iter()
        .map(|o| achievement(o, &r, &weights))
        .fold(f64::INFINITY, f64::min);
    assert!(best <= floor + 1e-12 && best >= floor - 1e-12, "best {best}, enumeration {floor}");
}

#[test]
fn offline_oracle_recovers_the_pareto_set() {
    let instance = oracle_instance();
    let start = construct_initial_front(&instance).unwrap();
    let run = run_offline(&instance, start, &SearchConfig::offline(200)).unwrap();
    assert_eq!(archive_keys(&run.archive), pareto_set(&enumerate_outcomes(&instance)));
}

#[test]
fn zero_budget_returns_the_start() {
    let instance = oracle_instance();
    let start = construct_initial_front(&instance).unwrap();
    let run = run_offline(&instance, start.clone(), &SearchConfig::offline(0)).unwrap();
    assert_eq!(run.archive, start);
    assert_eq!(run.evaluations, 0);
    assert_eq!(run.trace.termination_reason, TerminationReason::BudgetExhausted);
}

#[test]
fn dominated_valley_hides_part_of_the_front() {
    // n = 2, T = 4. The front contains pi = (4, 2) and (4, 4), but every ±1
    // path to them from the construction archive passes through (3, 2) or
    // (3, 3), both dominated by (2, 2) and therefore never expanded.
    let instance = small_instance(7, 2, 4, 25);
    let evaluator = Evaluator::new(&instance);
    let outcome = |a, b| {
        evaluator
            .evaluate(&irp_core::PeriodVector::new(vec![a, b], 4).unwrap())
            .unwrap()
            .outcome
    };
    assert!(dominates(&outcome(2, 2), &outcome(3, 2)));
    assert!(dominates(&outcome(2, 2), &outcome(3, 3)));
    let truth = pareto_set(&enumerate_outcomes(&instance));
    assert!(truth.contains(&key(&outcome(4, 2))));

    let start = construct_initial_front(&instance).unwrap();
    let run = run_offline(&instance, start, &SearchConfig::offline(100_000)).unwrap();
    assert_eq!(run.trace.termination_reason, TerminationReason::FrontierExhausted);
    let found = archive_keys(&run.archive);
    assert!(found.is_subset(&truth));
    assert!(!found.contains(&key(&outcome(4, 2))));
}

#[test]
fn preset_stop_flag_ends_before_any_evaluation() {
    let instance = oracle_instance();
    let start = construct_initial_front(&instance).unwrap();
    let stop = AtomicBool::new(true);
    let run = run_search(&Evaluator::new(&instance), start, &SearchConfig::offline(100), &mut (), Some(&stop)).unwrap();
    assert_eq!(run.trace.termination_reason, TerminationReason::UserStop);
    assert_eq!(run.evaluations, 0);
}

#[test]
fn warmup_must_stay_below_budget() {
    let mut config = SearchConfig::guided(rp(1.0, 1.0), 100);
    config.cone_warmup_evals = 100;
    let instance = oracle_instance();
    let start = construct_initial_front(&instance).unwrap();
    assert!(run_guided(&instance, start, &config).is_err());
}

fn guided_case() -> impl Strategy<Value = (u64, usize, u32, usize, u64, u64)> {
    // seed, n, T, reference point index, budget, warmup
    (any::<u64>(), 2usize..8, 2u32..8, 0usize..8, 50u64..600)
        .prop_flat_map(|(seed, n, t, idx, budget)| (Just(seed), Just(n), Just(t), Just(idx), Just(budget), 0..budget))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn guided_runs_keep_their_contracts((seed, n, horizon, idx, budget, warmup) in guided_case()) {
        let instance = small_instance(seed, n, horizon, 40);
        let start = construct_initial_front(&instance).unwrap();
        let points = start.outcomes();
        let target = points[idx % points.len()];
        let mut config = SearchConfig::guided(ReferencePoint::from_outcome(&target, "R"), budget);
        config.cone_warmup_evals = warmup;
        config.trace_stride = 7;
        let mut seen = Seen::default();
        let run = run_search(&Evaluator::new(&instance), start.clone(), &config, &mut seen, None).unwrap();

        prop_assert!(run.evaluations <= budget);
        prop_assert_eq!(seen.indices, (1..=run.evaluations).collect::<Vec<_>>());
        if run.trace.termination_reason == TerminationReason::ConeExited {
            prop_assert!(run.evaluations > warmup);
        }
        let best: Vec<f64> = run.trace.points.iter().map(|p| p.best_achievement.unwrap()).collect();
        prop_assert!(best.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(run.trace.points.windows(2).all(|w| w[0].eval_index < w[1].eval_index));
        // nothing evaluated dominates a survivor
        for member in run.archive.members() {
            prop_assert!(!seen.outcomes.iter().any(|o| dominates(o, &member.solution.outcome)));
        }

        let again = run_search(&Evaluator::new(&instance), start, &config, &mut (), None).unwrap();
        prop_assert_eq!(
            RunLog::from_run(&instance.name, &config, &run).render(),
            RunLog::from_run(&instance.name, &config, &again).render()
        );
    }

    #[test]
    fn offline_counts_every_evaluation(seed in any::<u64>(), budget in 0u64..400) {
        let instance = small_instance(seed, 4, 5, 40);
        let start = construct_initial_front(&instance).unwrap();
        let mut seen = Seen::default();
        let run = run_search(&Evaluator::new(&instance), start.clone(), &SearchConfig::offline(budget), &mut seen, None).unwrap();
        prop_assert_eq!(seen.outcomes.len() as u64, run.evaluations);
        prop_assert_eq!(run.archive.insert_counter() - start.insert_counter(), run.evaluations);
        prop_assert!(run.evaluations <= budget);
        if run.evaluations < budget {
            prop_assert_eq!(run.trace.termination_reason, TerminationReason::FrontierExhausted);
        }
        let mut all = start.outcomes();
        all.extend(seen.outcomes);
        prop_assert_eq!(archive_keys(&run.archive), pareto_set(&all));
    }
}
