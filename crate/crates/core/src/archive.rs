//! Unbounded archive of mutually non-dominated solutions.
//!
//! Insertion is a linear scan. A candidate is rejected when a member
//! dominates it or has the identical outcome vector (the first-seen
//! representative wins); otherwise it is added and every member it dominates
//! is evicted.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::evaluation::{Outcome, Solution};

/// `a` dominates `b` under minimization: no worse in both objectives and
/// strictly better in at least one.
#[inline]
pub fn dominates(a: &Outcome, b: &Outcome) -> bool {
    a.inventory <= b.inventory
        && a.routing <= b.routing
        && (a.inventory < b.inventory || a.routing < b.routing)
}

/// `a` is strictly better than `b` in every objective.
#[inline]
pub fn strictly_dominates(a: &Outcome, b: &Outcome) -> bool {
    a.inventory < b.inventory && a.routing < b.routing
}

#[inline]
fn same_outcome(a: &Outcome, b: &Outcome) -> bool {
    a.inventory == b.inventory && a.routing == b.routing
}

/// True when no point in `points` is strictly improved upon in every
/// objective by another one, i.e. every point is weakly efficient within the
/// set.
pub fn weak_dominance_filter_check(points: &[Outcome]) -> bool {
    points
        .iter()
        .all(|p| !points.iter().any(|q| strictly_dominates(q, p)))
}

/// Brute-force Pareto filter: the distinct outcome vectors of `points` that
/// no other point dominates, in first-seen order.
pub fn pareto_filter(points: &[Outcome]) -> Vec<Outcome> {
    let mut out: Vec<Outcome> = Vec::new();
    for p in points {
        if points.iter().any(|q| dominates(q, p)) {
            continue;
        }
        if !out.iter().any(|q| same_outcome(q, p)) {
            out.push(*p);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InsertResult {
    Accepted,
    RejectedDominated,
    RejectedDuplicate,
}

impl InsertResult {
    pub fn is_accepted(self) -> bool {
        self == InsertResult::Accepted
    }
}

/// Stable handle of an archive member, unique over the archive's lifetime.
pub type MemberId = u64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub id: MemberId,
    /// Evaluation index at which the solution was found.
    pub eval_index: u64,
    pub solution: Solution,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Archive {
    members: Vec<Member>,
    insert_counter: u64,
    next_id: MemberId,
}

impl Archive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Total attempted insertions.
    pub fn insert_counter(&self) -> u64 {
        self.insert_counter
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn outcomes(&self) -> Vec<Outcome> {
        self.members.iter().map(|m| m.solution.outcome).collect()
    }

    pub fn get(&self, id: MemberId) -> Option<&Member> {
        self.members.iter().find(|m| m.id == id)
    }

    pub fn contains(&self, id: MemberId) -> bool {
        self.get(id).is_some()
    }

    /// Id the next accepted solution will receive.
    pub fn next_id(&self) -> MemberId {
        self.next_id
    }

    pub fn try_insert(&mut self, solution: Solution, eval_index: u64) -> InsertResult {
        self.insert_counter += 1;
        let candidate = solution.outcome;
        for member in &self.members {
            let outcome = &member.solution.outcome;
            if same_outcome(outcome, &candidate) {
                return InsertResult::RejectedDuplicate;
            }
            if dominates(outcome, &candidate) {
                return InsertResult::RejectedDominated;
            }
        }
        self.members
            .retain(|m| !dominates(&candidate, &m.solution.outcome));
        self.members.push(Member {
            id: self.next_id,
            eval_index,
            solution,
        });
        self.next_id += 1;
        InsertResult::Accepted
    }

    /// Snapshot as CSV with header `eval_index,g1,g2,pi`, rows sorted by
    /// inventory then distance.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<&Member> = self.members.iter().collect();
        rows.sort_by(|a, b| {
            let (x, y) = (&a.solution.outcome, &b.solution.outcome);
            x.inventory
                .cmp(&y.inventory)
                .then(x.routing.total_cmp(&y.routing))
        });
        let mut out = String::from("eval_index,g1,g2,pi\n");
        for m in rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                m.eval_index,
                m.solution.outcome.inventory,
                m.solution.outcome.routing,
                m.solution.pi.to_joined()
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::PeriodVector;

    fn sol(g1: u64, g2: f64) -> Solution {
        Solution {
            pi: PeriodVector::uniform(1, 1),
            outcome: Outcome::new(g1, g2),
            plan: None,
        }
    }

    fn o(g1: u64, g2: f64) -> Outcome {
        Outcome::new(g1, g2)
    }

    #[test]
    fn dominance_cases() {
        assert!(dominates(&o(1, 2.0), &o(2, 2.0)));
        assert!(!dominates(&o(1, 2.0), &o(1, 2.0)));
        assert!(!dominates(&o(1, 3.0), &o(2, 2.0)));
        assert!(!dominates(&o(2, 2.0), &o(1, 3.0)));
    }

    #[test]
    fn insert_examples() {
        let mut archive = Archive::new();
        assert_eq!(archive.try_insert(sol(0, 36.0), 0), InsertResult::Accepted);
        assert_eq!(archive.try_insert(sol(15, 12.0), 0), InsertResult::Accepted);
        assert_eq!(archive.try_insert(sol(5, 24.0), 1), InsertResult::Accepted);
        assert_eq!(archive.len(), 3);
        let mut expected = pareto_filter(&[o(0, 36.0), o(15, 12.0), o(5, 24.0)]);
        let mut got = archive.outcomes();
        let key = |x: &Outcome| (x.inventory, x.routing.to_bits());
        expected.sort_by_key(key);
        got.sort_by_key(key);
        assert_eq!(got, expected);

        assert_eq!(archive.try_insert(sol(6, 25.0), 2), InsertResult::RejectedDominated);
        assert_eq!(archive.try_insert(sol(0, 36.0), 3), InsertResult::RejectedDuplicate);
        assert_eq!(archive.len(), 3);
        assert_eq!(archive.insert_counter(), 5);
    }

    #[test]
    fn insertion_evicts_dominated_members() {
        let mut archive = Archive::new();
        archive.try_insert(sol(1, 5.0), 0);
        archive.try_insert(sol(3, 3.0), 0);
        archive.try_insert(sol(5, 1.0), 0);
        assert_eq!(archive.try_insert(sol(1, 1.0), 1), InsertResult::Accepted);
        assert_eq!(archive.outcomes(), vec![o(1, 1.0)]);
    }

    #[test]
    fn duplicate_keeps_first_representative() {
        let mut archive = Archive::new();
        let mut first = sol(2, 2.0);
        first.pi = PeriodVector::uniform(2, 1);
        archive.try_insert(first.clone(), 0);
        let mut second = sol(2, 2.0);
        second.pi = PeriodVector::uniform(2, 2);
        assert_eq!(archive.try_insert(second, 1), InsertResult::RejectedDuplicate);
        assert_eq!(archive.members()[0].solution.pi, first.pi);
    }

    #[test]
    fn weak_dominance_check() {
        assert!(weak_dominance_filter_check(&[o(1, 5.0), o(2, 4.0)]));
        assert!(weak_dominance_filter_check(&[]));
        // (1,4) dominates (1,5) but is not strictly better in both.
        assert!(weak_dominance_filter_check(&[o(1, 5.0), o(1, 4.0)]));
        assert!(!weak_dominance_filter_check(&[o(2, 5.0), o(1, 4.0)]));
        let mut archive = Archive::new();
        archive.try_insert(sol(1, 5.0), 0);
        archive.try_insert(sol(1, 4.0), 1);
        assert_eq!(archive.outcomes(), vec![o(1, 4.0)]);
        assert!(weak_dominance_filter_check(&archive.outcomes()));
    }

    #[test]
    fn ids_are_unique_and_monotone() {
        let mut archive = Archive::new();
        archive.try_insert(sol(3, 3.0), 0);
        archive.try_insert(sol(1, 1.0), 1);
        archive.try_insert(sol(0, 2.0), 2);
        let ids: Vec<_> = archive.members().iter().map(|m| m.id).collect();
        assert_eq!(ids, vec![1, 2]);
        assert!(!archive.contains(0));
    }

    #[test]
    fn csv_snapshot() {
        let mut archive = Archive::new();
        let mut a = sol(15, 12.0);
        a.pi = PeriodVector::uniform(2, 3);
        let mut b = sol(0, 36.5);
        b.pi = PeriodVector::uniform(2, 1);
        archive.try_insert(a, 4);
        archive.try_insert(b, 0);
        assert_eq!(archive.to_csv(), "eval_index,g1,g2,pi\n0,0,36.5,1;1\n4,15,12,3;3\n");
    }
}
