//! Clarke & Wright savings heuristic, parallel variant.
//!
//! Every served customer starts on its own depot round trip. Pairs are
//! processed in descending order of `s(i, j) = d(0, i) + d(0, j) - d(i, j)`,
//! ties broken by ascending `(min id, max id)`. Two routes are joined when `i`
//! and `j` are end points of distinct routes and the joined load fits the
//! vehicle. Pairs with non-positive savings are never applied.
//!
//! Savings depend on geometry only, so [`SavingsRouter`] sorts all pairs once
//! per instance and each call filters the list down to the customers served.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::Instance;

const NONE: usize = usize::MAX;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RoutingError {
    #[error("customer {customer}: quantity {quantity} exceeds vehicle capacity {capacity}")]
    QuantityExceedsCapacity {
        customer: u32,
        quantity: u32,
        capacity: u32,
    },
    #[error("unknown customer id {0}")]
    UnknownCustomer(u32),
}

/// A depot-to-depot tour; the depot is implicit at both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub customer_sequence: Vec<u32>,
    pub load: u64,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RoutingSolution {
    pub routes: Vec<Route>,
    pub total_distance: f64,
}

/// The savings of serving `i` and `j` on one tour instead of two.
#[inline]
pub fn savings_value(d0i: f64, d0j: f64, dij: f64) -> f64 {
    d0i + d0j - dij
}

#[derive(Debug, Clone, Copy)]
struct Pair {
    i: u32,
    j: u32,
}

/// Precomputed distances and the globally sorted savings list for one
/// instance.
#[derive(Debug, Clone)]
pub struct SavingsRouter {
    n: usize,
    capacity: u32,
    depot_distance: Vec<f64>,
    distance: Vec<f64>,
    pairs: Vec<Pair>,
    /// For each customer, the indices into `pairs` involving it, ascending.
    by_customer: Vec<Vec<u32>>,
}

/// Reusable per-call working memory.
#[derive(Debug, Default)]
pub struct RouterScratch {
    links: Vec<[usize; 2]>,
    partner: Vec<usize>,
    load: Vec<u64>,
    visited: Vec<bool>,
    /// Served and still a route end point that can take a merge.
    open: Vec<bool>,
    sequence: Vec<usize>,
}

impl RouterScratch {
    fn reset(&mut self, n: usize) {
        self.links.clear();
        self.links.resize(n, [NONE, NONE]);
        self.partner.clear();
        self.partner.extend(0..n);
        self.load.clear();
        self.load.resize(n, 0);
        self.visited.clear();
        self.visited.resize(n, false);
        self.open.clear();
        self.open.resize(n, false);
    }
}

impl SavingsRouter {
    pub fn new(instance: &Instance) -> Self {
        let n = instance.customers.len();
        let depot_distance: Vec<f64> = instance
            .customers
            .iter()
            .map(|c| instance.depot.distance(&c.location))
            .collect();
        let mut distance = vec![0.0; n * n];
        for (a, ca) in instance.customers.iter().enumerate() {
            for (b, cb) in instance.customers.iter().enumerate() {
                distance[a * n + b] = ca.location.distance(&cb.location);
            }
        }
        let mut scored = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                let s = savings_value(depot_distance[i], depot_distance[j], distance[i * n + j]);
                if s > 0.0 {
                    scored.push((s, Pair { i: i as u32, j: j as u32 }));
                }
            }
        }
        scored.sort_by(|(sa, a), (sb, b)| {
            sb.total_cmp(sa)
                .then(a.i.cmp(&b.i))
                .then(a.j.cmp(&b.j))
        });
        let pairs: Vec<Pair> = scored.into_iter().map(|(_, p)| p).collect();
        let mut by_customer = vec![Vec::new(); n];
        for (index, pair) in pairs.iter().enumerate() {
            by_customer[pair.i as usize].push(index as u32);
            by_customer[pair.j as usize].push(index as u32);
        }
        Self {
            n,
            capacity: instance.vehicle_capacity,
            depot_distance,
            distance,
            pairs,
            by_customer,
        }
    }

    /// Indices of the pairs whose customers are both served, in savings
    /// order.
    pub fn active_pairs(&self, quantities: &[u32], out: &mut Vec<u32>) {
        out.clear();
        for (index, pair) in self.pairs.iter().enumerate() {
            if quantities[pair.i as usize] != 0 && quantities[pair.j as usize] != 0 {
                out.push(index as u32);
            }
        }
    }

    /// Pair indices involving customer index `k`, in savings order.
    pub fn pairs_of(&self, k: usize) -> &[u32] {
        &self.by_customer[k]
    }

    pub fn n_customers(&self) -> usize {
        self.n
    }

    /// Number of positive-savings pairs.
    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn capacity(&self) -> u32 {
        self.capacity
    }

    #[inline]
    fn d(&self, a: usize, b: usize) -> f64 {
        self.distance[a * self.n + b]
    }

    /// Runs the merge phase. `quantities[k]` is the delivery to customer
    /// `k + 1`; zero means not served. Leaves the route structure in
    /// `scratch`.
    fn merge(&self, quantities: &[u32], scratch: &mut RouterScratch) -> Result<usize, RoutingError> {
        self.merge_pairs(quantities, self.pairs.iter().copied(), scratch)
    }

    /// As [`Self::merge`], restricted to the given pair indices, which must
    /// be in savings order and include every pair of served customers.
    /// Pairs touching an unserved customer are skipped.
    fn merge_over(
        &self,
        quantities: &[u32],
        pairs: impl IntoIterator<Item = u32>,
        scratch: &mut RouterScratch,
    ) -> Result<usize, RoutingError> {
        let pairs = pairs.into_iter().map(|index| self.pairs[index as usize]);
        self.merge_pairs(quantities, pairs, scratch)
    }

    fn merge_pairs(
        &self,
        quantities: &[u32],
        pairs: impl Iterator<Item = Pair>,
        scratch: &mut RouterScratch,
    ) -> Result<usize, RoutingError> {
        debug_assert_eq!(quantities.len(), self.n);
        scratch.reset(self.n);
        let mut routes = 0usize;
        for (k, &q) in quantities.iter().enumerate() {
            if q > self.capacity {
                return Err(RoutingError::QuantityExceedsCapacity {
                    customer: k as u32 + 1,
                    quantity: q,
                    capacity: self.capacity,
                });
            }
            if q > 0 {
                scratch.load[k] = u64::from(q);
                routes += 1;
            }
        }
        if routes < 2 {
            return Ok(routes);
        }
        let capacity = u64::from(self.capacity);
        let mut smallest = u64::MAX;
        for (k, &q) in quantities.iter().enumerate() {
            if q > 0 {
                scratch.open[k] = true;
                smallest = smallest.min(u64::from(q));
            }
        }
        // Merges since the last check that any merge is still possible.
        let mut pending = 0u32;
        for pair in pairs {
            let (i, j) = (pair.i as usize, pair.j as usize);
            if !(scratch.open[i] & scratch.open[j]) {
                continue;
            }
            if pending >= 8 {
                if !self.can_merge(scratch, capacity) {
                    break;
                }
                pending = 0;
            }
            let (end_i, end_j) = (scratch.partner[i], scratch.partner[j]);
            if end_i == j {
                continue;
            }
            let joined = scratch.load[i] + scratch.load[j];
            if joined > capacity {
                continue;
            }
            for (a, b) in [(i, j), (j, i)] {
                if scratch.links[a][0] == NONE {
                    scratch.links[a][0] = b;
                } else {
                    scratch.links[a][1] = b;
                    scratch.open[a] = false;
                }
            }
            scratch.partner[end_i] = end_j;
            scratch.partner[end_j] = end_i;
            scratch.load[end_i] = joined;
            scratch.load[end_j] = joined;
            if joined + smallest > capacity {
                // Nothing else fits on this route.
                scratch.open[end_i] = false;
                scratch.open[end_j] = false;
            }
            routes -= 1;
            pending += 1;
            if routes == 1 {
                break;
            }
        }
        Ok(routes)
    }

    /// Whether two distinct routes with open end points could still be
    /// joined within capacity.
    fn can_merge(&self, scratch: &RouterScratch, capacity: u64) -> bool {
        // Two lightest routes with an open end; each route counted once via
        // its lower-indexed end.
        let (mut first, mut second) = (u64::MAX, u64::MAX);
        for k in 0..self.n {
            if !scratch.open[k] {
                continue;
            }
            let other = scratch.partner[k];
            if other < k && scratch.open[other] {
                continue;
            }
            let load = scratch.load[k];
            if load < first {
                second = first;
                first = load;
            } else if load < second {
                second = load;
            }
        }
        second != u64::MAX && first + second <= capacity
    }

    /// Walks every route, starting each at its lower-indexed end point, in
    /// ascending order of that end point. `visit` receives the route's
    /// customer indices and its length.
    fn walk(
        &self,
        quantities: &[u32],
        scratch: &mut RouterScratch,
        mut visit: impl FnMut(&[usize], f64),
    ) {
        let mut sequence = std::mem::take(&mut scratch.sequence);
        for (start, &quantity) in quantities.iter().enumerate().take(self.n) {
            if quantity == 0 || scratch.visited[start] {
                continue;
            }
            if scratch.links[start][1] != NONE || scratch.partner[start] < start {
                continue;
            }
            sequence.clear();
            let mut length = self.depot_distance[start];
            let mut previous = NONE;
            let mut current = start;
            loop {
                scratch.visited[current] = true;
                sequence.push(current);
                let [a, b] = scratch.links[current];
                let next = if a != previous { a } else { b };
                if next == NONE {
                    break;
                }
                length += self.d(current, next);
                previous = current;
                current = next;
            }
            length += self.depot_distance[current];
            visit(&sequence, length);
        }
        scratch.sequence = sequence;
    }

    /// Total routing distance for one period's deliveries.
    pub fn total_distance(
        &self,
        quantities: &[u32],
        scratch: &mut RouterScratch,
    ) -> Result<f64, RoutingError> {
        self.merge(quantities, scratch)?;
        let mut total = 0.0;
        self.walk(quantities, scratch, |_, length| total += length);
        Ok(total)
    }

    /// [`Self::total_distance`] over a caller-supplied pair stream (see
    /// [`Self::active_pairs`]). Same result, bit for bit, as long as the
    /// stream covers every pair of served customers in savings order.
    pub fn total_distance_over(
        &self,
        quantities: &[u32],
        pairs: impl IntoIterator<Item = u32>,
        scratch: &mut RouterScratch,
    ) -> Result<f64, RoutingError> {
        self.merge_over(quantities, pairs, scratch)?;
        let mut total = 0.0;
        self.walk(quantities, scratch, |_, length| total += length);
        Ok(total)
    }

    /// Full route set for one period's deliveries.
    pub fn solve(
        &self,
        quantities: &[u32],
        scratch: &mut RouterScratch,
    ) -> Result<RoutingSolution, RoutingError> {
        self.merge(quantities, scratch)?;
        let mut solution = RoutingSolution::default();
        self.walk(quantities, scratch, |sequence, length| {
            solution.total_distance += length;
            solution.routes.push(Route {
                customer_sequence: sequence.iter().map(|&k| k as u32 + 1).collect(),
                load: sequence.iter().map(|&k| u64::from(quantities[k])).sum(),
                length,
            });
        });
        Ok(solution)
    }
}

/// Routes the customers in `demands` (customer id to delivered quantity).
pub fn solve_savings(
    instance: &Instance,
    demands: &BTreeMap<u32, u32>,
) -> Result<RoutingSolution, RoutingError> {
    let router = SavingsRouter::new(instance);
    let mut quantities = vec![0u32; router.n];
    for (&id, &q) in demands {
        let slot = (id as usize)
            .checked_sub(1)
            .and_then(|k| quantities.get_mut(k))
            .ok_or(RoutingError::UnknownCustomer(id))?;
        *slot = q;
    }
    router.solve(&quantities, &mut RouterScratch::default())
}
