//! From a delivery-period vector to a delivery plan and its two objectives.
//!
//! Each customer starts with empty stock. In period `t` a customer whose
//! remaining stock cannot cover `d_it` is topped up to exactly the demand of
//! the next `k` periods, where `k` is the largest value not above
//! `min(pi_i, T - t + 1)` whose quantity fits both the vehicle and the
//! customer's inventory capacity. Stock therefore either covers the current
//! demand or is zero. The customers served in a period are routed by the
//! savings heuristic.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::Instance;
use crate::savings::{RouterScratch, RoutingError, RoutingSolution, SavingsRouter};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvaluationError {
    #[error("period vector has {got} entries, instance has {expected} customers")]
    LengthMismatch { expected: usize, got: usize },
    #[error("period of customer {customer} is {value}, must lie in 1..={horizon}")]
    PeriodOutOfRange {
        customer: u32,
        value: u32,
        horizon: u32,
    },
    #[error("customer {customer} cannot be supplied in period {period}")]
    Infeasible { customer: u32, period: u32 },
    #[error(transparent)]
    Routing(#[from] RoutingError),
}

/// Number of periods each delivery covers, one entry per customer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PeriodVector(Vec<u32>);

impl PeriodVector {
    pub fn new(periods: Vec<u32>, horizon: u32) -> Result<Self, EvaluationError> {
        let pi = Self(periods);
        pi.check(pi.0.len(), horizon)?;
        Ok(pi)
    }

    /// `(m, ..., m)` for `n` customers.
    pub fn uniform(n: usize, m: u32) -> Self {
        Self(vec![m; n])
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn check(&self, n: usize, horizon: u32) -> Result<(), EvaluationError> {
        if self.0.len() != n {
            return Err(EvaluationError::LengthMismatch {
                expected: n,
                got: self.0.len(),
            });
        }
        for (k, &value) in self.0.iter().enumerate() {
            if value < 1 || value > horizon {
                return Err(EvaluationError::PeriodOutOfRange {
                    customer: k as u32 + 1,
                    value,
                    horizon,
                });
            }
        }
        Ok(())
    }

    /// Semicolon-joined form used in CSV exports.
    pub fn to_joined(&self) -> String {
        self.0
            .iter()
            .map(u32::to_string)
            .collect::<Vec<_>>()
            .join(";")
    }
}

impl From<PeriodVector> for Vec<u32> {
    fn from(pi: PeriodVector) -> Self {
        pi.0
    }
}

/// The two objectives, both minimized: total end-of-period inventory over
/// all customers and periods, and total distance travelled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    #[serde(rename = "inventory_g1")]
    pub inventory: u64,
    #[serde(rename = "routing_g2")]
    pub routing: f64,
}

impl Outcome {
    pub fn new(inventory: u64, routing: f64) -> Self {
        Self { inventory, routing }
    }

    pub fn objectives(&self) -> [f64; 2] {
        [self.inventory as f64, self.routing]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveryPlan {
    /// `quantities[i][t]`: delivered to customer `i + 1` in period `t + 1`.
    pub quantities: Vec<Vec<u32>>,
    /// `end_inventory[i][t]`: stock of customer `i + 1` after period `t + 1`.
    pub end_inventory: Vec<Vec<u64>>,
    pub per_period_routes: Vec<RoutingSolution>,
}

impl DeliveryPlan {
    /// Re-checks the plan against the instance: inventory balance from empty
    /// stock, non-negativity, the delivery trigger, both capacities, and that
    /// every period's routes serve exactly the customers with a delivery.
    pub fn verify(&self, instance: &Instance) -> Result<(), String> {
        let horizon = instance.horizon as usize;
        if self.quantities.len() != instance.customers.len()
            || self.end_inventory.len() != instance.customers.len()
            || self.per_period_routes.len() != horizon
        {
            return Err("plan dimensions do not match the instance".into());
        }
        for (i, customer) in instance.customers.iter().enumerate() {
            let (q, inv) = (&self.quantities[i], &self.end_inventory[i]);
            if q.len() != horizon || inv.len() != horizon {
                return Err(format!("customer {}: row length mismatch", customer.id));
            }
            let mut previous = 0i64;
            for t in 0..horizon {
                let d = i64::from(customer.demand[t]);
                let delivered = i64::from(q[t]);
                let end = previous + delivered - d;
                if end < 0 || end != inv[t] as i64 {
                    return Err(format!(
                        "customer {} period {}: balance broken ({previous} + {delivered} - {d} != {})",
                        customer.id,
                        t + 1,
                        inv[t]
                    ));
                }
                if delivered > 0 {
                    if previous >= d {
                        return Err(format!(
                            "customer {} period {}: delivery without need",
                            customer.id,
                            t + 1
                        ));
                    }
                    if q[t] > instance.vehicle_capacity
                        || previous + delivered > i64::from(customer.inventory_capacity)
                    {
                        return Err(format!(
                            "customer {} period {}: capacity exceeded",
                            customer.id,
                            t + 1
                        ));
                    }
                } else if previous < d {
                    return Err(format!(
                        "customer {} period {}: stock-out",
                        customer.id,
                        t + 1
                    ));
                }
                previous = end;
            }
        }
        for (t, routing) in self.per_period_routes.iter().enumerate() {
            let mut served = vec![0u32; instance.customers.len()];
            for route in &routing.routes {
                if route.load > u64::from(instance.vehicle_capacity) {
                    return Err(format!("period {}: route over capacity", t + 1));
                }
                for &id in &route.customer_sequence {
                    served[id as usize - 1] += 1;
                }
            }
            for (i, &count) in served.iter().enumerate() {
                let expected = u32::from(self.quantities[i][t] > 0);
                if count != expected {
                    return Err(format!(
                        "period {}: customer {} routed {count} times",
                        t + 1,
                        i + 1
                    ));
                }
            }
        }
        Ok(())
    }
}

/// An evaluated period vector. The plan is optional so that archives can
/// hold many solutions cheaply; it is a pure function of `pi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub pi: PeriodVector,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<DeliveryPlan>,
}

/// Evaluation context for one instance. Holds the precomputed savings list;
/// cheap to share between threads.
#[derive(Debug, Clone)]
pub struct Evaluator {
    horizon: u32,
    capacity: u64,
    inventory_capacity: Vec<u64>,
    demand: Vec<Vec<u32>>,
    router: SavingsRouter,
}

impl Evaluator {
    pub fn new(instance: &Instance) -> Self {
        Self {
            horizon: instance.horizon,
            capacity: u64::from(instance.vehicle_capacity),
            inventory_capacity: instance
                .customers
                .iter()
                .map(|c| u64::from(c.inventory_capacity))
                .collect(),
            demand: instance.customers.iter().map(|c| c.demand.clone()).collect(),
            router: SavingsRouter::new(instance),
        }
    }

    pub fn n_customers(&self) -> usize {
        self.demand.len()
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    /// Outcome only; the plan is not materialized.
    pub fn evaluate(&self, pi: &PeriodVector) -> Result<Solution, EvaluationError> {
        let outcome = self.simulate(pi, None)?;
        Ok(Solution {
            pi: pi.clone(),
            outcome,
            plan: None,
        })
    }

    /// Outcome together with the full delivery plan.
    pub fn evaluate_with_plan(&self, pi: &PeriodVector) -> Result<Solution, EvaluationError> {
        let n = self.n_customers();
        let horizon = self.horizon as usize;
        let mut plan = DeliveryPlan {
            quantities: vec![vec![0; horizon]; n],
            end_inventory: vec![vec![0; horizon]; n],
            per_period_routes: Vec::with_capacity(horizon),
        };
        let outcome = self.simulate(pi, Some(&mut plan))?;
        Ok(Solution {
            pi: pi.clone(),
            outcome,
            plan: Some(plan),
        })
    }

    /// Deliveries to customer index `i` under delivery period `p`, one per
    /// period, written to `quantities`; end inventories go to
    /// `end_inventory` when given. Returns the summed end inventory, or the
    /// first period index with no feasible top-up.
    fn schedule(
        &self,
        i: usize,
        p: u32,
        quantities: &mut [u32],
        mut end_inventory: Option<&mut [u64]>,
    ) -> Result<u64, usize> {
        let demand = &self.demand[i];
        let horizon = demand.len();
        let mut stock = 0u64;
        let mut total = 0u64;
        for t in 0..horizon {
            let need = u64::from(demand[t]);
            let mut delivered = 0u64;
            if stock < need {
                let reach = (p as usize).min(horizon - t);
                let mut covered = 0u64;
                let mut target = None;
                for &d in &demand[t..t + reach] {
                    covered += u64::from(d);
                    if covered - stock > self.capacity || covered > self.inventory_capacity[i] {
                        break;
                    }
                    target = Some(covered);
                }
                delivered = target.ok_or(t)? - stock;
            }
            stock = stock + delivered - need;
            total += stock;
            // delivered <= vehicle capacity, which is a u32
            quantities[t] = delivered as u32;
            if let Some(out) = end_inventory.as_deref_mut() {
                out[t] = stock;
            }
        }
        Ok(total)
    }

    /// Customer-major delivery matrix for `pi` and its total inventory.
    fn schedules(
        &self,
        pi: &PeriodVector,
        mut plan: Option<&mut DeliveryPlan>,
    ) -> Result<(Vec<u32>, Vec<u64>), EvaluationError> {
        let n = self.n_customers();
        pi.check(n, self.horizon)?;
        let horizon = self.horizon as usize;
        let mut rows = vec![0u32; n * horizon];
        let mut inventory = vec![0u64; n];
        // (period, customer) of the earliest infeasible top-up
        let mut infeasible: Option<(usize, usize)> = None;
        for i in 0..n {
            let row = &mut rows[i * horizon..(i + 1) * horizon];
            let end = plan.as_deref_mut().map(|p| p.end_inventory[i].as_mut_slice());
            match self.schedule(i, pi.0[i], row, end) {
                Ok(total) => inventory[i] = total,
                Err(t) => {
                    if infeasible.is_none_or(|(first, _)| t < first) {
                        infeasible = Some((t, i));
                    }
                }
            }
        }
        if let Some((t, i)) = infeasible {
            return Err(EvaluationError::Infeasible {
                customer: i as u32 + 1,
                period: t as u32 + 1,
            });
        }
        if let Some(plan) = plan {
            for (i, row) in rows.chunks(horizon).enumerate() {
                plan.quantities[i].copy_from_slice(row);
            }
        }
        Ok((rows, inventory))
    }

    fn simulate(
        &self,
        pi: &PeriodVector,
        mut plan: Option<&mut DeliveryPlan>,
    ) -> Result<Outcome, EvaluationError> {
        let n = self.n_customers();
        let horizon = self.horizon as usize;
        let (rows, inventory) = self.schedules(pi, plan.as_deref_mut())?;
        let mut quantities = vec![0u32; n];
        let mut scratch = RouterScratch::default();
        let mut routing_total = 0.0f64;
        for t in 0..horizon {
            for (i, q) in quantities.iter_mut().enumerate() {
                *q = rows[i * horizon + t];
            }
            match plan.as_deref_mut() {
                Some(plan) => {
                    let routing = self.router.solve(&quantities, &mut scratch)?;
                    routing_total += routing.total_distance;
                    plan.per_period_routes.push(routing);
                }
                None => routing_total += self.router.total_distance(&quantities, &mut scratch)?,
            }
        }
        Ok(Outcome::new(inventory.iter().sum(), routing_total))
    }

    /// Prepares cheap evaluation of the neighbors of `pi`.
    pub fn expansion(&self, pi: &PeriodVector) -> Result<Expansion<'_>, EvaluationError> {
        let n = self.n_customers();
        let horizon = self.horizon as usize;
        let (rows, inventory) = self.schedules(pi, None)?;
        let mut column = vec![0u32; n];
        let mut scratch = RouterScratch::default();
        let mut period_distance = Vec::with_capacity(horizon);
        let mut active = Vec::with_capacity(horizon);
        for t in 0..horizon {
            for (i, q) in column.iter_mut().enumerate() {
                *q = rows[i * horizon + t];
            }
            period_distance.push(self.router.total_distance(&column, &mut scratch)?);
            let mut pairs = Vec::new();
            self.router.active_pairs(&column, &mut pairs);
            // Dense periods are cheaper to scan in full.
            active.push((pairs.len() * 4 < self.router.n_pairs()).then_some(pairs));
        }
        Ok(Expansion {
            evaluator: self,
            pi: pi.clone(),
            inventory_total: inventory.iter().sum(),
            rows,
            inventory,
            period_distance,
            active,
            column,
            row: vec![0; horizon],
            merged: Vec::new(),
            scratch,
        })
    }
}

/// A period vector with its per-period deliveries and route lengths cached,
/// so that vectors differing from it in one customer can be evaluated by
/// rerouting only the periods where that customer's delivery changes.
/// Results are identical, bit for bit, to [`Evaluator::evaluate`].
pub struct Expansion<'a> {
    evaluator: &'a Evaluator,
    pi: PeriodVector,
    rows: Vec<u32>,
    inventory: Vec<u64>,
    inventory_total: u64,
    period_distance: Vec<f64>,
    /// Per period, the pairs of served customers when few enough to be
    /// worth listing.
    active: Vec<Option<Vec<u32>>>,
    column: Vec<u32>,
    row: Vec<u32>,
    merged: Vec<u32>,
    scratch: RouterScratch,
}

impl Expansion<'_> {
    pub fn pi(&self) -> &PeriodVector {
        &self.pi
    }

    pub fn outcome(&self) -> Outcome {
        let routing = self.period_distance.iter().fold(0.0, |acc, d| acc + d);
        Outcome::new(self.inventory_total, routing)
    }

    /// Evaluates the base vector with customer index `k` set to `value`.
    pub fn evaluate_change(&mut self, k: usize, value: u32) -> Result<Solution, EvaluationError> {
        let ev = self.evaluator;
        let n = ev.n_customers();
        let horizon = ev.horizon as usize;
        let mut next = self.pi.0.clone();
        next[k] = value;
        let pi = PeriodVector(next);
        pi.check(n, ev.horizon)?;
        let inventory_k = ev
            .schedule(k, value, &mut self.row, None)
            .map_err(|t| EvaluationError::Infeasible {
                customer: k as u32 + 1,
                period: t as u32 + 1,
            })?;
        let mut routing_total = 0.0f64;
        for t in 0..horizon {
            let (old, new) = (self.rows[k * horizon + t], self.row[t]);
            if old == new {
                routing_total += self.period_distance[t];
                continue;
            }
            for (i, q) in self.column.iter_mut().enumerate() {
                *q = self.rows[i * horizon + t];
            }
            self.column[k] = new;
            let router = &ev.router;
            let distance = match &self.active[t] {
                None => router.total_distance(&self.column, &mut self.scratch)?,
                Some(active) if old == 0 => {
                    merge_sorted(active, router.pairs_of(k), &mut self.merged);
                    let pairs = self.merged.iter().copied();
                    router.total_distance_over(&self.column, pairs, &mut self.scratch)?
                }
                Some(active) => {
                    let pairs = active.iter().copied();
                    router.total_distance_over(&self.column, pairs, &mut self.scratch)?
                }
            };
            routing_total += distance;
        }
        let inventory = self.inventory_total - self.inventory[k] + inventory_k;
        Ok(Solution {
            pi,
            outcome: Outcome::new(inventory, routing_total),
            plan: None,
        })
    }
}

fn merge_sorted(a: &[u32], b: &[u32], out: &mut Vec<u32>) {
    out.clear();
    let (mut x, mut y) = (0, 0);
    while x < a.len() && y < b.len() {
        if a[x] <= b[y] {
            if a[x] == b[y] {
                y += 1;
            }
            out.push(a[x]);
            x += 1;
        } else {
            out.push(b[y]);
            y += 1;
        }
    }
    out.extend_from_slice(&a[x..]);
    out.extend_from_slice(&b[y..]);
}

/// Evaluates `pi` on `instance`, including the full plan.
pub fn evaluate(instance: &Instance, pi: &PeriodVector) -> Result<Solution, EvaluationError> {
    Evaluator::new(instance).evaluate_with_plan(pi)
}

/// The `(customer index, new value)` changes producing [`neighbors`], in the
/// same order.
pub fn neighbor_moves(pi: &PeriodVector, horizon: u32) -> Vec<(usize, u32)> {
    let mut out = Vec::with_capacity(2 * pi.len());
    for (k, &value) in pi.0.iter().enumerate() {
        if value > 1 {
            out.push((k, value - 1));
        }
        if value < horizon {
            out.push((k, value + 1));
        }
    }
    out
}

/// All vectors one `±1` step away from `pi`, staying within `1..=horizon`.
/// Ordered by customer, the decrement before the increment.
pub fn neighbors(pi: &PeriodVector, horizon: u32) -> Vec<PeriodVector> {
    neighbor_moves(pi, horizon)
        .into_iter()
        .map(|(k, value)| {
            let mut next = pi.0.clone();
            next[k] = value;
            PeriodVector(next)
        })
        .collect()
}
