// Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::BTreeSet;

use irp_core::instance::{Customer, Point};
use irp_core::{Evaluator, GeneratorConfig, Instance, Outcome, PeriodVector};

/// Outcome as an exactly comparable key.
pub fn key(o: &Outcome) -> (u64, u64) {
    (o.inventory, o.routing.to_bits())
}

/// Distinct non-dominated points, by pairwise comparison.
pub fn pareto_set(points: &[Outcome]) -> BTreeSet<(u64, u64)> {
    let dominated = |p: &Outcome| {
        points.iter().any(|q| {
            q.inventory <= p.inventory
                && q.routing <= p.routing
                && (q.inventory < p.inventory || q.routing < p.routing)
        })
    };
    points.iter().filter(|p| !dominated(p)).map(key).collect()
}

/// Every vector in {1..horizon}^n.
pub fn all_vectors(n: usize, horizon: u32) -> Vec<PeriodVector> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<u32>| {
                (1..=horizon).map(move |v| {
                    let mut next = prefix.clone();
                    next.push(v);
                    next
                })
            })
            .collect();
    }
    out.into_iter()
        .map(|v| PeriodVector::new(v, horizon).unwrap())
        .collect()
}

pub fn enumerate_outcomes(instance: &Instance) -> Vec<Outcome> {
    let evaluator = Evaluator::new(instance);
    all_vectors(instance.customers.len(), instance.horizon)
        .iter()
        .map(|pi| evaluator.evaluate(pi).unwrap().outcome)
        .collect()
}

pub fn small_instance(seed: u64, n: usize, horizon: u32, capacity: u32) -> Instance {
    irp_core::generate(&GeneratorConfig {
        n_customers: n,
        horizon,
        mean_demand_range: (1, 12),
        noise_fraction: 0.25,
        coordinate_range: (0.0, 50.0),
        vehicle_capacity: capacity,
        seed,
    })
    .unwrap()
}

pub fn instance_from(depot: (f64, f64), customers: &[(f64, f64, u32)], capacity: u32) -> Instance {
    let customers = customers
        .iter()
        .enumerate()
        .map(|(k, &(x, y, d))| Customer {
            id: k as u32 + 1,
            location: Point::new(x, y),
            inventory_capacity: capacity.max(d),
            demand: vec![d],
        })
        .collect();
    Instance::new("t", 1, Point::new(depot.0, depot.1), capacity, customers).unwrap()
}

fn dist(a: &Point, b: &Point) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Textbook parallel savings on explicit route lists. Returns routes as
/// customer id sequences, oriented to start at the smaller end id and
/// sorted, plus the total length.
pub fn naive_savings(instance: &Instance, quantities: &[u32]) -> (Vec<Vec<u32>>, f64) {
    let c = &instance.customers;
    let depot = instance.depot;
    let served: Vec<usize> = (0..c.len()).filter(|&k| quantities[k] > 0).collect();
    let mut routes: Vec<Vec<usize>> = served.iter().map(|&k| vec![k]).collect();
    let mut pairs = Vec::new();
    for (a, &i) in served.iter().enumerate() {
        for &j in &served[a + 1..] {
            let s = dist(&depot, &c[i].location) + dist(&depot, &c[j].location)
                - dist(&c[i].location, &c[j].location);
            if s > 0.0 {
                pairs.push((s, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let load = |r: &Vec<usize>| r.iter().map(|&k| u64::from(quantities[k])).sum::<u64>();
    for (_, i, j) in pairs {
        let ri = routes.iter().position(|r| r.contains(&i)).unwrap();
        let rj = routes.iter().position(|r| r.contains(&j)).unwrap();
        if ri == rj {
            continue;
        }
        let end = |r: &Vec<usize>, k: usize| r[0] == k || r[r.len() - 1] == k;
        if !end(&routes[ri], i) || !end(&routes[rj], j) {
            continue;
        }
        if load(&routes[ri]) + load(&routes[rj]) > u64::from(instance.vehicle_capacity) {
            continue;
        }
        let mut a = routes[ri].clone();
        let mut b = routes[rj].clone();
        if a[a.len() - 1] != i {
            a.reverse();
        }
        if b[0] != j {
            b.reverse();
        }
        a.extend(b);
        let (hi, lo) = (ri.max(rj), ri.min(rj));
        routes.remove(hi);
        routes[lo] = a;
    }
    let mut total = 0.0;
    let mut out = Vec::new();
    for mut r in routes {
        let mut length = dist(&depot, &c[r[0]].location);
        for w in r.windows(2) {
            length += dist(&c[w[0]].location, &c[w[1]].location);
        }
        length += dist(&c[r[r.len() - 1]].location, &depot);
        total += length;
        if r[0] > r[r.len() - 1] {
            r.reverse();
        }
        out.push(r.into_iter().map(|k| k as u32 + 1).collect());
    }
    out.sort();
    (out, total)
}

/// Shortest closed tour through the depot and all `points`, by trying every
/// permutation.
pub fn optimal_tour(depot: Point, points: &[Point]) -> f64 {
    fn permute(k: usize, order: &mut Vec<usize>, depot: Point, points: &[Point], best: &mut f64) {
        if k == order.len() {
            let mut length = 0.0;
            let mut at = depot;
            for &i in order.iter() {
                length += dist(&at, &points[i]);
                at = points[i];
            }
            length += dist(&at, &depot);
            *best = best.min(length);
            return;
        }
        for i in k..order.len() {
            order.swap(k, i);
            permute(k + 1, order, depot, points, best);
            order.swap(k, i);
        }
    }
    let mut best = f64::INFINITY;
    let mut order: Vec<usize> = (0..points.len()).collect();
    if points.is_empty() {
        return 0.0;
    }
    permute(0, &mut order, depot, points, &mut best);
    best
}
