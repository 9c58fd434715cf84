//! Small hand-checkable instances used by tests, examples and the CLI.

use crate::instance::{Customer, Instance, Point};

/// Depot at the origin, customer 1 at (0, 3) with demand 2 per period,
/// customer 2 at (4, 0) with demand 3 per period, three periods, capacities
/// 100. The tour depot-1-2-depot has length 3 + 5 + 4 = 12.
pub fn oracle_instance() -> Instance {
    let customer = |id, x, y, d| Customer {
        id,
        location: Point::new(x, y),
        inventory_capacity: 100,
        demand: vec![d; 3],
    };
    Instance::new(
        "oracle",
        3,
        Point::new(0.0, 0.0),
        100,
        vec![customer(1, 0.0, 3.0, 2), customer(2, 4.0, 0.0, 3)],
    )
    .expect("oracle instance is valid")
}
