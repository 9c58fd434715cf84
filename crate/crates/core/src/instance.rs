//! Instance data model, a seeded generator, and the canonical instance file
//! format.
//!
//! The file format is TOML with every key sorted and one customer per line:
//!
//! ```text
//! customers = [
//!   { demand = [2, 2, 2], id = 1, inventory_capacity = 100, x = 0.000000, y = 3.000000 },
//! ]
//! depot = { x = 0.000000, y = 0.000000 }
//! horizon = 3
//! name = "oracle"
//! vehicle_capacity = 100
//! ```
//!
//! Coordinates are written with six fixed decimals. The generator quantizes
//! coordinates to the same grid so that generated instances survive a
//! serialize/parse round trip bit-for-bit.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::Spanned;

const COORDINATE_SCALE: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstanceError {
    #[error("invalid instance: {field}: {message}")]
    Invalid { field: String, message: String },
    #[error("parse error at line {line}: {field}: {message}")]
    Parse {
        field: String,
        line: usize,
        message: String,
    },
    #[error("inconsistent generator config: {0}")]
    Generator(String),
}

impl InstanceError {
    fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Euclidean distance, unrounded.
    #[inline]
    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Customer {
    pub id: u32,
    pub location: Point,
    pub inventory_capacity: u32,
    /// Demand per period, `demand[t - 1]` for period `t`.
    pub demand: Vec<u32>,
}

impl Customer {
    pub fn max_demand(&self) -> u32 {
        self.demand.iter().copied().max().unwrap_or(0)
    }
}

/// A single-item inventory routing instance: one depot, `n` customers with
/// deterministic per-period demand, a homogeneous uncapped fleet of vehicles
/// with capacity `vehicle_capacity`. Initial customer inventory is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub name: String,
    pub horizon: u32,
    pub depot: Point,
    pub vehicle_capacity: u32,
    pub customers: Vec<Customer>,
}

impl Instance {
    /// Builds and validates an instance.
    pub fn new(
        name: impl Into<String>,
        horizon: u32,
        depot: Point,
        vehicle_capacity: u32,
        customers: Vec<Customer>,
    ) -> Result<Self, InstanceError> {
        let instance = Self {
            name: name.into(),
            horizon,
            depot,
            vehicle_capacity,
            customers,
        };
        instance.validate()?;
        Ok(instance)
    }

    pub fn n_customers(&self) -> usize {
        self.customers.len()
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        if self.horizon == 0 {
            return Err(InstanceError::invalid("horizon", "must be at least 1"));
        }
        if self.vehicle_capacity == 0 {
            return Err(InstanceError::invalid("vehicle_capacity", "must be positive"));
        }
        if self.customers.is_empty() {
            return Err(InstanceError::invalid("customers", "at least one customer required"));
        }
        if !(self.depot.x.is_finite() && self.depot.y.is_finite()) {
            return Err(InstanceError::invalid("depot", "coordinates must be finite"));
        }
        for (index, customer) in self.customers.iter().enumerate() {
            let field = |name: &str| format!("customers[{index}].{name}");
            if customer.id as usize != index + 1 {
                return Err(InstanceError::invalid(
                    field("id"),
                    format!("expected id {} (ids are 1..n in order)", index + 1),
                ));
            }
            if !(customer.location.x.is_finite() && customer.location.y.is_finite()) {
                return Err(InstanceError::invalid(field("x"), "coordinates must be finite"));
            }
            if customer.demand.len() != self.horizon as usize {
                return Err(InstanceError::invalid(
                    field("demand"),
                    format!(
                        "demand length mismatch: {} entries, horizon is {}",
                        customer.demand.len(),
                        self.horizon
                    ),
                ));
            }
            let max_demand = customer.max_demand();
            if max_demand > self.vehicle_capacity {
                return Err(InstanceError::invalid(
                    field("demand"),
                    format!(
                        "demand {max_demand} exceeds vehicle capacity {}",
                        self.vehicle_capacity
                    ),
                ));
            }
            if customer.inventory_capacity == 0 || customer.inventory_capacity < max_demand {
                return Err(InstanceError::invalid(
                    field("inventory_capacity"),
                    format!(
                        "inventory capacity {} below maximum period demand {max_demand}",
                        customer.inventory_capacity
                    ),
                ));
            }
        }
        Ok(())
    }
}

/// Parameters of the synthetic instance generator. Demand is stationary in
/// expectation: each customer draws a mean once, then every period varies
/// uniformly within `±noise_fraction` of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n_customers: usize,
    pub horizon: u32,
    pub mean_demand_range: (u32, u32),
    pub noise_fraction: f64,
    pub coordinate_range: (f64, f64),
    pub vehicle_capacity: u32,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_customers: 50,
            horizon: 30,
            mean_demand_range: (5, 25),
            noise_fraction: 0.25,
            coordinate_range: (0.0, 100.0),
            vehicle_capacity: 150,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), InstanceError> {
        let bad = |m: &str| Err(InstanceError::Generator(m.to_string()));
        if self.n_customers == 0 {
            return bad("n_customers must be at least 1");
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1");
        }
        if self.vehicle_capacity == 0 {
            return bad("vehicle_capacity must be positive");
        }
        if !(0.0..1.0).contains(&self.noise_fraction) {
            return bad("noise_fraction must lie in [0, 1)");
        }
        if self.mean_demand_range.0 > self.mean_demand_range.1 {
            return bad("mean_demand_range lo > hi");
        }
        let (lo, hi) = self.coordinate_range;
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return bad("coordinate_range must be finite with lo <= hi");
        }
        Ok(())
    }
}

fn quantize(value: f64) -> f64 {
    (value * COORDINATE_SCALE).round() / COORDINATE_SCALE
}

/// Generates an instance from `config`. Same config and seed give a
/// bit-identical instance.
///
/// The depot sits at the centre of the coordinate square and every customer's
/// inventory capacity equals the vehicle capacity.
pub fn generate(config: &GeneratorConfig) -> Result<Instance, InstanceError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (lo, hi) = config.coordinate_range;
    let (mean_lo, mean_hi) = config.mean_demand_range;
    let noise = config.noise_fraction;

    let mut customers = Vec::with_capacity(config.n_customers);
    for index in 0..config.n_customers {
        let x = quantize(rng.random_range(lo..=hi));
        let y = quantize(rng.random_range(lo..=hi));
        let mean = f64::from(rng.random_range(mean_lo..=mean_hi));
        let (d_lo, d_hi) = (mean * (1.0 - noise), mean * (1.0 + noise));
        let demand: Vec<u32> = (0..config.horizon)
            .map(|_| {
                let value = if d_lo < d_hi {
                    rng.random_range(d_lo..=d_hi)
                } else {
                    d_lo
                };
                value.round().max(0.0) as u32
            })
            .collect();
        let id = index as u32 + 1;
        if let Some(&d) = demand.iter().find(|&&d| d > config.vehicle_capacity) {
            return Err(InstanceError::Generator(format!(
                "customer {id} drew demand {d} above vehicle capacity {}",
                config.vehicle_capacity
            )));
        }
        customers.push(Customer {
            id,
            location: Point::new(x, y),
            inventory_capacity: config.vehicle_capacity,
            demand,
        });
    }

    let centre = quantize((lo + hi) / 2.0);
    Instance::new(
        format!("gen-n{}-t{}-s{}", config.n_customers, config.horizon, config.seed),
        config.horizon,
        Point::new(centre, centre),
        config.vehicle_capacity,
        customers,
    )
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPoint {
    x: f64,
    y: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCustomer {
    id: Spanned<i64>,
    x: f64,
    y: f64,
    inventory_capacity: Spanned<i64>,
    demand: Spanned<Vec<Spanned<i64>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    name: String,
    horizon: Spanned<i64>,
    vehicle_capacity: Spanned<i64>,
    depot: Spanned<RawPoint>,
    customers: Spanned<Vec<Spanned<RawCustomer>>>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text.as_bytes()[..offset.min(text.len())]
        .iter()
        .filter(|&&b| b == b'\n')
        .count()
        + 1
}

/// Parses an instance document. Errors carry the offending field path and
/// the 1-based line it appears on.
pub fn parse_instance(text: &str) -> Result<Instance, InstanceError> {
    let raw: RawInstance = toml::from_str(text).map_err(|e| InstanceError::Parse {
        field: "document".into(),
        line: e.span().map_or(1, |s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;

    let err = |field: String, span: std::ops::Range<usize>, message: String| InstanceError::Parse {
        field,
        line: line_of(text, span.start),
        message,
    };
    let positive = |value: &Spanned<i64>, field: &str| -> Result<u32, InstanceError> {
        u32::try_from(*value.get_ref())
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| {
                err(
                    field.to_string(),
                    value.span(),
                    format!("expected a positive integer, got {}", value.get_ref()),
                )
            })
    };

    let horizon = positive(&raw.horizon, "horizon")?;
    let vehicle_capacity = positive(&raw.vehicle_capacity, "vehicle_capacity")?;
    let depot_span = raw.depot.span();
    let depot = raw.depot.into_inner();
    if !(depot.x.is_finite() && depot.y.is_finite()) {
        return Err(err("depot".into(), depot_span, "coordinates must be finite".into()));
    }
    let customers_span = raw.customers.span();
    let raw_customers = raw.customers.into_inner();
    if raw_customers.is_empty() {
        return Err(err(
            "customers".into(),
            customers_span,
            "at least one customer required".into(),
        ));
    }

    let mut customers = Vec::with_capacity(raw_customers.len());
    for (index, spanned) in raw_customers.into_iter().enumerate() {
        let span = spanned.span();
        let c = spanned.into_inner();
        let field = |name: &str| format!("customers[{index}].{name}");
        let id = u32::try_from(*c.id.get_ref()).ok().filter(|&v| v as usize == index + 1);
        let id = id.ok_or_else(|| {
            err(
                field("id"),
                c.id.span(),
                format!("expected id {} (ids are 1..n in order)", index + 1),
            )
        })?;
        if !(c.x.is_finite() && c.y.is_finite()) {
            return Err(err(field("x"), span, "coordinates must be finite".into()));
        }
        let inventory_capacity = positive(&c.inventory_capacity, &field("inventory_capacity"))?;
        let demand_span = c.demand.span();
        let raw_demand = c.demand.into_inner();
        if raw_demand.len() != horizon as usize {
            return Err(err(
                field("demand"),
                demand_span,
                format!(
                    "demand length mismatch: {} entries, horizon is {horizon}",
                    raw_demand.len()
                ),
            ));
        }
        let mut demand = Vec::with_capacity(raw_demand.len());
        for (t, value) in raw_demand.iter().enumerate() {
            let d = *value.get_ref();
            let field = format!("customers[{index}].demand[{t}]");
            if d < 0 {
                return Err(err(field, value.span(), format!("negative demand {d}")));
            }
            let d = u32::try_from(d)
                .map_err(|_| err(field.clone(), value.span(), format!("demand {d} out of range")))?;
            if d > vehicle_capacity {
                return Err(err(
                    field,
                    value.span(),
                    format!("demand {d} exceeds vehicle capacity {vehicle_capacity}"),
                ));
            }
            if d > inventory_capacity {
                return Err(err(
                    field,
                    value.span(),
                    format!("demand {d} exceeds inventory capacity {inventory_capacity}"),
                ));
            }
            demand.push(d);
        }
        customers.push(Customer {
            id,
            location: Point::new(c.x, c.y),
            inventory_capacity,
            demand,
        });
    }

    let instance = Instance {
        name: raw.name,
        horizon,
        depot: Point::new(depot.x, depot.y),
        vehicle_capacity,
        customers,
    };
    instance.validate()?;
    Ok(instance)
}

fn toml_string(value: &str) -> String {
    toml::Value::String(value.to_string()).to_string()
}

/// Canonical, byte-stable text form of an instance.
pub fn serialize_instance(instance: &Instance) -> String {
    let mut out = String::new();
    out.push_str("customers = [\n");
    for c in &instance.customers {
        let demand = c
            .demand
            .iter()
            .map(u32::to_string)
            .collect::<Vec<_>>()
            .join(", ");
        let _ = writeln!(
            out,
            "  {{ demand = [{demand}], id = {}, inventory_capacity = {}, x = {:.6}, y = {:.6} }},",
            c.id, c.inventory_capacity, c.location.x, c.location.y
        );
    }
    out.push_str("]\n");
    let _ = writeln!(
        out,
        "depot = {{ x = {:.6}, y = {:.6} }}",
        instance.depot.x, instance.depot.y
    );
    let _ = writeln!(out, "horizon = {}", instance.horizon);
    let _ = writeln!(out, "name = {}", toml_string(&instance.name));
    let _ = writeln!(out, "vehicle_capacity = {}", instance.vehicle_capacity);
    out
}
