//! Deterministic synthetic feeder construction.
//!
//! Stands in for a real utility network model: a medium-voltage trunk
//! with service transformers hanging off it, each carrying a small
//! low-voltage circuit. Impedances vary deterministically with element
//! index so the same spec always produces the identical model.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::model::{
    BaseValues, Customer, CircuitId, FeederModel, ModelBuilder, ModelError, NodeRole,
    SecondaryCircuit,
};

/// Blueprint for [`build_feeder`].
#[derive(Debug, Clone, PartialEq)]
pub struct SynthFeederSpec {
    /// Primary junctions on the trunk below the substation.
    pub trunk_junctions: usize,
    /// Transformers attached to each trunk junction (cycled if shorter
    /// than the trunk).
    pub transformers_per_junction: Vec<usize>,
    /// Customers per secondary circuit, one entry per transformer.
    pub customers_per_circuit: Vec<usize>,
    /// Fraction of customers flagged with a smart meter.
    pub meter_fraction: f64,
    /// Fraction of customers flagged as photovoltaic owners.
    pub pv_fraction: f64,
    pub base: BaseValues,
}

impl SynthFeederSpec {
    /// The bundled benchmark feeder: 60 primary nodes (substation, 15
    /// trunk junctions, 44 transformers), 44 secondary circuits, 238
    /// customers, 10% of them metered, half with photovoltaics.
    pub fn feeder60() -> Self {
        // 14 junctions carry 3 transformers, the last one carries 2
        let mut per_junction = vec![3usize; 15];
        per_junction[14] = 2;
        // first 18 circuits have 6 customers, the rest 5 (18*6 + 26*5 = 238)
        let mut customers = vec![6usize; 18];
        customers.extend(vec![5usize; 26]);
        Self {
            trunk_junctions: 15,
            transformers_per_junction: per_junction,
            customers_per_circuit: customers,
            meter_fraction: 0.1,
            pv_fraction: 0.5,
            base: BaseValues::default(),
        }
    }

    /// Small fixture used by fast tests: `n` circuits of 3 customers.
    pub fn small(n: usize) -> Self {
        Self {
            trunk_junctions: n.max(1),
            transformers_per_junction: vec![1; n.max(1)],
            customers_per_circuit: vec![3; n],
            meter_fraction: 1.0,
            pv_fraction: 0.5,
            base: BaseValues::default(),
        }
    }

    pub fn n_transformers(&self) -> usize {
        self.customers_per_circuit.len()
    }

    pub fn n_customers(&self) -> usize {
        self.customers_per_circuit.iter().sum()
    }
}

/// Picks `k` of `n` slots spread evenly, deterministic.
fn spread_flags(n: usize, fraction: f64) -> Vec<bool> {
    let k = (fraction * n as f64).round() as usize;
    let mut flags = vec![false; n];
    if k == 0 {
        return flags;
    }
    for j in 0..k.min(n) {
        let idx = (j * n) / k.min(n).max(1);
        flags[idx.min(n - 1)] = true;
    }
    // exact count: fill forward from unflagged slots if collisions occurred
    let mut have = flags.iter().filter(|&&f| f).count();
    let mut i = 0;
    while have < k.min(n) && i < n {
        if !flags[i] {
            flags[i] = true;
            have += 1;
        }
        i += 1;
    }
    flags
}

/// Builds the model: substation -> trunk chain -> transformer laterals
/// -> secondary circuits. Odd circuits chain their customers (deeper
/// voltage profile), even circuits star them off a head junction.
pub fn build_feeder(spec: &SynthFeederSpec) -> Result<FeederModel, ModelError> {
    let mut b = ModelBuilder::new();
    b.base = Some(spec.base);
    let root = b.node(NodeRole::Substation);

    // medium-voltage trunk
    let mut trunk = vec![root];
    let mut prev = root;
    for i in 0..spec.trunk_junctions {
        let j = b.node(NodeRole::PrimaryJunction);
        let r = 0.0015 + 0.0005 * ((i % 3) as f64);
        b.branch(prev, j, r, 2.0 * r);
        trunk.push(j);
        prev = j;
    }

    // transformers cycled over the trunk junctions
    let mut transformer_nodes = Vec::with_capacity(spec.n_transformers());
    let mut junction_iter = 0usize;
    'outer: for (ji, &count) in spec.transformers_per_junction.iter().cycle().enumerate() {
        let at = trunk[1 + (ji % spec.trunk_junctions)];
        for _ in 0..count {
            if transformer_nodes.len() == spec.n_transformers() {
                break 'outer;
            }
            let t = b.node(NodeRole::SecondaryTransformer);
            b.branch(at, t, 0.001, 0.002);
            transformer_nodes.push(t);
        }
        junction_iter += 1;
        if junction_iter > 4 * spec.trunk_junctions + spec.n_transformers() {
            break;
        }
    }

    // customer flags spread over the whole population
    let n_cust = spec.n_customers();
    let meters = spread_flags(n_cust, spec.meter_fraction);
    let pv = spread_flags(n_cust, spec.pv_fraction);

    let mut cust_at = 0usize;
    for (ci, (&tnode, &n_circuit)) in
        transformer_nodes.iter().zip(&spec.customers_per_circuit).enumerate()
    {
        let mut nodes = Vec::new();
        let mut branches = Vec::new();
        let mut customers = Vec::new();
        let head_r = 0.25 + 0.05 * ((ci % 4) as f64);
        let head = b.node(NodeRole::SecondaryJunction);
        branches.push(b.branch(tnode, head, head_r, 0.4 * head_r));
        nodes.push(head);
        let chain = ci % 2 == 1;
        let mut hang_from = head;
        for k in 0..n_circuit {
            let c = b.node(NodeRole::Customer);
            let r = 0.10 + 0.03 * (((ci + k) % 5) as f64);
            branches.push(b.branch(hang_from, c, r, 0.3 * r));
            nodes.push(c);
            customers.push(Customer {
                node: c,
                has_smart_meter: meters[cust_at],
                has_pv: pv[cust_at],
            });
            cust_at += 1;
            if chain {
                hang_from = c;
            }
        }
        let id = CircuitId(ci as u32);
        b.transformers.push((tnode, id));
        b.secondaries.push(SecondaryCircuit {
            id,
            transformer_node: tnode,
            nodes,
            branches,
            customers,
        });
    }

    b.build()
}

/// The bundled 60-node benchmark model.
pub fn feeder60() -> FeederModel {
    build_feeder(&SynthFeederSpec::feeder60()).expect("spec is valid by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feeder60_has_documented_dimensions() {
        let m = feeder60();
        assert_eq!(m.n_primary_nodes(), 60);
        assert_eq!(m.secondaries().len(), 44);
        assert_eq!(m.n_customers(), 238);
        // 10% of 238 rounds to 24 metered customers
        let metered =
            m.customers().filter(|(_, c)| c.has_smart_meter).count();
        assert_eq!(metered, 24);
        assert_eq!(m.branches().len(), m.n_nodes() - 1);
    }

    #[test]
    fn small_fixture_is_valid_and_fully_metered() {
        let m = build_feeder(&SynthFeederSpec::small(4)).unwrap();
        assert_eq!(m.secondaries().len(), 4);
        assert!(m.customers().all(|(_, c)| c.has_smart_meter));
    }

    #[test]
    fn build_is_deterministic() {
        assert_eq!(feeder60(), feeder60());
    }
}
