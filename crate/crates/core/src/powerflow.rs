//! Radial power flow: the exact forward voltage sweep used inside both
//! estimation layers, and the iterative backward/forward (ladder) solver
//! that serves as the ground-truth oracle for synthetic scenarios.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
use thiserror::Error;

use crate::model::{ModelError, NodeId, RadialTree};

#[derive(Debug, Error, PartialEq)]
pub enum PowerFlowError {
    #[error("state vector has length {got}, tree needs {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("injection vector has length {got}, model has {expected} nodes")]
    InjectionLength { expected: usize, got: usize },
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("no convergence after {iterations} iterations (last voltage change {last_delta:.3e})")]
    NotConverged { iterations: usize, last_delta: f64 },
    #[error("voltage magnitude collapsed to zero at node {0}")]
    VoltageCollapse(u32),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Complex power drawn at a node, per unit. Positive `p` is consumption;
/// photovoltaic generation enters as negative consumption.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PowerInjection {
    pub p: f64,
    pub q: f64,
}

impl PowerInjection {
    pub fn new(p: f64, q: f64) -> Self {
        Self { p, q }
    }

    pub fn as_complex(self) -> Complex64 {
        Complex64::new(self.p, self.q)
    }
}

/// Real/imaginary branch currents for one network layer, laid out as
/// `[re(b0), im(b0), re(b1), im(b1), ...]` in the owning tree's branch
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub values: Vec<f64>,
}

impl StateVector {
    pub fn zeros(tree: &RadialTree) -> Self {
        Self { values: vec![0.0; tree.state_len()] }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Current in the tree-local branch `i`.
    #[inline]
    pub fn current(&self, i: usize) -> Complex64 {
        Complex64::new(self.values[2 * i], self.values[2 * i + 1])
    }

    #[inline]
    pub fn set_current(&mut self, i: usize, c: Complex64) {
        self.values[2 * i] = c.re;
        self.values[2 * i + 1] = c.im;
    }

    pub fn check_dim(&self, tree: &RadialTree) -> Result<(), PowerFlowError> {
        if self.values.len() != tree.state_len() {
            return Err(PowerFlowError::DimensionMismatch {
                expected: tree.state_len(),
                got: self.values.len(),
            });
        }
        Ok(())
    }
}

/// Node voltages aligned with a tree's node order.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeVoltages {
    values: Vec<Complex64>,
}

impl NodeVoltages {
    pub fn from_values(values: Vec<Complex64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn at(&self, tree: &RadialTree, n: NodeId) -> Result<Complex64, ModelError> {
        Ok(self.values[tree.node_index(n)?])
    }
}

/// Extracts the currents of `target`'s branches (matched by global id)
/// from a state over `source`.
pub fn restrict_state(
    source: &RadialTree,
    state: &StateVector,
    target: &RadialTree,
) -> Result<StateVector, PowerFlowError> {
    state.check_dim(source)?;
    let mut out = StateVector::zeros(target);
    for (i, b) in target.branches().iter().enumerate() {
        let si = source.branch_index(b.id).map_err(PowerFlowError::Model)?;
        out.set_current(i, state.current(si));
    }
    Ok(out)
}

/// Re-indexes node voltages from `source` tree order into `target`
/// tree order (matched by global node id).
pub fn restrict_voltages(
    source: &RadialTree,
    voltages: &NodeVoltages,
    target: &RadialTree,
) -> Result<NodeVoltages, PowerFlowError> {
    let mut values = Vec::with_capacity(target.nodes().len());
    for &n in target.nodes() {
        values.push(voltages.at(source, n).map_err(PowerFlowError::Model)?);
    }
    Ok(NodeVoltages { values })
}

/// Per-node complex loads indexed by global node id.
#[derive(Debug, Clone, PartialEq)]
pub struct Injections {
    values: Vec<PowerInjection>,
}

impl Injections {
    pub fn zeros(n_nodes: usize) -> Self {
        Self { values: vec![PowerInjection::default(); n_nodes] }
    }

    pub fn set(&mut self, n: NodeId, inj: PowerInjection) {
        self.values[n.index()] = inj;
    }

    pub fn add(&mut self, n: NodeId, inj: PowerInjection) {
        let v = &mut self.values[n.index()];
        v.p += inj.p;
        v.q += inj.q;
    }

    pub fn get(&self, n: NodeId) -> PowerInjection {
        self.values[n.index()]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Computes every node voltage from the root voltage and the branch
/// currents: `V_child = V_parent - z_b * I_b` along the tree. Exact and
/// non-iterative for a given current vector.
pub fn forward_sweep(
    tree: &RadialTree,
    root_voltage: Complex64,
    currents: &StateVector,
) -> Result<NodeVoltages, PowerFlowError> {
    currents.check_dim(tree)?;
    let mut values = vec![root_voltage; tree.nodes().len()];
    for (i, b) in tree.branches().iter().enumerate() {
        let vp = values[tree.node_index(b.parent).expect("parent in tree")];
        let drop = b.z * currents.current(i);
        values[tree.node_index(b.child).expect("child in tree")] = vp - drop;
    }
    Ok(NodeVoltages { values })
}

/// Result of the ladder power-flow iteration.
#[derive(Debug, Clone)]
pub struct PowerFlowSolution {
    pub voltages: NodeVoltages,
    pub currents: StateVector,
    pub iterations: usize,
}

/// Backward/forward sweep solver for constant-power loads on a radial
/// tree. Aggregates load currents from the leaves using the latest
/// voltages, then re-sweeps voltages, until the largest voltage change
/// is below `tol`.
pub fn solve_powerflow(
    tree: &RadialTree,
    injections: &Injections,
    root_voltage: Complex64,
    tol: f64,
    max_iter: usize,
) -> Result<PowerFlowSolution, PowerFlowError> {
    if !(tol > 0.0) {
        return Err(PowerFlowError::BadTolerance(tol));
    }
    let n = tree.nodes().len();
    let mut voltages = vec![root_voltage; n];
    let mut currents = StateVector::zeros(tree);
    let mut last_delta = f64::INFINITY;
    for k in 1..=max_iter {
        // backward: load currents at latest voltages, aggregated to the root
        let mut subtree_current = vec![Complex64::new(0.0, 0.0); n];
        for (local, &node) in tree.nodes().iter().enumerate() {
            let v = voltages[local];
            if v.norm() == 0.0 {
                return Err(PowerFlowError::VoltageCollapse(node.0));
            }
            let s = injections.get(node).as_complex();
            subtree_current[local] = (s / v).conj();
        }
        for (i, b) in tree.branches().iter().enumerate().rev() {
            let child = tree.node_index(b.child).expect("child in tree");
            let parent = tree.node_index(b.parent).expect("parent in tree");
            let flow = subtree_current[child];
            currents.set_current(i, flow);
            subtree_current[parent] += flow;
        }
        // forward: new voltages from the aggregated currents
        let swept = forward_sweep(tree, root_voltage, &currents)?;
        last_delta = 0.0f64;
        for (old, new) in voltages.iter().zip(swept.values()) {
            last_delta = last_delta.max((new - old).norm());
        }
        voltages.copy_from_slice(swept.values());
        if last_delta < tol {
            return Ok(PowerFlowSolution {
                voltages: NodeVoltages { values: voltages },
                currents,
                iterations: k,
            });
        }
    }
    Err(PowerFlowError::NotConverged { iterations: max_iter, last_delta })
}

/// Largest KCL residual over non-root nodes:
/// `|I_feed - sum I_children - conj(S/V)|`.
pub fn kcl_residual_max(
    tree: &RadialTree,
    injections: &Injections,
    voltages: &NodeVoltages,
    currents: &StateVector,
) -> Result<f64, PowerFlowError> {
    currents.check_dim(tree)?;
    let mut worst = 0.0f64;
    for (local, &node) in tree.nodes().iter().enumerate() {
        let Some(feed) = tree.feed_branch_of(node)? else { continue };
        let mut net = currents.current(feed);
        for &cb in tree.child_branches_of(node)? {
            net -= currents.current(cb);
        }
        let v = voltages.values()[local];
        let load = (injections.get(node).as_complex() / v).conj();
        worst = worst.max((net - load).norm());
    }
    Ok(worst)
}

/// Complex-power balance residual: root supply minus loads (non-root)
/// minus series losses.
pub fn energy_balance_residual(
    tree: &RadialTree,
    injections: &Injections,
    voltages: &NodeVoltages,
    currents: &StateVector,
) -> Result<f64, PowerFlowError> {
    currents.check_dim(tree)?;
    let root_local = tree.node_index(tree.root())?;
    let mut supply = Complex64::new(0.0, 0.0);
    for &cb in tree.child_branches_of(tree.root())? {
        supply += voltages.values()[root_local] * currents.current(cb).conj();
    }
    let mut demand = Complex64::new(0.0, 0.0);
    for &node in tree.nodes().iter().skip(1) {
        demand += injections.get(node).as_complex();
    }
    let mut losses = Complex64::new(0.0, 0.0);
    for (i, b) in tree.branches().iter().enumerate() {
        let cur = currents.current(i);
        losses += b.z * cur.norm_sqr();
    }
    Ok((supply - demand - losses).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelBuilder, NodeRole};
    use approx::assert_relative_eq;

    fn chain_model(n: usize, r: f64, x: f64) -> crate::model::FeederModel {
        let mut b = ModelBuilder::new();
        let root = b.node(NodeRole::Substation);
        let mut prev = root;
        for _ in 1..n {
            let next = b.node(NodeRole::PrimaryJunction);
            b.branch(prev, next, r, x);
            prev = next;
        }
        b.build().unwrap()
    }

    #[test]
    fn zero_currents_leave_root_voltage_everywhere() {
        let m = chain_model(5, 0.01, 0.02);
        let tree = m.full_tree();
        let v0 = Complex64::new(1.02, -0.01);
        let v = forward_sweep(tree, v0, &StateVector::zeros(tree)).unwrap();
        for &val in v.values() {
            assert_eq!(val, v0);
        }
    }

    #[test]
    fn single_branch_drop_formula() {
        let m = chain_model(2, 0.01, 0.02);
        let tree = m.full_tree();
        let mut s = StateVector::zeros(tree);
        s.set_current(0, Complex64::new(1.0, 0.0));
        let v = forward_sweep(tree, Complex64::new(1.0, 0.0), &s).unwrap();
        let leaf = v.at(tree, NodeId(1)).unwrap();
        assert_relative_eq!(leaf.re, 0.99, max_relative = 1e-15);
        assert_relative_eq!(leaf.im, -0.02, max_relative = 1e-15);
    }

    #[test]
    fn chain_matches_cumulative_drop_oracle() {
        let m = chain_model(4, 0.0, 0.0); // impedances set per branch below
        // rebuild with distinct impedances
        let mut b = ModelBuilder::new();
        let root = b.node(NodeRole::Substation);
        let n1 = b.node(NodeRole::PrimaryJunction);
        let n2 = b.node(NodeRole::PrimaryJunction);
        let n3 = b.node(NodeRole::PrimaryJunction);
        b.branch(root, n1, 0.01, 0.03);
        b.branch(n1, n2, 0.02, 0.01);
        b.branch(n2, n3, 0.005, 0.015);
        let m2 = b.build().unwrap();
        drop(m);
        let tree = m2.full_tree();
        let mut s = StateVector::zeros(tree);
        s.set_current(0, Complex64::new(0.5, -0.2));
        s.set_current(1, Complex64::new(0.3, -0.1));
        s.set_current(2, Complex64::new(0.1, 0.05));
        let v = forward_sweep(tree, Complex64::new(1.0, 0.0), &s).unwrap();
        // independent cumulative-sum oracle over the path
        let mut expected = Complex64::new(1.0, 0.0);
        let path = [(0usize, m2.branches()[0]), (1, m2.branches()[1]), (2, m2.branches()[2])];
        for (i, br) in path {
            expected -= br.impedance() * s.current(i);
            let node = br.to;
            let got = v.at(tree, node).unwrap();
            assert_relative_eq!(got.re, expected.re, epsilon = 1e-15);
            assert_relative_eq!(got.im, expected.im, epsilon = 1e-15);
        }
    }

    #[test]
    fn sweep_is_linear_in_currents() {
        let mut b = ModelBuilder::new();
        let root = b.node(NodeRole::Substation);
        let hub = b.node(NodeRole::PrimaryJunction);
        b.branch(root, hub, 0.01, 0.02);
        for _ in 0..3 {
            let leaf = b.node(NodeRole::PrimaryJunction);
            b.branch(hub, leaf, 0.02, 0.01);
        }
        let m = b.build().unwrap();
        let tree = m.full_tree();
        let v0 = Complex64::new(1.0, 0.0);
        let mk = |vals: &[f64]| StateVector::from_values(vals.to_vec());
        let s1 = mk(&[0.1, 0.0, 0.05, -0.01, 0.02, 0.03, -0.04, 0.01]);
        let s2 = mk(&[0.03, 0.02, -0.01, 0.04, 0.0, -0.02, 0.02, 0.02]);
        let sum = StateVector::from_values(
            s1.values.iter().zip(&s2.values).map(|(a, b)| a + b).collect(),
        );
        let va = forward_sweep(tree, v0, &s1).unwrap();
        let vb = forward_sweep(tree, v0, &s2).unwrap();
        let vs = forward_sweep(tree, v0, &sum).unwrap();
        for i in 0..tree.nodes().len() {
            let superposed = va.values()[i] + vb.values()[i] - v0;
            assert_relative_eq!(vs.values()[i].re, superposed.re, epsilon = 1e-14);
            assert_relative_eq!(vs.values()[i].im, superposed.im, epsilon = 1e-14);
        }
    }

    #[test]
    fn zero_injections_solve_flat() {
        let m = chain_model(4, 0.01, 0.02);
        let tree = m.full_tree();
        let inj = Injections::zeros(m.n_nodes());
        let sol =
            solve_powerflow(tree, &inj, Complex64::new(1.0, 0.0), 1e-12, 100).unwrap();
        assert!(sol.iterations <= 2);
        for &v in sol.voltages.values() {
            assert_eq!(v, Complex64::new(1.0, 0.0));
        }
        assert!(sol.currents.values.iter().all(|&c| c == 0.0));
    }

    /// Closed-form single-load oracle: with V = 1 - z*I and V*conj(I) = S,
    /// writing V = a + jb gives b = -Im(z*conj(S)) and
    /// a = (1 + sqrt(1 - 4*(b^2 + Re(z*conj(S)))))/2.
    fn single_load_closed_form(z: Complex64, s: Complex64) -> Complex64 {
        let zs = z * s.conj();
        let b = -zs.im;
        let disc = 1.0 - 4.0 * (b * b + zs.re);
        assert!(disc > 0.0, "load too heavy for closed form");
        let a = 0.5 * (1.0 + disc.sqrt());
        Complex64::new(a, b)
    }

    #[test]
    fn single_load_matches_closed_form() {
        let m = chain_model(2, 0.01, 0.02);
        let tree = m.full_tree();
        let mut inj = Injections::zeros(2);
        inj.set(NodeId(1), PowerInjection::new(0.1, 0.05));
        let sol =
            solve_powerflow(tree, &inj, Complex64::new(1.0, 0.0), 1e-14, 200).unwrap();
        let v_leaf = sol.voltages.at(tree, NodeId(1)).unwrap();
        let expected = single_load_closed_form(
            Complex64::new(0.01, 0.02),
            Complex64::new(0.1, 0.05),
        );
        assert_relative_eq!(v_leaf.re, expected.re, epsilon = 1e-12);
        assert_relative_eq!(v_leaf.im, expected.im, epsilon = 1e-12);
        // and the current satisfies I = conj(S/V)
        let i_expect = (Complex64::new(0.1, 0.05) / expected).conj();
        assert_relative_eq!(sol.currents.current(0).re, i_expect.re, epsilon = 1e-12);
        assert_relative_eq!(sol.currents.current(0).im, i_expect.im, epsilon = 1e-12);
    }

    #[test]
    fn solution_satisfies_kcl_and_energy_balance() {
        // bushy tree with mixed loads
        let mut b = ModelBuilder::new();
        let root = b.node(NodeRole::Substation);
        let hub = b.node(NodeRole::PrimaryJunction);
        b.branch(root, hub, 0.01, 0.02);
        let mut leaves = alloc::vec::Vec::new();
        for _ in 0..4 {
            let leaf = b.node(NodeRole::PrimaryJunction);
            b.branch(hub, leaf, 0.03, 0.01);
            leaves.push(leaf);
        }
        let m = b.build().unwrap();
        let tree = m.full_tree();
        let mut inj = Injections::zeros(m.n_nodes());
        inj.set(leaves[0], PowerInjection::new(0.05, 0.02));
        inj.set(leaves[1], PowerInjection::new(0.08, -0.01));
        inj.set(leaves[2], PowerInjection::new(-0.03, 0.0)); // generation
        inj.set(leaves[3], PowerInjection::new(0.02, 0.01));
        let sol =
            solve_powerflow(tree, &inj, Complex64::new(1.0, 0.0), 1e-12, 100).unwrap();
        let kcl = kcl_residual_max(tree, &inj, &sol.voltages, &sol.currents).unwrap();
        assert!(kcl < 1e-10, "kcl residual {kcl}");
        let eb = energy_balance_residual(tree, &inj, &sol.voltages, &sol.currents).unwrap();
        assert!(eb < 1e-10, "energy residual {eb}");
        // round-trip: voltages reproduce under a fresh sweep
        let swept = forward_sweep(tree, Complex64::new(1.0, 0.0), &sol.currents).unwrap();
        for (a, b) in swept.values().iter().zip(sol.voltages.values()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let m = chain_model(3, 0.01, 0.02);
        let tree = m.full_tree();
        let bad = StateVector::from_values(vec![0.0; 3]);
        let err = forward_sweep(tree, Complex64::new(1.0, 0.0), &bad).unwrap_err();
        assert_eq!(err, PowerFlowError::DimensionMismatch { expected: 4, got: 3 });
    }

    #[test]
    fn heavy_load_does_not_converge() {
        let m = chain_model(2, 0.3, 0.3);
        let tree = m.full_tree();
        let mut inj = Injections::zeros(2);
        inj.set(NodeId(1), PowerInjection::new(5.0, 2.0)); // far beyond feasibility
        let err = solve_powerflow(tree, &inj, Complex64::new(1.0, 0.0), 1e-10, 50);
        assert!(err.is_err());
    }
}
