//! Radial network model: one medium-voltage primary feeder plus the
//! low-voltage secondary circuits hanging off its service transformers.
//!
//! A [`FeederModel`] is validated once at construction and immutable
//! afterwards; estimators work against the derived [`RadialTree`] views
//! (full network, primary-only, one per secondary circuit).

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use num_complex::Complex64;
use thiserror::Error;

/// Node identifier, dense from 0 within a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

/// Branch identifier, dense from 0 within a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BranchId(pub u32);

/// Secondary-circuit identifier, dense from 0 within a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CircuitId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "node {}", self.0)
    }
}
impl fmt::Display for BranchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "branch {}", self.0)
    }
}
impl fmt::Display for CircuitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "circuit {}", self.0)
    }
}

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}
impl BranchId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}
impl CircuitId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeRole {
    Substation,
    PrimaryJunction,
    SecondaryTransformer,
    SecondaryJunction,
    Customer,
}

impl NodeRole {
    /// Primary-side roles participate in the medium-voltage feeder tree.
    pub fn is_primary(self) -> bool {
        matches!(
            self,
            NodeRole::Substation | NodeRole::PrimaryJunction | NodeRole::SecondaryTransformer
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NodeRole::Substation => "substation",
            NodeRole::PrimaryJunction => "primary_junction",
            NodeRole::SecondaryTransformer => "secondary_transformer",
            NodeRole::SecondaryJunction => "secondary_junction",
            NodeRole::Customer => "customer",
        }
    }
}

/// Phase tag carried as input data; the model itself is a single-phase
/// per-unit equivalent, so the tag is not used algorithmically.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    A,
    B,
    C,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::A => "a",
            Phase::B => "b",
            Phase::C => "c",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeInfo {
    pub id: NodeId,
    pub role: NodeRole,
    pub phase: Phase,
}

/// Series branch with per-unit impedance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub id: BranchId,
    pub from: NodeId,
    pub to: NodeId,
    pub r: f64,
    pub x: f64,
}

impl Branch {
    pub fn impedance(&self) -> Complex64 {
        Complex64::new(self.r, self.x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Customer {
    pub node: NodeId,
    pub has_smart_meter: bool,
    pub has_pv: bool,
}

/// One low-voltage circuit rooted at a service transformer. `nodes` and
/// `branches` are the elements strictly below the transformer node.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondaryCircuit {
    pub id: CircuitId,
    pub transformer_node: NodeId,
    pub nodes: Vec<NodeId>,
    pub branches: Vec<BranchId>,
    pub customers: Vec<Customer>,
}

impl SecondaryCircuit {
    /// Dimension of the circuit's state vector: one real and one
    /// imaginary current per branch.
    pub fn state_dim(&self) -> usize {
        2 * self.branches.len()
    }
}

/// System base values; all electrical quantities in the model are
/// per-unit on these bases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseValues {
    pub s_base_va: f64,
    pub v_base_primary_v: f64,
    pub v_base_secondary_v: f64,
}

impl Default for BaseValues {
    fn default() -> Self {
        Self { s_base_va: 1.0e6, v_base_primary_v: 13_800.0, v_base_secondary_v: 240.0 }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("model has no substation node")]
    NoSubstation,
    #[error("model has more than one substation: node {0} and node {1}")]
    MultipleSubstations(u32, u32),
    #[error("node ids are not dense from 0: missing node {0}")]
    NonDenseNodeIds(u32),
    #[error("branch ids are not dense from 0: missing branch {0}")]
    NonDenseBranchIds(u32),
    #[error("duplicate node id {0}")]
    DuplicateNode(u32),
    #[error("duplicate branch id {0}")]
    DuplicateBranch(u32),
    #[error("branch {0} connects node {1} to itself")]
    SelfLoop(u32, u32),
    #[error("branch {0} has negative resistance {1}")]
    NegativeResistance(u32, f64),
    #[error("branch {0} references unknown node {1}")]
    BranchUnknownNode(u32, u32),
    #[error("cycle detected at branch {0}")]
    CycleDetected(u32),
    #[error("node {0} is not reachable from the root")]
    Disconnected(u32),
    #[error("branch count {branches} does not match node count {nodes} minus one")]
    BranchCount { nodes: usize, branches: usize },
    #[error("transformer link for circuit {0} points at node {1} which has role {2}")]
    TransformerRole(u32, u32, &'static str),
    #[error("circuit {0}: node {1} also belongs to circuit {2}")]
    NodeInTwoCircuits(u32, u32, u32),
    #[error("circuit {0}: branch {1} also belongs to circuit {2}")]
    BranchInTwoCircuits(u32, u32, u32),
    #[error("circuit {0} is not a tree rooted at its transformer (node {1} unreached)")]
    CircuitNotTree(u32, u32),
    #[error("circuit {0} has no customers")]
    NoCustomers(u32),
    #[error("customer at node {0} is outside any secondary circuit")]
    CustomerOutsideCircuit(u32),
    #[error("customer listed twice at node {0}")]
    DuplicateCustomer(u32),
    #[error("node {0} has role {1} but appears in the primary feeder")]
    SecondaryNodeInPrimary(u32, &'static str),
    #[error("primary branch {0} touches secondary node {1}")]
    PrimaryBranchIntoSecondary(u32, u32),
    #[error("unknown node {0}")]
    UnknownNode(u32),
    #[error("unknown branch {0}")]
    UnknownBranch(u32),
    #[error("circuit {0} is not attached to the primary feeder via a transformer link")]
    CircuitUnlinked(u32),
}

/// Oriented branch inside a [`RadialTree`]: current flows positive from
/// `parent` towards `child`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeBranch {
    pub id: BranchId,
    pub parent: NodeId,
    pub child: NodeId,
    pub z: Complex64,
}

/// A rooted tree view over a subset of the model, with branches oriented
/// away from the root and stored in breadth-first (topological) order.
///
/// The branch order here defines the layout of per-layer state vectors:
/// slot `2*i` is the real part and `2*i + 1` the imaginary part of the
/// current in `branches()[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialTree {
    root: NodeId,
    nodes: Vec<NodeId>,
    branches: Vec<TreeBranch>,
    /// global node index -> local node index
    node_pos: BTreeMap<u32, usize>,
    /// global branch id -> local branch index
    branch_pos: BTreeMap<u32, usize>,
    /// local node index -> local index of the branch feeding it (None for root)
    feed_branch: Vec<Option<usize>>,
    /// local node index -> local indices of branches leaving it
    child_branches: Vec<Vec<usize>>,
}

impl RadialTree {
    /// Builds a tree over `branches` rooted at `root`. `expected_nodes`,
    /// when given, is the set of nodes the tree must span besides the
    /// root (used for circuit validation). `cycle_cost` maps a rejected
    /// branch into the error to raise.
    fn build(
        root: NodeId,
        branches: &[Branch],
        node_exists: impl Fn(NodeId) -> bool,
    ) -> Result<Self, ModelError> {
        for b in branches {
            if !node_exists(b.from) {
                return Err(ModelError::BranchUnknownNode(b.id.0, b.from.0));
            }
            if !node_exists(b.to) {
                return Err(ModelError::BranchUnknownNode(b.id.0, b.to.0));
            }
        }
        // adjacency over the given branch subset
        let mut adj: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (i, b) in branches.iter().enumerate() {
            adj.entry(b.from.0).or_default().push(i);
            adj.entry(b.to.0).or_default().push(i);
        }
        let mut nodes = vec![root];
        let mut tree_branches: Vec<TreeBranch> = Vec::with_capacity(branches.len());
        let mut node_pos = BTreeMap::new();
        node_pos.insert(root.0, 0usize);
        let mut used = vec![false; branches.len()];
        let mut queue = vec![0usize]; // local node indices to expand
        let mut head = 0;
        while head < queue.len() {
            let local = queue[head];
            head += 1;
            let here = nodes[local];
            // deterministic order: incident branches sorted by global id
            let mut incident: Vec<usize> = adj.get(&here.0).cloned().unwrap_or_default();
            incident.sort_by_key(|&i| branches[i].id.0);
            for bi in incident {
                if used[bi] {
                    continue;
                }
                let b = &branches[bi];
                let other = if b.from == here { b.to } else { b.from };
                if node_pos.contains_key(&other.0) {
                    // reaches an already-visited node through a second path
                    return Err(ModelError::CycleDetected(b.id.0));
                }
                used[bi] = true;
                let child_local = nodes.len();
                nodes.push(other);
                node_pos.insert(other.0, child_local);
                tree_branches.push(TreeBranch {
                    id: b.id,
                    parent: here,
                    child: other,
                    z: b.impedance(),
                });
                queue.push(child_local);
            }
        }
        if let Some(bi) = used.iter().position(|u| !u) {
            // an unused branch means its endpoints were never reached
            let b = &branches[bi];
            return Err(ModelError::Disconnected(b.from.0.min(b.to.0)));
        }
        let mut branch_pos = BTreeMap::new();
        let mut feed_branch = vec![None; nodes.len()];
        let mut child_branches = vec![Vec::new(); nodes.len()];
        for (i, tb) in tree_branches.iter().enumerate() {
            branch_pos.insert(tb.id.0, i);
            let child_local = node_pos[&tb.child.0];
            let parent_local = node_pos[&tb.parent.0];
            feed_branch[child_local] = Some(i);
            child_branches[parent_local].push(i);
        }
        Ok(Self {
            root,
            nodes,
            branches: tree_branches,
            node_pos,
            branch_pos,
            feed_branch,
            child_branches,
        })
    }

    #[inline]
    pub fn root(&self) -> NodeId {
        self.root
    }

    /// Nodes in breadth-first order; element 0 is the root.
    #[inline]
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    /// Oriented branches in topological order (parents before children).
    #[inline]
    pub fn branches(&self) -> &[TreeBranch] {
        &self.branches
    }

    #[inline]
    pub fn n_branches(&self) -> usize {
        self.branches.len()
    }

    /// Length of a state vector over this tree.
    #[inline]
    pub fn state_len(&self) -> usize {
        2 * self.branches.len()
    }

    pub fn contains_node(&self, n: NodeId) -> bool {
        self.node_pos.contains_key(&n.0)
    }

    pub fn node_index(&self, n: NodeId) -> Result<usize, ModelError> {
        self.node_pos.get(&n.0).copied().ok_or(ModelError::UnknownNode(n.0))
    }

    pub fn branch_index(&self, b: BranchId) -> Result<usize, ModelError> {
        self.branch_pos.get(&b.0).copied().ok_or(ModelError::UnknownBranch(b.0))
    }

    /// Local index of the branch feeding `n`, `None` for the root.
    pub fn feed_branch_of(&self, n: NodeId) -> Result<Option<usize>, ModelError> {
        Ok(self.feed_branch[self.node_index(n)?])
    }

    /// Local indices of branches leaving `n` towards its children.
    pub fn child_branches_of(&self, n: NodeId) -> Result<&[usize], ModelError> {
        Ok(&self.child_branches[self.node_index(n)?])
    }

    /// Branches on the unique root-to-`n` path, root end first.
    pub fn path_to_root(&self, n: NodeId) -> Result<Vec<BranchId>, ModelError> {
        let mut local = self.node_index(n)?;
        let mut path = Vec::new();
        while let Some(bi) = self.feed_branch[local] {
            path.push(self.branches[bi].id);
            local = self.node_pos[&self.branches[bi].parent.0];
        }
        path.reverse();
        Ok(path)
    }

    /// Local branch indices on the root-to-`n` path, root end first.
    pub fn path_indices(&self, n: NodeId) -> Result<Vec<usize>, ModelError> {
        let mut local = self.node_index(n)?;
        let mut path = Vec::new();
        while let Some(bi) = self.feed_branch[local] {
            path.push(bi);
            local = self.node_pos[&self.branches[bi].parent.0];
        }
        path.reverse();
        Ok(path)
    }

    /// All branches in the subtree rooted at `n` (the branches feeding
    /// `n`'s children and everything below them).
    pub fn downstream_branches(&self, n: NodeId) -> Result<Vec<BranchId>, ModelError> {
        let start = self.node_index(n)?;
        let mut out = Vec::new();
        let mut stack = vec![start];
        while let Some(local) = stack.pop() {
            for &bi in &self.child_branches[local] {
                out.push(self.branches[bi].id);
                stack.push(self.node_pos[&self.branches[bi].child.0]);
            }
        }
        out.sort();
        Ok(out)
    }
}

/// Validated, immutable model of one feeder and its secondary circuits.
#[derive(Debug, Clone, PartialEq)]
pub struct FeederModel {
    nodes: Vec<NodeInfo>,
    branches: Vec<Branch>,
    root: NodeId,
    transformers: Vec<(NodeId, CircuitId)>,
    secondaries: Vec<SecondaryCircuit>,
    base: BaseValues,
    full_tree: RadialTree,
    primary_tree: RadialTree,
    secondary_trees: Vec<RadialTree>,
    /// node index -> circuit owning it (secondary-side nodes only)
    circuit_of_node: Vec<Option<CircuitId>>,
}

impl FeederModel {
    /// Validates all structural invariants and builds the tree views.
    pub fn new(
        nodes: Vec<NodeInfo>,
        branches: Vec<Branch>,
        transformers: Vec<(NodeId, CircuitId)>,
        secondaries: Vec<SecondaryCircuit>,
        base: BaseValues,
    ) -> Result<Self, ModelError> {
        // dense, unique ids
        let n = nodes.len();
        let mut seen = vec![false; n];
        for info in &nodes {
            let idx = info.id.index();
            if idx >= n {
                return Err(ModelError::NonDenseNodeIds(info.id.0));
            }
            if seen[idx] {
                return Err(ModelError::DuplicateNode(info.id.0));
            }
            seen[idx] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(ModelError::NonDenseNodeIds(missing as u32));
        }
        let m = branches.len();
        let mut seen_b = vec![false; m];
        for b in &branches {
            let idx = b.id.index();
            if idx >= m {
                return Err(ModelError::NonDenseBranchIds(b.id.0));
            }
            if seen_b[idx] {
                return Err(ModelError::DuplicateBranch(b.id.0));
            }
            seen_b[idx] = true;
            if b.from == b.to {
                return Err(ModelError::SelfLoop(b.id.0, b.from.0));
            }
            if b.r < 0.0 {
                return Err(ModelError::NegativeResistance(b.id.0, b.r));
            }
        }

        // unique substation = root
        let mut root = None;
        for info in &nodes {
            if info.role == NodeRole::Substation {
                match root {
                    None => root = Some(info.id),
                    Some(r) => return Err(ModelError::MultipleSubstations(r.0, info.id.0)),
                }
            }
        }
        let root = root.ok_or(ModelError::NoSubstation)?;

        if m != n.saturating_sub(1) {
            // still try to produce the more specific cycle/disconnect error
            if m >= n {
                let t = RadialTree::build(root, &branches, |id| id.index() < n);
                if let Err(e) = t {
                    return Err(e);
                }
            }
            return Err(ModelError::BranchCount { nodes: n, branches: m });
        }

        let full_tree = RadialTree::build(root, &branches, |id| id.index() < n)?;
        if full_tree.nodes().len() != n {
            // some node exists but no branch reaches it
            for info in &nodes {
                if !full_tree.contains_node(info.id) {
                    return Err(ModelError::Disconnected(info.id.0));
                }
            }
        }

        // circuit membership and partition checks
        let mut circuit_of_node: Vec<Option<CircuitId>> = vec![None; n];
        let mut circuit_of_branch: Vec<Option<CircuitId>> = vec![None; m];
        for c in &secondaries {
            for &node in &c.nodes {
                if node.index() >= n {
                    return Err(ModelError::UnknownNode(node.0));
                }
                if let Some(prev) = circuit_of_node[node.index()] {
                    return Err(ModelError::NodeInTwoCircuits(c.id.0, node.0, prev.0));
                }
                circuit_of_node[node.index()] = Some(c.id);
            }
            for &br in &c.branches {
                if br.index() >= m {
                    return Err(ModelError::UnknownBranch(br.0));
                }
                if let Some(prev) = circuit_of_branch[br.index()] {
                    return Err(ModelError::BranchInTwoCircuits(c.id.0, br.0, prev.0));
                }
                circuit_of_branch[br.index()] = Some(c.id);
            }
            if c.customers.is_empty() {
                return Err(ModelError::NoCustomers(c.id.0));
            }
        }

        // transformer links
        let mut link_of_circuit: Vec<Option<NodeId>> = vec![None; secondaries.len()];
        for &(node, circuit) in &transformers {
            if node.index() >= n {
                return Err(ModelError::UnknownNode(node.0));
            }
            let role = nodes[node.index()].role;
            if role != NodeRole::SecondaryTransformer {
                return Err(ModelError::TransformerRole(circuit.0, node.0, role.as_str()));
            }
            if circuit.index() >= secondaries.len() {
                return Err(ModelError::CircuitUnlinked(circuit.0));
            }
            link_of_circuit[circuit.index()] = Some(node);
        }

        // per-circuit trees
        let mut secondary_trees = Vec::with_capacity(secondaries.len());
        for c in &secondaries {
            let tnode = link_of_circuit
                .get(c.id.index())
                .copied()
                .flatten()
                .ok_or(ModelError::CircuitUnlinked(c.id.0))?;
            if tnode != c.transformer_node {
                return Err(ModelError::CircuitUnlinked(c.id.0));
            }
            let cbranches: Vec<Branch> =
                c.branches.iter().map(|&bid| branches[bid.index()]).collect();
            let in_circuit = |id: NodeId| id == tnode || c.nodes.contains(&id);
            let tree = RadialTree::build(tnode, &cbranches, in_circuit).map_err(|e| match e {
                ModelError::Disconnected(node) => ModelError::CircuitNotTree(c.id.0, node),
                other => other,
            })?;
            for &node in &c.nodes {
                if !tree.contains_node(node) {
                    return Err(ModelError::CircuitNotTree(c.id.0, node.0));
                }
            }
            secondary_trees.push(tree);
        }

        // customers: role + exactly-one-circuit
        let mut customer_seen = vec![false; n];
        for c in &secondaries {
            for cust in &c.customers {
                if cust.node.index() >= n {
                    return Err(ModelError::UnknownNode(cust.node.0));
                }
                if customer_seen[cust.node.index()] {
                    return Err(ModelError::DuplicateCustomer(cust.node.0));
                }
                customer_seen[cust.node.index()] = true;
                if circuit_of_node[cust.node.index()] != Some(c.id) {
                    return Err(ModelError::CustomerOutsideCircuit(cust.node.0));
                }
            }
        }
        for info in &nodes {
            if info.role == NodeRole::Customer && !customer_seen[info.id.index()] {
                return Err(ModelError::CustomerOutsideCircuit(info.id.0));
            }
        }

        // primary view: primary-role nodes, branches not owned by a circuit
        for info in &nodes {
            if !info.role.is_primary() && circuit_of_node[info.id.index()].is_none() {
                return Err(ModelError::CustomerOutsideCircuit(info.id.0));
            }
        }
        let primary_branches: Vec<Branch> = branches
            .iter()
            .filter(|b| circuit_of_branch[b.id.index()].is_none())
            .copied()
            .collect();
        for b in &primary_branches {
            for end in [b.from, b.to] {
                if !nodes[end.index()].role.is_primary() {
                    return Err(ModelError::PrimaryBranchIntoSecondary(b.id.0, end.0));
                }
            }
        }
        let primary_tree =
            RadialTree::build(root, &primary_branches, |id| {
                id.index() < n && nodes[id.index()].role.is_primary()
            })?;
        for info in &nodes {
            if info.role.is_primary() && !primary_tree.contains_node(info.id) {
                return Err(ModelError::Disconnected(info.id.0));
            }
        }

        Ok(Self {
            nodes,
            branches,
            root,
            transformers,
            secondaries,
            base,
            full_tree,
            primary_tree,
            secondary_trees,
            circuit_of_node,
        })
    }

    #[inline]
    pub fn root(&self) -> NodeId {
        self.root
    }
    #[inline]
    pub fn nodes(&self) -> &[NodeInfo] {
        &self.nodes
    }
    #[inline]
    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }
    #[inline]
    pub fn base(&self) -> BaseValues {
        self.base
    }
    #[inline]
    pub fn transformers(&self) -> &[(NodeId, CircuitId)] {
        &self.transformers
    }
    #[inline]
    pub fn secondaries(&self) -> &[SecondaryCircuit] {
        &self.secondaries
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Number of primary-side nodes (substation, junctions, transformers).
    pub fn n_primary_nodes(&self) -> usize {
        self.nodes.iter().filter(|i| i.role.is_primary()).count()
    }

    pub fn n_customers(&self) -> usize {
        self.secondaries.iter().map(|c| c.customers.len()).sum()
    }

    /// All customers in circuit order; the canonical customer ordering
    /// used by scenario streams.
    pub fn customers(&self) -> impl Iterator<Item = (CircuitId, &Customer)> {
        self.secondaries.iter().flat_map(|c| c.customers.iter().map(move |cu| (c.id, cu)))
    }

    pub fn node_role(&self, n: NodeId) -> Result<NodeRole, ModelError> {
        self.nodes.get(n.index()).map(|i| i.role).ok_or(ModelError::UnknownNode(n.0))
    }

    /// The joint tree spanning primary and all secondary circuits.
    #[inline]
    pub fn full_tree(&self) -> &RadialTree {
        &self.full_tree
    }

    /// The medium-voltage feeder tree only.
    #[inline]
    pub fn primary_tree(&self) -> &RadialTree {
        &self.primary_tree
    }

    /// Tree of one secondary circuit, rooted at its transformer node.
    pub fn secondary_tree(&self, id: CircuitId) -> Result<&RadialTree, ModelError> {
        self.secondary_trees.get(id.index()).ok_or(ModelError::CircuitUnlinked(id.0))
    }

    pub fn circuit(&self, id: CircuitId) -> Result<&SecondaryCircuit, ModelError> {
        self.secondaries.get(id.index()).ok_or(ModelError::CircuitUnlinked(id.0))
    }

    /// Circuit that owns a secondary-side node, if any.
    pub fn circuit_of_node(&self, n: NodeId) -> Result<Option<CircuitId>, ModelError> {
        self.circuit_of_node.get(n.index()).copied().ok_or(ModelError::UnknownNode(n.0))
    }

    /// Branches on the unique root-to-`n` path over the full network.
    pub fn path_to_root(&self, n: NodeId) -> Result<Vec<BranchId>, ModelError> {
        self.full_tree.path_to_root(n)
    }

    /// Branches in the subtree below `n` over the full network.
    pub fn downstream_branches(&self, n: NodeId) -> Result<Vec<BranchId>, ModelError> {
        self.full_tree.downstream_branches(n)
    }
}

/// Convenience builder used by tests and the synthetic feeder generator.
#[derive(Debug, Default, Clone)]
pub struct ModelBuilder {
    pub nodes: Vec<NodeInfo>,
    pub branches: Vec<Branch>,
    pub transformers: Vec<(NodeId, CircuitId)>,
    pub secondaries: Vec<SecondaryCircuit>,
    pub base: Option<BaseValues>,
}

impl ModelBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node(&mut self, role: NodeRole) -> NodeId {
        self.node_on_phase(role, Phase::A)
    }

    pub fn node_on_phase(&mut self, role: NodeRole, phase: Phase) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(NodeInfo { id, role, phase });
        id
    }

    pub fn branch(&mut self, from: NodeId, to: NodeId, r: f64, x: f64) -> BranchId {
        let id = BranchId(self.branches.len() as u32);
        self.branches.push(Branch { id, from, to, r, x });
        id
    }

    pub fn build(self) -> Result<FeederModel, ModelError> {
        FeederModel::new(
            self.nodes,
            self.branches,
            self.transformers,
            self.secondaries,
            self.base.unwrap_or_default(),
        )
    }
}

/// Human-readable names used by the file format and error text.
pub fn parse_role(s: &str) -> Option<NodeRole> {
    Some(match s {
        "substation" => NodeRole::Substation,
        "primary_junction" => NodeRole::PrimaryJunction,
        "secondary_transformer" => NodeRole::SecondaryTransformer,
        "secondary_junction" => NodeRole::SecondaryJunction,
        "customer" => NodeRole::Customer,
        _ => return None,
    })
}

pub fn parse_phase(s: &str) -> Option<Phase> {
    Some(match s {
        "a" | "A" => Phase::A,
        "b" | "B" => Phase::B,
        "c" | "C" => Phase::C,
        _ => return None,
    })
}

pub fn role_name(r: NodeRole) -> String {
    String::from(r.as_str())
}
