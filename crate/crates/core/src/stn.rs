//! Simple temporal network over step timestamps.
//!
//! Node 0 is the zero reference. Every node added with [`Stn::add_node`] is
//! constrained to be at or after the reference, so the network always has a
//! canonical earliest schedule when it is consistent.
//!
//! Consistency is maintained incrementally: each inserted constraint
//! re-propagates earliest times from its endpoints (a label-correcting
//! longest-path pass). A node relabelled more often than there are nodes, or
//! a push of the reference away from zero, means a negative cycle in the
//! distance graph.

use std::collections::VecDeque;

use thiserror::Error;

pub type NodeId = usize;

/// The zero reference node.
pub const ZERO: NodeId = 0;

/// `lb <= t_to - t_from <= ub`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TemporalConstraint {
    pub from: NodeId,
    pub to: NodeId,
    pub lb: f64,
    pub ub: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum StnError {
    #[error("empty interval: lower bound {lb} exceeds upper bound {ub}")]
    InconsistentConstraint { lb: f64, ub: f64 },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
}

#[derive(Clone, Debug, PartialEq)]
pub enum StnVerdict {
    /// Earliest time of every non-reference node, indexed by `node - 1`.
    Consistent(Vec<f64>),
    /// Nodes of a negative cycle of the distance graph, in cycle order.
    Inconsistent(Vec<NodeId>),
}

impl StnVerdict {
    pub fn is_consistent(&self) -> bool {
        matches!(self, StnVerdict::Consistent(_))
    }
}

/// Edge of the precedence graph: `t_to >= t_from + weight`.
#[derive(Clone, Copy, Debug)]
struct Edge {
    to: NodeId,
    weight: f64,
}

#[derive(Clone, Debug)]
pub struct Stn {
    constraints: Vec<TemporalConstraint>,
    /// Outgoing precedence edges per node.
    out: Vec<Vec<Edge>>,
    earliest: Vec<f64>,
    consistent: bool,
}

impl Default for Stn {
    fn default() -> Self {
        Self::new()
    }
}

const PROPAGATION_SLACK: f64 = 1e-9;

impl Stn {
    /// A network holding only the zero reference.
    pub fn new() -> Stn {
        Stn {
            constraints: Vec::new(),
            out: vec![Vec::new()],
            earliest: vec![0.0],
            consistent: true,
        }
    }

    /// Number of nodes including the reference.
    pub fn len(&self) -> usize {
        self.out.len()
    }

    pub fn is_empty(&self) -> bool {
        self.out.len() == 1
    }

    pub fn constraints(&self) -> &[TemporalConstraint] {
        &self.constraints
    }

    pub fn is_consistent(&self) -> bool {
        self.consistent
    }

    /// Adds a timestamp node with `t >= 0`.
    pub fn add_node(&mut self) -> NodeId {
        let id = self.out.len();
        self.out.push(Vec::new());
        self.earliest.push(0.0);
        self.constraints.push(TemporalConstraint {
            from: ZERO,
            to: id,
            lb: 0.0,
            ub: f64::INFINITY,
        });
        self.out[ZERO].push(Edge { to: id, weight: 0.0 });
        id
    }

    /// Records `lb <= t_to - t_from <= ub` and re-propagates.
    pub fn add_constraint(
        &mut self,
        from: NodeId,
        to: NodeId,
        lb: f64,
        ub: f64,
    ) -> Result<(), StnError> {
        for n in [from, to] {
            if n >= self.len() {
                return Err(StnError::UnknownNode(n));
            }
        }
        if lb > ub {
            return Err(StnError::InconsistentConstraint { lb, ub });
        }
        self.constraints.push(TemporalConstraint { from, to, lb, ub });
        let mut seeds = Vec::with_capacity(2);
        if lb.is_finite() {
            self.out[from].push(Edge { to, weight: lb });
            seeds.push(from);
        }
        if ub.is_finite() {
            self.out[to].push(Edge {
                to: from,
                weight: -ub,
            });
            seeds.push(to);
        }
        if self.consistent {
            self.consistent = self.propagate(&seeds);
        }
        Ok(())
    }

    pub fn add(&mut self, c: TemporalConstraint) -> Result<(), StnError> {
        self.add_constraint(c.from, c.to, c.lb, c.ub)
    }

    fn propagate(&mut self, seeds: &[NodeId]) -> bool {
        let n = self.len();
        let mut relabels = vec![0usize; n];
        let mut queued = vec![false; n];
        let mut queue: VecDeque<NodeId> = VecDeque::new();
        for &s in seeds {
            if !queued[s] {
                queued[s] = true;
                queue.push_back(s);
            }
        }
        while let Some(u) = queue.pop_front() {
            queued[u] = false;
            let base = self.earliest[u];
            for i in 0..self.out[u].len() {
                let Edge { to, weight } = self.out[u][i];
                let candidate = base + weight;
                if candidate > self.earliest[to] + PROPAGATION_SLACK {
                    if to == ZERO {
                        return false;
                    }
                    self.earliest[to] = candidate;
                    relabels[to] += 1;
                    if relabels[to] > n {
                        return false;
                    }
                    if !queued[to] {
                        queued[to] = true;
                        queue.push_back(to);
                    }
                }
            }
        }
        true
    }

    /// Earliest feasible time of a node, when consistent.
    pub fn earliest(&self, node: NodeId) -> Option<f64> {
        self.consistent.then(|| self.earliest[node])
    }

    /// Verdict for the current network: the earliest schedule, or a negative
    /// cycle found by a from-scratch Bellman-Ford pass.
    pub fn check_consistency(&self) -> StnVerdict {
        if self.consistent {
            StnVerdict::Consistent(self.earliest[1..].to_vec())
        } else {
            StnVerdict::Inconsistent(self.negative_cycle().unwrap_or_default())
        }
    }

    /// Distance-graph edges `(u, v, w)` meaning `t_v - t_u <= w`.
    pub fn distance_edges(&self) -> Vec<(NodeId, NodeId, f64)> {
        let mut edges = Vec::new();
        for c in &self.constraints {
            if c.ub.is_finite() {
                edges.push((c.from, c.to, c.ub));
            }
            if c.lb.is_finite() {
                edges.push((c.to, c.from, -c.lb));
            }
        }
        edges
    }

    /// Bellman-Ford from a virtual source; returns a negative cycle if one exists.
    pub fn negative_cycle(&self) -> Option<Vec<NodeId>> {
        let n = self.len();
        let edges = self.distance_edges();
        let mut dist = vec![0.0_f64; n];
        let mut pred: Vec<Option<NodeId>> = vec![None; n];
        let mut last_updated = None;
        for _ in 0..n {
            last_updated = None;
            for &(u, v, w) in &edges {
                if dist[u] + w < dist[v] - PROPAGATION_SLACK {
                    dist[v] = dist[u] + w;
                    pred[v] = Some(u);
                    last_updated = Some(v);
                }
            }
            last_updated?;
        }
        let mut x = last_updated?;
        for _ in 0..n {
            x = pred[x]?;
        }
        let mut cycle = vec![x];
        let mut y = pred[x]?;
        while y != x {
            cycle.push(y);
            y = pred[y]?;
        }
        cycle.reverse();
        Some(cycle)
    }

    /// Shortest-path distance from `from` to every node in the distance graph,
    /// i.e. the tightest upper bound on `t_v - t_from`. Only meaningful on a
    /// consistent network.
    pub fn distances_from(&self, from: NodeId) -> Vec<f64> {
        let n = self.len();
        let mut adj: Vec<Vec<(NodeId, f64)>> = vec![Vec::new(); n];
        for (u, v, w) in self.distance_edges() {
            adj[u].push((v, w));
        }
        let mut dist = vec![f64::INFINITY; n];
        dist[from] = 0.0;
        let mut queued = vec![false; n];
        let mut relabels = vec![0usize; n];
        let mut queue = VecDeque::from([from]);
        queued[from] = true;
        while let Some(u) = queue.pop_front() {
            queued[u] = false;
            for &(v, w) in &adj[u] {
                if dist[u] + w < dist[v] - PROPAGATION_SLACK {
                    relabels[v] += 1;
                    if relabels[v] > n {
                        // negative cycle: give up rather than spin
                        return dist;
                    }
                    dist[v] = dist[u] + w;
                    if !queued[v] {
                        queued[v] = true;
                        queue.push_back(v);
                    }
                }
            }
        }
        dist
    }

    /// Tightest `[lo, hi]` for `t_to - t_from`.
    pub fn interval(&self, from: NodeId, to: NodeId) -> (f64, f64) {
        let hi = self.distances_from(from)[to];
        let back = self.distances_from(to)[from];
        (-back, hi)
    }
}
