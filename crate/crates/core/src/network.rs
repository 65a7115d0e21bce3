//! Finite electric networks: weighted graphs with an interior/boundary
//! vertex partition and strictly positive symmetric edge conductances.
//!
//! Interior vertices carry an explicit, stable ordering (the canonical
//! elimination/branching order used by determinant product formulas and by
//! the spanning-tree sampler). Parallel edges are allowed and carry a
//! per-pair index so paths and loops can record exactly which edge was
//! used. Self-loops are forbidden; killing ("mass") is modelled as an edge
//! to a distinguished cemetery boundary vertex, so the discrete-time
//! killing probability is emergent rather than stored.
//!
//! Networks are immutable after construction and safe to share across
//! threads.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Dense vertex identifier, `0..vertex_count()`.
pub type VertexId = usize;

/// An undirected weighted edge. `parallel_index` distinguishes parallel
/// edges between the same endpoint pair (0, 1, 2, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: VertexId,
    pub b: VertexId,
    /// Conductance, strictly positive.
    pub c: f64,
    pub parallel_index: u32,
}

impl Edge {
    /// The endpoint opposite `v`.
    pub fn other(&self, v: VertexId) -> VertexId {
        if v == self.a {
            self.b
        } else {
            debug_assert_eq!(v, self.b);
            self.a
        }
    }
}

/// A finite electric network.
#[derive(Debug, Clone)]
pub struct Network {
    /// Interior vertices in their canonical order x_1, ..., x_n.
    interior: Vec<VertexId>,
    /// Boundary (absorbing) vertices.
    boundary: Vec<VertexId>,
    edges: Vec<Edge>,
    /// Per-vertex incident edge ids.
    adjacency: Vec<Vec<usize>>,
    /// Per-vertex total incident conductance.
    lambda: Vec<f64>,
    /// vertex id -> position in `interior`, or None for boundary vertices.
    interior_index: Vec<Option<usize>>,
    /// For lattice boxes: the coordination number 2d (every edge has
    /// conductance 1/(2d) and every interior vertex has lambda = 1).
    /// Enables exact integer spanning-tree counts.
    lattice_coordination: Option<u32>,
}

/// Outcome of contracting all boundary vertices to a single root.
#[derive(Debug, Clone)]
pub struct WiredGraph {
    /// Interior vertices keep their interior positions `0..n`; the root is
    /// vertex `n`.
    pub n_interior: usize,
    /// Wired edges, in the same order as the originating network edges that
    /// have at least one interior endpoint. `original_edge` is the edge id
    /// in the source network (the contraction bijection).
    pub edges: Vec<WiredEdge>,
}

/// One edge of a wired graph, endpoints in `0..=n_interior` (root = n).
#[derive(Debug, Clone, PartialEq)]
pub struct WiredEdge {
    pub a: usize,
    pub b: usize,
    pub c: f64,
    pub original_edge: usize,
}

impl WiredGraph {
    pub fn root(&self) -> usize {
        self.n_interior
    }
}

/// Mutable builder for [`Network`].
#[derive(Debug, Default, Clone)]
pub struct NetworkBuilder {
    interior: Vec<VertexId>,
    boundary: Vec<VertexId>,
    edges: Vec<(VertexId, VertexId, f64)>,
    next_id: VertexId,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a new interior vertex (at the end of the canonical order).
    pub fn add_interior(&mut self) -> VertexId {
        let id = self.next_id;
        self.next_id += 1;
        self.interior.push(id);
        id
    }

    /// Appends a new boundary vertex.
    pub fn add_boundary(&mut self) -> VertexId {
        let id = self.next_id;
        self.next_id += 1;
        self.boundary.push(id);
        id
    }

    /// Adds an undirected edge of conductance `c`; parallel edges allowed.
    pub fn add_edge(&mut self, a: VertexId, b: VertexId, c: f64) -> &mut Self {
        self.edges.push((a, b, c));
        self
    }

    pub fn build(&self) -> Result<Network> {
        Network::from_parts(self.interior.clone(), self.boundary.clone(), self.edges.clone())
    }
}

impl Network {
    /// Validates and assembles a network from explicit parts. Vertex ids
    /// must form a dense range `0..(interior.len() + boundary.len())`.
    pub fn from_parts(
        interior: Vec<VertexId>,
        boundary: Vec<VertexId>,
        raw_edges: Vec<(VertexId, VertexId, f64)>,
    ) -> Result<Network> {
        let n_total = interior.len() + boundary.len();
        let mut seen = vec![false; n_total];
        for &v in interior.iter().chain(boundary.iter()) {
            if v >= n_total || seen[v] {
                return Err(Error::InvalidNetwork(format!(
                    "vertex ids must be dense and unique; offending id {v}"
                )));
            }
            seen[v] = true;
        }
        if interior.is_empty() {
            return Err(Error::InvalidNetwork("no interior vertices".into()));
        }
        if boundary.is_empty() {
            return Err(Error::InvalidNetwork(
                "no boundary vertices: the killed walk would never be absorbed".into(),
            ));
        }

        let mut edges = Vec::with_capacity(raw_edges.len());
        let mut parallel_count: HashMap<(VertexId, VertexId), u32> = HashMap::new();
        for &(a, b, c) in &raw_edges {
            if a >= n_total || b >= n_total {
                return Err(Error::InvalidNetwork(format!("edge endpoint out of range: ({a},{b})")));
            }
            if a == b {
                return Err(Error::InvalidNetwork(format!("self-loop at vertex {a}")));
            }
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::InvalidNetwork(format!("conductance must be positive and finite, got {c}")));
            }
            let key = (a.min(b), a.max(b));
            let idx = parallel_count.entry(key).or_insert(0);
            edges.push(Edge { a, b, c, parallel_index: *idx });
            *idx += 1;
        }

        let mut adjacency = vec![Vec::new(); n_total];
        let mut lambda = vec![0.0; n_total];
        for (i, e) in edges.iter().enumerate() {
            adjacency[e.a].push(i);
            adjacency[e.b].push(i);
            lambda[e.a] += e.c;
            lambda[e.b] += e.c;
        }

        let mut interior_index = vec![None; n_total];
        for (pos, &v) in interior.iter().enumerate() {
            interior_index[v] = Some(pos);
        }

        let net = Network {
            interior,
            boundary,
            edges,
            adjacency,
            lambda,
            interior_index,
            lattice_coordination: None,
        };
        net.check_absorption()?;
        Ok(net)
    }

    /// Every interior vertex must have a path to some boundary vertex.
    fn check_absorption(&self) -> Result<()> {
        let mut reach = vec![false; self.vertex_count()];
        let mut stack: Vec<VertexId> = self.boundary.clone();
        for &b in &self.boundary {
            reach[b] = true;
        }
        while let Some(v) = stack.pop() {
            for &eid in &self.adjacency[v] {
                let w = self.edges[eid].other(v);
                if !reach[w] {
                    reach[w] = true;
                    stack.push(w);
                }
            }
        }
        for &v in &self.interior {
            if !reach[v] {
                return Err(Error::InvalidNetwork(format!(
                    "interior vertex {v} cannot reach the boundary; the walk would never be absorbed"
                )));
            }
            if !(self.lambda[v] > 0.0) {
                return Err(Error::InvalidNetwork(format!("interior vertex {v} has lambda = 0")));
            }
        }
        Ok(())
    }

    // ----- accessors ------------------------------------------------------

    pub fn vertex_count(&self) -> usize {
        self.interior.len() + self.boundary.len()
    }

    /// Interior vertices in canonical order.
    pub fn interior(&self) -> &[VertexId] {
        &self.interior
    }

    pub fn boundary(&self) -> &[VertexId] {
        &self.boundary
    }

    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edge ids incident to `v`.
    pub fn incident_edges(&self, v: VertexId) -> &[usize] {
        &self.adjacency[v]
    }

    /// Total incident conductance lambda_v.
    pub fn lambda(&self, v: VertexId) -> f64 {
        self.lambda[v]
    }

    pub fn is_interior(&self, v: VertexId) -> bool {
        self.interior_index[v].is_some()
    }

    /// Position of `v` in the canonical interior order (None for boundary).
    pub fn interior_position(&self, v: VertexId) -> Option<usize> {
        self.interior_index[v]
    }

    /// Position of `v` in the boundary list (None for interior).
    pub fn boundary_position(&self, v: VertexId) -> Option<usize> {
        if self.is_interior(v) {
            None
        } else {
            self.boundary.iter().position(|&b| b == v)
        }
    }

    /// Coordination number 2d for lattice boxes built by
    /// [`Network::lattice_box`], else None.
    pub fn lattice_coordination(&self) -> Option<u32> {
        self.lattice_coordination
    }

    /// Total conductance between a specific vertex pair (summing parallel
    /// edges).
    pub fn conductance_between(&self, a: VertexId, b: VertexId) -> f64 {
        self.adjacency[a]
            .iter()
            .map(|&eid| &self.edges[eid])
            .filter(|e| e.other(a) == b)
            .map(|e| e.c)
            .sum()
    }

    // ----- constructions --------------------------------------------------

    /// The integer box `prod_i {0..side_i}` in Z^d as an electric network:
    /// every lattice edge has conductance 1/(2d), so every interior vertex
    /// has lambda = 1 and the walk is the simple random walk. The boundary
    /// is the set of lattice points at distance 1 from the box.
    pub fn lattice_box(d: usize, side_lengths: &[usize]) -> Result<Network> {
        if d == 0 {
            return Err(Error::InvalidArgument("dimension must be >= 1".into()));
        }
        if side_lengths.len() != d {
            return Err(Error::InvalidArgument(format!(
                "expected {d} side lengths, got {}",
                side_lengths.len()
            )));
        }
        if side_lengths.iter().any(|&s| s == 0) {
            return Err(Error::InvalidArgument("empty box".into()));
        }

        // Enumerate interior points in row-major order.
        let mut coords: Vec<Vec<i64>> = Vec::new();
        let mut cur = vec![0i64; d];
        loop {
            coords.push(cur.clone());
            // increment multi-index
            let mut axis = d;
            loop {
                if axis == 0 {
                    break;
                }
                axis -= 1;
                cur[axis] += 1;
                if (cur[axis] as usize) < side_lengths[axis] {
                    break;
                }
                cur[axis] = 0;
                if axis == 0 {
                    cur.clear();
                    break;
                }
            }
            if cur.is_empty() {
                break;
            }
        }

        let mut id_of: HashMap<Vec<i64>, VertexId> = HashMap::new();
        let interior: Vec<VertexId> = (0..coords.len()).collect();
        for (i, c) in coords.iter().enumerate() {
            id_of.insert(c.clone(), i);
        }
        let mut next_id = coords.len();
        let mut boundary: Vec<VertexId> = Vec::new();
        let mut edges: Vec<(VertexId, VertexId, f64)> = Vec::new();
        let cond = 1.0 / (2.0 * d as f64);

        for (i, c) in coords.iter().enumerate() {
            for axis in 0..d {
                for dir in [-1i64, 1i64] {
                    let mut nb = c.clone();
                    nb[axis] += dir;
                    let inside = nb.iter().enumerate().all(|(ax, &x)| x >= 0 && (x as usize) < side_lengths[ax]);
                    if inside {
                        let j = id_of[&nb];
                        if j > i {
                            edges.push((i, j, cond));
                        }
                    } else {
                        let b = *id_of.entry(nb).or_insert_with(|| {
                            let id = next_id;
                            next_id += 1;
                            boundary.push(id);
                            id
                        });
                        edges.push((i, b, cond));
                    }
                }
            }
        }

        let mut net = Network::from_parts(interior, boundary, edges)?;
        net.lattice_coordination = Some(2 * d as u32);
        Ok(net)
    }

    /// Adds a cemetery boundary vertex and an edge `(x, cemetery)` of
    /// conductance `k(x)` for every interior x with `k(x) > 0`. `k` is
    /// indexed by interior position.
    pub fn add_mass(&self, k: &[f64]) -> Result<Network> {
        if k.len() != self.n_interior() {
            return Err(Error::InvalidArgument(format!(
                "mass function has {} entries for {} interior vertices",
                k.len(),
                self.n_interior()
            )));
        }
        if k.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidArgument("mass must be nonnegative and finite".into()));
        }
        let cemetery = self.vertex_count();
        let mut boundary = self.boundary.clone();
        boundary.push(cemetery);
        let mut edges: Vec<(VertexId, VertexId, f64)> =
            self.edges.iter().map(|e| (e.a, e.b, e.c)).collect();
        for (pos, &kx) in k.iter().enumerate() {
            if kx > 0.0 {
                edges.push((self.interior[pos], cemetery, kx));
            }
        }
        let mut net = Network::from_parts(self.interior.clone(), boundary, edges)?;
        net.lattice_coordination = None;
        Ok(net)
    }

    /// Contracts all boundary vertices to a single root. Parallel edges are
    /// preserved; edges with both endpoints on the boundary are dropped
    /// (they become self-loops at the root and carry no tree weight).
    pub fn contract_boundary(&self) -> WiredGraph {
        let n = self.n_interior();
        let map = |v: VertexId| self.interior_index[v].unwrap_or(n);
        let mut edges = Vec::new();
        for (eid, e) in self.edges.iter().enumerate() {
            let (a, b) = (map(e.a), map(e.b));
            if a == n && b == n {
                continue;
            }
            edges.push(WiredEdge { a, b, c: e.c, original_edge: eid });
        }
        WiredGraph { n_interior: n, edges }
    }

    /// Replaces each edge of conductance c by `m` series edges of
    /// conductance `m * c` through `m - 1` new interior vertices, so the
    /// effective conductance between original endpoints is unchanged.
    pub fn subdivide(&self, m: usize) -> Result<Network> {
        Ok(self.subdivide_with_map(m)?.0)
    }

    /// Like [`Network::subdivide`], also returning, for each original edge
    /// id, the `m - 1` new interior vertices in order from endpoint `a`
    /// to endpoint `b`.
    pub fn subdivide_with_map(&self, m: usize) -> Result<(Network, Vec<Vec<VertexId>>)> {
        if m == 0 {
            return Err(Error::InvalidArgument("subdivision factor must be >= 1".into()));
        }
        if m == 1 {
            let mut net = self.clone();
            net.lattice_coordination = self.lattice_coordination;
            return Ok((net, vec![Vec::new(); self.edges.len()]));
        }
        let mut interior = self.interior.clone();
        let mut next_id = self.vertex_count();
        let mut edges: Vec<(VertexId, VertexId, f64)> = Vec::new();
        let mut map = Vec::with_capacity(self.edges.len());
        for e in &self.edges {
            let c_new = e.c * m as f64;
            let mut chain = Vec::with_capacity(m - 1);
            let mut prev = e.a;
            for _ in 0..m - 1 {
                let v = next_id;
                next_id += 1;
                interior.push(v);
                edges.push((prev, v, c_new));
                prev = v;
                chain.push(v);
            }
            edges.push((prev, e.b, c_new));
            map.push(chain);
        }
        let net = Network::from_parts(interior, self.boundary.clone(), edges)?;
        Ok((net, map))
    }

    // ----- serialization --------------------------------------------------

    pub fn to_json(&self) -> String {
        let spec = NetworkSpec {
            interior: self.interior.clone(),
            boundary: self.boundary.clone(),
            edges: self.edges.iter().map(|e| (e.a, e.b, e.c)).collect(),
            lattice_coordination: self.lattice_coordination,
        };
        serde_json::to_string_pretty(&spec).expect("network serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Network> {
        let spec: NetworkSpec =
            serde_json::from_str(s).map_err(|e| Error::Serialization(e.to_string()))?;
        let mut net = Network::from_parts(spec.interior, spec.boundary, spec.edges)?;
        net.lattice_coordination = spec.lattice_coordination;
        Ok(net)
    }
}

/// On-disk JSON shape for a network.
#[derive(Serialize, Deserialize)]
struct NetworkSpec {
    interior: Vec<VertexId>,
    boundary: Vec<VertexId>,
    edges: Vec<(VertexId, VertexId, f64)>,
    /// Set iff the network is a lattice box with unit total vertex
    /// conductance; enables closed-form spanning-tree counts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lattice_coordination: Option<u32>,
}
