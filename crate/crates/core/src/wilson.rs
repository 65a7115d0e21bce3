//! Random walks on networks, chronological loop erasure with erased-loop
//! capture, the loop-erased-walk spanning-tree sampler, and walk
//! occupation fields.
//!
//! Loop erasure uses the last-exit decomposition: for a walk absorbed
//! outside its start, the surviving path visits y_1, y_2, ... where y_1 is
//! the start and rho_k is the walk's *last* visit time to y_k; everything
//! between the first arrival after rho_{k-1} and rho_k is the erased loop
//! based at y_k. Concatenating erased loops per base point and re-inserting
//! them at their roots reconstructs the walk bit-exactly, and the erased
//! loop at y_k is exactly the concatenation of its i.i.d. excursions —
//! which is what the loop-soup splitting construction consumes.

use crate::error::{Error, Result};
use crate::network::{Network, VertexId};
use crate::rng::lane_rng;
use crate::stats::{exp_cdf, ks_test, mean_stderr, mean_se_test, TestReport};
use rand::Rng;
use rand_distr::{Distribution, Exp1};

/// Default cap on walk length; breaching it is an error, never a silent
/// truncation.
pub const STEP_CAP: u64 = 1_000_000_000;

/// A nearest-neighbour path. `edges[i]` joins `vertices[i]` to
/// `vertices[i+1]`. In the continuous-time variant, `holding[i]` is the
/// exponential holding time spent at `vertices[i]` before step `i+1` (no
/// time is spent at the final vertex).
#[derive(Debug, Clone, PartialEq)]
pub struct WalkPath {
    pub vertices: Vec<VertexId>,
    pub edges: Vec<usize>,
    pub holding: Option<Vec<f64>>,
}

impl WalkPath {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn last_vertex(&self) -> VertexId {
        *self.vertices.last().unwrap()
    }
}

/// One erased loop: a closed sub-walk rooted at `base` (first = last
/// vertex), concatenating every excursion erased at that base point.
#[derive(Debug, Clone, PartialEq)]
pub struct ErasedLoop {
    pub base: VertexId,
    pub segment: WalkPath,
}

impl ErasedLoop {
    /// Number of returns to the base (the visit count j of the loop).
    pub fn returns(&self) -> usize {
        self.segment.vertices[1..].iter().filter(|&&v| v == self.base).count()
    }
}

/// A spanning tree of the wired graph, as original-network edge ids with
/// the Wilson branch that created each edge.
#[derive(Debug, Clone)]
pub struct SpanningTree {
    pub edges: Vec<(usize, usize)>,
}

impl SpanningTree {
    /// Sorted edge-id list; canonical key for histogram tests.
    pub fn key(&self) -> Vec<usize> {
        let mut e: Vec<usize> = self.edges.iter().map(|&(id, _)| id).collect();
        e.sort_unstable();
        e
    }
}

/// Per-site walk occupation: `v[x]` counts discrete steps taken at x
/// (continuous-time `w[x]` sums exponential holding times).
#[derive(Debug, Clone)]
pub struct OccupationFields {
    pub v: Vec<u64>,
    pub w: Vec<f64>,
}

/// Output of one run of the spanning-tree sampler.
#[derive(Debug, Clone)]
pub struct WilsonRun {
    pub tree: SpanningTree,
    /// Erased loops across all branches, in base-point discovery order.
    pub erased: Vec<ErasedLoop>,
    pub occupation: OccupationFields,
}

impl WilsonRun {
    pub fn loops_were_erased(&self) -> bool {
        !self.erased.is_empty()
    }
}

fn step(network: &Network, v: VertexId, rng: &mut impl Rng) -> (usize, VertexId) {
    let lam = network.lambda(v);
    let mut u: f64 = rng.gen::<f64>() * lam;
    let incident = network.incident_edges(v);
    for &eid in incident {
        let e = &network.edges()[eid];
        u -= e.c;
        if u <= 0.0 {
            return (eid, e.other(v));
        }
    }
    // floating-point slack: take the last edge
    let eid = *incident.last().unwrap();
    (eid, network.edges()[eid].other(v))
}

fn walk_until(
    network: &Network,
    start: VertexId,
    rng: &mut impl Rng,
    absorbing: impl Fn(VertexId) -> bool,
    continuous_time: bool,
) -> Result<WalkPath> {
    let mut vertices = vec![start];
    let mut edges = Vec::new();
    let mut holding = if continuous_time { Some(Vec::new()) } else { None };
    let mut v = start;
    let mut steps: u64 = 0;
    while !absorbing(v) {
        if steps >= STEP_CAP {
            return Err(Error::StepCapExceeded { start, cap: STEP_CAP });
        }
        if let Some(h) = holding.as_mut() {
            let e: f64 = Exp1.sample(rng);
            h.push(e / network.lambda(v));
        }
        let (eid, next) = step(network, v, rng);
        edges.push(eid);
        vertices.push(next);
        v = next;
        steps += 1;
    }
    Ok(WalkPath { vertices, edges, holding })
}

/// Runs the killed random walk from an interior vertex until it hits the
/// boundary.
pub fn run_walk(
    network: &Network,
    start: VertexId,
    rng: &mut impl Rng,
    continuous_time: bool,
) -> Result<WalkPath> {
    if !network.is_interior(start) {
        return Err(Error::InvalidArgument(format!("start {start} is not interior")));
    }
    walk_until(network, start, rng, |v| !network.is_interior(v), continuous_time)
}

/// Chronological loop erasure via the last-exit decomposition. Returns the
/// loop-erased path and the erased loops in base-point order; splicing the
/// loops back (see [`splice`]) reconstructs the input exactly.
pub fn loop_erase(path: &WalkPath) -> (WalkPath, Vec<ErasedLoop>) {
    let t_end = path.vertices.len() - 1;
    let mut last_visit = std::collections::HashMap::new();
    for (t, &v) in path.vertices.iter().enumerate() {
        last_visit.insert(v, t);
    }
    let mut lerw_vertices = Vec::new();
    let mut lerw_edges = Vec::new();
    let mut lerw_holding = path.holding.as_ref().map(|_| Vec::new());
    let mut erased = Vec::new();
    let mut t = 0usize;
    loop {
        let v = path.vertices[t];
        let rho = last_visit[&v];
        if rho > t {
            // erased loop at v: the walk segment [t, rho]
            let segment = WalkPath {
                vertices: path.vertices[t..=rho].to_vec(),
                edges: path.edges[t..rho].to_vec(),
                holding: path.holding.as_ref().map(|h| h[t..rho].to_vec()),
            };
            erased.push(ErasedLoop { base: v, segment });
        }
        lerw_vertices.push(v);
        if rho == t_end {
            break;
        }
        lerw_edges.push(path.edges[rho]);
        if let (Some(out), Some(h)) = (lerw_holding.as_mut(), path.holding.as_ref()) {
            out.push(h[rho]);
        }
        t = rho + 1;
    }
    (WalkPath { vertices: lerw_vertices, edges: lerw_edges, holding: lerw_holding }, erased)
}

/// Inverse of [`loop_erase`]: re-inserts each erased loop at its base
/// point along the loop-erased path.
pub fn splice(lerw: &WalkPath, erased: &[ErasedLoop]) -> WalkPath {
    let mut by_base: std::collections::HashMap<VertexId, &ErasedLoop> = std::collections::HashMap::new();
    for l in erased {
        by_base.insert(l.base, l);
    }
    let mut vertices = Vec::new();
    let mut edges = Vec::new();
    let mut holding = lerw.holding.as_ref().map(|_| Vec::new());
    for (i, &v) in lerw.vertices.iter().enumerate() {
        if let Some(l) = by_base.get(&v) {
            vertices.extend_from_slice(&l.segment.vertices[..l.segment.vertices.len() - 1]);
            edges.extend_from_slice(&l.segment.edges);
            if let (Some(out), Some(h)) = (holding.as_mut(), l.segment.holding.as_ref()) {
                out.extend_from_slice(h);
            }
        } else {
            vertices.push(v);
        }
        if by_base.contains_key(&v) {
            vertices.push(v);
        }
        if i < lerw.edges.len() {
            edges.push(lerw.edges[i]);
            if let (Some(out), Some(h)) = (holding.as_mut(), lerw.holding.as_ref()) {
                out.push(h[i]);
            }
        }
    }
    WalkPath { vertices, edges, holding }
}

/// One run of the loop-erased branching sampler over the wired graph:
/// produces a uniformly (conductance-)weighted spanning tree, the erased
/// loops, and the walk occupation fields V (and W when
/// `continuous_time`). `ordering` lists interior positions.
pub fn wilson_ust(
    network: &Network,
    ordering: &[usize],
    rng: &mut impl Rng,
    continuous_time: bool,
) -> Result<WilsonRun> {
    let n = network.n_interior();
    if ordering.len() != n || {
        let mut seen = vec![false; n];
        ordering.iter().any(|&i| i >= n || std::mem::replace(&mut seen[i], true))
    } {
        return Err(Error::InvalidArgument("ordering must permute the interior".into()));
    }
    let mut in_tree = vec![false; network.vertex_count()];
    for &b in network.boundary() {
        in_tree[b] = true;
    }
    let mut tree_edges = Vec::new();
    let mut erased_all = Vec::new();
    let mut v_field = vec![0u64; n];
    let mut w_field = vec![0.0; n];

    for (branch, &pos) in ordering.iter().enumerate() {
        let start = network.interior()[pos];
        if in_tree[start] {
            continue;
        }
        let path = walk_until(network, start, rng, |v| in_tree[v], continuous_time)?;
        // occupation: every non-final position of the branch walk
        for (i, &v) in path.vertices[..path.vertices.len() - 1].iter().enumerate() {
            let p = network.interior_position(v).expect("walk interior until absorption");
            v_field[p] += 1;
            if let Some(h) = path.holding.as_ref() {
                w_field[p] += h[i];
            }
        }
        let (lerw, erased) = loop_erase(&path);
        for &eid in &lerw.edges {
            tree_edges.push((eid, branch));
        }
        for &v in &lerw.vertices {
            in_tree[v] = true;
        }
        erased_all.extend(erased);
    }

    Ok(WilsonRun {
        tree: SpanningTree { edges: tree_edges },
        erased: erased_all,
        occupation: OccupationFields { v: v_field, w: w_field },
    })
}

/// Canonical interior ordering 0..n.
pub fn canonical_ordering(network: &Network) -> Vec<usize> {
    (0..network.n_interior()).collect()
}

/// Verifies the exponential-functional identities of the walk occupation
/// fields: `E[exp(-sum k W)]` and `E[prod (1 + k/lambda)^{-V}]` both equal
/// `det L / det(L + diag k)`.
pub fn verify_w_laplace(
    network: &Network,
    k: &[f64],
    replicas: u64,
    seed: u64,
    sigma: f64,
) -> Result<Vec<TestReport>> {
    if k.len() != network.n_interior() {
        return Err(Error::InvalidArgument("k must be defined on the interior".into()));
    }
    let det0 = crate::laplace::det_laplacian(network)?.0;
    let massive = if k.iter().any(|&x| x > 0.0) {
        crate::laplace::det_laplacian(&network.add_mass(k)?)?.0
    } else {
        det0
    };
    let target = det0 / massive;
    let ordering = canonical_ordering(network);
    let mut w_vals = Vec::with_capacity(replicas as usize);
    let mut v_vals = Vec::with_capacity(replicas as usize);
    for r in 0..replicas {
        let mut rng = lane_rng(seed, r, 0);
        let run = wilson_ust(network, &ordering, &mut rng, true)?;
        let wsum: f64 = k
            .iter()
            .zip(&run.occupation.w)
            .map(|(&ki, &wi)| ki * wi)
            .sum();
        w_vals.push((-wsum).exp());
        let mut vprod = 1.0;
        for (i, &ki) in k.iter().enumerate() {
            let lam = network.lambda(network.interior()[i]);
            vprod *= (1.0 + ki / lam).powi(-(run.occupation.v[i] as i32));
        }
        v_vals.push(vprod);
    }
    let (wm, wse) = mean_stderr(&w_vals);
    let (vm, vse) = mean_stderr(&v_vals);
    let anchor = "walk occupation exponential functionals";
    Ok(vec![
        mean_se_test("w-laplace-transform", wm, wse, target, replicas, sigma, anchor),
        mean_se_test("v-laplace-transform", vm, vse, target, replicas, sigma, anchor),
    ])
}

/// KS check that the continuous-time occupation W(x) of the sampler is
/// Exp with mean `G(x,x)`, for `x` placed anywhere in the ordering.
pub fn marginal_w_law(
    network: &Network,
    ordering: &[usize],
    x: usize,
    replicas: u64,
    seed: u64,
    sigma: f64,
) -> Result<TestReport> {
    let g = crate::laplace::green(network)?;
    let mut samples = Vec::with_capacity(replicas as usize);
    for r in 0..replicas {
        let mut rng = lane_rng(seed, r, 0);
        let run = wilson_ust(network, ordering, &mut rng, true)?;
        samples.push(run.occupation.w[x]);
    }
    Ok(ks_test(
        format!("w-marginal-x{x}"),
        &samples,
        exp_cdf(g[(x, x)]),
        sigma,
        "occupation marginal is exponential with Green-diagonal mean",
    ))
}
