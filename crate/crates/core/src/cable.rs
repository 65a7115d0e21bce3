//! Gaussian field on the cable system of a network.
//!
//! The cable system replaces each edge of conductance `c` by an interval of
//! length `1/c`; the cable field takes the vertex field on the network and
//! fills each interval with an independent Brownian bridge between the two
//! endpoint values. The discretized field stores `m - 1` equally spaced
//! interior samples per edge. With this normalization the marginal at an
//! edge point at fraction `k/m` coincides in law with the vertex field of
//! the `m`-subdivided network at the corresponding new vertex, which is the
//! route used to couple the cable field with soup occupation fields.

use crate::error::{Error, Result};
use crate::field::{FieldSample, GffSampler};
use crate::network::{Network, VertexId};
use crate::stats::TestReport;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// A sample point of the discretized cable system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CablePoint {
    Vertex(VertexId),
    /// `index` in `0..m-1`, at fraction `(index + 1) / m` of the edge,
    /// measured from endpoint `a`.
    EdgeInterior { edge: usize, index: usize },
}

/// A discretized cable field: vertex values plus per-edge bridge samples.
#[derive(Debug, Clone)]
pub struct CableField {
    /// Samples per edge segment; each edge carries `m - 1` interior values.
    pub m: usize,
    pub vertex: FieldSample,
    /// `bridges[e][i]` is the value at fraction `(i + 1) / m` of edge `e`.
    pub bridges: Vec<Vec<f64>>,
    /// Interval length per edge (`1 / c`).
    pub lengths: Vec<f64>,
}

impl CableField {
    pub fn value_at(&self, network: &Network, p: CablePoint) -> f64 {
        match p {
            CablePoint::Vertex(v) => self.vertex.at(network, v),
            CablePoint::EdgeInterior { edge, index } => self.bridges[edge][index],
        }
    }

    fn negate_at(&mut self, network: &Network, p: CablePoint) {
        match p {
            CablePoint::Vertex(v) => {
                if let Some(i) = network.interior_position(v) {
                    self.vertex.values[i] = -self.vertex.values[i];
                } else {
                    let i = network.boundary_position(v).expect("valid vertex");
                    self.vertex.boundary_values[i] = -self.vertex.boundary_values[i];
                }
            }
            CablePoint::EdgeInterior { edge, index } => {
                self.bridges[edge][index] = -self.bridges[edge][index];
            }
        }
    }

    /// All sample points in a fixed deterministic order.
    pub fn points(&self, network: &Network) -> Vec<CablePoint> {
        let mut out: Vec<CablePoint> =
            (0..network.vertex_count()).map(CablePoint::Vertex).collect();
        for e in 0..network.edges().len() {
            for i in 0..self.m.saturating_sub(1) {
                out.push(CablePoint::EdgeInterior { edge: e, index: i });
            }
        }
        out
    }
}

/// Samples a discrete Brownian bridge over an interval of length `len`
/// between values `u0` and `u1`, returning the `m - 1` interior values at
/// fractions `k/m`.
pub fn sample_bridge(
    len: f64,
    u0: f64,
    u1: f64,
    m: usize,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.saturating_sub(1));
    let dx = len / m as f64;
    let mut u = u0;
    for k in 1..m {
        let remaining = len - (k - 1) as f64 * dx;
        let mean = u + (u1 - u) * dx / remaining;
        let var = dx * (remaining - dx) / remaining;
        let z: f64 = StandardNormal.sample(rng);
        u = mean + var.sqrt() * z;
        out.push(u);
    }
    out
}

/// Samples a cable field with zero boundary values and `m` segments per
/// edge.
pub fn sample_cable_gff(network: &Network, m: usize, rng: &mut impl Rng) -> Result<CableField> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be >= 1".into()));
    }
    let sampler = GffSampler::new(network, &vec![0.0; network.boundary().len()])?;
    sample_cable_with(network, &sampler, m, rng)
}

/// Samples a cable field reusing a prepared vertex sampler.
pub fn sample_cable_with(
    network: &Network,
    sampler: &GffSampler,
    m: usize,
    rng: &mut impl Rng,
) -> Result<CableField> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be >= 1".into()));
    }
    let vertex = sampler.sample(rng);
    let mut bridges = Vec::with_capacity(network.edges().len());
    let mut lengths = Vec::with_capacity(network.edges().len());
    for e in network.edges() {
        let len = 1.0 / e.c;
        let u0 = vertex.at(network, e.a);
        let u1 = vertex.at(network, e.b);
        bridges.push(sample_bridge(len, u0, u1, m, rng));
        lengths.push(len);
    }
    Ok(CableField { m, vertex, bridges, lengths })
}

/// A maximal connected set of same-sign sample points of the discretized
/// cable.
#[derive(Debug, Clone, PartialEq)]
pub struct Excursion {
    /// +1 or -1.
    pub sign: i8,
    pub points: Vec<CablePoint>,
}

fn point_index(network: &Network, m: usize, p: CablePoint) -> usize {
    match p {
        CablePoint::Vertex(v) => v,
        CablePoint::EdgeInterior { edge, index } => {
            network.vertex_count() + edge * (m - 1) + index
        }
    }
}

/// Sign components of the cable: maximal connected sets of constant
/// nonzero sign, cut at zero-valued points and at sign changes between
/// consecutive samples.
pub fn excursions(network: &Network, field: &CableField) -> Vec<Excursion> {
    let m = field.m;
    let per_edge = m - 1;
    let n_points = network.vertex_count() + network.edges().len() * per_edge;
    let mut value = vec![0.0; n_points];
    let mut point = Vec::with_capacity(n_points);
    for v in 0..network.vertex_count() {
        let p = CablePoint::Vertex(v);
        value[v] = field.value_at(network, p);
        point.push(p);
    }
    for e in 0..network.edges().len() {
        for i in 0..per_edge {
            let p = CablePoint::EdgeInterior { edge: e, index: i };
            value[point_index(network, m, p)] = field.value_at(network, p);
            point.push(p);
        }
    }
    // adjacency along each edge chain a - s_0 - ... - s_{m-2} - b
    let mut adj = vec![Vec::new(); n_points];
    for (e, edge) in network.edges().iter().enumerate() {
        let mut chain = vec![point_index(network, m, CablePoint::Vertex(edge.a))];
        for i in 0..per_edge {
            chain.push(point_index(network, m, CablePoint::EdgeInterior { edge: e, index: i }));
        }
        chain.push(point_index(network, m, CablePoint::Vertex(edge.b)));
        for w in chain.windows(2) {
            adj[w[0]].push(w[1]);
            adj[w[1]].push(w[0]);
        }
    }
    let mut component = vec![usize::MAX; n_points];
    let mut out: Vec<Excursion> = Vec::new();
    for start in 0..n_points {
        if component[start] != usize::MAX || value[start] == 0.0 {
            continue;
        }
        let sign = if value[start] > 0.0 { 1i8 } else { -1 };
        let id = out.len();
        let mut stack = vec![start];
        let mut points = Vec::new();
        component[start] = id;
        while let Some(i) = stack.pop() {
            points.push(point[i]);
            for &j in &adj[i] {
                let same = (value[j] > 0.0) == (sign > 0) && value[j] != 0.0;
                if same && component[j] == usize::MAX {
                    component[j] = id;
                    stack.push(j);
                }
            }
        }
        points.sort_unstable();
        out.push(Excursion { sign, points });
    }
    out
}

/// Negates the field on a fixed set of points; applying it twice with the
/// same excursion restores the field bit-exactly.
pub fn negate_on(network: &Network, field: &CableField, exc: &Excursion) -> CableField {
    let mut out = field.clone();
    for &p in &exc.points {
        out.negate_at(network, p);
    }
    out
}

/// Negates the field on one excursion of the input field.
pub fn flip_excursion(
    network: &Network,
    field: &CableField,
    excursion_id: usize,
) -> Result<CableField> {
    let exc = excursions(network, field);
    let exc = exc
        .get(excursion_id)
        .ok_or_else(|| Error::InvalidArgument(format!("no excursion {excursion_id}")))?;
    Ok(negate_on(network, field, exc))
}

/// Flips the sign of the excursion containing `x` with probability 1/2
/// (no-op when `x` sits on the zero set); leaves the law of the field
/// invariant.
pub fn resample_sign_at(
    network: &Network,
    field: &CableField,
    x: CablePoint,
    rng: &mut impl Rng,
) -> Result<CableField> {
    let exc = excursions(network, field);
    let Some(id) = exc.iter().position(|e| e.points.binary_search(&x).is_ok()) else {
        return Ok(field.clone());
    };
    if rng.gen::<bool>() {
        let mut out = field.clone();
        for &p in &exc[id].points {
            out.negate_at(network, p);
        }
        Ok(out)
    } else {
        Ok(field.clone())
    }
}

/// Flips every excursion independently with probability 1/2.
pub fn resample_signs(
    network: &Network,
    field: &CableField,
    rng: &mut impl Rng,
) -> CableField {
    let exc = excursions(network, field);
    let mut out = field.clone();
    for e in &exc {
        if rng.gen::<bool>() {
            for &p in &e.points {
                out.negate_at(network, p);
            }
        }
    }
    out
}

/// Couples the half-squared cable field with the soup occupation field on
/// the `m`-subdivided network: at every subdivided-network interior vertex
/// (original vertices and edge interior points) the law of
/// `W_{1/2}` must match `Gamma_cable^2 / 2` (per-point KS). Also records
/// the vertex-variance normalization constant (empirical
/// `Var Gamma_cable(x) / G(x, x)`, expected 1).
pub fn occupation_coupling_subdivided(
    network: &Network,
    m: usize,
    replicas: u64,
    seed: u64,
    sigma: f64,
) -> Result<Vec<TestReport>> {
    if !matches!(m, 1 | 2 | 4) {
        return Err(Error::InvalidArgument("m must be 1, 2, or 4".into()));
    }
    let (sub, map) = network.subdivide_with_map(m)?;
    // correspondence: subdivided interior position -> cable point
    let mut pairs: Vec<(usize, CablePoint)> = Vec::new();
    for (pos, &v) in sub.interior().iter().enumerate() {
        if v < network.vertex_count() {
            pairs.push((pos, CablePoint::Vertex(v)));
        }
    }
    for (e, chain) in map.iter().enumerate() {
        for (i, &v) in chain.iter().enumerate() {
            let pos = sub.interior_position(v).expect("midpoints are interior");
            pairs.push((pos, CablePoint::EdgeInterior { edge: e, index: i }));
        }
    }
    let sampler = GffSampler::new(network, &vec![0.0; network.boundary().len()])?;
    let g = crate::laplace::green(network)?;
    let mut w_samples = vec![Vec::with_capacity(replicas as usize); pairs.len()];
    let mut c_samples = vec![Vec::with_capacity(replicas as usize); pairs.len()];
    let mut vertex_sq = vec![Vec::with_capacity(replicas as usize); network.n_interior()];
    for r in 0..replicas {
        let mut rng = crate::rng::lane_rng(seed, r, 5);
        let w = crate::loopsoup::w_alpha_sample(&sub, 0.5, &mut rng)?;
        let cable = sample_cable_with(network, &sampler, m, &mut rng)?;
        for (k, &(pos, p)) in pairs.iter().enumerate() {
            w_samples[k].push(w[pos]);
            let v = cable.value_at(network, p);
            c_samples[k].push(v * v / 2.0);
        }
        for i in 0..network.n_interior() {
            vertex_sq[i].push(cable.vertex.values[i] * cable.vertex.values[i]);
        }
    }
    let mut reports = Vec::new();
    for (k, &(_, p)) in pairs.iter().enumerate() {
        reports.push(crate::stats::ks_two_sample(
            format!("cable-coupling-m{m}-point{k:02}"),
            &w_samples[k],
            &c_samples[k],
            sigma,
            "subdivided occupation field vs half squared cable field",
        ));
        let _ = p;
    }
    for i in 0..network.n_interior() {
        reports.push(crate::stats::moment_test(
            format!("cable-vertex-variance-ratio-m{m}-site{i}"),
            &vertex_sq[i].iter().map(|&s| s / g[(i, i)]).collect::<Vec<_>>(),
            1.0,
            sigma,
            "cable covariance normalization constant (reported ratio to the network Green function; value 1 under the unit-length-per-unit-resistance convention)",
        ));
    }
    Ok(reports)
}
