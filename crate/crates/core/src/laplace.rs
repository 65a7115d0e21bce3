//! Linear algebra on networks: Laplacian, Green's function, determinants,
//! spanning-tree weights, the Green determinant product formula, and
//! harmonic extension of boundary data.
//!
//! Conventions: over the canonical interior order, `L[x][x] = lambda_x` and
//! `L[x][y] = -c(x,y)` (all parallel edges summed). `G = L^{-1}` is the
//! continuous-time Green's function: `G(x,y)` is the expected number of
//! discrete visits to `y` by the walk started at `x` and absorbed on the
//! boundary, divided by `lambda_y`. Both formulations share one code path
//! for lattice and general conductances.
//!
//! Matrices are dense below [`DENSE_LIMIT`] interiors (symmetric
//! positive-definite Cholesky); above it, solves fall back to conjugate
//! gradients with a 1e-10 relative residual target.

use crate::error::{Error, Result};
use crate::network::{Network, WiredGraph};
use crate::rng::replica_rng;
use crate::wilson::run_walk;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num::rational::BigRational;
use num::{One, Zero};

/// Crossover from dense factorization to iterative solves.
pub const DENSE_LIMIT: usize = 2000;

/// Relative residual target for Green-function solves.
pub const SOLVE_TOL: f64 = 1e-10;

/// The interior Laplacian of a network as a dense symmetric matrix.
pub fn laplacian(network: &Network) -> DMatrix<f64> {
    let n = network.n_interior();
    let mut l = DMatrix::zeros(n, n);
    for e in network.edges() {
        let (pa, pb) = (network.interior_position(e.a), network.interior_position(e.b));
        if let Some(i) = pa {
            l[(i, i)] += e.c;
        }
        if let Some(j) = pb {
            l[(j, j)] += e.c;
        }
        if let (Some(i), Some(j)) = (pa, pb) {
            l[(i, j)] -= e.c;
            l[(j, i)] -= e.c;
        }
    }
    l
}

/// A factored Laplacian, reusable for repeated solves and sampling.
pub struct LaplaceSystem {
    pub l: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl LaplaceSystem {
    pub fn new(network: &Network) -> Result<Self> {
        let l = laplacian(network);
        let chol = Cholesky::new(l.clone()).ok_or_else(|| {
            Error::LinearAlgebra(
                "network Laplacian is not positive definite (no boundary reachable?)".into(),
            )
        })?;
        Ok(LaplaceSystem { l, chol })
    }

    pub fn n(&self) -> usize {
        self.l.nrows()
    }

    /// Solves `L x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    /// det L via the Cholesky diagonal; also the numerically safe log-det.
    pub fn det(&self) -> (f64, f64) {
        let diag = self.chol.l_dirty();
        let mut log_det = 0.0;
        for i in 0..self.n() {
            log_det += 2.0 * diag[(i, i)].ln();
        }
        (log_det.exp(), log_det)
    }

    /// The lower-triangular Cholesky factor of L (the precision matrix).
    pub fn precision_factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }
}

/// The Green's function `G = L^{-1}`, with the residual `G L = I` verified
/// to [`SOLVE_TOL`].
pub fn green(network: &Network) -> Result<DMatrix<f64>> {
    let sys = LaplaceSystem::new(network)?;
    let n = sys.n();
    if n <= DENSE_LIMIT {
        let mut g = DMatrix::identity(n, n);
        sys.chol.solve_mut(&mut g);
        // enforce exact symmetry (solver output is symmetric to rounding)
        let g = (&g + g.transpose()) * 0.5;
        let resid = (&g * &sys.l - DMatrix::identity(n, n)).norm() / (n as f64).sqrt();
        if resid > 1e-8 {
            return Err(Error::LinearAlgebra(format!(
                "Green residual {resid:.3e} beyond conditioning threshold"
            )));
        }
        Ok(g)
    } else {
        let mut g = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut b = DVector::zeros(n);
            b[j] = 1.0;
            let col = conjugate_gradient(&sys.l, &b, SOLVE_TOL)?;
            g.set_column(j, &col);
        }
        let g = (&g + g.transpose()) * 0.5;
        Ok(g)
    }
}

/// Conjugate gradients for symmetric positive-definite `A x = b`.
fn conjugate_gradient(a: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> Result<DVector<f64>> {
    let n = b.len();
    let mut x = DVector::zeros(n);
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rs = r.dot(&r);
    let b_norm = b.norm().max(f64::MIN_POSITIVE);
    for _ in 0..10 * n {
        if rs.sqrt() / b_norm <= tol {
            return Ok(x);
        }
        let ap = a * &p;
        let alpha = rs / p.dot(&ap);
        x += alpha * &p;
        r -= alpha * &ap;
        let rs_new = r.dot(&r);
        p = &r + (rs_new / rs) * p;
        rs = rs_new;
    }
    Err(Error::LinearAlgebra("conjugate gradients failed to converge".into()))
}

/// `(det L, log det L)`.
pub fn det_laplacian(network: &Network) -> Result<(f64, f64)> {
    Ok(LaplaceSystem::new(network)?.det())
}

/// Total spanning-tree weight of the wired graph, `sum_T prod_{e in T} c_e
/// = det L`, and, for lattice boxes (edge weight 1/(2d)), the exact
/// integer number of wired spanning trees `(2d)^n det L`.
pub fn spanning_tree_weight(network: &Network) -> Result<(f64, Option<u64>)> {
    let (det, log_det) = det_laplacian(network)?;
    let count = match network.lattice_coordination() {
        Some(coord) => {
            let n = network.n_interior() as f64;
            let log_count = n * (coord as f64).ln() + log_det;
            if log_count > 63.0 * std::f64::consts::LN_2 {
                None // representable only in log form
            } else {
                let c = log_count.exp();
                let rounded = c.round();
                if (c - rounded).abs() > 1e-6 * rounded.max(1.0) {
                    return Err(Error::LinearAlgebra(format!(
                        "lattice tree count {c} is not integral"
                    )));
                }
                Some(rounded as u64)
            }
        }
        None => None,
    };
    Ok((det, count))
}

/// Both sides of the Green determinant product formula:
/// `det G_D = prod_j G_{D minus {x_1..x_{j-1}}}(x_j, x_j)` over the given
/// elimination ordering (by interior position). Returns (det G, product,
/// relative deviation).
pub fn green_product_identity(network: &Network, ordering: &[usize]) -> Result<(f64, f64, f64)> {
    let n = network.n_interior();
    if ordering.len() != n || {
        let mut seen = vec![false; n];
        ordering.iter().any(|&i| i >= n || std::mem::replace(&mut seen[i], true))
    } {
        return Err(Error::InvalidArgument("ordering must permute the interior".into()));
    }
    let l = laplacian(network);
    let det_g = 1.0 / LaplaceSystem::new(network)?.det().0;

    let remaining: Vec<usize> = ordering.to_vec();
    let mut product = 1.0;
    for j in 0..n {
        let sub = l.select_rows(&remaining[j..]).select_columns(&remaining[j..]);
        let chol = Cholesky::new(sub)
            .ok_or_else(|| Error::LinearAlgebra("submatrix not positive definite".into()))?;
        let m = remaining.len() - j;
        let mut e = DVector::zeros(m);
        e[0] = 1.0; // the eliminated vertex is first among the remaining
        let col = chol.solve(&e);
        product *= col[0];
    }
    let dev = (det_g - product).abs() / det_g.abs().max(f64::MIN_POSITIVE);
    Ok((det_g, product, dev))
}

/// Harmonic extension of boundary values `f` (indexed by boundary
/// position) to the interior: solves `L F = sum_{y in boundary} c(x,y)
/// f(y)`.
pub fn harmonic_extension(network: &Network, f: &[f64]) -> Result<Vec<f64>> {
    if f.len() != network.boundary().len() {
        return Err(Error::InvalidArgument(format!(
            "expected {} boundary values, got {}",
            network.boundary().len(),
            f.len()
        )));
    }
    let sys = LaplaceSystem::new(network)?;
    let n = sys.n();
    let mut b = DVector::zeros(n);
    for e in network.edges() {
        match (network.interior_position(e.a), network.interior_position(e.b)) {
            (Some(i), None) => b[i] += e.c * f[network.boundary_position(e.b).unwrap()],
            (None, Some(j)) => b[j] += e.c * f[network.boundary_position(e.a).unwrap()],
            _ => {}
        }
    }
    Ok(sys.solve(&b).iter().copied().collect())
}

/// Monte Carlo estimate of `G(x,y)` (continuous-time normalization):
/// discrete visit count to `y` divided by `lambda_y`, averaged over walks
/// from `x`. Returns (estimate, standard error). `x`, `y` are interior
/// positions.
pub fn green_mc(
    network: &Network,
    x: usize,
    y: usize,
    samples: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let vx = network.interior()[x];
    let vy = network.interior()[y];
    let lam_y = network.lambda(vy);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for k in 0..samples {
        let mut rng = replica_rng(seed, k);
        let path = run_walk(network, vx, &mut rng, false)?;
        // visits to y at every step index before absorption
        let visits = path.vertices[..path.vertices.len() - 1]
            .iter()
            .filter(|&&v| v == vy)
            .count() as f64;
        let val = visits / lam_y;
        sum += val;
        sum_sq += val * val;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) / (n - 1.0).max(1.0);
    Ok((mean, var.sqrt()))
}

/// Exhaustively enumerates spanning trees of a wired graph, returning the
/// number of trees and the exact total weight `sum_T prod c_e` as a
/// rational. Exponential — intended for oracle checks on tiny graphs.
pub fn enumerate_spanning_trees(wired: &WiredGraph) -> Result<(u64, BigRational)> {
    let n_vertices = wired.n_interior + 1;
    let m = wired.edges.len();
    if m > 26 {
        return Err(Error::InvalidArgument(format!(
            "{m} edges is too many for exhaustive enumeration"
        )));
    }
    let need = n_vertices - 1;
    let mut count = 0u64;
    let mut total = BigRational::zero();
    let rational_c: Vec<BigRational> = wired
        .edges
        .iter()
        .map(|e| crate::exact::rational_from_f64(e.c))
        .collect::<Result<_>>()?;
    for mask in 0u32..(1 << m) {
        if mask.count_ones() as usize != need {
            continue;
        }
        // union-find acyclicity + spanning check
        let mut parent: Vec<usize> = (0..n_vertices).collect();
        fn find(parent: &mut Vec<usize>, mut v: usize) -> usize {
            while parent[v] != v {
                parent[v] = parent[parent[v]];
                v = parent[v];
            }
            v
        }
        let mut ok = true;
        for i in 0..m {
            if mask & (1 << i) == 0 {
                continue;
            }
            let e = &wired.edges[i];
            let (ra, rb) = (find(&mut parent, e.a), find(&mut parent, e.b));
            if ra == rb {
                ok = false;
                break;
            }
            parent[ra] = rb;
        }
        if !ok {
            continue;
        }
        count += 1;
        let mut w = BigRational::one();
        for i in 0..m {
            if mask & (1 << i) != 0 {
                w *= &rational_c[i];
            }
        }
        total += w;
    }
    Ok((count, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_site() -> Network {
        Network::lattice_box(2, &[2, 1]).unwrap()
    }

    #[test]
    fn two_site_laplacian_and_green() {
        let net = two_site();
        let l = laplacian(&net);
        assert_relative_eq!(l[(0, 0)], 1.0);
        assert_relative_eq!(l[(0, 1)], -0.25);
        let g = green(&net).unwrap();
        assert_relative_eq!(g[(0, 0)], 16.0 / 15.0, epsilon = 1e-12);
        assert_relative_eq!(g[(0, 1)], 4.0 / 15.0, epsilon = 1e-12);
    }

    #[test]
    fn single_site_green_is_one() {
        let net = Network::lattice_box(2, &[1, 1]).unwrap();
        let g = green(&net).unwrap();
        assert_relative_eq!(g[(0, 0)], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn chain_green_matches_bridge_covariance() {
        // Unit chain with boundary {0,3}: G = (1/3)[[2,1],[1,2]],
        // matching the random-walk bridge covariance j(N-j')/N.
        let mut b = crate::network::NetworkBuilder::new();
        let x1 = b.add_interior();
        let x2 = b.add_interior();
        let l0 = b.add_boundary();
        let r0 = b.add_boundary();
        b.add_edge(l0, x1, 1.0);
        b.add_edge(x1, x2, 1.0);
        b.add_edge(x2, r0, 1.0);
        let net = b.build().unwrap();
        let g = green(&net).unwrap();
        assert_relative_eq!(g[(0, 0)], 2.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(g[(0, 1)], 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn determinants() {
        assert_relative_eq!(det_laplacian(&two_site()).unwrap().0, 15.0 / 16.0, epsilon = 1e-12);
        let sq = Network::lattice_box(2, &[2, 2]).unwrap();
        assert_relative_eq!(det_laplacian(&sq).unwrap().0, 0.75, epsilon = 1e-12);
    }

    #[test]
    fn tree_counts_match_enumeration() {
        for (net, expect) in [
            (Network::lattice_box(2, &[1, 1]).unwrap(), 4u64),
            (two_site(), 15),
            (Network::lattice_box(2, &[2, 2]).unwrap(), 192),
        ] {
            let (_, count) = spanning_tree_weight(&net).unwrap();
            assert_eq!(count, Some(expect));
            let (brute, _) = enumerate_spanning_trees(&net.contract_boundary()).unwrap();
            assert_eq!(brute, expect);
        }
    }

    #[test]
    fn product_identity_is_order_independent() {
        let net = Network::lattice_box(2, &[2, 2]).unwrap();
        let (lhs1, rhs1, dev1) = green_product_identity(&net, &[0, 1, 2, 3]).unwrap();
        let (lhs2, rhs2, dev2) = green_product_identity(&net, &[3, 1, 0, 2]).unwrap();
        assert!(dev1 < 1e-9 && dev2 < 1e-9, "devs {dev1} {dev2}");
        assert_relative_eq!(lhs1, lhs2, epsilon = 1e-12);
        assert_relative_eq!(rhs1, rhs2, epsilon = 1e-10);
        assert_relative_eq!(lhs1, 4.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn harmonic_extension_linear_in_1d() {
        let mut b = crate::network::NetworkBuilder::new();
        let x1 = b.add_interior();
        let x2 = b.add_interior();
        let l0 = b.add_boundary();
        let r0 = b.add_boundary();
        b.add_edge(l0, x1, 1.0);
        b.add_edge(x1, x2, 1.0);
        b.add_edge(x2, r0, 1.0);
        let net = b.build().unwrap();
        let f = harmonic_extension(&net, &[0.0, 3.0]).unwrap();
        assert_relative_eq!(f[0], 1.0, epsilon = 1e-10);
        assert_relative_eq!(f[1], 2.0, epsilon = 1e-10);
    }

    #[test]
    fn harmonic_extension_respects_maximum_principle_and_constants() {
        let net = Network::lattice_box(2, &[3, 3]).unwrap();
        let nb = net.boundary().len();
        let f = harmonic_extension(&net, &vec![2.5; nb]).unwrap();
        for v in f {
            assert_relative_eq!(v, 2.5, epsilon = 1e-10);
        }
        let mut vals = vec![0.0; nb];
        vals[0] = 1.0;
        let f = harmonic_extension(&net, &vals).unwrap();
        for v in f {
            assert!(v >= -1e-12 && v <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn two_site_partial_boundary_extension() {
        // f = 1 on the three boundary neighbours of x1, 0 elsewhere:
        // F = (4/5, 1/5).
        let net = two_site();
        let x1 = net.interior()[0];
        let mut f = vec![0.0; net.boundary().len()];
        for &eid in net.incident_edges(x1) {
            let other = net.edges()[eid].other(x1);
            if let Some(bp) = net.boundary_position(other) {
                f[bp] = 1.0;
            }
        }
        let ext = harmonic_extension(&net, &f).unwrap();
        assert_relative_eq!(ext[0], 0.8, epsilon = 1e-10);
        assert_relative_eq!(ext[1], 0.2, epsilon = 1e-10);
    }

    #[test]
    fn massive_determinant_consistency() {
        // det(L + diag k) computed directly equals det of the massive
        // network's Laplacian restricted to the original interior.
        let net = two_site();
        let k = [1.0, 0.5];
        let massive = net.add_mass(&k).unwrap();
        let mut l = laplacian(&net);
        for (i, &ki) in k.iter().enumerate() {
            l[(i, i)] += ki;
        }
        let lm = laplacian(&massive);
        assert_relative_eq!(l.determinant(), lm.determinant(), epsilon = 1e-12);
        assert_relative_eq!(det_laplacian(&massive).unwrap().0, 47.0 / 16.0, epsilon = 1e-12);
        // unit mass at the first site only: det = 2 - 1/16 = 31/16
        let massive = net.add_mass(&[1.0, 0.0]).unwrap();
        assert_relative_eq!(det_laplacian(&massive).unwrap().0, 31.0 / 16.0, epsilon = 1e-12);
    }

    #[test]
    fn green_mc_agrees_with_exact() {
        let net = two_site();
        let g = green(&net).unwrap();
        for (x, y) in [(0, 0), (0, 1)] {
            let (est, se) = green_mc(&net, x, y, 40_000, 11).unwrap();
            assert!(
                (est - g[(x, y)]).abs() < 4.0 * se,
                "G({x},{y}): est {est} exact {} se {se}",
                g[(x, y)]
            );
        }
    }

    #[test]
    fn effective_conductance_invariant_under_subdivision() {
        // Effective conductance to the boundary from a vertex: lambda_x -
        // row sums ... simplest invariant: G at original vertices is
        // unchanged when every edge is subdivided.
        let net = two_site();
        let g0 = green(&net).unwrap();
        for m in [2, 3] {
            let sub = net.subdivide(m).unwrap();
            let g = green(&sub).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert_relative_eq!(g[(i, j)], g0[(i, j)], epsilon = 1e-9);
                }
            }
        }
    }
}
