//! End-to-end verification suites.
//!
//! Each criterion bundles the statistical and exact checks for one slice
//! of the library into a list of [`TestReport`]s; [`acceptance_suite`]
//! runs all of them. The same functions back the `verify-all` CLI
//! subcommand and the `acceptance` integration test.

use crate::cable::{resample_sign_at, sample_cable_gff, CablePoint};
use crate::error::Result;
use crate::exact::{is_identity, laplacian_exact, RatMatrix};
use crate::field::GffSampler;
use crate::loewner::{
    bump_grid, capacity_estimate, drift_detection, forward_flow, green_depletion_check,
    side_probability, sle4_angle_martingale, sqrt_h, trace, DrivingFunction,
};
use crate::loopsoup::{
    edge_law_check, isomorphism_check, loops_through, mass_loops_through,
    resample_invariance_check, sample_soup, split_check, superpose, thin,
    verify_w_alpha_laplace,
};
use crate::network::Network;
use crate::rng::lane_rng;
use crate::stats::{
    chi2_test, chi2_two_sample, ks_two_sample, mean_se_test, mean_stderr, moment_test,
    TestReport,
};
use crate::wilson::{canonical_ordering, verify_w_laplace, wilson_ust};
use num::rational::BigRational;
use num::One;
use num_complex::Complex64;
use std::f64::consts::PI;

/// One acceptance criterion: a named bundle of reports that passes iff
/// every report passes.
#[derive(Debug, Clone)]
pub struct Criterion {
    pub name: &'static str,
    pub reports: Vec<TestReport>,
}

impl Criterion {
    pub fn pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }

    /// One pass/fail line; failing reports are listed by name.
    pub fn line(&self) -> String {
        if self.pass() {
            format!("{}: PASS ({} checks)", self.name, self.reports.len())
        } else {
            let failing: Vec<&str> = self
                .reports
                .iter()
                .filter(|r| !r.pass)
                .map(|r| r.name.as_str())
                .collect();
            format!(
                "{}: FAIL ({}/{} checks failed: {})",
                self.name,
                failing.len(),
                self.reports.len(),
                failing.join(", ")
            )
        }
    }
}

fn exact_report(name: impl Into<String>, ok: bool, anchor: &str) -> TestReport {
    TestReport::new(name, if ok { 0.0 } else { 1.0 }, 0.0, 1, anchor)
}

fn dev_report(name: impl Into<String>, dev: f64, tol: f64, anchor: &str) -> TestReport {
    TestReport::new(name, dev, tol, 1, anchor)
}

fn rat_select(m: &RatMatrix, keep: &[usize]) -> RatMatrix {
    let mut out = RatMatrix::zero(keep.len());
    for (i, &ki) in keep.iter().enumerate() {
        for (j, &kj) in keep.iter().enumerate() {
            out[(i, j)] = m[(ki, kj)].clone();
        }
    }
    out
}

/// Exact product formula over an elimination ordering, in rationals:
/// `prod_j G_{D minus {x_1..x_{j-1}}}(x_j, x_j)`.
fn rat_green_product(l: &RatMatrix, ordering: &[usize]) -> Result<BigRational> {
    let mut product = BigRational::one();
    for j in 0..ordering.len() {
        let sub = rat_select(l, &ordering[j..]);
        let inv = sub.inverse()?;
        product *= inv[(0, 0)].clone();
    }
    Ok(product)
}

/// Criterion 1: rational-arithmetic identities on the three reference
/// boxes, all with zero tolerance.
pub fn exact_identities() -> Result<Criterion> {
    let cases: [(&str, Vec<usize>, u64); 3] = [
        ("single-site", vec![1, 1], 4),
        ("two-site", vec![2, 1], 15),
        ("square", vec![2, 2], 192),
    ];
    let mut reports = Vec::new();
    for (tag, sides, trees) in cases {
        let net = Network::lattice_box(2, &sides)?;
        let l = laplacian_exact(&net)?;
        let g = l.inverse()?;
        reports.push(exact_report(
            format!("green-inverse-{tag}"),
            is_identity(&g.mul(&l)) && is_identity(&l.mul(&g)),
            "G L = L G = I in exact rationals",
        ));
        let det_l = l.det();
        reports.push(exact_report(
            format!("det-reciprocal-{tag}"),
            g.det() * &det_l == BigRational::one(),
            "det G . det L = 1 in exact rationals",
        ));
        // product formula, exact and order-independent
        let n = net.n_interior();
        let forward: Vec<usize> = (0..n).collect();
        let backward: Vec<usize> = (0..n).rev().collect();
        let det_g = g.det();
        let pf = rat_green_product(&l, &forward)?;
        let pb = rat_green_product(&l, &backward)?;
        reports.push(exact_report(
            format!("green-product-{tag}"),
            pf == det_g && pb == det_g,
            "elimination product formula for det G, order independent",
        ));
        // tree count: (2d)^n det L against brute-force enumeration
        let (count, weight) = crate::laplace::enumerate_spanning_trees(&net.contract_boundary())?;
        let coord = BigRational::from_integer(4.into());
        let mut scale = BigRational::one();
        for _ in 0..n {
            scale *= &coord;
        }
        reports.push(exact_report(
            format!("tree-count-{tag}"),
            count == trees && scale * &det_l == BigRational::from_integer(trees.into()),
            "matrix-tree count equals brute-force enumeration",
        ));
        reports.push(exact_report(
            format!("tree-weight-{tag}"),
            weight == det_l,
            "total spanning tree weight equals det L",
        ));
    }
    Ok(Criterion { name: "1 exact identities", reports })
}

/// Criterion 2: the four Laplace-transform identities against the
/// determinant-ratio targets.
pub fn laplace_transforms(replicas: u64, seed: u64, sigma: f64) -> Result<Criterion> {
    let mut reports = Vec::new();
    let cases: [(&str, Vec<usize>, Vec<f64>); 2] = [
        ("two-site", vec![2, 1], vec![1.0, 0.0]),
        ("square", vec![2, 2], vec![0.5, 0.25, 0.0, 1.0]),
    ];
    for (tag, sides, k) in cases {
        let net = Network::lattice_box(2, &sides)?;
        let det0 = crate::laplace::det_laplacian(&net)?.0;
        let detk = crate::laplace::det_laplacian(&net.add_mass(&k)?)?.0;
        let ratio = det0 / detk;
        if tag == "two-site" {
            reports.push(dev_report(
                "det-ratio-two-site-15-31",
                (ratio - 15.0 / 31.0).abs(),
                1e-12,
                "closed-form determinant ratio for the two-site mass vector",
            ));
        }
        // squared-field transform: E[exp(-1/2 sum k Gamma^2)] = sqrt(ratio)
        let sampler = GffSampler::new(&net, &vec![0.0; net.boundary().len()])?;
        let mut vals = Vec::with_capacity(replicas as usize);
        for r in 0..replicas {
            let mut rng = lane_rng(seed, r, 13);
            let f = sampler.sample(&mut rng);
            let s: f64 =
                k.iter().zip(&f.values).map(|(&ki, &fi)| ki * fi * fi).sum();
            vals.push((-0.5 * s).exp());
        }
        let (m, se) = mean_stderr(&vals);
        reports.push(mean_se_test(
            format!("gamma-laplace-{tag}"),
            m,
            se,
            ratio.sqrt(),
            replicas,
            sigma,
            "squared-field exponential functional",
        ));
        // walk occupation transforms (continuous W and discrete V)
        reports.extend(verify_w_laplace(&net, &k, replicas, seed, sigma)?);
        // soup occupation transforms
        for alpha in [0.5, 1.0] {
            reports.push(verify_w_alpha_laplace(&net, alpha, &k, replicas, seed, sigma)?);
        }
    }
    Ok(Criterion { name: "2 laplace transforms", reports })
}

/// Criterion 3: the three occupation/field coupling laws.
pub fn coupling_laws(replicas: u64, seed: u64, sigma: f64) -> Result<Criterion> {
    let net = Network::lattice_box(2, &[2, 1])?;
    let n = net.n_interior();
    let g = crate::laplace::green(&net)?;
    let ordering = canonical_ordering(&net);
    let sampler = GffSampler::new(&net, &vec![0.0; net.boundary().len()])?;
    let mut reports = Vec::new();

    // W == (Gamma_1^2 + Gamma_2^2) / 2 per site, plus joint moments, and
    // V - 1 == soup visits at alpha = 1 per site
    let cutoff = 8usize;
    let mut w_site = vec![Vec::with_capacity(replicas as usize); n];
    let mut gg_site = vec![Vec::with_capacity(replicas as usize); n];
    let mut v_counts = vec![vec![0.0; cutoff + 1]; n];
    let mut soup_counts = vec![vec![0.0; cutoff + 1]; n];
    for r in 0..replicas {
        let mut rng = lane_rng(seed, r, 11);
        let run = wilson_ust(&net, &ordering, &mut rng, true)?;
        let f1 = sampler.sample(&mut rng);
        let f2 = sampler.sample(&mut rng);
        let soup = sample_soup(&net, 1.0, &mut rng)?;
        let occ = soup.occupation(&net, &mut rng);
        for i in 0..n {
            w_site[i].push(run.occupation.w[i]);
            gg_site[i]
                .push((f1.values[i] * f1.values[i] + f2.values[i] * f2.values[i]) / 2.0);
            v_counts[i][((run.occupation.v[i] - 1) as usize).min(cutoff)] += 1.0;
            soup_counts[i][(occ.v[i] as usize).min(cutoff)] += 1.0;
        }
    }
    for i in 0..n {
        reports.push(ks_two_sample(
            format!("walk-occupation-ks-site{i}"),
            &w_site[i],
            &gg_site[i],
            sigma,
            "walk occupation vs half the sum of two squared fields",
        ));
        reports.push(chi2_two_sample(
            format!("visit-coupling-site{i}"),
            &v_counts[i],
            &soup_counts[i],
            sigma,
            "walk visits minus one vs unit-intensity soup visits",
        ));
    }
    for x in 0..n {
        for y in (x + 1)..n {
            let target = g[(x, x)] * g[(y, y)] + g[(x, y)] * g[(x, y)];
            for (tag, data) in [("walk", &w_site), ("fields", &gg_site)] {
                let prods: Vec<f64> =
                    data[x].iter().zip(&data[y]).map(|(&a, &b)| a * b).collect();
                reports.push(moment_test(
                    format!("walk-occupation-joint-{tag}-{x}-{y}"),
                    &prods,
                    target,
                    sigma,
                    "pairwise second moment of the coupled occupations",
                ));
            }
        }
    }
    // half-intensity soup occupation vs half a single squared field
    reports.extend(isomorphism_check(&net, replicas, seed, sigma)?);
    Ok(Criterion { name: "3 coupling laws", reports })
}

/// Criterion 4: Poissonian structure of the loop soup.
pub fn soup_structure(replicas: u64, seed: u64, sigma: f64) -> Result<Criterion> {
    let net = Network::lattice_box(2, &[2, 2])?;
    let det_g = 1.0 / crate::laplace::det_laplacian(&net)?.0;
    let mut reports = Vec::new();
    // empty-soup probability (det G)^{-alpha}
    for (j, alpha) in [0.5, 1.0, 2.0].into_iter().enumerate() {
        let target = det_g.powf(-alpha);
        let mut vals = Vec::with_capacity(replicas as usize);
        for r in 0..replicas {
            let mut rng = lane_rng(seed ^ ((j as u64 + 1) << 40), r, 14);
            let soup = sample_soup(&net, alpha, &mut rng)?;
            vals.push(if soup.loops.is_empty() { 1.0 } else { 0.0 });
        }
        let (m, se) = mean_stderr(&vals);
        reports.push(mean_se_test(
            format!("empty-soup-a{alpha}"),
            m,
            se,
            target,
            replicas,
            sigma,
            "no-loop probability is a determinant power",
        ));
    }
    // loop count through a fixed site is Poisson(log G(x,x))
    let x = 0usize;
    let mean = mass_loops_through(&net, x, &[])?;
    let cap = 7usize;
    let mut counts = vec![0.0; cap + 1];
    for r in 0..replicas {
        let mut rng = lane_rng(seed ^ (7 << 40), r, 14);
        let soup = sample_soup(&net, 1.0, &mut rng)?;
        counts[loops_through(&soup, &net, x).min(cap)] += 1.0;
    }
    let mut expected: Vec<f64> = (0..cap)
        .map(|j| {
            let logp = -mean + j as f64 * mean.ln()
                - (1..=j).map(|i| (i as f64).ln()).sum::<f64>();
            logp.exp() * replicas as f64
        })
        .collect();
    expected.push(replicas as f64 - expected.iter().sum::<f64>());
    reports.push(chi2_test(
        "loop-count-poisson",
        &counts,
        &expected,
        0,
        sigma,
        "per-site loop count is Poisson with mean log G(x,x)",
    ));
    // exact splitting identity for k <= 12
    let ok = (1..=12).all(|k| matches!(split_check(k).map(|v| v.is_one()), Ok(true)));
    reports.push(exact_report(
        "split-identity-k-le-12",
        ok,
        "permutation splitting of an erased loop exactly recovers the soup intensity",
    ));
    // thinning + superposition reconstructs the unit soup
    let cap = 6usize;
    let mut direct = vec![0.0; cap + 1];
    let mut rebuilt = vec![0.0; cap + 1];
    for r in 0..replicas {
        let mut rng = lane_rng(seed ^ (9 << 40), r, 14);
        let a = sample_soup(&net, 1.0, &mut rng)?;
        direct[a.loops.len().min(cap)] += 1.0;
        let h1 = thin(&sample_soup(&net, 1.0, &mut rng)?, 0.5, &mut rng);
        let h2 = thin(&sample_soup(&net, 1.0, &mut rng)?, 0.5, &mut rng);
        rebuilt[superpose(&h1, &h2).loops.len().min(cap)] += 1.0;
    }
    reports.push(chi2_two_sample(
        "thin-superpose-reconstruction",
        &rebuilt,
        &direct,
        sigma,
        "half-thinned independent soups superpose to the unit soup",
    ));
    Ok(Criterion { name: "4 soup structure", reports })
}

/// Criterion 5: the product law of the unoriented edge-occupation field
/// and its pairing-resampling invariance.
pub fn edge_field(replicas: u64, seed: u64, sigma: f64) -> Result<Criterion> {
    let net = Network::lattice_box(2, &[2, 2])?;
    let mut reports = edge_law_check(&net, replicas, seed, sigma, 8)?;
    reports.extend(resample_invariance_check(&net, replicas.min(200_000), seed, sigma)?);
    Ok(Criterion { name: "5 edge occupation law", reports })
}

/// Criterion 6: cable-field laws — midpoint law, sign-flip invariance,
/// and the subdivided occupation coupling.
pub fn cable_laws(replicas: u64, seed: u64, sigma: f64) -> Result<Criterion> {
    let net = Network::lattice_box(2, &[2, 1])?;
    Ok(Criterion { name: "6 cable field", reports: cable_laws_on(&net, replicas, seed, sigma)? })
}

/// The cable-field checks of criterion 6, on an arbitrary network.
pub fn cable_laws_on(
    net: &Network,
    replicas: u64,
    seed: u64,
    sigma: f64,
) -> Result<Vec<TestReport>> {
    let mut reports = Vec::new();
    // midpoint of each edge vs the 2-subdivided vertex field
    let (sub, map) = net.subdivide_with_map(2)?;
    let g_sub = crate::laplace::green(&sub)?;
    let sub_sampler = GffSampler::new(&sub, &vec![0.0; sub.boundary().len()])?;
    let probe_edges: Vec<usize> = vec![0, net.edges().len() - 1];
    let mut cable_mid = vec![Vec::with_capacity(replicas as usize); probe_edges.len()];
    let mut vertex_mid = vec![Vec::with_capacity(replicas as usize); probe_edges.len()];
    for r in 0..replicas {
        let mut rng = lane_rng(seed, r, 15);
        let field = sample_cable_gff(net, 2, &mut rng)?;
        let f_sub = sub_sampler.sample(&mut rng);
        for (j, &e) in probe_edges.iter().enumerate() {
            cable_mid[j]
                .push(field.value_at(net, CablePoint::EdgeInterior { edge: e, index: 0 }));
            vertex_mid[j].push(f_sub.at(&sub, map[e][0]));
        }
    }
    for (j, &e) in probe_edges.iter().enumerate() {
        reports.push(ks_two_sample(
            format!("cable-midpoint-ks-edge{e}"),
            &cable_mid[j],
            &vertex_mid[j],
            sigma,
            "bridge midpoint law equals the subdivided vertex field",
        ));
        let sq: Vec<f64> = cable_mid[j].iter().map(|&v| v * v).collect();
        let target = sub
            .interior_position(map[e][0])
            .map(|i| g_sub[(i, i)])
            .unwrap_or(0.0);
        reports.push(moment_test(
            format!("cable-midpoint-var-edge{e}"),
            &sq,
            target,
            sigma,
            "bridge midpoint variance equals the subdivided Green diagonal",
        ));
    }
    // anchored sign flip: paired product difference is centred, flipped
    // anchor third moment vanishes exactly
    let x1 = CablePoint::Vertex(net.interior()[0]);
    let n_flip = replicas.min(40_000);
    let paired = net.n_interior() >= 2;
    let mut diffs = Vec::with_capacity(n_flip as usize);
    let mut thirds = Vec::with_capacity(n_flip as usize);
    for r in 0..n_flip {
        let mut rng = lane_rng(seed ^ (3 << 40), r, 15);
        let field = sample_cable_gff(net, 1024, &mut rng)?;
        let flipped = resample_sign_at(net, &field, x1, &mut rng)?;
        if paired {
            let orig = field.vertex.values[0] * field.vertex.values[1];
            diffs.push(flipped.vertex.values[0] * flipped.vertex.values[1] - orig);
        }
        thirds.push(flipped.vertex.values[0].powi(3));
    }
    if paired {
        reports.push(moment_test(
            "cable-sign-flip-product",
            &diffs,
            0.0,
            sigma,
            "anchored excursion sign flip preserves the field law",
        ));
    }
    reports.push(moment_test(
        "cable-sign-flip-third-moment",
        &thirds,
        0.0,
        sigma,
        "anchored excursion sign flip preserves the field law",
    ));
    // occupation coupling on the subdivided graph
    for m in [1usize, 2] {
        reports.extend(crate::cable::occupation_coupling_subdivided(
            net,
            m,
            replicas.min(60_000),
            seed ^ ((m as u64) << 44),
            sigma,
        )?);
    }
    Ok(reports)
}

/// Criterion 7: chordal Loewner closed forms, the driving-speed-4 angle
/// martingale with drift detection, side probabilities, and the pathwise
/// Green-depletion identity.
pub fn loewner_sle(replicas: u64, seed: u64, sigma: f64) -> Result<Criterion> {
    let mut reports = Vec::new();
    // zero-driving closed form: g_t(z) = sqrt(z^2 + 4t)
    let driving = DrivingFunction::constant(0.0, 1e-3, 1000);
    // points chosen off the limiting slit [0, 2i]
    let zs = [
        Complex64::new(1.0, 1.0),
        Complex64::new(0.3, 2.5),
        Complex64::new(-0.5, 1.5),
    ];
    let flow = forward_flow(&driving, &zs, 1000)?;
    let dev = zs
        .iter()
        .zip(&flow)
        .map(|(&z, p)| {
            let exact = sqrt_h(z * z + Complex64::new(4.0, 0.0));
            (p.f - exact).norm() / exact.norm()
        })
        .fold(0.0f64, f64::max);
    reports.push(dev_report(
        "flow-closed-form",
        dev,
        1e-8,
        "slit-map flow matches the square-root solution for constant driving",
    ));
    // zero-driving trace is the vertical slit 2 i sqrt(t)
    let dt = 1e-4;
    let driving = DrivingFunction::constant(0.0, dt, 10_000);
    let curve = trace(&driving);
    let dev = [(10_000usize, 1.0f64), (5_000, 0.5)]
        .iter()
        .map(|&(i, t)| {
            let target = Complex64::new(0.0, 2.0 * t.sqrt());
            (curve.points[i] - target).norm() / target.norm()
        })
        .fold(0.0f64, f64::max);
    reports.push(dev_report(
        "trace-vertical-slit",
        dev,
        1e-4,
        "reverse-flow trace of zero driving is the vertical slit",
    ));
    // capacity normalization 2t
    let cap = capacity_estimate(&DrivingFunction::constant(0.0, 1e-3, 500), 500)?;
    reports.push(dev_report(
        "capacity-normalization",
        (cap - 1.0).abs(),
        1e-4,
        "half-plane capacity grows at rate 2",
    ));
    // angle martingale at driving speed 4; drift off speed
    let dt = 1e-3;
    let z_side = Complex64::from_polar(1.0, 2.0 * PI / 3.0);
    reports.extend(sle4_angle_martingale(
        replicas,
        &[Complex64::new(0.0, 1.0), z_side],
        &[0.25, 0.5],
        dt,
        seed,
        sigma,
    )?);
    for kappa in [2.0, 6.0] {
        reports.push(drift_detection(kappa, replicas, z_side, 0.5, dt, seed ^ 0xd1, sigma)?);
    }
    // side probabilities 1/2, 2/3, 1/6
    let side_points = [
        (Complex64::new(0.0, 1.0), 0.5),
        (z_side, 2.0 / 3.0),
        (Complex64::from_polar(1.0, PI / 6.0), 1.0 / 6.0),
    ];
    let n_side = replicas.max(20_000);
    for (j, &(z, target)) in side_points.iter().enumerate() {
        let est = side_probability(n_side, z, 50.0, 1e-3, seed ^ ((j as u64) << 48))?;
        reports.push(mean_se_test(
            format!("side-probability-{j}"),
            est.p,
            est.se,
            target,
            n_side,
            sigma,
            "limiting side frequency equals the initial angle over pi",
        ));
    }
    // pathwise Green depletion at dt = 1e-4
    let (points, weights) = bump_grid(0.0, 2.0, 0.75, 8);
    let mut rng = lane_rng(seed, 0, 7);
    let driving = DrivingFunction::sle(4.0, 1e-4, 1_000, &mut rng);
    let (_, _, dev) = green_depletion_check(&driving, 1_000, &points, &weights)?;
    reports.push(dev_report(
        "green-depletion",
        dev,
        1e-2,
        "hull growth depletes the half-plane Green function at the local-intensity rate",
    ));
    Ok(Criterion { name: "7 loewner evolution", reports })
}

/// Criterion 8: spectral continuum field — exact mode-sum identities,
/// circle-average Brownian structure, and the multiplicative-chaos
/// measures.
pub fn continuum_lqg(replicas: u64, seed: u64, sigma: f64) -> Result<Criterion> {
    use crate::continuum::*;
    let mut reports = Vec::new();
    // mode-sum identities, deterministic: circle-average variance via the
    // Bessel weight against brute-force double quadrature
    let m = 40;
    let z = (0.5, 0.5);
    let mut dev = 0.0f64;
    for &r in &[0.05, 0.1, 0.2] {
        let fast = circle_average_variance(m, z, r);
        let mut slow = 0.0;
        let quad = 96;
        for i1 in 1..=m {
            for i2 in 1..=m {
                let lam = eigenvalue(i1, i2);
                let mut avg = 0.0;
                for q in 0..quad {
                    let ang = 2.0 * PI * (q as f64 + 0.5) / quad as f64;
                    avg += eigenfunction(i1, i2, (z.0 + r * ang.cos(), z.1 + r * ang.sin()));
                }
                avg /= quad as f64;
                slow += avg * avg / lam;
            }
        }
        dev = dev.max((fast - slow).abs());
    }
    reports.push(dev_report(
        "circle-variance-mode-sum",
        dev,
        1e-8,
        "Bessel-weighted mode sum equals direct circle quadrature",
    ));
    // variance of the lowest-mode functional: 1 / (2 pi^2)
    let mut unit = nalgebra::DMatrix::zeros(1, 1);
    unit[(0, 0)] = 1.0;
    reports.push(dev_report(
        "lowest-mode-variance",
        (functional_variance(&unit) - 1.0 / (2.0 * PI * PI)).abs(),
        1e-14,
        "lowest-mode variance is 1 / (2 pi^2)",
    ));
    // circle-average increments: log-linearity with the reported constant
    let radii = [0.04, 0.02, 0.01, 0.005];
    let (constant, lin_report) = increment_log_linearity(z, &radii, 600, 0.1)?;
    reports.push(lin_report);
    reports.push(dev_report(
        "log-linearity-constant",
        (constant - 1.0 / (2.0 * PI)).abs(),
        0.1 / (2.0 * PI),
        "increment variance per log-radius approaches 1 / (2 pi)",
    ));
    // Brownian structure: centred increments, oracle variances, annuli and
    // centre decorrelation
    reports.extend(brownian_structure_check(
        z,
        (0.2, 0.2),
        &[0.2, 0.1, 0.05, 0.025],
        48,
        replicas,
        seed,
        sigma,
    )?);
    // normalized measures: mean total mass 1 below criticality
    reports.extend(lqg_report(
        &[0.5, 1.0, 1.5],
        &[3, 4, 5],
        replicas.min(2_000),
        seed,
        sigma,
    )?);
    // degeneracy past criticality
    // Threshold fixed by a pre-run across independent seeds: the
    // supercritical ratio sits near 0.62 and the subcritical control
    // (gamma = 1.5) near 0.97, so 0.8 separates the two regimes with
    // margin on both sides.
    reports.push(lqg_degeneracy_report(2.2, 4, 8, replicas.min(400), seed, 0.8)?);
    Ok(Criterion { name: "8 continuum and measures", reports })
}

/// Replica budgets per criterion at the default (CI) scale.
#[derive(Debug, Clone, Copy)]
pub struct Scale {
    pub laplace: u64,
    pub coupling: u64,
    pub soup: u64,
    pub edge: u64,
    pub cable: u64,
    pub loewner: u64,
    pub continuum: u64,
}

impl Scale {
    pub fn ci() -> Self {
        Scale {
            laplace: 200_000,
            coupling: 150_000,
            soup: 100_000,
            edge: 1_000_000,
            cable: 100_000,
            loewner: 20_000,
            continuum: 30_000,
        }
    }

    /// Reduced budgets for smoke runs; not a substitute for acceptance.
    pub fn quick() -> Self {
        Scale {
            laplace: 20_000,
            coupling: 20_000,
            soup: 20_000,
            edge: 100_000,
            cable: 20_000,
            loewner: 4_000,
            continuum: 5_000,
        }
    }
}

/// Runs all eight acceptance criteria.
pub fn acceptance_suite(scale: Scale, seed: u64, sigma: f64) -> Result<Vec<Criterion>> {
    Ok(vec![
        exact_identities()?,
        laplace_transforms(scale.laplace, seed ^ 0x02, sigma)?,
        coupling_laws(scale.coupling, seed ^ 0x03, sigma)?,
        soup_structure(scale.soup, seed ^ 0x04, sigma)?,
        edge_field(scale.edge, seed ^ 0x05, sigma)?,
        cable_laws(scale.cable, seed ^ 0x06, sigma)?,
        loewner_sle(scale.loewner, seed ^ 0x07, sigma)?,
        continuum_lqg(scale.continuum, seed ^ 0x08, sigma)?,
    ])
}
