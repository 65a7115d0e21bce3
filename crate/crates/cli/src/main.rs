//! Command-line driver: runs the simulation experiments and verification
//! suites and writes machine-readable reports.
//!
//! Exit codes: 0 when every check passes, 1 when any check fails, 2 on
//! usage errors. With a fixed configuration and seed the output files are
//! byte-identical across runs; `GFFLAB_THREADS` bounds the worker pool
//! without affecting results.

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gff_lab::laplace;
use gff_lab::network::Network;
use gff_lab::rng::lane_rng;
use gff_lab::stats::{mean_se_test, mean_stderr, moment_test, TestReport};
use gff_lab::verify;
use gff_lab::wilson::{canonical_ordering, marginal_w_law, verify_w_laplace};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "gff-lab", version, about = "Stochastic field simulation and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Network description file (JSON); defaults to the 2x2 lattice box.
    #[arg(long)]
    network: Option<PathBuf>,
    /// Number of Monte Carlo replicas.
    #[arg(long, default_value_t = 50_000)]
    replicas: u64,
    /// Master seed; replica streams are derived deterministically.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Threshold multiplier for the statistical tests.
    #[arg(long, default_value_t = 4.0)]
    sigma: f64,
    /// Report output path (stdout always gets a summary).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report output format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Copy, Clone, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Copy, Clone, ValueEnum)]
enum ScaleArg {
    /// Full acceptance-scale replica budgets.
    Ci,
    /// Reduced budgets for smoke runs.
    Quick,
}

#[derive(Subcommand)]
enum Command {
    /// Green-function and determinant identities on a network.
    Laplace(Common),
    /// Gaussian field sampling moments against the exact covariance.
    Field(Common),
    /// Spanning-tree sampler and walk-occupation transforms.
    Wilson(Common),
    /// Loop-soup occupation laws and the squared-field coupling.
    Soup(Common),
    /// Cable-field laws: midpoint, sign flips, subdivided coupling.
    Cable(Common),
    /// Loewner-evolution closed forms, martingales, and side laws.
    Sle(Common),
    /// Spectral continuum field, circle averages, and chaos measures.
    Lqg(Common),
    /// Run the full acceptance suite.
    VerifyAll {
        #[command(flatten)]
        common: Common,
        /// Replica budget preset.
        #[arg(long, value_enum, default_value_t = ScaleArg::Ci)]
        scale: ScaleArg,
    },
}

fn load_network(path: &Option<PathBuf>) -> Result<Network> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading network file {}", p.display()))?;
            Ok(Network::from_json(&text)?)
        }
        None => Ok(Network::lattice_box(2, &[2, 2])?),
    }
}

fn write_reports(path: &PathBuf, format: Format, reports: &[TestReport]) -> Result<()> {
    let mut f = std::fs::File::create(path)
        .with_context(|| format!("creating {}", path.display()))?;
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut f, reports)?;
            writeln!(f)?;
        }
        Format::Csv => {
            writeln!(f, "name,statistic,threshold,pass,sample_size,anchor")?;
            for r in reports {
                writeln!(
                    f,
                    "{},{},{},{},{},{:?}",
                    r.name, r.statistic, r.threshold, r.pass, r.sample_size, r.anchor
                )?;
            }
        }
    }
    Ok(())
}

fn laplace_reports(net: &Network) -> Result<Vec<TestReport>> {
    let g = laplace::green(net)?;
    let l = laplace::laplacian(net);
    let n = net.n_interior();
    let resid = (&g * &l - nalgebra::DMatrix::identity(n, n)).norm() / (n as f64).sqrt();
    let (det, _) = laplace::det_laplacian(net)?;
    let (_, tree_count) = laplace::spanning_tree_weight(net)?;
    let forward: Vec<usize> = (0..n).collect();
    let backward: Vec<usize> = (0..n).rev().collect();
    let (_, _, dev_f) = laplace::green_product_identity(net, &forward)?;
    let (_, _, dev_b) = laplace::green_product_identity(net, &backward)?;
    let dev = dev_f.max(dev_b);
    println!(
        "{{\"det\": {det}, \"tree_count\": {}, \"product_identity_dev\": {dev:e}}}",
        tree_count.map(|c| c.to_string()).unwrap_or_else(|| "null".into())
    );
    Ok(vec![
        TestReport::new("green-inverse-residual", resid, 1e-10, 1, "G L = I"),
        TestReport::new(
            "green-product-identity",
            dev,
            1e-9,
            1,
            "elimination product formula for det G",
        ),
    ])
}

fn field_reports(net: &Network, replicas: u64, seed: u64, sigma: f64) -> Result<Vec<TestReport>> {
    let g = laplace::green(net)?;
    let n = net.n_interior();
    let sampler = gff_lab::field::GffSampler::new(net, &vec![0.0; net.boundary().len()])?;
    let mut site = vec![Vec::with_capacity(replicas as usize); n];
    for r in 0..replicas {
        let mut rng = lane_rng(seed, r, 12);
        let f = sampler.sample(&mut rng);
        for i in 0..n {
            site[i].push(f.values[i]);
        }
    }
    let mut reports = Vec::new();
    for i in 0..n {
        let sq: Vec<f64> = site[i].iter().map(|&v| v * v).collect();
        reports.push(moment_test(
            format!("field-variance-site{i}"),
            &sq,
            g[(i, i)],
            sigma,
            "field variance equals the Green diagonal",
        ));
    }
    for x in 0..n.min(4) {
        for y in (x + 1)..n.min(4) {
            let prods: Vec<f64> =
                site[x].iter().zip(&site[y]).map(|(&a, &b)| a * b).collect();
            reports.push(moment_test(
                format!("field-covariance-{x}-{y}"),
                &prods,
                g[(x, y)],
                sigma,
                "field covariance equals the Green entry",
            ));
        }
    }
    Ok(reports)
}

fn wilson_reports(net: &Network, replicas: u64, seed: u64, sigma: f64) -> Result<Vec<TestReport>> {
    let k = vec![1.0; net.n_interior()];
    let mut reports = verify_w_laplace(net, &k, replicas, seed, sigma)?;
    reports.push(marginal_w_law(net, &canonical_ordering(net), 0, replicas, seed, sigma)?);
    Ok(reports)
}

fn soup_reports(net: &Network, replicas: u64, seed: u64, sigma: f64) -> Result<Vec<TestReport>> {
    let k = vec![1.0; net.n_interior()];
    let mut reports = Vec::new();
    for alpha in [0.5, 1.0] {
        reports.push(gff_lab::loopsoup::verify_w_alpha_laplace(
            net, alpha, &k, replicas, seed, sigma,
        )?);
    }
    let det_g = 1.0 / laplace::det_laplacian(net)?.0;
    let mut vals = Vec::with_capacity(replicas as usize);
    for r in 0..replicas {
        let mut rng = lane_rng(seed, r, 14);
        let soup = gff_lab::loopsoup::sample_soup(net, 1.0, &mut rng)?;
        vals.push(if soup.loops.is_empty() { 1.0 } else { 0.0 });
    }
    let (m, se) = mean_stderr(&vals);
    reports.push(mean_se_test(
        "empty-soup-probability",
        m,
        se,
        1.0 / det_g,
        replicas,
        sigma,
        "no-loop probability is a determinant power",
    ));
    reports.extend(gff_lab::loopsoup::isomorphism_check(net, replicas, seed, sigma)?);
    Ok(reports)
}

fn run() -> Result<ExitCode> {
    if let Ok(threads) = std::env::var("GFFLAB_THREADS") {
        let n: usize = threads.parse().context("GFFLAB_THREADS must be an integer")?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().ok();
    }
    let cli = Cli::parse();
    let (common, reports): (&Common, Vec<TestReport>) = match &cli.command {
        Command::Laplace(c) => (c, laplace_reports(&load_network(&c.network)?)?),
        Command::Field(c) => {
            (c, field_reports(&load_network(&c.network)?, c.replicas, c.seed, c.sigma)?)
        }
        Command::Wilson(c) => {
            (c, wilson_reports(&load_network(&c.network)?, c.replicas, c.seed, c.sigma)?)
        }
        Command::Soup(c) => {
            (c, soup_reports(&load_network(&c.network)?, c.replicas, c.seed, c.sigma)?)
        }
        Command::Cable(c) => {
            let net = load_network(&c.network)?;
            (c, verify::cable_laws_on(&net, c.replicas, c.seed, c.sigma)?)
        }
        Command::Sle(c) => (c, verify::loewner_sle(c.replicas, c.seed, c.sigma)?.reports),
        Command::Lqg(c) => (c, verify::continuum_lqg(c.replicas, c.seed, c.sigma)?.reports),
        Command::VerifyAll { common, scale } => {
            let scale = match scale {
                ScaleArg::Ci => verify::Scale::ci(),
                ScaleArg::Quick => verify::Scale::quick(),
            };
            let criteria = verify::acceptance_suite(scale, common.seed, common.sigma)?;
            let mut flat = Vec::new();
            for c in &criteria {
                println!("{}", c.line());
                flat.extend(c.reports.iter().cloned());
            }
            (common, flat)
        }
    };
    if !matches!(cli.command, Command::VerifyAll { .. }) {
        for r in &reports {
            println!("{}", r.summary());
        }
    }
    let pass = reports.iter().all(|r| r.pass);
    println!("overall: {}", if pass { "PASS" } else { "FAIL" });
    if let Some(out) = &common.out {
        write_reports(out, common.format, &reports)?;
    }
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
