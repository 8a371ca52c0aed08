use std::path::{Path, PathBuf};

use ltcache::analysis::{average_overhead, fmt_f64, FailureCurve};
use ltcache::fountain::DegreeDistribution;
use ltcache::montecarlo::{write_outcomes_csv, DeliverySimulator, RateEstimate, RateSummary};
use ltcache::netmodel::{
    derive_connectivity, expected_backhaul, write_rate_csv, ConnectivityEstimate, GridGeometry, RatePoint, Scheme,
};
use ltcache::placement::{optimize_integer, optimize_relaxed, optimized_rates, PlacementProblem};
use ltcache::scenario::{DistributionSpec, GammaSpec, GeometrySpec, ScenarioConfig, DEFAULT_GEOMETRY_SAMPLES};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{io_err, CliError, Result};
use crate::manifest::{load_config, OutputDir};
use crate::plot;
use crate::{GeometryArgs, PointArgs, SimulateArgs};

pub struct Context {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub plot: bool,
}

/// Loads the scenario, applies flag overrides and pins relative paths so the
/// manifest can be replayed from anywhere.
fn scenario(ctx: &Context, point: Option<&PointArgs>) -> Result<ScenarioConfig> {
    let path = ctx
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config is required for this command".into()))?;
    let mut cfg = load_config(path)?;
    if let Some(seed) = ctx.seed {
        cfg.seed = seed;
    }
    if let Some(p) = point {
        if let Some(m) = p.cache_files {
            cfg.cache_files = m;
        }
        if let Some(a) = p.alpha {
            cfg.alpha = a;
        }
    }
    if let DistributionSpec::File { path: dist_path } = &mut cfg.distribution {
        if dist_path.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            let joined = base.join(&*dist_path);
            *dist_path = joined.canonicalize().map_err(io_err(&joined))?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn distribution(cfg: &ScenarioConfig) -> Result<DegreeDistribution<f64>> {
    Ok(cfg.distribution(Path::new("."))?)
}

fn curve_csv(curve: &FailureCurve<f64>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    curve.write_csv(&mut buf)?;
    Ok(buf)
}

fn truncated(curve: &FailureCurve<f64>) -> CliError {
    CliError::Core(ltcache::Error::TruncatedCurve {
        delta_cap: curve.delta_max(),
        last_pf: curve.pf(curve.delta_max() as i64),
    })
}

pub fn pfail(ctx: &Context) -> Result<()> {
    let cfg = scenario(ctx, None)?;
    let curve = cfg.failure_curve(&distribution(&cfg)?)?;
    let mut out = OutputDir::create(&ctx.out)?;
    out.write("pfail.csv", &curve_csv(&curve)?)?;
    out.write_json("pfail.json", &curve.metadata())?;
    if ctx.plot {
        out.write("pfail.gp", plot::pfail("pfail.csv").as_bytes())?;
    }
    out.finish("pfail", &cfg)?;
    if curve.is_truncated() {
        return Err(truncated(&curve));
    }
    println!(
        "P_F computed for delta = 0..={} (k = {}); wrote {}",
        curve.delta_max(),
        curve.k(),
        ctx.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct OverheadReport {
    k: usize,
    e_delta: f64,
    e_delta_normalized: f64,
    tail_bias_bound: f64,
    delta_max: usize,
    epsilon_tail: f64,
    distribution_digest: String,
}

pub fn overhead(ctx: &Context) -> Result<()> {
    let cfg = scenario(ctx, None)?;
    let curve = cfg.failure_curve(&distribution(&cfg)?)?;
    let est = average_overhead(&curve)?;
    let report = OverheadReport {
        k: cfg.k,
        e_delta: est.value,
        e_delta_normalized: est.value / cfg.k as f64,
        tail_bias_bound: est.tail_bias_bound,
        delta_max: est.delta_max,
        epsilon_tail: curve.epsilon_tail(),
        distribution_digest: curve.distribution_digest().to_string(),
    };
    let mut out = OutputDir::create(&ctx.out)?;
    out.write_json("overhead.json", &report)?;
    out.finish("overhead", &cfg)?;
    println!("E[Delta] = {} ({:.4}% of k)", fmt_f64(est.value), 100.0 * report.e_delta_normalized);
    Ok(())
}

fn geometry_config(geo: &GeometrySpec, seed: u64) -> ScenarioConfig {
    // Connectivity runs without a full scenario record a minimal one.
    ScenarioConfig {
        n: 1,
        k: 1,
        cache_files: 0,
        alpha: 0.0,
        gamma: GammaSpec::Geometry(geo.clone()),
        distribution: DistributionSpec::IdealSoliton,
        epsilon_tail: ltcache::analysis::DEFAULT_EPSILON_TAIL,
        delta_cap: None,
        seed,
        sweep: Default::default(),
        simulation: Default::default(),
    }
}

pub fn connectivity(ctx: &Context, args: &GeometryArgs) -> Result<()> {
    let base = match &ctx.config {
        Some(path) => Some(load_config(path)?),
        None => None,
    };
    let from_cfg = base.as_ref().and_then(|c| match &c.gamma {
        GammaSpec::Geometry(g) => Some(g.clone()),
        GammaSpec::Explicit(_) => None,
    });
    let radius = args.radius.or(from_cfg.as_ref().map(|g| g.radius));
    let spacing = args.spacing.or(from_cfg.as_ref().map(|g| g.spacing));
    let (Some(radius), Some(spacing)) = (radius, spacing) else {
        return Err(CliError::Usage(
            "connectivity needs --radius and --spacing, or a scenario whose `gamma` is a geometry".into(),
        ));
    };
    let samples = args
        .samples
        .or(from_cfg.as_ref().map(|g| g.samples))
        .unwrap_or(DEFAULT_GEOMETRY_SAMPLES);
    let geo = GeometrySpec { radius, spacing, samples };
    let seed = ctx.seed.or(base.as_ref().map(|c| c.seed)).unwrap_or(0);
    let cfg = match base {
        Some(mut c) => {
            c.gamma = GammaSpec::Geometry(geo.clone());
            c.seed = seed;
            c
        }
        None => geometry_config(&geo, seed),
    };
    cfg.validate()?;

    let geom = GridGeometry::new(radius, spacing).map_err(|e| config_err("gamma", e))?;
    let est = derive_connectivity(geom, samples, seed).map_err(|e| config_err("gamma", e))?;
    let mut out = OutputDir::create(&ctx.out)?;
    out.write("connectivity.csv", &connectivity_csv(&est))?;
    out.write_json("connectivity.json", &est)?;
    out.finish("connectivity", &cfg)?;
    let shown: Vec<String> = est.gamma.iter().map(|g| format!("{g:.4}")).collect();
    println!("gamma = ({})", shown.join(", "));
    if est.has_zero_coverage() {
        println!(
            "note: {:.4}% of positions are covered by no transmitter (excluded from gamma)",
            100.0 * est.zero_coverage_fraction
        );
    }
    Ok(())
}

fn config_err(path: &str, e: ltcache::Error) -> CliError {
    CliError::Core(ltcache::Error::Config {
        path: path.into(),
        message: e.to_string(),
    })
}

fn connectivity_csv(est: &ConnectivityEstimate) -> Vec<u8> {
    let mut s = String::from("h,count,gamma\n");
    s.push_str(&format!("0,{},\n", est.counts[0]));
    for (i, g) in est.gamma.iter().enumerate() {
        s.push_str(&format!("{},{},{}\n", i + 1, est.counts[i + 1], fmt_f64(*g)));
    }
    s.into_bytes()
}

/// Curve, `E[Δ]` and connectivity shared by the placement-based commands.
struct Prepared {
    cfg: ScenarioConfig,
    dist: DegreeDistribution<f64>,
    curve: FailureCurve<f64>,
    e_delta: f64,
    gamma: Vec<f64>,
    connectivity: Option<ConnectivityEstimate>,
}

fn prepare(ctx: &Context, point: Option<&PointArgs>) -> Result<Prepared> {
    let cfg = scenario(ctx, point)?;
    let dist = distribution(&cfg)?;
    let curve = cfg.failure_curve(&dist)?;
    if curve.is_truncated() {
        return Err(truncated(&curve));
    }
    let e_delta = average_overhead(&curve)?.value;
    let resolved = cfg.resolve_gamma()?;
    Ok(Prepared {
        cfg,
        dist,
        curve,
        e_delta,
        gamma: resolved.gamma,
        connectivity: resolved.estimate,
    })
}

#[derive(Serialize)]
struct OptimizeReport {
    cache_files: usize,
    alpha: f64,
    e_delta: f64,
    integer: IntegerReport,
    relaxed: RelaxedReport,
    achieved: AchievedReport,
    gamma: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    connectivity: Option<ConnectivityEstimate>,
}

#[derive(Serialize)]
struct IntegerReport {
    objective_tup: f64,
    objective_tup_normalized: f64,
    iterations: u64,
    ties: u64,
}

#[derive(Serialize)]
struct RelaxedReport {
    objective_tup: f64,
    transfer_gap: f64,
    certified: bool,
}

/// Exact `E[T]` at the integer placement, next to the bound it minimized.
#[derive(Serialize)]
struct AchievedReport {
    expected_backhaul: f64,
    expected_backhaul_normalized: f64,
    used_tail: bool,
    tail_bias_bound: f64,
}

pub fn optimize(ctx: &Context, args: &PointArgs) -> Result<()> {
    let p = prepare(ctx, Some(args))?;
    let sys = p.cfg.system(&p.gamma, p.cfg.cache_files, p.cfg.alpha)?;
    let problem = PlacementProblem::new(sys.clone(), p.e_delta)?;
    let int = optimize_integer(&problem)?;
    let rel = optimize_relaxed(&problem);
    let achieved = expected_backhaul(&sys, &int.placement, &p.curve)?;

    let mut placement_csv = Vec::new();
    int.placement.write_csv(&mut placement_csv)?;
    let mut relaxed_csv = String::from("file_index,w\n");
    for (j, w) in rel.w.iter().enumerate() {
        relaxed_csv.push_str(&format!("{},{}\n", j + 1, fmt_f64(*w)));
    }
    let report = OptimizeReport {
        cache_files: p.cfg.cache_files,
        alpha: p.cfg.alpha,
        e_delta: p.e_delta,
        integer: IntegerReport {
            objective_tup: int.objective,
            objective_tup_normalized: sys.normalize(int.objective),
            iterations: int.summary.iterations,
            ties: int.summary.ties,
        },
        relaxed: RelaxedReport {
            objective_tup: rel.objective,
            transfer_gap: rel.transfer_gap,
            certified: rel.is_certified(),
        },
        achieved: AchievedReport {
            expected_backhaul: achieved.symbols,
            expected_backhaul_normalized: achieved.normalized,
            used_tail: achieved.used_tail,
            tail_bias_bound: achieved.tail_bias_bound,
        },
        gamma: p.gamma.clone(),
        connectivity: p.connectivity.clone(),
    };
    let mut out = OutputDir::create(&ctx.out)?;
    out.write("placement.csv", &placement_csv)?;
    out.write("placement_relaxed.csv", relaxed_csv.as_bytes())?;
    out.write_json("optimize.json", &report)?;
    out.finish("optimize", &p.cfg)?;
    println!(
        "T_UP = {} (relaxed {}), E[T] = {} symbols per request",
        fmt_f64(int.objective),
        fmt_f64(rel.objective),
        fmt_f64(achieved.symbols)
    );
    Ok(())
}

fn rate_rows(p: &Prepared, points: &[(usize, f64)]) -> Result<Vec<RatePoint>> {
    let rows: Vec<Vec<RatePoint>> = points
        .par_iter()
        .map(|&(m, alpha)| -> Result<Vec<RatePoint>> {
            let sys = p.cfg.system(&p.gamma, m, alpha)?;
            let r = optimized_rates(&sys, &p.curve)?;
            Ok(vec![
                RatePoint {
                    cache_files: m,
                    alpha,
                    scheme: Scheme::Lt,
                    rate_normalized: r.lt.normalized,
                },
                RatePoint {
                    cache_files: m,
                    alpha,
                    scheme: Scheme::Mds,
                    rate_normalized: r.mds_normalized,
                },
            ])
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

fn write_rates(ctx: &Context, p: &Prepared, command: &str, name: &str, rows: &[RatePoint], x: plot::Axis) -> Result<()> {
    let mut buf = Vec::new();
    write_rate_csv(&mut buf, rows)?;
    let mut out = OutputDir::create(&ctx.out)?;
    let csv_name = format!("{name}.csv");
    out.write(&csv_name, &buf)?;
    if ctx.plot {
        out.write(&format!("{name}.gp"), plot::rates(&csv_name, x).as_bytes())?;
    }
    out.finish(command, &p.cfg)?;
    println!("wrote {} rows to {}", rows.len(), ctx.out.join(csv_name).display());
    Ok(())
}

pub fn rate_vs_m(ctx: &Context) -> Result<()> {
    let p = prepare(ctx, None)?;
    let points: Vec<(usize, f64)> = p.cfg.sweep_cache_files().into_iter().map(|m| (m, p.cfg.alpha)).collect();
    let rows = rate_rows(&p, &points)?;
    write_rates(ctx, &p, "rate-vs-m", "rate_vs_m", &rows, plot::Axis::CacheSize)
}

pub fn rate_vs_alpha(ctx: &Context, args: &PointArgs) -> Result<()> {
    let p = prepare(ctx, Some(args))?;
    let points: Vec<(usize, f64)> = p.cfg.sweep_alpha().into_iter().map(|a| (p.cfg.cache_files, a)).collect();
    let rows = rate_rows(&p, &points)?;
    write_rates(ctx, &p, "rate-vs-alpha", "rate_vs_alpha", &rows, plot::Axis::Alpha)
}

#[derive(Serialize)]
struct SimulateReport {
    #[serde(flatten)]
    summary: RateSummary,
    analytical: f64,
    analytical_normalized: f64,
    /// `(mean − analytical) / stderr`.
    z_score: f64,
    placement: Vec<u64>,
    histogram: std::collections::BTreeMap<u64, u64>,
}

pub fn simulate(ctx: &Context, args: &SimulateArgs) -> Result<()> {
    let mut p = prepare(ctx, Some(&args.point))?;
    if let Some(t) = args.trials {
        p.cfg.simulation.trials = t;
    }
    if args.per_trial {
        p.cfg.simulation.per_trial = true;
    }
    p.cfg.validate()?;
    let sys = p.cfg.system(&p.gamma, p.cfg.cache_files, p.cfg.alpha)?;
    let placement = optimize_integer(&PlacementProblem::new(sys.clone(), p.e_delta)?)?.placement;
    let analytical = expected_backhaul(&sys, &placement, &p.curve)?;
    let sim = DeliverySimulator::new(&sys, &placement, &p.dist)?;
    let outcomes = sim.simulate_range(p.cfg.seed, 0..p.cfg.simulation.trials)?;
    let est = RateEstimate::from_outcomes(&outcomes, p.cfg.seed);
    let summary = RateSummary::new(&est, &sys, &placement, &p.dist);
    let z_score = if est.stderr > 0.0 {
        (est.mean - analytical.symbols) / est.stderr
    } else {
        0.0
    };
    let report = SimulateReport {
        summary,
        analytical: analytical.symbols,
        analytical_normalized: analytical.normalized,
        z_score,
        placement: placement.w().to_vec(),
        histogram: est.histogram.clone(),
    };
    let mut out = OutputDir::create(&ctx.out)?;
    if p.cfg.simulation.per_trial {
        let mut buf = Vec::new();
        write_outcomes_csv(&mut buf, &outcomes)?;
        out.write("trials.csv", &buf)?;
    }
    out.write_json("simulate.json", &report)?;
    out.finish("simulate", &p.cfg)?;
    println!(
        "mean t = {:.4} ± {:.4} over {} requests; analytical E[T] = {:.4} (z = {:.2})",
        est.mean, est.stderr, est.trials, analytical.symbols, z_score
    );
    Ok(())
}
