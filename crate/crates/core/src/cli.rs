//! Command-line entry points: config ingestion, experiment drivers, and
//! plot-ready data emission.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    integrate, brusselator_field, uniform_fixed_point_state, BrusselatorParams, IntegratorConfig,
    Scheme,
};
use crate::graphcore::{
    erdos_renyi, load_graph, spectral_reference, Multipliers, WeightedGraph,
};
use crate::odenet::{train_sparse_odenet, LinearSystemSpec, OdeNetConfig, OdeNetParams};
use crate::pipeline::{sparsify, SparsifierResult, SparsifyConfig};
use crate::rom::{pod_basis, ReducedSystem, RomModel};
use crate::spectral::{zeta_exact, PerturbationContext};
use crate::{Error, Result};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "DYNSPARSE_OUT";

/// Formats a float with 17 significant digits so emitted files are bit-stable.
fn fmt17(v: f64) -> String {
    format!("{v:.17e}")
}

#[derive(Debug, Parser)]
#[command(name = "dynsparse", version, about = "Dynamics-preserving graph sparsification toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Input graph (edge list or Matrix Market).
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (default: $DYNSPARSE_OUT/<command> or ./out/<command>).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Number of preserved eigenmodes n_p.
    #[arg(long)]
    pub np: Option<usize>,
    /// ℓ1 regularization weight.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Edge pruning threshold ε.
    #[arg(long, value_name = "EPS")]
    pub prune_eps: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full sparsification pipeline and emit the result bundle.
    Sparsify(CommonArgs),
    /// Integrate the reaction-diffusion system and emit the trajectory CSV.
    Simulate(CommonArgs),
    /// Compare exact and estimated spectral error (ζ vs ζ̄).
    SpectrumEstimate(CommonArgs),
    /// Train the sparse neural ODE on the linear benchmark system.
    Odenet(CommonArgs),
    /// Benchmark reduced- vs full-order field evaluation.
    BenchRom(CommonArgs),
    /// Benchmark parallel vs serial ζ̄ evaluation.
    BenchZeta(CommonArgs),
}

/// TOML run configuration; unknown keys are rejected. Sections default to the
/// standard settings when omitted.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub graph: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub sparsify: SparsifyConfig,
    pub odenet: OdeNetConfig,
    pub simulate: SimulateConfig,
    pub spectrum: SpectrumConfig,
    pub bench: BenchConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub steps: usize,
    pub dynamics: BrusselatorParams,
    /// Amplitude of the random perturbation of the uniform fixed point.
    pub amplitude: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Rk4,
            dt: 1e-3,
            steps: 5000,
            dynamics: BrusselatorParams::default(),
            amplitude: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    /// Fallback random graph when --graph is absent.
    pub er_n: usize,
    pub er_p: f64,
    pub n_p: Option<usize>,
    pub trials: usize,
    pub gamma_low: f64,
    pub gamma_high: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self { er_n: 200, er_p: 0.1, n_p: None, trials: 20, gamma_low: 0.6, gamma_high: 1.4 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub n: usize,
    pub er_p: f64,
    pub k: usize,
    pub n_p: usize,
    pub reps: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { n: 500, er_p: 0.05, k: 50, n_p: 100, reps: 20 }
    }
}

/// Maps errors to process exit codes: 1 config, 2 numerical, 3 infeasible.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::Parse(_)
        | Error::InvalidArgument(_)
        | Error::InvalidGraph(_)
        | Error::Dimension(_)
        | Error::Io(_) => 1,
        Error::Infeasible(_) => 3,
        _ => 2,
    }
}

/// Parses argv, runs the command, prints errors; returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version as "errors" with code 0
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Sparsify(args) => cmd_sparsify(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::SpectrumEstimate(args) => cmd_spectrum(&args),
        Command::Odenet(args) => cmd_odenet(&args),
        Command::BenchRom(args) => cmd_bench_rom(&args),
        Command::BenchZeta(args) => cmd_bench_zeta(&args),
    }
}

fn load_config(args: &CommonArgs) -> Result<RunConfig> {
    let mut cfg: RunConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    // flags override file values
    if args.graph.is_some() {
        cfg.graph = args.graph.clone();
    }
    if args.out.is_some() {
        cfg.out = args.out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = Some(seed);
        cfg.sparsify.seed = seed;
        cfg.odenet.seed = seed;
    }
    if args.threads.is_some() {
        cfg.threads = args.threads;
    }
    if let Some(np) = args.np {
        cfg.sparsify.n_p = Some(np);
        cfg.spectrum.n_p = Some(np);
        cfg.bench.n_p = np;
    }
    if let Some(alpha) = args.alpha {
        cfg.sparsify.alpha = Some(alpha);
        cfg.odenet.alpha = alpha;
    }
    if let Some(eps) = args.prune_eps {
        if eps <= 0.0 {
            return Err(Error::Config(format!("--prune-eps {eps} must be positive")));
        }
        cfg.sparsify.eps_prune = eps;
    }
    if let Some(t) = cfg.threads {
        if t == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        // ignore the error when a global pool already exists (tests, repeats)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    Ok(cfg)
}

fn effective_threads(cfg: &RunConfig) -> usize {
    cfg.threads.unwrap_or_else(rayon::current_num_threads)
}

fn output_dir(cfg: &RunConfig, command: &str) -> Result<PathBuf> {
    let dir = match &cfg.out {
        Some(d) => d.clone(),
        None => match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) => PathBuf::from(root).join(command),
            None => PathBuf::from("out").join(command),
        },
    };
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn require_graph(cfg: &RunConfig) -> Result<WeightedGraph> {
    let path = cfg
        .graph
        .as_ref()
        .ok_or_else(|| Error::Config("no graph given: pass --graph or set `graph` in the config".into()))?;
    if !path.exists() {
        return Err(Error::Config(format!("graph file not found: {}", path.display())));
    }
    load_graph(path)
}

/// Serializes the effective configuration next to the results so a run can be
/// reproduced from its own bundle.
fn echo_config(dir: &Path, cfg: &RunConfig) -> Result<()> {
    let text = toml::to_string_pretty(cfg)
        .map_err(|e| Error::Config(format!("cannot serialize config: {e}")))?;
    std::fs::write(dir.join("config_echo.toml"), text)?;
    Ok(())
}

fn write_csv(dir: &Path, name: &str, header: &str, rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(dir.join(name), out)?;
    Ok(())
}

/// Emits the plot-ready data of a sparsifier result: the multipliers, the
/// pruned edge list, and the per-mode eigenvalue comparison with relative
/// changes `(λ̃_i − λ_i)/λ_i`.
pub fn emit_plot_data(dir: &Path, result: &SparsifierResult) -> Result<()> {
    if result.gamma.is_empty() || result.eigenvalue_comparison.is_empty() {
        return Err(Error::InvalidArgument("empty result: nothing to emit".into()));
    }
    let gamma_rows: Vec<Vec<String>> = result
        .gamma
        .iter()
        .enumerate()
        .map(|(i, &g)| vec![i.to_string(), fmt17(g)])
        .collect();
    write_csv(dir, "gamma.csv", "edge,gamma", &gamma_rows)?;

    let edge_rows: Vec<Vec<String>> = result
        .pruned
        .edges()
        .iter()
        .zip(result.pruned.weights())
        .map(|(&(u, v), &w)| vec![u.to_string(), v.to_string(), fmt17(w)])
        .collect();
    write_csv(dir, "pruned_edges.csv", "u,v,weight", &edge_rows)?;

    let eig_rows: Vec<Vec<String>> = result
        .eigenvalue_comparison
        .iter()
        .enumerate()
        .map(|(i, &(orig, new))| {
            let rel = if orig != 0.0 { (new - orig) / orig } else { 0.0 };
            vec![i.to_string(), fmt17(orig), fmt17(new), fmt17(rel)]
        })
        .collect();
    write_csv(dir, "eigenvalues.csv", "mode,lambda_original,lambda_sparsified,relative_change", &eig_rows)
}

fn cmd_sparsify(args: &CommonArgs) -> Result<()> {
    let cfg = load_config(args)?;
    let g = require_graph(&cfg)?;
    let dir = output_dir(&cfg, "sparsify")?;
    let result = sparsify(&g, &cfg.sparsify)?;
    emit_plot_data(&dir, &result)?;
    echo_config(&dir, &cfg)?;
    let summary = serde_json::json!({
        "n": g.n(),
        "m": result.m_original,
        "m_pruned": result.m_pruned,
        "correlation_R": result.correlation,
        "zeta_exit": result.zeta_exit,
        "solver_converged": result.solver_converged,
        "max_violation": result.max_violation,
        "reweighted_only": result.reweighted_only,
        "disconnected": result.disconnected,
        "lambda_2": result.lambda_2,
        "objective_history": result.objective_history,
        "timings_seconds": result.timings,
        "threads": effective_threads(&cfg),
        "seed": cfg.sparsify.seed,
    });
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    println!(
        "sparsify: m {} -> {} (R = {:.4}, ζ̄ = {:.3e}) -> {}",
        result.m_original,
        result.m_pruned,
        result.correlation,
        result.zeta_exit,
        dir.display()
    );
    Ok(())
}

fn cmd_simulate(args: &CommonArgs) -> Result<()> {
    let cfg = load_config(args)?;
    let g = require_graph(&cfg)?;
    let dir = output_dir(&cfg, "simulate")?;
    let sim = &cfg.simulate;
    sim.dynamics.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.unwrap_or(0));
    let mut x0 = uniform_fixed_point_state(g.n(), &sim.dynamics)?;
    for v in x0.iter_mut() {
        *v += rng.random_range(-sim.amplitude..sim.amplitude);
    }
    let icfg = IntegratorConfig::new(sim.scheme, sim.dt, sim.steps)?;
    let gamma = Multipliers::ones(g.m());
    let traj = integrate(|x| brusselator_field(x, &g, &gamma, &sim.dynamics), &x0, &icfg)?;
    std::fs::write(dir.join("trajectory.csv"), traj.to_csv(g.n()))?;
    echo_config(&dir, &cfg)?;
    println!("simulate: {} steps on {} nodes -> {}", sim.steps, g.n(), dir.display());
    Ok(())
}

fn cmd_spectrum(args: &CommonArgs) -> Result<()> {
    let cfg = load_config(args)?;
    let dir = output_dir(&cfg, "spectrum-estimate")?;
    let sp = &cfg.spectrum;
    let seed = cfg.seed.unwrap_or(0);
    let g = match &cfg.graph {
        Some(_) => require_graph(&cfg)?,
        None => erdos_renyi(sp.er_n, sp.er_p, seed)?,
    };
    let n_p = sp.n_p.unwrap_or_else(|| g.n().div_ceil(5));
    let reference = spectral_reference(&g, n_p)?;
    let ctx = PerturbationContext::new(&g, reference)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa5a5);
    let mut rows = Vec::new();
    for trial in 0..sp.trials.max(1) {
        let gamma = Multipliers::new(
            (0..g.m()).map(|_| rng.random_range(sp.gamma_low..sp.gamma_high)).collect(),
        )?;
        let approx = ctx.zeta_approx(&gamma)?;
        let exact = zeta_exact(&g, &gamma, ctx.reference())?;
        let rel = if exact != 0.0 { (approx.value - exact).abs() / exact } else { 0.0 };
        rows.push(vec![
            trial.to_string(),
            g.n().to_string(),
            g.m().to_string(),
            n_p.to_string(),
            fmt17(exact),
            fmt17(approx.value),
            fmt17(rel),
        ]);
    }
    write_csv(&dir, "zeta_comparison.csv", "trial,n,m,n_p,zeta_exact,zeta_estimate,relative_error", &rows)?;
    echo_config(&dir, &cfg)?;
    println!("spectrum-estimate: {} trials on n = {} -> {}", sp.trials, g.n(), dir.display());
    Ok(())
}

fn cmd_odenet(args: &CommonArgs) -> Result<()> {
    let cfg = load_config(args)?;
    let dir = output_dir(&cfg, "odenet")?;
    let result = train_sparse_odenet(&LinearSystemSpec::default(), &cfg.odenet)?;

    let flat_rows: Vec<Vec<String>> = result
        .params
        .iter()
        .enumerate()
        .map(|(i, &v)| vec![i.to_string(), fmt17(v)])
        .collect();
    write_csv(&dir, "params.csv", "index,value", &flat_rows)?;
    let header = serde_json::json!({
        "layout": "theta1 (50x6, column-major) | theta2 (6x50, column-major) | b1 (50) | b2 (6)",
        "total": result.sparsity.total,
        "nonzero": result.sparsity.nonzero,
        "threshold": crate::odenet::SPARSITY_THRESHOLD,
        "t1": result.t1,
        "t1_zero_baseline": result.t1_zero,
    });
    std::fs::write(dir.join("params.json"), serde_json::to_string_pretty(&header)?)?;

    // sparsity pattern of the two weight matrices
    let p = OdeNetParams::from_flat(&result.params)?;
    let mut pattern = String::new();
    for (name, mat) in [("theta1", &p.theta1), ("theta2", &p.theta2)] {
        for i in 0..mat.nrows() {
            let row: Vec<String> = (0..mat.ncols())
                .map(|j| u8::from(mat[(i, j)].abs() >= crate::odenet::SPARSITY_THRESHOLD).to_string())
                .collect();
            let _ = writeln!(pattern, "{name},{i},{}", row.join(","));
        }
    }
    std::fs::write(dir.join("sparsity_pattern.csv"), pattern)?;

    let err_rows: Vec<Vec<String>> = result
        .error_curve
        .iter()
        .zip(&result.baseline_curve)
        .enumerate()
        .map(|(q, (&e, &b))| vec![q.to_string(), fmt17(e), fmt17(b)])
        .collect();
    write_csv(&dir, "error_curve.csv", "step,trained_error,zero_baseline_error", &err_rows)?;
    echo_config(&dir, &cfg)?;
    println!(
        "odenet: {} of {} parameters nonzero -> {}",
        result.sparsity.nonzero,
        result.sparsity.total,
        dir.display()
    );
    Ok(())
}

fn median(samples: &mut [f64]) -> f64 {
    samples.sort_by(|a, b| a.total_cmp(b));
    samples[samples.len() / 2]
}

fn cmd_bench_rom(args: &CommonArgs) -> Result<()> {
    let cfg = load_config(args)?;
    let dir = output_dir(&cfg, "bench-rom")?;
    let b = &cfg.bench;
    let seed = cfg.seed.unwrap_or(0);
    let g = match &cfg.graph {
        Some(_) => require_graph(&cfg)?,
        None => erdos_renyi(b.n, b.er_p, seed)?,
    };
    let p = BrusselatorParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = uniform_fixed_point_state(g.n(), &p)?;
    let snaps = nalgebra::DMatrix::from_fn(2 * g.n(), 2 * b.k, |i, _| {
        base[i] + rng.random_range(-0.2..0.2)
    });
    let basis = pod_basis(&snaps, b.k)?;
    let model = RomModel::new(&g, &basis, ReducedSystem::Brusselator(p))?;
    let gamma = Multipliers::ones(g.m());
    let x = DVector::from_fn(2 * g.n(), |i, _| base[i] + rng.random_range(-0.1..0.1));
    let z = basis.reduce(&x)?;

    let mut full_times = Vec::with_capacity(b.reps);
    let mut reduced_times = Vec::with_capacity(b.reps);
    for _ in 0..b.reps.max(1) {
        let t = Instant::now();
        let _ = brusselator_field(&x, &g, &gamma, &p)?;
        full_times.push(t.elapsed().as_secs_f64());
        let t = Instant::now();
        let _ = crate::adjoint::ParamModel::field(&model, &z, &gamma.as_vector())?;
        reduced_times.push(t.elapsed().as_secs_f64());
    }
    let full_med = median(&mut full_times);
    let reduced_med = median(&mut reduced_times);
    write_csv(
        &dir,
        "rom_timings.csv",
        "n,k,reps,full_field_median_s,reduced_field_median_s,ratio",
        &[vec![
            g.n().to_string(),
            b.k.to_string(),
            b.reps.to_string(),
            fmt17(full_med),
            fmt17(reduced_med),
            fmt17(reduced_med / full_med),
        ]],
    )?;
    echo_config(&dir, &cfg)?;
    println!(
        "bench-rom: full {:.3e}s vs reduced {:.3e}s (median) -> {}",
        full_med,
        reduced_med,
        dir.display()
    );
    Ok(())
}

fn cmd_bench_zeta(args: &CommonArgs) -> Result<()> {
    let cfg = load_config(args)?;
    let dir = output_dir(&cfg, "bench-zeta")?;
    let b = &cfg.bench;
    let seed = cfg.seed.unwrap_or(0);
    let g = match &cfg.graph {
        Some(_) => require_graph(&cfg)?,
        None => erdos_renyi(b.n, b.er_p, seed)?,
    };
    let reference = spectral_reference(&g, b.n_p.min(g.n()))?;
    let ctx = PerturbationContext::new(&g, reference)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gamma =
        Multipliers::new((0..g.m()).map(|_| rng.random_range(0.6..1.4)).collect())?;

    let mut serial_times = Vec::with_capacity(b.reps);
    let mut parallel_times = Vec::with_capacity(b.reps);
    for _ in 0..b.reps.max(1) {
        let t = Instant::now();
        let s = ctx.zeta_approx_serial(&gamma)?;
        serial_times.push(t.elapsed().as_secs_f64());
        let t = Instant::now();
        let p = ctx.zeta_approx(&gamma)?;
        parallel_times.push(t.elapsed().as_secs_f64());
        if s.value != p.value {
            return Err(Error::Numerical("parallel and serial ζ̄ disagree".into()));
        }
    }
    let serial_med = median(&mut serial_times);
    let parallel_med = median(&mut parallel_times);
    write_csv(
        &dir,
        "zeta_speedup.csv",
        "n,m,n_p,threads,serial_median_s,parallel_median_s,speedup",
        &[vec![
            g.n().to_string(),
            g.m().to_string(),
            ctx.n_p().to_string(),
            effective_threads(&cfg).to_string(),
            fmt17(serial_med),
            fmt17(parallel_med),
            fmt17(serial_med / parallel_med),
        ]],
    )?;
    echo_config(&dir, &cfg)?;
    println!(
        "bench-zeta: speedup {:.2}x on {} threads -> {}",
        serial_med / parallel_med,
        effective_threads(&cfg),
        dir.display()
    );
    Ok(())
}
