//! `vrlab`: command-line front end for the vortex-ring laboratory.
//!
//! Every subcommand writes its tables and field dumps into an output directory together with
//! `manifest.json`, which records the resolved configuration, versions, wall time and the
//! headline metrics. Exit codes: 0 on success, 2 on invalid input, 3 on numerical failure.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use config::{Domain, GridSize, RunConfig};
use vrlab::acceptance::{AcceptanceOptions, Suite};
use vrlab::asymptotics::{
    approx_stream, asymptotic_seed, blowup_check_approximation, expansion_defect, parameter_table,
    solve_ring_parameters, Approximation,
};
use vrlab::evolution::{calibrated_perturbation, Drift, EvolveOptions, Evolver, Monitor};
use vrlab::fields::{AxisymGrid, FieldKind};
use vrlab::green::{bound_check, g1, g1_far, g1_near, rho, GreenConfig, HalfPlanePoint};
use vrlab::ground_state::solve_ground_state;
use vrlab::io::{read_field, write_field, write_table};
use vrlab::operator::FarField;
use vrlab::steady::{diagnostics, solve_steady, uniqueness_probe_fields, RingSpec, SteadyOptions};
use vrlab::variational::{asymptotic_report, maximize_from_class};
use vrlab::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "vrlab", version, about = "Concentrated steady vortex rings: solvers and checks")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Circulation.
    #[arg(long, global = true)]
    kappa: Option<f64>,
    /// Speed constant; the ring travels at W ln(1/ε).
    #[arg(long = "W", global = true)]
    w: Option<f64>,
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Nonlinearity exponent, at least 2.
    #[arg(long, global = true)]
    p: Option<f64>,
    /// Cells as NRxNZ.
    #[arg(long, global = true)]
    grid: Option<GridSize>,
    /// Box as r0,r1,z0,z1.
    #[arg(long, global = true, allow_hyphen_values = true)]
    domain: Option<Domain>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output directory (default: $VRLAB_OUT/<command>, or ./vrlab-out/<command>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON run configuration; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Lane–Emden ground state on the unit disc.
    GroundState,
    /// Green function against its expansions and the power-law bound.
    GreenCheck,
    /// Asymptotic ring parameters for one ε or a comma-separated sweep.
    RingParams {
        #[arg(long, value_delimiter = ',')]
        sweep: Option<Vec<f64>>,
    },
    /// Steady ring from the asymptotic seed.
    SolveSteady,
    /// Approximate solution against the expansion and a solved ring.
    ApproxCompare,
    /// Energy maximiser over the class of a solved ring.
    Maximize {
        /// Output directory of a previous `solve-steady`.
        #[arg(long)]
        from_ring: PathBuf,
    },
    /// Transport of a (perturbed) steady ring in its co-moving frame.
    Evolve {
        #[arg(long)]
        steps: Option<usize>,
        /// Perturbation size in units of κ.
        #[arg(long)]
        delta: Option<f64>,
    },
    /// The acceptance suite.
    VerifyAll {
        /// Shorter time-dependent runs.
        #[arg(long)]
        quick: bool,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GroundState => "ground-state",
            Command::GreenCheck => "green-check",
            Command::RingParams { .. } => "ring-params",
            Command::SolveSteady => "solve-steady",
            Command::ApproxCompare => "approx-compare",
            Command::Maximize { .. } => "maximize",
            Command::Evolve { .. } => "evolve",
            Command::VerifyAll { .. } => "verify-all",
        }
    }
}

/// What a subcommand reports back for the manifest.
struct Outcome {
    metrics: Map<String, Value>,
    files: Vec<String>,
    success: bool,
}

impl Outcome {
    fn new() -> Self {
        Self { metrics: Map::new(), files: Vec::new(), success: true }
    }

    fn metric(&mut self, key: &str, v: impl Into<Value>) {
        self.metrics.insert(key.to_string(), v.into());
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("vrlab: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    let name = cli.command.name();
    let mut cfg = match &cli.common.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    cfg.apply_flags(&cli.common, &cli.command);
    cfg.command = name.to_string();
    cfg.validate()?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Precondition(format!("thread pool: {e}")))?;
    }
    let out = cfg.output_dir();
    fs::create_dir_all(&out)?;
    let start = Instant::now();
    let outcome = match &cli.command {
        Command::GroundState => ground_state(&cfg, &out),
        Command::GreenCheck => green_check(&cfg, &out),
        Command::RingParams { .. } => ring_params(&cfg, &out),
        Command::SolveSteady => solve_steady_cmd(&cfg, &out),
        Command::ApproxCompare => approx_compare(&cfg, &out),
        Command::Maximize { from_ring } => maximize_cmd(&cfg, from_ring, &out),
        Command::Evolve { .. } => evolve(&cfg, &out),
        Command::VerifyAll { .. } => verify_all(&cfg, &out),
    }?;
    let manifest = json!({
        "command": name,
        "config": cfg,
        "versions": { "vrlab": env!("CARGO_PKG_VERSION"), "format": vrlab::io::VERSION },
        "threads": rayon::current_num_threads(),
        "wall_time_s": start.elapsed().as_secs_f64(),
        "success": outcome.success,
        "metrics": outcome.metrics,
        "files": outcome.files,
    });
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    println!("{}", serde_json::to_string_pretty(&manifest["metrics"])?);
    Ok(outcome.success)
}

fn spec_of(cfg: &RunConfig) -> Result<RingSpec> {
    RingSpec::new(cfg.kappa, cfg.w, cfg.eps, cfg.p)
}

fn grid_of(cfg: &RunConfig, spec: &RingSpec) -> Result<AxisymGrid> {
    let (nr, nz) = (cfg.grid.nr, cfg.grid.nz);
    match cfg.domain {
        Some(d) => AxisymGrid::new(d.r0, d.r1, d.z0, d.z1, nr, nz),
        None => AxisymGrid::around_ring(spec.r_star_limit(), nr, nz),
    }
}

fn ground_state(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let gs = solve_ground_state(cfg.p, cfg.tol.unwrap_or(1e-10))?;
    gs.write_csv(&out.join("ground_state.csv"))?;
    let (d1, d2) = gs.pohozaev_defects();
    let mut o = Outcome::new();
    o.metric("p", gs.p);
    o.metric("U0", gs.center_value);
    o.metric("U_prime_1", gs.u_prime_1);
    o.metric("Lambda_p", gs.lambda_p);
    o.metric("energy_integral", gs.energy_integral);
    o.metric("lambda_identity_defect", d1);
    o.metric("energy_identity_defect", d2);
    o.metric("ode_residual", gs.ode_residual());
    o.metric("kernel_mode_residual", gs.kernel_mode_residual());
    o.files = vec!["ground_state.csv".into(), "ground_state.json".into()];
    Ok(o)
}

fn green_check(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let gc = GreenConfig::default();
    let x = HalfPlanePoint::new(1.0, 0.0)?;
    let mut rows = Vec::new();
    for k in 0..=90 {
        let r = 10f64.powf(-5.0 + 0.1 * k as f64);
        let y = HalfPlanePoint::new(1.0, r.sqrt())?;
        let g = g1(x, y, &gc)?;
        let (near, far) = (g1_near(x, y), g1_far(x, y));
        rows.push(vec![rho(x, y), g, near, far, ((g - near) / g).abs(), ((g - far) / g).abs()]);
    }
    write_table(&out.join("green.csv"), &["rho", "g1", "g1_near", "g1_far", "rel_near", "rel_far"], &rows)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut o = Outcome::new();
    let mut bound_rows = Vec::new();
    for delta in [0.5, 1.0, 1.4] {
        let mut fails = 0;
        for _ in 0..1000 {
            let a = HalfPlanePoint::new(10f64.powf(rng.gen_range(-2.0..2.0)), rng.gen_range(-1.0..1.0))?;
            let b = HalfPlanePoint::new(a.x1 * 10f64.powf(rng.gen_range(-3.0..3.0)), a.x2 + 10f64.powf(rng.gen_range(-4.0..2.0)))?;
            if !bound_check(a, b, delta, &gc)? {
                fails += 1;
            }
        }
        bound_rows.push(vec![delta, vrlab::green::bound_constant(delta)?, fails as f64]);
        o.metric(&format!("bound_failures_delta_{delta}"), fails);
        o.success &= fails == 0;
    }
    write_table(&out.join("bound.csv"), &["delta", "C_delta", "failures"], &bound_rows)?;
    o.files = vec!["green.csv".into(), "bound.csv".into()];
    Ok(o)
}

fn ring_params(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let gs = solve_ground_state(cfg.p, 1e-10)?;
    let list = cfg.sweep.clone().unwrap_or_else(|| vec![cfg.eps]);
    let rows: Vec<_> = list
        .iter()
        .map(|&eps| solve_ring_parameters(&RingSpec::new(cfg.kappa, cfg.w, eps, cfg.p)?, &gs))
        .collect::<Result<_>>()?;
    let (header, body) = parameter_table(&rows);
    write_table(&out.join("ring_params.csv"), &header, &body)?;
    let mut o = Outcome::new();
    o.metric("max_residual", rows.iter().fold(0.0f64, |m, r| m.max(r.residual())));
    o.metric("rows", json!(rows));
    o.files = vec!["ring_params.csv".into()];
    Ok(o)
}

fn solve_steady_cmd(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let spec = spec_of(cfg)?;
    let gs = solve_ground_state(spec.p, 1e-10)?;
    let params = solve_ring_parameters(&spec, &gs)?;
    let grid = grid_of(cfg, &spec)?;
    let opts = SteadyOptions { tol: cfg.tol.unwrap_or(1e-10), ..Default::default() };
    let ring = solve_steady(spec, &asymptotic_seed(&gs, &params, grid)?, &opts)?;
    write_field(&out.join("psi.axif"), &ring.psi)?;
    write_field(&out.join("zeta.axif"), &ring.zeta)?;
    let history: Vec<Vec<f64>> = ring.defect_history.iter().enumerate().map(|(k, d)| vec![k as f64, *d]).collect();
    write_table(&out.join("defects.csv"), &["iteration", "defect"], &history)?;
    let ring_json = json!({ "spec": spec, "mu": ring.mu, "far_field": ring.far_field, "center": ring.center });
    fs::write(out.join("ring.json"), serde_json::to_string_pretty(&ring_json)?)?;
    let mut o = Outcome::new();
    o.metric("diagnostics", json!(diagnostics(&ring)));
    o.metric("iterations", ring.iterations);
    o.metric("parameters", json!(params));
    o.files = ["psi.axif", "zeta.axif", "defects.csv", "ring.json"].map(String::from).to_vec();
    Ok(o)
}

fn approx_compare(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let spec = spec_of(cfg)?;
    let gs = solve_ground_state(spec.p, 1e-10)?;
    let params = solve_ring_parameters(&spec, &gs)?;
    let grid = grid_of(cfg, &spec)?;
    let ex = expansion_defect(&gs, &params, grid)?;
    let blow = blowup_check_approximation(&Approximation::new(&gs, params)?, grid)?;
    let ring = solve_steady(spec, &asymptotic_seed(&gs, &params, grid)?, &SteadyOptions::default())?;
    let stream = approx_stream(&gs, &params, grid)?;
    let gap = ring.psi.difference(&stream);
    write_field(&out.join("psi_minus_approx.axif"), &gap)?;
    let mut o = Outcome::new();
    o.metric("expansion", json!(ex));
    o.metric("blowup_of_approximation", json!(blow));
    o.metric("stream_gap_over_eps", gap.sup_norm() / spec.eps);
    o.files = vec!["psi_minus_approx.axif".into()];
    Ok(o)
}

fn load_ring(dir: &Path) -> Result<(RingSpec, FarField, vrlab::fields::ScalarField)> {
    let meta: Value = serde_json::from_str(&fs::read_to_string(dir.join("ring.json"))?)?;
    let spec: RingSpec = serde_json::from_value(meta["spec"].clone())?;
    spec.validate()?;
    let far: FarField = serde_json::from_value(meta["far_field"].clone())?;
    let zeta = read_field(&dir.join("zeta.axif"), FieldKind::Vorticity)?;
    Ok((spec, far, zeta))
}

fn maximize_cmd(_cfg: &RunConfig, from: &Path, out: &Path) -> Result<Outcome> {
    let (spec, far, zeta) = load_ring(from)?;
    let run = maximize_from_class(&zeta, &spec, far)?;
    let probe = uniqueness_probe_fields(&run.result, &zeta, spec.kappa, 1e-2)?;
    write_field(&out.join("maximizer.axif"), &run.result)?;
    let trace: Vec<Vec<f64>> = run
        .trace
        .iter()
        .map(|t| vec![t.iter as f64, t.stage as u8 as f64, t.energy, t.diameter, t.centroid.0, t.centroid.1])
        .collect();
    write_table(&out.join("trace.csv"), &["iter", "stage", "energy", "diameter", "centroid_r", "centroid_z"], &trace)?;
    let mut o = Outcome::new();
    o.metric("energy", run.energy());
    o.metric("iterations", run.iterations);
    o.metric("converged", run.converged);
    o.metric("profile", json!(run.profile));
    o.metric("report", json!(asymptotic_report(&run, spec.kappa, spec.w, spec.eps)));
    o.metric("uniqueness", json!(probe));
    o.success = probe.same;
    o.files = vec!["maximizer.axif".into(), "trace.csv".into()];
    Ok(o)
}

fn evolve(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let spec = spec_of(cfg)?;
    let gs = solve_ground_state(spec.p, 1e-10)?;
    let params = solve_ring_parameters(&spec, &gs)?;
    let grid = grid_of(cfg, &spec)?;
    let ring = solve_steady(spec, &asymptotic_seed(&gs, &params, grid)?, &SteadyOptions::default())?;
    let center = ring.zeta.centroid().ok_or_else(|| Error::Topology("ring has no vorticity".into()))?;
    let (eta, start) = calibrated_perturbation(&ring.zeta, center, cfg.delta * spec.kappa)?;
    let opts = EvolveOptions { far_field: ring.far_field, frame_speed: spec.speed(), ..Default::default() };
    let mut ev = Evolver::new(grid, opts).with_reference(ring.zeta.clone());
    let mut state = ev.start(&start)?;
    let dt = ev.max_dt(&state) / 1.1;
    for _ in 0..cfg.steps {
        state = ev.step(&state, dt)?;
    }
    let rows: Vec<Vec<f64>> = state.monitors.iter().map(Monitor::row).collect();
    write_table(&out.join("monitors.csv"), &Monitor::HEADER, &rows)?;
    write_field(&out.join("zeta_final.axif"), &state.zeta)?;
    let mut o = Outcome::new();
    o.metric("eta", eta);
    o.metric("dt", dt);
    o.metric("t_final", state.t);
    o.metric("drift", json!(Drift::of(&state.monitors)));
    o.files = vec!["monitors.csv".into(), "zeta_final.axif".into()];
    Ok(o)
}

fn verify_all(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let suite = Suite::new(AcceptanceOptions { quick: cfg.quick });
    let mut o = Outcome::new();
    let mut results = Vec::new();
    for (id, _) in vrlab::acceptance::CRITERIA {
        let r = suite.run(id);
        println!("{}", r.line());
        o.success &= r.passed;
        results.push(r);
    }
    let passed = results.iter().filter(|r| r.passed).count();
    println!("{passed} of {} criteria passed", results.len());
    fs::write(out.join("acceptance.json"), serde_json::to_string_pretty(&results)?)?;
    o.metric("passed", passed);
    o.metric("total", results.len());
    o.files = vec!["acceptance.json".into()];
    Ok(o)
}
