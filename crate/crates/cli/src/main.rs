mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use reeb_lab::census::{realize_hypersurface, realize_reeb, ReebRealization};
use reeb_lab::cover::{latitude_holonomy, phi, project_reeb_orbit};
use reeb_lab::dynamics::{
    contact_trajectory, magnetic_strength_trajectory, periodic_census_ellipsoid, OrbitCensus, ScanConfig, Verdict,
};
use reeb_lab::finsler::{finsler_report, FinslerCheckConfig};
use reeb_lab::forms::ContactFormSpec;
use reeb_lab::quat::{Quaternion, UnitQuaternion};
use reeb_lab::sampling::{random_unit_quaternion, rng_from_seed};
use reeb_lab::verify::{run_suite, two_orbit_census, Suite};
use reeb_lab::Error;
use serde::Serialize;

use report::{write_csv, write_json, RunConfig};

#[derive(Parser)]
#[command(name = "reeb-lab", version, about = "Reeb and magnetic flows on S3 and ST*S2")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Read angle arguments in degrees.
    #[arg(long, global = true)]
    deg: bool,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run invariant suites.
    Verify {
        /// Suite name or `all`.
        #[arg(long, default_value = "all")]
        suite: String,
    },
    /// Integrate a flow and emit a CSV trajectory.
    Flow(FlowArgs),
    /// Census of closed orbits.
    Orbits {
        /// Deformation of the Reeb flow of alpha_i.
        #[arg(long, conflicts_with = "weights")]
        eps: Option<f64>,
        /// Comma-separated ellipsoid weights.
        #[arg(long, value_delimiter = ',', required_unless_present = "eps")]
        weights: Option<Vec<f64>>,
        /// Number of seeds (a perfect cube).
        #[arg(long, default_value_t = 1000)]
        grid: usize,
        #[arg(long, default_value_t = 200.0)]
        t_max: f64,
        #[arg(long, default_value_t = 1e-6)]
        delta: f64,
    },
    /// Hopf image of the alpha^theta Reeb orbit through its rotor.
    Project {
        #[arg(long, allow_hyphen_values = true)]
        theta: f64,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
    },
    /// Holonomy of a latitude circle.
    Holonomy {
        #[arg(long)]
        colatitude: f64,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0,0,1")]
        pole: Vec<f64>,
        #[arg(long, default_value_t = 64)]
        samples: usize,
    },
    /// Plan for a prescribed number of closed orbits.
    Realize {
        #[arg(long)]
        n: u64,
        #[arg(long, allow_hyphen_values = true)]
        k: i64,
        /// Count fixed points of a Reeb flow instead of characteristics on a hypersurface.
        #[arg(long)]
        reeb: bool,
    },
    /// Finsler checks for K_eps.
    FinslerCheck {
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 100)]
        fibres: usize,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
}

#[derive(Args)]
#[group(skip)]
#[command(group(ArgGroup::new("kind").required(true).args(["reeb", "deformed", "magnetic"])))]
struct FlowArgs {
    /// Reeb flow of alpha^theta.
    #[arg(long)]
    reeb: bool,
    /// Reeb flow of the deformed form alpha^theta_eps.
    #[arg(long)]
    deformed: bool,
    /// Magnetic flow of strength s on T*S2.
    #[arg(long)]
    magnetic: bool,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    theta: f64,
    #[arg(long, required_if_eq("deformed", "true"))]
    eps: Option<f64>,
    #[arg(long, allow_hyphen_values = true, required_if_eq("magnetic", "true"))]
    s: Option<f64>,
    /// End time.
    #[arg(long)]
    t: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    /// Start point `w,x,y,z` on S3 (normalized); random from the seed if omitted.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    u0: Option<Vec<f64>>,
}

enum Failure {
    Usage(String),
    Negative(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::ProjectionFailure { .. }
            | Error::Convergence(_)
            | Error::SingularSystem { .. }
            | Error::StepUnderflow { .. } => Failure::Negative(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Negative(format!("write failed: {e}"))
    }
}

type Outcome = Result<bool, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var("REEB_LAB_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            }
            _ => {
                eprintln!("error: REEB_LAB_THREADS must be a positive integer, got {v:?}");
                return ExitCode::from(2);
            }
        }
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Negative(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let angle = |x: f64| if cli.deg { x.to_radians() } else { x };
    let base = RunConfig { seed: cli.seed, out: cli.out.clone(), ..RunConfig::default() };
    match cli.command {
        Command::Verify { suite } => verify(RunConfig { command: "verify".into(), suite: Some(suite), ..base }),
        Command::Flow(args) => flow(base, args, angle),
        Command::Orbits { eps, weights, grid, t_max, delta } => {
            let config = RunConfig {
                command: "orbits".into(),
                eps,
                weights: weights.clone(),
                grid: eps.map(|_| grid),
                t_max: eps.map(|_| t_max),
                delta: eps.map(|_| delta),
                ..base
            };
            orbits(config)
        }
        Command::Project { theta, samples } => {
            let theta = angle(theta);
            let config = RunConfig { command: "project".into(), theta: Some(theta), samples: Some(samples), ..base };
            write_json(&config, &project_reeb_orbit(theta, samples)?)?;
            Ok(true)
        }
        Command::Holonomy { colatitude, pole, samples } => {
            let pole: [f64; 3] = pole
                .try_into()
                .map_err(|_| Failure::Usage("--pole needs three components".into()))?;
            let theta = angle(colatitude);
            let config = RunConfig {
                command: "holonomy".into(),
                theta: Some(theta),
                pole: Some(pole),
                samples: Some(samples),
                ..base
            };
            write_json(&config, &latitude_holonomy(pole, theta, samples)?)?;
            Ok(true)
        }
        Command::Realize { n, k, reeb } => {
            let config = RunConfig {
                command: if reeb { "realize-reeb".into() } else { "realize".into() },
                n: Some(n),
                k: Some(k),
                ..base
            };
            realize(config, reeb)
        }
        Command::FinslerCheck { eps, fibres, samples } => {
            let config = RunConfig { command: "finsler-check".into(), eps: Some(eps), samples: Some(samples), ..base };
            let mut cfg = FinslerCheckConfig::new(eps)?;
            cfg.fibres = fibres;
            cfg.seed = config.seed;
            let report = finsler_report(&cfg, samples)?;
            write_json(&config, &report)?;
            Ok(report.convex)
        }
    }
}

#[derive(Serialize)]
struct VerifyResult {
    suites: Vec<reeb_lab::verify::SuiteReport>,
    passed: bool,
}

fn verify(config: RunConfig) -> Outcome {
    let name = config.suite.as_deref().unwrap_or("all");
    let suites: Vec<Suite> = if name == "all" { Suite::ALL.to_vec() } else { vec![name.parse()?] };
    let reports = suites.into_iter().map(|s| run_suite(s, config.seed)).collect::<Result<Vec<_>, _>>()?;
    let passed = reports.iter().all(|r| r.passed);
    write_json(&config, &VerifyResult { suites: reports, passed })?;
    Ok(passed)
}

fn start_point(u0: Option<Vec<f64>>, seed: u64) -> Result<UnitQuaternion, Failure> {
    match u0 {
        Some(v) => {
            let a: [f64; 4] = v.try_into().map_err(|_| Failure::Usage("--u0 needs four components".into()))?;
            Ok(UnitQuaternion::new_normalize(Quaternion::from_array(a))?)
        }
        None => Ok(random_unit_quaternion(&mut rng_from_seed(seed))),
    }
}

fn flow(base: RunConfig, args: FlowArgs, angle: impl Fn(f64) -> f64) -> Outcome {
    if !(args.t > 0.0) {
        return Err(Failure::Usage(format!("--t must be positive, got {}", args.t)));
    }
    let u0 = start_point(args.u0, base.seed)?;
    let theta = angle(args.theta);
    let mut config = RunConfig {
        command: "flow".into(),
        u0: Some(u0.quaternion().to_array()),
        t: Some(args.t),
        dt: Some(args.dt),
        ..base
    };
    if args.magnetic {
        let s = args.s.expect("required by clap");
        config.flow = Some("magnetic".into());
        config.s = Some(s);
        let p = phi(u0);
        let start: Vec<f64> = p.x().to_array().into_iter().chain(p.y().to_array()).collect();
        let traj = magnetic_strength_trajectory(s, &start, args.t, args.dt)?;
        let end = traj.last();
        let ret = end.iter().zip(&start).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let closure = [("return_distance", ret), ("max_energy_drift", traj.max_energy_drift())];
        write_csv(&config, &traj, &["x1", "x2", "x3", "p1", "p2", "p3"], &closure)?;
        return Ok(true);
    }
    let eps = if args.deformed { args.eps.expect("required by clap") } else { 0.0 };
    config.flow = Some("contact".into());
    config.theta = Some(theta);
    config.eps = Some(eps);
    let spec = ContactFormSpec::from_angle(theta, eps)?;
    let run = contact_trajectory(&spec, u0, args.t, args.dt)?;
    let closure = [("closed_form_distance", run.closed_form_distance), ("return_distance", run.return_distance)];
    write_csv(&config, &run.trajectory, &["u0", "u1", "u2", "u3"], &closure)?;
    Ok(true)
}

#[derive(Serialize)]
struct OrbitsResult {
    count: Option<usize>,
    #[serde(flatten)]
    census: OrbitCensus,
}

fn orbits(config: RunConfig) -> Outcome {
    let census = match (config.eps, &config.weights) {
        (Some(eps), _) => {
            let cfg = ScanConfig {
                seeds: config.grid.expect("set with eps"),
                t_max: config.t_max.expect("set with eps"),
                delta: config.delta.expect("set with eps"),
                ..ScanConfig::default()
            };
            two_orbit_census(eps, &cfg)?
        }
        (None, Some(w)) => periodic_census_ellipsoid(w)?,
        (None, None) => return Err(Failure::Usage("give --eps or --weights".into())),
    };
    let count = match census.verdict {
        Verdict::Finite(n) => Some(n),
        Verdict::ResonantFamily => None,
    };
    write_json(&config, &OrbitsResult { count, census })?;
    Ok(true)
}

#[derive(Serialize)]
struct PlanResult {
    #[serde(flatten)]
    plan: reeb_lab::census::RealizabilityPlan,
    verified: bool,
}

fn realize(config: RunConfig, reeb: bool) -> Outcome {
    let (n, k) = (config.n.expect("set"), config.k.expect("set"));
    if reeb {
        let k = u64::try_from(k).map_err(|_| Failure::Usage("--k must be nonnegative".into()))?;
        let result = realize_reeb(n, k)?;
        write_json(&config, &result)?;
        return Ok(matches!(result, ReebRealization::Feasible { .. }));
    }
    let plan = realize_hypersurface(n, k)?;
    let feasible = plan.feasible;
    let verified = plan.verify();
    write_json(&config, &PlanResult { plan, verified })?;
    Ok(feasible && verified)
}
