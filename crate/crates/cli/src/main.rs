//! `sga`: simulate the chain, run the auxiliary counting chain, evaluate
//! the asymptotic theory, execute packaged experiment scenarios, or check
//! small systems against the exact oracle.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde_json::json;

use sga_core::auxchain::{self, AuxParams, HittingTarget};
use sga_core::chromosome::Population;
use sga_core::engine::{self, oracle, ObserverConfig};
use sga_core::experiments::{self, Calibration, RunConfig};
use sga_core::landscape::count_at_least;
use sga_core::theory::{self, rate};

#[derive(Parser)]
#[command(name = "sga", about = "Ranking-selection genetic algorithm toolkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration with engine/scheme/landscape/scenario sections.
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the trial count from the config.
    #[arg(long)]
    trials: Option<usize>,
    /// Override the horizon from the config.
    #[arg(long)]
    horizon: Option<usize>,
    /// Output directory for trials.csv / summary.json / grids.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker thread count; defaults to the number of cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Keep full populations in simulation traces.
    #[arg(long)]
    dump_populations: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trajectory of the population chain and emit its trace.
    Simulate(Common),
    /// Run trajectories of the auxiliary counting chain.
    Auxchain(Common),
    /// Evaluate pi, the regime, rho*, and optionally the rate-function grids.
    Theory(Common),
    /// Run a packaged scenario.
    Experiment {
        /// Scenario name; overrides the config's scenario section.
        scenario: String,
        #[command(flatten)]
        common: Common,
    },
    /// Exact small-system checks: transition matrix and stationary law.
    Oracle(Common),
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&common.config)
        .with_context(|| format!("reading {}", common.config.display()))?;
    if let Some(seed) = common.seed {
        cfg.engine.seed = seed;
    }
    if let Some(trials) = common.trials {
        cfg.scenario.trials = trials;
    }
    if let Some(horizon) = common.horizon {
        cfg.engine.horizon = horizon;
    }
    Ok(cfg)
}

fn write_or_print(out: &Option<PathBuf>, output: &experiments::ScenarioOutput) -> Result<()> {
    match out {
        Some(dir) => {
            experiments::write_outputs(output, dir)?;
            println!("wrote {}", dir.display());
        }
        None => {
            println!("{}", serde_json::to_string_pretty(&output.summary)?);
        }
    }
    Ok(())
}

fn simulate(common: &Common) -> Result<()> {
    let cfg = load(common)?;
    let config = cfg.ga_config()?;
    let observers = ObserverConfig {
        rho_list: vec![],
        lambda_list: vec![],
        genealogy: true,
        catastrophe_rho: None,
        dump_populations: common.dump_populations,
    };
    let x0 = Population::master_seeded(config.ell, config.m)?;
    let trace = engine::run(&config, &x0, &observers)?;
    let mut columns = vec![
        ("best_fitness".to_string(), String::new()),
        ("descendants".to_string(), String::new()),
        ("copies".to_string(), String::new()),
    ];
    if common.dump_populations {
        columns.push(("population".to_string(), String::new()));
    }
    let trials = trace
        .iter()
        .map(|r| {
            let (t, n_star) = r.progeny.unwrap_or((0, 0));
            let mut observables = vec![
                ("best_fitness".to_string(), format!("{}", r.best_fitness)),
                ("descendants".to_string(), t.to_string()),
                ("copies".to_string(), n_star.to_string()),
            ];
            if common.dump_populations {
                let code = r.population.as_ref().map(|x| x.to_code()).unwrap_or(0);
                observables.push(("population".to_string(), code.to_string()));
            }
            experiments::TrialResult {
                trial: r.generation,
                seed: config.seed,
                observables,
                wall_time_s: 0.0,
            }
        })
        .collect();
    let last = trace.last().expect("trace is never empty");
    let output = experiments::ScenarioOutput {
        name: "simulate".into(),
        columns: columns.into_iter().map(|(c, _)| c).collect(),
        trials,
        summary: json!({
            "scenario": "simulate",
            "pi": config.pi()?,
            "generations": config.horizon,
            "final_best_fitness": last.best_fitness,
            "final_copies": last.progeny.map(|p| p.1),
        }),
        grids: vec![],
    };
    write_or_print(&common.out, &output)
}

fn aux_params(cfg: &RunConfig) -> Result<AuxParams> {
    Ok(AuxParams::from_mutation(
        cfg.engine.m,
        cfg.scheme.to_scheme()?,
        cfg.engine.p_c,
        cfg.engine.p_m,
        cfg.engine.ell,
    )?)
}

fn auxchain_cmd(common: &Common) -> Result<()> {
    let cfg = load(common)?;
    let params = aux_params(&cfg)?;
    let m = params.m();
    let cap = cfg.engine.horizon;
    let trials: Vec<experiments::TrialResult> = (0..cfg.scenario.trials)
        .map(|t| {
            let seed = sga_core::seed::derive_seed(
                cfg.engine.seed,
                t as u64,
                sga_core::seed::StreamKind::Aux,
            );
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let outcome =
                auxchain::simulate_hitting(&params, m, HittingTarget::Absorption, cap, &mut rng)?;
            Ok(experiments::TrialResult {
                trial: t,
                seed,
                observables: vec![
                    (
                        "absorption_time".into(),
                        outcome.time.map(|n| n.to_string()).unwrap_or_default(),
                    ),
                    ("censored".into(), u8::from(outcome.censored).to_string()),
                ],
                wall_time_s: 0.0,
            })
        })
        .collect::<sga_core::Result<_>>()?;
    let absorbed = trials.iter().filter(|t| t.observables[1].1 == "0").count();
    let output = experiments::ScenarioOutput {
        name: "auxchain".into(),
        columns: vec!["absorption_time".into(), "censored".into()],
        trials,
        summary: json!({
            "scenario": "auxchain",
            "pi": params.pi()?,
            "m": m,
            "cap": cap,
            "absorbed": absorbed,
            "trials": cfg.scenario.trials,
        }),
        grids: vec![],
    };
    write_or_print(&common.out, &output)
}

fn grid_csv(grid: &rate::RateGrid, with_minimizers: bool) -> String {
    let mut text = String::from(if with_minimizers {
        "s,t,value,p_star,beta_star\n"
    } else {
        "s,t,value\n"
    });
    for i in 0..=grid.n {
        for j in 0..=grid.n {
            let (p, b) = grid.minimizers[i * (grid.n + 1) + j];
            let v = grid.get(i, j);
            if with_minimizers {
                text.push_str(&format!(
                    "{},{},{},{},{}\n",
                    grid.fraction(i),
                    grid.fraction(j),
                    v,
                    p,
                    b
                ));
            } else {
                text.push_str(&format!("{},{},{}\n", grid.fraction(i), grid.fraction(j), v));
            }
        }
    }
    text
}

fn theory_cmd(common: &Common) -> Result<()> {
    let cfg = load(common)?;
    let scheme = cfg.scheme.to_scheme()?;
    let sigma = scheme.drift()?;
    let pi = theory::pi_param(sigma, cfg.engine.p_c, cfg.engine.p_m, cfg.engine.ell);
    let regime = if pi > 1.0 { "quasispecies" } else { "disordered" };
    let rho = theory::rho_star(&scheme, pi)?;
    println!("sigma = {sigma}");
    println!("pi = {pi}");
    println!("regime = {regime}");
    println!("rho_star = {rho}");
    if let Some(dir) = &common.out {
        // moderate lattice by default; the acceptance grid lives in tests
        let lattice = 128;
        let resolution = 1.0 / lattice as f64;
        let grid = rate::build_v1_grid(&scheme, pi.min(sigma), lattice, resolution)?;
        let closure = rate::v_compose(&grid, None);
        let output = experiments::ScenarioOutput {
            name: "theory".into(),
            columns: vec![],
            trials: vec![],
            summary: json!({
                "scenario": "theory",
                "sigma": sigma,
                "pi": pi,
                "regime": regime,
                "rho_star": rho,
                "lattice": lattice,
            }),
            grids: vec![
                ("v1.csv".into(), grid_csv(&grid, true)),
                ("v_closure.csv".into(), grid_csv(&closure, false)),
            ],
        };
        experiments::write_outputs(&output, dir)?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}

fn oracle_cmd(common: &Common) -> Result<()> {
    let cfg = load(common)?;
    let config = cfg.ga_config()?;
    let space = oracle::StateSpace::new(config.ell, config.m)?;
    let matrix = oracle::exact_transition_matrix(&config)?;
    let mu = oracle::stationary(&matrix, 1e-13, 1_000_000)?;
    let best = config.landscape.max_fitness(config.ell);
    let optimum_mass: f64 = mu
        .iter()
        .enumerate()
        .filter(|(code, _)| count_at_least(&space.decode(*code), &config.landscape, best) > 0)
        .map(|(_, &p)| p)
        .sum();
    let summary = json!({
        "scenario": "oracle",
        "states": matrix.n,
        "row_sum_defect": matrix.row_sum_defect(),
        "pi": config.pi()?,
        "mu_optimum_mass": optimum_mass,
    });
    match &common.out {
        Some(dir) => {
            let mut csv = String::from("state,stationary_mass\n");
            for (code, &p) in mu.iter().enumerate() {
                csv.push_str(&format!("{code},{p}\n"));
            }
            let output = experiments::ScenarioOutput {
                name: "oracle".into(),
                columns: vec![],
                trials: vec![],
                summary,
                grids: vec![("stationary.csv".into(), csv)],
            };
            experiments::write_outputs(&output, dir)?;
            println!("wrote {}", dir.display());
        }
        None => println!("{}", serde_json::to_string_pretty(&summary)?),
    }
    Ok(())
}

fn experiment_cmd(scenario: &str, common: &Common) -> Result<()> {
    let mut cfg = load(common)?;
    cfg.scenario.name = scenario.to_string();
    if common.dump_populations {
        bail!("--dump-populations applies to `simulate` only");
    }
    let calibration = Calibration::default();
    let output = experiments::run_scenario_with_workers(&cfg, &calibration, common.workers)?;
    write_or_print(&common.out, &output)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Simulate(common) => simulate(common),
        Command::Auxchain(common) => auxchain_cmd(common),
        Command::Theory(common) => theory_cmd(common),
        Command::Experiment { scenario, common } => experiment_cmd(scenario, common),
        Command::Oracle(common) => oracle_cmd(common),
    }
}
