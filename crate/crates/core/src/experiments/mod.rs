//! Scenario runner: packaged studies over the engine, the auxiliary chain
//! and the exact oracle, behind a JSON run configuration.
//!
//! Every scenario is reproducible byte-for-byte from (config, master seed):
//! per-trial seeds are derived deterministically, trials share nothing but
//! the read-only config, and results are reduced in trial order, so the
//! worker count never changes the output.

use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::auxchain::{self, AuxParams, HittingTarget};
use crate::chromosome::Population;
use crate::engine::{self, GAConfig, GenealogyState};
use crate::error::{Error, Result};
use crate::landscape::{count_at_least, level_fitness, FitnessLandscape};
use crate::seed::{derive_seed, StreamKind};
use crate::selection::SelectionScheme;
use crate::theory;

/// Thresholds standing in for existential constants. They live in a
/// versioned file fixed at first calibration; later runs regress against
/// them rather than treating them as proven values.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Calibration {
    pub version: u32,
    /// Expected extinct-by-cutoff fraction in the subcritical regime.
    pub extinction_fraction: f64,
    /// Floor on the level-survival frequency in the supercritical regime.
    pub survival_floor: f64,
    /// Tolerance for equilibrium-fraction and paired-sweep comparisons.
    pub tolerance: f64,
}

impl Default for Calibration {
    fn default() -> Self {
        serde_json::from_str(include_str!("../../calibration.json"))
            .expect("embedded calibration file is valid")
    }
}

impl Calibration {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::config(format!("calibration: {e}")))
    }
}

/// The `engine` config section: chain dimensions and probabilities.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EngineSection {
    pub ell: usize,
    pub m: usize,
    pub p_c: f64,
    pub p_m: f64,
    #[serde(default)]
    pub seed: u64,
    pub horizon: usize,
}

/// The `scheme` config section.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SchemeSection {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_minus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_plus: Option<f64>,
}

impl SchemeSection {
    pub fn to_scheme(&self) -> Result<SelectionScheme> {
        match self.kind.as_str() {
            "tournament" => SelectionScheme::tournament(
                self.t.ok_or_else(|| Error::config("tournament scheme needs field t"))?,
            ),
            "linear_ranking" => SelectionScheme::linear_ranking(
                self.eta_minus
                    .ok_or_else(|| Error::config("linear_ranking needs eta_minus"))?,
                self.eta_plus
                    .ok_or_else(|| Error::config("linear_ranking needs eta_plus"))?,
            ),
            other => Err(Error::config(format!("unknown scheme kind {other:?}"))),
        }
    }
}

/// The `landscape` config section.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LandscapeSection {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<f64>>,
}

impl LandscapeSection {
    pub fn to_landscape(&self, ell: usize) -> Result<FitnessLandscape> {
        match self.kind.as_str() {
            "sharp_peak" => Ok(FitnessLandscape::SharpPeak),
            "one_max" => Ok(FitnessLandscape::OneMax),
            "staircase" => FitnessLandscape::staircase(
                self.levels
                    .clone()
                    .ok_or_else(|| Error::config("staircase landscape needs levels"))?,
                ell,
            ),
            other => Err(Error::config(format!("unknown landscape kind {other:?}"))),
        }
    }
}

fn default_trials() -> usize {
    100
}

fn default_margin() -> f64 {
    0.2
}

fn default_window() -> usize {
    10_000
}

fn default_occupation_steps() -> usize {
    200_000
}

/// The `scenario` config section; fields beyond `name` and `trials` apply
/// only to the scenarios that read them.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioSection {
    pub name: String,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Extinction cutoffs, as multiples of ln m.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub c_values: Vec<f64>,
    /// Catastrophe reference fraction: rho = rho* (1 - margin).
    #[serde(default = "default_margin")]
    pub margin: f64,
    /// Population sizes for sweep scenarios; defaults to the engine m.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub m_values: Vec<usize>,
    /// Averaging window for the equilibrium scenario.
    #[serde(default = "default_window")]
    pub window: usize,
    /// Chain length for empirical-occupation comparison.
    #[serde(default = "default_occupation_steps")]
    pub occupation_steps: usize,
    /// Start hitting runs from a population already containing an optimum.
    #[serde(default)]
    pub start_at_optimum: bool,
}

/// A full run configuration, read from one JSON file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub engine: EngineSection,
    pub scheme: SchemeSection,
    pub landscape: LandscapeSection,
    pub scenario: ScenarioSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::config(format!("config: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("config: {e}")))
    }

    /// The engine configuration, validated.
    pub fn ga_config(&self) -> Result<GAConfig> {
        let config = GAConfig {
            ell: self.engine.ell,
            m: self.engine.m,
            scheme: self.scheme.to_scheme()?,
            p_c: self.engine.p_c,
            p_m: self.engine.p_m,
            landscape: self.landscape.to_landscape(self.engine.ell)?,
            seed: self.engine.seed,
            horizon: self.engine.horizon,
        };
        config.validate()?;
        Ok(config)
    }
}

/// One trial's emitted observables, as (column, rendered value) pairs; the
/// column list is identical for every trial of a scenario.
#[derive(Clone, Debug)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub observables: Vec<(String, String)>,
    /// Measured, reported in the summary only: the per-trial CSV must be
    /// identical across machines and worker counts.
    pub wall_time_s: f64,
}

/// Everything a scenario run produces.
#[derive(Clone, Debug)]
pub struct ScenarioOutput {
    pub name: String,
    pub columns: Vec<String>,
    pub trials: Vec<TrialResult>,
    pub summary: Value,
    /// (file name, CSV content) pairs for the grids/ directory.
    pub grids: Vec<(String, String)>,
}

/// Renders the per-trial CSV, header `scenario,trial,seed,<observables>`.
pub fn trials_csv(out: &ScenarioOutput) -> String {
    let mut text = String::from("scenario,trial,seed");
    for c in &out.columns {
        text.push(',');
        text.push_str(c);
    }
    text.push('\n');
    for t in &out.trials {
        text.push_str(&format!("{},{},{}", out.name, t.trial, t.seed));
        for (_, v) in &t.observables {
            text.push(',');
            text.push_str(v);
        }
        text.push('\n');
    }
    text
}

/// Writes trials.csv, summary.json and any grids/*.csv under `dir`.
pub fn write_outputs(out: &ScenarioOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("trials.csv"), trials_csv(out))?;
    let mut text = serde_json::to_string_pretty(&out.summary)
        .map_err(|e| Error::config(format!("summary: {e}")))?;
    text.push('\n');
    std::fs::write(dir.join("summary.json"), text)?;
    if !out.grids.is_empty() {
        let grid_dir = dir.join("grids");
        std::fs::create_dir_all(&grid_dir)?;
        for (name, content) in &out.grids {
            std::fs::write(grid_dir.join(name), content)?;
        }
    }
    Ok(())
}

/// Dispatches a scenario by name on the current rayon pool.
pub fn run_scenario(cfg: &RunConfig, calibration: &Calibration) -> Result<ScenarioOutput> {
    match cfg.scenario.name.as_str() {
        "disordered" => run_disordered(cfg, calibration),
        "quasispecies" => run_quasispecies(cfg, calibration),
        "catastrophe" => run_catastrophe(cfg, calibration),
        "hitting-time" => run_hitting(cfg, calibration),
        "stationary-tiny" => run_stationary_tiny(cfg, calibration),
        "auxchain-equilibrium" => run_auxchain_equilibrium(cfg, calibration),
        "auxchain-persistence" => run_auxchain_persistence(cfg, calibration),
        other => Err(Error::config(format!("unknown scenario {other:?}"))),
    }
}

/// Like [`run_scenario`] but on a dedicated pool of `workers` threads.
pub fn run_scenario_with_workers(
    cfg: &RunConfig,
    calibration: &Calibration,
    workers: Option<usize>,
) -> Result<ScenarioOutput> {
    match workers {
        None => run_scenario(cfg, calibration),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::config(format!("worker pool: {e}")))?;
            pool.install(|| run_scenario(cfg, calibration))
        }
    }
}

fn par_trials<F>(n: usize, f: F) -> Result<Vec<TrialResult>>
where
    F: Fn(usize) -> Result<TrialResult> + Sync,
{
    // indexed collect keeps trial order regardless of worker scheduling
    (0..n).into_par_iter().map(|t| f(t)).collect()
}

fn trial_seed(master: u64, trial: usize) -> u64 {
    derive_seed(master, trial as u64, StreamKind::Engine)
}

fn summary_envelope(cfg: &RunConfig, pi: f64, sigma: f64, rho: Option<f64>) -> Value {
    json!({
        "scenario": cfg.scenario.name,
        "config": serde_json::to_value(cfg).expect("config serializes"),
        "pi": pi,
        "sigma": sigma,
        "rho_star": rho,
        "trials": cfg.scenario.trials,
    })
}

fn merge(mut envelope: Value, extra: Value) -> Value {
    let map = envelope.as_object_mut().expect("envelope is an object");
    for (k, v) in extra.as_object().expect("extra is an object") {
        map.insert(k.clone(), v.clone());
    }
    envelope
}

fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054f64;
    let nf = n as f64;
    let p = successes as f64 / nf;
    let denom = 1.0 + z * z / nf;
    let center = (p + z * z / (2.0 * nf)) / denom;
    let half = (z / denom) * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Least-squares slope of y on x with its standard error.
fn ols_slope(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = points.len() as f64;
    if points.len() < 3 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let sse: f64 = points
        .iter()
        .map(|p| {
            let fit = my + slope * (p.0 - mx);
            (p.1 - fit) * (p.1 - fit)
        })
        .sum();
    let se = (sse / (n - 2.0) / sxx).sqrt();
    Some((slope, se))
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { 0.5 * (values[n / 2 - 1] + values[n / 2]) })
}

fn total_wall_time(trials: &[TrialResult]) -> f64 {
    trials.iter().map(|t| t.wall_time_s).sum()
}

fn rho_index(rho: f64, m: usize) -> usize {
    ((rho * m as f64).floor() as usize).clamp(1, m)
}

/// Subcritical decay: from one copy of the fittest chromosome over a sea of
/// zeros, record when the last exact copy disappears.
pub fn run_disordered(cfg: &RunConfig, calibration: &Calibration) -> Result<ScenarioOutput> {
    let base = cfg.ga_config()?;
    let pi = base.pi()?;
    if pi >= 1.0 {
        return Err(Error::config(format!("scenario needs pi < 1, measured pi = {pi}")));
    }
    let sigma = base.scheme.drift()?;
    let horizon = base.horizon;
    let master = base.seed;
    let trials = par_trials(cfg.scenario.trials, |t| {
        let clock = Instant::now();
        let mut config = base.clone();
        config.seed = trial_seed(master, t);
        let x0 = Population::master_seeded(config.ell, config.m)?;
        let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
        let mut g = GenealogyState::init(&x0);
        let mut x = x0;
        let mut extinction: Option<usize> = None;
        for n in 1..=horizon {
            let block = engine::draw_block(&config, &mut rng);
            let out = engine::step_full(&config, &x, &block)?;
            g = engine::genealogy_step(&g, &out.population, &out.selections)?;
            x = out.population;
            if g.n_star == 0 {
                extinction = Some(n);
                break;
            }
        }
        Ok(TrialResult {
            trial: t,
            seed: config.seed,
            observables: vec![
                (
                    "extinction_generation".into(),
                    extinction.map(|n| n.to_string()).unwrap_or_default(),
                ),
                ("extinct".into(), u8::from(extinction.is_some()).to_string()),
            ],
            wall_time_s: clock.elapsed().as_secs_f64(),
        })
    })?;

    let times: Vec<Option<usize>> = trials
        .iter()
        .map(|t| t.observables[0].1.parse::<usize>().ok())
        .collect();
    let n = trials.len();
    let extinct = times.iter().filter(|t| t.is_some()).count();
    let c_values = if cfg.scenario.c_values.is_empty() {
        vec![2.0, 4.0, 6.5]
    } else {
        cfg.scenario.c_values.clone()
    };
    let ln_m = (base.m as f64).ln();
    let by_cutoff: Vec<Value> = c_values
        .iter()
        .map(|&c| {
            let cutoff = c * ln_m;
            let count = times
                .iter()
                .filter(|t| t.map(|n| (n as f64) <= cutoff).unwrap_or(false))
                .count();
            json!({"c": c, "cutoff": cutoff, "fraction": count as f64 / n as f64})
        })
        .collect();
    let fraction = extinct as f64 / n as f64;
    let summary = merge(
        summary_envelope(cfg, pi, sigma, None),
        json!({
            "fraction_extinct": fraction,
            "extinct_by_c_ln_m": by_cutoff,
            "wall_time_s": total_wall_time(&trials),
            "verdicts": {
                "extinct_fraction_meets_calibration": fraction >= calibration.extinction_fraction,
            },
        }),
    );
    Ok(ScenarioOutput {
        name: cfg.scenario.name.clone(),
        columns: vec!["extinction_generation".into(), "extinct".into()],
        trials,
        summary,
        grids: vec![],
    })
}

/// Supercritical persistence of the best initial fitness level.
pub fn run_quasispecies(cfg: &RunConfig, calibration: &Calibration) -> Result<ScenarioOutput> {
    let base = cfg.ga_config()?;
    let pi = base.pi()?;
    if pi <= 1.0 {
        return Err(Error::config(format!("scenario needs pi > 1, measured pi = {pi}")));
    }
    let sigma = base.scheme.drift()?;
    let rho = theory::rho_star(&base.scheme, pi).ok();
    let horizon = base.horizon;
    let master = base.seed;
    let trials = par_trials(cfg.scenario.trials, |t| {
        let clock = Instant::now();
        let mut config = base.clone();
        config.seed = trial_seed(master, t);
        let x0 = Population::master_seeded(config.ell, config.m)?;
        let lambda0 = x0
            .members()
            .iter()
            .map(|c| config.landscape.eval(c))
            .fold(f64::NEG_INFINITY, f64::max);
        let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
        let mut x = x0;
        let mut lost_at: Option<usize> = None;
        for n in 1..=horizon {
            let block = engine::draw_block(&config, &mut rng);
            x = engine::step(&config, &x, &block)?;
            if count_at_least(&x, &config.landscape, lambda0) == 0 {
                lost_at = Some(n);
                break;
            }
        }
        Ok(TrialResult {
            trial: t,
            seed: config.seed,
            observables: vec![
                ("survival".into(), u8::from(lost_at.is_none()).to_string()),
                ("lost_at".into(), lost_at.map(|n| n.to_string()).unwrap_or_default()),
            ],
            wall_time_s: clock.elapsed().as_secs_f64(),
        })
    })?;

    let n = trials.len();
    let survived = trials.iter().filter(|t| t.observables[0].1 == "1").count();
    let frequency = survived as f64 / n as f64;
    let (lo, hi) = wilson_interval(survived, n);
    let summary = merge(
        summary_envelope(cfg, pi, sigma, rho),
        json!({
            "survival_frequency": frequency,
            "confidence_interval_95": [lo, hi],
            "wall_time_s": total_wall_time(&trials),
            "verdicts": {
                "survival_meets_floor": frequency >= calibration.survival_floor,
            },
        }),
    );
    Ok(ScenarioOutput {
        name: cfg.scenario.name.clone(),
        columns: vec!["survival".into(), "lost_at".into()],
        trials,
        summary,
        grids: vec![],
    })
}

/// First time the best fitness drops below the running record of the
/// floor(rho m)-th best level, at rho = rho* (1 - margin).
pub fn run_catastrophe(cfg: &RunConfig, calibration: &Calibration) -> Result<ScenarioOutput> {
    let base = cfg.ga_config()?;
    let pi = base.pi()?;
    if pi <= 1.0 {
        return Err(Error::config(format!("scenario needs pi > 1, measured pi = {pi}")));
    }
    let sigma = base.scheme.drift()?;
    let rho_fix = theory::rho_star(&base.scheme, pi)?;
    let rho = rho_fix * (1.0 - cfg.scenario.margin);
    let k = rho_index(rho, base.m);
    let horizon = base.horizon;
    let master = base.seed;
    let trials = par_trials(cfg.scenario.trials, |t| {
        let clock = Instant::now();
        let mut config = base.clone();
        config.seed = trial_seed(master, t);
        let x0 = Population::master_seeded(config.ell, config.m)?;
        let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
        let mut running = level_fitness(&x0, &config.landscape, k)?;
        let mut x = x0;
        let mut time: Option<usize> = None;
        for n in 1..=horizon {
            let block = engine::draw_block(&config, &mut rng);
            x = engine::step(&config, &x, &block)?;
            let best = level_fitness(&x, &config.landscape, 1)?;
            let level = level_fitness(&x, &config.landscape, k)?;
            running = running.max(level);
            if best < running {
                time = Some(n);
                break;
            }
        }
        Ok(TrialResult {
            trial: t,
            seed: config.seed,
            observables: vec![
                (
                    "catastrophe_time".into(),
                    time.map(|n| n.to_string()).unwrap_or_default(),
                ),
                ("censored".into(), u8::from(time.is_none()).to_string()),
            ],
            wall_time_s: clock.elapsed().as_secs_f64(),
        })
    })?;

    let n = trials.len();
    let mut times: Vec<f64> = trials
        .iter()
        .filter_map(|t| t.observables[0].1.parse::<f64>().ok())
        .collect();
    let none = n - times.len();
    let summary = merge(
        summary_envelope(cfg, pi, sigma, Some(rho_fix)),
        json!({
            "reference_fraction": rho,
            "margin": cfg.scenario.margin,
            "fraction_without_catastrophe": none as f64 / n as f64,
            "mean_catastrophe_time": mean(&times),
            "median_catastrophe_time": median(&mut times),
            "wall_time_s": total_wall_time(&trials),
            "verdicts": {
                "tolerance": calibration.tolerance,
            },
        }),
    );
    Ok(ScenarioOutput {
        name: cfg.scenario.name.clone(),
        columns: vec!["catastrophe_time".into(), "censored".into()],
        trials,
        summary,
        grids: vec![],
    })
}

/// Hitting time of populations containing an optimal chromosome, first
/// n >= 1; horizon overruns are censored at the cap.
pub fn run_hitting(cfg: &RunConfig, _calibration: &Calibration) -> Result<ScenarioOutput> {
    let base = cfg.ga_config()?;
    let pi = base.pi()?;
    let sigma = base.scheme.drift()?;
    let optimum = base.landscape.max_fitness(base.ell);
    let horizon = base.horizon;
    let master = base.seed;
    let start_at_optimum = cfg.scenario.start_at_optimum;
    let trials = par_trials(cfg.scenario.trials, |t| {
        let clock = Instant::now();
        let mut config = base.clone();
        config.seed = trial_seed(master, t);
        let x0 = if start_at_optimum {
            Population::master_seeded(config.ell, config.m)?
        } else {
            let mut init_rng = crate::seed::stream_rng(master, t as u64, StreamKind::Init);
            Population::uniform_random(config.ell, config.m, &mut init_rng)?
        };
        if start_at_optimum && count_at_least(&x0, &config.landscape, optimum) == 0 {
            return Err(Error::config("start_at_optimum needs the all-ones optimum"));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
        let mut x = x0;
        let mut tau: Option<usize> = None;
        for n in 1..=horizon {
            let block = engine::draw_block(&config, &mut rng);
            x = engine::step(&config, &x, &block)?;
            if count_at_least(&x, &config.landscape, optimum) > 0 {
                tau = Some(n);
                break;
            }
        }
        Ok(TrialResult {
            trial: t,
            seed: config.seed,
            observables: vec![
                ("tau_star".into(), tau.unwrap_or(horizon).to_string()),
                ("censored".into(), u8::from(tau.is_none()).to_string()),
            ],
            wall_time_s: clock.elapsed().as_secs_f64(),
        })
    })?;

    let all: Vec<f64> = trials
        .iter()
        .map(|t| t.observables[0].1.parse::<f64>().unwrap())
        .collect();
    let uncensored: Vec<f64> = trials
        .iter()
        .filter(|t| t.observables[1].1 == "0")
        .map(|t| t.observables[0].1.parse::<f64>().unwrap())
        .collect();
    let censored = trials.len() - uncensored.len();
    let summary = merge(
        summary_envelope(cfg, pi, sigma, None),
        json!({
            "censored": censored,
            "mean_tau_with_censored": mean(&all),
            "mean_tau_uncensored": mean(&uncensored),
            "median_tau_with_censored": median(&mut all.clone()),
            "median_tau_uncensored": median(&mut uncensored.clone()),
            "wall_time_s": total_wall_time(&trials),
        }),
    );
    Ok(ScenarioOutput {
        name: cfg.scenario.name.clone(),
        columns: vec!["tau_star".into(), "censored".into()],
        trials,
        summary,
        grids: vec![],
    })
}

/// Exact stationary law on a tiny state space compared with a long run's
/// empirical occupation.
pub fn run_stationary_tiny(cfg: &RunConfig, _calibration: &Calibration) -> Result<ScenarioOutput> {
    let base = cfg.ga_config()?;
    let pi = base.pi()?;
    let sigma = base.scheme.drift()?;
    let space = engine::oracle::StateSpace::new(base.ell, base.m)?;
    let matrix = engine::oracle::exact_transition_matrix(&base)?;
    let mu = engine::oracle::stationary(&matrix, 1e-13, 1_000_000)?;
    let optimum = base.landscape.max_fitness(base.ell);
    let has_optimum: Vec<bool> = (0..mu.len())
        .map(|code| {
            let x = space.decode(code);
            count_at_least(&x, &base.landscape, optimum) > 0
        })
        .collect();
    let mu_optimum: f64 = mu
        .iter()
        .zip(&has_optimum)
        .filter(|(_, &h)| h)
        .map(|(&p, _)| p)
        .sum();
    let steps = cfg.scenario.occupation_steps;
    let master = base.seed;
    let trials = par_trials(cfg.scenario.trials, |t| {
        let clock = Instant::now();
        let mut config = base.clone();
        config.seed = trial_seed(master, t);
        let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
        let mut x = Population::master_seeded(config.ell, config.m)?;
        let mut occupation = vec![0u64; mu.len()];
        for _ in 0..steps {
            let block = engine::draw_block(&config, &mut rng);
            x = engine::step(&config, &x, &block)?;
            occupation[space.encode(&x)] += 1;
        }
        let l1: f64 = occupation
            .iter()
            .zip(&mu)
            .map(|(&c, &p)| (c as f64 / steps as f64 - p).abs())
            .sum();
        let occupancy: f64 = occupation
            .iter()
            .zip(&has_optimum)
            .filter(|(_, &h)| h)
            .map(|(&c, _)| c as f64 / steps as f64)
            .sum();
        Ok(TrialResult {
            trial: t,
            seed: config.seed,
            observables: vec![
                ("l1_error".into(), format!("{l1}")),
                ("optimum_occupancy".into(), format!("{occupancy}")),
            ],
            wall_time_s: clock.elapsed().as_secs_f64(),
        })
    })?;

    let l1s: Vec<f64> = trials
        .iter()
        .map(|t| t.observables[0].1.parse::<f64>().unwrap())
        .collect();
    let summary = merge(
        summary_envelope(cfg, pi, sigma, None),
        json!({
            "mu_optimum_mass": mu_optimum,
            "occupation_steps": steps,
            "mean_l1_error": mean(&l1s),
            "wall_time_s": total_wall_time(&trials),
        }),
    );
    Ok(ScenarioOutput {
        name: cfg.scenario.name.clone(),
        columns: vec!["l1_error".into(), "optimum_occupancy".into()],
        trials,
        summary,
        grids: vec![],
    })
}

fn m_sweep(cfg: &RunConfig, fallback: &[usize]) -> Vec<usize> {
    if cfg.scenario.m_values.is_empty() {
        fallback.to_vec()
    } else {
        cfg.scenario.m_values.clone()
    }
}

/// Quasi-stationary occupancy of the counting chain against the fixed
/// point of the limit map.
pub fn run_auxchain_equilibrium(
    cfg: &RunConfig,
    calibration: &Calibration,
) -> Result<ScenarioOutput> {
    let scheme = cfg.scheme.to_scheme()?;
    let probe = AuxParams::from_mutation(
        cfg.engine.m,
        scheme.clone(),
        cfg.engine.p_c,
        cfg.engine.p_m,
        cfg.engine.ell,
    )?;
    let pi = probe.pi()?;
    if pi <= 1.0 {
        return Err(Error::config(format!("scenario needs pi > 1, measured pi = {pi}")));
    }
    let sigma = probe.sigma()?;
    let rho = theory::rho_star(&scheme, pi)?;
    let m_list = m_sweep(cfg, &[cfg.engine.m]);
    let per_m = cfg.scenario.trials;
    let window = cfg.scenario.window;
    let master = cfg.engine.seed;
    let trials = par_trials(per_m * m_list.len(), |t| {
        let clock = Instant::now();
        let m = m_list[t / per_m];
        let params = AuxParams::from_mutation(
            m,
            scheme.clone(),
            cfg.engine.p_c,
            cfg.engine.p_m,
            cfg.engine.ell,
        )?;
        let seed = derive_seed(master, t as u64, StreamKind::Aux);
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let qs = auxchain::quasi_stationary_mean(
            &params,
            m,
            auxchain::default_burn_in(m),
            window,
            &mut rng,
        )?;
        Ok(TrialResult {
            trial: t,
            seed,
            observables: vec![
                ("m".into(), m.to_string()),
                ("qs_mean".into(), qs.map(|v| format!("{v}")).unwrap_or_default()),
                ("absorbed".into(), u8::from(qs.is_none()).to_string()),
            ],
            wall_time_s: clock.elapsed().as_secs_f64(),
        })
    })?;

    let mut per_m_stats = Vec::new();
    let mut primary_diff = None;
    for &m in &m_list {
        let values: Vec<f64> = trials
            .iter()
            .filter(|t| t.observables[0].1 == m.to_string())
            .filter_map(|t| t.observables[1].1.parse::<f64>().ok())
            .collect();
        let absorbed = per_m - values.len();
        let mean_value = mean(&values);
        if m == cfg.engine.m {
            primary_diff = mean_value.map(|v| (v - rho).abs());
        }
        per_m_stats.push(json!({
            "m": m,
            "mean_occupancy": mean_value,
            "absorbed": absorbed,
        }));
    }
    let summary = merge(
        summary_envelope(cfg, pi, sigma, Some(rho)),
        json!({
            "per_m": per_m_stats,
            "deviation_from_fixed_point": primary_diff,
            "wall_time_s": total_wall_time(&trials),
            "verdicts": {
                "within_tolerance": primary_diff.map(|d| d <= calibration.tolerance),
            },
        }),
    );
    Ok(ScenarioOutput {
        name: cfg.scenario.name.clone(),
        columns: vec!["m".into(), "qs_mean".into(), "absorbed".into()],
        trials,
        summary,
        grids: vec![],
    })
}

/// Growth of the counting chain's extinction time in m near criticality.
pub fn run_auxchain_persistence(
    cfg: &RunConfig,
    _calibration: &Calibration,
) -> Result<ScenarioOutput> {
    let scheme = cfg.scheme.to_scheme()?;
    let probe = AuxParams::from_mutation(
        cfg.engine.m,
        scheme.clone(),
        cfg.engine.p_c,
        cfg.engine.p_m,
        cfg.engine.ell,
    )?;
    let pi = probe.pi()?;
    let sigma = probe.sigma()?;
    let rho = if pi > 1.0 { Some(theory::rho_star(&scheme, pi)?) } else { None };
    let m_list = m_sweep(cfg, &[10, 20, 30]);
    let per_m = cfg.scenario.trials;
    let cap = cfg.engine.horizon;
    let master = cfg.engine.seed;
    let trials = par_trials(per_m * m_list.len(), |t| {
        let clock = Instant::now();
        let m = m_list[t / per_m];
        let params = AuxParams::from_mutation(
            m,
            scheme.clone(),
            cfg.engine.p_c,
            cfg.engine.p_m,
            cfg.engine.ell,
        )?;
        let start = match rho {
            Some(r) => ((r * m as f64).floor() as usize).clamp(1, m),
            None => (m / 2).max(1),
        };
        let seed = derive_seed(master, t as u64, StreamKind::Aux);
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let outcome =
            auxchain::simulate_hitting(&params, start, HittingTarget::Absorption, cap, &mut rng)?;
        let tau = outcome.time.unwrap_or(cap);
        Ok(TrialResult {
            trial: t,
            seed,
            observables: vec![
                ("m".into(), m.to_string()),
                ("tau_zero".into(), tau.to_string()),
                ("ln_tau_zero".into(), format!("{}", (tau.max(1) as f64).ln())),
                ("censored".into(), u8::from(outcome.censored).to_string()),
            ],
            wall_time_s: clock.elapsed().as_secs_f64(),
        })
    })?;

    let mut per_m_stats = Vec::new();
    let mut points = Vec::new();
    let mut excluded = Vec::new();
    for &m in &m_list {
        let rows: Vec<&TrialResult> = trials
            .iter()
            .filter(|t| t.observables[0].1 == m.to_string())
            .collect();
        let censored = rows.iter().filter(|t| t.observables[3].1 == "1").count();
        let lns: Vec<f64> =
            rows.iter().map(|t| t.observables[2].1.parse::<f64>().unwrap()).collect();
        let over_cap = censored as f64 / rows.len() as f64 > 0.5;
        if over_cap {
            excluded.push(m);
        } else {
            for &v in &lns {
                points.push((m as f64, v));
            }
        }
        per_m_stats.push(json!({
            "m": m,
            "mean_ln_tau": mean(&lns),
            "censored_fraction": censored as f64 / rows.len() as f64,
            "excluded": over_cap,
        }));
    }
    let fit = ols_slope(&points);
    let summary = merge(
        summary_envelope(cfg, pi, sigma, rho),
        json!({
            "per_m": per_m_stats,
            "excluded_m": excluded,
            "slope": fit.map(|(s, _)| s),
            "slope_se": fit.map(|(_, se)| se),
            "slope_positive_95": fit.map(|(s, se)| s - 1.959963984540054 * se > 0.0),
            "wall_time_s": total_wall_time(&trials),
        }),
    );
    Ok(ScenarioOutput {
        name: cfg.scenario.name.clone(),
        columns: vec![
            "m".into(),
            "tau_zero".into(),
            "ln_tau_zero".into(),
            "censored".into(),
        ],
        trials,
        summary,
        grids: vec![],
    })
}

/// Recomputes headline statistics from an emitted trials.csv; used to check
/// that summaries are pure functions of the rows.
pub fn recompute_column(csv: &str, column: &str) -> Result<Vec<Option<f64>>> {
    let mut lines = csv.lines();
    let header = lines.next().ok_or_else(|| Error::invalid("empty csv"))?;
    let idx = header
        .split(',')
        .position(|c| c == column)
        .ok_or_else(|| Error::invalid(format!("no column {column:?}")))?;
    lines
        .map(|line| {
            let cell = line
                .split(',')
                .nth(idx)
                .ok_or_else(|| Error::invalid("short csv row"))?;
            Ok(if cell.is_empty() { None } else { Some(cell.parse::<f64>().map_err(|e| Error::invalid(format!("cell: {e}")))?) })
        })
        .collect()
}
