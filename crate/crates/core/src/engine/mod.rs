//! The coupled generation map.
//!
//! One generation consumes one [`RandomBlock`] of explicit random inputs:
//! selection uniforms, crossover flags and cuts, mutation masks, and the
//! tie-break seed for the ranking permutation. Runs started from different
//! populations can therefore share the exact same randomness, which is what
//! the pathwise comparison with the auxiliary counting chain requires.

pub mod oracle;

use crate::chromosome::{Chromosome, Population};
use crate::error::{Error, Result};
use crate::landscape::FitnessLandscape;
use crate::selection::{rank_population, SchemeTables, SelectionScheme};
use crate::variation::{crossover_pair, mutate};
use rand::distributions::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::Binomial;

/// The random input of a single generation.
///
/// `s` drives selection, `v` and `w` drive crossover on the pairs
/// (2i-1, 2i), `u` holds the mutation flip masks. `rank_seed` feeds the
/// tie-break permutation of the ranking, so that coupled runs break
/// fitness ties identically.
#[derive(Clone, Debug)]
pub struct RandomBlock {
    pub s: Vec<f64>,
    pub u: Vec<Chromosome>,
    pub v: Vec<bool>,
    pub w: Vec<usize>,
    pub rank_seed: u64,
}

impl RandomBlock {
    pub fn check_dims(&self, m: usize, ell: usize) -> Result<()> {
        if self.s.len() != m
            || self.u.len() != m
            || self.v.len() != m / 2
            || self.w.len() != m / 2
            || self.u.iter().any(|mask| mask.len() != ell)
        {
            return Err(Error::invalid("random block dimensions do not match (m, ell)"));
        }
        Ok(())
    }
}

/// Parameters of one chain.
#[derive(Clone, Debug)]
pub struct GAConfig {
    pub ell: usize,
    pub m: usize,
    pub scheme: SelectionScheme,
    pub p_c: f64,
    pub p_m: f64,
    pub landscape: FitnessLandscape,
    pub seed: u64,
    pub horizon: usize,
}

impl GAConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ell == 0 {
            return Err(Error::config("chromosome length must be at least 1"));
        }
        if self.m == 0 || self.m % 2 != 0 {
            return Err(Error::config("population size must be even and positive"));
        }
        if !(0.0..=1.0).contains(&self.p_c) || !(0.0..=1.0).contains(&self.p_m) {
            return Err(Error::config("p_c and p_m must lie in [0, 1]"));
        }
        self.scheme.validate(self.m)?;
        Ok(())
    }

    /// The critical parameter pi = sigma (1-p_C)(1-p_M)^ell.
    pub fn pi(&self) -> Result<f64> {
        let sigma = self.scheme.drift()?;
        Ok(crate::theory::pi_param(sigma, self.p_c, self.p_m, self.ell))
    }
}

/// Draws one generation's worth of randomness. Draw order is fixed:
/// selection uniforms, crossover flags, cut positions, mutation masks
/// member by member, then the tie-break seed.
///
/// Masks are sampled by drawing the number of flips Binomial(ell, p_M)
/// and then that many distinct positions, which produces the same law as
/// ell independent Bernoulli flags per member.
pub fn draw_block(config: &GAConfig, rng: &mut impl Rng) -> RandomBlock {
    let m = config.m;
    let ell = config.ell;
    let s: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
    let v: Vec<bool> = (0..m / 2).map(|_| rng.gen::<f64>() < config.p_c).collect();
    let w: Vec<usize> = if ell >= 2 {
        (0..m / 2).map(|_| rng.gen_range(1..ell)).collect()
    } else {
        vec![1; m / 2]
    };
    let flips = Binomial::new(ell as u64, config.p_m).expect("p_m validated");
    let u: Vec<Chromosome> = (0..m)
        .map(|_| {
            let k = flips.sample(rng) as usize;
            let mut mask = Chromosome::zeros(ell);
            // Floyd's algorithm: k distinct positions, uniform over subsets
            for j in (ell - k)..ell {
                let t = rng.gen_range(0..=j);
                if mask.get(t) {
                    mask.set(j, true);
                } else {
                    mask.set(t, true);
                }
            }
            mask
        })
        .collect();
    let rank_seed = rng.gen::<u64>();
    RandomBlock { s, u, v, w, rank_seed }
}

/// A generation step together with the parent indices it selected, kept
/// for genealogy tracking.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub population: Population,
    /// selections[j] is the index in the previous population of the parent
    /// drawn for intermediate slot j.
    pub selections: Vec<usize>,
}

fn step_inner(
    config: &GAConfig,
    tables: &SchemeTables,
    x: &Population,
    block: &RandomBlock,
) -> Result<StepOutcome> {
    block.check_dims(config.m, config.ell)?;
    if x.size() != config.m || x.ell() != config.ell {
        return Err(Error::invalid("population dimensions do not match config"));
    }
    let mut rank_rng = ChaCha12Rng::seed_from_u64(block.rank_seed);
    let ranks = rank_population(x, &config.landscape, &mut rank_rng);
    let selections: Vec<usize> = block
        .s
        .iter()
        .map(|&s| ranks.member_with_rank(tables.index_from_uniform(s)))
        .collect();
    let mut members = Vec::with_capacity(config.m);
    for p in 0..config.m / 2 {
        let a = x.member(selections[2 * p]);
        let b = x.member(selections[2 * p + 1]);
        let (c, d) = crossover_pair(a, b, block.v[p], block.w[p])?;
        members.push(mutate(&c, &block.u[2 * p])?);
        members.push(mutate(&d, &block.u[2 * p + 1])?);
    }
    Ok(StepOutcome {
        population: Population::new(members)?,
        selections,
    })
}

/// Applies the coupled map once: selection, crossover, mutation.
pub fn step(config: &GAConfig, x: &Population, block: &RandomBlock) -> Result<Population> {
    let tables = config.scheme.tables(config.m)?;
    Ok(step_inner(config, &tables, x, block)?.population)
}

/// Like [`step`] but also reports which parents were selected.
pub fn step_full(config: &GAConfig, x: &Population, block: &RandomBlock) -> Result<StepOutcome> {
    let tables = config.scheme.tables(config.m)?;
    step_inner(config, &tables, x, block)
}

/// Progeny tracking for a run started from a population containing the
/// Master sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenealogyState {
    /// flags[i] = 1 iff the initial Master sequence appears in the
    /// genealogy of member i.
    pub flags: Vec<bool>,
    /// Number of descendants of the initial Master sequence.
    pub t: usize,
    /// Number of exact Master copies in the population.
    pub n_star: usize,
    /// Maximum number of ones among non-descendants (0 when all members
    /// are descendants).
    pub d: usize,
}

impl GenealogyState {
    pub fn init(x0: &Population) -> Self {
        let flags: Vec<bool> = x0.members().iter().map(|c| c.is_all_ones()).collect();
        Self::from_flags(flags, x0)
    }

    fn from_flags(flags: Vec<bool>, x: &Population) -> Self {
        let t = flags.iter().filter(|&&f| f).count();
        let n_star = x.members().iter().filter(|c| c.is_all_ones()).count();
        let d = x
            .members()
            .iter()
            .zip(&flags)
            .filter(|(_, &f)| !f)
            .map(|(c, _)| c.count_ones())
            .max()
            .unwrap_or(0);
        GenealogyState { flags, t, n_star, d }
    }
}

/// Advances the progeny flags through one generation: a child descends
/// from the Master sequence iff either of its pair's two parents does.
pub fn genealogy_step(
    state: &GenealogyState,
    x_next: &Population,
    selections: &[usize],
) -> Result<GenealogyState> {
    let m = state.flags.len();
    if selections.len() != m || x_next.size() != m {
        return Err(Error::invalid("genealogy dimensions do not match"));
    }
    let mut flags = vec![false; m];
    for p in 0..m / 2 {
        let f = state.flags[selections[2 * p]] || state.flags[selections[2 * p + 1]];
        flags[2 * p] = f;
        flags[2 * p + 1] = f;
    }
    Ok(GenealogyState::from_flags(flags, x_next))
}

/// Which statistics a run records per generation.
#[derive(Clone, Debug, Default)]
pub struct ObserverConfig {
    /// Fractions rho: record the fitness of the floor(rho m)-th best member.
    pub rho_list: Vec<f64>,
    /// Thresholds lambda: record the count of members with fitness >= lambda.
    pub lambda_list: Vec<f64>,
    /// Track descendants of the initial Master sequence.
    pub genealogy: bool,
    /// Flag generations where the best fitness falls below the running
    /// max of the floor(rho m)-th best level.
    pub catastrophe_rho: Option<f64>,
    /// Keep full populations in the trace.
    pub dump_populations: bool,
}

/// One generation's recorded statistics.
#[derive(Clone, Debug)]
pub struct TraceRecord {
    pub generation: usize,
    pub best_fitness: f64,
    /// One entry per configured rho, in order.
    pub level_stats: Vec<f64>,
    /// One entry per configured lambda, in order.
    pub count_stats: Vec<usize>,
    /// (descendant count, Master copy count) when genealogy is tracked.
    pub progeny: Option<(usize, usize)>,
    pub catastrophe: bool,
    pub population: Option<Population>,
}

fn rho_index(rho: f64, m: usize) -> usize {
    ((rho * m as f64).floor() as usize).clamp(1, m)
}

fn record(
    config: &GAConfig,
    observers: &ObserverConfig,
    generation: usize,
    x: &Population,
    genealogy: Option<&GenealogyState>,
) -> Result<TraceRecord> {
    let f = &config.landscape;
    let best = crate::landscape::level_fitness(x, f, 1)?;
    let level_stats = observers
        .rho_list
        .iter()
        .map(|&rho| crate::landscape::level_fitness(x, f, rho_index(rho, config.m)))
        .collect::<Result<Vec<f64>>>()?;
    let count_stats = observers
        .lambda_list
        .iter()
        .map(|&lambda| crate::landscape::count_at_least(x, f, lambda))
        .collect();
    Ok(TraceRecord {
        generation,
        best_fitness: best,
        level_stats,
        count_stats,
        progeny: genealogy.map(|g| (g.t, g.n_star)),
        catastrophe: false,
        population: observers.dump_populations.then(|| x.clone()),
    })
}

/// Catastrophe flags for a trace: generation n is flagged iff its best
/// fitness is strictly below the running max of the reference level
/// (the floor(rho m)-th best fitness) over generations 0..=n.
pub fn observe_catastrophe(best: &[f64], level_at_rho: &[f64]) -> Result<Vec<bool>> {
    if best.len() != level_at_rho.len() {
        return Err(Error::invalid("trace length mismatch"));
    }
    let mut running = f64::NEG_INFINITY;
    let mut flags = Vec::with_capacity(best.len());
    for (&b, &lv) in best.iter().zip(level_at_rho) {
        running = running.max(lv);
        flags.push(b < running);
    }
    Ok(flags)
}

/// Runs the chain for `config.horizon` generations from `x0`, recording
/// one [`TraceRecord`] per generation including generation 0.
///
/// The trace is a pure function of (config, x0): all randomness comes
/// from `config.seed`, and observers never influence the trajectory.
pub fn run(config: &GAConfig, x0: &Population, observers: &ObserverConfig) -> Result<Vec<TraceRecord>> {
    config.validate()?;
    if x0.size() != config.m || x0.ell() != config.ell {
        return Err(Error::invalid("initial population dimensions do not match config"));
    }
    let tables = config.scheme.tables(config.m)?;
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut genealogy = observers.genealogy.then(|| GenealogyState::init(x0));
    let mut trace = Vec::with_capacity(config.horizon + 1);
    trace.push(record(config, observers, 0, x0, genealogy.as_ref())?);
    let mut x = x0.clone();
    for n in 1..=config.horizon {
        let block = draw_block(config, &mut rng);
        let outcome = step_inner(config, &tables, &x, &block)?;
        if let Some(g) = genealogy.as_mut() {
            *g = genealogy_step(g, &outcome.population, &outcome.selections)?;
        }
        x = outcome.population;
        trace.push(record(config, observers, n, &x, genealogy.as_ref())?);
    }
    if let Some(rho) = observers.catastrophe_rho {
        let k = rho_index(rho, config.m);
        let best: Vec<f64> = trace.iter().map(|r| r.best_fitness).collect();
        let levels = trace
            .iter()
            .map(|r| {
                // reuse the recorded level when rho is in the observer list
                match observers.rho_list.iter().position(|&q| rho_index(q, config.m) == k) {
                    Some(idx) => Ok(r.level_stats[idx]),
                    None => crate::landscape::level_fitness(
                        r.population.as_ref().ok_or_else(|| {
                            Error::config(
                                "catastrophe_rho requires rho in rho_list or dump_populations",
                            )
                        })?,
                        &config.landscape,
                        k,
                    ),
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        let flags = observe_catastrophe(&best, &levels)?;
        for (r, flag) in trace.iter_mut().zip(flags) {
            r.catastrophe = flag;
        }
    }
    Ok(trace)
}

/// Runs one trajectory per starting population, all consuming the exact
/// same sequence of random blocks.
pub fn coupled_run(
    config: &GAConfig,
    starts: &[Population],
    observers: &ObserverConfig,
) -> Result<Vec<Vec<TraceRecord>>> {
    config.validate()?;
    if starts.is_empty() {
        return Err(Error::invalid("at least one starting population required"));
    }
    for x0 in starts {
        if x0.size() != config.m || x0.ell() != config.ell {
            return Err(Error::invalid("starting population dimensions do not match config"));
        }
    }
    let tables = config.scheme.tables(config.m)?;
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut states: Vec<Population> = starts.to_vec();
    let mut traces: Vec<Vec<TraceRecord>> = states
        .iter()
        .map(|x| Ok(vec![record(config, observers, 0, x, None)?]))
        .collect::<Result<_>>()?;
    for n in 1..=config.horizon {
        let block = draw_block(config, &mut rng);
        for (x, trace) in states.iter_mut().zip(traces.iter_mut()) {
            let outcome = step_inner(config, &tables, x, &block)?;
            *x = outcome.population;
            trace.push(record(config, observers, n, x, None)?);
        }
    }
    Ok(traces)
}

/// The random-block sequence of a run, exposed so that other processes
/// (the auxiliary chain) can consume the identical randomness.
pub fn block_sequence(config: &GAConfig, n: usize) -> Vec<RandomBlock> {
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    (0..n).map(|_| draw_block(config, &mut rng)).collect()
}
