//! The auxiliary counting chain.
//!
//! The chain (N_n) counts, generation by generation, how many slots were
//! filled by selecting one of the current top i members without crossover
//! and without any mutation flip. Driven by the engine's random blocks it
//! is a pathwise lower bound for the counts N(X_n, lambda); on its own it
//! is a Markov chain on {0, ..., m} with 0 absorbing, whose exact
//! transition law mixes two binomials.

use crate::engine::RandomBlock;
use crate::error::{Error, Result};
use crate::selection::{SchemeTables, SelectionScheme};
use rand::distributions::Distribution;
use rand::Rng;
use rand_distr::Binomial;
use statrs::function::gamma::ln_gamma;

/// Parameters of the counting chain. The mutation side enters only
/// through the probability that a whole mask is zero, so it can be given
/// directly instead of via (p_M, ell).
#[derive(Clone, Debug)]
pub struct AuxParams {
    m: usize,
    scheme: SelectionScheme,
    p_c: f64,
    survive_prob: f64,
    tables: SchemeTables,
}

impl AuxParams {
    pub fn new(m: usize, scheme: SelectionScheme, p_c: f64, survive_prob: f64) -> Result<Self> {
        if m == 0 || m % 2 != 0 {
            return Err(Error::invalid("population size must be even and positive"));
        }
        if !(0.0..=1.0).contains(&p_c) {
            return Err(Error::invalid("p_c must lie in [0, 1]"));
        }
        if !(survive_prob > 0.0 && survive_prob <= 1.0) {
            return Err(Error::invalid("survive_prob must lie in (0, 1]"));
        }
        let tables = scheme.tables(m)?;
        Ok(AuxParams { m, scheme, p_c, survive_prob, tables })
    }

    /// Builds the chain matching an engine configuration with mutation
    /// probability `p_m` and chromosome length `ell`.
    pub fn from_mutation(
        m: usize,
        scheme: SelectionScheme,
        p_c: f64,
        p_m: f64,
        ell: usize,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_m) {
            return Err(Error::invalid("p_m must lie in [0, 1]"));
        }
        let survive = (ell as f64 * (1.0 - p_m).ln()).exp();
        Self::new(m, scheme, p_c, survive)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn p_c(&self) -> f64 {
        self.p_c
    }

    pub fn survive_prob(&self) -> f64 {
        self.survive_prob
    }

    pub fn scheme(&self) -> &SelectionScheme {
        &self.scheme
    }

    pub fn sigma(&self) -> Result<f64> {
        self.scheme.drift()
    }

    /// The critical parameter pi = sigma (1-p_C) survive_prob.
    pub fn pi(&self) -> Result<f64> {
        Ok(self.sigma()? * (1.0 - self.p_c) * self.survive_prob)
    }

    /// The per-slot success probability given i live members: the mass of
    /// the top i ranks times the no-mutation probability.
    pub fn eps_m(&self, i: usize) -> Result<f64> {
        if i > self.m {
            return Err(Error::invalid(format!("state {i} out of 0..={}", self.m)));
        }
        Ok(self.tables.top_mass(i) * self.survive_prob)
    }
}

/// Evaluates the counting map on one random block: the number of slots j
/// whose selection uniform lands in the top i ranks, whose pair has no
/// crossover, and whose mutation mask is zero.
pub fn psi_from_block(block: &RandomBlock, scheme: &SelectionScheme, i: usize) -> Result<usize> {
    let m = block.s.len();
    if i > m {
        return Err(Error::invalid(format!("state {i} out of 0..={m}")));
    }
    let tables = scheme.tables(m)?;
    psi_with_tables(block, &tables, i)
}

/// As [`psi_from_block`] with precomputed tables, for per-generation use.
pub fn psi_with_tables(block: &RandomBlock, tables: &SchemeTables, i: usize) -> Result<usize> {
    let m = block.s.len();
    block.check_dims(m, block.u[0].len())?;
    let mut count = 0;
    for j in 0..m {
        if block.v[j / 2] || !block.u[j].is_zero() {
            continue;
        }
        if tables.index_from_uniform(block.s[j]) >= m - i + 1 {
            count += 1;
        }
    }
    Ok(count)
}

/// One transition of the chain: the number of crossover-free pairs is
/// Binomial(m/2, 1-p_C), and each of their 2B slots succeeds with
/// probability eps_m(i).
pub fn sample_step(params: &AuxParams, i: usize, rng: &mut impl Rng) -> Result<usize> {
    let eps = params.eps_m(i)?;
    if i == 0 {
        return Ok(0);
    }
    let b = Binomial::new(params.m as u64 / 2, 1.0 - params.p_c)
        .expect("p_c validated")
        .sample(rng);
    if b == 0 || eps == 0.0 {
        return Ok(0);
    }
    Ok(Binomial::new(2 * b, eps).expect("eps in [0,1]").sample(rng) as usize)
}

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// `count * ln_p` with the convention that zero draws contribute nothing
/// even at probability zero.
fn ln_weight(count: u64, p: f64) -> f64 {
    if count == 0 {
        0.0
    } else {
        count as f64 * p.ln()
    }
}

/// Terms below this relative mass are dropped from the b-sum.
const TERM_TRUNCATION: f64 = 1e-18;

/// The exact transition probability P(i -> j).
///
/// Degenerate crossover probabilities take the direct analytic path; the
/// general case sums over the number of crossover-free pairs in log space
/// with max rescaling.
pub fn transition_prob(params: &AuxParams, i: usize, j: usize) -> Result<f64> {
    let m = params.m;
    if j > m {
        return Err(Error::invalid(format!("state {j} out of 0..={m}")));
    }
    let eps = params.eps_m(i)?;
    if i == 0 || eps == 0.0 {
        return Ok(if j == 0 { 1.0 } else { 0.0 });
    }
    let half = (m / 2) as u64;
    let j64 = j as u64;
    if params.p_c == 1.0 {
        // every pair is crossed: the chain falls straight to 0
        return Ok(if j == 0 { 1.0 } else { 0.0 });
    }
    if params.p_c == 0.0 {
        // single term b = m/2: plain Binomial(m, eps)
        if eps == 1.0 {
            return Ok(if j == m { 1.0 } else { 0.0 });
        }
        if m <= 40 {
            // small m: direct product keeps dyadic cases exact
            let mut choose = 1.0f64;
            for k in 0..j64 {
                choose = choose * (2 * half - k) as f64 / (k + 1) as f64;
            }
            return Ok(choose * eps.powi(j as i32) * (1.0 - eps).powi((m - j) as i32));
        }
        let ln_p = ln_choose(2 * half, j64) + ln_weight(j64, eps) + ln_weight(2 * half - j64, 1.0 - eps);
        return Ok(ln_p.exp());
    }
    // general case: log-space terms over b, streaming max rescale
    let b_min = (j64 + 1) / 2;
    if b_min > half {
        return Ok(0.0);
    }
    let mut terms = Vec::with_capacity((half - b_min + 1) as usize);
    for b in b_min..=half {
        if eps == 1.0 && 2 * b != j64 {
            continue;
        }
        let ln_t = ln_choose(half, b)
            + ln_weight(b, 1.0 - params.p_c)
            + ln_weight(half - b, params.p_c)
            + ln_choose(2 * b, j64)
            + ln_weight(j64, eps)
            + ln_weight(2 * b - j64, 1.0 - eps);
        terms.push(ln_t);
    }
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    let cutoff = max + TERM_TRUNCATION.ln();
    let sum: f64 = terms
        .iter()
        .filter(|&&t| t >= cutoff)
        .map(|&t| (t - max).exp())
        .sum();
    Ok(max.exp() * sum)
}

/// Which boundary a hitting-time simulation waits for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HittingTarget {
    /// First n >= 0 with N_n = 0.
    Absorption,
    /// First n >= 0 with N_n >= the given count.
    Reach(usize),
    /// First n >= 0 with N_n < the given count.
    FallBelow(usize),
}

/// Outcome of a hitting-time simulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HittingOutcome {
    /// The hitting time, or None when the cap was exhausted first.
    pub time: Option<usize>,
    /// The state at the hitting time, or at the cap.
    pub exit_state: usize,
    pub censored: bool,
}

fn hit(target: HittingTarget, state: usize) -> bool {
    match target {
        HittingTarget::Absorption => state == 0,
        HittingTarget::Reach(c) => state >= c,
        HittingTarget::FallBelow(c) => state < c,
    }
}

/// Simulates the chain from `start` until the target boundary or the cap.
pub fn simulate_hitting(
    params: &AuxParams,
    start: usize,
    target: HittingTarget,
    cap: usize,
    rng: &mut impl Rng,
) -> Result<HittingOutcome> {
    if start > params.m {
        return Err(Error::invalid(format!("start {start} out of 0..={}", params.m)));
    }
    let mut state = start;
    for n in 0..=cap {
        if hit(target, state) {
            return Ok(HittingOutcome { time: Some(n), exit_state: state, censored: false });
        }
        if n == cap {
            break;
        }
        state = sample_step(params, state, rng)?;
    }
    Ok(HittingOutcome { time: None, exit_state: state, censored: true })
}

/// Default burn-in for quasi-stationary estimates.
pub fn default_burn_in(m: usize) -> usize {
    10 * (m as f64).ln().ceil() as usize
}

/// Time-average of N_n/m over a window after burn-in, conditioned on not
/// being absorbed. Returns None when the chain is absorbed during burn-in
/// or immediately afterwards.
pub fn quasi_stationary_mean(
    params: &AuxParams,
    start: usize,
    burn_in: usize,
    window: usize,
    rng: &mut impl Rng,
) -> Result<Option<f64>> {
    let mut state = start;
    for _ in 0..burn_in {
        if state == 0 {
            return Ok(None);
        }
        state = sample_step(params, state, rng)?;
    }
    if state == 0 {
        return Ok(None);
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for _ in 0..window {
        sum += state as f64 / params.m as f64;
        count += 1;
        state = sample_step(params, state, rng)?;
        if state == 0 {
            break;
        }
    }
    Ok(Some(sum / count as f64))
}
