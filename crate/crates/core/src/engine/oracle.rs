//! Exact transition matrices for tiny instances.
//!
//! For state spaces of at most 4096 populations the full one-step law
//! P = P_S P_C P_M is computed exactly: the selection factor averages over
//! all tie-consistent rank permutations, the crossover and mutation
//! factors come from the variation module's exact kernels. The matrix is
//! the reference against which the simulator's empirical law is checked.

use crate::chromosome::{Chromosome, Population};
use crate::engine::GAConfig;
use crate::error::{Error, Result};
use crate::variation::{crossover_prob, mutation_prob};
use rayon::prelude::*;
use std::collections::HashMap;

/// Largest number of populations the oracle will enumerate.
pub const ORACLE_STATE_CAP: usize = 4096;

/// A dense row-stochastic matrix over the enumerated population states.
#[derive(Clone, Debug)]
pub struct Matrix {
    pub n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix { n, data: vec![0.0; n * n] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            assert_eq!(row.len(), n);
            data.extend(row);
        }
        Matrix { n, data }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Maximum deviation of any row sum from 1.
    pub fn row_sum_defect(&self) -> f64 {
        (0..self.n)
            .map(|i| (self.row(i).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// True iff the positive-entry digraph is strongly connected.
    pub fn irreducible(&self) -> bool {
        self.reaches_all(false) && self.reaches_all(true)
    }

    fn reaches_all(&self, transpose: bool) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..self.n {
                let p = if transpose { self.get(j, i) } else { self.get(i, j) };
                if p > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.iter().all(|&s| s)
    }
}

/// The enumerated state space: population index <-> bit code.
#[derive(Clone, Copy, Debug)]
pub struct StateSpace {
    pub ell: usize,
    pub m: usize,
    pub size: usize,
}

impl StateSpace {
    pub fn new(ell: usize, m: usize) -> Result<Self> {
        let bits = ell * m;
        if bits > 12 {
            return Err(Error::capacity(format!(
                "state space 2^{bits} exceeds {ORACLE_STATE_CAP} populations"
            )));
        }
        Ok(StateSpace { ell, m, size: 1usize << bits })
    }

    pub fn decode(&self, code: usize) -> Population {
        Population::from_code(code as u64, self.ell, self.m)
    }

    pub fn encode(&self, x: &Population) -> usize {
        x.to_code() as usize
    }
}

/// One fitness group of a ranked population: consecutive rank positions
/// and the multiset of chromosome values occupying them.
struct TieGroup {
    /// rank positions (1-based) occupied by the group, ascending
    ranks: Vec<usize>,
    /// distinct value codes with multiplicities
    values: Vec<(u64, usize)>,
    /// all distinct assignments rank-slot -> value code
    arrangements: Vec<Vec<u64>>,
}

fn enumerate_arrangements(values: &[(u64, usize)], slots: usize) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    let mut counts: Vec<usize> = values.iter().map(|&(_, c)| c).collect();
    let mut current = Vec::with_capacity(slots);
    fn rec(
        values: &[(u64, usize)],
        counts: &mut Vec<usize>,
        current: &mut Vec<u64>,
        slots: usize,
        out: &mut Vec<Vec<u64>>,
    ) {
        if current.len() == slots {
            out.push(current.clone());
            return;
        }
        for k in 0..values.len() {
            if counts[k] > 0 {
                counts[k] -= 1;
                current.push(values[k].0);
                rec(values, counts, current, slots, out);
                current.pop();
                counts[k] += 1;
            }
        }
    }
    rec(values, &mut counts, &mut current, slots, &mut out);
    out
}

fn tie_groups(config: &GAConfig, x: &Population) -> Vec<TieGroup> {
    // sort member value codes by fitness ascending; ranks 1..m follow
    let mut scored: Vec<(f64, u64)> = x
        .members()
        .iter()
        .map(|c| (config.landscape.eval(c), c.to_code()))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut groups = Vec::new();
    let mut start = 0usize;
    while start < scored.len() {
        let mut end = start + 1;
        while end < scored.len() && scored[end].0 == scored[start].0 {
            end += 1;
        }
        let mut counts: HashMap<u64, usize> = HashMap::new();
        for &(_, code) in &scored[start..end] {
            *counts.entry(code).or_insert(0) += 1;
        }
        let mut values: Vec<(u64, usize)> = counts.into_iter().collect();
        values.sort_unstable();
        let ranks: Vec<usize> = (start + 1..=end).collect();
        let arrangements = enumerate_arrangements(&values, ranks.len());
        groups.push(TieGroup { ranks, values, arrangements });
        start = end;
    }
    groups
}

/// Exact selection row for population `x`: the law of the intermediate
/// population after m independent ranking-selection draws, averaged over
/// the uniform tie-breaking permutation.
fn selection_row(config: &GAConfig, space: &StateSpace, x_code: usize) -> Result<Vec<f64>> {
    let x = space.decode(x_code);
    let groups = tie_groups(config, &x);
    // fitness of each possible chromosome code, to route slots to groups
    let chrom_count = 1usize << config.ell;
    let mut group_of: Vec<Option<usize>> = vec![None; chrom_count];
    for (gi, g) in groups.iter().enumerate() {
        for &(code, _) in &g.values {
            group_of[code as usize] = Some(gi);
        }
    }
    let masses: Vec<f64> = (1..=config.m)
        .map(|r| config.scheme.selection_mass(config.m, r))
        .collect::<Result<_>>()?;
    let mask = (1usize << config.ell) - 1;
    let mut row = vec![0.0; space.size];
    let mut demanded: Vec<Vec<u64>> = vec![Vec::new(); groups.len()];
    'states: for y_code in 0..space.size {
        for d in demanded.iter_mut() {
            d.clear();
        }
        for slot in 0..config.m {
            let v = (y_code >> (slot * config.ell)) & mask;
            match group_of[v] {
                Some(gi) => demanded[gi].push(v as u64),
                None => continue 'states, // value absent from x: probability 0
            }
        }
        let mut prob = 1.0;
        for (g, dem) in groups.iter().zip(&demanded) {
            if dem.is_empty() {
                continue;
            }
            let mut acc = 0.0;
            for a in &g.arrangements {
                let mut term = 1.0;
                for &v in dem {
                    let q: f64 = g
                        .ranks
                        .iter()
                        .zip(a)
                        .filter(|&(_, &av)| av == v)
                        .map(|(&r, _)| masses[r - 1])
                        .sum();
                    term *= q;
                }
                acc += term;
            }
            prob *= acc / g.arrangements.len() as f64;
        }
        row[y_code] = prob;
    }
    Ok(row)
}

/// Applies the exact crossover kernel on every pair to a row vector.
fn crossover_apply(config: &GAConfig, space: &StateSpace, row: &[f64]) -> Result<Vec<f64>> {
    let ell = config.ell;
    let pair_codes = 1usize << (2 * ell);
    // pair kernel: (a,b) packed as a | b << ell
    let mut kernel = vec![0.0; pair_codes * pair_codes];
    let mask = (1usize << ell) - 1;
    for from in 0..pair_codes {
        let a = Chromosome::from_code((from & mask) as u64, ell);
        let b = Chromosome::from_code((from >> ell) as u64, ell);
        for to in 0..pair_codes {
            let a2 = Chromosome::from_code((to & mask) as u64, ell);
            let b2 = Chromosome::from_code((to >> ell) as u64, ell);
            kernel[from * pair_codes + to] = crossover_prob(config.p_c, (&a, &b), (&a2, &b2))?;
        }
    }
    let mut current = row.to_vec();
    for p in 0..config.m / 2 {
        let shift = 2 * p * ell;
        let pair_mask = (pair_codes - 1) << shift;
        let mut next = vec![0.0; space.size];
        for (s, &w) in current.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let from = (s & pair_mask) >> shift;
            let base = s & !pair_mask;
            for to in 0..pair_codes {
                let k = kernel[from * pair_codes + to];
                if k > 0.0 {
                    next[base | (to << shift)] += w * k;
                }
            }
        }
        current = next;
    }
    Ok(current)
}

/// Applies the exact mutation kernel on every member to a row vector.
fn mutation_apply(config: &GAConfig, space: &StateSpace, row: &[f64]) -> Result<Vec<f64>> {
    let ell = config.ell;
    let codes = 1usize << ell;
    let mut kernel = vec![0.0; codes * codes];
    for from in 0..codes {
        let u = Chromosome::from_code(from as u64, ell);
        for to in 0..codes {
            let v = Chromosome::from_code(to as u64, ell);
            kernel[from * codes + to] = mutation_prob(config.p_m, &u, &v)?;
        }
    }
    let mut current = row.to_vec();
    for j in 0..config.m {
        let shift = j * ell;
        let member_mask = (codes - 1) << shift;
        let mut next = vec![0.0; space.size];
        for (s, &w) in current.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let from = (s & member_mask) >> shift;
            let base = s & !member_mask;
            for to in 0..codes {
                let k = kernel[from * codes + to];
                if k > 0.0 {
                    next[base | (to << shift)] += w * k;
                }
            }
        }
        current = next;
    }
    Ok(current)
}

/// The exact one-step matrix P = P_S P_C P_M over all populations.
pub fn exact_transition_matrix(config: &GAConfig) -> Result<Matrix> {
    config.validate()?;
    let space = StateSpace::new(config.ell, config.m)?;
    let rows: Vec<Vec<f64>> = (0..space.size)
        .into_par_iter()
        .map(|x_code| {
            let row = selection_row(config, &space, x_code)?;
            let row = crossover_apply(config, &space, &row)?;
            mutation_apply(config, &space, &row)
        })
        .collect::<Result<_>>()?;
    let matrix = Matrix::from_rows(rows);
    let defect = matrix.row_sum_defect();
    if defect > 1e-10 {
        return Err(Error::domain(format!("row sum defect {defect}")));
    }
    Ok(matrix)
}

/// The selection factor alone (rows of P_S), for factor-level tests.
pub fn exact_selection_matrix(config: &GAConfig) -> Result<Matrix> {
    config.validate()?;
    let space = StateSpace::new(config.ell, config.m)?;
    let rows: Vec<Vec<f64>> = (0..space.size)
        .into_par_iter()
        .map(|x_code| selection_row(config, &space, x_code))
        .collect::<Result<_>>()?;
    Ok(Matrix::from_rows(rows))
}

/// The mutation factor alone (rows of P_M).
pub fn exact_mutation_matrix(config: &GAConfig) -> Result<Matrix> {
    config.validate()?;
    let space = StateSpace::new(config.ell, config.m)?;
    let rows: Vec<Vec<f64>> = (0..space.size)
        .into_par_iter()
        .map(|x_code| {
            let mut row = vec![0.0; space.size];
            row[x_code] = 1.0;
            mutation_apply(config, &space, &row)
        })
        .collect::<Result<_>>()?;
    Ok(Matrix::from_rows(rows))
}

/// The stationary distribution by damped power iteration.
pub fn stationary(matrix: &Matrix, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = matrix.n;
    let mut mu = vec![1.0 / n as f64; n];
    for _ in 0..max_iter {
        let mut next = vec![0.0; n];
        for i in 0..n {
            let w = mu[i];
            if w == 0.0 {
                continue;
            }
            for (j, &p) in matrix.row(i).iter().enumerate() {
                next[j] += w * p;
            }
        }
        // lazy step kills any periodicity
        for j in 0..n {
            next[j] = 0.5 * next[j] + 0.5 * mu[j];
        }
        let diff: f64 = mu.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        mu = next;
        if diff < tol {
            let total: f64 = mu.iter().sum();
            for v in mu.iter_mut() {
                *v /= total;
            }
            return Ok(mu);
        }
    }
    Err(Error::domain("power iteration did not converge"))
}

/// Solves e = b + Q e by Gauss-Seidel; Q is `matrix` restricted to the
/// unknown set, strictly substochastic there.
fn solve_linear(
    matrix: &Matrix,
    unknown: &[bool],
    b: &[f64],
    fixed: &[f64],
) -> Result<Vec<f64>> {
    let n = matrix.n;
    let mut x: Vec<f64> = fixed.to_vec();
    for iter in 0..200_000 {
        let mut delta = 0.0f64;
        for i in 0..n {
            if !unknown[i] {
                continue;
            }
            let mut v = b[i];
            for (j, &p) in matrix.row(i).iter().enumerate() {
                if p > 0.0 {
                    v += p * x[j];
                }
            }
            delta = delta.max((v - x[i]).abs());
            x[i] = v;
        }
        if delta < 1e-13 {
            return Ok(x);
        }
        if iter == 199_999 {
            break;
        }
    }
    Err(Error::domain("first-passage system did not converge"))
}

/// Checks the invariant-measure bound
/// mu(G) <= sup_{x in V} P(hit G before returning to V | x)
///          * sup_{y in G} E(first entry time of V | y).
///
/// Hitting G counts time 0, entering V counts only times >= 1. Returns
/// (lhs, rhs); the caller asserts lhs <= rhs.
pub fn check_invariant_measure_bound(
    matrix: &Matrix,
    v_set: &[usize],
    g_set: &[usize],
) -> Result<(f64, f64)> {
    let n = matrix.n;
    if v_set.is_empty() || g_set.is_empty() {
        return Err(Error::invalid("V and G must be non-empty"));
    }
    if !matrix.irreducible() {
        return Err(Error::domain("chain is reducible"));
    }
    let mut in_v = vec![false; n];
    for &i in v_set {
        in_v[i] = true;
    }
    let mut in_g = vec![false; n];
    for &i in g_set {
        in_g[i] = true;
    }
    let mu = stationary(matrix, 1e-14, 2_000_000)?;
    let lhs: f64 = g_set.iter().map(|&i| mu[i]).sum();

    // h(x) = P(hit G strictly before entering V at a time >= 1 | X_0 = x),
    // for x outside G; states in G score 1 at time 0
    // one-step: h(x) = sum_y P(x,y) [y in V -> 0 except y in G at time >= 1
    // never wins once y in V]; precisely: target at time >= 1 is "in G and
    // not in V" or continue from "neither"
    let unknown: Vec<bool> = (0..n).map(|i| !in_g[i] && !in_v[i]).collect();
    let mut b = vec![0.0; n];
    let mut fixed = vec![0.0; n];
    for i in 0..n {
        if in_g[i] && !in_v[i] {
            fixed[i] = 1.0;
        }
        // i in V (and not G): 0; i in G and V: at time >= 1 tau_G = tau_V,
        // not strictly before, so 0 as a continuation value
        if in_g[i] && in_v[i] {
            fixed[i] = 0.0;
        }
    }
    let h_cont = solve_linear(matrix, &unknown, &b, &fixed)?;
    let sup_h = v_set
        .iter()
        .map(|&x| {
            if in_g[x] {
                1.0 // tau_G = 0 < tau_V
            } else {
                // start in V \ G: one step, then continuation values
                matrix
                    .row(x)
                    .iter()
                    .enumerate()
                    .map(|(y, &p)| p * h_cont[y])
                    .sum()
            }
        })
        .fold(0.0, f64::max);

    // E(tau_V | y): e(x) = 1 + sum_{z not in V} P(x,z) e(z)
    let unknown_e: Vec<bool> = (0..n).map(|i| !in_v[i]).collect();
    for item in b.iter_mut() {
        *item = 1.0;
    }
    let fixed_e = vec![0.0; n];
    let e_inner = solve_linear(matrix, &unknown_e, &b, &fixed_e)?;
    let sup_e = g_set
        .iter()
        .map(|&y| {
            1.0 + matrix
                .row(y)
                .iter()
                .enumerate()
                .filter(|&(z, _)| !in_v[z])
                .map(|(z, &p)| p * e_inner[z])
                .sum::<f64>()
        })
        .fold(0.0, f64::max);

    Ok((lhs, sup_h * sup_e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::FitnessLandscape;
    use crate::selection::SelectionScheme;
    use approx::assert_abs_diff_eq;

    fn tiny_config(ell: usize, m: usize, p_c: f64, p_m: f64) -> GAConfig {
        GAConfig {
            ell,
            m,
            scheme: SelectionScheme::tournament(2).unwrap(),
            p_c,
            p_m,
            landscape: FitnessLandscape::SharpPeak,
            seed: 0,
            horizon: 0,
        }
    }

    #[test]
    fn capacity_gate() {
        assert!(StateSpace::new(4, 3).is_ok());
        assert!(StateSpace::new(4, 4).is_err());
        assert!(StateSpace::new(3, 5).is_err());
        assert!(StateSpace::new(2, 6).is_ok());
        assert!(StateSpace::new(1, 12).is_ok());
    }

    #[test]
    fn rows_sum_to_one() {
        for (ell, m, p_c, p_m) in [(1, 2, 0.0, 0.0), (2, 2, 0.3, 0.1), (2, 4, 0.7, 0.5)] {
            let config = tiny_config(ell, m, p_c, p_m);
            let p = exact_transition_matrix(&config).unwrap();
            assert!(p.row_sum_defect() < 1e-10);
        }
    }

    #[test]
    fn zero_mutation_preserves_selection_crossover_support() {
        // p_M = 0: mutation factor is the identity, so P equals the
        // selection+crossover composition
        let config = tiny_config(2, 2, 0.3, 0.0);
        let p = exact_transition_matrix(&config).unwrap();
        let m_matrix = exact_mutation_matrix(&config).unwrap();
        for i in 0..m_matrix.n {
            for j in 0..m_matrix.n {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(m_matrix.get(i, j), expect, epsilon = 1e-14);
            }
        }
        assert!(p.row_sum_defect() < 1e-10);
    }

    #[test]
    fn half_mutation_makes_rows_uniform() {
        // p_M = 1/2: each chromosome is rerandomized, every transition row
        // of the full product is uniform
        let config = tiny_config(2, 2, 0.3, 0.5);
        let p = exact_transition_matrix(&config).unwrap();
        let uniform = 1.0 / p.n as f64;
        for i in 0..p.n {
            for j in 0..p.n {
                assert_abs_diff_eq!(p.get(i, j), uniform, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn selection_tie_free_matches_direct_product() {
        // without ties the tie-averaged row is the plain product of
        // independent draws
        let config = GAConfig {
            landscape: FitnessLandscape::OneMax,
            ..tiny_config(1, 2, 0.0, 0.0)
        };
        let space = StateSpace::new(1, 2).unwrap();
        // x = (0, 1): member 1 has rank 2
        let x_code = 0b10usize;
        let row = selection_row(&config, &space, x_code).unwrap();
        let q0 = config.scheme.selection_mass(2, 1).unwrap();
        let q1 = config.scheme.selection_mass(2, 2).unwrap();
        assert_abs_diff_eq!(row[0b00], q0 * q0, epsilon = 1e-14);
        assert_abs_diff_eq!(row[0b01], q1 * q0, epsilon = 1e-14);
        assert_abs_diff_eq!(row[0b10], q0 * q1, epsilon = 1e-14);
        assert_abs_diff_eq!(row[0b11], q1 * q1, epsilon = 1e-14);
    }

    #[test]
    fn selection_all_ties_is_symmetric_uniform_choice() {
        // all fitnesses equal: averaging over the tie permutation makes
        // every member equally likely per slot
        let mut config = tiny_config(1, 2, 0.0, 0.0);
        let mut table = std::collections::HashMap::new();
        table.insert(Chromosome::zeros(1), 1.0);
        table.insert(Chromosome::from_bitstring("1").unwrap(), 1.0);
        config.landscape = FitnessLandscape::custom(table, 1).unwrap();
        let space = StateSpace::new(1, 2).unwrap();
        let x_code = 0b10usize; // values 0 and 1, same fitness
        let row = selection_row(&config, &space, x_code).unwrap();
        // per-slot law: each value has mass 1/2 after averaging, but the
        // slots are correlated through the shared permutation:
        // P(both slots = 0) = E[q(0)^2] = (q1^2 + q2^2)/2
        let q1 = config.scheme.selection_mass(2, 1).unwrap();
        let q2 = config.scheme.selection_mass(2, 2).unwrap();
        let same = (q1 * q1 + q2 * q2) / 2.0;
        let cross = q1 * q2;
        assert_abs_diff_eq!(row[0b00], same, epsilon = 1e-14);
        assert_abs_diff_eq!(row[0b11], same, epsilon = 1e-14);
        assert_abs_diff_eq!(row[0b01], cross, epsilon = 1e-14);
        assert_abs_diff_eq!(row[0b10], cross, epsilon = 1e-14);
    }

    #[test]
    fn stationary_is_invariant() {
        let config = tiny_config(2, 2, 0.3, 0.1);
        let p = exact_transition_matrix(&config).unwrap();
        let mu = stationary(&p, 1e-14, 1_000_000).unwrap();
        // mu P = mu
        for j in 0..p.n {
            let image: f64 = (0..p.n).map(|i| mu[i] * p.get(i, j)).sum();
            assert_abs_diff_eq!(image, mu[j], epsilon = 1e-9);
        }
    }

    #[test]
    fn invariant_bound_full_space() {
        let config = tiny_config(1, 2, 0.2, 0.2);
        let p = exact_transition_matrix(&config).unwrap();
        let all: Vec<usize> = (0..p.n).collect();
        let v = vec![0usize, 1];
        let (lhs, rhs) = check_invariant_measure_bound(&p, &v, &all).unwrap();
        assert_abs_diff_eq!(lhs, 1.0, epsilon = 1e-9);
        assert!(rhs >= 1.0 - 1e-9, "rhs {rhs}");
    }

    #[test]
    fn invariant_bound_holds_tiny() {
        let config = tiny_config(1, 2, 0.2, 0.1);
        let p = exact_transition_matrix(&config).unwrap();
        // G: populations with no optimum; V: populations with >= 1 optimum
        let space = StateSpace::new(1, 2).unwrap();
        let mut g = Vec::new();
        let mut v = Vec::new();
        for s in 0..space.size {
            let x = space.decode(s);
            if x.members().iter().any(|c| c.is_all_ones()) {
                v.push(s);
            } else {
                g.push(s);
            }
        }
        let (lhs, rhs) = check_invariant_measure_bound(&p, &v, &g).unwrap();
        assert!(lhs <= rhs + 1e-12, "lhs {lhs} rhs {rhs}");
    }

    #[test]
    fn reducible_chain_rejected() {
        // p_M = 0, p_C = 0 on the sharp peak: the all-master population is
        // absorbing, the chain is reducible
        let config = tiny_config(1, 2, 0.0, 0.0);
        let p = exact_transition_matrix(&config).unwrap();
        let v = vec![0usize];
        let g = vec![3usize];
        assert!(matches!(
            check_invariant_measure_bound(&p, &v, &g),
            Err(Error::Domain(_))
        ));
    }
}
