//! Fitness landscapes and the level statistics N(x, lambda), Lambda(x, i)
//! and Delta(lambda, gamma).

use crate::chromosome::{Chromosome, Population};
use crate::error::{Error, Result};
use std::collections::HashMap;

/// Largest `ell` for which `delta_distance` will enumerate the cube.
pub const DELTA_ENUMERATION_CAP: usize = 20;

/// A total map from chromosomes to real fitness values.
#[derive(Clone, Debug)]
pub enum FitnessLandscape {
    /// f(1...1) = 2, f(u) = 1 otherwise.
    SharpPeak,
    /// f(u) = number of ones in u.
    OneMax,
    /// f(u) = g(number of leading ones of u) for a user table g of length
    /// ell + 1.
    Staircase(Vec<f64>),
    /// Explicit table; must cover the whole cube.
    CustomTable(HashMap<Chromosome, f64>),
}

impl FitnessLandscape {
    /// Builds a custom-table landscape, checking that the table assigns
    /// exactly one fitness to every chromosome of length `ell`.
    pub fn custom(table: HashMap<Chromosome, f64>, ell: usize) -> Result<Self> {
        if ell > DELTA_ENUMERATION_CAP {
            return Err(Error::capacity(format!(
                "custom tables require ell <= {DELTA_ENUMERATION_CAP}, got {ell}"
            )));
        }
        let expected = 1u64 << ell;
        if table.len() as u64 != expected {
            return Err(Error::invalid(format!(
                "custom table has {} entries, expected 2^{ell} = {expected}",
                table.len()
            )));
        }
        if table.keys().any(|c| c.len() != ell) {
            return Err(Error::invalid("custom table key length mismatch"));
        }
        if table.values().any(|v| !v.is_finite()) {
            return Err(Error::invalid("fitness values must be finite"));
        }
        Ok(FitnessLandscape::CustomTable(table))
    }

    /// Builds the staircase landscape from its level table, which must have
    /// one value per possible count of leading ones (ell + 1 entries).
    pub fn staircase(levels: Vec<f64>, ell: usize) -> Result<Self> {
        if levels.len() != ell + 1 {
            return Err(Error::invalid(format!(
                "staircase table needs ell + 1 = {} entries, got {}",
                ell + 1,
                levels.len()
            )));
        }
        if levels.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("fitness values must be finite"));
        }
        Ok(FitnessLandscape::Staircase(levels))
    }

    pub fn eval(&self, u: &Chromosome) -> f64 {
        match self {
            FitnessLandscape::SharpPeak => {
                if u.is_all_ones() {
                    2.0
                } else {
                    1.0
                }
            }
            FitnessLandscape::OneMax => u.count_ones() as f64,
            FitnessLandscape::Staircase(levels) => levels[u.leading_ones()],
            FitnessLandscape::CustomTable(table) => *table
                .get(u)
                .expect("custom table validated complete at construction"),
        }
    }

    /// Maximum fitness over the whole cube of length `ell`.
    pub fn max_fitness(&self, ell: usize) -> f64 {
        match self {
            FitnessLandscape::SharpPeak => 2.0,
            FitnessLandscape::OneMax => ell as f64,
            FitnessLandscape::Staircase(levels) => {
                levels.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            }
            FitnessLandscape::CustomTable(table) => {
                table.values().cloned().fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }

    pub fn min_fitness(&self, ell: usize) -> f64 {
        match self {
            FitnessLandscape::SharpPeak => 1.0,
            FitnessLandscape::OneMax => {
                let _ = ell;
                0.0
            }
            FitnessLandscape::Staircase(levels) => {
                levels.iter().cloned().fold(f64::INFINITY, f64::min)
            }
            FitnessLandscape::CustomTable(table) => {
                table.values().cloned().fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Sorted distinct fitness values over the cube of length `ell`.
    /// Enumerates the cube for table landscapes, so `ell` must be small
    /// for those.
    pub fn value_set(&self, ell: usize) -> Vec<f64> {
        let mut values: Vec<f64> = match self {
            FitnessLandscape::SharpPeak => vec![1.0, 2.0],
            FitnessLandscape::OneMax => (0..=ell).map(|k| k as f64).collect(),
            FitnessLandscape::Staircase(levels) => levels.clone(),
            FitnessLandscape::CustomTable(table) => table.values().cloned().collect(),
        };
        values.sort_by(f64::total_cmp);
        values.dedup();
        values
    }
}

/// N(x, lambda): the number of chromosomes in x whose fitness is at least
/// lambda.
pub fn count_at_least(x: &Population, f: &FitnessLandscape, lambda: f64) -> usize {
    x.members().iter().filter(|c| f.eval(c) >= lambda).count()
}

/// Lambda(x, i): the fitness of the i-th best chromosome in x (i in 1..=m).
pub fn level_fitness(x: &Population, f: &FitnessLandscape, i: usize) -> Result<f64> {
    let m = x.size();
    if i < 1 || i > m {
        return Err(Error::invalid(format!("rank {i} out of range 1..={m}")));
    }
    let mut fitnesses: Vec<f64> = x.members().iter().map(|c| f.eval(c)).collect();
    fitnesses.sort_by(|a, b| b.total_cmp(a));
    Ok(fitnesses[i - 1])
}

/// Delta(lambda, gamma): the maximal Hamming distance from a point of
/// L(lambda) to the set L(gamma), where L(v) = {u : f(u) >= v}.
///
/// Enumerates the cube via a multi-source breadth-first search from
/// L(gamma), so `ell` is capped at [`DELTA_ENUMERATION_CAP`].
pub fn delta_distance(
    f: &FitnessLandscape,
    ell: usize,
    lambda: f64,
    gamma: f64,
) -> Result<usize> {
    if lambda >= gamma {
        return Err(Error::invalid(format!(
            "delta_distance requires lambda < gamma, got {lambda} >= {gamma}"
        )));
    }
    if ell > DELTA_ENUMERATION_CAP {
        return Err(Error::capacity(format!(
            "delta_distance enumerates the cube; ell <= {DELTA_ENUMERATION_CAP} required, got {ell}"
        )));
    }
    let n = 1usize << ell;
    let mut dist = vec![u32::MAX; n];
    let mut frontier = Vec::new();
    for code in 0..n {
        let u = Chromosome::from_code(code as u64, ell);
        if f.eval(&u) >= gamma {
            dist[code] = 0;
            frontier.push(code);
        }
    }
    if frontier.is_empty() {
        return Err(Error::domain(format!("L({gamma}) is empty")));
    }
    let mut level = 0u32;
    while !frontier.is_empty() {
        level += 1;
        let mut next = Vec::new();
        for &code in &frontier {
            for b in 0..ell {
                let neighbor = code ^ (1 << b);
                if dist[neighbor] == u32::MAX {
                    dist[neighbor] = level;
                    next.push(neighbor);
                }
            }
        }
        frontier = next;
    }
    let mut delta = 0usize;
    for code in 0..n {
        let u = Chromosome::from_code(code as u64, ell);
        if f.eval(&u) >= lambda {
            delta = delta.max(dist[code] as usize);
        }
    }
    Ok(delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn sharp_peak_exhaustive(ell: usize) {
        let f = FitnessLandscape::SharpPeak;
        for code in 0..(1u64 << ell) {
            let u = Chromosome::from_code(code, ell);
            let expected = if u.is_all_ones() { 2.0 } else { 1.0 };
            assert_eq!(f.eval(&u), expected);
        }
    }

    #[test]
    fn sharp_peak_definition() {
        sharp_peak_exhaustive(6);
        sharp_peak_exhaustive(10);
    }

    #[test]
    fn count_at_least_boundaries() {
        let f = FitnessLandscape::SharpPeak;
        let x = Population::master_seeded(8, 6).unwrap();
        assert_eq!(count_at_least(&x, &f, 0.0), 6);
        assert_eq!(count_at_least(&x, &f, 2.0), 1);
        assert_eq!(count_at_least(&x, &f, 2.5), 0);
    }

    #[test]
    fn count_at_least_matches_brute_force() {
        let f = FitnessLandscape::OneMax;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        let x = Population::uniform_random(4, 4, &mut rng).unwrap();
        let expected = x
            .members()
            .iter()
            .filter(|c| c.count_ones() >= 2)
            .count();
        assert_eq!(count_at_least(&x, &f, 2.0), expected);
    }

    #[test]
    fn level_fitness_sort_oracle() {
        // fitnesses {1,1,2,3} with one-max on length 3
        let members = vec![
            Chromosome::from_bitstring("100").unwrap(),
            Chromosome::from_bitstring("010").unwrap(),
            Chromosome::from_bitstring("110").unwrap(),
            Chromosome::from_bitstring("111").unwrap(),
        ];
        let x = Population::new(members).unwrap();
        let f = FitnessLandscape::OneMax;
        assert_eq!(level_fitness(&x, &f, 1).unwrap(), 3.0);
        assert_eq!(level_fitness(&x, &f, 2).unwrap(), 2.0);
        assert_eq!(level_fitness(&x, &f, 4).unwrap(), 1.0);
        assert!(level_fitness(&x, &f, 0).is_err());
        assert!(level_fitness(&x, &f, 5).is_err());
    }

    #[test]
    fn level_count_galois_connection() {
        let f = FitnessLandscape::OneMax;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        for _ in 0..20 {
            let x = Population::uniform_random(6, 8, &mut rng).unwrap();
            for i in 1..=8 {
                let lam = level_fitness(&x, &f, i).unwrap();
                assert!(count_at_least(&x, &f, lam) >= i);
            }
            for k in 0..=6 {
                let lam = k as f64;
                let n = count_at_least(&x, &f, lam);
                if n >= 1 {
                    assert!(level_fitness(&x, &f, n).unwrap() >= lam);
                }
            }
        }
    }

    #[test]
    fn delta_sharp_peak_is_ell() {
        let f = FitnessLandscape::SharpPeak;
        assert_eq!(delta_distance(&f, 7, 1.0, 2.0).unwrap(), 7);
    }

    #[test]
    fn delta_one_max_step_is_one() {
        let f = FitnessLandscape::OneMax;
        for k in 0..6 {
            assert_eq!(
                delta_distance(&f, 6, k as f64, (k + 1) as f64).unwrap(),
                1
            );
        }
    }

    #[test]
    fn delta_matches_exhaustive_min_scan() {
        let f = FitnessLandscape::OneMax;
        let ell = 6;
        let (lambda, gamma) = (2.0, 4.0);
        // brute force: max over L(lambda) of min over L(gamma) of hamming
        let mut best = 0usize;
        for a in 0..(1u64 << ell) {
            let u = Chromosome::from_code(a, ell);
            if f.eval(&u) < lambda {
                continue;
            }
            let mut closest = usize::MAX;
            for b in 0..(1u64 << ell) {
                let v = Chromosome::from_code(b, ell);
                if f.eval(&v) >= gamma {
                    closest = closest.min(u.hamming(&v).unwrap());
                }
            }
            best = best.max(closest);
        }
        assert_eq!(delta_distance(&f, ell, lambda, gamma).unwrap(), best);
    }

    #[test]
    fn delta_below_minimum_is_zero() {
        // both levels below the minimum fitness: the two level sets are the
        // full cube
        let f = FitnessLandscape::SharpPeak;
        assert_eq!(delta_distance(&f, 5, -2.0, -1.0).unwrap(), 0);
    }

    #[test]
    fn delta_errors() {
        let f = FitnessLandscape::SharpPeak;
        assert!(matches!(
            delta_distance(&f, 5, 1.0, 3.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            delta_distance(&f, 25, 1.0, 2.0),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn custom_table_must_be_complete() {
        let mut table = HashMap::new();
        table.insert(Chromosome::from_bitstring("00").unwrap(), 1.0);
        assert!(FitnessLandscape::custom(table, 2).is_err());
    }

    #[test]
    fn staircase_leading_ones() {
        let f = FitnessLandscape::staircase(vec![0.0, 1.0, 1.0, 5.0], 3).unwrap();
        assert_eq!(f.eval(&Chromosome::from_bitstring("110").unwrap()), 1.0);
        assert_eq!(f.eval(&Chromosome::from_bitstring("111").unwrap()), 5.0);
        assert_eq!(f.eval(&Chromosome::from_bitstring("011").unwrap()), 0.0);
    }
}
