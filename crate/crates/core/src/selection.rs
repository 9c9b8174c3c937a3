//! Ranking-selection machinery: the rank distributions F_m, the random
//! tie-breaking rank assignment, the limit repartition F with its drift
//! sigma, and the inverse-transform index map used by the coupling.

use crate::chromosome::Population;
use crate::error::{Error, Result};
use crate::landscape::FitnessLandscape;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

const PROB_TOL: f64 = 1e-12;

/// A ranking selection scheme. Rank m is the best chromosome.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SelectionScheme {
    /// F_m(i) = (eta_minus + (eta_plus - eta_minus) (i-1)/(m-1)) / m,
    /// with 0 <= eta_minus <= eta_plus and eta_minus + eta_plus = 2.
    LinearRanking { eta_minus: f64, eta_plus: f64 },
    /// F_m(i) = (i^t - (i-1)^t) / m^t, with 2 <= t <= m.
    Tournament { t: u32 },
    /// Explicit rank-mass table of length m; excluded from limit-theory
    /// operations.
    Custom { table: Vec<f64> },
}

impl SelectionScheme {
    pub fn linear_ranking(eta_minus: f64, eta_plus: f64) -> Result<Self> {
        if !(0.0..=2.0).contains(&eta_minus) || eta_minus > eta_plus {
            return Err(Error::invalid(
                "linear ranking requires 0 <= eta_minus <= eta_plus",
            ));
        }
        if (eta_minus + eta_plus - 2.0).abs() > PROB_TOL {
            return Err(Error::invalid("linear ranking requires eta- + eta+ = 2"));
        }
        Ok(SelectionScheme::LinearRanking {
            eta_minus,
            eta_plus,
        })
    }

    pub fn tournament(t: u32) -> Result<Self> {
        if t < 2 {
            return Err(Error::invalid("tournament requires t >= 2"));
        }
        Ok(SelectionScheme::Tournament { t })
    }

    pub fn custom(table: Vec<f64>) -> Result<Self> {
        if table.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(Error::invalid("custom table entries must be nonnegative"));
        }
        let sum: f64 = table.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(Error::invalid(format!(
                "custom table must sum to 1, got {sum}"
            )));
        }
        Ok(SelectionScheme::Custom { table })
    }

    /// Validates the scheme against a population size.
    pub fn validate(&self, m: usize) -> Result<()> {
        if m < 2 {
            return Err(Error::invalid("selection requires m >= 2"));
        }
        match self {
            SelectionScheme::LinearRanking {
                eta_minus,
                eta_plus,
            } => {
                SelectionScheme::linear_ranking(*eta_minus, *eta_plus)?;
            }
            SelectionScheme::Tournament { t } => {
                if (*t as usize) > m {
                    return Err(Error::invalid(format!(
                        "tournament t = {t} exceeds m = {m}"
                    )));
                }
                SelectionScheme::tournament(*t)?;
            }
            SelectionScheme::Custom { table } => {
                if table.len() != m {
                    return Err(Error::invalid(format!(
                        "custom table length {} does not match m = {m}",
                        table.len()
                    )));
                }
                SelectionScheme::custom(table.clone())?;
            }
        }
        Ok(())
    }

    /// F_m(i), the selection mass of rank i (1-based, i = m best).
    pub fn selection_mass(&self, m: usize, i: usize) -> Result<f64> {
        if i < 1 || i > m {
            return Err(Error::invalid(format!("rank {i} out of range 1..={m}")));
        }
        self.validate(m)?;
        Ok(self.mass_unchecked(m, i))
    }

    fn mass_unchecked(&self, m: usize, i: usize) -> f64 {
        match self {
            SelectionScheme::LinearRanking {
                eta_minus,
                eta_plus,
            } => {
                (eta_minus + (eta_plus - eta_minus) * (i - 1) as f64 / (m - 1) as f64) / m as f64
            }
            SelectionScheme::Tournament { t } => {
                let mf = m as f64;
                let t = *t as i32;
                (i as f64 / mf).powi(t) - ((i - 1) as f64 / mf).powi(t)
            }
            SelectionScheme::Custom { table } => table[i - 1],
        }
    }

    /// The limit repartition F(s) of the rank distribution, defined for the
    /// linear-ranking and tournament schemes.
    pub fn limit_repartition(&self, s: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::invalid(format!("s = {s} outside [0, 1]")));
        }
        match self {
            SelectionScheme::LinearRanking {
                eta_minus,
                eta_plus,
            } => Ok(eta_minus * s + 0.5 * (eta_plus - eta_minus) * s * s),
            SelectionScheme::Tournament { t } => Ok(s.powi(*t as i32)),
            SelectionScheme::Custom { .. } => Err(Error::UnsupportedScheme(
                "custom schemes have no declared limit repartition".into(),
            )),
        }
    }

    /// The selection drift sigma, the left derivative of F at 1.
    pub fn drift(&self) -> Result<f64> {
        match self {
            SelectionScheme::LinearRanking { eta_plus, .. } => Ok(*eta_plus),
            SelectionScheme::Tournament { t } => Ok(*t as f64),
            SelectionScheme::Custom { .. } => Err(Error::UnsupportedScheme(
                "custom schemes have no declared drift".into(),
            )),
        }
    }

    /// Precomputes the cumulative tables used by the inverse-transform index
    /// map and the auxiliary chain.
    pub fn tables(&self, m: usize) -> Result<SchemeTables> {
        self.validate(m)?;
        // compensated cumulative sums; the last cell absorbs the residual so
        // the index map is total on [0, 1)
        let mut cum = Vec::with_capacity(m + 1);
        cum.push(0.0f64);
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for i in 1..=m {
            let y = self.mass_unchecked(m, i) - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
            cum.push(sum.min(1.0));
        }
        cum[m] = 1.0;
        // top-i tail sums, accumulated from the best rank down for accuracy
        let mut tail = Vec::with_capacity(m + 1);
        tail.push(0.0f64);
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for i in 1..=m {
            let y = self.mass_unchecked(m, m - i + 1) - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
            tail.push(sum.min(1.0));
        }
        tail[m] = 1.0;
        Ok(SchemeTables { m, cum, tail })
    }
}

/// Cumulative rank-mass tables for a fixed (scheme, m).
#[derive(Clone, Debug)]
pub struct SchemeTables {
    m: usize,
    /// cum[i] = F_m(1) + ... + F_m(i); cum[0] = 0, cum[m] = 1.
    cum: Vec<f64>,
    /// tail[i] = F_m(m-i+1) + ... + F_m(m); tail[0] = 0, tail[m] = 1.
    tail: Vec<f64>,
}

impl SchemeTables {
    pub fn m(&self) -> usize {
        self.m
    }

    /// The index map I(s): the unique rank i with
    /// F_m(1)+...+F_m(i-1) <= s < F_m(1)+...+F_m(i).
    pub fn index_from_uniform(&self, s: f64) -> usize {
        debug_assert!((0.0..1.0).contains(&s));
        // partition_point over cum[1..=m]: first i with cum[i] > s
        let i = self.cum[1..].partition_point(|&c| c <= s) + 1;
        i.min(self.m)
    }

    /// F_m(m-i+1) + ... + F_m(m): the total mass of the top i ranks.
    pub fn top_mass(&self, i: usize) -> f64 {
        self.tail[i]
    }

    pub fn cumulative(&self, i: usize) -> f64 {
        self.cum[i]
    }
}

/// A rank assignment for a population: a permutation sigma sorting the
/// members by non-decreasing fitness, with uniform random tie-breaking.
#[derive(Clone, Debug)]
pub struct RankAssignment {
    /// sigma[r] = member index holding rank r+1 (0-based storage).
    perm: Vec<usize>,
    /// rank[j] = rank of member j, in 1..=m.
    rank: Vec<usize>,
}

impl RankAssignment {
    /// Member index holding rank i (1-based; i = m is the best).
    pub fn member_with_rank(&self, i: usize) -> usize {
        self.perm[i - 1]
    }

    /// rank(x, j) for member j (0-based member index).
    pub fn rank_of_member(&self, j: usize) -> usize {
        self.rank[j]
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }
}

/// Draws a fresh rank assignment: sorts by fitness, then shuffles within
/// each tie group so the permutation is uniform among the valid ones. Tie
/// groups are identified by exact fitness equality.
pub fn rank_population(
    x: &Population,
    f: &FitnessLandscape,
    rng: &mut impl Rng,
) -> RankAssignment {
    let m = x.size();
    let fitnesses: Vec<f64> = x.members().iter().map(|c| f.eval(c)).collect();
    let mut perm: Vec<usize> = (0..m).collect();
    perm.sort_by(|&a, &b| fitnesses[a].total_cmp(&fitnesses[b]));
    let mut start = 0;
    while start < m {
        let mut end = start + 1;
        while end < m && fitnesses[perm[end]] == fitnesses[perm[start]] {
            end += 1;
        }
        perm[start..end].shuffle(rng);
        start = end;
    }
    let mut rank = vec![0usize; m];
    for (r, &j) in perm.iter().enumerate() {
        rank[j] = r + 1;
    }
    RankAssignment { perm, rank }
}

/// Scans the drift hypothesis |tail(i) - sigma i/m| <= eps sigma i/m and
/// returns the largest delta in (0, 1] such that it holds for all
/// i <= floor(delta m), or 0.0 if it already fails at i = 1.
pub fn validate_drift_hypothesis(
    scheme: &SelectionScheme,
    m: usize,
    epsilon: f64,
) -> Result<f64> {
    if epsilon <= 0.0 {
        return Err(Error::invalid("epsilon must be positive"));
    }
    let sigma = scheme.drift()?;
    let tables = scheme.tables(m)?;
    let mut last_ok = 0usize;
    for i in 1..=m {
        let target = sigma * i as f64 / m as f64;
        if (tables.top_mass(i) - target).abs() <= epsilon * target {
            last_ok = i;
        } else {
            break;
        }
    }
    Ok(last_ok as f64 / m as f64)
}
