//! Galton-Watson comparison processes.
//!
//! Two reproduction laws bracket the Master-sequence progeny: twice a
//! Poisson(4 sigma) above, and the subcritical mixture nu* (one Poisson
//! plus twice an independent small Poisson) below extinction.

use crate::error::{Error, Result};
use rand::distributions::Distribution;
use rand::Rng;
use rand_distr::Poisson;

/// pmf tail mass dropped at truncation.
pub const PMF_TRUNCATION: f64 = 1e-12;

/// An offspring law for a branching process.
#[derive(Clone, Debug)]
pub enum ReproductionLaw {
    /// 2 Y with Y ~ Poisson(lambda); the supercritical progeny bound uses
    /// lambda = 4 sigma.
    TwicePoisson { lambda: f64 },
    /// Y' + 2 Y'' with Y' ~ Poisson(pi (1 + 3 eps)), Y'' ~ Poisson(eps).
    NuStar { pi: f64, eps: f64 },
    /// Explicit pmf over 0, 1, 2, ...
    Custom(Vec<f64>),
}

/// The default nu* epsilon: keeps the mean pi (1 + 3 eps) + 2 eps below 1
/// when pi < 1.
pub fn default_nu_star_eps(pi: f64) -> Result<f64> {
    if !(0.0 < pi && pi < 1.0) {
        return Err(Error::invalid("default eps requires 0 < pi < 1"));
    }
    Ok((0.01f64).min((1.0 / pi - 1.0) / 10.0))
}

fn poisson_pmf(lambda: f64) -> Vec<f64> {
    if lambda == 0.0 {
        return vec![1.0];
    }
    let mut pmf = Vec::new();
    let mut term = (-lambda).exp();
    let mut mass = 0.0;
    let mut k = 0usize;
    while mass < 1.0 - PMF_TRUNCATION {
        pmf.push(term);
        mass += term;
        k += 1;
        term *= lambda / k as f64;
        if k > 10_000 {
            break;
        }
    }
    pmf
}

impl ReproductionLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            ReproductionLaw::TwicePoisson { lambda } => {
                if *lambda <= 0.0 {
                    return Err(Error::invalid("lambda must be positive"));
                }
            }
            ReproductionLaw::NuStar { pi, eps } => {
                if *pi <= 0.0 || *eps < 0.0 {
                    return Err(Error::invalid("pi > 0 and eps >= 0 required"));
                }
            }
            ReproductionLaw::Custom(pmf) => {
                if pmf.is_empty() || pmf.iter().any(|&p| p < 0.0) {
                    return Err(Error::invalid("pmf entries must be nonnegative"));
                }
                let total: f64 = pmf.iter().sum();
                if (total - 1.0).abs() > PMF_TRUNCATION * 10.0 {
                    return Err(Error::invalid(format!("pmf mass {total} differs from 1")));
                }
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match self {
            ReproductionLaw::TwicePoisson { lambda } => 2.0 * lambda,
            ReproductionLaw::NuStar { pi, eps } => pi * (1.0 + 3.0 * eps) + 2.0 * eps,
            ReproductionLaw::Custom(pmf) => {
                pmf.iter().enumerate().map(|(k, &p)| k as f64 * p).sum()
            }
        }
    }

    /// The pmf, truncated once the tail mass drops below 1e-12.
    pub fn pmf(&self) -> Vec<f64> {
        match self {
            ReproductionLaw::TwicePoisson { lambda } => {
                let base = poisson_pmf(*lambda);
                let mut pmf = vec![0.0; 2 * base.len() - 1];
                for (k, &p) in base.iter().enumerate() {
                    pmf[2 * k] = p;
                }
                pmf
            }
            ReproductionLaw::NuStar { pi, eps } => {
                let a = poisson_pmf(pi * (1.0 + 3.0 * eps));
                let b = poisson_pmf(*eps);
                let mut pmf = vec![0.0; a.len() + 2 * b.len() - 2];
                for (i, &pa) in a.iter().enumerate() {
                    for (j, &pb) in b.iter().enumerate() {
                        pmf[i + 2 * j] += pa * pb;
                    }
                }
                pmf
            }
            ReproductionLaw::Custom(pmf) => pmf.clone(),
        }
    }

    /// The probability generating function E[q^X].
    pub fn pgf(&self, q: f64) -> f64 {
        match self {
            ReproductionLaw::TwicePoisson { lambda } => (lambda * (q * q - 1.0)).exp(),
            ReproductionLaw::NuStar { pi, eps } => {
                (pi * (1.0 + 3.0 * eps) * (q - 1.0)).exp() * (eps * (q * q - 1.0)).exp()
            }
            ReproductionLaw::Custom(pmf) => {
                let mut value = 0.0;
                let mut power = 1.0;
                for &p in pmf {
                    value += p * power;
                    power *= q;
                }
                value
            }
        }
    }

    /// Total offspring of `parents` independent individuals.
    fn total_offspring(&self, parents: u64, rng: &mut impl Rng) -> u64 {
        if parents == 0 {
            return 0;
        }
        match self {
            ReproductionLaw::TwicePoisson { lambda } => {
                // sum of n iid 2 Poisson(lambda) = 2 Poisson(n lambda)
                let y = Poisson::new(parents as f64 * lambda)
                    .expect("positive rate")
                    .sample(rng);
                2 * y as u64
            }
            ReproductionLaw::NuStar { pi, eps } => {
                let y1 = Poisson::new(parents as f64 * pi * (1.0 + 3.0 * eps))
                    .expect("positive rate")
                    .sample(rng) as u64;
                let y2 = if *eps > 0.0 {
                    Poisson::new(parents as f64 * eps).expect("positive rate").sample(rng) as u64
                } else {
                    0
                };
                y1 + 2 * y2
            }
            ReproductionLaw::Custom(pmf) => {
                let mut total = 0u64;
                for _ in 0..parents {
                    let u: f64 = rng.gen();
                    let mut acc = 0.0;
                    let mut value = pmf.len() as u64 - 1;
                    for (k, &p) in pmf.iter().enumerate() {
                        acc += p;
                        if u < acc {
                            value = k as u64;
                            break;
                        }
                    }
                    total += value;
                }
                total
            }
        }
    }
}

/// Population sizes Z_0 = 1, Z_1, ..., Z_generations of the branching
/// process. Sizes saturate at u64::MAX / 4 to keep supercritical runs
/// finite.
pub fn gw_simulate(
    law: &ReproductionLaw,
    generations: usize,
    rng: &mut impl Rng,
) -> Result<Vec<u64>> {
    law.validate()?;
    let cap = u64::MAX / 4;
    let mut path = Vec::with_capacity(generations + 1);
    let mut z = 1u64;
    path.push(z);
    for _ in 0..generations {
        z = law.total_offspring(z.min(cap), rng).min(cap);
        path.push(z);
        if z == 0 {
            while path.len() <= generations {
                path.push(0);
            }
            break;
        }
    }
    Ok(path)
}

/// Extinction probability: the smallest fixed point of the pgf, found by
/// iterating q <- g(q) from 0.
pub fn gw_extinction(law: &ReproductionLaw, tol: f64) -> Result<f64> {
    law.validate()?;
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let mut q = 0.0f64;
    for _ in 0..100_000_000u64 {
        let next = law.pgf(q);
        if (next - q).abs() < tol {
            return Ok(next.min(1.0));
        }
        q = next;
    }
    Ok(q.min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn means() {
        let sigma = 2.0;
        let law = ReproductionLaw::TwicePoisson { lambda: 4.0 * sigma };
        assert_abs_diff_eq!(law.mean(), 8.0 * sigma, epsilon = 1e-12);
        let law = ReproductionLaw::NuStar { pi: 0.8, eps: 0.01 };
        assert_abs_diff_eq!(law.mean(), 0.8 * 1.03 + 0.02, epsilon = 1e-12);
        assert!(law.mean() < 1.0);
    }

    #[test]
    fn default_eps_keeps_subcritical() {
        for pi in [0.2, 0.5, 0.9, 0.99] {
            let eps = default_nu_star_eps(pi).unwrap();
            let law = ReproductionLaw::NuStar { pi, eps };
            assert!(law.mean() < 1.0, "pi={pi}");
        }
        assert!(default_nu_star_eps(1.2).is_err());
    }

    #[test]
    fn pmf_mass_mean_and_pgf_agree() {
        for law in [
            ReproductionLaw::TwicePoisson { lambda: 1.5 },
            ReproductionLaw::NuStar { pi: 0.8, eps: 0.05 },
            ReproductionLaw::Custom(vec![0.2, 0.5, 0.3]),
        ] {
            let pmf = law.pmf();
            let mass: f64 = pmf.iter().sum();
            assert!(mass >= 1.0 - 1e-11, "mass {mass}");
            let mean: f64 = pmf.iter().enumerate().map(|(k, &p)| k as f64 * p).sum();
            assert_abs_diff_eq!(mean, law.mean(), epsilon = 1e-9);
            for q in [0.0f64, 0.3, 0.7, 1.0] {
                let direct: f64 =
                    pmf.iter().enumerate().map(|(k, &p)| p * q.powi(k as i32)).sum();
                assert_abs_diff_eq!(direct, law.pgf(q), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn twice_poisson_is_even() {
        let pmf = ReproductionLaw::TwicePoisson { lambda: 2.0 }.pmf();
        for (k, &p) in pmf.iter().enumerate() {
            if k % 2 == 1 {
                assert_eq!(p, 0.0);
            }
        }
    }

    #[test]
    fn subcritical_goes_extinct() {
        for law in [
            ReproductionLaw::NuStar { pi: 0.8, eps: 0.01 },
            ReproductionLaw::Custom(vec![0.5, 0.3, 0.2]),
        ] {
            assert!(law.mean() < 1.0);
            let q = gw_extinction(&law, 1e-12).unwrap();
            assert!((q - 1.0).abs() < 1e-9, "q = {q}");
        }
    }

    #[test]
    fn supercritical_extinction_below_one() {
        let law = ReproductionLaw::TwicePoisson { lambda: 8.0 };
        let q = gw_extinction(&law, 1e-12).unwrap();
        assert!(q < 0.01, "q = {q}");
        assert_abs_diff_eq!(law.pgf(q), q, epsilon = 1e-9);

        // moderately supercritical custom law: q solves the quadratic
        // 0.25 + 0.25 q + 0.5 q^2 = q, i.e. q = 1/2
        let law = ReproductionLaw::Custom(vec![0.25, 0.25, 0.5]);
        let q = gw_extinction(&law, 1e-13).unwrap();
        assert_abs_diff_eq!(q, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn simulated_mean_growth() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let law = ReproductionLaw::Custom(vec![0.3, 0.3, 0.4]);
        let mean = law.mean(); // 1.1
        let k = 4usize;
        let trials = 200_000usize;
        let mut total = 0u64;
        for _ in 0..trials {
            total += gw_simulate(&law, k, &mut rng).unwrap()[k];
        }
        let emp = total as f64 / trials as f64;
        assert!((emp - mean.powi(k as i32)).abs() < 0.02, "emp {emp}");
    }

    #[test]
    fn extinct_paths_stay_at_zero() {
        let mut rng = ChaCha12Rng::seed_from_u64(22);
        let law = ReproductionLaw::NuStar { pi: 0.5, eps: 0.01 };
        for _ in 0..200 {
            let path = gw_simulate(&law, 20, &mut rng).unwrap();
            assert_eq!(path.len(), 21);
            let mut dead = false;
            for &z in &path {
                if dead {
                    assert_eq!(z, 0);
                }
                dead = z == 0;
            }
        }
    }
}
