//! Probability inequalities used by the proofs, each paired with an exact
//! computation so the inequality itself can be verified numerically.

use crate::error::{Error, Result};
use statrs::function::gamma::ln_gamma;

/// ln C(n, k) via the log-gamma function.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    assert!(k <= n);
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// The Poisson upper-tail bound P(Y >= t) <= (lambda e / t)^t, valid for
/// t >= lambda.
pub fn poisson_tail_bound(lambda: f64, t: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::domain("lambda must be positive"));
    }
    if t < lambda {
        return Err(Error::domain("bound requires t >= lambda"));
    }
    Ok((t * (1.0 + lambda.ln() - t.ln())).exp())
}

/// Exact Poisson upper tail P(Y >= t) by summation.
pub fn poisson_tail_exact(lambda: f64, t: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::domain("lambda must be positive"));
    }
    let start = t.ceil().max(0.0) as u64;
    // summed directly from the first tail term, in log space, so far
    // tails keep full relative precision
    let mut tail = 0.0f64;
    let mut t_term = (start as f64 * lambda.ln() - lambda - ln_gamma(start as f64 + 1.0)).exp();
    let mut k = start;
    loop {
        tail += t_term;
        k += 1;
        t_term *= lambda / k as f64;
        if t_term < tail * 1e-17 + 1e-300 {
            break;
        }
    }
    Ok(tail)
}

/// The truncated pmf of a binomial law.
pub fn binomial_pmf(n: u64, p: f64) -> Vec<f64> {
    (0..=n)
        .map(|k| {
            if p == 0.0 {
                return if k == 0 { 1.0 } else { 0.0 };
            }
            if p == 1.0 {
                return if k == n { 1.0 } else { 0.0 };
            }
            (ln_binomial(n, k) + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp()
        })
        .collect()
}

/// The truncated pmf of a Poisson law (tail below 1e-12 dropped).
pub fn poisson_pmf(lambda: f64) -> Vec<f64> {
    if lambda == 0.0 {
        return vec![1.0];
    }
    let mut pmf = Vec::new();
    let mut term = (-lambda).exp();
    let mut mass = 0.0;
    let mut k = 0usize;
    while mass < 1.0 - 1e-12 && k <= 100_000 {
        pmf.push(term);
        mass += term;
        k += 1;
        term *= lambda / k as f64;
    }
    pmf
}

/// Stochastic dominance d1 <= d2: every upper set gets at least as much
/// mass under d2, i.e. CDF(d1) >= CDF(d2) pointwise.
pub fn dominance_check(d1: &[f64], d2: &[f64]) -> bool {
    let len = d1.len().max(d2.len());
    let mut c1 = 0.0f64;
    let mut c2 = 0.0f64;
    for k in 0..len {
        c1 += d1.get(k).copied().unwrap_or(0.0);
        c2 += d2.get(k).copied().unwrap_or(0.0);
        if c1 < c2 - 1e-12 {
            return false;
        }
    }
    true
}

/// The Fenchel-Legendre transform of alpha times a Poisson(lambda)
/// variable, in closed form:
/// (x/alpha) ln(x/(lambda alpha)) - x/alpha + lambda.
pub fn cramer_poisson(lambda: f64, alpha: f64, x: f64) -> Result<f64> {
    if !(lambda > 0.0) || alpha == 0.0 {
        return Err(Error::domain("lambda > 0 and alpha != 0 required"));
    }
    let ratio = x / (lambda * alpha);
    if ratio <= 0.0 {
        return Err(Error::domain("x / (lambda alpha) must be positive"));
    }
    Ok((x / alpha) * ratio.ln() - x / alpha + lambda)
}

/// Numeric Fenchel-Legendre transform of alpha X for X ~ B(n, p):
/// sup_t (t x - n ln(1 - p + p e^(t alpha))).
fn cramer_binomial_numeric(n: u64, p: f64, alpha: f64, x: f64) -> f64 {
    let log_mgf = |t: f64| n as f64 * (1.0 - p + p * (t * alpha).exp()).ln();
    let objective = |t: f64| t * x - log_mgf(t);
    // coarse scan then ternary refinement; the objective is concave in t
    let mut best_t = 0.0;
    let mut best = objective(0.0);
    let mut t = -60.0;
    while t <= 60.0 {
        let v = objective(t);
        if v > best {
            best = v;
            best_t = t;
        }
        t += 0.25;
    }
    let mut lo = best_t - 0.25;
    let mut hi = best_t + 0.25;
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if objective(m1) < objective(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    objective(0.5 * (lo + hi)).max(best)
}

/// Verifies that the rate function of alpha B(n, p) dominates that of
/// alpha Poisson(np) on a grid of x values in the reachable range; the
/// binomial log-mgf sits below the Poisson one for every t, so the
/// transforms are ordered the other way everywhere.
pub fn cramer_dominance(n: u64, p: f64, alpha: f64) -> Result<bool> {
    if !(0.0 < p && p < 1.0) || alpha == 0.0 || n == 0 {
        return Err(Error::domain("need 0 < p < 1, alpha != 0, n >= 1"));
    }
    let lambda = n as f64 * p;
    let lo = (alpha * n as f64).min(0.0);
    let hi = (alpha * n as f64).max(0.0);
    let steps = 80usize;
    for i in 1..steps {
        let x = lo + (hi - lo) * i as f64 / steps as f64;
        if x / (lambda * alpha) <= 0.0 {
            continue;
        }
        let poisson_rate = cramer_poisson(lambda, alpha, x)?;
        let binom_rate = cramer_binomial_numeric(n, p, alpha, x);
        if binom_rate < poisson_rate - 1e-7 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The binomial-coefficient estimate
/// |ln C(n,k) + k ln(k/n) + (n-k) ln((n-k)/n)| <= 2 ln n + 3,
/// returned as (exact ln C(n,k), entropy proxy, bound).
pub fn log_binomial_bound_check(n: u64, k: u64) -> Result<(f64, f64, f64)> {
    if n == 0 || k > n {
        return Err(Error::invalid("need 1 <= n and k <= n"));
    }
    let exact = ln_binomial(n, k);
    let h = |a: u64| {
        if a == 0 {
            0.0
        } else {
            a as f64 * (a as f64 / n as f64).ln()
        }
    };
    let proxy = -h(k) - h(n - k);
    let bound = 2.0 * (n as f64).ln() + 3.0;
    Ok((exact, proxy, bound))
}

/// Hoeffding's lower-tail inequality for B(n, p):
/// P(X < t) <= exp(-(2/n)(np - t)^2), valid for t < np.
pub fn hoeffding_bound(n: u64, p: f64, t: f64) -> Result<f64> {
    if t >= n as f64 * p {
        return Err(Error::domain("bound requires t < np"));
    }
    Ok((-(2.0 / n as f64) * (n as f64 * p - t) * (n as f64 * p - t)).exp())
}

/// Exact binomial lower tail P(X < t).
pub fn binomial_lower_tail(n: u64, p: f64, t: f64) -> f64 {
    let pmf = binomial_pmf(n, p);
    pmf.iter()
        .enumerate()
        .take_while(|&(k, _)| (k as f64) < t)
        .map(|(_, &q)| q)
        .sum()
}
