//! Asymptotic theory: the critical parameter, the drift map of the
//! auxiliary chain and its fixed point, large-deviation rate functions,
//! branching-process comparisons, and the probability inequalities used
//! by the proofs.

pub mod bounds;
pub mod gw;
pub mod rate;

pub use rate::{binomial_rate, v1, v_compose, RateGrid, V1Result};

use crate::error::{Error, Result};
use crate::selection::SelectionScheme;

/// pi = sigma (1-p_C)(1-p_M)^ell, evaluated in log space for large ell.
pub fn pi_param(sigma: f64, p_c: f64, p_m: f64, ell: usize) -> f64 {
    sigma * (1.0 - p_c) * (ell as f64 * (1.0 - p_m).ln()).exp()
}

/// Which side of the transition a parameter set sits on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    Disordered,
    Critical,
    Quasispecies,
}

/// The reduced parameter set the asymptotics depend on.
#[derive(Clone, Debug)]
pub struct RegimeParams {
    pub sigma: f64,
    pub p_c: f64,
    pub survive_prob: f64,
    pub pi: f64,
}

impl RegimeParams {
    pub fn new(sigma: f64, p_c: f64, survive_prob: f64) -> Result<Self> {
        if sigma < 1.0 {
            return Err(Error::invalid("selection drift must be at least 1"));
        }
        if !(0.0..=1.0).contains(&p_c) || !(survive_prob > 0.0 && survive_prob <= 1.0) {
            return Err(Error::invalid("p_c in [0,1] and survive_prob in (0,1] required"));
        }
        let pi = sigma * (1.0 - p_c) * survive_prob;
        if pi <= 0.0 {
            return Err(Error::invalid("pi must be positive"));
        }
        Ok(RegimeParams { sigma, p_c, survive_prob, pi })
    }

    pub fn regime(&self) -> Regime {
        if self.pi < 1.0 {
            Regime::Disordered
        } else if self.pi == 1.0 {
            Regime::Critical
        } else {
            Regime::Quasispecies
        }
    }
}

/// The drift map of the auxiliary chain's fraction:
/// phi(r) = (1 - F(1-r)) pi / sigma.
pub fn phi_map(scheme: &SelectionScheme, pi: f64, r: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::invalid("r must lie in [0, 1]"));
    }
    let sigma = scheme.drift()?;
    Ok((1.0 - scheme.limit_repartition(1.0 - r)?) * pi / sigma)
}

/// The nonzero fixed point of phi, by bisection; 0 when pi <= 1.
///
/// Bisection on phi(r) - r is the defining computation. Closed forms for
/// specific schemes are used only as cross-checks in tests.
pub fn rho_star(scheme: &SelectionScheme, pi: f64) -> Result<f64> {
    if pi <= 1.0 {
        return Ok(0.0);
    }
    let sigma = scheme.drift()?;
    if pi > sigma {
        return Err(Error::invalid("pi cannot exceed sigma"));
    }
    let g = |r: f64| -> Result<f64> { Ok(phi_map(scheme, pi, r)? - r) };
    if g(1.0)? >= 0.0 {
        return Ok(1.0);
    }
    // phi'(0) = pi > 1, so g > 0 near 0: scan down for a bracket
    let mut lo = 0.5f64;
    while g(lo)? <= 0.0 {
        lo /= 2.0;
        if lo < 1e-15 {
            return Err(Error::domain("no positive bracket for the fixed point"));
        }
    }
    let mut hi = 1.0f64;
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if g(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Parameter advice for a target value of pi.
#[derive(Clone, Debug)]
pub struct ParameterAdvice {
    pub p_m: f64,
    pub p_c: f64,
    pub m: usize,
    pub rho_star: f64,
    /// None when the target is reachable; otherwise the largest pi
    /// achievable at this (p_m, ell), reached at p_c = 0.
    pub max_achievable_pi: Option<f64>,
    pub note: String,
}

/// Suggests (p_M, p_C, m) hitting a target pi > 1: p_M defaults to 1/ell,
/// p_C solves the pi equation, m = ceil(ell ln ell).
pub fn advise_parameters(
    ell: usize,
    scheme: &SelectionScheme,
    target_pi: f64,
    p_m: Option<f64>,
) -> Result<ParameterAdvice> {
    let sigma = scheme.drift()?;
    if !(target_pi > 1.0 && target_pi <= sigma) {
        return Err(Error::invalid("target pi must lie in (1, sigma]"));
    }
    if ell == 0 {
        return Err(Error::invalid("ell must be positive"));
    }
    let p_m = p_m.unwrap_or(1.0 / ell as f64);
    let survive = (ell as f64 * (1.0 - p_m).ln()).exp();
    let m = (ell as f64 * (ell as f64).ln()).ceil().max(2.0) as usize;
    let m = m + m % 2;
    let max_pi = sigma * survive;
    if max_pi < target_pi {
        return Ok(ParameterAdvice {
            p_m,
            p_c: 0.0,
            m,
            rho_star: rho_star(scheme, max_pi.min(sigma))?,
            max_achievable_pi: Some(max_pi),
            note: format!(
                "infeasible: at p_m = {p_m} the largest reachable pi is {max_pi:.6}; \
                 lower p_m or the target"
            ),
        });
    }
    let p_c = 1.0 - target_pi / (sigma * survive);
    Ok(ParameterAdvice {
        p_m,
        p_c,
        m,
        rho_star: rho_star(scheme, target_pi)?,
        max_achievable_pi: None,
        note: format!(
            "pi = {target_pi} in the quasispecies regime; budget grows exponentially in m"
        ),
    })
}
