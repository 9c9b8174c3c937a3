//! Single-point crossover and per-bit mutation: the deterministic coupled
//! maps together with the exact kernel probabilities used for testing.

use crate::chromosome::Chromosome;
use crate::error::{Error, Result};

/// Below this mutation probability the kernel is evaluated in log space to
/// avoid underflow at large ell.
const LOG_SPACE_THRESHOLD: f64 = 1e-3;

/// switch(k, u, v): first k bits from u, last ell-k bits from v.
pub fn switch(k: usize, u: &Chromosome, v: &Chromosome) -> Result<Chromosome> {
    let ell = u.len();
    if v.len() != ell {
        return Err(Error::invalid("switch requires equal lengths"));
    }
    if ell < 2 || k < 1 || k > ell - 1 {
        return Err(Error::invalid(format!(
            "cut position {k} out of range 1..={}",
            ell.saturating_sub(1)
        )));
    }
    let mut out = u.clone();
    for i in k..ell {
        out.set(i, v.get(i));
    }
    Ok(out)
}

/// The coupled crossover map on a pair: identity when the crossover flag is
/// off, a two-sided switch at cut k otherwise.
///
/// For ell = 1 there are no cut positions and the map is the identity.
pub fn crossover_pair(
    u: &Chromosome,
    v: &Chromosome,
    flag: bool,
    k: usize,
) -> Result<(Chromosome, Chromosome)> {
    if !flag || u.len() == 1 {
        return Ok((u.clone(), v.clone()));
    }
    Ok((switch(k, u, v)?, switch(k, v, u)?))
}

/// The exact crossover kernel C((u,v), (u',v')).
pub fn crossover_prob(
    p_c: f64,
    (u, v): (&Chromosome, &Chromosome),
    (u2, v2): (&Chromosome, &Chromosome),
) -> Result<f64> {
    let ell = u.len();
    if ell == 1 {
        // identity kernel at ell = 1
        return Ok(if u == u2 && v == v2 { 1.0 } else { 0.0 });
    }
    let mut prob = if u == u2 && v == v2 { 1.0 - p_c } else { 0.0 };
    let mut producing_cuts = 0usize;
    for k in 1..ell {
        if switch(k, u, v)? == *u2 && switch(k, v, u)? == *v2 {
            producing_cuts += 1;
        }
    }
    prob += p_c * producing_cuts as f64 / (ell - 1) as f64;
    Ok(prob)
}

/// The coupled mutation map: bit i is flipped iff mask bit i is set.
pub fn mutate(u: &Chromosome, mask: &Chromosome) -> Result<Chromosome> {
    if u.len() != mask.len() {
        return Err(Error::invalid("mutation mask length mismatch"));
    }
    let mut out = u.clone();
    out.xor_assign(mask);
    Ok(out)
}

/// The exact mutation kernel M(u, v) = p_M^H (1-p_M)^(ell-H).
pub fn mutation_prob(p_m: f64, u: &Chromosome, v: &Chromosome) -> Result<f64> {
    let h = u.hamming(v)? as f64;
    let rest = (u.len() - u.hamming(v)?) as f64;
    if p_m == 0.0 {
        return Ok(if h == 0.0 { 1.0 } else { 0.0 });
    }
    if p_m == 1.0 {
        return Ok(if rest == 0.0 { 1.0 } else { 0.0 });
    }
    if p_m < LOG_SPACE_THRESHOLD {
        Ok((h * p_m.ln() + rest * (1.0 - p_m).ln()).exp())
    } else {
        Ok(p_m.powf(h) * (1.0 - p_m).powf(rest))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn chrom(s: &str) -> Chromosome {
        Chromosome::from_bitstring(s).unwrap()
    }

    #[test]
    fn switch_figure_example() {
        // cut after position 3: 000|011 x 100|110 -> 000110 and 100011
        let u = chrom("000011");
        let v = chrom("100110");
        assert_eq!(switch(3, &u, &v).unwrap(), chrom("000110"));
        assert_eq!(switch(3, &v, &u).unwrap(), chrom("100011"));
    }

    #[test]
    fn switch_identical_parents() {
        let u = chrom("10110");
        for k in 1..5 {
            assert_eq!(switch(k, &u, &u).unwrap(), u);
        }
    }

    #[test]
    fn switch_cut_out_of_range() {
        let u = chrom("1010");
        assert!(switch(0, &u, &u).is_err());
        assert!(switch(4, &u, &u).is_err());
    }

    #[test]
    fn crossover_conserves_bits_per_position() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for _ in 0..200 {
            let ell = rng.gen_range(2..20);
            let mut u = Chromosome::zeros(ell);
            let mut v = Chromosome::zeros(ell);
            for i in 0..ell {
                u.set(i, rng.gen());
                v.set(i, rng.gen());
            }
            let k = rng.gen_range(1..ell);
            let (a, b) = crossover_pair(&u, &v, true, k).unwrap();
            for i in 0..ell {
                let parents = (u.get(i) as u8) + (v.get(i) as u8);
                let children = (a.get(i) as u8) + (b.get(i) as u8);
                assert_eq!(parents, children);
            }
        }
    }

    #[test]
    fn crossover_flag_off_is_identity() {
        let u = chrom("0101");
        let v = chrom("1111");
        assert_eq!(crossover_pair(&u, &v, false, 2).unwrap(), (u.clone(), v.clone()));
    }

    #[test]
    fn crossover_prob_identical_parents() {
        let u = chrom("0110");
        assert_abs_diff_eq!(
            crossover_prob(0.7, (&u, &u), (&u, &u)).unwrap(),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn crossover_prob_figure_pair() {
        // the length-6 figure transition: cuts 1, 2, 3 all produce it
        // because the parents agree on positions 1 and 2
        let u = chrom("000011");
        let v = chrom("100110");
        let u2 = chrom("000110");
        let v2 = chrom("100011");
        let p_c = 0.4;
        let mut cuts = 0;
        for k in 1..6 {
            if switch(k, &u, &v).unwrap() == u2 && switch(k, &v, &u).unwrap() == v2 {
                cuts += 1;
            }
        }
        assert_eq!(cuts, 3);
        assert_abs_diff_eq!(
            crossover_prob(p_c, (&u, &v), (&u2, &v2)).unwrap(),
            3.0 * p_c / 5.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn crossover_rows_sum_to_one() {
        let ell = 3usize;
        for (a, b) in [(0b000u64, 0b101u64), (0b011, 0b110), (0b111, 0b111)] {
            let u = Chromosome::from_code(a, ell);
            let v = Chromosome::from_code(b, ell);
            let mut sum = 0.0;
            for a2 in 0..(1u64 << ell) {
                for b2 in 0..(1u64 << ell) {
                    let u2 = Chromosome::from_code(a2, ell);
                    let v2 = Chromosome::from_code(b2, ell);
                    sum += crossover_prob(0.35, (&u, &v), (&u2, &v2)).unwrap();
                }
            }
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn empirical_crossover_kernel_matches_exact() {
        let ell = 4usize;
        let p_c = 0.3;
        let u = chrom("0011");
        let v = chrom("1010");
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let n = 1_000_000usize;
        let mut counts = std::collections::HashMap::new();
        for _ in 0..n {
            let flag = rng.gen::<f64>() < p_c;
            let k = rng.gen_range(1..ell);
            let pair = crossover_pair(&u, &v, flag, k).unwrap();
            *counts.entry((pair.0.to_code(), pair.1.to_code())).or_insert(0usize) += 1;
        }
        let mut max_dev = 0.0f64;
        for a2 in 0..(1u64 << ell) {
            for b2 in 0..(1u64 << ell) {
                let u2 = Chromosome::from_code(a2, ell);
                let v2 = Chromosome::from_code(b2, ell);
                let exact = crossover_prob(p_c, (&u, &v), (&u2, &v2)).unwrap();
                let emp = *counts.get(&(a2, b2)).unwrap_or(&0) as f64 / n as f64;
                max_dev = max_dev.max((emp - exact).abs());
            }
        }
        assert!(max_dev <= 0.002, "max deviation {max_dev}");
    }

    #[test]
    fn mutate_masks() {
        let u = chrom("0110");
        assert_eq!(mutate(&u, &Chromosome::zeros(4)).unwrap(), u);
        assert_eq!(mutate(&u, &Chromosome::ones(4)).unwrap(), u.complement());
        assert!(mutate(&u, &Chromosome::zeros(5)).is_err());
    }

    #[test]
    fn mutation_prob_examples() {
        let u = chrom("0000000");
        let v = chrom("0101000");
        let p = 0.1f64;
        assert_abs_diff_eq!(
            mutation_prob(p, &u, &v).unwrap(),
            p * p * (1.0 - p).powi(5),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(mutation_prob(0.0, &u, &u).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(mutation_prob(0.0, &u, &v).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn mutation_prob_symmetric_and_normalized() {
        let ell = 4usize;
        let p = 0.23;
        let u = chrom("0110");
        let mut sum = 0.0;
        for b in 0..(1u64 << ell) {
            let v = Chromosome::from_code(b, ell);
            sum += mutation_prob(p, &u, &v).unwrap();
            assert_abs_diff_eq!(
                mutation_prob(p, &u, &v).unwrap(),
                mutation_prob(p, &v, &u).unwrap(),
                epsilon = 1e-15
            );
        }
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn log_space_agrees_with_direct() {
        // relative agreement between log-space and direct products
        for ell in [8usize, 64] {
            for p in [1e-6f64, 1e-4, 0.01, 0.3] {
                let u = Chromosome::zeros(ell);
                let mut v = Chromosome::zeros(ell);
                v.set(0, true);
                v.set(ell - 1, true);
                let h = 2.0;
                let direct = p.powf(h) * (1.0 - p).powf((ell - 2) as f64);
                let logspace = (h * p.ln() + (ell as f64 - 2.0) * (1.0 - p).ln()).exp();
                assert!((direct - logspace).abs() / direct <= 1e-10);
                let got = mutation_prob(p, &u, &v).unwrap();
                assert!((got - direct).abs() / direct <= 1e-10);
            }
        }
    }

    #[test]
    fn empirical_mutation_law_matches_exact() {
        let ell = 3usize;
        let p_m = 0.25;
        let u = chrom("010");
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        let n = 1_000_000usize;
        let mut counts = vec![0usize; 1 << ell];
        for _ in 0..n {
            let mut mask = Chromosome::zeros(ell);
            for i in 0..ell {
                if rng.gen::<f64>() < p_m {
                    mask.set(i, true);
                }
            }
            counts[mutate(&u, &mask).unwrap().to_code() as usize] += 1;
        }
        let mut max_dev = 0.0f64;
        for b in 0..(1u64 << ell) {
            let v = Chromosome::from_code(b, ell);
            let exact = mutation_prob(p_m, &u, &v).unwrap();
            let emp = counts[b as usize] as f64 / n as f64;
            max_dev = max_dev.max((emp - exact).abs());
        }
        assert!(max_dev <= 0.002, "max deviation {max_dev}");
    }
}
