//! Bit-packed chromosomes and populations.
//!
//! A chromosome is a binary string of fixed length `ell`, stored packed in
//! 64-bit words. All operations are defined on logical bit positions
//! `0..ell`, so the packing is unobservable. Position 0 corresponds to the
//! leftmost digit of the bitstring literal.

use crate::error::{Error, Result};
use std::fmt;

const WORD_BITS: usize = 64;

/// A fixed-length binary string.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Chromosome {
    len: usize,
    words: Vec<u64>,
}

impl Chromosome {
    /// The all-zero chromosome of length `len`.
    pub fn zeros(len: usize) -> Self {
        assert!(len >= 1, "chromosome length must be at least 1");
        let nwords = (len + WORD_BITS - 1) / WORD_BITS;
        Chromosome {
            len,
            words: vec![0; nwords],
        }
    }

    /// The all-one chromosome of length `len` (the Master sequence of the
    /// sharp peak landscape).
    pub fn ones(len: usize) -> Self {
        let mut c = Self::zeros(len);
        for w in 0..c.words.len() {
            c.words[w] = !0u64;
        }
        c.mask_tail();
        c
    }

    /// Builds a chromosome from a bitstring literal such as `"010011"`.
    pub fn from_bitstring(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::invalid("empty bitstring"));
        }
        let mut c = Self::zeros(s.len());
        for (i, ch) in s.chars().enumerate() {
            match ch {
                '0' => {}
                '1' => c.set(i, true),
                _ => return Err(Error::invalid(format!("invalid bit character '{ch}'"))),
            }
        }
        Ok(c)
    }

    /// Decodes `len` bits from the low bits of `code`, position 0 at the
    /// least significant bit. Used by the tiny exact oracle to enumerate
    /// the cube.
    pub fn from_code(code: u64, len: usize) -> Self {
        assert!(len <= 64);
        let mut c = Self::zeros(len);
        for i in 0..len {
            if code >> i & 1 == 1 {
                c.set(i, true);
            }
        }
        c
    }

    /// Inverse of [`from_code`](Self::from_code); requires `len <= 64`.
    pub fn to_code(&self) -> u64 {
        assert!(self.len <= 64);
        let mut code = 0u64;
        for i in 0..self.len {
            if self.get(i) {
                code |= 1 << i;
            }
        }
        code
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i / WORD_BITS] >> (i % WORD_BITS) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        debug_assert!(i < self.len);
        let mask = 1u64 << (i % WORD_BITS);
        if value {
            self.words[i / WORD_BITS] |= mask;
        } else {
            self.words[i / WORD_BITS] &= !mask;
        }
    }

    pub fn flip(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i / WORD_BITS] ^= 1u64 << (i % WORD_BITS);
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_all_ones(&self) -> bool {
        self.count_ones() == self.len
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Number of leading ones, counted from position 0.
    pub fn leading_ones(&self) -> usize {
        let mut count = 0;
        for (w, &word) in self.words.iter().enumerate() {
            let bits_here = (self.len - w * WORD_BITS).min(WORD_BITS);
            let run = (!word).trailing_zeros() as usize;
            if run >= bits_here {
                count += bits_here;
            } else {
                count += run;
                break;
            }
        }
        count
    }

    pub fn complement(&self) -> Self {
        let mut c = self.clone();
        for w in c.words.iter_mut() {
            *w = !*w;
        }
        c.mask_tail();
        c
    }

    /// Hamming distance: the number of differing positions.
    pub fn hamming(&self, other: &Chromosome) -> Result<usize> {
        if self.len != other.len {
            return Err(Error::invalid(format!(
                "length mismatch: {} vs {}",
                self.len, other.len
            )));
        }
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum())
    }

    /// XOR with a flip mask of the same length. Used by the mutation map.
    pub fn xor_assign(&mut self, mask: &Chromosome) {
        debug_assert_eq!(self.len, mask.len);
        for (w, m) in self.words.iter_mut().zip(&mask.words) {
            *w ^= m;
        }
    }

    fn mask_tail(&mut self) {
        let rem = self.len % WORD_BITS;
        if rem != 0 {
            let last = self.words.len() - 1;
            self.words[last] &= (1u64 << rem) - 1;
        }
    }
}

impl fmt::Display for Chromosome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            write!(f, "{}", if self.get(i) { '1' } else { '0' })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Chromosome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Chromosome({self})")
    }
}

/// An ordered m-tuple of chromosomes, the Markov-chain state.
///
/// The population size m is even and fixed for a run: the crossover acts on
/// the consecutive pairs (2i-1, 2i).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Population {
    members: Vec<Chromosome>,
}

impl Population {
    pub fn new(members: Vec<Chromosome>) -> Result<Self> {
        if members.is_empty() || members.len() % 2 != 0 {
            return Err(Error::invalid(format!(
                "population size must be even and positive, got {}",
                members.len()
            )));
        }
        let ell = members[0].len();
        if members.iter().any(|c| c.len() != ell) {
            return Err(Error::invalid("all members must share the same length"));
        }
        Ok(Population { members })
    }

    /// The starting population of the disordered-regime experiments: one
    /// Master sequence followed by m-1 all-zero chromosomes.
    pub fn master_seeded(ell: usize, m: usize) -> Result<Self> {
        let mut members = vec![Chromosome::zeros(ell); m];
        members[0] = Chromosome::ones(ell);
        Population::new(members)
    }

    pub fn uniform_random(ell: usize, m: usize, rng: &mut impl rand::Rng) -> Result<Self> {
        let members = (0..m)
            .map(|_| {
                let mut c = Chromosome::zeros(ell);
                for i in 0..ell {
                    c.set(i, rng.gen::<bool>());
                }
                c
            })
            .collect();
        Population::new(members)
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn ell(&self) -> usize {
        self.members[0].len()
    }

    pub fn members(&self) -> &[Chromosome] {
        &self.members
    }

    pub fn member(&self, i: usize) -> &Chromosome {
        &self.members[i]
    }

    /// Encodes the population as an integer, member-major. Requires
    /// `ell * m <= 64`; used by the tiny exact oracle.
    pub fn to_code(&self) -> u64 {
        let ell = self.ell();
        assert!(ell * self.size() <= 64);
        let mut code = 0u64;
        for (i, c) in self.members.iter().enumerate() {
            code |= c.to_code() << (i * ell);
        }
        code
    }

    pub fn from_code(code: u64, ell: usize, m: usize) -> Self {
        assert!(ell * m <= 64);
        let mask = if ell == 64 { !0u64 } else { (1u64 << ell) - 1 };
        let members = (0..m)
            .map(|i| Chromosome::from_code(code >> (i * ell) & mask, ell))
            .collect();
        Population { members }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hamming_identity_and_complement() {
        let u = Chromosome::from_bitstring("0110100101").unwrap();
        assert_eq!(u.hamming(&u).unwrap(), 0);
        assert_eq!(u.hamming(&u.complement()).unwrap(), u.len());
    }

    #[test]
    fn hamming_mutation_example() {
        // distance-2 pair of length 7
        let u = Chromosome::from_bitstring("0000000").unwrap();
        let v = Chromosome::from_bitstring("0101000").unwrap();
        assert_eq!(u.hamming(&v).unwrap(), 2);
        assert_eq!(v.hamming(&u).unwrap(), 2);
    }

    #[test]
    fn hamming_length_mismatch_is_error() {
        let u = Chromosome::zeros(4);
        let v = Chromosome::zeros(5);
        assert!(u.hamming(&v).is_err());
    }

    #[test]
    fn leading_ones_counts() {
        assert_eq!(Chromosome::from_bitstring("110100").unwrap().leading_ones(), 2);
        assert_eq!(Chromosome::zeros(6).leading_ones(), 0);
        assert_eq!(Chromosome::ones(70).leading_ones(), 70);
        let mut c = Chromosome::ones(70);
        c.set(65, false);
        assert_eq!(c.leading_ones(), 65);
    }

    #[test]
    fn population_requires_even_size() {
        let members = vec![Chromosome::zeros(3); 3];
        assert!(Population::new(members).is_err());
    }

    #[test]
    fn code_round_trip() {
        let p = Population::master_seeded(3, 4).unwrap();
        let q = Population::from_code(p.to_code(), 3, 4);
        assert_eq!(p, q);
    }

    proptest! {
        #[test]
        fn hamming_symmetric_and_bounded(a in "[01]{1,100}", b in "[01]{1,100}") {
            let u = Chromosome::from_bitstring(&a).unwrap();
            let v = Chromosome::from_bitstring(&b).unwrap();
            if a.len() == b.len() {
                let d = u.hamming(&v).unwrap();
                prop_assert_eq!(d, v.hamming(&u).unwrap());
                prop_assert!(d <= a.len());
            } else {
                prop_assert!(u.hamming(&v).is_err());
            }
        }

        #[test]
        fn bitstring_round_trip(s in "[01]{1,130}") {
            let c = Chromosome::from_bitstring(&s).unwrap();
            prop_assert_eq!(c.to_string(), s);
        }
    }
}
