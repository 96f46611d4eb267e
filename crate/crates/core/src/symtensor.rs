//! Symmetric tensors over `R^n` stored once per sorted multi-index.
//!
//! A rank-`m` symmetric tensor has `C(n+m-1, m)` independent components. We
//! keep exactly those, ordered lexicographically by their sorted index tuple,
//! and recover the full (unsorted) contraction through multinomial
//! multiplicities. Indices are zero-based throughout the crate.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, domain, Result};

/// Binomial coefficient as `u128`; zero when `k > n`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

pub fn binomial_f64(n: usize, k: usize) -> f64 {
    binomial(n, k) as f64
}

pub fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

pub(crate) fn big_binomial(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

pub(crate) fn big_factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

/// Sorted index tuple `(i_1 <= ... <= i_m)` labelling one independent
/// component of a symmetric tensor.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    /// Builds the canonical (sorted) form of any index tuple.
    pub fn new(indices: impl Into<Vec<usize>>) -> Self {
        let mut v = indices.into();
        v.sort_unstable();
        MultiIndex(v)
    }

    pub fn empty() -> Self {
        MultiIndex(Vec::new())
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Occurrence count of each coordinate, i.e. the exponent vector of the
    /// monomial `xi^{i_1} ... xi^{i_m}`.
    pub fn counts(&self, n: usize) -> Vec<u32> {
        let mut c = vec![0u32; n];
        for &i in &self.0 {
            c[i] += 1;
        }
        c
    }

    /// Number of distinct orderings of the tuple, `m! / prod(c_i!)`.
    pub fn multiplicity(&self) -> u128 {
        let mut mult = factorial(self.0.len());
        let mut run = 1usize;
        for w in self.0.windows(2) {
            if w[0] == w[1] {
                run += 1;
            } else {
                mult /= factorial(run);
                run = 1;
            }
        }
        if !self.0.is_empty() {
            mult /= factorial(run);
        }
        mult
    }

    pub fn with(&self, j: usize) -> MultiIndex {
        let mut v = self.0.clone();
        let pos = v.partition_point(|&x| x <= j);
        v.insert(pos, j);
        MultiIndex(v)
    }

    pub fn without_position(&self, pos: usize) -> MultiIndex {
        let mut v = self.0.clone();
        v.remove(pos);
        MultiIndex(v)
    }

    /// Product `xi^{i_1} ... xi^{i_m}`.
    pub fn monomial(&self, xi: &[f64]) -> f64 {
        self.0.iter().map(|&i| xi[i]).product()
    }

    /// All distinct orderings of the tuple.
    pub fn arrangements(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut current = Vec::with_capacity(self.0.len());
        let mut used = vec![false; self.0.len()];
        fn rec(src: &[usize], used: &mut [bool], cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == src.len() {
                out.push(cur.clone());
                return;
            }
            for i in 0..src.len() {
                if used[i] || (i > 0 && src[i] == src[i - 1] && !used[i - 1]) {
                    continue;
                }
                used[i] = true;
                cur.push(src[i]);
                rec(src, used, cur, out);
                cur.pop();
                used[i] = false;
            }
        }
        rec(&self.0, &mut used, &mut current, &mut out);
        out
    }
}

/// Number of independent components of a rank-`m` symmetric tensor on `R^n`.
pub fn dimension(m: usize, n: usize) -> Result<usize> {
    if n < 1 {
        return Err(domain("dimension requires n >= 1"));
    }
    Ok(binomial(n + m - 1, m) as usize)
}

fn count_sequences(len: usize, values: usize) -> usize {
    if len == 0 {
        1
    } else if values == 0 {
        0
    } else {
        binomial(values + len - 1, len) as usize
    }
}

/// All sorted multi-indices of rank `m` over `0..n` in lexicographic order.
pub fn multi_indices(m: usize, n: usize) -> Vec<MultiIndex> {
    let mut out = Vec::with_capacity(count_sequences(m, n));
    let mut cur = Vec::with_capacity(m);
    fn rec(m: usize, n: usize, lo: usize, cur: &mut Vec<usize>, out: &mut Vec<MultiIndex>) {
        if cur.len() == m {
            out.push(MultiIndex(cur.clone()));
            return;
        }
        for v in lo..n {
            cur.push(v);
            rec(m, n, v, cur, out);
            cur.pop();
        }
    }
    rec(m, n, 0, &mut cur, &mut out);
    out
}

/// Position of a sorted multi-index in the order produced by [`multi_indices`].
pub fn rank_of(idx: &MultiIndex, n: usize) -> usize {
    let s = idx.as_slice();
    let m = s.len();
    let mut rank = 0;
    let mut lo = 0;
    for (pos, &val) in s.iter().enumerate() {
        for v in lo..val {
            rank += count_sequences(m - pos - 1, n - v);
        }
        lo = val;
    }
    rank
}

/// Rank-`m` symmetric tensor with complex components.
#[derive(Clone, Debug, PartialEq)]
pub struct SymTensor {
    rank: usize,
    dim: usize,
    components: Vec<Complex64>,
}

impl SymTensor {
    pub fn zeros(rank: usize, dim: usize) -> Result<Self> {
        let len = dimension(rank, dim)?;
        Ok(SymTensor {
            rank,
            dim,
            components: vec![Complex64::zero(); len],
        })
    }

    /// Components in [`multi_indices`] order.
    pub fn from_components(rank: usize, dim: usize, components: Vec<Complex64>) -> Result<Self> {
        check_dim(dimension(rank, dim)?, components.len())?;
        Ok(SymTensor {
            rank,
            dim,
            components,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[Complex64] {
        &self.components
    }

    pub fn components_mut(&mut self) -> &mut [Complex64] {
        &mut self.components
    }

    fn validate(&self, indices: &[usize]) -> Result<()> {
        check_dim(self.rank, indices.len())?;
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.dim) {
            return Err(domain(format!("index {bad} out of range 0..{}", self.dim)));
        }
        Ok(())
    }

    /// Component lookup with an index tuple in any order.
    pub fn get(&self, indices: &[usize]) -> Result<Complex64> {
        self.validate(indices)?;
        Ok(self.components[rank_of(&MultiIndex::new(indices.to_vec()), self.dim)])
    }

    pub fn set(&mut self, indices: &[usize], value: Complex64) -> Result<()> {
        self.validate(indices)?;
        let pos = rank_of(&MultiIndex::new(indices.to_vec()), self.dim);
        self.components[pos] = value;
        Ok(())
    }

    /// Full contraction `f_{i_1..i_m} xi^{i_1} ... xi^{i_m}`.
    pub fn contract_direction(&self, xi: &[f64]) -> Result<Complex64> {
        check_dim(self.dim, xi.len())?;
        Ok(multi_indices(self.rank, self.dim)
            .iter()
            .zip(&self.components)
            .map(|(idx, c)| c * (idx.multiplicity() as f64 * idx.monomial(xi)))
            .sum())
    }
}

/// Averages an arbitrary (not necessarily symmetric) tensor over all index
/// permutations. Entries absent from `raw` count as zero.
pub fn symmetrize(raw: &HashMap<Vec<usize>, Complex64>, m: usize, n: usize) -> Result<SymTensor> {
    let mut out = SymTensor::zeros(m, n)?;
    for (tuple, value) in raw {
        out.validate(tuple)?;
        let idx = MultiIndex::new(tuple.clone());
        let pos = rank_of(&idx, n);
        out.components[pos] += value / idx.multiplicity() as f64;
    }
    Ok(out)
}

/// `a(m, k, p)` as the finite alternating sum over `l` from `max(m-k, p)` to
/// `m`, evaluated in exact rational arithmetic.
pub fn coefficient_a(m: usize, k: usize, p: usize) -> Result<BigRational> {
    if !(p <= k && k <= m) {
        return Err(domain(format!("coefficient_a needs 0 <= p <= k <= m, got ({m},{k},{p})")));
    }
    let mut sum = BigInt::zero();
    for l in (m - k).max(p)..=m {
        let num = big_factorial(k) * big_factorial(l) * big_binomial(m, l) * big_binomial(l, p);
        let term = num / big_factorial(k + l - m);
        if l % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    let sign = if m.is_multiple_of(2) { BigInt::one() } else { -BigInt::one() };
    Ok(BigRational::new(
        sign * big_binomial(k, p) * sum,
        big_factorial(m),
    ))
}

/// `c(m, k, p) = sum_{r=0}^{k} (-1)^r C(k, r) C(r + m - k, p)`.
pub fn coefficient_c(m: usize, k: usize, p: usize) -> Result<BigRational> {
    if k > m {
        return Err(domain(format!("coefficient_c needs k <= m, got ({m},{k},{p})")));
    }
    let mut sum = BigInt::zero();
    for r in 0..=k {
        let term = big_binomial(k, r) * big_binomial(r + m - k, p);
        if r % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    Ok(BigRational::from_integer(sum))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn rat(v: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(v))
    }

    #[test]
    fn dimension_values() {
        assert_eq!(dimension(2, 3).unwrap(), 6);
        assert_eq!(dimension(0, 5).unwrap(), 1);
        assert_eq!(dimension(3, 2).unwrap(), 4);
        assert!(dimension(2, 0).is_err());
    }

    #[test]
    fn enumeration_matches_dimension_and_rank() {
        for n in 1..=5 {
            for m in 0..=5 {
                let all = multi_indices(m, n);
                assert_eq!(all.len(), dimension(m, n).unwrap());
                for (i, idx) in all.iter().enumerate() {
                    assert_eq!(rank_of(idx, n), i);
                    assert!(idx.as_slice().windows(2).all(|w| w[0] <= w[1]));
                }
            }
        }
    }

    #[test]
    fn rank_zero_is_scalar() {
        let t = SymTensor::zeros(0, 4).unwrap();
        assert_eq!(t.components().len(), 1);
        assert_eq!(MultiIndex::empty().multiplicity(), 1);
        assert_eq!(t.contract_direction(&[1.0, 2.0, 3.0, 4.0]).unwrap(), c(0.0));
    }

    #[test]
    fn multiplicity_counts_arrangements() {
        for idx in multi_indices(4, 3) {
            assert_eq!(idx.multiplicity() as usize, idx.arrangements().len());
        }
    }

    #[test]
    fn symmetrize_examples() {
        let raw = HashMap::from([(vec![0, 1], c(2.0)), (vec![1, 0], c(0.0))]);
        let t = symmetrize(&raw, 2, 2).unwrap();
        assert_eq!(t.get(&[0, 1]).unwrap(), c(1.0));
        assert_eq!(t.get(&[1, 0]).unwrap(), c(1.0));

        let raw = HashMap::from([(vec![0, 1, 2], c(6.0))]);
        let t = symmetrize(&raw, 3, 3).unwrap();
        assert_eq!(t.get(&[2, 0, 1]).unwrap(), c(1.0));

        let bad = HashMap::from([(vec![0, 3], c(1.0))]);
        assert!(symmetrize(&bad, 2, 3).is_err());
    }

    #[test]
    fn contraction_examples() {
        let (a, b) = (0.7, -1.3);
        let mut t = SymTensor::zeros(2, 2).unwrap();
        t.set(&[0, 0], c(1.0)).unwrap();
        assert!((t.contract_direction(&[a, b]).unwrap() - c(a * a)).norm() < 1e-15);

        let mut t = SymTensor::zeros(2, 2).unwrap();
        t.set(&[1, 0], c(1.0)).unwrap();
        assert!((t.contract_direction(&[a, b]).unwrap() - c(2.0 * a * b)).norm() < 1e-15);

        assert!(t.contract_direction(&[1.0]).is_err());
    }

    #[test]
    fn coefficient_examples() {
        assert_eq!(coefficient_a(2, 1, 1).unwrap(), rat(1));
        assert_eq!(coefficient_a(3, 2, 0).unwrap(), rat(0));
        assert_eq!(coefficient_a(0, 0, 0).unwrap(), rat(1));
        assert!(coefficient_a(2, 3, 1).is_err());
        assert!(coefficient_a(3, 1, 2).is_err());

        assert_eq!(coefficient_c(2, 1, 1).unwrap(), rat(-1));
        assert_eq!(coefficient_c(3, 2, 1).unwrap(), rat(0));
        assert_eq!(coefficient_c(2, 2, 2).unwrap(), rat(1));
        assert_eq!(coefficient_c(4, 0, 2).unwrap(), rat(6));
        assert!(coefficient_c(1, 2, 0).is_err());
    }

    #[test]
    fn coefficient_closed_forms() {
        for m in 0..=6 {
            for k in 0..=m {
                for p in 0..=k {
                    let a = coefficient_a(m, k, p).unwrap();
                    let expected = if p == k { rat(1) } else { rat(0) };
                    assert_eq!(a, expected, "a({m},{k},{p})");
                    // a = (-1)^k C(k,p) c(m,k,p)
                    let sign = if k % 2 == 0 { 1 } else { -1 };
                    let via_c = coefficient_c(m, k, p).unwrap()
                        * BigRational::from_integer(big_binomial(k, p) * sign);
                    assert_eq!(a, via_c);
                }
            }
        }
    }

    fn raw_strategy(m: usize, n: usize) -> impl Strategy<Value = HashMap<Vec<usize>, Complex64>> {
        prop::collection::hash_map(
            prop::collection::vec(0..n, m),
            (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| Complex64::new(a, b)),
            0..12,
        )
    }

    fn expand(t: &SymTensor) -> HashMap<Vec<usize>, Complex64> {
        let mut out = HashMap::new();
        for (idx, v) in multi_indices(t.rank(), t.dim()).iter().zip(t.components()) {
            for arr in idx.arrangements() {
                out.insert(arr, *v);
            }
        }
        out
    }

    proptest! {
        #[test]
        fn symmetrize_is_idempotent(raw in raw_strategy(3, 3)) {
            let once = symmetrize(&raw, 3, 3).unwrap();
            let twice = symmetrize(&expand(&once), 3, 3).unwrap();
            for (a, b) in once.components().iter().zip(twice.components()) {
                prop_assert!((a - b).norm() < 1e-14);
            }
        }

        #[test]
        fn contraction_kills_asymmetry(
            raw in raw_strategy(3, 3),
            xi in prop::collection::vec(-2.0f64..2.0, 3),
        ) {
            let sym = symmetrize(&raw, 3, 3).unwrap();
            let direct: Complex64 = raw
                .iter()
                .map(|(t, v)| v * t.iter().map(|&i| xi[i]).product::<f64>())
                .sum();
            let via_sym = sym.contract_direction(&xi).unwrap();
            let scale = 1.0f64.max(direct.norm());
            prop_assert!((direct - via_sym).norm() <= 1e-13 * scale);
        }
    }
}
