//! Exact Weyl algebra over the variables `(x^1..x^n, xi^1..xi^n)`.
//!
//! Elements are kept in normal order: every term is
//! `c * x^alpha xi^beta d_x^gamma d_xi^delta` with rational `c`. Operator
//! identities are checked twice: as equal normal-ordered elements, and by
//! letting both sides act factor by factor on random polynomials, which
//! never touches the normal-ordering code.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, domain, Result};
use crate::symtensor::{big_binomial, big_factorial, binomial};

fn rat(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// `a! / (a - k)!`.
fn falling(a: u32, k: u32) -> BigInt {
    (0..k).fold(BigInt::one(), |acc, i| acc * BigInt::from(a - i))
}

/// Normal-ordered element. A term key has length `4n`: exponents of
/// `x`, `xi`, then orders of `d_x`, `d_xi`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeylElement {
    n: usize,
    terms: BTreeMap<Vec<u32>, BigRational>,
}

impl WeylElement {
    pub fn zero(n: usize) -> Self {
        WeylElement {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: BigRational) -> Self {
        let mut e = WeylElement::zero(n);
        e.add_term(vec![0; 4 * n], c);
        e
    }

    pub fn one(n: usize) -> Self {
        WeylElement::constant(n, BigRational::one())
    }

    fn unit(n: usize, slot: usize) -> Self {
        let mut key = vec![0; 4 * n];
        key[slot] = 1;
        let mut e = WeylElement::zero(n);
        e.add_term(key, BigRational::one());
        e
    }

    /// Multiplication by `x^i`.
    pub fn x(n: usize, i: usize) -> Self {
        WeylElement::unit(n, i)
    }

    /// Multiplication by `xi^i`.
    pub fn xi(n: usize, i: usize) -> Self {
        WeylElement::unit(n, n + i)
    }

    pub fn dx(n: usize, i: usize) -> Self {
        WeylElement::unit(n, 2 * n + i)
    }

    pub fn dxi(n: usize, i: usize) -> Self {
        WeylElement::unit(n, 3 * n + i)
    }

    /// `<xi, d_x> = sum_p xi^p d/dx^p`.
    pub fn transport(n: usize) -> Self {
        (0..n).fold(WeylElement::zero(n), |acc, p| {
            acc.add(&WeylElement::xi(n, p).mul(&WeylElement::dx(n, p)).unwrap()).unwrap()
        })
    }

    /// `<xi, d_xi> = sum_p xi^p d/dxi^p`.
    pub fn euler_xi(n: usize) -> Self {
        (0..n).fold(WeylElement::zero(n), |acc, p| {
            acc.add(&WeylElement::xi(n, p).mul(&WeylElement::dxi(n, p)).unwrap()).unwrap()
        })
    }

    /// John operator `d^2/dx^i dxi^j - d^2/dx^j dxi^i`.
    pub fn john(n: usize, i: usize, j: usize) -> Self {
        let a = WeylElement::dx(n, i).mul(&WeylElement::dxi(n, j)).unwrap();
        let b = WeylElement::dx(n, j).mul(&WeylElement::dxi(n, i)).unwrap();
        a.sub(&b).unwrap()
    }

    /// `d/dx^i - xi_i <xi, d_x>`, tangent to `TS^(n-1)`.
    pub fn tangent_x(n: usize, i: usize) -> Self {
        let t = WeylElement::transport(n);
        WeylElement::dx(n, i)
            .sub(&WeylElement::xi(n, i).mul(&t).unwrap())
            .unwrap()
    }

    /// `d/dxi^i - x_i <xi, d_x> - xi_i <xi, d_xi>`, tangent to `TS^(n-1)`.
    pub fn tangent_xi(n: usize, i: usize) -> Self {
        let t = WeylElement::transport(n);
        let e = WeylElement::euler_xi(n);
        WeylElement::dxi(n, i)
            .sub(&WeylElement::x(n, i).mul(&t).unwrap())
            .unwrap()
            .sub(&WeylElement::xi(n, i).mul(&e).unwrap())
            .unwrap()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.is_zero()
    }

    fn add_term(&mut self, key: Vec<u32>, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&key) {
            Some(existing) => {
                *existing += c;
                if existing.is_zero() {
                    self.terms.remove(&key);
                }
            }
            None => {
                self.terms.insert(key, c);
            }
        }
    }

    pub fn add(&self, other: &WeylElement) -> Result<WeylElement> {
        check_dim(self.n, other.n)?;
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.add_term(k.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &WeylElement) -> Result<WeylElement> {
        self.add(&other.scaled(&rat(-1)))
    }

    pub fn scaled(&self, s: &BigRational) -> WeylElement {
        let mut out = WeylElement::zero(self.n);
        for (k, c) in &self.terms {
            out.add_term(k.clone(), c * s);
        }
        out
    }

    /// Normal-ordered product `self * other` (apply `other` first).
    ///
    /// Moving `d^g` past `z^a` on one variable uses
    /// `d^g z^a = sum_k C(g, k) a!/(a-k)! z^{a-k} d^{g-k}`.
    pub fn mul(&self, other: &WeylElement) -> Result<WeylElement> {
        check_dim(self.n, other.n)?;
        let vars = 2 * self.n;
        let mut out = WeylElement::zero(self.n);
        for (lk, lc) in &self.terms {
            for (rk, rc) in &other.terms {
                let mut key = vec![0u32; 2 * vars];
                let coeff = lc * rc;
                expand_product(lk, rk, vars, 0, &mut key, BigInt::one(), &coeff, &mut out);
            }
        }
        Ok(out)
    }

    pub fn pow(&self, r: u32) -> WeylElement {
        (0..r).fold(WeylElement::one(self.n), |acc, _| acc.mul(self).unwrap())
    }

    /// `[a, b] = a b - b a`.
    pub fn commutator(&self, other: &WeylElement) -> Result<WeylElement> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    /// Applies the operator to a polynomial.
    pub fn act(&self, poly: &Polynomial) -> Result<Polynomial> {
        check_dim(self.n, poly.n)?;
        let vars = 2 * self.n;
        let mut out = Polynomial::zero(self.n);
        for (key, c) in &self.terms {
            let (mult, der) = key.split_at(vars);
            for (exps, pc) in &poly.terms {
                if der.iter().zip(exps).any(|(d, e)| d > e) {
                    continue;
                }
                let mut factor = BigInt::one();
                let mut result = Vec::with_capacity(vars);
                for v in 0..vars {
                    factor *= falling(exps[v], der[v]);
                    result.push(exps[v] - der[v] + mult[v]);
                }
                out.add_term(result, c * pc * BigRational::from_integer(factor));
            }
        }
        Ok(out)
    }
}

#[allow(clippy::too_many_arguments)]
fn expand_product(
    lk: &[u32],
    rk: &[u32],
    vars: usize,
    v: usize,
    key: &mut Vec<u32>,
    weight: BigInt,
    coeff: &BigRational,
    out: &mut WeylElement,
) {
    if v == vars {
        out.add_term(key.clone(), coeff * BigRational::from_integer(weight));
        return;
    }
    let g = lk[vars + v];
    let a = rk[v];
    for k in 0..=g.min(a) {
        key[v] = lk[v] + a - k;
        key[vars + v] = g - k + rk[vars + v];
        let w = &weight * big_binomial(g as usize, k as usize) * falling(a, k);
        expand_product(lk, rk, vars, v + 1, key, w, coeff, out);
    }
}

impl fmt::Display for WeylElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let n = self.n;
        let names = ["x", "xi", "dx", "dxi"];
        for (t, (key, c)) in self.terms.iter().enumerate() {
            if t > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})")?;
            for (slot, &e) in key.iter().enumerate() {
                if e > 0 {
                    write!(f, "*{}{}", names[slot / n], slot % n)?;
                    if e > 1 {
                        write!(f, "^{e}")?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Polynomial in `(x, xi)` with rational coefficients; exponent vectors
/// have length `2n` (`x` first).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polynomial {
    n: usize,
    terms: BTreeMap<Vec<u32>, BigRational>,
}

impl Polynomial {
    pub fn zero(n: usize) -> Self {
        Polynomial {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: BigRational) -> Self {
        let mut p = Polynomial::zero(n);
        p.add_term(vec![0; 2 * n], c);
        p
    }

    pub fn monomial(n: usize, exps: Vec<u32>, c: BigRational) -> Result<Self> {
        check_dim(2 * n, exps.len())?;
        let mut p = Polynomial::zero(n);
        p.add_term(exps, c);
        Ok(p)
    }

    fn var(n: usize, slot: usize) -> Self {
        let mut e = vec![0; 2 * n];
        e[slot] = 1;
        let mut p = Polynomial::zero(n);
        p.add_term(e, BigRational::one());
        p
    }

    pub fn x(n: usize, i: usize) -> Self {
        Polynomial::var(n, i)
    }

    pub fn xi(n: usize, i: usize) -> Self {
        Polynomial::var(n, n + i)
    }

    /// `|xi|^2 - 1`.
    pub fn sphere_constraint(n: usize) -> Self {
        let mut p = Polynomial::constant(n, rat(-1));
        for i in 0..n {
            let mut e = vec![0; 2 * n];
            e[n + i] = 2;
            p.add_term(e, BigRational::one());
        }
        p
    }

    /// `<x, xi>`.
    pub fn tangency_constraint(n: usize) -> Self {
        let mut p = Polynomial::zero(n);
        for i in 0..n {
            let mut e = vec![0; 2 * n];
            e[i] = 1;
            e[n + i] = 1;
            p.add_term(e, BigRational::one());
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.is_zero()
    }

    fn add_term(&mut self, exps: Vec<u32>, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&exps) {
            Some(existing) => {
                *existing += c;
                if existing.is_zero() {
                    self.terms.remove(&exps);
                }
            }
            None => {
                self.terms.insert(exps, c);
            }
        }
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }

    pub fn scaled(&self, s: &BigRational) -> Polynomial {
        let mut out = Polynomial::zero(self.n);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), c * s);
        }
        out
    }

    fn derive_slot(&self, slot: usize) -> Polynomial {
        let mut out = Polynomial::zero(self.n);
        for (e, c) in &self.terms {
            if e[slot] > 0 {
                let mut d = e.clone();
                d[slot] -= 1;
                out.add_term(d, c * rat(e[slot] as i64));
            }
        }
        out
    }

    fn mul_slot(&self, slot: usize) -> Polynomial {
        let mut out = Polynomial::zero(self.n);
        for (e, c) in &self.terms {
            let mut d = e.clone();
            d[slot] += 1;
            out.add_term(d, c.clone());
        }
        out
    }

    pub fn derive_x(&self, i: usize) -> Polynomial {
        self.derive_slot(i)
    }

    pub fn derive_xi(&self, i: usize) -> Polynomial {
        self.derive_slot(self.n + i)
    }

    pub fn mul_x(&self, i: usize) -> Polynomial {
        self.mul_slot(i)
    }

    pub fn mul_xi(&self, i: usize) -> Polynomial {
        self.mul_slot(self.n + i)
    }

    /// `<xi, d_x>` applied directly.
    pub fn transport(&self) -> Polynomial {
        (0..self.n).fold(Polynomial::zero(self.n), |acc, p| {
            acc.add(&self.derive_x(p).mul_xi(p))
        })
    }

    pub fn evaluate(&self, x: &[f64], xi: &[f64]) -> Result<f64> {
        check_dim(self.n, x.len())?;
        check_dim(self.n, xi.len())?;
        let point: Vec<f64> = x.iter().chain(xi).copied().collect();
        Ok(self
            .terms
            .iter()
            .map(|(e, c)| {
                let mono: f64 = e.iter().zip(&point).map(|(&k, v)| v.powi(k as i32)).product();
                c.to_f64().unwrap_or(f64::NAN) * mono
            })
            .sum())
    }

    /// Random polynomial of total degree at most `max_degree` with small
    /// rational coefficients.
    pub fn random<R: Rng + ?Sized>(n: usize, max_degree: u32, terms: usize, rng: &mut R) -> Self {
        let mut p = Polynomial::zero(n);
        for _ in 0..terms {
            let mut e = vec![0u32; 2 * n];
            for _ in 0..rng.random_range(0..=max_degree) {
                e[rng.random_range(0..2 * n)] += 1;
            }
            let num = rng.random_range(-9i64..=9);
            let den = rng.random_range(1i64..=5);
            p.add_term(e, BigRational::new(BigInt::from(num), BigInt::from(den)));
        }
        p
    }
}

/// `count` random oracle polynomials of degree at most 5.
pub fn oracle_polynomials(n: usize, count: usize, seed: u64) -> Vec<Polynomial> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| Polynomial::random(n, 5, 12, &mut rng)).collect()
}

/// Building block of an operator expression.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Factor {
    /// `<xi, d_x>^r`
    Transport(u32),
    /// `<xi, d_xi>`
    EulerXi,
    Dx(usize),
    Dxi(usize),
    X(usize),
    Xi(usize),
}

impl Factor {
    fn element(&self, n: usize, cache: &mut ElementCache) -> WeylElement {
        match *self {
            Factor::Transport(r) => cache.transport_power(r).clone(),
            Factor::EulerXi => WeylElement::euler_xi(n),
            Factor::Dx(i) => WeylElement::dx(n, i),
            Factor::Dxi(i) => WeylElement::dxi(n, i),
            Factor::X(i) => WeylElement::x(n, i),
            Factor::Xi(i) => WeylElement::xi(n, i),
        }
    }

    fn act(&self, p: &Polynomial) -> Polynomial {
        match *self {
            Factor::Transport(r) => (0..r).fold(p.clone(), |acc, _| acc.transport()),
            Factor::EulerXi => (0..p.n).fold(Polynomial::zero(p.n), |acc, q| {
                acc.add(&p.derive_xi(q).mul_xi(q))
            }),
            Factor::Dx(i) => p.derive_x(i),
            Factor::Dxi(i) => p.derive_xi(i),
            Factor::X(i) => p.mul_x(i),
            Factor::Xi(i) => p.mul_xi(i),
        }
    }
}

/// Memoized transport powers and factor products.
#[derive(Debug)]
pub struct ElementCache {
    n: usize,
    transport: Vec<WeylElement>,
    products: HashMap<Vec<Factor>, WeylElement>,
}

impl ElementCache {
    pub fn new(n: usize) -> Self {
        ElementCache {
            n,
            transport: vec![WeylElement::one(n)],
            products: HashMap::new(),
        }
    }

    fn transport_power(&mut self, r: u32) -> &WeylElement {
        let t = WeylElement::transport(self.n);
        while self.transport.len() <= r as usize {
            let next = self.transport.last().unwrap().mul(&t).unwrap();
            self.transport.push(next);
        }
        &self.transport[r as usize]
    }

    fn product(&mut self, factors: &[Factor]) -> WeylElement {
        if let Some(e) = self.products.get(factors) {
            return e.clone();
        }
        let n = self.n;
        let mut acc = WeylElement::one(n);
        for f in factors {
            let e = f.element(n, self);
            acc = acc.mul(&e).unwrap();
        }
        self.products.insert(factors.to_vec(), acc.clone());
        acc
    }
}

/// Linear combination of operator products; factors are listed left to
/// right, so the last one acts first.
#[derive(Clone, Debug, PartialEq)]
pub struct OpExpr {
    n: usize,
    terms: Vec<(BigRational, Vec<Factor>)>,
}

impl OpExpr {
    pub fn new(n: usize) -> Self {
        OpExpr { n, terms: Vec::new() }
    }

    pub fn push(&mut self, coeff: BigRational, factors: Vec<Factor>) {
        if !coeff.is_zero() {
            self.terms.push((coeff, factors));
        }
    }

    pub fn to_element(&self, cache: &mut ElementCache) -> WeylElement {
        let mut out = WeylElement::zero(self.n);
        for (c, factors) in &self.terms {
            out = out.add(&cache.product(factors).scaled(c)).unwrap();
        }
        out
    }

    /// Action computed factor by factor, without any normal ordering.
    pub fn act(&self, p: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero(self.n);
        for (c, factors) in &self.terms {
            let image = factors.iter().rev().fold(p.clone(), |acc, f| f.act(&acc));
            out = out.add(&image.scaled(c));
        }
        out
    }
}

/// Outcome of checking `lhs = rhs` both ways.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdentityOutcome {
    pub label: String,
    pub elements_equal: bool,
    pub actions_equal: bool,
}

impl IdentityOutcome {
    pub fn holds(&self) -> bool {
        self.elements_equal && self.actions_equal
    }
}

pub fn compare(
    label: String,
    lhs: &OpExpr,
    rhs: &OpExpr,
    polys: &[Polynomial],
    cache: &mut ElementCache,
) -> IdentityOutcome {
    let elements_equal = lhs.to_element(cache) == rhs.to_element(cache);
    let actions_equal = polys.iter().all(|p| lhs.act(p) == rhs.act(p));
    IdentityOutcome {
        label,
        elements_equal,
        actions_equal,
    }
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut perm: Vec<usize> = (0..k).collect();
    fn heap(len: usize, perm: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if len <= 1 {
            out.push(perm.clone());
            return;
        }
        for i in 0..len {
            heap(len - 1, perm, out);
            let swap = if len.is_multiple_of(2) { i } else { 0 };
            perm.swap(swap, len - 1);
        }
    }
    heap(k, &mut perm, &mut out);
    out
}

fn check_tuple(n: usize, tuple: &[usize]) -> Result<()> {
    if let Some(&bad) = tuple.iter().find(|&&j| j >= n) {
        return Err(domain(format!("index {bad} out of range for n={n}")));
    }
    Ok(())
}

/// Left side `<xi,d_x>^l d^k/dxi^{j_1..j_k}` and the symmetrized right side
/// `sum_p (-1)^p C(k,p) l!/(l-p)! d_x^{j_1..j_p} d_xi^{j_{p+1}..j_k} <xi,d_x>^{l-p}`
/// of the transport/xi-derivative commutator formula.
pub fn commutator_identity_sides(n: usize, l: u32, tuple: &[usize]) -> Result<(OpExpr, OpExpr)> {
    check_tuple(n, tuple)?;
    let k = tuple.len();
    let mut lhs = OpExpr::new(n);
    let mut factors = vec![Factor::Transport(l)];
    factors.extend(tuple.iter().map(|&j| Factor::Dxi(j)));
    lhs.push(BigRational::one(), factors);

    let perms = permutations(k);
    let weight = BigRational::new(BigInt::one(), big_factorial(k));
    let mut rhs = OpExpr::new(n);
    for perm in &perms {
        let j: Vec<usize> = perm.iter().map(|&s| tuple[s]).collect();
        for p in 0..=k.min(l as usize) {
            let sign = if p % 2 == 0 { 1 } else { -1 };
            let c = rat(sign)
                * BigRational::from_integer(big_binomial(k, p) * falling(l, p as u32))
                * &weight;
            let mut factors: Vec<Factor> = j[..p].iter().map(|&i| Factor::Dx(i)).collect();
            factors.extend(j[p..].iter().map(|&i| Factor::Dxi(i)));
            factors.push(Factor::Transport(l - p as u32));
            rhs.push(c, factors);
        }
    }
    Ok((lhs, rhs))
}

pub fn verify_commutator_identity(
    n: usize,
    l: u32,
    tuple: &[usize],
    polys: &[Polynomial],
    cache: &mut ElementCache,
) -> Result<IdentityOutcome> {
    let (lhs, rhs) = commutator_identity_sides(n, l, tuple)?;
    let label = format!("transport/xi-derivative commutator n={n} k={} l={l} j={tuple:?}", tuple.len());
    Ok(compare(label, &lhs, &rhs, polys, cache))
}

/// Both sides of the symmetrized collapse
/// `sigma sum_k 1/(m-k)! <xi,d_x> d_x^{j_1..j_k} d_xi^{j_{k+1}..j_m} <xi,d_x>^{m-k}
///  = 1/m! d_xi^{j_1..j_m} <xi,d_x>^{m+1}`.
pub fn transport_collapse_sides(n: usize, tuple: &[usize]) -> Result<(OpExpr, OpExpr)> {
    check_tuple(n, tuple)?;
    let m = tuple.len();
    let perms = permutations(m);
    let weight = BigRational::new(BigInt::one(), big_factorial(m));
    let mut lhs = OpExpr::new(n);
    for perm in &perms {
        let j: Vec<usize> = perm.iter().map(|&s| tuple[s]).collect();
        for k in 0..=m {
            let c = BigRational::new(BigInt::one(), big_factorial(m - k)) * &weight;
            let mut factors = vec![Factor::Transport(1)];
            factors.extend(j[..k].iter().map(|&i| Factor::Dx(i)));
            factors.extend(j[k..].iter().map(|&i| Factor::Dxi(i)));
            factors.push(Factor::Transport((m - k) as u32));
            lhs.push(c, factors);
        }
    }
    let mut rhs = OpExpr::new(n);
    let mut factors: Vec<Factor> = tuple.iter().map(|&i| Factor::Dxi(i)).collect();
    factors.push(Factor::Transport(m as u32 + 1));
    rhs.push(weight, factors);
    Ok((lhs, rhs))
}

pub fn verify_transport_collapse(
    n: usize,
    tuple: &[usize],
    polys: &[Polynomial],
    cache: &mut ElementCache,
) -> Result<IdentityOutcome> {
    let (lhs, rhs) = transport_collapse_sides(n, tuple)?;
    let label = format!("symmetrized transport collapse n={n} m={} j={tuple:?}", tuple.len());
    Ok(compare(label, &lhs, &rhs, polys, cache))
}

/// Every index tuple of length `k` over `0..n`.
pub fn all_tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    let total = n.pow(k as u32);
    (0..total)
        .map(|mut code| {
            let mut t = vec![0; k];
            for slot in (0..k).rev() {
                t[slot] = code % n;
                code /= n;
            }
            t
        })
        .collect()
}

/// Runs the commutator formula over `n <= n_max`, `k <= k_max`, `l <= l_max`
/// and all index tuples.
pub fn verify_commutator_family(
    n_max: usize,
    k_max: usize,
    l_max: u32,
    oracle_count: usize,
    seed: u64,
) -> Result<Vec<IdentityOutcome>> {
    let mut out = Vec::new();
    for n in 1..=n_max {
        let polys = oracle_polynomials(n, oracle_count, seed + n as u64);
        let mut cache = ElementCache::new(n);
        for k in 0..=k_max {
            for l in 0..=l_max {
                for tuple in all_tuples(n, k) {
                    out.push(verify_commutator_identity(n, l, &tuple, &polys, &mut cache)?);
                }
            }
        }
    }
    Ok(out)
}

/// Runs the transport collapse over `n <= n_max`, `m <= m_max` and all
/// index tuples up to reordering.
pub fn verify_collapse_family(
    n_max: usize,
    m_max: usize,
    oracle_count: usize,
    seed: u64,
) -> Result<Vec<IdentityOutcome>> {
    let mut out = Vec::new();
    for n in 1..=n_max {
        let polys = oracle_polynomials(n, oracle_count, seed + n as u64);
        let mut cache = ElementCache::new(n);
        for m in 0..=m_max {
            for idx in crate::symtensor::multi_indices(m, n) {
                out.push(verify_transport_collapse(n, idx.as_slice(), &polys, &mut cache)?);
            }
        }
    }
    Ok(out)
}

/// `[J_ij, <xi, d_x>] = 0` for all pairs.
pub fn verify_john_transport_commute(n: usize) -> Vec<IdentityOutcome> {
    let t = WeylElement::transport(n);
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let c = WeylElement::john(n, i, j).commutator(&t).unwrap();
            out.push(IdentityOutcome {
                label: format!("John/transport commutator n={n} ({i},{j})"),
                elements_equal: c.is_zero(),
                actions_equal: true,
            });
        }
    }
    out
}

/// Number of tuples the commutator family visits; handy for reports.
pub fn commutator_family_size(n_max: usize, k_max: usize, l_max: u32) -> usize {
    (1..=n_max)
        .map(|n| (0..=k_max).map(|k| n.pow(k as u32)).sum::<usize>() * (l_max as usize + 1))
        .sum()
}

/// Number of sorted tuples the collapse family visits.
pub fn collapse_family_size(n_max: usize, m_max: usize) -> usize {
    (1..=n_max)
        .map(|n| (0..=m_max).map(|m| binomial(n + m - 1, m) as usize).sum::<usize>())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn canonical_commutators() {
        let n = 2;
        let lhs = WeylElement::dx(n, 0).mul(&WeylElement::x(n, 0)).unwrap();
        let rhs = WeylElement::x(n, 0)
            .mul(&WeylElement::dx(n, 0))
            .unwrap()
            .add(&WeylElement::one(n))
            .unwrap();
        assert_eq!(lhs, rhs);

        let lhs = WeylElement::dx(n, 0).mul(&WeylElement::xi(n, 0)).unwrap();
        assert_eq!(lhs, WeylElement::xi(n, 0).mul(&WeylElement::dx(n, 0)).unwrap());
        assert_eq!(lhs.len(), 1);
    }

    /// `<xi,d_xi> <xi,d_x> - <xi,d_x> <xi,d_xi> = <xi,d_x>`: the transport
    /// operator has degree one in `xi`.
    #[test]
    fn euler_transport_bracket() {
        for n in 1..=3 {
            let t = WeylElement::transport(n);
            let e = WeylElement::euler_xi(n);
            assert_eq!(e.commutator(&t).unwrap(), t);
            assert_eq!(t.commutator(&e).unwrap(), t.scaled(&rat(-1)));
        }
    }

    #[test]
    fn first_order_commutator_instance() {
        let n = 3;
        let t = WeylElement::transport(n);
        for j in 0..n {
            let d = WeylElement::dxi(n, j);
            let lhs = t.mul(&d).unwrap();
            let rhs = d.mul(&t).unwrap().sub(&WeylElement::dx(n, j)).unwrap();
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn commutator_identity_examples() {
        let polys = oracle_polynomials(2, 10, 5);
        let mut cache = ElementCache::new(2);
        for l in 0..=3 {
            let r = verify_commutator_identity(2, l, &[], &polys, &mut cache).unwrap();
            assert!(r.holds());
        }
        let r = verify_commutator_identity(2, 2, &[0, 1], &polys, &mut cache).unwrap();
        assert!(r.holds(), "{r:?}");
        let r = verify_commutator_identity(2, 1, &[1], &polys, &mut cache).unwrap();
        assert!(r.holds());
    }

    #[test]
    fn wrong_sign_is_detected() {
        let n = 2;
        let polys = oracle_polynomials(n, 10, 6);
        let mut cache = ElementCache::new(n);
        let (lhs, rhs) = commutator_identity_sides(n, 2, &[0, 1]).unwrap();
        let mut broken = OpExpr::new(n);
        for (i, (c, f)) in rhs.terms.iter().enumerate() {
            let c = if i == 1 { -c.clone() } else { c.clone() };
            broken.push(c, f.clone());
        }
        let r = compare("broken".into(), &lhs, &broken, &polys, &mut cache);
        assert!(!r.elements_equal);
        assert!(!r.actions_equal);
    }

    #[test]
    fn collapse_examples() {
        let polys = oracle_polynomials(2, 10, 7);
        let mut cache = ElementCache::new(2);
        let r = verify_transport_collapse(2, &[], &polys, &mut cache).unwrap();
        assert!(r.holds());
        let (lhs, _) = transport_collapse_sides(2, &[]).unwrap();
        assert_eq!(lhs.to_element(&mut cache), WeylElement::transport(2));
        for j in 0..2 {
            assert!(verify_transport_collapse(2, &[j], &polys, &mut cache).unwrap().holds());
        }
    }

    #[test]
    fn john_commutes_with_transport() {
        for n in 2..=3 {
            assert!(verify_john_transport_commute(n).iter().all(IdentityOutcome::holds));
        }
    }

    #[test]
    fn tangent_operators_preserve_constraints() {
        let n = 3;
        let s = Polynomial::sphere_constraint(n);
        let c = Polynomial::tangency_constraint(n);
        for i in 0..n {
            // X_i(|xi|^2 - 1) vanishes identically
            assert!(WeylElement::tangent_x(n, i).act(&s).unwrap().is_zero());
            // X_i(<x,xi>) = xi_i (1 - |xi|^2)
            let expected = s.mul_xi(i).scaled(&rat(-1));
            assert_eq!(WeylElement::tangent_x(n, i).act(&c).unwrap(), expected);
            // Xi_i(|xi|^2 - 1) = 2 xi_i (1 - |xi|^2)
            let expected = s.mul_xi(i).scaled(&rat(-2));
            assert_eq!(WeylElement::tangent_xi(n, i).act(&s).unwrap(), expected);
        }
    }

    #[test]
    fn tuple_enumeration() {
        assert_eq!(all_tuples(3, 2).len(), 9);
        assert_eq!(all_tuples(2, 0), vec![Vec::<usize>::new()]);
        assert_eq!(permutations(3).len(), 6);
        assert_eq!(commutator_family_size(1, 1, 0), 2);
        assert_eq!(collapse_family_size(2, 1), 2 + 3);
    }

    fn element_strategy(n: usize) -> impl Strategy<Value = WeylElement> {
        prop::collection::vec((prop::collection::vec(0u32..3, 4 * n), -5i64..=5), 1..4).prop_map(
            move |terms| {
                let mut e = WeylElement::zero(n);
                for (k, c) in terms {
                    e.add_term(k, rat(c));
                }
                e
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn multiplication_is_associative(
            a in element_strategy(2),
            b in element_strategy(2),
            c in element_strategy(2),
        ) {
            let left = a.mul(&b).unwrap().mul(&c).unwrap();
            let right = a.mul(&b.mul(&c).unwrap()).unwrap();
            prop_assert_eq!(left, right);
        }

        #[test]
        fn product_acts_as_composition(
            a in element_strategy(1),
            b in element_strategy(1),
            seed in 0u64..1000,
        ) {
            let p = &oracle_polynomials(1, 1, seed)[0];
            let composed = a.act(&b.act(p).unwrap()).unwrap();
            let product = a.mul(&b).unwrap().act(p).unwrap();
            prop_assert_eq!(composed, product);
        }
    }
}
