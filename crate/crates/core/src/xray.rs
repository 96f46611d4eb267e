//! Momentum ray transforms `J^{p,q} f(x, xi) = int t^p <f(x + t xi), xi^q> dt`
//! and their exact mixed derivatives.
//!
//! For the Gaussian family the integrand along any line is a polynomial
//! times a Gaussian in `t`, so an appropriately sized Gauss-Hermite rule is
//! exact. Derivatives in `x` and `xi` are pushed onto the field symbolically
//! ([`TransformRep`]); no finite differences are involved.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, domain, Result};
use crate::gaussfield::GaussField;
use crate::quadrature::{hermite_rule, nodes_for_degree};
use crate::symtensor::multi_indices;

/// Accepted deviation from `|xi| = 1`, `<x, xi> = 0`.
pub const TS_TOLERANCE: f64 = 1e-12;
/// Deviation up to which inputs are silently re-projected.
pub const TS_REPROJECT: f64 = 1e-9;

/// A point `(x, xi)` of the tangent bundle of the unit sphere.
#[derive(Clone, Debug, PartialEq)]
pub struct TSPoint {
    x: Vec<f64>,
    xi: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl TSPoint {
    /// Validates `(x, xi)`; inputs off the manifold by at most
    /// [`TS_REPROJECT`] are projected back, larger deviations are rejected.
    pub fn new(x: Vec<f64>, xi: Vec<f64>) -> Result<Self> {
        check_dim(x.len(), xi.len())?;
        let len = norm(&xi);
        let along = dot(&x, &xi);
        let dev = (len - 1.0).abs().max(along.abs());
        if dev <= TS_TOLERANCE {
            return Ok(TSPoint { x, xi });
        }
        if dev > TS_REPROJECT {
            return Err(domain(format!(
                "point is not on TS^(n-1): |xi| - 1 = {:.3e}, <x,xi> = {:.3e}",
                len - 1.0,
                along
            )));
        }
        let xi: Vec<f64> = xi.iter().map(|v| v / len).collect();
        let along = dot(&x, &xi);
        let x = x.iter().zip(&xi).map(|(a, b)| a - along * b).collect();
        Ok(TSPoint { x, xi })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// Uniform direction, `x` drawn from `[-r, r]^n` and projected onto `xi^perp`.
    pub fn random<R: Rng + ?Sized>(n: usize, radius: f64, rng: &mut R) -> TSPoint {
        let xi = random_unit(n, rng);
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(-radius..=radius)).collect();
        let along = dot(&raw, &xi);
        let x = raw.iter().zip(&xi).map(|(a, b)| a - along * b).collect();
        TSPoint { x, xi }
    }
}

pub fn random_unit<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let len = norm(&v);
        if len > 1e-3 {
            return v.iter().map(|c| c / len).collect();
        }
    }
}

/// `count` seeded points of `T S^{n-1}` with `|x| <= radius * sqrt(n)`.
pub fn sample_ts_points(n: usize, count: usize, radius: f64, seed: u64) -> Vec<TSPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| TSPoint::random(n, radius, &mut rng)).collect()
}

/// Generic `(x, xi)` with `x` in `[-r, r]^n` and `|xi|` in `[0.5, 2]`.
pub fn random_line_point<R: Rng + ?Sized>(n: usize, radius: f64, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let x = (0..n).map(|_| rng.random_range(-radius..=radius)).collect();
    let len = rng.random_range(0.5..=2.0);
    let xi = random_unit(n, rng).iter().map(|c| c * len).collect();
    (x, xi)
}

/// Key of one summand `xi^beta * J^{p,q}(g)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct RepKey {
    p: usize,
    q: usize,
    beta: Vec<u32>,
}

/// Finite sum `sum xi^beta J^{p,q}(g)` over derived fields `g`.
///
/// The monomial multipliers `xi^beta` appear once `<xi, d_x>` is applied;
/// they are differentiated by the product rule like everything else.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformRep {
    n: usize,
    summands: BTreeMap<RepKey, GaussField>,
}

impl TransformRep {
    pub fn zero(n: usize) -> Self {
        TransformRep {
            n,
            summands: BTreeMap::new(),
        }
    }

    /// `J^{p,q} f` with `q` the rank of `f`.
    pub fn transform(p: usize, f: &GaussField) -> Self {
        let mut rep = TransformRep::zero(f.dim());
        rep.insert(
            RepKey {
                p,
                q: f.rank(),
                beta: vec![0; f.dim()],
            },
            f.clone(),
        );
        rep
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn summand_count(&self) -> usize {
        self.summands.len()
    }

    pub fn term_count(&self) -> usize {
        self.summands.values().map(GaussField::term_count).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.summands.is_empty()
    }

    fn insert(&mut self, key: RepKey, field: GaussField) {
        if field.is_zero() {
            return;
        }
        match self.summands.remove(&key) {
            Some(existing) => {
                let sum = existing
                    .add_scaled(&field, Complex64::new(1.0, 0.0))
                    .expect("summands under one key share rank and dimension");
                if !sum.is_zero() {
                    self.summands.insert(key, sum);
                }
            }
            None => {
                self.summands.insert(key, field);
            }
        }
    }

    pub fn add(&self, other: &TransformRep) -> Result<TransformRep> {
        check_dim(self.n, other.n)?;
        let mut out = self.clone();
        for (k, f) in &other.summands {
            out.insert(k.clone(), f.clone());
        }
        Ok(out)
    }

    pub fn scaled(&self, s: Complex64) -> TransformRep {
        let mut out = TransformRep::zero(self.n);
        for (k, f) in &self.summands {
            out.insert(k.clone(), f.scaled(s));
        }
        out
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &TransformRep, s: Complex64) -> Result<TransformRep> {
        self.add(&other.scaled(s))
    }

    fn check_direction(&self, i: usize) -> Result<()> {
        if i >= self.n {
            return Err(domain(format!("direction {i} out of range for n={}", self.n)));
        }
        Ok(())
    }

    /// `d/dx^i`: differentiates every field.
    pub fn derive_x(&self, i: usize) -> Result<TransformRep> {
        self.check_direction(i)?;
        let mut out = TransformRep::zero(self.n);
        for (k, f) in &self.summands {
            out.insert(k.clone(), f.partial_derivative(i)?);
        }
        Ok(out)
    }

    /// `d/dxi^j` under the integral:
    /// `d_j J^{p,q} g = J^{p+1,q}(d_j g) + q J^{p,q-1}(g with one index fixed to j)`,
    /// plus the product rule on `xi^beta`.
    pub fn derive_xi(&self, j: usize) -> Result<TransformRep> {
        self.check_direction(j)?;
        let mut out = TransformRep::zero(self.n);
        for (k, f) in &self.summands {
            out.insert(
                RepKey {
                    p: k.p + 1,
                    q: k.q,
                    beta: k.beta.clone(),
                },
                f.partial_derivative(j)?,
            );
            if k.q > 0 {
                out.insert(
                    RepKey {
                        p: k.p,
                        q: k.q - 1,
                        beta: k.beta.clone(),
                    },
                    f.partial_contract(j)?.scaled(Complex64::new(k.q as f64, 0.0)),
                );
            }
            if k.beta[j] > 0 {
                let mut beta = k.beta.clone();
                beta[j] -= 1;
                out.insert(
                    RepKey { p: k.p, q: k.q, beta },
                    f.scaled(Complex64::new(k.beta[j] as f64, 0.0)),
                );
            }
        }
        Ok(out)
    }

    /// Multiplication by the coordinate function `xi^j`.
    pub fn mul_xi(&self, j: usize) -> Result<TransformRep> {
        self.check_direction(j)?;
        let mut out = TransformRep::zero(self.n);
        for (k, f) in &self.summands {
            let mut beta = k.beta.clone();
            beta[j] += 1;
            out.insert(RepKey { p: k.p, q: k.q, beta }, f.clone());
        }
        Ok(out)
    }

    /// `<xi, d_x> = sum_j xi^j d/dx^j`.
    pub fn transport(&self) -> Result<TransformRep> {
        let mut out = TransformRep::zero(self.n);
        for j in 0..self.n {
            out = out.add(&self.derive_x(j)?.mul_xi(j)?)?;
        }
        Ok(out)
    }

    /// Applies the listed `x`-derivatives, then the listed `xi`-derivatives.
    pub fn derive(&self, x_dirs: &[usize], xi_dirs: &[usize]) -> Result<TransformRep> {
        let mut out = self.clone();
        for &i in x_dirs {
            out = out.derive_x(i)?;
        }
        for &j in xi_dirs {
            out = out.derive_xi(j)?;
        }
        Ok(out)
    }

    pub fn compile(&self) -> CompiledRep {
        CompiledRep::new(self)
    }

    /// Convenience one-shot evaluation; compile once for repeated use.
    pub fn evaluate(&self, x: &[f64], xi: &[f64]) -> Result<Complex64> {
        self.compile().evaluate(x, xi)
    }
}

impl fmt::Display for TransformRep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "TransformRep(n={}, {} summands, {} terms)",
            self.n,
            self.summand_count(),
            self.term_count()
        )
    }
}

/// One `coeff * t^p * xi^xi_pow * (y - c)^power` contribution within a group.
#[derive(Clone, Debug)]
struct Item {
    coeff: Complex64,
    p: u32,
    xi_pow: Vec<u32>,
    power: Vec<u32>,
}

#[derive(Clone, Debug)]
struct Group {
    width: f64,
    center: Vec<f64>,
    max_degree: usize,
    items: Vec<Item>,
}

/// Value of a transform together with the sum of absolute contributions,
/// a natural scale for judging cancellation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub value: Complex64,
    pub magnitude: f64,
}

/// Evaluation-ready form of a [`TransformRep`]: terms sharing a Gaussian
/// (center and width) are integrated together with one set of nodes.
#[derive(Clone, Debug)]
pub struct CompiledRep {
    n: usize,
    groups: Vec<Group>,
    node_factor: usize,
    max_xi_pow: u32,
    max_power: u32,
    max_p: u32,
}

type ItemKey = (u32, Vec<u32>, Vec<u32>);
type GroupKey = (u64, Vec<u64>);

impl CompiledRep {
    fn new(rep: &TransformRep) -> Self {
        let n = rep.n;
        let mut grouped: BTreeMap<GroupKey, (Group, HashMap<ItemKey, usize>)> = BTreeMap::new();
        for (key, field) in &rep.summands {
            for (idx, terms) in multi_indices(key.q, n).iter().zip(field.components()) {
                let mult = idx.multiplicity() as f64;
                let mut xi_pow = key.beta.clone();
                for &i in idx.as_slice() {
                    xi_pow[i] += 1;
                }
                for t in terms {
                    let gkey = (
                        t.width.to_bits(),
                        t.center.iter().map(|c| (c + 0.0).to_bits()).collect(),
                    );
                    let (group, index) = grouped.entry(gkey).or_insert_with(|| {
                        (
                            Group {
                                width: t.width,
                                center: t.center.clone(),
                                max_degree: 0,
                                items: Vec::new(),
                            },
                            HashMap::new(),
                        )
                    });
                    group.max_degree = group.max_degree.max(key.p + t.degree());
                    let ikey = (key.p as u32, xi_pow.clone(), t.power.clone());
                    match index.get(&ikey) {
                        Some(&pos) => group.items[pos].coeff += t.coeff * mult,
                        None => {
                            index.insert(ikey, group.items.len());
                            group.items.push(Item {
                                coeff: t.coeff * mult,
                                p: key.p as u32,
                                xi_pow: xi_pow.clone(),
                                power: t.power.clone(),
                            });
                        }
                    }
                }
            }
        }
        let groups: Vec<Group> = grouped.into_values().map(|(g, _)| g).collect();
        let items = || groups.iter().flat_map(|g| g.items.iter());
        CompiledRep {
            n,
            max_xi_pow: items().flat_map(|it| it.xi_pow.iter().copied()).max().unwrap_or(0),
            max_power: items().flat_map(|it| it.power.iter().copied()).max().unwrap_or(0),
            max_p: items().map(|it| it.p).max().unwrap_or(0),
            groups,
            node_factor: 1,
        }
    }

    /// Multiplies every node count by `factor`; only useful for checking
    /// that the default rule is already exact.
    pub fn with_node_factor(mut self, factor: usize) -> Self {
        self.node_factor = factor.max(1);
        self
    }

    pub fn evaluate(&self, x: &[f64], xi: &[f64]) -> Result<Complex64> {
        Ok(self.evaluate_detailed(x, xi)?.value)
    }

    pub fn evaluate_detailed(&self, x: &[f64], xi: &[f64]) -> Result<Evaluation> {
        check_dim(self.n, x.len())?;
        check_dim(self.n, xi.len())?;
        let xi2 = dot(xi, xi);
        if xi2 == 0.0 {
            return Err(domain("transform evaluated at xi = 0"));
        }
        let xi_len = xi2.sqrt();
        let xi_table = power_table(xi, self.max_xi_pow);
        let mut value = Complex64::new(0.0, 0.0);
        let mut magnitude = 0.0;
        let mut w = vec![0.0; self.n];
        let mut y = vec![0.0; self.n];
        for g in &self.groups {
            for i in 0..self.n {
                w[i] = x[i] - g.center[i];
            }
            let wxi = dot(&w, xi);
            let t_star = -wxi / xi2;
            let d2 = (dot(&w, &w) - wxi * wxi / xi2).max(0.0);
            let sa = g.width.sqrt() * xi_len;
            let pref = (-g.width * d2).exp() / sa;
            if pref == 0.0 {
                continue;
            }
            let nodes = nodes_for_degree(g.max_degree) * self.node_factor;
            let rule = hermite_rule(nodes)?;
            let item_pref: Vec<Complex64> = g
                .items
                .iter()
                .map(|it| {
                    let mono: f64 = it
                        .xi_pow
                        .iter()
                        .enumerate()
                        .map(|(i, &e)| xi_table[i][e as usize])
                        .product();
                    it.coeff * mono
                })
                .collect();
            let mut group_value = Complex64::new(0.0, 0.0);
            let mut group_mag = 0.0;
            for (&u, &wt) in rule.nodes.iter().zip(&rule.weights) {
                let t = t_star + u / sa;
                for i in 0..self.n {
                    y[i] = w[i] + t * xi[i];
                }
                let y_table = power_table(&y, self.max_power);
                let t_table = power_table(&[t], self.max_p);
                for (it, c) in g.items.iter().zip(&item_pref) {
                    let mono: f64 = it
                        .power
                        .iter()
                        .enumerate()
                        .map(|(i, &e)| y_table[i][e as usize])
                        .product::<f64>()
                        * t_table[0][it.p as usize];
                    let contrib = c * (wt * mono);
                    group_value += contrib;
                    group_mag += contrib.norm();
                }
            }
            value += group_value * pref;
            magnitude += group_mag * pref;
        }
        Ok(Evaluation { value, magnitude })
    }
}

fn power_table(v: &[f64], max: u32) -> Vec<Vec<f64>> {
    v.iter()
        .map(|&b| {
            let mut row = Vec::with_capacity(max as usize + 1);
            let mut acc = 1.0;
            row.push(acc);
            for _ in 0..max {
                acc *= b;
                row.push(acc);
            }
            row
        })
        .collect()
}

/// `J^{p,q} f (x, xi)` for a field of rank `q`.
pub fn momentum_transform(p: usize, f: &GaussField, x: &[f64], xi: &[f64]) -> Result<Complex64> {
    check_dim(f.dim(), x.len())?;
    TransformRep::transform(p, f).evaluate(x, xi)
}

/// `I^k f` at a point of `TS^(n-1)`.
pub fn ray_transform_i(k: usize, f: &GaussField, point: &TSPoint) -> Result<Complex64> {
    momentum_transform(k, f, point.x(), point.xi())
}
