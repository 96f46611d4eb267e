//! Symmetric tensor fields whose components are finite sums of
//! `coeff * (x - c)^alpha * exp(-a |x - c|^2)`.
//!
//! The family is closed under differentiation, so every derivative the rest
//! of the crate needs can be formed exactly.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, domain, Error, Result};
use crate::symtensor::{dimension, multi_indices, rank_of, MultiIndex, SymTensor};

/// One `coeff * prod_i (x_i - c_i)^{alpha_i} * exp(-a |x - c|^2)` summand.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussTerm {
    pub coeff: Complex64,
    pub power: Vec<u32>,
    pub width: f64,
    pub center: Vec<f64>,
}

impl GaussTerm {
    pub fn new(coeff: Complex64, power: Vec<u32>, width: f64, center: Vec<f64>) -> Result<Self> {
        check_dim(center.len(), power.len())?;
        if !(width > 0.0 && width.is_finite()) {
            return Err(domain(format!("Gaussian width must be positive, got {width}")));
        }
        Ok(GaussTerm {
            coeff,
            power,
            width,
            center,
        })
    }

    pub fn degree(&self) -> usize {
        self.power.iter().map(|&p| p as usize).sum()
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        let mut poly = 1.0;
        let mut r2 = 0.0;
        for ((&xi, &ci), &p) in x.iter().zip(&self.center).zip(&self.power) {
            let d = xi - ci;
            r2 += d * d;
            if p > 0 {
                poly *= d.powi(p as i32);
            }
        }
        self.coeff * (poly * (-self.width * r2).exp())
    }

    fn key(&self) -> TermKey {
        TermKey {
            width: self.width.to_bits(),
            // adding 0.0 folds -0.0 onto 0.0 so equal centers share a key
            center: self.center.iter().map(|c| (c + 0.0).to_bits()).collect(),
            power: self.power.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct TermKey {
    width: u64,
    center: Vec<u64>,
    power: Vec<u32>,
}

/// Merges terms sharing `(width, center, power)` and drops exact zeros.
pub fn normalize_terms(terms: Vec<GaussTerm>) -> Vec<GaussTerm> {
    let mut merged: BTreeMap<TermKey, GaussTerm> = BTreeMap::new();
    for t in terms {
        merged
            .entry(t.key())
            .and_modify(|e| e.coeff += t.coeff)
            .or_insert(t);
    }
    merged
        .into_values()
        .filter(|t| t.coeff.re != 0.0 || t.coeff.im != 0.0)
        .collect()
}

fn derive_terms(terms: &[GaussTerm], i: usize) -> Vec<GaussTerm> {
    let mut out = Vec::with_capacity(2 * terms.len());
    for t in terms {
        let a_i = t.power[i];
        if a_i > 0 {
            let mut power = t.power.clone();
            power[i] -= 1;
            out.push(GaussTerm {
                coeff: t.coeff * a_i as f64,
                power,
                width: t.width,
                center: t.center.clone(),
            });
        }
        let mut power = t.power.clone();
        power[i] += 1;
        out.push(GaussTerm {
            coeff: t.coeff * (-2.0 * t.width),
            power,
            width: t.width,
            center: t.center.clone(),
        });
    }
    normalize_terms(out)
}

/// Rank-`m` symmetric tensor field on `R^n`; one term list per sorted
/// multi-index, in [`multi_indices`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussField {
    m: usize,
    n: usize,
    components: Vec<Vec<GaussTerm>>,
}

impl GaussField {
    pub fn zero(m: usize, n: usize) -> Result<Self> {
        Ok(GaussField {
            m,
            n,
            components: vec![Vec::new(); dimension(m, n)?],
        })
    }

    /// Scalar field `coeff * exp(-width |x - center|^2)`.
    pub fn gaussian(coeff: Complex64, width: f64, center: Vec<f64>) -> Result<Self> {
        let n = center.len();
        let term = GaussTerm::new(coeff, vec![0; n], width, center)?;
        let mut f = GaussField::zero(0, n)?;
        f.components[0].push(term);
        Ok(f)
    }

    pub fn rank(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn components(&self) -> &[Vec<GaussTerm>] {
        &self.components
    }

    pub fn component(&self, idx: &MultiIndex) -> &[GaussTerm] {
        &self.components[rank_of(idx, self.n)]
    }

    fn check_term(&self, term: &GaussTerm) -> Result<()> {
        check_dim(self.n, term.power.len())?;
        check_dim(self.n, term.center.len())
    }

    /// Appends a term to the component at `indices` (any order).
    pub fn push_term(&mut self, indices: &[usize], term: GaussTerm) -> Result<()> {
        check_dim(self.m, indices.len())?;
        if indices.iter().any(|&i| i >= self.n) {
            return Err(domain(format!("component index {indices:?} out of range for n={}", self.n)));
        }
        self.check_term(&term)?;
        let pos = rank_of(&MultiIndex::new(indices.to_vec()), self.n);
        self.components[pos].push(term);
        Ok(())
    }

    /// Rank-0 field holding a single component.
    pub fn component_field(&self, idx: &MultiIndex) -> GaussField {
        GaussField {
            m: 0,
            n: self.n,
            components: vec![self.component(idx).to_vec()],
        }
    }

    pub fn term_count(&self) -> usize {
        self.components.iter().map(Vec::len).sum()
    }

    pub fn max_degree(&self) -> usize {
        self.components
            .iter()
            .flatten()
            .map(GaussTerm::degree)
            .max()
            .unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Vec::is_empty)
    }

    pub fn normalized(mut self) -> Self {
        for c in &mut self.components {
            *c = normalize_terms(std::mem::take(c));
        }
        self
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<SymTensor> {
        check_dim(self.n, x.len())?;
        let values = self
            .components
            .iter()
            .map(|terms| terms.iter().map(|t| t.eval(x)).sum())
            .collect();
        SymTensor::from_components(self.m, self.n, values)
    }

    pub fn scaled(&self, s: Complex64) -> GaussField {
        let mut out = self.clone();
        for t in out.components.iter_mut().flatten() {
            t.coeff *= s;
        }
        out.normalized()
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &GaussField, s: Complex64) -> Result<GaussField> {
        check_dim(self.m, other.m)?;
        check_dim(self.n, other.n)?;
        let mut out = self.clone();
        for (dst, src) in out.components.iter_mut().zip(&other.components) {
            dst.extend(src.iter().map(|t| GaussTerm {
                coeff: t.coeff * s,
                ..t.clone()
            }));
        }
        Ok(out.normalized())
    }

    /// Exact `d/dx^i` of every component.
    pub fn partial_derivative(&self, i: usize) -> Result<GaussField> {
        if i >= self.n {
            return Err(domain(format!("derivative direction {i} out of range for n={}", self.n)));
        }
        Ok(GaussField {
            m: self.m,
            n: self.n,
            components: self.components.iter().map(|c| derive_terms(c, i)).collect(),
        })
    }

    /// Symmetrized gradient: `(dv)_{i_1..i_m} = (1/m) sum_s d_{i_s} v_{I without i_s}`.
    pub fn inner_derivative(&self) -> Result<GaussField> {
        let m = self.m + 1;
        let grads: Vec<GaussField> = (0..self.n)
            .map(|i| self.partial_derivative(i))
            .collect::<Result<_>>()?;
        let mut out = GaussField::zero(m, self.n)?;
        for (pos, idx) in multi_indices(m, self.n).iter().enumerate() {
            let mut terms = Vec::new();
            for s in 0..m {
                let rest = idx.without_position(s);
                let g = &grads[idx.as_slice()[s]];
                terms.extend(g.component(&rest).iter().map(|t| GaussTerm {
                    coeff: t.coeff / m as f64,
                    ..t.clone()
                }));
            }
            out.components[pos] = normalize_terms(terms);
        }
        Ok(out)
    }

    /// Rank-`(q-1)` field with components `f_{j i_2 .. i_q}`.
    pub fn partial_contract(&self, j: usize) -> Result<GaussField> {
        if self.m == 0 {
            return Err(domain("cannot fix an index of a rank-0 field"));
        }
        if j >= self.n {
            return Err(domain(format!("index {j} out of range for n={}", self.n)));
        }
        let components = multi_indices(self.m - 1, self.n)
            .iter()
            .map(|rest| self.component(&rest.with(j)).to_vec())
            .collect();
        Ok(GaussField {
            m: self.m - 1,
            n: self.n,
            components,
        })
    }

    /// Deterministic pseudo-random field: `terms` summands per component with
    /// total degree at most 3, width in `[0.5, 2]`, `|center| <= 1` and
    /// coefficients in the closed unit disc.
    pub fn random(m: usize, n: usize, seed: u64, terms: usize) -> Result<GaussField> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = GaussField::zero(m, n)?;
        for comp in &mut out.components {
            for _ in 0..terms {
                let coeff = loop {
                    let c = Complex64::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
                    if c.norm_sqr() <= 1.0 {
                        break c;
                    }
                };
                let mut power = vec![0u32; n];
                for _ in 0..rng.random_range(0..=3usize) {
                    power[rng.random_range(0..n)] += 1;
                }
                let width = rng.random_range(0.5..=2.0);
                let center = loop {
                    let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
                    if c.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
                        break c;
                    }
                };
                comp.push(GaussTerm {
                    coeff,
                    power,
                    width,
                    center,
                });
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        let spec = FieldSpec {
            m: self.m,
            n: self.n,
            components: multi_indices(self.m, self.n)
                .into_iter()
                .zip(&self.components)
                .filter(|(_, terms)| !terms.is_empty())
                .map(|(idx, terms)| ComponentSpec {
                    index: idx.as_slice().to_vec(),
                    terms: terms
                        .iter()
                        .map(|t| TermSpec {
                            coeff: [t.coeff.re, t.coeff.im],
                            power: t.power.clone(),
                            width: t.width,
                            center: t.center.clone(),
                        })
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&spec).expect("field spec serialization is infallible")
    }

    /// Parses the JSON field-spec format. Syntax and validation failures are
    /// reported with the line and column where parsing stopped.
    pub fn from_json(text: &str) -> Result<GaussField> {
        let spec: FieldSpec = serde_json::from_str(text).map_err(|e| {
            // serde_json appends the location to its message; it is kept separately
            let full = e.to_string();
            let suffix = format!(" at line {} column {}", e.line(), e.column());
            Error::FieldSpec {
                message: full.strip_suffix(&suffix).unwrap_or(&full).to_string(),
                line: e.line(),
                column: e.column(),
            }
        })?;
        let mut out = GaussField::zero(spec.m, spec.n)?;
        for comp in spec.components {
            for t in comp.terms {
                let term = GaussTerm {
                    coeff: Complex64::new(t.coeff[0], t.coeff[1]),
                    power: t.power,
                    width: t.width,
                    center: t.center,
                };
                out.push_term(&comp.index, term)?;
            }
        }
        Ok(out)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(try_from = "RawFieldSpec")]
struct FieldSpec {
    m: usize,
    n: usize,
    components: Vec<ComponentSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFieldSpec {
    m: usize,
    n: usize,
    components: Vec<ComponentSpec>,
}

impl TryFrom<RawFieldSpec> for FieldSpec {
    type Error = String;

    fn try_from(raw: RawFieldSpec) -> std::result::Result<Self, String> {
        if raw.n == 0 {
            return Err("n must be at least 1".into());
        }
        for comp in &raw.components {
            if comp.index.len() != raw.m {
                return Err(format!("component index {:?} does not have rank {}", comp.index, raw.m));
            }
            if comp.index.iter().any(|&i| i >= raw.n) {
                return Err(format!("component index {:?} out of range 0..{}", comp.index, raw.n));
            }
            for t in &comp.terms {
                if t.power.len() != raw.n || t.center.len() != raw.n {
                    return Err(format!("term power/center must have length {}", raw.n));
                }
            }
        }
        Ok(FieldSpec {
            m: raw.m,
            n: raw.n,
            components: raw.components,
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentSpec {
    index: Vec<usize>,
    terms: Vec<TermSpec>,
}

#[derive(Serialize, Deserialize)]
#[serde(try_from = "RawTermSpec")]
struct TermSpec {
    coeff: [f64; 2],
    power: Vec<u32>,
    width: f64,
    center: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTermSpec {
    coeff: [f64; 2],
    power: Vec<u32>,
    width: f64,
    center: Vec<f64>,
}

impl TryFrom<RawTermSpec> for TermSpec {
    type Error = String;

    fn try_from(raw: RawTermSpec) -> std::result::Result<Self, String> {
        if !(raw.width > 0.0 && raw.width.is_finite()) {
            return Err(format!("width must be positive, got {}", raw.width));
        }
        if raw.power.len() != raw.center.len() {
            return Err("power and center lengths differ".into());
        }
        Ok(TermSpec {
            coeff: raw.coeff,
            power: raw.power,
            width: raw.width,
            center: raw.center,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn re(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    fn x1_gauss() -> GaussField {
        let mut f = GaussField::zero(0, 2).unwrap();
        f.push_term(&[], GaussTerm::new(re(1.0), vec![1, 0], 1.0, vec![0.0, 0.0]).unwrap())
            .unwrap();
        f
    }

    fn scalar_at(f: &GaussField, x: &[f64]) -> Complex64 {
        f.evaluate(x).unwrap().components()[0]
    }

    #[test]
    fn evaluate_examples() {
        let g = GaussField::gaussian(re(1.0), 1.0, vec![0.0, 0.0]).unwrap();
        assert_eq!(scalar_at(&g, &[0.0, 0.0]), re(1.0));
        let v = scalar_at(&x1_gauss(), &[1.0, 0.0]);
        assert!((v - re((-1.0f64).exp())).norm() < 1e-16);
        let z = GaussField::zero(2, 3).unwrap();
        assert!(z.evaluate(&[0.3, 0.1, 0.2]).unwrap().components().iter().all(|c| c.norm() == 0.0));
        assert!(g.evaluate(&[0.0]).is_err());
    }

    #[test]
    fn derivative_examples() {
        let g = GaussField::gaussian(re(1.0), 1.0, vec![0.0, 0.0]).unwrap();
        let x = [0.4, -0.7];
        let e = (-(0.16f64 + 0.49)).exp();
        let d = g.partial_derivative(0).unwrap();
        assert!((scalar_at(&d, &x) - re(-2.0 * 0.4 * e)).norm() < 1e-15);
        let d = x1_gauss().partial_derivative(0).unwrap();
        assert!((scalar_at(&d, &x) - re((1.0 - 2.0 * 0.16) * e)).norm() < 1e-15);
    }

    #[test]
    fn mixed_partials_commute_termwise() {
        let f = GaussField::random(2, 3, 11, 3).unwrap();
        let a = f.partial_derivative(0).unwrap().partial_derivative(1).unwrap();
        let b = f.partial_derivative(1).unwrap().partial_derivative(0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn derivative_term_growth_is_bounded() {
        let f = GaussField::random(1, 3, 5, 4).unwrap();
        for i in 0..3 {
            let d = f.partial_derivative(i).unwrap();
            for (src, dst) in f.components().iter().zip(d.components()) {
                let bound: usize = src.iter().map(|t| t.degree() + 1).sum();
                assert!(dst.len() <= bound);
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let f = GaussField::random(1, 3, 2, 3).unwrap();
        let x = [0.3, -0.2, 0.5];
        let h = 1e-5;
        for i in 0..3 {
            let d = f.partial_derivative(i).unwrap().evaluate(&x).unwrap();
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fp = f.evaluate(&xp).unwrap();
            let fm = f.evaluate(&xm).unwrap();
            for c in 0..d.components().len() {
                let fd = (fp.components()[c] - fm.components()[c]) / (2.0 * h);
                assert!((fd - d.components()[c]).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn inner_derivative_examples() {
        let v = GaussField::random(0, 3, 9, 3).unwrap();
        let dv = v.inner_derivative().unwrap();
        for i in 0..3 {
            let gi = v.partial_derivative(i).unwrap();
            assert_eq!(dv.component(&MultiIndex::new(vec![i])), gi.components()[0].as_slice());
        }

        let v = GaussField::random(1, 3, 10, 2).unwrap();
        let dv = v.inner_derivative().unwrap();
        let x = [0.1, 0.2, -0.3];
        for i in 0..3 {
            for j in 0..3 {
                let dij = dv.evaluate(&x).unwrap().get(&[i, j]).unwrap();
                let a = v.partial_derivative(i).unwrap().evaluate(&x).unwrap().get(&[j]).unwrap();
                let b = v.partial_derivative(j).unwrap().evaluate(&x).unwrap().get(&[i]).unwrap();
                assert!((dij - 0.5 * (a + b)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn partial_contract_examples() {
        let f = GaussField::random(1, 3, 3, 2).unwrap();
        let c = f.partial_contract(2).unwrap();
        assert_eq!(c.rank(), 0);
        assert_eq!(c.components()[0], f.component(&MultiIndex::new(vec![2])));

        let mut diag = GaussField::zero(2, 2).unwrap();
        diag.push_term(&[1, 1], GaussTerm::new(re(3.0), vec![0, 0], 1.0, vec![0.0, 0.0]).unwrap())
            .unwrap();
        let s = diag.partial_contract(1).unwrap().partial_contract(1).unwrap();
        assert_eq!(scalar_at(&s, &[0.0, 0.0]), re(3.0));
        assert!(GaussField::zero(0, 2).unwrap().partial_contract(0).is_err());
    }

    #[test]
    fn random_field_is_deterministic() {
        let a = GaussField::random(2, 3, 42, 3).unwrap();
        let b = GaussField::random(2, 3, 42, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, GaussField::random(2, 3, 43, 3).unwrap());
        assert_eq!(GaussField::random(0, 4, 1, 2).unwrap().components().len(), 1);
        for t in a.components().iter().flatten() {
            assert!(t.degree() <= 3);
            assert!((0.5..=2.0).contains(&t.width));
            assert!(t.center.iter().map(|c| c * c).sum::<f64>() <= 1.0);
            assert!(t.coeff.norm() <= 1.0);
        }
    }

    /// Each term is bounded by `(|x| + 1)^3 exp(-0.5 (|x| - 1)^2)`.
    #[test]
    fn random_field_tail_bound() {
        let terms = 3;
        let f = GaussField::random(1, 3, 8, terms).unwrap();
        for (r, bound) in [(10.0f64, 1e-13), (12.0, 1e-20)] {
            let derived = terms as f64 * (r + 1.0).powi(3) * (-0.5 * (r - 1.0).powi(2)).exp();
            assert!(derived < bound);
            for dir in [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.6, 0.0, 0.8]] {
                let x: Vec<f64> = dir.iter().map(|d| d * r).collect();
                for c in f.evaluate(&x).unwrap().components() {
                    assert!(c.norm() <= derived);
                }
            }
        }
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let f = GaussField::random(2, 3, 17, 3).unwrap();
        let text = f.to_json();
        let g = GaussField::from_json(&text).unwrap();
        assert_eq!(f, g);
        assert_eq!(text, g.to_json());
    }

    #[test]
    fn json_errors_carry_position() {
        let bad = "{\n  \"m\": 0,\n  \"n\": 2,\n  \"components\": [ oops ]\n}";
        match GaussField::from_json(bad) {
            Err(Error::FieldSpec { line, column, .. }) => {
                assert_eq!(line, 4);
                assert!(column > 0);
            }
            other => panic!("unexpected {other:?}"),
        }
        let negative_width = r#"{"m":0,"n":1,"components":[{"index":[],"terms":[{"coeff":[1,0],"power":[0],"width":-1,"center":[0]}]}]}"#;
        assert!(matches!(
            GaussField::from_json(negative_width),
            Err(Error::FieldSpec { .. })
        ));
        let bad_index = r#"{"m":1,"n":1,"components":[{"index":[3],"terms":[]}]}"#;
        assert!(matches!(GaussField::from_json(bad_index), Err(Error::FieldSpec { .. })));
    }

    proptest! {
        #[test]
        fn inner_derivative_is_symmetric(seed in 0u64..1000) {
            let v = GaussField::random(1, 3, seed, 2).unwrap();
            let dv = v.inner_derivative().unwrap();
            let x = [0.2, -0.1, 0.4];
            let t = dv.evaluate(&x).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert_eq!(t.get(&[i, j]).unwrap(), t.get(&[j, i]).unwrap());
                }
            }
        }
    }
}
