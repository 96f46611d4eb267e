//! Tensor fields on the plane: complex components, integral momenta, moment
//! integrals of the transforms, their polynomial structure on the unit
//! circle, and the relations that tie two fields with equal `I^0` together.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, RwLock};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_dim, domain, Error, Result};
use crate::gaussfield::{GaussField, GaussTerm};
use crate::lift::{Evaluator, MomentumDataSet};
use crate::quadrature::{hermite_rule, nodes_for_degree};
use crate::symtensor::{binomial_f64, MultiIndex};
use crate::xray::{ray_transform_i, TSPoint, TransformRep};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `(-xi_2, xi_1)`: the point `i p zeta` of the line `(i p zeta, zeta)` is
/// `p * perp(xi)` in real coordinates.
pub fn perp(xi: &[f64; 2]) -> [f64; 2] {
    [-xi[1], xi[0]]
}

/// The point of `T S^1` at signed distance `p` from the origin on the line
/// with direction `(cos theta, sin theta)`.
pub fn line_point(p: f64, theta: f64) -> TSPoint {
    let xi = [theta.cos(), theta.sin()];
    let x = perp(&xi).map(|c| p * c);
    TSPoint::new(x.to_vec(), xi.to_vec()).expect("unit direction with orthogonal offset")
}

/// `count` seeded points of `T S^1` with `|p| <= 2`.
pub fn sample_line_points(count: usize, seed: u64) -> Vec<TSPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| line_point(rng.random_range(-2.0..2.0), rng.random_range(0.0..2.0 * PI)))
        .collect()
}

/// Coefficients of `(a u + b v)^p (c u + d v)^q` on `u^{p+q-j} v^j`.
fn binomial_product(a: Complex64, b: Complex64, p: usize, c: Complex64, d: Complex64, q: usize) -> Vec<Complex64> {
    let mut poly = vec![Complex64::new(1.0, 0.0)];
    let factors = std::iter::repeat_n((a, b), p).chain(std::iter::repeat_n((c, d), q));
    for (u, v) in factors {
        let mut next = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
        for (j, &coef) in poly.iter().enumerate() {
            next[j] += coef * u;
            next[j + 1] += coef * v;
        }
        poly = next;
    }
    poly
}

/// Change between the bases `dx_1^{m-q} dx_2^q` and `dz^{m-j} dzbar^j` of
/// rank-`m` symmetric tensors on the plane.
#[derive(Clone, Debug)]
pub struct BasisChange {
    m: usize,
    /// Row `j`: `dz^{m-j} dzbar^j` expanded over `dx_1^{m-q} dx_2^q`.
    a: Vec<Vec<Complex64>>,
    /// Row `q`: `dx_1^{m-q} dx_2^q` expanded over `dz^{m-j} dzbar^j`; the inverse of `a`.
    b: Vec<Vec<Complex64>>,
}

impl BasisChange {
    pub fn new(m: usize) -> Self {
        let one = Complex64::new(1.0, 0.0);
        let a = (0..=m).map(|j| binomial_product(one, I, m - j, one, -I, j)).collect();
        // dx_1 = (dz + dzbar)/2, dx_2 = (dz - dzbar)/(2i)
        let half = Complex64::new(0.5, 0.0);
        let b = (0..=m)
            .map(|q| binomial_product(half, half, m - q, -I * 0.5, I * 0.5, q))
            .collect();
        BasisChange { m, a, b }
    }

    pub fn rank(&self) -> usize {
        self.m
    }

    pub fn a(&self) -> &[Vec<Complex64>] {
        &self.a
    }

    pub fn b(&self) -> &[Vec<Complex64>] {
        &self.b
    }

    /// Largest entry of `A B - Id`.
    pub fn inverse_defect(&self) -> f64 {
        let n = self.m + 1;
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for c in 0..n {
                let s: Complex64 = (0..n).map(|t| self.a[r][t] * self.b[t][c]).sum();
                let target = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((s - target).norm());
            }
        }
        worst
    }
}

/// Multi-index with `m - q` ones and `q` twos (0-based: zeros and ones).
fn real_index(m: usize, q: usize) -> MultiIndex {
    MultiIndex::new([vec![0; m - q], vec![1; q]].concat())
}

fn check_planar(f: &GaussField) -> Result<()> {
    if f.dim() != 2 {
        return Err(domain(format!("planar field expected, got n={}", f.dim())));
    }
    Ok(())
}

/// Real coordinates `C(m,q) f_{1..1 2..2}` (`q` twos), as scalar fields.
pub fn real_coordinates(f: &GaussField) -> Result<Vec<GaussField>> {
    check_planar(f)?;
    let m = f.rank();
    Ok((0..=m)
        .map(|q| {
            f.component_field(&real_index(m, q))
                .scaled(Complex64::new(binomial_f64(m, q), 0.0))
        })
        .collect())
}

/// Complex coordinates `f~_j = sum_q b^q_j fcheck_q`.
pub fn real_to_complex(f: &GaussField) -> Result<Vec<GaussField>> {
    let real = real_coordinates(f)?;
    let basis = BasisChange::new(f.rank());
    (0..real.len())
        .map(|j| {
            real.iter().enumerate().try_fold(GaussField::zero(0, 2)?, |acc, (q, fq)| {
                acc.add_scaled(fq, basis.b[q][j])
            })
        })
        .map(|r| r.map(GaussField::normalized))
        .collect()
}

/// Rebuilds the rank-`m` field from its complex coordinates.
pub fn complex_to_real(components: &[GaussField]) -> Result<GaussField> {
    let m = components
        .len()
        .checked_sub(1)
        .ok_or_else(|| domain("at least one complex component is required"))?;
    let basis = BasisChange::new(m);
    let mut out = GaussField::zero(m, 2)?;
    for q in 0..=m {
        let idx = real_index(m, q);
        let scale = 1.0 / binomial_f64(m, q);
        for (j, fj) in components.iter().enumerate() {
            check_planar(fj)?;
            for term in &fj.components()[0] {
                let mut t = term.clone();
                t.coeff *= basis.a[j][q] * scale;
                out.push_term(idx.as_slice(), t)?;
            }
        }
    }
    Ok(out.normalized())
}

/// `int z^alpha zbar^beta g(z) dsigma(z)` for a scalar planar field, exact
/// by a product Gauss-Hermite rule per term.
pub fn complex_moment(g: &GaussField, alpha: usize, beta: usize) -> Result<Complex64> {
    check_planar(g)?;
    check_dim(0, g.rank())?;
    let mut total = Complex64::new(0.0, 0.0);
    for term in &g.components()[0] {
        total += term_moment(term, alpha, beta)?;
    }
    Ok(total)
}

fn term_moment(term: &GaussTerm, alpha: usize, beta: usize) -> Result<Complex64> {
    let rule = hermite_rule(nodes_for_degree(alpha + beta + term.degree()))?;
    let s = term.width.sqrt();
    let mut acc = Complex64::new(0.0, 0.0);
    for (&u, &wu) in rule.nodes.iter().zip(&rule.weights) {
        for (&v, &wv) in rule.nodes.iter().zip(&rule.weights) {
            let (d1, d2) = (u / s, v / s);
            let z = Complex64::new(term.center[0] + d1, term.center[1] + d2);
            let poly = d1.powi(term.power[0] as i32) * d2.powi(term.power[1] as i32);
            acc += z.powu(alpha as u32) * z.conj().powu(beta as u32) * (wu * wv * poly);
        }
    }
    Ok(acc * term.coeff / term.width)
}

/// Lazily filled table of complex integral momenta `mu~_j^{alpha beta}` for
/// `alpha + beta <= order`. Entries can be pinned to arbitrary values.
#[derive(Debug)]
pub struct MomentTable {
    m: usize,
    order: usize,
    components: Vec<GaussField>,
    cache: RwLock<HashMap<(usize, usize, usize), Complex64>>,
}

impl MomentTable {
    pub fn new(f: &GaussField, order: usize) -> Result<Self> {
        Ok(MomentTable {
            m: f.rank(),
            order,
            components: real_to_complex(f)?,
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn rank(&self) -> usize {
        self.m
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, j: usize, alpha: usize, beta: usize) -> Result<Complex64> {
        if j > self.m || alpha + beta > self.order {
            return Err(Error::MissingMoment { j, alpha, beta });
        }
        if let Some(v) = self.cache.read().expect("moment cache poisoned").get(&(j, alpha, beta)) {
            return Ok(*v);
        }
        let v = complex_moment(&self.components[j], alpha, beta)?;
        Ok(*self
            .cache
            .write()
            .expect("moment cache poisoned")
            .entry((j, alpha, beta))
            .or_insert(v))
    }

    /// Overrides one entry.
    pub fn set(&self, j: usize, alpha: usize, beta: usize, value: Complex64) -> Result<()> {
        if j > self.m || alpha + beta > self.order {
            return Err(Error::MissingMoment { j, alpha, beta });
        }
        self.cache
            .write()
            .expect("moment cache poisoned")
            .insert((j, alpha, beta), value);
        Ok(())
    }
}

/// Per-(center, width) pieces of a field, so that the transform of each piece
/// is a polynomial times one Gaussian along every line.
fn gaussian_groups(f: &GaussField) -> Result<Vec<(f64, [f64; 2], GaussField)>> {
    let mut groups: Vec<(f64, [f64; 2], GaussField)> = Vec::new();
    let indices = crate::symtensor::multi_indices(f.rank(), f.dim());
    for (idx, terms) in indices.iter().zip(f.components()) {
        for t in terms {
            let c = [t.center[0], t.center[1]];
            let pos = match groups.iter().position(|(w, cc, _)| *w == t.width && *cc == c) {
                Some(p) => p,
                None => {
                    groups.push((t.width, c, GaussField::zero(f.rank(), 2)?));
                    groups.len() - 1
                }
            };
            groups[pos].2.push_term(idx.as_slice(), t.clone())?;
        }
    }
    Ok(groups)
}

/// `int p^r (I^k f)(p xi_perp, xi) dp` for `xi = (cos theta, sin theta)`.
/// Along `p` every Gaussian piece of the integrand is `exp(-a (p - p0)^2)`
/// times a polynomial, integrated exactly by Gauss-Hermite nodes in `p`.
pub fn moment_integral(f: &GaussField, k: usize, r: usize, theta: f64) -> Result<Complex64> {
    moment_integral_with(f, k, r, theta, 1)
}

/// As [`moment_integral`] with `factor` times the minimal node count.
pub fn moment_integral_with(f: &GaussField, k: usize, r: usize, theta: f64, factor: usize) -> Result<Complex64> {
    check_planar(f)?;
    if k > f.rank() {
        return Err(domain(format!("moment order k={k} exceeds rank {}", f.rank())));
    }
    let xi = [theta.cos(), theta.sin()];
    let xp = perp(&xi);
    let mut total = Complex64::new(0.0, 0.0);
    for (width, center, piece) in gaussian_groups(f)? {
        let rep = TransformRep::transform(k, &piece).compile();
        let p0 = center[0] * xp[0] + center[1] * xp[1];
        let s = width.sqrt();
        let rule = hermite_rule(factor * nodes_for_degree(r + piece.max_degree()))?;
        for (&u, &w) in rule.nodes.iter().zip(&rule.weights) {
            let p = p0 + u / s;
            let v = rep.evaluate(&[p * xp[0], p * xp[1]], &xi)?;
            total += v * (w * (u * u).exp() * p.powi(r as i32) / s);
        }
    }
    Ok(total)
}

/// Coefficients of the degree `d = m + r + k` homogeneous polynomial
/// predicted from the momenta, entry `s` on `zeta^{d-s} zetabar^s`.
pub fn predicted_polynomial(table: &MomentTable, r: usize, k: usize) -> Result<Vec<Complex64>> {
    let m = table.rank();
    let d = m + r + k;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); d + 1];
    let front = I.powu(r as u32) / 2f64.powi((r + k) as i32);
    for j in 0..=m {
        for alpha in 0..=r {
            for beta in 0..=k {
                let sign = if alpha % 2 == 0 { 1.0 } else { -1.0 };
                let w = sign * binomial_f64(r, alpha) * binomial_f64(k, beta);
                let mu = table.get(j, alpha + beta, r + k - alpha - beta)?;
                coeffs[j + alpha + beta] += front * mu * w;
            }
        }
    }
    Ok(coeffs)
}

/// Value at `zeta = e^{i theta}`: `sum_s c_s e^{i (d - 2s) theta}`.
pub fn evaluate_on_circle(coeffs: &[Complex64], theta: f64) -> Complex64 {
    let d = coeffs.len() as i64 - 1;
    coeffs
        .iter()
        .enumerate()
        .map(|(s, c)| c * Complex64::from_polar(1.0, (d - 2 * s as i64) as f64 * theta))
        .sum()
}

/// Equispaced angles used to sample a degree-`d` polynomial: `4d + 8` of
/// them, twice the count needed to resolve every frequency.
pub fn circle_angles(d: usize) -> Vec<f64> {
    let count = 4 * d + 8;
    (0..count).map(|t| 2.0 * PI * t as f64 / count as f64).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct HomogeneousFit {
    /// Entry `s` multiplies `zeta^{d-s} zetabar^s`.
    pub coefficients: Vec<Complex64>,
    /// Largest `|fit - sample|`.
    pub residual: f64,
}

/// Least-squares fit of samples on the unit circle by a homogeneous
/// polynomial of degree `d`, i.e. by the frequencies `d, d-2, ..., -d`.
pub fn fit_homogeneous(samples: &[(Complex64, Complex64)], d: usize) -> Result<HomogeneousFit> {
    let rows = samples.len();
    let cols = d + 1;
    let theta: Vec<f64> = samples.iter().map(|(z, _)| z.arg()).collect();
    let design = DMatrix::from_fn(rows, cols, |t, s| {
        Complex64::from_polar(1.0, (d as f64 - 2.0 * s as f64) * theta[t])
    });
    let rhs = DMatrix::from_fn(rows, 1, |t, _| samples[t].1);
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = smax * 1e-10;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    if rows < cols || rank < cols || smax == 0.0 {
        return Err(Error::RankDeficient { rows, cols });
    }
    let sol = svd.solve(&rhs, cutoff).map_err(|e| domain(e.to_string()))?;
    let fitted = &design * &sol;
    let residual = (0..rows).map(|t| (fitted[(t, 0)] - rhs[(t, 0)]).norm()).fold(0.0, f64::max);
    Ok(HomogeneousFit {
        coefficients: sol.column(0).iter().copied().collect(),
        residual,
    })
}

/// One `(r, k)` entry of the moment-condition check.
#[derive(Clone, Debug, Serialize)]
pub struct MomentRow {
    pub r: usize,
    pub k: usize,
    pub degree: usize,
    pub fitted: Vec<Complex64>,
    pub predicted: Vec<Complex64>,
    /// Fit residual relative to `max(1, max |sample|)`.
    pub fit_residual: f64,
    /// Largest coefficient difference relative to `max(1, max |predicted|)`.
    pub coefficient_error: f64,
}

fn relative_max(values: impl Iterator<Item = f64>, scale: f64) -> f64 {
    values.fold(0.0, f64::max) / scale.max(1.0)
}

fn fit_row(r: usize, k: usize, d: usize, sample: impl Fn(f64) -> Result<Complex64> + Sync, predicted: Vec<Complex64>) -> Result<MomentRow> {
    let samples: Vec<(Complex64, Complex64)> = circle_angles(d)
        .into_par_iter()
        .map(|theta| Ok((Complex64::from_polar(1.0, theta), sample(theta)?)))
        .collect::<Result<_>>()?;
    let fit = fit_homogeneous(&samples, d)?;
    let sample_scale = samples.iter().map(|(_, v)| v.norm()).fold(0.0, f64::max);
    let pred_scale = predicted.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let coefficient_error = relative_max(
        fit.coefficients.iter().zip(&predicted).map(|(a, b)| (a - b).norm()),
        pred_scale,
    );
    Ok(MomentRow {
        r,
        k,
        degree: d,
        fit_residual: fit.residual / sample_scale.max(1.0),
        coefficient_error,
        fitted: fit.coefficients,
        predicted,
    })
}

/// For every `r <= r_max` and `k <= m`: samples the moment integrals of
/// `I^k f` on the circle, fits a degree `m + r + k` homogeneous polynomial,
/// and compares it with the prediction from the momenta of `f`.
pub fn moment_conditions(f: &GaussField, r_max: usize) -> Result<Vec<MomentRow>> {
    let m = f.rank();
    let table = MomentTable::new(f, r_max + m)?;
    let mut rows = Vec::new();
    for r in 0..=r_max {
        for k in 0..=m {
            let predicted = predicted_polynomial(&table, r, k)?;
            rows.push(fit_row(r, k, m + r + k, |theta| moment_integral(f, k, r, theta), predicted)?);
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyEntry {
    pub r: usize,
    pub s: usize,
    pub value: Complex64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyReport {
    pub entries: Vec<ConsistencyEntry>,
    /// Largest `|value|` over all entries.
    pub max_abs: f64,
    /// Largest `|mu~_0^{0r} - nu~_0^{0r}|` (the `s = 0` entries).
    pub leading: f64,
    /// Largest `|mu~_m^{r,0} - nu~_m^{r,0}|` (the `s = r + m` entries).
    pub trailing: f64,
}

/// `sum_{j=max(0,s-r)}^{min(s,m)} (-1)^j C(r, s-j) (mu~_j^{s-j,r+j-s} - nu~_j^{s-j,r+j-s})`
/// for `r <= r_max`, `0 <= s <= r + m`. All vanish when the two fields have
/// equal `I^0`.
pub fn consistency_check(mu: &MomentTable, nu: &MomentTable, r_max: usize) -> Result<ConsistencyReport> {
    check_dim(mu.rank(), nu.rank())?;
    let m = mu.rank();
    let mut entries = Vec::new();
    let (mut max_abs, mut leading, mut trailing) = (0f64, 0f64, 0f64);
    for r in 0..=r_max {
        for s in 0..=r + m {
            let mut value = Complex64::new(0.0, 0.0);
            for j in s.saturating_sub(r)..=s.min(m) {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                let (a, b) = (s - j, r + j - s);
                value += (mu.get(j, a, b)? - nu.get(j, a, b)?) * (sign * binomial_f64(r, s - j));
            }
            let abs = value.norm();
            max_abs = max_abs.max(abs);
            if s == 0 {
                leading = leading.max(abs);
            }
            if s == r + m {
                trailing = trailing.max(abs);
            }
            entries.push(ConsistencyEntry { r, s, value });
        }
    }
    Ok(ConsistencyReport {
        entries,
        max_abs,
        leading,
        trailing,
    })
}

/// Data `chi^k = -(phi^{k+1} - I^{k+1} g)/(k+1)` for `k < m`, together with
/// the mismatch of `I^0 g` against `phi^0`.
#[derive(Clone, Debug)]
pub struct ChiRecursion {
    pub chi: MomentumDataSet,
    /// Largest `|phi^0 - I^0 g|` relative to `max(1, |phi^0|)` at the check points.
    pub base_mismatch: f64,
}

pub fn chi_recursion(data: &MomentumDataSet, g: &GaussField, points: &[TSPoint]) -> Result<ChiRecursion> {
    let m = data.rank();
    if m == 0 {
        return Err(domain("the recursion lowers the rank and needs m >= 1"));
    }
    check_dim(m, g.rank())?;
    check_dim(data.dim(), g.dim())?;
    let mut base_mismatch: f64 = 0.0;
    for pt in points {
        let a = data.phi(0, pt)?;
        let b = ray_transform_i(0, g, pt)?;
        base_mismatch = base_mismatch.max((a - b).norm() / a.norm().max(1.0));
    }
    let evaluators: Vec<Evaluator> = (0..m)
        .map(|k| {
            let data = data.clone();
            let g = Arc::new(g.clone());
            let e: Evaluator = Arc::new(move |pt: &TSPoint| {
                let phi = data.phi(k + 1, pt)?;
                let ig = ray_transform_i(k + 1, &g, pt)?;
                Ok(-(phi - ig) / (k + 1) as f64)
            });
            e
        })
        .collect();
    Ok(ChiRecursion {
        chi: MomentumDataSet::new(m - 1, data.dim(), evaluators)?,
        base_mismatch,
    })
}

/// Largest `|chi^k - I^k v|` relative to `max(1, |I^k v|)`.
pub fn chi_residual(chi: &MomentumDataSet, v: &GaussField, points: &[TSPoint]) -> Result<f64> {
    check_dim(chi.rank(), v.rank())?;
    let mut worst: f64 = 0.0;
    for k in 0..=chi.rank() {
        for pt in points {
            let a = chi.phi(k, pt)?;
            let b = ray_transform_i(k, v, pt)?;
            worst = worst.max((a - b).norm() / b.norm().max(1.0));
        }
    }
    Ok(worst)
}

/// Largest `|I^k(dv) + k I^{k-1} v|` over `k <= rank(v) + 1`, relative to
/// `max(1, |I^k(dv)|)`.
pub fn inner_derivative_residual(v: &GaussField, points: &[TSPoint]) -> Result<f64> {
    let dv = v.inner_derivative()?;
    let mut worst: f64 = 0.0;
    for k in 0..=dv.rank() {
        for pt in points {
            let a = ray_transform_i(k, &dv, pt)?;
            let b = if k == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                -(k as f64) * ray_transform_i(k - 1, v, pt)?
            };
            worst = worst.max((a - b).norm() / a.norm().max(1.0));
        }
    }
    Ok(worst)
}

/// Moment conditions for the lowered data: `chi^k` for `f = g + dv` must fit
/// homogeneous polynomials of degree `r + k + m - 1`, one less than the
/// degree the definition of `chi` suggests. Samples use exact moment
/// integrals of `f` and `g`. When `v` is given the fits are compared with the
/// predictions from its momenta; otherwise `predicted` is empty and
/// `coefficient_error` is 0.
pub fn chi_moment_conditions(f: &GaussField, g: &GaussField, v: Option<&GaussField>, r_max: usize) -> Result<Vec<MomentRow>> {
    check_dim(f.rank(), g.rank())?;
    let m = f.rank();
    if m == 0 {
        return Err(domain("the recursion lowers the rank and needs m >= 1"));
    }
    let table = v.map(|v| MomentTable::new(v, r_max + m)).transpose()?;
    if let Some(t) = &table {
        check_dim(m - 1, t.rank())?;
    }
    let mut rows = Vec::new();
    for r in 0..=r_max {
        for k in 0..m {
            let predicted = match &table {
                Some(t) => predicted_polynomial(t, r, k)?,
                None => Vec::new(),
            };
            let sample = |theta: f64| -> Result<Complex64> {
                let a = moment_integral(f, k + 1, r, theta)?;
                let b = moment_integral(g, k + 1, r, theta)?;
                Ok(-(a - b) / (k + 1) as f64)
            };
            rows.push(fit_row(r, k, r + k + m - 1, sample, predicted)?);
        }
    }
    Ok(rows)
}
