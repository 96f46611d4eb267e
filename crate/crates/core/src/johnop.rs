//! John operators `J_ij = d^2/dx^i dxi^j - d^2/dx^j dxi^i` and chains of them.
//!
//! Two backends: exact (symbolic derivatives of a [`TransformRep`]) and
//! nested central differences on an arbitrary callable. The latter is only
//! trusted for short chains.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::gaussfield::GaussField;
use crate::lift::{Evaluator, MomentumDataSet};
use crate::xray::{random_line_point, TSPoint, TransformRep};

/// Default finite-difference step.
pub const DEFAULT_STEP: f64 = 1e-3;
/// Step used by [`negative_control`]. The valid-data residual there is pure
/// `O(h^2)` truncation error; at `1e-3` it sits within a factor of a few
/// hundred of an `eps = 1e-2` perturbation, which blurs the comparison.
pub const NEGATIVE_CONTROL_STEP: f64 = 2.5e-4;
/// Longest chain the finite-difference backend accepts by default.
pub const DEFAULT_FD_MAX_LEN: usize = 3;
/// Default cap on the number of enumerated chains.
pub const DEFAULT_CHAIN_CAP: usize = 100;

/// A function of `(x, xi)` on `R^n x (R^n \ 0)`.
pub type PsiFn = Arc<dyn Fn(&[f64], &[f64]) -> Result<Complex64> + Send + Sync>;

/// A borrowed function of `(x, xi)`.
pub type PsiRef<'a> = &'a dyn Fn(&[f64], &[f64]) -> Result<Complex64>;

/// Product `J_{i_1 j_1} ... J_{i_L j_L}`, stored with `i < j` in every pair
/// and the accumulated sign of the swaps. A pair with `i = j` makes the
/// whole chain the zero operator.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct JohnChain {
    pairs: Vec<(usize, usize)>,
    sign: i8,
    zero: bool,
}

impl JohnChain {
    pub fn new(raw: &[(usize, usize)]) -> Self {
        let mut sign = 1i8;
        let mut zero = false;
        let pairs = raw
            .iter()
            .map(|&(i, j)| {
                if i == j {
                    zero = true;
                }
                if i > j {
                    sign = -sign;
                    (j, i)
                } else {
                    (i, j)
                }
            })
            .collect();
        JohnChain { pairs, sign, zero }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn sign(&self) -> f64 {
        if self.zero {
            0.0
        } else {
            self.sign as f64
        }
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    fn check(&self, n: usize) -> Result<()> {
        if let Some(&(_, j)) = self.pairs.iter().find(|&&(_, j)| j >= n) {
            return Err(domain(format!("John index {j} out of range for n={n}")));
        }
        Ok(())
    }
}

impl fmt::Display for JohnChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.sign < 0 && !self.zero {
            write!(f, "-")?;
        }
        for (i, j) in &self.pairs {
            write!(f, "J({i},{j})")?;
        }
        Ok(())
    }
}

/// All chains of `len` pairs `i < j`, as non-decreasing sequences of pairs in
/// lexicographic order. John operators commute, so these cover every chain
/// up to order and sign.
pub fn canonical_chains(n: usize, len: usize) -> Vec<JohnChain> {
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(len);
    fn rec(pairs: &[(usize, usize)], len: usize, lo: usize, cur: &mut Vec<(usize, usize)>, out: &mut Vec<JohnChain>) {
        if cur.len() == len {
            out.push(JohnChain::new(cur));
            return;
        }
        for p in lo..pairs.len() {
            cur.push(pairs[p]);
            rec(pairs, len, p, cur, out);
            cur.pop();
        }
    }
    rec(&pairs, len, 0, &mut cur, &mut out);
    out
}

/// How to trim the canonical chain list to a cap.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChainSelection {
    /// The first `cap` chains in lexicographic order.
    First,
    /// `cap` chains spread evenly over the whole list.
    Spread,
}

pub fn select_chains(all: Vec<JohnChain>, cap: usize, how: ChainSelection) -> Vec<JohnChain> {
    if all.len() <= cap {
        return all;
    }
    match how {
        ChainSelection::First => all.into_iter().take(cap).collect(),
        ChainSelection::Spread => {
            let total = all.len();
            (0..cap).map(|s| all[s * total / cap].clone()).collect()
        }
    }
}

/// `J_ij rep`.
pub fn john_apply_exact(rep: &TransformRep, i: usize, j: usize) -> Result<TransformRep> {
    let a = rep.derive_x(i)?.derive_xi(j)?;
    let b = rep.derive_x(j)?.derive_xi(i)?;
    a.add_scaled(&b, Complex64::new(-1.0, 0.0))
}

/// Applies a whole chain (rightmost pair first).
pub fn john_chain_exact(rep: &TransformRep, chain: &JohnChain) -> Result<TransformRep> {
    chain.check(rep.dim())?;
    if chain.is_zero() {
        return Ok(TransformRep::zero(rep.dim()));
    }
    let mut out = rep.clone();
    for &(i, j) in chain.pairs.iter().rev() {
        out = john_apply_exact(&out, i, j)?;
    }
    Ok(out.scaled(Complex64::new(chain.sign(), 0.0)))
}

/// Per-chain residuals at a common set of points.
#[derive(Clone, Debug, Serialize)]
pub struct ChainResidual {
    pub chain: String,
    /// `|value| / max(1, scale)` at each point.
    pub per_point: Vec<f64>,
    pub max_abs: f64,
    pub max_rel: f64,
    pub rms_rel: f64,
}

fn summarize(chain: &JohnChain, values: &[(Complex64, f64)]) -> ChainResidual {
    let per_point: Vec<f64> = values.iter().map(|(v, s)| v.norm() / s.max(1.0)).collect();
    let max_abs = values.iter().map(|(v, _)| v.norm()).fold(0.0, f64::max);
    let max_rel = per_point.iter().copied().fold(0.0, f64::max);
    let rms_rel = if per_point.is_empty() {
        0.0
    } else {
        (per_point.iter().map(|r| r * r).sum::<f64>() / per_point.len() as f64).sqrt()
    };
    ChainResidual {
        chain: chain.to_string(),
        per_point,
        max_abs,
        max_rel,
        rms_rel,
    }
}

/// Applies each chain to `rep` on the exact backend and evaluates at the
/// points. The relative residual divides by the sum of absolute quadrature
/// contributions, which is the scale at which rounding shows up.
pub fn john_residuals_exact(
    rep: &TransformRep,
    chains: &[JohnChain],
    points: &[(Vec<f64>, Vec<f64>)],
) -> Result<Vec<ChainResidual>> {
    // chains sharing a prefix (in application order) reuse it
    let mut prefix_cache: HashMap<Vec<(usize, usize)>, TransformRep> = HashMap::new();
    let mut applied = Vec::with_capacity(chains.len());
    for chain in chains {
        chain.check(rep.dim())?;
        if chain.is_zero() {
            applied.push(TransformRep::zero(rep.dim()));
            continue;
        }
        let order: Vec<(usize, usize)> = chain.pairs.iter().rev().copied().collect();
        let mut cur = rep.clone();
        let mut start = 0;
        for cut in (1..=order.len()).rev() {
            if let Some(hit) = prefix_cache.get(&order[..cut]) {
                cur = hit.clone();
                start = cut;
                break;
            }
        }
        for cut in start..order.len() {
            let (i, j) = order[cut];
            cur = john_apply_exact(&cur, i, j)?;
            prefix_cache.insert(order[..=cut].to_vec(), cur.clone());
        }
        applied.push(cur.scaled(Complex64::new(chain.sign(), 0.0)));
    }
    chains
        .par_iter()
        .zip(applied.par_iter())
        .map(|(chain, rep)| {
            let compiled = rep.compile();
            let values = points
                .iter()
                .map(|(x, xi)| compiled.evaluate_detailed(x, xi).map(|e| (e.value, e.magnitude)))
                .collect::<Result<Vec<_>>>()?;
            Ok(summarize(chain, &values))
        })
        .collect()
}

/// Central-difference approximation of `d^2 psi / dx^i dxi^j`.
fn mixed_fd(psi: PsiRef<'_>, i: usize, j: usize, x: &[f64], xi: &[f64], h: f64) -> Result<Complex64> {
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[i] += h;
    xm[i] -= h;
    let mut ep = xi.to_vec();
    let mut em = xi.to_vec();
    ep[j] += h;
    em[j] -= h;
    let v = psi(&xp, &ep)? - psi(&xp, &em)? - psi(&xm, &ep)? + psi(&xm, &em)?;
    Ok(v / (4.0 * h * h))
}

/// `J_ij psi` by two four-point stencils.
pub fn john_apply_fd(psi: PsiRef<'_>, i: usize, j: usize, x: &[f64], xi: &[f64], h: f64) -> Result<Complex64> {
    if h <= 0.0 {
        return Err(domain("finite-difference step must be positive"));
    }
    if i == j {
        return Ok(Complex64::new(0.0, 0.0));
    }
    Ok(mixed_fd(psi, i, j, x, xi, h)? - mixed_fd(psi, j, i, x, xi, h)?)
}

/// Nested stencils for a whole chain. Rejects chains longer than `max_len`.
pub fn john_chain_fd(psi: &PsiFn, chain: &JohnChain, x: &[f64], xi: &[f64], h: f64, max_len: usize) -> Result<Complex64> {
    chain.check(x.len())?;
    if chain.len() > max_len {
        return Err(Error::Unsupported(format!(
            "finite-difference John chain of length {} exceeds the limit {max_len}",
            chain.len()
        )));
    }
    if chain.is_zero() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    fn nested(psi: &PsiFn, pairs: &[(usize, usize)], x: &[f64], xi: &[f64], h: f64) -> Result<Complex64> {
        match pairs.split_first() {
            None => psi(x, xi),
            Some((&(i, j), rest)) => {
                let inner = |y: &[f64], eta: &[f64]| nested(psi, rest, y, eta, h);
                john_apply_fd(&inner, i, j, x, xi, h)
            }
        }
    }
    Ok(nested(psi, &chain.pairs, x, xi, h)? * chain.sign())
}

/// FD chain residuals relative to `max(1, max |psi|)` over the points.
pub fn john_residuals_fd(
    psi: &PsiFn,
    chains: &[JohnChain],
    points: &[(Vec<f64>, Vec<f64>)],
    h: f64,
    max_len: usize,
) -> Result<Vec<ChainResidual>> {
    let scale = points
        .iter()
        .map(|(x, xi)| psi(x, xi).map(|v| v.norm()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(1.0, f64::max);
    chains
        .par_iter()
        .map(|chain| {
            let values = points
                .iter()
                .map(|(x, xi)| john_chain_fd(psi, chain, x, xi, h, max_len).map(|v| (v, scale)))
                .collect::<Result<Vec<_>>>()?;
            Ok(summarize(chain, &values))
        })
        .collect()
}

/// `psi^m` of a data set, for the FD backend.
pub fn lifted_psi(data: &MomentumDataSet) -> PsiFn {
    let data = data.clone();
    let m = data.rank();
    Arc::new(move |x: &[f64], xi: &[f64]| data.lift_psi(m, x, xi))
}

/// Sample points with `x` in `[-1, 1]^n` and `|xi|` in `[0.5, 2]`.
pub fn sample_points(n: usize, count: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_line_point(n, 1.0, &mut rng)).collect()
}

/// Outcome of comparing FD John residuals of valid and perturbed scalar data.
#[derive(Clone, Debug, Serialize)]
pub struct NegativeControl {
    pub seed: u64,
    pub epsilon: f64,
    pub step: f64,
    pub valid_residual: f64,
    pub perturbed_residual: f64,
    pub ratio: f64,
}

/// Scalar data `phi^0 = I^0 f` for a random field, and the same data plus
/// `eps * exp(-|x|^2) (xi_1^2 - xi_2^2)`, which has the right parity but is
/// not a ray transform. Every single John operator is applied to both lifts
/// by finite differences at the same points.
pub fn negative_control(seed: u64, epsilon: f64, points: usize, h: f64) -> Result<NegativeControl> {
    let n = 3;
    let f = GaussField::random(0, n, seed, 3)?;
    let valid = MomentumDataSet::from_field(&f);
    let base = valid.clone();
    let bump: Evaluator = Arc::new(move |p: &TSPoint| {
        let r2: f64 = p.x().iter().map(|v| v * v).sum();
        let xi = p.xi();
        Ok(base.phi(0, p)? + epsilon * (-r2).exp() * (xi[0] * xi[0] - xi[1] * xi[1]))
    });
    let perturbed = valid.clone().with_evaluator(0, bump)?;
    let chains = canonical_chains(n, 1);
    let pts = sample_points(n, points, seed ^ 0x5eed);
    let worst = |data: &MomentumDataSet| -> Result<f64> {
        let r = john_residuals_fd(&lifted_psi(data), &chains, &pts, h, DEFAULT_FD_MAX_LEN)?;
        Ok(r.iter().map(|c| c.max_rel).fold(0.0, f64::max))
    };
    let valid_residual = worst(&valid)?;
    let perturbed_residual = worst(&perturbed)?;
    Ok(NegativeControl {
        seed,
        epsilon,
        step: h,
        valid_residual,
        perturbed_residual,
        ratio: perturbed_residual / valid_residual,
    })
}

/// Observed convergence order of the FD John operator.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceStudy {
    pub steps: Vec<f64>,
    pub errors: Vec<f64>,
    /// `log2(e(2h) / e(h))` for consecutive halvings.
    pub orders: Vec<f64>,
}

/// Compares FD and exact single John operators on lifted rank-1 data, where
/// single operators do not annihilate `psi^1`, over successively halved steps.
pub fn fd_convergence(seed: u64, points: usize, steps: &[f64]) -> Result<ConvergenceStudy> {
    let n = 3;
    let f = GaussField::random(1, n, seed, 3)?;
    let data = MomentumDataSet::from_field(&f);
    let psi = lifted_psi(&data);
    let rep = TransformRep::transform(1, &f);
    let pts = sample_points(n, points, seed ^ 0xfd);
    let chains = canonical_chains(n, 1);
    let exact: Vec<Vec<Complex64>> = chains
        .iter()
        .map(|c| {
            let compiled = john_chain_exact(&rep, c)?.compile();
            pts.iter().map(|(x, xi)| compiled.evaluate(x, xi)).collect()
        })
        .collect::<Result<_>>()?;
    let mut errors = Vec::with_capacity(steps.len());
    for &h in steps {
        let mut worst: f64 = 0.0;
        for (c, ex) in chains.iter().zip(&exact) {
            for ((x, xi), e) in pts.iter().zip(ex) {
                let fd = john_chain_fd(&psi, c, x, xi, h, 1)?;
                worst = worst.max((fd - e).norm());
            }
        }
        errors.push(worst);
    }
    let orders = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    Ok(ConvergenceStudy {
        steps: steps.to_vec(),
        errors,
        orders,
    })
}
