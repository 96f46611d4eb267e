//! Construction of the functions `psi_{i_1..i_m}` from `psi^m` (or from the
//! whole tuple `psi^0..psi^m`) and checks of their properties.
//!
//! Everything here runs on the exact derivative backend: the construction
//! takes up to `2m` derivatives and finite differences would drown in noise.

use std::collections::BTreeMap;

use num_complex::Complex64;
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::error::{check_dim, domain, Result};
use crate::gaussfield::GaussField;
use crate::johnop::john_apply_exact;
use crate::lift::MomentumDataSet;
use crate::symtensor::{binomial_f64, coefficient_a, factorial, multi_indices, MultiIndex};
use crate::xray::{CompiledRep, TransformRep};

/// Largest rank for which the symmetrization is expanded over permutations.
pub const MAX_RANK: usize = 4;

fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(rest: &mut Vec<usize>, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest.is_empty() {
            out.push(cur.clone());
            return;
        }
        for s in 0..rest.len() {
            let v = rest.remove(s);
            cur.push(v);
            rec(rest, cur, out);
            cur.pop();
            rest.insert(s, v);
        }
    }
    let mut out = Vec::new();
    rec(&mut (0..k).collect(), &mut Vec::new(), &mut out);
    out
}

/// Derivative pattern `d_x^{xs} d_xi^{xis}` applied after `<xi,d_x>^r` to
/// `psi^source`. Directions are sorted; the derivatives commute.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Pattern {
    source: usize,
    transport: usize,
    xs: Vec<usize>,
    xis: Vec<usize>,
}

/// Averages `weight(k) * pattern(k, permuted target)` over all orderings of
/// the target and sums the coefficient of each distinct derivative pattern.
fn symmetrized_patterns(
    target: &[usize],
    weight: impl Fn(usize) -> f64,
    pattern: impl Fn(usize, Vec<usize>, Vec<usize>) -> Pattern,
) -> BTreeMap<Pattern, f64> {
    let m = target.len();
    let perms = permutations(m);
    let norm = 1.0 / perms.len() as f64;
    let mut acc: BTreeMap<Pattern, f64> = BTreeMap::new();
    for perm in &perms {
        let idx: Vec<usize> = perm.iter().map(|&s| target[s]).collect();
        for k in 0..=m {
            let mut xs = idx[..k].to_vec();
            let mut xis = idx[k..].to_vec();
            xs.sort_unstable();
            xis.sort_unstable();
            *acc.entry(pattern(k, xs, xis)).or_insert(0.0) += weight(k) * norm;
        }
    }
    acc
}

fn check_target(n: usize, m: usize, target: &[usize]) -> Result<()> {
    check_dim(m, target.len())?;
    if m > MAX_RANK {
        return Err(domain(format!("reduction supports rank <= {MAX_RANK}, got {m}")));
    }
    if let Some(&bad) = target.iter().find(|&&i| i >= n) {
        return Err(domain(format!("target index {bad} out of range for n={n}")));
    }
    Ok(())
}

fn assemble(
    sources: &[&TransformRep],
    patterns: BTreeMap<Pattern, f64>,
) -> Result<TransformRep> {
    let n = sources[0].dim();
    let mut transported: BTreeMap<(usize, usize), TransformRep> = BTreeMap::new();
    let mut out = TransformRep::zero(n);
    for (pat, c) in patterns {
        if c == 0.0 {
            continue;
        }
        let key = (pat.source, pat.transport);
        if let std::collections::btree_map::Entry::Vacant(e) = transported.entry(key) {
            let mut rep = sources[pat.source].clone();
            for _ in 0..pat.transport {
                rep = rep.transport()?;
            }
            e.insert(rep);
        }
        let derived = transported[&key].derive(&pat.xs, &pat.xis)?;
        out = out.add_scaled(&derived, Complex64::new(c, 0.0))?;
    }
    Ok(out)
}

/// `psi_I = (-1)^m/m! sigma(I) sum_k 1/(m-k)! d^m/dx^{i_1..i_k} dxi^{i_{k+1}..i_m}
/// <xi,d_x>^{m-k} psi^m`.
pub fn reduce_via_transport(psi_m: &TransformRep, target: &[usize]) -> Result<TransformRep> {
    let m = target.len();
    check_target(psi_m.dim(), m, target)?;
    let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    let outer = sign / factorial(m) as f64;
    let patterns = symmetrized_patterns(
        target,
        |k| outer / factorial(m - k) as f64,
        |k, xs, xis| Pattern {
            source: 0,
            transport: m - k,
            xs,
            xis,
        },
    );
    assemble(&[psi_m], patterns)
}

/// `psi_I = 1/m! sigma(I) sum_k (-1)^k C(m,k) d^m psi^k / dx^{i_1..i_k} dxi^{i_{k+1}..i_m}`,
/// from the whole tuple `psi^0..psi^m`.
pub fn reduce_via_tuple(tuple: &[TransformRep], target: &[usize]) -> Result<TransformRep> {
    let m = target.len();
    check_dim(m + 1, tuple.len())?;
    check_target(tuple[0].dim(), m, target)?;
    let outer = 1.0 / factorial(m) as f64;
    let patterns = symmetrized_patterns(
        target,
        |k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            outer * sign * binomial_f64(m, k)
        },
        |k, xs, xis| Pattern {
            source: k,
            transport: 0,
            xs,
            xis,
        },
    );
    let refs: Vec<&TransformRep> = tuple.iter().collect();
    assemble(&refs, patterns)
}

/// `(J^{0,m} f, ..., J^{m,m} f)`.
pub fn transform_tuple(f: &GaussField) -> Vec<TransformRep> {
    (0..=f.rank()).map(|k| TransformRep::transform(k, f)).collect()
}

/// Largest `|a - b|` over the points, relative to `max(1, |a|, |b|, M_a)`
/// where `M_a` is the absolute-contribution scale of `a`.
pub fn max_relative_difference(a: &CompiledRep, b: &CompiledRep, points: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (x, xi) in points {
        let ea = a.evaluate_detailed(x, xi)?;
        let eb = b.evaluate_detailed(x, xi)?;
        let scale = 1f64.max(ea.magnitude).max(eb.magnitude);
        worst = worst.max((ea.value - eb.value).norm() / scale);
    }
    Ok(worst)
}

/// Largest `|value|` relative to `max(1, M)`.
pub fn max_relative_value(a: &CompiledRep, points: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (x, xi) in points {
        let e = a.evaluate_detailed(x, xi)?;
        worst = worst.max(e.value.norm() / e.magnitude.max(1.0));
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize)]
pub struct ReductionProperties {
    /// `psi_I(x, t xi) = psi_I(x, xi) / |t|` for `t` in {-2, 1/2, 3}.
    pub homogeneity: f64,
    /// `<xi, d_x> psi_I = 0`.
    pub transport: f64,
    /// `J_ij psi_I = 0`, worst pair `i < j`.
    pub john: f64,
}

impl ReductionProperties {
    pub fn max(&self) -> f64 {
        self.homogeneity.max(self.transport).max(self.john)
    }
}

pub fn check_reduction_properties(psi: &TransformRep, points: &[(Vec<f64>, Vec<f64>)]) -> Result<ReductionProperties> {
    let n = psi.dim();
    let compiled = psi.compile();
    let mut homogeneity: f64 = 0.0;
    for (x, xi) in points {
        let base = compiled.evaluate_detailed(x, xi)?;
        for t in [-2.0f64, 0.5, 3.0] {
            let scaled: Vec<f64> = xi.iter().map(|v| v * t).collect();
            let v = compiled.evaluate_detailed(x, &scaled)?;
            let scale = 1f64.max(base.magnitude / t.abs()).max(v.magnitude);
            homogeneity = homogeneity.max((v.value - base.value / t.abs()).norm() / scale);
        }
    }
    let transport = max_relative_value(&psi.transport()?.compile(), points)?;
    let mut john: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            john = john.max(max_relative_value(&john_apply_exact(psi, i, j)?.compile(), points)?);
        }
    }
    Ok(ReductionProperties {
        homogeneity,
        transport,
        john,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RecoveryReport {
    /// `psi_I = J^0 f_I` for every sorted `I`.
    pub component_recovery: f64,
    /// `d_x^k J^k f = sum_I xi^I d_xi^k psi_I` over all `k <= m` and sorted
    /// derivative index tuples.
    pub contracted_derivatives: f64,
    /// `d_x^k J^k f = sigma sum_p a(m,k,p) d^k psi^p / dx^{j_1..j_p} dxi^{j_{p+1}..j_k}`.
    pub coefficient_expansion: f64,
    /// `a(m,k,p)` equals 1 for `p = k` and 0 below, exactly.
    pub coefficients_collapse: bool,
    /// Lift of `I^k f` against `J^k f` off the manifold.
    pub lift_agreement: f64,
}

impl RecoveryReport {
    pub fn max(&self) -> f64 {
        self.component_recovery
            .max(self.contracted_derivatives)
            .max(self.coefficient_expansion)
            .max(self.lift_agreement)
    }
}

/// Verifies that the reduction recovers the field's transforms.
pub fn check_recovery(f: &GaussField, points: &[(Vec<f64>, Vec<f64>)]) -> Result<RecoveryReport> {
    let (m, n) = (f.rank(), f.dim());
    let tuple = transform_tuple(f);
    let targets = multi_indices(m, n);
    let reduced: Vec<TransformRep> = targets
        .iter()
        .map(|idx| reduce_via_transport(&tuple[m], idx.as_slice()))
        .collect::<Result<_>>()?;

    let mut component_recovery: f64 = 0.0;
    for (idx, psi) in targets.iter().zip(&reduced) {
        let j0 = TransformRep::transform(0, &f.component_field(idx)).compile();
        component_recovery = component_recovery.max(max_relative_difference(&psi.compile(), &j0, points)?);
    }

    let mut contracted_derivatives: f64 = 0.0;
    let mut coefficient_expansion: f64 = 0.0;
    let mut coefficients_collapse = true;
    for k in 0..=m {
        let coeffs: Vec<f64> = (0..=k)
            .map(|p| {
                let a = coefficient_a(m, k, p)?;
                let expected = if p == k { 1 } else { 0 };
                if a != num_rational::BigRational::from_integer(expected.into()) {
                    coefficients_collapse = false;
                }
                Ok(a.to_f64().unwrap_or(f64::NAN))
            })
            .collect::<Result<_>>()?;
        for dirs in multi_indices(k, n) {
            let dirs = dirs.as_slice();
            let lhs = tuple[k].derive(dirs, &[])?.compile();

            let xi_derived: Vec<CompiledRep> = reduced
                .iter()
                .map(|psi| psi.derive(&[], dirs).map(|r| r.compile()))
                .collect::<Result<_>>()?;

            let expansion = expansion_rep(&tuple, dirs, &coeffs)?.compile();
            coefficient_expansion = coefficient_expansion.max(max_relative_difference(&lhs, &expansion, points)?);

            for (x, xi) in points {
                let a = lhs.evaluate_detailed(x, xi)?;
                let mut sum = Complex64::new(0.0, 0.0);
                let mut mag = a.magnitude;
                for (idx, rep) in targets.iter().zip(&xi_derived) {
                    let w = idx.multiplicity() as f64 * idx.monomial(xi);
                    let e = rep.evaluate_detailed(x, xi)?;
                    sum += e.value * w;
                    mag = mag.max(e.magnitude * w.abs());
                }
                contracted_derivatives = contracted_derivatives.max((a.value - sum).norm() / mag.max(1.0));
            }
        }
    }

    let data = MomentumDataSet::from_field(f);
    let mut lift_agreement: f64 = 0.0;
    for (k, rep) in tuple.iter().enumerate() {
        let compiled = rep.compile();
        for (x, xi) in points {
            let a = data.lift_psi(k, x, xi)?;
            let b = compiled.evaluate_detailed(x, xi)?;
            lift_agreement = lift_agreement.max((a - b.value).norm() / b.magnitude.max(1.0));
        }
    }

    Ok(RecoveryReport {
        component_recovery,
        contracted_derivatives,
        coefficient_expansion,
        coefficients_collapse,
        lift_agreement,
    })
}

/// `sigma(j) sum_p a_p d^k psi^p / dx^{j_1..j_p} dxi^{j_{p+1}..j_k}` as one rep.
fn expansion_rep(tuple: &[TransformRep], dirs: &[usize], coeffs: &[f64]) -> Result<TransformRep> {
    let patterns = symmetrized_patterns(
        dirs,
        |p| coeffs[p],
        |p, xs, xis| Pattern {
            source: p,
            transport: 0,
            xs,
            xis,
        },
    );
    let refs: Vec<&TransformRep> = tuple.iter().collect();
    assemble(&refs, patterns)
}

/// `d^m/dxi^{j} <xi, d_x>^{m+1} psi^m`, which must vanish; the symmetrized
/// transport collapse identity turns `<xi,d_x> psi_I` into a multiple of it.
pub fn collapse_residual(psi_m: &TransformRep, target: &MultiIndex, points: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
    let m = target.rank();
    let mut rep = psi_m.clone();
    for _ in 0..=m {
        rep = rep.transport()?;
    }
    max_relative_value(&rep.derive(&[], target.as_slice())?.compile(), points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::johnop::sample_points;

    #[test]
    fn rank_zero_is_identity() {
        let f = GaussField::random(0, 3, 1, 3).unwrap();
        let psi0 = TransformRep::transform(0, &f);
        let pts = sample_points(3, 10, 0);
        let a = reduce_via_transport(&psi0, &[]).unwrap().compile();
        let b = reduce_via_tuple(std::slice::from_ref(&psi0), &[]).unwrap().compile();
        assert!(max_relative_difference(&a, &psi0.compile(), &pts).unwrap() < 1e-14);
        assert!(max_relative_difference(&b, &psi0.compile(), &pts).unwrap() < 1e-14);
    }

    #[test]
    fn rank_one_matches_hand_expansion() {
        let f = GaussField::random(1, 3, 2, 2).unwrap();
        let tuple = transform_tuple(&f);
        let pts = sample_points(3, 10, 1);
        for i in 0..3 {
            let via_transport = reduce_via_transport(&tuple[1], &[i]).unwrap().compile();
            let hand = tuple[0]
                .derive_xi(i)
                .unwrap()
                .add_scaled(&tuple[1].derive_x(i).unwrap(), Complex64::new(-1.0, 0.0))
                .unwrap()
                .compile();
            assert!(max_relative_difference(&via_transport, &hand, &pts).unwrap() < 1e-11);
        }
    }

    #[test]
    fn permuted_targets_agree() {
        let f = GaussField::random(2, 3, 3, 2).unwrap();
        let psi = TransformRep::transform(2, &f);
        let pts = sample_points(3, 10, 2);
        let a = reduce_via_transport(&psi, &[0, 2]).unwrap().compile();
        let b = reduce_via_transport(&psi, &[2, 0]).unwrap().compile();
        assert!(max_relative_difference(&a, &b, &pts).unwrap() < 1e-11);
    }

    #[test]
    fn both_constructions_agree() {
        let pts = sample_points(3, 50, 3);
        for m in 0..=2 {
            let f = GaussField::random(m, 3, 10 + m as u64, 2).unwrap();
            let tuple = transform_tuple(&f);
            for idx in multi_indices(m, 3) {
                let a = reduce_via_transport(&tuple[m], idx.as_slice()).unwrap().compile();
                let b = reduce_via_tuple(&tuple, idx.as_slice()).unwrap().compile();
                assert!(max_relative_difference(&a, &b, &pts).unwrap() < 1e-10, "m={m} {idx:?}");
            }
        }
    }

    #[test]
    fn reduction_properties_hold() {
        let pts = sample_points(3, 10, 4);
        let f = GaussField::random(2, 3, 20, 2).unwrap();
        let psi = TransformRep::transform(2, &f);
        for idx in [vec![0, 0], vec![0, 1], vec![1, 2]] {
            let reduced = reduce_via_transport(&psi, &idx).unwrap();
            let props = check_reduction_properties(&reduced, &pts).unwrap();
            assert!(props.homogeneity < 1e-10, "{props:?}");
            assert!(props.transport < 1e-10, "{props:?}");
            assert!(props.john < 1e-9, "{props:?}");
            assert!(collapse_residual(&psi, &MultiIndex::new(idx), &pts).unwrap() < 1e-10);
        }
    }

    /// Reducing data that is not a transform (here `J^{1,2} f` in place of
    /// `J^{2,2} f`) gives functions that are not John-annihilated.
    #[test]
    fn wrong_input_fails_properties() {
        let pts = sample_points(3, 10, 5);
        let f = GaussField::random(2, 3, 21, 2).unwrap();
        let wrong = TransformRep::transform(1, &f);
        let reduced = reduce_via_transport(&wrong, &[0, 1]).unwrap();
        let props = check_reduction_properties(&reduced, &pts).unwrap();
        assert!(props.max() > 1e-3, "{props:?}");
    }

    #[test]
    fn recovery_identities() {
        let pts = sample_points(3, 12, 6);
        for m in 0..=2 {
            let f = GaussField::random(m, 3, 30 + m as u64, 2).unwrap();
            let r = check_recovery(&f, &pts).unwrap();
            assert!(r.coefficients_collapse);
            assert!(r.max() < 1e-9, "m={m}: {r:?}");
        }
    }

    #[test]
    fn target_validation() {
        let f = GaussField::random(2, 3, 1, 1).unwrap();
        let psi = TransformRep::transform(2, &f);
        assert!(reduce_via_transport(&psi, &[0, 3]).is_err());
        assert!(reduce_via_tuple(&transform_tuple(&f), &[0]).is_err());
        assert_eq!(permutations(3).len(), 6);
    }
}
