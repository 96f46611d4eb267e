//! Homogeneous extension of data given on `TS^(n-1)` to all of
//! `R^n x (R^n \ 0)`, and checks of the structural properties the extension
//! must have when the data are momentum ray transforms.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{check_dim, domain, Result};
use crate::gaussfield::GaussField;
use crate::symtensor::binomial_f64;
use crate::weyl::{Polynomial, WeylElement};
use crate::xray::{TSPoint, TransformRep};

/// A function on `TS^(n-1)`.
pub type Evaluator = Arc<dyn Fn(&TSPoint) -> Result<Complex64> + Send + Sync>;

/// The tuple `(phi^0, ..., phi^m)` of functions on `TS^(n-1)`.
#[derive(Clone)]
pub struct MomentumDataSet {
    m: usize,
    n: usize,
    evaluators: Vec<Evaluator>,
}

impl std::fmt::Debug for MomentumDataSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "MomentumDataSet(m={}, n={})", self.m, self.n)
    }
}

impl MomentumDataSet {
    pub fn new(m: usize, n: usize, evaluators: Vec<Evaluator>) -> Result<Self> {
        check_dim(m + 1, evaluators.len())?;
        Ok(MomentumDataSet { m, n, evaluators })
    }

    /// `phi^k = I^k f`, evaluated exactly.
    pub fn from_field(f: &GaussField) -> Self {
        let evaluators = (0..=f.rank())
            .map(|k| {
                let rep = Arc::new(TransformRep::transform(k, f).compile());
                Arc::new(move |p: &TSPoint| rep.evaluate(p.x(), p.xi())) as Evaluator
            })
            .collect();
        MomentumDataSet {
            m: f.rank(),
            n: f.dim(),
            evaluators,
        }
    }

    pub fn rank(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Replaces `phi^k`.
    pub fn with_evaluator(mut self, k: usize, e: Evaluator) -> Result<Self> {
        if k > self.m {
            return Err(domain(format!("no component phi^{k} in rank-{} data", self.m)));
        }
        self.evaluators[k] = e;
        Ok(self)
    }

    pub fn phi(&self, k: usize, point: &TSPoint) -> Result<Complex64> {
        let e = self
            .evaluators
            .get(k)
            .ok_or_else(|| domain(format!("no component phi^{k} in rank-{} data", self.m)))?;
        e(point)
    }

    /// `psi^k(x, xi) = |xi|^{m-2k-1} sum_l (-1)^{k-l} C(k,l) |xi|^l <xi,x>^{k-l}
    ///  phi^l(x - <xi,x> xi/|xi|^2, xi/|xi|)`.
    pub fn lift_psi(&self, k: usize, x: &[f64], xi: &[f64]) -> Result<Complex64> {
        if k > self.m {
            return Err(domain(format!("lift index {k} exceeds rank {}", self.m)));
        }
        check_dim(self.n, x.len())?;
        check_dim(self.n, xi.len())?;
        let xi2: f64 = xi.iter().map(|v| v * v).sum();
        if xi2 == 0.0 {
            return Err(domain("lift evaluated at xi = 0"));
        }
        let len = xi2.sqrt();
        let along: f64 = x.iter().zip(xi).map(|(a, b)| a * b).sum();
        let base_x: Vec<f64> = x.iter().zip(xi).map(|(a, b)| a - along * b / xi2).collect();
        let unit: Vec<f64> = xi.iter().map(|v| v / len).collect();
        let point = TSPoint::new(base_x, unit)?;
        let mut sum = Complex64::new(0.0, 0.0);
        for l in 0..=k {
            let sign = if (k - l).is_multiple_of(2) { 1.0 } else { -1.0 };
            let w = sign * binomial_f64(k, l) * len.powi(l as i32) * along.powi((k - l) as i32);
            if w != 0.0 {
                sum += self.phi(l, &point)? * w;
            }
        }
        Ok(sum * len.powi(self.m as i32 - 2 * k as i32 - 1))
    }

    /// Largest `|phi^k(x,-xi) - (-1)^{m-k} phi^k(x,xi)|` over `k` and the
    /// points, relative to `max(1, max |phi|)`.
    pub fn evenness_residual(&self, points: &[TSPoint]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 1.0;
        for k in 0..=self.m {
            let sign = if (self.m - k).is_multiple_of(2) { 1.0 } else { -1.0 };
            for p in points {
                let neg = TSPoint::new(p.x().to_vec(), p.xi().iter().map(|v| -v).collect())?;
                let a = self.phi(k, p)?;
                let b = self.phi(k, &neg)?;
                scale = scale.max(a.norm()).max(b.norm());
                worst = worst.max((b - a * sign).norm());
            }
        }
        Ok(worst / scale)
    }

    /// `psi^k(x, t xi) = t^{m-k} / |t| psi^k(x, xi)`, relative residual.
    pub fn check_homogeneity(&self, k: usize, points: &[(Vec<f64>, Vec<f64>)], ts: &[f64]) -> Result<f64> {
        if ts.contains(&0.0) {
            return Err(domain("homogeneity factor t = 0"));
        }
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 1.0;
        for (x, xi) in points {
            let base = self.lift_psi(k, x, xi)?;
            scale = scale.max(base.norm());
            for &t in ts {
                let scaled: Vec<f64> = xi.iter().map(|v| v * t).collect();
                let v = self.lift_psi(k, x, &scaled)?;
                scale = scale.max(v.norm());
                let factor = t.powi(self.m as i32 - k as i32) / t.abs();
                worst = worst.max((v - base * factor).norm());
            }
        }
        Ok(worst / scale)
    }

    /// `psi^k(x + t xi, xi) = sum_l C(k,l) (-t)^{k-l} psi^l(x, xi)`, relative residual.
    pub fn check_shift(&self, k: usize, points: &[(Vec<f64>, Vec<f64>)], ts: &[f64]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 1.0;
        for (x, xi) in points {
            let lower: Vec<Complex64> = (0..=k)
                .map(|l| self.lift_psi(l, x, xi))
                .collect::<Result<_>>()?;
            for v in &lower {
                scale = scale.max(v.norm());
            }
            for &t in ts {
                let shifted: Vec<f64> = x.iter().zip(xi).map(|(a, b)| a + t * b).collect();
                let lhs = self.lift_psi(k, &shifted, xi)?;
                let rhs: Complex64 = (0..=k)
                    .map(|l| lower[l] * (binomial_f64(k, l) * (-t).powi((k - l) as i32)))
                    .sum();
                scale = scale.max(lhs.norm());
                worst = worst.max((lhs - rhs).norm());
            }
        }
        Ok(worst / scale)
    }
}

/// Applies the tangent operators `X_i`, `Xi_i` to the constraints
/// `|xi|^2 - 1` and `<x, xi>` and returns the largest absolute value of the
/// results at the given points of `TS^(n-1)`.
pub fn tangency_check(n: usize, i: usize, points: &[TSPoint]) -> Result<f64> {
    if i >= n {
        return Err(domain(format!("direction {i} out of range for n={n}")));
    }
    let constraints = [Polynomial::sphere_constraint(n), Polynomial::tangency_constraint(n)];
    let ops = [WeylElement::tangent_x(n, i), WeylElement::tangent_xi(n, i)];
    let mut worst: f64 = 0.0;
    for op in &ops {
        for c in &constraints {
            let image = op.act(c)?;
            for p in points {
                worst = worst.max(image.evaluate(p.x(), p.xi())?.abs());
            }
        }
    }
    Ok(worst)
}

/// Relative residual of `<xi,d_x>^l J^k f = (-1)^l C(k,l) l! J^{k-l} f`
/// (zero right side for `l > k`), on the exact derivative backend.
pub fn transport_ladder_residual(
    f: &GaussField,
    k: usize,
    l: usize,
    points: &[(Vec<f64>, Vec<f64>)],
) -> Result<f64> {
    let mut lhs = TransformRep::transform(k, f);
    for _ in 0..l {
        lhs = lhs.transport()?;
    }
    let lhs = lhs.compile();
    let rhs = if l <= k {
        let sign = if l.is_multiple_of(2) { 1.0 } else { -1.0 };
        let c = sign * binomial_f64(k, l) * (1..=l).product::<usize>() as f64;
        Some((TransformRep::transform(k - l, f).compile(), c))
    } else {
        None
    };
    let mut worst: f64 = 0.0;
    for (x, xi) in points {
        let a = lhs.evaluate_detailed(x, xi)?;
        let b = match &rhs {
            Some((rep, c)) => rep.evaluate(x, xi)? * *c,
            None => Complex64::new(0.0, 0.0),
        };
        let scale = 1f64.max(a.magnitude).max(b.norm());
        worst = worst.max((a.value - b).norm() / scale);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xray::random_line_point;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn line_points(n: usize, count: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| random_line_point(n, 1.0, &mut rng)).collect()
    }

    fn ts_points(n: usize, count: usize, seed: u64) -> Vec<TSPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| TSPoint::random(n, 1.0, &mut rng)).collect()
    }

    #[test]
    fn restriction_returns_data_exactly() {
        let f = GaussField::random(2, 3, 1, 3).unwrap();
        let data = MomentumDataSet::from_field(&f);
        // axis-aligned directions make <x, xi> and |xi| - 1 exactly zero
        for (axis, x) in [(0usize, [0.0, 0.4, -0.3]), (1, [0.2, 0.0, 0.7]), (2, [-0.5, 0.1, 0.0])] {
            let mut xi = [0.0; 3];
            xi[axis] = 1.0;
            let p = TSPoint::new(x.to_vec(), xi.to_vec()).unwrap();
            for k in 0..=2 {
                assert_eq!(data.lift_psi(k, &x, &xi).unwrap(), data.phi(k, &p).unwrap());
            }
        }
        for p in ts_points(3, 20, 2) {
            for k in 0..=2 {
                let a = data.lift_psi(k, p.x(), p.xi()).unwrap();
                let b = data.phi(k, &p).unwrap();
                assert!((a - b).norm() <= 1e-14 * b.norm().max(1.0));
            }
        }
    }

    #[test]
    fn scalar_lift_halves_at_double_direction() {
        let f = GaussField::random(0, 3, 3, 2).unwrap();
        let data = MomentumDataSet::from_field(&f);
        for p in ts_points(3, 10, 4) {
            let xi2: Vec<f64> = p.xi().iter().map(|v| 2.0 * v).collect();
            let a = data.lift_psi(0, p.x(), &xi2).unwrap();
            let b = data.lift_psi(0, p.x(), p.xi()).unwrap();
            assert!((a - 0.5 * b).norm() <= 1e-15 * b.norm().max(1.0));
        }
    }

    #[test]
    fn lift_equals_transform_off_manifold() {
        for m in 0..=2 {
            let f = GaussField::random(m, 3, 10 + m as u64, 3).unwrap();
            let data = MomentumDataSet::from_field(&f);
            for k in 0..=m {
                let rep = TransformRep::transform(k, &f).compile();
                for (x, xi) in line_points(3, 50, 5) {
                    let a = data.lift_psi(k, &x, &xi).unwrap();
                    let b = rep.evaluate(&x, &xi).unwrap();
                    assert!((a - b).norm() <= 1e-11 * b.norm().max(1.0), "m={m} k={k}");
                }
            }
        }
    }

    #[test]
    fn homogeneity_and_shift_of_transform_data() {
        let f = GaussField::random(2, 3, 20, 3).unwrap();
        let data = MomentumDataSet::from_field(&f);
        let pts = line_points(3, 10, 6);
        for k in 0..=2 {
            assert_eq!(data.check_homogeneity(k, &pts, &[1.0]).unwrap(), 0.0);
            assert!(data.check_homogeneity(k, &pts, &[-2.0, -1.0, 0.5, 3.0]).unwrap() < 1e-11);
            assert_eq!(data.check_shift(k, &pts, &[0.0]).unwrap(), 0.0);
            assert!(data.check_shift(k, &pts, &[1.0, -1.0, 0.3, -0.3]).unwrap() < 1e-11);
        }
        assert!(data.check_homogeneity(0, &pts, &[0.0]).is_err());
        assert!(data.evenness_residual(&ts_points(3, 20, 7)).unwrap() < 1e-12);
    }

    #[test]
    fn shift_for_k0_is_translation_invariance() {
        let f = GaussField::random(1, 3, 21, 2).unwrap();
        let data = MomentumDataSet::from_field(&f);
        for (x, xi) in line_points(3, 5, 8) {
            let moved: Vec<f64> = x.iter().zip(&xi).map(|(a, b)| a + 0.7 * b).collect();
            let a = data.lift_psi(0, &moved, &xi).unwrap();
            let b = data.lift_psi(0, &x, &xi).unwrap();
            assert!((a - b).norm() <= 1e-12 * b.norm().max(1.0));
        }
    }

    /// For `m = 1`, `phi^0` is odd in `xi`; replacing it by `|phi^0|` destroys
    /// the parity the lift relies on and homogeneity under negative `t` fails.
    #[test]
    fn parity_violation_breaks_homogeneity() {
        let f = GaussField::random(1, 3, 22, 3).unwrap();
        let data = MomentumDataSet::from_field(&f);
        let orig = data.clone();
        let broken: Evaluator = Arc::new(move |p: &TSPoint| Ok(Complex64::new(orig.phi(0, p)?.norm(), 0.0)));
        let data = data.with_evaluator(0, broken).unwrap();
        let pts = line_points(3, 10, 9);
        assert!(data.check_homogeneity(0, &pts, &[-2.0, -1.0]).unwrap() > 1e-3);
        assert!(data.evenness_residual(&ts_points(3, 10, 10)).unwrap() > 1e-3);
    }

    #[test]
    fn tangent_operators_vanish_on_constraints() {
        let pts = ts_points(3, 20, 11);
        for i in 0..3 {
            assert!(tangency_check(3, i, &pts).unwrap() < 1e-14);
        }
        assert!(tangency_check(3, 3, &pts).is_err());
    }

    #[test]
    fn transport_ladder() {
        let pts = line_points(3, 10, 12);
        for m in 0..=2 {
            let f = GaussField::random(m, 3, 30 + m as u64, 2).unwrap();
            for k in 0..=m {
                for l in 0..=k + 1 {
                    let r = transport_ladder_residual(&f, k, l, &pts).unwrap();
                    assert!(r < 1e-10, "m={m} k={k} l={l}: {r}");
                }
            }
        }
    }
}
