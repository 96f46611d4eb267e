//! Gauss-Hermite rules for the weight `exp(-s^2)` on the real line.
//!
//! An `N`-node rule integrates `poly(s) * exp(-s^2)` exactly whenever the
//! polynomial degree is at most `2N - 1`. Rules are built on first use and
//! cached for the life of the process.

use std::sync::OnceLock;

use crate::error::{domain, Result};

/// Largest supported node count.
pub const MAX_NODES: usize = 256;

#[derive(Debug, Clone)]
pub struct HermiteRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

static CACHE: [OnceLock<HermiteRule>; MAX_NODES + 1] = [const { OnceLock::new() }; MAX_NODES + 1];

/// Cached `n`-node rule.
pub fn hermite_rule(n: usize) -> Result<&'static HermiteRule> {
    if n == 0 || n > MAX_NODES {
        return Err(domain(format!("Gauss-Hermite node count {n} outside 1..={MAX_NODES}")));
    }
    Ok(CACHE[n].get_or_init(|| build_rule(n)))
}

/// Smallest node count integrating a degree-`deg` polynomial exactly.
pub fn nodes_for_degree(deg: usize) -> usize {
    (deg + 2).div_ceil(2)
}

/// Roots by Newton iteration on the orthonormal Hermite recurrence, started
/// from the usual asymptotic guesses.
fn build_rule(n: usize) -> HermiteRule {
    const PIM4: f64 = 0.751_125_544_464_942_5; // pi^(-1/4)
    let nf = n as f64;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    let mut z = 0.0f64;
    for i in 0..half {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    HermiteRule { nodes, weights }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// `int s^k exp(-s^2) ds` in closed form: `Gamma((k+1)/2)` for even `k`.
    fn moment(k: u32) -> f64 {
        if k % 2 == 1 {
            return 0.0;
        }
        // Gamma(j + 1/2) = (2j-1)!! / 2^j * sqrt(pi)
        let j = k / 2;
        let mut v = PI.sqrt();
        for i in 0..j {
            v *= (2 * i + 1) as f64 / 2.0;
        }
        v
    }

    #[test]
    fn rules_are_exact_to_degree_2n_minus_1() {
        for n in 1..=40 {
            let rule = hermite_rule(n).unwrap();
            for k in 0..(2 * n as u32) {
                let q: f64 = rule
                    .nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(s, w)| w * s.powi(k as i32))
                    .sum();
                let exact = moment(k);
                let scale = moment(k + k % 2).max(1.0);
                assert!(
                    (q - exact).abs() <= 1e-13 * scale,
                    "n={n} k={k}: {q} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn nodes_sorted_and_symmetric() {
        let rule = hermite_rule(17).unwrap();
        assert!(rule.nodes.windows(2).all(|w| w[0] > w[1]));
        for i in 0..17 {
            assert_eq!(rule.nodes[i], -rule.nodes[16 - i]);
        }
    }

    #[test]
    fn degree_to_nodes() {
        assert_eq!(nodes_for_degree(0), 1);
        assert_eq!(nodes_for_degree(1), 2);
        assert_eq!(nodes_for_degree(2), 2);
        assert_eq!(nodes_for_degree(3), 3);
        assert!(hermite_rule(0).is_err());
    }
}
