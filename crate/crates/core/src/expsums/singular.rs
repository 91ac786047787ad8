//! The truncated singular series.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sums::ramanujan;
use crate::arith::{primes_up_to, rem};
use crate::congruence::{orbit_mod_q, DEFAULT_CLOSURE_CAP};
use crate::descartes::Quadruple;
use crate::error::{invalid, Result};
use crate::orbit::validate_root;

/// Arguments of the truncated Euler product.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SingularParams {
    pub n: i64,
    /// Prime cutoff `P`.
    pub p_max: u64,
    /// Exponent depth `K` for `p ≥ 5`; see [`depth_cap`].
    pub k: u32,
    pub root: Quadruple<i64>,
}

/// Exponent used at `p`: the quotients stabilise at 8 and at 3, so those
/// depths are exact there; other primes use `k`.
pub fn depth_cap(p: u64, k: u32) -> u32 {
    match p {
        2 => 3,
        3 => 1,
        _ => k,
    }
}

/// Distribution of orbit entries mod `p^K` for one prime.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalFactor {
    pub p: u64,
    pub depth: u32,
    /// `p^depth`.
    pub modulus: u64,
    /// Occurrences of each residue among all four entries of the orbit.
    pub counts: Vec<u64>,
    pub total: u64,
}

impl LocalFactor {
    pub fn new(root: &Quadruple<i64>, p: u64, depth: u32, cap: u64) -> Result<Self> {
        let modulus = p.pow(depth);
        if modulus > u32::MAX as u64 {
            return invalid(format!("{p}^{depth} too large"));
        }
        let mut counts = vec![0u64; modulus as usize];
        let orbit = orbit_mod_q(root, modulus as u32, cap)?;
        for v in &orbit {
            for &x in v {
                counts[x as usize] += 1;
            }
        }
        Ok(Self { p, depth, modulus, counts, total: 4 * orbit.len() as u64 })
    }

    /// `1 + Σ_{k ≤ K} avg c_{p^k}(x − n)`, collapsed to `p^K·Prob(x ≡ n mod p^K)`.
    pub fn value(&self, n: i64) -> f64 {
        let c = self.counts[rem(n, self.modulus as i64) as usize];
        self.modulus as f64 * c as f64 / self.total as f64
    }

    /// The same factor summed term by term over Ramanujan sums.
    pub fn value_by_ramanujan(&self, n: i64) -> Result<f64> {
        let mut acc = 1.0;
        for k in 1..=self.depth {
            let pk = self.p.pow(k);
            let mut reduced = vec![0u64; pk as usize];
            for (x, &c) in self.counts.iter().enumerate() {
                reduced[x % pk as usize] += c;
            }
            let mut s = 0.0;
            for (x, &c) in reduced.iter().enumerate() {
                if c != 0 {
                    s += c as f64 * ramanujan(pk, x as i64 - n)? as f64;
                }
            }
            acc += s / self.total as f64;
        }
        Ok(acc)
    }
}

/// Precomputed local factors for repeated evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularSeries {
    pub root: Quadruple<i64>,
    pub p_max: u64,
    pub k: u32,
    pub factors: Vec<LocalFactor>,
}

impl SingularSeries {
    pub fn new(root: &Quadruple<i64>, p_max: u64, k: u32) -> Result<Self> {
        if p_max < 1 || k < 1 {
            return invalid("P and K must be at least 1");
        }
        validate_root(root)?;
        let factors = primes_up_to(p_max)
            .into_par_iter()
            .map(|p| LocalFactor::new(root, p, depth_cap(p, k), DEFAULT_CLOSURE_CAP))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { root: root.clone(), p_max, k, factors })
    }

    pub fn value(&self, n: i64) -> f64 {
        self.factors.iter().map(|f| f.value(n)).product()
    }

    /// Each prime's factor at `n`.
    pub fn factors_at(&self, n: i64) -> BTreeMap<u64, f64> {
        self.factors.iter().map(|f| (f.p, f.value(n))).collect()
    }
}

/// `𝔖(n)` truncated at `p ≤ P`, `k ≤ K(p)`.
pub fn singular_series(sp: &SingularParams) -> Result<f64> {
    Ok(SingularSeries::new(&sp.root, sp.p_max, sp.k)?.value(sp.n))
}

/// `max_p |factor_p(n) − 1|·p²` over primes in `[lo, hi]` (depth 1).
pub fn local_factor_deviation(root: &Quadruple<i64>, n: i64, lo: u64, hi: u64) -> Result<Vec<(u64, f64)>> {
    primes_up_to(hi)
        .into_par_iter()
        .filter(|&p| p >= lo)
        .map(|p| {
            let f = LocalFactor::new(root, p, 1, DEFAULT_CLOSURE_CAP)?;
            Ok((p, f.value(n)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::congruence::AdmissibilityTable;
    use crate::descartes::V0;

    fn v0() -> Quadruple<i64> {
        Quadruple::from_i64(V0)
    }

    #[test]
    fn zero_exactly_off_admissible_classes() {
        let s = SingularSeries::new(&v0(), 13, 1).unwrap();
        let adm = AdmissibilityTable::new(&v0()).unwrap();
        for n in 1..=2000 {
            let v = s.value(n);
            assert!(v >= 0.0);
            assert_eq!(v == 0.0, !adm.is_admissible(n), "n = {n}");
        }
        assert_eq!(s.value(5), 0.0);
        assert!(s.value(96) > 0.0);
    }

    #[test]
    fn telescoped_factor_matches_ramanujan_sum() {
        for (p, k) in [(2, 3), (3, 1), (5, 2), (7, 1)] {
            let f = LocalFactor::new(&v0(), p, k, DEFAULT_CLOSURE_CAP).unwrap();
            for n in [0, 1, 5, 13, 96, 1000] {
                assert!((f.value(n) - f.value_by_ramanujan(n).unwrap()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn deeper_levels_add_nothing_at_two_and_three() {
        let a = LocalFactor::new(&v0(), 2, 3, DEFAULT_CLOSURE_CAP).unwrap();
        let b = LocalFactor::new(&v0(), 2, 5, DEFAULT_CLOSURE_CAP).unwrap();
        let c = LocalFactor::new(&v0(), 3, 1, DEFAULT_CLOSURE_CAP).unwrap();
        let d = LocalFactor::new(&v0(), 3, 3, DEFAULT_CLOSURE_CAP).unwrap();
        for n in 0..200 {
            assert!((a.value(n) - b.value(n)).abs() < 1e-9, "n = {n}");
            assert!((c.value(n) - d.value(n)).abs() < 1e-9, "n = {n}");
        }
    }

    #[test]
    fn large_prime_factors_approach_one() {
        let dev = local_factor_deviation(&v0(), 96, 5, 50).unwrap();
        assert_eq!(dev.first().unwrap().0, 5);
        for (p, v) in dev {
            assert!((v - 1.0).abs() < 2.0 / p as f64, "p = {p}: {v}");
        }
    }
}
