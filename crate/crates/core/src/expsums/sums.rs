//! Complete exponential sums attached to binary quadratic forms.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::arith::{divisors, euler_phi, gcd, inv_mod, jacobi, mobius, rem, rem128};
use crate::error::{invalid, Error, Result};
use crate::forms::ShiftedForm;

/// Arguments of `S_f(q₀, r; n, m)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SfParams {
    pub q0: u64,
    pub r: i64,
    pub n: i64,
    pub m: i64,
    pub form: ShiftedForm<i64>,
}

impl SfParams {
    pub fn new(q0: u64, r: i64, n: i64, m: i64, form: ShiftedForm<i64>) -> Result<Self> {
        let p = Self { q0, r, n, m, form };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if self.q0 == 0 {
            return invalid("q0 must be positive");
        }
        if self.q0 > i32::MAX as u64 {
            return invalid(format!("q0 = {} too large", self.q0));
        }
        if gcd(self.r, self.q0 as i64) != 1 {
            return invalid(format!("r = {} is not a unit mod {}", self.r, self.q0));
        }
        Ok(())
    }
}

/// `e(j/q)` for `j` in `0..q`.
pub fn roots_of_unity(q: u64) -> Vec<Complex64> {
    (0..q).map(|j| Complex64::from_polar(1.0, TAU * j as f64 / q as f64)).collect()
}

/// Compensated complex summation.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Kahan {
    sum: Complex64,
    carry: Complex64,
}

impl Kahan {
    pub(crate) fn add(&mut self, x: Complex64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub(crate) fn total(&self) -> Complex64 {
        self.sum
    }
}

/// Weighted sum `Σ counts[j]·e(j/q)`.
fn sum_by_phase(counts: &[u64], roots: &[Complex64]) -> Complex64 {
    let mut acc = Kahan::default();
    for (c, z) in counts.iter().zip(roots) {
        if *c != 0 {
            acc.add(z * *c as f64);
        }
    }
    acc.total()
}

/// `S_f` straight from the double sum over `k, ℓ mod q₀`.
pub fn sf_direct(p: &SfParams) -> Result<Complex64> {
    p.validate()?;
    let q = p.q0 as i64;
    let (a, b2, c) = (rem(p.form.a, q), rem(2 * p.form.b, q), rem(p.form.c, q));
    let (r, n, m) = (rem(p.r, q), rem(p.n, q), rem(p.m, q));
    let mut counts = vec![0u64; q as usize];
    for k in 0..q {
        let ak = a * k % q * k % q;
        let bk = b2 * k % q;
        let nk = n * k % q;
        for l in 0..q {
            let f = (ak + bk * l % q + c * l % q * l) % q;
            let phase = (r * f % q + nk + m * l) % q;
            counts[phase as usize] += 1;
        }
    }
    Ok(sum_by_phase(&counts, &roots_of_unity(p.q0)) / (q as f64 * q as f64))
}

/// All `S_f(q₀, r; n, m)` for `n, m mod q₀`, row-major in `n`, via a 2-D FFT.
pub fn sf_direct_table(form: &ShiftedForm<i64>, q0: u64, r: i64) -> Result<Vec<Complex64>> {
    SfParams::new(q0, r, 0, 0, form.clone())?;
    let q = q0 as i64;
    let roots = roots_of_unity(q0);
    let (a, b2, c, r) = (rem(form.a, q), rem(2 * form.b, q), rem(form.c, q), rem(r, q));
    let mut grid: Vec<Complex64> = (0..q * q)
        .map(|idx| {
            let (k, l) = (idx / q, idx % q);
            let f = (a * k % q * k + b2 * k % q * l + c * l % q * l) % q;
            roots[(r * f % q) as usize]
        })
        .collect();
    let fft = FftPlanner::<f64>::new().plan_fft_inverse(q0 as usize);
    for row in grid.chunks_mut(q0 as usize) {
        fft.process(row);
    }
    let mut col = vec![Complex64::default(); q0 as usize];
    for l in 0..q as usize {
        for k in 0..q as usize {
            col[k] = grid[k * q as usize + l];
        }
        fft.process(&mut col);
        for k in 0..q as usize {
            grid[k * q as usize + l] = col[k];
        }
    }
    let norm = (q * q) as f64;
    Ok(grid.into_iter().map(|z| z / norm).collect())
}

/// The gcd data `q̃₀ = (a², q₀)`, `q₁ = q₀/q̃₀`, `a₁ = a²/q̃₀`, `L = (Cn − Bm)/q̃₀`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GcdSplit {
    pub q0_tilde: i64,
    pub q1: i64,
    /// `a₁ mod q₁`.
    pub a1: i64,
    /// `None` when `nC ≢ mB mod q̃₀`.
    pub l: Option<i128>,
}

impl GcdSplit {
    pub fn new(a: i64, b: i64, c: i64, n: i64, m: i64, q0: i64) -> Self {
        let a_sq = a as i128 * a as i128;
        let q0_tilde = gcd(rem128(a_sq, q0), q0);
        let q1 = q0 / q0_tilde;
        let a1 = rem128(a_sq / q0_tilde as i128, q1);
        let lin = c as i128 * n as i128 - b as i128 * m as i128;
        let l = (lin.rem_euclid(q0_tilde as i128) == 0).then(|| lin / q0_tilde as i128);
        Self { q0_tilde, q1, a1, l }
    }
}

/// `ε_q`: 1 for `q ≡ 1 mod 4`, `i` for `q ≡ 3 mod 4`.
pub fn epsilon(q: i64) -> Complex64 {
    if q % 4 == 1 {
        Complex64::new(1.0, 0.0)
    } else {
        Complex64::new(0.0, 1.0)
    }
}

/// The first shear `k ↦ k + tℓ` making `C` a unit mod `q₀`, as
/// `(t, A, B, C, n, m)` after the change of variables.
fn unit_shear(form: &ShiftedForm<i64>, n: i64, m: i64, q0: i64) -> Option<(i64, i64, i64, i64, i64, i64)> {
    let (a, b, c) = (form.a as i128, form.b as i128, form.c as i128);
    (0..q0.max(1)).find_map(|t| {
        let t128 = t as i128;
        let c_new = rem128(a * t128 * t128 + 2 * b * t128 + c, q0);
        (gcd(c_new, q0) == 1).then(|| {
            let b_new = rem128(a * t128 + b, q0);
            (t, rem(form.a, q0), b_new, c_new, rem(n, q0), rem128(n as i128 * t128 + m as i128, q0))
        })
    })
}

/// `S_f` from its evaluation as a product of Gauss sums, for odd `q₀`.
///
/// When `C` is not a unit mod `q₀` the sum is first rewritten with the
/// least shear `k ↦ k + tℓ` that makes it one.
pub fn sf_closed(p: &SfParams) -> Result<Complex64> {
    p.validate()?;
    let q0 = p.q0 as i64;
    if q0 % 2 == 0 {
        return Err(Error::Unsupported(format!("closed form needs odd q0, got {q0}")));
    }
    let Some((_, _, b, c, n, m)) = unit_shear(&p.form, p.n, p.m, q0) else {
        return Err(Error::Unsupported(format!("form is imprimitive mod {q0}")));
    };
    let split = GcdSplit::new(p.form.shift, b, c, n, m, q0);
    let Some(l) = split.l else {
        return Ok(Complex64::new(0.0, 0.0));
    };
    let r = rem(p.r, q0);
    let rc = rem128(r as i128 * c as i128, q0);
    let q1 = split.q1;
    let inv4rc = inv_mod(4 * rc % q0, q0).expect("4rC is a unit");
    let phase0 = rem128(-(inv4rc as i128) * rem128(m as i128 * m as i128, q0) as i128, q0);
    let arc1 = rem128(split.a1 as i128 * rc as i128, q1);
    let phase1 = if q1 == 1 {
        0
    } else {
        let inv = inv_mod(4 * arc1 % q1, q1).expect("4a₁rC is a unit");
        let l_sq = rem128(rem128(l, q1) as i128 * rem128(l, q1) as i128, q1);
        rem128(-(inv as i128) * l_sq as i128, q1)
    };
    let c_bar = inv_mod(c, q0).expect("C is a unit");
    let sym = jacobi(rc, q0) * jacobi(rem128(split.a1 as i128 * r as i128 * c_bar as i128, q1.max(1)), q1.max(1));
    let mag = (split.q0_tilde as f64).sqrt() / q0 as f64;
    let e = |num: i64, den: i64| Complex64::from_polar(1.0, TAU * num as f64 / den as f64);
    Ok(epsilon(q0) * epsilon(q1) * e(phase0, q0) * e(phase1, q1) * (sym as f64 * mag))
}

/// The pair average `𝒮(q, q₀, f, f′, n, m, n′, m′; u₀)`, via [`sf_direct`].
#[allow(clippy::too_many_arguments)]
pub fn s_avg(
    q: u64,
    q0: u64,
    f: &ShiftedForm<i64>,
    fp: &ShiftedForm<i64>,
    (n, m): (i64, i64),
    (np, mp): (i64, i64),
    u0: i64,
) -> Result<Complex64> {
    if q == 0 || q0 == 0 || q % q0 != 0 {
        return invalid(format!("q0 = {q0} must divide q = {q}"));
    }
    if gcd(u0, q0 as i64) != 1 {
        return invalid(format!("u0 = {u0} is not a unit mod {q0}"));
    }
    let q0i = q0 as i64;
    let mut cache: Vec<Option<Complex64>> = vec![None; q0 as usize];
    let mut pair = |res: i64| -> Result<Complex64> {
        if let Some(z) = cache[res as usize] {
            return Ok(z);
        }
        let s = sf_direct(&SfParams::new(q0, res, n, m, f.clone())?)?;
        let sp = sf_direct(&SfParams::new(q0, res, np, mp, fp.clone())?)?;
        let z = s * sp.conj();
        cache[res as usize] = Some(z);
        Ok(z)
    };
    let roots = roots_of_unity(q);
    let shift = rem(fp.shift - f.shift, q as i64);
    let mut acc = Kahan::default();
    for r in 0..q as i64 {
        if gcd(r, q as i64) != 1 {
            continue;
        }
        let res = rem128(r as i128 * u0 as i128, q0i);
        acc.add(pair(res)? * roots[rem128(r as i128 * shift as i128, q as i64) as usize]);
    }
    Ok(acc.total())
}

/// `|𝒮|·q^{5/4} / ((q/q₀)²·((a², q₀)(a′², q₀))^{1/2}·(a − a′, q)^{1/4})`.
pub fn s_avg_bound_ratio(q: u64, q0: u64, f: &ShiftedForm<i64>, fp: &ShiftedForm<i64>, value: Complex64) -> f64 {
    let (qi, q0i) = (q as i64, q0 as i64);
    let g = |a: i64| gcd(rem128(a as i128 * a as i128, q0i), q0i) as f64;
    let d = gcd(f.shift - fp.shift, qi) as f64;
    let ratio = (q / q0) as f64;
    value.norm() * (q as f64).powf(1.25) / (ratio * ratio * (g(f.shift) * g(fp.shift)).sqrt() * d.powf(0.25))
}

/// The Kloosterman sum `Σ′_{x mod c} e_c(ax + b·x̄)`.
pub fn kloosterman(a: i64, b: i64, c: u64) -> Result<Complex64> {
    if c == 0 {
        return invalid("modulus must be positive");
    }
    let ci = c as i64;
    let mut counts = vec![0u64; c as usize];
    for x in 0..ci {
        if let Some(xb) = inv_mod(x, ci) {
            let phase = rem128(a as i128 * x as i128 + b as i128 * xb as i128, ci);
            counts[phase as usize] += 1;
        }
    }
    Ok(sum_by_phase(&counts, &roots_of_unity(c)))
}

/// `|K(a, b; c)| / (c^{3/4}·(a, b, c)^{1/4})`.
pub fn kloosterman_bound_ratio(a: i64, b: i64, c: u64) -> Result<f64> {
    let k = kloosterman(a, b, c)?;
    let g = gcd(gcd(a, b), c as i64).max(1) as f64;
    Ok(k.norm() / ((c as f64).powf(0.75) * g.powf(0.25)))
}

/// The largest Kloosterman bound ratio over `c ≤ c_max` and `a, b ∈ [0, ab_max)`.
pub fn kloosterman_bound_table(c_max: u64, ab_max: i64) -> Result<f64> {
    (1..=c_max)
        .into_par_iter()
        .map(|c| {
            let mut worst = 0f64;
            for a in 0..ab_max {
                for b in 0..ab_max {
                    worst = worst.max(kloosterman_bound_ratio(a, b, c)?);
                }
            }
            Ok(worst)
        })
        .try_reduce(|| 0.0, |x, y| Ok(x.max(y)))
}

/// The Ramanujan sum `c_q(m) = Σ_{d | (q, m)} μ(q/d)·d`.
pub fn ramanujan(q: u64, m: i64) -> Result<i64> {
    if q == 0 {
        return invalid("q must be positive");
    }
    let g = gcd(rem(m, q as i64), q as i64) as u64;
    Ok(divisors(g).into_iter().map(|d| mobius(q / d) * d as i64).sum())
}

/// `c_q(m)` summed directly over units, as a complex number.
pub fn ramanujan_direct(q: u64, m: i64) -> Complex64 {
    let qi = q as i64;
    let mut counts = vec![0u64; q as usize];
    for r in 0..qi {
        if gcd(r, qi) == 1 {
            counts[rem128(r as i128 * m as i128, qi) as usize] += 1;
        }
    }
    sum_by_phase(&counts, &roots_of_unity(q))
}

/// Number of units mod `q`, exposed for callers normalising `r`-sums.
pub fn unit_count(q: u64) -> u64 {
    euler_phi(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descartes::Quadruple;
    use crate::forms::form_of_quadruple;
    use proptest::prelude::*;

    fn id_form() -> ShiftedForm<i64> {
        ShiftedForm::new(10, 7, 17, -11)
    }

    /// Forms anchored at each circle of the root quadruple, so `a` runs over
    /// −11, 21, 24, 28.
    fn gasket_forms() -> Vec<ShiftedForm<i64>> {
        [[-11, 21, 24, 28], [21, -11, 24, 28], [24, -11, 21, 28], [28, -11, 21, 24]]
            .iter()
            .map(|v| form_of_quadruple(&Quadruple::from_i64(*v)).unwrap())
            .collect()
    }

    fn direct(q0: u64, r: i64, n: i64, m: i64, f: &ShiftedForm<i64>) -> Complex64 {
        sf_direct(&SfParams::new(q0, r, n, m, f.clone()).unwrap()).unwrap()
    }

    fn naive(q0: u64, r: i64, n: i64, m: i64, f: &ShiftedForm<i64>) -> Complex64 {
        let q = q0 as i64;
        let mut s = Complex64::default();
        for k in 0..q {
            for l in 0..q {
                let e = r * f.value(&k, &l).unwrap() + n * k + m * l;
                s += Complex64::from_polar(1.0, TAU * e as f64 / q as f64);
            }
        }
        s / (q * q) as f64
    }

    #[test]
    fn small_values() {
        assert!((direct(1, 0, 5, 7, &id_form()) - 1.0).norm() < 1e-12);
        let z = direct(3, 1, 0, 0, &id_form());
        assert!((z - Complex64::new(-1.0 / 3.0, 0.0)).norm() < 1e-12);
        let mut counts = [0; 3];
        for k in 0..3 {
            for l in 0..3 {
                counts[id_form().value(&k, &l).unwrap().rem_euclid(3) as usize] += 1;
            }
        }
        assert_eq!(counts, [1, 4, 4]);
        assert!(SfParams::new(9, 3, 0, 0, id_form()).is_err());
    }

    #[test]
    fn direct_matches_naive() {
        for q0 in [2u64, 4, 5, 8, 9, 12] {
            for r in (1..q0 as i64).filter(|&r| gcd(r, q0 as i64) == 1) {
                for (n, m) in [(0, 0), (1, 2), (3, -1)] {
                    assert!((direct(q0, r, n, m, &id_form()) - naive(q0, r, n, m, &id_form())).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn table_matches_direct() {
        for (q0, r) in [(7u64, 3i64), (12, 5), (15, 2)] {
            let t = sf_direct_table(&id_form(), q0, r).unwrap();
            for n in 0..q0 as i64 {
                for m in 0..q0 as i64 {
                    let z = t[(n * q0 as i64 + m) as usize];
                    assert!((z - direct(q0, r, n, m, &id_form())).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn closed_form_matches_direct() {
        for f in &gasket_forms() {
            for q0 in [1u64, 3, 5, 7, 9, 15, 25, 27, 45, 49] {
                let q = q0 as i64;
                for r in (0..q).filter(|&r| gcd(r, q) == 1) {
                    for n in 0..q.min(9) {
                        for m in 0..q.min(9) {
                            let p = SfParams::new(q0, r, n, m, f.clone()).unwrap();
                            let (d, c) = (sf_direct(&p).unwrap(), sf_closed(&p).unwrap());
                            assert!((d - c).norm() < 1e-9, "{f:?} q0={q0} r={r} n={n} m={m}: {d} vs {c}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn closed_form_vanishing_and_magnitude() {
        let f = id_form();
        for q0 in [11u64, 121, 33] {
            let q = q0 as i64;
            for (n, m) in [(0, 0), (1, 0), (11, 3), (17, 22)] {
                let p = SfParams::new(q0, 2, n, m, f.clone()).unwrap();
                let z = sf_closed(&p).unwrap();
                let split = GcdSplit::new(f.shift, f.b, f.c, n, m, q);
                match split.l {
                    None => assert_eq!(z, Complex64::new(0.0, 0.0)),
                    Some(_) => assert!((z.norm() - (split.q0_tilde as f64).sqrt() / q0 as f64).abs() < 1e-12),
                }
            }
        }
        let even = SfParams::new(4, 1, 0, 0, f).unwrap();
        assert!(matches!(sf_closed(&even), Err(Error::Unsupported(_))));
    }

    #[test]
    fn coset_reduction() {
        let f = id_form();
        let fp = gasket_forms()[1].clone();
        let big = s_avg(9, 3, &f, &fp, (1, 2), (0, 1), 1).unwrap();
        let small = s_avg(3, 3, &f, &fp, (1, 2), (0, 1), 1).unwrap();
        assert!((big - small * 3.0).norm() < 1e-9);
        assert!((s_avg(1, 1, &f, &fp, (0, 0), (0, 0), 1).unwrap() - 1.0).norm() < 1e-12);
        assert!(s_avg(9, 2, &f, &fp, (0, 0), (0, 0), 1).is_err());
        assert!(s_avg(9, 3, &f, &fp, (0, 0), (0, 0), 3).is_err());
    }

    #[test]
    fn square_root_bound_fails_at_two() {
        // f ≡ Ak + Cℓ mod 2, so (n, m) ≡ (A, C) makes every term 1.
        let f = id_form();
        assert!((direct(2, 1, f.a, f.c, &f) - 1.0).norm() < 1e-12);
        assert!(direct(2, 1, f.a, f.c, &f).norm() > 2f64.powf(-0.5));
    }

    #[test]
    fn kloosterman_small() {
        assert!((kloosterman(3, 4, 1).unwrap() - 1.0).norm() < 1e-12);
        let mut k = Complex64::default();
        for x in 1..5i64 {
            let xb = inv_mod(x, 5).unwrap();
            k += Complex64::from_polar(1.0, TAU * (x + xb) as f64 / 5.0);
        }
        assert!((kloosterman(1, 1, 5).unwrap() - k).norm() < 1e-12);
        // Weil: |K(1, 1; p)| ≤ 2√p.
        for p in [7u64, 11, 101] {
            assert!(kloosterman(1, 1, p).unwrap().norm() <= 2.0 * (p as f64).sqrt() + 1e-9);
        }
    }

    #[test]
    fn ramanujan_formula_matches_direct() {
        assert_eq!(ramanujan(1, 17).unwrap(), 1);
        assert_eq!(ramanujan(3, 1).unwrap(), -1);
        for p in [3u64, 5, 7] {
            assert_eq!(ramanujan(p, 0).unwrap(), p as i64 - 1);
        }
        for q in 1..=120u64 {
            for m in -3..=30 {
                let d = ramanujan_direct(q, m);
                assert!((d.re - ramanujan(q, m).unwrap() as f64).abs() < 1e-9 && d.im.abs() < 1e-9);
            }
        }
    }

    proptest! {
        #[test]
        fn multiplicative_in_q0(q0 in 1u64..15, q0p in 1u64..15, n in -20i64..20, m in -20i64..20, r in 1i64..200) {
            prop_assume!(gcd(q0 as i64, q0p as i64) == 1);
            let q = q0 * q0p;
            prop_assume!(gcd(r, q as i64) == 1);
            let f = id_form();
            let whole = direct(q, r, n, m, &f);
            let parts = direct(q0, r * q0p as i64, n, m, &f) * direct(q0p, r * q0 as i64, n, m, &f);
            prop_assert!((whole - parts).norm() < 1e-10);
        }

        #[test]
        fn bounded_by_root_q0_for_odd_moduli(q0 in (0u64..30).prop_map(|h| 2 * h + 1), r in 1i64..60, n in 0i64..60, m in 0i64..60) {
            prop_assume!(gcd(r, q0 as i64) == 1);
            prop_assert!(direct(q0, r, n, m, &id_form()).norm() <= (q0 as f64).powf(-0.5) + 1e-12);
        }
    }
}
