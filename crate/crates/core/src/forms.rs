//! Shifted binary quadratic forms `f(x, y) − a` attached to group elements.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{self, crt, inv_mod};
use crate::descartes::{Mat4, Quadruple};
use crate::error::{invalid, Error, Result};
use crate::orbit::Family;
use crate::scalar::{self, Scalar};

/// `f(x, y) = a·x² + 2b·xy + c·y²` together with the shift `a_γ`.
///
/// Fields follow the lowercase convention: `a, b, c` are the form
/// coefficients `A, B, C` and `shift` is the anchor curvature.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ShiftedForm<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub shift: T,
}

impl<T: Scalar> ShiftedForm<T> {
    pub fn new(a: T, b: T, c: T, shift: T) -> Self {
        Self { a, b, c, shift }
    }

    /// `4(B² − AC)`.
    pub fn discriminant(&self) -> Result<T> {
        let ctx = "discriminant";
        let bb = scalar::mul(&self.b, &self.b, ctx)?;
        let ac = scalar::mul(&self.a, &self.c, ctx)?;
        scalar::mul(&T::of(4), &scalar::sub(&bb, &ac, ctx)?, ctx)
    }

    /// `f(x, y)` without the shift.
    pub fn value(&self, x: &T, y: &T) -> Result<T> {
        let ctx = "form value";
        let xx = scalar::mul(&scalar::mul(&self.a, x, ctx)?, x, ctx)?;
        let xy = scalar::mul(&scalar::mul(&scalar::mul(&T::of(2), &self.b, ctx)?, x, ctx)?, y, ctx)?;
        let yy = scalar::mul(&scalar::mul(&self.c, y, ctx)?, y, ctx)?;
        scalar::add(&scalar::add(&xx, &xy, ctx)?, &yy, ctx)
    }

    /// `f(x, y) − a`.
    pub fn shifted_value(&self, x: &T, y: &T) -> Result<T> {
        scalar::sub(&self.value(x, y)?, &self.shift, "shifted value")
    }

    pub fn content(&self) -> T {
        self.a.gcd(&self.b).gcd(&self.c)
    }

    pub fn is_positive_definite(&self) -> Result<bool> {
        let det = scalar::sub(
            &scalar::mul(&self.a, &self.c, "definite")?,
            &scalar::mul(&self.b, &self.b, "definite")?,
            "definite",
        )?;
        Ok(self.a.is_positive() && det.is_positive())
    }
}

/// The shifted form of `γ` read off from `γ·root = (a, b, c, d)`:
/// `A = a + b`, `B = (a + b − c + d)/2`, `C = a + d`, shift `a`.
pub fn extract_form<T: Scalar>(gamma: &Mat4<T>, root: &Quadruple<T>) -> Result<ShiftedForm<T>> {
    if gamma.determinant()? != T::one() || !gamma.preserves_descartes()? {
        return invalid("extract_form needs a determinant-one, form-preserving matrix");
    }
    form_of_quadruple(&gamma.apply_quadruple(root)?)
}

/// Shifted form attached to an on-cone quadruple.
pub fn form_of_quadruple<T: Scalar>(v: &Quadruple<T>) -> Result<ShiftedForm<T>> {
    let ctx = "extract form";
    let [a, b, c, d] = &v.0;
    let big_a = scalar::add(a, b, ctx)?;
    let num = scalar::add(&scalar::sub(&big_a, c, ctx)?, d, ctx)?;
    assert!(num.is_even(), "a + b − c + d is even on the cone");
    let big_c = scalar::add(a, d, ctx)?;
    Ok(ShiftedForm::new(big_a, num / T::of(2), big_c, a.clone()))
}

/// `4A·x² + 4B·xy + C·y² − a`, the shifted form at `(2x, y)`.
pub fn evaluate<T: Scalar>(form: &ShiftedForm<T>, x: &T, y: &T) -> Result<T> {
    let two_x = scalar::mul(&T::of(2), x, "evaluate")?;
    form.shifted_value(&two_x, y)
}

/// `4(a + b)n² + 2(a + b − c + d)n + d`.
pub fn tangency_parabola<T: Scalar>(v: &Quadruple<T>, n: &T) -> Result<T> {
    if !v.is_on_cone()? {
        return Err(Error::NotOnCone(v.to_string()));
    }
    let ctx = "parabola";
    let [a, b, c, d] = &v.0;
    let ab = scalar::add(a, b, ctx)?;
    let lin = scalar::add(&scalar::sub(&ab, c, ctx)?, d, ctx)?;
    let quad = scalar::mul(&scalar::mul(&scalar::mul(&T::of(4), &ab, ctx)?, n, ctx)?, n, ctx)?;
    let mid = scalar::mul(&scalar::mul(&T::of(2), &lin, ctx)?, n, ctx)?;
    scalar::add(&scalar::add(&quad, &mid, ctx)?, d, ctx)
}

/// `f ↦ f∘g` for `g = (g h; i j)` with determinant `±1`: a right action.
pub fn gl2_act<T: Scalar>(form: &ShiftedForm<T>, g: &[[T; 2]; 2]) -> Result<ShiftedForm<T>> {
    let ctx = "gl2 action";
    let [[g0, h], [i, j]] = g;
    let det = scalar::sub(&scalar::mul(g0, j, ctx)?, &scalar::mul(h, i, ctx)?, ctx)?;
    if det.abs() != T::one() {
        return invalid(format!("matrix with determinant {det} is not unimodular"));
    }
    let (a, b, c) = (&form.a, &form.b, &form.c);
    let m = |x: &T, y: &T| scalar::mul(x, y, ctx);
    let two = T::of(2);
    // A′ = g²A + 2giB + i²C
    let a2 = scalar::sum(&[m(&m(g0, g0)?, a)?, m(&m(&m(&two, g0)?, i)?, b)?, m(&m(i, i)?, c)?], ctx)?;
    // B′ = ghA + (gj + hi)B + ijC
    let mixed = scalar::add(&m(g0, j)?, &m(h, i)?, ctx)?;
    let b2 = scalar::sum(&[m(&m(g0, h)?, a)?, m(&mixed, b)?, m(&m(i, j)?, c)?], ctx)?;
    // C′ = h²A + 2hjB + j²C
    let c2 = scalar::sum(&[m(&m(h, h)?, a)?, m(&m(&m(&two, h)?, j)?, b)?, m(&m(j, j)?, c)?], ctx)?;
    Ok(ShiftedForm::new(a2, b2, c2, form.shift.clone()))
}

/// Reduced representative of a `GL₂(ℤ)` class of positive-definite forms:
/// `2|B| ≤ A ≤ C` and `B ≥ 0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FormClass {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub discriminant: i64,
}

pub fn reduce_class<T: Scalar>(form: &ShiftedForm<T>) -> Result<FormClass> {
    if !form.is_positive_definite()? {
        return invalid("reduction needs a positive-definite form");
    }
    let get = |x: &T| x.to_i128().ok_or(Error::Overflow("reduce_class"));
    let (mut a, mut b, mut c) = (get(&form.a)?, get(&form.b)?, get(&form.c)?);
    loop {
        // Translate x ↦ x + ky to bring B into [−A/2, A/2).
        let k = -(2 * b + a).div_euclid(2 * a);
        if k != 0 {
            c += a * k * k + 2 * b * k;
            b += k * a;
        }
        if c < a {
            std::mem::swap(&mut a, &mut c);
            b = -b;
        } else {
            break;
        }
    }
    let out = |x: i128| i64::try_from(x).map_err(|_| Error::Overflow("reduce_class"));
    Ok(FormClass { a: out(a)?, b: out(b.abs())?, c: out(c)?, discriminant: out(4 * (b * b - a * c))? })
}

pub fn same_class<T: Scalar>(f: &ShiftedForm<T>, g: &ShiftedForm<T>) -> Result<bool> {
    Ok(reduce_class(f)? == reduce_class(g)?)
}

/// Every primitive reduced class with `AC − B² = det`.
pub fn reduced_classes(det: i64) -> Vec<FormClass> {
    let mut out = Vec::new();
    // 3A²/4 ≤ AC − B² for reduced forms.
    let mut a = 1i64;
    while 3 * a * a <= 4 * det {
        for b in 0..=a / 2 {
            if (det + b * b) % a == 0 {
                let c = (det + b * b) / a;
                if c >= a && arith::gcd(arith::gcd(a, b), c) == 1 {
                    out.push(FormClass { a, b, c, discriminant: -4 * det });
                }
            }
        }
        a += 1;
    }
    out
}

/// Class histogram of a family and the `A, C ≍ T` constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMultiplicity {
    pub histogram: BTreeMap<String, u64>,
    pub max: u64,
    /// Least `c` with `A, C ∈ [T/c, cT]` for every member.
    pub ac_constant: f64,
}

pub fn family_class_multiplicity(family: &Family) -> Result<ClassMultiplicity> {
    let t = family.t();
    let mut counts: BTreeMap<FormClass, u64> = BTreeMap::new();
    let mut ac_constant: f64 = 1.0;
    for m in &family.members {
        *counts.entry(reduce_class(&m.form)?).or_default() += 1;
        for x in [m.form.a as f64, m.form.c as f64] {
            ac_constant = ac_constant.max(x / t).max(t / x);
        }
    }
    let max = counts.values().copied().max().unwrap_or(0);
    let histogram = counts
        .into_iter()
        .map(|(k, v)| (format!("{},{},{}", k.a, k.b, k.c), v))
        .collect();
    Ok(ClassMultiplicity { histogram, max, ac_constant })
}

/// Classes of determinant `a²` representing `z`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepresentingClasses {
    pub count: u64,
    pub classes: Vec<FormClass>,
}

/// Count primitive classes with `AC − B² = a²` representing `z`.
///
/// Each representation factors as `z = w²·z₁` with a primitive one of
/// `z₁`, and a form primitively representing `z₁` is equivalent to
/// `(z₁, B, (a² + B²)/z₁)` with `B² ≡ −a² (mod z₁)`.
pub fn representing_classes(z: i64, a: i64) -> Result<RepresentingClasses> {
    if z < 1 || a == 0 {
        return invalid("representing_classes needs z >= 1 and a != 0");
    }
    let det = a.checked_mul(a).ok_or(Error::Overflow("a squared"))?;
    let mut set = BTreeSet::new();
    let mut w = 1i64;
    while w * w <= z {
        if z % (w * w) == 0 {
            let z1 = z / (w * w);
            for b in 0..z1 {
                let b2 = b as i128 * b as i128;
                if (b2 + det as i128) % z1 as i128 == 0 {
                    let c = ((b2 + det as i128) / z1 as i128) as i64;
                    if arith::gcd(arith::gcd(z1, b), c) == 1 {
                        set.insert(reduce_class(&ShiftedForm::new(z1, b, c, 0))?);
                    }
                }
            }
        }
        w += 1;
    }
    Ok(RepresentingClasses { count: set.len() as u64, classes: set.into_iter().collect() })
}

/// `(k, ℓ)` with `(k, ℓ, d) = 1` such that `f(m, n) ≡ 0 (d)` forces
/// `(mk + nℓ)² ≡ 0 (d)`.
pub fn kl_lift(a: i64, b: i64, c: i64, d: i64) -> Result<(i64, i64)> {
    if d < 1 {
        return invalid("modulus must be positive");
    }
    if arith::gcd(arith::gcd(a, b), c) != 1 {
        return invalid("form is not primitive");
    }
    let det = a as i128 * c as i128 - b as i128 * b as i128;
    if det % d as i128 != 0 {
        return invalid(format!("{d} does not divide AC - B^2 = {det}"));
    }
    if d == 1 {
        return Ok((1, 0));
    }
    let (mut k, mut l, mut modulus) = (0i64, 0i64, 1i64);
    for (p, e) in arith::factorize(d as u64) {
        let pe = (p as i64).pow(e);
        let (kp, lp) = if a % p as i64 != 0 {
            (1, arith::mul_mod(inv_mod(a, pe).expect("A is a unit"), b, pe))
        } else {
            (arith::mul_mod(inv_mod(c, pe).expect("C is a unit when p | A"), b, pe), 1)
        };
        k = crt(k, modulus, kp, pe);
        l = crt(l, modulus, lp, pe);
        modulus *= pe;
    }
    Ok((k, l))
}

/// Whether `(k, ℓ)` satisfies the lift property for every `(m, n) mod d`.
pub fn kl_lift_holds(a: i64, b: i64, c: i64, d: i64, k: i64, l: i64) -> bool {
    if arith::gcd(arith::gcd(k, l), d) != 1 {
        return false;
    }
    let f = |m: i64, n: i64| {
        let v = a as i128 * (m * m) as i128 + 2 * b as i128 * (m * n) as i128 + c as i128 * (n * n) as i128;
        v.rem_euclid(d as i128) == 0
    };
    (0..d).all(|m| {
        (0..d).all(|n| {
            !f(m, n) || {
                let s = (m as i128 * k as i128 + n as i128 * l as i128).rem_euclid(d as i128);
                (s * s) % d as i128 == 0
            }
        })
    })
}

/// `#{0 ≤ m, n < M : Am² + 2Bmn + Cn² ≡ 0 (d)}` via residue classes.
pub fn zero_pairs_count(a: i64, b: i64, c: i64, d: i64, big_m: i64) -> Result<u64> {
    if d < 1 || big_m < 0 {
        return invalid("need d >= 1 and M >= 0");
    }
    let det = a as i128 * c as i128 - b as i128 * b as i128;
    if det % d as i128 != 0 {
        return invalid(format!("{d} does not divide AC - B^2"));
    }
    let span = d.min(big_m);
    // Number of m in [0, M) congruent to r mod d.
    let mult = |r: i64| (big_m - r + d - 1) / d;
    let count: u64 = (0..span)
        .into_par_iter()
        .map(|r| {
            let mut acc = 0u64;
            for s in 0..span {
                let v = a as i128 * (r * r) as i128 + 2 * b as i128 * (r * s) as i128 + c as i128 * (s * s) as i128;
                if v.rem_euclid(d as i128) == 0 {
                    acc += (mult(r) * mult(s)) as u64;
                }
            }
            acc
        })
        .sum();
    Ok(count)
}

fn value_histogram(form: &ShiftedForm<i64>, big_m: i64) -> HashMap<i128, u64> {
    let mut h = HashMap::new();
    for m in 0..big_m {
        for n in 0..big_m {
            let v = form.a as i128 * (m * m) as i128 - 2 * form.b as i128 * (m * n) as i128 + form.c as i128 * (n * n) as i128;
            *h.entry(v).or_default() += 1;
        }
    }
    h
}

/// `#{(𝔣′, m, n, m′, n′) : a′ = a, 𝔣(m, −n) = 𝔣′(m′, −n′), 0 ≤ m, n, m′, n′ < M}`,
/// with `𝔣′` running over family members (with multiplicity).
pub fn coincidence_count(form: &ShiftedForm<i64>, family: &Family, big_m: i64) -> Result<u64> {
    if big_m < 0 {
        return invalid("M must be nonnegative");
    }
    let base = value_histogram(form, big_m);
    Ok(family
        .members
        .par_iter()
        .filter(|m| m.form.shift == form.shift)
        .map(|m| {
            value_histogram(&m.form, big_m)
                .iter()
                .map(|(v, c)| c * base.get(v).copied().unwrap_or(0))
                .sum::<u64>()
        })
        .sum())
}
