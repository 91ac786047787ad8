//! Descartes quadruples, the Apollonian group and the spin correspondence.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::{self, Ring, Scalar};

/// The root quadruple of the gasket in the standard figure.
pub const V0: [i64; 4] = [-11, 21, 24, 28];

/// A curvature quadruple.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Quadruple<T>(pub [T; 4]);

impl<T: Scalar> Quadruple<T> {
    pub fn new(a: T, b: T, c: T, d: T) -> Self {
        Self([a, b, c, d])
    }

    pub fn from_i64(v: [i64; 4]) -> Self {
        Self(v.map(T::of))
    }

    pub fn sum(&self) -> Result<T> {
        scalar::sum(&self.0, "quadruple sum")
    }

    /// `2Σvᵢ² − (Σvᵢ)²`.
    pub fn descartes_form(&self) -> Result<T> {
        descartes_form(self)
    }

    pub fn is_on_cone(&self) -> Result<bool> {
        Ok(self.descartes_form()?.is_zero())
    }

    pub fn gcd(&self) -> T {
        self.0.iter().fold(T::zero(), |g, x| num_integer::Integer::gcd(&g, x))
    }

    pub fn is_primitive(&self) -> bool {
        self.gcd().is_one()
    }

    pub fn sorted(&self) -> Self {
        let mut v = self.0.clone();
        v.sort();
        Self(v)
    }

    pub fn to_bigint(&self) -> Quadruple<BigInt> {
        Quadruple(self.0.clone().map(|x| x.to_bigint()))
    }
}

impl<T: fmt::Display> fmt::Display for Quadruple<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.0[0], self.0[1], self.0[2], self.0[3])
    }
}

/// `2Σvᵢ² − (Σvᵢ)²` with overflow reported, never wrapped.
pub fn descartes_form<T: Scalar>(v: &Quadruple<T>) -> Result<T> {
    let ctx = "descartes form";
    let s = v.sum()?;
    let mut sq = T::zero();
    for x in &v.0 {
        sq = scalar::add(&sq, &scalar::mul(x, x, ctx)?, ctx)?;
    }
    let two_sq = scalar::add(&sq, &sq, ctx)?;
    scalar::sub(&two_sq, &scalar::mul(&s, &s, ctx)?, ctx)
}

/// Descartes form of an `i64` quadruple, promoted to `BigInt` when the
/// fixed-width evaluation overflows.
pub fn descartes_form_promoting(v: &Quadruple<i64>) -> BigInt {
    match descartes_form(v) {
        Ok(x) => BigInt::from(x),
        Err(_) => descartes_form(&v.to_bigint()).expect("bigint never overflows"),
    }
}

/// A 4×4 matrix over a ring.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mat4<R>(pub [[R; 4]; 4]);

impl<R: Ring> Mat4<R> {
    pub fn from_fn(f: impl Fn(usize, usize) -> R) -> Self {
        Self(std::array::from_fn(|i| std::array::from_fn(|j| f(i, j))))
    }

    pub fn identity() -> Self {
        Self::from_fn(|i, j| if i == j { R::one() } else { R::zero() })
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(|i, j| self.0[j][i].clone())
    }

    pub fn checked_mul(&self, rhs: &Self) -> Result<Self> {
        let ctx = "4x4 product";
        let mut out = Self::from_fn(|_, _| R::zero());
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = R::zero();
                for k in 0..4 {
                    acc = scalar::add(&acc, &scalar::mul(&self.0[i][k], &rhs.0[k][j], ctx)?, ctx)?;
                }
                out.0[i][j] = acc;
            }
        }
        Ok(out)
    }

    pub fn apply(&self, v: &[R; 4]) -> Result<[R; 4]> {
        let ctx = "4x4 apply";
        let mut out: [R; 4] = std::array::from_fn(|_| R::zero());
        for i in 0..4 {
            for k in 0..4 {
                out[i] = scalar::add(&out[i], &scalar::mul(&self.0[i][k], &v[k], ctx)?, ctx)?;
            }
        }
        Ok(out)
    }

    pub fn scale(&self, s: &R) -> Result<Self> {
        let mut out = self.clone();
        for row in out.0.iter_mut() {
            for x in row.iter_mut() {
                *x = scalar::mul(x, s, "4x4 scale")?;
            }
        }
        Ok(out)
    }

    pub fn determinant(&self) -> Result<R> {
        let m = &self.0;
        let ctx = "determinant";
        let mut det = R::zero();
        for p in PERMS4 {
            let mut term = R::one();
            for (i, &j) in p.0.iter().enumerate() {
                term = scalar::mul(&term, &m[i][j], ctx)?;
            }
            det = if p.1 > 0 {
                scalar::add(&det, &term, ctx)?
            } else {
                scalar::sub(&det, &term, ctx)?
            };
        }
        Ok(det)
    }

    /// Whether `mᵗ·G·m = G` for the given Gram matrix.
    pub fn preserves(&self, gram: &Self) -> Result<bool> {
        Ok(self.transpose().checked_mul(gram)?.checked_mul(self)? == *gram)
    }
}

const PERMS4: [([usize; 4], i8); 24] = [
    ([0, 1, 2, 3], 1),
    ([0, 1, 3, 2], -1),
    ([0, 2, 1, 3], -1),
    ([0, 2, 3, 1], 1),
    ([0, 3, 1, 2], 1),
    ([0, 3, 2, 1], -1),
    ([1, 0, 2, 3], -1),
    ([1, 0, 3, 2], 1),
    ([1, 2, 0, 3], 1),
    ([1, 2, 3, 0], -1),
    ([1, 3, 0, 2], -1),
    ([1, 3, 2, 0], 1),
    ([2, 0, 1, 3], 1),
    ([2, 0, 3, 1], -1),
    ([2, 1, 0, 3], -1),
    ([2, 1, 3, 0], 1),
    ([2, 3, 0, 1], 1),
    ([2, 3, 1, 0], -1),
    ([3, 0, 1, 2], -1),
    ([3, 0, 2, 1], 1),
    ([3, 1, 0, 2], 1),
    ([3, 1, 2, 0], -1),
    ([3, 2, 0, 1], -1),
    ([3, 2, 1, 0], 1),
];

impl<T: Scalar> Mat4<T> {
    pub fn from_i64(m: [[i64; 4]; 4]) -> Self {
        Self(m.map(|r| r.map(T::of)))
    }

    pub fn apply_quadruple(&self, v: &Quadruple<T>) -> Result<Quadruple<T>> {
        Ok(Quadruple(self.apply(&v.0)?))
    }

    pub fn to_rational(&self) -> Mat4<BigRational> {
        Mat4::from_fn(|i, j| BigRational::from_integer(self.0[i][j].to_bigint()))
    }

    /// Squared Frobenius norm.
    pub fn norm_sq(&self) -> Result<T> {
        let mut acc = T::zero();
        for row in &self.0 {
            for x in row {
                acc = scalar::add(&acc, &scalar::mul(x, x, "norm")?, "norm")?;
            }
        }
        Ok(acc)
    }

    /// Whether the matrix preserves the Descartes form.
    pub fn preserves_descartes(&self) -> Result<bool> {
        self.preserves(&gram())
    }

    /// Characteristic polynomial coefficients `[c0, c1, c2, c3, c4]` of
    /// `det(λI − M) = Σ cₖλᵏ`, exact (Faddeev–LeVerrier).
    pub fn charpoly(&self) -> Result<[T; 5]> {
        let ctx = "charpoly";
        let mut c: [T; 5] = std::array::from_fn(|_| T::zero());
        c[4] = T::one();
        let mut mk = Mat4::<T>::from_fn(|_, _| T::zero());
        for k in 1..=4usize {
            let prev = mk.clone();
            mk = self.checked_mul(&prev)?;
            for i in 0..4 {
                mk.0[i][i] = scalar::add(&mk.0[i][i], &c[5 - k], ctx)?;
            }
            let amk = self.checked_mul(&mk)?;
            let tr = scalar::sum(&[amk.0[0][0].clone(), amk.0[1][1].clone(), amk.0[2][2].clone(), amk.0[3][3].clone()], ctx)?;
            c[4 - k] = -(tr / T::of(k as i64));
        }
        Ok(c)
    }
}

impl Mat4<BigRational> {
    /// Exact inverse by Gauss–Jordan elimination.
    pub fn inverse(&self) -> Result<Self> {
        let mut a = self.0.clone();
        let mut inv = Self::identity().0;
        for col in 0..4 {
            let piv = (col..4)
                .find(|&r| !a[r][col].is_zero())
                .ok_or_else(|| Error::InvalidInput("singular matrix".into()))?;
            a.swap(col, piv);
            inv.swap(col, piv);
            let p = a[col][col].clone();
            for j in 0..4 {
                a[col][j] = &a[col][j] / &p;
                inv[col][j] = &inv[col][j] / &p;
            }
            for r in 0..4 {
                if r != col && !a[r][col].is_zero() {
                    let f = a[r][col].clone();
                    for j in 0..4 {
                        let t = &f * &a[col][j];
                        a[r][j] = &a[r][j] - t;
                        let t = &f * &inv[col][j];
                        inv[r][j] = &inv[r][j] - t;
                    }
                }
            }
        }
        Ok(Self(inv))
    }

    /// Convert to an integer matrix, failing on non-integral entries.
    pub fn to_integer<T: Scalar>(&self) -> Result<Mat4<T>> {
        let mut out = Mat4::<T>::from_fn(|_, _| T::zero());
        for i in 0..4 {
            for j in 0..4 {
                let x = &self.0[i][j];
                if !x.is_integer() {
                    return invalid(format!("entry ({i},{j}) = {x} is not integral"));
                }
                out.0[i][j] = T::from_bigint(&x.to_integer()).ok_or(Error::Overflow("rational to integer"))?;
            }
        }
        Ok(out)
    }

    pub fn is_integral(&self) -> bool {
        self.0.iter().flatten().all(|x| x.is_integer())
    }
}

/// A 2×2 matrix over a ring.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mat2<R>(pub [[R; 2]; 2]);

impl<R: Ring> Mat2<R> {
    pub fn new(a: R, b: R, c: R, d: R) -> Self {
        Self([[a, b], [c, d]])
    }

    pub fn identity() -> Self {
        Self::new(R::one(), R::zero(), R::zero(), R::one())
    }

    pub fn det(&self) -> Result<R> {
        let m = &self.0;
        scalar::sub(
            &scalar::mul(&m[0][0], &m[1][1], "det2")?,
            &scalar::mul(&m[0][1], &m[1][0], "det2")?,
            "det2",
        )
    }

    pub fn checked_mul(&self, rhs: &Self) -> Result<Self> {
        let ctx = "2x2 product";
        let e = |i: usize, j: usize| -> Result<R> {
            scalar::add(
                &scalar::mul(&self.0[i][0], &rhs.0[0][j], ctx)?,
                &scalar::mul(&self.0[i][1], &rhs.0[1][j], ctx)?,
                ctx,
            )
        };
        Ok(Self([[e(0, 0)?, e(0, 1)?], [e(1, 0)?, e(1, 1)?]]))
    }

    pub fn checked_pow(&self, n: u32) -> Result<Self> {
        let mut acc = Self::identity();
        for _ in 0..n {
            acc = acc.checked_mul(self)?;
        }
        Ok(acc)
    }

    /// Inverse of a determinant-one matrix.
    pub fn adjugate(&self) -> Result<Self> {
        let m = &self.0;
        Ok(Self::new(m[1][1].clone(), m[0][1].checked_neg().ok_or(Error::Overflow("adj"))?, m[1][0].checked_neg().ok_or(Error::Overflow("adj"))?, m[0][0].clone()))
    }

    pub fn neg(&self) -> Result<Self> {
        let n = |x: &R| x.checked_neg().ok_or(Error::Overflow("negate"));
        Ok(Self::new(n(&self.0[0][0])?, n(&self.0[0][1])?, n(&self.0[1][0])?, n(&self.0[1][1])?))
    }
}

/// A Gaussian integer `re + im·i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GaussInt<T> {
    pub re: T,
    pub im: T,
}

impl<T: Scalar> GaussInt<T> {
    pub fn new(re: T, im: T) -> Self {
        Self { re, im }
    }

    pub fn from_i64(re: i64, im: i64) -> Self {
        Self::new(T::of(re), T::of(im))
    }

    pub fn i() -> Self {
        Self::new(T::zero(), T::one())
    }

    pub fn conj(&self) -> Self {
        Self::new(self.re.clone(), -self.im.clone())
    }

    pub fn norm(&self) -> Result<T> {
        scalar::add(
            &scalar::mul(&self.re, &self.re, "norm")?,
            &scalar::mul(&self.im, &self.im, "norm")?,
            "norm",
        )
    }
}

impl<T: Scalar> Ring for GaussInt<T> {
    fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }
    fn one() -> Self {
        Self::new(T::one(), T::zero())
    }
    fn checked_add(&self, rhs: &Self) -> Option<Self> {
        Some(Self::new(self.re.checked_add(&rhs.re)?, self.im.checked_add(&rhs.im)?))
    }
    fn checked_sub(&self, rhs: &Self) -> Option<Self> {
        Some(Self::new(self.re.checked_sub(&rhs.re)?, self.im.checked_sub(&rhs.im)?))
    }
    fn checked_mul(&self, rhs: &Self) -> Option<Self> {
        let rr = self.re.checked_mul(&rhs.re)?;
        let ii = self.im.checked_mul(&rhs.im)?;
        let ri = self.re.checked_mul(&rhs.im)?;
        let ir = self.im.checked_mul(&rhs.re)?;
        Some(Self::new(rr.checked_sub(&ii)?, ri.checked_add(&ir)?))
    }
}

impl<T: fmt::Display + Signed> fmt::Display for GaussInt<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_negative() {
            write!(f, "{}-{}i", self.re, self.im.abs())
        } else {
            write!(f, "{}+{}i", self.re, self.im)
        }
    }
}

/// `2I − J`, the Gram matrix of the Descartes form.
pub fn gram<T: Scalar>() -> Mat4<T> {
    Mat4::from_fn(|i, j| if i == j { T::one() } else { -T::one() })
}

/// The reflection `Sᵢ` (1-based index).
pub fn reflection<T: Scalar>(i: usize) -> Result<Mat4<T>> {
    if !(1..=4).contains(&i) {
        return invalid(format!("reflection index {i} outside 1..4"));
    }
    let r = i - 1;
    Ok(Mat4::from_fn(|a, b| {
        if a != r {
            if a == b {
                T::one()
            } else {
                T::zero()
            }
        } else if b == r {
            -T::one()
        } else {
            T::of(2)
        }
    }))
}

/// Apply `Sᵢ` to a quadruple in place (1-based index).
pub fn reflect_in_place<T: Scalar>(v: &mut Quadruple<T>, i: usize) -> Result<()> {
    let r = i - 1;
    let ctx = "reflection";
    let mut others = T::zero();
    for (k, x) in v.0.iter().enumerate() {
        if k != r {
            others = scalar::add(&others, x, ctx)?;
        }
    }
    let twice = scalar::add(&others, &others, ctx)?;
    v.0[r] = scalar::sub(&twice, &v.0[r], ctx)?;
    Ok(())
}

/// Product `S_{w[0]}·S_{w[1]}⋯` of reflections.
pub fn word_matrix<T: Scalar>(word: &[u8]) -> Result<Mat4<T>> {
    word.iter()
        .try_fold(Mat4::identity(), |acc, &i| acc.checked_mul(&reflection(i as usize)?))
}

/// Result of [`reduce_to_root`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reduction<T> {
    /// Reduced quadruple, sorted ascending.
    pub root: Quadruple<T>,
    /// Reduced quadruple in the coordinate order the reflections left it.
    pub unsorted: Quadruple<T>,
    /// Reflection indices in the order they were applied.
    pub word: Vec<u8>,
}

/// Repeatedly apply the reflection that lowers the entry sum the most.
///
/// Applying the reflections of `word` to `unsorted` in reverse order, that is
/// `word_matrix(word)·unsorted`, reproduces the input exactly.
pub fn reduce_to_root<T: Scalar>(v: &Quadruple<T>) -> Result<Reduction<T>> {
    if !v.is_on_cone()? {
        return Err(Error::NotOnCone(v.to_string()));
    }
    if !v.sum()?.is_positive() {
        return invalid(format!("{v} has nonpositive entry sum"));
    }
    let mut cur = v.clone();
    let mut word = Vec::new();
    loop {
        let s = cur.sum()?;
        let mut best = 0;
        for k in 1..4 {
            if cur.0[k] > cur.0[best] {
                best = k;
            }
        }
        // Lowering the sum by 4vᵢ − 2s.
        let drop = scalar::sub(
            &scalar::mul(&T::of(4), &cur.0[best], "reduce")?,
            &scalar::mul(&T::of(2), &s, "reduce")?,
            "reduce",
        )?;
        if !drop.is_positive() {
            break;
        }
        reflect_in_place(&mut cur, best + 1)?;
        word.push(best as u8 + 1);
    }
    Ok(Reduction { root: cur.sorted(), unsorted: cur, word })
}

/// `C₁ⁿ` from its polynomial entries.
pub fn unipotent_c1_power<T: Scalar>(n: &T) -> Result<Mat4<T>> {
    let ctx = "C1 power";
    let two_n = scalar::mul(&T::of(2), n, ctx)?;
    let four_n2 = scalar::mul(&scalar::mul(&T::of(4), n, ctx)?, n, ctx)?;
    let p = scalar::sub(&four_n2, &two_n, ctx)?;
    let q = scalar::add(&four_n2, &two_n, ctx)?;
    let (z, o) = (T::zero(), T::one());
    Ok(Mat4([
        [o.clone(), z.clone(), z.clone(), z.clone()],
        [z.clone(), o.clone(), z.clone(), z.clone()],
        [p.clone(), p, scalar::sub(&o, &two_n, ctx)?, two_n.clone()],
        [q.clone(), q, -two_n.clone(), scalar::add(&two_n, &o, ctx)?],
    ]))
}

fn rat(x: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

fn rat_matrix(m: [[i64; 4]; 4]) -> Mat4<BigRational> {
    Mat4(m.map(|r| r.map(rat)))
}

/// The change of basis `J` relating `Cᵢ` and `C̃ᵢ`.
pub fn j_matrix() -> Mat4<BigRational> {
    rat_matrix([[1, 0, 0, 0], [-1, 1, 0, 0], [-1, 1, -2, 1], [-1, 0, 0, 1]])
}

/// `J·X·J⁻¹`.
pub fn j_conjugate(x: &Mat4<BigRational>) -> Mat4<BigRational> {
    let j = j_matrix();
    let jinv = j.inverse().expect("J is invertible");
    j.checked_mul(x).and_then(|m| m.checked_mul(&jinv)).expect("rationals do not overflow")
}

/// The spin map `ρ` from real 2×2 matrices into 4×4 rational matrices.
///
/// As displayed it satisfies `ρ(g)·ρ(h) = ρ(hg)` and `ρ(−g) = ρ(g)`.
pub fn spin_rho<T: Scalar>(g: &Mat2<T>) -> Result<Mat4<BigRational>> {
    let det = g.det()?;
    if det.is_zero() {
        return invalid("spin_rho of a singular matrix");
    }
    let [[a, b], [c, d]] = g.0.clone().map(|r| r.map(|x| BigRational::from_integer(x.to_bigint())));
    let two = rat(2);
    let z = rat(0);
    let m = Mat4([
        [rat(1), z.clone(), z.clone(), z.clone()],
        [z.clone(), &a * &a, &two * &a * &c, &c * &c],
        [z.clone(), &a * &b, &a * &d + &b * &c, &c * &d],
        [z, &b * &b, &two * &b * &d, &d * &d],
    ]);
    let inv = BigRational::from_integer(det.to_bigint()).recip();
    m.scale(&inv)
}

/// The `Λ(2)` completion `(α 2x; γ y)` with `α ≥ 0` minimal.
pub fn lambda2_completion<T: Scalar>(x: &T, y: &T) -> Result<Mat2<T>> {
    let two_x = scalar::mul(&T::of(2), x, "completion")?;
    if !num_integer::Integer::gcd(&two_x, y).is_one() {
        return invalid(format!("(2x, y) = ({two_x}, {y}) is not coprime"));
    }
    if x.is_zero() {
        // y = ±1.
        return Ok(Mat2::new(y.clone(), T::zero(), T::zero(), y.clone()));
    }
    let four_x = scalar::mul(&T::of(2), &two_x, "completion")?;
    let modulus = four_x.abs();
    let e = num_integer::Integer::extended_gcd(&y.mod_floor(&modulus), &modulus);
    let alpha = e.x.mod_floor(&modulus);
    let num = scalar::sub(&scalar::mul(&alpha, y, "completion")?, &T::one(), "completion")?;
    let gamma_half = num / four_x;
    let gamma = scalar::mul(&T::of(2), &gamma_half, "completion")?;
    Ok(Mat2::new(alpha, two_x, gamma, y.clone()))
}

/// `ξ_{x,y} = J·ρ(M)·J⁻¹` for the completion `M` of `(∗ 2x; ∗ y)`.
pub fn xi<T: Scalar>(x: &T, y: &T) -> Result<Mat4<T>> {
    let m = lambda2_completion(x, y)?;
    j_conjugate(&spin_rho(&m)?).to_integer()
}

/// `w_{x,y} = ξᵗ·e₄`.
pub fn w_vector<T: Scalar>(x: &T, y: &T) -> Result<Quadruple<T>> {
    let ctx = "w vector";
    let xx = scalar::mul(&scalar::mul(&T::of(4), x, ctx)?, x, ctx)?;
    let xy = scalar::mul(&scalar::mul(&T::of(2), x, ctx)?, y, ctx)?;
    let yy = scalar::mul(y, y, ctx)?;
    let a = scalar::sub(&scalar::add(&scalar::add(&xx, &xy, ctx)?, &yy, ctx)?, &T::one(), ctx)?;
    let b = scalar::add(&xx, &xy, ctx)?;
    let d = scalar::add(&xy, &yy, ctx)?;
    Ok(Quadruple([a, b, -xy, d]))
}

/// The map `ι₀` into the orthogonal group of `xw + y² + z²`; like `ρ` it
/// reverses products.
pub fn iota0<T: Scalar>(g: &Mat2<GaussInt<T>>) -> Result<Mat4<BigRational>> {
    let det = g.det()?;
    let det_norm = BigRational::from_integer(det.norm()?.to_bigint());
    if det_norm.is_zero() {
        return invalid("iota0 of a singular matrix");
    }
    let parts = |z: &GaussInt<T>| (BigRational::from_integer(z.re.to_bigint()), BigRational::from_integer(z.im.to_bigint()));
    let (a, al) = parts(&g.0[0][0]);
    let (b, be) = parts(&g.0[0][1]);
    let (c, ga) = parts(&g.0[1][0]);
    let (d, de) = parts(&g.0[1][1]);
    let two = rat(2);
    let m = Mat4([
        [
            &a * &a + &al * &al,
            &two * (&a * &c + &al * &ga),
            &two * (&c * &al - &a * &ga),
            -(&c * &c) - &ga * &ga,
        ],
        [
            &a * &b + &al * &be,
            &b * &c + &a * &d + &be * &ga + &al * &de,
            &d * &al + &c * &be - &b * &ga - &a * &de,
            -(&c * &d) - &ga * &de,
        ],
        [
            &a * &be - &b * &al,
            -(&d * &al) + &c * &be - &b * &ga + &a * &de,
            -(&b * &c) + &a * &d - &be * &ga + &al * &de,
            &d * &ga - &c * &de,
        ],
        [
            -(&b * &b) - &be * &be,
            -(&two * (&b * &d + &be * &de)),
            &two * (&b * &de - &d * &be),
            &d * &d + &de * &de,
        ],
    ]);
    m.scale(&det_norm.recip())
}

/// Gram matrix of `xw + y² + z²`.
pub fn gram_tilde() -> Mat4<BigRational> {
    let h = BigRational::new(BigInt::from(1), BigInt::from(2));
    let (z, o) = (rat(0), rat(1));
    Mat4([
        [z.clone(), z.clone(), z.clone(), h.clone()],
        [z.clone(), o.clone(), z.clone(), z.clone()],
        [z.clone(), z.clone(), o, z.clone()],
        [h, z.clone(), z.clone(), z],
    ])
}

/// The change of basis `P` with `Pᵗ·(2I − J)·P = Gram(xw + y² + z²)`.
pub fn iota_basis() -> Mat4<BigRational> {
    let p = rat_matrix([[9, -2, 6, -1], [1, -2, 2, -1], [4, -2, 0, 0], [0, 2, 0, 0]]);
    p.scale(&BigRational::new(BigInt::from(1), BigInt::from(4))).expect("rational")
}

/// `ι(g) = P·ι₀(g)·P⁻¹`, landing in the orthogonal group of the Descartes form.
pub fn iota<T: Scalar>(g: &Mat2<GaussInt<T>>) -> Result<Mat4<BigRational>> {
    if g.det()? != GaussInt::<T>::one() {
        return invalid("iota requires determinant 1");
    }
    let p = iota_basis();
    let pinv = p.inverse()?;
    p.checked_mul(&iota0(g)?)?.checked_mul(&pinv)
}

/// Generators of the preimage of `Γ` under `ι`, up to sign.
pub fn iota_generators() -> [Mat2<GaussInt<i64>>; 3] {
    let g = GaussInt::<i64>::from_i64;
    [
        Mat2::new(g(1, 0), g(0, 4), g(0, 0), g(1, 0)),
        Mat2::new(g(-2, 0), g(0, 1), g(0, 1), g(0, 0)),
        Mat2::new(g(2, 2), g(4, 3), g(0, -1), g(0, -2)),
    ]
}

/// If `m` lies in the Apollonian group, a reflection word `w` with
/// `S_{w[0]}⋯S_{w[k−1]} = m`.
pub fn apollonian_word(m: &Mat4<i64>) -> Result<Option<Vec<u8>>> {
    let v0 = Quadruple::<i64>::from_i64(V0);
    if !m.preserves_descartes()? {
        return Ok(None);
    }
    let w = m.apply_quadruple(&v0)?;
    if !w.sum()?.is_positive() {
        return Ok(None);
    }
    let red = reduce_to_root(&w)?;
    if red.unsorted != v0 {
        return Ok(None);
    }
    Ok((word_matrix::<i64>(&red.word)? == *m).then_some(red.word))
}

/// Whether `m` lies in the even subgroup `Γ`.
pub fn is_in_gamma(m: &Mat4<i64>) -> Result<bool> {
    Ok(apollonian_word(m)?.is_some_and(|w| w.len() % 2 == 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type Q = Quadruple<i64>;

    fn v0() -> Q {
        Q::from_i64(V0)
    }

    fn rm(m: [[i64; 4]; 4]) -> Mat4<BigRational> {
        rat_matrix(m)
    }

    #[test]
    fn descartes_form_examples() {
        assert_eq!(v0().descartes_form().unwrap(), 0);
        assert_eq!(Q::from_i64([0, 0, 1, 1]).descartes_form().unwrap(), 0);
        assert_eq!(Q::from_i64([1, 1, 1, 1]).descartes_form().unwrap(), -8);
    }

    #[test]
    fn overflow_is_reported_then_promoted() {
        let big = Q::from_i64([i64::MAX / 2, 1, 1, 1]);
        assert!(matches!(big.descartes_form(), Err(Error::Overflow(_))));
        let promoted = descartes_form_promoting(&big);
        let direct = descartes_form(&big.to_bigint()).unwrap();
        assert_eq!(promoted, direct);
    }

    #[test]
    fn reflection_examples() {
        let s1 = reflection::<i64>(1).unwrap();
        assert_eq!(s1.apply_quadruple(&v0()).unwrap(), Q::from_i64([157, 21, 24, 28]));
        assert!(s1.checked_mul(&s1).unwrap().is_identity());
        let c1 = reflection::<i64>(4).unwrap().checked_mul(&reflection(3).unwrap()).unwrap();
        assert_eq!(c1, Mat4::from_i64([[1, 0, 0, 0], [0, 1, 0, 0], [2, 2, -1, 2], [6, 6, -2, 3]]));
        assert!(reflection::<i64>(0).is_err());
        assert!(reflection::<i64>(5).is_err());
        for i in 1..=4 {
            let s = reflection::<i64>(i).unwrap();
            assert!(s.preserves_descartes().unwrap());
            assert_eq!(s.determinant().unwrap(), -1);
        }
    }

    #[test]
    fn c2_matches_display() {
        let c2 = word_matrix::<i64>(&[2, 3]).unwrap();
        assert_eq!(c2, Mat4::from_i64([[1, 0, 0, 0], [6, 3, -2, 6], [2, 2, -1, 2], [0, 0, 0, 1]]));
        let tilde = {
            let j = j_matrix();
            j.inverse().unwrap().checked_mul(&c2.to_rational()).unwrap().checked_mul(&j).unwrap()
        };
        assert_eq!(tilde, rm([[1, 0, 0, 0], [0, 1, 4, 4], [0, 0, 1, 2], [0, 0, 0, 1]]));
        let t2 = Mat2::new(1i64, 0, 2, 1);
        assert_eq!(spin_rho(&t2).unwrap(), tilde);
    }

    #[test]
    fn reduce_examples() {
        let r = reduce_to_root(&v0()).unwrap();
        assert_eq!(r.root, v0());
        assert!(r.word.is_empty());
        let r = reduce_to_root(&Q::from_i64([157, 21, 24, 28])).unwrap();
        assert_eq!(r.root, v0());
        assert_eq!(r.word, vec![1]);
        let r = reduce_to_root(&Q::from_i64([-11, 21, 52, 96])).unwrap();
        assert_eq!(r.root, v0());
        assert_eq!(r.word, vec![4, 3]);
        assert!(matches!(reduce_to_root(&Q::from_i64([1, 1, 1, 1])), Err(Error::NotOnCone(_))));
        assert!(reduce_to_root(&Q::from_i64([11, -21, -24, -28])).is_err());
    }

    #[test]
    fn c1_power_examples() {
        assert!(unipotent_c1_power::<i64>(&0).unwrap().is_identity());
        assert_eq!(unipotent_c1_power::<i64>(&1).unwrap(), word_matrix(&[4, 3]).unwrap());
        assert_eq!(unipotent_c1_power::<i64>(&2).unwrap().0[3], [20, 20, -4, 5]);
        for n in -6i64..=6 {
            let t = Mat2::new(1i64, 2 * n, 0, 1);
            let via_rho = j_conjugate(&spin_rho(&t).unwrap()).to_integer::<i64>().unwrap();
            assert_eq!(via_rho, unipotent_c1_power(&n).unwrap());
        }
        let big = unipotent_c1_power::<BigInt>(&BigInt::from(10i64).pow(30)).unwrap();
        assert!(big.preserves_descartes().unwrap());
        assert!(matches!(unipotent_c1_power::<i64>(&(1i64 << 40)), Err(Error::Overflow(_))));
    }

    #[test]
    fn spin_rho_examples() {
        let t1 = Mat2::new(1i64, 2, 0, 1);
        assert_eq!(spin_rho(&t1).unwrap(), rm([[1, 0, 0, 0], [0, 1, 0, 0], [0, 2, 1, 0], [0, 4, 4, 1]]));
        assert!(spin_rho(&Mat2::<i64>::identity()).unwrap().is_identity());
        assert!(spin_rho(&Mat2::new(1i64, 2, 2, 4)).is_err());
        let g = Mat2::new(3i64, 1, 5, 2);
        assert_eq!(spin_rho(&g).unwrap(), spin_rho(&g.neg().unwrap()).unwrap());
    }

    #[test]
    fn w_vector_examples() {
        assert_eq!(w_vector::<i64>(&0, &1).unwrap(), Q::from_i64([0, 0, 0, 1]));
        assert_eq!(w_vector::<i64>(&1, &1).unwrap(), Q::from_i64([6, 6, -2, 3]));
        assert_eq!(w_vector::<i64>(&1, &-1).unwrap(), Q::from_i64([2, 2, 2, -1]));
        assert_eq!(reflection::<i64>(4).unwrap().0[3], [2, 2, 2, -1]);
        assert!(xi::<i64>(&1, &2).is_err());
        assert!(xi::<i64>(&3, &3).is_err());
    }

    #[test]
    fn gram_signature_via_charpoly() {
        // (λ − 2)³(λ + 2) = λ⁴ − 4λ³ + 0λ² + 16λ − 16.
        assert_eq!(gram::<i64>().charpoly().unwrap(), [-16, 16, 0, -4, 1]);
    }

    #[test]
    fn iota_basis_transforms_gram() {
        let p = iota_basis();
        let g = gram::<i64>().to_rational();
        assert_eq!(p.transpose().checked_mul(&g).unwrap().checked_mul(&p).unwrap(), gram_tilde());
    }

    #[test]
    fn iota_generators_land_in_gamma() {
        let expected: [&[u8]; 3] = [&[1, 2], &[1, 3], &[1, 4]];
        for (g, w) in iota_generators().iter().zip(expected) {
            let m = iota(g).unwrap();
            assert!(m.is_integral());
            let mi = m.to_integer::<i64>().unwrap();
            assert_eq!(apollonian_word(&mi).unwrap().unwrap(), w.to_vec());
            assert!(is_in_gamma(&mi).unwrap());
            assert_eq!(iota(&g.neg().unwrap()).unwrap(), m);
        }
        assert!(iota(&Mat2::<GaussInt<i64>>::identity()).unwrap().is_identity());
    }

    #[test]
    fn membership_rejects_odd_words_and_non_members() {
        let s1 = reflection::<i64>(1).unwrap();
        assert_eq!(apollonian_word(&s1).unwrap(), Some(vec![1]));
        assert!(!is_in_gamma(&s1).unwrap());
        let swap = Mat4::from_i64([[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]);
        assert_eq!(apollonian_word(&swap).unwrap(), None);
    }

    fn small_mat2() -> impl Strategy<Value = Mat2<i64>> {
        (-9i64..=9, -9i64..=9, -9i64..=9, -9i64..=9)
            .prop_filter("nonsingular", |&(a, b, c, d)| a * d - b * c != 0)
            .prop_map(|(a, b, c, d)| Mat2::new(a, b, c, d))
    }

    fn word() -> impl Strategy<Value = Vec<u8>> {
        prop::collection::vec(1u8..=4, 0..10)
    }

    fn gauss_sl2() -> impl Strategy<Value = Mat2<GaussInt<i64>>> {
        // Products of elementary matrices have determinant 1.
        prop::collection::vec((any::<bool>(), -3i64..=3, -3i64..=3), 0..5).prop_map(|steps| {
            let mut m = Mat2::<GaussInt<i64>>::identity();
            for (upper, re, im) in steps {
                let z = GaussInt::from_i64(re, im);
                let e = if upper {
                    Mat2::new(GaussInt::one(), z, GaussInt::zero(), GaussInt::one())
                } else {
                    Mat2::new(GaussInt::one(), GaussInt::zero(), z, GaussInt::one())
                };
                m = m.checked_mul(&e).unwrap();
            }
            m
        })
    }

    proptest! {
        #[test]
        fn reflections_preserve_cone(w in word(), i in 1usize..=4) {
            let v = word_matrix::<i64>(&w).unwrap().apply_quadruple(&v0()).unwrap();
            let s = reflection::<i64>(i).unwrap().apply_quadruple(&v).unwrap();
            prop_assert_eq!(s.descartes_form().unwrap(), 0);
        }

        #[test]
        fn swap_rule(a in -1000i64..1000, b in -1000i64..1000, c in -1000i64..1000, d in -1000i64..1000) {
            let s = reflection::<i64>(1).unwrap().apply_quadruple(&Q::from_i64([a, b, c, d])).unwrap();
            prop_assert_eq!(a + s.0[0], 2 * (b + c + d));
        }

        #[test]
        fn reduce_inverts_words(w in word()) {
            let v = word_matrix::<i64>(&w).unwrap().apply_quadruple(&v0()).unwrap();
            let r = reduce_to_root(&v).unwrap();
            prop_assert_eq!(&r.root, &v0());
            prop_assert_eq!(word_matrix::<i64>(&r.word).unwrap().apply_quadruple(&r.unsorted).unwrap(), v);
        }

        #[test]
        fn rho_reverses_products(g in small_mat2(), h in small_mat2()) {
            let hg = h.checked_mul(&g).unwrap();
            let lhs = spin_rho(&g).unwrap().checked_mul(&spin_rho(&h).unwrap()).unwrap();
            prop_assert_eq!(lhs, spin_rho(&hg).unwrap());
            prop_assert_eq!(spin_rho(&g.neg().unwrap()).unwrap(), spin_rho(&g).unwrap());
        }

        #[test]
        fn xi_bottom_row_is_w(x in -40i64..40, y in -80i64..80) {
            prop_assume!(num_integer::Integer::gcd(&(2 * x), &y) == 1);
            let m = xi::<i64>(&x, &y).unwrap();
            prop_assert_eq!(m.0[3].to_vec(), w_vector::<i64>(&x, &y).unwrap().0.to_vec());
            prop_assert!(m.preserves_descartes().unwrap());
            prop_assert!(is_in_gamma(&m).unwrap());
        }

        #[test]
        fn xi_row_independent_of_completion(x in -20i64..20, y in -40i64..40, k in -5i64..5) {
            prop_assume!(num_integer::Integer::gcd(&(2 * x), &y) == 1);
            let m = lambda2_completion::<i64>(&x, &y).unwrap();
            // Right multiplication by T₂ᵏ changes the first column only.
            let shifted = m.checked_mul(&Mat2::new(1, 0, 2 * k, 1)).unwrap();
            let a = j_conjugate(&spin_rho(&m).unwrap());
            let b = j_conjugate(&spin_rho(&shifted).unwrap());
            prop_assert_eq!(&a.0[3], &b.0[3]);
        }

        #[test]
        fn iota_preserves_form(g in gauss_sl2(), h in gauss_sl2()) {
            let gr = gram::<i64>().to_rational();
            let m = iota(&g).unwrap();
            prop_assert!(m.preserves(&gr).unwrap());
            let hg = h.checked_mul(&g).unwrap();
            prop_assert_eq!(m.checked_mul(&iota(&h).unwrap()).unwrap(), iota(&hg).unwrap());
        }
    }
}
