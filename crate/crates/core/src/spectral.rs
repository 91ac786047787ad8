//! Finite quotients of `Γ̄ ⊂ SL(2, ℤ[i])`, generation by alternating
//! products of two subgroups, and Markov-operator spectra on the Cayley
//! graphs of the quotients.

use std::collections::HashMap;
use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{inv_mod, is_prime};
use crate::descartes::{GaussInt, Mat2};
use crate::error::{invalid, Error, Result};

/// Default cap on closure sizes.
pub const SL2_CLOSURE_CAP: u64 = 50_000_000;

/// Eigensolver tolerance.
pub const EIGEN_TOL: f64 = 1e-8;

/// Iteration cap of the power-iteration cross-check.
pub const POWER_ITER_CAP: usize = 100_000;

/// Largest Krylov dimension used by Lanczos.
pub const LANCZOS_MAX_DIM: usize = 400;

/// An element of `ℤ[i]/(q)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GaussResidue {
    pub re: u32,
    pub im: u32,
    pub q: u32,
}

impl GaussResidue {
    pub fn new(re: i64, im: i64, q: u32) -> Self {
        let r = |x: i64| x.rem_euclid(q as i64) as u32;
        Self { re: r(re), im: r(im), q }
    }

    pub fn zero(q: u32) -> Self {
        Self::new(0, 0, q)
    }

    pub fn one(q: u32) -> Self {
        Self::new(1, 0, q)
    }

    pub fn add(self, o: Self) -> Self {
        Self::new(self.re as i64 + o.re as i64, self.im as i64 + o.im as i64, self.q)
    }

    pub fn sub(self, o: Self) -> Self {
        Self::new(self.re as i64 - o.re as i64, self.im as i64 - o.im as i64, self.q)
    }

    pub fn neg(self) -> Self {
        Self::new(-(self.re as i64), -(self.im as i64), self.q)
    }

    pub fn mul(self, o: Self) -> Self {
        let q = self.q as i128;
        let (a, b, c, d) = (self.re as i128, self.im as i128, o.re as i128, o.im as i128);
        Self {
            re: (a * c - b * d).rem_euclid(q) as u32,
            im: (a * d + b * c).rem_euclid(q) as u32,
            q: self.q,
        }
    }

    /// `a + bi` is a unit iff its norm `a² + b²` is prime to `q`.
    pub fn inverse(self) -> Option<Self> {
        let q = self.q as i64;
        let norm = (self.re as i64).pow(2) + (self.im as i64).pow(2);
        let ninv = inv_mod(norm.rem_euclid(q), q)?;
        Some(Self::new(self.re as i64 * ninv, -(self.im as i64) * ninv, self.q))
    }

    pub fn is_zero(self) -> bool {
        self.re == 0 && self.im == 0
    }
}

impl fmt::Display for GaussResidue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{}i", self.re, self.im)
    }
}

/// A 2×2 matrix over `ℤ[i]/(q)`, row-major.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GaussMat2q {
    pub q: u32,
    pub e: [GaussResidue; 4],
}

impl GaussMat2q {
    pub fn from_gauss(m: &Mat2<GaussInt<i64>>, q: u32) -> Self {
        let g = |x: &GaussInt<i64>| GaussResidue::new(x.re, x.im, q);
        Self { q, e: [g(&m.0[0][0]), g(&m.0[0][1]), g(&m.0[1][0]), g(&m.0[1][1])] }
    }

    /// From `[a, b, c, d]` given as `(re, im)` pairs.
    pub fn from_pairs(p: [(i64, i64); 4], q: u32) -> Self {
        Self { q, e: p.map(|(re, im)| GaussResidue::new(re, im, q)) }
    }

    pub fn identity(q: u32) -> Self {
        Self::from_pairs([(1, 0), (0, 0), (0, 0), (1, 0)], q)
    }

    pub fn mul(&self, o: &Self) -> Self {
        let [a, b, c, d] = self.e;
        let [w, x, y, z] = o.e;
        Self { q: self.q, e: [a.mul(w).add(b.mul(y)), a.mul(x).add(b.mul(z)), c.mul(w).add(d.mul(y)), c.mul(x).add(d.mul(z))] }
    }

    pub fn add(&self, o: &Self) -> Self {
        Self { q: self.q, e: std::array::from_fn(|k| self.e[k].add(o.e[k])) }
    }

    pub fn neg(&self) -> Self {
        Self { q: self.q, e: self.e.map(GaussResidue::neg) }
    }

    pub fn det(&self) -> GaussResidue {
        let [a, b, c, d] = self.e;
        a.mul(d).sub(b.mul(c))
    }

    /// Inverse of a determinant-one matrix.
    pub fn adjugate(&self) -> Self {
        let [a, b, c, d] = self.e;
        Self { q: self.q, e: [d, b.neg(), c.neg(), a] }
    }

    pub fn is_zero(&self) -> bool {
        self.e.iter().all(|x| x.is_zero())
    }

    /// Eight 16-bit components `a.re, a.im, …, d.im`, little-endian.
    pub fn pack(&self) -> u128 {
        self.e
            .iter()
            .flat_map(|x| [x.re, x.im])
            .enumerate()
            .fold(0u128, |acc, (k, c)| acc | (c as u128) << (16 * k))
    }

    pub fn unpack(key: u128, q: u32) -> Self {
        let c = |k: usize| ((key >> (16 * k)) & 0xffff) as i64;
        Self::from_pairs([(c(0), c(1)), (c(2), c(3)), (c(4), c(5)), (c(6), c(7))], q)
    }
}

impl fmt::Display for GaussMat2q {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} {}; {} {}) mod {}", self.e[0], self.e[1], self.e[2], self.e[3], self.q)
    }
}

#[inline]
fn mul_packed(x: u128, y: u128, q: u64) -> u128 {
    let c = |v: u128, k: usize| ((v >> (16 * k)) & 0xffff) as u64;
    let xs: [u64; 8] = std::array::from_fn(|k| c(x, k));
    let ys: [u64; 8] = std::array::from_fn(|k| c(y, k));
    let mut out = 0u128;
    for r in 0..2 {
        for col in 0..2 {
            let (mut re, mut im) = (0u64, 0u64);
            for t in 0..2 {
                let (a, b) = (xs[2 * (2 * r + t)], xs[2 * (2 * r + t) + 1]);
                let (u, v) = (ys[2 * (2 * t + col)], ys[2 * (2 * t + col) + 1]);
                re += a * u + q * q - b * v;
                im += a * v + b * u;
            }
            let slot = 2 * r + col;
            out |= ((re % q) as u128) << (32 * slot) | ((im % q) as u128) << (32 * slot + 16);
        }
    }
    out
}

/// `γ₁, γ₂, γ₃` over `ℤ[i]`.
pub fn gamma_bar_generators() -> [Mat2<GaussInt<i64>>; 3] {
    let g = GaussInt::<i64>::from_i64;
    [
        Mat2::new(g(1, 0), g(4, 0), g(0, 0), g(1, 0)),
        Mat2::new(g(1, 0), g(0, 0), g(1, 0), g(1, 0)),
        Mat2::new(g(1, 2), g(4, 0), g(1, 0), g(1, -2)),
    ]
}

/// `{±γ^{±1}}` for the chosen generators mod `q`, deduplicated, in a fixed order.
pub fn symmetric_set(which: &[usize], q: u32) -> Vec<GaussMat2q> {
    let gens = gamma_bar_generators();
    let mut out: Vec<GaussMat2q> = Vec::new();
    for &w in which {
        let g = GaussMat2q::from_gauss(&gens[w], q);
        for h in [g, g.adjugate(), g.neg(), g.adjugate().neg()] {
            if !out.contains(&h) {
                out.push(h);
            }
        }
    }
    out
}

/// `S̄ = {±γ₁^{±1}, ±γ₂^{±1}, ±γ₃^{±1}}` mod `q`.
pub fn s_bar(q: u32) -> Vec<GaussMat2q> {
    symmetric_set(&[0, 1, 2], q)
}

/// Result of conjugating the original generators into `γ₁, γ₂, γ₃`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceReport {
    /// `A⁻¹gA` for each original generator.
    pub conjugated: Vec<Mat2<GaussInt<i64>>>,
    /// The conjugates after the off-diagonal twist.
    pub twisted: Vec<Mat2<GaussInt<i64>>>,
    /// `±1` with `twisted[k] = sign·γ_{k+1}`, or 0 on mismatch.
    pub signs: Vec<i64>,
    pub holds: bool,
}

/// Conjugation by `A = (1 i; 0 1)` followed by scaling `b` by `−i` and `c` by `i`.
pub fn generator_correspondence_check() -> Result<CorrespondenceReport> {
    let g = GaussInt::<i64>::from_i64;
    let a = Mat2::new(g(1, 0), g(0, 1), g(0, 0), g(1, 0));
    let a_inv = a.adjugate()?;
    let originals = crate::descartes::iota_generators();
    let targets = gamma_bar_generators();
    let mut report = CorrespondenceReport { conjugated: vec![], twisted: vec![], signs: vec![], holds: true };
    for (orig, target) in originals.iter().zip(&targets) {
        let c = a_inv.checked_mul(orig)?.checked_mul(&a)?;
        let m = &c.0;
        let minus_i = g(0, -1);
        let plus_i = g(0, 1);
        let t = Mat2::new(
            m[0][0],
            crate::scalar::mul(&m[0][1], &minus_i, "twist")?,
            crate::scalar::mul(&m[1][0], &plus_i, "twist")?,
            m[1][1],
        );
        let sign = if &t == target {
            1
        } else if t == target.neg()? {
            -1
        } else {
            0
        };
        report.holds &= sign != 0;
        report.conjugated.push(c);
        report.twisted.push(t);
        report.signs.push(sign);
    }
    Ok(report)
}

/// A finite subgroup of `SL(2, ℤ[i]/(q))`, elements in breadth-first order.
#[derive(Clone, Debug)]
pub struct Sl2Closure {
    pub q: u32,
    pub generators: Vec<GaussMat2q>,
    pub elements: Vec<u128>,
    index: HashMap<u128, u32>,
}

impl Sl2Closure {
    pub fn order(&self) -> u64 {
        self.elements.len() as u64
    }

    pub fn contains(&self, g: &GaussMat2q) -> bool {
        self.index.contains_key(&g.pack())
    }

    pub fn position(&self, g: &GaussMat2q) -> Option<usize> {
        self.index.get(&g.pack()).map(|&i| i as usize)
    }

    pub fn element(&self, i: usize) -> GaussMat2q {
        GaussMat2q::unpack(self.elements[i], self.q)
    }

    /// `perm[i] = position(s·gᵢ)`.
    pub fn left_action(&self, s: &GaussMat2q) -> Vec<u32> {
        let sk = s.pack();
        let q = self.q as u64;
        self.elements.par_iter().map(|&g| self.index[&mul_packed(sk, g, q)]).collect()
    }

    /// `perm[i] = position(gᵢ·s)`.
    pub fn right_action(&self, s: &GaussMat2q) -> Vec<u32> {
        let sk = s.pack();
        let q = self.q as u64;
        self.elements.par_iter().map(|&g| self.index[&mul_packed(g, sk, q)]).collect()
    }
}

/// Breadth-first closure of `gens` mod `q`.
pub fn quotient_closure_sl2(q: u32, gens: &[GaussMat2q], cap: u64) -> Result<Sl2Closure> {
    if q == 0 || q > u16::MAX as u32 {
        return invalid(format!("modulus {q} outside 1..=65535"));
    }
    if gens.iter().any(|g| g.q != q) {
        return invalid("generator modulus mismatch");
    }
    let keys: Vec<u128> = gens.iter().map(GaussMat2q::pack).collect();
    let id = GaussMat2q::identity(q).pack();
    let mut index = HashMap::from([(id, 0u32)]);
    let mut elements = vec![id];
    let mut frontier = vec![id];
    while !frontier.is_empty() {
        let candidates: Vec<u128> = frontier
            .par_iter()
            .flat_map_iter(|&x| keys.iter().map(move |&g| mul_packed(x, g, q as u64)))
            .collect();
        let mut next = Vec::new();
        for c in candidates {
            if !index.contains_key(&c) {
                index.insert(c, elements.len() as u32);
                elements.push(c);
                next.push(c);
                if elements.len() as u64 > cap {
                    return Err(Error::ResourceCap { what: format!("SL(2, Z[i]/{q}) closure"), limit: cap });
                }
            }
        }
        frontier = next;
    }
    Ok(Sl2Closure { q, generators: gens.to_vec(), elements, index })
}

/// `Γ̄/Γ̄(q)`.
pub fn gamma_bar_closure(q: u32, cap: u64) -> Result<Sl2Closure> {
    quotient_closure_sl2(q, &s_bar(q), cap)
}

/// `H₁ = ⟨±γ₁, ±γ₂⟩` mod `q`.
pub fn h1_closure(q: u32, cap: u64) -> Result<Sl2Closure> {
    quotient_closure_sl2(q, &symmetric_set(&[0, 1], q), cap)
}

/// `H₂ = ⟨±γ₁, ±γ₃⟩` mod `q`.
pub fn h2_closure(q: u32, cap: u64) -> Result<Sl2Closure> {
    quotient_closure_sl2(q, &symmetric_set(&[0, 2], q), cap)
}

/// `|SL(2, ℤ[i]/(q))|` by listing all matrices; for tiny `q` only.
pub fn sl2_gauss_order_by_enumeration(q: u32) -> Result<u64> {
    if q == 0 || q > 4 {
        return invalid("enumeration oracle limited to q ≤ 4");
    }
    let n = (q * q) as u64;
    let res = |k: u64| GaussResidue::new((k % q as u64) as i64, (k / q as u64) as i64, q);
    let one = GaussResidue::one(q);
    let mut count = 0;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    if res(a).mul(res(d)).sub(res(b).mul(res(c))) == one {
                        count += 1;
                    }
                }
            }
        }
    }
    Ok(count)
}

/// `{(a b; c d) ∈ SL(2, ℤ/q) : b ≡ 0 mod gcd(4, q)}` as packed Gaussian matrices.
pub fn b_divisible_by_four_subgroup(q: u32) -> Vec<u128> {
    let m = num_integer::gcd(4, q);
    let qi = q as i64;
    let mut out = Vec::new();
    for a in 0..qi {
        for b in (0..qi).filter(|b| b % m as i64 == 0) {
            for c in 0..qi {
                for d in 0..qi {
                    if (a * d - b * c - 1).rem_euclid(qi) == 0 {
                        out.push(GaussMat2q::from_pairs([(a, 0), (b, 0), (c, 0), (d, 0)], q).pack());
                    }
                }
            }
        }
    }
    out
}

struct Bitset(Vec<u64>);

impl Bitset {
    fn new(n: usize) -> Self {
        Self(vec![0; n.div_ceil(64)])
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }
    fn count(&self) -> u64 {
        self.0.iter().map(|w| w.count_ones() as u64).sum()
    }
}

/// Left cosets `gH` of a subgroup, labelled by connected components of
/// right multiplication by the subgroup's generators.
struct Cosets {
    label: Vec<u32>,
    members: Vec<Vec<u32>>,
}

impl Cosets {
    fn new(g: &Sl2Closure, h_gens: &[GaussMat2q]) -> Self {
        let moves: Vec<Vec<u32>> = h_gens.iter().map(|s| g.right_action(s)).collect();
        let n = g.elements.len();
        let mut label = vec![u32::MAX; n];
        let mut members = Vec::new();
        for start in 0..n {
            if label[start] != u32::MAX {
                continue;
            }
            let id = members.len() as u32;
            let mut coset = vec![start as u32];
            label[start] = id;
            let mut k = 0;
            while k < coset.len() {
                let x = coset[k] as usize;
                for mv in &moves {
                    let y = mv[x] as usize;
                    if label[y] == u32::MAX {
                        label[y] = id;
                        coset.push(y as u32);
                    }
                }
                k += 1;
            }
            members.push(coset);
        }
        Self { label, members }
    }

    /// `A·H` for `A` given as a bitset.
    fn saturate(&self, a: &Bitset) -> Bitset {
        let mut hit = vec![false; self.members.len()];
        for (i, &l) in self.label.iter().enumerate() {
            if a.get(i) {
                hit[l as usize] = true;
            }
        }
        let mut out = Bitset::new(self.label.len());
        for (c, _) in hit.iter().enumerate().filter(|(_, &h)| h) {
            for &i in &self.members[c] {
                out.set(i as usize);
            }
        }
        out
    }
}

/// Growth of `A_k(q) = {g₁h₁⋯g_kh_k}` inside `Γ̄/Γ̄(q)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alternation {
    pub q: u32,
    /// Least `k` with `A_k(q)` the whole quotient; `None` if `k_max` was reached first.
    pub k: Option<u32>,
    /// `|A_j(q)|` for `j = 0, 1, …`.
    pub sizes: Vec<u64>,
    pub group_order: u64,
    pub h1_order: u64,
    pub h2_order: u64,
}

/// Iterate `A_{j+1} = A_j·H₁·H₂` until it fills `Γ̄/Γ̄(q)` or `k_max` steps pass.
pub fn alternation_length(q: u32, k_max: u32, cap: u64) -> Result<Alternation> {
    let g = gamma_bar_closure(q, cap)?;
    let h1 = symmetric_set(&[0, 1], q);
    let h2 = symmetric_set(&[0, 2], q);
    let h1_order = quotient_closure_sl2(q, &h1, cap)?.order();
    let h2_order = quotient_closure_sl2(q, &h2, cap)?.order();
    let c1 = Cosets::new(&g, &h1);
    let c2 = Cosets::new(&g, &h2);
    let n = g.elements.len();
    let mut a = Bitset::new(n);
    a.set(0);
    let mut sizes = vec![1];
    let mut k = None;
    for j in 1..=k_max {
        a = c2.saturate(&c1.saturate(&a));
        let size = a.count();
        sizes.push(size);
        if size == n as u64 {
            k = Some(j);
            break;
        }
    }
    if n == 1 {
        k = Some(0);
    }
    Ok(Alternation { q, k, sizes, group_order: n as u64, h1_order, h2_order })
}

/// One displayed congruence `X₁ + γ₃X₂γ₃⁻¹ + γ₃²X₃γ₃⁻² ≡ Y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalIdentity {
    pub lhs: [(i64, i64); 4],
    pub rhs: [(i64, i64); 4],
    pub holds: bool,
}

type Pairs = [(i64, i64); 4];

fn real(m: [i64; 4]) -> Pairs {
    m.map(|x| (x, 0))
}

fn scaled(s: i64, m: Pairs) -> Pairs {
    m.map(|(a, b)| (s * a, s * b))
}

fn identity_table(p: u64, m: u32) -> Result<Vec<(Pairs, Pairs, Pairs, Pairs)>> {
    let pw = |e: i64| -> Result<i64> {
        if e < 0 {
            return invalid(format!("level {m} too small for p = {p}"));
        }
        Ok((p as i64).pow(e as u32))
    };
    let m = m as i64;
    let z = real([0, 0, 0, 0]);
    let e12 = real([0, 1, 0, 0]);
    let e21 = real([0, 0, 1, 0]);
    Ok(match p {
        2 => {
            let (t1, t2, t3, t4) = (pw(m - 1)?, pw(m - 2)?, pw(m - 3)?, pw(m - 4)?);
            vec![
                (scaled(t1, e12), z, z, scaled(t1, e12)),
                (scaled(t1, e21), z, z, scaled(t1, e21)),
                (scaled(t1, real([1, 0, 0, -1])), z, z, scaled(t1, real([1, 0, 0, -1]))),
                (scaled(t2, real([1, 3, 1, -1])), scaled(t2, e12), z, scaled(t1, [(0, -1), (0, 0), (0, 0), (0, 1)])),
                (scaled(t3, real([-4, 0, 3, 4])), scaled(t3, e21), z, scaled(t1, [(0, 0), (0, 0), (0, 1), (0, 0)])),
                (scaled(t4, real([2, 15, 4, -2])), z, scaled(t4, e12), scaled(t1, [(0, -1), (0, 1), (0, 0), (0, 1)])),
            ]
        }
        3 => {
            let t = pw(m - 1)?;
            vec![
                (scaled(t, real([1, 3, 1, -1])), scaled(t, e12), z, scaled(t, [(0, 1), (0, 1), (0, 0), (0, -1)])),
                (scaled(t, real([-4, 16, 3, 4])), scaled(t, e21), z, scaled(t, [(0, 1), (0, 0), (0, -1), (0, -1)])),
                (scaled(t, real([2, 15, 4, -2])), z, scaled(t, e12), scaled(t, [(0, 1), (0, -1), (0, 0), (0, -1)])),
            ]
        }
        _ => return invalid(format!("local identities exist for p = 2, 3 only, got {p}")),
    })
}

/// Check every displayed congruence mod `p^m`, `p ∈ {2, 3}`.
pub fn local_identity_check(p: u64, m: u32) -> Result<Vec<LocalIdentity>> {
    let min_level = if p == 2 { 4 } else { 1 };
    if m < min_level {
        return invalid(format!("level m = {m} below {min_level} for p = {p}"));
    }
    let q = p.checked_pow(m).filter(|&q| q <= u16::MAX as u64).ok_or_else(|| Error::InvalidInput(format!("{p}^{m} too large")))? as u32;
    let g3 = GaussMat2q::from_gauss(&gamma_bar_generators()[2], q);
    let g3i = g3.adjugate();
    let g3s = g3.mul(&g3);
    let g3si = g3s.adjugate();
    Ok(identity_table(p, m)?
        .into_iter()
        .map(|(x1, x2, x3, y)| {
            let f = |x: Pairs| GaussMat2q::from_pairs(x, q);
            let total = f(x1).add(&g3.mul(&f(x2)).mul(&g3i)).add(&g3s.mul(&f(x3)).mul(&g3si));
            LocalIdentity { lhs: pairs_of(&total), rhs: pairs_of(&f(y)), holds: total == f(y) }
        })
        .collect())
}

fn pairs_of(m: &GaussMat2q) -> Pairs {
    m.e.map(|x| (x.re as i64, x.im as i64))
}

/// `diag(a⁻¹,a)·(½ 0; −⅛ 2)·γ₃²·(1 0; ⅛ 1)·γ₃⁻¹·diag(a,a⁻¹) ≡ (1 0; −3ia²/2 1)` mod `p^m`.
pub fn unipotent_conjugation_identity(p: u64, m: u32, a: i64) -> Result<bool> {
    if p < 5 || !is_prime(p) {
        return invalid(format!("p = {p}: need a prime p ≥ 5"));
    }
    if m == 0 {
        return invalid("m must be positive");
    }
    let q = p.checked_pow(m).filter(|&q| q <= u16::MAX as u64).ok_or_else(|| Error::InvalidInput(format!("{p}^{m} too large")))? as i64;
    let ainv = inv_mod(a, q).ok_or_else(|| Error::InvalidInput(format!("{a} is not a unit mod {p}")))?;
    let half = inv_mod(2, q).expect("p odd");
    let eighth = inv_mod(8, q).expect("p odd");
    let qq = q as u32;
    let f = |x: Pairs| GaussMat2q::from_pairs(x, qq);
    let g3 = GaussMat2q::from_gauss(&gamma_bar_generators()[2], qq);
    let lhs = f(real([ainv, 0, 0, a]))
        .mul(&f(real([half, 0, -eighth, 2])))
        .mul(&g3.mul(&g3))
        .mul(&f(real([1, 0, eighth, 1])))
        .mul(&g3.adjugate())
        .mul(&f(real([a, 0, 0, ainv])));
    let c = (-3 * a % q * a % q * half).rem_euclid(q);
    Ok(lhs == f([(1, 0), (0, 0), (0, c), (1, 0)]))
}

fn sqrt_mod_prime(t: u64, p: u64) -> Option<u64> {
    (1..p).find(|&r| r * r % p == t % p)
}

/// Units `a₁, …, a_k` (`k ≤ 4`) mod `p^m` with `Σ aᵢ² ≡ x`; empty only when
/// no nonempty choice exists.
pub fn sum_of_unit_squares(x: i64, p: u64, m: u32) -> Result<Vec<u64>> {
    if p < 3 || !is_prime(p) {
        return invalid(format!("p = {p}: need an odd prime"));
    }
    if m == 0 {
        return invalid("m must be positive");
    }
    let q = p.checked_pow(m).filter(|&q| q < 1 << 31).ok_or_else(|| Error::InvalidInput(format!("{p}^{m} too large")))?;
    let xr = x.rem_euclid(q as i64) as u64;
    let squares: Vec<u64> = (1..p).map(|a| a * a % p).collect();
    let target = xr % p;
    // search mod p for the fewest unit squares
    let mut base: Option<Vec<u64>> = None;
    'outer: for k in 1..=4usize {
        let mut idx = vec![0usize; k];
        loop {
            let s: u64 = idx.iter().map(|&i| squares[i]).sum::<u64>() % p;
            if s == target {
                base = Some(idx.iter().map(|&i| i as u64 + 1).collect());
                break 'outer;
            }
            let mut j = 0;
            while j < k && idx[j] == squares.len() - 1 {
                idx[j] = 0;
                j += 1;
            }
            if j == k {
                break;
            }
            idx[j] += 1;
        }
    }
    let Some(mut a) = base else {
        return if xr == 0 { Ok(vec![]) } else { Err(Error::Unsupported(format!("no unit squares for {x} mod {p}"))) };
    };
    // lift a₁ so that a₁² ≡ x − Σ_{i>1} aᵢ² mod p^m
    let rest: u64 = a[1..].iter().map(|&v| v * v % q).sum::<u64>() % q;
    let t = (xr + q - rest) % q;
    let mut r = sqrt_mod_prime(t % p, p).expect("square mod p");
    if a[0] * a[0] % p == r * r % p {
        r = a[0];
    }
    let qi = q as i64;
    for _ in 0..m.max(1) * 2 {
        let ri = r as i64;
        let f = ((ri as i128 * ri as i128 - t as i128).rem_euclid(qi as i128)) as i64;
        if f == 0 {
            break;
        }
        let d = inv_mod(2 * ri % qi, qi).expect("unit");
        r = (ri - (f as i128 * d as i128 % qi as i128) as i64).rem_euclid(qi) as u64;
    }
    a[0] = r;
    Ok(a)
}

/// Top of the spectrum of `T_{G,S}f(g) = (1/|S|)Σ_{γ∈S} f(γg)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CayleySpectrum {
    pub q: u32,
    /// The deduplicated generating set, as `(re, im)` pairs `[a, b, c, d]`.
    pub generators: Vec<[(i64, i64); 4]>,
    pub s_size: usize,
    pub order: u64,
    /// `λ₀′ = 1` followed by the leading Ritz values on the mean-zero subspace.
    pub eigenvalues: Vec<f64>,
    /// `λ₁′`, or 0 when the group is trivial.
    pub lambda1: f64,
    /// Smallest Ritz value.
    pub lambda_min: f64,
    /// `‖Tx − λ₁′x‖` of the returned eigenvector.
    pub residual: f64,
    /// Agreement of the power-iteration cross-check.
    pub cross_check: f64,
    pub krylov_dim: usize,
}

struct MarkovOperator {
    perms: Vec<Vec<u32>>,
    n: usize,
}

impl MarkovOperator {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let w = 1.0 / self.perms.len() as f64;
        y.par_iter_mut().enumerate().for_each(|(g, out)| {
            *out = w * self.perms.iter().map(|p| x[p[g] as usize]).sum::<f64>();
        });
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.par_iter().zip(b).map(|(x, y)| x * y).sum()
}

fn deflate(x: &mut [f64]) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= mean);
}

fn normalize(x: &mut [f64]) -> f64 {
    let n = dot(x, x).sqrt();
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
    n
}

/// Spectrum of the Markov operator of `closure` with generating set `s`.
///
/// Lanczos with full reorthogonalization on the mean-zero subspace; the top
/// Ritz pair is then refined by deflated power iteration on `(T + I)/2`, and
/// the two estimates must agree to `1e-6`.
pub fn markov_spectrum(closure: &Sl2Closure, s: &[GaussMat2q], seed: u64) -> Result<CayleySpectrum> {
    let q = closure.q;
    let mut gens: Vec<GaussMat2q> = Vec::new();
    for g in s {
        if !gens.contains(g) {
            gens.push(*g);
        }
    }
    if gens.iter().any(|g| !closure.contains(g)) {
        return invalid("generator outside the group");
    }
    if gens.iter().any(|g| !gens.contains(&g.adjugate())) {
        return invalid("generating set is not symmetric");
    }
    let n = closure.elements.len();
    let base = CayleySpectrum {
        q,
        generators: gens.iter().map(pairs_of).collect(),
        s_size: gens.len(),
        order: n as u64,
        eigenvalues: vec![1.0],
        lambda1: 0.0,
        lambda_min: 1.0,
        residual: 0.0,
        cross_check: 0.0,
        krylov_dim: 0,
    };
    if n == 1 {
        return Ok(base);
    }
    let op = MarkovOperator { perms: gens.iter().map(|g| closure.left_action(g)).collect(), n };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    deflate(&mut v);
    normalize(&mut v);
    let max_dim = (n - 1).min(LANCZOS_MAX_DIM);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; op.n];
    let mut ritz: (Vec<f64>, Vec<f64>, f64);
    loop {
        op.apply(&v, &mut w);
        let a = dot(&w, &v);
        basis.push(v.clone());
        alpha.push(a);
        deflate(&mut w);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                w.par_iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let bnorm = dot(&w, &w).sqrt();
        let m = alpha.len();
        let done = bnorm < 1e-12 || m >= max_dim;
        if done || m % 10 == 0 {
            let t = DMatrix::from_fn(m, m, |i, j| {
                if i == j {
                    alpha[i]
                } else if i + 1 == j {
                    beta[i]
                } else if j + 1 == i {
                    beta[j]
                } else {
                    0.0
                }
            });
            let eig = t.symmetric_eigen();
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
            let top = order[0];
            let res = if bnorm < 1e-12 { 0.0 } else { (bnorm * eig.eigenvectors[(m - 1, top)]).abs() };
            let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
            ritz = (vals, eig.eigenvectors.column(top).iter().copied().collect(), res);
            if done || res < EIGEN_TOL * 1e-2 {
                break;
            }
        }
        beta.push(bnorm);
        v = w.iter().map(|x| x / bnorm).collect();
    }
    let (vals, y, _) = ritz;
    let lanczos_top = vals[0];
    let mut x = vec![0.0; n];
    for (coef, b) in y.iter().zip(&basis) {
        x.iter_mut().zip(b).for_each(|(xi, bi)| *xi += coef * bi);
    }
    deflate(&mut x);
    normalize(&mut x);

    // power iteration on (T + I)/2 restricted to mean-zero vectors
    let mut tx = vec![0.0; n];
    let mut lambda = f64::NAN;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < POWER_ITER_CAP {
        iterations += 1;
        op.apply(&x, &mut tx);
        let rq = dot(&x, &tx);
        let change = (rq - lambda).abs();
        lambda = rq;
        let mut next: Vec<f64> = tx.iter().zip(&x).map(|(t, xi)| 0.5 * (t + xi)).collect();
        deflate(&mut next);
        normalize(&mut next);
        x = next;
        if change < EIGEN_TOL && iterations >= 3 {
            converged = true;
            break;
        }
    }
    op.apply(&x, &mut tx);
    let lambda1 = dot(&x, &tx);
    let residual = tx.iter().zip(&x).map(|(t, xi)| (t - lambda1 * xi).powi(2)).sum::<f64>().sqrt();
    let cross_check = (lambda1 - lanczos_top).abs();
    if !converged || cross_check > 1e-6 {
        return Err(Error::NonConvergence { iterations, residual: residual.max(cross_check) });
    }
    let mut eigenvalues = vec![1.0];
    eigenvalues.push(lambda1);
    eigenvalues.extend(vals.iter().skip(1).take(5));
    Ok(CayleySpectrum {
        eigenvalues,
        lambda1,
        lambda_min: *vals.last().expect("nonempty"),
        residual,
        cross_check,
        krylov_dim: alpha.len(),
        ..base
    })
}

/// `λ₁′(Γ̄/Γ̄(q), S̄)`.
pub fn gamma_bar_spectrum(q: u32, cap: u64) -> Result<CayleySpectrum> {
    let g = gamma_bar_closure(q, cap)?;
    markov_spectrum(&g, &s_bar(q), 0)
}

/// One factor `Gᵢ` of the transference bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferenceTerm {
    pub name: String,
    pub order: u64,
    /// `|S ∩ Gᵢ|`.
    pub s_intersection: usize,
    pub lambda1: f64,
    /// `(|S∩Gᵢ|/|S|)·(1 − λ₁′(Gᵢ, S∩Gᵢ))`.
    pub weight: f64,
}

/// Both sides of `1 − λ₁′(G,S) ≥ minᵢ (|S∩Gᵢ|/|S|)(1 − λ₁′(Gᵢ,S∩Gᵢ))/(2k′²)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferenceReport {
    pub q: u32,
    pub group_order: u64,
    pub s_size: usize,
    pub lambda1: f64,
    /// Alternation length `k`; the factorisation uses `k′ = 2k` factors.
    pub k: u32,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub terms: Vec<TransferenceTerm>,
    /// With `H₁ = G`, the single-factor bound `(|S∩H₁|/|S|)(1 − λ₁′(H₁))/2`.
    pub single_factor: Option<(f64, bool)>,
}

/// Evaluate the transference inequality for `Γ̄/Γ̄(q)` with `G₁, …, G_{2k}`
/// alternating between `H₁` and `H₂`.
pub fn transference_check(q: u32, k_max: u32, cap: u64) -> Result<TransferenceReport> {
    if q < 2 {
        return invalid("transference needs q ≥ 2");
    }
    let alt = alternation_length(q, k_max, cap)?;
    let k = alt.k.ok_or_else(|| Error::ResourceCap { what: format!("alternation length mod {q}"), limit: k_max as u64 })?;
    let g = gamma_bar_closure(q, cap)?;
    let s = s_bar(q);
    let spec = markov_spectrum(&g, &s, 0)?;
    let lhs = 1.0 - spec.lambda1;
    let mut terms = Vec::new();
    for (name, which) in [("H1", [0usize, 1]), ("H2", [0, 2])] {
        let h = quotient_closure_sl2(q, &symmetric_set(&which, q), cap)?;
        if h.order() == 1 {
            continue;
        }
        let inter: Vec<GaussMat2q> = s.iter().filter(|x| h.contains(x)).copied().collect();
        let hs = markov_spectrum(&h, &inter, 0)?;
        let weight = inter.len() as f64 / s.len() as f64 * (1.0 - hs.lambda1);
        terms.push(TransferenceTerm { name: name.into(), order: h.order(), s_intersection: inter.len(), lambda1: hs.lambda1, weight });
    }
    let kp = 2.0 * k as f64;
    let rhs = terms.iter().map(|t| t.weight).fold(f64::INFINITY, f64::min) / (2.0 * kp * kp);
    let single_factor = terms.iter().find(|t| t.name == "H1" && t.order == g.order()).map(|t| {
        let r = t.weight / 2.0;
        (r, lhs >= r - EIGEN_TOL)
    });
    Ok(TransferenceReport {
        q,
        group_order: g.order(),
        s_size: s.len(),
        lambda1: spec.lambda1,
        k,
        lhs,
        rhs,
        holds: lhs >= rhs - EIGEN_TOL,
        terms,
        single_factor,
    })
}
