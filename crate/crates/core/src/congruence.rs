//! Finite quotients `Γ/Γ(q)`, admissible residues and orbits mod `q`.

use std::collections::{BTreeSet, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith;
use crate::descartes::{word_matrix, Quadruple};
use crate::error::{invalid, Error, Result};

/// Default cap on closure sizes.
pub const DEFAULT_CLOSURE_CAP: u64 = 100_000_000;

/// A 4×4 matrix with entries in `[0, q)`, stored row-major.
pub type Residues = [u16; 16];

/// Row-major residues mod `q`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResidueMatrix {
    pub q: u32,
    pub entries: Residues,
}

impl ResidueMatrix {
    pub fn from_integer(m: &[[i64; 4]; 4], q: u32) -> Self {
        let mut entries = [0u16; 16];
        for (k, e) in entries.iter_mut().enumerate() {
            *e = m[k / 4][k % 4].rem_euclid(q as i64) as u16;
        }
        Self { q, entries }
    }

    pub fn identity(q: u32) -> Self {
        let id: [[i64; 4]; 4] = std::array::from_fn(|i| std::array::from_fn(|j| (i == j) as i64));
        Self::from_integer(&id, q)
    }

    /// Little-endian byte encoding, two bytes per entry.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.entries.iter().flat_map(|e| e.to_le_bytes()).collect()
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        Self { q: self.q, entries: mul_residues(&self.entries, &rhs.entries, self.q) }
    }

    /// Reduce to a divisor modulus.
    pub fn reduce(&self, d: u32) -> Self {
        Self { q: d, entries: self.entries.map(|e| (e as u32 % d) as u16) }
    }

    pub fn determinant(&self) -> i64 {
        let m: [[i64; 4]; 4] = std::array::from_fn(|i| std::array::from_fn(|j| self.entries[4 * i + j] as i64));
        let det = crate::descartes::Mat4(m).determinant().expect("small entries");
        det.rem_euclid(self.q as i64)
    }

    /// Whether `mᵗ·(2I − J)·m ≡ 2I − J`.
    pub fn preserves_descartes(&self) -> bool {
        let q = self.q as i64;
        let e = |i: usize, j: usize| self.entries[4 * i + j] as i64;
        (0..4).all(|i| {
            (0..4).all(|j| {
                // (mᵗGm)ᵢⱼ = 2Σₖ mₖᵢmₖⱼ − (Σₖ mₖᵢ)(Σₖ mₖⱼ)
                let dot: i64 = (0..4).map(|k| e(k, i) * e(k, j)).sum();
                let ci: i64 = (0..4).map(|k| e(k, i)).sum();
                let cj: i64 = (0..4).map(|k| e(k, j)).sum();
                let g = if i == j { 1 } else { -1 };
                (2 * dot - ci * cj - g).rem_euclid(q) == 0
            })
        })
    }
}

#[inline]
fn mul_residues(a: &Residues, b: &Residues, q: u32) -> Residues {
    let mut out = [0u16; 16];
    for i in 0..4 {
        for j in 0..4 {
            let mut s = 0u64;
            for k in 0..4 {
                s += a[4 * i + k] as u64 * b[4 * k + j] as u64;
            }
            out[4 * i + j] = (s % q as u64) as u16;
        }
    }
    out
}

/// The image of `Γ` in `GL₄(ℤ/q)`.
#[derive(Clone, Debug)]
pub struct QuotientClosure {
    pub q: u32,
    pub elements: Vec<Residues>,
    pub generators: Vec<Residues>,
    index: HashMap<Residues, u32>,
}

impl QuotientClosure {
    pub fn order(&self) -> u64 {
        self.elements.len() as u64
    }

    pub fn contains(&self, m: &Residues) -> bool {
        self.index.contains_key(m)
    }

    pub fn position(&self, m: &Residues) -> Option<usize> {
        self.index.get(m).map(|&i| i as usize)
    }

    pub fn matrices(&self) -> impl Iterator<Item = ResidueMatrix> + '_ {
        self.elements.iter().map(|&entries| ResidueMatrix { q: self.q, entries })
    }
}

/// Generators `S₁S₂, S₂S₃, S₃S₄` of `Γ` reduced mod `q`.
pub fn gamma_generators(q: u32) -> Vec<Residues> {
    [[1u8, 2], [2, 3], [3, 4]]
        .iter()
        .map(|w| ResidueMatrix::from_integer(&word_matrix::<i64>(w).expect("small").0, q).entries)
        .collect()
}

/// Breadth-first closure of `generators` under right multiplication mod `q`.
pub fn close_under(q: u32, generators: &[Residues], cap: u64) -> Result<QuotientClosure> {
    if q == 0 || q > u16::MAX as u32 {
        return invalid(format!("modulus {q} outside 1..=65535"));
    }
    let id = ResidueMatrix::identity(q).entries;
    let mut seen: HashSet<Residues> = HashSet::from([id]);
    let mut elements = vec![id];
    let mut frontier = vec![id];
    while !frontier.is_empty() {
        let candidates: Vec<Residues> = frontier
            .par_iter()
            .flat_map_iter(|x| generators.iter().map(move |g| mul_residues(x, g, q)))
            .collect();
        let mut next = Vec::new();
        for c in candidates {
            if seen.insert(c) {
                elements.push(c);
                next.push(c);
                if elements.len() as u64 > cap {
                    return Err(Error::ResourceCap { what: format!("closure mod {q}"), limit: cap });
                }
            }
        }
        frontier = next;
    }
    let index = elements.iter().enumerate().map(|(i, e)| (*e, i as u32)).collect();
    Ok(QuotientClosure { q, elements, generators: generators.to_vec(), index })
}

/// `Γ/Γ(q)` by breadth-first closure.
pub fn quotient_closure(q: u32, cap: u64) -> Result<QuotientClosure> {
    close_under(q, &gamma_generators(q), cap)
}

/// `|SO_F(𝔽_p)|` for the Descartes form by orbit–stabilizer recursion.
///
/// `|O(V)| = #{w : Q(w) = Q(v)}·|O(v^⊥)|` for anisotropic `v`, down to
/// `|O| = 2` in dimension one; `|SO| = |O|/2`.
pub fn so_f_order(p: u64) -> Result<u128> {
    if !arith::is_prime(p) || p < 5 || p > 13 {
        return invalid(format!("so_f_order needs a prime 5 <= p <= 13, got {p}"));
    }
    let p = p as i64;
    let gram: Vec<Vec<i64>> = (0..4).map(|i| (0..4).map(|j| if i == j { 1 } else { p - 1 }).collect()).collect();
    Ok(orthogonal_order(&gram, p) / 2)
}

fn quad(gram: &[Vec<i64>], v: &[i64], p: i64) -> i64 {
    bilinear(gram, v, v, p)
}

fn bilinear(gram: &[Vec<i64>], u: &[i64], v: &[i64], p: i64) -> i64 {
    let n = gram.len();
    let mut s = 0;
    for i in 0..n {
        for j in 0..n {
            s = (s + u[i] * gram[i][j] % p * v[j]) % p;
        }
    }
    s
}

fn vectors(n: usize, p: i64) -> impl Iterator<Item = Vec<i64>> {
    (0..(p as u64).pow(n as u32)).map(move |mut k| {
        (0..n)
            .map(|_| {
                let d = (k % p as u64) as i64;
                k /= p as u64;
                d
            })
            .collect()
    })
}

fn orthogonal_order(gram: &[Vec<i64>], p: i64) -> u128 {
    let n = gram.len();
    if n == 1 {
        return 2;
    }
    let v = vectors(n, p).find(|v| quad(gram, v, p) != 0).expect("nondegenerate forms have anisotropic vectors");
    let target = quad(gram, &v, p);
    let orbit = vectors(n, p).filter(|w| quad(gram, w, p) == target).count() as u128;
    // Basis of v^⊥: the kernel of w ↦ B(v, w).
    let row: Vec<i64> = (0..n).map(|j| (0..n).map(|i| v[i] * gram[i][j]).sum::<i64>().rem_euclid(p)).collect();
    let pivot = row.iter().position(|&x| x != 0).expect("anisotropic vector has nonzero pairing");
    let pinv = arith::inv_mod(row[pivot], p).unwrap();
    let basis: Vec<Vec<i64>> = (0..n)
        .filter(|&j| j != pivot)
        .map(|j| {
            let mut w = vec![0; n];
            w[j] = 1;
            w[pivot] = (-row[j] * pinv).rem_euclid(p);
            w
        })
        .collect();
    let sub: Vec<Vec<i64>> = basis.iter().map(|a| basis.iter().map(|b| bilinear(gram, a, b, p)).collect()).collect();
    orbit * orthogonal_order(&sub, p)
}

/// `|SO^±(4, p)| = p²(p² − 1)(p² ∓ 1)`, the sign read off from the number of
/// isotropic vectors. An independent check on [`so_f_order`].
pub fn so_f_order_by_type(p: u64) -> Result<u128> {
    if !arith::is_prime(p) || p < 5 {
        return invalid("needs a prime p >= 5");
    }
    let pi = p as i64;
    let gram: Vec<Vec<i64>> = (0..4).map(|i| (0..4).map(|j| if i == j { 1 } else { pi - 1 }).collect()).collect();
    let isotropic = vectors(4, pi).filter(|v| v.iter().any(|&x| x != 0) && quad(&gram, v, pi) == 0).count() as u128;
    let p = p as u128;
    let plus = isotropic == (p * p - 1) * (p + 1);
    let minus = isotropic == (p * p + 1) * (p - 1);
    assert!(plus ^ minus, "isotropic count must identify the type");
    Ok(p * p * (p * p - 1) * if plus { p * p - 1 } else { p * p + 1 })
}

/// The orbit of `root` mod `q` under `Γ`, encoded as residue 4-tuples.
pub fn orbit_mod_q(root: &Quadruple<i64>, q: u32, cap: u64) -> Result<Vec<[u32; 4]>> {
    if q == 0 {
        return invalid("modulus must be positive");
    }
    let gens: Vec<[[i64; 4]; 4]> = [[1u8, 2], [2, 3], [3, 4]]
        .iter()
        .map(|w| word_matrix::<i64>(w).expect("small").0)
        .collect();
    let start = root.0.map(|x| x.rem_euclid(q as i64) as u32);
    let mut seen = HashSet::from([start]);
    let mut out = vec![start];
    let mut frontier = vec![start];
    while let Some(v) = frontier.pop() {
        for g in &gens {
            let w: [u32; 4] = std::array::from_fn(|i| {
                (0..4).map(|k| g[i][k] * v[k] as i64).sum::<i64>().rem_euclid(q as i64) as u32
            });
            if seen.insert(w) {
                out.push(w);
                frontier.push(w);
                if out.len() as u64 > cap {
                    return Err(Error::ResourceCap { what: format!("orbit mod {q}"), limit: cap });
                }
            }
        }
    }
    Ok(out)
}

/// Residues mod `q` of all entries in the `Γ`-orbit of `root`.
pub fn admissible_classes(q: u32, root: &Quadruple<i64>) -> Result<BTreeSet<u64>> {
    Ok(orbit_mod_q(root, q, DEFAULT_CLOSURE_CAP)?
        .iter()
        .flat_map(|v| v.iter().map(|&x| x as u64))
        .collect())
}

/// The same residues, read off the closure `Γ/Γ(q)` applied to `root`.
pub fn admissible_classes_via_closure(closure: &QuotientClosure, root: &Quadruple<i64>) -> BTreeSet<u64> {
    let q = closure.q as i64;
    let v = root.0.map(|x| x.rem_euclid(q));
    let mut out = BTreeSet::new();
    for m in &closure.elements {
        for i in 0..4 {
            let x: i64 = (0..4).map(|k| m[4 * i + k] as i64 * v[k]).sum();
            out.insert(x.rem_euclid(q) as u64);
        }
    }
    out
}

/// Admissible residues mod 24 for a root.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdmissibilityTable {
    classes: [bool; 24],
}

impl AdmissibilityTable {
    pub fn new(root: &Quadruple<i64>) -> Result<Self> {
        let mut classes = [false; 24];
        for r in admissible_classes(24, root)? {
            classes[r as usize] = true;
        }
        Ok(Self { classes })
    }

    pub fn is_admissible(&self, n: i64) -> bool {
        self.classes[n.rem_euclid(24) as usize]
    }

    pub fn classes(&self) -> Vec<u64> {
        (0..24).filter(|&r| self.classes[r as usize]).collect()
    }
}

/// Whether `n mod 24` occurs in the orbit of `root`.
pub fn is_admissible(n: i64, root: &Quadruple<i64>) -> Result<bool> {
    Ok(AdmissibilityTable::new(root)?.is_admissible(n))
}

/// `[Γ : Γ̃(q)]`, the size of the orbit of `root` mod `q`.
pub fn stabilizer_index(q: u32, root: &Quadruple<i64>, cap: u64) -> Result<u64> {
    Ok(orbit_mod_q(root, q, cap)?.len() as u64)
}
