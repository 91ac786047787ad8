//! Curvature enumeration, norm balls in `Γ` and the bilinear family.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::congruence;
use crate::descartes::{reduce_to_root, reflection, Mat4, Quadruple};
use crate::error::{invalid, Error, Result};
use crate::forms::{extract_form, ShiftedForm};

/// Set of positive integers `≤ n_max` occurring as curvatures; bit `n` stands for `n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CurvatureSet {
    n_max: u64,
    words: Vec<u64>,
}

impl CurvatureSet {
    pub fn new(n_max: u64) -> Self {
        Self { n_max, words: vec![0; word_count(n_max)] }
    }

    /// Rebuild from raw little-endian words; bits above `n_max` must be clear.
    pub fn from_words(n_max: u64, words: Vec<u64>) -> Result<Self> {
        if words.len() != word_count(n_max) {
            return invalid(format!("expected {} words for N = {n_max}, got {}", word_count(n_max), words.len()));
        }
        let set = Self { n_max, words };
        if set.words[0] & 1 != 0 || set.iter_raw().any(|n| n > n_max) {
            return invalid("bits outside 1..=N are set");
        }
        Ok(set)
    }

    pub fn n_max(&self) -> u64 {
        self.n_max
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn contains(&self, n: u64) -> bool {
        n >= 1 && n <= self.n_max && self.words[(n / 64) as usize] >> (n % 64) & 1 == 1
    }

    pub fn insert(&mut self, n: u64) {
        assert!(n >= 1 && n <= self.n_max, "{n} outside 1..={}", self.n_max);
        self.words[(n / 64) as usize] |= 1 << (n % 64);
    }

    pub fn len(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// OR-merge; both sets must share `n_max`.
    pub fn union_with(&mut self, other: &Self) {
        assert_eq!(self.n_max, other.n_max);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    /// Members in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.iter_raw()
    }

    fn iter_raw(&self) -> impl Iterator<Item = u64> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as u64;
                w &= w - 1;
                Some(i as u64 * 64 + b)
            })
        })
    }

    pub fn to_vec(&self) -> Vec<u64> {
        self.iter().collect()
    }

    /// Whether every member of `self` lies in `other`.
    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.iter().all(|n| other.contains(n))
    }
}

fn word_count(n_max: u64) -> usize {
    (n_max / 64 + 1) as usize
}

/// A curvature bitset that many workers may OR into at once.
pub struct AtomicCurvatureSet {
    n_max: u64,
    words: Vec<AtomicU64>,
}

impl AtomicCurvatureSet {
    pub fn new(n_max: u64) -> Self {
        Self { n_max, words: (0..word_count(n_max)).map(|_| AtomicU64::new(0)).collect() }
    }

    pub fn insert(&self, n: u64) {
        debug_assert!(n >= 1 && n <= self.n_max);
        self.words[(n / 64) as usize].fetch_or(1 << (n % 64), Ordering::Relaxed);
    }

    pub fn into_set(self) -> CurvatureSet {
        CurvatureSet { n_max: self.n_max, words: self.words.into_iter().map(AtomicU64::into_inner).collect() }
    }
}

/// Check that `root` is on the cone, primitive and fixed by the reduction.
pub fn validate_root(root: &Quadruple<i64>) -> Result<()> {
    if !root.is_on_cone()? {
        return Err(Error::NotOnCone(root.to_string()));
    }
    if !root.is_primitive() {
        return invalid(format!("root {root} is not primitive"));
    }
    if !reduce_to_root(root)?.word.is_empty() {
        return invalid(format!("{root} is not a root quadruple"));
    }
    Ok(())
}

#[inline]
fn child(v: &[i64; 4], j: usize) -> i64 {
    2 * (v[0] + v[1] + v[2] + v[3]) - 3 * v[j]
}

fn subtree_seeds(root: &[i64; 4], n_max: i64) -> Vec<([i64; 4], usize)> {
    let mut seeds = Vec::new();
    for i in 0..4 {
        let new = child(root, i);
        if new > root[i] && new <= n_max {
            let mut v = *root;
            v[i] = new;
            for j in (0..4).filter(|&j| j != i) {
                let new2 = child(&v, j);
                if new2 > v[j] && new2 <= n_max {
                    let mut w = v;
                    w[j] = new2;
                    seeds.push((w, j));
                }
            }
        }
    }
    seeds
}

/// Depth-first walk below `(v, last)`; returns the number of circles visited.
fn walk(start: [i64; 4], last: usize, n_max: i64, mut emit: impl FnMut(i64)) -> u64 {
    let mut stack = vec![(start, last)];
    let mut visited = 0;
    while let Some((v, last)) = stack.pop() {
        for j in 0..4 {
            if j == last {
                continue;
            }
            let new = child(&v, j);
            if new > v[j] && new <= n_max {
                emit(new);
                visited += 1;
                let mut w = v;
                w[j] = new;
                stack.push((w, j));
            }
        }
    }
    visited
}

/// Positive curvatures `≤ n_max` in the orbit of `root`, plus the number of
/// circles visited (with multiplicity).
pub fn enumerate_curvatures_counted(root: &Quadruple<i64>, n_max: u64) -> Result<(CurvatureSet, u64)> {
    validate_root(root)?;
    if n_max > i64::MAX as u64 / 8 {
        return invalid(format!("bound {n_max} too large"));
    }
    let set = AtomicCurvatureSet::new(n_max);
    let n = n_max as i64;
    let r = root.0;
    let mut visited = 0;
    let add = |x: i64| {
        if x >= 1 && x <= n {
            set.insert(x as u64);
        }
    };
    for &x in &r {
        add(x);
        visited += 1;
    }
    for i in 0..4 {
        let new = child(&r, i);
        if new > r[i] && new <= n {
            add(new);
            visited += 1;
            let mut v = r;
            v[i] = new;
            for j in (0..4).filter(|&j| j != i) {
                let new2 = child(&v, j);
                if new2 > v[j] && new2 <= n {
                    add(new2);
                    visited += 1;
                }
            }
        }
    }
    let seeds = subtree_seeds(&r, n);
    visited += seeds
        .par_iter()
        .map(|&(v, last)| walk(v, last, n, |x| set.insert(x as u64)))
        .sum::<u64>();
    Ok((set.into_set(), visited))
}

/// Positive curvatures `≤ n_max` in the orbit of `root`.
pub fn enumerate_curvatures(root: &Quadruple<i64>, n_max: u64) -> Result<CurvatureSet> {
    Ok(enumerate_curvatures_counted(root, n_max)?.0)
}

/// A reflection path from `root` to a quadruple containing `n`.
///
/// Applying `Sᵢ` for each `i` of the word, in order, to `root` yields a
/// quadruple with `n` among its entries.
pub fn find_witness(root: &Quadruple<i64>, n: i64) -> Result<Option<Vec<u8>>> {
    validate_root(root)?;
    if root.0.contains(&n) {
        return Ok(Some(Vec::new()));
    }
    let mut stack: Vec<([i64; 4], usize, Vec<u8>)> = vec![(root.0, 4, Vec::new())];
    while let Some((v, last, word)) = stack.pop() {
        for j in 0..4 {
            if j == last {
                continue;
            }
            let new = child(&v, j);
            if new > v[j] && new <= n {
                let mut w = word.clone();
                w.push(j as u8 + 1);
                if new == n {
                    return Ok(Some(w));
                }
                let mut u = v;
                u[j] = new;
                stack.push((u, j, w));
            }
        }
    }
    Ok(None)
}

/// Apply the reflections of `word`, in order, to `v`.
pub fn apply_path(v: &Quadruple<i64>, word: &[u8]) -> Result<Quadruple<i64>> {
    word.iter()
        .try_fold(v.clone(), |acc, &i| reflection::<i64>(i as usize)?.apply_quadruple(&acc))
}

/// Exception and density statistics on one dyadic block `[2ᵏ, 2ᵏ⁺¹) ∩ [1, N]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadicBlock {
    pub k: u32,
    pub lo: u64,
    pub hi: u64,
    pub complete: bool,
    pub admissible: u64,
    pub curvatures: u64,
    pub exceptions: u64,
}

/// Census of `ℬ ∩ [1, N]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Census {
    pub n_max: u64,
    pub curvature_count: u64,
    pub admissible_count: u64,
    pub admissible_classes: Vec<u64>,
    /// Curvature counts by residue mod 24.
    pub class_counts: Vec<u64>,
    pub exceptions: Vec<u64>,
    pub dyadic: Vec<DyadicBlock>,
}

impl Census {
    pub fn density(&self) -> f64 {
        if self.n_max == 0 {
            0.0
        } else {
            self.curvature_count as f64 / self.n_max as f64
        }
    }

    /// Least `k₀` such that exception counts over complete blocks `k ≥ k₀`
    /// never increase.
    pub fn monotone_threshold(&self) -> Option<u32> {
        let full: Vec<&DyadicBlock> = self.dyadic.iter().filter(|b| b.complete).collect();
        let mut k0 = full.last()?.k;
        for w in full.windows(2).rev() {
            if w[1].exceptions <= w[0].exceptions {
                k0 = w[0].k;
            } else {
                break;
            }
        }
        Some(k0)
    }
}

/// Census of curvatures up to `n_max`.
pub fn census(root: &Quadruple<i64>, n_max: u64) -> Result<Census> {
    let set = enumerate_curvatures(root, n_max)?;
    census_of_set(root, &set)
}

/// Census of an already enumerated set.
pub fn census_of_set(root: &Quadruple<i64>, set: &CurvatureSet) -> Result<Census> {
    let table = congruence::AdmissibilityTable::new(root)?;
    let n_max = set.n_max();
    let mut class_counts = vec![0u64; 24];
    for n in set.iter() {
        class_counts[(n % 24) as usize] += 1;
    }
    let mut exceptions = Vec::new();
    let mut dyadic = Vec::new();
    let mut admissible_count = 0;
    let mut k = 0u32;
    while n_max >= 1 && (1u64 << k) <= n_max {
        let lo = 1u64 << k;
        let hi = (lo << 1).min(n_max + 1);
        let mut block = DyadicBlock { k, lo, hi, complete: hi == lo << 1, admissible: 0, curvatures: 0, exceptions: 0 };
        for n in lo..hi {
            let present = set.contains(n);
            block.curvatures += present as u64;
            if table.is_admissible(n as i64) {
                block.admissible += 1;
                if !present {
                    block.exceptions += 1;
                    exceptions.push(n);
                }
            }
        }
        admissible_count += block.admissible;
        dyadic.push(block);
        k += 1;
    }
    Ok(Census {
        n_max,
        curvature_count: set.len(),
        admissible_count,
        admissible_classes: table.classes(),
        class_counts,
        exceptions,
        dyadic,
    })
}

/// Pruning slack for norm-ball walks.
pub const DEFAULT_SLACK: f64 = 4.0;

/// Default largest radius accepted by [`norm_ball_count`].
pub const DEFAULT_NORM_CAP: f64 = 1e5;

#[inline]
fn right_reflect(m: &mut [[i64; 4]; 4], j: usize) {
    for row in m.iter_mut() {
        let x = row[j];
        for (c, e) in row.iter_mut().enumerate() {
            *e = if c == j { -x } else { *e + 2 * x };
        }
    }
}

#[inline]
fn norm_sq(m: &[[i64; 4]; 4]) -> i64 {
    m.iter().flatten().map(|x| x * x).sum()
}

/// Visit every element of `Γ` with Frobenius norm `< y`, once each.
///
/// Walks reduced reflection words, dropping a branch once its norm passes
/// `slack·y`. Returns the number of nodes expanded.
pub fn visit_gamma_ball(y: f64, slack: f64, mut f: impl FnMut(&[[i64; 4]; 4], i64)) -> u64 {
    let y2 = y * y;
    let prune2 = (slack * y) * (slack * y);
    let id: [[i64; 4]; 4] = std::array::from_fn(|i| std::array::from_fn(|j| (i == j) as i64));
    let mut stack = vec![(id, 4usize, 0u32)];
    let mut nodes = 0;
    while let Some((m, last, len)) = stack.pop() {
        nodes += 1;
        let n2 = norm_sq(&m);
        if len % 2 == 0 && (n2 as f64) < y2 {
            f(&m, n2);
        }
        for j in 0..4 {
            if j == last {
                continue;
            }
            let mut c = m;
            right_reflect(&mut c, j);
            if (norm_sq(&c) as f64) <= prune2 {
                stack.push((c, j, len + 1));
            }
        }
    }
    nodes
}

/// Count/radius pairs for norm balls in `Γ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormBallTable {
    pub rows: Vec<NormBallRow>,
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormBallRow {
    pub y: f64,
    pub count: u64,
}

/// `#{γ ∈ Γ : ‖γ‖ < Y}` for each `Y` (ascending).
pub fn norm_ball_count(ys: &[f64], slack: f64, cap: f64) -> Result<NormBallTable> {
    if ys.windows(2).any(|w| w[0] > w[1]) {
        return invalid("radii must be ascending");
    }
    let Some(&ymax) = ys.last() else {
        return Ok(NormBallTable { rows: vec![], slack });
    };
    if ymax > cap {
        return Err(Error::ResourceCap { what: format!("norm radius {ymax}"), limit: cap as u64 });
    }
    let mut norms = Vec::new();
    visit_gamma_ball(ymax, slack, |_, n2| norms.push(n2));
    norms.sort_unstable();
    let rows = ys
        .iter()
        .map(|&y| NormBallRow { y, count: norms.partition_point(|&n2| (n2 as f64) < y * y) as u64 })
        .collect();
    Ok(NormBallTable { rows, slack })
}

/// `n` radii spaced evenly in log scale over `[lo, hi]`.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Least-squares slope of `log count` against `log Y`.
pub fn fit_delta(table: &NormBallTable) -> Result<f64> {
    let pts: Vec<(f64, f64)> = table
        .rows
        .iter()
        .filter(|r| r.count > 0)
        .map(|r| (r.y.ln(), (r.count as f64).ln()))
        .collect();
    if pts.len() < 2 {
        return invalid("need at least two nonzero counts to fit");
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// One member `γ = γ₁γ₂` of the family.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyMember {
    pub gamma: Mat4<i64>,
    pub gamma1: Mat4<i64>,
    pub gamma2: Mat4<i64>,
    pub form: ShiftedForm<i64>,
}

/// The family of products `γ₁γ₂` with `Tᵢ < ‖γᵢ‖ < 2Tᵢ` and
/// `⟨e₁, γ₁γ₂v₀⟩ > T/100`, `T = T₁T₂`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Family {
    pub t1: f64,
    pub t2: f64,
    pub root: Quadruple<i64>,
    pub members: Vec<FamilyMember>,
}

impl Family {
    pub fn t(&self) -> f64 {
        self.t1 * self.t2
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Elements of `Γ` with `lo < ‖γ‖ < hi`, in a deterministic order.
pub fn gamma_shell(lo: f64, hi: f64) -> Vec<Mat4<i64>> {
    let mut out = Vec::new();
    visit_gamma_ball(hi, DEFAULT_SLACK, |m, n2| {
        if n2 as f64 > lo * lo {
            out.push(Mat4(*m));
        }
    });
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

fn mul4(a: &Mat4<i64>, b: &Mat4<i64>) -> Mat4<i64> {
    a.checked_mul(b).expect("family products stay small")
}

pub fn build_family(root: &Quadruple<i64>, t1: f64, t2: f64) -> Result<Family> {
    validate_root(root)?;
    if t1 < 4.0 || t2 < 4.0 {
        return invalid("family windows need T1, T2 >= 4");
    }
    let g1s = gamma_shell(t1, 2.0 * t1);
    let g2s = gamma_shell(t2, 2.0 * t2);
    let t = t1 * t2;
    let members: Vec<FamilyMember> = g1s
        .par_iter()
        .flat_map_iter(|g1| {
            g2s.iter().filter_map(move |g2| {
                let gamma = mul4(g1, g2);
                let a = gamma.apply_quadruple(root).ok()?.0[0];
                (100.0 * a as f64 > t).then(|| (gamma, g1.clone(), g2.clone()))
            })
        })
        .map(|(gamma, gamma1, gamma2)| {
            let form = extract_form(&gamma, root).expect("family members lie in Gamma");
            FamilyMember { gamma, gamma1, gamma2, form }
        })
        .collect();
    Ok(Family { t1, t2, root: root.clone(), members })
}

/// Histogram of `a_γ mod q` over the family.
pub fn modular_equidistribution_report(family: &Family, q: u64) -> Result<Vec<u64>> {
    if q == 0 {
        return invalid("modulus must be positive");
    }
    let mut counts = vec![0u64; q as usize];
    for m in &family.members {
        counts[m.form.shift.rem_euclid(q as i64) as usize] += 1;
    }
    Ok(counts)
}

/// `max count · occupied / total` for a histogram: 1 when perfectly even.
pub fn imbalance(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let occupied = counts.iter().filter(|&&c| c > 0).count();
    let max = counts.iter().copied().max().unwrap_or(0);
    if total == 0 {
        0.0
    } else {
        max as f64 * occupied as f64 / total as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descartes::{word_matrix, V0};
    use crate::forms::tangency_parabola;
    use std::collections::BTreeSet;

    fn v0() -> Quadruple<i64> {
        Quadruple::from_i64(V0)
    }

    /// Entries of every quadruple reachable by words up to `depth`.
    fn word_oracle(depth: usize, n_max: i64) -> BTreeSet<u64> {
        let mut out = BTreeSet::new();
        let mut layer = vec![v0()];
        for _ in 0..=depth {
            let mut next = Vec::new();
            for v in &layer {
                for &x in &v.0 {
                    if x >= 1 && x <= n_max {
                        out.insert(x as u64);
                    }
                }
                for i in 1..=4 {
                    next.push(reflection::<i64>(i).unwrap().apply_quadruple(v).unwrap());
                }
            }
            layer = next;
        }
        out
    }

    #[test]
    fn small_bounds_match_word_oracle() {
        let s = enumerate_curvatures(&v0(), 100).unwrap();
        assert_eq!(s.to_vec(), vec![21, 24, 28, 40, 52, 61, 76, 85, 96]);
        assert_eq!(s.to_vec(), word_oracle(6, 100).into_iter().collect::<Vec<_>>());
        assert_eq!(enumerate_curvatures(&v0(), 28).unwrap().to_vec(), vec![21, 24, 28]);
        assert!(enumerate_curvatures(&v0(), 0).unwrap().is_empty());
        let s = enumerate_curvatures(&v0(), 400).unwrap();
        assert_eq!(s.to_vec(), word_oracle(7, 400).into_iter().collect::<Vec<_>>());
    }

    #[test]
    fn rejects_non_roots() {
        assert!(enumerate_curvatures(&Quadruple::from_i64([157, 21, 24, 28]), 100).is_err());
        assert!(enumerate_curvatures(&Quadruple::from_i64([-22, 42, 48, 56]), 100).is_err());
        assert!(enumerate_curvatures(&Quadruple::from_i64([1, 1, 1, 1]), 100).is_err());
    }

    #[test]
    fn degenerate_strip_terminates() {
        let s = enumerate_curvatures(&Quadruple::from_i64([0, 0, 1, 1]), 50).unwrap();
        assert!(s.contains(1) && s.contains(4) && s.contains(9));
    }

    #[test]
    fn residues_are_admissible() {
        let s = enumerate_curvatures(&v0(), 20_000).unwrap();
        assert!(s.iter().all(|n| [0, 4, 12, 13, 16, 21].contains(&(n % 24))));
    }

    #[test]
    fn independent_of_thread_count_and_monotone() {
        let a = enumerate_curvatures(&v0(), 50_000).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| enumerate_curvatures(&v0(), 50_000)).unwrap();
        assert_eq!(a, b);
        let small = enumerate_curvatures(&v0(), 10_000).unwrap();
        assert!(small.is_subset_of(&a));
    }

    #[test]
    fn parabola_values_present() {
        let s = enumerate_curvatures(&v0(), 100_000).unwrap();
        for n in -60i64..=60 {
            let v = tangency_parabola(&v0(), &n).unwrap();
            assert_eq!(v, 40 * n * n + 28 * n + 28);
            if v <= 100_000 {
                assert!(s.contains(v as u64), "parabola value {v}");
            }
        }
    }

    #[test]
    fn witnesses_reproduce() {
        let s = enumerate_curvatures(&v0(), 5000).unwrap();
        for n in s.iter().step_by(17) {
            let w = find_witness(&v0(), n as i64).unwrap().unwrap();
            assert!(apply_path(&v0(), &w).unwrap().0.contains(&(n as i64)));
        }
        assert_eq!(find_witness(&v0(), 5).unwrap(), None);
    }

    #[test]
    fn census_small() {
        let c = census(&v0(), 100).unwrap();
        assert_eq!(c.admissible_count, 25);
        assert_eq!(c.curvature_count, 9);
        assert_eq!(c.class_counts.iter().sum::<u64>(), 9);
        assert_eq!(c.exceptions.len(), 25 - 9);
        assert_eq!(c.dyadic.iter().map(|b| b.admissible).sum::<u64>(), 25);
    }

    #[test]
    fn bitset_round_trip() {
        let s = enumerate_curvatures(&v0(), 1000).unwrap();
        let t = CurvatureSet::from_words(1000, s.words().to_vec()).unwrap();
        assert_eq!(s, t);
        assert!(CurvatureSet::from_words(1000, vec![1; word_count(1000)]).is_err());
    }

    #[test]
    fn norm_ball_basics() {
        let t = norm_ball_count(&[2.01, 10.0, 30.0, 100.0], DEFAULT_SLACK, DEFAULT_NORM_CAP).unwrap();
        assert!(t.rows[0].count >= 1);
        assert!(t.rows.windows(2).all(|w| w[0].count <= w[1].count));
        assert!(t.rows[2].count < t.rows[3].count);
        assert_eq!(t.rows[3].count, 133);
        assert!(norm_ball_count(&[1e6], DEFAULT_SLACK, DEFAULT_NORM_CAP).is_err());
        assert!(norm_ball_count(&[5.0, 3.0], DEFAULT_SLACK, DEFAULT_NORM_CAP).is_err());
    }

    #[test]
    fn slack_sixteen_agrees() {
        let ys = [50.0, 200.0, 600.0];
        let a = norm_ball_count(&ys, 4.0, 1e5).unwrap();
        let b = norm_ball_count(&ys, 16.0, 1e5).unwrap();
        assert_eq!(a.rows, b.rows);
    }

    #[test]
    fn ball_matches_free_word_enumeration() {
        // Free generators S₁S₂, S₂S₃, S₃S₄ and inverses, all reduced words.
        let gens: Vec<Mat4<i64>> = [[1u8, 2], [2, 3], [3, 4], [2, 1], [3, 2], [4, 3]]
            .iter()
            .map(|w| word_matrix(w).unwrap())
            .collect();
        let y = 40.0;
        let mut seen = BTreeSet::new();
        let mut layer = vec![(Mat4::<i64>::identity(), usize::MAX)];
        for _ in 0..14 {
            let mut next = Vec::new();
            for (m, last) in &layer {
                if (m.norm_sq().unwrap() as f64) < y * y {
                    seen.insert(m.0);
                }
                for (k, g) in gens.iter().enumerate() {
                    if *last != usize::MAX && (k + 3) % 6 == *last {
                        continue;
                    }
                    let c = m.checked_mul(g).unwrap();
                    if (c.norm_sq().unwrap() as f64) < (16.0 * y) * (16.0 * y) {
                        next.push((c, k));
                    }
                }
            }
            layer = next;
        }
        let mut tree = BTreeSet::new();
        visit_gamma_ball(y, DEFAULT_SLACK, |m, _| {
            tree.insert(*m);
        });
        assert_eq!(tree, seen);
    }

    #[test]
    fn fit_recovers_power_law() {
        let rows = (1..=5).map(|i| NormBallRow { y: 10f64.powi(i), count: 3 * 100u64.pow(i as u32) }).collect();
        let d = fit_delta(&NormBallTable { rows, slack: 4.0 }).unwrap();
        assert!((d - 2.0).abs() < 1e-9);
    }

    #[test]
    fn family_constraints() {
        let f = build_family(&v0(), 8.0, 8.0).unwrap();
        assert!(!f.is_empty());
        let v0n = (v0().0.iter().map(|x| x * x).sum::<i64>() as f64).sqrt();
        for m in &f.members {
            let n1 = (m.gamma1.norm_sq().unwrap() as f64).sqrt();
            let n2 = (m.gamma2.norm_sq().unwrap() as f64).sqrt();
            assert!(8.0 < n1 && n1 < 16.0 && 8.0 < n2 && n2 < 16.0);
            assert!(100.0 * m.form.shift as f64 > f.t());
            let ng = (m.gamma.norm_sq().unwrap() as f64).sqrt();
            assert!(m.form.shift as f64 <= 4.0 * ng * v0n);
        }
        let counts = modular_equidistribution_report(&f, 1).unwrap();
        assert_eq!(counts, vec![f.len() as u64]);
        let adm = congruence::admissible_classes(24, &v0()).unwrap();
        for (r, &c) in modular_equidistribution_report(&f, 24).unwrap().iter().enumerate() {
            if c > 0 {
                assert!(adm.contains(&(r as u64)));
            }
        }
    }
}
