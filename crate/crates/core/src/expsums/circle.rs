//! Hat functions, representation numbers and the major/minor split at toy scale.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::arith::{gcd, mobius};
use crate::error::{invalid, Error, Result};
use crate::forms::evaluate;
use crate::orbit::Family;

/// `𝔱(x) = max(0, 1 − |x|)`.
pub fn hat_t(x: f64) -> f64 {
    (1.0 - x.abs()).max(0.0)
}

/// `𝔱̂(y) = (sin πy / πy)²`.
pub fn hat_t_fourier(y: f64) -> f64 {
    if y == 0.0 {
        return 1.0;
    }
    let s = (PI * y).sin() / (PI * y);
    s * s
}

/// Spike periodisation range: `|m| ≤ 2` covers every `θ − r/q ∈ (−1, 1)`.
pub const THETA_M_RANGE: i64 = 2;

/// `𝔗(θ) = Σ_{q<Q₀} Σ′_r Σ_m 𝔱((N/K₀)(θ + m − r/q))`.
pub fn big_theta(theta: f64, n: f64, q0: u64, k0: f64) -> Result<f64> {
    if !(k0 > 0.0 && k0 <= n) {
        return invalid(format!("need 0 < K0 <= N, got K0 = {k0}, N = {n}"));
    }
    let scale = n / k0;
    let mut acc = 0.0;
    for q in 1..q0 {
        for r in 0..q {
            if gcd(r as i64, q as i64) != 1 {
                continue;
            }
            let base = theta - r as f64 / q as f64;
            for m in -THETA_M_RANGE..=THETA_M_RANGE {
                acc += hat_t(scale * (base + m as f64));
            }
        }
    }
    Ok(acc)
}

fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

/// `∫_{−1}^{1} exp(−1/(1 − s²)) ds` by composite Simpson.
fn bump_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| {
        let n = 200_000;
        let h = 2.0 / n as f64;
        let mut acc = bump(-1.0) + bump(1.0);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * bump(-1.0 + i as f64 * h);
        }
        acc * h / 3.0
    })
}

/// The smoothing weight `Υ`: a bump supported on `[1, 2]` with unit mass.
pub fn upsilon(t: f64) -> f64 {
    2.0 * bump(2.0 * t - 3.0) / bump_mass()
}

/// `ℛ(n)` on a dense window `[offset, offset + values.len())`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepresentationTable {
    pub offset: i64,
    pub values: Vec<f64>,
    pub x: f64,
    /// Möbius truncation; `None` means exact coprimality.
    pub u: Option<u64>,
}

impl RepresentationTable {
    pub fn get(&self, n: i64) -> f64 {
        let i = n - self.offset;
        if i < 0 || i as usize >= self.values.len() {
            0.0
        } else {
            self.values[i as usize]
        }
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `(n, ℛ(n))` for every nonzero entry.
    pub fn support(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (self.offset + i as i64, *v))
    }

    /// `Σ_n |ℛ(n) − ℛ′(n)|`.
    pub fn l1_distance(&self, other: &Self) -> f64 {
        let lo = self.offset.min(other.offset);
        let hi = (self.offset + self.values.len() as i64).max(other.offset + other.values.len() as i64);
        (lo..hi).map(|n| (self.get(n) - other.get(n)).abs()).sum()
    }

    /// `ℛ̂(θ) = Σ_n ℛ(n)·e(nθ)`.
    pub fn transform(&self, theta: f64) -> Complex64 {
        self.support()
            .map(|(n, v)| Complex64::from_polar(v, 2.0 * PI * (n as f64 * theta).fract()))
            .sum()
    }
}

/// Sum of `μ(u)` over `u | g` with `u < U`.
fn truncated_mobius(g: i64, u: u64) -> f64 {
    crate::arith::divisors(g as u64)
        .into_iter()
        .take_while(|&d| d < u)
        .map(mobius)
        .sum::<i64>() as f64
}

/// `ℛ_N(n)` (or `ℛ_N^U(n)`) for every `n` at once.
pub fn representation_table(family: &Family, x: f64, u: Option<u64>) -> Result<RepresentationTable> {
    if x < 4.0 {
        return invalid(format!("X = {x} must be at least 4"));
    }
    let xs: Vec<i64> = ((x / 2.0).ceil() as i64..=x.floor() as i64).collect();
    let ys: Vec<i64> = (x.ceil() as i64..=(2.0 * x).floor() as i64).collect();
    let per_member: Vec<Vec<(i64, f64)>> = family
        .members
        .par_iter()
        .map(|m| {
            let mut out = Vec::new();
            for &xx in &xs {
                let wx = upsilon(2.0 * xx as f64 / x);
                if wx == 0.0 {
                    continue;
                }
                for &yy in &ys {
                    let wy = upsilon(yy as f64 / x);
                    if wy == 0.0 {
                        continue;
                    }
                    let g = gcd(2 * xx, yy);
                    let mu = match u {
                        None => (g == 1) as i64 as f64,
                        Some(u) => truncated_mobius(g, u),
                    };
                    if mu != 0.0 {
                        out.push((evaluate(&m.form, &xx, &yy)?, wx * wy * mu));
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut acc: HashMap<i64, f64> = HashMap::new();
    for (n, w) in per_member.into_iter().flatten() {
        *acc.entry(n).or_insert(0.0) += w;
    }
    let (Some(&lo), Some(&hi)) = (acc.keys().min(), acc.keys().max()) else {
        return Ok(RepresentationTable { offset: 0, values: vec![], x, u });
    };
    let mut values = vec![0.0; (hi - lo + 1) as usize];
    for (n, w) in acc {
        values[(n - lo) as usize] = w;
    }
    Ok(RepresentationTable { offset: lo, values, x, u })
}

/// `ℛ_N(n)` for a single `n`.
pub fn representation_number(n: i64, family: &Family, x: f64, u: Option<u64>) -> Result<f64> {
    Ok(representation_table(family, x, u)?.get(n))
}

/// Parameters of the smooth major-arc spike.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcParams {
    /// Scale `N` of the spike width `K₀/N`.
    pub n: f64,
    pub q0: u64,
    pub k0: f64,
    /// Number of quadrature nodes on `[0, 1)`.
    pub grid: usize,
}

/// `ℳ` and `ℰ` over the window of the table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MajorArcs {
    pub offset: i64,
    pub main: Vec<f64>,
    pub error: Vec<f64>,
    /// `max |ℳ + ℰ − ℛ| / max |ℛ|`.
    pub relative_residual: f64,
    /// Quadrature mean of `𝔗` over the circle.
    pub theta_mass: f64,
}

impl MajorArcs {
    pub fn main_at(&self, n: i64) -> f64 {
        self.at(&self.main, n)
    }

    pub fn error_at(&self, n: i64) -> f64 {
        self.at(&self.error, n)
    }

    fn at(&self, v: &[f64], n: i64) -> f64 {
        let i = n - self.offset;
        if i < 0 || i as usize >= v.len() {
            0.0
        } else {
            v[i as usize]
        }
    }
}

/// Relative tolerance for `ℳ + ℰ = ℛ`.
pub const DECOMPOSITION_TOL: f64 = 1e-6;

/// Split `ℛ` into `∫𝔗·ℛ̂·e(−nθ)` and `∫(1 − 𝔗)·ℛ̂·e(−nθ)` on a uniform grid.
pub fn major_arc_decomposition(table: &RepresentationTable, params: &ArcParams) -> Result<MajorArcs> {
    let g = params.grid;
    if g == 0 || table.values.len() > g {
        return Err(Error::Tolerance(format!(
            "grid {g} is coarser than the support width {}",
            table.values.len()
        )));
    }
    let theta: Vec<f64> = (0..g)
        .into_par_iter()
        .map(|t| big_theta(t as f64 / g as f64, params.n, params.q0, params.k0))
        .collect::<Result<_>>()?;
    let mut planner = FftPlanner::<f64>::new();
    let mut spec: Vec<Complex64> = (0..g).map(|j| Complex64::new(table.values.get(j).copied().unwrap_or(0.0), 0.0)).collect();
    planner.plan_fft_inverse(g).process(&mut spec);
    let mut main: Vec<Complex64> = spec.iter().zip(&theta).map(|(z, t)| z * *t).collect();
    let mut error: Vec<Complex64> = spec.iter().zip(&theta).map(|(z, t)| z * (1.0 - *t)).collect();
    let fwd = planner.plan_fft_forward(g);
    fwd.process(&mut main);
    fwd.process(&mut error);
    let w = table.values.len();
    let main: Vec<f64> = main[..w].iter().map(|z| z.re / g as f64).collect();
    let error: Vec<f64> = error[..w].iter().map(|z| z.re / g as f64).collect();
    let scale = table.values.iter().fold(0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let residual = (0..w).map(|i| (main[i] + error[i] - table.values[i]).abs()).fold(0.0, f64::max) / scale;
    if residual > DECOMPOSITION_TOL {
        return Err(Error::Tolerance(format!("M + E differs from R by {residual:e} (relative)")));
    }
    Ok(MajorArcs {
        offset: table.offset,
        main,
        error,
        relative_residual: residual,
        theta_mass: theta.iter().sum::<f64>() / g as f64,
    })
}

/// Positive and total counts of `ℳ(n)` over the given `n`.
pub fn main_term_sign_count(arcs: &MajorArcs, ns: impl IntoIterator<Item = i64>) -> (u64, u64) {
    ns.into_iter().fold((0, 0), |(pos, tot), n| (pos + (arcs.main_at(n) > 0.0) as u64, tot + 1))
}
