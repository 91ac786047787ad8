//! Regression constants: empirical values measured once and pinned.
//!
//! Each entry has a measurement routine in [`measure`]; `verify` recomputes
//! and compares within the entry's tolerance.

use serde::{Deserialize, Serialize};

use crate::congruence::{stabilizer_index, AdmissibilityTable, DEFAULT_CLOSURE_CAP};
use crate::descartes::{Quadruple, V0};
use crate::error::{invalid, Result};
use crate::expsums::{self, ArcParams, SingularSeries};
use crate::forms::{self, form_of_quadruple, ShiftedForm};
use crate::orbit::{self, build_family};
use crate::spectral::{self, SL2_CLOSURE_CAP};

/// A pinned empirical value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrozenConstant {
    pub name: &'static str,
    pub module: &'static str,
    pub value: f64,
    /// Absolute tolerance of the regression comparison.
    pub tol: f64,
}

const fn c(name: &'static str, module: &'static str, value: f64, tol: f64) -> FrozenConstant {
    FrozenConstant { name, module, value, tol }
}

/// The shipped registry.
pub const BASELINE: &[FrozenConstant] = &[
    c("orbit.delta_fit", "orbit", 1.275_590_185_870_091_8, 1e-9),
    c("orbit.census_density_1e6", "orbit", 0.236_334, 1e-12),
    c("orbit.exceptions_1e6", "orbit", 13_666.0, 0.0),
    c("orbit.exception_threshold_k0", "orbit", 18.0, 0.0),
    c("orbit.stabilizer_index_q3_max", "orbit", 1.152, 1e-12),
    c("orbit.equidistribution_imbalance_q5", "orbit", 1.169_811_320_754_716_9, 1e-12),
    c("forms.class_multiplicity_max", "forms", 126.0, 0.0),
    c("forms.ac_constant", "forms", 169.205_078_125, 1e-9),
    c("forms.representing_classes_ratio", "forms", 2.0, 1e-9),
    c("forms.zero_pairs_ratio", "forms", 0.612_307_914_579_549_8, 1e-9),
    c("forms.coincidence_ratio", "forms", 1.101_097_560_975_609_7, 1e-9),
    c("expsums.kloosterman_bound", "expsums", 1.147_303_823_062_388_9, 1e-9),
    c("expsums.s_avg_bound", "expsums", 0.759_835_685_651_592_3, 1e-9),
    c("expsums.singular_96", "expsums", 2.444_381_830_601_093_2, 1e-9),
    c("expsums.p_factor_deviation", "expsums", 1.041_666_666_666_668_5, 1e-9),
    c("expsums.main_term_positive_fraction", "expsums", 0.824_268_308_001_507_3, 1e-12),
    c("spectral.gamma_bar_order_q2", "spectral", 2.0, 0.0),
    c("spectral.lambda1_q2", "spectral", 0.0, 1e-6),
    c("spectral.lambda1_q3", "spectral", 0.666_666_666_666_666_7, 1e-6),
    c("spectral.lambda1_q4", "spectral", 0.2, 1e-6),
    c("spectral.lambda1_q5", "spectral", 0.936_338_998_124_982_6, 1e-6),
    c("spectral.lambda1_q8", "spectral", 0.824_621_125_123_532_3, 1e-6),
    c("spectral.alternation_q2", "spectral", 1.0, 0.0),
    c("spectral.alternation_q3", "spectral", 2.0, 0.0),
    c("spectral.alternation_q4", "spectral", 1.0, 0.0),
    c("spectral.alternation_q8", "spectral", 2.0, 0.0),
];

pub fn lookup(name: &str) -> Option<&'static FrozenConstant> {
    BASELINE.iter().find(|c| c.name == name)
}

/// Outcome of one regression comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub name: String,
    pub frozen: f64,
    pub measured: f64,
    pub tol: f64,
    pub pass: bool,
}

pub fn compare(name: &str, frozen: f64, measured: f64, tol: f64) -> Comparison {
    let pass = (measured - frozen).abs() <= tol + 1e-12 * frozen.abs();
    Comparison { name: name.to_string(), frozen, measured, tol, pass }
}

fn v0() -> Quadruple<i64> {
    Quadruple::from_i64(V0)
}

/// Fitted slope of log norm-ball counts over `Y ∈ [10², 10⁴]`.
pub fn delta_fit() -> Result<f64> {
    let ys = orbit::log_spaced(1e2, 1e4, 9);
    orbit::fit_delta(&orbit::norm_ball_count(&ys, orbit::DEFAULT_SLACK, orbit::DEFAULT_NORM_CAP)?)
}

/// The gasket forms used by the exponential-sum bounds.
pub fn gasket_forms() -> Result<Vec<ShiftedForm<i64>>> {
    [[-11, 21, 24, 28], [21, -11, 24, 28], [24, -11, 21, 28], [28, -11, 21, 24]]
        .iter()
        .map(|v| form_of_quadruple(&Quadruple::from_i64(*v)))
        .collect()
}

/// `max |𝒮|·q^{5/4}/((q/q₀)²·…)` over odd `3 ≤ q ≤ q_max`, every `q₀ | q`.
pub fn s_avg_bound(q_max: u64) -> Result<f64> {
    use rayon::prelude::*;
    let fs = gasket_forms()?;
    let (f, fp) = (&fs[0], &fs[1]);
    (3..=q_max)
        .into_par_iter()
        .filter(|q| q % 2 == 1)
        .map(|q| {
            let mut worst = 0f64;
            for q0 in crate::arith::divisors(q) {
                for (nm, nmp) in [((1, 0), (1, 0)), ((0, 1), (1, 1)), ((2, 1), (1, 2))] {
                    let v = expsums::s_avg(q, q0, f, fp, nm, nmp, 1)?;
                    worst = worst.max(expsums::s_avg_bound_ratio(q, q0, f, fp, v));
                }
            }
            Ok(worst)
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// `max count/(z, 4a²)^{1/2}` for `a = −11`, `z ≤ z_max`.
pub fn representing_classes_ratio(z_max: i64) -> Result<f64> {
    use rayon::prelude::*;
    let a = -11i64;
    (1..=z_max)
        .into_par_iter()
        .map(|z| {
            let n = forms::representing_classes(z, a)?.count as f64;
            Ok(n / (crate::arith::gcd(z, 4 * a * a) as f64).sqrt())
        })
        .try_reduce(|| 0.0, |x, y| Ok(x.max(y)))
}

/// `max count/(d^{0.1}(M²/√d + M))` for `(10, 7, 17)` over `d ∈ {11, 121}`, `M ∈ {10², 10³}`.
pub fn zero_pairs_ratio() -> Result<f64> {
    let mut worst = 0f64;
    for d in [11i64, 121] {
        for m in [100i64, 1000] {
            let n = forms::zero_pairs_count(10, 7, 17, d, m)? as f64;
            let (df, mf) = (d as f64, m as f64);
            worst = worst.max(n / (df.powf(0.1) * (mf * mf / df.sqrt() + mf)));
        }
    }
    Ok(worst)
}

/// `max count/(M² + TM)` at `T₁ = T₂ = 8` for the first family member, `M ∈ {10, 30, 100}`.
pub fn coincidence_ratio() -> Result<f64> {
    let fam = build_family(&v0(), 8.0, 8.0)?;
    let Some(first) = fam.members.first() else {
        return invalid("empty family at T = 64");
    };
    let t = fam.t();
    let mut worst = 0f64;
    for m in [10i64, 30, 100] {
        let n = forms::coincidence_count(&first.form, &fam, m)? as f64;
        let mf = m as f64;
        worst = worst.max(n / (mf * mf + t * mf));
    }
    Ok(worst)
}

/// Fraction of admissible `n ∈ (N/2, N)` with `ℳ(n) > 0` in the toy run.
pub fn main_term_positive_fraction() -> Result<f64> {
    let root = Quadruple::from_i64([-1, 2, 2, 3]);
    let table = expsums::representation_table(&build_family(&root, 8.0, 8.0)?, 4.0, None)?;
    let top = table.offset + table.values.len() as i64;
    let arcs = expsums::major_arc_decomposition(&table, &ArcParams { n: top as f64, q0: 4, k0: 8.0, grid: 1 << 16 })?;
    let adm = AdmissibilityTable::new(&root)?;
    let (pos, tot) = expsums::main_term_sign_count(&arcs, (top / 2 + 1..top).filter(|&n| adm.is_admissible(n)));
    Ok(pos as f64 / tot.max(1) as f64)
}

/// Recompute one registry entry.
pub fn measure(name: &str) -> Result<f64> {
    let lambda = |q: u32| Ok(spectral::gamma_bar_spectrum(q, SL2_CLOSURE_CAP)?.lambda1);
    let alt = |q: u32| {
        let a = spectral::alternation_length(q, 1000, SL2_CLOSURE_CAP)?;
        Ok(a.k.map_or(f64::INFINITY, |k| k as f64))
    };
    match name {
        "orbit.delta_fit" => delta_fit(),
        "orbit.census_density_1e6" => Ok(orbit::census(&v0(), 1_000_000)?.density()),
        "orbit.exceptions_1e6" => Ok(orbit::census(&v0(), 1_000_000)?.exceptions.len() as f64),
        "orbit.exception_threshold_k0" => {
            Ok(orbit::census(&v0(), 1_000_000)?.monotone_threshold().map_or(f64::NAN, |k| k as f64))
        }
        "orbit.stabilizer_index_q3_max" => {
            let mut worst = 0f64;
            for q in [5u32, 7, 11, 13] {
                let i = stabilizer_index(q, &v0(), DEFAULT_CLOSURE_CAP)? as f64;
                worst = worst.max(i / (q as f64).powi(3));
            }
            Ok(worst)
        }
        "orbit.equidistribution_imbalance_q5" => {
            let fam = build_family(&v0(), 32.0, 32.0)?;
            Ok(orbit::imbalance(&orbit::modular_equidistribution_report(&fam, 5)?))
        }
        "forms.class_multiplicity_max" => {
            Ok(forms::family_class_multiplicity(&build_family(&v0(), 32.0, 32.0)?)?.max as f64)
        }
        "forms.ac_constant" => Ok(forms::family_class_multiplicity(&build_family(&v0(), 32.0, 32.0)?)?.ac_constant),
        "forms.representing_classes_ratio" => representing_classes_ratio(10_000),
        "forms.zero_pairs_ratio" => zero_pairs_ratio(),
        "forms.coincidence_ratio" => coincidence_ratio(),
        "expsums.kloosterman_bound" => expsums::kloosterman_bound_table(500, 12),
        "expsums.s_avg_bound" => s_avg_bound(100),
        "expsums.singular_96" => Ok(SingularSeries::new(&v0(), 13, 1)?.value(96)),
        "expsums.p_factor_deviation" => Ok(expsums::local_factor_deviation(&v0(), 96, 5, 50)?
            .into_iter()
            .map(|(p, f)| (f - 1.0).abs() * (p * p) as f64)
            .fold(0.0, f64::max)),
        "expsums.main_term_positive_fraction" => main_term_positive_fraction(),
        "spectral.gamma_bar_order_q2" => Ok(spectral::gamma_bar_closure(2, SL2_CLOSURE_CAP)?.order() as f64),
        "spectral.lambda1_q2" => lambda(2),
        "spectral.lambda1_q3" => lambda(3),
        "spectral.lambda1_q4" => lambda(4),
        "spectral.lambda1_q5" => lambda(5),
        "spectral.lambda1_q8" => lambda(8),
        "spectral.alternation_q2" => alt(2),
        "spectral.alternation_q3" => alt(3),
        "spectral.alternation_q4" => alt(4),
        "spectral.alternation_q8" => alt(8),
        _ => invalid(format!("unknown frozen constant {name}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_names_are_unique_and_measurable() {
        let mut names: Vec<_> = BASELINE.iter().map(|c| c.name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), BASELINE.len());
        assert!(measure("no.such.constant").is_err());
        for c in BASELINE {
            assert!(c.value.is_finite(), "{}", c.name);
            assert!(c.name.starts_with(c.module));
        }
    }

    #[test]
    fn cheap_entries_regress() {
        for name in ["spectral.gamma_bar_order_q2", "spectral.lambda1_q4", "spectral.alternation_q2", "forms.zero_pairs_ratio"] {
            let c = lookup(name).unwrap();
            let r = compare(name, c.value, measure(name).unwrap(), c.tol);
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn compare_flags_drift() {
        assert!(compare("x", 1.0, 1.0 + 1e-7, 1e-6).pass);
        assert!(!compare("x", 1.0, 1.1, 1e-6).pass);
    }
}
