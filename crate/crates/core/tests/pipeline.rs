use apollonian::congruence::{admissible_classes, AdmissibilityTable};
use apollonian::descartes::{Quadruple, V0};
use apollonian::expsums::{sf_direct_table, SingularSeries};
use apollonian::forms::{evaluate, extract_form, form_of_quadruple};
use apollonian::frozen::{self, BASELINE};
use apollonian::orbit::{apply_path, build_family, census, census_of_set, enumerate_curvatures, find_witness};
use apollonian::spectral::gamma_bar_spectrum;
use apollonian::spectral::SL2_CLOSURE_CAP;
use proptest::prelude::*;

fn v0() -> Quadruple<i64> {
    Quadruple::from_i64(V0)
}

#[test]
fn census_from_set_matches_direct_census() {
    let set = enumerate_curvatures(&v0(), 50_000).unwrap();
    assert_eq!(census_of_set(&v0(), &set).unwrap(), census(&v0(), 50_000).unwrap());
}

#[test]
fn every_curvature_is_admissible() {
    let adm = AdmissibilityTable::new(&v0()).unwrap();
    let set = enumerate_curvatures(&v0(), 200_000).unwrap();
    assert!(set.iter().all(|n| adm.is_admissible(n as i64)));
}

#[test]
fn family_forms_produce_curvatures() {
    let fam = build_family(&v0(), 8.0, 8.0).unwrap();
    let set = enumerate_curvatures(&v0(), 2_000_000).unwrap();
    for m in &fam.members {
        for (x, y) in [(1i64, 1i64), (1, -1), (2, 1), (3, 5), (-4, 7)] {
            let n = evaluate(&m.form, &x, &y).unwrap();
            if n > 0 && (n as u64) <= set.n_max() {
                assert!(set.contains(n as u64), "{n} from {:?} at ({x},{y})", m.form);
            }
        }
    }
}

#[test]
fn every_frozen_constant_has_a_measurement() {
    let cheap = ["orbit.delta_fit", "expsums.singular_96", "forms.zero_pairs_ratio", "spectral.lambda1_q4"];
    for name in cheap {
        let c = frozen::lookup(name).unwrap();
        let m = frozen::measure(name).unwrap();
        assert!(frozen::compare(name, c.value, m, c.tol).pass, "{name}: {m} vs {}", c.value);
    }
    assert!(frozen::measure("no.such.constant").is_err());
    assert!(BASELINE.iter().all(|c| c.name.starts_with(c.module)));
}

#[test]
fn admissible_classes_refine_along_divisors() {
    let c24 = admissible_classes(24, &v0()).unwrap();
    let c8 = admissible_classes(8, &v0()).unwrap();
    let c3 = admissible_classes(3, &v0()).unwrap();
    for n in 0..24u64 {
        assert_eq!(c24.contains(&n), c8.contains(&(n % 8)) && c3.contains(&(n % 3)), "n = {n}");
    }
}

#[test]
fn spectral_gap_is_stable_under_repetition() {
    let a = gamma_bar_spectrum(5, SL2_CLOSURE_CAP).unwrap();
    let b = gamma_bar_spectrum(5, SL2_CLOSURE_CAP).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn witnesses_reach_their_targets(idx in 0usize..2000) {
        let members = enumerate_curvatures(&v0(), 20_000).unwrap().to_vec();
        let n = members[idx % members.len()] as i64;
        let w = find_witness(&v0(), n).unwrap().unwrap();
        prop_assert!(apply_path(&v0(), &w).unwrap().0.contains(&n));
    }

    #[test]
    fn singular_series_vanishes_exactly_off_admissible(n in 1i64..200_000) {
        let s = SingularSeries::new(&v0(), 13, 1).unwrap();
        let adm = AdmissibilityTable::new(&v0()).unwrap();
        prop_assert_eq!(s.value(n) == 0.0, !adm.is_admissible(n));
        prop_assert!(s.value(n) >= 0.0);
    }

    #[test]
    fn sf_multiplicative_over_coprime_moduli(a in 2u64..12, b in 2u64..12, r in 1i64..200) {
        prop_assume!(num_integer::gcd(a, b) == 1);
        let q = a * b;
        prop_assume!(num_integer::gcd(r, q as i64) == 1);
        let f = form_of_quadruple(&v0()).unwrap();
        let whole = sf_direct_table(&f, q, r).unwrap();
        let ta = sf_direct_table(&f, a, r * b as i64 % a as i64).unwrap();
        let tb = sf_direct_table(&f, b, r * a as i64 % b as i64).unwrap();
        for n in 0..q {
            for m in 0..q {
                let p = ta[((n % a) * a + m % a) as usize] * tb[((n % b) * b + m % b) as usize];
                prop_assert!((whole[(n * q + m) as usize] - p).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn extracted_forms_have_discriminant_minus_four_a_squared(pairs in proptest::collection::vec((1u8..=4, 1u8..=4), 0..4)) {
        let word: Vec<u8> = pairs.into_iter().flat_map(|(a, b)| [a, b]).collect();
        let g = apollonian::descartes::word_matrix::<i64>(&word).unwrap();
        let f = extract_form(&g, &v0()).unwrap();
        prop_assert_eq!(f.discriminant().unwrap(), -4 * f.shift * f.shift);
    }
}
