//! Cross-module invariant suite plus frozen-constant regression.

use std::collections::BTreeSet;
use std::path::PathBuf;

use apollonian::congruence::{admissible_classes, quotient_closure, AdmissibilityTable, DEFAULT_CLOSURE_CAP};
use apollonian::descartes::{reflect_in_place, w_vector, word_matrix, Quadruple, V0};
use apollonian::expsums::{sf_closed, sf_direct_table, SfParams, SingularSeries};
use apollonian::forms::{evaluate, extract_form, form_of_quadruple, kl_lift, kl_lift_holds};
use apollonian::frozen::BASELINE;
use apollonian::orbit::{apply_path, enumerate_curvatures, find_witness};
use apollonian::spectral::{b_divisible_by_four_subgroup, generator_correspondence_check, h1_closure, SL2_CLOSURE_CAP};
use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::commands::measure;
use crate::config::{input_err, CliResult, RunConfig};
use crate::registry::{self, Registry};
use crate::report::{Report, Table};

pub const MODULES: [&str; 6] = ["core", "congruence", "orbit", "forms", "expsums", "spectral"];

#[derive(Args, Clone, Debug, Default)]
pub struct VerifyArgs {
    /// Suites to run, comma-separated (default: all).
    #[arg(long, value_delimiter = ',')]
    pub modules: Vec<String>,
    /// Frozen-constant registry (default `$APOLLO_CACHE_DIR/frozen.json`, else `./frozen.json`).
    #[arg(long)]
    pub registry: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub module: &'static str,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

type CheckFn = fn(&mut ChaCha8Rng) -> apollonian::Result<(bool, String)>;

fn v0() -> Quadruple<i64> {
    Quadruple::from_i64(V0)
}

fn units(q: u64) -> impl Iterator<Item = i64> {
    (0..q as i64).filter(move |&r| num_integer::gcd(r, q as i64) == 1)
}

fn core_cone(rng: &mut ChaCha8Rng) -> apollonian::Result<(bool, String)> {
    if v0().descartes_form()? != 0 {
        return Ok((false, "F(v0) ≠ 0".into()));
    }
    for _ in 0..1000 {
        let mut v: Quadruple<i128> = Quadruple::from_i64(V0);
        for _ in 0..rng.gen_range(0..20) {
            reflect_in_place(&mut v, rng.gen_range(1..=4))?;
        }
        if !v.is_on_cone()? {
            return Ok((false, format!("{v} left the cone")));
        }
    }
    Ok((true, "1000 random words keep v0 on the cone".into()))
}

fn congruence_classes(_: &mut ChaCha8Rng) -> apollonian::Result<(bool, String)> {
    let got = admissible_classes(24, &v0())?;
    let want: BTreeSet<u64> = [0, 4, 12, 13, 16, 21].into();
    Ok((got == want, format!("classes mod 24: {got:?}")))
}

fn congruence_multiplicative(_: &mut ChaCha8Rng) -> apollonian::Result<(bool, String)> {
    let o = |q| quotient_closure(q, DEFAULT_CLOSURE_CAP).map(|c| c.order());
    let (o2, o3, o6) = (o(2)?, o(3)?, o(6)?);
    Ok((o6 == o2 * o3, format!("|Γ/Γ(6)| = {o6}, |Γ/Γ(2)|·|Γ/Γ(3)| = {}", o2 * o3)))
}

fn orbit_small_set(_: &mut ChaCha8Rng) -> apollonian::Result<(bool, String)> {
    let got = enumerate_curvatures(&v0(), 100)?.to_vec();
    Ok((got == [21, 24, 28, 40, 52, 61, 76, 85, 96], format!("ℬ ∩ [1, 100] = {got:?}")))
}

fn orbit_witnesses(rng: &mut ChaCha8Rng) -> apollonian::Result<(bool, String)> {
    let members = enumerate_curvatures(&v0(), 10_000)?.to_vec();
    for _ in 0..20 {
        let n = members[rng.gen_range(0..members.len())] as i64;
        let ok = match find_witness(&v0(), n)? {
            Some(w) => apply_path(&v0(), &w)?.0.contains(&n),
            None => false,
        };
        if !ok {
            return Ok((false, format!("no valid witness for {n}")));
        }
    }
    Ok((true, "20 sampled curvatures have verified witness words".into()))
}

fn forms_identity(rng: &mut ChaCha8Rng) -> apollonian::Result<(bool, String)> {
    let id = form_of_quadruple(&v0())?;
    if evaluate(&id, &1, &1)? != 96 {
        return Ok((false, "identity form at (1, 1) ≠ 96".into()));
    }
    for _ in 0..1000 {
        let word: Vec<u8> = (0..2 * rng.gen_range(0..4)).map(|_| rng.gen_range(1..=4u8)).collect();
        let g = word_matrix::<i64>(&word)?;
        let (x, y) = (rng.gen_range(-20i64..20), rng.gen_range(-20i64..20));
        let f = extract_form(&g, &v0())?;
        let gv = g.apply_quadruple(&v0())?;
        let w = w_vector(&x, &y)?;
        let dot: i64 = (0..4).map(|k| w.0[k] * gv.0[k]).sum();
        if evaluate(&f, &x, &y)? != dot || f.discriminant()? != -4 * f.shift * f.shift {
            return Ok((false, format!("form identity fails for {word:?} at ({x}, {y})")));
        }
    }
    Ok((true, "f(2x, y) = ⟨w, γv0⟩ and Δ = −4a² on 1000 samples".into()))
}

fn forms_lift(_: &mut ChaCha8Rng) -> apollonian::Result<(bool, String)> {
    let id = form_of_quadruple(&v0())?;
    for d in [11, 121] {
        let (k, l) = kl_lift(id.a, id.b, id.c, d)?;
        if !kl_lift_holds(id.a, id.b, id.c, d, k, l) {
            return Ok((false, format!("lift fails for d = {d}")));
        }
    }
    Ok((true, "(k, l) lift holds for d ∈ {11, 121}".into()))
}

fn expsums_closed(_: &mut ChaCha8Rng) -> apollonian::Result<(bool, String)> {
    let f = form_of_quadruple(&v0())?;
    let mut count = 0;
    for q0 in (1..=15u64).step_by(2) {
        for r in units(q0) {
            let table = sf_direct_table(&f, q0, r)?;
            for n in 0..q0 as i64 {
                for m in 0..q0 as i64 {
                    let c = sf_closed(&SfParams::new(q0, r, n, m, f.clone())?)?;
                    if (c - table[(n * q0 as i64 + m) as usize]).norm() > 1e-9 {
                        return Ok((false, format!("closed ≠ direct at q0 = {q0}, r = {r}, ({n}, {m})")));
                    }
                    count += 1;
                }
            }
        }
    }
    Ok((true, format!("closed = direct on {count} sums, odd q0 ≤ 15")))
}

fn expsums_singular_zeros(_: &mut ChaCha8Rng) -> apollonian::Result<(bool, String)> {
    let s = SingularSeries::new(&v0(), 13, 1)?;
    let adm = AdmissibilityTable::new(&v0())?;
    let bad: Vec<i64> = (1..=1000).filter(|&n| (s.value(n) == 0.0) == adm.is_admissible(n)).collect();
    Ok((bad.is_empty(), format!("𝔖(n) = 0 exactly off the admissible classes for n ≤ 1000; mismatches {bad:?}")))
}

fn spectral_correspondence(_: &mut ChaCha8Rng) -> apollonian::Result<(bool, String)> {
    let c = generator_correspondence_check()?;
    Ok((c.holds, format!("generator signs {:?}", c.signs)))
}

fn spectral_h1(_: &mut ChaCha8Rng) -> apollonian::Result<(bool, String)> {
    let got: BTreeSet<u128> = h1_closure(4, SL2_CLOSURE_CAP)?.elements.into_iter().collect();
    let want: BTreeSet<u128> = b_divisible_by_four_subgroup(4).into_iter().collect();
    Ok((got == want, format!("⟨γ₁, γ₂⟩ mod 4 has {} elements, b ≡ 0 subgroup {}", got.len(), want.len())))
}

const CHECKS: &[(&str, &str, CheckFn)] = &[
    ("core", "cone_preserved", core_cone),
    ("congruence", "classes_mod_24", congruence_classes),
    ("congruence", "order_multiplicative", congruence_multiplicative),
    ("orbit", "set_to_100", orbit_small_set),
    ("orbit", "witness_words", orbit_witnesses),
    ("forms", "form_identity", forms_identity),
    ("forms", "kl_lift", forms_lift),
    ("expsums", "closed_vs_direct", expsums_closed),
    ("expsums", "singular_zero_set", expsums_singular_zeros),
    ("spectral", "generator_correspondence", spectral_correspondence),
    ("spectral", "h1_mod_4", spectral_h1),
];

pub fn verify(cfg: &RunConfig, args: &VerifyArgs, freeze: bool, ci: bool) -> CliResult<Report> {
    let selected: Vec<&str> = if args.modules.is_empty() {
        MODULES.to_vec()
    } else {
        let mut v = Vec::new();
        for m in &args.modules {
            match MODULES.iter().find(|&&k| k == m.trim()) {
                Some(k) => v.push(*k),
                None => return input_err(format!("unknown module `{m}`; expected one of {}", MODULES.join(", "))),
            }
        }
        v
    };
    let path = args.registry.clone().unwrap_or_else(registry::default_path);
    let on_disk = Registry::load(&path)?;
    let reference = on_disk.clone().unwrap_or_else(Registry::baseline);

    let mut r = Report::new("verify", cfg);
    let mut checks = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for &(module, name, f) in CHECKS.iter().filter(|c| selected.contains(&c.0)) {
        let (pass, detail) = f(&mut rng)?;
        r.pass &= pass;
        r.line(format!("{module}/{name}: {} {detail}", if pass { "ok" } else { "FAILED" }));
        checks.push(Check { module, name, pass, detail });
    }

    let mut measured = Vec::new();
    for c in BASELINE.iter().filter(|c| selected.contains(&c.module)) {
        let value = measure(c.name)?;
        if let Some(cmp) = reference.compare(c.name, value) {
            r.compare(cmp);
        }
        measured.push((c.name, value));
    }
    let diff = registry::diff(&r.frozen);
    if !diff.is_empty() {
        r.line(format!("registry {} disagrees:", path.display()));
        for d in &diff {
            r.line(d.clone());
        }
    }

    let write = !ci && (freeze || (on_disk.is_none() && r.pass));
    if write {
        let mut reg = on_disk.unwrap_or_else(Registry::baseline);
        for (name, v) in &measured {
            reg.record(name, *v);
        }
        reg.save(&path)?;
        r.line(format!("registry written to {}", path.display()));
        if freeze {
            r.pass = checks.iter().all(|c| c.pass);
        }
    }

    let mut t = Table::new(&["module", "name", "pass", "detail"]);
    for c in &checks {
        t.push(vec![json!(c.module), json!(c.name), json!(c.pass), json!(c.detail)]);
    }
    for c in &r.frozen {
        let module = c.name.split('.').next().unwrap_or("");
        t.push(vec![json!(module), json!(c.name), json!(c.pass), json!(format!("measured {} registry {}", c.measured, c.frozen))]);
    }
    r.table = Some(t);
    r.results = json!({ "modules": selected, "checks": checks, "registry_written": write });
    Ok(r)
}
