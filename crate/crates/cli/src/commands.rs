use std::path::PathBuf;

use apollonian::congruence::{admissible_classes_via_closure, quotient_closure, AdmissibilityTable, DEFAULT_CLOSURE_CAP};
use apollonian::descartes::V0;
use apollonian::expsums::{
    major_arc_decomposition, main_term_sign_count, representation_table, sf_closed, sf_direct, ArcParams, SfParams,
    SingularSeries,
};
use apollonian::expsums::circle::DECOMPOSITION_TOL;
use apollonian::forms::{form_of_quadruple, ShiftedForm};
use apollonian::frozen::{self, compare, lookup};
use apollonian::orbit::{self, build_family, census_of_set, enumerate_curvatures};
use apollonian::spectral::{self, CayleySpectrum, SL2_CLOSURE_CAP};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::cache;
use crate::config::{input_err, CliError, CliResult, IntList, RunConfig};
use crate::render;
use crate::report::{Report, Table};
use crate::snapshot;

pub const DEFAULT_GASKET_LIMIT: u64 = 100_000_000;
const MEMORY_WARNING_LIMIT: u64 = 1_000_000_000;
const EXCEPTIONS_SHOWN: usize = 1000;
const ALTERNATION_K_MAX: u32 = 1000;
const MIN_GRID: usize = 1 << 16;
const MAX_GRID: usize = 1 << 24;

fn frozen_if(report: &mut Report, name: &str, measured: f64) {
    if let Some(c) = lookup(name) {
        report.compare(compare(name, c.value, measured, c.tol));
    }
}

#[derive(Args, Clone, Debug, Default)]
pub struct GasketArgs {
    /// Write the curvature bitset snapshot here.
    #[arg(long)]
    pub bitset: Option<PathBuf>,
    /// Take the curvature set from a snapshot instead of enumerating.
    #[arg(long)]
    pub from_bitset: Option<PathBuf>,
}

pub fn gasket(cfg: &RunConfig, args: &GasketArgs) -> CliResult<Report> {
    let root = cfg.quadruple();
    let set = match &args.from_bitset {
        Some(path) => {
            let set = snapshot::read(path)?;
            if cfg.limit.is_some_and(|n| n != set.n_max()) {
                return input_err(format!("--limit {} disagrees with snapshot N = {}", cfg.limit.unwrap(), set.n_max()));
            }
            set
        }
        None => {
            let n = cfg.limit.unwrap_or(DEFAULT_GASKET_LIMIT);
            if n > MEMORY_WARNING_LIMIT {
                eprintln!("warning: N = {n} needs a {} MB bitset", n / 8 / 1_000_000);
            }
            enumerate_curvatures(&root, n)?
        }
    };
    let n = set.n_max();
    let c = census_of_set(&root, &set)?;
    if let Some(path) = &args.bitset {
        snapshot::write(path, &set)?;
    }

    let mut r = Report::new("gasket", cfg);
    r.line(format!("N = {n}, root {:?}", cfg.root));
    if n <= 1000 {
        r.line(format!("curvatures: {}", set.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(" ")));
    }
    r.line(format!("curvatures {} of {} admissible, density {:.6}", c.curvature_count, c.admissible_count, c.density()));
    r.line(format!("exceptions: {}", c.exceptions.len()));
    match c.monotone_threshold() {
        Some(k) => r.line(format!("exceptions per dyadic block nonincreasing from k = {k}")),
        None => r.line("no complete dyadic block"),
    }

    let mut t = Table::new(&["k", "lo", "hi", "complete", "admissible", "curvatures", "exceptions"]);
    for b in &c.dyadic {
        t.push(vec![json!(b.k), json!(b.lo), json!(b.hi), json!(b.complete), json!(b.admissible), json!(b.curvatures), json!(b.exceptions)]);
    }
    r.table = Some(t);
    r.results = json!({
        "n_max": n,
        "curvature_count": c.curvature_count,
        "admissible_count": c.admissible_count,
        "admissible_classes": c.admissible_classes,
        "density": c.density(),
        "exception_count": c.exceptions.len(),
        "exceptions": &c.exceptions[..c.exceptions.len().min(EXCEPTIONS_SHOWN)],
        "exceptions_truncated": c.exceptions.len() > EXCEPTIONS_SHOWN,
        "monotone_threshold": c.monotone_threshold(),
        "dyadic": c.dyadic,
        "curvatures": if n <= 10_000 { json!(set.to_vec()) } else { Value::Null },
    });
    if cfg.root == V0 && n == 1_000_000 {
        frozen_if(&mut r, "orbit.census_density_1e6", c.density());
        frozen_if(&mut r, "orbit.exceptions_1e6", c.exceptions.len() as f64);
        frozen_if(&mut r, "orbit.exception_threshold_k0", c.monotone_threshold().map_or(f64::NAN, f64::from));
    }
    Ok(r)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ClassesEntry {
    q: u32,
    order: u64,
    classes: Vec<u64>,
}

pub fn admissible(cfg: &RunConfig) -> CliResult<Report> {
    let root = cfg.quadruple();
    let mut r = Report::new("admissible", cfg);
    let mut t = Table::new(&["q", "order", "classes"]);
    let mut out = Vec::new();
    for q in cfg.moduli_or(&[24]) {
        let key = format!("admissible-q{q}-{}", cache::root_key(&cfg.root));
        let e: ClassesEntry = cache::get_or(&key, || -> CliResult<_> {
            let closure = quotient_closure(q, DEFAULT_CLOSURE_CAP)?;
            let classes = admissible_classes_via_closure(&closure, &root).into_iter().collect();
            Ok(ClassesEntry { q, order: closure.order(), classes })
        })?;
        let listed = e.classes.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ");
        r.line(format!("q = {q}: |Γ/Γ(q)| = {}, {} admissible classes: {listed}", e.order, e.classes.len()));
        t.push(vec![json!(q), json!(e.order), json!(listed)]);
        out.push(e);
    }
    r.table = Some(t);
    r.results = json!({ "moduli": out });
    Ok(r)
}

pub fn delta_fit(cfg: &RunConfig) -> CliResult<Report> {
    let y_max = cfg.limit.map_or(1e4, |y| y as f64);
    if y_max <= 100.0 {
        return input_err("--limit (largest norm radius) must exceed 100");
    }
    let ys = orbit::log_spaced(1e2, y_max, 9);
    let table = orbit::norm_ball_count(&ys, orbit::DEFAULT_SLACK, orbit::DEFAULT_NORM_CAP)?;
    let delta = orbit::fit_delta(&table)?;
    let monotone = table.rows.windows(2).all(|w| w[0].count <= w[1].count);

    let mut r = Report::new("delta-fit", cfg);
    let mut t = Table::new(&["y", "count"]);
    for row in &table.rows {
        r.line(format!("Y = {:>10.2}  #{{‖γ‖ < Y}} = {}", row.y, row.count));
        t.push(vec![json!(row.y), json!(row.count)]);
    }
    r.line(format!("fitted δ = {delta:.6}"));
    r.pass &= monotone;
    if !monotone {
        r.line("counts are not monotone");
    }
    if cfg.limit.is_none() {
        let in_range = (1.25..=1.36).contains(&delta);
        r.pass &= in_range;
        r.line(format!("δ ∈ [1.25, 1.36]: {in_range}"));
        frozen_if(&mut r, "orbit.delta_fit", delta);
    }
    r.table = Some(t);
    r.results = json!({ "delta": delta, "rows": table.rows, "slack": table.slack, "monotone": monotone });
    Ok(r)
}

#[derive(Args, Clone, Debug, Default)]
pub struct ExpsumArgs {
    #[arg(long)]
    pub q0: u64,
    /// Shifted form `A,B,C,a` (default: the root's own form).
    #[arg(long, allow_hyphen_values = true)]
    pub form: Option<IntList>,
    #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
    pub r: i64,
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub n: i64,
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub m: i64,
}

fn parse_form(list: &IntList) -> CliResult<ShiftedForm<i64>> {
    match list.0.as_slice() {
        &[a, b, c, s] => Ok(ShiftedForm::new(a, b, c, s)),
        v => input_err(format!("--form needs A,B,C,a (four integers), got {}", v.len())),
    }
}

pub fn expsum(cfg: &RunConfig, args: &ExpsumArgs) -> CliResult<Report> {
    let form = match &args.form {
        Some(l) => parse_form(l)?,
        None => form_of_quadruple(&cfg.quadruple())?,
    };
    let p = SfParams::new(args.q0, args.r, args.n, args.m, form.clone())?;
    let direct = sf_direct(&p)?;
    let closed = match sf_closed(&p) {
        Ok(z) => Some(z),
        Err(apollonian::Error::Unsupported(why)) => {
            eprintln!("closed form skipped: {why}");
            None
        }
        Err(e) => return Err(e.into()),
    };
    let mut r = Report::new("expsum", cfg);
    r.line(format!(
        "S_f(q0 = {}, r = {}; n = {}, m = {}) for f = ({}, {}, {}; {})",
        args.q0, args.r, args.n, args.m, form.a, form.b, form.c, form.shift
    ));
    r.line(format!("direct: {:.12} {:+.12}i", direct.re, direct.im));
    let gap = closed.map(|z| (z - direct).norm());
    if let (Some(z), Some(g)) = (closed, gap) {
        r.line(format!("closed: {:.12} {:+.12}i  (|closed − direct| = {g:.2e})", z.re, z.im));
        r.pass &= g < 1e-9;
    }
    let bound = (args.q0 as f64).powf(-0.5);
    r.line(format!("|S| = {:.12}, q0^(-1/2) = {bound:.12}", direct.norm()));
    r.table = Some({
        let mut t = Table::new(&["q0", "r", "n", "m", "re", "im", "abs"]);
        t.push(vec![json!(args.q0), json!(args.r), json!(args.n), json!(args.m), json!(direct.re), json!(direct.im), json!(direct.norm())]);
        t
    });
    r.results = json!({
        "form": form,
        "q0": args.q0, "r": args.r, "n": args.n, "m": args.m,
        "direct": [direct.re, direct.im],
        "closed": closed.map(|z| [z.re, z.im]),
        "abs": direct.norm(),
        "closed_direct_gap": gap,
    });
    Ok(r)
}

#[derive(Args, Clone, Debug)]
pub struct SingularArgs {
    /// Targets `n[,n…]`.
    #[arg(long, allow_hyphen_values = true)]
    pub n: IntList,
    /// Primes `p ≤ P` enter the truncated product.
    #[arg(long, default_value_t = 13)]
    pub p_max: u64,
    /// Extra depth at each prime.
    #[arg(long, default_value_t = 1)]
    pub depth: u32,
}

pub fn singular(cfg: &RunConfig, args: &SingularArgs) -> CliResult<Report> {
    let root = cfg.quadruple();
    let s = SingularSeries::new(&root, args.p_max, args.depth)?;
    let adm = AdmissibilityTable::new(&root)?;
    let mut r = Report::new("singular", cfg);
    let mut t = Table::new(&["n", "value", "admissible"]);
    let mut rows = Vec::new();
    for &n in &args.n.0 {
        let v = s.value(n);
        let ok = adm.is_admissible(n);
        let word = if ok { "admissible" } else { "non-admissible" };
        r.line(format!("S({n}) = {v:?} ({word})"));
        r.pass &= (v == 0.0) == !ok;
        t.push(vec![json!(n), json!(v), json!(ok)]);
        let factors: serde_json::Map<String, Value> = s.factors_at(n).into_iter().map(|(p, f)| (p.to_string(), json!(f))).collect();
        rows.push(json!({ "n": n, "value": v, "admissible": ok, "factors": factors }));
        if cfg.root == V0 && n == 96 && args.p_max == 13 && args.depth == 1 {
            frozen_if(&mut r, "expsums.singular_96", v);
        }
    }
    r.table = Some(t);
    r.results = json!({ "p_max": args.p_max, "depth": args.depth, "values": rows });
    Ok(r)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum SpectralCheck {
    #[default]
    Gap,
    Transference,
    Alternation,
    Correspondence,
}

#[derive(Args, Clone, Debug, Default)]
pub struct SpectralArgs {
    #[arg(long, value_enum, default_value_t = SpectralCheck::Gap)]
    pub check: SpectralCheck,
}

fn cached_spectrum(q: u32) -> CliResult<CayleySpectrum> {
    cache::get_or(&format!("spectrum-q{q}"), || spectral::gamma_bar_spectrum(q, SL2_CLOSURE_CAP).map_err(CliError::from))
}

pub fn spectral(cfg: &RunConfig, args: &SpectralArgs) -> CliResult<Report> {
    let mut r = Report::new("spectral", cfg);
    let qs = cfg.moduli_or(&[2, 3, 4, 5, 8]);
    match args.check {
        SpectralCheck::Gap => {
            let mut t = Table::new(&["q", "order", "s_size", "lambda1", "gap"]);
            let mut out = Vec::new();
            for q in qs {
                let s = cached_spectrum(q)?;
                let ok = s.lambda1 < 1.0 - 1e-3;
                r.pass &= ok;
                r.line(format!(
                    "q = {q}: |Γ̄/Γ̄(q)| = {}, |S̄| = {}, λ₁′ = {:.9}, gap {:.9} {}",
                    s.order,
                    s.s_size,
                    s.lambda1,
                    1.0 - s.lambda1,
                    if ok { "PASS" } else { "FAIL" }
                ));
                t.push(vec![json!(q), json!(s.order), json!(s.s_size), json!(s.lambda1), json!(1.0 - s.lambda1)]);
                frozen_if(&mut r, &format!("spectral.lambda1_q{q}"), s.lambda1);
                out.push(s);
            }
            r.table = Some(t);
            r.results = json!({ "spectra": out });
        }
        SpectralCheck::Transference => {
            let mut t = Table::new(&["q", "k", "lhs", "rhs", "holds"]);
            let mut out = Vec::new();
            for q in qs {
                let tr = spectral::transference_check(q, ALTERNATION_K_MAX, SL2_CLOSURE_CAP)?;
                r.pass &= tr.holds;
                r.line(format!(
                    "q = {q}: 1 − λ₁′ = {:.9} ≥ {:.9} = min weight / (2k′²), k = {}: {}",
                    tr.lhs,
                    tr.rhs,
                    tr.k,
                    if tr.holds { "PASS" } else { "FAIL" }
                ));
                for term in &tr.terms {
                    r.line(format!(
                        "  {}: order {}, |S∩G| = {}, λ₁′ = {:.9}, weight {:.9}",
                        term.name, term.order, term.s_intersection, term.lambda1, term.weight
                    ));
                }
                t.push(vec![json!(q), json!(tr.k), json!(tr.lhs), json!(tr.rhs), json!(tr.holds)]);
                out.push(tr);
            }
            r.table = Some(t);
            r.results = json!({ "transference": out });
        }
        SpectralCheck::Alternation => {
            let mut t = Table::new(&["q", "k", "group_order", "h1_order", "h2_order"]);
            let mut out = Vec::new();
            for q in qs {
                let a = spectral::alternation_length(q, ALTERNATION_K_MAX, SL2_CLOSURE_CAP)?;
                let Some(k) = a.k else {
                    return Err(CliError::Resource(format!("alternation mod {q} did not close within {ALTERNATION_K_MAX} steps")));
                };
                r.line(format!("q = {q}: k = {k}, |A_j| = {:?}, |H₁| = {}, |H₂| = {}", a.sizes, a.h1_order, a.h2_order));
                t.push(vec![json!(q), json!(k), json!(a.group_order), json!(a.h1_order), json!(a.h2_order)]);
                frozen_if(&mut r, &format!("spectral.alternation_q{q}"), k as f64);
                out.push(a);
            }
            r.table = Some(t);
            r.results = json!({ "alternation": out });
        }
        SpectralCheck::Correspondence => {
            let c = spectral::generator_correspondence_check()?;
            r.pass &= c.holds;
            r.line(format!("generator images agree up to sign: {} (signs {:?})", c.holds, c.signs));
            r.table = Some({
                let mut t = Table::new(&["generator", "sign"]);
                for (i, s) in c.signs.iter().enumerate() {
                    t.push(vec![json!(i + 1), json!(s)]);
                }
                t
            });
            r.results = json!({ "correspondence": c });
        }
    }
    Ok(r)
}

#[derive(Args, Clone, Debug)]
pub struct CircleArgs {
    /// Quadrature nodes on the circle (default: the window width rounded up
    /// to a power of two, at least 2^16).
    #[arg(long)]
    pub grid: Option<usize>,
}

pub fn circle(cfg: &RunConfig, args: &CircleArgs) -> CliResult<Report> {
    let root = cfg.quadruple();
    let (t1, t2, x) = (cfg.t1.unwrap_or(8.0), cfg.t2.unwrap_or(8.0), cfg.x.unwrap_or(8.0));
    let q0 = cfg.q0cap.unwrap_or(4);
    let k0 = cfg.k0.unwrap_or(8.0);
    if args.grid.is_some_and(|g| !g.is_power_of_two() || g < 2) {
        return input_err("--grid must be a power of two");
    }
    let fam = build_family(&root, t1, t2)?;
    if fam.is_empty() {
        return input_err(format!("no group elements with norm in [{t1}, {}]", 2.0 * t2));
    }
    let table = representation_table(&fam, x, None)?;
    let n = (table.offset + table.values.len() as i64) as f64;
    let grid = args.grid.unwrap_or_else(|| table.values.len().next_power_of_two().max(MIN_GRID));
    if grid > MAX_GRID {
        return Err(CliError::Resource(format!("quadrature grid {grid} exceeds {MAX_GRID} nodes")));
    }
    let arcs = major_arc_decomposition(&table, &ArcParams { n, q0, k0, grid })?;
    let adm = AdmissibilityTable::new(&root)?;
    let window = table.offset..table.offset + table.values.len() as i64;
    let (positive, total) = main_term_sign_count(&arcs, window.clone().filter(|&n| adm.is_admissible(n)));

    let mut r = Report::new("circle", cfg);
    r.line(format!("family: {} elements, X = {x}, window n ∈ [{}, {})", fam.len(), window.start, window.end));
    r.line(format!("ℛ total mass {:.6}, 𝔗 mass {:.6}", table.total(), arcs.theta_mass));
    r.line(format!(
        "max |ℳ + ℰ − ℛ| / max |ℛ| = {:.3e} (tolerance {DECOMPOSITION_TOL:e})",
        arcs.relative_residual
    ));
    r.line(format!("ℳ(n) > 0 at {positive} of {total} admissible n in the window"));
    r.pass &= arcs.relative_residual <= DECOMPOSITION_TOL;

    let restricted = match cfg.u {
        Some(u) => {
            let t = representation_table(&fam, x, Some(u))?;
            let d = table.l1_distance(&t);
            r.line(format!("‖ℛ − ℛ_U‖₁ = {d:.6} at U = {u}"));
            Some(json!({ "u": u, "l1_distance": d }))
        }
        None => None,
    };

    let mut t = Table::new(&["n", "r", "main", "error"]);
    for n in window {
        t.push(vec![json!(n), json!(table.get(n)), json!(arcs.main_at(n)), json!(arcs.error_at(n))]);
    }
    r.table = Some(t);
    r.results = json!({
        "family_size": fam.len(),
        "params": { "t1": t1, "t2": t2, "x": x, "q0": q0, "k0": k0, "grid": grid, "n": n },
        "relative_residual": arcs.relative_residual,
        "theta_mass": arcs.theta_mass,
        "main_positive": positive,
        "admissible_in_window": total,
        "restricted": restricted,
    });
    Ok(r)
}

#[derive(Args, Clone, Debug, Default)]
pub struct RenderArgs {
    /// Reflection depth (default 6, or unbounded when --limit caps curvature).
    #[arg(long)]
    pub depth: Option<u32>,
}

/// Render returns the report and the SVG body.
pub fn render(cfg: &RunConfig, args: &RenderArgs) -> CliResult<(Report, String)> {
    let limit = cfg.limit.map(|l| i64::try_from(l).unwrap_or(i64::MAX));
    let depth = args.depth.unwrap_or(if limit.is_some() { u32::MAX } else { 6 });
    let circles = render::circles(cfg.root, depth, limit)?;
    let svg = render::svg(&circles);
    let mut labels: Vec<i64> = circles.iter().map(|c| c.curvature).filter(|&k| k > 0).collect();
    labels.sort_unstable();
    labels.dedup();
    let mut r = Report::new("render", cfg);
    r.line(format!("{} circles, {} distinct positive curvatures", circles.len(), labels.len()));
    let mut t = Table::new(&["curvature", "x", "y", "radius"]);
    for c in &circles {
        t.push(vec![json!(c.curvature), json!(c.center.re), json!(c.center.im), json!(c.radius())]);
    }
    r.table = Some(t);
    r.results = json!({ "circles": circles.len(), "depth": args.depth, "labels": labels });
    Ok((r, svg))
}

/// Regression measurements exposed for `verify`.
pub fn measure(name: &str) -> CliResult<f64> {
    Ok(frozen::measure(name)?)
}
