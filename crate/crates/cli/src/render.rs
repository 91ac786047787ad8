//! SVG rendering of a gasket.
//!
//! Curvatures follow the integer Descartes tree; centers follow the complex
//! Descartes relation, under which curvature·center reflects exactly like
//! curvature: `b′z′ = 2Σ_{j≠i} b_j z_j − b_i z_i`.

use std::collections::HashSet;
use std::fmt::Write;

use num_complex::Complex64;

use crate::config::{input_err, CliResult};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Circle {
    pub curvature: i64,
    pub center: Complex64,
}

impl Circle {
    pub fn radius(&self) -> f64 {
        1.0 / (self.curvature as f64).abs()
    }
}

/// Place the root quadruple: the bounding circle at the origin, the next
/// circle on the positive real axis, the third above it, the fourth from the
/// complex relation.
pub fn root_circles(root: [i64; 4]) -> CliResult<[Circle; 4]> {
    let Some(o) = root.iter().position(|&b| b < 0) else {
        return input_err("rendering needs a root with a bounding circle (one negative curvature)");
    };
    let rest: Vec<usize> = (0..4).filter(|&i| i != o).collect();
    if rest.iter().any(|&i| root[i] <= 0) {
        return input_err("rendering needs exactly one negative curvature and no zeros");
    }
    let (ia, ib, ic) = (rest[0], rest[1], rest[2]);
    let big_r = 1.0 / (root[o] as f64).abs();
    let (ra, rb) = (1.0 / root[ia] as f64, 1.0 / root[ib] as f64);
    let zo = Complex64::new(0.0, 0.0);
    let doa = big_r - ra;
    let za = Complex64::new(doa, 0.0);
    let (dob, dab) = (big_r - rb, ra + rb);
    let x = (dob * dob - dab * dab + doa * doa) / (2.0 * doa);
    let zb = Complex64::new(x, (dob * dob - x * x).max(0.0).sqrt());

    let b = |i: usize| root[i] as f64;
    let s = zo * b(o) + za * b(ia) + zb * b(ib);
    let p = zo * za * b(o) * b(ia) + za * zb * b(ia) * b(ib) + zo * zb * b(o) * b(ib);
    let rc = 1.0 / b(ic);
    let tangency_error = |zc: Complex64| {
        ((zc - zo).norm() - (big_r - rc)).abs() + ((zc - za).norm() - (ra + rc)).abs() + ((zc - zb).norm() - (rb + rc)).abs()
    };
    let root_p = p.sqrt() * 2.0;
    let (c1, c2) = ((s + root_p) / b(ic), (s - root_p) / b(ic));
    let zc = if tangency_error(c1) <= tangency_error(c2) { c1 } else { c2 };

    let mut out = [Circle { curvature: 0, center: zo }; 4];
    for (i, z) in [(o, zo), (ia, za), (ib, zb), (ic, zc)] {
        out[i] = Circle { curvature: root[i], center: z };
    }
    Ok(out)
}

/// All circles reached within `depth` reflections whose curvature is at most `limit`.
pub fn circles(root: [i64; 4], depth: u32, limit: Option<i64>) -> CliResult<Vec<Circle>> {
    let start = root_circles(root)?;
    let scale = start.iter().map(Circle::radius).fold(0.0, f64::max);
    let key = |c: &Circle| {
        let q = |x: f64| (x / scale * 1e7).round() as i64;
        (c.curvature, q(c.center.re), q(c.center.im))
    };
    let mut seen: HashSet<(i64, i64, i64)> = start.iter().map(key).collect();
    let mut out = start.to_vec();
    let mut stack = vec![(start, usize::MAX, 0u32)];
    while let Some((quad, last, d)) = stack.pop() {
        if d == depth {
            continue;
        }
        for i in (0..4).filter(|&i| i != last) {
            let others = (0..4).filter(|&j| j != i);
            let b: i64 = 2 * others.clone().map(|j| quad[j].curvature).sum::<i64>() - quad[i].curvature;
            if b <= quad[i].curvature || limit.is_some_and(|l| b > l) {
                continue;
            }
            let bz: Complex64 = others.map(|j| quad[j].center * quad[j].curvature as f64).sum::<Complex64>() * 2.0
                - quad[i].center * quad[i].curvature as f64;
            let c = Circle { curvature: b, center: bz / b as f64 };
            let mut next = quad;
            next[i] = c;
            if seen.insert(key(&c)) {
                out.push(c);
            }
            stack.push((next, i, d + 1));
        }
    }
    Ok(out)
}

/// Labelled SVG, bounding circle scaled to a 1000-unit square.
pub fn svg(circles: &[Circle]) -> String {
    let big_r = circles.iter().map(Circle::radius).fold(0.0, f64::max);
    let scale = 500.0 / big_r;
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str("<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"-510 -510 1020 1020\" width=\"1020\" height=\"1020\">\n");
    s.push_str("<g fill=\"none\" stroke=\"black\">\n");
    for c in circles {
        let (x, y, r) = (c.center.re * scale, -c.center.im * scale, c.radius() * scale);
        let w = if c.curvature < 0 { 2.0 } else { 0.5 };
        let _ = writeln!(
            s,
            "<circle cx=\"{x:.4}\" cy=\"{y:.4}\" r=\"{r:.4}\" stroke-width=\"{w}\" data-curvature=\"{}\"/>",
            c.curvature
        );
    }
    s.push_str("</g>\n<g font-family=\"sans-serif\" text-anchor=\"middle\" dominant-baseline=\"central\">\n");
    for c in circles.iter().filter(|c| c.curvature > 0) {
        let (x, y, r) = (c.center.re * scale, -c.center.im * scale, c.radius() * scale);
        let digits = c.curvature.to_string().len() as f64;
        let size = (1.6 * r / digits).min(0.8 * r);
        let _ = writeln!(s, "<text x=\"{x:.4}\" y=\"{y:.4}\" font-size=\"{size:.4}\">{}</text>", c.curvature);
    }
    s.push_str("</g>\n</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use apollonian::descartes::V0;

    fn tangent(a: &Circle, b: &Circle) -> bool {
        let d = (a.center - b.center).norm();
        let want = if a.curvature < 0 || b.curvature < 0 {
            (a.radius() - b.radius()).abs()
        } else {
            a.radius() + b.radius()
        };
        (d - want).abs() < 1e-9
    }

    #[test]
    fn root_circles_mutually_tangent() {
        for root in [V0, [-1, 2, 2, 3], [-6, 11, 14, 15]] {
            let c = root_circles(root).unwrap();
            for i in 0..4 {
                for j in i + 1..4 {
                    assert!(tangent(&c[i], &c[j]), "{root:?} circles {i},{j}");
                }
            }
        }
    }

    #[test]
    fn depth_zero_is_the_root() {
        assert_eq!(circles(V0, 0, None).unwrap().len(), 4);
    }

    #[test]
    fn depth_one_adds_four() {
        let c = circles(V0, 1, None).unwrap();
        let mut k: Vec<i64> = c.iter().map(|c| c.curvature).collect();
        k.sort();
        assert_eq!(k, [-11, 21, 24, 28, 40, 52, 61, 157]);
    }

    #[test]
    fn children_tangent_to_their_quadruple() {
        let c = circles([-1, 2, 2, 3], 3, None).unwrap();
        for x in &c[4..] {
            let touching = c.iter().filter(|y| !std::ptr::eq(*y, x) && tangent(x, y)).count();
            assert!(touching >= 3, "circle {x:?} touches only {touching}");
        }
    }

    #[test]
    fn strip_root_rejected() {
        assert!(root_circles([0, 0, 1, 1]).is_err());
    }
}
