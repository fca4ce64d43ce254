//! Quadrature on edges, triangles and tetrahedra in barycentric coordinates.
//!
//! Edges use Gauss-Legendre rules. Triangles and tetrahedra use
//! Grundmann-Moller rules; those carry some negative weights but stay well
//! inside double precision up to the supported degrees.

use alloc::format;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{FemError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EntityKind {
    Edge,
    Triangle,
    Tet,
}

impl EntityKind {
    /// Number of barycentric coordinates of a point on the entity.
    pub fn vertex_count(self) -> usize {
        match self {
            EntityKind::Edge => 2,
            EntityKind::Triangle => 3,
            EntityKind::Tet => 4,
        }
    }

    pub fn max_degree(self) -> Option<usize> {
        match self {
            EntityKind::Edge => None,
            EntityKind::Triangle => Some(10),
            EntityKind::Tet => Some(12),
        }
    }
}

/// A rule normalized to unit measure: physical integrals multiply the weighted
/// sum by the measure of the entity.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub kind: EntityKind,
    /// Highest total degree integrated exactly.
    pub degree: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let m = self.kind.vertex_count();
        &self.points[i * m..(i + 1) * m]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.points.chunks_exact(self.kind.vertex_count()).zip(self.weights.iter().copied())
    }

    /// Tetrahedral points as fixed-size barycentric arrays.
    ///
    /// # Panics
    /// If the rule is not a tetrahedral rule.
    pub fn tet_points(&self) -> impl Iterator<Item = ([f64; 4], f64)> + '_ {
        assert_eq!(self.kind, EntityKind::Tet);
        self.iter().map(|(p, w)| ([p[0], p[1], p[2], p[3]], w))
    }
}

/// A rule of the given kind that integrates polynomials of total degree
/// `degree` exactly.
pub fn get_rule(kind: EntityKind, degree: usize) -> Result<QuadratureRule> {
    if let Some(max) = kind.max_degree() {
        if degree > max {
            return Err(FemError::Capability(format!(
                "{kind:?} quadrature of degree {degree} requested; the maximum supported degree is {max}"
            )));
        }
    }
    Ok(match kind {
        EntityKind::Edge => gauss_legendre(degree / 2 + 1),
        EntityKind::Triangle => grundmann_moller(2, degree.saturating_sub(1).div_ceil(2)),
        EntityKind::Tet => grundmann_moller(3, degree.saturating_sub(1).div_ceil(2)),
    })
}

/// Exact normalized integral of `prod lambda_i^alpha_i` over a simplex of
/// dimension `alpha.len() - 1`: `d! prod(alpha_i!) / (|alpha| + d)!`.
pub fn simplex_monomial_integral(alpha: &[usize]) -> f64 {
    let d = alpha.len() - 1;
    let total: usize = alpha.iter().sum();
    let num: f64 = alpha.iter().map(|&a| factorial(a)).product::<f64>() * factorial(d);
    num / factorial(total + d)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn gauss_legendre(k: usize) -> QuadratureRule {
    let mut points = Vec::with_capacity(2 * k);
    let mut weights = Vec::with_capacity(k);
    let pi = core::f64::consts::PI;
    // Roots come out in descending order in x, i.e. ascending in t = (1 - x) / 2.
    for i in 0..k {
        let mut x = Float::cos(pi * (i as f64 + 0.75) / (k as f64 + 0.5));
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(k, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(k, x);
        if d != 0.0 {
            dp = d;
        }
        let t = 0.5 * (1.0 - x);
        points.extend_from_slice(&[1.0 - t, t]);
        weights.push(1.0 / ((1.0 - x * x) * dp * dp));
    }
    QuadratureRule { kind: EntityKind::Edge, degree: 2 * k - 1, points, weights }
}

/// Value and derivative of the Legendre polynomial of degree `k` at `x`.
fn legendre(k: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if k == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=k {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    (p1, k as f64 * (x * p1 - p0) / (x * x - 1.0))
}

fn grundmann_moller(n: usize, s: usize) -> QuadratureRule {
    let d = 2 * s + 1;
    let kind = if n == 2 { EntityKind::Triangle } else { EntityKind::Tet };
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let mut beta = Vec::new();
    for i in 0..=s {
        let denom = (d + n - 2 * i) as f64;
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        let w = sign * Float::powi(denom, d as i32) / (factorial(i) * factorial(d + n - i))
            * factorial(n)
            / Float::powi(2.0, 2 * s as i32);
        compositions(s - i, n + 1, &mut beta);
        for b in beta.chunks_exact(n + 1) {
            points.extend(b.iter().map(|&bj| (2 * bj + 1) as f64 / denom));
            weights.push(w);
        }
    }
    QuadratureRule { kind, degree: d, points, weights }
}

/// All ways to write `total` as an ordered sum of `parts` nonnegative integers,
/// flattened, in lexicographic order.
fn compositions(total: usize, parts: usize, out: &mut Vec<usize>) {
    out.clear();
    let mut cur = alloc::vec![0usize; parts];
    fn rec(pos: usize, left: usize, cur: &mut [usize], out: &mut Vec<usize>) {
        if pos + 1 == cur.len() {
            cur[pos] = left;
            out.extend_from_slice(cur);
            return;
        }
        for v in (0..=left).rev() {
            cur[pos] = v;
            rec(pos + 1, left - v, cur, out);
        }
    }
    rec(0, total, &mut cur, out);
}

/// Every multi-index with `parts` entries and total degree at most `max_degree`.
pub fn multi_indices(parts: usize, max_degree: usize) -> Vec<Vec<usize>> {
    let mut all = Vec::new();
    let mut buf = Vec::new();
    for total in 0..=max_degree {
        compositions(total, parts, &mut buf);
        all.extend(buf.chunks_exact(parts).map(|c| c.to_vec()));
    }
    all
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate(rule: &QuadratureRule, alpha: &[usize]) -> f64 {
        rule.iter()
            .map(|(p, w)| w * p.iter().zip(alpha).map(|(l, &a)| l.powi(a as i32)).product::<f64>())
            .sum()
    }

    #[test]
    fn worked_values() {
        let tet = get_rule(EntityKind::Tet, 2).unwrap();
        assert!((integrate(&tet, &[1, 1, 0, 0]) - 1.0 / 20.0).abs() < 1e-15);
        let tri = get_rule(EntityKind::Triangle, 4).unwrap();
        assert!((integrate(&tri, &[4, 0, 0]) - 1.0 / 15.0).abs() < 1e-15);
        let edge = get_rule(EntityKind::Edge, 5).unwrap();
        assert_eq!(edge.len(), 3);
        assert_eq!(edge.degree, 5);
    }

    #[test]
    fn weights_are_normalized() {
        for kind in [EntityKind::Edge, EntityKind::Triangle, EntityKind::Tet] {
            for degree in 0..=kind.max_degree().unwrap_or(15) {
                let r = get_rule(kind, degree).unwrap();
                assert!(r.degree >= degree);
                let s: f64 = r.weights().iter().sum();
                assert!((s - 1.0).abs() < 1e-13, "{kind:?} {degree}: {s}");
                for (p, _) in r.iter() {
                    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn unsupported_degree_names_maximum() {
        match get_rule(EntityKind::Tet, 13) {
            Err(FemError::Capability(msg)) => assert!(msg.contains("12")),
            other => panic!("{other:?}"),
        }
        assert!(get_rule(EntityKind::Triangle, 11).is_err());
        assert!(get_rule(EntityKind::Edge, 40).is_ok());
    }

    #[test]
    fn rules_are_deterministic() {
        assert_eq!(get_rule(EntityKind::Tet, 8).unwrap(), get_rule(EntityKind::Tet, 8).unwrap());
    }

    #[test]
    fn compositions_count() {
        let mut out = Vec::new();
        compositions(3, 4, &mut out);
        assert_eq!(out.len() / 4, 20);
        assert_eq!(multi_indices(4, 2).len(), 15);
    }
}
