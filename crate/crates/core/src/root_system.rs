//! Reduced root systems of classical type, their Weyl groups, and the
//! derived scalars used throughout the crate.
//!
//! Every vector handed out by this module is expressed in an orthonormal
//! coordinate system of the Cartan subspace `a` (dimension = rank). For the
//! `B`, `C`, `D` families this is the ambient `R^rank`; for `A_l` the roots live
//! in the sum-zero hyperplane of `R^{l+1}` and are projected onto a Helmert
//! basis of that hyperplane.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Maximum rank supported at desk scale.
pub const MAX_RANK: usize = 4;

/// Hard cap on the number of Weyl group elements produced by closure.
pub const WEYL_GROUP_CAP: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Family {
    A,
    B,
    C,
    D,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Family::A => 'A',
            Family::B => 'B',
            Family::C => 'C',
            Family::D => 'D',
        };
        write!(f, "{c}")
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone)]
pub struct RootSystem {
    family: Family,
    rank: usize,
    ambient_dim: usize,
    /// Positive roots in ambient coordinates, sorted lexicographically.
    ambient_roots: Vec<Vec<f64>>,
    /// Positive roots in orthonormal coordinates of `a`, same order.
    roots: Vec<Vec<f64>>,
    /// Indices into `roots` of the simple roots.
    simple: Vec<usize>,
    rho: Vec<f64>,
    dim_x: usize,
}

impl RootSystem {
    /// Standard realization of the reduced root system of the given family and rank.
    pub fn new(family: Family, rank: usize) -> Result<Self> {
        if rank == 0 || rank > MAX_RANK {
            return Err(Error::Unsupported(format!(
                "{family}{rank}: rank must be in 1..={MAX_RANK}"
            )));
        }
        if family == Family::D && rank < 2 {
            return Err(Error::Unsupported(format!("D{rank}: rank must be >= 2")));
        }
        let ambient_dim = if family == Family::A { rank + 1 } else { rank };
        let e = |i: usize| {
            let mut v = vec![0.0; ambient_dim];
            v[i] = 1.0;
            v
        };
        let comb = |a: &[f64], b: &[f64], s: f64| -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| x + s * y).collect()
        };

        let mut ambient_roots = Vec::new();
        let mut simple_ambient = Vec::new();
        match family {
            Family::A => {
                for i in 0..ambient_dim {
                    for j in i + 1..ambient_dim {
                        ambient_roots.push(comb(&e(i), &e(j), -1.0));
                    }
                }
                for i in 0..rank {
                    simple_ambient.push(comb(&e(i), &e(i + 1), -1.0));
                }
            }
            Family::B | Family::C | Family::D => {
                for i in 0..rank {
                    for j in i + 1..rank {
                        ambient_roots.push(comb(&e(i), &e(j), -1.0));
                        ambient_roots.push(comb(&e(i), &e(j), 1.0));
                    }
                }
                for i in 0..rank.saturating_sub(1) {
                    simple_ambient.push(comb(&e(i), &e(i + 1), -1.0));
                }
                let last = rank - 1;
                match family {
                    Family::B => {
                        for i in 0..rank {
                            ambient_roots.push(e(i));
                        }
                        simple_ambient.push(e(last));
                    }
                    Family::C => {
                        for i in 0..rank {
                            ambient_roots.push(e(i).iter().map(|x| 2.0 * x).collect());
                        }
                        simple_ambient.push(e(last).iter().map(|x| 2.0 * x).collect());
                    }
                    _ => simple_ambient.push(comb(&e(last - 1), &e(last), 1.0)),
                }
            }
        }
        ambient_roots.sort_by(|a, b| {
            a.iter()
                .zip(b)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });

        let basis = cartan_basis(family, rank);
        let project = |v: &[f64]| -> Vec<f64> { basis.iter().map(|b| dot(b, v)).collect() };
        let roots: Vec<Vec<f64>> = ambient_roots.iter().map(|r| project(r)).collect();
        let simple = simple_ambient
            .iter()
            .map(|s| {
                ambient_roots
                    .iter()
                    .position(|r| r == s)
                    .expect("simple root is a positive root")
            })
            .collect();
        let mut rho = vec![0.0; rank];
        for r in &roots {
            for (acc, x) in rho.iter_mut().zip(r) {
                *acc += x;
            }
        }
        let dim_x = rank + 2 * roots.len();
        Ok(Self {
            family,
            rank,
            ambient_dim,
            ambient_roots,
            roots,
            simple,
            rho,
            dim_x,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn ambient_roots(&self) -> &[Vec<f64>] {
        &self.ambient_roots
    }

    /// Positive roots in orthonormal coordinates of `a`.
    pub fn positive_roots(&self) -> &[Vec<f64>] {
        &self.roots
    }

    pub fn simple_roots(&self) -> impl Iterator<Item = &[f64]> {
        self.simple.iter().map(|&i| self.roots[i].as_slice())
    }

    /// Sum of the positive roots (multiplicity two folded in).
    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn rho_norm(&self) -> f64 {
        norm(&self.rho)
    }

    /// Manifold dimension `d = rank + 2 |positive roots|`.
    pub fn dim_x(&self) -> usize {
        self.dim_x
    }

    pub fn num_positive_roots(&self) -> usize {
        self.roots.len()
    }

    /// Order `(d - 2) / 2` of the Bessel function in the shell integral.
    pub fn bessel_order(&self) -> f64 {
        (self.dim_x as f64 - 2.0) / 2.0
    }

    /// Order of the Weyl group, from the classification.
    pub fn weyl_order(&self) -> usize {
        let fact: usize = (1..=self.rank).product();
        match self.family {
            Family::A => fact * (self.rank + 1),
            Family::B | Family::C => fact << self.rank,
            Family::D => fact << (self.rank - 1),
        }
    }

    pub fn tag(&self) -> String {
        format!("{}{}", self.family, self.rank)
    }

    /// `pi(lambda) = prod <alpha, lambda>` over positive roots.
    pub fn pi(&self, lambda: &[f64]) -> f64 {
        self.roots.iter().map(|a| dot(a, lambda)).product()
    }

    /// True when `<alpha, h> >= -tol` for every simple root.
    pub fn in_closed_chamber(&self, h: &[f64], tol: f64) -> bool {
        self.simple_roots().all(|a| dot(a, h) >= -tol)
    }

    /// True when `<alpha, h> > 0` for every simple root.
    pub fn in_open_chamber(&self, h: &[f64]) -> bool {
        self.simple_roots().all(|a| dot(a, h) > 0.0)
    }

    /// Reflection of `v` through the hyperplane orthogonal to `alpha`.
    pub fn reflect(alpha: &[f64], v: &[f64]) -> Vec<f64> {
        let c = 2.0 * dot(alpha, v) / dot(alpha, alpha);
        v.iter().zip(alpha).map(|(x, a)| x - c * a).collect()
    }

    /// Fold `h` into the closed positive chamber by repeated simple reflections.
    pub fn fold_to_chamber(&self, h: &[f64]) -> Vec<f64> {
        let mut v = h.to_vec();
        // Each reflection strictly increases <rho_W, v>; the loop terminates after at most |W| steps.
        for _ in 0..WEYL_GROUP_CAP {
            match self.simple_roots().find(|a| dot(a, &v) < -1e-14) {
                Some(a) => v = Self::reflect(a, &v),
                None => break,
            }
        }
        v
    }
}

impl FromStr for RootSystem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let mut chars = s.chars();
        let family = match chars.next().map(|c| c.to_ascii_uppercase()) {
            Some('A') => Family::A,
            Some('B') => Family::B,
            Some('C') => Family::C,
            Some('D') => Family::D,
            _ => return Err(Error::Unsupported(format!("unknown root system tag {s:?}"))),
        };
        let rank: usize = chars
            .as_str()
            .parse()
            .map_err(|_| Error::Unsupported(format!("unknown root system tag {s:?}")))?;
        RootSystem::new(family, rank)
    }
}

/// Rows are an orthonormal basis of `a` in ambient coordinates.
fn cartan_basis(family: Family, rank: usize) -> Vec<Vec<f64>> {
    match family {
        Family::A => (1..=rank)
            .map(|k| {
                let mut b = vec![0.0; rank + 1];
                let c = 1.0 / ((k * (k + 1)) as f64).sqrt();
                for x in b.iter_mut().take(k) {
                    *x = c;
                }
                b[k] = -(k as f64) * c;
                b
            })
            .collect(),
        _ => (0..rank)
            .map(|i| {
                let mut b = vec![0.0; rank];
                b[i] = 1.0;
                b
            })
            .collect(),
    }
}

/// One Weyl group element: an orthogonal matrix on `a` and its determinant.
#[derive(Debug, Clone)]
pub struct WeylElement {
    /// Row-major `rank x rank` matrix.
    pub matrix: Vec<f64>,
    pub det: f64,
}

impl WeylElement {
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = v.len();
        (0..n)
            .map(|i| dot(&self.matrix[i * n..(i + 1) * n], v))
            .collect()
    }

    /// Applies the transpose (= inverse) of the element.
    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        let n = v.len();
        (0..n)
            .map(|j| (0..n).map(|i| self.matrix[i * n + j] * v[i]).sum())
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct WeylGroup {
    rank: usize,
    elements: Vec<WeylElement>,
    generators: Vec<WeylElement>,
}

impl WeylGroup {
    /// Closure of the simple reflections under composition (breadth first).
    pub fn new(rs: &RootSystem) -> Result<Self> {
        Self::with_cap(rs, WEYL_GROUP_CAP)
    }

    pub fn with_cap(rs: &RootSystem, cap: usize) -> Result<Self> {
        let n = rs.rank();
        let generators: Vec<WeylElement> = rs
            .simple_roots()
            .map(|a| {
                let mut m = vec![0.0; n * n];
                for j in 0..n {
                    let mut e = vec![0.0; n];
                    e[j] = 1.0;
                    let col = RootSystem::reflect(a, &e);
                    for i in 0..n {
                        m[i * n + j] = col[i];
                    }
                }
                WeylElement { matrix: m, det: -1.0 }
            })
            .collect();

        let key = |m: &[f64]| -> Vec<i64> { m.iter().map(|x| (x * 1e8).round() as i64).collect() };
        let mut identity = vec![0.0; n * n];
        for i in 0..n {
            identity[i * n + i] = 1.0;
        }
        let mut seen = HashMap::new();
        let mut elements = vec![WeylElement {
            matrix: identity.clone(),
            det: 1.0,
        }];
        seen.insert(key(&identity), 0usize);
        let mut queue = VecDeque::from([0usize]);
        while let Some(idx) = queue.pop_front() {
            for g in &generators {
                let prod = matmul(&g.matrix, &elements[idx].matrix, n);
                let k = key(&prod);
                if seen.contains_key(&k) {
                    continue;
                }
                if elements.len() >= cap {
                    return Err(Error::TooLarge {
                        what: format!("Weyl group of {}", rs.tag()),
                        cap,
                    });
                }
                seen.insert(k, elements.len());
                queue.push_back(elements.len());
                elements.push(WeylElement {
                    matrix: prod,
                    det: -elements[idx].det,
                });
            }
        }
        Ok(Self {
            rank: n,
            elements,
            generators,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn elements(&self) -> &[WeylElement] {
        &self.elements
    }

    pub fn generators(&self) -> &[WeylElement] {
        &self.generators
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    /// Orbit `{w v}` in element order.
    pub fn orbit(&self, v: &[f64]) -> Vec<Vec<f64>> {
        self.elements.iter().map(|w| w.apply(v)).collect()
    }
}

fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rs(tag: &str) -> RootSystem {
        tag.parse().unwrap()
    }

    #[test]
    fn sizes_and_dimensions() {
        let a1 = rs("A1");
        assert_eq!(a1.num_positive_roots(), 1);
        assert_eq!(a1.dim_x(), 3);
        let a2 = rs("A2");
        assert_eq!(a2.num_positive_roots(), 3);
        assert_eq!(a2.dim_x(), 8);
        let b2 = rs("B2");
        assert_eq!(b2.num_positive_roots(), 4);
        assert_eq!(b2.dim_x(), 10);
        assert_eq!(rs("C3").num_positive_roots(), 9);
        assert_eq!(rs("D4").num_positive_roots(), 12);
        assert_eq!(rs("A4").num_positive_roots(), 10);
    }

    #[test]
    fn unsupported_configurations() {
        assert!(matches!("D1".parse::<RootSystem>(), Err(Error::Unsupported(_))));
        assert!(matches!("A5".parse::<RootSystem>(), Err(Error::Unsupported(_))));
        assert!(matches!("A0".parse::<RootSystem>(), Err(Error::Unsupported(_))));
        assert!(matches!("G2".parse::<RootSystem>(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn weyl_group_orders() {
        let expect = [("A1", 2), ("A2", 6), ("B2", 8), ("A3", 24), ("B3", 48), ("D4", 192), ("B4", 384)];
        for (tag, n) in expect {
            assert_eq!(WeylGroup::new(&rs(tag)).unwrap().order(), n, "{tag}");
        }
        let w = WeylGroup::new(&rs("A2")).unwrap();
        assert_eq!(w.elements().iter().filter(|e| e.det < 0.0).count(), 3);
        let w = WeylGroup::new(&rs("A1")).unwrap();
        let signs: Vec<f64> = w.elements().iter().map(|e| e.det).collect();
        assert_eq!(signs, vec![1.0, -1.0]);
    }

    #[test]
    fn weyl_cap_is_enforced() {
        let err = WeylGroup::with_cap(&rs("B3"), 10).unwrap_err();
        assert!(matches!(err, Error::TooLarge { .. }));
    }

    #[test]
    fn determinant_sign_matches_matrix() {
        for tag in ["A2", "B2", "A3"] {
            let r = rs(tag);
            let w = WeylGroup::new(&r).unwrap();
            let n = r.rank();
            for e in w.elements() {
                // orthogonality
                for i in 0..n {
                    for j in 0..n {
                        let s: f64 = (0..n).map(|k| e.matrix[k * n + i] * e.matrix[k * n + j]).sum();
                        let want = if i == j { 1.0 } else { 0.0 };
                        assert!((s - want).abs() < 1e-12);
                    }
                }
                if n == 2 {
                    let det = e.matrix[0] * e.matrix[3] - e.matrix[1] * e.matrix[2];
                    assert!((det - e.det).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn pi_examples() {
        let a1 = rs("A1");
        assert_eq!(a1.pi(&[0.0]), 0.0);
        assert!((a1.pi(a1.rho()) - 2.0).abs() < 1e-14);
        let a2 = rs("A2");
        let w = WeylGroup::new(&a2).unwrap();
        let l0 = [0.37, -1.21];
        for e in w.elements() {
            let v = a2.pi(&e.apply(&l0));
            assert!((v - e.det * a2.pi(&l0)).abs() < 1e-12);
        }
    }

    #[test]
    fn rho_orbit_and_closure() {
        for tag in ["A1", "A2", "B2", "C2", "D3", "A3"] {
            let r = rs(tag);
            let w = WeylGroup::new(&r).unwrap();
            for e in w.elements() {
                let wr = e.apply(r.rho());
                assert!((norm(&wr) - r.rho_norm()).abs() < 1e-12);
                for a in r.positive_roots() {
                    let wa = e.apply(a);
                    let hit = r.positive_roots().iter().any(|b| {
                        norm(&wa.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>()) < 1e-12
                            || norm(&wa.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<_>>()) < 1e-12
                    });
                    assert!(hit, "{tag}: w alpha not a root");
                }
            }
        }
    }

    #[test]
    fn parity_of_dimension() {
        for tag in ["A1", "A2", "A3", "A4", "B2", "B3", "C4", "D4"] {
            let r = rs(tag);
            assert_eq!(r.dim_x() % 2, r.rank() % 2, "{tag}");
        }
    }

    #[test]
    fn weyl_denominator_identity() {
        for tag in ["A1", "A2", "B2", "C2", "A3"] {
            let r = rs(tag);
            let w = WeylGroup::new(&r).unwrap();
            let samples: [&[f64]; 3] = [&[0.3, -0.8, 0.5, 1.1], &[1.7, 0.2, -1.4, 0.6], &[-2.0, 1.3, 0.9, -0.1]];
            for s in samples {
                let h: Vec<f64> = s[..r.rank()].to_vec();
                let lhs: f64 = w.elements().iter().map(|e| e.det * dot(&e.apply(r.rho()), &h).exp()).sum();
                let rhs: f64 = r.positive_roots().iter().map(|a| 2.0 * dot(a, &h).sinh()).product();
                assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0), "{tag}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn roots_sorted_and_reduced() {
        for tag in ["A3", "B3", "C3", "D4"] {
            let r = rs(tag);
            let roots = r.ambient_roots();
            for pair in roots.windows(2) {
                assert!(pair[0] < pair[1]);
            }
            for (i, a) in r.positive_roots().iter().enumerate() {
                assert!(norm(a) > 0.5);
                for b in &r.positive_roots()[i + 1..] {
                    let c = dot(a, b) / (norm(a) * norm(b));
                    assert!(c < 1.0 - 1e-9, "{tag}: parallel positive roots");
                }
            }
        }
    }

    #[test]
    fn fold_lands_in_chamber() {
        let r = rs("A2");
        let w = WeylGroup::new(&r).unwrap();
        let h = [0.4, 1.3];
        let folded = r.fold_to_chamber(&h);
        assert!(r.in_closed_chamber(&folded, 1e-12));
        assert!((norm(&folded) - norm(&h)).abs() < 1e-12);
        assert!(w.orbit(&h).iter().any(|v| norm(&v.iter().zip(&folded).map(|(a, b)| a - b).collect::<Vec<_>>()) < 1e-12));
    }
}
