//! Radial geometry of `G/K`: the density of the Haar measure in polar
//! coordinates, the ground spherical function and bi-invariant integration.

use std::io::Write;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::root_system::{dot, norm, RootSystem, WeylGroup};
use crate::{Error, Result};

/// Relative size of the outermost grid shell above which an integral is
/// declared unconverged.
pub const TAIL_TOLERANCE: f64 = 1e-10;

/// `prod_{alpha > 0} sinh^2 <alpha, H>`.
pub fn density_delta(rs: &RootSystem, h: &[f64]) -> f64 {
    rs.positive_roots()
        .iter()
        .map(|a| dot(a, h).sinh().powi(2))
        .product()
}

/// `x / sinh x`, continuous at 0.
pub fn x_over_sinh(x: f64) -> f64 {
    let x2 = x * x;
    if x2 < 1e-8 {
        1.0 - x2 / 6.0 + 7.0 * x2 * x2 / 360.0
    } else {
        x / x.sinh()
    }
}

/// Ground spherical function `prod_{alpha > 0} <alpha,H> / sinh <alpha,H>`.
pub fn phi0(rs: &RootSystem, h: &[f64]) -> f64 {
    rs.positive_roots()
        .iter()
        .map(|a| x_over_sinh(dot(a, h)))
        .product()
}

/// `(1 + |H|)^N e^{-<rho, H>}` for `H` in the closed positive chamber.
pub fn phi0_envelope(rs: &RootSystem, h: &[f64], n: f64) -> Result<f64> {
    if h.len() != rs.rank() {
        return Err(Error::Domain(format!(
            "expected a vector of length {}, got {}",
            rs.rank(),
            h.len()
        )));
    }
    if !rs.in_closed_chamber(h, 1e-12) {
        return Err(Error::Domain(
            "point lies outside the closed positive chamber; fold it first".into(),
        ));
    }
    Ok((1.0 + norm(h)).powf(n) * (-dot(rs.rho(), h)).exp())
}

/// Uniform tensor grid on the box `[-R, R]^rank` (odd points per axis, so 0
/// is a node).
#[derive(Debug, Clone)]
pub struct RadialGrid {
    rs: RootSystem,
    box_radius: f64,
    points_per_axis: usize,
    spacing: f64,
    nodes: Vec<f64>,
    positive: Vec<bool>,
}

impl RadialGrid {
    pub fn new(rs: &RootSystem, box_radius: f64, points_per_axis: usize) -> Result<Self> {
        if !(box_radius > 0.0 && box_radius.is_finite()) {
            return Err(Error::Config(format!(
                "box radius must be positive, got {box_radius}"
            )));
        }
        if points_per_axis < 3 || points_per_axis.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "points per axis must be odd and at least 3, got {points_per_axis}"
            )));
        }
        let rank = rs.rank();
        let total = points_per_axis
            .checked_pow(rank as u32)
            .filter(|&t| t <= 50_000_000)
            .ok_or(Error::TooLarge {
                what: "radial grid nodes".into(),
                cap: 50_000_000,
            })?;
        let spacing = 2.0 * box_radius / (points_per_axis - 1) as f64;
        let mut nodes = Vec::with_capacity(total * rank);
        let mut positive = Vec::with_capacity(total);
        let mut idx = vec![0usize; rank];
        for _ in 0..total {
            let start = nodes.len();
            for &i in &idx {
                nodes.push(-box_radius + i as f64 * spacing);
            }
            let h = &nodes[start..];
            positive.push(rs.in_open_chamber(h));
            // last axis fastest
            for d in (0..rank).rev() {
                idx[d] += 1;
                if idx[d] < points_per_axis {
                    break;
                }
                idx[d] = 0;
            }
        }
        Ok(Self {
            rs: rs.clone(),
            box_radius,
            points_per_axis,
            spacing,
            nodes,
            positive,
        })
    }

    /// Grid with spacing at most `h`, rounded up to an odd node count.
    pub fn with_spacing(rs: &RootSystem, box_radius: f64, h: f64) -> Result<Self> {
        let mut n = (2.0 * box_radius / h).ceil() as usize + 1;
        if n.is_multiple_of(2) {
            n += 1;
        }
        Self::new(rs, box_radius, n.max(3))
    }

    pub fn root_system(&self) -> &RootSystem {
        &self.rs
    }

    pub fn box_radius(&self) -> f64 {
        self.box_radius
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.positive.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positive.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        let r = self.rs.rank();
        &self.nodes[i * r..(i + 1) * r]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.nodes.chunks(self.rs.rank())
    }

    pub fn is_positive(&self, i: usize) -> bool {
        self.positive[i]
    }

    /// Per-axis indices of node `i`.
    pub fn multi_index(&self, mut i: usize) -> Vec<usize> {
        let r = self.rs.rank();
        let mut out = vec![0; r];
        for d in (0..r).rev() {
            out[d] = i % self.points_per_axis;
            i /= self.points_per_axis;
        }
        out
    }

    /// Flat index of the node with the given per-axis indices.
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &k| acc * self.points_per_axis + k)
    }

    /// Flat index of the node at `h`, if `h` is a node (to 1e-9 spacing).
    pub fn locate(&self, h: &[f64]) -> Option<usize> {
        let mut idx = Vec::with_capacity(h.len());
        for &x in h {
            let t = (x + self.box_radius) / self.spacing;
            let k = t.round();
            if (t - k).abs() > 1e-9 || k < 0.0 || k >= self.points_per_axis as f64 {
                return None;
            }
            idx.push(k as usize);
        }
        Some(self.flat_index(&idx))
    }

    /// Whether node `i` lies on the outer boundary of the box.
    pub fn on_boundary(&self, i: usize) -> bool {
        self.multi_index(i)
            .iter()
            .any(|&k| k == 0 || k + 1 == self.points_per_axis)
    }

    /// Sample a function at every node.
    pub fn sample<F>(&self, f: F) -> RadialFunction
    where
        F: Fn(&[f64]) -> C64 + Sync,
    {
        let rank = self.rs.rank();
        let values = self.nodes.par_chunks(rank).map(&f).collect();
        RadialFunction {
            grid: self.clone(),
            values,
        }
    }
}

/// Samples of a `K`-bi-invariant function on a [`RadialGrid`].
#[derive(Debug, Clone)]
pub struct RadialFunction {
    pub grid: RadialGrid,
    pub values: Vec<C64>,
}

impl RadialFunction {
    pub fn new(grid: RadialGrid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Data(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: &RadialGrid) -> Self {
        Self {
            values: vec![C64::from(0.0); grid.len()],
            grid: grid.clone(),
        }
    }

    /// Largest `|f(wH) - f(H)|` over nodes `H` whose images `wH` are nodes.
    pub fn w_invariance_defect(&self) -> f64 {
        let w = WeylGroup::new(self.grid.root_system()).expect("rank is capped");
        let mut worst: f64 = 0.0;
        for (i, h) in self.grid.nodes().enumerate() {
            for e in w.elements() {
                let img = e.apply(h);
                if let Some(j) = self.grid.locate(&img) {
                    worst = worst.max((self.values[j] - self.values[i]).norm());
                }
            }
        }
        worst
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// CSV with columns `H_1..H_rank,re,im`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let rank = self.grid.root_system().rank();
        let header: Vec<String> = (1..=rank).map(|k| format!("H_{k}")).collect();
        writeln!(out, "{},re,im", header.join(","))?;
        for (h, v) in self.grid.nodes().zip(&self.values) {
            write_row(out, h, &[v.re, v.im])?;
        }
        Ok(())
    }
}

pub(crate) fn write_row<W: Write>(out: &mut W, coords: &[f64], rest: &[f64]) -> std::io::Result<()> {
    let mut first = true;
    for x in coords.iter().chain(rest) {
        if !first {
            out.write_all(b",")?;
        }
        first = false;
        write!(out, "{x:.17e}")?;
    }
    out.write_all(b"\n")
}

/// Trapezoid sum of `w(H) * f(H)` over the whole box divided by `|W|`, which
/// equals the integral over the positive chamber for W-invariant integrands.
///
/// Fails with an inconclusive-integral error when the outermost shell carries
/// more than [`TAIL_TOLERANCE`] of the absolute mass.
pub(crate) fn chamber_integral(
    grid: &RadialGrid,
    what: &str,
    integrand: impl Fn(usize) -> C64 + Sync,
) -> Result<C64> {
    let terms: Vec<C64> = (0..grid.len()).into_par_iter().map(&integrand).collect();
    let mut total = C64::from(0.0);
    let mut mass = 0.0;
    let mut shell = 0.0;
    for (i, t) in terms.iter().enumerate() {
        total += t;
        mass += t.norm();
        if grid.on_boundary(i) {
            shell += t.norm();
        }
    }
    if !total.re.is_finite() || !total.im.is_finite() {
        return Err(Error::InconclusiveIntegral {
            what: what.into(),
            tail: f64::INFINITY,
            tol: TAIL_TOLERANCE,
        });
    }
    if mass > 0.0 && shell > TAIL_TOLERANCE * mass {
        return Err(Error::InconclusiveIntegral {
            what: what.into(),
            tail: shell / mass,
            tol: TAIL_TOLERANCE,
        });
    }
    let order = grid.root_system().weyl_order() as f64;
    let cell = grid.spacing().powi(grid.root_system().rank() as i32);
    Ok(total * (cell / order))
}

/// `int_{a+} delta(H) f(H) dH`.
pub fn integrate_biinvariant(f: &RadialFunction) -> Result<C64> {
    let grid = &f.grid;
    let rs = grid.root_system();
    chamber_integral(grid, "bi-invariant integral", |i| {
        let v = f.values[i];
        if v == C64::from(0.0) {
            return v;
        }
        v * density_delta(rs, grid.node(i))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::adaptive_simpson;
    use proptest::prelude::*;

    fn rs(tag: &str) -> RootSystem {
        tag.parse().unwrap()
    }

    #[test]
    fn density_examples() {
        let a1 = rs("A1");
        assert_eq!(density_delta(&a1, &[0.0]), 0.0);
        // <alpha, H> = 1 with |alpha| = sqrt 2
        let h = [1.0 / 2f64.sqrt()];
        assert!((density_delta(&a1, &h) - 1f64.sinh().powi(2)).abs() < 1e-14);
        assert!((density_delta(&a1, &h) - 1.381_097_845_541_430_5).abs() < 1e-12);
        let a2 = rs("A2");
        let alpha = a2.positive_roots()[0].clone();
        let on_wall = RootSystem::reflect(&alpha, &[0.3, 0.7]);
        let mid: Vec<f64> = on_wall.iter().zip([0.3, 0.7]).map(|(a, b)| 0.5 * (a + b)).collect();
        assert!(density_delta(&a2, &mid) < 1e-28);
    }

    #[test]
    fn phi0_examples() {
        for tag in ["A1", "A2", "B2", "C3", "D4"] {
            let r = rs(tag);
            assert_eq!(phi0(&r, &vec![0.0; r.rank()]), 1.0);
        }
        let h = [1.0 / 2f64.sqrt()];
        assert!((phi0(&rs("A1"), &h) - 1.0 / 1f64.sinh()).abs() < 1e-15);
        assert!((phi0(&rs("A1"), &h) - 0.850_918_128_239_321_5).abs() < 1e-12);
    }

    #[test]
    fn envelope_examples_and_domain() {
        let a1 = rs("A1");
        assert_eq!(phi0_envelope(&a1, &[0.0], 2.0).unwrap(), 1.0);
        // <rho, H> = 3
        let h = [3.0 / a1.rho_norm()];
        assert!((phi0_envelope(&a1, &h, 0.0).unwrap() - (-3f64).exp()).abs() < 1e-15);
        assert!(matches!(phi0_envelope(&a1, &[-1.0], 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn phi0_two_sided_envelope_in_chamber() {
        let a2 = rs("A2");
        let grid = RadialGrid::new(&a2, 30.0, 121).unwrap();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for (i, h) in grid.nodes().enumerate() {
            if !grid.is_positive(i) {
                continue;
            }
            let poly: f64 = a2.positive_roots().iter().map(|a| 1.0 + dot(a, h)).product();
            let ratio = phi0(&a2, h) / (poly * (-dot(a2.rho(), h)).exp());
            lo = lo.min(ratio);
            hi = hi.max(ratio);
            let upper = phi0(&a2, h) / phi0_envelope(&a2, h, 3.0).unwrap();
            assert!(upper <= 8.0);
        }
        assert!(lo > 0.1 && hi < 8.0, "ratio range [{lo}, {hi}]");
    }

    #[test]
    fn zero_function_integrates_to_zero() {
        let grid = RadialGrid::new(&rs("A2"), 5.0, 21).unwrap();
        let f = RadialFunction::zeros(&grid);
        assert_eq!(integrate_biinvariant(&f).unwrap(), C64::from(0.0));
    }

    #[test]
    fn rank_one_gaussian_matches_oracle() {
        let a1 = rs("A1");
        let grid = RadialGrid::new(&a1, 12.0, 241).unwrap();
        let f = grid.sample(|h| {
            let x: f64 = dot(&a1.positive_roots()[0], h);
            C64::from((-x * x).exp())
        });
        let got = integrate_biinvariant(&f).unwrap();
        // dH = dr / |alpha| with r = <alpha, H>
        let oracle = adaptive_simpson(&|r: f64| r.sinh().powi(2) * (-r * r).exp(), 0.0, 12.0, 1e-14)
            / 2f64.sqrt();
        assert!(((got.re - oracle) / oracle).abs() < 1e-8, "{got} vs {oracle}");
        assert_eq!(got.im, 0.0);
    }

    #[test]
    fn rank_two_gaussian_matches_oracle() {
        let a2 = rs("A2");
        let grid = RadialGrid::new(&a2, 12.0, 121).unwrap();
        let f = grid.sample(|h| C64::from((-dot(h, h)).exp()));
        let got = integrate_biinvariant(&f).unwrap().re;
        let inner = |x: f64| {
            adaptive_simpson(
                &|y: f64| density_delta(&a2, &[x, y]) * (-(x * x + y * y)).exp(),
                -12.0,
                12.0,
                1e-9,
            )
        };
        let oracle = adaptive_simpson(&inner, -12.0, 12.0, 1e-7) / 6.0;
        assert!(((got - oracle) / oracle).abs() < 1e-6, "{got} vs {oracle}");
    }

    #[test]
    fn slow_decay_is_inconclusive() {
        let a1 = rs("A1");
        let grid = RadialGrid::new(&a1, 4.0, 81).unwrap();
        let f = grid.sample(|h| C64::from(phi0(&a1, h)));
        assert!(integrate_biinvariant(&f).unwrap_err().is_inconclusive());
    }

    #[test]
    fn grid_validation() {
        let a1 = rs("A1");
        assert!(RadialGrid::new(&a1, 1.0, 10).is_err());
        assert!(RadialGrid::new(&a1, -1.0, 11).is_err());
        let g = RadialGrid::new(&a1, 1.0, 11).unwrap();
        assert!(g.locate(&[0.0]).is_some());
        assert!((g.spacing() - 0.2).abs() < 1e-15);
        let g2 = RadialGrid::new(&rs("A2"), 2.0, 9).unwrap();
        let k = g2.flat_index(&[3, 7]);
        assert_eq!(g2.multi_index(k), vec![3, 7]);
    }

    #[test]
    fn sampled_invariant_function_passes_w_check() {
        let a1 = rs("A1");
        let g = RadialGrid::new(&a1, 3.0, 31).unwrap();
        let f = g.sample(|h| C64::from(phi0(&a1, h)));
        assert!(f.w_invariance_defect() < 1e-12);
        let bad = g.sample(|h| C64::from(h[0]));
        assert!(bad.w_invariance_defect() > 1.0);
    }

    #[test]
    fn csv_layout() {
        let g = RadialGrid::new(&rs("A2"), 1.0, 3).unwrap();
        let f = g.sample(|h| C64::new(h[0], h[1]));
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "H_1,H_2,re,im");
        assert_eq!(lines.len(), 10);
        assert_eq!(lines[1].split(',').count(), 4);
    }

    fn vec_in(rank: usize, r: f64) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-r..r, rank)
    }

    proptest! {
        #[test]
        fn density_is_w_invariant(tag in prop::sample::select(vec!["A1", "A2", "B2", "C2", "A3"]),
                                  seed in vec_in(3, 4.0)) {
            let r = rs(tag);
            let h = &seed[..r.rank()];
            let w = WeylGroup::new(&r).unwrap();
            let d0 = density_delta(&r, h);
            for e in w.elements() {
                let d1 = density_delta(&r, &e.apply(h));
                prop_assert!((d1 - d0).abs() <= 1e-12 * d0.max(1.0));
            }
            let p0 = phi0(&r, h);
            prop_assert!(p0 > 0.0 && p0 <= 1.0);
            for e in w.elements() {
                prop_assert!((phi0(&r, &e.apply(h)) - p0).abs() <= 1e-14);
            }
        }

        #[test]
        fn density_bounded_by_exponential(tag in prop::sample::select(vec!["A1", "A2", "B2"]),
                                          seed in vec_in(2, 6.0)) {
            let r = rs(tag);
            let h = r.fold_to_chamber(&seed[..r.rank()]);
            prop_assert!(density_delta(&r, &h) <= (2.0 * dot(r.rho(), &h)).exp() * (1.0 + 1e-12));
        }

        #[test]
        fn phi0_decreases_along_rays(seed in vec_in(2, 5.0), s in 1.0f64..4.0) {
            let r = rs("A2");
            let h = r.fold_to_chamber(&seed);
            let sh: Vec<f64> = h.iter().map(|x| s * x).collect();
            prop_assert!(phi0(&r, &sh) <= phi0(&r, &h) * (1.0 + 1e-14));
        }
    }
}
