//! Spherical functions of a complex group, the spherical Fourier transform and
//! its inverse, and the radial part of the Laplace-Beltrami operator.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::geometry::{density_delta, phi0, write_row, RadialFunction, RadialGrid, TAIL_TOLERANCE};
use crate::root_system::{dot, norm, RootSystem, WeylGroup};
use crate::{Error, Result};

/// Below this regularity measure the alternating sum is replaced by a
/// circle average in the complexified variables.
const REGULARITY_THRESHOLD: f64 = 1e-2;
const CIRCLE_POINTS_ONE: usize = 24;
const CIRCLE_POINTS_BOTH: usize = 48;

/// Evaluator for `phi_lambda(exp H) = phi0(H) * Psi(lambda, H)` where
/// `Psi = pi(rho) / 2^n * A_{i lambda}(H) / (pi(i lambda) pi(H))` and
/// `A_{i lambda}(H) = sum_w det(w) e^{i <w lambda, H>}`.
///
/// `Psi` is entire and symmetric in its two arguments; removable
/// singularities (walls, the origin) are resolved by averaging over a small
/// circle in the complexified arguments, which is exact for entire functions
/// up to the trapezoid error of the circle rule.
#[derive(Debug, Clone)]
pub struct Spherical {
    rs: RootSystem,
    // (row-major matrix, det)
    weyl: Vec<(Vec<f64>, f64)>,
    scale: f64,
    i_pow_n: C64,
    direction: Vec<f64>,
}

impl Spherical {
    pub fn new(rs: &RootSystem) -> Result<Self> {
        let group = WeylGroup::new(rs)?;
        let weyl = group
            .elements()
            .iter()
            .map(|e| (e.matrix.clone(), e.det))
            .collect();
        let n = rs.num_positive_roots();
        let scale = rs.pi(rs.rho()) / 2f64.powi(n as i32);
        let i_pow_n = C64::i().powu(n as u32);
        let direction = rs.rho().iter().map(|x| x / rs.rho_norm()).collect();
        Ok(Self {
            rs: rs.clone(),
            weyl,
            scale,
            i_pow_n,
            direction,
        })
    }

    pub fn root_system(&self) -> &RootSystem {
        &self.rs
    }

    /// `phi_lambda(exp H)`.
    pub fn phi(&self, lambda: &[f64], h: &[f64]) -> C64 {
        self.psi(lambda, h) * phi0(&self.rs, h)
    }

    /// The entire factor `phi_lambda / phi0`.
    pub fn psi(&self, lambda: &[f64], h: &[f64]) -> C64 {
        let nl = norm(lambda);
        let nh = norm(h);
        if nl == 0.0 || nh == 0.0 {
            return C64::from(1.0);
        }
        let perturb_l = self.regularity(lambda, nh.max(1.0)) < REGULARITY_THRESHOLD;
        let perturb_h = self.regularity(h, nl.max(1.0)) < REGULARITY_THRESHOLD;
        if !perturb_l && !perturb_h {
            return self.psi_real(lambda, h);
        }
        let a = if perturb_l { 1.0 / nh.max(1.0) } else { 0.0 };
        let b = if perturb_h { 1.0 / nl.max(1.0) } else { 0.0 };
        let rank = self.rs.rank();
        let mut lz = vec![C64::from(0.0); rank];
        let mut hz = vec![C64::from(0.0); rank];
        let points = if perturb_l && perturb_h {
            CIRCLE_POINTS_BOTH
        } else {
            CIRCLE_POINTS_ONE
        };
        let mut acc = C64::from(0.0);
        for k in 0..points {
            let z = C64::from_polar(1.0, PI * (2 * k + 1) as f64 / points as f64);
            for j in 0..rank {
                lz[j] = lambda[j] + z * (a * self.direction[j]);
                hz[j] = h[j] + z * (b * self.direction[j]);
            }
            acc += self.psi_complex(&lz, &hz);
        }
        acc / points as f64
    }

    /// `prod_alpha min(1, |<alpha, v>| * scale / |alpha|)`: small when the
    /// alternating sum suffers cancellation.
    fn regularity(&self, v: &[f64], scale: f64) -> f64 {
        self.rs
            .positive_roots()
            .iter()
            .map(|a| (dot(a, v).abs() * scale / norm(a)).min(1.0))
            .product()
    }

    fn psi_real(&self, lambda: &[f64], h: &[f64]) -> C64 {
        let rank = self.rs.rank();
        let mut alt = C64::from(0.0);
        for (m, det) in &self.weyl {
            let mut phase = 0.0;
            for i in 0..rank {
                let wl: f64 = (0..rank).map(|j| m[i * rank + j] * lambda[j]).sum();
                phase += wl * h[i];
            }
            let (s, c) = phase.sin_cos();
            alt += C64::new(c, s) * *det;
        }
        let denom = self.i_pow_n * (self.rs.pi(lambda) * self.rs.pi(h));
        alt * self.scale / denom
    }

    fn psi_complex(&self, lambda: &[C64], h: &[C64]) -> C64 {
        let rank = self.rs.rank();
        let mut alt = C64::from(0.0);
        for (m, det) in &self.weyl {
            let mut phase = C64::from(0.0);
            for i in 0..rank {
                let wl: C64 = (0..rank).map(|j| lambda[j] * m[i * rank + j]).sum();
                phase += wl * h[i];
            }
            alt += (C64::i() * phase).exp() * *det;
        }
        let pi_c = |v: &[C64]| -> C64 {
            self.rs
                .positive_roots()
                .iter()
                .map(|a| a.iter().zip(v).map(|(x, y)| y * x).sum::<C64>())
                .product()
        };
        alt * self.scale / (self.i_pow_n * pi_c(lambda) * pi_c(h))
    }
}

/// A point of `a` with the data needed by [`Spherical::psi_prepared`].
#[derive(Debug, Clone)]
pub struct Prepared {
    v: Vec<f64>,
    norm: f64,
    pi: f64,
    // |<alpha, v>| / |alpha| per positive root
    pairings: Vec<f64>,
    // (w v, det w) for every Weyl group element
    orbit: Vec<(Vec<f64>, f64)>,
}

impl Spherical {
    pub fn prepare(&self, v: &[f64]) -> Prepared {
        let rank = self.rs.rank();
        let orbit = self
            .weyl
            .iter()
            .map(|(m, det)| {
                let wv = (0..rank)
                    .map(|i| (0..rank).map(|j| m[i * rank + j] * v[j]).sum())
                    .collect();
                (wv, *det)
            })
            .collect();
        Prepared {
            v: v.to_vec(),
            norm: norm(v),
            pi: self.rs.pi(v),
            pairings: self
                .rs
                .positive_roots()
                .iter()
                .map(|a| dot(a, v).abs() / norm(a))
                .collect(),
            orbit,
        }
    }

    /// Same value as [`Spherical::psi`] for prepared arguments.
    pub fn psi_prepared(&self, l: &Prepared, h: &Prepared) -> C64 {
        if l.norm == 0.0 || h.norm == 0.0 {
            return C64::from(1.0);
        }
        let reg = |p: &Prepared, scale: f64| -> f64 {
            p.pairings.iter().map(|x| (x * scale).min(1.0)).product()
        };
        if reg(l, h.norm.max(1.0)) < REGULARITY_THRESHOLD
            || reg(h, l.norm.max(1.0)) < REGULARITY_THRESHOLD
        {
            return self.psi(&l.v, &h.v);
        }
        let mut alt = C64::from(0.0);
        for (wl, det) in &l.orbit {
            let (s, c) = dot(wl, &h.v).sin_cos();
            alt += C64::new(c, s) * *det;
        }
        alt * self.scale / (self.i_pow_n * (l.pi * h.pi))
    }
}

/// `phi_lambda(exp H)` (builds a fresh evaluator; prefer [`Spherical`] in loops).
pub fn phi_lambda(rs: &RootSystem, lambda: &[f64], h: &[f64]) -> Result<C64> {
    Ok(Spherical::new(rs)?.phi(lambda, h))
}

/// Plancherel density `pi(lambda)^2`.
pub fn plancherel_density(rs: &RootSystem, lambda: &[f64]) -> f64 {
    rs.pi(lambda).powi(2)
}

/// Constant in front of the inversion integral,
/// `4^n / (pi(rho)^2 (2 pi)^rank |W|)`.
pub fn plancherel_constant(rs: &RootSystem) -> f64 {
    let n = rs.num_positive_roots() as i32;
    4f64.powi(n)
        / (rs.pi(rs.rho()).powi(2) * (2.0 * PI).powi(rs.rank() as i32) * rs.weyl_order() as f64)
}

/// Uniform tensor grid on `[-Lambda, Lambda]^rank` in the spectral variable.
#[derive(Debug, Clone)]
pub struct SpectralGrid {
    inner: RadialGrid,
}

impl SpectralGrid {
    pub fn new(rs: &RootSystem, box_radius: f64, points_per_axis: usize) -> Result<Self> {
        Ok(Self {
            inner: RadialGrid::new(rs, box_radius, points_per_axis)?,
        })
    }

    /// Grid with spacing at most `h`, rounded up to an odd node count.
    pub fn with_spacing(rs: &RootSystem, box_radius: f64, h: f64) -> Result<Self> {
        Ok(Self {
            inner: RadialGrid::with_spacing(rs, box_radius, h)?,
        })
    }

    pub fn root_system(&self) -> &RootSystem {
        self.inner.root_system()
    }

    pub fn box_radius(&self) -> f64 {
        self.inner.box_radius()
    }

    pub fn points_per_axis(&self) -> usize {
        self.inner.points_per_axis()
    }

    pub fn spacing(&self) -> f64 {
        self.inner.spacing()
    }

    pub fn len(&self) -> usize {
        self.inner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        self.inner.node(i)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.inner.nodes()
    }

    pub fn locate(&self, lambda: &[f64]) -> Option<usize> {
        self.inner.locate(lambda)
    }

    pub fn on_boundary(&self, i: usize) -> bool {
        self.inner.on_boundary(i)
    }

    pub fn sample<F>(&self, f: F) -> SpectralFunction
    where
        F: Fn(&[f64]) -> C64 + Sync,
    {
        SpectralFunction {
            values: self.inner.sample(f).values,
            grid: self.clone(),
        }
    }
}

/// Samples of a W-invariant function of the spectral variable.
#[derive(Debug, Clone)]
pub struct SpectralFunction {
    pub grid: SpectralGrid,
    pub values: Vec<C64>,
}

impl SpectralFunction {
    pub fn new(grid: SpectralGrid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Data(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Largest `|g(w lambda) - g(lambda)|` over nodes whose images are nodes.
    pub fn w_invariance_defect(&self) -> f64 {
        RadialFunction {
            grid: self.grid.inner.clone(),
            values: self.values.clone(),
        }
        .w_invariance_defect()
    }

    /// CSV with columns `lambda_1..lambda_rank,re,im`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let rank = self.grid.root_system().rank();
        let header: Vec<String> = (1..=rank).map(|k| format!("lambda_{k}")).collect();
        writeln!(out, "{},re,im", header.join(","))?;
        for (l, v) in self.grid.nodes().zip(&self.values) {
            write_row(out, l, &[v.re, v.im])?;
        }
        Ok(())
    }
}

/// Metadata written next to every transform output.
#[derive(Debug, Clone, Serialize)]
pub struct TransformMetadata {
    pub root_system: String,
    pub plancherel_constant: f64,
    pub radial_box_radius: f64,
    pub radial_points_per_axis: usize,
    pub spectral_box_radius: f64,
    pub spectral_points_per_axis: usize,
}

impl TransformMetadata {
    pub fn new(radial: &RadialGrid, spectral: &SpectralGrid) -> Self {
        Self {
            root_system: radial.root_system().tag(),
            plancherel_constant: plancherel_constant(radial.root_system()),
            radial_box_radius: radial.box_radius(),
            radial_points_per_axis: radial.points_per_axis(),
            spectral_box_radius: spectral.box_radius(),
            spectral_points_per_axis: spectral.points_per_axis(),
        }
    }
}

struct Accumulator {
    total: C64,
    mass: f64,
    shell: f64,
}

impl Accumulator {
    fn new() -> Self {
        Self {
            total: C64::from(0.0),
            mass: 0.0,
            shell: 0.0,
        }
    }

    fn add(&mut self, term: C64, boundary: bool) {
        self.total += term;
        let a = term.norm();
        self.mass += a;
        if boundary {
            self.shell += a;
        }
    }

    fn finish(self, what: &str, factor: f64) -> Result<C64> {
        if !(self.total.re.is_finite() && self.total.im.is_finite()) {
            return Err(Error::InconclusiveIntegral {
                what: what.into(),
                tail: f64::INFINITY,
                tol: TAIL_TOLERANCE,
            });
        }
        if self.mass > 0.0 && self.shell > TAIL_TOLERANCE * self.mass {
            return Err(Error::InconclusiveIntegral {
                what: what.into(),
                tail: self.shell / self.mass,
                tol: TAIL_TOLERANCE,
            });
        }
        Ok(self.total * factor)
    }
}

/// `Hf(lambda) = int_{a+} delta(H) f(H) phi_lambda(H) dH` at every spectral node.
pub fn forward_transform(f: &RadialFunction, grid: &SpectralGrid) -> Result<SpectralFunction> {
    let rs = f.grid.root_system();
    check_same_system(rs, grid.root_system())?;
    let sph = Spherical::new(rs)?;
    // delta * f * phi0 per radial node; exact zeros are skipped.
    let weights: Vec<(Prepared, C64, bool)> = (0..f.grid.len())
        .filter_map(|i| {
            let h = f.grid.node(i);
            let w = f.values[i] * (density_delta(rs, h) * phi0(rs, h));
            (w != C64::from(0.0)).then(|| (sph.prepare(h), w, f.grid.on_boundary(i)))
        })
        .collect();
    let factor = f.grid.spacing().powi(rs.rank() as i32) / rs.weyl_order() as f64;
    let values = (0..grid.len())
        .into_par_iter()
        .map(|j| {
            let lambda = sph.prepare(grid.node(j));
            let mut acc = Accumulator::new();
            for (h, w, boundary) in &weights {
                acc.add(*w * sph.psi_prepared(&lambda, h), *boundary);
            }
            acc.finish("forward spherical transform", factor)
        })
        .collect::<Result<Vec<C64>>>()?;
    Ok(SpectralFunction {
        grid: grid.clone(),
        values,
    })
}

/// `f(H) = C int_a g(lambda) phi_{-lambda}(H) pi(lambda)^2 d lambda`, the exact
/// inverse of [`forward_transform`] (`phi_{-lambda} = phi_lambda` whenever
/// `-1` lies in the Weyl group).
pub fn inverse_transform(g: &SpectralFunction, grid: &RadialGrid) -> Result<RadialFunction> {
    let rs = g.grid.root_system();
    check_same_system(rs, grid.root_system())?;
    inverse_with_constant(g, grid, plancherel_constant(rs))
}

fn inverse_with_constant(g: &SpectralFunction, grid: &RadialGrid, c: f64) -> Result<RadialFunction> {
    let rs = g.grid.root_system();
    let sph = Spherical::new(rs)?;
    let weights: Vec<(Prepared, C64, bool)> = (0..g.grid.len())
        .filter_map(|j| {
            let l = g.grid.node(j);
            let w = g.values[j] * plancherel_density(rs, l);
            let neg: Vec<f64> = l.iter().map(|x| -x).collect();
            (w != C64::from(0.0)).then(|| (sph.prepare(&neg), w, g.grid.on_boundary(j)))
        })
        .collect();
    let factor = c * g.grid.spacing().powi(rs.rank() as i32);
    let values = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let h = grid.node(i);
            let hp = sph.prepare(h);
            let mut acc = Accumulator::new();
            for (l, w, boundary) in &weights {
                acc.add(*w * sph.psi_prepared(l, &hp), *boundary);
            }
            Ok(acc.finish("inverse spherical transform", factor)? * phi0(rs, h))
        })
        .collect::<Result<Vec<C64>>>()?;
    Ok(RadialFunction {
        grid: grid.clone(),
        values,
    })
}

fn check_same_system(a: &RootSystem, b: &RootSystem) -> Result<()> {
    if a.tag() != b.tag() {
        return Err(Error::Config(format!(
            "grids belong to different root systems ({} vs {})",
            a.tag(),
            b.tag()
        )));
    }
    Ok(())
}

/// Numerical value of the inversion constant: the factor that makes the
/// round trip of the Gaussian `exp(-|H|^2)` exact at `H = 0`.
pub fn calibrate_plancherel_constant(radial: &RadialGrid, spectral: &SpectralGrid) -> Result<f64> {
    let f = radial.sample(|h| C64::from((-dot(h, h)).exp()));
    let g = forward_transform(&f, spectral)?;
    let rs = radial.root_system();
    let origin = RadialGrid::new(rs, 1.0, 3)?;
    let back = inverse_with_constant(&g, &origin, 1.0)?;
    let centre = origin.locate(&vec![0.0; rs.rank()]).expect("0 is a node");
    Ok(1.0 / back.values[centre].re)
}

/// Result of [`radial_laplacian_apply`]: values are meaningful only where
/// `valid` is set.
#[derive(Debug, Clone)]
pub struct LaplacianResult {
    pub values: RadialFunction,
    pub valid: Vec<bool>,
}

/// Second-order finite-difference application of the radial part
/// `Delta_a + sum_{alpha > 0} 2 coth<alpha, H> <alpha, grad>`.
///
/// Defined on chamber nodes at least two spacings from every wall and from
/// the box boundary.
pub fn radial_laplacian_apply(f: &RadialFunction) -> Result<LaplacianResult> {
    let grid = &f.grid;
    let n = grid.points_per_axis();
    if n < 9 {
        return Err(Error::Config(format!(
            "radial Laplacian needs at least 9 points per axis, got {n}"
        )));
    }
    let rs = grid.root_system();
    let rank = rs.rank();
    let h = grid.spacing();
    let mut out = vec![C64::from(0.0); grid.len()];
    let mut valid = vec![false; grid.len()];
    for i in 0..grid.len() {
        let x = grid.node(i);
        let idx = grid.multi_index(i);
        if idx.iter().any(|&k| k < 2 || k + 2 >= n) {
            continue;
        }
        let wall_distance = rs
            .positive_roots()
            .iter()
            .map(|a| dot(a, x) / norm(a))
            .fold(f64::INFINITY, f64::min);
        if wall_distance < 2.0 * h {
            continue;
        }
        let centre = f.values[i];
        let mut lap = C64::from(0.0);
        let mut grad = vec![C64::from(0.0); rank];
        for d in 0..rank {
            let mut up = idx.clone();
            up[d] += 1;
            let mut down = idx.clone();
            down[d] -= 1;
            let fp = f.values[grid.flat_index(&up)];
            let fm = f.values[grid.flat_index(&down)];
            lap += (fp - centre * 2.0 + fm) / (h * h);
            grad[d] = (fp - fm) / (2.0 * h);
        }
        for a in rs.positive_roots() {
            let directional: C64 = a.iter().zip(&grad).map(|(x, g)| g * x).sum();
            lap += directional * (2.0 / dot(a, x).tanh());
        }
        out[i] = lap;
        valid[i] = true;
    }
    Ok(LaplacianResult {
        values: RadialFunction {
            grid: grid.clone(),
            values: out,
        },
        valid,
    })
}
