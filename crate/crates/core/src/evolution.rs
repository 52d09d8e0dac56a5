//! Klein-Gordon flow `u_tt - Delta u = F` for bi-invariant data, solved by
//! spherical-transform multipliers, together with the Strichartz exponent
//! tables and a Picard solver for small-data semilinear problems.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::geometry::{density_delta, phi0, RadialFunction, RadialGrid};
use crate::root_system::RootSystem;
use crate::spherical::{plancherel_constant, plancherel_density, Spherical, SpectralGrid};
use crate::{Error, Result};

const EXPONENT_TOL: f64 = 1e-12;

fn reciprocal(p: f64) -> f64 {
    if p.is_infinite() {
        0.0
    } else {
        1.0 / p
    }
}

/// Whether `(p, q)` is admissible in dimension `d`: `(1/p, 1/q)` lies in
/// `{(a, b) in (0, 1/2] x (0, 1/2) : a >= (d-1)/2 (1/2 - b)}` or is `(0, 1/2)`.
///
/// For `d = 3` the corner `(1/2, 1/2 - 1/(d-1)) = (1/2, 0)` is not admissible.
pub fn admissible(d: usize, p: f64, q: f64) -> bool {
    if !(p >= 1.0 && q >= 1.0) {
        return false;
    }
    let (a, b) = (reciprocal(p), reciprocal(q));
    if a.abs() <= EXPONENT_TOL && (b - 0.5).abs() <= EXPONENT_TOL {
        return true;
    }
    let corner = 0.5 - 1.0 / (d as f64 - 1.0);
    if d == 3 && (a - 0.5).abs() <= EXPONENT_TOL && (b - corner).abs() <= EXPONENT_TOL {
        return false;
    }
    a > EXPONENT_TOL
        && a <= 0.5 + EXPONENT_TOL
        && b > EXPONENT_TOL
        && b < 0.5 - EXPONENT_TOL
        && a >= 0.5 * (d as f64 - 1.0) * (0.5 - b) - EXPONENT_TOL
}

/// `sigma(p, q) = (d+1)/2 (1/2 - 1/q) + max(0, (d-1)/2 (1/2 - 1/q) - 1/p)` on
/// `[0, 1/2] x (0, 1/2]`.
pub fn sigma_pq(d: usize, p: f64, q: f64) -> Result<f64> {
    if !(p >= 1.0 && q >= 1.0) {
        return Err(Error::Domain(format!("exponents must be at least 1, got p = {p}, q = {q}")));
    }
    let (a, b) = (reciprocal(p), reciprocal(q));
    if !(a <= 0.5 + EXPONENT_TOL && b > EXPONENT_TOL && b <= 0.5 + EXPONENT_TOL) {
        return Err(Error::Domain(format!(
            "(1/p, 1/q) = ({a}, {b}) lies outside [0, 1/2] x (0, 1/2]"
        )));
    }
    let d = d as f64;
    let gap = (0.5 - b).max(0.0);
    Ok(0.5 * (d + 1.0) * gap + (0.5 * (d - 1.0) * gap - a).max(0.0))
}

/// Critical powers of the well-posedness table.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GwpPowers {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma_c: f64,
    pub gamma3: f64,
    pub gamma4: f64,
}

impl GwpPowers {
    pub fn new(d: usize) -> Result<Self> {
        if d < 3 {
            return Err(Error::Domain(format!("well-posedness table needs d >= 3, got {d}")));
        }
        let d = d as f64;
        let gamma3 = if d <= 5.0 {
            let b = (6.0 - d) / 2.0 + 2.0 / (d - 1.0);
            ((d + 6.0) / 2.0 + 2.0 / (d - 1.0) + (4.0 * d + b * b).sqrt()) / d
        } else {
            1.0 + 2.0 / ((d - 1.0) / 2.0 - 1.0 / (d - 1.0))
        };
        let gamma4 = if d <= 5.0 {
            1.0 + 4.0 / (d - 2.0)
        } else {
            let b = (d - 3.0) / 2.0 + 3.0 / (d + 1.0);
            (d - 1.0) / 2.0 + 3.0 / (d + 1.0) - (b * b - 4.0 * (d - 1.0) / (d + 1.0)).sqrt()
        };
        Ok(Self {
            gamma1: 1.0 + 3.0 / d,
            gamma2: 1.0 + 2.0 / ((d - 1.0) / 2.0 + 2.0 / (d - 1.0)),
            gamma_c: 1.0 + 4.0 / (d - 1.0),
            gamma3,
            gamma4,
        })
    }
}

/// Pieces of the regularity table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GwpBranch {
    /// `sigma = 0+`.
    ZeroPlus,
    /// `sigma_1(g) = (d+1)/4 - (d+1)(d+5)/(8d) / (g - (d+1)/(2d))`.
    Sigma1,
    /// `sigma_2(g) = (d+1)/4 - 1/(g-1)`.
    Sigma2,
    /// `sigma_3(g) = d/2 - 2/(g-1)`.
    Sigma3,
}

impl GwpBranch {
    /// Value of this branch's formula at `gamma`, with `0+` read as 0.
    pub fn eval(self, d: usize, gamma: f64) -> f64 {
        let d = d as f64;
        match self {
            GwpBranch::ZeroPlus => 0.0,
            GwpBranch::Sigma1 => {
                (d + 1.0) / 4.0 - (d + 1.0) * (d + 5.0) / (8.0 * d) / (gamma - (d + 1.0) / (2.0 * d))
            }
            GwpBranch::Sigma2 => (d + 1.0) / 4.0 - 1.0 / (gamma - 1.0),
            GwpBranch::Sigma3 => d / 2.0 - 2.0 / (gamma - 1.0),
        }
    }
}

/// Branch of the table governing `gamma` in `(1, gamma4]`.
pub fn gwp_branch(d: usize, gamma: f64) -> Result<GwpBranch> {
    let g = GwpPowers::new(d)?;
    if !(gamma > 1.0) {
        return Err(Error::Domain(format!("the power must exceed 1, got {gamma}")));
    }
    if gamma > g.gamma4 {
        return Err(Error::Domain(format!(
            "gamma = {gamma} exceeds gamma4 = {}; no well-posedness claim",
            g.gamma4
        )));
    }
    Ok(if gamma <= g.gamma1 {
        GwpBranch::ZeroPlus
    } else if gamma <= g.gamma2 {
        GwpBranch::Sigma1
    } else if gamma <= g.gamma_c {
        GwpBranch::Sigma2
    } else {
        GwpBranch::Sigma3
    })
}

/// Default stand-in for `0+`.
pub const ZERO_PLUS: f64 = 1e-3;

/// Regularity `sigma` for which small data in `H^sigma x H^{sigma-1}` give
/// global solutions; `0+` is returned as `zero_plus`.
pub fn gwp_sigma(d: usize, gamma: f64, zero_plus: f64) -> Result<f64> {
    Ok(match gwp_branch(d, gamma)? {
        GwpBranch::ZeroPlus => zero_plus,
        b => b.eval(d, gamma),
    })
}

/// Largest dense transform matrix the propagator will build.
pub const MATRIX_CAP: usize = 8_000_000;

/// Relative spectral mass allowed on the outer shell of the spectral box.
pub const RESOLUTION_TOLERANCE: f64 = 1e-8;

fn same_grid(a: &RadialGrid, b: &RadialGrid) -> bool {
    a.root_system().tag() == b.root_system().tag()
        && a.points_per_axis() == b.points_per_axis()
        && (a.box_radius() - b.box_radius()).abs() <= 1e-12 * a.box_radius().max(1.0)
}

/// Default `(radial, spectral)` grids for the solver: the radial box holds a
/// unit-width pulse for 20 time units and the spectral spacing avoids aliasing
/// on that box. Rank two and higher use smaller boxes to respect [`MATRIX_CAP`].
pub fn default_grids(rs: &RootSystem) -> Result<(RadialGrid, SpectralGrid)> {
    if rs.rank() == 1 {
        Ok((
            RadialGrid::with_spacing(rs, 26.0, 0.1)?,
            SpectralGrid::with_spacing(rs, 11.0, 0.1)?,
        ))
    } else {
        Ok((
            RadialGrid::with_spacing(rs, 6.5, 0.25)?,
            SpectralGrid::with_spacing(rs, 10.0, 0.45)?,
        ))
    }
}

/// Cauchy data `(u, u_t)` at a given time.
#[derive(Debug, Clone)]
pub struct WaveState {
    pub u: RadialFunction,
    pub ut: RadialFunction,
    pub time: f64,
}

impl WaveState {
    pub fn new(u: RadialFunction, ut: RadialFunction, time: f64) -> Result<Self> {
        if !same_grid(&u.grid, &ut.grid) {
            return Err(Error::Config("u and u_t live on different grids".into()));
        }
        if !time.is_finite() {
            return Err(Error::Domain(format!("time must be finite, got {time}")));
        }
        Ok(Self { u, ut, time })
    }
}

/// Forcing `F(s)` sampled at `s = start + m * dt`, `m = 0, 1, ...`.
#[derive(Debug, Clone)]
pub struct Forcing {
    pub start: f64,
    pub dt: f64,
    pub values: Vec<RadialFunction>,
}

/// Spherical transform pair on fixed grids, stored as dense matrices, with
/// the Klein-Gordon multipliers `cos(w t)`, `sin(w t)/w`, `w = sqrt(|lambda|^2 + |rho|^2)`.
#[derive(Debug, Clone)]
pub struct Propagator {
    radial: RadialGrid,
    spectral: SpectralGrid,
    // row j: weights of Hf(lambda_j) on the radial nodes
    forward: Vec<C64>,
    // row i: weights of f(H_i) on the spectral nodes
    inverse: Vec<C64>,
    omega: Vec<f64>,
    // C pi(lambda)^2 h^rank, so that ||f||_2^2 = sum measure |Hf|^2
    measure: Vec<f64>,
    boundary: Vec<bool>,
}

impl Propagator {
    pub fn new(radial: &RadialGrid, spectral: &SpectralGrid) -> Result<Self> {
        let rs = radial.root_system();
        if rs.tag() != spectral.root_system().tag() {
            return Err(Error::Config("radial and spectral grids use different root systems".into()));
        }
        let (nr, ns) = (radial.len(), spectral.len());
        if nr.saturating_mul(ns) > MATRIX_CAP {
            return Err(Error::TooLarge {
                what: format!("transform matrix with {nr} x {ns} entries"),
                cap: MATRIX_CAP,
            });
        }
        let sph = Spherical::new(rs)?;
        let rank = rs.rank() as i32;
        let c = plancherel_constant(rs);
        let cell_h = radial.spacing().powi(rank) / rs.weyl_order() as f64;
        let cell_l = spectral.spacing().powi(rank);
        let hs: Vec<_> = radial.nodes().map(|h| sph.prepare(h)).collect();
        let ls: Vec<_> = spectral.nodes().map(|l| sph.prepare(l)).collect();
        let neg: Vec<_> = spectral
            .nodes()
            .map(|l| sph.prepare(&l.iter().map(|x| -x).collect::<Vec<_>>()))
            .collect();
        let wh: Vec<f64> = radial
            .nodes()
            .map(|h| density_delta(rs, h) * phi0(rs, h) * cell_h)
            .collect();
        let measure: Vec<f64> = spectral
            .nodes()
            .map(|l| c * plancherel_density(rs, l) * cell_l)
            .collect();
        let forward = (0..ns)
            .into_par_iter()
            .flat_map_iter(|j| {
                let (ls, hs, wh, sph) = (&ls, &hs, &wh, &sph);
                (0..nr).map(move |i| {
                    if wh[i] == 0.0 {
                        C64::from(0.0)
                    } else {
                        sph.psi_prepared(&ls[j], &hs[i]) * wh[i]
                    }
                })
            })
            .collect();
        let inverse = (0..nr)
            .into_par_iter()
            .flat_map_iter(|i| {
                let (neg, hs, measure, sph) = (&neg, &hs, &measure, &sph);
                let p0 = phi0(rs, radial.node(i));
                (0..ns).map(move |j| sph.psi_prepared(&neg[j], &hs[i]) * (measure[j] * p0))
            })
            .collect();
        let rho2 = rs.rho_norm().powi(2);
        let omega = spectral
            .nodes()
            .map(|l| (l.iter().map(|x| x * x).sum::<f64>() + rho2).sqrt())
            .collect();
        let boundary = (0..ns).map(|j| spectral.on_boundary(j)).collect();
        Ok(Self {
            radial: radial.clone(),
            spectral: spectral.clone(),
            forward,
            inverse,
            omega,
            measure,
            boundary,
        })
    }

    pub fn radial_grid(&self) -> &RadialGrid {
        &self.radial
    }

    pub fn spectral_grid(&self) -> &SpectralGrid {
        &self.spectral
    }

    pub fn root_system(&self) -> &RootSystem {
        self.radial.root_system()
    }

    /// Multiplier frequencies `sqrt(|lambda|^2 + |rho|^2)` per spectral node.
    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    /// Largest frequency on the spectral box.
    pub fn omega_max(&self) -> f64 {
        self.omega.iter().cloned().fold(0.0, f64::max)
    }

    fn check_grid(&self, f: &RadialFunction) -> Result<()> {
        if same_grid(&self.radial, &f.grid) {
            Ok(())
        } else {
            Err(Error::Config("function does not live on the propagator's radial grid".into()))
        }
    }

    fn forward_raw(&self, values: &[C64]) -> Vec<C64> {
        let nr = self.radial.len();
        self.forward
            .par_chunks(nr)
            .map(|row| row.iter().zip(values).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn inverse_raw(&self, coeffs: &[C64]) -> Vec<C64> {
        let ns = self.spectral.len();
        self.inverse
            .par_chunks(ns)
            .map(|row| row.iter().zip(coeffs).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Spherical transform at every spectral node.
    pub fn transform(&self, f: &RadialFunction) -> Result<Vec<C64>> {
        self.check_grid(f)?;
        Ok(self.forward_raw(&f.values))
    }

    /// Inverse transform onto the radial grid.
    pub fn synthesize(&self, coeffs: &[C64]) -> Result<RadialFunction> {
        if coeffs.len() != self.spectral.len() {
            return Err(Error::Config(format!(
                "expected {} spectral values, got {}",
                self.spectral.len(),
                coeffs.len()
            )));
        }
        RadialFunction::new(self.radial.clone(), self.inverse_raw(coeffs))
    }

    /// Share of `sum |g| pi^2` carried by the outer shell of the spectral box.
    pub fn spectral_tail(&self, coeffs: &[C64]) -> f64 {
        let (mut total, mut shell) = (0.0, 0.0);
        for (j, g) in coeffs.iter().enumerate() {
            let m = self.measure[j] * g.norm();
            total += m;
            if self.boundary[j] {
                shell += m;
            }
        }
        if total > 0.0 {
            shell / total
        } else {
            0.0
        }
    }

    fn resolved(&self, what: &str, coeffs: &[C64]) -> Result<()> {
        let tail = self.spectral_tail(coeffs);
        if tail > RESOLUTION_TOLERANCE || !tail.is_finite() {
            return Err(Error::InconclusiveIntegral {
                what: format!("spectral resolution of {what}"),
                tail,
                tol: RESOLUTION_TOLERANCE,
            });
        }
        Ok(())
    }

    /// `(sum_j w_j^{2s} |g_j|^2 C pi(lambda_j)^2 h^rank)^{1/2}`.
    pub fn spectral_norm(&self, coeffs: &[C64], s: f64) -> f64 {
        coeffs.iter()
            .zip(&self.omega)
            .zip(&self.measure)
            .map(|((g, w), m)| w.powf(2.0 * s) * m * g.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// `||(-Delta)^{s/2} f||_2` computed on the spectral side.
    pub fn sobolev_norm(&self, f: &RadialFunction, s: f64) -> Result<f64> {
        let g = self.transform(f)?;
        self.resolved("the function", &g)?;
        Ok(self.spectral_norm(&g, s))
    }

    /// `||u_t||_2^2 + ||(-Delta)^{1/2} u||_2^2`.
    pub fn energy(&self, state: &WaveState) -> Result<f64> {
        let u = self.transform(&state.u)?;
        let v = self.transform(&state.ut)?;
        Ok(self.spectral_norm(&v, 0.0).powi(2) + self.spectral_norm(&u, 1.0).powi(2))
    }

    /// Free evolution of spectral data by `t`.
    fn free_spectral(&self, u: &[C64], v: &[C64], t: f64) -> (Vec<C64>, Vec<C64>) {
        u.iter()
            .zip(v)
            .zip(&self.omega)
            .map(|((a, b), w)| {
                let (s, c) = (w * t).sin_cos();
                (a * c + b * (s / w), -a * (w * s) + b * c)
            })
            .unzip()
    }

    /// Solution at time `state.time + t` of `u_tt - Delta u = F` with the
    /// given forcing (trapezoid rule in time for the Duhamel integral).
    pub fn propagate(&self, state: &WaveState, forcing: Option<&Forcing>, t: f64) -> Result<WaveState> {
        if !t.is_finite() {
            return Err(Error::Domain(format!("time step must be finite, got {t}")));
        }
        if t == 0.0 {
            self.check_grid(&state.u)?;
            self.check_grid(&state.ut)?;
            return Ok(state.clone());
        }
        let u0 = self.transform(&state.u)?;
        let v0 = self.transform(&state.ut)?;
        self.check_grid(&state.ut)?;
        self.resolved("u", &u0)?;
        self.resolved("u_t", &v0)?;
        let (mut u, mut v) = self.free_spectral(&u0, &v0, t);
        if let Some(f) = forcing {
            let (du, dv) = self.duhamel(state.time, f, t)?;
            for j in 0..u.len() {
                u[j] += du[j];
                v[j] += dv[j];
            }
        }
        WaveState::new(self.synthesize(&u)?, self.synthesize(&v)?, state.time + t)
    }

    fn duhamel(&self, t0: f64, f: &Forcing, t: f64) -> Result<(Vec<C64>, Vec<C64>)> {
        let ns = self.spectral.len();
        if t == 0.0 {
            return Ok((vec![C64::from(0.0); ns], vec![C64::from(0.0); ns]));
        }
        if !(f.dt > 0.0) {
            return Err(Error::Config(format!("forcing step must be positive, got {}", f.dt)));
        }
        let steps = (t.abs() / f.dt).round();
        if (steps * f.dt - t.abs()).abs() > 1e-9 * t.abs().max(1.0) {
            return Err(Error::Config(format!(
                "elapsed time {t} is not a multiple of the forcing step {}",
                f.dt
            )));
        }
        let steps = steps as usize;
        let sign = t.signum();
        let node = |m: usize| t0 + sign * m as f64 * f.dt;
        let index = |s: f64| -> Result<usize> {
            let k = ((s - f.start) / f.dt).round();
            if k < 0.0 || k as usize >= f.values.len() || (f.start + k * f.dt - s).abs() > 1e-9 * f.dt {
                return Err(Error::Config(format!("forcing is not sampled at time {s}")));
            }
            Ok(k as usize)
        };
        let (mut du, mut dv) = (vec![C64::from(0.0); ns], vec![C64::from(0.0); ns]);
        let t1 = t0 + t;
        for m in 0..=steps {
            let s = node(m);
            let fm = &f.values[index(s)?];
            self.check_grid(fm)?;
            let g = self.forward_raw(&fm.values);
            let weight = if m == 0 || m == steps { 0.5 } else { 1.0 } * sign * f.dt;
            for j in 0..ns {
                let w = self.omega[j];
                let (sn, cs) = (w * (t1 - s)).sin_cos();
                du[j] += g[j] * (weight * sn / w);
                dv[j] += g[j] * (weight * cs);
            }
        }
        Ok((du, dv))
    }
}

/// Controls for [`semilinear_solve`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SemilinearOptions {
    /// Power `gamma` in `F(u) = mu |u|^{gamma-1} u`.
    pub gamma: f64,
    /// Sign `mu = +-1` (any finite value is accepted).
    pub mu: f64,
    pub t_final: f64,
    /// Number of time steps; the default keeps `omega_max * dt < pi/8`.
    pub steps: Option<usize>,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl SemilinearOptions {
    pub fn new(gamma: f64, t_final: f64) -> Self {
        Self {
            gamma,
            mu: 1.0,
            t_final,
            steps: None,
            max_iterations: 50,
            tolerance: 1e-8,
        }
    }
}

/// Iterates on the time mesh returned by [`semilinear_solve`].
#[derive(Debug, Clone)]
pub struct SemilinearSolution {
    pub times: Vec<f64>,
    pub states: Vec<WaveState>,
    /// `max_n sup_H |u^{k+1}(t_n) - u^k(t_n)|` for every completed iteration.
    pub residuals: Vec<f64>,
    /// `||u_t||^2 + ||(-Delta)^{1/2} u||^2` along the final iterate.
    pub energies: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl SemilinearSolution {
    /// Successive residual ratios `r_{k+1} / r_k`.
    pub fn contraction_ratios(&self) -> Vec<f64> {
        self.residuals.windows(2).map(|w| w[1] / w[0]).collect()
    }
}

/// Fewest time steps on `[0, t_final]` keeping the largest phase advance
/// per step below `pi/8`.
pub fn minimum_steps(prop: &Propagator, t_final: f64) -> usize {
    ((prop.omega_max() * t_final.abs()) / (std::f64::consts::PI / 8.0)).floor() as usize + 1
}

/// Picard iteration for `u_tt - Delta u = mu |u|^{gamma-1} u` on
/// `[t0, t0 + t_final]`, starting from the free solution.
///
/// Stops once successive iterates agree to `tolerance` in sup norm or after
/// `max_iterations`; five consecutive residual increases count as divergence.
pub fn semilinear_solve(
    prop: &Propagator,
    state0: &WaveState,
    opts: &SemilinearOptions,
) -> Result<SemilinearSolution> {
    if !(opts.gamma > 1.0 && opts.gamma.is_finite()) {
        return Err(Error::Domain(format!("the power must exceed 1, got {}", opts.gamma)));
    }
    if !(opts.t_final > 0.0 && opts.t_final.is_finite()) {
        return Err(Error::Domain(format!("final time must be positive, got {}", opts.t_final)));
    }
    if !opts.mu.is_finite() || !(opts.tolerance > 0.0) {
        return Err(Error::Config("mu must be finite and the tolerance positive".into()));
    }
    let min_steps = minimum_steps(prop, opts.t_final);
    let steps = opts.steps.unwrap_or(min_steps);
    if steps < min_steps {
        return Err(Error::Config(format!(
            "{steps} time steps advance the phase by more than pi/8; need at least {min_steps}"
        )));
    }
    let u0 = prop.transform(&state0.u)?;
    let v0 = prop.transform(&state0.ut)?;
    prop.check_grid(&state0.ut)?;
    prop.resolved("u", &u0)?;
    prop.resolved("u_t", &v0)?;
    let data_norm = state0.u.sup_norm().max(state0.ut.sup_norm());

    let ns = prop.spectral.len();
    let dt = opts.t_final / steps as f64;
    let rel: Vec<f64> = (0..=steps).map(|n| n as f64 * dt).collect();
    let free: Vec<(Vec<C64>, Vec<C64>)> = rel.iter().map(|&t| prop.free_spectral(&u0, &v0, t)).collect();
    let mut uhat: Vec<Vec<C64>> = free.iter().map(|(u, _)| u.clone()).collect();
    let mut vhat: Vec<Vec<C64>> = free.iter().map(|(_, v)| v.clone()).collect();
    let mut phys: Vec<Vec<C64>> = uhat.par_iter().map(|g| prop.inverse_raw(g)).collect();

    let power = opts.gamma - 1.0;
    let mut residuals = Vec::new();
    let mut growth = 0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        let forcing: Vec<Vec<C64>> = phys
            .par_iter()
            .map(|u| {
                let f: Vec<C64> = u.iter().map(|z| z * (opts.mu * z.norm().powf(power))).collect();
                prop.forward_raw(&f)
            })
            .collect();
        // sin(w(t-s)) = sin(wt)cos(ws) - cos(wt)sin(ws); running trapezoid sums
        let mut cum_c = vec![C64::from(0.0); ns];
        let mut cum_s = vec![C64::from(0.0); ns];
        for n in 0..=steps {
            for j in 0..ns {
                let w = prop.omega[j];
                let (sn, cs) = (w * rel[n]).sin_cos();
                let g = forcing[n][j];
                let (end_c, end_s) = (g * (0.5 * dt * cs), g * (0.5 * dt * sn));
                let (a, b) = if n == 0 {
                    (C64::from(0.0), C64::from(0.0))
                } else {
                    (cum_c[j] + end_c, cum_s[j] + end_s)
                };
                uhat[n][j] = free[n].0[j] + (a * sn - b * cs) / w;
                vhat[n][j] = free[n].1[j] + a * cs + b * sn;
                cum_c[j] += if n == 0 { end_c } else { end_c * 2.0 };
                cum_s[j] += if n == 0 { end_s } else { end_s * 2.0 };
            }
        }
        let next: Vec<Vec<C64>> = uhat.par_iter().map(|g| prop.inverse_raw(g)).collect();
        let residual = next
            .iter()
            .zip(&phys)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max);
        phys = next;
        iterations += 1;
        if !residual.is_finite() {
            return Err(Error::Divergence { iterations, data_norm });
        }
        if residuals.last().is_some_and(|&r| residual > r) {
            growth += 1;
            if growth >= 5 {
                return Err(Error::Divergence { iterations, data_norm });
            }
        } else {
            growth = 0;
        }
        residuals.push(residual);
        if residual < opts.tolerance {
            converged = true;
            break;
        }
    }

    let energies = uhat
        .iter()
        .zip(&vhat)
        .map(|(u, v)| prop.spectral_norm(v, 0.0).powi(2) + prop.spectral_norm(u, 1.0).powi(2))
        .collect();
    let times: Vec<f64> = rel.iter().map(|t| state0.time + t).collect();
    let states = times
        .iter()
        .zip(phys)
        .zip(&vhat)
        .map(|((&t, u), v)| {
            WaveState::new(
                RadialFunction::new(prop.radial.clone(), u)?,
                prop.synthesize(v)?,
                t,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SemilinearSolution {
        times,
        states,
        residuals,
        energies,
        iterations,
        converged,
    })
}

/// Gaussian Cauchy data `u = amplitude * exp(-|H|^2 / width^2)`, `u_t = 0`.
pub fn gaussian_data(grid: &RadialGrid, width: f64, amplitude: f64) -> Result<WaveState> {
    if !(width > 0.0 && amplitude.is_finite()) {
        return Err(Error::Domain(format!(
            "gaussian data needs a positive width and finite amplitude, got {width}, {amplitude}"
        )));
    }
    let u = grid.sample(|h| {
        C64::from(amplitude * (-h.iter().map(|x| x * x).sum::<f64>() / (width * width)).exp())
    });
    WaveState::new(u, RadialFunction::zeros(grid), 0.0)
}

/// `(||u||_{H^s}^2 + ||u_t||_{H^{s-1}}^2)^{1/2}` with `H^s` normed by `(-Delta)^{s/2}`.
pub fn data_norm(prop: &Propagator, state: &WaveState, s: f64) -> Result<f64> {
    let a = prop.sobolev_norm(&state.u, s)?;
    let b = prop.sobolev_norm(&state.ut, s - 1.0)?;
    Ok((a * a + b * b).sqrt())
}

/// Rescales Cauchy data so that [`data_norm`] of order `s` equals `delta`.
pub fn scale_to_size(prop: &Propagator, state: &WaveState, s: f64, delta: f64) -> Result<WaveState> {
    let n = data_norm(prop, state, s)?;
    if !(n > 0.0) {
        return Err(Error::Data("cannot rescale zero data".into()));
    }
    let k = delta / n;
    let scale = |f: &RadialFunction| RadialFunction::new(f.grid.clone(), f.values.iter().map(|v| v * k).collect());
    WaveState::new(scale(&state.u)?, scale(&state.ut)?, state.time)
}

/// `L^p_t L^q_x` norm of a sampled trajectory: trapezoid rule in time and the
/// Cartan-coordinate integral `int_{a+} delta |u|^q` in space.
pub fn lp_lq_norm(times: &[f64], states: &[WaveState], p: f64, q: f64) -> Result<f64> {
    if times.len() != states.len() || times.is_empty() {
        return Err(Error::Data("need one state per time and at least one state".into()));
    }
    if !(p >= 1.0 && q >= 1.0) {
        return Err(Error::Domain(format!("exponents must be at least 1, got p = {p}, q = {q}")));
    }
    let space = states
        .iter()
        .map(|s| {
            if q.is_infinite() {
                return Ok(s.u.sup_norm());
            }
            let rs = s.u.grid.root_system();
            let grid = &s.u.grid;
            let v = crate::geometry::chamber_integral(grid, "L^q norm", |i| {
                let a = s.u.values[i].norm();
                if a == 0.0 {
                    C64::from(0.0)
                } else {
                    C64::from(density_delta(rs, grid.node(i)) * a.powf(q))
                }
            })?;
            Ok(v.re.powf(1.0 / q))
        })
        .collect::<Result<Vec<f64>>>()?;
    if p.is_infinite() {
        return Ok(space.iter().cloned().fold(0.0, f64::max));
    }
    let mut total = 0.0;
    for k in 1..times.len() {
        total += 0.5 * (times[k] - times[k - 1]) * (space[k].powf(p) + space[k - 1].powf(p));
    }
    Ok(total.powf(1.0 / p))
}
