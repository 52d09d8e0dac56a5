//! Decay and dispersive diagnostics for the wave kernels: weighted sup norms
//! over chamber grids, log-log slope fits, the Kunze-Stein functional and the
//! stationary point of the phase.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::geometry::{chamber_integral, density_delta, phi0, RadialFunction, RadialGrid};
use crate::root_system::{dot, norm, RootSystem};
use crate::wave_kernel::{kernel_constant, radial_integral, regularization_factor, KernelParams, Piece};
use crate::{Error, Result};

/// Nodes with `||H| - |t|| <= CONE_EXCLUSION |t|` are skipped: the kernel
/// integral does not converge exactly on the light cone.
pub const CONE_EXCLUSION: f64 = 1e-9;

/// Kernel pieces entering the diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelPart {
    /// `omega^{sigma,0}`.
    Low,
    /// `e^{sigma^2} / Gamma((d+1)/2 - sigma) omega^{sigma,inf}`.
    HighReg,
    /// `omega^{sigma,0} + omega^{sigma,inf}`.
    Total,
}

impl std::str::FromStr for KernelPart {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low" => Ok(Self::Low),
            "high_reg" => Ok(Self::HighReg),
            "total" => Ok(Self::Total),
            other => Err(Error::Config(format!("unknown kernel piece '{other}'"))),
        }
    }
}

/// Weight dividing the kernel in a sup norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Weight {
    /// `(1 + |H|)^N e^{-<rho, H>}`.
    Envelope,
    /// `(1 + |H|)^N phi0(H)`.
    Phi0,
    /// `(1 + |H|)^N`.
    Unit,
}

/// Part of the chamber over which a sup is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    All,
    /// `|H| <= |t| / 2`.
    Interior,
}

/// Lattice points `h k`, `k` integer, in the closed positive chamber with
/// `|H| <= radius`.
#[derive(Debug, Clone)]
pub struct ChamberGrid {
    rs: RootSystem,
    radius: f64,
    spacing: f64,
    nodes: Vec<Vec<f64>>,
}

impl ChamberGrid {
    /// `points` lattice points along a radius, endpoints included.
    pub fn new(rs: &RootSystem, radius: f64, points: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || points < 2 {
            return Err(Error::Config(format!(
                "chamber grid needs a positive radius and at least 2 points, got {radius} and {points}"
            )));
        }
        let m = points as i64 - 1;
        let l = rs.rank();
        let total = (2 * m + 1).checked_pow(l as u32).unwrap_or(u64::MAX as i64) as u64;
        if total > 50_000_000 {
            return Err(Error::TooLarge {
                what: "chamber grid".into(),
                cap: 50_000_000,
            });
        }
        let spacing = radius / m as f64;
        let mut nodes = Vec::new();
        let mut idx = vec![-m; l];
        loop {
            let h: Vec<f64> = idx.iter().map(|&k| k as f64 * spacing).collect();
            if norm(&h) <= radius * (1.0 + 1e-12) && rs.in_closed_chamber(&h, 1e-12) {
                nodes.push(h);
            }
            let mut a = l;
            loop {
                if a == 0 {
                    return Ok(Self {
                        rs: rs.clone(),
                        radius,
                        spacing,
                        nodes,
                    });
                }
                a -= 1;
                if idx[a] < m {
                    idx[a] += 1;
                    break;
                }
                idx[a] = -m;
            }
        }
    }

    /// Box `|H| <= max(4, 2|t|)` with 65 points per radius in rank one and 49
    /// otherwise, plus 17 points per radius on `|H| <= 2|t|` so that the
    /// light cone is resolved for small `t`.
    pub fn for_time(rs: &RootSystem, t: f64) -> Result<Self> {
        let points = if rs.rank() == 1 { 65 } else { 49 };
        let mut grid = Self::new(rs, 4f64.max(2.0 * t.abs()), points)?;
        if 2.0 * t.abs() < grid.radius {
            let inner = Self::new(rs, 2.0 * t.abs(), 17)?;
            grid.nodes.extend(inner.nodes);
        }
        Ok(grid)
    }

    pub fn root_system(&self) -> &RootSystem {
        &self.rs
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Radial factor of a kernel piece: `kernel(H) = profile(|H|) phi0(H)`.
fn profile(rs: &RootSystem, p: &KernelParams, part: KernelPart, s: f64) -> Result<C64> {
    let k = kernel_constant(rs);
    Ok(match part {
        KernelPart::Low => radial_integral(rs, p, Piece::Low, s)? * k,
        KernelPart::HighReg => radial_integral(rs, p, Piece::High, s)? * (regularization_factor(rs, p.sigma)? * k),
        KernelPart::Total => {
            (radial_integral(rs, p, Piece::Low, s)? + radial_integral(rs, p, Piece::High, s)?) * k
        }
    })
}

fn on_cone(t: f64, s: f64) -> bool {
    (s - t.abs()).abs() <= CONE_EXCLUSION * t.abs()
}

/// Profiles at the distinct radii of `points`, in parallel; `None` on the
/// light cone.
fn profiles<'a>(
    rs: &RootSystem,
    p: &KernelParams,
    part: KernelPart,
    points: impl Iterator<Item = &'a [f64]>,
) -> Result<(Vec<f64>, Vec<Option<C64>>)> {
    let mut radii: Vec<f64> = points.map(norm).collect();
    radii.sort_by(f64::total_cmp);
    radii.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * b.abs().max(1.0));
    let values = radii
        .par_iter()
        .map(|&s| {
            if on_cone(p.t, s) {
                Ok(None)
            } else {
                profile(rs, p, part, s).map(Some)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((radii, values))
}

fn lookup(radii: &[f64], values: &[Option<C64>], s: f64) -> Option<C64> {
    let i = radii.partition_point(|&r| r < s - 1e-13 * s.max(1.0));
    values[i.min(values.len() - 1)]
}

/// Maximizer of a weighted sup.
#[derive(Debug, Clone, Serialize)]
pub struct SupValue {
    pub value: f64,
    pub argmax: Vec<f64>,
    /// Grid nodes skipped on the light cone.
    pub excluded: usize,
}

/// `max |kernel part| / ((1 + |H|)^N w(H))` over the grid nodes in `region`.
pub fn sup_weighted_with(
    rs: &RootSystem,
    p: &KernelParams,
    part: KernelPart,
    n: f64,
    weight: Weight,
    region: Region,
    grid: &ChamberGrid,
) -> Result<SupValue> {
    let keep = |h: &[f64]| region == Region::All || norm(h) <= 0.5 * p.t.abs() * (1.0 + 1e-12);
    let nodes: Vec<&[f64]> = grid.nodes().iter().map(|h| h.as_slice()).filter(|h| keep(h)).collect();
    let (radii, values) = profiles(rs, p, part, nodes.iter().copied())?;
    let mut best = SupValue {
        value: 0.0,
        argmax: vec![0.0; rs.rank()],
        excluded: 0,
    };
    for h in nodes {
        let Some(v) = lookup(&radii, &values, norm(h)) else {
            best.excluded += 1;
            continue;
        };
        // phi0 / e^{-<rho,H>} stays finite where each factor underflows
        let ratio = match weight {
            Weight::Envelope => {
                let g: f64 = rs
                    .positive_roots()
                    .iter()
                    .map(|a| {
                        let x = dot(a, h);
                        if x < 1e-8 { 1.0 + x } else { 2.0 * x / (1.0 - (-2.0 * x).exp()) }
                    })
                    .product();
                v.norm() * g / (1.0 + norm(h)).powf(n)
            }
            Weight::Phi0 => v.norm() / (1.0 + norm(h)).powf(n),
            Weight::Unit => v.norm() * phi0(rs, h) / (1.0 + norm(h)).powf(n),
        };
        if ratio > best.value {
            best.value = ratio;
            best.argmax = h.to_vec();
        }
    }
    Ok(best)
}

/// `max |kernel part| / phi0_envelope(H, N)` over the whole grid.
pub fn sup_weighted(rs: &RootSystem, p: &KernelParams, part: KernelPart, n: f64, grid: &ChamberGrid) -> Result<f64> {
    sup_weighted_with(rs, p, part, n, Weight::Envelope, Region::All, grid).map(|s| s.value)
}

/// Samples of a kernel part on a radial grid; light-cone nodes are set to zero
/// and counted.
pub fn kernel_samples(
    rs: &RootSystem,
    p: &KernelParams,
    part: KernelPart,
    grid: &RadialGrid,
) -> Result<(RadialFunction, usize)> {
    let (radii, values) = profiles(rs, p, part, grid.nodes())?;
    let mut excluded = 0;
    let samples = grid
        .nodes()
        .map(|h| match lookup(&radii, &values, norm(h)) {
            Some(v) => v * phi0(rs, h),
            None => {
                excluded += 1;
                C64::from(0.0)
            }
        })
        .collect();
    Ok((RadialFunction::new(grid.clone(), samples)?, excluded))
}

/// Kernel part at each node, `None` on the light cone.
pub fn kernel_on_nodes(rs: &RootSystem, p: &KernelParams, part: KernelPart, nodes: &[Vec<f64>]) -> Result<Vec<Option<C64>>> {
    let (radii, values) = profiles(rs, p, part, nodes.iter().map(|h| h.as_slice()))?;
    Ok(nodes
        .iter()
        .map(|h| lookup(&radii, &values, norm(h)).map(|v| v * phi0(rs, h)))
        .collect())
}

/// `(int_{a+} delta phi0 |kappa|^{q/2})^{2/q}`, or `sup |kappa|` for `q = inf`.
pub fn kunze_stein_bound(kernel: &RadialFunction, q: f64) -> Result<f64> {
    if !(q >= 2.0) {
        return Err(Error::Domain(format!("Kunze-Stein exponent must satisfy q >= 2, got {q}")));
    }
    if q.is_infinite() {
        return Ok(kernel.sup_norm());
    }
    let grid = &kernel.grid;
    let rs = grid.root_system();
    let total = chamber_integral(grid, "Kunze-Stein integral", |i| {
        let v = kernel.values[i].norm();
        if v == 0.0 {
            return C64::from(0.0);
        }
        let h = grid.node(i);
        C64::from(density_delta(rs, h) * phi0(rs, h) * v.powf(0.5 * q))
    })?;
    Ok(total.re.powf(2.0 / q))
}

/// `psi(lambda) = sqrt(|lambda|^2 + |rho|^2) + <A/t, lambda>`.
pub fn phase(rs: &RootSystem, a: &[f64], t: f64, lambda: &[f64]) -> f64 {
    let rho = rs.rho_norm();
    (dot(lambda, lambda) + rho * rho).sqrt() + dot(a, lambda) / t
}

/// Stationary point of [`phase`]: `-|rho| (A/t) (1 - |A/t|^2)^{-1/2}`.
pub fn critical_point(rs: &RootSystem, a: &[f64], t: f64) -> Result<Vec<f64>> {
    if a.len() != rs.rank() {
        return Err(Error::Domain(format!("A has {} coordinates, rank is {}", a.len(), rs.rank())));
    }
    if !(t.is_finite() && t != 0.0) {
        return Err(Error::Domain(format!("time must be nonzero and finite, got {t}")));
    }
    let ratio = norm(a) / t.abs();
    if !(ratio < 1.0) {
        return Err(Error::NoCriticalPoint { ratio });
    }
    let c = -rs.rho_norm() / (t * (1.0 - ratio * ratio).sqrt());
    Ok(a.iter().map(|x| c * x).collect())
}

/// Hessian of [`phase`], `(I - lambda lambda^T / E^2) / E`, row-major.
pub fn phase_hessian(rs: &RootSystem, lambda: &[f64]) -> Vec<f64> {
    let l = lambda.len();
    let rho = rs.rho_norm();
    let e2 = dot(lambda, lambda) + rho * rho;
    let e = e2.sqrt();
    let mut m = vec![0.0; l * l];
    for i in 0..l {
        for j in 0..l {
            let id = if i == j { 1.0 } else { 0.0 };
            m[i * l + j] = (id - lambda[i] * lambda[j] / e2) / e;
        }
    }
    m
}

/// Time regime of a decay fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    SmallTime,
    LargeTime,
}

impl Regime {
    /// Kernel decay exponent: `-(d-1)/2` for small and `-d/2` for large times.
    pub fn kernel_slope(self, dim: usize) -> f64 {
        match self {
            Regime::SmallTime => -0.5 * (dim as f64 - 1.0),
            Regime::LargeTime => -0.5 * dim as f64,
        }
    }
}

/// Log-log fit of a sup sweep.
#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub regime: Regime,
    pub times: Vec<f64>,
    pub sup_ratios: Vec<f64>,
    pub fitted_slope: f64,
    pub theoretical_slope: f64,
    pub r_squared: f64,
}

impl DecayReport {
    /// CSV with columns `t,sup_ratio`.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "t,sup_ratio")?;
        for (t, r) in self.times.iter().zip(&self.sup_ratios) {
            writeln!(out, "{t:.17e},{r:.17e}")?;
        }
        Ok(())
    }
}

/// Least-squares slope of `log ratio` against `log t`; `theoretical_slope` is
/// the kernel exponent of the regime in dimension `dim`.
pub fn fit_decay(regime: Regime, dim: usize, times: &[f64], sup_ratios: &[f64]) -> Result<DecayReport> {
    if times.len() != sup_ratios.len() {
        return Err(Error::Data(format!(
            "{} times but {} ratios",
            times.len(),
            sup_ratios.len()
        )));
    }
    if times.len() < 3 {
        return Err(Error::Data("a decay fit needs at least 3 samples".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) || !(times[0] > 0.0) {
        return Err(Error::Data("times must be positive and strictly increasing".into()));
    }
    if let Some(r) = sup_ratios.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return Err(Error::Data(format!("sup ratios must be positive and finite, got {r}")));
    }
    let decades = (times[times.len() - 1] / times[0]).log10();
    if (times.len() - 1) as f64 / decades < 6.0 - 1e-9 {
        return Err(Error::Data(format!(
            "{} samples over {decades:.2} decades; at least 6 per decade are needed",
            times.len()
        )));
    }
    let x: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let y: Vec<f64> = sup_ratios.iter().map(|r| r.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(DecayReport {
        regime,
        times: times.to_vec(),
        sup_ratios: sup_ratios.to_vec(),
        fitted_slope: slope,
        theoretical_slope: regime.kernel_slope(dim),
        r_squared,
    })
}

/// `n` log-spaced times from `a` to `b`.
pub fn log_times(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            if k + 1 == n {
                b
            } else {
                a * (b / a).powf(k as f64 / (n - 1) as f64)
            }
        })
        .collect()
}

/// Default small-time window: 12 points in `[0.05, 0.8]`.
pub fn small_time_window() -> Vec<f64> {
    log_times(0.05, 0.8, 12)
}

/// Default large-time window: 10 points in `[2, t_max]`.
pub fn large_time_window(t_max: f64) -> Vec<f64> {
    log_times(2.0, t_max, 10)
}

/// Sup sweep of the regime's kernel bound.
///
/// Small times: `|omega~^{sigma,inf}| / ((1+|H|)^n e^{-<rho,H>})` over the
/// grid, `n` the number of positive roots (the smallest power for which the
/// envelope dominates `phi0`).
/// Large times: `|omega^sigma| / ((1+|H|)^{(d-l)/2} phi0)` on `|H| <= t/2`.
pub fn kernel_decay(rs: &RootSystem, template: &KernelParams, regime: Regime, times: &[f64]) -> Result<DecayReport> {
    let ratios = times
        .iter()
        .map(|&t| {
            let mut p = template.clone();
            p.t = t;
            p.validate(rs)?;
            let grid = ChamberGrid::for_time(rs, t)?;
            let sup = match regime {
                Regime::SmallTime => {
                    let n = rs.num_positive_roots() as f64;
                    sup_weighted_with(rs, &p, KernelPart::HighReg, n, Weight::Envelope, Region::All, &grid)?
                }
                Regime::LargeTime => {
                    let n = 0.5 * (rs.dim_x() - rs.rank()) as f64;
                    sup_weighted_with(rs, &p, KernelPart::Total, n, Weight::Phi0, Region::Interior, &grid)?
                }
            };
            Ok(sup.value)
        })
        .collect::<Result<Vec<_>>>()?;
    fit_decay(regime, rs.dim_x(), times, &ratios)
}

/// Radial grid on which the Kunze-Stein integrand of exponent `q` has
/// negligible tail: `delta phi0 |kappa|^{q/2}` decays like
/// `e^{-(q/2 - 1)<rho, H>}`.
pub fn kunze_stein_grid(rs: &RootSystem, q: f64) -> Result<RadialGrid> {
    if !(q > 2.0) || q.is_infinite() {
        return Err(Error::Domain(format!("Kunze-Stein grid needs 2 < q < inf, got {q}")));
    }
    let rate = (0.5 * q - 1.0) * rs.rho_norm() / (rs.rank() as f64).sqrt();
    let radius = 40.0 / rate + 1.0;
    let h = if rs.rank() == 1 { 0.1 } else { 0.2 };
    RadialGrid::with_spacing(rs, radius, h)
}

/// One time of a dispersive report.
#[derive(Debug, Clone, Serialize)]
pub struct DispersiveRow {
    pub t: f64,
    /// Kunze-Stein functional of `omega_t^{sigma,0}`.
    pub ks_low: f64,
    /// `sup |omega~_t^{s,inf}|` at `Re s = (d+1)/2`.
    pub sup_high: f64,
    /// `sup_high^{1 - 2/q}`: the interpolated high-frequency bound.
    pub interpolated_high: f64,
    /// `ks_low + interpolated_high`.
    pub bound: f64,
}

/// Dispersive bound functionals for `sigma = (d+1)(1/2 - 1/q)` over small and
/// large times.
#[derive(Debug, Clone, Serialize)]
pub struct DispersiveReport {
    pub q: f64,
    pub sigma: f64,
    pub small: Vec<DispersiveRow>,
    pub large: Vec<DispersiveRow>,
    /// Fit of `interpolated_high` against `-(d-1)(1/2 - 1/q)`.
    pub small_fit: Option<DecayReport>,
    /// Fit of `bound` against `-d/2`.
    pub large_fit: Option<DecayReport>,
    /// Fitted small-time slope within 0.15 of the predicted one or steeper.
    pub small_verified: Option<bool>,
    /// Fitted large-time slope within 0.2 of `-d/2` or steeper.
    pub large_verified: Option<bool>,
}

impl DispersiveReport {
    /// CSV with columns `regime,t,ks_low,sup_high,interpolated_high,bound`.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "regime,t,ks_low,sup_high,interpolated_high,bound")?;
        for (name, rows) in [("small_time", &self.small), ("large_time", &self.large)] {
            for r in rows {
                writeln!(
                    out,
                    "{name},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                    r.t, r.ks_low, r.sup_high, r.interpolated_high, r.bound
                )?;
            }
        }
        Ok(())
    }
}

fn dispersive_row(rs: &RootSystem, q: f64, sigma: f64, high: &KernelParams, grid: &RadialGrid, t: f64) -> Result<DispersiveRow> {
    let low = KernelParams::new(rs, t, C64::from(sigma))?;
    let (samples, _) = kernel_samples(rs, &low, KernelPart::Low, grid)?;
    let ks_low = kunze_stein_bound(&samples, q)?;
    let mut hp = high.clone();
    hp.t = t;
    let chamber = ChamberGrid::for_time(rs, t)?;
    let sup_high = sup_weighted_with(rs, &hp, KernelPart::HighReg, 0.0, Weight::Unit, Region::All, &chamber)?.value;
    let interpolated_high = sup_high.powf(1.0 - 2.0 / q);
    Ok(DispersiveRow {
        t,
        ks_low,
        sup_high,
        interpolated_high,
        bound: ks_low + interpolated_high,
    })
}

/// Bound functionals of the dispersive estimates; `high_sigma` is the
/// exponent of the high-frequency endpoint, with real part `(d+1)/2`.
pub fn dispersive_report(
    rs: &RootSystem,
    q: f64,
    high_sigma: C64,
    small_times: &[f64],
    large_times: &[f64],
) -> Result<DispersiveReport> {
    if !(q > 2.0 && q.is_finite()) {
        return Err(Error::Domain(format!("dispersive estimates need 2 < q < inf, got {q}")));
    }
    let d = rs.dim_x() as f64;
    let sigma = (d + 1.0) * (0.5 - 1.0 / q);
    let high = KernelParams::new(rs, 1.0, high_sigma)?;
    let grid = kunze_stein_grid(rs, q)?;
    let rows = |times: &[f64]| -> Result<Vec<DispersiveRow>> {
        times.iter().map(|&t| dispersive_row(rs, q, sigma, &high, &grid, t)).collect()
    };
    let small = rows(small_times)?;
    let large = rows(large_times)?;
    let dim = rs.dim_x();
    let small_fit = if small.is_empty() {
        None
    } else {
        let ratios: Vec<f64> = small.iter().map(|r| r.interpolated_high).collect();
        let mut fit = fit_decay(Regime::SmallTime, dim, small_times, &ratios)?;
        fit.theoretical_slope = -(d - 1.0) * (0.5 - 1.0 / q);
        Some(fit)
    };
    let large_fit = if large.is_empty() {
        None
    } else {
        let ratios: Vec<f64> = large.iter().map(|r| r.bound).collect();
        Some(fit_decay(Regime::LargeTime, dim, large_times, &ratios)?)
    };
    Ok(DispersiveReport {
        q,
        sigma,
        small_verified: small_fit.as_ref().map(|f| f.fitted_slope <= f.theoretical_slope + 0.15),
        large_verified: large_fit.as_ref().map(|f| f.fitted_slope <= f.theoretical_slope + 0.2),
        small,
        large,
        small_fit,
        large_fit,
    })
}
