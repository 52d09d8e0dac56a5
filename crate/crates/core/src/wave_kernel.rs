//! Wave kernels `D~^{-sigma} e^{it sqrt(-Delta)}` on `G/K` for complex `G`.
//!
//! For bi-invariant kernels the inverse spherical transform collapses to a
//! Euclidean radial Fourier integral in dimension `d`:
//! `omega(H) = phi0(H) * I(t, |H|)` with
//! `I(t, s) = int_0^inf chi(r/|rho|) (r^2 + rho~^2)^{-sigma/2} e^{it E(r)} S(r, s) dr`,
//! `E(r) = sqrt(r^2 + |rho|^2)` and `S` the shell integral.
//!
//! `[0, R]` is integrated with Gauss-Legendre panels (Filon panels on the
//! Hankel-split integrand once panels oscillate enough); `[R, inf)` by
//! rotating the contour into the half-plane where each piece decays.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::geometry::phi0;
use crate::quadrature::{filon, gl16, gl32};
use crate::root_system::{norm, RootSystem};
use crate::special::{
    bessel_j_scaled, bessel_j_scaled_series, hankel_amplitudes, hankel_split_threshold, recip_gamma,
};
use crate::{Error, Result};

pub use crate::special::bessel_j;

/// Relative size of the last contour panel above which the improper
/// integral is declared unconverged.
pub const KERNEL_TAIL_TOLERANCE: f64 = 1e-8;

/// Smallest `|t - s|` used as a decay rate on the light cone.
const KAPPA_FLOOR: f64 = 1e-10;

/// Largest `|z s|` at which the power series of `z^{-nu} J_nu(z)` is used on
/// a complex contour.
const COMPLEX_SERIES_LIMIT: f64 = 16.0;

/// Smooth step used to build the cut-off pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mollifier {
    /// `psi(s) = int_s^1 b / int_0^1 b`, `b(u) = exp(-1/(u(1-u)))`.
    #[default]
    BumpIntegral,
    /// `psi(s) = f(1-s) / (f(1-s) + f(s))`, `f(u) = exp(-1/u)`.
    ExpQuotient,
}

impl std::str::FromStr for Mollifier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bump_integral" => Ok(Self::BumpIntegral),
            "exp_quotient" => Ok(Self::ExpQuotient),
            other => Err(Error::Config(format!("unknown mollifier '{other}'"))),
        }
    }
}

fn bump(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        0.0
    } else {
        (-1.0 / (u * (1.0 - u))).exp()
    }
}

fn bump_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| gl32().integrate_composite(0.0, 1.0, 16, bump))
}

/// Smooth step: 1 for `s <= 0`, 0 for `s >= 1`.
fn smooth_step(m: Mollifier, s: f64) -> f64 {
    if s <= 0.0 {
        return 1.0;
    }
    if s >= 1.0 {
        return 0.0;
    }
    match m {
        Mollifier::BumpIntegral => {
            let tail: f64 = gl32().integrate_composite(s, 1.0, 4, bump);
            (tail / bump_mass()).clamp(0.0, 1.0)
        }
        Mollifier::ExpQuotient => {
            let f = |u: f64| if u <= 0.0 { 0.0 } else { (-1.0 / u).exp() };
            let a = f(1.0 - s);
            a / (a + f(s))
        }
    }
}

/// `(chi_0(r), chi_inf(r))` for the default mollifier.
pub fn chi_pair(r: f64) -> (f64, f64) {
    chi_pair_with(Mollifier::default(), r)
}

/// Even cut-off pair with `chi_0 = 1` on `|r| <= 1`, `chi_inf = 1` on `|r| >= 2`.
pub fn chi_pair_with(m: Mollifier, r: f64) -> (f64, f64) {
    let low = smooth_step(m, r.abs() - 1.0);
    (low, 1.0 - low)
}

/// `int_{|lambda| = r} e^{-i<x, lambda>} d sigma(lambda)` in `R^d` with
/// `s = |x|`: `(2 pi)^{d/2} r^{d-1} (rs)^{-nu} J_nu(rs)`, `nu = (d-2)/2`.
pub fn shell_integral(rs: &RootSystem, r: f64, s: f64) -> f64 {
    let d = rs.dim_x() as f64;
    let nu = rs.bessel_order();
    (2.0 * PI).powf(0.5 * d) * r.powi(rs.dim_x() as i32 - 1) * bessel_j_scaled(nu, r * s)
}

/// Numerical controls of the radial integrals.
#[derive(Debug, Clone, Serialize)]
pub struct QuadratureControls {
    /// End of the real-axis segment; `None` picks it automatically.
    pub r_max: Option<f64>,
    /// Refinement level: panel widths scale like `64 / panels`.
    pub panels: usize,
    /// Oscillations per panel from which Filon panels are used.
    pub filon_threshold: f64,
    /// Dense real-axis quadrature with an integration-by-parts tail instead
    /// of Filon panels and contour rotation.
    pub oracle_mode: bool,
}

impl Default for QuadratureControls {
    fn default() -> Self {
        Self {
            r_max: None,
            panels: 64,
            filon_threshold: 2.0,
            oracle_mode: false,
        }
    }
}

/// Parameters of the operator `D~^{-sigma} e^{it sqrt(-Delta)}`.
#[derive(Debug, Clone, Serialize)]
pub struct KernelParams {
    pub t: f64,
    #[serde(serialize_with = "serialize_complex")]
    pub sigma: C64,
    pub rho_tilde: f64,
    pub mollifier: Mollifier,
    pub quad: QuadratureControls,
}

fn serialize_complex<S: serde::Serializer>(z: &C64, ser: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeStruct;
    let mut st = ser.serialize_struct("complex", 2)?;
    st.serialize_field("re", &z.re)?;
    st.serialize_field("im", &z.im)?;
    st.end()
}

/// Default exponent: the critical line `Re sigma = (d+1)/2`, shifted off the
/// real axis by `i` so that `1/Gamma((d+1)/2 - sigma)` does not vanish.
pub fn default_sigma(rs: &RootSystem) -> C64 {
    C64::new(0.5 * (rs.dim_x() as f64 + 1.0), 1.0)
}

impl KernelParams {
    /// Parameters with `rho~ = |rho|`, default mollifier and controls.
    pub fn new(rs: &RootSystem, t: f64, sigma: C64) -> Result<Self> {
        let p = Self {
            t,
            sigma,
            rho_tilde: rs.rho_norm(),
            mollifier: Mollifier::default(),
            quad: QuadratureControls::default(),
        };
        p.validate(rs)?;
        Ok(p)
    }

    pub fn validate(&self, rs: &RootSystem) -> Result<()> {
        if !(self.t.is_finite() && self.t != 0.0) {
            return Err(Error::Domain(format!("time must be nonzero and finite, got {}", self.t)));
        }
        if !(self.sigma.re.is_finite() && self.sigma.im.is_finite()) {
            return Err(Error::Domain("sigma must be finite".into()));
        }
        if !(self.rho_tilde >= rs.rho_norm() * (1.0 - 1e-12)) {
            return Err(Error::Domain(format!(
                "rho_tilde = {} must be at least |rho| = {}",
                self.rho_tilde,
                rs.rho_norm()
            )));
        }
        if self.quad.panels < 64 {
            return Err(Error::Config(format!(
                "quadrature panels must be at least 64, got {}",
                self.quad.panels
            )));
        }
        if !(self.quad.filon_threshold > 0.0) {
            return Err(Error::Config("filon_threshold must be positive".into()));
        }
        if let Some(r) = self.quad.r_max {
            let min = 4.0 * rs.rho_norm().max(1.0 / self.t.abs());
            if !(r >= min) {
                return Err(Error::Config(format!(
                    "r_max = {r} is below 4 max(|rho|, 1/|t|) = {min}"
                )));
            }
        }
        Ok(())
    }
}

/// Which part of the spectral half-line enters the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Piece {
    /// `chi_0(r/|rho|)` cut-off.
    Low,
    /// `chi_inf(r/|rho|)` cut-off, without the analytic-family factor.
    High,
    /// No cut-off.
    Full,
}

/// `e^{sigma^2} / Gamma((d+1)/2 - sigma)`; fails near the poles of Gamma.
pub fn regularization_factor(rs: &RootSystem, sigma: C64) -> Result<C64> {
    let z = C64::from(0.5 * (rs.dim_x() as f64 + 1.0)) - sigma;
    if z.im.abs() < 1e-8 && z.re < 0.5 && (z.re - z.re.round()).abs() < 1e-8 {
        return Err(Error::GammaPole { re: z.re, im: z.im });
    }
    Ok((sigma * sigma).exp() * recip_gamma(z))
}

/// Integrand of `I(t, s)` and its Hankel-split pieces, for `t > 0`.
struct Radial {
    dim: i32,
    nu: f64,
    rho: f64,
    rho_tilde2: f64,
    sigma: C64,
    t: f64,
    s: f64,
    piece: Piece,
    mollifier: Mollifier,
    shell_const: f64,
}

impl Radial {
    fn amplitude(&self, z: C64) -> C64 {
        (-(self.sigma * 0.5) * (z * z + self.rho_tilde2).ln()).exp()
    }

    fn energy(&self, z: C64) -> C64 {
        (z * z + self.rho * self.rho).sqrt()
    }

    fn cutoff(&self, r: f64) -> f64 {
        match self.piece {
            Piece::Full => 1.0,
            Piece::Low => chi_pair_with(self.mollifier, r / self.rho).0,
            Piece::High => chi_pair_with(self.mollifier, r / self.rho).1,
        }
    }

    fn real(&self, r: f64) -> C64 {
        let c = self.cutoff(r);
        if c == 0.0 {
            return C64::from(0.0);
        }
        let e = (r * r + self.rho * self.rho).sqrt();
        let shell = self.shell_const * r.powi(self.dim - 1) * bessel_j_scaled(self.nu, r * self.s);
        self.amplitude(C64::from(r)) * C64::from_polar(c * shell, self.t * e)
    }

    /// Off the real axis, where the cut-off is identically 1.
    fn complex(&self, z: C64) -> C64 {
        let shell = bessel_j_scaled_series(self.nu, z * self.s) * z.powi(self.dim - 1) * self.shell_const;
        self.amplitude(z) * shell * (C64::i() * self.t * self.energy(z)).exp()
    }

    /// Amplitude of the piece carrying `H1` (`sign = 1`) or `H2` (`sign = -1`)
    /// of `J = (H1 + H2)/2`.
    fn split_amplitude(&self, z: C64, sign: f64) -> C64 {
        let w = z * self.s;
        let (h1, h2) = hankel_amplitudes(self.nu, w);
        let h = if sign > 0.0 { h1 } else { h2 };
        let power = ((self.dim - 1) as f64 * z.ln() - self.nu * w.ln()).exp();
        self.amplitude(z) * power * h * (0.5 * self.shell_const)
    }

    fn split_phase(&self, z: C64, sign: f64) -> C64 {
        self.energy(z) * self.t + z * (sign * self.s)
    }

    fn split(&self, z: C64, sign: f64) -> C64 {
        self.split_amplitude(z, sign) * (C64::i() * self.split_phase(z, sign)).exp()
    }
}

/// Running sum with its absolute mass.
#[derive(Debug, Clone, Copy, Default)]
struct Sum {
    value: C64,
    mass: f64,
}

impl Sum {
    fn add(&mut self, v: C64) {
        self.value += v;
        self.mass += v.norm();
    }
}

/// Bookkeeping of one radial integral.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct RadialDiagnostics {
    /// End of the real-axis segment.
    pub r_split: f64,
    pub gauss_panels: usize,
    pub filon_panels: usize,
    pub contour_panels: usize,
    /// Largest relative size of a last contour panel, or of the
    /// integration-by-parts correction in oracle mode.
    pub tail_ratio: f64,
}

struct Integrator<'a> {
    f: &'a Radial,
    refine: f64,
    filon_threshold: f64,
    diag: RadialDiagnostics,
}

impl Integrator<'_> {
    /// Gauss-Legendre panels of at most `phase_step` radians over `[a, b]`.
    fn gauss(&mut self, a: f64, b: f64, phase_step: f64, sum: &mut Sum) {
        let f = self.f;
        let rate = (f.t + f.s).max(1e-300);
        let transition = f.piece != Piece::Full && b > f.rho && a < 2.0 * f.rho;
        let mut x = a;
        while x < b {
            let mut w = (phase_step / rate).min(0.25 * x.max(f.rho));
            if transition {
                w = w.min(f.rho / 16.0);
            }
            w *= self.refine;
            let mut hi = x + w;
            if hi > b || b - hi < 1e-3 * w {
                hi = b;
            }
            sum.add(gl16().integrate(x, hi, |r| f.real(r)));
            self.diag.gauss_panels += 1;
            x = hi;
        }
    }

    /// Filon panels on both Hankel pieces over `[a, b]`; panels with too few
    /// oscillations fall back to Gauss-Legendre on the full integrand.
    fn filon(&mut self, a: f64, b: f64, sum: &mut Sum) {
        let f = self.f;
        let mut x = a;
        while x < b {
            // curvature of the phase left after removing the secant
            let curvature = (f.t * f.rho * f.rho / x.powi(3)).max(1e-300);
            let w = (0.5 * x).min((8.0 / curvature).sqrt()) * self.refine;
            let mut hi = x + w;
            if hi > b || b - hi < 1e-3 * w {
                hi = b;
            }
            if (f.t + f.s) * (hi - x) / (2.0 * PI) < self.filon_threshold {
                self.gauss(x, hi, 3.0, sum);
            } else {
                for sign in [1.0, -1.0] {
                    let phase = |r: f64| f.split_phase(C64::from(r), sign).re;
                    let k = (phase(hi) - phase(x)) / (hi - x);
                    sum.add(filon().integrate(x, hi, k, |r| {
                        f.split_amplitude(C64::from(r), sign) * C64::from_polar(1.0, phase(r) - k * r)
                    }));
                }
                self.diag.filon_panels += 1;
            }
            x = hi;
        }
    }

    /// `int_r^inf g` along `z = r + i dir y`, where `g` decays like
    /// `e^{-kappa y}`; returns the size of the last panel.
    fn contour(&mut self, r: f64, dir: f64, kappa: f64, sum: &mut Sum, g: impl Fn(C64) -> C64) -> f64 {
        let kappa = kappa.max(KAPPA_FLOOR);
        let y_max = 40.0 / kappa;
        let mut w = 0.25 * r.min(1.0 / kappa) * self.refine;
        let mut y = 0.0;
        let mut last = 0.0;
        while y < y_max {
            let hi = (y + w).min(y_max);
            let v: C64 = gl16().integrate(y, hi, |u| g(C64::new(r, dir * u))) * C64::new(0.0, dir);
            sum.add(v);
            last = v.norm();
            self.diag.contour_panels += 1;
            y = hi;
            w *= 2.0;
        }
        last
    }

    /// Two-term integration by parts for `int_r^inf A e^{i Phi}`; returns the
    /// value and the size of the second term.
    fn by_parts(&self, r: f64, amp: impl Fn(f64) -> C64, phase: impl Fn(f64) -> f64, slope: impl Fn(f64) -> f64) -> (C64, f64) {
        let q = |x: f64| amp(x) / C64::new(0.0, slope(x));
        let h = 1e-2 * r;
        let dq = (q(r + h) - q(r - h)) / (2.0 * h);
        let second = dq / C64::new(0.0, slope(r));
        ((second - q(r)) * C64::from_polar(1.0, phase(r)), second.norm())
    }
}

/// `I(t, s)` for the chosen piece, with quadrature bookkeeping.
pub fn radial_integral_with_diagnostics(
    rs: &RootSystem,
    p: &KernelParams,
    piece: Piece,
    s: f64,
) -> Result<(C64, RadialDiagnostics)> {
    p.validate(rs)?;
    if !(s.is_finite() && s >= 0.0) {
        return Err(Error::Domain(format!("radius must be finite and nonnegative, got {s}")));
    }
    if p.t < 0.0 {
        let mut q = p.clone();
        q.t = -p.t;
        q.sigma = p.sigma.conj();
        let (v, d) = radial_integral_with_diagnostics(rs, &q, piece, s)?;
        return Ok((v.conj(), d));
    }
    let rho = rs.rho_norm();
    let nu = rs.bessel_order();
    let f = Radial {
        dim: rs.dim_x() as i32,
        nu,
        rho,
        rho_tilde2: p.rho_tilde * p.rho_tilde,
        sigma: p.sigma,
        t: p.t,
        s,
        piece,
        mollifier: p.mollifier,
        shell_const: (2.0 * PI).powf(0.5 * rs.dim_x() as f64),
    };
    let mut it = Integrator {
        f: &f,
        refine: 64.0 / p.quad.panels as f64,
        filon_threshold: p.quad.filon_threshold,
        diag: RadialDiagnostics::default(),
    };
    let mut sum = Sum::default();
    let step = if p.quad.oracle_mode { 0.25 } else { 3.0 };
    if piece == Piece::Low {
        it.gauss(0.0, rho, step, &mut sum);
        it.gauss(rho, 2.0 * rho, step, &mut sum);
        it.diag.r_split = 2.0 * rho;
        return Ok((sum.value, it.diag));
    }
    let t = p.t;
    let split = hankel_split_threshold(nu);
    let r_min = (4.0 * rho.max(1.0 / t)).max(2.0 * rho);
    if p.quad.oracle_mode {
        return oracle(&mut it, r_min, split);
    }

    let r_a = p.quad.r_max.unwrap_or(r_min);
    let series_route = s == 0.0 || (s < t && s * (r_a + 40.0 / (t - s)) <= COMPLEX_SERIES_LIMIT);
    let r = if series_route {
        r_a
    } else {
        p.quad.r_max.unwrap_or(r_min.max(2.0 * split / s)).max(split / s)
    };
    it.diag.r_split = r;
    it.gauss(0.0, rho, step, &mut sum);
    it.gauss(rho, 2.0 * rho, step, &mut sum);
    let filon_from = if series_route { r } else { (split / s).max(2.0 * rho).min(r) };
    it.gauss(2.0 * rho, filon_from, step, &mut sum);
    it.filon(filon_from, r, &mut sum);

    let finite_mass = sum.mass;
    let mut tails = Vec::new();
    if series_route {
        let mut tail = Sum::default();
        let last = it.contour(r, 1.0, t - s, &mut tail, |z| f.complex(z));
        tails.push((tail, last));
    } else {
        let mut up = Sum::default();
        let last = it.contour(r, 1.0, t + s, &mut up, |z| f.split(z, 1.0));
        tails.push((up, last));
        let dir = if t >= s { 1.0 } else { -1.0 };
        let mut down = Sum::default();
        let last = it.contour(r, dir, (t - s).abs(), &mut down, |z| f.split(z, -1.0));
        tails.push((down, last));
    }
    let mass = finite_mass + tails.iter().map(|(t, _)| t.mass).sum::<f64>();
    for (tail, last) in tails {
        let ratio = last / mass.max(1e-300);
        it.diag.tail_ratio = it.diag.tail_ratio.max(ratio);
        if !(ratio <= KERNEL_TAIL_TOLERANCE) {
            return Err(Error::InconclusiveIntegral {
                what: format!("wave kernel tail at t = {t}, |H| = {s}"),
                tail: ratio,
                tol: KERNEL_TAIL_TOLERANCE,
            });
        }
        sum.value += tail.value;
    }
    Ok((sum.value, it.diag))
}

/// Dense real-axis quadrature with an integration-by-parts tail.
fn oracle(it: &mut Integrator, r_min: f64, split: f64) -> Result<(C64, RadialDiagnostics)> {
    let f = it.f;
    let (t, s, rho) = (f.t, f.s, f.rho);
    let single = s * 2000.0 < split;
    if single && f.dim as f64 - 3.0 - f.sigma.re >= 0.0 {
        return Err(Error::Unsupported(format!(
            "oracle tail does not converge for |H| = {s} with Re sigma = {}",
            f.sigma.re
        )));
    }
    let mut r = 2000f64.max(r_min);
    if !single {
        r = r.max(2.0 * split / s);
    }
    it.diag.r_split = r;
    let mut sum = Sum::default();
    it.gauss(0.0, rho, 0.25, &mut sum);
    it.gauss(rho, 2.0 * rho, 0.25, &mut sum);
    it.gauss(2.0 * rho, r, 0.25, &mut sum);
    let energy = |x: f64| (x * x + rho * rho).sqrt();
    let pieces: Vec<f64> = if single { vec![0.0] } else { vec![1.0, -1.0] };
    let mut second = 0.0;
    for sign in pieces {
        let (v, e) = if single {
            it.by_parts(r, |x| f.real(x) * C64::from_polar(1.0, -t * energy(x)), |x| t * energy(x), |x| t * x / energy(x))
        } else {
            it.by_parts(
                r,
                |x| f.split_amplitude(C64::from(x), sign),
                |x| t * energy(x) + sign * s * x,
                |x| t * x / energy(x) + sign * s,
            )
        };
        sum.value += v;
        second += e;
    }
    it.diag.tail_ratio = second / sum.mass.max(1e-300);
    Ok((sum.value, it.diag))
}

/// `I(t, s)` for the chosen piece.
pub fn radial_integral(rs: &RootSystem, p: &KernelParams, piece: Piece, s: f64) -> Result<C64> {
    radial_integral_with_diagnostics(rs, p, piece, s).map(|(v, _)| v)
}

/// `1 / (pi(rho) pi^n (2 pi)^l)`: with this factor the kernels are the inverse
/// spherical transforms of their multipliers.
pub fn kernel_constant(rs: &RootSystem) -> f64 {
    let n = rs.num_positive_roots() as i32;
    let l = rs.rank() as i32;
    1.0 / (rs.pi(rs.rho()) * PI.powi(n) * (2.0 * PI).powi(l))
}

fn kernel_piece(rs: &RootSystem, p: &KernelParams, piece: Piece, h: &[f64]) -> Result<C64> {
    if h.len() != rs.rank() {
        return Err(Error::Domain(format!("H has {} coordinates, rank is {}", h.len(), rs.rank())));
    }
    let s = norm(h);
    Ok(radial_integral(rs, p, piece, s)? * (kernel_constant(rs) * phi0(rs, h)))
}

/// Low-frequency kernel `omega_t^{sigma, 0}(H)`.
pub fn kernel_low(rs: &RootSystem, p: &KernelParams, h: &[f64]) -> Result<C64> {
    kernel_piece(rs, p, Piece::Low, h)
}

/// High-frequency kernel `omega_t^{sigma, inf}(H)` without the analytic-family factor.
pub fn kernel_high(rs: &RootSystem, p: &KernelParams, h: &[f64]) -> Result<C64> {
    kernel_piece(rs, p, Piece::High, h)
}

/// High-frequency kernel multiplied by `e^{sigma^2} / Gamma((d+1)/2 - sigma)`.
pub fn kernel_high_regularized(rs: &RootSystem, p: &KernelParams, h: &[f64]) -> Result<C64> {
    Ok(regularization_factor(rs, p.sigma)? * kernel_high(rs, p, h)?)
}

/// `omega_t^sigma = omega_t^{sigma, 0} + omega_t^{sigma, inf}`.
pub fn kernel_total(rs: &RootSystem, p: &KernelParams, h: &[f64]) -> Result<C64> {
    Ok(kernel_low(rs, p, h)? + kernel_high(rs, p, h)?)
}

/// Kernel from a single uncut radial integral.
pub fn kernel_unsplit(rs: &RootSystem, p: &KernelParams, h: &[f64]) -> Result<C64> {
    kernel_piece(rs, p, Piece::Full, h)
}
