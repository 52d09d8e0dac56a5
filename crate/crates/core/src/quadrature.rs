//! Gauss-Legendre rules and a Filon-type rule for `e^{i omega x}` panels.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64 as C64;

/// Nodes and weights of an `n`-point Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Integrate `f` over `[a, b]`.
    pub fn integrate<T, F>(&self, a: f64, b: f64, mut f: F) -> T
    where
        T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
        F: FnMut(f64) -> T,
    {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut acc = T::default();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc = acc + f(c + h * x) * (w * h);
        }
        acc
    }

    /// Composite rule over `panels` equal sub-intervals of `[a, b]`.
    pub fn integrate_composite<T, F>(&self, a: f64, b: f64, panels: usize, mut f: F) -> T
    where
        T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
        F: FnMut(f64) -> T,
    {
        let width = (b - a) / panels as f64;
        let mut acc = T::default();
        for k in 0..panels {
            let lo = a + k as f64 * width;
            acc = acc + self.integrate(lo, lo + width, &mut f);
        }
        acc
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Shared 16-point rule.
pub fn gl16() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(16))
}

/// Shared 32-point rule.
pub fn gl32() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(32))
}

/// Number of interpolation nodes of the Filon rule.
pub const FILON_NODES: usize = 12;

/// Filon-type rule on `[-1, 1]`: the amplitude is interpolated by a
/// polynomial at Chebyshev points and the moments of `x^j e^{i omega x}` are
/// integrated exactly.
#[derive(Debug, Clone)]
pub struct Filon {
    nodes: Vec<f64>,
    // coeff[j * n + i]: coefficient of x^j in the i-th Lagrange basis polynomial
    coeff: Vec<f64>,
}

impl Filon {
    pub fn new(n: usize) -> Self {
        let nodes: Vec<f64> = (0..n)
            .map(|i| -((PI * (i as f64 + 0.5) / n as f64).cos()))
            .collect();
        // Solve V c_i = e_i, V[i][j] = x_i^j; coefficients of the i-th basis
        // polynomial are column i of V^{-1}.
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                v[i * n + j] = nodes[i].powi(j as i32);
            }
        }
        let inv = invert(&v, n);
        Self { nodes, coeff: inv }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Weights `w_i` with `int_{-1}^{1} p(x) e^{i omega x} dx = sum_i w_i p(x_i)`.
    pub fn weights(&self, omega: f64) -> Vec<C64> {
        let n = self.nodes.len();
        let m = moments(omega, n);
        (0..n)
            .map(|i| (0..n).map(|j| m[j] * self.coeff[j * n + i]).sum())
            .collect()
    }

    /// `int_a^b f(x) e^{i k x} dx` for a smooth, slowly varying amplitude `f`.
    pub fn integrate<F: FnMut(f64) -> C64>(&self, a: f64, b: f64, k: f64, mut f: F) -> C64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let w = self.weights(k * h);
        let sum: C64 = self
            .nodes
            .iter()
            .zip(&w)
            .map(|(x, wi)| f(c + h * x) * wi)
            .sum();
        sum * h * C64::from_polar(1.0, k * c)
    }
}

/// Shared Filon rule with [`FILON_NODES`] nodes.
pub fn filon() -> &'static Filon {
    static RULE: OnceLock<Filon> = OnceLock::new();
    RULE.get_or_init(|| Filon::new(FILON_NODES))
}

fn invert(a: &[f64], n: usize) -> Vec<f64> {
    let mut m = a.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| m[x * n + col].abs().total_cmp(&m[y * n + col].abs()))
            .unwrap();
        if piv != col {
            for j in 0..n {
                m.swap(piv * n + j, col * n + j);
                inv.swap(piv * n + j, col * n + j);
            }
        }
        let d = m[col * n + col];
        for j in 0..n {
            m[col * n + j] /= d;
            inv[col * n + j] /= d;
        }
        for r in 0..n {
            if r != col {
                let f = m[r * n + col];
                if f != 0.0 {
                    for j in 0..n {
                        m[r * n + j] -= f * m[col * n + j];
                        inv[r * n + j] -= f * inv[col * n + j];
                    }
                }
            }
        }
    }
    inv
}

/// `M_j(omega) = int_{-1}^{1} x^j e^{i omega x} dx` for `j < n`.
fn moments(omega: f64, n: usize) -> Vec<C64> {
    if omega.abs() <= 12.0 {
        // Expand the exponential: M_j = sum_k (i omega)^k / k! * int x^{j+k}.
        let iw = C64::new(0.0, omega);
        (0..n)
            .map(|j| {
                let mut term = C64::from(1.0);
                let mut sum = C64::from(0.0);
                for k in 0..200 {
                    if k > 0 {
                        term *= iw / k as f64;
                    }
                    let p = j + k;
                    if p % 2 == 0 {
                        sum += term * (2.0 / (p as f64 + 1.0));
                    }
                    if k > 10 && term.norm() < 1e-18 {
                        break;
                    }
                }
                sum
            })
            .collect()
    } else {
        // Integration by parts: M_j = [x^j e^{iwx}/(iw)]_{-1}^{1} - j/(iw) M_{j-1}.
        let iw = C64::new(0.0, omega);
        let ep = C64::from_polar(1.0, omega);
        let em = C64::from_polar(1.0, -omega);
        let mut out = Vec::with_capacity(n);
        out.push((ep - em) / iw);
        for j in 1..n {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let boundary = (ep - em * sign) / iw;
            let prev = out[j - 1];
            out.push(boundary - prev * (j as f64) / iw);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let rule = GaussLegendre::new(16);
        let sum: f64 = rule.weights.iter().sum();
        assert!((sum - 2.0).abs() < 1e-14);
        for p in 0..32 {
            let got: f64 = rule.integrate(-1.0, 1.0, |x: f64| x.powi(p));
            let want = if p % 2 == 0 { 2.0 / (p as f64 + 1.0) } else { 0.0 };
            assert!((got - want).abs() < 1e-14, "p={p}");
        }
    }

    #[test]
    fn composite_exp() {
        let got: f64 = gl16().integrate_composite(0.0, 3.0, 4, |x: f64| x.exp());
        assert!((got - (3f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn moments_agree_across_regimes() {
        for &w in &[11.999, 12.001] {
            let a = moments(w, FILON_NODES);
            // reference by dense quadrature
            for (j, m) in a.iter().enumerate() {
                let r: C64 = gl32().integrate_composite(-1.0, 1.0, 16, |x: f64| {
                    C64::from_polar(x.powi(j as i32), w * x)
                });
                assert!((m - r).norm() < 1e-12, "w={w} j={j}: {m} vs {r}");
            }
        }
    }

    #[test]
    fn filon_is_exact_on_low_degree_amplitudes() {
        let rule = filon();
        for &k in &[0.0, 3.0, 40.0, 500.0] {
            let got = rule.integrate(1.0, 2.0, k, |x| C64::from(x * x - 0.5 * x));
            let want: C64 = gl32().integrate_composite(1.0, 2.0, 200, |x: f64| {
                C64::from_polar(x * x - 0.5 * x, k * x)
            });
            assert!((got - want).norm() < 1e-11, "k={k}: {got} vs {want}");
        }
    }

    #[test]
    fn filon_smooth_amplitude() {
        // int_0^4 e^{-x} e^{i 60 x} dx in closed form.
        let k = 60.0;
        let want = (C64::new(-1.0, k) * 4.0).exp() / C64::new(-1.0, k) - 1.0 / C64::new(-1.0, k);
        let mut got = C64::from(0.0);
        for p in 0..4 {
            let a = p as f64;
            got += filon().integrate(a, a + 1.0, k, |x| C64::from((-x).exp()));
        }
        assert!((got - want).norm() < 1e-11, "{got} vs {want}");
    }
}
