//! Special functions: Gamma for complex argument and Bessel functions of the
//! first kind.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function on the complex plane (Lanczos, g = 7, with reflection).
///
/// Returns a non-finite value at the poles `0, -1, -2, ...`.
pub fn gamma(z: C64) -> C64 {
    if z.re < 0.5 {
        let s = (PI * z).sin();
        if s.norm() == 0.0 {
            return C64::new(f64::INFINITY, 0.0);
        }
        return C64::from(PI) / (s * gamma(1.0 - z));
    }
    let z = z - 1.0;
    let mut x = C64::from(LANCZOS[0]);
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        x += *c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powc(z + 0.5) * (-t).exp() * x
}

/// `1 / Gamma(z)`, an entire function (exactly zero at the poles of Gamma).
pub fn recip_gamma(z: C64) -> C64 {
    if z.re < 0.5 {
        // 1/Gamma(z) = Gamma(1 - z) sin(pi z) / pi
        return gamma(1.0 - z) * (PI * z).sin() / PI;
    }
    1.0 / gamma(z)
}

/// Natural log of Gamma for real positive argument.
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0, "ln_gamma requires x > 0");
    if x < 0.5 {
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let mut s = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        s += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + s.ln()
}

/// Coefficients `a_k(nu) = prod_{j=1..k} (4 nu^2 - (2j-1)^2) / (k! 8^k)` of the
/// Hankel expansion.
fn hankel_coefficient_ratio(nu: f64, k: usize) -> f64 {
    let mu = 4.0 * nu * nu;
    let odd = (2 * k - 1) as f64;
    (mu - odd * odd) / (8.0 * k as f64)
}

fn is_half_integer(nu: f64) -> bool {
    (nu - nu.floor() - 0.5).abs() < 1e-12
}

const MAX_ASYMPTOTIC_TERMS: usize = 40;

/// Sum `sum_k (sign i)^k a_k(nu) z^{-k}` with optimal truncation.
fn hankel_series(nu: f64, z: C64, sign: f64) -> C64 {
    let terminating = is_half_integer(nu);
    let unit = C64::new(0.0, sign);
    let mut term = C64::from(1.0);
    let mut sum = term;
    let mut last = f64::INFINITY;
    for k in 1..MAX_ASYMPTOTIC_TERMS {
        let next = term * unit * hankel_coefficient_ratio(nu, k) / z;
        let size = next.norm();
        if size == 0.0 {
            break; // terminates for half-integer orders
        }
        if size > last && !terminating {
            break;
        }
        sum += next;
        if size < 1e-17 * sum.norm() {
            break;
        }
        last = size;
        term = next;
    }
    sum
}

/// Non-oscillatory amplitudes of the Hankel functions:
/// `H1(z) = h1 e^{iz}` and `H2(z) = h2 e^{-iz}`, valid for large `|z|`, `Re z > 0`.
pub fn hankel_amplitudes(nu: f64, z: C64) -> (C64, C64) {
    let pref = (C64::from(2.0 / PI) / z).sqrt();
    let phase = nu * PI / 2.0 + PI / 4.0;
    let h1 = pref * C64::from_polar(1.0, -phase) * hankel_series(nu, z, 1.0);
    let h2 = pref * C64::from_polar(1.0, phase) * hankel_series(nu, z, -1.0);
    (h1, h2)
}

/// Argument above which `J_nu` is taken from the Hankel expansion.
pub const BESSEL_ASYMPTOTIC_SWITCH: f64 = 12.0;

/// Argument above which the truncated Hankel expansion is accurate to
/// ~1e-12 relative for order `nu` (also used for complex arguments).
pub fn asymptotic_threshold(nu: f64) -> f64 {
    if is_half_integer(nu) && nu < 1.0 {
        BESSEL_ASYMPTOTIC_SWITCH
    } else {
        (1.5 * nu * nu).max(16.0)
    }
}

/// Smallest `|z|` (with `Re z > 0`) at which [`hankel_amplitudes`] is used for
/// complex arguments. Half-integer orders have terminating, exact expansions.
pub fn hankel_split_threshold(nu: f64) -> f64 {
    if is_half_integer(nu) {
        nu.max(1.0)
    } else {
        asymptotic_threshold(nu)
    }
}

fn bessel_series(nu: f64, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = (nu * half.ln() - ln_gamma(nu + 1.0)).exp();
    let mut sum = term;
    let q = half * half;
    let mut k = 0usize;
    loop {
        k += 1;
        term *= -q / (k as f64 * (k as f64 + nu));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs().max(1e-300) && (k as f64) > half {
            break;
        }
        if k > 500 {
            break;
        }
    }
    sum
}

fn bessel_asymptotic(nu: f64, x: f64) -> f64 {
    let (h1, _) = hankel_amplitudes(nu, C64::from(x));
    (h1 * C64::from_polar(1.0, x)).re
}

/// Bessel function of the first kind `J_nu(x)` for `nu >= 0`, `x >= 0`.
///
/// Power series for `x <= 12` (or `x <= nu`), Hankel expansion beyond the
/// accuracy threshold, and stable forward recurrence in between.
pub fn bessel_j(nu: f64, x: f64) -> f64 {
    assert!(nu >= 0.0 && x >= 0.0, "bessel_j requires nu >= 0 and x >= 0");
    if x == 0.0 {
        return if nu == 0.0 { 1.0 } else { 0.0 };
    }
    if x <= BESSEL_ASYMPTOTIC_SWITCH || x <= nu {
        return bessel_series(nu, x);
    }
    if is_half_integer(nu) || x >= asymptotic_threshold(nu) {
        return bessel_asymptotic(nu, x);
    }
    // x > 12 and x > nu: forward recurrence from the two lowest orders.
    let base = nu - nu.floor();
    let steps = nu.floor() as usize;
    let mut prev = bessel_asymptotic(base, x);
    if steps == 0 {
        return prev;
    }
    let mut cur = bessel_asymptotic(base + 1.0, x);
    for k in 1..steps {
        let order = base + k as f64;
        let next = 2.0 * order / x * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `u^{-nu} J_nu(u)` for real `u >= 0`; equals `1 / (2^nu Gamma(nu + 1))` at 0.
pub fn bessel_j_scaled(nu: f64, u: f64) -> f64 {
    if u < 1e-3 || u <= BESSEL_ASYMPTOTIC_SWITCH {
        return bessel_j_scaled_series(nu, C64::from(u)).re;
    }
    bessel_j(nu, u) / u.powf(nu)
}

/// Power series of `u^{-nu} J_nu(u)`, valid for complex `u` of moderate size.
pub fn bessel_j_scaled_series(nu: f64, u: C64) -> C64 {
    let mut term = C64::from((-(nu * 2f64.ln()) - ln_gamma(nu + 1.0)).exp());
    let mut sum = term;
    let q = 0.25 * u * u;
    let scale = term.norm();
    for k in 1..400 {
        term *= -q / (k as f64 * (k as f64 + nu));
        sum += term;
        if term.norm() <= 1e-17 * sum.norm().max(1e-300 * scale) && (k as f64) > 0.5 * u.norm() {
            break;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_known_values() {
        let g = gamma(C64::from(5.0));
        assert!((g.re - 24.0).abs() < 1e-12 && g.im.abs() < 1e-12);
        let g = gamma(C64::from(0.5));
        assert!((g.re - PI.sqrt()).abs() < 1e-13);
        // |Gamma(i)|^2 = pi / (sinh pi)
        let g = gamma(C64::new(0.0, 1.0));
        assert!((g.norm_sqr() - PI / PI.sinh()).abs() < 1e-13);
        // Gamma(-1/2) = -2 sqrt(pi)
        let g = gamma(C64::from(-0.5));
        assert!((g.re + 2.0 * PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn gamma_functional_equation() {
        for &(a, b) in &[(0.3, 1.7), (2.5, -3.0), (-1.3, 0.4), (6.0, 2.0)] {
            let z = C64::new(a, b);
            let lhs = gamma(z + 1.0);
            let rhs = z * gamma(z);
            assert!((lhs - rhs).norm() < 1e-12 * lhs.norm());
        }
    }

    #[test]
    fn recip_gamma_vanishes_at_poles() {
        for n in 0..4 {
            assert!(recip_gamma(C64::from(-(n as f64))).norm() < 1e-14);
        }
        let z = C64::new(0.0, 1.0);
        assert!((recip_gamma(z) * gamma(z) - 1.0).norm() < 1e-13);
    }

    #[test]
    fn ln_gamma_matches_factorials() {
        assert!((ln_gamma(11.0) - 3_628_800f64.ln()).abs() < 1e-12);
        assert!((ln_gamma(1.5) - (0.5 * PI.sqrt()).ln()).abs() < 1e-13);
    }

    #[test]
    fn half_integer_closed_form() {
        for &x in &[0.1, 1.0, PI, 7.5, 11.9, 12.1, 30.0, 200.0] {
            let want = (2.0 / (PI * x)).sqrt() * x.sin();
            assert!((bessel_j(0.5, x) - want).abs() < 1e-12, "x={x}");
            let want32 = (2.0 / (PI * x)).sqrt() * (x.sin() / x - x.cos());
            assert!((bessel_j(1.5, x) - want32).abs() < 1e-11, "x={x}");
        }
        assert!(bessel_j(0.5, PI).abs() < 1e-15);
    }

    #[test]
    fn zero_argument() {
        assert_eq!(bessel_j(0.0, 0.0), 1.0);
        for nu in [0.5, 1.0, 3.0, 4.0] {
            assert_eq!(bessel_j(nu, 0.0), 0.0);
        }
    }

    #[test]
    fn switchover_continuity() {
        // Both representations must agree across the switch for every supported order.
        for nu in [0.0, 0.5, 1.0, 3.0, 4.0, 6.5, 9.5] {
            let x = BESSEL_ASYMPTOTIC_SWITCH;
            let lo = bessel_series(nu, x);
            let hi = bessel_j(nu, x + 1e-12);
            assert!((lo - hi).abs() < 1e-10, "nu={nu}: {lo} vs {hi}");
        }
        for nu in [0.0, 1.0, 3.0, 4.0] {
            let x = asymptotic_threshold(nu);
            let below = bessel_j(nu, x - 1e-12);
            let above = bessel_j(nu, x + 1e-12);
            assert!((below - above).abs() < 1e-10, "nu={nu}: {below} vs {above}");
        }
    }

    #[test]
    fn reference_values() {
        let cases = [
            (0.0, 1.0, 0.765_197_686_557_966_6),
            (1.0, 10.0, 0.043_472_746_168_861_6),
            (3.0, 20.0, -0.098_901_394_560_449_58),
            (4.0, 15.0, -0.119_178_981_103_299_51),
            (4.0, 30.0, -0.052_609_000_321_320_36),
            (9.5, 40.0, 0.122_675_649_527_131_31),
        ];
        for (nu, x, want) in cases {
            let got = bessel_j(nu, x);
            assert!((got - want).abs() < 1e-12, "J_{nu}({x}) = {got}, want {want}");
        }
    }

    #[test]
    fn large_argument_envelope() {
        for nu in [0.5, 3.0, 4.0] {
            for i in 0..200 {
                let x = 12.0 + i as f64 * 7.3;
                assert!(bessel_j(nu, x).abs() * x.sqrt() <= 1.0, "nu={nu}, x={x}");
            }
        }
    }

    #[test]
    fn scaled_series_limit() {
        let v = bessel_j_scaled(3.0, 0.0);
        assert!((v - 1.0 / 48.0).abs() < 1e-15);
        for &u in &[0.5, 3.0, 11.0, 20.0] {
            let a = bessel_j_scaled(3.0, u);
            let b = bessel_j(3.0, u) / u.powi(3);
            assert!((a - b).abs() < 1e-12 * b.abs().max(1e-6), "u={u}");
        }
    }

    #[test]
    fn hankel_sum_is_bessel_for_complex_argument() {
        // J(z) = (H1 + H2)/2 compared against the entire series at a complex point.
        let nu = 3.0;
        let z = C64::new(18.0, 2.0);
        let (h1, h2) = hankel_amplitudes(nu, z);
        let j = 0.5 * (h1 * (C64::i() * z).exp() + h2 * (-C64::i() * z).exp());
        let series = bessel_j_scaled_series(nu, z) * z.powf(nu);
        assert!((j - series).norm() < 1e-7 * series.norm(), "{j} vs {series}");
    }
}
