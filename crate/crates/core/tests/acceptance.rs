//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::time::{Duration, Instant};

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use wavesym::estimates::{self, KernelPart, Regime};
use wavesym::evolution::{self, Propagator, SemilinearOptions};
use wavesym::geometry::{phi0, RadialFunction, RadialGrid};
use wavesym::root_system::RootSystem;
use wavesym::spherical::{self, SpectralGrid, Spherical};
use wavesym::wave_kernel::{self, KernelParams};

type Outcome = Result<(bool, String), wavesym::Error>;
type Criterion = (&'static str, fn() -> Outcome);

fn rs(tag: &str) -> RootSystem {
    tag.parse().expect("supported root system")
}

fn gaussian(grid: &RadialGrid) -> RadialFunction {
    grid.sample(|h| C64::from((-h.iter().map(|x| x * x).sum::<f64>()).exp()))
}

fn sup_rel(a: &RadialFunction, b: &RadialFunction) -> f64 {
    let num = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    num / b.sup_norm()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn round_trip() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for (tag, rb, h, lb, hl, out_r, out_h, tol) in [
        ("A1", 12.0, 0.1, 11.0, 0.3, 6.0, 0.1, 1e-6),
        ("A2", 9.0, 0.2, 11.0, 0.45, 3.0, 0.25, 1e-5),
    ] {
        let start = Instant::now();
        let r = rs(tag);
        let radial = RadialGrid::with_spacing(&r, rb, h)?;
        let spectral = SpectralGrid::with_spacing(&r, lb, hl)?;
        let g = spherical::forward_transform(&gaussian(&radial), &spectral)?;
        let out = RadialGrid::with_spacing(&r, out_r, out_h)?;
        let back = spherical::inverse_transform(&g, &out)?;
        let err = sup_rel(&back, &gaussian(&out));
        let elapsed = start.elapsed();
        ok &= err <= tol && elapsed <= Duration::from_secs(30);
        notes.push(format!("{tag} err {err:.2e} (<= {tol:.0e}) in {:.1}s", elapsed.as_secs_f64()));
    }
    Ok((ok, notes.join("; ")))
}

fn eigen_residual(tag: &str, lambda: &[f64], h: f64) -> Result<f64, wavesym::Error> {
    let r = rs(tag);
    let sph = Spherical::new(&r)?;
    let grid = RadialGrid::with_spacing(&r, 2.0, h)?;
    let f = grid.sample(|x| sph.phi(lambda, x));
    let lap = spherical::radial_laplacian_apply(&f)?;
    let ev = dot(lambda, lambda) + r.rho_norm().powi(2);
    let (mut worst, mut scale) = (0.0f64, 0.0f64);
    for i in 0..grid.len() {
        let x = grid.node(i);
        let wall = r
            .positive_roots()
            .iter()
            .map(|a| dot(a, x) / dot(a, a).sqrt())
            .fold(f64::INFINITY, f64::min);
        if !lap.valid[i] || wall < 0.25 || dot(x, x).sqrt() > 1.6 {
            continue;
        }
        worst = worst.max((lap.values.values[i] + f.values[i] * ev).norm());
        scale = scale.max(f.values[i].norm());
    }
    Ok(worst / (scale * ev))
}

fn eigenfunction() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for (tag, lambda) in [("A1", vec![1.3]), ("A2", vec![0.9, -0.4])] {
        let coarse = eigen_residual(tag, &lambda, 0.04)?;
        let fine = eigen_residual(tag, &lambda, 0.02)?;
        let ratio = coarse / fine;
        ok &= fine <= 1e-3 && (3.5..=4.5).contains(&ratio);
        notes.push(format!("{tag} residual {fine:.2e} (<= 1e-3), halving ratio {ratio:.2} (in [3.5, 4.5])"));
    }
    Ok((ok, notes.join("; ")))
}

fn basic_bound() -> Outcome {
    let mut rng = rand::rngs::StdRng::seed_from_u64(0x5eed);
    let mut notes = Vec::new();
    let mut total = 0;
    for tag in ["A1", "A2", "B2"] {
        let r = rs(tag);
        let sph = Spherical::new(&r)?;
        let mut violations = 0;
        for _ in 0..10_000 {
            let l: Vec<f64> = (0..r.rank()).map(|_| rng.gen_range(-15.0..15.0)).collect();
            let h: Vec<f64> = (0..r.rank()).map(|_| rng.gen_range(-6.0..6.0)).collect();
            if sph.phi(&l, &h).norm() > phi0(&r, &h) * (1.0 + 1e-10) {
                violations += 1;
            }
        }
        total += violations;
        notes.push(format!("{tag} {violations} violations / 10000"));
    }
    Ok((total == 0, notes.join("; ")))
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let r = rs("A1");
    // sigma = 2 = (d+1)/2 is a zero of 1/Gamma((d+1)/2 - sigma): the
    // regularizing scalar is common to both routes, so the integrals are compared.
    let sigma = C64::from(2.0);
    let mut worst = 0.0f64;
    let mut count = 0;
    for t in [0.3, 0.7, 1.5, 3.0, 6.0] {
        for s in [0.0, 0.5, 2.5, 5.0] {
            let fast = KernelParams::new(&r, t, sigma)?;
            let mut oracle = fast.clone();
            oracle.quad.oracle_mode = true;
            let a = wave_kernel::kernel_high(&r, &fast, &[s])?;
            let b = wave_kernel::kernel_high(&r, &oracle, &[s])?;
            worst = worst.max((a - b).norm() / b.norm());
            count += 1;
        }
    }
    let elapsed = start.elapsed();
    let ok = worst <= 1e-6 && count == 20 && elapsed <= Duration::from_secs(300);
    Ok((ok, format!("{count} points, worst relative gap {worst:.2e} (<= 1e-6) in {:.1}s", elapsed.as_secs_f64())))
}

fn small_time_decay() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut notes = Vec::new();
    for (tag, target, tol) in [("A1", -1.0, 0.15), ("A2", -3.5, 0.3)] {
        let r = rs(tag);
        let template = KernelParams::new(&r, 0.05, wave_kernel::default_sigma(&r))?;
        let rep = estimates::kernel_decay(&r, &template, Regime::SmallTime, &estimates::small_time_window())?;
        ok &= (rep.fitted_slope - target).abs() <= tol;
        notes.push(format!(
            "{tag} slope {:.3} (target {target} +- {tol}, Re sigma {})",
            rep.fitted_slope, template.sigma.re
        ));
    }
    let elapsed = start.elapsed();
    ok &= elapsed <= Duration::from_secs(1200);
    Ok((ok, format!("{} in {:.1}s", notes.join("; "), elapsed.as_secs_f64())))
}

fn large_time_decay() -> Outcome {
    let a1 = rs("A1");
    let template = KernelParams::new(&a1, 2.0, wave_kernel::default_sigma(&a1))?;
    let one = estimates::kernel_decay(&a1, &template, Regime::LargeTime, &estimates::large_time_window(40.0))?;
    let a2 = rs("A2");
    let template = KernelParams::new(&a2, 2.0, wave_kernel::default_sigma(&a2))?;
    let two = estimates::kernel_decay(&a2, &template, Regime::LargeTime, &estimates::large_time_window(12.0))?;
    let ok = (one.fitted_slope + 1.5).abs() <= 0.2 && two.fitted_slope <= -3.5;
    Ok((
        ok,
        format!(
            "A1 slope {:.3} on [2, 40] (target -1.5 +- 0.2); A2 slope {:.3} on [2, 12] (<= -3.5)",
            one.fitted_slope, two.fitted_slope
        ),
    ))
}

fn kunze_stein() -> Outcome {
    let r = rs("A1");
    let q = 4.0;
    let grid = estimates::kunze_stein_grid(&r, q)?;
    // full kernel at the critical exponent (d+1)/2
    let sigma = C64::from(0.5 * (r.dim_x() as f64 + 1.0));
    let times = estimates::large_time_window(40.0);
    let mut values = Vec::new();
    for &t in &times {
        let p = KernelParams::new(&r, t, sigma)?;
        let (k, _) = estimates::kernel_samples(&r, &p, KernelPart::Total, &grid)?;
        values.push(estimates::kunze_stein_bound(&k, q)?);
    }
    let fit = estimates::fit_decay(Regime::LargeTime, r.dim_x(), &times, &values)?;
    Ok((fit.fitted_slope <= -1.3, format!("slope {:.3} on [2, 40] (<= -1.3)", fit.fitted_slope)))
}

fn free_flow() -> Outcome {
    let r = rs("A1");
    let (radial, spectral) = evolution::default_grids(&r)?;
    let prop = Propagator::new(&radial, &spectral)?;
    let u = radial.sample(|h| C64::from((-h[0] * h[0]).exp()));
    let ut = radial.sample(|h| C64::from(0.5 * (-0.7 * h[0] * h[0]).exp()));
    let s = evolution::WaveState::new(u, ut, 0.0)?;
    let e0 = prop.energy(&s)?;
    let mut drift = 0.0f64;
    for k in 1..=20 {
        let e = prop.energy(&prop.propagate(&s, None, k as f64)?)?;
        drift = drift.max(((e - e0) / e0).abs());
    }
    let mut group = 0.0f64;
    for t in [0.5, 3.7, 10.0] {
        let back = prop.propagate(&prop.propagate(&s, None, t)?, None, -t)?;
        for (a, b) in [(&back.u, &s.u), (&back.ut, &s.ut)] {
            let d = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            group = group.max(d);
        }
    }
    Ok((
        drift <= 1e-6 && group <= 1e-8,
        format!("energy drift {drift:.2e} on [0, 20] (<= 1e-6); group law defect {group:.2e} (<= 1e-8)"),
    ))
}

fn formula_tables() -> Outcome {
    let inf = f64::INFINITY;
    // (d, p, q, admissible)
    let lattice = [
        (4, inf, 2.0, true),
        (4, 2.0, 6.0, true),
        (4, 2.0, 2.0, false),
        (4, 4.0, 3.0, true),
        (4, 4.0, 4.0, false),
        (4, 2.0, 4.0, true),
        (4, 8.0, 1.0 / 0.45, true),
        (4, inf, 4.0, false),
        (3, 2.0, inf, false),
        (3, 2.0, 4.0, true),
        (5, 2.0, 4.0, true),
        (5, 2.0, 5.0, false),
    ];
    let mismatches = lattice
        .iter()
        .filter(|&&(d, p, q, want)| evolution::admissible(d, p, q) != want)
        .count();
    let mut jump = 0.0f64;
    for d in 3..=10 {
        let g = evolution::GwpPowers::new(d)?;
        use evolution::GwpBranch as B;
        for (x, l, r) in [
            (g.gamma1, B::ZeroPlus, B::Sigma1),
            (g.gamma2, B::Sigma1, B::Sigma2),
            (g.gamma_c, B::Sigma2, B::Sigma3),
        ] {
            jump = jump.max((l.eval(d, x) - r.eval(d, x)).abs());
        }
    }
    let gc = evolution::GwpPowers::new(3)?.gamma_c;
    let s = evolution::gwp_sigma(3, gc, evolution::ZERO_PLUS)?;
    let ok = mismatches == 0 && jump <= 1e-9 && (s - 0.5).abs() <= 1e-12;
    Ok((
        ok,
        format!(
            "{}/12 lattice points agree; largest breakpoint jump {jump:.1e} (<= 1e-9); sigma_2(gamma_c) at d=3 = {s}",
            12 - mismatches
        ),
    ))
}

fn semilinear() -> Outcome {
    let start = Instant::now();
    let r = rs("A1");
    let (radial, spectral) = evolution::default_grids(&r)?;
    let prop = Propagator::new(&radial, &spectral)?;
    let gamma = 3.0;
    let order = evolution::gwp_sigma(r.dim_x(), gamma, evolution::ZERO_PLUS)?;
    let data = evolution::gaussian_data(&radial, 1.0, 1.0)?;
    let data = evolution::scale_to_size(&prop, &data, order, 1e-2)?;
    let sol = evolution::semilinear_solve(&prop, &data, &SemilinearOptions::new(gamma, 10.0))?;
    let ratios = sol.contraction_ratios();
    let contracting = ratios.iter().skip(1).all(|&q| q < 0.5);
    let e0 = sol.energies[0];
    let growth = sol.energies.iter().cloned().fold(0.0, f64::max) / e0;
    let elapsed = start.elapsed();
    let ok = sol.converged && contracting && growth <= 2.0 && elapsed <= Duration::from_secs(600);
    Ok((
        ok,
        format!(
            "{} iterations, residuals {}, ratios {}; max energy / initial {growth:.4} (<= 2) in {:.1}s",
            sol.iterations,
            sci(&sol.residuals),
            sci(&ratios),
            elapsed.as_secs_f64()
        ),
    ))
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.1e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("transform round-trip", round_trip),
        ("eigenfunction identity", eigenfunction),
        ("basic bound |phi_lambda| <= phi_0", basic_bound),
        ("quadrature oracle equivalence", oracle_equivalence),
        ("small-time kernel decay", small_time_decay),
        ("large-time kernel decay", large_time_decay),
        ("Kunze-Stein dispersive functional", kunze_stein),
        ("energy conservation and group law", free_flow),
        ("formula tables", formula_tables),
        ("semilinear small-data run", semilinear),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let (ok, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!("[{}] {:>2}. {name}: {detail}", if ok { "PASS" } else { "FAIL" }, k + 1);
    }
    println!("acceptance: {}/10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
