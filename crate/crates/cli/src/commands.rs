use std::io::Write;
use std::path::PathBuf;

use num_complex::Complex64 as C64;
use serde_json::{json, Value};
use wavesym::estimates::{self, ChamberGrid, KernelPart, Regime};
use wavesym::evolution::{self, Propagator, SemilinearOptions};
use wavesym::geometry::{phi0, phi0_envelope, RadialGrid};
use wavesym::root_system::RootSystem;
use wavesym::spherical::{self, SpectralGrid, Spherical, TransformMetadata};
use wavesym::wave_kernel::{self, KernelParams, Mollifier, Piece};

use crate::config::*;
use crate::output::{to_value, Artifacts, DEFAULT_OUTPUT_DIR};
use crate::*;

struct Ctx {
    tag: String,
    out_dir: PathBuf,
}

impl Ctx {
    fn root_system(&self) -> Result<RootSystem, CliError> {
        Ok(self.tag.parse::<RootSystem>()?)
    }

    fn params(&self, command: &str, section: &impl serde::Serialize) -> Result<Value, CliError> {
        Ok(json!({
            "root_system": self.tag,
            "output_dir": self.out_dir.display().to_string(),
            command: to_value(section)?,
        }))
    }
}

fn print_json(v: &Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(v).map_err(|e| CliError::Config(e.to_string()))?;
    emit(&text)
}

fn emit(text: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn or<T>(flag: Option<T>, fallback: T) -> T {
    flag.unwrap_or(fallback)
}

fn sigma_or_default(rs: &RootSystem, re: Option<f64>, im: Option<f64>) -> C64 {
    let d = wave_kernel::default_sigma(rs);
    C64::new(re.unwrap_or(d.re), im.unwrap_or(d.im))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let ctx = Ctx {
        tag: cli.root_system.or(cfg.root_system.clone()).unwrap_or_else(|| "A1".into()),
        out_dir: cli
            .output_dir
            .or(cfg.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
    };
    match cli.command {
        Command::Phi(a) => phi(&ctx, PhiParams {
            lambda: or(a.lambda, cfg.phi.lambda),
            h: or(a.h, cfg.phi.h),
        }),
        Command::Transform(a) => {
            let c = cfg.transform;
            transform(&ctx, TransformParams {
                width: or(a.width, c.width),
                radial_radius: or(a.radial_radius, c.radial_radius),
                radial_spacing: or(a.radial_spacing, c.radial_spacing),
                spectral_radius: or(a.spectral_radius, c.spectral_radius),
                spectral_spacing: or(a.spectral_spacing, c.spectral_spacing),
            })
        }
        Command::Kernel(a) => {
            let c = cfg.kernel;
            kernel(&ctx, KernelConfig {
                t: or(a.t, c.t),
                sigma_re: a.sigma_re.or(c.sigma_re),
                sigma_im: a.sigma_im.or(c.sigma_im),
                part: or(a.part, c.part),
                mollifier: or(a.mollifier, c.mollifier),
                radius: a.radius.or(c.radius),
                points: a.points.or(c.points),
                panels: or(a.panels, c.panels),
            })
        }
        Command::Decay(a) => {
            let c = cfg.decay;
            decay(&ctx, DecayParams {
                regime: or(a.regime, c.regime),
                sigma_re: a.sigma_re.or(c.sigma_re),
                sigma_im: a.sigma_im.or(c.sigma_im),
                t_max: or(a.t_max, c.t_max),
                times: a.times.or(c.times),
            })
        }
        Command::Dispersive(a) => {
            let c = cfg.dispersive;
            dispersive(&ctx, DispersiveParams {
                q: or(a.q, c.q),
                sigma_im: or(a.sigma_im, c.sigma_im),
                t_max: or(a.t_max, c.t_max),
                small_times: a.small_times.or(c.small_times),
                large_times: a.large_times.or(c.large_times),
            })
        }
        Command::Solve(a) => {
            let c = cfg.solve;
            let delta = if a.raw_amplitude { None } else { a.delta.or(c.delta) };
            solve(&ctx, SolveParams {
                gamma: or(a.gamma, c.gamma),
                t_final: or(a.t_final, c.t_final),
                steps: a.steps.or(c.steps),
                mu: or(a.mu, c.mu),
                width: or(a.width, c.width),
                amplitude: or(a.amplitude, c.amplitude),
                delta,
                max_iterations: or(a.max_iterations, c.max_iterations),
                tolerance: or(a.tolerance, c.tolerance),
                snapshot_every: or(a.snapshot_every, c.snapshot_every),
            })
        }
        Command::Admissible(a) => admissible(AdmissibleParams {
            d: a.d.or(cfg.admissible.d),
            p: a.p.or(cfg.admissible.p),
            q: a.q.or(cfg.admissible.q),
        }),
        Command::Gwp(a) => gwp(GwpParams {
            d: a.d.or(cfg.gwp.d),
            gamma: a.gamma.or(cfg.gwp.gamma),
            zero_plus: or(a.zero_plus, cfg.gwp.zero_plus),
        }),
    }
}

fn phi(ctx: &Ctx, p: PhiParams) -> Result<(), CliError> {
    let rs = ctx.root_system()?;
    let rank = rs.rank();
    if p.lambda.len() != rank || p.h.len() != rank {
        return Err(CliError::Config(format!(
            "--lambda and --h need {rank} comma-separated components each"
        )));
    }
    let v = Spherical::new(&rs)?.phi(&p.lambda, &p.h);
    let bound = phi0(&rs, &p.h);
    print_json(&json!({
        "root_system": ctx.tag,
        "lambda": p.lambda,
        "h": p.h,
        "phi": {"re": v.re, "im": v.im},
        "phi0": bound,
        "within_bound": v.norm() <= bound * (1.0 + 1e-10),
    }))
}

fn transform(ctx: &Ctx, p: TransformParams) -> Result<(), CliError> {
    let rs = ctx.root_system()?;
    if !(p.width > 0.0) {
        return Err(CliError::Config(format!("width must be positive, got {}", p.width)));
    }
    let radial = RadialGrid::with_spacing(&rs, p.radial_radius, p.radial_spacing)?;
    let spectral = SpectralGrid::with_spacing(&rs, p.spectral_radius, p.spectral_spacing)?;
    let w2 = p.width * p.width;
    let f = radial.sample(|h| C64::from((-h.iter().map(|x| x * x).sum::<f64>() / w2).exp()));
    let g = spherical::forward_transform(&f, &spectral)?;
    let back = spherical::inverse_transform(&g, &radial)?;
    let error = f
        .values
        .iter()
        .zip(&back.values)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max)
        / f.sup_norm();
    let calibrated = spherical::calibrate_plancherel_constant(&radial, &spectral)?;
    let mut art = Artifacts::new(&ctx.out_dir)?;
    art.write("radial.csv", |o| f.write_csv(o))?;
    art.write("spectral.csv", |o| g.write_csv(o))?;
    art.write("roundtrip.csv", |o| back.write_csv(o))?;
    let results = json!({
        "metadata": to_value(&TransformMetadata::new(&radial, &spectral))?,
        "calibrated_plancherel_constant": calibrated,
        "roundtrip_sup_relative_error": error,
    });
    art.manifest("transform", &ctx.params("transform", &p)?, results.clone())?;
    print_json(&results)
}

fn kernel(ctx: &Ctx, p: KernelConfig) -> Result<(), CliError> {
    let rs = ctx.root_system()?;
    let part: KernelPart = p.part.parse()?;
    let mut params = KernelParams::new(&rs, p.t, sigma_or_default(&rs, p.sigma_re, p.sigma_im))?;
    params.mollifier = p.mollifier.parse::<Mollifier>()?;
    params.quad.panels = p.panels;
    params.validate(&rs)?;
    let grid = match p.radius {
        Some(r) => ChamberGrid::new(&rs, r, p.points.unwrap_or(if rs.rank() == 1 { 65 } else { 49 }))?,
        None => ChamberGrid::for_time(&rs, p.t)?,
    };
    let nodes = grid.nodes();
    let values = estimates::kernel_on_nodes(&rs, &params, part, nodes)?;
    let n = rs.num_positive_roots() as f64;
    let mut excluded = 0;
    let mut art = Artifacts::new(&ctx.out_dir)?;
    let coords: Vec<String> = (1..=rs.rank()).map(|k| format!("H_{k}")).collect();
    art.write("kernel.csv", |o| {
        writeln!(o, "t,abs_H,{},re,im,abs,weighted_abs", coords.join(","))?;
        for (h, v) in nodes.iter().zip(&values) {
            let Some(v) = v else {
                excluded += 1;
                continue;
            };
            let r = h.iter().map(|x| x * x).sum::<f64>().sqrt();
            let env = phi0_envelope(&rs, h, n).map_err(std::io::Error::other)?;
            let hs: Vec<String> = h.iter().map(|x| x.to_string()).collect();
            writeln!(
                o,
                "{},{},{},{},{},{},{}",
                p.t,
                r,
                hs.join(","),
                v.re,
                v.im,
                v.norm(),
                v.norm() / env
            )?;
        }
        Ok(())
    })?;
    let s_max = nodes
        .iter()
        .map(|h| h.iter().map(|x| x * x).sum::<f64>().sqrt())
        .filter(|&s| (s - p.t.abs()).abs() > estimates::CONE_EXCLUSION * p.t.abs())
        .fold(0.0, f64::max);
    let pieces: &[Piece] = match part {
        KernelPart::Low => &[Piece::Low],
        KernelPart::HighReg => &[Piece::High],
        KernelPart::Total => &[Piece::Low, Piece::High],
    };
    let mut diagnostics = Vec::new();
    for &piece in pieces {
        let (_, d) = wave_kernel::radial_integral_with_diagnostics(&rs, &params, piece, s_max)?;
        diagnostics.push(json!({"piece": to_value(&piece)?, "radius": s_max, "quadrature": to_value(&d)?}));
    }
    let results = json!({
        "kernel_params": to_value(&params)?,
        "nodes": nodes.len(),
        "cone_excluded": excluded,
        "diagnostics": diagnostics,
    });
    art.manifest("kernel", &ctx.params("kernel", &p)?, results.clone())?;
    print_json(&results)
}

fn decay(ctx: &Ctx, p: DecayParams) -> Result<(), CliError> {
    let rs = ctx.root_system()?;
    let regime = match p.regime.as_str() {
        "small" => Regime::SmallTime,
        "large" => Regime::LargeTime,
        other => return Err(CliError::Config(format!("unknown regime '{other}', expected small or large"))),
    };
    let times = match (&p.times, regime) {
        (Some(t), _) => t.clone(),
        (None, Regime::SmallTime) => estimates::small_time_window(),
        (None, Regime::LargeTime) => estimates::large_time_window(p.t_max),
    };
    let template = KernelParams::new(&rs, times.first().copied().unwrap_or(1.0), sigma_or_default(&rs, p.sigma_re, p.sigma_im))?;
    let report = estimates::kernel_decay(&rs, &template, regime, &times)?;
    let mut art = Artifacts::new(&ctx.out_dir)?;
    art.write("decay.csv", |o| report.write_csv(o))?;
    let results = json!({"report": to_value(&report)?, "kernel_params": to_value(&template)?});
    art.manifest("decay", &ctx.params("decay", &p)?, results)?;
    print_json(&to_value(&report)?)
}

fn dispersive(ctx: &Ctx, p: DispersiveParams) -> Result<(), CliError> {
    let rs = ctx.root_system()?;
    let small = p.small_times.clone().unwrap_or_else(estimates::small_time_window);
    let large = p.large_times.clone().unwrap_or_else(|| estimates::large_time_window(p.t_max));
    let sigma = C64::new(0.5 * (rs.dim_x() as f64 + 1.0), p.sigma_im);
    let report = estimates::dispersive_report(&rs, p.q, sigma, &small, &large)?;
    let mut art = Artifacts::new(&ctx.out_dir)?;
    art.write("dispersive.csv", |o| report.write_csv(o))?;
    if let Some(fit) = &report.small_fit {
        art.write("dispersive_small.csv", |o| fit.write_csv(o))?;
    }
    if let Some(fit) = &report.large_fit {
        art.write("dispersive_large.csv", |o| fit.write_csv(o))?;
    }
    art.manifest("dispersive", &ctx.params("dispersive", &p)?, json!({"report": to_value(&report)?}))?;
    print_json(&to_value(&report)?)
}

fn solve(ctx: &Ctx, p: SolveParams) -> Result<(), CliError> {
    let rs = ctx.root_system()?;
    if p.snapshot_every == 0 {
        return Err(CliError::Config("snapshot_every must be at least 1".into()));
    }
    let (radial, spectral) = evolution::default_grids(&rs)?;
    let prop = Propagator::new(&radial, &spectral)?;
    let mut data = evolution::gaussian_data(&radial, p.width, p.amplitude)?;
    let mut sobolev_order = None;
    if let Some(delta) = p.delta {
        let s = evolution::gwp_sigma(rs.dim_x(), p.gamma, evolution::ZERO_PLUS)?;
        data = evolution::scale_to_size(&prop, &data, s, delta)?;
        sobolev_order = Some(s);
    }
    let opts = SemilinearOptions {
        gamma: p.gamma,
        mu: p.mu,
        t_final: p.t_final,
        steps: p.steps,
        max_iterations: p.max_iterations,
        tolerance: p.tolerance,
    };
    let sol = evolution::semilinear_solve(&prop, &data, &opts)?;
    let mut art = Artifacts::new(&ctx.out_dir)?;
    let last = sol.states.len() - 1;
    for (n, st) in sol.states.iter().enumerate() {
        if n % p.snapshot_every == 0 || n == last {
            art.write(&format!("snapshots/step_{n:05}.csv"), |o| st.u.write_csv(o))?;
        }
    }
    art.write("energy.csv", |o| {
        writeln!(o, "t,energy")?;
        for (t, e) in sol.times.iter().zip(&sol.energies) {
            writeln!(o, "{t},{e}")?;
        }
        Ok(())
    })?;
    let results = json!({
        "converged": sol.converged,
        "iterations": sol.iterations,
        "residuals": sol.residuals,
        "contraction_ratios": sol.contraction_ratios(),
        "times": sol.times,
        "energies": sol.energies,
        "steps": last,
        "data_sup_norm": data.u.sup_norm(),
        "data_sobolev_order": sobolev_order,
        "sup_norm_in_space_time": evolution::lp_lq_norm(&sol.times, &sol.states, f64::INFINITY, f64::INFINITY)?,
        "l2_in_time_l4_in_space": evolution::lp_lq_norm(&sol.times, &sol.states, 2.0, 4.0)?,
        "radial_grid": {"box_radius": radial.box_radius(), "points_per_axis": radial.points_per_axis()},
        "spectral_grid": {"box_radius": spectral.box_radius(), "points_per_axis": spectral.points_per_axis()},
    });
    art.manifest("solve", &ctx.params("solve", &p)?, results)?;
    print_json(&json!({
        "converged": sol.converged,
        "iterations": sol.iterations,
        "final_residual": sol.residuals.last(),
        "max_energy": sol.energies.iter().cloned().fold(0.0, f64::max),
        "initial_energy": sol.energies[0],
    }))
}

fn required<T>(v: Option<T>, name: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Config(format!("missing required parameter --{name}")))
}

fn admissible(p: AdmissibleParams) -> Result<(), CliError> {
    let d = required(p.d, "d")?;
    let (pp, q) = (required(p.p, "p")?, required(p.q, "q")?);
    emit(&evolution::admissible(d, pp, q).to_string())
}

fn gwp(p: GwpParams) -> Result<(), CliError> {
    let d = required(p.d, "d")?;
    let gamma = required(p.gamma, "gamma")?;
    emit(&evolution::gwp_sigma(d, gamma, p.zero_plus)?.to_string())
}
