use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use gsync::contraction::{certify as certify_region, ContractionCertificate, CertifyOptions, InvariantRegion, RegionShape};
use gsync::diagnostics::{
    derivative_profile, esp_convergence, holder_exponent, input_forgetting, ForgettingOptions, HolderOptions,
    PairOptions,
};
use gsync::dynsys::{trajectory, Trajectory};
use gsync::gs::{compare_gs, drive_on_trajectory, psi_iterate_gs, PsiOptions, SampledGS};
use gsync::presets;
use gsync::statemaps::{lipschitz_bounds, LipschitzOptions, PowerSine, StateMap};
use nalgebra::DVector;

use crate::config::{requirement_name, Built, Method, RunConfig, StateMapSpec, SystemKind};
use crate::{CliError, Figure};

pub struct Output {
    dir: PathBuf,
    header: String,
}

impl Output {
    /// Create the output directory and write the resolved configuration.
    pub fn create(cfg: &RunConfig) -> Result<Self, CliError> {
        let dir = cfg.run.out.clone();
        std::fs::create_dir_all(&dir).map_err(|source| CliError::Io {
            path: dir.clone(),
            source,
        })?;
        let built = cfg.build()?;
        let mut header = String::new();
        let _ = writeln!(header, "# tool: gsync {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(header, "# system: {}", built.sys.label());
        let _ = writeln!(header, "# initial: {:?}", cfg.initial);
        let _ = writeln!(header, "# observation: {:?}", built.obs.kind());
        let _ = writeln!(header, "# state_map: {}", built.f.label());
        let _ = writeln!(header, "# washout: {}", cfg.run.washout);
        let _ = writeln!(header, "# record: {}", cfg.run.record);
        let _ = writeln!(header, "# seed: {}", cfg.run.seed);
        let out = Self { dir, header };
        out.write("resolved_config.toml", &cfg.to_toml())?;
        Ok(out)
    }

    pub fn write(&self, name: &str, content: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, content).map_err(|source| CliError::Io { path, source })
    }

    /// CSV with the run metadata, extra `# key: value` lines and a header row.
    fn csv(&self, extra: &[(String, String)], header: &str, rows: &str) -> String {
        let mut s = self.header.clone();
        for (k, v) in extra {
            let _ = writeln!(s, "# {k}: {v}");
        }
        let _ = writeln!(s, "{header}");
        s.push_str(rows);
        s
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

fn time_step(cfg: &RunConfig) -> f64 {
    match cfg.system {
        SystemKind::Lorenz { h, .. } => h,
        _ => 1.0,
    }
}

fn coordinate_names(cfg: &RunConfig, dim: usize) -> Vec<String> {
    match cfg.system {
        SystemKind::Lorenz { .. } => vec!["u".into(), "v".into(), "w".into()],
        _ => (1..=dim).map(|i| format!("m{i}")).collect(),
    }
}

fn observation_names(d: usize) -> Vec<String> {
    if d == 1 {
        vec!["obs".into()]
    } else {
        (1..=d).map(|i| format!("obs{i}")).collect()
    }
}

fn join(xs: impl IntoIterator<Item = f64>) -> String {
    xs.into_iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",")
}

fn base_trajectory(b: &Built, steps: usize) -> Result<Arc<Trajectory>, CliError> {
    Ok(Arc::new(trajectory(b.sys.as_ref(), &b.m0, steps)?))
}

fn require_regions(b: &Built) -> Result<(), CliError> {
    if b.regions.is_empty() {
        return Err(CliError::Config("no regions configured".into()));
    }
    Ok(())
}

pub fn simulate(cfg: &RunConfig, b: &Built, out: &Output) -> Result<ExitCode, CliError> {
    let steps = cfg.run.steps.unwrap_or(cfg.run.washout + cfg.run.record);
    if steps == 0 {
        return Err(CliError::Config("run.steps must be positive".into()));
    }
    let traj = base_trajectory(b, steps)?;
    let dt = time_step(cfg);
    let mut header = vec!["t".to_string()];
    header.extend(coordinate_names(cfg, b.sys.phase_dim()));
    header.extend(observation_names(b.obs.obs_dim()));
    let mut rows = String::new();
    for (i, m) in traj.points.iter().enumerate() {
        let z = b.obs.observe(m)?;
        let _ = writeln!(rows, "{},{},{}", i as f64 * dt, join(m.iter().copied()), join(z.iter().copied()));
    }
    out.write("trajectory.csv", &out.csv(&[("steps".into(), steps.to_string())], &header.join(","), &rows))?;
    println!("wrote {} points to {}", traj.len(), out.dir().join("trajectory.csv").display());
    Ok(ExitCode::SUCCESS)
}

fn certify_options(cfg: &RunConfig) -> CertifyOptions {
    CertifyOptions {
        lipschitz: LipschitzOptions {
            resolution: cfg.run.lipschitz_resolution,
            input_samples: cfg.run.input_samples,
        },
        invariance_resolution: cfg.run.invariance_resolution,
        ..Default::default()
    }
}

pub fn certify(cfg: &RunConfig, b: &Built, out: &Output) -> Result<ExitCode, CliError> {
    require_regions(b)?;
    let traj = base_trajectory(b, cfg.run.washout + cfg.run.record)?;
    let samples = &traj.points[cfg.run.washout..];
    let certs: Vec<ContractionCertificate> = b
        .regions
        .iter()
        .map(|r| certify_region(&b.f, r, b.sys.as_ref(), &b.obs, samples, certify_options(cfg)))
        .collect::<gsync::Result<_>>()?;
    let req = cfg.run.require;
    let mut report = String::new();
    let mut rows = String::new();
    for c in &certs {
        let _ = writeln!(report, "{}holds_{}: {}\n", c.to_report(), requirement_name(req), c.holds(req));
        let _ = writeln!(rows, "{}", c.csv_row());
    }
    let all = certs.iter().all(|c| c.holds(req));
    print!("{report}");
    println!("requirement {}: {}", requirement_name(req), if all { "holds" } else { "fails" });
    out.write("certificate_report.txt", &report)?;
    out.write(
        "certificates.csv",
        &out.csv(
            &[("require".into(), requirement_name(req).into()), ("all_hold".into(), all.to_string())],
            ContractionCertificate::CSV_HEADER,
            &rows,
        ),
    )?;
    Ok(if all { ExitCode::SUCCESS } else { ExitCode::from(4) })
}

fn start_state(cfg: &RunConfig, r: &InvariantRegion) -> DVector<f64> {
    cfg.run
        .x0
        .as_ref()
        .map_or_else(|| r.center(), |x| DVector::from_column_slice(x))
}

fn contraction_constant(f: &StateMap, r: &InvariantRegion, traj: &Trajectory, b: &Built) -> Result<f64, CliError> {
    let inputs = b.obs.observed_range(&traj.points)?;
    Ok(lipschitz_bounds(f, r, &inputs, LipschitzOptions::default())?.l_fx)
}

fn gs_metadata(cfg: &RunConfig, r: &InvariantRegion) -> Vec<(String, String)> {
    vec![
        ("region".into(), r.label.clone()),
        ("tool".into(), format!("gsync {}", env!("CARGO_PKG_VERSION"))),
        ("seed".into(), cfg.run.seed.to_string()),
    ]
}

pub fn synchronize(cfg: &RunConfig, b: &Built, out: &Output) -> Result<ExitCode, CliError> {
    require_regions(b)?;
    let traj = base_trajectory(b, cfg.run.washout + cfg.run.record)?;
    let dt = time_step(cfg);
    let mut rows = String::new();
    for r in &b.regions {
        let x0 = start_state(cfg, r);
        let run_drive = matches!(cfg.run.method, Method::Drive | Method::Both);
        let run_psi = matches!(cfg.run.method, Method::Psi | Method::Both);
        let drive = if run_drive {
            Some(drive_on_trajectory(&b.f, &b.obs, traj.clone(), &x0, cfg.run.washout, Some(r))?)
        } else {
            None
        };
        let psi = if run_psi {
            let c = contraction_constant(&b.f, r, &traj, b)?;
            let opts = PsiOptions {
                tol: cfg.run.psi_tol,
                max_iterations: cfg.run.psi_max_iterations,
                contraction: (c < 1.0).then_some(c),
            };
            Some(psi_iterate_gs(&b.f, b.sys.as_ref(), &b.obs, traj.clone(), &x0, cfg.run.washout + 1, opts, Some(r))?)
        } else {
            None
        };
        let agreement = match (&drive, &psi) {
            (Some(d), Some(p)) => Some(compare_gs(d, p)?),
            _ => None,
        };
        for (name, gs) in [("drive", &drive), ("psi", &psi)] {
            if let Some(gs) = gs {
                let file = format!("gs_{}_{name}.csv", r.label);
                let body = gs.to_csv(&b.f, &b.obs, dt, &gs_metadata(cfg, r))?;
                out.write(&file, &body)?;
                let _ = writeln!(
                    rows,
                    "{},{name},{},{},{},{},{}",
                    r.label,
                    gs.len(),
                    gs.residual.max,
                    gs.residual.mean,
                    gs.psi.as_ref().map_or(String::new(), |p| p.iterations.to_string()),
                    agreement.map_or(String::new(), |a| a.to_string())
                );
                println!("{}: {name} synchronization written to {file} (residual {:.3e})", r.label, gs.residual.max);
            }
        }
        if let Some(a) = agreement {
            println!("{}: sup |drive - psi| = {a:.3e}", r.label);
        }
    }
    out.write(
        "agreement.csv",
        &out.csv(
            &[],
            "region,method,points,residual_max,residual_mean,psi_iterations,sup_drive_minus_psi",
            &rows,
        ),
    )?;
    Ok(ExitCode::SUCCESS)
}

/// A second start inside the region, away from its center.
fn second_start(r: &InvariantRegion) -> DVector<f64> {
    let c = r.center();
    match &r.shape {
        RegionShape::AxisBox { lo, hi } => DVector::from_iterator(lo.len(), lo.iter().zip(hi).map(|(l, h)| l + 0.25 * (h - l))),
        _ => {
            let (_, hi) = r.bounding_box();
            let mut x = c.clone();
            x[0] += 0.5 * (hi[0] - c[0]);
            x
        }
    }
}

pub fn diagnose(cfg: &RunConfig, b: &Built, out: &Output) -> Result<ExitCode, CliError> {
    require_regions(b)?;
    let r = &b.regions[0];
    let traj = base_trajectory(b, cfg.run.washout + cfg.run.record)?;
    let inputs = b.obs.observed_range(&traj.points)?;
    let obs_seq = traj.observations(&b.obs)?;

    let (xa, xb) = (start_state(cfg, r), second_start(r));
    let dist = esp_convergence(&b.f, &obs_seq[1..], &xa, &xb)?;
    let mut rows = String::new();
    for t in 1..dist.len() {
        let ratio = if dist[t - 1] > 0.0 { dist[t] / dist[t - 1] } else { 0.0 };
        let _ = writeln!(rows, "{t},{},{ratio}", dist[t]);
    }
    out.write(
        "esp.csv",
        &out.csv(
            &[
                ("region".into(), r.label.clone()),
                ("x0a".into(), format!("{:?}", xa.as_slice())),
                ("x0b".into(), format!("{:?}", xb.as_slice())),
                ("initial_distance".into(), dist[0].to_string()),
            ],
            "t,distance,ratio",
            &rows,
        ),
    )?;

    let mut rows = String::new();
    for &k in &cfg.run.forgetting_suffixes {
        let rep = input_forgetting(
            &b.f,
            r,
            &inputs,
            ForgettingOptions {
                common_suffix: k,
                trials: cfg.run.forgetting_trials,
                prefix: cfg.run.forgetting_prefix,
                seed: cfg.run.seed,
            },
        )?;
        let _ = writeln!(rows, "{k},{},{},{},{}", rep.max_distance, rep.bound, rep.l_fx, rep.holds());
        println!("input forgetting k={k}: max {:.3e} <= bound {:.3e}: {}", rep.max_distance, rep.bound, rep.holds());
    }
    out.write(
        "forgetting.csv",
        &out.csv(
            &[("region".into(), r.label.clone()), ("trials".into(), cfg.run.forgetting_trials.to_string())],
            "k,max_distance,bound,l_fx,holds",
            &rows,
        ),
    )?;

    let gs = drive_on_trajectory(&b.f, &b.obs, traj.clone(), &start_state(cfg, r), cfg.run.washout, Some(r))?;
    let domain = b.sys.domain();
    let domain = domain.is_periodic().then_some(domain);
    let pair_opts = PairOptions {
        neighbors: cfg.run.pair_neighbors,
        bins: cfg.run.pair_bins,
        domain: domain.clone(),
        ..Default::default()
    };
    match derivative_profile(&gs, &pair_opts) {
        Ok(p) => {
            out.write("slopes.csv", &format!("{}{}", out.header, p.bins_csv()))?;
            out.write("pairs.csv", &format!("{}{}", out.header, p.pairs_csv()))?;
            println!("derivative profile: finest-bin median slope {:.4e}", p.finest().median_slope);
        }
        Err(e) => report_skipped(out, "slopes.csv", &e)?,
    }
    let holder_opts = HolderOptions {
        window: cfg.run.holder_window,
        domain,
        ..Default::default()
    };
    match holder_exponent(&gs, &holder_opts) {
        Ok(h) => {
            let body = format!(
                "{}gamma,r_squared,n_pairs,window_lo,window_hi,degenerate\n{},{},{},{},{},{}\n",
                out.header, h.gamma, h.r_squared, h.n_pairs, h.window.0, h.window.1, h.degenerate
            );
            out.write("holder.csv", &body)?;
            println!("Hölder exponent {:.4} (R^2 {:.3}, {} pairs)", h.gamma, h.r_squared, h.n_pairs);
        }
        Err(e) => report_skipped(out, "holder.csv", &e)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn report_skipped(out: &Output, file: &str, e: &gsync::Error) -> Result<(), CliError> {
    eprintln!("gsync: skipped {file}: {e}");
    out.write(file, &format!("{}# skipped: {e}\n", out.header))
}

pub fn reproduce(cfg: &RunConfig, b: &Built, out: &Output, figure: Option<Figure>) -> Result<ExitCode, CliError> {
    let figures = match figure {
        Some(f) => vec![f],
        None => vec![Figure::Fig1, Figure::Fig2, Figure::Fig3, Figure::Fig4],
    };
    let traj = base_trajectory(b, cfg.run.washout + cfg.run.record)?;
    let dt = time_step(cfg);
    let recorded = cfg.run.washout + 1..traj.len();
    let window = (
        "time_window".to_string(),
        format!("({}, {}]", cfg.run.washout as f64 * dt, (traj.len() - 1) as f64 * dt),
    );
    for fig in figures {
        match fig {
            Figure::Fig1 => {
                let mut header = vec!["t".to_string()];
                header.extend(coordinate_names(cfg, b.sys.phase_dim()));
                let mut rows = String::new();
                for t in recorded.clone() {
                    let _ = writeln!(rows, "{},{}", t as f64 * dt, join(traj.points[t].iter().copied()));
                }
                out.write("fig1.csv", &out.csv(std::slice::from_ref(&window), &header.join(","), &rows))?;
            }
            Figure::Fig2 => {
                let mut header = vec!["t".to_string()];
                header.extend(observation_names(b.obs.obs_dim()));
                let mut rows = String::new();
                for t in recorded.clone() {
                    let z = b.obs.observe(&traj.points[t])?;
                    let _ = writeln!(rows, "{},{}", t as f64 * dt, join(z.iter().copied()));
                }
                out.write("fig2.csv", &out.csv(std::slice::from_ref(&window), &header.join(","), &rows))?;
            }
            Figure::Fig3 => fig3(cfg, out)?,
            Figure::Fig4 => {
                if b.regions.len() < 2 {
                    return Err(CliError::Config("fig4 needs at least two regions".into()));
                }
                let branches: Vec<SampledGS> = b.regions[..2]
                    .iter()
                    .map(|r| drive_on_trajectory(&b.f, &b.obs, traj.clone(), &start_state(cfg, r), cfg.run.washout, Some(r)))
                    .collect::<gsync::Result<_>>()?;
                let n = b.f.state_dim();
                let mut header = vec!["t".to_string()];
                for r in &b.regions[..2] {
                    header.extend((1..=n).map(|i| format!("{}_x{i}", r.label)));
                }
                let mut rows = String::new();
                for (k, t) in branches[0].indices().enumerate() {
                    let vals = branches.iter().flat_map(|g| g.values[k].iter().copied());
                    let _ = writeln!(rows, "{},{}", t as f64 * dt, join(vals));
                }
                let mut extra = vec![window.clone()];
                for (g, r) in branches.iter().zip(&b.regions) {
                    extra.push((format!("branch_{}", r.label), format!("{:?}", r.shape)));
                    extra.push((format!("residual_{}", r.label), g.residual.max.to_string()));
                }
                out.write("fig4.csv", &out.csv(&extra, &header.join(","), &rows))?;
            }
        }
        println!("wrote {}", out.dir().join(format!("{}.csv", figure_name(fig))).display());
    }
    Ok(ExitCode::SUCCESS)
}

fn figure_name(f: Figure) -> &'static str {
    match f {
        Figure::Fig1 => "fig1",
        Figure::Fig2 => "fig2",
        Figure::Fig3 => "fig3",
        Figure::Fig4 => "fig4",
    }
}

/// One-step displacement of the unforced power map on the plane `x3 = 1`.
fn fig3(cfg: &RunConfig, out: &Output) -> Result<(), CliError> {
    let (alpha, branch) = match &cfg.statemap {
        StateMapSpec::PowerSine { alpha, branch, .. } => (*alpha, *branch),
        _ => return Err(CliError::Config("fig3 needs statemap.kind = power_sine".into())),
    };
    let f = StateMap::PowerSine(PowerSine::new(alpha, 0.0, presets::K)?.with_branch(branch));
    let n = cfg.run.fig3_grid.max(2);
    let e = cfg.run.fig3_extent;
    let z = DVector::from_element(1, 0.0);
    let mut rows = String::new();
    for i in 0..n {
        for j in 0..n {
            let x1 = -e + 2.0 * e * i as f64 / (n - 1) as f64;
            let x2 = -e + 2.0 * e * j as f64 / (n - 1) as f64;
            let x = DVector::from_vec(vec![x1, x2, 1.0]);
            let y = match f.eval(&x, &z) {
                Ok(y) => y,
                Err(gsync::Error::DomainViolation(_)) => continue,
                Err(e) => return Err(e.into()),
            };
            let _ = writeln!(rows, "{x1},{x2},{},{}", y[0] - x1, y[1] - x2);
        }
    }
    let mut extra: Vec<(String, String)> = vec![("lambda".into(), "0".into()), ("x3".into(), "1".into())];
    for p in presets::planar_fixed_points() {
        extra.push(("fixed_point".into(), format!("({}, {}, 1)", p[0], p[1])));
    }
    out.write("fig3.csv", &out.csv(&extra, "x1,x2,dx1,dx2", &rows))
}
