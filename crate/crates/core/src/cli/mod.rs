//! Command-line driver: loads a scenario, runs one experiment and writes CSV
//! reports, gnuplot scripts and a `manifest.txt` into the output directory.

pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};

pub use config::{parse_config, ConfigError, ScenarioConfig};

use crate::analysis::{
    estimate_domain_q, geometric_grid, position_exponent, tail_scan, verify_static_identity, PositionProbeConfig,
    TailFitResult,
};
use crate::error::Error;
use crate::evolve::{compute_i0_grid, volterra_iterate, Evolution, FieldGrid, GridSpec};
use crate::geometry::{find_cusps, CuspEvent, CuspGrid, CurveFamily, Vec3};
use crate::spectrum::{kappa_sq, kappa_sq_numeric, phi_norm, BoundState};
use config::fmt_f64;

#[derive(Debug, Parser)]
#[command(name = "cusp-transfer", version, about = "Capture by a moving string and post-cusp tails")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Scenario document.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// kappa^2(p3) closed form against the numerical root.
    BoundState,
    /// Cusp events of the configured curve.
    CuspScan,
    /// The field I(s,t) on its grid.
    Field,
    /// delta psi samples along the tail direction.
    Evolve,
    /// Pre- and post-cusp momentum tail fits.
    TailFit,
    /// Position-space exponent near the cusp.
    PositionProbe,
    /// Residual of the exact straight-string solution.
    VerifyStatic,
    /// Cone of non-critical directions before the cusp.
    DomainQ,
    /// cusp-scan, field, tail-fit and optionally position-probe.
    FullExperiment,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::BoundState => "bound-state",
            Command::CuspScan => "cusp-scan",
            Command::Field => "field",
            Command::Evolve => "evolve",
            Command::TailFit => "tail-fit",
            Command::PositionProbe => "position-probe",
            Command::VerifyStatic => "verify-static",
            Command::DomainQ => "domain-q",
            Command::FullExperiment => "full-experiment",
        }
    }
}

/// Failure of a run, classified for the exit code.
#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Numeric(Error),
    Io(std::io::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Numeric(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Numeric(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

impl RunError {
    /// 2 configuration, 3 quadrature, 4 budget, 5 degenerate fit, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numeric(e) => match e {
                Error::InvalidParameter { .. } | Error::InvalidCoupling(_) | Error::NoBoundState { .. } => 2,
                Error::QuadratureFailure { .. } => 3,
                Error::BudgetExceeded { .. } => 4,
                Error::DegenerateFit(_) => 5,
                Error::DegenerateCurve { .. } | Error::ConeEmpty(_) => 1,
            },
            RunError::Io(_) => 1,
        }
    }
}

/// Files and facts collected during a run, flushed into the manifest.
struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
    budgets: Vec<(String, String)>,
    results: Vec<(String, String)>,
}

impl Artifacts {
    fn write(&mut self, name: &str, content: &str) -> Result<(), RunError> {
        fs::write(self.dir.join(name), content)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &str, rows: &[Vec<String>]) -> Result<(), RunError> {
        let mut text = String::with_capacity(64 * (rows.len() + 1));
        text.push_str(header);
        text.push('\n');
        for row in rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        self.write(name, &text)
    }

    fn result(&mut self, key: &str, value: impl ToString) {
        self.results.push((key.to_string(), value.to_string()));
    }

    fn budget(&mut self, key: &str, used: usize, limit: usize) {
        self.budgets.push((key.to_string(), format!("{used} / {limit}")));
    }
}

/// Parses arguments from the process environment and runs; returns the exit code.
pub fn main_from_env() -> i32 {
    run_args(std::env::args_os())
}

pub fn run_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let Some(path) = cli.config.clone() else {
        eprintln!("error: --config PATH is required");
        return 2;
    };
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return 2;
        }
    };
    let cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return 2;
        }
    };
    let pool = match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return 1;
        }
    };
    let threads = pool.current_num_threads();
    match pool.install(|| run(cli.command, &cfg, &cli.out, threads)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs one subcommand, writing its artifacts and `manifest.txt` into `out`.
/// The manifest is written on failure too.
pub fn run(command: Command, cfg: &ScenarioConfig, out: &Path, threads: usize) -> Result<(), RunError> {
    fs::create_dir_all(out)?;
    let start = Instant::now();
    let mut art = Artifacts {
        dir: out.to_path_buf(),
        files: Vec::new(),
        budgets: Vec::new(),
        results: Vec::new(),
    };
    let outcome = dispatch(command, cfg, &mut art);
    let status = match &outcome {
        Ok(()) => "ok".to_string(),
        Err(e) => format!("failed (exit {}): {e}", e.exit_code()),
    };
    write_manifest(command, cfg, &mut art, threads, start.elapsed().as_secs_f64(), &status)?;
    outcome
}

fn dispatch(command: Command, cfg: &ScenarioConfig, art: &mut Artifacts) -> Result<(), RunError> {
    match command {
        Command::BoundState => bound_state(cfg, art),
        Command::CuspScan => cusp_scan(cfg, art).map(|_| ()),
        Command::Field => {
            let state = cfg.bound_state()?;
            let field = build_field(cfg, &state, art)?;
            write_field(&field, art)
        }
        Command::Evolve => evolve(cfg, art),
        Command::TailFit => {
            let state = cfg.bound_state()?;
            let field = build_field(cfg, &state, art)?;
            tail_fit(cfg, &state, &field, art).map(|_| ())
        }
        Command::PositionProbe => {
            let state = cfg.bound_state()?;
            let field = build_field(cfg, &state, art)?;
            let events = cusp_events(cfg)?;
            position_probe(cfg, &state, &field, &events, art).map(|_| ())
        }
        Command::VerifyStatic => verify_static(cfg, art),
        Command::DomainQ => domain_q(cfg, art),
        Command::FullExperiment => full_experiment(cfg, art),
    }
}

fn write_manifest(
    command: Command,
    cfg: &ScenarioConfig,
    art: &mut Artifacts,
    threads: usize,
    wall: f64,
    status: &str,
) -> Result<(), RunError> {
    let mut m = String::new();
    let _ = writeln!(m, "subcommand = {}", command.name());
    let _ = writeln!(m, "version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(m, "threads = {threads}");
    let _ = writeln!(m, "wall_time_s = {wall:.3}");
    let _ = writeln!(m, "status = {status}");
    m.push_str("\n[config]\n");
    for (k, v) in &cfg.echo {
        let _ = writeln!(m, "{k} = {v}");
    }
    m.push_str("\n[budgets]\n");
    let _ = writeln!(m, "quad.max_field_nodes = {}", cfg.budgets.max_field_nodes);
    let _ = writeln!(m, "quad.max_probe_nodes = {}", cfg.budgets.max_probe_nodes);
    let _ = writeln!(m, "quad.max_kernel_evals = {}", cfg.budgets.max_kernel_evals);
    for (k, v) in &art.budgets {
        let _ = writeln!(m, "used.{k} = {v}");
    }
    m.push_str("\n[results]\n");
    for (k, v) in &art.results {
        let _ = writeln!(m, "{k} = {v}");
    }
    m.push_str("\n[outputs]\n");
    for f in &art.files {
        let _ = writeln!(m, "file = {f}");
    }
    fs::write(art.dir.join("manifest.txt"), m)?;
    Ok(())
}

fn loglog_plot(data: &str, xlabel: &str, ylabel: &str, fit: Option<&TailFitResult>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set logscale xy");
    let _ = writeln!(s, "set xlabel '{xlabel}'");
    let _ = writeln!(s, "set ylabel '{ylabel}'");
    let _ = writeln!(s, "set key top right");
    match fit {
        Some(f) => {
            let _ = writeln!(s, "f(x) = exp({}) * x**({})", fmt_f64(f.log_prefactor), fmt_f64(f.slope));
            let _ = writeln!(
                s,
                "plot '{data}' every ::1::{} using 1:2 with points title 'samples', f(x) title 'slope {:.3}'",
                f.n_samples,
                f.slope
            );
        }
        None => {
            let _ = writeln!(s, "plot '{data}' every ::1 using 1:2 with linespoints title 'samples'");
        }
    }
    s
}

fn bound_state(cfg: &ScenarioConfig, art: &mut Artifacts) -> Result<(), RunError> {
    let state = cfg.bound_state()?;
    let (a, eps) = (cfg.params.a, cfg.params.eps_a);
    let n = 50;
    let mut rows = Vec::with_capacity(n);
    for k in 0..n {
        let p3 = 0.999 * state.p3_max * k as f64 / (n - 1) as f64;
        let closed = kappa_sq(p3, a, eps)?;
        let numeric = kappa_sq_numeric(p3, a, eps, 1e-14)?;
        rows.push(vec![
            fmt_f64(p3),
            fmt_f64(closed),
            fmt_f64(numeric),
            fmt_f64((closed - numeric).abs() / closed.abs()),
        ]);
    }
    art.csv("bound_state.csv", "p3,kappa_sq,kappa_sq_numeric,rel_diff", &rows)?;
    art.write(
        "bound_state.gp",
        "set datafile separator ','\nset xlabel 'p3'\nset ylabel 'kappa^2'\nplot 'bound_state.csv' every ::1 using 1:2 with lines title 'closed form', '' every ::1 using 1:3 with points title 'numeric root'\n",
    )?;
    art.result("beta", fmt_f64(state.beta));
    art.result("p3_max", fmt_f64(state.p3_max));
    art.result("kappa_sq_0", fmt_f64(kappa_sq(0.0, a, eps)?));
    art.result("amplitude", fmt_f64(state.packet.amplitude));
    art.result("phi_norm", fmt_f64(phi_norm(&state, &cfg.quad)?));
    Ok(())
}

fn cusp_events(cfg: &ScenarioConfig) -> Result<Vec<CuspEvent>, RunError> {
    let e = &cfg.experiment;
    Ok(find_cusps(
        &cfg.curve,
        e.cusp_s,
        e.cusp_t,
        CuspGrid {
            n_s: e.cusp_ns,
            n_t: e.cusp_nt,
        },
        e.cusp_tol,
    )?)
}

fn cusp_scan(cfg: &ScenarioConfig, art: &mut Artifacts) -> Result<Vec<CuspEvent>, RunError> {
    let events = cusp_events(cfg)?;
    let rows: Vec<Vec<String>> = events
        .iter()
        .map(|e| {
            vec![
                fmt_f64(e.s1),
                fmt_f64(e.t1),
                fmt_f64(e.location.x1),
                fmt_f64(e.location.x2),
                fmt_f64(e.location.x3),
                fmt_f64(e.tangent_residual),
                e.isolated.to_string(),
            ]
        })
        .collect();
    art.csv("cusp_scan.csv", "s1,t1,x1,x2,x3,tangent_residual,isolated", &rows)?;
    art.write(
        "cusp_scan.gp",
        "set datafile separator ','\nset xlabel 's'\nset ylabel 't'\nplot 'cusp_scan.csv' every ::1 using 1:2 with points pt 7 title 'cusp events'\n",
    )?;
    art.result("cusp_events", events.len());
    Ok(events)
}

fn build_field(cfg: &ScenarioConfig, state: &BoundState, art: &mut Artifacts) -> Result<FieldGrid, RunError> {
    let e = &cfg.experiment;
    let spec = GridSpec::minimal(&cfg.params, e.t_max)?.refined(e.grid_refine);
    art.budget("field_nodes", spec.nodes(), cfg.budgets.max_field_nodes);
    if spec.nodes() > cfg.budgets.max_field_nodes {
        return Err(Error::BudgetExceeded {
            what: "field grid nodes",
            requested: spec.nodes(),
            limit: cfg.budgets.max_field_nodes,
        }
        .into());
    }
    let source = compute_i0_grid(&cfg.curve, state, &cfg.params, &spec, &cfg.quad)?;
    art.result("field_grid", format!("{} x {}", spec.n_s, spec.n_t));
    if e.order == 0 {
        return Ok(source);
    }
    let outcome = volterra_iterate(&source, &cfg.curve, &cfg.params, e.order)?;
    let inc: Vec<String> = outcome.increments.iter().map(|v| fmt_f64(*v)).collect();
    art.result("picard_increments", inc.join(","));
    if outcome.diverging {
        eprintln!("warning: Picard increments do not decrease: {}", inc.join(", "));
        art.result("picard_diverging", "true");
    }
    Ok(outcome.field)
}

fn write_field(field: &FieldGrid, art: &mut Artifacts) -> Result<(), RunError> {
    let mut text = String::with_capacity(field.values().len() * 80 + 16);
    text.push_str("s,t,re_I,im_I\n");
    for j in 0..field.n_t() {
        let t = fmt_f64(field.t_node(j));
        for i in 0..field.n_s() {
            let v = field.value(i, j);
            let _ = writeln!(text, "{},{},{},{}", fmt_f64(field.s_node(i)), t, fmt_f64(v.re), fmt_f64(v.im));
        }
    }
    art.write("field.csv", &text)?;
    art.write(
        "field.gp",
        "set datafile separator ','\nset xlabel 's'\nset ylabel 't'\nset view map\nsplot 'field.csv' every ::1 using 1:2:(sqrt($3**2+$4**2)) with points pt 5 ps 0.3 palette title '|I|'\n",
    )?;
    art.result("field_sup_norm", fmt_f64(field.sup_norm()));
    Ok(())
}

fn tail_direction(cfg: &ScenarioConfig) -> Vec3 {
    Vec3::from_angles(cfg.experiment.tail_theta, cfg.experiment.tail_phi)
}

fn evolution<'a>(cfg: &'a ScenarioConfig, state: &'a BoundState, field: &'a FieldGrid) -> Evolution<'a> {
    Evolution {
        curve: &cfg.curve,
        state,
        params: &cfg.params,
        field,
        quad: &cfg.quad,
    }
}

fn evolve(cfg: &ScenarioConfig, art: &mut Artifacts) -> Result<(), RunError> {
    let state = cfg.bound_state()?;
    let field = build_field(cfg, &state, art)?;
    let ev = evolution(cfg, &state, &field);
    let e = &cfg.experiment;
    let dir = tail_direction(cfg);
    let mut rows = Vec::new();
    for &t in &e.evolve_times {
        for p in geometric_grid(e.tail_p_min, e.tail_p_max, e.tail_points) {
            let k = dir * p;
            let d = ev.psi(k, t)?.delta_psi;
            rows.push(vec![
                fmt_f64(k.x1),
                fmt_f64(k.x2),
                fmt_f64(k.x3),
                fmt_f64(t),
                fmt_f64(d.re),
                fmt_f64(d.im),
                fmt_f64(d.norm()),
            ]);
        }
    }
    art.csv("evolve.csv", "px,py,pz,t,re,im,abs", &rows)?;
    art.write(
        "evolve.gp",
        "set datafile separator ','\nset logscale y\nset xlabel '|p|'\nset ylabel '|delta psi|'\nplot 'evolve.csv' every ::1 using (sqrt($1**2+$2**2+$3**2)):7 with points title 'samples'\n",
    )?;
    Ok(())
}

fn fit_rows(fit: &TailFitResult) -> Vec<Vec<String>> {
    let mut rows: Vec<Vec<String>> = fit
        .samples
        .iter()
        .map(|(x, y)| vec![fmt_f64(*x), fmt_f64(*y)])
        .collect();
    rows.push(vec!["slope".into(), "stderr".into(), "r2".into()]);
    rows.push(vec![fmt_f64(fit.slope), fmt_f64(fit.stderr), fmt_f64(fit.r_squared)]);
    rows
}

/// Slopes of the pre-cusp fit and every post-cusp fit.
fn tail_fit(
    cfg: &ScenarioConfig,
    state: &BoundState,
    field: &FieldGrid,
    art: &mut Artifacts,
) -> Result<Vec<(String, TailFitResult)>, RunError> {
    let ev = evolution(cfg, state, field);
    let e = &cfg.experiment;
    let grid = geometric_grid(e.tail_p_min, e.tail_p_max, e.tail_points);
    let dir = tail_direction(cfg);
    let mut fits = vec![("pre".to_string(), tail_scan(&ev, dir, e.pre_time, &grid)?)];
    for (k, &t) in e.post_times.iter().enumerate() {
        let label = if e.post_times.len() == 1 { "post".to_string() } else { format!("post{}", k + 1) };
        fits.push((label, tail_scan(&ev, dir, t, &grid)?));
    }
    let mut summary = Vec::new();
    for (label, fit) in &fits {
        let name = format!("tail_fit_{label}.csv");
        art.csv(&name, "p,abs_delta_psi", &fit_rows(fit))?;
        art.write(
            &format!("tail_fit_{label}.gp"),
            &loglog_plot(&name, "|p|", "|delta psi|", Some(fit)),
        )?;
        summary.push(vec![
            label.clone(),
            fmt_f64(fit.time),
            fmt_f64(fit.slope),
            fmt_f64(fit.stderr),
            fmt_f64(fit.r_squared),
            fit.conclusive().to_string(),
            (fit.slope < -2.0).to_string(),
        ]);
        art.result(&format!("{label}_slope"), fmt_f64(fit.slope));
        art.result(&format!("{label}_slope_below_minus2"), fit.slope < -2.0);
    }
    art.csv(
        "tail_fit.csv",
        "label,t,slope,stderr,r2,conclusive,slope_below_minus2",
        &summary,
    )?;
    Ok(fits)
}

fn position_probe(
    cfg: &ScenarioConfig,
    state: &BoundState,
    field: &FieldGrid,
    events: &[CuspEvent],
    art: &mut Artifacts,
) -> Result<TailFitResult, RunError> {
    let ev = evolution(cfg, state, field);
    let e = &cfg.experiment;
    let s1 = events.iter().find(|c| c.isolated).map(|c| c.s1).unwrap_or(0.0);
    let origin = cfg.curve.position(s1, e.probe_time);
    let dir = Vec3::from_angles(e.probe_theta, e.probe_phi);
    let radii = geometric_grid(e.probe_r_min, e.probe_r_max, e.probe_points);
    let probe = PositionProbeConfig {
        order: e.probe_order,
        max_kernel_evals: cfg.budgets.max_kernel_evals,
    };
    art.budget(
        "kernel_evals",
        probe.evals_per_point(&ev, e.probe_time).saturating_mul(radii.len()),
        cfg.budgets.max_kernel_evals,
    );
    let fit = position_exponent(&ev, origin, dir, &radii, e.probe_time, &probe)?;
    let mut rows: Vec<Vec<String>> = fit
        .samples
        .iter()
        .map(|&(r, v)| {
            let x = origin + dir * r;
            vec![fmt_f64(r), fmt_f64(x.x1), fmt_f64(x.x2), fmt_f64(x.x3), fmt_f64(v)]
        })
        .collect();
    rows.push(vec!["slope".into(), "stderr".into(), "r2".into()]);
    rows.push(vec![fmt_f64(fit.slope), fmt_f64(fit.stderr), fmt_f64(fit.r_squared)]);
    art.csv("position_probe.csv", "r,x1,x2,x3,abs_delta_psi", &rows)?;
    art.write(
        "position_probe.gp",
        &loglog_plot("position_probe.csv", "r", "|delta psi(x)|", Some(&fit)).replace("using 1:2", "using 1:5"),
    )?;
    art.result("position_slope", fmt_f64(fit.slope));
    art.result("position_r2", fmt_f64(fit.r_squared));
    Ok(fit)
}

/// Deterministic `(p, t)` samples for the static identity, from an additive
/// low-discrepancy sequence; the first sample sits at `t = 0`.
pub fn static_samples(state: &BoundState, a: f64, t_max: f64, n: usize) -> Vec<(Vec3, f64)> {
    // Generalised golden ratios for four dimensions.
    let g: f64 = 1.167_303_978_261_418_7;
    let alpha = [1.0 / g, 1.0 / (g * g), 1.0 / (g * g * g), 1.0 / (g * g * g * g)];
    let span3 = (3.0 * state.packet.sigma3).min(0.9 * state.p3_max);
    (0..n)
        .map(|k| {
            let u: Vec<f64> = alpha.iter().map(|al| (0.5 + al * (k + 1) as f64).fract()).collect();
            let p3 = span3 * (2.0 * u[0] - 1.0);
            let rho = 0.5 / a * u[1];
            let phi = 2.0 * std::f64::consts::PI * u[2];
            let t = if k == 0 { 0.0 } else { t_max * u[3] };
            (Vec3::new(rho * phi.cos(), rho * phi.sin(), p3), t)
        })
        .collect()
}

fn verify_static(cfg: &ScenarioConfig, art: &mut Artifacts) -> Result<(), RunError> {
    if cfg.curve != CurveFamily::StraightLine {
        return Err(RunError::Config(ConfigError::Validation {
            key: "curve.preset".into(),
            message: "verify-static needs the straight preset".into(),
        }));
    }
    let state = cfg.bound_state()?;
    let samples = static_samples(&state, cfg.params.a, cfg.experiment.t_max, cfg.experiment.static_samples);
    let report = verify_static_identity(&cfg.params, &state, &cfg.quad, &samples)?;
    let mut rows: Vec<Vec<String>> = report
        .sample_points
        .iter()
        .zip(&report.residuals)
        .map(|((p, t), r)| vec![fmt_f64(p.x1), fmt_f64(p.x2), fmt_f64(p.x3), fmt_f64(*t), fmt_f64(*r)])
        .collect();
    rows.push(vec!["max_residual".into(), "tolerance_budget".into()]);
    rows.push(vec![fmt_f64(report.max_abs_residual), fmt_f64(report.quad_tolerance_budget)]);
    art.csv("verify_static.csv", "px,py,pz,t,residual", &rows)?;
    art.write(
        "verify_static.gp",
        "set datafile separator ','\nset logscale y\nset xlabel 'sample'\nset ylabel 'residual'\nplot 'verify_static.csv' every ::1 using 0:5 with points title 'residual'\n",
    )?;
    art.result("max_residual", fmt_f64(report.max_abs_residual));
    art.result("tolerance_budget", fmt_f64(report.quad_tolerance_budget));
    Ok(())
}

fn domain_q(cfg: &ScenarioConfig, art: &mut Artifacts) -> Result<(), RunError> {
    let mut rows = Vec::new();
    for &eps1 in &cfg.experiment.domain_epsilon1 {
        match estimate_domain_q(&cfg.curve, eps1, &cfg.experiment.domain_scan) {
            Ok(q) => rows.push(vec![
                fmt_f64(eps1),
                fmt_f64(q.q_estimate),
                q.unbounded.to_string(),
                "false".into(),
            ]),
            Err(Error::ConeEmpty(_)) => rows.push(vec![fmt_f64(eps1), fmt_f64(0.0), "false".into(), "true".into()]),
            Err(e) => return Err(e.into()),
        }
    }
    art.csv("domain_q.csv", "epsilon1,q_estimate,unbounded,cone_empty", &rows)?;
    art.write(
        "domain_q.gp",
        "set datafile separator ','\nset logscale y\nset xlabel 'epsilon1'\nset ylabel 'q'\nplot 'domain_q.csv' every ::1 using 1:2 with linespoints title 'q(epsilon1)'\n",
    )?;
    Ok(())
}

fn full_experiment(cfg: &ScenarioConfig, art: &mut Artifacts) -> Result<(), RunError> {
    let events = cusp_scan(cfg, art)?;
    let state = cfg.bound_state()?;
    let field = build_field(cfg, &state, art)?;
    let fits = tail_fit(cfg, &state, &field, art)?;
    let probe = if cfg.experiment.probe {
        Some(position_probe(cfg, &state, &field, &events, art)?)
    } else {
        None
    };
    let mut report = String::new();
    let _ = writeln!(report, "curve = {}", cfg.curve.name());
    for e in &events {
        let _ = writeln!(
            report,
            "cusp s1 = {} t1 = {} isolated = {}",
            fmt_f64(e.s1),
            fmt_f64(e.t1),
            e.isolated
        );
    }
    for (label, f) in &fits {
        let _ = writeln!(
            report,
            "tail {label}: t = {} slope = {:.4} +- {:.4} r2 = {:.4}{}",
            fmt_f64(f.time),
            f.slope,
            f.stderr,
            f.r_squared,
            if f.conclusive() { "" } else { " (non-conclusive)" }
        );
    }
    if let [(_, pre), rest @ ..] = fits.as_slice() {
        for (label, post) in rest {
            let _ = writeln!(report, "steeper pre than {label} by {:.4}", post.slope - pre.slope);
        }
    }
    if let Some(p) = probe {
        let _ = writeln!(report, "position slope = {:.4} +- {:.4} r2 = {:.4}", p.slope, p.stderr, p.r_squared);
    }
    art.write("report.txt", &report)?;
    Ok(())
}
