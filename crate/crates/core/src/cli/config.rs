//! Scenario documents: `[section]` headers, `key = value` lines and `#` comments.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use crate::analysis::DomainScan;
use crate::geometry::{CurveFamily, MoverCurve, MoverPath, SyntheticCusp, Window};
use crate::oscquad::QuadratureConfig;
use crate::potential::PotentialParams;
use crate::spectrum::BoundState;

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Parse { line: usize, message: String },
    Validation { key: String, message: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse { line, message } => write!(f, "parse error at line {line}: {message}"),
            ConfigError::Validation { key, message } => write!(f, "invalid value for {key}: {message}"),
        }
    }
}

impl std::error::Error for ConfigError {}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        key: key.to_string(),
        message: message.into(),
    }
}

/// Raw `section.key -> (line, value)` entries.
type Entries = BTreeMap<String, (usize, String)>;

fn tokenize(text: &str) -> Result<Entries, ConfigError> {
    let mut section: Option<String> = None;
    let mut entries = Entries::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Parse {
                line,
                message: format!("unterminated section header `{content}`"),
            })?;
            let name = name.trim();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("bad section name `{name}`"),
                });
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Parse {
            line,
            message: format!("expected `key = value`, found `{content}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(ConfigError::Parse {
                line,
                message: "empty key".into(),
            });
        }
        let Some(sec) = &section else {
            return Err(ConfigError::Parse {
                line,
                message: format!("key `{key}` appears before any section header"),
            });
        };
        let path = format!("{sec}.{key}");
        if let Some((first, _)) = entries.get(&path) {
            return Err(ConfigError::Parse {
                line,
                message: format!("duplicate key `{path}` (first set at line {first})"),
            });
        }
        entries.insert(path, (line, value.to_string()));
    }
    Ok(entries)
}

/// Typed access that records every key it resolves, so leftovers can be
/// reported as unknown.
struct Reader {
    entries: Entries,
    echo: Vec<(String, String)>,
}

impl Reader {
    fn raw(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).map(|(_, v)| v)
    }

    fn record(&mut self, key: &str, value: String) {
        self.echo.push((key.to_string(), value));
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let v = match self.raw(key) {
            Some(text) => parse_f64(key, &text)?,
            None => default,
        };
        self.record(key, fmt_f64(v));
        Ok(v)
    }

    fn usize_or(&mut self, key: &str, default: usize) -> Result<usize, ConfigError> {
        let v = match self.raw(key) {
            Some(text) => text
                .parse::<usize>()
                .map_err(|_| invalid(key, format!("`{text}` is not a non-negative integer")))?,
            None => default,
        };
        self.record(key, v.to_string());
        Ok(v)
    }

    fn u64_or(&mut self, key: &str, default: u64) -> Result<u64, ConfigError> {
        let v = match self.raw(key) {
            Some(text) => text
                .parse::<u64>()
                .map_err(|_| invalid(key, format!("`{text}` is not a non-negative integer")))?,
            None => default,
        };
        self.record(key, v.to_string());
        Ok(v)
    }

    fn bool_or(&mut self, key: &str, default: bool) -> Result<bool, ConfigError> {
        let v = match self.raw(key).as_deref() {
            Some("true") => true,
            Some("false") => false,
            Some(other) => return Err(invalid(key, format!("`{other}` is not true/false"))),
            None => default,
        };
        self.record(key, v.to_string());
        Ok(v)
    }

    fn list_or(&mut self, key: &str, default: Vec<f64>) -> Result<Vec<f64>, ConfigError> {
        let v = match self.raw(key) {
            Some(text) => text
                .split(',')
                .map(|t| parse_f64(key, t.trim()))
                .collect::<Result<Vec<_>, _>>()?,
            None => default,
        };
        self.record(key, v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(","));
        Ok(v)
    }

    fn str_or(&mut self, key: &str, default: &str) -> String {
        let v = self.raw(key).unwrap_or_else(|| default.to_string());
        self.record(key, v.clone());
        v
    }
}

fn parse_f64(key: &str, text: &str) -> Result<f64, ConfigError> {
    // Accept the typographic minus as well as '-'.
    let cleaned = text.replace('\u{2212}', "-");
    let v: f64 = cleaned
        .parse()
        .map_err(|_| invalid(key, format!("`{text}` is not a number")))?;
    if !v.is_finite() {
        return Err(invalid(key, "must be finite"));
    }
    Ok(v)
}

/// Shortest round-trip representation, identical on every platform.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Amplitude {
    /// Normalize so that `phi_norm = 1`.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumConfig {
    pub sigma3: f64,
    pub amplitude: Amplitude,
}

/// Budgets enforced by the driver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budgets {
    pub max_field_nodes: usize,
    pub max_probe_nodes: usize,
    pub max_kernel_evals: usize,
}

/// Subcommand-specific windows, grids and times.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub t_max: f64,
    pub grid_refine: usize,
    pub order: usize,
    pub cusp_s: Window,
    pub cusp_t: Window,
    pub cusp_ns: usize,
    pub cusp_nt: usize,
    pub cusp_tol: f64,
    pub tail_p_min: f64,
    pub tail_p_max: f64,
    pub tail_points: usize,
    pub tail_theta: f64,
    pub tail_phi: f64,
    pub pre_time: f64,
    pub post_times: Vec<f64>,
    pub evolve_times: Vec<f64>,
    pub probe: bool,
    pub probe_time: f64,
    pub probe_r_min: f64,
    pub probe_r_max: f64,
    pub probe_points: usize,
    pub probe_theta: f64,
    pub probe_phi: f64,
    pub probe_order: usize,
    pub static_samples: usize,
    pub domain_epsilon1: Vec<f64>,
    pub domain_scan: DomainScan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub curve: CurveFamily,
    pub params: PotentialParams,
    pub spectrum: SpectrumConfig,
    pub quad: QuadratureConfig,
    pub mc_seed: u64,
    pub budgets: Budgets,
    pub experiment: ExperimentConfig,
    /// Every resolved `section.key = value`, defaults included, in reading order.
    pub echo: Vec<(String, String)>,
}

impl ScenarioConfig {
    /// Bound state with the configured amplitude.
    pub fn bound_state(&self) -> crate::Result<BoundState> {
        let (a, eps) = (self.params.a, self.params.eps_a);
        match self.spectrum.amplitude {
            Amplitude::Auto => BoundState::normalized(a, eps, self.spectrum.sigma3, &self.quad),
            Amplitude::Fixed(amplitude) => BoundState::new(
                a,
                eps,
                crate::spectrum::PacketProfile {
                    sigma3: self.spectrum.sigma3,
                    amplitude,
                },
            ),
        }
    }

    /// Cusp time of the synthetic preset.
    pub fn cusp_time(&self) -> Option<f64> {
        match &self.curve {
            CurveFamily::SyntheticCusp(c) => Some(c.t1()),
            _ => None,
        }
    }
}

fn mover_path(r: &mut Reader, side: &str) -> Result<MoverPath, ConfigError> {
    Ok(MoverPath {
        theta0: r.f64_or(&format!("curve.{side}_theta0"), 0.0)?,
        center: r.f64_or(&format!("curve.{side}_center"), 0.0)?,
        width: r.f64_or(&format!("curve.{side}_width"), 1.0)?,
        azimuth: r.f64_or(&format!("curve.{side}_azimuth"), 0.0)?,
    })
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let entries = tokenize(text)?;
    let mut r = Reader {
        entries,
        echo: Vec::new(),
    };

    let preset = r.str_or("curve.preset", "straight");
    let (curve, t1, sigma_t) = match preset.as_str() {
        "straight" => (CurveFamily::StraightLine, None, None),
        "synthetic-cusp" => {
            let t1 = r.f64_or("curve.t1", 1.0)?;
            let sigma_t = r.f64_or("curve.sigma_t", 0.1)?;
            let amplitude = r.f64_or("curve.amplitude", 0.5)?;
            let c = SyntheticCusp::new(t1, sigma_t, amplitude).map_err(|e| invalid("curve.t1", e.to_string()))?;
            (CurveFamily::SyntheticCusp(c), Some(t1), Some(sigma_t))
        }
        "mover" => {
            let left = mover_path(&mut r, "left")?;
            let right = mover_path(&mut r, "right")?;
            let m = MoverCurve::new(left, right).map_err(|e| invalid("curve.left_width", e.to_string()))?;
            (CurveFamily::Mover(m), None, None)
        }
        other => {
            return Err(invalid(
                "curve.preset",
                format!("unknown preset `{other}` (straight, synthetic-cusp, mover)"),
            ))
        }
    };

    let a = r.f64_or("potential.a", 0.1)?;
    let eps_a = r.f64_or("potential.eps_a", -1.0 / (2.0 * PI * PI))?;
    let big_r = r.f64_or("potential.R", 10.0)?;
    let w = r.f64_or("potential.w", 2.0)?;
    let params = PotentialParams { a, eps_a, r: big_r, w };
    params.validate().map_err(|e| {
        let key = match &e {
            crate::Error::InvalidCoupling(_) => "potential.eps_a",
            crate::Error::InvalidParameter { name: "a", .. } => "potential.a",
            crate::Error::InvalidParameter { name: "R", .. } => "potential.R",
            _ => "potential.w",
        };
        invalid(key, e.to_string())
    })?;

    let sigma3 = r.f64_or("spectrum.sigma3", 1.0)?;
    let amplitude = match r.raw("spectrum.amplitude").as_deref() {
        None | Some("auto") => Amplitude::Auto,
        Some(text) => Amplitude::Fixed(parse_f64("spectrum.amplitude", text)?),
    };
    r.record(
        "spectrum.amplitude",
        match amplitude {
            Amplitude::Auto => "auto".into(),
            Amplitude::Fixed(v) => fmt_f64(v),
        },
    );
    let spectrum = SpectrumConfig { sigma3, amplitude };

    let defaults = QuadratureConfig::default();
    let quad = QuadratureConfig {
        abs_tol: r.f64_or("quad.abs_tol", defaults.abs_tol)?,
        rel_tol: r.f64_or("quad.rel_tol", defaults.rel_tol)?,
        max_panels: r.usize_or("quad.max_panels", defaults.max_panels)?,
        panel_rule_order: r.usize_or("quad.panel_rule_order", defaults.panel_rule_order)?,
    };
    quad.validate().map_err(|e| match &e {
        crate::Error::InvalidParameter { name, .. } => invalid(&format!("quad.{name}"), e.to_string()),
        _ => invalid("quad", e.to_string()),
    })?;
    let mc_seed = r.u64_or("quad.mc_seed", 20240601)?;
    let budgets = Budgets {
        max_field_nodes: r.usize_or("quad.max_field_nodes", 40_000_000)?,
        max_probe_nodes: r.usize_or("quad.max_probe_nodes", 200_000)?,
        max_kernel_evals: r.usize_or("quad.max_kernel_evals", 2_000_000_000)?,
    };

    // Bound-state contract (sigma3 against p3_max) is checked here so that
    // every subcommand fails at load rather than mid-run.
    BoundState::new(
        a,
        eps_a,
        crate::spectrum::PacketProfile {
            sigma3,
            amplitude: match amplitude {
                Amplitude::Auto => 1.0,
                Amplitude::Fixed(v) => v,
            },
        },
    )
    .map_err(|e| match &e {
        crate::Error::InvalidParameter { name: "amplitude", .. } => invalid("spectrum.amplitude", e.to_string()),
        _ => invalid("spectrum.sigma3", e.to_string()),
    })?;

    let (default_t_max, pre, post) = match (t1, sigma_t) {
        (Some(t1), Some(st)) => (t1 + 2.0 * st, t1 - 3.0 * st, vec![t1 + 2.0 * st]),
        _ => (0.3, 0.15, vec![0.3]),
    };
    let t_max = r.f64_or("experiment.t_max", default_t_max)?;
    if !(t_max > 0.0) {
        return Err(invalid("experiment.t_max", "must be positive"));
    }
    let grid_refine = r.usize_or("experiment.grid_refine", 1)?;
    if grid_refine == 0 {
        return Err(invalid("experiment.grid_refine", "must be at least 1"));
    }
    let order = r.usize_or("experiment.order", 0)?;
    if order > crate::evolve::MAX_ORDER {
        return Err(invalid("experiment.order", format!("must not exceed {}", crate::evolve::MAX_ORDER)));
    }
    let cusp_s = Window::new(r.f64_or("experiment.cusp_s_lo", -3.0)?, r.f64_or("experiment.cusp_s_hi", 3.0)?);
    let cusp_t = Window::new(r.f64_or("experiment.cusp_t_lo", 0.0)?, r.f64_or("experiment.cusp_t_hi", t_max)?);
    let cusp_ns = r.usize_or("experiment.cusp_ns", 241)?;
    let cusp_nt = r.usize_or("experiment.cusp_nt", 201)?;
    let cusp_tol = r.f64_or("experiment.cusp_tol", 1e-8)?;

    // [5, 80] at a = 0.01; narrower potentials keep the window inside the cutoff.
    let tail_p_max = r.f64_or("experiment.tail_p_max", (0.8 / a).min(80.0))?;
    let tail_p_min = r.f64_or("experiment.tail_p_min", (tail_p_max / 16.0).min(5.0))?;
    let tail_points = r.usize_or("experiment.tail_points", 12)?;
    if !(tail_p_min > 0.0 && tail_p_max > tail_p_min && tail_p_max * a < 1.0) {
        return Err(invalid(
            "experiment.tail_p_max",
            format!("need 0 < tail_p_min < tail_p_max < 1/a = {}", 1.0 / a),
        ));
    }
    if tail_points < crate::analysis::MIN_SAMPLES {
        return Err(invalid("experiment.tail_points", "need at least 8 samples"));
    }
    let tail_theta = r.f64_or("experiment.tail_theta", 0.3)?;
    let tail_phi = r.f64_or("experiment.tail_phi", 0.0)?;
    let pre_time = r.f64_or("experiment.pre_time", pre)?;
    let post_times = r.list_or("experiment.post_times", post.clone())?;
    let evolve_times = r.list_or("experiment.evolve_times", post)?;
    for (key, ts) in [
        ("experiment.pre_time", vec![pre_time]),
        ("experiment.post_times", post_times.clone()),
        ("experiment.evolve_times", evolve_times.clone()),
    ] {
        if ts.iter().any(|&t| !(t >= 0.0 && t <= t_max)) {
            return Err(invalid(key, format!("times must lie in [0, t_max = {t_max}]")));
        }
    }

    let probe = r.bool_or("experiment.probe", false)?;
    let probe_time = r.f64_or("experiment.probe_time", default_t_max.min(t_max))?;
    let probe_r_min = r.f64_or("experiment.probe_r_min", 5.0 * a)?;
    let probe_r_max = r.f64_or("experiment.probe_r_max", 0.5)?;
    let probe_points = r.usize_or("experiment.probe_points", 8)?;
    let probe_theta = r.f64_or("experiment.probe_theta", 0.5 * PI)?;
    let probe_phi = r.f64_or("experiment.probe_phi", 0.5 * PI)?;
    let probe_order = r.usize_or("experiment.probe_order", 2)?;
    if !(probe_time > 0.0 && probe_time <= t_max) {
        return Err(invalid("experiment.probe_time", "must lie in (0, t_max]"));
    }
    // With a >= 0.1 the window [5a, 0.5] is empty; position-probe then fails on its own radii.
    if probe && !(probe_r_min >= 5.0 * a * (1.0 - 1e-12) && probe_r_max <= 0.5 && probe_r_max > probe_r_min) {
        return Err(invalid("experiment.probe_r_min", "radii must satisfy 5a <= r_min < r_max <= 0.5"));
    }
    if probe_points < crate::analysis::MIN_SAMPLES {
        return Err(invalid("experiment.probe_points", "need at least 8 radii"));
    }
    if !(1..=crate::oscquad::gauss::MAX_ORDER).contains(&probe_order) {
        return Err(invalid("experiment.probe_order", "must lie in 1..=128"));
    }

    let static_samples = r.usize_or("experiment.static_samples", 20)?;
    let default_eps1 = match t1 {
        Some(t1) => vec![0.75 * t1, 0.8 * t1, 0.85 * t1],
        None => vec![0.5],
    };
    let domain_epsilon1 = r.list_or("experiment.domain_epsilon1", default_eps1)?;
    if let Some(t1) = t1 {
        if domain_epsilon1.iter().any(|&e| !(e > 0.0 && e <= t1)) {
            return Err(invalid("experiment.domain_epsilon1", format!("values must lie in (0, t1 = {t1}]")));
        }
    }
    let ds = DomainScan::default();
    let domain_scan = DomainScan {
        s_range: Window::new(
            r.f64_or("experiment.domain_s_lo", ds.s_range.lo)?,
            r.f64_or("experiment.domain_s_hi", ds.s_range.hi)?,
        ),
        n_s: r.usize_or("experiment.domain_ns", ds.n_s)?,
        n_t: r.usize_or("experiment.domain_nt", ds.n_t)?,
        n_polar: r.usize_or("experiment.domain_polar", ds.n_polar)?,
        n_azimuth: r.usize_or("experiment.domain_azimuth", ds.n_azimuth)?,
        q_max: r.f64_or("experiment.domain_q_max", ds.q_max)?,
    };

    if let Some((key, (line, _))) = r.entries.iter().next() {
        return Err(invalid(key, format!("unknown key (line {line})")));
    }

    Ok(ScenarioConfig {
        curve,
        params,
        spectrum,
        quad,
        mc_seed,
        budgets,
        experiment: ExperimentConfig {
            t_max,
            grid_refine,
            order,
            cusp_s,
            cusp_t,
            cusp_ns,
            cusp_nt,
            cusp_tol,
            tail_p_min,
            tail_p_max,
            tail_points,
            tail_theta,
            tail_phi,
            pre_time,
            post_times,
            evolve_times,
            probe,
            probe_time,
            probe_r_min,
            probe_r_max,
            probe_points,
            probe_theta,
            probe_phi,
            probe_order,
            static_samples,
            domain_epsilon1,
            domain_scan,
        },
        echo: r.echo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document() {
        let cfg = parse_config("[potential]\na = 0.1\neps_a = -0.0506606\n").unwrap();
        let beta = crate::spectrum::beta(cfg.params.eps_a).unwrap();
        assert!((beta - 1.0).abs() < 1e-5, "{beta}");
        assert_eq!(cfg.curve, CurveFamily::StraightLine);
        assert_eq!(cfg.quad, QuadratureConfig::default());
        assert!(cfg.echo.iter().any(|(k, v)| k == "spectrum.amplitude" && v == "auto"));
    }

    #[test]
    fn positive_coupling_is_rejected_with_key_path() {
        let err = parse_config("[potential]\na = 0.1\neps_a = 0.1\n").unwrap_err();
        assert!(matches!(err, ConfigError::Validation { ref key, .. } if key == "potential.eps_a"), "{err}");
    }

    #[test]
    fn duplicate_key_is_a_parse_error() {
        let err = parse_config("[potential]\na = 0.1\n# note\na = 0.2\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::Parse {
                line: 4,
                message: "duplicate key `potential.a` (first set at line 2)".into()
            }
        );
    }

    #[test]
    fn unknown_and_malformed_entries() {
        let err = parse_config("[potential]\naa = 0.1\n").unwrap_err();
        assert!(matches!(err, ConfigError::Validation { ref key, .. } if key == "potential.aa"));
        assert!(matches!(parse_config("a = 1\n"), Err(ConfigError::Parse { line: 1, .. })));
        assert!(matches!(parse_config("[quad\n"), Err(ConfigError::Parse { line: 1, .. })));
        assert!(matches!(parse_config("[quad]\njunk\n"), Err(ConfigError::Parse { line: 2, .. })));
        let err = parse_config("[quad]\nabs_tol = fast\n").unwrap_err();
        assert!(matches!(err, ConfigError::Validation { ref key, .. } if key == "quad.abs_tol"));
    }

    #[test]
    fn synthetic_defaults_follow_the_cusp_time() {
        let cfg = parse_config("[curve]\npreset = synthetic-cusp\n[potential]\na = 0.01\nR = 1\n").unwrap();
        assert_eq!(cfg.cusp_time(), Some(1.0));
        assert!((cfg.experiment.t_max - 1.2).abs() < 1e-15);
        assert!((cfg.experiment.pre_time - 0.7).abs() < 1e-15);
    }

    #[test]
    fn typographic_minus_is_accepted() {
        let cfg = parse_config("[potential]\neps_a = \u{2212}0.0506606\n").unwrap();
        assert!(cfg.params.eps_a < 0.0);
    }
}
