//! Run configuration: a TOML file with sectioned keys (`system.*`,
//! `observation.*`, `statemap.*`, `region.N.*`, `run.*`). Every key is
//! optional; missing keys fall back to the Lorenz-driven power-sine setup
//! with eight boxes. Any `region.*` key replaces the default boxes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use gsync::contraction::{InvariantRegion, Requirement};
use gsync::dynsys::{CatMap, DiscreteSystem, Lorenz, LorenzSign, ObservationMap, OdeFlow, TorusRotation};
use gsync::presets;
use gsync::statemaps::{Esn, PowerBranch, PowerSine, Squashing, StateMap};
use nalgebra::{DMatrix, DVector};
use toml::{Table, Value};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum SystemKind {
    Lorenz {
        h: f64,
        substeps: usize,
        sigma: f64,
        rho: f64,
        beta: f64,
        sign: LorenzSign,
    },
    TorusRotation {
        angles: Vec<f64>,
    },
    CatMap,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObservationSpec {
    Projection(Vec<usize>),
    Linear(Vec<Vec<f64>>),
    SineSum,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateMapSpec {
    PowerSine {
        alpha: f64,
        lambda: f64,
        k: f64,
        branch: PowerBranch,
    },
    Esn {
        a: Vec<Vec<f64>>,
        c: Vec<Vec<f64>>,
        zeta: Vec<f64>,
        squashing: Squashing,
    },
    LinearDelay {
        q: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegionShapeSpec {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionSpec {
    pub label: String,
    pub shape: RegionShapeSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Method {
    Drive,
    Psi,
    Both,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Drive => "drive",
            Method::Psi => "psi",
            Method::Both => "both",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub washout: usize,
    pub record: usize,
    /// Trajectory length for `simulate`; defaults to `washout + record`.
    pub steps: Option<usize>,
    pub method: Method,
    pub require: Requirement,
    pub psi_tol: f64,
    pub psi_max_iterations: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// Initial reservoir state; defaults to each region's center.
    pub x0: Option<Vec<f64>>,
    pub lipschitz_resolution: usize,
    pub input_samples: usize,
    pub invariance_resolution: usize,
    pub forgetting_suffixes: Vec<usize>,
    pub forgetting_trials: usize,
    pub forgetting_prefix: usize,
    pub pair_neighbors: usize,
    pub pair_bins: usize,
    pub holder_window: Option<(f64, f64)>,
    pub fig3_grid: usize,
    pub fig3_extent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: SystemKind,
    pub initial: Vec<f64>,
    pub observation: ObservationSpec,
    pub statemap: StateMapSpec,
    pub regions: Vec<RegionSpec>,
    pub run: RunSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        let lorenz = Lorenz::default();
        Self {
            system: SystemKind::Lorenz {
                h: presets::H,
                substeps: 1,
                sigma: lorenz.sigma,
                rho: lorenz.rho,
                beta: lorenz.beta,
                sign: LorenzSign::Standard,
            },
            initial: presets::initial_point().iter().copied().collect(),
            observation: ObservationSpec::Projection(vec![0]),
            statemap: StateMapSpec::PowerSine {
                alpha: presets::ALPHA,
                lambda: presets::LAMBDA,
                k: presets::K,
                branch: PowerBranch::Odd,
            },
            regions: presets::regions()
                .into_iter()
                .map(|r| {
                    let (lo, hi) = r.bounding_box();
                    RegionSpec {
                        label: r.label,
                        shape: RegionShapeSpec::Box { lo, hi },
                    }
                })
                .collect(),
            run: RunSpec {
                washout: presets::WASHOUT,
                record: presets::RECORD,
                steps: None,
                method: Method::Drive,
                require: Requirement::Esp,
                psi_tol: 1e-12,
                psi_max_iterations: 5000,
                seed: 0,
                out: PathBuf::from("out"),
                x0: None,
                lipschitz_resolution: 20,
                input_samples: 200,
                invariance_resolution: 20,
                forgetting_suffixes: vec![1, 5, 20, 100, 200],
                forgetting_trials: 100,
                forgetting_prefix: 50,
                pair_neighbors: 8,
                pair_bins: 5,
                holder_window: None,
                fig3_grid: 31,
                fig3_extent: 1.5,
            },
        }
    }
}

fn cfg(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Flattened `dotted.key -> value` view that tracks which keys were read.
struct Keys {
    map: BTreeMap<String, Value>,
    base: PathBuf,
}

fn flatten(prefix: &str, table: &Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) if !t.is_empty() => flatten(&key, t, out),
            _ => {
                out.insert(key, v.clone());
            }
        }
    }
}

fn as_f64(key: &str, v: &Value) -> Result<f64, CliError> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(cfg(format!("{key}: expected a number"))),
    }
}

fn as_usize(key: &str, v: &Value) -> Result<usize, CliError> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(cfg(format!("{key}: expected a non-negative integer"))),
    }
}

fn as_vec(key: &str, v: &Value) -> Result<Vec<f64>, CliError> {
    match v {
        Value::Array(a) => a.iter().map(|x| as_f64(key, x)).collect(),
        _ => Err(cfg(format!("{key}: expected an array of numbers"))),
    }
}

fn as_matrix(key: &str, v: &Value) -> Result<Vec<Vec<f64>>, CliError> {
    match v {
        Value::Array(rows) => rows.iter().map(|r| as_vec(key, r)).collect(),
        _ => Err(cfg(format!("{key}: expected an array of rows"))),
    }
}

fn read_csv_matrix(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| cfg(format!("{}: {e}", path.display())))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|_| cfg(format!("{}: cannot parse '{x}'", path.display())))
                })
                .collect()
        })
        .collect()
}

impl Keys {
    fn take(&mut self, key: &str) -> Option<Value> {
        self.map.remove(key)
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<f64, CliError> {
        self.take(key).map_or(Ok(default), |v| as_f64(key, &v))
    }

    fn usize_or(&mut self, key: &str, default: usize) -> Result<usize, CliError> {
        self.take(key).map_or(Ok(default), |v| as_usize(key, &v))
    }

    fn str_opt(&mut self, key: &str) -> Result<Option<String>, CliError> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(cfg(format!("{key}: expected a string"))),
        }
    }

    fn vec_opt(&mut self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        self.take(key).map(|v| as_vec(key, &v)).transpose()
    }

    fn require_vec(&mut self, key: &str) -> Result<Vec<f64>, CliError> {
        self.vec_opt(key)?.ok_or_else(|| cfg(format!("missing {key}")))
    }

    /// Inline `key = [[...], ...]` or `key_csv = "path"`.
    fn matrix_opt(&mut self, key: &str) -> Result<Option<Vec<Vec<f64>>>, CliError> {
        let inline = self.take(key).map(|v| as_matrix(key, &v)).transpose()?;
        let csv_key = format!("{key}_csv");
        let from_csv = match self.str_opt(&csv_key)? {
            Some(p) => Some(read_csv_matrix(&self.base.join(p))?),
            None => None,
        };
        match (inline, from_csv) {
            (Some(_), Some(_)) => Err(cfg(format!("give either {key} or {csv_key}, not both"))),
            (a, b) => Ok(a.or(b)),
        }
    }

    fn has_prefix(&self, prefix: &str) -> bool {
        self.map.keys().any(|k| k.starts_with(prefix))
    }
}

fn dense(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, CliError> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(cfg(format!("{what}: matrix rows must be non-empty and of equal length")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| cfg(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    /// Parse TOML text; relative CSV paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| cfg(e.to_string()))?;
        let mut flat = BTreeMap::new();
        flatten("", &table, &mut flat);
        let mut keys = Keys {
            map: flat,
            base: base.to_path_buf(),
        };
        let explicit_empty_regions = matches!(table.get("region"), Some(Value::Table(t)) if t.is_empty());
        let mut c = RunConfig::default();

        let d = Lorenz::default();
        let kind = keys.str_opt("system.kind")?.unwrap_or_else(|| "lorenz".into());
        c.system = match kind.as_str() {
            "lorenz" => SystemKind::Lorenz {
                h: keys.f64_or("system.h", presets::H)?,
                substeps: keys.usize_or("system.substeps", 1)?,
                sigma: keys.f64_or("system.sigma", d.sigma)?,
                rho: keys.f64_or("system.rho", d.rho)?,
                beta: keys.f64_or("system.beta", d.beta)?,
                sign: match keys.str_opt("system.sign")?.as_deref() {
                    None | Some("standard") => LorenzSign::Standard,
                    Some("as_printed") => LorenzSign::AsPrinted,
                    Some(s) => return Err(cfg(format!("system.sign: unknown '{s}' (standard | as_printed)"))),
                },
            },
            "torus_rotation" => SystemKind::TorusRotation {
                angles: keys.require_vec("system.angles")?,
            },
            "cat_map" => SystemKind::CatMap,
            other => return Err(cfg(format!("system.kind: unknown '{other}' (lorenz | torus_rotation | cat_map)"))),
        };
        let default_initial = match &c.system {
            SystemKind::Lorenz { .. } => c.initial.clone(),
            SystemKind::TorusRotation { angles } => vec![0.0; angles.len()],
            SystemKind::CatMap => vec![0.1234, 0.5678],
        };
        c.initial = keys.vec_opt("system.initial")?.unwrap_or(default_initial);

        c.observation = match keys.str_opt("observation.kind")?.as_deref() {
            None | Some("coordinate") => ObservationSpec::Projection(vec![keys.usize_or("observation.index", 0)?]),
            Some("projection") => {
                let idx = keys.require_vec("observation.indices")?;
                ObservationSpec::Projection(idx.into_iter().map(|x| x as usize).collect())
            }
            Some("linear") => ObservationSpec::Linear(
                keys.matrix_opt("observation.matrix")?
                    .ok_or_else(|| cfg("observation.kind = linear needs observation.matrix"))?,
            ),
            Some("sine_sum") => ObservationSpec::SineSum,
            Some(s) => return Err(cfg(format!("observation.kind: unknown '{s}'"))),
        };

        c.statemap = match keys.str_opt("statemap.kind")?.as_deref() {
            None | Some("power_sine") => StateMapSpec::PowerSine {
                alpha: keys.f64_or("statemap.alpha", presets::ALPHA)?,
                lambda: keys.f64_or("statemap.lambda", presets::LAMBDA)?,
                k: keys.f64_or("statemap.k", presets::K)?,
                branch: match keys.str_opt("statemap.branch")?.as_deref() {
                    None | Some("odd") => PowerBranch::Odd,
                    Some("positive") => PowerBranch::Positive,
                    Some(s) => return Err(cfg(format!("statemap.branch: unknown '{s}' (odd | positive)"))),
                },
            },
            Some("esn") => {
                let a = keys.matrix_opt("statemap.a")?.ok_or_else(|| cfg("esn needs statemap.a"))?;
                let c_m = keys.matrix_opt("statemap.c")?.ok_or_else(|| cfg("esn needs statemap.c"))?;
                let zeta = keys.vec_opt("statemap.zeta")?.unwrap_or_else(|| vec![0.0; a.len()]);
                let squashing = match keys.str_opt("statemap.squashing")?.as_deref() {
                    None | Some("tanh") => Squashing::Tanh,
                    Some("logistic") => Squashing::Logistic,
                    Some("identity") => Squashing::Identity,
                    Some(s) => return Err(cfg(format!("statemap.squashing: unknown '{s}'"))),
                };
                StateMapSpec::Esn { a, c: c_m, zeta, squashing }
            }
            Some("linear_delay") => StateMapSpec::LinearDelay {
                q: keys.usize_or("statemap.q", 3)?,
            },
            Some(s) => return Err(cfg(format!("statemap.kind: unknown '{s}' (power_sine | esn | linear_delay)"))),
        };

        if keys.has_prefix("region.") || explicit_empty_regions {
            keys.take("region");
            c.regions = parse_regions(&mut keys)?;
        }

        let r = &mut c.run;
        r.washout = keys.usize_or("run.washout", r.washout)?;
        r.record = keys.usize_or("run.record", r.record)?;
        r.steps = keys.take("run.steps").map(|v| as_usize("run.steps", &v)).transpose()?;
        if let Some(m) = keys.str_opt("run.method")? {
            r.method = match m.as_str() {
                "drive" => Method::Drive,
                "psi" => Method::Psi,
                "both" => Method::Both,
                _ => return Err(cfg(format!("run.method: unknown '{m}' (drive | psi | both)"))),
            };
        }
        if let Some(m) = keys.str_opt("run.require")? {
            r.require = parse_requirement(&m)?;
        }
        r.psi_tol = keys.f64_or("run.psi_tol", r.psi_tol)?;
        r.psi_max_iterations = keys.usize_or("run.psi_max_iterations", r.psi_max_iterations)?;
        r.seed = keys.usize_or("run.seed", r.seed as usize)? as u64;
        if let Some(o) = keys.str_opt("run.out")? {
            r.out = PathBuf::from(o);
        }
        r.x0 = keys.vec_opt("run.x0")?;
        r.lipschitz_resolution = keys.usize_or("run.lipschitz_resolution", r.lipschitz_resolution)?;
        r.input_samples = keys.usize_or("run.input_samples", r.input_samples)?;
        r.invariance_resolution = keys.usize_or("run.invariance_resolution", r.invariance_resolution)?;
        if let Some(v) = keys.vec_opt("run.forgetting_suffixes")? {
            r.forgetting_suffixes = v.into_iter().map(|x| x as usize).collect();
        }
        r.forgetting_trials = keys.usize_or("run.forgetting_trials", r.forgetting_trials)?;
        r.forgetting_prefix = keys.usize_or("run.forgetting_prefix", r.forgetting_prefix)?;
        r.pair_neighbors = keys.usize_or("run.pair_neighbors", r.pair_neighbors)?;
        r.pair_bins = keys.usize_or("run.pair_bins", r.pair_bins)?;
        if let Some(w) = keys.vec_opt("run.holder_window")? {
            if w.len() != 2 {
                return Err(cfg("run.holder_window: expected [lo, hi]"));
            }
            r.holder_window = Some((w[0], w[1]));
        }
        r.fig3_grid = keys.usize_or("run.fig3_grid", r.fig3_grid)?;
        r.fig3_extent = keys.f64_or("run.fig3_extent", r.fig3_extent)?;

        if let Some(k) = keys.map.keys().next() {
            return Err(cfg(format!("unknown key '{k}'")));
        }
        c.validate()?;
        Ok(c)
    }

    /// Cross-check dimensions and build every object once.
    pub fn validate(&self) -> Result<(), CliError> {
        let b = self.build()?;
        let n = b.f.state_dim();
        let m = b.sys.phase_dim();
        if self.initial.len() != m {
            return Err(cfg(format!("system.initial has {} entries, phase space has {m}", self.initial.len())));
        }
        if b.obs.phase_dim() != m {
            return Err(cfg(format!("observation acts on dimension {}, phase space has {m}", b.obs.phase_dim())));
        }
        if b.obs.obs_dim() != b.f.input_dim() {
            return Err(cfg(format!(
                "observation has dimension {}, state map expects inputs of dimension {}",
                b.obs.obs_dim(),
                b.f.input_dim()
            )));
        }
        for r in &b.regions {
            if r.dim() != n {
                return Err(cfg(format!("region {} has dimension {}, state space has {n}", r.label, r.dim())));
            }
        }
        if let Some(x0) = &self.run.x0 {
            if x0.len() != n {
                return Err(cfg(format!("run.x0 has {} entries, state space has {n}", x0.len())));
            }
        }
        if self.run.record == 0 {
            return Err(cfg("run.record must be positive"));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Built, CliError> {
        let sys: Box<dyn DiscreteSystem> = match &self.system {
            SystemKind::Lorenz { h, substeps, sigma, rho, beta, sign } => {
                let field = Lorenz {
                    sigma: *sigma,
                    rho: *rho,
                    beta: *beta,
                    sign: *sign,
                };
                Box::new(OdeFlow::new(Arc::new(field), *h, *substeps).map_err(|e| cfg(e.to_string()))?)
            }
            SystemKind::TorusRotation { angles } => {
                Box::new(TorusRotation::new(angles.clone()).map_err(|e| cfg(e.to_string()))?)
            }
            SystemKind::CatMap => Box::new(CatMap),
        };
        let m = sys.phase_dim();
        let obs = match &self.observation {
            ObservationSpec::Projection(idx) => ObservationMap::projection(m, idx.clone()),
            ObservationSpec::Linear(rows) => ObservationMap::linear(dense(rows, "observation.matrix")?),
            ObservationSpec::SineSum => Ok(ObservationMap::sine_sum(m)),
        }
        .map_err(|e| cfg(e.to_string()))?;
        let f = match &self.statemap {
            StateMapSpec::PowerSine { alpha, lambda, k, branch } => PowerSine::new(*alpha, *lambda, *k)
                .map(|p| StateMap::PowerSine(p.with_branch(*branch))),
            StateMapSpec::Esn { a, c, zeta, squashing } => Esn::new(
                dense(a, "statemap.a")?,
                dense(c, "statemap.c")?,
                DVector::from_column_slice(zeta),
                *squashing,
            )
            .map(StateMap::Esn),
            StateMapSpec::LinearDelay { q } => Ok(StateMap::linear_delay(*q)),
        }
        .map_err(|e| cfg(e.to_string()))?;
        let regions = self
            .regions
            .iter()
            .map(|r| match &r.shape {
                RegionShapeSpec::Box { lo, hi } => InvariantRegion::axis_box(r.label.clone(), lo.clone(), hi.clone()),
                RegionShapeSpec::Ball { center, radius } => InvariantRegion::ball(r.label.clone(), center.clone(), *radius),
            })
            .collect::<gsync::Result<Vec<_>>>()
            .map_err(|e| cfg(e.to_string()))?;
        Ok(Built {
            sys,
            obs,
            f,
            regions,
            m0: DVector::from_column_slice(&self.initial),
        })
    }

    /// TOML that reproduces this configuration when loaded.
    pub fn to_toml(&self) -> String {
        let mut root = Table::new();
        let arr = |v: &[f64]| Value::Array(v.iter().map(|x| Value::Float(*x)).collect());
        let mat = |m: &[Vec<f64>]| Value::Array(m.iter().map(|r| arr(r)).collect());
        let int = |x: usize| Value::Integer(x as i64);
        let s = |x: &str| Value::String(x.to_string());

        let mut sys = Table::new();
        match &self.system {
            SystemKind::Lorenz { h, substeps, sigma, rho, beta, sign } => {
                sys.insert("kind".into(), s("lorenz"));
                sys.insert("h".into(), Value::Float(*h));
                sys.insert("substeps".into(), int(*substeps));
                sys.insert("sigma".into(), Value::Float(*sigma));
                sys.insert("rho".into(), Value::Float(*rho));
                sys.insert("beta".into(), Value::Float(*beta));
                let sign = match sign {
                    LorenzSign::Standard => "standard",
                    LorenzSign::AsPrinted => "as_printed",
                };
                sys.insert("sign".into(), s(sign));
            }
            SystemKind::TorusRotation { angles } => {
                sys.insert("kind".into(), s("torus_rotation"));
                sys.insert("angles".into(), arr(angles));
            }
            SystemKind::CatMap => {
                sys.insert("kind".into(), s("cat_map"));
            }
        }
        sys.insert("initial".into(), arr(&self.initial));
        root.insert("system".into(), Value::Table(sys));

        let mut obs = Table::new();
        match &self.observation {
            ObservationSpec::Projection(idx) => {
                obs.insert("kind".into(), s("projection"));
                obs.insert("indices".into(), Value::Array(idx.iter().map(|i| int(*i)).collect()));
            }
            ObservationSpec::Linear(rows) => {
                obs.insert("kind".into(), s("linear"));
                obs.insert("matrix".into(), mat(rows));
            }
            ObservationSpec::SineSum => {
                obs.insert("kind".into(), s("sine_sum"));
            }
        }
        root.insert("observation".into(), Value::Table(obs));

        let mut sm = Table::new();
        match &self.statemap {
            StateMapSpec::PowerSine { alpha, lambda, k, branch } => {
                sm.insert("kind".into(), s("power_sine"));
                sm.insert("alpha".into(), Value::Float(*alpha));
                sm.insert("lambda".into(), Value::Float(*lambda));
                sm.insert("k".into(), Value::Float(*k));
                let b = match branch {
                    PowerBranch::Odd => "odd",
                    PowerBranch::Positive => "positive",
                };
                sm.insert("branch".into(), s(b));
            }
            StateMapSpec::Esn { a, c, zeta, squashing } => {
                sm.insert("kind".into(), s("esn"));
                sm.insert("a".into(), mat(a));
                sm.insert("c".into(), mat(c));
                sm.insert("zeta".into(), arr(zeta));
                let q = match squashing {
                    Squashing::Tanh => "tanh",
                    Squashing::Logistic => "logistic",
                    Squashing::Identity => "identity",
                };
                sm.insert("squashing".into(), s(q));
            }
            StateMapSpec::LinearDelay { q } => {
                sm.insert("kind".into(), s("linear_delay"));
                sm.insert("q".into(), int(*q));
            }
        }
        root.insert("statemap".into(), Value::Table(sm));

        let mut regions = Table::new();
        for (i, r) in self.regions.iter().enumerate() {
            let mut t = Table::new();
            t.insert("label".into(), s(&r.label));
            match &r.shape {
                RegionShapeSpec::Box { lo, hi } => {
                    t.insert("lo".into(), arr(lo));
                    t.insert("hi".into(), arr(hi));
                }
                RegionShapeSpec::Ball { center, radius } => {
                    t.insert("center".into(), arr(center));
                    t.insert("radius".into(), Value::Float(*radius));
                }
            }
            regions.insert((i + 1).to_string(), Value::Table(t));
        }
        root.insert("region".into(), Value::Table(regions));

        let r = &self.run;
        let mut run = Table::new();
        run.insert("washout".into(), int(r.washout));
        run.insert("record".into(), int(r.record));
        if let Some(steps) = r.steps {
            run.insert("steps".into(), int(steps));
        }
        run.insert("method".into(), s(r.method.name()));
        run.insert("require".into(), s(requirement_name(r.require)));
        run.insert("psi_tol".into(), Value::Float(r.psi_tol));
        run.insert("psi_max_iterations".into(), int(r.psi_max_iterations));
        run.insert("seed".into(), Value::Integer(r.seed as i64));
        run.insert("out".into(), s(&r.out.to_string_lossy()));
        if let Some(x0) = &r.x0 {
            run.insert("x0".into(), arr(x0));
        }
        run.insert("lipschitz_resolution".into(), int(r.lipschitz_resolution));
        run.insert("input_samples".into(), int(r.input_samples));
        run.insert("invariance_resolution".into(), int(r.invariance_resolution));
        run.insert(
            "forgetting_suffixes".into(),
            Value::Array(r.forgetting_suffixes.iter().map(|k| int(*k)).collect()),
        );
        run.insert("forgetting_trials".into(), int(r.forgetting_trials));
        run.insert("forgetting_prefix".into(), int(r.forgetting_prefix));
        run.insert("pair_neighbors".into(), int(r.pair_neighbors));
        run.insert("pair_bins".into(), int(r.pair_bins));
        if let Some((lo, hi)) = r.holder_window {
            run.insert("holder_window".into(), arr(&[lo, hi]));
        }
        run.insert("fig3_grid".into(), int(r.fig3_grid));
        run.insert("fig3_extent".into(), Value::Float(r.fig3_extent));
        root.insert("run".into(), Value::Table(run));
        root.to_string()
    }
}

pub fn parse_requirement(s: &str) -> Result<Requirement, CliError> {
    match s {
        "esp" => Ok(Requirement::Esp),
        "diff" => Ok(Requirement::Diff),
        _ => Err(cfg(format!("unknown requirement '{s}' (esp | diff)"))),
    }
}

pub fn requirement_name(r: Requirement) -> &'static str {
    match r {
        Requirement::Esp => "esp",
        Requirement::Diff => "diff",
    }
}

fn parse_regions(keys: &mut Keys) -> Result<Vec<RegionSpec>, CliError> {
    let mut ids: Vec<(u64, String)> = Vec::new();
    for k in keys.map.keys().filter_map(|k| k.strip_prefix("region.")) {
        let id = k.split('.').next().unwrap_or_default();
        let n = id
            .parse::<u64>()
            .map_err(|_| cfg(format!("region.{id}: region keys must be numbered (region.1.*, region.2.*, ...)")))?;
        if !ids.iter().any(|(m, _)| *m == n) {
            ids.push((n, id.to_string()));
        }
    }
    ids.sort();
    let mut out = Vec::new();
    for (n, id) in ids {
        let p = |name: &str| format!("region.{id}.{name}");
        let label = keys.str_opt(&p("label"))?.unwrap_or_else(|| format!("V{n}"));
        let shape = match keys.str_opt(&p("kind"))?.as_deref() {
            None | Some("box") => {
                if let Some(center) = keys.vec_opt(&p("center"))? {
                    let hw = keys
                        .take(&p("half_width"))
                        .ok_or_else(|| cfg(format!("{} needs half_width", p("center"))))?;
                    let hw = as_f64(&p("half_width"), &hw)?;
                    RegionShapeSpec::Box {
                        lo: center.iter().map(|c| c - hw).collect(),
                        hi: center.iter().map(|c| c + hw).collect(),
                    }
                } else {
                    RegionShapeSpec::Box {
                        lo: keys.require_vec(&p("lo"))?,
                        hi: keys.require_vec(&p("hi"))?,
                    }
                }
            }
            Some("ball") => RegionShapeSpec::Ball {
                center: keys.require_vec(&p("center"))?,
                radius: keys
                    .take(&p("radius"))
                    .ok_or_else(|| cfg(format!("missing {}", p("radius"))))
                    .and_then(|v| as_f64(&p("radius"), &v))?,
            },
            Some(s) => return Err(cfg(format!("{}: unknown '{s}' (box | ball)", p("kind")))),
        };
        out.push(RegionSpec { label, shape });
    }
    Ok(out)
}

pub struct Built {
    pub sys: Box<dyn DiscreteSystem>,
    pub obs: ObservationMap,
    pub f: StateMap,
    pub regions: Vec<InvariantRegion>,
    pub m0: DVector<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::parse("", Path::new(".")).unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.regions.len(), 8);
        assert_eq!(c.regions[1].label, "V2");
    }

    #[test]
    fn resolved_config_round_trips() {
        let text = r#"
            system.kind = "cat_map"
            observation.kind = "sine_sum"
            statemap.kind = "esn"
            statemap.a = [[0.3, 0.0], [0.0, 0.3]]
            statemap.c = [[0.5], [0.5]]
            region.1.lo = [-1.0, -1.0]
            region.1.hi = [1.0, 1.0]
            run.washout = 10
        "#;
        let c = RunConfig::parse(text, Path::new(".")).unwrap();
        let again = RunConfig::parse(&c.to_toml(), Path::new(".")).unwrap();
        assert_eq!(c, again);
        let d = RunConfig::default();
        assert_eq!(RunConfig::parse(&d.to_toml(), Path::new(".")).unwrap(), d);
    }

    #[test]
    fn rejects_unknown_keys_and_dimension_mismatch() {
        assert!(matches!(RunConfig::parse("run.wahsout = 3", Path::new(".")), Err(CliError::Config(_))));
        let bad = "region.1.center = [0.0, 0.0]\nregion.1.half_width = 1.0";
        assert!(matches!(RunConfig::parse(bad, Path::new(".")), Err(CliError::Config(_))));
    }
}
