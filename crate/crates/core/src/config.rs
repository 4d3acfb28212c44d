//! Sectioned `key = value` run configuration.
//!
//! ```text
//! # comment
//! [problem]
//! family = forward-laplacian
//! d = 2
//! alpha = 1.5
//! ```
//!
//! Lists are comma separated; lists of points separate points with `;`.
//! Every error names the line it comes from.

use std::path::PathBuf;
use std::str::FromStr;

use crate::abc::AbcConfig;
use crate::error::{Error, Result};
use crate::estimator::{EstimatorConfig, PdeCoefficients};
use crate::net::NetworkSpec;
use crate::oracle::Profile;
use crate::problems::{default_sensor_count, AdeSetup, Family, InverseSetup, ProblemSpec};
use crate::train::{LossMode, LossWeights, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

fn cfg_err<T>(line: usize, msg: impl std::fmt::Display) -> Result<T> {
    Err(Error::Config(format!("line {line}: {msg}")))
}

impl Section {
    fn entry(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entry(key).map(|e| e.value.as_str())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entry(key) {
            None => Ok(None),
            Some(e) => match e.value.parse::<T>() {
                Ok(v) => Ok(Some(v)),
                Err(_) => cfg_err(e.line, format!("[{}] {key}: cannot parse '{}'", self.name, e.value)),
            },
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        let Some(e) = self.entry(key) else {
            return Ok(None);
        };
        if e.value.trim().is_empty() {
            return Ok(Some(Vec::new()));
        }
        e.value
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<T>()
                    .or_else(|_| cfg_err(e.line, format!("[{}] {key}: cannot parse '{}'", self.name, s.trim())))
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    /// `;`-separated points of comma-separated coordinates.
    pub fn points(&self, key: &str) -> Result<Option<Vec<Vec<f64>>>> {
        let Some(e) = self.entry(key) else {
            return Ok(None);
        };
        parse_points(&e.value, e.line, &format!("[{}] {key}", self.name)).map(Some)
    }

    fn pair(&self, key: &str, default: (f64, f64)) -> Result<(f64, f64)> {
        match self.list::<f64>(key)? {
            None => Ok(default),
            Some(v) if v.len() == 2 => Ok((v[0], v[1])),
            Some(_) => cfg_err(self.entry(key).unwrap().line, format!("[{}] {key}: expected two numbers", self.name)),
        }
    }

    pub fn line_of(&self, key: &str) -> usize {
        self.entry(key).map_or(self.line, |e| e.line)
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for e in &self.entries {
            if !allowed.contains(&e.key.as_str()) {
                return cfg_err(e.line, format!("unknown key '{}' in [{}]", e.key, self.name));
            }
        }
        Ok(())
    }
}

/// Points written as `x1, x2; y1, y2; ...`. Errors name the point (row)
/// that failed, counting from 1.
pub fn parse_points(text: &str, line: usize, what: &str) -> Result<Vec<Vec<f64>>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(';')
        .enumerate()
        .map(|(k, row)| {
            row.split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .or_else(|_| cfg_err(line, format!("{what}: row {} is malformed: '{}'", k + 1, row.trim())))
        })
        .collect()
}

/// A parsed configuration file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Ini {
    pub sections: Vec<Section>,
}

const SECTIONS: [(&str, &[&str]); 6] = [
    ("run", &["seed", "workers", "out"]),
    (
        "problem",
        &[
            "family",
            "d",
            "alpha",
            "gamma",
            "c",
            "v",
            "mu",
            "horizon",
            "profile",
            "sensors",
            "alpha_init",
            "gamma_init",
            "c_init",
            "v_init_max",
            "alpha_range",
            "mu_range",
            "alpha_ref",
            "hidden",
            "initial_points",
        ],
    ),
    (
        "train",
        &[
            "epochs",
            "batch_size",
            "lr",
            "beta1",
            "beta2",
            "adam_eps",
            "mode",
            "w_equ",
            "w_g",
            "w_u",
            "trace_every",
        ],
    ),
    ("estimator", &["m", "r0", "eps", "eps_t"]),
    (
        "estimate",
        &["operator", "field", "d", "alpha", "gamma", "point", "t", "m_values", "r0_values", "draws"],
    ),
    (
        "abc",
        &[
            "model",
            "draws",
            "tolerance",
            "alpha_prior",
            "mu_prior",
            "sensors",
            "true_alpha",
            "true_mu",
            "modes",
            "grid_points",
        ],
    ),
];

const ORACLE_KEYS: &[&str] = &["operator", "field", "alpha", "gamma", "d", "points", "points_file"];

impl Ini {
    pub fn parse(text: &str) -> Result<Self> {
        let mut ini = Ini::default();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') || s.starts_with(';') {
                continue;
            }
            if let Some(rest) = s.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    return cfg_err(line, format!("unterminated section header '{s}'"));
                };
                let name = name.trim().to_string();
                let known = SECTIONS.iter().any(|(n, _)| *n == name) || name == "oracle";
                if !known {
                    return cfg_err(line, format!("unknown section [{name}]"));
                }
                if ini.section(&name).is_some() {
                    return cfg_err(line, format!("section [{name}] appears twice"));
                }
                ini.sections.push(Section {
                    name,
                    line,
                    entries: Vec::new(),
                });
                continue;
            }
            let Some((key, value)) = s.split_once('=') else {
                return cfg_err(line, format!("expected 'key = value', found '{s}'"));
            };
            let Some(sec) = ini.sections.last_mut() else {
                return cfg_err(line, "key outside of any section");
            };
            let key = key.trim().to_string();
            if sec.entry(&key).is_some() {
                return cfg_err(line, format!("duplicate key '{key}' in [{}]", sec.name));
            }
            sec.entries.push(Entry {
                key,
                value: value.trim().to_string(),
                line,
            });
        }
        for sec in &ini.sections {
            let allowed = SECTIONS
                .iter()
                .find(|(n, _)| *n == sec.name)
                .map_or(ORACLE_KEYS, |(_, keys)| *keys);
            sec.check_keys(allowed)?;
        }
        Ok(ini)
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    /// Section or an empty stand-in.
    pub fn section_or_empty(&self, name: &str) -> Section {
        self.section(name).cloned().unwrap_or(Section {
            name: name.to_string(),
            line: 0,
            entries: Vec::new(),
        })
    }

    /// Normalised text: sections and keys in file order, comments dropped.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        for sec in &self.sections {
            s.push_str(&format!("[{}]\n", sec.name));
            for e in &sec.entries {
                s.push_str(&format!("{} = {}\n", e.key, e.value));
            }
        }
        s
    }
}

/// Run-level settings from `[run]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunSection {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

pub fn run_section(ini: &Ini) -> Result<RunSection> {
    let s = ini.section_or_empty("run");
    Ok(RunSection {
        seed: s.get("seed")?,
        workers: s.get("workers")?,
        out: s.get::<String>("out")?.map(PathBuf::from),
    })
}

fn parse_profile(s: &Section) -> Result<Profile> {
    match s.raw("profile").unwrap_or("fractional") {
        "fractional" => Ok(Profile::Fractional),
        "quadratic" => Ok(Profile::Quadratic),
        other => cfg_err(s.line_of("profile"), format!("unknown profile '{other}'")),
    }
}

fn as_config<T>(r: Result<T>, line: usize) -> Result<T> {
    r.map_err(|e| match e {
        Error::Config(m) => Error::Config(m),
        other => Error::Config(format!("line {line}: {other}")),
    })
}

/// Problem from `[problem]`.
pub fn problem(ini: &Ini) -> Result<ProblemSpec> {
    let Some(s) = ini.section("problem") else {
        return Err(Error::Config("missing [problem] section".into()));
    };
    let d: usize = s.get_or("d", 2)?;
    let family = match s.raw("family") {
        None => return cfg_err(s.line, "[problem] needs 'family'"),
        Some("forward-laplacian") => Family::ForwardLaplacian {
            d,
            alpha: s.get_or("alpha", 1.5)?,
        },
        Some(f @ ("forward-ade" | "inverse-ade")) => {
            let mut v = vec![0.0; d];
            v[0] = 1.0;
            let v = s.list::<f64>("v")?.unwrap_or(v);
            let setup = AdeSetup {
                d,
                coeffs: PdeCoefficients {
                    alpha: s.get_or("alpha", 1.5)?,
                    gamma: Some(s.get_or("gamma", 0.5)?),
                    c: s.get_or("c", 0.1)?,
                    v: Some(v),
                    mu: s.get_or("mu", 0.0)?,
                },
                horizon: s.get_or("horizon", 1.0)?,
                profile: parse_profile(s)?,
            };
            if f == "forward-ade" {
                Family::ForwardAde(setup)
            } else {
                Family::InverseAde {
                    truth: setup,
                    inverse: InverseSetup {
                        sensors: s.get_or("sensors", default_sensor_count(d))?,
                        alpha0: s.get_or("alpha_init", 1.7)?,
                        gamma0: s.get_or("gamma_init", 0.9)?,
                        c0: s.get_or("c_init", 0.5)?,
                        v0_max: s.get_or("v_init_max", 0.1)?,
                    },
                }
            }
        }
        Some("parametric") => Family::ParametricDiffusion {
            d,
            alpha_range: s.pair("alpha_range", (0.5, 1.5))?,
            mu_range: s.pair("mu_range", (-0.5, 0.5))?,
            alpha0: s.get_or("alpha_ref", 1.0)?,
        },
        Some(other) => return cfg_err(s.line_of("family"), format!("unknown family '{other}'")),
    };
    let mut spec = ProblemSpec {
        network: NetworkSpec::standard(1),
        family,
        initial_points: s.get_or("initial_points", 128)?,
    };
    let hidden = s.list::<usize>("hidden")?.unwrap_or_else(|| vec![64; 4]);
    spec.network = NetworkSpec::new(spec.input_dim(), hidden);
    as_config(spec.validate(), s.line)?;
    Ok(spec)
}

pub fn estimator(ini: &Ini) -> Result<EstimatorConfig> {
    let s = ini.section_or_empty("estimator");
    let d = EstimatorConfig::default();
    let cfg = EstimatorConfig {
        m: s.get_or("m", d.m)?,
        r0: s.get_or("r0", d.r0)?,
        eps: s.get_or("eps", d.eps)?,
        eps_t: s.get_or("eps_t", d.eps_t)?,
    };
    as_config(cfg.validate(), s.line)?;
    Ok(cfg)
}

/// Training settings from `[train]` and `[estimator]`.
pub fn train(ini: &Ini, spec: &ProblemSpec, seed: u64) -> Result<TrainConfig> {
    let s = ini.section_or_empty("train");
    let base = TrainConfig::for_problem(spec, seed);
    let mode = match s.raw("mode") {
        None => base.mode,
        Some(m) => as_config(LossMode::from_name(m), s.line_of("mode"))?,
    };
    let cfg = TrainConfig {
        epochs: s.get_or("epochs", base.epochs)?,
        batch_size: s.get_or("batch_size", base.batch_size)?,
        lr: s.get_or("lr", base.lr)?,
        beta1: s.get_or("beta1", base.beta1)?,
        beta2: s.get_or("beta2", base.beta2)?,
        adam_eps: s.get_or("adam_eps", base.adam_eps)?,
        estimator: estimator(ini)?,
        mode,
        weights: LossWeights {
            equ: s.get_or("w_equ", 1.0)?,
            g: s.get_or("w_g", 1.0)?,
            u: s.get_or("w_u", 1.0)?,
        },
        seed,
        trace_every: s.get_or("trace_every", base.trace_every)?,
    };
    as_config(cfg.validate(), s.line)?;
    Ok(cfg)
}

/// Which operator an `estimate` or `oracle` run targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operator {
    Laplacian,
    Caputo,
}

/// Test fields with known reference values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestField {
    /// `(1 - |x|²)_+^{1+α/2}` in space, `e^{-t}` in time.
    Manufactured,
    /// `(1 - |x|²)_+` in space, `t` in time.
    Quadratic,
    Constant,
    /// `exp(1 - 1/(1 - |x|²))` inside the ball and `sin(t)` in time; only a
    /// quadrature reference, so the spatial case needs `d ≤ 3`.
    Bump,
}

fn operator_field(s: &Section) -> Result<(Operator, TestField)> {
    let op = match s.raw("operator").unwrap_or("laplacian") {
        "laplacian" => Operator::Laplacian,
        "caputo" => Operator::Caputo,
        o => return cfg_err(s.line_of("operator"), format!("unknown operator '{o}'")),
    };
    let field = match s.raw("field").unwrap_or("manufactured") {
        "manufactured" => TestField::Manufactured,
        "quadratic" => TestField::Quadratic,
        "constant" => TestField::Constant,
        "bump" => TestField::Bump,
        f => return cfg_err(s.line_of("field"), format!("unknown field '{f}'")),
    };
    Ok((op, field))
}

/// `[estimate]`: an (m, r0) sweep of single-group estimates at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateConfig {
    pub operator: Operator,
    pub field: TestField,
    pub alpha: f64,
    pub gamma: f64,
    pub point: Vec<f64>,
    pub t: f64,
    pub m_values: Vec<usize>,
    pub r0_values: Vec<f64>,
    pub draws: usize,
    pub eps: f64,
    pub eps_t: f64,
}

pub fn estimate(ini: &Ini) -> Result<EstimateConfig> {
    let s = ini.section_or_empty("estimate");
    let (operator, field) = operator_field(&s)?;
    let d: usize = s.get_or("d", 1)?;
    let point = match s.list::<f64>("point")? {
        Some(p) => p,
        None => vec![0.0; d],
    };
    if point.is_empty() {
        return cfg_err(s.line_of("point"), "[estimate] point must have at least one coordinate");
    }
    let est = estimator(ini)?;
    let cfg = EstimateConfig {
        operator,
        field,
        alpha: s.get_or("alpha", 1.5)?,
        gamma: s.get_or("gamma", 0.5)?,
        point,
        t: s.get_or("t", 0.5)?,
        m_values: s.list("m_values")?.unwrap_or_else(|| vec![5, 10, 20, 40]),
        r0_values: s.list("r0_values")?.unwrap_or_else(|| vec![est.r0]),
        draws: s.get_or("draws", 100_000)?,
        eps: est.eps,
        eps_t: est.eps_t,
    };
    if cfg.m_values.contains(&0) || cfg.draws < 2 {
        return cfg_err(s.line, "[estimate] needs m >= 1 and at least two draws");
    }
    if operator == Operator::Laplacian {
        as_config(PdeCoefficients::laplacian(cfg.alpha).validate(), s.line_of("alpha"))?;
        for &r0 in &cfg.r0_values {
            if !(cfg.eps < r0) {
                return cfg_err(s.line_of("r0_values"), format!("r0 = {r0} must exceed eps = {}", cfg.eps));
            }
        }
    } else if !(cfg.gamma > 0.0 && cfg.gamma < 1.0 && cfg.t > 0.0) {
        return cfg_err(s.line, "[estimate] caputo needs 0 < gamma < 1 and t > 0");
    }
    Ok(cfg)
}

/// Where ABC predictions come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbcModel {
    Oracle,
    Surrogate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbcRun {
    pub model: AbcModel,
    pub config: AbcConfig,
    pub modes: usize,
    pub grid_points: usize,
}

/// `[abc]`. Observations are generated from `(true_alpha, true_mu)` with
/// the oracle family.
pub fn abc(ini: &Ini) -> Result<AbcRun> {
    let s = ini.section_or_empty("abc");
    let model = match s.raw("model").unwrap_or("oracle") {
        "oracle" => AbcModel::Oracle,
        "surrogate" => AbcModel::Surrogate,
        m => return cfg_err(s.line_of("model"), format!("unknown ABC model '{m}'")),
    };
    let mut cfg = AbcConfig::standard();
    cfg.n_draws = s.get_or("draws", cfg.n_draws)?;
    cfg.tolerance = s.get_or("tolerance", cfg.tolerance)?;
    cfg.alpha_prior = s.pair("alpha_prior", cfg.alpha_prior)?;
    cfg.mu_prior = s.pair("mu_prior", cfg.mu_prior)?;
    if let Some(p) = s.points("sensors")? {
        cfg.sensors = p;
    }
    let modes = s.get_or("modes", 24)?;
    let true_alpha: f64 = s.get_or("true_alpha", 1.0)?;
    let true_mu: f64 = s.get_or("true_mu", 0.0)?;
    let d = cfg.sensors.first().map_or(2, Vec::len);
    if cfg.sensors.iter().any(|x| x.len() != d) {
        return cfg_err(s.line_of("sensors"), "[abc] sensors must share one dimension");
    }
    let oracle = crate::abc::OracleModel {
        d,
        alpha0: 1.0,
        modes,
    };
    use crate::abc::ForwardModel;
    cfg.observations = as_config(oracle.predict(true_alpha, true_mu, &cfg.sensors), s.line)?;
    as_config(cfg.validate(), s.line)?;
    Ok(AbcRun {
        model,
        config: cfg,
        modes,
        grid_points: s.get_or("grid_points", 256)?,
    })
}

/// `[oracle]`: reference values at listed points.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRun {
    pub operator: Operator,
    pub field: TestField,
    pub alpha: f64,
    pub gamma: f64,
    pub d: usize,
    pub points: Vec<Vec<f64>>,
}

pub fn oracle(ini: &Ini) -> Result<OracleRun> {
    let s = ini.section_or_empty("oracle");
    let (operator, field) = operator_field(&s)?;
    let d: usize = s.get_or("d", 1)?;
    let width = if operator == Operator::Caputo { 1 } else { d };
    if operator == Operator::Laplacian && !(1..=3).contains(&d) {
        return cfg_err(s.line_of("d"), format!("the quadrature oracle supports d <= 3, got d = {d}"));
    }
    let points = match (s.entry("points"), s.raw("points_file")) {
        (Some(e), None) => parse_points(&e.value, e.line, "[oracle] points")?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .or_else(|e| cfg_err(s.line_of("points_file"), format!("cannot read '{path}': {e}")))?;
            let mut pts = Vec::new();
            for (k, row) in text.lines().enumerate() {
                if row.trim().is_empty() {
                    continue;
                }
                let p = parse_points(row, s.line_of("points_file"), &format!("{path} line {}", k + 1))?;
                pts.extend(p);
            }
            pts
        }
        (Some(_), Some(_)) => return cfg_err(s.line, "[oracle] give either points or points_file"),
        (None, None) => Vec::new(),
    };
    for (k, p) in points.iter().enumerate() {
        if p.len() != width {
            return cfg_err(
                s.line_of("points"),
                format!("[oracle] row {} has {} coordinates, expected {width}", k + 1, p.len()),
            );
        }
    }
    Ok(OracleRun {
        operator,
        field,
        alpha: s.get_or("alpha", 1.5)?,
        gamma: s.get_or("gamma", 0.5)?,
        d,
        points,
    })
}
