//! Run configuration: flat `key = value` lines grouped under `[section]`
//! headers, `#` comments.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use plateau_core::Point;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{field}: missing")]
    Missing { field: String },
    #[error("{field}: {reason} (got {value:?})")]
    Invalid { field: String, value: String, reason: String },
    #[error("{field}: unknown key")]
    Unknown { field: String },
    #[error("{field}: set twice (lines {first} and {second})")]
    Duplicate { field: String, first: usize, second: usize },
    #[error("{field}: file {path} does not exist")]
    NoSuchFile { field: String, path: PathBuf },
}

/// `section.key → (line, value)`; keys before any header live in `run`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    pub entries: BTreeMap<String, (usize, String)>,
}

pub fn parse_config(text: &str) -> Result<RawConfig, ConfigError> {
    let mut raw = RawConfig::default();
    let mut section = String::from("run");
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .map(str::trim)
                .filter(|n| !n.is_empty() && n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'))
                .ok_or_else(|| ConfigError::Syntax { line: line_no, message: format!("bad section header {body:?}") })?;
            section = name.to_string();
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err(ConfigError::Syntax { line: line_no, message: "expected `key = value`".into() });
        };
        let key = key.trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(ConfigError::Syntax { line: line_no, message: format!("bad key {key:?}") });
        }
        let field = format!("{section}.{key}");
        if let Some((first, _)) = raw.entries.get(&field) {
            return Err(ConfigError::Duplicate { field, first: *first, second: line_no });
        }
        raw.entries.insert(field, (line_no, value.trim().to_string()));
    }
    Ok(raw)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Solve,
    Simulate,
    Sweep,
    Compare,
    Validate,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GroupSource {
    Cyclic(usize),
    Symmetric(usize),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum LengthSource {
    Uniform(f64),
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DatumKind {
    Pair { a: Point, b: Point },
    FourPoint,
    Smooth { beta: f64 },
    Constant { director: Point },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub group: GroupSource,
    pub lengths: LengthSource,
    pub spec: Option<PathBuf>,
    pub chain: Option<PathBuf>,
    pub max_steiner: usize,
    pub runner_ups: usize,
    pub n: usize,
    pub radius: f64,
    pub datum: DatumKind,
    pub p: f64,
    pub p_list: Vec<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub perturb: f64,
    pub eta: f64,
    /// Ball radius of the η-map, in grid spacings.
    pub eta_radius: f64,
    /// Tube radius for segment densities, in grid spacings.
    pub tube_radius: f64,
    pub threshold: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: None,
            group: GroupSource::Cyclic(2),
            lengths: LengthSource::Uniform(plateau_core::rp2_systole()),
            spec: None,
            chain: None,
            max_steiner: 1,
            runner_ups: 3,
            n: 24,
            radius: 1.0,
            datum: DatumKind::Pair { a: -Point::z(), b: Point::z() },
            p: 1.8,
            p_list: vec![1.7, 1.8, 1.9],
            tol: 1e-6,
            max_iter: 5000,
            restarts: 0,
            perturb: 0.1,
            eta: 0.5,
            eta_radius: 3.0,
            tube_radius: 3.0,
            threshold: 0.05,
        }
    }
}

const KEYS: &[&str] = &[
    "run.seed",
    "run.out",
    "solve.group",
    "solve.lengths",
    "solve.spec",
    "solve.chain",
    "solve.max_steiner",
    "solve.runner_ups",
    "grid.n",
    "grid.radius",
    "boundary.datum",
    "boundary.a",
    "boundary.b",
    "boundary.beta",
    "boundary.director",
    "simulate.p",
    "simulate.p_list",
    "simulate.tol",
    "simulate.max_iter",
    "simulate.restarts",
    "simulate.perturb",
    "diagnostics.eta",
    "diagnostics.eta_radius",
    "diagnostics.tube_radius",
    "diagnostics.threshold",
];

struct Reader<'a> {
    raw: &'a RawConfig,
    base: &'a Path,
}

impl Reader<'_> {
    fn get(&self, field: &str) -> Option<&str> {
        self.raw.entries.get(field).map(|(_, v)| v.as_str())
    }

    fn invalid(field: &str, value: &str, reason: impl Into<String>) -> ConfigError {
        ConfigError::Invalid { field: field.into(), value: value.into(), reason: reason.into() }
    }

    fn parse<T: std::str::FromStr>(&self, field: &str, default: T) -> Result<T, ConfigError> {
        match self.get(field) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Self::invalid(field, v, "not a valid value")),
        }
    }

    fn float(&self, field: &str, default: f64) -> Result<f64, ConfigError> {
        let v = self.parse(field, default)?;
        if !v.is_finite() {
            return Err(Self::invalid(field, self.get(field).unwrap_or(""), "not finite"));
        }
        Ok(v)
    }

    fn point(&self, field: &str, default: Point) -> Result<Point, ConfigError> {
        let Some(v) = self.get(field) else { return Ok(default) };
        let parts: Vec<f64> = v
            .split(',')
            .map(|t| t.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<_>>()
            .ok_or_else(|| Self::invalid(field, v, "expected `x, y, z`"))?;
        match parts[..] {
            [x, y, z] => Ok(Point::new(x, y, z)),
            _ => Err(Self::invalid(field, v, "expected three coordinates")),
        }
    }

    fn file(&self, field: &str) -> Result<Option<PathBuf>, ConfigError> {
        let Some(v) = self.get(field) else { return Ok(None) };
        let path = self.base.join(v);
        if !path.is_file() {
            return Err(ConfigError::NoSuchFile { field: field.into(), path });
        }
        Ok(Some(path))
    }
}

fn check_p(field: &str, p: f64) -> Result<(), ConfigError> {
    if p > 1.0 && p < 2.0 {
        Ok(())
    } else {
        Err(Reader::invalid(field, &p.to_string(), "p must lie in (1, 2)"))
    }
}

impl RunConfig {
    /// Typed configuration; relative paths are resolved against `base`.
    pub fn from_raw(raw: &RawConfig, base: &Path) -> Result<Self, ConfigError> {
        if let Some(field) = raw.entries.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(ConfigError::Unknown { field: field.clone() });
        }
        let r = Reader { raw, base };
        let d = Self::default();
        let group = match r.get("solve.group") {
            None => d.group,
            Some(v) => {
                let sized = |prefix: &str| v.strip_prefix(prefix).map(|n| n.trim().parse::<usize>());
                if let Some(n) = sized("cyclic:") {
                    GroupSource::Cyclic(n.ok().filter(|&n| (1..=4096).contains(&n)).ok_or_else(|| Reader::invalid("solve.group", v, "bad order"))?)
                } else if let Some(n) = sized("symmetric:") {
                    GroupSource::Symmetric(n.ok().filter(|&n| (1..=6).contains(&n)).ok_or_else(|| Reader::invalid("solve.group", v, "degree must be 1..=6"))?)
                } else {
                    GroupSource::File(r.file("solve.group")?.expect("present"))
                }
            }
        };
        let lengths = match r.get("solve.lengths") {
            None => d.lengths,
            Some("rp2") => LengthSource::Uniform(plateau_core::rp2_systole()),
            Some(v) => match v.strip_prefix("uniform:") {
                Some(l) => LengthSource::Uniform(
                    l.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|l| *l > 0.0 && l.is_finite())
                        .ok_or_else(|| Reader::invalid("solve.lengths", v, "expected a positive length"))?,
                ),
                None => LengthSource::File(r.file("solve.lengths")?.expect("present")),
            },
        };
        let datum = match r.get("boundary.datum").unwrap_or("pair") {
            "pair" => DatumKind::Pair {
                a: r.point("boundary.a", -Point::z() * r.float("grid.radius", d.radius)?)?,
                b: r.point("boundary.b", Point::z() * r.float("grid.radius", d.radius)?)?,
            },
            "four_point" => DatumKind::FourPoint,
            "smooth" => DatumKind::Smooth { beta: r.float("boundary.beta", PI_OVER_12)? },
            "constant" => {
                let director = r.point("boundary.director", Point::z())?;
                if director.norm() == 0.0 {
                    return Err(Reader::invalid("boundary.director", r.get("boundary.director").unwrap_or(""), "zero vector"));
                }
                DatumKind::Constant { director }
            }
            other => return Err(Reader::invalid("boundary.datum", other, "expected pair, four_point, smooth or constant")),
        };
        let p_list = match r.get("simulate.p_list") {
            None => d.p_list,
            Some(v) => v
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| Reader::invalid("simulate.p_list", v, "expected comma-separated numbers"))?,
        };
        let cfg = Self {
            seed: r.parse("run.seed", d.seed)?,
            out: r.get("run.out").map(|v| base.join(v)),
            group,
            lengths,
            spec: r.file("solve.spec")?,
            chain: r.file("solve.chain")?,
            max_steiner: r.parse("solve.max_steiner", d.max_steiner)?,
            runner_ups: r.parse("solve.runner_ups", d.runner_ups)?,
            n: r.parse("grid.n", d.n)?,
            radius: r.float("grid.radius", d.radius)?,
            datum,
            p: r.float("simulate.p", d.p)?,
            p_list,
            tol: r.float("simulate.tol", d.tol)?,
            max_iter: r.parse("simulate.max_iter", d.max_iter)?,
            restarts: r.parse("simulate.restarts", d.restarts)?,
            perturb: r.float("simulate.perturb", d.perturb)?,
            eta: r.float("diagnostics.eta", d.eta)?,
            eta_radius: r.float("diagnostics.eta_radius", d.eta_radius)?,
            tube_radius: r.float("diagnostics.tube_radius", d.tube_radius)?,
            threshold: r.float("diagnostics.threshold", d.threshold)?,
        };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), ConfigError> {
        check_p("simulate.p", self.p)?;
        for &p in &self.p_list {
            check_p("simulate.p_list", p)?;
        }
        if self.n < 8 {
            return Err(Reader::invalid("grid.n", &self.n.to_string(), "at least 8 nodes per axis"));
        }
        if self.radius <= 0.0 {
            return Err(Reader::invalid("grid.radius", &self.radius.to_string(), "must be positive"));
        }
        if self.tol <= 0.0 || self.max_iter == 0 {
            return Err(Reader::invalid("simulate.tol", &self.tol.to_string(), "tolerance and max_iter must be positive"));
        }
        if self.max_steiner > plateau_core::plateau::MAX_STEINER {
            return Err(Reader::invalid("solve.max_steiner", &self.max_steiner.to_string(), "too many Steiner vertices"));
        }
        for (field, v) in [("diagnostics.eta_radius", self.eta_radius), ("diagnostics.tube_radius", self.tube_radius)] {
            if v <= 0.0 {
                return Err(Reader::invalid(field, &v.to_string(), "must be positive"));
            }
        }
        if self.eta_radius < 3.0 {
            return Err(Reader::invalid("diagnostics.eta_radius", &self.eta_radius.to_string(), "at least 3 spacings"));
        }
        Ok(())
    }

    /// Parse `text` with paths relative to `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        Self::from_raw(&parse_config(text)?, base)
    }
}

const PI_OVER_12: f64 = std::f64::consts::PI / 12.0;
