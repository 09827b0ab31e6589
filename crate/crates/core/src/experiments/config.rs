use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Serialize, Serializer};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::exact::DEFAULT_STATE_CAP;
use crate::model::{default_mesh, stationary_density, DensityProfile, ModelParams, ProfileSet, TestBasis};

/// Closed-form or tabulated density profile on `[0,1]`.
///
/// Written in configuration files as `constant(c)`, `linear(a, b)` (from `a`
/// at `x = 0` to `b` at `x = 1`), `bump(c, h)` (`c + h sin(pi x)`),
/// `stationary` or `file(path)`, the last naming a text grid of cell values
/// separated by commas or whitespace.
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileExpr {
    Constant(f64),
    Linear(f64, f64),
    Bump(f64, f64),
    Stationary,
    Grid { path: PathBuf, values: Vec<f64> },
}

impl ProfileExpr {
    /// Parses an expression; relative grid paths are resolved against `base`.
    pub fn parse(text: &str, base: Option<&Path>) -> std::result::Result<Self, String> {
        let text = text.trim();
        if text == "stationary" {
            return Ok(Self::Stationary);
        }
        let (name, rest) = text
            .split_once('(')
            .ok_or_else(|| format!("expected constant(..), linear(..), bump(..), stationary or file(..), got `{text}`"))?;
        let inner = rest
            .strip_suffix(')')
            .ok_or_else(|| format!("missing closing parenthesis in `{text}`"))?
            .trim();
        let numbers = || -> std::result::Result<Vec<f64>, String> {
            inner
                .split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|_| format!("`{}` is not a number", t.trim())))
                .collect()
        };
        let arity = |v: Vec<f64>, k: usize| {
            if v.len() == k {
                Ok(v)
            } else {
                Err(format!("{} takes {k} argument(s), got {}", name.trim(), v.len()))
            }
        };
        let expr = match name.trim() {
            "constant" => Self::Constant(arity(numbers()?, 1)?[0]),
            "linear" => {
                let v = arity(numbers()?, 2)?;
                Self::Linear(v[0], v[1])
            }
            "bump" => {
                let v = arity(numbers()?, 2)?;
                Self::Bump(v[0], v[1])
            }
            "file" => {
                let raw = PathBuf::from(inner.trim_matches('"'));
                let path = match base {
                    Some(b) if raw.is_relative() => b.join(&raw),
                    _ => raw.clone(),
                };
                let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
                let values = text
                    .split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|t| !t.is_empty())
                    .map(|t| t.parse::<f64>().map_err(|_| format!("`{t}` in {} is not a number", path.display())))
                    .collect::<std::result::Result<Vec<f64>, String>>()?;
                if values.is_empty() {
                    return Err(format!("{} holds no values", path.display()));
                }
                Self::Grid { path: raw, values }
            }
            other => return Err(format!("unknown profile `{other}`")),
        };
        expr.check_range()?;
        Ok(expr)
    }

    fn check_range(&self) -> std::result::Result<(), String> {
        let (lo, hi) = match self {
            Self::Constant(c) => (*c, *c),
            Self::Linear(a, b) => (a.min(*b), a.max(*b)),
            Self::Bump(c, h) => (c.min(c + h), c.max(c + h)),
            Self::Stationary => (0.0, 1.0),
            Self::Grid { values, .. } => values.iter().fold((1.0f64, 0.0f64), |(l, h), &v| (l.min(v), h.max(v))),
        };
        if (0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi) {
            Ok(())
        } else {
            Err(format!("profile `{self}` leaves [0,1]"))
        }
    }

    /// Value at `x`; grids are read as cell values.
    pub fn eval(&self, p: &ModelParams, x: f64) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::Linear(a, b) => a + (b - a) * x,
            Self::Bump(c, h) => c + h * (std::f64::consts::PI * x).sin(),
            Self::Stationary => stationary_density(p, x),
            Self::Grid { values, .. } => {
                let k = ((x * values.len() as f64) as usize).min(values.len() - 1);
                values[k]
            }
        }
    }

    pub fn profile(&self, p: &ModelParams, mesh: usize) -> Result<DensityProfile> {
        DensityProfile::from_fn(mesh, |x| self.eval(p, x))
    }
}

impl fmt::Display for ProfileExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(c) => write!(f, "constant({c})"),
            Self::Linear(a, b) => write!(f, "linear({a}, {b})"),
            Self::Bump(c, h) => write!(f, "bump({c}, {h})"),
            Self::Stationary => write!(f, "stationary"),
            Self::Grid { path, .. } => write!(f, "file({})", path.display()),
        }
    }
}

impl Serialize for ProfileExpr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            // The values, not the path, determine the run.
            Self::Grid { values, .. } => values.serialize(s),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSection {
    /// Scale `N`, or a sweep of scales.
    pub n: Vec<usize>,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SetSection {
    pub center: ProfileExpr,
    pub radius: f64,
    pub basis: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSection {
    pub seed: u64,
    pub workers: usize,
    /// Largest state space the exact layer may assemble.
    pub cap: usize,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HittingSection {
    /// Scale of the simulation branch; the last scale of the sweep if unset.
    pub sim_n: usize,
    pub samples: usize,
    pub horizon: f64,
    pub cdf_points: usize,
    pub conditioned_center: ProfileExpr,
    pub conditioned_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingSection {
    pub exact_n: Vec<usize>,
    pub coupling_n: Vec<usize>,
    pub coupling_runs: usize,
    pub grid_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingSection {
    /// Profiles sampled from the target ball.
    pub profiles: usize,
    pub n_x: usize,
    pub dt: f64,
    pub ladder: Vec<f64>,
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HydroSection {
    pub n: usize,
    pub init: ProfileExpr,
    pub replicas: usize,
    pub frames: Vec<f64>,
    /// Half-width, in sites, of the moving average applied before the sup.
    pub window: usize,
    pub n_x: usize,
    pub n_t: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LdpSection {
    pub profile: ProfileExpr,
    /// End profile of a straight-line path, evaluated next to the heat flow.
    pub target: Option<ProfileExpr>,
    pub horizon: f64,
    pub n_t: usize,
    pub n_x: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuasiSection {
    pub profile: ProfileExpr,
    pub ladder: Vec<f64>,
    pub dt: f64,
    pub n_x: usize,
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifySection {
    pub criteria: Vec<usize>,
    /// Criterion whose tolerances are made unattainable, to exercise the
    /// failure path.
    pub perturb: Option<usize>,
}

/// Resolved configuration of one command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub set: SetSection,
    pub run: RunSection,
    pub hitting: HittingSection,
    pub mixing: MixingSection,
    pub scaling: ScalingSection,
    pub hydro: HydroSection,
    pub ldp: LdpSection,
    pub quasipotential: QuasiSection,
    pub verify: VerifySection,
    /// Dotted keys that took their default value.
    #[serde(skip)]
    pub defaulted: Vec<String>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub cap: Option<usize>,
    pub out: Option<PathBuf>,
    pub perturb: Option<usize>,
}

/// Walks a parsed table, recording which keys were read and which were
/// defaulted, and names the offending key in every error.
struct Reader<'a> {
    root: &'a Table,
    base: Option<&'a Path>,
    seen: BTreeSet<String>,
    defaulted: Vec<String>,
}

impl<'a> Reader<'a> {
    fn raw(&mut self, section: &str, key: &str) -> Result<Option<&'a Value>> {
        let field = format!("{section}.{key}");
        self.seen.insert(field.clone());
        match self.root.get(section) {
            None => Ok(None),
            Some(Value::Table(t)) => Ok(t.get(key)),
            Some(_) => Err(Error::validation(section, "expected a section")),
        }
    }

    fn get<T>(&mut self, section: &str, key: &str, default: T, conv: impl Fn(&Value) -> std::result::Result<T, String>) -> Result<T> {
        match self.raw(section, key)? {
            Some(v) => conv(v).map_err(|m| Error::validation(format!("{section}.{key}"), m)),
            None => {
                self.defaulted.push(format!("{section}.{key}"));
                Ok(default)
            }
        }
    }

    fn float(&mut self, section: &str, key: &str, default: f64) -> Result<f64> {
        self.get(section, key, default, as_float)
    }

    fn count(&mut self, section: &str, key: &str, default: usize) -> Result<usize> {
        self.get(section, key, default, as_count)
    }

    fn counts(&mut self, section: &str, key: &str, default: Vec<usize>) -> Result<Vec<usize>> {
        self.get(section, key, default, |v| match v {
            Value::Array(a) => a.iter().map(as_count).collect(),
            other => Ok(vec![as_count(other)?]),
        })
    }

    fn floats(&mut self, section: &str, key: &str, default: Vec<f64>) -> Result<Vec<f64>> {
        self.get(section, key, default, |v| match v {
            Value::Array(a) => a.iter().map(as_float).collect(),
            other => Ok(vec![as_float(other)?]),
        })
    }

    fn profile(&mut self, section: &str, key: &str, default: ProfileExpr) -> Result<ProfileExpr> {
        let base = self.base;
        self.get(section, key, default, |v| match v {
            Value::String(s) => ProfileExpr::parse(s, base),
            _ => Err("expected a profile expression string".into()),
        })
    }

    fn optional_profile(&mut self, section: &str, key: &str) -> Result<Option<ProfileExpr>> {
        let base = self.base;
        match self.raw(section, key)? {
            None => Ok(None),
            Some(Value::String(s)) => ProfileExpr::parse(s, base)
                .map(Some)
                .map_err(|m| Error::validation(format!("{section}.{key}"), m)),
            Some(_) => Err(Error::validation(format!("{section}.{key}"), "expected a profile expression string")),
        }
    }

    fn unknown_keys(&self) -> Result<()> {
        for (section, value) in self.root {
            let Value::Table(t) = value else {
                return Err(Error::validation(section, "top-level keys must sit inside a section"));
            };
            if !SECTIONS.contains(&section.as_str()) {
                return Err(Error::validation(section, "unknown section"));
            }
            for key in t.keys() {
                let field = format!("{section}.{key}");
                if !self.seen.contains(&field) {
                    return Err(Error::validation(field, "unknown key"));
                }
            }
        }
        Ok(())
    }
}

const SECTIONS: [&str; 10] = [
    "model",
    "set",
    "run",
    "hitting",
    "mixing",
    "scaling",
    "hydro",
    "ldp",
    "quasipotential",
    "verify",
];

fn as_float(v: &Value) -> std::result::Result<f64, String> {
    match v {
        Value::Float(x) if x.is_finite() => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(format!("expected a finite number, got {v}")),
    }
}

fn as_count(v: &Value) -> std::result::Result<usize, String> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(format!("expected a nonnegative integer, got {v}")),
    }
}

fn check(ok: bool, field: &str, message: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::validation(field, message))
    }
}

impl ExperimentConfig {
    /// Every field at its default.
    pub fn defaults() -> Self {
        Self::from_table(&Table::new(), None).expect("defaults are valid")
    }

    pub fn from_toml_str(text: &str, base: Option<&Path>) -> Result<Self> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| {
            let field = e.span().map(|s| format!("byte {}", s.start)).unwrap_or_else(|| "file".into());
            Error::validation(field, e.message().to_string())
        })?;
        Self::from_table(&table, base)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::validation("--config", format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text, path.parent())
    }

    fn from_table(root: &Table, base: Option<&Path>) -> Result<Self> {
        let mut r = Reader {
            root,
            base,
            seen: BTreeSet::new(),
            defaulted: Vec::new(),
        };
        let model = ModelSection {
            n: r.counts("model", "n", vec![8])?,
            alpha: r.float("model", "alpha", 0.3)?,
            beta: r.float("model", "beta", 0.3)?,
        };
        let set = SetSection {
            center: r.profile("set", "center", ProfileExpr::Constant(0.85))?,
            radius: r.float("set", "radius", 0.05)?,
            basis: r.count("set", "basis", crate::model::DEFAULT_BASIS_ORDER)?,
        };
        let run = RunSection {
            seed: r.get("run", "seed", 1, |v| match v {
                Value::Integer(i) if *i >= 0 => Ok(*i as u64),
                _ => Err(format!("expected a nonnegative integer, got {v}")),
            })?,
            workers: r.count("run", "workers", 1)?,
            cap: r.count("run", "cap", DEFAULT_STATE_CAP)?,
            out: r.get("run", "out", PathBuf::from("out"), |v| match v {
                Value::String(s) => Ok(PathBuf::from(s)),
                _ => Err("expected a path string".into()),
            })?,
        };
        let last_n = *model.n.last().unwrap_or(&8);
        let hitting = HittingSection {
            sim_n: r.count("hitting", "sim_n", last_n)?,
            samples: r.count("hitting", "samples", 2000)?,
            horizon: r.float("hitting", "horizon", 1e9)?,
            cdf_points: r.count("hitting", "cdf_points", 50)?,
            conditioned_center: r.profile("hitting", "conditioned_center", ProfileExpr::Constant(0.45))?,
            conditioned_radius: r.float("hitting", "conditioned_radius", 0.05)?,
        };
        let mixing = MixingSection {
            exact_n: r.counts("mixing", "exact_n", vec![5, 6, 8])?,
            coupling_n: r.counts("mixing", "coupling_n", vec![12, 16])?,
            coupling_runs: r.count("mixing", "coupling_runs", 400)?,
            grid_points: r.count("mixing", "grid_points", 80)?,
        };
        let scaling = ScalingSection {
            profiles: r.count("scaling", "profiles", 4)?,
            n_x: r.count("scaling", "n_x", 64)?,
            dt: r.float("scaling", "dt", 1.0 / 32.0)?,
            ladder: r.floats("scaling", "ladder", vec![0.5, 1.0, 2.0, 4.0])?,
            max_iter: r.count("scaling", "max_iter", 3000)?,
        };
        let hydro = HydroSection {
            n: r.count("hydro", "n", 64)?,
            init: r.profile("hydro", "init", ProfileExpr::Constant(1.0))?,
            replicas: r.count("hydro", "replicas", 200)?,
            frames: r.floats("hydro", "frames", vec![0.05, 0.1, 0.2])?,
            window: r.count("hydro", "window", 3)?,
            n_x: r.count("hydro", "n_x", 256)?,
            n_t: r.count("hydro", "n_t", 800)?,
        };
        let ldp = LdpSection {
            profile: r.profile("ldp", "profile", ProfileExpr::Bump(0.3, 0.15))?,
            target: r.optional_profile("ldp", "target")?,
            horizon: r.float("ldp", "horizon", 1.0)?,
            n_t: r.count("ldp", "n_t", 200)?,
            n_x: r.count("ldp", "n_x", 200)?,
        };
        let quasipotential = QuasiSection {
            profile: r.profile("quasipotential", "profile", ProfileExpr::Constant(0.5))?,
            ladder: r.floats("quasipotential", "ladder", vec![0.5, 1.0, 2.0, 4.0])?,
            dt: r.float("quasipotential", "dt", 1.0 / 32.0)?,
            n_x: r.count("quasipotential", "n_x", 128)?,
            max_iter: r.count("quasipotential", "max_iter", 5000)?,
        };
        let verify = VerifySection {
            criteria: r.counts("verify", "criteria", (1..=14).collect())?,
            perturb: match r.raw("verify", "perturb")? {
                None => None,
                Some(v) => Some(as_count(v).map_err(|m| Error::validation("verify.perturb", m))?),
            },
        };
        r.unknown_keys()?;
        let cfg = Self {
            model,
            set,
            run,
            hitting,
            mixing,
            scaling,
            hydro,
            ldp,
            quasipotential,
            verify,
            defaulted: r.defaulted,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        let mut take = |key: &str| self.defaulted.retain(|k| k != key);
        if let Some(s) = o.seed {
            take("run.seed");
            self.run.seed = s;
        }
        if let Some(w) = o.workers {
            take("run.workers");
            self.run.workers = w;
        }
        if let Some(c) = o.cap {
            take("run.cap");
            self.run.cap = c;
        }
        if let Some(out) = &o.out {
            take("run.out");
            self.run.out = out.clone();
        }
        if o.perturb.is_some() {
            self.verify.perturb = o.perturb;
        }
        self.validate()
    }

    /// Range checks; each error names the field.
    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        check(!m.n.is_empty(), "model.n", "needs at least one scale")?;
        check(m.n.iter().all(|&n| n >= 2), "model.n", "every scale must be at least 2")?;
        check(m.n.windows(2).all(|w| w[0] < w[1]), "model.n", "a sweep must be strictly increasing")?;
        check(m.alpha > 0.0 && m.alpha < 1.0, "model.alpha", "must lie in (0,1)")?;
        check(m.beta > 0.0 && m.beta < 1.0, "model.beta", "must lie in (0,1)")?;
        check(m.alpha <= m.beta, "model.beta", "must be at least model.alpha")?;
        check(self.set.radius > 0.0, "set.radius", "must be positive")?;
        check(self.set.basis >= 1, "set.basis", "must be at least 1")?;
        check(self.run.workers >= 1, "run.workers", "must be at least 1")?;
        check(self.run.cap >= 2, "run.cap", "must be at least 2")?;
        let h = &self.hitting;
        check(h.sim_n >= 2, "hitting.sim_n", "must be at least 2")?;
        check(h.samples >= 2, "hitting.samples", "must be at least 2")?;
        check(h.horizon > 0.0, "hitting.horizon", "must be positive")?;
        check(h.cdf_points >= 2, "hitting.cdf_points", "must be at least 2")?;
        check(h.conditioned_radius > 0.0, "hitting.conditioned_radius", "must be positive")?;
        let x = &self.mixing;
        check(x.exact_n.iter().all(|&n| n >= 2), "mixing.exact_n", "every scale must be at least 2")?;
        check(x.coupling_n.iter().all(|&n| n >= 2), "mixing.coupling_n", "every scale must be at least 2")?;
        check(x.coupling_runs >= 100, "mixing.coupling_runs", "must be at least 100")?;
        check(x.grid_points >= 2, "mixing.grid_points", "must be at least 2")?;
        let s = &self.scaling;
        check(s.profiles >= 1, "scaling.profiles", "must be at least 1")?;
        check(s.n_x >= 2, "scaling.n_x", "must be at least 2")?;
        check(s.dt > 0.0, "scaling.dt", "must be positive")?;
        check(increasing_positive(&s.ladder), "scaling.ladder", "must be positive and increasing")?;
        let d = &self.hydro;
        check(d.n >= 2, "hydro.n", "must be at least 2")?;
        check(d.replicas >= 1, "hydro.replicas", "must be at least 1")?;
        check(
            !d.frames.is_empty() && d.frames.windows(2).all(|w| w[0] < w[1]) && d.frames[0] >= 0.0,
            "hydro.frames",
            "must be nonnegative and increasing",
        )?;
        check(d.n_x >= 2 && d.n_x % d.n == 0, "hydro.n_x", "must be a multiple of hydro.n")?;
        check(d.n_t >= 1, "hydro.n_t", "must be at least 1")?;
        let l = &self.ldp;
        check(l.horizon > 0.0, "ldp.horizon", "must be positive")?;
        check(l.n_t >= 1, "ldp.n_t", "must be at least 1")?;
        check(l.n_x >= 2, "ldp.n_x", "must be at least 2")?;
        let q = &self.quasipotential;
        check(increasing_positive(&q.ladder), "quasipotential.ladder", "must be positive and increasing")?;
        check(q.dt > 0.0, "quasipotential.dt", "must be positive")?;
        check(q.n_x >= 2, "quasipotential.n_x", "must be at least 2")?;
        let v = &self.verify;
        check(v.criteria.iter().all(|c| (1..=14).contains(c)), "verify.criteria", "criteria are numbered 1 to 14")?;
        check(v.perturb.is_none_or(|c| (1..=14).contains(&c)), "verify.perturb", "criteria are numbered 1 to 14")?;
        Ok(())
    }

    pub fn params(&self, n: usize) -> Result<ModelParams> {
        ModelParams::new(n, self.model.alpha, self.model.beta).map_err(|e| Error::validation("model", e.to_string()))
    }

    /// Ball of radius `set.radius` around `set.center` at scale `n`.
    pub fn target_set(&self, n: usize) -> Result<ProfileSet> {
        let p = self.params(n)?;
        self.ball(&self.set.center, self.set.radius, &p)
    }

    pub fn conditioned_set(&self, n: usize) -> Result<ProfileSet> {
        let p = self.params(n)?;
        self.ball(&self.hitting.conditioned_center, self.hitting.conditioned_radius, &p)
    }

    fn ball(&self, center: &ProfileExpr, radius: f64, p: &ModelParams) -> Result<ProfileSet> {
        let basis = TestBasis::new(self.set.basis)?;
        ProfileSet::new(center.profile(p, default_mesh(p.n))?, radius, basis)
    }

    /// SHA-256 of the resolved configuration, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("configuration serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn increasing_positive(v: &[f64]) -> bool {
    !v.is_empty() && v[0] > 0.0 && v.windows(2).all(|w| w[0] < w[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expressions_parse_and_print() {
        for text in ["constant(0.5)", "linear(0.2, 0.8)", "bump(0.3, 0.15)", "stationary"] {
            let e = ProfileExpr::parse(text, None).unwrap();
            assert_eq!(e.to_string(), text);
        }
        let p = ModelParams::new(4, 0.2, 0.8).unwrap();
        assert_eq!(ProfileExpr::parse("linear(0.2,0.8)", None).unwrap().eval(&p, 0.5), 0.5);
        assert!(ProfileExpr::parse("constant(1.2)", None).is_err());
        assert!(ProfileExpr::parse("bump(0.9, 0.2)", None).is_err());
        assert!(ProfileExpr::parse("linear(0.2)", None).is_err());
        assert!(ProfileExpr::parse("wave(0.2)", None).is_err());
    }

    #[test]
    fn grid_files_resolve_against_the_config() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("g.txt"), "0.1, 0.2\n0.3 0.4\n").unwrap();
        let e = ProfileExpr::parse("file(g.txt)", Some(dir.path())).unwrap();
        let p = ModelParams::new(4, 0.2, 0.8).unwrap();
        assert_eq!(e.eval(&p, 0.6), 0.3);
        assert_eq!(serde_json::to_string(&e).unwrap(), "[0.1,0.2,0.3,0.4]");
    }

    #[test]
    fn defaults_are_recorded() {
        let c = ExperimentConfig::from_toml_str("[model]\nn = [6, 8]\nalpha = 0.2\nbeta = 0.8\n", None).unwrap();
        assert_eq!(c.model.n, vec![6, 8]);
        assert_eq!(c.hitting.sim_n, 8);
        assert!(!c.defaulted.contains(&"model.alpha".to_string()));
        assert!(c.defaulted.contains(&"set.radius".to_string()));
    }

    #[test]
    fn errors_name_the_field() {
        let field = |text: &str| match ExperimentConfig::from_toml_str(text, None) {
            Err(Error::Validation { field, .. }) => field,
            other => panic!("expected a validation error, got {other:?}"),
        };
        assert_eq!(field("[model]\nalpha = 1.5\n"), "model.alpha");
        assert_eq!(field("[model]\nalpha = 0.6\nbeta = 0.4\n"), "model.beta");
        assert_eq!(field("[model]\nalpah = 0.3\n"), "model.alpah");
        assert_eq!(field("[set]\ncenter = \"ramp(1)\"\n"), "set.center");
        assert_eq!(field("[hydro]\nn = 64\nn_x = 100\n"), "hydro.n_x");
        assert_eq!(field("[colour]\nx = 1\n"), "colour");
        assert_eq!(field("[model]\nn = \"eight\"\n"), "model.n");
    }

    #[test]
    fn overrides_change_the_hash() {
        let mut c = ExperimentConfig::defaults();
        let h = c.hash();
        assert_eq!(h, ExperimentConfig::defaults().hash());
        c.apply(&Overrides {
            seed: Some(9),
            ..Default::default()
        })
        .unwrap();
        assert_ne!(c.hash(), h);
        assert!(!c.defaulted.contains(&"run.seed".to_string()));
    }
}
