//! Run configuration: a flat set of typed keys that can come from a
//! `key = value` file and from command-line flags (flags win).

use std::fmt;
use std::path::{Path, PathBuf};

use neohook_core::cantor::EpsRule;
use thiserror::Error;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "NEOHOOK_OUT";
pub const DEFAULT_OUT: &str = "neohook-out";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown key `{key}` ({origin}); valid keys: {}", KEYS.join(", "))]
    UnknownKey { key: String, origin: String },
    #[error("bad value `{value}` for `{key}`: expected {expected}")]
    BadValue { key: String, value: String, expected: &'static str },
    #[error("{origin}: line {line}: expected `key = value`, got `{text}`")]
    Syntax { origin: String, line: usize, text: String },
    #[error("invalid configuration: {0}")]
    Constraint(String),
    #[error("cannot read config file {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Energy,
    Minimize,
    Cantor,
    Verify,
    Sweep,
    Pinch,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Energy => "energy",
            Command::Minimize => "minimize",
            Command::Cantor => "cantor",
            Command::Verify => "verify",
            Command::Sweep => "sweep",
            Command::Pinch => "pinch",
        }
    }

    fn parse(s: &str) -> Option<Command> {
        [Command::Energy, Command::Minimize, Command::Cantor, Command::Verify, Command::Sweep, Command::Pinch]
            .into_iter()
            .find(|c| c.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Check {
    Nh,
    Modulus,
    Threshold,
    Branch,
}

impl Check {
    pub fn as_str(self) -> &'static str {
        match self {
            Check::Nh => "nh",
            Check::Modulus => "modulus",
            Check::Threshold => "threshold",
            Check::Branch => "branch",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitSpec {
    Identity,
    Bilinear,
    Perturb { sigma: f64, seed: u64 },
}

impl fmt::Display for InitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitSpec::Identity => write!(f, "identity"),
            InitSpec::Bilinear => write!(f, "bilinear"),
            InitSpec::Perturb { sigma, seed } => write!(f, "perturb:{sigma:?},{seed}"),
        }
    }
}

pub const KEYS: &[&str] = &[
    "out", "seed", "threads", "map", "p", "q", "area", "cells", "grading", "order", "levels", "per_level", "nx", "ny",
    "target", "init", "max_iters", "tol", "snapshot_every", "depth", "eps", "svg_depth", "check", "samples",
    "target_cells", "pairs", "bins", "with_energy", "min_fraction", "a", "b",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub out: PathBuf,
    pub seed: u64,
    /// Worker threads; 0 lets rayon decide.
    pub threads: usize,
    pub map: String,
    /// Comma-separated lists are accepted; single-run commands use one value.
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    /// With `map = identity`: the identity on `[0, area] × [0, 1]`.
    pub area: Option<f64>,
    pub cells: usize,
    pub grading: f64,
    pub order: usize,
    pub levels: usize,
    pub per_level: bool,
    pub nx: usize,
    pub ny: usize,
    pub target: (f64, f64),
    pub init: InitSpec,
    pub max_iters: usize,
    pub tol: f64,
    /// Mesh snapshot every this many iterations; 0 keeps only the first and last.
    pub snapshot_every: usize,
    pub depth: usize,
    pub eps: String,
    pub svg_depth: usize,
    pub check: Check,
    pub samples: usize,
    pub target_cells: usize,
    pub pairs: usize,
    pub bins: usize,
    pub with_energy: bool,
    pub min_fraction: f64,
    pub a: Option<f64>,
    pub b: Option<f64>,
}

impl RunConfig {
    pub fn defaults(command: Command) -> RunConfig {
        let out = std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        RunConfig {
            command,
            out,
            seed: 0,
            threads: 0,
            map: "identity".into(),
            p: vec![2.0],
            q: vec![1.0],
            area: None,
            cells: 8,
            grading: 8.0,
            order: 8,
            levels: 4,
            per_level: false,
            nx: 16,
            ny: 16,
            target: (1.0, 1.0),
            init: InitSpec::Identity,
            max_iters: 5000,
            tol: 1e-7,
            snapshot_every: 0,
            depth: 3,
            eps: "geometric:4".into(),
            svg_depth: 4,
            check: Check::Nh,
            samples: 2048,
            target_cells: 128,
            pairs: 20_000,
            bins: 12,
            with_energy: false,
            min_fraction: 0.99,
            a: None,
            b: None,
        }
    }

    pub fn set(&mut self, key: &str, value: &str, origin: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        let bad = |expected: &'static str| ConfigError::BadValue { key: key.into(), value: v.into(), expected };
        let float = |expected| v.parse::<f64>().map_err(|_| bad(expected));
        let count = |expected| v.parse::<usize>().map_err(|_| bad(expected));
        let flag = || match v {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            _ => Err(bad("true or false")),
        };
        let list = || -> Result<Vec<f64>, ConfigError> {
            v.split(',').map(|s| s.trim().parse::<f64>().map_err(|_| bad("a number or a comma-separated list"))).collect()
        };
        match key {
            "out" => self.out = PathBuf::from(v),
            "seed" => self.seed = v.parse().map_err(|_| bad("an unsigned integer"))?,
            "threads" => self.threads = count("a thread count")?,
            "map" => self.map = v.into(),
            "p" => self.p = list()?,
            "q" => self.q = list()?,
            "area" => self.area = Some(float("a positive number")?),
            "cells" => self.cells = count("a cell count")?,
            "grading" => self.grading = float("a number ≥ 1")?,
            "order" => self.order = count("a quadrature order")?,
            "levels" => self.levels = count("a level count")?,
            "per_level" => self.per_level = flag()?,
            "nx" => self.nx = count("a cell count")?,
            "ny" => self.ny = count("a cell count")?,
            "target" => {
                let (w, h) = v.split_once('x').ok_or_else(|| bad("WxH, e.g. 2x1"))?;
                self.target = (w.trim().parse().map_err(|_| bad("WxH"))?, h.trim().parse().map_err(|_| bad("WxH"))?);
            }
            "init" => {
                self.init = match v {
                    "identity" => InitSpec::Identity,
                    "bilinear" => InitSpec::Bilinear,
                    _ => {
                        let rest = v.strip_prefix("perturb:").ok_or_else(|| bad("identity, bilinear or perturb:σ,seed"))?;
                        let (s, seed) = rest.split_once(',').ok_or_else(|| bad("perturb:σ,seed"))?;
                        InitSpec::Perturb {
                            sigma: s.trim().parse().map_err(|_| bad("perturb:σ,seed"))?,
                            seed: seed.trim().parse().map_err(|_| bad("perturb:σ,seed"))?,
                        }
                    }
                }
            }
            "max_iters" => self.max_iters = count("an iteration count")?,
            "tol" => self.tol = float("a positive tolerance")?,
            "snapshot_every" => self.snapshot_every = count("an iteration count")?,
            "depth" => self.depth = count("a depth")?,
            "eps" => {
                EpsRule::parse(v).map_err(|_| bad("geometric:B, constant:C, harmonic:C or explicit:e1,e2,..."))?;
                self.eps = v.into();
            }
            "svg_depth" => self.svg_depth = count("a depth")?,
            "check" => {
                self.check = match v {
                    "nh" => Check::Nh,
                    "modulus" => Check::Modulus,
                    "threshold" => Check::Threshold,
                    "branch" => Check::Branch,
                    _ => return Err(bad("nh, modulus, threshold or branch")),
                }
            }
            "samples" => self.samples = count("a sample count")?,
            "target_cells" => self.target_cells = count("a cell count")?,
            "pairs" => self.pairs = count("a pair count")?,
            "bins" => self.bins = count("a bin count")?,
            "with_energy" => self.with_energy = flag()?,
            "min_fraction" => self.min_fraction = float("a fraction in [0, 1]")?,
            "a" => self.a = Some(float("a number")?),
            "b" => self.b = Some(float("a number")?),
            _ => return Err(ConfigError::UnknownKey { key: key.into(), origin: origin.into() }),
        }
        Ok(())
    }

    /// Applies a `key = value` file. Blank lines and `#` comments are skipped;
    /// a `command` line must match the subcommand being run.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), ConfigError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { origin: origin.into(), line: n + 1, text: line.into() })?;
            let k = k.trim();
            if k == "command" {
                match Command::parse(v.trim()) {
                    Some(c) if c == self.command => {}
                    _ => {
                        return Err(ConfigError::Constraint(format!(
                            "{origin} is for `{}`, not `{}`",
                            v.trim(),
                            self.command.as_str()
                        )))
                    }
                }
                continue;
            }
            self.set(k, v, origin)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// Every key, one per line; [`RunConfig::apply_text`] reads it back exactly.
    pub fn to_text(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
        let mut s = format!("command = {}\n", self.command.as_str());
        let mut put = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
        put("out", self.out.display().to_string());
        put("seed", self.seed.to_string());
        put("threads", self.threads.to_string());
        put("map", self.map.clone());
        put("p", list(&self.p));
        put("q", list(&self.q));
        if let Some(a) = self.area {
            put("area", format!("{a:?}"));
        }
        put("cells", self.cells.to_string());
        put("grading", format!("{:?}", self.grading));
        put("order", self.order.to_string());
        put("levels", self.levels.to_string());
        put("per_level", self.per_level.to_string());
        put("nx", self.nx.to_string());
        put("ny", self.ny.to_string());
        put("target", format!("{:?}x{:?}", self.target.0, self.target.1));
        put("init", self.init.to_string());
        put("max_iters", self.max_iters.to_string());
        put("tol", format!("{:?}", self.tol));
        put("snapshot_every", self.snapshot_every.to_string());
        put("depth", self.depth.to_string());
        put("eps", self.eps.clone());
        put("svg_depth", self.svg_depth.to_string());
        put("check", self.check.as_str().into());
        put("samples", self.samples.to_string());
        put("target_cells", self.target_cells.to_string());
        put("pairs", self.pairs.to_string());
        put("bins", self.bins.to_string());
        put("with_energy", self.with_energy.to_string());
        put("min_fraction", format!("{:?}", self.min_fraction));
        if let Some(a) = self.a {
            put("a", format!("{a:?}"));
        }
        if let Some(b) = self.b {
            put("b", format!("{b:?}"));
        }
        s
    }

    pub fn eps_rule(&self) -> EpsRule {
        EpsRule::parse(&self.eps).expect("validated when set")
    }

    /// The single `p` (or `q`) of a command that does not sweep.
    pub fn single(&self, key: &str) -> Result<f64, ConfigError> {
        let v = if key == "p" { &self.p } else { &self.q };
        match v.as_slice() {
            [x] => Ok(*x),
            _ => Err(ConfigError::Constraint(format!("`{}` takes one value for `{key}`", self.command.as_str()))),
        }
    }

    /// Checks that do not need any module code.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let c = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(ConfigError::Constraint(msg.into())) };
        c(self.p.iter().all(|p| p.is_finite() && *p > 1.0), "p must be > 1")?;
        c(self.q.iter().all(|q| q.is_finite() && *q > 0.0), "q > 0 is required (the barrier exponent)")?;
        c(!self.p.is_empty() && !self.q.is_empty(), "p and q need at least one value")?;
        c(self.area.map_or(true, |a| a > 0.0 && a.is_finite()), "area must be positive")?;
        c(self.cells >= 1 && self.order >= 1 && self.levels >= 1, "cells, order and levels must be ≥ 1")?;
        c(self.grading >= 1.0, "grading must be ≥ 1")?;
        c(self.nx >= 1 && self.ny >= 1, "nx and ny must be ≥ 1")?;
        c(self.target.0 > 0.0 && self.target.1 > 0.0, "target sides must be positive")?;
        c(self.tol > 0.0, "tol must be positive")?;
        c((0.0..=1.0).contains(&self.min_fraction), "min_fraction must lie in [0, 1]")?;
        c(self.bins >= 1 && self.pairs >= 1, "pairs and bins must be ≥ 1")?;
        if let InitSpec::Perturb { sigma, .. } = self.init {
            c(sigma >= 0.0 && sigma.is_finite(), "perturbation σ must be ≥ 0")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let mut cfg = RunConfig::defaults(Command::Minimize);
        cfg.set("p", "3.0000000000000004, 2.5", "test").unwrap();
        cfg.set("tol", "1e-11", "test").unwrap();
        cfg.set("target", "2x0.1", "test").unwrap();
        cfg.set("init", "perturb:0.05,9", "test").unwrap();
        cfg.set("a", "-0.30000000000000004", "test").unwrap();
        let text = cfg.to_text();
        let mut back = RunConfig::defaults(Command::Minimize);
        back.apply_text(&text, "echo").unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_text(), text);
        assert_eq!(back.p[0].to_bits(), 3.0000000000000004f64.to_bits());
    }

    #[test]
    fn rejects_bad_input() {
        let mut cfg = RunConfig::defaults(Command::Energy);
        let e = cfg.apply_text("p = 2\ncolour = red\n", "f.cfg").unwrap_err();
        assert!(matches!(e, ConfigError::UnknownKey { .. }), "{e}");
        assert!(e.to_string().contains("colour"));
        assert!(matches!(cfg.set("cells", "many", "flag"), Err(ConfigError::BadValue { .. })));
        assert!(matches!(cfg.apply_text("p 2", "f.cfg"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(cfg.apply_text("command = cantor", "f.cfg").is_err());
        cfg.set("q", "0", "flag").unwrap();
        assert!(cfg.validate().unwrap_err().to_string().contains("q > 0"));
    }

    #[test]
    fn comments_and_lists() {
        let mut cfg = RunConfig::defaults(Command::Verify);
        cfg.apply_text("# sweep\ncommand = verify\ncheck = threshold  # predicate only\nq = 2,3,4\n", "f").unwrap();
        assert_eq!(cfg.check, Check::Threshold);
        assert_eq!(cfg.q, [2.0, 3.0, 4.0]);
        assert!(cfg.single("q").is_err());
        assert_eq!(cfg.single("p").unwrap(), 2.0);
    }
}
