mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use config::{Command, ConfigError, RunConfig};
use output::{write_manifest, OutDir, RunManifest};

const AFTER_HELP: &str = "\
Every flag can also be given as `key = value` in a --config file (flag names with `_` for `-`);
flags override the file. The output directory defaults to $NEOHOOK_OUT, then ./neohook-out.
Exit codes: 0 success, 1 invariant failure or run error, 2 usage error.";

#[derive(Parser)]
#[command(name = "neohook", version, about = "Neohookean energies, branch-set constructions and injectivity checks", after_help = AFTER_HELP)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` file applied before the flags
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<String>,
    /// Seed for every random choice [default: 0]
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Worker threads; 0 lets the runtime decide [default: 0]
    #[arg(long, global = true)]
    threads: Option<String>,
}

#[derive(Args)]
struct Exponents {
    /// Gradient exponent; sweeps take a comma-separated list [default: 2]
    #[arg(long)]
    p: Option<String>,
    /// Barrier exponent; sweeps take a comma-separated list [default: 1]
    #[arg(long)]
    q: Option<String>,
}

#[derive(Args)]
struct Quadrature {
    /// Base cells per panel [default: 8]
    #[arg(long)]
    cells: Option<String>,
    /// Minimum grading exponent toward the singular line [default: 8]
    #[arg(long)]
    grading: Option<String>,
    /// Gauss-Legendre points per cell and axis [default: 8]
    #[arg(long)]
    order: Option<String>,
    /// Refinement levels [default: 4]
    #[arg(long)]
    levels: Option<String>,
}

#[derive(Args)]
struct CantorArgs {
    /// Construction depth [default: 3]
    #[arg(long)]
    depth: Option<String>,
    /// ε rule: geometric:B, constant:C, harmonic:C or explicit:e1,e2,... [default: geometric:4]
    #[arg(long)]
    eps: Option<String>,
}

#[derive(Args)]
struct PinchArgs {
    /// Pinch exponent a [default: centroid of the feasible region]
    #[arg(long, allow_hyphen_values = true)]
    a: Option<String>,
    /// Pinch exponent b [default: centroid of the feasible region]
    #[arg(long, allow_hyphen_values = true)]
    b: Option<String>,
}

#[derive(Subcommand)]
enum Sub {
    /// Energy of a closed-form map
    Energy {
        /// identity[:w=..,h=..], pinch:a=..,b=.., pinch-ext:.., phi:.., mobius:ak=.. [default: identity]
        #[arg(long)]
        map: Option<String>,
        /// Area of the identity's domain [0, area] x [0, 1]
        #[arg(long)]
        area: Option<String>,
        #[command(flatten)]
        exps: Exponents,
        #[command(flatten)]
        quad: Quadrature,
        /// Also write the per-level totals
        #[arg(long)]
        per_level: bool,
    },
    /// Gradient descent on piecewise affine maps of the unit square onto a rectangle
    Minimize {
        /// Mesh cells along x [default: 16]
        #[arg(long)]
        nx: Option<String>,
        /// Mesh cells along y [default: 16]
        #[arg(long)]
        ny: Option<String>,
        /// Target rectangle WxH [default: 1x1]
        #[arg(long)]
        target: Option<String>,
        /// identity, bilinear or perturb:σ,seed [default: identity]
        #[arg(long)]
        init: Option<String>,
        /// Iteration cap [default: 5000]
        #[arg(long)]
        max_iters: Option<String>,
        /// Projected-gradient tolerance [default: 1e-7]
        #[arg(long)]
        tol: Option<String>,
        /// Mesh snapshot every k iterations; 0 keeps the first and last [default: 0]
        #[arg(long)]
        snapshot_every: Option<String>,
        #[command(flatten)]
        exps: Exponents,
    },
    /// Generations, measure estimate and picture of the Cantor construction
    Cantor {
        #[command(flatten)]
        cantor: CantorArgs,
        /// Depth drawn in the SVG (at most 7) [default: 4]
        #[arg(long)]
        svg_depth: Option<String>,
    },
    /// Injectivity, continuity, threshold and branch-set checks
    Verify {
        /// nh, modulus, threshold or branch [default: nh]
        #[arg(long)]
        check: Option<String>,
        /// Map for nh/modulus: a closed-form map name or `cantor` [default: identity]
        #[arg(long)]
        map: Option<String>,
        #[command(flatten)]
        exps: Exponents,
        #[command(flatten)]
        pinch: PinchArgs,
        #[command(flatten)]
        cantor: CantorArgs,
        #[command(flatten)]
        quad: Quadrature,
        /// Source samples per axis [default: 2048]
        #[arg(long)]
        samples: Option<String>,
        /// Target cells per axis [default: 128]
        #[arg(long)]
        target_cells: Option<String>,
        /// Sampled point pairs [default: 20000]
        #[arg(long)]
        pairs: Option<String>,
        /// δ bins [default: 12]
        #[arg(long)]
        bins: Option<String>,
        /// Smallest acceptable fraction of one-to-one cells [default: 0.99]
        #[arg(long)]
        min_fraction: Option<String>,
        /// Integrate energies too (threshold, branch)
        #[arg(long)]
        with_energy: bool,
    },
    /// Pinch energies at the witness and just across the threshold for a grid of (p, q)
    Sweep {
        #[command(flatten)]
        exps: Exponents,
        #[command(flatten)]
        quad: Quadrature,
    },
    /// Validate pinch parameters, integrate their energy and draw the map
    Pinch {
        #[command(flatten)]
        pinch: PinchArgs,
        #[command(flatten)]
        exps: Exponents,
        #[command(flatten)]
        quad: Quadrature,
        /// Also write the per-level totals
        #[arg(long)]
        per_level: bool,
    },
}

type Pairs = Vec<(&'static str, String)>;

fn push(v: &mut Pairs, key: &'static str, val: &Option<String>) {
    if let Some(x) = val {
        v.push((key, x.clone()));
    }
}

impl Exponents {
    fn pairs(&self, v: &mut Pairs) {
        push(v, "p", &self.p);
        push(v, "q", &self.q);
    }
}

impl Quadrature {
    fn pairs(&self, v: &mut Pairs) {
        push(v, "cells", &self.cells);
        push(v, "grading", &self.grading);
        push(v, "order", &self.order);
        push(v, "levels", &self.levels);
    }
}

impl CantorArgs {
    fn pairs(&self, v: &mut Pairs) {
        push(v, "depth", &self.depth);
        push(v, "eps", &self.eps);
    }
}

impl PinchArgs {
    fn pairs(&self, v: &mut Pairs) {
        push(v, "a", &self.a);
        push(v, "b", &self.b);
    }
}

fn flag(v: &mut Pairs, key: &'static str, on: bool) {
    if on {
        v.push((key, "true".into()));
    }
}

impl Sub {
    fn split(&self) -> (Command, Pairs) {
        let mut v = Pairs::new();
        let c = match self {
            Sub::Energy { map, area, exps, quad, per_level } => {
                push(&mut v, "map", map);
                push(&mut v, "area", area);
                exps.pairs(&mut v);
                quad.pairs(&mut v);
                flag(&mut v, "per_level", *per_level);
                Command::Energy
            }
            Sub::Minimize { nx, ny, target, init, max_iters, tol, snapshot_every, exps } => {
                push(&mut v, "nx", nx);
                push(&mut v, "ny", ny);
                push(&mut v, "target", target);
                push(&mut v, "init", init);
                push(&mut v, "max_iters", max_iters);
                push(&mut v, "tol", tol);
                push(&mut v, "snapshot_every", snapshot_every);
                exps.pairs(&mut v);
                Command::Minimize
            }
            Sub::Cantor { cantor, svg_depth } => {
                cantor.pairs(&mut v);
                push(&mut v, "svg_depth", svg_depth);
                Command::Cantor
            }
            Sub::Verify { check, map, exps, pinch, cantor, quad, samples, target_cells, pairs, bins, min_fraction, with_energy } => {
                push(&mut v, "check", check);
                push(&mut v, "map", map);
                exps.pairs(&mut v);
                pinch.pairs(&mut v);
                cantor.pairs(&mut v);
                quad.pairs(&mut v);
                push(&mut v, "samples", samples);
                push(&mut v, "target_cells", target_cells);
                push(&mut v, "pairs", pairs);
                push(&mut v, "bins", bins);
                push(&mut v, "min_fraction", min_fraction);
                flag(&mut v, "with_energy", *with_energy);
                Command::Verify
            }
            Sub::Sweep { exps, quad } => {
                exps.pairs(&mut v);
                quad.pairs(&mut v);
                Command::Sweep
            }
            Sub::Pinch { pinch, exps, quad, per_level } => {
                pinch.pairs(&mut v);
                exps.pairs(&mut v);
                quad.pairs(&mut v);
                flag(&mut v, "per_level", *per_level);
                Command::Pinch
            }
        };
        (c, v)
    }
}

fn parse_config(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let (command, mut pairs) = cli.command.split();
    let mut cfg = RunConfig::defaults(command);
    if let Some(path) = &cli.common.config {
        cfg.apply_file(path)?;
    }
    push(&mut pairs, "out", &cli.common.out);
    push(&mut pairs, "seed", &cli.common.seed);
    push(&mut pairs, "threads", &cli.common.threads);
    for (k, val) in &pairs {
        cfg.set(k, val, &format!("--{}", k.replace('_', "-")))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match parse_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if cfg.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global() {
            eprintln!("error: cannot start {} threads: {e}", cfg.threads);
            return ExitCode::from(1);
        }
    }
    let start = Instant::now();
    let out = match OutDir::create(&cfg.out) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let (code, failures) = match commands::run(&cfg, &out) {
        Ok(f) if f.is_empty() => (0, f),
        Ok(f) => (1, f),
        Err(e) if e.downcast_ref::<ConfigError>().is_some() => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
        Err(e) => (1, vec![format!("{e:#}")]),
    };
    for f in &failures {
        eprintln!("failure: {f}");
    }
    let manifest = RunManifest {
        tool: "neohook",
        version: env!("CARGO_PKG_VERSION"),
        command: cfg.command.as_str().into(),
        config: cfg.to_text(),
        wall_time_s: start.elapsed().as_secs_f64(),
        threads: rayon::current_num_threads(),
        exit_code: code,
        failures,
        files: Vec::new(),
    };
    match write_manifest(&out, manifest) {
        Ok(path) => println!("wrote {}", path.display()),
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    }
    ExitCode::from(code as u8)
}
