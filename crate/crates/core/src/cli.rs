//! Command-line front end. JSON on stdout, diagnostics on stderr.
//!
//! Exit codes: 0 yes / success, 1 no, 2 domain error, 64 usage error.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use serde_json::{json, Value};

use crate::cardinal_dist::{delta_sequence, CardinalDist};
use crate::config::Config;
use crate::csp_model::{parse_instance, CspInstance, GlobalCardinality};
use crate::error::{Error, Result};
use crate::oracle::{brute_avg, brute_moment, brute_opt, hyper_ratio};
use crate::poly::{parse_poly, MultilinearPoly};
use crate::quad::{parse_rational, Quad, Rational};
use crate::solver::{self, assignment_json, quad_json, rational_json, set_json};
use crate::spectra::{EntryMode, FormKind, SetSymmetricForm};

pub const EXIT_YES: i32 = 0;
pub const EXIT_NO: i32 = 1;
pub const EXIT_ERROR: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(name = "cardcsp", version, about = "Above-average CSPs under a global cardinality constraint")]
pub struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for randomized paths.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// key = value file with caps and tolerances.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    A,
    B,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Exact,
    Simplified,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decide OPT ≥ AVG + t.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        t: i64,
    },
    /// Rewrite f so few variables matter and report the active set.
    Kernel {
        #[arg(long, conflicts_with = "poly", required_unless_present = "poly")]
        instance: Option<PathBuf>,
        /// χ-basis polynomial file (needs --p).
        #[arg(long)]
        poly: Option<PathBuf>,
        #[arg(long, value_parser = rational_arg)]
        p: Option<Rational>,
        /// Coefficient granularity (default 2^−d).
        #[arg(long, value_parser = rational_arg)]
        gamma: Option<Rational>,
    },
    /// Eigenvalue report for the set-symmetric forms.
    Spectra {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, value_parser = rational_arg)]
        p: Rational,
        #[arg(long, value_enum, default_value = "a")]
        kind: Kind,
        #[arg(long, value_enum, default_value = "exact")]
        mode: Mode,
    },
    /// δ_k = E[φ_S] for |S| = k.
    Delta {
        #[arg(long)]
        n: usize,
        #[arg(long, value_parser = rational_arg)]
        p: Rational,
        #[arg(long)]
        kmax: usize,
    },
    /// Exact mean, second moment and variance of a polynomial on the slice.
    Moments {
        #[arg(long)]
        poly: PathBuf,
        #[arg(long, value_parser = rational_arg)]
        p: Rational,
        /// Also report Monte Carlo estimates from this many samples.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// E[f⁴]/E[f²]² by enumeration.
    Hyper {
        #[arg(long)]
        poly: PathBuf,
        #[arg(long, value_parser = rational_arg)]
        p: Rational,
    },
    /// Exhaustive ground truth for an instance or polynomial.
    Oracle {
        #[arg(long, conflicts_with = "poly", required_unless_present = "poly")]
        instance: Option<PathBuf>,
        #[arg(long, allow_negative_numbers = true)]
        t: Option<i64>,
        #[arg(long)]
        poly: Option<PathBuf>,
        #[arg(long, value_parser = rational_arg)]
        p: Option<Rational>,
    },
}

fn rational_arg(s: &str) -> std::result::Result<Rational, String> {
    parse_rational(s).ok_or_else(|| format!("not a rational number: {s}"))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

fn load_instance(path: &Path) -> Result<(CspInstance, GlobalCardinality)> {
    parse_instance(&read(path)?)
}

fn load_poly(path: &Path) -> Result<MultilinearPoly> {
    parse_poly(&read(path)?)
}

fn need_p(p: &Option<Rational>) -> Result<&Rational> {
    p.as_ref().ok_or_else(|| Error::Input("--p is required with --poly".into()))
}

/// Parses `argv` (program name first) and runs the command.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let rendered = e.render();
            let _ = if code == 0 { write!(out, "{rendered}") } else { write!(err, "{rendered}") };
            return code;
        }
    };
    let config = match &cli.config {
        Some(path) => match read(path).and_then(|t| Config::parse(&t)) {
            Ok(c) => c,
            Err(e) => return fail(err, &e),
        },
        None => Config::default(),
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            let _ = writeln!(err, "error: --threads must be positive");
            return EXIT_USAGE;
        }
        pool = pool.num_threads(t);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => return fail(err, &Error::Resource(format!("thread pool: {e}"))),
    };
    let result = pool.install(|| execute(&cli, &config));
    match result {
        Ok((value, code)) => {
            let _ = writeln!(out, "{}", serde_json::to_string_pretty(&value).expect("serializable"));
            code
        }
        Err(Error::KernelTooLarge { kernel, cap }) => {
            let value = json!({
                "schema": 1,
                "error": "kernel_too_large",
                "cap": cap,
                "kernel": kernel.iter().map(|i| i + 1).collect::<Vec<_>>(),
            });
            let _ = writeln!(out, "{}", serde_json::to_string_pretty(&value).expect("serializable"));
            fail(err, &Error::KernelTooLarge { kernel, cap })
        }
        Err(e) => fail(err, &e),
    }
}

fn fail(err: &mut dyn Write, e: &Error) -> i32 {
    let _ = writeln!(err, "error: {e}");
    EXIT_ERROR
}

fn execute(cli: &Cli, config: &Config) -> Result<(Value, i32)> {
    match &cli.command {
        Command::Solve { instance, t } => {
            let (inst, card) = load_instance(instance)?;
            let v = solver::decide(&inst, &card, *t, config)?;
            let code = if v.decision { EXIT_YES } else { EXIT_NO };
            Ok((v.to_json(), code))
        }
        Command::Kernel { instance, poly, p, gamma } => {
            let (f, card, default_gamma) = match (instance, poly) {
                (Some(path), _) => {
                    let (inst, card) = load_instance(path)?;
                    let g = inst.gamma();
                    (inst.to_polynomial(), card, g)
                }
                (None, Some(path)) => {
                    let f = load_poly(path)?;
                    let card = GlobalCardinality::new(f.n(), need_p(p)?.clone())?;
                    let g = Rational::new(1.into(), BigInt::from(2).pow(f.degree() as u32));
                    (f, card, g)
                }
                (None, None) => return Err(Error::Input("give --instance or --poly".into())),
            };
            let gamma = gamma.clone().unwrap_or(default_gamma);
            let kz = solver::kernelize(&f, &card, &gamma, config)?;
            let o = &kz.outcome;
            let h: Vec<Value> =
                o.h.terms().map(|(s, c)| json!({ "set": s.to_one_based(), "coef": quad_json(c) })).collect();
            let size = Rational::from_integer(BigInt::from(o.active_set.len()));
            Ok((
                json!({
                    "schema": 1,
                    "active_set": set_json(&o.active_set),
                    "kernel_size": o.active_set.len(),
                    "h": h,
                    "base_correction": rational_json(&o.base_correction),
                    "granularity": rational_json(&o.granularity),
                    "blowup": o.norm_blowup.as_ref().map(rational_json),
                    "residual_norm_sq": o.residual_norm_sq.as_ref().map(rational_json),
                    "precondition_met": o.precondition_met,
                    "bound_check": { "bound": rational_json(&kz.kernel_bound), "holds": size <= kz.kernel_bound },
                    "warnings": kz.warnings,
                }),
                EXIT_YES,
            ))
        }
        Command::Spectra { n, d, p, kind, mode } => {
            config.check_p(p)?;
            let dist = CardinalDist::new(*n, p.clone())?;
            let kind = match kind {
                Kind::A => FormKind::A,
                Kind::B => FormKind::B,
            };
            let mode = match mode {
                Mode::Exact => EntryMode::Exact,
                Mode::Simplified => EntryMode::Simplified,
            };
            let form = SetSymmetricForm::new(dist, *d, kind, mode)?;
            let s = form.eigen_summary(config.dense_cap, config.float_tol)?;
            let nz = &s.nonzero_eigenvalues;
            Ok((
                json!({
                    "schema": 1,
                    "n": n, "d": d, "p": rational_json(p),
                    "kind": format!("{kind:?}"), "mode": format!("{mode:?}"),
                    "dimension": form.dimension().to_string(),
                    "null_dim": s.null_dim,
                    "nonzero_min": nz.first(),
                    "nonzero_max": nz.last(),
                    "clusters": s.clusters.iter().map(|c| json!({
                        "value": c.value, "min": c.min, "max": c.max,
                        "multiplicity": c.multiplicity,
                        "closed_form": rational_json(&c.closed_form), "gap": c.gap,
                    })).collect::<Vec<_>>(),
                    "blocks": s.blocks.iter().map(|b| json!({
                        "k": b.k, "dimension": b.dimension.to_string(),
                        "eigenvalue": quad_json(&b.exact),
                        "closed_form": rational_json(&b.closed_form),
                    })).collect::<Vec<_>>(),
                }),
                EXIT_YES,
            ))
        }
        Command::Delta { n, p, kmax } => {
            let deltas = delta_sequence(*n, p, *kmax)?;
            let rows: Vec<Value> = deltas.iter().enumerate().map(|(k, v)| json!({ "k": k, "delta": quad_json(v) })).collect();
            Ok((json!({ "schema": 1, "n": n, "p": rational_json(p), "delta": rows }), EXIT_YES))
        }
        Command::Moments { poly, p, samples } => {
            let f = load_poly(poly)?;
            let dist = CardinalDist::new(f.n(), p.clone())?;
            let mut v = json!({
                "schema": 1,
                "n": f.n(), "p": rational_json(p),
                "mean": quad_json(&dist.expectation(&f)?),
                "second_moment": quad_json(&dist.second_moment(&f)?),
                "variance": quad_json(&dist.variance(&f)?),
            });
            if let Some(n) = samples {
                let mut mc = serde_json::Map::new();
                for k in [1u32, 2, 4] {
                    let e = dist.mc_moment(&f, k, *n, cli.seed)?;
                    mc.insert(format!("m{k}"), json!({ "mean": e.mean, "stderr": e.stderr }));
                }
                mc.insert("samples".into(), json!(n));
                mc.insert("seed".into(), json!(cli.seed));
                v.as_object_mut().expect("object").insert("monte_carlo".into(), Value::Object(mc));
            }
            Ok((v, EXIT_YES))
        }
        Command::Hyper { poly, p } => {
            let f = load_poly(poly)?;
            let card = GlobalCardinality::new(f.n(), p.clone())?;
            let r = hyper_ratio(&f, &card, config.oracle_cap)?;
            let d = f.degree().max(1);
            Ok((
                json!({
                    "schema": 1,
                    "moment_ratio": quad_json(&r.moment_ratio),
                    "norm_ratio": quad_json(&r.norm_ratio),
                    "bound": quad_json(&solver::hypercontractive_constant(d, p)),
                }),
                EXIT_YES,
            ))
        }
        Command::Oracle { instance, t, poly, p } => {
            if let Some(path) = instance {
                let (inst, card) = load_instance(path)?;
                let (opt, arg) = brute_opt(&inst, &card, config.oracle_cap)?;
                let avg = brute_avg(&inst, &card, config.oracle_cap)?;
                let mut v = json!({
                    "schema": 1,
                    "opt": opt, "argmax": assignment_json(&arg), "avg": rational_json(&avg),
                });
                let mut code = EXIT_YES;
                if let Some(t) = t {
                    let yes = Rational::from_integer(BigInt::from(opt)) >= avg + Rational::from_integer(BigInt::from(*t));
                    v.as_object_mut().expect("object").insert("answer".into(), json!(if yes { "yes" } else { "no" }));
                    code = if yes { EXIT_YES } else { EXIT_NO };
                }
                return Ok((v, code));
            }
            let path = poly.as_ref().ok_or_else(|| Error::Input("give --instance or --poly".into()))?;
            let f = load_poly(path)?;
            let card = GlobalCardinality::new(f.n(), need_p(p)?.clone())?;
            let m: Vec<Quad> =
                [1, 2, 4].iter().map(|&k| brute_moment(&f, &card, k, config.oracle_cap)).collect::<Result<_>>()?;
            let var = &m[1] - &m[0].square();
            Ok((
                json!({
                    "schema": 1,
                    "mean": quad_json(&m[0]), "second_moment": quad_json(&m[1]),
                    "fourth_moment": quad_json(&m[2]), "variance": quad_json(&var),
                }),
                EXIT_YES,
            ))
        }
    }
}

