//! `lab`: command-line front end.
//!
//! Inputs are `.lab.json` envelopes or bare JSON. Every command prints a JSON
//! report to stdout; `--out` also saves an envelope where one applies.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use sqlab::boost::{adc_estimate, boost_from_mu_feat, BoostConfig, DEFAULT_MAX_SAMPLES};
use sqlab::bsgd::sq::{run_bsgd_via_sq, ExactOracle};
use sqlab::bsgd::{run_bsgd, Architecture, BsgdConfig};
use sqlab::comm::{
    corr_bound_check, discprod_search, discrepancy_under, r2_norm, sherstov_sandwich_check, DEFAULT_GRID_BITS,
    DEFAULT_RESTARTS,
};
use sqlab::domain::{make_parity_class, make_zarankiewicz_random};
use sqlab::features::rfl_verify;
use sqlab::persistence::{self, Artifact};
use sqlab::pipeline::{self, product_distribution, RunConfig};
use sqlab::seeds::{derive_seed, rng_from_seed};
use sqlab::sqdim::{sqdim_exact, sqdim_greedy, DEFAULT_GREEDY_RESTARTS, EXACT_ROW_CAP};
use sqlab::{DyadicDistribution, SignMatrix, SourceDistribution};

#[derive(Parser)]
#[command(name = "lab", version, about = "SQ dimension, discrepancy, random features and precision-limited SGD")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// SQ dimension of a matrix under a distribution.
    Sqdim {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        dist: PathBuf,
        #[arg(long, conflicts_with = "greedy")]
        exact: bool,
        #[arg(long)]
        greedy: bool,
        #[arg(long, default_value_t = DEFAULT_GREEDY_RESTARTS)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Discrepancy under a fixed product distribution, or a search for a small one.
    Disc {
        #[arg(long)]
        matrix: PathBuf,
        /// A distribution list `[ζ_row, ζ_col]`.
        #[arg(long, conflicts_with = "min")]
        under: Option<PathBuf>,
        #[arg(long)]
        min: bool,
        #[arg(long, default_value_t = DEFAULT_GRID_BITS)]
        grid: u32,
        #[arg(long, default_value_t = DEFAULT_RESTARTS)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// The 2-party norm `R₂`.
    R2 {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        rho: PathBuf,
    },
    /// Max 2-bit protocol correlation against `4 R₂^{1/4}`.
    Corrbound {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        rho: PathBuf,
    },
    /// Random-feature verification over candidate example distributions.
    Rfl {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        rhos: PathBuf,
        /// A number, or `auto` for the default constant policy.
        #[arg(long, default_value = "auto")]
        gamma: String,
        #[arg(long)]
        prob: Option<f64>,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Boosting over random features for one target.
    Boost {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        rho: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        /// Target row; drawn from `μ` when absent.
        #[arg(long)]
        target: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_MAX_SAMPLES)]
        max_samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Saves the model envelope here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Empirical adc estimate.
    Adc {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        rhos: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = DEFAULT_MAX_SAMPLES)]
        max_samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Precision-limited mini-batch SGD on a source distribution.
    Bsgd(BsgdArgs),
    /// End-to-end chain.
    Chain(ExperimentArgs),
    /// adc over an ε sweep on a Zarankiewicz member.
    Separation(ExperimentArgs),
    /// Full parity under uniform and biased inputs.
    ParityContrast(ExperimentArgs),
    /// Writes input files.
    #[command(subcommand)]
    Gen(Gen),
}

#[derive(Args)]
struct BsgdArgs {
    #[arg(long, default_value = "mlp32")]
    arch: String,
    #[arg(long)]
    source: PathBuf,
    #[arg(long = "T", default_value_t = 500)]
    steps: usize,
    #[arg(long = "c", default_value_t = 0.0625)]
    precision: f64,
    #[arg(long = "b", default_value_t = 256)]
    batch: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Drive the run with statistical queries to an exact oracle.
    #[arg(long)]
    via_sq: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Gen {
    Parity {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        out: PathBuf,
    },
    Zarankiewicz {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        c: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    Uniform {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Product distribution over the bits of `n = 2^k` columns.
    Product {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        bias: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Bundles a list of distribution files.
    List {
        #[arg(long, num_args = 1.., required = true)]
        dists: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    Source {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        target: usize,
        #[arg(long)]
        dist: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load<T: Artifact>(path: &Path) -> Result<T> {
    persistence::load_any(path).with_context(|| format!("reading {}", path.display()))
}

fn print<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn save<T: Artifact>(value: &T, path: &Path) -> Result<()> {
    let hash = persistence::save(value, path).with_context(|| format!("writing {}", path.display()))?;
    eprintln!("wrote {} ({hash})", path.display());
    Ok(())
}

fn read_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Sqdim {
            matrix,
            dist,
            exact,
            greedy,
            restarts,
            seed,
        } => {
            let m: SignMatrix = load(&matrix)?;
            let rho: DyadicDistribution = load(&dist)?;
            let use_exact = exact || (!greedy && m.rows() <= EXACT_ROW_CAP);
            let r = if use_exact {
                sqdim_exact(&m, &rho)?
            } else {
                sqdim_greedy(&m, &rho, restarts, seed)?
            };
            print(&json!({"d": r.dimension, "witness": r.witness, "exact": r.exact}))
        }
        Command::Disc {
            matrix,
            under,
            min,
            grid,
            restarts,
            seed,
        } => {
            let m: SignMatrix = load(&matrix)?;
            let r = match under {
                Some(p) => {
                    let zeta: Vec<DyadicDistribution> = load(&p)?;
                    let [zr, zc] = zeta.as_slice() else {
                        bail!("--under needs a list of two distributions, row then column");
                    };
                    discrepancy_under(&m, zr, zc)?
                }
                None => {
                    if !min {
                        eprintln!("no --under given; searching product distributions");
                    }
                    discprod_search(&m, grid, restarts, seed)?
                }
            };
            let sandwich = if m.rows() <= EXACT_ROW_CAP && m.cols().is_power_of_two() {
                let sq = sqdim_exact(&m, &DyadicDistribution::uniform(m.cols())?)?.dimension;
                Some(sherstov_sandwich_check(sq, r.value_f64))
            } else {
                None
            };
            print(&json!({"discrepancy": r, "sandwich": sandwich}))
        }
        Command::R2 { matrix, mu, rho } => {
            let m: SignMatrix = load(&matrix)?;
            let r = r2_norm(&m, &load(&mu)?, &load(&rho)?)?;
            print(&json!({"r2": r, "r2_f64": r.to_f64(), "correlation_bound": 4.0 * r.to_f64().powf(0.25)}))
        }
        Command::Corrbound { matrix, mu, rho } => {
            let m: SignMatrix = load(&matrix)?;
            print(&corr_bound_check(&m, &load(&mu)?, &load(&rho)?)?)
        }
        Command::Rfl {
            matrix,
            mu,
            rhos,
            gamma,
            prob,
            trials,
            seed,
            out,
        } => {
            let m: SignMatrix = load(&matrix)?;
            let rhos: Vec<DyadicDistribution> = load(&rhos)?;
            let gamma = match gamma.as_str() {
                "auto" => None,
                g => Some(g.parse::<f64>().context("--gamma must be a number or auto")?),
            };
            let r = rfl_verify(&m, &load(&mu)?, &rhos, gamma, prob, trials, seed)?;
            if let Some(p) = out {
                save(&r, &p)?;
            }
            print(&r)
        }
        Command::Boost {
            matrix,
            mu,
            rho,
            eps,
            target,
            max_samples,
            seed,
            out,
        } => {
            let m = Arc::new(load::<SignMatrix>(&matrix)?);
            let mu: DyadicDistribution = load(&mu)?;
            let target = match target {
                Some(t) => t,
                None => mu.sample_index(&mut rng_from_seed(derive_seed(seed, "cli_target", 0))),
            };
            let src = SourceDistribution::new(m, target, load(&rho)?)?;
            let cfg = BoostConfig {
                max_samples,
                ..BoostConfig::new(eps)
            };
            let o = boost_from_mu_feat(&src, &mu, &cfg, seed)?;
            if let Some(p) = out {
                save(&o.model, &p)?;
            }
            print(&json!({"target_row": target, "model": o.model, "estimate": o.estimate, "history": o.state.history}))
        }
        Command::Adc {
            matrix,
            mu,
            rhos,
            eps,
            delta,
            trials,
            max_samples,
            seed,
            out,
        } => {
            let m: SignMatrix = load(&matrix)?;
            let rhos: Vec<DyadicDistribution> = load(&rhos)?;
            let cfg = BoostConfig {
                max_samples,
                ..BoostConfig::new(eps)
            };
            let r = adc_estimate(&m, &load(&mu)?, &rhos, eps, delta, trials, &cfg, seed)?;
            if let Some(p) = out {
                save(&r, &p)?;
            }
            print(&r)
        }
        Command::Bsgd(a) => {
            let src: SourceDistribution = load(&a.source)?;
            let arch = Architecture::parse(&a.arch)?;
            let mut cfg = BsgdConfig::new(a.steps, a.precision, a.batch, a.lr, a.seed);
            let run = if a.via_sq {
                cfg.batch = sqlab::bsgd::BatchMode::Exact;
                let mut oracle = ExactOracle {
                    source: src.clone(),
                    tolerance: a.precision / 8.0,
                };
                run_bsgd_via_sq(&arch, &src, &mut oracle, &cfg, Some(&src))?
            } else {
                run_bsgd(&arch, &src, &cfg)?
            };
            if let Some(p) = &a.out {
                save(&run, p)?;
            }
            print(&json!({
                "trajectory": run.trajectory,
                "final_loss_sq": run.final_loss_sq,
                "final_loss_01": run.final_loss_01,
                "regime": run.regime,
                "query_count": run.query_count,
            }))
        }
        Command::Chain(a) => {
            let cfg = read_config(a.config.as_deref())?;
            let r = pipeline::run_chain_config(&cfg.chain, a.seed.unwrap_or(cfg.seed))?;
            let w = pipeline::write_chain(&r, &a.out)?;
            print(&json!({"written": w, "checks": r.checks, "certificates_hold": r.certificates_hold()}))
        }
        Command::Separation(a) => {
            let cfg = read_config(a.config.as_deref())?;
            let r = pipeline::run_separation(&cfg.separation, a.seed.unwrap_or(cfg.seed))?;
            let w = pipeline::write_separation(&r, &a.out)?;
            print(&json!({"written": w, "points": r.points, "slope": r.slope, "dc_lower_bound": r.dc_lower_bound}))
        }
        Command::ParityContrast(a) => {
            let cfg = read_config(a.config.as_deref())?;
            let r = pipeline::run_parity_contrast(&cfg.parity_contrast, a.seed.unwrap_or(cfg.seed))?;
            let w = pipeline::write_parity_contrast(&r, &a.out)?;
            let arms: Vec<_> = std::iter::once(&r.uniform)
                .chain(&r.biased)
                .map(|a| json!({"arm": a.name, "median_loss_01": a.median_loss_01}))
                .collect();
            print(&json!({"written": w, "arms": arms, "gaps": r.gaps}))
        }
        Command::Gen(g) => match g {
            Gen::Parity { n, out } => save(&make_parity_class(n)?, &out),
            Gen::Zarankiewicz { n, c, seed, out } => save(&make_zarankiewicz_random(n, c, seed)?, &out),
            Gen::Uniform { n, out } => save(&DyadicDistribution::uniform(n)?, &out),
            Gen::Product { n, bias, out } => save(&product_distribution(n, bias)?, &out),
            Gen::List { dists, out } => {
                let list = dists.iter().map(|p| load(p)).collect::<Result<Vec<DyadicDistribution>>>()?;
                save(&list, &out)
            }
            Gen::Source {
                matrix,
                target,
                dist,
                out,
            } => save(&SourceDistribution::new(Arc::new(load(&matrix)?), target, load(&dist)?)?, &out),
        },
    }
}
