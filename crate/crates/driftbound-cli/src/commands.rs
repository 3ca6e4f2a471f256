//! The subcommands: flag sets, config-file merging, and execution.
//!
//! Every value-bearing flag is an `Option`; after parsing, missing values
//! are filled from the matching section of the TOML config file, so flags
//! always override the file. Required parameters absent from both places
//! fail with a message naming the flag.

use crate::emit::{self, Style};
use clap::Args;
use driftbound::bounds::{self, BoundCurve, DriftParams};
use driftbound::chain::{DriftSpec, FiniteChain, MinorizationSpec};
use driftbound::oracle::{self, DistanceCurves};
use driftbound::pump::{self, PumpModel};
use driftbound::simulate;
use driftbound::{Error, Result};
use rand::RngCore;
use std::path::{Path, PathBuf};
use toml::Table;

fn cfg<'a>(section: Option<&'a Table>, key: &str) -> Option<&'a toml::Value> {
    section.and_then(|t| t.get(key))
}

fn bad(key: &str, want: &str) -> Error {
    Error::Parse(format!("config key `{key}` must be {want}"))
}

fn cfg_f64(section: Option<&Table>, key: &str) -> Result<Option<f64>> {
    match cfg(section, key) {
        None => Ok(None),
        Some(v) => v
            .as_float()
            .or_else(|| v.as_integer().map(|i| i as f64))
            .map(Some)
            .ok_or_else(|| bad(key, "a number")),
    }
}

fn cfg_int<T: TryFrom<i64>>(section: Option<&Table>, key: &str) -> Result<Option<T>> {
    match cfg(section, key) {
        None => Ok(None),
        Some(v) => {
            let i = v.as_integer().ok_or_else(|| bad(key, "an integer"))?;
            T::try_from(i).map(Some).map_err(|_| bad(key, "an integer in range"))
        }
    }
}

pub fn cfg_bool(section: Option<&Table>, key: &str) -> Result<bool> {
    match cfg(section, key) {
        None => Ok(false),
        Some(v) => v.as_bool().ok_or_else(|| bad(key, "a boolean")),
    }
}

fn cfg_string(section: Option<&Table>, key: &str) -> Result<Option<String>> {
    match cfg(section, key) {
        None => Ok(None),
        Some(v) => v
            .as_str()
            .map(|s| Some(s.to_string()))
            .ok_or_else(|| bad(key, "a string")),
    }
}

pub fn cfg_path(section: Option<&Table>, key: &str) -> Result<Option<PathBuf>> {
    Ok(cfg_string(section, key)?.map(PathBuf::from))
}

fn cfg_string_list(section: Option<&Table>, key: &str) -> Result<Vec<String>> {
    match cfg(section, key) {
        None => Ok(Vec::new()),
        Some(v) => v
            .as_array()
            .and_then(|a| {
                a.iter()
                    .map(|x| x.as_str().map(String::from))
                    .collect::<Option<Vec<_>>>()
            })
            .ok_or_else(|| bad(key, "an array of strings")),
    }
}

fn require<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| {
        Error::Domain(format!(
            "missing parameter --{flag}: pass the flag or set `{flag}` in the config file"
        ))
    })
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let items: Result<Vec<T>> = s
        .split(',')
        .map(|tok| {
            tok.trim()
                .parse::<T>()
                .map_err(|e| Error::Parse(format!("{what}: `{tok}`: {e}")))
        })
        .collect();
    let items = items?;
    if items.is_empty() {
        return Err(Error::Parse(format!("{what}: empty list")));
    }
    Ok(items)
}

/// Drift parameters (λ, K, m, ε), shared by `rate` and `bound`.
#[derive(Debug, Args)]
pub struct RateArgs {
    /// Drift rate λ off the small set, in (0,1).
    #[arg(long)]
    lambda: Option<f64>,
    /// Ceiling K on PV over the small set.
    #[arg(long = "K")]
    k: Option<f64>,
    /// Minorization block length m.
    #[arg(long)]
    m: Option<u32>,
    /// Minorization mass ε in (0,1].
    #[arg(long)]
    eps: Option<f64>,
}

impl RateArgs {
    fn resolve(&self, cfg: Option<&Table>) -> Result<DriftParams> {
        let lambda = require(self.lambda.or(cfg_f64(cfg, "lambda")?), "lambda")?;
        let k = require(self.k.or(cfg_f64(cfg, "K")?), "K")?;
        let m = require(self.m.or(cfg_int::<u32>(cfg, "m")?), "m")?;
        let eps = require(self.eps.or(cfg_f64(cfg, "eps")?), "eps")?;
        DriftParams::new(lambda, k, m, eps)
    }
}

pub fn run_rate(args: RateArgs, cfg: Option<&Table>, style: Style) -> Result<()> {
    let params = args.resolve(cfg)?;
    let rate = bounds::compute_rate_params(&params)?;
    emit::print_report(
        style,
        serde_json::json!({
            "lambda": params.lambda,
            "K": params.k,
            "m": params.m,
            "epsilon": params.epsilon,
            "B": rate.b,
            "rho": rate.rho,
            "r": rate.r,
        }),
        || {
            println!("B   = {}", emit::fmt_f64(rate.b, style.full));
            println!("rho = {}", emit::fmt_f64(rate.rho, style.full));
            println!("r   = {}", emit::fmt_f64(rate.r, style.full));
        },
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[command(flatten)]
    rate: RateArgs,
    /// Drift function value V(x) at the start state.
    #[arg(long)]
    vx: Option<f64>,
    /// Total-variation target defining τ_TV.
    #[arg(long = "target-tv")]
    target_tv: Option<f64>,
    /// V-norm target defining τ_V.
    #[arg(long = "target-v")]
    target_v: Option<f64>,
    /// Horizon for the mixing-time scan (default 100000).
    #[arg(long = "t-max")]
    t_max: Option<u64>,
    /// Output path for the bound-curve CSV (default bound_curve.csv
    /// in the output directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run_bound(
    args: BoundArgs,
    cfg: Option<&Table>,
    style: Style,
    out_dir: Option<&Path>,
) -> Result<()> {
    let params = args.rate.resolve(cfg)?;
    let rate = bounds::compute_rate_params(&params)?;
    let vx = require(args.vx.or(cfg_f64(cfg, "vx")?), "vx")?;
    let target_tv = require(args.target_tv.or(cfg_f64(cfg, "target-tv")?), "target-tv")?;
    let target_v = require(args.target_v.or(cfg_f64(cfg, "target-v")?), "target-v")?;
    let t_max = args.t_max.or(cfg_int(cfg, "t-max")?).unwrap_or(100_000);
    let tv = bounds::tv_bound_poly(&params, &rate, vx)?;
    let vn = bounds::vnorm_bound_poly(&params, &rate, vx)?;
    let tau_tv = bounds::mixing_time(&tv, target_tv, t_max)?;
    let tau_v = bounds::mixing_time(&vn, target_v, t_max)?;

    let path = emit::resolve_out(args.out.or(cfg_path(cfg, "out")?), out_dir, "bound_curve.csv");
    let mut csv = String::from("t,tv_bound,v_bound\n");
    for t in 0..=tau_tv.max(tau_v) + 20 {
        csv.push_str(&format!(
            "{t},{},{}\n",
            emit::fmt_f64(tv.value(t), style.full),
            emit::fmt_f64(vn.value(t), style.full),
        ));
    }
    emit::write_atomic(&path, &csv)?;

    emit::print_report(
        style,
        serde_json::json!({
            "rho": rate.rho,
            "tau_tv": tau_tv,
            "tau_v": tau_v,
            "csv": path.display().to_string(),
        }),
        || {
            println!("rho    = {}", emit::fmt_f64(rate.rho, style.full));
            println!("tau_tv = {tau_tv}   (TV target {})", emit::fmt_f64(target_tv, style.full));
            println!("tau_v  = {tau_v}   (V-norm target {})", emit::fmt_f64(target_v, style.full));
            println!("curve  = {}", path.display());
        },
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Kernel matrix file: one whitespace-separated row per line, with an
    /// optional `#`-prefixed header of state labels.
    #[arg(long)]
    chain: Option<PathBuf>,
    /// Small-set states for --chain, comma-separated indices.
    #[arg(long)]
    c: Option<String>,
    /// Use the built-in nearly periodic chain on N states.
    #[arg(long = "nearly-periodic", value_name = "N")]
    nearly_periodic: Option<usize>,
    /// Run the TV-rate scaling experiment over these sizes instead of
    /// chain checks.
    #[arg(long, value_name = "N1,N2,...")]
    scaling: Option<String>,
    /// Run one named check (repeatable): drift, minorization, stationary,
    /// distances, tail-bound, tv-bound, supporting-lemmas, l2-theorem,
    /// core-lemma. Errors are fatal when checks are named explicitly.
    #[arg(long = "check", value_name = "NAME")]
    check: Vec<String>,
    /// Run every check, skipping those whose preconditions this chain
    /// does not meet (the default when no --check is given).
    #[arg(long = "all-checks")]
    all_checks: bool,
    /// DP and distance-curve horizon (default 2000).
    #[arg(long)]
    horizon: Option<usize>,
    /// Start state for the distance curves (default 0).
    #[arg(long)]
    from: Option<usize>,
    /// Write the distance curves as CSV (t, tv, l2, vnorm, bound).
    #[arg(long = "emit-curves")]
    emit_curves: bool,
    /// Output path for --emit-curves (default oracle_curves.csv in the
    /// output directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

const ALL_CHECKS: [&str; 9] = [
    "drift",
    "minorization",
    "stationary",
    "distances",
    "tail-bound",
    "tv-bound",
    "supporting-lemmas",
    "l2-theorem",
    "core-lemma",
];

struct CheckOutcome {
    name: String,
    status: &'static str,
    detail: String,
}

pub fn run_oracle(
    args: OracleArgs,
    cfg: Option<&Table>,
    style: Style,
    out_dir: Option<&Path>,
) -> Result<()> {
    if let Some(list) = args.scaling.or(cfg_string(cfg, "scaling")?) {
        let ns: Vec<usize> = parse_list(&list, "--scaling")?;
        let report = oracle::cubic_scaling_experiment(&ns)?;
        emit::print_report(
            style,
            serde_json::to_value(&report).expect("report serializes"),
            || {
                println!("N      tv_rate        gap");
                for p in &report.per_n {
                    println!(
                        "{:<6} {:<14} {}",
                        p.n,
                        emit::fmt_f64(p.tv_rate, style.full),
                        emit::fmt_f64(p.gap, style.full),
                    );
                }
                println!("slope of ln(gap) vs ln N = {}", emit::fmt_f64(report.slope, style.full));
            },
        );
        return Ok(());
    }

    let nearly = args.nearly_periodic.or(cfg_int(cfg, "nearly-periodic")?);
    let chain_path = args.chain.or(cfg_path(cfg, "chain")?);
    let (chain, drift, mino) = match (nearly, chain_path) {
        (Some(n), None) => oracle::nearly_periodic_chain(n)?,
        (None, Some(path)) => {
            let chain = FiniteChain::load(&path)?;
            let cspec = require(args.c.or(cfg_string(cfg, "c")?), "c")?;
            let c: Vec<usize> = parse_list(&cspec, "--c")?;
            let mino = chain.extract_minorization(&c, 1)?;
            let drift = oracle::derive_drift_spec(&chain, &c)?;
            (chain, drift, mino)
        }
        (None, None) => {
            return Err(Error::Domain(
                "oracle needs --chain FILE, --nearly-periodic N, or --scaling LIST".into(),
            ))
        }
        (Some(_), Some(_)) => {
            return Err(Error::Domain(
                "--chain and --nearly-periodic are mutually exclusive".into(),
            ))
        }
    };

    let horizon = args.horizon.or(cfg_int(cfg, "horizon")?).unwrap_or(2000);
    let from = args.from.or(cfg_int(cfg, "from")?).unwrap_or(0);
    if from >= chain.n() {
        return Err(Error::Dimension(format!(
            "--from {from} out of range for {} states",
            chain.n()
        )));
    }
    let mut selected = args.check;
    if selected.is_empty() {
        selected = cfg_string_list(cfg, "check")?;
    }
    // Explicitly named checks run strict: their errors are fatal. The
    // all-checks sweep instead reports precondition failures as skips.
    let strict = !selected.is_empty();
    if !strict {
        selected = ALL_CHECKS.iter().map(|s| s.to_string()).collect();
    }
    for name in &selected {
        if !ALL_CHECKS.contains(&name.as_str()) {
            return Err(Error::Domain(format!(
                "unknown check `{name}`; expected one of {}",
                ALL_CHECKS.join(", ")
            )));
        }
    }

    let needs_curves = args.emit_curves
        || selected.iter().any(|s| s == "distances" || s == "tv-bound");
    let curves: Option<DistanceCurves> = if needs_curves {
        Some(oracle::distance_curves(&chain, from, &drift.v, horizon)?)
    } else {
        None
    };

    let mut outcomes = Vec::new();
    for name in &selected {
        let result = run_one_check(name, &chain, &drift, &mino, curves.as_ref(), from, horizon);
        let outcome = match result {
            Ok((true, detail)) => CheckOutcome { name: name.clone(), status: "PASS", detail },
            Ok((false, detail)) => CheckOutcome { name: name.clone(), status: "FAIL", detail },
            Err(e) if !strict && e.is_validation() => {
                CheckOutcome { name: name.clone(), status: "SKIP", detail: e.to_string() }
            }
            Err(e) => return Err(e),
        };
        outcomes.push(outcome);
    }

    if args.emit_curves {
        let cur = curves.as_ref().expect("curves computed when emitting");
        let params = DriftParams::new(drift.lambda, drift.k, mino.m, mino.epsilon)?;
        let rate = bounds::compute_rate_params(&params)?;
        let poly = bounds::tv_bound_poly(&params, &rate, drift.v[from])?;
        let mut csv = String::from("t,tv,l2,vnorm,bound\n");
        for t in 0..=cur.horizon {
            csv.push_str(&format!(
                "{t},{},{},{},{}\n",
                emit::fmt_f64(cur.tv[t], style.full),
                emit::fmt_f64(cur.l2[t], style.full),
                emit::fmt_f64(cur.vnorm[t], style.full),
                emit::fmt_f64(poly.value(t as u64), style.full),
            ));
        }
        let path =
            emit::resolve_out(args.out.or(cfg_path(cfg, "out")?), out_dir, "oracle_curves.csv");
        emit::write_atomic(&path, &csv)?;
        if !style.json {
            println!("curves = {}", path.display());
        }
    }

    let failed = outcomes.iter().filter(|o| o.status == "FAIL").count();
    emit::print_report(
        style,
        serde_json::json!({
            "checks": outcomes
                .iter()
                .map(|o| {
                    serde_json::json!({
                        "name": o.name,
                        "status": o.status,
                        "detail": o.detail,
                    })
                })
                .collect::<Vec<_>>(),
            "failed": failed,
        }),
        || {
            for o in &outcomes {
                println!("{}: {} ({})", o.name, o.status, o.detail);
            }
        },
    );
    if failed > 0 {
        return Err(Error::Precondition(format!("{failed} check(s) failed")));
    }
    Ok(())
}

fn run_one_check(
    name: &str,
    chain: &FiniteChain,
    drift: &DriftSpec,
    mino: &MinorizationSpec,
    curves: Option<&DistanceCurves>,
    from: usize,
    horizon: usize,
) -> Result<(bool, String)> {
    match name {
        "drift" => {
            let rep = chain.verify_drift(drift)?;
            Ok((
                rep.holds,
                format!("worst excess {:.3e} at state {}", rep.worst_violation, rep.witness),
            ))
        }
        "minorization" => {
            let ok = chain.verify_minorization(&drift.c, mino)?;
            Ok((ok, format!("m = {}, eps = {:.6}", mino.m, mino.epsilon)))
        }
        "stationary" => {
            let direct = oracle::stationary_distribution(chain)?;
            let regen = oracle::stationary_via_regeneration(chain, &drift.c, mino, horizon)?;
            let l1: f64 = direct.iter().zip(&regen).map(|(a, b)| (a - b).abs()).sum();
            Ok((l1 <= 1e-10, format!("l1 difference {l1:.3e}")))
        }
        "distances" => {
            let cur = curves.expect("distance curves precomputed");
            let mut v1 = f64::NEG_INFINITY;
            let mut v2 = f64::NEG_INFINITY;
            for t in 0..=cur.horizon {
                v1 = v1.max(cur.tv[t] - 0.5 * cur.l2[t]);
                v2 = v2.max(2.0 * cur.tv[t] - cur.vnorm[t]);
            }
            Ok((
                v1 <= 1e-12 && v2 <= 1e-12,
                format!("max tv - l2/2 = {v1:.3e}, max 2tv - vnorm = {v2:.3e}"),
            ))
        }
        "tail-bound" => {
            let rt = exact_tail_from_nu(chain, drift, mino, horizon)?;
            let params = DriftParams::new(drift.lambda, drift.k, mino.m, mino.epsilon)?;
            let rate = bounds::compute_rate_params(&params)?;
            let nu_v: f64 = mino
                .nu
                .iter()
                .zip(&drift.v)
                .map(|(p, v)| p * v)
                .sum::<f64>()
                .max(1.0);
            let mut worst = f64::NEG_INFINITY;
            for (t, &tail) in rt.tail.iter().enumerate() {
                worst = worst.max(tail - bounds::tail_bound(&params, &rate, nu_v, t as u64)?);
            }
            Ok((worst <= 1e-12, format!("max tail excess over formula {worst:.3e}")))
        }
        "tv-bound" => {
            // The TV theorem is stated for reversible chains with
            // nonnegative spectrum; checking it elsewhere is vacuous.
            let spectral = chain.spectral_report()?;
            if !spectral.reversible {
                return Err(Error::Precondition(
                    "TV bound theorem needs a reversible chain".into(),
                ));
            }
            if spectral.min_eigenvalue < -1e-10 {
                return Err(Error::Precondition(format!(
                    "TV bound theorem needs nonnegative eigenvalues; min is {}",
                    spectral.min_eigenvalue
                )));
            }
            let cur = curves.expect("distance curves precomputed");
            let params = DriftParams::new(drift.lambda, drift.k, mino.m, mino.epsilon)?;
            let rate = bounds::compute_rate_params(&params)?;
            let poly = bounds::tv_bound_poly(&params, &rate, drift.v[from])?;
            let mut worst = f64::NEG_INFINITY;
            for t in 0..=cur.horizon {
                worst = worst.max(cur.tv[t] - poly.value(t as u64));
            }
            Ok((worst <= 1e-12, format!("max exact TV excess over bound {worst:.3e}")))
        }
        "supporting-lemmas" => {
            // The convolution check scans every start; cap its horizon so
            // large chains stay inside the command's time budget.
            let rep = chain.verify_drift(drift)?;
            if !rep.holds {
                return Err(Error::Precondition("drift condition does not hold".into()));
            }
            let sl = oracle::check_supporting_lemmas(chain, drift, mino, horizon.min(300))?;
            let ok = sl.b_bound_violation <= 1e-10
                && sl.pi_v_violation <= 1e-10
                && sl.tv_to_v_violation <= 1e-10;
            Ok((
                ok,
                format!(
                    "B-bound {:.3e}, pi(V) {:.3e}, TV-to-V {:.3e}",
                    sl.b_bound_violation, sl.pi_v_violation, sl.tv_to_v_violation
                ),
            ))
        }
        "l2-theorem" => {
            let rep = oracle::check_l2_theorem(chain, &drift.c, mino, horizon)?;
            Ok((
                rep.max_slack_violation <= 1e-10,
                format!(
                    "max l2^2 excess over tail sum {:.3e} at t = {}",
                    rep.max_slack_violation, rep.witness_t
                ),
            ))
        }
        "core-lemma" => {
            let rep = oracle::check_core_lemma(chain, &drift.c, mino, horizon)?;
            let ok = rep.max_monotonicity_violation <= 1e-10
                && rep.max_inequality_violation <= 1e-10;
            Ok((
                ok,
                format!(
                    "monotonicity {:.3e}, inequality {:.3e}",
                    rep.max_monotonicity_violation, rep.max_inequality_violation
                ),
            ))
        }
        other => Err(Error::Domain(format!("unknown check `{other}`"))),
    }
}

fn exact_tail_from_nu(
    chain: &FiniteChain,
    drift: &DriftSpec,
    mino: &MinorizationSpec,
    horizon: usize,
) -> Result<oracle::RegenerationTail> {
    oracle::exact_regeneration_tail(chain, &drift.c, mino, &mino.nu, horizon)
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Simulate the pump Gibbs kernel.
    #[arg(long)]
    pump: bool,
    /// Simulate the built-in nearly periodic chain on N states.
    #[arg(long = "nearly-periodic", value_name = "N")]
    nearly_periodic: Option<usize>,
    /// Simulate a finite chain from a kernel matrix file.
    #[arg(long)]
    chain: Option<PathBuf>,
    /// Small-set states for --chain, comma-separated indices.
    #[arg(long)]
    c: Option<String>,
    /// Drift rate defining the pump small set (default 0.61).
    #[arg(long)]
    lambda: Option<f64>,
    /// Pump dataset file (default: built-in failure records).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Start: a real x for --pump; a state index or `nu` for finite chains
    /// (default: the pump drift center, or nu).
    #[arg(long)]
    from: Option<String>,
    /// Monte Carlo replications (default 10000).
    #[arg(long)]
    reps: Option<u64>,
    /// Tail horizon; replications with T known to exceed it stop early and
    /// count toward every tail estimate (default 200).
    #[arg(long)]
    horizon: Option<usize>,
    /// Root seed; replication i draws from stream i (default 1).
    #[arg(long)]
    seed: Option<u64>,
    /// Output path for the tail CSV (default tail_estimate.csv in the
    /// output directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run_simulate(
    args: SimulateArgs,
    cfg: Option<&Table>,
    style: Style,
    out_dir: Option<&Path>,
) -> Result<()> {
    let reps = args.reps.or(cfg_int(cfg, "reps")?).unwrap_or(10_000);
    let horizon = args.horizon.or(cfg_int(cfg, "horizon")?).unwrap_or(200);
    let seed = args.seed.or(cfg_int(cfg, "seed")?).unwrap_or(1);
    let from = args.from.or(cfg_string(cfg, "from")?);
    let use_pump = args.pump || cfg_bool(cfg, "pump")?;
    let nearly = args.nearly_periodic.or(cfg_int(cfg, "nearly-periodic")?);
    let chain_path = args.chain.or(cfg_path(cfg, "chain")?);

    let sources = usize::from(use_pump)
        + usize::from(nearly.is_some())
        + usize::from(chain_path.is_some());
    if sources != 1 {
        return Err(Error::Domain(
            "pick exactly one of --pump, --nearly-periodic N, --chain FILE".into(),
        ));
    }

    let (est, params, mu_v, exact, label): (
        simulate::TailEstimate,
        DriftParams,
        f64,
        Option<oracle::RegenerationTail>,
        String,
    ) = if use_pump {
        let model = match args.data.or(cfg_path(cfg, "data")?) {
            Some(p) => PumpModel::from_file(&p)?,
            None => PumpModel::standard()?,
        };
        let lambda = args.lambda.or(cfg_f64(cfg, "lambda")?).unwrap_or(0.61);
        let best = pump::optimize_lambda(&model, &[lambda])?.best;
        let from_x: f64 = match from {
            None => model.center(),
            Some(s) => s
                .parse()
                .map_err(|e| Error::Parse(format!("--from `{s}`: {e}")))?,
        };
        let kernel = pump::PumpSplitKernel::new(&model, best.c_lo, best.c_hi)?;
        let params = DriftParams::new(best.lambda, best.k, 1, best.epsilon)?;
        let mu_v = model.v(from_x);
        let est = simulate::estimate_tail(
            &kernel,
            |_: &mut dyn RngCore| from_x,
            reps,
            horizon,
            seed,
        )?;
        (est, params, mu_v, None, format!("pump kernel from x = {from_x}"))
    } else {
        let (chain, drift, mino) = match nearly {
            Some(n) => oracle::nearly_periodic_chain(n)?,
            None => {
                let path = chain_path.expect("source checked above");
                let chain = FiniteChain::load(&path)?;
                let cspec = require(args.c.or(cfg_string(cfg, "c")?), "c")?;
                let c: Vec<usize> = parse_list(&cspec, "--c")?;
                let mino = chain.extract_minorization(&c, 1)?;
                let drift = oracle::derive_drift_spec(&chain, &c)?;
                (chain, drift, mino)
            }
        };
        let initial: Vec<f64> = match from.as_deref() {
            None | Some("nu") => mino.nu.clone(),
            Some(s) => {
                let x: usize = s.parse().map_err(|e| {
                    Error::Parse(format!("--from `{s}`: expected a state index or `nu`: {e}"))
                })?;
                if x >= chain.n() {
                    return Err(Error::Dimension(format!(
                        "--from {x} out of range for {} states",
                        chain.n()
                    )));
                }
                let mut d = vec![0.0; chain.n()];
                d[x] = 1.0;
                d
            }
        };
        let kernel = simulate::FiniteSplitKernel::new(&chain, &drift.c, &mino)?;
        let est = simulate::estimate_tail(
            &kernel,
            |rng: &mut dyn RngCore| sample_index(&initial, rng),
            reps,
            horizon,
            seed,
        )?;
        let exact = oracle::exact_regeneration_tail(&chain, &drift.c, &mino, &initial, horizon)?;
        let params = DriftParams::new(drift.lambda, drift.k, mino.m, mino.epsilon)?;
        let mu_v: f64 = initial
            .iter()
            .zip(&drift.v)
            .map(|(p, v)| p * v)
            .sum::<f64>()
            .max(1.0);
        let label = format!("finite chain on {} states", chain.n());
        (est, params, mu_v, Some(exact), label)
    };

    let rate = bounds::compute_rate_params(&params)?;
    let cmp = simulate::compare_tail_to_bound(&est, &params, &rate, mu_v)?;

    let mut csv = String::from("t,empirical,wilson_upper,theory_bound\n");
    for t in 0..=horizon {
        csv.push_str(&format!(
            "{t},{},{},{}\n",
            emit::fmt_f64(est.empirical_tail[t], style.full),
            emit::fmt_f64(est.wilson_upper[t], style.full),
            emit::fmt_f64(bounds::tail_bound(&params, &rate, mu_v, t as u64)?, style.full),
        ));
    }
    let path = emit::resolve_out(args.out.or(cfg_path(cfg, "out")?), out_dir, "tail_estimate.csv");
    emit::write_atomic(&path, &csv)?;

    // Exact DP tail (when available) against the 99.7% Wilson bands; a few
    // band misses per few hundred t values are expected noise, so this is
    // reported rather than enforced.
    let dp_outside = exact.as_ref().map(|rt| {
        (0..=horizon)
            .filter(|&t| rt.tail[t] < est.wilson_lower[t] || rt.tail[t] > est.wilson_upper[t])
            .count()
    });

    emit::print_report(
        style,
        serde_json::json!({
            "kernel": label,
            "reps": est.reps,
            "horizon": est.horizon,
            "seed": seed,
            "truncated": est.truncated_count,
            "rho": rate.rho,
            "max_excess": cmp.max_excess,
            "violations": cmp.violations.len(),
            "dp_outside_bands": dp_outside,
            "csv": path.display().to_string(),
        }),
        || {
            println!("kernel     = {label}");
            println!("reps       = {}", est.reps);
            println!("horizon    = {}", est.horizon);
            println!("seed       = {seed}");
            println!("truncated  = {}", est.truncated_count);
            println!("rho        = {}", emit::fmt_f64(rate.rho, style.full));
            if cmp.violations.is_empty() {
                println!(
                    "bound      = no significant violation (max excess {})",
                    emit::fmt_f64(cmp.max_excess, style.full)
                );
            } else {
                println!(
                    "bound      = VIOLATED at {} time points (max excess {})",
                    cmp.violations.len(),
                    emit::fmt_f64(cmp.max_excess, style.full)
                );
            }
            if let Some(outside) = dp_outside {
                println!("exact DP   = outside Wilson bands at {outside} of {} times", horizon + 1);
            }
            println!("csv        = {}", path.display());
        },
    );
    if !cmp.violations.is_empty() {
        return Err(Error::Precondition(format!(
            "empirical tail exceeds the certified bound at {} time points",
            cmp.violations.len()
        )));
    }
    Ok(())
}

/// Draw an index from a discrete distribution by inverting the CDF.
fn sample_index(probs: &[f64], rng: &mut dyn RngCore) -> usize {
    let u: f64 = rand::Rng::random(rng);
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

#[derive(Debug, clap::Subcommand)]
pub enum PumpCmd {
    /// Optimize λ over a grid and certify the resulting mixing times.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// Comma-separated λ grid (default 0.01, 0.02, ..., 0.99).
    #[arg(long = "lambda-grid", value_name = "L1,L2,...")]
    lambda_grid: Option<String>,
    /// Pump dataset file (default: built-in failure records).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Write the (λ, ρ(λ)) curve as CSV.
    #[arg(long = "emit-curve")]
    emit_curve: bool,
    /// Output path for --emit-curve (default lambda_curve.csv in the
    /// output directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run_reproduce(
    args: ReproduceArgs,
    cfg: Option<&Table>,
    style: Style,
    out_dir: Option<&Path>,
) -> Result<()> {
    let model = match args.data.or(cfg_path(cfg, "data")?) {
        Some(p) => PumpModel::from_file(&p)?,
        None => PumpModel::standard()?,
    };
    let grid = match args.lambda_grid.or(cfg_string(cfg, "lambda-grid")?) {
        Some(s) => parse_list(&s, "--lambda-grid")?,
        None => pump::default_lambda_grid(),
    };
    let scan = pump::optimize_lambda(&model, &grid)?;
    let report = pump::report_from_scan(&model, &scan)?;

    let emit_curve = args.emit_curve || cfg_bool(cfg, "emit-curve")?;
    let mut curve_path = None;
    if emit_curve {
        let mut csv = String::from("lambda,rho\n");
        for row in &scan.rows {
            if let Some(res) = &row.result {
                csv.push_str(&format!(
                    "{},{}\n",
                    emit::fmt_f64(row.lambda, style.full),
                    emit::fmt_f64(res.rho, style.full),
                ));
            }
        }
        let path =
            emit::resolve_out(args.out.or(cfg_path(cfg, "out")?), out_dir, "lambda_curve.csv");
        emit::write_atomic(&path, &csv)?;
        curve_path = Some(path);
    }

    let skipped = scan.rows.iter().filter(|r| r.result.is_none()).count();
    let mut json = serde_json::to_value(report).expect("report serializes");
    if let Some(p) = &curve_path {
        json["curve_csv"] = serde_json::Value::String(p.display().to_string());
    }
    emit::print_report(style, json, || {
        let f = |x| emit::fmt_f64(x, style.full);
        println!("lambda  = {}", f(report.lambda));
        println!("C       = [{}, {}]", f(report.c_lo), f(report.c_hi));
        println!("K       = {}", f(report.k));
        println!("epsilon = {}", f(report.epsilon));
        println!("rho     = {}", f(report.rho));
        println!("tau_tv  = {}   (TV target 0.01)", report.tau_tv);
        println!("tau_v   = {}   (V-norm target 0.02)", report.tau_v);
        if skipped > 0 {
            println!("({skipped} of {} grid points had no valid small set)", scan.rows.len());
        }
        if let Some(p) = &curve_path {
            println!("curve   = {}", p.display());
        }
    });
    Ok(())
}
