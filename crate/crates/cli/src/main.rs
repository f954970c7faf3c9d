use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use panshuf::finite_dist::{
    family_enumerate, q_family_nontrivial, sample, BitVector, DistributionDescriptor, FamilyTag,
};
use panshuf::harness::{
    fit_points, run_spec_with_threads, with_threads, Experiment, ExperimentSpec, ReductionParams, RunSummary,
    SweepResult,
};
use panshuf::info_metrics::{infty_to_2_norm_bruteforce, tv_distance};
use panshuf::reductions::{DistinguishConfig, ThresholdReport, TEST_PHASE_CONSTANT};
use panshuf::trust_models::{epsilon_grid, MechanismManifest, PathBudget};

/// Simulation and verification toolkit for pan-private and shuffle privacy.
///
/// Experiment commands accept `--spec FILE`; command-line flags override
/// the matching spec fields.
#[derive(Parser, Debug)]
#[command(name = "panshuf", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Global {
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Trial count.
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// Output file or directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON experiment spec.
    #[arg(long, global = true)]
    spec: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw samples from a hard-family member, one `+`/`-` row per line.
    Sample {
        /// Descriptor JSON, inline or `@file`.
        #[arg(long)]
        dist: String,
        #[arg(long, short)]
        n: usize,
    },
    /// Exact total variation distance between two hard-family members.
    Tv {
        #[arg(long)]
        p: String,
        #[arg(long)]
        q: String,
    },
    /// Brute-force (∞→2)-norm² of a family against 4α²/C(d,≤k).
    Norm {
        #[arg(long, value_enum)]
        family: NormArg,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        alpha: f64,
    },
    /// Exact hockey-stick audit of a mechanism on two neighbouring inputs.
    Audit {
        /// Mechanism JSON `{type, alphabet, params}`, inline or `@file`.
        #[arg(long)]
        mechanism: Option<String>,
        #[arg(long, value_delimiter = ',')]
        x: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        y: Vec<usize>,
        #[arg(long, default_value_t = 0.0)]
        eps_lo: f64,
        #[arg(long, default_value_t = 3.0)]
        eps_hi: f64,
        #[arg(long, default_value_t = 31)]
        points: usize,
        /// Assert δ(eps) ≤ delta at this ε.
        #[arg(long, requires = "target_delta")]
        target_eps: Option<f64>,
        #[arg(long)]
        target_delta: Option<f64>,
    },
    /// Dilution check of the shuffle-to-pan wrapper.
    ReduceCheck {
        #[arg(long, value_delimiter = ',')]
        ns: Vec<usize>,
        #[arg(long)]
        flip: Option<f64>,
        #[arg(long)]
        p_one: Option<f64>,
        #[arg(long)]
        uniform_check: bool,
    },
    /// Planted-learner distinguishing experiment.
    Distinguish {
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        constant: Option<f64>,
        #[arg(long)]
        target: Option<f64>,
    },
    /// Sample-complexity sweep (spec required).
    Sweep {
        #[arg(long, default_value_t = 0.35)]
        slope_lo: f64,
        #[arg(long, default_value_t = 0.65)]
        slope_hi: f64,
        /// Success at n*/corridor must stay below this rate.
        #[arg(long, default_value_t = 0.9)]
        corridor_max: f64,
    },
    /// Fit log n* against log d from `d,n_star` CSV rows or a sweep.json.
    Fit {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum NormArg {
    P,
    Q,
    QNontrivial,
}

/// Whether every assertion of a command held.
enum Verdict {
    Pass,
    Fail(String),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Verdict::Pass) => ExitCode::SUCCESS,
        Ok(Verdict::Fail(msg)) => {
            eprintln!("assertion failed: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<Verdict> {
    let g = cli.global;
    match cli.command {
        Command::Sample { dist, n } => {
            let d = descriptor(&dist)?.build()?;
            let rows = sample(&d, g.seed.unwrap_or(0), n);
            let text: String = rows.iter().map(|x| x.to_sign_string() + "\n").collect();
            emit(g.out.as_deref(), &text)?;
            Ok(Verdict::Pass)
        }
        Command::Tv { p, q } => {
            let p = descriptor(&p)?.build()?.densify()?;
            let q = descriptor(&q)?.build()?.densify()?;
            emit(g.out.as_deref(), &format!("{}\n", tv_distance(&p, &q)?))?;
            Ok(Verdict::Pass)
        }
        Command::Norm { family, d, k, alpha } => {
            let members = match family {
                NormArg::P => family_enumerate(d, k, alpha, FamilyTag::P)?,
                NormArg::Q => family_enumerate(d, k, alpha, FamilyTag::Q)?,
                NormArg::QNontrivial => q_family_nontrivial(d, k, alpha)?,
            };
            let dense = members.iter().map(|m| m.densify()).collect::<panshuf::Result<Vec<_>>>()?;
            let bound = 4.0 * alpha * alpha / panshuf::finite_dist::choose_up_to(d, k);
            let report = with_threads(g.threads, || infty_to_2_norm_bruteforce(&dense))??.with_bound(bound);
            let json = serde_json::json!({
                "value_sq": report.value_sq,
                "bound_sq": bound,
                "witness": BitVector::new(report.witness_bits.clone())?.to_sign_string(),
            });
            emit(g.out.as_deref(), &format!("{json}\n"))?;
            Ok(if report.within_bound(1e-9) {
                Verdict::Pass
            } else {
                Verdict::Fail(format!("norm² {} exceeds bound {bound}", report.value_sq))
            })
        }
        Command::Audit { mechanism, x, y, eps_lo, eps_hi, points, target_eps, target_delta } => {
            if let Some(spec) = load_spec(&g, "audit")? {
                return finish_run(&spec, g.threads, |_| Ok(Verdict::Pass));
            }
            let Some(mechanism) = mechanism else { bail!("audit needs --mechanism or --spec") };
            let m: MechanismManifest = serde_json::from_str(&inline_or_file(&mechanism)?)?;
            let mut grid = epsilon_grid(eps_lo, eps_hi, points);
            if let Some(t) = target_eps {
                grid.push(t);
                grid.sort_by(f64::total_cmp);
                grid.dedup();
            }
            let curve = with_threads(g.threads, || m.audit(&x, &y, &grid, &mut PathBudget::default()))??;
            emit(g.out.as_deref(), &curve.to_csv())?;
            match (target_eps, target_delta) {
                (Some(e), Some(d)) => {
                    let got = curve.delta_at(e).context("target epsilon missing from grid")?;
                    Ok(if got <= d { Verdict::Pass } else { Verdict::Fail(format!("δ({e}) = {got} > {d}")) })
                }
                _ => Ok(Verdict::Pass),
            }
        }
        Command::ReduceCheck { ns, flip, p_one, uniform_check } => {
            let spec = match load_spec(&g, "reduction-check")? {
                Some(mut s) => {
                    if let Experiment::ReductionCheck(p) = &mut s.experiment {
                        if !ns.is_empty() {
                            p.ns = ns;
                        }
                        p.flip = flip.unwrap_or(p.flip);
                        p.p_one = p_one.unwrap_or(p.p_one);
                        p.uniform_check |= uniform_check;
                    }
                    s
                }
                None => ExperimentSpec {
                    trials: g.trials.unwrap_or(100_000),
                    seed: g.seed.unwrap_or(0),
                    out: g.out.clone().unwrap_or_else(|| "reduce-check".into()),
                    experiment: Experiment::ReductionCheck(ReductionParams {
                        ns: if ns.is_empty() { vec![30, 60, 120, 240] } else { ns },
                        flip: flip.unwrap_or(0.1),
                        p_one: p_one.unwrap_or(0.9),
                        uniform_check,
                    }),
                },
            };
            finish_run(&spec, g.threads, check_dilution)
        }
        Command::Distinguish { d, k, alpha, eps, n, constant, target } => {
            let mut spec = load_spec(&g, "distinguish")?.unwrap_or_else(|| ExperimentSpec {
                trials: g.trials.unwrap_or(100_000),
                seed: g.seed.unwrap_or(0),
                out: g.out.clone().unwrap_or_else(|| "distinguish".into()),
                experiment: Experiment::Distinguish(panshuf::harness::DistinguishParams {
                    config: DistinguishConfig { d: 4, k: 2, alpha: 0.2, eps: 1.0, n: 1, constant: TEST_PHASE_CONSTANT },
                    target: 0.8,
                }),
            });
            if let Experiment::Distinguish(p) = &mut spec.experiment {
                let c = &mut p.config;
                c.d = d.unwrap_or(c.d);
                c.k = k.unwrap_or(c.k);
                c.alpha = alpha.unwrap_or(c.alpha);
                c.eps = eps.unwrap_or(c.eps);
                c.n = n.unwrap_or(c.n);
                c.constant = constant.unwrap_or(c.constant);
                p.target = target.unwrap_or(p.target);
            }
            finish_run(&spec, g.threads, |s| {
                let a = s.artifacts.iter().find(|a| a.name == "threshold.json").context("no threshold report")?;
                let r: ThresholdReport = serde_json::from_slice(&a.bytes)?;
                println!("tau = {}, advantage = {} [{}, {}]", r.tau, r.adv, r.ci_low, r.ci_high);
                Ok(if r.meets_target {
                    Verdict::Pass
                } else {
                    Verdict::Fail(format!("advantage {} below target {}", r.adv, r.target))
                })
            })
        }
        Command::Sweep { slope_lo, slope_hi, corridor_max } => {
            let spec = load_spec(&g, "sweep")?.context("sweep needs --spec")?;
            finish_run(&spec, g.threads, |s| {
                let Some(a) = s.artifacts.iter().find(|a| a.name == "sweep.json") else {
                    return Ok(Verdict::Pass);
                };
                let r: SweepResult = serde_json::from_slice(&a.bytes)?;
                for c in &r.cells {
                    println!("d = {}: n* = {}, success at n*/{} = {}", c.d, c.n_star, r.params.corridor, c.corridor.success_rate);
                }
                if let (Some(slope), Some(se)) = (r.slope, r.stderr) {
                    println!("slope = {slope} ± {se}");
                    if !(slope_lo..=slope_hi).contains(&slope) {
                        return Ok(Verdict::Fail(format!("slope {slope} outside [{slope_lo}, {slope_hi}]")));
                    }
                }
                if let Some(c) = r.cells.iter().find(|c| c.corridor.success_rate >= corridor_max) {
                    return Ok(Verdict::Fail(format!("d = {}: success {} at n*/{}", c.d, c.corridor.success_rate, r.params.corridor)));
                }
                Ok(Verdict::Pass)
            })
        }
        Command::Fit { input } => {
            let text = fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            let points: Vec<(f64, f64)> = if input.extension().is_some_and(|e| e == "json") {
                let r: SweepResult = serde_json::from_str(&text)?;
                r.cells.iter().map(|c| (c.d as f64, c.n_star as f64)).collect()
            } else {
                text.lines()
                    .filter(|l| !l.trim().is_empty() && !l.starts_with('d'))
                    .map(|l| {
                        let mut it = l.split(',').map(|v| v.trim().parse::<f64>());
                        match (it.next(), it.next()) {
                            (Some(Ok(d)), Some(Ok(n))) => Ok((d, n)),
                            _ => bail!("bad row {l:?}; expected d,n_star"),
                        }
                    })
                    .collect::<Result<_>>()?
            };
            let (slope, se) = fit_points(&points)?;
            emit(g.out.as_deref(), &format!("slope,stderr\n{slope},{se}\n"))?;
            Ok(Verdict::Pass)
        }
    }
}

fn check_dilution(s: &RunSummary) -> Result<Verdict> {
    let Some(a) = s.artifacts.iter().find(|a| a.name == "dilution.csv") else {
        return Ok(Verdict::Pass);
    };
    let text = String::from_utf8(a.bytes.clone())?;
    let mut prev = f64::INFINITY;
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (n, est, hi): (usize, f64, f64) = (f[0].parse()?, f[5].parse()?, f[7].parse()?);
        println!("n = {n}: estimate {est} (95% CI up to {hi})");
        if est > prev {
            return Ok(Verdict::Fail(format!("estimate rises at n = {n}")));
        }
        if n >= 60 && hi >= 1.0 / 6.0 {
            return Ok(Verdict::Fail(format!("n = {n}: upper bound {hi} not below 1/6")));
        }
        prev = est;
    }
    Ok(Verdict::Pass)
}

/// Load `--spec`, check its kind, and apply `--seed`, `--trials`, `--out`.
fn load_spec(g: &Global, kind: &str) -> Result<Option<ExperimentSpec>> {
    let Some(path) = &g.spec else { return Ok(None) };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut spec = ExperimentSpec::from_json(&text)?;
    if spec.experiment.kind() != kind {
        bail!("spec kind '{}' does not match command '{kind}'", spec.experiment.kind());
    }
    spec.seed = g.seed.unwrap_or(spec.seed);
    spec.trials = g.trials.unwrap_or(spec.trials);
    if let Some(out) = &g.out {
        spec.out = out.clone();
    }
    spec.validate()?;
    Ok(Some(spec))
}

fn finish_run(spec: &ExperimentSpec, threads: usize, check: impl FnOnce(&RunSummary) -> Result<Verdict>) -> Result<Verdict> {
    let summary = run_spec_with_threads(spec, threads)?;
    for (name, digest) in &summary.manifest.files {
        println!("{} {digest}", spec.out.join(name).display());
    }
    check(&summary)
}

fn descriptor(s: &str) -> Result<DistributionDescriptor> {
    Ok(DistributionDescriptor::from_json(&inline_or_file(s)?)?)
}

fn inline_or_file(s: &str) -> Result<String> {
    match s.strip_prefix('@') {
        Some(path) => fs::read_to_string(path).with_context(|| format!("reading {path}")),
        None => Ok(s.to_string()),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
