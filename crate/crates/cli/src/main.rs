//! Single binary exposing the library: divergence profiles, feasibility,
//! throughput-key bounds, channel sweeps, the Gaussian closed form, the
//! asymptotic formula set, and the finite-blocklength simulator.
//!
//! Exit codes: 0 success, 1 I/O or parse failure, 2 domain precondition
//! failure.

use std::collections::BTreeMap;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use maskbound::asymptotics::{
    adversary_error_bounds, bhattacharyya_tv_bound, key_length_threshold, nonac_throughput_bound,
    rate_threshold, tv_lower_from_test, tv_product_mixture_estimate, AdversaryDesign,
};
use maskbound::bounds::{
    inner_bound_point, optimality_verdict, outer_phi_interval, BoundReport, MaskingProblem,
};
use maskbound::channel::{
    absolute_continuity_check, feasibility_gap, output_distribution, ChannelSpec, CompoundChannel,
    Dmc, SparseInput,
};
use maskbound::gaussian::{
    gaussian_closed_form, gaussian_optimal_throughput, gaussian_quadrature_oracle, GaussianSetup,
};
use maskbound::probdist::{adversary_moments, DivergenceProfile, Distribution};
use maskbound::simulator::{run_experiment, sqrt_law_sweep, SimConfig, SimMode, DEFAULT_BUDGET};

#[derive(Parser)]
#[command(name = "maskbound", version, about = "Throughput-key bounds for state masking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single-letter divergence profile of a channel's active rows.
    Divergence(ChannelArgs),
    /// Frank-Wolfe feasibility gap between the two output polytopes.
    Feasibility(ChannelArgs),
    /// Inner/outer/optimality bound report.
    Bounds(BoundsArgs),
    /// Sweep one channel entry and tabulate the bounds.
    Sweep(SweepArgs),
    /// Gaussian closed form and optimal throughput.
    Gaussian(GaussianArgs),
    /// All asymptotic formula values for one design.
    Asymptotics(AsymptoticsArgs),
    /// Finite-blocklength experiment or square-root-law sweep.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct ChannelArgs {
    /// Path to a channel JSON file {"w1": [[...]], "w2": [[...]]}.
    channel: String,
}

#[derive(Args)]
struct BoundsArgs {
    channel: String,
    /// Total variation masking budget in (0,1).
    #[arg(long)]
    delta: f64,
    /// Error budget in (0,1); informational for the asymptotic bounds.
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
}

#[derive(Args)]
struct SweepArgs {
    channel: String,
    #[arg(long)]
    delta: f64,
    /// Sweep spec w<1|2>.<row>.<col>:<start>:<stop>:<steps>; the chosen
    /// entry is set and the rest of its row renormalized.
    #[arg(long)]
    spec: String,
}

#[derive(Args)]
struct GaussianArgs {
    /// Noise variance; omit when using --sweep.
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long)]
    delta: f64,
    /// Sigma2 sweep <start>:<stop>:<steps>, emitting CSV rows (sigma2, L).
    #[arg(long)]
    sweep: Option<String>,
}

#[derive(Args)]
struct AsymptoticsArgs {
    channel: String,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    gamma1: f64,
    #[arg(long)]
    gamma2: f64,
    #[arg(long, default_value_t = 0.1)]
    kappa: f64,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.5)]
    phi: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Exact,
    Mc,
}

#[derive(Args)]
struct SimulateArgs {
    channel: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    gamma1: f64,
    #[arg(long)]
    gamma2: f64,
    /// Active-symbol distribution as a JSON array; defaults to a point
    /// mass on the active symbol of each state.
    #[arg(long)]
    pbar1: Option<String>,
    #[arg(long)]
    pbar2: Option<String>,
    #[arg(long, default_value_t = 2)]
    messages: usize,
    #[arg(long, default_value_t = 1)]
    keys: usize,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::Mc)]
    mode: ModeArg,
    #[arg(long, default_value_t = 0.5)]
    phi: f64,
    /// Run a square-root-law sweep over these blocklengths (comma list)
    /// instead of a single experiment.
    #[arg(long)]
    sweep_n: Option<String>,
    /// Maximum error rate accepted while growing |M| in a sweep.
    #[arg(long, default_value_t = 0.05)]
    target_pe: f64,
    #[arg(long, default_value_t = 0.2)]
    delta: f64,
}

#[derive(Serialize)]
struct RunManifest {
    subcommand: String,
    inputs: Vec<String>,
    flags: BTreeMap<String, String>,
    seed: Option<u64>,
    version: String,
    output_format: String,
}

impl RunManifest {
    fn new(subcommand: &str, format: &str) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            inputs: Vec::new(),
            flags: BTreeMap::new(),
            seed: None,
            version: env!("CARGO_PKG_VERSION").to_string(),
            output_format: format.to_string(),
        }
    }

    fn input(mut self, path: &str) -> Self {
        self.inputs.push(path.to_string());
        self
    }

    fn flag(mut self, key: &str, value: impl ToString) -> Self {
        self.flags.insert(key.to_string(), value.to_string());
        self
    }
}

enum CliError {
    Io(String),
    Domain(String),
}

impl From<maskbound::Error> for CliError {
    fn from(e: maskbound::Error) -> Self {
        CliError::Domain(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn load_channel(path: &str) -> CliResult<CompoundChannel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {path}: {e}")))?;
    let spec: ChannelSpec = serde_json::from_str(&text)
        .map_err(|e| CliError::Io(format!("cannot parse {path}: {e}")))?;
    Ok(spec.to_compound()?)
}

/// 12 significant digits, locale-free.
fn sig12(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.11e}")
    }
}

fn emit_json<T: Serialize>(manifest: &RunManifest, result: &T) {
    #[derive(Serialize)]
    struct Envelope<'a, T> {
        manifest: &'a RunManifest,
        result: &'a T,
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&Envelope { manifest, result }).expect("serializable")
    );
}

fn emit_csv_manifest(manifest: &RunManifest) {
    println!(
        "# {}",
        serde_json::to_string(manifest).expect("serializable")
    );
}

fn budget_from_env() -> CliResult<u128> {
    match std::env::var("MASKBOUND_BUDGET") {
        Ok(v) => v
            .parse::<u128>()
            .map_err(|_| CliError::Domain(format!("MASKBOUND_BUDGET must be an integer, got {v}"))),
        Err(_) => Ok(DEFAULT_BUDGET),
    }
}

fn active_rows(ch: &CompoundChannel) -> CliResult<(Distribution, Distribution)> {
    if ch.input_len() != 2 {
        return Err(CliError::Domain(format!(
            "closed forms need a binary input alphabet, got {} symbols",
            ch.input_len()
        )));
    }
    Ok((
        ch.w1().row(1 - ch.off1()).clone(),
        ch.w2().row(1 - ch.off2()).clone(),
    ))
}

fn default_pbar(ch: &CompoundChannel, state: usize) -> CliResult<Distribution> {
    if ch.input_len() != 2 {
        return Err(CliError::Domain(
            "provide --pbar1/--pbar2 for non-binary input alphabets".to_string(),
        ));
    }
    Ok(Distribution::point_mass(1 - ch.off(state), 2))
}

fn parse_pbar(text: &str) -> CliResult<Distribution> {
    let probs: Vec<f64> = serde_json::from_str(text)
        .map_err(|e| CliError::Io(format!("cannot parse pbar {text}: {e}")))?;
    Ok(Distribution::new(probs)?)
}

fn parse_range(spec: &str) -> CliResult<(f64, f64, usize)> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Domain(format!(
            "range must be start:stop:steps, got {spec}"
        )));
    }
    let start: f64 = parts[0]
        .parse()
        .map_err(|_| CliError::Domain(format!("bad range start {}", parts[0])))?;
    let stop: f64 = parts[1]
        .parse()
        .map_err(|_| CliError::Domain(format!("bad range stop {}", parts[1])))?;
    let steps: usize = parts[2]
        .parse()
        .map_err(|_| CliError::Domain(format!("bad range steps {}", parts[2])))?;
    Ok((start, stop, steps))
}

struct SweepSpec {
    matrix: usize,
    row: usize,
    col: usize,
    start: f64,
    stop: f64,
    steps: usize,
}

fn parse_sweep_spec(spec: &str) -> CliResult<SweepSpec> {
    let bad = || CliError::Domain(format!("invalid sweep spec: {spec}"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 4 {
        return Err(bad());
    }
    let name: Vec<&str> = parts[0].split('.').collect();
    if name.len() != 3 {
        return Err(bad());
    }
    let matrix = match name[0] {
        "w1" => 1,
        "w2" => 2,
        _ => return Err(bad()),
    };
    Ok(SweepSpec {
        matrix,
        row: name[1].parse().map_err(|_| bad())?,
        col: name[2].parse().map_err(|_| bad())?,
        start: parts[1].parse().map_err(|_| bad())?,
        stop: parts[2].parse().map_err(|_| bad())?,
        steps: parts[3].parse().map_err(|_| bad())?,
    })
}

/// Sets entry (row, col) to `value` and renormalizes the rest of the row.
fn mutate_row(w: &Dmc, row: usize, col: usize, value: f64) -> CliResult<Dmc> {
    if row >= w.input_len() || col >= w.output_len() {
        return Err(CliError::Domain(format!(
            "sweep target ({row},{col}) outside the channel matrix"
        )));
    }
    if !(0.0..=1.0).contains(&value) {
        return Err(CliError::Domain(format!(
            "swept entry must stay in [0,1], got {value}"
        )));
    }
    let mut rows: Vec<Vec<f64>> = w.rows().iter().map(|r| r.probs().to_vec()).collect();
    let rest: f64 = rows[row]
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != col)
        .map(|(_, v)| v)
        .sum();
    if rest <= 0.0 && (1.0 - value).abs() > 1e-12 {
        return Err(CliError::Domain(
            "cannot renormalize a row with no remaining mass".to_string(),
        ));
    }
    let scale = if rest > 0.0 { (1.0 - value) / rest } else { 0.0 };
    for (i, v) in rows[row].iter_mut().enumerate() {
        if i == col {
            *v = value;
        } else {
            *v *= scale;
        }
    }
    Ok(Dmc::from_raw(rows)?)
}

fn cmd_divergence(args: &ChannelArgs) -> CliResult<()> {
    let ch = load_channel(&args.channel)?;
    let (q1t, q2t) = active_rows(&ch)?;
    let profile = DivergenceProfile::compute(&q1t, &q2t, ch.q0())?;
    #[derive(Serialize)]
    struct Out {
        profile: DivergenceProfile,
        absolute_continuity: bool,
    }
    let manifest = RunManifest::new("divergence", "json").input(&args.channel);
    emit_json(
        &manifest,
        &Out {
            profile,
            absolute_continuity: absolute_continuity_check(&ch),
        },
    );
    Ok(())
}

fn cmd_feasibility(args: &ChannelArgs) -> CliResult<()> {
    let ch = load_channel(&args.channel)?;
    let report = feasibility_gap(ch.w1(), ch.w2())?;
    let manifest = RunManifest::new("feasibility", "json").input(&args.channel);
    emit_json(&manifest, &report);
    Ok(())
}

fn cmd_bounds(args: &BoundsArgs) -> CliResult<()> {
    let ch = load_channel(&args.channel)?;
    let prob = MaskingProblem::new(ch, args.delta, args.epsilon)?;
    let report = optimality_verdict(&prob)?;
    let manifest = RunManifest::new("bounds", "json")
        .input(&args.channel)
        .flag("delta", args.delta)
        .flag("epsilon", args.epsilon);
    emit_json(&manifest, &report);
    Ok(())
}

fn bounds_for_channel(ch: CompoundChannel, delta: f64) -> maskbound::Result<BoundReport> {
    let prob = MaskingProblem::new(ch, delta, 0.05)?;
    optimality_verdict(&prob)
}

fn cmd_sweep(args: &SweepArgs) -> CliResult<()> {
    let ch = load_channel(&args.channel)?;
    let spec = parse_sweep_spec(&args.spec)?;
    let manifest = RunManifest::new("sweep", "csv")
        .input(&args.channel)
        .flag("delta", args.delta)
        .flag("spec", &args.spec);
    emit_csv_manifest(&manifest);
    println!("param,inner_l,outer_u,gap,status");
    let points = spec.steps.max(1);
    for i in 0..=spec.steps {
        let value = if spec.steps == 0 {
            spec.start
        } else {
            spec.start + (spec.stop - spec.start) * i as f64 / points as f64
        };
        let (w1, w2) = if spec.matrix == 1 {
            (mutate_row(ch.w1(), spec.row, spec.col, value)?, ch.w2().clone())
        } else {
            (ch.w1().clone(), mutate_row(ch.w2(), spec.row, spec.col, value)?)
        };
        let row = maskbound::channel::validate_compound(w1, w2)
            .and_then(|c| bounds_for_channel(c, args.delta));
        match row {
            Ok(r) => {
                let gap = r.outer_u - r.inner_l;
                println!(
                    "{},{},{},{},ok",
                    sig12(value),
                    sig12(r.inner_l),
                    sig12(r.outer_u),
                    sig12(gap)
                );
            }
            Err(e) => {
                // Flagged, not aborted: a sweep may cross invalid regions.
                println!(
                    "{},nan,nan,nan,{}",
                    sig12(value),
                    e.to_string().replace(',', ";")
                );
            }
        }
        if spec.steps == 0 {
            break;
        }
    }
    Ok(())
}

fn cmd_gaussian(args: &GaussianArgs) -> CliResult<()> {
    match (&args.sweep, args.sigma2) {
        (Some(range), _) => {
            let (start, stop, steps) = parse_range(range)?;
            let manifest = RunManifest::new("gaussian", "csv")
                .flag("delta", args.delta)
                .flag("sweep", range);
            emit_csv_manifest(&manifest);
            println!("sigma2,throughput");
            let points = steps.max(1);
            for i in 0..=steps {
                let s2 = if steps == 0 {
                    start
                } else {
                    start + (stop - start) * i as f64 / points as f64
                };
                let l = gaussian_optimal_throughput(GaussianSetup::new(s2)?, args.delta)?;
                println!("{},{}", sig12(s2), sig12(l));
                if steps == 0 {
                    break;
                }
            }
            Ok(())
        }
        (None, Some(s2)) => {
            let setup = GaussianSetup::new(s2)?;
            #[derive(Serialize)]
            struct Out {
                closed_form: maskbound::gaussian::GaussianQuantities,
                quadrature: maskbound::gaussian::GaussianQuantities,
                throughput: f64,
            }
            let out = Out {
                closed_form: gaussian_closed_form(setup),
                quadrature: gaussian_quadrature_oracle(setup)?,
                throughput: gaussian_optimal_throughput(setup, args.delta)?,
            };
            let manifest = RunManifest::new("gaussian", "json")
                .flag("sigma2", s2)
                .flag("delta", args.delta);
            emit_json(&manifest, &out);
            Ok(())
        }
        (None, None) => Err(CliError::Domain(
            "provide --sigma2 or --sweep".to_string(),
        )),
    }
}

fn cmd_asymptotics(args: &AsymptoticsArgs) -> CliResult<()> {
    let ch = load_channel(&args.channel)?;
    let prob = MaskingProblem::new(ch, args.delta, 0.05)?;
    let pbar1 = default_pbar(&prob.ch, 1)?;
    let pbar2 = default_pbar(&prob.ch, 2)?;
    let (q1t, q2t) = active_rows(&prob.ch)?;
    let qbar1 = output_distribution(prob.ch.w1(), &pbar1)?;
    let qbar2 = output_distribution(prob.ch.w2(), &pbar2)?;
    let point = inner_bound_point(&prob, args.gamma1, args.gamma2, &pbar1, &pbar2)?;
    let moments = adversary_moments(args.phi, &q1t, &q2t, prob.ch.q0())?;
    let mu1 = args.gamma1 / (args.n as f64).sqrt();
    let mu2 = args.gamma2 / (args.n as f64).sqrt();
    let design = AdversaryDesign::new(args.phi, mu1.min(mu2), mu1.max(mu2), args.n, &moments)?;
    let (alpha_bound, beta_bound) = match adversary_error_bounds(&design, &moments) {
        Ok(pair) => (Some(pair.0), Some(pair.1)),
        Err(_) => (None, None),
    };
    let sparse1 = SparseInput::new(mu1, pbar1.clone(), prob.ch.off1())?;
    let sparse2 = SparseInput::new(mu2, pbar2.clone(), prob.ch.off2())?;
    #[derive(Serialize)]
    struct Out {
        inner_point: maskbound::bounds::InnerBoundPoint,
        tv_estimate: f64,
        key_length_threshold: f64,
        rate_threshold_1: f64,
        rate_threshold_2: f64,
        moments: maskbound::probdist::AdversaryMoments,
        design: AdversaryDesign,
        alpha_bound: Option<f64>,
        beta_bound: Option<f64>,
        tv_lower_bound: Option<f64>,
        bhattacharyya_tv_bound: f64,
        nonac_throughput_bound: f64,
        outer_phi_interval: (f64, f64),
    }
    let out = Out {
        tv_estimate: tv_product_mixture_estimate(
            args.gamma1,
            args.gamma2,
            prob.ch.q0(),
            &qbar1,
            &qbar2,
            args.n,
        )?,
        key_length_threshold: key_length_threshold(
            &prob,
            args.gamma1,
            args.gamma2,
            &pbar1,
            &pbar2,
            args.kappa,
            args.n,
        )?,
        rate_threshold_1: rate_threshold(args.n, &sparse1, prob.ch.w1())?,
        rate_threshold_2: rate_threshold(args.n, &sparse2, prob.ch.w2())?,
        tv_lower_bound: match (alpha_bound, beta_bound) {
            (Some(a), Some(b)) => Some(tv_lower_from_test(a, b)?),
            _ => None,
        },
        alpha_bound,
        beta_bound,
        bhattacharyya_tv_bound: bhattacharyya_tv_bound(&qbar1, &qbar2, args.n)?,
        nonac_throughput_bound: nonac_throughput_bound(args.delta, args.n.max(2))?,
        outer_phi_interval: outer_phi_interval(&prob)?,
        inner_point: point,
        moments,
        design,
    };
    let manifest = RunManifest::new("asymptotics", "json")
        .input(&args.channel)
        .flag("delta", args.delta)
        .flag("gamma1", args.gamma1)
        .flag("gamma2", args.gamma2)
        .flag("kappa", args.kappa)
        .flag("n", args.n)
        .flag("phi", args.phi);
    emit_json(&manifest, &out);
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> CliResult<()> {
    let ch = load_channel(&args.channel)?;
    let pbar1 = match &args.pbar1 {
        Some(t) => parse_pbar(t)?,
        None => default_pbar(&ch, 1)?,
    };
    let pbar2 = match &args.pbar2 {
        Some(t) => parse_pbar(t)?,
        None => default_pbar(&ch, 2)?,
    };
    let cfg = SimConfig {
        ch,
        gamma1: args.gamma1,
        gamma2: args.gamma2,
        pbar1,
        pbar2,
        n: args.n,
        m_count: args.messages,
        k_count: args.keys,
        trials: args.trials,
        seed: args.seed,
        mode: match args.mode {
            ModeArg::Exact => SimMode::Exact,
            ModeArg::Mc => SimMode::MonteCarlo,
        },
        phi: args.phi,
        budget: budget_from_env()?,
        max_ci: None,
    };
    let mut manifest = RunManifest::new("simulate", "json")
        .input(&args.channel)
        .flag("n", args.n)
        .flag("gamma1", args.gamma1)
        .flag("gamma2", args.gamma2)
        .flag("messages", args.messages)
        .flag("keys", args.keys)
        .flag("trials", args.trials)
        .flag(
            "mode",
            if cfg.mode == SimMode::Exact { "exact" } else { "mc" },
        )
        .flag("phi", args.phi);
    manifest.seed = Some(args.seed);
    match &args.sweep_n {
        Some(list) => {
            let n_list: Vec<usize> = list
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<usize>()
                        .map_err(|_| CliError::Domain(format!("bad blocklength {s}")))
                })
                .collect::<CliResult<_>>()?;
            let rows = sqrt_law_sweep(&cfg, args.delta, &n_list, args.target_pe)?;
            let mut manifest = manifest;
            manifest.output_format = "csv".to_string();
            emit_csv_manifest(&manifest);
            println!("n,m_count,log_m,ratio,pe_max,tv_induced,slack");
            for r in rows {
                println!(
                    "{},{},{},{},{},{},{}",
                    r.n,
                    r.m_count,
                    sig12(r.log_m),
                    sig12(r.ratio),
                    sig12(r.pe_max),
                    sig12(r.tv_induced),
                    sig12(r.slack)
                );
            }
        }
        None => {
            let report = run_experiment(&cfg)?;
            emit_json(&manifest, &report);
        }
    }
    Ok(())
}

fn run() -> CliResult<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Divergence(a) => cmd_divergence(a),
        Command::Feasibility(a) => cmd_feasibility(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Gaussian(a) => cmd_gaussian(a),
        Command::Asymptotics(a) => cmd_asymptotics(a),
        Command::Simulate(a) => cmd_simulate(a),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
