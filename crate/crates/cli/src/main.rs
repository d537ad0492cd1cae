//! Command-line front end: instance file I/O, experiment orchestration,
//! and result emission.
//!
//! Exit codes: 0 on success, 2 on input/schema errors, 3 on solver or
//! simulation errors.

mod schema;

use clap::{Args, Parser, Subcommand};
use restless_core::belief::{BeliefState, Observed};
use restless_core::feedback::{
    self, balanced_penalty, lagrangian_lp_value, whittle_lp_model, whittle_lp_upper_bound,
    AlwaysPlay, BalancedIndexPolicy, FeedbackPolicy, Myopic,
};
use restless_core::gallery::{
    self, GalleryId, GalleryInstance, RegionPolicy, StalenessRegion,
};
use restless_core::instance::{MonotoneInstance, MonotoneVariant};
use restless_core::monotone;
use restless_core::probe;
use restless_core::replenish;
use restless_core::sim::feedback::{exact_policy_eval, simulate as simulate_feedback, vi_optimal, ExactOptions};
use restless_core::sim::lyapunov;
use restless_core::sim::monotone::simulate as simulate_monotone;
use restless_core::sim::probe::simulate as simulate_probe;
use restless_core::sim::replenish::{simulate as simulate_replenish, RepairPolicy};
use restless_core::sim::{SimConfig, SimResult};
use restless_core::whittle::{PlainWhittle, ThresholdWhittle, WhittleIndexTable};
use schema::{InstanceFile, LoadedInstance};
use serde_json::{json, Value};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "restless", version, about = "Restless bandit planning and evaluation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance and print its index-policy parameters.
    Index(IndexArgs),
    /// Simulate (or exactly evaluate) a policy on an instance.
    Simulate(SimulateArgs),
    /// Reproduce a named gap family's claim-vs-measured table.
    Gap(GapArgs),
}

#[derive(Args)]
struct IndexArgs {
    /// Instance file (JSON).
    instance: PathBuf,
    /// Penalty-scan accuracy for feedback instances.
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    /// Truncation override for the LP upper bound.
    #[arg(long)]
    tmax: Option<u64>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dump the LP model in CPLEX-LP text format for debugging.
    #[arg(long)]
    dump_lp: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Instance file (JSON).
    instance: PathBuf,
    /// Policy: balanced | threshold-whittle | plain-whittle | myopic |
    /// always-play:<arm> | optimal-vi (feedback); balanced (monotone,
    /// probe); balanced | plain-whittle (replenish).
    #[arg(long, default_value = "balanced")]
    policy: String,
    #[arg(long, default_value_t = 200_000)]
    horizon: u64,
    #[arg(long, default_value_t = 10_000)]
    burnin: u64,
    #[arg(long, default_value_t = 3)]
    reps: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Penalty-scan accuracy for feedback instances.
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    /// Belief-clock cap for exact evaluation / value iteration.
    #[arg(long, default_value_t = 100)]
    tcap: u64,
    /// Evaluate the policy exactly through its induced chain instead of
    /// simulating (feedback instances only).
    #[arg(long)]
    exact: bool,
    /// json or csv (csv lists per-replication means).
    #[arg(long, default_value = "json")]
    format: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GapArgs {
    /// Family: lp-gap | index-gap | myopic-gap | replenish-gap |
    /// nonseparable-gap.
    family: String,
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    reps: Option<u32>,
    /// Also run value iteration to recover the optimal region (index-gap).
    #[arg(long)]
    with_vi: bool,
    /// Write the generated instance file here.
    #[arg(long)]
    emit_instance: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Error carrying the process exit code.
struct CmdError {
    code: u8,
    message: String,
}

impl CmdError {
    fn input(message: impl Into<String>) -> Self {
        CmdError {
            code: 2,
            message: message.into(),
        }
    }

    fn compute(message: impl Into<String>) -> Self {
        CmdError {
            code: 3,
            message: message.into(),
        }
    }
}

macro_rules! compute {
    ($expr:expr) => {
        $expr.map_err(|e| CmdError::compute(e.to_string()))?
    };
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Index(args) => cmd_index(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Gap(args) => cmd_gap(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn read_instance(path: &PathBuf) -> Result<(InstanceFile, LoadedInstance), CmdError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CmdError::input(format!("{}: {e}", path.display())))?;
    let file = InstanceFile::parse(&text).map_err(|e| CmdError::input(e.to_string()))?;
    let loaded = file.load().map_err(|e| CmdError::input(e.to_string()))?;
    Ok((file, loaded))
}

fn emit(out: &Option<PathBuf>, value: &Value) -> Result<(), CmdError> {
    let text = serde_json::to_string_pretty(value).expect("report serialization");
    match out {
        Some(path) => std::fs::write(path, text.as_bytes())
            .map_err(|e| CmdError::input(format!("{}: {e}", path.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn infer_variant(inst: &MonotoneInstance) -> MonotoneVariant {
    if inst.has_switch_costs() {
        MonotoneVariant::Switching
    } else if inst.has_durations() || inst.play_budget() > 1 {
        MonotoneVariant::MultiPlay
    } else {
        MonotoneVariant::Base
    }
}

fn cmd_index(args: IndexArgs) -> Result<(), CmdError> {
    let (_, loaded) = read_instance(&args.instance)?;
    let report = match loaded {
        LoadedInstance::Feedback(inst) => {
            let params = compute!(balanced_penalty(&inst, args.eps));
            if let Some(path) = &args.dump_lp {
                let horizons: Vec<u64> = inst
                    .arms()
                    .iter()
                    .map(|a| args.tmax.unwrap_or_else(|| feedback::default_truncation(a)))
                    .collect();
                let model = whittle_lp_model(&inst, &horizons);
                std::fs::write(path, model.to_cplex_lp())
                    .map_err(|e| CmdError::input(e.to_string()))?;
            }
            let lp_value = compute!(whittle_lp_upper_bound(&inst, args.tmax));
            let table = WhittleIndexTable::new(&inst);
            let arms: Vec<Value> = params
                .arms
                .iter()
                .enumerate()
                .map(|(i, ap)| {
                    let whittle_ready = ap.wait.map(|w| {
                        table.index(i, BeliefState { last: Observed::Bad, t: w })
                    });
                    json!({
                        "arm": i,
                        "active": ap.active,
                        "excess": ap.excess,
                        "wait": ap.wait,
                        "potential": ap.potential,
                        "whittle_good_fresh": table.index_good_fresh(i),
                        "whittle_bad_at_wait": whittle_ready,
                    })
                })
                .collect();
            json!({
                "type": "feedback",
                "penalty": params.penalty,
                "penalty_low": params.penalty_low,
                "penalty_high": params.penalty_high,
                "total_excess": params.total_excess,
                "lp_upper_bound": lp_value,
                "arms": arms,
            })
        }
        LoadedInstance::Monotone(inst) => {
            let variant = infer_variant(&inst);
            if let Some(path) = &args.dump_lp {
                let lp = compute!(monotone::build_balance_lp(&inst, variant));
                std::fs::write(path, lp.model.to_cplex_lp())
                    .map_err(|e| CmdError::input(e.to_string()))?;
            }
            let sol = compute!(monotone::solve_balance(&inst, variant));
            let arms: Vec<Value> = (0..inst.arms().len())
                .map(|i| {
                    json!({
                        "arm": i,
                        "active": sol.active[i],
                        "excess": sol.excess[i],
                        "trivially_played": sol.trivially_played[i],
                        "tight_wait": sol.tight_wait[i],
                        "exploit_states": sol.exploit[i],
                        "potentials": sol.potentials[i],
                        "potential_change": sol.potential_change[i],
                    })
                })
                .collect();
            json!({
                "type": "monotone",
                "variant": format!("{:?}", variant),
                "penalty": sol.penalty,
                "objective": sol.objective,
                "max_cs_residual": sol.max_cs_residual,
                "arms": arms,
            })
        }
        LoadedInstance::Probe(inst) => {
            let params = compute!(probe::solve_probe(&inst));
            let arms: Vec<Value> = params
                .arms
                .iter()
                .enumerate()
                .map(|(i, ap)| {
                    json!({
                        "arm": i,
                        "active": ap.active,
                        "excess": ap.excess,
                        "potential": ap.potential,
                        "probe_after_bad": ap.probe_after_bad,
                        "try_plays": ap.try_plays,
                        "exploit_run": ap.exploit_run,
                    })
                })
                .collect();
            json!({
                "type": "probe",
                "penalty": params.penalty,
                "objective": params.objective,
                "max_cs_residual": params.max_cs_residual,
                "arms": arms,
            })
        }
        LoadedInstance::Replenish(inst) => {
            let params = compute!(replenish::solve_replenish(&inst));
            let machines: Vec<Value> = (0..inst.machines().len())
                .map(|i| {
                    json!({
                        "machine": i,
                        "active": params.active[i],
                        "excess": params.excess[i],
                        "repair_trigger": params.repair_trigger[i],
                        "state_potential": params.state_potential[i],
                    })
                })
                .collect();
            json!({
                "type": "replenish",
                "penalty": params.penalty,
                "objective": params.objective,
                "max_cs_residual": params.max_cs_residual,
                "machines": machines,
            })
        }
    };
    emit(&args.out, &report)
}

fn feedback_policy(
    name: &str,
    inst: &restless_core::FeedbackInstance,
    eps: f64,
    tcap: u64,
) -> Result<Box<dyn FeedbackPolicy>, CmdError> {
    match name {
        "balanced" => {
            let params = compute!(balanced_penalty(inst, eps));
            Ok(Box::new(BalancedIndexPolicy { params }))
        }
        "threshold-whittle" => {
            let params = compute!(balanced_penalty(inst, eps));
            Ok(Box::new(ThresholdWhittle {
                penalty: params.penalty,
                table: WhittleIndexTable::new(inst),
            }))
        }
        "plain-whittle" => Ok(Box::new(PlainWhittle {
            table: WhittleIndexTable::new(inst),
        })),
        "myopic" => Ok(Box::new(Myopic { restrict: None })),
        "optimal-vi" => {
            let out = compute!(vi_optimal(inst, 0.99, tcap, 1e-9, 3000));
            Ok(Box::new(out.policy))
        }
        _ => {
            if let Some(arm) = name.strip_prefix("always-play:") {
                let arm: usize = arm
                    .parse()
                    .map_err(|_| CmdError::input(format!("bad arm in policy {name}")))?;
                if arm >= inst.len() {
                    return Err(CmdError::input(format!("arm {arm} out of range")));
                }
                Ok(Box::new(AlwaysPlay(arm)))
            } else {
                Err(CmdError::input(format!("unknown feedback policy {name}")))
            }
        }
    }
}

fn sim_result_json(res: &SimResult) -> Value {
    serde_json::to_value(res).expect("sim result serialization")
}

fn sim_result_csv(res: &SimResult) -> String {
    let mut out = String::from("replication,mean\n");
    for (i, m) in res.replication_means.iter().enumerate() {
        out.push_str(&format!("{i},{m}\n"));
    }
    out.push_str(&format!("summary,{}\n", res.mean));
    out
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CmdError> {
    let (_, loaded) = read_instance(&args.instance)?;
    let cfg = SimConfig::new(args.horizon, args.burnin, args.reps, args.seed)
        .map_err(|e| CmdError::input(e.to_string()))?;
    let result: SimResult = match &loaded {
        LoadedInstance::Feedback(inst) => {
            let policy = feedback_policy(&args.policy, inst, args.eps, args.tcap)?;
            if args.exact {
                let opts = ExactOptions {
                    t_cap: args.tcap,
                    branch_floor: 1e-9,
                    max_states: 10_000_000,
                };
                let value = compute!(exact_policy_eval(inst, policy.as_ref(), &opts));
                let report = json!({
                    "policy": args.policy,
                    "exact": true,
                    "mean": value,
                    "t_cap": args.tcap,
                });
                return emit(&args.out, &report);
            }
            compute!(simulate_feedback(inst, policy.as_ref(), &cfg))
        }
        LoadedInstance::Monotone(inst) => {
            if args.policy != "balanced" {
                return Err(CmdError::input(format!(
                    "monotone instances support only the balanced policy, got {}",
                    args.policy
                )));
            }
            let variant = infer_variant(inst);
            let sol = compute!(monotone::solve_balance(inst, variant));
            compute!(simulate_monotone(inst, &sol, &cfg, false)).result
        }
        LoadedInstance::Probe(inst) => {
            if args.policy != "balanced" {
                return Err(CmdError::input(format!(
                    "probe instances support only the balanced policy, got {}",
                    args.policy
                )));
            }
            let params = compute!(probe::solve_probe(inst));
            compute!(simulate_probe(inst, &params, &cfg))
        }
        LoadedInstance::Replenish(inst) => match args.policy.as_str() {
            "balanced" => {
                let params = compute!(replenish::solve_replenish(inst));
                compute!(simulate_replenish(inst, &RepairPolicy::Duality(&params), &cfg))
            }
            "plain-whittle" => {
                compute!(simulate_replenish(inst, &RepairPolicy::WhittleIndex, &cfg))
            }
            other => {
                return Err(CmdError::input(format!(
                    "replenish instances support balanced | plain-whittle, got {other}"
                )))
            }
        },
    };
    match args.format.as_str() {
        "json" => emit(
            &args.out,
            &json!({ "policy": args.policy, "result": sim_result_json(&result) }),
        ),
        "csv" => {
            let text = sim_result_csv(&result);
            match &args.out {
                Some(path) => std::fs::write(path, text.as_bytes())
                    .map_err(|e| CmdError::input(e.to_string())),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        other => Err(CmdError::input(format!("unknown format {other}"))),
    }
}

fn cmd_gap(args: GapArgs) -> Result<(), CmdError> {
    let family = args.family.as_str();
    let report = match family {
        "lp-gap" => {
            let n = args.n.unwrap_or(50);
            let beta = args.beta.unwrap_or(1e-5);
            let id = GalleryId::LpGap { n, beta };
            let GalleryInstance::Feedback(inst) =
                gallery::generate(&id).map_err(|e| CmdError::input(e.to_string()))?
            else {
                unreachable!()
            };
            maybe_emit_instance(&args, &InstanceFile::from_feedback(&inst))?;
            let tmax = gallery::lp_gap_suggested_truncation(&inst);
            let lp_value = compute!(whittle_lp_upper_bound(&inst, Some(tmax)));
            let lagrangian = compute!(lagrangian_lp_value(&inst));
            let bound = gallery::lp_gap_complete_info_bound(n);
            json!({
                "family": "lp-gap",
                "n": n,
                "beta": beta,
                "truncation": tmax,
                "lp_value": lp_value,
                "lagrangian_value": lagrangian,
                "complete_information_bound": bound,
                "ratio": lp_value / bound,
                "claim": "ratio approaches e/(e-1) ~ 1.58 from below; passes at >= 1.5",
            })
        }
        "index-gap" => {
            let GalleryInstance::Feedback(inst) =
                gallery::generate(&GalleryId::IndexGap).map_err(|e| CmdError::input(e.to_string()))?
            else {
                unreachable!()
            };
            maybe_emit_instance(&args, &InstanceFile::from_feedback(&inst))?;
            let opts = ExactOptions {
                t_cap: 100,
                branch_floor: 1e-8,
                max_states: 10_000_000,
            };
            let mut rows = Vec::new();
            for (name, region, reference) in [
                ("optimal-region", StalenessRegion::Optimal, 1.46218),
                ("square-4", StalenessRegion::Square(4), 1.46167),
                ("square-3", StalenessRegion::Square(3), 1.46104),
            ] {
                let value =
                    compute!(exact_policy_eval(&inst, &RegionPolicy { region }, &opts));
                rows.push(json!({
                    "policy": name,
                    "exact_value": value,
                    "reference": reference,
                    "abs_error": (value - reference).abs(),
                }));
            }
            let vi = if args.with_vi {
                let out = compute!(vi_optimal(&inst, 0.99, 100, 1e-9, 3000));
                Some(json!({
                    "average_reward": out.average_reward,
                    "sweeps": out.sweeps,
                }))
            } else {
                None
            };
            json!({
                "family": "index-gap",
                "rows": rows,
                "value_iteration": vi,
                "claim": "optimal beats every axis-parallel square region",
            })
        }
        "myopic-gap" => {
            let n = args.n.unwrap_or(12);
            let GalleryInstance::Feedback(inst) =
                gallery::generate(&GalleryId::MyopicGap { n })
                    .map_err(|e| CmdError::input(e.to_string()))?
            else {
                unreachable!()
            };
            maybe_emit_instance(&args, &InstanceFile::from_feedback(&inst))?;
            let cfg = SimConfig::new(
                args.horizon.unwrap_or(400_000),
                20_000,
                args.reps.unwrap_or(3),
                args.seed,
            )
            .map_err(|e| CmdError::input(e.to_string()))?;
            let myopic = compute!(simulate_feedback(&inst, &Myopic { restrict: None }, &cfg));
            let explore = compute!(simulate_feedback(
                &inst,
                &Myopic {
                    restrict: Some((1..=n as usize).collect()),
                },
                &cfg
            ));
            json!({
                "family": "myopic-gap",
                "n": n,
                "myopic_mean": myopic.mean,
                "myopic_stderr": myopic.stderr,
                "round_robin_type2_mean": explore.mean,
                "round_robin_type2_stderr": explore.stderr,
                "claim": "myopic sticks at ~1 while exploring the bursty arms earns ~n/2",
            })
        }
        "replenish-gap" => {
            let n = args.n.unwrap_or(10);
            let GalleryInstance::Replenish(inst) =
                gallery::generate(&GalleryId::ReplenishGap { n })
                    .map_err(|e| CmdError::input(e.to_string()))?
            else {
                unreachable!()
            };
            maybe_emit_instance(&args, &InstanceFile::from_replenish(&inst))?;
            let params = compute!(replenish::solve_replenish(&inst));
            let cfg = SimConfig::new(
                args.horizon.unwrap_or(2_000_000),
                50_000,
                args.reps.unwrap_or(2),
                args.seed,
            )
            .map_err(|e| CmdError::input(e.to_string()))?;
            let duality =
                compute!(simulate_replenish(&inst, &RepairPolicy::Duality(&params), &cfg));
            let whittle =
                compute!(simulate_replenish(&inst, &RepairPolicy::WhittleIndex, &cfg));
            let drift = compute!(lyapunov::replenish_drift(&inst, &params, 1_000_000));
            json!({
                "family": "replenish-gap",
                "n": n,
                "duality_mean": duality.mean,
                "whittle_mean": whittle.mean,
                "ratio": duality.mean / whittle.mean.max(1e-12),
                "lp_objective": params.objective,
                "min_drift": drift.min_drift,
                "claim": "duality earns ~1/2 while the Whittle index earns O(1/n^3)",
            })
        }
        "nonseparable-gap" => {
            let n = args.n.unwrap_or(8);
            let GalleryInstance::Nonseparable(spec) =
                gallery::generate(&GalleryId::NonseparableGap { n })
                    .map_err(|e| CmdError::input(e.to_string()))?
            else {
                unreachable!()
            };
            if let Some(path) = &args.emit_instance {
                let text = serde_json::to_string_pretty(&spec).expect("spec serialization");
                std::fs::write(path, text).map_err(|e| CmdError::input(e.to_string()))?;
            }
            json!({
                "family": "nonseparable-gap",
                "n": n,
                "instance": serde_json::to_value(&spec).unwrap(),
            })
        }
        other => return Err(CmdError::input(format!("unknown gap family {other}"))),
    };
    emit(&args.out, &report)
}

fn maybe_emit_instance(args: &GapArgs, file: &InstanceFile) -> Result<(), CmdError> {
    if let Some(path) = &args.emit_instance {
        std::fs::write(path, file.emit()).map_err(|e| CmdError::input(e.to_string()))?;
    }
    Ok(())
}
