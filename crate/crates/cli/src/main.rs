use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use ct_planner::baselines::{
    brute_force_optimal, default_bounds, export_minlp, trace_validate, tours_needed, write_model, Bigmrta, ExactCaps, FeasRnd,
};
use ct_planner::bench::{emit_results, run_experiment, summary_text, ExperimentSpec, Method};
use ct_planner::policy::{load_checkpoint, EncoderKind, PolicyConfig, PolicyPlanner};
use ct_planner::scenario::{generate_scenario, load_scenario, save_scenario, GenerationConfig};
use ct_planner::simenv::{run_episode, EventLog, Planner};
use ct_planner::training::{evaluate_policy, final_checkpoint_path, held_out_scenarios, PpoConfig, TrainingRun};

#[derive(Parser)]
#[command(name = "ct-planner", version, about = "Decentralized multi-robot task allocation for collective transport")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a scenario and write it as TOML.
    Generate {
        #[arg(long, default_value_t = 0.2)]
        lambda_t: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda_r: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one episode and optionally write its leg log as CSV.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// A checkpoint path, or one of `feasrnd`, `bigmrta`.
        #[arg(long)]
        policy: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        log_out: Option<PathBuf>,
    },
    /// Train a policy with PPO.
    Train {
        #[arg(long, default_value = "capam-td")]
        encoder: String,
        #[arg(long, default_value_t = 0.2)]
        lambda_t: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda_r: f64,
        /// Overrides the profile's step budget.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Use the full-size network and PPO settings instead of the desk profile.
        #[arg(long)]
        paper_scale: bool,
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        checkpoint_every: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Greedy completion rate of a checkpoint on held-out scenarios.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        lambda_t: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda_r: f64,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 1_000_000)]
        seed: u64,
    },
    /// Run an experiment grid described by a TOML spec.
    Bench {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exhaustive optimum for a tiny scenario under full communication.
    SolveExact {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        schedule_out: Option<PathBuf>,
    },
    /// Write the algebraic model of a scenario.
    ExportMinlp {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        tours: Option<usize>,
        #[arg(long)]
        decisions: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a leg log against the algebraic model.
    ValidateTrace {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        tours: Option<usize>,
        #[arg(long)]
        decisions: Option<usize>,
    },
}

fn planner_for(spec: &str, seed: u64) -> Result<Box<dyn Planner>> {
    Ok(match spec {
        "feasrnd" => Box::new(FeasRnd::new(seed)),
        "bigmrta" => Box::new(Bigmrta),
        path => {
            let ck = load_checkpoint(path.as_ref()).with_context(|| format!("loading {path}"))?;
            Box::new(PolicyPlanner::greedy(Arc::new(ck.policy)))
        }
    })
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Generate { lambda_t, lambda_r, seed, out } => {
            let s = generate_scenario(&GenerationConfig::with_scales(lambda_t, lambda_r), seed)?;
            save_scenario(&s, &out)?;
            println!("wrote {} ({} tasks, {} robots)", out.display(), s.num_tasks(), s.num_robots());
        }
        Command::Simulate { scenario, policy, seed, log_out } => {
            let s = Arc::new(load_scenario(&scenario)?);
            let mut planner = planner_for(&policy, seed)?;
            let r = run_episode(s, seed, planner.as_mut())?;
            println!(
                "completion {:.1}% ({} tasks), {} decisions, {} messages, {} bytes, end {:.1} s",
                100.0 * r.success_rate,
                r.n_success,
                r.decisions,
                r.comm.messages,
                r.comm.bytes,
                r.end_time
            );
            if let Some(path) = log_out {
                r.trace.write_csv(&path)?;
            }
        }
        Command::Train { encoder, lambda_t, lambda_r, steps, seed, paper_scale, resume, checkpoint_every, out } => {
            let mut run = match resume {
                Some(path) => TrainingRun::load(&path)?,
                None => {
                    let kind = match encoder.parse::<Method>()?.encoder() {
                        Some(k) => k,
                        None => bail!("{encoder} is not a learned method"),
                    };
                    let (pcfg, ppo) = if paper_scale {
                        (PolicyConfig::default(), PpoConfig::default())
                    } else {
                        (PolicyConfig::desk(), PpoConfig::desk())
                    };
                    TrainingRun::new(pcfg.with_encoder(kind), ppo, GenerationConfig::with_scales(lambda_t, lambda_r), seed)?
                }
            };
            if let Some(n) = steps {
                run.state.ppo.total_steps = n;
            }
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            run.run(Some(&out), checkpoint_every)?;
            println!("wrote {}", final_checkpoint_path(&out).display());
        }
        Command::Evaluate { checkpoint, lambda_t, lambda_r, samples, seed } => {
            let policy = Arc::new(load_checkpoint(&checkpoint)?.policy);
            let scen = held_out_scenarios(&GenerationConfig::with_scales(lambda_t, lambda_r), samples, seed)?;
            let rates = evaluate_policy(&policy, &scen)?;
            let mean = rates.iter().sum::<f64>() / rates.len().max(1) as f64;
            println!("{}: mean completion {:.2}% over {} scenarios", encoder_name(policy.config.encoder), 100.0 * mean, rates.len());
        }
        Command::Bench { spec, out } => {
            let text = fs::read_to_string(&spec).with_context(|| format!("reading {}", spec.display()))?;
            let spec: ExperimentSpec = toml::from_str(&text).with_context(|| format!("parsing {}", spec.display()))?;
            let table = run_experiment(&spec)?;
            emit_results(&table, &out)?;
            print!("{}", summary_text(&table));
        }
        Command::SolveExact { scenario, schedule_out } => {
            let s = load_scenario(&scenario)?;
            let sol = brute_force_optimal(&s, ExactCaps::default())?;
            println!(
                "optimum {} of {} tasks ({} nodes{})",
                sol.n_success,
                s.num_tasks(),
                sol.nodes,
                if sol.exhaustive { "" } else { ", capped: lower bound only" }
            );
            if let Some(path) = schedule_out {
                sol.schedule.write_csv(&path)?;
            }
        }
        Command::ExportMinlp { scenario, tours, decisions, out } => {
            let s = load_scenario(&scenario)?;
            let (ds, dh) = default_bounds(&s);
            let model = export_minlp(&s, tours.unwrap_or(ds), decisions.unwrap_or(dh))?;
            fs::write(&out, write_model(&model)).with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {} ({} variables, {} constraints)", out.display(), model.variables.len(), model.constraints.len());
        }
        Command::ValidateTrace { scenario, log, tours, decisions } => {
            let s = load_scenario(&scenario)?;
            let log = EventLog::read_csv(&log)?;
            let (ds, dh) = default_bounds(&s);
            let need = (0..s.num_robots()).map(|r| tours_needed(&log, r)).max().unwrap_or(0);
            let report = trace_validate(&log, &s, tours.unwrap_or(ds.max(need)), decisions.unwrap_or(dh));
            if !report.mappable {
                bail!("trace does not fit the model: {}", report.reason.unwrap_or_default());
            }
            for v in &report.violations {
                println!("{} {}: {}", v.family, v.indices, v.detail);
            }
            println!("{} violations, N_success {}", report.violations.len(), report.n_success);
            if !report.violations.is_empty() {
                std::process::exit(1);
            }
        }
    }
    Ok(())
}

fn encoder_name(k: EncoderKind) -> &'static str {
    k.method_name()
}
