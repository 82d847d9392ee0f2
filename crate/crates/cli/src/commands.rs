use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use log::info;
use revstream::audit::{stability_matrix, AuditError, Checker};
use revstream::episode::{to_text, tokenize_stream};
use revstream::forge::{
    run_pipeline, PipelineConfig, RecordError, TierSelection, TrajectoryRecord,
};
use revstream::harness::{
    cost_agent, cost_sor, decode_session, scaling_experiment, to_csv, AgentSteps, HarnessError,
    Policy, SessionConfig, SorAccounting, TriggerBias, WeightTable,
};
use revstream::render::{render, RenderEvent};
use revstream::scope::Backend;
use revstream::{detokenize, Mode, Profile, SentinelSet};
use serde::Serialize;
use serde_json::json;

use crate::config::FileConfig;
use crate::{
    BuildDataArgs, Cli, Command, CostArgs, Failure, RenderArgs, ScriptFormat, SimulateArgs, Switch,
    ValidateArgs,
};

/// Settings shared by every command after resolution.
#[derive(Debug, Clone, Serialize)]
struct Global {
    seed: u64,
    profile: Profile,
    mode: Mode,
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let global = Global {
        seed: cli.seed.or(file.seed).unwrap_or(0),
        profile: cli.profile.or(file.profile).unwrap_or_default(),
        mode: cli.mode.or(file.mode).unwrap_or_default(),
    };
    match cli.command {
        Command::Render(args) => cmd_render(&global, args),
        Command::BuildData(args) => cmd_build_data(&global, &file, args),
        Command::Simulate(args) => cmd_simulate(&global, &file, args),
        Command::Cost(args) => cmd_cost(args),
        Command::Validate(args) => cmd_validate(args),
    }
}

fn log_config(command: &str, resolved: serde_json::Value) {
    info!("{command} config: {resolved}");
}

fn read_input(path: &Path) -> anyhow::Result<String> {
    if path.as_os_str() == "-" {
        let mut text = String::new();
        io::stdin()
            .read_to_string(&mut text)
            .context("reading stdin")?;
        return Ok(text);
    }
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_events(path: &Path, events: &[RenderEvent]) -> anyhow::Result<()> {
    let mut text = String::new();
    for event in events {
        text.push_str(&serde_json::to_string(event)?);
        text.push('\n');
    }
    write_file(path, &text)
}

fn print_stdout(text: &str) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Failure> {
    let line = serde_json::to_string(value).map_err(anyhow::Error::from)?;
    print_stdout(&(line + "\n"))
}

fn cmd_render(global: &Global, args: RenderArgs) -> Result<(), Failure> {
    log_config(
        "render",
        json!({"input": args.input, "events_out": args.events_out, "global": global}),
    );
    let sentinels = SentinelSet::canonical();
    let text = read_input(&args.input)?;
    let stream = tokenize_stream(&text, global.profile, &sentinels);
    let (buffer, events) =
        render(&stream, &sentinels, global.mode).map_err(|e| Failure::Grammar(e.to_string()))?;
    if let Some(path) = &args.events_out {
        write_events(path, &events)?;
    }
    print_stdout(&detokenize(&buffer))
}

fn cmd_build_data(global: &Global, file: &FileConfig, args: BuildDataArgs) -> Result<(), Failure> {
    let defaults = PipelineConfig::default();
    let section = &file.build_data;
    let tier = match (args.tier, &section.tier) {
        (Some(t), _) => t,
        (None, Some(t)) => t.parse::<TierSelection>().map_err(|e| anyhow!(e))?,
        (None, None) => defaults.tier,
    };
    let ratio = match (args.lambda, &section.lambda) {
        (Some(r), _) => Some(r),
        (None, Some(r)) if args.general.is_some() => {
            Some(r.parse().map_err(|e: String| anyhow!(e))?)
        }
        _ => None,
    };
    let config = PipelineConfig {
        profile: global.profile,
        tier,
        latency_k: args
            .latency_k
            .or(section.latency_k)
            .unwrap_or(defaults.latency_k),
        seed: global.seed,
        merge_gap: args
            .merge_gap
            .or(section.merge_gap)
            .unwrap_or(defaults.merge_gap),
        ratio,
        workers: args.workers.or(section.workers),
    };
    log_config(
        "build-data",
        json!({"pairs": args.pairs, "out": args.out, "general": args.general, "pipeline": config}),
    );

    let pairs = read_input(&args.pairs)?;
    let general = args.general.as_deref().map(read_input).transpose()?;
    let output = run_pipeline(&pairs, general.as_deref(), &config);
    write_file(&args.out, &output.to_jsonl())?;
    let summary = serde_json::to_string(&output.summary).map_err(anyhow::Error::from)?;
    if let Some(path) = &args.summary_out {
        write_file(path, &(summary.clone() + "\n"))?;
    }
    print_stdout(&(summary + "\n"))?;
    if output.records.is_empty() {
        return Err(Failure::EmptyDataset(format!(
            "no records written to {}",
            args.out.display()
        )));
    }
    Ok(())
}

fn load_record(
    path: &Path,
    id: Option<&str>,
    sentinels: &SentinelSet,
) -> Result<TrajectoryRecord, Failure> {
    let text = read_input(path)?;
    for (n, line) in text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        let record = TrajectoryRecord::from_json_line(line, sentinels).map_err(|e| match e {
            RecordError::Grammar(g) => Failure::Grammar(format!("record on line {}: {g}", n + 1)),
            RecordError::Json(j) => Failure::Io(anyhow!("{}:{}: {j}", path.display(), n + 1)),
        })?;
        if id.is_none_or(|id| id == record.id) {
            return Ok(record);
        }
    }
    Err(Failure::Io(anyhow!(
        "no matching record in {}",
        path.display()
    )))
}

fn resolve_format(format: ScriptFormat, path: &Path) -> ScriptFormat {
    if format != ScriptFormat::Auto {
        return format;
    }
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl" | "json") => ScriptFormat::Record,
        Some("tokens") => ScriptFormat::Lines,
        _ => ScriptFormat::Trajectory,
    }
}

fn harness_failure(e: HarnessError) -> Failure {
    match e {
        HarnessError::InvalidScript { .. } => Failure::InvalidScript(e.to_string()),
        HarnessError::Render(r) => Failure::Grammar(r.to_string()),
        HarnessError::PolicyExhausted { .. } => Failure::Grammar(e.to_string()),
        other => Failure::Io(other.into()),
    }
}

#[derive(Serialize)]
struct SimulateReport {
    output: String,
    trajectory: String,
    triggers: usize,
    cost: revstream::harness::CostReport,
}

fn cmd_simulate(global: &Global, file: &FileConfig, args: SimulateArgs) -> Result<(), Failure> {
    let sentinels = SentinelSet::canonical();
    let section = &file.simulate;
    let config = SessionConfig {
        sentinels: sentinels.clone(),
        bias: TriggerBias(args.bias.or(section.bias).unwrap_or(0.0)),
        enforce_mask: args
            .mask
            .map(|m| m == Switch::On)
            .or(section.mask)
            .unwrap_or(true),
        context_len: args.context_len.or(section.context_len).unwrap_or(0),
        mode: global.mode,
        backend: args
            .backend
            .or(section.backend)
            .unwrap_or(Backend::SubstringIndex),
    };

    let policy = if args.policy == "stochastic" {
        let path = args
            .table
            .as_deref()
            .ok_or_else(|| anyhow!("--policy stochastic needs --table"))?;
        let table: WeightTable = serde_json::from_str(&read_input(path)?)
            .with_context(|| format!("parsing weight table {}", path.display()))?;
        Policy::Stochastic {
            table,
            seed: global.seed,
        }
    } else {
        let path = PathBuf::from(&args.policy);
        match resolve_format(args.format, &path) {
            ScriptFormat::Record => {
                Policy::Replay(load_record(&path, args.record_id.as_deref(), &sentinels)?)
            }
            ScriptFormat::Lines => {
                Policy::from_token_lines(&read_input(&path)?).map_err(harness_failure)?
            }
            _ => Policy::from_trajectory_text(&read_input(&path)?, global.profile, &sentinels),
        }
    };
    log_config(
        "simulate",
        json!({
            "policy": args.policy,
            "table": args.table,
            "bias": config.bias.0,
            "mask": config.enforce_mask,
            "L": config.context_len,
            "backend": config.backend,
            "global": global,
        }),
    );

    let out = decode_session(&policy, &config).map_err(harness_failure)?;
    if let Some(path) = &args.events_out {
        write_events(path, &out.events)?;
    }
    print_json(&SimulateReport {
        output: detokenize(&out.buffer),
        trajectory: detokenize(&out.stream),
        triggers: out.triggers,
        cost: out.cost,
    })
}

fn cmd_cost(args: CostArgs) -> Result<(), Failure> {
    log_config(
        "cost",
        json!({
            "L": args.context_len, "Nv": args.n_v, "Ns": args.n_s, "agent": args.agent,
            "loc_output": args.loc_output, "critic_prompt": args.critic_prompt, "scaling": args.scaling,
        }),
    );
    if let Some(ls) = &args.scaling {
        let rows = scaling_experiment(ls, args.n_v, args.n_s).map_err(harness_failure)?;
        return print_stdout(&to_csv(&rows));
    }
    let (model, report) = match args.agent {
        Some(n) => {
            let steps = AgentSteps::try_from(n).map_err(|e| anyhow!(e))?;
            let report = cost_agent(
                args.context_len,
                args.n_v,
                args.n_s,
                steps,
                args.loc_output,
                &args.critic_prompt,
            );
            (format!("agent-{n}-step"), report)
        }
        None => (
            "single-pass-idealized".to_string(),
            cost_sor(
                args.context_len,
                args.n_s,
                SorAccounting::Idealized,
                None,
                0,
            ),
        ),
    };
    #[derive(Serialize)]
    struct Out {
        model: String,
        #[serde(flatten)]
        report: revstream::harness::CostReport,
    }
    print_json(&Out { model, report })
}

fn cmd_validate(args: ValidateArgs) -> Result<(), Failure> {
    let checker = Checker::parse(&args.checker).map_err(|e| anyhow!(e))?;
    log_config(
        "validate",
        json!({
            "pre": args.pre, "post": args.post, "dataset": args.dataset,
            "checker": checker.id(), "workers": args.workers,
        }),
    );
    let sentinels = SentinelSet::canonical();
    let mut total_samples = None;
    let pairs: Vec<(String, String)> = match (&args.pre, &args.post, &args.dataset) {
        (Some(pre), Some(post), _) => vec![(read_input(pre)?, read_input(post)?)],
        (_, _, Some(dataset)) => {
            let text = read_input(dataset)?;
            let mut pairs = Vec::new();
            let mut total = 0;
            for (n, line) in text
                .lines()
                .enumerate()
                .filter(|(_, l)| !l.trim().is_empty())
            {
                total += 1;
                let record =
                    TrajectoryRecord::from_json_line(line, &sentinels).map_err(|e| match e {
                        RecordError::Grammar(g) => Failure::Grammar(format!("line {}: {g}", n + 1)),
                        RecordError::Json(j) => {
                            Failure::Io(anyhow!("{}:{}: {j}", dataset.display(), n + 1))
                        }
                    })?;
                if record.trajectory.episode_count() == 0 {
                    continue;
                }
                let pre = detokenize(&record.trajectory.code_tokens().cloned().collect::<Vec<_>>());
                let stream = tokenize_stream(
                    &to_text(&record.trajectory, &sentinels),
                    record.meta.profile,
                    &sentinels,
                );
                let (post, _) = render(&stream, &sentinels, Mode::Strict)
                    .map_err(|e| Failure::Grammar(format!("line {}: {e}", n + 1)))?;
                pairs.push((pre, detokenize(&post)));
            }
            total_samples = Some(total);
            pairs
        }
        _ => return Err(Failure::Io(anyhow!("give --pre and --post, or --dataset"))),
    };

    let run = || stability_matrix(&pairs, &checker);
    let result = match args.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(anyhow::Error::from)?
            .install(run),
        None => run(),
    };
    let (counts, _) = result.map_err(|e| match e {
        AuditError::ExternalCheckerUnavailable { .. } => Failure::CheckerUnavailable(e.to_string()),
    })?;
    let mut out = json!({
        "checker": checker.id(),
        "stable": counts.stable,
        "regressed": counts.regressed,
        "fixed": counts.fixed,
        "stable_fail": counts.stable_fail,
        "total": counts.total(),
    });
    if let Some(total) = total_samples {
        out["samples"] = json!(total);
        out["revision_rate"] = json!(counts.revision_rate(total));
    }
    print_json(&out)
}
