//! Command-line front end: parsing and checking protocols, running the
//! solvers and the explicit oracle, dumping constructed counter machines,
//! generating labelled benchmark instances, replaying witnesses, and
//! evaluating the mutual-reachability run-length bound.
//!
//! Machine-readable JSON goes to stdout, human summaries to stderr.
//! Exit codes: 0 yes, 1 no, 2 unknown, 3 usage or parse error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use bnv_core::explicit::{
    repcover_explicit, synchro_explicit, Bounds, RepcoverVerdict, SynchroVerdict,
};
use bnv_core::protocol::{parse_protocol_trusted, Op, Protocol, Transition};
use bnv_core::reductions::{
    dfa_product_nonempty, gen_dfa_repcover_protocol, gen_dfa_swo_synchro_protocol,
    gen_minsky_protocol, gen_vass_protocol, parse_dfa, parse_minsky, run_minsky, MachineOutcome,
};
use bnv_core::semantics::{validate_lasso, validate_trace, Lasso, SemanticsKind, Trace};
use bnv_core::solvers::{
    solve_repcover, solve_repcover_swo, solve_synchro, Answer, SolveCaps, Verdict,
};
use bnv_core::summary::{SummarySystem, Variant};
use bnv_core::vass::{parse_vass, run_length_bound, run_length_bound_log2, ReachCaps};

#[derive(Parser)]
#[command(name = "bnv", version, about = "broadcast network verifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SemanticsArg {
    Broadcast,
    Rbn,
}

impl From<SemanticsArg> for SemanticsKind {
    fn from(s: SemanticsArg) -> SemanticsKind {
        match s {
            SemanticsArg::Broadcast => SemanticsKind::Broadcast,
            SemanticsArg::Rbn => SemanticsKind::Rbn,
        }
    }
}

#[derive(Args)]
struct CapArgs {
    /// Per-counter ceiling for the bounded machine searches.
    #[arg(long, default_value_t = 6)]
    counter_cap: i64,
    /// Step ceiling for the bounded machine searches.
    #[arg(long, default_value_t = 30_000)]
    step_cap: usize,
    /// Stored-state ceiling for the bounded machine searches.
    #[arg(long, default_value_t = 150_000)]
    state_cap: usize,
}

impl CapArgs {
    fn solve_caps(&self) -> SolveCaps {
        SolveCaps {
            reach: ReachCaps {
                counter_cap: self.counter_cap,
                step_cap: self.step_cap,
                state_cap: self.state_cap,
            },
            ..SolveCaps::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Report the waiting/action classification and the protocol class.
    Check {
        #[arg(long)]
        protocol: PathBuf,
    },
    /// Decide synchronization through the summary construction.
    Synchro {
        #[arg(long)]
        protocol: PathBuf,
        /// Target state.
        #[arg(long)]
        target: String,
        #[command(flatten)]
        caps: CapArgs,
    },
    /// Bounded explicit-state synchronization search.
    SynchroExplicit {
        #[arg(long)]
        protocol: PathBuf,
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 5)]
        max_processes: usize,
        #[arg(long, default_value_t = 10_000)]
        max_depth: usize,
    },
    /// Decide repeated coverability through the tagged construction.
    Repcover {
        #[arg(long)]
        protocol: PathBuf,
        /// Transition, written `src !!msg dst` or `src ?msg dst`.
        #[arg(long)]
        transition: String,
        #[command(flatten)]
        caps: CapArgs,
    },
    /// Polynomial-time repeated coverability for Single-Wait-Only protocols.
    RepcoverSwo {
        #[arg(long)]
        protocol: PathBuf,
        #[arg(long)]
        transition: String,
    },
    /// Bounded explicit-state repeated-coverability search.
    RepcoverExplicit {
        #[arg(long)]
        protocol: PathBuf,
        #[arg(long)]
        transition: String,
        #[arg(long, default_value_t = 5)]
        max_processes: usize,
        #[arg(long, default_value_t = 200_000)]
        max_states: usize,
        #[arg(long, value_enum, default_value_t = SemanticsArg::Broadcast)]
        semantics: SemanticsArg,
    },
    /// Dump the reachable slice of a constructed counter machine.
    BuildVass {
        #[arg(long)]
        protocol: PathBuf,
        #[arg(long, value_enum, default_value_t = VariantArg::Synchro)]
        variant: VariantArg,
        /// Target state (synchro and action variants).
        #[arg(long)]
        target: Option<String>,
        /// Designated transition (smiley variant).
        #[arg(long)]
        transition: Option<String>,
        #[arg(long, default_value_t = 20_000)]
        location_cap: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Generate a labelled benchmark instance.
    Generate {
        #[command(subcommand)]
        what: GenerateCmd,
    },
    /// Validate a witness file against a protocol.
    Replay {
        #[arg(long)]
        protocol: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, value_enum, default_value_t = SemanticsArg::Broadcast)]
        semantics: SemanticsArg,
    },
    /// Evaluate the mutual-reachability run-length bound.
    Bound {
        #[arg(long)]
        counters: u64,
        #[arg(long)]
        locations: u64,
        /// Print the base-2 logarithm instead of the exact decimal value.
        #[arg(long)]
        log2: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Synchro,
    Action,
    Smiley,
}

#[derive(Subcommand)]
enum GenerateCmd {
    /// Two-counter machine halting instance.
    Minsky {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Counter-system reachability (or, with --dashed, coverability).
    Vass {
        #[arg(long)]
        input: PathBuf,
        /// Final location.
        #[arg(long)]
        target: String,
        #[arg(long)]
        dashed: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Automata-intersection repeated-coverability instance.
    DfaRepcover {
        /// Automata files; repeat the flag for each automaton.
        #[arg(long, required = true)]
        input: Vec<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Automata-intersection Single-Wait-Only synchronization instance.
    DfaSwo {
        #[arg(long, required = true)]
        input: Vec<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn read(path: &PathBuf) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn load_protocol(path: &PathBuf) -> Result<Protocol, String> {
    parse_protocol_trusted(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

fn parse_transition_spec(p: &Protocol, spec: &str) -> Result<Transition, String> {
    let toks: Vec<&str> = spec.split_whitespace().collect();
    let [src, op, dst] = toks.as_slice() else {
        return Err(format!(
            "expected `src !!msg dst` or `src ?msg dst`, got `{spec}`"
        ));
    };
    let src = p
        .state_by_name(src)
        .ok_or_else(|| format!("unknown state `{src}`"))?;
    let dst = p
        .state_by_name(dst)
        .ok_or_else(|| format!("unknown state `{dst}`"))?;
    let (send, msg) = if let Some(m) = op.strip_prefix("!!") {
        (true, m)
    } else if let Some(m) = op.strip_prefix('?') {
        (false, m)
    } else {
        return Err(format!("expected `!!msg` or `?msg`, got `{op}`"));
    };
    let msg = p
        .msg_by_name(msg)
        .ok_or_else(|| format!("unknown message `{msg}`"))?;
    let t = Transition {
        src,
        op: if send { Op::Send(msg) } else { Op::Receive(msg) },
        dst,
    };
    if !p.transitions().contains(&t) {
        return Err(format!("transition `{spec}` is not in the protocol"));
    }
    Ok(t)
}

fn emit_verdict(p: &Protocol, v: &Verdict) -> ExitCode {
    println!("{}", serde_json::to_string_pretty(&v.to_json(p)).unwrap());
    eprintln!(
        "verdict: {} (method: {}{})",
        match v.answer {
            Answer::Yes => "yes",
            Answer::No => "no",
            Answer::Unknown => "unknown",
        },
        v.method,
        v.bounds
            .as_deref()
            .map(|b| format!("; bounds: {b}"))
            .unwrap_or_default()
    );
    match v.answer {
        Answer::Yes => ExitCode::from(0),
        Answer::No => ExitCode::from(1),
        Answer::Unknown => ExitCode::from(2),
    }
}

fn write_or_print(
    output: &Option<PathBuf>,
    text: &str,
    meta: serde_json::Value,
) -> Result<(), String> {
    match output {
        Some(path) => {
            fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            println!("{}", serde_json::to_string_pretty(&meta).unwrap());
        }
        None => {
            print!("{text}");
            eprintln!("{}", serde_json::to_string(&meta).unwrap());
        }
    }
    Ok(())
}

fn run() -> Result<ExitCode, String> {
    let cli = Cli::parse();
    match cli.command {
        Command::Check { protocol } => {
            let p = load_protocol(&protocol)?;
            let cls = p.classify();
            let (wo, wo_bad) = p.check_wait_only();
            let (swo, swo_bad) = p.check_single_wait_only();
            let name = |q: &bnv_core::protocol::StateId| p.state_name(*q).to_string();
            let out = json!({
                "format": 1,
                "states": p.num_states(),
                "messages": p.num_messages(),
                "transitions": p.transitions().len(),
                "waiting": cls.waiting.iter().map(|q| p.state_name(*q)).collect::<Vec<_>>(),
                "wait_only": wo,
                "wait_only_violations": wo_bad.iter().map(name).collect::<Vec<_>>(),
                "single_wait_only": swo,
                "single_wait_only_violations": swo_bad.iter().map(name).collect::<Vec<_>>(),
            });
            println!("{}", serde_json::to_string_pretty(&out).unwrap());
            Ok(ExitCode::from(0))
        }
        Command::Synchro {
            protocol,
            target,
            caps,
        } => {
            let p = load_protocol(&protocol)?;
            let q = p
                .state_by_name(&target)
                .ok_or_else(|| format!("unknown state `{target}`"))?;
            let v = solve_synchro(&p, q, caps.solve_caps()).map_err(|e| e.to_string())?;
            Ok(emit_verdict(&p, &v))
        }
        Command::SynchroExplicit {
            protocol,
            target,
            max_processes,
            max_depth,
        } => {
            let p = load_protocol(&protocol)?;
            let q = p
                .state_by_name(&target)
                .ok_or_else(|| format!("unknown state `{target}`"))?;
            let res = synchro_explicit(
                &p,
                q,
                Bounds {
                    max_processes,
                    max_depth,
                    ..Bounds::default()
                },
            );
            let (code, out) = match res.verdict {
                SynchroVerdict::Yes { n, witness } => (
                    0u8,
                    json!({
                        "format": 1, "answer": "yes", "method": "explicit",
                        "processes": n, "witness": witness.to_json(&p),
                    }),
                ),
                SynchroVerdict::NoWithinBounds => (
                    2,
                    json!({
                        "format": 1, "answer": "unknown", "method": "explicit",
                        "bounds": format!("max processes {max_processes}, max depth {max_depth}"),
                    }),
                ),
            };
            println!("{}", serde_json::to_string_pretty(&out).unwrap());
            Ok(ExitCode::from(code))
        }
        Command::Repcover {
            protocol,
            transition,
            caps,
        } => {
            let p = load_protocol(&protocol)?;
            let t = parse_transition_spec(&p, &transition)?;
            let v = solve_repcover(&p, t, caps.solve_caps()).map_err(|e| e.to_string())?;
            Ok(emit_verdict(&p, &v))
        }
        Command::RepcoverSwo {
            protocol,
            transition,
        } => {
            let p = load_protocol(&protocol)?;
            let t = parse_transition_spec(&p, &transition)?;
            let v = solve_repcover_swo(&p, t).map_err(|e| e.to_string())?;
            Ok(emit_verdict(&p, &v))
        }
        Command::RepcoverExplicit {
            protocol,
            transition,
            max_processes,
            max_states,
            semantics,
        } => {
            let p = load_protocol(&protocol)?;
            let t = parse_transition_spec(&p, &transition)?;
            let res = repcover_explicit(
                &p,
                t,
                Bounds {
                    max_processes,
                    max_states,
                    ..Bounds::default()
                },
                semantics.into(),
            );
            let (code, out) = match res.verdict {
                RepcoverVerdict::Yes { n, witness } => (
                    0u8,
                    json!({
                        "format": 1, "answer": "yes", "method": "explicit",
                        "processes": n, "witness": witness.to_json(&p),
                    }),
                ),
                RepcoverVerdict::NoWithinBounds => (
                    2,
                    json!({
                        "format": 1, "answer": "unknown", "method": "explicit",
                        "bounds": format!("max processes {max_processes}, max states {max_states}"),
                    }),
                ),
            };
            println!("{}", serde_json::to_string_pretty(&out).unwrap());
            Ok(ExitCode::from(code))
        }
        Command::BuildVass {
            protocol,
            variant,
            target,
            transition,
            location_cap,
            output,
        } => {
            let p = load_protocol(&protocol)?;
            let norm = p.normalize_self_loops();
            let (norm, _) = norm.add_uncoverable_state();
            let variant = match variant {
                VariantArg::Synchro | VariantArg::Action => {
                    let target = target.ok_or("--target is required for this variant")?;
                    let q = norm
                        .state_by_name(&target)
                        .ok_or_else(|| format!("unknown state `{target}`"))?;
                    if matches!(variant, VariantArg::Synchro) {
                        Variant::Synchro { q_f: q }
                    } else {
                        Variant::Action { q_f: q }
                    }
                }
                VariantArg::Smiley => {
                    let spec = transition.ok_or("--transition is required for smiley")?;
                    let t_orig = parse_transition_spec(&p, &spec)?;
                    let t = map_to_normalized(&p, &norm, t_orig);
                    Variant::Smiley {
                        t_f: t,
                        track_witness: !t.op.is_send(),
                    }
                }
            };
            let sys = SummarySystem::new(&norm, variant, false).map_err(|e| e.to_string())?;
            let (vass, complete) = sys.materialize(location_cap);
            let meta = json!({
                "format": 1,
                "locations": vass.num_locations(),
                "counters": vass.num_counters(),
                "transitions": vass.transitions().len(),
                "complete": complete,
            });
            write_or_print(&output, &vass.serialize(), meta)?;
            Ok(ExitCode::from(0))
        }
        Command::Generate { what } => {
            match what {
                GenerateCmd::Minsky { input, output } => {
                    let m = parse_minsky(&read(&input)?).map_err(|e| e.to_string())?;
                    let (p, q_f) = gen_minsky_protocol(&m);
                    let truth = match run_minsky(&m, 100_000) {
                        MachineOutcome::Final { x1: 0, x2: 0, .. } => json!("halts-empty"),
                        MachineOutcome::Final { .. } => json!("final-nonzero"),
                        MachineOutcome::Stuck { .. } => json!("stuck"),
                        MachineOutcome::Running => json!("running-at-cap"),
                    };
                    let meta = json!({
                        "format": 1, "kind": "minsky", "target": q_f,
                        "machine_outcome": truth,
                    });
                    write_or_print(&output, &p.serialize(), meta)?;
                }
                GenerateCmd::Vass {
                    input,
                    target,
                    dashed,
                    output,
                } => {
                    let v = parse_vass(&read(&input)?).map_err(|e| e.to_string())?;
                    let lf = v
                        .loc_by_name(&target)
                        .ok_or_else(|| format!("unknown location `{target}`"))?;
                    let (p, q_f) = gen_vass_protocol(&v, lf, dashed);
                    let meta = json!({
                        "format": 1, "kind": "vass", "target": q_f, "dashed": dashed,
                    });
                    write_or_print(&output, &p.serialize(), meta)?;
                }
                GenerateCmd::DfaRepcover { input, output } => {
                    let automata = input
                        .iter()
                        .map(|f| parse_dfa(&read(f)?).map_err(|e| e.to_string()))
                        .collect::<Result<Vec<_>, _>>()?;
                    let word = dfa_product_nonempty(&automata).map_err(|e| e.to_string())?;
                    let (p, t_f, src) = gen_dfa_repcover_protocol(&automata);
                    let meta = json!({
                        "format": 1, "kind": "dfa-repcover",
                        "transition": format!("{} !!{} {}", src,
                            p.msg_name(t_f.op.msg()), p.state_name(t_f.dst)),
                        "intersection_word": word,
                    });
                    write_or_print(&output, &p.serialize(), meta)?;
                }
                GenerateCmd::DfaSwo { input, output } => {
                    let automata = input
                        .iter()
                        .map(|f| parse_dfa(&read(f)?).map_err(|e| e.to_string()))
                        .collect::<Result<Vec<_>, _>>()?;
                    let word = dfa_product_nonempty(&automata).map_err(|e| e.to_string())?;
                    let (p, q_f) = gen_dfa_swo_synchro_protocol(&automata);
                    let meta = json!({
                        "format": 1, "kind": "dfa-swo", "target": q_f,
                        "intersection_word": word,
                    });
                    write_or_print(&output, &p.serialize(), meta)?;
                }
            }
            Ok(ExitCode::from(0))
        }
        Command::Replay {
            protocol,
            trace,
            semantics,
        } => {
            let p = load_protocol(&protocol)?;
            let value: serde_json::Value = serde_json::from_str(&read(&trace)?)
                .map_err(|e| format!("{}: {e}", trace.display()))?;
            let kind: SemanticsKind = semantics.into();
            let is_lasso = value.get("cycle_start").is_some();
            let ok = if is_lasso {
                Lasso::from_json(&p, &value).and_then(|l| validate_lasso(&p, &l, kind))
            } else {
                Trace::from_json(&p, &value).and_then(|t| validate_trace(&p, &t, kind))
            };
            match ok {
                Ok(()) => {
                    println!("{}", json!({"format": 1, "valid": true}));
                    Ok(ExitCode::from(0))
                }
                Err(e) => {
                    println!(
                        "{}",
                        json!({"format": 1, "valid": false, "reason": e.to_string()})
                    );
                    Ok(ExitCode::from(1))
                }
            }
        }
        Command::Bound {
            counters,
            locations,
            log2,
        } => {
            if log2 {
                println!(
                    "{}",
                    json!({"format": 1, "log2": run_length_bound_log2(counters, locations)})
                );
                return Ok(ExitCode::from(0));
            }
            // the exact value explodes quickly; refuse what cannot be printed
            let bits = run_length_bound_log2(counters, locations);
            if bits > 40_000_000.0 {
                return Err(format!(
                    "the exact value has about {bits:.0} bits; use --log2"
                ));
            }
            let b = run_length_bound(counters, locations);
            println!("{}", json!({"format": 1, "bound": b.to_string()}));
            Ok(ExitCode::from(0))
        }
    }
}

fn map_to_normalized(orig: &Protocol, norm: &Protocol, t: Transition) -> Transition {
    let src = norm.state_by_name(orig.state_name(t.src)).unwrap();
    let msg = norm.msg_by_name(orig.msg_name(t.op.msg())).unwrap();
    if t.op.is_send() && t.src == t.dst {
        return *norm
            .transitions()
            .iter()
            .find(|u| {
                u.src == src
                    && u.op == Op::Send(msg)
                    && norm.state_name(u.dst).starts_with("__p")
            })
            .expect("normalized loop");
    }
    let dst = norm.state_by_name(orig.state_name(t.dst)).unwrap();
    Transition {
        src,
        op: if t.op.is_send() {
            Op::Send(msg)
        } else {
            Op::Receive(msg)
        },
        dst,
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
