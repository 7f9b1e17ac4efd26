use std::path::{Path, PathBuf};
use std::time::Instant;

use iadof_core::algebra::{
    build_block_graph, certify_generic_feasibility, complete_matching, construct_certificate,
    CertificationOutcome, MatchingOutcome,
};
use iadof_core::benchmark::{run_benchmark, sample_rayleigh, BenchConfig};
use iadof_core::feasibility::{deficiency, matching_applicable, InfeasibilityReason};
use iadof_core::seed::{derive, tags};
use iadof_core::{
    check_subsets, feasibility_verdict, max_dof_bound, min_leakage, verify_alignment, SolveOptions,
    SystemConfig, Verdict,
};

use crate::args::{Cli, Command, Format};
use crate::config::{FileConfig, Params};
use crate::report::*;
use crate::{Failure, EXIT_FEASIBLE, EXIT_INFEASIBLE, EXIT_UNKNOWN};

const DEFAULT_CERTIFY_TRIALS: usize = 3;

/// Bytes for `--out` (or stdout), plus an optional sidecar file.
struct Output {
    main: Vec<u8>,
    sidecar: Option<Vec<u8>>,
    code: i32,
}

pub(crate) fn execute(cli: &Cli) -> Result<i32, Failure> {
    let start = Instant::now();
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let params = Params::merge(file, cli.overrides());
    let manifest = |p: &Params| Manifest {
        schema_version: SCHEMA_VERSION,
        tool: TOOL_NAME.into(),
        tool_version: TOOL_VERSION.into(),
        command: cli.command.name().into(),
        config_path: cli.config.as_ref().map(|p| p.display().to_string()),
        inputs: Inputs {
            users: p.users.map(|u| u.to_string()),
            tx: p.tx.clone(),
            rx: p.rx.clone(),
            d: p.d.clone(),
            snr_grid_db: p.snr_grid_db.clone(),
            trials: p.trials,
        },
        seed: p.seed,
        duration_ms: cli.timing.then(|| start.elapsed().as_secs_f64() * 1e3),
    };

    let out = match &cli.command {
        Command::Check { strategy, .. } => {
            let cfg = params.system()?;
            let mut feasibility = feasibility_verdict(&cfg);
            if let Some(s) = strategy {
                feasibility.subset = check_subsets(&cfg, (*s).into())?;
            }
            let code = verdict_code(&feasibility.verdict);
            let report = CheckReport {
                manifest: manifest(&params),
                equations: cfg.equation_count(),
                variables: cfg.variable_count(),
                config: cfg,
                feasibility,
            };
            let main = match cli.format {
                Format::Json => to_json(&report)?,
                Format::Csv => to_csv(&report.manifest, &check_rows(&report))?,
            };
            Output {
                main,
                sidecar: None,
                code,
            }
        }
        Command::Bound { .. } => {
            let users = params.users()?;
            let rows = (users.lo..=users.hi)
                .map(|k| {
                    let (tx, rx) = params.antennas(k)?;
                    let b = max_dof_bound(&tx, &rx)?;
                    Ok(BoundRow {
                        users: k,
                        max_total: b.max_total,
                        argmax_tuple: b.argmax_tuple,
                        enumeration_count: b.enumeration_count,
                    })
                })
                .collect::<Result<Vec<_>, Failure>>()?;
            let report = BoundReport {
                manifest: manifest(&params),
                rows,
            };
            let main = match cli.format {
                Format::Json => to_json(&report)?,
                Format::Csv => {
                    let rows: Vec<BoundCsvRow> = report.rows.iter().map(Into::into).collect();
                    to_csv(&report.manifest, &rows)?
                }
            };
            Output {
                main,
                sidecar: None,
                code: 0,
            }
        }
        Command::Certify { .. } => {
            let cfg = params.system()?;
            let trials = params.trials.unwrap_or(DEFAULT_CERTIFY_TRIALS);
            let matching = matching_summary(&cfg)?;
            let certification = certify_generic_feasibility(&cfg, trials, params.seed)?;
            let code = match certification.outcome {
                CertificationOutcome::CertifiedFullRank => 0,
                CertificationOutcome::RankDeficient => 1,
            };
            let report = CertifyReport {
                manifest: manifest(&params),
                config: cfg,
                matching,
                certification,
            };
            let main = match cli.format {
                Format::Json => to_json(&report)?,
                Format::Csv => {
                    let c = &report.certification;
                    let rows: Vec<RankRow> = c
                        .ranks
                        .iter()
                        .enumerate()
                        .map(|(trial, &rank)| RankRow {
                            trial,
                            rank,
                            equations: c.equations,
                            variables: c.variables,
                        })
                        .collect();
                    to_csv(&report.manifest, &rows)?
                }
            };
            Output {
                main,
                sidecar: None,
                code,
            }
        }
        Command::Solve {
            max_iters,
            leakage_tol,
            ..
        } => {
            let cfg = params.system()?;
            let defaults = SolveOptions::default();
            let opts = SolveOptions {
                max_iters: max_iters.unwrap_or(defaults.max_iters),
                leakage_tol: leakage_tol.unwrap_or(defaults.leakage_tol),
                seed: params.seed,
                ..defaults
            };
            let ch = sample_rayleigh(cfg.tx(), cfg.rx(), derive(params.seed, &[tags::CHANNEL, 0]))?;
            let res = min_leakage(&ch, &cfg, &opts)?;
            let alignment = verify_alignment(&ch, &res.beamformers, opts.leakage_tol)?;
            let mut report = SolveReport {
                manifest: manifest(&params),
                verdict: feasibility_verdict(&cfg).verdict,
                config: cfg,
                converged: res.converged,
                rank_ok: res.rank_ok,
                iterations: res.iterations,
                stop: res.stop,
                final_leakage: res.final_leakage(),
                alignment,
                leakage_trace: res.leakage_trace,
            };
            match cli.format {
                Format::Json => Output {
                    main: to_json(&report)?,
                    sidecar: None,
                    code: 0,
                },
                Format::Csv => {
                    let rows: Vec<TraceRow> = report
                        .leakage_trace
                        .iter()
                        .enumerate()
                        .map(|(iteration, &leakage)| TraceRow { iteration, leakage })
                        .collect();
                    let main = to_csv(&report.manifest, &rows)?;
                    report.leakage_trace.clear();
                    Output {
                        main,
                        sidecar: Some(to_json(&report)?),
                        code: 0,
                    }
                }
            }
        }
        Command::Bench {
            noise_power,
            no_warm_start,
            ..
        } => {
            let users = params.users()?.exactly_one()?;
            let (tx, rx) = params.antennas(users)?;
            let mut bc = BenchConfig::new(tx, rx);
            if let Some(g) = &params.snr_grid_db {
                bc.snr_grid_db.clone_from(g);
            }
            if let Some(t) = params.trials {
                bc.trials = t;
            }
            if let Some(n) = noise_power {
                bc.noise_power = *n;
            }
            bc.seed = params.seed;
            bc.warm_start = !no_warm_start;
            let record = run_benchmark(&bc)?;
            let report = BenchReport {
                manifest: manifest(&params),
                tx: bc.tx,
                rx: bc.rx,
                snr_grid_db: bc.snr_grid_db,
                trials: bc.trials,
                record,
            };
            match cli.format {
                Format::Json => Output {
                    main: to_json(&report)?,
                    sidecar: None,
                    code: 0,
                },
                Format::Csv => {
                    let rows: Vec<BenchRow> = report
                        .record
                        .samples
                        .iter()
                        .map(|s| BenchRow {
                            snr_db: s.snr_db,
                            trial: s.trial,
                            sum_rate_bits: s.sum_rate,
                        })
                        .collect();
                    let summary = BenchSummary {
                        manifest: report.manifest.clone(),
                        tx: report.tx.clone(),
                        rx: report.rx.clone(),
                        snr_grid_db: report.snr_grid_db.clone(),
                        trials: report.trials,
                        mean_rates: report.record.mean_rates.clone(),
                        estimated_dof_slope: report.record.estimated_dof_slope,
                        theoretical_bound: report.record.theoretical_bound,
                    };
                    Output {
                        main: to_csv(&report.manifest, &rows)?,
                        sidecar: Some(to_json(&summary)?),
                        code: 0,
                    }
                }
            }
        }
    };
    write_output(cli.out.as_deref(), &out)?;
    Ok(out.code)
}

fn verdict_code(v: &Verdict) -> i32 {
    match v {
        Verdict::FeasibleGeneric { .. } => EXIT_FEASIBLE,
        Verdict::InfeasibleGeneric { .. } => EXIT_INFEASIBLE,
        Verdict::Unknown { .. } => EXIT_UNKNOWN,
    }
}

fn matching_summary(cfg: &SystemConfig) -> Result<MatchingSummary, Failure> {
    if !matching_applicable(cfg) {
        return Ok(MatchingSummary::NotApplicable);
    }
    let graph = build_block_graph(cfg)?;
    Ok(match complete_matching(&graph) {
        MatchingOutcome::Complete(m) => {
            let cert = construct_certificate(cfg, &m)?;
            MatchingSummary::Complete {
                assignment: m
                    .y_to_x
                    .iter()
                    .zip(graph.y_nodes())
                    .map(|(&x, &pair)| MatchedBlock {
                        pair,
                        block: graph.x_nodes()[x],
                    })
                    .collect(),
                determinant: cert.jacobian_det(),
                removed: cert.removed,
            }
        }
        MatchingOutcome::Deficient(v) => MatchingSummary::HallViolator {
            equation_nodes: v.equations.len(),
            neighbour_blocks: v.neighbours.len(),
            deficiency: deficiency(cfg, &v.pairs),
            pairs: v.pairs,
        },
    })
}

fn check_rows(r: &CheckReport) -> Vec<CheckRow> {
    let row = |item: &str, user, pair: Option<(usize, usize)>, value: String| CheckRow {
        item: item.into(),
        user,
        rx: pair.map(|p| p.0 + 1),
        tx: pair.map(|p| p.1 + 1),
        value,
    };
    let f = &r.feasibility;
    let mut rows: Vec<CheckRow> = f
        .per_user_ok
        .iter()
        .enumerate()
        .map(|(k, ok)| row("per_user", Some(k + 1), None, ok.to_string()))
        .collect();
    rows.extend(f.pairwise_ok.iter().map(|c| {
        row(
            "pairwise",
            None,
            Some((c.pair.rx, c.pair.tx)),
            c.ok.to_string(),
        )
    }));
    rows.push(row("subset", None, None, f.subset.holds.to_string()));
    if let Some(w) = &f.subset.witness {
        rows.extend(
            w.iter()
                .map(|p| row("subset_witness", None, Some((p.rx, p.tx)), String::new())),
        );
    }
    rows.push(row("proper", None, None, f.proper.to_string()));
    let verdict = match &f.verdict {
        Verdict::FeasibleGeneric { .. } => "feasible_generic",
        Verdict::InfeasibleGeneric { .. } => "infeasible_generic",
        Verdict::Unknown { .. } => "unknown",
    };
    rows.push(row("verdict", None, None, verdict.into()));
    if let Verdict::InfeasibleGeneric { reasons } = &f.verdict {
        for reason in reasons {
            rows.push(match reason {
                InfeasibilityReason::PerUser { user } => {
                    row("reason_per_user", Some(user + 1), None, String::new())
                }
                InfeasibilityReason::Pairwise { pair } => row(
                    "reason_pairwise",
                    None,
                    Some((pair.rx, pair.tx)),
                    String::new(),
                ),
                InfeasibilityReason::Subset { witness } => {
                    row("reason_subset", None, None, witness.len().to_string())
                }
            });
        }
    }
    rows
}

/// `<stem>.summary.json` next to `out`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().unwrap_or_default().to_string_lossy();
    out.with_file_name(format!("{stem}.summary.json"))
}

fn write_output(out: Option<&Path>, o: &Output) -> Result<(), Failure> {
    use std::io::Write;
    match out {
        Some(path) => {
            std::fs::write(path, &o.main)
                .map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))?;
            if let Some(s) = &o.sidecar {
                let side = sidecar_path(path);
                std::fs::write(&side, s)
                    .map_err(|e| Failure::io(format!("cannot write {}: {e}", side.display())))?;
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(&o.main)
                .map_err(|e| Failure::io(e.to_string()))?;
            if let Some(s) = &o.sidecar {
                std::io::stderr()
                    .write_all(s)
                    .map_err(|e| Failure::io(e.to_string()))?;
            }
        }
    }
    Ok(())
}
