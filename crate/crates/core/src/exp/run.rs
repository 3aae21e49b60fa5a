//! Experiment runners behind the CLI subcommands.

use rayon::prelude::*;

use super::config::{ArmModel, ExperimentConfig};
use super::derive_seed;
use super::output::{
    csv_text, fmt_float, mean_std, report_text, summarize, write_files, EpochRow, OutputFile, SummaryRow,
    CERTIFICATE_HEADER, EPOCH_HEADER, SUMMARY_HEADER, SWEEP_HEADER, TRACE_HEADER,
};
use crate::arms::{certify_epsilon_ne, gradient_ascent_run, iterated_best_response, Game, NeCertificate};
use crate::env::role;
use crate::error::Result;
use crate::sim::{self, Recording};
use crate::utility::validate_assumptions;

/// Everything an experiment produces, before it is written to disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<EpochRow>,
    pub summary: Vec<SummaryRow>,
    pub report: Vec<(String, String)>,
    pub files: Vec<OutputFile>,
}

impl ExperimentOutput {
    fn assemble(config: &ExperimentConfig, command: &str, rows: Vec<EpochRow>, trace: Option<String>) -> Self {
        let summary = summarize(&rows);
        let mut report = vec![
            ("command".to_string(), command.to_string()),
            ("mechanism".to_string(), config.mechanism.to_string()),
            ("arms".to_string(), config.mus.len().to_string()),
            ("horizon".to_string(), config.horizon.to_string()),
            ("runs".to_string(), config.runs.to_string()),
            ("seed".to_string(), config.base_seed.to_string()),
        ];
        if let Some(last_epoch) = summary.iter().map(|s| s.epoch).max() {
            report.push(("epochs".to_string(), (last_epoch + 1).to_string()));
            for s in summary.iter().filter(|s| s.epoch == last_epoch) {
                report.push((format!("final_mean_strategy.arm{}", s.arm), fmt_float(s.mean_strategy)));
                report.push((format!("final_std_strategy.arm{}", s.arm), fmt_float(s.std_strategy)));
            }
            if let Some(s) = summary.iter().find(|s| s.epoch == last_epoch) {
                report.push(("final_mean_cum_regret".to_string(), fmt_float(s.mean_cum_regret)));
                report.push(("final_std_cum_regret".to_string(), fmt_float(s.std_cum_regret)));
            }
        }
        let mut files = vec![
            OutputFile {
                name: "epochs.csv",
                contents: csv_text(EPOCH_HEADER, rows.iter().map(EpochRow::csv_line)),
            },
            OutputFile {
                name: "summary.csv",
                contents: csv_text(SUMMARY_HEADER, summary.iter().map(SummaryRow::csv_line)),
            },
            OutputFile {
                name: "report.txt",
                contents: report_text(&report),
            },
        ];
        if let Some(trace) = trace {
            files.push(OutputFile {
                name: "trace.csv",
                contents: trace,
            });
        }
        Self {
            rows,
            summary,
            report,
            files,
        }
    }
}

/// Runs the configured arm model and writes its outputs to `config.output_dir`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let output = match config.arm_model {
        ArmModel::Fixed => simulate(config)?,
        ArmModel::Gradient => equilibrate(config)?,
    };
    write_files(&config.output_dir, &output.files)?;
    Ok(output)
}

/// One episode per run at the fixed profile.
pub fn simulate(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let game = config.game()?;
    let instance = game.instance();
    let profile = config.fixed_profile(instance)?;
    let desired = game.desired_profile();
    let traces = (0..config.runs)
        .into_par_iter()
        .map(|run| game.episode(&profile, derive_seed(config.base_seed, run as u64, 0, role::EPISODE), config.recording))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(config.runs * game.k());
    let mut trace_lines = Vec::new();
    for (run, trace) in traces.iter().enumerate() {
        let regret = sim::strategic_regret(trace, instance, &profile, game.utility())?;
        for arm in 0..game.k() {
            rows.push(EpochRow::new(
                run,
                0,
                arm,
                profile.get(arm),
                desired.get(arm),
                regret,
                sim::arm_clicks(trace, arm),
                trace.elimination_round[arm],
            ));
        }
        if config.recording == Recording::Full {
            let curve = sim::regret_curve(trace, instance, &profile, game.utility())?;
            trace_lines.extend(trace.records.iter().zip(&curve).map(|(r, c)| {
                format!(
                    "{run},{},{},{},{},{},{}",
                    r.t,
                    r.arm,
                    u8::from(r.clicked),
                    r.reward.map_or(String::new(), fmt_float),
                    r.active_count,
                    fmt_float(*c)
                )
            }));
        }
    }
    let trace = (config.recording == Recording::Full).then(|| csv_text(TRACE_HEADER, trace_lines));
    Ok(ExperimentOutput::assemble(config, "simulate", rows, trace))
}

/// Gradient-ascent epochs, one independent run per index.
pub fn equilibrate(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let game = config.game()?;
    let desired = game.desired_profile();
    let runs = (0..config.runs)
        .into_par_iter()
        .map(|run| gradient_ascent_run(&game, &config.gradient, config.base_seed, run as u64))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(config.runs * config.gradient.epochs * game.k());
    for (run, trajectory) in runs.iter().enumerate() {
        for e in &trajectory.epochs {
            for arm in 0..game.k() {
                rows.push(EpochRow::new(
                    run,
                    e.epoch,
                    arm,
                    e.strategies[arm],
                    desired.get(arm),
                    e.regret,
                    e.clicks[arm],
                    e.elimination_round[arm],
                ));
            }
        }
    }
    Ok(ExperimentOutput::assemble(config, "equilibrate", rows, None))
}

/// Certification of a fixed profile, optionally after iterated best response.
#[derive(Debug, Clone, PartialEq)]
pub struct CertifyOutput {
    pub certificate: NeCertificate,
    pub ibr_converged: Option<bool>,
    pub ibr_passes: Option<usize>,
    pub files: Vec<OutputFile>,
}

pub fn certify(config: &ExperimentConfig, run_ibr: bool) -> Result<CertifyOutput> {
    config.validate()?;
    let game = config.game()?;
    let mut profile = config.fixed_profile(game.instance())?;
    let eq = &config.equilibrium;
    let (mut ibr_converged, mut ibr_passes) = (None, None);
    if run_ibr {
        let out = iterated_best_response(
            &game,
            &profile,
            eq.max_iters,
            eq.grid_step,
            eq.mc_reps,
            derive_seed(config.base_seed, 0, 0, role::BEST_RESPONSE),
        )?;
        profile = out.profile;
        ibr_converged = Some(out.converged);
        ibr_passes = Some(out.passes);
    }
    let cert = certify_epsilon_ne(
        &game,
        &profile,
        eq.epsilon,
        eq.grid_step,
        eq.mc_reps,
        derive_seed(config.base_seed, 0, 0, role::CERTIFY),
    )?;
    let desired = game.desired_profile();
    let lines = (0..game.k()).map(|arm| {
        format!(
            "{arm},{},{},{},{},{},{},{}",
            fmt_float(cert.profile.get(arm)),
            fmt_float(desired.get(arm)),
            fmt_float(cert.per_arm_value[arm]),
            fmt_float(cert.best_strategy[arm]),
            fmt_float(cert.best_value[arm]),
            fmt_float(cert.per_arm_gain[arm]),
            fmt_float(cert.std_errors[arm]),
        )
    });
    let mut report = vec![
        ("command".to_string(), "certify-ne".to_string()),
        ("mechanism".to_string(), config.mechanism.to_string()),
        ("horizon".to_string(), config.horizon.to_string()),
        ("epsilon".to_string(), fmt_float(cert.epsilon)),
        ("grid_step".to_string(), fmt_float(cert.grid_step)),
        ("mc_reps".to_string(), cert.mc_reps.to_string()),
        ("max_gain".to_string(), fmt_float(cert.max_gain())),
        ("max_std_error".to_string(), fmt_float(cert.max_std_error())),
        ("certified".to_string(), cert.certified().to_string()),
    ];
    if let (Some(c), Some(p)) = (ibr_converged, ibr_passes) {
        report.push(("ibr_converged".to_string(), c.to_string()));
        report.push(("ibr_passes".to_string(), p.to_string()));
    }
    let files = vec![
        OutputFile {
            name: "certificate.csv",
            contents: csv_text(CERTIFICATE_HEADER, lines),
        },
        OutputFile {
            name: "report.txt",
            contents: report_text(&report),
        },
    ];
    write_files(&config.output_dir, &files)?;
    Ok(CertifyOutput {
        certificate: cert,
        ibr_converged,
        ibr_passes,
        files,
    })
}

/// Mean regret of the fixed profile at one (horizon, offset) point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub horizon: usize,
    pub offset: f64,
    pub runs: usize,
    pub mean_regret: f64,
    pub std_regret: f64,
    pub elimination_rate: f64,
}

impl SweepPoint {
    pub fn std_error(&self) -> f64 {
        self.std_regret / (self.runs as f64).sqrt()
    }
}

/// Least-squares slope of ln y against ln x.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Regret of the fixed profile (shifted by each offset) over a grid of horizons.
pub fn sweep(config: &ExperimentConfig) -> Result<(Vec<SweepPoint>, Vec<OutputFile>)> {
    let mut base = config.clone();
    if base.sweep_horizons.is_empty() {
        base.sweep_horizons = vec![config.horizon];
    }
    base.arm_model = ArmModel::Fixed;
    base.validate()?;
    let game = base.game()?;
    let mut points = Vec::new();
    for (hi, &horizon) in base.sweep_horizons.iter().enumerate() {
        let instance = game.instance().with_horizon(horizon)?;
        let point_game = Game::new(instance.clone(), *game.utility(), game.kind());
        for (oi, &offset) in base.sweep_offsets.iter().enumerate() {
            let mut shifted = base.clone();
            shifted.profile_offset = config.profile_offset + offset;
            let profile = shifted.fixed_profile(&instance)?;
            let index = (hi * base.sweep_offsets.len() + oi) as u64;
            let results = (0..base.runs)
                .into_par_iter()
                .map(|run| {
                    let tr = point_game.episode(
                        &profile,
                        derive_seed(base.base_seed, run as u64, index, role::SWEEP),
                        Recording::Summary,
                    )?;
                    let regret = sim::strategic_regret(&tr, &instance, &profile, point_game.utility())?;
                    Ok((regret, f64::from(u8::from(tr.any_eliminated()))))
                })
                .collect::<Result<Vec<(f64, f64)>>>()?;
            let regrets: Vec<f64> = results.iter().map(|r| r.0).collect();
            let eliminated: Vec<f64> = results.iter().map(|r| r.1).collect();
            let (mean_regret, std_regret) = mean_std(&regrets);
            points.push(SweepPoint {
                horizon,
                offset,
                runs: base.runs,
                mean_regret,
                std_regret,
                elimination_rate: mean_std(&eliminated).0,
            });
        }
    }

    let lines = points.iter().map(|p| {
        format!(
            "{},{},{},{},{},{},{}",
            p.horizon,
            fmt_float(p.offset),
            p.runs,
            fmt_float(p.mean_regret),
            fmt_float(p.std_regret),
            fmt_float(p.std_error()),
            fmt_float(p.elimination_rate)
        )
    });
    let mut report = vec![
        ("command".to_string(), "sweep".to_string()),
        ("mechanism".to_string(), base.mechanism.to_string()),
        ("runs".to_string(), base.runs.to_string()),
    ];
    if base.sweep_horizons.len() >= 2 {
        for &offset in &base.sweep_offsets {
            let (xs, ys): (Vec<f64>, Vec<f64>) = points
                .iter()
                .filter(|p| p.offset == offset)
                .map(|p| (p.horizon as f64, p.mean_regret))
                .unzip();
            if ys.iter().all(|&y| y > 0.0) {
                report.push((format!("loglog_slope.offset={}", fmt_float(offset)), fmt_float(loglog_slope(&xs, &ys))));
            }
        }
    }
    let files = vec![
        OutputFile {
            name: "sweep.csv",
            contents: csv_text(SWEEP_HEADER, lines),
        },
        OutputFile {
            name: "report.txt",
            contents: report_text(&report),
        },
    ];
    write_files(&base.output_dir, &files)?;
    Ok((points, files))
}

/// `validate-utility` report as `key=value` lines.
pub fn validate_utility(config: &ExperimentConfig) -> Result<String> {
    config.validate_utility()?;
    let spec = config.utility_spec()?;
    let report = validate_assumptions(&spec, config.validate_grid_step)?;
    Ok(format!("utility={spec}\n{report}\n"))
}
