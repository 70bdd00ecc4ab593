//! Subcommand implementations. Each returns the process exit code:
//! 0 secure, 2 insecure, 3 attack detected, with usage/data errors bubbling
//! up as `Err` (mapped to exit 1 by main).

use std::fs::File;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{anyhow, Context};
use decoyqkd::bounds::{key_rate_lower_one_decoy, key_yield};
use decoyqkd::channel::fit_channel;
use decoyqkd::math::{confidence_complement_from_u_alpha, confidence_from_u_alpha};
use decoyqkd::optimize::{optimize_intensities, sweep_distance, OptimizationRequest, SweepMode};
use decoyqkd::sim::{detect_attack, intensity_z_scores, simulate_session, Verdict};
use decoyqkd::types::{split_signal_decoy, split_signal_decoy_owned, ProtocolParams};

use crate::io::{
    read_channel, read_measurement_records, read_session_config, to_json_string, AnalysisInputsDto,
    AnalysisReportDto, AnalysisSectionDto, BoundsDto, ChannelDto, FitReportDto, OptimizeReportDto,
    OptimumDto, ParamsEchoDto, SimulationReportDto, StatsDto, TallyDto, VerdictDto, YieldDto,
    SCHEMA_VERSION,
};
use crate::{
    AnalyzeArgs, FitArgs, OptimizeArgs, ProtocolArg, SimulateArgs, SweepArgs, SweepModeArg,
};

fn params_from(q: f64, f_ec: f64, u_alpha: f64) -> anyhow::Result<ProtocolParams> {
    Ok(ProtocolParams::new(q, f_ec, u_alpha)?)
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> anyhow::Result<i32> {
    let stats = read_measurement_records(&args.input)?;
    let (signal, decoy) = split_signal_decoy_owned(stats)?;
    let params = params_from(args.q, args.f_ec, args.u_alpha)?;
    let bounds = key_rate_lower_one_decoy(&signal, &decoy, &params)?;
    let n_total = signal.n_sent + decoy.n_sent;
    let yield_ = key_yield(&bounds, n_total, args.session_seconds)?;
    let mut warnings = Vec::new();
    if bounds.e1_upper.is_none() {
        warnings.push(
            "decoy data admit no single-photon contribution; error bound undefined".to_string(),
        );
    }
    if !bounds.secure {
        warnings.push("no secure key at this confidence level; rate clamped to zero".to_string());
    }
    let report = AnalysisReportDto {
        schema_version: SCHEMA_VERSION,
        inputs: AnalysisInputsDto {
            signal: StatsDto::from_stats(&signal),
            decoy: StatsDto::from_stats(&decoy),
            params: ParamsEchoDto::from_params(&params),
            session_seconds: args.session_seconds,
        },
        bounds: BoundsDto::from_bounds(&bounds),
        key_yield: YieldDto::from_yield(&yield_),
        confidence_level: confidence_from_u_alpha(params.u_alpha)?,
        confidence_complement: confidence_complement_from_u_alpha(params.u_alpha)?,
        warnings,
    };
    println!("{}", to_json_string(&report)?);
    Ok(if bounds.secure { 0 } else { 2 })
}

pub fn cmd_simulate(args: &SimulateArgs) -> anyhow::Result<i32> {
    let config_path = args
        .config
        .clone()
        .or_else(|| std::env::var_os("DECOYQKD_CONFIG").map(PathBuf::from))
        .ok_or_else(|| anyhow!("no --config given and DECOYQKD_CONFIG is not set"))?;
    let loaded = read_session_config(&config_path, args.seed)?;
    let tally = simulate_session(&loaded.config)?;

    let mut warnings = Vec::new();
    let verdict = if tally.per_intensity.len() >= 2 {
        let v = detect_attack(&tally, &loaded.config.channel, loaded.params.u_alpha)?;
        let scores = intensity_z_scores(&tally, &loaded.config.channel)?;
        Some((
            VerdictDto::from_verdict(&v, &scores),
            matches!(v, Verdict::Anomalous(_)),
        ))
    } else {
        warnings.push("consistency check skipped: needs at least two intensities".to_string());
        None
    };

    let analysis = match split_signal_decoy(&tally.per_intensity) {
        Ok((signal, decoy)) => match key_rate_lower_one_decoy(signal, decoy, &loaded.params) {
            Ok(bounds) => {
                let yield_ = key_yield(&bounds, loaded.config.n_pulses, loaded.session_seconds)?;
                if !bounds.secure {
                    warnings.push(
                        "no secure key at this confidence level; rate clamped to zero".to_string(),
                    );
                }
                Some(AnalysisSectionDto {
                    bounds: BoundsDto::from_bounds(&bounds),
                    key_yield: YieldDto::from_yield(&yield_),
                    confidence_level: confidence_from_u_alpha(loaded.params.u_alpha)?,
                    confidence_complement: confidence_complement_from_u_alpha(
                        loaded.params.u_alpha,
                    )?,
                })
            }
            Err(e) => {
                warnings.push(format!("analysis skipped: {e}"));
                None
            }
        },
        Err(_) => {
            warnings.push(
                "analysis skipped: tally is not one signal plus one decoy intensity".to_string(),
            );
            None
        }
    };

    if let Some(out) = &args.out {
        crate::io::write_tally_csv(out, &tally)?;
    }

    let anomalous = verdict.as_ref().is_some_and(|(_, a)| *a);
    let secure = analysis.as_ref().map(|a| a.bounds.secure);
    let report = SimulationReportDto {
        schema_version: SCHEMA_VERSION,
        n_pulses: loaded.config.n_pulses,
        seed: loaded.config.rng_seed,
        params: ParamsEchoDto::from_params(&loaded.params),
        tally: TallyDto::from_tally(&tally),
        verdict: verdict.map(|(v, _)| v),
        analysis,
        warnings,
    };
    println!("{}", to_json_string(&report)?);
    Ok(if anomalous {
        3
    } else if secure == Some(false) {
        2
    } else {
        0
    })
}

pub fn cmd_optimize(args: &OptimizeArgs) -> anyhow::Result<i32> {
    let channel = read_channel(&args.channel)?;
    let params = params_from(args.q, args.f_ec, args.u_alpha)?;
    let mut req = OptimizationRequest::new(channel, args.n_total, params);
    req.mu_range = args.mu_range;
    req.nu_range = args.nu_range;
    req.fraction_range = args.fraction_range;
    req.grid = args.grid;
    let best = optimize_intensities(&req)?;
    let optimum = OptimumDto {
        mu: best.mu,
        nu: best.nu,
        fraction: best.fraction,
        rate: best.rate,
    };
    if let Some(out) = &args.out {
        let file = File::create(out).with_context(|| format!("cannot write {}", out.display()))?;
        crate::io::write_optimum_csv(file, &optimum)?;
    }
    let report = OptimizeReportDto {
        schema_version: SCHEMA_VERSION,
        channel: ChannelDto::from_model(&req.channel),
        n_total: req.n_total,
        params: ParamsEchoDto::from_params(&params),
        secure: best.rate > 0.0,
        optimum,
    };
    println!("{}", to_json_string(&report)?);
    Ok(if best.rate > 0.0 { 0 } else { 2 })
}

pub fn cmd_sweep(args: &SweepArgs) -> anyhow::Result<i32> {
    let channel = read_channel(&args.channel)?;
    let params = params_from(args.q, args.f_ec, args.u_alpha)?;
    let mut req = OptimizationRequest::new(channel, args.n_total, params);
    req.mu_range = args.mu_range;
    req.nu_range = args.nu_range;
    req.fraction_range = args.fraction_range;
    req.grid = args.grid;
    let mode = match args.mode {
        SweepModeArg::Fixed => SweepMode::Fixed {
            mu: args.mu,
            nu: args.nu,
            decoy_fraction: args.fraction,
        },
        SweepModeArg::Reoptimized => SweepMode::Reoptimized,
    };
    let protocol = args.protocol.to_protocol();
    let rows = sweep_distance(&req, args.d_min, args.d_max, args.step, protocol, mode)?;
    match &args.out {
        Some(out) => {
            let file =
                File::create(out).with_context(|| format!("cannot write {}", out.display()))?;
            crate::io::write_sweep_csv(file, &rows)?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            crate::io::write_sweep_csv(&mut lock, &rows)?;
            lock.flush()?;
        }
    }
    Ok(0)
}

pub fn cmd_fit(args: &FitArgs) -> anyhow::Result<i32> {
    let stats = read_measurement_records(&args.input)?;
    let (signal, decoy) = split_signal_decoy_owned(stats)?;
    let fit = fit_channel(&signal, &decoy, args.distance_km, args.alpha_db_per_km)?;
    let report = FitReportDto {
        schema_version: SCHEMA_VERSION,
        channel: ChannelDto::from_model(&fit.model),
        fit_residual_decoy_qber: fit.decoy_qber_residual,
    };
    println!("{}", to_json_string(&report)?);
    Ok(0)
}

impl ProtocolArg {
    pub fn to_protocol(self) -> decoyqkd::channel::Protocol {
        match self {
            ProtocolArg::OneDecoy => decoyqkd::channel::Protocol::OneDecoy,
            ProtocolArg::NonDecoy => decoyqkd::channel::Protocol::NonDecoy,
            ProtocolArg::PerfectDecoy => decoyqkd::channel::Protocol::PerfectDecoy,
        }
    }
}
