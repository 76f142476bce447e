use std::io::Write;

use phnlab_core::em::sample_invariant;
use phnlab_core::io::{fmt_f64, write_binary, write_csv};
use phnlab_core::lyapunov::{
    default_grid, fit_drift_constants, fit_quadratic_bounds, lyapunov_value, solve_q_tilde, tune_spec, DriftFit,
    QuadraticBounds,
};
use phnlab_core::occupation::{occupation_scaling_check, OccupationConfig};
use phnlab_core::queue::{queue_compare_sweep, write_event_log, QueueConfig};
use phnlab_core::stats::{
    clt_experiment, mdp_gaussian_surrogate, mdp_rate_check, w1_convergence_sweep, CltConfig, MdpConfig, MdpReport,
    Oracle, SurrogateConfig, SweepConfig,
};
use phnlab_core::{
    derive_seed, DiffusionModel, Exact1DInvariant, LyapunovSpec, PhaseTypeService, SampleSet, SamplerConfig,
    SeedRole,
};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::config::{require, ReferenceBlock, SampleFormat};
use crate::output::file_name;
use crate::{CliError, Context};

pub fn dispatch(ctx: &Context) -> Result<(), CliError> {
    let model = ctx.config.model.build()?;
    let written = match ctx.subcommand {
        "validate-model" => validate_model(ctx, &model)?,
        "sample" => sample(ctx, &model)?,
        "converge" => converge(ctx, &model)?,
        "clt" => clt(ctx, &model)?,
        "mdp" => mdp(ctx, &model)?,
        "occupation" => occupation(ctx, &model)?,
        "lyapunov-audit" => lyapunov_audit(ctx, &model)?,
        "queue-compare" => queue_compare(ctx, &model)?,
        other => return Err(CliError::Invalid(format!("unknown subcommand {other}"))),
    };
    for name in written {
        eprintln!("wrote {}", ctx.path(&name).display());
    }
    Ok(())
}

type Written = Vec<String>;

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn reference_config(block: &ReferenceBlock, seed: u64) -> SamplerConfig {
    let mut sc = SamplerConfig::new(block.eta, block.n_samples, (block.burn_in_time / block.eta).ceil() as usize, seed);
    sc.n_chains = block.n_chains;
    sc
}

#[derive(Serialize)]
struct ModelReport {
    dim: usize,
    alpha: f64,
    beta: f64,
    r: Vec<Vec<f64>>,
    gamma: Vec<f64>,
    sigma_sq: Vec<Vec<f64>>,
    sigma: Vec<Vec<f64>>,
    c_ellip: f64,
    c_op: f64,
    c_op_tilde: f64,
    /// Service rates after rescaling to mean one.
    rates: Vec<f64>,
}

fn validate_model(ctx: &Context, model: &DiffusionModel) -> Result<Written, CliError> {
    let report = ModelReport {
        dim: model.dim(),
        alpha: model.alpha(),
        beta: model.beta(),
        r: rows(model.r()),
        gamma: model.gamma().iter().copied().collect(),
        sigma_sq: rows(model.sigma_sq()),
        sigma: rows(model.sigma()),
        c_ellip: model.c_ellip(),
        c_op: model.c_op(),
        c_op_tilde: model.c_op_tilde(),
        rates: model.phase_type().rates().iter().copied().collect(),
    };
    let mut out = std::io::stdout().lock();
    let show = |m: &[Vec<f64>]| {
        m.iter()
            .map(|r| format!("[{}]", r.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(", ")))
            .collect::<Vec<_>>()
            .join(", ")
    };
    writeln!(out, "model ok: d = {}", report.dim)?;
    writeln!(out, "R = [{}]", show(&report.r))?;
    writeln!(out, "gamma = {:?}", report.gamma)?;
    writeln!(out, "sigma sigma' = [{}]", show(&report.sigma_sq))?;
    writeln!(out, "c_ellip = {}", report.c_ellip)?;
    writeln!(out, "C_op = {}, C_op_tilde = {}", report.c_op, report.c_op_tilde)?;
    let p = ctx.write_json("model.json", &report)?;
    Ok(vec![file_name(&p)])
}

#[derive(Serialize)]
struct SampleSummary<'a> {
    n_samples: usize,
    dim: usize,
    mean: Vec<f64>,
    provenance: &'a phnlab_core::Provenance,
}

fn sample(ctx: &Context, model: &DiffusionModel) -> Result<Written, CliError> {
    let em = require(ctx.config.em.as_ref(), "em")?;
    let sc = SamplerConfig {
        eta: em.eta,
        n_samples: em.n_samples,
        gap: em.gap,
        burn_in: em.burn_in,
        seed: ctx.seed,
        n_chains: em.n_chains,
        x0: em.x0.clone(),
    };
    let set = sample_invariant(model, &sc)?;
    let mut written = Vec::new();
    if matches!(em.format, SampleFormat::Csv | SampleFormat::Both) {
        let p = ctx.path("samples.csv");
        let mut w = std::io::BufWriter::new(std::fs::File::create(&p)?);
        write_csv(&set, Some(&ctx.header.line()), &mut w)?;
        w.flush()?;
        written.push(file_name(&p));
    }
    if matches!(em.format, SampleFormat::Binary | SampleFormat::Both) {
        let p = ctx.path("samples.bin");
        let mut w = std::io::BufWriter::new(std::fs::File::create(&p)?);
        write_binary(&set, &mut w)?;
        w.flush()?;
        written.push(file_name(&p));
    }
    let mean = (0..set.dim)
        .map(|i| set.coordinate(i).iter().sum::<f64>() / set.len() as f64)
        .collect();
    let p = ctx.write_json(
        "sample_summary.json",
        &SampleSummary {
            n_samples: set.len(),
            dim: set.dim,
            mean,
            provenance: &set.provenance,
        },
    )?;
    written.push(file_name(&p));
    Ok(written)
}

fn converge(ctx: &Context, model: &DiffusionModel) -> Result<Written, CliError> {
    let stats = require(ctx.config.stats.as_ref(), "stats")?;
    let block = require(stats.converge.as_ref(), "stats.converge")?;
    let oracle = if model.dim() == 1 {
        Oracle::Exact1D(Exact1DInvariant::new(model.alpha(), model.beta())?)
    } else {
        let reference = block.reference.as_ref().ok_or_else(|| {
            CliError::Invalid("models with more than one phase need `stats.converge.reference`".into())
        })?;
        let sc = reference_config(reference, derive_seed(ctx.seed, SeedRole::Calibration, 0));
        Oracle::Reference(sample_invariant(model, &sc)?)
    };
    let cfg = SweepConfig {
        eta_list: block.eta_list.clone(),
        n_samples: block.n_samples,
        seed: ctx.seed,
        n_chains: block.n_chains,
        burn_in_time: block.burn_in_time,
        n_directions: block.n_directions,
    };
    let report = w1_convergence_sweep(model, &cfg, &oracle)?;
    let table: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| vec![fmt_f64(r.eta), fmt_f64(r.w1), fmt_f64(r.envelope)])
        .collect();
    let a = ctx.write_table("converge.csv", &["eta", "w1", "envelope"], &table)?;
    let b = ctx.write_json("converge_summary.json", &report)?;
    println!("{}: slope {:.4}, C {:.4}", report.metric, report.slope, report.c_fit);
    Ok(vec![file_name(&a), file_name(&b)])
}

fn clt(ctx: &Context, model: &DiffusionModel) -> Result<Written, CliError> {
    let stats = require(ctx.config.stats.as_ref(), "stats")?;
    let b = require(stats.clt.as_ref(), "stats.clt")?;
    let cfg = CltConfig {
        burn_in: b.burn_in,
        calibration_factor: b.calibration_factor,
        max_lag: b.max_lag,
        ..CltConfig::new(b.h.clone(), b.eta, b.n, b.replications, ctx.seed)
    };
    let report = clt_experiment(model, &cfg)?;
    let table: Vec<Vec<String>> = report
        .normalized_values
        .iter()
        .zip(&report.ergodic_means)
        .enumerate()
        .map(|(i, (z, m))| vec![i.to_string(), fmt_f64(*m), fmt_f64(*z)])
        .collect();
    let a = ctx.write_table("clt_values.csv", &["replication", "ergodic_mean", "normalized_value"], &table)?;
    let j = ctx.write_json("clt.json", &report)?;
    println!(
        "KS statistic {}, p-value {}, sigma_h^2 {:.6}",
        opt(report.test_statistic),
        opt(report.p_value),
        report.sigma_h2_hat
    );
    Ok(vec![file_name(&a), file_name(&j)])
}

#[derive(Serialize)]
struct MdpOutput {
    diffusion: MdpReport,
    surrogate: Option<MdpReport>,
}

fn mdp(ctx: &Context, model: &DiffusionModel) -> Result<Written, CliError> {
    let stats = require(ctx.config.stats.as_ref(), "stats")?;
    let b = require(stats.mdp.as_ref(), "stats.mdp")?;
    let cfg = MdpConfig {
        h: b.h.clone(),
        eta: b.eta,
        n_list: b.n_list.clone(),
        a_exponent: b.a_exponent,
        thresholds: b.thresholds.clone(),
        replications: b.replications,
        seed: ctx.seed,
        burn_in: b.burn_in,
        calibration_factor: b.calibration_factor,
        max_lag: None,
        x0: None,
    };
    let diffusion = mdp_rate_check(model, &cfg)?;
    let surrogate = b
        .surrogate_n
        .map(|n| {
            mdp_gaussian_surrogate(&SurrogateConfig {
                n,
                a_exponent: b.a_exponent,
                thresholds: b.thresholds.clone(),
                replications: b.replications,
                seed: derive_seed(ctx.seed, SeedRole::Calibration, 1),
                variance: 1.0,
            })
        })
        .transpose()?;
    let mut table = Vec::new();
    for (source, rep) in std::iter::once(("diffusion", &diffusion)).chain(surrogate.iter().map(|s| ("surrogate", s))) {
        for r in &rep.rows {
            table.push(vec![
                source.to_string(),
                r.n.to_string(),
                fmt_f64(r.a_n),
                fmt_f64(r.z),
                r.replications.to_string(),
                r.hits.to_string(),
                fmt_f64(r.p_hat),
                opt(r.log_rate),
                fmt_f64(r.theoretical_rate),
                opt(r.ratio),
                r.zero_hits.to_string(),
            ]);
        }
    }
    let a = ctx.write_table(
        "mdp.csv",
        &[
            "source",
            "n",
            "a_n",
            "z",
            "replications",
            "hits",
            "p_hat",
            "log_rate",
            "theoretical_rate",
            "ratio",
            "zero_hits",
        ],
        &table,
    )?;
    let j = ctx.write_json("mdp.json", &MdpOutput { diffusion, surrogate })?;
    Ok(vec![file_name(&a), file_name(&j)])
}

fn occupation(ctx: &Context, model: &DiffusionModel) -> Result<Written, CliError> {
    let b = require(ctx.config.occupation.as_ref(), "occupation")?;
    let cfg = OccupationConfig {
        x0: b.x0.clone().unwrap_or_else(|| vec![0.0; model.dim()]),
        t: b.t,
        eta: b.eta,
        eps_list: b.eps_list.clone(),
        n_paths: b.n_paths,
        seed: ctx.seed,
        tolerance: b.tolerance,
    };
    let report = occupation_scaling_check(model, &cfg)?;
    let (p, mut w) = ctx.csv("occupation.csv")?;
    w.write_all(report.to_csv().as_bytes())?;
    w.flush()?;
    let j = ctx.write_json("occupation.json", &report)?;
    println!(
        "ratio spread {:.4}, linear in eps: {}",
        report.max_ratio_spread, report.linear_in_eps
    );
    Ok(vec![file_name(&p), file_name(&j)])
}

#[derive(Serialize)]
struct Audit {
    fit: DriftFit,
    q_tilde: Vec<Vec<f64>>,
    ineq1_max_eigenvalue: f64,
    ineq2_max_eigenvalue: f64,
    q_searched: bool,
    quadratic_bounds: QuadraticBounds,
}

fn lyapunov_audit(ctx: &Context, model: &DiffusionModel) -> Result<Written, CliError> {
    let b = require(ctx.config.lyapunov.as_ref(), "lyapunov")?;
    let grid = default_grid(model.dim(), b.grid_points, b.radius, ctx.seed);
    let (spec, qt, fit) = match b.kappa {
        None => tune_spec(model, &grid)?,
        Some(kappa) => {
            let qt = solve_q_tilde(model.r(), model.p())?;
            let mut spec = LyapunovSpec::new(qt.q.clone(), kappa, 0.0)?;
            let min_v = grid.iter().map(|y| lyapunov_value(model, &spec, y)).fold(f64::INFINITY, f64::min);
            spec.c_hat2 = (-min_v).max(0.0) + 1e-6;
            let fit = fit_drift_constants(model, &spec, &grid)?;
            (spec, qt, fit)
        }
    };
    let audit = Audit {
        quadratic_bounds: fit_quadratic_bounds(model, &spec, &grid),
        q_tilde: rows(&qt.q),
        ineq1_max_eigenvalue: qt.ineq1,
        ineq2_max_eigenvalue: qt.ineq2,
        q_searched: qt.searched,
        fit,
    };
    let j = ctx.write_json("lyapunov_audit.json", &audit)?;
    println!(
        "c1 = {}, c1_breve = {}, violations {}",
        audit.fit.c1,
        audit.fit.c1_breve,
        audit.fit.violations.len()
    );
    if !audit.fit.violations.is_empty() {
        return Err(CliError::Numerical(format!(
            "{} grid points violate the fitted drift bound (report written to {})",
            audit.fit.violations.len(),
            file_name(&j)
        )));
    }
    Ok(vec![file_name(&j)])
}

fn queue_compare(ctx: &Context, model: &DiffusionModel) -> Result<Written, CliError> {
    let b = require(ctx.config.queue.as_ref(), "queue")?;
    if b.n_list.is_empty() || b.samples == 0 {
        return Err(CliError::Invalid("queue needs a non-empty n_list and samples >= 1".into()));
    }
    let spec = &ctx.config.model;
    let pt = PhaseTypeService::new(&spec.p, &spec.routing, &spec.v)?;
    let horizon = QueueConfig::horizon_for(b.burn_in, b.spacing, b.samples);
    let mut base = QueueConfig::new(b.n_list[0], &pt, spec.alpha, spec.beta, horizon, ctx.seed)?;
    base.burn_in = b.burn_in;
    base.spacing = b.spacing;
    base.record_events = b.record_events;
    base.validate()?;
    let em: Option<SampleSet> = b
        .em_reference
        .as_ref()
        .map(|r| sample_invariant(model, &reference_config(r, derive_seed(ctx.seed, SeedRole::Calibration, 2))))
        .transpose()?;
    let oracle = if model.dim() == 1 {
        Some(Exact1DInvariant::new(model.alpha(), model.beta())?)
    } else {
        None
    };
    let report = queue_compare_sweep(&base, &b.n_list, model, em.as_ref(), oracle.as_ref(), b.n_directions)?;
    let mut written = Vec::new();
    let table: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                fmt_f64(r.lambda_n),
                r.samples.to_string(),
                opt(r.w1_exact),
                opt(r.w1_em),
                fmt_f64(r.busy_fraction),
            ]
        })
        .collect();
    let a = ctx.write_table(
        "queue_compare.csv",
        &["n", "lambda_n", "samples", "w1_exact", "sliced_w1_em", "busy_fraction"],
        &table,
    )?;
    written.push(file_name(&a));
    for r in &report.rows {
        if let Some(set) = &r.scaled {
            let (p, mut w) = ctx.csv(&format!("queue_scaled_n{}.csv", r.n))?;
            write_csv(set, None, &mut w)?;
            w.flush()?;
            written.push(file_name(&p));
        }
        if let Some(events) = &r.events {
            let (p, mut w) = ctx.csv(&format!("queue_events_n{}.csv", r.n))?;
            write_event_log(events, None, &mut w)?;
            w.flush()?;
            written.push(file_name(&p));
        }
    }
    let j = ctx.write_json("queue_compare.json", &report)?;
    written.push(file_name(&j));
    for r in &report.rows {
        println!("n = {}: W1 exact {}, sliced W1 to EM {}", r.n, opt(r.w1_exact), opt(r.w1_em));
    }
    Ok(written)
}
