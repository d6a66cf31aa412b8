//! Dispatch from a validated [`RunConfig`] to the analysis routines.

use std::f64::consts::FRAC_PI_4;
use std::time::Instant;

use qwrg_core::analysis::jacobian::{jacobian_eigs, ScalingReport};
use qwrg_core::analysis::poles::{find_family_poles, fit_theta_scaling, PoleOptions, PoleSet};
use qwrg_core::analysis::series::{extract_series, x11_order_check, PrecisionMode, SeriesFit, SeriesOptions};
use qwrg_core::analysis::{reference_eigenvalues, AnalysisError};
use qwrg_core::coin::raw_hopping;
use qwrg_core::evolution::{
    evolve_final, fit_period, period_window, return_series, uniform_spinor, Observable, WalkState, WINDOW_PREFACTOR,
};
use qwrg_core::network::{assemble_propagator, build_dsg, build_loop};
use qwrg_core::rg_scalar::{flow_trace, FlowStatus};
use qwrg_core::{Complex64, Family};
use qwrg_report::{period_options, predicted_period_exponent, run_all, Hooks};

use crate::config::{Command, Format, Precision, RunConfig};
use crate::document::*;

pub const DEFAULT_GRID: usize = qwrg_report::POLE_GRID;
pub const DEFAULT_RG_K: u32 = 10;

fn line_eta(cfg: &RunConfig, family: Family) -> Option<f64> {
    (family == Family::Line).then(|| cfg.eta.unwrap_or(FRAC_PI_4))
}

fn numerical(e: impl std::fmt::Display) -> ErrorRecord {
    ErrorRecord::numerical(e.to_string())
}

/// Result of one run plus the CSV rendering of its sequence, if any.
pub struct RunOutput {
    pub document: ResultDocument,
    pub csv: Option<String>,
}

pub fn run(config: &RunConfig) -> RunOutput {
    let start = Instant::now();
    let outcome = match config.validate() {
        Err(e) => Err(ErrorRecord::config(e.to_string())),
        Ok(()) => dispatch(config),
    };
    let elapsed = start.elapsed().as_secs_f64();
    let (payload, error, csv) = match outcome {
        Ok((p, csv)) => {
            let error = match &p {
                Payload::Report(r) if r.failed > 0 => {
                    let ids: Vec<String> = r.rows.iter().filter(|r| !r.passed).map(|r| r.id.to_string()).collect();
                    Some(ErrorRecord::criterion(format!("criteria {} failed", ids.join(", "))))
                }
                _ => None,
            };
            (Some(p), error, csv)
        }
        Err(e) => (None, Some(e), None),
    };
    let document = ResultDocument::new(config.clone(), elapsed, payload, error);
    let csv = if config.format == Format::Csv { csv } else { None };
    RunOutput { document, csv }
}

type Dispatched = Result<(Payload, Option<String>), ErrorRecord>;

fn dispatch(cfg: &RunConfig) -> Dispatched {
    match cfg.command {
        Command::Simulate => simulate(cfg),
        Command::Rg => rg(cfg),
        Command::Jacobian => jacobian(cfg),
        Command::Poles => poles(cfg),
        Command::Scaling => scaling(cfg),
        Command::Series => series(cfg),
        Command::Report => report(),
    }
}

fn simulate(cfg: &RunConfig) -> Dispatched {
    let family = cfg.family.expect("validated");
    let eta = line_eta(cfg, family);
    let net = match family {
        Family::Dsg => build_dsg(cfg.generation.expect("validated")),
        _ => build_loop(cfg.size.expect("validated")),
    }
    .map_err(numerical)?;
    let hops = raw_hopping(family, Complex64::new(1.0, 0.0), eta).map_err(numerical)?;
    let prop = assemble_propagator(&net, &hops).map_err(numerical)?;
    let steps = cfg
        .steps
        .unwrap_or_else(|| period_window(net.num_sites, predicted_period_exponent(family), WINDOW_PREFACTOR));
    let spinor = uniform_spinor(family.coin_dim());
    let series = return_series(&prop, 0, &spinor, steps, Observable::Projection).map_err(numerical)?;
    let psi0 = WalkState::localized(net.num_sites, 0, &spinor).map_err(numerical)?;
    let last = evolve_final(&prop, &psi0, steps, false).map_err(numerical)?;
    let fit = fit_period(&series, &period_options());
    let last_overlap = *series.overlap.last().expect("t = 0 is always recorded");
    let summary = TrajectorySummary {
        family: family.name().into(),
        num_sites: net.num_sites,
        steps,
        origin: 0,
        observable: "projection".into(),
        final_norm: last.norm(),
        re_overlap_final: last_overlap.re,
        im_overlap_final: last_overlap.im,
        mean_return_probability: series.probability.iter().sum::<f64>() / series.len() as f64,
        period: fit.as_ref().ok().map(|f| f.period),
        frequency: fit.as_ref().ok().map(|f| f.frequency),
        peak_to_floor: fit.as_ref().ok().map(|f| f.peak_to_floor),
        period_note: fit.as_ref().err().map(|e| e.to_string()),
    };
    let csv = csv_schema_line("series") + &series.to_csv();
    Ok((Payload::Trajectory(summary), Some(csv)))
}

fn rg(cfg: &RunConfig) -> Dispatched {
    let family = cfg.family.expect("validated");
    let eta = line_eta(cfg, family);
    let z = Complex64::new(cfg.re_z.expect("validated"), cfg.im_z.expect("validated"));
    let k_max = cfg.k_max.unwrap_or(DEFAULT_RG_K);
    let trace = flow_trace(family, z, eta, k_max).map_err(numerical)?;
    let (status, diverged_at) = match trace.status {
        FlowStatus::Completed => ("completed", None),
        FlowStatus::Diverged { k } => ("diverged", Some(k)),
    };
    let doc = FlowTraceDoc {
        family: family.name().into(),
        re_z: z.re,
        im_z: z.im,
        eta,
        status: status.into(),
        diverged_at,
        k: trace.points.iter().map(|p| p.k).collect(),
        re_a: trace.points.iter().map(|p| p.a.re).collect(),
        im_a: trace.points.iter().map(|p| p.a.im).collect(),
        re_b: trace.points.iter().map(|p| p.b.re).collect(),
        im_b: trace.points.iter().map(|p| p.b.im).collect(),
    };
    let csv = csv_schema_line("flow_trace") + &trace.to_csv();
    Ok((Payload::FlowTrace(doc), Some(csv)))
}

fn jacobian(cfg: &RunConfig) -> Dispatched {
    let family = cfg.family.expect("validated");
    let j = jacobian_eigs(family, cfg.eta).map_err(numerical)?;
    Ok((
        Payload::Jacobian(JacobianDoc {
            family: family.name().into(),
            lambda1: j.lambda1,
            lambda2: j.lambda2,
            re_a_star: j.a_star.re,
            im_a_star: j.a_star.im,
            re_b_star: j.b_star.re,
            im_b_star: j.b_star.im,
            re_z_star: j.z_star.re,
            im_z_star: j.z_star.im,
            eta: j.eta,
            jacobian: j.jacobian,
            steps: j.steps,
            method: j.method,
        }),
        None,
    ))
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

pub fn pole_set_doc(set: &PoleSet) -> PoleSetDoc {
    PoleSetDoc {
        k: set.k,
        component: [set.component.0, set.component.1],
        omega: set.angles.clone(),
        re_residue: set.residues.iter().map(|r| finite(r.re)).collect(),
        im_residue: set.residues.iter().map(|r| finite(r.im)).collect(),
        inverse_residual: set.residual.clone(),
        grid: set.grid,
        unresolved: set.unresolved,
        warnings: set.warnings.clone(),
    }
}

fn pole_sets(cfg: &RunConfig, family: Family) -> Result<Vec<PoleSet>, ErrorRecord> {
    let eta = line_eta(cfg, family);
    let (lo, hi) = cfg.k_range(1, 1);
    let grid = cfg.grid.unwrap_or(DEFAULT_GRID);
    (lo..=hi)
        .map(|k| find_family_poles(family, k, eta, grid, &PoleOptions::default()).map_err(numerical))
        .collect()
}

fn poles(cfg: &RunConfig) -> Dispatched {
    let family = cfg.family.expect("validated");
    let sets = pole_sets(cfg, family)?;
    let mut csv = csv_schema_line("poles");
    for (i, s) in sets.iter().enumerate() {
        let body = s.to_csv();
        // one header for the whole file
        csv += if i == 0 { &body } else { body.split_once('\n').map_or("", |x| x.1) };
    }
    Ok((
        Payload::Poles(PolesDoc {
            family: family.name().into(),
            eta: line_eta(cfg, family),
            sets: sets.iter().map(pole_set_doc).collect(),
        }),
        Some(csv),
    ))
}

fn scaling(cfg: &RunConfig) -> Dispatched {
    let family = cfg.family.expect("validated");
    let j = jacobian_eigs(family, cfg.eta).map_err(numerical)?;
    let mut report = ScalingReport::from_eigenvalues(&j).map_err(numerical)?;
    if cfg.k_min.is_some() || cfg.k_max.is_some() {
        let sets = pole_sets(cfg, family)?;
        let pts: Vec<(u32, f64)> = sets.iter().filter_map(|s| s.smallest_angle().map(|w| (s.k, w))).collect();
        match fit_theta_scaling(&pts) {
            Ok(fit) => {
                // the angle ratio per step is √(λ1λ2) = b^{d_w}
                let spread = fit.per_step_ratios.iter().map(|r| (r.ln() - fit.slope).abs()).fold(0.0, f64::max);
                report.add_pole_fit(fit.ratio, Some(spread / family.rescaling_base().ln()));
            }
            Err(AnalysisError::InvalidInput(msg)) => return Err(ErrorRecord::config(msg)),
            Err(e) => return Err(numerical(e)),
        }
    }
    Ok((
        Payload::Scaling(ScalingDoc {
            family: family.name().into(),
            base: report.base,
            lambda1: report.lambda1,
            lambda2: report.lambda2,
            d_f: report.d_f,
            d_w: report.d_w,
            sources: report
                .sources
                .iter()
                .map(|s| ScalingSourceDoc {
                    kind: s.kind.name().into(),
                    d_f: s.d_f,
                    d_w: s.d_w,
                    uncertainty: s.uncertainty,
                })
                .collect(),
        }),
        None,
    ))
}

pub fn series_fit_doc(f: &SeriesFit) -> SeriesFitDoc {
    let re = |v: &[Complex64]| v.iter().map(|c| c.re).collect::<Vec<_>>();
    let im = |v: &[Complex64]| v.iter().map(|c| c.im).collect::<Vec<_>>();
    SeriesFitDoc {
        k: f.k,
        re_cal_a: f.cal_a.re,
        im_cal_a: f.cal_a.im,
        re_cal_b: f.cal_b.re,
        im_cal_b: f.cal_b.im,
        re_alpha2_ratio: f.alpha2_ratio.re,
        im_alpha2_ratio: f.alpha2_ratio.im,
        re_alpha: re(&f.a.coeffs),
        im_alpha: im(&f.a.coeffs),
        re_beta: re(&f.b.coeffs),
        im_beta: im(&f.b.coeffs),
        re_x11: re(&f.x11.coeffs),
        im_x11: im(&f.x11.coeffs),
        re_x12: re(&f.x12.coeffs),
        im_x12: im(&f.x12.coeffs),
        radius: f.radius,
        nodes: f.nodes,
        precision_bits: f.precision_bits,
        consistency: f.consistency,
    }
}

pub fn series_options(cfg: &RunConfig, family: Family, k: u32) -> SeriesOptions {
    let mode = match cfg.precision {
        Precision::Auto => PrecisionMode::Auto,
        Precision::Double => PrecisionMode::Double,
        Precision::Extended => PrecisionMode::Extended {
            bits: cfg.bits.unwrap_or_else(|| qwrg_core::analysis::series::extended_bits(family, k)),
        },
    };
    SeriesOptions { mode, ..Default::default() }
}

fn series(cfg: &RunConfig) -> Dispatched {
    let family = cfg.family.expect("validated");
    let eta = line_eta(cfg, family);
    let (lo, hi) = cfg.k_range(1, 1);
    let fits: Vec<SeriesFit> = (lo..=hi)
        .map(|k| extract_series(family, k, eta, &series_options(cfg, family, k)).map_err(numerical))
        .collect::<Result<_, _>>()?;
    let ks: Vec<u32> = (lo..=hi).collect();
    let x11_rates = if ks.len() >= 2 {
        x11_order_check(family, &ks, eta, &series_options(cfg, family, hi))
            .map_err(numerical)?
            .rates
            .into_iter()
            .map(|r| OrderRateDoc { order: r.order, rate: r.rate, expected: r.expected, matched: r.matched.into() })
            .collect()
    } else {
        Vec::new()
    };
    let (l1, l2) = reference_eigenvalues(family);
    Ok((
        Payload::Series(SeriesDoc {
            family: family.name().into(),
            eta,
            lambda1: l1,
            lambda2: l2,
            fits: fits.iter().map(series_fit_doc).collect(),
            x11_rates,
        }),
        None,
    ))
}

fn report() -> Dispatched {
    let rows = run_all(&Hooks::default());
    for r in &rows {
        println!("{}", r.line());
    }
    let passed = rows.iter().filter(|r| r.passed).count();
    let failed = rows.len() - passed;
    Ok((Payload::Report(ReportDoc { passed, failed, rows }), None))
}
