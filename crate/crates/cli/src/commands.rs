//! Implementations of the subcommands.

use std::path::Path;

use rayon::prelude::*;

use pairsim_core::cw::{
    autocorrelation_cw, cross_correlation_cw, flux_cw as flux_cw_value, spectrum_cw, Arm,
};
use pairsim_core::events::{
    coincidence_histogram, pair_overlap_fraction, sample_pairs, Channel, SampleSettings,
    RNG_ALGORITHM,
};
use pairsim_core::fit::{
    estimate_mismatch, fit_double_exponential, fit_lorentzian, sweep_rate_scale,
    synthesize_sweep_point, FitResult, SweepRecord,
};
use pairsim_core::grid::{Axis, Trace};
use pairsim_core::io;
use pairsim_core::langevin::{self, canonical_contraction};
use pairsim_core::model::PumpEnvelope;
use pairsim_core::pulsed::{
    acorr_pulsed, cw_steady_flux_kernel, flux_pulsed as flux_pulsed_trace,
    flux_pulsed_delta_averaged, xcorr_pulsed, PulsedError,
};
use pairsim_core::pump::{cw_intracavity_energy, rect_pulse_response};
use pairsim_core::Real;

use crate::config::Settings;
use crate::manifest::Manifest;
use crate::CliError;

const TWO_PI: Real = std::f64::consts::TAU;

fn numeric<E: std::fmt::Display>(e: E) -> CliError {
    CliError::numeric(e.to_string())
}

/// Pump envelope selection shared by the pulsed subcommands.
fn envelope_from(settings: &Settings) -> Result<PumpEnvelope<Real>, CliError> {
    let kind = settings.string("envelope", Some("rect"))?;
    let power = settings.power("pulse_power", 1.0)?;
    match kind.as_str() {
        "cw" => Ok(PumpEnvelope::cw_from_power(power)),
        "rect" => {
            let tau_p = settings.time("tau_p", None)?;
            PumpEnvelope::rectangular_from_power(power, tau_p)
                .map_err(|e| CliError::config(e.to_string()))
        }
        "file" => {
            let path = settings.string("envelope_file", None)?;
            let tr: Trace<Real> = io::read_trace_csv(Path::new(&path))?;
            let values = tr
                .values
                .iter()
                .map(|&v| pairsim_core::C64::new(v, 0.0))
                .collect();
            PumpEnvelope::sampled(tr.axis.start(), tr.axis.step(), values)
                .map_err(|e| CliError::config(e.to_string()))
        }
        other => Err(CliError::config(format!(
            "envelope must be cw, rect, or file (got `{other}`)"
        ))),
    }
}

pub fn spectrum(out_dir: &Path, config_path: &Path) -> Result<(), CliError> {
    let settings = Settings::load(config_path)?;
    let cfg = settings.process_config()?;
    let gbar = cfg.gamma_bar();
    let default_span = 2.0 * (cfg.effective_mismatch().abs() + 8.0 * gbar);
    let span = settings.freq("omega_span_over_2pi", Some(default_span))?;
    let points = settings.integer("points", 2001)?;
    settings.finish()?;

    let axis = Axis::symmetric(span / 2.0, points, "omega_hz").map_err(numeric)?;
    let mut mf = Manifest::new("spectrum", out_dir)?;
    for (arm, name) in [(Arm::Signal, "spectrum_signal.csv"), (Arm::Idler, "spectrum_idler.csv")] {
        let tr = Trace::new(
            axis.clone(),
            axis.values().map(|w| spectrum_cw(w, &cfg, arm)).collect(),
            "spectral_density",
        )
        .map_err(numeric)?;
        // Emit the axis in Hz for plotting convenience.
        let hz_axis = Axis::new(
            axis.start() / TWO_PI,
            axis.step() / TWO_PI,
            axis.len(),
            "omega_hz",
        )
        .map_err(numeric)?;
        let out = Trace::new(hz_axis, tr.values, "spectral_density").map_err(numeric)?;
        io::write_trace_csv(&out, &mf.output(name))?;
    }
    mf.write(&settings)?;
    Ok(())
}

pub fn flux_cw(out_dir: &Path, config_path: &Path) -> Result<(), CliError> {
    let settings = Settings::load(config_path)?;
    let cfg = settings.process_config()?;
    let gbar = cfg.gamma_bar();
    let span = settings.freq("delta_span_over_2pi", Some(12.0 * gbar))?;
    let points = settings.integer("points", 1001)?;
    settings.finish()?;

    let axis = Axis::symmetric(span / 2.0 / TWO_PI, points, "delta_hz").map_err(numeric)?;
    let values: Vec<Real> = axis
        .values()
        .map(|d_hz| {
            let mut c = cfg.clone();
            c.mismatch_delta = d_hz * TWO_PI;
            flux_cw_value(&c)
        })
        .collect();
    let tr = Trace::new(axis, values, "flux").map_err(numeric)?;
    let mut mf = Manifest::new("flux-cw", out_dir)?;
    io::write_trace_csv(&tr, &mf.output("flux_cw.csv"))?;
    mf.write(&settings)?;
    Ok(())
}

pub fn flux_pulsed(out_dir: &Path, config_path: &Path) -> Result<(), CliError> {
    let settings = Settings::load(config_path)?;
    let cfg = settings.process_config()?;
    let envelope = envelope_from(&settings)?;
    let deltas = settings.freq_list("deltas_over_2pi", &[cfg.mismatch_delta])?;
    let tau_end = envelope.support_end().unwrap_or(0.0);
    let t_max = settings.time("t_max", Some(2.0 * tau_end.max(10.0 / cfg.gamma_bar())))?;
    let gmax = cfg
        .signal
        .linewidth_total()
        .max(cfg.idler.linewidth_total());
    let fastest = deltas
        .iter()
        .fold(gmax, |acc, d| acc.max(cfg.gamma_bar() + d.abs()));
    let default_points = ((t_max * fastest / 0.02).ceil() as usize).max(201) + 1;
    let points = settings.integer("points", default_points)?;
    let normalized = settings.boolean("normalized", true)?;
    let averaging = settings.freq("delta_averaging_over_2pi", Some(0.0))?;
    let averaging_points = settings.integer("delta_averaging_points", 1)?;
    let include_pump = settings.boolean("include_pump_energy", false)?;
    settings.finish()?;

    let grid = Axis::span(0.0, t_max, points, "t_s").map_err(numeric)?;
    let power = envelope.value_at(tau_end * 0.5).norm_sqr();
    let traces: Vec<Result<Vec<Real>, PulsedError>> = deltas
        .par_iter()
        .map(|&delta| {
            let mut c = cfg.clone();
            c.mismatch_delta = delta;
            let tr = if averaging > 0.0 && averaging_points > 1 {
                flux_pulsed_delta_averaged(
                    &c,
                    &envelope,
                    &grid,
                    Arm::Signal,
                    averaging,
                    averaging_points,
                )?
            } else {
                flux_pulsed_trace(&c, &envelope, &grid, Arm::Signal)?
            };
            let scale = if normalized {
                let steady_drive = match &c.pump {
                    Some(pump) => cw_intracavity_energy(power, pump, c.pump_detuning),
                    None => power,
                };
                cw_steady_flux_kernel(&c, Arm::Signal, steady_drive)
            } else {
                1.0
            };
            Ok(tr.values.into_iter().map(|v| v / scale).collect())
        })
        .collect();
    let mut columns_data: Vec<(String, Vec<Real>)> = Vec::new();
    for (delta, res) in deltas.iter().zip(traces) {
        let vals = res.map_err(numeric)?;
        columns_data.push((format!("flux_delta_{:.6}_mhz", delta / TWO_PI / 1e6), vals));
    }
    if include_pump {
        let pump = cfg
            .pump
            .as_ref()
            .ok_or_else(|| CliError::config("include_pump_energy requires gamma_p_over_2pi"))?;
        let resp = rect_pulse_response(&envelope, pump, cfg.pump_detuning, &grid)
            .map_err(numeric)?;
        let steady = cw_intracavity_energy(power, pump, cfg.pump_detuning);
        columns_data.push((
            "pump_energy_norm".to_string(),
            resp.stored_energy.iter().map(|&e| e / steady).collect(),
        ));
    }
    let columns: Vec<(&str, &[Real])> = columns_data
        .iter()
        .map(|(n, v)| (n.as_str(), v.as_slice()))
        .collect();
    let mut mf = Manifest::new("flux-pulsed", out_dir)?;
    io::write_multi_trace_csv(&grid, &columns, &mf.output("flux_pulsed.csv"))?;
    mf.write(&settings)?;
    Ok(())
}

pub fn xcorr(out_dir: &Path, config_path: &Path) -> Result<(), CliError> {
    let settings = Settings::load(config_path)?;
    let cfg = settings.process_config()?;
    let kind = settings.string("envelope", Some("cw"))?;
    let gmin = cfg
        .signal
        .linewidth_total()
        .min(cfg.idler.linewidth_total());
    let span = settings.time("tau_span", Some(12.0 / gmin))?;
    let points = settings.integer("points", 1201)?;

    let axis = Axis::symmetric(span / 2.0, points, "tau_s").map_err(numeric)?;
    let values: Vec<Real> = match kind.as_str() {
        "cw" => axis
            .values()
            .map(|tau| {
                cross_correlation_cw(
                    tau,
                    cfg.signal.linewidth_total(),
                    cfg.idler.linewidth_total(),
                )
            })
            .collect(),
        _ => {
            let envelope = envelope_from(&settings)?;
            let t_ref = settings.time("t_ref", None)?;
            let peak = xcorr_pulsed(&cfg, &envelope, t_ref, t_ref);
            if !(peak > 0.0) {
                return Err(CliError::numeric("no field at the reference time"));
            }
            axis.values()
                .map(|tau| xcorr_pulsed(&cfg, &envelope, t_ref, t_ref + tau) / peak)
                .collect()
        }
    };
    settings.finish()?;
    let tr = Trace::new(axis, values, "xcorr_normalized").map_err(numeric)?;
    let mut mf = Manifest::new("xcorr", out_dir)?;
    io::write_trace_csv(&tr, &mf.output("xcorr.csv"))?;
    mf.write(&settings)?;
    Ok(())
}

pub fn acorr(out_dir: &Path, config_path: &Path) -> Result<(), CliError> {
    let settings = Settings::load(config_path)?;
    let cfg = settings.process_config()?;
    let kind = settings.string("envelope", Some("cw"))?;
    let gbar = cfg.gamma_bar();
    let span = settings.time("tau_span", Some(16.0 / gbar))?;
    let points = settings.integer("points", 1201)?;

    let axis = Axis::symmetric(span / 2.0, points, "tau_s").map_err(numeric)?;
    let values: Vec<Real> = match kind.as_str() {
        "cw" => axis
            .values()
            .map(|tau| autocorrelation_cw(tau, &cfg))
            .collect(),
        _ => {
            let envelope = envelope_from(&settings)?;
            let t_ref = settings.time("t_ref", None)?;
            axis.values()
                .map(|tau| acorr_pulsed(&cfg, &envelope, t_ref, t_ref + tau))
                .collect::<Result<Vec<_>, _>>()
                .map_err(numeric)?
        }
    };
    settings.finish()?;
    let tr = Trace::new(axis, values, "g2").map_err(numeric)?;
    let mut mf = Manifest::new("acorr", out_dir)?;
    io::write_trace_csv(&tr, &mf.output("acorr.csv"))?;
    mf.write(&settings)?;
    Ok(())
}

pub fn pump_response(out_dir: &Path, config_path: &Path) -> Result<(), CliError> {
    let settings = Settings::load(config_path)?;
    let cfg = settings.process_config()?;
    let pump = cfg
        .pump
        .as_ref()
        .ok_or_else(|| CliError::config("pump-response requires gamma_p_over_2pi"))?;
    let tau_p = settings.time("tau_p", None)?;
    let power = settings.power("pulse_power", 1.0)?;
    let detunings = settings.freq_list("delta_p_list_over_2pi", &[cfg.pump_detuning])?;
    let t_max = settings.time("t_max", Some(tau_p + 8.0 / pump.linewidth_total()))?;
    let gamma_p = pump.linewidth_total();
    let fastest = detunings
        .iter()
        .fold(gamma_p, |acc, d| acc.max(gamma_p / 2.0 + d.abs()));
    let default_points = ((t_max * fastest / 0.02).ceil() as usize).max(200) + 1;
    let points = settings.integer("points", default_points)?;
    settings.finish()?;

    let grid = Axis::span(0.0, t_max, points, "t_s").map_err(numeric)?;
    let envelope = PumpEnvelope::rectangular_from_power(power, tau_p)
        .map_err(|e| CliError::config(e.to_string()))?;
    let mut columns_data: Vec<(String, Vec<Real>)> = Vec::new();
    for &dp in &detunings {
        let resp = rect_pulse_response(&envelope, pump, dp, &grid).map_err(numeric)?;
        let steady = cw_intracavity_energy(power, pump, dp);
        columns_data.push((
            format!("energy_norm_dp_{:.6}_mhz", dp / TWO_PI / 1e6),
            resp.stored_energy.iter().map(|&e| e / steady).collect(),
        ));
    }
    let columns: Vec<(&str, &[Real])> = columns_data
        .iter()
        .map(|(n, v)| (n.as_str(), v.as_slice()))
        .collect();
    let mut mf = Manifest::new("pump-response", out_dir)?;
    io::write_multi_trace_csv(&grid, &columns, &mf.output("pump_response.csv"))?;
    mf.write(&settings)?;
    Ok(())
}

pub fn langevin_check(out_dir: &Path, config_path: &Path) -> Result<(), CliError> {
    let settings = Settings::load(config_path)?;
    let cfg = settings.process_config()?;
    settings.finish()?;
    let gbar = cfg.gamma_bar();

    let mut report = String::new();
    let mut all_ok = true;
    let mut check = |name: &str, value: Real, tol: Real| {
        let ok = value.abs() <= tol;
        report.push_str(&format!(
            "{}: {} (|{value:.3e}| <= {tol:.1e})\n",
            name,
            if ok { "PASS" } else { "FAIL" }
        ));
        if !ok {
            all_ok = false;
        }
    };

    // Flux ratio constancy across mismatches.
    let ratio_at = |delta: Real| {
        let mut c = cfg.clone();
        c.mismatch_delta = delta;
        langevin::flux_out(&c).map(|(n_s, _)| n_s / flux_cw_value(&c))
    };
    let reference = ratio_at(0.0).map_err(numeric)?;
    let mut worst = 0.0;
    for k in 1..=10 {
        let r = ratio_at(0.7 * gbar * k as Real).map_err(numeric)?;
        worst = Real::max(worst, (r / reference - 1.0).abs());
    }
    check("flux_ratio_mismatch_independence", worst, 1e-8);

    // Spectra shape ratio constancy across frequency.
    let s_ref = langevin::spectra_out(0.0, &cfg, Arm::Signal) / spectrum_cw(0.0, &cfg, Arm::Signal);
    let mut worst = 0.0;
    for k in 1..=10 {
        let w = 0.9 * gbar * k as Real;
        let r = langevin::spectra_out(w, &cfg, Arm::Signal) / spectrum_cw(w, &cfg, Arm::Signal);
        worst = Real::max(worst, (r / s_ref - 1.0).abs());
    }
    check("spectra_shape_ratio_constancy", worst, 1e-10);

    // Kernel-quadrature autocorrelation against the closed form.
    let env = PumpEnvelope::cw_from_power(cfg.pump_drive);
    let kernels = langevin::build_kernels(&cfg, &env, 1e-3 / gbar).map_err(numeric)?;
    let t_ref = 50.0 / gbar;
    let taus: Vec<Real> = (0..=8).map(|k| 0.6 * k as Real / gbar).collect();
    let mut worst = 0.0;
    let mut g2_rows = Vec::new();
    for &tau in &taus {
        let kernel_route = kernels.g2_auto(Arm::Signal, t_ref, t_ref + tau).map_err(numeric)?;
        let closed = autocorrelation_cw(tau, &cfg);
        g2_rows.push(kernel_route);
        worst = Real::max(worst, (kernel_route / closed - 1.0).abs());
    }
    check("g2_auto_cross_picture", worst, 1e-5);

    // Canonical contraction of the exact CW transfer.
    let mut worst = 0.0;
    for k in -10..=10 {
        let w = gbar * k as Real / 2.0;
        for arm in [Arm::Signal, Arm::Idler] {
            worst = Real::max(worst, (canonical_contraction(&cfg, w, arm) - 1.0).abs());
        }
    }
    check("canonical_contraction", worst, 1e-10);

    // First-order commutator residual equals minus the flux.
    let (_, smooth) = kernels.commutator_residual(Arm::Signal, t_ref, t_ref);
    let n_s = langevin::flux_out(&cfg).map_err(numeric)?.0;
    check(
        "first_order_commutator_residual_vs_flux",
        smooth.re / n_s + 1.0,
        1e-3,
    );

    let mut mf = Manifest::new("langevin-check", out_dir)?;
    let tau_axis = Axis::new(0.0, 0.6 / gbar, taus.len(), "tau_s").map_err(numeric)?;
    let tr = Trace::new(tau_axis, g2_rows, "g2_kernel_route").map_err(numeric)?;
    io::write_trace_csv(&tr, &mf.output("langevin_g2.csv"))?;
    std::fs::write(mf.output("langevin_check.txt"), &report).map_err(CliError::Io)?;
    mf.write(&settings)?;
    if all_ok {
        Ok(())
    } else {
        Err(CliError::numeric(format!(
            "cross-picture checks failed:\n{report}"
        )))
    }
}

pub fn sweep(out_dir: &Path, config_path: &Path) -> Result<(), CliError> {
    let settings = Settings::load(config_path)?;
    let cfg = settings.process_config()?;
    if cfg.pump.is_none() {
        return Err(CliError::config("sweep requires gamma_p_over_2pi"));
    }
    let span = settings.freq("delta_p_span_over_2pi", Some(TWO_PI * 120e6))?;
    let points = settings.integer("points", 601)?;
    let peak_rate = settings.number("peak_rate", Some(1e4))?;
    let noise = settings.number("noise_fraction", Some(0.0))?;
    let seed = settings.integer("seed", 1)? as u64;
    settings.finish()?;

    let axis = Axis::symmetric(span / 2.0, points, "delta_p_rad_s").map_err(numeric)?;
    // Points are independent; fan them out with per-point noise streams so
    // scheduling cannot change the output.
    let scale = sweep_rate_scale(&cfg, peak_rate).map_err(numeric)?;
    let detunings: Vec<Real> = axis.values().collect();
    let samples: Result<Vec<(Real, Real)>, _> = detunings
        .par_iter()
        .enumerate()
        .map(|(index, &dp)| {
            synthesize_sweep_point(&cfg, dp, scale, noise, seed, index as u64)
        })
        .collect();
    let samples = samples.map_err(numeric)?;
    let (counts, reflection): (Vec<Real>, Vec<Real>) = samples.into_iter().unzip();
    let record = SweepRecord::new(axis, counts, reflection).map_err(numeric)?;
    let mut mf = Manifest::new("sweep", out_dir)?;
    mf.note(format!("rng_algorithm = {RNG_ALGORITHM}"));
    io::write_sweep_csv(&record, &mf.output("sweep.csv"))?;
    mf.write(&settings)?;
    Ok(())
}

fn fit_report(fit: &FitResult<Real>, scale_hz: &[&str]) -> (String, serde_json::Value) {
    let mut text = String::new();
    let mut params = serde_json::Map::new();
    for p in &fit.params {
        let (value, uncertainty, name) = if scale_hz.contains(&p.name) {
            (
                p.value / TWO_PI,
                p.uncertainty / TWO_PI,
                format!("{}_over_2pi_hz", p.name),
            )
        } else {
            (p.value, p.uncertainty, p.name.to_string())
        };
        text.push_str(&format!("{name} = {value}\n{name}_uncertainty = {uncertainty}\n"));
        params.insert(
            name,
            serde_json::json!({ "value": value, "uncertainty": uncertainty }),
        );
    }
    text.push_str(&format!(
        "residual_ss = {}\niterations = {}\nconverged = {}\n",
        fit.residual_ss, fit.iterations, fit.converged
    ));
    let json = serde_json::json!({
        "params": params,
        "residual_ss": fit.residual_ss,
        "iterations": fit.iterations,
        "converged": fit.converged,
    });
    (text, json)
}

pub fn fit(out_dir: &Path, config_path: &Path) -> Result<(), CliError> {
    let settings = Settings::load(config_path)?;
    let input = settings.string("input", None)?;
    let model = settings.string("model", Some("lorentzian"))?;
    let inverted = settings.boolean("inverted", false)?;
    let symmetric = settings.boolean("symmetric", true)?;
    settings.finish()?;

    let trace: Trace<Real> = io::read_trace_csv(Path::new(&input))?;
    let result = match model.as_str() {
        "lorentzian" => fit_lorentzian(&trace, inverted),
        "double_exponential" => fit_double_exponential(&trace, symmetric),
        other => {
            return Err(CliError::config(format!(
                "model must be lorentzian or double_exponential (got `{other}`)"
            )))
        }
    }
    .map_err(numeric)?;
    let (text, json) = fit_report(&result, &[]);
    let mut mf = Manifest::new("fit", out_dir)?;
    std::fs::write(mf.output("fit_report.txt"), &text).map_err(CliError::Io)?;
    std::fs::write(
        mf.output("fit.json"),
        serde_json::to_string_pretty(&json).expect("serializable"),
    )
    .map_err(CliError::Io)?;
    mf.write(&settings)?;
    if result.converged {
        Ok(())
    } else {
        Err(CliError::numeric("fit did not converge"))
    }
}

pub fn events(out_dir: &Path, config_path: &Path) -> Result<(), CliError> {
    let settings = Settings::load(config_path)?;
    let cfg = settings.process_config()?;
    let sample = SampleSettings {
        pair_rate: settings.number("pair_rate", Some(1e4))?,
        duration: settings.time("duration", Some(1.0))?,
        efficiency_signal: settings.number("efficiency_s", Some(1.0))?,
        efficiency_idler: settings.number("efficiency_i", Some(1.0))?,
        background_rate_signal: settings.number("background_rate_s", Some(0.0))?,
        background_rate_idler: settings.number("background_rate_i", Some(0.0))?,
        seed: settings.integer("seed", 1)? as u64,
    };
    let bin_width = settings.time("bin_width", Some(2.2e-9))?;
    let window = settings.time("window", Some(50.0 * bin_width))?;
    settings.finish()?;

    let evs = sample_pairs(&cfg, &sample).map_err(numeric)?;
    let hist = coincidence_histogram(&evs, bin_width, window).map_err(numeric)?;
    let mut mf = Manifest::new("events", out_dir)?;
    mf.note(format!("rng_algorithm = {RNG_ALGORITHM}"));
    mf.note(format!(
        "pair_overlap_fraction = {}",
        pair_overlap_fraction(&cfg, sample.pair_rate)
    ));
    let events_path = mf.output("events.csv");
    {
        use std::io::Write;
        let mut w = std::io::BufWriter::new(
            std::fs::File::create(&events_path).map_err(CliError::Io)?,
        );
        writeln!(w, "channel,timestamp_s").map_err(CliError::Io)?;
        for e in &evs {
            let ch = match e.channel {
                Channel::Signal => "signal",
                Channel::Idler => "idler",
            };
            writeln!(w, "{ch},{}", e.timestamp).map_err(CliError::Io)?;
        }
    }
    io::write_trace_csv(&hist, &mf.output("histogram.csv"))?;
    mf.write(&settings)?;
    Ok(())
}

pub fn mismatch(out_dir: &Path, config_path: &Path) -> Result<(), CliError> {
    let settings = Settings::load(config_path)?;
    let input = settings.string("input", None)?;
    let gamma_si = settings.freq("gamma_si_over_2pi", None)?;
    settings.finish()?;

    let sweep = io::read_sweep_csv(Path::new(&input))?;
    let fit = estimate_mismatch(&sweep, gamma_si).map_err(numeric)?;
    let (text, json) = fit_report(&fit, &["delta0", "fwhm_check"]);
    let mut mf = Manifest::new("mismatch", out_dir)?;
    std::fs::write(mf.output("mismatch_report.txt"), &text).map_err(CliError::Io)?;
    std::fs::write(
        mf.output("mismatch.json"),
        serde_json::to_string_pretty(&json).expect("serializable"),
    )
    .map_err(CliError::Io)?;
    mf.write(&settings)?;
    Ok(())
}
