//! The four subcommands: model spectra, error-signal sweeps with pipeline
//! cross-checks, closed-loop lock runs, and loss/injection budgets.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sqzsim_core::budget::{
    chain_total, dark_port_reflectivity, plan_injection, BandPlan, EfficiencyChain,
    FrequencyBand, InjectionThresholds, InterferometerModel,
};
use sqzsim_core::control::{
    acquire_lock, DisturbanceModel, LockScenario, LoopDisturbance, LoopState, ServoConfig,
    SineLine,
};
use sqzsim_core::detection::spectrum::SpectralWindow;
use sqzsim_core::detection::{
    demodulate, homodyne_difference_current, lo_phase_error, pump_phase_error,
    qcf_monitor_current, DemodulatorConfig, HomodyneSetup,
};
use sqzsim_core::opo::{amplified_qcf, squeezing_spectrum, CavityParams, PumpSetting, SqueezerSetting};
use sqzsim_core::sideband::{CarrierFrame, SynthesisMode};
use sqzsim_core::db_from_ratio;

use crate::config::{GridKind, ScenarioConfig, ServoKeys};
use crate::output::{write_text, OutputTable};

/// Command failure, classified for the process exit code.
#[derive(Debug)]
pub enum AppError {
    /// Exit code 2.
    Config(String),
    /// Exit code 3.
    Simulation(String),
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AppError::Config(m) => write!(f, "{m}"),
            AppError::Simulation(m) => write!(f, "{m}"),
        }
    }
}

fn sim_err(e: impl std::fmt::Display) -> AppError {
    AppError::Simulation(e.to_string())
}

fn io_err(e: std::io::Error) -> AppError {
    AppError::Simulation(format!("output failed: {e}"))
}

fn cavity_of(cfg: &ScenarioConfig) -> Result<CavityParams, AppError> {
    CavityParams::new(
        cfg.cavity.fwhm_hz,
        cfg.cavity.fsr_hz,
        cfg.cavity.escape_efficiency,
    )
    .map_err(sim_err)
}

fn pump_of(cfg: &ScenarioConfig) -> Result<PumpSetting, AppError> {
    let pump = match (cfg.pump.classical_gain, cfg.pump.pump_ratio) {
        (Some(g), None) => PumpSetting::from_classical_gain(g),
        (None, Some(x)) => PumpSetting::from_pump_ratio(x),
        _ => {
            return Err(AppError::Config(
                "exactly one pump convention must be set".into(),
            ))
        }
    };
    Ok(pump.map_err(sim_err)?.with_power(cfg.pump.pump_power_w))
}

/// Squeezing and antisqueezing spectrum of the configured source.
pub fn cmd_spectrum(cfg: &ScenarioConfig, out: &Path) -> Result<Vec<PathBuf>, AppError> {
    let cavity = cavity_of(cfg)?;
    let pump = pump_of(cfg)?;
    let eta = cfg.homodyne.total_efficiency;

    let table = match cfg.cavity.grid {
        GridKind::Log => {
            let n = cfg.cavity.grid_points;
            let (lo, hi) = (cfg.cavity.grid_lo_hz, cfg.cavity.grid_hi_hz);
            let ratio = hi / lo;
            let freqs: Vec<f64> = (0..n)
                .map(|k| lo * ratio.powf(k as f64 / (n - 1) as f64))
                .collect();
            let pair = squeezing_spectrum(&pump, &cavity, eta, &freqs).map_err(sim_err)?;
            let mut t = OutputTable::new(
                "spectrum.csv",
                &["freq_hz", "squeezed_db", "antisqueezed_db"],
            );
            for (s, a) in pair.squeezed.bins().iter().zip(pair.antisqueezed.bins()) {
                t.push(vec![
                    format!("{}", s.freq_hz),
                    format!("{}", db_from_ratio(s.rel_variance)),
                    format!("{}", db_from_ratio(a.rel_variance)),
                ]);
            }
            t
        }
        GridKind::AudioBandWindows => {
            let mut freqs = Vec::new();
            let mut meta = Vec::new();
            for w in SpectralWindow::audio_band_preset() {
                let bins = ((w.f_hi_hz - w.f_lo_hz) / w.rbw_hz).floor() as usize;
                for j in 0..bins {
                    freqs.push(w.f_lo_hz + (j as f64 + 0.5) * w.rbw_hz);
                    meta.push((w.rbw_hz, w.n_avg));
                }
            }
            let pair = squeezing_spectrum(&pump, &cavity, eta, &freqs).map_err(sim_err)?;
            let mut t = OutputTable::new(
                "spectrum.csv",
                &["freq_hz", "squeezed_db", "antisqueezed_db", "rbw_hz", "n_avg"],
            );
            for ((s, a), (rbw, n_avg)) in pair
                .squeezed
                .bins()
                .iter()
                .zip(pair.antisqueezed.bins())
                .zip(&meta)
            {
                t.push(vec![
                    format!("{}", s.freq_hz),
                    format!("{}", db_from_ratio(s.rel_variance)),
                    format!("{}", db_from_ratio(a.rel_variance)),
                    format!("{rbw}"),
                    format!("{n_avg}"),
                ]);
            }
            t
        }
    };
    let path = table.write_to(out).map_err(io_err)?;
    crate::log_info(&format!(
        "wrote {} ({} rows)",
        path.display(),
        table.rows()
    ));
    Ok(vec![path])
}

/// Error-signal sweeps over the two control phases, with demodulation
/// pipeline cross-check columns.
pub fn cmd_error_signals(cfg: &ScenarioConfig, out: &Path) -> Result<Vec<PathBuf>, AppError> {
    let alpha = cfg.qcf.amplitude;
    let alpha_lo = cfg.homodyne.lo_amplitude;
    let gain = cfg.qcf.single_pass_gain;
    let offset_hz = cfg.qcf.offset_hz;
    let offset = TAU * offset_hz;
    let frame = CarrierFrame::from_wavelength(cfg.carrier.wavelength_m).map_err(sim_err)?;

    // commensurate timebase: 8 samples per offset period, 200 offset periods
    let fs = 8.0 * offset_hz;
    let duration = 200.0 / offset_hz;
    let cutoff = offset_hz / 20.0;
    let pump_demod = DemodulatorConfig::new(2.0 * offset_hz, FRAC_PI_2, cutoff).map_err(sim_err)?;
    let lo_demod = DemodulatorConfig::new(offset_hz, FRAC_PI_2, cutoff).map_err(sim_err)?;

    const N: usize = 24;
    let angles: Vec<f64> = (0..N).map(|k| -PI + k as f64 * TAU / N as f64).collect();

    let mut table = OutputTable::new(
        "error_signals.csv",
        &[
            "phi_rad",
            "Phi_rad",
            "err_pump_closed",
            "err_pump_pipeline",
            "err_lo_closed",
            "err_lo_pipeline",
        ],
    );
    for &phi in &angles {
        let setting = SqueezerSetting::from_single_pass_gain(gain, phi).map_err(sim_err)?;
        let qcf = amplified_qcf(alpha, offset, &setting).map_err(sim_err)?;
        let monitor = qcf_monitor_current(&qcf, &frame, duration, fs, SynthesisMode::Baseband)
            .map_err(sim_err)?;
        let pump_pipe = demodulate(&monitor, &pump_demod).map_err(sim_err)?;
        let pump_closed = pump_phase_error(alpha, &setting);
        for &big_phi in &angles {
            let setup = HomodyneSetup::new(
                alpha_lo,
                big_phi,
                cfg.homodyne.splitter_ratio,
                cfg.homodyne.mode_matching,
            )
            .map_err(sim_err)?;
            let diff =
                homodyne_difference_current(&setup, &qcf, duration, fs).map_err(sim_err)?;
            let lo_pipe = demodulate(&diff, &lo_demod).map_err(sim_err)?;
            let lo_closed = lo_phase_error(alpha_lo, alpha, &setting, big_phi);
            table.push(vec![
                format!("{phi}"),
                format!("{big_phi}"),
                format!("{pump_closed}"),
                format!("{pump_pipe}"),
                format!("{lo_closed}"),
                format!("{lo_pipe}"),
            ]);
        }
    }
    let path = table.write_to(out).map_err(io_err)?;
    crate::log_info(&format!(
        "wrote {} ({} rows)",
        path.display(),
        table.rows()
    ));
    Ok(vec![path])
}

fn servo_config(keys: &ServoKeys) -> ServoConfig {
    ServoConfig {
        p_gain: keys.p_gain,
        i_corner_hz: keys.i_corner_hz,
        actuator_limit: keys.actuator_limit,
        set_point: keys.set_point,
        polarity: keys.polarity,
    }
}

fn loop_disturbance(keys: &ServoKeys) -> LoopDisturbance {
    LoopDisturbance {
        random_walk: keys.random_walk,
        lines: keys
            .lines
            .iter()
            .map(|&(freq_hz, amplitude)| SineLine { freq_hz, amplitude })
            .collect(),
    }
}

/// Closed-loop lock run: report block plus a decimated trace.
pub fn cmd_lock(
    cfg: &ScenarioConfig,
    seed_override: Option<u64>,
    out: &Path,
) -> Result<Vec<PathBuf>, AppError> {
    let seed = seed_override.unwrap_or(cfg.loops.seed);
    let cavity = cavity_of(cfg)?;
    let l = &cfg.loops;
    let scenario = LockScenario {
        alpha: cfg.qcf.amplitude,
        alpha_lo: cfg.homodyne.lo_amplitude,
        squeezer_gain: cfg.qcf.single_pass_gain,
        cavity,
        pdh_mod_freq_hz: l.pdh_mod_freq_hz,
        co_resonance_offset_hz: l.co_resonance_offset_hz,
        servos: [
            servo_config(&l.pump),
            servo_config(&l.lo),
            servo_config(&l.cavity),
        ],
        disturbance: DisturbanceModel {
            seed: seed.wrapping_add(1),
            loops: [
                loop_disturbance(&l.pump),
                loop_disturbance(&l.lo),
                loop_disturbance(&l.cavity),
            ],
        },
        dt_s: l.dt_s,
        duration_s: l.duration_s,
        lock_threshold_rad: l.threshold_rad,
        detuning_tolerance_hz: l.detuning_tolerance_hz,
        trace_stride: l.trace_stride,
    };

    let initial = if l.random_start {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        LoopState::new(
            rng.random_range(-PI..PI),
            rng.random_range(-PI..PI),
            rng.random_range(-0.25 * cfg.cavity.fwhm_hz..0.25 * cfg.cavity.fwhm_hz),
        )
    } else {
        LoopState::new(
            l.initial_phi_rad,
            l.initial_lo_phase_rad,
            l.initial_detuning_hz,
        )
    };

    let (report, trace) = acquire_lock(&initial, &scenario).map_err(sim_err)?;
    let report_text = report.to_text();
    print!("{report_text}");
    let p1 = write_text(out, "lock_report.txt", &report_text).map_err(io_err)?;
    let p2 = write_text(out, "lock_trace.csv", &trace.to_csv()).map_err(io_err)?;
    crate::log_info(&format!(
        "wrote {} and {} ({} trace rows, seed {seed})",
        p1.display(),
        p2.display(),
        trace.rows.len()
    ));
    Ok(vec![p1, p2])
}

fn band_row(plan: &BandPlan) -> Vec<String> {
    vec![
        format!("{}-{}", plan.band.lo_hz, plan.band.hi_hz),
        format!("{}", plan.r_power),
        plan.route.to_string(),
        format!("{}", plan.eta_total),
        format!("{}", plan.squeezing_in_db),
        format!("{}", plan.squeezing_out_db),
    ]
}

/// Efficiency chain and the interferometer injection plan.
pub fn cmd_budget(cfg: &ScenarioConfig, out: &Path) -> Result<Vec<PathBuf>, AppError> {
    let b = &cfg.budget;
    let chain = EfficiencyChain::new(vec![
        ("faraday".into(), b.faraday),
        ("mode_matching".into(), b.mode_matching),
        ("propagation".into(), b.propagation),
        ("photodiode".into(), b.photodiode),
    ])
    .map_err(sim_err)?;
    let mut chain_table = OutputTable::new("chain.csv", &["stage", "efficiency", "cumulative"]);
    let mut cumulative = 1.0;
    for (name, eta) in chain.stages() {
        cumulative *= eta;
        chain_table.push(vec![
            name.clone(),
            format!("{eta}"),
            format!("{cumulative}"),
        ]);
    }
    debug_assert!((cumulative - chain_total(&chain)).abs() < 1e-15);

    let model = InterferometerModel::new(
        b.heterodyne_freq_hz,
        b.schnupp_asymmetry_m,
        b.reflectivity_overrides.clone(),
    )
    .map_err(sim_err)?;
    let band =
        FrequencyBand::new(b.signal_band_hz.0, b.signal_band_hz.1).map_err(sim_err)?;
    let plan = plan_injection(
        &model,
        band,
        b.input_squeezing_db,
        &InjectionThresholds::default(),
    )
    .map_err(sim_err)?;

    let mut budget_table = OutputTable::new(
        "budget.csv",
        &["band", "r_power", "route", "eta_total", "sqz_in_db", "sqz_out_db"],
    );
    budget_table.push(band_row(&plan.low_band));
    budget_table.push(band_row(&plan.high_band));

    let p1 = chain_table.write_to(out).map_err(io_err)?;
    let p2 = budget_table.write_to(out).map_err(io_err)?;
    crate::log_info(&format!(
        "wrote {} and {} (case {}, r at 2x heterodyne = {})",
        p1.display(),
        p2.display(),
        plan.case.as_str(),
        dark_port_reflectivity(&model, 2.0 * b.heterodyne_freq_hz)
    ));
    Ok(vec![p1, p2])
}
