//! Time-domain closed-loop simulation of the three servo loops: cavity
//! length (PDH), pump phase, and local-oscillator phase.
//!
//! The pump loop reads the demodulated control-field monitor current (its
//! closed form [`crate::detection::pump_phase_error`]), the LO loop reads
//! the demodulated homodyne difference current
//! ([`crate::detection::lo_phase_error`]), and the cavity loop reads a PDH
//! error scaled to detuning units. The two phase loops are coupled: the LO
//! error depends on `2·phi + Phi`, so the detected quadrature is only fixed
//! when both loops are closed.
//!
//! Loop arrays are ordered `[pump, lo, cavity]`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::{PI, TAU};

use crate::detection::{lo_phase_error, pump_phase_error};
use crate::error::{Error, Result};
use crate::opo::{squeezing_spectrum, CavityParams, PumpSetting, SqueezerSetting};

pub const LOOP_PUMP: usize = 0;
pub const LOOP_LO: usize = 1;
pub const LOOP_CAVITY: usize = 2;

/// Wrap an angle to `(-π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let w = x.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Shortest signed distance of `x` from the lattice `k·period`, in
/// `(-period/2, period/2]`.
pub fn lattice_distance(x: f64, period: f64) -> f64 {
    let m = x.rem_euclid(period);
    if m > 0.5 * period {
        m - period
    } else {
        m
    }
}

/// Proportional-integral servo for one loop.
///
/// `p_gain` is in 1/s per unit error; the integrator corner `i_corner_hz`
/// sets the integral gain as `p_gain·2π·i_corner`. The actuator limit bounds
/// the total actuator travel (rad for the phase loops, Hz for the cavity
/// loop). Polarity must be +1 or -1; it selects which error-signal zeros are
/// stable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServoConfig {
    pub p_gain: f64,
    pub i_corner_hz: f64,
    pub actuator_limit: f64,
    pub set_point: f64,
    pub polarity: f64,
}

impl ServoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p_gain <= 0.0 || !self.p_gain.is_finite() {
            return Err(Error::NonPositive {
                name: "p_gain",
                value: self.p_gain,
            });
        }
        if self.i_corner_hz < 0.0 || !self.i_corner_hz.is_finite() {
            return Err(Error::OutOfRange {
                name: "i_corner",
                value: self.i_corner_hz,
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        if self.actuator_limit <= 0.0 || !self.actuator_limit.is_finite() {
            return Err(Error::NonPositive {
                name: "actuator_limit",
                value: self.actuator_limit,
            });
        }
        if self.polarity != 1.0 && self.polarity != -1.0 {
            return Err(Error::OutOfRange {
                name: "polarity",
                value: self.polarity,
                lo: -1.0,
                hi: 1.0,
            });
        }
        if !self.set_point.is_finite() {
            return Err(Error::NonFinite {
                name: "set_point",
                value: self.set_point,
            });
        }
        Ok(())
    }

    pub fn pump_default() -> Self {
        Self {
            p_gain: 400.0,
            i_corner_hz: 5.0,
            actuator_limit: 500.0,
            set_point: 0.0,
            polarity: 1.0,
        }
    }

    pub fn lo_default() -> Self {
        Self {
            set_point: 0.5 * PI,
            ..Self::pump_default()
        }
    }

    pub fn cavity_default() -> Self {
        Self {
            actuator_limit: 20e6,
            ..Self::pump_default()
        }
    }
}

/// State of the three loops: pump phase `phi`, LO phase `Phi` (`lo_phase`),
/// cavity detuning, plus servo internals. Phases are kept in `(-π, π]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopState {
    pub phi: f64,
    pub lo_phase: f64,
    pub detuning_hz: f64,
    pub t: f64,
    integrators: [f64; 3],
    actuators: [f64; 3],
    pub saturation_events: u32,
}

impl LoopState {
    pub fn new(phi: f64, lo_phase: f64, detuning_hz: f64) -> Self {
        Self {
            phi: wrap_angle(phi),
            lo_phase: wrap_angle(lo_phase),
            detuning_hz,
            t: 0.0,
            integrators: [0.0; 3],
            actuators: [0.0; 3],
            saturation_events: 0,
        }
    }
}

/// Sinusoidal disturbance line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineLine {
    pub freq_hz: f64,
    pub amplitude: f64,
}

/// Disturbance of one loop: a random walk plus sinusoidal lines.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoopDisturbance {
    /// Random-walk strength in rad/√s (Hz/√s for the cavity loop).
    pub random_walk: f64,
    pub lines: Vec<SineLine>,
}

/// Seeded disturbance model for the three loops. Identical seeds and
/// configurations reproduce runs bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceModel {
    pub seed: u64,
    pub loops: [LoopDisturbance; 3],
}

impl DisturbanceModel {
    pub fn none(seed: u64) -> Self {
        Self {
            seed,
            loops: [
                LoopDisturbance::default(),
                LoopDisturbance::default(),
                LoopDisturbance::default(),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for l in &self.loops {
            if l.random_walk < 0.0 || !l.random_walk.is_finite() {
                return Err(Error::OutOfRange {
                    name: "random_walk",
                    value: l.random_walk,
                    lo: 0.0,
                    hi: f64::INFINITY,
                });
            }
        }
        Ok(())
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    /// Additive increments for one step from `t` to `t + dt`.
    pub fn increments(&self, rng: &mut ChaCha8Rng, t: f64, dt: f64) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (i, l) in self.loops.iter().enumerate() {
            let mut d = 0.0;
            if l.random_walk > 0.0 {
                let z: f64 = rng.sample(StandardNormal);
                d += l.random_walk * dt.sqrt() * z;
            }
            for line in &l.lines {
                d += line.amplitude
                    * ((TAU * line.freq_hz * (t + dt)).sin() - (TAU * line.freq_hz * t).sin());
            }
            out[i] = d;
        }
        out
    }
}

/// Lock acquisition outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct LockReport {
    pub acquired: bool,
    pub acquisition_time_s: f64,
    pub residual_rms_rad: f64,
    pub out_of_lock_events: u32,
}

impl LockReport {
    /// Flat key-value text block.
    pub fn to_text(&self) -> String {
        format!(
            "acquired = {}\nacquisition_time_s = {}\nresidual_rms_rad = {}\nout_of_lock_events = {}\n",
            self.acquired, self.acquisition_time_s, self.residual_rms_rad, self.out_of_lock_events
        )
    }
}

/// One decimated trace sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t_s: f64,
    pub phi_rad: f64,
    pub big_phi_rad: f64,
    pub detuning_hz: f64,
    pub err_pump: f64,
    pub err_lo: f64,
    pub err_pdh: f64,
}

/// Decimated time series of a closed-loop run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoopTrace {
    pub rows: Vec<TraceRow>,
}

impl LoopTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_s,phi_rad,Phi_rad,detuning_hz,err_pump,err_lo,err_pdh\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.t_s, r.phi_rad, r.big_phi_rad, r.detuning_hz, r.err_pump, r.err_lo, r.err_pdh
            ));
        }
        out
    }
}

/// Pound-Drever-Hall error signal for the cavity-length loop, normalized
/// and dimensionless.
///
/// Resolved-sideband reflection locking: odd in the detuning, zero at
/// resonance, maximal slope at resonance scaling with the inverse
/// linewidth. The modulation frequency must exceed the linewidth.
pub fn pdh_error(detuning_hz: f64, cav: &CavityParams, mod_freq_hz: f64) -> Result<f64> {
    if mod_freq_hz <= cav.fwhm_hz() {
        return Err(Error::UnresolvedSidebands {
            mod_freq_hz,
            fwhm_hz: cav.fwhm_hz(),
        });
    }
    let refl = |d: f64| {
        let x = Complex64::new(0.0, 2.0 * d / cav.fwhm_hz());
        x / (Complex64::new(1.0, 0.0) + x)
    };
    let f0 = refl(detuning_hz);
    let e = f0 * refl(detuning_hz + mod_freq_hz).conj() - f0.conj() * refl(detuning_hz - mod_freq_hz);
    Ok(0.5 * e.im)
}

/// Disturbed copy of a loop state: additive phase and detuning increments,
/// phases wrapped. Disturbance is applied before error measurement.
pub fn apply_disturbance(state: &LoopState, d: [f64; 3]) -> LoopState {
    let mut s = state.clone();
    s.phi = wrap_angle(s.phi + d[LOOP_PUMP]);
    s.lo_phase = wrap_angle(s.lo_phase + d[LOOP_LO]);
    s.detuning_hz += d[LOOP_CAVITY];
    s
}

/// One deterministic closed-loop step: apply the disturbance, then one PI
/// update per loop with actuator-travel saturation.
///
/// `errors` must have been measured on the disturbed state
/// (see [`apply_disturbance`]); saturation increments the state's counter
/// and freezes the integrator while the actuator is pegged.
pub fn step_closed_loop(
    state: &LoopState,
    errors: [f64; 3],
    cfgs: &[ServoConfig; 3],
    disturbance: [f64; 3],
    dt: f64,
) -> Result<LoopState> {
    if dt <= 0.0 || !dt.is_finite() {
        return Err(Error::NonPositive {
            name: "dt",
            value: dt,
        });
    }
    for cfg in cfgs {
        cfg.validate()?;
        if cfg.p_gain * dt >= 0.5 {
            return Err(Error::UnstableTimestep {
                p_gain: cfg.p_gain,
                dt_s: dt,
            });
        }
    }
    let mut s = apply_disturbance(state, disturbance);
    for i in 0..3 {
        let cfg = &cfgs[i];
        // polarity applies once, to the measured error
        let e = cfg.polarity * errors[i];
        let drive = cfg.p_gain * e + s.integrators[i];
        let proposed = s.actuators[i] - drive * dt;
        let clamped = proposed.clamp(-cfg.actuator_limit, cfg.actuator_limit);
        let delta_int = cfg.p_gain * TAU * cfg.i_corner_hz * e * dt;
        if clamped != proposed {
            s.saturation_events += 1;
            // anti-windup: while pegged, the integrator may only move the
            // drive back off the stop
            let pegged_high = proposed > cfg.actuator_limit;
            if (pegged_high && delta_int > 0.0) || (!pegged_high && delta_int < 0.0) {
                s.integrators[i] += delta_int;
            }
        } else {
            s.integrators[i] += delta_int;
        }
        let step = clamped - s.actuators[i];
        s.actuators[i] = clamped;
        match i {
            LOOP_PUMP => s.phi = wrap_angle(s.phi + step),
            LOOP_LO => s.lo_phase = wrap_angle(s.lo_phase + step),
            _ => s.detuning_hz += step,
        }
    }
    s.t += dt;
    Ok(s)
}

/// Full closed-loop scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct LockScenario {
    /// Control-field amplitude entering the squeezer.
    pub alpha: f64,
    /// Local-oscillator amplitude.
    pub alpha_lo: f64,
    /// Single-pass squeezer gain `g = exp(2r)` driving the error signals.
    pub squeezer_gain: f64,
    pub cavity: CavityParams,
    pub pdh_mod_freq_hz: f64,
    /// Residual co-resonance error injected into the PDH measurement as an
    /// extra detuning (ideal dual-polarization co-resonance is 0).
    pub co_resonance_offset_hz: f64,
    pub servos: [ServoConfig; 3],
    pub disturbance: DisturbanceModel,
    pub dt_s: f64,
    pub duration_s: f64,
    /// Residual-RMS threshold for declaring lock.
    pub lock_threshold_rad: f64,
    /// Cavity loop must hold the detuning within this tolerance.
    pub detuning_tolerance_hz: f64,
    /// Keep every n-th step in the trace.
    pub trace_stride: usize,
}

impl LockScenario {
    pub fn default_with_gain(squeezer_gain: f64) -> Self {
        Self {
            alpha: 1.0,
            alpha_lo: 1.0,
            squeezer_gain,
            cavity: CavityParams::new(28.9e6, 4e9, 1.0).unwrap(),
            pdh_mod_freq_hz: 153.8e6,
            co_resonance_offset_hz: 0.0,
            servos: [
                ServoConfig::pump_default(),
                ServoConfig::lo_default(),
                ServoConfig::cavity_default(),
            ],
            disturbance: DisturbanceModel::none(0),
            dt_s: 1e-4,
            duration_s: 1.0,
            lock_threshold_rad: 1e-3,
            detuning_tolerance_hz: 10e3,
            trace_stride: 20,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.alpha < 0.0 || self.alpha_lo < 0.0 {
            return Err(Error::OutOfRange {
                name: "alpha",
                value: self.alpha.min(self.alpha_lo),
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        if self.squeezer_gain < 1.0 || !self.squeezer_gain.is_finite() {
            return Err(Error::OutOfRange {
                name: "squeezer_gain",
                value: self.squeezer_gain,
                lo: 1.0,
                hi: f64::INFINITY,
            });
        }
        if self.duration_s <= 0.0 {
            return Err(Error::NonPositive {
                name: "duration",
                value: self.duration_s,
            });
        }
        if self.lock_threshold_rad <= 0.0 {
            return Err(Error::NonPositive {
                name: "lock_threshold",
                value: self.lock_threshold_rad,
            });
        }
        if self.detuning_tolerance_hz <= 0.0 {
            return Err(Error::NonPositive {
                name: "detuning_tolerance",
                value: self.detuning_tolerance_hz,
            });
        }
        if self.trace_stride == 0 {
            return Err(Error::NonPositive {
                name: "trace_stride",
                value: 0.0,
            });
        }
        self.disturbance.validate()?;
        for s in &self.servos {
            s.validate()?;
        }
        Ok(())
    }

    /// Stable lock point implied by the servo set points and polarities.
    pub fn lock_point(&self) -> LoopState {
        let phi = self.pump_lock_base();
        let lo = wrap_angle(self.servos[LOOP_LO].set_point - 2.0 * phi);
        LoopState::new(phi, lo, self.servos[LOOP_CAVITY].set_point)
    }

    fn pump_lock_base(&self) -> f64 {
        let cfg = &self.servos[LOOP_PUMP];
        let offset = if cfg.polarity > 0.0 { 0.0 } else { 0.5 * PI };
        wrap_angle(cfg.set_point + offset)
    }

    fn errors_at(&self, state: &LoopState, r: f64) -> Result<[f64; 3]> {
        let pump_setting =
            SqueezerSetting::from_factor(r, state.phi - self.servos[LOOP_PUMP].set_point)?;
        let e_pump = pump_phase_error(self.alpha, &pump_setting);
        let lo_setting = SqueezerSetting::from_factor(r, state.phi)?;
        let e_lo = lo_phase_error(
            self.alpha_lo,
            self.alpha,
            &lo_setting,
            state.lo_phase - self.servos[LOOP_LO].set_point,
        );
        // PDH error rescaled to detuning units with its small-signal slope
        let e_pdh = pdh_error(
            state.detuning_hz - self.servos[LOOP_CAVITY].set_point + self.co_resonance_offset_hz,
            &self.cavity,
            self.pdh_mod_freq_hz,
        )? * self.cavity.fwhm_hz() / 2.0;
        Ok([e_pump, e_lo, e_pdh])
    }

    /// Instantaneous distance from the lock manifold: pump-phase distance to
    /// the stable zeros (mod π), combined LO angle `2·phi + Phi - set` to its
    /// zeros (mod π), both in quadrature.
    fn lock_distance(&self, state: &LoopState) -> f64 {
        let d_pump = lattice_distance(state.phi - self.pump_lock_base(), PI);
        let d_lo = lattice_distance(
            2.0 * state.phi + state.lo_phase - self.servos[LOOP_LO].set_point,
            PI,
        );
        (d_pump * d_pump + d_lo * d_lo).sqrt()
    }

    fn cavity_ok(&self, state: &LoopState) -> bool {
        (state.detuning_hz - self.servos[LOOP_CAVITY].set_point).abs()
            <= self.detuning_tolerance_hz
    }
}

/// Run the three coupled loops from `initial` and report lock acquisition.
///
/// Acquisition requires the residual RMS of the lock distance over the
/// final 20 % of the run to stay below the scenario threshold with the
/// cavity loop inside its detuning tolerance. With the pump off
/// (`squeezer_gain = 1`) both phase error signals vanish identically and a
/// run can only acquire if it happens to start on the lock manifold.
pub fn acquire_lock(initial: &LoopState, sc: &LockScenario) -> Result<(LockReport, LoopTrace)> {
    sc.validate()?;
    let r = 0.5 * sc.squeezer_gain.ln();
    let n_steps = ((sc.duration_s / sc.dt_s).round() as usize).max(1);
    let mut rng = sc.disturbance.rng();
    let mut state = initial.clone();
    state.t = 0.0;

    let mut distances = Vec::with_capacity(n_steps + 1);
    let mut cavity_ok = Vec::with_capacity(n_steps + 1);
    let mut trace = LoopTrace::default();

    for k in 0..n_steps {
        distances.push(sc.lock_distance(&state));
        cavity_ok.push(sc.cavity_ok(&state));
        let d = sc.disturbance.increments(&mut rng, state.t, sc.dt_s);
        let disturbed = apply_disturbance(&state, d);
        let errors = sc.errors_at(&disturbed, r)?;
        if k % sc.trace_stride == 0 {
            trace.rows.push(TraceRow {
                t_s: disturbed.t,
                phi_rad: disturbed.phi,
                big_phi_rad: disturbed.lo_phase,
                detuning_hz: disturbed.detuning_hz,
                err_pump: errors[LOOP_PUMP],
                err_lo: errors[LOOP_LO],
                err_pdh: errors[LOOP_CAVITY],
            });
        }
        state = step_closed_loop(&state, errors, &sc.servos, d, sc.dt_s)?;
    }
    distances.push(sc.lock_distance(&state));
    cavity_ok.push(sc.cavity_ok(&state));

    let n = distances.len();
    let tail = (n / 5).max(1);
    let tail_slice = &distances[n - tail..];
    let residual_rms_rad =
        (tail_slice.iter().map(|d| d * d).sum::<f64>() / tail as f64).sqrt();
    let tail_cavity_ok = cavity_ok[n - tail..].iter().all(|&ok| ok);
    let acquired = residual_rms_rad < sc.lock_threshold_rad && tail_cavity_ok;

    // earliest time after which the lock condition holds to the end
    let mut first_ok = n;
    for k in (0..n).rev() {
        if distances[k] < sc.lock_threshold_rad && cavity_ok[k] {
            first_ok = k;
        } else {
            break;
        }
    }
    let acquisition_time_s = if acquired && first_ok < n {
        first_ok as f64 * sc.dt_s
    } else {
        sc.duration_s
    };

    let mut out_of_lock_events = 0u32;
    let mut in_lock = false;
    for k in 0..n {
        let locked_now = distances[k] < sc.lock_threshold_rad && cavity_ok[k];
        if !in_lock && locked_now {
            in_lock = true;
        } else if in_lock && (distances[k] > 10.0 * sc.lock_threshold_rad || !cavity_ok[k]) {
            in_lock = false;
            out_of_lock_events += 1;
        }
    }

    Ok((
        LockReport {
            acquired,
            acquisition_time_s,
            residual_rms_rad,
            out_of_lock_events,
        },
        trace,
    ))
}

/// Scenario for the two-loop coupling demonstration.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingScenario {
    pub lock: LockScenario,
    /// Open the pump loop to show that the LO loop alone cannot fix the
    /// detected quadrature.
    pub pump_loop_closed: bool,
    /// Deterministic linear drift of the pump phase.
    pub phi_drift_rad_per_s: f64,
    /// Pump strength for the detected-variance model.
    pub pump: PumpSetting,
    pub total_efficiency: f64,
    /// Sideband frequency the detected variance is evaluated at.
    pub analysis_freq_hz: f64,
}

/// One sample of the coupling demonstration trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingRow {
    pub t_s: f64,
    pub phi_rad: f64,
    pub big_phi_rad: f64,
    /// LO error angle `2·phi + Phi - set`, wrapped.
    pub lo_error_angle_rad: f64,
    /// Detected-quadrature angle deviation `phi + Phi - set`, mod π.
    pub quad_angle_err_rad: f64,
    /// Detected quadrature variance relative to shot noise.
    pub variance_rel_shot: f64,
}

/// Run the coupling demonstration: with both loops closed the detected
/// variance stays at the squeezed level; with the pump loop open and the
/// pump phase drifting, the LO loop tracks `Phi = -2·phi + set` (its error
/// angle grows at twice the drift rate until compensated) but the detected
/// quadrature angle `phi + Phi - set` still walks away at the drift rate.
pub fn loop_coupling_demo(sc: &CouplingScenario) -> Result<Vec<CouplingRow>> {
    sc.lock.validate()?;
    let pair = squeezing_spectrum(
        &sc.pump,
        &sc.lock.cavity,
        sc.total_efficiency,
        &[sc.analysis_freq_hz],
    )?;
    let v_minus = pair.squeezed.bins()[0].rel_variance;
    let v_plus = pair.antisqueezed.bins()[0].rel_variance;
    let mid = 0.5 * (v_plus + v_minus);
    let diff = 0.5 * (v_plus - v_minus);
    let set_lo = sc.lock.servos[LOOP_LO].set_point;

    let r = 0.5 * sc.lock.squeezer_gain.ln();
    let n_steps = ((sc.lock.duration_s / sc.lock.dt_s).round() as usize).max(1);
    let mut rng = sc.lock.disturbance.rng();
    let mut state = sc.lock.lock_point();
    let mut rows = Vec::new();

    for k in 0..n_steps {
        let mut d = sc.lock.disturbance.increments(&mut rng, state.t, sc.lock.dt_s);
        d[LOOP_PUMP] += sc.phi_drift_rad_per_s * sc.lock.dt_s;
        let disturbed = apply_disturbance(&state, d);
        let mut errors = sc.lock.errors_at(&disturbed, r)?;
        if !sc.pump_loop_closed {
            errors[LOOP_PUMP] = 0.0;
        }
        if k % sc.lock.trace_stride == 0 {
            // detected variance for a squeezed axis tied to the pump phase:
            // V = mid + diff·cos(2(phi + Phi))
            let variance =
                mid + diff * (2.0 * (disturbed.phi + disturbed.lo_phase)).cos();
            rows.push(CouplingRow {
                t_s: disturbed.t,
                phi_rad: disturbed.phi,
                big_phi_rad: disturbed.lo_phase,
                lo_error_angle_rad: wrap_angle(
                    2.0 * disturbed.phi + disturbed.lo_phase - set_lo,
                ),
                quad_angle_err_rad: lattice_distance(
                    disturbed.phi + disturbed.lo_phase - set_lo,
                    PI,
                ),
                variance_rel_shot: variance,
            });
        }
        state = step_closed_loop(&state, errors, &sc.lock.servos, d, sc.lock.dt_s)?;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cavity() -> CavityParams {
        CavityParams::new(28.9e6, 4e9, 1.0).unwrap()
    }

    #[test]
    fn angle_wrapping() {
        assert_eq!(wrap_angle(0.0), 0.0);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12); // (-π, π]: -π maps to π
        assert!((wrap_angle(7.0) - (7.0 - TAU)).abs() < 1e-12);
        assert!((lattice_distance(0.9 * PI, PI) + 0.1 * PI).abs() < 1e-12);
        assert!((lattice_distance(-0.4, PI) + 0.4).abs() < 1e-12);
    }

    #[test]
    fn pdh_shape() {
        let cav = cavity();
        assert_eq!(pdh_error(0.0, &cav, 153.8e6).unwrap(), 0.0);
        for &d in &[1e5, 1e6, 5e6, 14.45e6, 40e6] {
            let plus = pdh_error(d, &cav, 153.8e6).unwrap();
            let minus = pdh_error(-d, &cav, 153.8e6).unwrap();
            assert!((plus + minus).abs() < 1e-12, "odd symmetry at {d}");
        }
        // slope at resonance is positive and scales with 1/fwhm at a fixed
        // modulation-to-linewidth ratio
        let slope = |fwhm: f64| {
            let cav = CavityParams::new(fwhm, 400.0 * fwhm, 1.0).unwrap();
            let h = fwhm * 1e-6;
            let fm = 7.0 * fwhm;
            (pdh_error(h, &cav, fm).unwrap() - pdh_error(-h, &cav, fm).unwrap()) / (2.0 * h)
        };
        let s1 = slope(28.9e6);
        let s2 = slope(57.8e6);
        assert!(s1 > 0.0);
        assert!((s1 / s2 - 2.0).abs() < 1e-9, "{s1} vs {s2}");
        // resolved-sideband precondition
        assert!(pdh_error(0.0, &cav, 10e6).is_err());
    }

    #[test]
    fn step_rejects_unstable_timestep() {
        let cfgs = [
            ServoConfig::pump_default(),
            ServoConfig::lo_default(),
            ServoConfig::cavity_default(),
        ];
        let state = LoopState::new(0.0, 0.0, 0.0);
        let err = step_closed_loop(&state, [0.0; 3], &cfgs, [0.0; 3], 2e-3).unwrap_err();
        assert!(matches!(err, Error::UnstableTimestep { .. }));
    }

    #[test]
    fn step_is_identity_at_rest() {
        let cfgs = [
            ServoConfig::pump_default(),
            ServoConfig::lo_default(),
            ServoConfig::cavity_default(),
        ];
        let state = LoopState::new(0.3, -0.8, 100.0);
        let next = step_closed_loop(&state, [0.0; 3], &cfgs, [0.0; 3], 1e-4).unwrap();
        assert_eq!(next.phi, state.phi);
        assert_eq!(next.lo_phase, state.lo_phase);
        assert_eq!(next.detuning_hz, state.detuning_hz);
        assert_eq!(next.saturation_events, 0);
        assert!((next.t - 1e-4).abs() < 1e-18);
    }

    #[test]
    fn integrator_nulls_constant_drift() {
        // constant additive disturbance rate on phi is nulled by the
        // integral term; steady-state phi error goes to zero
        let sc = LockScenario::default_with_gain(10.0);
        let r = 0.5 * sc.squeezer_gain.ln();
        let mut state = sc.lock_point();
        let rate = 0.05; // rad/s
        for _ in 0..200_000 {
            let d = [rate * sc.dt_s, 0.0, 0.0];
            let disturbed = apply_disturbance(&state, d);
            let errors = sc.errors_at(&disturbed, r).unwrap();
            state = step_closed_loop(&state, errors, &sc.servos, d, sc.dt_s).unwrap();
        }
        assert!(
            lattice_distance(state.phi - sc.lock_point().phi, PI).abs() < 2e-5,
            "steady-state phi offset {}",
            state.phi
        );
    }

    #[test]
    fn flipped_polarity_runs_away_from_lock() {
        let mut sc = LockScenario::default_with_gain(10.0);
        let near_lock = LoopState::new(0.05, 0.5 * PI - 0.1, 0.0);
        let (report_good, _) = acquire_lock(&near_lock, &sc).unwrap();
        assert!(report_good.acquired);
        // with inverted pump polarity the former lock point repels and the
        // loop settles a quarter period away
        sc.servos[LOOP_PUMP].polarity = -1.0;
        let (_, trace) = acquire_lock(&near_lock, &sc).unwrap();
        let last = trace.rows.last().unwrap();
        assert!(
            last.phi_rad.abs() > 10.0 * 0.05,
            "did not run away from the old lock point: {}",
            last.phi_rad
        );
        assert!(
            lattice_distance(last.phi_rad - 0.5 * PI, PI).abs() < 1e-2,
            "phi settled at {}",
            last.phi_rad
        );
    }

    #[test]
    fn actuator_saturation_is_reported() {
        let mut sc = LockScenario::default_with_gain(10.0);
        sc.servos[LOOP_PUMP].actuator_limit = 1e-6;
        let start = LoopState::new(0.7, 0.0, 0.0);
        let (report, _) = acquire_lock(&start, &sc).unwrap();
        assert!(!report.acquired);
    }

    #[test]
    fn lock_from_lock_point_is_instant() {
        let sc = LockScenario::default_with_gain(10.0);
        let (report, _) = acquire_lock(&sc.lock_point(), &sc).unwrap();
        assert!(report.acquired);
        assert_eq!(report.acquisition_time_s, 0.0);
        assert!(report.residual_rms_rad < 1e-12);
        assert_eq!(report.out_of_lock_events, 0);
    }

    #[test]
    fn lock_acquires_from_random_phases_with_pump_on() {
        use rand::Rng;
        let sc = LockScenario::default_with_gain(10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for trial in 0..20 {
            let phi0 = rng.random_range(-PI..PI);
            let lo0 = rng.random_range(-PI..PI);
            let det0 = rng.random_range(-5e6..5e6);
            let (report, _) = acquire_lock(&LoopState::new(phi0, lo0, det0), &sc).unwrap();
            assert!(
                report.acquired && report.residual_rms_rad < 1e-3,
                "trial {trial} from ({phi0}, {lo0}, {det0}): {report:?}"
            );
        }
    }

    #[test]
    fn no_lock_without_pump() {
        let sc = LockScenario::default_with_gain(1.0);
        let (report, _) = acquire_lock(&LoopState::new(0.7, -1.1, 0.0), &sc).unwrap();
        assert!(!report.acquired);
        assert_eq!(report.acquisition_time_s, sc.duration_s);
    }

    #[test]
    fn lock_reports_are_deterministic() {
        let mut sc = LockScenario::default_with_gain(10.0);
        sc.disturbance.loops[LOOP_PUMP].random_walk = 0.002;
        sc.disturbance.loops[LOOP_LO].random_walk = 0.002;
        sc.disturbance.seed = 99;
        let start = LoopState::new(1.0, 2.0, 1e6);
        let (r1, t1) = acquire_lock(&start, &sc).unwrap();
        let (r2, t2) = acquire_lock(&start, &sc).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(t1, t2);
    }

    #[test]
    fn lock_points_are_scale_invariant() {
        // scaling the field amplitudes moves no fixed point
        let mut sc = LockScenario::default_with_gain(10.0);
        let start = LoopState::new(0.8, -0.9, 0.0);
        let (_, trace_a) = acquire_lock(&start, &sc).unwrap();
        sc.alpha = 7.0;
        sc.alpha_lo = 3.0;
        // gains renormalized so the loop dynamics stay stable
        sc.servos[LOOP_PUMP].p_gain /= 49.0;
        sc.servos[LOOP_LO].p_gain /= 21.0;
        let (_, trace_b) = acquire_lock(&start, &sc).unwrap();
        let last_a = trace_a.rows.last().unwrap();
        let last_b = trace_b.rows.last().unwrap();
        assert!(lattice_distance(last_a.phi_rad - last_b.phi_rad, PI).abs() < 1e-6);
        assert!(
            lattice_distance(
                (2.0 * last_a.phi_rad + last_a.big_phi_rad)
                    - (2.0 * last_b.phi_rad + last_b.big_phi_rad),
                PI
            )
            .abs()
                < 1e-6
        );
    }

    #[test]
    fn perturbed_lock_point_returns() {
        // fixed points of the pump loop are the stable zeros of the error
        // signal: perturb and watch the loop pull back
        let sc = LockScenario::default_with_gain(10.0);
        let mut start = sc.lock_point();
        start.phi = wrap_angle(start.phi + 0.1);
        let (report, trace) = acquire_lock(&start, &sc).unwrap();
        assert!(report.acquired);
        let last = trace.rows.last().unwrap();
        assert!(lattice_distance(last.phi_rad - sc.lock_point().phi, PI).abs() < 1e-6);
    }

    #[test]
    fn small_gain_loop_is_contractive() {
        let mut sc = LockScenario::default_with_gain(10.0);
        for s in &mut sc.servos {
            s.p_gain = 20.0; // p_gain·dt = 0.002
            s.i_corner_hz = 0.0;
        }
        let r = 0.5 * sc.squeezer_gain.ln();
        let mut state = LoopState::new(0.3, 0.5 * PI - 0.6, 0.0);
        let initial = sc.lock_distance(&state);
        let mut last = f64::INFINITY;
        for k in 0..4000 {
            let errors = sc.errors_at(&state, r).unwrap();
            state = step_closed_loop(&state, errors, &sc.servos, [0.0; 3], sc.dt_s).unwrap();
            let now = sc.lock_distance(&state);
            // monotone once the fast pump mode has died away
            if k > 600 {
                assert!(now <= last + 1e-12, "distance grew at step {k}: {last} -> {now}");
            }
            last = now;
        }
        assert!(last < 1e-2 * initial, "no net contraction: {last} vs {initial}");
    }

    #[test]
    fn coupling_demo_closed_loops_hold_squeezed_variance() {
        let mut lock = LockScenario::default_with_gain(10.0);
        lock.duration_s = 2.0;
        lock.disturbance.loops[LOOP_PUMP].random_walk = 0.01;
        lock.disturbance.seed = 5;
        let sc = CouplingScenario {
            lock,
            pump_loop_closed: true,
            phi_drift_rad_per_s: 0.0,
            pump: PumpSetting::from_classical_gain(10.0).unwrap(),
            total_efficiency: 0.71,
            analysis_freq_hz: 5e6,
        };
        let rows = loop_coupling_demo(&sc).unwrap();
        let v_minus = rows[0].variance_rel_shot; // starts at lock
        for r in rows.iter().skip(rows.len() / 3) {
            assert!(
                (r.variance_rel_shot - v_minus).abs() / v_minus < 0.05,
                "variance wandered to {} at t = {}",
                r.variance_rel_shot,
                r.t_s
            );
        }
    }

    #[test]
    fn coupling_demo_open_pump_loop_loses_quadrature() {
        let mut lock = LockScenario::default_with_gain(10.0);
        lock.duration_s = 10.0;
        let drift = 0.02;
        let sc = CouplingScenario {
            lock,
            pump_loop_closed: false,
            phi_drift_rad_per_s: drift,
            pump: PumpSetting::from_classical_gain(10.0).unwrap(),
            total_efficiency: 0.71,
            analysis_freq_hz: 5e6,
        };
        let rows = loop_coupling_demo(&sc).unwrap();
        // the LO loop keeps its own error angle small...
        let settled = &rows[rows.len() / 2..];
        for r in settled {
            assert!(r.lo_error_angle_rad.abs() < 0.01, "LO error {}", r.lo_error_angle_rad);
        }
        // ...by tracking Phi at minus twice the drift rate...
        let a = settled.first().unwrap();
        let b = settled.last().unwrap();
        let phi_rate = (b.phi_rad - a.phi_rad) / (b.t_s - a.t_s);
        let lo_rate = (b.big_phi_rad - a.big_phi_rad) / (b.t_s - a.t_s);
        assert!((phi_rate - drift).abs() < 0.1 * drift, "phi rate {phi_rate}");
        assert!((lo_rate + 2.0 * drift).abs() < 0.1 * drift, "Phi rate {lo_rate}");
        // ...while the detected quadrature angle walks away at the drift rate
        let final_err = rows.last().unwrap().quad_angle_err_rad.abs();
        let expected = drift * rows.last().unwrap().t_s;
        assert!(
            (final_err - expected).abs() < 0.15 * expected,
            "quad error {final_err} vs {expected}"
        );
        let v = rows.last().unwrap().variance_rel_shot;
        assert!(v > rows[0].variance_rel_shot * 1.05, "variance did not degrade: {v}");
    }

    #[test]
    fn coupling_demo_without_drift_is_configuration_independent() {
        let lock = LockScenario::default_with_gain(10.0);
        let base = CouplingScenario {
            lock,
            pump_loop_closed: true,
            phi_drift_rad_per_s: 0.0,
            pump: PumpSetting::from_classical_gain(10.0).unwrap(),
            total_efficiency: 0.71,
            analysis_freq_hz: 5e6,
        };
        let open = CouplingScenario {
            pump_loop_closed: false,
            ..base.clone()
        };
        assert_eq!(loop_coupling_demo(&base).unwrap(), loop_coupling_demo(&open).unwrap());
    }
}
