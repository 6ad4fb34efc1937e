//! Loss and efficiency accounting for squeezed states, frequency-dependent
//! dark-port reflectivity of a Michelson interferometer, and the injection
//! planner for heterodyne-readout detectors.

use crate::error::{Error, Result};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Vacuum admixture of a lossy channel: `V' = eta·V + 1 - eta`.
///
/// Maps the vacuum (`V = 1`) to itself, is affine and monotone in the
/// efficiency, and composes multiplicatively:
/// `apply_loss(apply_loss(V, a), b) = apply_loss(V, a·b)`.
pub fn apply_loss(variance_rel_shot: f64, efficiency: f64) -> Result<f64> {
    if variance_rel_shot <= 0.0 || !variance_rel_shot.is_finite() {
        return Err(Error::NonPositive {
            name: "variance",
            value: variance_rel_shot,
        });
    }
    if !(0.0..=1.0).contains(&efficiency) {
        return Err(Error::OutOfRange {
            name: "efficiency",
            value: efficiency,
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok(efficiency * variance_rel_shot + 1.0 - efficiency)
}

/// Ordered chain of named efficiency stages.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EfficiencyChain {
    stages: Vec<(String, f64)>,
}

impl EfficiencyChain {
    pub fn new(stages: Vec<(String, f64)>) -> Result<Self> {
        for (name, eta) in &stages {
            if !(0.0..=1.0).contains(eta) {
                return Err(Error::OutOfRange {
                    name: "stage_efficiency",
                    value: *eta,
                    lo: 0.0,
                    hi: 1.0,
                });
            }
            if name.is_empty() {
                return Err(Error::NonPositive {
                    name: "stage_name.len",
                    value: 0.0,
                });
            }
        }
        Ok(Self { stages })
    }

    pub fn stages(&self) -> &[(String, f64)] {
        &self.stages
    }
}

/// Product of all stage efficiencies; an empty chain is lossless.
pub fn chain_total(chain: &EfficiencyChain) -> f64 {
    chain.stages.iter().map(|(_, eta)| eta).product()
}

/// Simple interferometer model seen from the dark port.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferometerModel {
    /// Heterodyne modulation frequency; 0 means homodyne readout.
    pub heterodyne_freq_hz: f64,
    /// Macroscopic arm-length difference making the dark port transmissive
    /// at radio frequencies.
    pub schnupp_asymmetry_m: f64,
    /// Measured power reflectivities pinned at specific frequencies; these
    /// take precedence over the asymmetry model.
    pub reflectivity_overrides: Vec<(f64, f64)>,
}

impl InterferometerModel {
    pub fn new(
        heterodyne_freq_hz: f64,
        schnupp_asymmetry_m: f64,
        reflectivity_overrides: Vec<(f64, f64)>,
    ) -> Result<Self> {
        if heterodyne_freq_hz < 0.0 || !heterodyne_freq_hz.is_finite() {
            return Err(Error::OutOfRange {
                name: "heterodyne_freq",
                value: heterodyne_freq_hz,
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        if schnupp_asymmetry_m < 0.0 || !schnupp_asymmetry_m.is_finite() {
            return Err(Error::OutOfRange {
                name: "schnupp_asymmetry",
                value: schnupp_asymmetry_m,
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        for &(f, r) in &reflectivity_overrides {
            if f < 0.0 || !(0.0..=1.0).contains(&r) {
                return Err(Error::OutOfRange {
                    name: "reflectivity_override",
                    value: r,
                    lo: 0.0,
                    hi: 1.0,
                });
            }
        }
        Ok(Self {
            heterodyne_freq_hz,
            schnupp_asymmetry_m,
            reflectivity_overrides,
        })
    }

    /// GEO 600-like preset: 14.9 MHz heterodyne frequency with the measured
    /// 96 % power reflectivity pinned at twice that frequency.
    pub fn geo600() -> Self {
        Self {
            heterodyne_freq_hz: 14.9e6,
            schnupp_asymmetry_m: 0.1,
            reflectivity_overrides: vec![(29.8e6, 0.96)],
        }
    }
}

/// Dark-port power reflectivity at a sideband frequency.
///
/// Explicit overrides win; otherwise the Schnupp-asymmetry model
/// `cos²(2π·f·ΔL/c)` applies, which reflects the carrier perfectly.
pub fn dark_port_reflectivity(model: &InterferometerModel, freq_hz: f64) -> f64 {
    for &(f, r) in &model.reflectivity_overrides {
        if (freq_hz - f).abs() <= 1e-6 * f.abs().max(1.0) {
            return r;
        }
    }
    let phase = std::f64::consts::TAU * freq_hz * model.schnupp_asymmetry_m / SPEED_OF_LIGHT;
    phase.cos().powi(2)
}

/// Frequency band in Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyBand {
    pub lo_hz: f64,
    pub hi_hz: f64,
}

impl FrequencyBand {
    pub fn new(lo_hz: f64, hi_hz: f64) -> Result<Self> {
        if lo_hz < 0.0 || hi_hz <= lo_hz || !hi_hz.is_finite() {
            return Err(Error::OutOfRange {
                name: "band",
                value: hi_hz,
                lo: lo_hz,
                hi: f64::INFINITY,
            });
        }
        Ok(Self { lo_hz, hi_hz })
    }

    pub fn center_hz(&self) -> f64 {
        0.5 * (self.lo_hz + self.hi_hz)
    }
}

/// Injection routing decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InjectionCase {
    /// Dark port reflects both bands well: inject everything there.
    DarkPortOnly,
    /// Dark port transmits the radio-frequency band: split the squeezed
    /// field in frequency space and inject the high band at the bright port.
    FilterSplit,
    /// Intermediate reflectivity: tap the reflected power fraction of the
    /// high band off to the bright port so both paths recombine in the
    /// signal port.
    PartialTap,
}

impl InjectionCase {
    pub fn as_str(&self) -> &'static str {
        match self {
            InjectionCase::DarkPortOnly => "dark-port-only",
            InjectionCase::FilterSplit => "filter-split",
            InjectionCase::PartialTap => "partial-tap",
        }
    }
}

/// Routing and expected squeezing for one band.
#[derive(Debug, Clone, PartialEq)]
pub struct BandPlan {
    pub band: FrequencyBand,
    pub r_power: f64,
    pub dark_port_fraction: f64,
    pub bright_port_fraction: f64,
    pub route: &'static str,
    pub eta_total: f64,
    pub squeezing_in_db: f64,
    pub squeezing_out_db: f64,
}

/// Injection plan for the audio signal band and the band around twice the
/// heterodyne frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectionPlan {
    pub case: InjectionCase,
    pub low_band: BandPlan,
    pub high_band: BandPlan,
}

/// Case-selection thresholds and the filter insertion efficiency; artifact
/// parameters with defaults, the regimes themselves are qualitative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InjectionThresholds {
    /// Power reflectivity at and above which a band counts as reflected.
    pub high_reflect: f64,
    /// Power reflectivity at and below which a band counts as transmitted.
    pub low_reflect: f64,
    /// Minimum signal-band reflectivity the planner supports.
    pub min_signal_band_reflect: f64,
    /// Efficiency of the frequency splitter used by the split and tap cases.
    pub filter_insertion_efficiency: f64,
}

impl Default for InjectionThresholds {
    fn default() -> Self {
        Self {
            high_reflect: 0.9,
            low_reflect: 0.1,
            min_signal_band_reflect: 0.9,
            filter_insertion_efficiency: 1.0,
        }
    }
}

/// Plan where to inject a broadband squeezed field of `squeezing_db`
/// nonclassical noise suppression.
///
/// The case selection is a pure function of the dark-port power
/// reflectivities at the signal band and at twice the heterodyne frequency;
/// per-band output levels follow from [`apply_loss`]. A signal band that the
/// dark port does not reflect well is outside the supported regime.
pub fn plan_injection(
    model: &InterferometerModel,
    signal_band: FrequencyBand,
    squeezing_db: f64,
    thresholds: &InjectionThresholds,
) -> Result<InjectionPlan> {
    if squeezing_db <= 0.0 || !squeezing_db.is_finite() {
        return Err(Error::NonPositive {
            name: "squeezing_db",
            value: squeezing_db,
        });
    }
    let r_low = dark_port_reflectivity(model, signal_band.hi_hz);
    if r_low < thresholds.min_signal_band_reflect {
        return Err(Error::UnsupportedInjection {
            r_power: r_low,
            min: thresholds.min_signal_band_reflect,
        });
    }
    let f_high = 2.0 * model.heterodyne_freq_hz;
    let r_high = dark_port_reflectivity(model, f_high);
    let high_band = FrequencyBand::new(
        (f_high - signal_band.hi_hz).max(0.0),
        f_high + signal_band.hi_hz,
    )?;
    let v_in = crate::ratio_from_db(-squeezing_db);
    let filter_eta = thresholds.filter_insertion_efficiency;

    let (case, low, high) = if r_high >= thresholds.high_reflect {
        // everything from the dark port; the high band sees the residual
        // transmission as loss
        let low = band_plan(signal_band, r_low, 1.0, 0.0, "dark", r_low, v_in, squeezing_db)?;
        let high = band_plan(high_band, r_high, 1.0, 0.0, "dark", r_high, v_in, squeezing_db)?;
        (InjectionCase::DarkPortOnly, low, high)
    } else if r_high <= thresholds.low_reflect {
        // split in frequency space; high band enters the bright port and is
        // transmitted into the signal port
        let low = band_plan(
            signal_band,
            r_low,
            1.0,
            0.0,
            "dark",
            r_low * filter_eta,
            v_in,
            squeezing_db,
        )?;
        let high = band_plan(
            high_band,
            r_high,
            0.0,
            1.0,
            "bright",
            (1.0 - r_high) * filter_eta,
            v_in,
            squeezing_db,
        )?;
        (InjectionCase::FilterSplit, low, high)
    } else {
        // tap the reflected power fraction off to the bright port; the two
        // paths recombine in the signal port
        let low = band_plan(
            signal_band,
            r_low,
            1.0,
            0.0,
            "dark",
            r_low * filter_eta,
            v_in,
            squeezing_db,
        )?;
        let high = band_plan(
            high_band,
            r_high,
            1.0 - r_high,
            r_high,
            "split",
            filter_eta,
            v_in,
            squeezing_db,
        )?;
        (InjectionCase::PartialTap, low, high)
    };
    Ok(InjectionPlan {
        case,
        low_band: low,
        high_band: high,
    })
}

#[allow(clippy::too_many_arguments)]
fn band_plan(
    band: FrequencyBand,
    r_power: f64,
    dark: f64,
    bright: f64,
    route: &'static str,
    eta: f64,
    v_in: f64,
    squeezing_db: f64,
) -> Result<BandPlan> {
    let v_out = apply_loss(v_in, eta)?;
    Ok(BandPlan {
        band,
        r_power,
        dark_port_fraction: dark,
        bright_port_fraction: bright,
        route,
        eta_total: eta,
        squeezing_in_db: squeezing_db,
        squeezing_out_db: -crate::db_from_ratio(v_out),
    })
}

/// Frequency bands that must carry squeezing for a heterodyne readout: the
/// signal band itself and its image around twice the heterodyne frequency.
/// Homodyne readout (`heterodyne_freq = 0`) needs only the signal band.
pub fn heterodyne_requirements(
    model: &InterferometerModel,
    signal_band: FrequencyBand,
) -> Result<Vec<FrequencyBand>> {
    if model.heterodyne_freq_hz == 0.0 {
        return Ok(vec![signal_band]);
    }
    if signal_band.hi_hz >= model.heterodyne_freq_hz {
        return Err(Error::OutOfRange {
            name: "signal_band.hi",
            value: signal_band.hi_hz,
            lo: 0.0,
            hi: model.heterodyne_freq_hz,
        });
    }
    let f2 = 2.0 * model.heterodyne_freq_hz;
    Ok(vec![
        signal_band,
        FrequencyBand::new(f2 - signal_band.hi_hz, f2 + signal_band.hi_hz)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{db_from_ratio, ratio_from_db};
    use proptest::prelude::*;

    #[test]
    fn loss_model_reference_points() {
        assert_eq!(apply_loss(0.5, 1.0).unwrap(), 0.5);
        assert_eq!(apply_loss(0.5, 0.0).unwrap(), 1.0);
        assert_eq!(apply_loss(1.0, 0.37).unwrap(), 1.0);
        // 6 dB of squeezing through 96 % power efficiency leaves 5.51 dB
        let v = apply_loss(ratio_from_db(-6.0), 0.96).unwrap();
        assert!((-db_from_ratio(v) - 5.51).abs() < 0.005, "{}", db_from_ratio(v));
        assert!(apply_loss(0.0, 0.5).is_err());
        assert!(apply_loss(0.5, 1.2).is_err());
    }

    #[test]
    fn chain_reference_points() {
        let chain = EfficiencyChain::new(vec![
            ("faraday".into(), 0.95),
            ("mode_matching".into(), 0.943),
        ])
        .unwrap();
        assert!((chain_total(&chain) - 0.89585).abs() < 1e-10);
        assert_eq!(chain_total(&EfficiencyChain::default()), 1.0);
        let dead = EfficiencyChain::new(vec![("block".into(), 0.0)]).unwrap();
        assert_eq!(chain_total(&dead), 0.0);
        assert!(EfficiencyChain::new(vec![("bad".into(), 1.5)]).is_err());
    }

    #[test]
    fn reflectivity_model_and_overrides() {
        let model = InterferometerModel::geo600();
        assert_eq!(dark_port_reflectivity(&model, 0.0), 1.0);
        // pinned measurement wins over the asymmetry model
        assert_eq!(dark_port_reflectivity(&model, 29.8e6), 0.96);
        // quarter-wave frequency transmits fully
        let bare = InterferometerModel::new(0.0, 0.25, vec![]).unwrap();
        let f_quarter = SPEED_OF_LIGHT / (4.0 * 0.25);
        assert!(dark_port_reflectivity(&bare, f_quarter) < 1e-20);
    }

    #[test]
    fn injection_case_dark_port_only() {
        let model = InterferometerModel::geo600();
        let band = FrequencyBand::new(10.0, 10e3).unwrap();
        let plan =
            plan_injection(&model, band, 6.0, &InjectionThresholds::default()).unwrap();
        assert_eq!(plan.case, InjectionCase::DarkPortOnly);
        assert_eq!(plan.low_band.dark_port_fraction, 1.0);
        assert_eq!(plan.high_band.dark_port_fraction, 1.0);
        assert!((plan.high_band.squeezing_out_db - 5.51).abs() < 0.005);
        assert!(plan.low_band.squeezing_out_db > 5.9);
    }

    #[test]
    fn injection_case_filter_split() {
        // fully transmissive at twice the heterodyne frequency
        let model =
            InterferometerModel::new(14.9e6, 0.1, vec![(29.8e6, 0.0)]).unwrap();
        let band = FrequencyBand::new(10.0, 10e3).unwrap();
        let plan =
            plan_injection(&model, band, 6.0, &InjectionThresholds::default()).unwrap();
        assert_eq!(plan.case, InjectionCase::FilterSplit);
        assert_eq!(plan.high_band.bright_port_fraction, 1.0);
        assert_eq!(plan.high_band.route, "bright");
        // zero extra loss keeps the full input squeezing in both bands
        assert!((plan.high_band.squeezing_out_db - 6.0).abs() < 1e-9);
    }

    #[test]
    fn injection_case_partial_tap() {
        let model =
            InterferometerModel::new(14.9e6, 0.1, vec![(29.8e6, 0.5)]).unwrap();
        let band = FrequencyBand::new(10.0, 10e3).unwrap();
        let plan =
            plan_injection(&model, band, 6.0, &InjectionThresholds::default()).unwrap();
        assert_eq!(plan.case, InjectionCase::PartialTap);
        assert_eq!(plan.high_band.bright_port_fraction, 0.5);
        assert_eq!(plan.high_band.dark_port_fraction, 0.5);
        // fractions sum to one per band
        assert_eq!(
            plan.high_band.dark_port_fraction + plan.high_band.bright_port_fraction,
            1.0
        );
        assert_eq!(
            plan.low_band.dark_port_fraction + plan.low_band.bright_port_fraction,
            1.0
        );
    }

    #[test]
    fn injection_rejects_transmissive_signal_band() {
        // huge asymmetry makes even the signal band transmissive
        let model = InterferometerModel::new(14.9e6, 2000.0, vec![]).unwrap();
        let band = FrequencyBand::new(10.0, 10e3).unwrap();
        let err =
            plan_injection(&model, band, 6.0, &InjectionThresholds::default()).unwrap_err();
        assert!(matches!(err, Error::UnsupportedInjection { .. }));
    }

    #[test]
    fn heterodyne_requirement_bands() {
        let model = InterferometerModel::geo600();
        let band = FrequencyBand::new(10.0, 10e3).unwrap();
        let bands = heterodyne_requirements(&model, band).unwrap();
        assert_eq!(bands.len(), 2);
        assert_eq!(bands[0].lo_hz, 10.0);
        assert_eq!(bands[1].lo_hz, 29.8e6 - 10e3);
        assert_eq!(bands[1].hi_hz, 29.8e6 + 10e3);
        // high band is symmetric about twice the heterodyne frequency
        assert!((bands[1].center_hz() - 29.8e6).abs() < 1e-6);

        let homodyne = InterferometerModel::new(0.0, 0.1, vec![]).unwrap();
        assert_eq!(heterodyne_requirements(&homodyne, band).unwrap(), vec![band]);

        let too_wide = FrequencyBand::new(10.0, 20e6).unwrap();
        assert!(heterodyne_requirements(&model, too_wide).is_err());
    }

    proptest! {
        #[test]
        fn loss_composes_multiplicatively(v in 0.01f64..5.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let seq = apply_loss(apply_loss(v, a).unwrap(), b).unwrap();
            let combined = apply_loss(v, a * b).unwrap();
            prop_assert!((seq - combined).abs() < 1e-12);
        }

        #[test]
        fn loss_is_monotone_toward_vacuum(v in 0.01f64..5.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let v_lo = apply_loss(v, lo).unwrap();
            let v_hi = apply_loss(v, hi).unwrap();
            prop_assert!((v_lo - 1.0).abs() <= (v_hi - 1.0).abs() + 1e-12);
        }

        #[test]
        fn common_loss_preserves_uncertainty_product(r in 0.0f64..2.0, eta in 0.0f64..1.0) {
            let v_minus = (-2.0 * r).exp();
            let v_plus = (2.0 * r).exp();
            let a = apply_loss(v_minus, eta).unwrap();
            let b = apply_loss(v_plus, eta).unwrap();
            prop_assert!(a * b >= 1.0 - 1e-12);
        }

        #[test]
        fn chain_total_is_order_independent(e1 in 0.0f64..1.0, e2 in 0.0f64..1.0, e3 in 0.0f64..1.0) {
            let fwd = EfficiencyChain::new(vec![
                ("a".into(), e1), ("b".into(), e2), ("c".into(), e3),
            ]).unwrap();
            let rev = EfficiencyChain::new(vec![
                ("c".into(), e3), ("b".into(), e2), ("a".into(), e1),
            ]).unwrap();
            prop_assert!((chain_total(&fwd) - chain_total(&rev)).abs() < 1e-15);
        }
    }
}
