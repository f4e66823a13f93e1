//! Imbalanced interferometer for X/Y photonic readout: phase plant with a
//! random drift, duty-cycled stabilization against a metrology fringe,
//! periodic fringe calibration, and the routing measurement that splits each
//! input bin over {early-side, middle, late-side} x {D3, D4}.
//!
//! Conventions: the middle-window projection at detector D3 carries the net
//! beam-splitter phase constant −π/4, so the X and Y setpoints are Δφ = π/4
//! and 3π/4. The servo is modeled as converging to its setpoint with a
//! residual draw of std `residual_lock_sigma`; the measured error signal and
//! verification sample go into the lock report. Cycles are therefore
//! statistically faithful while remaining exactly reproducible when whole
//! cycles are farmed out to parallel workers.

use std::f64::consts::{FRAC_PI_4, TAU};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    apply_kraus_sampled, C64, DensityMatrix, Operator, PHOTON_DIM, PHOTON_EARLY, PHOTON_LATE,
    PHOTON_VACUUM,
};
use crate::tomography::{Detector, Window};

/// Net beam-splitter phase folded into the middle-window projection.
pub const PHASE_CONVENTION_OFFSET: f64 = FRAC_PI_4;

/// Fringe visibility below which the error signal is uninformative.
pub const MIN_LOCK_VISIBILITY: f64 = 0.01;

/// Phase points in one fringe-calibration scan.
const CALIBRATION_POINTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterferometerConfig {
    /// Arm travel-time difference (s); equals the time-bin separation.
    pub delay: f64,
    /// Phase setpoint (rad): π/4 for X readout, 3π/4 for Y readout.
    pub setpoint: f64,
    /// Systematic setpoint inaccuracy (rad) added to the lock target.
    pub setpoint_error: f64,
    /// Scale of the free-running phase drift (rad/s): over a free interval
    /// dt the phase moves by N(0, (drift_rate·dt)²).
    pub drift_rate: f64,
    /// Std of the phase error immediately after stabilization (rad).
    pub residual_lock_sigma: f64,
    /// Duty cycle length (s).
    pub cycle_period: f64,
    /// Stabilization window at the start of each cycle (s).
    pub lock_duration: f64,
    /// Fringe recalibration interval (s).
    pub fringe_calibration_interval: f64,
    /// True fringe contrast of the metrology light.
    pub visibility: f64,
    /// True fringe offset (rad) recovered by calibration.
    pub fringe_offset: f64,
    /// Relative intensity noise on each photodiode sample.
    pub intensity_noise: f64,
    /// Proportional gain of the feedback (diagnostic only).
    pub lock_gain: f64,
}

impl Default for InterferometerConfig {
    fn default() -> Self {
        Self {
            delay: 190e-9,
            setpoint: FRAC_PI_4,
            setpoint_error: 0.0,
            drift_rate: 0.05,
            residual_lock_sigma: 0.05,
            cycle_period: 1.0,
            lock_duration: 0.1,
            fringe_calibration_interval: 100.0,
            visibility: 0.99,
            fringe_offset: 0.0,
            intensity_noise: 0.01,
            lock_gain: 1.0,
        }
    }
}

impl InterferometerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delay <= 0.0 {
            return Err(Error::Config("interferometer.delay must be > 0".into()));
        }
        if !(0.0..TAU).contains(&self.setpoint) {
            return Err(Error::Config(format!(
                "interferometer.setpoint must be in [0, 2π), got {}",
                self.setpoint
            )));
        }
        if self.drift_rate < 0.0 || self.residual_lock_sigma < 0.0 {
            return Err(Error::Config(
                "interferometer drift_rate and residual_lock_sigma must be >= 0".into(),
            ));
        }
        if self.lock_duration <= 0.0 || self.cycle_period <= self.lock_duration {
            return Err(Error::Config(
                "interferometer.lock_duration must be positive and smaller than cycle_period".into(),
            ));
        }
        if self.fringe_calibration_interval <= 0.0 {
            return Err(Error::Config(
                "interferometer.fringe_calibration_interval must be > 0".into(),
            ));
        }
        if !(self.visibility > 0.0 && self.visibility <= 1.0) {
            return Err(Error::Config(format!(
                "interferometer.visibility must be in (0, 1], got {}",
                self.visibility
            )));
        }
        if self.intensity_noise < 0.0 {
            return Err(Error::Config(
                "interferometer.intensity_noise must be >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Lock target including the systematic setpoint inaccuracy.
    pub fn lock_target(&self) -> f64 {
        self.setpoint + self.setpoint_error
    }

    /// Free-running span of each cycle (s).
    pub fn free_run_duration(&self) -> f64 {
        self.cycle_period - self.lock_duration
    }
}

// ---------------------------------------------------------------------------
// Phase plant
// ---------------------------------------------------------------------------

/// The interferometer phase Δφ and its current free-run drift velocity.
///
/// Drift model: each free-running segment gets one velocity draw
/// ν ~ N(0, drift_rate²), so the phase change over any span dt within the
/// segment has std drift_rate·dt, and sub-interval evolution composes
/// consistently (the increments within a segment are fully correlated).
#[derive(Debug, Clone)]
pub struct PhasePlant {
    pub delta_phi: f64,
    velocity: Option<f64>,
}

impl PhasePlant {
    pub fn new(delta_phi: f64) -> Self {
        Self {
            delta_phi,
            velocity: None,
        }
    }

    pub fn velocity(&self) -> Option<f64> {
        self.velocity
    }
}

/// Advance the free-running plant by dt.
pub fn evolve_phase<R: Rng + ?Sized>(
    plant: &mut PhasePlant,
    cfg: &InterferometerConfig,
    dt: f64,
    rng: &mut R,
) {
    debug_assert!(dt >= 0.0);
    let v = *plant.velocity.get_or_insert_with(|| {
        if cfg.drift_rate > 0.0 {
            Normal::new(0.0, cfg.drift_rate)
                .expect("valid drift rate")
                .sample(rng)
        } else {
            0.0
        }
    });
    plant.delta_phi += v * dt;
}

// ---------------------------------------------------------------------------
// Fringe calibration
// ---------------------------------------------------------------------------

/// Result of a fringe scan: fitted visibility and offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeCalibration {
    pub visibility: f64,
    pub offset: f64,
    pub calibrated_at: f64,
}

fn pd_intensities<R: Rng + ?Sized>(
    phase: f64,
    cfg: &InterferometerConfig,
    rng: &mut R,
) -> (f64, f64) {
    let fringe = cfg.visibility * (phase - cfg.fringe_offset).cos();
    let noise = Normal::new(0.0, cfg.intensity_noise.max(1e-300)).expect("valid noise");
    let i2 = (1.0 + fringe) / 2.0 + if cfg.intensity_noise > 0.0 { noise.sample(rng) } else { 0.0 };
    let i3 = (1.0 - fringe) / 2.0 + if cfg.intensity_noise > 0.0 { noise.sample(rng) } else { 0.0 };
    (i2, i3)
}

/// Scan the piezo over a full fringe and fit a sinusoid by linear least
/// squares on the {1, cos, sin} basis (exactly orthogonal on the uniform
/// grid), recovering visibility and offset.
pub fn calibrate_fringe<R: Rng + ?Sized>(
    cfg: &InterferometerConfig,
    now: f64,
    rng: &mut R,
) -> FringeCalibration {
    let n = CALIBRATION_POINTS;
    let mut mean = 0.0;
    let mut b = 0.0;
    let mut c = 0.0;
    for k in 0..n {
        let phi = TAU * k as f64 / n as f64;
        let (i2, _i3) = pd_intensities(phi, cfg, rng);
        mean += i2;
        b += i2 * phi.cos();
        c += i2 * phi.sin();
    }
    mean /= n as f64;
    b = 2.0 * b / n as f64;
    c = 2.0 * c / n as f64;
    let visibility = ((b * b + c * c).sqrt() / mean).clamp(0.0, 1.0);
    let offset = c.atan2(b).rem_euclid(TAU);
    FringeCalibration {
        visibility,
        offset,
        calibrated_at: now,
    }
}

// ---------------------------------------------------------------------------
// Stabilization
// ---------------------------------------------------------------------------

/// Outcome of one stabilization window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LockReport {
    pub success: bool,
    /// Whether a stale fringe calibration was refreshed first.
    pub recalibrated: bool,
    pub pre_lock_phase: f64,
    /// Phase inferred from the PD2/PD3 error signal before correcting.
    pub estimated_phase: f64,
    pub applied_correction: f64,
    pub post_lock_phase: f64,
    /// Error signal measured again after the correction.
    pub verification_error: f64,
}

/// Infer Δφ from one pair of PD samples using the current calibration. The
/// acos branch is unique for phases in (offset, offset + π), which covers
/// both setpoints.
fn estimate_phase<R: Rng + ?Sized>(
    plant_phase: f64,
    cfg: &InterferometerConfig,
    cal: &FringeCalibration,
    rng: &mut R,
) -> f64 {
    let (i2, i3) = pd_intensities(plant_phase, cfg, rng);
    let cos_est = ((i2 - i3) / cal.visibility.max(MIN_LOCK_VISIBILITY)).clamp(-1.0, 1.0);
    cal.offset + cos_est.acos()
}

/// One stabilization window: refresh a stale calibration, measure the error
/// signal, drive the piezo to the lock target (up to the residual draw), and
/// verify with a second measurement. Clears the plant's drift velocity so
/// the next free-run segment draws a fresh one.
pub fn stabilize<R: Rng + ?Sized>(
    plant: &mut PhasePlant,
    cfg: &InterferometerConfig,
    cal: &mut FringeCalibration,
    now: f64,
    rng: &mut R,
) -> LockReport {
    let pre = plant.delta_phi;
    let mut recalibrated = false;
    if now - cal.calibrated_at > cfg.fringe_calibration_interval {
        *cal = calibrate_fringe(cfg, now, rng);
        recalibrated = true;
    }
    if cal.visibility < MIN_LOCK_VISIBILITY {
        return LockReport {
            success: false,
            recalibrated,
            pre_lock_phase: pre,
            estimated_phase: f64::NAN,
            applied_correction: 0.0,
            post_lock_phase: pre,
            verification_error: f64::NAN,
        };
    }
    let target = cfg.lock_target();
    let estimated = estimate_phase(pre, cfg, cal, rng);
    let residual = if cfg.residual_lock_sigma > 0.0 {
        Normal::new(0.0, cfg.residual_lock_sigma)
            .expect("valid sigma")
            .sample(rng)
    } else {
        0.0
    };
    // Full-gain servo lands on the target up to the settle residual; lower
    // gain leaves the corresponding fraction of the incoming error.
    let gain = cfg.lock_gain.clamp(0.0, 1.0);
    plant.delta_phi = target + residual + (1.0 - gain) * (pre - target);
    plant.velocity = None;
    let verification = estimate_phase(plant.delta_phi, cfg, cal, rng);
    LockReport {
        success: true,
        recalibrated,
        pre_lock_phase: pre,
        estimated_phase: estimated,
        applied_correction: plant.delta_phi - pre,
        post_lock_phase: plant.delta_phi,
        verification_error: verification - target,
    }
}

// ---------------------------------------------------------------------------
// Photon routing
// ---------------------------------------------------------------------------

/// One routed detection: arrival window, output detector, branch
/// probability, and the post-measurement joint state (photon absorbed).
#[derive(Debug, Clone)]
pub struct RoutedClick {
    pub window: Window,
    pub detector: Detector,
    pub probability: f64,
    pub post_state: DensityMatrix,
}

/// Kraus operators (on the photonic mode) of the routing measurement at
/// plant phase Δφ. Each input bin splits 50/50 over the short and long arm;
/// early-via-long and late-via-short interfere in the middle window with
/// relative phase γ = Δφ − π/4 between the D3 amplitudes (sign-flipped on
/// the L term for D4).
pub fn routing_kraus(delta_phi: f64) -> Vec<(Window, Detector, Operator)> {
    let gamma = delta_phi - PHASE_CONVENTION_OFFSET;
    let half = C64::new(0.5, 0.0);
    let phase = C64::from_polar(0.5, gamma);
    let make = |entries: &[(usize, C64)]| {
        let mut mat = vec![C64::ZERO; PHOTON_DIM * PHOTON_DIM];
        for &(col, amp) in entries {
            mat[PHOTON_VACUUM * PHOTON_DIM + col] = amp;
        }
        Operator::new(vec![PHOTON_DIM], mat).expect("3x3")
    };
    vec![
        (Window::Early, Detector::D3, make(&[(PHOTON_EARLY, half)])),
        (Window::Early, Detector::D4, make(&[(PHOTON_EARLY, half)])),
        (
            Window::Middle,
            Detector::D3,
            make(&[(PHOTON_EARLY, phase), (PHOTON_LATE, half)]),
        ),
        (
            Window::Middle,
            Detector::D4,
            make(&[(PHOTON_EARLY, phase), (PHOTON_LATE, -half)]),
        ),
        (Window::Late, Detector::D3, make(&[(PHOTON_LATE, half)])),
        (Window::Late, Detector::D4, make(&[(PHOTON_LATE, half)])),
    ]
}

/// Route a photon-carrying joint state through the interferometer and sample
/// which (window, detector) fires. The photonic mode must not be in vacuum.
pub fn route_photon<R: Rng + ?Sized>(
    state: &DensityMatrix,
    delta_phi: f64,
    rng: &mut R,
) -> Result<RoutedClick> {
    let photon_subsystem = state.dims().len() - 1;
    if state.dims()[photon_subsystem] != PHOTON_DIM {
        return Err(Error::DimensionMismatch(
            "state has no photonic mode in the last slot".into(),
        ));
    }
    let vac_proj = crate::hilbert::ops::level_projector(PHOTON_DIM, PHOTON_VACUUM)
        .embed(state.dims(), &[photon_subsystem])?;
    let vac_weight = state.expectation(&vac_proj)?.re;
    if vac_weight > 1e-9 {
        return Err(Error::VacuumInput);
    }
    let labelled = routing_kraus(delta_phi);
    let mut kraus: Vec<Operator> = Vec::with_capacity(labelled.len() + 1);
    for (_, _, k) in &labelled {
        kraus.push(k.embed(state.dims(), &[photon_subsystem])?);
    }
    // Vacuum passes through untouched; with the vacuum check above this
    // branch has zero weight and only completes the Kraus set.
    kraus.push(vac_proj);
    let (branch, post, probability) = apply_kraus_sampled(state, &kraus, rng)?;
    if branch == labelled.len() {
        return Err(Error::VacuumInput);
    }
    let (window, detector, _) = labelled[branch].clone();
    Ok(RoutedClick {
        window,
        detector,
        probability,
        post_state: post,
    })
}

/// Window/detector distribution for an uncorrelated noise photon (uniform
/// over the two bins): a single-bin photon shows no interference, so the
/// middle window takes half the weight and each side window a quarter, with
/// both detectors equally likely.
pub fn route_noise_photon<R: Rng + ?Sized>(rng: &mut R) -> (Window, Detector) {
    let window = match rng.random_range(0..4u32) {
        0 => Window::Early,
        1 | 2 => Window::Middle,
        _ => Window::Late,
    };
    let detector = if rng.random_bool(0.5) {
        Detector::D3
    } else {
        Detector::D4
    };
    (window, detector)
}

// ---------------------------------------------------------------------------
// Phase trace
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CyclePhase {
    PreLock,
    PostLock,
}

impl std::fmt::Display for CyclePhase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CyclePhase::PreLock => "pre-lock",
            CyclePhase::PostLock => "post-lock",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSample {
    pub time: f64,
    pub delta_phi: f64,
    pub phase_of_cycle: CyclePhase,
}

/// Time-ordered record of the plant phase around each stabilization.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTrace {
    pub samples: Vec<PhaseSample>,
}

impl PhaseTrace {
    pub fn push(&mut self, sample: PhaseSample) {
        if let Some(last) = self.samples.last() {
            debug_assert!(sample.time > last.time, "phase trace times must increase");
        }
        self.samples.push(sample);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,delta_phi,phase_of_cycle\n");
        for s in &self.samples {
            out.push_str(&format!("{},{},{}\n", s.time, s.delta_phi, s.phase_of_cycle));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut trace = PhaseTrace::default();
        for (lineno, line) in text.lines().enumerate() {
            if lineno == 0 || line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::Parse(format!(
                    "phase trace line {lineno}: expected 3 fields"
                )));
            }
            let time: f64 = fields[0]
                .parse()
                .map_err(|e| Error::Parse(format!("phase trace line {lineno}: {e}")))?;
            let delta_phi: f64 = fields[1]
                .parse()
                .map_err(|e| Error::Parse(format!("phase trace line {lineno}: {e}")))?;
            let phase_of_cycle = match fields[2] {
                "pre-lock" => CyclePhase::PreLock,
                "post-lock" => CyclePhase::PostLock,
                other => {
                    return Err(Error::Parse(format!(
                        "phase trace line {lineno}: unknown cycle phase '{other}'"
                    )))
                }
            };
            trace.samples.push(PhaseSample {
                time,
                delta_phi,
                phase_of_cycle,
            });
        }
        Ok(trace)
    }

    /// Std of the (phase − setpoint) residuals for one population.
    pub fn spread(&self, which: CyclePhase, setpoint: f64) -> f64 {
        let residuals: Vec<f64> = self
            .samples
            .iter()
            .filter(|s| s.phase_of_cycle == which)
            .map(|s| s.delta_phi - setpoint)
            .collect();
        crate::stats::std_dev(&residuals)
    }
}
